use super::dd::Dd;
use super::prefix::PrefixStats;
use crate::error::{Error, Result};
use crate::types::{CurveSet, ModelKind};

/// Pointwise mean of the selected curves, accumulated in member order.
pub fn mean_curve(set: &CurveSet, members: &[usize]) -> Vec<f64> {
    let mut mean = vec![0.0; set.width()];
    for &i in members {
        for (acc, v) in mean.iter_mut().zip(set.row(i)) {
            *acc += v;
        }
    }
    let n = members.len() as f64;
    for v in &mut mean {
        *v /= n;
    }
    mean
}

/// Statistics for summarizing a group of curves under the sum of squared
/// errors: the group's mean curve plus the per-column scatter around it,
/// which no segmentation can remove.
#[derive(Debug, Clone)]
pub struct SetStats {
    members: usize,
    mean: PrefixStats,
    residual: Vec<f64>,
    residual_prefix: Vec<Dd>,
}

impl SetStats {
    pub fn member_count(&self) -> usize {
        self.members
    }

    pub fn mean(&self) -> &PrefixStats {
        &self.mean
    }

    /// Per-column scatter `sum_i (s_i(t_j) - mu(t_j))^2`.
    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn residual_total(&self) -> f64 {
        self.residual_prefix[self.residual.len()].to_f64()
    }

    /// Scatter restricted to columns `first..=last`.
    pub fn residual_between(&self, first: usize, last: usize) -> f64 {
        (self.residual_prefix[last + 1] - self.residual_prefix[first]).to_f64()
    }

    #[inline]
    pub(crate) fn cost(&self, kind: ModelKind, first: usize, last: usize) -> f64 {
        let n = self.members as f64;
        let model = match kind {
            ModelKind::ConstantL2 => self.mean.constant_l2(first, last),
            ModelKind::LineL2 => self.mean.line_l2(first, last),
            ModelKind::InterpL2 => self.mean.interp_l2(first, last),
            ModelKind::ConstantL1 => f64::NAN,
        };
        n * model + self.residual_between(first, last)
    }

    /// Cost of one interpolation piece when adjacent pieces share knots:
    /// the scatter of the left knot column is charged only to the first
    /// piece so that the pieces add up to the total error exactly once.
    #[inline]
    pub(crate) fn knot_piece_cost(&self, first: usize, last: usize) -> f64 {
        let n = self.members as f64;
        let from = if first == 0 { 0 } else { first + 1 };
        let scatter = (self.residual_prefix[last + 1] - self.residual_prefix[from]).to_f64();
        n * self.mean.interp_l2(first, last) + scatter
    }
}

pub fn build_set_stats(set: &CurveSet, members: &[usize]) -> Result<SetStats> {
    if members.is_empty() {
        return Err(Error::domain("cannot summarize an empty group of curves"));
    }
    if let Some(&i) = members.iter().find(|&&i| i >= set.len()) {
        return Err(Error::domain(format!("curve index {i} out of range")));
    }
    let mean = mean_curve(set, members);
    let mut residual = vec![0.0; set.width()];
    for &i in members {
        for ((acc, v), mu) in residual.iter_mut().zip(set.row(i)).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    let mut residual_prefix = Vec::with_capacity(residual.len() + 1);
    let mut acc = Dd::ZERO;
    residual_prefix.push(acc);
    for &r in &residual {
        acc = acc.add_f64(r);
        residual_prefix.push(acc);
    }
    Ok(SetStats {
        members: members.len(),
        mean: PrefixStats::new(set.grid().points(), &mean),
        residual,
        residual_prefix,
    })
}

/// `min` over the model parameters of the summed squared error of all
/// members on `first..=last`, through the mean-curve decomposition.
pub fn cost_set_sum(stats: &SetStats, first: usize, last: usize, kind: ModelKind) -> Result<f64> {
    if first > last || last >= stats.mean.len() {
        return Err(Error::domain(format!("segment {first}..={last} out of range")));
    }
    match kind {
        ModelKind::ConstantL1 => Err(Error::domain(
            "const-l1 has no mean-curve decomposition; use the pooled-median cost",
        )),
        ModelKind::InterpL2 if first == last => {
            Err(Error::domain("a chord needs two distinct end points"))
        }
        _ => Ok(stats.cost(kind, first, last)),
    }
}

/// Minimizer and value of `max_i n (a - m_i)^2 + v_i` over the level `a`,
/// where `m_i` and `v_i` are each member's mean and squared error on the
/// segment.
pub(crate) fn minimax_level(members: &[PrefixStats], first: usize, last: usize) -> (f64, f64) {
    let n = (last - first + 1) as f64;
    let parts: Vec<(f64, f64)> = members
        .iter()
        .map(|st| (st.segment_sum(first, last) / n, st.constant_l2(first, last)))
        .collect();
    let objective = |a: f64| {
        parts
            .iter()
            .map(|&(m, v)| n * (a - m) * (a - m) + v)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    // First member attaining the maximum at `a`.
    let active = |a: f64| {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (i, &(m, v)) in parts.iter().enumerate() {
            let f = n * (a - m) * (a - m) + v;
            if f > best_val {
                best_val = f;
                best = i;
            }
        }
        best
    };

    let mut lo = parts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let mut hi = parts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        if hi - lo <= 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let i = active(mid);
        let m = parts[i].0;
        if m > mid {
            lo = mid;
        } else if m < mid {
            hi = mid;
        } else {
            lo = mid;
            hi = mid;
        }
    }

    // Polish: the optimum is a vertex of an active parabola or the crossing
    // of the two parabolas active at either end of the final bracket.
    let mut candidates = vec![0.5 * (lo + hi)];
    let (i, j) = (active(lo), active(hi));
    candidates.push(parts[i].0);
    candidates.push(parts[j].0);
    if i != j {
        let (mi, vi) = parts[i];
        let (mj, vj) = parts[j];
        if mi != mj {
            candidates.push((n * (mj * mj - mi * mi) + vj - vi) / (2.0 * n * (mj - mi)));
        }
    }
    let mut best = (candidates[0], objective(candidates[0]));
    for &a in &candidates[1..] {
        let f = objective(a);
        if f < best.1 {
            best = (a, f);
        }
    }
    best
}

/// `min_a max_{i in members} sum_{j=first..=last} (s_i(t_j) - a)^2`.
pub fn cost_set_max(set: &CurveSet, members: &[usize], first: usize, last: usize) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::domain("cannot summarize an empty group of curves"));
    }
    if first > last || last >= set.width() {
        return Err(Error::domain(format!("segment {first}..={last} out of range")));
    }
    let stats: Vec<PrefixStats> = members
        .iter()
        .map(|&i| PrefixStats::new(set.grid().points(), set.row(i)))
        .collect();
    Ok(minimax_level(&stats, first, last).1)
}
