//! Reference implementations and data generators shared by the
//! integration tests. Everything here is written from the definitions,
//! without calling into the library's numerical code.

#![allow(dead_code)]

use curveseg::{CurveSet, ModelKind, SampleGrid};
use num::rational::Ratio;
use num::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|a - b| <= rel * max(|a|, |b|) + floor`.
pub fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + floor
}

pub fn energy(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum()
}

// ---------------------------------------------------------------- data

/// Strictly increasing abscissae with random gaps in `[0.2, 1.5)`.
pub fn random_grid(r: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(m);
    let mut x = r.gen_range(-5.0..5.0);
    for _ in 0..m {
        t.push(x);
        x += r.gen_range(0.2..1.5);
    }
    t
}

pub fn uniform_grid(m: usize) -> Vec<f64> {
    (0..m).map(|j| j as f64).collect()
}

pub fn random_curve(r: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let offset = r.gen_range(-3.0..3.0);
    (0..m).map(|_| offset + r.gen_range(-1.0..1.0)).collect()
}

pub fn set_from(t: &[f64], rows: Vec<Vec<f64>>) -> CurveSet {
    CurveSet::new(SampleGrid::new(t.to_vec()).unwrap(), rows, None).unwrap()
}

/// `groups` noisy copies of random step templates, `per` curves each,
/// listed group after group.
pub fn blobs(r: &mut ChaCha8Rng, groups: usize, per: usize, m: usize, noise: f64) -> CurveSet {
    let mut rows = Vec::with_capacity(groups * per);
    for _ in 0..groups {
        let cut = r.gen_range(1..m);
        let (a, b) = (r.gen_range(-4.0..4.0), r.gen_range(-4.0..4.0));
        for _ in 0..per {
            rows.push(
                (0..m)
                    .map(|j| if j < cut { a } else { b } + noise * r.gen_range(-1.0..1.0))
                    .collect(),
            );
        }
    }
    set_from(&uniform_grid(m), rows)
}

fn bump(x: f64, centre: f64, width: f64) -> f64 {
    let z = (x - centre) / width;
    (-0.5 * z * z).exp()
}

fn round_to(v: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    (v * s).round() / s
}

/// Smooth absorbance-like spectra: a sloped baseline plus three bumps of
/// random height, on the grid `850, 852, ...`. Values are rounded to six
/// decimals so the fixture file stays small.
pub fn spectra(seed: u64, n: usize, m: usize) -> CurveSet {
    let mut r = rng(seed);
    let t: Vec<f64> = (0..m).map(|j| 850.0 + 2.0 * j as f64).collect();
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let base = r.gen_range(2.0..3.5);
        let slope = r.gen_range(0.2..0.6);
        let amp = [r.gen_range(0.0..0.3), r.gen_range(0.0..0.3), r.gen_range(0.0..0.2)];
        let shift = r.gen_range(-0.02..0.02);
        rows.push(
            (0..m)
                .map(|j| {
                    let x = j as f64 / (m - 1) as f64;
                    let v = base
                        + slope * x
                        + amp[0] * bump(x, 0.35 + shift, 0.06)
                        + amp[1] * bump(x, 0.6 + shift, 0.08)
                        + amp[2] * bump(x, 0.82, 0.05)
                        + 0.002 * r.gen_range(-1.0..1.0);
                    round_to(v, 6)
                })
                .collect(),
        );
    }
    set_from(&t, rows)
}

/// Daily electricity-like load profiles sampled every ten minutes: a
/// seasonal level, lower weekends, morning and evening peaks.
pub fn load_curves(seed: u64, days: usize, m: usize) -> CurveSet {
    let mut r = rng(seed);
    let mut rows = Vec::with_capacity(days);
    for d in 0..days {
        let season = (2.0 * std::f64::consts::PI * d as f64 / 365.0).cos();
        let weekend = d % 7 >= 5;
        let level = 900.0 + 250.0 * season + if weekend { -120.0 } else { 0.0 } + r.gen_range(-30.0..30.0);
        let morning = if weekend { 150.0 } else { 320.0 } + r.gen_range(-40.0..40.0);
        let evening = 280.0 + 200.0 * season.max(0.0) + r.gen_range(-40.0..40.0);
        let dusk = 18.0 - 1.5 * season;
        rows.push(
            (0..m)
                .map(|j| {
                    let h = 24.0 * j as f64 / m as f64;
                    let v = level - 250.0 * bump(h, 4.0, 2.0)
                        + morning * bump(h, 8.5, 1.2)
                        + 0.5 * morning * bump(h, 13.0, 2.5)
                        + evening * bump(h, dusk + 1.0, 1.5)
                        + 15.0 * r.gen_range(-1.0..1.0);
                    round_to(v, 3)
                })
                .collect(),
        );
    }
    set_from(&uniform_grid(m), rows)
}

/// A continuous piecewise-linear curve with `pieces` pieces whose slopes
/// change by at least one unit at every interior knot.
pub fn piecewise_linear(r: &mut ChaCha8Rng, m: usize, pieces: usize) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let t = random_grid(r, m);
    let mut interior: Vec<usize> = Vec::new();
    while interior.len() < pieces - 1 {
        let k = r.gen_range(1..m - 1);
        if !interior.contains(&k) {
            interior.push(k);
        }
    }
    interior.sort_unstable();
    let mut knots = vec![0];
    knots.extend(interior);
    knots.push(m - 1);
    let mut slope = r.gen_range(-2.0..2.0);
    let mut slopes = vec![slope];
    for _ in 1..pieces {
        let change = r.gen_range(1.0..3.0) * if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        slope += change;
        slopes.push(slope);
    }
    let mut y = vec![0.0; m];
    y[0] = r.gen_range(-2.0..2.0);
    let mut piece = 0;
    for j in 1..m {
        if j > knots[piece + 1] {
            piece += 1;
        }
        y[j] = y[j - 1] + slopes[piece] * (t[j] - t[j - 1]);
    }
    (t, y, knots)
}

// ---------------------------------------------------------- segment costs

/// Two-pass squared error around the segment mean.
pub fn direct_constant_l2(y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - mean) * (v - mean)).sum()
}

/// Residual sum of squares of the centred least-squares line.
pub fn direct_line_l2(t: &[f64], y: &[f64]) -> f64 {
    if y.len() == 1 || (y.len() == 2 && t[0] != t[1]) {
        return 0.0;
    }
    let n = y.len() as f64;
    let tbar = t.iter().sum::<f64>() / n;
    let ybar = y.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|x| (x - tbar) * (x - tbar)).sum();
    if sxx == 0.0 {
        return direct_constant_l2(y);
    }
    let sxy: f64 = t.iter().zip(y).map(|(x, v)| (x - tbar) * (v - ybar)).sum();
    let b = sxy / sxx;
    t.iter()
        .zip(y)
        .map(|(x, v)| {
            let e = v - ybar - b * (x - tbar);
            e * e
        })
        .sum()
}

/// Squared error of the chord joining the first and last points.
pub fn direct_interp_l2(t: &[f64], y: &[f64]) -> f64 {
    let n = y.len();
    if n == 2 {
        return 0.0;
    }
    let (t0, t1, y0, y1) = (t[0], t[n - 1], y[0], y[n - 1]);
    t.iter()
        .zip(y)
        .map(|(x, v)| {
            let e = v - (y0 + (y1 - y0) * (x - t0) / (t1 - t0));
            e * e
        })
        .sum()
}

/// Least absolute deviation over constants. The objective is convex and
/// piecewise linear with kinks at the data, so some data value attains it.
pub fn direct_constant_l1(y: &[f64]) -> f64 {
    y.iter()
        .map(|&a| y.iter().map(|v| (v - a).abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

pub fn direct_cost(kind: ModelKind, t: &[f64], y: &[f64]) -> f64 {
    match kind {
        ModelKind::ConstantL2 => direct_constant_l2(y),
        ModelKind::ConstantL1 => direct_constant_l1(y),
        ModelKind::LineL2 => direct_line_l2(t, y),
        ModelKind::InterpL2 => direct_interp_l2(t, y),
    }
}

/// Set cost on columns `first..=last`, fitting one model to all members'
/// points at once. For interpolation the chord joins the mean curve's end
/// values.
pub fn direct_set_cost(kind: ModelKind, t: &[f64], rows: &[&[f64]], first: usize, last: usize) -> f64 {
    let mut pt = Vec::new();
    let mut py = Vec::new();
    for r in rows {
        pt.extend_from_slice(&t[first..=last]);
        py.extend_from_slice(&r[first..=last]);
    }
    match kind {
        ModelKind::InterpL2 => {
            let n = rows.len() as f64;
            let y0 = rows.iter().map(|r| r[first]).sum::<f64>() / n;
            let y1 = rows.iter().map(|r| r[last]).sum::<f64>() / n;
            let (t0, t1) = (t[first], t[last]);
            pt.iter()
                .zip(&py)
                .map(|(x, v)| {
                    let e = v - (y0 + (y1 - y0) * (x - t0) / (t1 - t0));
                    e * e
                })
                .sum()
        }
        _ => direct_cost(kind, &pt, &py),
    }
}

/// `min_a max_i sum_j (s_i(t_j) - a)^2` by a dense grid over the data
/// range followed by ternary refinement of the best cell.
pub fn minimax_oracle(rows: &[&[f64]]) -> f64 {
    let f = |a: f64| {
        rows.iter()
            .map(|r| r.iter().map(|v| (v - a) * (v - a)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let lo = rows.iter().flat_map(|r| r.iter()).cloned().fold(f64::INFINITY, f64::min);
    let hi = rows.iter().flat_map(|r| r.iter()).cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return f(lo);
    }
    let steps = 4000;
    let h = (hi - lo) / steps as f64;
    let best = (0..=steps)
        .map(|i| lo + i as f64 * h)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap();
    let (mut a, mut b) = (best - h, best + h);
    for _ in 0..300 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1) <= f(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    f(0.5 * (a + b))
}

// ------------------------------------------------------- recursive costs

const QUANTUM: f64 = (1u64 << 20) as f64;

/// Random curve whose values are multiples of `2^-20`, so that the exact
/// oracle below stays within 128-bit integers.
pub fn quantized_curve(r: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    random_curve(r, m).into_iter().map(|v| (v * QUANTUM).round() / QUANTUM).collect()
}

type Q = Ratio<i128>;

/// The recursive computation of the constant-model cost table: forward
/// updates of the mean and error over prefixes, then downdates removing
/// the leftmost point. Written with 1-based indices and carried out in
/// exact rational arithmetic, because the downdates cancel catastrophically
/// in floating point. Inputs must be multiples of `2^-20`. Returns
/// `q[k][l]` (0-based, `k <= l`) rounded to f64.
pub fn recursive_costs(s: &[f64]) -> Vec<Vec<f64>> {
    let m = s.len();
    let s: Vec<Q> = s
        .iter()
        .map(|&v| {
            let scaled = v * QUANTUM;
            assert_eq!(scaled.fract(), 0.0, "value {v} is not a multiple of 2^-20");
            Q::new(scaled as i128, 1 << 20)
        })
        .collect();
    let int = |v: usize| Q::from_integer(v as i128);
    let mut out = vec![vec![f64::NAN; m]; m];
    // Row k of mu and q, indexed by l; rows are rolled.
    let mut mu = vec![Q::zero(); m + 1];
    let mut q = vec![Q::zero(); m + 1];
    mu[1] = s[0];
    for l in 2..=m {
        let (lr, lm1) = (int(l), int(l - 1));
        mu[l] = (lm1 * mu[l - 1] + s[l - 1]) / lr;
        let d = s[l - 1] - mu[l];
        q[l] = q[l - 1] + lr / lm1 * d * d;
    }
    for l in 1..=m {
        out[0][l - 1] = q[l].to_f64().unwrap();
    }
    for k in 2..=m {
        let mut mu_k = vec![Q::zero(); m + 1];
        let mut q_k = vec![Q::zero(); m + 1];
        mu_k[k] = s[k - 1];
        for l in (k + 1)..=m {
            let (n, n1) = (int(l - k + 1), int(l - k + 2));
            mu_k[l] = (n1 * mu[l] - s[k - 2]) / n;
            let d = s[k - 2] - mu_k[l];
            q_k[l] = q[l] - n / n1 * d * d;
        }
        for l in k..=m {
            out[k - 1][l - 1] = q_k[l].to_f64().unwrap();
        }
        mu = mu_k;
        q = q_k;
    }
    out
}

// -------------------------------------------------------- segmentations

/// Every ordered partition of `first..m` into `parts` runs of at least
/// `min_len` points, as lists of segment end indices.
pub fn ordered_partitions(first: usize, m: usize, parts: usize, min_len: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if first == m { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    let mut end = first + min_len - 1;
    while end < m {
        for mut rest in ordered_partitions(end + 1, m, parts - 1, min_len) {
            rest.insert(0, end);
            out.push(rest);
        }
        end += 1;
    }
    out
}

pub fn partition_cost(cost: &dyn Fn(usize, usize) -> f64, first: usize, ends: &[usize], max: bool) -> f64 {
    let mut start = first;
    let mut total: f64 = if max { f64::NEG_INFINITY } else { 0.0 };
    for &e in ends {
        let c = cost(start, e);
        total = if max { total.max(c) } else { total + c };
        start = e + 1;
    }
    total
}

fn best_suffix(cost: &dyn Fn(usize, usize) -> f64, first: usize, m: usize, parts: usize, min_len: usize, max: bool) -> f64 {
    ordered_partitions(first, m, parts, min_len)
        .iter()
        .map(|e| partition_cost(cost, first, e, max))
        .fold(f64::INFINITY, f64::min)
}

fn tie(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Optimal cost of splitting `0..m` into `parts` segments, found by
/// enumerating every ordered partition, together with the canonical
/// optimum: the first segment is as short as possible among those that
/// can be completed optimally by an optimal split of the remainder, and
/// so on. Returned as segment start indices after the first.
pub fn exhaustive_segmentation(
    cost: &dyn Fn(usize, usize) -> f64,
    m: usize,
    parts: usize,
    min_len: usize,
    max: bool,
) -> (f64, Vec<usize>) {
    let total = best_suffix(cost, 0, m, parts, min_len, max);
    let mut breaks = Vec::new();
    let mut first = 0;
    let mut target = total;
    for j in (2..=parts).rev() {
        let mut chosen = None;
        for end in (first + min_len - 1)..m {
            let rest = best_suffix(cost, end + 1, m, j - 1, min_len, max);
            if !rest.is_finite() {
                continue;
            }
            let c = cost(first, end);
            let v = if max { c.max(rest) } else { c + rest };
            if tie(v, target) {
                chosen = Some((end, rest));
                break;
            }
        }
        let (end, rest) = chosen.expect("an optimal first segment exists");
        breaks.push(end + 1);
        first = end + 1;
        target = rest;
    }
    (total, breaks)
}

// ---------------------------------------------------------------- knots

/// Squared error of the polyline through the curve's own values at
/// `knots`.
pub fn polyline_error(t: &[f64], y: &[f64], knots: &[usize]) -> f64 {
    let mut total = 0.0;
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let start = if a == knots[0] { a } else { a + 1 };
        for j in start..=b {
            let v = y[a] + (y[b] - y[a]) * (t[j] - t[a]) / (t[b] - t[a]);
            total += (y[j] - v) * (y[j] - v);
        }
    }
    total
}

/// Every knot set with `pieces` pieces on `m` points.
pub fn knot_sets(m: usize, pieces: usize) -> Vec<Vec<usize>> {
    fn rec(from: usize, m: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            let mut k = cur.clone();
            k.push(m - 1);
            out.push(k);
            return;
        }
        for k in from..(m - 1) {
            cur.push(k);
            rec(k + 1, m, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(1, m, pieces - 1, &mut vec![0], &mut out);
    out
}

/// Best knot set by enumeration; the lexicographically first on ties.
pub fn exhaustive_knots(t: &[f64], y: &[f64], pieces: usize) -> (f64, Vec<usize>) {
    let mut best = (f64::INFINITY, Vec::new());
    for k in knot_sets(y.len(), pieces) {
        let e = polyline_error(t, y, &k);
        if e < best.0 {
            best = (e, k);
        }
    }
    best
}

// ------------------------------------------------------------ allocation

/// Every way to write `total` as an ordered sum of `limits.len()` parts
/// with part `i` in `1..=limits[i]`.
pub fn compositions(total: usize, limits: &[usize]) -> Vec<Vec<usize>> {
    if limits.is_empty() {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for u in 1..=limits[0].min(total) {
        for mut rest in compositions(total - u, &limits[1..]) {
            rest.insert(0, u);
            out.push(rest);
        }
    }
    out
}

/// Minimum of `sum_k curves[k][u_k - 1]` over compositions of `budget`.
pub fn exhaustive_allocation(curves: &[Vec<f64>], budget: usize, cap: Option<usize>) -> Option<(f64, Vec<usize>)> {
    let limits: Vec<usize> = curves.iter().map(|c| c.len().min(cap.unwrap_or(usize::MAX))).collect();
    compositions(budget, &limits)
        .into_iter()
        .map(|u| (u.iter().zip(curves).map(|(&u, c)| c[u - 1]).sum::<f64>(), u))
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

// ------------------------------------------------------------------ Ward

/// Agglomerative clustering recomputing every pairwise increase of the
/// within-cluster sum of squares from centroids at each step. Returns the
/// merged member sets (sorted) and heights.
pub fn naive_ward(rows: &[Vec<f64>]) -> Vec<(Vec<usize>, f64)> {
    let mut clusters: Vec<Vec<usize>> = (0..rows.len()).map(|i| vec![i]).collect();
    let centroid = |c: &[usize]| {
        let mut out = vec![0.0; rows[0].len()];
        for &i in c {
            for (o, v) in out.iter_mut().zip(&rows[i]) {
                *o += v;
            }
        }
        out.iter().map(|v| v / c.len() as f64).collect::<Vec<f64>>()
    };
    let mut merges = Vec::new();
    while clusters.len() > 1 {
        let cents: Vec<Vec<f64>> = clusters.iter().map(|c| centroid(c)).collect();
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let (na, nb) = (clusters[a].len() as f64, clusters[b].len() as f64);
                let d2: f64 = cents[a].iter().zip(&cents[b]).map(|(x, y)| (x - y) * (x - y)).sum();
                let delta = na * nb / (na + nb) * d2;
                if delta < best.0 {
                    best = (delta, a, b);
                }
            }
        }
        let (h, a, b) = best;
        let gone = clusters.remove(b);
        clusters[a].extend(gone);
        clusters[a].sort_unstable();
        merges.push((clusters[a].clone(), h));
    }
    merges
}

/// Nearest row of `protos` to `x` in squared distance, first on ties.
pub fn brute_nearest(x: &[f64], protos: &[Vec<f64>]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (c, p) in protos.iter().enumerate() {
        let d: f64 = x.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.0 {
            best = (d, c);
        }
    }
    best.1
}

/// Total squared error of a partition against prototypes evaluated point
/// by point through [`curveseg::Summary::evaluate`].
pub fn evaluated_error(set: &CurveSet, labels: &[usize], summaries: &[curveseg::Summary]) -> f64 {
    let t = set.grid().points();
    let protos: Vec<Vec<f64>> = summaries
        .iter()
        .map(|s| t.iter().map(|&x| s.evaluate(x).unwrap()).collect())
        .collect();
    (0..set.len())
        .map(|i| {
            set.row(i)
                .iter()
                .zip(&protos[labels[i]])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum()
}
