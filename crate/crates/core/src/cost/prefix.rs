use serde::{Deserialize, Serialize};

use super::dd::Dd;
use crate::error::{Error, Result};

/// Prefix sufficient statistics of one curve.
///
/// Every array has length `M + 1` with a zero in front, so the aggregate
/// over indices `k..=l` is `a[l + 1] - a[k]`. Abscissae enter the sums
/// shifted by the grid midpoint, which leaves every segment cost unchanged.
#[derive(Debug, Clone)]
pub struct PrefixStats {
    values: Vec<f64>,
    t: Vec<f64>,
    t_shift: f64,
    sum_s: Vec<Dd>,
    sum_s2: Vec<Dd>,
    sum_t: Vec<Dd>,
    sum_t2: Vec<Dd>,
    sum_ts: Vec<Dd>,
}

/// Plain-float view of the prefix arrays, for inspection and export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixArrays {
    pub sum_s: Vec<f64>,
    pub sum_s2: Vec<f64>,
}

impl PrefixStats {
    /// Builds the prefix sums of `values` sampled at `t`.
    ///
    /// Panics if the two slices differ in length.
    pub fn new(t: &[f64], values: &[f64]) -> Self {
        assert_eq!(t.len(), values.len(), "grid and curve length differ");
        let m = values.len();
        let t_shift = if m == 0 { 0.0 } else { 0.5 * (t[0] + t[m - 1]) };
        let mut sum_s = Vec::with_capacity(m + 1);
        let mut sum_s2 = Vec::with_capacity(m + 1);
        let mut sum_t = Vec::with_capacity(m + 1);
        let mut sum_t2 = Vec::with_capacity(m + 1);
        let mut sum_ts = Vec::with_capacity(m + 1);
        let (mut a, mut b, mut c, mut d, mut e) = (Dd::ZERO, Dd::ZERO, Dd::ZERO, Dd::ZERO, Dd::ZERO);
        sum_s.push(a);
        sum_s2.push(b);
        sum_t.push(c);
        sum_t2.push(d);
        sum_ts.push(e);
        for (&tj, &sj) in t.iter().zip(values) {
            let u = tj - t_shift;
            a = a.add_f64(sj);
            b = b + Dd::product(sj, sj);
            c = c.add_f64(u);
            d = d + Dd::product(u, u);
            e = e + Dd::product(u, sj);
            sum_s.push(a);
            sum_s2.push(b);
            sum_t.push(c);
            sum_t2.push(d);
            sum_ts.push(e);
        }
        Self {
            values: values.to_vec(),
            t: t.to_vec(),
            t_shift,
            sum_s,
            sum_s2,
            sum_t,
            sum_t2,
            sum_ts,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> &[f64] {
        &self.t
    }

    pub fn arrays(&self) -> PrefixArrays {
        PrefixArrays {
            sum_s: self.sum_s.iter().map(|x| x.to_f64()).collect(),
            sum_s2: self.sum_s2.iter().map(|x| x.to_f64()).collect(),
        }
    }

    /// `sum_{j=first..=last} s_j`.
    pub fn segment_sum(&self, first: usize, last: usize) -> f64 {
        (self.sum_s[last + 1] - self.sum_s[first]).to_f64()
    }

    /// `sum_{j=first..=last} s_j^2`.
    pub fn segment_sum_sq(&self, first: usize, last: usize) -> f64 {
        (self.sum_s2[last + 1] - self.sum_s2[first]).to_f64()
    }

    #[inline]
    fn seg(a: &[Dd], first: usize, last: usize) -> Dd {
        a[last + 1] - a[first]
    }

    #[inline]
    pub(crate) fn constant_l2(&self, first: usize, last: usize) -> f64 {
        let n = (last - first + 1) as f64;
        let s = Self::seg(&self.sum_s, first, last);
        let s2 = Self::seg(&self.sum_s2, first, last);
        let sse = s2 - (s * s).div_f64(n);
        clamp_cancellation(sse.to_f64(), s2.to_f64())
    }

    #[inline]
    pub(crate) fn line_l2(&self, first: usize, last: usize) -> f64 {
        if last <= first + 1 {
            return 0.0;
        }
        let n = (last - first + 1) as f64;
        let s = Self::seg(&self.sum_s, first, last);
        let s2 = Self::seg(&self.sum_s2, first, last);
        let t = Self::seg(&self.sum_t, first, last);
        let t2 = Self::seg(&self.sum_t2, first, last);
        let ts = Self::seg(&self.sum_ts, first, last);
        let syy = s2 - (s * s).div_f64(n);
        let sxx = t2 - (t * t).div_f64(n);
        let sxy = ts - (t * s).div_f64(n);
        let rss = if sxx.hi > 0.0 { syy - (sxy * sxy) / sxx } else { syy };
        clamp_cancellation(rss.to_f64(), s2.to_f64())
    }

    #[inline]
    pub(crate) fn interp_l2(&self, first: usize, last: usize) -> f64 {
        if last <= first + 1 {
            return 0.0;
        }
        let tk = self.t[first] - self.t_shift;
        let tl = self.t[last] - self.t_shift;
        let (sk, sl) = (self.values[first], self.values[last]);
        let slope = (sl - sk) / (tl - tk);
        let offset = sk - slope * tk;
        let n = (last - first + 1) as f64;
        let s = Self::seg(&self.sum_s, first, last);
        let s2 = Self::seg(&self.sum_s2, first, last);
        let t = Self::seg(&self.sum_t, first, last);
        let t2 = Self::seg(&self.sum_t2, first, last);
        let ts = Self::seg(&self.sum_ts, first, last);
        let a = Dd::from_f64(offset);
        let b = Dd::from_f64(slope);
        let err = s2 - (a * s).mul_f64(2.0) - (b * ts).mul_f64(2.0)
            + (a * a).mul_f64(n)
            + (a * b * t).mul_f64(2.0)
            + b * b * t2;
        clamp_cancellation(err.to_f64(), s2.to_f64())
    }
}

/// Maps tiny negative round-off to zero. Larger negative values are left
/// alone so the caller's consistency check reports them.
#[inline]
pub(crate) fn clamp_cancellation(value: f64, scale: f64) -> f64 {
    if value < 0.0 && value >= -1e-9 * scale.abs() {
        0.0
    } else {
        value
    }
}

fn check_range(len: usize, first: usize, last: usize) -> Result<()> {
    if first > last || last >= len {
        return Err(Error::domain(format!(
            "segment {first}..={last} invalid for length {len}"
        )));
    }
    Ok(())
}

pub fn build_prefix_stats(t: &[f64], values: &[f64]) -> PrefixStats {
    PrefixStats::new(t, values)
}

/// Squared error of the best constant on `first..=last`.
pub fn cost_constant_l2(stats: &PrefixStats, first: usize, last: usize) -> Result<f64> {
    check_range(stats.len(), first, last)?;
    Ok(stats.constant_l2(first, last))
}

/// Residual sum of squares of the least-squares line on `first..=last`.
pub fn cost_line_l2(stats: &PrefixStats, first: usize, last: usize) -> Result<f64> {
    check_range(stats.len(), first, last)?;
    Ok(stats.line_l2(first, last))
}

/// Squared error of the chord through the two segment end points.
pub fn cost_interp_l2(stats: &PrefixStats, first: usize, last: usize) -> Result<f64> {
    check_range(stats.len(), first, last)?;
    if first == last {
        return Err(Error::domain("a chord needs two distinct end points"));
    }
    Ok(stats.interp_l2(first, last))
}

/// Median of a slice; the mean of the two central order statistics when the
/// length is even. Panics on an empty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub(crate) fn absolute_deviation(values: &[f64]) -> f64 {
    let m = median(values);
    values.iter().map(|v| (v - m).abs()).sum()
}

/// Absolute error around the segment median. Costs `O(len log len)`.
pub fn cost_constant_l1(values: &[f64], first: usize, last: usize) -> Result<f64> {
    check_range(values.len(), first, last)?;
    Ok(absolute_deviation(&values[first..=last]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(values: &[f64]) -> PrefixStats {
        let t: Vec<f64> = (0..values.len()).map(|k| k as f64).collect();
        PrefixStats::new(&t, values)
    }

    #[test]
    fn prefix_arrays_small_cases() {
        let a = stats(&[1.0, 1.0, 1.0, 1.0]).arrays();
        assert_eq!(a.sum_s, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(a.sum_s2, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(stats(&[1.0, 2.0, 3.0]).arrays().sum_s, vec![0.0, 1.0, 3.0, 6.0]);
    }

    #[test]
    fn constant_l2_hand_values() {
        assert_eq!(cost_constant_l2(&stats(&[5.0, 5.0, 5.0]), 0, 2).unwrap(), 0.0);
        assert_eq!(cost_constant_l2(&stats(&[0.0, 2.0]), 0, 1).unwrap(), 2.0);
        assert_eq!(cost_constant_l2(&stats(&[7.0, 0.0, 2.0]), 2, 2).unwrap(), 0.0);
        assert!(cost_constant_l2(&stats(&[0.0, 2.0]), 1, 2).is_err());
        assert!(cost_constant_l2(&stats(&[0.0, 2.0]), 1, 0).is_err());
    }

    #[test]
    fn constant_l1_hand_values() {
        assert_eq!(cost_constant_l1(&[5.0, 5.0, 5.0], 0, 2).unwrap(), 0.0);
        assert_eq!(cost_constant_l1(&[0.0, 0.0, 10.0], 0, 2).unwrap(), 10.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn line_l2_exact_line_and_point() {
        let t = [0.5, 1.0, 2.5, 3.0, 7.0];
        let s: Vec<f64> = t.iter().map(|x| 2.0 * x + 1.0).collect();
        let st = PrefixStats::new(&t, &s);
        assert!(cost_line_l2(&st, 0, 4).unwrap().abs() < 1e-24);
        assert_eq!(cost_line_l2(&st, 2, 2).unwrap(), 0.0);
    }

    #[test]
    fn interp_l2_hand_values() {
        let st = stats(&[0.0, 1.0, 0.0]);
        assert!((cost_interp_l2(&st, 0, 2).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cost_interp_l2(&st, 0, 1).unwrap(), 0.0);
        assert!(cost_interp_l2(&st, 1, 1).is_err());
        let lin = stats(&[3.0, 5.0, 7.0, 9.0]);
        assert!(cost_interp_l2(&lin, 0, 3).unwrap().abs() < 1e-24);
    }

    #[test]
    fn near_flat_segment_after_large_values() {
        // Large early values would swamp a plain f64 prefix difference.
        let mut v = vec![1e3; 50];
        v.extend([0.5, 0.5 + 1e-7]);
        let st = stats(&v);
        let got = cost_constant_l2(&st, 50, 51).unwrap();
        let d = (0.5 + 1e-7) - 0.5;
        let expect = 0.5 * d * d;
        assert!((got - expect).abs() <= 1e-9 * expect, "{got} vs {expect}");
    }

    #[test]
    fn clamp_behaviour() {
        assert_eq!(clamp_cancellation(-1e-12, 10.0), 0.0);
        assert_eq!(clamp_cancellation(-1.0, 10.0), -1.0);
        assert_eq!(clamp_cancellation(2.0, 10.0), 2.0);
    }
}
