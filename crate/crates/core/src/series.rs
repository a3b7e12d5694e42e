// SPDX-License-Identifier: MIT OR Apache-2.0

//! Foundational data types and segment arithmetic.
//!
//! All public indices follow the 1-based convention: observations are
//! `Y_1, ..., Y_n`, a change-point `tau` in `{2, ..., n}` marks the first
//! index of the new segment, and segments are half-open intervals `[a, b)`
//! over `{1, ..., n+1}`. Storage is 0-based internally; the conversion
//! happens at the API boundary only.

use crate::error::{Error, Result};

/// An observed univariate series `Y_1, ..., Y_n` with `n >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "a time series needs at least 2 observations, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at position {} (1-based)",
                i + 1
            )));
        }
        Ok(TimeSeries { values })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// `Y_i` for `i` in `1..=n`.
    pub fn value(&self, i: usize) -> f64 {
        self.values[i - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Cumulative sums of a series and of its squares.
///
/// `sum(a, b)` and `sum_sq(a, b)` aggregate over the half-open segment
/// `[a, b)` in O(1), which is what every criterion and CUSUM evaluation
/// in this crate is built on. Accumulation uses Neumaier compensation so
/// long series do not lose the low-order bits that the RSS identity
/// `sum_sq - sum^2/len` depends on.
#[derive(Debug, Clone)]
pub struct PrefixSums {
    n: usize,
    s: Vec<f64>,
    s2: Vec<f64>,
}

fn compensated_prefix(values: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len() + 1);
    out.push(0.0);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let x = f(v);
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        out.push(sum + comp);
    }
    out
}

impl PrefixSums {
    pub fn from_series(series: &TimeSeries) -> Self {
        Self::from_values_unchecked(series.values())
    }

    pub fn from_values(values: &[f64]) -> Result<Self> {
        let series = TimeSeries::new(values.to_vec())?;
        Ok(Self::from_series(&series))
    }

    pub(crate) fn from_values_unchecked(values: &[f64]) -> Self {
        PrefixSums {
            n: values.len(),
            s: compensated_prefix(values, |v| v),
            s2: compensated_prefix(values, |v| v * v),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sum of `Y_i` over `[a, b)`, `1 <= a <= b <= n+1`.
    #[inline]
    pub fn sum(&self, a: usize, b: usize) -> f64 {
        self.s[b - 1] - self.s[a - 1]
    }

    /// Sum of `Y_i^2` over `[a, b)`.
    #[inline]
    pub fn sum_sq(&self, a: usize, b: usize) -> f64 {
        self.s2[b - 1] - self.s2[a - 1]
    }

    /// Residual sum of squares of the segment `[a, b)` around its own mean,
    /// computed as `sum_sq - sum^2/len`.
    #[inline]
    pub fn segment_rss(&self, a: usize, b: usize) -> f64 {
        let len = (b - a) as f64;
        let s = self.sum(a, b);
        (self.sum_sq(a, b) - s * s / len).max(0.0)
    }

    /// Raw prefix arrays `(s, s2)`, both of length `n + 1`, for hot loops
    /// that index them directly. `s[i]` holds the sum of the first `i`
    /// observations.
    pub(crate) fn raw(&self) -> (&[f64], &[f64]) {
        (&self.s, &self.s2)
    }
}

/// Mean of `Y` over the half-open segment `[a, b)`.
pub fn segment_mean(p: &PrefixSums, a: usize, b: usize) -> Result<f64> {
    if a == 0 || a >= b || b > p.n() + 1 {
        return Err(Error::invalid(format!(
            "segment [{a}, {b}) is not a valid sub-segment of [1, {})",
            p.n() + 1
        )));
    }
    Ok(p.sum(a, b) / (b - a) as f64)
}

/// A strictly increasing vector of change-point positions in `{2, ..., n}`.
///
/// The sentinels `tau_0 = 1` and `tau_{K+1} = n+1` are implicit and exposed
/// through [`ChangePointVector::tau`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangePointVector {
    taus: Vec<usize>,
    n: usize,
}

impl ChangePointVector {
    pub fn new(taus: Vec<usize>, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("ambient length must be >= 2, got {n}")));
        }
        for (i, &t) in taus.iter().enumerate() {
            if t < 2 || t > n {
                return Err(Error::invalid(format!(
                    "change-point {t} outside {{2, ..., {n}}}"
                )));
            }
            if i > 0 && taus[i - 1] >= t {
                return Err(Error::invalid(format!(
                    "change-points must be strictly increasing, got {} then {}",
                    taus[i - 1],
                    t
                )));
            }
        }
        Ok(ChangePointVector { taus, n })
    }

    pub fn empty(n: usize) -> Self {
        ChangePointVector { taus: Vec::new(), n }
    }

    /// Every admissible position `(2, 3, ..., n)`.
    pub fn full(n: usize) -> Self {
        ChangePointVector {
            taus: (2..=n).collect(),
            n,
        }
    }

    /// Number of change-points `K`.
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn ambient_n(&self) -> usize {
        self.n
    }

    /// `tau_k` for `k` in `0..=K+1`, with `tau_0 = 1` and `tau_{K+1} = n+1`.
    pub fn tau(&self, k: usize) -> usize {
        if k == 0 {
            1
        } else if k == self.taus.len() + 1 {
            self.n + 1
        } else {
            self.taus[k - 1]
        }
    }

    pub fn positions(&self) -> &[usize] {
        &self.taus
    }

    /// The vector with the `l`-th change-point removed (`l` in `1..=K`).
    pub fn without(&self, l: usize) -> ChangePointVector {
        let mut taus = self.taus.clone();
        taus.remove(l - 1);
        ChangePointVector { taus, n: self.n }
    }
}

/// A piecewise-constant mean vector, given by change-points and segment means.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseSignal {
    taus: ChangePointVector,
    mus: Vec<f64>,
}

impl PiecewiseSignal {
    pub fn new(taus: ChangePointVector, mus: Vec<f64>) -> Result<Self> {
        if mus.len() != taus.len() + 1 {
            return Err(Error::invalid(format!(
                "{} change-points need {} segment means, got {}",
                taus.len(),
                taus.len() + 1,
                mus.len()
            )));
        }
        if let Some(m) = mus.iter().find(|m| !m.is_finite()) {
            return Err(Error::invalid(format!("non-finite segment mean {m}")));
        }
        for w in mus.windows(2) {
            if w[0] == w[1] {
                return Err(Error::invalid(format!(
                    "adjacent segments share the mean {}; heights must be nonzero",
                    w[0]
                )));
            }
        }
        Ok(PiecewiseSignal { taus, mus })
    }

    /// Constant signal on `n` points.
    pub fn constant(level: f64, n: usize) -> Result<Self> {
        Self::new(ChangePointVector::empty(n), vec![level])
    }

    pub fn taus(&self) -> &ChangePointVector {
        &self.taus
    }

    pub fn mus(&self) -> &[f64] {
        &self.mus
    }

    pub fn k(&self) -> usize {
        self.taus.len()
    }

    pub fn n(&self) -> usize {
        self.taus.ambient_n()
    }

    /// Height `Delta_k = mu_{k+1} - mu_k` of the `k`-th change-point, `k` in `1..=K`.
    pub fn height(&self, k: usize) -> f64 {
        self.mus[k] - self.mus[k - 1]
    }
}

/// Expands a piecewise signal into the mean vector `theta`.
pub fn piecewise_signal_values(sig: &PiecewiseSignal, n: usize) -> Result<Vec<f64>> {
    if n != sig.n() {
        return Err(Error::invalid(format!(
            "signal is defined on n={}, requested n={n}",
            sig.n()
        )));
    }
    let mut theta = Vec::with_capacity(n);
    for k in 0..=sig.k() {
        let lo = sig.taus().tau(k);
        let hi = sig.taus().tau(k + 1);
        theta.extend(std::iter::repeat(sig.mus()[k]).take(hi - lo));
    }
    Ok(theta)
}

/// A CUSUM window `t = (t1, t2, t3)` with `1 <= t1 < t2 < t3 <= n+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triad {
    pub t1: usize,
    pub t2: usize,
    pub t3: usize,
}

impl Triad {
    pub fn new(t1: usize, t2: usize, t3: usize, n: usize) -> Result<Self> {
        if t1 == 0 || t1 >= t2 || t2 >= t3 || t3 > n + 1 {
            return Err(Error::invalid(format!(
                "({t1}, {t2}, {t3}) is not a triad for n={n}"
            )));
        }
        Ok(Triad { t1, t2, t3 })
    }

    /// Left window length `t2 - t1`.
    pub fn d1(&self) -> usize {
        self.t2 - self.t1
    }

    /// Right window length `t3 - t2`.
    pub fn d2(&self) -> usize {
        self.t3 - self.t2
    }
}

/// Projection of `Y` onto the piecewise-constant vectors with change-points
/// `taus`: each segment is replaced by its empirical mean.
pub fn project(p: &PrefixSums, taus: &ChangePointVector) -> Vec<f64> {
    assert_eq!(
        taus.ambient_n(),
        p.n(),
        "change-point vector and series disagree on n"
    );
    let mut out = Vec::with_capacity(p.n());
    for k in 0..=taus.len() {
        let lo = taus.tau(k);
        let hi = taus.tau(k + 1);
        let mean = p.sum(lo, hi) / (hi - lo) as f64;
        out.extend(std::iter::repeat(mean).take(hi - lo));
    }
    out
}

/// Residual sum of squares `||Y - proj(Y, taus)||^2`, accumulated from prefix
/// sums segment by segment rather than through residual vectors.
pub fn rss(p: &PrefixSums, taus: &ChangePointVector) -> f64 {
    assert_eq!(
        taus.ambient_n(),
        p.n(),
        "change-point vector and series disagree on n"
    );
    let mut total = 0.0;
    for k in 0..=taus.len() {
        total += p.segment_rss(taus.tau(k), taus.tau(k + 1));
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn prefix(values: &[f64]) -> PrefixSums {
        PrefixSums::from_values(values).expect("valid series")
    }

    fn cpv(taus: &[usize], n: usize) -> ChangePointVector {
        ChangePointVector::new(taus.to_vec(), n).expect("valid change-points")
    }

    fn signal(taus: &[usize], mus: &[f64], n: usize) -> PiecewiseSignal {
        PiecewiseSignal::new(cpv(taus, n), mus.to_vec()).expect("valid signal")
    }

    #[test]
    fn signal_values_expand_segments() {
        assert_eq!(
            piecewise_signal_values(&signal(&[], &[3.0], 4), 4).unwrap(),
            vec![3.0; 4]
        );
        assert_eq!(
            piecewise_signal_values(&signal(&[3], &[0.0, 2.0], 4), 4).unwrap(),
            vec![0.0, 0.0, 2.0, 2.0]
        );
        assert_eq!(
            piecewise_signal_values(&signal(&[2, 4], &[1.0, 5.0, 1.0], 5), 5).unwrap(),
            vec![1.0, 5.0, 5.0, 1.0, 1.0]
        );
    }

    #[test]
    fn signal_values_reject_inconsistent_n() {
        let sig = signal(&[3], &[0.0, 2.0], 4);
        assert!(piecewise_signal_values(&sig, 5).is_err());
    }

    #[test]
    fn segment_means() {
        let p = prefix(&[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(segment_mean(&p, 1, 5).unwrap(), 1.0);
        let p = prefix(&[0.0, 0.0, 2.0, 2.0]);
        assert_eq!(segment_mean(&p, 3, 5).unwrap(), 2.0);
        let p = prefix(&[0.0, 4.0]);
        assert_eq!(segment_mean(&p, 1, 3).unwrap(), 2.0);
        assert!(segment_mean(&p, 2, 2).is_err());
        assert!(segment_mean(&p, 3, 2).is_err());
    }

    #[test]
    fn projection_matches_hand_computed_means() {
        let p = prefix(&[1.0, 3.0]);
        assert_eq!(project(&p, &cpv(&[], 2)), vec![2.0, 2.0]);

        let p = prefix(&[0.0, 0.0, 2.0, 2.0]);
        assert_eq!(project(&p, &cpv(&[3], 4)), vec![0.0, 0.0, 2.0, 2.0]);

        let p = prefix(&[5.0; 6]);
        assert_eq!(project(&p, &cpv(&[2, 4], 6)), vec![5.0; 6]);
    }

    #[test]
    fn rss_examples() {
        let p = prefix(&[0.0, 0.0, 2.0, 2.0]);
        assert_eq!(rss(&p, &cpv(&[3], 4)), 0.0);
        assert!((rss(&p, &cpv(&[], 4)) - 4.0).abs() < 1e-12);
        let p = prefix(&[0.0, 4.0]);
        assert_eq!(rss(&p, &cpv(&[2], 2)), 0.0);
    }

    /// Explicit-residual oracle for `rss`.
    fn rss_by_residuals(values: &[f64], taus: &ChangePointVector) -> f64 {
        let p = PrefixSums::from_values_unchecked(values);
        let proj = project(&p, taus);
        values
            .iter()
            .zip(proj.iter())
            .map(|(y, f)| (y - f) * (y - f))
            .sum()
    }

    #[test]
    fn rss_agrees_with_residual_oracle_and_is_monotone_under_refinement() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.random_range(2..=100);
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let p = PrefixSums::from_values_unchecked(&values);

            let mut taus: Vec<usize> = (2..=n).filter(|_| rng.random_bool(0.2)).collect();
            let base = cpv(&taus, n);
            let base_rss = rss(&p, &base);

            let oracle = rss_by_residuals(&values, &base);
            let tol = 1e-9 * (1.0 + oracle.abs());
            assert!(
                (base_rss - oracle).abs() <= tol,
                "rss {base_rss} vs oracle {oracle}"
            );

            // Refinement: inserting any admissible point never increases rss.
            for t in 2..=n {
                if taus.contains(&t) {
                    continue;
                }
                taus.push(t);
                taus.sort_unstable();
                let refined = rss(&p, &cpv(&taus, n));
                assert!(refined <= base_rss + 1e-9 * (1.0 + base_rss));
                taus.retain(|&x| x != t);
            }
        }
    }

    #[test]
    fn full_segment_mean_is_arithmetic_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.random_range(2..=50);
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let p = PrefixSums::from_values_unchecked(&values);
            let mean = values.iter().sum::<f64>() / n as f64;
            assert!((segment_mean(&p, 1, n + 1).unwrap() - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn constructors_enforce_invariants() {
        assert!(TimeSeries::new(vec![1.0]).is_err());
        assert!(TimeSeries::new(vec![1.0, f64::NAN]).is_err());
        assert!(ChangePointVector::new(vec![1], 4).is_err());
        assert!(ChangePointVector::new(vec![5], 4).is_err());
        assert!(ChangePointVector::new(vec![3, 3], 4).is_err());
        assert!(PiecewiseSignal::new(cpv(&[3], 4), vec![1.0, 1.0]).is_err());
        assert!(PiecewiseSignal::new(cpv(&[3], 4), vec![1.0]).is_err());
        assert!(Triad::new(1, 1, 3, 4).is_err());
        assert!(Triad::new(1, 2, 6, 4).is_err());
        assert!(Triad::new(0, 1, 3, 4).is_err());
    }

    #[test]
    fn sentinels() {
        let t = cpv(&[3, 5], 8);
        assert_eq!(t.tau(0), 1);
        assert_eq!(t.tau(1), 3);
        assert_eq!(t.tau(2), 5);
        assert_eq!(t.tau(3), 9);
    }
}
