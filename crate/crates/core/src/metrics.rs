// SPDX-License-Identifier: MIT OR Apache-2.0

//! Distances between change-point vectors and per-run checkers for the
//! no-spurious-detection and high-energy-detection targets.

use crate::cusum::is_high_energy;
use crate::error::{Error, Result};
use crate::series::{ChangePointVector, PiecewiseSignal};

/// Distance from `target` to its closest element of `taus`; `None` when the
/// vector is empty.
pub fn d_h1_point(taus: &ChangePointVector, target: usize) -> Option<usize> {
    taus.positions().iter().map(|&t| t.abs_diff(target)).min()
}

/// Hausdorff distance: the larger of the two screening distances. `Some(0)`
/// when both vectors are empty, `None` when exactly one is.
pub fn d_hausdorff(a: &ChangePointVector, b: &ChangePointVector) -> Option<usize> {
    if a.is_empty() && b.is_empty() {
        return Some(0);
    }
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let screen = |from: &ChangePointVector, to: &ChangePointVector| {
        to.positions()
            .iter()
            .map(|&t| d_h1_point(from, t).expect("nonempty"))
            .max()
            .expect("nonempty")
    };
    Some(screen(a, b).max(screen(b, a)))
}

/// `l1` matching distance between equal-length sorted vectors.
pub fn d_wasserstein(a: &ChangePointVector, b: &ChangePointVector) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "Wasserstein distance needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.positions()
        .iter()
        .zip(b.positions())
        .map(|(&x, &y)| x.abs_diff(y))
        .sum())
}

/// Whether `est` places at most one point in each half-open bin around the
/// true change-points:
/// `((tau_{k-1}+tau_k)/2, (tau_k+tau_{k+1})/2]` for `k` in `2..=K-1`, plus
/// `[2, (tau_1+tau_2)/2]` and `((tau_{K-1}+tau_K)/2, n]`, with sentinel
/// positions for the out-of-range indices. Midpoints are compared through
/// doubled integer arithmetic so the half-open boundaries are exact.
///
/// For a constant truth (`K = 0`) the check is simply that `est` is empty.
pub fn check_nosp(est: &ChangePointVector, truth: &ChangePointVector) -> bool {
    let k = truth.len();
    let n = truth.ambient_n();
    if k == 0 {
        return est.is_empty();
    }
    let count = |pred: &dyn Fn(usize) -> bool| est.positions().iter().filter(|&&x| pred(x)).count();

    // [2, (tau_1 + tau_2)/2]
    let hi = truth.tau(1) + truth.tau(2);
    if count(&|x| x >= 2 && 2 * x <= hi) > 1 {
        return false;
    }
    // ((tau_{K-1} + tau_K)/2, n]
    let lo = truth.tau(k - 1) + truth.tau(k);
    if count(&|x| 2 * x > lo && x <= n) > 1 {
        return false;
    }
    for mid in 2..=k.saturating_sub(1) {
        let lo = truth.tau(mid - 1) + truth.tau(mid);
        let hi = truth.tau(mid) + truth.tau(mid + 1);
        if count(&|x| 2 * x > lo && 2 * x <= hi) > 1 {
            return false;
        }
    }
    true
}

/// Per-change-point outcome of the detection check.
#[derive(Debug, Clone, PartialEq)]
pub struct DetecRow {
    /// Index of the true change-point, 1-based.
    pub k: usize,
    pub high_energy: bool,
    /// Distance from the truth to the closest estimate.
    pub distance: Option<usize>,
    /// Allowed localization error: the smaller of the two half-gaps and
    /// `c (log(1 ∨ n Delta_k^2) + q) / Delta_k^2`.
    pub bound: f64,
    /// `distance <= bound`; only meaningful for high-energy rows.
    pub detected: bool,
}

/// Detection report over all true change-points.
#[derive(Debug, Clone, PartialEq)]
pub struct DetecReport {
    pub rows: Vec<DetecRow>,
    /// Whether every high-energy change-point was detected within its bound.
    /// Low-energy rows do not participate.
    pub all_detected: bool,
}

/// Checks that every `(kappa, q)`-high-energy change-point of `sig` has an
/// estimate within the allowed distance.
pub fn check_detec(
    est: &ChangePointVector,
    sig: &PiecewiseSignal,
    kappa: f64,
    q: f64,
    c: f64,
) -> DetecReport {
    let n = sig.n() as f64;
    let mut rows = Vec::with_capacity(sig.k());
    let mut all_detected = true;
    for k in 1..=sig.k() {
        let high_energy = is_high_energy(sig, k, kappa, q).expect("k in range");
        let delta_sq = sig.height(k) * sig.height(k);
        let left_gap = (sig.taus().tau(k) - sig.taus().tau(k - 1)) as f64 / 2.0;
        let right_gap = (sig.taus().tau(k + 1) - sig.taus().tau(k)) as f64 / 2.0;
        let rate = c * ((n * delta_sq).max(1.0).ln() + q) / delta_sq;
        let bound = left_gap.min(right_gap).min(rate);
        let distance = d_h1_point(est, sig.taus().tau(k));
        let detected = distance.is_some_and(|d| d as f64 <= bound);
        if high_energy && !detected {
            all_detected = false;
        }
        rows.push(DetecRow {
            k,
            high_energy,
            distance,
            bound,
            detected,
        });
    }
    DetecReport { rows, all_detected }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::PiecewiseSignal;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cpv(taus: &[usize], n: usize) -> ChangePointVector {
        ChangePointVector::new(taus.to_vec(), n).unwrap()
    }

    #[test]
    fn point_distance_examples() {
        let t = cpv(&[10, 20], 30);
        assert_eq!(d_h1_point(&t, 12), Some(2));
        assert_eq!(d_h1_point(&t, 20), Some(0));
        assert_eq!(d_h1_point(&cpv(&[], 30), 12), None);
    }

    #[test]
    fn hausdorff_examples() {
        let a = cpv(&[10, 20], 30);
        assert_eq!(d_hausdorff(&a, &a), Some(0));
        let b = cpv(&[12, 25], 30);
        assert_eq!(d_hausdorff(&a, &b), Some(5));

        // The two screening directions differ.
        let c = cpv(&[12], 30);
        let screen_from_a = d_h1_point(&a, 12).unwrap();
        let screen_from_c = *[
            d_h1_point(&c, 10).unwrap(),
            d_h1_point(&c, 20).unwrap(),
        ]
        .iter()
        .max()
        .unwrap();
        assert_eq!(screen_from_a, 2);
        assert_eq!(screen_from_c, 8);
        assert_eq!(d_hausdorff(&a, &c), Some(8));

        assert_eq!(d_hausdorff(&cpv(&[], 30), &cpv(&[], 30)), Some(0));
        assert_eq!(d_hausdorff(&a, &cpv(&[], 30)), None);
    }

    #[test]
    fn hausdorff_is_symmetric_and_separates() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let n = rng.random_range(5..=50);
            let a: Vec<usize> = (2..=n).filter(|_| rng.random_bool(0.3)).collect();
            let b: Vec<usize> = (2..=n).filter(|_| rng.random_bool(0.3)).collect();
            if a.is_empty() || b.is_empty() {
                continue;
            }
            let (va, vb) = (cpv(&a, n), cpv(&b, n));
            assert_eq!(d_hausdorff(&va, &vb), d_hausdorff(&vb, &va));
            if d_hausdorff(&va, &vb) == Some(0) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn wasserstein_examples_and_triangle_inequality() {
        let a = cpv(&[10, 20], 30);
        let b = cpv(&[12, 25], 30);
        assert_eq!(d_wasserstein(&a, &a).unwrap(), 0);
        assert_eq!(d_wasserstein(&a, &b).unwrap(), 7);
        assert_eq!(
            d_wasserstein(&cpv(&[4], 30), &cpv(&[9], 30)).unwrap(),
            5
        );
        assert!(d_wasserstein(&a, &cpv(&[5], 30)).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let n = 60;
            let k = rng.random_range(1..=6);
            let mut draw = || {
                let mut v: Vec<usize> = Vec::new();
                while v.len() < k {
                    let t = rng.random_range(2..=n);
                    if !v.contains(&t) {
                        v.push(t);
                    }
                }
                v.sort_unstable();
                cpv(&v, n)
            };
            let (x, y, z) = (draw(), draw(), draw());
            let xy = d_wasserstein(&x, &y).unwrap();
            let yz = d_wasserstein(&y, &z).unwrap();
            let xz = d_wasserstein(&x, &z).unwrap();
            assert!(xz <= xy + yz);
        }
    }

    #[test]
    fn nosp_examples() {
        let truth = cpv(&[10], 20);
        assert!(check_nosp(&cpv(&[], 20), &truth));
        assert!(check_nosp(&truth, &truth));
        assert!(!check_nosp(&cpv(&[9, 11], 20), &truth));

        // K = 0: only the empty estimate passes.
        let flat = cpv(&[], 20);
        assert!(check_nosp(&cpv(&[], 20), &flat));
        assert!(!check_nosp(&cpv(&[5], 20), &flat));
    }

    #[test]
    fn nosp_truth_always_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..200 {
            let n = rng.random_range(4..=80);
            let taus: Vec<usize> = (2..=n).filter(|_| rng.random_bool(0.2)).collect();
            let truth = cpv(&taus, n);
            assert!(check_nosp(&truth, &truth), "truth {taus:?} n={n}");
        }
    }

    #[test]
    fn nosp_bin_boundaries_are_half_open() {
        // truth (6, 10) on n = 16: first bin is [2, 8], second is (8, 16].
        let truth = cpv(&[6, 10], 16);
        assert!(check_nosp(&cpv(&[8, 9], 16), &truth));
        assert!(!check_nosp(&cpv(&[7, 8], 16), &truth));
        assert!(!check_nosp(&cpv(&[9, 10], 16), &truth));
    }

    #[test]
    fn detec_examples() {
        let sig = PiecewiseSignal::new(cpv(&[30, 60], 90), vec![0.0, 5.0, 0.0]).unwrap();
        let report = check_detec(sig.taus(), &sig, 1.0, 1.0, 2.0);
        assert!(report.all_detected);
        for row in &report.rows {
            assert!(row.high_energy);
            assert_eq!(row.distance, Some(0));
        }

        // Nearest estimate beyond the half-gap: not detected.
        let est = cpv(&[45], 90);
        let report = check_detec(&est, &sig, 1.0, 1.0, 2.0);
        assert!(!report.all_detected);

        // Low-energy points are excluded from the pass verdict.
        let sig = PiecewiseSignal::new(cpv(&[30, 60], 90), vec![0.0, 5.0, 5.01]).unwrap();
        let report = check_detec(&cpv(&[30], 90), &sig, 1.0, 1.0, 2.0);
        assert!(report.rows[0].high_energy);
        assert!(!report.rows[1].high_energy);
        assert!(report.all_detected);
    }
}
