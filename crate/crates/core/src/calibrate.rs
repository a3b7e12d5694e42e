// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte-Carlo calibration of the uniform noise thresholds: `zeta` for the
//! additive bound `|N(t)| <= sqrt(2 log(.)) + zeta` and `q` for the event
//! `|N(t)| <= 2 sqrt(2 log(.) + q)`, both over the triad collection.
//!
//! Replicates draw standard Gaussian noise on independent counter-indexed
//! streams, so results do not depend on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::series::PrefixSums;

/// Largest `n` for which full triad enumeration (`O(n^3)`) is allowed.
pub const N_EXACT: usize = 128;

/// Which triads a calibration pass enumerates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriadMode {
    /// All of the `O(n^3)` triads; only permitted for `n <= N_EXACT`.
    Full,
    /// Every center position, dyadic left and right lengths. Supremum over a
    /// subset, hence slightly anti-conservative.
    DyadicGrid,
}

impl TriadMode {
    /// Full enumeration when affordable, the dyadic grid otherwise.
    pub fn auto(n: usize) -> TriadMode {
        if n <= N_EXACT {
            TriadMode::Full
        } else {
            TriadMode::DyadicGrid
        }
    }
}

/// Suprema over the triad set of the two centered noise statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSuprema {
    /// `sup |N(t)| - sqrt(2 log(n (t3-t1)/((t3-t2)(t2-t1))))`.
    pub zeta_stat: f64,
    /// `sup N(t)^2/4 - 2 log(n (t3-t1)/((t3-t2)(t2-t1)))`; the event `A_q`
    /// holds exactly when `q` is at least this value.
    pub q_stat: f64,
}

fn dyadic_lengths(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut d = 1usize;
    while d <= n {
        out.push(d);
        d <<= 1;
    }
    out
}

/// Both suprema in one pass. For a fixed `(d1, d2)` shape the two statistics
/// are increasing in `|N|`, so only the running max of `|N|` is tracked in
/// the inner position loop.
fn noise_suprema(noise: &[f64], mode: TriadMode) -> Result<NoiseSuprema> {
    let n = noise.len();
    if n < 2 {
        return Err(Error::invalid("noise vector needs length >= 2"));
    }
    if mode == TriadMode::Full && n > N_EXACT {
        return Err(Error::invalid(format!(
            "full triad enumeration is limited to n <= {N_EXACT} (got {n}); use the dyadic-grid mode"
        )));
    }
    let p = PrefixSums::from_values_unchecked(noise);
    let (s, _) = p.raw();
    let ln_n = (n as f64).ln();
    let mut zeta_stat = f64::NEG_INFINITY;
    let mut q_stat = f64::NEG_INFINITY;

    let mut handle_shape = |d1: usize, d2: usize| {
        if d1 + d2 > n {
            return;
        }
        let inv1 = 1.0 / d1 as f64;
        let inv2 = 1.0 / d2 as f64;
        let w = (d1 as f64 * d2 as f64 / (d1 + d2) as f64).sqrt();
        let mut max_abs = 0.0f64;
        for t1 in 1..=(n + 1 - d1 - d2) {
            let t2 = t1 + d1;
            let t3 = t2 + d2;
            let v = (s[t3 - 1] - s[t2 - 1]) * inv2 - (s[t2 - 1] - s[t1 - 1]) * inv1;
            max_abs = max_abs.max(v.abs());
        }
        let nval = max_abs * w;
        let log_term = ln_n + ((d1 + d2) as f64).ln() - (d1 as f64).ln() - (d2 as f64).ln();
        zeta_stat = zeta_stat.max(nval - (2.0 * log_term).sqrt());
        q_stat = q_stat.max(nval * nval * 0.25 - 2.0 * log_term);
    };

    match mode {
        TriadMode::Full => {
            for d1 in 1..n {
                for d2 in 1..=(n - d1) {
                    handle_shape(d1, d2);
                }
            }
        }
        TriadMode::DyadicGrid => {
            let lengths = dyadic_lengths(n);
            for &d1 in &lengths {
                for &d2 in &lengths {
                    handle_shape(d1, d2);
                }
            }
        }
    }
    Ok(NoiseSuprema { zeta_stat, q_stat })
}

/// Supremum over the chosen triad set of
/// `|N(t)| - sqrt(2 log(n (t3-t1)/((t3-t2)(t2-t1))))` for a given noise
/// vector. Full mode is restricted to `n <= N_EXACT`.
pub fn sup_centered_noise(noise: &[f64], mode: TriadMode) -> Result<f64> {
    Ok(noise_suprema(noise, mode)?.zeta_stat)
}

/// The `A_q` supremum: minimal `q` making the event hold for this noise.
pub fn sup_q_statistic(noise: &[f64], mode: TriadMode) -> Result<f64> {
    Ok(noise_suprema(noise, mode)?.q_stat)
}

/// A calibrated threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub n: usize,
    pub alpha: f64,
    /// The calibrated threshold (`zeta` or `q`).
    pub value: f64,
    pub replicates: usize,
    /// True when the full triad set was enumerated.
    pub exact: bool,
    pub seed: u64,
}

/// Draws `rep` standard Gaussian vectors on independent streams of a
/// counter-based generator, evaluates `stat` on each, and returns all values.
fn monte_carlo_stats(
    n: usize,
    reps: usize,
    seed: u64,
    mode: TriadMode,
    pick: impl Fn(&NoiseSuprema) -> f64 + Sync,
) -> Result<Vec<f64>> {
    let results: Vec<Result<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep);
            let noise: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            noise_suprema(&noise, mode).map(|s| pick(&s))
        })
        .collect();
    results.into_iter().collect()
}

fn order_statistic(mut values: Vec<f64>, alpha: f64) -> f64 {
    let reps = values.len();
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let k = ((1.0 - alpha) * reps as f64).ceil() as usize;
    values[k.clamp(1, reps) - 1]
}

fn validate_calibration_args(n: usize, alpha: f64, reps: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid(format!("n must be >= 2, got {n}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if reps < 100 {
        return Err(Error::invalid(format!("need at least 100 replicates, got {reps}")));
    }
    Ok(())
}

/// Monte-Carlo estimate of `zeta_{1-alpha}`: the `ceil((1-alpha) reps)`-th
/// order statistic of the centered supremum over independent Gaussian draws.
pub fn calibrate_zeta(
    n: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
    mode: TriadMode,
) -> Result<CalibrationResult> {
    validate_calibration_args(n, alpha, reps)?;
    let stats = monte_carlo_stats(n, reps, seed, mode, |s| s.zeta_stat)?;
    Ok(CalibrationResult {
        n,
        alpha,
        value: order_statistic(stats, alpha),
        replicates: reps,
        exact: mode == TriadMode::Full,
        seed,
    })
}

/// Monte-Carlo estimate of `q_{1-alpha}`: the empirical `(1-alpha)` quantile
/// of the per-draw minimal `q`, floored at zero.
pub fn calibrate_q(
    n: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
    mode: TriadMode,
) -> Result<CalibrationResult> {
    validate_calibration_args(n, alpha, reps)?;
    let stats = monte_carlo_stats(n, reps, seed, mode, |s| s.q_stat)?;
    Ok(CalibrationResult {
        n,
        alpha,
        value: order_statistic(stats, alpha).max(0.0),
        replicates: reps,
        exact: mode == TriadMode::Full,
        seed,
    })
}

/// Which threshold a cache entry stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibKind {
    Zeta,
    Q,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheEntry {
    kind: CalibKind,
    n: usize,
    alpha: f64,
    replicates: usize,
    seed: u64,
    mode: TriadMode,
    value: f64,
}

/// File-backed map from calibration parameters to calibrated values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCache {
    entries: Vec<CacheEntry>,
}

impl CalibrationCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads a cache file; a missing file yields an empty cache.
    pub fn load(path: &Path) -> Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(text) => Ok(serde_json::from_str(&text)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn get(
        &self,
        kind: CalibKind,
        n: usize,
        alpha: f64,
        reps: usize,
        seed: u64,
        mode: TriadMode,
    ) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| {
                e.kind == kind
                    && e.n == n
                    && e.alpha == alpha
                    && e.replicates == reps
                    && e.seed == seed
                    && e.mode == mode
            })
            .map(|e| e.value)
    }

    pub fn insert(
        &mut self,
        kind: CalibKind,
        n: usize,
        alpha: f64,
        reps: usize,
        seed: u64,
        mode: TriadMode,
        value: f64,
    ) {
        self.entries.retain(|e| {
            !(e.kind == kind
                && e.n == n
                && e.alpha == alpha
                && e.replicates == reps
                && e.seed == seed
                && e.mode == mode)
        });
        self.entries.push(CacheEntry {
            kind,
            n,
            alpha,
            replicates: reps,
            seed,
            mode,
            value,
        });
    }

    /// Cached value or a fresh calibration; the boolean reports whether a
    /// Monte-Carlo run was needed.
    pub fn resolve(
        &mut self,
        kind: CalibKind,
        n: usize,
        alpha: f64,
        reps: usize,
        seed: u64,
        mode: TriadMode,
    ) -> Result<(f64, bool)> {
        if let Some(v) = self.get(kind, n, alpha, reps, seed, mode) {
            return Ok((v, false));
        }
        let result = match kind {
            CalibKind::Zeta => calibrate_zeta(n, alpha, reps, seed, mode)?,
            CalibKind::Q => calibrate_q(n, alpha, reps, seed, mode)?,
        };
        self.insert(kind, n, alpha, reps, seed, mode, result.value);
        Ok((result.value, true))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_noise_supremum_is_minus_min_threshold() {
        let sup = sup_centered_noise(&[0.0; 4], TriadMode::Full).unwrap();
        assert!((sup - (-(2.0 * 4.0f64.ln()).sqrt())).abs() < 1e-12);

        // n = 3: four triads, the balanced shapes give the smallest penalty.
        let sup = sup_centered_noise(&[0.0; 3], TriadMode::Full).unwrap();
        assert!((sup - (-(2.0 * 4.5f64.ln()).sqrt())).abs() < 1e-12);

        // Zero noise makes every q statistic non-positive.
        assert!(sup_q_statistic(&[0.0; 8], TriadMode::Full).unwrap() <= 0.0);
    }

    #[test]
    fn supremum_is_invariant_under_negation() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for _ in 0..20 {
            let n = rng.random_range(2..=40);
            let noise: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let neg: Vec<f64> = noise.iter().map(|v| -v).collect();
            for mode in [TriadMode::Full, TriadMode::DyadicGrid] {
                let a = sup_centered_noise(&noise, mode).unwrap();
                let b = sup_centered_noise(&neg, mode).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grid_supremum_never_exceeds_full_supremum() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        for _ in 0..20 {
            let n = rng.random_range(4..=64);
            let noise: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let full = sup_centered_noise(&noise, TriadMode::Full).unwrap();
            let grid = sup_centered_noise(&noise, TriadMode::DyadicGrid).unwrap();
            assert!(grid <= full + 1e-12);
            let full_q = sup_q_statistic(&noise, TriadMode::Full).unwrap();
            let grid_q = sup_q_statistic(&noise, TriadMode::DyadicGrid).unwrap();
            assert!(grid_q <= full_q + 1e-12);
        }
    }

    #[test]
    fn full_mode_rejects_large_n() {
        let noise = vec![0.0; N_EXACT + 1];
        assert!(sup_centered_noise(&noise, TriadMode::Full).is_err());
        assert!(sup_centered_noise(&noise, TriadMode::DyadicGrid).is_ok());
    }

    #[test]
    fn calibration_is_deterministic_and_validates_args() {
        let a = calibrate_zeta(16, 0.1, 100, 9, TriadMode::Full).unwrap();
        let b = calibrate_zeta(16, 0.1, 100, 9, TriadMode::Full).unwrap();
        assert_eq!(a, b);

        assert!(calibrate_zeta(16, 1.0, 100, 9, TriadMode::Full).is_err());
        assert!(calibrate_zeta(16, 0.0, 100, 9, TriadMode::Full).is_err());
        assert!(calibrate_zeta(16, 0.1, 99, 9, TriadMode::Full).is_err());
        assert!(calibrate_q(1, 0.1, 100, 9, TriadMode::Full).is_err());
    }

    #[test]
    fn calibration_is_independent_of_worker_count() {
        let parallel = calibrate_q(16, 0.1, 120, 3, TriadMode::Full).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("single-thread pool");
        let sequential = pool.install(|| calibrate_q(16, 0.1, 120, 3, TriadMode::Full).unwrap());
        assert_eq!(parallel, sequential);
    }

    #[test]
    fn calibrated_value_is_monotone_in_confidence() {
        let mut last = f64::NEG_INFINITY;
        for alpha in [0.5, 0.2, 0.1, 0.05] {
            let r = calibrate_zeta(24, alpha, 200, 5, TriadMode::Full).unwrap();
            assert!(r.value >= last);
            last = r.value;
        }
    }

    #[test]
    fn q_calibration_is_floored_at_zero() {
        let r = calibrate_q(16, 0.5, 100, 4, TriadMode::Full).unwrap();
        assert!(r.value >= 0.0);
    }

    #[test]
    fn cache_round_trips_and_resolves() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        let mut cache = CalibrationCache::load(&path).unwrap();
        assert_eq!(cache, CalibrationCache::new());

        let (v1, fresh1) = cache
            .resolve(CalibKind::Zeta, 16, 0.1, 100, 9, TriadMode::Full)
            .unwrap();
        assert!(fresh1);
        let (v2, fresh2) = cache
            .resolve(CalibKind::Zeta, 16, 0.1, 100, 9, TriadMode::Full)
            .unwrap();
        assert!(!fresh2);
        assert_eq!(v1, v2);

        cache.save(&path).unwrap();
        let reloaded = CalibrationCache::load(&path).unwrap();
        assert_eq!(
            reloaded.get(CalibKind::Zeta, 16, 0.1, 100, 9, TriadMode::Full),
            Some(v1)
        );
    }
}
