// SPDX-License-Identifier: MIT OR Apache-2.0

//! CUSUM statistic, change-point energies, and the high-energy predicate.
//!
//! All logarithms in this crate are natural.

use crate::error::{Error, Result};
use crate::series::{PiecewiseSignal, PrefixSums, Triad};

/// CUSUM statistic at window `t`: the weighted difference of empirical means,
/// right minus left,
/// `[mean(Y, [t2,t3)) - mean(Y, [t1,t2))] * sqrt(d1*d2/(d1+d2))`.
///
/// The value is signed; see [`energy_at`] for the absolute population
/// counterpart.
pub fn cusum(p: &PrefixSums, t: Triad) -> f64 {
    assert!(t.t3 <= p.n() + 1, "triad exceeds series length");
    let d1 = t.d1() as f64;
    let d2 = t.d2() as f64;
    let left = p.sum(t.t1, t.t2) / d1;
    let right = p.sum(t.t2, t.t3) / d2;
    (right - left) * (d1 * d2 / (d1 + d2)).sqrt()
}

/// Energy `E(theta, t) = |cusum(theta, t)|` of a mean vector at window `t`.
///
/// `theta_prefix` must be the prefix sums of the signal vector itself.
pub fn energy_at(theta_prefix: &PrefixSums, t: Triad) -> f64 {
    cusum(theta_prefix, t).abs()
}

/// Per-change-point energies of a piecewise signal.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyProfile {
    /// `E_k` for `k = 1..=K`.
    pub energies: Vec<f64>,
    /// `l_k`, the smaller of the two segment lengths adjacent to `tau_k`.
    pub lengths: Vec<usize>,
    /// Heights `Delta_k = mu_{k+1} - mu_k`.
    pub heights: Vec<f64>,
}

impl EnergyProfile {
    pub fn k(&self) -> usize {
        self.energies.len()
    }
}

/// Energies `E_k = |Delta_k| * sqrt(d_k * d_{k+1} / (d_k + d_{k+1}))` where
/// `d_k = tau_k - tau_{k-1}` are the adjacent segment lengths. Empty for a
/// constant signal.
pub fn energy_profile(sig: &PiecewiseSignal) -> EnergyProfile {
    let k = sig.k();
    let mut energies = Vec::with_capacity(k);
    let mut lengths = Vec::with_capacity(k);
    let mut heights = Vec::with_capacity(k);
    for i in 1..=k {
        let left = (sig.taus().tau(i) - sig.taus().tau(i - 1)) as f64;
        let right = (sig.taus().tau(i + 1) - sig.taus().tau(i)) as f64;
        let h = sig.height(i);
        energies.push(h.abs() * (left * right / (left + right)).sqrt());
        lengths.push(left.min(right) as usize);
        heights.push(h);
    }
    EnergyProfile {
        energies,
        lengths,
        heights,
    }
}

/// `E_min = [min_k |Delta_k|] * [min over all K+1 segments of sqrt(length)]`.
pub fn e_min(sig: &PiecewiseSignal) -> Result<f64> {
    if sig.k() == 0 {
        return Err(Error::invalid("E_min is undefined for a constant signal"));
    }
    let min_height = (1..=sig.k())
        .map(|k| sig.height(k).abs())
        .fold(f64::INFINITY, f64::min);
    let min_len = (0..=sig.k())
        .map(|k| sig.taus().tau(k + 1) - sig.taus().tau(k))
        .min()
        .expect("at least one segment");
    Ok(min_height * (min_len as f64).sqrt())
}

/// `psi_q(d1, d2) = sqrt(2 log(n (d1+d2) / (d1 d2)) + q)`, the scale-dependent
/// threshold that every uniform noise bound in this crate is phrased in.
pub fn psi_q(n: usize, d1: usize, d2: usize, q: f64) -> f64 {
    debug_assert!(d1 >= 1 && d2 >= 1 && q >= 0.0);
    let ratio = n as f64 * (d1 + d2) as f64 / (d1 as f64 * d2 as f64);
    (2.0 * ratio.ln() + q).sqrt()
}

/// Whether the `k`-th change-point of `sig` is `(kappa, q)`-high-energy:
/// `E_k > kappa * psi_q(d_k, d_{k+1})`.
pub fn is_high_energy(sig: &PiecewiseSignal, k: usize, kappa: f64, q: f64) -> Result<bool> {
    if k == 0 || k > sig.k() {
        return Err(Error::invalid(format!(
            "change-point index {k} outside 1..={}",
            sig.k()
        )));
    }
    assert!(kappa > 0.0, "kappa must be positive");
    let profile = energy_profile(sig);
    let d1 = sig.taus().tau(k) - sig.taus().tau(k - 1);
    let d2 = sig.taus().tau(k + 1) - sig.taus().tau(k);
    Ok(profile.energies[k - 1] > kappa * psi_q(sig.n(), d1, d2, q))
}
