// SPDX-License-Identifier: MIT OR Apache-2.0

//! CUSUM-based post-processing: per-candidate confidence radii, the pruning
//! step that keeps only candidates with disjoint confidence intervals, local
//! re-estimation inside the surviving intervals, and the self-standing
//! procedure that post-processes the full candidate vector `(2, ..., n)`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::series::{ChangePointVector, PrefixSums, Triad};

/// Clamped CUSUM window `t^(tau, r) = ((tau - r) ∨ 1, tau, (tau + r) ∧ (n+1))`.
pub fn triad_at(tau: usize, r: usize, n: usize) -> Triad {
    assert!(tau >= 2 && tau <= n, "tau outside {{2, ..., n}}");
    assert!(r >= 1, "radius must be positive");
    let t1 = tau.saturating_sub(r).max(1);
    let t3 = (tau + r).min(n + 1);
    Triad { t1, t2: tau, t3 }
}

/// Confidence radius of a candidate position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RadiusResult {
    pub tau: usize,
    /// Smallest radius at which the local CUSUM clears its threshold;
    /// `None` when no radius does.
    pub radius: Option<usize>,
    /// `[t1 + 1, t3 - 1]` at the selected radius; `None` when the radius is
    /// infinite.
    pub interval: Option<(usize, usize)>,
}

/// Natural logs of `1..=m`, shared by the threshold evaluations.
struct LogTable {
    ln: Vec<f64>,
}

impl LogTable {
    fn new(m: usize) -> Self {
        let mut ln = Vec::with_capacity(m + 1);
        ln.push(f64::NAN);
        for i in 1..=m {
            ln.push((i as f64).ln());
        }
        LogTable { ln }
    }

    /// `sqrt(2 log(n (d1 + d2) / (d1 d2)))`.
    #[inline]
    fn threshold(&self, n: usize, d1: usize, d2: usize) -> f64 {
        (2.0 * (self.ln[n] + self.ln[d1 + d2] - self.ln[d1] - self.ln[d2])).sqrt()
    }
}

#[inline]
fn abs_cusum(p: &PrefixSums, t: Triad) -> f64 {
    crate::cusum::cusum(p, t).abs()
}

fn radius_search(
    p: &PrefixSums,
    logs: &LogTable,
    tau: usize,
    zeta: f64,
    dyadic: bool,
) -> RadiusResult {
    let n = p.n();
    let r_max = (tau - 1).max(n + 1 - tau);
    let found = |r: usize| -> bool {
        let t = triad_at(tau, r, n);
        abs_cusum(p, t) > logs.threshold(n, t.d1(), t.d2()) + zeta
    };
    let hit = if dyadic {
        let mut hit = None;
        let mut r = 1usize;
        while r <= (1usize << n.ilog2()) {
            if found(r) {
                hit = Some(r);
                break;
            }
            r <<= 1;
        }
        hit
    } else {
        (1..=r_max).find(|&r| found(r))
    };
    match hit {
        Some(r) => {
            let t = triad_at(tau, r, n);
            RadiusResult {
                tau,
                radius: Some(r),
                interval: Some((t.t1 + 1, t.t3 - 1)),
            }
        }
        None => RadiusResult {
            tau,
            radius: None,
            interval: None,
        },
    }
}

/// Smallest radius `r` (all of `1..=n`, or the dyadic grid `1, 2, 4, ...`
/// when `dyadic`) at which `|C(Y, t^(tau, r))|` exceeds
/// `sqrt(2 log(n (t3-t1)/((t3-t2)(t2-t1)))) + zeta`, together with the
/// induced confidence interval. An infinite radius is a value, not an error.
pub fn radius(p: &PrefixSums, tau: usize, zeta: f64, dyadic: bool) -> RadiusResult {
    assert!(zeta > 0.0, "zeta must be positive");
    let logs = LogTable::new(p.n() + 1);
    radius_search(p, &logs, tau, zeta, dyadic)
}

fn compute_radii(p: &PrefixSums, taus: &[usize], zeta: f64, dyadic: bool) -> Vec<RadiusResult> {
    let logs = LogTable::new(p.n() + 1);
    taus.iter()
        .map(|&tau| radius_search(p, &logs, tau, zeta, dyadic))
        .collect()
}

/// Sorted order for the pruning scan: decreasing radius with infinite radii
/// first; equal radii by ascending position.
fn pruning_order(results: &[RadiusResult]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&i, &j| {
        let (ri, rj) = (results[i].radius, results[j].radius);
        match (ri, rj) {
            (None, None) => results[i].tau.cmp(&results[j].tau),
            (None, Some(_)) => std::cmp::Ordering::Less,
            (Some(_), None) => std::cmp::Ordering::Greater,
            (Some(a), Some(b)) => b.cmp(&a).then(results[i].tau.cmp(&results[j].tau)),
        }
    });
    order
}

fn intersects(merged: &BTreeMap<usize, usize>, lo: usize, hi: usize) -> bool {
    merged
        .range(..=hi)
        .next_back()
        .is_some_and(|(_, &h)| h >= lo)
}

fn insert_interval(merged: &mut BTreeMap<usize, usize>, mut lo: usize, mut hi: usize) {
    let mut overlapping = Vec::new();
    for (&l, &h) in merged.range(..=hi).rev() {
        if h < lo {
            break;
        }
        overlapping.push(l);
        lo = lo.min(l);
        hi = hi.max(h);
    }
    for key in overlapping {
        merged.remove(&key);
    }
    merged.insert(lo, hi);
}

/// Indices (into `results`) of the candidates surviving the pruning step.
///
/// Scanning candidates by decreasing radius, a candidate is removed when its
/// radius is infinite or its interval intersects the union of the intervals
/// of the later-ordered (smaller-radius) candidates. The last-ordered
/// candidate survives unless its radius is infinite. Surviving intervals are
/// pairwise disjoint.
fn prune_indices(results: &[RadiusResult]) -> Vec<usize> {
    let order = pruning_order(results);
    let m = order.len();
    let mut hits = vec![false; m];
    let mut merged: BTreeMap<usize, usize> = BTreeMap::new();
    for pos in (0..m).rev() {
        if let Some((lo, hi)) = results[order[pos]].interval {
            hits[pos] = intersects(&merged, lo, hi);
            insert_interval(&mut merged, lo, hi);
        }
    }
    let mut survivors = Vec::new();
    for pos in 0..m {
        let idx = order[pos];
        if results[idx].radius.is_none() {
            continue;
        }
        if pos + 1 == m || !hits[pos] {
            survivors.push(idx);
        }
    }
    survivors.sort_by_key(|&idx| results[idx].tau);
    survivors
}

/// Pruning step applied to an arbitrary candidate vector.
pub fn prune(p: &PrefixSums, taus: &ChangePointVector, zeta: f64, dyadic: bool) -> ChangePointVector {
    assert!(zeta > 0.0, "zeta must be positive");
    let results = compute_radii(p, taus.positions(), zeta, dyadic);
    let survivors: Vec<usize> = prune_indices(&results)
        .into_iter()
        .map(|idx| results[idx].tau)
        .collect();
    ChangePointVector::new(survivors, p.n()).expect("survivors are increasing positions")
}

fn improve_at(p: &PrefixSums, res: &RadiusResult) -> usize {
    let n = p.n();
    let r = res.radius.expect("survivor has a finite radius");
    let (lo, hi) = res.interval.expect("survivor has an interval");
    let window = triad_at(res.tau, 2 * r - 1, n);
    let mut best_tau = lo;
    let mut best = f64::NEG_INFINITY;
    for cand in lo..=hi {
        let t = Triad {
            t1: window.t1,
            t2: cand,
            t3: window.t3,
        };
        let v = abs_cusum(p, t);
        if v > best {
            best = v;
            best_tau = cand;
        }
    }
    best_tau
}

/// Re-estimates a position by maximizing `|C(Y, (t1, tau', t3))|` over
/// `tau'` in the confidence interval, where `(t1, ., t3)` is the window
/// `t^(tau, 2 r_hat - 1)`; ties go to the smallest `tau'`.
pub fn local_improve(p: &PrefixSums, tau: usize, zeta: f64) -> Result<usize> {
    let res = radius(p, tau, zeta, false);
    if res.radius.is_none() {
        return Err(Error::invalid(format!(
            "candidate {tau} has an infinite radius; prune before improving"
        )));
    }
    Ok(improve_at(p, &res))
}

/// Output of the prune + local-improvement pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PostprocReport {
    /// Survivors of the pruning step, in increasing order.
    pub pruned: ChangePointVector,
    /// Locally improved positions of the survivors.
    pub improved: ChangePointVector,
    /// Radius results of the survivors, aligned with `pruned`.
    pub radii: Vec<RadiusResult>,
    /// Threshold used.
    pub zeta: f64,
}

/// Prunes, then locally improves each survivor. Duplicate positions after
/// improvement are collapsed (the surviving intervals are disjoint, so this
/// does not trigger in practice) and the result is sorted.
pub fn postprocess(
    p: &PrefixSums,
    taus: &ChangePointVector,
    zeta: f64,
    dyadic: bool,
) -> PostprocReport {
    assert!(zeta > 0.0, "zeta must be positive");
    let results = compute_radii(p, taus.positions(), zeta, dyadic);
    let survivor_idx = prune_indices(&results);
    let surviving: Vec<RadiusResult> = survivor_idx.iter().map(|&i| results[i]).collect();
    let pruned = ChangePointVector::new(surviving.iter().map(|r| r.tau).collect(), p.n())
        .expect("survivors are increasing positions");

    let mut improved: Vec<usize> = surviving.iter().map(|r| improve_at(p, r)).collect();
    improved.sort_unstable();
    improved.dedup();
    let improved = ChangePointVector::new(improved, p.n()).expect("improved positions valid");

    PostprocReport {
        pruned,
        improved,
        radii: surviving,
        zeta,
    }
}

/// Self-standing detection: post-processes the complete candidate vector
/// `(2, 3, ..., n)`. With `dyadic` the radii are searched on the dyadic grid
/// and the whole pass costs `O(n log n)`.
pub fn detect_full(p: &PrefixSums, zeta: f64, dyadic: bool) -> PostprocReport {
    postprocess(p, &ChangePointVector::full(p.n()), zeta, dyadic)
}

/// Union of the confidence intervals of the finite-radius candidates, merged
/// into maximal disjoint integer segments.
pub fn global_confidence_region(
    p: &PrefixSums,
    taus: &ChangePointVector,
    zeta: f64,
) -> Vec<(usize, usize)> {
    assert!(zeta > 0.0, "zeta must be positive");
    let results = compute_radii(p, taus.positions(), zeta, false);
    let mut intervals: Vec<(usize, usize)> =
        results.iter().filter_map(|r| r.interval).collect();
    intervals.sort_unstable();
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (lo, hi) in intervals {
        match out.last_mut() {
            Some(last) if lo <= last.1 + 1 => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}
