// SPDX-License-Identifier: MIT OR Apache-2.0
// Development pilot for freezing acceptance constants. Not part of the API.

use cpdetect_core::calibrate::{CalibKind, CalibrationCache, TriadMode};
use cpdetect_core::metrics::d_h1_point;
use cpdetect_core::postproc::detect_full;
use cpdetect_core::series::{ChangePointVector, PiecewiseSignal, PrefixSums};
use cpdetect_core::sim::*;
use cpdetect_core::solver::{solve_dp, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::time::Instant;

fn gauss(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();
    match which.as_str() {
        "ci" => pilot_ci(),
        "loc" => pilot_loc(),
        "nosp" => pilot_nosp(),
        "bic" => pilot_bic(),
        "timing" => pilot_timing(),
        _ => eprintln!("usage: pilot ci|loc|nosp|bic|timing"),
    }
}

fn pilot_ci() {
    let n = 1000;
    let alpha = 0.1;
    let reps = 1000;
    for c_width in [3.0, 4.0] {
        for c_test in [1.0] {
            for delta in [1.0, 2.0, 4.0] {
                for frac in [0.1, 0.5] {
                    let tau_star = (n as f64 * frac) as usize;
                    let covered: usize = (0..reps as u64)
                        .into_par_iter()
                        .map(|rep| {
                            let mut rng = ChaCha8Rng::seed_from_u64(100);
                            rng.set_stream(rep + 1_000_000 * (delta as u64));
                            let mut y = gauss(&mut rng, n);
                            for v in y[(tau_star - 1)..].iter_mut() {
                                *v += delta;
                            }
                            let p = PrefixSums::from_values(&y).unwrap();
                            let ci = cpdetect_core::single::confidence_interval_single(
                                &p, 1.5, 1.5, alpha, c_width, c_test,
                            )
                            .unwrap();
                            (ci.interval.0 <= tau_star && tau_star <= ci.interval.1) as usize
                        })
                        .sum();
                    println!(
                        "ci cw={c_width} ct={c_test} delta={delta} frac={frac}: coverage {:.4}",
                        covered as f64 / reps as f64
                    );
                }
            }
        }
    }
}

fn pilot_loc() {
    let n = 2000;
    let tau_star = n / 2;
    let reps = 500;
    let mut cache = CalibrationCache::new();
    let (zeta, _) = cache
        .resolve(CalibKind::Zeta, n, 0.05, 500, 1, TriadMode::auto(n))
        .unwrap();
    let (q, _) = cache
        .resolve(CalibKind::Q, n, 0.05, 500, 1, TriadMode::auto(n))
        .unwrap();
    println!("zeta={zeta:.4} q={q:.4}");
    for delta in [0.5, 1.0, 2.0, 4.0] {
        let mut dp_err: Vec<usize> = Vec::new();
        let mut lp_err: Vec<usize> = Vec::new();
        let results: Vec<(Option<usize>, Option<usize>)> = (0..reps as u64)
            .into_par_iter()
            .map(|rep| {
                let mut rng = ChaCha8Rng::seed_from_u64(200 + (delta * 10.0) as u64);
                rng.set_stream(rep);
                let mut y = gauss(&mut rng, n);
                for v in y[(tau_star - 1)..].iter_mut() {
                    *v += delta;
                }
                let p = PrefixSums::from_values(&y).unwrap();
                let cfg = SolverConfig::new(2.0, q.max(0.001)).unwrap();
                let dp = solve_dp(&p, &cfg).taus;
                let lp = detect_full(&p, zeta, false).improved;
                (d_h1_point(&dp, tau_star), d_h1_point(&lp, tau_star))
            })
            .collect();
        let mut dp_miss = 0;
        let mut lp_miss = 0;
        for (d, l) in results {
            match d {
                Some(e) => dp_err.push(e),
                None => dp_miss += 1,
            }
            match l {
                Some(e) => lp_err.push(e),
                None => lp_miss += 1,
            }
        }
        dp_err.sort_unstable();
        lp_err.sort_unstable();
        let med = |v: &[usize]| -> f64 {
            if v.is_empty() {
                return f64::NAN;
            }
            if v.len() % 2 == 1 {
                v[v.len() / 2] as f64
            } else {
                0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2]) as f64
            }
        };
        let q95 = |v: &[usize]| -> f64 {
            if v.is_empty() {
                return f64::NAN;
            }
            v[(((0.95 * v.len() as f64).ceil() as usize).clamp(1, v.len())) - 1] as f64
        };
        let mean = |v: &[usize]| v.iter().sum::<usize>() as f64 / v.len().max(1) as f64;
        println!(
            "loc delta={delta}: dp med={} q95={} mean={:.2} miss={} | lp med={} q95={} mean={:.2} miss={}",
            med(&dp_err), q95(&dp_err), mean(&dp_err), dp_miss,
            med(&lp_err), q95(&lp_err), mean(&lp_err), lp_miss
        );
        println!(
            "   scaled: dp med*d2={:.3} q95*d2={:.3} mean*d2={:.3} | lp med*d2={:.3} q95*d2={:.3} mean*d2={:.3}",
            med(&dp_err) * delta * delta, q95(&dp_err) * delta * delta, mean(&dp_err) * delta * delta,
            med(&lp_err) * delta * delta, q95(&lp_err) * delta * delta, mean(&lp_err) * delta * delta
        );
    }
}

fn nosp_signal(n: usize) -> PiecewiseSignal {
    SignalSpec::Equispaced {
        changes: 4,
        height: 1.5,
        nuisance: 6,
        nuisance_scale: 0.05,
    }
    .build(n)
    .unwrap()
}

fn pilot_nosp() {
    let n = 2048;
    let reps = 500;
    let sig = nosp_signal(n);
    println!("truth: {:?}", sig.taus().positions());
    let profile = cpdetect_core::cusum::energy_profile(&sig);
    println!("energies: {:?}", profile.energies);

    let mut cache = CalibrationCache::new();
    let (zeta, _) = cache
        .resolve(CalibKind::Zeta, n, 0.05, 500, 1, TriadMode::auto(n))
        .unwrap();
    let (q, _) = cache
        .resolve(CalibKind::Q, n, 0.05, 500, 1, TriadMode::auto(n))
        .unwrap();
    println!("zeta={zeta:.4} q={q:.4}");

    let theta = cpdetect_core::series::piecewise_signal_values(&sig, n).unwrap();
    let strong: Vec<usize> = (1..=sig.k())
        .filter(|&k| profile.energies[k - 1] > 1.0)
        .map(|k| sig.taus().tau(k))
        .collect();

    for (name, l, use_dp) in [("lp-full", 0.0, false), ("dp-L8", 8.0, true)] {
        let stats: Vec<(bool, usize)> = (0..reps as u64)
            .into_par_iter()
            .map(|rep| {
                let mut rng = ChaCha8Rng::seed_from_u64(300);
                rng.set_stream(rep);
                let noise = gauss(&mut rng, n);
                let y: Vec<f64> = theta.iter().zip(&noise).map(|(a, b)| a + b).collect();
                let p = PrefixSums::from_values(&y).unwrap();
                let est = if use_dp {
                    solve_dp(&p, &SolverConfig::new(l, q.max(0.001)).unwrap()).taus
                } else {
                    detect_full(&p, zeta, false).improved
                };
                let nosp = cpdetect_core::metrics::check_nosp(&est, sig.taus());
                let worst = strong
                    .iter()
                    .map(|&t| d_h1_point(&est, t).unwrap_or(n))
                    .max()
                    .unwrap();
                (nosp, worst)
            })
            .collect();
        let nosp_rate = stats.iter().filter(|s| s.0).count() as f64 / reps as f64;
        let mut worsts: Vec<usize> = stats.iter().map(|s| s.1).collect();
        worsts.sort_unstable();
        println!(
            "{name}: nosp={nosp_rate:.4} worst_d med={} q95={} max={}",
            worsts[reps / 2],
            worsts[(0.95 * reps as f64) as usize],
            worsts[reps - 1]
        );
        // Implied detec constant: d <= c (log(n delta^2) + q)/delta^2 with delta=1.5.
        let dd = 1.5f64 * 1.5;
        let denom = ((n as f64 * dd).max(1.0).ln() + q) / dd;
        println!(
            "   implied c for max: {:.3}, for q95: {:.3} (denom {denom:.3})",
            worsts[reps - 1] as f64 / denom,
            worsts[(0.95 * reps as f64) as usize] as f64 / denom
        );
    }
}

fn pilot_bic() {
    let n = 4096usize;
    let reps = 300;
    let k = 4usize;
    let ell = n / (k + 1);
    // Energy target: 3x the constant-order multiscale scale at segments ~ n/5.
    let e_target = 3.0 * (2.0 * (2.0 * n as f64 / ell as f64).ln()).sqrt();
    let delta = e_target / ((ell / 2) as f64).sqrt();
    println!("e_target={e_target:.3} delta={delta:.4}");
    let mut cache = CalibrationCache::new();
    let base = ScenarioSpec {
        name: "bic-compare".to_string(),
        n,
        signal: SignalSpec::Equispaced {
            changes: 4,
            height: delta,
            nuisance: 0,
            nuisance_scale: 0.05,
        },
        noise: NoiseFamily::Gaussian,
        replicates: reps,
        seed: 400,
        procedure: Procedure::Dp,
        tuning: Tuning {
            l: 2.0,
            ..Tuning::default()
        },
    };
    let ms = run_scenario(&base, &mut cache).unwrap();
    let bic = run_scenario(
        &ScenarioSpec {
            procedure: Procedure::DpBic,
            ..base
        },
        &mut cache,
    )
    .unwrap();
    println!(
        "q={:?} multiscale all-4: {:.3}  bic all-4: {:.3}",
        ms.q_used,
        ms.all_within_halfgap.unwrap().rate,
        bic.all_within_halfgap.unwrap().rate
    );
}

fn pilot_timing() {
    let mut cache = CalibrationCache::new();
    for exp in [14usize, 15, 16] {
        let n = 1usize << exp;
        let mut rng = ChaCha8Rng::seed_from_u64(500);
        let mut y = gauss(&mut rng, n);
        for j in 1..=4usize {
            let at = j * n / 5;
            for v in y[at..].iter_mut() {
                *v += if j % 2 == 0 { -2.0 } else { 2.0 };
            }
        }
        let p = PrefixSums::from_values(&y).unwrap();
        let cfg = SolverConfig::new(2.0, 4.0).unwrap();

        let mut dp_times = Vec::new();
        for _ in 0..3 {
            let t = Instant::now();
            let r = solve_dp(&p, &cfg);
            dp_times.push(t.elapsed().as_secs_f64());
            std::hint::black_box(r);
        }
        dp_times.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let (zeta, _) = cache
            .resolve(CalibKind::Zeta, n, 0.05, 200, 1, TriadMode::DyadicGrid)
            .unwrap();
        let mut lp_times = Vec::new();
        for _ in 0..5 {
            let t = Instant::now();
            let r = detect_full(&p, zeta, true);
            lp_times.push(t.elapsed().as_secs_f64());
            std::hint::black_box(r);
        }
        lp_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!(
            "n=2^{exp}: dp median {:.3}s  lp-dyadic median {:.5}s (zeta {zeta:.3})",
            dp_times[1], lp_times[2]
        );
    }
}
