// SPDX-License-Identifier: MIT OR Apache-2.0

//! Serializable reports. JSON field order is fixed by declaration order, so
//! identical runs produce byte-identical output.

use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct TuningEcho {
    pub l: f64,
    pub q: Option<f64>,
    pub zeta: Option<f64>,
    pub alpha: f64,
    pub kappa: f64,
    pub dyadic: bool,
}

#[derive(Debug, Serialize)]
pub struct DetectionPoint {
    pub tau: usize,
    pub radius: Option<usize>,
    pub interval: Option<(usize, usize)>,
}

#[derive(Debug, Serialize)]
pub struct DetectionReport {
    pub procedure: String,
    pub n: usize,
    pub sigma: f64,
    pub sigma_estimated: bool,
    pub changepoints: Vec<usize>,
    pub points: Vec<DetectionPoint>,
    pub criterion: Option<f64>,
    pub tuning: TuningEcho,
}

impl DetectionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,radius,interval_lo,interval_hi\n");
        for p in &self.points {
            let radius = p.radius.map(|r| r.to_string()).unwrap_or_default();
            let (lo, hi) = match p.interval {
                Some((lo, hi)) => (lo.to_string(), hi.to_string()),
                None => (String::new(), String::new()),
            };
            out.push_str(&format!("{},{},{},{}\n", p.tau, radius, lo, hi));
        }
        out
    }
}

#[derive(Debug, Serialize)]
pub struct TestReport {
    pub statistic: f64,
    pub threshold: f64,
    pub reject: bool,
    pub argmin_tau: usize,
    pub l: f64,
    pub alpha: f64,
    pub sigma: f64,
}

impl TestReport {
    pub fn to_csv(&self) -> String {
        format!(
            "statistic,threshold,reject,argmin_tau\n{},{},{},{}\n",
            self.statistic, self.threshold, self.reject, self.argmin_tau
        )
    }
}

#[derive(Debug, Serialize)]
pub struct CiReport {
    pub interval: (usize, usize),
    pub tau_hat: usize,
    pub delta_hat: f64,
    pub informative: bool,
    pub l: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub sigma: f64,
}

impl CiReport {
    pub fn to_csv(&self) -> String {
        format!(
            "lo,hi,tau_hat,delta_hat,informative\n{},{},{},{},{}\n",
            self.interval.0, self.interval.1, self.tau_hat, self.delta_hat, self.informative
        )
    }
}
