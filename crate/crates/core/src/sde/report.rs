use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::stats::{mean_se, regression_slope};
use crate::profiles::ProfileConstants;
use crate::sde::coupling::CoupledEnsemble;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionRow {
    pub t: f64,
    pub mean_f_delta: f64,
    pub se_f_delta: f64,
    /// `e^{-λt} E f(|Δ₀|)`.
    pub envelope_f: f64,
    pub frac_distinct: f64,
    pub se_frac_distinct: f64,
    /// `q_t E f(|Δ₀|)`.
    pub envelope_q: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub lambda: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub delta_coal: f64,
    pub n_paths: usize,
    pub rows: Vec<ContractionRow>,
}

impl ContractionReport {
    /// CSV with header `t,mean_f_delta,se_f_delta,envelope_f,frac_distinct,envelope_q`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,mean_f_delta,se_f_delta,envelope_f,frac_distinct,envelope_q\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.t, r.mean_f_delta, r.se_f_delta, r.envelope_f, r.frac_distinct, r.envelope_q
            ));
        }
        s
    }

    /// Least-squares slope of `-log E f(|Δ_t|)` against `t` over rows with
    /// positive mean and `t > 0`, with its standard error.
    pub fn decay_rate(&self) -> Option<(f64, f64)> {
        let (t, y): (Vec<f64>, Vec<f64>) =
            self.rows.iter().filter(|r| r.t > 0.0 && r.mean_f_delta > 0.0).map(|r| (r.t, -r.mean_f_delta.ln())).unzip();
        (t.len() >= 2).then(|| regression_slope(&t, &y))
    }

    pub fn row_at(&self, t: f64) -> Option<&ContractionRow> {
        self.rows.iter().find(|r| (r.t - t).abs() <= 1e-9 * (1.0 + t.abs()))
    }
}

/// Empirical contraction curves next to the theoretical envelopes.
pub fn contraction_report(ensemble: &CoupledEnsemble, constants: &ProfileConstants) -> Result<ContractionReport> {
    if ensemble.n_paths == 0 || ensemble.times.is_empty() {
        return Err(Error::invalid("empty ensemble"));
    }
    let t0 = ensemble.times[0];
    let f0: Vec<f64> = ensemble.distances(0).iter().map(|&r| constants.f(r)).collect();
    let (mean_f0, _) = mean_se(&f0);
    let rows = ensemble
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let f: Vec<f64> = ensemble.distances(k).iter().map(|&r| if r == 0.0 { 0.0 } else { constants.f(r) }).collect();
            let (m, se) = mean_se(&f);
            let ind: Vec<f64> = ensemble.distinct(k).iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            let (p, se_p) = mean_se(&ind);
            let s = t - t0;
            ContractionRow {
                t,
                mean_f_delta: m,
                se_f_delta: se,
                envelope_f: (-constants.lambda * s).exp() * mean_f0,
                frac_distinct: p,
                se_frac_distinct: se_p,
                envelope_q: if mean_f0 == 0.0 { 0.0 } else { constants.q(s) * mean_f0 },
            }
        })
        .collect();
    Ok(ContractionReport {
        lambda: constants.lambda,
        c: constants.c,
        delta_coal: ensemble.delta_coal,
        n_paths: ensemble.n_paths,
        rows,
    })
}
