//! JSON report types and chain summaries.

use anyhow::{bail, Result};
use bernstein_yett::diagnostics::{ess, Waic};
use bernstein_yett::mcmc::ChainRecord;
use serde::{Deserialize, Serialize};

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaicReport {
    pub waic: f64,
    pub lppd: f64,
    pub p_waic: f64,
    pub samples: usize,
    pub single_sample: bool,
}

impl From<Waic> for WaicReport {
    fn from(w: Waic) -> Self {
        WaicReport { waic: w.waic, lppd: w.lppd, p_waic: w.p_waic, samples: w.samples, single_sample: w.single_sample }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub g: f64,
    pub r: Option<f64>,
    pub marginals: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub chain: usize,
    pub file: String,
    pub saved: usize,
    pub acceptance: Acceptance,
    pub runtime_secs: f64,
    pub waic: Option<WaicReport>,
}

/// ESS over the series of one functional. Several series (cells, entries
/// of `R`) are summarised by their spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssReport {
    pub functional: String,
    pub series: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    /// Series with zero variance (counted at full length).
    pub constant: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub model: String,
    pub waic: WaicReport,
    pub acceptance: f64,
    pub posterior_mean_r: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub data_sha256: String,
    pub observations: usize,
    pub dims: usize,
    pub k: Vec<usize>,
    pub proposal: String,
    pub prior: String,
    pub seed: u64,
    pub iterations: usize,
    pub chains: Vec<ChainSummary>,
    /// Pooled over chains.
    pub waic: Option<WaicReport>,
    /// ESS summed over chains.
    pub ess: Vec<EssReport>,
    pub baseline: Option<BaselineReport>,
    pub clamped_cdf_values: usize,
}

/// All scalar series making up a functional.
pub fn series(functional: &str, records: &[ChainRecord]) -> Result<Vec<Vec<f64>>> {
    let Some(first) = records.first() else {
        return Ok(Vec::new());
    };
    let pick = |len: usize, get: &dyn Fn(&ChainRecord, usize) -> f64| -> Vec<Vec<f64>> {
        (0..len).map(|c| records.iter().map(|r| get(r, c)).collect()).collect()
    };
    Ok(match functional {
        "cells" => pick(first.masses.len(), &|r, c| r.masses[c]),
        "r" => pick(first.r_upper.len(), &|r, c| r.r_upper[c]),
        "theta" => pick(first.theta.len(), &|r, c| r.theta[c]),
        "loglik" => vec![records.iter().map(|r| r.loglik).collect()],
        "logprior" => vec![records.iter().map(|r| r.log_prior).collect()],
        other => bail!("unknown functional `{other}`"),
    })
}

/// ESS of a functional, summed across independent chains. `None` when the
/// functional is empty for these chains (no `R`, no sampled marginals).
pub fn ess_report(functional: &str, chains: &[&[ChainRecord]]) -> Result<Option<EssReport>> {
    let mut totals: Vec<f64> = Vec::new();
    let mut constant: Vec<bool> = Vec::new();
    for records in chains {
        let s = series(functional, records)?;
        if totals.is_empty() {
            totals = vec![0.0; s.len()];
            constant = vec![true; s.len()];
        }
        for (i, x) in s.iter().enumerate() {
            let e = ess(x)?;
            totals[i] += e.value;
            constant[i] &= e.degenerate;
        }
    }
    if totals.is_empty() {
        return Ok(None);
    }
    let mut sorted = totals.clone();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median = if m % 2 == 1 { sorted[m / 2] } else { 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]) };
    Ok(Some(EssReport {
        functional: functional.to_string(),
        series: m,
        min: sorted[0],
        median,
        max: sorted[m - 1],
        constant: constant.iter().filter(|c| **c).count(),
    }))
}
