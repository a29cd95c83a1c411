//! Parameter sweeps over antennas, pilot reuse or cell count, averaged over
//! independent user drops, with CSV output.
//!
//! Work is split into `(value, drop)` jobs. Each drop's seed is derived from
//! the sweep seed and the drop index alone, so every swept value sees the same
//! placements and the output does not depend on how jobs are scheduled.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{SinrMode, SystemConfig};
use crate::error::{Result, SimError};
use crate::estimation::allocate_pilots;
use crate::precoding::Precoder;
use crate::rate::monte_carlo::MIN_TRIALS;
use crate::rate::{evaluate_closed_form, group_users, rate_lower_bound, sinr_monte_carlo, RateReport};
use crate::rng::stream_id;
use crate::scenario::Scenario;

pub const CSV_HEADER: [&str; 13] = [
    "swept_param",
    "value",
    "precoder",
    "mode",
    "rate_total",
    "rate_mean_user",
    "sinr_db_mean",
    "ci95",
    "prelog",
    "k_center",
    "k_edge",
    "seed",
    "error",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParameter {
    Antennas,
    PilotReuse,
    Cells,
}

impl SweptParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweptParameter::Antennas => "antennas",
            SweptParameter::PilotReuse => "pilot_reuse",
            SweptParameter::Cells => "cells",
        }
    }

    pub fn apply(self, base: &SystemConfig, value: usize) -> SystemConfig {
        let mut config = base.clone();
        match self {
            SweptParameter::Antennas => config.num_antennas = value,
            SweptParameter::PilotReuse => config.pilot_reuse_factor = value,
            SweptParameter::Cells => config.num_cells = value,
        }
        config
    }
}

impl fmt::Display for SweptParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a row's SINRs are obtained. Declaration order is the CSV sort order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    CfConsistent,
    CfPaper,
    Mc,
}

impl RateMode {
    pub const ALL: [RateMode; 3] = [RateMode::CfConsistent, RateMode::CfPaper, RateMode::Mc];

    pub fn as_str(self) -> &'static str {
        match self {
            RateMode::CfConsistent => "cf_consistent",
            RateMode::CfPaper => "cf_paper",
            RateMode::Mc => "mc",
        }
    }
}

impl fmt::Display for RateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub swept_parameter: SweptParameter,
    pub values: Vec<usize>,
    pub base_config: SystemConfig,
    /// Channel realizations per drop; only used by [`RateMode::Mc`].
    pub n_trials: usize,
    pub n_drops: usize,
    pub seed: u64,
    pub precoders: Vec<Precoder>,
    pub modes: Vec<RateMode>,
}

impl SweepSpec {
    pub fn new(swept_parameter: SweptParameter, values: Vec<usize>, base_config: SystemConfig) -> Self {
        SweepSpec {
            swept_parameter,
            values,
            base_config,
            n_trials: 500,
            n_drops: 10,
            seed: 0,
            precoders: vec![Precoder::Mrt, Precoder::Zf],
            modes: vec![RateMode::CfConsistent],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::InvalidSweep(msg));
        if self.values.is_empty() {
            return bad("no sweep values".into());
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("sweep values must be strictly increasing: {:?}", self.values));
        }
        if self.n_drops == 0 {
            return bad("n_drops must be positive".into());
        }
        if self.precoders.is_empty() || self.modes.is_empty() {
            return bad("at least one precoder and one mode are required".into());
        }
        if self.modes.contains(&RateMode::Mc) && self.n_trials < MIN_TRIALS {
            return bad(format!("Monte Carlo rows need at least {MIN_TRIALS} trials"));
        }
        for &v in &self.values {
            self.config_for(v).validate()?;
        }
        Ok(())
    }

    pub fn config_for(&self, value: usize) -> SystemConfig {
        self.swept_parameter.apply(&self.base_config, value)
    }

    /// Seed of drop `d`, shared by every swept value.
    pub fn drop_seed(&self, d: usize) -> u64 {
        stream_id(&[self.seed, d as u64])
    }

    fn trial_seed(&self, d: usize) -> u64 {
        stream_id(&[self.seed, d as u64, 1])
    }
}

/// One `(value, precoder, mode)` point, averaged over drops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub swept_param: SweptParameter,
    pub value: usize,
    pub precoder: Precoder,
    pub mode: RateMode,
    /// Sum rate over all `L·K` users, bits/s/Hz.
    pub rate_total: Option<f64>,
    pub rate_mean_user: Option<f64>,
    pub per_cell_rates: Option<Vec<f64>>,
    /// Mean rate of edge users; `None` if no drop had any.
    pub rate_edge_mean: Option<f64>,
    pub sinr_db_mean: Option<f64>,
    /// Half-width on `rate_total`, summing per-user SINR intervals mapped
    /// through the rate function (Monte Carlo rows only).
    pub ci95: Option<f64>,
    pub prelog: Option<f64>,
    pub k_center: Option<f64>,
    pub k_edge: Option<f64>,
    pub seed: u64,
    pub error: Option<String>,
    /// Wall time spent on this row's evaluations; not written to CSV.
    pub runtime_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

struct DropOutcome {
    report: RateReport,
    ci95: Option<f64>,
    seconds: f64,
}

fn evaluate_drop(spec: &SweepSpec, value: usize, d: usize, precoder: Precoder, mode: RateMode) -> Result<DropOutcome> {
    let start = Instant::now();
    let mut config = spec.config_for(value);
    let scenario = Scenario::generate(&config, spec.drop_seed(d))?;
    let beta = &scenario.beta;
    let (report, ci95) = match mode {
        RateMode::CfConsistent | RateMode::CfPaper => {
            config.sinr_mode = if mode == RateMode::CfPaper {
                SinrMode::Paper
            } else {
                SinrMode::Consistent
            };
            (evaluate_closed_form(beta, &config, precoder)?, None)
        }
        RateMode::Mc => {
            let grouping = group_users(beta, &config);
            let pa = allocate_pilots(&config, config.grouping_enabled.then_some(&grouping))?;
            let sinr = sinr_monte_carlo(beta, &pa, &config, precoder, spec.n_trials, spec.trial_seed(d))?;
            let mut report = rate_lower_bound(&sinr, pa.prelog(config.coherence_block))?.with_grouping(grouping);
            report.pilot_length = Some(pa.pilot_length());
            let ci: f64 = sinr
                .users
                .iter()
                .map(|u| {
                    let g = u.gamma_mc.unwrap_or(0.0);
                    report.prelog * u.ci95.unwrap_or(0.0) / ((1.0 + g) * std::f64::consts::LN_2)
                })
                .sum();
            (report, Some(ci))
        }
    };
    Ok(DropOutcome {
        report,
        ci95,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

fn summarize(spec: &SweepSpec, value: usize, precoder: Precoder, mode: RateMode, drops: Vec<Result<DropOutcome>>) -> SweepRow {
    let mut row = SweepRow {
        swept_param: spec.swept_parameter,
        value,
        precoder,
        mode,
        rate_total: None,
        rate_mean_user: None,
        per_cell_rates: None,
        rate_edge_mean: None,
        sinr_db_mean: None,
        ci95: None,
        prelog: None,
        k_center: None,
        k_edge: None,
        seed: spec.seed,
        error: None,
        runtime_secs: 0.0,
    };
    let outcomes: Vec<DropOutcome> = match drops.into_iter().collect::<Result<_>>() {
        Ok(v) => v,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let rate_of = |u: &crate::rate::UserRate| u.rate_cf.or(u.rate_mc).unwrap_or(0.0);
    let sinr_of = |u: &crate::rate::UserRate| u.sinr_cf.or(u.sinr_mc).unwrap_or(0.0);
    let config = spec.config_for(value);
    let users = (config.num_cells * config.users_per_cell) as f64;

    let total = mean(outcomes.iter().map(|o| o.report.users.iter().map(rate_of).sum::<f64>()));
    let mut per_cell = vec![0.0; config.num_cells];
    for o in &outcomes {
        for u in &o.report.users {
            per_cell[u.cell] += rate_of(u) / outcomes.len() as f64;
        }
    }
    let edge: Vec<f64> = outcomes.iter().filter_map(|o| o.report.mean_edge_rate()).collect();
    row.rate_total = Some(total);
    row.rate_mean_user = Some(total / users);
    row.per_cell_rates = Some(per_cell);
    row.rate_edge_mean = (!edge.is_empty()).then(|| mean(edge.into_iter()));
    row.sinr_db_mean = Some(mean(
        outcomes
            .iter()
            .flat_map(|o| o.report.users.iter().map(|u| 10.0 * sinr_of(u).log10())),
    ));
    if mode == RateMode::Mc {
        row.ci95 = Some(mean(outcomes.iter().map(|o| o.ci95.unwrap_or(0.0))));
    }
    row.prelog = Some(mean(outcomes.iter().map(|o| o.report.prelog)));
    let count = |f: fn(&crate::rate::GroupingResult) -> usize| {
        mean(outcomes.iter().map(|o| o.report.grouping.as_ref().map_or(0, f) as f64))
    };
    row.k_center = Some(count(crate::rate::GroupingResult::total_center));
    row.k_edge = Some(count(crate::rate::GroupingResult::total_edge));
    row.runtime_secs = outcomes.iter().map(|o| o.seconds).sum();
    row
}

/// Runs the sweep on the ambient rayon pool.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let mut combos: Vec<(Precoder, RateMode)> = spec
        .precoders
        .iter()
        .flat_map(|&p| spec.modes.iter().map(move |&m| (p, m)))
        .collect();
    combos.sort();
    combos.dedup();

    let jobs: Vec<(usize, usize)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.n_drops).map(move |d| (v, d)))
        .collect();
    let results: Vec<Vec<Result<DropOutcome>>> = jobs
        .par_iter()
        .map(|&(v, d)| combos.iter().map(|&(p, m)| evaluate_drop(spec, v, d, p, m)).collect())
        .collect();

    let mut rows = Vec::with_capacity(spec.values.len() * combos.len());
    let mut results = results.into_iter();
    for &v in &spec.values {
        let mut per_combo: Vec<Vec<Result<DropOutcome>>> = combos.iter().map(|_| Vec::new()).collect();
        for drop in results.by_ref().take(spec.n_drops) {
            for (slot, outcome) in per_combo.iter_mut().zip(drop) {
                slot.push(outcome);
            }
        }
        for (&(p, m), drops) in combos.iter().zip(per_combo) {
            rows.push(summarize(spec, v, p, m, drops));
        }
    }
    rows.sort_by_key(|r| (r.value, r.precoder, r.mode));
    Ok(SweepResult { rows })
}

/// Runs the sweep on a dedicated pool of `workers` threads.
pub fn run_sweep_with_workers(spec: &SweepSpec, workers: usize) -> Result<SweepResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SimError::InvalidSweep(e.to_string()))?;
    pool.install(|| run_sweep(spec))
}

/// Writes the fixed-header CSV, one row per `(value, precoder, mode)`.
pub fn write_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &result.rows {
        w.write_record(&[
            r.swept_param.to_string(),
            r.value.to_string(),
            r.precoder.to_string(),
            r.mode.to_string(),
            opt(r.rate_total),
            opt(r.rate_mean_user),
            opt(r.sinr_db_mean),
            opt(r.ci95),
            opt(r.prelog),
            opt(r.k_center),
            opt(r.k_edge),
            r.seed.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    write_csv(result, std::fs::File::create(path)?)
}
