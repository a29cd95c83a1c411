//! Monte Carlo evaluation of the use-and-forget SINR.
//!
//! Each trial draws fading and pilot noise, estimates, precodes and records
//! the effective gains `g[l][j][k][i] = h[l][j][k]ᵀ b[l][i]`. The bound is
//! then `|E g_jjkk|² / (Σ_{l,i} E|g_ljki|² − |E g_jjkk|² + σ²/ρ_d)`.
//!
//! Trials are split into a fixed number of contiguous batches. Batches run in
//! parallel and are summed in order, so the result does not depend on the
//! thread count. The confidence interval uses batch means.

use rayon::prelude::*;

use crate::channel::{assemble_channel, sample_small_scale, ChannelDims, TrialStream, C64};
use crate::config::SystemConfig;
use crate::error::{Result, SimError};
use crate::estimation::{estimate_variance, mmse_estimate, synthesize_training, EstimateVariance, PilotAssignment};
use crate::precoding::{build_precoder, Precoder};
use crate::rate::closed_form::user_ceiling;
use crate::rate::report::{SinrReport, UserSinr};
use crate::scenario::LargeScaleMap;

pub const MIN_TRIALS: usize = 100;
pub const BATCHES: usize = 32;
/// Two-sided 97.5% Student-t quantile with `BATCHES − 1` degrees of freedom.
const T_QUANTILE: f64 = 2.0395;

#[derive(Debug, Clone)]
struct GainMoments {
    trials: usize,
    /// Σ desired gain, per `(j,k)`.
    desired: Vec<C64>,
    /// Σ total received power `Σ_{l,i} |g|²`, per `(j,k)`.
    power: Vec<f64>,
}

impl GainMoments {
    fn zeros(n: usize) -> Self {
        GainMoments {
            trials: 0,
            desired: vec![C64::new(0.0, 0.0); n],
            power: vec![0.0; n],
        }
    }

    fn add(&mut self, other: &GainMoments) {
        self.trials += other.trials;
        for (a, b) in self.desired.iter_mut().zip(&other.desired) {
            *a += b;
        }
        for (a, b) in self.power.iter_mut().zip(&other.power) {
            *a += b;
        }
    }

    fn sinr(&self, idx: usize, noise: f64) -> f64 {
        let n = self.trials as f64;
        let mean = self.desired[idx] / n;
        let signal = mean.norm_sqr();
        signal / (self.power[idx] / n - signal + noise)
    }
}

fn run_trial(
    beta: &LargeScaleMap,
    pa: &PilotAssignment,
    q: &EstimateVariance,
    config: &SystemConfig,
    precoder: Precoder,
    stream: &TrialStream,
    acc: &mut GainMoments,
) -> Result<()> {
    let dims = ChannelDims::of(beta, config.num_antennas);
    let h = assemble_channel(beta, &sample_small_scale(dims, stream))?;
    let xi = synthesize_training(&h, pa, config, beta.effective_noise(config), stream);
    let est = mmse_estimate(&xi, beta, pa, config, q);
    let pre = build_precoder(&est, config, precoder)?;
    for l in 0..dims.cells {
        for j in 0..dims.cells {
            let g = h.0.block(l, j).transpose() * &pre.b[l];
            for k in 0..dims.users {
                let idx = j * dims.users + k;
                acc.power[idx] += g.row(k).norm_squared();
                if l == j {
                    acc.desired[idx] += g[(k, k)];
                }
            }
        }
    }
    acc.trials += 1;
    Ok(())
}

/// Estimates every user's SINR from `n_trials` independent realizations.
pub fn sinr_monte_carlo(
    beta: &LargeScaleMap,
    pa: &PilotAssignment,
    config: &SystemConfig,
    precoder: Precoder,
    n_trials: usize,
    seed: u64,
) -> Result<SinrReport> {
    if n_trials < MIN_TRIALS {
        return Err(SimError::InvalidConfig(format!(
            "Monte Carlo needs at least {MIN_TRIALS} trials, got {n_trials}"
        )));
    }
    let (cells, users) = (beta.num_cells(), beta.users_per_cell());
    let q = estimate_variance(beta, pa, config);
    let batches: Vec<GainMoments> = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let mut acc = GainMoments::zeros(cells * users);
            for t in b * n_trials / BATCHES..(b + 1) * n_trials / BATCHES {
                run_trial(beta, pa, &q, config, precoder, &TrialStream::new(seed, t as u64), &mut acc)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = GainMoments::zeros(cells * users);
    for b in &batches {
        total.add(b);
    }

    let noise = beta.effective_noise(config) / config.downlink_snr;
    let mut out = Vec::with_capacity(cells * users);
    for j in 0..cells {
        for k in 0..users {
            let idx = j * users + k;
            let per_batch: Vec<f64> = batches.iter().map(|b| b.sinr(idx, noise)).collect();
            let mean = per_batch.iter().sum::<f64>() / BATCHES as f64;
            let var = per_batch.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
            out.push(UserSinr {
                cell: j,
                user: k,
                gamma_mc: Some(total.sinr(idx, noise)),
                ci95: Some(T_QUANTILE * (var / BATCHES as f64).sqrt()),
                gamma_cf: None,
                gamma_inf: user_ceiling(&q, pa, j, k),
            });
        }
    }
    Ok(SinrReport { users: out })
}
