//! Closed-form downlink SINR under pilot contamination.
//!
//! With statistical normalization the use-and-forget bound is exact for
//! i.i.d. Rayleigh channels and MMSE estimates. For user `(j,k)`, with
//! `S` its pilot sharers and `n = σ²/ρ_d`:
//!
//! ```text
//! MRT:  Γ = M q_jjk / ( M Σ_{(l,i)∈S∖(j,k)} q_ljk + K Σ_l β_ljk + n )
//! ZF:   Γ = (M−K) q_jjk / ( (M−K) Σ_{(l,i)∈S∖(j,k)} q_ljk
//!                           + K Σ_{l has a sharer} (β_ljk − q_ljk)
//!                           + K Σ_{l has none} β_ljk + n )
//! ```
//!
//! ZF removes the estimated part of every channel aligned with a nulled
//! stream, which is why cells holding a sharer contribute `β − q` only.
//! `Paper` mode evaluates the simplified large-array forms, whose non-coherent sums
//! run over `q` of the other cells instead of `β`.

use crate::config::{SinrMode, SystemConfig};
use crate::error::{Result, SimError};
use crate::estimation::{allocate_pilots, estimate_variance, EstimateVariance, PilotAssignment};
use crate::precoding::Precoder;
use crate::rate::report::{rate_lower_bound, RateReport, SinrReport, UserSinr};
use crate::rate::{group_users, GroupingResult};
use crate::scenario::LargeScaleMap;

fn coherent_sum(q: &EstimateVariance, pa: &PilotAssignment, j: usize, k: usize) -> f64 {
    pa.sharers(j, k)
        .iter()
        .filter(|&&u| u != (j, k))
        .map(|&(l, _)| q.get(l, j, k))
        .sum()
}

/// `q_jjk / Σ_{sharers ≠ (j,k)} q_ljk`, or `+∞` without contamination.
pub fn user_ceiling(q: &EstimateVariance, pa: &PilotAssignment, j: usize, k: usize) -> f64 {
    let contamination = coherent_sum(q, pa, j, k);
    if contamination > 0.0 {
        q.get(j, j, k) / contamination
    } else {
        f64::INFINITY
    }
}

/// Pilot-contamination ceiling of every user, `[cell][user]`.
pub fn asymptotic_ceiling(q: &EstimateVariance, pa: &PilotAssignment) -> Vec<Vec<f64>> {
    (0..q.num_cells())
        .map(|j| (0..q.users_per_cell()).map(|k| user_ceiling(q, pa, j, k)).collect())
        .collect()
}

fn check_zf(config: &SystemConfig, precoder: Precoder) -> Result<()> {
    if precoder == Precoder::Zf && config.num_antennas <= config.users_per_cell {
        return Err(SimError::InsufficientAntennas {
            antennas: config.num_antennas,
            users: config.users_per_cell,
        });
    }
    Ok(())
}

/// Closed-form SINR of one user.
#[allow(clippy::too_many_arguments)]
pub fn user_sinr(
    beta: &LargeScaleMap,
    q: &EstimateVariance,
    pa: &PilotAssignment,
    config: &SystemConfig,
    mode: SinrMode,
    precoder: Precoder,
    j: usize,
    k: usize,
) -> f64 {
    let cells = beta.num_cells();
    let users = beta.users_per_cell() as f64;
    let m = config.num_antennas as f64;
    let noise = beta.effective_noise(config) / config.downlink_snr;
    let coherent = coherent_sum(q, pa, j, k);
    let own = q.get(j, j, k);
    match (mode, precoder) {
        (SinrMode::Consistent, Precoder::Mrt) => {
            let spread: f64 = (0..cells).map(|l| beta.get(l, j, k)).sum();
            m * own / (m * coherent + users * spread + noise)
        }
        (SinrMode::Consistent, Precoder::Zf) => {
            let dof = m - users;
            let leak: f64 = (0..cells)
                .map(|l| match pa.sharer_in_cell(l, j, k) {
                    Some(_) => beta.get(l, j, k) - q.get(l, j, k),
                    None => beta.get(l, j, k),
                })
                .sum();
            dof * own / (dof * coherent + users * leak + noise)
        }
        (SinrMode::Paper, kind) => {
            let other_q: f64 = (0..cells).filter(|&l| l != j).map(|l| q.get(l, j, k)).sum();
            let gain = match kind {
                Precoder::Mrt => m,
                Precoder::Zf => m - users,
            };
            // Per-user power of the other cells, in units of ρ_d.
            let power_term = match kind {
                Precoder::Mrt => 0.0,
                Precoder::Zf => (cells - 1) as f64 * beta.reference_gain(),
            };
            gain * own / (gain * coherent + power_term + users * other_q + noise)
        }
    }
}

pub fn sinr_closed_form(
    beta: &LargeScaleMap,
    q: &EstimateVariance,
    pa: &PilotAssignment,
    config: &SystemConfig,
    mode: SinrMode,
    precoder: Precoder,
) -> Result<SinrReport> {
    check_zf(config, precoder)?;
    let mut users = Vec::with_capacity(beta.num_cells() * beta.users_per_cell());
    for j in 0..beta.num_cells() {
        for k in 0..beta.users_per_cell() {
            users.push(UserSinr {
                cell: j,
                user: k,
                gamma_mc: None,
                ci95: None,
                gamma_cf: Some(user_sinr(beta, q, pa, config, mode, precoder, j, k)),
                gamma_inf: user_ceiling(q, pa, j, k),
            });
        }
    }
    Ok(SinrReport { users })
}

/// Grouping, grouped pilots, estimate variances and closed-form rates with
/// pre-log `1 − T_p/T_c`, `T_p = Σ_l K_le + max_l K_lc`.
pub fn rate_with_grouping(beta: &LargeScaleMap, config: &SystemConfig, precoder: Precoder) -> Result<RateReport> {
    if !config.grouping_enabled {
        return Err(SimError::InvalidConfig("rate_with_grouping needs grouping_enabled".into()));
    }
    evaluate_closed_form(beta, config, precoder)
}

/// Closed-form rates for one drop under whichever pilot scheme `config` selects.
pub fn evaluate_closed_form(beta: &LargeScaleMap, config: &SystemConfig, precoder: Precoder) -> Result<RateReport> {
    let grouping = group_users(beta, config);
    let pa = allocate_pilots(config, config.grouping_enabled.then_some(&grouping))?;
    closed_form_report(beta, &pa, grouping, config, precoder)
}

pub(crate) fn closed_form_report(
    beta: &LargeScaleMap,
    pa: &PilotAssignment,
    grouping: GroupingResult,
    config: &SystemConfig,
    precoder: Precoder,
) -> Result<RateReport> {
    let q = estimate_variance(beta, pa, config);
    let sinr = sinr_closed_form(beta, &q, pa, config, config.sinr_mode, precoder)?;
    let mut report = rate_lower_bound(&sinr, pa.prelog(config.coherence_block))?.with_grouping(grouping);
    report.pilot_length = Some(pa.pilot_length());
    report.config = Some(config.clone());
    Ok(report)
}
