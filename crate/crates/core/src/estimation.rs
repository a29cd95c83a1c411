//! Pilot allocation, uplink training and MMSE channel estimation.
//!
//! Indexing follows the channel tensor: `q[b][j][k]` is the per-antenna
//! variance of BS `b`'s estimate of its channel to user `k` of cell `j`.
//! With i.i.d. Rayleigh channels the MMSE estimator is a real scalar times
//! the despread pilot observation, so every user sharing a pilot produces an
//! estimate parallel to the same observation vector.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelDims, ChannelRealization, TrialStream, VectorTensor, C64};
use crate::config::SystemConfig;
use crate::error::{Result, SimError};
use crate::rate::GroupingResult;
use crate::rng::{complex_normal, TAG_NOISE};
use crate::scenario::LargeScaleMap;

pub type UserId = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PilotAssignment {
    pilot_of: Vec<Vec<usize>>,
    pilot_length: usize,
    members: Vec<Vec<UserId>>,
}

impl PilotAssignment {
    fn from_map(pilot_of: Vec<Vec<usize>>, pilot_length: usize) -> Self {
        let mut members = vec![Vec::new(); pilot_length];
        for (j, row) in pilot_of.iter().enumerate() {
            for (k, &p) in row.iter().enumerate() {
                members[p].push((j, k));
            }
        }
        PilotAssignment {
            pilot_of,
            pilot_length,
            members,
        }
    }

    pub fn pilot_of(&self, cell: usize, user: usize) -> usize {
        self.pilot_of[cell][user]
    }

    /// Number of orthogonal pilot symbols `T_p`.
    pub fn pilot_length(&self) -> usize {
        self.pilot_length
    }

    pub fn num_cells(&self) -> usize {
        self.pilot_of.len()
    }

    pub fn users_per_cell(&self) -> usize {
        self.pilot_of.first().map_or(0, Vec::len)
    }

    /// All users on pilot `p`.
    pub fn members(&self, pilot: usize) -> &[UserId] {
        &self.members[pilot]
    }

    /// Sharer set `S(j, k)`, including `(j, k)` itself.
    pub fn sharers(&self, cell: usize, user: usize) -> &[UserId] {
        self.members(self.pilot_of(cell, user))
    }

    /// The user of `cell` on the same pilot as `(j, k)`, if any.
    pub fn sharer_in_cell(&self, cell: usize, j: usize, k: usize) -> Option<usize> {
        self.sharers(j, k).iter().find(|(l, _)| *l == cell).map(|&(_, i)| i)
    }

    /// `1 − T_p / T_c`.
    pub fn prelog(&self, coherence_block: usize) -> f64 {
        1.0 - self.pilot_length as f64 / coherence_block as f64
    }
}

/// Plain reuse-`f` coloring, or the center/edge allocation when a grouping is
/// supplied.
pub fn allocate_pilots(config: &SystemConfig, grouping: Option<&GroupingResult>) -> Result<PilotAssignment> {
    let cells = config.num_cells;
    let users = config.users_per_cell;
    let assignment = match grouping {
        None => {
            let f = config.pilot_reuse_factor;
            let pilot_of = (0..cells)
                .map(|l| (0..users).map(|k| (l % f) * users + k).collect())
                .collect();
            PilotAssignment::from_map(pilot_of, f * users)
        }
        Some(groups) => {
            if !config.grouping_enabled {
                return Err(SimError::InvalidConfig(
                    "grouped pilot allocation requested with grouping_enabled = false".into(),
                ));
            }
            if groups.cells.len() != cells {
                return Err(SimError::ShapeMismatch {
                    expected: format!("{cells} cells"),
                    found: format!("{} cells", groups.cells.len()),
                });
            }
            let center_book = groups.cells.iter().map(|c| c.center.len()).max().unwrap_or(0);
            let mut next_edge = center_book;
            let mut pilot_of = vec![vec![usize::MAX; users]; cells];
            for (l, cell) in groups.cells.iter().enumerate() {
                for (slot, &k) in cell.center.iter().enumerate() {
                    pilot_of[l][k] = slot;
                }
                for &k in &cell.edge {
                    pilot_of[l][k] = next_edge;
                    next_edge += 1;
                }
            }
            if pilot_of.iter().flatten().any(|&p| p == usize::MAX) {
                return Err(SimError::InvalidConfig("grouping does not cover every user".into()));
            }
            PilotAssignment::from_map(pilot_of, next_edge)
        }
    };
    if assignment.pilot_length >= config.coherence_block {
        return Err(SimError::PilotOverheadExceedsCoherence {
            pilot_length: assignment.pilot_length,
            coherence_block: config.coherence_block,
        });
    }
    Ok(assignment)
}

/// Despread pilot observations: for each BS, an `M × T_p` matrix whose column
/// `p` is `√ρ_tr · Σ_{(l,i) on p} h[b][l][i] + n`. Unused pilots stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingObservation {
    pub xi: Vec<DMatrix<C64>>,
}

impl TrainingObservation {
    pub fn observation(&self, bs: usize, pilot: usize) -> nalgebra::DVectorView<'_, C64> {
        self.xi[bs].column(pilot)
    }
}

pub fn synthesize_training(
    h: &ChannelRealization,
    pa: &PilotAssignment,
    config: &SystemConfig,
    noise_power: f64,
    stream: &TrialStream,
) -> TrainingObservation {
    let dims = h.dims();
    let amp = config.uplink_pilot_snr.sqrt();
    let noise_amp = noise_power.sqrt();
    let xi = (0..dims.cells)
        .map(|b| {
            let mut obs = DMatrix::zeros(dims.antennas, pa.pilot_length());
            for p in 0..pa.pilot_length() {
                if pa.members(p).is_empty() {
                    continue;
                }
                let mut col = obs.column_mut(p);
                for &(l, i) in pa.members(p) {
                    col.axpy(C64::new(amp, 0.0), &h.vector(b, l, i), C64::new(1.0, 0.0));
                }
                if noise_amp > 0.0 {
                    let mut rng = stream.open(TAG_NOISE, &[b as u64, p as u64]);
                    for m in 0..dims.antennas {
                        col[m] += complex_normal(&mut rng) * noise_amp;
                    }
                }
            }
            obs
        })
        .collect();
    TrainingObservation { xi }
}

fn sharer_gain_sum(beta: &LargeScaleMap, pa: &PilotAssignment, bs: usize, cell: usize, user: usize) -> f64 {
    pa.sharers(cell, user).iter().map(|&(l, i)| beta.get(bs, l, i)).sum()
}

/// Scalar MMSE weight applied by BS `bs` to its observation of the pilot of
/// user `(cell, user)`: `√ρ β / (σ² + ρ Σ_S β)`.
pub fn mmse_coefficient(
    beta: &LargeScaleMap,
    pa: &PilotAssignment,
    config: &SystemConfig,
    bs: usize,
    cell: usize,
    user: usize,
) -> f64 {
    let rho = config.uplink_pilot_snr;
    let denom = beta.effective_noise(config) + rho * sharer_gain_sum(beta, pa, bs, cell, user);
    rho.sqrt() * beta.get(bs, cell, user) / denom
}

/// Per-antenna estimate variances, indexed like the gain map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateVariance {
    num_cells: usize,
    users_per_cell: usize,
    q: Vec<f64>,
}

impl EstimateVariance {
    pub fn get(&self, bs: usize, cell: usize, user: usize) -> f64 {
        self.q[(bs * self.num_cells + cell) * self.users_per_cell + user]
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.users_per_cell
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.q
    }

    /// Writes `l,j,k,beta,q` rows.
    pub fn write_csv<W: Write>(&self, beta: &LargeScaleMap, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["l", "j", "k", "beta", "q"])?;
        for l in 0..self.num_cells {
            for j in 0..self.num_cells {
                for k in 0..self.users_per_cell {
                    w.write_record(&[
                        l.to_string(),
                        j.to_string(),
                        k.to_string(),
                        beta.get(l, j, k).to_string(),
                        self.get(l, j, k).to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `q[b][j][k] = ρ β² / (σ² + ρ Σ_{S(j,k)} β[b][·])`.
pub fn estimate_variance(beta: &LargeScaleMap, pa: &PilotAssignment, config: &SystemConfig) -> EstimateVariance {
    let (cells, users) = (beta.num_cells(), beta.users_per_cell());
    let rho = config.uplink_pilot_snr;
    let noise = beta.effective_noise(config);
    let mut q = Vec::with_capacity(cells * cells * users);
    for b in 0..cells {
        for j in 0..cells {
            for k in 0..users {
                let g = beta.get(b, j, k);
                q.push(rho * g * g / (noise + rho * sharer_gain_sum(beta, pa, b, j, k)));
            }
        }
    }
    EstimateVariance {
        num_cells: cells,
        users_per_cell: users,
        q,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub h_hat: VectorTensor,
    pub q: EstimateVariance,
}

impl ChannelEstimate {
    pub fn dims(&self) -> ChannelDims {
        self.h_hat.dims
    }

    /// Estimation error `h − ĥ`, uncorrelated with `ĥ`.
    pub fn error(&self, h: &ChannelRealization) -> VectorTensor {
        let dims = self.dims();
        let mut out = h.0.clone();
        for l in 0..dims.cells {
            for j in 0..dims.cells {
                *out.block_mut(l, j) -= self.h_hat.block(l, j);
            }
        }
        out
    }

    /// Estimate matrix `Ĥ` of cell `l` for its own users (`M × K`).
    pub fn own_cell(&self, l: usize) -> &DMatrix<C64> {
        self.h_hat.block(l, l)
    }
}

/// Forms every `ĥ[b][j][k] = c · ξ[b][pilot(j,k)]`.
pub fn mmse_estimate(
    xi: &TrainingObservation,
    beta: &LargeScaleMap,
    pa: &PilotAssignment,
    config: &SystemConfig,
    q: &EstimateVariance,
) -> ChannelEstimate {
    let cells = beta.num_cells();
    let users = beta.users_per_cell();
    let antennas = xi.xi.first().map_or(0, |x| x.nrows());
    let dims = ChannelDims { cells, users, antennas };
    let mut h_hat = VectorTensor::zeros(dims);
    for b in 0..cells {
        for j in 0..cells {
            let block = h_hat.block_mut(b, j);
            for k in 0..users {
                let c = mmse_coefficient(beta, pa, config, b, j, k);
                let obs = xi.observation(b, pa.pilot_of(j, k));
                block.column_mut(k).zip_apply(&obs, |dst, src| *dst = src * c);
            }
        }
    }
    ChannelEstimate { h_hat, q: q.clone() }
}
