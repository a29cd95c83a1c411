//! MRT and ZF downlink precoders.
//!
//! The downlink channel is the transpose of the uplink one (TDD reciprocity),
//! so user `(j,k)` receives `h[l][j][k]ᵀ b` from a column `b` of BS `l`. MRT
//! therefore uses `conj(ĥ)`, and ZF uses `conj(Ĥ (Ĥᴴ Ĥ)⁻¹)`, which gives
//! `ĥᵢᵀ b_k = 0` for `i ≠ k`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channel::C64;
use crate::config::{NormalizationMode, SystemConfig};
use crate::error::{Result, SimError};
use crate::estimation::ChannelEstimate;

/// Largest Gram condition number accepted before ZF refuses to invert.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precoder {
    Mrt,
    Zf,
}

impl Precoder {
    pub fn as_str(self) -> &'static str {
        match self {
            Precoder::Mrt => "mrt",
            Precoder::Zf => "zf",
        }
    }
}

impl std::fmt::Display for Precoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    /// Per cell, `M × K`; column `k` serves user `(l, k)`.
    pub b: Vec<DMatrix<C64>>,
    pub kind: Precoder,
    pub normalization: NormalizationMode,
}

impl PrecoderSet {
    /// Σ_k ‖b_k‖² for cell `l`.
    pub fn cell_power(&self, l: usize) -> f64 {
        self.b[l].norm_squared()
    }
}

pub fn build_precoder(est: &ChannelEstimate, config: &SystemConfig, kind: Precoder) -> Result<PrecoderSet> {
    match kind {
        Precoder::Mrt => mrt_precoder(est, config),
        Precoder::Zf => zf_precoder(est, config),
    }
}

pub fn mrt_precoder(est: &ChannelEstimate, config: &SystemConfig) -> Result<PrecoderSet> {
    let dims = est.dims();
    let m = dims.antennas as f64;
    let mut b = Vec::with_capacity(dims.cells);
    for l in 0..dims.cells {
        let mut cell = est.own_cell(l).map(|z| z.conj());
        for k in 0..dims.users {
            let scale = match config.normalization_mode {
                NormalizationMode::Statistical => {
                    let q = est.q.get(l, l, k);
                    if q <= 0.0 {
                        return Err(SimError::DegenerateEstimate { cell: l, user: k });
                    }
                    1.0 / (m * q).sqrt()
                }
                NormalizationMode::PerRealization => {
                    let norm = cell.column(k).norm();
                    if norm == 0.0 {
                        return Err(SimError::DegenerateEstimate { cell: l, user: k });
                    }
                    1.0 / norm
                }
            };
            cell.column_mut(k).scale_mut(scale);
        }
        b.push(cell);
    }
    Ok(PrecoderSet {
        b,
        kind: Precoder::Mrt,
        normalization: config.normalization_mode,
    })
}

/// `λ_max / λ_min` of a Hermitian positive semidefinite matrix; infinite when
/// the smallest eigenvalue is not positive.
pub fn hermitian_condition(gram: &DMatrix<C64>) -> f64 {
    let eig = nalgebra::SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Pseudo-inverse columns `Ĥ (Ĥᴴ Ĥ)⁻¹` of one cell, unscaled.
pub fn zf_directions(h_hat: &DMatrix<C64>, cell: usize) -> Result<DMatrix<C64>> {
    let (antennas, users) = h_hat.shape();
    if antennas <= users {
        return Err(SimError::InsufficientAntennas { antennas, users });
    }
    let gram = h_hat.adjoint() * h_hat;
    let condition = hermitian_condition(&gram);
    if condition > MAX_GRAM_CONDITION {
        return Err(SimError::SingularGram { cell, condition });
    }
    let chol = gram
        .cholesky()
        .ok_or(SimError::SingularGram { cell, condition })?;
    // W = Ĥ G⁻¹  <=>  Wᴴ = G⁻¹ Ĥᴴ
    Ok(chol.solve(&h_hat.adjoint()).adjoint())
}

pub fn zf_precoder(est: &ChannelEstimate, config: &SystemConfig) -> Result<PrecoderSet> {
    let dims = est.dims();
    if dims.antennas <= dims.users {
        return Err(SimError::InsufficientAntennas {
            antennas: dims.antennas,
            users: dims.users,
        });
    }
    let dof = (dims.antennas - dims.users) as f64;
    let mut b = Vec::with_capacity(dims.cells);
    for l in 0..dims.cells {
        let mut cell = zf_directions(est.own_cell(l), l)?.map(|z| z.conj());
        for k in 0..dims.users {
            let scale = match config.normalization_mode {
                NormalizationMode::Statistical => (dof * est.q.get(l, l, k)).sqrt(),
                NormalizationMode::PerRealization => 1.0 / cell.column(k).norm(),
            };
            cell.column_mut(k).scale_mut(scale);
        }
        b.push(cell);
    }
    Ok(PrecoderSet {
        b,
        kind: Precoder::Zf,
        normalization: config.normalization_mode,
    })
}

/// Largest normalized leakage `|ĥᵢᵀ b_k| / (‖ĥᵢ‖ ‖b_k‖)` over `i ≠ k` and cells.
pub fn nulling_residual(est: &ChannelEstimate, pre: &PrecoderSet) -> f64 {
    let mut worst: f64 = 0.0;
    for (l, b) in pre.b.iter().enumerate() {
        let h = est.own_cell(l);
        let cross = h.transpose() * b;
        for i in 0..cross.nrows() {
            for k in 0..cross.ncols() {
                if i != k {
                    let r = cross[(i, k)].norm() / (h.column(i).norm() * b.column(k).norm());
                    worst = worst.max(r);
                }
            }
        }
    }
    worst
}

/// Per-cell transmit vectors `y_l = √ρ_d · B_l · x_l`.
pub fn transmit_signal(pre: &PrecoderSet, symbols: &[DVector<C64>], config: &SystemConfig) -> Result<Vec<DVector<C64>>> {
    if symbols.len() != pre.b.len() {
        return Err(SimError::ShapeMismatch {
            expected: format!("{} symbol vectors", pre.b.len()),
            found: symbols.len().to_string(),
        });
    }
    let amp = C64::new(config.downlink_snr.sqrt(), 0.0);
    pre.b
        .iter()
        .zip(symbols)
        .map(|(b, x)| {
            if x.len() != b.ncols() {
                return Err(SimError::ShapeMismatch {
                    expected: format!("{} symbols", b.ncols()),
                    found: x.len().to_string(),
                });
            }
            Ok(b * x * amp)
        })
        .collect()
}
