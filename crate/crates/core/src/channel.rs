//! Rayleigh small-scale fading and channel assembly `h = √β · θ`.

use nalgebra::{Complex, DMatrix};

use crate::error::{Result, SimError};
use crate::rng::{complex_normal, substream, TAG_FADING};
use crate::scenario::LargeScaleMap;

pub type C64 = Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelDims {
    pub cells: usize,
    pub users: usize,
    pub antennas: usize,
}

impl ChannelDims {
    pub fn of(beta: &LargeScaleMap, antennas: usize) -> Self {
        ChannelDims {
            cells: beta.num_cells(),
            users: beta.users_per_cell(),
            antennas,
        }
    }
}

/// Random-number handle for one Monte Carlo trial. Every draw in the trial is
/// addressed by `(seed, trial, tag, indices)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialStream {
    pub seed: u64,
    pub trial: u64,
}

impl TrialStream {
    pub fn new(seed: u64, trial: u64) -> Self {
        TrialStream { seed, trial }
    }

    pub fn open(&self, tag: u64, indices: &[u64]) -> rand_chacha::ChaCha8Rng {
        let mut path = Vec::with_capacity(indices.len() + 2);
        path.push(tag);
        path.push(self.trial);
        path.extend_from_slice(indices);
        substream(self.seed, &path)
    }
}

/// A tensor of M-vectors indexed `[l][j][k]`, stored as one `M×K` matrix per
/// `(l, j)` pair; column `k` is the vector for user `k` of cell `j` as seen
/// from BS `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTensor {
    pub dims: ChannelDims,
    blocks: Vec<DMatrix<C64>>,
}

impl VectorTensor {
    pub fn zeros(dims: ChannelDims) -> Self {
        VectorTensor {
            dims,
            blocks: vec![DMatrix::zeros(dims.antennas, dims.users); dims.cells * dims.cells],
        }
    }

    /// `M×K` block for BS `l` and the users of cell `j`.
    pub fn block(&self, l: usize, j: usize) -> &DMatrix<C64> {
        &self.blocks[l * self.dims.cells + j]
    }

    pub fn block_mut(&mut self, l: usize, j: usize) -> &mut DMatrix<C64> {
        &mut self.blocks[l * self.dims.cells + j]
    }

    pub fn vector(&self, l: usize, j: usize, k: usize) -> nalgebra::DVectorView<'_, C64> {
        self.block(l, j).column(k)
    }
}

/// Unit-variance i.i.d. CN(0, 1) fading `θ[l][j][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallScaleRealization(pub VectorTensor);

/// Full channels `h[l][j][k] = √β[l][j][k] · θ[l][j][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization(pub VectorTensor);

impl ChannelRealization {
    pub fn dims(&self) -> ChannelDims {
        self.0.dims
    }

    pub fn vector(&self, l: usize, j: usize, k: usize) -> nalgebra::DVectorView<'_, C64> {
        self.0.vector(l, j, k)
    }
}

/// Draws every `θ[l][j][k]` from its own `(trial, l, j, k)` substream.
pub fn sample_small_scale(dims: ChannelDims, stream: &TrialStream) -> SmallScaleRealization {
    let mut theta = VectorTensor::zeros(dims);
    for l in 0..dims.cells {
        for j in 0..dims.cells {
            let block = theta.block_mut(l, j);
            for k in 0..dims.users {
                let mut rng = stream.open(TAG_FADING, &[l as u64, j as u64, k as u64]);
                for m in 0..dims.antennas {
                    block[(m, k)] = complex_normal(&mut rng);
                }
            }
        }
    }
    SmallScaleRealization(theta)
}

pub fn assemble_channel(beta: &LargeScaleMap, theta: &SmallScaleRealization) -> Result<ChannelRealization> {
    let dims = theta.0.dims;
    if beta.num_cells() != dims.cells || beta.users_per_cell() != dims.users {
        return Err(SimError::ShapeMismatch {
            expected: format!("{} cells x {} users", dims.cells, dims.users),
            found: format!("{} cells x {} users", beta.num_cells(), beta.users_per_cell()),
        });
    }
    let mut h = theta.0.clone();
    for l in 0..dims.cells {
        for j in 0..dims.cells {
            let block = h.block_mut(l, j);
            for k in 0..dims.users {
                let scale = beta.get(l, j, k).sqrt();
                block.column_mut(k).scale_mut(scale);
            }
        }
    }
    Ok(ChannelRealization(h))
}
