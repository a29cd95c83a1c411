use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::scenario::LargeScaleMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGroups {
    /// Midpoint `(max + min) / 2` of the cell's serving gains.
    pub threshold_midpoint: f64,
    /// User indices, ascending.
    pub center: Vec<usize>,
    pub edge: Vec<usize>,
}

impl CellGroups {
    pub fn k_center(&self) -> usize {
        self.center.len()
    }

    pub fn k_edge(&self) -> usize {
        self.edge.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingResult {
    pub cells: Vec<CellGroups>,
}

impl GroupingResult {
    pub fn total_center(&self) -> usize {
        self.cells.iter().map(CellGroups::k_center).sum()
    }

    pub fn total_edge(&self) -> usize {
        self.cells.iter().map(CellGroups::k_edge).sum()
    }

    pub fn is_edge(&self, cell: usize, user: usize) -> bool {
        self.cells[cell].edge.contains(&user)
    }
}

/// Splits one cell's users by serving gain: center iff `gain ≥ τ·μ`.
pub fn group_cell(gains: &[f64], threshold: f64) -> CellGroups {
    let max = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = gains.iter().copied().fold(f64::INFINITY, f64::min);
    let mu = (max + min) / 2.0;
    let (center, edge) = (0..gains.len()).partition(|&k| gains[k] >= threshold * mu);
    CellGroups {
        threshold_midpoint: mu,
        center,
        edge,
    }
}

/// Center/edge split of every cell using the serving gains `beta[i][i][k]`.
pub fn group_users(beta: &LargeScaleMap, config: &SystemConfig) -> GroupingResult {
    GroupingResult {
        cells: (0..beta.num_cells())
            .map(|i| group_cell(&beta.serving_gains(i), config.grouping_threshold))
            .collect(),
    }
}
