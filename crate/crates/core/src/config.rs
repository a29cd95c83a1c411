//! System configuration and its JSON file form.
//!
//! All power quantities are linear. `uplink_pilot_snr` and `downlink_snr` are
//! SNRs of a user sitting at the cell edge (distance `cell_radius`, no
//! shadowing), which is where the large-scale gain equals the map's reference
//! gain.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// How precoder columns are scaled to unit power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    /// Deterministic scaling so that `E‖b‖² = 1`; what the closed forms assume.
    Statistical,
    /// Every column has unit norm in every realization.
    PerRealization,
}

/// Which closed-form SINR expression to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SinrMode {
    /// Simplified large-array MRT/ZF forms, non-coherent terms over estimate variances.
    Paper,
    /// Exact use-and-forget bound for the implemented channel model.
    Consistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub num_cells: usize,
    pub users_per_cell: usize,
    pub num_antennas: usize,
    pub uplink_pilot_snr: f64,
    pub downlink_snr: f64,
    pub noise_power: f64,
    pub coherence_block: usize,
    pub pilot_reuse_factor: usize,
    pub grouping_threshold: f64,
    pub grouping_enabled: bool,
    pub normalization_mode: NormalizationMode,
    pub sinr_mode: SinrMode,
    /// Hexagon circumradius in meters.
    pub cell_radius: f64,
    pub path_loss_exponent: f64,
    /// Log-normal shadowing standard deviation in dB; 0 disables it.
    pub shadowing_db: f64,
    /// Exclusion radius around each BS in meters.
    pub min_distance: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            num_cells: 7,
            users_per_cell: 10,
            num_antennas: 128,
            uplink_pilot_snr: 10.0,
            downlink_snr: 10.0,
            noise_power: 1.0,
            coherence_block: 200,
            pilot_reuse_factor: 1,
            grouping_threshold: 1.0,
            grouping_enabled: false,
            normalization_mode: NormalizationMode::Statistical,
            sinr_mode: SinrMode::Consistent,
            cell_radius: 500.0,
            path_loss_exponent: 3.8,
            shadowing_db: 8.0,
            min_distance: 35.0,
        }
    }
}

impl SystemConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: SystemConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            SimError::InvalidConfig(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every field-level invariant. Pilot overhead under plain reuse is
    /// checked here as well; grouped allocations are checked when built.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.num_cells == 0 {
            return bad("num_cells must be >= 1".into());
        }
        if self.users_per_cell == 0 {
            return bad("users_per_cell must be >= 1".into());
        }
        if self.num_antennas == 0 {
            return bad("num_antennas must be >= 1".into());
        }
        if self.coherence_block == 0 {
            return bad("coherence_block must be >= 1".into());
        }
        if self.pilot_reuse_factor == 0 {
            return bad("pilot_reuse_factor must be >= 1".into());
        }
        for (name, value) in [
            ("uplink_pilot_snr", self.uplink_pilot_snr),
            ("downlink_snr", self.downlink_snr),
            ("noise_power", self.noise_power),
            ("grouping_threshold", self.grouping_threshold),
            ("cell_radius", self.cell_radius),
            ("path_loss_exponent", self.path_loss_exponent),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return bad(format!("{name} must be finite and > 0, got {value}"));
            }
        }
        if !(self.shadowing_db.is_finite() && self.shadowing_db >= 0.0) {
            return bad(format!("shadowing_db must be >= 0, got {}", self.shadowing_db));
        }
        // Users are dropped inside the hexagon, so the exclusion disc has to
        // leave some room inside the inscribed circle.
        let apothem = self.cell_radius * 30f64.to_radians().cos();
        if !(self.min_distance.is_finite() && self.min_distance >= 0.0 && self.min_distance < apothem)
        {
            return bad(format!(
                "min_distance must lie in [0, {apothem:.3}), got {}",
                self.min_distance
            ));
        }
        if !self.grouping_enabled {
            let pilot_length = self.pilot_reuse_factor * self.users_per_cell;
            if pilot_length >= self.coherence_block {
                return Err(SimError::PilotOverheadExceedsCoherence {
                    pilot_length,
                    coherence_block: self.coherence_block,
                });
            }
        }
        Ok(())
    }

    /// Pilot overhead fraction `δ = f·K / T_c` of plain reuse.
    pub fn prelog_loss(&self) -> f64 {
        (self.pilot_reuse_factor * self.users_per_cell) as f64 / self.coherence_block as f64
    }

    pub fn noise_to_downlink(&self) -> f64 {
        self.noise_power / self.downlink_snr
    }
}
