use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Result, SimError};
use crate::rate::GroupingResult;

/// Per-user SINR figures (linear). `gamma_inf` is `+∞` for users whose pilot
/// nobody else uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSinr {
    pub cell: usize,
    pub user: usize,
    pub gamma_mc: Option<f64>,
    pub ci95: Option<f64>,
    pub gamma_cf: Option<f64>,
    #[serde(with = "infinite_as_null")]
    pub gamma_inf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrReport {
    pub users: Vec<UserSinr>,
}

impl SinrReport {
    pub fn get(&self, cell: usize, user: usize) -> &UserSinr {
        self.users
            .iter()
            .find(|u| u.cell == cell && u.user == user)
            .expect("user in report")
    }

    /// Combines a closed-form report with a Monte Carlo one over the same users.
    pub fn merge(&self, other: &SinrReport) -> SinrReport {
        let users = self
            .users
            .iter()
            .zip(&other.users)
            .map(|(a, b)| UserSinr {
                cell: a.cell,
                user: a.user,
                gamma_mc: a.gamma_mc.or(b.gamma_mc),
                ci95: a.ci95.or(b.ci95),
                gamma_cf: a.gamma_cf.or(b.gamma_cf),
                gamma_inf: a.gamma_inf,
            })
            .collect();
        SinrReport { users }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserGroup {
    Center,
    Edge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRate {
    pub cell: usize,
    pub user: usize,
    pub sinr_cf: Option<f64>,
    pub rate_cf: Option<f64>,
    pub sinr_mc: Option<f64>,
    pub ci95: Option<f64>,
    pub rate_mc: Option<f64>,
    #[serde(with = "infinite_as_null")]
    pub gamma_inf: f64,
    pub group: Option<UserGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub prelog: f64,
    pub pilot_length: Option<usize>,
    pub users: Vec<UserRate>,
    pub per_cell_cf: Option<Vec<f64>>,
    pub per_cell_mc: Option<Vec<f64>>,
    pub total_cf: Option<f64>,
    pub total_mc: Option<f64>,
    pub grouping: Option<GroupingResult>,
    pub config: Option<SystemConfig>,
    pub seed: Option<u64>,
}

/// Achievable rate in bits/s/Hz for a given SINR and pre-log factor.
pub fn rate_from_sinr(prelog: f64, sinr: f64) -> f64 {
    prelog * (1.0 + sinr).log2()
}

fn per_cell(users: &[UserRate], cells: usize, pick: impl Fn(&UserRate) -> Option<f64>) -> Option<Vec<f64>> {
    let mut sums = vec![0.0; cells];
    for u in users {
        sums[u.cell] += pick(u)?;
    }
    Some(sums)
}

/// Turns SINRs into `prelog · log2(1 + Γ)` per user plus cell and network sums.
pub fn rate_lower_bound(sinr: &SinrReport, prelog: f64) -> Result<RateReport> {
    // A pre-log of exactly 1 (no training overhead) is accepted as a limit.
    if !(0.0..=1.0).contains(&prelog) {
        return Err(SimError::InvalidPrelog(prelog));
    }
    let users: Vec<UserRate> = sinr
        .users
        .iter()
        .map(|u| UserRate {
            cell: u.cell,
            user: u.user,
            sinr_cf: u.gamma_cf,
            rate_cf: u.gamma_cf.map(|g| rate_from_sinr(prelog, g)),
            sinr_mc: u.gamma_mc,
            ci95: u.ci95,
            rate_mc: u.gamma_mc.map(|g| rate_from_sinr(prelog, g)),
            gamma_inf: u.gamma_inf,
            group: None,
        })
        .collect();
    let cells = users.iter().map(|u| u.cell + 1).max().unwrap_or(0);
    let per_cell_cf = per_cell(&users, cells, |u| u.rate_cf);
    let per_cell_mc = per_cell(&users, cells, |u| u.rate_mc);
    Ok(RateReport {
        prelog,
        pilot_length: None,
        total_cf: per_cell_cf.as_ref().map(|v| v.iter().sum()),
        total_mc: per_cell_mc.as_ref().map(|v| v.iter().sum()),
        per_cell_cf,
        per_cell_mc,
        users,
        grouping: None,
        config: None,
        seed: None,
    })
}

impl RateReport {
    pub fn with_grouping(mut self, grouping: GroupingResult) -> Self {
        for u in &mut self.users {
            u.group = Some(if grouping.is_edge(u.cell, u.user) {
                UserGroup::Edge
            } else {
                UserGroup::Center
            });
        }
        self.grouping = Some(grouping);
        self
    }

    /// Mean closed-form (or, failing that, Monte Carlo) rate over edge users.
    pub fn mean_edge_rate(&self) -> Option<f64> {
        let rates: Vec<f64> = self
            .users
            .iter()
            .filter(|u| u.group == Some(UserGroup::Edge))
            .filter_map(|u| u.rate_cf.or(u.rate_mc))
            .collect();
        (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
    }

    /// One row per user.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "cell", "user", "group", "prelog", "sinr_cf", "rate_cf", "sinr_mc", "ci95", "rate_mc", "gamma_inf",
        ])?;
        for u in &self.users {
            w.write_record(&[
                u.cell.to_string(),
                u.user.to_string(),
                match u.group {
                    Some(UserGroup::Center) => "center".into(),
                    Some(UserGroup::Edge) => "edge".into(),
                    None => String::new(),
                },
                self.prelog.to_string(),
                opt(u.sinr_cf),
                opt(u.rate_cf),
                opt(u.sinr_mc),
                opt(u.ci95),
                opt(u.rate_mc),
                format_gain(u.gamma_inf),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Aggregates, config echo and seed; per-user rows are left to the CSV.
    pub fn json_summary(&self) -> serde_json::Value {
        serde_json::json!({
            "prelog": self.prelog,
            "pilot_length": self.pilot_length,
            "total_cf": self.total_cf,
            "total_mc": self.total_mc,
            "per_cell_cf": self.per_cell_cf,
            "per_cell_mc": self.per_cell_mc,
            "k_center": self.grouping.as_ref().map(GroupingResult::total_center),
            "k_edge": self.grouping.as_ref().map(GroupingResult::total_edge),
            "config": self.config,
            "seed": self.seed,
        })
    }
}

/// `inf` for unbounded values, shortest round-trip decimal otherwise.
pub fn format_gain(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        x.to_string()
    }
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_some(x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
