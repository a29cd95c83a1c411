//! Python bindings for `pcsim`.
//!
//! Reports cross the boundary as plain dicts and lists built from their JSON
//! form, so Python callers never hold Rust-owned report objects.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyFloat, PyInt, PyString};

use pcsim::estimation::{allocate_pilots, estimate_variance, PilotAssignment};
use pcsim::experiments::{self, RateMode, SweepSpec, SweptParameter};
use pcsim::rate::{self, GroupingResult};
use pcsim::{Precoder, SimError, SinrMode, SystemConfig};

create_exception!(pcsim_py, SimulationError, PyException);
create_exception!(pcsim_py, ConfigError, SimulationError);

fn to_py(e: SimError) -> PyErr {
    if e.is_config_error() {
        ConfigError::new_err(e.to_string())
    } else {
        SimulationError::new_err(e.to_string())
    }
}

fn from_json<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| SimulationError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_precoder(name: &str) -> PyResult<Precoder> {
    match name {
        "mrt" => Ok(Precoder::Mrt),
        "zf" => Ok(Precoder::Zf),
        other => Err(ConfigError::new_err(format!("unknown precoder {other:?} (mrt | zf)"))),
    }
}

/// System configuration. Keyword arguments override the defaults and use the
/// JSON field names, e.g. `Config(num_cells=7, pilot_reuse_factor=3)`.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: SystemConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut fields = serde_json::Map::new();
        for (key, value) in kwargs.into_iter().flat_map(|d| d.iter()) {
            let key: String = key.extract()?;
            let json = if value.is_instance_of::<PyBool>() {
                serde_json::Value::from(value.extract::<bool>()?)
            } else if value.is_instance_of::<PyInt>() {
                serde_json::Value::from(value.extract::<i64>()?)
            } else if value.is_instance_of::<PyFloat>() {
                serde_json::Value::from(value.extract::<f64>()?)
            } else if value.is_instance_of::<PyString>() {
                serde_json::Value::from(value.extract::<String>()?)
            } else {
                return Err(ConfigError::new_err(format!("unsupported value for {key}")));
            };
            fields.insert(key, json);
        }
        let text = serde_json::Value::Object(fields).to_string();
        Ok(PyConfig {
            inner: SystemConfig::from_json_str(&text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyConfig {
            inner: SystemConfig::from_json_str(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Ok(PyConfig {
            inner: SystemConfig::from_file(path).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        from_json(py, &self.inner)
    }

    /// Copy with some fields replaced.
    #[pyo3(signature = (**kwargs))]
    fn replace(&self, py: Python<'_>, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let merged = from_json(py, &self.inner)?.cast_into::<PyDict>()?;
        if let Some(d) = kwargs {
            merged.update(d.as_mapping())?;
        }
        Self::new(Some(&merged))
    }

    #[getter]
    fn num_cells(&self) -> usize {
        self.inner.num_cells
    }

    #[getter]
    fn users_per_cell(&self) -> usize {
        self.inner.users_per_cell
    }

    #[getter]
    fn num_antennas(&self) -> usize {
        self.inner.num_antennas
    }

    #[getter]
    fn pilot_reuse_factor(&self) -> usize {
        self.inner.pilot_reuse_factor
    }

    #[getter]
    fn grouping_enabled(&self) -> bool {
        self.inner.grouping_enabled
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(num_cells={}, users_per_cell={}, num_antennas={}, pilot_reuse_factor={})",
            self.inner.num_cells, self.inner.users_per_cell, self.inner.num_antennas, self.inner.pilot_reuse_factor
        )
    }
}

/// One user drop: geometry and large-scale gains.
#[pyclass(name = "Scenario")]
struct PyScenario {
    inner: pcsim::Scenario,
    config: SystemConfig,
}

impl PyScenario {
    fn pilots(&self, config: &SystemConfig) -> PyResult<(PilotAssignment, GroupingResult)> {
        let grouping = rate::group_users(&self.inner.beta, config);
        let pa = allocate_pilots(config, config.grouping_enabled.then_some(&grouping)).map_err(to_py)?;
        Ok((pa, grouping))
    }

    fn config_or_own(&self, config: Option<PyRef<'_, PyConfig>>) -> SystemConfig {
        config.map_or_else(|| self.config.clone(), |c| c.inner.clone())
    }
}

#[pymethods]
impl PyScenario {
    #[new]
    #[pyo3(signature = (config, seed = 0))]
    fn new(config: PyRef<'_, PyConfig>, seed: u64) -> PyResult<Self> {
        Ok(PyScenario {
            inner: pcsim::Scenario::generate(&config.inner, seed).map_err(to_py)?,
            config: config.inner.clone(),
        })
    }

    /// `beta[l][j][k]`: gain from base station `l` to user `k` of cell `j`.
    fn beta(&self) -> Vec<Vec<Vec<f64>>> {
        let b = &self.inner.beta;
        (0..b.num_cells())
            .map(|l| {
                (0..b.num_cells())
                    .map(|j| (0..b.users_per_cell()).map(|k| b.get(l, j, k)).collect())
                    .collect()
            })
            .collect()
    }

    fn bs_positions(&self) -> Vec<[f64; 2]> {
        self.inner.geometry.bs_positions.clone()
    }

    fn user_positions(&self) -> Vec<Vec<[f64; 2]>> {
        self.inner.geometry.user_positions.clone()
    }

    /// Estimate variances `q[l][j][k]`, indexed like `beta`.
    #[pyo3(signature = (config = None))]
    fn estimate_variance(&self, config: Option<PyRef<'_, PyConfig>>) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let config = self.config_or_own(config);
        let (pa, _) = self.pilots(&config)?;
        let q = estimate_variance(&self.inner.beta, &pa, &config);
        Ok((0..q.num_cells())
            .map(|l| {
                (0..q.num_cells())
                    .map(|j| (0..q.users_per_cell()).map(|k| q.get(l, j, k)).collect())
                    .collect()
            })
            .collect())
    }

    /// Pilot-contamination SINR ceiling per `[cell][user]`; `inf` when a
    /// user's pilot is not reused.
    #[pyo3(signature = (config = None))]
    fn ceiling(&self, config: Option<PyRef<'_, PyConfig>>) -> PyResult<Vec<Vec<f64>>> {
        let config = self.config_or_own(config);
        let (pa, _) = self.pilots(&config)?;
        let q = estimate_variance(&self.inner.beta, &pa, &config);
        Ok(rate::asymptotic_ceiling(&q, &pa))
    }

    #[pyo3(signature = (config = None))]
    fn group_users<'py>(&self, py: Python<'py>, config: Option<PyRef<'_, PyConfig>>) -> PyResult<Bound<'py, PyAny>> {
        from_json(py, &rate::group_users(&self.inner.beta, &self.config_or_own(config)))
    }

    /// Closed-form rates; `mode` is `"consistent"` or `"paper"`.
    #[pyo3(signature = (precoder = "mrt", mode = "consistent", config = None))]
    fn closed_form<'py>(
        &self,
        py: Python<'py>,
        precoder: &str,
        mode: &str,
        config: Option<PyRef<'_, PyConfig>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let mut config = self.config_or_own(config);
        config.sinr_mode = match mode {
            "consistent" => SinrMode::Consistent,
            "paper" => SinrMode::Paper,
            other => return Err(ConfigError::new_err(format!("unknown mode {other:?} (consistent | paper)"))),
        };
        let report = rate::evaluate_closed_form(&self.inner.beta, &config, parse_precoder(precoder)?).map_err(to_py)?;
        from_json(py, &report)
    }

    /// Monte Carlo rates over `trials` channel realizations.
    #[pyo3(signature = (precoder = "mrt", trials = 1000, seed = 0, config = None))]
    fn monte_carlo<'py>(
        &self,
        py: Python<'py>,
        precoder: &str,
        trials: usize,
        seed: u64,
        config: Option<PyRef<'_, PyConfig>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let config = self.config_or_own(config);
        let kind = parse_precoder(precoder)?;
        let (pa, grouping) = self.pilots(&config)?;
        let beta = &self.inner.beta;
        let report = py
            .detach(|| {
                let sinr = rate::sinr_monte_carlo(beta, &pa, &config, kind, trials, seed)?;
                let mut report =
                    rate::rate_lower_bound(&sinr, pa.prelog(config.coherence_block))?.with_grouping(grouping);
                report.pilot_length = Some(pa.pilot_length());
                report.seed = Some(seed);
                Ok::<_, SimError>(report)
            })
            .map_err(to_py)?;
        from_json(py, &report)
    }
}

/// Runs a sweep and returns the CSV text; also writes it when `out` is given.
#[pyfunction]
#[pyo3(signature = (
    param, values, config = None, precoders = vec!["mrt".to_string(), "zf".to_string()],
    modes = vec!["cf_consistent".to_string()], trials = 500, drops = 10, seed = 0, workers = None, out = None
))]
#[allow(clippy::too_many_arguments)]
fn run_sweep(
    py: Python<'_>,
    param: &str,
    values: Vec<usize>,
    config: Option<PyRef<'_, PyConfig>>,
    precoders: Vec<String>,
    modes: Vec<String>,
    trials: usize,
    drops: usize,
    seed: u64,
    workers: Option<usize>,
    out: Option<String>,
) -> PyResult<String> {
    let param = match param {
        "antennas" => SweptParameter::Antennas,
        "pilot_reuse" | "pilot-reuse" => SweptParameter::PilotReuse,
        "cells" => SweptParameter::Cells,
        other => return Err(ConfigError::new_err(format!("unknown sweep parameter {other:?}"))),
    };
    let mut spec = SweepSpec::new(param, values, config.map_or_else(SystemConfig::default, |c| c.inner.clone()));
    spec.precoders = precoders.iter().map(|p| parse_precoder(p)).collect::<PyResult<_>>()?;
    spec.modes = modes
        .iter()
        .map(|m| match m.as_str() {
            "cf_consistent" => Ok(RateMode::CfConsistent),
            "cf_paper" => Ok(RateMode::CfPaper),
            "mc" => Ok(RateMode::Mc),
            other => Err(ConfigError::new_err(format!("unknown mode {other:?}"))),
        })
        .collect::<PyResult<_>>()?;
    spec.n_trials = trials;
    spec.n_drops = drops;
    spec.seed = seed;
    let result = py
        .detach(|| match workers {
            Some(n) => experiments::run_sweep_with_workers(&spec, n),
            None => experiments::run_sweep(&spec),
        })
        .map_err(to_py)?;
    let mut buf = Vec::new();
    experiments::write_csv(&result, &mut buf).map_err(to_py)?;
    if let Some(path) = out {
        std::fs::write(path, &buf).map_err(|e| SimulationError::new_err(e.to_string()))?;
    }
    String::from_utf8(buf).map_err(|e| SimulationError::new_err(e.to_string()))
}

/// `prelog · log2(1 + sinr)`.
#[pyfunction]
fn rate_from_sinr(prelog: f64, sinr: f64) -> f64 {
    rate::rate_from_sinr(prelog, sinr)
}

#[pymodule]
fn pcsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(rate_from_sinr, m)?)?;
    m.add("SimulationError", m.py().get_type::<SimulationError>())?;
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    Ok(())
}
