//! Python bindings for the latency laboratory.

use latlab_core::early::{self, EarlyDetectModel};
use latlab_core::fbl::{self, ChannelParams, PowerConstraintKind};
use latlab_core::harness::{self, Command, Format, Overrides};
use latlab_core::multihop::{self, ErrorBudget};
use latlab_core::ofdm::{self, OfdmConfig, PrecoderKind};
use latlab_core::seqdetect::{self, Scenario};
use latlab_core::{special, LatError};
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(latlab, InfeasibleError, PyException);

fn py_err(e: LatError) -> PyErr {
    match e {
        LatError::Infeasible(_) => InfeasibleError::new_err(e.to_string()),
        LatError::Domain(_) | LatError::Config(_) | LatError::Unsupported(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn power_kind(name: &str) -> PyResult<PowerConstraintKind> {
    match name {
        "equal" | "maximal" => Ok(PowerConstraintKind::EqualOrMaximal),
        "average" => Ok(PowerConstraintKind::Average),
        other => Err(PyValueError::new_err(format!("unknown power constraint {other:?}"))),
    }
}

fn command(name: &str) -> PyResult<Command> {
    name.parse().map_err(|e: harness::HarnessError| PyValueError::new_err(e.to_string()))
}

/// Minimal latency of `k` bits.
#[pyclass(frozen, get_all, name = "MinLatency")]
struct PyMinLatency {
    blocklength: f64,
    symbols: u64,
    latency: f64,
    latency_symbols: f64,
}

impl From<fbl::MinLatency> for PyMinLatency {
    fn from(m: fbl::MinLatency) -> Self {
        Self { blocklength: m.blocklength, symbols: m.symbols, latency: m.latency, latency_symbols: m.latency_symbols }
    }
}

#[pymethods]
impl PyMinLatency {
    fn __repr__(&self) -> String {
        format!(
            "MinLatency(blocklength={}, symbols={}, latency={:e})",
            self.blocklength, self.symbols, self.latency
        )
    }
}

/// Aggregate of a Monte-Carlo campaign.
#[pyclass(frozen, get_all, name = "LatencyReport")]
struct PyLatencyReport {
    trials: u64,
    errors: u64,
    error_rate: f64,
    confidence_halfwidth: f64,
    mean_stop_fraction: f64,
    stop_fraction_halfwidth: f64,
    stop_histogram: Vec<u64>,
    early_stops: u64,
    error_bound: Option<f64>,
    min_tau_fraction: Option<f64>,
}

impl From<seqdetect::LatencyReport> for PyLatencyReport {
    fn from(r: seqdetect::LatencyReport) -> Self {
        Self {
            trials: r.trials,
            errors: r.errors,
            error_rate: r.error_rate,
            confidence_halfwidth: r.confidence_halfwidth,
            mean_stop_fraction: r.mean_stop_fraction,
            stop_fraction_halfwidth: r.stop_fraction_halfwidth,
            stop_histogram: r.stop_histogram,
            early_stops: r.early_stops,
            error_bound: r.error_bound,
            min_tau_fraction: r.min_tau_fraction,
        }
    }
}

#[pymethods]
impl PyLatencyReport {
    fn __repr__(&self) -> String {
        format!(
            "LatencyReport(trials={}, error_rate={:e}, mean_stop_fraction={:.4})",
            self.trials, self.error_rate, self.mean_stop_fraction
        )
    }
}

/// Optimal early-detection model of a length-`n` code.
#[pyclass(frozen, name = "EarlyDetectModel")]
struct PyEarlyDetectModel(EarlyDetectModel);

#[pymethods]
impl PyEarlyDetectModel {
    #[new]
    #[pyo3(signature = (n, rate, eps, symbol_duration = 1.0, points = 512))]
    fn new(n: u64, rate: f64, eps: f64, symbol_duration: f64, points: usize) -> PyResult<Self> {
        EarlyDetectModel::from_target(n, rate, eps, symbol_duration, points).map(Self).map_err(py_err)
    }

    /// `E[tau]` in units of the symbol duration scale used at construction.
    fn average_latency(&self) -> PyResult<f64> {
        early::average_latency(&self.0).map_err(py_err)
    }

    fn error_at(&self, tau: f64) -> f64 {
        self.0.error_at(tau)
    }

    fn density_at(&self, tau: f64) -> f64 {
        self.0.density_at(tau)
    }

    fn cdf(&self, tau: f64) -> f64 {
        early::stopping_cdf(&self.0, tau)
    }
}

/// Unitary pre-coder over `n` sub-carriers.
#[pyclass(frozen, name = "Precoder")]
struct PyPrecoder(ofdm::Precoder);

#[pymethods]
impl PyPrecoder {
    /// `kind` is one of identity, hadamard, dft, random_rotation.
    #[new]
    #[pyo3(signature = (kind, n, seed = 0))]
    fn new(kind: &str, n: usize, seed: u64) -> PyResult<Self> {
        let kind = match kind {
            "identity" => PrecoderKind::Identity,
            "hadamard" => PrecoderKind::HadamardSylvester,
            "dft" => PrecoderKind::Dft,
            "random_rotation" => PrecoderKind::RandomRotation { seed },
            other => return Err(PyValueError::new_err(format!("unknown precoder {other:?}"))),
        };
        ofdm::Precoder::new(kind, n).map(Self).map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label()
    }

    fn unitarity_error(&self) -> f64 {
        self.0.unitarity_error()
    }

    fn apply(&self, x: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        self.0.apply(&x).map_err(py_err)
    }

    /// Closed-form `d^2(t)` between two sub-carrier vectors; returns `(t / T, d^2)`.
    #[pyo3(signature = (x, x2, symbol_duration = 1.0, time_grid = 1024))]
    fn distance_curve(
        &self,
        x: Vec<Complex64>,
        x2: Vec<Complex64>,
        symbol_duration: f64,
        time_grid: usize,
    ) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let cfg = OfdmConfig { n_subcarriers: self.0.n(), symbol_duration, time_grid };
        let c = ofdm::distance_curve(&x, &x2, &cfg, &self.0).map_err(py_err)?;
        Ok((c.abscissae, c.values))
    }

    /// Largest gap between `d^2(t)` and the chord `d^2(T) t / T`, relative to `d^2(T)`.
    #[pyo3(signature = (x, x2, time_grid = 1024))]
    fn linearity_deviation(&self, x: Vec<Complex64>, x2: Vec<Complex64>, time_grid: usize) -> PyResult<f64> {
        let cfg = OfdmConfig { n_subcarriers: self.0.n(), symbol_duration: 1.0, time_grid };
        let c = ofdm::distance_curve(&x, &x2, &cfg, &self.0).map_err(py_err)?;
        ofdm::linearity_deviation(&c).map_err(py_err)
    }
}

/// Monte-Carlo scenario, built from its JSON description.
#[pyclass(frozen, name = "Scenario")]
struct PyScenario(Scenario);

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(Self).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("scenario serializes")
    }

    #[pyo3(signature = (trials, seed = 0, workers = 1))]
    fn run(&self, py: Python<'_>, trials: u64, seed: u64, workers: usize) -> PyResult<PyLatencyReport> {
        py.detach(|| seqdetect::run_campaign(&self.0, trials, seed, workers))
            .map(PyLatencyReport::from)
            .map_err(py_err)
    }
}

#[pyfunction]
fn q_function(x: f64) -> f64 {
    special::q_function(x)
}

#[pyfunction]
fn q_inv(p: f64) -> PyResult<f64> {
    special::q_inv(p).map_err(py_err)
}

#[pyfunction]
fn capacity(rho: f64) -> PyResult<f64> {
    fbl::capacity(rho).map_err(py_err)
}

#[pyfunction]
fn dispersion(rho: f64) -> PyResult<f64> {
    fbl::dispersion(rho).map_err(py_err)
}

#[pyfunction]
fn achievable_rate(n: u64, eps: f64, rho: f64) -> PyResult<f64> {
    fbl::achievable_rate(n, eps, rho).map_err(py_err)
}

#[pyfunction]
fn block_error_rate(rho: f64, rate: f64, n: u64) -> PyResult<f64> {
    fbl::block_error_rate(rho, rate, n).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (k, power, symbol_duration, eps, constraint = "equal"))]
fn min_latency(k: u64, power: f64, symbol_duration: f64, eps: f64, constraint: &str) -> PyResult<PyMinLatency> {
    fbl::min_latency(k, power, symbol_duration, eps, power_kind(constraint)?).map(PyMinLatency::from).map_err(py_err)
}

/// Minimal latency at per-symbol SNR `rho = P T` and bandwidth `w`, with `T = 1 / (2w)`.
#[pyfunction]
#[pyo3(signature = (k, rho, bandwidth, eps, constraint = "equal"))]
fn min_latency_at_bandwidth(k: u64, rho: f64, bandwidth: f64, eps: f64, constraint: &str) -> PyResult<PyMinLatency> {
    let t = ChannelParams::with_bandwidth(1.0, bandwidth).map_err(py_err)?.symbol_duration;
    let ch = ChannelParams::from_snr(rho, t).map_err(py_err)?;
    fbl::min_latency(k, ch.power, ch.symbol_duration, eps, power_kind(constraint)?)
        .map(PyMinLatency::from)
        .map_err(py_err)
}

#[pyfunction]
fn checkpoint_latency(checkpoints: Vec<f64>, errors: Vec<f64>) -> PyResult<f64> {
    early::checkpoint_latency_from_errors(&checkpoints, &errors).map_err(py_err)
}

#[pyfunction]
fn af_overall_snr(power: f64, hops: u32) -> PyResult<f64> {
    multihop::af_overall_snr(power, hops).map_err(py_err)
}

/// Total latency (in symbol durations) of `q` parts over `h` DF hops.
#[pyfunction]
#[pyo3(signature = (k, power, eps, hops, parts, naive_budget = false))]
fn split_latency(k: u64, power: f64, eps: f64, hops: u32, parts: u32, naive_budget: bool) -> PyResult<f64> {
    let budget = if naive_budget { ErrorBudget::Naive } else { ErrorBudget::UnionBound };
    multihop::split_latency(k, power, 1.0, eps, hops, parts, budget).map(|p| p.total_latency).map_err(py_err)
}

/// `(strategy, q, latency_symbols)` ranked by latency; `None` marks an infeasible cell.
#[pyfunction]
fn compare_strategies(k: u64, power: f64, eps: f64, hops: u32) -> PyResult<Vec<(String, u32, Option<f64>)>> {
    let rows = multihop::compare_strategies(k, power, 1.0, eps, hops, ErrorBudget::UnionBound).map_err(py_err)?;
    Ok(rows.into_iter().map(|r| (r.strategy, r.q, r.latency_symbols)).collect())
}

/// Runs a CLI command on a JSON config and returns the rendered payload.
#[pyfunction]
#[pyo3(signature = (command_name, config, seed = None, trials = None, workers = None, format = "csv"))]
fn run_command(
    py: Python<'_>,
    command_name: &str,
    config: &str,
    seed: Option<u64>,
    trials: Option<u64>,
    workers: Option<usize>,
    format: &str,
) -> PyResult<String> {
    let cmd = command(command_name)?;
    let format = match format {
        "csv" => Format::Csv,
        "json" => Format::Json,
        other => return Err(PyValueError::new_err(format!("unknown format {other:?}"))),
    };
    let overrides = Overrides { seed, trials, workers, out: None, format: Some(format) };
    let bytes = py
        .detach(|| harness::run(cmd, config, &overrides).and_then(|env| env.render()))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pyfunction]
fn example_config(command_name: &str) -> PyResult<String> {
    Ok(harness::example_config(command(command_name)?).to_string())
}

#[pymodule]
fn latlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add_class::<PyMinLatency>()?;
    m.add_class::<PyLatencyReport>()?;
    m.add_class::<PyEarlyDetectModel>()?;
    m.add_class::<PyPrecoder>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(q_function, m)?)?;
    m.add_function(wrap_pyfunction!(q_inv, m)?)?;
    m.add_function(wrap_pyfunction!(capacity, m)?)?;
    m.add_function(wrap_pyfunction!(dispersion, m)?)?;
    m.add_function(wrap_pyfunction!(achievable_rate, m)?)?;
    m.add_function(wrap_pyfunction!(block_error_rate, m)?)?;
    m.add_function(wrap_pyfunction!(min_latency, m)?)?;
    m.add_function(wrap_pyfunction!(min_latency_at_bandwidth, m)?)?;
    m.add_function(wrap_pyfunction!(checkpoint_latency, m)?)?;
    m.add_function(wrap_pyfunction!(af_overall_snr, m)?)?;
    m.add_function(wrap_pyfunction!(split_latency, m)?)?;
    m.add_function(wrap_pyfunction!(compare_strategies, m)?)?;
    m.add_function(wrap_pyfunction!(run_command, m)?)?;
    m.add_function(wrap_pyfunction!(example_config, m)?)?;
    Ok(())
}
