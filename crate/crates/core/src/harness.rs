//! Reproduction driver behind the `latlab` binary.
//!
//! Each command reads one JSON document
//! `{"seed": .., "trials": .., "workers": .., "format": .., "out": .., "params": {..}}`
//! where every field is optional and `params` defaults to the reference setup
//! of that command. Command-line flags override the document; the effective
//! configuration is echoed into every [`ResultEnvelope`].

use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::early::{average_latency, checkpoint_latency, EarlyDetectModel};
use crate::error::LatError;
use crate::fbl::{min_latency_with_limit, PowerConstraintKind};
use crate::multihop::{compare_strategies, split_latency, two_hop_campaign, ErrorBudget};
use crate::ofdm::{distance_curve, linearity_deviation, qpsk_pair_family, OfdmConfig, OfdmDetector, Precoder, PrecoderKind};
use crate::seqdetect::{
    calibrate_crc_floor, gen_codebook, run_campaign, snr_for_uncoded_block_error, wald_stop_lower_bounds,
    derive_seed, Codebook, CodebookSpec, CrcCode, CrcWidth, DetectorConfig, DetectorKind, Modulation, Scenario, ThresholdMode,
};

pub const TOOL: &str = "latlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const DEFAULT_TRIALS: u64 = 10_000;
const DEFAULT_N_MAX: f64 = 1e8;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Lab(#[from] LatError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl HarnessError {
    /// 2 for an infeasible scenario, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Lab(LatError::Infeasible(_)) => 2,
            _ => 1,
        }
    }
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Bounds,
    EarlyLatency,
    Msprt,
    Crc,
    Ofdm,
    Multihop,
}

impl Command {
    pub const ALL: [Command; 6] =
        [Self::Bounds, Self::EarlyLatency, Self::Msprt, Self::Crc, Self::Ofdm, Self::Multihop];

    pub fn name(self) -> &'static str {
        match self {
            Self::Bounds => "bounds",
            Self::EarlyLatency => "early-latency",
            Self::Msprt => "msprt",
            Self::Crc => "crc",
            Self::Ofdm => "ofdm",
            Self::Multihop => "multihop",
        }
    }
}

impl FromStr for Command {
    type Err = HarnessError;

    fn from_str(s: &str) -> HarnessResult<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| config_err(format!("unknown command {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = HarnessError;

    fn from_str(s: &str) -> HarnessResult<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(config_err(format!("unknown format {s:?} (csv or json)"))),
        }
    }
}

/// Command-line values that replace fields of the config document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

fn default_trials() -> u64 {
    DEFAULT_TRIALS
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig<P> {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub params: P,
}

impl<P> RunConfig<P> {
    fn apply(&mut self, o: &Overrides) -> HarnessResult<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(t) = o.trials {
            self.trials = t;
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(p) = &o.out {
            self.out = Some(p.clone());
        }
        if let Some(f) = o.format {
            self.format = f;
        }
        if self.trials == 0 {
            return Err(config_err("trials must be >= 1"));
        }
        if self.workers == 0 {
            return Err(config_err("workers must be >= 1"));
        }
        Ok(())
    }
}

/// Output of one run. `rows` follow `columns`; `null` marks an empty cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEnvelope {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub seed: u64,
    pub trials: u64,
    pub workers: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
    /// Effective configuration after flag overrides.
    pub config: Value,
    /// Seconds since the Unix epoch; not part of the payload.
    pub timestamp: u64,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    /// Rows whose `status` column reports an infeasible cell.
    pub infeasible_rows: usize,
}

impl ResultEnvelope {
    /// True when every row is an infeasible cell.
    pub fn all_infeasible(&self) -> bool {
        !self.rows.is_empty() && self.infeasible_rows == self.rows.len()
    }

    /// Column `name` of every row.
    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    /// Header and rows only, the part that must be identical across reruns.
    pub fn payload_csv(&self) -> HarnessResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| HarnessError::Io(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(cell_text)).map_err(io)?;
        }
        w.into_inner().map_err(|e| HarnessError::Io(e.to_string()))
    }

    /// CSV with a `#` reproducibility header (tool, seed, config echo).
    pub fn to_csv(&self) -> HarnessResult<Vec<u8>> {
        let mut out = Vec::new();
        let header = format!(
            "# {} {} {} seed={} trials={} workers={} timestamp={}\n# config: {}\n",
            self.tool, self.version, self.command.name(), self.seed, self.trials, self.workers, self.timestamp, self.config
        );
        out.extend_from_slice(header.as_bytes());
        out.extend(self.payload_csv()?);
        Ok(out)
    }

    pub fn to_json(&self) -> HarnessResult<Vec<u8>> {
        let mut v = serde_json::to_vec_pretty(self).map_err(|e| HarnessError::Io(e.to_string()))?;
        v.push(b'\n');
        Ok(v)
    }

    pub fn render(&self) -> HarnessResult<Vec<u8>> {
        match self.format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    /// Writes to `out` when set, otherwise to `fallback`.
    pub fn emit(&self, fallback: &mut dyn Write) -> HarnessResult<()> {
        let bytes = self.render()?;
        match &self.out {
            Some(path) => std::fs::write(path, bytes).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display()))),
            None => fallback.write_all(&bytes).map_err(|e| HarnessError::Io(e.to_string())),
        }
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Rows collected by a command, with the status of each cell.
struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
    infeasible: usize,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), infeasible: 0 }
    }

    fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Status cell for a per-cell result; infeasible cells are counted, other
/// library errors abort the run.
fn cell_status<T>(table: &mut Table, r: &crate::Result<T>) -> HarnessResult<Value> {
    match r {
        Ok(_) => Ok(json!("ok")),
        Err(LatError::Infeasible(m)) => {
            table.infeasible += 1;
            Ok(json!(format!("infeasible: {m}")))
        }
        Err(e) => Err(HarnessError::Lab(e.clone())),
    }
}

fn db_to_linear(db: f64) -> HarnessResult<f64> {
    if !db.is_finite() {
        return Err(config_err(format!("SNR {db} dB is not finite")));
    }
    Ok(10f64.powf(db / 10.0))
}

fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn check_eps(eps: f64) -> HarnessResult<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(config_err(format!("eps must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

fn nonempty<T>(name: &str, v: &[T]) -> HarnessResult<()> {
    if v.is_empty() {
        return Err(config_err(format!("{name} must not be empty")));
    }
    Ok(())
}

/// Parses `text`, applies `overrides` and runs `command`.
pub fn run(command: Command, text: &str, overrides: &Overrides) -> HarnessResult<ResultEnvelope> {
    match command {
        Command::Bounds => run_with(command, text, overrides, bounds),
        Command::EarlyLatency => run_with(command, text, overrides, early_latency),
        Command::Msprt => run_with(command, text, overrides, msprt),
        Command::Crc => run_with(command, text, overrides, crc),
        Command::Ofdm => run_with(command, text, overrides, ofdm),
        Command::Multihop => run_with(command, text, overrides, multihop),
    }
}

fn run_with<P, F>(command: Command, text: &str, overrides: &Overrides, body: F) -> HarnessResult<ResultEnvelope>
where
    P: DeserializeOwned + Serialize + Default,
    F: Fn(&RunConfig<P>) -> HarnessResult<Table>,
{
    let mut cfg: RunConfig<P> = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
    cfg.apply(overrides)?;
    let echo = serde_json::to_value(&cfg).map_err(|e| config_err(e.to_string()))?;
    let table = body(&cfg)?;
    Ok(ResultEnvelope {
        tool: TOOL.into(),
        version: VERSION.into(),
        command,
        seed: cfg.seed,
        trials: cfg.trials,
        workers: cfg.workers,
        format: cfg.format,
        out: cfg.out.clone(),
        config: echo,
        timestamp: timestamp(),
        columns: table.columns,
        rows: table.rows,
        infeasible_rows: table.infeasible,
    })
}

/// Minimal-latency sweep over `k` and SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsParams {
    pub k: Vec<u64>,
    pub snr_db: Vec<f64>,
    /// Extra linear SNR points `P T`, appended after `snr_db`.
    pub rho: Vec<f64>,
    pub eps: f64,
    /// Symbol duration `T` in seconds; replaced by `1 / 2W` when `bandwidth` is set.
    pub symbol_duration: f64,
    pub bandwidth: Option<f64>,
    pub power_constraint: PowerConstraintKind,
    pub n_max: f64,
}

impl Default for BoundsParams {
    fn default() -> Self {
        Self {
            k: vec![1, 10, 50, 103, 200, 500, 1000, 2000, 5000, 10_000],
            snr_db: vec![-10.0, 0.0, 10.0],
            rho: vec![2.5],
            eps: 1e-7,
            symbol_duration: 1.0,
            bandwidth: None,
            power_constraint: PowerConstraintKind::EqualOrMaximal,
            n_max: DEFAULT_N_MAX,
        }
    }
}

fn bounds(cfg: &RunConfig<BoundsParams>) -> HarnessResult<Table> {
    let p = &cfg.params;
    check_eps(p.eps)?;
    nonempty("k", &p.k)?;
    let t = match p.bandwidth {
        Some(w) if w > 0.0 && w.is_finite() => 1.0 / (2.0 * w),
        Some(w) => return Err(config_err(format!("bandwidth must be > 0, got {w}"))),
        None if p.symbol_duration > 0.0 && p.symbol_duration.is_finite() => p.symbol_duration,
        None => return Err(config_err("symbol_duration must be > 0")),
    };
    let mut rhos = p.snr_db.iter().map(|&d| db_to_linear(d)).collect::<HarnessResult<Vec<_>>>()?;
    rhos.extend(p.rho.iter().copied());
    nonempty("snr_db/rho", &rhos)?;
    if rhos.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(config_err("SNR values must be positive"));
    }
    let mut table = Table::new(&["k", "snr_db", "n", "latency", "rho", "eps", "blocklength", "status"]);
    for &rho in &rhos {
        for &k in &p.k {
            if k == 0 {
                return Err(config_err("k must be >= 1"));
            }
            let r = min_latency_with_limit(k, rho / t, t, p.eps, p.power_constraint, p.n_max);
            let status = cell_status(&mut table, &r)?;
            let (n, latency, real) = match &r {
                Ok(m) => (json!(m.symbols), json!(m.latency_symbols), json!(m.blocklength)),
                Err(_) => (Value::Null, Value::Null, Value::Null),
            };
            table.push(vec![json!(k), json!(linear_to_db(rho)), n, latency, json!(rho), json!(p.eps), real, status]);
        }
    }
    Ok(table)
}

/// Early-detection latency over `(n, R)` with power solved for `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EarlyLatencyParams {
    pub n: Vec<u64>,
    pub rate: Vec<f64>,
    pub eps: f64,
    pub grid_points: usize,
    /// Optional checkpoint fractions of `T` (ending at 1) for the discrete model.
    pub checkpoints: Option<Vec<f64>>,
}

impl Default for EarlyLatencyParams {
    fn default() -> Self {
        Self {
            n: vec![150, 300, 500, 1000, 2000, 5000],
            rate: vec![0.5, 0.95],
            eps: 1e-9,
            grid_points: 64,
            checkpoints: None,
        }
    }
}

fn early_latency(cfg: &RunConfig<EarlyLatencyParams>) -> HarnessResult<Table> {
    let p = &cfg.params;
    check_eps(p.eps)?;
    nonempty("n", &p.n)?;
    nonempty("rate", &p.rate)?;
    let mut table = Table::new(&["n", "rate", "eps", "e_tau_over_t", "rho", "checkpoint_latency", "status"]);
    for &rate in &p.rate {
        for &n in &p.n {
            let r = EarlyDetectModel::from_target(n, rate, p.eps, 1.0, p.grid_points).and_then(|m| {
                let e = average_latency(&m)?;
                let c = match &p.checkpoints {
                    Some(cp) => Some(checkpoint_latency(cp, m.channel.power, rate, n)?),
                    None => None,
                };
                Ok((m.channel.rho(), e, c))
            });
            let status = cell_status(&mut table, &r)?;
            let (rho, e, c) = match r {
                Ok((rho, e, c)) => (json!(rho), json!(e), json!(c)),
                Err(_) => (Value::Null, Value::Null, Value::Null),
            };
            table.push(vec![json!(n), json!(rate), json!(p.eps), e, rho, c, status]);
        }
    }
    Ok(table)
}

/// MSPRT (or binary Wald SPRT) campaigns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MsprtParams {
    /// `msprt` or `wald`; the Wald test runs on an antipodal pair of length `n`.
    pub detector: DetectorKind,
    pub n: usize,
    pub k: u32,
    pub modulation: Modulation,
    pub codebook_seed: u64,
    /// `E_b / N_0` in dB; `rho = 2 (k / n) 10^(dB / 10)` per real dimension.
    pub ebn0_db: Option<f64>,
    /// Per-dimension SNR, used when `ebn0_db` is absent.
    pub rho: Option<f64>,
    pub u: usize,
    pub list_sizes: Vec<usize>,
    pub thresholds: ThresholdMode,
}

impl Default for MsprtParams {
    fn default() -> Self {
        Self {
            detector: DetectorKind::Msprt,
            n: 10,
            k: 10,
            modulation: Modulation::Bpsk,
            codebook_seed: 0,
            ebn0_db: Some(9.6),
            rho: None,
            u: 100,
            list_sizes: vec![2, 3, 5],
            thresholds: ThresholdMode::Corollary,
        }
    }
}

impl MsprtParams {
    pub fn rho(&self) -> HarnessResult<f64> {
        let bits = if self.detector == DetectorKind::Wald { 1 } else { self.k };
        match (self.ebn0_db, self.rho) {
            (Some(db), _) => Ok(2.0 * bits as f64 / self.n as f64 * db_to_linear(db)?),
            (None, Some(r)) if r > 0.0 && r.is_finite() => Ok(r),
            (None, Some(r)) => Err(config_err(format!("rho must be > 0, got {r}"))),
            (None, None) => Err(config_err("set ebn0_db or rho")),
        }
    }

    /// Scenarios in row order.
    pub fn scenarios(&self) -> HarnessResult<Vec<Scenario>> {
        if self.n == 0 || self.u == 0 {
            return Err(config_err("n and u must be >= 1"));
        }
        let rho = self.rho()?;
        let base = DetectorConfig { thresholds: self.thresholds, ..Default::default() };
        match self.detector {
            DetectorKind::Msprt => {
                nonempty("list_sizes", &self.list_sizes)?;
                Ok(self
                    .list_sizes
                    .iter()
                    .map(|&l| Scenario {
                        detector: DetectorKind::Msprt,
                        codebook: CodebookSpec::Generated {
                            n: self.n,
                            k: self.k,
                            modulation: self.modulation,
                            seed: self.codebook_seed,
                        },
                        rho,
                        u: self.u,
                        config: DetectorConfig { list_size: l, ..base.clone() },
                    })
                    .collect())
            }
            DetectorKind::Wald => Ok(vec![Scenario {
                detector: DetectorKind::Wald,
                codebook: CodebookSpec::Antipodal { n: self.n },
                rho,
                u: self.u,
                config: base,
            }]),
            DetectorKind::CrcGenie => Err(config_err("use the crc command for CRC-guided detection")),
        }
    }
}

fn msprt(cfg: &RunConfig<MsprtParams>) -> HarnessResult<Table> {
    let p = &cfg.params;
    let mut table = Table::new(&[
        "detector",
        "list_size",
        "rho",
        "u",
        "trials",
        "errors",
        "error_rate",
        "error_halfwidth",
        "mean_stop_fraction",
        "stop_fraction_halfwidth",
        "error_bound",
        "stop_fraction_lower_bound",
    ]);
    for sc in p.scenarios()? {
        let rep = run_campaign(&sc, cfg.trials, cfg.seed, cfg.workers)?;
        let (list, lower) = match sc.detector {
            DetectorKind::Wald => {
                let book = Codebook::antipodal(p.n, sc.rho)?;
                let (b1, b2) = wald_stop_lower_bounds(&book.codeword(0)?, &book.codeword(1)?, sc.u, &sc.config)?;
                (Value::Null, json!(0.5 * (b1 + b2) / sc.u as f64))
            }
            _ => (json!(sc.config.list_size), Value::Null),
        };
        table.push(vec![
            json!(sc.detector),
            list,
            json!(sc.rho),
            json!(sc.u),
            json!(rep.trials),
            json!(rep.errors),
            json!(rep.error_rate),
            json!(rep.confidence_halfwidth),
            json!(rep.mean_stop_fraction),
            json!(rep.stop_fraction_halfwidth),
            json!(rep.error_bound),
            lower,
        ]);
    }
    Ok(table)
}

/// CRC-guided campaigns; the stopping floor is calibrated per cell unless given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrcParams {
    pub k: Vec<usize>,
    pub widths: Vec<CrcWidth>,
    /// Uncoded block error target that sets the SNR.
    pub eps: f64,
    pub u: usize,
    pub floor: Option<f64>,
    /// Paired trials for the floor calibration; defaults to `trials`.
    pub calibration_trials: Option<u64>,
}

impl Default for CrcParams {
    fn default() -> Self {
        Self {
            k: vec![150, 200, 500],
            widths: vec![CrcWidth::Crc16, CrcWidth::Crc8],
            eps: 1e-3,
            u: 100,
            floor: None,
            calibration_trials: None,
        }
    }
}

fn crc(cfg: &RunConfig<CrcParams>) -> HarnessResult<Table> {
    let p = &cfg.params;
    check_eps(p.eps)?;
    nonempty("k", &p.k)?;
    nonempty("widths", &p.widths)?;
    if p.u == 0 {
        return Err(config_err("u must be >= 1"));
    }
    let mut table = Table::new(&[
        "k",
        "crc_bits",
        "n",
        "rho",
        "floor",
        "trials",
        "errors",
        "error_rate",
        "error_halfwidth",
        "mean_stop_fraction",
        "stop_fraction_halfwidth",
    ]);
    for &k in &p.k {
        for &w in &p.widths {
            let n = k + w.bits();
            let rho = snr_for_uncoded_block_error(n, p.eps)?;
            let code = CrcCode::new(k, w, rho)?;
            let floor = match p.floor {
                Some(f) => f,
                None => {
                    let trials = p.calibration_trials.unwrap_or(cfg.trials);
                    calibrate_crc_floor(&code, p.u, trials, derive_seed(cfg.seed, 0), cfg.workers)?.floor
                }
            };
            let sc = Scenario {
                detector: DetectorKind::CrcGenie,
                codebook: CodebookSpec::Crc { k },
                rho,
                u: p.u,
                config: DetectorConfig { crc_width: w, min_tau_fraction: floor, ..Default::default() },
            };
            let rep = run_campaign(&sc, cfg.trials, derive_seed(cfg.seed, 1), cfg.workers)?;
            table.push(vec![
                json!(k),
                json!(w.bits()),
                json!(n),
                json!(rho),
                json!(floor),
                json!(rep.trials),
                json!(rep.errors),
                json!(rep.error_rate),
                json!(rep.confidence_halfwidth),
                json!(rep.mean_stop_fraction),
                json!(rep.stop_fraction_halfwidth),
            ]);
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OfdmTable {
    /// One row per pair and precoder with its linearity deviation.
    #[default]
    Summary,
    /// Full distance curves.
    Curves,
    /// Early-detection campaigns at calibrated margins.
    Detection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmDetectionParams {
    pub k: u32,
    pub snr_db: Vec<f64>,
    /// Waveform samples per symbol.
    pub samples: usize,
    pub margins: Vec<f64>,
    pub target_error: f64,
}

impl Default for OfdmDetectionParams {
    fn default() -> Self {
        Self {
            k: 8,
            snr_db: vec![10.0],
            samples: 256,
            margins: (1..=120).map(|i| 0.25 * i as f64).collect(),
            target_error: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmParams {
    pub table: OfdmTable,
    pub n: usize,
    /// Seed of the base codeword (pair family) or codebook (detection).
    pub codebook_seed: u64,
    /// Per-dimension QPSK amplitude of the pair family.
    pub amplitude: f64,
    pub time_grid: usize,
    pub precoders: Vec<PrecoderKind>,
    pub detection: OfdmDetectionParams,
}

impl Default for OfdmParams {
    fn default() -> Self {
        Self {
            table: OfdmTable::Summary,
            n: 128,
            codebook_seed: 0,
            amplitude: 1.0,
            time_grid: 1024,
            precoders: vec![PrecoderKind::Identity, PrecoderKind::HadamardSylvester],
            detection: OfdmDetectionParams::default(),
        }
    }
}

fn ofdm(cfg: &RunConfig<OfdmParams>) -> HarnessResult<Table> {
    let p = &cfg.params;
    nonempty("precoders", &p.precoders)?;
    let precoders = p.precoders.iter().map(|&k| Precoder::new(k, p.n)).collect::<crate::Result<Vec<_>>>()?;
    if p.table == OfdmTable::Detection {
        return ofdm_detection(cfg, &precoders);
    }
    let config = OfdmConfig { n_subcarriers: p.n, symbol_duration: 1.0, time_grid: p.time_grid };
    let family = qpsk_pair_family(p.n, p.amplitude, p.codebook_seed)?;
    let mut table = match p.table {
        OfdmTable::Summary => Table::new(&["pair_id", "support_size", "k1", "k2", "precoder", "deviation", "d_sq_end"]),
        _ => Table::new(&["pair_id", "t_over_T", "d_sq", "precoder"]),
    };
    for (id, pair) in family.iter().enumerate() {
        for pre in &precoders {
            let curve = distance_curve(&pair.base, &pair.other, &config, pre)?;
            if p.table == OfdmTable::Summary {
                let k2 = pair.support.get(1).map_or(Value::Null, |k| json!(k));
                table.push(vec![
                    json!(id),
                    json!(pair.support.len()),
                    json!(pair.support[0]),
                    k2,
                    json!(pre.label()),
                    json!(linearity_deviation(&curve)?),
                    json!(curve.values.last().copied().unwrap_or(0.0)),
                ]);
            } else {
                for (t, d) in curve.abscissae.iter().zip(&curve.values) {
                    table.push(vec![json!(id), json!(t), json!(d), json!(pre.label())]);
                }
            }
        }
    }
    Ok(table)
}

fn ofdm_detection(cfg: &RunConfig<OfdmParams>, precoders: &[Precoder]) -> HarnessResult<Table> {
    let d = &cfg.params.detection;
    nonempty("detection.snr_db", &d.snr_db)?;
    check_eps(d.target_error)?;
    let mut table = Table::new(&[
        "precoder",
        "snr_db",
        "margin",
        "trials",
        "errors",
        "error_rate",
        "mean_stop_fraction",
        "stop_fraction_halfwidth",
    ]);
    for &db in &d.snr_db {
        let book = gen_codebook(cfg.params.n, d.k, Modulation::Qpsk, db_to_linear(db)?, cfg.params.codebook_seed)?;
        for pre in precoders {
            let det = OfdmDetector::new(&book, pre, d.samples)?;
            let (margin, rep) = det.calibrate(&d.margins, d.target_error, cfg.trials, cfg.seed, cfg.workers)?;
            table.push(vec![
                json!(pre.label()),
                json!(db),
                json!(margin),
                json!(rep.trials),
                json!(rep.errors),
                json!(rep.error_rate),
                json!(rep.mean_stop_fraction),
                json!(rep.stop_fraction_halfwidth),
            ]);
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultihopTable {
    /// Split-DF total latency over `k`, SNR and `q`.
    #[default]
    Splitting,
    /// Ranked strategy comparison per `(k, SNR)`.
    Compare,
    /// Two-hop AF campaign, plain against pre-compensated relays.
    TwoHop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoHopParams {
    pub n: usize,
    pub u: usize,
    pub snr_db: Vec<f64>,
}

impl Default for TwoHopParams {
    fn default() -> Self {
        Self { n: 8, u: 100, snr_db: vec![0.0, 5.0, 10.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultihopParams {
    pub table: MultihopTable,
    pub k: Vec<u64>,
    pub snr_db: Vec<f64>,
    pub q: Vec<u32>,
    pub h: u32,
    pub eps: f64,
    pub budget: ErrorBudget,
    pub two_hop: TwoHopParams,
}

impl Default for MultihopParams {
    fn default() -> Self {
        Self {
            table: MultihopTable::Splitting,
            k: vec![10, 20, 40, 100, 200, 400, 1000, 2000, 4000, 10_000],
            snr_db: vec![-10.0, 10.0],
            q: vec![1, 2, 4, 8],
            h: 2,
            eps: 1e-7,
            budget: ErrorBudget::UnionBound,
            two_hop: TwoHopParams::default(),
        }
    }
}

const MULTIHOP_COLUMNS: [&str; 9] =
    ["strategy", "h", "q", "k", "snr_db", "eps", "latency_symbols", "latency_normalized", "status"];

fn multihop(cfg: &RunConfig<MultihopParams>) -> HarnessResult<Table> {
    let p = &cfg.params;
    if p.table == MultihopTable::TwoHop {
        return two_hop(cfg);
    }
    check_eps(p.eps)?;
    nonempty("k", &p.k)?;
    nonempty("snr_db", &p.snr_db)?;
    if p.h == 0 {
        return Err(config_err("h must be >= 1"));
    }
    let mut table = Table::new(&MULTIHOP_COLUMNS);
    for &db in &p.snr_db {
        let rho = db_to_linear(db)?;
        for &k in &p.k {
            if p.table == MultihopTable::Compare {
                for row in compare_strategies(k, rho, 1.0, p.eps, p.h, p.budget)? {
                    let status = match &row.note {
                        None => json!("ok"),
                        Some(n) => {
                            table.infeasible += 1;
                            json!(n)
                        }
                    };
                    table.push(vec![
                        json!(row.strategy),
                        json!(row.h),
                        json!(row.q),
                        json!(k),
                        json!(db),
                        json!(p.eps),
                        json!(row.latency_symbols),
                        json!(row.latency_normalized),
                        status,
                    ]);
                }
                continue;
            }
            let single = min_latency_with_limit(k, rho, 1.0, p.eps, PowerConstraintKind::EqualOrMaximal, DEFAULT_N_MAX)
                .map(|m| m.latency);
            for &q in &p.q {
                if q == 0 {
                    return Err(config_err("q must be >= 1"));
                }
                let r = if k < q as u64 {
                    Err(LatError::Infeasible(format!("cannot split {k} bits into {q} parts")))
                } else {
                    split_latency(k, rho, 1.0, p.eps, p.h, q, p.budget).map(|s| s.total_latency)
                };
                let status = cell_status(&mut table, &r)?;
                let latency = r.as_ref().ok().copied();
                let norm = match (&latency, &single) {
                    (Some(l), Ok(s)) => Some(l / s),
                    _ => None,
                };
                table.push(vec![
                    json!(if q == 1 { "df" } else { "split_df" }),
                    json!(p.h),
                    json!(q),
                    json!(k),
                    json!(db),
                    json!(p.eps),
                    json!(latency),
                    json!(norm),
                    status,
                ]);
            }
        }
    }
    Ok(table)
}

fn two_hop(cfg: &RunConfig<MultihopParams>) -> HarnessResult<Table> {
    let t = &cfg.params.two_hop;
    nonempty("two_hop.snr_db", &t.snr_db)?;
    let mut table = Table::new(&[
        "snr_db",
        "trials",
        "relay_errors",
        "mean_relay_stop_fraction",
        "plain_errors",
        "precomp_errors",
        "dominance_violations",
        "max_energy_error",
    ]);
    for &db in &t.snr_db {
        let book = Codebook::antipodal(t.n, db_to_linear(db)?)?;
        let r = two_hop_campaign(&book, t.u, &DetectorConfig::default(), cfg.trials, cfg.seed, cfg.workers)?;
        table.push(vec![
            json!(db),
            json!(r.trials),
            json!(r.relay_errors),
            json!(r.mean_relay_stop_fraction),
            json!(r.plain_errors),
            json!(r.precomp_errors),
            json!(r.dominance_violations),
            json!(r.max_energy_error),
        ]);
    }
    Ok(table)
}

/// Reference config document for `command` (all defaults spelled out).
pub fn example_config(command: Command) -> Value {
    fn doc<P: Serialize + Default>() -> Value {
        let cfg = RunConfig {
            seed: 0,
            trials: DEFAULT_TRIALS,
            workers: 1,
            format: Format::Csv,
            out: None,
            params: P::default(),
        };
        serde_json::to_value(cfg).expect("params serialize")
    }
    match command {
        Command::Bounds => doc::<BoundsParams>(),
        Command::EarlyLatency => doc::<EarlyLatencyParams>(),
        Command::Msprt => doc::<MsprtParams>(),
        Command::Crc => doc::<CrcParams>(),
        Command::Ofdm => doc::<OfdmParams>(),
        Command::Multihop => doc::<MultihopParams>(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_configs_round_trip() {
        for c in Command::ALL {
            let text = example_config(c).to_string();
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
            match c {
                Command::Bounds => {
                    serde_json::from_str::<RunConfig<BoundsParams>>(&text).unwrap();
                }
                Command::Multihop => {
                    serde_json::from_str::<RunConfig<MultihopParams>>(&text).unwrap();
                }
                _ => {}
            }
        }
    }

    #[test]
    fn unknown_fields_are_config_errors() {
        let e = run(Command::Bounds, r#"{"params": {"kk": [1]}}"#, &Overrides::default()).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        let e = run(Command::Bounds, r#"{"sed": 1}"#, &Overrides::default()).unwrap_err();
        assert!(matches!(e, HarnessError::Config(_)));
    }

    #[test]
    fn bounds_anchor_row() {
        let text = r#"{"params": {"k": [103], "snr_db": [], "rho": [2.5], "eps": 1e-7}}"#;
        let env = run(Command::Bounds, text, &Overrides::default()).unwrap();
        assert_eq!(env.rows.len(), 1);
        let n = env.column("n").unwrap()[0].as_u64().unwrap();
        assert!(n.abs_diff(186) <= 1, "{n}");
        assert_eq!(env.infeasible_rows, 0);
    }

    #[test]
    fn infeasible_cells_are_marked() {
        let text = r#"{"params": {"k": [100000], "snr_db": [-30], "rho": [], "n_max": 1000}}"#;
        let env = run(Command::Bounds, text, &Overrides::default()).unwrap();
        assert!(env.all_infeasible());
        let status = env.column("status").unwrap();
        assert!(status[0].as_str().unwrap().starts_with("infeasible"));
    }

    #[test]
    fn overrides_win() {
        let o = Overrides { seed: Some(9), trials: Some(3), workers: Some(2), format: Some(Format::Json), out: None };
        let env = run(Command::Bounds, r#"{"seed": 1, "trials": 5}"#, &o).unwrap();
        assert_eq!((env.seed, env.trials, env.workers, env.format), (9, 3, 2, Format::Json));
        assert_eq!(env.config["seed"], json!(9));
        assert!(run(Command::Bounds, "{}", &Overrides { trials: Some(0), ..Default::default() }).is_err());
    }

    #[test]
    fn csv_has_reproducibility_header() {
        let env = run(Command::Bounds, r#"{"params": {"k": [1, 2]}}"#, &Overrides::default()).unwrap();
        let text = String::from_utf8(env.to_csv().unwrap()).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().contains("seed=0"));
        assert!(lines.next().unwrap().starts_with("# config: "));
        assert_eq!(lines.next().unwrap(), "k,snr_db,n,latency,rho,eps,blocklength,status");
    }
}
