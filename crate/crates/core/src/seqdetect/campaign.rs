use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::codebook::{gen_codebook, Codebook, Modulation};
use super::crc::{crc_trial_stream, run_crc_genie, CrcCode};
use super::msprt::run_msprt;
use super::sprt::run_wald_sprt;
use super::stream::{derive_seed, transmit};
use super::{DetectorConfig, StoppingDecision};
use crate::error::{check_positive, domain, LatError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Msprt,
    Wald,
    CrcGenie,
}

/// Codebook of a scenario; the SNR lives on [`Scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CodebookSpec {
    Generated { n: usize, k: u32, modulation: Modulation, seed: u64 },
    Antipodal { n: usize },
    /// `k` payload bits plus the CRC of `DetectorConfig::crc_width`.
    Crc { k: usize },
}

/// A Monte-Carlo scenario: detector, codebook, per-symbol SNR `rho` and the
/// number `u` of increments per symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub detector: DetectorKind,
    pub codebook: CodebookSpec,
    pub rho: f64,
    pub u: usize,
    #[serde(default)]
    pub config: DetectorConfig,
}

enum Prepared {
    Book { book: Codebook, pair: Option<(Vec<f64>, Vec<f64>)> },
    Crc(CrcCode),
}

impl Scenario {
    fn prepare(&self) -> Result<Prepared> {
        check_positive("rho", self.rho)?;
        if self.u == 0 {
            return domain("u must be >= 1");
        }
        self.config.validate()?;
        let book = match (&self.codebook, self.detector) {
            (CodebookSpec::Crc { k }, DetectorKind::CrcGenie) => {
                return Ok(Prepared::Crc(CrcCode::new(*k, self.config.crc_width, self.rho)?));
            }
            (CodebookSpec::Crc { .. }, _) | (_, DetectorKind::CrcGenie) => {
                return domain("the CRC genie runs on a CRC codebook, and only there");
            }
            (CodebookSpec::Generated { n, k, modulation, seed }, _) => {
                gen_codebook(*n, *k, *modulation, self.rho, *seed)?
            }
            (CodebookSpec::Antipodal { n }, _) => Codebook::antipodal(*n, self.rho)?,
        };
        let pair = match self.detector {
            DetectorKind::Wald if book.size() == 2 => Some((book.codeword(0)?, book.codeword(1)?)),
            DetectorKind::Wald => {
                return Err(LatError::Unsupported("the Wald SPRT needs a binary codebook".into()));
            }
            _ => None,
        };
        Ok(Prepared::Book { book, pair })
    }
}

fn trial(scenario: &Scenario, prepared: &Prepared, trial_seed: u64) -> Result<StoppingDecision> {
    match prepared {
        Prepared::Crc(code) => {
            let (frame, mut stream) = crc_trial_stream(code, scenario.u, trial_seed)?;
            run_crc_genie(&mut stream, code, &frame, &scenario.config)
        }
        Prepared::Book { book, pair } => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, 0));
            let message = rng.random_range(0..book.size());
            let mut stream = transmit(book, message, scenario.u, derive_seed(trial_seed, 1))?;
            match (scenario.detector, pair) {
                (DetectorKind::Wald, Some((x1, x2))) => run_wald_sprt(&mut stream, x1, x2, &scenario.config),
                _ => run_msprt(&mut stream, book, &scenario.config),
            }
        }
    }
}

/// Runs trial `index` of a campaign seeded with `seed` on its own.
pub fn run_trial(scenario: &Scenario, seed: u64, index: u64) -> Result<StoppingDecision> {
    let prepared = scenario.prepare()?;
    trial(scenario, &prepared, derive_seed(seed, index))
}

/// Maps `f` over `0..trials` on a pool of `workers` threads, keeping order.
pub(crate) fn par_map<T, F>(trials: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    if workers == 0 {
        return domain("workers must be >= 1");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| LatError::Precondition(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| (0..trials).into_par_iter().map(f).collect()))
}

/// Aggregate of a Monte-Carlo campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub trials: u64,
    pub errors: u64,
    pub error_rate: f64,
    /// 95% normal-approximation half-width of `error_rate`.
    pub confidence_halfwidth: f64,
    pub mean_stop_fraction: f64,
    /// 95% half-width of `mean_stop_fraction`.
    pub stop_fraction_halfwidth: f64,
    /// `stop_histogram[t - 1]` counts trials stopped at increment `t`.
    pub stop_histogram: Vec<u64>,
    /// Trials stopped by the rule rather than by the default decision at `T`.
    pub early_stops: u64,
    /// Baum–Veeravalli bound `(1 - S) / S` at the smallest MSPRT threshold used.
    pub error_bound: Option<f64>,
    /// CRC floor in force, echoed for reproducibility.
    pub min_tau_fraction: Option<f64>,
}

impl LatencyReport {
    /// Aggregates decisions with integer sums, so the result does not depend
    /// on the order in which trials finished.
    pub fn from_decisions(decisions: &[StoppingDecision], u: usize) -> Result<Self> {
        if decisions.is_empty() {
            return domain("a report needs at least one trial");
        }
        let n = decisions.len() as u64;
        let mut hist = vec![0u64; u];
        let (mut errors, mut early, mut sum_t, mut sum_t2) = (0u64, 0u64, 0u128, 0u128);
        let mut min_s: Option<f64> = None;
        for d in decisions {
            if d.stop_index == 0 || d.stop_index > u {
                return domain(format!("stop index {} outside 1..={u}", d.stop_index));
            }
            hist[d.stop_index - 1] += 1;
            errors += u64::from(!d.correct);
            let t = d.stop_index as u128;
            sum_t += t;
            sum_t2 += t * t;
            if let Some(s) = d.threshold {
                early += 1;
                min_s = Some(min_s.map_or(s, |m: f64| m.min(s)));
            }
        }
        let nf = n as f64;
        let p = errors as f64 / nf;
        let mean_t = sum_t as f64 / nf;
        let var_t = (sum_t2 as f64 / nf - mean_t * mean_t).max(0.0);
        let uf = u as f64;
        Ok(Self {
            trials: n,
            errors,
            error_rate: p,
            confidence_halfwidth: 1.96 * (p * (1.0 - p) / nf).sqrt(),
            mean_stop_fraction: mean_t / uf,
            stop_fraction_halfwidth: 1.96 * (var_t / nf).sqrt() / uf,
            stop_histogram: hist,
            early_stops: early,
            error_bound: min_s.filter(|s| *s > 0.0 && *s < 1.0).map(|s| (1.0 - s) / s),
            min_tau_fraction: None,
        })
    }
}

/// Runs `trials` independent trials. Trial `i` uses a seed derived from
/// `(seed, i)`, so the report is identical for any number of workers.
pub fn run_campaign(scenario: &Scenario, trials: u64, seed: u64, workers: usize) -> Result<LatencyReport> {
    if trials == 0 {
        return domain("trials must be >= 1");
    }
    let prepared = scenario.prepare()?;
    let decisions = par_map(trials, workers, |i| trial(scenario, &prepared, derive_seed(seed, i)))?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut report = LatencyReport::from_decisions(&decisions, scenario.u)?;
    match scenario.detector {
        DetectorKind::CrcGenie => {
            report.min_tau_fraction = Some(scenario.config.min_tau_fraction);
            report.error_bound = None;
        }
        DetectorKind::Wald => report.error_bound = None,
        DetectorKind::Msprt => {}
    }
    Ok(report)
}
