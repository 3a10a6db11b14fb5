//! Monte-Carlo early detection over parallel AWGN channels.
//!
//! A codeword is observed as `u` sub-symbol increments (see [`ObservationStream`]).
//! The detectors here decide from the running sum and stop as soon as their
//! rule fires: a list-decoding guided multi-hypothesis SPRT, the binary Wald
//! SPRT, and a CRC-checked hard decision. Noise has unit variance per
//! dimension on the full-symbol scale, i.e. `N0 = 2`.

mod bounds;
mod campaign;
mod codebook;
mod crc;
mod msprt;
mod sprt;
mod stream;

use serde::{Deserialize, Serialize};

pub use bounds::{dragalin_asymptotic, error_upper_bound, sprt_kl_per_increment, sprt_stop_lower_bounds};
pub use campaign::{run_campaign, run_trial, CodebookSpec, DetectorKind, LatencyReport, Scenario};
pub(crate) use campaign::par_map as par_map_trials;
pub use codebook::{gen_codebook, Codebook, Modulation, MAX_EXHAUSTIVE_BITS};
pub use crc::{
    calibrate_crc_floor, crc_remainder, run_crc_genie, snr_for_uncoded_block_error, CrcCode, CrcFrame, CrcWidth,
    FloorCalibration,
};
pub use msprt::{list_decode, run_msprt, ListEntry};
pub use sprt::{run_wald_sprt, wald_stop_lower_bounds, wald_thresholds};
pub use stream::{derive_seed, transmit, ObservationStream};

use crate::error::{check_positive, check_probability, domain, Result};
use crate::special::q_function;

/// Noise spectral density implied by unit per-dimension variance.
pub const UNIT_N0: f64 = 2.0;

/// Outcome of one sequential test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingDecision {
    /// Increment index `t` at which the test stopped, `1..=u`.
    pub stop_index: usize,
    pub samples_per_symbol: usize,
    /// `t / u`
    pub stop_fraction: f64,
    /// `None` when the decided payload does not fit a message id (CRC frames).
    pub decided_message: Option<u64>,
    pub correct: bool,
    pub statistic_at_stop: f64,
    /// Threshold `S_m` in force when the rule fired; `None` for a default
    /// decision at `t = u`.
    pub threshold: Option<f64>,
}

impl StoppingDecision {
    pub(crate) fn new(
        t: usize,
        u: usize,
        decided: Option<u64>,
        correct: bool,
        statistic: f64,
        threshold: Option<f64>,
    ) -> Self {
        Self {
            stop_index: t,
            samples_per_symbol: u,
            stop_fraction: t as f64 / u as f64,
            decided_message: decided,
            correct,
            statistic_at_stop: statistic,
            threshold,
        }
    }

    /// True when the rule fired before the default decision at `T`.
    pub fn stopped_early(&self) -> bool {
        self.threshold.is_some()
    }
}

/// How the MSPRT threshold `S_m` is chosen for the current list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum ThresholdMode {
    /// `1 / (1 + l sum P_e)`, with `1 - P_e` for a list of two.
    Corollary,
    /// `1 / (1 + pi_m^-1 sum pi_m' P_e)` with the priors renormalized over the list.
    ListEq42,
    Fixed(f64),
}

/// Parameters shared by the detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub list_size: usize,
    /// Message priors; uniform when `None`.
    pub priors: Option<Vec<f64>>,
    pub thresholds: ThresholdMode,
    /// Wald thresholds `(A, B)`; derived from the pairwise error when `None`.
    pub binary_thresholds: Option<(f64, f64)>,
    pub crc_width: CrcWidth,
    /// Earliest stop for the CRC genie, as a fraction of `T`.
    pub min_tau_fraction: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            list_size: 2,
            priors: None,
            thresholds: ThresholdMode::Corollary,
            binary_thresholds: None,
            crc_width: CrcWidth::Crc16,
            min_tau_fraction: 0.2,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.list_size < 2 {
            return domain("list size must be >= 2");
        }
        if let Some(p) = &self.priors {
            if p.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return domain("priors must be positive");
            }
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return domain(format!("priors must sum to 1, got {s}"));
            }
        }
        if let ThresholdMode::Fixed(s) = self.thresholds {
            check_probability("threshold S", s)?;
        }
        if let Some((a, b)) = self.binary_thresholds {
            check_positive("A", a)?;
            check_positive("B", b)?;
            if a > b {
                return domain("Wald thresholds need A <= B");
            }
        }
        if !(0.0..1.0).contains(&self.min_tau_fraction) {
            return domain("min_tau_fraction must lie in [0, 1)");
        }
        Ok(())
    }

    fn prior(&self, m: u64) -> f64 {
        match &self.priors {
            Some(p) => p.get(m as usize).copied().unwrap_or(0.0),
            None => 1.0,
        }
    }
}

/// Pairwise error `Q(d / sqrt(2 N0))` for a codeword distance `d`.
pub fn pairwise_error_from_distance(distance: f64, n0: f64) -> Result<f64> {
    check_positive("N0", n0)?;
    Ok(q_function(distance / (2.0 * n0).sqrt()))
}

/// Probability of confusing `x` with `x2` when they are the only candidates.
pub fn pairwise_error(x: &[f64], x2: &[f64], n0: f64) -> Result<f64> {
    if x.len() != x2.len() {
        return domain("codewords must have equal length");
    }
    let d2: f64 = x.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
    pairwise_error_from_distance(d2.sqrt(), n0)
}

/// Threshold from the pairwise errors between the target and the other `l - 1`
/// list members. `prior_ratios[i]` is `pi_{m'} / pi_m` (all ones for uniform
/// priors).
pub fn threshold_from_pairwise(pe: &[f64], prior_ratios: Option<&[f64]>, mode: ThresholdMode) -> Result<f64> {
    if pe.is_empty() {
        return domain("threshold needs at least one alternative");
    }
    let ell = pe.len() + 1;
    Ok(match mode {
        ThresholdMode::Fixed(s) => s,
        ThresholdMode::Corollary if ell == 2 => 1.0 - pe[0],
        ThresholdMode::Corollary => 1.0 / (1.0 + ell as f64 * pe.iter().sum::<f64>()),
        ThresholdMode::ListEq42 => {
            let weighted: f64 = match prior_ratios {
                Some(r) => pe.iter().zip(r).map(|(p, w)| p * w).sum(),
                None => pe.iter().sum(),
            };
            1.0 / (1.0 + weighted)
        }
    })
}

/// MSPRT threshold `S_m` for `list[target]` against the other list members.
pub fn msprt_threshold(list: &[Vec<f64>], target: usize, n0: f64, mode: ThresholdMode) -> Result<f64> {
    if list.len() < 2 || target >= list.len() {
        return domain("list needs the target and at least one alternative");
    }
    let pe = list
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != target)
        .map(|(_, x)| pairwise_error(&list[target], x, n0))
        .collect::<Result<Vec<_>>>()?;
    threshold_from_pairwise(&pe, None, mode)
}
