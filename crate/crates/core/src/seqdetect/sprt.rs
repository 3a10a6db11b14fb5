use super::bounds::{sprt_kl_per_increment, sprt_stop_lower_bounds};
use super::stream::ObservationStream;
use super::{pairwise_error, DetectorConfig, StoppingDecision, UNIT_N0};
use crate::error::{check_probability, domain, LatError, Result};

/// Wald thresholds `(A, B) = (P_e / (1 - P_e), (1 - P_e) / P_e)`.
pub fn wald_thresholds(pe: f64) -> Result<(f64, f64)> {
    check_probability("pairwise error", pe)?;
    let b = (1.0 - pe) / pe;
    Ok((1.0 / b, b))
}

/// Binary Wald SPRT on `LLR_t = (x1 - x2) . Y_t / sqrt(u)`.
///
/// Decides `x1` (message 0) when the ratio reaches `log B` and `x2`
/// (message 1) when it falls to `log A`; at `t = u` without a crossing the
/// nearer codeword wins. Thresholds come from `config.binary_thresholds` or
/// from the pairwise error of the pair.
pub fn run_wald_sprt(
    stream: &mut ObservationStream,
    x1: &[f64],
    x2: &[f64],
    config: &DetectorConfig,
) -> Result<StoppingDecision> {
    config.validate()?;
    if x1.len() != x2.len() || x1.len() != stream.cumulative().len() {
        return domain("codewords and observation must share a length");
    }
    if x1 == x2 {
        return domain("SPRT needs two distinct codewords");
    }
    let (a, b) = match config.binary_thresholds {
        Some(ab) => ab,
        None => wald_thresholds(pairwise_error(x1, x2, UNIT_N0)?)?,
    };
    let (la, lb) = (a.ln(), b.ln());
    let u = stream.samples_per_symbol();
    let scale = 1.0 / (u as f64).sqrt();
    let diff: Vec<f64> = x1.iter().zip(x2).map(|(p, q)| (p - q) * scale).collect();
    let truth = stream.message();
    while stream.advance() {
        let t = stream.t();
        let llr: f64 = diff.iter().zip(stream.cumulative()).map(|(d, y)| d * y).sum();
        let (decided, threshold) = if llr >= lb {
            (0, Some(b))
        } else if llr <= la {
            (1, Some(a))
        } else if t == u {
            (if llr >= 0.0 { 0 } else { 1 }, None)
        } else {
            continue;
        };
        return Ok(StoppingDecision::new(t, u, Some(decided), truth == Some(decided), llr, threshold));
    }
    Err(LatError::Precondition("observation stream already consumed".into()))
}

/// Poor–Hadjiliadis lower bounds `(E[tau | x1], E[tau | x2])`, in increments,
/// for [`run_wald_sprt`] with the same thresholds. The error probabilities are
/// Wald's values for those thresholds, `alpha = (1 - A) / (B - A)` and
/// `gamma = A (B - 1) / (B - A)`.
pub fn wald_stop_lower_bounds(x1: &[f64], x2: &[f64], u: usize, config: &DetectorConfig) -> Result<(f64, f64)> {
    let (a, b) = match config.binary_thresholds {
        Some(ab) => ab,
        None => wald_thresholds(pairwise_error(x1, x2, UNIT_N0)?)?,
    };
    if !(a < 1.0 && b > 1.0) {
        return domain("bounds need A < 1 < B");
    }
    let d = sprt_kl_per_increment(x1, x2, u)?;
    // x1 is accepted at B, so it plays the hypothesis accepted at the upper threshold
    let alpha = (1.0 - a) / (b - a);
    let gamma = a * (b - 1.0) / (b - a);
    let (e_lower, e_upper) = sprt_stop_lower_bounds(d, d, alpha, gamma, a, b)?;
    Ok((e_upper, e_lower))
}
