use crate::error::{check_positive, check_probability, domain, Result};

/// Baum–Veeravalli bound `sum_m pi_m (1 - S_m) / S_m` on the error of an
/// MSPRT with thresholds `S_m`. Uniform priors when `priors` is `None`.
pub fn error_upper_bound(thresholds: &[f64], priors: Option<&[f64]>) -> Result<f64> {
    if thresholds.is_empty() {
        return domain("need at least one threshold");
    }
    for &s in thresholds {
        check_probability("threshold S", s)?;
    }
    let uniform = 1.0 / thresholds.len() as f64;
    if let Some(p) = priors {
        if p.len() != thresholds.len() {
            return domain("one prior per threshold");
        }
        if p.iter().any(|x| !(*x >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return domain("priors must form a probability vector");
        }
    }
    Ok(thresholds
        .iter()
        .enumerate()
        .map(|(i, s)| priors.map_or(uniform, |p| p[i]) * (1.0 - s) / s)
        .sum())
}

/// Per-increment Kullback–Leibler distance `||x1 - x2||^2 / (2u)` between two
/// codewords observed in `u` unit-variance increments.
pub fn sprt_kl_per_increment(x1: &[f64], x2: &[f64], u: usize) -> Result<f64> {
    if x1.len() != x2.len() || u == 0 {
        return domain("need equal-length codewords and u >= 1");
    }
    let d2: f64 = x1.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(d2 / (2.0 * u as f64))
}

/// Poor–Hadjiliadis lower bounds on the expected stopping times of a binary
/// SPRT with thresholds `A <= 1 <= B` on the log-likelihood ratio of
/// hypothesis 2 against hypothesis 1. Hypothesis 1 is accepted at `A` and has
/// error probability `alpha`; hypothesis 2 is accepted at `B` with error
/// `gamma`. Returns `(E_1[tau], E_2[tau])` in increments:
///
/// `( -D1^-1 [alpha log B + (1 - alpha) log A],  D2^-1 [(1 - gamma) log B + gamma log A] )`.
pub fn sprt_stop_lower_bounds(d1: f64, d2: f64, alpha: f64, gamma: f64, a: f64, b: f64) -> Result<(f64, f64)> {
    check_positive("D1", d1)?;
    check_positive("D2", d2)?;
    check_probability("alpha", alpha)?;
    check_probability("gamma", gamma)?;
    check_positive("A", a)?;
    check_positive("B", b)?;
    let tol = 1e-12;
    if a < gamma / (1.0 - alpha) * (1.0 - tol) || b > (1.0 - gamma) / alpha * (1.0 + tol) {
        return domain(format!(
            "bounds need A >= gamma/(1-alpha) and B <= (1-gamma)/alpha (A = {a}, B = {b})"
        ));
    }
    let (la, lb) = (a.ln(), b.ln());
    Ok((-(alpha * lb + (1.0 - alpha) * la) / d1, ((1.0 - gamma) * lb + gamma * la) / d2))
}

/// Dragalin's asymptotic `i`-th moment of the stopping time,
/// `(-log((1 - S) / S) / D)^i`, valid as `S -> 1`.
pub fn dragalin_asymptotic(s: f64, d: f64, moment: u32) -> Result<f64> {
    check_probability("threshold S", s)?;
    check_positive("D", d)?;
    if moment == 0 {
        return domain("moment order must be >= 1");
    }
    Ok((-((1.0 - s) / s).ln() / d).powi(moment as i32))
}
