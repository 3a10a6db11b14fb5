//! Analytic latency of an optimal early-detection receiver.
//!
//! A genie (a perfect error-detecting code) lets the receiver stop at the first
//! instant `tau` where the partial observation decodes correctly. With SNR
//! `P tau` accumulated by time `tau`, the probability of still being in error is
//! `eps*(P tau, R, n)`, so the stopping time has CDF `1 - eps*(P tau)` on
//! `(0, T)` and a point mass `eps*(P T)` at `T`, where the receiver decides by
//! default.

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, domain, Result};
use crate::fbl::{
    block_error_rate_real, capacity_slope, dispersion_slope, error_exponent_argument, snr_for_error, ChannelParams,
    CodeSpec,
};
use crate::quadrature::integrate;
use crate::special::normal_pdf;

/// Absolute tolerance on the normalized latency integral.
pub const LATENCY_ABS_TOL: f64 = 1e-8;
const MAX_INTERVALS: usize = 4000;

/// Inputs of the early-detection latency model.
///
/// The rate is kept as a real number so that table sweeps such as `R = 0.95`,
/// `n = 150` (where `nR` is not an integer) can be evaluated directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyDetectModel {
    pub channel: ChannelParams,
    pub blocklength: u64,
    pub rate: f64,
    /// Strictly increasing abscissae in `(0, T]`, ending at `T`.
    pub tau_grid: Vec<f64>,
    /// Probability that the receiver reaches `T` without a correct decode.
    pub tail_mass_at_t: f64,
}

impl EarlyDetectModel {
    /// Model with a uniform grid of `points` abscissae on `(0, T]`.
    pub fn new(channel: ChannelParams, blocklength: u64, rate: f64, points: usize) -> Result<Self> {
        channel.validate()?;
        check_positive("power", channel.power)?;
        check_positive("rate", rate)?;
        if blocklength == 0 {
            return domain("blocklength must be >= 1");
        }
        if points == 0 {
            return domain("tau grid needs at least one point");
        }
        let t = channel.symbol_duration;
        let mut tau_grid: Vec<f64> = (1..=points).map(|i| t * i as f64 / points as f64).collect();
        *tau_grid.last_mut().unwrap() = t;
        let tail = block_error_rate_real(channel.rho(), rate, blocklength as f64);
        Ok(Self { channel, blocklength, rate, tau_grid, tail_mass_at_t: tail })
    }

    pub fn from_code(channel: ChannelParams, code: &CodeSpec, points: usize) -> Result<Self> {
        Self::new(channel, code.blocklength, code.rate(), points)
    }

    /// Model whose power is solved so that `eps*(P T, R, n) = eps`.
    pub fn from_target(n: u64, rate: f64, eps: f64, symbol_duration: f64, points: usize) -> Result<Self> {
        let rho = snr_for_error(rate, n, eps)?;
        let channel = ChannelParams::from_snr(rho, symbol_duration)?;
        Self::new(channel, n, rate, points)
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        check_positive("power", self.channel.power)?;
        check_positive("rate", self.rate)?;
        let t = self.channel.symbol_duration;
        let grid = &self.tau_grid;
        if grid.is_empty() || grid[0] <= 0.0 {
            return domain("tau grid must be non-empty and positive");
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return domain("tau grid must be strictly increasing");
        }
        let last = *grid.last().unwrap();
        if (last - t).abs() > 1e-12 * t {
            return domain(format!("tau grid must end at T = {t}, ends at {last}"));
        }
        let expected = block_error_rate_real(self.channel.rho(), self.rate, self.blocklength as f64);
        if (expected - self.tail_mass_at_t).abs() > 1e-12 * expected.max(1e-300) {
            return domain("tail mass must equal the block error rate at T");
        }
        Ok(())
    }

    fn n(&self) -> f64 {
        self.blocklength as f64
    }

    /// Error probability of a decode attempted at `tau`.
    pub fn error_at(&self, tau: f64) -> f64 {
        block_error_rate_real(self.channel.power * tau, self.rate, self.n())
    }

    pub fn density_at(&self, tau: f64) -> f64 {
        density(tau, self.channel.power, self.rate, self.n())
    }
}

/// `gamma(tau) = sqrt(n) (C(P tau) - R + log2(n) / 2n) / sqrt(V(P tau))`.
pub fn gamma_of_tau(tau: f64, power: f64, rate: f64, n: u64) -> Result<f64> {
    check_positive("tau", tau)?;
    check_positive("power", power)?;
    if n == 0 {
        return domain("blocklength must be >= 1");
    }
    Ok(error_exponent_argument(power * tau, rate, n as f64))
}

/// `d gamma / d tau`, by the chain rule through `C` and `V`.
fn gamma_slope(tau: f64, power: f64, rate: f64, n: f64) -> f64 {
    let rho = power * tau;
    let c = 0.5 * rho.ln_1p() * std::f64::consts::LOG2_E;
    let r1 = rho + 1.0;
    let v = 0.5 * rho * (rho + 2.0) / (r1 * r1) * std::f64::consts::LOG2_E.powi(2);
    let num = c - rate + n.log2() / (2.0 * n);
    let dgamma_drho = n.sqrt() * (capacity_slope(rho) / v.sqrt() - 0.5 * num * dispersion_slope(rho) / v.powf(1.5));
    dgamma_drho * power
}

fn density(tau: f64, power: f64, rate: f64, n: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let g = error_exponent_argument(power * tau, rate, n);
    let phi = normal_pdf(g);
    if phi == 0.0 {
        return 0.0;
    }
    phi * gamma_slope(tau, power, rate, n)
}

/// Stopping-time density sampled on the model grid plus the point mass at `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingDensity {
    pub abscissae: Vec<f64>,
    pub density: Vec<f64>,
    pub point_mass_t: f64,
}

pub fn stopping_density(model: &EarlyDetectModel) -> Result<StoppingDensity> {
    model.validate()?;
    let density = model.tau_grid.iter().map(|&t| model.density_at(t).max(0.0)).collect();
    Ok(StoppingDensity { abscissae: model.tau_grid.clone(), density, point_mass_t: model.tail_mass_at_t })
}

/// Cumulative probability of having stopped by `tau < T`.
pub fn stopping_cdf(model: &EarlyDetectModel, tau: f64) -> f64 {
    if tau >= model.channel.symbol_duration {
        return 1.0;
    }
    if tau <= 0.0 {
        return 0.0;
    }
    1.0 - model.error_at(tau)
}

/// Interior points where the normalized integrands change fastest: the
/// capacity threshold and the point where the error rate crosses 1/2.
fn breakpoints(model: &EarlyDetectModel) -> Vec<f64> {
    let rho = model.channel.rho();
    let mut pts = Vec::new();
    let shannon = (2f64.powf(2.0 * model.rate) - 1.0) / rho;
    if shannon > 0.0 && shannon < 1.0 {
        pts.push(shannon);
    }
    let n = model.n();
    let target = model.rate - n.log2() / (2.0 * n);
    if target > 0.0 {
        let median = (2f64.powf(2.0 * target) - 1.0) / rho;
        if median > 0.0 && median < 1.0 {
            pts.push(median);
            // the transition width scales like 1/sqrt(n) around the median
            let w = 4.0 / n.sqrt();
            for f in [median * (1.0 - w), median * (1.0 + w)] {
                if f > 0.0 && f < 1.0 {
                    pts.push(f);
                }
            }
        }
    }
    pts
}

/// Normalized optimal average latency `E[tau] / T`, computed as
/// `(1/T) integral_0^T eps*(P tau) d tau`.
pub fn average_latency(model: &EarlyDetectModel) -> Result<f64> {
    model.validate()?;
    let rho = model.channel.rho();
    let (rate, n) = (model.rate, model.n());
    let r = integrate(
        |f| block_error_rate_real(rho * f, rate, n),
        0.0,
        1.0,
        &breakpoints(model),
        LATENCY_ABS_TOL,
        0.0,
        MAX_INTERVALS,
    )?;
    Ok(r.value.clamp(0.0, 1.0))
}

/// Same quantity from the density: `integral tau p(tau) d tau + T eps*(P T)`.
/// Retained as an independent cross-check of [`average_latency`].
pub fn average_latency_density_form(model: &EarlyDetectModel) -> Result<f64> {
    model.validate()?;
    let (power, rate, n) = (model.channel.rho(), model.rate, model.n());
    // normalized time f = tau / T, so the power per unit f is P T
    let r = integrate(
        |f| f * density(f, power, rate, n),
        0.0,
        1.0,
        &breakpoints(model),
        LATENCY_ABS_TOL * 0.1,
        0.0,
        MAX_INTERVALS,
    )?;
    Ok(r.value + model.tail_mass_at_t)
}

/// Capacity-based lower limit on any stopping time, `(2^{2R} - 1) / P`.
pub fn min_tau_bound(rate: f64, power: f64) -> Result<f64> {
    check_positive("power", power)?;
    Ok((2f64.powf(2.0 * rate) - 1.0) / power)
}

/// Latency of a receiver that may only stop at the given checkpoints, with the
/// error probability at each checkpoint supplied explicitly. The last checkpoint
/// is `T`; mass still in error at `T` is assigned to `T`.
pub fn checkpoint_latency_from_errors(checkpoints: &[f64], errors: &[f64]) -> Result<f64> {
    if checkpoints.is_empty() || checkpoints.len() != errors.len() {
        return domain("need one error value per checkpoint");
    }
    if checkpoints[0] <= 0.0 || checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return domain("checkpoints must be positive and strictly increasing");
    }
    if errors.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return domain("error probabilities must lie in [0, 1]");
    }
    let t = *checkpoints.last().unwrap();
    let mut previous = 1.0;
    let mut mean = 0.0;
    for (&tau, &e) in checkpoints.iter().zip(errors) {
        mean += tau * (previous - e);
        previous = e;
    }
    mean += t * previous;
    Ok(mean / t)
}

/// Checkpoint latency with the error at each checkpoint given by `eps*(P tau, R, n)`.
pub fn checkpoint_latency(checkpoints: &[f64], power: f64, rate: f64, n: u64) -> Result<f64> {
    check_positive("power", power)?;
    if n == 0 {
        return domain("blocklength must be >= 1");
    }
    let errors: Vec<f64> = checkpoints
        .iter()
        .map(|&tau| block_error_rate_real(power * tau, rate, n as f64))
        .collect();
    checkpoint_latency_from_errors(checkpoints, &errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbl::block_error_rate;

    fn table_model(n: u64, rate: f64) -> EarlyDetectModel {
        EarlyDetectModel::from_target(n, rate, 1e-9, 1.0, 64).unwrap()
    }

    #[test]
    fn gamma_zero_at_threshold() {
        let (n, r, p) = (300u64, 0.6, 2.0);
        let c = r - (n as f64).log2() / (2.0 * n as f64);
        let tau = (2f64.powf(2.0 * c) - 1.0) / p;
        assert!(gamma_of_tau(tau, p, r, n).unwrap().abs() < 1e-9);
        assert!(gamma_of_tau(0.0, p, r, n).is_err());
        let g1 = gamma_of_tau(0.5, p, r, n).unwrap();
        let g2 = gamma_of_tau(0.6, p, r, n).unwrap();
        assert!(g2 > g1);
    }

    #[test]
    fn gamma_at_t_is_q_inverse_of_block_error() {
        let (n, r, p) = (150u64, 0.5, 2.0);
        let e = block_error_rate(p, r, n).unwrap();
        let g = gamma_of_tau(1.0, p, r, n).unwrap();
        assert!((crate::special::q_inv(e).unwrap() - g).abs() < 1e-9);
    }

    #[test]
    fn density_matches_cdf_derivative() {
        let m = table_model(300, 0.5);
        for &tau in &[0.3, 0.45, 0.6, 0.8] {
            let h = 1e-6;
            let fd = (stopping_cdf(&m, tau + h) - stopping_cdf(&m, tau - h)) / (2.0 * h);
            let d = m.density_at(tau);
            assert!((d - fd).abs() <= 1e-6 * d.abs().max(1.0), "tau={tau} {d} {fd}");
        }
    }

    #[test]
    fn density_below_shannon_limit() {
        // The normal approximation leaks some mass below the capacity limit
        // (the log2(n)/2n term and Gaussian tails), so the density there is
        // small but not zero; well below it the density vanishes.
        let m = table_model(500, 0.5);
        let bound = min_tau_bound(0.5, m.channel.power).unwrap();
        assert!(stopping_cdf(&m, 0.9 * bound) > 0.0);
        assert!(m.density_at(0.2 * bound) < 1e-12);
        assert!(m.density_at(1e-9) < 1e-12);
    }

    #[test]
    fn density_vanishes_below_min_tau_bound() {
        let m = table_model(500, 0.5);
        let bound = min_tau_bound(0.5, m.channel.power).unwrap();
        let d = m.density_at(0.9 * bound);
        assert!(d < 1e-12, "density at 0.9x bound = {d}");
    }

    #[test]
    fn min_tau_examples() {
        assert!((min_tau_bound(0.5, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((min_tau_bound(1.0, 3.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(min_tau_bound(1.0, 0.0).is_err());
    }

    #[test]
    fn total_mass_is_one() {
        let m = table_model(150, 0.5);
        let (p, r, n) = (m.channel.power, m.rate, m.blocklength as f64);
        let mass = integrate(|t| density(t, p, r, n), 0.0, 1.0, &breakpoints(&m), 1e-10, 0.0, 4000).unwrap();
        assert!((mass.value + m.tail_mass_at_t - 1.0).abs() < 1e-6);
    }

    #[test]
    fn table_values_for_half_rate() {
        for (n, want) in [(150u64, 0.34), (500, 0.54)] {
            let v = average_latency(&table_model(n, 0.5)).unwrap();
            assert!((v - want).abs() <= 0.03, "n={n}: {v}");
        }
    }

    #[test]
    fn both_forms_agree() {
        for (n, r) in [(150u64, 0.5), (1000, 0.95), (5000, 0.5)] {
            let m = table_model(n, r);
            let a = average_latency(&m).unwrap();
            let b = average_latency_density_form(&m).unwrap();
            assert!((a - b).abs() < 1e-6, "n={n} R={r}: {a} vs {b}");
        }
    }

    #[test]
    fn rate_above_capacity_gives_full_latency() {
        let ch = ChannelParams::from_snr(1.0, 1.0).unwrap(); // C = 0.5
        let m = EarlyDetectModel::new(ch, 2000, 0.8, 16).unwrap();
        let v = average_latency(&m).unwrap();
        assert!(v > 1.0 - 1e-6, "{v}");
    }

    #[test]
    fn checkpoint_examples() {
        assert_eq!(checkpoint_latency_from_errors(&[1.0], &[1e-6]).unwrap(), 1.0);
        let v = checkpoint_latency_from_errors(&[0.5, 1.0], &[0.086, 1e-6]).unwrap();
        assert!((v - 0.543).abs() < 1e-3, "{v}");
        assert!(checkpoint_latency_from_errors(&[1.0, 0.5], &[0.1, 0.2]).is_err());
        assert!(checkpoint_latency(&[0.5, 0.5], 1.0, 0.5, 10).is_err());
    }

    #[test]
    fn fine_checkpoint_grid_converges_to_integral() {
        let m = table_model(300, 0.5);
        let grid: Vec<f64> = (1..=10_000).map(|i| i as f64 / 10_000.0).collect();
        let v = checkpoint_latency(&grid, m.channel.power, m.rate, m.blocklength).unwrap();
        let a = average_latency(&m).unwrap();
        assert!((v - a).abs() < 1e-3, "{v} vs {a}");
    }

    #[test]
    fn grid_validation() {
        let mut m = table_model(150, 0.5);
        m.tau_grid = vec![0.5, 0.4, 1.0];
        assert!(stopping_density(&m).is_err());
        m.tau_grid = vec![0.5, 0.9];
        assert!(stopping_density(&m).is_err());
        m.tau_grid = vec![0.25, 0.5, 1.0];
        let d = stopping_density(&m).unwrap();
        assert!(d.density.iter().all(|&x| x >= 0.0));
        assert_eq!(d.point_mass_t, m.tail_mass_at_t);
    }
}
