//! Finite-blocklength quantities for the real AWGN channel under the normal
//! approximation: capacity, dispersion, the maximal code size bound and the
//! solvers built on it (minimal blocklength, minimal latency).
//!
//! Logs are base 2 throughout. Residual terms of the normal approximation
//! (`O(1)`) are dropped.

use std::f64::consts::{LN_2, LOG2_E};

use serde::{Deserialize, Serialize};

use crate::error::{check_nonneg, check_positive, check_probability, domain, LatError, Result};
use crate::special::{q_function, q_inv};

/// Default upper limit for blocklength searches.
pub const DEFAULT_N_MAX: f64 = 1e8;

/// Noise-normalized AWGN link: received power `P`, symbol duration `T` and an
/// optional bandwidth `W` tied to `T = 1 / (2W)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub power: f64,
    pub symbol_duration: f64,
    pub bandwidth: Option<f64>,
}

impl ChannelParams {
    pub fn new(power: f64, symbol_duration: f64) -> Result<Self> {
        check_nonneg("power", power)?;
        check_positive("symbol duration", symbol_duration)?;
        Ok(Self { power, symbol_duration, bandwidth: None })
    }

    /// Builds the link from a bandwidth, with `T = 1 / (2W)`.
    pub fn with_bandwidth(power: f64, bandwidth: f64) -> Result<Self> {
        check_positive("bandwidth", bandwidth)?;
        let mut p = Self::new(power, 0.5 / bandwidth)?;
        p.bandwidth = Some(bandwidth);
        Ok(p)
    }

    /// Builds the link from the per-symbol SNR `rho = P T`.
    pub fn from_snr(rho: f64, symbol_duration: f64) -> Result<Self> {
        check_positive("symbol duration", symbol_duration)?;
        check_nonneg("rho", rho)?;
        Self::new(rho / symbol_duration, symbol_duration)
    }

    pub fn validate(&self) -> Result<()> {
        check_nonneg("power", self.power)?;
        check_positive("symbol duration", self.symbol_duration)?;
        if let Some(w) = self.bandwidth {
            check_positive("bandwidth", w)?;
            let t = 0.5 / w;
            if (t - self.symbol_duration).abs() > 1e-12 * self.symbol_duration {
                return domain(format!(
                    "symbol duration {} inconsistent with bandwidth {} (expected {})",
                    self.symbol_duration, w, t
                ));
            }
        }
        Ok(())
    }

    /// Per-symbol SNR `rho = P T`.
    pub fn rho(&self) -> f64 {
        self.power * self.symbol_duration
    }
}

/// An `(n, k, eps)` code in the finite-blocklength regime. `M = 2^k` is never
/// materialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeSpec {
    pub blocklength: u64,
    pub info_bits: u64,
    pub target_error: f64,
    pub capacity_fraction: Option<f64>,
}

impl CodeSpec {
    pub fn new(blocklength: u64, info_bits: u64, target_error: f64) -> Result<Self> {
        if blocklength == 0 || info_bits == 0 {
            return domain("blocklength and info bits must be positive");
        }
        check_probability("target error", target_error)?;
        Ok(Self { blocklength, info_bits, target_error, capacity_fraction: None })
    }

    pub fn with_capacity_fraction(mut self, eta: f64) -> Result<Self> {
        check_probability("capacity fraction", eta)?;
        self.capacity_fraction = Some(eta);
        Ok(self)
    }

    /// Bits per channel use, `k / n`.
    pub fn rate(&self) -> f64 {
        self.info_bits as f64 / self.blocklength as f64
    }

    /// `M = 2^k` when it fits in 64 bits.
    pub fn code_size(&self) -> Option<u64> {
        (self.info_bits <= 62).then(|| 1u64 << self.info_bits)
    }
}

/// Selects the `c log2 n` correction of the achievability bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerConstraintKind {
    /// Equal- or maximal-power constraint, `c = 1/2`.
    #[default]
    EqualOrMaximal,
    /// Average-power constraint, `c = 3/2`.
    Average,
}

impl PowerConstraintKind {
    pub fn log_coefficient(self) -> f64 {
        match self {
            Self::EqualOrMaximal => 0.5,
            Self::Average => 1.5,
        }
    }
}

/// Shannon capacity `1/2 log2(1 + rho)` in bits per channel use.
pub fn capacity(rho: f64) -> Result<f64> {
    check_nonneg("rho", rho)?;
    Ok(0.5 * rho.ln_1p() * LOG2_E)
}

/// Channel dispersion in bits^2 per channel use.
pub fn dispersion(rho: f64) -> Result<f64> {
    check_nonneg("rho", rho)?;
    Ok(dispersion_unchecked(rho))
}

fn capacity_unchecked(rho: f64) -> f64 {
    0.5 * rho.ln_1p() * LOG2_E
}

fn dispersion_unchecked(rho: f64) -> f64 {
    let r1 = rho + 1.0;
    0.5 * rho * (rho + 2.0) / (r1 * r1) * LOG2_E * LOG2_E
}

/// `d C / d rho`
pub(crate) fn capacity_slope(rho: f64) -> f64 {
    0.5 * LOG2_E / (1.0 + rho)
}

/// `d V / d rho`
pub(crate) fn dispersion_slope(rho: f64) -> f64 {
    LOG2_E * LOG2_E / (1.0 + rho).powi(3)
}

/// Normal approximation of `log2 M*(n, eps)` with the `O(1)` residual dropped.
/// `n` may be real-valued so that latency solvers can bisect on it.
pub fn max_log_code_size(n: f64, eps: f64, rho: f64, kind: PowerConstraintKind) -> Result<f64> {
    if !(n >= 1.0) || !n.is_finite() {
        return domain(format!("blocklength must be >= 1, got {n}"));
    }
    check_probability("eps", eps)?;
    check_nonneg("rho", rho)?;
    let q = q_inv(eps)?;
    Ok(log_code_size_with(n, q, rho, kind))
}

fn log_code_size_with(n: f64, q: f64, rho: f64, kind: PowerConstraintKind) -> f64 {
    n * capacity_unchecked(rho) - (n * dispersion_unchecked(rho)).sqrt() * q
        + kind.log_coefficient() * n.log2()
}

/// `gamma = (C - R + log2(n) / 2n) / sqrt(V / n)`, the argument of `Q` in the
/// error-rate approximation. `-inf` at `rho = 0`.
pub(crate) fn error_exponent_argument(rho: f64, rate: f64, n: f64) -> f64 {
    if rho <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let v = dispersion_unchecked(rho);
    let num = capacity_unchecked(rho) - rate + n.log2() / (2.0 * n);
    num / (v / n).sqrt()
}

/// Block error rate `eps*(rho, R, n)` of the best `(n, 2^{nR})` code.
pub fn block_error_rate(rho: f64, rate: f64, n: u64) -> Result<f64> {
    check_nonneg("rho", rho)?;
    check_positive("rate", rate)?;
    if n == 0 {
        return domain("blocklength must be >= 1");
    }
    Ok(block_error_rate_real(rho, rate, n as f64))
}

pub(crate) fn block_error_rate_real(rho: f64, rate: f64, n: f64) -> f64 {
    if rho <= 0.0 {
        return 1.0;
    }
    q_function(error_exponent_argument(rho, rate, n))
}

/// Maximal achievable coding rate `R*(n, eps, rho)` in bits per channel use.
pub fn achievable_rate(n: u64, eps: f64, rho: f64) -> Result<f64> {
    if n == 0 {
        return domain("blocklength must be >= 1");
    }
    achievable_rate_real(n as f64, eps, rho)
}

pub fn achievable_rate_real(n: f64, eps: f64, rho: f64) -> Result<f64> {
    if !(n >= 1.0) {
        return domain(format!("blocklength must be >= 1, got {n}"));
    }
    check_probability("eps", eps)?;
    check_nonneg("rho", rho)?;
    let q = q_inv(eps)?;
    Ok(capacity_unchecked(rho) - (dispersion_unchecked(rho) / n).sqrt() * q + n.log2() / (2.0 * n))
}

/// Minimal blocklength to reach a fraction `eta` of capacity at error `eps`.
pub fn min_blocklength(eps: f64, eta: f64, rho: f64) -> Result<f64> {
    check_probability("eps", eps)?;
    check_probability("eta", eta)?;
    check_nonneg("rho", rho)?;
    if rho == 0.0 {
        return domain("capacity is zero at rho = 0");
    }
    let q = q_inv(eps)? / (1.0 - eta);
    let c = capacity_unchecked(rho);
    Ok(q * q * dispersion_unchecked(rho) / (c * c))
}

/// Result of a minimal-latency search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinLatency {
    /// Real-valued blocklength at which the bound meets `k` exactly.
    pub blocklength: f64,
    /// `ceil(blocklength)`, the number of whole channel uses.
    pub symbols: u64,
    /// `blocklength * T`
    pub latency: f64,
    /// `symbols * T`
    pub latency_symbols: f64,
}

/// Smallest real `n >= 1` with `max_log_code_size(n) >= k`.
pub fn min_blocklength_for_bits(
    k: f64,
    rho: f64,
    eps: f64,
    kind: PowerConstraintKind,
    n_max: f64,
) -> Result<f64> {
    check_positive("k", k)?;
    check_nonneg("rho", rho)?;
    check_probability("eps", eps)?;
    let q = q_inv(eps)?;
    let f = |n: f64| log_code_size_with(n, q, rho, kind) - k;
    if f(1.0) >= 0.0 {
        return Ok(1.0);
    }
    if rho == 0.0 {
        return Err(LatError::Infeasible(format!("no blocklength carries {k} bits at rho = 0")));
    }
    // With s = sqrt(n), n f'(n) = C s^2 - (sqrt(V) q / 2) s + c / ln 2: f rises,
    // falls, then rises again. The first crossing is either before the local
    // maximum or after the local minimum.
    let c = capacity_unchecked(rho);
    let a = 0.5 * dispersion_unchecked(rho).sqrt() * q;
    let b = kind.log_coefficient() / LN_2;
    let disc = a * a - 4.0 * c * b;
    if disc > 0.0 {
        let s_max = (a - disc.sqrt()) / (2.0 * c);
        let n_peak = s_max * s_max;
        if n_peak > 1.0 && f(n_peak) >= 0.0 {
            return Ok(bisect(&f, 1.0, n_peak));
        }
        let s_min = (a + disc.sqrt()) / (2.0 * c);
        let n_trough = (s_min * s_min).max(1.0);
        return grow_and_bisect(&f, n_trough, n_max, k);
    }
    grow_and_bisect(&f, 1.0, n_max, k)
}

fn grow_and_bisect<F: Fn(f64) -> f64>(f: &F, lo: f64, n_max: f64, k: f64) -> Result<f64> {
    let mut lo = lo;
    let mut hi = (2.0 * lo).max(2.0);
    while f(hi) < 0.0 {
        if hi >= n_max {
            return Err(LatError::Infeasible(format!(
                "{k} bits need more than n_max = {n_max:e} channel uses"
            )));
        }
        lo = hi;
        hi = (2.0 * hi).min(n_max);
    }
    Ok(bisect(f, lo, hi))
}

/// Finds the crossing of `f` in `[lo, hi]` with `f(lo) < 0 <= f(hi)`.
fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    hi
}

/// Minimal latency `L = n T` needed to carry `k` bits at power `P`.
pub fn min_latency(k: u64, power: f64, symbol_duration: f64, eps: f64, kind: PowerConstraintKind) -> Result<MinLatency> {
    min_latency_with_limit(k, power, symbol_duration, eps, kind, DEFAULT_N_MAX)
}

pub fn min_latency_with_limit(
    k: u64,
    power: f64,
    symbol_duration: f64,
    eps: f64,
    kind: PowerConstraintKind,
    n_max: f64,
) -> Result<MinLatency> {
    if k == 0 {
        return domain("k must be >= 1");
    }
    check_positive("power", power)?;
    check_positive("symbol duration", symbol_duration)?;
    let rho = power * symbol_duration;
    let n = min_blocklength_for_bits(k as f64, rho, eps, kind, n_max)?;
    Ok(latency_from_blocklength(n, symbol_duration))
}

pub(crate) fn latency_from_blocklength(n: f64, symbol_duration: f64) -> MinLatency {
    // guard against a bisection endpoint sitting a few ulps above an integer
    let symbols = (n * (1.0 - 4.0 * f64::EPSILON)).ceil().max(1.0) as u64;
    MinLatency {
        blocklength: n,
        symbols,
        latency: n * symbol_duration,
        latency_symbols: symbols as f64 * symbol_duration,
    }
}

/// Derivative of `max_log_code_size` (equal/maximal power) with respect to `n`.
pub fn marginal_rate(n: f64, eps: f64, rho: f64) -> Result<f64> {
    if !(n > 0.0) || !n.is_finite() {
        return domain(format!("n must be > 0, got {n}"));
    }
    check_probability("eps", eps)?;
    check_nonneg("rho", rho)?;
    let q = q_inv(eps)?;
    let coeff = PowerConstraintKind::EqualOrMaximal.log_coefficient();
    Ok(capacity_unchecked(rho) - 0.5 * (dispersion_unchecked(rho) / n).sqrt() * q + coeff / (n * LN_2))
}

/// SNR `rho` at which `block_error_rate(rho, R, n) = eps`.
pub fn snr_for_error(rate: f64, n: u64, eps: f64) -> Result<f64> {
    check_positive("rate", rate)?;
    check_probability("eps", eps)?;
    if n == 0 {
        return domain("blocklength must be >= 1");
    }
    let n = n as f64;
    let g = |rho: f64| block_error_rate_real(rho, rate, n) - eps;
    let (mut lo, mut hi) = (1e-12_f64, 1.0_f64);
    while g(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e15 {
            return Err(LatError::Infeasible(format!("no SNR reaches eps = {eps} at R = {rate}")));
        }
    }
    if g(lo) <= 0.0 {
        return Ok(lo);
    }
    for _ in 0..300 {
        let mid = (lo * hi).sqrt();
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_examples() {
        assert_eq!(capacity(0.0).unwrap(), 0.0);
        assert!((capacity(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((capacity(3.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(capacity(-1.0).is_err());
        assert!(capacity(f64::NAN).is_err());
        assert!(capacity(f64::INFINITY).is_err());
    }

    #[test]
    fn dispersion_examples() {
        assert_eq!(dispersion(0.0).unwrap(), 0.0);
        let expected = 50.0 * 102.0 / (101.0 * 101.0) * LOG2_E * LOG2_E;
        assert!((dispersion(100.0).unwrap() - expected).abs() < 1e-14);
        assert!((dispersion(100.0).unwrap() - 1.0405).abs() < 1e-3);
        let limit = LOG2_E * LOG2_E / 2.0;
        assert!((dispersion(1e9).unwrap() - limit).abs() < 1e-8);
        assert!((limit - 1.040_684).abs() < 1e-6);
    }

    #[test]
    fn code_size_examples() {
        let v = max_log_code_size(186.0, 1e-7, 2.5, PowerConstraintKind::EqualOrMaximal).unwrap();
        assert!((v - 103.0).abs() < 1.0, "{v}");
        assert_eq!(max_log_code_size(1.0, 0.5, 0.0, PowerConstraintKind::EqualOrMaximal).unwrap(), 0.0);
        assert!(max_log_code_size(10.0, 1.0, 1.0, PowerConstraintKind::Average).is_err());
        assert!(max_log_code_size(10.0, 0.0, 1.0, PowerConstraintKind::Average).is_err());
        let eq = max_log_code_size(500.0, 1e-3, 1.0, PowerConstraintKind::EqualOrMaximal).unwrap();
        let avg = max_log_code_size(500.0, 1e-3, 1.0, PowerConstraintKind::Average).unwrap();
        assert!((avg - eq - 500f64.log2()).abs() < 1e-10);
    }

    #[test]
    fn error_rate_limits() {
        assert_eq!(block_error_rate(0.0, 0.5, 100).unwrap(), 1.0);
        // rho chosen so that C(rho) = R - log2(n)/(2n)
        let n = 200u64;
        let r = 0.8;
        let target_c = r - (n as f64).log2() / (2.0 * n as f64);
        let rho = (2f64).powf(2.0 * target_c) - 1.0;
        assert!((block_error_rate(rho, r, n).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn anchor_error_rate_near_1e7() {
        let e = block_error_rate(2.5, 103.0 / 186.0, 186).unwrap();
        assert!(e > 1e-7 / 3.0 && e < 3e-7, "{e}");
    }

    #[test]
    fn min_blocklength_examples() {
        assert_eq!(min_blocklength(0.5, 0.9, 10.0).unwrap(), 0.0);
        let n = min_blocklength(1e-6, 0.9, 100.0).unwrap();
        assert!((n - 212.0).abs() < 1.0, "{n}");
        let a = min_blocklength(1e-5, 0.9, 5.0).unwrap();
        let b = min_blocklength(1e-5, 0.8, 5.0).unwrap();
        assert!((a / b - 4.0).abs() < 1e-12);
        assert!(min_blocklength(1e-3, 1.0, 1.0).is_err());
        assert!(min_blocklength(1e-3, 0.5, 0.0).is_err());
    }

    #[test]
    fn min_latency_anchor() {
        let ch = ChannelParams::with_bandwidth(0.0, 50e6).unwrap();
        let t = ch.symbol_duration;
        let power = 2.5 / t;
        let r = min_latency(103, power, t, 1e-7, PowerConstraintKind::EqualOrMaximal).unwrap();
        assert!((r.blocklength - 186.0).abs() <= 1.0, "{}", r.blocklength);
        assert!((r.latency - 1.86e-6).abs() / 1.86e-6 < 0.01);
        assert_eq!(r.symbols, 187);
    }

    #[test]
    fn min_latency_single_use_at_high_snr() {
        let r = min_latency(1, 1e6, 1.0, 1e-3, PowerConstraintKind::EqualOrMaximal).unwrap();
        assert_eq!(r.symbols, 1);
        assert_eq!(r.blocklength, 1.0);
    }

    #[test]
    fn min_latency_matches_integer_scan() {
        let (k, rho, eps) = (500u64, 10.0, 1e-7);
        let r = min_latency(k, rho, 1.0, eps, PowerConstraintKind::EqualOrMaximal).unwrap();
        let scan = (1u64..)
            .find(|&n| max_log_code_size(n as f64, eps, rho, PowerConstraintKind::EqualOrMaximal).unwrap() >= k as f64)
            .unwrap();
        assert_eq!(r.symbols, scan);
    }

    #[test]
    fn min_latency_infeasible() {
        let err = min_latency_with_limit(10_000, 1e-6, 1.0, 1e-7, PowerConstraintKind::EqualOrMaximal, 1e4)
            .unwrap_err();
        assert!(matches!(err, LatError::Infeasible(_)));
        assert!(min_latency(0, 1.0, 1.0, 1e-3, PowerConstraintKind::EqualOrMaximal).is_err());
    }

    #[test]
    fn marginal_rate_limits() {
        let c = capacity(2.5).unwrap();
        assert!((marginal_rate(1e14, 1e-7, 2.5).unwrap() - c).abs() < 1e-6);
        assert!(marginal_rate(0.0, 1e-3, 1.0).is_err());
    }

    #[test]
    fn marginal_rate_flattens_at_ten_thousand_symbols() {
        let c = capacity(2.5).unwrap();
        let gap = (c - marginal_rate(1e4, 1e-7, 2.5).unwrap()).abs() / c;
        assert!(gap < 0.015, "relative gap to capacity {gap}");
    }

    #[test]
    fn marginal_rate_central_difference() {
        let kind = PowerConstraintKind::EqualOrMaximal;
        let (n, eps, rho) = (500.0, 1e-5, 3.0);
        let h = 1e-3;
        let fd = (max_log_code_size(n + h, eps, rho, kind).unwrap()
            - max_log_code_size(n - h, eps, rho, kind).unwrap())
            / (2.0 * h);
        let d = marginal_rate(n, eps, rho).unwrap();
        assert!(((d - fd) / d).abs() < 1e-6, "{d} vs {fd}");
    }

    #[test]
    fn snr_solver_round_trip() {
        let rho = snr_for_error(0.5, 150, 1e-9).unwrap();
        let e = block_error_rate(rho, 0.5, 150).unwrap();
        assert!(((e - 1e-9) / 1e-9).abs() < 1e-9, "{e}");
    }

    #[test]
    fn channel_params_validation() {
        let ch = ChannelParams::with_bandwidth(1.0, 50e6).unwrap();
        assert!((ch.symbol_duration - 1e-8).abs() < 1e-20);
        ch.validate().unwrap();
        let bad = ChannelParams { bandwidth: Some(10.0), ..ch };
        assert!(bad.validate().is_err());
        assert!(ChannelParams::new(-1.0, 1.0).is_err());
        assert!(ChannelParams::new(1.0, 0.0).is_err());
        assert!((ChannelParams::from_snr(2.5, 1e-8).unwrap().rho() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn code_spec_rate() {
        let c = CodeSpec::new(186, 103, 1e-7).unwrap();
        assert_eq!(c.rate(), 103.0 / 186.0);
        assert_eq!(c.code_size(), None);
        assert_eq!(CodeSpec::new(10, 10, 1e-3).unwrap().code_size(), Some(1024));
        assert!(CodeSpec::new(10, 10, 1.0).is_err());
        assert!(CodeSpec::new(0, 10, 0.1).is_err());
    }
}
