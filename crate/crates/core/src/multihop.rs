//! Multi-hop latency planning.
//!
//! Amplify-and-forward (AF) relays rescale what they receive, so noise
//! accumulates along the chain and the end-to-end SNR falls with the number
//! of hops `h`. Decode-and-forward (DF) relays regenerate the message, paying
//! one full hop latency per relay; splitting the message into `q` parts lets
//! the hops pipeline. After an early decision, an AF relay can also steer its
//! output away from the wrong codeword (pre-compensation).

use serde::{Deserialize, Serialize};

use crate::early::{average_latency, EarlyDetectModel};
use crate::error::{check_positive, check_probability, domain, LatError, Result};
use crate::fbl::{min_latency, ChannelParams, MinLatency, PowerConstraintKind};
use crate::seqdetect::{
    derive_seed, par_map_trials, run_wald_sprt, transmit, Codebook, DetectorConfig,
};

/// Grid points of the early-detection model used by [`df_early_latency`].
const EARLY_GRID: usize = 64;

/// Chain of `hops` equal hops with per-symbol SNR `rho` per hop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopSpec {
    pub hops: u32,
    pub rho: f64,
}

impl HopSpec {
    pub fn new(hops: u32, rho: f64) -> Result<Self> {
        if hops == 0 {
            return domain("need at least one hop");
        }
        check_positive("rho", rho)?;
        Ok(Self { hops, rho })
    }

    /// AF power gain `G = P / (P + 1)`.
    pub fn gain(&self) -> f64 {
        self.rho / (self.rho + 1.0)
    }
}

/// End-to-end SNR of `h` AF hops: `G^{h-1} P (1 - G) / (1 - G^h)`.
pub fn af_overall_snr(power: f64, hops: u32) -> Result<f64> {
    let spec = HopSpec::new(hops, power)?;
    if hops == 1 {
        return Ok(power);
    }
    let g = spec.gain();
    // ln G = -ln(1 + 1/P); expm1 keeps 1 - G^h accurate when G^h is near 1
    let one_minus_gh = -libm::expm1(-(hops as f64) * libm::log1p(1.0 / power));
    Ok(g.powi(hops as i32 - 1) * power / (power + 1.0) / one_minus_gh)
}

/// Oracle for [`af_overall_snr`]: follows signal and noise power hop by hop,
/// each relay scaling its input to output power `P`.
pub fn af_snr_recursion(power: f64, hops: u32) -> Result<f64> {
    HopSpec::new(hops, power)?;
    let (mut signal, mut noise) = (power, 1.0);
    for _ in 1..hops {
        let gain = power / (signal + noise);
        signal *= gain;
        noise = noise * gain + 1.0;
    }
    Ok(signal / noise)
}

/// Minimal latency over `h` AF hops: the single-hop bound at the end-to-end SNR.
pub fn af_min_latency(k: u64, power: f64, symbol_duration: f64, eps: f64, hops: u32) -> Result<MinLatency> {
    check_positive("symbol duration", symbol_duration)?;
    let rho = af_overall_snr(power * symbol_duration, hops)?;
    min_latency(k, rho / symbol_duration, symbol_duration, eps, PowerConstraintKind::EqualOrMaximal)
}

/// DF latency: one full hop latency per hop.
pub fn df_latency(hop_latency: f64, hops: u32) -> Result<f64> {
    check_positive("hop latency", hop_latency)?;
    if hops == 0 {
        return domain("need at least one hop");
    }
    Ok(hop_latency * hops as f64)
}

/// How the end-to-end error target is shared among parts and hops.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorBudget {
    /// `eps / (q h)`: union bound over every part on every hop.
    #[default]
    UnionBound,
    /// `eps` per part and hop (sensitivity runs).
    Naive,
}

impl ErrorBudget {
    pub fn per_part(self, eps: f64, parts: u32, hops: u32) -> f64 {
        match self {
            Self::UnionBound => eps / (parts as f64 * hops as f64),
            Self::Naive => eps,
        }
    }
}

/// Message split into `q` parts pipelined over `h` DF hops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub parts: u32,
    pub hops: u32,
    /// `ceil(k / q)`
    pub part_bits: u64,
    pub eps_part: f64,
    pub part: MinLatency,
    /// `L_q (q + h - 1)`
    pub total_latency: f64,
    /// Same, with whole channel uses per part.
    pub total_latency_symbols: f64,
}

pub fn split_latency(
    k: u64,
    power: f64,
    symbol_duration: f64,
    eps: f64,
    hops: u32,
    parts: u32,
    budget: ErrorBudget,
) -> Result<SplitPlan> {
    check_probability("eps", eps)?;
    if hops == 0 || parts == 0 {
        return domain("need at least one hop and one part");
    }
    if k < parts as u64 {
        return domain(format!("cannot split {k} bits into {parts} parts"));
    }
    let part_bits = k.div_ceil(parts as u64);
    let eps_part = budget.per_part(eps, parts, hops);
    let part = min_latency(part_bits, power, symbol_duration, eps_part, PowerConstraintKind::EqualOrMaximal)?;
    let stages = (parts + hops - 1) as f64;
    Ok(SplitPlan {
        parts,
        hops,
        part_bits,
        eps_part,
        part,
        total_latency: part.latency * stages,
        total_latency_symbols: part.latency_symbols * stages,
    })
}

/// Normalized early-detection latency `E[tau] / T` of one part of `plan`.
pub fn part_early_fraction(plan: &SplitPlan, rho: f64) -> Result<f64> {
    let n = plan.part.symbols;
    let channel = ChannelParams::from_snr(rho, 1.0)?;
    let model = EarlyDetectModel::new(channel, n, plan.part_bits as f64 / n as f64, EARLY_GRID)?;
    average_latency(&model)
}

/// DF latency with early detection.
///
/// Without splitting every hop stops early, giving `h e L`, where `e` is the
/// normalized early latency of one hop. With `q > 1` parts the pipeline still
/// waits for the last part, so only the final part's last hop gains:
/// `L_q (q + h - 2) + e L_q`.
pub fn df_early_latency(
    k: u64,
    power: f64,
    symbol_duration: f64,
    eps: f64,
    hops: u32,
    parts: u32,
    budget: ErrorBudget,
) -> Result<f64> {
    let plan = split_latency(k, power, symbol_duration, eps, hops, parts, budget)?;
    let e = part_early_fraction(&plan, power * symbol_duration)?;
    let lq = plan.part.latency_symbols;
    Ok(if parts == 1 {
        hops as f64 * e * lq
    } else {
        lq * (parts + hops - 2) as f64 + e * lq
    })
}

/// AF relay bookkeeping for one codeword.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelayState {
    /// Full-symbol observation `X + N`.
    pub y_r: Vec<f64>,
    pub decided: Option<u64>,
    pub x_r: Option<Vec<f64>>,
    pub compensation: Option<Vec<f64>>,
}

impl RelayState {
    pub fn new(y_r: Vec<f64>) -> Self {
        Self { y_r, decided: None, x_r: None, compensation: None }
    }

    pub fn with_decision(mut self, message: u64) -> Self {
        self.decided = Some(message);
        self
    }
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Plain AF output `sqrt(G) Y_R`, scaled down to energy `E` when it exceeds it.
pub fn af_plain_output(y_r: &[f64], gain: f64, energy: f64) -> Vec<f64> {
    let mut x: Vec<f64> = y_r.iter().map(|y| gain.sqrt() * y).collect();
    let e = norm_sq(&x);
    if e > energy {
        let s = (energy / e).sqrt();
        x.iter_mut().for_each(|v| *v *= s);
    }
    x
}

fn binary_pair(codebook: &Codebook, decided: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if codebook.size() != 2 {
        return Err(LatError::Unsupported("pre-compensation is defined for binary codebooks".into()));
    }
    if decided > 1 {
        return domain(format!("message {decided} outside a binary codebook"));
    }
    Ok((codebook.codeword(decided)?, codebook.codeword(1 - decided)?))
}

/// Pre-compensated AF output after an early decision.
///
/// The plain output `sqrt(G) Y_R` (clipped to energy `E = n P T`) is split
/// into its component `a d` along the unit decision axis
/// `d = (X^m - X^m') / |X^m - X^m'|` and the orthogonal rest `w`. The relay
/// keeps `w` and spends the remaining power along `+d`, so
/// `X_R = w + sqrt(E - |w|^2) d`. This never moves the output closer to the
/// wrong codeword of an equal-energy pair and is strictly farther whenever
/// the noise pulled it toward `X^m'`.
pub fn af_precompensate(state: RelayState, codebook: &Codebook, power: f64, symbol_duration: f64) -> Result<RelayState> {
    let decided = state
        .decided
        .ok_or_else(|| LatError::Precondition("relay has not decided yet".into()))?;
    check_positive("power", power)?;
    check_positive("symbol duration", symbol_duration)?;
    let (xm, xw) = binary_pair(codebook, decided)?;
    if state.y_r.len() != xm.len() {
        return domain("observation and codewords differ in length");
    }
    let rho = power * symbol_duration;
    let energy = xm.len() as f64 * rho;
    let plain = af_plain_output(&state.y_r, rho / (rho + 1.0), energy);
    let sep = distance(&xm, &xw);
    let d: Vec<f64> = xm.iter().zip(&xw).map(|(a, b)| (a - b) / sep).collect();
    let a: f64 = plain.iter().zip(&d).map(|(x, y)| x * y).sum();
    let w: Vec<f64> = plain.iter().zip(&d).map(|(x, y)| x - a * y).collect();
    let b = (energy - norm_sq(&w)).max(0.0).sqrt();
    let x_r: Vec<f64> = w.iter().zip(&d).map(|(w, d)| w + b * d).collect();
    let compensation = x_r.iter().zip(&plain).map(|(x, p)| x - p).collect();
    Ok(RelayState { x_r: Some(x_r), compensation: Some(compensation), ..state })
}

/// Generalization to codebooks of any size: projected gradient
/// ascent of the distance to the nearest wrong codeword on the sphere
/// `|X_R|^2 = E`, started from the plain AF output.
pub mod experimental {
    use super::*;

    #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
    pub struct AscentConfig {
        pub steps: usize,
        pub step_size: f64,
    }

    impl Default for AscentConfig {
        fn default() -> Self {
            Self { steps: 200, step_size: 0.05 }
        }
    }

    /// Output and the final distance to the nearest wrong codeword.
    pub fn projected_ascent(
        y_r: &[f64],
        codebook: &Codebook,
        decided: u64,
        power: f64,
        symbol_duration: f64,
        config: AscentConfig,
    ) -> Result<(Vec<f64>, f64)> {
        check_positive("power", power)?;
        check_positive("step size", config.step_size)?;
        let rho = power * symbol_duration;
        let energy = y_r.len() as f64 * rho;
        let wrong: Vec<Vec<f64>> = (0..codebook.size())
            .filter(|&m| m != decided)
            .map(|m| codebook.codeword(m))
            .collect::<Result<_>>()?;
        if wrong.is_empty() {
            return domain("codebook needs a second codeword");
        }
        let project = |x: &mut Vec<f64>| {
            let s = (energy / norm_sq(x).max(f64::MIN_POSITIVE)).sqrt();
            x.iter_mut().for_each(|v| *v *= s);
        };
        let nearest = |x: &[f64]| {
            wrong
                .iter()
                .map(|c| (distance(x, c), c))
                .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
                .unwrap()
        };
        let mut x = af_plain_output(y_r, rho / (rho + 1.0), energy);
        project(&mut x);
        let step = config.step_size * energy.sqrt();
        for _ in 0..config.steps {
            let (dist, c) = nearest(&x);
            if dist == 0.0 {
                break;
            }
            let grad: Vec<f64> = x.iter().zip(c).map(|(a, b)| (a - b) / dist).collect();
            x.iter_mut().zip(&grad).for_each(|(v, g)| *v += step * g);
            project(&mut x);
        }
        let d = nearest(&x).0;
        Ok((x, d))
    }
}

/// One cell of [`compare_strategies`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub strategy: String,
    pub h: u32,
    pub q: u32,
    pub k: u64,
    pub snr_db: f64,
    pub eps: f64,
    /// Latency in symbol durations; `None` when the cell is infeasible.
    pub latency_symbols: Option<f64>,
    /// Latency over the single-hop unsplit latency.
    pub latency_normalized: Option<f64>,
    pub note: Option<String>,
}

/// AF, DF, split DF (`q in {1, 2, 4, 8}`), DF with early detection and AF
/// with pre-compensation, ranked by latency (infeasible cells last).
///
/// The AF pre-compensation cell models relays that forward live and, once
/// decided, re-steer their output to full power: the destination then sees
/// one hop at the per-hop SNR, with the error target split over the hops.
/// This is an optimistic model, not a bound.
pub fn compare_strategies(
    k: u64,
    power: f64,
    symbol_duration: f64,
    eps: f64,
    hops: u32,
    budget: ErrorBudget,
) -> Result<Vec<StrategyRow>> {
    check_positive("symbol duration", symbol_duration)?;
    let rho = power * symbol_duration;
    let single = min_latency(k, power, symbol_duration, eps, PowerConstraintKind::EqualOrMaximal)?.latency;
    let row = |strategy: &str, q: u32, value: Result<f64>| {
        let (latency, note) = match value {
            Ok(v) => (Some(v / symbol_duration), None),
            Err(e) => (None, Some(e.to_string())),
        };
        StrategyRow {
            strategy: strategy.into(),
            h: hops,
            q,
            k,
            snr_db: 10.0 * rho.log10(),
            eps,
            latency_symbols: latency,
            latency_normalized: latency.map(|l| l * symbol_duration / single),
            note,
        }
    };
    let mut rows = vec![row("af", 1, af_min_latency(k, power, symbol_duration, eps, hops).map(|m| m.latency))];
    for q in [1u32, 2, 4, 8] {
        let name = if q == 1 { "df" } else { "split_df" };
        rows.push(row(name, q, split_latency(k, power, symbol_duration, eps, hops, q, budget).map(|p| p.total_latency)));
    }
    for q in [1u32, 2, 4, 8] {
        rows.push(row("df_early", q, df_early_latency(k, power, symbol_duration, eps, hops, q, budget)));
    }
    let pc_eps = budget.per_part(eps, 1, hops);
    rows.push(row(
        "af_precomp",
        1,
        min_latency(k, power, symbol_duration, pc_eps, PowerConstraintKind::EqualOrMaximal).map(|m| m.latency),
    ));
    rows.sort_by(|a, b| match (a.latency_symbols, b.latency_symbols) {
        (Some(x), Some(y)) => x.partial_cmp(&y).unwrap(),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(rows)
}

/// Outcome of one two-hop trial with paired plain and pre-compensated relays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoHopTrial {
    pub relay_correct: bool,
    pub relay_stop_fraction: f64,
    pub plain_distance: f64,
    pub precomp_distance: f64,
    pub plain_correct: bool,
    pub precomp_correct: bool,
    /// `| |X_R|^2 - E | / E` of the pre-compensated output.
    pub energy_error: f64,
}

/// Aggregate of [`two_hop_campaign`]; counts are integers so results do not
/// depend on the worker count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoHopReport {
    pub trials: u64,
    pub rho: f64,
    pub relay_errors: u64,
    pub mean_relay_stop_fraction: f64,
    pub plain_errors: u64,
    pub precomp_errors: u64,
    /// Correctly decided trials where pre-compensation ended closer to the
    /// wrong codeword than plain AF.
    pub dominance_violations: u64,
    pub max_energy_error: f64,
}

/// One trial: hop 1 to the relay (Wald SPRT early decision, `u` increments),
/// then hop 2 to the destination with the same noise for both relay outputs.
pub fn two_hop_trial(codebook: &Codebook, u: usize, config: &DetectorConfig, trial_seed: u64) -> Result<TwoHopTrial> {
    if codebook.size() != 2 {
        return Err(LatError::Unsupported("the two-hop campaign uses a binary codebook".into()));
    }
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, 0));
    let message = rng.random_range(0..2u64);
    let (x0, x1) = (codebook.codeword(0)?, codebook.codeword(1)?);
    let mut stream = transmit(codebook, message, u, derive_seed(trial_seed, 1))?;
    let decision = run_wald_sprt(&mut stream, &x0, &x1, config)?;
    while stream.advance() {}
    let scale = 1.0 / (u as f64).sqrt();
    let y_r: Vec<f64> = stream.cumulative().iter().map(|y| y * scale).collect();
    let decided = decision.decided_message.unwrap_or(0);
    let rho = codebook.rho();
    let energy = codebook.energy();
    let plain = af_plain_output(&y_r, rho / (rho + 1.0), energy);
    let state = af_precompensate(RelayState::new(y_r).with_decision(decided), codebook, rho, 1.0)?;
    let pc = state.x_r.expect("pre-compensation sets the output");
    let wrong = if message == 0 { &x1 } else { &x0 };
    let mut noise_rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, 2));
    let noise: Vec<f64> = (0..pc.len()).map(|_| StandardNormal.sample(&mut noise_rng)).collect();
    let detect = |x: &[f64]| -> u64 {
        let y: Vec<f64> = x.iter().zip(&noise).map(|(a, n)| a + n).collect();
        if distance(&y, &x0) <= distance(&y, &x1) {
            0
        } else {
            1
        }
    };
    Ok(TwoHopTrial {
        relay_correct: decided == message,
        relay_stop_fraction: decision.stop_fraction,
        plain_distance: distance(&plain, wrong),
        precomp_distance: distance(&pc, wrong),
        plain_correct: detect(&plain) == message,
        precomp_correct: detect(&pc) == message,
        energy_error: (norm_sq(&pc) - energy).abs() / energy,
    })
}

pub fn two_hop_campaign(
    codebook: &Codebook,
    u: usize,
    config: &DetectorConfig,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<TwoHopReport> {
    if trials == 0 {
        return domain("need at least one trial");
    }
    let results = par_map_trials(trials, workers, |i| two_hop_trial(codebook, u, config, derive_seed(seed, i)))?;
    let results: Vec<TwoHopTrial> = results.into_iter().collect::<Result<_>>()?;
    let count = |f: &dyn Fn(&TwoHopTrial) -> bool| results.iter().filter(|t| f(t)).count() as u64;
    // stop fractions are multiples of 1/u, so this sum is exact in any order
    let stop_sum: u64 = results.iter().map(|t| (t.relay_stop_fraction * u as f64).round() as u64).sum();
    Ok(TwoHopReport {
        trials,
        rho: codebook.rho(),
        relay_errors: count(&|t| !t.relay_correct),
        mean_relay_stop_fraction: stop_sum as f64 / (trials as f64 * u as f64),
        plain_errors: count(&|t| !t.plain_correct),
        precomp_errors: count(&|t| !t.precomp_correct),
        dominance_violations: count(&|t| t.relay_correct && t.precomp_distance < t.plain_distance - 1e-12),
        max_energy_error: results.iter().map(|t| t.energy_error).fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EQ: PowerConstraintKind = PowerConstraintKind::EqualOrMaximal;

    #[test]
    fn af_snr_matches_recursion() {
        assert_eq!(af_overall_snr(3.0, 1).unwrap(), 3.0);
        assert!((af_overall_snr(1.0, 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        for p in [0.1, 1.0, 10.0, 100.0] {
            let mut prev = f64::INFINITY;
            for h in 1..=50 {
                let a = af_overall_snr(p, h).unwrap();
                let b = af_snr_recursion(p, h).unwrap();
                assert!((a - b).abs() <= 1e-12 * b, "P={p} h={h}: {a} vs {b}");
                assert!(a < prev);
                prev = a;
            }
        }
        assert!(af_overall_snr(0.0, 2).is_err());
        assert!(af_overall_snr(1.0, 0).is_err());
    }

    #[test]
    fn af_latency_grows_with_hops() {
        let one = af_min_latency(200, 2.5, 1.0, 1e-7, 1).unwrap();
        let direct = min_latency(200, 2.5, 1.0, 1e-7, EQ).unwrap();
        assert_eq!(one, direct);
        let two = af_min_latency(200, 2.5, 1.0, 1e-7, 2).unwrap();
        let five = af_min_latency(200, 2.5, 1.0, 1e-7, 5).unwrap();
        assert!(two.latency > one.latency && five.symbols > two.symbols);
    }

    #[test]
    fn df_and_split_consistency() {
        assert_eq!(df_latency(10.0, 3).unwrap(), 30.0);
        assert_eq!(df_latency(4.0, 1).unwrap(), 4.0);
        for budget in [ErrorBudget::UnionBound, ErrorBudget::Naive] {
            let plan = split_latency(500, 10.0, 1.0, 1e-7, 3, 1, budget).unwrap();
            let direct = min_latency(500, 10.0, 1.0, plan.eps_part, EQ).unwrap();
            assert_eq!(plan.total_latency, df_latency(direct.latency, 3).unwrap());
        }
        let plan = split_latency(101, 10.0, 1.0, 1e-7, 2, 4, ErrorBudget::UnionBound).unwrap();
        assert_eq!(plan.part_bits, 26);
        assert_eq!(plan.eps_part, 1e-7 / 8.0);
        assert!(split_latency(3, 10.0, 1.0, 1e-7, 2, 4, ErrorBudget::UnionBound).is_err());
    }

    #[test]
    fn splitting_crossover() {
        let hi = 10.0;
        let lo = 0.1;
        let q1 = split_latency(10_000, hi, 1.0, 1e-7, 2, 1, ErrorBudget::UnionBound).unwrap();
        let q2 = split_latency(10_000, hi, 1.0, 1e-7, 2, 2, ErrorBudget::UnionBound).unwrap();
        assert!(q2.total_latency < q1.total_latency);
        let s1 = split_latency(40, lo, 1.0, 1e-7, 2, 1, ErrorBudget::UnionBound).unwrap();
        let s2 = split_latency(40, lo, 1.0, 1e-7, 2, 2, ErrorBudget::UnionBound).unwrap();
        assert!(s2.total_latency > s1.total_latency);
    }

    #[test]
    fn early_df_pipeline() {
        let plan = split_latency(150, 3.0, 1.0, 1e-7, 1, 1, ErrorBudget::UnionBound).unwrap();
        let e = part_early_fraction(&plan, 3.0).unwrap();
        let one = df_early_latency(150, 3.0, 1.0, 1e-7, 1, 1, ErrorBudget::UnionBound).unwrap();
        assert!((one - e * plan.part.latency_symbols).abs() < 1e-12);
        let naive = ErrorBudget::Naive;
        let h1 = df_early_latency(150, 3.0, 1.0, 1e-7, 1, 1, naive).unwrap();
        let h3 = df_early_latency(150, 3.0, 1.0, 1e-7, 3, 1, naive).unwrap();
        assert!((h3 - 3.0 * h1).abs() < 1e-9 * h3);
        // n = 300 at R = 0.5 carries 150 bits at eps / h per hop
        let rho = crate::fbl::snr_for_error(0.5, 300, 1e-9 / 2.0).unwrap();
        let early = df_early_latency(150, rho, 1.0, 1e-9, 2, 1, ErrorBudget::UnionBound).unwrap();
        let sync = split_latency(150, rho, 1.0, 1e-9, 2, 1, ErrorBudget::UnionBound).unwrap();
        assert!(early < sync.total_latency_symbols);
    }

    fn antipodal(n: usize, rho: f64) -> Codebook {
        Codebook::antipodal(n, rho).unwrap()
    }

    #[test]
    fn precompensation_geometry() {
        let book = antipodal(2, 1.0);
        let x0 = book.codeword(0).unwrap();
        let x1 = book.codeword(1).unwrap();
        // zero noise: output proportional to the decided codeword
        let st = af_precompensate(RelayState::new(x0.clone()).with_decision(0), &book, 1.0, 1.0).unwrap();
        let out = st.x_r.unwrap();
        for (a, b) in out.iter().zip(&x0) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((distance(&out, &x1) - distance(&x0, &x1)).abs() < 1e-12);
        // noise pulled halfway toward the wrong codeword
        let y: Vec<f64> = x0.iter().zip(&x1).map(|(a, b)| 0.5 * (a + b) + 0.1).collect();
        let st = af_precompensate(RelayState::new(y.clone()).with_decision(0), &book, 1.0, 1.0).unwrap();
        let out = st.x_r.unwrap();
        let plain = af_plain_output(&y, 0.5, 2.0);
        assert!(distance(&out, &x1) > distance(&plain, &x1));
        assert!((norm_sq(&out) - 2.0).abs() < 1e-12);
        assert!(norm_sq(&plain).sqrt() <= norm_sq(&out).sqrt());
    }

    #[test]
    fn precompensation_errors() {
        let book = antipodal(2, 1.0);
        let undecided = af_precompensate(RelayState::new(vec![0.0, 0.0]), &book, 1.0, 1.0);
        assert!(matches!(undecided, Err(LatError::Precondition(_))));
        let big = crate::seqdetect::gen_codebook(4, 2, crate::seqdetect::Modulation::Bpsk, 1.0, 0).unwrap();
        let r = af_precompensate(RelayState::new(vec![0.0; 4]).with_decision(0), &big, 1.0, 1.0);
        assert!(matches!(r, Err(LatError::Unsupported(_))));
    }

    #[test]
    fn projected_ascent_reaches_sphere() {
        let book = crate::seqdetect::gen_codebook(4, 2, crate::seqdetect::Modulation::Bpsk, 1.0, 0).unwrap();
        let x = book.codeword(1).unwrap();
        let y: Vec<f64> = x.iter().map(|v| 0.3 * v).collect();
        let (out, d) = experimental::projected_ascent(&y, &book, 1, 1.0, 1.0, Default::default()).unwrap();
        assert!((norm_sq(&out) - 4.0).abs() < 1e-9);
        let plain = af_plain_output(&y, 0.5, 4.0);
        let plain_d = (0..4u64)
            .filter(|&m| m != 1)
            .map(|m| distance(&plain, &book.codeword(m).unwrap()))
            .fold(f64::INFINITY, f64::min);
        assert!(d >= plain_d);
    }

    #[test]
    fn strategies_at_one_hop() {
        let rows = compare_strategies(200, 2.5, 1.0, 1e-7, 1, ErrorBudget::UnionBound).unwrap();
        let get = |s: &str, q: u32| rows.iter().find(|r| r.strategy == s && r.q == q).unwrap().latency_symbols.unwrap();
        let single = min_latency(200, 2.5, 1.0, 1e-7, EQ).unwrap().latency;
        for (s, q) in [("af", 1), ("df", 1), ("af_precomp", 1)] {
            assert!((get(s, q) - single).abs() < 1e-9 * single, "{s}");
        }
        assert!(rows.windows(2).all(|w| w[0].latency_symbols <= w[1].latency_symbols));
    }

    #[test]
    fn two_hop_smoke() {
        let book = antipodal(8, 1.0);
        let r = two_hop_campaign(&book, 50, &DetectorConfig::default(), 400, 3, 2).unwrap();
        assert_eq!(r.dominance_violations, 0);
        assert!(r.max_energy_error < 1e-9);
        assert!(r.precomp_errors <= r.plain_errors);
        let again = two_hop_campaign(&book, 50, &DetectorConfig::default(), 400, 3, 1).unwrap();
        assert_eq!(r, again);
    }
}
