//! Distance over time between OFDM signals.
//!
//! A codeword `X in C^n` is sent as `s(t) = sum_k X_k exp(j 2 pi k t / T)`.
//! Sub-carriers are orthogonal only over the full symbol, so the partial
//! squared distance `d^2(t) = int_0^t |s_m - s_m'|^2` between two codewords is
//! linear in `t` only when the cross terms between sub-carriers vanish. This
//! module evaluates `d^2(t)` in closed form, checks it against waveform
//! quadrature, applies unitary precoders, and runs an early-detection
//! simulator on the sampled waveforms.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, domain, LatError, Result};
use crate::quadrature::gauss_legendre;
use crate::seqdetect::{derive_seed, Codebook, LatencyReport, Modulation, StoppingDecision};

/// Default number of curve points per symbol.
pub const DEFAULT_TIME_GRID: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    pub n_subcarriers: usize,
    pub symbol_duration: f64,
    /// Curve points per symbol, including `t = 0` and `t = T`.
    pub time_grid: usize,
}

impl OfdmConfig {
    pub fn new(n_subcarriers: usize, symbol_duration: f64) -> Result<Self> {
        let c = Self { n_subcarriers, symbol_duration, time_grid: DEFAULT_TIME_GRID };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers == 0 {
            return domain("need at least one sub-carrier");
        }
        check_positive("symbol duration", self.symbol_duration)?;
        if self.time_grid < 2 {
            return domain("time grid needs at least two points");
        }
        Ok(())
    }

    /// `t / T` at each grid point.
    pub fn abscissae(&self) -> Vec<f64> {
        let g = self.time_grid - 1;
        (0..=g).map(|i| i as f64 / g as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PrecoderKind {
    Identity,
    /// Sylvester Hadamard matrix scaled by `1 / sqrt(n)`; `n` a power of two.
    HadamardSylvester,
    /// Unitary DFT matrix.
    Dft,
    /// Orthonormalized seeded complex Gaussian matrix.
    RandomRotation { seed: u64 },
}

impl PrecoderKind {
    pub fn label(&self) -> String {
        match self {
            Self::Identity => "identity".into(),
            Self::HadamardSylvester => "hadamard".into(),
            Self::Dft => "dft".into(),
            Self::RandomRotation { seed } => format!("random_rotation:{seed}"),
        }
    }
}

/// Unitary `n x n` precoding matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub kind: Option<PrecoderKind>,
    n: usize,
    matrix: Vec<Complex64>,
}

const UNITARY_TOL: f64 = 1e-10;

impl Precoder {
    pub fn new(kind: PrecoderKind, n: usize) -> Result<Self> {
        if n == 0 {
            return domain("precoder dimension must be >= 1");
        }
        let matrix = match kind {
            PrecoderKind::Identity => {
                let mut m = vec![Complex64::new(0.0, 0.0); n * n];
                for i in 0..n {
                    m[i * n + i] = Complex64::new(1.0, 0.0);
                }
                m
            }
            PrecoderKind::HadamardSylvester => {
                if !n.is_power_of_two() {
                    return domain(format!("Sylvester Hadamard needs a power-of-two size, got {n}"));
                }
                let s = 1.0 / (n as f64).sqrt();
                (0..n * n)
                    .map(|idx| {
                        let (i, j) = (idx / n, idx % n);
                        let sign = if (i & j).count_ones() % 2 == 0 { s } else { -s };
                        Complex64::new(sign, 0.0)
                    })
                    .collect()
            }
            PrecoderKind::Dft => {
                let s = 1.0 / (n as f64).sqrt();
                (0..n * n)
                    .map(|idx| {
                        let (i, j) = (idx / n, idx % n);
                        let phase = -2.0 * PI * ((i * j) % n) as f64 / n as f64;
                        Complex64::from_polar(s, phase)
                    })
                    .collect()
            }
            PrecoderKind::RandomRotation { seed } => random_unitary(n, seed),
        };
        let p = Self { kind: Some(kind), n, matrix };
        p.check_unitary()?;
        Ok(p)
    }

    /// Wraps an explicit row-major matrix, rejecting non-unitary input.
    pub fn from_matrix(n: usize, matrix: Vec<Complex64>) -> Result<Self> {
        if n == 0 || matrix.len() != n * n {
            return domain("matrix must be n x n");
        }
        let p = Self { kind: None, n, matrix };
        p.check_unitary()?;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> String {
        self.kind.map_or_else(|| "custom".into(), |k| k.label())
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[row * self.n + col]
    }

    /// `max |H H^H - I|`
    pub fn unitarity_error(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in 0..n {
                    acc += self.matrix[i * n + l] * self.matrix[j * n + l].conj();
                }
                if i == j {
                    acc -= 1.0;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    fn check_unitary(&self) -> Result<()> {
        let e = self.unitarity_error();
        if !(e <= UNITARY_TOL) {
            return domain(format!("precoder is not unitary (max |HH^H - I| = {e:e})"));
        }
        Ok(())
    }

    /// `H x`
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.n {
            return domain(format!("vector of length {} for a {}-dim precoder", x.len(), self.n));
        }
        Ok((0..self.n)
            .map(|i| self.matrix[i * self.n..(i + 1) * self.n].iter().zip(x).map(|(h, v)| h * v).sum())
            .collect())
    }
}

/// Modified Gram–Schmidt on the rows of a seeded complex Gaussian matrix.
fn random_unitary(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m: Vec<Complex64> = (0..n * n)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    for i in 0..n {
        for j in 0..i {
            let proj: Complex64 = (0..n).map(|l| m[j * n + l].conj() * m[i * n + l]).sum();
            for l in 0..n {
                let v = m[j * n + l];
                m[i * n + l] -= proj * v;
            }
        }
        let norm = (0..n).map(|l| m[i * n + l].norm_sqr()).sum::<f64>().sqrt();
        for l in 0..n {
            m[i * n + l] /= norm;
        }
    }
    m
}

/// Interleaved `(I, Q)` reals to complex symbols.
pub fn to_complex(x: &[f64]) -> Result<Vec<Complex64>> {
    if !x.len().is_multiple_of(2) {
        return domain("interleaved I/Q vector must have even length");
    }
    Ok(x.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect())
}

pub fn to_interleaved(x: &[Complex64]) -> Vec<f64> {
    x.iter().flat_map(|c| [c.re, c.im]).collect()
}

/// `d^2(t)` on a grid, for one codeword pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceCurve {
    /// `t / T`
    pub abscissae: Vec<f64>,
    pub values: Vec<f64>,
    /// Sub-carriers where the (un-precoded) codewords differ.
    pub diff_support: Vec<usize>,
    pub pair: Option<(u64, u64)>,
    pub precoder: String,
}

fn precoded_difference(x: &[Complex64], x2: &[Complex64], precoder: &Precoder) -> Result<(Vec<Complex64>, Vec<usize>)> {
    if x.len() != x2.len() {
        return domain("codewords must have equal length");
    }
    let diff: Vec<Complex64> = x.iter().zip(x2).map(|(a, b)| a - b).collect();
    let scale = diff.iter().map(|d| d.norm()).fold(0.0, f64::max);
    let support = diff
        .iter()
        .enumerate()
        .filter(|(_, d)| d.norm() > 1e-12 * scale)
        .map(|(k, _)| k)
        .collect();
    Ok((precoder.apply(&diff)?, support))
}

/// Closed-form `d^2(t)`:
/// `||D||^2 t + sum_{delta != 0} r_delta T / (j 2 pi delta) (e^{j 2 pi delta t / T} - 1)`
/// with the autocorrelation `r_delta = sum_k D_{k + delta} D_k^*` of the
/// precoded difference `D`.
pub fn distance_curve(x: &[Complex64], x2: &[Complex64], config: &OfdmConfig, precoder: &Precoder) -> Result<DistanceCurve> {
    config.validate()?;
    if x.len() != config.n_subcarriers {
        return domain(format!("codeword length {} != {} sub-carriers", x.len(), config.n_subcarriers));
    }
    let (d, support) = precoded_difference(x, x2, precoder)?;
    let n = d.len();
    let t_sym = config.symbol_duration;
    let energy: f64 = d.iter().map(|v| v.norm_sqr()).sum();
    let lags: Vec<(f64, Complex64)> = (1..n)
        .filter_map(|delta| {
            let r: Complex64 = (0..n - delta).map(|k| d[k + delta] * d[k].conj()).sum();
            (r.norm() > 0.0).then_some((delta as f64, r))
        })
        .collect();
    let abscissae = config.abscissae();
    let values = abscissae
        .iter()
        .map(|&f| {
            let t = f * t_sym;
            let mut v = energy * t;
            for &(delta, r) in &lags {
                let theta = 2.0 * PI * delta * f;
                // T / (j 2 pi delta) (e^{j theta} - 1), paired with its -delta conjugate
                let (s, c) = theta.sin_cos();
                let factor = Complex64::new(s, 1.0 - c) * (t_sym / (2.0 * PI * delta));
                v += 2.0 * (r * factor).re;
            }
            v.max(0.0)
        })
        .collect();
    Ok(DistanceCurve { abscissae, values, diff_support: support, pair: None, precoder: precoder.label() })
}

/// Oracle for [`distance_curve`]: synthesizes the difference waveform and
/// integrates `|s(t)|^2` with a 12-point Gauss–Legendre rule per grid cell.
pub fn distance_curve_quadrature(
    x: &[Complex64],
    x2: &[Complex64],
    config: &OfdmConfig,
    precoder: &Precoder,
) -> Result<Vec<f64>> {
    config.validate()?;
    let (d, _) = precoded_difference(x, x2, precoder)?;
    let t_sym = config.symbol_duration;
    let wave = |t: f64| -> f64 {
        let s: Complex64 = d
            .iter()
            .enumerate()
            .map(|(k, v)| v * Complex64::from_polar(1.0, 2.0 * PI * (k + 1) as f64 * t / t_sym))
            .sum();
        s.norm_sqr()
    };
    let (nodes, weights) = gauss_legendre(12);
    let grid = config.abscissae();
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in grid.windows(2) {
        let (a, b) = (w[0] * t_sym, w[1] * t_sym);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        acc += half * nodes.iter().zip(&weights).map(|(x, wt)| wt * wave(mid + half * x)).sum::<f64>();
        out.push(acc);
    }
    Ok(out)
}

/// Peak relative deviation of `d^2(t)` from the chord `(t / T) d^2(T)`.
pub fn linearity_deviation(curve: &DistanceCurve) -> Result<f64> {
    let end = match curve.values.last() {
        Some(&v) if v > 0.0 => v,
        _ => return domain("degenerate curve: d^2(T) must be positive"),
    };
    Ok(curve
        .abscissae
        .iter()
        .zip(&curve.values)
        .map(|(f, v)| (v - f * end).abs() / end)
        .fold(0.0, f64::max))
}

/// Multiplies every codeword of a QPSK codebook by the precoder.
pub fn precode_codebook(codebook: &Codebook, precoder: &Precoder) -> Result<Codebook> {
    if codebook.modulation() != Modulation::Qpsk {
        return Err(LatError::Unsupported("precoding acts on complex (QPSK) codebooks".into()));
    }
    if codebook.n() != precoder.n() {
        return domain(format!("codebook has {} symbols, precoder {}", codebook.n(), precoder.n()));
    }
    let entries = codebook
        .entries()?
        .iter()
        .map(|x| Ok(to_interleaved(&precoder.apply(&to_complex(x)?)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(codebook.with_entries(entries, precoder.label()))
}

/// One member of the structured pair family: a base QPSK codeword and a
/// neighbour differing on one or two sub-carriers.
#[derive(Debug, Clone, PartialEq)]
pub struct CodewordPair {
    pub base: Vec<Complex64>,
    pub other: Vec<Complex64>,
    pub support: Vec<usize>,
}

/// Pairs differing in one symbol (`|K| = 1`) or two (`|K| = 2`) of a seeded
/// random QPSK codeword. For `|K| = 2` the in-phase bit of sub-carrier `k1`
/// and the quadrature bit of `k2 = k1 + delta` are flipped, with `k1` every
/// `n / 8` carriers and `delta in {1, 2, 4, 8, 16}`; for `|K| = 1` only the
/// in-phase bit of `k1` is flipped.
pub fn qpsk_pair_family(n: usize, amplitude: f64, seed: u64) -> Result<Vec<CodewordPair>> {
    if n < 2 {
        return domain("pair family needs n >= 2");
    }
    check_positive("amplitude", amplitude)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<Complex64> = (0..n)
        .map(|_| {
            let re = if rng.random::<bool>() { amplitude } else { -amplitude };
            let im = if rng.random::<bool>() { amplitude } else { -amplitude };
            Complex64::new(re, im)
        })
        .collect();
    let step = (n / 8).max(1);
    let mut pairs = Vec::new();
    for k1 in (0..n).step_by(step) {
        let mut one = base.clone();
        one[k1].re = -one[k1].re;
        pairs.push(CodewordPair { base: base.clone(), other: one, support: vec![k1] });
        for delta in [1usize, 2, 4, 8, 16] {
            let k2 = k1 + delta;
            if k2 >= n {
                continue;
            }
            let mut two = base.clone();
            two[k1].re = -two[k1].re;
            two[k2].im = -two[k2].im;
            pairs.push(CodewordPair { base: base.clone(), other: two, support: vec![k1, k2] });
        }
    }
    Ok(pairs)
}

/// Summary of [`covariance_linearization_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearizationReport {
    pub n: usize,
    pub pairs: usize,
    pub mean_deviation: f64,
    pub max_deviation: f64,
}

/// Mean linearity deviation of `pairs` i.i.d. complex Gaussian codeword pairs
/// of length `n`. Cross terms average out, so the mean falls as `n` grows.
pub fn covariance_linearization_check(seed: u64, n: usize, pairs: usize) -> Result<LinearizationReport> {
    if n < 2 || pairs == 0 {
        return domain("need n >= 2 and at least one pair");
    }
    let config = OfdmConfig { n_subcarriers: n, symbol_duration: 1.0, time_grid: 256 };
    let id = Precoder::new(PrecoderKind::Identity, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect()
    };
    let (mut sum, mut max) = (0.0, 0.0f64);
    for _ in 0..pairs {
        let (a, b) = (draw(), draw());
        let dev = linearity_deviation(&distance_curve(&a, &b, &config, &id)?)?;
        sum += dev;
        max = max.max(dev);
    }
    Ok(LinearizationReport { n, pairs, mean_deviation: sum / pairs as f64, max_deviation: max })
}

/// Early detection on sampled OFDM waveforms.
///
/// Each codeword is synthesized on `samples` points per symbol with the
/// energy-preserving inverse DFT `s[i] = sum_k X_k e^{j 2 pi (k+1) i / G} / sqrt(G)`;
/// noise has unit variance per real dimension per sample. After each sample
/// the receiver ranks the codewords by the partial distance `||y - s_m||^2`
/// over the samples so far and stops once the runner-up trails the nearest
/// codeword by at least the margin `S`. A margin `S <= 0` disables early
/// stopping.
#[derive(Debug, Clone)]
pub struct OfdmDetector {
    samples: usize,
    waveforms: Vec<Vec<Complex64>>,
    precoder: String,
}

impl OfdmDetector {
    pub fn new(codebook: &Codebook, precoder: &Precoder, samples: usize) -> Result<Self> {
        if codebook.k() > 12 {
            return Err(LatError::Unsupported("OFDM early detection scans at most 2^12 codewords".into()));
        }
        if samples < codebook.n() {
            return domain("need at least one sample per sub-carrier");
        }
        let book = precode_codebook(codebook, precoder)?;
        let g = samples as f64;
        let waveforms = book
            .entries()?
            .iter()
            .map(|x| {
                let x = to_complex(x)?;
                Ok((0..samples)
                    .map(|i| {
                        x.iter()
                            .enumerate()
                            .map(|(k, v)| v * Complex64::from_polar(1.0, 2.0 * PI * ((k + 1) * i % samples) as f64 / g))
                            .sum::<Complex64>()
                            / g.sqrt()
                    })
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { samples, waveforms, precoder: precoder.label() })
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn precoder(&self) -> &str {
        &self.precoder
    }

    /// Nearest codeword and margin to the runner-up after each sample.
    fn trace(&self, message: u64, seed: u64) -> Vec<(u64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sent = &self.waveforms[message as usize];
        let mut dist = vec![0.0; self.waveforms.len()];
        let mut out = Vec::with_capacity(self.samples);
        for i in 0..self.samples {
            let noise = Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            let y = sent[i] + noise;
            for (d, w) in dist.iter_mut().zip(&self.waveforms) {
                *d += (y - w[i]).norm_sqr();
            }
            let (mut best, mut second) = (0usize, usize::MAX);
            for m in 1..dist.len() {
                if dist[m] < dist[best] {
                    second = best;
                    best = m;
                } else if second == usize::MAX || dist[m] < dist[second] {
                    second = m;
                }
            }
            out.push((best as u64, dist[second] - dist[best]));
        }
        out
    }

    fn decide(&self, trace: &[(u64, f64)], message: u64, margin: f64) -> StoppingDecision {
        let g = self.samples;
        let stop = if margin > 0.0 { trace.iter().position(|(_, gap)| *gap >= margin) } else { None };
        let (t, threshold) = match stop {
            Some(i) => (i + 1, Some(margin)),
            None => (g, None),
        };
        let (decided, gap) = trace[t - 1];
        StoppingDecision::new(t, g, Some(decided), decided == message, gap, threshold)
    }

    /// One trial: message drawn from the trial seed.
    pub fn run(&self, margin: f64, trial_seed: u64) -> StoppingDecision {
        let (message, trace) = self.trial_trace(trial_seed);
        self.decide(&trace, message, margin)
    }

    fn trial_trace(&self, trial_seed: u64) -> (u64, Vec<(u64, f64)>) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, 0));
        let message = rng.random_range(0..self.waveforms.len() as u64);
        (message, self.trace(message, derive_seed(trial_seed, 1)))
    }

    /// Campaign at a fixed margin.
    pub fn campaign(&self, margin: f64, trials: u64, seed: u64, workers: usize) -> Result<LatencyReport> {
        let decisions = crate::seqdetect::par_map_trials(trials, workers, |i| self.run(margin, derive_seed(seed, i)))?;
        self.report(&decisions)
    }

    fn report(&self, decisions: &[StoppingDecision]) -> Result<LatencyReport> {
        // the margin is a distance, not a posterior threshold
        Ok(LatencyReport { error_bound: None, ..LatencyReport::from_decisions(decisions, self.samples)? })
    }

    /// Smallest margin from `candidates` whose error rate on paired trials
    /// stays at or below `target_error`, with its report. Falls back to
    /// synchronous detection (margin 0) when no candidate qualifies.
    pub fn calibrate(
        &self,
        candidates: &[f64],
        target_error: f64,
        trials: u64,
        seed: u64,
        workers: usize,
    ) -> Result<(f64, LatencyReport)> {
        let traces = crate::seqdetect::par_map_trials(trials, workers, |i| self.trial_trace(derive_seed(seed, i)))?;
        let mut sorted: Vec<f64> = candidates.iter().copied().filter(|c| *c > 0.0).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for margin in sorted.into_iter().chain(std::iter::once(0.0)) {
            let decisions: Vec<StoppingDecision> =
                traces.iter().map(|(m, tr)| self.decide(tr, *m, margin)).collect();
            let report = self.report(&decisions)?;
            if report.error_rate <= target_error || margin == 0.0 {
                return Ok((margin, report));
            }
        }
        unreachable!("margin 0 always returns")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqdetect::gen_codebook;

    fn cfg(n: usize) -> OfdmConfig {
        OfdmConfig::new(n, 1.0).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn precoders_are_unitary() {
        for kind in [
            PrecoderKind::Identity,
            PrecoderKind::HadamardSylvester,
            PrecoderKind::Dft,
            PrecoderKind::RandomRotation { seed: 3 },
        ] {
            let p = Precoder::new(kind, 16).unwrap();
            assert!(p.unitarity_error() <= 1e-10, "{kind:?}");
        }
        assert!(Precoder::new(PrecoderKind::HadamardSylvester, 12).is_err());
        let bad = vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        assert!(Precoder::from_matrix(2, bad).is_err());
    }

    #[test]
    fn two_by_two_hadamard() {
        let h = Precoder::new(PrecoderKind::HadamardSylvester, 2).unwrap();
        let s = 2f64.sqrt();
        let a = h.apply(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let b = h.apply(&[c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        assert!((a[0] - c(s, 0.0)).norm() < 1e-15 && a[1].norm() < 1e-15);
        assert!(b[0].norm() < 1e-15 && (b[1] - c(s, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn single_tone_is_linear() {
        let n = 8;
        let x = vec![c(1.0, 1.0); n];
        let mut y = x.clone();
        y[3] = c(-1.0, 1.0);
        let id = Precoder::new(PrecoderKind::Identity, n).unwrap();
        let curve = distance_curve(&x, &y, &cfg(n), &id).unwrap();
        for (f, v) in curve.abscissae.iter().zip(&curve.values) {
            assert!((v - 4.0 * f).abs() < 1e-12);
        }
        assert_eq!(curve.diff_support, vec![3]);
        assert!(linearity_deviation(&curve).unwrap() < 1e-12);
    }

    #[test]
    fn two_tone_sinusoid() {
        let n = 16;
        let (k1, k2) = (2usize, 7usize);
        let x = vec![c(1.0, 1.0); n];
        let mut y = x.clone();
        y[k1] = c(-1.0, 1.0);
        y[k2] = c(-1.0, 1.0);
        let id = Precoder::new(PrecoderKind::Identity, n).unwrap();
        let curve = distance_curve(&x, &y, &cfg(n), &id).unwrap();
        // both differences are 2: d^2 = 8t + 8 sin(2 pi 5 t) / (2 pi 5)
        let w = 2.0 * PI * (k2 - k1) as f64;
        for (f, v) in curve.abscissae.iter().zip(&curve.values) {
            let expect = 8.0 * f + 8.0 * (w * f).sin() / w;
            assert!((v - expect).abs() < 1e-12);
        }
        // the ripple averages to zero over the symbol
        let ripple: f64 = curve.abscissae.iter().zip(&curve.values).map(|(f, v)| v - 8.0 * f).sum();
        assert!(ripple.abs() / (curve.values.len() as f64) < 1e-3);
    }

    #[test]
    fn endpoint_and_quadrature_agree() {
        let n = 32;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for kind in [PrecoderKind::Identity, PrecoderKind::HadamardSylvester, PrecoderKind::RandomRotation { seed: 1 }] {
            let p = Precoder::new(kind, n).unwrap();
            for _ in 0..5 {
                let a: Vec<Complex64> = (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
                let b: Vec<Complex64> = (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
                let curve = distance_curve(&a, &b, &cfg(n), &p).unwrap();
                let quad = distance_curve_quadrature(&a, &b, &cfg(n), &p).unwrap();
                let e: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum();
                let end = *curve.values.last().unwrap();
                assert_eq!(curve.values[0], 0.0);
                assert!((end - e).abs() <= 1e-9 * e);
                for (v, q) in curve.values.iter().zip(&quad) {
                    assert!((v - q).abs() <= 1e-6 * q.abs() + 1e-12 * end);
                }
            }
        }
    }

    #[test]
    fn precoding_preserves_full_symbol_distances() {
        let book = gen_codebook(16, 5, Modulation::Qpsk, 2.0, 9).unwrap();
        let p = Precoder::new(PrecoderKind::RandomRotation { seed: 2 }, 16).unwrap();
        let pre = precode_codebook(&book, &p).unwrap();
        let (a, b) = (book.entries().unwrap(), pre.entries().unwrap());
        for i in 0..a.len() {
            for j in 0..i {
                let d0: f64 = a[i].iter().zip(&a[j]).map(|(x, y)| (x - y).powi(2)).sum();
                let d1: f64 = b[i].iter().zip(&b[j]).map(|(x, y)| (x - y).powi(2)).sum();
                assert!((d0 - d1).abs() <= 1e-9 * d0);
            }
        }
        let same = precode_codebook(&book, &Precoder::new(PrecoderKind::Identity, 16).unwrap()).unwrap();
        assert_eq!(same.entries().unwrap(), book.entries().unwrap());
        assert_eq!(pre.precoder(), Some("random_rotation:2"));
    }

    #[test]
    fn iid_pairs_linearize_with_n() {
        let small = covariance_linearization_check(1, 16, 40).unwrap();
        let large = covariance_linearization_check(1, 256, 40).unwrap();
        assert!(large.mean_deviation < small.mean_deviation);
        let fam = qpsk_pair_family(128, 1.0, 0).unwrap();
        let id = Precoder::new(PrecoderKind::Identity, 128).unwrap();
        let worst_two = fam
            .iter()
            .filter(|p| p.support.len() == 2)
            .map(|p| linearity_deviation(&distance_curve(&p.base, &p.other, &cfg(128), &id).unwrap()).unwrap())
            .fold(0.0, f64::max);
        let iid = covariance_linearization_check(2, 128, 20).unwrap();
        assert!(iid.mean_deviation < worst_two);
    }

    #[test]
    fn degenerate_curve_rejected() {
        let x = vec![c(1.0, 0.0); 4];
        let id = Precoder::new(PrecoderKind::Identity, 4).unwrap();
        let curve = distance_curve(&x, &x, &cfg(4), &id).unwrap();
        assert!(linearity_deviation(&curve).is_err());
        assert!(distance_curve(&x, &x[..3], &cfg(4), &id).is_err());
    }

    #[test]
    fn detector_without_margin_runs_to_end() {
        let book = gen_codebook(8, 4, Modulation::Qpsk, 2.0, 1).unwrap();
        let id = Precoder::new(PrecoderKind::Identity, 8).unwrap();
        let det = OfdmDetector::new(&book, &id, 32).unwrap();
        for s in 0..10 {
            let d = det.run(0.0, s);
            assert_eq!(d.stop_index, 32);
            assert!(d.threshold.is_none());
        }
        let r = det.campaign(0.0, 20, 1, 1).unwrap();
        assert_eq!(r.mean_stop_fraction, 1.0);
    }
}
