use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::campaign::par_map;
use super::stream::{derive_seed, ObservationStream};
use super::{DetectorConfig, StoppingDecision};
use crate::error::{check_positive, check_probability, domain, LatError, Result};
use crate::special::q_inv;

/// CRC-8 (`x^8 + x^2 + x + 1`) or CRC-16-CCITT (`0x1021`); both MSB-first
/// with a zero initial register and no final xor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum CrcWidth {
    Crc8,
    Crc16,
}

impl CrcWidth {
    pub fn bits(self) -> usize {
        match self {
            Self::Crc8 => 8,
            Self::Crc16 => 16,
        }
    }

    pub fn polynomial(self) -> u16 {
        match self {
            Self::Crc8 => 0x07,
            Self::Crc16 => 0x1021,
        }
    }

    fn table(self) -> &'static [u16; 256] {
        match self {
            Self::Crc8 => &CRC8_TABLE,
            Self::Crc16 => &CRC16_TABLE,
        }
    }
}

impl TryFrom<u32> for CrcWidth {
    type Error = LatError;

    fn try_from(w: u32) -> Result<Self> {
        match w {
            8 => Ok(Self::Crc8),
            16 => Ok(Self::Crc16),
            _ => domain(format!("unsupported CRC width {w} (use 8 or 16)")),
        }
    }
}

impl From<CrcWidth> for u32 {
    fn from(w: CrcWidth) -> u32 {
        w.bits() as u32
    }
}

const fn make_table(poly: u16, width: u32) -> [u16; 256] {
    let mask: u32 = (1 << width) - 1;
    let top: u32 = 1 << (width - 1);
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut reg: u32 = (i as u32) << (width - 8);
        let mut b = 0;
        while b < 8 {
            reg = if reg & top != 0 { (reg << 1) ^ poly as u32 } else { reg << 1 };
            reg &= mask;
            b += 1;
        }
        table[i] = reg as u16;
        i += 1;
    }
    table
}

static CRC8_TABLE: [u16; 256] = make_table(0x07, 8);
static CRC16_TABLE: [u16; 256] = make_table(0x1021, 16);

/// Remainder of the bit sequence (one bit per byte, `0` or `1`) divided by the
/// CRC polynomial. A frame carrying its own check bits has remainder zero.
pub fn crc_remainder(width: CrcWidth, bits: &[u8]) -> u16 {
    let w = width.bits() as u32;
    let mask = ((1u32 << w) - 1) as u16;
    let poly = width.polynomial();
    let table = width.table();
    let lead = bits.len() % 8;
    let mut reg: u16 = 0;
    for &bit in &bits[..lead] {
        let top = ((reg >> (w - 1)) & 1) ^ (bit as u16 & 1);
        reg = (reg << 1) & mask;
        if top == 1 {
            reg ^= poly;
        }
    }
    for chunk in bits[lead..].chunks_exact(8) {
        let byte = chunk.iter().fold(0u16, |acc, &b| (acc << 1) | (b as u16 & 1));
        let idx = ((reg >> (w - 8)) ^ byte) & 0xff;
        reg = ((reg << 8) & mask) ^ table[idx as usize];
    }
    reg
}

/// A `k`-bit payload followed by its CRC, one bit per byte.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrcFrame {
    pub bits: Vec<u8>,
    pub payload_bits: usize,
}

impl CrcFrame {
    pub fn payload(&self) -> &[u8] {
        &self.bits[..self.payload_bits]
    }
}

/// Uncoded BPSK transmission of CRC-protected payloads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrcCode {
    pub k: usize,
    pub width: CrcWidth,
    pub rho: f64,
}

impl CrcCode {
    pub fn new(k: usize, width: CrcWidth, rho: f64) -> Result<Self> {
        if k == 0 {
            return domain("payload must carry at least one bit");
        }
        check_positive("rho", rho)?;
        Ok(Self { k, width, rho })
    }

    /// Frame length `k + width`.
    pub fn n(&self) -> usize {
        self.k + self.width.bits()
    }

    pub fn encode(&self, payload: &[u8]) -> Result<CrcFrame> {
        if payload.len() != self.k {
            return domain(format!("payload has {} bits, expected {}", payload.len(), self.k));
        }
        let w = self.width.bits();
        let r = crc_remainder(self.width, payload);
        let mut bits = payload.to_vec();
        bits.extend((0..w).map(|i| ((r >> (w - 1 - i)) & 1) as u8));
        Ok(CrcFrame { bits, payload_bits: self.k })
    }

    pub fn random_frame<R: Rng>(&self, rng: &mut R) -> CrcFrame {
        let payload: Vec<u8> = (0..self.k).map(|_| rng.random::<bool>() as u8).collect();
        self.encode(&payload).expect("payload length matches")
    }

    /// BPSK signal: bit 0 maps to `+sqrt(rho)`, bit 1 to `-sqrt(rho)`.
    pub fn signal(&self, frame: &CrcFrame) -> Vec<f64> {
        let a = self.rho.sqrt();
        frame.bits.iter().map(|&b| if b == 0 { a } else { -a }).collect()
    }
}

/// SNR at which uncoded BPSK over `n` bits has block error `eps`:
/// `rho = Q^-1(1 - (1 - eps)^(1/n))^2`.
pub fn snr_for_uncoded_block_error(n: usize, eps: f64) -> Result<f64> {
    check_probability("eps", eps)?;
    if n == 0 {
        return domain("n must be >= 1");
    }
    let p = -((-eps).ln_1p() / n as f64).exp_m1();
    Ok(q_inv(p)?.powi(2))
}

/// First increment at which the CRC test may stop.
pub(crate) fn floor_index(fraction: f64, u: usize) -> usize {
    ((fraction * u as f64 - 1e-9).ceil() as usize).clamp(1, u)
}

fn slice(y: &[f64], out: &mut [u8]) {
    for (b, v) in out.iter_mut().zip(y) {
        *b = (*v < 0.0) as u8;
    }
}

/// CRC-guided stopping: from the floor on, hard-slice `Y_t` and stop as soon
/// as the frame checks. Without a stop the slice at `t = u` is decided.
/// Correctness is judged on the payload bits.
pub fn run_crc_genie(
    stream: &mut ObservationStream,
    code: &CrcCode,
    sent: &CrcFrame,
    config: &DetectorConfig,
) -> Result<StoppingDecision> {
    config.validate()?;
    if stream.cumulative().len() != code.n() || sent.bits.len() != code.n() {
        return domain("frame, code and observation lengths differ");
    }
    let u = stream.samples_per_symbol();
    let floor = floor_index(config.min_tau_fraction, u);
    let mut hard = vec![0u8; code.n()];
    while stream.advance() {
        let t = stream.t();
        if t < floor && t < u {
            continue;
        }
        slice(stream.cumulative(), &mut hard);
        let r = crc_remainder(code.width, &hard);
        if r == 0 || t == u {
            let correct = hard[..code.k] == *sent.payload();
            let threshold = (r == 0).then_some(config.min_tau_fraction);
            return Ok(StoppingDecision::new(t, u, None, correct, r as f64, threshold));
        }
    }
    Err(LatError::Precondition("observation stream already consumed".into()))
}

/// Random frame and noise path of CRC trial `index`.
pub(crate) fn crc_trial_stream(code: &CrcCode, u: usize, trial_seed: u64) -> Result<(CrcFrame, ObservationStream)> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, 0));
    let frame = code.random_frame(&mut rng);
    let stream = ObservationStream::from_signal(&code.signal(&frame), u, derive_seed(trial_seed, 1))?;
    Ok((frame, stream))
}

/// Per-increment CRC pass and payload-correct flags of one trial.
fn crc_trace(code: &CrcCode, u: usize, trial_seed: u64) -> Result<(Vec<bool>, Vec<bool>)> {
    let (frame, mut stream) = crc_trial_stream(code, u, trial_seed)?;
    let mut hard = vec![0u8; code.n()];
    let (mut pass, mut correct) = (Vec::with_capacity(u), Vec::with_capacity(u));
    while stream.advance() {
        slice(stream.cumulative(), &mut hard);
        pass.push(crc_remainder(code.width, &hard) == 0);
        correct.push(hard[..code.k] == *frame.payload());
    }
    Ok((pass, correct))
}

/// Outcome of a CRC floor calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorCalibration {
    /// Chosen `min_tau_fraction`.
    pub floor: f64,
    pub floor_index: usize,
    pub trials: u64,
    /// Errors of the early test at the chosen floor.
    pub early_errors: u64,
    /// Errors of the synchronous decision at `T` on the same noise paths.
    pub sync_errors: u64,
    pub mean_stop_fraction: f64,
}

/// Smallest floor for which the CRC-guided test makes no more errors than the
/// synchronous decision at `T`, on paired noise paths. The floor `u` always
/// qualifies, since the test then reduces to the synchronous decision.
pub fn calibrate_crc_floor(code: &CrcCode, u: usize, trials: u64, seed: u64, workers: usize) -> Result<FloorCalibration> {
    if trials == 0 || u == 0 {
        return domain("calibration needs trials >= 1 and u >= 1");
    }
    let traces = par_map(trials, workers, |i| crc_trace(code, u, derive_seed(seed, i)))?;
    let traces = traces.into_iter().collect::<Result<Vec<_>>>()?;
    let sync_errors = traces.iter().filter(|(_, c)| !c[u - 1]).count() as u64;
    for f in 1..=u {
        let mut errors = 0u64;
        let mut stop_sum = 0u64;
        for (pass, correct) in &traces {
            let t = (f - 1..u).find(|&i| pass[i]).unwrap_or(u - 1);
            errors += u64::from(!correct[t]);
            stop_sum += t as u64 + 1;
        }
        if errors <= sync_errors {
            return Ok(FloorCalibration {
                floor: f as f64 / u as f64,
                floor_index: f,
                trials,
                early_errors: errors,
                sync_errors,
                mean_stop_fraction: stop_sum as f64 / (trials as f64 * u as f64),
            });
        }
    }
    unreachable!("floor u reproduces the synchronous decision")
}
