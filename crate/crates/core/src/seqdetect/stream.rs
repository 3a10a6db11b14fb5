use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::codebook::Codebook;
use crate::error::{domain, Result};

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic child seed for sub-stream `index` of `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix(mix(seed) ^ mix(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Incremental observation of one codeword split into `u` sub-symbol samples.
///
/// Increment `i` is `X / sqrt(u) + N_i` with `N_i ~ N(0, I)`, so after `t`
/// increments the cumulative sum `Y_t` has matched-filter SNR `(t / u) rho`.
#[derive(Debug, Clone)]
pub struct ObservationStream {
    u: usize,
    t: usize,
    step: Vec<f64>,
    cumulative: Vec<f64>,
    increment: Vec<f64>,
    message: Option<u64>,
    noise_std: f64,
    rng: ChaCha8Rng,
}

impl ObservationStream {
    /// Stream carrying an arbitrary signal vector.
    pub fn from_signal(signal: &[f64], u: usize, seed: u64) -> Result<Self> {
        if u == 0 {
            return domain("samples per symbol must be >= 1");
        }
        let scale = 1.0 / (u as f64).sqrt();
        Ok(Self {
            u,
            t: 0,
            step: signal.iter().map(|x| x * scale).collect(),
            cumulative: vec![0.0; signal.len()],
            increment: vec![0.0; signal.len()],
            message: None,
            noise_std: 1.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Scales the per-increment noise; `0` gives a noiseless stream.
    pub fn with_noise_std(mut self, sigma: f64) -> Self {
        self.noise_std = sigma;
        self
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.u
    }

    /// Number of increments received so far.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn is_complete(&self) -> bool {
        self.t >= self.u
    }

    /// Message id, when the stream was produced by [`transmit`].
    pub fn message(&self) -> Option<u64> {
        self.message
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// The most recent increment `Y_t`.
    pub fn last_increment(&self) -> &[f64] {
        &self.increment
    }

    /// Draws the next increment; returns `false` once all `u` are consumed.
    pub fn advance(&mut self) -> bool {
        if self.t >= self.u {
            return false;
        }
        for ((inc, cum), s) in self.increment.iter_mut().zip(self.cumulative.iter_mut()).zip(&self.step) {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *inc = s + self.noise_std * z;
            *cum += *inc;
        }
        self.t += 1;
        true
    }
}

/// Starts transmitting `message` from `codebook` as `u` increments.
pub fn transmit(codebook: &Codebook, message: u64, u: usize, seed: u64) -> Result<ObservationStream> {
    let x = codebook.codeword(message)?;
    let mut s = ObservationStream::from_signal(&x, u, seed)?;
    s.message = Some(message);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqdetect::codebook::{gen_codebook, Modulation};

    #[test]
    fn seeds_are_spread() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(0, 1), derive_seed(1, 0));
        assert_eq!(derive_seed(5, 9), derive_seed(5, 9));
    }

    #[test]
    fn stream_length_and_determinism() {
        let b = gen_codebook(4, 4, Modulation::Bpsk, 2.0, 0).unwrap();
        let mut a = transmit(&b, 3, 10, 42).unwrap();
        let mut c = transmit(&b, 3, 10, 42).unwrap();
        let mut n = 0;
        while a.advance() {
            c.advance();
            n += 1;
        }
        assert_eq!(n, 10);
        assert!(a.is_complete());
        assert_eq!(a.cumulative(), c.cumulative());
        assert!(!a.advance());
        assert_eq!(a.message(), Some(3));
    }

    #[test]
    fn signal_energy_partition() {
        let x = vec![3.0, -1.0, 2.0];
        let mut s = ObservationStream::from_signal(&x, 9, 0).unwrap().with_noise_std(0.0);
        while s.advance() {}
        // Y_u / sqrt(u) recovers X
        for (a, b) in s.cumulative().iter().zip(&x) {
            assert!((a / 3.0 - b).abs() < 1e-12);
        }
        let st = ObservationStream::from_signal(&x, 9, 0).unwrap();
        let per: f64 = st.step.iter().map(|v| v * v).sum::<f64>() * 9.0;
        assert!((per - 14.0).abs() < 1e-12);
    }
}
