use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stream::derive_seed;
use crate::error::{check_positive, domain, LatError, Result};

/// Largest `k` for which codebooks are materialized and list decoding is an
/// exhaustive scan.
pub const MAX_EXHAUSTIVE_BITS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Bpsk,
    Qpsk,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Self::Bpsk => 1,
            Self::Qpsk => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Entries {
    /// Message bit `j` drives real dimension `j` directly.
    Product,
    Explicit(Vec<Vec<f64>>),
    /// Random bit patterns regenerated from `(seed, index)` on demand.
    Implicit { seed: u64 },
}

/// A set of equal-energy modulated codewords.
///
/// Codewords are stored as real vectors; QPSK symbols are interleaved as
/// `(I, Q)` pairs, so a codeword of `n` complex symbols has `2n` reals. Every
/// codeword has energy `n rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    n: usize,
    k: u32,
    modulation: Modulation,
    rho: f64,
    entries: Entries,
    precoder: Option<String>,
}

impl Codebook {
    /// Antipodal pair `{x, -x}` with `x = sqrt(rho) (1, ..., 1)`.
    pub fn antipodal(n: usize, rho: f64) -> Result<Self> {
        check_positive("rho", rho)?;
        if n == 0 {
            return domain("codebook needs n >= 1");
        }
        let x = vec![rho.sqrt(); n];
        let y = x.iter().map(|v| -v).collect();
        Ok(Self {
            n,
            k: 1,
            modulation: Modulation::Bpsk,
            rho,
            entries: Entries::Explicit(vec![x, y]),
            precoder: None,
        })
    }

    /// Codebook from explicit real vectors (interleaved I/Q for QPSK). All
    /// entries must have the same energy and be distinct; the size must be a
    /// power of two.
    pub fn from_entries(modulation: Modulation, entries: Vec<Vec<f64>>) -> Result<Self> {
        let m = entries.len();
        if m < 2 || !m.is_power_of_two() {
            return domain("codebook size must be a power of two >= 2");
        }
        let dims = entries[0].len();
        let per = match modulation {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
        };
        if dims == 0 || !dims.is_multiple_of(per) || entries.iter().any(|e| e.len() != dims) {
            return domain("codewords must share a non-zero length");
        }
        let n = dims / per;
        let energy: f64 = entries[0].iter().map(|v| v * v).sum();
        check_positive("codeword energy", energy)?;
        for e in &entries {
            let en: f64 = e.iter().map(|v| v * v).sum();
            if (en - energy).abs() > 1e-9 * energy {
                return domain("codewords must have equal energy");
            }
        }
        Ok(Self {
            n,
            k: m.trailing_zeros(),
            modulation,
            rho: energy / n as f64,
            entries: Entries::Explicit(entries),
            precoder: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Number of real dimensions of a codeword.
    pub fn dims(&self) -> usize {
        self.n * self.modulation.bits_per_symbol()
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn precoder(&self) -> Option<&str> {
        self.precoder.as_deref()
    }

    pub fn size(&self) -> u64 {
        1u64 << self.k
    }

    /// Codeword energy `n rho`.
    pub fn energy(&self) -> f64 {
        self.n as f64 * self.rho
    }

    /// Per-dimension amplitude of the modulation alphabet.
    pub fn amplitude(&self) -> f64 {
        match self.modulation {
            Modulation::Bpsk => self.rho.sqrt(),
            Modulation::Qpsk => (0.5 * self.rho).sqrt(),
        }
    }

    /// True when message bit `j` maps directly onto real dimension `j`.
    pub fn is_product(&self) -> bool {
        matches!(self.entries, Entries::Product)
    }

    pub fn is_materialized(&self) -> bool {
        matches!(self.entries, Entries::Explicit(_))
    }

    pub fn codeword(&self, m: u64) -> Result<Vec<f64>> {
        if m >= self.size() {
            return domain(format!("message {m} outside codebook of size {}", self.size()));
        }
        let a = self.amplitude();
        Ok(match &self.entries {
            Entries::Product => (0..self.dims()).map(|j| if (m >> j) & 1 == 0 { a } else { -a }).collect(),
            Entries::Explicit(e) => e[m as usize].clone(),
            Entries::Implicit { seed } => random_pattern(*seed, m, 0, self.dims(), a),
        })
    }

    /// All codewords, for codebooks with `k <= 20`.
    pub fn entries(&self) -> Result<Vec<Vec<f64>>> {
        if let Entries::Explicit(e) = &self.entries {
            return Ok(e.clone());
        }
        if self.k > MAX_EXHAUSTIVE_BITS {
            return Err(LatError::Unsupported(format!(
                "cannot list 2^{} codewords (limit 2^{MAX_EXHAUSTIVE_BITS})",
                self.k
            )));
        }
        (0..self.size()).map(|m| self.codeword(m)).collect()
    }

    pub(crate) fn explicit_entries(&self) -> Option<&[Vec<f64>]> {
        match &self.entries {
            Entries::Explicit(e) => Some(e),
            _ => None,
        }
    }

    /// Same codebook with entries replaced, keeping metadata. Used by precoding.
    pub(crate) fn with_entries(&self, entries: Vec<Vec<f64>>, precoder: String) -> Self {
        Self { entries: Entries::Explicit(entries), precoder: Some(precoder), ..self.clone() }
    }
}

fn random_pattern(seed: u64, m: u64, attempt: u64, dims: usize, a: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(seed, m), attempt));
    (0..dims).map(|_| if rng.random::<bool>() { a } else { -a }).collect()
}

/// Builds a BPSK or QPSK codebook of `2^k` messages over `n` symbols.
///
/// With `k = n * bits_per_symbol` each message bit drives one real dimension.
/// Otherwise codewords are seeded random sign patterns: materialized and
/// de-duplicated when `k <= 20`, regenerated on demand from `(seed, index)`
/// above that.
pub fn gen_codebook(n: usize, k: u32, modulation: Modulation, rho: f64, seed: u64) -> Result<Codebook> {
    check_positive("rho", rho)?;
    if n == 0 || k == 0 {
        return domain("codebook needs n >= 1 and k >= 1");
    }
    let dims = n * modulation.bits_per_symbol();
    if k as usize > dims {
        return domain(format!("k = {k} exceeds {dims} modulated bits"));
    }
    if k > 63 {
        return Err(LatError::Unsupported("message ids are limited to 63 bits".into()));
    }
    let mut book = Codebook { n, k, modulation, rho, entries: Entries::Product, precoder: None };
    if k as usize == dims {
        return Ok(book);
    }
    if k > MAX_EXHAUSTIVE_BITS {
        book.entries = Entries::Implicit { seed };
        return Ok(book);
    }
    let a = book.amplitude();
    let mut seen = std::collections::HashSet::new();
    let mut entries = Vec::with_capacity(1 << k);
    for m in 0..(1u64 << k) {
        let mut attempt = 0;
        loop {
            let w = random_pattern(seed, m, attempt, dims, a);
            let key: Vec<bool> = w.iter().map(|v| *v < 0.0).collect();
            if seen.insert(key) {
                entries.push(w);
                break;
            }
            attempt += 1;
        }
    }
    book.entries = Entries::Explicit(entries);
    Ok(book)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn energy(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn antipodal_scalar() {
        let b = gen_codebook(1, 1, Modulation::Bpsk, 4.0, 0).unwrap();
        assert_eq!(b.codeword(0).unwrap(), vec![2.0]);
        assert_eq!(b.codeword(1).unwrap(), vec![-2.0]);
    }

    #[test]
    fn ten_bit_bpsk_codebook() {
        let b = gen_codebook(10, 10, Modulation::Bpsk, 3.0, 0).unwrap();
        let e = b.entries().unwrap();
        assert_eq!(e.len(), 1024);
        for x in &e {
            assert!((energy(x) - 30.0).abs() < 1e-9 * 30.0);
        }
        let distinct: std::collections::HashSet<Vec<u64>> =
            e.iter().map(|x| x.iter().map(|v| v.to_bits()).collect()).collect();
        assert_eq!(distinct.len(), 1024);
    }

    #[test]
    fn qpsk_energy_and_layout() {
        let b = gen_codebook(4, 8, Modulation::Qpsk, 2.0, 0).unwrap();
        assert_eq!(b.dims(), 8);
        let x = b.codeword(0b1000_0001).unwrap();
        assert_eq!(x[0], -1.0);
        assert_eq!(x[7], -1.0);
        assert_eq!(x[1], 1.0);
        assert!((energy(&x) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn random_codebooks_are_seeded() {
        let a = gen_codebook(16, 6, Modulation::Bpsk, 1.0, 7).unwrap();
        let b = gen_codebook(16, 6, Modulation::Bpsk, 1.0, 7).unwrap();
        let c = gen_codebook(16, 6, Modulation::Bpsk, 1.0, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.entries().unwrap(), c.entries().unwrap());
        // tight packing forces de-duplication
        let d = gen_codebook(5, 4, Modulation::Bpsk, 1.0, 3).unwrap();
        let e = d.entries().unwrap();
        let set: std::collections::HashSet<Vec<u64>> =
            e.iter().map(|x| x.iter().map(|v| v.to_bits()).collect()).collect();
        assert_eq!(set.len(), 16);
    }

    #[test]
    fn implicit_codebook() {
        let b = gen_codebook(64, 40, Modulation::Bpsk, 1.0, 1).unwrap();
        assert!(!b.is_materialized());
        assert_eq!(b.codeword(12345).unwrap(), b.codeword(12345).unwrap());
        assert!((energy(&b.codeword(99).unwrap()) - 64.0).abs() < 1e-9);
        assert!(b.entries().is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(gen_codebook(4, 5, Modulation::Bpsk, 1.0, 0).is_err());
        assert!(gen_codebook(4, 8, Modulation::Qpsk, 1.0, 0).is_ok());
        assert!(gen_codebook(4, 2, Modulation::Bpsk, 0.0, 0).is_err());
        assert!(Codebook::from_entries(Modulation::Bpsk, vec![vec![1.0], vec![2.0]]).is_err());
    }
}
