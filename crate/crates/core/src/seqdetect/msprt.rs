use std::cmp::Ordering;

use super::codebook::Codebook;
use super::stream::ObservationStream;
use super::{threshold_from_pairwise, DetectorConfig, StoppingDecision, UNIT_N0};
use crate::error::{domain, LatError, Result};
use crate::special::{log_sum_exp, q_function};

/// One candidate of a list decoder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ListEntry {
    pub message: u64,
    /// `X^m . Y`
    pub correlation: f64,
    /// `||X^m - X^top||^2`
    pub distance_sq_to_top: f64,
}

fn rank(a: &ListEntry, b: &ListEntry) -> Ordering {
    b.correlation
        .partial_cmp(&a.correlation)
        .unwrap_or(Ordering::Equal)
        .then(a.message.cmp(&b.message))
}

/// The `ell` codewords nearest to `y`, nearest first, ties broken by the
/// lower message id. Codewords have equal energy, so distance order is
/// correlation order.
pub fn list_decode(codebook: &Codebook, y: &[f64], ell: usize) -> Result<Vec<ListEntry>> {
    if y.len() != codebook.dims() {
        return domain(format!("observation has {} dims, codebook {}", y.len(), codebook.dims()));
    }
    if ell == 0 || ell as u64 > codebook.size() {
        return domain(format!("list size {ell} outside 1..={}", codebook.size()));
    }
    if codebook.is_product() {
        return Ok(list_decode_product(codebook.amplitude(), y, ell));
    }
    match codebook.explicit_entries() {
        Some(entries) => Ok(list_decode_exhaustive(entries, y, ell)),
        None => Err(LatError::Unsupported(format!(
            "list decoding of an implicit 2^{} codebook is not available",
            codebook.k()
        ))),
    }
}

fn list_decode_exhaustive(entries: &[Vec<f64>], y: &[f64], ell: usize) -> Vec<ListEntry> {
    let mut best: Vec<ListEntry> = Vec::with_capacity(ell + 1);
    for (m, x) in entries.iter().enumerate() {
        let c: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let e = ListEntry { message: m as u64, correlation: c, distance_sq_to_top: 0.0 };
        if best.len() == ell && rank(&e, best.last().unwrap()) != Ordering::Less {
            continue;
        }
        let pos = best.partition_point(|b| rank(b, &e) == Ordering::Less);
        best.insert(pos, e);
        best.truncate(ell);
    }
    let top = &entries[best[0].message as usize];
    for e in best.iter_mut() {
        let x = &entries[e.message as usize];
        e.distance_sq_to_top = x.iter().zip(top).map(|(a, b)| (a - b) * (a - b)).sum();
    }
    best
}

/// Nearest `ell` codewords of a full product codebook: flip subsets of the
/// `ell - 1` least reliable hard decisions. A subset containing a more
/// reliable position is beaten by at least `ell - 1` cheaper flips, so the
/// result matches an exhaustive scan (up to exact ties in reliability).
fn list_decode_product(a: f64, y: &[f64], ell: usize) -> Vec<ListEntry> {
    let mut top = 0u64;
    let mut corr = 0.0;
    for (j, v) in y.iter().enumerate() {
        if *v < 0.0 {
            top |= 1 << j;
        }
        corr += a * v.abs();
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    let r = (ell - 1).min(y.len());
    if r > 0 {
        order.select_nth_unstable_by(r - 1, |&i, &j| {
            y[i].abs().partial_cmp(&y[j].abs()).unwrap_or(Ordering::Equal).then(i.cmp(&j))
        });
    }
    let weak = &order[..r];
    let mut cands: Vec<ListEntry> = (0u32..(1 << r))
        .map(|subset| {
            let mut message = top;
            let mut cost = 0.0;
            for (b, &j) in weak.iter().enumerate() {
                if subset >> b & 1 == 1 {
                    message ^= 1 << j;
                    cost += 2.0 * a * y[j].abs();
                }
            }
            ListEntry {
                message,
                correlation: corr - cost,
                distance_sq_to_top: 4.0 * a * a * subset.count_ones() as f64,
            }
        })
        .collect();
    cands.sort_by(rank);
    cands.truncate(ell);
    cands
}

/// List-decoding guided MSPRT.
///
/// After each increment the `ell` nearest codewords to `Y_t` are listed and
/// the test stops on the nearest one, `m`, as soon as
/// `log sum_{m'} (pi_m'/pi_m) exp((X^m' - X^m) . Y_t / sqrt(u)) < log((1 - S_m) / S_m)`.
/// Without a stop, the nearest codeword at `t = u` is decided.
pub fn run_msprt(
    stream: &mut ObservationStream,
    codebook: &Codebook,
    config: &DetectorConfig,
) -> Result<StoppingDecision> {
    config.validate()?;
    let ell = config.list_size;
    if ell as u64 > codebook.size() {
        return domain(format!("list size {ell} exceeds codebook size {}", codebook.size()));
    }
    let u = stream.samples_per_symbol();
    let scale = 1.0 / (u as f64).sqrt();
    let mut llr = Vec::with_capacity(ell);
    let mut pe = Vec::with_capacity(ell);
    let mut ratios = Vec::with_capacity(ell);
    while stream.advance() {
        let t = stream.t();
        let list = list_decode(codebook, stream.cumulative(), ell)?;
        let top = list[0];
        let prior_top = config.prior(top.message);
        llr.clear();
        pe.clear();
        ratios.clear();
        for e in &list[1..] {
            let ratio = config.prior(e.message) / prior_top;
            llr.push((e.correlation - top.correlation) * scale + ratio.ln());
            pe.push(q_function(e.distance_sq_to_top.sqrt() / (2.0 * UNIT_N0).sqrt()));
            ratios.push(ratio);
        }
        let statistic = log_sum_exp(&llr);
        let s = threshold_from_pairwise(&pe, Some(&ratios), config.thresholds)?;
        let correct = stream.message() == Some(top.message);
        if statistic < ((1.0 - s) / s).ln() {
            return Ok(StoppingDecision::new(t, u, Some(top.message), correct, statistic, Some(s)));
        }
        if t == u {
            return Ok(StoppingDecision::new(t, u, Some(top.message), correct, statistic, None));
        }
    }
    Err(LatError::Precondition("observation stream already consumed".into()))
}
