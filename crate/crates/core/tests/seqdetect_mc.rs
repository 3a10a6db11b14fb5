//! Monte-Carlo checks of the sequential detectors against their bounds.

use latlab_core::seqdetect::{
    derive_seed, dragalin_asymptotic, gen_codebook, run_campaign, transmit, wald_stop_lower_bounds, Codebook,
    CodebookSpec, DetectorConfig, DetectorKind, LatencyReport, Modulation, Scenario, ThresholdMode,
};
use latlab_core::special::q_inv;

fn ten_bit_bpsk(list_size: usize, thresholds: ThresholdMode) -> Scenario {
    Scenario {
        detector: DetectorKind::Msprt,
        codebook: CodebookSpec::Generated { n: 10, k: 10, modulation: Modulation::Bpsk, seed: 0 },
        rho: 2.0 * 10f64.powf(0.96),
        u: 100,
        config: DetectorConfig { list_size, thresholds, ..Default::default() },
    }
}

fn wald(n: usize, rho: f64, u: usize) -> Scenario {
    Scenario {
        detector: DetectorKind::Wald,
        codebook: CodebookSpec::Antipodal { n },
        rho,
        u,
        config: DetectorConfig::default(),
    }
}

/// Per-dimension matched-filter SNR `mean^2 / var` of the cumulative sum after
/// `t` increments, pooled over every dimension of a BPSK product codeword.
fn empirical_snr(rho: f64, u: usize, t: usize, trials: u64) -> f64 {
    let book = gen_codebook(10, 10, Modulation::Bpsk, rho, 0).unwrap();
    let (mut sum, mut sum_sq, mut count) = (0.0, 0.0, 0.0);
    for i in 0..trials {
        let m = i % book.size();
        let x = book.codeword(m).unwrap();
        let mut s = transmit(&book, m, u, derive_seed(11, i)).unwrap();
        for _ in 0..t {
            s.advance();
        }
        for (y, xj) in s.cumulative().iter().zip(&x) {
            let z = y * xj.signum();
            sum += z;
            sum_sq += z * z;
            count += 1.0;
        }
    }
    let mean = sum / count;
    mean * mean / (sum_sq / count - mean * mean)
}

#[test]
fn cumulative_snr_is_linear_in_t() {
    let (rho, u) = (4.0, 100);
    for t in [25, 50, 100] {
        let snr = empirical_snr(rho, u, t, 100_000);
        let want = t as f64 / u as f64 * rho;
        assert!((snr - want).abs() <= 0.01 * want, "t={t}: {snr} vs {want}");
    }
}

#[test]
fn wald_error_tracks_target() {
    // antipodal scalar pair with pairwise error exactly 1e-2
    let pe = 1e-2;
    let rho = q_inv(pe).unwrap().powi(2);
    let r = run_campaign(&wald(1, rho, 200), 100_000, 5, 1).unwrap();
    assert!(r.error_rate >= pe / 2.0 && r.error_rate <= 2.0 * pe, "{}", r.error_rate);
}

#[test]
fn wald_respects_poor_hadjiliadis_bound() {
    for (i, rho) in [1.0, 2.0, 4.0].into_iter().enumerate() {
        let sc = wald(8, rho, 100);
        let book = Codebook::antipodal(8, rho).unwrap();
        let (b1, b2) =
            wald_stop_lower_bounds(&book.codeword(0).unwrap(), &book.codeword(1).unwrap(), 100, &sc.config).unwrap();
        let r = run_campaign(&sc, 20_000, derive_seed(7, i as u64), 1).unwrap();
        let lower = 0.5 * (b1 + b2) / 100.0;
        assert!(r.mean_stop_fraction >= lower, "rho={rho}: {} < {lower}", r.mean_stop_fraction);
    }
}

fn assert_within_bound(label: &str, r: &LatencyReport) {
    let bound = r.error_bound.expect("MSPRT reports its bound");
    assert!(
        r.error_rate <= bound + 3.0 * r.confidence_halfwidth,
        "{label}: error {} > bound {bound} + 3 x {}",
        r.error_rate,
        r.confidence_halfwidth
    );
}

#[test]
fn msprt_respects_baum_veeravalli_bound() {
    for ell in [2, 3, 5] {
        let r = run_campaign(&ten_bit_bpsk(ell, ThresholdMode::Corollary), 20_000, 3, 1).unwrap();
        assert_within_bound(&format!("ten-bit BPSK l={ell}"), &r);
    }
    for (rho, seed) in [(8.0, 1), (12.0, 2)] {
        let sc = Scenario {
            detector: DetectorKind::Msprt,
            codebook: CodebookSpec::Generated { n: 8, k: 4, modulation: Modulation::Bpsk, seed },
            rho,
            u: 100,
            config: DetectorConfig { list_size: 16, ..Default::default() },
        };
        let r = run_campaign(&sc, 20_000, 4, 1).unwrap();
        assert_within_bound(&format!("full list rho={rho}"), &r);
    }
}

#[test]
fn raising_thresholds_trades_latency_for_errors() {
    let reports: Vec<LatencyReport> = [0.9, 0.99, 0.999]
        .into_iter()
        .map(|s| run_campaign(&ten_bit_bpsk(2, ThresholdMode::Fixed(s)), 20_000, 9, 1).unwrap())
        .collect();
    for w in reports.windows(2) {
        assert!(w[1].errors <= w[0].errors, "{} > {}", w[1].errors, w[0].errors);
        assert!(w[1].mean_stop_fraction >= w[0].mean_stop_fraction);
    }
    assert!(reports[2].mean_stop_fraction > reports[0].mean_stop_fraction);
}

#[test]
fn dragalin_asymptote_at_high_threshold() {
    let (rho, u, s) = (20.0, 1000, 1.0 - 1e-4);
    let sc = Scenario {
        detector: DetectorKind::Msprt,
        codebook: CodebookSpec::Antipodal { n: 1 },
        rho,
        u,
        config: DetectorConfig { thresholds: ThresholdMode::Fixed(s), ..Default::default() },
    };
    let r = run_campaign(&sc, 10_000, 13, 1).unwrap();
    // KL per increment between the two antipodal increments
    let d = 4.0 * rho / (2.0 * u as f64);
    let want = dragalin_asymptotic(s, d, 1).unwrap();
    let got = r.mean_stop_fraction * u as f64;
    assert!((got - want).abs() <= 0.15 * want, "E[tau] = {got} increments vs {want}");
}

#[test]
fn campaigns_ignore_worker_count() {
    let sc = ten_bit_bpsk(3, ThresholdMode::Corollary);
    let one = run_campaign(&sc, 3_000, 21, 1).unwrap();
    for w in [2, 4, 8] {
        assert_eq!(run_campaign(&sc, 3_000, 21, w).unwrap(), one);
    }
    let crc = Scenario {
        detector: DetectorKind::CrcGenie,
        codebook: CodebookSpec::Crc { k: 150 },
        rho: 19.0,
        u: 100,
        config: DetectorConfig { min_tau_fraction: 0.01, ..Default::default() },
    };
    assert_eq!(run_campaign(&crc, 2_000, 22, 1).unwrap(), run_campaign(&crc, 2_000, 22, 8).unwrap());
}
