//! Property tests over random parameters.

use latlab_core::fbl::{achievable_rate, block_error_rate, max_log_code_size, PowerConstraintKind};
use latlab_core::multihop::{af_overall_snr, af_precompensate, af_snr_recursion, RelayState};
use latlab_core::ofdm::{distance_curve, OfdmConfig, Precoder, PrecoderKind};
use latlab_core::seqdetect::Codebook;
use latlab_core::special::{q_function, q_inv};
use num_complex::Complex64;
use proptest::prelude::*;

const KIND: PowerConstraintKind = PowerConstraintKind::EqualOrMaximal;

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.log10()..hi.log10()).prop_map(|e| 10f64.powf(e))
}

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| Complex64::new(a, b)), n)
}

proptest! {
    #[test]
    fn rate_and_error_round_trip(n in 200u64..20_000, eps in log_uniform(1e-9, 0.3), rho in log_uniform(1.0, 100.0)) {
        let r = achievable_rate(n, eps, rho).unwrap();
        let back = block_error_rate(rho, r, n).unwrap();
        prop_assert!(((back - eps) / eps).abs() <= 1e-9, "{back} vs {eps}");
    }

    #[test]
    fn q_inverse_round_trip(p in log_uniform(1e-300, 0.999)) {
        let x = q_inv(p).unwrap();
        prop_assert!(((q_function(x) - p) / p).abs() <= 1e-12, "p = {p}");
    }

    #[test]
    fn code_size_grows_in_its_operating_region(
        n in 10.0..5_000.0f64,
        eps in log_uniform(1e-9, 0.4),
        rho in log_uniform(0.1, 100.0),
    ) {
        let base = max_log_code_size(n, eps, rho, KIND).unwrap();
        prop_assume!(base > 0.0);
        prop_assert!(max_log_code_size(n * 1.01, eps, rho, KIND).unwrap() > base);
        prop_assert!(max_log_code_size(n, eps, rho * 1.01, KIND).unwrap() > base);
        prop_assert!(max_log_code_size(n, (eps * 1.01).min(0.49), rho, KIND).unwrap() >= base);
    }

    #[test]
    fn distance_curve_endpoints(x in complex_vec(16), x2 in complex_vec(16), kind in 0usize..4, t in 0.1..10.0f64) {
        let kind = [PrecoderKind::Identity, PrecoderKind::HadamardSylvester, PrecoderKind::Dft,
            PrecoderKind::RandomRotation { seed: 9 }][kind];
        let cfg = OfdmConfig { n_subcarriers: 16, symbol_duration: t, time_grid: 128 };
        let c = distance_curve(&x, &x2, &cfg, &Precoder::new(kind, 16).unwrap()).unwrap();
        let energy: f64 = x.iter().zip(&x2).map(|(a, b)| (a - b).norm_sqr()).sum();
        prop_assert_eq!(c.values[0], 0.0);
        prop_assert!(c.values.iter().all(|v| *v >= 0.0));
        let end = *c.values.last().unwrap();
        prop_assert!((end - energy * t).abs() <= 1e-9 * (energy * t).max(1e-300));
    }

    #[test]
    fn af_snr_falls_with_hops_and_rises_with_power(p in log_uniform(0.01, 1e4), h in 1u32..60) {
        let s = af_overall_snr(p, h).unwrap();
        let oracle = af_snr_recursion(p, h).unwrap();
        prop_assert!(((s - oracle) / oracle).abs() <= 1e-12);
        prop_assert!(s <= p * (1.0 + 1e-15));
        prop_assert!(af_overall_snr(p, h + 1).unwrap() < s);
        prop_assert!(af_overall_snr(p * 1.1, h).unwrap() > s);
    }

    #[test]
    fn precompensation_spends_the_full_energy(
        noise in prop::collection::vec(-4.0..4.0f64, 6),
        rho in log_uniform(0.1, 100.0),
        sent in 0u64..2,
    ) {
        let book = Codebook::antipodal(6, rho).unwrap();
        let x = book.codeword(sent).unwrap();
        let y: Vec<f64> = x.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let out = af_precompensate(RelayState::new(y).with_decision(sent), &book, rho, 1.0).unwrap();
        let xr = out.x_r.unwrap();
        let e: f64 = xr.iter().map(|v| v * v).sum();
        let target = 6.0 * rho;
        prop_assert!((e - target).abs() <= 1e-9 * target, "{e} vs {target}");
    }
}
