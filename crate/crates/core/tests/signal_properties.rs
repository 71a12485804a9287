use angloc_core::aoa::{smooth_fb, SmoothingConfig};
use angloc_core::csi::linalg::{hermitian_defect, hermitian_eig};
use angloc_core::csi::{CsiPacket, RadioConfig};
use angloc_core::entropy::{ar_psd, entropy_value, ArModel};
use angloc_core::prep::{remove_sfo, tap_filter, SfoSlope, TapThreshold};
use angloc_core::sim::{clean_cfr, synth_trace, ImpairmentSpec, PathComponent};
use num_complex::Complex64;
use proptest::prelude::*;

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), n).prop_map(|v| {
        v.into_iter()
            .map(|(re, im)| Complex64::new(re, im))
            .collect()
    })
}

fn paths() -> impl Strategy<Value = Vec<PathComponent>> {
    prop::collection::vec(
        (
            0.1..1.0f64,
            0.0..std::f64::consts::TAU,
            0.0..300e-9f64,
            -80.0..80.0f64,
        ),
        1..5,
    )
    .prop_map(|v| {
        v.into_iter()
            .map(|(a, phi, tau, theta)| PathComponent::new(a, phi, tau, theta))
            .collect()
    })
}

/// Monic polynomial with the given roots, low-order coefficients first after
/// the leading one: `prod (1 - r z^-1) = 1 + a_1 z^-1 + ...`.
fn coeffs_from_poles(poles: &[Complex64]) -> Vec<Complex64> {
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for &r in poles {
        let mut next = poly.clone();
        next.push(Complex64::new(0.0, 0.0));
        for i in 0..poly.len() {
            next[i + 1] -= r * poly[i];
        }
        poly = next;
    }
    poly[1..].to_vec()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn tap_filter_never_adds_energy(cfr in complex_vec(30), c in 0.05..1.0f64) {
        let out = tap_filter(&cfr, TapThreshold::new(c).unwrap()).unwrap();
        let e_in: f64 = cfr.iter().map(|z| z.norm_sqr()).sum();
        let e_out: f64 = out.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!(e_out <= e_in + 1e-9);
        prop_assert!(e_out >= c * e_in - 1e-9);
    }

    #[test]
    fn sfo_removal_inverts_injection(p in paths(), slope in -2e-7..2e-7f64) {
        let cfg = RadioConfig::default();
        let spec = ImpairmentSpec { sfo: slope, ..ImpairmentSpec::noiseless() };
        let t = synth_trace(&p, &cfg, &spec, 1, 0).unwrap();
        let restored = remove_sfo(&t.packets[0], SfoSlope(slope), &cfg);
        let clean = clean_cfr(&p, &cfg);
        for (a, b) in restored.data().iter().zip(&clean) {
            prop_assert!((a - b).norm() <= 1e-9 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn fb_covariance_is_hermitian_psd(data in complex_vec(90), use_backward in any::<bool>()) {
        let cfg = RadioConfig::default();
        let packet = CsiPacket::new(0.0, cfg.n_rx, cfg.n_tx, cfg.n_sub, data).unwrap();
        let sm = SmoothingConfig { use_backward, ..SmoothingConfig::default() };
        let r = smooth_fb(&packet, &sm, &cfg).unwrap();
        let scale = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(hermitian_defect(&r) <= 1e-12 * scale);
        let eig = hermitian_eig(&r).unwrap();
        prop_assert!(eig.values.iter().all(|&v| v >= -1e-10 * scale));
    }

    #[test]
    fn stable_models_give_unit_psd_and_bounded_entropy(
        poles in prop::collection::vec((0.0..0.95f64, -std::f64::consts::PI..std::f64::consts::PI), 1..8)
    ) {
        let poles: Vec<Complex64> = poles.into_iter().map(|(r, a)| Complex64::from_polar(r, a)).collect();
        let model = ArModel::from_coeffs(coeffs_from_poles(&poles)).unwrap();
        prop_assert!(model.is_stable());
        let psd = ar_psd(&model, 1024).unwrap();
        prop_assert!(psd.values.iter().all(|&v| v > 0.0));
        prop_assert!((psd.integral() - 1.0).abs() <= 1e-6);
        let (h, _) = entropy_value(&model, 1024).unwrap();
        prop_assert!(h <= 1e-6, "entropy {h}");
    }
}
