use nalgebra::DMatrix;
use num_complex::Complex64;
use precursor_core::analysis::{causality_metric, fit_decay_exponent, peak, rms_width, SweepRecord};
use precursor_core::grid::{forward_transform, inverse_transform, make_grid, SampledSignal};
use precursor_core::media::{
    coupled_steady_state, eval_a, fit_small_omega, interval_transfer, transfer_function, Layer, MediumModel,
};
use precursor_core::propagate::impulse_response;
use precursor_core::signals::PulseSpec;
use precursor_core::stochastic::{stochastic_impulse, EnsembleSpec};
use proptest::prelude::*;

fn quadratic() -> impl Strategy<Value = MediumModel> {
    (0.0..2.0f64, 1.0..50.0f64, 0.2..5.0f64).prop_map(|(l, a, v)| MediumModel::quadratic(l, a, v).unwrap())
}

fn exp_kernel() -> impl Strategy<Value = MediumModel> {
    (0.5..20.0f64, 0.1..20.0f64).prop_map(|(k, kp)| MediumModel::exp_kernel(k, kp).unwrap())
}

fn homogeneous() -> impl Strategy<Value = MediumModel> {
    prop_oneof![quadratic(), exp_kernel()]
}

fn layered() -> impl Strategy<Value = MediumModel> {
    (prop::collection::vec((0.1..2.0f64, homogeneous()), 1..4), any::<bool>()).prop_map(|(layers, tail)| {
        let layers = layers
            .into_iter()
            .map(|(thickness, medium)| Layer { thickness, medium })
            .collect();
        MediumModel::layered(layers, tail).unwrap()
    })
}

fn any_medium() -> impl Strategy<Value = MediumModel> {
    prop_oneof![homogeneous(), layered()]
}

fn reach(m: &MediumModel) -> f64 {
    match m {
        MediumModel::Layered(s) if !s.free_space_tail() => s.total_thickness(),
        _ => 5.0,
    }
}

fn close(x: Complex64, y: Complex64, rel: f64) -> bool {
    (x - y).norm() <= rel * x.norm().max(y.norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn transfer_is_passive(m in any_medium(), zf in 0.0..1.0f64, w in -50.0..50.0f64) {
        let z = zf * reach(&m);
        let mz = transfer_function(&m, z, w).unwrap();
        prop_assert!(mz.norm() <= 1.0 + 1e-15);
    }

    #[test]
    fn homogeneous_semigroup(m in homogeneous(), z1 in 0.0..2.5f64, z2 in 0.0..2.5f64, w in -10.0..10.0f64) {
        let lhs = transfer_function(&m, z1, w).unwrap() * transfer_function(&m, z2, w).unwrap();
        let rhs = transfer_function(&m, z1 + z2, w).unwrap();
        prop_assert!(close(lhs, rhs, 1e-12), "{lhs} vs {rhs}");
    }

    #[test]
    fn layered_semigroup_across_boundaries(m in layered(), f1 in 0.0..1.0f64, f2 in 0.0..1.0f64, w in -10.0..10.0f64) {
        let total = reach(&m);
        let (z1, z12) = {
            let (a, b) = (f1 * total, f2 * total);
            (a.min(b), a.max(b))
        };
        let lhs = transfer_function(&m, z1, w).unwrap() * interval_transfer(&m, z1, z12, w).unwrap();
        let rhs = transfer_function(&m, z12, w).unwrap();
        prop_assert!(close(lhs, rhs, 1e-12), "{lhs} vs {rhs}");
    }

    #[test]
    fn exponent_is_hermitian(m in homogeneous(), w in -100.0..100.0f64) {
        prop_assert_eq!(eval_a(&m, -w).unwrap(), eval_a(&m, w).unwrap().conj());
    }

    #[test]
    fn exp_kernel_is_locally_quadratic(k in 1.0..20.0f64, kp in 0.1..20.0f64, frac in 0.01..0.1f64) {
        let m = MediumModel::exp_kernel(k, kp).unwrap();
        let w = frac * k;
        let b = eval_a(&m, w).unwrap().re;
        let a_eq = k.powi(3) / (2.0 * kp);
        let approx = w * w / (2.0 * a_eq);
        prop_assert!((b - approx).abs() < 0.01 * b);
    }

    #[test]
    fn static_response_ignores_damping(
        n in 1usize..5,
        d1 in prop::collection::vec(0.0..5.0f64, 5),
        d2 in prop::collection::vec(0.0..5.0f64, 5),
        u in -2.0..2.0f64,
    ) {
        let masses = vec![1.0; n];
        let k = DMatrix::from_fn(n, n, |i, j| if i == j { 3.0 } else if i.abs_diff(j) == 1 { -1.0 } else { 0.0 });
        let x1 = coupled_steady_state(&masses, &d1[..n], &k, u, 0.0).unwrap();
        let x2 = coupled_steady_state(&masses, &d2[..n], &k, u, 0.0).unwrap();
        prop_assert_eq!(x1, x2);
    }

    #[test]
    fn transforms_round_trip(t in 0.3..2.0f64, w0 in 0.0..4.0f64, shift in -3.0..3.0f64) {
        let g = make_grid(1024, 0.05, -25.6).unwrap();
        let f = SampledSignal::from_fn(g, |s| (-(s - shift).powi(2) / (2.0 * t * t)).exp() * (w0 * s).cos()).unwrap();
        let back = inverse_transform(&forward_transform(&f));
        prop_assert!(back.max_abs_diff(&f) < 1e-12);
    }

    #[test]
    fn peak_and_width_follow_translation(t in 0.5..2.0f64, w0 in 0.0..3.0f64, k in -200i32..200) {
        let dt = 0.05;
        let g = make_grid(2048, dt, -51.2).unwrap();
        let shifted = make_grid(2048, dt, -51.2 + k as f64 * dt).unwrap();
        let f = PulseSpec::gaussian(t, w0).unwrap().sample(&g).unwrap();
        let moved = SampledSignal::new(shifted, f.values().to_vec()).unwrap();
        let (tp, ap) = peak(&f).unwrap();
        let (ts, as_) = peak(&moved).unwrap();
        prop_assert!((ts - tp - k as f64 * dt).abs() < 1e-9);
        prop_assert_eq!(ap, as_);
        prop_assert!((rms_width(&moved).unwrap() - rms_width(&f).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn decay_fit_ignores_amplitude_scale(
        amps in prop::collection::vec(0.01..10.0f64, 5),
        scale in 1e-6..1e6f64,
    ) {
        let zs = [100.0, 200.0, 400.0, 800.0, 1600.0];
        let rec = |s: f64| -> Vec<SweepRecord> {
            zs.iter().zip(&amps).map(|(&z, &a)| SweepRecord::new(z, z, s * a, 1.0, 0.0).unwrap()).collect()
        };
        let (s1, _) = fit_decay_exponent(&rec(1.0)).unwrap();
        let (s2, _) = fit_decay_exponent(&rec(scale)).unwrap();
        prop_assert!((s1 - s2).abs() < 1e-12);
    }

    #[test]
    fn stochastic_impulse_is_symmetric(b in 0.5..20.0f64, m in 0u32..6, z in 0.5..20.0f64, d in 0.0..30.0f64) {
        let s = EnsembleSpec::new(b, m, 1.0).unwrap();
        let l = stochastic_impulse(&s, z, z - d).unwrap();
        let r = stochastic_impulse(&s, z, z + d).unwrap();
        // z ± d rounds differently; the error grows with the exponent
        prop_assert!((l - r).abs() <= 1e-12 * l.abs().max(r.abs()));
    }

    #[test]
    fn stochastic_peak_scales_with_depth(b in 0.5..20.0f64, m in 0u32..8, z in 0.5..20.0f64) {
        let s = EnsembleSpec::new(b, m, 1.0).unwrap();
        let ratio = stochastic_impulse(&s, z, z).unwrap() / stochastic_impulse(&s, 4.0 * z, 4.0 * z).unwrap();
        prop_assert!((ratio - 2.0).abs() < 1e-12);
    }
}

#[test]
fn causality_metric_falls_with_depth_parameter() {
    let g = make_grid(8192, 0.01, -40.96).unwrap();
    let mut last = f64::INFINITY;
    for az in [0.5, 1.0, 2.0, 4.0, 8.0] {
        let m = MediumModel::quadratic(0.0, az, 1.0).unwrap();
        let metric = causality_metric(&impulse_response(&m, 1.0, &g).unwrap()).unwrap();
        assert!(metric <= last, "az/v² = {az}: {metric} > {last}");
        last = metric;
    }
}

#[test]
fn small_omega_fit_recovers_quadratic() {
    let m = MediumModel::quadratic(0.3, 4.0, 2.0).unwrap();
    let fit = fit_small_omega(&m, 1.0, 50).unwrap();
    assert!((fit.a - 4.0).abs() < 1e-10);
    assert!((fit.v - 2.0).abs() < 1e-10);
    assert!((fit.ell_inv - 0.3).abs() < 1e-12);
}
