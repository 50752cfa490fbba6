use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use trisim_core::open_system::*;
use trisim_core::{DensityMatrix, FockSpace, OscillatorParams, StateVector, C64};

/// `L_n(x)` by the three-term recurrence.
fn laguerre(n: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, 1.0 - x);
    if n == 0 {
        return a;
    }
    for k in 1..n {
        let c = ((2 * k + 1) as f64 - x) * b - k as f64 * a;
        a = b;
        b = c / (k + 1) as f64;
    }
    b
}

#[test]
fn fock_wigner_matches_laguerre_form() {
    let space = FockSpace::single(12).unwrap();
    for n in [0usize, 1, 2, 5, 9] {
        let rho = DensityMatrix::from_pure(&StateVector::basis(space, &[n]).unwrap());
        for a in [
            C64::new(0.0, 0.0),
            C64::new(0.4, -0.3),
            C64::new(1.1, 0.7),
            C64::new(-2.0, 0.5),
        ] {
            let x = 4.0 * a.norm_sqr();
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let want = 2.0 / PI * sign * (-x / 2.0).exp() * laguerre(n, x);
            assert_abs_diff_eq!(wigner_at(&rho, a), want, epsilon = 1e-12);
        }
    }
}

#[test]
fn sign_change_along_r_at_strong_damping() {
    let base = ScanBase {
        params: OscillatorParams::tripling(0.0, 0.0),
        diss: DissipationParams {
            kappa: 0.5,
            nbar: 0.0,
        },
        cutoff: DEFAULT_CUTOFF,
        method: ScanMethod::Quantum,
    };
    let t = scan_laplacian(
        AxisSpec::new(ScanAxis::R, 0.0, 1.2, 13).unwrap(),
        None,
        &base,
    )
    .unwrap();
    let (_, crossings) = &t.sign_boundaries()[0];
    assert_eq!(crossings.len(), 1, "{crossings:?}");
    assert!(crossings[0] > 0.6 && crossings[0] < 1.1, "{crossings:?}");
    assert!(t.points[0].laplacian.unwrap() < 0.0);
}

#[test]
fn semiclassical_baseline_stays_negative() {
    let base = ScanBase {
        params: OscillatorParams::tripling(0.0, 0.0),
        diss: DissipationParams {
            kappa: 0.5,
            nbar: 0.0,
        },
        cutoff: DEFAULT_CUTOFF,
        method: ScanMethod::Semiclassical,
    };
    let t = scan_laplacian(
        AxisSpec::new(ScanAxis::R, 0.0, 1.5, 7).unwrap(),
        None,
        &base,
    )
    .unwrap();
    for p in &t.points {
        assert!(
            p.laplacian.unwrap() < 0.0,
            "r = {}: {:?}",
            p.a1,
            p.laplacian
        );
    }
}

#[test]
fn fokker_planck_is_grid_converged() {
    let p = OscillatorParams::tripling(0.0, 1.0);
    let d = DissipationParams {
        kappa: 0.5,
        nbar: 0.0,
    };
    let coarse = semiclassical_steady_state(&p, &d, &FpeOptions::default()).unwrap();
    let fine = semiclassical_steady_state(
        &p,
        &d,
        &FpeOptions {
            points: 161,
            half_width: None,
        },
    )
    .unwrap();
    let (a, b) = (
        coarse.laplacian_at_origin().unwrap().value,
        fine.laplacian_at_origin().unwrap().value,
    );
    assert!((a - b).abs() < 0.02 * b.abs(), "{a} vs {b}");
    assert_abs_diff_eq!(fine.integral(), 1.0, epsilon = 1e-6);
    assert!(coarse.warnings.is_empty(), "{:?}", coarse.warnings);
}

#[test]
fn steady_state_wigner_is_threefold_symmetric() {
    let p = OscillatorParams::tripling(0.0, 1.0);
    let rho = steady_state_for(
        &p,
        &DissipationParams {
            kappa: 0.5,
            nbar: 0.0,
        },
        30,
    )
    .unwrap();
    let rot = C64::from_polar(1.0, 2.0 * PI / 3.0);
    for a in [C64::new(0.8, 0.1), C64::new(-0.3, 1.2), C64::new(0.0, 0.5)] {
        assert_abs_diff_eq!(
            wigner_at(&rho, a),
            wigner_at(&rho, a * rot),
            epsilon = 1e-10
        );
    }
    let g = wigner(&rho, &GridSpec::new(4.0, 81).unwrap()).unwrap();
    assert_abs_diff_eq!(g.integral(), 1.0, epsilon = 1e-4);
}

#[test]
fn origin_is_a_stable_fixed_point() {
    for (delta, r, kappa) in [(0.0, 1.0, 0.5), (3.0, 1.8, 0.1), (0.5, 0.02, 0.9)] {
        let rep = classical_fixed_points(
            &OscillatorParams::tripling(delta, r),
            &DissipationParams { kappa, nbar: 0.0 },
        )
        .unwrap();
        assert!(rep.points[0].alpha.norm() < 1e-12);
        assert!(rep.points[0].stable);
    }
}

#[test]
fn fixed_points_match_quadratic_roots() {
    let (delta, r, kappa) = (1.0, 1.2, 0.3);
    let rep = classical_fixed_points(
        &OscillatorParams::tripling(delta, r),
        &DissipationParams { kappa, nbar: 0.0 },
    )
    .unwrap();
    let c = delta - 2.0;
    let (qa, qb, qc) = (4.0, 4.0 * c - 9.0 * r * r, c * c + kappa * kappa / 4.0);
    let disc = (qb * qb - 4.0 * qa * qc).sqrt();
    let mut roots = [(-qb - disc) / (2.0 * qa), (-qb + disc) / (2.0 * qa)];
    roots.sort_by(f64::total_cmp);
    let mut radii: Vec<f64> = rep
        .points
        .iter()
        .skip(1)
        .map(|p| p.alpha.norm_sqr())
        .collect();
    radii.sort_by(f64::total_cmp);
    assert_eq!(radii.len(), 6);
    for (k, u) in radii.iter().enumerate() {
        assert_abs_diff_eq!(*u, roots[k / 3], epsilon = 1e-9);
    }
    assert_eq!(rep.stable_nonzero(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn liouvillian_preserves_trace(delta in 0.0f64..3.0, r in 0.0f64..2.0, kappa in 0.01f64..1.0, nbar in 0.0f64..2.0) {
        let m = 12;
        let l = liouvillian(&OscillatorParams::tripling(delta, r), &DissipationParams { kappa, nbar }, FockSpace::single(m).unwrap()).unwrap();
        let mut id = vec![C64::new(0.0, 0.0); m * m];
        for k in 0..m {
            id[k * m + k] = C64::new(1.0, 0.0);
        }
        let back = l.matrix().adjoint().matvec(&id);
        prop_assert!(back.iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn steady_states_are_physical(delta in 0.0f64..2.0, r in 0.0f64..1.5, kappa in 0.2f64..1.0, nbar in 0.0f64..0.5) {
        let rho = steady_state_for(&OscillatorParams::tripling(delta, r), &DissipationParams { kappa, nbar }, 24).unwrap();
        let d = rho.diagnostics();
        prop_assert!(d.is_physical(), "{:?}", d);
        let est = laplacian_at_origin(&rho).unwrap();
        prop_assert!((est.value - est.exact.unwrap()).abs() < 1e-2 * est.exact.unwrap().abs().max(0.05 * 4.0 / PI));
    }

    #[test]
    fn threshold_is_where_three_states_appear(delta in 0.0f64..6.0, kappa in 0.01f64..1.0) {
        let rc = three_state_threshold(delta, kappa, 1.0);
        let d = DissipationParams { kappa, nbar: 0.0 };
        let below = classical_fixed_points(&OscillatorParams::tripling(delta, 0.97 * rc), &d).unwrap();
        let above = classical_fixed_points(&OscillatorParams::tripling(delta, 1.03 * rc + 1e-6), &d).unwrap();
        prop_assert!(!below.three_state_regime);
        prop_assert!(above.three_state_regime);
    }

    #[test]
    fn landau_zener_is_a_probability(omega in 0.0f64..5.0, beta in 0.01f64..5.0) {
        let p = landau_zener(omega, beta).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(landau_zener(omega * 1.1 + 1e-3, beta).unwrap() >= p);
    }
}
