//! Acceptance criteria. Each criterion prints one `PASS`/`FAIL` line.
//!
//! Run a subset with `cargo test --test acceptance -- <substring>`.
//! Criteria listed in `KNOWN_UNMET` are implemented as stated, print
//! `FAIL (known)` when they fail and do not change the exit status.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use trisim_core::evolve::{default_cutoff, SweepOptions};
use trisim_core::lanczos::LanczosOptions;
use trisim_core::open_system::{
    classical_fixed_points, laplacian_at_origin, scan_laplacian, semiclassical_steady_state,
    steady_state_for, wigner, AxisSpec, DissipationParams, FpeOptions, GridSpec, ScanAxis,
    ScanBase, ScanMethod, DEFAULT_CUTOFF,
};
use trisim_core::povm::e_theta_dense;
use trisim_core::spectra::{
    compare_coupling_shift, dominant_orbit, lowest_symmetric_state,
    symmetrized_configuration_energies, SpectrumOptions,
};
use trisim_core::*;

const KNOWN_UNMET: &[&str] = &["frustrated-triangle", "scan-monotonicity"];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn tripling_sweep() -> SweepSchedule {
    SweepSchedule::new(1.4, 6.0, 100.0).unwrap()
}

fn sweep(
    params: OscillatorParams,
    config: ArrayConfig,
    schedule: &SweepSchedule,
    cutoff: usize,
    guard: f64,
) -> Trajectory {
    let space = FockSpace::new(cutoff, config.n_sites).unwrap();
    let opts = SweepOptions {
        leakage_threshold: guard,
        ..Default::default()
    };
    propagate_sweep_with(&params, &config, schedule, space, &opts).unwrap()
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn povm_completeness() -> Outcome {
    let mut worst_sum: f64 = 0.0;
    let mut worst_diag: f64 = 0.0;
    for m in [10, 30, 60] {
        let set = measurement_set(DriveOrder::Tripling, FockSpace::single(m).unwrap()).unwrap();
        worst_sum = worst_sum.max(set.completeness_defect());
        let e = e_theta_dense(PI / 3.0, m).unwrap();
        for i in 0..m {
            worst_diag = worst_diag.max((e[(i, i)] - 1.0 / 3.0).abs());
        }
    }
    outcome(
        worst_sum <= 1e-10 && worst_diag <= 1e-12,
        format!("max |sum P - I| = {worst_sum:.2e}, max |E_nn - 1/3| = {worst_diag:.2e}"),
    )
}

fn vacuum_probabilities() -> Outcome {
    let mut worst: f64 = 0.0;
    for (n, want) in [(1usize, 1.0 / 3.0), (2, 1.0 / 9.0)] {
        let space = FockSpace::new(20, n).unwrap();
        let set = measurement_set(DriveOrder::Tripling, space.mode_space()).unwrap();
        let t = config_probabilities(&StateVector::vacuum(space), &set, n).unwrap();
        for p in &t.probs {
            worst = worst.max((p - want).abs());
        }
    }
    outcome(worst <= 1e-10, format!("max deviation {worst:.2e}"))
}

static RING3: OnceLock<(Trajectory, Trajectory)> = OnceLock::new();

fn ring3_runs() -> &'static (Trajectory, Trajectory) {
    RING3.get_or_init(|| {
        let s = tripling_sweep();
        let p = OscillatorParams::tripling(0.0, 0.0);
        (
            sweep(p, ArrayConfig::ring(3, 0.4).unwrap(), &s, 20, 1e-2),
            sweep(p, ArrayConfig::ring(3, -0.4).unwrap(), &s, 20, 1e-2),
        )
    })
}

fn ring3_endpoints() -> Outcome {
    let (ferro, anti) = ring3_runs();
    let p000 = ferro.final_table().get(&[0, 0, 0]);
    let p012 = anti.final_table().get(&[0, 1, 2]);
    outcome(
        (p000 - 1.0 / 3.0).abs() <= 0.05 && (p012 - 1.0 / 6.0).abs() <= 0.04,
        format!(
            "ferro p000 = {p000:.4}, antiferro p012 = {p012:.4}; leakage {:.1e}/{:.1e} at cutoff 20",
            ferro.max_leakage(),
            anti.max_leakage()
        ),
    )
}

fn geometric_phase() -> Outcome {
    let (_, anti) = ring3_runs();
    let asym = geometric_asymmetry(anti, &[0, 0, 1], &[0, 0, 2]).unwrap();
    let spread = anti.max_intra_orbit_spread();
    outcome(
        asym > 0.01 && spread <= 1e-6,
        format!("max|p001 - p002| = {asym:.4}, intra-orbit spread {spread:.1e}"),
    )
}

fn ring4_signature() -> Outcome {
    let tr = sweep(
        OscillatorParams::tripling(0.0, 0.0),
        ArrayConfig::ring(4, -0.4).unwrap(),
        &tripling_sweep(),
        14,
        1e-2,
    );
    let a = max_of(&tr.series(&[0, 1, 0, 1]).unwrap());
    let b = max_of(&tr.series(&[0, 1, 0, 2]).unwrap());
    let asym = geometric_asymmetry(&tr, &[0, 1, 0, 1], &[0, 1, 0, 2]).unwrap();
    outcome(
        a > 0.05 && b > 0.05 && asym > 0.02,
        format!(
            "max p0101 = {a:.4}, max p0102 = {b:.4}, max|p0101 - p0102| = {asym:.4}; leakage {:.1e} at cutoff 14",
            tr.max_leakage()
        ),
    )
}

fn symmetric_spectrum() -> Outcome {
    let p = OscillatorParams::tripling(0.0, 1.4);
    let space = FockSpace::new(20, 3).unwrap();
    let spec = array_low_spectrum(
        &p,
        &ArrayConfig::ring(3, 0.4).unwrap(),
        space,
        27,
        &SpectrumOptions::default(),
    )
    .unwrap();
    let count = spec.symmetric_count();
    let ferro = compare_coupling_shift(&p, CouplingSign::Ferro, 0.4, 3, space).unwrap();
    let anti = compare_coupling_shift(&p, CouplingSign::Antiferro, 0.4, 3, space).unwrap();
    let band = |x: f64| (0.2..=0.4).contains(&x);
    outcome(
        count == 4 && band(ferro.overestimate) && band(anti.overestimate),
        format!(
            "{count} symmetric among lowest 27 (ferro ring); overestimate ferro {:.1}% ({:.3} vs {:.3}), \
             antiferro {:.1}% ({:.3} vs {:.3})",
            100.0 * ferro.overestimate,
            ferro.perturbative,
            ferro.numerical,
            100.0 * anti.overestimate,
            anti.perturbative,
            anti.numerical
        ),
    )
}

fn frustrated_triangle() -> Outcome {
    let p = OscillatorParams::tripling(0.0, 1.4);
    let config = ArrayConfig::frustrated_triangle(0.4).unwrap();
    let space = FockSpace::new(20, 3).unwrap();
    let (_, psi) = lowest_symmetric_state(&p, &config, space, &LanczosOptions::default()).unwrap();
    let h = model::HamiltonianParts::new(&config, p.drive_order, space)
        .unwrap()
        .assemble(&p);
    let gens = SymmetryGenerators::for_hamiltonian(space, 3, &h).unwrap();
    let set = measurement_set(DriveOrder::Tripling, space.mode_space()).unwrap();
    let (orbit, prob) = dominant_orbit(&psi, &set, &gens).unwrap();
    let configs = [vec![0, 0, 0], vec![0, 1, 1], vec![0, 2, 2]];
    let energies = symmetrized_configuration_energies(&p, &config, space, &configs).unwrap();
    let text: Vec<String> = energies
        .iter()
        .map(|e| format!("{}: {:.3}", povm::config_label(&e.configuration), e.energy))
        .collect();
    outcome(
        orbit.contains(&[0, 0, 0]),
        format!(
            "dominant orbit of lowest symmetric state {} (per-configuration p = {prob:.4}); \
             symmetrized configuration energies {}",
            povm::config_label(&orbit.representative),
            text.join(", ")
        ),
    )
}

fn open_system_sign_flip() -> Outcome {
    let d = DissipationParams {
        kappa: 0.5,
        nbar: 0.0,
    };
    let floor = 0.05 * 4.0 / PI;
    let mut parts = Vec::new();
    let mut pass = true;
    for r in [0.75, 1.0] {
        let p = OscillatorParams::tripling(0.0, r);
        let q = laplacian_at_origin(&steady_state_for(&p, &d, DEFAULT_CUTOFF).unwrap())
            .unwrap()
            .value;
        let sc = semiclassical_steady_state(&p, &d, &FpeOptions::default())
            .unwrap()
            .laplacian_at_origin()
            .unwrap()
            .value;
        pass &= sc < 0.0 && if r < 0.9 { q.abs() < floor } else { q > 0.0 };
        parts.push(format!("r = {r}: quantum {q:.4}, semiclassical {sc:.4}"));
    }
    outcome(pass, parts.join("; "))
}

fn scan_monotonicity() -> Outcome {
    let base = ScanBase {
        params: OscillatorParams::tripling(0.0, 0.0),
        diss: DissipationParams {
            kappa: 0.01,
            nbar: 0.0,
        },
        cutoff: DEFAULT_CUTOFF,
        method: ScanMethod::Quantum,
    };
    let r_axis = AxisSpec::new(ScanAxis::R, 0.0, 2.0, 11).unwrap();
    let nbar = scan_laplacian(
        r_axis,
        Some(AxisSpec::new(ScanAxis::Nbar, 0.0, 1.0, 11).unwrap()),
        &base,
    )
    .unwrap();
    let delta = scan_laplacian(
        r_axis,
        Some(AxisSpec::new(ScanAxis::Delta, 0.0, 1.0, 11).unwrap()),
        &base,
    )
    .unwrap();
    let failed = nbar
        .points
        .iter()
        .chain(&delta.points)
        .filter(|p| p.laplacian.is_none())
        .count();

    let extent = nbar.positive_extent();
    let shrinks = extent.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9)
        && extent[extent.len() - 1].1 < extent[0].1;
    let integral = nbar.positive_integral();

    let onsets: Vec<f64> = delta
        .sign_boundaries()
        .iter()
        .map(|(_, c)| c.first().copied().unwrap_or(f64::NAN))
        .collect();
    let shifts = onsets.windows(2).all(|w| w[1] >= w[0]) && onsets[onsets.len() - 1] > onsets[0];

    let fmt = |v: &[(f64, f64)]| {
        v.iter()
            .map(|(_, x)| format!("{x:.3}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    outcome(
        shrinks && shifts && failed == 0,
        format!(
            "nbar 0..1: positive r-extent {} [{}], positive-part integral {}; \
             delta 0..1: onset r {} [{}]; {failed} failed points",
            if shrinks {
                "shrinks"
            } else {
                "does not shrink"
            },
            fmt(&extent),
            fmt(&integral),
            if shifts {
                "increases"
            } else {
                "does not increase"
            },
            onsets
                .iter()
                .map(|x| format!("{x:.3}"))
                .collect::<Vec<_>>()
                .join(" "),
        ),
    )
}

fn classical_threshold() -> Outcome {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x7411);
    let mut agree = 0;
    let mut three = 0;
    for _ in 0..100 {
        let r = rng.random_range(0.0..=2.0);
        let delta = rng.random_range(0.0..=6.0);
        let kappa = 1.0 - rng.random_range(0.0..1.0);
        if let Ok(rep) = classical_fixed_points(
            &OscillatorParams::tripling(delta, r),
            &DissipationParams { kappa, nbar: 0.0 },
        ) {
            if rep.three_state_regime == rep.closed_form {
                agree += 1;
                three += usize::from(rep.three_state_regime);
            }
        }
    }
    outcome(
        agree == 100,
        format!("{agree}/100 points agree ({three} in the three-state regime)"),
    )
}

fn period_doubling() -> Outcome {
    let s = SweepSchedule::new(2.0, 6.0, 25.0).unwrap();
    let p = OscillatorParams::doubling(0.0, 0.0);
    let run = |n: usize, v: f64| {
        sweep(
            p,
            ArrayConfig::ring(n, v).unwrap(),
            &s,
            default_cutoff(n),
            1e-4,
        )
    };
    let f3 = run(3, 0.4);
    let a3 = run(3, -0.4);
    let f4 = run(4, 0.4);
    let a4 = run(4, -0.4);
    let p000 = f3.final_table().get(&[0, 0, 0]);
    let p001 = a3.final_table().get(&[0, 0, 1]);
    // Flipping the sign of every odd site maps one ring onto the other.
    let mut diff: f64 = 0.0;
    for (tf, ta) in f4.prob_tables.iter().zip(&a4.prob_tables) {
        for c in tf.configs() {
            let flipped: Vec<usize> = c.iter().enumerate().map(|(i, &j)| (j + i) % 2).collect();
            diff = diff.max((tf.get(&c) - ta.get(&flipped)).abs());
        }
    }
    outcome(
        (p000 - 0.5).abs() <= 0.05 && (p001 - 1.0 / 6.0).abs() <= 0.04 && diff <= 1e-3,
        format!("N=3 ferro p000 = {p000:.4}, antiferro p001 = {p001:.4}; N=4 relabeled max difference {diff:.1e}"),
    )
}

fn oracle_equivalences() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    let p = OscillatorParams::tripling(0.0, 1.4);
    let single = single_spectrum_path(
        &p,
        &[(1.4, 0.0)],
        FockSpace::single(10).unwrap(),
        10,
        &SpectrumOptions::default(),
    )
    .unwrap()
    .remove(0)
    .eigenvalues;
    let mut worst: f64 = 0.0;
    for n in [2usize, 3] {
        let mut sums = vec![0.0];
        for _ in 0..n {
            sums = sums
                .iter()
                .flat_map(|s| single.iter().map(move |e| s + e))
                .collect();
        }
        sums.sort_by(f64::total_cmp);
        let k = 12;
        let spec = array_low_spectrum(
            &p,
            &ArrayConfig::uncoupled(n).unwrap(),
            FockSpace::new(10, n).unwrap(),
            k,
            &SpectrumOptions::default(),
        )
        .unwrap();
        for (a, b) in spec.eigenvalues.iter().zip(&sums) {
            worst = worst.max((a - b).abs());
        }
    }
    pass &= worst <= 1e-8;
    notes.push(format!("V=0 spectra vs single-site sums {worst:.1e}"));

    let grid = GridSpec::new(3.0, 61).unwrap();
    let mut w_err: f64 = 0.0;
    let mut l_err: f64 = 0.0;
    for nbar in [0.0, 0.5] {
        let rho = DensityMatrix::thermal(FockSpace::single(80).unwrap(), nbar).unwrap();
        let s = 2.0 * nbar + 1.0;
        let w = wigner(&rho, &grid).unwrap();
        for (iy, y) in w.y_axis.iter().enumerate() {
            for (ix, x) in w.x_axis.iter().enumerate() {
                let want = 2.0 / (PI * s) * (-2.0 * (x * x + y * y) / s).exp();
                w_err = w_err.max((w.values[(iy, ix)] - want).abs());
            }
        }
        let want = -4.0 / (PI * s * s);
        let est = laplacian_at_origin(&rho).unwrap();
        l_err = l_err.max(((est.value - want) / want).abs());
    }
    pass &= w_err <= 1e-6 && l_err <= 1e-3;
    notes.push(format!(
        "vacuum/thermal Wigner max error {w_err:.1e}, Laplacian relative error {l_err:.1e}"
    ));
    outcome(pass, notes.join("; "))
}

type Criterion = (&'static str, fn() -> Outcome);

const CRITERIA: &[Criterion] = &[
    ("povm-completeness", povm_completeness),
    ("vacuum-probabilities", vacuum_probabilities),
    ("ring3-endpoints", ring3_endpoints),
    ("geometric-asymmetry", geometric_phase),
    ("ring4-signature", ring4_signature),
    ("symmetric-count-and-shifts", symmetric_spectrum),
    ("frustrated-triangle", frustrated_triangle),
    ("open-system-sign-flip", open_system_sign_flip),
    ("scan-monotonicity", scan_monotonicity),
    ("classical-threshold", classical_threshold),
    ("period-doubling", period_doubling),
    ("oracle-equivalences", oracle_equivalences),
];

fn main() {
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut unexpected = 0;
    for (name, run) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let known = KNOWN_UNMET.contains(name);
        let tag = match (out.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        if !out.pass && !known {
            unexpected += 1;
        }
        println!(
            "{tag} {name} [{:.1}s]: {}",
            start.elapsed().as_secs_f64(),
            out.detail
        );
    }
    if unexpected > 0 {
        eprintln!("{unexpected} acceptance criteria failed");
        std::process::exit(1);
    }
}
