//! One runner per kind of experiment. Each writes its tables into the
//! output directory and returns diagnostics for the metadata sidecar.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};
use trisim_core::evolve::{PropagationBasis, SweepOptions};
use trisim_core::lanczos::LanczosOptions;
use trisim_core::model::{classical_surface, find_extrema, ExtremumKind};
use trisim_core::open_system::{
    classical_fixed_points, laplacian_at_origin, scan_laplacian, semiclassical_steady_state,
    steady_state_for, wigner, DissipationParams, FpeOptions, GridSpec, ScanBase, ScanMethod,
    WignerGrid,
};
use trisim_core::povm::config_label;
use trisim_core::spectra::{
    dominant_orbit, lowest_symmetric_state, sweep_path, symmetrized_configuration_energies,
    SpectrumOptions, SpectrumResult,
};
use trisim_core::{
    array_low_spectrum, measurement_set, propagate_sweep_with, single_spectrum_path, ArrayConfig,
    DensityMatrix, DriveOrder, FockSpace, OscillatorParams, SweepSchedule, SymmetryGenerators,
};

use crate::config::{Kind, Settings};
use crate::CliError;

pub struct Output {
    pub files: Vec<String>,
    pub diagnostics: Value,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Writer<'_> {
    fn write(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> trisim_core::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        fs::write(self.dir.join(name), buf)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

pub fn run(settings: &Settings, dir: &Path) -> Result<Output, CliError> {
    let mut w = Writer {
        dir,
        files: Vec::new(),
    };
    let diagnostics = match settings.kind {
        Kind::Sweep => sweep(settings, &mut w)?,
        Kind::SpectrumPath => spectrum_path(settings, &mut w)?,
        Kind::Eigenstate => eigenstate(settings, &mut w)?,
        Kind::SteadyState => steady(settings, &mut w)?,
        Kind::LaplacianScan => laplacian_scans(settings, &mut w)?,
        Kind::Adiabaticity => adiabaticity(settings, &mut w)?,
        Kind::Frustrated => frustrated(settings, &mut w)?,
    };
    Ok(Output {
        files: w.files,
        diagnostics,
    })
}

fn params(order: DriveOrder, delta: f64, r: f64) -> Result<OscillatorParams, CliError> {
    Ok(OscillatorParams::new(delta, 1.0, r, order)?)
}

fn spectrum_summary(s: &SpectrumResult) -> Value {
    json!({
        "solver": s.solver,
        "levels": s.len(),
        "symmetric_count": s.symmetric_count(),
        "lowest_symmetric_index": s.lowest_symmetric(),
        "symmetric_weights": s.symmetric_weights,
    })
}

fn sweep(s: &Settings, w: &mut Writer) -> Result<Value, CliError> {
    let order = s.drive_order()?;
    let sites = s.usize_list("n_sites")?;
    let couplings = s.f64_list("coupling")?;
    let cutoffs = s.usize_list("cutoff")?;
    if cutoffs.len() != 1 && cutoffs.len() != sites.len() {
        return Err(CliError::Usage(
            "cutoff must be one value or one per n_sites entry".into(),
        ));
    }
    let boundary = s.word("boundary", &["ring", "chain"])?;
    let schedule = SweepSchedule::new(s.f64("r_max")?, s.f64("delta_ini")?, s.f64("t_f")?)?;
    let opts = SweepOptions {
        n_records: s.usize("n_records")?,
        tol: s.f64("tol")?,
        leakage_threshold: s.f64("leakage_threshold")?,
        basis: match s.word("basis", &["auto", "full", "symmetric"])? {
            "full" => PropagationBasis::Full,
            "symmetric" => PropagationBasis::Symmetric,
            _ => PropagationBasis::Auto,
        },
    };
    let levels = s.usize("spectrum_levels")?;
    let spectrum_cutoff = s.usize("spectrum_cutoff")?;
    let p = params(order, 0.0, 0.0)?;
    let single = sites.len() * couplings.len() == 1;
    let mut diag = serde_json::Map::new();
    for (i, &n) in sites.iter().enumerate() {
        let cutoff = cutoffs[if cutoffs.len() == 1 { 0 } else { i }];
        for &v in &couplings {
            let config = match boundary {
                "chain" => ArrayConfig::chain(n, v)?,
                _ => ArrayConfig::ring(n, v)?,
            };
            let suffix = if single {
                String::new()
            } else {
                format!("_n{n}_v{v}")
            };
            let traj =
                propagate_sweep_with(&p, &config, &schedule, FockSpace::new(cutoff, n)?, &opts)?;
            w.write(&format!("trajectory{suffix}.csv"), |b| traj.write_csv(b))?;
            let mut entry =
                json!({ "n_sites": n, "coupling": v, "cutoff": cutoff, "sweep": traj.metadata() });
            if levels > 0 {
                let (r_end, delta_end) = schedule.at(schedule.t_f);
                let spec = array_low_spectrum(
                    &params(order, delta_end, r_end)?,
                    &config,
                    FockSpace::new(spectrum_cutoff, n)?,
                    levels,
                    &SpectrumOptions::default(),
                )?;
                w.write(&format!("spectrum{suffix}.csv"), |b| spec.write_csv(b))?;
                entry["spectrum"] = spectrum_summary(&spec);
            }
            diag.insert(
                if single {
                    "run".to_string()
                } else {
                    suffix[1..].to_string()
                },
                entry,
            );
        }
    }
    Ok(Value::Object(diag))
}

fn spectrum_path(s: &Settings, w: &mut Writer) -> Result<Value, CliError> {
    let order = s.drive_order()?;
    let schedule = SweepSchedule::new(s.f64("r_max")?, s.f64("delta_ini")?, 1.0)?;
    let path = sweep_path(&schedule, s.usize("points")?);
    let opts = SpectrumOptions {
        keep_vectors: false,
        ..Default::default()
    };
    let results = single_spectrum_path(
        &params(order, 0.0, 0.0)?,
        &path,
        FockSpace::single(s.usize("cutoff")?)?,
        s.usize("levels")?,
        &opts,
    )?;
    w.write("spectrum_path.csv", |b| {
        let mut out = csv::Writer::from_writer(b);
        out.write_record(["r", "delta", "index", "energy", "symmetric_flag"])?;
        for ((r, d), res) in path.iter().zip(&results) {
            for (i, (e, f)) in res.eigenvalues.iter().zip(&res.symmetric_flags).enumerate() {
                out.write_record([
                    format!("{r:.6}"),
                    format!("{d:.6}"),
                    i.to_string(),
                    format!("{e:.12e}"),
                    u8::from(*f).to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    })?;
    Ok(json!({ "points": path.len(), "solver": results.first().map(|r| r.solver) }))
}

fn grid_for(s: &Settings, p: &OscillatorParams) -> Result<GridSpec, CliError> {
    let points = s.usize("grid_points")?;
    let half = match s.f64_or_auto("half_width")? {
        Some(h) => h,
        None => GridSpec::default_for(p).half_width,
    };
    Ok(GridSpec::new(half, points)?)
}

fn wigner_summary(g: &WignerGrid) -> Value {
    json!({ "integral": g.integral(), "value_at_origin": g.value_at_origin(), "warnings": g.warnings })
}

fn eigenstate(s: &Settings, w: &mut Writer) -> Result<Value, CliError> {
    let p = params(s.drive_order()?, s.f64("delta")?, s.f64("r")?)?;
    let space = FockSpace::single(s.usize("cutoff")?)?;
    let res = single_spectrum_path(
        &p,
        &[(p.drive, p.delta)],
        space,
        12.min(space.dim()),
        &SpectrumOptions::default(),
    )?
    .remove(0);
    let idx = res.lowest_symmetric().ok_or_else(|| {
        trisim_core::Error::Degenerate("no symmetric state among the lowest levels".into())
    })?;
    let psi = &res.vectors.as_ref().expect("vectors are kept by default")[idx];
    let rho = DensityMatrix::from_pure(psi);
    let grid = grid_for(s, &p)?;
    let wg = wigner(&rho, &grid)?;
    w.write("wigner.csv", |b| wg.write_csv(b))?;

    let xs: Vec<f64> = grid.axis().iter().map(|a| a * 2f64.sqrt()).collect();
    let mut surface = Vec::with_capacity(xs.len());
    for &y in &xs {
        let row: Vec<f64> = xs
            .iter()
            .map(|&x| classical_surface(&p, x, y))
            .collect::<trisim_core::Result<_>>()?;
        surface.push(row);
    }
    w.write("surface.csv", |b| {
        let mut out = csv::Writer::from_writer(b);
        let mut header = vec!["Y\\X".to_string()];
        header.extend(xs.iter().map(|x| format!("{x:.6}")));
        out.write_record(&header)?;
        for (y, row) in xs.iter().zip(&surface) {
            let mut rec = vec![format!("{y:.6}")];
            rec.extend(row.iter().map(|v| format!("{v:.10e}")));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    })?;
    let extrema = find_extrema(&p)?;
    w.write("extrema.csv", |b| {
        let mut out = csv::Writer::from_writer(b);
        out.write_record(["x", "y", "energy", "kind"])?;
        for e in &extrema.extrema {
            out.write_record([
                format!("{:.10e}", e.position.0),
                format!("{:.10e}", e.position.1),
                format!("{:.10e}", e.energy),
                match e.kind {
                    ExtremumKind::Minimum => "minimum",
                    ExtremumKind::Saddle => "saddle",
                    ExtremumKind::Maximum => "maximum",
                }
                .to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    })?;
    Ok(json!({
        "eigen_index": idx,
        "energy": res.eigenvalues[idx],
        "symmetric_weight": res.symmetric_weights[idx],
        "top_level_population": psi.leakage(2),
        "wigner": wigner_summary(&wg),
        "well_radius": extrema.well_radius(),
    }))
}

fn steady(s: &Settings, w: &mut Writer) -> Result<Value, CliError> {
    let p = params(s.drive_order()?, s.f64("delta")?, s.f64("r")?)?;
    let d = DissipationParams::new(s.f64("kappa")?, s.f64("nbar")?)?;
    let rho = steady_state_for(&p, &d, s.usize("cutoff")?)?;
    let grid = grid_for(s, &p)?;
    let wq = wigner(&rho, &grid)?;
    w.write("wigner_quantum.csv", |b| wq.write_csv(b))?;
    let fpe = FpeOptions {
        points: s.usize("fpe_points")?,
        half_width: None,
    };
    let wc = semiclassical_steady_state(&p, &d, &fpe)?;
    w.write("wigner_semiclassical.csv", |b| wc.write_csv(b))?;
    let pops = rho.populations();
    let top: f64 = pops.iter().rev().take(2).sum();
    let fixed = match p.drive_order {
        DriveOrder::Tripling => Some(classical_fixed_points(&p, &d)?),
        DriveOrder::Doubling => None,
    };
    Ok(json!({
        "quantum": {
            "laplacian": laplacian_at_origin(&rho)?,
            "density": rho.diagnostics(),
            "top_level_population": top,
            "wigner": wigner_summary(&wq),
        },
        "semiclassical": {
            "laplacian": wc.laplacian_at_origin()?,
            "wigner": wigner_summary(&wc),
        },
        "classical_fixed_points": fixed,
    }))
}

fn laplacian_scans(s: &Settings, w: &mut Writer) -> Result<Value, CliError> {
    let p = params(s.drive_order()?, s.f64("delta")?, s.f64("r")?)?;
    let diss = DissipationParams {
        kappa: s.f64("kappa")?,
        nbar: s.f64("nbar")?,
    };
    let cutoff = s.usize("cutoff")?;
    let axis1 = s.axis("axis1", s.values["axis1"].as_str())?;
    let axes2 = s.axis2_list()?;
    let methods = s.methods()?;
    let mut diag = serde_json::Map::new();
    for &method in &methods {
        for axis2 in &axes2 {
            let base = ScanBase {
                params: p,
                diss,
                cutoff,
                method,
            };
            let table = scan_laplacian(axis1, *axis2, &base)?;
            let mut name = "scan".to_string();
            if methods.len() > 1 {
                name.push_str(match method {
                    ScanMethod::Quantum => "_quantum",
                    ScanMethod::Semiclassical => "_semiclassical",
                });
            }
            if axes2.len() > 1 {
                name.push('_');
                name.push_str(axis2.map(|a| a.axis.name()).unwrap_or("none"));
            }
            w.write(&format!("{name}.csv"), |b| table.write_csv(b))?;
            let failures: Vec<Value> = table
                .points
                .iter()
                .filter_map(|pt| {
                    pt.error
                        .as_ref()
                        .map(|e| json!({ "a1": pt.a1, "a2": pt.a2, "error": e }))
                })
                .collect();
            diag.insert(
                name,
                json!({
                    "sign_boundaries": table.sign_boundaries(),
                    "positive_extent": table.positive_extent(),
                    "failed_points": failures,
                }),
            );
        }
    }
    Ok(Value::Object(diag))
}

fn linspace((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn adiabaticity(s: &Settings, w: &mut Writer) -> Result<Value, CliError> {
    let n = s.usize("n_sites")?;
    let grid = s.usize("grid")?;
    let vs = linspace(s.range("v_range")?, grid);
    let opts = SweepOptions {
        n_records: s.usize("n_records")?.max(2),
        leakage_threshold: s.f64("leakage_threshold")?,
        basis: PropagationBasis::Symmetric,
        ..Default::default()
    };
    let delta_ini = s.f64("delta_ini")?;
    let delta_range = linspace(s.range("delta_ini_range")?, grid);
    let mut diag = serde_json::Map::new();
    for (order, tag) in [
        (DriveOrder::Doubling, "doubling"),
        (DriveOrder::Tripling, "tripling"),
    ] {
        let r = s.f64(&format!("{tag}_r"))?;
        let t_f = s.f64(&format!("{tag}_tf"))?;
        let tf_range = linspace(s.range(&format!("{tag}_tf_range"))?, grid);
        let space = FockSpace::new(s.usize(&format!("{tag}_cutoff"))?, n)?;
        let p = params(order, 0.0, 0.0)?;
        let ideal: Vec<Vec<usize>> = (0..order.order()).map(|j| vec![j; n]).collect();
        for (panel, ys, y_name) in [
            ("tf", &tf_range, "t_f"),
            ("delta", &delta_range, "delta_ini"),
        ] {
            let jobs: Vec<(f64, f64)> = ys
                .iter()
                .flat_map(|&y| vs.iter().map(move |&v| (v, y)))
                .collect();
            let results: Vec<Result<f64, String>> = jobs
                .par_iter()
                .map(|&(v, y)| {
                    let (d0, tf) = if panel == "tf" {
                        (delta_ini, y)
                    } else {
                        (y, t_f)
                    };
                    let run = || -> trisim_core::Result<f64> {
                        let schedule = SweepSchedule::new(r, d0, tf)?;
                        let traj = propagate_sweep_with(
                            &p,
                            &ArrayConfig::ring(n, v)?,
                            &schedule,
                            space,
                            &opts,
                        )?;
                        let last = traj.final_table();
                        Ok(ideal.iter().map(|c| last.get(c)).sum())
                    };
                    run().map_err(|e| e.to_string())
                })
                .collect();
            let name = format!("adiabaticity_{tag}_{panel}.csv");
            w.write(&name, |b| {
                let mut out = csv::Writer::from_writer(b);
                out.write_record(["v", y_name, "p_ideal"])?;
                for ((v, y), res) in jobs.iter().zip(&results) {
                    let p = match res {
                        Ok(p) => format!("{p:.10e}"),
                        Err(_) => "nan".to_string(),
                    };
                    out.write_record([format!("{v:.6}"), format!("{y:.6}"), p])?;
                }
                out.flush()?;
                Ok(())
            })?;
            let failures: Vec<Value> = jobs
                .iter()
                .zip(&results)
                .filter_map(|((v, y), r)| {
                    r.as_ref()
                        .err()
                        .map(|e| json!({ "v": v, y_name: y, "error": e }))
                })
                .collect();
            diag.insert(
                name,
                json!({
                    "r": r,
                    "fixed": if panel == "tf" { json!({ "delta_ini": delta_ini }) } else { json!({ "t_f": t_f }) },
                    "grid": [grid, grid],
                    "failed_points": failures,
                }),
            );
        }
    }
    Ok(Value::Object(diag))
}

fn frustrated(s: &Settings, w: &mut Writer) -> Result<Value, CliError> {
    let p = params(DriveOrder::Tripling, s.f64("delta")?, s.f64("r")?)?;
    let config = ArrayConfig::frustrated_triangle(s.f64("v")?)?;
    let space = FockSpace::new(s.usize("cutoff")?, 3)?;
    let spec = array_low_spectrum(
        &p,
        &config,
        space,
        s.usize("levels")?,
        &SpectrumOptions::default(),
    )?;
    w.write("spectrum.csv", |b| spec.write_csv(b))?;

    let (energy, psi) = lowest_symmetric_state(&p, &config, space, &LanczosOptions::default())?;
    let h = trisim_core::model::HamiltonianParts::new(&config, p.drive_order, space)?.assemble(&p);
    let gens = SymmetryGenerators::for_hamiltonian(space, 3, &h)?;
    let set = measurement_set(DriveOrder::Tripling, space.mode_space())?;
    let (orbit, prob) = dominant_orbit(&psi, &set, &gens)?;
    w.write("dominant_orbit.csv", |b| {
        let mut out = csv::Writer::from_writer(b);
        out.write_record([
            "representative",
            "members",
            "configuration_probability",
            "orbit_probability",
        ])?;
        let members: Vec<String> = orbit.members.iter().map(|m| config_label(m)).collect();
        out.write_record([
            config_label(&orbit.representative),
            members.join(" "),
            format!("{prob:.10e}"),
            format!("{:.10e}", prob * orbit.size() as f64),
        ])?;
        out.flush()?;
        Ok(())
    })?;
    let configs = [vec![0, 0, 0], vec![0, 1, 1], vec![0, 2, 2]];
    let energies = symmetrized_configuration_energies(&p, &config, space, &configs)?;
    w.write("configuration_energies.csv", |b| {
        let mut out = csv::Writer::from_writer(b);
        out.write_record(["configuration", "energy"])?;
        for e in &energies {
            out.write_record([config_label(&e.configuration), format!("{:.12e}", e.energy)])?;
        }
        out.flush()?;
        Ok(())
    })?;
    Ok(json!({
        "spectrum": spectrum_summary(&spec),
        "lowest_symmetric_energy": energy,
        "dominant_orbit": config_label(&orbit.representative),
        "dominant_configuration_probability": prob,
        "symmetry_generators": format!("{:?}", gens.included()),
    }))
}
