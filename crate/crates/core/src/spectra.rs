//! Low-lying spectra of single oscillators and arrays, symmetric-state
//! flags and the first-order coupling shift.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{FockSpace, StateVector, C64};
use crate::lanczos::{lowest_eigenpairs, LanczosOptions};
use crate::model::{ArrayConfig, Coupling, HamiltonianParts, OscillatorParams, SweepSchedule};
use crate::povm::{config_probabilities, MeasurementSet};
use crate::sparse::CsrMatrix;
use crate::symmetry::{ConfigOrbit, Generator, SymmetricSector, SymmetryGenerators};

/// Dimension from which the iterative solver replaces the dense one.
pub const DENSE_LIMIT: usize = 4000;
pub const SYMMETRIC_THRESHOLD: f64 = 0.99;

#[derive(Clone, Copy, Debug)]
pub struct SpectrumOptions {
    /// Eigenvalues closer than this are treated as one degenerate level.
    pub degeneracy_tol: f64,
    pub keep_vectors: bool,
    pub lanczos: LanczosOptions,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            degeneracy_tol: 1e-9,
            keep_vectors: true,
            lanczos: LanczosOptions {
                tol: 1e-10,
                ..Default::default()
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Dense,
    Lanczos,
}

#[derive(Clone, Debug)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    pub symmetric_flags: Vec<bool>,
    pub symmetric_weights: Vec<f64>,
    pub vectors: Option<Vec<StateVector>>,
    pub solver: Solver,
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn symmetric_count(&self) -> usize {
        self.symmetric_flags.iter().filter(|f| **f).count()
    }

    /// Index of the lowest state flagged symmetric.
    pub fn lowest_symmetric(&self) -> Option<usize> {
        self.symmetric_flags.iter().position(|f| *f)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index", "energy", "symmetric_flag"])?;
        for (i, (e, f)) in self
            .eigenvalues
            .iter()
            .zip(&self.symmetric_flags)
            .enumerate()
        {
            out.write_record([i.to_string(), format!("{e:.12e}"), (*f as u8).to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Lowest `k` eigenpairs of a real symmetric matrix, dense or iterative by
/// dimension.
pub fn lowest_real_eigenpairs(
    h: &CsrMatrix<f64>,
    k: usize,
    lanczos: &LanczosOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, Solver)> {
    let n = h.nrows();
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "requested {k} eigenvalues of a dimension-{n} operator"
        )));
    }
    if n < DENSE_LIMIT {
        let eig = SymmetricEigen::new(h.to_dense());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        order.truncate(k);
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
            .collect();
        Ok((values, vectors, Solver::Dense))
    } else {
        let res = lowest_eigenpairs(n, k, |x, y| h.matvec_into(x, y), lanczos)?;
        Ok((res.values, res.vectors, Solver::Lanczos))
    }
}

/// Splits sorted eigenvalues into runs whose neighbours differ by at most
/// `tol` (relative to `max(1, |E|)`).
fn degenerate_groups(values: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > tol * values[i].abs().max(1.0) {
            groups.push(start..i);
            start = i;
        }
    }
    groups
}

/// `<x_a| P_sym |x_b>` over a set of states.
fn projector_gram(gens: &SymmetryGenerators, xs: &[Vec<C64>]) -> DMatrix<C64> {
    let g = gens.group_order() as f64;
    let m = xs.len();
    let mut out = DMatrix::<C64>::zeros(m, m);
    for el in gens.elements() {
        let ux: Vec<Vec<C64>> = xs.iter().map(|x| el.op.apply(x)).collect();
        for a in 0..m {
            for b in 0..m {
                let v: C64 = xs[a].iter().zip(&ux[b]).map(|(p, q)| p.conj() * q).sum();
                out[(a, b)] += v / g;
            }
        }
    }
    out
}

/// Rotates each degenerate group to diagonalize `P_sym` and returns the
/// rotated states with their symmetric weights.
fn classify(
    gens: &SymmetryGenerators,
    values: &[f64],
    vectors: Vec<Vec<f64>>,
    tol: f64,
) -> (Vec<Vec<C64>>, Vec<f64>) {
    let mut states = Vec::with_capacity(vectors.len());
    let mut weights = Vec::with_capacity(vectors.len());
    let complex: Vec<Vec<C64>> = vectors
        .into_iter()
        .map(|v| v.into_iter().map(|x| C64::new(x, 0.0)).collect())
        .collect();
    for range in degenerate_groups(values, tol) {
        let xs = &complex[range];
        if xs.len() == 1 {
            weights.push(gens.symmetric_weight(&xs[0]));
            states.push(xs[0].clone());
            continue;
        }
        let gram = projector_gram(gens, xs);
        let herm = (&gram + gram.adjoint()) * C64::new(0.5, 0.0);
        let eig = herm.symmetric_eigen();
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        for i in order {
            let c = eig.eigenvectors.column(i);
            let mut v = vec![C64::new(0.0, 0.0); xs[0].len()];
            for (x, ci) in xs.iter().zip(c.iter()) {
                for (vi, xi) in v.iter_mut().zip(x) {
                    *vi += xi * ci;
                }
            }
            weights.push(eig.eigenvalues[i].clamp(0.0, 1.0));
            states.push(v);
        }
    }
    (states, weights)
}

fn spectrum_of(
    h: &CsrMatrix<f64>,
    gens: &SymmetryGenerators,
    k: usize,
    opts: &SpectrumOptions,
) -> Result<SpectrumResult> {
    let space = gens.space();
    // Solve a few extra states so that a degenerate level straddling the
    // cut is classified as a whole.
    let extra = (k + 6).min(space.dim());
    let (mut values, vectors, solver) = lowest_real_eigenpairs(h, extra, &opts.lanczos)?;
    let (states, mut weights) = classify(gens, &values, vectors, opts.degeneracy_tol);
    values.truncate(k);
    weights.truncate(k);
    let symmetric_flags = weights.iter().map(|w| *w >= SYMMETRIC_THRESHOLD).collect();
    let vectors = if opts.keep_vectors {
        Some(
            states
                .into_iter()
                .take(k)
                .map(|v| StateVector::new(space, v))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    Ok(SpectrumResult {
        eigenvalues: values,
        symmetric_flags,
        symmetric_weights: weights,
        vectors,
        solver,
    })
}

/// Points `(r, delta)` along the sweep path `delta = delta_ini (1 - r / r_max)`.
pub fn sweep_path(schedule: &SweepSchedule, n_points: usize) -> Vec<(f64, f64)> {
    (0..n_points)
        .map(|i| {
            let t = if n_points > 1 {
                schedule.t_f * i as f64 / (n_points - 1) as f64
            } else {
                0.0
            };
            schedule.at(t)
        })
        .collect()
}

/// Lowest `k` levels of a single oscillator at each `(r, delta)` point.
pub fn single_spectrum_path(
    params: &OscillatorParams,
    path: &[(f64, f64)],
    space: FockSpace,
    k: usize,
    opts: &SpectrumOptions,
) -> Result<Vec<SpectrumResult>> {
    space.require_single()?;
    if k > space.dim() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds dimension {}",
            space.dim()
        )));
    }
    let config = ArrayConfig::uncoupled(1)?;
    let parts = HamiltonianParts::new(&config, params.drive_order, space)?;
    let gens = SymmetryGenerators::new(space, params.drive_order.order(), &[Generator::Rotation])?;
    path.par_iter()
        .map(|&(r, delta)| {
            let p = params.with(r, delta);
            p.validate()?;
            spectrum_of(&parts.assemble(&p), &gens, k, opts)
        })
        .collect()
}

/// Lowest `k` eigenpairs of an array, flagged against the symmetry group of
/// its Hamiltonian.
pub fn array_low_spectrum(
    params: &OscillatorParams,
    config: &ArrayConfig,
    space: FockSpace,
    k: usize,
    opts: &SpectrumOptions,
) -> Result<SpectrumResult> {
    params.validate()?;
    let parts = HamiltonianParts::new(config, params.drive_order, space)?;
    let h = parts.assemble(params);
    let gens = SymmetryGenerators::for_hamiltonian(space, params.drive_order.order(), &h)?;
    spectrum_of(&h, &gens, k, opts)
}

/// Lowest eigenvalue within the totally symmetric subspace together with
/// its eigenvector in the full space.
pub fn lowest_symmetric_state(
    params: &OscillatorParams,
    config: &ArrayConfig,
    space: FockSpace,
    lanczos: &LanczosOptions,
) -> Result<(f64, StateVector)> {
    params.validate()?;
    let parts = HamiltonianParts::new(config, params.drive_order, space)?;
    let h = parts.assemble(params);
    let gens = SymmetryGenerators::for_hamiltonian(space, params.drive_order.order(), &h)?;
    let sector = SymmetricSector::new(&gens);
    let hs = sector.project(&h)?;
    let (values, vectors, _) = lowest_real_eigenpairs(&hs, 1, lanczos)?;
    let coeffs: Vec<C64> = vectors[0].iter().map(|&x| C64::new(x, 0.0)).collect();
    Ok((values[0], sector.embed(&coeffs)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingSign {
    Ferro,
    Antiferro,
}

/// First-order shift `-sum_edges V X0^2 cos(theta_m - theta_n)` of the
/// classical configuration `wells` (well index per site).
pub fn classical_coupling_shift(
    config: &ArrayConfig,
    x0: f64,
    wells: &[usize],
    n_wells: usize,
) -> Result<f64> {
    if wells.len() != config.n_sites {
        return Err(Error::DimensionMismatch {
            expected: config.n_sites,
            found: wells.len(),
        });
    }
    let step = 2.0 * std::f64::consts::PI / n_wells as f64;
    Ok(config
        .couplings
        .iter()
        .map(|&Coupling { m, n, v }| {
            let dtheta = step * (wells[m] as f64 - wells[n] as f64);
            -v * x0 * x0 * dtheta.cos()
        })
        .sum())
}

/// Lowest first-order shift over all classical tripling configurations of
/// a uniform ring.
pub fn perturbative_shift(sign: CouplingSign, v: f64, x0: f64, n_sites: usize) -> Result<f64> {
    let v = match sign {
        CouplingSign::Ferro => v.abs(),
        CouplingSign::Antiferro => -v.abs(),
    };
    let config = ArrayConfig::ring(n_sites, v)?;
    let total = 3usize.pow(n_sites as u32);
    let mut best = f64::INFINITY;
    for idx in 0..total {
        let wells = crate::povm::config_of(idx, n_sites, 3);
        best = best.min(classical_coupling_shift(&config, x0, &wells, 3)?);
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ShiftComparison {
    pub perturbative: f64,
    pub numerical: f64,
    /// Excess of the first-order estimate as a fraction of itself,
    /// `(|perturbative| - |numerical|) / |perturbative|`.
    pub overestimate: f64,
    /// The same excess relative to the numerical shift.
    pub excess_over_numerical: f64,
}

/// Compares the first-order shift with the change of the lowest symmetric
/// energy of a uniform ring when the coupling is switched on.
pub fn compare_coupling_shift(
    params: &OscillatorParams,
    sign: CouplingSign,
    v_abs: f64,
    n_sites: usize,
    space: FockSpace,
) -> Result<ShiftComparison> {
    let x0 = crate::model::find_extrema(params)?
        .well_radius()
        .ok_or_else(|| Error::invalid("no classical wells at these parameters"))?;
    let perturbative = perturbative_shift(sign, v_abs, x0, n_sites)?;
    let v = match sign {
        CouplingSign::Ferro => v_abs.abs(),
        CouplingSign::Antiferro => -v_abs.abs(),
    };
    let lz = LanczosOptions::default();
    let (e0, _) = lowest_symmetric_state(params, &ArrayConfig::ring(n_sites, 0.0)?, space, &lz)?;
    let (e1, _) = lowest_symmetric_state(params, &ArrayConfig::ring(n_sites, v)?, space, &lz)?;
    let numerical = e1 - e0;
    Ok(ShiftComparison {
        perturbative,
        numerical,
        overestimate: (perturbative.abs() - numerical.abs()) / perturbative.abs(),
        excess_over_numerical: perturbative.abs() / numerical.abs() - 1.0,
    })
}

/// Coherent states centred on the classical minima, indexed by the phase
/// sector each one falls into.
pub fn well_states(params: &OscillatorParams, single: FockSpace) -> Result<Vec<StateVector>> {
    single.require_single()?;
    let set = MeasurementSet::new(params.drive_order, single)?;
    let report = crate::model::find_extrema(params)?;
    let mut wells: Vec<Option<StateVector>> = vec![None; set.n_sectors()];
    for e in report.minima() {
        let alpha = C64::new(e.position.0, e.position.1) / 2f64.sqrt();
        let st = StateVector::coherent(single, alpha)?;
        let t = config_probabilities(&st, &set, 1)?;
        let j = (0..set.n_sectors())
            .max_by(|&a, &b| t.get(&[a]).total_cmp(&t.get(&[b])))
            .unwrap_or(0);
        wells[j] = Some(st);
    }
    wells
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::invalid("classical minima do not fill every phase sector"))
}

#[derive(Clone, Debug, Serialize)]
pub struct ConfigurationEnergy {
    pub configuration: Vec<usize>,
    pub energy: f64,
}

/// Energies of symmetrized well configurations within the span of the
/// lowest symmetric eigenstates.
///
/// Each configuration is projected onto the span of as many lowest
/// symmetric eigenstates as there are configurations, the projections are
/// orthonormalized symmetrically (Löwdin) and the diagonal of the
/// Hamiltonian in that basis is returned.
pub fn symmetrized_configuration_energies(
    params: &OscillatorParams,
    config: &ArrayConfig,
    space: FockSpace,
    configurations: &[Vec<usize>],
) -> Result<Vec<ConfigurationEnergy>> {
    params.validate()?;
    let n = configurations.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let parts = HamiltonianParts::new(config, params.drive_order, space)?;
    let h = parts.assemble(params);
    let gens = SymmetryGenerators::for_hamiltonian(space, params.drive_order.order(), &h)?;
    let sector = SymmetricSector::new(&gens);
    let (energies, vectors, _) =
        lowest_real_eigenpairs(&sector.project(&h)?, n, &LanczosOptions::default())?;
    let states: Vec<Vec<C64>> = vectors
        .iter()
        .map(|v| {
            let c: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
            sector.embed(&c).map(StateVector::into_amplitudes)
        })
        .collect::<Result<_>>()?;
    let wells = well_states(params, space.mode_space())?;
    let mut overlap = DMatrix::<C64>::zeros(n, n);
    for (c, cfg) in configurations.iter().enumerate() {
        if cfg.len() != config.n_sites || cfg.iter().any(|&j| j >= wells.len()) {
            return Err(Error::invalid(format!(
                "configuration {cfg:?} does not fit the array"
            )));
        }
        let mut product = wells[cfg[0]].clone();
        for &j in &cfg[1..] {
            product = product.tensor(&wells[j])?;
        }
        let mut sym = vec![C64::new(0.0, 0.0); space.dim()];
        for el in gens.elements() {
            for (a, b) in sym.iter_mut().zip(el.op.apply(product.amplitudes())) {
                *a += b;
            }
        }
        for (k, psi) in states.iter().enumerate() {
            overlap[(k, c)] = psi.iter().zip(&sym).map(|(p, q)| p.conj() * q).sum();
        }
    }
    let gram = overlap.adjoint() * &overlap;
    let eig = gram.clone().symmetric_eigen();
    if eig
        .eigenvalues
        .iter()
        .any(|&l| l <= 1e-14 * eig.eigenvalues.max().max(1e-300))
    {
        return Err(Error::Degenerate(
            "configurations are linearly dependent within the low symmetric subspace".into(),
        ));
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new(l.powf(-0.5), 0.0)));
    let lowdin = &overlap * (&eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint());
    Ok(configurations
        .iter()
        .enumerate()
        .map(|(c, cfg)| ConfigurationEnergy {
            configuration: cfg.clone(),
            energy: (0..n)
                .map(|k| lowdin[(k, c)].norm_sqr() * energies[k])
                .sum(),
        })
        .collect())
}

/// Orbit containing the most probable sector configuration of `state`,
/// with that configuration's probability.
pub fn dominant_orbit(
    state: &StateVector,
    set: &MeasurementSet,
    gens: &SymmetryGenerators,
) -> Result<(ConfigOrbit, f64)> {
    let n_sites = state.space().n_modes();
    let table = config_probabilities(state, set, n_sites)?;
    let (config, p) = table
        .configs()
        .map(|c| {
            let p = table.get(&c);
            (c, p)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::Degenerate("empty configuration table".into()))?;
    Ok((gens.config_orbit(&config, set.n_sectors()), p))
}
