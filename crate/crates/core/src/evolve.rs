//! Schrödinger propagation of oscillator arrays through a drive sweep.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{FockSpace, StateVector, C64};
use crate::model::{ArrayConfig, HamiltonianParts, OscillatorParams, SweepSchedule};
use crate::ode::{Dop853, OdeOptions, OdeStats, OdeSystem};
use crate::povm::{config_label, config_probabilities, ConfigProbabilities, MeasurementSet};
use crate::sparse::CsrMatrix;
use crate::symmetry::{ConfigOrbit, SymmetricSector, SymmetryGenerators};

/// Hilbert space used for the integration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PropagationBasis {
    /// Full tensor-product Fock space.
    Full,
    /// Totally symmetric subspace; exact for the vacuum initial state
    /// because the Hamiltonian commutes with every symmetry.
    Symmetric,
    /// Full space up to `AUTO_FULL_DIM` basis states, symmetric above.
    Auto,
}

pub const AUTO_FULL_DIM: usize = 10_000;

#[derive(Clone, Copy, Debug)]
pub struct SweepOptions {
    pub n_records: usize,
    pub tol: f64,
    pub leakage_threshold: f64,
    pub basis: PropagationBasis,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            n_records: 200,
            tol: 1e-8,
            leakage_threshold: 1e-4,
            basis: PropagationBasis::Auto,
        }
    }
}

/// Default per-site Fock cutoff for an array of `n_sites` oscillators.
pub fn default_cutoff(n_sites: usize) -> usize {
    if n_sites <= 3 {
        20
    } else {
        14
    }
}

/// `-i H(t)` with `H(t) = K kerr + delta(t) number + hopping + r(t) drive`,
/// hopping and drive merged into one sparsity pattern.
struct SweepGenerator {
    number: Vec<f64>,
    kerr: Vec<f64>,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    fixed: Vec<f64>,
    drive: Vec<f64>,
    schedule: SweepSchedule,
}

impl SweepGenerator {
    fn new(
        number: &[f64],
        kerr: &[f64],
        kerr_scale: f64,
        hopping: &CsrMatrix<f64>,
        drive: &CsrMatrix<f64>,
        schedule: SweepSchedule,
    ) -> Self {
        let n = number.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let (mut indices, mut fixed, mut drv) = (Vec::new(), Vec::new(), Vec::new());
        indptr.push(0);
        for i in 0..n {
            let mut a = hopping.row(i).peekable();
            let mut b = drive.row(i).peekable();
            loop {
                let (col, f, d) = match (a.peek().copied(), b.peek().copied()) {
                    (None, None) => break,
                    (Some((ca, va)), Some((cb, vb))) if ca == cb => {
                        a.next();
                        b.next();
                        (ca, va, vb)
                    }
                    (Some((ca, va)), Some((cb, _))) if ca < cb => {
                        a.next();
                        (ca, va, 0.0)
                    }
                    (Some((ca, va)), None) => {
                        a.next();
                        (ca, va, 0.0)
                    }
                    (_, Some((cb, vb))) => {
                        b.next();
                        (cb, 0.0, vb)
                    }
                };
                indices.push(col as u32);
                fixed.push(f);
                drv.push(d);
            }
            indptr.push(indices.len());
        }
        Self {
            number: number.to_vec(),
            kerr: kerr.iter().map(|k| k * kerr_scale).collect(),
            indptr,
            indices,
            fixed,
            drive: drv,
            schedule,
        }
    }

    fn row(&self, i: usize, r: f64, delta: f64, y: &[C64]) -> C64 {
        let mut acc = y[i] * (delta * self.number[i] + self.kerr[i]);
        for k in self.indptr[i]..self.indptr[i + 1] {
            acc += y[self.indices[k] as usize] * (self.fixed[k] + r * self.drive[k]);
        }
        C64::new(acc.im, -acc.re)
    }
}

impl OdeSystem for SweepGenerator {
    fn dim(&self) -> usize {
        self.number.len()
    }

    fn eval(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let (r, delta) = self.schedule.at(t);
        const CHUNK: usize = 512;
        if dy.len() >= 4096 {
            dy.par_chunks_mut(CHUNK).enumerate().for_each(|(c, out)| {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = self.row(c * CHUNK + k, r, delta, y);
                }
            });
        } else {
            for (i, o) in dy.iter_mut().enumerate() {
                *o = self.row(i, r, delta, y);
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub prob_tables: Vec<ConfigProbabilities>,
    pub norms: Vec<f64>,
    pub leakage: Vec<f64>,
    pub symmetric_weights: Vec<f64>,
    /// Orbits of the measured configurations under the symmetry group of
    /// the Hamiltonian, sorted by representative.
    pub orbits: Vec<ConfigOrbit>,
    pub basis: PropagationBasis,
    pub basis_dim: usize,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub meta: serde_json::Value,
}

impl Trajectory {
    pub fn n_sites(&self) -> usize {
        self.prob_tables[0].n_sites
    }

    pub fn final_table(&self) -> &ConfigProbabilities {
        self.prob_tables.last().expect("trajectory has records")
    }

    /// Probability of one configuration at every recorded time.
    pub fn series(&self, config: &[usize]) -> Result<Vec<f64>> {
        self.check_config(config)?;
        Ok(self.prob_tables.iter().map(|t| t.get(config)).collect())
    }

    fn check_config(&self, config: &[usize]) -> Result<()> {
        let t = &self.prob_tables[0];
        if config.len() != t.n_sites || config.iter().any(|&j| j >= t.n_sectors) {
            return Err(Error::MissingOrbit(format!("{config:?}")));
        }
        Ok(())
    }

    pub fn orbit_of(&self, config: &[usize]) -> Result<&ConfigOrbit> {
        self.orbits
            .iter()
            .find(|o| o.contains(config))
            .ok_or_else(|| Error::MissingOrbit(config_label(config)))
    }

    /// Largest spread of probabilities within any orbit over all records.
    pub fn max_intra_orbit_spread(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for table in &self.prob_tables {
            for orbit in &self.orbits {
                let vals: Vec<f64> = orbit.members.iter().map(|c| table.get(c)).collect();
                let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
                let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
                worst = worst.max(hi - lo);
            }
        }
        worst
    }

    pub fn max_norm_error(&self) -> f64 {
        self.norms
            .iter()
            .map(|n| (n - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_leakage(&self) -> f64 {
        self.leakage.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min_symmetric_weight(&self) -> f64 {
        self.symmetric_weights
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// CSV with one probability column per orbit representative.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend(
            self.orbits
                .iter()
                .map(|o| format!("p_{}", config_label(&o.representative))),
        );
        header.extend(["norm", "leakage", "symmetric_weight"].map(String::from));
        wtr.write_record(&header)?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:.6}")];
            row.extend(
                self.orbits
                    .iter()
                    .map(|o| format!("{:.10e}", self.prob_tables[k].get(&o.representative))),
            );
            row.push(format!("{:.10e}", self.norms[k]));
            row.push(format!("{:.6e}", self.leakage[k]));
            row.push(format!("{:.10e}", self.symmetric_weights[k]));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Parameters and run diagnostics for the JSON sidecar.
    pub fn metadata(&self) -> serde_json::Value {
        let mut meta = self.meta.clone();
        if let serde_json::Value::Object(map) = &mut meta {
            map.insert("basis".into(), serde_json::json!(self.basis));
            map.insert("basis_dim".into(), self.basis_dim.into());
            map.insert("steps_accepted".into(), self.steps_accepted.into());
            map.insert("steps_rejected".into(), self.steps_rejected.into());
            map.insert("max_norm_error".into(), self.max_norm_error().into());
            map.insert("max_leakage".into(), self.max_leakage().into());
            map.insert(
                "min_symmetric_weight".into(),
                self.min_symmetric_weight().into(),
            );
            map.insert(
                "orbits".into(),
                serde_json::Value::Object(
                    self.orbits
                        .iter()
                        .map(|o| {
                            (
                                config_label(&o.representative),
                                o.members
                                    .iter()
                                    .map(|m| config_label(m))
                                    .collect::<Vec<_>>()
                                    .into(),
                            )
                        })
                        .collect(),
                ),
            );
        }
        meta
    }
}

/// `max_t |p(repr A) - p(repr B)|`, each orbit given by any member.
pub fn geometric_asymmetry(traj: &Trajectory, orbit_a: &[usize], orbit_b: &[usize]) -> Result<f64> {
    let a = traj.orbit_of(orbit_a)?.representative.clone();
    let b = traj.orbit_of(orbit_b)?.representative.clone();
    let (sa, sb) = (traj.series(&a)?, traj.series(&b)?);
    Ok(sa
        .iter()
        .zip(&sb)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Per-mode occupation distribution of a pure state.
fn mode_populations(psi: &StateVector) -> Vec<Vec<f64>> {
    let space = psi.space();
    let m = space.cutoff();
    let n = space.n_modes();
    let mut pops = vec![vec![0.0; m]; n];
    for (i, a) in psi.amplitudes().iter().enumerate() {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let mut idx = i;
        for site in (0..n).rev() {
            pops[site][idx % m] += p;
            idx /= m;
        }
    }
    pops
}

/// Extrapolates the decay of the top Fock populations to a cutoff whose
/// two highest levels hold less than a tenth of `threshold`.
fn suggest_cutoff(psi: &StateVector, threshold: f64) -> usize {
    let m = psi.space().cutoff();
    let mut best = m + 4;
    if m < 6 {
        return best.max(2 * m);
    }
    for pop in mode_populations(psi) {
        let top = pop[m - 1] + pop[m - 2];
        let below = pop[m - 3] + pop[m - 4];
        if top <= 0.1 * threshold {
            continue;
        }
        let need = if below > top && top > 0.0 {
            let q = top / below;
            let pairs = ((0.1 * threshold / top).ln() / q.ln()).ceil() as usize;
            m + 2 * pairs
        } else {
            m + 8
        };
        best = best.max(need);
    }
    best
}

pub fn propagate_sweep(
    params: &OscillatorParams,
    config: &ArrayConfig,
    schedule: &SweepSchedule,
    space: FockSpace,
    n_records: usize,
) -> Result<Trajectory> {
    propagate_sweep_with(
        params,
        config,
        schedule,
        space,
        &SweepOptions {
            n_records,
            ..Default::default()
        },
    )
}

/// Integrates `i d psi/dt = H(t) psi` from the array vacuum through the
/// sweep, recording configuration probabilities at evenly spaced times.
pub fn propagate_sweep_with(
    params: &OscillatorParams,
    config: &ArrayConfig,
    schedule: &SweepSchedule,
    space: FockSpace,
    opts: &SweepOptions,
) -> Result<Trajectory> {
    params.validate()?;
    if opts.n_records < 2 {
        return Err(Error::invalid("n_records must be >= 2"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("tolerance must be > 0"));
    }
    let n_sites = config.n_sites;
    let order = params.drive_order;
    let parts = HamiltonianParts::new(config, order, space)?;
    let probe = parts.assemble(&OscillatorParams {
        delta: 0.37,
        drive: 1.0,
        ..*params
    });
    let gens = SymmetryGenerators::for_hamiltonian(space, order.order(), &probe)?;
    let orbits = gens.all_orbits(n_sites, order.order());
    let set = MeasurementSet::new(order, space.mode_space())?;

    let basis = match opts.basis {
        PropagationBasis::Auto if space.dim() <= AUTO_FULL_DIM => PropagationBasis::Full,
        PropagationBasis::Auto => PropagationBasis::Symmetric,
        b => b,
    };
    let (gen, sector) = match basis {
        PropagationBasis::Full => (
            SweepGenerator::new(
                &parts.number,
                &parts.kerr,
                params.kerr,
                &parts.hopping,
                &parts.drive,
                *schedule,
            ),
            None,
        ),
        _ => {
            let sector = SymmetricSector::new(&gens);
            let gen = SweepGenerator::new(
                &sector.project_diagonal(&parts.number),
                &sector.project_diagonal(&parts.kerr),
                params.kerr,
                &sector.project(&parts.hopping)?,
                &sector.project(&parts.drive)?,
                *schedule,
            );
            (gen, Some(sector))
        }
    };
    drop(parts);

    let vacuum = StateVector::vacuum(space);
    let mut y = match &sector {
        Some(s) => s.restrict(vacuum.amplitudes()),
        None => vacuum.amplitudes().to_vec(),
    };
    let basis_dim = y.len();
    let ode_opts = OdeOptions {
        tol: opts.tol,
        max_step: schedule.t_f / (opts.n_records - 1) as f64,
        ..Default::default()
    };
    let mut stepper = Dop853::new(&gen, ode_opts);

    let mut traj = Trajectory {
        times: Vec::with_capacity(opts.n_records),
        prob_tables: Vec::with_capacity(opts.n_records),
        norms: Vec::new(),
        leakage: Vec::new(),
        symmetric_weights: Vec::new(),
        orbits,
        basis,
        basis_dim,
        steps_accepted: 0,
        steps_rejected: 0,
        meta: serde_json::json!({
            "params": params,
            "config": config,
            "schedule": schedule,
            "cutoff": space.cutoff(),
            "n_records": opts.n_records,
            "tol": opts.tol,
            "leakage_threshold": opts.leakage_threshold,
        }),
    };

    let mut t_prev = 0.0;
    for k in 0..opts.n_records {
        let t = schedule.t_f * k as f64 / (opts.n_records - 1) as f64;
        stepper.integrate(&mut y, t_prev, t)?;
        t_prev = t;
        let psi = match &sector {
            Some(s) => s.embed(&y)?,
            None => StateVector::new(space, y.clone())?,
        };
        let leak = psi.leakage(2);
        if leak > opts.leakage_threshold {
            return Err(Error::Leakage {
                leakage: leak,
                threshold: opts.leakage_threshold,
                time: t,
                cutoff: space.cutoff(),
                suggested_cutoff: suggest_cutoff(&psi, opts.leakage_threshold),
            });
        }
        traj.times.push(t);
        traj.norms.push(psi.norm());
        traj.leakage.push(leak);
        traj.symmetric_weights
            .push(gens.symmetric_weight(psi.amplitudes()));
        traj.prob_tables
            .push(config_probabilities(&psi, &set, n_sites)?);
    }
    let OdeStats {
        accepted, rejected, ..
    } = stepper.stats;
    traj.steps_accepted = accepted;
    traj.steps_rejected = rejected;
    Ok(traj)
}
