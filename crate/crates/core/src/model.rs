//! Rotating-frame Hamiltonians, sweep schedules and the classical
//! phase-space surface of a single driven oscillator.
//!
//! All frequencies are in units of the Kerr constant `K`; `K` is still
//! carried explicitly so rescaling to physical units is a display concern.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockSpace, OperatorMatrix};
use crate::sparse::CsrMatrix;

/// Subharmonic order of the drive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriveOrder {
    /// Drive near three times the eigenfrequency, `-r (a^3 + a^dag^3)`.
    Tripling,
    /// Parametric drive near twice the eigenfrequency, `-r (a^2 + a^dag^2)`.
    Doubling,
}

impl DriveOrder {
    /// Number of phase-locked states, which is also the power of `a` in the
    /// drive term.
    pub fn order(self) -> usize {
        match self {
            DriveOrder::Tripling => 3,
            DriveOrder::Doubling => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    pub delta: f64,
    pub kerr: f64,
    pub drive: f64,
    pub drive_order: DriveOrder,
}

impl OscillatorParams {
    pub fn new(delta: f64, kerr: f64, drive: f64, drive_order: DriveOrder) -> Result<Self> {
        let p = Self {
            delta,
            kerr,
            drive,
            drive_order,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn tripling(delta: f64, drive: f64) -> Self {
        Self {
            delta,
            kerr: 1.0,
            drive,
            drive_order: DriveOrder::Tripling,
        }
    }

    pub fn doubling(delta: f64, drive: f64) -> Self {
        Self {
            delta,
            kerr: 1.0,
            drive,
            drive_order: DriveOrder::Doubling,
        }
    }

    pub fn with(self, drive: f64, delta: f64) -> Self {
        Self {
            drive,
            delta,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kerr > 0.0) {
            return Err(Error::invalid(format!(
                "kerr must be > 0, got {}",
                self.kerr
            )));
        }
        if !(self.drive >= 0.0) {
            return Err(Error::invalid(format!(
                "drive must be >= 0, got {}",
                self.drive
            )));
        }
        if !self.delta.is_finite() {
            return Err(Error::invalid("delta must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

/// Undirected coupling `-V (a_m^dag a_n + a_n^dag a_m)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub m: usize,
    pub n: usize,
    pub v: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub n_sites: usize,
    pub couplings: Vec<Coupling>,
    pub boundary: Boundary,
}

impl ArrayConfig {
    /// Builds a configuration from a coupling list. Each unordered pair may
    /// appear in both orientations only with the same strength; the result
    /// stores one canonical entry (`m < n`) per pair.
    pub fn new(n_sites: usize, couplings: Vec<Coupling>, boundary: Boundary) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::invalid("n_sites must be >= 1"));
        }
        let mut edges: Vec<Coupling> = Vec::new();
        for c in couplings {
            if c.m >= n_sites || c.n >= n_sites {
                return Err(Error::SiteOutOfRange {
                    site: c.m.max(c.n),
                    n_sites,
                });
            }
            if c.m == c.n {
                return Err(Error::invalid(format!("self-coupling on site {}", c.m)));
            }
            let (m, n) = (c.m.min(c.n), c.m.max(c.n));
            match edges.iter().find(|e| e.m == m && e.n == n) {
                Some(e) if (e.v - c.v).abs() > 1e-15 * e.v.abs().max(1.0) => {
                    return Err(Error::invalid(format!(
                        "asymmetric coupling between {m} and {n}: {} vs {}",
                        e.v, c.v
                    )))
                }
                Some(_) => {}
                None => edges.push(Coupling { m, n, v: c.v }),
            }
        }
        edges.sort_by_key(|e| (e.m, e.n));
        Ok(Self {
            n_sites,
            couplings: edges,
            boundary,
        })
    }

    /// Nearest-neighbour ring with periodic boundary conditions. `v > 0` is
    /// ferromagnetic, `v < 0` antiferromagnetic.
    pub fn ring(n_sites: usize, v: f64) -> Result<Self> {
        let mut c = Vec::new();
        if n_sites >= 2 {
            for m in 0..n_sites {
                c.push(Coupling {
                    m,
                    n: (m + 1) % n_sites,
                    v,
                });
            }
        }
        Self::new(n_sites, c, Boundary::Periodic)
    }

    pub fn chain(n_sites: usize, v: f64) -> Result<Self> {
        let c = (0..n_sites.saturating_sub(1))
            .map(|m| Coupling { m, n: m + 1, v })
            .collect();
        Self::new(n_sites, c, Boundary::Open)
    }

    /// Three sites where the outer pair (0, 2) couples antiferromagnetically
    /// and the middle site couples ferromagnetically to both.
    pub fn frustrated_triangle(v_abs: f64) -> Result<Self> {
        let v = v_abs.abs();
        Self::new(
            3,
            vec![
                Coupling { m: 0, n: 1, v },
                Coupling { m: 1, n: 2, v },
                Coupling { m: 0, n: 2, v: -v },
            ],
            Boundary::Periodic,
        )
    }

    pub fn uncoupled(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, Vec::new(), Boundary::Open)
    }

    /// Coupling strength between `m` and `n` (0 when not coupled).
    pub fn coupling(&self, m: usize, n: usize) -> f64 {
        let (a, b) = (m.min(n), m.max(n));
        self.couplings
            .iter()
            .find(|e| e.m == a && e.n == b)
            .map_or(0.0, |e| e.v)
    }

    /// True when the coupling list is invariant under the cyclic shift
    /// `n -> n + 1 (mod N)`.
    pub fn is_translation_invariant(&self) -> bool {
        let n = self.n_sites;
        self.couplings.iter().all(|e| {
            let v = self.coupling((e.m + 1) % n, (e.n + 1) % n);
            (v - e.v).abs() <= 1e-14 * e.v.abs().max(1.0)
        }) && self.couplings.len()
            == (0..n)
                .flat_map(|m| ((m + 1)..n).map(move |k| (m, k)))
                .filter(|&(m, k)| self.coupling(m, k) != 0.0)
                .count()
    }

    /// True when the coupling list is invariant under `n -> N - 1 - n`.
    pub fn is_reversal_invariant(&self) -> bool {
        let n = self.n_sites;
        self.couplings.iter().all(|e| {
            let v = self.coupling(n - 1 - e.m, n - 1 - e.n);
            (v - e.v).abs() <= 1e-14 * e.v.abs().max(1.0)
        })
    }
}

/// Linear ramp of the drive with a simultaneous linear ramp of the detuning
/// to zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSchedule {
    pub r_max: f64,
    pub delta_ini: f64,
    pub t_f: f64,
}

impl SweepSchedule {
    pub fn new(r_max: f64, delta_ini: f64, t_f: f64) -> Result<Self> {
        if !(t_f > 0.0) {
            return Err(Error::invalid(format!("t_f must be > 0, got {t_f}")));
        }
        if !(r_max >= 0.0) {
            return Err(Error::invalid("r_max must be >= 0"));
        }
        Ok(Self {
            r_max,
            delta_ini,
            t_f,
        })
    }

    /// `(r, delta)` at time `t`, with `t` clamped to `[0, t_f]`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let s = (t / self.t_f).clamp(0.0, 1.0);
        (s * self.r_max, (1.0 - s) * self.delta_ini)
    }
}

pub fn schedule_at(schedule: &SweepSchedule, t: f64) -> (f64, f64) {
    schedule.at(t)
}

/// Pieces of the array Hamiltonian that are scaled independently:
/// `H = delta * number + K * kerr + r * drive + hopping`.
#[derive(Clone, Debug)]
pub struct HamiltonianParts {
    pub space: FockSpace,
    /// Diagonal of `sum_n a_n^dag a_n`.
    pub number: Vec<f64>,
    /// Diagonal of `sum_n a_n^dag^2 a_n^2`.
    pub kerr: Vec<f64>,
    /// `-sum_n (a_n^p + a_n^dag^p)` with `p` the drive order.
    pub drive: CsrMatrix<f64>,
    /// `-sum_{m != n} V_mn a_m^dag a_n`.
    pub hopping: CsrMatrix<f64>,
}

impl HamiltonianParts {
    pub fn new(config: &ArrayConfig, order: DriveOrder, space: FockSpace) -> Result<Self> {
        if space.n_modes() != config.n_sites {
            return Err(Error::DimensionMismatch {
                expected: config.n_sites,
                found: space.n_modes(),
            });
        }
        let m = space.cutoff();
        let dim = space.dim();
        let n_sites = config.n_sites;
        let p = order.order();
        let stride = |site: usize| m.pow((n_sites - site - 1) as u32);

        let mut number = vec![0.0; dim];
        let mut kerr = vec![0.0; dim];
        for (idx, (nv, kv)) in number.iter_mut().zip(kerr.iter_mut()).enumerate() {
            for occ in space.occupations(idx) {
                let n = occ as f64;
                *nv += n;
                *kv += n * (n - 1.0);
            }
        }

        let drive = CsrMatrix::from_rows(dim, dim, |row| {
            let occ = space.occupations(row);
            let mut out = Vec::with_capacity(2 * n_sites);
            for (site, &k) in occ.iter().enumerate() {
                let s = stride(site);
                if k >= p {
                    // <k-p| a^p |k>
                    let amp: f64 = (0..p).map(|i| ((k - i) as f64).sqrt()).product();
                    out.push((row - p * s, -amp));
                }
                if k + p < m {
                    let amp: f64 = (1..=p).map(|i| ((k + i) as f64).sqrt()).product();
                    out.push((row + p * s, -amp));
                }
            }
            out
        });

        let hopping = CsrMatrix::from_rows(dim, dim, |row| {
            let occ = space.occupations(row);
            let mut out = Vec::new();
            for e in &config.couplings {
                // -V a_i^dag a_j for both orientations of the edge.
                for (i, j) in [(e.m, e.n), (e.n, e.m)] {
                    if occ[i] >= 1 && occ[j] + 1 < m {
                        // <row| a_i^dag a_j |col> is nonzero for col with one
                        // more quantum on i and one fewer on j.
                        let col = row - stride(i) + stride(j);
                        let amp = (occ[i] as f64).sqrt() * ((occ[j] + 1) as f64).sqrt();
                        out.push((col, -e.v * amp));
                    }
                }
            }
            out
        });

        Ok(Self {
            space,
            number,
            kerr,
            drive,
            hopping,
        })
    }

    pub fn diagonal(&self, delta: f64, kerr: f64) -> Vec<f64> {
        self.number
            .iter()
            .zip(&self.kerr)
            .map(|(n, k)| delta * n + kerr * k)
            .collect()
    }

    /// Real symmetric matrix of `H` at the given scalar parameters.
    pub fn assemble(&self, params: &OscillatorParams) -> CsrMatrix<f64> {
        let diag = CsrMatrix::from_diagonal(&self.diagonal(params.delta, params.kerr));
        diag.add(&self.hopping)
            .add_scaled(&self.drive, params.drive)
    }
}

/// Single-oscillator Hamiltonian `delta a^dag a + K a^dag^2 a^2 - r (a^p + a^dag^p)`.
pub fn build_single_hamiltonian(
    params: &OscillatorParams,
    space: FockSpace,
) -> Result<OperatorMatrix> {
    space.require_single()?;
    build_array_hamiltonian(params, &ArrayConfig::uncoupled(1)?, space)
}

/// Sum of single-site Hamiltonians plus `-sum_{m != n} V_mn a_m^dag a_n`.
pub fn build_array_hamiltonian(
    params: &OscillatorParams,
    config: &ArrayConfig,
    space: FockSpace,
) -> Result<OperatorMatrix> {
    params.validate()?;
    let parts = HamiltonianParts::new(config, params.drive_order, space)?;
    Ok(OperatorMatrix::from_parts_unchecked(
        space,
        parts.assemble(params).to_complex(),
        true,
    ))
}

/// Classical rotating-frame energy surface `H0(X, Y)` with
/// `X = (a^dag + a)/sqrt2`, `Y = i(a^dag - a)/sqrt2`. The cubic term is
/// `X^3 - 3 X Y^2`, the three-fold symmetric real part of `(X + iY)^3`.
pub fn classical_surface(params: &OscillatorParams, x: f64, y: f64) -> Result<f64> {
    require_tripling(params)?;
    let rho2 = x * x + y * y;
    let k = params.kerr;
    Ok(
        0.5 * params.delta * (rho2 - 1.0) + 0.25 * k * ((rho2 - 2.0).powi(2) - 1.0)
            - params.drive * (x * x * x - 3.0 * x * y * y) / SQRT_2,
    )
}

fn require_tripling(params: &OscillatorParams) -> Result<()> {
    match params.drive_order {
        DriveOrder::Tripling => Ok(()),
        DriveOrder::Doubling => Err(Error::Unsupported(
            "classical surface is defined for the tripling drive only".into(),
        )),
    }
}

fn surface_gradient(p: &OscillatorParams, x: f64, y: f64) -> [f64; 2] {
    let c = p.drive / SQRT_2;
    let radial = p.delta + p.kerr * (x * x + y * y - 2.0);
    [
        radial * x - 3.0 * c * (x * x - y * y),
        radial * y + 6.0 * c * x * y,
    ]
}

fn surface_hessian(p: &OscillatorParams, x: f64, y: f64) -> [[f64; 2]; 2] {
    let c = p.drive / SQRT_2;
    let radial = p.delta + p.kerr * (x * x + y * y - 2.0);
    let xy = 2.0 * p.kerr * x * y + 6.0 * c * y;
    [
        [radial + 2.0 * p.kerr * x * x - 6.0 * c * x, xy],
        [xy, radial + 2.0 * p.kerr * y * y + 6.0 * c * x],
    ]
}

fn sym2_eigenvalues(h: [[f64; 2]; 2]) -> (f64, f64) {
    let tr = h[0][0] + h[1][1];
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    (0.5 * tr - disc, 0.5 * tr + disc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Minimum,
    Saddle,
    Maximum,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalExtremum {
    pub position: (f64, f64),
    pub energy: f64,
    pub kind: ExtremumKind,
}

impl ClassicalExtremum {
    pub fn radius(&self) -> f64 {
        self.position.0.hypot(self.position.1)
    }

    pub fn angle(&self) -> f64 {
        self.position.1.atan2(self.position.0).rem_euclid(2.0 * PI)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtremaReport {
    /// Origin first, then minima counter-clockwise from the `Y = 0` axis,
    /// then saddles counter-clockwise.
    pub extrema: Vec<ClassicalExtremum>,
    /// Radius of the degenerate minimum ring at `r = 0`, `delta < 2K`.
    pub degenerate_ring: Option<f64>,
}

impl ExtremaReport {
    pub fn minima(&self) -> impl Iterator<Item = &ClassicalExtremum> {
        self.extrema
            .iter()
            .filter(|e| e.kind == ExtremumKind::Minimum && e.radius() > 1e-9)
    }

    /// Distance of the off-origin minima from the origin.
    pub fn well_radius(&self) -> Option<f64> {
        self.minima().next().map(ClassicalExtremum::radius)
    }
}

const EXTREMA_GRID: usize = 64;
const DEDUP_TOL: f64 = 1e-6;
const GRADIENT_TOL: f64 = 1e-8;

fn classify(p: &OscillatorParams, x: f64, y: f64) -> ExtremumKind {
    let (lo, hi) = sym2_eigenvalues(surface_hessian(p, x, y));
    let tol = 1e-8 * p.kerr;
    if lo >= -tol && hi >= -tol {
        ExtremumKind::Minimum
    } else if lo <= tol && hi <= tol {
        ExtremumKind::Maximum
    } else {
        ExtremumKind::Saddle
    }
}

fn newton_stationary(p: &OscillatorParams, mut x: f64, mut y: f64) -> Option<(f64, f64)> {
    for _ in 0..100 {
        let g = surface_gradient(p, x, y);
        let scale = 1.0 + x.abs().max(y.abs());
        if g[0].hypot(g[1]) <= 1e-13 * p.kerr * scale.powi(3) {
            return Some((x, y));
        }
        let h = surface_hessian(p, x, y);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if det.abs() < 1e-300 {
            return None;
        }
        let dx = (h[1][1] * g[0] - h[0][1] * g[1]) / det;
        let dy = (h[0][0] * g[1] - h[1][0] * g[0]) / det;
        let step = dx.hypot(dy);
        let limit = 0.5 * scale;
        let s = if step > limit { limit / step } else { 1.0 };
        x -= s * dx;
        y -= s * dy;
        if !x.is_finite() || !y.is_finite() {
            return None;
        }
    }
    let g = surface_gradient(p, x, y);
    (g[0].hypot(g[1]) <= GRADIENT_TOL).then_some((x, y))
}

/// Stationary points of the classical surface.
///
/// Newton iterations are seeded from a 64x64 grid covering 1.5 times the
/// estimated well radius; roots closer than 1e-6 are merged. The result is
/// the origin alone or the origin with three minima and three saddles.
pub fn find_extrema(params: &OscillatorParams) -> Result<ExtremaReport> {
    params.validate()?;
    require_tripling(params)?;
    let (k, d, r) = (params.kerr, params.delta, params.drive);

    let make = |x: f64, y: f64| -> Result<ClassicalExtremum> {
        Ok(ClassicalExtremum {
            position: (x, y),
            energy: classical_surface(params, x, y)?,
            kind: classify(params, x, y),
        })
    };

    if r == 0.0 {
        let origin = make(0.0, 0.0)?;
        let ring = (d < 2.0 * k).then(|| (2.0 - d / k).sqrt());
        return Ok(ExtremaReport {
            extrema: vec![origin],
            degenerate_ring: ring,
        });
    }

    // Largest radius along Y = 0 where the radial equation can balance the
    // cubic term; any stationary point lies within it.
    let c = 3.0 * r / SQRT_2;
    let reach = (c + (c * c + 4.0 * k * (d - 2.0 * k).abs()).sqrt()) / (2.0 * k);
    let half = 1.5 * reach.max(1.0);

    let mut found: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    for i in 0..EXTREMA_GRID {
        for j in 0..EXTREMA_GRID {
            let x0 = -half + 2.0 * half * (i as f64 + 0.5) / EXTREMA_GRID as f64;
            let y0 = -half + 2.0 * half * (j as f64 + 0.5) / EXTREMA_GRID as f64;
            if let Some((x, y)) = newton_stationary(params, x0, y0) {
                if !found
                    .iter()
                    .any(|&(fx, fy)| (fx - x).hypot(fy - y) < DEDUP_TOL)
                {
                    found.push((x, y));
                }
            }
        }
    }

    let mut extrema = Vec::with_capacity(found.len());
    for (x, y) in found {
        extrema.push(make(x, y)?);
    }
    let (origin, mut rest): (Vec<_>, Vec<_>) =
        extrema.into_iter().partition(|e| e.radius() < DEDUP_TOL);
    rest.sort_by(|a, b| {
        let ka = (a.kind != ExtremumKind::Minimum) as u8;
        let kb = (b.kind != ExtremumKind::Minimum) as u8;
        ka.cmp(&kb)
            .then(wrap_angle(a.angle()).total_cmp(&wrap_angle(b.angle())))
    });

    if !(rest.is_empty() || rest.len() == 6) {
        return Err(Error::convergence(
            "extrema search",
            format!(
                "found {} off-origin stationary points (expected 0 or 6) for delta={d}, r={r}: {:?}",
                rest.len(),
                rest.iter().map(|e| (e.position, e.kind)).collect::<Vec<_>>()
            ),
        ));
    }
    if rest.len() == 6 {
        let n_min = rest
            .iter()
            .filter(|e| e.kind == ExtremumKind::Minimum)
            .count();
        if n_min != 3 {
            return Err(Error::convergence(
                "extrema search",
                format!("expected three minima, found {n_min}"),
            ));
        }
    }

    let mut extrema = origin;
    extrema.extend(rest);
    Ok(ExtremaReport {
        extrema,
        degenerate_ring: None,
    })
}

/// Angles within 1e-9 of a full turn sort as zero.
fn wrap_angle(a: f64) -> f64 {
    if 2.0 * PI - a < 1e-9 {
        0.0
    } else {
        a
    }
}

/// Critical drive above which off-origin minima exist, `sqrt(8K(delta - 2K)/9)`;
/// zero when `delta <= 2K`.
pub fn minima_threshold(delta: f64, kerr: f64) -> f64 {
    if delta <= 2.0 * kerr {
        0.0
    } else {
        (8.0 * kerr * (delta - 2.0 * kerr) / 9.0).sqrt()
    }
}
