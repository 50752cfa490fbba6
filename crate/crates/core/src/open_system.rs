//! Dissipative single oscillator: Lindblad steady states, Wigner functions,
//! the curvature of the Wigner function at the origin, classical fixed
//! points and the semiclassical Fokker–Planck steady state.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, FockSpace, OperatorMatrix, C64};
use crate::model::{ArrayConfig, DriveOrder, HamiltonianParts, OscillatorParams};
use crate::sparse::CsrMatrix;

/// Default single-mode cutoff for steady-state work.
pub const DEFAULT_CUTOFF: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipationParams {
    pub kappa: f64,
    pub nbar: f64,
}

impl DissipationParams {
    pub fn new(kappa: f64, nbar: f64) -> Result<Self> {
        let d = Self { kappa, nbar };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::invalid(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        if !(self.nbar.is_finite() && self.nbar >= 0.0) {
            return Err(Error::invalid(format!(
                "nbar must be >= 0, got {}",
                self.nbar
            )));
        }
        Ok(())
    }

    /// Diffusion coefficient of the Wigner function per quadrature.
    pub fn diffusion(&self) -> f64 {
        self.kappa * (2.0 * self.nbar + 1.0) / 8.0
    }
}

/// Lindblad generator on row-major vectorized density matrices,
/// `vec(rho)[m * M + n] = rho_mn`.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    cutoff: usize,
    matrix: CsrMatrix<C64>,
}

impl Liouvillian {
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn matrix(&self) -> &CsrMatrix<C64> {
        &self.matrix
    }

    /// The superoperator as an operator on a two-mode space of the same
    /// cutoff, whose basis matches the vectorization.
    pub fn to_operator(&self) -> Result<OperatorMatrix> {
        OperatorMatrix::new(FockSpace::new(self.cutoff, 2)?, self.matrix.clone())
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DMatrix<C64>> {
        let m = self.cutoff;
        if rho.space().dim() != m || rho.space().n_modes() != 1 {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: rho.space().dim(),
            });
        }
        let v = vectorize(rho.matrix());
        let out = self.matrix.matvec(&v);
        Ok(DMatrix::from_row_slice(m, m, &out))
    }
}

fn vectorize(rho: &DMatrix<C64>) -> Vec<C64> {
    let m = rho.nrows();
    let mut v = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            v.push(rho[(i, j)]);
        }
    }
    v
}

fn single_hamiltonian(params: &OscillatorParams, space: FockSpace) -> Result<CsrMatrix<f64>> {
    space.require_single()?;
    params.validate()?;
    let parts = HamiltonianParts::new(&ArrayConfig::uncoupled(1)?, params.drive_order, space)?;
    Ok(parts.assemble(params))
}

/// `-i[H, rho]` plus decay at rate `kappa (nbar + 1)` and excitation at
/// rate `kappa nbar`.
pub fn liouvillian(
    params: &OscillatorParams,
    diss: &DissipationParams,
    space: FockSpace,
) -> Result<Liouvillian> {
    if !(diss.kappa >= 0.0 && diss.nbar >= 0.0) {
        return Err(Error::invalid("kappa and nbar must be non-negative"));
    }
    let h = single_hamiltonian(params, space)?;
    let m = space.cutoff();
    let down = diss.kappa * (diss.nbar + 1.0);
    let up = diss.kappa * diss.nbar;
    // Truncated a a^dagger has a zero in its last diagonal entry.
    let aad = |k: usize| if k + 1 < m { (k + 1) as f64 } else { 0.0 };
    let i_unit = C64::new(0.0, 1.0);
    let matrix = CsrMatrix::from_rows(m * m, m * m, |idx| {
        let (p, q) = (idx / m, idx % m);
        let mut row: Vec<(usize, C64)> = Vec::new();
        for (k, v) in h.row(p) {
            row.push((k * m + q, -i_unit * v));
        }
        for (k, v) in h.row(q) {
            row.push((p * m + k, i_unit * v));
        }
        let mut diag = -0.5 * down * (p + q) as f64;
        if p + 1 < m && q + 1 < m {
            row.push((
                (p + 1) * m + q + 1,
                C64::new(down * (((p + 1) * (q + 1)) as f64).sqrt(), 0.0),
            ));
        }
        if up > 0.0 {
            diag -= 0.5 * up * (aad(p) + aad(q));
            if p >= 1 && q >= 1 {
                row.push((
                    (p - 1) * m + q - 1,
                    C64::new(up * ((p * q) as f64).sqrt(), 0.0),
                ));
            }
        }
        row.push((idx, C64::new(diag, 0.0)));
        row
    });
    Ok(Liouvillian { cutoff: m, matrix })
}

/// Indices reachable from `start` through nonzero couplings in either
/// direction.
fn connected_component(a: &CsrMatrix<C64>, start: usize) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in a.triplets() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    (0..n).filter(|&i| seen[i]).collect()
}

/// Unique stationary state. The drive couples `rho_mn` only to elements
/// with the same `(m - n) mod p`, so the solve is restricted to the block
/// containing the populations; the trace condition replaces one equation.
pub fn steady_state(l: &Liouvillian) -> Result<DensityMatrix> {
    let m = l.cutoff;
    let block = connected_component(&l.matrix, 0);
    let pos: std::collections::HashMap<usize, usize> =
        block.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let nb = block.len();
    let mut a = DMatrix::<C64>::zeros(nb, nb);
    for (r, &i) in block.iter().enumerate() {
        for (j, v) in l.matrix.row(i) {
            if let Some(&c) = pos.get(&j) {
                a[(r, c)] += v;
            }
        }
    }
    // Row of rho_00 becomes the trace condition.
    for c in 0..nb {
        a[(0, c)] = C64::new(0.0, 0.0);
    }
    for k in 0..m {
        if let Some(&c) = pos.get(&(k * m + k)) {
            a[(0, c)] = C64::new(1.0, 0.0);
        }
    }
    let mut rhs = DVector::<C64>::zeros(nb);
    rhs[0] = C64::new(1.0, 0.0);
    let x = a.lu().solve(&rhs).ok_or_else(|| {
        Error::Degenerate("Liouvillian has more than one stationary state".into())
    })?;
    let mut rho = DMatrix::<C64>::zeros(m, m);
    for (k, &i) in block.iter().enumerate() {
        rho[(i / m, i % m)] = x[k];
    }
    let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let residual = l
        .matrix
        .matvec(&vectorize(&rho))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let bound = 1e-10 * l.matrix.max_abs();
    if !(residual <= bound) {
        return Err(Error::convergence(
            "steady state",
            format!("residual {residual:.3e} exceeds {bound:.3e}"),
        ));
    }
    DensityMatrix::new(FockSpace::single(m)?, rho)
}

/// Convenience wrapper: build the Liouvillian and solve for its steady state.
pub fn steady_state_for(
    params: &OscillatorParams,
    diss: &DissipationParams,
    cutoff: usize,
) -> Result<DensityMatrix> {
    diss.validate()?;
    steady_state(&liouvillian(params, diss, FockSpace::single(cutoff)?)?)
}

/// Square sampling grid centred on the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width > 0.0) || points < 3 {
            return Err(Error::invalid(
                "grid needs a positive half-width and at least 3 points",
            ));
        }
        Ok(Self { half_width, points })
    }

    /// `max(4, 1.5 X0 / sqrt 2)` with 151 points.
    pub fn default_for(params: &OscillatorParams) -> Self {
        let reach = crate::model::find_extrema(params)
            .ok()
            .and_then(|r| r.well_radius())
            .map(|x0| 1.5 * x0 / 2f64.sqrt())
            .unwrap_or(0.0);
        Self {
            half_width: reach.max(4.0),
            points: 151,
        }
    }

    pub fn axis(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| -self.half_width + 2.0 * self.half_width * i as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }
}

/// Wigner function sampled on a grid over `(Re alpha, Im alpha)`;
/// `values[(iy, ix)]`.
#[derive(Clone, Debug)]
pub struct WignerGrid {
    pub x_axis: Vec<f64>,
    pub y_axis: Vec<f64>,
    pub values: DMatrix<f64>,
    pub spacing: f64,
    pub warnings: Vec<String>,
}

impl WignerGrid {
    /// Trapezoid rule over the grid. Cell-centred grids use the midpoint rule.
    pub fn integral(&self) -> f64 {
        let (ny, nx) = self.values.shape();
        let w = |i: usize, n: usize| if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
        let mut acc = 0.0;
        for iy in 0..ny {
            for ix in 0..nx {
                acc += w(iy, ny) * w(ix, nx) * self.values[(iy, ix)];
            }
        }
        acc * self.spacing * self.spacing
    }

    fn origin_index(&self) -> Option<(usize, usize)> {
        let find = |axis: &[f64]| {
            axis.iter()
                .position(|x| x.abs() < 1e-9 * self.spacing.max(1.0))
        };
        Some((find(&self.y_axis)?, find(&self.x_axis)?))
    }

    pub fn value_at_origin(&self) -> Option<f64> {
        self.origin_index().map(|(iy, ix)| self.values[(iy, ix)])
    }

    /// `d_alpha d_alpha* W` at the origin from five-point stencils of one
    /// and two grid spacings, Richardson-extrapolated.
    pub fn laplacian_at_origin(&self) -> Result<LaplacianEstimate> {
        let (iy, ix) = self
            .origin_index()
            .ok_or_else(|| Error::invalid("grid does not contain the origin"))?;
        let (ny, nx) = self.values.shape();
        if iy < 2 || ix < 2 || iy + 2 >= ny || ix + 2 >= nx {
            return Err(Error::invalid("origin too close to the grid edge"));
        }
        let w = |dy: isize, dx: isize| {
            self.values[((iy as isize + dy) as usize, (ix as isize + dx) as usize)]
        };
        let h = self.spacing;
        let lap = |s: isize| {
            let hs = h * s as f64;
            0.25 * (w(s, 0) + w(-s, 0) + w(0, s) + w(0, -s) - 4.0 * w(0, 0)) / (hs * hs)
        };
        let coarse = lap(2);
        let fine = lap(1);
        let hess = hessian_eigenvalues(
            (w(0, 1) + w(0, -1) - 2.0 * w(0, 0)) / (h * h),
            (w(1, 0) + w(-1, 0) - 2.0 * w(0, 0)) / (h * h),
            (w(1, 1) - w(1, -1) - w(-1, 1) + w(-1, -1)) / (4.0 * h * h),
        );
        Ok(LaplacianEstimate::from_pair(coarse, fine, None, hess))
    }

    /// Header row `y\x, x...`, then one row per `y`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["y\\x".to_string()];
        header.extend(self.x_axis.iter().map(|x| format!("{x:.6}")));
        out.write_record(&header)?;
        for (iy, y) in self.y_axis.iter().enumerate() {
            let mut row = vec![format!("{y:.6}")];
            row.extend((0..self.x_axis.len()).map(|ix| format!("{:.10e}", self.values[(iy, ix)])));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Wigner function of `rho` at one phase-space point, normalized so that
/// the vacuum gives `2/pi` at the origin.
///
/// The functions `W_mn` of `|m><n|` are generated by the three-term
/// recurrence in `m` and `n`, which stays bounded where the explicit
/// Laguerre series cancels catastrophically.
pub fn wigner_at(rho: &DensityMatrix, alpha: C64) -> f64 {
    let mat = rho.matrix();
    let m = mat.nrows();
    let sqrt: Vec<f64> = (0..=m).map(|k| (k as f64).sqrt()).collect();
    let two_a = alpha * 2.0;
    let two_ac = alpha.conj() * 2.0;
    let mut row = vec![C64::new(0.0, 0.0); m];
    row[0] = C64::new(2.0 / PI * (-2.0 * alpha.norm_sqr()).exp(), 0.0);
    let mut w = mat[(0, 0)].re * row[0].re;
    for n in 1..m {
        row[n] = two_a * row[n - 1] / sqrt[n];
        w += 2.0 * (mat[(0, n)] * row[n]).re;
    }
    for i in 1..m {
        let mut prev = row[i];
        row[i] = (two_ac * prev - row[i - 1] * sqrt[i]) / sqrt[i];
        w += (mat[(i, i)] * row[i]).re;
        for n in i + 1..m {
            let next = (two_a * row[n - 1] - prev * sqrt[i]) / sqrt[n];
            prev = row[n];
            row[n] = next;
            w += 2.0 * (mat[(i, n)] * row[n]).re;
        }
    }
    w
}

pub fn wigner(rho: &DensityMatrix, grid: &GridSpec) -> Result<WignerGrid> {
    rho.space().require_single()?;
    let axis = grid.axis();
    let n = axis.len();
    let cols: Vec<Vec<f64>> = axis
        .par_iter()
        .map(|&y| {
            axis.iter()
                .map(|&x| wigner_at(rho, C64::new(x, y)))
                .collect()
        })
        .collect();
    let values = DMatrix::from_fn(n, n, |iy, ix| cols[iy][ix]);
    let mut out = WignerGrid {
        x_axis: axis.clone(),
        y_axis: axis,
        values,
        spacing: grid.spacing(),
        warnings: Vec::new(),
    };
    let mass = out.integral();
    if (mass - 1.0).abs() > 1e-2 {
        out.warnings.push(format!(
            "grid captures {mass:.4} of the normalization; widen the grid"
        ));
    }
    Ok(out)
}

/// Second-derivative diagnostics at the origin.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LaplacianEstimate {
    /// Richardson-extrapolated `d_alpha d_alpha* W(0)`.
    pub value: f64,
    /// Fine-step value before extrapolation.
    pub fine: f64,
    /// Closed-form value from the density matrix, when available.
    pub exact: Option<f64>,
    /// `|value - fine|` relative to `max(|value|, 0.05 * 4/pi)`.
    pub step_error: f64,
    pub converged: bool,
    /// Eigenvalues of the Hessian in `(Re alpha, Im alpha)`.
    pub hessian_eigenvalues: [f64; 2],
}

impl LaplacianEstimate {
    fn from_pair(
        coarse: f64,
        fine: f64,
        exact: Option<f64>,
        hessian_eigenvalues: [f64; 2],
    ) -> Self {
        let value = (4.0 * fine - coarse) / 3.0;
        let floor = 0.05 * 4.0 / PI;
        let step_error = (value - fine).abs() / value.abs().max(floor);
        Self {
            value,
            fine,
            exact,
            step_error,
            converged: step_error <= 1e-2,
            hessian_eigenvalues,
        }
    }

    pub fn sign(&self) -> i8 {
        if self.value > 0.0 {
            1
        } else if self.value < 0.0 {
            -1
        } else {
            0
        }
    }
}

fn hessian_eigenvalues(hxx: f64, hyy: f64, hxy: f64) -> [f64; 2] {
    let mean = 0.5 * (hxx + hyy);
    let d = (0.25 * (hxx - hyy).powi(2) + hxy * hxy).sqrt();
    [mean - d, mean + d]
}

/// `d_alpha d_alpha* W(0) = -(4/pi) sum_m (-1)^m (2m + 1) rho_mm`.
pub fn laplacian_exact(rho: &DensityMatrix) -> f64 {
    let s: f64 = rho
        .populations()
        .iter()
        .enumerate()
        .map(|(m, p)| if m % 2 == 0 { 1.0 } else { -1.0 } * (2 * m + 1) as f64 * p)
        .sum();
    -4.0 / PI * s
}

/// Finite-difference Laplacian at the origin with steps `h` and `h/2`,
/// Richardson-extrapolated, together with the closed form.
pub fn laplacian_at_origin(rho: &DensityMatrix) -> Result<LaplacianEstimate> {
    laplacian_at_origin_with_step(rho, 0.05)
}

pub fn laplacian_at_origin_with_step(rho: &DensityMatrix, h: f64) -> Result<LaplacianEstimate> {
    rho.space().require_single()?;
    if !(h > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let w = |x: f64, y: f64| wigner_at(rho, C64::new(x, y));
    let w0 = w(0.0, 0.0);
    let lap =
        |s: f64| 0.25 * (w(s, 0.0) + w(-s, 0.0) + w(0.0, s) + w(0.0, -s) - 4.0 * w0) / (s * s);
    let hf = 0.5 * h;
    let hess = hessian_eigenvalues(
        (w(hf, 0.0) + w(-hf, 0.0) - 2.0 * w0) / (hf * hf),
        (w(0.0, hf) + w(0.0, -hf) - 2.0 * w0) / (hf * hf),
        (w(hf, hf) - w(hf, -hf) - w(-hf, hf) + w(-hf, -hf)) / (4.0 * hf * hf),
    );
    Ok(LaplacianEstimate::from_pair(
        lap(h),
        lap(hf),
        Some(laplacian_exact(rho)),
        hess,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanAxis {
    R,
    Kappa,
    Nbar,
    Delta,
}

impl ScanAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::R => "r",
            Self::Kappa => "kappa",
            Self::Nbar => "nbar",
            Self::Delta => "delta",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub axis: ScanAxis,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl AxisSpec {
    pub fn new(axis: ScanAxis, start: f64, stop: f64, points: usize) -> Result<Self> {
        if points == 0 || !start.is_finite() || !stop.is_finite() {
            return Err(Error::invalid(
                "axis needs finite bounds and at least one point",
            ));
        }
        Ok(Self {
            axis,
            start,
            stop,
            points,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        (0..self.points)
            .map(|i| self.start + (self.stop - self.start) * i as f64 / (self.points - 1) as f64)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanMethod {
    Quantum,
    Semiclassical,
}

/// Parameters held fixed during a scan.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScanBase {
    pub params: OscillatorParams,
    pub diss: DissipationParams,
    pub cutoff: usize,
    pub method: ScanMethod,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanPoint {
    pub a1: f64,
    pub a2: f64,
    pub laplacian: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanTable {
    pub axis1: AxisSpec,
    pub axis2: Option<AxisSpec>,
    /// Row-major: `axis2` outer, `axis1` inner.
    pub points: Vec<ScanPoint>,
}

impl ScanTable {
    fn row_len(&self) -> usize {
        self.axis1.points
    }

    pub fn rows(&self) -> impl Iterator<Item = &[ScanPoint]> {
        self.points.chunks(self.row_len())
    }

    /// Linear-interpolated zeros along `axis1` in each row, with the value
    /// of `axis2` for that row.
    pub fn sign_boundaries(&self) -> Vec<(f64, Vec<f64>)> {
        self.rows()
            .map(|row| {
                let mut crossings = Vec::new();
                for pair in row.windows(2) {
                    if let (Some(a), Some(b)) = (pair[0].laplacian, pair[1].laplacian) {
                        if (a > 0.0) != (b > 0.0) {
                            crossings.push(pair[0].a1 + (pair[1].a1 - pair[0].a1) * a / (a - b));
                        }
                    }
                }
                (row[0].a2, crossings)
            })
            .collect()
    }

    /// Length along `axis1` of the positive region in each row, using the
    /// interpolated crossings.
    pub fn positive_extent(&self) -> Vec<(f64, f64)> {
        self.rows()
            .map(|row| {
                let mut len = 0.0;
                for pair in row.windows(2) {
                    if let (Some(a), Some(b)) = (pair[0].laplacian, pair[1].laplacian) {
                        let d = pair[1].a1 - pair[0].a1;
                        len += match (a > 0.0, b > 0.0) {
                            (true, true) => d,
                            (true, false) => d * a / (a - b),
                            (false, true) => d * b / (b - a),
                            (false, false) => 0.0,
                        };
                    }
                }
                (row[0].a2, len)
            })
            .collect()
    }

    /// Trapezoid integral of the positive part along `axis1` per row.
    pub fn positive_integral(&self) -> Vec<(f64, f64)> {
        self.rows()
            .map(|row| {
                let mut acc = 0.0;
                for pair in row.windows(2) {
                    if let (Some(a), Some(b)) = (pair[0].laplacian, pair[1].laplacian) {
                        acc += 0.5 * (a.max(0.0) + b.max(0.0)) * (pair[1].a1 - pair[0].a1);
                    }
                }
                (row[0].a2, acc)
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let a2 = self.axis2.map(|a| a.axis.name()).unwrap_or("none");
        out.write_record([self.axis1.axis.name(), a2, "laplacian", "sign"])?;
        for p in &self.points {
            let (lap, sign) = match p.laplacian {
                Some(v) => (
                    format!("{v:.10e}"),
                    if v > 0.0 {
                        "1"
                    } else if v < 0.0 {
                        "-1"
                    } else {
                        "0"
                    },
                ),
                None => ("nan".to_string(), "nan"),
            };
            out.write_record([
                format!("{:.6}", p.a1),
                format!("{:.6}", p.a2),
                lap,
                sign.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn apply_axis(base: &ScanBase, axis: ScanAxis, v: f64) -> (OscillatorParams, DissipationParams) {
    let (mut p, mut d) = (base.params, base.diss);
    match axis {
        ScanAxis::R => p.drive = v,
        ScanAxis::Delta => p.delta = v,
        ScanAxis::Kappa => d.kappa = v,
        ScanAxis::Nbar => d.nbar = v,
    }
    (p, d)
}

fn origin_laplacian(
    params: &OscillatorParams,
    diss: &DissipationParams,
    base: &ScanBase,
) -> Result<f64> {
    diss.validate()?;
    match base.method {
        ScanMethod::Quantum => {
            let rho = steady_state_for(params, diss, base.cutoff)?;
            Ok(laplacian_at_origin(&rho)?.value)
        }
        ScanMethod::Semiclassical => {
            let grid = semiclassical_steady_state(params, diss, &FpeOptions::default())?;
            Ok(grid.laplacian_at_origin()?.value)
        }
    }
}

/// Origin Laplacian over one or two parameter axes. Failed points are
/// recorded and the scan continues.
pub fn scan_laplacian(
    axis1: AxisSpec,
    axis2: Option<AxisSpec>,
    base: &ScanBase,
) -> Result<ScanTable> {
    if axis2.is_some_and(|a| a.axis == axis1.axis) {
        return Err(Error::invalid("scan axes must differ"));
    }
    let v1 = axis1.values();
    let v2 = axis2.map(|a| a.values()).unwrap_or_else(|| vec![0.0]);
    let jobs: Vec<(f64, f64)> = v2
        .iter()
        .flat_map(|&b| v1.iter().map(move |&a| (a, b)))
        .collect();
    let points = jobs
        .par_iter()
        .map(|&(a, b)| {
            let (mut p, mut d) = apply_axis(base, axis1.axis, a);
            if let Some(ax2) = axis2 {
                let tmp = ScanBase {
                    params: p,
                    diss: d,
                    ..*base
                };
                (p, d) = apply_axis(&tmp, ax2.axis, b);
            }
            match origin_laplacian(&p, &d, base) {
                Ok(v) => ScanPoint {
                    a1: a,
                    a2: b,
                    laplacian: Some(v),
                    error: None,
                },
                Err(e) => ScanPoint {
                    a1: a,
                    a2: b,
                    laplacian: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(ScanTable {
        axis1,
        axis2,
        points,
    })
}

/// Rotating-frame drift `d alpha / dt` of the classical oscillator.
pub fn drift(params: &OscillatorParams, diss: &DissipationParams, alpha: C64) -> C64 {
    let i = C64::new(0.0, 1.0);
    let k = params.kerr;
    let lin =
        -(i * params.delta + i * (2.0 * k * (alpha.norm_sqr() - 1.0)) + diss.kappa / 2.0) * alpha;
    let drive = match params.drive_order {
        DriveOrder::Tripling => i * (3.0 * params.drive) * alpha.conj().powi(2),
        DriveOrder::Doubling => i * (2.0 * params.drive) * alpha.conj(),
    };
    lin + drive
}

/// Real Jacobian of the drift in `(Re alpha, Im alpha)`.
fn drift_jacobian(
    params: &OscillatorParams,
    diss: &DissipationParams,
    alpha: C64,
) -> [[f64; 2]; 2] {
    let i = C64::new(0.0, 1.0);
    let k = params.kerr;
    let d_a =
        -(i * params.delta + diss.kappa / 2.0 - i * (2.0 * k)) - i * (4.0 * k * alpha.norm_sqr());
    let d_ac = -i * (2.0 * k) * alpha * alpha
        + match params.drive_order {
            DriveOrder::Tripling => i * (6.0 * params.drive) * alpha.conj(),
            DriveOrder::Doubling => i * (2.0 * params.drive),
        };
    let dx = d_a + d_ac;
    let dy = i * (d_a - d_ac);
    [[dx.re, dy.re], [dx.im, dy.im]]
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FixedPoint {
    #[serde(serialize_with = "serialize_c64")]
    pub alpha: C64,
    pub stable: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FixedPointReport {
    pub points: Vec<FixedPoint>,
    /// Three stable fixed points away from the origin, by direct count.
    pub three_state_regime: bool,
    /// The same decided by the closed-form inequality.
    pub closed_form: bool,
}

impl FixedPointReport {
    pub fn stable_nonzero(&self) -> usize {
        self.points
            .iter()
            .filter(|p| p.stable && p.alpha.norm() > 1e-6)
            .count()
    }

    pub fn outer_radius(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.alpha.norm())
            .fold(0.0, f64::max)
    }
}

fn serialize_c64<S: serde::Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

/// Right-hand side of the three-state inequality,
/// `sqrt((2 - D/K)^2 + (kappa/2K)^2) - 2 + D/K`.
pub fn three_state_rhs(delta: f64, kappa: f64, kerr: f64) -> f64 {
    let d = delta / kerr;
    ((2.0 - d).powi(2) + (kappa / (2.0 * kerr)).powi(2)).sqrt() - 2.0 + d
}

/// Drive above which the classical oscillator has three stable
/// nonzero-amplitude states.
pub fn three_state_threshold(delta: f64, kappa: f64, kerr: f64) -> f64 {
    2.0 * kerr / 3.0 * three_state_rhs(delta, kappa, kerr).max(0.0).sqrt()
}

pub fn closed_form_three_state(params: &OscillatorParams, diss: &DissipationParams) -> bool {
    (1.5 * params.drive / params.kerr).powi(2)
        > three_state_rhs(params.delta, diss.kappa, params.kerr)
}

/// Zeros of the drift found by damped Newton iteration from a grid of
/// starting points, deduplicated, with linear-stability classification.
fn drift_zeros(params: &OscillatorParams, diss: &DissipationParams) -> Result<Vec<FixedPoint>> {
    let k = params.kerr;
    // |alpha|^2 of any fixed point is bounded by the root sum of
    // (2K u + D - 2K)^2 <= (p r)^2 u^(p-1) for p <= 3.
    let r = params.drive.abs();
    let c = (params.delta - 2.0 * k).abs();
    let u_max = (9.0 * r * r + 4.0 * k * c) / (4.0 * k * k) + 4.0 * r / k + 1.0;
    let reach = 1.3 * u_max.sqrt() + 0.5;
    let n = 41;
    let mut found: Vec<C64> = vec![C64::new(0.0, 0.0)];
    for iy in 0..n {
        for ix in 0..n {
            let mut z = C64::new(
                -reach + 2.0 * reach * ix as f64 / (n - 1) as f64,
                -reach + 2.0 * reach * iy as f64 / (n - 1) as f64,
            );
            let mut ok = false;
            for _ in 0..100 {
                let f = drift(params, diss, z);
                if f.norm() < 1e-13 {
                    ok = true;
                    break;
                }
                let j = drift_jacobian(params, diss, z);
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                if det.abs() < 1e-300 {
                    break;
                }
                let dx = (j[1][1] * f.re - j[0][1] * f.im) / det;
                let dy = (-j[1][0] * f.re + j[0][0] * f.im) / det;
                let step = C64::new(dx, dy);
                let lim = 0.5 * reach;
                let scale = if step.norm() > lim {
                    lim / step.norm()
                } else {
                    1.0
                };
                z -= step * scale;
                if z.norm() > 3.0 * reach {
                    break;
                }
            }
            if ok
                && drift(params, diss, z).norm() <= 1e-10
                && !found.iter().any(|w| (w - z).norm() < 1e-6)
            {
                found.push(z);
            }
        }
    }
    Ok(found
        .into_iter()
        .map(|alpha| {
            let j = drift_jacobian(params, diss, alpha);
            let tr = j[0][0] + j[1][1];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            FixedPoint {
                alpha,
                stable: tr < 0.0 && det > 0.0,
            }
        })
        .collect())
}

pub fn classical_fixed_points(
    params: &OscillatorParams,
    diss: &DissipationParams,
) -> Result<FixedPointReport> {
    params.validate()?;
    diss.validate()?;
    if params.drive_order != DriveOrder::Tripling {
        return Err(Error::Unsupported(
            "classical fixed points are implemented for tripling".into(),
        ));
    }
    let mut points = drift_zeros(params, diss)?;
    points.sort_by(|a, b| {
        a.alpha
            .norm()
            .total_cmp(&b.alpha.norm())
            .then(a.alpha.arg().total_cmp(&b.alpha.arg()))
    });
    let stable_nonzero = points
        .iter()
        .filter(|p| p.stable && p.alpha.norm() > 1e-6)
        .count();
    let closed_form = closed_form_three_state(params, diss);
    let direct = stable_nonzero == 3;
    if (stable_nonzero != 0 && stable_nonzero != 3) || direct != closed_form {
        return Err(Error::convergence(
            "classical fixed points",
            format!(
                "{stable_nonzero} stable nonzero points; closed form predicts three: {closed_form}"
            ),
        ));
    }
    Ok(FixedPointReport {
        points,
        three_state_regime: direct,
        closed_form,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FpeOptions {
    /// Cells per axis; odd so that a cell is centred on the origin.
    pub points: usize,
    /// Defaults to `max(1.8 x outermost fixed point, 4 sqrt(2 nbar + 1))`.
    pub half_width: Option<f64>,
}

impl Default for FpeOptions {
    fn default() -> Self {
        Self {
            points: 81,
            half_width: None,
        }
    }
}

/// Stationary solution of the Fokker–Planck equation with the classical
/// drift and the thermal diffusion, on cell-centred finite volumes with
/// central fluxes and zero-flux walls.
pub fn semiclassical_steady_state(
    params: &OscillatorParams,
    diss: &DissipationParams,
    opts: &FpeOptions,
) -> Result<WignerGrid> {
    params.validate()?;
    diss.validate()?;
    let n = opts.points;
    if n < 5 || n % 2 == 0 {
        return Err(Error::invalid(
            "Fokker-Planck grid needs an odd number of cells >= 5",
        ));
    }
    let half_width = match opts.half_width {
        Some(w) if w > 0.0 => w,
        Some(_) => return Err(Error::invalid("half-width must be positive")),
        None => {
            let outer = drift_zeros(params, diss)?
                .iter()
                .map(|p| p.alpha.norm())
                .fold(0.0, f64::max);
            (1.8 * outer).max(4.0 * (2.0 * diss.nbar + 1.0).sqrt())
        }
    };
    let h = 2.0 * half_width / n as f64;
    let centres: Vec<f64> = (0..n).map(|i| -half_width + h * (i as f64 + 0.5)).collect();
    let dif = diss.diffusion();
    let idx = |iy: usize, ix: usize| iy * n + ix;
    let mut a = BandedMatrix::zeros(n * n, n, n);
    let mut add_face = |p: usize, q: usize, v: f64| -> Result<()> {
        // Flux p -> q: F = v (W_p + W_q) / 2 - D (W_q - W_p) / h.
        let cp = 0.5 * v + dif / h;
        let cq = 0.5 * v - dif / h;
        a.add(p, p, -cp / h)?;
        a.add(p, q, -cq / h)?;
        a.add(q, p, cp / h)?;
        a.add(q, q, cq / h)
    };
    for iy in 0..n {
        for ix in 0..n - 1 {
            let v = drift(params, diss, C64::new(centres[ix] + 0.5 * h, centres[iy])).re;
            add_face(idx(iy, ix), idx(iy, ix + 1), v)?;
        }
    }
    for iy in 0..n - 1 {
        for ix in 0..n {
            let v = drift(params, diss, C64::new(centres[ix], centres[iy] + 0.5 * h)).im;
            add_face(idx(iy, ix), idx(iy + 1, ix), v)?;
        }
    }
    let c = idx(n / 2, n / 2);
    a.clear_row(c);
    a.add(c, c, 1.0)?;
    let mut rhs = vec![0.0; n * n];
    rhs[c] = 1.0;
    let w = a.factorize()?.solve(&rhs);
    let total: f64 = w.iter().sum::<f64>() * h * h;
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::convergence(
            "Fokker-Planck solve",
            format!("normalization {total}"),
        ));
    }
    let values = DMatrix::from_fn(n, n, |iy, ix| w[idx(iy, ix)] / total);
    let mut warnings = Vec::new();
    let edge: f64 = (0..n)
        .flat_map(|i| [(0, i), (n - 1, i), (i, 0), (i, n - 1)])
        .map(|(iy, ix)| values[(iy, ix)])
        .sum::<f64>()
        * h
        * h;
    if edge > 1e-3 {
        warnings.push(format!("boundary cells hold {edge:.2e} of the mass"));
    }
    let peak = values.max();
    let low = values.min();
    if low < -1e-2 * peak {
        warnings.push(format!("density dips to {low:.2e} (peak {peak:.2e})"));
    }
    Ok(WignerGrid {
        x_axis: centres.clone(),
        y_axis: centres,
        values,
        spacing: h,
        warnings,
    })
}

/// `1 - exp(-pi Omega^2 / beta^2)`.
pub fn landau_zener(gap_half: f64, rate: f64) -> Result<f64> {
    if rate == 0.0 || rate.is_nan() {
        return Err(Error::invalid(
            "Landau-Zener rate parameter must be nonzero",
        ));
    }
    if rate.is_infinite() {
        return Ok(0.0);
    }
    Ok(-(-PI * gap_half * gap_half / (rate * rate)).exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::StateVector;
    use approx::assert_abs_diff_eq;

    fn vacuum(m: usize) -> DensityMatrix {
        DensityMatrix::from_pure(&StateVector::vacuum(FockSpace::single(m).unwrap()))
    }

    #[test]
    fn vacuum_is_dark() {
        let p = OscillatorParams::tripling(0.7, 0.0);
        let l = liouvillian(
            &p,
            &DissipationParams {
                kappa: 0.3,
                nbar: 0.0,
            },
            FockSpace::single(8).unwrap(),
        )
        .unwrap();
        let out = l.apply(&vacuum(8)).unwrap();
        assert!(out.iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn trace_preserving() {
        let p = OscillatorParams::tripling(0.4, 0.9);
        let m = 10;
        let l = liouvillian(
            &p,
            &DissipationParams {
                kappa: 0.5,
                nbar: 0.3,
            },
            FockSpace::single(m).unwrap(),
        )
        .unwrap();
        let mut id = vec![C64::new(0.0, 0.0); m * m];
        for k in 0..m {
            id[k * m + k] = C64::new(1.0, 0.0);
        }
        let back = l.matrix().adjoint().matvec(&id);
        assert!(back.iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn thermal_steady_state() {
        let p = OscillatorParams::tripling(0.3, 0.0);
        let rho = steady_state_for(
            &p,
            &DissipationParams {
                kappa: 0.5,
                nbar: 0.5,
            },
            40,
        )
        .unwrap();
        let n: f64 = rho
            .populations()
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum();
        assert_abs_diff_eq!(n, 0.5, epsilon = 1e-8);
        let d = rho.diagnostics();
        assert!(d.is_physical(), "{d:?}");
    }

    #[test]
    fn steady_state_of_undriven_oscillator_is_vacuum() {
        let p = OscillatorParams::tripling(1.0, 0.0);
        let rho = steady_state_for(
            &p,
            &DissipationParams {
                kappa: 0.2,
                nbar: 0.0,
            },
            12,
        )
        .unwrap();
        assert_abs_diff_eq!(rho.matrix()[(0, 0)].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn wigner_of_fock_and_coherent_states() {
        assert_abs_diff_eq!(
            wigner_at(&vacuum(10), C64::new(0.0, 0.0)),
            2.0 / PI,
            epsilon = 1e-14
        );
        let one = DensityMatrix::from_pure(
            &StateVector::basis(FockSpace::single(10).unwrap(), &[1]).unwrap(),
        );
        assert_abs_diff_eq!(
            wigner_at(&one, C64::new(0.0, 0.0)),
            -2.0 / PI,
            epsilon = 1e-14
        );
        let beta = C64::new(1.0, 0.5);
        let coh = DensityMatrix::from_pure(
            &StateVector::coherent(FockSpace::single(40).unwrap(), beta).unwrap(),
        );
        for a in [
            C64::new(0.0, 0.0),
            beta,
            C64::new(1.3, 0.2),
            C64::new(-0.5, 1.0),
        ] {
            let want = 2.0 / PI * (-2.0 * (a - beta).norm_sqr()).exp();
            assert_abs_diff_eq!(wigner_at(&coh, a), want, epsilon = 1e-10);
        }
    }

    #[test]
    fn laplacian_oracles() {
        let est = laplacian_at_origin(&vacuum(20)).unwrap();
        assert_abs_diff_eq!(est.value, -4.0 / PI, epsilon = 1e-3 * 4.0 / PI);
        assert_abs_diff_eq!(est.exact.unwrap(), -4.0 / PI, epsilon = 1e-14);
        for nbar in [0.3, 1.0] {
            let rho = DensityMatrix::thermal(FockSpace::single(80).unwrap(), nbar).unwrap();
            let want = -4.0 / (PI * (2.0 * nbar + 1.0).powi(2));
            let est = laplacian_at_origin(&rho).unwrap();
            assert!(
                (est.value - want).abs() < 1e-3 * want.abs(),
                "{} vs {want}",
                est.value
            );
            assert!((est.exact.unwrap() - want).abs() < 1e-8);
        }
    }

    #[test]
    fn grid_laplacian_and_mass() {
        let g = wigner(&vacuum(10), &GridSpec::new(4.0, 101).unwrap()).unwrap();
        assert_abs_diff_eq!(g.integral(), 1.0, epsilon = 1e-6);
        assert!(g.warnings.is_empty());
        let est = g.laplacian_at_origin().unwrap();
        assert!((est.value + 4.0 / PI).abs() < 1e-3 * 4.0 / PI);
        let small = wigner(&vacuum(10), &GridSpec::new(0.5, 21).unwrap()).unwrap();
        assert!(!small.warnings.is_empty());
    }

    #[test]
    fn wigner_csv_has_axis_header() {
        let g = wigner(&vacuum(4), &GridSpec::new(1.0, 3).unwrap()).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(first, "y\\x,-1.000000,0.000000,1.000000");
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn threshold_examples() {
        assert_abs_diff_eq!(three_state_threshold(0.0, 0.5, 1.0), 0.0832, epsilon = 1e-4);
        assert_abs_diff_eq!(
            three_state_threshold(6.0, 1e-9, 1.0),
            (32.0f64 / 9.0).sqrt(),
            epsilon = 1e-6
        );
        // Agrees with the closed-system minima condition.
        assert_abs_diff_eq!(
            three_state_threshold(6.0, 1e-9, 1.0),
            crate::model::minima_threshold(6.0, 1.0),
            epsilon = 1e-6
        );
    }

    #[test]
    fn fixed_points_above_and_below_threshold() {
        let d = DissipationParams {
            kappa: 0.5,
            nbar: 0.0,
        };
        let below = classical_fixed_points(&OscillatorParams::tripling(0.0, 0.05), &d).unwrap();
        assert!(!below.three_state_regime);
        assert_eq!(below.points.len(), 1);
        assert!(below.points[0].stable);
        let above = classical_fixed_points(&OscillatorParams::tripling(0.0, 1.0), &d).unwrap();
        assert!(above.three_state_regime && above.closed_form);
        assert_eq!(above.points.len(), 7);
        for p in &above.points {
            assert!(drift(&OscillatorParams::tripling(0.0, 1.0), &d, p.alpha).norm() < 1e-10);
        }
        assert!(above.points[0].alpha.norm() < 1e-12 && above.points[0].stable);
    }

    #[test]
    fn fpe_linear_oscillator_is_gaussian() {
        let p = OscillatorParams::tripling(0.0, 0.0);
        let d = DissipationParams {
            kappa: 0.5,
            nbar: 0.0,
        };
        let g = semiclassical_steady_state(&p, &d, &FpeOptions::default()).unwrap();
        assert_abs_diff_eq!(g.integral(), 1.0, epsilon = 1e-10);
        let est = g.laplacian_at_origin().unwrap();
        assert!(est.value < 0.0);
        assert!(
            (est.value + 4.0 / PI).abs() < 2e-2 * 4.0 / PI,
            "{}",
            est.value
        );
    }

    #[test]
    fn landau_zener_values() {
        assert_eq!(landau_zener(0.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            landau_zener(0.7, 0.7).unwrap(),
            1.0 - (-PI).exp(),
            epsilon = 1e-14
        );
        assert!(landau_zener(1.0, 1e12).unwrap() < 1e-20);
        assert_eq!(landau_zener(1.0, f64::INFINITY).unwrap(), 0.0);
        assert!(landau_zener(1.0, 0.0).is_err());
    }

    #[test]
    fn scan_records_failures_and_boundaries() {
        let base = ScanBase {
            params: OscillatorParams::tripling(0.0, 0.0),
            diss: DissipationParams {
                kappa: 0.5,
                nbar: 0.0,
            },
            cutoff: 20,
            method: ScanMethod::Quantum,
        };
        let ax = AxisSpec::new(ScanAxis::Kappa, 0.0, 0.5, 2).unwrap();
        let t = scan_laplacian(ax, None, &base).unwrap();
        assert!(t.points[0].laplacian.is_none() && t.points[0].error.is_some());
        assert!(t.points[1].laplacian.unwrap() < 0.0);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("kappa,none,laplacian,sign\n"));
    }
}
