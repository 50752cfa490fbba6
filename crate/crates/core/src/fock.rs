//! Truncated Fock spaces, ladder operators and tensor-product embedding.
//!
//! Multi-mode basis states are ordered big-endian: site 0 is the
//! slowest-varying index, so `|n0 n1 ... n_{N-1}>` sits at
//! `sum_k n_k * cutoff^(N-1-k)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub type C64 = Complex64;

const HERMITIAN_REL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockSpace {
    cutoff: usize,
    n_modes: usize,
}

impl FockSpace {
    pub fn new(cutoff: usize, n_modes: usize) -> Result<Self> {
        if cutoff < 2 {
            return Err(Error::invalid(format!("cutoff must be >= 2, got {cutoff}")));
        }
        if n_modes < 1 {
            return Err(Error::invalid("n_modes must be >= 1"));
        }
        cutoff
            .checked_pow(n_modes as u32)
            .filter(|&d| d <= u32::MAX as usize)
            .ok_or_else(|| Error::invalid(format!("dimension {cutoff}^{n_modes} is too large")))?;
        Ok(Self { cutoff, n_modes })
    }

    pub fn single(cutoff: usize) -> Result<Self> {
        Self::new(cutoff, 1)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dim(&self) -> usize {
        self.cutoff.pow(self.n_modes as u32)
    }

    /// The single-mode factor of this space.
    pub fn mode_space(&self) -> FockSpace {
        FockSpace {
            cutoff: self.cutoff,
            n_modes: 1,
        }
    }

    pub fn index_of(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.n_modes {
            return Err(Error::DimensionMismatch {
                expected: self.n_modes,
                found: occupations.len(),
            });
        }
        let mut idx = 0;
        for &n in occupations {
            if n >= self.cutoff {
                return Err(Error::invalid(format!(
                    "occupation {n} >= cutoff {}",
                    self.cutoff
                )));
            }
            idx = idx * self.cutoff + n;
        }
        Ok(idx)
    }

    pub fn occupations(&self, mut index: usize) -> Vec<usize> {
        let mut occ = vec![0; self.n_modes];
        for slot in occ.iter_mut().rev() {
            *slot = index % self.cutoff;
            index /= self.cutoff;
        }
        occ
    }

    pub(crate) fn require_single(&self) -> Result<()> {
        if self.n_modes == 1 {
            Ok(())
        } else {
            Err(Error::NotSingleMode(self.n_modes))
        }
    }

    pub(crate) fn require_same(&self, other: &FockSpace) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            })
        }
    }
}

/// A sparse operator on a [`FockSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    space: FockSpace,
    matrix: CsrMatrix<C64>,
    hermitian_hint: bool,
}

impl OperatorMatrix {
    pub fn new(space: FockSpace, matrix: CsrMatrix<C64>) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self {
            space,
            matrix,
            hermitian_hint: false,
        })
    }

    /// Same as [`OperatorMatrix::new`] but marks the operator Hermitian after
    /// checking `max|M - M^dagger| <= 1e-12 * max|M|`.
    pub fn hermitian(space: FockSpace, matrix: CsrMatrix<C64>) -> Result<Self> {
        Self::new(space, matrix)?.with_hermitian_hint()
    }

    pub fn with_hermitian_hint(mut self) -> Result<Self> {
        let defect = self.matrix.hermiticity_defect();
        let scale = self.matrix.max_abs();
        if defect > HERMITIAN_REL_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::invalid(format!(
                "operator is not Hermitian: defect {defect:.3e} vs scale {scale:.3e}"
            )));
        }
        self.hermitian_hint = true;
        Ok(self)
    }

    pub(crate) fn from_parts_unchecked(
        space: FockSpace,
        matrix: CsrMatrix<C64>,
        hermitian_hint: bool,
    ) -> Self {
        debug_assert_eq!(matrix.nrows(), space.dim());
        Self {
            space,
            matrix,
            hermitian_hint,
        }
    }

    pub fn identity(space: FockSpace) -> Self {
        Self::from_parts_unchecked(space, CsrMatrix::identity(space.dim()), true)
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn matrix(&self) -> &CsrMatrix<C64> {
        &self.matrix
    }

    pub fn is_hermitian_hint(&self) -> bool {
        self.hermitian_hint
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.matrix.get(row, col)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_parts_unchecked(self.space, self.matrix.adjoint(), self.hermitian_hint)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.space.require_same(&other.space)?;
        Ok(Self::from_parts_unchecked(
            self.space,
            self.matrix.matmul(&other.matrix),
            false,
        ))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.add_scaled(other, C64::new(1.0, 0.0))
    }

    pub fn add_scaled(&self, other: &Self, s: C64) -> Result<Self> {
        self.space.require_same(&other.space)?;
        let herm = self.hermitian_hint && other.hermitian_hint && s.im == 0.0;
        Ok(Self::from_parts_unchecked(
            self.space,
            self.matrix.add_scaled(&other.matrix, s),
            herm,
        ))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_parts_unchecked(
            self.space,
            self.matrix.scale(s),
            self.hermitian_hint && s.im == 0.0,
        )
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        let ab = self.matmul(other)?;
        let ba = other.matmul(self)?;
        ab.add_scaled(&ba, C64::new(-1.0, 0.0))
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        self.space.require_same(&state.space)?;
        Ok(StateVector {
            space: self.space,
            amplitudes: self.matrix.matvec(&state.amplitudes),
        })
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.matrix.to_dense()
    }

    /// Largest `|M_ij|` over stored entries.
    pub fn max_abs(&self) -> f64 {
        self.matrix.max_abs()
    }
}

/// Pure-state amplitudes on a [`FockSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    space: FockSpace,
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(space: FockSpace, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: amplitudes.len(),
            });
        }
        Ok(Self { space, amplitudes })
    }

    /// `|n0 n1 ...>`
    pub fn basis(space: FockSpace, occupations: &[usize]) -> Result<Self> {
        let mut amplitudes = vec![C64::default(); space.dim()];
        amplitudes[space.index_of(occupations)?] = C64::new(1.0, 0.0);
        Ok(Self { space, amplitudes })
    }

    pub fn vacuum(space: FockSpace) -> Self {
        let mut amplitudes = vec![C64::default(); space.dim()];
        amplitudes[0] = C64::new(1.0, 0.0);
        Self { space, amplitudes }
    }

    /// Truncated single-mode coherent state, renormalized on the cutoff.
    pub fn coherent(space: FockSpace, alpha: C64) -> Result<Self> {
        space.require_single()?;
        let mut amps = Vec::with_capacity(space.cutoff());
        let mut term = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
        for n in 0..space.cutoff() {
            if n > 0 {
                term = term * alpha / (n as f64).sqrt();
            }
            amps.push(term);
        }
        let mut s = Self {
            space,
            amplitudes: amps,
        };
        s.normalize();
        Ok(s)
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.amplitudes.iter_mut().for_each(|a| *a /= n);
        }
    }

    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.space.require_same(&other.space)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Tensor product `self (x) other`, with `self` on the leading sites.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.space.cutoff() != other.space.cutoff() {
            return Err(Error::DimensionMismatch {
                expected: self.space.cutoff(),
                found: other.space.cutoff(),
            });
        }
        let space = FockSpace::new(
            self.space.cutoff(),
            self.space.n_modes() + other.space.n_modes(),
        )?;
        let mut amplitudes = Vec::with_capacity(space.dim());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        Ok(Self { space, amplitudes })
    }

    /// Population of the top `levels` Fock states of each mode, maximized
    /// over modes.
    pub fn leakage(&self, levels: usize) -> f64 {
        let m = self.space.cutoff();
        let n = self.space.n_modes();
        let mut per_mode = vec![0.0; n];
        for (idx, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let mut rest = idx;
            for k in (0..n).rev() {
                if rest % m + levels >= m {
                    per_mode[k] += p;
                }
                rest /= m;
            }
        }
        per_mode.into_iter().fold(0.0, f64::max)
    }
}

/// Mixed state. Stored dense; only single modes are used with this type.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: FockSpace,
    matrix: DMatrix<C64>,
}

/// Deviations of a density matrix from physicality.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DensityDiagnostics {
    pub hermiticity_defect: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

impl DensityDiagnostics {
    pub fn is_physical(&self) -> bool {
        self.hermiticity_defect <= 1e-10 && self.trace_error <= 1e-8 && self.min_eigenvalue >= -1e-8
    }
}

impl DensityMatrix {
    pub fn new(space: FockSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: matrix.nrows(),
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn from_pure(state: &StateVector) -> Self {
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        Self {
            space: state.space(),
            matrix: &v * v.adjoint(),
        }
    }

    /// Thermal state with mean occupation `nbar`, renormalized on the cutoff.
    pub fn thermal(space: FockSpace, nbar: f64) -> Result<Self> {
        space.require_single()?;
        if nbar < 0.0 {
            return Err(Error::invalid("nbar must be >= 0"));
        }
        let q = if nbar == 0.0 {
            0.0
        } else {
            nbar / (nbar + 1.0)
        };
        let m = space.cutoff();
        let pops: Vec<f64> = (0..m).map(|n| q.powi(n as i32)).collect();
        let z: f64 = pops.iter().sum();
        let mut mat = DMatrix::zeros(m, m);
        for n in 0..m {
            mat[(n, n)] = C64::new(pops[n] / z, 0.0);
        }
        Ok(Self { space, matrix: mat })
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.matrix.nrows())
            .map(|i| self.matrix[(i, i)].re)
            .collect()
    }

    pub fn diagnostics(&self) -> DensityDiagnostics {
        let herm = (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let sym = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let eig = nalgebra::SymmetricEigen::new(sym);
        let min_eigenvalue = eig
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        DensityDiagnostics {
            hermiticity_defect: herm,
            trace_error: (self.trace() - C64::new(1.0, 0.0)).norm(),
            min_eigenvalue,
        }
    }
}

/// States that can produce `<M>` for an operator.
pub trait Expectation {
    fn expectation_of(&self, op: &OperatorMatrix) -> Result<C64>;
}

impl Expectation for StateVector {
    fn expectation_of(&self, op: &OperatorMatrix) -> Result<C64> {
        let applied = op.apply(self)?;
        self.inner(&applied)
    }
}

impl Expectation for DensityMatrix {
    fn expectation_of(&self, op: &OperatorMatrix) -> Result<C64> {
        op.space.require_same(&self.space)?;
        // Tr(M rho) = sum_ij M_ij rho_ji
        let mut acc = C64::default();
        for (i, j, v) in op.matrix.triplets() {
            acc += v * self.matrix[(j, i)];
        }
        Ok(acc)
    }
}

/// `<psi|M|psi>` or `Tr(M rho)`.
pub fn expectation<S: Expectation>(op: &OperatorMatrix, state: &S) -> Result<C64> {
    state.expectation_of(op)
}

/// Annihilation operator with `<k-1|a|k> = sqrt(k)`.
pub fn destroy_op(space: FockSpace) -> Result<OperatorMatrix> {
    space.require_single()?;
    let m = space.cutoff();
    let t = (1..m)
        .map(|k| (k - 1, k, C64::new((k as f64).sqrt(), 0.0)))
        .collect();
    Ok(OperatorMatrix::from_parts_unchecked(
        space,
        CsrMatrix::from_triplets(m, m, t),
        false,
    ))
}

pub fn create_op(space: FockSpace) -> Result<OperatorMatrix> {
    Ok(destroy_op(space)?.adjoint())
}

pub fn number_op(space: FockSpace) -> Result<OperatorMatrix> {
    space.require_single()?;
    let diag: Vec<C64> = (0..space.cutoff())
        .map(|n| C64::new(n as f64, 0.0))
        .collect();
    Ok(OperatorMatrix::from_parts_unchecked(
        space,
        CsrMatrix::from_diagonal(&diag),
        true,
    ))
}

/// Diagonal single-mode operator `f(n)`.
pub fn diagonal_op(space: FockSpace, f: impl Fn(usize) -> C64) -> Result<OperatorMatrix> {
    space.require_single()?;
    let diag: Vec<C64> = (0..space.cutoff()).map(f).collect();
    let herm = diag.iter().all(|d| d.im == 0.0);
    Ok(OperatorMatrix::from_parts_unchecked(
        space,
        CsrMatrix::from_diagonal(&diag),
        herm,
    ))
}

/// `I (x) ... (x) op (x) ... (x) I` with `op` acting on `site`.
pub fn embed_site(
    op: &OperatorMatrix,
    site: usize,
    array_space: FockSpace,
) -> Result<OperatorMatrix> {
    op.space.require_single()?;
    if site >= array_space.n_modes() {
        return Err(Error::SiteOutOfRange {
            site,
            n_sites: array_space.n_modes(),
        });
    }
    let m = array_space.cutoff();
    if op.space.cutoff() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: op.space.cutoff(),
        });
    }
    let n = array_space.n_modes();
    let inner = m.pow((n - site - 1) as u32);
    let dim = array_space.dim();
    let local = &op.matrix;
    let matrix = CsrMatrix::from_rows(dim, dim, |row| {
        let k = (row / inner) % m;
        let base = row - k * inner;
        local.row(k).map(|(l, v)| (base + l * inner, v)).collect()
    });
    Ok(OperatorMatrix::from_parts_unchecked(
        array_space,
        matrix,
        op.hermitian_hint,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    #[test]
    fn destroy_cutoff_two() {
        let a = destroy_op(FockSpace::single(2).unwrap()).unwrap();
        assert_eq!(a.get(0, 1), one());
        assert_eq!(a.get(0, 0), C64::default());
        assert_eq!(a.get(1, 0), C64::default());
        assert_eq!(a.get(1, 1), C64::default());
    }

    #[test]
    fn destroy_cutoff_four_entry() {
        let a = destroy_op(FockSpace::single(4).unwrap()).unwrap();
        assert_abs_diff_eq!(a.get(2, 3).re, 1.7320508, epsilon = 1e-7);
    }

    #[test]
    fn number_from_ladder_products() {
        let s = FockSpace::single(4).unwrap();
        let a = destroy_op(s).unwrap();
        let n = a.adjoint().matmul(&a).unwrap();
        for k in 0..4 {
            assert_abs_diff_eq!(n.get(k, k).re, k as f64, epsilon = 1e-14);
        }
    }

    #[test]
    fn multi_mode_destroy_is_rejected() {
        let s = FockSpace::new(3, 2).unwrap();
        assert!(matches!(destroy_op(s), Err(Error::NotSingleMode(2))));
    }

    #[test]
    fn cutoff_below_two_is_rejected() {
        assert!(FockSpace::new(1, 1).is_err());
        assert!(FockSpace::new(3, 0).is_err());
    }

    #[test]
    fn commutator_defect_sits_on_the_boundary() {
        for m in [2, 5, 9] {
            let s = FockSpace::single(m).unwrap();
            let a = destroy_op(s).unwrap();
            let comm = a.commutator(&a.adjoint()).unwrap();
            let defect = comm
                .add_scaled(&OperatorMatrix::identity(s), -one())
                .unwrap();
            for (i, j, v) in defect.matrix().triplets().filter(|t| t.2.norm() > 1e-12) {
                assert_eq!((i, j), (m - 1, m - 1));
                assert_abs_diff_eq!(v.re, -(m as f64), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn embed_site_examples() {
        let single = FockSpace::single(2).unwrap();
        let a = destroy_op(single).unwrap();
        let arr = FockSpace::new(2, 2).unwrap();
        let a0 = embed_site(&a, 0, arr).unwrap();
        let a1 = embed_site(&a, 1, arr).unwrap();
        let idx = |o: &[usize]| arr.index_of(o).unwrap();
        assert_eq!(a0.get(idx(&[0, 0]), idx(&[1, 0])), one());
        assert_eq!(a1.get(idx(&[0, 0]), idx(&[0, 1])), one());

        let s3 = FockSpace::single(3).unwrap();
        let arr3 = FockSpace::new(3, 3).unwrap();
        let n1 = embed_site(&number_op(s3).unwrap(), 1, arr3).unwrap();
        let i = arr3.index_of(&[0, 2, 1]).unwrap();
        assert_eq!(n1.get(i, i), C64::new(2.0, 0.0));
    }

    #[test]
    fn embed_site_errors() {
        let a = destroy_op(FockSpace::single(3).unwrap()).unwrap();
        assert!(matches!(
            embed_site(&a, 2, FockSpace::new(3, 2).unwrap()),
            Err(Error::SiteOutOfRange { .. })
        ));
        assert!(matches!(
            embed_site(&a, 0, FockSpace::new(4, 2).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn distinct_sites_commute_exactly() {
        let s = FockSpace::single(3).unwrap();
        let arr = FockSpace::new(3, 3).unwrap();
        let a = destroy_op(s).unwrap();
        let ad = a.adjoint();
        let x = embed_site(&a, 0, arr).unwrap();
        let y = embed_site(&ad, 2, arr).unwrap();
        assert_eq!(x.commutator(&y).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn expectation_examples() {
        let s = FockSpace::single(5).unwrap();
        let n = number_op(s).unwrap();
        assert_eq!(
            expectation(&n, &StateVector::vacuum(s)).unwrap(),
            C64::default()
        );
        let one_photon = StateVector::basis(s, &[1]).unwrap();
        assert_abs_diff_eq!(
            expectation(&n, &one_photon).unwrap().re,
            1.0,
            epsilon = 1e-15
        );
        let rho = DensityMatrix::thermal(s, 0.3).unwrap();
        let tr = expectation(&OperatorMatrix::identity(s), &rho).unwrap();
        assert_abs_diff_eq!(tr.re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn expectation_space_mismatch() {
        let n = number_op(FockSpace::single(4).unwrap()).unwrap();
        let psi = StateVector::vacuum(FockSpace::single(5).unwrap());
        assert!(expectation(&n, &psi).is_err());
    }

    #[test]
    fn hermitian_hint_is_checked() {
        let s = FockSpace::single(3).unwrap();
        let a = destroy_op(s).unwrap();
        assert!(a.clone().with_hermitian_hint().is_err());
        let x = a.add(&a.adjoint()).unwrap();
        assert!(x.with_hermitian_hint().is_ok());
    }

    #[test]
    fn coherent_state_mean_occupation() {
        let s = FockSpace::single(40).unwrap();
        let alpha = C64::new(1.2, -0.7);
        let psi = StateVector::coherent(s, alpha).unwrap();
        let n = expectation(&number_op(s).unwrap(), &psi).unwrap();
        assert_abs_diff_eq!(n.re, alpha.norm_sqr(), epsilon = 1e-10);
        let a = expectation(&destroy_op(s).unwrap(), &psi).unwrap();
        assert_abs_diff_eq!((a - alpha).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn leakage_counts_top_levels() {
        let s = FockSpace::new(4, 2).unwrap();
        let mut amps = vec![C64::default(); 16];
        amps[s.index_of(&[0, 3]).unwrap()] = C64::new(0.6, 0.0);
        amps[s.index_of(&[1, 1]).unwrap()] = C64::new(0.8, 0.0);
        let psi = StateVector::new(s, amps).unwrap();
        assert_abs_diff_eq!(psi.leakage(2), 0.36, epsilon = 1e-15);
    }
}
