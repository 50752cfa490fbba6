//! Block Lanczos with full reorthogonalization for the lowest eigenpairs of
//! large real symmetric operators.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    /// Number of vectors per block; must exceed the largest degeneracy
    /// among the wanted eigenvalues.
    pub block_size: usize,
    pub max_basis: usize,
    /// Residual bound `||H x - theta x|| <= tol * max(1, |theta|)`.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            block_size: 4,
            max_basis: 4000,
            tol: 1e-9,
            seed: 0x5eed_1a2c,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub basis_size: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the components of `w` along `basis` (two classical Gram–Schmidt
/// passes) and returns the accumulated coefficients.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut coeffs = vec![0.0; basis.len()];
    for _ in 0..2 {
        let c: Vec<f64> = basis.iter().map(|q| dot(q, w)).collect();
        for (q, ci) in basis.iter().zip(&c) {
            for (x, qx) in w.iter_mut().zip(q) {
                *x -= ci * qx;
            }
        }
        for (acc, ci) in coeffs.iter_mut().zip(&c) {
            *acc += ci;
        }
    }
    coeffs
}

/// Appends a unit vector orthogonal to `basis`, drawn at random.
fn random_orthogonal(n: usize, basis: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        orthogonalize(&mut v, basis);
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            return v;
        }
    }
}

/// `k` lowest eigenpairs of the symmetric operator `apply` (`y = H x`)
/// acting on vectors of length `n`.
pub fn lowest_eigenpairs<F>(
    n: usize,
    k: usize,
    apply: F,
    opts: &LanczosOptions,
) -> Result<EigenPairs>
where
    F: Fn(&[f64], &mut [f64]),
{
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "requested {k} eigenpairs of an operator of size {n}"
        )));
    }
    let b = opts.block_size.max(1).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    for _ in 0..b {
        let v = random_orthogonal(n, &basis, &mut rng);
        basis.push(v);
    }
    // coef[c][i] = <q_i| H |q_c>.
    let mut coef: Vec<Vec<f64>> = Vec::new();
    let mut next_check = (2 * k).max(4 * b);
    let mut w = vec![0.0; n];

    loop {
        let start = coef.len();
        let end = basis.len();
        // Expand H on the newest block.
        let mut block: Vec<Vec<f64>> = Vec::with_capacity(end - start);
        for c in start..end {
            apply(&basis[c], &mut w);
            let mut wc = w.clone();
            let cf = orthogonalize(&mut wc, &basis);
            coef.push(cf);
            block.push(wc);
        }
        let m = basis.len();
        let exhausted = m >= n;
        if !exhausted {
            // Orthonormalize the residual block into the next basis block.
            for (ci, wc) in block.iter_mut().enumerate() {
                let c = start + ci;
                let before = norm(wc).max(f64::MIN_POSITIVE);
                let extra = orthogonalize(wc, &basis[m..]);
                for (j, e) in extra.iter().enumerate() {
                    if coef[c].len() <= m + j {
                        coef[c].resize(m + j + 1, 0.0);
                    }
                    coef[c][m + j] += e;
                }
                let nw = norm(wc);
                if basis.len() >= n {
                    continue;
                }
                if nw > 1e-10 * before && nw > 1e-14 {
                    wc.iter_mut().for_each(|x| *x /= nw);
                    coef[c].resize(basis.len() + 1, 0.0);
                    coef[c][basis.len()] = nw;
                    basis.push(wc.clone());
                } else {
                    // Invariant subspace found for this direction; continue
                    // with a fresh random vector.
                    let v = random_orthogonal(n, &basis, &mut rng);
                    basis.push(v);
                }
            }
        }

        let at_limit = basis.len() + b > opts.max_basis;
        if m >= next_check || exhausted || at_limit {
            let t = DMatrix::from_fn(m, m, |i, c| {
                let a = coef[c].get(i).copied().unwrap_or(0.0);
                let bsym = coef[i].get(c).copied().unwrap_or(0.0);
                0.5 * (a + bsym)
            });
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
            let wanted: Vec<usize> = order.into_iter().take(k).collect();
            let mut residuals = Vec::with_capacity(k);
            for &i in &wanted {
                let s = eig.eigenvectors.column(i);
                let mut r2 = 0.0;
                for row in m..basis.len() {
                    let mut acc = 0.0;
                    for c in start..m {
                        acc += coef[c].get(row).copied().unwrap_or(0.0) * s[c];
                    }
                    r2 += acc * acc;
                }
                residuals.push(r2.sqrt());
            }
            let converged = wanted
                .iter()
                .zip(&residuals)
                .all(|(&i, r)| *r <= opts.tol * eig.eigenvalues[i].abs().max(1.0));
            if converged || exhausted {
                let values: Vec<f64> = wanted.iter().map(|&i| eig.eigenvalues[i]).collect();
                let vectors = wanted
                    .iter()
                    .map(|&i| {
                        let s = eig.eigenvectors.column(i);
                        let mut x = vec![0.0; n];
                        for (c, q) in basis[..m].iter().enumerate() {
                            let sc = s[c];
                            for (xi, qi) in x.iter_mut().zip(q) {
                                *xi += sc * qi;
                            }
                        }
                        x
                    })
                    .collect();
                return Ok(EigenPairs {
                    values,
                    vectors,
                    residuals,
                    basis_size: m,
                });
            }
            let last_report = format!(
                "basis {m}, worst residual {:.3e}",
                residuals.iter().cloned().fold(0.0, f64::max)
            );
            if at_limit {
                return Err(Error::convergence("block Lanczos", last_report));
            }
            next_check = (m + m / 4).max(m + 8 * b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CsrMatrix;
    use approx::assert_abs_diff_eq;

    /// Anharmonic ladder with nearest-neighbour mixing.
    fn ladder(n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            let x = i as f64;
            t.push((i, i, x + 0.002 * x * x));
            if i + 1 < n {
                let c = 0.4 * (x + 1.0).sqrt();
                t.push((i, i + 1, c));
                t.push((i + 1, i, c));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    fn dense_lowest(h: &CsrMatrix<f64>, k: usize) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(h.to_dense())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        e.sort_by(f64::total_cmp);
        e.truncate(k);
        e
    }

    #[test]
    fn matches_dense_oracle() {
        let h = ladder(600);
        let res = lowest_eigenpairs(
            600,
            6,
            |x, y| h.matvec_into(x, y),
            &LanczosOptions::default(),
        )
        .unwrap();
        for (a, b) in res.values.iter().zip(dense_lowest(&h, 6)) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
        assert!(res.basis_size < 600);
        for (v, x) in res.values.iter().zip(&res.vectors) {
            let mut y = vec![0.0; 600];
            h.matvec_into(x, &mut y);
            let r: f64 = y
                .iter()
                .zip(x)
                .map(|(a, b)| (a - v * b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(r < 1e-8, "residual {r}");
        }
    }

    #[test]
    fn resolves_exact_degeneracy() {
        // Two decoupled copies: every level is doubly degenerate.
        let n = 200;
        let h = ladder(n);
        let apply = |x: &[f64], y: &mut [f64]| {
            h.matvec_into(&x[..n], &mut y[..n]);
            h.matvec_into(&x[n..], &mut y[n..]);
        };
        let res = lowest_eigenpairs(2 * n, 6, apply, &LanczosOptions::default()).unwrap();
        let single = dense_lowest(&h, 3);
        for j in 0..3 {
            assert_abs_diff_eq!(res.values[2 * j], single[j], epsilon = 1e-9);
            assert_abs_diff_eq!(res.values[2 * j + 1], single[j], epsilon = 1e-9);
        }
        for (i, a) in res.vectors.iter().enumerate() {
            for (j, b) in res.vectors.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(dot(a, b), want, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn small_operator_is_solved_exactly() {
        let h = ladder(6);
        let res = lowest_eigenpairs(6, 6, |x, y| h.matvec_into(x, y), &LanczosOptions::default())
            .unwrap();
        for (a, b) in res.values.iter().zip(dense_lowest(&h, 6)) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
        }
        assert!(
            lowest_eigenpairs(6, 7, |x, y| h.matvec_into(x, y), &LanczosOptions::default())
                .is_err()
        );
    }

    #[test]
    fn basis_limit_is_reported() {
        let h = ladder(600);
        let opts = LanczosOptions {
            max_basis: 12,
            tol: 1e-14,
            ..Default::default()
        };
        assert!(matches!(
            lowest_eigenpairs(600, 4, |x, y| h.matvec_into(x, y), &opts),
            Err(Error::Convergence { .. })
        ));
    }
}
