//! LU factorization with partial pivoting for real banded matrices.

use crate::error::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals, stored by rows
/// with room for the `kl` extra super-diagonals that pivoting fills in.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl >= i && j <= i + self.ku + self.kl {
            self.data[self.slot(i, j)]
        } else {
            0.0
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        if i >= self.n || j >= self.n || !self.in_band(i, j) {
            return Err(Error::invalid(format!(
                "entry ({i}, {j}) lies outside the band"
            )));
        }
        let s = self.slot(i, j);
        self.data[s] += v;
        Ok(())
    }

    /// Replaces row `i` by zeros.
    pub fn clear_row(&mut self, i: usize) {
        let w = self.width;
        self.data[i * w..(i + 1) * w]
            .iter_mut()
            .for_each(|x| *x = 0.0);
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Factorizes in place.
    pub fn factorize(mut self) -> Result<BandedLu> {
        let n = self.n;
        let reach = self.ku + self.kl;
        let mut piv = vec![0usize; n];
        let scale = self
            .data
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()))
            .max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + reach).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-14 * scale {
                return Err(Error::Degenerate(format!(
                    "banded matrix is singular at column {k}"
                )));
            }
            piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.slot(k, k)];
            for i in k + 1..=last_row {
                let s = self.slot(i, k);
                let l = self.data[s] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[s] = l;
                for j in k + 1..=last_col {
                    let u = self.data[self.slot(k, j)];
                    if u != 0.0 {
                        let t = self.slot(i, j);
                        self.data[t] -= l * u;
                    }
                }
            }
        }
        Ok(BandedLu { m: self, piv })
    }
}

#[derive(Clone, Debug)]
pub struct BandedLu {
    m: BandedMatrix,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = &self.m;
        let n = m.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + m.kl).min(n - 1) {
                    x[i] -= m.data[m.slot(i, k)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let hi = (k + m.ku + m.kl).min(n - 1);
            let mut acc = x[k];
            for j in k + 1..=hi {
                acc -= m.data[m.slot(k, j)] * x[j];
            }
            x[k] = acc / m.data[m.slot(k, k)];
        }
        x
    }
}
