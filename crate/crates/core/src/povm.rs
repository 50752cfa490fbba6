//! Phase-sector measurement operators and configuration probabilities.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::fock::{FockSpace, OperatorMatrix, StateVector, C64};
use crate::model::DriveOrder;
use crate::sparse::CsrMatrix;

/// Dense matrix of the sector operator `E(theta)`: the coherent-state
/// projector integrated over the angular wedge `|arg alpha| < theta`.
pub fn e_theta_dense(theta: f64, cutoff: usize) -> Result<DMatrix<f64>> {
    if !(theta > 0.0 && theta <= PI) {
        return Err(Error::invalid(format!(
            "theta must lie in (0, pi], got {theta}"
        )));
    }
    let ln_fact: Vec<f64> = (0..cutoff).map(|k| ln_gamma(k as f64 + 1.0)).collect();
    Ok(DMatrix::from_fn(cutoff, cutoff, |k, kp| {
        if k == kp {
            return theta / PI;
        }
        let d = k as f64 - kp as f64;
        let mag = (ln_gamma((k + kp) as f64 / 2.0 + 1.0) - 0.5 * (ln_fact[k] + ln_fact[kp])).exp();
        mag * (d * theta).sin() / d / PI
    }))
}

pub fn e_theta(theta: f64, space: FockSpace) -> Result<OperatorMatrix> {
    space.require_single()?;
    let d = e_theta_dense(theta, space.cutoff())?;
    let m = CsrMatrix::from_dense(&d.map(|v| C64::new(v, 0.0)), 0.0);
    Ok(OperatorMatrix::from_parts_unchecked(space, m, true))
}

/// Complete set of sector operators for one mode.
#[derive(Clone, Debug)]
pub struct MeasurementSet {
    kind: DriveOrder,
    space: FockSpace,
    dense: Vec<DMatrix<C64>>,
}

impl MeasurementSet {
    pub fn new(kind: DriveOrder, space: FockSpace) -> Result<Self> {
        space.require_single()?;
        let m = space.cutoff();
        let dense = match kind {
            DriveOrder::Tripling => {
                let p0 = e_theta_dense(PI / 3.0, m)?;
                (0..3)
                    .map(|j| {
                        DMatrix::from_fn(m, m, |k, kp| {
                            let phase = 2.0 * PI * (j as f64) * (k as f64 - kp as f64) / 3.0;
                            C64::from_polar(p0[(k, kp)], phase)
                        })
                    })
                    .collect()
            }
            DriveOrder::Doubling => {
                let p1 = e_theta_dense(PI / 2.0, m)?;
                // Parity conjugation flips the sign of odd-difference entries.
                let p0 = DMatrix::from_fn(m, m, |k, kp| {
                    let s = if (k + kp) % 2 == 0 { 1.0 } else { -1.0 };
                    C64::new(s * p1[(k, kp)], 0.0)
                });
                vec![p0, p1.map(|v| C64::new(v, 0.0))]
            }
        };
        Ok(Self { kind, space, dense })
    }

    pub fn kind(&self) -> DriveOrder {
        self.kind
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn n_sectors(&self) -> usize {
        self.dense.len()
    }

    pub fn dense(&self, j: usize) -> &DMatrix<C64> {
        &self.dense[j]
    }

    pub fn elements(&self) -> Vec<OperatorMatrix> {
        self.dense
            .iter()
            .map(|d| {
                OperatorMatrix::from_parts_unchecked(
                    self.space,
                    CsrMatrix::from_dense(d, 0.0),
                    true,
                )
            })
            .collect()
    }

    /// `max |sum_j P_j - I|` over all entries.
    pub fn completeness_defect(&self) -> f64 {
        let m = self.space.cutoff();
        let mut sum = DMatrix::<C64>::zeros(m, m);
        for d in &self.dense {
            sum += d;
        }
        (sum - DMatrix::<C64>::identity(m, m))
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over all sector operators.
    pub fn min_eigenvalue(&self) -> f64 {
        self.dense
            .iter()
            .map(|d| d.clone().symmetric_eigenvalues().min())
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn measurement_set(kind: DriveOrder, space: FockSpace) -> Result<MeasurementSet> {
    MeasurementSet::new(kind, space)
}

/// Probability table over all sector configurations, indexed
/// lexicographically with the first site most significant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigProbabilities {
    pub n_sites: usize,
    pub n_sectors: usize,
    pub probs: Vec<f64>,
}

impl ConfigProbabilities {
    pub fn index_of(&self, config: &[usize]) -> usize {
        config_index(config, self.n_sectors)
    }

    pub fn get(&self, config: &[usize]) -> f64 {
        self.probs[self.index_of(config)]
    }

    pub fn configs(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.probs.len()).map(|i| config_of(i, self.n_sites, self.n_sectors))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Table with `site` summed out.
    pub fn marginal(&self, site: usize) -> Result<Self> {
        if site >= self.n_sites {
            return Err(Error::SiteOutOfRange {
                site,
                n_sites: self.n_sites,
            });
        }
        if self.n_sites == 1 {
            return Err(Error::invalid("cannot marginalize the only site"));
        }
        let mut probs = vec![0.0; self.probs.len() / self.n_sectors];
        for (i, p) in self.probs.iter().enumerate() {
            let mut c = config_of(i, self.n_sites, self.n_sectors);
            c.remove(site);
            probs[config_index(&c, self.n_sectors)] += p;
        }
        Ok(Self {
            n_sites: self.n_sites - 1,
            n_sectors: self.n_sectors,
            probs,
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["config", "probability"])?;
        for (c, p) in self.configs().zip(&self.probs) {
            wtr.write_record([config_label(&c), format!("{p:.12e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn config_index(config: &[usize], n_sectors: usize) -> usize {
    config.iter().fold(0, |acc, &j| acc * n_sectors + j)
}

pub fn config_of(mut index: usize, n_sites: usize, n_sectors: usize) -> Vec<usize> {
    let mut c = vec![0; n_sites];
    for slot in c.iter_mut().rev() {
        *slot = index % n_sectors;
        index /= n_sectors;
    }
    c
}

pub fn config_label(config: &[usize]) -> String {
    config.iter().map(|j| char::from(b'0' + *j as u8)).collect()
}

/// Parses labels such as `"012"`.
pub fn parse_config(label: &str, n_sectors: usize) -> Result<Vec<usize>> {
    label
        .chars()
        .map(|c| {
            c.to_digit(10)
                .map(|d| d as usize)
                .filter(|&d| d < n_sectors)
                .ok_or_else(|| Error::invalid(format!("bad configuration label {label:?}")))
        })
        .collect()
}

/// `p_{j_1..j_N} = <psi| P_{j_1} x ... x P_{j_N} |psi>` for every configuration.
///
/// The sites are split in two halves `L | R` so that
/// `p_{ab} = <(A_a x 1) psi | (1 x B_b) psi>`, which needs only
/// `S^{N/2}` operator applications per side instead of `S^N`.
pub fn config_probabilities(
    state: &StateVector,
    set: &MeasurementSet,
    n_sites: usize,
) -> Result<ConfigProbabilities> {
    let space = state.space();
    if space.n_modes() != n_sites {
        return Err(Error::DimensionMismatch {
            expected: n_sites,
            found: space.n_modes(),
        });
    }
    if space.cutoff() != set.space.cutoff() {
        return Err(Error::DimensionMismatch {
            expected: set.space.cutoff(),
            found: space.cutoff(),
        });
    }
    let h = n_sites / 2;
    let left = branch(state.amplitudes(), set, 0..h, space);
    let right = branch(state.amplitudes(), set, h..n_sites, space);
    let probs = left
        .par_iter()
        .flat_map_iter(|x| {
            right
                .iter()
                .map(move |y| x.iter().zip(y).map(|(a, b)| a.conj() * b).sum::<C64>().re)
        })
        .collect();
    Ok(ConfigProbabilities {
        n_sites,
        n_sectors: set.n_sectors(),
        probs,
    })
}

/// All vectors `(x_{n in sites} P_{j_n}) psi`, configurations in
/// lexicographic order.
fn branch(
    psi: &[C64],
    set: &MeasurementSet,
    sites: std::ops::Range<usize>,
    space: FockSpace,
) -> Vec<Vec<C64>> {
    let mut level = vec![psi.to_vec()];
    for site in sites {
        level = level
            .par_iter()
            .flat_map_iter(|v| {
                (0..set.n_sectors()).map(move |j| apply_site(v, set.dense(j), site, space))
            })
            .collect();
    }
    level
}

fn apply_site(v: &[C64], op: &DMatrix<C64>, site: usize, space: FockSpace) -> Vec<C64> {
    let m = space.cutoff();
    let inner = m.pow((space.n_modes() - site - 1) as u32);
    let block = m * inner;
    let mut out = vec![C64::new(0.0, 0.0); v.len()];
    for (src, dst) in v.chunks_exact(block).zip(out.chunks_exact_mut(block)) {
        for k in 0..m {
            let row = &mut dst[k * inner..(k + 1) * inner];
            for kp in 0..m {
                let c = op[(k, kp)];
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                for (o, x) in row.iter_mut().zip(&src[kp * inner..(kp + 1) * inner]) {
                    *o += c * x;
                }
            }
        }
    }
    out
}
