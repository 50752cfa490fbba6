//! Global rotation, translation and reversal symmetries of oscillator
//! arrays, their generated group, configuration orbits and the totally
//! symmetric sector.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{FockSpace, OperatorMatrix, StateVector, C64};
use crate::sparse::CsrMatrix;

const PHASE_TOL: f64 = 1e-9;

/// Operator that maps each basis state to a single basis state times a
/// phase: `(U psi)[perm[i]] = phase[i] psi[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialOp {
    perm: Vec<u32>,
    phase: Vec<C64>,
}

impl MonomialOp {
    pub fn identity(dim: usize) -> Self {
        Self {
            perm: (0..dim as u32).collect(),
            phase: vec![C64::new(1.0, 0.0); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// `other * self`, i.e. apply `self` first.
    pub fn then(&self, other: &Self) -> Self {
        let perm = self.perm.iter().map(|&p| other.perm[p as usize]).collect();
        let phase = self
            .perm
            .iter()
            .zip(&self.phase)
            .map(|(&p, ph)| other.phase[p as usize] * ph)
            .collect();
        Self { perm, phase }
    }

    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); psi.len()];
        for ((&p, ph), x) in self.perm.iter().zip(&self.phase).zip(psi) {
            out[p as usize] = ph * x;
        }
        out
    }

    fn approx_eq(&self, other: &Self) -> bool {
        self.perm == other.perm
            && self
                .phase
                .iter()
                .zip(&other.phase)
                .all(|(a, b)| (a - b).norm() <= PHASE_TOL)
    }

    pub fn to_matrix(&self) -> CsrMatrix<C64> {
        let n = self.dim();
        CsrMatrix::from_triplets(
            n,
            n,
            self.perm
                .iter()
                .zip(&self.phase)
                .enumerate()
                .map(|(i, (&p, &ph))| (p as usize, i, ph))
                .collect(),
        )
    }

    /// `max |U H U^dag - H|` relative to `max |H|`.
    pub fn commutation_defect(&self, h: &CsrMatrix<f64>) -> f64 {
        let scale = h.max_abs().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for (i, j, v) in h.triplets() {
            let conj = self.phase[i] * v * self.phase[j].conj();
            let target = h.get(self.perm[i] as usize, self.perm[j] as usize);
            worst = worst.max((conj - target).norm());
        }
        worst / scale
    }
}

/// One group element: rotation power and site permutation together with
/// its Hilbert-space representation.
#[derive(Clone, Debug)]
pub struct GroupElement {
    /// Number of applications of the global rotation.
    pub rotation: usize,
    /// `new_occupation[i] = old_occupation[sites[i]]`.
    pub sites: Vec<usize>,
    pub op: MonomialOp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Rotation,
    Translation,
    Reversal,
}

/// Generator operators of the array symmetries and the group they close
/// into.
#[derive(Clone, Debug)]
pub struct SymmetryGenerators {
    space: FockSpace,
    rotation_order: usize,
    included: Vec<Generator>,
    elements: Vec<GroupElement>,
}

fn rotation_element(space: FockSpace, order: usize) -> GroupElement {
    let dim = space.dim();
    let n = space.n_modes();
    let phase = (0..dim)
        .map(|i| {
            let ntot: usize = space.occupations(i).iter().sum();
            C64::from_polar(1.0, -2.0 * PI * (ntot % order) as f64 / order as f64)
        })
        .collect();
    GroupElement {
        rotation: 1,
        sites: (0..n).collect(),
        op: MonomialOp {
            perm: (0..dim as u32).collect(),
            phase,
        },
    }
}

fn site_element(space: FockSpace, sites: Vec<usize>) -> GroupElement {
    let dim = space.dim();
    let perm = (0..dim)
        .map(|i| {
            let occ = space.occupations(i);
            let new: Vec<usize> = sites.iter().map(|&s| occ[s]).collect();
            space
                .index_of(&new)
                .expect("permuted occupations stay in range") as u32
        })
        .collect();
    GroupElement {
        rotation: 0,
        sites,
        op: MonomialOp {
            perm,
            phase: vec![C64::new(1.0, 0.0); dim],
        },
    }
}

fn generator_element(space: FockSpace, order: usize, g: Generator) -> GroupElement {
    let n = space.n_modes();
    match g {
        Generator::Rotation => rotation_element(space, order),
        Generator::Translation => site_element(space, (0..n).map(|i| (i + n - 1) % n).collect()),
        Generator::Reversal => site_element(space, (0..n).map(|i| n - 1 - i).collect()),
    }
}

fn compose(a: &GroupElement, b: &GroupElement, order: usize) -> GroupElement {
    GroupElement {
        rotation: (a.rotation + b.rotation) % order,
        sites: b.sites.iter().map(|&s| a.sites[s]).collect(),
        op: a.op.then(&b.op),
    }
}

/// Breadth-first closure over words in the generators, deduplicating by
/// the basis permutation and then by phases to 1e-9.
fn close_group(space: FockSpace, order: usize, gens: &[GroupElement]) -> Result<Vec<GroupElement>> {
    let n = space.n_modes();
    let limit = 6 * n * 9;
    let identity = GroupElement {
        rotation: 0,
        sites: (0..n).collect(),
        op: MonomialOp::identity(space.dim()),
    };
    let mut elements = vec![identity];
    let mut by_perm: HashMap<Vec<u32>, Vec<usize>> = HashMap::new();
    by_perm
        .entry(elements[0].op.perm.clone())
        .or_default()
        .push(0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(idx) = queue.pop_front() {
        for g in gens {
            let cand = compose(&elements[idx], g, order);
            let bucket = by_perm.entry(cand.op.perm.clone()).or_default();
            if bucket.iter().any(|&k| elements[k].op.approx_eq(&cand.op)) {
                continue;
            }
            bucket.push(elements.len());
            queue.push_back(elements.len());
            elements.push(cand);
            if elements.len() > limit {
                return Err(Error::convergence(
                    "symmetry group closure",
                    format!("more than {limit} elements"),
                ));
            }
        }
    }
    Ok(elements)
}

impl SymmetryGenerators {
    pub fn new(space: FockSpace, rotation_order: usize, included: &[Generator]) -> Result<Self> {
        if rotation_order < 2 {
            return Err(Error::invalid("rotation order must be >= 2"));
        }
        let mut included: Vec<Generator> = included.to_vec();
        included.sort_by_key(|g| *g as u8);
        included.dedup();
        let gens: Vec<GroupElement> = included
            .iter()
            .map(|&g| generator_element(space, rotation_order, g))
            .collect();
        let elements = close_group(space, rotation_order, &gens)?;
        Ok(Self {
            space,
            rotation_order,
            included,
            elements,
        })
    }

    /// Keeps only the generators that commute with `h` (relative defect
    /// below 1e-10).
    pub fn for_hamiltonian(
        space: FockSpace,
        rotation_order: usize,
        h: &CsrMatrix<f64>,
    ) -> Result<Self> {
        let mut keep = Vec::new();
        for g in [
            Generator::Rotation,
            Generator::Translation,
            Generator::Reversal,
        ] {
            if generator_element(space, rotation_order, g)
                .op
                .commutation_defect(h)
                <= 1e-10
            {
                keep.push(g);
            }
        }
        Self::new(space, rotation_order, &keep)
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn rotation_order(&self) -> usize {
        self.rotation_order
    }

    pub fn included(&self) -> &[Generator] {
        &self.included
    }

    pub fn group_order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    fn operator(&self, g: Generator) -> OperatorMatrix {
        let el = generator_element(self.space, self.rotation_order, g);
        OperatorMatrix::from_parts_unchecked(self.space, el.op.to_matrix(), false)
    }

    /// Global rotation `exp(-2 pi i n_tot / p)`.
    pub fn n3(&self) -> OperatorMatrix {
        self.operator(Generator::Rotation)
    }

    /// Cyclic site shift `|n_0, n_1, ...> -> |n_{N-1}, n_0, ...>`.
    pub fn translate(&self) -> OperatorMatrix {
        self.operator(Generator::Translation)
    }

    pub fn reverse(&self) -> OperatorMatrix {
        self.operator(Generator::Reversal)
    }

    /// `<psi| P_sym |psi>` without forming the projector.
    pub fn symmetric_weight(&self, psi: &[C64]) -> f64 {
        let total: C64 = self
            .elements
            .iter()
            .map(|g| {
                psi.iter()
                    .zip(g.op.perm.iter().zip(&g.op.phase))
                    .map(|(x, (&p, ph))| psi[p as usize].conj() * ph * x)
                    .sum::<C64>()
            })
            .sum();
        total.re / self.elements.len() as f64
    }

    /// Orbit of a sector configuration under the group: sector labels shift
    /// by the rotation power, positions follow the site permutation.
    pub fn config_orbit(&self, config: &[usize], n_sectors: usize) -> ConfigOrbit {
        let members: BTreeSet<Vec<usize>> = self
            .elements
            .iter()
            .map(|g| act_on_config(config, g.rotation, &g.sites, n_sectors))
            .collect();
        ConfigOrbit::from_members(members)
    }

    pub fn all_orbits(&self, n_sites: usize, n_sectors: usize) -> Vec<ConfigOrbit> {
        partition_orbits(n_sites, n_sectors, |c| self.config_orbit(c, n_sectors))
    }
}

pub fn build_generators(n_sites: usize, space: FockSpace) -> Result<SymmetryGenerators> {
    if space.n_modes() != n_sites {
        return Err(Error::DimensionMismatch {
            expected: n_sites,
            found: space.n_modes(),
        });
    }
    SymmetryGenerators::new(
        space,
        3,
        &[
            Generator::Rotation,
            Generator::Translation,
            Generator::Reversal,
        ],
    )
}

fn act_on_config(
    config: &[usize],
    rotation: usize,
    sites: &[usize],
    n_sectors: usize,
) -> Vec<usize> {
    sites
        .iter()
        .map(|&s| (config[s] + n_sectors * rotation - rotation) % n_sectors)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfigOrbit {
    /// Lexicographically smallest member.
    pub representative: Vec<usize>,
    pub members: BTreeSet<Vec<usize>>,
}

impl ConfigOrbit {
    fn from_members(members: BTreeSet<Vec<usize>>) -> Self {
        let representative = members.iter().next().cloned().unwrap_or_default();
        Self {
            representative,
            members,
        }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, config: &[usize]) -> bool {
        self.members.contains(config)
    }
}

/// Orbit under label rotation, cyclic translation and reversal, all
/// applied to the configuration labels only.
pub fn config_orbit(config: &[usize], n_sites: usize) -> Result<ConfigOrbit> {
    config_orbit_mod(config, n_sites, 3)
}

pub fn config_orbit_mod(config: &[usize], n_sites: usize, n_sectors: usize) -> Result<ConfigOrbit> {
    if config.len() != n_sites {
        return Err(Error::DimensionMismatch {
            expected: n_sites,
            found: config.len(),
        });
    }
    if let Some(&j) = config.iter().find(|&&j| j >= n_sectors) {
        return Err(Error::invalid(format!("sector label {j} out of range")));
    }
    let n = n_sites;
    let shift: Vec<usize> = (0..n).map(|i| (i + n - 1) % n).collect();
    let rev: Vec<usize> = (0..n).map(|i| n - 1 - i).collect();
    let ident: Vec<usize> = (0..n).collect();
    let moves: [(usize, &[usize]); 3] = [(1, &ident), (0, &shift), (0, &rev)];
    let mut seen = BTreeSet::from([config.to_vec()]);
    let mut queue = VecDeque::from([config.to_vec()]);
    while let Some(c) = queue.pop_front() {
        for (rot, sites) in moves {
            let next = act_on_config(&c, rot, sites, n_sectors);
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    Ok(ConfigOrbit::from_members(seen))
}

/// Disjoint orbits covering all `S^N` configurations, sorted by
/// representative.
pub fn all_orbits(n_sites: usize, n_sectors: usize) -> Vec<ConfigOrbit> {
    partition_orbits(n_sites, n_sectors, |c| {
        config_orbit_mod(c, n_sites, n_sectors).expect("labels in range")
    })
}

fn partition_orbits(
    n_sites: usize,
    n_sectors: usize,
    orbit_of: impl Fn(&[usize]) -> ConfigOrbit,
) -> Vec<ConfigOrbit> {
    let total = n_sectors.pow(n_sites as u32);
    let mut assigned = vec![false; total];
    let mut out = Vec::new();
    for idx in 0..total {
        if assigned[idx] {
            continue;
        }
        let c = crate::povm::config_of(idx, n_sites, n_sectors);
        let orbit = orbit_of(&c);
        for m in &orbit.members {
            assigned[crate::povm::config_index(m, n_sectors)] = true;
        }
        out.push(orbit);
    }
    out
}

/// `P_sym = (1/|G|) sum_g U_g`.
pub fn symmetric_projector(generators: &SymmetryGenerators) -> Result<OperatorMatrix> {
    let space = generators.space;
    let dim = space.dim();
    let w = 1.0 / generators.group_order() as f64;
    let mut trip = Vec::with_capacity(dim * generators.group_order());
    for g in &generators.elements {
        for (i, (&p, ph)) in g.op.perm.iter().zip(&g.op.phase).enumerate() {
            trip.push((p as usize, i, ph * w));
        }
    }
    let mut m = CsrMatrix::from_triplets(dim, dim, trip);
    m.prune(1e-14);
    Ok(OperatorMatrix::from_parts_unchecked(space, m, true))
}

/// `||P_sym psi||^2`.
pub fn symmetric_weight(state: &StateVector, projector: &OperatorMatrix) -> Result<f64> {
    let projected = projector.apply(state)?;
    Ok(projected.amplitudes().iter().map(|a| a.norm_sqr()).sum())
}

/// Orthonormal basis of the totally symmetric subspace, one vector per
/// orbit of basis states whose projection survives.
#[derive(Clone, Debug)]
pub struct SymmetricSector {
    space: FockSpace,
    /// Full-space indices and coefficients of each basis vector.
    vectors: Vec<Vec<(usize, C64)>>,
    /// For each full-space index: `(sector index, coefficient)`.
    lookup: Vec<Option<(u32, C64)>>,
}

impl SymmetricSector {
    pub fn new(generators: &SymmetryGenerators) -> Self {
        let space = generators.space;
        let dim = space.dim();
        let g = generators.group_order() as f64;
        let mut lookup: Vec<Option<(u32, C64)>> = vec![None; dim];
        let mut visited = vec![false; dim];
        let mut vectors = Vec::new();
        for s0 in 0..dim {
            if visited[s0] {
                continue;
            }
            let mut acc: HashMap<usize, C64> = HashMap::new();
            for el in &generators.elements {
                let p = el.op.perm[s0] as usize;
                visited[p] = true;
                *acc.entry(p).or_default() += el.op.phase[s0] / g;
            }
            let norm = acc.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-10 {
                continue;
            }
            let mut v: Vec<(usize, C64)> = acc.into_iter().map(|(i, c)| (i, c / norm)).collect();
            v.sort_by_key(|e| e.0);
            let k = vectors.len() as u32;
            for &(i, c) in &v {
                lookup[i] = Some((k, c));
            }
            vectors.push(v);
        }
        Self {
            space,
            vectors,
            lookup,
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    /// Index of the sector vector containing a basis state.
    pub fn sector_of(&self, full_index: usize) -> Option<usize> {
        self.lookup[full_index].map(|(k, _)| k as usize)
    }

    /// `<v_a| A |v_b>` for an operator that commutes with the group. Uses
    /// `<v_a|A|v_b> = <s_a|A|v_b> / <s_a|v_a>` for one member `s_a` of `v_a`.
    pub fn project(&self, a: &CsrMatrix<f64>) -> Result<CsrMatrix<f64>> {
        let n = self.dim();
        let mut trip = Vec::new();
        for (ka, va) in self.vectors.iter().enumerate() {
            let (s, ca) = va[0];
            let mut row: HashMap<usize, C64> = HashMap::new();
            for (col, v) in a.row(s) {
                if let Some((kb, cb)) = self.lookup[col] {
                    *row.entry(kb as usize).or_default() += cb * v;
                }
            }
            for (kb, v) in row {
                let val = v / ca.conj();
                if val.im.abs() > 1e-12 * val.norm().max(1.0) {
                    return Err(Error::Unsupported(
                        "symmetric-sector matrix element is complex".into(),
                    ));
                }
                trip.push((ka, kb, val.re));
            }
        }
        let mut m = CsrMatrix::from_triplets(n, n, trip);
        m.prune(1e-14);
        Ok(m)
    }

    pub fn project_diagonal(&self, diag: &[f64]) -> Vec<f64> {
        self.vectors.iter().map(|v| diag[v[0].0]).collect()
    }

    /// Sector coordinates of a full-space vector.
    pub fn restrict(&self, psi: &[C64]) -> Vec<C64> {
        self.vectors
            .iter()
            .map(|v| v.iter().map(|&(i, c)| c.conj() * psi[i]).sum())
            .collect()
    }

    pub fn embed(&self, coeffs: &[C64]) -> Result<StateVector> {
        if coeffs.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: coeffs.len(),
            });
        }
        let mut amps = vec![C64::new(0.0, 0.0); self.space.dim()];
        for (v, &x) in self.vectors.iter().zip(coeffs) {
            for &(i, c) in v {
                amps[i] += c * x;
            }
        }
        StateVector::new(self.space, amps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        build_array_hamiltonian, ArrayConfig, DriveOrder, HamiltonianParts, OscillatorParams,
    };
    use approx::assert_abs_diff_eq;

    fn op_eq(a: &OperatorMatrix, b: &OperatorMatrix) -> f64 {
        a.matrix().max_abs_diff(b.matrix())
    }

    #[test]
    fn generator_examples() {
        let space = FockSpace::new(3, 3).unwrap();
        let gens = build_generators(3, space).unwrap();
        let vac = StateVector::vacuum(space);
        let rotated = gens.n3().apply(&vac).unwrap();
        assert!((rotated.inner(&vac).unwrap().re - 1.0).abs() < 1e-15);
        let s = StateVector::basis(space, &[0, 1, 0]).unwrap();
        let t = gens.translate().apply(&s).unwrap();
        let want = StateVector::basis(space, &[0, 0, 1]).unwrap();
        assert_abs_diff_eq!(t.inner(&want).unwrap().re, 1.0, epsilon = 1e-15);
        assert!(build_generators(2, space).is_err());
    }

    #[test]
    fn generator_orders_and_unitarity() {
        let space = FockSpace::new(4, 3).unwrap();
        let g = build_generators(3, space).unwrap();
        let id = OperatorMatrix::identity(space);
        let pow = |op: &OperatorMatrix, k: usize| {
            (1..k).fold(op.clone(), |acc, _| acc.matmul(op).unwrap())
        };
        assert!(op_eq(&pow(&g.n3(), 3), &id) < 1e-10);
        assert!(op_eq(&pow(&g.translate(), 3), &id) < 1e-10);
        assert!(op_eq(&pow(&g.reverse(), 2), &id) < 1e-10);
        for op in [g.n3(), g.translate(), g.reverse()] {
            assert!(op_eq(&op.adjoint().matmul(&op).unwrap(), &id) < 1e-10);
        }
    }

    #[test]
    fn ring_group_order() {
        let space = FockSpace::new(3, 3).unwrap();
        assert_eq!(build_generators(3, space).unwrap().group_order(), 18);
        let space4 = FockSpace::new(3, 4).unwrap();
        assert_eq!(build_generators(4, space4).unwrap().group_order(), 24);
    }

    #[test]
    fn hamiltonian_commutes_with_ring_symmetries() {
        let space = FockSpace::new(6, 3).unwrap();
        let p = OscillatorParams::tripling(0.3, 1.4);
        let cfg = ArrayConfig::ring(3, -0.4).unwrap();
        let h = build_array_hamiltonian(&p, &cfg, space).unwrap();
        let g = build_generators(3, space).unwrap();
        for u in [g.n3(), g.translate(), g.reverse()] {
            let c = h.commutator(&u).unwrap();
            assert!(c.max_abs() <= 1e-10);
        }
    }

    #[test]
    fn frustrated_triangle_drops_translation() {
        let space = FockSpace::new(5, 3).unwrap();
        let cfg = ArrayConfig::frustrated_triangle(0.4).unwrap();
        let parts = HamiltonianParts::new(&cfg, DriveOrder::Tripling, space).unwrap();
        let h = parts.assemble(&OscillatorParams::tripling(0.0, 1.4));
        let g = SymmetryGenerators::for_hamiltonian(space, 3, &h).unwrap();
        assert_eq!(g.included(), [Generator::Rotation, Generator::Reversal]);
        assert_eq!(g.group_order(), 6);
    }

    #[test]
    fn orbit_examples() {
        let o = config_orbit(&[0, 0, 0], 3).unwrap();
        assert_eq!(o.size(), 3);
        assert!(o.contains(&[2, 2, 2]));
        assert_eq!(config_orbit(&[0, 1, 2], 3).unwrap().size(), 6);
        let o001 = config_orbit(&[0, 0, 1], 3).unwrap();
        assert_eq!(o001.size(), 9);
        assert!(!o001.contains(&[0, 0, 2]));
        assert_eq!(
            config_orbit(&[0, 0, 2], 3).unwrap().representative,
            vec![0, 0, 2]
        );
    }

    #[test]
    fn orbits_partition_configurations() {
        for n in 1..=4 {
            let orbits = all_orbits(n, 3);
            let total: usize = orbits.iter().map(ConfigOrbit::size).sum();
            assert_eq!(total, 3usize.pow(n as u32));
            let mut seen = BTreeSet::new();
            for o in &orbits {
                for m in &o.members {
                    assert!(seen.insert(m.clone()));
                }
            }
        }
        let reps: Vec<String> = all_orbits(4, 3)
            .iter()
            .map(|o| crate::povm::config_label(&o.representative))
            .collect();
        assert!(reps.contains(&"0101".to_string()) && reps.contains(&"0102".to_string()));
    }

    #[test]
    fn group_orbits_match_label_orbits_on_rings() {
        let space = FockSpace::new(2, 4).unwrap();
        let g = build_generators(4, space).unwrap();
        assert_eq!(g.all_orbits(4, 3), all_orbits(4, 3));
    }

    #[test]
    fn projector_properties() {
        let space = FockSpace::new(4, 3).unwrap();
        let g = build_generators(3, space).unwrap();
        let p = symmetric_projector(&g).unwrap();
        assert!(op_eq(&p.matmul(&p).unwrap(), &p) < 1e-10);
        assert!(p.matrix().hermiticity_defect() < 1e-12);
        let vac = StateVector::vacuum(space);
        assert_abs_diff_eq!(symmetric_weight(&vac, &p).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g.symmetric_weight(vac.amplitudes()), 1.0, epsilon = 1e-14);
        // Antisymmetric under reversal.
        let a = StateVector::basis(space, &[3, 0, 0]).unwrap();
        let b = StateVector::basis(space, &[0, 0, 3]).unwrap();
        let amps: Vec<C64> = a
            .amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| (x - y) / 2f64.sqrt())
            .collect();
        let anti = StateVector::new(space, amps).unwrap();
        assert_abs_diff_eq!(symmetric_weight(&anti, &p).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn sector_projection_matches_full_hamiltonian() {
        let space = FockSpace::new(6, 3).unwrap();
        let cfg = ArrayConfig::ring(3, 0.4).unwrap();
        let parts = HamiltonianParts::new(&cfg, DriveOrder::Tripling, space).unwrap();
        let h = parts.assemble(&OscillatorParams::tripling(0.7, 1.1));
        let g = build_generators(3, space).unwrap();
        let sector = SymmetricSector::new(&g);
        // Rank of the projector.
        let p = symmetric_projector(&g).unwrap();
        let trace: f64 = p.matrix().diagonal().iter().map(|c| c.re).sum();
        assert_abs_diff_eq!(trace, sector.dim() as f64, epsilon = 1e-9);
        let hs = sector.project(&h).unwrap();
        assert!(hs.hermiticity_defect() < 1e-12);
        // <v_a|H|v_b> via embedding.
        for a in 0..sector.dim().min(8) {
            let mut ea = vec![C64::new(0.0, 0.0); sector.dim()];
            ea[a] = C64::new(1.0, 0.0);
            let va = sector.embed(&ea).unwrap();
            let hva = h.matvec(va.amplitudes());
            let back = sector.restrict(&hva);
            for (b, x) in back.iter().enumerate() {
                assert!((x.re - hs.get(b, a)).abs() < 1e-12 && x.im.abs() < 1e-12);
            }
            // H v_a stays in the sector.
            let in_sector: f64 = back.iter().map(|c| c.norm_sqr()).sum();
            let total: f64 = hva.iter().map(|c| c.norm_sqr()).sum();
            assert_abs_diff_eq!(in_sector, total, epsilon = 1e-10 * total.max(1.0));
        }
    }
}
