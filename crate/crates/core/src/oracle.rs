//! Brute-force Fock-space matrices for verifying the tensor algebra.
//!
//! Operators are stored block-diagonally by particle number over bitstring
//! determinants (bit `p` set when spin orbital `p` is occupied). Everything
//! here is exact and dense, so it is limited to small systems.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{Complex, DMatrix};

use crate::downfold::Variant;
use crate::error::{Error, Result};
use crate::integrals::SpinOrbitalHamiltonian;
use crate::noq::{is_occupied, NormalOrderedOperator};

/// Largest number of spin orbitals the oracle accepts.
pub const MAX_ORACLE_SPIN_ORBITALS: usize = 12;

fn check_size(m: usize) -> Result<()> {
    if m > MAX_ORACLE_SPIN_ORBITALS {
        return Err(Error::unsupported(format!(
            "oracle limited to {MAX_ORACLE_SPIN_ORBITALS} spin orbitals, got {m}"
        )));
    }
    Ok(())
}

/// Bitstrings with `n` of the lowest `m` bits set, ascending.
pub fn sector_basis(m: usize, n: usize) -> Vec<u64> {
    (0u64..(1u64 << m)).filter(|s| s.count_ones() as usize == n).collect()
}

/// Elementary fermion operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ladder {
    pub orbital: usize,
    pub create: bool,
}

/// Apply `ops` (rightmost first) to a determinant; returns `(sign, result)`.
pub fn apply_string(ops: &[Ladder], det: u64) -> Option<(f64, u64)> {
    let mut state = det;
    let mut sign = 1.0;
    for op in ops.iter().rev() {
        let bit = 1u64 << op.orbital;
        let occupied = state & bit != 0;
        if occupied == op.create {
            return None;
        }
        if (state & (bit - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        state ^= bit;
    }
    Some((sign, state))
}

/// A dense operator restricted to one determinant basis.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    pub basis: Vec<u64>,
    pub matrix: DMatrix<f64>,
}

impl DenseOperator {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    /// Sub-matrix over the determinants accepted by `keep`.
    pub fn restrict(&self, keep: impl Fn(u64) -> bool) -> DenseOperator {
        let idx: Vec<usize> = (0..self.basis.len()).filter(|&i| keep(self.basis[i])).collect();
        let matrix = DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.matrix[(idx[r], idx[c])]);
        DenseOperator { basis: idx.iter().map(|&i| self.basis[i]).collect(), matrix }
    }

    /// Eigenvalues of the symmetrized matrix, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.basis.is_empty() {
            return Vec::new();
        }
        let sym = (&self.matrix + self.matrix.transpose()) * 0.5;
        let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn lowest_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Largest |M − Mᵀ| (or |M + Mᵀ| when `anti`).
    pub fn symmetry_error(&self, anti: bool) -> f64 {
        let s = if anti { -1.0 } else { 1.0 };
        let t = self.matrix.transpose();
        (&self.matrix - t * s).amax()
    }
}

/// Number-conserving operator on the full Fock space (or a set of sectors).
#[derive(Clone, Debug)]
pub struct FockOperator {
    pub m: usize,
    /// Sectors keyed by particle number.
    pub sectors: BTreeMap<usize, DenseOperator>,
}

impl FockOperator {
    fn zeros_like(&self) -> FockOperator {
        let sectors = self
            .sectors
            .iter()
            .map(|(&n, d)| (n, DenseOperator { basis: d.basis.clone(), matrix: DMatrix::zeros(d.dimension(), d.dimension()) }))
            .collect();
        FockOperator { m: self.m, sectors }
    }

    /// Build from a matrix-element routine applied to each basis determinant.
    fn from_action(m: usize, particle_numbers: &[usize], mut act: impl FnMut(u64, &mut dyn FnMut(u64, f64))) -> Self {
        let mut sectors = BTreeMap::new();
        for &n in particle_numbers {
            let basis = sector_basis(m, n);
            let index: HashMap<u64, usize> = basis.iter().enumerate().map(|(i, &d)| (d, i)).collect();
            let mut matrix = DMatrix::zeros(basis.len(), basis.len());
            for (col, &det) in basis.iter().enumerate() {
                act(det, &mut |out, val| {
                    let row = index[&out];
                    matrix[(row, col)] += val;
                });
            }
            sectors.insert(n, DenseOperator { basis, matrix });
        }
        FockOperator { m, sectors }
    }

    pub fn sector(&self, n: usize) -> &DenseOperator {
        &self.sectors[&n]
    }

    pub fn scaled(&self, c: f64) -> FockOperator {
        let mut out = self.clone();
        for d in out.sectors.values_mut() {
            d.matrix *= c;
        }
        out
    }

    pub fn add_scaled(&mut self, c: f64, other: &FockOperator) {
        for (n, d) in self.sectors.iter_mut() {
            d.matrix += &other.sectors[n].matrix * c;
        }
    }

    pub fn commutator(&self, other: &FockOperator) -> FockOperator {
        let mut out = self.clone();
        for (n, d) in out.sectors.iter_mut() {
            let b = &other.sectors[n].matrix;
            d.matrix = &self.sectors[n].matrix * b - b * &self.sectors[n].matrix;
        }
        out
    }

    /// Largest element-wise difference over all sectors.
    pub fn max_difference(&self, other: &FockOperator) -> f64 {
        self.sectors
            .iter()
            .map(|(n, d)| (&d.matrix - &other.sectors[n].matrix).amax())
            .fold(0.0, f64::max)
    }
}

/// Matrix of `scalar + Σ h a†p a_q + ¼ Σ v a†p a†q a_s a_r`.
pub fn materialize_physical(ham: &SpinOrbitalHamiltonian, particle_numbers: &[usize]) -> Result<FockOperator> {
    let m = ham.m;
    check_size(m)?;
    let mut one = Vec::new();
    for p in 0..m {
        for q in 0..m {
            if ham.h[[p, q]] != 0.0 {
                one.push((ham.h[[p, q]], [Ladder { orbital: p, create: true }, Ladder { orbital: q, create: false }]));
            }
        }
    }
    let mut two = Vec::new();
    for p in 0..m {
        for q in p + 1..m {
            for r in 0..m {
                for s in r + 1..m {
                    let v = ham.v[[p, q, r, s]];
                    if v != 0.0 {
                        two.push((
                            v,
                            [
                                Ladder { orbital: p, create: true },
                                Ladder { orbital: q, create: true },
                                Ladder { orbital: s, create: false },
                                Ladder { orbital: r, create: false },
                            ],
                        ));
                    }
                }
            }
        }
    }
    Ok(FockOperator::from_action(m, particle_numbers, |det, emit| {
        emit(det, ham.scalar);
        for (c, ops) in &one {
            if let Some((s, out)) = apply_string(ops, det) {
                emit(out, s * c);
            }
        }
        for (c, ops) in &two {
            if let Some((s, out)) = apply_string(ops, det) {
                emit(out, s * c);
            }
        }
    }))
}

/// Quasi-particle creator with respect to the reference: virtual creation or
/// occupied annihilation.
fn is_quasi_creator(op: Ladder, occupied: u64) -> bool {
    let occ = occupied & (1u64 << op.orbital) != 0;
    op.create != occ
}

/// Reorder a string into particle-hole normal order, returning the sign.
fn ph_normal_order(ops: &[Ladder], occupied: u64) -> (f64, Vec<Ladder>) {
    let mut order: Vec<usize> = (0..ops.len()).filter(|&i| is_quasi_creator(ops[i], occupied)).collect();
    order.extend((0..ops.len()).filter(|&i| !is_quasi_creator(ops[i], occupied)));
    let mut inversions = 0;
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            if order[i] > order[j] {
                inversions += 1;
            }
        }
    }
    let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
    (sign, order.iter().map(|&i| ops[i]).collect())
}

/// Matrix of a particle-hole normal-ordered operator.
pub fn materialize_normal_ordered(op: &NormalOrderedOperator, particle_numbers: &[usize]) -> Result<FockOperator> {
    let m = op.m();
    check_size(m)?;
    let classes = op.classes();
    let occupied: u64 = (0..m).filter(|&p| is_occupied(classes.class_of(p).0)).fold(0, |a, p| a | (1 << p));
    let mut strings: Vec<(f64, Vec<Ladder>)> = Vec::new();
    for k in 1..=op.rank() {
        for (key, block) in op.part(k).blocks() {
            let lists: Vec<&[usize]> = key.iter().map(|&c| classes.members(c)).collect();
            'element: for (idx, &c) in block.indexed_iter() {
                if c == 0.0 {
                    continue;
                }
                let orb: Vec<usize> = (0..2 * k).map(|a| lists[a][idx[a]]).collect();
                // One representative per index set: increasing within equal classes.
                for a in 1..2 * k {
                    if a != k && key[a] == key[a - 1] && orb[a] <= orb[a - 1] {
                        continue 'element;
                    }
                }
                let mut ops: Vec<Ladder> = orb[..k].iter().map(|&p| Ladder { orbital: p, create: true }).collect();
                ops.extend(orb[k..].iter().rev().map(|&q| Ladder { orbital: q, create: false }));
                let (sign, ordered) = ph_normal_order(&ops, occupied);
                strings.push((sign * c, ordered));
            }
        }
    }
    let scalar = op.scalar;
    Ok(FockOperator::from_action(m, particle_numbers, |det, emit| {
        emit(det, scalar);
        for (c, ops) in &strings {
            if let Some((s, out)) = apply_string(ops, det) {
                emit(out, s * c);
            }
        }
    }))
}

/// `exp(S)` for a real antisymmetric `S`, via the Hermitian matrix `iS`.
pub fn expm_antisymmetric(s: &DMatrix<f64>) -> DMatrix<f64> {
    let n = s.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let h = DMatrix::from_fn(n, n, |r, c| Complex::new(0.0, s[(r, c)]));
    let eig = h.symmetric_eigen();
    // S = -i (iS), so exp(S) = V exp(-iλ) V†.
    let v = &eig.eigenvectors;
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex::new(l.cos(), -l.sin())));
    let u = v * phases * v.adjoint();
    u.map(|z| z.re)
}

/// `e^{-σ} H e^{σ}` per sector.
pub fn exact_transform(h: &FockOperator, sigma: &FockOperator) -> FockOperator {
    let mut out = h.clone();
    for (n, d) in out.sectors.iter_mut() {
        let u = expm_antisymmetric(&sigma.sectors[n].matrix);
        d.matrix = u.transpose() * &h.sectors[n].matrix * u;
    }
    out
}

/// Truncated BCH series `Σ_{k≤depth} (1/k!) [..[H,σ],..,σ]`.
pub fn commutator_series(h: &FockOperator, sigma: &FockOperator, depth: usize) -> FockOperator {
    let mut out = h.clone();
    let mut term = h.clone();
    let mut fact = 1.0;
    for k in 1..=depth {
        term = term.commutator(sigma);
        fact *= k as f64;
        out.add_scaled(1.0 / fact, &term);
    }
    out
}

/// Canonical string for quasi-particle sets: creators ascending then
/// annihilators descending.
fn quasi_string(created: u64, annihilated: u64, occupied: u64) -> Vec<Ladder> {
    let mut ops = Vec::new();
    for p in 0..64 {
        if created & (1 << p) != 0 {
            ops.push(Ladder { orbital: p, create: occupied & (1 << p) == 0 });
        }
    }
    for p in (0..64).rev() {
        if annihilated & (1 << p) != 0 {
            ops.push(Ladder { orbital: p, create: occupied & (1 << p) != 0 });
        }
    }
    ops
}

fn subsets(mask: u64) -> impl Iterator<Item = u64> {
    // Non-empty submasks in decreasing order, then zero.
    let mut sub = mask;
    let mut done = false;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let cur = sub;
        if sub == 0 {
            done = true;
        } else {
            sub = (sub - 1) & mask;
        }
        Some(cur)
    })
}

/// Keep only the particle-hole rank ≤ `max_rank` part of an operator.
///
/// Every number-conserving operator has a unique expansion in normal-ordered
/// quasi-particle strings; the coefficients follow from the matrix elements
/// by inclusion–exclusion over spectator quasi-particles. All particle-number
/// sectors must be present.
pub fn truncate_ph_rank(op: &FockOperator, occupied: u64, max_rank: usize) -> Result<FockOperator> {
    let m = op.m;
    if op.sectors.len() != m + 1 {
        return Err(Error::domain("rank truncation needs every particle-number sector"));
    }
    // (quasi set of row, quasi set of column, matrix element), by total quasi count.
    let mut pairs: Vec<(u64, u64, f64)> = Vec::new();
    for d in op.sectors.values() {
        for (c, &dc) in d.basis.iter().enumerate() {
            for (r, &dr) in d.basis.iter().enumerate() {
                pairs.push((dr ^ occupied, dc ^ occupied, d.matrix[(r, c)]));
            }
        }
    }
    pairs.sort_by_key(|&(c, a, _)| (c.count_ones() + a.count_ones(), c, a));

    let element = |c: u64, a: u64, cs: u64, as_: u64| -> f64 {
        // ⟨D_c| N(cs, as_) |D_a⟩
        let ops = quasi_string(cs, as_, occupied);
        match apply_string(&ops, a ^ occupied) {
            Some((s, out)) if out == c ^ occupied => s,
            _ => 0.0,
        }
    };

    let mut omega: HashMap<(u64, u64), f64> = HashMap::new();
    for &(c, a, val) in &pairs {
        let mut rest = val;
        for s in subsets(c & a) {
            if s == 0 {
                break;
            }
            if let Some(&w) = omega.get(&(c & !s, a & !s)) {
                if w != 0.0 {
                    rest -= w * element(c, a, c & !s, a & !s);
                }
            }
        }
        let diag = element(c, a, c, a);
        omega.insert((c, a), rest / diag);
    }

    let mut out = op.zeros_like();
    let limit = 2 * max_rank as u32;
    for d in out.sectors.values_mut() {
        for (col, &dc) in d.basis.clone().iter().enumerate() {
            for (row, &dr) in d.basis.clone().iter().enumerate() {
                let (c, a) = (dr ^ occupied, dc ^ occupied);
                let mut acc = 0.0;
                for s in subsets(c & a) {
                    let (cs, as_) = (c & !s, a & !s);
                    if cs.count_ones() + as_.count_ones() > limit {
                        continue;
                    }
                    if let Some(&w) = omega.get(&(cs, as_)) {
                        if w != 0.0 {
                            acc += w * element(c, a, cs, as_);
                        }
                    }
                }
                d.matrix[(row, col)] = acc;
            }
        }
    }
    Ok(out)
}

/// Graded matrices: perturbative order → operator.
#[derive(Clone, Debug)]
struct Graded(BTreeMap<u32, FockOperator>);

impl Graded {
    fn commutator(&self, other: &Graded) -> Graded {
        let mut out: BTreeMap<u32, FockOperator> = BTreeMap::new();
        for (ga, a) in &self.0 {
            for (gb, b) in &other.0 {
                let c = a.commutator(b);
                match out.get_mut(&(ga + gb)) {
                    Some(x) => x.add_scaled(1.0, &c),
                    None => {
                        out.insert(ga + gb, c);
                    }
                }
            }
        }
        Graded(out)
    }

    fn sum(&self, max_order: Option<u32>) -> Option<FockOperator> {
        let mut out: Option<FockOperator> = None;
        for (g, op) in &self.0 {
            if max_order.is_some_and(|mo| *g > mo) {
                continue;
            }
            match out.as_mut() {
                Some(x) => x.add_scaled(1.0, op),
                None => out = Some(op.clone()),
            }
        }
        out
    }
}

/// Matrix form of a downfolded Hamiltonian variant over the full Fock space,
/// truncated to particle-hole rank 2 like the tensor path.
///
/// `sigma` must be given with its singles and doubles parts; the Fock and
/// interaction parts of `H` are graded from `ham` and the reference occupation.
pub fn downfolded_matrix(
    variant: Variant,
    ham: &SpinOrbitalHamiltonian,
    n_electrons: usize,
    sigma: &NormalOrderedOperator,
) -> Result<FockOperator> {
    let m = ham.m;
    check_size(m)?;
    let all: Vec<usize> = (0..=m).collect();
    let occupied: u64 = (1u64 << n_electrons) - 1;

    // Fock operator and normal-ordered pieces, built from the physical form.
    let mut fock = ham.h.clone();
    for p in 0..m {
        for q in 0..m {
            for i in 0..n_electrons {
                fock[[p, q]] += ham.v[[p, i, q, i]];
            }
        }
    }
    let classes = sigma.classes().clone();
    let diag = ndarray::Array2::from_shape_fn((m, m), |(p, q)| if p == q { fock[[p, q]] } else { 0.0 });
    let off = &fock - &diag;
    use crate::noq::Symmetry::Hermitian;
    let piece = |c1: Option<&ndarray::Array2<f64>>, c2: Option<&ndarray::Array4<f64>>| {
        materialize_normal_ordered(&NormalOrderedOperator::from_dense(classes.clone(), 0.0, c1, c2, Hermitian), &all)
    };
    let f_diag = piece(Some(&diag), None)?;
    let f_off = piece(Some(&off), None)?;
    let v_n = piece(None, Some(&ham.v))?;
    let s_sym = sigma.symmetry;
    let s1 = materialize_normal_ordered(&NormalOrderedOperator::from_dense(classes.clone(), 0.0, Some(&sigma.c1()), None, s_sym), &all)?;
    let s2 = materialize_normal_ordered(&NormalOrderedOperator::from_dense(classes, 0.0, None, Some(&sigma.c2()), s_sym), &all)?;

    let mut h_one = f_off.clone();
    h_one.add_scaled(1.0, &v_n);
    let h_n = Graded(BTreeMap::from([(0, f_diag.clone()), (1, h_one)]));
    let f_n = Graded(BTreeMap::from([(0, f_diag), (1, f_off)]));
    let sig = Graded(BTreeMap::from([(1, s2), (2, s1)]));

    let mut total = materialize_physical(ham, &all)?;
    let mut add = |g: &Graded, coeff: f64, order: Option<u32>| {
        if let Some(x) = g.sum(order) {
            total.add_scaled(coeff, &x);
        }
    };
    let single = || h_n.commutator(&sig);
    let double_f = || f_n.commutator(&sig).commutator(&sig);
    match variant {
        Variant::A1 => {}
        Variant::A2 => {
            add(&single(), 1.0, Some(2));
            add(&double_f(), 0.5, Some(2));
        }
        Variant::A3 => add(&single(), 1.0, None),
        Variant::A4 => {
            add(&single(), 1.0, None);
            add(&double_f(), 0.5, None);
        }
        Variant::A5 | Variant::A6 | Variant::A7 => {
            let order = if variant == Variant::A5 { Some(3) } else { None };
            let s = single();
            add(&s, 1.0, order);
            add(&s.commutator(&sig), 0.5, order);
            if variant != Variant::A6 {
                add(&double_f().commutator(&sig), 1.0 / 6.0, order);
            }
        }
    }
    truncate_ph_rank(&total, occupied, 2)
}
