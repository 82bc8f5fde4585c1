use std::fmt::Write as _;
use std::sync::Arc;

use ndarray::{Array2, Array4, ArrayD, Ix2, Ix4};

use super::block::BlockTensor;
use super::classes::OrbitalClasses;
use super::wick::{apply_pattern, contraction_patterns, Accumulator, MAX_RANK};
use crate::error::{Error, Result};
use crate::integrals::SpinOrbitalHamiltonian;
use crate::reference::ReferenceFrame;

/// Adjoint behaviour of an operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Symmetry {
    Hermitian,
    AntiHermitian,
    General,
}

impl Symmetry {
    /// Symmetry of `[A, B]`.
    pub fn commutator(a: Symmetry, b: Symmetry) -> Symmetry {
        use Symmetry::*;
        match (a, b) {
            (Hermitian, AntiHermitian) | (AntiHermitian, Hermitian) => Hermitian,
            (Hermitian, Hermitian) | (AntiHermitian, AntiHermitian) => AntiHermitian,
            _ => General,
        }
    }
}

/// Particle-hole normal-ordered operator `scalar + Σ_k (1/k!²) Σ c_k {…}` with
/// parts of rank 1 to 3.
#[derive(Clone, Debug)]
pub struct NormalOrderedOperator {
    classes: Arc<OrbitalClasses>,
    pub scalar: f64,
    parts: Vec<BlockTensor>,
    pub symmetry: Symmetry,
}

impl NormalOrderedOperator {
    pub fn zero(classes: Arc<OrbitalClasses>, symmetry: Symmetry) -> Self {
        NormalOrderedOperator {
            classes,
            scalar: 0.0,
            parts: (1..=MAX_RANK).map(BlockTensor::new).collect(),
            symmetry,
        }
    }

    /// Operator from dense coefficient tensors (antisymmetric for rank ≥ 2).
    pub fn from_dense(
        classes: Arc<OrbitalClasses>,
        scalar: f64,
        c1: Option<&Array2<f64>>,
        c2: Option<&Array4<f64>>,
        symmetry: Symmetry,
    ) -> Self {
        let mut op = Self::zero(classes, symmetry);
        op.scalar = scalar;
        if let Some(c1) = c1 {
            op.parts[0] = BlockTensor::from_dense(&c1.view().into_dyn(), &op.classes);
        }
        if let Some(c2) = c2 {
            op.parts[1] = BlockTensor::from_dense(&c2.view().into_dyn(), &op.classes);
        }
        op
    }

    /// Operator with a rank-3 part given densely (used by tests).
    pub fn with_rank3(mut self, c3: &ArrayD<f64>) -> Self {
        self.parts[2] = BlockTensor::from_dense(&c3.view(), &self.classes);
        self
    }

    pub fn classes(&self) -> &Arc<OrbitalClasses> {
        &self.classes
    }

    pub fn m(&self) -> usize {
        self.classes.m()
    }

    pub fn part(&self, rank: usize) -> &BlockTensor {
        &self.parts[rank - 1]
    }

    /// Highest rank with a nonzero part (0 for a pure scalar).
    pub fn rank(&self) -> usize {
        (1..=MAX_RANK).rev().find(|&k| !self.parts[k - 1].is_empty()).unwrap_or(0)
    }

    pub fn c1(&self) -> Array2<f64> {
        self.parts[0].to_dense(&self.classes).into_dimensionality::<Ix2>().expect("rank-1 part")
    }

    pub fn c2(&self) -> Array4<f64> {
        self.parts[1].to_dense(&self.classes).into_dimensionality::<Ix4>().expect("rank-2 part")
    }

    pub fn c3(&self) -> Option<ArrayD<f64>> {
        if self.parts[2].is_empty() {
            None
        } else {
            Some(self.parts[2].to_dense(&self.classes))
        }
    }

    /// Drop parts above `max_rank`.
    pub fn truncated(&self, max_rank: usize) -> Self {
        let mut out = self.clone();
        for k in max_rank + 1..=MAX_RANK {
            out.parts[k - 1] = BlockTensor::new(k);
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let symmetry = self.symmetry;
        NormalOrderedOperator {
            classes: self.classes.clone(),
            scalar: self.scalar,
            parts: self.parts.iter().map(BlockTensor::adjoint).collect(),
            symmetry,
        }
    }

    pub fn scaled(&self, coeff: f64) -> Self {
        let mut out = self.clone();
        out.scalar *= coeff;
        for p in &mut out.parts {
            p.scale(coeff);
        }
        out
    }

    /// `self += coeff * other`; the symmetry flag is kept only if both agree.
    pub fn add_scaled(&mut self, coeff: f64, other: &NormalOrderedOperator) -> Result<()> {
        if self.classes != other.classes {
            return Err(Error::domain("operators act on different orbital partitions"));
        }
        self.scalar += coeff * other.scalar;
        for (p, q) in self.parts.iter_mut().zip(&other.parts) {
            p.add_scaled(coeff, q);
        }
        if self.symmetry != other.symmetry {
            self.symmetry = Symmetry::General;
        }
        Ok(())
    }

    /// Largest deviation from the declared (anti-)Hermiticity.
    pub fn symmetry_error(&self) -> f64 {
        let sign = match self.symmetry {
            Symmetry::Hermitian => 1.0,
            Symmetry::AntiHermitian => -1.0,
            Symmetry::General => return 0.0,
        };
        let scalar_err = if sign < 0.0 { self.scalar.abs() } else { 0.0 };
        self.parts
            .iter()
            .map(|p| p.max_difference(&p.adjoint(), sign))
            .fold(scalar_err, f64::max)
    }

    /// Text dump: one `rank i j … coefficient` line per stored element with
    /// canonical (class-sorted) index order. Indices are spin orbitals.
    pub fn dump(&self, tol: f64) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "0 {:.17e}", self.scalar);
        for part in &self.parts {
            let k = part.rank();
            for (key, block) in part.blocks() {
                let lists: Vec<&[usize]> = key.iter().map(|&c| self.classes.members(c)).collect();
                for (idx, &v) in block.indexed_iter() {
                    if v.abs() <= tol {
                        continue;
                    }
                    let _ = write!(out, "{k}");
                    for a in 0..2 * k {
                        let _ = write!(out, " {}", lists[a][idx[a]]);
                    }
                    let _ = writeln!(out, " {v:.17e}");
                }
            }
        }
        out
    }
}

/// Normal-order `H` with respect to the reference: scalar `e_ref`, rank 1 the
/// Fock matrix, rank 2 the antisymmetrized integrals.
pub fn normal_order(ham: &SpinOrbitalHamiltonian, reference: &ReferenceFrame) -> NormalOrderedOperator {
    let classes = Arc::new(OrbitalClasses::from_reference(reference));
    NormalOrderedOperator::from_dense(
        classes,
        reference.e_ref,
        Some(&reference.fock),
        Some(&ham.v),
        Symmetry::Hermitian,
    )
}

/// `[A, B]` in normal-ordered form, keeping parts up to `max_rank`.
pub fn commutator(
    a: &NormalOrderedOperator,
    b: &NormalOrderedOperator,
    max_rank: usize,
) -> Result<NormalOrderedOperator> {
    if max_rank > MAX_RANK {
        return Err(Error::unsupported(format!("commutator rank cap {max_rank} exceeds {MAX_RANK}")));
    }
    if a.classes != b.classes {
        return Err(Error::domain("operators act on different orbital partitions"));
    }
    let classes = a.classes.clone();
    let mut acc = Accumulator::new(MAX_RANK);
    for ka in 1..=MAX_RANK {
        let pa = a.part(ka);
        if pa.is_empty() {
            continue;
        }
        for kb in 1..=MAX_RANK {
            let pb = b.part(kb);
            if pb.is_empty() {
                continue;
            }
            for pat in contraction_patterns(ka, kb, max_rank) {
                apply_pattern(pa, pb, &pat, 1.0, &classes, &mut acc);
            }
        }
    }
    let mut parts = acc.parts;
    for p in &mut parts {
        p.prune();
    }
    Ok(NormalOrderedOperator {
        classes,
        scalar: acc.scalar,
        parts,
        symmetry: Symmetry::commutator(a.symmetry, b.symmetry),
    })
}

/// Linear combination `Σ cᵢ Aᵢ`.
pub fn scale_add(terms: &[(f64, &NormalOrderedOperator)]) -> Result<NormalOrderedOperator> {
    let (_, first) = terms.first().ok_or_else(|| Error::domain("empty linear combination"))?;
    let mut out = NormalOrderedOperator::zero(first.classes.clone(), first.symmetry);
    for (c, op) in terms {
        out.add_scaled(*c, op)?;
    }
    Ok(out)
}

/// Physical-vacuum form `(scalar, h, v)` of a rank-≤2 operator.
pub fn ph_to_physical_vacuum(op: &NormalOrderedOperator) -> Result<SpinOrbitalHamiltonian> {
    if !op.part(3).is_empty() {
        return Err(Error::unsupported("physical-vacuum conversion of a rank-3 operator"));
    }
    let classes = &op.classes;
    let occ: Vec<usize> = classes.members(0).iter().chain(classes.members(1)).copied().collect();
    let c1 = op.c1();
    let c2 = op.c2();
    let m = classes.m();
    let mut h = c1.clone();
    for p in 0..m {
        for q in 0..m {
            let mut acc = 0.0;
            for &i in &occ {
                acc += c2[[p, i, q, i]];
            }
            h[[p, q]] -= acc;
        }
    }
    let mut scalar = op.scalar;
    for &i in &occ {
        scalar -= c1[[i, i]];
        for &j in &occ {
            scalar += 0.5 * c2[[i, j, i, j]];
        }
    }
    Ok(SpinOrbitalHamiltonian { m, scalar, h, v: c2 })
}

/// Particle-hole normal-ordered form of a physical-vacuum rank-≤2 operator
/// (inverse of [`ph_to_physical_vacuum`]).
pub fn physical_to_ph(ham: &SpinOrbitalHamiltonian, classes: Arc<OrbitalClasses>, symmetry: Symmetry) -> NormalOrderedOperator {
    let occ: Vec<usize> = classes.members(0).iter().chain(classes.members(1)).copied().collect();
    let m = ham.m;
    let mut c1 = ham.h.clone();
    for p in 0..m {
        for q in 0..m {
            for &i in &occ {
                c1[[p, q]] += ham.v[[p, i, q, i]];
            }
        }
    }
    let mut scalar = ham.scalar;
    for &i in &occ {
        scalar += ham.h[[i, i]];
        for &j in &occ {
            scalar += 0.5 * ham.v[[i, j, i, j]];
        }
    }
    NormalOrderedOperator::from_dense(classes, scalar, Some(&c1), Some(&ham.v), symmetry)
}
