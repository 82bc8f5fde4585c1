//! Operators split into streams of definite perturbative order.
//!
//! Grades: diagonal Fock 0, off-diagonal Fock 1, two-body interaction 1,
//! doubles amplitudes 1, singles amplitudes 2. The grade of a commutator term
//! is the sum of the grades of the two factors, so filtering the buckets of a
//! nested commutator removes exactly the contraction terms above the order.

use std::collections::BTreeMap;

use ndarray::Array2;

use super::operator::{commutator, NormalOrderedOperator, Symmetry};
use crate::error::{Error, Result};

pub type Grade = u32;

#[derive(Clone, Debug)]
pub struct GradedOperator {
    /// `None` marks an ungraded stream.
    terms: BTreeMap<Option<Grade>, NormalOrderedOperator>,
}

impl GradedOperator {
    pub fn graded(terms: Vec<(Grade, NormalOrderedOperator)>) -> Self {
        let mut out = GradedOperator { terms: BTreeMap::new() };
        for (g, op) in terms {
            out.accumulate(Some(g), op);
        }
        out
    }

    pub fn ungraded(op: NormalOrderedOperator) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(None, op);
        GradedOperator { terms }
    }

    fn accumulate(&mut self, g: Option<Grade>, op: NormalOrderedOperator) {
        match self.terms.get_mut(&g) {
            Some(existing) => existing.add_scaled(1.0, &op).expect("same orbital partition"),
            None => {
                self.terms.insert(g, op);
            }
        }
    }

    /// `H_N` of a normal-ordered Hamiltonian: diagonal Fock (0), off-diagonal
    /// Fock plus two-body part (1). The scalar is dropped.
    pub fn hamiltonian(h: &NormalOrderedOperator) -> Self {
        let (diag, off) = split_fock(h);
        let mut one = off;
        let v = NormalOrderedOperator::from_dense(h.classes().clone(), 0.0, None, Some(&h.c2()), Symmetry::Hermitian);
        one.add_scaled(1.0, &v).expect("same orbital partition");
        GradedOperator::graded(vec![(0, diag), (1, one)])
    }

    /// `F_N` of a normal-ordered Hamiltonian: diagonal (0) and off-diagonal (1).
    pub fn fock(h: &NormalOrderedOperator) -> Self {
        let (diag, off) = split_fock(h);
        GradedOperator::graded(vec![(0, diag), (1, off)])
    }

    /// Excitation operator: doubles at grade 1, singles at grade 2.
    pub fn amplitudes(sigma: &NormalOrderedOperator) -> Self {
        let classes = sigma.classes().clone();
        let s = sigma.symmetry;
        let singles = NormalOrderedOperator::from_dense(classes.clone(), 0.0, Some(&sigma.c1()), None, s);
        let doubles = NormalOrderedOperator::from_dense(classes, 0.0, None, Some(&sigma.c2()), s);
        GradedOperator::graded(vec![(1, doubles), (2, singles)])
    }

    pub fn grades(&self) -> Vec<Option<Grade>> {
        self.terms.keys().copied().collect()
    }

    pub fn component(&self, grade: Grade) -> Option<&NormalOrderedOperator> {
        self.terms.get(&Some(grade))
    }

    /// `[self, other]` stream by stream, parts above `max_rank` dropped.
    pub fn commutator(&self, other: &GradedOperator, max_rank: usize) -> Result<GradedOperator> {
        let mut out = GradedOperator { terms: BTreeMap::new() };
        for (ga, a) in &self.terms {
            for (gb, b) in &other.terms {
                let g = match (ga, gb) {
                    (Some(x), Some(y)) => Some(x + y),
                    _ => None,
                };
                out.accumulate(g, commutator(a, b, max_rank)?);
            }
        }
        Ok(out)
    }

    /// Sum of all streams.
    pub fn total(&self) -> NormalOrderedOperator {
        let mut iter = self.terms.values();
        let mut out = iter.next().expect("non-empty graded operator").clone();
        for op in iter {
            out.add_scaled(1.0, op).expect("same orbital partition");
        }
        out
    }

    /// Sum of the streams with grade at most `max_order`.
    pub fn filtered(&self, max_order: Grade) -> Result<NormalOrderedOperator> {
        if self.terms.contains_key(&None) {
            return Err(Error::domain("perturbative filter applied to an ungraded operator"));
        }
        let first = self.terms.values().next().expect("non-empty graded operator");
        let mut out = NormalOrderedOperator::zero(first.classes().clone(), first.symmetry);
        for (g, op) in &self.terms {
            if g.is_some_and(|g| g <= max_order) {
                out.add_scaled(1.0, op)?;
            }
        }
        Ok(out)
    }
}

fn split_fock(h: &NormalOrderedOperator) -> (NormalOrderedOperator, NormalOrderedOperator) {
    let f = h.c1();
    let m = f.nrows();
    let diag = Array2::from_shape_fn((m, m), |(p, q)| if p == q { f[[p, q]] } else { 0.0 });
    let off = &f - &diag;
    let classes = h.classes().clone();
    (
        NormalOrderedOperator::from_dense(classes.clone(), 0.0, Some(&diag), None, Symmetry::Hermitian),
        NormalOrderedOperator::from_dense(classes, 0.0, Some(&off), None, Symmetry::Hermitian),
    )
}
