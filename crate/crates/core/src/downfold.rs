//! The seven approximate downfolded Hamiltonians A1–A7.
//!
//! | variant | expression |
//! |---|---|
//! | A1 | H |
//! | A2 | H + [H_N,σ]⁽²⁾ + ½[[F_N,σ],σ]⁽²⁾ |
//! | A3 | H + [H_N,σ] |
//! | A4 | H + [H_N,σ] + ½[[F_N,σ],σ] |
//! | A5 | H + [H_N,σ]⁽³⁾ + ½[[H_N,σ],σ]⁽³⁾ + ⅙[[[F_N,σ],σ],σ]⁽³⁾ |
//! | A6 | H + [H_N,σ] + ½[[H_N,σ],σ] |
//! | A7 | H + [H_N,σ] + ½[[H_N,σ],σ] + ⅙[[[F_N,σ],σ],σ] |
//!
//! A superscript `(n)` keeps only contraction terms of perturbative order ≤ n.
//! Intermediates keep up to three-body parts; the final operator is cut to
//! one- and two-body parts, brought to physical-vacuum form and restricted to
//! the active spin orbitals.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array4};
use serde::Serialize;

use crate::active::{ActiveSpace, SigmaExt};
use crate::error::{Error, Result};
use crate::integrals::SpinOrbitalHamiltonian;
use crate::noq::{normal_order, ph_to_physical_vacuum, Grade, GradedOperator, NormalOrderedOperator};
use crate::reference::ReferenceFrame;

/// Coefficients of σ this large with all indices active violate the partition.
pub const INTERNAL_AMPLITUDE_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Variant {
    A1,
    A2,
    A3,
    A4,
    A5,
    A6,
    A7,
}

impl Variant {
    pub const ALL: [Variant; 7] =
        [Variant::A1, Variant::A2, Variant::A3, Variant::A4, Variant::A5, Variant::A6, Variant::A7];

    /// Bracket terms and their order filters.
    pub fn terms(self) -> Vec<(Term, Option<Grade>)> {
        use Term::*;
        match self {
            Variant::A1 => vec![],
            Variant::A2 => vec![(Single, Some(2)), (DoubleF, Some(2))],
            Variant::A3 => vec![(Single, None)],
            Variant::A4 => vec![(Single, None), (DoubleF, None)],
            Variant::A5 => vec![(Single, Some(3)), (DoubleH, Some(3)), (TripleF, Some(3))],
            Variant::A6 => vec![(Single, None), (DoubleH, None)],
            Variant::A7 => vec![(Single, None), (DoubleH, None), (TripleF, None)],
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = Variant::ALL.iter().position(|v| v == self).unwrap() + 1;
        write!(f, "A{n}")
    }
}

impl FromStr for Variant {
    type Err = Error;

    /// Accepts `A4`, `a4`, `A(4)` or `4`.
    fn from_str(s: &str) -> Result<Self> {
        let t: String = s.trim().chars().filter(|c| !matches!(c, '(' | ')')).collect();
        let digits = t.strip_prefix(['A', 'a']).unwrap_or(&t);
        match digits.parse::<usize>() {
            Ok(n @ 1..=7) => Ok(Variant::ALL[n - 1]),
            _ => Err(Error::parse(format!("unknown variant {s:?} (expected A1..A7)"))),
        }
    }
}

/// Bracket terms appearing in the variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Term {
    /// `[H_N, σ]`
    Single,
    /// `½[[H_N, σ], σ]`
    DoubleH,
    /// `½[[F_N, σ], σ]`
    DoubleF,
    /// `⅙[[[F_N, σ], σ], σ]`
    TripleF,
}

impl Term {
    pub fn prefactor(self) -> f64 {
        match self {
            Term::Single => 1.0,
            Term::DoubleH | Term::DoubleF => 0.5,
            Term::TripleF => 1.0 / 6.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Term::Single => "[H_N,s]",
            Term::DoubleH => "1/2[[H_N,s],s]",
            Term::DoubleF => "1/2[[F_N,s],s]",
            Term::TripleF => "1/6[[[F_N,s],s],s]",
        }
    }
}

/// Where the amplitudes and orbitals of a downfolded Hamiltonian came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub amplitude_source: String,
    pub orbitals: String,
    pub ccsd_e_corr: f64,
    pub ccsd_residual: f64,
    pub sigma_norm: f64,
}

/// Active-space Hamiltonian `scalar + Σ h a†a + ¼ Σ v a†a†aa` over the active
/// spin orbitals (indices are positions in `active.active_spin`).
#[derive(Clone, Debug)]
pub struct DownfoldedHamiltonian {
    pub variant: Variant,
    pub scalar: f64,
    pub one_body: Array2<f64>,
    pub two_body: Array4<f64>,
    pub active: ActiveSpace,
    pub provenance: Option<Provenance>,
}

impl DownfoldedHamiltonian {
    pub fn as_hamiltonian(&self) -> SpinOrbitalHamiltonian {
        SpinOrbitalHamiltonian {
            m: self.one_body.nrows(),
            scalar: self.scalar,
            h: self.one_body.clone(),
            v: self.two_body.clone(),
        }
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.as_hamiltonian().hermiticity_error()
    }

    pub fn antisymmetry_error(&self) -> f64 {
        self.as_hamiltonian().antisymmetry_error()
    }
}

/// Norms of one bracket term's contribution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TermNorms {
    pub term: String,
    pub prefactor: f64,
    pub max_order: Option<Grade>,
    /// Scalar shift (particle-hole form, i.e. the reference-energy shift).
    pub scalar: f64,
    pub one_body_norm: f64,
    pub two_body_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TermReport {
    pub variant: Variant,
    pub terms: Vec<TermNorms>,
}

/// Shared state for building variants from one (H, σ) pair.
///
/// Commutator streams are computed once, graded by perturbative order, and
/// reused by every variant that needs them.
pub struct DownfoldContext {
    h: NormalOrderedOperator,
    streams: BTreeMap<Term, GradedOperator>,
    sigma_zero: bool,
}

impl DownfoldContext {
    /// Prepare the bracket terms needed by `variants`.
    pub fn new(
        ham: &SpinOrbitalHamiltonian,
        reference: &ReferenceFrame,
        sigma: &SigmaExt,
        variants: &[Variant],
    ) -> Result<Self> {
        let h = normal_order(ham, reference);
        let sigma_op = sigma.to_operator(h.classes().clone());
        Self::from_operators(h, &sigma_op, variants)
    }

    /// As [`new`](Self::new) with σ already in normal-ordered form.
    pub fn from_operators(h: NormalOrderedOperator, sigma: &NormalOrderedOperator, variants: &[Variant]) -> Result<Self> {
        Self::with_intermediate_rank(h, sigma, variants, 3)
    }

    /// As [`from_operators`](Self::from_operators), cutting every nested
    /// commutator intermediate to at most `rank`-body terms.
    pub fn with_intermediate_rank(
        h: NormalOrderedOperator,
        sigma: &NormalOrderedOperator,
        variants: &[Variant],
        rank: usize,
    ) -> Result<Self> {
        if h.classes() != sigma.classes() {
            return Err(Error::domain("σ and H use different references"));
        }
        let needed: Vec<Term> = {
            let mut t: Vec<Term> = variants.iter().flat_map(|v| v.terms()).map(|(t, _)| t).collect();
            t.sort();
            t.dedup();
            t
        };
        let sigma_zero = sigma.rank() == 0;
        let mut streams = BTreeMap::new();
        if !needed.is_empty() {
            let s = GradedOperator::amplitudes(sigma);
            let h_n = GradedOperator::hamiltonian(&h);
            let single = h_n.commutator(&s, rank)?;
            if needed.contains(&Term::DoubleH) {
                streams.insert(Term::DoubleH, single.commutator(&s, 2)?);
            }
            if needed.contains(&Term::DoubleF) || needed.contains(&Term::TripleF) {
                let f_n = GradedOperator::fock(&h);
                let double_f = f_n.commutator(&s, rank)?.commutator(&s, rank)?;
                if needed.contains(&Term::TripleF) {
                    streams.insert(Term::TripleF, double_f.commutator(&s, 2)?);
                }
                streams.insert(Term::DoubleF, double_f);
            }
            streams.insert(Term::Single, single);
        }
        Ok(DownfoldContext { h, streams, sigma_zero })
    }

    pub fn hamiltonian(&self) -> &NormalOrderedOperator {
        &self.h
    }

    /// Contribution of one bracket term, prefactor included, before rank truncation.
    pub fn term(&self, term: Term, max_order: Option<Grade>) -> Result<NormalOrderedOperator> {
        let stream = self
            .streams
            .get(&term)
            .ok_or_else(|| Error::domain(format!("term {} was not prepared", term.label())))?;
        let op = match max_order {
            Some(o) => stream.filtered(o)?,
            None => stream.total(),
        };
        Ok(op.scaled(term.prefactor()))
    }

    /// Full-space transformed Hamiltonian of `variant`, cut to rank 2.
    pub fn transformed(&self, variant: Variant) -> Result<NormalOrderedOperator> {
        let mut out = self.h.clone();
        for (term, order) in variant.terms() {
            out.add_scaled(1.0, &self.term(term, order)?)?;
        }
        Ok(out.truncated(2))
    }

    /// Active-space Hamiltonian of `variant`.
    pub fn build(&self, variant: Variant, active: &ActiveSpace) -> Result<DownfoldedHamiltonian> {
        let physical = ph_to_physical_vacuum(&self.transformed(variant)?)?;
        let restricted = physical.restricted(&active.active_spin);
        Ok(DownfoldedHamiltonian {
            variant,
            scalar: restricted.scalar,
            one_body: restricted.h,
            two_body: restricted.v,
            active: active.clone(),
            provenance: None,
        })
    }

    /// Per-term norms for `variant`.
    pub fn term_report(&self, variant: Variant) -> Result<TermReport> {
        let mut terms = Vec::new();
        for (term, order) in variant.terms() {
            let op = self.term(term, order)?.truncated(2);
            terms.push(TermNorms {
                term: term.label().to_string(),
                prefactor: term.prefactor(),
                max_order: order,
                scalar: op.scalar,
                one_body_norm: op.part(1).frobenius_norm(),
                two_body_norm: op.part(2).frobenius_norm(),
            });
        }
        Ok(TermReport { variant, terms })
    }

    pub fn sigma_is_zero(&self) -> bool {
        self.sigma_zero
    }
}

/// One-shot build of a single variant.
pub fn build_variant(
    variant: Variant,
    ham: &SpinOrbitalHamiltonian,
    reference: &ReferenceFrame,
    sigma: &SigmaExt,
    active: &ActiveSpace,
) -> Result<DownfoldedHamiltonian> {
    let internal = sigma.max_internal(active);
    if internal > INTERNAL_AMPLITUDE_TOL {
        return Err(Error::domain(format!(
            "σ has an all-active coefficient of size {internal:e}; split the amplitudes first"
        )));
    }
    DownfoldContext::new(ham, reference, sigma, &[variant])?.build(variant, active)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names() {
        for v in Variant::ALL {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("A(7)".parse::<Variant>().unwrap(), Variant::A7);
        assert_eq!("3".parse::<Variant>().unwrap(), Variant::A3);
        assert!("A8".parse::<Variant>().is_err());
    }

    #[test]
    fn row_differences() {
        let a3 = Variant::A3.terms();
        let a6 = Variant::A6.terms();
        let extra: Vec<_> = a6.iter().filter(|t| !a3.contains(t)).collect();
        assert_eq!(extra, vec![&(Term::DoubleH, None)]);
    }
}
