//! Active spaces, the internal/external amplitude split, and the
//! anti-Hermitian generator σ = T_ext − T_ext†.

use std::sync::Arc;

use ndarray::{Array2, Array4};
use serde::Serialize;

use crate::ccsd::ClusterAmplitudes;
use crate::error::{Error, Result};
use crate::noq::{NormalOrderedOperator, OrbitalClasses, Symmetry};
use crate::reference::ReferenceFrame;

/// Orbital energies or occupations closer than this at the active-space
/// boundary make "the n lowest" ambiguous.
pub const BOUNDARY_TIE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitalOrdering {
    RhfEnergy,
    NaturalOccupation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ActiveSpace {
    /// Active spatial orbitals, ascending.
    pub active_spatial: Vec<usize>,
    /// Active spin orbitals `2p`, `2p+1`, ascending.
    pub active_spin: Vec<usize>,
    pub n_active_electrons: usize,
    pub n_spatial: usize,
}

impl ActiveSpace {
    /// Active space from an explicit list of spatial orbitals. All occupied
    /// orbitals must be included.
    pub fn from_orbitals(orbitals: &[usize], n_spatial: usize, n_electrons: usize) -> Result<Self> {
        let mut list = orbitals.to_vec();
        list.sort_unstable();
        list.dedup();
        if list.len() != orbitals.len() {
            return Err(Error::domain("active orbital list contains duplicates"));
        }
        if let Some(&bad) = list.iter().find(|&&p| p >= n_spatial) {
            return Err(Error::domain(format!("active orbital {bad} out of range (n = {n_spatial})")));
        }
        let n_occ = n_electrons.div_ceil(2);
        if let Some(missing) = (0..n_occ).find(|p| !list.contains(p)) {
            return Err(Error::domain(format!("occupied orbital {missing} must be active")));
        }
        let active_spin = list.iter().flat_map(|&p| [2 * p, 2 * p + 1]).collect();
        Ok(ActiveSpace { active_spatial: list, active_spin, n_active_electrons: n_electrons, n_spatial })
    }

    pub fn n_active(&self) -> usize {
        self.active_spatial.len()
    }

    pub fn is_full(&self) -> bool {
        self.active_spatial.len() == self.n_spatial
    }

    pub fn contains_spin(&self, p: usize) -> bool {
        self.active_spin.binary_search(&p).is_ok()
    }
}

/// Choose `n_active` orbitals by ascending orbital energy or, for natural
/// orbitals, by descending occupation.
///
/// `occupations` is required for [`OrbitalOrdering::NaturalOccupation`] and
/// must be indexed like the orbitals of `reference`.
pub fn select_active(
    ordering: OrbitalOrdering,
    n_active: usize,
    reference: &ReferenceFrame,
    occupations: Option<&[f64]>,
) -> Result<ActiveSpace> {
    let n_spatial = reference.m() / 2;
    let n_electrons = reference.n_occ();
    let n_occ = n_electrons.div_ceil(2);
    if n_active < n_occ {
        return Err(Error::domain(format!("{n_active} active orbitals cannot hold {n_occ} occupied orbitals")));
    }
    if n_active > n_spatial {
        return Err(Error::domain(format!("{n_active} active orbitals requested, only {n_spatial} exist")));
    }
    // Sort key: smaller is "more active".
    let key: Vec<f64> = match ordering {
        OrbitalOrdering::RhfEnergy => (0..n_spatial).map(|p| reference.fock[[2 * p, 2 * p]]).collect(),
        OrbitalOrdering::NaturalOccupation => {
            let occ = occupations.ok_or_else(|| Error::domain("natural-occupation ordering needs occupations"))?;
            if occ.len() != n_spatial {
                return Err(Error::domain("occupation list does not match the orbital count"));
            }
            occ.iter().map(|x| -x).collect()
        }
    };
    // Occupied orbitals always come first.
    let mut order: Vec<usize> = (n_occ..n_spatial).collect();
    order.sort_by(|&a, &b| key[a].total_cmp(&key[b]).then(a.cmp(&b)));
    let n_extra = n_active - n_occ;
    if n_extra > 0 && n_extra < order.len() {
        let (last_in, first_out) = (order[n_extra - 1], order[n_extra]);
        if (key[last_in] - key[first_out]).abs() < BOUNDARY_TIE_TOL {
            return Err(Error::domain(format!(
                "orbitals {last_in} and {first_out} are degenerate at the active-space boundary; give an explicit list"
            )));
        }
    }
    let mut chosen: Vec<usize> = (0..n_occ).collect();
    chosen.extend(&order[..n_extra]);
    ActiveSpace::from_orbitals(&chosen, n_spatial, n_electrons)
}

/// Zero every amplitude whose indices are all active.
pub fn split_external(t: &ClusterAmplitudes, reference: &ReferenceFrame, active: &ActiveSpace) -> ClusterAmplitudes {
    let (occ, vir) = (&reference.occupied, &reference.virt);
    let mut out = t.clone();
    for ((a, i), v) in out.t1.indexed_iter_mut() {
        if active.contains_spin(vir[a]) && active.contains_spin(occ[i]) {
            *v = 0.0;
        }
    }
    for ((a, b, i, j), v) in out.t2.indexed_iter_mut() {
        if [vir[a], vir[b], occ[i], occ[j]].iter().all(|&p| active.contains_spin(p)) {
            *v = 0.0;
        }
    }
    out
}

/// Coefficients of σ = T_ext − T_ext† as general one- and two-body tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaExt {
    pub s1: Array2<f64>,
    pub s2: Array4<f64>,
}

impl SigmaExt {
    pub fn m(&self) -> usize {
        self.s1.nrows()
    }

    /// Largest deviation from σ† = −σ.
    pub fn anti_hermiticity_error(&self) -> f64 {
        let m = self.m();
        let mut err: f64 = 0.0;
        for p in 0..m {
            for q in 0..m {
                err = err.max((self.s1[[p, q]] + self.s1[[q, p]]).abs());
                for r in 0..m {
                    for s in 0..m {
                        err = err.max((self.s2[[p, q, r, s]] + self.s2[[r, s, p, q]]).abs());
                    }
                }
            }
        }
        err
    }

    /// Largest coefficient whose spin-orbital indices are all active.
    pub fn max_internal(&self, active: &ActiveSpace) -> f64 {
        let m = self.m();
        let mut worst: f64 = 0.0;
        for p in 0..m {
            for q in 0..m {
                if active.contains_spin(p) && active.contains_spin(q) {
                    worst = worst.max(self.s1[[p, q]].abs());
                    for r in 0..m {
                        for s in 0..m {
                            if active.contains_spin(r) && active.contains_spin(s) {
                                worst = worst.max(self.s2[[p, q, r, s]].abs());
                            }
                        }
                    }
                }
            }
        }
        worst
    }

    pub fn is_zero(&self) -> bool {
        self.s1.iter().chain(self.s2.iter()).all(|&x| x == 0.0)
    }

    /// σ scaled by `c`.
    pub fn scaled(&self, c: f64) -> SigmaExt {
        SigmaExt { s1: &self.s1 * c, s2: &self.s2 * c }
    }

    /// The same operator in normal-ordered form. Excitation operators contain
    /// no occupied–occupied or virtual–virtual contractions, so the
    /// coefficients carry over unchanged.
    pub fn to_operator(&self, classes: Arc<OrbitalClasses>) -> NormalOrderedOperator {
        NormalOrderedOperator::from_dense(classes, 0.0, Some(&self.s1), Some(&self.s2), Symmetry::AntiHermitian)
    }
}

/// σ = T − T† from (already split) amplitudes.
pub fn build_sigma_ext(t_ext: &ClusterAmplitudes, reference: &ReferenceFrame) -> SigmaExt {
    let m = reference.m();
    let (occ, vir) = (&reference.occupied, &reference.virt);
    let mut s1 = Array2::zeros((m, m));
    let mut s2 = Array4::zeros((m, m, m, m));
    for ((a, i), &v) in t_ext.t1.indexed_iter() {
        if v != 0.0 {
            s1[[vir[a], occ[i]]] = v;
            s1[[occ[i], vir[a]]] = -v;
        }
    }
    for ((a, b, i, j), &v) in t_ext.t2.indexed_iter() {
        if v != 0.0 {
            s2[[vir[a], vir[b], occ[i], occ[j]]] = v;
            s2[[occ[i], occ[j], vir[a], vir[b]]] = -v;
        }
    }
    SigmaExt { s1, s2 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn reference(n_spatial: usize, n_electrons: usize, eps: &[f64]) -> ReferenceFrame {
        let m = 2 * n_spatial;
        let fock = Array2::from_shape_fn((m, m), |(p, q)| if p == q { eps[p / 2] } else { 0.0 });
        ReferenceFrame {
            occupied: (0..n_electrons).collect(),
            virt: (n_electrons..m).collect(),
            e_ref: 0.0,
            epsilon: (0..m).map(|p| eps[p / 2]).collect(),
            fock,
        }
    }

    #[test]
    fn lowest_energy_selection() {
        let r = reference(5, 2, &[-1.0, 0.5, 0.2, 0.9, 0.3]);
        let a = select_active(OrbitalOrdering::RhfEnergy, 3, &r, None).unwrap();
        assert_eq!(a.active_spatial, vec![0, 2, 4]);
        assert!(select_active(OrbitalOrdering::RhfEnergy, 0, &r, None).is_err());
    }

    #[test]
    fn boundary_tie_is_rejected() {
        let r = reference(4, 2, &[-1.0, 0.5, 0.5, 0.9]);
        assert!(matches!(select_active(OrbitalOrdering::RhfEnergy, 2, &r, None), Err(Error::Domain(_))));
        assert!(select_active(OrbitalOrdering::RhfEnergy, 3, &r, None).is_ok());
    }

    #[test]
    fn single_amplitude_sigma() {
        let r = reference(2, 2, &[-1.0, 1.0]);
        let mut t = ClusterAmplitudes::zeros(2, 2);
        t.t1[[0, 0]] = 0.3;
        let s = build_sigma_ext(&t, &r);
        assert_eq!(s.s1[[2, 0]], 0.3);
        assert_eq!(s.s1[[0, 2]], -0.3);
        assert_eq!(s.anti_hermiticity_error(), 0.0);
    }
}
