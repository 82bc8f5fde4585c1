//! Reference determinant, Fock operator, MBPT(2) energy and natural orbitals.

use nalgebra::DMatrix;
use ndarray::{Array2, Array4};

use crate::error::{Error, Result};
use crate::integrals::SpinOrbitalHamiltonian;

/// Denominators smaller than this (Hartree) are treated as degenerate.
pub const DENOMINATOR_TOL: f64 = 1e-8;

/// Off-diagonal Fock elements above this make the orbitals non-canonical.
pub const CANONICAL_TOL: f64 = 1e-8;

/// The reference determinant `|Φ⟩` and its Fock operator.
#[derive(Clone, Debug)]
pub struct ReferenceFrame {
    /// Occupied spin orbitals, ascending.
    pub occupied: Vec<usize>,
    /// Virtual spin orbitals, ascending.
    pub virt: Vec<usize>,
    /// `⟨Φ|H|Φ⟩` including the scalar part of the Hamiltonian.
    pub e_ref: f64,
    /// `f[p][q] = h[p][q] + Σ_i v[p][i][q][i]`.
    pub fock: Array2<f64>,
    /// Diagonal of the Fock matrix.
    pub epsilon: Vec<f64>,
}

impl ReferenceFrame {
    pub fn m(&self) -> usize {
        self.fock.nrows()
    }

    pub fn n_occ(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_occupied(&self, p: usize) -> bool {
        self.occupied.binary_search(&p).is_ok()
    }

    /// Largest off-diagonal Fock element.
    pub fn max_off_diagonal_fock(&self) -> f64 {
        let m = self.m();
        let mut out: f64 = 0.0;
        for p in 0..m {
            for q in 0..m {
                if p != q {
                    out = out.max(self.fock[[p, q]].abs());
                }
            }
        }
        out
    }

    /// Occupation bitmask of the reference (spin orbital `p` is bit `p`).
    pub fn occupation_mask(&self) -> u128 {
        self.occupied.iter().fold(0u128, |acc, &p| acc | (1u128 << p))
    }
}

/// Build the reference from the `n_electrons` lowest-index spin orbitals.
pub fn build_reference(ham: &SpinOrbitalHamiltonian, n_electrons: usize) -> Result<ReferenceFrame> {
    let m = ham.m;
    if n_electrons > m {
        return Err(Error::domain(format!(
            "{n_electrons} electrons do not fit in {m} spin orbitals"
        )));
    }
    let occupied: Vec<usize> = (0..n_electrons).collect();
    let virt: Vec<usize> = (n_electrons..m).collect();
    let mut fock = ham.h.clone();
    for p in 0..m {
        for q in 0..m {
            let mut acc = 0.0;
            for &i in &occupied {
                acc += ham.v[[p, i, q, i]];
            }
            fock[[p, q]] += acc;
        }
    }
    let mut e_ref = ham.scalar;
    for &i in &occupied {
        e_ref += ham.h[[i, i]];
        for &j in &occupied {
            e_ref += 0.5 * ham.v[[i, j, i, j]];
        }
    }
    let epsilon = (0..m).map(|p| fock[[p, p]]).collect();
    Ok(ReferenceFrame { occupied, virt, e_ref, fock, epsilon })
}

/// Second-order Møller–Plesset results.
#[derive(Clone, Debug)]
pub struct Mbpt2Result {
    /// Second-order correlation energy (Hartree).
    pub e2: f64,
    /// `t[a][b][i][j]` indexed by positions in `virt` and `occupied`.
    pub t2_first_order: Array4<f64>,
    /// Spin-summed one-particle density over spatial orbitals.
    pub density: Array2<f64>,
    /// Natural occupations in descending order.
    pub natural_occupations: Vec<f64>,
    /// Columns are natural orbitals expressed in the input spatial orbitals.
    pub natural_orbital_coefficients: Array2<f64>,
}

/// First-order doubles `v[a][b][i][j] / (ε_i + ε_j − ε_a − ε_b)`.
pub fn first_order_doubles(ham: &SpinOrbitalHamiltonian, reference: &ReferenceFrame) -> Result<Array4<f64>> {
    let (occ, vir) = (&reference.occupied, &reference.virt);
    let (no, nv) = (occ.len(), vir.len());
    let eps = &reference.epsilon;
    let mut t2 = Array4::zeros((nv, nv, no, no));
    for (a, &pa) in vir.iter().enumerate() {
        for (b, &pb) in vir.iter().enumerate() {
            for (i, &pi) in occ.iter().enumerate() {
                for (j, &pj) in occ.iter().enumerate() {
                    let num = ham.v[[pa, pb, pi, pj]];
                    if num == 0.0 {
                        continue;
                    }
                    let d = eps[pi] + eps[pj] - eps[pa] - eps[pb];
                    if d.abs() < DENOMINATOR_TOL {
                        return Err(Error::Degeneracy {
                            what: format!("doubles denominator ({pi},{pj} -> {pa},{pb})"),
                            value: d,
                        });
                    }
                    t2[[a, b, i, j]] = num / d;
                }
            }
        }
    }
    Ok(t2)
}

/// MBPT(2) energy, unrelaxed density and natural orbitals.
///
/// The orbitals must be canonical.
pub fn mbpt2(ham: &SpinOrbitalHamiltonian, reference: &ReferenceFrame) -> Result<Mbpt2Result> {
    let off = reference.max_off_diagonal_fock();
    if off > CANONICAL_TOL {
        return Err(Error::domain(format!(
            "MBPT(2) needs canonical orbitals (max off-diagonal Fock {off:e})"
        )));
    }
    let t2 = first_order_doubles(ham, reference)?;
    let (occ, vir) = (&reference.occupied, &reference.virt);
    let (no, nv) = (occ.len(), vir.len());

    let mut e2 = 0.0;
    for a in 0..nv {
        for b in 0..nv {
            for i in 0..no {
                for j in 0..no {
                    e2 += 0.25 * ham.v[[occ[i], occ[j], vir[a], vir[b]]] * t2[[a, b, i, j]];
                }
            }
        }
    }

    let m = ham.m;
    let mut dso = Array2::<f64>::zeros((m, m));
    for (i, &pi) in occ.iter().enumerate() {
        for (j, &pj) in occ.iter().enumerate() {
            let mut acc = if i == j { 1.0 } else { 0.0 };
            for k in 0..no {
                for a in 0..nv {
                    for b in 0..nv {
                        acc -= 0.5 * t2[[a, b, i, k]] * t2[[a, b, j, k]];
                    }
                }
            }
            dso[[pi, pj]] = acc;
        }
    }
    for (a, &pa) in vir.iter().enumerate() {
        for (b, &pb) in vir.iter().enumerate() {
            let mut acc = 0.0;
            for c in 0..nv {
                for i in 0..no {
                    for j in 0..no {
                        acc += 0.5 * t2[[a, c, i, j]] * t2[[b, c, i, j]];
                    }
                }
            }
            dso[[pa, pb]] = acc;
        }
    }
    let n = m / 2;
    let mut density = Array2::<f64>::zeros((n, n));
    for p in 0..n {
        for q in 0..n {
            density[[p, q]] = dso[[2 * p, 2 * q]] + dso[[2 * p + 1, 2 * q + 1]];
        }
    }
    let (natural_occupations, natural_orbital_coefficients) = descending_eigen(&density);
    Ok(Mbpt2Result { e2, t2_first_order: t2, density, natural_occupations, natural_orbital_coefficients })
}

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
pub fn descending_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[[i, j]] + a[[j, i]]));
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = Array2::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        // Fix the phase so the largest component is positive.
        let v = eig.eigenvectors.column(k);
        let mut big = 0;
        for r in 0..n {
            if v[r].abs() > v[big].abs() + 1e-12 {
                big = r;
            }
        }
        let sign = if v[big] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vecs[[r, col]] = sign * v[r];
        }
    }
    (values, vecs)
}

/// Transform the Hamiltonian to MBPT(2) natural orbitals.
///
/// Orbitals are ordered by descending occupation, so the occupied-like ones
/// (occupation above one) come first and the reference stays the lowest-index
/// determinant.
pub fn natural_orbital_hamiltonian(
    ham: &SpinOrbitalHamiltonian,
    n_electrons: usize,
) -> Result<(SpinOrbitalHamiltonian, Mbpt2Result)> {
    let reference = build_reference(ham, n_electrons)?;
    let mp2 = mbpt2(ham, &reference)?;
    let n_occ_spatial = n_electrons / 2;
    let occupied_like = mp2.natural_occupations.iter().filter(|&&x| x > 1.0).count();
    if occupied_like != n_occ_spatial {
        return Err(Error::domain(format!(
            "{occupied_like} natural orbitals have occupation above one, expected {n_occ_spatial}"
        )));
    }
    let rotated = ham.rotate_basis(&mp2.natural_orbital_coefficients)?;
    Ok((rotated, mp2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrals::{from_spatial, SpinOrbitalHamiltonian};
    use ndarray::array;

    fn non_interacting() -> SpinOrbitalHamiltonian {
        let h = array![[-1.0, 0.0, 0.0], [0.0, -0.5, 0.0], [0.0, 0.0, 0.25]];
        let eri = Array4::zeros((3, 3, 3, 3));
        from_spatial(0.3, &h, &eri)
    }

    #[test]
    fn non_interacting_limit() {
        let ham = non_interacting();
        let r = build_reference(&ham, 2).unwrap();
        assert_eq!(r.fock, ham.h);
        assert!((r.e_ref - (0.3 - 2.0)).abs() < 1e-14);
        let mp = mbpt2(&ham, &r).unwrap();
        assert_eq!(mp.e2, 0.0);
        let occ: Vec<f64> = mp.natural_occupations.clone();
        assert!((occ[0] - 2.0).abs() < 1e-12 && occ[1].abs() < 1e-12 && occ[2].abs() < 1e-12);
    }

    #[test]
    fn too_many_electrons() {
        let ham = non_interacting();
        assert!(matches!(build_reference(&ham, 7), Err(Error::Domain(_))));
    }

    #[test]
    fn degenerate_denominator() {
        let h = array![[-1.0, 0.0], [0.0, -1.0]];
        let mut eri = Array4::zeros((2, 2, 2, 2));
        eri[[0, 1, 0, 1]] = 0.1;
        eri[[1, 0, 1, 0]] = 0.1;
        eri[[0, 1, 1, 0]] = 0.1;
        eri[[1, 0, 0, 1]] = 0.1;
        // Shift orbital energies so that the occupied/virtual gap closes.
        let mut ham = from_spatial(0.0, &h, &eri);
        let r0 = build_reference(&ham, 2).unwrap();
        let gap = r0.epsilon[2] - r0.epsilon[0];
        for s in 2..4 {
            ham.h[[s, s]] -= gap;
        }
        let r = build_reference(&ham, 2).unwrap();
        assert!(matches!(mbpt2(&ham, &r), Err(Error::Degeneracy { .. })));
    }
}
