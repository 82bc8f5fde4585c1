//! Spin-orbital Hamiltonian tensors.
//!
//! Spin orbitals are interleaved: spatial orbital `p` with spin `σ` (0 = α,
//! 1 = β) has index `2p + σ`.

use ndarray::{s, Array2, Array4};

use super::fcidump::{IntegralSet, OrbitalLayout};
use crate::error::{Error, Result};

/// Tolerance on `CᵀC = I` accepted by [`SpinOrbitalHamiltonian::rotate_basis`].
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

#[inline]
pub fn spin_orbital(p: usize, spin: usize) -> usize {
    2 * p + spin
}

#[inline]
pub fn spatial_of(so: usize) -> usize {
    so / 2
}

#[inline]
pub fn spin_of(so: usize) -> usize {
    so & 1
}

/// `H = scalar + Σ h[p][q] a†p aq + ¼ Σ v[p][q][r][s] a†p a†q as ar` over
/// spin orbitals, with `v[p][q][r][s] = ⟨pq||rs⟩`.
#[derive(Clone, Debug)]
pub struct SpinOrbitalHamiltonian {
    pub m: usize,
    pub scalar: f64,
    pub h: Array2<f64>,
    pub v: Array4<f64>,
}

impl SpinOrbitalHamiltonian {
    pub fn zeros(m: usize) -> Self {
        SpinOrbitalHamiltonian {
            m,
            scalar: 0.0,
            h: Array2::zeros((m, m)),
            v: Array4::zeros((m, m, m, m)),
        }
    }

    /// Largest deviation from antisymmetry of `v`.
    pub fn antisymmetry_error(&self) -> f64 {
        let m = self.m;
        let mut err: f64 = 0.0;
        for p in 0..m {
            for q in 0..m {
                for r in 0..m {
                    for s in 0..m {
                        let x = self.v[[p, q, r, s]];
                        err = err.max((x + self.v[[q, p, r, s]]).abs());
                        err = err.max((x + self.v[[p, q, s, r]]).abs());
                    }
                }
            }
        }
        err
    }

    /// Largest deviation from `h = hᵀ` and `v[pq][rs] = v[rs][pq]`.
    pub fn hermiticity_error(&self) -> f64 {
        let m = self.m;
        let mut err: f64 = 0.0;
        for p in 0..m {
            for q in 0..m {
                err = err.max((self.h[[p, q]] - self.h[[q, p]]).abs());
                for r in 0..m {
                    for s in 0..m {
                        err = err.max((self.v[[p, q, r, s]] - self.v[[r, s, p, q]]).abs());
                    }
                }
            }
        }
        err
    }

    /// Largest matrix element that would flip spin.
    pub fn spin_violation(&self) -> f64 {
        let m = self.m;
        let mut err: f64 = 0.0;
        for p in 0..m {
            for q in 0..m {
                if spin_of(p) != spin_of(q) {
                    err = err.max(self.h[[p, q]].abs());
                }
                for r in 0..m {
                    for s in 0..m {
                        let up = spin_of(p) + spin_of(q);
                        let lo = spin_of(r) + spin_of(s);
                        if up != lo {
                            err = err.max(self.v[[p, q, r, s]].abs());
                        }
                    }
                }
            }
        }
        err
    }

    /// Copy of the Hamiltonian restricted to the given spin orbitals, in the
    /// order given.
    pub fn restricted(&self, indices: &[usize]) -> SpinOrbitalHamiltonian {
        let n = indices.len();
        let mut out = SpinOrbitalHamiltonian::zeros(n);
        out.scalar = self.scalar;
        for (a, &p) in indices.iter().enumerate() {
            for (b, &q) in indices.iter().enumerate() {
                out.h[[a, b]] = self.h[[p, q]];
                for (c, &r) in indices.iter().enumerate() {
                    for (d, &s) in indices.iter().enumerate() {
                        out.v[[a, b, c, d]] = self.v[[p, q, r, s]];
                    }
                }
            }
        }
        out
    }

    /// Recover spatial `h` and chemist-notation `(pq|rs)` when the tensors
    /// have restricted (spin-free) structure within `tol`.
    pub fn spatial_parts(&self, tol: f64) -> Result<(Array2<f64>, Array4<f64>)> {
        if !self.m.is_multiple_of(2) {
            return Err(Error::Basis("odd number of spin orbitals".into()));
        }
        let n = self.m / 2;
        let h = self.h.slice(s![0..;2, 0..;2]).to_owned();
        let hb = self.h.slice(s![1..;2, 1..;2]);
        let mut eri = Array4::zeros((n, n, n, n));
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for t in 0..n {
                        // ⟨pα qβ || rα tβ⟩ = (pr|qt)
                        eri[[p, r, q, t]] = self.v[[2 * p, 2 * q + 1, 2 * r, 2 * t + 1]];
                    }
                }
            }
        }
        let rebuilt = from_spatial(self.scalar, &h, &eri);
        let mut err = (&h - &hb).iter().fold(0.0f64, |a, x| a.max(x.abs()));
        err = err.max(
            (&rebuilt.v - &self.v).iter().fold(0.0f64, |a, x| a.max(x.abs())),
        );
        err = err.max(
            (&rebuilt.h - &self.h).iter().fold(0.0f64, |a, x| a.max(x.abs())),
        );
        if err > tol {
            return Err(Error::Basis(format!(
                "tensors are not spin-restricted (deviation {err:e})"
            )));
        }
        Ok((h, eri))
    }

    /// Transform to the orbital basis `φ'_p = Σ_q C[q][p] φ_q`.
    ///
    /// `C` acts on spatial orbitals and is applied to both spin blocks.
    pub fn rotate_basis(&self, c: &Array2<f64>) -> Result<SpinOrbitalHamiltonian> {
        let n = self.m / 2;
        if c.dim() != (n, n) {
            return Err(Error::Basis(format!(
                "rotation is {:?}, expected {n}x{n}",
                c.dim()
            )));
        }
        let ctc = c.t().dot(c);
        let dev = (&ctc - &Array2::<f64>::eye(n))
            .iter()
            .fold(0.0f64, |a, x| a.max(x.abs()));
        if dev > ORTHOGONALITY_TOL {
            return Err(Error::Basis(format!(
                "rotation is not orthogonal (|CᵀC - I| = {dev:e})"
            )));
        }
        let (h, eri) = self.spatial_parts(1e-10)?;
        let h2 = c.t().dot(&h).dot(c);
        let eri2 = transform_eri(&eri, c);
        Ok(from_spatial(self.scalar, &h2, &eri2))
    }
}

/// Four-index transform `(pq|rs)' = Σ C_ip C_jq C_kr C_ls (ij|kl)` done as four
/// one-index contractions.
pub fn transform_eri(eri: &Array4<f64>, c: &Array2<f64>) -> Array4<f64> {
    let k = c.ncols();
    let mut cur = eri.to_owned().into_dyn();
    for _ in 0..4 {
        let shape: Vec<usize> = cur.shape().to_vec();
        let rest: usize = shape[1..].iter().product();
        let mat = cur
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((shape[0], rest))
            .expect("contiguous");
        let out = c.t().dot(&mat); // (k, rest)
        let mut new_shape = vec![k];
        new_shape.extend_from_slice(&shape[1..]);
        let t = out.into_shape_with_order(new_shape).expect("shape").into_dyn();
        // Rotate the transformed index to the back.
        cur = t.permuted_axes(vec![1, 2, 3, 0]).as_standard_layout().into_owned();
    }
    debug_assert_eq!(cur.shape(), &[k, k, k, k]);
    cur.into_dimensionality().expect("rank 4")
}

/// Build spin-orbital tensors from spatial `h` and chemist `(pq|rs)`.
pub fn from_spatial(scalar: f64, h: &Array2<f64>, eri: &Array4<f64>) -> SpinOrbitalHamiltonian {
    let n = h.nrows();
    let m = 2 * n;
    let mut out = SpinOrbitalHamiltonian::zeros(m);
    out.scalar = scalar;
    for p in 0..n {
        for q in 0..n {
            for sp in 0..2 {
                out.h[[2 * p + sp, 2 * q + sp]] = h[[p, q]];
            }
        }
    }
    // ⟨PQ|RS⟩ = (pr|qs) δ(σP,σR) δ(σQ,σS); v = ⟨PQ|RS⟩ - ⟨PQ|SR⟩.
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for t in 0..n {
                    let direct = eri[[p, r, q, t]];
                    if direct == 0.0 {
                        continue;
                    }
                    for s1 in 0..2 {
                        for s2 in 0..2 {
                            let (pp, qq, rr, tt) = (2 * p + s1, 2 * q + s2, 2 * r + s1, 2 * t + s2);
                            out.v[[pp, qq, rr, tt]] += direct;
                            out.v[[pp, qq, tt, rr]] -= direct;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Spin-orbital Hamiltonian from a parsed integral set.
pub fn to_spin_orbitals(ints: &IntegralSet) -> SpinOrbitalHamiltonian {
    match ints.layout {
        OrbitalLayout::Spatial => from_spatial(ints.core_energy, &ints.h, &ints.eri),
        OrbitalLayout::SpinOrbital => {
            let m = ints.n_orbitals;
            let mut out = SpinOrbitalHamiltonian::zeros(m);
            out.scalar = ints.core_energy;
            out.h.assign(&ints.h);
            for p in 0..m {
                for q in 0..m {
                    for r in 0..m {
                        for t in 0..m {
                            out.v[[p, q, r, t]] = ints.eri[[p, r, q, t]] - ints.eri[[p, t, q, r]];
                        }
                    }
                }
            }
            out
        }
    }
}

/// Inverse of [`to_spin_orbitals`]: pick the spatial layout when the tensors
/// are spin-restricted and 8-fold symmetric, otherwise the spin-orbital layout
/// with `(pr|qs) = ½⟨pq||rs⟩`.
pub fn to_integral_set(
    ham: &SpinOrbitalHamiltonian,
    n_electrons: usize,
    ms2: i32,
    allow_spin_orbital: bool,
    tol: f64,
) -> Result<IntegralSet> {
    if let Ok((h, eri)) = ham.spatial_parts(tol) {
        let n = h.nrows();
        let mut ints = IntegralSet::zeros(n, n_electrons, OrbitalLayout::Spatial);
        ints.ms2 = ms2;
        ints.core_energy = ham.scalar;
        ints.h = h;
        ints.eri = eri;
        if ints.symmetry_error() <= tol {
            return Ok(ints);
        }
        if !allow_spin_orbital {
            return Err(Error::Export(format!(
                "two-body tensor lacks 8-fold symmetry (deviation {:e}); spin-orbital export required",
                ints.symmetry_error()
            )));
        }
    } else if !allow_spin_orbital {
        return Err(Error::Export(
            "spin blocks differ; spin-orbital export required".into(),
        ));
    }
    let m = ham.m;
    let mut ints = IntegralSet::zeros(m, n_electrons, OrbitalLayout::SpinOrbital);
    ints.ms2 = ms2;
    ints.core_energy = ham.scalar;
    ints.h.assign(&ham.h);
    for p in 0..m {
        for q in 0..m {
            for r in 0..m {
                for t in 0..m {
                    ints.eri[[p, r, q, t]] = 0.5 * ham.v[[p, q, r, t]];
                }
            }
        }
    }
    Ok(ints)
}

/// Givens rotation by `theta` in the `(i, j)` plane of an `n`-dimensional space.
pub fn givens(n: usize, i: usize, j: usize, theta: f64) -> Array2<f64> {
    let mut c = Array2::eye(n);
    let (sn, cs) = theta.sin_cos();
    c[[i, i]] = cs;
    c[[j, j]] = cs;
    c[[i, j]] = -sn;
    c[[j, i]] = sn;
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_orbital_hubbard_antisymmetry() {
        let mut ints = IntegralSet::zeros(1, 2, OrbitalLayout::Spatial);
        ints.eri[[0, 0, 0, 0]] = 0.7;
        let ham = to_spin_orbitals(&ints);
        assert_eq!(ham.m, 2);
        assert_eq!(ham.v[[0, 1, 0, 1]], 0.7);
        assert_eq!(ham.v[[0, 1, 1, 0]], -0.7);
        assert_eq!(ham.v[[0, 0, 0, 0]], 0.0);
    }

    #[test]
    fn non_orthogonal_rotation_is_rejected() {
        let ham = SpinOrbitalHamiltonian::zeros(4);
        let mut c = Array2::eye(2);
        c[[0, 1]] = 0.1;
        assert!(matches!(ham.rotate_basis(&c), Err(Error::Basis(_))));
    }
}
