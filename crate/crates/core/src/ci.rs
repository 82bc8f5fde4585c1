//! Determinant CI over an active space with a Davidson eigensolver.
//!
//! Determinants are pairs of α and β occupation strings over the active
//! spatial orbitals. Creation operators are ordered with all α before all β
//! (each group by ascending orbital), which makes the α–β interaction a plain
//! product of string excitation operators.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrals::SpinOrbitalHamiltonian;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Determinant {
    pub alpha: u64,
    pub beta: u64,
}

impl Determinant {
    /// Occupation over interleaved spin orbitals (bit `2p+σ`).
    pub fn spin_orbital_bits(&self, n_orb: usize) -> u128 {
        let mut out = 0u128;
        for p in 0..n_orb {
            if self.alpha >> p & 1 == 1 {
                out |= 1 << (2 * p);
            }
            if self.beta >> p & 1 == 1 {
                out |= 1 << (2 * p + 1);
            }
        }
        out
    }

    /// Sign relating the α-first creation order to the interleaved order.
    pub fn interleaved_sign(&self, n_orb: usize) -> f64 {
        // Each β electron must pass the α electrons of higher orbitals.
        let mut swaps = 0;
        for q in 0..n_orb {
            if self.beta >> q & 1 == 1 {
                swaps += (self.alpha >> (q + 1)).count_ones();
            }
        }
        if swaps % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn excitation_level(&self, other: &Determinant) -> u32 {
        ((self.alpha ^ other.alpha).count_ones() + (self.beta ^ other.beta).count_ones()) / 2
    }
}

/// Strings of `k` electrons in `n` orbitals, in lexicographic order of their
/// occupied-index lists (the lowest orbitals first).
pub fn strings(n: usize, k: usize) -> Vec<u64> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<u64>) {
        if cur.len() == k {
            out.push(cur.iter().fold(0u64, |a, &p| a | (1 << p)));
            return;
        }
        for p in start..n {
            if n - p < k - cur.len() {
                break;
            }
            cur.push(p);
            rec(n, k, p + 1, cur, out);
            cur.pop();
        }
    }
    rec(n, k, 0, &mut cur, &mut out);
    out
}

/// All determinants with `n_alpha` and `n_beta` electrons, α-major, with the
/// reference (lowest orbitals filled) first.
pub fn enumerate_basis(n_orb: usize, n_alpha: usize, n_beta: usize) -> Result<Vec<Determinant>> {
    if n_orb > 64 || n_alpha > n_orb || n_beta > n_orb {
        return Err(Error::domain(format!(
            "cannot place ({n_alpha}α, {n_beta}β) electrons in {n_orb} orbitals"
        )));
    }
    let sa = strings(n_orb, n_alpha);
    let sb = strings(n_orb, n_beta);
    Ok(sa.iter().flat_map(|&a| sb.iter().map(move |&b| Determinant { alpha: a, beta: b })).collect())
}

/// Sign of `a†p a_q` applied to a bit string in its own order (`q` occupied).
fn single_sign(s: u64, p: usize, q: usize) -> f64 {
    let below = |x: u64, r: usize| (x & ((1u64 << r) - 1)).count_ones();
    let mut n = below(s, q);
    let t = s & !(1 << q);
    n += below(t, p);
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Position of spin orbital `s = 2p+σ` in the α-first creation order.
#[inline]
fn position(s: usize, n_orb: usize) -> usize {
    (s & 1) * n_orb + s / 2
}

/// Apply `ops` (rightmost first, `(spin orbital, create)`) to an α-first bitmask.
fn apply(ops: &[(usize, bool)], mask: u128, n_orb: usize) -> Option<(f64, u128)> {
    let mut state = mask;
    let mut sign = 1.0;
    for &(s, create) in ops.iter().rev() {
        let pos = position(s, n_orb);
        let bit = 1u128 << pos;
        if (state & bit != 0) == create {
            return None;
        }
        if (state & (bit - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        state ^= bit;
    }
    Some((sign, state))
}

fn alpha_first_mask(d: &Determinant, n_orb: usize) -> u128 {
    d.alpha as u128 | (d.beta as u128) << n_orb
}

/// `⟨D1|H|D2⟩` by the Slater–Condon rules, α-first sign convention.
pub fn matrix_element(d1: &Determinant, d2: &Determinant, ham: &SpinOrbitalHamiltonian) -> Result<f64> {
    let n_orb = ham.m / 2;
    if d1.alpha.count_ones() != d2.alpha.count_ones() || d1.beta.count_ones() != d2.beta.count_ones() {
        return Err(Error::domain("determinants belong to different (Nα, Nβ) sectors"));
    }
    let b1 = d1.spin_orbital_bits(n_orb);
    let b2 = d2.spin_orbital_bits(n_orb);
    let occ2: Vec<usize> = (0..ham.m).filter(|&s| b2 >> s & 1 == 1).collect();
    let only1: Vec<usize> = (0..ham.m).filter(|&s| b1 >> s & 1 == 1 && b2 >> s & 1 == 0).collect();
    let only2: Vec<usize> = (0..ham.m).filter(|&s| b2 >> s & 1 == 1 && b1 >> s & 1 == 0).collect();
    let m2 = alpha_first_mask(d2, n_orb);
    let (h, v) = (&ham.h, &ham.v);
    Ok(match only1.len() {
        0 => {
            let mut e = ham.scalar;
            for &i in &occ2 {
                e += h[[i, i]];
                for &j in &occ2 {
                    e += 0.5 * v[[i, j, i, j]];
                }
            }
            e
        }
        1 => {
            let (p, q) = (only1[0], only2[0]);
            let (sign, _) = apply(&[(p, true), (q, false)], m2, n_orb).expect("single excitation");
            let mut x = h[[p, q]];
            for &j in &occ2 {
                if j != q {
                    x += v[[p, j, q, j]];
                }
            }
            sign * x
        }
        2 => {
            let (p, q, r, s) = (only1[0], only1[1], only2[0], only2[1]);
            let (sign, _) = apply(&[(p, true), (q, true), (s, false), (r, false)], m2, n_orb).expect("double excitation");
            sign * v[[p, q, r, s]]
        }
        _ => 0.0,
    })
}

/// Determinant-space Hamiltonian with a factorized α/β matvec.
pub struct CiHamiltonian {
    n_orb: usize,
    scalar: f64,
    alpha: Vec<u64>,
    beta: Vec<u64>,
    /// Same-spin parts as dense string-space matrices.
    h_alpha: DMatrix<f64>,
    h_beta: DMatrix<f64>,
    /// Single excitations `(target, p, q, sign)` with `⟨target|E_pq|source⟩ = sign`.
    exc_alpha: Vec<Vec<(usize, usize, usize, f64)>>,
    exc_beta: Vec<Vec<(usize, usize, usize, f64)>>,
    /// `w[(p,r),(q,s)] = v[pα,qβ,rα,sβ]`.
    w: DMatrix<f64>,
    diagonal: Vec<f64>,
}

fn excitation_lists(strs: &[u64], n_orb: usize) -> Vec<Vec<(usize, usize, usize, f64)>> {
    let index: HashMap<u64, usize> = strs.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    strs.iter()
        .map(|&s| {
            let mut out = Vec::new();
            for q in 0..n_orb {
                if s >> q & 1 == 0 {
                    continue;
                }
                for p in 0..n_orb {
                    if p != q && s >> p & 1 == 1 {
                        continue;
                    }
                    let t = (s & !(1 << q)) | (1 << p);
                    out.push((index[&t], p, q, single_sign(s, p, q)));
                }
            }
            out
        })
        .collect()
}

/// String-space matrix of `Σ h_pq E_pq + ¼ Σ v_pqrs (E_pr E_qs − δ_qr E_ps)` for one spin.
fn same_spin_matrix(
    strs: &[u64],
    exc: &[Vec<(usize, usize, usize, f64)>],
    h: &Array2<f64>,
    v: &dyn Fn(usize, usize, usize, usize) -> f64,
    n_orb: usize,
) -> DMatrix<f64> {
    let n = strs.len();
    let mut out = DMatrix::zeros(n, n);
    for (j, list) in exc.iter().enumerate() {
        for &(i, p, q, sign) in list {
            out[(i, j)] += sign * h[[p, q]];
            // −¼ δ_qr E_ps term: Σ_{p,s} (Σ_q v_pqqs) E_ps
            let mut k = 0.0;
            for r in 0..n_orb {
                k += v(p, r, r, q);
            }
            out[(i, j)] -= 0.25 * sign * k;
            // ¼ v_pqrs E_pr E_qs: apply E_qs first (this list gives E_pr for p,q here).
            for &(i2, p2, q2, sign2) in &exc[i] {
                // E_{p2 q2} E_{p q} |j⟩
                out[(i2, j)] += 0.25 * sign * sign2 * v(p2, p, q2, q);
            }
        }
    }
    out
}

impl CiHamiltonian {
    /// Hamiltonian over spin orbitals `0..m` (interleaved) in the sector
    /// `(n_alpha, n_beta)`.
    pub fn new(ham: &SpinOrbitalHamiltonian, n_alpha: usize, n_beta: usize) -> Result<Self> {
        let n_orb = ham.m / 2;
        enumerate_basis(n_orb, n_alpha, n_beta)?;
        let alpha = strings(n_orb, n_alpha);
        let beta = strings(n_orb, n_beta);
        let exc_alpha = excitation_lists(&alpha, n_orb);
        let exc_beta = excitation_lists(&beta, n_orb);
        let ha = Array2::from_shape_fn((n_orb, n_orb), |(p, q)| ham.h[[2 * p, 2 * q]]);
        let hb = Array2::from_shape_fn((n_orb, n_orb), |(p, q)| ham.h[[2 * p + 1, 2 * q + 1]]);
        let va = |p: usize, q: usize, r: usize, s: usize| ham.v[[2 * p, 2 * q, 2 * r, 2 * s]];
        let vb = |p: usize, q: usize, r: usize, s: usize| ham.v[[2 * p + 1, 2 * q + 1, 2 * r + 1, 2 * s + 1]];
        let h_alpha = same_spin_matrix(&alpha, &exc_alpha, &ha, &va, n_orb);
        let h_beta = same_spin_matrix(&beta, &exc_beta, &hb, &vb, n_orb);
        let n2 = n_orb * n_orb;
        let w = DMatrix::from_fn(n2, n2, |pr, qs| {
            let (p, r, q, s) = (pr / n_orb, pr % n_orb, qs / n_orb, qs % n_orb);
            ham.v[[2 * p, 2 * q + 1, 2 * r, 2 * s + 1]]
        });
        let mut diagonal = Vec::with_capacity(alpha.len() * beta.len());
        for (ia, &sa) in alpha.iter().enumerate() {
            for (ib, &sb) in beta.iter().enumerate() {
                let mut d = ham.scalar + h_alpha[(ia, ia)] + h_beta[(ib, ib)];
                for p in (0..n_orb).filter(|&p| sa >> p & 1 == 1) {
                    for q in (0..n_orb).filter(|&q| sb >> q & 1 == 1) {
                        d += w[(p * n_orb + p, q * n_orb + q)];
                    }
                }
                diagonal.push(d);
            }
        }
        Ok(CiHamiltonian {
            n_orb,
            scalar: ham.scalar,
            alpha,
            beta,
            h_alpha,
            h_beta,
            exc_alpha,
            exc_beta,
            w,
            diagonal,
        })
    }

    pub fn dimension(&self) -> usize {
        self.alpha.len() * self.beta.len()
    }

    pub fn basis(&self) -> Vec<Determinant> {
        self.alpha
            .iter()
            .flat_map(|&a| self.beta.iter().map(move |&b| Determinant { alpha: a, beta: b }))
            .collect()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// `σ = H c`, with `c` laid out α-major.
    pub fn apply(&self, c: &[f64]) -> Vec<f64> {
        let (na, nb) = (self.alpha.len(), self.beta.len());
        let n = self.n_orb;
        // Row-major (α, β) matrix; nalgebra is column-major so view it as (β, α).
        let cm = DMatrix::from_column_slice(nb, na, c);
        let mut sig = &self.h_beta * &cm + &cm * self.h_alpha.transpose();
        sig += &cm * self.scalar;

        // α–β: σ(Iα, Iβ) += Σ_{(Jα,p,r)} sign Σ_{qs} w[pr,qs] Σ_Jβ ⟨Iβ|E_qs|Jβ⟩ c(Jα, Jβ).
        // g[Jα] is the (qs × Iβ) matrix Σ_Jβ ⟨Iβ|E_qs|Jβ⟩ c(Jα, Jβ).
        let g: Vec<DMatrix<f64>> = (0..na)
            .into_par_iter()
            .map(|ja| {
                let mut gm = DMatrix::zeros(n * n, nb);
                for (jb, list) in self.exc_beta.iter().enumerate() {
                    let cv = cm[(jb, ja)];
                    if cv == 0.0 {
                        continue;
                    }
                    for &(ib, q, s, sign) in list {
                        gm[(q * n + s, ib)] += sign * cv;
                    }
                }
                gm
            })
            .collect();
        // Gather by target α string.
        let mut incoming: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); na];
        for (ja, list) in self.exc_alpha.iter().enumerate() {
            for &(ia, p, r, sign) in list {
                incoming[ia].push((ja, p * n + r, sign));
            }
        }
        let cols: Vec<DVector<f64>> = (0..na)
            .into_par_iter()
            .map(|ia| {
                let mut acc = DVector::zeros(nb);
                for &(ja, pr, sign) in &incoming[ia] {
                    let wrow = self.w.row(pr);
                    acc += (wrow * &g[ja]).transpose() * sign;
                }
                acc
            })
            .collect();
        for (ia, col) in cols.into_iter().enumerate() {
            let mut target = sig.column_mut(ia);
            target += col;
        }
        sig.as_slice().to_vec()
    }

    /// Dense matrix (small spaces only).
    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.dimension();
        let mut out = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply(&e);
            e[j] = 0.0;
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DavidsonOptions {
    pub tol: f64,
    pub max_subspace: usize,
    pub max_iter: usize,
    pub n_roots: usize,
}

impl Default for DavidsonOptions {
    fn default() -> Self {
        DavidsonOptions { tol: 1e-9, max_subspace: 30, max_iter: 200, n_roots: 1 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CiResult {
    /// Lowest eigenvalue.
    pub energy: f64,
    /// All converged roots, ascending (length `n_roots`).
    pub roots: Vec<f64>,
    #[serde(skip)]
    pub eigenvector: Vec<f64>,
    pub n_determinants: usize,
    pub iterations: usize,
    /// `‖Hv − Ev‖` of the lowest root.
    pub residual: f64,
}

/// Spaces up to this size are diagonalized densely.
pub const DENSE_LIMIT: usize = 64;

/// Lowest eigenpairs of `op` by Davidson iteration with a diagonal preconditioner.
pub fn davidson(
    apply: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    diagonal: &[f64],
    opts: &DavidsonOptions,
) -> Result<CiResult> {
    let n = diagonal.len();
    if n == 0 {
        return Err(Error::domain("empty determinant space"));
    }
    let n_roots = opts.n_roots.clamp(1, n);
    if n <= DENSE_LIMIT.max(opts.max_subspace) {
        return dense_lowest(apply, n, n_roots);
    }
    let max_sub = opts.max_subspace.max(2 * n_roots + 2);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diagonal[a].total_cmp(&diagonal[b]).then(a.cmp(&b)));
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut images: Vec<DVector<f64>> = Vec::new();
    for &k in order.iter().take(n_roots) {
        let mut v = DVector::zeros(n);
        v[k] = 1.0;
        basis.push(v);
    }
    for v in &basis {
        images.push(DVector::from_vec(apply(v.as_slice())));
    }

    let mut restarts_without_progress = 0;
    let (mut last_iter, mut last_worst) = (0, f64::INFINITY);
    for iter in 1..=opts.max_iter {
        last_iter = iter;
        let k = basis.len();
        let sub = DMatrix::from_fn(k, k, |i, j| 0.5 * (basis[i].dot(&images[j]) + basis[j].dot(&images[i])));
        let eig = sub.symmetric_eigen();
        let mut idx: Vec<usize> = (0..k).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let mut ritz = Vec::with_capacity(n_roots);
        let mut new_dirs = Vec::new();
        let mut worst: f64 = 0.0;
        for &col in idx.iter().take(n_roots) {
            let y = eig.eigenvectors.column(col);
            let theta = eig.eigenvalues[col];
            let mut x = DVector::zeros(n);
            let mut hx = DVector::zeros(n);
            for j in 0..k {
                x.axpy(y[j], &basis[j], 1.0);
                hx.axpy(y[j], &images[j], 1.0);
            }
            let res = &hx - &x * theta;
            let rn = res.norm();
            worst = worst.max(rn);
            if rn > opts.tol {
                let mut t = res.clone();
                for i in 0..n {
                    let d = diagonal[i] - theta;
                    t[i] /= if d.abs() < 1e-8 { 1e-8f64.copysign(d) } else { d };
                }
                new_dirs.push(t);
            }
            ritz.push((theta, x, rn));
        }
        last_worst = worst;
        if worst <= opts.tol {
            let (energy, x, _) = ritz[0].clone();
            let hx = DVector::from_vec(apply(x.as_slice()));
            let residual = (&hx - &x * energy).norm();
            return Ok(CiResult {
                energy,
                roots: ritz.iter().map(|r| r.0).collect(),
                eigenvector: x.as_slice().to_vec(),
                n_determinants: n,
                iterations: iter,
                residual,
            });
        }

        if basis.len() + new_dirs.len() > max_sub {
            // Collapse onto the current Ritz vectors.
            basis = ritz.iter().map(|r| r.1.clone()).collect();
            orthonormalize(&mut basis);
            images = basis.iter().map(|v| DVector::from_vec(apply(v.as_slice()))).collect();
        }
        let mut added = 0;
        for t in new_dirs {
            if let Some(t) = orthogonal_direction(t, &basis) {
                images.push(DVector::from_vec(apply(t.as_slice())));
                basis.push(t);
                added += 1;
            }
        }
        if added == 0 {
            // No new directions survived orthogonalization: reseed with unit vectors.
            restarts_without_progress += 1;
            if restarts_without_progress > 3 {
                break;
            }
            basis = ritz.iter().map(|r| r.1.clone()).collect();
            for &kk in order.iter().skip(n_roots).take(restarts_without_progress * n_roots) {
                let mut v = DVector::zeros(n);
                v[kk] = 1.0;
                basis.push(v);
            }
            orthonormalize(&mut basis);
            images = basis.iter().map(|v| DVector::from_vec(apply(v.as_slice()))).collect();
        }
        if iter == opts.max_iter {
            return Err(Error::Convergence { stage: "Davidson".into(), iterations: iter, residual: worst });
        }
    }
    Err(Error::Convergence { stage: "Davidson".into(), iterations: last_iter, residual: last_worst })
}

/// Smallest fraction of a new direction that must survive projection; below
/// this the direction is numerically inside the subspace.
const DEPENDENCE_TOL: f64 = 1e-6;

/// `t` orthogonalized against `basis` and normalized, or `None` if it is
/// numerically dependent.
fn orthogonal_direction(mut t: DVector<f64>, basis: &[DVector<f64>]) -> Option<DVector<f64>> {
    let n0 = t.norm();
    if n0 == 0.0 || !n0.is_finite() {
        return None;
    }
    t /= n0;
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&t);
            t.axpy(-c, b, 1.0);
        }
    }
    let nt = t.norm();
    (nt > DEPENDENCE_TOL).then(|| t / nt)
}

fn orthonormalize(vs: &mut Vec<DVector<f64>>) {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for v in vs.drain(..) {
        if let Some(t) = orthogonal_direction(v, &out) {
            out.push(t);
        }
    }
    *vs = out;
}

fn dense_lowest(apply: &(dyn Fn(&[f64]) -> Vec<f64> + Sync), n: usize, n_roots: usize) -> Result<CiResult> {
    let mut mat = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = apply(&e);
        e[j] = 0.0;
        for i in 0..n {
            mat[(i, j)] = col[i];
        }
    }
    let sym = (&mat + mat.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let x: DVector<f64> = eig.eigenvectors.column(idx[0]).into_owned();
    let energy = eig.eigenvalues[idx[0]];
    let residual = (&mat * &x - &x * energy).norm();
    Ok(CiResult {
        energy,
        roots: idx.iter().take(n_roots).map(|&i| eig.eigenvalues[i]).collect(),
        eigenvector: x.as_slice().to_vec(),
        n_determinants: n,
        iterations: 1,
        residual,
    })
}

/// Lowest eigenvalue(s) of `ham` over all determinants with the given
/// electron counts.
pub fn solve_ci(ham: &SpinOrbitalHamiltonian, n_alpha: usize, n_beta: usize, opts: &DavidsonOptions) -> Result<CiResult> {
    let ci = CiHamiltonian::new(ham, n_alpha, n_beta)?;
    let apply = |c: &[f64]| ci.apply(c);
    davidson(&apply, ci.diagonal(), opts)
}

/// Eigenvector dump: one `alpha_bits beta_bits coefficient` line per determinant
/// above `tol` in magnitude, bits written as binary strings (orbital 0 rightmost).
pub fn dump_eigenvector(ci: &CiHamiltonian, vector: &[f64], tol: f64) -> String {
    let width = ci.n_orb.max(1);
    ci.basis()
        .iter()
        .zip(vector)
        .filter(|(_, c)| c.abs() > tol)
        .map(|(d, c)| format!("{:0w$b} {:0w$b} {c:.12e}\n", d.alpha, d.beta, w = width))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn string_order_and_counts() {
        assert_eq!(strings(4, 2), vec![0b0011, 0b0101, 0b1001, 0b0110, 0b1010, 0b1100]);
        assert_eq!(enumerate_basis(5, 2, 2).unwrap().len(), 100);
        assert_eq!(enumerate_basis(14, 2, 2).unwrap().len(), 8281);
        assert_eq!(enumerate_basis(1, 1, 1).unwrap().len(), 1);
        assert!(enumerate_basis(2, 3, 0).is_err());
    }

    #[test]
    fn reference_first() {
        let b = enumerate_basis(6, 3, 2).unwrap();
        assert_eq!(b[0], Determinant { alpha: 0b111, beta: 0b11 });
    }

    #[test]
    fn interleaved_sign_example() {
        // α-first a†0α a†1α a†0β vs interleaved a†0α a†0β a†1α: one swap.
        let d = Determinant { alpha: 0b11, beta: 0b01 };
        assert_eq!(d.interleaved_sign(2), -1.0);
    }
}
