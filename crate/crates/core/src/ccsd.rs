//! Spin-orbital CCSD with DIIS acceleration.
//!
//! Working equations follow the Stanton–Gauss intermediate formulation with
//! the full Fock matrix: off-diagonal Fock elements enter the `F_ae`/`F_mi`
//! intermediates and only the diagonal is used in the denominators, so
//! non-canonical orbitals (natural orbitals) are handled exactly.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array4};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrals::SpinOrbitalHamiltonian;
use crate::reference::{first_order_doubles, ReferenceFrame, DENOMINATOR_TOL};

/// Cluster amplitudes `t1[a][i]` and `t2[a][b][i][j]`, indexed by positions
/// in the reference's virtual and occupied lists.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterAmplitudes {
    pub t1: Array2<f64>,
    pub t2: Array4<f64>,
}

impl ClusterAmplitudes {
    pub fn zeros(n_occ: usize, n_vir: usize) -> Self {
        ClusterAmplitudes { t1: Array2::zeros((n_vir, n_occ)), t2: Array4::zeros((n_vir, n_vir, n_occ, n_occ)) }
    }

    pub fn n_vir(&self) -> usize {
        self.t1.nrows()
    }

    pub fn n_occ(&self) -> usize {
        self.t1.ncols()
    }

    /// Largest violation of `t2[a][b][i][j] = -t2[b][a][i][j] = -t2[a][b][j][i]`.
    pub fn antisymmetry_error(&self) -> f64 {
        let (nv, no) = (self.n_vir(), self.n_occ());
        let mut err: f64 = 0.0;
        for a in 0..nv {
            for b in 0..nv {
                for i in 0..no {
                    for j in 0..no {
                        let t = self.t2[[a, b, i, j]];
                        err = err.max((t + self.t2[[b, a, i, j]]).abs()).max((t + self.t2[[a, b, j, i]]).abs());
                    }
                }
            }
        }
        err
    }

    /// Largest amplitude that changes S_z (spin orbitals alternate α/β).
    pub fn spin_violation(&self, reference: &ReferenceFrame) -> f64 {
        let (occ, vir) = (&reference.occupied, &reference.virt);
        let mut worst: f64 = 0.0;
        for (a, &pa) in vir.iter().enumerate() {
            for (i, &pi) in occ.iter().enumerate() {
                if pa % 2 != pi % 2 {
                    worst = worst.max(self.t1[[a, i]].abs());
                }
                for (b, &pb) in vir.iter().enumerate() {
                    for (j, &pj) in occ.iter().enumerate() {
                        if (pa % 2 + pb % 2) != (pi % 2 + pj % 2) {
                            worst = worst.max(self.t2[[a, b, i, j]].abs());
                        }
                    }
                }
            }
        }
        worst
    }

    fn to_vector(&self) -> Vec<f64> {
        self.t1.iter().chain(self.t2.iter()).copied().collect()
    }

    fn with_values(&self, v: &[f64]) -> Self {
        let n1 = self.t1.len();
        let t1 = Array2::from_shape_vec(self.t1.raw_dim(), v[..n1].to_vec()).expect("t1 shape");
        let t2 = Array4::from_shape_vec(self.t2.raw_dim(), v[n1..].to_vec()).expect("t2 shape");
        ClusterAmplitudes { t1, t2 }
    }

    /// Text dump: a shape header `n_occ n_vir` followed by one
    /// `1 a i value` or `2 a b i j value` line per nonzero amplitude.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n_occ(), self.n_vir());
        for ((a, i), &v) in self.t1.indexed_iter() {
            if v != 0.0 {
                let _ = writeln!(out, "1 {a} {i} {v:e}");
            }
        }
        for ((a, b, i, j), &v) in self.t2.indexed_iter() {
            if v != 0.0 {
                let _ = writeln!(out, "2 {a} {b} {i} {j} {v:e}");
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<usize> = lines
            .next()
            .ok_or_else(|| Error::parse("empty amplitude file"))?
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| Error::parse(format!("bad amplitude header field {s:?}"))))
            .collect::<Result<_>>()?;
        let [no, nv] = header[..] else {
            return Err(Error::parse("amplitude header must be `n_occ n_vir`"));
        };
        let mut amps = ClusterAmplitudes::zeros(no, nv);
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::parse(format!("bad amplitude line {line:?}"));
            let idx = |s: &str| s.parse::<usize>().map_err(|_| bad());
            let val = f.last().ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?;
            match (f[0], f.len()) {
                ("1", 4) => {
                    let (a, i) = (idx(f[1])?, idx(f[2])?);
                    *amps.t1.get_mut([a, i]).ok_or_else(bad)? = val;
                }
                ("2", 6) => {
                    let (a, b, i, j) = (idx(f[1])?, idx(f[2])?, idx(f[3])?, idx(f[4])?);
                    *amps.t2.get_mut([a, b, i, j]).ok_or_else(bad)? = val;
                }
                _ => return Err(bad()),
            }
        }
        Ok(amps)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CcsdOptions {
    pub max_iter: usize,
    pub e_tol: f64,
    pub r_tol: f64,
    pub diis_depth: usize,
}

impl Default for CcsdOptions {
    fn default() -> Self {
        CcsdOptions { max_iter: 200, e_tol: 1e-9, r_tol: 1e-7, diis_depth: 8 }
    }
}

#[derive(Clone, Debug)]
pub struct CcsdResult {
    pub amplitudes: ClusterAmplitudes,
    pub e_corr: f64,
    pub iterations: usize,
    /// Euclidean norm of the concatenated T₁/T₂ residual at exit.
    pub residual: f64,
    /// `(energy, residual norm)` per iteration.
    pub history: Vec<(f64, f64)>,
}

/// Occupied/virtual blocks of the integrals and Fock matrix.
struct Blocks {
    no: usize,
    nv: usize,
    f_oo: Array2<f64>,
    f_vv: Array2<f64>,
    f_ov: Array2<f64>,
    oooo: Array4<f64>,
    ooov: Array4<f64>,
    oovv: Array4<f64>,
    ovvo: Array4<f64>,
    ovvv: Array4<f64>,
    vvvv: Array4<f64>,
    vvvo: Array4<f64>,
    ovoo: Array4<f64>,
}

impl Blocks {
    fn new(ham: &SpinOrbitalHamiltonian, reference: &ReferenceFrame) -> Self {
        let (o, v) = (&reference.occupied, &reference.virt);
        let f = &reference.fock;
        let sub2 = |a: &[usize], b: &[usize]| Array2::from_shape_fn((a.len(), b.len()), |(p, q)| f[[a[p], b[q]]]);
        let sub4 = |a: &[usize], b: &[usize], c: &[usize], d: &[usize]| {
            Array4::from_shape_fn((a.len(), b.len(), c.len(), d.len()), |(p, q, r, s)| {
                ham.v[[a[p], b[q], c[r], d[s]]]
            })
        };
        Blocks {
            no: o.len(),
            nv: v.len(),
            f_oo: sub2(o, o),
            f_vv: sub2(v, v),
            f_ov: sub2(o, v),
            oooo: sub4(o, o, o, o),
            ooov: sub4(o, o, o, v),
            oovv: sub4(o, o, v, v),
            ovvo: sub4(o, v, v, o),
            ovvv: sub4(o, v, v, v),
            vvvv: sub4(v, v, v, v),
            vvvo: sub4(v, v, v, o),
            ovoo: sub4(o, v, o, o),
        }
    }
}

/// First-order doubles and zero singles.
pub fn mbpt2_guess(ham: &SpinOrbitalHamiltonian, reference: &ReferenceFrame) -> Result<ClusterAmplitudes> {
    let t2 = first_order_doubles(ham, reference)?;
    let (nv, no) = (reference.virt.len(), reference.n_occ());
    Ok(ClusterAmplitudes { t1: Array2::zeros((nv, no)), t2 })
}

/// CCSD correlation energy functional.
pub fn ccsd_energy(ham: &SpinOrbitalHamiltonian, reference: &ReferenceFrame, t: &ClusterAmplitudes) -> f64 {
    let b = Blocks::new(ham, reference);
    energy(&b, t)
}

fn energy(b: &Blocks, t: &ClusterAmplitudes) -> f64 {
    let mut e = 0.0;
    for i in 0..b.no {
        for a in 0..b.nv {
            e += b.f_ov[[i, a]] * t.t1[[a, i]];
        }
    }
    for i in 0..b.no {
        for j in 0..b.no {
            for a in 0..b.nv {
                for bb in 0..b.nv {
                    let v = b.oovv[[i, j, a, bb]];
                    e += 0.25 * v * t.t2[[a, bb, i, j]] + 0.5 * v * t.t1[[a, i]] * t.t1[[bb, j]];
                }
            }
        }
    }
    e
}

/// Residuals `RHS − D·t` of the T₁ and T₂ equations.
pub fn ccsd_residuals(
    ham: &SpinOrbitalHamiltonian,
    reference: &ReferenceFrame,
    t: &ClusterAmplitudes,
) -> (Array2<f64>, Array4<f64>) {
    let b = Blocks::new(ham, reference);
    residuals(&b, t)
}

fn residuals(bk: &Blocks, t: &ClusterAmplitudes) -> (Array2<f64>, Array4<f64>) {
    let (no, nv) = (bk.no, bk.nv);
    let t1 = &t.t1;
    let t2 = &t.t2;
    // τ̃ and τ
    let mut tau_t = t2.clone();
    let mut tau = t2.clone();
    for a in 0..nv {
        for b in 0..nv {
            for i in 0..no {
                for j in 0..no {
                    let x = t1[[a, i]] * t1[[b, j]] - t1[[b, i]] * t1[[a, j]];
                    tau_t[[a, b, i, j]] += 0.5 * x;
                    tau[[a, b, i, j]] += x;
                }
            }
        }
    }

    // One-body intermediates.
    let mut f_ae = Array2::<f64>::zeros((nv, nv));
    for a in 0..nv {
        for e in 0..nv {
            let mut acc = if a == e { 0.0 } else { bk.f_vv[[a, e]] };
            for m in 0..no {
                acc -= 0.5 * bk.f_ov[[m, e]] * t1[[a, m]];
                for f in 0..nv {
                    acc += t1[[f, m]] * bk.ovvv[[m, a, f, e]];
                    for n in 0..no {
                        acc -= 0.5 * tau_t[[a, f, m, n]] * bk.oovv[[m, n, e, f]];
                    }
                }
            }
            f_ae[[a, e]] = acc;
        }
    }
    let mut f_mi = Array2::<f64>::zeros((no, no));
    for m in 0..no {
        for i in 0..no {
            let mut acc = if m == i { 0.0 } else { bk.f_oo[[m, i]] };
            for e in 0..nv {
                acc += 0.5 * t1[[e, i]] * bk.f_ov[[m, e]];
                for n in 0..no {
                    acc += t1[[e, n]] * bk.ooov[[m, n, i, e]];
                    for f in 0..nv {
                        acc += 0.5 * tau_t[[e, f, i, n]] * bk.oovv[[m, n, e, f]];
                    }
                }
            }
            f_mi[[m, i]] = acc;
        }
    }
    let mut f_me = bk.f_ov.clone();
    for m in 0..no {
        for e in 0..nv {
            for n in 0..no {
                for f in 0..nv {
                    f_me[[m, e]] += t1[[f, n]] * bk.oovv[[m, n, e, f]];
                }
            }
        }
    }

    // Two-body intermediates.
    let mut w_mnij = bk.oooo.clone();
    for m in 0..no {
        for n in 0..no {
            for i in 0..no {
                for j in 0..no {
                    let mut acc = 0.0;
                    for e in 0..nv {
                        acc += t1[[e, j]] * bk.ooov[[m, n, i, e]] - t1[[e, i]] * bk.ooov[[m, n, j, e]];
                        for f in 0..nv {
                            acc += 0.25 * tau[[e, f, i, j]] * bk.oovv[[m, n, e, f]];
                        }
                    }
                    w_mnij[[m, n, i, j]] += acc;
                }
            }
        }
    }

    // W_abef, contracted directly with τ to avoid a second nv⁴ array.
    let mut w_abef = bk.vvvv.clone();
    {
        let tau_mat = tau.view().into_shape_with_order((nv * nv, no * no)).expect("tau");
        let oovv_mat = bk.oovv.view().into_shape_with_order((no * no, nv * nv)).expect("oovv");
        let mut w_mat = w_abef.view_mut().into_shape_with_order((nv * nv, nv * nv)).expect("w");
        ndarray::linalg::general_mat_mul(0.25, &tau_mat, &oovv_mat, 1.0, &mut w_mat);
    }
    for a in 0..nv {
        for b in 0..nv {
            for e in 0..nv {
                for f in 0..nv {
                    let mut acc = 0.0;
                    for m in 0..no {
                        // -P(ab) t_mb <am||ef>, with <am||ef> = -<ma||ef>
                        acc += t1[[b, m]] * bk.ovvv[[m, a, e, f]] - t1[[a, m]] * bk.ovvv[[m, b, e, f]];
                    }
                    w_abef[[a, b, e, f]] += acc;
                }
            }
        }
    }

    let mut w_mbej = bk.ovvo.clone();
    for m in 0..no {
        for b in 0..nv {
            for e in 0..nv {
                for j in 0..no {
                    let mut acc = 0.0;
                    for f in 0..nv {
                        acc += t1[[f, j]] * bk.ovvv[[m, b, e, f]];
                    }
                    for n in 0..no {
                        // <mn||ej> = -<mn||je>
                        acc += t1[[b, n]] * bk.ooov[[m, n, j, e]];
                        for f in 0..nv {
                            acc -= (0.5 * t2[[f, b, j, n]] + t1[[f, j]] * t1[[b, n]]) * bk.oovv[[m, n, e, f]];
                        }
                    }
                    w_mbej[[m, b, e, j]] += acc;
                }
            }
        }
    }

    // T1 equation.
    let mut r1 = Array2::<f64>::zeros((nv, no));
    for a in 0..nv {
        for i in 0..no {
            let mut acc = bk.f_ov[[i, a]];
            for e in 0..nv {
                acc += t1[[e, i]] * f_ae[[a, e]];
            }
            for m in 0..no {
                acc -= t1[[a, m]] * f_mi[[m, i]];
                for e in 0..nv {
                    acc += t2[[a, e, i, m]] * f_me[[m, e]];
                    // -Σ t_nf <na||if>, with <na||if> = -<na||fi>
                    acc -= t1[[e, m]] * -bk.ovvo[[m, a, e, i]];
                    for f in 0..nv {
                        acc -= 0.5 * t2[[e, f, i, m]] * bk.ovvv[[m, a, e, f]];
                    }
                    for n in 0..no {
                        // <nm||ei> = -<nm||ie>
                        acc -= 0.5 * t2[[a, e, m, n]] * -bk.ooov[[n, m, i, e]];
                    }
                }
            }
            r1[[a, i]] = acc - (bk.f_oo[[i, i]] - bk.f_vv[[a, a]]) * t1[[a, i]];
        }
    }

    // T2 equation.
    let mut fbe = f_ae.clone();
    for b in 0..nv {
        for e in 0..nv {
            for m in 0..no {
                fbe[[b, e]] -= 0.5 * t1[[b, m]] * f_me[[m, e]];
            }
        }
    }
    let mut fmj = f_mi.clone();
    for m in 0..no {
        for j in 0..no {
            for e in 0..nv {
                fmj[[m, j]] += 0.5 * t1[[e, j]] * f_me[[m, e]];
            }
        }
    }

    // Unsymmetrized pieces: x gets P(ab), y gets P(ij), z gets P(ij)P(ab).
    let mut x = Array4::<f64>::zeros((nv, nv, no, no));
    let mut y = Array4::<f64>::zeros((nv, nv, no, no));
    let mut z = Array4::<f64>::zeros((nv, nv, no, no));
    let mut r2 = Array4::<f64>::zeros((nv, nv, no, no));
    for a in 0..nv {
        for b in 0..nv {
            for i in 0..no {
                for j in 0..no {
                    let mut base = bk.oovv[[i, j, a, b]];
                    for m in 0..no {
                        for n in 0..no {
                            base += 0.5 * tau[[a, b, m, n]] * w_mnij[[m, n, i, j]];
                        }
                    }
                    r2[[a, b, i, j]] = base;

                    let mut xa = 0.0;
                    for e in 0..nv {
                        xa += t2[[a, e, i, j]] * fbe[[b, e]];
                    }
                    for m in 0..no {
                        // -Σ_m t_ma <mb||ij>, antisymmetrized in ab below
                        xa -= t1[[a, m]] * bk.ovoo[[m, b, i, j]];
                    }
                    x[[a, b, i, j]] = xa;

                    let mut ya = 0.0;
                    for m in 0..no {
                        ya -= t2[[a, b, i, m]] * fmj[[m, j]];
                    }
                    for e in 0..nv {
                        ya += t1[[e, i]] * bk.vvvo[[a, b, e, j]];
                    }
                    y[[a, b, i, j]] = ya;

                    let mut za = 0.0;
                    for m in 0..no {
                        for e in 0..nv {
                            za += t2[[a, e, i, m]] * w_mbej[[m, b, e, j]] - t1[[e, i]] * t1[[a, m]] * bk.ovvo[[m, b, e, j]];
                        }
                    }
                    z[[a, b, i, j]] = za;
                }
            }
        }
    }
    // ½ Σ_ef τ_ijef W_abef as a GEMM.
    {
        let w_mat = w_abef.view().into_shape_with_order((nv * nv, nv * nv)).expect("w");
        let tau_mat = tau.view().into_shape_with_order((nv * nv, no * no)).expect("tau");
        let mut r_mat = r2.view_mut().into_shape_with_order((nv * nv, no * no)).expect("r2");
        ndarray::linalg::general_mat_mul(0.5, &w_mat, &tau_mat, 1.0, &mut r_mat);
    }
    for a in 0..nv {
        for b in 0..nv {
            for i in 0..no {
                for j in 0..no {
                    let px = x[[a, b, i, j]] - x[[b, a, i, j]];
                    let py = y[[a, b, i, j]] - y[[a, b, j, i]];
                    let pz = z[[a, b, i, j]] - z[[b, a, i, j]] - z[[a, b, j, i]] + z[[b, a, j, i]];
                    let d = bk.f_oo[[i, i]] + bk.f_oo[[j, j]] - bk.f_vv[[a, a]] - bk.f_vv[[b, b]];
                    r2[[a, b, i, j]] += px + py + pz - d * t2[[a, b, i, j]];
                }
            }
        }
    }
    (r1, r2)
}

/// Solve CCSD from the MBPT(2) guess.
pub fn ccsd_solve(ham: &SpinOrbitalHamiltonian, reference: &ReferenceFrame, opts: &CcsdOptions) -> Result<CcsdResult> {
    let guess = mbpt2_guess(ham, reference)?;
    ccsd_solve_from(ham, reference, opts, guess)
}

/// Solve CCSD from the given starting amplitudes.
pub fn ccsd_solve_from(
    ham: &SpinOrbitalHamiltonian,
    reference: &ReferenceFrame,
    opts: &CcsdOptions,
    start: ClusterAmplitudes,
) -> Result<CcsdResult> {
    let bk = Blocks::new(ham, reference);
    let (no, nv) = (bk.no, bk.nv);
    let d1 = Array2::from_shape_fn((nv, no), |(a, i)| bk.f_oo[[i, i]] - bk.f_vv[[a, a]]);
    let d2 = Array4::from_shape_fn((nv, nv, no, no), |(a, b, i, j)| {
        bk.f_oo[[i, i]] + bk.f_oo[[j, j]] - bk.f_vv[[a, a]] - bk.f_vv[[b, b]]
    });
    for (i, &pi) in reference.occupied.iter().enumerate() {
        for (a, &pa) in reference.virt.iter().enumerate() {
            if pi % 2 == pa % 2 && d1[[a, i]].abs() < DENOMINATOR_TOL {
                return Err(Error::Degeneracy { what: format!("singles denominator ({pi} -> {pa})"), value: d1[[a, i]] });
            }
        }
    }

    let mut t = start;
    let mut e_old = energy(&bk, &t);
    let mut history = Vec::new();
    let mut diis = Diis::new(opts.diis_depth);
    for iter in 1..=opts.max_iter {
        let (r1, r2) = residuals(&bk, &t);
        let rnorm = (r1.iter().chain(r2.iter()).map(|x| x * x).sum::<f64>()).sqrt();
        let e = energy(&bk, &t);
        history.push((e, rnorm));
        if rnorm <= opts.r_tol && (e - e_old).abs() <= opts.e_tol && iter > 1 {
            return Ok(CcsdResult { amplitudes: t, e_corr: e, iterations: iter - 1, residual: rnorm, history });
        }
        e_old = e;
        let mut next = t.clone();
        for ((a, i), v) in next.t1.indexed_iter_mut() {
            if d1[[a, i]].abs() >= DENOMINATOR_TOL {
                *v += r1[[a, i]] / d1[[a, i]];
            }
        }
        for ((a, b, i, j), v) in next.t2.indexed_iter_mut() {
            let d = d2[[a, b, i, j]];
            if d.abs() >= DENOMINATOR_TOL {
                *v += r2[[a, b, i, j]] / d;
            } else if r2[[a, b, i, j]].abs() > DENOMINATOR_TOL {
                return Err(Error::Degeneracy { what: "doubles denominator".into(), value: d });
            }
        }
        let err: Vec<f64> = r1.iter().chain(r2.iter()).copied().collect();
        let vec = next.to_vector();
        t = match diis.extrapolate(vec, err) {
            Some(v) => next.with_values(&v),
            None => next,
        };
        debug_assert!(t.antisymmetry_error() < 1e-10);
    }
    let (r1, r2) = residuals(&bk, &t);
    let rnorm = (r1.iter().chain(r2.iter()).map(|x| x * x).sum::<f64>()).sqrt();
    Err(Error::Convergence { stage: "CCSD".into(), iterations: opts.max_iter, residual: rnorm })
}

/// Pulay DIIS over amplitude vectors with residual error vectors.
struct Diis {
    depth: usize,
    vectors: Vec<Vec<f64>>,
    errors: Vec<Vec<f64>>,
}

impl Diis {
    fn new(depth: usize) -> Self {
        Diis { depth, vectors: Vec::new(), errors: Vec::new() }
    }

    fn extrapolate(&mut self, vector: Vec<f64>, error: Vec<f64>) -> Option<Vec<f64>> {
        if self.depth == 0 {
            return None;
        }
        if self.vectors.len() == self.depth {
            self.vectors.remove(0);
            self.errors.remove(0);
        }
        self.vectors.push(vector);
        self.errors.push(error);
        let n = self.vectors.len();
        if n < 2 {
            return None;
        }
        let mut b = DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..=i {
                let dot: f64 = self.errors[i].iter().zip(&self.errors[j]).map(|(x, y)| x * y).sum();
                b[(i, j)] = dot;
                b[(j, i)] = dot;
            }
            b[(i, n)] = -1.0;
            b[(n, i)] = -1.0;
        }
        let sv = b.view((0, 0), (n, n)).singular_values();
        let cond = sv.max() / sv.min().max(f64::MIN_POSITIVE);
        if cond > 1e12 {
            // Linear dependence: restart from the newest vector.
            let (v, e) = (self.vectors.pop().unwrap(), self.errors.pop().unwrap());
            self.vectors = vec![v];
            self.errors = vec![e];
            return None;
        }
        let mut rhs = DVector::<f64>::zeros(n + 1);
        rhs[n] = -1.0;
        let c = b.lu().solve(&rhs)?;
        let len = self.vectors[0].len();
        let mut out = vec![0.0; len];
        for (k, v) in self.vectors.iter().enumerate() {
            for (o, x) in out.iter_mut().zip(v) {
                *o += c[k] * x;
            }
        }
        Some(out)
    }
}
