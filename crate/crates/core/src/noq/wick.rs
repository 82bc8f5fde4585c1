//! Connected Wick contractions between two particle-hole normal-ordered operators.
//!
//! A rank-k operator is `(1/k!²) Σ c[p1..pk | q1..qk] {a†p1 … a†pk a_qk … a_q1}`.
//! For `[A, B]` with ranks `(ka, kb)`, a pattern contracts `x` lower indices of
//! A with upper indices of B ("particle" lines) and `y` upper indices of A with
//! lower indices of B ("hole" lines). In `AB` those lines run over virtual and
//! occupied orbitals respectively; in `BA` the roles swap. With
//!
//! ```text
//! f[P1,R2 | Q1,S2] = Σ_{e,m} a[P1,m | Q1,e] b[e,R2 | m,S2]
//! ```
//!
//! the pattern contributes `(1/(x! y!)) · 𝒜(s_AB f_AB − s_BA f_BA)` to the
//! rank `ka+kb−x−y` part, where `𝒜` sums signed shuffles of the two upper
//! groups and of the two lower groups. The signs `s_AB`, `s_BA` are the
//! parities of the operator reorderings that bring each contracted pair
//! together and leave `a†P1 a†R2 a_S2… a_Q1…`; they are derived below
//! from the operator strings rather than tabulated by hand.

use std::collections::HashMap;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayD, ArrayViewD, Ix2, IxDyn};
use rayon::prelude::*;

use super::block::{all_sequences, conserves_spin, permutation_sign, sorted_sequences, BlockKey, BlockTensor};
use super::classes::{spin, Class, OrbitalClasses};

/// Largest operator rank handled by the engine.
pub const MAX_RANK: usize = 3;

/// One row of the contraction table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContractionPattern {
    pub rank_a: usize,
    pub rank_b: usize,
    /// Lines from a lower index of A to an upper index of B.
    pub particle_lines: usize,
    /// Lines from an upper index of A to a lower index of B.
    pub hole_lines: usize,
    pub sign_ab: f64,
    pub sign_ba: f64,
    pub prefactor: f64,
}

impl ContractionPattern {
    pub fn rank_out(&self) -> usize {
        self.rank_a + self.rank_b - self.particle_lines - self.hole_lines
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Owner {
    A,
    B,
}

/// A single creation/annihilation operator in a product string.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
struct Token {
    owner: Owner,
    upper: bool,
    slot: usize,
}

fn operator_string(owner: Owner, k: usize) -> Vec<Token> {
    let mut s: Vec<Token> = (0..k).map(|slot| Token { owner, upper: true, slot }).collect();
    s.extend((0..k).rev().map(|slot| Token { owner, upper: false, slot }));
    s
}

/// Parity of the reordering from `string` to `pairs ++ a†P1 a†R2 a_S2(rev) a_Q1(rev)`.
fn reorder_sign(string: &[Token], ka: usize, kb: usize, x: usize, y: usize) -> f64 {
    let a_lo = |slot| Token { owner: Owner::A, upper: false, slot };
    let a_up = |slot| Token { owner: Owner::A, upper: true, slot };
    let b_lo = |slot| Token { owner: Owner::B, upper: false, slot };
    let b_up = |slot| Token { owner: Owner::B, upper: true, slot };
    let pos = |t: Token| string.iter().position(|&s| s == t).expect("token in string");

    let mut target: Vec<usize> = Vec::with_capacity(string.len());
    let mut push_pair = |p: usize, q: usize| {
        target.push(p.min(q));
        target.push(p.max(q));
    };
    for i in 0..x {
        push_pair(pos(a_lo(ka - x + i)), pos(b_up(i)));
    }
    for j in 0..y {
        push_pair(pos(a_up(ka - y + j)), pos(b_lo(j)));
    }
    target.extend((0..ka - y).map(|s| pos(a_up(s))));
    target.extend((x..kb).map(|s| pos(b_up(s))));
    target.extend((y..kb).rev().map(|s| pos(b_lo(s))));
    target.extend((0..ka - x).rev().map(|s| pos(a_lo(s))));
    permutation_sign(&target)
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Connected contraction patterns for `[A, B]` with the given ranks whose
/// output rank does not exceed `max_out`.
pub fn contraction_patterns(rank_a: usize, rank_b: usize, max_out: usize) -> Vec<ContractionPattern> {
    let mut out = Vec::new();
    let lim = rank_a.min(rank_b);
    for x in 0..=lim {
        for y in 0..=lim {
            if x + y == 0 || rank_a + rank_b - x - y > max_out {
                continue;
            }
            let mut ab = operator_string(Owner::A, rank_a);
            ab.extend(operator_string(Owner::B, rank_b));
            let mut ba = operator_string(Owner::B, rank_b);
            ba.extend(operator_string(Owner::A, rank_a));
            out.push(ContractionPattern {
                rank_a,
                rank_b,
                particle_lines: x,
                hole_lines: y,
                sign_ab: reorder_sign(&ab, rank_a, rank_b, x, y),
                sign_ba: reorder_sign(&ba, rank_a, rank_b, x, y),
                prefactor: 1.0 / (factorial(x) * factorial(y)) as f64,
            });
        }
    }
    out
}

/// Full contraction table for ranks up to `MAX_RANK` (diagnostics and tests).
pub fn contraction_table() -> Vec<ContractionPattern> {
    let mut out = Vec::new();
    for ka in 1..=MAX_RANK {
        for kb in 1..=MAX_RANK {
            out.extend(contraction_patterns(ka, kb, MAX_RANK));
        }
    }
    out
}

/// Scalar plus tensor parts of a commutator result, indexed by rank − 1.
pub(crate) struct Accumulator {
    pub scalar: f64,
    pub parts: Vec<BlockTensor>,
}

impl Accumulator {
    pub fn new(max_rank: usize) -> Self {
        Accumulator { scalar: 0.0, parts: (1..=max_rank).map(BlockTensor::new).collect() }
    }
}

/// All ways to interleave `n1` items of one group with the rest of a `k`-slot group:
/// `(positions of the first group, positions of the second group, sign)`.
fn shuffles(k: usize, n1: usize) -> Vec<(Vec<usize>, Vec<usize>, f64)> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << k) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let first: Vec<usize> = (0..k).filter(|&j| mask & (1 << j) != 0).collect();
        let second: Vec<usize> = (0..k).filter(|&j| mask & (1 << j) == 0).collect();
        let order: Vec<usize> = first.iter().chain(second.iter()).copied().collect();
        let sign = permutation_sign(&order);
        out.push((first, second, sign));
    }
    out
}

/// Matrix view of `block` with the given axes moved to rows, the rest to columns.
fn as_matrix(view: ArrayViewD<f64>, row_axes: &[usize], col_axes: &[usize]) -> Array2<f64> {
    let order: Vec<usize> = row_axes.iter().chain(col_axes.iter()).copied().collect();
    let shape = view.shape().to_vec();
    let rows: usize = row_axes.iter().map(|&a| shape[a]).product();
    let cols: usize = col_axes.iter().map(|&a| shape[a]).product();
    let p = view.permuted_axes(IxDyn(&order));
    let owned = p.as_standard_layout().into_owned();
    owned.into_shape_with_order((rows, cols)).expect("contiguous").into_dimensionality::<Ix2>().expect("2d")
}

/// Group-sorted class sequences of the four free index groups of `f`.
struct FreeKey {
    p1: Vec<Class>,
    q1: Vec<Class>,
    r2: Vec<Class>,
    s2: Vec<Class>,
}

fn spin_count(seq: &[Class]) -> u32 {
    seq.iter().map(|&c| spin(c) as u32).sum()
}

/// Add the contributions of one contraction pattern of `[a, b]` to `acc`.
pub(crate) fn apply_pattern(
    a: &BlockTensor,
    b: &BlockTensor,
    pat: &ContractionPattern,
    coeff: f64,
    classes: &OrbitalClasses,
    acc: &mut Accumulator,
) {
    let (ka, kb) = (pat.rank_a, pat.rank_b);
    let (x, y) = (pat.particle_lines, pat.hole_lines);
    let (np1, nq1, nr2, ns2) = (ka - y, ka - x, kb - x, kb - y);
    let k = pat.rank_out();
    let nonempty = classes.nonempty();
    let occ = classes.occupied_classes();
    let vir = classes.virtual_classes();

    // (contracted e classes, contracted m classes, overall factor) for AB and BA.
    let terms = [
        (all_sequences(&vir, x), all_sequences(&occ, y), coeff * pat.prefactor * pat.sign_ab),
        (all_sequences(&occ, x), all_sequences(&vir, y), -coeff * pat.prefactor * pat.sign_ba),
    ];

    // B as matrices [(m, e) x (R2, S2)], cached per full key.
    let mut b_cache: HashMap<BlockKey, (f64, Array2<f64>)> = HashMap::new();
    let b_row_axes: Vec<usize> = (kb..kb + y).chain(0..x).collect();
    let b_col_axes: Vec<usize> = (x..kb).chain(kb + y..2 * kb).collect();

    let r2_seqs = sorted_sequences(&nonempty, nr2);
    let s2_seqs = sorted_sequences(&nonempty, ns2);
    for (es, ms, _) in &terms {
        for e in es {
            for m in ms {
                for r2 in &r2_seqs {
                    for s2 in &s2_seqs {
                        let key: BlockKey = e.iter().chain(r2).chain(m).chain(s2).copied().collect();
                        if b_cache.contains_key(&key) || !conserves_spin(&key) {
                            continue;
                        }
                        if let Some((sign, view)) = b.get(&key) {
                            b_cache.insert(key, (sign, as_matrix(view, &b_row_axes, &b_col_axes)));
                        }
                    }
                }
            }
        }
    }
    if b_cache.is_empty() {
        return;
    }

    let a_row_axes: Vec<usize> = (0..np1).chain(ka..ka + nq1).collect();
    let a_col_axes: Vec<usize> = (np1..ka).chain(ka + nq1..2 * ka).collect();

    let mut outer: Vec<(Vec<Class>, Vec<Class>)> = Vec::new();
    for p1 in sorted_sequences(&nonempty, np1) {
        for q1 in sorted_sequences(&nonempty, nq1) {
            outer.push((p1.clone(), q1));
        }
    }

    let upper_shuffles = shuffles(k, np1);
    let lower_shuffles = shuffles(k, nq1);

    let compute = |(p1, q1): &(Vec<Class>, Vec<Class>)| -> Vec<(FreeKey, ArrayD<f64>)> {
        let rows: usize = classes.dims(p1).iter().chain(classes.dims(q1).iter()).product();
        let mut partial: Vec<((usize, usize), Array2<f64>)> = Vec::new();
        for (es, ms, factor) in &terms {
            for e in es {
                for m in ms {
                    let a_key: BlockKey = p1.iter().chain(m).chain(q1).chain(e).copied().collect();
                    if !conserves_spin(&a_key) {
                        continue;
                    }
                    let Some((sa, a_view)) = a.get(&a_key) else { continue };
                    let a_mat = as_matrix(a_view, &a_row_axes, &a_col_axes);
                    for (ir, r2) in r2_seqs.iter().enumerate() {
                        for (is, s2) in s2_seqs.iter().enumerate() {
                            if spin_count(p1) + spin_count(r2) != spin_count(q1) + spin_count(s2) {
                                continue;
                            }
                            let b_key: BlockKey = e.iter().chain(r2).chain(m).chain(s2).copied().collect();
                            let Some((sb, b_mat)) = b_cache.get(&b_key) else { continue };
                            let idx = partial.iter().position(|(t, _)| *t == (ir, is));
                            let slot = match idx {
                                Some(i) => i,
                                None => {
                                    partial.push(((ir, is), Array2::zeros((rows, b_mat.ncols()))));
                                    partial.len() - 1
                                }
                            };
                            general_mat_mul(factor * sa * sb, &a_mat, b_mat, 1.0, &mut partial[slot].1);
                        }
                    }
                }
            }
        }
        partial
            .into_iter()
            .map(|((ir, is), mat)| {
                let (r2, s2) = (r2_seqs[ir].clone(), s2_seqs[is].clone());
                let shape: Vec<usize> = classes
                    .dims(p1)
                    .into_iter()
                    .chain(classes.dims(q1))
                    .chain(classes.dims(&r2))
                    .chain(classes.dims(&s2))
                    .collect();
                let f = mat.into_shape_with_order(IxDyn(&shape)).expect("f reshape");
                (FreeKey { p1: p1.clone(), q1: q1.clone(), r2, s2 }, f)
            })
            .collect()
    };

    let batch = 4 * rayon::current_num_threads().max(1);
    for chunk in outer.chunks(batch) {
        let results: Vec<Vec<(FreeKey, ArrayD<f64>)>> = chunk.par_iter().map(compute).collect();
        for (fk, f) in results.into_iter().flatten() {
            if k == 0 {
                acc.scalar += f.sum();
                continue;
            }
            scatter(&fk, &f, k, &upper_shuffles, &lower_shuffles, classes, &mut acc.parts[k - 1]);
        }
    }
}

/// Add the shuffle-antisymmetrized `f` into the canonical blocks it reaches.
fn scatter(
    fk: &FreeKey,
    f: &ArrayD<f64>,
    k: usize,
    upper_shuffles: &[(Vec<usize>, Vec<usize>, f64)],
    lower_shuffles: &[(Vec<usize>, Vec<usize>, f64)],
    classes: &OrbitalClasses,
    out: &mut BlockTensor,
) {
    let (np1, nq1, nr2) = (fk.p1.len(), fk.q1.len(), fk.r2.len());
    for (su, ru, sgn_u) in upper_shuffles {
        let mut upper = vec![0 as Class; k];
        for (r, &j) in su.iter().enumerate() {
            upper[j] = fk.p1[r];
        }
        for (r, &j) in ru.iter().enumerate() {
            upper[j] = fk.r2[r];
        }
        if upper.windows(2).any(|w| w[0] > w[1]) {
            continue;
        }
        for (sl, rl, sgn_l) in lower_shuffles {
            let mut lower = vec![0 as Class; k];
            for (r, &j) in sl.iter().enumerate() {
                lower[j] = fk.q1[r];
            }
            for (r, &j) in rl.iter().enumerate() {
                lower[j] = fk.s2[r];
            }
            if lower.windows(2).any(|w| w[0] > w[1]) {
                continue;
            }
            let mut axes = vec![0usize; 2 * k];
            for (r, &j) in su.iter().enumerate() {
                axes[j] = r;
            }
            for (r, &j) in ru.iter().enumerate() {
                axes[j] = np1 + nq1 + r;
            }
            for (r, &j) in sl.iter().enumerate() {
                axes[k + j] = np1 + r;
            }
            for (r, &j) in rl.iter().enumerate() {
                axes[k + j] = np1 + nq1 + nr2 + r;
            }
            let key: BlockKey = upper.iter().chain(lower.iter()).copied().collect();
            let block = out.block_mut(&key, classes);
            block.scaled_add(sgn_u * sgn_l, &f.view().permuted_axes(IxDyn(&axes)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_body_with_doubles_sign() {
        // [F, T2] with one particle line gives +P(ab) f_ae t_ebij.
        let p = contraction_patterns(1, 2, 3);
        let row = p.iter().find(|r| r.particle_lines == 1 && r.hole_lines == 0).unwrap();
        assert_eq!(row.sign_ab, 1.0);
        assert_eq!(row.rank_out(), 2);
    }

    #[test]
    fn table_has_no_disconnected_rows() {
        for row in contraction_table() {
            assert!(row.particle_lines + row.hole_lines > 0);
            assert!(row.rank_out() <= MAX_RANK);
        }
    }

    #[test]
    fn full_contraction_prefactor() {
        let p = contraction_patterns(2, 2, 0);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].prefactor, 0.25);
    }
}
