//! Antisymmetric tensors stored as spin/occupancy blocks.
//!
//! A rank-k tensor `c[p1..pk | q1..qk]` is antisymmetric within the upper and
//! within the lower group. Only blocks whose upper and lower class sequences
//! are each non-decreasing are stored; every other block is a signed axis
//! permutation of a stored one. Blocks that would change S_z are never stored.

use std::collections::BTreeMap;

use ndarray::{ArrayD, ArrayViewD, Axis, IxDyn};

use super::classes::{spin, Class, OrbitalClasses};

pub type BlockKey = Vec<Class>;

/// Parity (+1/-1) of a permutation given as a list.
pub(crate) fn permutation_sign(perm: &[usize]) -> f64 {
    let mut inversions = 0;
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Stable sort of one index group: returns `perm` with `sorted[i] = group[perm[i]]`.
fn sort_group(group: &[Class]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..group.len()).collect();
    perm.sort_by_key(|&i| group[i]);
    perm
}

/// Canonical key, sign and view axes for an arbitrary block key.
///
/// The block at `key` equals `sign * stored.permuted_axes(axes)`.
pub(crate) fn canonicalize(key: &[Class]) -> (BlockKey, f64, Vec<usize>) {
    let k = key.len() / 2;
    let pu = sort_group(&key[..k]);
    let pl = sort_group(&key[k..]);
    let mut canon = Vec::with_capacity(2 * k);
    canon.extend(pu.iter().map(|&i| key[i]));
    canon.extend(pl.iter().map(|&i| key[k + i]));
    let sign = permutation_sign(&pu) * permutation_sign(&pl);
    let mut axes = vec![0; 2 * k];
    for (i, &j) in pu.iter().enumerate() {
        axes[j] = i;
    }
    for (i, &j) in pl.iter().enumerate() {
        axes[k + j] = k + i;
    }
    (canon, sign, axes)
}

pub(crate) fn is_canonical(key: &[Class]) -> bool {
    let k = key.len() / 2;
    key[..k].windows(2).all(|w| w[0] <= w[1]) && key[k..].windows(2).all(|w| w[0] <= w[1])
}

pub(crate) fn conserves_spin(key: &[Class]) -> bool {
    let k = key.len() / 2;
    let up: u32 = key[..k].iter().map(|&c| spin(c) as u32).sum();
    let lo: u32 = key[k..].iter().map(|&c| spin(c) as u32).sum();
    up == lo
}

/// All non-decreasing sequences of length `len` over `classes` (sorted input).
pub(crate) fn sorted_sequences(classes: &[Class], len: usize) -> Vec<Vec<Class>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(len);
    fn rec(classes: &[Class], start: usize, len: usize, cur: &mut Vec<Class>, out: &mut Vec<Vec<Class>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for i in start..classes.len() {
            cur.push(classes[i]);
            rec(classes, i, len, cur, out);
            cur.pop();
        }
    }
    rec(classes, 0, len, &mut cur, &mut out);
    out
}

/// All sequences (with repetition, any order) of length `len` over `classes`.
pub(crate) fn all_sequences(classes: &[Class], len: usize) -> Vec<Vec<Class>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                classes.iter().map(move |&c| {
                    let mut t = s.clone();
                    t.push(c);
                    t
                })
            })
            .collect();
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockTensor {
    rank: usize,
    blocks: BTreeMap<BlockKey, ArrayD<f64>>,
}

impl BlockTensor {
    pub fn new(rank: usize) -> Self {
        BlockTensor { rank, blocks: BTreeMap::new() }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_stored(&self) -> usize {
        self.blocks.values().map(|b| b.len()).sum()
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&BlockKey, &ArrayD<f64>)> {
        self.blocks.iter()
    }

    pub fn stored(&self, canonical: &[Class]) -> Option<&ArrayD<f64>> {
        self.blocks.get(canonical)
    }

    /// Block for any key, as `(sign, view)`; `None` when the block is zero.
    pub fn get(&self, key: &[Class]) -> Option<(f64, ArrayViewD<'_, f64>)> {
        let (canon, sign, axes) = canonicalize(key);
        self.blocks.get(&canon).map(|b| (sign, b.view().permuted_axes(IxDyn(&axes))))
    }

    /// Mutable stored block, created as zeros when absent. `key` must be canonical.
    pub fn block_mut(&mut self, key: &[Class], classes: &OrbitalClasses) -> &mut ArrayD<f64> {
        debug_assert!(is_canonical(key) && key.len() == 2 * self.rank);
        self.blocks
            .entry(key.to_vec())
            .or_insert_with(|| ArrayD::zeros(IxDyn(&classes.dims(key))))
    }

    /// Gather the canonical blocks of a dense antisymmetric tensor.
    ///
    /// Entries outside spin-conserving blocks are ignored; use
    /// [`spin_violation`](crate::integrals::SpinOrbitalHamiltonian::spin_violation)
    /// style checks beforehand if they may be nonzero.
    pub fn from_dense(dense: &ArrayViewD<f64>, classes: &OrbitalClasses) -> Self {
        let rank = dense.ndim() / 2;
        let mut out = BlockTensor::new(rank);
        let nonempty = classes.nonempty();
        for up in sorted_sequences(&nonempty, rank) {
            for lo in sorted_sequences(&nonempty, rank) {
                let key: BlockKey = up.iter().chain(lo.iter()).copied().collect();
                if !conserves_spin(&key) {
                    continue;
                }
                let mut block = dense.to_owned();
                for (ax, &c) in key.iter().enumerate() {
                    block = block.select(Axis(ax), classes.members(c));
                }
                if block.iter().any(|&x| x != 0.0) {
                    out.blocks.insert(key, block);
                }
            }
        }
        out
    }

    /// Dense antisymmetric tensor over all `m` spin orbitals.
    pub fn to_dense(&self, classes: &OrbitalClasses) -> ArrayD<f64> {
        let m = classes.m();
        let k = self.rank;
        let mut out = ArrayD::zeros(IxDyn(&vec![m; 2 * k]));
        let perms = permutations(k);
        for canon in self.blocks.keys() {
            let mut seen: Vec<BlockKey> = Vec::new();
            for pu in &perms {
                for pl in &perms {
                    let key: BlockKey = pu
                        .iter()
                        .map(|&i| canon[i])
                        .chain(pl.iter().map(|&i| canon[k + i]))
                        .collect();
                    if seen.contains(&key) {
                        continue;
                    }
                    let (sign, view) = self.get(&key).expect("block present");
                    let index_lists: Vec<&[usize]> = key.iter().map(|&c| classes.members(c)).collect();
                    for (idx, &val) in view.indexed_iter() {
                        let full: Vec<usize> = (0..2 * k).map(|a| index_lists[a][idx[a]]).collect();
                        out[IxDyn(&full)] = sign * val;
                    }
                    seen.push(key);
                }
            }
        }
        out
    }

    /// `self += coeff * other`.
    pub fn add_scaled(&mut self, coeff: f64, other: &BlockTensor) {
        assert_eq!(self.rank, other.rank, "rank mismatch in add_scaled");
        if coeff == 0.0 {
            return;
        }
        for (key, block) in &other.blocks {
            match self.blocks.get_mut(key) {
                Some(b) => b.scaled_add(coeff, block),
                None => {
                    self.blocks.insert(key.clone(), block * coeff);
                }
            }
        }
    }

    pub fn scale(&mut self, coeff: f64) {
        for b in self.blocks.values_mut() {
            b.mapv_inplace(|x| x * coeff);
        }
    }

    /// Tensor of the adjoint operator: upper and lower groups swapped.
    pub fn adjoint(&self) -> BlockTensor {
        let k = self.rank;
        let axes: Vec<usize> = (k..2 * k).chain(0..k).collect();
        let mut out = BlockTensor::new(k);
        for (key, block) in &self.blocks {
            let new_key: BlockKey = key[k..].iter().chain(key[..k].iter()).copied().collect();
            let b = block.view().permuted_axes(IxDyn(&axes)).as_standard_layout().into_owned();
            out.blocks.insert(new_key, b);
        }
        out
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.blocks.values().flat_map(|b| b.iter()).fold(0.0f64, |a, &x| a.max(x.abs()))
    }

    /// Frobenius norm of the full (unpacked) antisymmetric tensor.
    pub fn frobenius_norm(&self) -> f64 {
        let k = self.rank;
        let mut acc = 0.0;
        for (key, block) in &self.blocks {
            let mult = distinct_orderings(&key[..k]) * distinct_orderings(&key[k..]);
            acc += mult as f64 * block.iter().map(|x| x * x).sum::<f64>();
        }
        acc.sqrt()
    }

    /// Largest deviation between `self` and `sign * other`, over all stored blocks of both.
    pub fn max_difference(&self, other: &BlockTensor, sign: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for (key, a) in &self.blocks {
            match other.blocks.get(key) {
                Some(b) => {
                    for (x, y) in a.iter().zip(b.iter()) {
                        worst = worst.max((x - sign * y).abs());
                    }
                }
                None => worst = worst.max(a.iter().fold(0.0f64, |m, x| m.max(x.abs()))),
            }
        }
        for (key, b) in &other.blocks {
            if !self.blocks.contains_key(key) {
                worst = worst.max(b.iter().fold(0.0f64, |m, x| m.max(x.abs())));
            }
        }
        worst
    }

    /// Remove blocks that are identically zero.
    pub fn prune(&mut self) {
        self.blocks.retain(|_, b| b.iter().any(|&x| x != 0.0));
    }
}

fn distinct_orderings(group: &[Class]) -> usize {
    let mut counts = [0usize; 4];
    for &c in group {
        counts[c as usize] += 1;
    }
    let fact = |n: usize| (1..=n).product::<usize>();
    fact(group.len()) / counts.iter().map(|&c| fact(c)).product::<usize>()
}
