#![allow(dead_code)]

use std::path::PathBuf;

use downfold::active::{build_sigma_ext, SigmaExt};
use downfold::ccsd::ClusterAmplitudes;
use downfold::integrals::{from_spatial, SpinOrbitalHamiltonian};
use downfold::reference::ReferenceFrame;
use ndarray::{Array2, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random real Hamiltonian with the full 8-fold integral symmetry.
/// Diagonal one-body terms increase with the orbital index so the lowest
/// orbitals make a sensible reference.
pub fn random_spatial(n: usize, seed: u64, coupling: f64) -> (Array2<f64>, Array4<f64>) {
    let mut r = rng(seed);
    let mut h = Array2::zeros((n, n));
    for p in 0..n {
        h[[p, p]] = -2.0 + 1.0 * p as f64 + r.random_range(-0.1..0.1);
        for q in 0..p {
            let x = coupling * r.random_range(-1.0..1.0);
            h[[p, q]] = x;
            h[[q, p]] = x;
        }
    }
    let mut eri = Array4::zeros((n, n, n, n));
    for p in 0..n {
        for q in 0..=p {
            for s in 0..n {
                for t in 0..=s {
                    if p * (p + 1) / 2 + q < s * (s + 1) / 2 + t {
                        continue;
                    }
                    let x = if p == q && s == t {
                        0.3 + 0.2 * r.random_range(0.0..1.0)
                    } else {
                        coupling * r.random_range(-1.0..1.0)
                    };
                    for (a, b, c, d) in [(p, q, s, t), (q, p, s, t), (p, q, t, s), (q, p, t, s)] {
                        eri[[a, b, c, d]] = x;
                        eri[[c, d, a, b]] = x;
                    }
                }
            }
        }
    }
    (h, eri)
}

pub fn random_hamiltonian(n: usize, seed: u64, coupling: f64) -> SpinOrbitalHamiltonian {
    let (h, eri) = random_spatial(n, seed, coupling);
    let scalar = rng(seed ^ 0xabc).random_range(-1.0..1.0);
    from_spatial(scalar, &h, &eri)
}

/// Random spin-conserving, antisymmetric amplitudes on a reference.
pub fn random_amplitudes(reference: &ReferenceFrame, seed: u64, scale: f64) -> ClusterAmplitudes {
    let mut r = rng(seed);
    let (occ, vir) = (&reference.occupied, &reference.virt);
    let mut t = ClusterAmplitudes::zeros(occ.len(), vir.len());
    for a in 0..vir.len() {
        for i in 0..occ.len() {
            if vir[a] % 2 == occ[i] % 2 {
                t.t1[[a, i]] = scale * r.random_range(-1.0..1.0);
            }
        }
    }
    for a in 0..vir.len() {
        for b in 0..a {
            for i in 0..occ.len() {
                for j in 0..i {
                    let (sa, sb, si, sj) = (vir[a] % 2, vir[b] % 2, occ[i] % 2, occ[j] % 2);
                    let direct = sa == si && sb == sj;
                    let cross = sa == sj && sb == si;
                    if !(direct || cross) {
                        continue;
                    }
                    let x = scale * r.random_range(-1.0..1.0);
                    t.t2[[a, b, i, j]] = x;
                    t.t2[[b, a, i, j]] = -x;
                    t.t2[[a, b, j, i]] = -x;
                    t.t2[[b, a, j, i]] = x;
                }
            }
        }
    }
    t
}

pub fn random_sigma(reference: &ReferenceFrame, seed: u64, scale: f64) -> SigmaExt {
    build_sigma_ext(&random_amplitudes(reference, seed, scale), reference)
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}
