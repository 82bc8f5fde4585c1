mod common;

use std::time::Instant;

use common::{random_hamiltonian, random_sigma};
use downfold::downfold::{DownfoldContext, Variant};
use downfold::noq::{commutator, normal_order, ph_to_physical_vacuum, physical_to_ph, Symmetry};
use downfold::oracle::{downfolded_matrix, materialize_normal_ordered, materialize_physical, truncate_ph_rank};
use downfold::reference::build_reference;

const TOL: f64 = 1e-9;

/// Every variant agrees with its matrix-level construction on the full Fock
/// space, for two-electron systems on 4–10 spin orbitals.
#[test]
fn variants_match_matrix_construction() {
    let start = Instant::now();
    let mut worst = [0.0f64; 7];
    let mut systems = 0;
    for seed in 0..24u64 {
        let n_spatial = 2 + (seed as usize % 4);
        let m = 2 * n_spatial;
        let ham = random_hamiltonian(n_spatial, 100 + seed, 0.15);
        let reference = build_reference(&ham, 2).unwrap();
        let sigma = random_sigma(&reference, 500 + seed, 0.2);
        let ctx = DownfoldContext::new(&ham, &reference, &sigma, &Variant::ALL).unwrap();
        let all: Vec<usize> = (0..=m).collect();
        for (k, v) in Variant::ALL.into_iter().enumerate() {
            let tensor = materialize_normal_ordered(&ctx.transformed(v).unwrap(), &all).unwrap();
            let sigma_op = sigma.to_operator(ctx.hamiltonian().classes().clone());
            let matrix = downfolded_matrix(v, &ham, 2, &sigma_op).unwrap();
            let diff = tensor.max_difference(&matrix);
            worst[k] = worst[k].max(diff);
            assert!(diff < TOL, "{v} seed {seed} (m = {m}): max difference {diff:e}");
        }
        systems += 1;
    }
    assert!(systems >= 20);
    println!("worst differences per variant: {worst:?} in {:.1?}", start.elapsed());
}

/// A nonzero σ changes every variant except A1.
#[test]
fn variants_are_not_trivial() {
    let ham = random_hamiltonian(3, 7, 0.15);
    let reference = build_reference(&ham, 2).unwrap();
    let sigma = random_sigma(&reference, 8, 0.2);
    let ctx = DownfoldContext::new(&ham, &reference, &sigma, &Variant::ALL).unwrap();
    let all: Vec<usize> = (0..=6).collect();
    let bare = materialize_physical(&ham, &all).unwrap();
    for v in Variant::ALL {
        let t = materialize_normal_ordered(&ctx.transformed(v).unwrap(), &all).unwrap();
        let d = t.max_difference(&bare);
        if v == Variant::A1 {
            assert!(d < 1e-12);
        } else {
            assert!(d > 1e-3, "{v} equals the bare Hamiltonian");
        }
    }
}

#[test]
fn commutators_match_dense_matrices() {
    for seed in 0..6u64 {
        let n_electrons = 1 + seed as usize % 5;
        let ham = random_hamiltonian(3, 40 + seed, 0.2);
        let reference = build_reference(&ham, n_electrons).unwrap();
        let h = normal_order(&ham, &reference);
        let sigma = random_sigma(&reference, 60 + seed, 0.3).to_operator(h.classes().clone());
        let all: Vec<usize> = (0..=6).collect();
        let hm = materialize_normal_ordered(&h, &all).unwrap();
        let sm = materialize_normal_ordered(&sigma, &all).unwrap();

        // [H, σ] is at most three-body, so nothing is lost.
        let c = commutator(&h, &sigma, 3).unwrap();
        assert_eq!(c.symmetry, Symmetry::Hermitian);
        let cm = materialize_normal_ordered(&c, &all).unwrap();
        let diff = cm.max_difference(&hm.commutator(&sm));
        assert!(diff < 1e-10, "[H,σ] with {n_electrons} electrons: {diff:e}");

        // [[H, σ], σ] reaches four-body terms; compare rank by rank.
        let occupied = (1u64 << n_electrons) - 1;
        let exact = cm.commutator(&sm);
        for max_rank in [2, 3] {
            let cc = materialize_normal_ordered(&commutator(&c, &sigma, max_rank).unwrap(), &all).unwrap();
            let reference_matrix = truncate_ph_rank(&exact, occupied, max_rank).unwrap();
            let diff = cc.max_difference(&reference_matrix);
            assert!(diff < 1e-10, "[[H,σ],σ] rank {max_rank}, {n_electrons} electrons: {diff:e}");
        }

        // Anti-Hermitian with anti-Hermitian gives anti-Hermitian.
        let ss = commutator(&sigma, &sigma.scaled(0.5).adjoint(), 3).unwrap();
        assert_eq!(ss.symmetry, Symmetry::AntiHermitian);
        let ssm = materialize_normal_ordered(&ss, &all).unwrap();
        assert!(ssm.max_difference(&sm.commutator(&sm.scaled(-0.5))) < 1e-10);
    }
}

#[test]
fn normal_ordering_round_trip() {
    for (n_spatial, n_electrons, seed) in [(2, 1, 1u64), (3, 2, 2), (3, 3, 3), (4, 4, 4), (4, 6, 5)] {
        let ham = random_hamiltonian(n_spatial, seed, 0.2);
        let reference = build_reference(&ham, n_electrons).unwrap();
        let h = normal_order(&ham, &reference);
        assert!((h.scalar - reference.e_ref).abs() < 1e-12);

        let back = ph_to_physical_vacuum(&h).unwrap();
        assert!((back.scalar - ham.scalar).abs() < 1e-12);
        assert!((&back.h - &ham.h).iter().all(|x| x.abs() < 1e-12));
        assert!((&back.v - &ham.v).iter().all(|x| x.abs() < 1e-12));

        let again = physical_to_ph(&back, h.classes().clone(), Symmetry::Hermitian);
        assert!((again.scalar - h.scalar).abs() < 1e-12);
        assert!((&again.c1() - &h.c1()).iter().all(|x| x.abs() < 1e-12));

        let m = 2 * n_spatial;
        if m <= 8 {
            let all: Vec<usize> = (0..=m).collect();
            let a = materialize_physical(&ham, &all).unwrap();
            let b = materialize_normal_ordered(&h, &all).unwrap();
            assert!(a.max_difference(&b) < 1e-11);
        }
    }
}

#[test]
fn transformed_hamiltonians_are_hermitian() {
    let ham = random_hamiltonian(4, 77, 0.2);
    let reference = build_reference(&ham, 4).unwrap();
    let sigma = random_sigma(&reference, 78, 0.2);
    let ctx = DownfoldContext::new(&ham, &reference, &sigma, &Variant::ALL).unwrap();
    for v in Variant::ALL {
        let t = ctx.transformed(v).unwrap();
        assert!(t.symmetry_error() < 1e-12, "{v}: {}", t.symmetry_error());
        let phys = ph_to_physical_vacuum(&t).unwrap();
        assert!(phys.hermiticity_error() < 1e-12);
        assert!(phys.antisymmetry_error() < 1e-12);
        assert!(phys.spin_violation() < 1e-12);
    }
}
