mod common;

use common::{fixture, random_hamiltonian, random_amplitudes};
use downfold::ccsd::{ccsd_residuals, ccsd_solve, ccsd_solve_from, mbpt2_guess, ClusterAmplitudes, CcsdOptions};
use downfold::ci::{solve_ci, DavidsonOptions};
use downfold::integrals::{parse_fcidump, to_spin_orbitals};
use downfold::reference::build_reference;

const TIGHT: CcsdOptions = CcsdOptions { max_iter: 300, e_tol: 1e-12, r_tol: 1e-10, diis_depth: 8 };

fn residual_norm(r: &(ndarray::Array2<f64>, ndarray::Array4<f64>)) -> f64 {
    (r.0.iter().map(|x| x * x).sum::<f64>() + r.1.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

#[test]
fn two_electron_ccsd_is_exact() {
    let ints = parse_fcidump(fixture("h2_631g.fcidump")).unwrap();
    let mut hams = vec![to_spin_orbitals(&ints)];
    hams.extend((0..4).map(|s| random_hamiltonian(3 + s as usize % 3, 200 + s, 0.1)));
    for ham in hams {
        let reference = build_reference(&ham, 2).unwrap();
        let cc = ccsd_solve(&ham, &reference, &TIGHT).unwrap();
        let fci = solve_ci(&ham, 1, 1, &DavidsonOptions::default()).unwrap();
        let e = reference.e_ref + cc.e_corr;
        assert!((e - fci.energy).abs() < 1e-8, "{e} vs {}", fci.energy);
    }
}

#[test]
fn beryllium_ccsd_is_close_to_fci() {
    let ints = parse_fcidump(fixture("be_ccpvdz.fcidump")).unwrap();
    let ham = to_spin_orbitals(&ints);
    let reference = build_reference(&ham, 4).unwrap();
    let cc = ccsd_solve(&ham, &reference, &CcsdOptions::default()).unwrap();
    assert!((reference.e_ref - -14.57234).abs() < 1e-4);
    assert!((reference.e_ref + cc.e_corr - -14.61741).abs() < 2e-4);
    assert!(cc.amplitudes.antisymmetry_error() < 1e-12);
    assert!(cc.amplitudes.spin_violation(&reference) < 1e-12);
}

#[test]
fn mbpt2_guess_beats_zero_guess() {
    let ints = parse_fcidump(fixture("lih_sto3g.fcidump")).unwrap();
    let ham = to_spin_orbitals(&ints);
    let reference = build_reference(&ham, 4).unwrap();
    let guess = mbpt2_guess(&ham, &reference).unwrap();
    let zero = ClusterAmplitudes::zeros(reference.n_occ(), reference.virt.len());
    let r_guess = residual_norm(&ccsd_residuals(&ham, &reference, &guess));
    let r_zero = residual_norm(&ccsd_residuals(&ham, &reference, &zero));
    assert!(r_guess < r_zero, "{r_guess} vs {r_zero}");
}

#[test]
fn converged_amplitudes_do_not_depend_on_the_start() {
    let ham = random_hamiltonian(5, 11, 0.1);
    let reference = build_reference(&ham, 4).unwrap();
    let a = ccsd_solve(&ham, &reference, &TIGHT).unwrap();
    let start = random_amplitudes(&reference, 12, 0.01);
    let b = ccsd_solve_from(&ham, &reference, &TIGHT, start).unwrap();
    assert!((a.e_corr - b.e_corr).abs() < 1e-10);
    let diff = (&a.amplitudes.t2 - &b.amplitudes.t2).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(diff < 1e-8);
    assert!(residual_norm(&ccsd_residuals(&ham, &reference, &a.amplitudes)) < 1e-9);
}

#[test]
fn iteration_limit_is_a_convergence_error() {
    let ints = parse_fcidump(fixture("lih_sto3g.fcidump")).unwrap();
    let ham = to_spin_orbitals(&ints);
    let reference = build_reference(&ham, 4).unwrap();
    let err = ccsd_solve(&ham, &reference, &CcsdOptions { max_iter: 1, ..Default::default() }).unwrap_err();
    assert!(err.is_convergence(), "{err}");
}
