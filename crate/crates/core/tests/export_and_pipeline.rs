mod common;

use std::fs;

use common::fixture;
use downfold::active::{build_sigma_ext, split_external, ActiveSpace};
use downfold::ccsd::{ccsd_solve, CcsdOptions};
use downfold::ci::DavidsonOptions;
use downfold::downfold::{DownfoldContext, Variant};
use downfold::integrals::{parse_fcidump, to_spin_orbitals, OrbitalLayout};
use downfold::pipeline::{active_ci, export_effective_hamiltonian, run_pipeline, sweep_geometries, ActiveSpec, RunConfig};
use downfold::reference::build_reference;

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("downfold-core-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn export_round_trip_preserves_the_energy() {
    let ints = parse_fcidump(fixture("lih_sto3g.fcidump")).unwrap();
    let ham = to_spin_orbitals(&ints);
    let reference = build_reference(&ham, 4).unwrap();
    let cc = ccsd_solve(&ham, &reference, &CcsdOptions::default()).unwrap();
    let active = ActiveSpace::from_orbitals(&[0, 1, 2, 3], 6, 4).unwrap();
    let sigma = build_sigma_ext(&split_external(&cc.amplitudes, &reference, &active), &reference);
    let ctx = DownfoldContext::new(&ham, &reference, &sigma, &Variant::ALL).unwrap();
    let dir = scratch("export");
    for v in Variant::ALL {
        let dh = ctx.build(v, &active).unwrap();
        let e = active_ci(&dh, &DavidsonOptions::default()).unwrap().energy;
        let path = dir.join(format!("{v}.fcidump"));
        export_effective_hamiltonian(&dh, &path).unwrap();
        let back = parse_fcidump(&path).unwrap();
        assert_eq!(back.n_electrons, 4);
        let ham_back = to_spin_orbitals(&back);
        let e_back = downfold::ci::solve_ci(&ham_back, 2, 2, &DavidsonOptions::default()).unwrap().energy;
        assert!((e - e_back).abs() < 1e-9, "{v}: {e} vs {e_back}");
        if v == Variant::A1 {
            // The bare Hamiltonian exports as the active slice of the input.
            assert_eq!(back.layout, OrbitalLayout::Spatial);
            assert!((back.core_energy - ints.core_energy).abs() < 1e-12);
            for p in 0..4 {
                for q in 0..4 {
                    assert!((back.h[[p, q]] - ints.h[[p, q]]).abs() < 1e-12);
                    for r in 0..4 {
                        for s in 0..4 {
                            assert!((back.eri[[p, q, r, s]] - ints.eri[[p, q, r, s]]).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn percentages_follow_the_signed_definition() {
    let mut cfg = RunConfig::new(fixture("h2o_sto3g.fcidump"));
    cfg.active = vec![ActiveSpec::Count(6)];
    cfg.variants = vec![Variant::A1, Variant::A3];
    let r = run_pipeline(&cfg).unwrap();
    let fci = r.fci.as_ref().unwrap().energy;
    for row in &r.rows {
        let expected = (row.energy - r.hf_energy) / (fci - r.hf_energy) * 100.0;
        assert_eq!(row.correlation_percent, Some(expected));
        assert_eq!(row.error, Some(row.energy - fci));
    }
}

#[test]
fn user_reference_energy_disables_automatic_fci() {
    let mut cfg = RunConfig::new(fixture("h2_631g.fcidump"));
    cfg.active = vec![ActiveSpec::Count(2)];
    cfg.reference_energy = Some(-1.2);
    let r = run_pipeline(&cfg).unwrap();
    assert!(r.fci.is_none());
    assert_eq!(r.reference_energy, Some(-1.2));
    assert!(r.rows.iter().all(|row| row.error == Some(row.energy + 1.2)));
}

#[test]
fn pipeline_rejects_bad_requests() {
    let mut cfg = RunConfig::new(fixture("lih_sto3g.fcidump"));
    cfg.active = vec![ActiveSpec::Count(1)];
    let r = run_pipeline(&cfg).unwrap();
    assert!(r.rows.is_empty() && r.errors.len() == 1, "too few active orbitals is a per-space failure");
    cfg.active = vec![];
    assert!(run_pipeline(&cfg).is_err());
    cfg.active = vec![ActiveSpec::Count(3)];
    cfg.variants = vec![];
    assert!(run_pipeline(&cfg).is_err());
}

#[test]
fn convergence_failure_aborts_unless_keep_going() {
    let mut cfg = RunConfig::new(fixture("lih_sto3g.fcidump"));
    cfg.active = vec![ActiveSpec::Count(6)];
    cfg.variants = vec![Variant::A1];
    cfg.davidson.max_iter = 1;
    cfg.davidson.tol = 1e-14;
    cfg.compute_fci = Some(false);
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(err.is_convergence());
    cfg.keep_going = true;
    let r = run_pipeline(&cfg).unwrap();
    assert!(r.has_convergence_failure());
    assert!(r.errors.iter().all(|e| e.convergence));
}

#[test]
fn sweep_keeps_going_past_a_corrupt_fixture() {
    let dir = scratch("sweep");
    let bad = dir.join("corrupt.fcidump");
    fs::write(&bad, "&FCI NORB=2,NELEC=2,MS2=0\n&END\n1.0 9 9 9 9\n").unwrap();
    let cfgs: Vec<RunConfig> = [fixture("h2_631g.fcidump"), bad, fixture("lih_sto3g.fcidump")]
        .into_iter()
        .map(|f| {
            let mut c = RunConfig::new(f);
            c.active = vec![ActiveSpec::Count(2)];
            c.variants = vec![Variant::A7];
            c
        })
        .collect();
    let report = sweep_geometries(&cfgs);
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.errors.len(), 1);
    assert!(sweep_geometries(&[]).rows.is_empty());
}
