//! End-to-end runs: integrals → reference → CCSD → σ_ext → variants → CAS-CI.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::active::{build_sigma_ext, select_active, split_external, ActiveSpace, OrbitalOrdering};
use crate::ccsd::{ccsd_solve, CcsdOptions, CcsdResult};
use crate::ci::{enumerate_basis, solve_ci, CiResult, DavidsonOptions};
use crate::downfold::{DownfoldContext, DownfoldedHamiltonian, Provenance, TermReport, Variant};
use crate::error::{Error, Result};
use crate::integrals::{parse_fcidump, to_integral_set, to_spin_orbitals, write_fcidump, SpinOrbitalHamiltonian};
use crate::reference::{build_reference, natural_orbital_hamiltonian, ReferenceFrame};

/// Full-space CI is attempted automatically up to this many determinants.
pub const AUTO_FCI_LIMIT: usize = 250_000;

/// Tolerance for deciding whether exported tensors are spin-restricted.
pub const EXPORT_SYMMETRY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitalMode {
    Rhf,
    Mp2Natural,
}

impl FromStr for OrbitalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rhf" => Ok(OrbitalMode::Rhf),
            "mp2no" | "mp2-natural" | "mp2" => Ok(OrbitalMode::Mp2Natural),
            _ => Err(Error::parse(format!("unknown orbital mode {s:?} (expected rhf or mp2no)"))),
        }
    }
}

impl OrbitalMode {
    fn label(self) -> &'static str {
        match self {
            OrbitalMode::Rhf => "rhf",
            OrbitalMode::Mp2Natural => "mp2no",
        }
    }
}

/// An active space given by size or by explicit spatial-orbital list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum ActiveSpec {
    Count(usize),
    List(Vec<usize>),
}

impl FromStr for ActiveSpec {
    type Err = Error;

    /// `5` is a size; `0,1,2,5` (or `[0,1,2,5]`) is a list.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('[').trim_end_matches(']');
        let parse = |x: &str| {
            x.trim().parse::<usize>().map_err(|_| Error::parse(format!("bad active-space entry {x:?}")))
        };
        if t.contains(',') {
            Ok(ActiveSpec::List(t.split(',').filter(|x| !x.trim().is_empty()).map(parse).collect::<Result<_>>()?))
        } else {
            Ok(ActiveSpec::Count(parse(t)?))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Text,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "text" | "table" | "text-table" => Ok(OutputFormat::Text),
            _ => Err(Error::parse(format!("unknown output format {s:?}"))),
        }
    }
}

impl OutputFormat {
    /// Guess from a file extension, defaulting to JSON.
    pub fn from_path(path: &Path) -> OutputFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => OutputFormat::Csv,
            Some("txt") => OutputFormat::Text,
            _ => OutputFormat::Json,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub fcidump: PathBuf,
    pub orbitals: OrbitalMode,
    pub active: Vec<ActiveSpec>,
    pub variants: Vec<Variant>,
    /// Overrides the electron count of the FCIDUMP header.
    pub n_electrons: Option<usize>,
    pub ccsd: CcsdOptions,
    pub davidson: DavidsonOptions,
    /// Exact energy used for errors and correlation percentages. When absent,
    /// full-space CI supplies it if the space is small enough.
    pub reference_energy: Option<f64>,
    pub compute_fci: Option<bool>,
    pub keep_going: bool,
    pub export_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

impl RunConfig {
    pub fn new(fcidump: impl Into<PathBuf>) -> Self {
        RunConfig {
            fcidump: fcidump.into(),
            orbitals: OrbitalMode::Rhf,
            active: Vec::new(),
            variants: Variant::ALL.to_vec(),
            n_electrons: None,
            ccsd: CcsdOptions::default(),
            davidson: DavidsonOptions::default(),
            reference_energy: None,
            compute_fci: None,
            keep_going: false,
            export_dir: None,
            out: None,
            format: None,
        }
    }

    /// Parse the plain-text config format: one `key = value` per line, `#`
    /// comments, relative paths resolved against `base`.
    ///
    /// Keys: `fcidump`, `orbitals`, `active` (repeatable; a size or a comma
    /// list), `variants` (comma list), `nelec`, `reference-energy`, `fci`
    /// (true/false), `keep-going`, `export-heff`, `out`, `format`, `roots`,
    /// `ccsd-max-iter`, `ccsd-e-tol`, `ccsd-r-tol`, `diis-depth`,
    /// `davidson-tol`, `davidson-max-iter`, `davidson-max-subspace`.
    pub fn from_key_value(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = RunConfig::new(PathBuf::new());
        let mut have_fcidump = false;
        let mut variants_set = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(format!("config line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim().replace('_', "-"), value.trim());
            let bad = |what: &str| Error::parse(format!("config line {}: bad {what} {value:?}", lineno + 1));
            let path = |v: &str| {
                let p = PathBuf::from(v);
                if p.is_relative() {
                    base.join(p)
                } else {
                    p
                }
            };
            match key.as_str() {
                "fcidump" => {
                    cfg.fcidump = path(value);
                    have_fcidump = true;
                }
                "orbitals" => cfg.orbitals = value.parse()?,
                "active" => cfg.active.push(value.parse()?),
                "variants" => {
                    cfg.variants = parse_variants(value)?;
                    variants_set = true;
                }
                "nelec" => cfg.n_electrons = Some(value.parse().map_err(|_| bad("electron count"))?),
                "reference-energy" => cfg.reference_energy = Some(value.parse().map_err(|_| bad("energy"))?),
                "fci" => cfg.compute_fci = Some(parse_bool(value).ok_or_else(|| bad("boolean"))?),
                "keep-going" => cfg.keep_going = parse_bool(value).ok_or_else(|| bad("boolean"))?,
                "export-heff" => cfg.export_dir = Some(path(value)),
                "out" => cfg.out = Some(path(value)),
                "format" => cfg.format = Some(value.parse()?),
                "roots" => cfg.davidson.n_roots = value.parse().map_err(|_| bad("root count"))?,
                "ccsd-max-iter" => cfg.ccsd.max_iter = value.parse().map_err(|_| bad("count"))?,
                "ccsd-e-tol" => cfg.ccsd.e_tol = value.parse().map_err(|_| bad("tolerance"))?,
                "ccsd-r-tol" => cfg.ccsd.r_tol = value.parse().map_err(|_| bad("tolerance"))?,
                "diis-depth" => cfg.ccsd.diis_depth = value.parse().map_err(|_| bad("count"))?,
                "davidson-tol" => cfg.davidson.tol = value.parse().map_err(|_| bad("tolerance"))?,
                "davidson-max-iter" => cfg.davidson.max_iter = value.parse().map_err(|_| bad("count"))?,
                "davidson-max-subspace" => cfg.davidson.max_subspace = value.parse().map_err(|_| bad("count"))?,
                other => return Err(Error::parse(format!("config line {}: unknown key {other:?}", lineno + 1))),
            }
        }
        if !have_fcidump {
            return Err(Error::parse("config has no fcidump entry"));
        }
        if variants_set && cfg.variants.is_empty() {
            return Err(Error::parse("config lists no variants"));
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::from(e).at_stage(format!("config {}", path.display())))?;
        RunConfig::from_key_value(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::domain("no variants requested"));
        }
        if self.active.is_empty() {
            return Err(Error::domain("no active space requested"));
        }
        Ok(())
    }
}

pub fn parse_variants(s: &str) -> Result<Vec<Variant>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part.eq_ignore_ascii_case("all") {
            out.extend(Variant::ALL);
        } else {
            out.push(part.parse()?);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Some(true),
        "0" | "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemInfo {
    pub fcidump: String,
    pub n_orbitals: usize,
    pub n_electrons: usize,
    pub orbitals: OrbitalMode,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CcsdRecord {
    pub e_corr: f64,
    pub e_total: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CiRecord {
    pub energy: f64,
    pub n_determinants: usize,
    pub iterations: usize,
    pub residual: f64,
    pub roots: Vec<f64>,
}

impl From<&CiResult> for CiRecord {
    fn from(r: &CiResult) -> Self {
        CiRecord {
            energy: r.energy,
            n_determinants: r.n_determinants,
            iterations: r.iterations,
            residual: r.residual,
            roots: r.roots.clone(),
        }
    }
}

/// One (variant, active space) result.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariantRow {
    pub variant: Variant,
    pub n_active: usize,
    pub active_orbitals: Vec<usize>,
    pub energy: f64,
    /// `energy − reference`, when a reference energy is known.
    pub error: Option<f64>,
    /// `(energy − E_HF)/(reference − E_HF)·100`.
    pub correlation_percent: Option<f64>,
    pub ci: CiRecord,
    pub hermiticity_error: f64,
    pub antisymmetry_error: f64,
    pub terms: TermReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorRow {
    pub stage: String,
    pub variant: Option<Variant>,
    pub n_active: Option<usize>,
    pub message: String,
    pub convergence: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Timings {
    pub ccsd_s: f64,
    pub fci_s: f64,
    pub variants_s: f64,
    pub total_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub system: SystemInfo,
    pub hf_energy: f64,
    pub ccsd: CcsdRecord,
    pub fci: Option<CiRecord>,
    /// Energy used for errors and percentages (user value, else full CI).
    pub reference_energy: Option<f64>,
    pub rows: Vec<VariantRow>,
    pub errors: Vec<ErrorRow>,
    /// Wall-clock timings; excluded from the serialized report so identical
    /// runs produce identical output.
    #[serde(skip)]
    pub timings: Timings,
}

impl RunReport {
    pub fn row(&self, variant: Variant, n_active: usize) -> Option<&VariantRow> {
        self.rows.iter().find(|r| r.variant == variant && r.n_active == n_active)
    }

    pub fn has_convergence_failure(&self) -> bool {
        self.errors.iter().any(|e| e.convergence)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,n_active,energy,error,correlation_percent,n_determinants\n");
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.12}")).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.12},{},{},{}",
                r.variant,
                r.n_active,
                r.energy,
                opt(r.error),
                opt(r.correlation_percent),
                r.ci.n_determinants
            );
        }
        out
    }

    /// Energies at 1e-5 Ha, one row per variant and one column per active space.
    pub fn to_text(&self) -> String {
        let mut sizes: Vec<usize> = self.rows.iter().map(|r| r.n_active).collect();
        sizes.sort_unstable();
        sizes.dedup();
        let mut variants: Vec<Variant> = self.rows.iter().map(|r| r.variant).collect();
        variants.sort();
        variants.dedup();
        let mut out = String::new();
        let _ = writeln!(out, "system      {}", self.system.fcidump);
        let _ = writeln!(out, "HF energy   {:.5}", self.hf_energy);
        let _ = writeln!(out, "CCSD energy {:.5}", self.ccsd.e_total);
        if let Some(f) = &self.fci {
            let _ = writeln!(out, "FCI energy  {:.5}", f.energy);
        }
        if let Some(e) = self.reference_energy {
            let _ = writeln!(out, "reference   {e:.5}");
        }
        let _ = write!(out, "\n{:<8}", "variant");
        for n in &sizes {
            let _ = write!(out, "{:>14}", format!("{n} orbitals"));
        }
        out.push('\n');
        for v in variants {
            let _ = write!(out, "{:<8}", v.to_string());
            for &n in &sizes {
                match self.row(v, n) {
                    Some(r) => {
                        let _ = write!(out, "{:>14.5}", r.energy);
                    }
                    None => {
                        let _ = write!(out, "{:>14}", "-");
                    }
                }
            }
            out.push('\n');
        }
        if self.rows.iter().any(|r| r.correlation_percent.is_some()) {
            let _ = writeln!(out, "\ncorrelation energy recovered (%)");
            for r in &self.rows {
                if let Some(p) = r.correlation_percent {
                    let _ = writeln!(out, "{:<8}{:>4} orbitals {p:>8.1}", r.variant.to_string(), r.n_active);
                }
            }
        }
        for e in &self.errors {
            let _ = writeln!(out, "error [{}]: {}", e.stage, e.message);
        }
        out
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => self.to_json(),
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Text => self.to_text(),
        }
    }
}

/// Loaded integrals in the chosen orbital basis with their reference.
pub struct PreparedSystem {
    pub ham: SpinOrbitalHamiltonian,
    pub reference: ReferenceFrame,
    pub n_electrons: usize,
    /// Natural occupations (MP2 natural orbitals only).
    pub occupations: Option<Vec<f64>>,
}

pub fn prepare_system(cfg: &RunConfig) -> Result<PreparedSystem> {
    let ints = parse_fcidump(&cfg.fcidump).map_err(|e| e.at_stage("fcidump"))?;
    let n_electrons = cfg.n_electrons.unwrap_or(ints.n_electrons);
    if !n_electrons.is_multiple_of(2) || ints.ms2 != 0 {
        return Err(Error::unsupported("only closed-shell (even electron count, MS2 = 0) runs are supported"));
    }
    let ham = to_spin_orbitals(&ints);
    let (ham, occupations) = match cfg.orbitals {
        OrbitalMode::Rhf => (ham, None),
        OrbitalMode::Mp2Natural => {
            let (rotated, mp2) = natural_orbital_hamiltonian(&ham, n_electrons).map_err(|e| e.at_stage("mp2"))?;
            (rotated, Some(mp2.natural_occupations))
        }
    };
    let reference = build_reference(&ham, n_electrons).map_err(|e| e.at_stage("reference"))?;
    Ok(PreparedSystem { ham, reference, n_electrons, occupations })
}

pub fn resolve_active(spec: &ActiveSpec, sys: &PreparedSystem, mode: OrbitalMode) -> Result<ActiveSpace> {
    match spec {
        ActiveSpec::Count(n) => {
            let ordering = match mode {
                OrbitalMode::Rhf => OrbitalOrdering::RhfEnergy,
                OrbitalMode::Mp2Natural => OrbitalOrdering::NaturalOccupation,
            };
            select_active(ordering, *n, &sys.reference, sys.occupations.as_deref())
        }
        ActiveSpec::List(list) => ActiveSpace::from_orbitals(list, sys.ham.m / 2, sys.n_electrons),
    }
}

/// Ground state of an active-space Hamiltonian in the closed-shell sector.
pub fn active_ci(dh: &DownfoldedHamiltonian, opts: &DavidsonOptions) -> Result<CiResult> {
    let n_half = dh.active.n_active_electrons / 2;
    solve_ci(&dh.as_hamiltonian(), n_half, n_half, opts)
}

/// Write an active-space Hamiltonian as FCIDUMP (spatial layout when the
/// tensors allow it, spin-orbital layout otherwise).
pub fn export_effective_hamiltonian(dh: &DownfoldedHamiltonian, path: &Path) -> Result<()> {
    let ints = to_integral_set(&dh.as_hamiltonian(), dh.active.n_active_electrons, 0, true, EXPORT_SYMMETRY_TOL)?;
    write_fcidump(path, &ints, 1e-14)
}

fn error_row(stage: &str, variant: Option<Variant>, n_active: Option<usize>, e: &Error) -> ErrorRow {
    ErrorRow { stage: stage.to_string(), variant, n_active, message: e.to_string(), convergence: e.is_convergence() }
}

/// A failed grid point: its report row and the error itself.
struct Failure {
    row: ErrorRow,
    error: Error,
}

fn failure(stage: &str, variant: Option<Variant>, n_active: Option<usize>, e: Error) -> Failure {
    let row = error_row(stage, variant, n_active, &e);
    Failure { row, error: e.at_stage(stage) }
}

fn percentage(energy: f64, hf: f64, reference: Option<f64>) -> Option<f64> {
    reference.and_then(|r| {
        let denom = r - hf;
        (denom.abs() > 1e-12).then(|| (energy - hf) / denom * 100.0)
    })
}

/// Results for one active space, or the error that stopped it.
type SpaceOutcome = (Vec<VariantRow>, Vec<Failure>);

fn run_space(
    cfg: &RunConfig,
    sys: &PreparedSystem,
    ccsd: &CcsdResult,
    spec: &ActiveSpec,
) -> std::result::Result<SpaceOutcome, Failure> {
    let active = resolve_active(spec, sys, cfg.orbitals).map_err(|e| failure("active-space", None, None, e))?;
    let n_active = active.n_active();
    let fail = |stage: &str, v: Option<Variant>, e: Error| failure(stage, v, Some(n_active), e);
    let t_ext = split_external(&ccsd.amplitudes, &sys.reference, &active);
    let sigma = build_sigma_ext(&t_ext, &sys.reference);
    let ctx = DownfoldContext::new(&sys.ham, &sys.reference, &sigma, &cfg.variants).map_err(|e| fail("downfold", None, e))?;
    let provenance = Provenance {
        amplitude_source: "ccsd".into(),
        orbitals: cfg.orbitals.label().into(),
        ccsd_e_corr: ccsd.e_corr,
        ccsd_residual: ccsd.residual,
        sigma_norm: (sigma.s1.iter().chain(sigma.s2.iter()).map(|x| x * x).sum::<f64>()).sqrt(),
    };
    let results: Vec<std::result::Result<VariantRow, Failure>> = cfg
        .variants
        .par_iter()
        .map(|&v| {
            let mut dh = ctx.build(v, &active).map_err(|e| fail("downfold", Some(v), e))?;
            dh.provenance = Some(provenance.clone());
            let terms = ctx.term_report(v).map_err(|e| fail("downfold", Some(v), e))?;
            if let Some(dir) = &cfg.export_dir {
                let path = dir.join(format!("heff_{v}_{n_active}.fcidump"));
                export_effective_hamiltonian(&dh, &path).map_err(|e| fail("export", Some(v), e))?;
            }
            let ci = active_ci(&dh, &cfg.davidson).map_err(|e| fail("casci", Some(v), e))?;
            Ok(VariantRow {
                variant: v,
                n_active,
                active_orbitals: active.active_spatial.clone(),
                energy: ci.energy,
                error: None,
                correlation_percent: None,
                ci: CiRecord::from(&ci),
                hermiticity_error: dh.hermiticity_error(),
                antisymmetry_error: dh.antisymmetry_error(),
                terms,
            })
        })
        .collect();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => errors.push(e),
        }
    }
    Ok((rows, errors))
}

/// Run every (active space × variant) point of `cfg`.
///
/// Failures at individual grid points are recorded in the report. Without
/// `keep_going`, a convergence failure anywhere turns the run into an error.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunReport> {
    let t0 = Instant::now();
    cfg.validate()?;
    let sys = prepare_system(cfg)?;
    let n_orbitals = sys.ham.m / 2;

    let t_cc = Instant::now();
    let ccsd = ccsd_solve(&sys.ham, &sys.reference, &cfg.ccsd).map_err(|e| e.at_stage("ccsd"))?;
    let ccsd_s = t_cc.elapsed().as_secs_f64();

    let t_fci = Instant::now();
    let n_half = sys.n_electrons / 2;
    let fci_dim = enumerate_basis(n_orbitals, n_half, n_half).map(|b| b.len()).unwrap_or(usize::MAX);
    let want_fci = cfg.compute_fci.unwrap_or(cfg.reference_energy.is_none() && fci_dim <= AUTO_FCI_LIMIT);
    let fci = if want_fci {
        Some(solve_ci(&sys.ham, n_half, n_half, &cfg.davidson).map_err(|e| e.at_stage("fci"))?)
    } else {
        None
    };
    let fci_s = t_fci.elapsed().as_secs_f64();
    let reference_energy = cfg.reference_energy.or(fci.as_ref().map(|f| f.energy));

    let t_var = Instant::now();
    let outcomes: Vec<_> = cfg.active.par_iter().map(|spec| run_space(cfg, &sys, &ccsd, spec)).collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok((r, f)) => {
                rows.extend(r);
                failures.extend(f);
            }
            Err(f) => failures.push(f),
        }
    }
    let hf = sys.reference.e_ref;
    for r in &mut rows {
        r.error = reference_energy.map(|e| r.energy - e);
        r.correlation_percent = percentage(r.energy, hf, reference_energy);
    }
    rows.sort_by(|a, b| (a.n_active, a.variant, &a.active_orbitals).cmp(&(b.n_active, b.variant, &b.active_orbitals)));

    if !cfg.keep_going {
        if let Some(pos) = failures.iter().position(|f| f.error.is_convergence()) {
            return Err(failures.swap_remove(pos).error);
        }
    }
    let errors = failures.into_iter().map(|f| f.row).collect();

    Ok(RunReport {
        system: SystemInfo {
            fcidump: cfg.fcidump.display().to_string(),
            n_orbitals,
            n_electrons: sys.n_electrons,
            orbitals: cfg.orbitals,
        },
        hf_energy: hf,
        ccsd: CcsdRecord {
            e_corr: ccsd.e_corr,
            e_total: hf + ccsd.e_corr,
            iterations: ccsd.iterations,
            residual: ccsd.residual,
        },
        fci: fci.as_ref().map(CiRecord::from),
        reference_energy,
        rows,
        errors,
        timings: Timings {
            ccsd_s,
            fci_s,
            variants_s: t_var.elapsed().as_secs_f64(),
            total_s: t0.elapsed().as_secs_f64(),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub geometry: String,
    pub variant: Variant,
    pub n_active: usize,
    pub energy: f64,
    pub error: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub errors: Vec<ErrorRow>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("geometry,variant,n_active,energy,error,status\n");
        for r in &self.rows {
            let err = r.error.map(|e| format!("{e:.12}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{:.12},{},ok", r.geometry, r.variant, r.n_active, r.energy, err);
        }
        for e in &self.errors {
            let msg = e.message.replace([',', '\n'], ";");
            let _ = writeln!(out, "{},,,,,error: {msg}", e.stage);
        }
        out
    }
}

/// Run one configuration per geometry; failures become error rows and the
/// sweep continues.
pub fn sweep_geometries(cfgs: &[RunConfig]) -> SweepReport {
    let mut report = SweepReport::default();
    for cfg in cfgs {
        let geometry = cfg.fcidump.display().to_string();
        match run_pipeline(cfg) {
            Ok(run) => {
                for r in &run.rows {
                    report.rows.push(SweepRow {
                        geometry: geometry.clone(),
                        variant: r.variant,
                        n_active: r.n_active,
                        energy: r.energy,
                        error: r.error,
                    });
                }
                for mut e in run.errors {
                    e.stage = format!("{geometry}: {}", e.stage);
                    report.errors.push(e);
                }
            }
            Err(e) => report.errors.push(error_row(&geometry, None, None, &e)),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn active_spec_parsing() {
        assert_eq!("5".parse::<ActiveSpec>().unwrap(), ActiveSpec::Count(5));
        assert_eq!("0,1,3".parse::<ActiveSpec>().unwrap(), ActiveSpec::List(vec![0, 1, 3]));
        assert_eq!("[0, 2]".parse::<ActiveSpec>().unwrap(), ActiveSpec::List(vec![0, 2]));
        assert!("x".parse::<ActiveSpec>().is_err());
    }

    #[test]
    fn config_file() {
        let text = "# Be\nfcidump = be.fcidump\norbitals = rhf\nactive = 5\nactive = 0,1,2,3,4,5\nvariants = A1, A7\nroots = 3\n";
        let cfg = RunConfig::from_key_value(text, Path::new("/data")).unwrap();
        assert_eq!(cfg.fcidump, PathBuf::from("/data/be.fcidump"));
        assert_eq!(cfg.active.len(), 2);
        assert_eq!(cfg.variants, vec![Variant::A1, Variant::A7]);
        assert_eq!(cfg.davidson.n_roots, 3);
        assert!(RunConfig::from_key_value("orbitals = rhf\n", Path::new(".")).is_err());
        assert!(RunConfig::from_key_value("fcidump = x\nbogus = 1\n", Path::new(".")).is_err());
    }

    #[test]
    fn variant_lists() {
        assert_eq!(parse_variants("all").unwrap().len(), 7);
        assert_eq!(parse_variants("A7,a2,A(2)").unwrap(), vec![Variant::A2, Variant::A7]);
    }
}
