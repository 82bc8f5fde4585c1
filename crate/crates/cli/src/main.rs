use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use downfold::pipeline::{
    parse_variants, run_pipeline, sweep_geometries, ActiveSpec, OrbitalMode, OutputFormat, RunConfig,
};
use downfold::Error;

/// Coupled-cluster downfolding: build the A1–A7 effective Hamiltonians for an
/// active space and solve them by CAS-CI.
#[derive(Parser)]
#[command(name = "downfold", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one system over a grid of active spaces and variants.
    Run(RunArgs),
    /// Run the same settings over several geometries and write a CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct Shared {
    /// Orbital basis: rhf or mp2no.
    #[arg(long, value_parser = parse::<OrbitalMode>)]
    orbitals: Option<OrbitalMode>,
    /// Active space: a size (`5`) or an orbital list (`0,1,2,5`). Repeatable.
    #[arg(long, value_parser = parse::<ActiveSpec>)]
    active: Vec<ActiveSpec>,
    /// Comma-separated variants, e.g. `A1,A4,A7` or `all`.
    #[arg(long)]
    variants: Option<String>,
    /// Electron count, overriding the FCIDUMP header.
    #[arg(long)]
    nelec: Option<usize>,
    /// Number of CI roots to report.
    #[arg(long)]
    roots: Option<usize>,
    /// Record convergence failures in the report instead of aborting.
    #[arg(long)]
    keep_going: bool,
    /// Key-value config file; command-line flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    fcidump: Option<PathBuf>,
    #[command(flatten)]
    shared: Shared,
    /// Exact energy used for errors and percentages.
    #[arg(long, allow_hyphen_values = true)]
    reference_energy: Option<f64>,
    /// Write each effective Hamiltonian as an FCIDUMP into this directory.
    #[arg(long)]
    export_heff: Option<PathBuf>,
    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// json, csv or text. Defaults to the `--out` extension, else text.
    #[arg(long, value_parser = parse::<OutputFormat>)]
    format: Option<OutputFormat>,
}

#[derive(Args)]
struct SweepArgs {
    /// One FCIDUMP per geometry. Repeatable.
    #[arg(long)]
    fcidump: Vec<PathBuf>,
    #[command(flatten)]
    shared: Shared,
    /// CSV file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn base_config(fcidump: Option<PathBuf>, shared: &Shared) -> Result<RunConfig, Error> {
    let mut cfg = match (&shared.config, fcidump) {
        (Some(path), f) => {
            let mut cfg = RunConfig::from_file(path)?;
            if let Some(f) = f {
                cfg.fcidump = f;
            }
            cfg
        }
        (None, Some(f)) => RunConfig::new(f),
        (None, None) => return Err(Error::Parse("either --fcidump or --config is required".into())),
    };
    if let Some(o) = shared.orbitals {
        cfg.orbitals = o;
    }
    if !shared.active.is_empty() {
        cfg.active = shared.active.clone();
    }
    if let Some(v) = &shared.variants {
        cfg.variants = parse_variants(v)?;
    }
    if shared.nelec.is_some() {
        cfg.n_electrons = shared.nelec;
    }
    if let Some(r) = shared.roots {
        cfg.davidson.n_roots = r;
    }
    cfg.keep_going |= shared.keep_going;
    Ok(cfg)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::from(e).at_stage(format!("writing {}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(args: RunArgs) -> Result<(), Error> {
    let mut cfg = base_config(args.fcidump, &args.shared)?;
    if args.reference_energy.is_some() {
        cfg.reference_energy = args.reference_energy;
    }
    if args.export_heff.is_some() {
        cfg.export_dir = args.export_heff;
    }
    if args.out.is_some() {
        cfg.out = args.out;
    }
    if args.format.is_some() {
        cfg.format = args.format;
    }
    if let Some(dir) = &cfg.export_dir {
        fs::create_dir_all(dir)?;
    }
    let report = run_pipeline(&cfg)?;
    let format = cfg
        .format
        .unwrap_or_else(|| cfg.out.as_deref().map(OutputFormat::from_path).unwrap_or(OutputFormat::Text));
    write_output(cfg.out.as_deref(), &report.render(format))?;
    for e in &report.errors {
        eprintln!("warning: {}: {}", e.stage, e.message);
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Error> {
    let cfgs = args
        .fcidump
        .into_iter()
        .map(|f| base_config(Some(f), &args.shared))
        .collect::<Result<Vec<_>, _>>()?;
    let report = sweep_geometries(&cfgs);
    write_output(args.out.as_deref(), &report.to_csv())?;
    for e in &report.errors {
        eprintln!("warning: {}: {}", e.stage, e.message);
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap's own exit code for usage errors (2) would collide with convergence failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_convergence() { 2 } else { 3 })
        }
    }
}
