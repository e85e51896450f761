use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use torus_hardy::experiment::{parse_order, run_timed, ExperimentConfig, ExperimentKind};
use torus_hardy::report::Format;
use torus_hardy::Error;

/// Seeded numerical experiments for Hardy spaces on the torus.
#[derive(Parser)]
#[command(name = "torus-hardy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Operator identities and cross-checks.
    #[command(subcommand)]
    Check(CheckCmd),
    /// Lacunary constants and the bounds built on them.
    #[command(subcommand)]
    Lacunary(LacunaryCmd),
    /// Star-norm brackets for analytic symbols.
    #[command(subcommand)]
    Nehari(NehariCmd),
    /// T²-atom corpus checks.
    #[command(subcommand)]
    Atoms(AtomsCmd),
}

#[derive(Subcommand)]
enum CheckCmd {
    /// Hilbert identity, projection algebra and the duality inequality.
    Identities(RunArgs),
    /// L² contraction of the Hilbert transform.
    Riesz(RunArgs),
    /// Kernel against multiplier Hilbert transform on T².
    Prop3(RunArgs),
}

#[derive(Subcommand)]
enum LacunaryCmd {
    /// K_E for a set, cross-checked against brute force.
    K(RunArgs),
    /// Star-norm upper bound through the minimax solver.
    Thm3(RunArgs),
    /// Hankel section norms against 6√K_E‖φ‖₂.
    Thm4(RunArgs),
}

#[derive(Subcommand)]
enum NehariCmd {
    /// Hankel lower bound against the minimax upper bound.
    Solve(RunArgs),
}

#[derive(Subcommand)]
enum AtomsCmd {
    /// H¹ star-norms of atoms across arc sizes.
    Lemma2(RunArgs),
    /// Off-support kernel decay constant across grids.
    Decay(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; built-in defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report destination; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: Format,
    /// Samples per axis (power of two).
    #[arg(long)]
    grid: Option<usize>,
    /// `lex`, `lex:<perm>` or `quad:p/q`.
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Run independent cases on the rayon pool.
    #[arg(long)]
    parallel: bool,
    /// Record wall time in the report (breaks byte-identity across runs).
    #[arg(long)]
    timing: bool,
}

fn resolve(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let cfg = ExperimentConfig::from_json(&text)?;
            if cfg.kind != kind {
                return Err(Error::Config(format!(
                    "config is for {}, not {}",
                    cfg.kind.name(),
                    kind.name()
                )));
            }
            cfg
        }
        None => ExperimentConfig::default_for(kind),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(grid) = args.grid {
        cfg.grid = grid;
    }
    if let Some(order) = &args.order {
        cfg.order = parse_order(order, cfg.order.dim())?;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    cfg.parallel |= args.parallel;
    cfg.validate()?;
    Ok(cfg)
}

fn execute(kind: ExperimentKind, args: &RunArgs) -> Result<bool, Error> {
    let cfg = resolve(kind, args)?;
    let report = run_timed(&cfg, args.timing)?;
    let text = report.render(args.format)?;
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    let failed = report.rows.iter().filter(|r| r.flag("pass") == Some(false)).count();
    eprintln!(
        "{}: {} ({} rows, {} failed)",
        kind.name(),
        if report.pass { "PASS" } else { "FAIL" },
        report.rows.len(),
        failed
    );
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Check(CheckCmd::Identities(a)) => (ExperimentKind::Identities, a),
        Command::Check(CheckCmd::Riesz(a)) => (ExperimentKind::Riesz, a),
        Command::Check(CheckCmd::Prop3(a)) => (ExperimentKind::Prop3Crosscheck, a),
        Command::Lacunary(LacunaryCmd::K(a)) => (ExperimentKind::LacunaryK, a),
        Command::Lacunary(LacunaryCmd::Thm3(a)) => (ExperimentKind::Theorem3, a),
        Command::Lacunary(LacunaryCmd::Thm4(a)) => (ExperimentKind::Theorem4, a),
        Command::Nehari(NehariCmd::Solve(a)) => (ExperimentKind::Nehari, a),
        Command::Atoms(AtomsCmd::Lemma2(a)) => (ExperimentKind::AtomsLemma2, a),
        Command::Atoms(AtomsCmd::Decay(a)) => (ExperimentKind::AtomsDecay, a),
    };
    match execute(kind, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
