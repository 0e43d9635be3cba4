mod commands;
mod problem;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use commands::{Ctx, Init};
use problem::{InvalidProblem, Problem};
use report::Report;

/// Diagnose and solve (grad xi)^T G(xi) grad xi = Gt on planar and 3D boxes.
#[derive(Parser, Debug)]
#[command(name = "isodesign", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory for CSV output.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Seed for randomized starts; overrides `seed` in [solver].
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override a [solver] key, e.g. `--set tol_thomas=1e-8`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_assignment)]
    set: Vec<(String, String)>,

    /// Path-mismatch tolerance; shorthand for `--set tol_path=...`.
    #[arg(long, global = true)]
    tol_path: Option<f64>,

    /// Append a machine-readable key=value block to the report.
    #[arg(long, global = true)]
    kv: bool,
}

#[derive(Args, Debug)]
struct Input {
    /// Problem file.
    file: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Riemann tensor norms of both metrics over the grid.
    Curvature(Input),
    /// Curvature of exp(2f) Gt for G = mu Id, f = -1/2 log mu.
    ConformalCheck(Input),
    /// Planar integrability residuals for Gt = exp(2g) Id.
    Thomas2d(Input),
    /// Integrate the planar angle equation and reconstruct xi.
    SolveTheta(Input),
    /// Sampled integrability check of the frame system.
    ThomasNd(Input),
    /// Propagate a frame along lattice paths and reconstruct xi.
    IntegrateFrame(Input),
    /// Minimize the pointwise algebraic cost at every node.
    Pointwise(Input),
    /// Minimize the incompatibility energy.
    MinimizeEnergy {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value = "affine")]
        init: Init,
    },
    /// Thin-film limit: compatibility, Cosserat vector and recovery energies.
    Dimred(Input),
}

fn parse_assignment(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() && !v.trim().is_empty() => Ok((k.trim().into(), v.trim().into())),
        _ => Err(format!("expected KEY=VALUE, found `{s}`")),
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Curvature(_) => "curvature",
            Command::ConformalCheck(_) => "conformal-check",
            Command::Thomas2d(_) => "thomas2d",
            Command::SolveTheta(_) => "solve-theta",
            Command::ThomasNd(_) => "thomas-nd",
            Command::IntegrateFrame(_) => "integrate-frame",
            Command::Pointwise(_) => "pointwise",
            Command::MinimizeEnergy { .. } => "minimize-energy",
            Command::Dimred(_) => "dimred",
        }
    }

    fn input(&self) -> &Input {
        match self {
            Command::Curvature(i)
            | Command::ConformalCheck(i)
            | Command::Thomas2d(i)
            | Command::SolveTheta(i)
            | Command::ThomasNd(i)
            | Command::IntegrateFrame(i)
            | Command::Pointwise(i)
            | Command::Dimred(i) => i,
            Command::MinimizeEnergy { input, .. } => input,
        }
    }
}

fn digest(bytes: &[u8], overrides: &[(String, String)], seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    for (k, v) in overrides {
        h.update(format!("\n--set {k}={v}").as_bytes());
    }
    h.update(format!("\n--seed {seed}").as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

macro_rules! by_dim {
    ($f:ident, $ctx:expr, $dim:expr $(, $arg:expr)*) => {
        match $dim {
            2 => commands::$f::<2>($ctx $(, $arg)*),
            _ => commands::$f::<3>($ctx $(, $arg)*),
        }
    };
}

fn run(cli: &Cli) -> Result<Report> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    let path = &cli.command.input().file;
    let bytes = std::fs::read(path).map_err(|e| InvalidProblem {
        path: path.clone(),
        line: None,
        message: format!("cannot read problem file: {e}"),
    })?;
    let src = String::from_utf8(bytes.clone()).map_err(|_| InvalidProblem {
        path: path.clone(),
        line: None,
        message: "problem file is not valid UTF-8".into(),
    })?;
    let mut overrides = cli.set.clone();
    if let Some(t) = cli.tol_path {
        overrides.push(("tol_path".into(), t.to_string()));
    }
    let problem = Problem::parse(path, &src, &overrides)?;
    let seed = match cli.seed {
        Some(s) => s,
        None => problem.u64_or("seed", 0)?,
    };
    let mut ctx = Ctx {
        problem: &problem,
        out: &cli.out,
        seed,
        report: Report {
            command: cli.command.name().into(),
            input: path.display().to_string(),
            digest: format!("sha256:{}", digest(&bytes, &overrides, seed)),
            ..Report::default()
        },
    };
    let dim = problem.dim;
    match &cli.command {
        Command::Curvature(_) => by_dim!(curvature, &mut ctx, dim),
        Command::ConformalCheck(_) => by_dim!(conformal_check, &mut ctx, dim),
        Command::Thomas2d(_) => commands::thomas2d(&mut ctx),
        Command::SolveTheta(_) => commands::solve_theta(&mut ctx),
        Command::ThomasNd(_) => by_dim!(thomas_nd, &mut ctx, dim),
        Command::IntegrateFrame(_) => by_dim!(integrate_frame, &mut ctx, dim),
        Command::Pointwise(_) => by_dim!(pointwise, &mut ctx, dim),
        Command::MinimizeEnergy { init, .. } => by_dim!(minimize_energy, &mut ctx, dim, *init),
        Command::Dimred(_) => commands::dimred(&mut ctx),
    }?;
    Ok(ctx.report)
}

/// 2 for malformed input, 3 for numerical failure.
fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<InvalidProblem>().is_some() {
        return 2;
    }
    match e.downcast_ref::<isodesign::Error>() {
        Some(err) if err.is_validation() => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            print!("{}", report.text());
            if cli.kv {
                print!("{}", report.key_values());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
