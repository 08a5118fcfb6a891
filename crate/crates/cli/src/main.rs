use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use sigwind::specfun::AKernel;
use sigwind::SigError;

mod commands;

#[derive(Parser, Debug, Serialize)]
#[command(name = "sigwind", version, about = "Path signatures, winding moments and SLE expected signatures")]
struct Cli {
    /// Worker threads for sampling and quadrature (SIGWIND_THREADS wins).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write a JSON run manifest here.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Path signatures.
    #[command(subcommand)]
    Sig(SigCommand),
    /// Lyndon words.
    #[command(subcommand)]
    Lyndon(LyndonCommand),
    /// Winding-number moments.
    #[command(subcommand)]
    Winding(WindingCommand),
    /// Numerical checks of the identities.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Chordal SLE sampling.
    #[command(subcommand)]
    Sle(SleCommand),
    /// Special functions.
    #[command(subcommand)]
    Specfun(SpecfunCommand),
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum SigCommand {
    /// Truncated signature and Lyndon log-signature of a CSV path.
    Compute {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "N", default_value_t = 4)]
        level: usize,
    },
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum LyndonCommand {
    /// Lyndon words up to a degree, in lexicographic order.
    List {
        #[arg(long = "d", default_value_t = 2)]
        dim: usize,
        #[arg(long = "N", default_value_t = 4)]
        level: usize,
    },
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum WindingCommand {
    /// Moments of the winding function with n + k + 2 <= N.
    Moments {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "N", default_value_t = 4)]
        level: usize,
    },
}

#[derive(Args, Debug, Serialize)]
struct CorpusArgs {
    /// Closed CSV path to check instead of a random corpus.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, default_value_t = 12)]
    max_vertices: usize,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum VerifyCommand {
    /// Lyndon coordinate, word coefficient and weighted moment agree.
    Theorem1 {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long = "N", default_value_t = 6)]
        level: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Equal winding functions with different signatures.
    Sharpness {
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Level-four log-signature rebuilt from moments.
    Corollary2 {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// 4π‖η‖² <= length².
    Isoperimetric {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value_t = 2000)]
        resolution: usize,
        #[arg(long, default_value_t = 0.02)]
        slack: f64,
    },
    /// Polygonal semicircle loops against the closed form.
    Semicircle {
        #[arg(long, default_value_t = 10_000)]
        m: usize,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Level-four expected signature for κ = 8/3.
    Theorem6 {
        /// Monte Carlo estimate written by `sle mc`.
        #[arg(long)]
        estimate: Option<PathBuf>,
        /// Use this value of A instead of running the quadrature.
        #[arg(long = "A")]
        a: Option<f64>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[command(flatten)]
        quad: QuadArgs,
    },
}

#[derive(Args, Debug, Serialize)]
struct SleArgs {
    #[arg(long, default_value_t = 8.0 / 3.0)]
    kappa: f64,
    #[arg(long, default_value_t = 20_000)]
    steps: usize,
    #[arg(long = "T", default_value_t = 16.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 512)]
    arc_points: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Stage {
    /// Trace in the upper half-plane.
    Trace,
    /// Trace mapped into the disc.
    Disc,
    /// Closed loop in the disc.
    Loop,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum SleCommand {
    /// One sampled curve as CSV.
    Sample {
        #[command(flatten)]
        sle: SleArgs,
        #[arg(long, default_value_t = 0)]
        index: u64,
        #[arg(long, value_enum, default_value_t = Stage::Trace)]
        stage: Stage,
    },
    /// Monte Carlo expected loop signature as JSON.
    Mc {
        #[command(flatten)]
        sle: SleArgs,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long = "N", default_value_t = 4)]
        level: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum KernelArg {
    Consistent,
    Printed,
}

impl From<KernelArg> for AKernel {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Consistent => AKernel::Consistent,
            KernelArg::Printed => AKernel::Printed,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct QuadArgs {
    /// Relative change between refinements at which the quadrature stops.
    #[arg(long = "quad-tol", default_value_t = 1e-3)]
    quad_tol: f64,
    #[arg(long, value_enum, default_value_t = KernelArg::Consistent)]
    kernel: KernelArg,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum SpecfunCommand {
    /// The quadruple integral A.
    #[command(name = "A")]
    A {
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = KernelArg::Consistent)]
        kernel: KernelArg,
        #[arg(long, default_value_t = 2)]
        radial_panels: usize,
        #[arg(long, default_value_t = 2)]
        angular_panels: usize,
        #[arg(long, default_value_t = 8)]
        nodes_per_panel: usize,
        /// Points per shift of a randomly shifted lattice cross-check (0 skips it).
        #[arg(long, default_value_t = 0)]
        qmc_points: usize,
        #[arg(long, default_value_t = 16)]
        qmc_shifts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Catalan's constant.
    Catalan,
    /// G(σ) = 1 − σ ₂F₁(1, 4/3; 5/3; 1 − σ).
    #[command(name = "G")]
    G {
        #[arg(long, allow_negative_numbers = true)]
        sigma: f64,
    },
}

/// What a command produced.
pub struct Output {
    pub bytes: Vec<u8>,
    /// False when a verification missed its tolerance.
    pub passed: bool,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    schema: u32,
    command: &'a Command,
    argv: Vec<String>,
    seed: Option<u64>,
    threads: usize,
    version: &'static str,
    wall_time_seconds: f64,
    output_sha256: String,
}

fn seed_of(command: &Command) -> Option<u64> {
    match command {
        Command::Sle(SleCommand::Sample { sle, .. } | SleCommand::Mc { sle, .. }) => Some(sle.seed),
        Command::Specfun(SpecfunCommand::A { seed, .. }) => Some(*seed),
        Command::Verify(
            VerifyCommand::Theorem1 { corpus, .. }
            | VerifyCommand::Corollary2 { corpus, .. }
            | VerifyCommand::Isoperimetric { corpus, .. },
        ) if corpus.input.is_none() => Some(corpus.seed),
        _ => None,
    }
}

fn configure_threads(flag: Option<usize>) -> Result<(), String> {
    let from_env = match std::env::var("SIGWIND_THREADS") {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| format!("SIGWIND_THREADS={v} is not a count"))?),
        Err(_) => None,
    };
    if let Some(n) = from_env.or(flag) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_output(cli: &Cli, out: &Output) -> io::Result<()> {
    match &cli.out {
        Some(path) => File::create(path)?.write_all(&out.bytes),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(&out.bytes)?;
            stdout.flush()
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(msg) = configure_threads(cli.threads) {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let started = Instant::now();
    let out = match commands::run(&cli.command) {
        Ok(out) => out,
        Err(e) => {
            report_error(&e);
            return ExitCode::from(2);
        }
    };
    let wall = started.elapsed().as_secs_f64();
    if let Err(e) = write_output(&cli, &out) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if let Some(path) = &cli.manifest {
        let manifest = RunManifest {
            schema: 1,
            command: &cli.command,
            argv: std::env::args().collect(),
            seed: seed_of(&cli.command),
            threads: rayon::current_num_threads(),
            version: env!("CARGO_PKG_VERSION"),
            wall_time_seconds: wall,
            output_sha256: hex(&Sha256::digest(&out.bytes)),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("plain data") + "\n";
        if let Err(e) = std::fs::write(path, text) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    if out.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn report_error(e: &SigError) {
    eprintln!("error: {e}");
}
