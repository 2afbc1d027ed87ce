use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spinloop_cli::run::{run_contours, run_simulate, run_sweep, run_verify};
use spinloop_cli::scenario::{preset_names, OUT_DIR_ENV};
use spinloop_cli::{CliError, ConfigError, Scenario};

#[derive(Parser)]
#[command(name = "spinloop", version, about = "Exact spin holonomy of a driven spin-orbit quantum dot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Response trajectory, phases and cycle holonomy.
    Simulate(Common),
    /// Parametric loops C1..C5 and C_ad as CSV.
    Contours(Common),
    /// Phase table over the [sweep] range.
    Sweep(Common),
    /// Compare against a grid Schrödinger integrator.
    Verify(Common),
    /// List the built-in scenarios.
    Presets,
}

#[derive(Args)]
struct Common {
    /// Scenario file.
    config: Option<PathBuf>,
    /// Built-in scenario instead of a file.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Output directory (overrides the environment and the config).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    prefix: Option<String>,
    /// Response samples per cycle.
    #[arg(long)]
    samples: Option<usize>,
    /// Grid points for verify.
    #[arg(long)]
    n_x: Option<usize>,
    /// Time steps per cycle for verify.
    #[arg(long)]
    steps: Option<usize>,
    /// Worker threads for sweeps.
    #[arg(long)]
    threads: Option<usize>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(ConfigError::plain(msg))
}

fn load(c: &Common) -> Result<(Scenario, PathBuf), CliError> {
    let mut s = match (&c.config, &c.preset) {
        (Some(path), None) => Scenario::load(path)?,
        (None, Some(name)) => Scenario::preset(name)?,
        _ => return Err(config_err("give a scenario file or --preset NAME")),
    };
    if let Some(p) = &c.prefix {
        if p.is_empty() || p.contains(['/', '\\']) {
            return Err(config_err("--prefix must be a plain, non-empty file name stem"));
        }
        s.outputs.prefix = p.clone();
    }
    if let Some(n) = c.samples {
        if n < 16 || n % 2 == 1 {
            return Err(config_err(format!("--samples must be even and >= 16, got {n}")));
        }
        s.solver.samples = n;
        s.solver.dt = None;
    }
    if let Some(n) = c.n_x {
        if !n.is_power_of_two() || n < 16 {
            return Err(config_err(format!("--n-x must be a power of two >= 16, got {n}")));
        }
        s.verify.n_x = n;
    }
    if let Some(n) = c.steps {
        if n < 2 {
            return Err(config_err("--steps must be >= 2"));
        }
        s.verify.steps = n;
    }
    if let Some(n) = c.threads {
        let sweep = s.sweep.as_mut().ok_or_else(|| config_err("--threads needs a [sweep] section"))?;
        if n == 0 {
            return Err(config_err("--threads must be >= 1"));
        }
        sweep.threads = Some(n);
    }
    let dir = c
        .out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| s.outputs.dir.clone());
    Ok((s, dir))
}

fn header(s: &Scenario) {
    match &s.units {
        Some(u) => println!("{}", u.header()),
        None => println!("# units: scaled (hbar = 1, m* = {}, omega = {})", s.params.m_star, s.params.omega),
    }
}

fn list(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Presets => {
            for name in preset_names() {
                println!("{name}");
            }
            return Ok(());
        }
        Command::Simulate(c) | Command::Contours(c) | Command::Sweep(c) | Command::Verify(c) => c,
    };
    let (s, dir) = load(common)?;
    header(&s);
    match cli.command {
        Command::Simulate(_) => list(&run_simulate(&s, &dir)?),
        Command::Contours(_) => list(&run_contours(&s, &dir)?),
        Command::Sweep(_) => list(&run_sweep(&s, &dir)?),
        Command::Verify(_) => {
            let (report, paths) = run_verify(&s, &dir)?;
            for c in &report.checks {
                let tag = if c.passed { "ok  " } else { "FAIL" };
                println!("{tag} {:<24} {:.3e} (threshold {:.1e})", c.name, c.value, c.threshold);
            }
            list(&paths);
            if !report.passed {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                return Err(CliError::Verification(failed.join(", ")));
            }
        }
        Command::Presets => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spinloop: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
