//! Command line front end: example runs, the standard IPDG baseline, the
//! offline/online pipeline and standalone reference solves.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use raydg::driver::{self, output, ExperimentConfig, RunOutcome};
use raydg::offline::OfflineStore;
use raydg::{Error, Result};

#[derive(Parser)]
#[command(name = "raydg", version, about = "Ray-informed plane-wave DG solver for high-frequency acoustic waves")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one of the four examples (or a TOML configuration) and write all artifacts.
    Run {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value = "raydg-out")]
        out: PathBuf,
    },
    /// Standard IPDG with the bilinear basis (Example 1 data).
    Baseline {
        #[arg(long, value_parser = frequency)]
        omega: f64,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        reference: ReferenceArgs,
        #[arg(long, default_value = "raydg-out")]
        out: PathBuf,
    },
    /// Precompute blocks for a polar predefined direction set and save them.
    OfflineBuild {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Covering radius of the predefined directions.
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        #[arg(long)]
        store: PathBuf,
    },
    /// Run with directions snapped onto a saved store.
    OnlineRun {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "raydg-out")]
        out: PathBuf,
    },
    /// Pseudospectral reference solve only; writes one field file.
    Reference {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value = "ref_field.bin")]
        out: PathBuf,
    },
    /// Print the resolved configuration as TOML.
    ShowConfig {
        #[command(flatten)]
        problem: ProblemArgs,
    },
}

#[derive(Args)]
struct ProblemArgs {
    /// Example number 1–4.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    example: Option<u8>,
    /// Angular frequency, e.g. `10pi` or `31.4`.
    #[arg(long, value_parser = frequency)]
    omega: Option<f64>,
    /// Cells per side (1/h).
    #[arg(long)]
    n: Option<usize>,
    /// TOML configuration; replaces --example/--omega/--n.
    #[arg(long, conflicts_with_all = ["example", "omega", "n"])]
    config: Option<PathBuf>,
    /// POD threshold.
    #[arg(long, conflicts_with = "no_pod")]
    pod: Option<f64>,
    /// Disable POD truncation.
    #[arg(long)]
    no_pod: bool,
    /// Penalty parameter.
    #[arg(long)]
    gamma: Option<f64>,
    /// Final time.
    #[arg(long)]
    t_final: Option<f64>,
    #[command(flatten)]
    reference: ReferenceArgs,
}

#[derive(Args)]
struct ReferenceArgs {
    /// Reference grid points per side.
    #[arg(long)]
    reference_n: Option<usize>,
    /// Also run the refined reference and report the self-convergence gap.
    #[arg(long)]
    self_check: bool,
}

impl ReferenceArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(n) = self.reference_n {
            cfg.reference.n = Some(n);
        }
        cfg.reference.self_check |= self.self_check;
    }
}

fn frequency(s: &str) -> std::result::Result<f64, String> {
    driver::parse_frequency(s).map_err(|e| e.to_string())
}

impl ProblemArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_toml(&std::fs::read_to_string(path)?)?,
            None => {
                let missing = |what: &str| Error::config(format!("--{what} is required without --config"));
                let id = self.example.ok_or_else(|| missing("example"))?;
                let omega = self.omega.ok_or_else(|| missing("omega"))?;
                let n = self.n.ok_or_else(|| missing("n"))?;
                driver::example_config(id, omega, n, None)?
            }
        };
        if let Some(eta) = self.pod {
            cfg.solver.pod = Some(eta);
        }
        if self.no_pod {
            cfg.solver.pod = None;
        }
        if let Some(g) = self.gamma {
            cfg.problem.gamma = g;
        }
        if let Some(t) = self.t_final {
            cfg.problem.t_final = t;
        }
        self.reference.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn report(outcome: &RunOutcome, out: &Path) -> Result<()> {
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let written = output::write_outputs(outcome, out)?;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    output::write_results(std::slice::from_ref(&outcome.row), &mut lock)?;
    if let Some(gap) = outcome.reference_self_gap {
        writeln!(lock, "reference self-convergence gap: {gap:.4}%")?;
    }
    writeln!(lock, "wrote {} files to {}", written.len(), out.display())?;
    Ok(())
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(Error::config("--threads must be at least 1"));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::config(format!("cannot configure thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    if n > 1 {
        eprintln!("warning: built without the `parallel` feature; running on one thread");
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Run { problem, out } => {
            let cfg = problem.resolve()?;
            report(&driver::run(&cfg, None)?, &out)
        }
        Command::Baseline { omega, n, reference, out } => {
            let mut cfg = driver::baseline_config(omega, n)?;
            reference.apply(&mut cfg);
            report(&driver::run(&cfg, None)?, &out)
        }
        Command::OfflineBuild { problem, delta, store } => {
            let cfg = problem.resolve()?;
            let built = driver::build_store(&cfg, delta)?;
            let mut w = BufWriter::new(File::create(&store)?);
            built.write_to(&mut w)?;
            w.flush()?;
            println!("stored {} predefined directions in {}", built.pre.len(), store.display());
            Ok(())
        }
        Command::OnlineRun { problem, store, out } => {
            let cfg = problem.resolve()?;
            let loaded = OfflineStore::read_from(&mut BufReader::new(File::open(&store)?))?;
            let (outcome, stats) = driver::run_online(&cfg, &loaded, None)?;
            report(&outcome, &out)?;
            println!(
                "fresh blocks: {}, annulus violations: {}",
                stats.fresh_blocks, stats.annulus_violations
            );
            Ok(())
        }
        Command::Reference { problem, out } => {
            let cfg = problem.resolve()?;
            let (grid, gap) = driver::run_reference(&cfg)?;
            let mut w = BufWriter::new(File::create(&out)?);
            grid.write_to(&mut w)?;
            w.flush()?;
            println!("reference grid {}x{} at t = {} written to {}", grid.n, grid.n, grid.time, out.display());
            if let Some(gap) = gap {
                println!("reference self-convergence gap: {gap:.4}%");
            }
            Ok(())
        }
        Command::ShowConfig { problem } => {
            print!("{}", problem.resolve()?.to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
