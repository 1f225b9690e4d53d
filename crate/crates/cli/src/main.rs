use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use combolab::adversaries::RandomFeasibleStream;
use combolab::domain::{Dag, DecisionSet};
use combolab::harness::{
    check_iterate_equivalence, lb_demo, run_experiment, run_property_suite, ExperimentConfig, PropertyHooks,
    DEFAULT_EQUIVALENCE_TOL, DEMO_IDS, SCOPES,
};
use combolab::sampling::RngStream;

#[derive(Parser)]
#[command(name = "combolab", version, about = "Hedge and mirror descent over combinatorial decision sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a key=value config file.
    Run {
        config: PathBuf,
        /// Write the CSV here instead of the config's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare numeric dilated-entropy OMD with weight-pushing Hedge on a DAG.
    EquivCheck {
        dag_file: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        eta: f64,
        #[arg(long = "T", default_value_t = 50)]
        horizon: usize,
        #[arg(long, default_value_t = DEFAULT_EQUIVALENCE_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the invariant suite, optionally restricted to one module.
    Props {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SCOPES))]
        scope: Option<String>,
    },
    /// Reproduce one lower-bound experiment with default parameters.
    LbDemo {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(DEMO_IDS))]
        id: String,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(config: PathBuf, out: Option<PathBuf>) -> Result<ExitCode> {
    let config = ExperimentConfig::from_file(&config).with_context(|| format!("loading {}", config.display()))?;
    let output = run_experiment(&config)?;
    match out.or(config.out.clone()) {
        Some(path) => {
            let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            output.write_csv(BufWriter::new(file))?;
            println!("{}", output.summary_json());
        }
        None => {
            output.write_csv(io::stdout().lock())?;
            eprintln!("{}", output.summary_json());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn equiv_check(dag_file: PathBuf, eta: f64, horizon: usize, tol: f64, seed: u64) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&dag_file).with_context(|| format!("reading {}", dag_file.display()))?;
    let dag = Dag::parse(&text)?;
    let set = DecisionSet::dag_paths(dag.clone())?;
    let mut stream = RandomFeasibleStream::new(set, RngStream::new(seed));
    let report = check_iterate_equivalence(&dag, &mut stream, eta, horizon, tol)?;
    println!(
        "{} max_gap={:.3e} tol={:.0e} rounds={} max_kkt_residual={:.3e}",
        if report.pass { "PASS" } else { "FAIL" },
        report.max_gap,
        report.tol,
        report.gaps.len(),
        report.max_kkt_residual
    );
    Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn props(scope: Option<String>) -> Result<ExitCode> {
    let report = run_property_suite(scope.as_deref(), &PropertyHooks::default());
    let mut stdout = io::stdout().lock();
    for outcome in &report.outcomes {
        writeln!(stdout, "{outcome}")?;
    }
    let failed = report.outcomes.iter().filter(|o| !o.pass).count();
    writeln!(stdout, "{} invariants, {failed} failed", report.outcomes.len())?;
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run { config, out } => run(config, out),
        Command::EquivCheck { dag_file, eta, horizon, tol, seed } => equiv_check(dag_file, eta, horizon, tol, seed),
        Command::Props { scope } => props(scope),
        Command::LbDemo { id, trials, seed } => {
            print!("{}", lb_demo(&id, trials, seed)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
