use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use fbmoo_cli::{parse_dump_spec, render, run_experiment, write_outputs, ExperimentConfig, CATALOG};

#[derive(Parser)]
#[command(name = "fbmoo", version, about = "Numerical experiments for sparse and weighted bounds of fractional operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Print the report JSON instead of the summary.
        #[arg(long)]
        json: bool,
    },
    /// List the available experiments.
    List,
    /// Sample a function spec on the grid and write it as CSV.
    DumpFunction { spec: String, csv: PathBuf },
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("FBMOO_THREADS") {
        let n: usize = v.parse().with_context(|| format!("FBMOO_THREADS={v} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(config: PathBuf, json: bool) -> anyhow::Result<bool> {
    let cfg = ExperimentConfig::load(&config)?;
    let report = run_experiment(&cfg)?;
    write_outputs(&cfg, &report)?;
    if json {
        println!("{}", report.to_json()?);
    } else {
        print!("{}", render(&report));
    }
    Ok(report.passed())
}

fn dump(spec: &str, csv: PathBuf) -> anyhow::Result<()> {
    let spec = parse_dump_spec(spec)?;
    let f = spec.function.build(spec.resolution)?;
    let file = File::create(&csv).with_context(|| format!("creating {}", csv.display()))?;
    f.write_csv(file)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match cli.command {
        Command::List => {
            for e in CATALOG {
                println!("{:<22} {}  [{}]", e.name, e.description, e.result);
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, json } => match run(config, json) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::DumpFunction { spec, csv } => match dump(&spec, csv) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
