//! `ursim` — Monte Carlo sweeps, percentile reports and the acceptance
//! selftest for the cyclic-shift URS ranging simulator.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use ursim_core::harness::{
    export, import, load_scenario, render_table, report_cdf, run_sweep, ExportFormat, GroupField,
    ScenarioConfig, DEFAULT_PERCENTILES,
};
use ursim_core::selftest::{run_all, Scale};

#[derive(Parser)]
#[command(
    name = "ursim",
    about = "Link-level simulator for cyclic-shift uplink-reference-signal RTT ranging",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep and export the trial records.
    Run {
        /// Scenario file (TOML); omitted or empty means the default
        /// desk-scale scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Output file for the records.
        #[arg(long)]
        out: PathBuf,
        /// Export format.
        #[arg(long, default_value = "csv")]
        format: String,
        /// Override the scenario's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Summarize exported records as error percentiles.
    Report {
        /// Records file produced by `run` (CSV or JSON lines).
        #[arg(long = "in")]
        input: PathBuf,
        /// Comma-separated grouping fields: estimator, snr, m.
        #[arg(long, default_value = "estimator,snr,m", value_delimiter = ',')]
        group_by: Vec<String>,
        /// Comma-separated percentiles in percent.
        #[arg(long, value_delimiter = ',')]
        percentiles: Option<Vec<f64>>,
    },
    /// Run the acceptance invariant suite.
    Selftest {
        /// Full acceptance scale (several minutes) instead of the quick
        /// smoke scale.
        #[arg(long)]
        full: bool,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("ursim: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T>
where
    T: Send,
{
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building thread pool")?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            format,
            seed,
            threads,
        } => {
            let mut cfg = match &scenario {
                Some(path) => {
                    let (cfg, warnings) = load_scenario(path)
                        .with_context(|| format!("loading scenario {}", path.display()))?;
                    for w in warnings {
                        eprintln!("warning: {w}");
                    }
                    cfg
                }
                None => ScenarioConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.master_seed = seed;
            }
            let format: ExportFormat = format.parse()?;
            let records = with_threads(threads, || run_sweep(&cfg))??;
            export(&records, format, &out)
                .with_context(|| format!("writing {}", out.display()))?;
            let flagged = records.iter().filter(|r| !r.is_ok()).count();
            println!(
                "wrote {} records to {} ({} flagged)",
                records.len(),
                out.display(),
                flagged
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Report {
            input,
            group_by,
            percentiles,
        } => {
            let records =
                import(&input).with_context(|| format!("reading {}", input.display()))?;
            let fields = group_by
                .iter()
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<GroupField>())
                .collect::<Result<Vec<_>, _>>()?;
            let ps: Vec<f64> = match percentiles {
                Some(ps) => ps.into_iter().map(|p| p / 100.0).collect(),
                None => DEFAULT_PERCENTILES.to_vec(),
            };
            if let Some(bad) = ps.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                anyhow::bail!("percentile {} out of range", bad * 100.0);
            }
            let rows = report_cdf(&records, &fields, &ps)?;
            print!("{}", render_table(&rows));
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest { full, threads } => {
            let scale = if full { Scale::Full } else { Scale::Quick };
            let report = with_threads(threads, || run_all(scale))?;
            print!("{}", report.render());
            if report.all_passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
    }
}
