//! Argument parsing and subcommand dispatch for the `scalebench` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use scalebench_core::report::{self, ReportSettings};
use scalebench_core::runner::{self, RunConfig};
use scalebench_core::{Error, QuantileOutput, Result};

#[derive(Debug, Parser)]
#[command(
    name = "scalebench",
    version,
    about = "Benchmark feature scalers across learners and datasets"
)]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the dataset × model × scaler sweep described by a config file.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(short, long)]
        jobs: Option<usize>,
        /// Output directory, overriding the config.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Output distribution of the QT scaler.
        #[arg(long, value_parser = parse_qt_output)]
        qt_output: Option<QuantileOutput>,
    },
    /// Wilcoxon and Friedman tests of one metric against a baseline scaler.
    Stats {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        metric: String,
        #[arg(long, default_value = "NO")]
        baseline: String,
        #[arg(long, default_value_t = scalebench_core::stats::DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Write a Markdown report, optionally with SVG bar charts.
    Report {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Directory for SVG charts; no charts without it.
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long, default_value = "NO")]
        baseline: String,
        #[arg(long, default_value_t = scalebench_core::stats::DEFAULT_ALPHA)]
        alpha: f64,
    },
}

fn parse_qt_output(s: &str) -> std::result::Result<QuantileOutput, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("alpha {alpha} outside (0, 1)")))
    }
}

fn check_baseline(name: &str) -> Result<()> {
    name.parse::<scalebench_core::ScalerKind>().map(|_| ())
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    let io = |e: std::io::Error| Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    };
    match command {
        Command::Run {
            config,
            jobs,
            out: out_dir,
            qt_output,
        } => {
            let mut cfg = RunConfig::from_file(&config)?;
            if jobs.is_some() {
                cfg.jobs = jobs;
            }
            if let Some(dir) = out_dir {
                cfg.output_dir = dir;
            }
            if let Some(q) = qt_output {
                cfg.qt_output = q;
            }
            let output = runner::run_experiment(&cfg)?;
            runner::persist(&output, &cfg.output_dir)?;
            writeln!(
                out,
                "{} records ({} failed) written to {}",
                output.manifest.records,
                output.manifest.failed,
                cfg.output_dir.join(runner::RESULTS_FILE).display()
            )
            .map_err(io)?;
        }
        Command::Stats {
            input,
            metric,
            baseline,
            alpha,
        } => {
            check_alpha(alpha)?;
            check_baseline(&baseline)?;
            let records = report::read_results(&input)?;
            let rows = report::aggregate_significance(&records, &metric, &baseline, alpha)?;
            if rows.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "no successful records with a {metric} value"
                )));
            }
            write!(out, "{}", report::render_table_lines(&rows)).map_err(io)?;
            for row in &rows {
                for note in &row.notes {
                    eprintln!("note: {}: {note}", row.model);
                }
            }
        }
        Command::Report {
            input,
            out: report_path,
            svg,
            baseline,
            alpha,
        } => {
            check_alpha(alpha)?;
            check_baseline(&baseline)?;
            let records = report::read_results(&input)?;
            let settings = ReportSettings { baseline, alpha };
            let sections = report::build_sections(&records, &settings.baseline, alpha)?;
            let figures =
                report::emit_report(&sections, &records, &settings, &report_path, svg.as_deref())?;
            writeln!(
                out,
                "report written to {} ({} charts)",
                report_path.display(),
                figures.len()
            )
            .map_err(io)?;
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the subcommand and returns
/// the process exit code: 0 on success, 1 for usage and configuration
/// errors, 2 for I/O failures.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
    match execute(cli.command, &mut std::io::stdout().lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
