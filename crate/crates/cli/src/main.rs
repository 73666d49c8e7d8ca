use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use panoseld::metrics::{MetricsReport, DEFAULT_THRESHOLD_DEG};
use panoseld::pipeline::{self, PipelineConfig};

/// Render annotation-aligned 360° videos and score SELD output.
#[derive(Parser)]
#[command(name = "panoseld", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render every clip in the configured metadata directory.
    Generate(BatchArgs),
    /// Render in marker mode, read the markers back and score them.
    Verify {
        #[command(flatten)]
        batch: BatchArgs,
        /// Also write the metrics report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score predictions against reference annotations.
    Score {
        /// Reference CSV file or directory.
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Prediction CSV file or directory.
        #[arg(long)]
        pred: PathBuf,
        /// Localization threshold in degrees.
        #[arg(long, default_value_t = DEFAULT_THRESHOLD_DEG)]
        threshold: f64,
        /// Write the report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BatchArgs {
    /// Batch config (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    fps: Option<f64>,
    /// Draw solid per-event patches on black instead of tiles.
    #[arg(long)]
    marker_mode: bool,
}

impl BatchArgs {
    fn load(&self) -> Result<PipelineConfig, String> {
        let mut cfg = PipelineConfig::load(&self.config).map_err(|e| e.to_string())?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(f) = self.fps {
            cfg.fps = f;
        }
        cfg.marker_mode |= self.marker_mode;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

const PARTIAL: u8 = 1;
const USAGE: u8 = 2;

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn write_report(report: &MetricsReport, path: &Path) -> Result<(), String> {
    std::fs::write(path, report.to_json()).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Generate(args) => {
            let cfg = match args.load() {
                Ok(c) => c,
                Err(e) => return fail(USAGE, e),
            };
            let summary = match pipeline::generate(&cfg, &|r| println!("{r}")) {
                Ok(s) => s,
                Err(e) => return fail(USAGE, e),
            };
            println!(
                "generated {} of {} clips",
                summary.clips.len() - summary.failed(),
                summary.clips.len()
            );
            if summary.all_succeeded() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(PARTIAL)
            }
        }
        Command::Verify { batch, report } => {
            let cfg = match batch.load() {
                Ok(c) => c,
                Err(e) => return fail(USAGE, e),
            };
            let outcome = match pipeline::verify(&cfg) {
                Ok(o) => o,
                Err(e) => return fail(USAGE, e),
            };
            for (clip, err) in &outcome.failures {
                println!("clip={clip} status=failed detail={err:?}");
            }
            print!("{}", outcome.report.to_table());
            if let Some(path) = report {
                if let Err(e) = write_report(&outcome.report, &path) {
                    return fail(USAGE, e);
                }
            }
            let overall = &outcome.report.overall;
            let aligned = overall.lr == 1.0 && overall.le_deg.is_none_or(|le| le < 0.5);
            println!(
                "alignment: {}",
                if aligned {
                    "ok"
                } else {
                    "FAILED (need LR 1 and LE < 0.5 deg)"
                }
            );
            if aligned && outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(PARTIAL)
            }
        }
        Command::Score {
            reference,
            pred,
            threshold,
            report,
        } => {
            if !(threshold.is_finite() && threshold >= 0.0) {
                return fail(
                    USAGE,
                    format!("threshold must be a non-negative number, got {threshold}"),
                );
            }
            match pipeline::score_cmd(&reference, &pred, threshold, report.as_deref()) {
                Ok(r) => {
                    print!("{}", r.to_table());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(USAGE, e),
            }
        }
    }
}
