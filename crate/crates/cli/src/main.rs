use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thermolim::plot::{emit_plot, read_series, PlotKind, PlotStyle};
use thermolim::{run_experiment, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "thermolim",
    version,
    about = "Run thermodynamic-limit experiments from JSON configurations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts and manifest.
    Run {
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a configuration without running it.
    Validate { config: PathBuf },
    /// Draw a CSV file as an SVG plot.
    Plot {
        csv: PathBuf,
        #[arg(long, value_enum, default_value_t = Kind::Line)]
        kind: Kind,
        #[arg(long)]
        out: PathBuf,
        /// Column used as x (default: the first).
        #[arg(long)]
        x: Option<String>,
        /// Columns plotted against x (default: all others).
        #[arg(long, value_delimiter = ',')]
        y: Vec<String>,
        #[arg(long)]
        log_x: bool,
        #[arg(long)]
        log_y: bool,
        #[arg(long)]
        title: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Step,
    Line,
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    ExperimentConfig::from_json(&text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            workers,
            out,
            seed,
        } => load(&config).and_then(|mut c| {
            if let Some(w) = workers {
                if w == 0 {
                    return Err(CliError::Config {
                        pointer: "/workers".into(),
                        message: "need at least one worker".into(),
                    });
                }
                c.workers = w;
            }
            if let Some(s) = seed {
                c.seed = s;
            }
            let manifest = run_experiment(&c, out.as_deref())?;
            for t in manifest.tasks.iter().filter(|t| !t.ok) {
                eprintln!(
                    "task {} ({}) failed: {}",
                    t.index,
                    t.label,
                    t.error.as_deref().unwrap_or("unknown")
                );
            }
            println!(
                "{} tasks, {} failed, {} outputs",
                manifest.tasks.len(),
                manifest.failures,
                manifest.outputs.len()
            );
            Ok(manifest.exit_code())
        }),
        Command::Validate { config } => load(&config).map(|c| {
            println!("ok: {:?} experiment", c.kind);
            0
        }),
        Command::Plot {
            csv,
            kind,
            out,
            x,
            y,
            log_x,
            log_y,
            title,
        } => (|| {
            let text = fs::read_to_string(&csv).map_err(|e| CliError::io(&csv, e))?;
            let (x_label, series) = read_series(&text, x.as_deref(), &y)?;
            let y_label = if series.len() == 1 {
                series[0].name.clone()
            } else {
                String::new()
            };
            let style = PlotStyle {
                kind: match kind {
                    Kind::Step => PlotKind::Step,
                    Kind::Line => PlotKind::Line,
                },
                log_x,
                log_y,
                title,
                x_label,
                y_label,
            };
            let svg = emit_plot(&series, &style)?;
            fs::write(&out, svg).map_err(|e| CliError::io(&out, e))?;
            Ok(0)
        })(),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
