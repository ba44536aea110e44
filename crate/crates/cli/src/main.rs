use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vite_cli::report::{self, emit_csv, emit_plot};
use vite_cli::spec::DatasetSpec;
use vite_cli::{check_theory, gen, harness, ExperimentSpec, HarnessError, Result, TheoryFile};

#[derive(Parser)]
#[command(name = "vite", version, about = "Variance-reduced stochastic quasi-Newton experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (configuration, seed) pair of an experiment spec.
    Run {
        spec: PathBuf,
        /// Output CSV; the aggregate file and plot are written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cross-validate step-size grids before running.
        #[arg(long)]
        tune: bool,
        /// Skip the SVG plot.
        #[arg(long)]
        no_plot: bool,
    },
    /// Cross-validate step-size grids and write the tuned spec.
    Cv {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the contraction constants and certify them empirically.
    CheckTheory { constants: PathBuf },
    /// Write a synthetic least-squares problem in LibSVM format.
    GenData {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot a run set from its CSV (or aggregate CSV).
    Plot {
        csv: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| HarnessError::Run(format!("{}: {e}", path.display())))
}

fn tuned(spec: &ExperimentSpec) -> Result<ExperimentSpec> {
    let report = harness::tune(spec)?;
    for (group, chosen, scores) in &report.groups {
        println!("{group}: {chosen}");
        for (id, score) in scores {
            println!("  {id}: {score:.6e}");
        }
    }
    Ok(report.spec)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { spec: path, out, tune, no_plot } => {
            let mut spec = ExperimentSpec::load(&path)?;
            if tune {
                spec = tuned(&spec)?;
            }
            let runs = harness::run_experiment(&spec)?;
            let out = out.unwrap_or_else(|| PathBuf::from(format!("{}.csv", spec.name)));
            let (csv, agg) = emit_csv(&runs, &out)?;
            println!("wrote {} and {}", csv.display(), agg.display());
            for c in &runs.configs {
                if let Some(v) = runs.final_mean(&c.config_id) {
                    println!("{}: final mean objective {v:.6e}", c.config_id);
                }
            }
            if !no_plot {
                let svg = with_suffix(&out, ".svg");
                emit_plot(&report::series_from_runset(&runs), &spec.name, &svg)?;
                println!("wrote {}", svg.display());
            }
            Ok(())
        }
        Command::Cv { spec: path, out } => {
            let spec = ExperimentSpec::load(&path)?;
            let mut tuned = tuned(&spec)?;
            let out = out.unwrap_or_else(|| with_suffix(&path, ".tuned.json"));
            // The tuned spec may live elsewhere; pin relative dataset paths.
            if let DatasetSpec::Libsvm { path: data, .. } = &mut tuned.dataset {
                if data.is_relative() {
                    let joined = tuned.base_dir.join(&*data);
                    *data = std::fs::canonicalize(&joined).unwrap_or(joined);
                }
            }
            write_text(&out, &tuned.to_json())?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::CheckTheory { constants } => {
            let file = TheoryFile::load(&constants)?;
            let outcome = check_theory(&file)?;
            print!("{}", outcome.text);
            if outcome.certificate.passed {
                Ok(())
            } else {
                Err(HarnessError::Run("certificate FAILED".into()))
            }
        }
        Command::GenData { spec: path, out } => {
            let spec = gen::SyntheticFile::load(&path)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            let out = match (out, &spec.output) {
                (Some(o), _) => o,
                (None, Some(o)) if o.is_absolute() => o.clone(),
                (None, Some(o)) => base.join(o),
                (None, None) => return Err(HarnessError::Config("no output path: set `output` or pass --out".into())),
            };
            let wstar = gen::generate(&spec, &out)?;
            println!("wrote {} and {}", out.display(), wstar.display());
            Ok(())
        }
        Command::Plot { csv, out } => {
            let agg = report::locate_aggregate(&csv)?;
            let rows = report::read_aggregate_csv(&agg)?;
            let series = report::series_from_rows(&rows);
            let out = out.unwrap_or_else(|| with_suffix(&csv, ".svg"));
            let title = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            emit_plot(&series, title.trim_end_matches(".aggregate"), &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
