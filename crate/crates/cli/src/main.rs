use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use confgeo::ScalarField;
use confgeo_cli::{report, svg, Experiment, ExperimentConfig};

const USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "confgeo", version, about = "Numerical experiments on conformal metrics")]
struct Cli {
    /// Print the full default configuration as JSON and exit.
    #[arg(long, global = true)]
    print_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write report.csv plus fields.
    Run {
        /// main1, neck, brezis-merle, collapse, bubble, sphere-pinch, gh-converge or k-ge-1.
        /// Falls back to the config's experiment.
        experiment: Option<String>,
        #[arg(long)]
        res: Option<usize>,
        #[arg(long)]
        kmax: Option<u32>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON config; flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write SVG heatmaps of the fields.
        #[arg(long)]
        svg: bool,
        /// Record wall-clock time in the runtime_ms column.
        #[arg(long)]
        timing: bool,
    },
    /// Render a CONFGRID file as an SVG heatmap.
    Plot {
        field: PathBuf,
        /// Output path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two reports row by row; fails if any check stopped passing.
    ReportDiff { a: PathBuf, b: PathBuf },
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(USAGE)
}

/// Writes to stdout, treating a closed pipe (`confgeo ... | head`) as success.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn threads() -> Result<(), String> {
    let Ok(v) = std::env::var("CONFGEO_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("CONFGEO_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("CONFGEO_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if cli.print_defaults {
        emit(&format!("{}\n", ExperimentConfig::defaults_json()));
        return ExitCode::SUCCESS;
    }
    if let Err(e) = threads() {
        return usage(e);
    }
    match cli.command {
        None => usage("no command given; try --help"),
        Some(Command::Run { experiment, res, kmax, trials, out, config, seed, svg, timing }) => {
            let mut cfg = match &config {
                Some(path) => match ExperimentConfig::load(path) {
                    Ok(cfg) => cfg,
                    Err(e) => return usage(format!("{e:#}")),
                },
                None => ExperimentConfig::default(),
            };
            match (experiment, &config) {
                (Some(name), _) => match name.parse::<Experiment>() {
                    Ok(e) => cfg.experiment = e,
                    Err(e) => return usage(e),
                },
                (None, None) => return usage("no experiment given"),
                (None, Some(_)) => {}
            }
            cfg.res = res.or(cfg.res);
            cfg.kmax = kmax.or(cfg.kmax);
            cfg.trials = trials.unwrap_or(cfg.trials);
            cfg.out = out.unwrap_or(cfg.out);
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.svg |= svg;
            cfg.timing |= timing;
            if let Err(e) = cfg.validate() {
                return usage(e);
            }
            match confgeo_cli::run(&cfg) {
                Ok(summary) => {
                    let failed: Vec<&confgeo_cli::Row> = summary.rows.iter().filter(|r| !r.pass).collect();
                    let mut text = format!("{}: {} checks, {} failed\n", cfg.experiment, summary.rows.len(), failed.len());
                    for r in &failed {
                        text.push_str(&format!("FAIL {} value={} bound={}\n", r.check(), r.value, r.bound));
                    }
                    emit(&text);
                    if failed.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
        Some(Command::Plot { field, out }) => {
            let text = match std::fs::read_to_string(&field) {
                Ok(t) => t,
                Err(e) => return usage(format!("reading {}: {e}", field.display())),
            };
            let f = match ScalarField::parse_confgrid(&text) {
                Ok(f) => f,
                Err(e) => return usage(format!("{}: {e}", field.display())),
            };
            let image = svg::heatmap(&f);
            match out {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, image) {
                        return usage(format!("writing {}: {e}", path.display()));
                    }
                }
                None => emit(&image),
            }
            ExitCode::SUCCESS
        }
        Some(Command::ReportDiff { a, b }) => {
            let read = |p: &PathBuf| std::fs::read_to_string(p).map_err(|e| format!("reading {}: {e}", p.display()));
            let (ta, tb) = match (read(&a), read(&b)) {
                (Ok(ta), Ok(tb)) => (ta, tb),
                (Err(e), _) | (_, Err(e)) => return usage(e),
            };
            match report::diff(&ta, &tb) {
                Ok(deltas) => {
                    emit(&report::diff_table(&deltas));
                    let regressed = deltas.iter().filter(|d| d.regressed()).count();
                    if regressed > 0 {
                        eprintln!("{regressed} check(s) regressed");
                        ExitCode::from(1)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => usage(e),
            }
        }
    }
}
