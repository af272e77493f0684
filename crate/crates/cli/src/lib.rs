//! Command-line driver for the ssmusic solvers and Monte-Carlo experiments.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use ssmusic_core::harness::{
    self, output, phase_map_from, phase_specs, svg, EnsembleSpec, SolverSettings, SweepOptions,
    SweepOutput, SweepResult,
};
use ssmusic_core::{JsrError, SsMusicConfig};

pub use config::{parse_config, Command, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Usage(clap::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(e) if !e.use_stderr() => EXIT_OK,
            CliError::Usage(_) | CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<JsrError> for CliError {
    fn from(e: JsrError) -> Self {
        match e {
            JsrError::Config(msg) => CliError::Config(msg),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Creates the output directory and checks that files can be written there.
fn prepare_output_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let probe = dir.join(".ssmusic-write-check");
    std::fs::write(&probe, b"").map_err(|e| io_error(dir, e))?;
    std::fs::remove_file(&probe).map_err(|e| io_error(&probe, e))?;
    Ok(())
}

fn ensemble_specs(cfg: &RunConfig) -> Vec<EnsembleSpec> {
    let mut specs = match cfg.command {
        Command::Phase => phase_specs(&cfg.m, &cfg.k, cfg.big_n[0], cfg.n, cfg.trials, cfg.seed),
        _ => {
            let mut specs = Vec::new();
            for &m in &cfg.m {
                for &k in &cfg.k {
                    for &big_n in &cfg.big_n {
                        specs.push(EnsembleSpec {
                            n: cfg.n,
                            m,
                            k,
                            big_n,
                            snr_db: None,
                            trials: cfg.trials,
                            master_seed: cfg.seed,
                        });
                    }
                }
            }
            specs
        }
    };
    for s in &mut specs {
        s.snr_db = cfg.snr_db;
    }
    specs
}

fn sweep_options(cfg: &RunConfig) -> SweepOptions {
    SweepOptions {
        settings: SolverSettings {
            ss: SsMusicConfig {
                epsilon: cfg.epsilon,
                t_max: cfg.t_max,
                rank_override: None,
            },
            noise_factor: cfg.noise_factor,
        },
        threads: cfg.threads,
        record_timing: cfg.timing,
    }
}

fn spec_label(spec: &EnsembleSpec) -> String {
    let snr = spec
        .snr_db
        .map_or_else(|| "none".to_string(), |s| s.to_string());
    format!(
        "n={} m={} K={} N={} snr_db={snr}",
        spec.n, spec.m, spec.k, spec.big_n
    )
}

fn summary_lines(cfg: &RunConfig, out: &SweepOutput) -> Vec<String> {
    let mut lines = Vec::new();
    for result in &out.results {
        let label = spec_label(&result.spec);
        for s in &result.algorithms {
            let line = match cfg.command {
                Command::Solve => {
                    let r = out
                        .records
                        .iter()
                        .find(|r| r.spec_index == result.spec_index && r.algorithm == s.algorithm)
                        .expect("one record per algorithm");
                    let mut line = format!(
                        "{} {label} seed={} success={} iterations={} fitness={:e}",
                        s.algorithm, r.seed, r.success, r.iterations, r.fitness_final
                    );
                    if let Some(e) = &r.error {
                        line.push_str(&format!(" error=\"{e}\""));
                    }
                    line
                }
                _ => {
                    let modal = s
                        .modal_success_iterations(cfg.t_max)
                        .map_or_else(|| "none".to_string(), |v| v.to_string());
                    let mut line = format!(
                        "{} {label} trials={} success_rate={:.3} modal_iterations={modal} errors={}",
                        s.algorithm, s.trials, s.success_rate, s.errors
                    );
                    if cfg.command == Command::Hist {
                        let bins: Vec<String> = s
                            .iteration_histogram
                            .iter()
                            .map(|(b, c)| format!("{b}:{c}"))
                            .collect();
                        line.push_str(&format!(" histogram={}", bins.join(",")));
                    }
                    line
                }
            };
            lines.push(line);
        }
    }
    lines
}

/// The single parameter that varies across a sweep, for the chart's x axis.
fn sweep_axis(results: &[SweepResult]) -> Option<harness::SweepAxis> {
    use harness::SweepAxis;
    let varying: Vec<SweepAxis> = [SweepAxis::M, SweepAxis::K, SweepAxis::N]
        .into_iter()
        .filter(|axis| {
            results
                .windows(2)
                .any(|w| axis.value(&w[0].spec) != axis.value(&w[1].spec))
        })
        .collect();
    match varying[..] {
        [axis] => Some(axis),
        _ => None,
    }
}

fn write_svgs(cfg: &RunConfig, out: &SweepOutput) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    match cfg.command {
        Command::Solve => {}
        Command::Sweep => {
            let axis = sweep_axis(&out.results);
            let x_of = |i: usize, r: &SweepResult| match axis {
                Some(a) => a.value(&r.spec) as f64,
                None => i as f64,
            };
            let series: Vec<svg::Series> = cfg
                .algorithms
                .iter()
                .map(|&alg| svg::Series {
                    name: alg.name().to_string(),
                    points: out
                        .results
                        .iter()
                        .enumerate()
                        .filter_map(|(i, r)| r.summary(alg).map(|s| (x_of(i, r), s.success_rate)))
                        .collect(),
                })
                .collect();
            let x_label = axis.map_or("ensemble", |a| a.label());
            let chart = svg::line_chart("Recovery rate", x_label, "success rate", &series);
            files.push((cfg.out.join("sweep_success.svg"), chart));
        }
        Command::Phase => {
            for &alg in &cfg.algorithms {
                let map = phase_map_from(alg, &cfg.m, &cfg.k, &out.results);
                files.push((
                    cfg.out.join(format!("phase_{alg}.svg")),
                    svg::phase_heatmap(&map),
                ));
            }
        }
        Command::Hist => {
            let result = &out.results[0];
            for s in &result.algorithms {
                let title = format!(
                    "Iterations of {} ({})",
                    s.algorithm,
                    spec_label(&result.spec)
                );
                let chart = svg::bar_chart(&title, &s.iteration_histogram, Some(cfg.t_max + 1));
                files.push((cfg.out.join(format!("hist_{}.svg", s.algorithm)), chart));
            }
        }
    }
    for (path, body) in &files {
        std::fs::write(path, body).map_err(|e| io_error(path, e))?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// Runs a validated configuration, writing result files into `cfg.out` and
/// one summary line per (ensemble, algorithm) to `stdout`.
pub fn execute(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    prepare_output_dir(&cfg.out)?;

    let specs = ensemble_specs(cfg);
    let out = harness::run_sweep_with(&specs, &cfg.algorithms, &sweep_options(cfg))?;

    let stem = cfg.command.name();
    let mut comments = vec!["ssmusic resolved configuration".to_string()];
    comments.extend(cfg.to_config_lines());
    let csv_path = cfg.out.join(format!("{stem}_results.csv"));
    let file = output::create(&csv_path).map_err(|e| io_error(&csv_path, e))?;
    output::write_results_csv(file, &comments, &specs, &out.records)
        .map_err(|e| io_error(&csv_path, e))?;
    let json_path = cfg.out.join(format!("{stem}_aggregate.json"));
    let file = output::create(&json_path).map_err(|e| io_error(&json_path, e))?;
    output::write_aggregate_json(file, cfg, &out.results).map_err(|e| io_error(&json_path, e))?;
    if cfg.emit_svg {
        write_svgs(cfg, &out)?;
    }

    let lines = summary_lines(cfg, &out);
    let write_err = |e: std::io::Error| CliError::Runtime(format!("stdout: {e}"));
    for line in lines {
        writeln!(stdout, "{line}").map_err(write_err)?;
    }
    Ok(())
}

/// Parses `args` (without the program name), executes, and returns the
/// process exit code. Errors go to stderr.
pub fn run<S: AsRef<str>>(args: &[S]) -> i32 {
    let result = parse_config(args, None).and_then(|cfg| {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        execute(&cfg, &mut lock)
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e @ CliError::Usage(_)) => {
            if let CliError::Usage(inner) = &e {
                let _ = inner.print();
            }
            e.exit_code()
        }
        Err(e) => {
            eprintln!("ssmusic: {e}");
            e.exit_code()
        }
    }
}
