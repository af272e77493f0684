//! Run configuration: command-line flags layered over an optional
//! `key = value` file layered over defaults.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use ssmusic_core::harness::Algorithm;
use ssmusic_core::noise::DEFAULT_NOISE_EPSILON_FACTOR;
use ssmusic_core::solver::{DEFAULT_EPSILON, DEFAULT_T_MAX};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Solve one seeded instance with each algorithm.
    Solve,
    /// Success rates over every combination of the m, K and N lists.
    Sweep,
    /// Success-rate map over the m and K lists.
    Phase,
    /// Iteration histogram for one ensemble.
    Hist,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Phase => "phase",
            Command::Hist => "hist",
        }
    }

    fn from_str_value(s: &str) -> Result<Self, String> {
        <Command as ValueEnum>::from_str(s, false)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "ssmusic",
    version,
    about = "Joint sparse recovery with semi-supervised MUSIC",
    after_help = "Flags override values from --config FILE, which override the defaults.\n\
                  Exit codes: 0 success, 2 configuration error, 3 runtime error."
)]
struct Args {
    /// What to run.
    command: Option<Command>,
    /// Number of atoms in the dictionary.
    #[arg(long)]
    n: Option<usize>,
    /// Measurements per vector (comma list for sweep and phase).
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// Row sparsity (comma list for sweep and phase).
    #[arg(long = "K", value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Number of measurement vectors (comma list for sweep and phase).
    #[arg(long = "N", value_delimiter = ',')]
    big_n: Option<Vec<usize>>,
    /// Signal-to-noise ratio in dB; noiseless when absent.
    #[arg(long = "snr-db", allow_negative_numbers = true)]
    snr_db: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed of the random streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Algorithm to run; repeat or use a comma list.
    #[arg(long = "algo", value_delimiter = ',')]
    algo: Vec<String>,
    /// Convergence threshold relative to the energy of Y.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Maximum number of iterations.
    #[arg(long = "t-max")]
    t_max: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long = "emit-svg")]
    emit_svg: bool,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Multiplier on the noise floor used as the noisy threshold.
    #[arg(long = "noise-factor")]
    noise_factor: Option<f64>,
    /// Record per-run wall time (makes output files differ between runs).
    #[arg(long)]
    timing: bool,
    /// Read settings from a `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Fully resolved and validated settings for one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub n: usize,
    pub m: Vec<usize>,
    #[serde(rename = "K")]
    pub k: Vec<usize>,
    #[serde(rename = "N")]
    pub big_n: Vec<usize>,
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub epsilon: f64,
    pub t_max: usize,
    #[serde(skip)]
    pub out: PathBuf,
    pub emit_svg: bool,
    #[serde(skip)]
    pub threads: Option<usize>,
    pub noise_factor: f64,
    pub timing: bool,
}

pub const DEFAULT_N: usize = 100;
pub const DEFAULT_M: usize = 40;
pub const DEFAULT_K: usize = 30;
pub const DEFAULT_BIG_N: usize = 20;
pub const DEFAULT_TRIALS: usize = 200;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_OUT: &str = "ssmusic-out";

/// Coarse default phase grid: `m ∈ {10, …, 100}`, `K ∈ {5, 15, …, 95}`.
pub fn default_phase_m() -> Vec<usize> {
    (10..=100).step_by(10).collect()
}

pub fn default_phase_k() -> Vec<usize> {
    (5..=95).step_by(10).collect()
}

const KEYS: [&str; 16] = [
    "command",
    "n",
    "m",
    "K",
    "N",
    "snr-db",
    "trials",
    "seed",
    "algo",
    "epsilon",
    "t-max",
    "out",
    "emit-svg",
    "threads",
    "noise-factor",
    "timing",
];

/// Where a resolved value came from, for error messages.
#[derive(Debug, Clone)]
enum Origin {
    Flag,
    File(PathBuf, usize),
    Default,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Flag => f.write_str("command line"),
            Origin::File(path, line) => write!(f, "{}:{line}", path.display()),
            Origin::Default => f.write_str("default"),
        }
    }
}

fn config_error(key: &str, origin: &Origin, msg: impl fmt::Display) -> CliError {
    CliError::Config(format!("`{key}` ({origin}): {msg}"))
}

#[derive(Debug)]
struct FileValues {
    path: PathBuf,
    values: HashMap<String, (String, usize)>,
}

impl FileValues {
    fn empty() -> Self {
        Self {
            path: PathBuf::new(),
            values: HashMap::new(),
        }
    }

    fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::parse(path, &text)
    }

    fn parse(path: &Path, text: &str) -> Result<Self, CliError> {
        let mut values = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = || format!("{}:{line_no}", path.display());
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{}: expected `key = value`", at())))?;
            let key = key.trim().replace('_', "-");
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::Config(format!("{}: unknown key `{key}`", at())));
            }
            if values
                .insert(key.clone(), (value.trim().to_string(), line_no))
                .is_some()
            {
                return Err(CliError::Config(format!("{}: duplicate key `{key}`", at())));
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            values,
        })
    }

    fn get(&self, key: &str) -> Option<(&str, Origin)> {
        self.values
            .get(key)
            .map(|(v, line)| (v.as_str(), Origin::File(self.path.clone(), *line)))
    }
}

/// Picks the flag value, else the parsed file value, else the default.
fn layer<T: FromStr>(
    key: &str,
    flag: Option<T>,
    file: &FileValues,
    default: impl FnOnce() -> T,
) -> Result<(T, Origin), CliError>
where
    T::Err: fmt::Display,
{
    if let Some(v) = flag {
        return Ok((v, Origin::Flag));
    }
    match file.get(key) {
        Some((raw, origin)) => raw
            .parse()
            .map(|v| (v, origin.clone()))
            .map_err(|e| config_error(key, &origin, format!("invalid value `{raw}`: {e}"))),
        None => Ok((default(), Origin::Default)),
    }
}

fn layer_list(
    key: &str,
    flag: Option<Vec<usize>>,
    file: &FileValues,
) -> Result<Option<(Vec<usize>, Origin)>, CliError> {
    if let Some(v) = flag {
        return Ok(Some((v, Origin::Flag)));
    }
    let Some((raw, origin)) = file.get(key) else {
        return Ok(None);
    };
    raw.split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map(|v| Some((v, origin.clone())))
        .map_err(|e| config_error(key, &origin, format!("invalid list `{raw}`: {e}")))
}

fn parse_bool(raw: &str) -> Result<bool, String> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}

/// Resolves `args` (without the program name) and an optional config file.
/// A `--config` flag in `args` is used when `file` is `None`.
pub fn parse_config<S: AsRef<str>>(args: &[S], file: Option<&Path>) -> Result<RunConfig, CliError> {
    let argv = std::iter::once("ssmusic").chain(args.iter().map(|s| s.as_ref()));
    let args = Args::try_parse_from(argv).map_err(CliError::Usage)?;
    let file_path = file.map(Path::to_path_buf).or_else(|| args.config.clone());
    let file = match &file_path {
        Some(p) => FileValues::read(p)?,
        None => FileValues::empty(),
    };
    resolve(args, &file)
}

fn resolve(args: Args, file: &FileValues) -> Result<RunConfig, CliError> {
    let command = match args.command {
        Some(c) => c,
        None => match file.get("command") {
            Some((raw, origin)) => {
                Command::from_str_value(raw).map_err(|e| config_error("command", &origin, e))?
            }
            None => {
                return Err(CliError::Config(
                    "a command is required: one of solve, sweep, phase, hist".into(),
                ))
            }
        },
    };

    let (n, n_origin) = layer("n", args.n, file, || DEFAULT_N)?;
    let m = layer_list("m", args.m, file)?;
    let k = layer_list("K", args.k, file)?;
    let big_n = layer_list("N", args.big_n, file)?;
    let (snr_db, snr_origin) = match args.snr_db {
        Some(v) => (Some(v), Origin::Flag),
        None => match file.get("snr-db") {
            Some((raw, origin)) => (
                Some(raw.parse::<f64>().map_err(|e| {
                    config_error("snr-db", &origin, format!("invalid value `{raw}`: {e}"))
                })?),
                origin,
            ),
            None => (None, Origin::Default),
        },
    };
    let (trials, trials_origin) = layer("trials", args.trials, file, || {
        if command == Command::Solve {
            1
        } else {
            DEFAULT_TRIALS
        }
    })?;
    let (seed, _) = layer("seed", args.seed, file, || DEFAULT_SEED)?;
    let (epsilon, eps_origin) = layer("epsilon", args.epsilon, file, || DEFAULT_EPSILON)?;
    let (t_max, t_max_origin) = layer("t-max", args.t_max, file, || DEFAULT_T_MAX)?;
    let (out, _) = layer("out", args.out, file, || PathBuf::from(DEFAULT_OUT))?;
    let (threads, threads_origin) = match args.threads {
        Some(t) => (Some(t), Origin::Flag),
        None => match file.get("threads") {
            Some((raw, origin)) => (
                Some(raw.parse::<usize>().map_err(|e| {
                    config_error("threads", &origin, format!("invalid value `{raw}`: {e}"))
                })?),
                origin,
            ),
            None => (None, Origin::Default),
        },
    };
    let (noise_factor, nf_origin) = layer("noise-factor", args.noise_factor, file, || {
        DEFAULT_NOISE_EPSILON_FACTOR
    })?;
    let file_bool = |key: &str| -> Result<bool, CliError> {
        match file.get(key) {
            Some((raw, origin)) => parse_bool(raw).map_err(|e| config_error(key, &origin, e)),
            None => Ok(false),
        }
    };
    let emit_svg = args.emit_svg || file_bool("emit-svg")?;
    let timing = args.timing || file_bool("timing")?;

    let (algo_names, algo_origin) = if !args.algo.is_empty() {
        (args.algo, Origin::Flag)
    } else if let Some((raw, origin)) = file.get("algo") {
        (
            raw.split(',').map(|s| s.trim().to_string()).collect(),
            origin,
        )
    } else {
        (vec!["ss_music".to_string()], Origin::Default)
    };
    let algorithms = ssmusic_core::harness::parse_algorithms(&algo_names)
        .map_err(|e| config_error("algo", &algo_origin, e))?;

    let single = |v: Option<(Vec<usize>, Origin)>, default: usize| match v {
        Some((list, origin)) => (list, origin),
        None => (vec![default], Origin::Default),
    };
    let (m, m_origin, k, k_origin) = if command == Command::Phase {
        let (m, mo) = m.unwrap_or_else(|| (default_phase_m(), Origin::Default));
        let (k, ko) = k.unwrap_or_else(|| (default_phase_k(), Origin::Default));
        (m, mo, k, ko)
    } else {
        let (m, mo) = single(m, DEFAULT_M);
        let (k, ko) = single(k, DEFAULT_K);
        (m, mo, k, ko)
    };
    let (big_n, big_n_origin) = single(big_n, DEFAULT_BIG_N);

    // Validation.
    let check = |ok: bool, key: &str, origin: &Origin, msg: &str| {
        if ok {
            Ok(())
        } else {
            Err(config_error(key, origin, msg))
        }
    };
    check(n >= 2, "n", &n_origin, "must be at least 2")?;
    for (key, list, origin) in [
        ("m", &m, &m_origin),
        ("K", &k, &k_origin),
        ("N", &big_n, &big_n_origin),
    ] {
        check(!list.is_empty(), key, origin, "must not be empty")?;
        check(
            list.iter().all(|&v| v >= 1),
            key,
            origin,
            "values must be at least 1",
        )?;
        if matches!(command, Command::Solve | Command::Hist) {
            check(
                list.len() == 1,
                key,
                origin,
                "takes a single value for this command",
            )?;
        }
    }
    if command == Command::Phase {
        check(
            big_n.len() == 1,
            "N",
            &big_n_origin,
            "takes a single value for phase",
        )?;
    }
    check(
        k.iter().all(|&v| v < n),
        "K",
        &k_origin,
        &format!("values must be below n = {n}"),
    )?;
    check(trials >= 1, "trials", &trials_origin, "must be at least 1")?;
    if command == Command::Solve {
        check(
            trials == 1,
            "trials",
            &trials_origin,
            "solve runs a single instance",
        )?;
    }
    check(
        epsilon.is_finite() && epsilon >= 0.0,
        "epsilon",
        &eps_origin,
        "must be finite and non-negative",
    )?;
    check(t_max >= 1, "t-max", &t_max_origin, "must be at least 1")?;
    if let Some(t) = threads {
        check(t >= 1, "threads", &threads_origin, "must be at least 1")?;
    }
    if let Some(s) = snr_db {
        check(s.is_finite(), "snr-db", &snr_origin, "must be finite")?;
    }
    check(
        noise_factor.is_finite() && noise_factor > 0.0,
        "noise-factor",
        &nf_origin,
        "must be positive",
    )?;

    Ok(RunConfig {
        command,
        n,
        m,
        k,
        big_n,
        snr_db,
        trials,
        seed,
        algorithms,
        epsilon,
        t_max,
        out,
        emit_svg,
        threads,
        noise_factor,
        timing,
    })
}

fn join(list: &[usize]) -> String {
    list.iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    /// The settings that determine the results, in config-file syntax. The
    /// output directory and thread count are left out: they do not change
    /// any result.
    pub fn to_config_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("command = {}", self.command),
            format!("n = {}", self.n),
            format!("m = {}", join(&self.m)),
            format!("K = {}", join(&self.k)),
            format!("N = {}", join(&self.big_n)),
        ];
        if let Some(s) = self.snr_db {
            lines.push(format!("snr-db = {s}"));
        }
        let algos: Vec<&str> = self.algorithms.iter().map(|a| a.name()).collect();
        lines.extend([
            format!("trials = {}", self.trials),
            format!("seed = {}", self.seed),
            format!("algo = {}", algos.join(",")),
            format!("epsilon = {}", self.epsilon),
            format!("t-max = {}", self.t_max),
            format!("noise-factor = {}", self.noise_factor),
            format!("emit-svg = {}", self.emit_svg),
            format!("timing = {}", self.timing),
        ]);
        lines
    }
}
