//! Seeded Monte-Carlo experiments.
//!
//! Every trial draws its problem from a ChaCha stream keyed by
//! `(master_seed, spec_index, trial_index)`, so results do not depend on the
//! number of worker threads or the order in which trials finish. All
//! algorithms of a sweep see the same problem for a given trial.

mod algorithm;
pub mod output;
pub mod svg;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{JsrError, Result};
use crate::linalg::RealMatrix;
use crate::model::{self, AtomSet, Dictionary, JsrProblem, MmvMatrix};

pub use algorithm::{parse_algorithms, Algorithm, SolverSettings};

/// Parameters of one random problem ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSpec {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub master_seed: u64,
}

impl EnsembleSpec {
    /// Noiseless ensemble with `n = 100`.
    pub fn new(m: usize, k: usize, big_n: usize, trials: usize, master_seed: u64) -> Self {
        Self {
            n: 100,
            m,
            k,
            big_n,
            snr_db: None,
            trials,
            master_seed,
        }
    }

    pub fn with_snr(mut self, snr_db: f64) -> Self {
        self.snr_db = Some(snr_db);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(JsrError::Config(msg));
        if self.k == 0 || self.k >= self.n {
            return bad(format!(
                "K = {} must lie in [1, n) with n = {}",
                self.k, self.n
            ));
        }
        if self.m == 0 || self.big_n == 0 {
            return bad("m and N must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return bad(format!("snr_db must be finite, got {snr}"));
            }
        }
        Ok(())
    }
}

/// A generated problem together with what the harness knows about it.
#[derive(Debug, Clone)]
pub struct TrialInstance {
    pub problem: JsrProblem,
    /// Per-entry standard deviation of the added noise, if any.
    pub noise_sigma: Option<f64>,
    pub seed: u64,
    pub hash: String,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the random stream for one trial.
pub fn trial_seed(master_seed: u64, spec_index: usize, trial_index: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ spec_index as u64) ^ trial_index as u64)
}

/// Draws the problem for `trial_index` of `spec` (spec index 0).
pub fn generate_problem(spec: &EnsembleSpec, trial_index: usize) -> Result<JsrProblem> {
    Ok(generate_instance(spec, 0, trial_index)?.problem)
}

/// Gaussian `A` with unit columns, uniformly random support of size `K`,
/// Gaussian rows of `X` on the support, `Y = AX` plus optional noise scaled to
/// the exact SNR `10·log10(‖Y‖²/‖E‖²)`.
pub fn generate_instance(
    spec: &EnsembleSpec,
    spec_index: usize,
    trial_index: usize,
) -> Result<TrialInstance> {
    spec.validate()?;
    let seed = trial_seed(spec.master_seed, spec_index, trial_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, n, k, big_n) = (spec.m, spec.n, spec.k, spec.big_n);

    let a = RealMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal));
    let dictionary = Dictionary::new(a)?;
    let support: AtomSet = rand::seq::index::sample(&mut rng, n, k)
        .into_iter()
        .collect();
    let x = RealMatrix::from_fn(k, big_n, |_, _| rng.sample(StandardNormal));
    let mut y = dictionary.columns(&support) * x;

    let mut noise_sigma = None;
    if let Some(snr_db) = spec.snr_db {
        let mut e = RealMatrix::from_fn(m, big_n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let target = y.norm_squared() / 10f64.powf(snr_db / 10.0);
        e *= (target / e.norm_squared()).sqrt();
        noise_sigma = Some(e.norm() / ((m * big_n) as f64).sqrt());
        y += e;
    }

    let hash = problem_hash(dictionary.matrix(), &y, &support);
    let problem = JsrProblem::new(dictionary, MmvMatrix::new(y)?, k, Some(support))?;
    Ok(TrialInstance {
        problem,
        noise_sigma,
        seed,
        hash,
    })
}

fn problem_hash(a: &RealMatrix, y: &RealMatrix, support: &AtomSet) -> String {
    let mut h = Sha256::new();
    for dim in [a.nrows(), a.ncols(), y.ncols()] {
        h.update((dim as u64).to_le_bytes());
    }
    for v in a.iter().chain(y.iter()) {
        h.update(v.to_bits().to_le_bytes());
    }
    for &i in support.indices() {
        h.update((i as u64).to_le_bytes());
    }
    h.finalize()[..8]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// One algorithm run on one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub algorithm: Algorithm,
    pub spec_index: usize,
    pub trial_index: usize,
    pub seed: u64,
    /// Recovered support equals the true support exactly.
    pub success: bool,
    pub iterations: usize,
    /// Residual energy of `Y` outside the recovered support; NaN when the
    /// solver or the problem generation failed.
    pub fitness_final: f64,
    pub wall_time_us: u64,
    pub problem_hash: String,
    pub error: Option<String>,
}

/// Aggregate of one algorithm over one ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Successful trials binned by iteration count, failures at `t_max + 1`.
    pub iteration_histogram: BTreeMap<usize, usize>,
    pub mean_wall_time_us: f64,
    pub errors: usize,
}

impl AlgorithmSummary {
    /// Most frequent bin among successful trials (lowest on ties).
    pub fn modal_success_iterations(&self, t_max: usize) -> Option<usize> {
        self.iteration_histogram
            .iter()
            .filter(|(&it, _)| it <= t_max)
            .fold(None, |best: Option<(usize, usize)>, (&it, &c)| match best {
                Some((_, bc)) if c <= bc => best,
                _ => Some((it, c)),
            })
            .map(|(it, _)| it)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub spec: EnsembleSpec,
    pub spec_index: usize,
    pub algorithms: Vec<AlgorithmSummary>,
}

impl SweepResult {
    pub fn summary(&self, algorithm: Algorithm) -> Option<&AlgorithmSummary> {
        self.algorithms.iter().find(|s| s.algorithm == algorithm)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub settings: SolverSettings,
    /// Worker threads; `None` uses the available parallelism.
    pub threads: Option<usize>,
    /// Measure wall time per run. Off by default so output files are
    /// reproducible byte for byte.
    pub record_timing: bool,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub results: Vec<SweepResult>,
    /// Ordered by spec, then trial, then algorithm.
    pub records: Vec<TrialRecord>,
}

/// Runs every algorithm on every trial of every spec. Algorithm names are
/// resolved before any computation starts.
pub fn run_sweep<S: AsRef<str>>(
    spec_grid: &[EnsembleSpec],
    algorithms: &[S],
    opts: &SweepOptions,
) -> Result<SweepOutput> {
    let algorithms = parse_algorithms(algorithms)?;
    run_sweep_with(spec_grid, &algorithms, opts)
}

pub fn run_sweep_with(
    spec_grid: &[EnsembleSpec],
    algorithms: &[Algorithm],
    opts: &SweepOptions,
) -> Result<SweepOutput> {
    if algorithms.is_empty() {
        return Err(JsrError::Config("no algorithms selected".into()));
    }
    for spec in spec_grid {
        spec.validate()?;
    }
    opts.settings.validate()?;

    let tasks: Vec<(usize, usize)> = spec_grid
        .iter()
        .enumerate()
        .flat_map(|(si, spec)| (0..spec.trials).map(move |t| (si, t)))
        .collect();
    let run = || -> Vec<Vec<TrialRecord>> {
        tasks
            .par_iter()
            .map(|&(si, t)| run_trial(&spec_grid[si], si, t, algorithms, opts))
            .collect()
    };
    let per_trial = match opts.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| JsrError::Config(format!("cannot build worker pool: {e}")))?
            .install(run),
        None => run(),
    };
    let records: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();

    let t_max = opts.settings.ss.t_max;
    let results = spec_grid
        .iter()
        .enumerate()
        .map(|(si, spec)| SweepResult {
            spec: spec.clone(),
            spec_index: si,
            algorithms: algorithms
                .iter()
                .map(|&alg| {
                    summarize(
                        alg,
                        records
                            .iter()
                            .filter(|r| r.spec_index == si && r.algorithm == alg),
                        t_max,
                    )
                })
                .collect(),
        })
        .collect();
    Ok(SweepOutput { results, records })
}

fn run_trial(
    spec: &EnsembleSpec,
    spec_index: usize,
    trial_index: usize,
    algorithms: &[Algorithm],
    opts: &SweepOptions,
) -> Vec<TrialRecord> {
    let failed = |alg: Algorithm, seed: u64, hash: String, err: String| TrialRecord {
        algorithm: alg,
        spec_index,
        trial_index,
        seed,
        success: false,
        iterations: 0,
        fitness_final: f64::NAN,
        wall_time_us: 0,
        problem_hash: hash,
        error: Some(err),
    };
    let instance = match generate_instance(spec, spec_index, trial_index) {
        Ok(inst) => inst,
        Err(e) => {
            let seed = trial_seed(spec.master_seed, spec_index, trial_index);
            return algorithms
                .iter()
                .map(|&alg| failed(alg, seed, String::new(), e.to_string()))
                .collect();
        }
    };
    let truth = instance
        .problem
        .true_support()
        .expect("generated problems carry their support");
    algorithms
        .iter()
        .map(|&alg| {
            let start = Instant::now();
            let outcome = alg.run(&instance.problem, &opts.settings, instance.noise_sigma);
            let wall_time_us = if opts.record_timing {
                start.elapsed().as_micros() as u64
            } else {
                0
            };
            match outcome {
                Ok(res) => TrialRecord {
                    algorithm: alg,
                    spec_index,
                    trial_index,
                    seed: instance.seed,
                    success: &res.support == truth,
                    iterations: res.iterations,
                    fitness_final: model::support_fitness(&instance.problem, &res.support),
                    wall_time_us,
                    problem_hash: instance.hash.clone(),
                    error: None,
                },
                Err(e) => TrialRecord {
                    wall_time_us,
                    ..failed(alg, instance.seed, instance.hash.clone(), e.to_string())
                },
            }
        })
        .collect()
}

fn summarize<'a>(
    algorithm: Algorithm,
    records: impl Iterator<Item = &'a TrialRecord>,
    t_max: usize,
) -> AlgorithmSummary {
    let mut trials = 0;
    let mut successes = 0;
    let mut errors = 0;
    let mut wall = 0u64;
    let mut hist = BTreeMap::new();
    for r in records {
        trials += 1;
        wall += r.wall_time_us;
        errors += r.error.is_some() as usize;
        let bin = if r.success {
            successes += 1;
            r.iterations
        } else {
            t_max + 1
        };
        *hist.entry(bin).or_insert(0) += 1;
    }
    AlgorithmSummary {
        algorithm,
        trials,
        successes,
        success_rate: if trials == 0 {
            0.0
        } else {
            successes as f64 / trials as f64
        },
        iteration_histogram: hist,
        mean_wall_time_us: if trials == 0 {
            0.0
        } else {
            wall as f64 / trials as f64
        },
        errors,
    }
}

/// Success rates over an `(m, K)` grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseMap {
    pub algorithm: Algorithm,
    pub m_grid: Vec<usize>,
    pub k_grid: Vec<usize>,
    /// `rates[i][j]` belongs to `(m_grid[i], k_grid[j])`.
    pub rates: Vec<Vec<f64>>,
    /// Cells with `m <= K`, where recovery is not expected.
    pub infeasible: Vec<Vec<bool>>,
}

impl PhaseMap {
    pub fn rate(&self, m: usize, k: usize) -> Option<f64> {
        let i = self.m_grid.iter().position(|&v| v == m)?;
        let j = self.k_grid.iter().position(|&v| v == k)?;
        Some(self.rates[i][j])
    }
}

/// The `(m, K)` cells of a phase map in row-major order, as ensemble specs.
pub fn phase_specs(
    m_grid: &[usize],
    k_grid: &[usize],
    big_n: usize,
    n: usize,
    trials: usize,
    master_seed: u64,
) -> Vec<EnsembleSpec> {
    m_grid
        .iter()
        .flat_map(|&m| {
            k_grid.iter().map(move |&k| EnsembleSpec {
                n,
                m,
                k,
                big_n,
                snr_db: None,
                trials,
                master_seed,
            })
        })
        .collect()
}

/// Assembles a phase map from a sweep over [`phase_specs`].
pub fn phase_map_from(
    algorithm: Algorithm,
    m_grid: &[usize],
    k_grid: &[usize],
    results: &[SweepResult],
) -> PhaseMap {
    let cols = k_grid.len();
    let rate = |i: usize, j: usize| {
        results[i * cols + j]
            .summary(algorithm)
            .map_or(0.0, |s| s.success_rate)
    };
    PhaseMap {
        algorithm,
        m_grid: m_grid.to_vec(),
        k_grid: k_grid.to_vec(),
        rates: (0..m_grid.len())
            .map(|i| (0..cols).map(|j| rate(i, j)).collect())
            .collect(),
        infeasible: m_grid
            .iter()
            .map(|&m| k_grid.iter().map(|&k| m <= k).collect())
            .collect(),
    }
}

/// Phase transition of one algorithm over `(m, K)` with `n = 100`.
pub fn phase_transition(
    m_grid: &[usize],
    k_grid: &[usize],
    big_n: usize,
    trials: usize,
    algorithm: &str,
    master_seed: u64,
    opts: &SweepOptions,
) -> Result<PhaseMap> {
    if m_grid.is_empty() || k_grid.is_empty() {
        return Err(JsrError::Config("phase grids must be non-empty".into()));
    }
    let alg: Algorithm = algorithm.parse()?;
    let specs: Vec<EnsembleSpec> = phase_specs(m_grid, k_grid, big_n, 100, trials, master_seed)
        .into_iter()
        .filter(|s| s.k < s.n)
        .collect();
    if specs.len() != m_grid.len() * k_grid.len() {
        return Err(JsrError::Config(
            "every K in the grid must be below n = 100".into(),
        ));
    }
    let out = run_sweep_with(&specs, &[alg], opts)?;
    Ok(phase_map_from(alg, m_grid, k_grid, &out.results))
}

/// Iteration histogram of one algorithm; failures land in bin `t_max + 1`.
pub fn iteration_histogram(
    spec: &EnsembleSpec,
    algorithm: &str,
    trials: usize,
    opts: &SweepOptions,
) -> Result<BTreeMap<usize, usize>> {
    let alg: Algorithm = algorithm.parse()?;
    let spec = EnsembleSpec {
        trials,
        ..spec.clone()
    };
    let out = run_sweep_with(&[spec], &[alg], opts)?;
    Ok(out.results[0].algorithms[0].iteration_histogram.clone())
}

/// Which ensemble parameter a default sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    M,
    K,
    N,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::M => "m",
            SweepAxis::K => "K",
            SweepAxis::N => "N",
        }
    }

    pub fn value(self, spec: &EnsembleSpec) -> usize {
        match self {
            SweepAxis::M => spec.m,
            SweepAxis::K => spec.k,
            SweepAxis::N => spec.big_n,
        }
    }
}

/// Default one-parameter sweeps: `m ∈ {31, 33, …, 45}` at `K = 30, N = 20`;
/// `K ∈ {10, 14, …, 38}` at `m = 40, N = 20`; `N ∈ {5, 10, …, 30}` at
/// `m = 40, K = 30`.
pub fn default_grid(axis: SweepAxis, trials: usize, master_seed: u64) -> Vec<EnsembleSpec> {
    let spec = |m, k, big_n| EnsembleSpec::new(m, k, big_n, trials, master_seed);
    match axis {
        SweepAxis::M => (31..=45).step_by(2).map(|m| spec(m, 30, 20)).collect(),
        SweepAxis::K => (10..=38).step_by(4).map(|k| spec(40, k, 20)).collect(),
        SweepAxis::N => (5..=30).step_by(5).map(|n| spec(40, 30, n)).collect(),
    }
}
