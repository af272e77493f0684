//! Signal rank and subspace estimation from noisy measurements, and the
//! noisy-mode wrapper around SS-MUSIC.

use crate::error::{JsrError, Result};
use crate::linalg::{self, SubspaceBasis, DEFAULT_RANK_TOL};
use crate::model::{JsrProblem, MmvMatrix};
use crate::solver::{self, SignalSubspace, SolveResult, SsMusicConfig};

/// Singular values above `τ · σ_noise · √max(m, N)` count as signal.
pub const RANK_THRESHOLD_FACTOR: f64 = 2.0;

/// Noisy threshold `ε = factor · m · N · σ_noise²`.
pub const DEFAULT_NOISE_EPSILON_FACTOR: f64 = 1.5;

/// Without a noise level, a consecutive singular-value ratio below this is
/// not taken as a signal/noise boundary and the full rank is reported.
pub const MIN_SPECTRAL_GAP: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct NoisyEstimate {
    pub rank_estimate: usize,
    pub signal_basis: SubspaceBasis,
    /// All singular values of `Y`, descending.
    pub singular_values: Vec<f64>,
}

impl NoisyEstimate {
    /// Energy of `Y` outside the estimated signal subspace.
    pub fn residual_energy(&self) -> f64 {
        self.singular_values[self.rank_estimate..]
            .iter()
            .map(|s| s * s)
            .sum()
    }
}

fn rank_from_noise_level(sigma: &[f64], noise_sigma: f64, m: usize, n: usize) -> usize {
    let threshold = RANK_THRESHOLD_FACTOR * noise_sigma * (m.max(n) as f64).sqrt();
    let floor = DEFAULT_RANK_TOL * sigma[0];
    sigma.iter().filter(|&&s| s > threshold.max(floor)).count()
}

fn rank_from_largest_gap(sigma: &[f64]) -> usize {
    let floor = DEFAULT_RANK_TOL * sigma[0];
    let numerical = sigma.iter().filter(|&&s| s > floor).count();
    if numerical < sigma.len() {
        // Noiseless and rank deficient: the gap at the numerical rank is
        // effectively infinite.
        return numerical;
    }
    let best = sigma
        .windows(2)
        .enumerate()
        .map(|(i, w)| (i + 1, w[0] / w[1]))
        .fold(None, |best: Option<(usize, f64)>, (i, g)| match best {
            Some((_, bg)) if g <= bg => best,
            _ => Some((i, g)),
        });
    match best {
        Some((i, g)) if g >= MIN_SPECTRAL_GAP => i,
        _ => sigma.len(),
    }
}

/// Estimates the signal rank and the signal subspace of `Y`.
///
/// With a known noise level the rank counts singular values above
/// `τ·σ·√max(m, N)`; otherwise the largest gap in the spectrum decides.
pub fn estimate_signal_subspace(
    y_noisy: &MmvMatrix,
    noise_sigma: Option<f64>,
) -> Result<NoisyEstimate> {
    let y = y_noisy.matrix();
    let sigma = linalg::singular_values(y)?;
    if sigma[0] == 0.0 {
        return Err(JsrError::InvalidInput("measurement matrix is zero".into()));
    }
    let rank_estimate = match noise_sigma {
        Some(s) if !(s >= 0.0 && s.is_finite()) => {
            return Err(JsrError::InvalidInput(format!(
                "noise level must be >= 0, got {s}"
            )))
        }
        Some(s) => rank_from_noise_level(&sigma, s, y.nrows(), y.ncols()),
        None => rank_from_largest_gap(&sigma),
    };
    if rank_estimate == 0 {
        return Err(JsrError::NoSignal);
    }
    let signal_basis = linalg::orthonormal_basis(y, rank_estimate)?;
    Ok(NoisyEstimate {
        rank_estimate,
        signal_basis,
        singular_values: sigma,
    })
}

/// Absolute noise-floor threshold for the fitness test.
pub fn noise_threshold(
    problem: &JsrProblem,
    estimate: &NoisyEstimate,
    noise_sigma: Option<f64>,
    factor: f64,
) -> f64 {
    let floor = match noise_sigma {
        Some(s) => (problem.m() * problem.y().ncols()) as f64 * s * s,
        None => estimate.residual_energy(),
    };
    factor * floor
}

/// SS-MUSIC on noisy measurements: the rank and signal basis come from
/// [`estimate_signal_subspace`], the threshold from the noise floor (never
/// below the noiseless `cfg.epsilon`).
pub fn ss_music_noisy(
    problem: &JsrProblem,
    cfg: &SsMusicConfig,
    noise_sigma: Option<f64>,
) -> Result<SolveResult> {
    ss_music_noisy_with_factor(problem, cfg, noise_sigma, DEFAULT_NOISE_EPSILON_FACTOR)
}

pub fn ss_music_noisy_with_factor(
    problem: &JsrProblem,
    cfg: &SsMusicConfig,
    noise_sigma: Option<f64>,
    factor: f64,
) -> Result<SolveResult> {
    cfg.validate()?;
    solver::check_solvable(problem)?;
    let (signal, cfg) = noisy_setup(problem, cfg, noise_sigma, factor)?;
    solver::ss_music_with_signal(problem, &cfg, &signal)
}

/// Signal subspace and adjusted config for running a rank-aware solver on
/// noisy data.
pub fn noisy_setup(
    problem: &JsrProblem,
    cfg: &SsMusicConfig,
    noise_sigma: Option<f64>,
    factor: f64,
) -> Result<(SignalSubspace, SsMusicConfig)> {
    let est = estimate_signal_subspace(problem.mmv(), noise_sigma)?;
    let abs = noise_threshold(problem, &est, noise_sigma, factor);
    let rel = abs / problem.mmv().energy();
    let rank = est.rank_estimate.min(problem.k());
    let basis = if rank == est.rank_estimate {
        est.signal_basis
    } else {
        linalg::orthonormal_basis(problem.y(), rank)?
    };
    let cfg = SsMusicConfig {
        epsilon: cfg.epsilon.max(rel),
        rank_override: Some(rank),
        ..*cfg
    };
    Ok((SignalSubspace { rank, basis }, cfg))
}
