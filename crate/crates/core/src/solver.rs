//! MUSIC and the semi-supervised MUSIC (SS-MUSIC) solver.
//!
//! MUSIC labels as positive the `K` atoms closest to the signal subspace of
//! `Y`. When `rank(Y) = r < K` that subspace is too small to discriminate, so
//! SS-MUSIC enlarges it with `K − r` atoms it labels itself. Each iteration
//!
//! 1. removes the span of the current positive atoms from `Y` and picks the
//!    `K − r` remaining atoms closest to what is left,
//! 2. fits `Y` on those atoms plus the current positives by least squares and
//!    keeps the `K − r` atoms with the largest coefficient rows,
//! 3. classifies all atoms against `span(U_Y, kept atoms)` with the kept
//!    atoms forced positive.
//!
//! The loop stops once the fitness of the label configuration drops to the
//! threshold.

use std::collections::HashSet;

use serde::Serialize;

use crate::error::{JsrError, Result};
use crate::linalg::{self, RealMatrix, SubspaceBasis, DEFAULT_RANK_TOL};
use crate::model::{self, support_of, AtomSet, JsrProblem, LabelConfig};

/// Outcome of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub support: AtomSet,
    /// Number of executed iterations (loop bodies).
    pub iterations: usize,
    /// Fitness after each iteration.
    pub fitness_trace: Vec<f64>,
    pub converged: bool,
}

impl SolveResult {
    pub fn final_fitness(&self) -> Option<f64> {
        self.fitness_trace.last().copied()
    }
}

/// Default relative convergence threshold: `ε = 1e-8 · ‖Y‖_F²`.
pub const DEFAULT_EPSILON: f64 = 1e-8;
pub const DEFAULT_T_MAX: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SsMusicConfig {
    /// Convergence threshold relative to `‖Y‖_F²`.
    pub epsilon: f64,
    pub t_max: usize,
    /// Use this signal rank instead of the numerical rank of `Y`.
    pub rank_override: Option<usize>,
}

impl Default for SsMusicConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            t_max: DEFAULT_T_MAX,
            rank_override: None,
        }
    }
}

impl SsMusicConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(JsrError::InvalidInput(format!(
                "epsilon must be finite and non-negative, got {}",
                self.epsilon
            )));
        }
        if self.t_max == 0 {
            return Err(JsrError::InvalidInput("t_max must be at least 1".into()));
        }
        Ok(())
    }

    /// Absolute threshold for `problem`.
    pub fn threshold(&self, problem: &JsrProblem) -> f64 {
        self.epsilon * problem.mmv().energy()
    }
}

/// Estimated signal part of `Y`: its rank and an orthonormal basis.
#[derive(Debug, Clone)]
pub struct SignalSubspace {
    pub rank: usize,
    pub basis: SubspaceBasis,
}

impl SignalSubspace {
    /// Leading `rank` left singular vectors of `Y`.
    pub fn of(problem: &JsrProblem, rank: usize) -> Result<Self> {
        Ok(Self {
            rank,
            basis: linalg::orthonormal_basis(problem.y(), rank)?,
        })
    }
}

/// Rank used by the rank-aware solvers: the numerical rank of `Y`, capped at `K`.
pub fn signal_rank(problem: &JsrProblem) -> Result<usize> {
    let r = linalg::numerical_rank(problem.y(), DEFAULT_RANK_TOL)?;
    if r == 0 {
        return Err(JsrError::InvalidInput("measurement matrix is zero".into()));
    }
    Ok(r.min(problem.k()))
}

/// Classic MUSIC with an `r`-dimensional signal subspace.
pub fn music(problem: &JsrProblem, r: usize) -> Result<SolveResult> {
    let max_r = problem.m().min(problem.y().ncols());
    if r == 0 || r > max_r {
        return Err(JsrError::InvalidInput(format!(
            "MUSIC rank {r} outside [1, {max_r}]"
        )));
    }
    let signal = SignalSubspace::of(problem, r)?;
    let l = model::nsc_classify(
        problem.dictionary(),
        &AtomSet::all(problem.n()),
        &signal.basis,
        problem.k(),
        &AtomSet::empty(),
    )?;
    let fit = model::fitness(&l, problem);
    Ok(SolveResult {
        support: support_of(&l),
        iterations: 1,
        fitness_trace: vec![fit],
        converged: fit <= SsMusicConfig::default().threshold(problem),
    })
}

/// Candidate set `T̂ = A(l₊) ∪ Â(l₋)`: the current positives plus the `K − r`
/// other atoms closest to the part of `Y` outside `span(A(l₊))`.
pub fn candidate_step(
    problem: &JsrProblem,
    current_positive: &AtomSet,
    r: usize,
) -> Result<AtomSet> {
    candidates_from(problem, problem.y(), current_positive, r)
}

fn candidates_from(
    problem: &JsrProblem,
    y: &RealMatrix,
    current_positive: &AtomSet,
    r: usize,
) -> Result<AtomSet> {
    let k = problem.k();
    if !current_positive.is_empty() && current_positive.len() != k {
        return Err(JsrError::InvalidInput(format!(
            "current positive set has {} atoms, expected 0 or K = {k}",
            current_positive.len()
        )));
    }
    if r >= k {
        return Err(JsrError::InvalidInput(format!(
            "candidate step needs K - r >= 1 (K = {k}, r = {r})"
        )));
    }
    let dict = problem.dictionary();
    let positive_span = linalg::column_space(&dict.columns(current_positive), DEFAULT_RANK_TOL)?;
    let residual = linalg::complement_project(&positive_span, y)?;

    // Rank decisions on the residual are made against the scale of Y, not of
    // the residual itself.
    let scale = y.norm();
    if residual.norm() <= DEFAULT_RANK_TOL * scale {
        return Err(JsrError::Degenerate(
            "measurements lie inside the span of the current positive atoms".into(),
        ));
    }
    let sigma_max = linalg::singular_values(y)?[0];
    let feature = linalg::column_space_above(&residual, DEFAULT_RANK_TOL * sigma_max, r)?;

    let negatives: Vec<usize> = (0..problem.n())
        .filter(|&i| !current_positive.contains(i))
        .collect();
    let ranked = model::rank_by_distance(dict, &negatives, &feature)?;
    let extra = ranked.iter().take(k - r).map(|&(i, _)| i);
    Ok(current_positive.union(&extra.collect()))
}

/// Fits `Y` on the candidate atoms by least squares and keeps the `keep`
/// atoms whose coefficient rows have the largest ℓ2 norm.
pub fn refine_training_set(
    problem: &JsrProblem,
    candidates: &AtomSet,
    keep: usize,
) -> Result<AtomSet> {
    refine_from(problem, problem.y(), candidates, keep)
}

fn refine_from(
    problem: &JsrProblem,
    y: &RealMatrix,
    candidates: &AtomSet,
    keep: usize,
) -> Result<AtomSet> {
    if keep > candidates.len() {
        return Err(JsrError::InvalidInput(format!(
            "cannot keep {keep} of {} candidates",
            candidates.len()
        )));
    }
    if keep == candidates.len() {
        return Ok(candidates.clone());
    }
    let coeffs = linalg::least_squares(&problem.dictionary().columns(candidates), y)?;
    Ok(largest_rows(candidates.indices(), &coeffs, keep))
}

/// The `keep` entries of `atoms` whose rows in `coeffs` have the largest norm,
/// ties broken by lowest index.
pub(crate) fn largest_rows(atoms: &[usize], coeffs: &RealMatrix, keep: usize) -> AtomSet {
    let norms = linalg::row_norms(coeffs);
    let mut ranked: Vec<(usize, f64)> = atoms.iter().copied().zip(norms.iter().copied()).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().take(keep).map(|(i, _)| i).collect()
}

/// Orthonormal basis of `span([U_Y | A_T])`, truncated at numerical rank.
pub fn augmented_basis(
    problem: &JsrProblem,
    signal: &SubspaceBasis,
    training: &AtomSet,
) -> Result<SubspaceBasis> {
    if training.is_empty() {
        return Ok(signal.clone());
    }
    let atoms = problem.dictionary().columns(training);
    let stacked = RealMatrix::from_fn(problem.m(), signal.dim() + atoms.ncols(), |i, j| {
        if j < signal.dim() {
            signal.matrix()[(i, j)]
        } else {
            atoms[(i, j - signal.dim())]
        }
    });
    linalg::column_space(&stacked, DEFAULT_RANK_TOL)
}

/// Classifies every atom against the augmented subspace `span(U_Y, A_T)`
/// with the training atoms forced positive.
pub fn semi_supervised_classify(
    problem: &JsrProblem,
    signal: &SubspaceBasis,
    training: &AtomSet,
) -> Result<LabelConfig> {
    let basis = augmented_basis(problem, signal, training)?;
    model::nsc_classify(
        problem.dictionary(),
        &AtomSet::all(problem.n()),
        &basis,
        problem.k(),
        training,
    )
}

/// Semi-supervised MUSIC.
pub fn ss_music(problem: &JsrProblem, cfg: &SsMusicConfig) -> Result<SolveResult> {
    cfg.validate()?;
    check_solvable(problem)?;
    let r = match cfg.rank_override {
        Some(r) => r.min(problem.k()),
        None => signal_rank(problem)?,
    };
    let signal = SignalSubspace::of(problem, r)?;
    ss_music_with_signal(problem, cfg, &signal)
}

pub(crate) fn check_solvable(problem: &JsrProblem) -> Result<()> {
    if problem.k() + 1 > problem.m() {
        return Err(JsrError::InvalidInput(format!(
            "need K <= m - 1 (K = {}, m = {})",
            problem.k(),
            problem.m()
        )));
    }
    if problem.mmv().energy() == 0.0 {
        return Err(JsrError::InvalidInput("measurement matrix is zero".into()));
    }
    Ok(())
}

pub(crate) fn ss_music_with_signal(
    problem: &JsrProblem,
    cfg: &SsMusicConfig,
    signal: &SignalSubspace,
) -> Result<SolveResult> {
    let k = problem.k();
    let r = signal.rank;
    let extra = k - r;
    let threshold = cfg.threshold(problem);

    let mut labels = LabelConfig::zeros(problem.n());
    let mut fit = model::fitness(&labels, problem);
    let mut trace = Vec::new();
    let mut seen: HashSet<AtomSet> = HashSet::new();
    seen.insert(AtomSet::empty());
    let mut t = 0;

    while fit > threshold && t < cfg.t_max {
        let training = if extra == 0 {
            AtomSet::empty()
        } else {
            let positive = support_of(&labels);
            let candidates = candidates_from(problem, problem.y(), &positive, r)?;
            refine_from(problem, problem.y(), &candidates, extra)?
        };
        labels = semi_supervised_classify(problem, &signal.basis, &training)?;
        t += 1;
        fit = model::fitness(&labels, problem);
        trace.push(fit);

        // The next iteration depends only on the current labels, so a repeated
        // configuration means the run has entered a cycle. With r = K there is
        // nothing to iterate on at all.
        if extra == 0 || !seen.insert(support_of(&labels)) {
            break;
        }
    }

    Ok(SolveResult {
        support: support_of(&labels),
        iterations: t,
        fitness_trace: trace,
        converged: fit <= threshold,
    })
}
