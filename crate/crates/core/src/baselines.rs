//! Comparison algorithms: SOMP, SCoSaMP, RA-ORMP, SA-MUSIC and iMUSIC.
//!
//! Selection rules follow the canonical forms of the original methods:
//!
//! * **SOMP** picks the atom with the largest ℓ2 norm of correlations with
//!   the residual matrix, refits by least squares and repeats `K` times.
//! * **SCoSaMP** merges the current support with the `2K` atoms of largest
//!   correlation-row norm, fits, prunes back to the `K` largest coefficient
//!   rows and refits. A pruning step that does not lower the residual ends
//!   the run.
//! * **RA-ORMP** keeps an orthonormal basis of the residual signal subspace
//!   and picks the atom maximizing `‖Uᵀã‖ / ‖ã‖`, where `ã` is the atom with
//!   the span of the selected atoms projected out.
//! * **SA-MUSIC** runs `K − r` RA-ORMP steps, then classifies every atom
//!   against the signal subspace augmented with those atoms.
//! * **iMUSIC** (fixed-size variant) seeds the training set with `K − r`
//!   SOMP steps and then alternates: pad the positives with the negatives
//!   closest to the augmented subspace (`K − r` beyond the `K` needed), fit,
//!   and take the `K` largest coefficient rows directly as the new labels and
//!   the `K − r` largest as the new training set.

use std::collections::HashSet;

use crate::error::{JsrError, Result};
use crate::linalg::{self, SubspaceBasis, DEFAULT_RANK_TOL};
use crate::model::{self, AtomSet, JsrProblem};
use crate::solver::{
    self, largest_rows, semi_supervised_classify, SignalSubspace, SolveResult, SsMusicConfig,
    DEFAULT_EPSILON,
};

/// Below this norm (relative to 1 for unit atoms) an atom is treated as lying
/// inside the span of the selected atoms.
const COMPLEMENT_NORM_TOL: f64 = 1e-10;

fn residual_energy(problem: &JsrProblem, support: &AtomSet) -> f64 {
    model::support_fitness(problem, support)
}

fn finish(
    problem: &JsrProblem,
    support: AtomSet,
    iterations: usize,
    trace: Vec<f64>,
    eps: f64,
) -> SolveResult {
    let fit = residual_energy(problem, &support);
    SolveResult {
        support,
        iterations,
        fitness_trace: trace,
        converged: fit <= eps * problem.mmv().energy(),
    }
}

/// Index of the largest score, ties to the lowest index. `None` if empty.
fn argmax(scores: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    scores
        .fold(None, |best: Option<(usize, f64)>, (i, s)| match best {
            Some((_, bs)) if s <= bs => best,
            _ => Some((i, s)),
        })
        .map(|(i, _)| i)
}

/// `steps` rounds of simultaneous OMP starting from an empty support.
/// Returns the selection order and the residual energy after each round.
fn somp_steps(problem: &JsrProblem, steps: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    let a = problem.dictionary().matrix();
    let y = problem.y();
    let mut selected: Vec<usize> = Vec::with_capacity(steps);
    let mut residual = y.clone();
    let mut trace = Vec::with_capacity(steps);
    for _ in 0..steps {
        let corr = a.transpose() * &residual;
        let pick = argmax(
            corr.row_iter()
                .enumerate()
                .filter(|(i, _)| !selected.contains(i))
                .map(|(i, row)| (i, row.norm())),
        )
        .expect("K < n leaves unselected atoms");
        selected.push(pick);
        let a_s = a.select_columns(&selected);
        let x = linalg::least_squares(&a_s, y)?;
        residual = y - a_s * x;
        trace.push(residual.norm_squared());
    }
    Ok((selected, trace))
}

/// Simultaneous orthogonal matching pursuit; always `K` iterations.
pub fn somp(problem: &JsrProblem) -> Result<SolveResult> {
    let (selected, trace) = somp_steps(problem, problem.k())?;
    Ok(finish(
        problem,
        AtomSet::new(selected),
        problem.k(),
        trace,
        DEFAULT_EPSILON,
    ))
}

/// Simultaneous CoSaMP with the default relative threshold.
pub fn scosamp(problem: &JsrProblem, t_max: usize) -> Result<SolveResult> {
    scosamp_with_epsilon(problem, t_max, DEFAULT_EPSILON)
}

/// Simultaneous CoSaMP stopping once the residual energy is at most
/// `epsilon · ‖Y‖_F²`.
pub fn scosamp_with_epsilon(
    problem: &JsrProblem,
    t_max: usize,
    epsilon: f64,
) -> Result<SolveResult> {
    if t_max == 0 {
        return Err(JsrError::InvalidInput("t_max must be at least 1".into()));
    }
    let a = problem.dictionary().matrix();
    let y = problem.y();
    let k = problem.k();
    let threshold = epsilon * problem.mmv().energy();

    let mut support = AtomSet::empty();
    let mut residual = y.clone();
    let mut energy = residual.norm_squared();
    let mut trace = Vec::new();

    for _ in 0..t_max {
        let proxy = a.transpose() * &residual;
        let all: Vec<usize> = (0..problem.n()).collect();
        let omega = largest_rows(&all, &proxy, 2 * k);
        let merged = support.union(&omega);
        let b = linalg::least_squares(&problem.dictionary().columns(&merged), y)?;
        let pruned = largest_rows(merged.indices(), &b, k);

        let a_s = problem.dictionary().columns(&pruned);
        let x = linalg::least_squares(&a_s, y)?;
        let next_residual = y - a_s * x;
        let next_energy = next_residual.norm_squared();

        if !support.is_empty() && next_energy >= energy {
            // No progress: keep the previous support and stop.
            trace.push(energy);
            break;
        }
        support = pruned;
        residual = next_residual;
        energy = next_energy;
        trace.push(energy);
        if energy <= threshold {
            break;
        }
    }
    let iterations = trace.len();
    Ok(SolveResult {
        support,
        iterations,
        fitness_trace: trace,
        converged: energy <= threshold,
    })
}

/// Rank-aware greedy selection of `steps` atoms against the signal basis.
fn rank_aware_steps(
    problem: &JsrProblem,
    signal: &SubspaceBasis,
    steps: usize,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let a = problem.dictionary().matrix();
    let r = signal.dim();
    let mut selected: Vec<usize> = Vec::with_capacity(steps);
    let mut trace = Vec::with_capacity(steps);
    for _ in 0..steps {
        let span = linalg::column_space(&a.select_columns(&selected), DEFAULT_RANK_TOL)?;
        let deflated = linalg::complement_project(&span, signal.matrix())?;
        let residual_basis = linalg::column_space_above(&deflated, DEFAULT_RANK_TOL, r)?;
        let projected = linalg::complement_project(&span, a)?;
        let u_t = residual_basis.matrix().transpose();
        let pick = argmax(
            (0..problem.n())
                .filter(|i| !selected.contains(i))
                .filter_map(|i| {
                    let col = projected.column(i);
                    let norm = col.norm();
                    (norm > COMPLEMENT_NORM_TOL).then(|| (i, (&u_t * col).norm() / norm))
                }),
        )
        .or_else(|| (0..problem.n()).find(|i| !selected.contains(i)))
        .expect("K < n leaves unselected atoms");
        selected.push(pick);
        trace.push(residual_energy(
            problem,
            &selected.iter().copied().collect(),
        ));
    }
    Ok((selected, trace))
}

/// Rank-aware order-recursive matching pursuit with an `r`-dimensional signal
/// subspace; always `K` iterations.
pub fn ra_ormp(problem: &JsrProblem, r: usize) -> Result<SolveResult> {
    let signal = SignalSubspace::of(problem, r)?;
    ra_ormp_with_signal(problem, &signal)
}

pub(crate) fn ra_ormp_with_signal(
    problem: &JsrProblem,
    signal: &SignalSubspace,
) -> Result<SolveResult> {
    let (selected, trace) = rank_aware_steps(problem, &signal.basis, problem.k())?;
    Ok(finish(
        problem,
        AtomSet::new(selected),
        problem.k(),
        trace,
        DEFAULT_EPSILON,
    ))
}

/// Subspace-augmented MUSIC: `K − r` rank-aware greedy steps, then MUSIC on
/// the augmented subspace. Reports exactly `K − r` iterations.
pub fn sa_music(problem: &JsrProblem, r: usize) -> Result<SolveResult> {
    let signal = SignalSubspace::of(problem, r.min(problem.k()))?;
    sa_music_with_signal(problem, &signal)
}

pub(crate) fn sa_music_with_signal(
    problem: &JsrProblem,
    signal: &SignalSubspace,
) -> Result<SolveResult> {
    let extra = problem.k() - signal.rank;
    let (stage_one, trace) = rank_aware_steps(problem, &signal.basis, extra)?;
    let labels = semi_supervised_classify(problem, &signal.basis, &AtomSet::new(stage_one))?;
    Ok(finish(
        problem,
        model::support_of(&labels),
        extra,
        trace,
        DEFAULT_EPSILON,
    ))
}

/// SA-MUSIC second stage with externally supplied first-stage atoms.
pub fn sa_music_with_stage_one(
    problem: &JsrProblem,
    r: usize,
    stage_one: &AtomSet,
) -> Result<SolveResult> {
    if stage_one.len() + r != problem.k() {
        return Err(JsrError::InvalidInput(format!(
            "stage one must supply K - r = {} atoms, got {}",
            problem.k().saturating_sub(r),
            stage_one.len()
        )));
    }
    let signal = SignalSubspace::of(problem, r)?;
    let labels = semi_supervised_classify(problem, &signal.basis, stage_one)?;
    let fit = model::fitness(&labels, problem);
    Ok(SolveResult {
        support: model::support_of(&labels),
        iterations: 0,
        fitness_trace: Vec::new(),
        converged: fit <= DEFAULT_EPSILON * problem.mmv().energy(),
    })
}

/// iMUSIC with a fixed refinement size `K − r`.
pub fn imusic(problem: &JsrProblem, cfg: &SsMusicConfig) -> Result<SolveResult> {
    cfg.validate()?;
    solver::check_solvable(problem)?;
    let r = match cfg.rank_override {
        Some(r) => r.min(problem.k()),
        None => solver::signal_rank(problem)?,
    };
    let signal = SignalSubspace::of(problem, r)?;
    imusic_with_signal(problem, cfg, &signal)
}

pub(crate) fn imusic_with_signal(
    problem: &JsrProblem,
    cfg: &SsMusicConfig,
    signal: &SignalSubspace,
) -> Result<SolveResult> {
    let k = problem.k();
    let extra = k - signal.rank;
    if extra == 0 {
        return solver::ss_music_with_signal(problem, cfg, signal);
    }
    let threshold = cfg.threshold(problem);
    let n = problem.n();

    // Initial K − r atoms from multiple-vector OMP.
    let (seed, mut trace) = somp_steps(problem, extra.min(cfg.t_max))?;
    let mut training = AtomSet::new(seed);
    let mut positive = training.clone();
    let mut t = trace.len();
    let mut fit = residual_energy(problem, &positive);
    let mut seen: HashSet<AtomSet> = HashSet::new();

    while t < cfg.t_max {
        let augmented = solver::augmented_basis(problem, &signal.basis, &training)?;
        let negatives: Vec<usize> = (0..n).filter(|&i| !positive.contains(i)).collect();
        let ranked = model::rank_by_distance(problem.dictionary(), &negatives, &augmented)?;
        let wanted = k - positive.len() + extra;
        let candidates = positive.union(&ranked.iter().take(wanted).map(|&(i, _)| i).collect());

        let coeffs =
            linalg::least_squares(&problem.dictionary().columns(&candidates), problem.y())?;
        positive = largest_rows(candidates.indices(), &coeffs, k);
        training = largest_rows(candidates.indices(), &coeffs, extra);
        t += 1;
        fit = residual_energy(problem, &positive);
        trace.push(fit);
        if fit <= threshold || !seen.insert(positive.clone()) {
            break;
        }
    }

    Ok(SolveResult {
        support: fill_support(&positive, k, n),
        iterations: t,
        fitness_trace: trace,
        converged: positive.len() == k && fit <= threshold,
    })
}

fn fill_support(partial: &AtomSet, k: usize, n: usize) -> AtomSet {
    let fill = (0..n)
        .filter(|i| !partial.contains(*i))
        .take(k - partial.len());
    partial.union(&fill.collect())
}
