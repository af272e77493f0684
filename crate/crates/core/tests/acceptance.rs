//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line to
//! stderr (uncaptured) and then asserts.
//!
//! Run with `cargo test -p ssmusic-core --test acceptance`.

use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use ssmusic_core::baselines::sa_music;
use ssmusic_core::harness::{
    self, generate_instance, output, run_sweep_with, Algorithm, EnsembleSpec, SweepOptions,
    SweepResult,
};
use ssmusic_core::linalg::{self, RealMatrix, DEFAULT_RANK_TOL};
use ssmusic_core::model::{self, AtomSet};
use ssmusic_core::noise::{estimate_signal_subspace, ss_music_noisy};
use ssmusic_core::solver::{signal_rank, ss_music, SsMusicConfig};

const SEED: u64 = 1;

fn report(id: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {id}: {verdict} {detail}");
}

fn sweep(specs: &[EnsembleSpec], algorithms: &[Algorithm]) -> Vec<SweepResult> {
    run_sweep_with(specs, algorithms, &SweepOptions::default())
        .expect("valid sweep")
        .results
}

fn rate(result: &SweepResult, alg: Algorithm) -> f64 {
    result.summary(alg).expect("algorithm was run").success_rate
}

fn full_rank_specs() -> Vec<EnsembleSpec> {
    [5, 10, 15, 19]
        .into_iter()
        .map(|k| EnsembleSpec::new(k + 1, k, 20, 100, SEED))
        .collect()
}

fn defective_spec(m: usize) -> EnsembleSpec {
    EnsembleSpec::new(m, 30, 20, 200, SEED)
}

#[test]
fn criterion_1_full_rank_music_condition() {
    let start = Instant::now();
    let specs = full_rank_specs();
    let results = sweep(&specs, &[Algorithm::Music, Algorithm::SsMusic]);
    let elapsed = start.elapsed();
    let mut pass = elapsed < Duration::from_secs(60);
    let mut detail = Vec::new();
    for r in &results {
        let (music, ss) = (rate(r, Algorithm::Music), rate(r, Algorithm::SsMusic));
        pass &= music >= 0.99 && ss >= 0.99;
        detail.push(format!("K={}: music {music:.2} ss_music {ss:.2}", r.spec.k));
    }
    let detail = format!("{} in {:.1}s", detail.join("; "), elapsed.as_secs_f64());
    report(1, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_2_rank_defective_success() {
    let start = Instant::now();
    let results = sweep(&[defective_spec(40)], &[Algorithm::SsMusic]);
    let elapsed = start.elapsed();
    let s = results[0].summary(Algorithm::SsMusic).unwrap();
    let modal = s.modal_success_iterations(100);
    let pass = s.success_rate >= 0.99
        && modal.is_some_and(|it| (1..=3).contains(&it))
        && elapsed < Duration::from_secs(300);
    let detail = format!(
        "(40,30,20): success {:.3}, modal iterations {modal:?}, {:.1}s",
        s.success_rate,
        elapsed.as_secs_f64()
    );
    report(2, pass, &detail);
    assert!(pass, "{detail}");
}

fn median(values: &mut [usize]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    let mid = values.len() / 2;
    Some(if values.len().is_multiple_of(2) {
        (values[mid - 1] + values[mid]) as f64 / 2.0
    } else {
        values[mid] as f64
    })
}

#[test]
fn criterion_3_ss_music_versus_imusic() {
    let spec = defective_spec(35);
    let out = run_sweep_with(
        &[spec],
        &[Algorithm::SsMusic, Algorithm::IMusic],
        &SweepOptions::default(),
    )
    .unwrap();
    let ss = rate(&out.results[0], Algorithm::SsMusic);
    let im = rate(&out.results[0], Algorithm::IMusic);
    let mut im_iters: Vec<usize> = out
        .records
        .iter()
        .filter(|r| r.algorithm == Algorithm::IMusic && r.success)
        .map(|r| r.iterations)
        .collect();
    let im_median = median(&mut im_iters);
    let checks = [
        ("ss_music >= 0.95", ss >= 0.95),
        ("imusic in [0.55, 0.85]", (0.55..=0.85).contains(&im)),
        (
            "imusic median iterations in [9, 15]",
            im_median.is_some_and(|m| (9.0..=15.0).contains(&m)),
        ),
    ];
    let pass = checks.iter().all(|c| c.1);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let detail = format!(
        "(35,30,20): ss_music {ss:.3}, imusic {im:.3}, imusic median iterations {im_median:?}{}",
        if failed.is_empty() {
            String::new()
        } else {
            format!("; unmet: {}", failed.join(", "))
        }
    );
    report(3, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_4_minimal_measurements() {
    let results = sweep(&[defective_spec(31)], &[Algorithm::SsMusic]);
    let ss = rate(&results[0], Algorithm::SsMusic);
    let pass = ss >= 0.90;
    let detail = format!("(31,30,20): ss_music {ss:.3}");
    report(4, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_5_iteration_bounds() {
    // The ensembles of criteria 1 to 4, with their spec indices.
    let mut ensembles: Vec<(EnsembleSpec, usize)> = full_rank_specs()
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    ensembles.extend([40, 35, 31].map(|m| (defective_spec(m), 0)));

    let cfg = SsMusicConfig::default();
    let (mut converged, mut over, mut worst) = (0usize, 0usize, 0isize);
    let mut sa_mismatch = 0usize;
    let mut sa_runs = 0usize;
    let mut by_ensemble = Vec::new();
    for (spec, idx) in &ensembles {
        let over_before = over;
        for t in 0..spec.trials {
            let inst = generate_instance(spec, *idx, t).unwrap();
            let p = &inst.problem;
            let r = signal_rank(p).unwrap();
            let bound = p.k() - r + 1;
            let res = ss_music(p, &cfg).unwrap();
            if res.converged {
                converged += 1;
                if res.iterations > bound {
                    over += 1;
                    worst = worst.max(res.iterations as isize - bound as isize);
                }
            }
            let sa = sa_music(p, r).unwrap();
            sa_runs += 1;
            sa_mismatch += (sa.iterations != p.k() - r) as usize;
        }
        if over > over_before {
            by_ensemble.push(format!(
                "({},{},{}): {}",
                spec.m,
                spec.k,
                spec.big_n,
                over - over_before
            ));
        }
    }
    let pass = over == 0 && sa_mismatch == 0;
    let detail = format!(
        "ss_music: {over} of {converged} converged runs exceed K-r+1 (worst excess {worst}) [{}]; \
         sa_music: {sa_mismatch} of {sa_runs} runs with iterations != K-r",
        by_ensemble.join(", ")
    );
    report(5, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_6_dominance_on_m_sweep() {
    let specs = harness::default_grid(harness::SweepAxis::M, 100, SEED);
    let rivals = [
        Algorithm::Somp,
        Algorithm::SCoSaMP,
        Algorithm::RaOrmp,
        Algorithm::SaMusic,
        Algorithm::IMusic,
    ];
    let mut algs = vec![Algorithm::SsMusic];
    algs.extend(rivals);
    let results = sweep(&specs, &algs);
    let mut pass = true;
    let mut rows = Vec::new();
    for r in &results {
        let ss = rate(r, Algorithm::SsMusic);
        let best = rivals
            .iter()
            .map(|&a| (a, rate(r, a)))
            .fold(
                (Algorithm::Somp, -1.0),
                |b, x| if x.1 > b.1 { x } else { b },
            );
        pass &= rivals.iter().all(|&a| ss >= rate(r, a) - 0.05);
        rows.push(format!(
            "m={}: ss {ss:.2} best {} {:.2}",
            r.spec.m, best.0, best.1
        ));
    }
    let detail = rows.join("; ");
    report(6, pass, &detail);
    assert!(pass, "{detail}");
}

/// Residual energy of `Y` outside `span(A_S)` from the normal equations.
fn normal_equation_residual(a: &RealMatrix, y: &RealMatrix, support: &[usize]) -> f64 {
    let a_s = a.select_columns(support);
    let gram = a_s.transpose() * &a_s;
    let x = gram.try_inverse().expect("generic columns are independent") * a_s.transpose() * y;
    (y - a_s * x).norm_squared()
}

fn exhaustive_minimum(a: &RealMatrix, y: &RealMatrix, k: usize) -> (Vec<usize>, f64) {
    let n = a.ncols();
    let mut best = (Vec::new(), f64::INFINITY);
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let res = normal_equation_residual(a, y, &subset);
        if res < best.1 {
            best = (subset.clone(), res);
        }
        // Next k-subset in lexicographic order.
        let Some(i) = (0..k).rev().find(|&i| subset[i] < n - k + i) else {
            break;
        };
        subset[i] += 1;
        for j in i + 1..k {
            subset[j] = subset[j - 1] + 1;
        }
    }
    best
}

#[test]
fn criterion_7_exhaustive_oracle_equivalence() {
    let spec = EnsembleSpec {
        n: 8,
        ..EnsembleSpec::new(6, 3, 2, 50, SEED)
    };
    let cfg = SsMusicConfig::default();
    let (mut converged, mut agree, mut oracle_ok) = (0, 0, 0);
    for t in 0..spec.trials {
        let inst = generate_instance(&spec, 0, t).unwrap();
        let p = &inst.problem;
        let energy = p.y().norm_squared();
        let (oracle, residual) = exhaustive_minimum(p.dictionary().matrix(), p.y(), 3);
        oracle_ok += (residual <= 1e-12 * energy) as usize;
        let res = ss_music(p, &cfg).unwrap();
        if res.converged {
            converged += 1;
            agree += (res.support.indices() == oracle.as_slice()) as usize;
        }
    }
    let pass = agree == converged && oracle_ok == spec.trials && converged > 0;
    let detail = format!(
        "{agree} of {converged} converged supports equal the oracle; \
         oracle residual <= 1e-12 |Y|^2 in {oracle_ok} of {}",
        spec.trials
    );
    report(7, pass, &detail);
    assert!(pass, "{detail}");
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> RealMatrix {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(rand_distr::StandardNormal))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn run_property<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&strategy, test)
        .map_err(|e| format!("{name}: {e}"))
}

#[test]
fn criterion_8_numerical_invariants() {
    let shape = (2usize..12, 1usize..12, any::<u64>());
    let mut outcomes = Vec::new();

    outcomes.push(run_property("projector", shape.clone(), |(m, d, seed)| {
        let d = d.min(m);
        let basis = linalg::column_space(&gaussian(m, d, seed), DEFAULT_RANK_TOL).unwrap();
        let p = basis.projector();
        let idem = (&p * &p - &p).norm() / p.norm().max(1.0);
        ensure(idem <= 1e-12, || format!("idempotence {idem:e}"))?;
        let v = gaussian(m, 3, seed ^ 1);
        let inside = linalg::project(&basis, &v).unwrap();
        let outside = linalg::complement_project(&basis, &v).unwrap();
        let split = (&inside + &outside - &v).norm() / v.norm();
        ensure(split <= 1e-12, || format!("decomposition {split:e}"))?;
        let cross = (inside.transpose() * &outside).norm() / v.norm_squared();
        ensure(cross <= 1e-12, || format!("orthogonal parts {cross:e}"))
    }));

    outcomes.push(run_property(
        "orthonormal basis",
        shape.clone(),
        |(m, d, seed)| {
            let basis = linalg::column_space(&gaussian(m, d, seed), DEFAULT_RANK_TOL).unwrap();
            let u = basis.matrix();
            let err = (u.transpose() * u - DMatrix::identity(u.ncols(), u.ncols())).amax();
            ensure(err <= 1e-10, || format!("orthonormality {err:e}"))
        },
    ));

    outcomes.push(run_property(
        "least squares",
        shape.clone(),
        |(m, d, seed)| {
            let b = gaussian(m, d, seed);
            let y = gaussian(m, 2, seed ^ 2);
            let x = linalg::least_squares(&b, &y).unwrap();
            let r = &y - &b * x;
            let err = (b.transpose() * r).norm() / (b.norm() * y.norm());
            ensure(err <= 1e-8, || format!("residual orthogonality {err:e}"))
        },
    ));

    let ensemble =
        (3usize..16, 1usize..8, 1usize..6, any::<u64>()).prop_map(|(m, k, big_n, seed)| {
            EnsembleSpec {
                n: 20,
                ..EnsembleSpec::new(m, k.min(m), big_n, 1, seed)
            }
        });

    outcomes.push(run_property(
        "true support fitness",
        ensemble.clone(),
        |spec| {
            let p = harness::generate_problem(&spec, 0).unwrap();
            let truth: AtomSet = p.true_support().unwrap().clone();
            let fit = model::support_fitness(&p, &truth);
            ensure(fit <= 1e-12 * p.y().norm_squared(), || {
                format!("fitness {fit:e}")
            })
        },
    ));

    outcomes.push(run_property("paired and reproducible", ensemble, |spec| {
        let algs = [Algorithm::SsMusic, Algorithm::Somp];
        let opts = SweepOptions::default();
        let write = |out: &harness::SweepOutput| {
            let mut buf = Vec::new();
            output::write_results_csv(&mut buf, &[], std::slice::from_ref(&spec), &out.records)
                .unwrap();
            output::write_aggregate_json(&mut buf, &spec, &out.results).unwrap();
            buf
        };
        let a = run_sweep_with(std::slice::from_ref(&spec), &algs, &opts).unwrap();
        let b = run_sweep_with(std::slice::from_ref(&spec), &algs, &opts).unwrap();
        ensure(
            a.records[0].problem_hash == a.records[1].problem_hash,
            || "paired trials saw different problems".into(),
        )?;
        ensure(write(&a) == write(&b), || "rerun bytes differ".into())
    }));

    let failures: Vec<&String> = outcomes.iter().filter_map(|o| o.as_ref().err()).collect();
    let pass = failures.is_empty();
    let detail = if pass {
        format!("{} properties x 1000 cases", outcomes.len())
    } else {
        format!("{failures:?}")
    };
    report(8, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_9_noisy_path() {
    let cfg = SsMusicConfig::default();

    // Zero noise: the noisy front end must not change anything.
    let clean = defective_spec(40);
    let mut identical = 0;
    let zero_trials = 20;
    for t in 0..zero_trials {
        let p = harness::generate_problem(&clean, t).unwrap();
        let base = ss_music(&p, &cfg).unwrap();
        identical += (ss_music_noisy(&p, &cfg, Some(0.0)).unwrap() == base
            && ss_music_noisy(&p, &cfg, None).unwrap() == base) as usize;
    }

    // Rank estimation at 40 dB with r = N = 20.
    let spec40 = EnsembleSpec::new(40, 30, 20, 100, SEED).with_snr(40.0);
    let mut rank_hits = 0;
    for t in 0..spec40.trials {
        let inst = generate_instance(&spec40, 0, t).unwrap();
        let est = estimate_signal_subspace(inst.problem.mmv(), inst.noise_sigma).unwrap();
        rank_hits += (est.rank_estimate == 20) as usize;
    }

    // Recovery against SNR.
    let snrs = [10.0, 20.0, 30.0, 40.0];
    let specs: Vec<EnsembleSpec> = snrs
        .iter()
        .map(|&s| EnsembleSpec::new(40, 30, 20, 100, SEED).with_snr(s))
        .collect();
    let results = sweep(&specs, &[Algorithm::SsMusic]);
    let rates: Vec<f64> = results
        .iter()
        .map(|r| rate(r, Algorithm::SsMusic))
        .collect();
    let monotone = rates.windows(2).all(|w| w[1] >= w[0] - 0.05);

    let pass = identical == zero_trials && rank_hits >= 95 && monotone;
    let detail = format!(
        "zero-noise identical {identical}/{zero_trials}; rank at 40 dB {rank_hits}/100; \
         success by SNR {snrs:?} dB = {rates:?}"
    );
    report(9, pass, &detail);
    assert!(pass, "{detail}");
}
