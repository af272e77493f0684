//! Fixtures and brute-force oracles shared by unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::RealMatrix;
use crate::model::{AtomSet, Dictionary, JsrProblem, MmvMatrix};

pub fn gaussian_problem(m: usize, n: usize, k: usize, big_n: usize, seed: u64) -> JsrProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = RealMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal));
    let dict = Dictionary::new(a).unwrap();
    let support: AtomSet = rand::seq::index::sample(&mut rng, n, k)
        .into_iter()
        .collect();
    let x = RealMatrix::from_fn(k, big_n, |_, _| rng.sample(StandardNormal));
    let y = dict.columns(&support) * x;
    JsrProblem::new(dict, MmvMatrix::new(y).unwrap(), k, Some(support)).unwrap()
}

/// Orthonormal dictionary (first `n` columns of a random orthogonal matrix)
/// with `Y = A_S X`.
pub fn orthonormal_problem(m: usize, k: usize, big_n: usize, seed: u64) -> JsrProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = RealMatrix::from_fn(m, m, |_, _| rng.sample(StandardNormal));
    let q = g.qr().q();
    let dict = Dictionary::new(q).unwrap();
    let support: AtomSet = rand::seq::index::sample(&mut rng, m, k)
        .into_iter()
        .collect();
    let x = RealMatrix::from_fn(k, big_n, |_, _| rng.sample::<f64, _>(StandardNormal) + 2.0);
    let y = dict.columns(&support) * x;
    JsrProblem::new(dict, MmvMatrix::new(y).unwrap(), k, Some(support)).unwrap()
}

pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Minimum-residual support over all `C(n, K)` subsets, residuals computed
/// through the normal equations.
pub fn exhaustive_oracle(p: &JsrProblem) -> AtomSet {
    let a = p.dictionary().matrix();
    let mut best = (f64::INFINITY, Vec::new());
    for s in subsets(p.n(), p.k()) {
        let a_s = a.select_columns(&s);
        let g = (a_s.transpose() * &a_s).try_inverse().unwrap();
        let resid = (p.y() - &a_s * (g * a_s.transpose() * p.y())).norm_squared();
        if resid < best.0 {
            best = (resid, s);
        }
    }
    AtomSet::new(best.1)
}
