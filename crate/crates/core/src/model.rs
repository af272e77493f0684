//! Problem data and the two classifier primitives shared by every solver:
//! the fitness of a label configuration and the nearest-subspace classifier.

use std::fmt;

use crate::error::{JsrError, Result};
use crate::linalg::{self, RealMatrix, SubspaceBasis, DEFAULT_RANK_TOL};

/// Measurement matrix `A` (m × n) with unit-norm columns ("atoms").
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    matrix: RealMatrix,
}

impl Dictionary {
    /// Normalizes every column to unit ℓ2 norm.
    pub fn new(mut matrix: RealMatrix) -> Result<Self> {
        linalg::ensure_finite(&matrix, "dictionary")?;
        if matrix.ncols() < 2 || matrix.nrows() < 1 {
            return Err(JsrError::InvalidInput(format!(
                "dictionary must be at least 1 x 2, got {} x {}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        for (j, mut col) in matrix.column_iter_mut().enumerate() {
            let norm = col.norm();
            if norm == 0.0 {
                return Err(JsrError::InvalidInput(format!(
                    "atom {j} is the zero vector"
                )));
            }
            col /= norm;
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.matrix
    }

    /// Number of measurements.
    pub fn m(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of atoms.
    pub fn n(&self) -> usize {
        self.matrix.ncols()
    }

    /// The sub-matrix `A_S` in the order of `atoms`.
    pub fn columns(&self, atoms: &AtomSet) -> RealMatrix {
        self.matrix.select_columns(atoms.indices())
    }
}

/// Multiple measurement vectors `Y` (m × N).
#[derive(Debug, Clone, PartialEq)]
pub struct MmvMatrix {
    matrix: RealMatrix,
}

impl MmvMatrix {
    pub fn new(matrix: RealMatrix) -> Result<Self> {
        linalg::ensure_finite(&matrix, "measurements")?;
        if matrix.ncols() == 0 || matrix.nrows() == 0 {
            return Err(JsrError::InvalidInput("measurement matrix is empty".into()));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.matrix
    }

    /// Number of measurement vectors.
    pub fn len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.ncols() == 0
    }

    pub fn energy(&self) -> f64 {
        self.matrix.norm_squared()
    }
}

/// Sorted set of distinct atom indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct AtomSet(Vec<usize>);

impl AtomSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self(indices)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.0.binary_search(&idx).is_ok()
    }

    pub fn union(&self, other: &AtomSet) -> AtomSet {
        AtomSet::new(self.0.iter().chain(other.0.iter()).copied().collect())
    }

    pub fn is_subset(&self, other: &AtomSet) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }

    /// All indices in `[0, n)`.
    pub fn all(n: usize) -> AtomSet {
        AtomSet((0..n).collect())
    }

    fn check_bounds(&self, n: usize) -> Result<()> {
        match self.0.last() {
            Some(&max) if max >= n => Err(JsrError::InvalidInput(format!(
                "atom index {max} out of range for {n} atoms"
            ))),
            _ => Ok(()),
        }
    }
}

impl FromIterator<usize> for AtomSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        AtomSet::new(iter.into_iter().collect())
    }
}

impl fmt::Display for AtomSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, idx) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{idx}")?;
        }
        write!(f, "}}")
    }
}

/// Binary label per atom; `true` marks the positive class (in the support).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelConfig(Vec<bool>);

impl LabelConfig {
    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    pub fn from_labels(labels: Vec<bool>) -> Self {
        Self(labels)
    }

    pub fn labels(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.0.iter().filter(|&&l| l).count()
    }
}

pub fn support_of(l: &LabelConfig) -> AtomSet {
    AtomSet(
        l.0.iter()
            .enumerate()
            .filter_map(|(i, &pos)| pos.then_some(i))
            .collect(),
    )
}

pub fn labels_of(s: &AtomSet, n: usize) -> LabelConfig {
    let mut labels = vec![false; n];
    for &i in s.indices() {
        labels[i] = true;
    }
    LabelConfig(labels)
}

/// One joint-sparse recovery instance `Y = A·X` with row sparsity `K`.
#[derive(Debug, Clone)]
pub struct JsrProblem {
    dictionary: Dictionary,
    mmv: MmvMatrix,
    sparsity: usize,
    true_support: Option<AtomSet>,
}

impl JsrProblem {
    pub fn new(
        dictionary: Dictionary,
        mmv: MmvMatrix,
        sparsity: usize,
        true_support: Option<AtomSet>,
    ) -> Result<Self> {
        if dictionary.m() != mmv.matrix().nrows() {
            return Err(JsrError::InvalidInput(format!(
                "dictionary has {} rows but Y has {}",
                dictionary.m(),
                mmv.matrix().nrows()
            )));
        }
        if sparsity == 0 || sparsity >= dictionary.n() {
            return Err(JsrError::InvalidInput(format!(
                "row sparsity K = {sparsity} must lie in [1, n) with n = {}",
                dictionary.n()
            )));
        }
        if sparsity > dictionary.m() {
            return Err(JsrError::InvalidInput(format!(
                "row sparsity K = {sparsity} exceeds m = {}",
                dictionary.m()
            )));
        }
        if let Some(s) = &true_support {
            s.check_bounds(dictionary.n())?;
            if s.len() != sparsity {
                return Err(JsrError::InvalidInput(format!(
                    "true support has {} atoms, expected K = {sparsity}",
                    s.len()
                )));
            }
        }
        Ok(Self {
            dictionary,
            mmv,
            sparsity,
            true_support,
        })
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    pub fn mmv(&self) -> &MmvMatrix {
        &self.mmv
    }

    pub fn y(&self) -> &RealMatrix {
        self.mmv.matrix()
    }

    /// Row sparsity `K`.
    pub fn k(&self) -> usize {
        self.sparsity
    }

    pub fn m(&self) -> usize {
        self.dictionary.m()
    }

    pub fn n(&self) -> usize {
        self.dictionary.n()
    }

    pub fn true_support(&self) -> Option<&AtomSet> {
        self.true_support.as_ref()
    }

    /// Same problem with different measurements (e.g. a noisy copy).
    pub fn with_mmv(&self, mmv: MmvMatrix) -> Result<Self> {
        Self::new(
            self.dictionary.clone(),
            mmv,
            self.sparsity,
            self.true_support.clone(),
        )
    }
}

/// Residual energy of `Y` outside the span of the atoms in `support`.
///
/// A rank-deficient atom set is handled through its numerical-rank basis.
pub fn support_fitness(problem: &JsrProblem, support: &AtomSet) -> f64 {
    if support.is_empty() {
        return problem.mmv.energy();
    }
    let atoms = problem.dictionary.columns(support);
    let basis = linalg::column_space(&atoms, DEFAULT_RANK_TOL)
        .expect("dictionary and measurements are finite by construction");
    linalg::complement_project(&basis, problem.y())
        .expect("dimensions agree by construction")
        .norm_squared()
}

/// `ℓ(l) = Σ_i ‖y_i − P_{S(A(l₊))} y_i‖²`.
pub fn fitness(l: &LabelConfig, problem: &JsrProblem) -> f64 {
    support_fitness(problem, &support_of(l))
}

/// Nearest-subspace classifier.
///
/// Every atom of `forced_positive` is labeled positive; the remaining
/// `k − |forced_positive|` positive labels go to the atoms of `query` closest
/// to the subspace spanned by `basis`. Ties are broken by lowest atom index.
pub fn nsc_classify(
    dictionary: &Dictionary,
    query: &AtomSet,
    basis: &SubspaceBasis,
    k: usize,
    forced_positive: &AtomSet,
) -> Result<LabelConfig> {
    let n = dictionary.n();
    query.check_bounds(n)?;
    forced_positive.check_bounds(n)?;
    if forced_positive.len() > k {
        return Err(JsrError::InvalidInput(format!(
            "{} forced positives exceed k = {k}",
            forced_positive.len()
        )));
    }
    let mut labels = labels_of(forced_positive, n);
    let needed = k - forced_positive.len();
    if needed == 0 {
        return Ok(labels);
    }
    let free: Vec<usize> = query
        .indices()
        .iter()
        .copied()
        .filter(|&i| !forced_positive.contains(i))
        .collect();
    if free.len() < needed {
        return Err(JsrError::InvalidInput(format!(
            "need {needed} more positives but only {} query atoms are available",
            free.len()
        )));
    }
    let ranked = rank_by_distance(dictionary, &free, basis)?;
    for &(i, _) in ranked.iter().take(needed) {
        labels.0[i] = true;
    }
    Ok(labels)
}

/// `(atom, distance)` pairs sorted by ascending distance, then atom index.
pub(crate) fn rank_by_distance(
    dictionary: &Dictionary,
    atoms: &[usize],
    basis: &SubspaceBasis,
) -> Result<Vec<(usize, f64)>> {
    let cols = dictionary.matrix().select_columns(atoms);
    let dist = basis.distances(&cols)?;
    let mut ranked: Vec<(usize, f64)> = atoms.iter().copied().zip(dist).collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(m: usize, n: usize, k: usize, big_n: usize, seed: u64) -> JsrProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = RealMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let dict = Dictionary::new(a).unwrap();
        let support = AtomSet::new((0..k).map(|i| (i * 3 + 1) % n).collect());
        let x = RealMatrix::from_fn(k, big_n, |_, _| rng.random_range(-1.0..1.0));
        let y = dict.columns(&support) * x;
        JsrProblem::new(dict, MmvMatrix::new(y).unwrap(), k, Some(support)).unwrap()
    }

    #[test]
    fn dictionary_normalizes_atoms() {
        let a = RealMatrix::from_row_slice(2, 2, &[3.0, 0.0, 4.0, 2.0]);
        let d = Dictionary::new(a).unwrap();
        for c in d.matrix().column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
        assert!(Dictionary::new(RealMatrix::zeros(2, 2)).is_err());
        assert!(Dictionary::new(RealMatrix::identity(2, 1)).is_err());
    }

    #[test]
    fn problem_validation() {
        let d = Dictionary::new(RealMatrix::identity(3, 4).map(|v| v + 0.1)).unwrap();
        let y = MmvMatrix::new(RealMatrix::zeros(3, 1)).unwrap();
        assert!(JsrProblem::new(d.clone(), y.clone(), 4, None).is_err());
        assert!(JsrProblem::new(d.clone(), y.clone(), 0, None).is_err());
        assert!(JsrProblem::new(d.clone(), y.clone(), 2, Some(AtomSet::new(vec![1]))).is_err());
        assert!(JsrProblem::new(d.clone(), y.clone(), 1, Some(AtomSet::new(vec![7]))).is_err());
        let bad_rows = MmvMatrix::new(RealMatrix::zeros(2, 1)).unwrap();
        assert!(JsrProblem::new(d, bad_rows, 1, None).is_err());
    }

    #[test]
    fn support_and_labels_convert() {
        let l = LabelConfig::from_labels(vec![true, false, true, false]);
        assert_eq!(support_of(&l), AtomSet::new(vec![0, 2]));
        assert_eq!(labels_of(&AtomSet::empty(), 4), LabelConfig::zeros(4));
        assert_eq!(labels_of(&support_of(&l), 4), l);
    }

    #[test]
    fn fitness_bounds() {
        let p = random_problem(6, 10, 3, 2, 1);
        let truth = labels_of(p.true_support().unwrap(), 10);
        let energy = p.mmv().energy();
        assert!(fitness(&truth, &p) <= 1e-16 * energy.max(1.0) * 100.0);
        assert_eq!(fitness(&LabelConfig::zeros(10), &p), energy);
    }

    #[test]
    fn fitness_matches_least_squares_residual() {
        let p = random_problem(6, 8, 2, 3, 7);
        let s = AtomSet::new(vec![0, 5, 6]);
        let a_s = p.dictionary().columns(&s);
        let pinv = a_s.clone().pseudo_inverse(1e-14).unwrap();
        let oracle = (p.y() - &a_s * (pinv * p.y())).norm_squared();
        let got = fitness(&labels_of(&s, 8), &p);
        assert!((got - oracle).abs() < 1e-10);
    }

    #[test]
    fn fitness_of_rank_deficient_support() {
        // Duplicate atoms: the support spans one direction only.
        let a = RealMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let d = Dictionary::new(a).unwrap();
        let y = MmvMatrix::new(RealMatrix::from_column_slice(2, 1, &[1.0, 2.0])).unwrap();
        let p = JsrProblem::new(d, y, 2, None).unwrap();
        let f = fitness(&labels_of(&AtomSet::new(vec![0, 1]), 3), &p);
        assert!((f - 4.0).abs() < 1e-12);
    }

    #[test]
    fn classify_picks_atom_inside_subspace() {
        let d = Dictionary::new(RealMatrix::identity(3, 3)).unwrap();
        let basis =
            SubspaceBasis::from_orthonormal(RealMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]))
                .unwrap();
        let l = nsc_classify(&d, &AtomSet::all(3), &basis, 1, &AtomSet::empty()).unwrap();
        assert_eq!(support_of(&l), AtomSet::new(vec![0]));
    }

    #[test]
    fn classify_saturated_by_forced() {
        let d = Dictionary::new(RealMatrix::identity(3, 3)).unwrap();
        let forced = AtomSet::new(vec![1, 2]);
        let l = nsc_classify(&d, &AtomSet::all(3), &SubspaceBasis::trivial(3), 2, &forced).unwrap();
        assert_eq!(support_of(&l), forced);
    }

    #[test]
    fn classify_errors() {
        let d = Dictionary::new(RealMatrix::identity(3, 3)).unwrap();
        let b = SubspaceBasis::trivial(3);
        assert!(nsc_classify(&d, &AtomSet::new(vec![0]), &b, 2, &AtomSet::empty()).is_err());
        assert!(nsc_classify(&d, &AtomSet::all(3), &b, 1, &AtomSet::new(vec![0, 1])).is_err());
        assert!(nsc_classify(&d, &AtomSet::new(vec![5]), &b, 1, &AtomSet::empty()).is_err());
    }

    #[test]
    fn classify_ties_resolve_to_lowest_index() {
        // Trivial subspace: every unit atom is at distance 1.
        let d = Dictionary::new(RealMatrix::identity(4, 4)).unwrap();
        let l = nsc_classify(
            &d,
            &AtomSet::all(4),
            &SubspaceBasis::trivial(4),
            2,
            &AtomSet::empty(),
        )
        .unwrap();
        assert_eq!(support_of(&l), AtomSet::new(vec![0, 1]));
    }

    #[test]
    fn classify_matches_brute_force_distance_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let a = RealMatrix::from_fn(5, 8, |_, _| rng.random_range(-1.0..1.0));
        let d = Dictionary::new(a).unwrap();
        let span = RealMatrix::from_fn(5, 2, |_, _| rng.random_range(-1.0..1.0));
        let basis = linalg::orthonormal_basis(&span, 2).unwrap();

        let proj = &span * (span.transpose() * &span).try_inverse().unwrap() * span.transpose();
        let mut oracle: Vec<(usize, f64)> = (0..8)
            .map(|i| {
                let a_i = d.matrix().column(i);
                (i, (a_i - &proj * a_i).norm())
            })
            .collect();
        oracle.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let expect: AtomSet = oracle.iter().take(3).map(|&(i, _)| i).collect();

        let l = nsc_classify(&d, &AtomSet::all(8), &basis, 3, &AtomSet::empty()).unwrap();
        assert_eq!(l.positive_count(), 3);
        assert_eq!(support_of(&l), expect);
    }
}
