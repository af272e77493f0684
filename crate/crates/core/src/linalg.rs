//! Dense linear-algebra primitives: numerical rank, orthonormal bases,
//! orthogonal projections and minimum-norm least squares.
//!
//! Everything here is built on a thin SVD. Problem sizes in this crate are
//! at most a few hundred rows and columns, so nothing tries to be clever about
//! memory or iterative methods.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{JsrError, Result};

/// Dense real matrix used throughout the crate.
pub type RealMatrix = DMatrix<f64>;

/// Default relative tolerance for rank decisions on noiseless data.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Tolerance used when checking `UᵀU = I` on basis construction.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

pub(crate) fn ensure_finite(m: &RealMatrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(JsrError::InvalidInput(format!(
            "{what} contains non-finite entries"
        )))
    }
}

/// Thin SVD with singular values sorted in descending order.
struct SortedSvd {
    u: RealMatrix,
    sigma: Vec<f64>,
    v_t: Option<RealMatrix>,
}

fn sorted_svd(m: &RealMatrix, want_v: bool) -> SortedSvd {
    let svd = SVD::new(m.clone(), true, want_v);
    let u = svd.u.expect("requested U");
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let sigma = order.iter().map(|&i| s[i]).collect();
    let u = RealMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v_t = svd
        .v_t
        .map(|vt| RealMatrix::from_fn(order.len(), vt.ncols(), |r, c| vt[(order[r], c)]));
    SortedSvd { u, sigma, v_t }
}

fn count_above(sigma: &[f64], rel_tol: f64) -> usize {
    let max = sigma.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Singular values of `m`, largest first.
pub fn singular_values(m: &RealMatrix) -> Result<Vec<f64>> {
    ensure_finite(m, "matrix")?;
    Ok(sorted_svd(m, false).sigma)
}

/// Number of singular values strictly above `rel_tol · σ_max`.
pub fn numerical_rank(m: &RealMatrix, rel_tol: f64) -> Result<usize> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(JsrError::InvalidInput(format!(
            "rank tolerance must lie in (0, 1), got {rel_tol}"
        )));
    }
    ensure_finite(m, "matrix")?;
    Ok(count_above(&sorted_svd(m, false).sigma, rel_tol))
}

/// An orthonormal basis `U` (m × d) of a subspace of `R^m`.
///
/// `d = 0` encodes the trivial subspace `{0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    basis: RealMatrix,
}

impl SubspaceBasis {
    /// Wraps a matrix whose columns are already orthonormal.
    pub fn from_orthonormal(basis: RealMatrix) -> Result<Self> {
        ensure_finite(&basis, "basis")?;
        let d = basis.ncols();
        let gram = basis.transpose() * &basis;
        let err = (gram - RealMatrix::identity(d, d)).amax();
        if err > ORTHONORMALITY_TOL {
            return Err(JsrError::InvalidInput(format!(
                "basis columns are not orthonormal (max deviation {err:.3e})"
            )));
        }
        Ok(Self { basis })
    }

    /// The trivial subspace of `R^ambient_dim`.
    pub fn trivial(ambient_dim: usize) -> Self {
        Self {
            basis: RealMatrix::zeros(ambient_dim, 0),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.basis
    }

    /// Dense projector `U·Uᵀ`.
    pub fn projector(&self) -> RealMatrix {
        &self.basis * self.basis.transpose()
    }

    /// Euclidean distance of every column of `m` to the subspace.
    pub fn distances(&self, m: &RealMatrix) -> Result<Vec<f64>> {
        let resid = complement_project(self, m)?;
        Ok(resid.column_iter().map(|c| c.norm()).collect())
    }
}

/// Flips each column so its first entry of non-negligible magnitude is
/// non-negative.
fn canonical_signs(u: &mut RealMatrix) {
    for mut col in u.column_iter_mut() {
        let scale = col.amax();
        if scale == 0.0 {
            continue;
        }
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-12 * scale) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
}

/// The `d` leading left singular vectors of `m`.
pub fn orthonormal_basis(m: &RealMatrix, d: usize) -> Result<SubspaceBasis> {
    ensure_finite(m, "matrix")?;
    if d == 0 || d > m.nrows().min(m.ncols()) {
        return Err(JsrError::InvalidInput(format!(
            "basis dimension {d} outside [1, {}]",
            m.nrows().min(m.ncols())
        )));
    }
    let svd = sorted_svd(m, false);
    let rank = count_above(&svd.sigma, DEFAULT_RANK_TOL);
    if d > rank {
        return Err(JsrError::RankDeficient { requested: d, rank });
    }
    let mut u = svd.u.columns(0, d).into_owned();
    canonical_signs(&mut u);
    Ok(SubspaceBasis { basis: u })
}

/// Basis of the column space of `m` truncated at its numerical rank. Returns
/// the trivial subspace for a numerically zero matrix.
pub fn column_space(m: &RealMatrix, rel_tol: f64) -> Result<SubspaceBasis> {
    column_space_capped(m, rel_tol, usize::MAX)
}

/// Like [`column_space`] but keeps at most `max_dim` leading directions.
pub fn column_space_capped(m: &RealMatrix, rel_tol: f64, max_dim: usize) -> Result<SubspaceBasis> {
    ensure_finite(m, "matrix")?;
    if m.ncols() == 0 {
        return Ok(SubspaceBasis::trivial(m.nrows()));
    }
    let svd = sorted_svd(m, false);
    let d = count_above(&svd.sigma, rel_tol).min(max_dim);
    let mut u = svd.u.columns(0, d).into_owned();
    canonical_signs(&mut u);
    Ok(SubspaceBasis { basis: u })
}

/// Leading left singular vectors of `m` whose singular values exceed
/// `abs_threshold`, at most `max_dim` of them.
pub fn column_space_above(
    m: &RealMatrix,
    abs_threshold: f64,
    max_dim: usize,
) -> Result<SubspaceBasis> {
    ensure_finite(m, "matrix")?;
    if m.ncols() == 0 {
        return Ok(SubspaceBasis::trivial(m.nrows()));
    }
    let svd = sorted_svd(m, false);
    let d = svd
        .sigma
        .iter()
        .filter(|&&s| s > abs_threshold)
        .count()
        .min(max_dim);
    let mut u = svd.u.columns(0, d).into_owned();
    canonical_signs(&mut u);
    Ok(SubspaceBasis { basis: u })
}

fn check_rows(basis: &SubspaceBasis, m: &RealMatrix) -> Result<()> {
    if m.nrows() != basis.ambient_dim() {
        return Err(JsrError::InvalidInput(format!(
            "matrix has {} rows, subspace lives in R^{}",
            m.nrows(),
            basis.ambient_dim()
        )));
    }
    Ok(())
}

/// `U(UᵀM)`.
pub fn project(basis: &SubspaceBasis, m: &RealMatrix) -> Result<RealMatrix> {
    check_rows(basis, m)?;
    if basis.dim() == 0 {
        return Ok(RealMatrix::zeros(m.nrows(), m.ncols()));
    }
    let u = &basis.basis;
    Ok(u * (u.transpose() * m))
}

/// `M − U(UᵀM)`.
pub fn complement_project(basis: &SubspaceBasis, m: &RealMatrix) -> Result<RealMatrix> {
    check_rows(basis, m)?;
    if basis.dim() == 0 {
        return Ok(m.clone());
    }
    let u = &basis.basis;
    let mut r = m - u * (u.transpose() * m);
    // A second pass removes what the first one leaves behind when M is
    // nearly inside the subspace.
    r -= u * (u.transpose() * &r);
    Ok(r)
}

/// Minimum-Frobenius-norm minimiser of `‖Y − B·X‖_F`, i.e. `B†Y`, with the
/// pseudo-inverse truncated at [`DEFAULT_RANK_TOL`].
pub fn least_squares(b: &RealMatrix, y: &RealMatrix) -> Result<RealMatrix> {
    least_squares_tol(b, y, DEFAULT_RANK_TOL)
}

pub fn least_squares_tol(b: &RealMatrix, y: &RealMatrix, rel_tol: f64) -> Result<RealMatrix> {
    if b.nrows() != y.nrows() {
        return Err(JsrError::InvalidInput(format!(
            "least squares: B has {} rows but Y has {}",
            b.nrows(),
            y.nrows()
        )));
    }
    ensure_finite(b, "B")?;
    ensure_finite(y, "Y")?;
    if b.ncols() == 0 {
        return Ok(RealMatrix::zeros(0, y.ncols()));
    }
    let svd = sorted_svd(b, true);
    let v_t = svd.v_t.expect("requested V");
    let d = count_above(&svd.sigma, rel_tol);
    if d == 0 {
        return Ok(RealMatrix::zeros(b.ncols(), y.ncols()));
    }
    let u = svd.u.columns(0, d);
    let mut coeff = u.transpose() * y;
    for (i, mut row) in coeff.row_iter_mut().enumerate() {
        row /= svd.sigma[i];
    }
    Ok(v_t.rows(0, d).transpose() * coeff)
}

/// ℓ2 norm of every row.
pub fn row_norms(m: &RealMatrix) -> DVector<f64> {
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.norm()))
}
