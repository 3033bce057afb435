//! Dense linear algebra for the two-space search: Moore–Penrose pseudo-inverse,
//! PCA fitting with projection/reconstruction, and least-squares affine maps.
//!
//! Matrices are `nalgebra::DMatrix<f64>`. Sample sets are stored column-wise:
//! a `d × N` matrix holds `N` points of dimension `d`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff used when callers have no better choice.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::invalid(format!("{what} must be non-empty")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what} contains non-finite entries")));
    }
    Ok(())
}

/// Thin SVD with singular triplets ordered by decreasing singular value.
fn sorted_svd(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let (m, n) = a.shape();
    let svd = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)])
        .thin_svd()
        .map_err(|e| Error::invalid(format!("svd did not converge: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());

    let mut order: Vec<usize> = (0..s.nrows()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));

    let u_sorted = DMatrix::from_fn(m, order.len(), |r, c| u[(r, order[c])]);
    let v_t_sorted = DMatrix::from_fn(order.len(), n, |r, c| v[(c, order[r])]);
    let s_sorted = order.iter().map(|&i| s[i]).collect();
    Ok((u_sorted, s_sorted, v_t_sorted))
}

/// Moore–Penrose pseudo-inverse. Singular values below `rel_tol` times the
/// largest singular value are treated as zero.
pub fn pinv(a: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    check_finite(a, "pinv input")?;
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::invalid(format!("rel_tol must lie in (0, 1), got {rel_tol}")));
    }
    let (u, s, v_t) = sorted_svd(a)?;
    let cutoff = rel_tol * s.first().copied().unwrap_or(0.0);

    let mut out = DMatrix::zeros(a.ncols(), a.nrows());
    for (i, &sigma) in s.iter().enumerate() {
        if sigma <= cutoff || sigma == 0.0 {
            continue;
        }
        // out += v_i * u_i^T / sigma_i
        let v_i = v_t.row(i).transpose();
        let u_i = u.column(i);
        out.ger(1.0 / sigma, &v_i, &u_i, 1.0);
    }
    Ok(out)
}

/// A fitted principal-component model: the simplified search space.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: DVector<f64>,
    basis: DMatrix<f64>,
    variances: Vec<f64>,
    requested_k: usize,
    rank: usize,
}

impl PcaModel {
    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Number of retained components (the effective simplified dimension).
    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    pub fn requested_k(&self) -> usize {
        self.requested_k
    }

    /// Numerical rank of the centered training data.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// True if fewer components were kept than requested because the data was rank-deficient.
    pub fn was_reduced(&self) -> bool {
        self.k() < self.requested_k
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// `d × k` matrix with orthonormal columns.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Sample variance along each retained component, non-increasing.
    pub fn variances(&self) -> &[f64] {
        &self.variances
    }
}

/// Fits PCA to the columns of `data` (`d × N`) keeping `k` components.
///
/// If the centered data has rank `r < k`, only `max(r, 1)` components are kept;
/// check [`PcaModel::was_reduced`]. Each basis column is oriented so that its
/// largest-magnitude entry is positive.
pub fn pca_fit(data: &DMatrix<f64>, k: usize) -> Result<PcaModel> {
    check_finite(data, "pca data")?;
    let (d, n) = data.shape();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    if k < 1 {
        return Err(Error::invalid("pca requires k >= 1"));
    }

    let mean = data.column_mean();
    let mut centered = data.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }

    let (u, s, _) = sorted_svd(&centered)?;
    let sigma_max = s.first().copied().unwrap_or(0.0);
    let rank_tol = (d.max(n) as f64) * f64::EPSILON * sigma_max;
    let rank = s.iter().filter(|&&sigma| sigma > rank_tol).count();

    let keep = k.min(rank.max(1)).min(u.ncols());
    let mut basis = u.columns(0, keep).into_owned();
    for mut col in basis.column_iter_mut() {
        let mut pivot = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
    }

    let denom = (n - 1) as f64;
    let mut variances: Vec<f64> = s[..keep]
        .iter()
        .map(|sigma| (sigma * sigma / denom).max(0.0))
        .collect();
    for i in rank..keep {
        variances[i] = 0.0;
    }

    Ok(PcaModel {
        mean,
        basis,
        variances,
        requested_k: k,
        rank,
    })
}

/// Projects the columns of `points` (`d × N`) into component coordinates (`k × N`).
pub fn pca_project(model: &PcaModel, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if points.nrows() != model.dim() {
        return Err(Error::invalid(format!(
            "pca_project: expected {} rows, got {}",
            model.dim(),
            points.nrows()
        )));
    }
    let mut centered = points.clone();
    for mut col in centered.column_iter_mut() {
        col -= &model.mean;
    }
    Ok(model.basis.tr_mul(&centered))
}

/// Maps component coordinates (`k × N`) back to the ambient space (`d × N`).
pub fn pca_reconstruct(model: &PcaModel, coords: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if coords.nrows() != model.k() {
        return Err(Error::invalid(format!(
            "pca_reconstruct: expected {} rows, got {}",
            model.k(),
            coords.nrows()
        )));
    }
    let mut out = &model.basis * coords;
    for mut col in out.column_iter_mut() {
        col += &model.mean;
    }
    Ok(out)
}

/// `x ↦ linear · x + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    linear: DMatrix<f64>,
    bias: DVector<f64>,
}

impl AffineMap {
    pub fn new(linear: DMatrix<f64>, bias: DVector<f64>) -> Result<Self> {
        if linear.nrows() != bias.len() {
            return Err(Error::invalid(format!(
                "affine map: linear has {} rows but bias has length {}",
                linear.nrows(),
                bias.len()
            )));
        }
        check_finite(&linear, "affine linear part")?;
        if bias.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("affine bias contains non-finite entries"));
        }
        Ok(Self { linear, bias })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            linear: DMatrix::identity(n, n),
            bias: DVector::zeros(n),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.linear.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.linear.nrows()
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.linear
    }

    pub fn bias(&self) -> &DVector<f64> {
        &self.bias
    }

    /// Column-wise application to an `in_dim × N` matrix.
    pub fn apply(&self, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if points.nrows() != self.in_dim() {
            return Err(Error::invalid(format!(
                "apply_map: expected {} rows, got {}",
                self.in_dim(),
                points.nrows()
            )));
        }
        let mut out = &self.linear * points;
        for mut col in out.column_iter_mut() {
            col += &self.bias;
        }
        Ok(out)
    }

    /// Applies the map to a single point.
    pub fn apply_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim() {
            return Err(Error::invalid(format!(
                "apply_map: expected length {}, got {}",
                self.in_dim(),
                x.len()
            )));
        }
        let y = &self.linear * DVector::from_column_slice(x) + &self.bias;
        Ok(y.as_slice().to_vec())
    }

    /// `self ∘ inner`, i.e. `x ↦ self(inner(x))`.
    pub fn compose(&self, inner: &AffineMap) -> Result<AffineMap> {
        if inner.out_dim() != self.in_dim() {
            return Err(Error::invalid("compose: dimension mismatch"));
        }
        Ok(AffineMap {
            linear: &self.linear * &inner.linear,
            bias: &self.linear * &inner.bias + &self.bias,
        })
    }

    /// Mean squared reconstruction loss `1/(2N) Σ ‖t_i − M s_i‖²` over paired columns.
    pub fn squared_loss(&self, s: &DMatrix<f64>, t: &DMatrix<f64>) -> Result<f64> {
        let pred = self.apply(s)?;
        if pred.shape() != t.shape() {
            return Err(Error::invalid("squared_loss: target shape mismatch"));
        }
        let n = s.ncols() as f64;
        Ok((t - pred).norm_squared() / (2.0 * n))
    }
}

/// Least-squares affine map from the columns of `s` (`d_in × N`) to the paired
/// columns of `t` (`d_out × N`).
///
/// Uses the bias-augmented closed form `M = (T Sᵀ)(S Sᵀ)⁺`; with the
/// pseudo-inverse this is the minimum-norm minimizer when the Gram matrix is
/// singular.
pub fn learn_affine_map(s: &DMatrix<f64>, t: &DMatrix<f64>, rel_tol: f64) -> Result<AffineMap> {
    check_finite(s, "map source")?;
    check_finite(t, "map target")?;
    if s.ncols() != t.ncols() {
        return Err(Error::invalid(format!(
            "learn_affine_map: source has {} columns, target has {}",
            s.ncols(),
            t.ncols()
        )));
    }
    let d_in = s.nrows();
    let n = s.ncols();
    let s_aug = DMatrix::from_fn(d_in + 1, n, |r, c| if r < d_in { s[(r, c)] } else { 1.0 });

    let gram = &s_aug * s_aug.transpose();
    let cross = t * s_aug.transpose();
    let m_aug = cross * pinv(&gram, rel_tol)?;

    let linear = m_aug.columns(0, d_in).into_owned();
    let bias = m_aug.column(d_in).into_owned();
    AffineMap::new(linear, bias)
}

/// Convenience: stacks equal-length vectors as the columns of a matrix.
pub fn columns_to_matrix<V: AsRef<[f64]>>(cols: &[V]) -> DMatrix<f64> {
    let rows = cols.first().map(|c| c.as_ref().len()).unwrap_or(0);
    DMatrix::from_fn(rows, cols.len(), |r, c| cols[c].as_ref()[r])
}

/// Splits a matrix into its columns.
pub fn matrix_to_columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}
