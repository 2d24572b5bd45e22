//! Regression data and the least-squares kernels behind `R²`.
//!
//! Tested covariates are centered and scaled to unit (population) variance
//! when a [`DesignData`] is built, so every column of `X` has squared norm
//! `n`. The forced block `X0` is kept exactly as given; its first column must
//! be the intercept.

mod diagnostics;
mod fit;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

pub use diagnostics::{design_diagnostics, DesignDiagnostics};
pub use fit::FitState;

/// Relative residual norm below which a column counts as collinear.
pub const COLLINEARITY_TOL: f64 = 1e-8;

/// Columns whose mean and variance are already this close to (0, 1) are kept
/// verbatim, which makes standardization idempotent.
const STANDARDIZED_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Model keys
// ---------------------------------------------------------------------------

/// A model `M_A`: the set `A` of tested covariates (0-based) together with the
/// order in which the search inserted them.
///
/// Equality and hashing use the index set only.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ModelKey {
    indices: Vec<usize>,
    insertion_order: Vec<usize>,
}

impl ModelKey {
    /// The base model `M_0`.
    pub fn empty() -> Self {
        Self::default()
    }

    /// A model whose insertion order is the given sequence.
    ///
    /// Panics if the sequence repeats an index.
    pub fn from_order(order: Vec<usize>) -> Self {
        let mut indices = order.clone();
        indices.sort_unstable();
        assert!(
            indices.windows(2).all(|w| w[0] != w[1]),
            "model indices must be distinct"
        );
        Self { indices, insertion_order: order }
    }

    /// A model with insertion order equal to the sorted index set.
    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut order: Vec<usize> = indices.into_iter().collect();
        order.sort_unstable();
        Self::from_order(order)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn insertion_order(&self) -> &[usize] {
        &self.insertion_order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    /// This model with `index` appended to the insertion order.
    pub fn with(&self, index: usize) -> Self {
        let mut order = self.insertion_order.clone();
        order.push(index);
        Self::from_order(order)
    }

    pub fn union(&self, other: &ModelKey) -> ModelKey {
        let mut order = self.insertion_order.clone();
        order.extend(other.insertion_order.iter().filter(|&&j| !self.contains(j)));
        ModelKey::from_order(order)
    }

    pub fn intersection(&self, other: &ModelKey) -> ModelKey {
        ModelKey::from_order(
            self.insertion_order.iter().copied().filter(|&j| other.contains(j)).collect(),
        )
    }

    pub fn is_subset_of(&self, other: &ModelKey) -> bool {
        self.indices.iter().all(|&j| other.contains(j))
    }
}

impl PartialEq for ModelKey {
    fn eq(&self, other: &Self) -> bool {
        self.indices == other.indices
    }
}

impl Eq for ModelKey {}

impl std::hash::Hash for ModelKey {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.indices.hash(state);
    }
}

impl std::fmt::Display for ModelKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_empty() {
            return write!(f, "{{}}");
        }
        let parts: Vec<String> = self.indices.iter().map(|j| (j + 1).to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

// ---------------------------------------------------------------------------
// Design data
// ---------------------------------------------------------------------------

/// Response `y`, forced covariates `X0` (intercept first) and tested
/// covariates `X` of the model `y = X0 β0 + X β + ε`.
#[derive(Debug, Clone)]
pub struct DesignData {
    y: DVector<f64>,
    x0: DMatrix<f64>,
    x: DMatrix<f64>,
    y_name: String,
    forced_names: Vec<String>,
    names: Vec<String>,
    base: Arc<FitState>,
}

impl DesignData {
    /// Validates and standardizes a design.
    ///
    /// Requirements: the first column of `x0` is all ones, `p >= 1`,
    /// `p <= n - p0 - 1`, every value is finite and `(X0 | X)` has full column
    /// rank.
    pub fn new(y: DVector<f64>, x0: DMatrix<f64>, x: DMatrix<f64>) -> Result<Self> {
        let n = y.len();
        let (p0, p) = (x0.ncols(), x.ncols());
        if x0.nrows() != n || x.nrows() != n {
            return Err(Error::InvalidDims(format!(
                "y has {n} rows but X0 has {} and X has {}",
                x0.nrows(),
                x.nrows()
            )));
        }
        if p0 == 0 || x0.column(0).iter().any(|&v| v != 1.0) {
            return Err(Error::InvalidDims(
                "the first forced column must be the intercept (all ones)".into(),
            ));
        }
        if p == 0 {
            return Err(Error::InvalidDims("at least one tested covariate is required".into()));
        }
        let limit = n as i64 - p0 as i64 - 1;
        if p as i64 > limit {
            return Err(Error::Dimension { p, limit });
        }
        if y.iter().chain(x0.iter()).chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("design contains non-finite values".into()));
        }

        let names: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
        let forced_names = std::iter::once("(intercept)".to_string())
            .chain((1..p0).map(|j| format!("z{j}")))
            .collect();
        let x = standardize_columns(x, &names)?;
        check_full_rank(&x0, &x)?;
        let base = Arc::new(FitState::base(&y, &x0)?);
        Ok(Self { y, x0, x, y_name: "y".into(), forced_names, names, base })
    }

    /// Builds a design whose forced block is an intercept followed by `forced`.
    pub fn with_intercept(y: DVector<f64>, forced: DMatrix<f64>, x: DMatrix<f64>) -> Result<Self> {
        let n = y.len();
        if forced.nrows() != n && forced.ncols() > 0 {
            return Err(Error::InvalidDims("forced block has the wrong number of rows".into()));
        }
        let mut x0 = DMatrix::from_element(n, 1 + forced.ncols(), 1.0);
        for j in 0..forced.ncols() {
            x0.set_column(j + 1, &forced.column(j));
        }
        Self::new(y, x0, x)
    }

    /// Replaces the column names. `forced_names` excludes the intercept.
    pub fn with_names(
        mut self,
        y_name: impl Into<String>,
        forced_names: Vec<String>,
        names: Vec<String>,
    ) -> Result<Self> {
        if forced_names.len() + 1 != self.p0() || names.len() != self.p() {
            return Err(Error::InvalidDims("name list does not match the design".into()));
        }
        self.y_name = y_name.into();
        self.forced_names = std::iter::once("(intercept)".to_string()).chain(forced_names).collect();
        self.names = names;
        Ok(self)
    }

    /// Appends tested covariates. The new columns go through the same
    /// standardization and rank checks as at construction.
    pub fn append_columns(&self, extra: DMatrix<f64>, extra_names: Vec<String>) -> Result<Self> {
        assert_eq!(extra.ncols(), extra_names.len());
        let mut x = DMatrix::zeros(self.n(), self.p() + extra.ncols());
        x.view_mut((0, 0), (self.n(), self.p())).copy_from(&self.x);
        x.view_mut((0, self.p()), (self.n(), extra.ncols())).copy_from(&extra);
        let mut names = self.names.clone();
        names.extend(extra_names);
        let forced: Vec<String> = self.forced_names[1..].to_vec();
        DesignData::new(self.y.clone(), self.x0.clone(), x)?.with_names(
            self.y_name.clone(),
            forced,
            names,
        )
    }

    /// Same data with the tested covariates reordered: new column `k` is old
    /// column `perm[k]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        assert_eq!(perm.len(), self.p());
        let x = DMatrix::from_fn(self.n(), self.p(), |i, k| self.x[(i, perm[k])]);
        let names = perm.iter().map(|&j| self.names[j].clone()).collect();
        DesignData::new(self.y.clone(), self.x0.clone(), x)?.with_names(
            self.y_name.clone(),
            self.forced_names[1..].to_vec(),
            names,
        )
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p0(&self) -> usize {
        self.x0.ncols()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x0(&self) -> &DMatrix<f64> {
        &self.x0
    }

    /// Standardized tested covariates.
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y_name(&self) -> &str {
        &self.y_name
    }

    /// Names of the forced columns, intercept first.
    pub fn forced_names(&self) -> &[String] {
        &self.forced_names
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// `y'(I - H0)y`.
    pub fn total_ss(&self) -> f64 {
        self.base.residual_ss()
    }

    /// Fit state of the base model `M_0`.
    pub fn base_fit(&self) -> &FitState {
        &self.base
    }

    /// `(X0 | X_A)` with the tested columns in `order`.
    pub fn model_matrix(&self, order: &[usize]) -> DMatrix<f64> {
        let (n, p0) = (self.n(), self.p0());
        let mut m = DMatrix::zeros(n, p0 + order.len());
        m.view_mut((0, 0), (n, p0)).copy_from(&self.x0);
        for (k, &j) in order.iter().enumerate() {
            m.set_column(p0 + k, &self.x.column(j));
        }
        m
    }

    pub(crate) fn check_model(&self, model: &ModelKey) -> Result<()> {
        match model.indices().last() {
            Some(&j) if j >= self.p() => Err(Error::InvalidDims(format!(
                "covariate index {} out of range 1..={}",
                j + 1,
                self.p()
            ))),
            _ => Ok(()),
        }
    }
}

fn standardize_columns(mut x: DMatrix<f64>, names: &[String]) -> Result<DMatrix<f64>> {
    let n = x.nrows() as f64;
    for (j, mut col) in x.column_iter_mut().enumerate() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        if mean.abs() < STANDARDIZED_TOL && (var - 1.0).abs() < STANDARDIZED_TOL {
            continue;
        }
        let scale = var.sqrt();
        if !(scale > COLLINEARITY_TOL * (mean * mean + var).sqrt()) {
            return Err(Error::RankDeficient { column: names[j].clone() });
        }
        col.iter_mut().for_each(|v| *v = (*v - mean) / scale);
    }
    Ok(x)
}

fn check_full_rank(x0: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<()> {
    let (n, p0, p) = (x0.nrows(), x0.ncols(), x.ncols());
    let mut m = DMatrix::zeros(n, p0 + p);
    m.view_mut((0, 0), (n, p0)).copy_from(x0);
    m.view_mut((0, p0), (n, p)).copy_from(x);
    let norms: Vec<f64> = m.column_iter().map(|c| c.norm()).collect();
    let r = m.qr().unpack_r();
    for k in 0..p0 + p {
        if r[(k, k)].abs() <= COLLINEARITY_TOL * norms[k] {
            let column = if k < p0 {
                format!("forced column {}", k + 1)
            } else {
                format!("x{}", k - p0 + 1)
            };
            return Err(Error::RankDeficient { column });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Direct least squares
// ---------------------------------------------------------------------------

/// `y'(I - H_A)y` from a fresh Householder factorization of `(X0 | X_A)`.
pub fn residual_ss(design: &DesignData, model: &ModelKey) -> Result<f64> {
    design.check_model(model)?;
    let order = model.insertion_order();
    let m = design.model_matrix(order);
    let norms: Vec<f64> = m.column_iter().map(|c| c.norm()).collect();
    let qr = m.qr();
    let r = qr.r();
    for (k, norm) in norms.iter().enumerate() {
        if r[(k, k)].abs() <= COLLINEARITY_TOL * norm {
            let column = match k.checked_sub(design.p0()) {
                Some(a) => design.names()[order[a]].clone(),
                None => design.forced_names()[k].clone(),
            };
            return Err(Error::RankDeficient { column });
        }
    }
    let q = qr.q();
    let coef = q.tr_mul(design.y());
    let resid = design.y() - &q * coef;
    Ok(resid.norm_squared())
}

fn r_squared_from(rss: f64, tss: f64, y_norm2: f64) -> Result<f64> {
    if !(tss > 1e-24 * y_norm2) {
        return Err(Error::EmptyVariance);
    }
    Ok((1.0 - rss / tss).clamp(0.0, 1.0))
}

/// Coefficient of determination of `M_A` relative to `M_0`:
/// `y'(H_A - H0)y / y'(I - H0)y`, clamped to `[0, 1]`.
pub fn compute_r_squared(design: &DesignData, model: &ModelKey) -> Result<f64> {
    let tss = design.total_ss();
    r_squared_from(tss, tss, design.y().norm_squared())?;
    if model.is_empty() {
        return Ok(0.0);
    }
    r_squared_from(residual_ss(design, model)?, tss, design.y().norm_squared())
}

// ---------------------------------------------------------------------------
// Sums-of-squares decomposition
// ---------------------------------------------------------------------------

/// The four scaled quadratic forms splitting `τ_T y'(I - H0)y` for a model `A`
/// and a reference (true) model `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SsDecomposition {
    /// `τ_T y'(I - H_{A∪T})y`
    pub xi1: f64,
    /// `τ_T y'(H_{A∪T} - H_A)y`
    pub xi2: f64,
    /// `τ_T y'(H_A - H_{A∩T})y`
    pub xi3: f64,
    /// `τ_T y'(H_{A∩T} - H0)y`
    pub xi4: f64,
}

impl SsDecomposition {
    pub fn total(&self) -> f64 {
        self.xi1 + self.xi2 + self.xi3 + self.xi4
    }

    /// `1 - R²_A` recovered from the decomposition.
    pub fn unexplained_fraction(&self) -> f64 {
        (self.xi1 + self.xi2) / self.total()
    }
}

pub fn decompose_ss(
    design: &DesignData,
    model: &ModelKey,
    true_model: &ModelKey,
    tau_true: f64,
) -> Result<SsDecomposition> {
    if !(tau_true > 0.0) {
        return Err(Error::Domain(format!("tau must be positive, got {tau_true}")));
    }
    let rss = |m: &ModelKey| -> Result<f64> {
        if m.is_empty() {
            Ok(design.total_ss())
        } else {
            residual_ss(design, &ModelKey::from_indices(m.indices().iter().copied()))
        }
    };
    let union = rss(&model.union(true_model))?;
    let own = rss(model)?;
    let meet = rss(&model.intersection(true_model))?;
    let base = rss(&ModelKey::empty())?;
    // nested projections: differences are nonnegative up to roundoff
    Ok(SsDecomposition {
        xi1: tau_true * union,
        xi2: tau_true * (own - union).max(0.0),
        xi3: tau_true * (meet - own).max(0.0),
        xi4: tau_true * (base - meet).max(0.0),
    })
}
