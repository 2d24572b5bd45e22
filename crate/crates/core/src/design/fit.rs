use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{r_squared_from, DesignData, ModelKey, COLLINEARITY_TOL};
use crate::error::{Error, Result};

/// Extensions after which the factorization is rebuilt from scratch.
const REFACTOR_EVERY: usize = 50;

/// Least-squares state of one model, extendable one column at a time.
///
/// Holds an orthonormal basis `Q` of `(X0 | X_A)` (columns in insertion
/// order) and the matching upper-triangular factor `R` with `Q R = (X0 | X_A)`,
/// so `R'R` is the Cholesky factorization of the Gram matrix. Columns are
/// shared between states; extending never touches the original.
#[derive(Debug, Clone)]
pub struct FitState {
    model: ModelKey,
    basis: Vec<Arc<DVector<f64>>>,
    factor: Vec<Arc<[f64]>>,
    resid: Arc<DVector<f64>>,
    rss: f64,
    tss: f64,
    y_norm2: f64,
    since_refactor: usize,
}

impl FitState {
    /// State for the base model; `design` must already be valid.
    pub(super) fn base(y: &DVector<f64>, x0: &DMatrix<f64>) -> Result<Self> {
        let (basis, factor, resid) = householder(y, x0.clone())?;
        let rss = resid.norm_squared();
        Ok(Self {
            model: ModelKey::empty(),
            basis,
            factor,
            resid: Arc::new(resid),
            rss,
            tss: rss,
            y_norm2: y.norm_squared(),
            since_refactor: 0,
        })
    }

    /// Fit state for `M_0`.
    pub fn begin(design: &DesignData) -> FitState {
        design.base_fit().clone()
    }

    /// Fit of `model` computed from scratch, columns in its insertion order.
    pub fn direct(design: &DesignData, model: &ModelKey) -> Result<FitState> {
        design.check_model(model)?;
        let m = design.model_matrix(model.insertion_order());
        let (basis, factor, resid) = householder(design.y(), m).map_err(|e| match e {
            Error::RankDeficient { column } => Error::RankDeficient {
                column: relabel(design, model, &column),
            },
            other => other,
        })?;
        let rss = resid.norm_squared();
        Ok(Self {
            model: model.clone(),
            basis,
            factor,
            resid: Arc::new(resid),
            rss,
            tss: design.total_ss(),
            y_norm2: design.y().norm_squared(),
            since_refactor: 0,
        })
    }

    pub fn model(&self) -> &ModelKey {
        &self.model
    }

    /// `y'(I - H_A)y`.
    pub fn residual_ss(&self) -> f64 {
        self.rss
    }

    pub fn r_squared(&self) -> Result<f64> {
        r_squared_from(self.rss, self.tss, self.y_norm2)
    }

    /// Triangular factor `R` as a dense matrix (`Q R = (X0 | X_A)`).
    pub fn factor(&self) -> DMatrix<f64> {
        let k = self.factor.len();
        DMatrix::from_fn(k, k, |i, j| if i <= j { self.factor[j][i] } else { 0.0 })
    }

    /// Residual sum of squares of `A ∪ {index}` without materializing the
    /// extended state.
    pub fn candidate_residual_ss(&self, design: &DesignData, index: usize) -> Result<f64> {
        let x = self.checked_column(design, index)?;
        let (_, r, norm) = self.orthogonalize(&x);
        if norm <= COLLINEARITY_TOL * x.norm() {
            return Err(Error::RankDeficient { column: design.names()[index].clone() });
        }
        let c = r.dot(&self.resid) / norm;
        Ok((self.rss - c * c).max(0.0))
    }

    /// `R²` of `A ∪ {index}`.
    pub fn candidate_r_squared(&self, design: &DesignData, index: usize) -> Result<f64> {
        let rss = self.candidate_residual_ss(design, index)?;
        r_squared_from(rss, self.tss, self.y_norm2)
    }

    /// New state for `A ∪ {index}` with `index` appended to the insertion order.
    pub fn extend(&self, design: &DesignData, index: usize) -> Result<FitState> {
        let x = self.checked_column(design, index)?;
        if self.since_refactor + 1 >= REFACTOR_EVERY {
            return FitState::direct(design, &self.model.with(index));
        }
        let (coef, r, norm) = self.orthogonalize(&x);
        if norm <= COLLINEARITY_TOL * x.norm() {
            return Err(Error::RankDeficient { column: design.names()[index].clone() });
        }
        let q = r / norm;
        let c = q.dot(&self.resid);
        let resid = &*self.resid - &q * c;
        let rss = resid.norm_squared();

        let mut column = coef;
        column.push(norm);
        let mut basis = self.basis.clone();
        basis.push(Arc::new(q));
        let mut factor = self.factor.clone();
        factor.push(column.into());
        Ok(FitState {
            model: self.model.with(index),
            basis,
            factor,
            resid: Arc::new(resid),
            rss,
            tss: self.tss,
            y_norm2: self.y_norm2,
            since_refactor: self.since_refactor + 1,
        })
    }

    fn checked_column(&self, design: &DesignData, index: usize) -> Result<DVector<f64>> {
        if index >= design.p() {
            return Err(Error::InvalidDims(format!("covariate index {} out of range", index + 1)));
        }
        if self.model.contains(index) {
            return Err(Error::InvalidDims(format!(
                "covariate {} is already in the model",
                index + 1
            )));
        }
        Ok(design.x().column(index).into_owned())
    }

    /// Two passes of modified Gram–Schmidt against the basis. Returns the
    /// projection coefficients, the residual and its norm.
    fn orthogonalize(&self, x: &DVector<f64>) -> (Vec<f64>, DVector<f64>, f64) {
        let mut r = x.clone();
        let mut coef = vec![0.0; self.basis.len()];
        for _ in 0..2 {
            for (c, q) in coef.iter_mut().zip(&self.basis) {
                let d = q.dot(&r);
                r.axpy(-d, q, 1.0);
                *c += d;
            }
        }
        let norm = r.norm();
        (coef, r, norm)
    }
}

type Factorization = (Vec<Arc<DVector<f64>>>, Vec<Arc<[f64]>>, DVector<f64>);

fn householder(y: &DVector<f64>, m: DMatrix<f64>) -> Result<Factorization> {
    let k = m.ncols();
    let norms: Vec<f64> = m.column_iter().map(|c| c.norm()).collect();
    let qr = m.qr();
    let r = qr.r();
    let q = qr.q();
    for (j, norm) in norms.iter().enumerate() {
        if r[(j, j)].abs() <= COLLINEARITY_TOL * norm {
            return Err(Error::RankDeficient { column: format!("#{j}") });
        }
    }
    let coef = q.tr_mul(y);
    let resid = y - &q * coef;
    let basis = q.column_iter().map(|c| Arc::new(c.into_owned())).collect();
    let factor = (0..k).map(|j| (0..=j).map(|i| r[(i, j)]).collect::<Vec<_>>().into()).collect();
    Ok((basis, factor, resid))
}

fn relabel(design: &DesignData, model: &ModelKey, placeholder: &str) -> String {
    let pos: usize = placeholder.trim_start_matches('#').parse().unwrap_or(0);
    match pos.checked_sub(design.p0()) {
        Some(a) => design.names()[model.insertion_order()[a]].clone(),
        None => design.forced_names()[pos].clone(),
    }
}
