//! CSV ingestion, correlated-copy augmentation and synthetic data.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::design::{DesignData, ModelKey};
use crate::error::{Error, Result};

/// Reads a design from a CSV file with a header row.
///
/// `y_column` is the response, `forced_columns` join the intercept in `X0`
/// and every other column becomes a tested covariate, in file order.
pub fn load_csv(path: impl AsRef<Path>, y_column: &str, forced_columns: &[String]) -> Result<DesignData> {
    let path = path.as_ref();
    read_csv(path, y_column, forced_columns).map_err(|e| e.in_file(path.display().to_string()))
}

fn read_csv(path: &Path, y_column: &str, forced_columns: &[String]) -> Result<DesignData> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let y_at = find(y_column)?;
    let forced_at = forced_columns.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;
    let tested_at: Vec<usize> = (0..headers.len())
        .filter(|k| *k != y_at && !forced_at.contains(k))
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .enumerate()
            .map(|(k, cell)| {
                cell.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    Error::NonNumericCell {
                        row: r + 1,
                        column: headers.get(k).cloned().unwrap_or_default(),
                        value: cell.to_string(),
                    }
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    let column = |k: usize| DVector::from_iterator(n, rows.iter().map(|row| row[k]));
    let block = |cols: &[usize]| DMatrix::from_fn(n, cols.len(), |i, j| rows[i][cols[j]]);
    let design = DesignData::with_intercept(column(y_at), block(&forced_at), block(&tested_at))?;
    design.with_names(
        y_column,
        forced_columns.to_vec(),
        tested_at.iter().map(|&k| headers[k].clone()).collect(),
    )
}

/// Writes `y`, the forced covariates (intercept omitted) and the
/// standardized tested covariates. Values use the shortest representation
/// that parses back to the same `f64`, so loading the file again reproduces
/// the design exactly.
pub fn write_csv(design: &DesignData, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::from(e).in_file(path.display().to_string()))?;
    let p0 = design.p0();
    let mut header = vec![design.y_name().to_string()];
    header.extend(design.forced_names()[1..].iter().cloned());
    header.extend(design.names().iter().cloned());
    writer.write_record(&header)?;
    for i in 0..design.n() {
        let mut row = vec![design.y()[i].to_string()];
        row.extend((1..p0).map(|j| design.x0()[(i, j)].to_string()));
        row.extend((0..design.p()).map(|j| design.x()[(i, j)].to_string()));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignPattern {
    /// Sign `(-1)^(j+1)` for source column `j`, shared by all its copies.
    PerColumn,
    /// Sign `(-1)^(i+1)` for copy `i`.
    PerCopy,
}

/// Appends `copies_per_column` correlated copies of each of the first
/// `base_columns` covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AugmentSpec {
    pub base_columns: usize,
    pub copies_per_column: usize,
    pub seed: u64,
    pub sign: SignPattern,
}

impl AugmentSpec {
    pub fn new(base_columns: usize, copies_per_column: usize, seed: u64) -> Self {
        Self { base_columns, copies_per_column, seed, sign: SignPattern::PerColumn }
    }

    /// Target correlation of copy `i` (1-based) of source column `j` (1-based).
    pub fn target_correlation(&self, j: usize, i: usize) -> f64 {
        let rho = i as f64 / (1.0 + (i * i) as f64).sqrt();
        let flip = match self.sign {
            SignPattern::PerColumn => j % 2 == 0,
            SignPattern::PerCopy => i % 2 == 0,
        };
        if flip {
            -rho
        } else {
            rho
        }
    }
}

/// Appends `x_new = ρ x_j + sqrt(1 - ρ²) z` for every source column `j` and
/// copy `i`, where `ρ` is the signed target correlation and `z` is seeded
/// Gaussian noise made exactly orthogonal to `x_j`, centered and scaled to
/// unit variance. The in-sample correlation with the source is therefore
/// exactly `ρ`.
///
/// Columns are appended source by source, copy by copy. Each copy draws from
/// its own ChaCha8 stream (`seed`, stream `(j - 1) * copies + (i - 1)`), so
/// the result does not depend on evaluation order.
pub fn augment_correlated(design: &DesignData, spec: &AugmentSpec) -> Result<DesignData> {
    if spec.base_columns > design.p() {
        return Err(Error::InvalidDims(format!(
            "cannot augment {} columns of a design with p = {}",
            spec.base_columns,
            design.p()
        )));
    }
    let extra = spec.base_columns * spec.copies_per_column;
    if extra == 0 {
        return Ok(design.clone());
    }
    let limit = design.n() as i64 - design.p0() as i64 - 1;
    if (design.p() + extra) as i64 > limit {
        return Err(Error::Dimension { p: design.p() + extra, limit });
    }
    let n = design.n();
    let nf = n as f64;
    let mut columns = DMatrix::zeros(n, extra);
    let mut names = Vec::with_capacity(extra);
    for j in 0..spec.base_columns {
        let source = design.x().column(j);
        for i in 0..spec.copies_per_column {
            let stream = (j * spec.copies_per_column + i) as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(stream);
            let mut z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let mean = z.sum() / nf;
            z.add_scalar_mut(-mean);
            let proj = z.dot(&source) / source.norm_squared();
            z.axpy(-proj, &source, 1.0);
            z *= nf.sqrt() / z.norm();
            let rho = spec.target_correlation(j + 1, i + 1);
            let col = source * rho + z * (1.0 - rho * rho).sqrt();
            let k = j * spec.copies_per_column + i;
            columns.set_column(k, &col);
            names.push(format!("{}_c{}", design.names()[j], i + 1));
        }
    }
    design.append_columns(columns, names)
}

/// True data-generating model of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticTruth {
    pub true_model: ModelKey,
    /// Coefficients of the forced block (intercept first).
    pub beta0: Vec<f64>,
    /// Coefficients of the true covariates, in sorted index order.
    pub beta: Vec<f64>,
    /// Error precision: `ε ~ N(0, I / τ)`.
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    IidGaussian,
    /// Gaussian covariates with common pairwise correlation `r ∈ [0, 1)`.
    EquiCorrelated(f64),
}

/// Draws `X` (`n × p`) and `y = X0 β0 + X_T β_T + ε` with an intercept-only
/// forced block. Fully determined by `seed`.
///
/// `β` multiplies the covariates as drawn; the stored design is standardized,
/// which the intercept absorbs without changing the true model.
pub fn simulate(
    n: usize,
    p: usize,
    truth: &SyntheticTruth,
    kind: DesignKind,
    seed: u64,
) -> Result<(DesignData, SyntheticTruth)> {
    if p + 2 > n {
        return Err(Error::Dimension { p, limit: n as i64 - 2 });
    }
    if !(truth.tau > 0.0) {
        return Err(Error::Config(format!("tau must be positive, got {}", truth.tau)));
    }
    if truth.beta0.len() != 1 || truth.beta.len() != truth.true_model.len() {
        return Err(Error::Config(
            "truth needs one intercept coefficient and one coefficient per true covariate".into(),
        ));
    }
    if truth.true_model.indices().iter().any(|&j| j >= p) {
        return Err(Error::Config(format!("true model {} is not within 1..={p}", truth.true_model)));
    }
    let r = match kind {
        DesignKind::IidGaussian => 0.0,
        DesignKind::EquiCorrelated(r) if (0.0..1.0).contains(&r) => r,
        DesignKind::EquiCorrelated(r) => {
            return Err(Error::Config(format!("equicorrelation must lie in [0, 1), got {r}")))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || rng.sample::<f64, _>(StandardNormal);
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let shared = normal();
        for j in 0..p {
            x[(i, j)] = r.sqrt() * shared + (1.0 - r).sqrt() * normal();
        }
    }
    let sd = truth.tau.sqrt().recip();
    let y = DVector::from_fn(n, |i, _| {
        let signal: f64 = truth
            .true_model
            .indices()
            .iter()
            .zip(&truth.beta)
            .map(|(&j, b)| b * x[(i, j)])
            .sum();
        truth.beta0[0] + signal + sd * normal()
    });
    let design = DesignData::with_intercept(y, DMatrix::zeros(n, 0), x)?;
    Ok((design, truth.clone()))
}

#[cfg(test)]
mod tests;
