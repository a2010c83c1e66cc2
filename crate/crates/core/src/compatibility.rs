//! Purchase-derived topic vectors and the quadratic-form compatibility
//! distance fitted from them.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::theta::ThetaTable;

pub const DEFAULT_LAMBDA: f64 = 1e-3;
pub const DEFAULT_WINDOW_DAYS: u32 = 90;
pub const DEFAULT_MIN_ITEMS: usize = 3;
pub const DEFAULT_MAX_ITEMS: usize = 10;

const SECONDS_PER_DAY: i64 = 86_400;
const SYMMETRY_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-8;

/// A `purchases.jsonl` line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PurchaseRecord {
    pub user_id: String,
    pub product_id: String,
    /// Seconds since the epoch.
    pub timestamp: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    /// `M = (Σ + λI)⁻¹`, the conventional Mahalanobis form.
    InverseCovariance,
    /// `M = Σ + λI`, the covariance itself.
    Covariance,
    /// `M = I`; the distance is squared Euclidean.
    Identity,
}

impl MetricMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricMode::InverseCovariance => "inverse_covariance",
            MetricMode::Covariance => "covariance",
            MetricMode::Identity => "identity",
        }
    }
}

impl std::str::FromStr for MetricMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse_covariance" => Ok(MetricMode::InverseCovariance),
            "covariance" => Ok(MetricMode::Covariance),
            "identity" => Ok(MetricMode::Identity),
            other => Err(Error::param("mode", format!("unknown metric mode `{other}`"))),
        }
    }
}

/// Symmetric positive-semidefinite `K×K` matrix defining
/// `d_M(x, y) = (x − y) M (x − y)ᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MetricFile", into = "MetricFile")]
pub struct CompatibilityMetric {
    mode: MetricMode,
    lambda: f64,
    dim: usize,
    /// Row-major.
    data: Vec<f64>,
}

/// `metric.json` layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MetricFile {
    mode: MetricMode,
    lambda: f64,
    m: Vec<Vec<f64>>,
}

impl TryFrom<MetricFile> for CompatibilityMetric {
    type Error = Error;

    fn try_from(f: MetricFile) -> Result<Self> {
        CompatibilityMetric::from_rows(f.mode, f.lambda, f.m)
    }
}

impl From<CompatibilityMetric> for MetricFile {
    fn from(m: CompatibilityMetric) -> Self {
        MetricFile {
            mode: m.mode,
            lambda: m.lambda,
            m: m.rows(),
        }
    }
}

impl CompatibilityMetric {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self {
            mode: MetricMode::Identity,
            lambda: 0.0,
            dim,
            data,
        }
    }

    /// Wraps an explicit matrix after checking symmetry and PSD-ness.
    pub fn from_rows(mode: MetricMode, lambda: f64, rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.len(),
            });
        }
        let metric = Self {
            mode,
            lambda,
            dim,
            data: rows.into_iter().flatten().collect(),
        };
        metric.validate()?;
        Ok(metric)
    }

    fn from_matrix(mode: MetricMode, lambda: f64, m: &DMatrix<f64>) -> Result<Self> {
        let dim = m.nrows();
        // nalgebra is column-major; symmetrize while copying out.
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = 0.5 * (m[(i, j)] + m[(j, i)]);
            }
        }
        let metric = Self { mode, lambda, dim, data };
        metric.validate()?;
        Ok(metric)
    }

    fn validate(&self) -> Result<()> {
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("m", "non-finite entry"));
        }
        let n = self.dim;
        for i in 0..n {
            for j in 0..i {
                if (self.data[i * n + j] - self.data[j * n + i]).abs() > SYMMETRY_TOL {
                    return Err(Error::param("m", format!("not symmetric at ({i}, {j})")));
                }
            }
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < -PSD_TOL {
            return Err(Error::NotPositiveSemidefinite(min_eig));
        }
        Ok(())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim == 0 {
            return 0.0;
        }
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.data);
        m.symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn mode(&self) -> MetricMode {
        self.mode
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim.max(1)).map(<[f64]>::to_vec).collect()
    }

    /// `(x − y) M (x − y)ᵀ`, no square root, clamped at zero.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        for v in [x, y] {
            if v.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    actual: v.len(),
                });
            }
        }
        Ok(self.distance_unchecked(x, y))
    }

    pub(crate) fn distance_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.dim;
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let mut total = 0.0;
        for i in 0..n {
            if diff[i] == 0.0 {
                continue;
            }
            let row = &self.data[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += row[j] * diff[j];
            }
            total += diff[i] * acc;
        }
        total.max(0.0)
    }
}

/// Sum of the distributions scaled to unit Euclidean norm.
pub fn aggregate_topic_vector<'a, I>(thetas: I) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut iter = thetas.into_iter();
    let first = iter.next().ok_or(Error::EmptyInput("topic distributions"))?;
    let mut sum = first.to_vec();
    for theta in iter {
        if theta.len() != sum.len() {
            return Err(Error::DimensionMismatch {
                expected: sum.len(),
                actual: theta.len(),
            });
        }
        for (s, t) in sum.iter_mut().zip(theta) {
            *s += t;
        }
    }
    let norm = sum.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(sum.into_iter().map(|v| v / norm).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PurchaseWindow {
    pub window_days: u32,
    pub min_items: usize,
    pub max_items: usize,
}

impl Default for PurchaseWindow {
    fn default() -> Self {
        Self {
            window_days: DEFAULT_WINDOW_DAYS,
            min_items: DEFAULT_MIN_ITEMS,
            max_items: DEFAULT_MAX_ITEMS,
        }
    }
}

/// Splits each user's purchases into chronological windows and returns one
/// aggregate topic vector per window of acceptable size.
///
/// Purchases of products without θ are dropped first. A window opens at its
/// first item and closes at the first item more than `window_days` later.
/// Output order is by user id, then window start.
pub fn build_purchase_vectors(
    purchases: &[PurchaseRecord],
    thetas: &ThetaTable,
    window: PurchaseWindow,
) -> Vec<Vec<f64>> {
    let mut by_user: BTreeMap<&str, Vec<&PurchaseRecord>> = BTreeMap::new();
    for p in purchases.iter().filter(|p| thetas.contains(&p.product_id)) {
        by_user.entry(p.user_id.as_str()).or_default().push(p);
    }
    let span = i64::from(window.window_days) * SECONDS_PER_DAY;
    let mut vectors = Vec::new();
    for (_, mut items) in by_user {
        items.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then(a.product_id.cmp(&b.product_id)));
        let mut groups: Vec<Vec<&PurchaseRecord>> = Vec::new();
        for item in items {
            match groups.last_mut() {
                Some(g) if item.timestamp - g[0].timestamp <= span => g.push(item),
                _ => groups.push(vec![item]),
            }
        }
        for g in groups {
            if (window.min_items..=window.max_items).contains(&g.len()) {
                let rows = g.iter().filter_map(|p| thetas.get(&p.product_id));
                if let Ok(v) = aggregate_topic_vector(rows) {
                    vectors.push(v);
                }
            }
        }
    }
    vectors
}

/// Population covariance (divides by n) of equal-length vectors.
pub fn covariance(vectors: &[Vec<f64>], dim: usize) -> Result<DMatrix<f64>> {
    if vectors.is_empty() {
        return Err(Error::EmptyInput("purchase vectors"));
    }
    let n = vectors.len() as f64;
    let mut mean = DVector::<f64>::zeros(dim);
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
        mean += DVector::from_column_slice(v);
    }
    mean /= n;
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for v in vectors {
        let centered = DVector::from_column_slice(v) - &mean;
        cov += &centered * centered.transpose();
    }
    Ok(cov / n)
}

/// Fits the metric matrix from purchase vectors.
pub fn fit_metric(vectors: &[Vec<f64>], dim: usize, mode: MetricMode, lambda: f64) -> Result<CompatibilityMetric> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::param("lambda", "must be finite and non-negative"));
    }
    if mode == MetricMode::Identity {
        return Ok(CompatibilityMetric::identity(dim));
    }
    if vectors.len() < 2 {
        return Err(Error::param(
            "vectors",
            format!("covariance needs at least 2 vectors, got {}", vectors.len()),
        ));
    }
    let shrunk = covariance(vectors, dim)? + DMatrix::<f64>::identity(dim, dim) * lambda;
    let m = match mode {
        MetricMode::Covariance => shrunk,
        MetricMode::InverseCovariance => shrunk
            .cholesky()
            .ok_or(Error::SingularCovariance)?
            .inverse(),
        MetricMode::Identity => unreachable!(),
    };
    CompatibilityMetric::from_matrix(mode, lambda, &m)
}
