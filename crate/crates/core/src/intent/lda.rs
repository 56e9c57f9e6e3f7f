//! Closed-form linear discriminant analysis with a pooled, ridge-regularised
//! covariance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version tag written into model files.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Ridge added to the pooled covariance before inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    /// `1e-6 · trace(Σ) / d`.
    #[default]
    Auto,
    Fixed(f64),
}

impl Regularization {
    fn lambda(self, cov: &DMatrix<f64>) -> f64 {
        match self {
            Regularization::Auto => 1e-6 * cov.trace() / cov.nrows() as f64,
            Regularization::Fixed(l) => l,
        }
    }
}

/// A fitted discriminant. Serialises to the model-file JSON layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct LdaModel {
    means: Vec<Vec<f64>>,
    cov_inv: Vec<Vec<f64>>,
    priors: Vec<f64>,
    lambda: f64,
    feature_schema: u32,
    // derived: Σ⁻¹μ_c and −½μ_cᵀΣ⁻¹μ_c + ln π_c
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

/// On-disk model layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub feature_schema: u32,
    pub lambda: f64,
    pub priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub cov_inv: Vec<Vec<f64>>,
}

impl From<LdaModel> for ModelFile {
    fn from(m: LdaModel) -> Self {
        ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            feature_schema: m.feature_schema,
            lambda: m.lambda,
            priors: m.priors,
            means: m.means,
            cov_inv: m.cov_inv,
        }
    }
}

impl TryFrom<ModelFile> for LdaModel {
    type Error = Error;
    fn try_from(f: ModelFile) -> Result<Self> {
        if f.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Format(format!("unsupported model schema {}", f.schema_version)));
        }
        let k = f.means.len();
        let d = f.means.first().map_or(0, Vec::len);
        let shapes_ok = k >= 2
            && d > 0
            && f.priors.len() == k
            && f.means.iter().all(|m| m.len() == d)
            && f.cov_inv.len() == d
            && f.cov_inv.iter().all(|r| r.len() == d);
        if !shapes_ok {
            return Err(Error::Format("inconsistent model dimensions".into()));
        }
        let all = f.means.iter().flatten().chain(f.cov_inv.iter().flatten()).chain(&f.priors);
        if all.copied().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite model parameter".into()));
        }
        if (f.priors.iter().sum::<f64>() - 1.0).abs() > 1e-9 || f.priors.iter().any(|p| *p <= 0.0) {
            return Err(Error::Format("class priors must be positive and sum to 1".into()));
        }
        let cov_inv = DMatrix::from_fn(d, d, |i, j| f.cov_inv[i][j]);
        Ok(LdaModel::assemble(f.means, &cov_inv, f.priors, f.lambda, f.feature_schema))
    }
}

impl LdaModel {
    fn assemble(
        means: Vec<Vec<f64>>,
        cov_inv: &DMatrix<f64>,
        priors: Vec<f64>,
        lambda: f64,
        feature_schema: u32,
    ) -> Self {
        let mut weights = Vec::with_capacity(means.len());
        let mut biases = Vec::with_capacity(means.len());
        for (mu, prior) in means.iter().zip(&priors) {
            let mu_v = DVector::from_column_slice(mu);
            let w = cov_inv * &mu_v;
            biases.push(-0.5 * mu_v.dot(&w) + prior.ln());
            weights.push(w.iter().copied().collect());
        }
        let cov_inv = (0..cov_inv.nrows()).map(|i| cov_inv.row(i).iter().copied().collect()).collect();
        Self { means, cov_inv, priors, lambda, feature_schema, weights, biases }
    }

    /// Fits class means, pooled within-class covariance (+ λI) and empirical
    /// priors. Labels must cover `0..K` with K ≥ 2 and every class needs more
    /// samples than there are features.
    pub fn fit<X: AsRef<[f64]>>(x: &[X], labels: &[usize], reg: Regularization) -> Result<Self> {
        Self::fit_with_schema(x, labels, reg, super::FEATURE_SCHEMA_VERSION)
    }

    pub fn fit_with_schema<X: AsRef<[f64]>>(
        x: &[X],
        labels: &[usize],
        reg: Regularization,
        feature_schema: u32,
    ) -> Result<Self> {
        if x.len() != labels.len() {
            return Err(Error::InsufficientData(format!("{} samples but {} labels", x.len(), labels.len())));
        }
        let d = x.first().map(|r| r.as_ref().len()).ok_or_else(|| Error::InsufficientData("no samples".into()))?;
        if d == 0 || x.iter().any(|r| r.as_ref().len() != d) {
            return Err(Error::InsufficientData("samples have inconsistent dimension".into()));
        }
        if x.iter().flat_map(|r| r.as_ref()).any(|v| !v.is_finite()) {
            return Err(Error::InsufficientData("non-finite sample".into()));
        }
        let k = labels.iter().max().map_or(0, |m| m + 1);
        if k < 2 {
            return Err(Error::InsufficientData("at least two classes are required".into()));
        }
        let mut counts = vec![0usize; k];
        let mut sums = vec![DVector::<f64>::zeros(d); k];
        for (row, &c) in x.iter().zip(labels) {
            counts[c] += 1;
            sums[c] += DVector::from_column_slice(row.as_ref());
        }
        if let Some(c) = counts.iter().position(|n| *n <= d) {
            return Err(Error::InsufficientData(format!("class {c} has {} samples, needs more than {d}", counts[c])));
        }
        let means: Vec<DVector<f64>> = sums.iter().zip(&counts).map(|(s, n)| s / *n as f64).collect();
        let mut scatter = DMatrix::<f64>::zeros(d, d);
        for (row, &c) in x.iter().zip(labels) {
            let centred = DVector::from_column_slice(row.as_ref()) - &means[c];
            scatter.ger(1.0, &centred, &centred, 1.0);
        }
        let n = x.len();
        let mut cov = scatter / (n - k) as f64;
        let lambda = reg.lambda(&cov);
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("regularization {lambda} must be non-negative")));
        }
        for i in 0..d {
            cov[(i, i)] += lambda;
        }
        let cov_inv = invert_spd(&cov)?;
        let priors = counts.iter().map(|c| *c as f64 / n as f64).collect();
        let means = means.iter().map(|m| m.iter().copied().collect()).collect();
        Ok(Self::assemble(means, &cov_inv, priors, lambda, feature_schema))
    }

    pub fn n_classes(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.cov_inv.len()
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn cov_inv(&self) -> &[Vec<f64>] {
        &self.cov_inv
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn feature_schema(&self) -> u32 {
        self.feature_schema
    }

    /// `xᵀΣ⁻¹μ_c − ½μ_cᵀΣ⁻¹μ_c + ln π_c` for every class.
    pub fn discriminants(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim());
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b)
            .collect()
    }

    /// Most likely class and normalised posteriors.
    pub fn classify(&self, x: &[f64]) -> (usize, Vec<f64>) {
        let scores = self.discriminants(x);
        let best = argmax(&scores);
        let top = scores[best];
        let exp: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
        let z: f64 = exp.iter().sum();
        (best, exp.iter().map(|e| e / z).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Index of the largest value; ties resolve to the lowest index.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn invert_spd(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = cov.trace();
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::SingularCovariance);
    }
    let chol = cov.clone().cholesky().ok_or(Error::SingularCovariance)?;
    let l = chol.l();
    let min_pivot = l.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
    if min_pivot <= 1e-14 * scale {
        return Err(Error::SingularCovariance);
    }
    let inv = chol.inverse();
    // symmetrise away round-off
    Ok((&inv + inv.transpose()) * 0.5)
}
