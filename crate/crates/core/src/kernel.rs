//! Transition densities used as a similarity kernel and as a voting
//! classifier.
//!
//! Row `i` of the kernel is the transition density `psi(. | x_i, t)`
//! obtained by diffusing an impulse placed at `x_i`. Points and queries are
//! snapped to the nearest solver node.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::density::DensityField;
use crate::error::{invalid, Error, Result};
use crate::solver::{impulse_field, sample_density, solve, true_density_sampled, ScalarField, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub position: Vec<f64>,
    pub label: String,
}

impl LabeledPoint {
    pub fn new(position: Vec<f64>, label: impl Into<String>) -> Self {
        Self {
            position,
            label: label.into(),
        }
    }
}

/// Solver setup shared by every kernel evaluation: the configuration, the
/// density sampled at each node, and the diffusion time.
#[derive(Debug, Clone)]
pub struct KernelSetup {
    config: SolverConfig,
    rho: Vec<f64>,
    t: f64,
}

impl KernelSetup {
    pub fn new(config: SolverConfig, density: &dyn DensityField, t: f64) -> Result<Self> {
        let rho = sample_density(config.grid(), density)?;
        Self::with_sampled_density(config, rho, t)
    }

    pub fn with_sampled_density(config: SolverConfig, rho: Vec<f64>, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("diffusion time {t} must be positive")));
        }
        if rho.len() != config.grid().len() {
            return Err(Error::DimensionMismatch {
                expected: config.grid().len(),
                actual: rho.len(),
            });
        }
        if config.steps_for(t)? == 0 {
            return Err(Error::Domain(format!(
                "diffusion time {t} is shorter than one step of {}",
                config.dt()
            )));
        }
        Ok(Self { config, rho, t })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn density(&self) -> &[f64] {
        &self.rho
    }

    pub fn node(&self, x: &[f64]) -> Result<usize> {
        self.config.grid().nearest_node(x)
    }

    /// Full transition density field for an impulse at `source`.
    pub fn transition_field(&self, source: &[f64]) -> Result<ScalarField> {
        let node = self.node(source)?;
        let phi0 = impulse_field(self.config.grid(), node)?;
        let sol = solve(&phi0, &self.config, self.t)?;
        true_density_sampled(&sol.field, &self.rho)
    }

    /// `psi(target | source, t)` for each target.
    pub fn transition_kernel_row(&self, source: &[f64], targets: &[Vec<f64>]) -> Result<Vec<f64>> {
        let psi = self.transition_field(source)?;
        let nodes = targets
            .iter()
            .map(|x| self.node(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(nodes.into_iter().map(|k| psi.values()[k]).collect())
    }

    pub fn kernel_matrix(&self, points: &[Vec<f64>]) -> Result<KernelMatrix> {
        if points.is_empty() {
            return Err(invalid("kernel", "no points"));
        }
        let mut raw = Vec::with_capacity(points.len() * points.len());
        for p in points {
            raw.extend(self.transition_kernel_row(p, points)?);
        }
        KernelMatrix::from_raw(points.to_vec(), raw)
    }

    /// Indicator-weighted vote of the labeled points' transition densities
    /// from an impulse at `query`.
    pub fn classify(&self, labeled: &[LabeledPoint], query: &[f64]) -> Result<Classification> {
        if labeled.is_empty() {
            return Err(invalid("classify", "no labeled points"));
        }
        let targets: Vec<Vec<f64>> = labeled.iter().map(|p| p.position.clone()).collect();
        let sims = self.transition_kernel_row(query, &targets)?;
        let labels: Vec<&str> = labeled.iter().map(|p| p.label.as_str()).collect();
        posterior_from_similarity(&labels, &sims)
    }
}

/// Free-function form of [`KernelSetup::transition_kernel_row`].
pub fn transition_kernel_row(
    setup: &KernelSetup,
    source: &[f64],
    targets: &[Vec<f64>],
) -> Result<Vec<f64>> {
    setup.transition_kernel_row(source, targets)
}

pub fn kernel_matrix(setup: &KernelSetup, points: &[Vec<f64>]) -> Result<KernelMatrix> {
    setup.kernel_matrix(points)
}

pub fn classify(setup: &KernelSetup, labeled: &[LabeledPoint], query: &[f64]) -> Result<Classification> {
    setup.classify(labeled, query)
}

/// Kernel over a point list. `values` is the symmetrized matrix; `raw`
/// keeps the rows as solved.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub points: Vec<Vec<f64>>,
    pub raw: Vec<f64>,
    pub values: Vec<f64>,
    /// `max |K - K^T| / max |K|` before symmetrization.
    pub asymmetry: f64,
    pub min_eigenvalue: f64,
}

impl KernelMatrix {
    pub fn from_raw(points: Vec<Vec<f64>>, raw: Vec<f64>) -> Result<Self> {
        let n = points.len();
        if raw.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: raw.len(),
            });
        }
        if raw.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Degenerate("kernel entry not finite and non-negative".into()));
        }
        let mut values = raw.clone();
        let mut diff: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (raw[i * n + j], raw[j * n + i]);
                diff = diff.max((a - b).abs());
                let m = 0.5 * (a + b);
                values[i * n + j] = m;
                values[j * n + i] = m;
            }
        }
        let scale = raw.iter().copied().fold(0.0, f64::max);
        let asymmetry = if scale > 0.0 { diff / scale } else { 0.0 };
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, &values));
        let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            points,
            raw,
            values,
            asymmetry,
            min_eigenvalue,
        })
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size() + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.size()).map(|i| self.get(i, i)).sum()
    }
}

/// Posterior over labels, in ascending label order.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub labels: Vec<String>,
    pub posterior: Vec<f64>,
    /// Highest posterior; ties go to the first label in order.
    pub argmax: String,
}

impl Classification {
    pub fn probability(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|k| self.posterior[k])
    }
}

/// Sums similarities per label and normalizes.
pub fn posterior_from_similarity(labels: &[&str], similarity: &[f64]) -> Result<Classification> {
    if labels.len() != similarity.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: similarity.len(),
        });
    }
    if labels.is_empty() {
        return Err(invalid("classify", "no labeled points"));
    }
    if similarity.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::Domain("similarities must be finite and non-negative".into()));
    }
    let mut votes: BTreeMap<&str, f64> = BTreeMap::new();
    for (l, s) in labels.iter().zip(similarity) {
        *votes.entry(l).or_insert(0.0) += s;
    }
    let total: f64 = votes.values().sum();
    if !(total > 0.0) {
        return Err(Error::Indeterminate);
    }
    let labels: Vec<String> = votes.keys().map(|l| l.to_string()).collect();
    let posterior: Vec<f64> = votes.values().map(|v| v / total).collect();
    let mut best = 0;
    for (k, p) in posterior.iter().enumerate() {
        if *p > posterior[best] {
            best = k;
        }
    }
    Ok(Classification {
        argmax: labels[best].clone(),
        labels,
        posterior,
    })
}
