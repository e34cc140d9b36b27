//! Similarity-vote classification with transition densities.
//!
//! Labeled points and queries come from the config, or, on a generated
//! spiral, are spread along each arm's centerline (label `A` for the first
//! arm, `B` for the second).

use super::config::{DensityKind, ExperimentConfig};
use super::swissroll::{check_time, plane_solver, scene_from_config, SwissRollScene};
use super::{at_key, entry, Check, ConfigError, Outcome, OutputDir, Relation, RunError};
use crate::density::{PiecewiseDensity1D, WalkParams};
use crate::export::{write_classification_csv, write_kernel_csv, ClassificationRow};
use crate::kernel::{Classification, KernelSetup, LabeledPoint};
use crate::solver::{Grid, SolverConfig};

/// Arm label names on a generated spiral.
pub const ARM_LABELS: [&str; 2] = ["A", "B"];

/// Labeled points spaced evenly along each generated arm.
pub fn arm_labeled_points(scene: &SwissRollScene, per_arm: usize) -> Option<Vec<LabeledPoint>> {
    let mut out = Vec::new();
    for (arm, label) in ARM_LABELS.iter().enumerate() {
        for j in 0..per_arm {
            let s = (j as f64 + 0.5) / per_arm as f64;
            out.push(LabeledPoint::new(scene.centerline_point(arm, s)?, *label));
        }
    }
    Some(out)
}

/// Queries along each generated arm, between the arm's ends, with the label
/// of the arm they lie on.
pub fn arm_queries(scene: &SwissRollScene, per_arm: usize) -> Option<Vec<LabeledPoint>> {
    let mut out = Vec::new();
    for (arm, label) in ARM_LABELS.iter().enumerate() {
        for j in 0..per_arm {
            let s = (j as f64 + 1.0) / (per_arm as f64 + 1.0);
            out.push(LabeledPoint::new(scene.centerline_point(arm, s)?, *label));
        }
    }
    Some(out)
}

/// A query, its expected label when known, and the result.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub query: Vec<f64>,
    pub expected: Option<String>,
    pub classification: Classification,
}

#[derive(Debug, Clone)]
pub struct ClassifyReport {
    pub labeled: Vec<LabeledPoint>,
    pub queries: Vec<QueryResult>,
    pub kernel_rows: usize,
    pub kernel_asymmetry: f64,
    pub kernel_min_eigenvalue: f64,
    pub kernel_trace: f64,
    pub outcome: Outcome,
}

impl ClassifyReport {
    /// Fraction of queries with a known label that were classified to it.
    pub fn accuracy(&self) -> Option<f64> {
        let known: Vec<_> = self.queries.iter().filter(|q| q.expected.is_some()).collect();
        if known.is_empty() {
            return None;
        }
        let hits = known
            .iter()
            .filter(|q| q.expected.as_deref() == Some(q.classification.argmax.as_str()))
            .count();
        Some(hits as f64 / known.len() as f64)
    }
}

struct ClassifySetup {
    kernel: KernelSetup,
    labeled: Vec<LabeledPoint>,
    queries: Vec<(Vec<f64>, Option<String>)>,
}

fn line_solver(config: &ExperimentConfig) -> Result<(PiecewiseDensity1D, SolverConfig), ConfigError> {
    let density = at_key(
        "density.values",
        PiecewiseDensity1D::new(config.f64_list("density.breakpoints")?, config.f64_list("density.values")?),
    )?;
    let params = at_key("walk.p0", WalkParams::new(config.f64("walk.p0")?, 1, config.f64("walk.delta")?))?;
    let grid = at_key(
        "solver.dx",
        Grid::interval(density.lower(), density.upper(), config.positive("solver.dx")?),
    )?;
    let solver = at_key(
        "solver.dt",
        SolverConfig::from_density(
            &grid,
            &density,
            &params,
            config.positive("solver.dt")?,
            config.boundary("solver.boundary")?,
        ),
    )?
    .with_renormalize(config.bool("solver.renormalize")?);
    Ok((density, solver))
}

impl ClassifySetup {
    fn from_config(config: &ExperimentConfig) -> Result<Self, ConfigError> {
        let t = config.positive("classify.time")?;
        let explicit = config.labeled_points("classify.points")?;
        let explicit_queries = config.points("classify.queries")?;
        let (kernel, generated) = match config.density_kind() {
            Some(DensityKind::Piecewise) | None => {
                let (density, solver) = line_solver(config)?;
                check_time(&solver, "classify.time", t)?;
                (at_key("classify.time", KernelSetup::new(solver, &density, t))?, None)
            }
            Some(_) => {
                let scene = scene_from_config(config)?;
                let (_, solver) = plane_solver(config, &scene, 1)?;
                check_time(&solver, "classify.time", t)?;
                let rho = scene.raster.values().to_vec();
                let k = at_key("classify.time", KernelSetup::with_sampled_density(solver, rho, t))?;
                (k, Some(scene))
            }
        };
        let labeled: Vec<LabeledPoint> = if !explicit.is_empty() {
            explicit.into_iter().map(|(l, p)| LabeledPoint::new(p, l)).collect()
        } else {
            let scene = generated
                .as_ref()
                .ok_or_else(|| ConfigError::at("classify.points", "required unless density.kind = spiral"))?;
            let per_arm = config.usize("classify.labels_per_arm")?;
            if per_arm == 0 {
                return Err(ConfigError::at("classify.labels_per_arm", "must be at least 1"));
            }
            arm_labeled_points(scene, per_arm)
                .ok_or_else(|| ConfigError::at("classify.labels_per_arm", "arm points fall outside the raster"))?
        };
        let queries: Vec<(Vec<f64>, Option<String>)> = if !explicit_queries.is_empty() {
            explicit_queries.into_iter().map(|q| (q, None)).collect()
        } else {
            let scene = generated
                .as_ref()
                .ok_or_else(|| ConfigError::at("classify.queries", "required unless density.kind = spiral"))?;
            let per_arm = config.usize("classify.queries_per_arm")?;
            arm_queries(scene, per_arm)
                .ok_or_else(|| ConfigError::at("classify.queries_per_arm", "arm points fall outside the raster"))?
                .into_iter()
                .map(|q| (q.position, Some(q.label)))
                .collect()
        };
        if queries.is_empty() {
            return Err(ConfigError::at("classify.queries", "no queries"));
        }
        for p in &labeled {
            at_key("classify.points", kernel.node(&p.position))?;
        }
        for (q, _) in &queries {
            at_key("classify.queries", kernel.node(q))?;
        }
        Ok(Self {
            kernel,
            labeled,
            queries,
        })
    }
}

pub fn run_classify(config: &ExperimentConfig) -> Result<ClassifyReport, RunError> {
    let setup = ClassifySetup::from_config(config)?;
    let mut out = OutputDir::create(config)?;
    let mut results = Vec::new();
    for (q, expected) in &setup.queries {
        let classification = setup.kernel.classify(&setup.labeled, q)?;
        results.push(QueryResult {
            query: q.clone(),
            expected: expected.clone(),
            classification,
        });
    }
    let points: Vec<Vec<f64>> = setup.labeled.iter().map(|p| p.position.clone()).collect();
    let k = setup.kernel.kernel_matrix(&points)?;

    let labels = results[0].classification.labels.clone();
    let rows: Vec<ClassificationRow> = results
        .iter()
        .map(|r| ClassificationRow {
            query: r.query.clone(),
            label: r.classification.argmax.clone(),
            posterior: r.classification.posterior.clone(),
        })
        .collect();
    out.write("classify_queries.csv", |w| write_classification_csv(w, &labels, &rows))?;
    out.write("classify_kernel.csv", |w| write_kernel_csv(w, k.size(), &k.raw))?;

    let mut report = ClassifyReport {
        labeled: setup.labeled,
        queries: results,
        kernel_rows: k.size() * k.size(),
        kernel_asymmetry: k.asymmetry,
        kernel_min_eigenvalue: k.min_eigenvalue,
        kernel_trace: k.trace(),
        outcome: Outcome {
            kind: config.kind(),
            out_dir: out.path().to_path_buf(),
            files: Vec::new(),
            checks: Vec::new(),
        },
    };
    let mut checks = vec![Check::new(
        "kernel_min_eigenvalue_over_trace",
        k.min_eigenvalue / k.trace(),
        Relation::AtLeast,
        -1e-8,
    )];
    if let Some(acc) = report.accuracy() {
        checks.push(Check::new("same_arm_accuracy", acc, Relation::AtLeast, 0.9));
    }
    let mut entries = vec![
        entry("labeled_points", report.labeled.len()),
        entry("queries", report.queries.len()),
        entry("diffusion_time", setup.kernel.time()),
        entry("kernel_asymmetry", k.asymmetry),
        entry("kernel_min_eigenvalue", k.min_eigenvalue),
        entry("kernel_trace", k.trace()),
    ];
    if let Some(acc) = report.accuracy() {
        entries.push(entry("same_arm_accuracy", acc));
    }
    out.report("classify_report.txt", &entries, &checks)?;
    report.outcome = out.finish(checks);
    Ok(report)
}
