//! One-dimensional comparisons of the discrete chain and the continuous
//! solver on a piecewise-constant density.
//!
//! The discrete walk runs on points spaced `1/rho`; `N` of its steps match
//! continuous time `N * delta`. Both curves start from an impulse and are
//! scaled so their peak is 1.

use std::io::Write;

use super::config::ExperimentConfig;
use super::{at_key, entry, median, Check, ConfigError, Outcome, OutputDir, Relation, RunError};
use crate::density::{points_from_piecewise, PiecewiseDensity1D, WalkParams};
use crate::error::{Error, Result};
use crate::export::{field_checksum, write_field_csv_1d};
use crate::solver::{impulse_field, solve, true_density, Grid, SolverConfig};
use crate::walk::{chain_transition_matrix, propagate, StateDistribution};

/// Level that defines how far a normalized curve has spread.
pub const REACH_LEVEL: f64 = 0.1;
/// Nodes on each side of the interface used for the smoothness baseline.
pub const SMOOTHNESS_NEIGHBORS: usize = 3;

/// Validated inputs of a line experiment.
#[derive(Debug, Clone)]
pub struct LineSetup {
    pub density: PiecewiseDensity1D,
    pub params: WalkParams,
    pub grid: Grid,
    pub solver: SolverConfig,
    pub impulse: f64,
    pub discrete_steps: usize,
}

impl LineSetup {
    pub fn from_config(config: &ExperimentConfig) -> std::result::Result<Self, ConfigError> {
        let breakpoints = config.f64_list("density.breakpoints")?;
        let values = config.f64_list("density.values")?;
        let density = at_key("density.values", PiecewiseDensity1D::new(breakpoints, values))?;
        let p0 = config.f64("walk.p0")?;
        let delta = config.f64("walk.delta")?;
        let params = at_key("walk.p0", WalkParams::new(p0, 1, delta))?;
        let dx = config.positive("solver.dx")?;
        let grid = at_key("solver.dx", Grid::interval(density.lower(), density.upper(), dx))?;
        let dt = config.positive("solver.dt")?;
        let boundary = config.boundary("solver.boundary")?;
        let solver = at_key(
            "solver.dt",
            SolverConfig::from_density(&grid, &density, &params, dt, boundary),
        )?
        .with_renormalize(config.bool("solver.renormalize")?);
        let impulse = config.f64("schedule.impulse")?;
        at_key("schedule.impulse", grid.nearest_node(&[impulse]))?;
        let discrete_steps = config.usize("schedule.discrete_steps")?;
        if discrete_steps == 0 {
            return Err(ConfigError::at("schedule.discrete_steps", "must be at least 1"));
        }
        let setup = Self {
            density,
            params,
            grid,
            solver,
            impulse,
            discrete_steps,
        };
        let t = setup.stop_time();
        let steps = at_key("schedule.discrete_steps", setup.solver.steps_for(t))?;
        if (steps as f64 * dt - t).abs() > 1e-9 * t {
            return Err(ConfigError::at(
                "schedule.discrete_steps",
                format!("stop time {t} is not a whole number of solver steps of {dt}"),
            ));
        }
        Ok(setup)
    }

    /// Continuous time matching the discrete step count.
    pub fn stop_time(&self) -> f64 {
        self.discrete_steps as f64 * self.params.delta()
    }
}

/// Both curves, peak-normalized.
#[derive(Debug, Clone)]
pub struct LineCurves {
    pub points: Vec<f64>,
    pub discrete: Vec<f64>,
    pub discrete_mass: Vec<f64>,
    pub grid_x: Vec<f64>,
    pub continuous: Vec<f64>,
    pub discrete_on_grid: Vec<f64>,
    pub phi: crate::solver::ScalarField,
    pub solver_steps: usize,
    pub time: f64,
}

pub fn compute_curves(setup: &LineSetup) -> Result<LineCurves> {
    let points = points_from_piecewise(&setup.density);
    let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
    let start = nearest_index(&xs, setup.impulse);
    let p = chain_transition_matrix(xs.len(), setup.params.p0())?;
    let q = propagate(&p, &StateDistribution::delta(xs.len(), start)?, setup.discrete_steps)?.into_inner();

    let node = setup.grid.nearest_node(&[setup.impulse])?;
    let sol = solve(&impulse_field(&setup.grid, node)?, &setup.solver, setup.stop_time())?;
    let grid_x: Vec<f64> = setup.grid.coordinates().map(|c| c[0]).collect();
    let continuous = peak_normalized(sol.field.values())?;
    let discrete = peak_normalized(&q)?;
    let discrete_on_grid = grid_x.iter().map(|&x| interpolate(&xs, &discrete, x)).collect();
    Ok(LineCurves {
        points: xs,
        discrete,
        discrete_mass: q,
        grid_x,
        continuous,
        discrete_on_grid,
        phi: sol.field,
        solver_steps: sol.steps,
        time: sol.time,
    })
}

fn nearest_index(xs: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (k, &v) in xs.iter().enumerate() {
        if (v - x).abs() < (xs[best] - x).abs() {
            best = k;
        }
    }
    best
}

pub fn peak_normalized(values: &[f64]) -> Result<Vec<f64>> {
    let peak = values.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::Degenerate(format!("curve peak is {peak}")));
    }
    Ok(values.iter().map(|v| v / peak).collect())
}

/// Piecewise-linear interpolation through ascending `xs`, constant beyond
/// the ends.
pub fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&v| v <= x);
    if k == 0 {
        return ys[0];
    }
    if k == xs.len() {
        return ys[xs.len() - 1];
    }
    let (x0, x1) = (xs[k - 1], xs[k]);
    let w = (x - x0) / (x1 - x0);
    ys[k - 1] * (1.0 - w) + ys[k] * w
}

/// Distances from the peak to the first samples below `level` on the left
/// and on the right; the domain end counts when the curve never drops.
pub fn reach(xs: &[f64], curve: &[f64], level: f64) -> (f64, f64) {
    let peak = (0..curve.len()).fold(0, |b, k| if curve[k] > curve[b] { k } else { b });
    let left = (0..=peak).rev().find(|&k| curve[k] < level).unwrap_or(0);
    let right = (peak..curve.len()).find(|&k| curve[k] < level).unwrap_or(curve.len() - 1);
    (xs[peak] - xs[left], xs[right] - xs[peak])
}

/// Kink at the sample nearest `at`, relative to the kinks next to it.
///
/// With slopes `s_k = (c_{k+1} - c_k) / (x_{k+1} - x_k)` the kink at sample
/// `m` is `|s_m - s_{m-1}|`. The baseline is the larger of the medians of
/// the `k` kinks on each side, so a curve whose curvature changes sharply
/// across `at` is still measured against its own rougher side.
pub fn interface_jump_ratio(xs: &[f64], curve: &[f64], at: f64, k: usize) -> Result<f64> {
    let i = nearest_index(xs, at);
    if i < k + 1 || i + k + 2 > xs.len() {
        return Err(Error::Domain(format!(
            "interface sample {i} has fewer than {k} neighbors on a side"
        )));
    }
    let slope = |m: usize| (curve[m + 1] - curve[m]) / (xs[m + 1] - xs[m]);
    let kink = |m: usize| (slope(m) - slope(m - 1)).abs();
    let left: Vec<f64> = (1..=k).map(|d| kink(i - d)).collect();
    let right: Vec<f64> = (1..=k).map(|d| kink(i + d)).collect();
    let base = median(&left).max(median(&right));
    let jump = kink(i);
    if base == 0.0 {
        return Ok(if jump == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(jump / base)
}

/// Mass strictly left and strictly right of `at`.
pub fn split_mass(xs: &[f64], mass: &[f64], at: f64) -> (f64, f64) {
    let left = xs.iter().zip(mass).filter(|(x, _)| **x < at).map(|(_, m)| m).sum();
    let right = xs.iter().zip(mass).filter(|(x, _)| **x > at).map(|(_, m)| m).sum();
    (left, right)
}

/// Statistics of one line run.
#[derive(Debug, Clone)]
pub struct LineReport {
    pub discrete_rows: usize,
    pub continuous_rows: usize,
    pub impulse_node: usize,
    pub stop_time: f64,
    pub solver_steps: usize,
    pub max_abs_discrepancy: f64,
    pub discrete_reach: (f64, f64),
    pub continuous_reach: (f64, f64),
    pub interface: Option<f64>,
    pub discrete_jump_ratio: Option<f64>,
    pub continuous_jump_ratio: Option<f64>,
    pub continuous_mass: (f64, f64),
    pub discrete_mass: (f64, f64),
    pub total_phi: f64,
    pub checksum: String,
    pub outcome: Outcome,
}

fn spread_ratio((left, right): (f64, f64)) -> f64 {
    if right > 0.0 {
        left / right
    } else {
        f64::INFINITY
    }
}

impl LineReport {
    /// Sparse-side reach over dense-side reach for the discrete curve.
    pub fn discrete_spread_ratio(&self) -> f64 {
        spread_ratio(self.discrete_reach)
    }

    pub fn continuous_spread_ratio(&self) -> f64 {
        spread_ratio(self.continuous_reach)
    }
}

pub fn run_fig2(config: &ExperimentConfig) -> std::result::Result<LineReport, RunError> {
    run_line(config, "fig2")
}

pub fn run_fig3(config: &ExperimentConfig) -> std::result::Result<LineReport, RunError> {
    run_line(config, "fig3")
}

fn run_line(config: &ExperimentConfig, prefix: &str) -> std::result::Result<LineReport, RunError> {
    let setup = LineSetup::from_config(config)?;
    let mut out = OutputDir::create(config)?;
    let curves = compute_curves(&setup)?;

    out.write(&format!("{prefix}_discrete.csv"), |w| {
        writeln!(w, "x,phi_peak_normalized")?;
        for (x, c) in curves.points.iter().zip(&curves.discrete) {
            writeln!(w, "{x},{c}")?;
        }
        Ok(())
    })?;
    out.write(&format!("{prefix}_continuous.csv"), |w| {
        writeln!(w, "x,phi_peak_normalized")?;
        for (x, c) in curves.grid_x.iter().zip(&curves.continuous) {
            writeln!(w, "{x},{c}")?;
        }
        Ok(())
    })?;
    let psi = true_density(&curves.phi, &setup.density)?;
    out.write(&format!("{prefix}_field.csv"), |w| write_field_csv_1d(w, &curves.phi, &psi))?;

    let max_abs_discrepancy = curves
        .continuous
        .iter()
        .zip(&curves.discrete_on_grid)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let discrete_reach = reach(&curves.grid_x, &curves.discrete_on_grid, REACH_LEVEL);
    let continuous_reach = reach(&curves.grid_x, &curves.continuous, REACH_LEVEL);
    let interface = setup.density.breakpoints().get(1).copied().filter(|&b| b < setup.density.upper());
    let (discrete_jump_ratio, continuous_jump_ratio, continuous_mass, discrete_mass) = match interface {
        Some(b) => (
            Some(interface_jump_ratio(&curves.points, &curves.discrete, b, SMOOTHNESS_NEIGHBORS)?),
            Some(interface_jump_ratio(&curves.grid_x, &curves.continuous, b, SMOOTHNESS_NEIGHBORS)?),
            split_mass(&curves.grid_x, curves.phi.values(), b),
            split_mass(&curves.points, &curves.discrete_mass, b),
        ),
        None => (None, None, (f64::NAN, f64::NAN), (f64::NAN, f64::NAN)),
    };

    let mut checks = Vec::new();
    if prefix == "fig2" {
        checks.push(Check::new("max_abs_discrepancy", max_abs_discrepancy, Relation::AtMost, 0.05));
        checks.push(Check::new(
            "discrete_spread_ratio",
            spread_ratio(discrete_reach),
            Relation::AtLeast,
            3.0,
        ));
        checks.push(Check::new(
            "continuous_spread_ratio",
            spread_ratio(continuous_reach),
            Relation::AtLeast,
            3.0,
        ));
    } else if let (Some(d), Some(c)) = (discrete_jump_ratio, continuous_jump_ratio) {
        checks.push(Check::new("discrete_interface_jump_ratio", d, Relation::Above, 10.0));
        checks.push(Check::new("continuous_interface_jump_ratio", c, Relation::Below, 2.0));
        checks.push(Check::new(
            "continuous_mass_left_minus_right",
            continuous_mass.0 - continuous_mass.1,
            Relation::Above,
            0.0,
        ));
    }

    let checksum = field_checksum(&curves.phi);
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| x.to_string());
    let entries = vec![
        entry("stop_time", setup.stop_time()),
        entry("discrete_steps", setup.discrete_steps),
        entry("solver_steps", curves.solver_steps),
        entry("stability_factor", setup.solver.stability_factor()),
        entry("discrete_points", curves.points.len()),
        entry("grid_nodes", curves.grid_x.len()),
        entry("impulse_node", setup.grid.nearest_node(&[setup.impulse])?),
        entry("max_abs_discrepancy", max_abs_discrepancy),
        entry("discrete_reach_left", discrete_reach.0),
        entry("discrete_reach_right", discrete_reach.1),
        entry("continuous_reach_left", continuous_reach.0),
        entry("continuous_reach_right", continuous_reach.1),
        entry("discrete_interface_jump_ratio", opt(discrete_jump_ratio)),
        entry("continuous_interface_jump_ratio", opt(continuous_jump_ratio)),
        entry("continuous_mass_left", continuous_mass.0),
        entry("continuous_mass_right", continuous_mass.1),
        entry("discrete_mass_left", discrete_mass.0),
        entry("discrete_mass_right", discrete_mass.1),
        entry("total_phi", curves.phi.total_mass()),
        entry("phi_sha256", &checksum),
    ];
    out.report(&format!("{prefix}_report.txt"), &entries, &checks)?;

    Ok(LineReport {
        discrete_rows: curves.points.len(),
        continuous_rows: curves.grid_x.len(),
        impulse_node: setup.grid.nearest_node(&[setup.impulse])?,
        stop_time: setup.stop_time(),
        solver_steps: curves.solver_steps,
        max_abs_discrepancy,
        discrete_reach,
        continuous_reach,
        interface,
        discrete_jump_ratio,
        continuous_jump_ratio,
        continuous_mass,
        discrete_mass,
        total_phi: curves.phi.total_mass(),
        checksum,
        outcome: out.finish(checks),
    })
}
