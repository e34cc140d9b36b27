//! Explicit finite-difference solver for `dphi/dt = D(x) lap(phi)` on regular
//! 1D and 2D grids.
//!
//! Each step applies
//!
//! ```text
//! phi(x, t + dt) = phi(x, t) + D(x) dt / dx^2 * (sum of neighbors - 2 d phi(x, t))
//! ```
//!
//! with `D` taken at the node being updated. Boundary nodes see ghost
//! neighbors: a mirror of themselves ([`Boundary::Reflecting`], zero flux) or
//! zero ([`Boundary::AbsorbingZero`]).

use std::f64::consts::PI;

use crate::density::{diffusion_coefficient, DensityField, WalkParams};
use crate::error::{invalid, Error, Result};

/// Regular grid with equal spacing on every axis.
///
/// Node `k` of a 2D grid sits at row `k / width`, column `k % width`, with
/// coordinates `origin + (col, row) * spacing`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    extents: Vec<usize>,
    spacing: f64,
    origin: Vec<f64>,
}

impl Grid {
    pub fn new(extents: Vec<usize>, spacing: f64, origin: Vec<f64>) -> Result<Self> {
        if !(extents.len() == 1 || extents.len() == 2) {
            return Err(invalid("grid", format!("dimension {} not 1 or 2", extents.len())));
        }
        if origin.len() != extents.len() {
            return Err(Error::DimensionMismatch {
                expected: extents.len(),
                actual: origin.len(),
            });
        }
        if let Some(e) = extents.iter().find(|&&e| e < 3) {
            return Err(invalid("grid", format!("extent {e} below 3 nodes")));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(invalid("grid", format!("spacing {spacing} not positive")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(invalid("grid", "origin not finite"));
        }
        Ok(Self {
            extents,
            spacing,
            origin,
        })
    }

    /// 1D grid with nodes at `lo, lo + dx, ..., hi`.
    pub fn interval(lo: f64, hi: f64, dx: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(invalid("grid", format!("empty interval [{lo}, {hi}]")));
        }
        let cells = ((hi - lo) / dx).round();
        if (cells * dx - (hi - lo)).abs() > 1e-9 * (hi - lo) {
            return Err(invalid(
                "grid",
                format!("spacing {dx} does not divide [{lo}, {hi}]"),
            ));
        }
        Self::new(vec![cells as usize + 1], dx, vec![lo])
    }

    /// Width x height grid; `origin` is the coordinate of node (0, 0).
    pub fn plane(width: usize, height: usize, spacing: f64, origin: [f64; 2]) -> Result<Self> {
        Self::new(vec![width, height], spacing, origin.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn width(&self) -> usize {
        self.extents[0]
    }

    /// Rows of a 2D grid; 1 for a line.
    pub fn height(&self) -> usize {
        self.extents.get(1).copied().unwrap_or(1)
    }

    pub fn len(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn coordinate(&self, index: usize) -> Vec<f64> {
        let w = self.width();
        match self.dim() {
            1 => vec![self.origin[0] + index as f64 * self.spacing],
            _ => vec![
                self.origin[0] + (index % w) as f64 * self.spacing,
                self.origin[1] + (index / w) as f64 * self.spacing,
            ],
        }
    }

    pub fn coordinates(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|k| self.coordinate(k))
    }

    /// Nearest node to `x`; exact midpoints go to the lower index. Points
    /// more than half a spacing outside the grid are rejected.
    pub fn nearest_node(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let mut axis_index = [0usize; 2];
        for (a, (&coord, &n)) in x.iter().zip(&self.extents).enumerate() {
            let f = (coord - self.origin[a]) / self.spacing;
            if !(f >= -0.5 && f <= n as f64 - 0.5) {
                return Err(Error::Domain(format!(
                    "coordinate {coord} on axis {a} lies outside the grid"
                )));
            }
            let k = if f - f.floor() == 0.5 { f.floor() } else { f.round() };
            axis_index[a] = (k.max(0.0) as usize).min(n - 1);
        }
        Ok(axis_index[1] * self.width() + axis_index[0])
    }
}

/// Probability mass per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid(
                "scalar field",
                format!("node {k} holds {} (must be finite and non-negative)", values[k]),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Reflecting,
    AbsorbingZero,
}

/// Largest stable time step: `dx^2 / (2 d D_max)`.
pub fn stability_limit(d_max: f64, dx: f64, dim: usize) -> f64 {
    dx * dx / (2.0 * dim as f64 * d_max)
}

/// Time step, boundary rule, and per-node diffusion coefficients for one grid.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    grid: Grid,
    dt: f64,
    boundary: Boundary,
    diffusion: Vec<f64>,
    lambda: Vec<f64>,
    renormalize: bool,
}

impl SolverConfig {
    /// Fails if `max(D) dt / dx^2` exceeds `1 / (2 d)`.
    pub fn new(grid: &Grid, dt: f64, boundary: Boundary, diffusion: Vec<f64>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("solver config", format!("dt = {dt} not positive")));
        }
        if diffusion.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: diffusion.len(),
            });
        }
        if let Some(d) = diffusion.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(invalid(
                "solver config",
                format!("diffusion coefficient {d} not positive"),
            ));
        }
        let dx2 = grid.spacing * grid.spacing;
        let d_max = diffusion.iter().copied().fold(0.0, f64::max);
        let factor = d_max * dt / dx2;
        let limit = 1.0 / (2.0 * grid.dim() as f64);
        if factor > limit * (1.0 + 1e-12) {
            return Err(Error::Unstable { factor, limit });
        }
        let lambda = diffusion.iter().map(|d| d * dt / dx2).collect();
        Ok(Self {
            grid: grid.clone(),
            dt,
            boundary,
            diffusion,
            lambda,
            renormalize: false,
        })
    }

    pub fn uniform(grid: &Grid, dt: f64, boundary: Boundary, diffusion: f64) -> Result<Self> {
        Self::new(grid, dt, boundary, vec![diffusion; grid.len()])
    }

    /// Diffusion coefficients derived node by node from a data density.
    pub fn from_density(
        grid: &Grid,
        density: &dyn DensityField,
        params: &WalkParams,
        dt: f64,
        boundary: Boundary,
    ) -> Result<Self> {
        let rho = sample_density(grid, density)?;
        let diffusion = rho
            .iter()
            .map(|&r| diffusion_coefficient(r, params))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, dt, boundary, diffusion)
    }

    /// When on, each step rescales the field back to its pre-step total mass.
    pub fn with_renormalize(mut self, on: bool) -> Self {
        self.renormalize = on;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn renormalize(&self) -> bool {
        self.renormalize
    }

    pub fn diffusion(&self) -> &[f64] {
        &self.diffusion
    }

    /// `max(D) dt / dx^2`.
    pub fn stability_factor(&self) -> f64 {
        self.lambda.iter().copied().fold(0.0, f64::max)
    }

    /// Whole steps needed to reach `t_end`: exact multiples of `dt` (within
    /// 1e-9 relative) count exactly, anything else rounds down.
    pub fn steps_for(&self, t_end: f64) -> Result<usize> {
        if !(t_end.is_finite() && t_end >= 0.0) {
            return Err(invalid("solve", format!("t_end = {t_end} must be non-negative")));
        }
        let ratio = t_end / self.dt;
        let nearest = ratio.round();
        let steps = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest
        } else {
            ratio.floor()
        };
        Ok(steps as usize)
    }
}

/// Density of every grid node.
pub fn sample_density(grid: &Grid, density: &dyn DensityField) -> Result<Vec<f64>> {
    if density.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            actual: density.dim(),
        });
    }
    grid.coordinates().map(|x| density.density_at(&x)).collect()
}

/// Stateful time stepper over padded buffers. Ghost cells are refreshed
/// after every step so the stencil loop has no boundary branches.
#[derive(Debug, Clone)]
pub struct Integrator<'a> {
    config: &'a SolverConfig,
    current: Vec<f64>,
    scratch: Vec<f64>,
    steps: usize,
}

impl<'a> Integrator<'a> {
    pub fn new(phi0: &ScalarField, config: &'a SolverConfig) -> Result<Self> {
        if phi0.grid != config.grid {
            return Err(invalid(
                "solver input",
                "field grid differs from the solver config grid",
            ));
        }
        let grid = &config.grid;
        let (pw, ph) = (grid.width() + 2, if grid.dim() == 2 { grid.height() + 2 } else { 1 });
        let mut current = vec![0.0; pw * ph];
        for r in 0..grid.height() {
            let dst = Self::padded_row(grid, r);
            current[dst..dst + grid.width()]
                .copy_from_slice(&phi0.values[r * grid.width()..(r + 1) * grid.width()]);
        }
        let mut it = Self {
            config,
            scratch: current.clone(),
            current,
            steps: 0,
        };
        fill_ghosts(grid, config.boundary, &mut it.current);
        Ok(it)
    }

    fn padded_row(grid: &Grid, row: usize) -> usize {
        if grid.dim() == 1 {
            1
        } else {
            (row + 1) * (grid.width() + 2) + 1
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.config.dt
    }

    pub fn step(&mut self) {
        let grid = &self.config.grid;
        let w = grid.width();
        let lam = &self.config.lambda;
        let (cur, nxt) = (&self.current, &mut self.scratch);
        if grid.dim() == 1 {
            for c in 0..w {
                let k = c + 1;
                nxt[k] = cur[k] + lam[c] * (cur[k - 1] + cur[k + 1] - 2.0 * cur[k]);
            }
        } else {
            let pw = w + 2;
            for r in 0..grid.height() {
                let base = (r + 1) * pw + 1;
                let lrow = &lam[r * w..(r + 1) * w];
                for c in 0..w {
                    let k = base + c;
                    let lap = cur[k - 1] + cur[k + 1] + cur[k - pw] + cur[k + pw] - 4.0 * cur[k];
                    nxt[k] = cur[k] + lrow[c] * lap;
                }
            }
        }
        if self.config.renormalize {
            let before = interior_sum(grid, cur);
            let after = interior_sum(grid, nxt);
            if after > 0.0 {
                let scale = before / after;
                for r in 0..grid.height() {
                    let s = Self::padded_row(grid, r);
                    nxt[s..s + w].iter_mut().for_each(|v| *v *= scale);
                }
            }
        }
        fill_ghosts(grid, self.config.boundary, nxt);
        std::mem::swap(&mut self.current, &mut self.scratch);
        self.steps += 1;
    }

    pub fn advance(&mut self, steps: usize) {
        for _ in 0..steps {
            self.step();
        }
    }

    /// Current node values in grid order.
    pub fn values(&self) -> Vec<f64> {
        let grid = &self.config.grid;
        let w = grid.width();
        let mut out = Vec::with_capacity(grid.len());
        for r in 0..grid.height() {
            let s = Self::padded_row(grid, r);
            out.extend_from_slice(&self.current[s..s + w]);
        }
        out
    }

    pub fn total_mass(&self) -> f64 {
        interior_sum(&self.config.grid, &self.current)
    }

    pub fn min_value(&self) -> f64 {
        self.values().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn field(&self) -> Result<ScalarField> {
        ScalarField::new(self.config.grid.clone(), self.values())
    }
}

fn interior_sum(grid: &Grid, padded: &[f64]) -> f64 {
    let w = grid.width();
    let mut s = 0.0;
    for r in 0..grid.height() {
        let start = Integrator::padded_row(grid, r);
        s += padded[start..start + w].iter().sum::<f64>();
    }
    s
}

fn fill_ghosts(grid: &Grid, boundary: Boundary, buf: &mut [f64]) {
    let w = grid.width();
    let reflect = boundary == Boundary::Reflecting;
    if grid.dim() == 1 {
        buf[0] = if reflect { buf[1] } else { 0.0 };
        buf[w + 1] = if reflect { buf[w] } else { 0.0 };
        return;
    }
    let pw = w + 2;
    let h = grid.height();
    for c in 1..=w {
        buf[c] = if reflect { buf[pw + c] } else { 0.0 };
        buf[(h + 1) * pw + c] = if reflect { buf[h * pw + c] } else { 0.0 };
    }
    for r in 1..=h {
        buf[r * pw] = if reflect { buf[r * pw + 1] } else { 0.0 };
        buf[r * pw + w + 1] = if reflect { buf[r * pw + w] } else { 0.0 };
    }
}

/// Unit mass at one node.
pub fn impulse_field(grid: &Grid, node: usize) -> Result<ScalarField> {
    if node >= grid.len() {
        return Err(Error::IndexOutOfRange {
            index: node,
            len: grid.len(),
        });
    }
    let mut values = vec![0.0; grid.len()];
    values[node] = 1.0;
    ScalarField::new(grid.clone(), values)
}

fn one_step(phi: &ScalarField, config: &SolverConfig, dim: usize) -> Result<ScalarField> {
    if phi.grid.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: phi.grid.dim(),
        });
    }
    let mut it = Integrator::new(phi, config)?;
    it.step();
    Ok(ScalarField {
        grid: phi.grid.clone(),
        values: it.values(),
    })
}

/// One explicit step on a 1D grid.
pub fn step_1d(phi: &ScalarField, config: &SolverConfig) -> Result<ScalarField> {
    one_step(phi, config, 1)
}

/// One explicit five-point step on a 2D grid.
pub fn step_2d(phi: &ScalarField, config: &SolverConfig) -> Result<ScalarField> {
    one_step(phi, config, 2)
}

/// Result of [`solve`]: the final field and the time actually simulated.
#[derive(Debug, Clone)]
pub struct Solution {
    pub field: ScalarField,
    pub steps: usize,
    pub time: f64,
}

/// Advances `phi0` to `t_end` (rounded down to whole steps).
pub fn solve(phi0: &ScalarField, config: &SolverConfig, t_end: f64) -> Result<Solution> {
    let steps = config.steps_for(t_end)?;
    let mut it = Integrator::new(phi0, config)?;
    it.advance(steps);
    Ok(Solution {
        field: it.field()?,
        steps,
        time: it.time(),
    })
}

/// Solutions at several ascending times from one integration.
pub fn solve_snapshots(
    phi0: &ScalarField,
    config: &SolverConfig,
    times: &[f64],
) -> Result<Vec<Solution>> {
    let steps = times
        .iter()
        .map(|&t| config.steps_for(t))
        .collect::<Result<Vec<_>>>()?;
    if steps.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("solve", "snapshot times must be ascending"));
    }
    let mut it = Integrator::new(phi0, config)?;
    let mut out = Vec::with_capacity(times.len());
    for s in steps {
        it.advance(s - it.steps());
        out.push(Solution {
            field: it.field()?,
            steps: s,
            time: it.time(),
        });
    }
    Ok(out)
}

/// Free-space heat kernel `(4 pi D t)^(-d/2) exp(-|x|^2 / (4 D t))`; the
/// dimension is the length of `offset`.
pub fn analytic_gaussian(offset: &[f64], t: f64, diffusion: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t = {t} must be positive")));
    }
    if !(diffusion > 0.0) {
        return Err(Error::Domain(format!(
            "diffusion coefficient {diffusion} must be positive"
        )));
    }
    let r2: f64 = offset.iter().map(|v| v * v).sum();
    let d = offset.len() as f64;
    Ok((4.0 * PI * diffusion * t).powf(-d / 2.0) * (-r2 / (4.0 * diffusion * t)).exp())
}

/// Transition density: node-wise `phi * rho`, normalized to unit mass.
pub fn true_density(phi: &ScalarField, density: &dyn DensityField) -> Result<ScalarField> {
    let rho = sample_density(&phi.grid, density)?;
    true_density_sampled(phi, &rho)
}

/// [`true_density`] with the density already sampled at every node.
pub fn true_density_sampled(phi: &ScalarField, rho: &[f64]) -> Result<ScalarField> {
    if rho.len() != phi.values.len() {
        return Err(Error::DimensionMismatch {
            expected: phi.values.len(),
            actual: rho.len(),
        });
    }
    let mut psi: Vec<f64> = phi.values.iter().zip(rho).map(|(p, r)| p * r).collect();
    let total: f64 = psi.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Degenerate(format!(
            "phi * rho has total mass {total}"
        )));
    }
    psi.iter_mut().for_each(|v| *v /= total);
    ScalarField::new(phi.grid.clone(), psi)
}
