//! Diffusion on a two-arm spiral density in the plane.
//!
//! The density is either drawn by a parametric spiral generator or read
//! from a graymap. Dense arms are found as 4-connected components of
//! cells at or above the geometric mean of the lowest and highest density.
//! The impulse starts in the middle of the arm lying furthest right.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::path::Path;

use super::config::{DensityKind, ExperimentConfig};
use super::{at_key, entry, median, Check, ConfigError, Outcome, OutputDir, Relation, RunError};
use crate::density::{load_density_raster, GrayMapping, RasterDensity2D, WalkParams};
use crate::error::{Error, Result};
use crate::export::{field_checksum, write_field_2d};
use crate::solver::{impulse_field, solve_snapshots, true_density_sampled, Grid, ScalarField, SolverConfig};

/// Centerline samples per arm used to rasterize the spiral.
const CENTERLINE_SAMPLES: usize = 4000;

/// Two Archimedean arms `r = r_in + (r_out - r_in) theta / theta_max`, the
/// second rotated by half a turn. Lengths are in cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpiralParams {
    pub width: usize,
    pub height: usize,
    pub inner_radius: f64,
    pub margin: f64,
    pub turns: f64,
    pub arm_width: f64,
    pub rho_arm: f64,
    pub rho_background: f64,
}

impl SpiralParams {
    pub fn from_config(config: &ExperimentConfig) -> std::result::Result<Self, ConfigError> {
        let p = Self {
            width: config.usize("spiral.width")?,
            height: config.usize("spiral.height")?,
            inner_radius: config.positive("spiral.inner_radius")?,
            margin: config.f64("spiral.margin")?,
            turns: config.positive("spiral.turns")?,
            arm_width: config.positive("spiral.arm_width")?,
            rho_arm: config.positive("spiral.rho_arm")?,
            rho_background: config.positive("spiral.rho_background")?,
        };
        if p.width < 3 || p.height < 3 {
            return Err(ConfigError::at("spiral.width", "raster must be at least 3x3"));
        }
        if !(p.outer_radius() > p.inner_radius) {
            return Err(ConfigError::at(
                "spiral.margin",
                format!("outer radius {} does not exceed the inner radius", p.outer_radius()),
            ));
        }
        if !(p.rho_arm > p.rho_background) {
            return Err(ConfigError::at("spiral.rho_arm", "arms must be denser than the background"));
        }
        Ok(p)
    }

    pub fn outer_radius(&self) -> f64 {
        self.width.min(self.height) as f64 / 2.0 - self.margin
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0)
    }

    /// Point of arm `arm` at fraction `s` in `[0, 1]` of its length, in cell
    /// coordinates `(col, row)`.
    pub fn centerline(&self, arm: usize, s: f64) -> (f64, f64) {
        let theta_max = self.turns * 2.0 * PI;
        let theta = s * theta_max;
        let r = self.inner_radius + (self.outer_radius() - self.inner_radius) * s;
        let phase = theta + arm as f64 * PI;
        let (cx, cy) = self.center();
        (cx + r * phase.cos(), cy + r * phase.sin())
    }
}

/// A planar density with its dense arms located.
#[derive(Debug, Clone)]
pub struct SwissRollScene {
    pub raster: RasterDensity2D,
    /// Cells of each arm, row-major indices.
    pub arms: Vec<Vec<usize>>,
    /// `true` for cells in any arm.
    pub high: Vec<bool>,
    pub source_arm: usize,
    pub source_cell: usize,
    pub spiral: Option<SpiralParams>,
}

impl SwissRollScene {
    pub fn spiral(params: SpiralParams, cell_size: f64) -> Result<Self> {
        let (w, h) = (params.width, params.height);
        let lines: Vec<Vec<(f64, f64)>> = (0..2)
            .map(|arm| {
                (0..CENTERLINE_SAMPLES)
                    .map(|k| params.centerline(arm, k as f64 / (CENTERLINE_SAMPLES - 1) as f64))
                    .collect()
            })
            .collect();
        let r2 = (params.arm_width / 2.0).powi(2);
        let mut values = vec![params.rho_background; w * h];
        for row in 0..h {
            for col in 0..w {
                let (x, y) = (col as f64, row as f64);
                let inside = lines.iter().flatten().any(|&(px, py)| (x - px).powi(2) + (y - py).powi(2) <= r2);
                if inside {
                    values[row * w + col] = params.rho_arm;
                }
            }
        }
        let raster = RasterDensity2D::new(w, h, cell_size, values)?;
        // Source: centerline midpoint of the arm whose midpoint lies further right.
        let mids: Vec<(f64, f64)> = (0..2).map(|a| params.centerline(a, 0.5)).collect();
        let right = if mids[0].0 >= mids[1].0 { 0 } else { 1 };
        let (sx, sy) = mids[right];
        let source = sx.round() as usize + sy.round() as usize * w;
        let mut scene = Self::locate(raster, Some(source))?;
        // Number arms like the generator does.
        let mut order = Vec::new();
        for &(mx, my) in &mids {
            let cell = mx.round() as usize + my.round() as usize * w;
            match scene.arm_of(cell) {
                Some(a) if !order.contains(&a) => order.push(a),
                _ => return Err(Error::Degenerate("spiral arms overlap or miss their centerlines".into())),
            }
        }
        let rest: Vec<usize> = (0..scene.arms.len()).filter(|a| !order.contains(a)).collect();
        order.extend(rest);
        let arms = order.iter().map(|&a| scene.arms[a].clone()).collect();
        scene.source_arm = order.iter().position(|&a| a == scene.source_arm).expect("permutation");
        scene.arms = arms;
        scene.spiral = Some(params);
        Ok(scene)
    }

    pub fn from_raster(raster: RasterDensity2D) -> Result<Self> {
        Self::locate(raster, None)
    }

    fn locate(raster: RasterDensity2D, source: Option<usize>) -> Result<Self> {
        let (w, h) = (raster.width(), raster.height());
        let v = raster.values();
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(0.0, f64::max);
        if !(hi > lo) {
            return Err(Error::Degenerate("density raster is constant; no arms to find".into()));
        }
        let cut = (lo * hi).sqrt();
        let high: Vec<bool> = v.iter().map(|&r| r >= cut).collect();
        let mut label = vec![usize::MAX; w * h];
        let mut arms: Vec<Vec<usize>> = Vec::new();
        for start in 0..w * h {
            if !high[start] || label[start] != usize::MAX {
                continue;
            }
            let id = arms.len();
            let mut cells = Vec::new();
            let mut queue = VecDeque::from([start]);
            label[start] = id;
            while let Some(c) = queue.pop_front() {
                cells.push(c);
                let (r, col) = (c / w, c % w);
                let mut nb = Vec::with_capacity(4);
                if col > 0 {
                    nb.push(c - 1);
                }
                if col + 1 < w {
                    nb.push(c + 1);
                }
                if r > 0 {
                    nb.push(c - w);
                }
                if r + 1 < h {
                    nb.push(c + w);
                }
                for n in nb {
                    if high[n] && label[n] == usize::MAX {
                        label[n] = id;
                        queue.push_back(n);
                    }
                }
            }
            cells.sort_unstable();
            arms.push(cells);
        }
        let (source_arm, source_cell) = match source {
            Some(cell) => {
                let arm = label[cell];
                if arm == usize::MAX {
                    return Err(Error::Degenerate(format!("source cell {cell} is not in a dense arm")));
                }
                (arm, cell)
            }
            None => {
                let centroid = |cells: &[usize]| {
                    let n = cells.len() as f64;
                    let sx: f64 = cells.iter().map(|&c| (c % w) as f64).sum();
                    let sy: f64 = cells.iter().map(|&c| (c / w) as f64).sum();
                    (sx / n, sy / n)
                };
                let arm = (0..arms.len())
                    .max_by(|&a, &b| centroid(&arms[a]).0.total_cmp(&centroid(&arms[b]).0))
                    .expect("at least one arm");
                let (cx, cy) = centroid(&arms[arm]);
                let d2 = |c: usize| ((c % w) as f64 - cx).powi(2) + ((c / w) as f64 - cy).powi(2);
                let cell = *arms[arm]
                    .iter()
                    .min_by(|&&a, &&b| d2(a).total_cmp(&d2(b)))
                    .expect("arms are non-empty");
                (arm, cell)
            }
        };
        Ok(Self {
            raster,
            arms,
            high,
            source_arm,
            source_cell,
            spiral: None,
        })
    }

    /// Solver grid with `refine` nodes per raster cell along each axis.
    pub fn grid(&self, refine: usize) -> Result<Grid> {
        let f = refine.max(1);
        let h = self.raster.cell_size() / f as f64;
        Grid::plane(self.raster.width() * f, self.raster.height() * f, h, [h / 2.0, h / 2.0])
    }

    /// Physical coordinates of a raster cell center, or of any point given
    /// in cell coordinates.
    pub fn cell_to_physical(&self, col: f64, row: f64) -> Vec<f64> {
        let cs = self.raster.cell_size();
        vec![(col + 0.5) * cs, (row + 0.5) * cs]
    }

    pub fn source_position(&self) -> Vec<f64> {
        let w = self.raster.width();
        self.cell_to_physical((self.source_cell % w) as f64, (self.source_cell / w) as f64)
    }

    /// Physical centerline point of a generated arm.
    pub fn centerline_point(&self, arm: usize, s: f64) -> Option<Vec<f64>> {
        self.spiral.map(|p| {
            let (c, r) = p.centerline(arm, s);
            self.cell_to_physical(c, r)
        })
    }

    /// Arm index containing a raster cell, if any.
    pub fn arm_of(&self, cell: usize) -> Option<usize> {
        self.arms.iter().position(|a| a.binary_search(&cell).is_ok())
    }
}

/// Statistics of one transition-density snapshot on the raster grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotStats {
    pub time: f64,
    pub mean_high: f64,
    pub mean_background: f64,
    pub high_background_ratio: f64,
    pub source_arm_median: f64,
    pub background_max: f64,
    pub isotropy_cv: f64,
    pub checksum: String,
}

impl SnapshotStats {
    pub fn background_below_median(&self) -> bool {
        self.background_max < self.source_arm_median
    }
}

/// Coefficient of variation over 8 angular sectors of the sector means of
/// `psi` on the ring of cells whose distance from the source rounds to
/// `radius`.
pub fn isotropy_cv(scene: &SwissRollScene, psi: &[f64], radius: f64) -> Result<f64> {
    let w = scene.raster.width();
    let (sx, sy) = ((scene.source_cell % w) as f64, (scene.source_cell / w) as f64);
    let mut sum = [0.0; 8];
    let mut count = [0usize; 8];
    for (c, &v) in psi.iter().enumerate() {
        let (dx, dy) = ((c % w) as f64 - sx, (c / w) as f64 - sy);
        let d = dx.hypot(dy);
        if d >= radius - 0.5 && d < radius + 0.5 {
            let sector = (((dy.atan2(dx) + PI) / (2.0 * PI) * 8.0) as usize) % 8;
            sum[sector] += v;
            count[sector] += 1;
        }
    }
    if count.contains(&0) {
        return Err(Error::Degenerate(format!("ring of radius {radius} leaves a sector empty")));
    }
    let means: Vec<f64> = (0..8).map(|s| sum[s] / count[s] as f64).collect();
    let mu = means.iter().sum::<f64>() / 8.0;
    if !(mu > 0.0) {
        return Err(Error::Degenerate("transition density vanishes on the ring".into()));
    }
    let var = means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / 8.0;
    Ok(var.sqrt() / mu)
}

pub fn snapshot_stats(scene: &SwissRollScene, psi: &ScalarField, time: f64, radius: f64) -> Result<SnapshotStats> {
    let v = psi.values();
    if v.len() != scene.high.len() {
        return Err(Error::DimensionMismatch {
            expected: scene.high.len(),
            actual: v.len(),
        });
    }
    let (mut hs, mut hn, mut bs, mut bn, mut bmax) = (0.0, 0usize, 0.0, 0usize, 0.0f64);
    for (k, &x) in v.iter().enumerate() {
        if scene.high[k] {
            hs += x;
            hn += 1;
        } else {
            bs += x;
            bn += 1;
            bmax = bmax.max(x);
        }
    }
    let mean_high = hs / hn.max(1) as f64;
    let mean_background = bs / bn.max(1) as f64;
    let arm: Vec<f64> = scene.arms[scene.source_arm].iter().map(|&c| v[c]).collect();
    Ok(SnapshotStats {
        time,
        mean_high,
        mean_background,
        high_background_ratio: if mean_background > 0.0 { mean_high / mean_background } else { f64::INFINITY },
        source_arm_median: median(&arm),
        background_max: bmax,
        isotropy_cv: isotropy_cv(scene, v, radius)?,
        checksum: field_checksum(psi),
    })
}

/// Validated inputs of the swiss-roll experiment.
#[derive(Debug, Clone)]
pub struct SwissRollSetup {
    pub scene: SwissRollScene,
    pub params: WalkParams,
    pub solver: SolverConfig,
    pub source: Vec<f64>,
    pub times: Vec<f64>,
    pub isotropy_radius: f64,
}

/// Builds the scene named by `density.kind`.
pub fn scene_from_config(config: &ExperimentConfig) -> std::result::Result<SwissRollScene, ConfigError> {
    let cell_size = config.positive("density.cell_size")?;
    match config.density_kind() {
        Some(DensityKind::Raster) => {
            let path = config.path("density.raster")?;
            let raster = load_raster(config, &path)?;
            at_key("density.raster", SwissRollScene::from_raster(raster))
        }
        _ => {
            let p = SpiralParams::from_config(config)?;
            at_key("spiral.width", SwissRollScene::spiral(p, cell_size))
        }
    }
}

fn load_raster(config: &ExperimentConfig, path: &Path) -> std::result::Result<RasterDensity2D, ConfigError> {
    let bytes = std::fs::read(path)
        .map_err(|e| ConfigError::at("density.raster", format!("cannot read {}: {e}", path.display())))?;
    let mapping = GrayMapping::new(
        config.f64("density.gray_a")?,
        config.f64("density.rho_a")?,
        config.f64("density.gray_b")?,
        config.f64("density.rho_b")?,
    );
    at_key(
        "density.raster",
        load_density_raster(&bytes, &mapping, config.positive("density.cell_size")?),
    )
}

/// Solver configuration on a scene's raster grid.
pub fn plane_solver(
    config: &ExperimentConfig,
    scene: &SwissRollScene,
    refine: usize,
) -> std::result::Result<(WalkParams, SolverConfig), ConfigError> {
    let params = at_key(
        "walk.p0",
        WalkParams::new(config.f64("walk.p0")?, 2, config.f64("walk.delta")?),
    )?;
    let grid = at_key("density.cell_size", scene.grid(refine))?;
    let solver = at_key(
        "solver.dt",
        SolverConfig::from_density(
            &grid,
            &scene.raster,
            &params,
            config.positive("solver.dt")?,
            config.boundary("solver.boundary")?,
        ),
    )?
    .with_renormalize(config.bool("solver.renormalize")?);
    Ok((params, solver))
}

/// Checks that `t` is a positive whole number of steps.
pub(crate) fn check_time(solver: &SolverConfig, key: &str, t: f64) -> std::result::Result<(), ConfigError> {
    let steps = at_key(key, solver.steps_for(t))?;
    if steps == 0 || (steps as f64 * solver.dt() - t).abs() > 1e-9 * t {
        return Err(ConfigError::at(
            key,
            format!("time {t} is not a positive whole number of steps of {}", solver.dt()),
        ));
    }
    Ok(())
}

impl SwissRollSetup {
    pub fn from_config(config: &ExperimentConfig) -> std::result::Result<Self, ConfigError> {
        let scene = scene_from_config(config)?;
        let (params, solver) = plane_solver(config, &scene, 1)?;
        let source = match config.raw("schedule.impulse")? {
            "auto" => scene.source_position(),
            _ => {
                let pts = config.points("schedule.impulse")?;
                match pts.as_slice() {
                    [p] if p.len() == 2 => p.clone(),
                    _ => return Err(ConfigError::at("schedule.impulse", "expected `auto` or one point `x, y`")),
                }
            }
        };
        at_key("schedule.impulse", solver.grid().nearest_node(&source))?;
        let times = config.f64_list("schedule.times")?;
        if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ConfigError::at("schedule.times", "need one or more ascending times"));
        }
        for &t in &times {
            check_time(&solver, "schedule.times", t)?;
        }
        let isotropy_radius = config.positive("report.isotropy_radius")?;
        Ok(Self {
            scene,
            params,
            solver,
            source,
            times,
            isotropy_radius,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SwissRollReport {
    pub width: usize,
    pub height: usize,
    pub source: Vec<f64>,
    pub snapshots: Vec<SnapshotStats>,
    pub outcome: Outcome,
}

pub fn run_swissroll(config: &ExperimentConfig) -> std::result::Result<SwissRollReport, RunError> {
    let setup = SwissRollSetup::from_config(config)?;
    let mut out = OutputDir::create(config)?;
    let grid = setup.solver.grid().clone();
    let node = grid.nearest_node(&setup.source)?;
    let rho = setup.scene.raster.values().to_vec();
    let sols = solve_snapshots(&impulse_field(&grid, node)?, &setup.solver, &setup.times)?;
    let mut snapshots = Vec::new();
    for (sol, &t) in sols.iter().zip(&setup.times) {
        let psi = true_density_sampled(&sol.field, &rho)?;
        let stem = format!("swissroll_t{t}");
        write_field_2d(out.path(), &stem, &psi)?;
        for ext in ["pgm", "scale.txt", "csv"] {
            out.record(&format!("{stem}.{ext}"));
        }
        snapshots.push(snapshot_stats(&setup.scene, &psi, sol.time, setup.isotropy_radius)?);
    }

    let first = &snapshots[0];
    let last = &snapshots[snapshots.len() - 1];
    let checks = vec![
        Check::new(
            format!("isotropy_cv_t{}", first.time),
            first.isotropy_cv,
            Relation::AtMost,
            0.3,
        ),
        Check::new(
            format!("high_background_ratio_t{}", last.time),
            last.high_background_ratio,
            Relation::AtLeast,
            10.0,
        ),
        Check::new(
            format!("background_max_over_source_arm_median_t{}", last.time),
            last.background_max / last.source_arm_median,
            Relation::Below,
            1.0,
        ),
    ];
    let mut entries = vec![
        entry("width", grid.width()),
        entry("height", grid.height()),
        entry("cell_size", grid.spacing()),
        entry("arms", setup.scene.arms.len()),
        entry("source_x", setup.source[0]),
        entry("source_y", setup.source[1]),
        entry("stability_factor", setup.solver.stability_factor()),
    ];
    for s in &snapshots {
        let t = s.time;
        entries.push(entry(&format!("t{t}.mean_high"), s.mean_high));
        entries.push(entry(&format!("t{t}.mean_background"), s.mean_background));
        entries.push(entry(&format!("t{t}.high_background_ratio"), s.high_background_ratio));
        entries.push(entry(&format!("t{t}.source_arm_median"), s.source_arm_median));
        entries.push(entry(&format!("t{t}.background_max"), s.background_max));
        entries.push(entry(&format!("t{t}.background_below_median"), s.background_below_median()));
        entries.push(entry(&format!("t{t}.isotropy_cv"), s.isotropy_cv));
        entries.push(entry(&format!("t{t}.psi_sha256"), &s.checksum));
    }
    out.report("swissroll_report.txt", &entries, &checks)?;
    Ok(SwissRollReport {
        width: grid.width(),
        height: grid.height(),
        source: setup.source,
        snapshots,
        outcome: out.finish(checks),
    })
}
