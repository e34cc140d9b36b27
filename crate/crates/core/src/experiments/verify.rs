//! Three cross-checks between path sums and diffusion: exact path
//! enumeration against matrix powers, sampled Gaussian paths against the
//! heat kernel, and the finite-difference solver against the heat kernel.

use std::io::Write;

use super::config::ExperimentConfig;
use super::{at_key, entry, Check, ConfigError, Outcome, OutputDir, Relation, RunError};
use crate::error::Result;
use crate::path::{enumerate_propagator, mc_propagator, McParams, McResult, ENUMERATION_LIMIT};
use crate::solver::{analytic_gaussian, impulse_field, solve, Boundary, Grid, SolverConfig};
use crate::walk::{chain_transition_matrix, conditional_probability};

pub const ENUMERATION_TOLERANCE: f64 = 1e-12;
pub const Z_LIMIT: f64 = 3.0;
pub const HISTOGRAM_L1_LIMIT: f64 = 0.03;
pub const PDE_L1_LIMIT: f64 = 1e-3;

/// Largest `|enumerated - matrix power|` over every chain size, stay
/// probability, step count up to `max_steps` and pair of states.
pub fn enumeration_discrepancy(sizes: &[usize], p0s: &[f64], max_steps: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &m in sizes {
        for &p0 in p0s {
            let p = chain_transition_matrix(m, p0)?;
            for t in 1..=max_steps {
                for i in 0..m {
                    for j in 0..m {
                        let a = enumerate_propagator(&p, i, j, t)?;
                        let b = conditional_probability(&p, i, j, t)?;
                        worst = worst.max((a - b).abs());
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// L1 distance between a sampled endpoint histogram and the heat kernel
/// with `D = 1 / (4 beta)`, integrating the kernel over each bin by
/// Simpson's rule. Samples outside the histogram count against the kernel
/// mass outside it.
pub fn histogram_l1(result: &McResult) -> Result<f64> {
    let h = &result.histogram;
    let d = 1.0 / (4.0 * result.params.beta);
    let t = result.params.horizon;
    let n = h.total() as f64;
    let mut l1 = 0.0;
    let mut inside = 0.0;
    for k in 0..h.counts.len() {
        let (a, b) = h.bin_edges(k);
        let m = 0.5 * (a + b);
        let exact = (b - a) / 6.0
            * (analytic_gaussian(&[a], t, d)? + 4.0 * analytic_gaussian(&[m], t, d)? + analytic_gaussian(&[b], t, d)?);
        inside += exact;
        l1 += (h.counts[k] as f64 / n - exact).abs();
    }
    l1 += ((h.below + h.above) as f64 / n - (1.0 - inside)).abs();
    Ok(l1)
}

/// Normalized L1 error of a constant-coefficient solve from an impulse at
/// the domain center: `sum |phi_k - g(x_k) dx| / sum g(x_k) dx`.
pub fn pde_l1(diffusion: f64, dx: f64, dt: f64, t: f64, half_width: f64) -> Result<f64> {
    let grid = Grid::interval(-half_width, half_width, dx)?;
    let cfg = SolverConfig::uniform(&grid, dt, Boundary::Reflecting, diffusion)?;
    let center = grid.nearest_node(&[0.0])?;
    let sol = solve(&impulse_field(&grid, center)?, &cfg, t)?;
    let x0 = grid.coordinate(center)[0];
    let (mut err, mut norm) = (0.0, 0.0);
    for (k, phi) in sol.field.values().iter().enumerate() {
        let g = analytic_gaussian(&[grid.coordinate(k)[0] - x0], sol.time, diffusion)? * dx;
        err += (phi - g).abs();
        norm += g;
    }
    Ok(err / norm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub beta: f64,
    pub horizon: f64,
    pub seed: u64,
    pub variance: f64,
    pub expected_variance: f64,
    pub variance_z: f64,
    pub mean_z: f64,
    pub histogram_l1: f64,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub enumeration_max_discrepancy: f64,
    pub mc: Vec<McSummary>,
    pub pde_l1: f64,
    pub outcome: Outcome,
}

impl VerifyReport {
    pub fn max_abs_variance_z(&self) -> f64 {
        self.mc.iter().map(|m| m.variance_z.abs()).fold(0.0, f64::max)
    }

    pub fn max_histogram_l1(&self) -> f64 {
        self.mc.iter().map(|m| m.histogram_l1).fold(0.0, f64::max)
    }
}

struct VerifySetup {
    sizes: Vec<usize>,
    p0s: Vec<f64>,
    max_steps: usize,
    mc: Vec<McParams>,
    pde: (f64, f64, f64, f64, f64),
}

impl VerifySetup {
    fn from_config(config: &ExperimentConfig) -> std::result::Result<Self, ConfigError> {
        let sizes = config.usize_list("verify.chain_sizes")?;
        let p0s = config.f64_list("verify.p0")?;
        let max_steps = config.usize("verify.max_steps")?;
        for &m in &sizes {
            at_key("verify.chain_sizes", chain_transition_matrix(m, 0.0))?;
            if (m as f64).powi(max_steps as i32) > ENUMERATION_LIMIT {
                return Err(ConfigError::at(
                    "verify.max_steps",
                    format!("{m}^{max_steps} paths exceed the enumeration limit {ENUMERATION_LIMIT}"),
                ));
            }
        }
        for &p0 in &p0s {
            at_key("verify.p0", chain_transition_matrix(2, p0))?;
        }
        let steps = config.usize("verify.mc_steps")?;
        let samples = config.usize("verify.mc_samples")?;
        let runs = config.usize("verify.mc_runs")?;
        let bins = config.usize("verify.mc_bins")?;
        if steps == 0 {
            return Err(ConfigError::at("verify.mc_steps", "must be at least 1"));
        }
        if samples < 1000 {
            return Err(ConfigError::at("verify.mc_samples", "must be at least 1000"));
        }
        if bins == 0 {
            return Err(ConfigError::at("verify.mc_bins", "must be at least 1"));
        }
        let mut mc = Vec::new();
        for beta in config.f64_list("verify.mc_betas")? {
            if !(beta > 0.0) {
                return Err(ConfigError::at("verify.mc_betas", format!("{beta} must be positive")));
            }
            for horizon in config.f64_list("verify.mc_horizons")? {
                if !(horizon > 0.0) {
                    return Err(ConfigError::at("verify.mc_horizons", format!("{horizon} must be positive")));
                }
                for r in 0..runs as u64 {
                    let mut p = McParams::new(beta, horizon, steps, samples, config.seed().wrapping_add(r));
                    p.bins = bins;
                    mc.push(p);
                }
            }
        }
        let d = config.positive("verify.pde_diffusion")?;
        let dx = config.positive("verify.pde_dx")?;
        let dt = config.positive("verify.pde_dt")?;
        let t = config.positive("verify.pde_time")?;
        let hw = config.positive("verify.pde_half_width")?;
        let grid = at_key("verify.pde_dx", Grid::interval(-hw, hw, dx))?;
        let cfg = at_key("verify.pde_dt", SolverConfig::uniform(&grid, dt, Boundary::Reflecting, d))?;
        super::swissroll::check_time(&cfg, "verify.pde_time", t)?;
        Ok(Self {
            sizes,
            p0s,
            max_steps,
            mc,
            pde: (d, dx, dt, t, hw),
        })
    }
}

pub fn run_verify_paths(config: &ExperimentConfig) -> std::result::Result<VerifyReport, RunError> {
    let setup = VerifySetup::from_config(config)?;
    let mut out = OutputDir::create(config)?;

    let enumeration = enumeration_discrepancy(&setup.sizes, &setup.p0s, setup.max_steps)?;
    let mut mc = Vec::new();
    for p in &setup.mc {
        let r = mc_propagator(p)?;
        let stem = format!("verify_mc_beta{}_T{}_seed{}", p.beta, p.horizon, p.seed);
        out.write(&format!("{stem}.csv"), |w| r.histogram.write_csv(w))?;
        mc.push(McSummary {
            beta: p.beta,
            horizon: p.horizon,
            seed: p.seed,
            variance: r.variance,
            expected_variance: p.endpoint_variance(),
            variance_z: r.variance_z(),
            mean_z: r.mean_z(),
            histogram_l1: histogram_l1(&r)?,
        });
    }
    let (d, dx, dt, t, hw) = setup.pde;
    let pde = pde_l1(d, dx, dt, t, hw)?;

    let max_z = mc.iter().map(|m| m.variance_z.abs()).fold(0.0, f64::max);
    let max_l1 = mc.iter().map(|m| m.histogram_l1).fold(0.0, f64::max);
    let checks = vec![
        Check::new("enumeration_max_discrepancy", enumeration, Relation::AtMost, ENUMERATION_TOLERANCE),
        Check::new("mc_max_abs_variance_z", max_z, Relation::AtMost, Z_LIMIT),
        Check::new("mc_max_histogram_l1", max_l1, Relation::AtMost, HISTOGRAM_L1_LIMIT),
        Check::new("pde_normalized_l1", pde, Relation::AtMost, PDE_L1_LIMIT),
    ];
    let mut entries = vec![entry("enumeration_max_discrepancy", enumeration)];
    for m in &mc {
        let key = format!("mc.beta{}.T{}.seed{}", m.beta, m.horizon, m.seed);
        entries.push(entry(&format!("{key}.variance"), m.variance));
        entries.push(entry(&format!("{key}.expected_variance"), m.expected_variance));
        entries.push(entry(&format!("{key}.variance_z"), m.variance_z));
        entries.push(entry(&format!("{key}.mean_z"), m.mean_z));
        entries.push(entry(&format!("{key}.histogram_l1"), m.histogram_l1));
    }
    entries.push(entry("pde_normalized_l1", pde));
    out.report("verify_report.txt", &entries, &checks)?;
    out.write("verify_summary.csv", |w| {
        writeln!(w, "beta,horizon,seed,variance,expected_variance,variance_z,mean_z,histogram_l1")?;
        for m in &mc {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                m.beta, m.horizon, m.seed, m.variance, m.expected_variance, m.variance_z, m.mean_z, m.histogram_l1
            )?;
        }
        Ok(())
    })?;
    Ok(VerifyReport {
        enumeration_max_discrepancy: enumeration,
        mc,
        pde_l1: pde,
        outcome: out.finish(checks),
    })
}
