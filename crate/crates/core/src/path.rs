//! Path-level view of diffusion.
//!
//! A path's action is `S = integral of beta |dx/dt|^2 dt` and its weight is
//! `exp(-S)`. Summing weights over all paths between two points gives a
//! propagator that obeys the diffusion equation with `D = 1/(4 beta)`. This
//! module evaluates actions on discretized paths, enumerates discrete path
//! sums exactly on small chains, and samples the Gaussian path measure.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::walk::TransitionMatrix;

/// Positions sampled at strictly ascending times.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    times: Vec<f64>,
    positions: Vec<Vec<f64>>,
}

impl DiscretePath {
    pub fn new(times: Vec<f64>, positions: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != positions.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                actual: positions.len(),
            });
        }
        if times.len() < 2 {
            return Err(invalid("path", "needs at least one segment"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("path", "times must be strictly ascending"));
        }
        let dim = positions[0].len();
        if dim == 0 {
            return Err(invalid("path", "positions have no coordinates"));
        }
        if let Some(p) = positions.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.len(),
            });
        }
        Ok(Self { times, positions })
    }

    /// Samples `f` at `n + 1` uniformly spaced times on `[t0, t1]`.
    pub fn sample<F: Fn(f64) -> Vec<f64>>(f: F, t0: f64, t1: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("path", "needs at least one segment"));
        }
        let times: Vec<f64> = (0..=n)
            .map(|k| t0 + (t1 - t0) * k as f64 / n as f64)
            .collect();
        let positions = times.iter().map(|&t| f(t)).collect();
        Self::new(times, positions)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    pub fn dim(&self) -> usize {
        self.positions[0].len()
    }

    fn segments(&self) -> impl Iterator<Item = (f64, Vec<f64>, Vec<f64>)> + '_ {
        (0..self.times.len() - 1).map(move |k| {
            let (a, b) = (&self.positions[k], &self.positions[k + 1]);
            let mid = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
            let disp = a.iter().zip(b).map(|(x, y)| y - x).collect();
            (self.times[k + 1] - self.times[k], mid, disp)
        })
    }
}

/// Path penalty coefficient, constant or varying in space.
pub enum BetaField {
    Constant(f64),
    Spatial(Box<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl BetaField {
    pub fn at(&self, x: &[f64]) -> Result<f64> {
        let b = match self {
            BetaField::Constant(b) => *b,
            BetaField::Spatial(f) => f(x),
        };
        if b.is_finite() && b >= 0.0 {
            Ok(b)
        } else {
            Err(Error::Domain(format!("beta({x:?}) = {b} must be non-negative")))
        }
    }
}

impl std::fmt::Debug for BetaField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BetaField::Constant(b) => write!(f, "BetaField::Constant({b})"),
            BetaField::Spatial(_) => write!(f, "BetaField::Spatial(..)"),
        }
    }
}

type AxisCoefficient = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Metric tensor with zero off-diagonal terms.
pub struct DiagonalMetric {
    axes: Vec<AxisCoefficient>,
}

impl DiagonalMetric {
    pub fn new(axes: Vec<AxisCoefficient>) -> Result<Self> {
        if axes.is_empty() {
            return Err(invalid("metric", "no axes"));
        }
        Ok(Self { axes })
    }

    /// The same constant on every axis.
    pub fn isotropic(dim: usize, g: f64) -> Result<Self> {
        Self::new((0..dim).map(|_| Box::new(move |_: &[f64]| g) as AxisCoefficient).collect())
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    fn coefficient(&self, axis: usize, x: &[f64]) -> Result<f64> {
        let g = (self.axes[axis])(x);
        if g.is_finite() && g > 0.0 {
            Ok(g)
        } else {
            Err(Error::Domain(format!(
                "metric coefficient g_{axis}{axis}({x:?}) = {g} must be positive"
            )))
        }
    }
}

/// `sum_k beta(midpoint_k) |dx_k|^2 / dt_k`.
pub fn path_action_euclidean(path: &DiscretePath, beta: &BetaField) -> Result<f64> {
    let mut s = 0.0;
    for (dt, mid, disp) in path.segments() {
        let d2: f64 = disp.iter().map(|v| v * v).sum();
        s += beta.at(&mid)? * d2 / dt;
    }
    Ok(s)
}

/// `sum_k sum_i g_ii(midpoint_k) dx_{k,i}^2 / dt_k`.
pub fn path_action_metric(path: &DiscretePath, metric: &DiagonalMetric) -> Result<f64> {
    if path.dim() != metric.dim() {
        return Err(Error::DimensionMismatch {
            expected: metric.dim(),
            actual: path.dim(),
        });
    }
    let mut s = 0.0;
    for (dt, mid, disp) in path.segments() {
        for (axis, v) in disp.iter().enumerate() {
            s += metric.coefficient(axis, &mid)? * v * v / dt;
        }
    }
    Ok(s)
}

/// `exp(-S)` for the Euclidean action.
pub fn path_probability_unnormalized(path: &DiscretePath, beta: &BetaField) -> Result<f64> {
    Ok((-path_action_euclidean(path, beta)?).exp())
}

/// Largest number of state sequences [`enumerate_propagator`] will visit.
pub const ENUMERATION_LIMIT: f64 = 1e7;

/// Sum over every length-`t` state sequence from `i` to `j` of the product of
/// its transition probabilities.
pub fn enumerate_propagator(p: &TransitionMatrix, i: usize, j: usize, t: usize) -> Result<f64> {
    let m = p.size();
    for idx in [i, j] {
        if idx >= m {
            return Err(Error::IndexOutOfRange { index: idx, len: m });
        }
    }
    let paths = (m as f64).powi(t as i32);
    if paths > ENUMERATION_LIMIT {
        return Err(Error::EnumerationBound {
            paths,
            limit: ENUMERATION_LIMIT,
        });
    }
    if t == 0 {
        return Ok(if i == j { 1.0 } else { 0.0 });
    }
    fn walk(p: &TransitionMatrix, at: usize, target: usize, left: usize, weight: f64) -> f64 {
        if left == 1 {
            return weight * p.get(target, at);
        }
        (0..p.size())
            .map(|next| walk(p, next, target, left - 1, weight * p.get(next, at)))
            .sum()
    }
    Ok(walk(p, i, j, t, 1.0))
}

/// Fixed-width histogram over `[lo, hi)`; samples outside are tallied separately.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub below: u64,
    pub above: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(invalid("histogram", format!("[{lo}, {hi}) with {bins} bins")));
        }
        Ok(Self {
            lo,
            hi,
            counts: vec![0; bins],
            below: 0,
            above: 0,
        })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn bin_edges(&self, k: usize) -> (f64, f64) {
        let w = self.width();
        (self.lo + k as f64 * w, self.lo + (k + 1) as f64 * w)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.below + self.above
    }

    pub fn add(&mut self, x: f64) {
        if x < self.lo {
            self.below += 1;
        } else if x >= self.hi {
            self.above += 1;
        } else {
            let k = ((x - self.lo) / self.width()) as usize;
            let last = self.counts.len() - 1;
            self.counts[k.min(last)] += 1;
        }
    }

    /// Adds another histogram's counts; bins must match.
    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if other.lo != self.lo || other.hi != self.hi || other.counts.len() != self.counts.len() {
            return Err(invalid("histogram", "cannot merge histograms with different bins"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.below += other.below;
        self.above += other.above;
        Ok(())
    }

    /// Count divided by (total samples x bin width).
    pub fn normalized_density(&self, k: usize) -> f64 {
        self.counts[k] as f64 / (self.total() as f64 * self.width())
    }

    /// CSV with header `bin_left,bin_right,count,normalized_density`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "bin_left,bin_right,count,normalized_density")?;
        for k in 0..self.counts.len() {
            let (l, r) = self.bin_edges(k);
            writeln!(out, "{l},{r},{},{}", self.counts[k], self.normalized_density(k))?;
        }
        Ok(())
    }
}

/// Settings for [`mc_propagator`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McParams {
    pub beta: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub bins: usize,
    /// Histogram half-range in units of the exact endpoint standard deviation.
    pub range_sigmas: f64,
}

impl McParams {
    pub fn new(beta: f64, horizon: f64, n_steps: usize, n_samples: usize, seed: u64) -> Self {
        Self {
            beta,
            horizon,
            n_steps,
            n_samples,
            seed,
            bins: 50,
            range_sigmas: 4.0,
        }
    }

    /// Endpoint variance implied by the action: `T / (2 beta)`.
    pub fn endpoint_variance(&self) -> f64 {
        self.horizon / (2.0 * self.beta)
    }
}

/// Endpoint statistics of sampled paths started at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    pub params: McParams,
    pub mean: f64,
    pub variance: f64,
    pub histogram: Histogram,
}

impl McResult {
    /// Standard error of the sample variance for a Gaussian law.
    pub fn variance_standard_error(&self) -> f64 {
        self.params.endpoint_variance() * (2.0 / (self.params.n_samples as f64 - 1.0)).sqrt()
    }

    pub fn variance_z(&self) -> f64 {
        (self.variance - self.params.endpoint_variance()) / self.variance_standard_error()
    }

    pub fn mean_z(&self) -> f64 {
        self.mean / (self.params.endpoint_variance() / self.params.n_samples as f64).sqrt()
    }
}

/// Samples 1D paths under the measure `exp(-beta sum dx_k^2 / dt)`: `n_steps`
/// independent increments, each normal with variance `dt / (2 beta)`.
///
/// Sample `k` draws from its own ChaCha stream `(seed, k)`, so results do
/// not depend on evaluation order.
pub fn mc_propagator(params: &McParams) -> Result<McResult> {
    let McParams {
        beta,
        horizon,
        n_steps,
        n_samples,
        seed,
        bins,
        range_sigmas,
    } = *params;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta = {beta} must be positive")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Domain(format!("horizon {horizon} must be positive")));
    }
    if n_steps == 0 {
        return Err(Error::Domain("need at least one time step".into()));
    }
    if n_samples < 1000 {
        return Err(Error::Domain(format!("{n_samples} samples is below the minimum of 1000")));
    }
    if !(range_sigmas > 0.0) {
        return Err(Error::Domain(format!("histogram range {range_sigmas} must be positive")));
    }
    let dt = horizon / n_steps as f64;
    let step = Normal::new(0.0, (dt / (2.0 * beta)).sqrt())
        .map_err(|e| Error::Domain(e.to_string()))?;
    let half = range_sigmas * params.endpoint_variance().sqrt();
    let mut histogram = Histogram::new(-half, half, bins)?;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for k in 0..n_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let x: f64 = (0..n_steps).map(|_| step.sample(&mut rng)).sum();
        histogram.add(x);
        sum += x;
        sum_sq += x * x;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let variance = (sum_sq - n * mean * mean) / (n - 1.0);
    Ok(McResult {
        params: *params,
        mean,
        variance,
        histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::{chain_transition_matrix, conditional_probability};
    use proptest::prelude::*;
    use rand::Rng;

    fn beta(b: f64) -> BetaField {
        BetaField::Constant(b)
    }

    #[test]
    fn action_examples() {
        let still = DiscretePath::sample(|_| vec![2.0], 0.0, 1.0, 5).unwrap();
        assert_eq!(path_action_euclidean(&still, &beta(3.0)).unwrap(), 0.0);
        assert_eq!(path_probability_unnormalized(&still, &beta(3.0)).unwrap(), 1.0);

        for n in [1, 3, 10, 64] {
            let line = DiscretePath::sample(|t| vec![3.0 * t], 0.0, 1.0, n).unwrap();
            let s = path_action_euclidean(&line, &beta(2.0)).unwrap();
            assert!((s - 18.0).abs() < 1e-12, "n = {n}: {s}");
            let w = path_probability_unnormalized(&line, &beta(2.0)).unwrap();
            assert!((w - (-18.0f64).exp()).abs() < 1e-20);
        }

        let two = DiscretePath::new(vec![0.0, 1.0, 2.0], vec![vec![0.0], vec![1.0], vec![1.0]])
            .unwrap();
        assert_eq!(path_action_euclidean(&two, &beta(1.0)).unwrap(), 1.0);
    }

    #[test]
    fn spatial_beta_uses_segment_midpoints() {
        let path = DiscretePath::new(vec![0.0, 1.0], vec![vec![0.0], vec![2.0]]).unwrap();
        let b = BetaField::Spatial(Box::new(|x| x[0]));
        // midpoint 1.0, |dx|^2 = 4
        assert_eq!(path_action_euclidean(&path, &b).unwrap(), 4.0);
        let bad = BetaField::Spatial(Box::new(|_| -1.0));
        assert!(path_action_euclidean(&path, &bad).is_err());
    }

    #[test]
    fn metric_action_examples() {
        let path = DiscretePath::sample(|t| vec![t, t], 0.0, 1.0, 7).unwrap();
        let g = DiagonalMetric::new(vec![Box::new(|_| 4.0), Box::new(|_| 1.0)]).unwrap();
        assert!((path_action_metric(&path, &g).unwrap() - 5.0).abs() < 1e-12);
        let still = DiscretePath::sample(|_| vec![1.0, 2.0], 0.0, 1.0, 3).unwrap();
        assert_eq!(path_action_metric(&still, &g).unwrap(), 0.0);
        let one_d = DiscretePath::sample(|t| vec![t], 0.0, 1.0, 3).unwrap();
        assert!(path_action_metric(&one_d, &g).is_err());
        let zero = DiagonalMetric::isotropic(1, 0.0).unwrap();
        assert!(path_action_metric(&one_d, &zero).is_err());
    }

    #[test]
    fn path_validation() {
        assert!(DiscretePath::new(vec![0.0], vec![vec![0.0]]).is_err());
        assert!(DiscretePath::new(vec![0.0, 0.0], vec![vec![0.0], vec![1.0]]).is_err());
        assert!(DiscretePath::new(vec![0.0, 1.0], vec![vec![0.0]]).is_err());
        assert!(DiscretePath::new(vec![0.0, 1.0], vec![vec![0.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn refinement_of_quadratic_path_converges_at_second_order() {
        let exact = 4.0 / 3.0; // x = t^2, beta = 1: integral of 4 t^2
        let ns = [8usize, 16, 32, 64, 128];
        let errs: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let p = DiscretePath::sample(|t| vec![t * t], 0.0, 1.0, n).unwrap();
                (path_action_euclidean(&p, &beta(1.0)).unwrap() - exact).abs()
            })
            .collect();
        // least-squares slope of log(err) against log(1/N)
        let xs: Vec<f64> = ns.iter().map(|&n| (1.0 / n as f64).ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!(slope >= 1.9, "slope {slope}");
    }

    #[test]
    fn enumeration_examples() {
        let p = chain_transition_matrix(3, 0.2).unwrap();
        assert_eq!(enumerate_propagator(&p, 1, 1, 0).unwrap(), 1.0);
        assert_eq!(enumerate_propagator(&p, 1, 0, 0).unwrap(), 0.0);
        let v = enumerate_propagator(&p, 1, 0, 2).unwrap();
        assert!((v - (0.4 * 0.6 + 0.2 * 0.4)).abs() < 1e-15);
        assert!((v - 0.32).abs() < 1e-15);
        for t in 0..5 {
            let total: f64 = (0..3).map(|j| enumerate_propagator(&p, 2, j, t).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-14);
        }
        let big = chain_transition_matrix(20, 0.2).unwrap();
        assert!(matches!(
            enumerate_propagator(&big, 0, 0, 6),
            Err(Error::EnumerationBound { .. })
        ));
        assert!(enumerate_propagator(&p, 3, 0, 1).is_err());
    }

    #[test]
    fn enumeration_matches_matrix_powers_on_small_chains() {
        for m in 2..=6 {
            for p0 in [0.0, 0.2, 0.5] {
                let p = chain_transition_matrix(m, p0).unwrap();
                for t in 0..=6 {
                    for i in 0..m {
                        for j in 0..m {
                            let a = enumerate_propagator(&p, i, j, t).unwrap();
                            let b = conditional_probability(&p, i, j, t).unwrap();
                            assert!((a - b).abs() <= 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn straight_line_minimizes_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 12;
        let straight = DiscretePath::sample(|t| vec![2.0 * t, -t], 0.0, 1.0, n).unwrap();
        let s0 = path_action_euclidean(&straight, &beta(1.5)).unwrap();
        for _ in 0..200 {
            let mut pos = straight.positions().to_vec();
            for p in pos.iter_mut().take(n).skip(1) {
                for c in p.iter_mut() {
                    *c += rng.gen_range(-0.3..0.3);
                }
            }
            let bent = DiscretePath::new(straight.times().to_vec(), pos).unwrap();
            assert!(path_action_euclidean(&bent, &beta(1.5)).unwrap() >= s0);
        }
    }

    #[test]
    fn mc_single_step_and_step_independence() {
        let one = mc_propagator(&McParams::new(0.5, 1.0, 1, 20_000, 3)).unwrap();
        assert!(one.variance_z().abs() < 4.0);
        let many = mc_propagator(&McParams::new(0.5, 1.0, 40, 20_000, 3)).unwrap();
        assert!(many.variance_z().abs() < 4.0);
        assert!((one.variance - many.variance).abs() < 0.06);
    }

    #[test]
    fn mc_is_reproducible_and_validates() {
        let p = McParams::new(1.0, 0.5, 10, 2000, 11);
        assert_eq!(mc_propagator(&p).unwrap(), mc_propagator(&p).unwrap());
        let other = McParams { seed: 12, ..p };
        assert_ne!(mc_propagator(&p).unwrap().mean, mc_propagator(&other).unwrap().mean);
        assert!(mc_propagator(&McParams::new(0.0, 1.0, 1, 2000, 1)).is_err());
        assert!(mc_propagator(&McParams::new(1.0, 1.0, 0, 2000, 1)).is_err());
        assert!(mc_propagator(&McParams::new(1.0, 1.0, 1, 999, 1)).is_err());
    }

    #[test]
    fn histogram_bookkeeping() {
        let mut h = Histogram::new(0.0, 1.0, 4).unwrap();
        for x in [-0.1, 0.0, 0.3, 0.99, 1.0] {
            h.add(x);
        }
        assert_eq!(h.counts, vec![1, 1, 0, 1]);
        assert_eq!((h.below, h.above), (1, 1));
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("bin_left,bin_right,count,normalized_density\n0,0.25,1,0.8\n"));
        let other = h.clone();
        h.merge(&other).unwrap();
        assert_eq!(h.total(), 10);
        assert!(h.merge(&Histogram::new(0.0, 2.0, 4).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn linear_path_action_is_discretization_free(
            v in -5.0f64..5.0, b in 0.0f64..4.0, t in 0.1f64..3.0, n in 1usize..50,
        ) {
            let p = DiscretePath::sample(|s| vec![v * s], 0.0, t, n).unwrap();
            let s = path_action_euclidean(&p, &beta(b)).unwrap();
            prop_assert!((s - b * v * v * t).abs() <= 1e-9 * (1.0 + b * v * v * t));
        }

        #[test]
        fn isotropic_metric_matches_euclidean(
            pts in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 2..10),
            b in 0.01f64..5.0,
        ) {
            let n = pts.len();
            let times: Vec<f64> = (0..n).map(|k| k as f64 * 0.5).collect();
            let pos: Vec<Vec<f64>> = pts.iter().map(|&(x, y)| vec![x, y]).collect();
            let path = DiscretePath::new(times, pos).unwrap();
            let e = path_action_euclidean(&path, &beta(b)).unwrap();
            let m = path_action_metric(&path, &DiagonalMetric::isotropic(2, b).unwrap()).unwrap();
            prop_assert!((e - m).abs() <= 1e-12 * (1.0 + e));
        }

        #[test]
        fn lower_action_means_higher_weight(a in 0.0f64..3.0, extra in 0.01f64..3.0) {
            let smooth = DiscretePath::new(vec![0.0, 1.0], vec![vec![0.0], vec![a]]).unwrap();
            let rough = DiscretePath::new(vec![0.0, 1.0], vec![vec![0.0], vec![a + extra]]).unwrap();
            let ws = path_probability_unnormalized(&smooth, &beta(1.0)).unwrap();
            let wr = path_probability_unnormalized(&rough, &beta(1.0)).unwrap();
            prop_assert!(ws > wr && ws <= 1.0 && wr > 0.0);
        }
    }
}
