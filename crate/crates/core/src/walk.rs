//! Discrete Markov random walks on finite point sets.
//!
//! Matrices are column-stochastic: entry `(j, i)` is the probability of moving
//! from point `i` to point `j`, so a distribution propagates as `Q' = P Q`.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};

const STOCHASTIC_TOL: f64 = 1e-12;

/// Ordered, duplicate-free points in R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<Vec<f64>>,
}

impl PointSet {
    pub fn new(coords: Vec<Vec<f64>>) -> Result<Self> {
        let dim = coords
            .first()
            .map(Vec::len)
            .ok_or_else(|| invalid("point set", "no points"))?;
        if dim == 0 {
            return Err(invalid("point set", "points have no coordinates"));
        }
        for (k, p) in coords.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: p.len(),
                });
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(invalid("point set", format!("point {k} is not finite")));
            }
        }
        let mut order: Vec<usize> = (0..coords.len()).collect();
        order.sort_by(|&a, &b| {
            coords[a]
                .iter()
                .zip(&coords[b])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if let Some(w) = order.windows(2).find(|w| coords[w[0]] == coords[w[1]]) {
            return Err(invalid(
                "point set",
                format!("points {} and {} coincide", w[0].min(w[1]), w[0].max(w[1])),
            ));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_1d(xs: &[f64]) -> Result<Self> {
        Self::new(xs.iter().map(|&x| vec![x]).collect())
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.iter().map(Vec::as_slice)
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.coords[i]
    }

    pub fn translated(&self, offset: &[f64]) -> Result<Self> {
        if offset.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: offset.len(),
            });
        }
        Self::new(
            self.coords
                .iter()
                .map(|p| p.iter().zip(offset).map(|(a, b)| a + b).collect())
                .collect(),
        )
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Column-stochastic transition matrix stored densely, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    size: usize,
    entries: Vec<f64>,
}

impl TransitionMatrix {
    /// Builds a matrix from row-major entries `entries[j * size + i] = P(i -> j)`.
    pub fn from_row_major(size: usize, entries: Vec<f64>) -> Result<Self> {
        if size == 0 {
            return Err(invalid("transition matrix", "empty"));
        }
        if entries.len() != size * size {
            return Err(Error::DimensionMismatch {
                expected: size * size,
                actual: entries.len(),
            });
        }
        if let Some(v) = entries.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(
                "transition matrix",
                format!("entry {v} outside [0, 1]"),
            ));
        }
        let m = Self { size, entries };
        for i in 0..size {
            let s: f64 = (0..size).map(|j| m.get(j, i)).sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(invalid(
                    "transition matrix",
                    format!("column {i} sums to {s}"),
                ));
            }
        }
        Ok(m)
    }

    pub fn identity(size: usize) -> Self {
        let mut entries = vec![0.0; size * size];
        for i in 0..size {
            entries[i * size + i] = 1.0;
        }
        Self { size, entries }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Probability of moving from `from` to `to` in one step.
    pub fn get(&self, to: usize, from: usize) -> f64 {
        self.entries[to * self.size + from]
    }

    pub fn column(&self, from: usize) -> Vec<f64> {
        (0..self.size).map(|j| self.get(j, from)).collect()
    }

    fn apply(&self, q: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.entries[j * self.size..(j + 1) * self.size];
            *o = row.iter().zip(q).map(|(p, x)| p * x).sum();
        }
    }
}

/// Probability vector over the points of a walk.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDistribution(Vec<f64>);

impl StateDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid("state distribution", "empty"));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(invalid(
                "state distribution",
                format!("probability {p} is negative or not finite"),
            ));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(invalid("state distribution", format!("sums to {s}")));
        }
        Ok(Self(probs))
    }

    pub fn delta(size: usize, at: usize) -> Result<Self> {
        if at >= size {
            return Err(Error::IndexOutOfRange { index: at, len: size });
        }
        let mut v = vec![0.0; size];
        v[at] = 1.0;
        Ok(Self(v))
    }

    pub fn uniform(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(invalid("state distribution", "empty"));
        }
        Ok(Self(vec![1.0 / size as f64; size]))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Restricts which transitions [`gaussian_transition_matrix`] keeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NeighborCutoff {
    /// Keep the `k` nearest other points (ties broken toward lower index).
    Count(usize),
    /// Keep points within this Euclidean distance.
    Radius(f64),
}

/// Transition weights `exp(-beta d_ij^2)` normalized per source column. The
/// self term (`d_ii = 0`) is always kept.
pub fn gaussian_transition_matrix(
    points: &PointSet,
    beta: f64,
    cutoff: Option<NeighborCutoff>,
) -> Result<TransitionMatrix> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::Domain(format!("beta = {beta} must be non-negative")));
    }
    if let Some(NeighborCutoff::Radius(r)) = cutoff {
        if !(r >= 0.0) {
            return Err(Error::Domain(format!("cutoff radius {r} must be non-negative")));
        }
    }
    let m = points.len();
    let mut entries = vec![0.0; m * m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        let d2: Vec<f64> = (0..m)
            .map(|j| squared_distance(points.get(i), points.get(j)))
            .collect();
        let keep: Vec<bool> = match cutoff {
            None => vec![true; m],
            Some(NeighborCutoff::Radius(r)) => d2.iter().map(|&d| d <= r * r).collect(),
            Some(NeighborCutoff::Count(k)) => {
                let mut others: Vec<usize> = (0..m).filter(|&j| j != i).collect();
                others.sort_by(|&a, &b| d2[a].total_cmp(&d2[b]).then(a.cmp(&b)));
                let mut keep = vec![false; m];
                for &j in others.iter().take(k) {
                    keep[j] = true;
                }
                keep
            }
        };
        for j in 0..m {
            weights[j] = if keep[j] || j == i {
                (-beta * d2[j]).exp()
            } else {
                0.0
            };
        }
        if cutoff.is_some() && m > 1 && (0..m).all(|j| j == i || weights[j] == 0.0) {
            return Err(Error::IsolatedPoint { index: i });
        }
        let z: f64 = weights.iter().sum();
        for j in 0..m {
            entries[j * m + i] = weights[j] / z;
        }
    }
    Ok(TransitionMatrix { size: m, entries })
}

/// Nearest-neighbor walk on `m` points in a row: stay with probability `p0`,
/// move to each neighbor with `(1 - p0)/2`. A move off either end is rejected
/// and the walker stays, so end points keep `p0 + (1 - p0)/2`.
pub fn chain_transition_matrix(m: usize, p0: f64) -> Result<TransitionMatrix> {
    if m < 2 {
        return Err(Error::Domain(format!("chain needs at least 2 points, got {m}")));
    }
    if !(0.0..1.0).contains(&p0) {
        return Err(Error::Domain(format!("p0 = {p0} not in [0, 1)")));
    }
    let hop = (1.0 - p0) / 2.0;
    let mut entries = vec![0.0; m * m];
    for i in 0..m {
        let mut stay = p0;
        if i > 0 {
            entries[(i - 1) * m + i] = hop;
        } else {
            stay += hop;
        }
        if i + 1 < m {
            entries[(i + 1) * m + i] = hop;
        } else {
            stay += hop;
        }
        entries[i * m + i] = stay;
    }
    Ok(TransitionMatrix { size: m, entries })
}

/// `P^t Q0` by `t` repeated matrix-vector products.
pub fn propagate(
    p: &TransitionMatrix,
    q0: &StateDistribution,
    t: usize,
) -> Result<StateDistribution> {
    if q0.len() != p.size {
        return Err(Error::DimensionMismatch {
            expected: p.size,
            actual: q0.len(),
        });
    }
    let mut q = q0.0.clone();
    let mut next = vec![0.0; p.size];
    for _ in 0..t {
        p.apply(&q, &mut next);
        std::mem::swap(&mut q, &mut next);
    }
    Ok(StateDistribution(q))
}

/// Probability of being at `j` after `t` steps when starting at `i`.
pub fn conditional_probability(
    p: &TransitionMatrix,
    i: usize,
    j: usize,
    t: usize,
) -> Result<f64> {
    if j >= p.size {
        return Err(Error::IndexOutOfRange { index: j, len: p.size });
    }
    let start = StateDistribution::delta(p.size, i)?;
    Ok(propagate(p, &start, t)?.0[j])
}

/// Graph Laplacian `L = D - A` of a symmetric 0/1 adjacency matrix.
pub fn graph_laplacian(adjacency: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = adjacency.nrows();
    if adjacency.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: adjacency.ncols(),
        });
    }
    for i in 0..n {
        if adjacency[(i, i)] != 0.0 {
            return Err(invalid("adjacency", format!("nonzero diagonal at {i}")));
        }
        for j in 0..n {
            let a = adjacency[(i, j)];
            if a != 0.0 && a != 1.0 {
                return Err(invalid("adjacency", format!("entry ({i}, {j}) = {a} is not 0/1")));
            }
            if a != adjacency[(j, i)] {
                return Err(invalid("adjacency", format!("asymmetric at ({i}, {j})")));
            }
        }
    }
    let mut lap = -adjacency.clone();
    for i in 0..n {
        lap[(i, i)] = adjacency.row(i).sum();
    }
    Ok(lap)
}

const STATIONARY_MAX_ITERS: usize = 1_000_000;

/// Stationary distribution by power iteration from the uniform distribution.
///
/// Fails on the identity matrix, where every distribution is stationary, and
/// when the residual `max |P pi - pi|` does not reach `tol`.
pub fn stationary_distribution(p: &TransitionMatrix, tol: f64) -> Result<StateDistribution> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    if (0..p.size).all(|i| p.get(i, i) == 1.0) {
        return Err(invalid(
            "transition matrix",
            "identity matrix has no unique stationary distribution",
        ));
    }
    let mut pi = vec![1.0 / p.size as f64; p.size];
    let mut next = vec![0.0; p.size];
    let mut residual = f64::INFINITY;
    for _ in 0..STATIONARY_MAX_ITERS {
        p.apply(&pi, &mut next);
        residual = pi
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if residual <= tol {
            let s: f64 = pi.iter().sum();
            pi.iter_mut().for_each(|v| *v /= s);
            return Ok(StateDistribution(pi));
        }
        std::mem::swap(&mut pi, &mut next);
    }
    Err(Error::NonConvergence {
        iterations: STATIONARY_MAX_ITERS,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gaussian_matrix_hand_example() {
        let pts = PointSet::from_1d(&[0.0, 1.0, 2.0]).unwrap();
        let p = gaussian_transition_matrix(&pts, 1.0, None).unwrap();
        let e = (-1.0f64).exp();
        let z = 1.0 + 2.0 * e;
        let col = p.column(1);
        assert!(close(col[0], e / z, 1e-15));
        assert!(close(col[1], 1.0 / z, 1e-15));
        assert!(close(col[2], e / z, 1e-15));
        assert!(close(col[0], 0.2119, 1e-4) && close(col[1], 0.5761, 1e-4));
    }

    #[test]
    fn gaussian_matrix_degenerate_cases() {
        let one = PointSet::from_1d(&[3.0]).unwrap();
        assert_eq!(gaussian_transition_matrix(&one, 2.0, None).unwrap().get(0, 0), 1.0);
        let pts = PointSet::from_1d(&[0.0, 0.3, 5.0, 7.0]).unwrap();
        let p = gaussian_transition_matrix(&pts, 0.0, None).unwrap();
        assert!(p.entries.iter().all(|&v| close(v, 0.25, 1e-15)));
    }

    #[test]
    fn gaussian_cutoffs() {
        let pts = PointSet::from_1d(&[0.0, 1.0, 2.0, 10.0]).unwrap();
        let err = gaussian_transition_matrix(&pts, 1.0, Some(NeighborCutoff::Radius(1.5)));
        assert!(matches!(err, Err(Error::IsolatedPoint { index: 3 })));
        let p = gaussian_transition_matrix(&pts, 1.0, Some(NeighborCutoff::Count(1))).unwrap();
        assert_eq!(p.get(2, 0), 0.0);
        assert!(p.get(1, 0) > 0.0);
        assert!(p.get(2, 3) > 0.0 && p.get(0, 3) == 0.0);
        let p = gaussian_transition_matrix(&pts, 0.5, Some(NeighborCutoff::Radius(1.0)));
        assert!(p.is_err());
    }

    #[test]
    fn point_set_validation() {
        assert!(PointSet::new(vec![]).is_err());
        assert!(PointSet::from_1d(&[1.0, 2.0, 1.0]).is_err());
        assert!(PointSet::new(vec![vec![0.0, 1.0], vec![0.0]]).is_err());
        assert!(PointSet::from_1d(&[f64::NAN]).is_err());
        assert!(PointSet::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
    }

    #[test]
    fn chain_examples() {
        let p = chain_transition_matrix(3, 0.2).unwrap();
        assert_eq!(p.column(1), vec![0.4, 0.2, 0.4]);
        let edge = p.column(0);
        assert!(close(edge[0], 0.6, 1e-15) && close(edge[1], 0.4, 1e-15) && edge[2] == 0.0);
        let p = chain_transition_matrix(2, 0.0).unwrap();
        assert_eq!(p.column(0), vec![0.5, 0.5]);
        assert_eq!(p.column(1), vec![0.5, 0.5]);
        let p = chain_transition_matrix(4, 0.999).unwrap();
        assert!(p.get(1, 1) >= 0.999 && p.get(0, 1) < 1e-3);
        assert!(chain_transition_matrix(1, 0.2).is_err());
        assert!(chain_transition_matrix(3, 1.0).is_err());
    }

    #[test]
    fn propagate_examples() {
        let p = chain_transition_matrix(3, 0.2).unwrap();
        let q0 = StateDistribution::delta(3, 1).unwrap();
        assert_eq!(propagate(&p, &q0, 0).unwrap(), q0);
        let q2 = propagate(&p, &q0, 2).unwrap();
        let expected = [0.32, 0.36, 0.32];
        for (a, b) in q2.probs().iter().zip(expected) {
            assert!(close(*a, b, 1e-15));
        }
        let uni = StateDistribution::uniform(3).unwrap();
        let out = propagate(&p, &uni, 50).unwrap();
        assert!(out.probs().iter().all(|&v| close(v, 1.0 / 3.0, 1e-15)));
        assert!(propagate(&p, &StateDistribution::uniform(4).unwrap(), 1).is_err());
    }

    #[test]
    fn conditional_probability_examples() {
        let p = chain_transition_matrix(3, 0.2).unwrap();
        assert_eq!(conditional_probability(&p, 2, 2, 0).unwrap(), 1.0);
        assert_eq!(conditional_probability(&p, 2, 0, 0).unwrap(), 0.0);
        assert!(close(conditional_probability(&p, 1, 0, 2).unwrap(), 0.32, 1e-15));
        let total: f64 = (0..3)
            .map(|j| conditional_probability(&p, 0, j, 7).unwrap())
            .sum();
        assert!(close(total, 1.0, 1e-14));
        assert!(conditional_probability(&p, 3, 0, 1).is_err());
        assert!(conditional_probability(&p, 0, 3, 1).is_err());
    }

    #[test]
    fn stochasticity_survives_long_powers() {
        let p = chain_transition_matrix(5, 0.2).unwrap();
        let q = propagate(&p, &StateDistribution::delta(5, 0).unwrap(), 100_000).unwrap();
        assert!(close(q.probs().iter().sum::<f64>(), 1.0, 1e-10));
    }

    #[test]
    fn laplacian_examples() {
        let path = DMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 1., 0., 1., 0.]);
        let l = graph_laplacian(&path).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[1., -1., 0., -1., 2., -1., 0., -1., 1.]);
        assert_eq!(l, expected);
        assert_eq!(graph_laplacian(&DMatrix::zeros(4, 4)).unwrap(), DMatrix::zeros(4, 4));
        let k3 = DMatrix::from_element(3, 3, 1.0) - DMatrix::identity(3, 3);
        let l = graph_laplacian(&k3).unwrap();
        assert_eq!(l, DMatrix::identity(3, 3) * 2.0 - k3);
        let asym = DMatrix::from_row_slice(2, 2, &[0., 1., 0., 0.]);
        assert!(graph_laplacian(&asym).is_err());
        assert!(graph_laplacian(&DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn stationary_examples() {
        let p = chain_transition_matrix(3, 0.2).unwrap();
        let pi = stationary_distribution(&p, 1e-14).unwrap();
        assert!(pi.probs().iter().all(|&v| close(v, 1.0 / 3.0, 1e-13)));
        let two = TransitionMatrix::from_row_major(2, vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        let pi = stationary_distribution(&two, 1e-14).unwrap();
        assert_eq!(pi.probs(), &[0.5, 0.5]);
        assert!(stationary_distribution(&TransitionMatrix::identity(3), 1e-12).is_err());
        // Non-uniform stationary law: detailed balance pi_0 * 0.3 = pi_1 * 0.1.
        let skew = TransitionMatrix::from_row_major(2, vec![0.7, 0.1, 0.3, 0.9]).unwrap();
        let pi = stationary_distribution(&skew, 1e-15).unwrap();
        assert!(close(pi.probs()[0], 0.25, 1e-13));
    }

    #[test]
    fn stationary_reports_non_convergence() {
        // Period-2 chain started away from its fixed point never settles.
        let flip = TransitionMatrix::from_row_major(3, vec![
            0.0, 0.5, 0.0, //
            1.0, 0.0, 1.0, //
            0.0, 0.5, 0.0,
        ])
        .unwrap();
        assert!(matches!(
            stationary_distribution(&flip, 1e-12),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn matrix_validation() {
        assert!(TransitionMatrix::from_row_major(2, vec![0.5, 0.5, 0.4, 0.5]).is_err());
        assert!(TransitionMatrix::from_row_major(2, vec![1.5, 0.0, -0.5, 1.0]).is_err());
        assert!(StateDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(StateDistribution::new(vec![1.5, -0.5]).is_err());
    }

    proptest! {
        #[test]
        fn centered_impulse_stays_palindromic(half in 1usize..8, p0 in 0.0f64..0.95, t in 0usize..60) {
            let m = 2 * half + 1;
            let p = chain_transition_matrix(m, p0).unwrap();
            let q = propagate(&p, &StateDistribution::delta(m, half).unwrap(), t).unwrap();
            let v = q.probs();
            for k in 0..m {
                prop_assert!((v[k] - v[m - 1 - k]).abs() <= 1e-15);
            }
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn gaussian_matrix_is_translation_invariant(
            xs in proptest::collection::btree_set(-50i32..50, 1..8),
            shift in -100.0f64..100.0,
            beta in 0.0f64..3.0,
        ) {
            let xs: Vec<f64> = xs.into_iter().map(|x| x as f64 * 0.25).collect();
            let pts = PointSet::from_1d(&xs).unwrap();
            let moved = pts.translated(&[shift]).unwrap();
            let a = gaussian_transition_matrix(&pts, beta, None).unwrap();
            let b = gaussian_transition_matrix(&moved, beta, None).unwrap();
            for (x, y) in a.entries.iter().zip(&b.entries) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
            for i in 0..a.size {
                prop_assert!((a.column(i).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn laplacian_has_zero_mode(bits in proptest::collection::vec(any::<bool>(), 15)) {
            let n = 6;
            let mut adj = DMatrix::zeros(n, n);
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if bits[k] {
                        adj[(i, j)] = 1.0;
                        adj[(j, i)] = 1.0;
                    }
                    k += 1;
                }
            }
            let l = graph_laplacian(&adj).unwrap();
            prop_assert_eq!(&l, &l.transpose());
            let ones = nalgebra::DVector::from_element(n, 1.0);
            prop_assert!((&l * ones).amax() == 0.0);
            let eig = SymmetricEigen::new(l).eigenvalues;
            prop_assert!(eig.min() > -1e-12);
            prop_assert!(eig.min().abs() < 1e-12);
        }
    }
}
