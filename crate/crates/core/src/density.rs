//! Data densities and the walk quantities derived from them.
//!
//! A density ρ(x) counts data points per unit length (1D) or area (2D). A
//! random walk that hops between neighboring data points with self-transition
//! probability `p0` and step duration `delta` behaves, in the continuum, like
//! diffusion with coefficient
//!
//! ```text
//! D(x) = (1 - p0) / (2 d delta rho(x)^(2/d))
//! ```
//!
//! so sparse regions diffuse fast and dense regions slowly.

use crate::error::{invalid, Error, Result};
use crate::pgm::parse_pgm;
use crate::walk::PointSet;

/// A density that can be evaluated at a coordinate.
pub trait DensityField {
    /// Spatial dimension of the coordinates accepted by [`density_at`](Self::density_at).
    fn dim(&self) -> usize;

    fn density_at(&self, x: &[f64]) -> Result<f64>;
}

fn check_density(value: f64, what: &'static str) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(what, format!("density {value} is not positive and finite")))
    }
}

/// Piecewise-constant density on an interval.
///
/// Interior breakpoints belong to the piece on their right; the final
/// breakpoint belongs to the last piece.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseDensity1D {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseDensity1D {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || breakpoints.len() != values.len() + 1 {
            return Err(invalid(
                "piecewise density",
                format!(
                    "{} breakpoints cannot bound {} pieces",
                    breakpoints.len(),
                    values.len()
                ),
            ));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(invalid("piecewise density", "breakpoints must be finite"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(
                "piecewise density",
                "breakpoints must be strictly ascending",
            ));
        }
        for &v in &values {
            check_density(v, "piecewise density")?;
        }
        Ok(Self { breakpoints, values })
    }

    pub fn uniform(lo: f64, hi: f64, rho: f64) -> Result<Self> {
        Self::new(vec![lo, hi], vec![rho])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lower(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn upper(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn at(&self, x: f64) -> Result<f64> {
        if !(x >= self.lower() && x <= self.upper()) {
            return Err(Error::Domain(format!(
                "x = {x} outside [{}, {}]",
                self.lower(),
                self.upper()
            )));
        }
        // Number of interior breakpoints <= x is the piece index.
        let interior = &self.breakpoints[1..self.breakpoints.len() - 1];
        let piece = interior.partition_point(|&b| b <= x);
        Ok(self.values[piece])
    }
}

impl DensityField for PiecewiseDensity1D {
    fn dim(&self) -> usize {
        1
    }

    fn density_at(&self, x: &[f64]) -> Result<f64> {
        match x {
            [x] => self.at(*x),
            _ => Err(Error::DimensionMismatch {
                expected: 1,
                actual: x.len(),
            }),
        }
    }
}

/// Cell-constant density on a rectangle `[0, width*cell_size] x [0, height*cell_size]`.
///
/// `values` is row-major; row `r` covers `y` in `[r*cell_size, (r+1)*cell_size)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterDensity2D {
    width: usize,
    height: usize,
    cell_size: f64,
    values: Vec<f64>,
}

impl RasterDensity2D {
    pub fn new(width: usize, height: usize, cell_size: f64, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("raster density", "zero width or height"));
        }
        if width * height != values.len() {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: values.len(),
            });
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(invalid("raster density", format!("cell size {cell_size}")));
        }
        for &v in &values {
            check_density(v, "raster density")?;
        }
        Ok(Self {
            width,
            height,
            cell_size,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Same raster with a different physical cell size.
    pub fn with_cell_size(&self, cell_size: f64) -> Result<Self> {
        Self::new(self.width, self.height, cell_size, self.values.clone())
    }

    /// Physical extent along x and y.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.cell_size,
            self.height as f64 * self.cell_size,
        )
    }

    /// Row-major index of the cell containing `(x, y)`.
    pub fn cell_index(&self, x: f64, y: f64) -> Result<usize> {
        let (ex, ey) = self.extent();
        if !(x >= 0.0 && x <= ex && y >= 0.0 && y <= ey) {
            return Err(Error::Domain(format!(
                "({x}, {y}) outside raster [0, {ex}] x [0, {ey}]"
            )));
        }
        let col = ((x / self.cell_size) as usize).min(self.width - 1);
        let row = ((y / self.cell_size) as usize).min(self.height - 1);
        Ok(row * self.width + col)
    }
}

impl DensityField for RasterDensity2D {
    fn dim(&self) -> usize {
        2
    }

    fn density_at(&self, x: &[f64]) -> Result<f64> {
        match x {
            [x, y] => Ok(self.values[self.cell_index(*x, *y)?]),
            _ => Err(Error::DimensionMismatch {
                expected: 2,
                actual: x.len(),
            }),
        }
    }
}

/// Parameters of the discrete walk whose continuum limit is being taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkParams {
    p0: f64,
    dim: usize,
    delta: f64,
}

impl WalkParams {
    pub fn new(p0: f64, dim: usize, delta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p0) {
            return Err(invalid("walk params", format!("p0 = {p0} not in [0, 1)")));
        }
        if !(dim == 1 || dim == 2) {
            return Err(invalid("walk params", format!("dimension {dim} not 1 or 2")));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(invalid("walk params", format!("delta = {delta} not positive")));
        }
        Ok(Self { p0, dim, delta })
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Diffusion coefficient (length²/time) of the continuum walk at density `rho`.
pub fn diffusion_coefficient(rho: f64, params: &WalkParams) -> Result<f64> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::Domain(format!("density {rho} must be positive")));
    }
    let d = params.dim as f64;
    Ok((1.0 - params.p0) / (2.0 * d * params.delta * rho.powf(2.0 / d)))
}

/// Path penalty coefficient matched to a diffusion coefficient, `1 / (4 D)`.
pub fn beta_from_diffusion(diffusion: f64) -> Result<f64> {
    if !(diffusion.is_finite() && diffusion > 0.0) {
        return Err(Error::Domain(format!(
            "diffusion coefficient {diffusion} must be positive"
        )));
    }
    Ok(1.0 / (4.0 * diffusion))
}

/// Regularly spaced points with spacing `1/rho` inside each piece.
///
/// Piece lengths that are not whole multiples of `1/rho` are split into
/// `round(rho * length)` equal gaps. Shared breakpoints appear once.
pub fn points_from_piecewise(field: &PiecewiseDensity1D) -> PointSet {
    let mut coords = vec![field.lower()];
    for (k, &rho) in field.values.iter().enumerate() {
        let (a, b) = (field.breakpoints[k], field.breakpoints[k + 1]);
        let gaps = ((rho * (b - a)).round() as usize).max(1);
        let h = (b - a) / gaps as f64;
        for j in 1..gaps {
            coords.push(a + j as f64 * h);
        }
        coords.push(b);
    }
    PointSet::from_1d(&coords).expect("ascending breakpoints yield distinct points")
}

/// Linear map from gray level to density through two anchor points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrayMapping {
    pub gray_a: f64,
    pub rho_a: f64,
    pub gray_b: f64,
    pub rho_b: f64,
}

impl GrayMapping {
    pub fn new(gray_a: f64, rho_a: f64, gray_b: f64, rho_b: f64) -> Self {
        Self {
            gray_a,
            rho_a,
            gray_b,
            rho_b,
        }
    }

    pub fn map(&self, gray: f64) -> f64 {
        if self.gray_a == self.gray_b {
            return self.rho_a;
        }
        self.rho_a + (gray - self.gray_a) * (self.rho_b - self.rho_a) / (self.gray_b - self.gray_a)
    }
}

/// Builds a raster density from PGM bytes (`P2` or `P5`).
pub fn load_density_raster(
    bytes: &[u8],
    mapping: &GrayMapping,
    cell_size: f64,
) -> Result<RasterDensity2D> {
    if mapping.gray_a == mapping.gray_b && mapping.rho_a != mapping.rho_b {
        return Err(invalid(
            "gray mapping",
            "equal gray anchors must map to equal densities",
        ));
    }
    check_density(mapping.rho_a, "gray mapping")?;
    check_density(mapping.rho_b, "gray mapping")?;
    let image = parse_pgm(bytes)?;
    let mut values = Vec::with_capacity(image.pixels.len());
    for (k, &g) in image.pixels.iter().enumerate() {
        let rho = mapping.map(g as f64);
        if !(rho.is_finite() && rho > 0.0) {
            return Err(invalid(
                "gray mapping",
                format!("pixel {k} (gray {g}) maps to non-positive density {rho}"),
            ));
        }
        values.push(rho);
    }
    RasterDensity2D::new(image.width, image.height, cell_size, values)
}
