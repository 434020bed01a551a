//! Uniform grids over R^n (n = 1 or 2) and discretized densities on them.
//!
//! Integrals are rectangle sums `sum f(x_i) h^n`. Constructors renormalize so
//! that the discrete mass is exactly one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest number of points accepted on a user-facing axis.
pub const MIN_POINTS: usize = 16;
/// Required relative accuracy of the discrete normalization.
pub const MASS_TOL: f64 = 1e-8;

/// One uniformly spaced axis with `points` nodes from `lo` to `hi` inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if points < MIN_POINTS {
            return Err(Error::GridTooCoarse(format!(
                "{points} points, need at least {MIN_POINTS}"
            )));
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidGrid(format!("need lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Axis { lo, hi, points })
    }

    /// Cell-centred nodes for `[lo, hi]`: `points` cells of width `(hi - lo) / points`.
    pub fn cell_centered(lo: f64, hi: f64, points: usize) -> Result<Self> {
        let h = (hi - lo) / points as f64;
        Axis::new(lo + 0.5 * h, hi - 0.5 * h, points)
    }

    pub(crate) fn from_spacing(lo: f64, spacing: f64, points: usize) -> Self {
        Axis {
            lo,
            hi: lo + spacing * (points.max(2) - 1) as f64,
            points,
        }
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.lo + self.spacing() * i as f64
    }

    pub fn coords(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points).map(|i| self.lo + h * i as f64).collect()
    }

    /// Every other node, starting at the first.
    pub(crate) fn halved(&self) -> Axis {
        let points = self.points.div_ceil(2);
        Axis::from_spacing(self.lo, 2.0 * self.spacing(), points)
    }
}

/// Product grid over one or two axes, stored row-major (last axis fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidGrid(format!(
                "grid dimension must be 1 or 2, got {}",
                axes.len()
            )));
        }
        Ok(Grid { axes })
    }

    pub fn one(axis: Axis) -> Self {
        Grid { axes: vec![axis] }
    }

    pub fn two(x: Axis, y: Axis) -> Self {
        Grid { axes: vec![x, y] }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub(crate) fn with_axis(&self, k: usize, axis: Axis) -> Grid {
        let mut axes = self.axes.clone();
        axes[k] = axis;
        Grid { axes }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume of one cell, `prod_k h_k`.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    /// Coordinates of the flat index `i`.
    pub fn point(&self, i: usize) -> [f64; 2] {
        match self.axes.len() {
            1 => [self.axes[0].coord(i), 0.0],
            _ => {
                let ny = self.axes[1].points;
                [self.axes[0].coord(i / ny), self.axes[1].coord(i % ny)]
            }
        }
    }

    /// `(outer, n, inner)` such that the flat index is `(o * n + j) * inner + r`.
    pub(crate) fn axis_layout(&self, k: usize) -> (usize, usize, usize) {
        let outer: usize = self.axes[..k].iter().map(|a| a.points).product();
        let inner: usize = self.axes[k + 1..].iter().map(|a| a.points).product();
        (outer, self.axes[k].points, inner)
    }

    pub(crate) fn halved(&self) -> Grid {
        Grid {
            axes: self.axes.iter().map(Axis::halved).collect(),
        }
    }

    /// Flat indices kept by [`Grid::halved`].
    pub(crate) fn halved_indices(&self) -> Vec<usize> {
        match self.axes.len() {
            1 => (0..self.axes[0].points).step_by(2).collect(),
            _ => {
                let ny = self.axes[1].points;
                let mut out = Vec::new();
                for i in (0..self.axes[0].points).step_by(2) {
                    for j in (0..ny).step_by(2) {
                        out.push(i * ny + j);
                    }
                }
                out
            }
        }
    }
}

/// Probability density sampled on a grid; `sum values * h^n = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDensity {
    grid: Grid,
    values: Vec<f64>,
    coverage_warning: bool,
}

impl GridDensity {
    /// Wrap already-normalized values.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let d = Self::from_unnormalized(grid, values)?;
        Ok(d)
    }

    /// Validate nonnegativity and rescale to unit mass.
    pub fn from_unnormalized(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "grid has {} points, got {} values",
                grid.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidDensity(format!("negative or non-finite value {v}")));
        }
        let mass: f64 = values.iter().sum::<f64>() * grid.cell_volume();
        if !(mass > 0.0) {
            return Err(Error::InvalidDensity("zero total mass".into()));
        }
        let values = values.into_iter().map(|v| v / mass).collect();
        Ok(GridDensity {
            grid,
            values,
            coverage_warning: false,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Set when the grid does not cover +-6 standard deviations of the source.
    pub fn coverage_warning(&self) -> bool {
        self.coverage_warning
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Mean along each axis.
    pub fn mean(&self) -> Vec<f64> {
        let vol = self.grid.cell_volume();
        let mut m = vec![0.0; self.grid.dim()];
        for (i, &p) in self.values.iter().enumerate() {
            let x = self.grid.point(i);
            for (k, mk) in m.iter_mut().enumerate() {
                *mk += p * x[k] * vol;
            }
        }
        m
    }

    /// Variance along each axis.
    pub fn variance(&self) -> Vec<f64> {
        let vol = self.grid.cell_volume();
        let mean = self.mean();
        let mut v = vec![0.0; self.grid.dim()];
        for (i, &p) in self.values.iter().enumerate() {
            let x = self.grid.point(i);
            for (k, vk) in v.iter_mut().enumerate() {
                *vk += p * (x[k] - mean[k]).powi(2) * vol;
            }
        }
        v
    }

    /// Largest pointwise difference over nodes shared by both grids.
    ///
    /// Returns `None` when the lattices do not share spacing or alignment.
    pub fn sup_distance_on_common(&self, other: &GridDensity) -> Option<f64> {
        common_sup(&self.grid, &self.values, &other.grid, &other.values)
    }

    pub(crate) fn halved(&self) -> GridDensity {
        let idx = self.grid.halved_indices();
        let values: Vec<f64> = idx.iter().map(|&i| self.values[i]).collect();
        GridDensity::from_unnormalized(self.grid.halved(), values)
            .expect("halving preserves positivity")
    }
}

pub(crate) fn common_sup(ga: &Grid, va: &[f64], gb: &Grid, vb: &[f64]) -> Option<f64> {
    if ga.dim() != gb.dim() {
        return None;
    }
    let mut offsets = Vec::new();
    for (a, b) in ga.axes().iter().zip(gb.axes()) {
        let h = a.spacing();
        if (h - b.spacing()).abs() > 1e-9 * h {
            return None;
        }
        let shift = (b.lo - a.lo) / h;
        let rounded = shift.round();
        if (shift - rounded).abs() > 1e-6 {
            return None;
        }
        offsets.push(rounded as i64);
    }
    let mut sup = 0.0f64;
    let mut any = false;
    match ga.dim() {
        1 => {
            for (i, a) in va.iter().enumerate() {
                let j = i as i64 - offsets[0];
                if j >= 0 && (j as usize) < gb.axis(0).points {
                    sup = sup.max((a - vb[j as usize]).abs());
                    any = true;
                }
            }
        }
        _ => {
            let (nay, nby) = (ga.axis(1).points, gb.axis(1).points);
            for i in 0..ga.axis(0).points {
                let bi = i as i64 - offsets[0];
                if bi < 0 || bi as usize >= gb.axis(0).points {
                    continue;
                }
                for j in 0..nay {
                    let bj = j as i64 - offsets[1];
                    if bj >= 0 && (bj as usize) < nby {
                        sup = sup.max((va[i * nay + j] - vb[bi as usize * nby + bj as usize]).abs());
                        any = true;
                    }
                }
            }
        }
    }
    any.then_some(sup)
}

/// Discretized Gaussian `N(mean, covariance)` on `grid`, renormalized.
///
/// Rejects covariances whose standard deviation along some axis is below
/// four grid spacings.
pub fn gaussian_density(mean: &[f64], covariance: &[Vec<f64>], grid: &Grid) -> Result<GridDensity> {
    let n = grid.dim();
    if mean.len() != n || covariance.len() != n || covariance.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "grid dimension {n} does not match mean/covariance"
        )));
    }
    if n == 2 && (covariance[0][1] - covariance[1][0]).abs() > 1e-12 * (1.0 + covariance[0][1].abs()) {
        return Err(Error::CovarianceNotSpd("not symmetric".into()));
    }
    let (inv, det) = match n {
        1 => {
            let v = covariance[0][0];
            (vec![vec![1.0 / v]], v)
        }
        _ => {
            let (a, b, c) = (covariance[0][0], covariance[0][1], covariance[1][1]);
            let det = a * c - b * b;
            (vec![vec![c / det, -b / det], vec![-b / det, a / det]], det)
        }
    };
    if !(covariance[0][0] > 0.0) || !(det > 0.0) {
        return Err(Error::CovarianceNotSpd(format!("determinant {det}")));
    }
    let mut coverage_warning = false;
    for k in 0..n {
        let sigma = covariance[k][k].sqrt();
        let axis = grid.axis(k);
        if sigma < 4.0 * axis.spacing() {
            return Err(Error::GridTooCoarse(format!(
                "standard deviation {sigma} below four grid spacings ({})",
                axis.spacing()
            )));
        }
        if mean[k] - 6.0 * sigma < axis.lo || mean[k] + 6.0 * sigma > axis.hi {
            coverage_warning = true;
        }
    }
    let values: Vec<f64> = (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            let mut q = 0.0;
            for a in 0..n {
                for b in 0..n {
                    q += (x[a] - mean[a]) * inv[a][b] * (x[b] - mean[b]);
                }
            }
            (-0.5 * q).exp()
        })
        .collect();
    let mut d = GridDensity::from_unnormalized(grid.clone(), values)?;
    d.coverage_warning = coverage_warning;
    Ok(d)
}

/// Uniform density on `[a, b]`, using the overlap of each cell with the interval.
pub fn uniform_density(a: f64, b: f64, axis: &Axis) -> Result<GridDensity> {
    if !(b > a) {
        return Err(Error::InvalidDensity(format!("empty interval [{a}, {b}]")));
    }
    let h = axis.spacing();
    let values: Vec<f64> = axis
        .coords()
        .into_iter()
        .map(|x| {
            let lo = (x - 0.5 * h).max(a);
            let hi = (x + 0.5 * h).min(b);
            ((hi - lo).max(0.0)) / h
        })
        .collect();
    GridDensity::from_unnormalized(Grid::one(axis.clone()), values)
}

/// One-dimensional density families used by scenario configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensitySpec {
    Gaussian { mean: f64, variance: f64 },
    Mixture { components: Vec<MixtureComponent> },
    Uniform { lo: f64, hi: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

impl DensitySpec {
    pub fn build(&self, axis: &Axis) -> Result<GridDensity> {
        let grid = Grid::one(axis.clone());
        match self {
            DensitySpec::Gaussian { mean, variance } => {
                gaussian_density(&[*mean], &[vec![*variance]], &grid)
            }
            DensitySpec::Uniform { lo, hi } => uniform_density(*lo, *hi, axis),
            DensitySpec::Mixture { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidDensity("mixture without components".into()));
                }
                let total: f64 = components.iter().map(|c| c.weight).sum();
                if components.iter().any(|c| !(c.weight >= 0.0)) || !(total > 0.0) {
                    return Err(Error::InvalidDensity("mixture weights must be nonnegative".into()));
                }
                let mut values = vec![0.0; axis.points];
                let mut warn = false;
                for c in components {
                    let g = gaussian_density(&[c.mean], &[vec![c.variance]], &grid)?;
                    warn |= g.coverage_warning;
                    for (v, gv) in values.iter_mut().zip(g.values()) {
                        *v += c.weight / total * gv;
                    }
                }
                let mut d = GridDensity::from_unnormalized(grid, values)?;
                d.coverage_warning = warn;
                Ok(d)
            }
        }
    }

    /// Variance of the continuous law.
    pub fn variance(&self) -> f64 {
        match self {
            DensitySpec::Gaussian { variance, .. } => *variance,
            DensitySpec::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            DensitySpec::Mixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                let mean: f64 = components.iter().map(|c| c.weight * c.mean).sum::<f64>() / total;
                components
                    .iter()
                    .map(|c| c.weight * (c.variance + (c.mean - mean).powi(2)))
                    .sum::<f64>()
                    / total
            }
        }
    }
}
