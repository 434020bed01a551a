//! Heat-semigroup evolution `X -> X + sqrt(t) Z` on grids.
//!
//! `Z` is standard normal, so time `t` adds variance `t` along every evolved
//! axis. Evolution is a direct convolution with a sampled Gaussian kernel,
//! truncated at eight standard deviations. Each output grid is the input grid
//! extended by `pad_factor * sqrt(t)` per side.
//!
//! For large `t` the output lattice is coarsened by an integer factor `m`
//! (spacing `m h`) so that the number of nodes stays bounded while the
//! kernel remains resolved by at least 64 output nodes per standard
//! deviation, or 4 when the point budget forces more coarsening. The kernel
//! is renormalized separately for each input residue class modulo `m`, which
//! keeps the transported mass exact before the final renormalization.

use std::ops::{AddAssign, Mul};

use num_complex::Complex64;

use crate::cq::{CcqState, CqState};
use crate::error::{Error, Result};
use crate::grid::{Axis, Grid, GridDensity};

/// Kernel half-width in standard deviations.
const KERNEL_SIGMAS: f64 = 8.0;
/// Output nodes per standard deviation before coarsening kicks in.
const RESOLUTION_TARGET: f64 = 64.0;
/// Fewest output nodes per standard deviation accepted under the budget.
const RESOLUTION_FLOOR: f64 = 4.0;

/// Parameters of one evolution step.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatParams {
    pub t: f64,
    /// Grid extension per side, in units of `sqrt(t)`.
    pub pad_factor: f64,
    /// Largest number of nodes allowed on an evolved axis.
    pub max_points: usize,
}

impl HeatParams {
    pub fn new(t: f64) -> Result<Self> {
        let p = HeatParams {
            t,
            ..HeatParams::default()
        };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return Err(Error::InvalidSchedule(format!("time must be >= 0, got {}", self.t)));
        }
        if !(self.pad_factor >= 4.0) {
            return Err(Error::InvalidParameters(format!(
                "pad factor must be >= 4, got {}",
                self.pad_factor
            )));
        }
        if self.max_points < 16 {
            return Err(Error::InvalidParameters("point budget below 16".into()));
        }
        Ok(())
    }
}

impl Default for HeatParams {
    fn default() -> Self {
        HeatParams {
            t: 0.0,
            pad_factor: 6.0,
            max_points: 32_768,
        }
    }
}

/// Scalar types the convolution can carry.
trait Field: Copy + Default + AddAssign + Mul<f64, Output = Self> {}
impl Field for f64 {}
impl Field for Complex64 {}

/// Output lattice and kernel for one axis.
struct AxisPlan {
    axis: Axis,
    /// Output node `j` sits at fine index `j * m - pad` of the input axis.
    m: usize,
    pad: usize,
    radius: usize,
    /// `coef[diff + radius]`, already divided by `m`.
    coef: Vec<f64>,
}

fn plan_axis(axis: &Axis, params: &HeatParams) -> Result<AxisPlan> {
    let h = axis.spacing();
    let sigma = params.t.sqrt();
    let n = axis.points;
    let mut m = ((sigma / (RESOLUTION_TARGET * h)).floor() as usize).max(1);
    let pad_for = |m: usize| {
        let raw = (params.pad_factor * sigma / h).ceil() as usize;
        raw.div_ceil(m) * m
    };
    let out_points = |m: usize| (n - 1 + 2 * pad_for(m)) / m + 1;
    while out_points(m) > params.max_points {
        m += (m / 8).max(1);
    }
    if sigma / (m as f64 * h) < RESOLUTION_FLOOR && m > 1 {
        return Err(Error::GridBudgetExceeded(format!(
            "t = {} needs spacing {} but the {}-point budget allows only {}",
            params.t,
            sigma / RESOLUTION_FLOOR,
            params.max_points,
            m as f64 * h
        )));
    }
    let pad = pad_for(m);
    let points = out_points(m);
    let radius = (KERNEL_SIGMAS * sigma / h).ceil() as usize;
    let raw: Vec<f64> = (0..=2 * radius)
        .map(|k| {
            let z = (k as f64 - radius as f64) * h / sigma;
            (-0.5 * z * z).exp()
        })
        .collect();
    // normalize separately on each residue class of the offset modulo m
    let mut norm = vec![0.0; m];
    for (k, w) in raw.iter().enumerate() {
        norm[k % m] += w;
    }
    let coef = raw
        .iter()
        .enumerate()
        .map(|(k, w)| w / norm[k % m] / m as f64)
        .collect();
    Ok(AxisPlan {
        axis: Axis::from_spacing(axis.lo - pad as f64 * h, m as f64 * h, points),
        m,
        pad,
        radius,
        coef,
    })
}

/// Convolve `data` (blocks of `width` scalars per node) along axis `k`.
fn convolve_axis<T: Field>(
    grid: &Grid,
    data: &[T],
    width: usize,
    k: usize,
    params: &HeatParams,
) -> Result<(Grid, Vec<T>)> {
    let plan = plan_axis(grid.axis(k), params)?;
    let (outer, n, inner) = grid.axis_layout(k);
    let n_out = plan.axis.points;
    let block = inner * width;
    let mut out = vec![T::default(); outer * n_out * block];
    let r = plan.radius as i64;
    for o in 0..outer {
        let src = &data[o * n * block..(o + 1) * n * block];
        let dst = &mut out[o * n_out * block..(o + 1) * n_out * block];
        for j in 0..n_out {
            let u = (j * plan.m) as i64 - plan.pad as i64;
            let lo = (u - r).max(0);
            let hi = (u + r).min(n as i64 - 1);
            let d = &mut dst[j * block..(j + 1) * block];
            for i in lo..=hi {
                let c = plan.coef[(u - i + r) as usize];
                let s = &src[i as usize * block..(i as usize + 1) * block];
                for (a, b) in d.iter_mut().zip(s) {
                    *a += *b * c;
                }
            }
        }
    }
    Ok((grid.with_axis(k, plan.axis), out))
}

fn evolve_axes<T: Field>(
    grid: &Grid,
    data: Vec<T>,
    width: usize,
    axes: &[usize],
    params: &HeatParams,
) -> Result<(Grid, Vec<T>)> {
    params.check()?;
    let mut grid = grid.clone();
    let mut data = data;
    if params.t == 0.0 {
        return Ok((grid, data));
    }
    for &k in axes {
        let (g, d) = convolve_axis(&grid, &data, width, k, params)?;
        grid = g;
        data = d;
    }
    Ok((grid, data))
}

/// Density of `X + sqrt(t) Z`, with default parameters.
pub fn heat_evolve_density(p: &GridDensity, t: f64) -> Result<GridDensity> {
    heat_evolve_density_with(p, &HeatParams::new(t)?)
}

pub fn heat_evolve_density_with(p: &GridDensity, params: &HeatParams) -> Result<GridDensity> {
    if params.t == 0.0 {
        params.check()?;
        return Ok(p.clone());
    }
    let axes: Vec<usize> = (0..p.grid().dim()).collect();
    let (grid, values) = evolve_axes(p.grid(), p.values().to_vec(), 1, &axes, params)?;
    GridDensity::from_unnormalized(grid, values)
}

fn evolve_cq_axes(s: &CqState, axes: &[usize], params: &HeatParams) -> Result<CqState> {
    if params.t == 0.0 {
        params.check()?;
        return Ok(s.clone());
    }
    let d = s.dim();
    let (grid, weighted) = evolve_axes(s.grid(), s.weighted_field(), d * d, axes, params)?;
    CqState::from_weighted(grid, d, weighted)
}

/// `(X + sqrt(t) Z, M)` with `Z` independent of both `X` and `M`.
pub fn heat_evolve_cq(s: &CqState, t: f64) -> Result<CqState> {
    heat_evolve_cq_with(s, &HeatParams::new(t)?)
}

pub fn heat_evolve_cq_with(s: &CqState, params: &HeatParams) -> Result<CqState> {
    let axes: Vec<usize> = (0..s.grid().dim()).collect();
    evolve_cq_axes(s, &axes, params)
}

/// Evolve only the `X` variable of a ccq state.
pub fn heat_evolve_ccq_x(s: &CcqState, t: f64) -> Result<CcqState> {
    CcqState::wrap(evolve_cq_axes(s.as_cq(), &[0], &HeatParams::new(t)?)?)
}

/// Evolve only the `Y` variable of a ccq state.
pub fn heat_evolve_ccq_y(s: &CcqState, t: f64) -> Result<CcqState> {
    CcqState::wrap(evolve_cq_axes(s.as_cq(), &[1], &HeatParams::new(t)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cq::{average_state, sum_pushforward, CiBlock, StructuredCiState};
    use crate::family::StateFamilySpec;
    use crate::grid::{gaussian_density, DensitySpec};
    use crate::quantum::DensityMatrix;

    fn normal(mean: f64, var: f64, lo: f64, hi: f64, n: usize) -> GridDensity {
        let g = Grid::one(Axis::new(lo, hi, n).unwrap());
        gaussian_density(&[mean], &[vec![var]], &g).unwrap()
    }

    fn closed_form(var: f64, x: f64) -> f64 {
        (-(x * x) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    }

    #[test]
    fn gaussian_at_t3_is_n04() {
        let p = normal(0.0, 1.0, -10.0, 10.0, 1024);
        let q = heat_evolve_density(&p, 3.0).unwrap();
        let a = q.grid().axis(0);
        let sup = (0..a.points)
            .map(|i| (q.values()[i] - closed_form(4.0, a.coord(i))).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-6, "{sup}");
        assert!((q.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_time_is_identity() {
        let p = normal(0.3, 0.7, -8.0, 8.0, 256);
        assert_eq!(heat_evolve_density(&p, 0.0).unwrap(), p);
        assert!(matches!(heat_evolve_density(&p, -1.0), Err(Error::InvalidSchedule(_))));
    }

    #[test]
    fn semigroup_composition() {
        let p = DensitySpec::Mixture {
            components: vec![
                crate::grid::MixtureComponent { weight: 0.4, mean: -1.5, variance: 0.5 },
                crate::grid::MixtureComponent { weight: 0.6, mean: 1.0, variance: 1.0 },
            ],
        }
        .build(&Axis::new(-10.0, 10.0, 1024).unwrap())
        .unwrap();
        let two = heat_evolve_density(&heat_evolve_density(&p, 0.2).unwrap(), 0.3).unwrap();
        let one = heat_evolve_density(&p, 0.5).unwrap();
        let sup = two.sup_distance_on_common(&one).unwrap();
        assert!(sup < 1e-7, "{sup}");
    }

    #[test]
    fn coarsened_evolution_matches_closed_form() {
        let p = normal(0.0, 1.0, -10.0, 10.0, 1024);
        let q = heat_evolve_density(&p, 1000.0).unwrap();
        let a = q.grid().axis(0);
        assert!(a.spacing() > 10.0 * p.grid().axis(0).spacing());
        let sup = (0..a.points)
            .map(|i| (q.values()[i] - closed_form(1001.0, a.coord(i))).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-7, "{sup}");
        assert!((q.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let p = normal(0.0, 1.0, -10.0, 10.0, 1024);
        let params = HeatParams {
            t: 1e8,
            max_points: 16,
            ..HeatParams::default()
        };
        assert!(matches!(
            heat_evolve_density_with(&p, &params),
            Err(Error::GridBudgetExceeded(_))
        ));
    }

    #[test]
    fn constant_map_and_average_are_preserved() {
        let p = normal(0.0, 1.0, -8.0, 8.0, 256);
        let rho0 = DensityMatrix::from_bloch([0.3, 0.1, -0.5]).unwrap();
        let cq = CqState::from_fn(p, 2, |_| Ok(rho0.clone())).unwrap();
        let ev = heat_evolve_cq(&cq, 0.7).unwrap();
        for i in (0..ev.len()).step_by(37) {
            assert!((ev.state(i).matrix() - rho0.matrix()).iter().map(|c| c.norm()).fold(0.0, f64::max) < 1e-12);
        }
        let p = normal(0.0, 1.0, -8.0, 8.0, 256);
        let bloch = StateFamilySpec::QubitBloch { alpha: 1.0, beta: 2.0, gamma: 0.2, mixedness: 0.1 };
        let cq = CqState::from_family(p, &bloch).unwrap();
        let before = average_state(&cq).unwrap();
        let after = average_state(&heat_evolve_cq(&cq, 0.5).unwrap()).unwrap();
        assert!((before.matrix() - after.matrix()).iter().map(|c| c.norm()).fold(0.0, f64::max) < 1e-10);
    }

    fn qubit_ccq() -> CcqState {
        let a = Axis::new(-8.0, 8.0, 128).unwrap();
        StructuredCiState::new(vec![
            CiBlock {
                weight: 0.5,
                density_x: DensitySpec::Gaussian { mean: -0.5, variance: 1.0 },
                density_y: DensitySpec::Gaussian { mean: 0.5, variance: 0.8 },
                family_x: StateFamilySpec::QubitBloch { alpha: 1.0, beta: 1.0, gamma: 0.0, mixedness: 0.0 },
                family_y: StateFamilySpec::trivial(),
            },
            CiBlock {
                weight: 0.5,
                density_x: DensitySpec::Gaussian { mean: 0.5, variance: 1.2 },
                density_y: DensitySpec::Gaussian { mean: -0.3, variance: 1.0 },
                family_x: StateFamilySpec::trivial(),
                family_y: StateFamilySpec::QubitBloch { alpha: 0.7, beta: 1.5, gamma: 0.4, mixedness: 0.2 },
            },
        ])
        .unwrap()
        .realize(&a, &a)
        .unwrap()
    }

    #[test]
    fn axis_evolutions_commute() {
        let s = qubit_ccq();
        let xy = heat_evolve_ccq_y(&heat_evolve_ccq_x(&s, 0.3).unwrap(), 0.2).unwrap();
        let yx = heat_evolve_ccq_x(&heat_evolve_ccq_y(&s, 0.2).unwrap(), 0.3).unwrap();
        assert_eq!(xy.grid(), yx.grid());
        let sup = xy
            .joint()
            .values()
            .iter()
            .zip(yx.joint().values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-7);
    }

    #[test]
    fn evolving_parts_then_summing_equals_summing_then_evolving() {
        let s = qubit_ccq();
        let (lambda, t) = (0.3, 0.4);
        let parts = heat_evolve_ccq_y(&heat_evolve_ccq_x(&s, lambda * t).unwrap(), (1.0 - lambda) * t).unwrap();
        let a = sum_pushforward(&parts).unwrap();
        let b = heat_evolve_cq(&sum_pushforward(&s).unwrap(), t).unwrap();
        let sup = a.density().sup_distance_on_common(b.density()).unwrap();
        assert!(sup < 1e-6, "{sup}");
    }
}
