//! Fisher information of `X` conditioned on `M`.
//!
//! Two estimators of the same limit are provided. [`fisher_mi_ratio`] takes
//! `I(X + sqrt(t) Z : Z | M) / t` from the three entropies of a noise bundle;
//! [`fisher_debruijn`] takes `(S(X_t|M) - S(X|M)) / t` from heat-evolved
//! states. Both evaluate a short decreasing time schedule and extrapolate the
//! two smallest times linearly to `t = 0`.
//!
//! Under the variance-`t` convention of [`crate::heat`], a trivial `M` gives
//! `J = tr(J_matrix) / 2` for the classical Fisher matrix.

use serde::{Deserialize, Serialize};

use crate::cq::CqState;
use crate::entropy::{cmi_with_noise, entropy_x_given_m, NoiseBundle};
use crate::error::{Error, Result};
use crate::grid::GridDensity;
use crate::heat::heat_evolve_cq;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherMethod {
    MiRatio,
    EntropyDerivative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FisherEstimate {
    pub value: f64,
    pub method: FisherMethod,
    pub t_schedule: Vec<f64>,
    /// `I(t) / t` at each scheduled time.
    pub ratios: Vec<f64>,
    pub extrapolated: bool,
    pub error_estimate: f64,
}

/// Schedule `{1e-2, 5e-3, 2.5e-3} Var(X)`, scaled up if its last time falls
/// below `max(1e-4, (2h)^2)`.
pub fn default_schedule(s: &CqState) -> Vec<f64> {
    let var = s.density().variance().iter().sum::<f64>() / s.grid().dim() as f64;
    let h = s.grid().axes().iter().map(|a| a.spacing()).fold(0.0, f64::max);
    let floor = f64::max(1e-4, (2.0 * h).powi(2));
    let base = [1e-2 * var, 5e-3 * var, 2.5e-3 * var];
    let scale = (floor / base[2]).max(1.0);
    base.iter().map(|t| t * scale).collect()
}

fn check_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.len() < 2 {
        return Err(Error::InvalidSchedule("need at least two times".into()));
    }
    if schedule.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidSchedule("times must be positive".into()));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidSchedule("times must be strictly decreasing".into()));
    }
    Ok(())
}

/// Linear extrapolation to `t = 0` through `(t1, r1)` and `(t2, r2)`.
fn richardson(t1: f64, r1: f64, t2: f64, r2: f64) -> f64 {
    (t1 * r2 - t2 * r1) / (t1 - t2)
}

fn extrapolate(method: FisherMethod, schedule: &[f64], ratios: Vec<f64>) -> Result<FisherEstimate> {
    let n = schedule.len();
    let value = richardson(schedule[n - 2], ratios[n - 2], schedule[n - 1], ratios[n - 1]);
    let error_estimate = if n >= 3 {
        let coarser = richardson(schedule[n - 3], ratios[n - 3], schedule[n - 2], ratios[n - 2]);
        (value - coarser).abs()
    } else {
        (value - ratios[n - 1]).abs()
    };
    // each ratio is a lower bound that grows as t shrinks
    let slack = error_estimate + 1e-9 * value.abs().max(1.0);
    for w in ratios.windows(2) {
        if w[1] < w[0] - slack {
            return Err(Error::ScheduleTooCoarse(format!(
                "ratio fell from {} to {} as t decreased",
                w[0], w[1]
            )));
        }
    }
    Ok(FisherEstimate {
        value,
        method,
        t_schedule: schedule.to_vec(),
        ratios,
        extrapolated: true,
        error_estimate,
    })
}

/// `lim I(X + sqrt(t) Z : Z | M) / t` from noise bundles (one-dimensional `X`).
pub fn fisher_mi_ratio(s: &CqState, schedule: &[f64]) -> Result<FisherEstimate> {
    check_schedule(schedule)?;
    let ratios = schedule
        .iter()
        .map(|&t| Ok(cmi_with_noise(&NoiseBundle::for_time(s.clone(), t)?)? / t))
        .collect::<Result<Vec<f64>>>()?;
    extrapolate(FisherMethod::MiRatio, schedule, ratios)
}

/// `d/dt S(X + sqrt(t) Z | M)` at `t = 0` from heat-evolved states.
pub fn fisher_debruijn(s: &CqState, schedule: &[f64]) -> Result<FisherEstimate> {
    check_schedule(schedule)?;
    let s0 = entropy_x_given_m(s);
    let ratios = schedule
        .iter()
        .map(|&t| Ok((entropy_x_given_m(&heat_evolve_cq(s, t)?) - s0) / t))
        .collect::<Result<Vec<f64>>>()?;
    extrapolate(FisherMethod::EntropyDerivative, schedule, ratios)
}

/// `J(X + sqrt(t) Z | M)`: evolve to `t`, then [`fisher_debruijn`] with the default schedule.
pub fn fisher_at_time(s: &CqState, t: f64) -> Result<FisherEstimate> {
    let evolved = heat_evolve_cq(s, t)?;
    fisher_debruijn(&evolved, &default_schedule(&evolved))
}

/// `J_ij = sum d_i ln p d_j ln p p h^n` over nodes with `p > 1e-12 max p`.
///
/// Gradients are central differences; a node contributes only when both
/// neighbours along every axis are also in the support.
pub fn fisher_matrix_classical(p: &GridDensity) -> Vec<Vec<f64>> {
    let grid = p.grid();
    let n = grid.dim();
    let v = p.values();
    let max = v.iter().copied().fold(0.0, f64::max);
    let cut = 1e-12 * max;
    let vol = grid.cell_volume();
    let mut j = vec![vec![0.0; n]; n];
    let strides: Vec<usize> = (0..n).map(|k| grid.axis_layout(k).2).collect();
    'nodes: for idx in 0..v.len() {
        if v[idx] <= cut {
            continue;
        }
        let mut grad = [0.0; 2];
        for k in 0..n {
            let (_, len, inner) = grid.axis_layout(k);
            let pos = (idx / inner) % len;
            if pos == 0 || pos + 1 == len {
                continue 'nodes;
            }
            let (a, b) = (v[idx - strides[k]], v[idx + strides[k]]);
            if a <= cut || b <= cut {
                continue 'nodes;
            }
            grad[k] = (b.ln() - a.ln()) / (2.0 * grid.axis(k).spacing());
        }
        for a in 0..n {
            for b in 0..n {
                j[a][b] += grad[a] * grad[b] * v[idx] * vol;
            }
        }
    }
    j
}
