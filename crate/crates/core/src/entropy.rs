//! Entropic functionals of cq and ccq states, by grid quadrature.
//!
//! Conditional entropies given `M` use the chain rule
//! `S(X|M) = S(M|X) + S(X) - S(M)`, evaluated in one pass as
//! `sum_x h^n [p S(rho(x)) - p ln p] - S(rho_avg)`.

use serde::{Deserialize, Serialize};

use crate::cq::{marginal_x, marginal_y, CcqState, CqState};
use crate::error::{Error, Result};
use crate::grid::{Axis, Grid, GridDensity};
use crate::quantum::{hermitian_eigenvalues, spectrum_entropy};

/// Entropies beyond this magnitude are flagged as possibly divergent.
pub const FINITE_ENTROPY_BOUND: f64 = 50.0;

/// A value with an error bar.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error_bar: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            error_bar: 0.0,
        }
    }
}

fn xlnx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// `S(X) = -sum p ln p h^n`.
pub fn differential_entropy(p: &GridDensity) -> f64 {
    -p.values().iter().map(|&v| xlnx(v)).sum::<f64>() * p.grid().cell_volume()
}

/// `S(M|X) = sum_x p(x) S(rho(x)) h^n`.
pub fn entropy_m_given_x(s: &CqState) -> f64 {
    let vol = s.grid().cell_volume();
    let flags = s.zero_mass_flags();
    s.pointwise_entropies()
        .iter()
        .zip(s.density().values())
        .zip(flags)
        .filter(|(_, z)| !**z)
        .map(|((e, p), _)| e * p)
        .sum::<f64>()
        * vol
}

/// `S(M)`, the entropy of the average state.
pub fn entropy_m(s: &CqState) -> f64 {
    let d = s.dim();
    let mut ev = vec![0.0; d];
    hermitian_eigenvalues(&s.average_operator(), d, &mut ev);
    spectrum_entropy(&ev)
}

/// `S(X|M) = S(M|X) + S(X) - S(M)`.
pub fn entropy_x_given_m(s: &CqState) -> f64 {
    entropy_m_given_x(s) + differential_entropy(s.density()) - entropy_m(s)
}

/// `S(XY|M)` on the joint grid.
pub fn entropy_xy_given_m(s: &CcqState) -> f64 {
    entropy_x_given_m(s.as_cq())
}

fn cmi_value(s: &CcqState) -> Result<f64> {
    let sx = entropy_x_given_m(&marginal_x(s)?);
    let sy = entropy_x_given_m(&marginal_y(s)?);
    Ok(sx + sy - entropy_xy_given_m(s))
}

/// `I(X:Y|M) = S(X|M) + S(Y|M) - S(XY|M)`.
///
/// The error bar is the change in value when every other grid node is dropped.
pub fn cmi(s: &CcqState) -> Result<Estimate> {
    let value = cmi_value(s)?;
    let coarse = cmi_value(&s.halved())?;
    Ok(Estimate {
        value,
        error_bar: (value - coarse).abs(),
    })
}

/// True when an entropy looks like it diverges on this grid.
pub fn looks_infinite(value: f64) -> bool {
    !value.is_finite() || value.abs() > FINITE_ENTROPY_BOUND
}

/// Gaussian noise `Z` on a lattice aligned with a cq state.
///
/// The noise enters as `A' = A + (shift along each axis) * j` for the lattice
/// index `j` of `Z`, so every node of `(A', Z)` maps back to a node of `A`.
/// Each `z` node carries the normalized weight of a standard normal.
#[derive(Clone, Debug)]
pub struct NoiseBundle {
    base: CqState,
    steps: Vec<usize>,
    z_axis: Axis,
    /// Probability of each `z` node.
    z_weights: Vec<f64>,
}

impl NoiseBundle {
    /// Noise of spacing `z_spacing` moving axis `k` by `steps[k]` nodes per `z` step.
    ///
    /// `z` covers `[-8, 8]`; spacings above 2 are rejected.
    pub fn new(base: CqState, z_spacing: f64, steps: Vec<usize>) -> Result<Self> {
        if steps.len() != base.grid().dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} shift steps for a {}-axis state",
                steps.len(),
                base.grid().dim()
            )));
        }
        if !(z_spacing > 0.0) || z_spacing > 2.0 {
            return Err(Error::GridTooCoarse(format!("noise spacing {z_spacing} outside (0, 2]")));
        }
        let half = (8.0 / z_spacing).ceil() as usize;
        let points = 2 * half + 1;
        let z_axis = Axis::from_spacing(-(half as f64) * z_spacing, z_spacing, points);
        let raw: Vec<f64> = z_axis.coords().iter().map(|z| (-0.5 * z * z).exp()).collect();
        let total: f64 = raw.iter().sum();
        Ok(NoiseBundle {
            base,
            steps,
            z_axis,
            z_weights: raw.into_iter().map(|w| w / total).collect(),
        })
    }

    /// The bundle for `A + sqrt(t) Z` with one lattice step per `z` step.
    pub fn for_time(base: CqState, t: f64) -> Result<Self> {
        if base.grid().dim() != 1 {
            return Err(Error::DimensionMismatch("time bundles act on one axis".into()));
        }
        let h = base.grid().axis(0).spacing();
        NoiseBundle::new(base, h / t.sqrt(), vec![1])
    }

    pub fn base(&self) -> &CqState {
        &self.base
    }

    pub fn z_axis(&self) -> &Axis {
        &self.z_axis
    }

    fn half(&self) -> usize {
        self.z_weights.len() / 2
    }

    /// Variance of the noise added along axis `k`.
    pub fn added_variance(&self, k: usize) -> f64 {
        let h = self.base.grid().axis(k).spacing() * self.steps[k] as f64;
        let var_z: f64 = self
            .z_axis
            .coords()
            .iter()
            .zip(&self.z_weights)
            .map(|(z, w)| w * z * z)
            .sum();
        var_z * (h / self.z_axis.spacing()).powi(2)
    }

    /// `S(Z)` for the lattice noise.
    pub fn entropy_z(&self) -> f64 {
        let hz = self.z_axis.spacing();
        -self.z_weights.iter().map(|&w| w * (w / hz).ln()).sum::<f64>()
    }

    /// The cq state of `(A', M)`.
    pub fn noisy(&self) -> Result<CqState> {
        let grid = self.base.grid();
        let d = self.base.dim();
        let sz = d * d;
        let half = self.half();
        let ext: Vec<usize> = self.steps.iter().map(|s| s * half).collect();
        let axes: Vec<Axis> = grid
            .axes()
            .iter()
            .zip(&ext)
            .map(|(a, e)| Axis::from_spacing(a.lo - *e as f64 * a.spacing(), a.spacing(), a.points + 2 * e))
            .collect();
        let out_grid = Grid::new(axes)?;
        let sigma = self.base.weighted_field();
        let mut out = vec![num_complex::Complex64::new(0.0, 0.0); out_grid.len() * sz];
        let inner_out = if grid.dim() == 2 { out_grid.axis(1).points } else { 1 };
        let inner_in = if grid.dim() == 2 { grid.axis(1).points } else { 1 };
        let nx = grid.axis(0).points;
        for (jz, &w) in self.z_weights.iter().enumerate() {
            // node i of A lands on node i + steps * jz of A' (offset by the extension)
            let ox = self.steps[0] * jz;
            let oy = if grid.dim() == 2 { self.steps[1] * jz } else { 0 };
            for i in 0..nx {
                for j in 0..inner_in {
                    let src = (i * inner_in + j) * sz;
                    let dst = ((i + ox) * inner_out + j + oy) * sz;
                    for k in 0..sz {
                        out[dst + k] += sigma[src + k] * w;
                    }
                }
            }
        }
        CqState::from_weighted(out_grid, d, out)
    }

    /// `S(A'|M)`.
    pub fn entropy_noisy(&self) -> Result<f64> {
        Ok(entropy_x_given_m(&self.noisy()?))
    }

    /// `S(A'Z|M)`, summed directly over the `(A', Z)` lattice.
    ///
    /// The state at `(a', z)` is the base state at `a' - shift(z)`, so the
    /// pointwise spectra of the base are reused.
    pub fn entropy_noisy_with_z(&self) -> f64 {
        let vol = self.base.grid().cell_volume() * self.z_axis.spacing();
        let hz = self.z_axis.spacing();
        let pts = self.base.pointwise_entropies();
        let p = self.base.density().values();
        let flags = self.base.zero_mass_flags();
        let mut acc = 0.0;
        for &w in &self.z_weights {
            let phi = w / hz;
            for i in 0..p.len() {
                if flags[i] {
                    continue;
                }
                let q = p[i] * phi;
                acc += q * pts[i] - xlnx(q);
            }
        }
        acc * vol - entropy_m(&self.base)
    }
}

/// `I(A + noise : Z | M) = S(A'|M) + S(Z|M) - S(A'Z|M)`, with `S(Z|M) = S(Z)`.
pub fn cmi_with_noise(bundle: &NoiseBundle) -> Result<f64> {
    Ok(bundle.entropy_noisy()? + bundle.entropy_z() - bundle.entropy_noisy_with_z())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cq::{embed_classical, make_ccq, CiBlock, StructuredCiState};
    use crate::family::StateFamilySpec;
    use crate::grid::{gaussian_density, uniform_density, DensitySpec};
    use crate::heat::heat_evolve_cq;
    use crate::quantum::DensityMatrix;
    use std::f64::consts::LN_2;

    fn normal(var: f64) -> GridDensity {
        let g = Grid::one(Axis::new(-10.0, 10.0, 1024).unwrap());
        gaussian_density(&[0.0], &[vec![var]], &g).unwrap()
    }

    #[test]
    fn differential_entropy_examples() {
        let u = uniform_density(0.0, 1.0, &Axis::cell_centered(0.0, 1.0, 1024).unwrap()).unwrap();
        assert!(differential_entropy(&u).abs() < 1e-6);
        let s1 = differential_entropy(&normal(1.0));
        assert!((s1 - 1.418939).abs() < 1e-4);
        let s4 = differential_entropy(&normal(4.0));
        assert!((s4 - s1 - LN_2).abs() < 1e-4);
    }

    #[test]
    fn m_given_x_examples() {
        let pure = StateFamilySpec::QubitBloch { alpha: 1.0, beta: 1.0, gamma: 0.0, mixedness: 0.0 };
        let s = CqState::from_family(normal(1.0), &pure).unwrap();
        assert!(entropy_m_given_x(&s).abs() < 1e-10);
        // pure map: S(X|M) = S(X) - S(avg)
        let expected = differential_entropy(s.density()) - entropy_m(&s);
        assert!((entropy_x_given_m(&s) - expected).abs() < 1e-12);
        let rho0 = DensityMatrix::from_diagonal(&[0.5, 0.25, 0.25]).unwrap();
        let s = CqState::from_fn(normal(1.0), 3, |_| Ok(rho0.clone())).unwrap();
        assert!((entropy_m_given_x(&s) - 1.5 * LN_2).abs() < 1e-10);
        assert!((entropy_x_given_m(&s) - differential_entropy(s.density())).abs() < 1e-10);
        let s = CqState::trivial(normal(1.0));
        assert_eq!(entropy_x_given_m(&s), differential_entropy(s.density()));
    }

    /// `sum_m q(m) S(X|M=m)` with `p(x|m) = p(x) q(m|x) / q(m)`.
    fn classical_conditional_entropy(p: &GridDensity, q: &[Vec<f64>]) -> f64 {
        let h = p.grid().cell_volume();
        let mut total = 0.0;
        for row in q {
            let joint: Vec<f64> = p.values().iter().zip(row).map(|(a, b)| a * b).collect();
            let qm: f64 = joint.iter().sum::<f64>() * h;
            if qm == 0.0 {
                continue;
            }
            let s: f64 = -joint.iter().map(|v| xlnx(v / qm)).sum::<f64>() * h;
            total += qm * s;
        }
        total
    }

    #[test]
    fn classical_embedding_matches_classical_formula() {
        let p = normal(1.0);
        let family = StateFamilySpec::logistic(1.5, 0.3);
        let xs = p.grid().axis(0).coords();
        let probs: Vec<Vec<f64>> = xs.iter().map(|&x| family.classical_probabilities(x).unwrap()).collect();
        let q: Vec<Vec<f64>> = (0..2).map(|m| probs.iter().map(|c| c[m]).collect()).collect();
        let s = embed_classical(&q, &p).unwrap();
        let oracle = classical_conditional_entropy(&p, &q);
        assert!((entropy_x_given_m(&s) - oracle).abs() < 1e-6);
        let diag = CqState::from_family(p.clone(), &family).unwrap();
        assert!((entropy_m_given_x(&diag) - entropy_m_given_x(&s)).abs() < 1e-12);
        // deterministic q: S(M|X) = 0
        let sign: Vec<Vec<f64>> = vec![
            xs.iter().map(|&x| if x < 0.0 { 1.0 } else { 0.0 }).collect(),
            xs.iter().map(|&x| if x < 0.0 { 0.0 } else { 1.0 }).collect(),
        ];
        let s = embed_classical(&sign, &p).unwrap();
        assert!(entropy_m_given_x(&s).abs() < 1e-14);
        let expected = differential_entropy(&p) - entropy_m(&s);
        assert!((entropy_x_given_m(&s) - expected).abs() < 1e-12);
        assert!((entropy_m(&s) - LN_2).abs() < 1e-3);
    }

    fn grid2(n: usize) -> Grid {
        let a = Axis::new(-8.0, 8.0, n).unwrap();
        Grid::two(a.clone(), a)
    }

    #[test]
    fn correlated_gaussian_mutual_information() {
        let r: f64 = 0.5;
        let p = gaussian_density(&[0.0, 0.0], &[vec![1.0, r], vec![r, 1.0]], &grid2(256)).unwrap();
        let s = make_ccq(p, 1, |_, _| Ok(DensityMatrix::maximally_mixed(1))).unwrap();
        let i = cmi(&s).unwrap();
        assert!((i.value - 0.143841).abs() < 5e-4, "{i:?}");
        assert!((-0.5 * (1.0 - r * r).ln() - 0.143841).abs() < 1e-6);
    }

    #[test]
    fn product_and_structured_states_are_independent() {
        let p = gaussian_density(&[0.0, 0.0], &[vec![1.0, 0.0], vec![0.0, 2.0]], &grid2(128)).unwrap();
        let rho0 = DensityMatrix::from_bloch([0.2, 0.3, 0.1]).unwrap();
        let s = make_ccq(p, 2, |_, _| Ok(rho0.clone())).unwrap();
        assert!(cmi(&s).unwrap().value.abs() < 1e-8);
        let a = Axis::new(-8.0, 8.0, 128).unwrap();
        let st = StructuredCiState::new(vec![
            CiBlock {
                weight: 0.4,
                density_x: DensitySpec::Gaussian { mean: -1.0, variance: 1.0 },
                density_y: DensitySpec::Gaussian { mean: 1.0, variance: 0.7 },
                family_x: StateFamilySpec::QubitBloch { alpha: 1.0, beta: 1.0, gamma: 0.0, mixedness: 0.0 },
                family_y: StateFamilySpec::QubitBloch { alpha: 1.5, beta: 0.5, gamma: 1.0, mixedness: 0.3 },
            },
            CiBlock {
                weight: 0.6,
                density_x: DensitySpec::Gaussian { mean: 1.0, variance: 0.8 },
                density_y: DensitySpec::Gaussian { mean: -0.5, variance: 1.3 },
                family_x: StateFamilySpec::trivial(),
                family_y: StateFamilySpec::logistic(1.0, 0.0),
            },
        ])
        .unwrap();
        let s = st.realize(&a, &a).unwrap();
        let i = cmi(&s).unwrap();
        assert!(i.value.abs() < 1e-6, "{i:?}");
    }

    #[test]
    fn structured_single_block_joint_entropy_is_additive() {
        let a = Axis::new(-8.0, 8.0, 128).unwrap();
        let st = StructuredCiState::new(vec![CiBlock {
            weight: 1.0,
            density_x: DensitySpec::Gaussian { mean: 0.0, variance: 1.0 },
            density_y: DensitySpec::Gaussian { mean: 0.0, variance: 2.0 },
            family_x: StateFamilySpec::QubitBloch { alpha: 1.0, beta: 1.0, gamma: 0.5, mixedness: 0.1 },
            family_y: StateFamilySpec::QubitBloch { alpha: 0.5, beta: 2.0, gamma: 0.0, mixedness: 0.0 },
        }])
        .unwrap();
        let s = st.realize(&a, &a).unwrap();
        let sx = entropy_x_given_m(&marginal_x(&s).unwrap());
        let sy = entropy_x_given_m(&marginal_y(&s).unwrap());
        assert!((entropy_xy_given_m(&s) - sx - sy).abs() < 1e-9);
    }

    #[test]
    fn classical_correlated_pair_matches_classical_cmi() {
        // M a bit; given M = m the pair is a correlated Gaussian with correlation r_m
        let grid = grid2(128);
        let cond = [(0.4, 0.3), (0.6, -0.6)];
        let parts: Vec<GridDensity> = cond
            .iter()
            .map(|(_, r)| gaussian_density(&[0.0, 0.0], &[vec![1.0, *r], vec![*r, 1.0]], &grid).unwrap())
            .collect();
        let n = grid.len();
        let joint: Vec<f64> = (0..n).map(|i| cond[0].0 * parts[0].values()[i] + cond[1].0 * parts[1].values()[i]).collect();
        let q: Vec<Vec<f64>> = (0..2)
            .map(|m| (0..n).map(|i| cond[m].0 * parts[m].values()[i] / joint[i]).collect())
            .collect();
        let joint = GridDensity::from_unnormalized(grid.clone(), joint).unwrap();
        let s = CcqState::wrap(embed_classical(&q, &joint).unwrap()).unwrap();
        let oracle: f64 = cond.iter().map(|(w, r)| -0.5 * w * (1.0 - r * r).ln()).sum();
        let i = cmi(&s).unwrap();
        assert!((i.value - oracle).abs() < 1e-3, "{} vs {oracle}", i.value);
    }

    #[test]
    fn noise_cmi_matches_gaussian_closed_form_and_entropy_difference() {
        let s = CqState::trivial(normal(1.0));
        let b = NoiseBundle::for_time(s.clone(), 0.01).unwrap();
        let i = cmi_with_noise(&b).unwrap();
        let exact = 0.5 * 1.01f64.ln();
        assert!((i - exact).abs() < 0.05 * exact, "{i} vs {exact}");
        assert!((b.added_variance(0) - 0.01).abs() < 1e-12);

        let family = StateFamilySpec::QubitBloch { alpha: 1.0, beta: 2.0, gamma: 0.3, mixedness: 0.1 };
        let s = CqState::from_family(normal(1.0), &family).unwrap();
        let t = 0.02;
        let b = NoiseBundle::for_time(s.clone(), t).unwrap();
        let i = cmi_with_noise(&b).unwrap();
        let diff = entropy_x_given_m(&heat_evolve_cq(&s, t).unwrap()) - entropy_x_given_m(&s);
        assert!((i - diff).abs() < 1e-5, "{i} vs {diff}");
    }

    #[test]
    fn zero_noise_has_zero_information() {
        let s = CqState::trivial(normal(1.0));
        let b = NoiseBundle::new(s, 0.5, vec![0]).unwrap();
        assert!(cmi_with_noise(&b).unwrap().abs() < 1e-12);
    }

    #[test]
    fn cmi_decreases_under_heat_flow() {
        let grid = grid2(128);
        let r = 0.6;
        let p = gaussian_density(&[0.0, 0.0], &[vec![1.0, r], vec![r, 1.0]], &grid).unwrap();
        let s = make_ccq(p, 1, |_, _| Ok(DensityMatrix::maximally_mixed(1))).unwrap();
        let before = cmi(&s).unwrap().value;
        for t in [0.1, 0.5, 1.0] {
            let after = cmi(&crate::heat::heat_evolve_ccq_x(&s, t).unwrap()).unwrap().value;
            assert!(after <= before + 1e-6);
        }
    }
}
