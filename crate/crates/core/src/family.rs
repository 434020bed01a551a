//! Parametric state maps `x -> rho(x)`.
//!
//! Every family here is Lipschitz in the trace norm, with an explicit
//! constant returned by [`StateFamilySpec::continuity_constant`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Axis;
use crate::quantum::{DensityMatrix, StateField};

/// Declared state families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum StateFamilySpec {
    /// The same diagonal state at every point.
    Constant { diag: Vec<f64> },
    /// `diag(q(.|x))` with `q(k|x)` proportional to `exp(slopes[k] x + offsets[k])`.
    DiagonalClassical { slopes: Vec<f64>, offsets: Vec<f64> },
    /// Bloch vector `(1 - mu)(sin theta, 0, cos theta)`, `theta = alpha atan(beta x) + gamma`.
    QubitBloch {
        alpha: f64,
        beta: f64,
        gamma: f64,
        mixedness: f64,
    },
}

impl StateFamilySpec {
    /// Trivial one-dimensional system.
    pub fn trivial() -> Self {
        StateFamilySpec::Constant { diag: vec![1.0] }
    }

    /// Two-outcome `q(0|x) = 1 / (1 + exp(-(scale x + shift)))`.
    pub fn logistic(scale: f64, shift: f64) -> Self {
        StateFamilySpec::DiagonalClassical {
            slopes: vec![scale, 0.0],
            offsets: vec![shift, 0.0],
        }
    }

    /// Look a family up by name with named scalar parameters.
    pub fn named(name: &str, params: &[(&str, f64)]) -> Result<Self> {
        let get = |key: &str| {
            params
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::InvalidParameters(format!("{name}: missing `{key}`")))
        };
        let spec = match name {
            "constant" => {
                let mut diag: Vec<(usize, f64)> = params
                    .iter()
                    .filter_map(|(k, v)| {
                        k.strip_prefix('p').and_then(|i| i.parse().ok()).map(|i: usize| (i, *v))
                    })
                    .collect();
                diag.sort_by_key(|(i, _)| *i);
                if diag.is_empty() {
                    return Err(Error::InvalidParameters("constant: need p0, p1, ...".into()));
                }
                StateFamilySpec::Constant {
                    diag: diag.into_iter().map(|(_, v)| v).collect(),
                }
            }
            "diagonal_classical" => StateFamilySpec::logistic(get("scale")?, get("shift")?),
            "qubit_bloch" => StateFamilySpec::QubitBloch {
                alpha: get("alpha")?,
                beta: get("beta")?,
                gamma: get("gamma")?,
                mixedness: get("mixedness")?,
            },
            other => return Err(Error::UnknownFamily(other.to_string())),
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        match self {
            StateFamilySpec::Constant { diag } => {
                let total: f64 = diag.iter().sum();
                if diag.is_empty() || diag.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-10 {
                    return Err(Error::InvalidParameters(format!(
                        "constant: diagonal {diag:?} is not a probability vector"
                    )));
                }
            }
            StateFamilySpec::DiagonalClassical { slopes, offsets } => {
                if slopes.len() < 2 || slopes.len() != offsets.len() {
                    return Err(Error::InvalidParameters(
                        "diagonal_classical: need matching slopes/offsets with at least two outcomes".into(),
                    ));
                }
                if slopes.iter().chain(offsets).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameters("diagonal_classical: non-finite parameter".into()));
                }
            }
            StateFamilySpec::QubitBloch {
                alpha,
                beta,
                gamma,
                mixedness,
            } => {
                if !(0.0..1.0).contains(mixedness) {
                    return Err(Error::InvalidParameters(format!(
                        "qubit_bloch: mixedness {mixedness} outside [0, 1)"
                    )));
                }
                if ![alpha, beta, gamma].iter().all(|v| v.is_finite()) {
                    return Err(Error::InvalidParameters("qubit_bloch: non-finite parameter".into()));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            StateFamilySpec::Constant { diag } => diag.len(),
            StateFamilySpec::DiagonalClassical { slopes, .. } => slopes.len(),
            StateFamilySpec::QubitBloch { .. } => 2,
        }
    }

    /// Conditional probabilities `q(.|x)` of a diagonal family.
    pub fn classical_probabilities(&self, x: f64) -> Option<Vec<f64>> {
        match self {
            StateFamilySpec::Constant { diag } => Some(diag.clone()),
            StateFamilySpec::DiagonalClassical { slopes, offsets } => {
                let logits: Vec<f64> = slopes.iter().zip(offsets).map(|(a, b)| a * x + b).collect();
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
                let z: f64 = w.iter().sum();
                Some(w.into_iter().map(|v| v / z).collect())
            }
            StateFamilySpec::QubitBloch { .. } => None,
        }
    }

    /// Column-major entries of `rho(x)`.
    pub(crate) fn write_state(&self, x: f64, out: &mut [Complex64]) {
        out.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        match self {
            StateFamilySpec::QubitBloch {
                alpha,
                beta,
                gamma,
                mixedness,
            } => {
                let theta = alpha * (beta * x).atan() + gamma;
                let r = 1.0 - mixedness;
                let (rx, rz) = (r * theta.sin(), r * theta.cos());
                out[0] = Complex64::new(0.5 * (1.0 + rz), 0.0);
                out[1] = Complex64::new(0.5 * rx, 0.0);
                out[2] = Complex64::new(0.5 * rx, 0.0);
                out[3] = Complex64::new(0.5 * (1.0 - rz), 0.0);
            }
            _ => {
                let q = self.classical_probabilities(x).expect("diagonal family");
                let d = q.len();
                for (k, p) in q.into_iter().enumerate() {
                    out[k * d + k] = Complex64::new(p, 0.0);
                }
            }
        }
    }

    pub fn state_at(&self, x: f64) -> DensityMatrix {
        let d = self.dim();
        let mut buf = vec![Complex64::new(0.0, 0.0); d * d];
        self.write_state(x, &mut buf);
        DensityMatrix::from_slice_unchecked(d, &buf)
    }

    /// Bound `C` with `||rho(x) - rho(x')||_1 <= C |x - x'|`.
    pub fn continuity_constant(&self) -> f64 {
        match self {
            StateFamilySpec::Constant { .. } => 0.0,
            StateFamilySpec::DiagonalClassical { slopes, .. } => {
                let max = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min = slopes.iter().copied().fold(f64::INFINITY, f64::min);
                max - min
            }
            StateFamilySpec::QubitBloch {
                alpha,
                beta,
                mixedness,
                ..
            } => (1.0 - mixedness) * (alpha * beta).abs(),
        }
    }
}

/// A state family sampled on an axis.
#[derive(Clone, Debug)]
pub struct StateMap {
    pub states: StateField,
    /// Largest trace-norm distance between neighbouring nodes.
    pub max_adjacent_distance: f64,
}

/// Sample `family` at every node of `axis` and check trace-norm continuity.
pub fn state_map(family: &StateFamilySpec, axis: &Axis) -> Result<StateMap> {
    family.check()?;
    let d = family.dim();
    let mut states = StateField::zeros(d, axis.points);
    for (i, x) in axis.coords().into_iter().enumerate() {
        family.write_state(x, states.get_mut(i));
    }
    let mut max_adjacent_distance = 0.0f64;
    for i in 1..axis.points {
        let dist = crate::quantum::trace_norm_of_difference(states.get(i), states.get(i - 1), d);
        max_adjacent_distance = max_adjacent_distance.max(dist);
    }
    let bound = family.continuity_constant() * axis.spacing();
    if max_adjacent_distance > bound * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::InvalidParameters(format!(
            "state map jumps by {max_adjacent_distance} in trace norm, bound {bound}"
        )));
    }
    Ok(StateMap {
        states,
        max_adjacent_distance,
    })
}
