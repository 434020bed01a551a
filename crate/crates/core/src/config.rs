//! Scenario configuration files and the bundled scenario registry.
//!
//! Configs are JSON documents carrying `"schema_version": 1`.

use serde::{Deserialize, Serialize};

use crate::cq::{CiBlock, StructuredCiState};
use crate::error::{Error, Result};
use crate::grid::Axis;
use crate::inequality::Tolerances;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub source: SourceSpec,
    pub checks: Vec<CheckSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x: Axis,
    pub y: Axis,
}

/// Where the ccq states come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    /// One state in block form.
    Structured { blocks: Vec<CiBlock> },
    /// `draws` random structured states seeded by the scenario seed.
    RandomStructured { draws: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    X,
    Y,
    Sum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    ConditionalIndependence,
    Epi,
    LinearEpi { lambdas: Vec<f64> },
    Stam,
    LinearStam { lambdas: Vec<f64> },
    FisherAgreement,
    MiChain { lambda: f64, times: Vec<f64> },
    Concavity { variable: Variable, t_max: f64, points: usize },
    Asymptotic { variable: Variable, times: Vec<f64> },
    PhiFlow { lambda: f64, times: Vec<f64> },
}

impl CheckSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::ConditionalIndependence => "conditional_independence",
            CheckSpec::Epi => "epi",
            CheckSpec::LinearEpi { .. } => "linear_epi",
            CheckSpec::Stam => "stam",
            CheckSpec::LinearStam { .. } => "linear_stam",
            CheckSpec::FisherAgreement => "fisher_agreement",
            CheckSpec::MiChain { .. } => "mi_chain",
            CheckSpec::Concavity { .. } => "concavity",
            CheckSpec::Asymptotic { .. } => "asymptotic",
            CheckSpec::PhiFlow { .. } => "phi_flow",
        }
    }

    fn check(&self, path: &str) -> Result<()> {
        let lambda_ok = |l: f64, p: String| {
            if (0.0..=1.0).contains(&l) {
                Ok(())
            } else {
                Err(Error::config(p, format!("lambda {l} outside [0, 1]")))
            }
        };
        let times_ok = |ts: &[f64], p: String| {
            if ts.is_empty() {
                return Err(Error::config(p, "empty time list"));
            }
            if ts.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
                return Err(Error::config(p, "times must be finite and >= 0"));
            }
            Ok(())
        };
        match self {
            CheckSpec::LinearEpi { lambdas } | CheckSpec::LinearStam { lambdas } => {
                if lambdas.is_empty() {
                    return Err(Error::config(format!("{path}.lambdas"), "empty list"));
                }
                for (i, l) in lambdas.iter().enumerate() {
                    lambda_ok(*l, format!("{path}.lambdas[{i}]"))?;
                }
            }
            CheckSpec::MiChain { lambda, times } | CheckSpec::PhiFlow { lambda, times } => {
                lambda_ok(*lambda, format!("{path}.lambda"))?;
                times_ok(times, format!("{path}.times"))?;
            }
            CheckSpec::Concavity { t_max, points, .. } => {
                if !(*t_max > 0.0) {
                    return Err(Error::config(format!("{path}.t_max"), "must be > 0"));
                }
                if *points < 5 {
                    return Err(Error::config(format!("{path}.points"), "need at least 5"));
                }
            }
            CheckSpec::Asymptotic { times, .. } => times_ok(times, format!("{path}.times"))?,
            _ => {}
        }
        Ok(())
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| Error::config("$", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if self.name.trim().is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        for (key, axis) in [("grid.x", &self.grid.x), ("grid.y", &self.grid.y)] {
            Axis::new(axis.lo, axis.hi, axis.points).map_err(|e| Error::config(key, e.to_string()))?;
        }
        self.tolerances.check()?;
        match &self.source {
            SourceSpec::Structured { blocks } => {
                StructuredCiState::new(blocks.clone())
                    .map_err(|e| Error::config("source.blocks", e.to_string()))?;
            }
            SourceSpec::RandomStructured { draws } => {
                if *draws == 0 {
                    return Err(Error::config("source.draws", "must be >= 1"));
                }
            }
        }
        if self.checks.is_empty() {
            return Err(Error::config("checks", "no checks listed"));
        }
        for (i, c) in self.checks.iter().enumerate() {
            c.check(&format!("checks[{i}]"))?;
        }
        Ok(())
    }

    /// Replace the point count of both axes.
    pub fn with_grid_points(mut self, points: usize) -> Result<Self> {
        self.grid.x.points = points;
        self.grid.y.points = points;
        self.validate()?;
        Ok(self)
    }
}

/// A bundled scenario.
pub struct Bundled {
    pub name: &'static str,
    pub summary: &'static str,
    text: &'static str,
}

impl Bundled {
    pub fn config(&self) -> Result<ScenarioConfig> {
        ScenarioConfig::from_json(self.text)
    }

    pub fn json(&self) -> &'static str {
        self.text
    }
}

const BUNDLED: &[Bundled] = &[
    Bundled {
        name: "gaussian-equality",
        summary: "trivial M, X ~ N(0,1), Y ~ N(0,4): the Gaussian equality case",
        text: include_str!("../scenarios/gaussian-equality.json"),
    },
    Bundled {
        name: "gaussian-equal-pair",
        summary: "trivial M, X and Y ~ N(0,1): phi is constant at lambda = 1/2",
        text: include_str!("../scenarios/gaussian-equal-pair.json"),
    },
    Bundled {
        name: "qubit-structured",
        summary: "two blocks with qubit_bloch maps on both variables",
        text: include_str!("../scenarios/qubit-structured.json"),
    },
    Bundled {
        name: "qubit-product",
        summary: "one block, qubit (x) qubit conditional states",
        text: include_str!("../scenarios/qubit-product.json"),
    },
    Bundled {
        name: "classical-embedded",
        summary: "classical M: diagonal logistic maps of X in two blocks",
        text: include_str!("../scenarios/classical-embedded.json"),
    },
    Bundled {
        name: "qubit-suite",
        summary: "50 seeded random structured states with blocks up to 2x2",
        text: include_str!("../scenarios/qubit-suite.json"),
    },
];

/// The bundled scenarios, in listing order.
pub fn list_scenarios() -> &'static [Bundled] {
    BUNDLED
}

pub fn bundled(name: &str) -> Result<ScenarioConfig> {
    BUNDLED
        .iter()
        .find(|b| b.name == name)
        .ok_or_else(|| {
            let names: Vec<&str> = BUNDLED.iter().map(|b| b.name).collect();
            Error::config("name", format!("unknown scenario `{name}`; known: {}", names.join(", ")))
        })?
        .config()
}
