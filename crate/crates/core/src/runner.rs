//! Executes scenario configs and serializes the results.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CheckSpec, ScenarioConfig, SourceSpec, Variable, SCHEMA_VERSION};
use crate::cq::{CcqState, StructuredCiState};
use crate::entropy::{entropy_x_given_m, Estimate};
use crate::error::{Error, Result};
use crate::fisher::fisher_at_time;
use crate::heat::heat_evolve_cq;
use crate::inequality::{check_asymptotic, check_concavity, ConditionalEntropies, FisherTriple, InequalityReport, Verdict, Verifier};
use crate::suite::random_suite;

/// A check that could not be evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckError {
    pub check: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateReport {
    pub id: String,
    pub seed: u64,
    pub dim: usize,
    pub cmi: Option<Estimate>,
    pub entropies: Option<ConditionalEntropies>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fisher: Option<FisherTriple>,
    pub checks: Vec<InequalityReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<CheckError>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
    pub errors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    pub states: Vec<StateReport>,
    pub summary: Summary,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    /// 0 when everything passes, 3 when some checks are inconclusive but none
    /// fail, 2 on any failure or check error.
    pub fn exit_code(&self) -> i32 {
        let s = &self.summary;
        if s.fail > 0 || s.errors > 0 {
            2
        } else if s.inconclusive > 0 {
            3
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("$", e.to_string()))
    }

    /// Every check report across all states.
    pub fn reports(&self) -> impl Iterator<Item = &InequalityReport> {
        self.states.iter().flat_map(|s| s.checks.iter())
    }
}

fn summarize(states: &[StateReport]) -> Summary {
    let mut s = Summary::default();
    for st in states {
        for r in &st.checks {
            match r.verdict {
                Verdict::Pass => s.pass += 1,
                Verdict::Fail => s.fail += 1,
                Verdict::Inconclusive => s.inconclusive += 1,
            }
        }
        s.errors += st.errors.len();
    }
    s
}

/// The structured states a config describes, with their ids.
pub fn scenario_states(cfg: &ScenarioConfig) -> Vec<(String, StructuredCiState)> {
    match &cfg.source {
        SourceSpec::Structured { blocks } => {
            vec![(cfg.name.clone(), StructuredCiState { blocks: blocks.clone() })]
        }
        SourceSpec::RandomStructured { draws } => random_suite(cfg.seed, *draws)
            .into_iter()
            .enumerate()
            .map(|(i, s)| (format!("{}#{i:03}", cfg.name), s))
            .collect(),
    }
}

/// The first state of a config, realized on its grid.
pub fn first_state(cfg: &ScenarioConfig) -> Result<CcqState> {
    let (_, s) = scenario_states(cfg).into_iter().next().expect("validated config has a state");
    s.realize(&cfg.grid.x, &cfg.grid.y)
}

fn variable<'v>(v: &'v Verifier, var: Variable) -> Result<&'v crate::cq::CqState> {
    match var {
        Variable::X => v.marginal_x(),
        Variable::Y => v.marginal_y(),
        Variable::Sum => v.sum(),
    }
}

fn linspace(t_max: f64, points: usize) -> Vec<f64> {
    (0..points).map(|k| t_max * k as f64 / (points - 1) as f64).collect()
}

fn run_check(v: &Verifier, check: &CheckSpec) -> Result<Vec<InequalityReport>> {
    let tol = v.tolerances();
    match check {
        CheckSpec::ConditionalIndependence => Ok(vec![v.conditional_independence()?]),
        CheckSpec::Epi => Ok(vec![v.epi()?]),
        CheckSpec::LinearEpi { lambdas } => lambdas.iter().map(|&l| v.linear_epi(l)).collect(),
        CheckSpec::Stam => Ok(vec![v.stam()?]),
        CheckSpec::LinearStam { lambdas } => lambdas.iter().map(|&l| v.linear_stam(l)).collect(),
        CheckSpec::FisherAgreement => v.fisher_agreement(),
        CheckSpec::MiChain { lambda, times } => {
            let mut out = Vec::new();
            for &t in times {
                out.extend(v.mi_chain(*lambda, t)?);
            }
            Ok(out)
        }
        CheckSpec::Concavity { variable: var, t_max, points } => {
            let s = variable(v, *var)?;
            Ok(vec![check_concavity(s, &linspace(*t_max, *points), tol.flow)?])
        }
        CheckSpec::Asymptotic { variable: var, times } => {
            let s = variable(v, *var)?;
            Ok(vec![check_asymptotic(s, times, tol.asymptotic)?])
        }
        CheckSpec::PhiFlow { lambda, times } => v.phi_reports(*lambda, times),
    }
}

fn uses_fisher(cfg: &ScenarioConfig) -> bool {
    cfg.checks.iter().any(|c| {
        matches!(c, CheckSpec::Stam | CheckSpec::LinearStam { .. } | CheckSpec::FisherAgreement)
    })
}

fn run_state(cfg: &ScenarioConfig, id: String, state: &StructuredCiState) -> StateReport {
    let mut report = StateReport {
        id,
        seed: cfg.seed,
        dim: state.dim(),
        cmi: None,
        entropies: None,
        fisher: None,
        checks: Vec::new(),
        errors: Vec::new(),
    };
    let ccq = match state.realize(&cfg.grid.x, &cfg.grid.y) {
        Ok(s) => s,
        Err(e) => {
            report.errors.push(CheckError {
                check: "realize".into(),
                error: e.to_string(),
            });
            return report;
        }
    };
    let v = Verifier::new(&ccq, cfg.tolerances.clone());
    for check in &cfg.checks {
        match run_check(&v, check) {
            Ok(r) => report.checks.extend(r),
            Err(e) => report.errors.push(CheckError {
                check: check.name().into(),
                error: e.to_string(),
            }),
        }
    }
    report.cmi = v.cmi().ok();
    report.entropies = v.entropies().ok();
    if uses_fisher(cfg) {
        report.fisher = v.fisher().ok().cloned();
    }
    report
}

/// Run every check of `cfg` on every state it describes.
///
/// Check errors are recorded in the state report and do not abort the run.
/// With `parallel`, states run on the rayon pool; the report order is the
/// same either way.
pub fn run_verify(cfg: &ScenarioConfig, parallel: bool) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let states = scenario_states(cfg);
    let reports: Vec<StateReport> = if parallel {
        states.into_par_iter().map(|(id, s)| run_state(cfg, id, &s)).collect()
    } else {
        states.into_iter().map(|(id, s)| run_state(cfg, id, &s)).collect()
    };
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        scenario: cfg.clone(),
        summary: summarize(&reports),
        states: reports,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepQuantity {
    /// `S(X_t|M)`.
    EntropyFlow,
    /// `J(X_t|M)`.
    FisherFlow,
    /// `phi(t)` at the config's phi-flow `lambda`, else 1/2.
    Phi,
}

impl std::str::FromStr for SweepQuantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entropy_flow" => Ok(SweepQuantity::EntropyFlow),
            "fisher_flow" => Ok(SweepQuantity::FisherFlow),
            "phi" => Ok(SweepQuantity::Phi),
            other => Err(Error::config(
                "quantity",
                format!("unknown quantity `{other}`; expected entropy_flow, fisher_flow or phi"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub quantity: SweepQuantity,
    /// `(t, value, error_bar)`.
    pub rows: Vec<(f64, f64, f64)>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value,error_bar\n");
        for (t, v, e) in &self.rows {
            out.push_str(&format!("{t},{v},{e}\n"));
        }
        out
    }
}

/// Evaluate one quantity along the heat flow of the config's first state.
///
/// Entropy and phi error bars are the change under grid halving; Fisher
/// error bars are the extrapolation error estimates.
pub fn run_sweep(cfg: &ScenarioConfig, quantity: SweepQuantity, t_grid: &[f64]) -> Result<SweepTable> {
    cfg.validate()?;
    if t_grid.is_empty() {
        return Err(Error::config("t", "empty time grid"));
    }
    if let Some(i) = t_grid.iter().position(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::config(format!("t[{i}]"), "times must be finite and >= 0"));
    }
    let ccq = first_state(cfg)?;
    let rows = match quantity {
        SweepQuantity::EntropyFlow => {
            let v = Verifier::new(&ccq, cfg.tolerances.clone());
            let x = v.marginal_x()?;
            let coarse = x.halved();
            t_grid
                .iter()
                .map(|&t| {
                    let fine = entropy_x_given_m(&heat_evolve_cq(x, t)?);
                    let half = entropy_x_given_m(&heat_evolve_cq(&coarse, t)?);
                    Ok((t, fine, (fine - half).abs()))
                })
                .collect::<Result<Vec<_>>>()?
        }
        SweepQuantity::FisherFlow => {
            let v = Verifier::new(&ccq, cfg.tolerances.clone());
            let x = v.marginal_x()?;
            t_grid
                .iter()
                .map(|&t| {
                    let j = fisher_at_time(x, t)?;
                    Ok((t, j.value, j.error_estimate))
                })
                .collect::<Result<Vec<_>>>()?
        }
        SweepQuantity::Phi => {
            let lambda = cfg
                .checks
                .iter()
                .find_map(|c| match c {
                    CheckSpec::PhiFlow { lambda, .. } => Some(*lambda),
                    _ => None,
                })
                .unwrap_or(0.5);
            let mut sorted = t_grid.to_vec();
            sorted.sort_by(f64::total_cmp);
            sorted.dedup();
            if sorted.len() < 2 {
                sorted.push(sorted[0] + 1.0);
            }
            let fine = Verifier::new(&ccq, cfg.tolerances.clone()).phi_flow(lambda, &sorted)?;
            let half_state = ccq.halved();
            let coarse = Verifier::new(&half_state, cfg.tolerances.clone()).phi_flow(lambda, &sorted)?;
            t_grid
                .iter()
                .map(|t| {
                    let k = sorted.iter().position(|s| s == t).expect("t is in the sorted grid");
                    (*t, fine.phi[k], (fine.phi[k] - coarse.phi[k]).abs())
                })
                .collect()
        }
    };
    Ok(SweepTable { quantity, rows })
}
