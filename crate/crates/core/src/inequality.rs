//! Numerical checks of the conditioned Stam and entropy power inequalities
//! and of the identities used to prove them.
//!
//! Every check returns an [`InequalityReport`] whose `deficit` is oriented so
//! that `deficit >= 0` means the inequality holds. A report passes when
//! `deficit >= -tolerance`; otherwise it is inconclusive when the violation is
//! smaller than the error bar, and fails only beyond it.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::cq::{marginal_x, marginal_y, sum_pushforward, CcqState, CqState};
use crate::entropy::{cmi, entropy_x_given_m, looks_infinite, Estimate, NoiseBundle};
use crate::error::{Error, Result};
use crate::fisher::{default_schedule, fisher_at_time, fisher_debruijn, fisher_mi_ratio, FisherEstimate};
use crate::grid::Axis;
use crate::heat::heat_evolve_cq;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn from_deficit(deficit: f64, tolerance: f64, error_bar: f64) -> Verdict {
        if deficit >= -tolerance {
            Verdict::Pass
        } else if -deficit <= error_bar {
            Verdict::Inconclusive
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    Nats,
    NatsPerTime,
    Relative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub deficit: f64,
    pub units: Units,
    pub tolerance: f64,
    pub error_bar: f64,
    pub verdict: Verdict,
    pub grid: Vec<Axis>,
    pub parameters: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl InequalityReport {
    #[allow(clippy::too_many_arguments)]
    fn new(
        name: &str,
        lhs: f64,
        rhs: f64,
        deficit: f64,
        units: Units,
        tolerance: f64,
        error_bar: f64,
        grid: &[Axis],
    ) -> Self {
        InequalityReport {
            name: name.to_string(),
            lhs,
            rhs,
            deficit,
            units,
            tolerance,
            error_bar,
            verdict: Verdict::from_deficit(deficit, tolerance, error_bar),
            grid: grid.to_vec(),
            parameters: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// Note every conditional entropy too large in magnitude to be trusted as finite.
    fn flag_infinite(mut self, e: &ConditionalEntropies) -> Self {
        for (name, est) in [("S(X|M)", e.x), ("S(Y|M)", e.y), ("S(X+Y|M)", e.sum)] {
            if looks_infinite(est.value) {
                self = self.note(format!("{name} = {} may not be finite", est.value));
            }
        }
        self
    }

    /// Report for `a = b`, with deficit `-|a - b|`.
    fn equality(name: &str, a: f64, b: f64, tolerance: f64, grid: &[Axis]) -> Self {
        InequalityReport::new(name, a, b, -(a - b).abs(), Units::Nats, tolerance, 0.0, grid)
    }
}

/// Tolerances shared by all checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Entropic inequalities, in nats.
    pub entropy: f64,
    /// Fisher inequalities, relative.
    pub fisher_relative: f64,
    /// Largest `I(X:Y|M)` accepted as conditional independence.
    pub ci: f64,
    /// Second differences, flow slopes and the mutual-information chain, in nats.
    pub flow: f64,
    /// Largest final residual of the large-time entropy scaling, in nats.
    pub asymptotic: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            entropy: 1e-3,
            fisher_relative: 0.02,
            ci: 1e-6,
            flow: 1e-4,
            asymptotic: 5e-3,
        }
    }
}

impl Tolerances {
    pub fn check(&self) -> Result<()> {
        let fields = [
            ("entropy", self.entropy),
            ("fisher_relative", self.fisher_relative),
            ("ci", self.ci),
            ("flow", self.flow),
            ("asymptotic", self.asymptotic),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("tolerances.{name}"), format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// `S(X|M)`, `S(Y|M)` and `S(X+Y|M)` with grid-halving error bars.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalEntropies {
    pub x: Estimate,
    pub y: Estimate,
    pub sum: Estimate,
}

/// `J(X|M)`, `J(Y|M)` and `J(X+Y|M)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FisherTriple {
    pub x: FisherEstimate,
    pub y: FisherEstimate,
    pub sum: FisherEstimate,
}

struct Parts {
    x: CqState,
    y: CqState,
    sum: CqState,
}

impl Parts {
    fn of(s: &CcqState) -> Result<Parts> {
        Ok(Parts {
            x: marginal_x(s)?,
            y: marginal_y(s)?,
            sum: sum_pushforward(s)?,
        })
    }

    fn entropies(&self) -> [f64; 3] {
        [
            entropy_x_given_m(&self.x),
            entropy_x_given_m(&self.y),
            entropy_x_given_m(&self.sum),
        ]
    }
}

fn cached<T>(cell: &OnceLock<Result<T>>, init: impl FnOnce() -> Result<T>) -> Result<&T> {
    cell.get_or_init(init).as_ref().map_err(Clone::clone)
}

/// Runs checks on one ccq state, sharing marginals, entropies and Fisher
/// estimates between them.
pub struct Verifier<'a> {
    state: &'a CcqState,
    tol: Tolerances,
    ci: OnceLock<Result<Estimate>>,
    parts: OnceLock<Result<Parts>>,
    entropies: OnceLock<Result<ConditionalEntropies>>,
    fisher: OnceLock<Result<FisherTriple>>,
}

impl<'a> Verifier<'a> {
    pub fn new(state: &'a CcqState, tol: Tolerances) -> Self {
        Verifier {
            state,
            tol,
            ci: OnceLock::new(),
            parts: OnceLock::new(),
            entropies: OnceLock::new(),
            fisher: OnceLock::new(),
        }
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    fn axes(&self) -> &[Axis] {
        self.state.grid().axes()
    }

    /// `I(X:Y|M)` with its error bar.
    pub fn cmi(&self) -> Result<Estimate> {
        cached(&self.ci, || cmi(self.state)).copied()
    }

    /// Fails with [`Error::NotConditionallyIndependent`] unless `I(X:Y|M) <= tol_ci`.
    pub fn require_independent(&self) -> Result<()> {
        let i = self.cmi()?;
        if i.value > self.tol.ci {
            return Err(Error::NotConditionallyIndependent {
                cmi: i.value,
                tolerance: self.tol.ci,
            });
        }
        Ok(())
    }

    fn parts(&self) -> Result<&Parts> {
        cached(&self.parts, || Parts::of(self.state))
    }

    pub fn marginal_x(&self) -> Result<&CqState> {
        Ok(&self.parts()?.x)
    }

    pub fn marginal_y(&self) -> Result<&CqState> {
        Ok(&self.parts()?.y)
    }

    pub fn sum(&self) -> Result<&CqState> {
        Ok(&self.parts()?.sum)
    }

    pub fn entropies(&self) -> Result<ConditionalEntropies> {
        cached(&self.entropies, || {
            let fine = self.parts()?.entropies();
            let coarse = Parts::of(&self.state.halved())?.entropies();
            let est = |k: usize| Estimate {
                value: fine[k],
                error_bar: (fine[k] - coarse[k]).abs(),
            };
            Ok(ConditionalEntropies {
                x: est(0),
                y: est(1),
                sum: est(2),
            })
        })
        .copied()
    }

    pub fn fisher(&self) -> Result<&FisherTriple> {
        cached(&self.fisher, || {
            let p = self.parts()?;
            let f = |s: &CqState| fisher_debruijn(s, &default_schedule(s));
            Ok(FisherTriple {
                x: f(&p.x)?,
                y: f(&p.y)?,
                sum: f(&p.sum)?,
            })
        })
    }

    fn dimension(&self) -> f64 {
        1.0
    }

    /// `I(X:Y|M) <= tol_ci`.
    pub fn conditional_independence(&self) -> Result<InequalityReport> {
        let i = self.cmi()?;
        let r = InequalityReport::new(
            "conditional_independence",
            i.value,
            self.tol.ci,
            self.tol.ci - i.value,
            Units::Nats,
            0.0,
            i.error_bar,
            self.axes(),
        );
        Ok(r)
    }

    /// `exp(2S(X+Y|M)/n) >= exp(2S(X|M)/n) + exp(2S(Y|M)/n)`.
    ///
    /// The deficit is `(n/2) ln(lhs / rhs)`, the linear deficit at the optimal `lambda`.
    pub fn epi(&self) -> Result<InequalityReport> {
        self.require_independent()?;
        let e = self.entropies()?;
        let n = self.dimension();
        let power = |s: f64| (2.0 * s / n).exp();
        let (lhs, rhs) = (power(e.sum.value), power(e.x.value) + power(e.y.value));
        let deficit = 0.5 * n * (lhs / rhs).ln();
        let coarse = {
            let s = |est: Estimate, sign: f64| est.value + sign * est.error_bar;
            // worst case over the halving differences of the three entropies
            let lo = 0.5 * n * (power(s(e.sum, -1.0)) / (power(s(e.x, 1.0)) + power(s(e.y, 1.0)))).ln();
            (deficit - lo).abs()
        };
        let lambda = power(e.x.value) / rhs;
        let linear = linear_epi_deficit(e, lambda, n);
        let mut report = InequalityReport::new(
            "epi",
            lhs,
            rhs,
            deficit,
            Units::Nats,
            self.tol.entropy,
            coarse,
            self.axes(),
        )
        .with("optimal_lambda", lambda)
        .with("s_x_given_m", e.x.value)
        .with("s_y_given_m", e.y.value)
        .with("s_sum_given_m", e.sum.value)
        .with("relative_gap", (lhs - rhs) / rhs)
        .flag_infinite(&e);
        if (linear - deficit).abs() > 1e-9 * (1.0 + deficit.abs()) {
            report = report.note(format!(
                "linear deficit at the optimal lambda is {linear}, expected {deficit}"
            ));
            report.verdict = Verdict::Fail;
        }
        Ok(report)
    }

    /// `S(X+Y|M) >= lambda S(X|M) + (1-lambda) S(Y|M) + n h(lambda) / 2`.
    pub fn linear_epi(&self, lambda: f64) -> Result<InequalityReport> {
        check_lambda(lambda)?;
        self.require_independent()?;
        let e = self.entropies()?;
        let n = self.dimension();
        let deficit = linear_epi_deficit(e, lambda, n);
        let rhs = e.sum.value - deficit;
        let err = e.sum.error_bar + lambda * e.x.error_bar + (1.0 - lambda) * e.y.error_bar;
        Ok(InequalityReport::new(
            "linear_epi",
            e.sum.value,
            rhs,
            deficit,
            Units::Nats,
            self.tol.entropy,
            err,
            self.axes(),
        )
        .with("lambda", lambda)
        .flag_infinite(&e))
    }

    fn fisher_values(&self) -> Result<[(f64, f64); 3]> {
        let f = self.fisher()?;
        let out = [
            (f.x.value, f.x.error_estimate),
            (f.y.value, f.y.error_estimate),
            (f.sum.value, f.sum.error_estimate),
        ];
        for (name, (v, e)) in ["x", "y", "x+y"].iter().zip(out) {
            if v <= e {
                return Err(Error::FisherInconclusive(format!(
                    "J({name}|M) = {v} is within its error bar {e}"
                )));
            }
        }
        Ok(out)
    }

    /// `1/J(X+Y|M) >= 1/J(X|M) + 1/J(Y|M)`, deficit relative to the right side.
    pub fn stam(&self) -> Result<InequalityReport> {
        self.require_independent()?;
        let [(jx, ex), (jy, ey), (js, es)] = self.fisher_values()?;
        let lhs = 1.0 / js;
        let rhs = 1.0 / jx + 1.0 / jy;
        let err = (es / (js * js) + ex / (jx * jx) + ey / (jy * jy)) / rhs;
        Ok(InequalityReport::new(
            "stam",
            lhs,
            rhs,
            (lhs - rhs) / rhs,
            Units::Relative,
            self.tol.fisher_relative,
            err,
            self.axes(),
        )
        .with("j_x", jx)
        .with("j_y", jy)
        .with("j_sum", js)
        .with("optimal_lambda", jy / (jx + jy)))
    }

    /// `J(X+Y|M) <= lambda^2 J(X|M) + (1-lambda)^2 J(Y|M)`, deficit relative to the right side.
    pub fn linear_stam(&self, lambda: f64) -> Result<InequalityReport> {
        check_lambda(lambda)?;
        self.require_independent()?;
        let [(jx, ex), (jy, ey), (js, es)] = self.fisher_values()?;
        let (a, b) = (lambda * lambda, (1.0 - lambda) * (1.0 - lambda));
        let rhs = a * jx + b * jy;
        let err = (es + a * ex + b * ey) / rhs;
        Ok(InequalityReport::new(
            "linear_stam",
            js,
            rhs,
            (rhs - js) / rhs,
            Units::Relative,
            self.tol.fisher_relative,
            err,
            self.axes(),
        )
        .with("lambda", lambda))
    }

    /// Both Fisher estimators agree within the relative Fisher tolerance on `X`, `Y` and `X+Y`.
    pub fn fisher_agreement(&self) -> Result<Vec<InequalityReport>> {
        let p = self.parts()?;
        let f = self.fisher()?;
        let mut out = Vec::new();
        for (name, s, primary) in [("x", &p.x, &f.x), ("y", &p.y, &f.y), ("sum", &p.sum, &f.sum)] {
            let other = fisher_mi_ratio(s, &primary.t_schedule)?;
            let rel = (other.value - primary.value).abs() / primary.value.abs().max(f64::MIN_POSITIVE);
            out.push(
                InequalityReport::new(
                    &format!("fisher_agreement.{name}"),
                    other.value,
                    primary.value,
                    -rel,
                    Units::Relative,
                    self.tol.fisher_relative,
                    0.0,
                    s.grid().axes(),
                )
                .with("mi_ratio", other.value)
                .with("entropy_derivative", primary.value),
            );
        }
        Ok(out)
    }

    /// The four relations `L0 <= L1 = L2 <= L3 = L4` of the mutual-information chain at time `t`.
    pub fn mi_chain(&self, lambda: f64, t: f64) -> Result<Vec<InequalityReport>> {
        self.require_independent()?;
        let lines = mi_chain_lines(self.state, lambda, t)?;
        let tol = self.tol.flow;
        let axes = self.axes();
        let l = lines.lines();
        let tag = |r: InequalityReport| r.with("lambda", lambda).with("t", t);
        let mut out = vec![
            tag(InequalityReport::new("mi_chain.a", l[0], l[1], l[1] - l[0], Units::Nats, tol, 0.0, axes)),
            tag(InequalityReport::equality("mi_chain.b", l[1], l[2], tol, axes)),
            tag(InequalityReport::new("mi_chain.c", l[2], l[3], l[3] - l[2], Units::Nats, tol, 0.0, axes)),
            tag(InequalityReport::equality("mi_chain.d", l[3], l[4], tol, axes)),
        ];
        if t == 0.0 {
            let worst = l[0].abs().max(l[4].abs());
            out.push(tag(InequalityReport::new(
                "mi_chain.vanish",
                l[0],
                l[4],
                -worst,
                Units::Nats,
                1e-8,
                0.0,
                axes,
            )));
        }
        Ok(out)
    }

    /// `phi(t)` on `t_grid`.
    pub fn phi_flow(&self, lambda: f64, t_grid: &[f64]) -> Result<FlowTrace> {
        check_lambda(lambda)?;
        self.require_independent()?;
        if t_grid.len() < 2 || t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid[0] < 0.0 {
            return Err(Error::InvalidSchedule(
                "phi needs at least two strictly increasing nonnegative times".into(),
            ));
        }
        let p = self.parts()?;
        let mut trace = FlowTrace {
            lambda,
            t: t_grid.to_vec(),
            s_sum: Vec::new(),
            s_x: Vec::new(),
            s_y: Vec::new(),
            phi: Vec::new(),
            slopes: Vec::new(),
            limit: phi_limit(lambda, self.dimension()),
        };
        for &t in t_grid {
            let ss = entropy_x_given_m(&heat_evolve_cq(&p.sum, t)?);
            let sx = if lambda > 0.0 {
                entropy_x_given_m(&heat_evolve_cq(&p.x, lambda * t)?)
            } else {
                0.0
            };
            let sy = if lambda < 1.0 {
                entropy_x_given_m(&heat_evolve_cq(&p.y, (1.0 - lambda) * t)?)
            } else {
                0.0
            };
            trace.s_sum.push(ss);
            trace.s_x.push(sx);
            trace.s_y.push(sy);
            trace.phi.push(ss - lambda * sx - (1.0 - lambda) * sy);
        }
        trace.slopes = trace
            .phi
            .windows(2)
            .zip(trace.t.windows(2))
            .map(|(p, t)| (p[1] - p[0]) / (t[1] - t[0]))
            .collect();
        Ok(trace)
    }

    /// Slope, bound and Fisher cross-check reports for `phi`.
    pub fn phi_reports(&self, lambda: f64, t_grid: &[f64]) -> Result<Vec<InequalityReport>> {
        let trace = self.phi_flow(lambda, t_grid)?;
        let axes = self.axes();
        let tol = self.tol.flow;
        let max_slope = trace.slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tag = |r: InequalityReport| r.with("lambda", lambda);
        let last = *trace.phi.last().expect("at least two times");
        let mut out = vec![
            tag(InequalityReport::new("phi.slope", max_slope, 0.0, -max_slope, Units::NatsPerTime, tol, 0.0, axes)),
            tag(InequalityReport::new(
                "phi.monotone",
                last,
                trace.phi[0],
                trace.phi[0] - last,
                Units::Nats,
                tol,
                0.0,
                axes,
            )),
            tag(InequalityReport::new(
                "phi.limit",
                last,
                trace.limit,
                last - trace.limit,
                Units::Nats,
                self.tol.asymptotic,
                0.0,
                axes,
            )),
        ];
        if trace.t.len() >= 3 {
            out.push(tag(self.phi_fisher_crosscheck(&trace)?));
        }
        Ok(out)
    }

    /// Central difference of `phi` at the middle time against
    /// `J(S_t) - lambda^2 J(X_{lambda t}) - (1-lambda)^2 J(Y_{(1-lambda) t})`.
    fn phi_fisher_crosscheck(&self, trace: &FlowTrace) -> Result<InequalityReport> {
        let k = trace.t.len() / 2;
        let k = k.clamp(1, trace.t.len() - 2);
        let (t0, t, t1) = (trace.t[k - 1], trace.t[k], trace.t[k + 1]);
        let fd = (trace.phi[k + 1] - trace.phi[k - 1]) / (t1 - t0);
        let p = self.parts()?;
        let lambda = trace.lambda;
        let js = fisher_at_time(&p.sum, t)?;
        let mut combo = js.value;
        let mut err = js.error_estimate;
        if lambda > 0.0 {
            let jx = fisher_at_time(&p.x, lambda * t)?;
            combo -= lambda * lambda * jx.value;
            err += lambda * lambda * jx.error_estimate;
        }
        if lambda < 1.0 {
            let jy = fisher_at_time(&p.y, (1.0 - lambda) * t)?;
            combo -= (1.0 - lambda).powi(2) * jy.value;
            err += (1.0 - lambda).powi(2) * jy.error_estimate;
        }
        // truncation error of the central difference, from the change in neighbouring slopes
        let curvature = (trace.slopes[k] - trace.slopes[k - 1]).abs();
        let tol = self.tol.fisher_relative * js.value.abs() + self.tol.flow;
        Ok(InequalityReport::new(
            "phi.fisher",
            fd,
            combo,
            -(fd - combo).abs(),
            Units::NatsPerTime,
            tol,
            err + curvature,
            self.axes(),
        )
        .with("t", t))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameters(format!("lambda {lambda} outside [0, 1]")));
    }
    Ok(())
}

fn xlnx(v: f64) -> f64 {
    if v > 0.0 {
        v * v.ln()
    } else {
        0.0
    }
}

/// `-n (lambda ln lambda + (1 - lambda) ln(1 - lambda)) / 2`.
pub fn phi_limit(lambda: f64, n: f64) -> f64 {
    -0.5 * n * (xlnx(lambda) + xlnx(1.0 - lambda))
}

fn linear_epi_deficit(e: ConditionalEntropies, lambda: f64, n: f64) -> f64 {
    e.sum.value - lambda * e.x.value - (1.0 - lambda) * e.y.value - phi_limit(lambda, n)
}

/// Trace of `phi(t) = S(X+Y+sqrt(t)Z|M) - lambda S(X+sqrt(lambda t)Z1|M) - (1-lambda) S(Y+sqrt((1-lambda)t)Z2|M)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub lambda: f64,
    pub t: Vec<f64>,
    pub s_sum: Vec<f64>,
    pub s_x: Vec<f64>,
    pub s_y: Vec<f64>,
    pub phi: Vec<f64>,
    /// Difference quotients between consecutive times.
    pub slopes: Vec<f64>,
    /// Large-time limit of `phi`.
    pub limit: f64,
}

/// The terms of the mutual-information chain at one `(lambda, t)`.
///
/// With `X' = X + lambda sqrt(t) Z` and `Y' = Y + (1 - lambda) sqrt(t) Z`:
/// `l0 = I(X+Y+sqrt(t)Z : Z|M)`, `l1 = I(X'Y' : Z|M)`, `ia = I(X':Z|M)`,
/// `ib = I(Y':Z|M)`, `ic = I(X':Y'|MZ)`, `id = I(X':Y'|M)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiChainLines {
    pub l0: f64,
    pub l1: f64,
    pub ia: f64,
    pub ib: f64,
    pub ic: f64,
    pub id: f64,
}

impl MiChainLines {
    /// `[L0, L1, ia + ib + ic - id, ia + ib + ic, ia + ib]`.
    pub fn lines(&self) -> [f64; 5] {
        [
            self.l0,
            self.l1,
            self.ia + self.ib + self.ic - self.id,
            self.ia + self.ib + self.ic,
            self.ia + self.ib,
        ]
    }
}

/// `lambda = m1 / (m1 + m2)` with `m1 + m2 <= 16`.
fn rational_lambda(lambda: f64) -> Result<(usize, usize)> {
    check_lambda(lambda)?;
    for q in 1..=16usize {
        let p = (lambda * q as f64).round();
        if (p / q as f64 - lambda).abs() < 1e-12 {
            return Ok((p as usize, q - p as usize));
        }
    }
    Err(Error::InvalidParameters(format!(
        "lambda {lambda} is not a fraction with denominator at most 16"
    )))
}

/// Evaluate every term of the chain on one noise lattice shared by all variables.
pub fn mi_chain_lines(s: &CcqState, lambda: f64, t: f64) -> Result<MiChainLines> {
    if !(t >= 0.0) {
        return Err(Error::InvalidSchedule(format!("time must be >= 0, got {t}")));
    }
    let (m1, m2) = rational_lambda(lambda)?;
    let (hx, hy) = (s.x_axis().spacing(), s.y_axis().spacing());
    if (hx - hy).abs() > 1e-9 * hx {
        return Err(Error::IncompatibleGrids("the chain needs equal x and y spacings".into()));
    }
    // a z step moves X by m1 nodes and Y by m2 nodes
    let (hz, k1, k2) = if t == 0.0 {
        (1.0, 0, 0)
    } else {
        ((m1 + m2) as f64 * hx / t.sqrt(), m1, m2)
    };
    let joint = NoiseBundle::new(s.as_cq().clone(), hz, vec![k1, k2])?;
    let bx = NoiseBundle::new(marginal_x(s)?, hz, vec![k1])?;
    let by = NoiseBundle::new(marginal_y(s)?, hz, vec![k2])?;
    let bs = NoiseBundle::new(sum_pushforward(s)?, hz, vec![k1 + k2])?;
    let sz = joint.entropy_z();
    let s_xy = joint.entropy_noisy()?;
    let s_xyz = joint.entropy_noisy_with_z();
    let s_x = bx.entropy_noisy()?;
    let s_xz = bx.entropy_noisy_with_z();
    let s_y = by.entropy_noisy()?;
    let s_yz = by.entropy_noisy_with_z();
    let s_sum = bs.entropy_noisy()?;
    let s_sumz = bs.entropy_noisy_with_z();
    Ok(MiChainLines {
        l0: s_sum + sz - s_sumz,
        l1: s_xy + sz - s_xyz,
        ia: s_x + sz - s_xz,
        ib: s_y + sz - s_yz,
        ic: s_xz + s_yz - s_xyz - sz,
        id: s_x + s_y - s_xy,
    })
}

/// Second differences of `t -> S(X_t|M)` on a uniform grid of at least five times.
pub fn check_concavity(s: &CqState, t_grid: &[f64], tolerance: f64) -> Result<InequalityReport> {
    if t_grid.len() < 5 {
        return Err(Error::InvalidSchedule("concavity needs at least five times".into()));
    }
    let dt = t_grid[1] - t_grid[0];
    if !(dt > 0.0)
        || t_grid[0] < 0.0
        || t_grid.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0))
    {
        return Err(Error::InvalidSchedule("concavity needs a uniform increasing time grid".into()));
    }
    let curve = |s: &CqState| -> Result<Vec<f64>> {
        t_grid.iter().map(|&t| Ok(entropy_x_given_m(&heat_evolve_cq(s, t)?))).collect()
    };
    let second = |c: &[f64]| -> Vec<f64> { c.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect() };
    let fine = second(&curve(s)?);
    let coarse = second(&curve(&s.halved())?);
    let worst = fine.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let err = fine
        .iter()
        .zip(&coarse)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(InequalityReport::new(
        "concavity",
        worst,
        0.0,
        -worst,
        Units::Nats,
        tolerance,
        err,
        s.grid().axes(),
    )
    .with("t_max", *t_grid.last().expect("nonempty"))
    .with("points", t_grid.len() as f64))
}

/// Residuals `S(X_t|M) - (n/2) ln(2 pi e t)` at increasing times.
pub fn asymptotic_residuals(s: &CqState, t_list: &[f64]) -> Result<Vec<f64>> {
    let n = s.grid().dim() as f64;
    t_list
        .iter()
        .map(|&t| {
            let st = entropy_x_given_m(&heat_evolve_cq(s, t)?);
            Ok(st - 0.5 * n * (2.0 * std::f64::consts::PI * std::f64::consts::E * t).ln())
        })
        .collect()
}

/// Residual magnitudes must decrease and end below `bound`.
pub fn check_asymptotic(s: &CqState, t_list: &[f64], bound: f64) -> Result<InequalityReport> {
    if t_list.len() < 2 || t_list.windows(2).any(|w| w[1] <= w[0]) || !(t_list[0] > 0.0) {
        return Err(Error::InvalidSchedule("need increasing positive times".into()));
    }
    if t_list[t_list.len() - 1] / t_list[0] < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidSchedule("times must span at least two decades".into()));
    }
    let res = asymptotic_residuals(s, t_list)?;
    let last = res[res.len() - 1].abs();
    let mut report = InequalityReport::new(
        "asymptotic",
        last,
        bound,
        bound - last,
        Units::Nats,
        0.0,
        0.0,
        s.grid().axes(),
    );
    for (t, r) in t_list.iter().zip(&res) {
        report = report.with(&format!("residual_at_{t}"), *r);
    }
    if res.windows(2).any(|w| w[1].abs() >= w[0].abs()) {
        report.verdict = Verdict::Fail;
        report = report.note("residual magnitudes do not decrease");
    }
    Ok(report)
}

/// `check_epi` with default tolerances.
pub fn check_epi(s: &CcqState) -> Result<InequalityReport> {
    Verifier::new(s, Tolerances::default()).epi()
}

pub fn check_linear_epi(s: &CcqState, lambda: f64) -> Result<InequalityReport> {
    Verifier::new(s, Tolerances::default()).linear_epi(lambda)
}

pub fn check_stam(s: &CcqState) -> Result<InequalityReport> {
    Verifier::new(s, Tolerances::default()).stam()
}

pub fn check_linear_stam(s: &CcqState, lambda: f64) -> Result<InequalityReport> {
    Verifier::new(s, Tolerances::default()).linear_stam(lambda)
}

pub fn check_mi_chain(s: &CcqState, lambda: f64, t: f64) -> Result<Vec<InequalityReport>> {
    Verifier::new(s, Tolerances::default()).mi_chain(lambda, t)
}

pub fn phi_flow(s: &CcqState, lambda: f64, t_grid: &[f64]) -> Result<FlowTrace> {
    Verifier::new(s, Tolerances::default()).phi_flow(lambda, t_grid)
}
