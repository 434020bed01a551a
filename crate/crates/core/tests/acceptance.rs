//! Acceptance criteria, one printed line each.
//!
//! Runs without the libtest harness so the lines are never captured; the
//! process exits nonzero if any criterion fails.

use std::f64::consts::{LN_2, PI};
use std::time::Instant;

use cqepi::config::{bundled, list_scenarios};
use cqepi::cq::{average_state, embed_classical, make_ccq, marginal_x, sum_pushforward, CcqState, CqState};
use cqepi::entropy::{cmi, entropy_x_given_m};
use cqepi::family::StateFamilySpec;
use cqepi::fisher::{default_schedule, fisher_debruijn, fisher_mi_ratio};
use cqepi::grid::{gaussian_density, Axis, DensitySpec, Grid, GridDensity, MixtureComponent};
use cqepi::heat::{heat_evolve_ccq_x, heat_evolve_ccq_y, heat_evolve_cq, heat_evolve_density};
use cqepi::inequality::{asymptotic_residuals, phi_flow, InequalityReport, Verdict, Verifier};
use cqepi::quantum::{tensor, DensityMatrix};
use cqepi::runner::{first_state, run_verify, RunReport};

const EPI_RELATIVE: f64 = 1e-3;
const EPI_SECONDS: f64 = 5.0;
const ORACLE_ENTROPY: f64 = 1e-5;
const ORACLE_FISHER: f64 = 0.02;
const FISHER_CLOSED_FORM: f64 = 0.01;
const STAM_GAUSSIAN: f64 = 0.02;
const CONCAVITY: f64 = 1e-4;
const RESIDUAL_RELATIVE: f64 = 0.1;
const CHAIN: f64 = 1e-4;
const CHAIN_ENDS: f64 = 1e-8;
const PHI_SLOPE: f64 = 1e-4;
const PHI_START_SLACK: f64 = 5e-3;
const PHI_CONSTANT: f64 = 1e-3;
const SEMIGROUP: f64 = 1e-7;
const SUM_COMMUTES: f64 = 1e-6;
const SUITE_SECONDS: f64 = 300.0;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn checks<'a>(run: &'a [RunReport], scenario: &'a str, prefix: &'a str) -> impl Iterator<Item = &'a InequalityReport> {
    run.iter()
        .filter(move |r| scenario.is_empty() || r.scenario.name == scenario)
        .flat_map(|r| r.reports())
        .filter(move |c| c.name.starts_with(prefix))
}

fn gaussian_epi() -> Outcome {
    let cfg = bundled("gaussian-equality").map_err(|e| e.to_string())?;
    let start = Instant::now();
    let s = first_state(&cfg).map_err(|e| e.to_string())?;
    let r = Verifier::new(&s, cfg.tolerances.clone()).epi().map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let rel = ((r.lhs - r.rhs) / r.rhs).abs();
    ensure(
        rel <= EPI_RELATIVE && secs < EPI_SECONDS && cfg.grid.x.points == 1024,
        format!("|lhs - rhs| / rhs = {rel:.2e} (<= {EPI_RELATIVE:e}) in {secs:.2}s (< {EPI_SECONDS}s)"),
    )
}

fn logistic(a: f64, x: f64) -> f64 {
    1.0 / (1.0 + (-a * x).exp())
}

/// Classical `M` driven by a logistic of `X` or of `X + Y`, against direct grid sums.
fn classical_oracle() -> Outcome {
    let axis = Axis::new(-8.0, 8.0, 256).map_err(|e| e.to_string())?;
    let h = axis.spacing();
    let xs = axis.coords();
    let a = 1.7;

    // S(X|M) and J(X|M) for X ~ N(0,1), q(0|x) = logistic(a x)
    let p = gaussian_density(&[0.0], &[vec![1.0]], &Grid::one(axis.clone())).map_err(|e| e.to_string())?;
    let q0: Vec<f64> = xs.iter().map(|&x| logistic(a, x)).collect();
    let q1: Vec<f64> = q0.iter().map(|v| 1.0 - v).collect();
    let s = embed_classical(&[q0.clone(), q1.clone()], &p).map_err(|e| e.to_string())?;
    let mut h_xm = 0.0;
    let mut pm = [0.0; 2];
    for (i, &pi) in p.values().iter().enumerate() {
        for (m, q) in [&q0, &q1].into_iter().enumerate() {
            let w = pi * q[i];
            if w > 0.0 {
                h_xm -= w * w.ln() * h;
            }
            pm[m] += w * h;
        }
    }
    let h_m: f64 = -pm.iter().map(|v| v * v.ln()).sum::<f64>();
    let s_oracle = h_xm - h_m;
    let s_err = (entropy_x_given_m(&s) - s_oracle).abs();

    // score of p(x|m): -x + d/dx ln q(m|x); J = (1/2) sum_m int p q (score)^2 under the variance-t convention
    let fine = Axis::new(-12.0, 12.0, 20001).map_err(|e| e.to_string())?;
    let mut j_oracle = 0.0;
    for x in fine.coords() {
        let px = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        let l = logistic(a, x);
        j_oracle += px * l * (-x + a * (1.0 - l)).powi(2) * fine.spacing();
        j_oracle += px * (1.0 - l) * (-x - a * l).powi(2) * fine.spacing();
    }
    j_oracle *= 0.5;
    let j = fisher_debruijn(&s, &default_schedule(&s)).map_err(|e| e.to_string())?.value;
    let j_err = (j - j_oracle).abs() / j_oracle;

    // I(X:Y|M) = sum p(x,y,m) ln(p(x,y,m) p(m) / (p(x,m) p(y,m))) with q(0|x,y) = logistic(a (x + y)), X, Y iid N(0,1) on a coarser joint grid
    let ax = Axis::new(-8.0, 8.0, 128).map_err(|e| e.to_string())?;
    let hj = ax.spacing();
    let joint = gaussian_density(&[0.0, 0.0], &[vec![1.0, 0.0], vec![0.0, 1.0]], &Grid::two(ax.clone(), ax.clone()))
        .map_err(|e| e.to_string())?;
    let ccq = make_ccq(joint.clone(), 2, |x, y| {
        let l = logistic(a, x + y);
        DensityMatrix::from_diagonal(&[l, 1.0 - l])
    })
    .map_err(|e| e.to_string())?;
    let n = ax.points;
    let c = ax.coords();
    let mut i_oracle = 0.0;
    for m in 0..2 {
        let mut pxy = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let l = logistic(a, c[i] + c[k]);
                pxy[i * n + k] = joint.values()[i * n + k] * if m == 0 { l } else { 1.0 - l };
            }
        }
        let px: Vec<f64> = (0..n).map(|i| (0..n).map(|k| pxy[i * n + k]).sum::<f64>() * hj).collect();
        let py: Vec<f64> = (0..n).map(|k| (0..n).map(|i| pxy[i * n + k]).sum::<f64>() * hj).collect();
        let pm: f64 = px.iter().sum::<f64>() * hj;
        for i in 0..n {
            for k in 0..n {
                let v = pxy[i * n + k];
                if v > 0.0 {
                    i_oracle += v * (v * pm / (px[i] * py[k])).ln() * hj * hj;
                }
            }
        }
    }
    let i_val = cmi(&ccq).map_err(|e| e.to_string())?.value;
    let i_err = (i_val - i_oracle).abs();
    ensure(
        s_err <= ORACLE_ENTROPY && i_err <= ORACLE_ENTROPY && j_err <= ORACLE_FISHER,
        format!("S(X|M) off by {s_err:.1e}, I(X:Y|M) off by {i_err:.1e} (<= {ORACLE_ENTROPY:e}); J(X|M) off by {:.2}% (<= 2%)", 100.0 * j_err),
    )
}

fn fisher_closed_form(run: &[RunReport]) -> Outcome {
    let axis = Axis::new(-10.0, 10.0, 1024).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for var in [0.5, 1.0, 4.0] {
        let p = gaussian_density(&[0.0], &[vec![var]], &Grid::one(axis.clone())).map_err(|e| e.to_string())?;
        let s = CqState::trivial(p);
        let sched = default_schedule(&s);
        let exact = 0.5 / var;
        for j in [fisher_mi_ratio(&s, &sched), fisher_debruijn(&s, &sched)] {
            let j = j.map_err(|e| e.to_string())?.value;
            worst = worst.max((j - exact).abs() / exact);
        }
    }
    let agreement: Vec<&InequalityReport> = checks(run, "", "fisher_agreement").collect();
    let covered = run.iter().all(|r| r.reports().any(|c| c.name.starts_with("fisher_agreement")));
    let max_rel = agreement.iter().map(|c| -c.deficit).fold(0.0, f64::max);
    let agree = agreement.iter().all(|c| c.verdict == Verdict::Pass) && covered;
    ensure(
        worst <= FISHER_CLOSED_FORM && agree,
        format!(
            "closed form off by {:.2}% (<= 1%); estimators differ by at most {:.2e} over {} reports in every scenario (<= 2%)",
            100.0 * worst,
            max_rel,
            agreement.len()
        ),
    )
}

fn stam(run: &[RunReport]) -> Outcome {
    let gaussian: Vec<f64> = ["gaussian-equality", "gaussian-equal-pair"]
        .iter()
        .flat_map(|n| checks(run, n, "stam"))
        .map(|c| c.deficit.abs())
        .collect();
    let worst = gaussian.iter().copied().fold(0.0, f64::max);
    let linear: Vec<&InequalityReport> = checks(run, "qubit-suite", "linear_stam").collect();
    let lambdas: std::collections::BTreeSet<u64> = linear.iter().map(|c| (c.parameters["lambda"] * 4.0) as u64).collect();
    let fails = linear.iter().filter(|c| c.verdict == Verdict::Fail).count();
    ensure(
        gaussian.len() == 2 && worst <= STAM_GAUSSIAN && linear.len() == 250 && lambdas.len() == 5 && fails == 0,
        format!(
            "Gaussian harmonic deficit {:.2e} (<= {STAM_GAUSSIAN}); {} linear Stam reports on the suite, {fails} fail",
            worst,
            linear.len()
        ),
    )
}

fn concavity(run: &[RunReport]) -> Outcome {
    let reports: Vec<&InequalityReport> = checks(run, "", "concavity").collect();
    let covered = run.iter().all(|r| {
        r.states.iter().all(|s| {
            s.checks
                .iter()
                .any(|c| c.name == "concavity" && c.parameters["points"] == 21.0 && c.parameters["t_max"] == 10.0)
        })
    });
    let worst = reports.iter().map(|c| c.lhs).fold(f64::NEG_INFINITY, f64::max);
    ensure(
        covered && worst <= CONCAVITY,
        format!("largest second difference {worst:.2e} over {} curves (<= {CONCAVITY:e})", reports.len()),
    )
}

fn asymptotic() -> Outcome {
    let g = bundled("gaussian-equality").map_err(|e| e.to_string())?;
    let gs = first_state(&g).map_err(|e| e.to_string())?;
    let gx = marginal_x(&gs).map_err(|e| e.to_string())?;
    let r100 = asymptotic_residuals(&gx, &[100.0]).map_err(|e| e.to_string())?[0];
    let expected = 0.5 * 1.01f64.ln();
    let rel = (r100 - expected).abs() / expected;
    let q = bundled("qubit-structured").map_err(|e| e.to_string())?;
    let qs = first_state(&q).map_err(|e| e.to_string())?;
    let qx = marginal_x(&qs).map_err(|e| e.to_string())?;
    let res = asymptotic_residuals(&qx, &[10.0, 100.0, 1000.0]).map_err(|e| e.to_string())?;
    let decreasing = res.windows(2).all(|w| w[1].abs() < w[0].abs());
    ensure(
        rel <= RESIDUAL_RELATIVE && decreasing,
        format!(
            "Gaussian residual at t=100 is {r100:.6} vs {expected:.6} ({:.2}% off, <= 10%); qubit |residuals| {:.2e}, {:.2e}, {:.2e}",
            100.0 * rel,
            res[0].abs(),
            res[1].abs(),
            res[2].abs()
        ),
    )
}

fn mi_chain(run: &[RunReport]) -> Outcome {
    let mut n = 0;
    let mut worst = 0.0f64;
    let mut ends = 0.0f64;
    let mut ok = true;
    for scenario in ["gaussian-equality", "gaussian-equal-pair", "qubit-structured"] {
        let reports: Vec<&InequalityReport> = checks(run, scenario, "mi_chain").collect();
        let times: std::collections::BTreeSet<u64> = reports.iter().map(|c| (c.parameters["t"] * 100.0).round() as u64).collect();
        ok &= times.into_iter().collect::<Vec<_>>() == [0, 5, 10];
        ok &= reports.iter().all(|c| c.parameters["lambda"] == 0.5 && c.verdict == Verdict::Pass);
        for c in &reports {
            if c.name == "mi_chain.vanish" {
                ends = ends.max(-c.deficit);
            } else {
                worst = worst.max(-c.deficit);
            }
        }
        ok &= reports.iter().any(|c| c.name == "mi_chain.vanish");
        n += reports.len();
    }
    ensure(
        ok && worst <= CHAIN && ends <= CHAIN_ENDS,
        format!("{n} relations, largest violation {worst:.2e} (<= {CHAIN:e}); ends at t=0 within {ends:.1e} (<= {CHAIN_ENDS:e})"),
    )
}

fn phi(run: &[RunReport]) -> Outcome {
    let slopes: Vec<&InequalityReport> = checks(run, "qubit-suite", "phi.slope").collect();
    let max_slope = slopes.iter().map(|c| c.lhs).fold(f64::NEG_INFINITY, f64::max);
    let min_start = checks(run, "qubit-suite", "phi.monotone")
        .map(|c| c.rhs)
        .fold(f64::INFINITY, f64::min);
    let cfg = bundled("gaussian-equal-pair").map_err(|e| e.to_string())?;
    let s = first_state(&cfg).map_err(|e| e.to_string())?;
    let trace = phi_flow(&s, 0.5, &[0.0, 0.5, 1.0, 2.0, 4.0]).map_err(|e| e.to_string())?;
    let spread = trace.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - trace.phi.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(
        slopes.len() == 50 && max_slope <= PHI_SLOPE && min_start >= LN_2 / 2.0 - PHI_START_SLACK && spread <= PHI_CONSTANT,
        format!(
            "max slope {max_slope:.2e} (<= {PHI_SLOPE:e}); min phi(0) {min_start:.4} (>= {:.4}); equal-Gaussian spread {spread:.1e} (<= {PHI_CONSTANT:e})",
            LN_2 / 2.0 - PHI_START_SLACK
        ),
    )
}

fn qubit_ccq() -> Result<CcqState, cqepi::Error> {
    let ax = Axis::new(-8.0, 8.0, 160)?;
    let joint = gaussian_density(&[0.3, -0.2], &[vec![1.0, 0.0], vec![0.0, 0.7]], &Grid::two(ax.clone(), ax))?;
    let fx = StateFamilySpec::QubitBloch { alpha: 1.0, beta: 1.5, gamma: 0.3, mixedness: 0.1 };
    let fy = StateFamilySpec::QubitBloch { alpha: 0.7, beta: 1.0, gamma: -0.5, mixedness: 0.2 };
    make_ccq(joint, 4, |x, y| Ok(tensor(&fx.state_at(x), &fy.state_at(y))))
}

fn semigroup() -> Outcome {
    let p: GridDensity = DensitySpec::Mixture {
        components: vec![
            MixtureComponent { weight: 0.4, mean: -1.5, variance: 0.5 },
            MixtureComponent { weight: 0.6, mean: 1.0, variance: 1.0 },
        ],
    }
    .build(&Axis::new(-10.0, 10.0, 1024).map_err(|e| e.to_string())?)
    .map_err(|e| e.to_string())?;
    let run = || -> Result<(f64, f64), cqepi::Error> {
        let two = heat_evolve_density(&heat_evolve_density(&p, 0.7)?, 1.3)?;
        let one = heat_evolve_density(&p, 2.0)?;
        let comp = two.sup_distance_on_common(&one).unwrap_or(f64::INFINITY);
        let s = qubit_ccq()?;
        let (lambda, t) = (0.5, 0.6);
        let parts = heat_evolve_ccq_y(&heat_evolve_ccq_x(&s, lambda * t)?, (1.0 - lambda) * t)?;
        let a = sum_pushforward(&parts)?;
        let b = heat_evolve_cq(&sum_pushforward(&s)?, t)?;
        let dens = a.density().sup_distance_on_common(b.density()).unwrap_or(f64::INFINITY);
        let avg = (average_state(&a)?.matrix() - average_state(&b)?.matrix())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        Ok((comp, dens.max(avg)))
    };
    let (comp, sum) = run().map_err(|e| e.to_string())?;
    ensure(
        comp <= SEMIGROUP && sum <= SUM_COMMUTES,
        format!("composition {comp:.1e} (<= {SEMIGROUP:e}); evolve-then-sum vs sum-then-evolve {sum:.1e} (<= {SUM_COMMUTES:e})"),
    )
}

fn full_suite(run: &[RunReport], secs: f64) -> Outcome {
    let fails: usize = run.iter().map(|r| r.summary.fail).sum();
    let errors: usize = run.iter().map(|r| r.summary.errors).sum();
    let inconclusive: usize = run.iter().map(|r| r.summary.inconclusive).sum();
    let total: usize = run.iter().map(|r| r.reports().count()).sum();
    ensure(
        run.len() == list_scenarios().len() && fails == 0 && errors == 0 && secs < SUITE_SECONDS,
        format!(
            "{} scenarios, {total} reports: {fails} fail, {errors} errors, {inconclusive} inconclusive in {secs:.1}s (< {SUITE_SECONDS}s)",
            run.len()
        ),
    )
}

fn main() {
    let start = Instant::now();
    let run: Vec<RunReport> = list_scenarios()
        .iter()
        .map(|b| run_verify(&b.config().expect("bundled config"), false).expect("valid config"))
        .collect();
    let suite_secs = start.elapsed().as_secs_f64();

    let criteria: Vec<(&str, Outcome)> = vec![
        ("gaussian epi equality", gaussian_epi()),
        ("classical oracle", classical_oracle()),
        ("fisher closed form and estimator agreement", fisher_closed_form(&run)),
        ("stam equality and linear stam suite", stam(&run)),
        ("concavity", concavity(&run)),
        ("asymptotic scaling", asymptotic()),
        ("mutual information chain", mi_chain(&run)),
        ("phi flow", phi(&run)),
        ("semigroup and sum commutation", semigroup()),
        ("full default suite", full_suite(&run, suite_secs)),
    ];
    let mut failed = 0;
    for (i, (name, outcome)) in criteria.iter().enumerate() {
        let (tag, msg) = match outcome {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!("criterion {:>2} {tag} {name}: {msg}", i + 1);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
