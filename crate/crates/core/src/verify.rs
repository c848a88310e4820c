//! Verification suites producing machine-readable reports.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::comparison::{distortion_coefficient, jacobian_estimate_check, s_matrix, w_matrix, w_window};
use crate::cost::{action_eval, cost_matrices, subadditivity_gap};
use crate::dynamics::{kalman_rank, LqProblem};
use crate::entropy::{dc_membership, density_inequality_check, entropic_inequality_check, DcFunction};
use crate::error::{Error, Result};
use crate::interpolation::Measure;
use crate::io::problem_hash;
use crate::numerics::Matrix;
use crate::ot_discrete::{brute_force_oracle, solve_kantorovich, verify_cyclical_monotonicity, DiscreteMeasure};
use crate::ot_gaussian::{pushforward_moments, GaussianMeasure, LqGaussianTransport};
use crate::sampling::{random_spd, random_vector, random_weights};

/// Samples per entropic check.
pub const VERIFY_MC_SAMPLES: usize = 10_000;

/// Samples per density check.
pub const VERIFY_DENSITY_SAMPLES: usize = 500;

const DEFAULT_TOLERANCES: &[(&str, f64)] = &[
    ("symplectic", 1e-9),
    ("reflection", 1e-9),
    ("backwards", 1e-9),
    ("exp_map", 1e-9),
    ("cost_action", 1e-6),
    ("cost_homogeneity", 1e-9),
    ("cost_symmetry", 1e-9),
    ("subadditivity", 1e-9),
    ("ot_oracle", 1e-9),
    ("ot_duality", 1e-9),
    ("ot_marginals", 1e-9),
    ("cyclical", 1e-9),
    ("gaussian_pushforward", 1e-9),
    ("distortion", 1e-9),
    ("w_symmetry", 1e-9),
    ("w_psd", 1e-9),
    ("riccati", 1e-6),
    ("s_symmetry", 1e-9),
    ("s_monotone", 1e-7),
    ("jacobian", 1e-8),
    ("density", 1e-8),
    ("entropic_sigmas", 3.0),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances(BTreeMap<String, f64>);

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances(DEFAULT_TOLERANCES.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }
}

impl Tolerances {
    pub fn get(&self, name: &str) -> f64 {
        self.0[name]
    }

    /// Overrides a known tolerance.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::Argument(format!("tolerance {name} must be a non-negative real")));
        }
        match self.0.get_mut(name) {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => Err(Error::Argument(format!(
                "unknown tolerance '{name}' (known: {})",
                self.0.keys().cloned().collect::<Vec<_>>().join(", ")
            ))),
        }
    }

    /// Parses `name=value`.
    pub fn apply_override(&mut self, entry: &str) -> Result<()> {
        let (name, value) = entry
            .split_once('=')
            .ok_or_else(|| Error::Argument(format!("expected name=value, got '{entry}'")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Argument(format!("tolerance value '{value}' is not a number")))?;
        self.set(name.trim(), value)
    }

    pub fn as_map(&self) -> &BTreeMap<String, f64> {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= tolerance` (residuals, magnitudes).
    pub fn bound(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, tolerance, pass: value <= tolerance }
    }

    /// Passes when `value >= -tolerance` (inequality slacks).
    pub fn slack(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, tolerance, pass: value >= -tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub problem_hash: String,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub summary: Summary,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.summary.pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Dynamics,
    Cost,
    Ot,
    Comparison,
    Entropy,
    All,
}

impl Suite {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "dynamics" => Suite::Dynamics,
            "cost" => Suite::Cost,
            "ot" => Suite::Ot,
            "comparison" => Suite::Comparison,
            "entropy" => Suite::Entropy,
            "all" => Suite::All,
            other => {
                return Err(Error::Argument(format!(
                    "unknown suite '{other}' (dynamics, cost, ot, comparison, entropy, all)"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Dynamics => "dynamics",
            Suite::Cost => "cost",
            Suite::Ot => "ot",
            Suite::Comparison => "comparison",
            Suite::Entropy => "entropy",
            Suite::All => "all",
        }
    }
}

/// Optional user measures. Discrete ones feed the OT checks, Gaussian ones
/// the transport, comparison and entropy checks.
#[derive(Debug, Clone, Default)]
pub struct VerifyInputs {
    pub mu: Option<Measure>,
    pub nu: Option<Measure>,
}

struct Ctx<'a> {
    problem: &'a LqProblem,
    tol: &'a Tolerances,
    seed: u64,
    inputs: &'a VerifyInputs,
}

impl Ctx<'_> {
    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn taus(&self, count: usize) -> Vec<f64> {
        let t = self.problem.horizon();
        (1..=count).map(|k| t * k as f64 / count as f64).collect()
    }

    fn gaussian_pair(&self) -> Result<(GaussianMeasure, GaussianMeasure)> {
        let n = self.problem.dim();
        let mut rng = self.rng(7);
        let mut draw = || GaussianMeasure::new(random_vector(&mut rng, n), random_spd(&mut rng, n, 0.2).into_inner());
        let mu = match &self.inputs.mu {
            Some(Measure::Gaussian(g)) => g.clone(),
            _ => draw()?,
        };
        let nu = match &self.inputs.nu {
            Some(Measure::Gaussian(g)) => g.clone(),
            _ => draw()?,
        };
        for g in [&mu, &nu] {
            if g.dim() != n {
                return Err(Error::Dimension(format!("measure dimension {} differs from problem dimension {n}", g.dim())));
            }
        }
        Ok((mu, nu))
    }
}

fn scale(m: &Matrix) -> f64 {
    m.amax().max(1.0)
}

fn dynamics_checks(ctx: &Ctx, out: &mut Vec<Check>) -> Result<()> {
    let p = ctx.problem;
    let n = p.dim();
    out.push(Check::bound("kalman_rank_deficit", (n - kalman_rank(p.a(), p.b())) as f64, 0.0));
    let (mut sym, mut refl, mut back) = (0.0f64, 0.0f64, 0.0f64);
    let bw = p.backwards();
    for tau in ctx.taus(8) {
        let fb = p.flow_blocks(tau);
        let s = scale(&fb.assemble());
        sym = sym.max(fb.symplectic_residual() / (s * s));
        let rf = p.flow_blocks(-tau);
        refl = refl.max(fb.reflection_residual(&rf) / s);
        let bb = bw.flow_blocks(tau);
        let e = (&bb.r1 - &rf.r1)
            .amax()
            .max((&bb.r2 + &rf.r2).amax())
            .max((&bb.r3 + &rf.r3).amax())
            .max((&bb.r4 - &rf.r4).amax());
        back = back.max(e / s);
    }
    out.push(Check::bound("flow_symplectic_residual", sym, ctx.tol.get("symplectic")));
    out.push(Check::bound("flow_reflection_residual", refl, ctx.tol.get("reflection")));
    out.push(Check::bound("backwards_flow_residual", back, ctx.tol.get("backwards")));

    let mut rng = ctx.rng(1);
    let mut err = 0.0f64;
    for _ in 0..5 {
        let x = random_vector(&mut rng, n);
        let y = random_vector(&mut rng, n);
        let pv = p.exp_map_inverse(&x, &y, p.horizon())?;
        let back = p.exp_map(&x, &pv, p.horizon())?;
        err = err.max((back - &y).amax() / y.amax().max(1.0));
    }
    out.push(Check::bound("exp_map_round_trip", err, ctx.tol.get("exp_map")));
    Ok(())
}

fn cost_checks(ctx: &Ctx, out: &mut Vec<Check>) -> Result<()> {
    let p = ctx.problem;
    let n = p.dim();
    let t = p.horizon();
    let cm = cost_matrices(p, 0.0, t)?;
    let bw = cost_matrices(&p.backwards(), 0.0, t)?;
    let mut rng = ctx.rng(2);
    let (mut act, mut hom, mut sym, mut min_gap, mut eq) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY, 0.0f64);
    for _ in 0..5 {
        let x = random_vector(&mut rng, n);
        let y = random_vector(&mut rng, n);
        let z = random_vector(&mut rng, n);
        let c = cm.eval(&x, &y);
        let unit = c.abs().max(1.0);
        let traj = p.optimal_trajectory(&x, &y, 0.0, t, 2049)?;
        act = act.max((action_eval(p, &traj)? - c).abs() / unit);
        hom = hom.max((cm.eval(&(&x * 2.5), &(&y * 2.5)) - 6.25 * c).abs() / (6.25 * unit));
        sym = sym.max((bw.eval(&y, &x) - c).abs() / unit);
        min_gap = min_gap.min(subadditivity_gap(p, &x, &z, &y, 0.0, 0.4 * t, t)? / unit);
        let mid = p.optimal_trajectory(&x, &y, 0.0, t, 5)?;
        eq = eq.max(subadditivity_gap(p, &x, &mid.states[2], &y, 0.0, 0.5 * t, t)?.abs() / unit);
    }
    out.push(Check::bound("cost_vs_action", act, ctx.tol.get("cost_action")));
    out.push(Check::bound("cost_homogeneity", hom, ctx.tol.get("cost_homogeneity")));
    out.push(Check::bound("cost_backwards_symmetry", sym, ctx.tol.get("cost_symmetry")));
    out.push(Check::slack("subadditivity_min_gap", min_gap, ctx.tol.get("subadditivity")));
    out.push(Check::bound("subadditivity_equality_on_geodesic", eq, ctx.tol.get("subadditivity")));
    Ok(())
}

fn discrete_pair(ctx: &Ctx) -> Option<(DiscreteMeasure, DiscreteMeasure)> {
    match (&ctx.inputs.mu, &ctx.inputs.nu) {
        (Some(Measure::Discrete(a)), Some(Measure::Discrete(b))) => Some((a.clone(), b.clone())),
        _ => None,
    }
}

fn ot_checks(ctx: &Ctx, out: &mut Vec<Check>) -> Result<()> {
    let p = ctx.problem;
    let n = p.dim();
    let cm = cost_matrices(p, 0.0, p.horizon())?;
    let mut rng = ctx.rng(3);

    let xs: Vec<_> = (0..6).map(|_| random_vector(&mut rng, n)).collect();
    let ys: Vec<_> = (0..6).map(|_| random_vector(&mut rng, n)).collect();
    let cost = cm.pairwise(&xs, &ys);
    let sol = solve_kantorovich(&cost, &DiscreteMeasure::uniform(xs.clone())?, &DiscreteMeasure::uniform(ys.clone())?)?;
    let (_, brute) = brute_force_oracle(&cost)?;
    out.push(Check::bound(
        "lp_vs_brute_force",
        (sol.total_cost - brute).abs() / brute.abs().max(1.0),
        ctx.tol.get("ot_oracle"),
    ));

    let (mu, nu) = match discrete_pair(ctx) {
        Some(pair) => pair,
        None => {
            let pts: Vec<_> = (0..6).map(|_| random_vector(&mut rng, n)).collect();
            let w = random_weights(&mut rng, 6);
            let qts: Vec<_> = (0..5).map(|_| random_vector(&mut rng, n)).collect();
            let v = random_weights(&mut rng, 5);
            (DiscreteMeasure::new(pts, w)?, DiscreteMeasure::new(qts, v)?)
        }
    };
    if mu.dim() != n || nu.dim() != n {
        return Err(Error::Dimension("discrete measures must match the problem dimension".into()));
    }
    let cost = cm.pairwise(mu.points(), nu.points());
    let sol = solve_kantorovich(&cost, &mu, &nu)?;
    let unit = sol.total_cost.abs().max(1.0);
    let dual = sol.potentials.dual_value(mu.weights(), nu.weights());
    out.push(Check::bound("duality_gap", (dual - sol.total_cost).abs() / unit, ctx.tol.get("ot_duality")));
    out.push(Check::bound(
        "dual_feasibility_violation",
        sol.potentials.feasibility_violation(&cost) / unit,
        ctx.tol.get("ot_duality"),
    ));
    out.push(Check::bound(
        "plan_marginal_residual",
        sol.plan.marginal_residual(mu.weights(), nu.weights()),
        ctx.tol.get("ot_marginals"),
    ));
    let support = sol.plan.support().len();
    let max_len = match support {
        0..=12 => 5,
        13..=40 => 3,
        _ => 2,
    };
    let gap = verify_cyclical_monotonicity(&sol.plan, &cost, max_len)?.map_or(0.0, |v| -v.gap);
    out.push(Check::slack("cyclical_monotonicity_gap", gap / unit, ctx.tol.get("cyclical")));

    let (gm, gn) = ctx.gaussian_pair()?;
    let tr = LqGaussianTransport::new(p, &gm, &gn, 0.0, p.horizon())?;
    let (m, c) = pushforward_moments(&tr.map, &gm);
    let res = (m - gn.mean()).amax().max((c - gn.cov().as_matrix()).amax()) / scale(gn.cov().as_matrix());
    out.push(Check::bound("gaussian_map_pushforward", res, ctx.tol.get("gaussian_pushforward")));
    Ok(())
}

fn comparison_checks(ctx: &Ctx, out: &mut Vec<Check>) -> Result<()> {
    let p = ctx.problem;
    let t = p.horizon();
    let taus = ctx.taus(16);
    let betas: Vec<f64> = taus.iter().map(|&tau| distortion_coefficient(p, tau)).collect::<Result<_>>()?;
    out.push(Check::bound("distortion_at_horizon", (betas[betas.len() - 1] - 1.0).abs(), ctx.tol.get("distortion")));
    let range = betas.iter().map(|b| (-b).max(b - 1.0)).fold(f64::NEG_INFINITY, f64::max);
    out.push(Check::bound("distortion_outside_unit_interval", range.max(0.0), ctx.tol.get("distortion")));

    let window = w_window(p);
    let (mut wsym, mut wmin, mut ric) = (0.0f64, f64::INFINITY, 0.0f64);
    for frac in [0.25, 0.5, 0.75] {
        let r = w_matrix(p, frac * window)?;
        let s = scale(&r.w);
        wsym = wsym.max(r.symmetry_residual / s);
        wmin = wmin.min(r.min_eigenvalue / s);
        ric = ric.max(r.riccati_residual);
    }
    out.push(Check::bound("w_symmetry_residual", wsym, ctx.tol.get("w_symmetry")));
    out.push(Check::slack("w_min_eigenvalue", wmin, ctx.tol.get("w_psd")));
    out.push(Check::bound("w_riccati_residual", ric, ctx.tol.get("riccati")));

    let (mut ssym, mut stop) = (0.0f64, f64::NEG_INFINITY);
    for &tau in &taus {
        let r = s_matrix(p, tau)?;
        ssym = ssym.max(r.symmetry_residual / scale(&r.s));
        stop = stop.max(r.sdot_max_eigenvalue);
    }
    out.push(Check::bound("s_symmetry_residual", ssym, ctx.tol.get("s_symmetry")));
    out.push(Check::bound("s_derivative_max_eigenvalue", stop, ctx.tol.get("s_monotone")));

    let (mu, nu) = ctx.gaussian_pair()?;
    let tr = LqGaussianTransport::new(p, &mu, &nu, 0.0, t)?;
    let mut min_slack = f64::INFINITY;
    for &tau in &taus {
        let chk = jacobian_estimate_check(p, &tr.map.linear, tau, t)?;
        min_slack = min_slack.min(chk.slack / chk.lhs.abs().max(1.0));
    }
    out.push(Check::slack("jacobian_estimate_min_slack", min_slack, ctx.tol.get("jacobian")));
    Ok(())
}

fn entropy_checks(ctx: &Ctx, out: &mut Vec<Check>) -> Result<()> {
    let p = ctx.problem;
    let n = p.dim();
    let t = p.horizon();
    let (mu, nu) = ctx.gaussian_pair()?;
    let mut min_slack = f64::INFINITY;
    for (k, tau) in [0.1, 0.3, 0.5, 0.7, 0.9].iter().enumerate() {
        let c = density_inequality_check(p, &mu, &nu, tau * t, VERIFY_DENSITY_SAMPLES, ctx.seed.wrapping_add(k as u64))?;
        min_slack = min_slack.min(c.min_slack);
    }
    out.push(Check::slack("density_inequality_min_slack", min_slack, ctx.tol.get("density")));

    // neg_power(n) has finite Monte-Carlo variance only for n >= 3
    let u = if n >= 3 { DcFunction::neg_power(n as f64)? } else { DcFunction::XLogX };
    out.push(Check::bound(
        format!("dc_membership[{u}]"),
        if dc_membership(&u, n as f64) { 0.0 } else { 1.0 },
        0.0,
    ));
    let sigmas = ctx.tol.get("entropic_sigmas");
    for (k, tau) in [0.25, 0.5, 0.75].iter().enumerate() {
        let c = entropic_inequality_check(p, &u, &mu, &nu, tau * t, VERIFY_MC_SAMPLES, ctx.seed.wrapping_add(100 + k as u64))?;
        let floor = 1e-12 * (c.lhs.value.abs() + c.rhs.value.abs()).max(1.0);
        out.push(Check::slack(
            format!("entropic_inequality[{u}, tau={:.4}]", tau * t),
            c.slack.value,
            sigmas * c.slack.stderr + floor,
        ));
    }
    Ok(())
}

pub fn run_suite(suite: Suite, problem: &LqProblem, inputs: &VerifyInputs, seed: u64, tolerances: &Tolerances) -> Result<Report> {
    let ctx = Ctx { problem, tol: tolerances, seed, inputs };
    let mut checks = Vec::new();
    let all = suite == Suite::All;
    if all || suite == Suite::Dynamics {
        dynamics_checks(&ctx, &mut checks)?;
    }
    if all || suite == Suite::Cost {
        cost_checks(&ctx, &mut checks)?;
    }
    if all || suite == Suite::Ot {
        ot_checks(&ctx, &mut checks)?;
    }
    if all || suite == Suite::Comparison {
        comparison_checks(&ctx, &mut checks)?;
    }
    if all || suite == Suite::Entropy {
        entropy_checks(&ctx, &mut checks)?;
    }
    let passed = checks.iter().filter(|c| c.pass).count();
    let total = checks.len();
    Ok(Report {
        suite: suite.name().into(),
        problem_hash: problem_hash(problem),
        seed,
        tolerances: tolerances.as_map().clone(),
        summary: Summary { total, passed, failed: total - passed, pass: passed == total },
        checks,
    })
}
