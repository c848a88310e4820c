//! Displacement convexity classes, entropy functionals of Gaussian measures
//! and the density and entropic interpolation inequalities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::comparison::distortion_coefficient;
use crate::dynamics::LqProblem;
use crate::error::{Error, Result};
use crate::interpolation::{mean_and_stderr, Estimate};
use crate::ot_gaussian::{positive_log_jacobian, pushforward_gaussian, GaussianMeasure, LqGaussianTransport};

/// Points of the sampled convexity grids.
pub const DC_GRID_POINTS: usize = 512;

/// Allowed negative chord gap, relative to `max(1, |u|)`.
pub const DC_CONVEXITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DcFunction {
    /// `U(r) = r^alpha`, `alpha >= 1`.
    Power { alpha: f64 },
    /// `U(r) = -r^{1 - 1/N}`, `N >= 1`.
    NegPower { n: f64 },
    /// `U(r) = r log r`.
    XLogX,
}

impl DcFunction {
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha >= 1.0 && alpha.is_finite()) {
            return Err(Error::Argument(format!("power exponent must be >= 1, got {alpha}")));
        }
        Ok(DcFunction::Power { alpha })
    }

    pub fn neg_power(n: f64) -> Result<Self> {
        if !(n >= 1.0 && n.is_finite()) {
            return Err(Error::Argument(format!("neg_power needs N >= 1, got {n}")));
        }
        Ok(DcFunction::NegPower { n })
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        match *self {
            DcFunction::Power { alpha } => r.powf(alpha),
            DcFunction::NegPower { n } => -r.powf(1.0 - 1.0 / n),
            DcFunction::XLogX => r * r.ln(),
        }
    }

    /// `U(c r) / r`, the Monte-Carlo integrand for `int U(c rho)` under `rho`,
    /// evaluated from `log r` to stay finite in the tails.
    fn weighted(&self, c: f64, log_r: f64) -> f64 {
        match *self {
            DcFunction::Power { alpha } => c.powf(alpha) * ((alpha - 1.0) * log_r).exp(),
            DcFunction::NegPower { n } => -c.powf(1.0 - 1.0 / n) * (-log_r / n).exp(),
            DcFunction::XLogX => c * (c.ln() + log_r),
        }
    }

    /// `int U(c rho)` for a Gaussian density `rho`, when it is finite.
    pub fn gaussian_integral(&self, mu: &GaussianMeasure, c: f64) -> Option<f64> {
        let n = mu.dim() as f64;
        let log_det = mu.cov().log_det();
        let power_integral = |p: f64| -> f64 {
            // int rho^p = (2 pi)^{n(1-p)/2} det^{(1-p)/2} p^{-n/2}
            (0.5 * n * (1.0 - p) * (2.0 * std::f64::consts::PI).ln() + 0.5 * (1.0 - p) * log_det - 0.5 * n * p.ln()).exp()
        };
        match *self {
            DcFunction::Power { alpha } => Some(c.powf(alpha) * power_integral(alpha)),
            DcFunction::NegPower { n: big_n } => {
                let p = 1.0 - 1.0 / big_n;
                (p > 0.0).then(|| -c.powf(p) * power_integral(p))
            }
            DcFunction::XLogX => {
                let neg_entropy = -0.5 * n * (1.0 + (2.0 * std::f64::consts::PI).ln()) - 0.5 * log_det;
                Some(c * c.ln() + c * neg_entropy)
            }
        }
    }

    fn name(&self) -> String {
        match *self {
            DcFunction::Power { alpha } => format!("power({alpha})"),
            DcFunction::NegPower { n } => format!("neg_power({n})"),
            DcFunction::XLogX => "xlogx".into(),
        }
    }
}

impl std::fmt::Display for DcFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp())
        .collect()
}

fn sampled_convex(f: impl Fn(f64) -> f64, grid: &[f64]) -> bool {
    grid.windows(3).all(|w| {
        let (x0, x1, x2) = (w[0], w[1], w[2]);
        let (f0, f1, f2) = (f(x0), f(x1), f(x2));
        let chord = (f0 * (x2 - x1) + f2 * (x1 - x0)) / (x2 - x0);
        f1 - chord <= DC_CONVEXITY_TOL * f1.abs().max(1.0)
    })
}

/// Sampled membership test for the class of dimension `n` (`f64::INFINITY`
/// allowed): `U` convex on a log grid of `(0, inf)` and
/// `u(d) = d^N U(d^{-N})` (or `e^d U(e^{-d})`) convex on its grid.
pub fn dc_membership(u: &DcFunction, n: f64) -> bool {
    if !(n >= 1.0) {
        return false;
    }
    if !sampled_convex(|r| u.eval(r), &log_grid(1e-6, 1e6, DC_GRID_POINTS)) {
        return false;
    }
    if n.is_infinite() {
        let grid: Vec<f64> = (0..DC_GRID_POINTS)
            .map(|k| -10.0 + 20.0 * k as f64 / (DC_GRID_POINTS - 1) as f64)
            .collect();
        return sampled_convex(|d| d.exp() * u.eval((-d).exp()), &grid);
    }
    sampled_convex(|d| d.powf(n) * u.eval(d.powf(-n)), &log_grid(1e-2, 1e2, DC_GRID_POINTS))
}

/// Monte-Carlo and closed-form values of `int U(rho)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate {
    pub value: f64,
    pub stderr: f64,
    pub analytic: Option<f64>,
}

fn finite_variance(u: &DcFunction) -> Result<()> {
    // the integrand U(rho)/rho needs int rho^{2p-1} < inf, i.e. 2p - 1 > 0
    let p = match *u {
        DcFunction::Power { alpha } => alpha,
        DcFunction::NegPower { n } => 1.0 - 1.0 / n,
        DcFunction::XLogX => return Ok(()),
    };
    if 2.0 * p - 1.0 <= 0.0 {
        return Err(Error::Integration(format!(
            "{u} has infinite Monte-Carlo variance on Gaussian densities"
        )));
    }
    Ok(())
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integration(format!("non-finite integrand in {what}")));
    }
    Ok(())
}

/// `int U(rho)` written as `E_mu[U(rho(X)) / rho(X)]`.
pub fn entropy_functional(u: &DcFunction, mu: &GaussianMeasure, samples: usize, seed: u64) -> Result<EntropyEstimate> {
    if samples < 2 {
        return Err(Error::Argument("Monte-Carlo estimates need at least 2 samples".into()));
    }
    finite_variance(u)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dens = mu.density_evaluator();
    let values: Vec<f64> = mu
        .sample(&mut rng, samples)
        .iter()
        .map(|x| u.weighted(1.0, dens.log_density(x)))
        .collect();
    check_finite(&values, "entropy functional")?;
    let est = mean_and_stderr(&values);
    Ok(EntropyEstimate { value: est.value, stderr: est.stderr, analytic: u.gaussian_integral(mu, 1.0) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityCheck {
    pub tau: f64,
    pub min_slack: f64,
    pub samples: usize,
}

/// Smallest value over `x ~ mu` of
/// `rho_tau(T_tau x)^{-1/n} - beta_{T-tau}^{1/n} rho_0(x)^{-1/n} - beta_tau^{1/n} rho_T(T x)^{-1/n}`.
pub fn density_inequality_check(
    problem: &LqProblem,
    mu: &GaussianMeasure,
    nu: &GaussianMeasure,
    tau: f64,
    sample_points: usize,
    seed: u64,
) -> Result<DensityCheck> {
    let horizon = problem.horizon();
    if !(tau >= 0.0 && tau <= horizon) {
        return Err(Error::Argument(format!("tau = {tau} outside [0, {horizon}]")));
    }
    if sample_points == 0 {
        return Err(Error::Argument("need at least one sample point".into()));
    }
    let n = problem.dim() as f64;
    let tr = LqGaussianTransport::new(problem, mu, nu, 0.0, horizon)?;
    let step = tr.intermediate(problem, tau)?;
    positive_log_jacobian(&step)?;
    let mu_tau = pushforward_gaussian(&step, mu)?;
    let (rho0, rho_tau, rho_t) = (mu.density_evaluator(), mu_tau.density_evaluator(), nu.density_evaluator());
    let b_back = distortion_coefficient(problem, horizon - tau)?.max(0.0).powf(1.0 / n);
    let b_fwd = distortion_coefficient(problem, tau)?.max(0.0).powf(1.0 / n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = |log_rho: f64| (-log_rho / n).exp();
    let mut min_slack = f64::INFINITY;
    for x in mu.sample(&mut rng, sample_points) {
        let lhs = root(rho_tau.log_density(&step.apply(&x)));
        let rhs = b_back * root(rho0.log_density(&x)) + b_fwd * root(rho_t.log_density(&tr.map.apply(&x)));
        min_slack = min_slack.min(lhs - rhs);
    }
    Ok(DensityCheck { tau, min_slack, samples: sample_points })
}

/// Like [`density_inequality_check`] without the target term, which is the
/// form that survives when the target degenerates.
pub fn one_sided_density_check(
    problem: &LqProblem,
    mu: &GaussianMeasure,
    nu: &GaussianMeasure,
    tau: f64,
    sample_points: usize,
    seed: u64,
) -> Result<f64> {
    let horizon = problem.horizon();
    if !(tau >= 0.0 && tau <= horizon) {
        return Err(Error::Argument(format!("tau = {tau} outside [0, {horizon}]")));
    }
    let n = problem.dim() as f64;
    let tr = LqGaussianTransport::new(problem, mu, nu, 0.0, horizon)?;
    let step = tr.intermediate(problem, tau)?;
    let log_jac = positive_log_jacobian(&step)?;
    let rho0 = mu.density_evaluator();
    let b_back = distortion_coefficient(problem, horizon - tau)?.max(0.0).powf(1.0 / n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_slack = f64::INFINITY;
    for x in mu.sample(&mut rng, sample_points) {
        // rho_tau(T_tau x) = rho_0(x) / det grad T_tau
        let log_rho0 = rho0.log_density(&x);
        let lhs = (-(log_rho0 - log_jac) / n).exp();
        min_slack = min_slack.min(lhs - b_back * (-log_rho0 / n).exp());
    }
    Ok(min_slack)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropicCheck {
    pub tau: f64,
    /// `U(mu_tau)`.
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// `rhs - lhs`, with the standard error of the paired estimator.
    pub slack: Estimate,
    pub analytic_lhs: Option<f64>,
    pub analytic_rhs: Option<f64>,
}

impl EntropicCheck {
    /// `slack >= -3 stderr`, with a rounding allowance for exact equality cases.
    pub fn passes(&self) -> bool {
        let floor = 1e-12 * (self.lhs.value.abs() + self.rhs.value.abs()).max(1.0);
        self.slack.value >= -3.0 * self.slack.stderr - floor
    }
}

/// Compares `U(mu_tau)` against
/// `(T/(T-tau))^{n-1} b1 int U(rho_0 c1) + (T/tau)^{n-1} b2 int U(rho_T c2)`
/// with `b1 = beta_{T-tau}`, `c1 = ((T-tau)/T)^n / b1`, `b2 = beta_tau`,
/// `c2 = (tau/T)^n / b2`. All three integrals use the same draws `x ~ mu`,
/// pushed to `T_tau(x)` and `T(x)`.
pub fn entropic_inequality_check(
    problem: &LqProblem,
    u: &DcFunction,
    mu: &GaussianMeasure,
    nu: &GaussianMeasure,
    tau: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<EntropicCheck> {
    let horizon = problem.horizon();
    let n = problem.dim();
    if !dc_membership(u, n as f64) {
        return Err(Error::Argument(format!("{u} is not in the displacement convexity class of dimension {n}")));
    }
    if !(tau > 0.0 && tau < horizon) {
        return Err(Error::Argument(format!("tau = {tau} outside (0, {horizon})")));
    }
    if mc_samples < 2 {
        return Err(Error::Argument("Monte-Carlo estimates need at least 2 samples".into()));
    }
    finite_variance(u)?;
    let nf = n as f64;
    let tr = LqGaussianTransport::new(problem, mu, nu, 0.0, horizon)?;
    let step = tr.intermediate(problem, tau)?;
    positive_log_jacobian(&step)?;
    let mu_tau = pushforward_gaussian(&step, mu)?;
    let b1 = distortion_coefficient(problem, horizon - tau)?;
    let b2 = distortion_coefficient(problem, tau)?;
    if !(b1 > 0.0 && b2 > 0.0) {
        return Err(Error::Integration("distortion coefficient vanishes inside (0, T)".into()));
    }
    let w1 = (horizon / (horizon - tau)).powf(nf - 1.0) * b1;
    let w2 = (horizon / tau).powf(nf - 1.0) * b2;
    let c1 = ((horizon - tau) / horizon).powf(nf) / b1;
    let c2 = (tau / horizon).powf(nf) / b2;

    let (rho0, rho_tau, rho_t) = (mu.density_evaluator(), mu_tau.density_evaluator(), nu.density_evaluator());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lhs_v = Vec::with_capacity(mc_samples);
    let mut rhs_v = Vec::with_capacity(mc_samples);
    let mut slack_v = Vec::with_capacity(mc_samples);
    for x in mu.sample(&mut rng, mc_samples) {
        let l = u.weighted(1.0, rho_tau.log_density(&step.apply(&x)));
        let r = w1 * u.weighted(c1, rho0.log_density(&x)) + w2 * u.weighted(c2, rho_t.log_density(&tr.map.apply(&x)));
        lhs_v.push(l);
        rhs_v.push(r);
        slack_v.push(r - l);
    }
    check_finite(&slack_v, "entropic inequality")?;
    let analytic_lhs = u.gaussian_integral(&mu_tau, 1.0);
    let analytic_rhs = match (u.gaussian_integral(mu, c1), u.gaussian_integral(nu, c2)) {
        (Some(a), Some(b)) => Some(w1 * a + w2 * b),
        _ => None,
    };
    Ok(EntropicCheck {
        tau,
        lhs: mean_and_stderr(&lhs_v),
        rhs: mean_and_stderr(&rhs_v),
        slack: mean_and_stderr(&slack_v),
        analytic_lhs,
        analytic_rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Matrix, Vector};
    use crate::sampling::{random_problem, random_spd, random_vector};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn free_particle(n: usize, t: f64) -> LqProblem {
        LqProblem::new(Matrix::zeros(n, n), Matrix::identity(n, n), Matrix::zeros(n, n), t).unwrap()
    }

    fn random_gaussian(rng: &mut ChaCha8Rng, n: usize) -> GaussianMeasure {
        GaussianMeasure::new(random_vector(rng, n), random_spd(rng, n, 0.2).into_inner()).unwrap()
    }

    #[test]
    fn membership_examples() {
        let sq = DcFunction::power(2.0).unwrap();
        for n in [1.0, 2.0, 5.0, 20.0, f64::INFINITY] {
            assert!(dc_membership(&sq, n), "r^2 in DC_{n}");
        }
        for n in 1..6 {
            let u = DcFunction::neg_power(n as f64).unwrap();
            assert!(dc_membership(&u, n as f64));
            assert!(!dc_membership(&u, n as f64 + 1.0));
        }
        assert!(dc_membership(&DcFunction::XLogX, f64::INFINITY));
        assert!(dc_membership(&DcFunction::XLogX, 3.0));
        assert!(!dc_membership(&DcFunction::neg_power(3.0).unwrap(), f64::INFINITY));
        assert!(DcFunction::power(0.5).is_err());
        assert!(DcFunction::neg_power(0.5).is_err());
        assert_eq!(DcFunction::XLogX.eval(0.0), 0.0);
    }

    #[test]
    fn xlogx_entropy_of_standard_gaussian() {
        for n in 1..4 {
            let g = GaussianMeasure::standard(n);
            let e = entropy_functional(&DcFunction::XLogX, &g, 10_000, 1).unwrap();
            let want = -0.5 * n as f64 * (1.0 + (2.0 * PI).ln());
            assert!((e.analytic.unwrap() - want).abs() < 1e-12);
            assert!((e.value - want).abs() < 3.0 * e.stderr);
        }
    }

    #[test]
    fn neg_power_entropy_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in 3..6 {
            let g = random_gaussian(&mut rng, n);
            let u = DcFunction::neg_power(n as f64).unwrap();
            let e = entropy_functional(&u, &g, 10_000, n as u64).unwrap();
            assert!((e.value - e.analytic.unwrap()).abs() < 3.0 * e.stderr);
        }
        // the 1-D standard case by quadrature
        let g = GaussianMeasure::standard(1);
        let u = DcFunction::power(2.0).unwrap();
        let h = 1e-3;
        let quad: f64 = (-12000..=12000)
            .map(|k| u.eval(g.density(&Vector::from_element(1, k as f64 * h))) * h)
            .sum();
        assert!((u.gaussian_integral(&g, 1.0).unwrap() - quad).abs() < 1e-9);
    }

    #[test]
    fn power_integral_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_gaussian(&mut rng, 3);
        let g4 = GaussianMeasure::new(g.mean().clone(), g.cov().as_matrix() * 4.0).unwrap();
        let u = DcFunction::neg_power(3.0).unwrap();
        let p: f64 = 2.0 / 3.0;
        // det(4 Sigma) = 4^3 det Sigma, int rho^p scales by (4^3)^{(1-p)/2}
        let ratio = u.gaussian_integral(&g4, 1.0).unwrap() / u.gaussian_integral(&g, 1.0).unwrap();
        assert!((ratio - 64f64.powf((1.0 - p) / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn infinite_variance_is_an_integration_error() {
        let g = GaussianMeasure::standard(2);
        let u = DcFunction::neg_power(2.0).unwrap();
        assert!(matches!(entropy_functional(&u, &g, 100, 0), Err(Error::Integration(_))));
        let p = free_particle(2, 1.0);
        assert!(matches!(
            entropic_inequality_check(&p, &u, &g, &g, 0.5, 100, 0),
            Err(Error::Integration(_))
        ));
    }

    #[test]
    fn density_endpoints_and_euclidean_equality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_problem(&mut rng, 2);
        let mu = random_gaussian(&mut rng, 2);
        let nu = random_gaussian(&mut rng, 2);
        for tau in [0.0, p.horizon()] {
            let c = density_inequality_check(&p, &mu, &nu, tau, 200, 1).unwrap();
            assert!(c.min_slack.abs() < 1e-9, "{}", c.min_slack);
        }
        let fp = free_particle(3, 1.0);
        let g = GaussianMeasure::standard(3);
        for tau in [0.25, 0.5, 0.75] {
            let c = density_inequality_check(&fp, &g, &g, tau, 200, 2).unwrap();
            assert!(c.min_slack.abs() < 1e-12);
        }
    }

    #[test]
    fn density_inequality_on_rotation_problem() {
        let p = LqProblem::new(
            Matrix::from_element(1, 1, 0.0),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, 1.0),
            FRAC_PI_2,
        )
        .unwrap();
        let mu = GaussianMeasure::new(Vector::from_element(1, 0.5), Matrix::from_element(1, 1, 0.3)).unwrap();
        let nu = GaussianMeasure::new(Vector::from_element(1, -1.0), Matrix::from_element(1, 1, 2.0)).unwrap();
        for k in 1..10 {
            let tau = p.horizon() * k as f64 / 10.0;
            let c = density_inequality_check(&p, &mu, &nu, tau, 1000, k).unwrap();
            assert!(c.min_slack >= -1e-8);
        }
    }

    #[test]
    fn second_term_vanishes_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_problem(&mut rng, 2);
        let betas: Vec<f64> = (0..6).map(|k| distortion_coefficient(&p, p.horizon() * 10f64.powi(-k)).unwrap()).collect();
        assert!(betas.windows(2).all(|w| w[1] < w[0]));
        assert!(betas[5] < 1e-8);
    }

    #[test]
    fn one_sided_inequality_under_mollification() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = random_problem(&mut rng, 2);
        let mu = random_gaussian(&mut rng, 2);
        let target = random_vector(&mut rng, 2);
        for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
            let nu = GaussianMeasure::new(target.clone(), Matrix::identity(2, 2) * eps).unwrap();
            for k in 1..5 {
                let tau = p.horizon() * k as f64 / 5.0;
                let s = one_sided_density_check(&p, &mu, &nu, tau, 300, k).unwrap();
                assert!(s >= -1e-8, "eps {eps} tau {tau}: {s}");
            }
        }
    }

    #[test]
    fn entropic_inequality_examples() {
        let u3 = DcFunction::neg_power(3.0).unwrap();
        let fp = free_particle(3, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mu = random_gaussian(&mut rng, 3);
        let nu = random_gaussian(&mut rng, 3);
        let c = entropic_inequality_check(&fp, &u3, &mu, &nu, 0.4, 10_000, 1).unwrap();
        assert!(c.passes(), "{c:?}");
        assert!(c.analytic_rhs.unwrap() - c.analytic_lhs.unwrap() >= -1e-12);

        let g = GaussianMeasure::standard(3);
        let c = entropic_inequality_check(&fp, &u3, &g, &g, 0.3, 2_000, 1).unwrap();
        assert!(c.passes(), "{c:?}");

        let p = random_problem(&mut rng, 3);
        let c = entropic_inequality_check(&p, &u3, &mu, &nu, 0.5 * p.horizon(), 10_000, 3).unwrap();
        assert!(c.passes(), "{c:?}");
        assert!(c.analytic_rhs.unwrap() - c.analytic_lhs.unwrap() >= -1e-10);

        assert!(entropic_inequality_check(&p, &u3, &mu, &nu, 0.0, 100, 0).is_err());
        let u4 = DcFunction::neg_power(2.0).unwrap();
        assert!(matches!(
            entropic_inequality_check(&p, &u4, &mu, &nu, 0.5 * p.horizon(), 100, 0),
            Err(Error::Argument(_))
        ));
    }
}
