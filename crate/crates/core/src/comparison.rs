//! Distortion coefficients, the W and S matrices, and the Jacobian
//! comparison estimate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::LqProblem;
use crate::error::{Error, Result};
use crate::numerics::{
    inverse, log_abs_det_sign, operator_norm, singular_values, solve, sym_eigenvalues, symmetrize,
    symmetry_residual, Matrix, Vector, SINGULAR_REL_TOL,
};
use crate::sampling::uniform_ball;

/// Number of grid points used to locate the window where `R1` is invertible.
pub const W_WINDOW_POINTS: usize = 1024;

/// Central-difference step for the Riccati check.
pub const W_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct DistortionCurve {
    pub taus: Vec<f64>,
    pub betas: Vec<f64>,
}

/// `beta_tau = det R3(tau) / det R3(T)` via log-determinants. Returns 0 when
/// `R3(tau)` is singular at the library tolerance (in particular at `tau = 0`).
pub fn distortion_coefficient(problem: &LqProblem, tau: f64) -> Result<f64> {
    let horizon = problem.horizon();
    if !(tau >= 0.0 && tau <= horizon) {
        return Err(Error::Argument(format!("tau = {tau} outside [0, {horizon}]")));
    }
    let at_t = log_abs_det_sign(&problem.flow_blocks(horizon).r3)?;
    if at_t.is_singular() {
        return Err(Error::ConjugateTime(format!("R3({horizon}) is singular")));
    }
    let at_tau = log_abs_det_sign(&problem.flow_blocks(tau).r3)?;
    if at_tau.is_singular() {
        return Ok(0.0);
    }
    Ok(f64::from(at_tau.sign * at_t.sign) * (at_tau.log_abs - at_t.log_abs).exp())
}

pub fn distortion_curve(problem: &LqProblem, taus: &[f64]) -> Result<DistortionCurve> {
    let betas = taus
        .iter()
        .map(|&t| distortion_coefficient(problem, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(DistortionCurve { taus: taus.to_vec(), betas })
}

/// Estimates the volume ratio `|Z_tau(x, B_r(y))| / |B_r(y)|` by pushing
/// uniform samples of the ball through `z -> exp_{x,tau}(exp_{x,T}^{-1}(z))`
/// and comparing sample covariance determinants. The map is affine, so the
/// estimate is exact up to rounding.
pub fn distortion_mc_estimate(
    problem: &LqProblem,
    x: &Vector,
    y: &Vector,
    tau: f64,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Argument(format!("radius must be positive, got {radius}")));
    }
    if samples < 1000 {
        return Err(Error::Argument(format!("need at least 1000 samples, got {samples}")));
    }
    let horizon = problem.horizon();
    if !(tau >= 0.0 && tau <= horizon) {
        return Err(Error::Argument(format!("tau = {tau} outside [0, {horizon}]")));
    }
    let n = problem.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zs: Vec<Vector> = (0..samples).map(|_| uniform_ball(&mut rng, y, radius)).collect();
    let images = zs
        .iter()
        .map(|z| {
            let p = problem.exp_map_inverse(x, z, horizon)?;
            problem.exp_map(x, &p, tau)
        })
        .collect::<Result<Vec<_>>>()?;
    let before = log_abs_det_sign(&sample_covariance(&zs, n))?;
    let after = log_abs_det_sign(&sample_covariance(&images, n))?;
    if after.is_singular() {
        return Ok(0.0);
    }
    Ok((0.5 * (after.log_abs - before.log_abs)).exp())
}

fn sample_covariance(points: &[Vector], n: usize) -> Matrix {
    let count = points.len() as f64;
    let mean = points.iter().fold(Vector::zeros(n), |acc, p| acc + p) / count;
    let mut cov = Matrix::zeros(n, n);
    for p in points {
        let d = p - &mean;
        cov += &d * d.transpose();
    }
    cov / (count - 1.0)
}

/// `theta = distance * sqrt(|k| / (n - 1))`.
pub fn model_theta(k: f64, n: usize, distance: f64) -> f64 {
    distance * (k.abs() / (n as f64 - 1.0)).sqrt()
}

/// `(A, B, Q, T) = (0, I, K diag(1, .., 1, 0), 1)` with `K = distance^2 k / (n - 1)`.
pub fn model_space_problem(k: f64, n: usize, distance: f64) -> Result<LqProblem> {
    if n < 2 {
        return Err(Error::Argument(format!("model spaces need n >= 2, got {n}")));
    }
    if !(k.is_finite() && distance.is_finite() && distance >= 0.0) {
        return Err(Error::Argument("curvature and distance must be finite, distance >= 0".into()));
    }
    if k > 0.0 {
        let limit = std::f64::consts::PI * ((n as f64 - 1.0) / k).sqrt();
        if distance >= limit {
            return Err(Error::Argument(format!(
                "distance {distance} must be below pi sqrt((n-1)/k) = {limit}"
            )));
        }
    }
    let big_k = distance * distance * k / (n as f64 - 1.0);
    let mut q = Matrix::zeros(n, n);
    for i in 0..n - 1 {
        q[(i, i)] = big_k;
    }
    LqProblem::new(Matrix::zeros(n, n), Matrix::identity(n, n), q, 1.0)
}

/// Reference coefficients `tau (sin(tau theta)/sin theta)^{n-1}`, the `sinh`
/// analogue for `k < 0`, and `tau^n` for `k = 0`.
pub fn model_beta(k: f64, n: usize, theta: f64, tau: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Argument(format!("tau = {tau} outside [0, 1]")));
    }
    if n < 1 || !(theta >= 0.0) {
        return Err(Error::Argument("need n >= 1 and theta >= 0".into()));
    }
    if k > 0.0 && theta >= std::f64::consts::PI {
        return Err(Error::Argument(format!("theta = {theta} must be below pi when k > 0")));
    }
    let power = (n - 1) as i32;
    if k == 0.0 || theta == 0.0 {
        return Ok(tau.powi(n as i32));
    }
    let ratio = if k > 0.0 {
        (tau * theta).sin() / theta.sin()
    } else {
        (tau * theta).sinh() / theta.sinh()
    };
    Ok(tau * ratio.powi(power))
}

/// `W = R3 R1^{-1}` with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct WReport {
    pub tau: f64,
    pub w: Matrix,
    pub symmetry_residual: f64,
    pub min_eigenvalue: f64,
    /// `|W' - (B B^T + A W + W A^T + W Q W)|_max / max(1, |rhs|_max)` with
    /// `W'` from central differences.
    pub riccati_residual: f64,
}

fn w_at(problem: &LqProblem, tau: f64) -> Result<Matrix> {
    let fb = problem.flow_blocks(tau);
    let scale = singular_values(&fb.assemble()).max();
    if singular_values(&fb.r1).min() <= SINGULAR_REL_TOL * scale {
        return Err(Error::Window(format!("R1({tau}) is singular")));
    }
    solve(&fb.r1.transpose(), &fb.r3.transpose(), "R1^T")
        .map(|m| m.transpose())
        .map_err(|e| Error::Window(e.to_string()))
}

pub fn w_matrix(problem: &LqProblem, tau: f64) -> Result<WReport> {
    let horizon = problem.horizon();
    if !(tau >= 0.0 && tau <= horizon) {
        return Err(Error::Argument(format!("tau = {tau} outside [0, {horizon}]")));
    }
    let w = w_at(problem, tau)?;
    let h = W_FD_STEP;
    let wdot = (w_at(problem, tau + h)? - w_at(problem, tau - h)?) / (2.0 * h);
    let (a, b, q) = (problem.a(), problem.b(), problem.q());
    let rhs = b * b.transpose() + a * &w + &w * a.transpose() + &w * q * &w;
    let riccati_residual = (&wdot - &rhs).amax() / rhs.amax().max(1.0);
    Ok(WReport {
        tau,
        symmetry_residual: symmetry_residual(&w),
        min_eigenvalue: sym_eigenvalues(&symmetrize(&w))[0],
        riccati_residual,
        w,
    })
}

/// Largest point of a uniform grid on `[0, T]` up to which `det R1` keeps
/// its initial (positive) sign.
pub fn w_window(problem: &LqProblem) -> f64 {
    let horizon = problem.horizon();
    let mut last = 0.0;
    for k in 1..W_WINDOW_POINTS {
        let tau = horizon * k as f64 / (W_WINDOW_POINTS - 1) as f64;
        match log_abs_det_sign(&problem.flow_blocks(tau).r1) {
            Ok(ld) if ld.sign > 0 => last = tau,
            _ => break,
        }
    }
    last
}

/// `S = R3^{-1} R4` with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SReport {
    pub tau: f64,
    pub s: Matrix,
    pub symmetry_residual: f64,
    pub sdot: Matrix,
    /// Largest eigenvalue of `S'`, divided by `max(1, |S'|)`.
    pub sdot_max_eigenvalue: f64,
}

/// `S` and its derivative. `S'` comes from the exact flow derivative
/// `d/dtau exp(tau G) = G exp(tau G)`:
/// `S' = R3^{-1} (R4' - R3' S)`.
pub fn s_matrix(problem: &LqProblem, tau: f64) -> Result<SReport> {
    let horizon = problem.horizon();
    if !(tau > 0.0 && tau <= horizon) {
        return Err(Error::Argument(format!("tau = {tau} outside (0, {horizon}]")));
    }
    let fb = problem.flow_blocks(tau);
    fb.ensure_r3_regular()?;
    let dfb = problem.system().flow_block_derivatives(tau);
    let r3_inv = inverse(&fb.r3, "R3").map_err(|e| Error::ConjugateTime(e.to_string()))?;
    let s = &r3_inv * &fb.r4;
    let sdot = &r3_inv * (&dfb.r4 - &dfb.r3 * &s);
    let sym = symmetrize(&sdot);
    let top = *sym_eigenvalues(&sym).last().expect("non-empty spectrum");
    Ok(SReport {
        tau,
        symmetry_residual: symmetry_residual(&s),
        sdot_max_eigenvalue: top / operator_norm(&sym).max(1.0),
        s,
        sdot,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianCheck {
    /// `det(grad T_tau)^{1/n}`.
    pub lhs: f64,
    /// Sum of the two comparison terms.
    pub rhs: f64,
    pub slack: f64,
    pub grad_t_tau: Matrix,
}

/// Signed determinant ratio `det num / det den` in log space.
fn det_ratio(num: &Matrix, den: &Matrix) -> Result<f64> {
    let d = log_abs_det_sign(den)?;
    if d.is_singular() {
        return Err(Error::ConjugateTime("denominator determinant vanishes".into()));
    }
    let nm = log_abs_det_sign(num)?;
    if nm.sign == 0 {
        return Ok(0.0);
    }
    Ok(f64::from(nm.sign * d.sign) * (nm.log_abs - d.log_abs).exp())
}

fn nth_root(value: f64, n: usize, what: &str) -> Result<f64> {
    if value < 0.0 {
        return Err(Error::Argument(format!("{what} has negative determinant {value:e}")));
    }
    Ok(value.powf(1.0 / n as f64))
}

/// Checks `det(grad T_tau)^{1/n} >= (det R3(tau-s)/det R3(-s))^{1/n}
/// + (det R3(tau)/det R3(s))^{1/n} det(grad T_s)^{1/n}` where
/// `grad T_tau = R3(tau-s) R3(-s)^{-1} + R3(tau) R3(s)^{-1} grad T_s`.
///
/// Requires `R3(s)^{-1} grad T_s` symmetric and positive semi-definite.
pub fn jacobian_estimate_check(problem: &LqProblem, grad_t_s: &Matrix, tau: f64, s: f64) -> Result<JacobianCheck> {
    let n = problem.dim();
    if grad_t_s.shape() != (n, n) {
        return Err(Error::Dimension(format!("grad T_s must be {n}x{n}")));
    }
    let horizon = problem.horizon();
    if !(0.0 < tau && tau <= s && s <= horizon) {
        return Err(Error::Argument(format!(
            "need 0 < tau <= s <= T, got tau={tau}, s={s}, T={horizon}"
        )));
    }
    let r3_s = problem.flow_blocks(s).r3;
    let r3_ms = problem.flow_blocks(-s).r3;
    let r3_tau = problem.flow_blocks(tau).r3;
    let r3_diff = problem.flow_blocks(tau - s).r3;

    let reduced = solve(&r3_s, grad_t_s, "R3(s)").map_err(|e| Error::ConjugateTime(e.to_string()))?;
    let scale = reduced.amax().max(f64::MIN_POSITIVE);
    if symmetry_residual(&reduced) > 1e-8 {
        return Err(Error::Argument("R3(s)^{-1} grad T_s is not symmetric".into()));
    }
    if sym_eigenvalues(&symmetrize(&reduced))[0] < -1e-10 * scale {
        return Err(Error::Argument("R3(s)^{-1} grad T_s is not nonnegative".into()));
    }

    let first = &r3_diff * inverse(&r3_ms, "R3(-s)").map_err(|e| Error::ConjugateTime(e.to_string()))?;
    let grad_t_tau = first + &r3_tau * &reduced;

    let lhs = nth_root(log_abs_det_sign(&grad_t_tau)?.value(), n, "grad T_tau")?;
    let back = nth_root(det_ratio(&r3_diff, &r3_ms)?, n, "R3(tau-s) R3(-s)^{-1}")?;
    let fwd = nth_root(det_ratio(&r3_tau, &r3_s)?, n, "R3(tau) R3(s)^{-1}")?;
    let jac_s = nth_root(log_abs_det_sign(grad_t_s)?.value(), n, "grad T_s")?;
    let rhs = back + fwd * jac_s;
    Ok(JacobianCheck { lhs, rhs, slack: lhs - rhs, grad_t_tau })
}
