//! LQ optimal transport between Gaussian measures.
//!
//! Under an LQ cost on `[t, s]` the cross term is `-x^T R3(h)^{-1} y`, so the
//! optimal coupling of `mu` and `nu` is the Euclidean Brenier map `grad phi`
//! from `mu` to `eta = (R3(h)^{-1})_# nu`, followed by `R3(h)`. All maps in
//! this module are affine.

use rand::Rng;

use crate::cost::{cost_matrices, CostMatrices};
use crate::dynamics::LqProblem;
use crate::error::{Error, Result};
use crate::numerics::{inverse, log_abs_det_sign, symmetrize, Matrix, SpdMatrix, Vector};
use crate::sampling::random_vector;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasure {
    mean: Vector,
    cov: SpdMatrix,
}

impl GaussianMeasure {
    pub fn new(mean: Vector, cov: Matrix) -> Result<Self> {
        if cov.nrows() != mean.len() {
            return Err(Error::Dimension(format!(
                "mean has length {}, covariance is {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("mean".into()));
        }
        Ok(GaussianMeasure { mean, cov: SpdMatrix::new(cov)? })
    }

    pub fn standard(n: usize) -> Self {
        GaussianMeasure {
            mean: Vector::zeros(n),
            cov: SpdMatrix::identity(n),
        }
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn cov(&self) -> &SpdMatrix {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_density(&self, x: &Vector) -> f64 {
        let n = self.dim() as f64;
        let r = x - &self.mean;
        let prec = self.cov.inverse();
        -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + self.cov.log_det() + r.dot(&(prec.as_matrix() * &r)))
    }

    pub fn density(&self, x: &Vector) -> f64 {
        self.log_density(x).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<Vector> {
        let l = self.cov.cholesky_lower();
        (0..count)
            .map(|_| &self.mean + &l * random_vector(rng, self.dim()))
            .collect()
    }

    /// `E|X|^2 = |m|^2 + tr(Sigma)`.
    pub fn second_moment(&self) -> f64 {
        self.mean.norm_squared() + self.cov.as_matrix().trace()
    }

    /// Precomputed evaluator for many density calls.
    pub fn density_evaluator(&self) -> DensityEvaluator {
        let n = self.dim() as f64;
        DensityEvaluator {
            mean: self.mean.clone(),
            precision: self.cov.inverse().into_inner(),
            log_norm: -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + self.cov.log_det()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DensityEvaluator {
    mean: Vector,
    precision: Matrix,
    log_norm: f64,
}

impl DensityEvaluator {
    pub fn log_density(&self, x: &Vector) -> f64 {
        let r = x - &self.mean;
        self.log_norm - 0.5 * r.dot(&(&self.precision * &r))
    }

    pub fn density(&self, x: &Vector) -> f64 {
        self.log_density(x).exp()
    }
}

pub fn gaussian_density(mu: &GaussianMeasure, x: &Vector) -> f64 {
    mu.density(x)
}

/// `x -> linear * x + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub linear: Matrix,
    pub offset: Vector,
}

impl AffineMap {
    pub fn identity(n: usize) -> Self {
        AffineMap {
            linear: Matrix::identity(n, n),
            offset: Vector::zeros(n),
        }
    }

    pub fn linear(m: Matrix) -> Self {
        let n = m.nrows();
        AffineMap { linear: m, offset: Vector::zeros(n) }
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        &self.linear * x + &self.offset
    }

    /// `self o inner`.
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            linear: &self.linear * &inner.linear,
            offset: &self.linear * &inner.offset + &self.offset,
        }
    }

    pub fn jacobian_det(&self) -> f64 {
        self.linear.determinant()
    }
}

/// Mean and covariance of the image of `mu`, valid for any linear part.
pub fn pushforward_moments(map: &AffineMap, mu: &GaussianMeasure) -> (Vector, Matrix) {
    let mean = map.apply(&mu.mean);
    let cov = symmetrize(&(&map.linear * mu.cov.as_matrix() * map.linear.transpose()));
    (mean, cov)
}

/// Image of `mu`; fails with a not-SPD error if the linear part is singular.
pub fn pushforward_gaussian(map: &AffineMap, mu: &GaussianMeasure) -> Result<GaussianMeasure> {
    let (mean, cov) = pushforward_moments(map, mu);
    GaussianMeasure::new(mean, cov)
}

/// Euclidean Brenier map between Gaussians:
/// `L = S^{-1/2} (S^{1/2} Sigma_nu S^{1/2})^{1/2} S^{-1/2}` with `S = Sigma_mu`.
pub fn brenier_affine(mu: &GaussianMeasure, nu: &GaussianMeasure) -> Result<AffineMap> {
    if mu.dim() != nu.dim() {
        return Err(Error::Dimension(format!(
            "measures have dimensions {} and {}",
            mu.dim(),
            nu.dim()
        )));
    }
    let s_half = mu.cov.sqrt();
    let s_inv_half = mu.cov.inv_sqrt();
    let middle = SpdMatrix::new(s_half.as_matrix() * nu.cov.as_matrix() * s_half.as_matrix())?.sqrt();
    let linear = symmetrize(&(s_inv_half.as_matrix() * middle.as_matrix() * s_inv_half.as_matrix()));
    let offset = &nu.mean - &linear * &mu.mean;
    Ok(AffineMap { linear, offset })
}

/// The optimal map from `mu` (at time `t`) to `nu` (at time `s`) for the
/// cost `c^{t,s}`, with the pieces needed for intermediate maps.
#[derive(Debug, Clone, PartialEq)]
pub struct LqGaussianTransport {
    pub t: f64,
    pub s: f64,
    /// Euclidean Brenier map from `mu` to `(R3(s-t)^{-1})_# nu`.
    pub grad_phi: AffineMap,
    pub cost: CostMatrices,
    /// `x -> R3(s-t) grad_phi(x)`.
    pub map: AffineMap,
}

impl LqGaussianTransport {
    pub fn new(problem: &LqProblem, mu: &GaussianMeasure, nu: &GaussianMeasure, t: f64, s: f64) -> Result<Self> {
        if mu.dim() != problem.dim() || nu.dim() != problem.dim() {
            return Err(Error::Dimension(format!(
                "problem has dimension {}, measures have {} and {}",
                problem.dim(),
                mu.dim(),
                nu.dim()
            )));
        }
        let cost = cost_matrices(problem, t, s)?;
        let r3 = problem.flow_blocks(s - t).r3;
        let r3_inv = inverse(&r3, "R3").map_err(|e| Error::ConjugateTime(e.to_string()))?;
        let eta = pushforward_gaussian(&AffineMap::linear(r3_inv), nu)?;
        let grad_phi = brenier_affine(mu, &eta)?;
        let map = AffineMap {
            linear: &r3 * &grad_phi.linear,
            offset: &r3 * &grad_phi.offset,
        };
        Ok(LqGaussianTransport { t, s, grad_phi, cost, map })
    }

    /// `grad psi(x) = grad phi(x) - C x`, the initial costate of the optimal
    /// trajectory leaving `x`.
    pub fn grad_psi(&self) -> AffineMap {
        AffineMap {
            linear: &self.grad_phi.linear - &self.cost.c,
            offset: self.grad_phi.offset.clone(),
        }
    }

    /// `T_tau(x) = R3(tau - t) grad psi(x) + R4(tau - t) x` for `tau in [t, s]`.
    pub fn intermediate(&self, problem: &LqProblem, tau: f64) -> Result<AffineMap> {
        let span = self.s - self.t;
        if !(tau >= self.t - 1e-12 * span && tau <= self.s + 1e-12 * span) {
            return Err(Error::Argument(format!(
                "tau = {tau} outside [{}, {}]",
                self.t, self.s
            )));
        }
        let fb = problem.flow_blocks(tau - self.t);
        let gpsi = self.grad_psi();
        Ok(AffineMap {
            linear: &fb.r3 * &gpsi.linear + &fb.r4,
            offset: &fb.r3 * &gpsi.offset,
        })
    }

    /// Exact `E_mu[c^{t,s}(x, T(x))]`.
    pub fn expected_cost(&self, mu: &GaussianMeasure) -> f64 {
        let (c, d, e) = (&self.cost.c, &self.cost.d, &self.cost.e);
        let (m, b) = (&self.map.linear, &self.map.offset);
        let k = c + d * m + m.transpose() * d.transpose() + m.transpose() * e * m;
        let l = d * b + m.transpose() * (e * b);
        let c0 = 0.5 * b.dot(&(e * b));
        let sigma = mu.cov.as_matrix();
        0.5 * ((&k * sigma).trace() + mu.mean.dot(&(&k * &mu.mean))) + l.dot(&mu.mean) + c0
    }
}

/// `x -> R3(T) grad phi(x)` on the full horizon.
pub fn lq_transport_map(problem: &LqProblem, mu: &GaussianMeasure, nu: &GaussianMeasure) -> Result<AffineMap> {
    Ok(LqGaussianTransport::new(problem, mu, nu, 0.0, problem.horizon())?.map)
}

/// `T_tau` on the full horizon; the identity at 0 and the transport map at `T`.
pub fn intermediate_map(problem: &LqProblem, mu: &GaussianMeasure, nu: &GaussianMeasure, tau: f64) -> Result<AffineMap> {
    LqGaussianTransport::new(problem, mu, nu, 0.0, problem.horizon())?.intermediate(problem, tau)
}

/// `log |det|` of an affine map's linear part, failing unless it is positive.
pub fn positive_log_jacobian(map: &AffineMap) -> Result<f64> {
    let ld = log_abs_det_sign(&map.linear)?;
    if ld.sign <= 0 {
        return Err(Error::Singular(format!(
            "Jacobian determinant has sign {}",
            ld.sign
        )));
    }
    Ok(ld.log_abs)
}
