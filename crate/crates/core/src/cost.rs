//! Closed-form LQ transport costs.
//!
//! For an interval `[t, s]` with `h = s - t` the cost between `x` and `y` is the
//! quadratic form `c(x, y) = 1/2 x^T C x + x^T D y + 1/2 y^T E y` with
//! `C = R3(h)^{-1} R4(h)`, `D = -R3(h)^{-1}` and `E = -R3(-h)^{-1} R4(-h)`.

use crate::dynamics::{LqProblem, Trajectory};
use crate::error::{Error, Result};
use crate::numerics::{inverse, operator_norm, symmetrize, Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrices {
    pub t: f64,
    pub s: f64,
    pub c: Matrix,
    pub d: Matrix,
    pub e: Matrix,
}

impl CostMatrices {
    pub fn dim(&self) -> usize {
        self.c.nrows()
    }

    /// `c(x, y)`. Panics if the vectors do not have length `dim()`.
    pub fn eval(&self, x: &Vector, y: &Vector) -> f64 {
        0.5 * x.dot(&(&self.c * x)) + x.dot(&(&self.d * y)) + 0.5 * y.dot(&(&self.e * y))
    }

    /// `grad_x c = C x + D y`.
    pub fn grad_x(&self, x: &Vector, y: &Vector) -> Vector {
        &self.c * x + &self.d * y
    }

    /// `grad_y c = D^T x + E y`.
    pub fn grad_y(&self, x: &Vector, y: &Vector) -> Vector {
        self.d.tr_mul(x) + &self.e * y
    }

    /// Cost matrix `c(x_i, y_j)` between two point clouds.
    pub fn pairwise(&self, xs: &[Vector], ys: &[Vector]) -> Matrix {
        Matrix::from_fn(xs.len(), ys.len(), |i, j| self.eval(&xs[i], &ys[j]))
    }

    /// A constant `L` with `|c(x, y)| <= L (|x|^2 + |y|^2)`.
    pub fn quadratic_bound(&self) -> f64 {
        let (nc, nd, ne) = (
            operator_norm(&self.c),
            operator_norm(&self.d),
            operator_norm(&self.e),
        );
        0.5 * (nc + nd).max(nd + ne)
    }

    /// Same matrices with the roles of source and target exchanged, i.e.
    /// the cost of the backwards problem.
    pub fn transposed(&self) -> CostMatrices {
        CostMatrices {
            t: self.t,
            s: self.s,
            c: self.e.clone(),
            d: self.d.transpose(),
            e: self.c.clone(),
        }
    }
}

fn check_interval(problem: &LqProblem, t: f64, s: f64) -> Result<()> {
    let horizon = problem.horizon();
    if !(t >= 0.0 && t < s && s <= horizon * (1.0 + 1e-12)) {
        return Err(Error::Argument(format!(
            "need 0 <= t < s <= T, got t={t}, s={s}, T={horizon}"
        )));
    }
    Ok(())
}

pub fn cost_matrices(problem: &LqProblem, t: f64, s: f64) -> Result<CostMatrices> {
    check_interval(problem, t, s)?;
    let h = s - t;
    let fwd = problem.flow_blocks(h);
    let bwd = problem.flow_blocks(-h);
    fwd.ensure_r3_regular()?;
    bwd.ensure_r3_regular()?;
    let r3_inv = inverse(&fwd.r3, "R3(h)").map_err(|e| Error::ConjugateTime(e.to_string()))?;
    let r3m_inv = inverse(&bwd.r3, "R3(-h)").map_err(|e| Error::ConjugateTime(e.to_string()))?;
    Ok(CostMatrices {
        t,
        s,
        c: symmetrize(&(&r3_inv * &fwd.r4)),
        d: -r3_inv,
        e: symmetrize(&(-(r3m_inv * &bwd.r4))),
    })
}

pub fn cost_eval(cm: &CostMatrices, x: &Vector, y: &Vector) -> f64 {
    cm.eval(x, y)
}

pub fn cost_grad_x(cm: &CostMatrices, x: &Vector, y: &Vector) -> Vector {
    cm.grad_x(x, y)
}

/// Integrates `1/2 (|u|^2 - x^T Q x)` along a sampled trajectory with composite
/// Simpson (a 3/8 panel closes an odd interval count).
pub fn action_eval(problem: &LqProblem, trajectory: &Trajectory) -> Result<f64> {
    let len = trajectory.len();
    if len < 3 {
        return Err(Error::Argument(format!(
            "action quadrature needs at least 3 grid points, got {len}"
        )));
    }
    if trajectory.controls.len() != len || trajectory.states.len() != len {
        return Err(Error::Argument("trajectory arrays have different lengths".into()));
    }
    let q = problem.q();
    let values: Vec<f64> = trajectory
        .states
        .iter()
        .zip(&trajectory.controls)
        .map(|(x, u)| 0.5 * (u.norm_squared() - x.dot(&(q * x))))
        .collect();
    let h = (trajectory.times[len - 1] - trajectory.times[0]) / (len - 1) as f64;
    Ok(uniform_simpson(&values, h))
}

/// Composite Simpson on equally spaced samples (at least 3).
pub fn uniform_simpson(values: &[f64], h: f64) -> f64 {
    let intervals = values.len() - 1;
    let simpson = |v: &[f64]| -> f64 {
        let mut acc = v[0] + v[v.len() - 1];
        for (k, f) in v.iter().enumerate().take(v.len() - 1).skip(1) {
            acc += if k % 2 == 1 { 4.0 * f } else { 2.0 * f };
        }
        acc * h / 3.0
    };
    if intervals % 2 == 0 {
        return simpson(values);
    }
    let split = intervals - 3;
    let tail = &values[split..];
    let three_eighths = 3.0 * h / 8.0 * (tail[0] + 3.0 * tail[1] + 3.0 * tail[2] + tail[3]);
    if split == 0 {
        three_eighths
    } else {
        simpson(&values[..=split]) + three_eighths
    }
}

/// `c^{t1,t2}(x, z) + c^{t2,t3}(z, y) - c^{t1,t3}(x, y)`.
#[allow(clippy::too_many_arguments)]
pub fn subadditivity_gap(
    problem: &LqProblem,
    x: &Vector,
    z: &Vector,
    y: &Vector,
    tau1: f64,
    tau2: f64,
    tau3: f64,
) -> Result<f64> {
    if !(tau1 < tau2 && tau2 < tau3) {
        return Err(Error::Argument(format!(
            "need tau1 < tau2 < tau3, got {tau1}, {tau2}, {tau3}"
        )));
    }
    let n = problem.dim();
    for (v, name) in [(x, "x"), (z, "z"), (y, "y")] {
        if v.len() != n {
            return Err(Error::Dimension(format!("{name} has length {}, expected {n}", v.len())));
        }
    }
    let c12 = cost_matrices(problem, tau1, tau2)?;
    let c23 = cost_matrices(problem, tau2, tau3)?;
    let c13 = cost_matrices(problem, tau1, tau3)?;
    Ok(c12.eval(x, z) + c23.eval(z, y) - c13.eval(x, y))
}
