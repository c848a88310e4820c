//! LQ problem data, the linear Hamiltonian flow and its blocks, conjugate
//! times, the exponential map and closed-form optimal trajectories.
//!
//! The Hamiltonian of the problem `(A, B, Q, T)` is the quadratic form of
//!
//! ```text
//!     H = [ B B^T   A ]
//!         [ A^T     Q ]
//! ```
//!
//! on `(p, x)`, and its flow is `exp(-tau Omega H)` with
//! `Omega = [[0, I], [-I, 0]]`. The four `n x n` blocks of that flow,
//! `R1 R2 / R3 R4`, drive everything downstream: states evolve as
//! `x(tau) = R3(tau) p + R4(tau) x`, and `R3(t)` is singular exactly at the
//! conjugate times.

use crate::error::{Error, Result};
use crate::numerics::{
    ensure_finite, ensure_square, mat_exp, rank_with_tolerance, singular_values, solve_vec,
    symmetry_residual, Matrix, Vector, SINGULAR_REL_TOL, SYMMETRY_REL_TOL,
};

/// Relative rank tolerance for the Kalman matrix and for `rank B`.
pub const KALMAN_RANK_TOL: f64 = 1e-10;

/// Golden-section refinement stops once the bracket is this wide (relative).
const CONJUGATE_BRACKET_TOL: f64 = 1e-13;

/// Drift, control and state-cost matrices of an LQ system, without a horizon.
///
/// Holds the invariants that do not depend on time: `Q` symmetric,
/// `rank B = m <= n`, finite entries. Conjugate times are a property of the
/// system; whether a horizon is admissible is checked by [`LqProblem`].
#[derive(Debug, Clone, PartialEq)]
pub struct LqSystem {
    a: Matrix,
    b: Matrix,
    q: Matrix,
}

impl LqSystem {
    pub fn new(a: Matrix, b: Matrix, q: Matrix) -> Result<Self> {
        let n = ensure_square(&a, "A")?;
        ensure_square(&q, "Q")?;
        if q.nrows() != n {
            return Err(Error::Dimension(format!("Q is {0}x{0}, A is {n}x{n}", q.nrows())));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!("B has {} rows, expected {n}", b.nrows())));
        }
        let m = b.ncols();
        if m == 0 || m > n {
            return Err(Error::Dimension(format!("B has {m} columns, need 1..={n}")));
        }
        ensure_finite(&a, "A")?;
        ensure_finite(&b, "B")?;
        ensure_finite(&q, "Q")?;
        let asym = symmetry_residual(&q);
        if asym > SYMMETRY_REL_TOL {
            return Err(Error::InvalidProblem(format!(
                "Q is not symmetric (relative residual {asym:.3e})"
            )));
        }
        if rank_with_tolerance(&b, KALMAN_RANK_TOL) != m {
            return Err(Error::InvalidProblem(format!("B does not have full column rank {m}")));
        }
        Ok(LqSystem { a, b, q })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn controls(&self) -> usize {
        self.b.ncols()
    }

    pub fn kalman_check(&self) -> bool {
        kalman_rank(&self.a, &self.b) == self.dim()
    }

    /// `H = [[B B^T, A], [A^T, Q]]`.
    pub fn hamiltonian_matrix(&self) -> Matrix {
        let n = self.dim();
        let mut h = Matrix::zeros(2 * n, 2 * n);
        h.view_mut((0, 0), (n, n)).copy_from(&(&self.b * self.b.transpose()));
        h.view_mut((0, n), (n, n)).copy_from(&self.a);
        h.view_mut((n, 0), (n, n)).copy_from(&self.a.transpose());
        h.view_mut((n, n), (n, n)).copy_from(&self.q);
        h
    }

    /// The Hamiltonian vector field `-Omega H` as a `2n x 2n` matrix.
    pub fn generator(&self) -> Matrix {
        -symplectic_form(self.dim()) * self.hamiltonian_matrix()
    }

    pub fn flow_blocks(&self, tau: f64) -> FlowBlocks {
        let flow = mat_exp(&(self.generator() * tau)).expect("generator is square and finite");
        FlowBlocks::from_flow(tau, &flow)
    }

    /// Time-derivative of the flow blocks, read off `G exp(tau G)`.
    pub fn flow_block_derivatives(&self, tau: f64) -> FlowBlocks {
        let g = self.generator();
        let flow = mat_exp(&(&g * tau)).expect("generator is square and finite");
        FlowBlocks::from_flow(tau, &(g * flow))
    }

    pub fn r3(&self, tau: f64) -> Matrix {
        self.flow_blocks(tau).r3
    }

    /// `(-A, B, Q)`.
    pub fn backwards(&self) -> LqSystem {
        LqSystem {
            a: -&self.a,
            b: self.b.clone(),
            q: self.q.clone(),
        }
    }

    /// Smallest `t in (0, horizon]` at which `R3(t)` is singular.
    ///
    /// Scans the ratio `sigma_min(R3(t)) / sigma_max(exp(tG))` on a uniform
    /// grid, refines every local minimum by golden-section search, and accepts
    /// a minimum as a conjugate time when the ratio vanishes there (below
    /// [`SINGULAR_REL_TOL`], or a kink of `|.|`-type shape
    /// whose floor is at roundoff level). Returns `None` when no candidate
    /// qualifies up to the horizon.
    pub fn first_conjugate_time(&self, horizon: f64, grid_step: f64) -> Result<Option<f64>> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Argument(format!("horizon must be positive, got {horizon}")));
        }
        if !(grid_step > 0.0) {
            return Err(Error::Argument(format!("grid step must be positive, got {grid_step}")));
        }
        if grid_step >= horizon {
            return Err(Error::Argument(format!(
                "grid step {grid_step} must be smaller than the horizon {horizon}"
            )));
        }
        let g = self.generator();
        let ratio = |t: f64| -> f64 {
            let flow = mat_exp(&(&g * t)).expect("generator is square and finite");
            FlowBlocks::from_flow(t, &flow).r3_conditioning()
        };
        let steps = (horizon / grid_step).ceil() as usize;
        let times: Vec<f64> = (0..=steps)
            .map(|k| (k as f64 * grid_step).min(horizon))
            .collect();
        let values: Vec<f64> = times.iter().map(|&t| ratio(t)).collect();
        for k in 1..=steps {
            let left_ok = values[k] <= values[k - 1];
            let right_ok = k == steps || values[k] <= values[k + 1];
            if !(left_ok && right_ok) {
                continue;
            }
            let lo = times[k - 1];
            let hi = if k == steps { times[k] } else { times[k + 1] };
            let t = golden_section_min(&ratio, lo, hi);
            let f = ratio(t);
            if f <= SINGULAR_REL_TOL || is_zero_kink(&ratio, t, f) {
                if t <= horizon {
                    return Ok(Some(t));
                }
                return Ok(None);
            }
        }
        Ok(None)
    }
}

fn golden_section_min(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if hi - lo <= CONJUGATE_BRACKET_TOL * hi.abs().max(1.0) {
            break;
        }
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let mid = 0.5 * (lo + hi);
    let fm = f(mid);
    // return the best point seen in the final bracket
    [(mid, fm), (c, fc), (d, fd)]
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|p| p.0)
        .unwrap_or(mid)
}

// A singular value crossing zero makes sigma_min behave like |t - t*| near
// the crossing: the symmetric second difference at width h is about
// slope * h while the floor is at roundoff. A smooth positive minimum has a
// second difference of order h^2 instead.
fn is_zero_kink(f: &dyn Fn(f64) -> f64, t: f64, ft: f64) -> bool {
    let h = 1e-6 * t.abs().max(1.0);
    let rise = 0.5 * (f(t + h) + f(t - h)) - ft;
    rise > 0.0 && ft <= 1e-4 * rise
}

/// Rank of the Kalman matrix `[B, AB, ..., A^{n-1}B]`.
pub fn kalman_rank(a: &Matrix, b: &Matrix) -> usize {
    let n = a.nrows();
    let m = b.ncols();
    let mut k = Matrix::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        k.view_mut((0, i * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    rank_with_tolerance(&k, KALMAN_RANK_TOL)
}

/// Kalman controllability test on raw `(A, B)`.
pub fn kalman_check(a: &Matrix, b: &Matrix) -> Result<bool> {
    let n = ensure_square(a, "A")?;
    if b.nrows() != n {
        return Err(Error::Dimension(format!("B has {} rows, expected {n}", b.nrows())));
    }
    Ok(kalman_rank(a, b) == n)
}

/// `Omega = [[0, I], [-I, 0]]`.
pub fn symplectic_form(n: usize) -> Matrix {
    let mut omega = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        omega[(i, n + i)] = 1.0;
        omega[(n + i, i)] = -1.0;
    }
    omega
}

/// The four `n x n` blocks of `exp(-tau Omega H)` at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowBlocks {
    pub tau: f64,
    pub r1: Matrix,
    pub r2: Matrix,
    pub r3: Matrix,
    pub r4: Matrix,
}

impl FlowBlocks {
    pub fn from_flow(tau: f64, flow: &Matrix) -> Self {
        let n = flow.nrows() / 2;
        FlowBlocks {
            tau,
            r1: flow.view((0, 0), (n, n)).into_owned(),
            r2: flow.view((0, n), (n, n)).into_owned(),
            r3: flow.view((n, 0), (n, n)).into_owned(),
            r4: flow.view((n, n), (n, n)).into_owned(),
        }
    }

    pub fn dim(&self) -> usize {
        self.r1.nrows()
    }

    /// `sigma_min(R3) / sigma_max(flow)`, the scale-free conjugacy indicator.
    pub fn r3_conditioning(&self) -> f64 {
        let smin = singular_values(&self.r3).iter().cloned().fold(f64::INFINITY, f64::min);
        let scale = singular_values(&self.assemble()).iter().cloned().fold(0.0, f64::max);
        smin / scale
    }

    /// Conjugate-time error when `R3` is singular at the library tolerance.
    pub fn ensure_r3_regular(&self) -> Result<()> {
        if self.r3_conditioning() <= SINGULAR_REL_TOL {
            return Err(Error::ConjugateTime(format!("R3({}) is singular", self.tau)));
        }
        Ok(())
    }

    pub fn assemble(&self) -> Matrix {
        let n = self.dim();
        let mut g = Matrix::zeros(2 * n, 2 * n);
        g.view_mut((0, 0), (n, n)).copy_from(&self.r1);
        g.view_mut((0, n), (n, n)).copy_from(&self.r2);
        g.view_mut((n, 0), (n, n)).copy_from(&self.r3);
        g.view_mut((n, n), (n, n)).copy_from(&self.r4);
        g
    }

    /// Largest entry of `G^T Omega G - Omega`.
    pub fn symplectic_residual(&self) -> f64 {
        let g = self.assemble();
        let omega = symplectic_form(self.dim());
        (g.transpose() * &omega * &g - omega).amax()
    }

    /// Largest deviation from `R1(t)^T = R4(-t)`, `R2(t)^T = -R2(-t)`,
    /// `R3(t)^T = -R3(-t)`, given the blocks at `-t`.
    pub fn reflection_residual(&self, reflected: &FlowBlocks) -> f64 {
        let e1 = (self.r1.transpose() - &reflected.r4).amax();
        let e2 = (self.r2.transpose() + &reflected.r2).amax();
        let e3 = (self.r3.transpose() + &reflected.r3).amax();
        e1.max(e2).max(e3)
    }

    /// Blocks of the composed flow `self * other`, i.e. at `tau + sigma`.
    pub fn compose(&self, other: &FlowBlocks) -> FlowBlocks {
        FlowBlocks::from_flow(self.tau + other.tau, &(self.assemble() * other.assemble()))
    }
}

/// An LQ optimal control problem `(A, B, Q, T)` with `T` strictly before the
/// first conjugate time and the Kalman condition satisfied.
#[derive(Debug, Clone, PartialEq)]
pub struct LqProblem {
    system: LqSystem,
    horizon: f64,
}

impl LqProblem {
    pub fn new(a: Matrix, b: Matrix, q: Matrix, horizon: f64) -> Result<Self> {
        Self::from_system(LqSystem::new(a, b, q)?, horizon)
    }

    pub fn from_system(system: LqSystem, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidProblem(format!("horizon must be positive, got {horizon}")));
        }
        if !system.kalman_check() {
            return Err(Error::InvalidProblem("Kalman rank condition fails".into()));
        }
        if let Some(t) = system.first_conjugate_time(horizon, horizon / 2048.0)? {
            return Err(Error::ConjugateTime(format!(
                "first conjugate time {t:.10} does not exceed the horizon {horizon}"
            )));
        }
        Ok(LqProblem { system, horizon })
    }

    pub fn system(&self) -> &LqSystem {
        &self.system
    }

    pub fn a(&self) -> &Matrix {
        self.system.a()
    }

    pub fn b(&self) -> &Matrix {
        self.system.b()
    }

    pub fn q(&self) -> &Matrix {
        self.system.q()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn flow_blocks(&self, tau: f64) -> FlowBlocks {
        self.system.flow_blocks(tau)
    }

    pub fn hamiltonian_matrix(&self) -> Matrix {
        self.system.hamiltonian_matrix()
    }

    pub fn generator(&self) -> Matrix {
        self.system.generator()
    }

    pub fn kalman_check(&self) -> bool {
        self.system.kalman_check()
    }

    /// The backwards problem `(-A, B, Q, T)`. Conjugate times coincide with
    /// the forward ones, so this cannot fail for a valid forward problem.
    pub fn backwards(&self) -> LqProblem {
        LqProblem {
            system: self.system.backwards(),
            horizon: self.horizon,
        }
    }

    fn check_vec(&self, v: &Vector, what: &str) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "{what} has length {}, expected {}",
                v.len(),
                self.dim()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(what.to_string()));
        }
        Ok(())
    }

    /// `exp_{x,tau}(p) = R3(tau) p + R4(tau) x`.
    pub fn exp_map(&self, x: &Vector, p: &Vector, tau: f64) -> Result<Vector> {
        self.check_vec(x, "x")?;
        self.check_vec(p, "p")?;
        let fb = self.flow_blocks(tau);
        Ok(&fb.r3 * p + &fb.r4 * x)
    }

    /// `exp_{x,tau}^{-1}(y) = R3(tau)^{-1} (y - R4(tau) x)`.
    pub fn exp_map_inverse(&self, x: &Vector, y: &Vector, tau: f64) -> Result<Vector> {
        self.check_vec(x, "x")?;
        self.check_vec(y, "y")?;
        let fb = self.flow_blocks(tau);
        fb.ensure_r3_regular()?;
        solve_vec(&fb.r3, &(y - &fb.r4 * x), "R3")
            .map_err(|_| Error::ConjugateTime(format!("R3({tau}) is singular")))
    }

    /// Samples the unique optimal trajectory from `x` at time `t` to `y` at
    /// time `s` on a uniform grid of `grid_points` nodes.
    pub fn optimal_trajectory(
        &self,
        x: &Vector,
        y: &Vector,
        t: f64,
        s: f64,
        grid_points: usize,
    ) -> Result<Trajectory> {
        self.check_vec(x, "x")?;
        self.check_vec(y, "y")?;
        if !(0.0 <= t && t < s && s <= self.horizon * (1.0 + 1e-12)) {
            return Err(Error::Argument(format!(
                "need 0 <= t < s <= T, got t={t}, s={s}, T={}",
                self.horizon
            )));
        }
        if grid_points < 2 {
            return Err(Error::Argument("a trajectory needs at least 2 grid points".into()));
        }
        let p0 = self.exp_map_inverse(x, y, s - t)?;
        let bt = self.b().transpose();
        let mut traj = Trajectory {
            times: Vec::with_capacity(grid_points),
            states: Vec::with_capacity(grid_points),
            costates: Vec::with_capacity(grid_points),
            controls: Vec::with_capacity(grid_points),
        };
        let h = (s - t) / (grid_points - 1) as f64;
        for k in 0..grid_points {
            let tau = if k + 1 == grid_points { s } else { t + k as f64 * h };
            let fb = self.flow_blocks(tau - t);
            let p = &fb.r1 * &p0 + &fb.r2 * x;
            let state = if k + 1 == grid_points {
                y.clone()
            } else {
                &fb.r3 * &p0 + &fb.r4 * x
            };
            traj.controls.push(&bt * &p);
            traj.times.push(tau);
            traj.states.push(state);
            traj.costates.push(p);
        }
        Ok(traj)
    }
}

/// A sampled state/costate/control curve on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub costates: Vec<Vector>,
    pub controls: Vec<Vector>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest central-difference residual of `x' = A x + B u` over interior
    /// nodes.
    pub fn dynamics_residual(&self, a: &Matrix, b: &Matrix) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 1..self.len().saturating_sub(1) {
            let dt = self.times[k + 1] - self.times[k - 1];
            let xdot = (&self.states[k + 1] - &self.states[k - 1]) / dt;
            let rhs = a * &self.states[k] + b * &self.controls[k];
            worst = worst.max((xdot - rhs).amax());
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn m1(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    fn v1(v: f64) -> Vector {
        Vector::from_element(1, v)
    }

    fn rotation() -> LqSystem {
        LqSystem::new(m1(0.0), m1(1.0), m1(1.0)).unwrap()
    }

    fn free_particle(n: usize, horizon: f64) -> LqProblem {
        LqProblem::new(
            Matrix::zeros(n, n),
            Matrix::identity(n, n),
            Matrix::zeros(n, n),
            horizon,
        )
        .unwrap()
    }

    #[test]
    fn kalman_examples() {
        assert!(kalman_check(&Matrix::zeros(2, 2), &Matrix::identity(2, 2)).unwrap());
        let b = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        assert!(!kalman_check(&Matrix::zeros(2, 2), &b).unwrap());
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = Matrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!(kalman_check(&a, &b).unwrap());
        assert!(kalman_check(&a, &Matrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn hamiltonian_examples() {
        let sys = rotation();
        assert_eq!(sys.hamiltonian_matrix(), Matrix::identity(2, 2));
        assert_eq!(sys.generator(), Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        let sys = LqSystem::new(m1(1.0), m1(1.0), m1(1.0)).unwrap();
        assert_eq!(sys.hamiltonian_matrix(), Matrix::from_element(2, 2, 1.0));
        let sys = LqSystem::new(Matrix::zeros(3, 3), Matrix::identity(3, 3), Matrix::zeros(3, 3)).unwrap();
        let mut expected = Matrix::zeros(6, 6);
        for i in 0..3 {
            expected[(3 + i, i)] = 1.0;
        }
        assert_eq!(sys.generator(), expected);
    }

    #[test]
    fn flow_blocks_closed_forms() {
        let fp = free_particle(2, 1.0);
        for &tau in &[-0.7, 0.0, 0.4, 2.0] {
            let fb = fp.flow_blocks(tau);
            assert!((&fb.r1 - Matrix::identity(2, 2)).amax() < 1e-14);
            assert!(fb.r2.amax() < 1e-14);
            assert!((&fb.r3 - Matrix::identity(2, 2) * tau).amax() < 1e-14);
            assert!((&fb.r4 - Matrix::identity(2, 2)).amax() < 1e-14);
        }
        let rot = rotation();
        let nil = LqSystem::new(m1(1.0), m1(1.0), m1(1.0)).unwrap();
        for &tau in &[-1.0, 0.3, 1.0, 2.5] {
            let fb = rot.flow_blocks(tau);
            let want = [tau.cos(), -tau.sin(), tau.sin(), tau.cos()];
            let got = [fb.r1[(0, 0)], fb.r2[(0, 0)], fb.r3[(0, 0)], fb.r4[(0, 0)]];
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() < 1e-14);
            }
            let fb = nil.flow_blocks(tau);
            let want = [1.0 - tau, -tau, tau, 1.0 + tau];
            let got = [fb.r1[(0, 0)], fb.r2[(0, 0)], fb.r3[(0, 0)], fb.r4[(0, 0)]];
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn backwards_examples() {
        let fp = free_particle(2, 1.0);
        assert_eq!(fp.backwards(), fp);
        let p = LqProblem::new(m1(1.0), m1(1.0), m1(1.0), 1.0).unwrap();
        let back = p.backwards();
        assert_eq!(back.a()[(0, 0)], -1.0);
        for &tau in &[0.25, 0.5, 1.0] {
            let fb = back.flow_blocks(tau);
            // forward nilpotent blocks evaluated at -tau: (1+tau, tau, -tau, 1-tau)
            let want = [1.0 + tau, tau, -tau, 1.0 - tau];
            // backwards flow = (R1(-t), -R2(-t), -R3(-t), R4(-t))
            let want = [want[0], -want[1], -want[2], want[3]];
            let got = [fb.r1[(0, 0)], fb.r2[(0, 0)], fb.r3[(0, 0)], fb.r4[(0, 0)]];
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() < 1e-13, "{got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn conjugate_time_of_rotation_is_pi() {
        let t = rotation().first_conjugate_time(4.0, 4.0 / 2048.0).unwrap().unwrap();
        assert!((t - PI).abs() < 1e-8, "{t}");
    }

    #[test]
    fn conjugate_time_none_for_nonpositive_q() {
        let sys = LqSystem::new(Matrix::zeros(2, 2), Matrix::identity(2, 2), Matrix::zeros(2, 2)).unwrap();
        assert_eq!(sys.first_conjugate_time(50.0, 50.0 / 2048.0).unwrap(), None);
        let q = Matrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.3, -2.0]);
        let a = Matrix::from_row_slice(2, 2, &[0.1, 1.0, -0.5, 0.2]);
        let sys = LqSystem::new(a, Matrix::identity(2, 2), q).unwrap();
        assert_eq!(sys.first_conjugate_time(10.0, 10.0 / 2048.0).unwrap(), None);
    }

    #[test]
    fn conjugate_time_argument_errors() {
        assert!(matches!(
            rotation().first_conjugate_time(1.0, 1.0),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            rotation().first_conjugate_time(1.0, -0.1),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn problem_rejects_horizon_past_conjugate_time() {
        assert!(matches!(
            LqProblem::new(m1(0.0), m1(1.0), m1(1.0), 3.5),
            Err(Error::ConjugateTime(_))
        ));
        assert!(LqProblem::new(m1(0.0), m1(1.0), m1(1.0), 3.0).is_ok());
        let b = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        assert!(matches!(
            LqProblem::new(Matrix::zeros(2, 2), b, Matrix::zeros(2, 2), 1.0),
            Err(Error::InvalidProblem(_))
        ));
        let q = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            LqSystem::new(Matrix::zeros(2, 2), Matrix::identity(2, 2), q),
            Err(Error::InvalidProblem(_))
        ));
    }

    #[test]
    fn exp_map_examples() {
        let fp = free_particle(2, 1.0);
        let x = Vector::from_vec(vec![1.0, -2.0]);
        let p = Vector::from_vec(vec![0.5, 3.0]);
        assert_eq!(fp.exp_map(&x, &p, 0.0).unwrap(), x);
        let y = fp.exp_map(&x, &p, 0.7).unwrap();
        assert!((&y - (&x + &p * 0.7)).amax() < 1e-14);
        assert!((fp.exp_map_inverse(&x, &y, 0.7).unwrap() - &p).amax() < 1e-13);
        assert!(fp.exp_map_inverse(&x, &x, 1.0).unwrap().amax() < 1e-15);

        let rot = LqProblem::new(m1(0.0), m1(1.0), m1(1.0), FRAC_PI_2).unwrap();
        let (x, p, tau) = (0.8, -0.3, 1.1);
        let y = rot.exp_map(&v1(x), &v1(p), tau).unwrap();
        assert!((y[0] - (p * tau.sin() + x * tau.cos())).abs() < 1e-14);
    }

    #[test]
    fn exp_map_inverse_rejects_conjugate_time() {
        let sys = rotation();
        let p = LqProblem { system: sys, horizon: 3.0 };
        assert!(matches!(
            p.exp_map_inverse(&v1(1.0), &v1(0.0), PI),
            Err(Error::ConjugateTime(_))
        ));
    }

    #[test]
    fn trajectory_examples() {
        let fp = free_particle(2, 1.0);
        let x = Vector::from_vec(vec![0.0, 1.0]);
        let y = Vector::from_vec(vec![2.0, -1.0]);
        let tr = fp.optimal_trajectory(&x, &y, 0.0, 1.0, 11).unwrap();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            assert!((s - (&x + (&y - &x) * *t)).amax() < 1e-14);
        }
        let rot = LqProblem::new(m1(0.0), m1(1.0), m1(1.0), FRAC_PI_2).unwrap();
        let tr = rot.optimal_trajectory(&v1(1.0), &v1(0.0), 0.0, FRAC_PI_2, 33).unwrap();
        for k in 0..tr.len() {
            let t = tr.times[k];
            assert!((tr.states[k][0] - t.cos()).abs() < 1e-13);
            assert!((tr.costates[k][0] + t.sin()).abs() < 1e-13);
            assert!((tr.controls[k][0] + t.sin()).abs() < 1e-13);
        }
        assert!(fp.optimal_trajectory(&x, &y, 0.5, 0.5, 3).is_err());
        assert!(fp.optimal_trajectory(&x, &y, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn trajectory_dynamics_residual_converges() {
        let a = Matrix::from_row_slice(2, 2, &[0.2, 1.0, -0.3, 0.1]);
        let b = Matrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let q = Matrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, -0.2]);
        let p = LqProblem::new(a.clone(), b.clone(), q, 1.0).unwrap();
        let x = Vector::from_vec(vec![1.0, 0.0]);
        let y = Vector::from_vec(vec![-1.0, 2.0]);
        let coarse = p.optimal_trajectory(&x, &y, 0.0, 1.0, 33).unwrap().dynamics_residual(&a, &b);
        let fine = p.optimal_trajectory(&x, &y, 0.0, 1.0, 129).unwrap().dynamics_residual(&a, &b);
        assert!(fine < coarse / 10.0, "{coarse} {fine}");
    }
}
