//! Displacement interpolation and the action of measure curves.
//!
//! Discrete curves move every carried pair `(x_i, y_j)` of an optimal plan
//! along its optimal trajectory, keeping the plan weight. Gaussian curves are
//! images of `mu` under the intermediate maps `T_tau`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cost::cost_matrices;
use crate::dynamics::LqProblem;
use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::ot_discrete::{solve_kantorovich, DiscreteMeasure, TransportPlan};
use crate::ot_gaussian::{pushforward_gaussian, GaussianMeasure, LqGaussianTransport};

/// Default Monte-Carlo sample count for Gaussian cost estimates.
pub const DEFAULT_MC_SAMPLES: usize = 10_000;

/// Deepest dyadic refinement accepted by [`curve_action`].
pub const MAX_DYADIC_DEPTH: u32 = 12;

#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Discrete(DiscreteMeasure),
    Gaussian(GaussianMeasure),
}

impl Measure {
    pub fn dim(&self) -> usize {
        match self {
            Measure::Discrete(m) => m.dim(),
            Measure::Gaussian(g) => g.dim(),
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            Measure::Discrete(m) => m.second_moment(),
            Measure::Gaussian(g) => g.second_moment(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Measure::Discrete(_) => "discrete",
            Measure::Gaussian(_) => "gaussian",
        }
    }
}

/// A Monte-Carlo sample size and seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { samples: DEFAULT_MC_SAMPLES, seed: 0 }
    }
}

/// A value with its Monte-Carlo standard error (zero for exact values).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0 }
    }
}

/// Time-indexed measures on an ascending grid, all of one kind.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureCurve {
    times: Vec<f64>,
    measures: Vec<Measure>,
}

impl MeasureCurve {
    pub fn new(times: Vec<f64>, measures: Vec<Measure>) -> Result<Self> {
        if times.is_empty() || times.len() != measures.len() {
            return Err(Error::Argument(format!(
                "curve needs matching non-empty grids, got {} times and {} measures",
                times.len(),
                measures.len()
            )));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Argument("curve times must be strictly increasing".into()));
        }
        let kind = measures[0].kind();
        let dim = measures[0].dim();
        if measures.iter().any(|m| m.kind() != kind || m.dim() != dim) {
            return Err(Error::Argument("curve measures must share kind and dimension".into()));
        }
        Ok(MeasureCurve { times, measures })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn measures(&self) -> &[Measure] {
        &self.measures
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the grid node equal to `tau` up to a relative `1e-12`.
    pub fn index_of(&self, tau: f64) -> Result<usize> {
        let span = (self.times[self.len() - 1] - self.times[0]).abs().max(1.0);
        self.times
            .iter()
            .position(|&t| (t - tau).abs() <= 1e-12 * span)
            .ok_or_else(|| Error::Interpolation(format!("time {tau} is not a node of the curve grid")))
    }

    pub fn at(&self, tau: f64) -> Result<&Measure> {
        Ok(&self.measures[self.index_of(tau)?])
    }
}

/// One carried pair of a discrete optimal plan with its trajectory data.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomPath {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
    pub start: Vector,
    pub end: Vector,
    /// Initial costate `p0 = exp_{x,T}^{-1}(y)`.
    pub costate: Vector,
}

impl AtomPath {
    pub fn new(problem: &LqProblem, source: usize, target: usize, weight: f64, start: Vector, end: Vector) -> Result<Self> {
        let costate = problem.exp_map_inverse(&start, &end, problem.horizon())?;
        Ok(AtomPath { source, target, weight, start, end, costate })
    }

    pub fn position(&self, problem: &LqProblem, tau: f64) -> Vector {
        if tau == problem.horizon() {
            return self.end.clone();
        }
        let fb = problem.flow_blocks(tau);
        &fb.r3 * &self.costate + &fb.r4 * &self.start
    }
}

/// An optimal plan with one optimal trajectory per carried pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicalPlanDiscrete {
    pub atoms: Vec<AtomPath>,
    pub sources: usize,
    pub targets: usize,
}

impl DynamicalPlanDiscrete {
    /// Trajectories for every carried entry of `plan`, in row-major order.
    pub fn from_plan(problem: &LqProblem, mu: &DiscreteMeasure, nu: &DiscreteMeasure, plan: &TransportPlan) -> Result<Self> {
        check_dims(problem, mu.dim(), nu.dim())?;
        if plan.matrix.nrows() != mu.len() || plan.matrix.ncols() != nu.len() {
            return Err(Error::Dimension("plan shape does not match the measures".into()));
        }
        let atoms = plan
            .support()
            .into_iter()
            .map(|(i, j, w)| AtomPath::new(problem, i, j, w, mu.points()[i].clone(), nu.points()[j].clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(DynamicalPlanDiscrete { atoms, sources: mu.len(), targets: nu.len() })
    }

    pub fn optimal(problem: &LqProblem, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Self> {
        check_dims(problem, mu.dim(), nu.dim())?;
        let cost = cost_matrices(problem, 0.0, problem.horizon())?.pairwise(mu.points(), nu.points());
        let sol = solve_kantorovich(&cost, mu, nu)?;
        Self::from_plan(problem, mu, nu, &sol.plan)
    }

    /// `e_tau # Pi`, with weights renormalized against dropped dust.
    pub fn marginal(&self, problem: &LqProblem, tau: f64) -> Result<DiscreteMeasure> {
        let total: f64 = self.atoms.iter().map(|a| a.weight).sum();
        DiscreteMeasure::new(
            self.atoms.iter().map(|a| a.position(problem, tau)).collect(),
            self.atoms.iter().map(|a| a.weight / total).collect(),
        )
    }

    /// `(e_0, e_T) # Pi` as a plan between the original supports.
    pub fn endpoint_plan(&self) -> TransportPlan {
        let mut matrix = crate::numerics::Matrix::zeros(self.sources, self.targets);
        for a in &self.atoms {
            matrix[(a.source, a.target)] += a.weight;
        }
        TransportPlan { matrix }
    }

    pub fn curve(&self, problem: &LqProblem, times: &[f64]) -> Result<MeasureCurve> {
        check_grid(problem, times)?;
        let measures = times
            .iter()
            .map(|&t| self.marginal(problem, t).map(Measure::Discrete))
            .collect::<Result<Vec<_>>>()?;
        MeasureCurve::new(times.to_vec(), measures)
    }
}

fn check_dims(problem: &LqProblem, a: usize, b: usize) -> Result<()> {
    if a != problem.dim() || b != problem.dim() {
        return Err(Error::Dimension(format!(
            "problem has dimension {}, measures have {a} and {b}",
            problem.dim()
        )));
    }
    Ok(())
}

fn check_grid(problem: &LqProblem, times: &[f64]) -> Result<()> {
    let horizon = problem.horizon();
    if times.is_empty() {
        return Err(Error::Argument("time grid is empty".into()));
    }
    if times.iter().any(|&t| !(t >= 0.0 && t <= horizon)) {
        return Err(Error::Argument(format!("time grid must lie in [0, {horizon}]")));
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Argument("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Uniform grid of `points` nodes on `[0, T]`, with the last node exactly `T`.
pub fn uniform_grid(horizon: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![0.0];
    }
    (0..points)
        .map(|k| if k + 1 == points { horizon } else { horizon * k as f64 / (points - 1) as f64 })
        .collect()
}

/// Dyadic grid with `2^depth` intervals on `[0, T]`.
pub fn dyadic_grid(horizon: f64, depth: u32) -> Vec<f64> {
    uniform_grid(horizon, (1usize << depth) + 1)
}

pub fn displacement_interpolation(problem: &LqProblem, mu: &Measure, nu: &Measure, times: &[f64]) -> Result<MeasureCurve> {
    check_grid(problem, times)?;
    match (mu, nu) {
        (Measure::Discrete(a), Measure::Discrete(b)) => DynamicalPlanDiscrete::optimal(problem, a, b)?.curve(problem, times),
        (Measure::Gaussian(a), Measure::Gaussian(b)) => {
            let tr = LqGaussianTransport::new(problem, a, b, 0.0, problem.horizon())?;
            let measures = times
                .iter()
                .map(|&tau| {
                    if tau == 0.0 {
                        return Ok(Measure::Gaussian(a.clone()));
                    }
                    if tau == problem.horizon() {
                        return Ok(Measure::Gaussian(b.clone()));
                    }
                    pushforward_gaussian(&tr.intermediate(problem, tau)?, a).map(Measure::Gaussian)
                })
                .collect::<Result<Vec<_>>>()?;
            MeasureCurve::new(times.to_vec(), measures)
        }
        _ => Err(Error::Argument("both measures must be discrete or both Gaussian".into())),
    }
}

/// A discrete curve moving every pair of the independent coupling along its
/// optimal trajectory. Generically not a displacement interpolation.
pub fn product_coupling_curve(problem: &LqProblem, mu: &DiscreteMeasure, nu: &DiscreteMeasure, times: &[f64]) -> Result<MeasureCurve> {
    let matrix = crate::numerics::Matrix::from_fn(mu.len(), nu.len(), |i, j| mu.weights()[i] * nu.weights()[j]);
    DynamicalPlanDiscrete::from_plan(problem, mu, nu, &TransportPlan { matrix })?.curve(problem, times)
}

/// `C^{t,s}(mu, nu)`: exact LP for discrete measures, Monte-Carlo mean of
/// `c^{t,s}(x, T(x))` under the closed-form map for Gaussians.
pub fn kantorovich_cost(problem: &LqProblem, mu: &Measure, nu: &Measure, t: f64, s: f64, mc: McConfig) -> Result<Estimate> {
    match (mu, nu) {
        (Measure::Discrete(a), Measure::Discrete(b)) => discrete_cost(problem, a, b, t, s).map(Estimate::exact),
        (Measure::Gaussian(a), Measure::Gaussian(b)) => {
            let tr = LqGaussianTransport::new(problem, a, b, t, s)?;
            if mc.samples < 2 {
                return Err(Error::Argument("Monte-Carlo estimates need at least 2 samples".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
            let values: Vec<f64> = a
                .sample(&mut rng, mc.samples)
                .iter()
                .map(|x| tr.cost.eval(x, &tr.map.apply(x)))
                .collect();
            Ok(mean_and_stderr(&values))
        }
        _ => Err(Error::Argument("both measures must be discrete or both Gaussian".into())),
    }
}

/// Closed-form `C^{t,s}` for Gaussians and exact LP for discrete measures.
pub fn kantorovich_cost_exact(problem: &LqProblem, mu: &Measure, nu: &Measure, t: f64, s: f64) -> Result<f64> {
    match (mu, nu) {
        (Measure::Discrete(a), Measure::Discrete(b)) => discrete_cost(problem, a, b, t, s),
        (Measure::Gaussian(a), Measure::Gaussian(b)) => Ok(LqGaussianTransport::new(problem, a, b, t, s)?.expected_cost(a)),
        _ => Err(Error::Argument("both measures must be discrete or both Gaussian".into())),
    }
}

fn discrete_cost(problem: &LqProblem, mu: &DiscreteMeasure, nu: &DiscreteMeasure, t: f64, s: f64) -> Result<f64> {
    check_dims(problem, mu.dim(), nu.dim())?;
    let cost = cost_matrices(problem, t, s)?.pairwise(mu.points(), nu.points());
    Ok(solve_kantorovich(&cost, mu, nu)?.total_cost)
}

pub(crate) fn mean_and_stderr(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Estimate { value: mean, stderr: (var / n).sqrt() }
}

/// Largest partition sum `sum_i C^{tau_{i-1}, tau_i}(mu_{tau_{i-1}}, mu_{tau_i})`
/// over dyadic partitions of the curve's time span up to `dyadic_depth`.
/// Gaussian terms use the closed-form expected cost.
pub fn curve_action(problem: &LqProblem, curve: &MeasureCurve, dyadic_depth: u32) -> Result<f64> {
    if dyadic_depth > MAX_DYADIC_DEPTH {
        return Err(Error::Argument(format!(
            "dyadic depth limited to {MAX_DYADIC_DEPTH}, got {dyadic_depth}"
        )));
    }
    let (t0, t1) = (curve.times[0], curve.times[curve.len() - 1]);
    if !(t1 > t0) {
        return Err(Error::Interpolation("curve spans a single time".into()));
    }
    let mut best = f64::NEG_INFINITY;
    for depth in 0..=dyadic_depth {
        let pieces = 1usize << depth;
        let nodes: Vec<f64> = (0..=pieces)
            .map(|k| if k == pieces { t1 } else { t0 + (t1 - t0) * k as f64 / pieces as f64 })
            .collect();
        let mut total = 0.0;
        for w in nodes.windows(2) {
            let (a, b) = (curve.at(w[0])?, curve.at(w[1])?);
            total += kantorovich_cost_exact(problem, a, b, w[0], w[1])?;
        }
        best = best.max(total);
    }
    Ok(best)
}

/// `C^{t1,t2} + C^{t2,t3} - C^{t1,t3}` for curve nodes `t1 < t2 < t3`.
///
/// Gaussian terms are Monte-Carlo estimates over coupled samples: `x ~ mu_{t1}`
/// is pushed through the optimal map to `t2` and on to `t3`. The reported
/// standard error combines the three terms' standard errors.
pub fn additivity_check(problem: &LqProblem, curve: &MeasureCurve, tau1: f64, tau2: f64, tau3: f64, mc: McConfig) -> Result<Estimate> {
    if !(tau1 < tau2 && tau2 < tau3) {
        return Err(Error::Argument(format!(
            "need tau1 < tau2 < tau3, got {tau1}, {tau2}, {tau3}"
        )));
    }
    let (m1, m2, m3) = (curve.at(tau1)?, curve.at(tau2)?, curve.at(tau3)?);
    match (m1, m2, m3) {
        (Measure::Gaussian(a), Measure::Gaussian(b), Measure::Gaussian(c)) => {
            if mc.samples < 2 {
                return Err(Error::Argument("Monte-Carlo estimates need at least 2 samples".into()));
            }
            let t12 = LqGaussianTransport::new(problem, a, b, tau1, tau2)?;
            let t23 = LqGaussianTransport::new(problem, b, c, tau2, tau3)?;
            let t13 = LqGaussianTransport::new(problem, a, c, tau1, tau3)?;
            let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
            let xs = a.sample(&mut rng, mc.samples);
            let mut terms = [Vec::new(), Vec::new(), Vec::new()];
            for x in &xs {
                let x2 = t12.map.apply(x);
                let x3 = t23.map.apply(&x2);
                terms[0].push(t12.cost.eval(x, &x2));
                terms[1].push(t23.cost.eval(&x2, &x3));
                terms[2].push(t13.cost.eval(x, &t13.map.apply(x)));
            }
            let [e12, e23, e13] = terms.map(|v| mean_and_stderr(&v));
            Ok(Estimate {
                value: e12.value + e23.value - e13.value,
                stderr: (e12.stderr.powi(2) + e23.stderr.powi(2) + e13.stderr.powi(2)).sqrt(),
            })
        }
        _ => {
            let c12 = kantorovich_cost_exact(problem, m1, m2, tau1, tau2)?;
            let c23 = kantorovich_cost_exact(problem, m2, m3, tau2, tau3)?;
            let c13 = kantorovich_cost_exact(problem, m1, m3, tau1, tau3)?;
            Ok(Estimate::exact(c12 + c23 - c13))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;
    use crate::sampling::{random_problem, random_spd, random_vector, random_weights};
    use rand::Rng;

    fn free_particle(n: usize, t: f64) -> LqProblem {
        LqProblem::new(Matrix::zeros(n, n), Matrix::identity(n, n), Matrix::zeros(n, n), t).unwrap()
    }

    fn random_discrete(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DiscreteMeasure {
        DiscreteMeasure::new((0..k).map(|_| random_vector(rng, n)).collect(), random_weights(rng, k)).unwrap()
    }

    fn random_gaussian(rng: &mut ChaCha8Rng, n: usize) -> GaussianMeasure {
        GaussianMeasure::new(random_vector(rng, n), random_spd(rng, n, 0.2).into_inner()).unwrap()
    }

    #[test]
    fn dirac_to_dirac_is_a_straight_line_for_free_particle() {
        let p = free_particle(2, 2.0);
        let x = Vector::from_vec(vec![1.0, -1.0]);
        let y = Vector::from_vec(vec![3.0, 5.0]);
        let mu = Measure::Discrete(DiscreteMeasure::dirac(x.clone()).unwrap());
        let nu = Measure::Discrete(DiscreteMeasure::dirac(y.clone()).unwrap());
        let times = uniform_grid(2.0, 9);
        let curve = displacement_interpolation(&p, &mu, &nu, &times).unwrap();
        for (t, m) in curve.times().iter().zip(curve.measures()) {
            let Measure::Discrete(d) = m else { panic!("kind") };
            let want = &x + (&y - &x) * (t / 2.0);
            assert!((&d.points()[0] - want).amax() < 1e-13);
        }
    }

    #[test]
    fn identical_measures_give_constant_curve_without_drift() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = free_particle(2, 1.0);
        let mu = Measure::Discrete(random_discrete(&mut rng, 2, 5));
        let curve = displacement_interpolation(&p, &mu, &mu, &uniform_grid(1.0, 5)).unwrap();
        let Measure::Discrete(start) = &curve.measures()[0] else { panic!() };
        for m in curve.measures() {
            let Measure::Discrete(d) = m else { panic!() };
            for (a, b) in d.points().iter().zip(start.points()) {
                assert!((a - b).amax() < 1e-13);
            }
        }
        assert!(curve_action(&p, &curve, 2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn two_atom_cost() {
        let p = LqProblem::new(
            Matrix::from_element(1, 1, 0.0),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, 1.0),
            std::f64::consts::FRAC_PI_2,
        )
        .unwrap();
        let pts = vec![Vector::from_element(1, -1.0), Vector::from_element(1, 1.0)];
        let m = Measure::Discrete(DiscreteMeasure::uniform(pts).unwrap());
        let c = kantorovich_cost(&p, &m, &m, 0.0, p.horizon(), McConfig::default()).unwrap();
        assert!((c.value + 1.0).abs() < 1e-12);
        assert_eq!(c.stderr, 0.0);
    }

    #[test]
    fn discrete_interpolation_is_additive_and_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let n = rng.random_range(1..=3);
            let p = random_problem(&mut rng, n);
            let a = random_discrete(&mut rng, n, 5);
            let b = random_discrete(&mut rng, n, 4);
            let times = dyadic_grid(p.horizon(), 3);
            let plan = DynamicalPlanDiscrete::optimal(&p, &a, &b).unwrap();
            let curve = plan.curve(&p, &times).unwrap();
            let t = p.horizon();
            let full = kantorovich_cost_exact(&p, &Measure::Discrete(a.clone()), &Measure::Discrete(b.clone()), 0.0, t).unwrap();
            for k in 1..times.len() - 1 {
                let gap = additivity_check(&p, &curve, 0.0, times[k], t, McConfig::default()).unwrap();
                assert!(gap.value.abs() < 1e-6 * (1.0 + full.abs()), "{}", gap.value);
            }
            for depth in 0..=3 {
                let act = curve_action(&p, &curve, depth).unwrap();
                assert!((act - full).abs() < 1e-6 * (1.0 + full.abs()));
            }
            // bijection: endpoints reproduce the optimal plan
            let cost = cost_matrices(&p, 0.0, t).unwrap().pairwise(a.points(), b.points());
            let sol = solve_kantorovich(&cost, &a, &b).unwrap();
            assert!((plan.endpoint_plan().matrix - &sol.plan.matrix).amax() < 1e-12);
            // restriction (mu_t, mu_s) keeps the carried pairing optimal
            let (i, j) = (2, 6);
            let (mi, mj) = (curve.at(times[i]).unwrap(), curve.at(times[j]).unwrap());
            let restricted = kantorovich_cost_exact(&p, mi, mj, times[i], times[j]).unwrap();
            let along: f64 = {
                let cm = cost_matrices(&p, times[i], times[j]).unwrap();
                plan.atoms
                    .iter()
                    .map(|atom| atom.weight * cm.eval(&atom.position(&p, times[i]), &atom.position(&p, times[j])))
                    .sum()
            };
            assert!((restricted - along).abs() < 1e-6 * (1.0 + along.abs()));
        }
    }

    #[test]
    fn product_coupling_is_strictly_suboptimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let p = random_problem(&mut rng, 2);
        let a = random_discrete(&mut rng, 2, 4);
        let b = random_discrete(&mut rng, 2, 4);
        let times = dyadic_grid(p.horizon(), 2);
        let curve = product_coupling_curve(&p, &a, &b, &times).unwrap();
        let gap = additivity_check(&p, &curve, 0.0, times[2], p.horizon(), McConfig::default()).unwrap();
        assert!(gap.value > 1e-6, "{}", gap.value);
        let full = kantorovich_cost_exact(&p, &Measure::Discrete(a), &Measure::Discrete(b), 0.0, p.horizon()).unwrap();
        let act = curve_action(&p, &curve, 2).unwrap();
        assert!(act > full + 1e-6);
        assert!(curve_action(&p, &curve, 1).unwrap() <= act + 1e-12);
    }

    #[test]
    fn gaussian_interpolation_is_additive() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let p = random_problem(&mut rng, 2);
        let mu = Measure::Gaussian(random_gaussian(&mut rng, 2));
        let nu = Measure::Gaussian(random_gaussian(&mut rng, 2));
        let times = dyadic_grid(p.horizon(), 2);
        let curve = displacement_interpolation(&p, &mu, &nu, &times).unwrap();
        let gap = additivity_check(&p, &curve, 0.0, times[1], p.horizon(), McConfig::default()).unwrap();
        assert!(gap.value.abs() <= 3.0 * gap.stderr + 1e-9, "{gap:?}");
        let full = kantorovich_cost_exact(&p, &mu, &nu, 0.0, p.horizon()).unwrap();
        let act = curve_action(&p, &curve, 2).unwrap();
        assert!((act - full).abs() < 1e-6 * (1.0 + full.abs()));
        let mc = kantorovich_cost(&p, &mu, &nu, 0.0, p.horizon(), McConfig::default()).unwrap();
        assert!((mc.value - full).abs() < 4.0 * mc.stderr);
    }

    #[test]
    fn grid_errors() {
        let p = free_particle(1, 1.0);
        let m = Measure::Discrete(DiscreteMeasure::dirac(Vector::zeros(1)).unwrap());
        let g = Measure::Gaussian(GaussianMeasure::standard(1));
        assert!(displacement_interpolation(&p, &m, &g, &[0.0, 1.0]).is_err());
        assert!(displacement_interpolation(&p, &m, &m, &[0.0, 2.0]).is_err());
        assert!(displacement_interpolation(&p, &m, &m, &[0.5, 0.2]).is_err());
        let curve = displacement_interpolation(&p, &m, &m, &[0.0, 0.3, 1.0]).unwrap();
        assert!(matches!(curve_action(&p, &curve, 1), Err(Error::Interpolation(_))));
        assert!(matches!(curve_action(&p, &curve, 13), Err(Error::Argument(_))));
        assert!(matches!(
            additivity_check(&p, &curve, 0.3, 0.3, 1.0, McConfig::default()),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            additivity_check(&p, &curve, 0.0, 0.5, 1.0, McConfig::default()),
            Err(Error::Interpolation(_))
        ));
    }

    #[test]
    fn second_moment_varies_continuously() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let p = random_problem(&mut rng, 2);
        let a = Measure::Discrete(random_discrete(&mut rng, 2, 4));
        let b = Measure::Discrete(random_discrete(&mut rng, 2, 4));
        let coarse = displacement_interpolation(&p, &a, &b, &uniform_grid(p.horizon(), 65)).unwrap();
        let fine = displacement_interpolation(&p, &a, &b, &uniform_grid(p.horizon(), 129)).unwrap();
        let jump = |c: &MeasureCurve| {
            c.measures()
                .windows(2)
                .map(|w| (w[1].second_moment() - w[0].second_moment()).abs())
                .fold(0.0, f64::max)
        };
        // halving the step roughly halves the largest increment
        assert!(jump(&fine) < 0.75 * jump(&coarse));
    }
}
