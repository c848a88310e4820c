//! Exact Kantorovich problems between finitely supported measures.
//!
//! Plans come from a transportation simplex, so they are vertices of the
//! transport polytope and the returned potentials certify optimality:
//! `psi_c(y_j) - psi(x_i) <= c_ij` everywhere, with equality on the support.
//! Costs may be negative; nothing is shifted.

mod simplex;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};

/// Plan entries above this value count as carried mass.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

/// Marginals must agree in total mass to this absolute tolerance.
pub const MARGINAL_TOL: f64 = 1e-9;

/// Measure weights must sum to one within this tolerance.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Largest instance the permutation oracle accepts.
pub const BRUTE_FORCE_MAX: usize = 9;

/// Largest cycle length [`verify_cyclical_monotonicity`] enumerates.
pub const MAX_CYCLE_LEN: usize = 6;

/// Weighted atoms in `R^n`. Duplicate points are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<Vector>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vector>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Argument("a discrete measure needs at least one atom".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::Dimension(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let n = points[0].len();
        if n == 0 {
            return Err(Error::Dimension("points must have positive dimension".into()));
        }
        for (k, p) in points.iter().enumerate() {
            if p.len() != n {
                return Err(Error::Dimension(format!("point {k} has dimension {}, expected {n}", p.len())));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("point {k}")));
            }
        }
        if let Some(k) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Argument(format!("weight {k} must be positive and finite")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Argument(format!("weights sum to {total}, expected 1")));
        }
        Ok(DiscreteMeasure { points, weights })
    }

    pub fn uniform(points: Vec<Vector>) -> Result<Self> {
        let k = points.len().max(1);
        Self::new(points, vec![1.0 / k as f64; k])
    }

    pub fn dirac(point: Vector) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn mean(&self) -> Vector {
        self.points
            .iter()
            .zip(&self.weights)
            .fold(Vector::zeros(self.dim()), |acc, (p, w)| acc + p * *w)
    }

    pub fn second_moment(&self) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * p.norm_squared()).sum()
    }
}

/// An `N x M` coupling matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub matrix: Matrix,
}

impl TransportPlan {
    /// `(i, j, mass)` for every entry above [`SUPPORT_THRESHOLD`], row-major.
    pub fn support(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.matrix.nrows() {
            for j in 0..self.matrix.ncols() {
                let w = self.matrix[(i, j)];
                if w > SUPPORT_THRESHOLD {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// Largest deviation of the row and column sums from the given weights.
    pub fn marginal_residual(&self, row_weights: &[f64], col_weights: &[f64]) -> f64 {
        let rows = self
            .matrix
            .row_iter()
            .zip(row_weights)
            .map(|(r, w)| (r.sum() - w).abs());
        let cols = self
            .matrix
            .column_iter()
            .zip(col_weights)
            .map(|(c, w)| (c.sum() - w).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }

    pub fn total_cost(&self, cost: &Matrix) -> f64 {
        self.matrix.component_mul(cost).sum()
    }

    /// For a plan supported on a permutation, the target index of each row.
    pub fn as_permutation(&self) -> Vec<usize> {
        self.matrix
            .row_iter()
            .map(|r| r.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(j, _)| j).unwrap_or(0))
            .collect()
    }
}

/// Kantorovich potentials on the two supports.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialPair {
    pub psi: Vec<f64>,
    pub psi_c: Vec<f64>,
}

impl PotentialPair {
    /// `sum_j nu_j psi_c(y_j) - sum_i mu_i psi(x_i)`.
    pub fn dual_value(&self, mu: &[f64], nu: &[f64]) -> f64 {
        let a: f64 = self.psi.iter().zip(mu).map(|(p, w)| p * w).sum();
        let b: f64 = self.psi_c.iter().zip(nu).map(|(p, w)| p * w).sum();
        b - a
    }

    /// Largest violation of `psi_c(y_j) <= psi(x_i) + c_ij`, zero if feasible.
    pub fn feasibility_violation(&self, cost: &Matrix) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, p) in self.psi.iter().enumerate() {
            for (j, q) in self.psi_c.iter().enumerate() {
                worst = worst.max(q - p - cost[(i, j)]);
            }
        }
        worst
    }

    /// Largest `|psi(x_i) + c_ij - psi_c(y_j)|` over the plan's support.
    pub fn slackness_residual(&self, plan: &TransportPlan, cost: &Matrix) -> f64 {
        plan.support()
            .into_iter()
            .map(|(i, j, _)| (self.psi[i] + cost[(i, j)] - self.psi_c[j]).abs())
            .fold(0.0, f64::max)
    }

    /// Shifts both potentials by `k`; the contact set is unchanged.
    pub fn shifted(&self, k: f64) -> PotentialPair {
        PotentialPair {
            psi: self.psi.iter().map(|p| p + k).collect(),
            psi_c: self.psi_c.iter().map(|p| p + k).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KantorovichSolution {
    pub plan: TransportPlan,
    pub potentials: PotentialPair,
    pub total_cost: f64,
}

pub fn solve_kantorovich(cost: &Matrix, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<KantorovichSolution> {
    solve_transport(cost, mu.weights(), nu.weights())
}

/// Same as [`solve_kantorovich`] on raw weight vectors.
pub fn solve_transport(cost: &Matrix, mu: &[f64], nu: &[f64]) -> Result<KantorovichSolution> {
    if mu.is_empty() || nu.is_empty() {
        return Err(Error::Argument("marginals must be non-empty".into()));
    }
    if cost.nrows() != mu.len() || cost.ncols() != nu.len() {
        return Err(Error::Dimension(format!(
            "cost is {}x{}, marginals have {} and {} atoms",
            cost.nrows(),
            cost.ncols(),
            mu.len(),
            nu.len()
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("cost matrix".into()));
    }
    if mu.iter().chain(nu).any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Argument("marginal weights must be finite and nonnegative".into()));
    }
    let (sa, sb): (f64, f64) = (mu.iter().sum(), nu.iter().sum());
    if (sa - sb).abs() > MARGINAL_TOL {
        return Err(Error::Argument(format!(
            "infeasible marginals: masses {sa} and {sb} differ"
        )));
    }
    let out = simplex::transportation_simplex(cost, mu, nu)?;
    let plan = TransportPlan { matrix: out.plan };
    let total_cost = plan.total_cost(cost);
    let potentials = PotentialPair {
        psi: out.u.iter().map(|u| -u).collect(),
        psi_c: out.v,
    };
    Ok(KantorovichSolution { plan, potentials, total_cost })
}

/// Exhaustive minimum over permutations for uniform weights `1/N`.
pub fn brute_force_oracle(cost: &Matrix) -> Result<(Vec<usize>, f64)> {
    let n = cost.nrows();
    if n == 0 || cost.ncols() != n {
        return Err(Error::Dimension(format!(
            "oracle needs a non-empty square cost, got {}x{}",
            cost.nrows(),
            cost.ncols()
        )));
    }
    if n > BRUTE_FORCE_MAX {
        return Err(Error::Guard(format!(
            "brute force limited to N <= {BRUTE_FORCE_MAX}, got {n}"
        )));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for perm in (0..n).permutations(n) {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
        if best.as_ref().is_none_or(|(_, b)| total < *b) {
            best = Some((perm, total));
        }
    }
    let (perm, total) = best.expect("at least one permutation");
    Ok((perm, total / n as f64))
}

/// `psi^{c+}(y_j) = min_i psi(x_i) + c_ij`.
pub fn c_transform(psi: &[f64], cost: &Matrix) -> Vec<f64> {
    (0..cost.ncols())
        .map(|j| {
            psi.iter()
                .enumerate()
                .map(|(i, p)| p + cost[(i, j)])
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// `phi^{c-}(x_i) = max_j phi(y_j) - c_ij`.
pub fn inverse_c_transform(phi: &[f64], cost: &Matrix) -> Vec<f64> {
    (0..cost.nrows())
        .map(|i| {
            phi.iter()
                .enumerate()
                .map(|(j, p)| p - cost[(i, j)])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// A cyclic reassignment of carried pairs that lowers the total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleViolation {
    /// The carried pairs `(i_k, j_k)`; the improvement sends `x_{i_k}` to
    /// `y_{j_{k+1}}`.
    pub cycle: Vec<(usize, usize)>,
    /// Cost decrease of the reassignment, weighted by the smallest mass moved.
    pub gap: f64,
}

/// Enumerates every cycle of at most `cycle_len_max` distinct carried pairs.
/// Returns the first one whose shift lowers the cost by more than a relative
/// `1e-9`, or `None` if the support is cyclically monotone up to that length.
pub fn verify_cyclical_monotonicity(
    plan: &TransportPlan,
    cost: &Matrix,
    cycle_len_max: usize,
) -> Result<Option<CycleViolation>> {
    if cycle_len_max > MAX_CYCLE_LEN {
        return Err(Error::Guard(format!(
            "cycle length limited to {MAX_CYCLE_LEN}, got {cycle_len_max}"
        )));
    }
    if plan.matrix.shape() != cost.shape() {
        return Err(Error::Dimension("plan and cost shapes differ".into()));
    }
    let support = plan.support();
    for len in 2..=cycle_len_max.min(support.len()) {
        // rotations of a cycle are equivalent, so the first pair is the smallest index
        for first in 0..support.len() {
            for rest in (first + 1..support.len()).permutations(len - 1) {
                let idx: Vec<usize> = std::iter::once(first).chain(rest).collect();
                let pairs: Vec<(usize, usize, f64)> = idx.iter().map(|&k| support[k]).collect();
                let original: f64 = pairs.iter().map(|&(i, j, _)| cost[(i, j)]).sum();
                let shifted: f64 = (0..len)
                    .map(|k| cost[(pairs[k].0, pairs[(k + 1) % len].1)])
                    .sum();
                let scale: f64 = pairs.iter().map(|&(i, j, _)| cost[(i, j)].abs()).sum::<f64>().max(1.0);
                if original - shifted > 1e-9 * scale {
                    let mass = pairs.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
                    return Ok(Some(CycleViolation {
                        cycle: pairs.iter().map(|&(i, j, _)| (i, j)).collect(),
                        gap: (original - shifted) * mass,
                    }));
                }
            }
        }
    }
    Ok(None)
}
