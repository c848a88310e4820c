//! Seeded generators for problems, measures and test data.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::{LqProblem, LqSystem};
use crate::numerics::{singular_values, symmetrize, Matrix, SpdMatrix, Vector};

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// `G G^T / n + floor I` with a standard normal `G`.
pub fn random_spd<R: Rng + ?Sized>(rng: &mut R, n: usize, floor: f64) -> SpdMatrix {
    let g = random_matrix(rng, n, n);
    let s = &g * g.transpose() / n as f64 + Matrix::identity(n, n) * floor;
    SpdMatrix::new(s).expect("Gram matrix plus a positive floor is SPD")
}

/// A random controllable problem of dimension `n`.
///
/// `B` has `n` or `n - 1` columns, `A` and `Q` are Gaussian with entries of
/// scale 1/2, and the horizon is `min(1, t*/2)` where `t*` is the first
/// conjugate time (searched up to 4). Draws where `R3(T)` has condition
/// number above `1e3` (nearly uncontrollable pairs) are rejected.
pub fn random_problem<R: Rng + ?Sized>(rng: &mut R, n: usize) -> LqProblem {
    assert!(n >= 1, "dimension must be positive");
    loop {
        let m = if n > 1 && rng.random_bool(0.5) { n - 1 } else { n };
        let a = random_matrix(rng, n, n) * 0.5;
        let b = random_matrix(rng, n, m);
        let q = symmetrize(&random_matrix(rng, n, n)) * 0.5;
        let Ok(system) = LqSystem::new(a, b, q) else { continue };
        if !system.kalman_check() {
            continue;
        }
        let horizon = match system.first_conjugate_time(4.0, 4.0 / 2048.0) {
            Ok(Some(t)) => (0.5 * t).min(1.0),
            Ok(None) => 1.0,
            Err(_) => continue,
        };
        let sv = singular_values(&system.r3(horizon));
        if sv.min() < 1e-3 * sv.max() {
            continue;
        }
        if let Ok(p) = LqProblem::from_system(system, horizon) {
            return p;
        }
    }
}

/// Uniform sample from the Euclidean ball of the given radius around `center`.
pub fn uniform_ball<R: Rng + ?Sized>(rng: &mut R, center: &Vector, radius: f64) -> Vector {
    let n = center.len();
    let dir = random_vector(rng, n);
    let norm = dir.norm();
    let r: f64 = rng.random::<f64>().powf(1.0 / n as f64) * radius;
    if norm == 0.0 {
        return center.clone();
    }
    center + dir * (r / norm)
}

/// Uniform random weights on `k` atoms (normalized Dirichlet(1) draw).
pub fn random_weights<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_problems_are_valid_and_reproducible() {
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=4 {
            let p1 = random_problem(&mut r1, n);
            let p2 = random_problem(&mut r2, n);
            assert_eq!(p1, p2);
            assert_eq!(p1.dim(), n);
            assert!(p1.horizon() > 0.0 && p1.horizon() <= 1.0);
        }
    }

    #[test]
    fn ball_samples_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        for _ in 0..200 {
            assert!((uniform_ball(&mut rng, &c, 0.5) - &c).norm() <= 0.5);
        }
    }

    #[test]
    fn weights_are_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random_weights(&mut rng, 7);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(w.iter().all(|&x| x > 0.0));
    }
}
