use lqot::comparison::{distortion_coefficient, s_matrix};
use lqot::cost::{cost_matrices, subadditivity_gap};
use lqot::entropy::{dc_membership, density_inequality_check, DcFunction};
use lqot::interpolation::{additivity_check, displacement_interpolation, uniform_grid, McConfig, Measure};
use lqot::numerics::{mat_exp, symmetry_residual, Matrix};
use lqot::ot_discrete::{solve_kantorovich, verify_cyclical_monotonicity, DiscreteMeasure};
use lqot::ot_gaussian::GaussianMeasure;
use lqot::sampling::{random_problem, random_spd, random_vector, random_weights};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flow_is_symplectic_and_a_group(seed in any::<u64>(), n in 1usize..=4, a in 0.05f64..1.0, b in 0.05f64..1.0) {
        let p = random_problem(&mut rng(seed), n);
        let fa = p.flow_blocks(a);
        let fb = p.flow_blocks(b);
        let scale = fa.assemble().amax().max(1.0).powi(2);
        prop_assert!(fa.symplectic_residual() / scale < 1e-10);
        let composed = fa.compose(&fb).assemble();
        let direct = p.flow_blocks(a + b).assemble();
        prop_assert!((composed - &direct).amax() / direct.amax().max(1.0) < 1e-10);
        prop_assert!(fa.reflection_residual(&p.flow_blocks(-a)) / fa.assemble().amax().max(1.0) < 1e-10);
    }

    #[test]
    fn flow_matches_generator_exponential(seed in any::<u64>(), n in 1usize..=3, tau in -1.0f64..1.0) {
        let p = random_problem(&mut rng(seed), n);
        let direct = mat_exp(&(p.generator() * tau)).unwrap();
        prop_assert!((p.flow_blocks(tau).assemble() - &direct).amax() < 1e-12 * direct.amax().max(1.0));
    }

    #[test]
    fn cost_is_homogeneous_and_subadditive(seed in any::<u64>(), n in 1usize..=4, lambda in -3.0f64..3.0, split in 0.1f64..0.9) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, n);
        let t = p.horizon();
        let cm = cost_matrices(&p, 0.0, t).unwrap();
        prop_assert!(symmetry_residual(&cm.c) < 1e-12 && symmetry_residual(&cm.e) < 1e-12);
        let x = random_vector(&mut r, n);
        let y = random_vector(&mut r, n);
        let z = random_vector(&mut r, n);
        let c = cm.eval(&x, &y);
        let scaled = cm.eval(&(&x * lambda), &(&y * lambda));
        prop_assert!((scaled - lambda * lambda * c).abs() < 1e-9 * c.abs().max(1.0) * lambda.powi(2).max(1.0));
        let gap = subadditivity_gap(&p, &x, &z, &y, 0.0, split * t, t).unwrap();
        prop_assert!(gap >= -1e-9 * c.abs().max(1.0));
    }

    #[test]
    fn backwards_cost_swaps_arguments(seed in any::<u64>(), n in 1usize..=4) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, n);
        let fwd = cost_matrices(&p, 0.0, p.horizon()).unwrap();
        let bwd = cost_matrices(&p.backwards(), 0.0, p.horizon()).unwrap();
        let x = random_vector(&mut r, n);
        let y = random_vector(&mut r, n);
        let c = fwd.eval(&x, &y);
        prop_assert!((bwd.eval(&y, &x) - c).abs() < 1e-9 * c.abs().max(1.0));
    }

    #[test]
    fn distortion_is_a_unit_interval_curve(seed in any::<u64>(), n in 1usize..=4) {
        let p = random_problem(&mut rng(seed), n);
        let t = p.horizon();
        let betas: Vec<f64> = uniform_grid(t, 33).iter().map(|&tau| distortion_coefficient(&p, tau).unwrap()).collect();
        prop_assert!(betas[0].abs() < 1e-12);
        prop_assert!((betas[32] - 1.0).abs() < 1e-12);
        prop_assert!(betas.iter().all(|b| (-1e-12..=1.0 + 1e-12).contains(b)));
    }

    #[test]
    fn s_is_symmetric_and_nonincreasing(seed in any::<u64>(), n in 1usize..=4, frac in 0.05f64..1.0) {
        let p = random_problem(&mut rng(seed), n);
        let r = s_matrix(&p, frac * p.horizon()).unwrap();
        prop_assert!(r.symmetry_residual / r.s.amax().max(1.0) < 1e-9);
        prop_assert!(r.sdot_max_eigenvalue <= 1e-7);
    }

    #[test]
    fn optimal_plans_are_cyclically_monotone(seed in any::<u64>(), n in 1usize..=3, k in 2usize..6, l in 2usize..6) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, n);
        let xs: Vec<_> = (0..k).map(|_| random_vector(&mut r, n)).collect();
        let ys: Vec<_> = (0..l).map(|_| random_vector(&mut r, n)).collect();
        let mu = DiscreteMeasure::new(xs, random_weights(&mut r, k)).unwrap();
        let nu = DiscreteMeasure::new(ys, random_weights(&mut r, l)).unwrap();
        let cost = cost_matrices(&p, 0.0, p.horizon()).unwrap().pairwise(mu.points(), nu.points());
        let sol = solve_kantorovich(&cost, &mu, &nu).unwrap();
        let unit = sol.total_cost.abs().max(1.0);
        prop_assert!((sol.potentials.dual_value(mu.weights(), nu.weights()) - sol.total_cost).abs() < 1e-9 * unit);
        prop_assert!(sol.plan.marginal_residual(mu.weights(), nu.weights()) < 1e-9);
        let violation = verify_cyclical_monotonicity(&sol.plan, &cost, 4).unwrap();
        prop_assert!(violation.is_none());
    }

    #[test]
    fn discrete_interpolation_is_additive(seed in any::<u64>(), n in 1usize..=3) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, n);
        let mu = DiscreteMeasure::uniform((0..4).map(|_| random_vector(&mut r, n)).collect()).unwrap();
        let nu = DiscreteMeasure::uniform((0..4).map(|_| random_vector(&mut r, n)).collect()).unwrap();
        let t = p.horizon();
        let curve = displacement_interpolation(&p, &Measure::Discrete(mu), &Measure::Discrete(nu), &uniform_grid(t, 5)).unwrap();
        let gap = additivity_check(&p, &curve, 0.0, curve.times()[2], t, McConfig::default()).unwrap();
        prop_assert!(gap.value.abs() < 1e-6);
    }

    #[test]
    fn density_inequality_holds(seed in any::<u64>(), n in 1usize..=3, frac in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, n);
        let mu = GaussianMeasure::new(random_vector(&mut r, n), random_spd(&mut r, n, 0.2).into_inner()).unwrap();
        let nu = GaussianMeasure::new(random_vector(&mut r, n), random_spd(&mut r, n, 0.2).into_inner()).unwrap();
        let c = density_inequality_check(&p, &mu, &nu, frac * p.horizon(), 100, seed).unwrap();
        prop_assert!(c.min_slack >= -1e-8);
    }

    #[test]
    fn neg_power_membership_is_sharp(big_n in 1u32..12) {
        let u = DcFunction::neg_power(big_n as f64).unwrap();
        prop_assert!(dc_membership(&u, big_n as f64));
        prop_assert!(dc_membership(&u, 1.0));
        prop_assert!(!dc_membership(&u, big_n as f64 + 1.0));
    }

    #[test]
    fn spd_square_root_squares_back(seed in any::<u64>(), n in 1usize..=5) {
        let s = random_spd(&mut rng(seed), n, 0.1);
        let root = s.sqrt();
        let back: Matrix = root.as_matrix() * root.as_matrix();
        prop_assert!((back - s.as_matrix()).amax() < 1e-10 * s.as_matrix().amax().max(1.0));
    }
}
