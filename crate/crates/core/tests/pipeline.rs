use lqot::cost::cost_matrices;
use lqot::interpolation::{curve_action, displacement_interpolation, kantorovich_cost, uniform_grid, McConfig, Measure};
use lqot::io::{parse_measure, parse_problem, problem_to_json};
use lqot::ot_discrete::{solve_kantorovich, DiscreteMeasure};
use lqot::ot_gaussian::{GaussianMeasure, LqGaussianTransport};
use lqot::sampling::{random_problem, random_spd, random_vector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn gaussian(r: &mut ChaCha8Rng, n: usize) -> GaussianMeasure {
    GaussianMeasure::new(random_vector(r, n), random_spd(r, n, 0.2).into_inner()).unwrap()
}

#[test]
fn gaussian_map_is_optimal_on_its_own_samples() {
    // the graph of an optimal map is c-cyclically monotone, so the discrete
    // problem between samples and their images is solved by the identity pairing
    for seed in 0..6u64 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let n = 1 + (seed as usize % 3);
        let p = random_problem(&mut r, n);
        let (mu, nu) = (gaussian(&mut r, n), gaussian(&mut r, n));
        let tr = LqGaussianTransport::new(&p, &mu, &nu, 0.0, p.horizon()).unwrap();
        let xs = mu.sample(&mut r, 12);
        let ys: Vec<_> = xs.iter().map(|x| tr.map.apply(x)).collect();
        let cost = cost_matrices(&p, 0.0, p.horizon()).unwrap().pairwise(&xs, &ys);
        let sol = solve_kantorovich(&cost, &DiscreteMeasure::uniform(xs).unwrap(), &DiscreteMeasure::uniform(ys).unwrap()).unwrap();
        assert_eq!(sol.plan.as_permutation(), (0..12).collect::<Vec<_>>(), "seed {seed}");
    }
}

#[test]
fn monte_carlo_cost_agrees_with_closed_form() {
    let mut r = ChaCha8Rng::seed_from_u64(40);
    let p = random_problem(&mut r, 3);
    let (mu, nu) = (gaussian(&mut r, 3), gaussian(&mut r, 3));
    let exact = LqGaussianTransport::new(&p, &mu, &nu, 0.0, p.horizon()).unwrap().expected_cost(&mu);
    let est = kantorovich_cost(&p, &Measure::Gaussian(mu), &Measure::Gaussian(nu), 0.0, p.horizon(), McConfig::default()).unwrap();
    assert!((est.value - exact).abs() < 3.0 * est.stderr, "{est:?} vs {exact}");
}

#[test]
fn action_of_interpolation_equals_endpoint_cost() {
    let p = parse_problem(r#"{"A":[[0,1],[0,0]],"B":[[0],[1]],"Q":[[0,0],[0,0]],"T":1}"#).unwrap();
    let mu = parse_measure(r#"{"type":"discrete","points":[[0,0],[1,0],[0,1]],"weights":[0.2,0.3,0.5]}"#).unwrap();
    let nu = parse_measure(r#"{"type":"discrete","points":[[2,0],[1,1],[-1,0]],"weights":[0.4,0.4,0.2]}"#).unwrap();
    let curve = displacement_interpolation(&p, &mu, &nu, &uniform_grid(1.0, 17)).unwrap();
    let action = curve_action(&p, &curve, 4).unwrap();
    let Measure::Discrete(a) = &mu else { unreachable!() };
    let Measure::Discrete(b) = &nu else { unreachable!() };
    let cost = cost_matrices(&p, 0.0, 1.0).unwrap().pairwise(a.points(), b.points());
    let direct = solve_kantorovich(&cost, a, b).unwrap().total_cost;
    assert!((action - direct).abs() < 1e-9 * direct.abs().max(1.0));
    // the serialized problem parses back to itself
    assert_eq!(parse_problem(&problem_to_json(&p)).unwrap(), p);
}
