//! Command-line front end. [`run`] returns the text to print and the exit
//! status, so the binary stays a thin wrapper.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::comparison::{distortion_coefficient, model_space_problem, model_theta};
use crate::cost::cost_matrices;
use crate::dynamics::{LqProblem, LqSystem};
use crate::error::{Error, Result};
use crate::interpolation::{displacement_interpolation, uniform_grid, Measure};
use crate::io::{
    curve_to_csv, load_measure, load_problem_file, problem_file_hash, problem_hash, rows_to_csv, save_problem, write_text,
    PlanExport,
};
use crate::numerics::{matrix_from_rows, matrix_to_rows, symmetry_residual, Vector, SINGULAR_REL_TOL, SYMMETRY_REL_TOL};
use crate::ot_discrete::solve_kantorovich;
use crate::ot_gaussian::{pushforward_moments, LqGaussianTransport};
use crate::verify::{run_suite, Suite, Tolerances, VerifyInputs};

/// Exit status for a failed verification suite.
pub const EXIT_VERIFY_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "lqot", version, about = "Optimal transport for linear-quadratic control costs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Problem JSON file {"A","B","Q","T"}.
    #[arg(long, global = true)]
    pub problem: Option<PathBuf>,
    /// Source measure JSON file.
    #[arg(long, global = true)]
    pub mu: Option<PathBuf>,
    /// Target measure JSON file.
    #[arg(long, global = true)]
    pub nu: Option<PathBuf>,
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Number of grid points.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Tolerance override `name=value`, repeatable.
    #[arg(long = "tol", global = true)]
    pub tol: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Flow blocks R1..R4 at --tau.
    Flow,
    /// First conjugate time of the system.
    ConjugateTime {
        /// Search horizon; defaults to 10 max(T, 1).
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Cost matrices on [t, s], optionally c(x, y) and its trajectory.
    Cost {
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        /// End time; defaults to T.
        #[arg(long)]
        s: Option<f64>,
        /// Comma-separated start point.
        #[arg(long)]
        x: Option<String>,
        /// Comma-separated end point.
        #[arg(long)]
        y: Option<String>,
    },
    /// Optimal plan (discrete) or map (Gaussian) from --mu to --nu.
    Transport,
    /// Displacement interpolation on a uniform grid, as CSV.
    Interpolate,
    /// Distortion coefficients on a uniform grid, as CSV.
    Distortion,
    /// Writes the model-space problem for curvature k, dimension n and distance d.
    ModelSpace {
        #[arg(long, allow_negative_numbers = true)]
        k: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        distance: f64,
    },
    /// Runs a verification suite.
    Verify {
        /// dynamics, cost, ot, comparison, entropy or all.
        #[arg(default_value = "all")]
        suite: String,
    },
}

/// What the binary prints and how it exits.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn error_envelope(err: &Error) -> String {
    json!({"error": {"code": err.code(), "message": err.to_string()}}).to_string()
}

/// Parses `args` (including the program name) and executes the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return Outcome { exit_code: 0, stdout: e.to_string(), stderr: String::new() };
            }
            let err = Error::Argument(e.kind().to_string() + ": " + e.to_string().lines().next().unwrap_or(""));
            return Outcome { exit_code: 1, stdout: String::new(), stderr: error_envelope(&err) + "\n" };
        }
    };
    match execute(&cli) {
        Ok((text, pass)) => Outcome {
            exit_code: if pass { 0 } else { EXIT_VERIFY_FAILED },
            stdout: text,
            stderr: String::new(),
        },
        Err(err) => Outcome { exit_code: 1, stdout: String::new(), stderr: error_envelope(&err) + "\n" },
    }
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| Error::Argument(format!("--{flag} is required")))
}

fn parse_point(text: &str, n: usize, flag: &str) -> Result<Vector> {
    let values = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Argument(format!("--{flag} must be comma-separated numbers")))?;
    if values.len() != n {
        return Err(Error::Dimension(format!("--{flag} has {} entries, expected {n}", values.len())));
    }
    Ok(Vector::from_vec(values))
}

fn library_tolerances() -> Value {
    json!({"singular_rel": SINGULAR_REL_TOL, "symmetry_rel": SYMMETRY_REL_TOL})
}

fn vec_json(v: &Vector) -> Value {
    json!(v.iter().copied().collect::<Vec<f64>>())
}

/// Writes `text` to `--out` or returns it for stdout.
fn emit(common: &Common, text: String) -> Result<String> {
    match &common.out {
        Some(path) => {
            write_text(path, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn emit_json(common: &Common, value: Value) -> Result<String> {
    emit(common, serde_json::to_string_pretty(&value)? + "\n")
}

fn load_problem(common: &Common) -> Result<LqProblem> {
    load_problem_file(required(&common.problem, "problem")?)?.to_problem()
}

fn load_pair(common: &Common) -> Result<(Measure, Measure)> {
    Ok((load_measure(required(&common.mu, "mu")?)?, load_measure(required(&common.nu, "nu")?)?))
}

fn execute(cli: &Cli) -> Result<(String, bool)> {
    let common = &cli.common;
    let mut tolerances = Tolerances::default();
    for entry in &common.tol {
        tolerances.apply_override(entry)?;
    }
    let ok = |text: String| Ok((text, true));
    match &cli.command {
        Command::Flow => {
            let p = load_problem(common)?;
            let tau = common.tau.unwrap_or(p.horizon());
            let fb = p.flow_blocks(tau);
            let reflected = p.flow_blocks(-tau);
            ok(emit_json(
                common,
                json!({
                    "problem_hash": problem_hash(&p),
                    "tolerances": library_tolerances(),
                    "tau": tau,
                    "R1": matrix_to_rows(&fb.r1),
                    "R2": matrix_to_rows(&fb.r2),
                    "R3": matrix_to_rows(&fb.r3),
                    "R4": matrix_to_rows(&fb.r4),
                    "residuals": {
                        "symplectic": fb.symplectic_residual(),
                        "reflection": fb.reflection_residual(&reflected),
                        "r3_conditioning": fb.r3_conditioning(),
                    },
                }),
            )?)
        }
        Command::ConjugateTime { horizon } => {
            let file = load_problem_file(required(&common.problem, "problem")?)?;
            let a = matrix_from_rows(&file.a)?;
            let b = matrix_from_rows(&file.b)?;
            let q = matrix_from_rows(&file.q)?;
            let system = LqSystem::new(a, b, q)?;
            if !system.kalman_check() {
                return Err(Error::InvalidProblem("the pair (A, B) is not controllable".into()));
            }
            let search = horizon.unwrap_or(10.0 * file.t.max(1.0));
            if !(search > 0.0 && search.is_finite()) {
                return Err(Error::Argument("--horizon must be positive".into()));
            }
            let grid = common.grid.unwrap_or(4096).max(2);
            let t_star = system.first_conjugate_time(search, search / grid as f64)?;
            let residual = t_star.map(|t| system.flow_blocks(t).r3_conditioning());
            ok(emit_json(
                common,
                json!({
                    "problem_hash": problem_file_hash(&file),
                    "tolerances": library_tolerances(),
                    "search_horizon": search,
                    "grid": grid,
                    "conjugate_time": t_star,
                    "residuals": {"r3_conditioning": residual},
                }),
            )?)
        }
        Command::Cost { t, s, x, y } => {
            let p = load_problem(common)?;
            let s = s.unwrap_or(p.horizon());
            let cm = cost_matrices(&p, *t, s)?;
            let n = p.dim();
            let point = match (x, y) {
                (Some(x), Some(y)) => Some((parse_point(x, n, "x")?, parse_point(y, n, "y")?)),
                (None, None) => None,
                _ => return Err(Error::Argument("--x and --y must be given together".into())),
            };
            let value = point.as_ref().map(|(x, y)| cm.eval(x, y));
            let is_csv = common.out.as_ref().is_some_and(|o| o.extension().is_some_and(|e| e == "csv"));
            if is_csv {
                let (x, y) = point.ok_or_else(|| Error::Argument("CSV export needs --x and --y".into()))?;
                let grid = common.grid.unwrap_or(101).max(3);
                let traj = p.optimal_trajectory(&x, &y, *t, s, grid)?;
                let header: Vec<String> = ["tau".to_string()]
                    .into_iter()
                    .chain((0..n).map(|i| format!("x{i}")))
                    .chain(["cost".to_string()])
                    .collect();
                let mut rows = Vec::with_capacity(traj.len());
                for (tau, state) in traj.times.iter().zip(&traj.states) {
                    let c = if *tau > *t { cost_matrices(&p, *t, *tau)?.eval(&x, state) } else { 0.0 };
                    let mut row = vec![*tau];
                    row.extend(state.iter().copied());
                    row.push(c);
                    rows.push(row);
                }
                return ok(emit(common, rows_to_csv(&header, &rows)?)?);
            }
            ok(emit_json(
                common,
                json!({
                    "problem_hash": problem_hash(&p),
                    "tolerances": library_tolerances(),
                    "t": t,
                    "s": s,
                    "C": matrix_to_rows(&cm.c),
                    "D": matrix_to_rows(&cm.d),
                    "E": matrix_to_rows(&cm.e),
                    "x": point.as_ref().map(|(x, _)| vec_json(x)),
                    "y": point.as_ref().map(|(_, y)| vec_json(y)),
                    "value": value,
                    "residuals": {"C_symmetry": symmetry_residual(&cm.c), "E_symmetry": symmetry_residual(&cm.e)},
                }),
            )?)
        }
        Command::Transport => {
            let p = load_problem(common)?;
            let (mu, nu) = load_pair(common)?;
            let cm = cost_matrices(&p, 0.0, p.horizon())?;
            match (&mu, &nu) {
                (Measure::Discrete(a), Measure::Discrete(b)) => {
                    let cost = cm.pairwise(a.points(), b.points());
                    let sol = solve_kantorovich(&cost, a, b)?;
                    let export = PlanExport::from_solution(&sol);
                    if common.out.as_ref().is_some_and(|o| o.extension().is_some_and(|e| e == "csv")) {
                        return ok(emit(common, export.to_csv()?)?);
                    }
                    let dual = sol.potentials.dual_value(a.weights(), b.weights());
                    ok(emit_json(
                        common,
                        json!({
                            "problem_hash": problem_hash(&p),
                            "tolerances": library_tolerances(),
                            "kind": "discrete",
                            "plan": export,
                            "residuals": {
                                "marginals": sol.plan.marginal_residual(a.weights(), b.weights()),
                                "duality_gap": (dual - sol.total_cost).abs(),
                                "dual_feasibility": sol.potentials.feasibility_violation(&cost),
                            },
                        }),
                    )?)
                }
                (Measure::Gaussian(a), Measure::Gaussian(b)) => {
                    let tr = LqGaussianTransport::new(&p, a, b, 0.0, p.horizon())?;
                    let (m, c) = pushforward_moments(&tr.map, a);
                    ok(emit_json(
                        common,
                        json!({
                            "problem_hash": problem_hash(&p),
                            "tolerances": library_tolerances(),
                            "kind": "gaussian",
                            "linear": matrix_to_rows(&tr.map.linear),
                            "offset": vec_json(&tr.map.offset),
                            "expected_cost": tr.expected_cost(a),
                            "residuals": {
                                "pushforward_mean": (m - b.mean()).amax(),
                                "pushforward_cov": (c - b.cov().as_matrix()).amax(),
                            },
                        }),
                    )?)
                }
                _ => Err(Error::Argument("--mu and --nu must both be discrete or both Gaussian".into())),
            }
        }
        Command::Interpolate => {
            let p = load_problem(common)?;
            let (mu, nu) = load_pair(common)?;
            let times = uniform_grid(p.horizon(), common.grid.unwrap_or(11).max(2));
            let curve = displacement_interpolation(&p, &mu, &nu, &times)?;
            ok(emit(common, curve_to_csv(&curve)?)?)
        }
        Command::Distortion => {
            let p = load_problem(common)?;
            let times = uniform_grid(p.horizon(), common.grid.unwrap_or(101).max(2));
            let rows = times
                .iter()
                .map(|&tau| Ok(vec![tau, distortion_coefficient(&p, tau)?]))
                .collect::<Result<Vec<_>>>()?;
            ok(emit(common, rows_to_csv(&["tau".into(), "beta".into()], &rows)?)?)
        }
        Command::ModelSpace { k, n, distance } => {
            let p = model_space_problem(*k, *n, *distance)?;
            let summary = json!({
                "problem_hash": problem_hash(&p),
                "tolerances": library_tolerances(),
                "k": k,
                "n": n,
                "distance": distance,
                "theta": model_theta(*k, *n, *distance),
                "problem": crate::io::ProblemFile::from_problem(&p),
            });
            match &common.out {
                Some(path) => {
                    save_problem(&p, path)?;
                    ok(serde_json::to_string_pretty(&summary)? + "\n")
                }
                None => ok(serde_json::to_string_pretty(&summary)? + "\n"),
            }
        }
        Command::Verify { suite } => {
            let suite = Suite::parse(suite)?;
            let p = load_problem(common)?;
            let inputs = VerifyInputs {
                mu: common.mu.as_deref().map(load_measure).transpose()?,
                nu: common.nu.as_deref().map(load_measure).transpose()?,
            };
            let report = run_suite(suite, &p, &inputs, common.seed, &tolerances)?;
            let text = emit(common, serde_json::to_string_pretty(&report)? + "\n")?;
            Ok((text, report.passed()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem_file(dir: &Path, body: &str) -> String {
        let path = dir.join("p.json");
        std::fs::write(&path, body).unwrap();
        path.to_string_lossy().into_owned()
    }

    #[test]
    fn cost_example() {
        let dir = tempfile::tempdir().unwrap();
        let p = problem_file(dir.path(), r#"{"A":[[1.0]],"B":[[1.0]],"Q":[[1.0]],"T":1.0}"#);
        let out = run(["lqot", "cost", "--problem", &p, "--x", "2", "--y", "3"]);
        assert_eq!(out.exit_code, 0, "{}", out.stderr);
        let v: Value = serde_json::from_str(&out.stdout).unwrap();
        assert!((v["value"].as_f64().unwrap() + 2.0).abs() < 1e-10);
    }

    #[test]
    fn errors_use_the_envelope() {
        let out = run(["lqot", "flow", "--problem", "/nonexistent/p.json"]);
        assert_eq!(out.exit_code, 1);
        let v: Value = serde_json::from_str(out.stderr.trim()).unwrap();
        assert_eq!(v["error"]["code"], "IO");
        let out = run(["lqot", "bogus"]);
        assert_eq!(out.exit_code, 1);
        let v: Value = serde_json::from_str(out.stderr.trim()).unwrap();
        assert_eq!(v["error"]["code"], "ARGUMENT");
        assert_eq!(run(["lqot", "--help"]).exit_code, 0);
    }
}
