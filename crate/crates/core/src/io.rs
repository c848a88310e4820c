//! JSON problem and measure files, plan and curve export.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::LqProblem;
use crate::error::{Error, Result};
use crate::interpolation::{Measure, MeasureCurve};
use crate::numerics::{matrix_from_rows, matrix_to_rows, Vector};
use crate::ot_discrete::{DiscreteMeasure, KantorovichSolution};
use crate::ot_gaussian::GaussianMeasure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "T")]
    pub t: f64,
}

impl ProblemFile {
    pub fn from_problem(problem: &LqProblem) -> Self {
        ProblemFile {
            a: matrix_to_rows(problem.a()),
            b: matrix_to_rows(problem.b()),
            q: matrix_to_rows(problem.q()),
            t: problem.horizon(),
        }
    }

    pub fn to_problem(&self) -> Result<LqProblem> {
        let a = matrix_from_rows(&self.a).map_err(|e| Error::Parse(format!("A: {e}")))?;
        let b = matrix_from_rows(&self.b).map_err(|e| Error::Parse(format!("B: {e}")))?;
        let q = matrix_from_rows(&self.q).map_err(|e| Error::Parse(format!("Q: {e}")))?;
        LqProblem::new(a, b, q, self.t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeasureFile {
    Discrete { points: Vec<Vec<f64>>, weights: Vec<f64> },
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
}

impl MeasureFile {
    pub fn from_measure(measure: &Measure) -> Self {
        match measure {
            Measure::Discrete(d) => MeasureFile::Discrete {
                points: d.points().iter().map(|p| p.iter().copied().collect()).collect(),
                weights: d.weights().to_vec(),
            },
            Measure::Gaussian(g) => MeasureFile::Gaussian {
                mean: g.mean().iter().copied().collect(),
                cov: matrix_to_rows(g.cov().as_matrix()),
            },
        }
    }

    pub fn to_measure(&self) -> Result<Measure> {
        match self {
            MeasureFile::Discrete { points, weights } => {
                let pts = points.iter().map(|p| Vector::from_vec(p.clone())).collect();
                Ok(Measure::Discrete(DiscreteMeasure::new(pts, weights.clone())?))
            }
            MeasureFile::Gaussian { mean, cov } => {
                let cov = matrix_from_rows(cov).map_err(|e| Error::Parse(format!("cov: {e}")))?;
                Ok(Measure::Gaussian(GaussianMeasure::new(Vector::from_vec(mean.clone()), cov)?))
            }
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn parse_problem(text: &str) -> Result<LqProblem> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.to_problem()
}

pub fn load_problem(path: &Path) -> Result<LqProblem> {
    load_problem_file(path)?.to_problem()
}

/// The raw file, before any controllability or conjugate-time validation.
pub fn load_problem_file(path: &Path) -> Result<ProblemFile> {
    read_json(path)
}

pub fn problem_to_json(problem: &LqProblem) -> String {
    serde_json::to_string_pretty(&ProblemFile::from_problem(problem)).expect("problem serializes")
}

pub fn save_problem(problem: &LqProblem, path: &Path) -> Result<()> {
    write_text(path, &(problem_to_json(problem) + "\n"))
}

pub fn load_measure(path: &Path) -> Result<Measure> {
    read_json::<MeasureFile>(path)?.to_measure()
}

pub fn parse_measure(text: &str) -> Result<Measure> {
    let file: MeasureFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.to_measure()
}

pub fn save_measure(measure: &Measure, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&MeasureFile::from_measure(measure))?;
    write_text(path, &(text + "\n"))
}

/// SHA-256 of the compact JSON form of the problem, hex encoded.
pub fn problem_hash(problem: &LqProblem) -> String {
    problem_file_hash(&ProblemFile::from_problem(problem))
}

pub fn problem_file_hash(file: &ProblemFile) -> String {
    let compact = serde_json::to_string(file).expect("problem serializes");
    hex::encode(Sha256::digest(compact.as_bytes()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanExport {
    pub matrix: Vec<Vec<f64>>,
    pub support: Vec<PlanEntry>,
    pub total_cost: f64,
    pub psi: Vec<f64>,
    pub psi_c: Vec<f64>,
}

impl PlanExport {
    pub fn from_solution(sol: &KantorovichSolution) -> Self {
        PlanExport {
            matrix: matrix_to_rows(&sol.plan.matrix),
            support: sol
                .plan
                .support()
                .into_iter()
                .map(|(source, target, mass)| PlanEntry { source, target, mass })
                .collect(),
            total_cost: sol.total_cost,
            psi: sol.potentials.psi.clone(),
            psi_c: sol.potentials.psi_c.clone(),
        }
    }

    /// `source,target,mass` rows of the support.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.support {
            w.serialize(e)?;
        }
        csv_string(w)
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Writes `header` then `rows` as CSV with full float precision.
pub fn rows_to_csv(header: &[String], rows: &[Vec<f64>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    csv_string(w)
}

/// Curve rows: `tau,atom,x0..x{n-1},weight` for discrete curves,
/// `tau,m0..,c00,c01,..` (row-major covariance) for Gaussian ones.
pub fn curve_to_csv(curve: &MeasureCurve) -> Result<String> {
    let Some(first) = curve.measures().first() else {
        return Err(Error::Argument("empty curve".into()));
    };
    let n = first.dim();
    let mut rows = Vec::new();
    let header: Vec<String> = match first {
        Measure::Discrete(_) => std::iter::once("tau".to_string())
            .chain(std::iter::once("atom".to_string()))
            .chain((0..n).map(|i| format!("x{i}")))
            .chain(std::iter::once("weight".to_string()))
            .collect(),
        Measure::Gaussian(_) => std::iter::once("tau".to_string())
            .chain((0..n).map(|i| format!("m{i}")))
            .chain((0..n).flat_map(|i| (0..n).map(move |j| format!("c{i}{j}"))))
            .collect(),
    };
    for (tau, m) in curve.times().iter().zip(curve.measures()) {
        match m {
            Measure::Discrete(d) => {
                for (k, (p, w)) in d.points().iter().zip(d.weights()).enumerate() {
                    let mut row = vec![*tau, k as f64];
                    row.extend(p.iter().copied());
                    row.push(*w);
                    rows.push(row);
                }
            }
            Measure::Gaussian(g) => {
                let mut row = vec![*tau];
                row.extend(g.mean().iter().copied());
                row.extend(crate::numerics::matrix_to_row_vec(g.cov().as_matrix()));
                rows.push(row);
            }
        }
    }
    rows_to_csv(&header, &rows)
}
