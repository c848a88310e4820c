//! Dense linear-algebra kernel.
//!
//! Everything above this module works with small dense `f64` matrices
//! (at most `2n x 2n` with `n` in the tens), stored by `nalgebra` in
//! column-major order. JSON and the C ABI exchange matrices row-major; the
//! conversion helpers live here.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative singular-value cutoff below which a matrix is treated as singular.
pub const SINGULAR_REL_TOL: f64 = 1e-12;

/// Relative tolerance for symmetry checks on inputs.
pub const SYMMETRY_REL_TOL: f64 = 1e-10;

/// Relative eigenvalue floor for positive-definiteness: a small multiple of
/// the backward error of a symmetric eigensolve.
pub const SPD_EIGEN_FLOOR: f64 = 1e-14;

pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} has NaN or infinite entries")))
    }
}

pub fn ensure_square(m: &Matrix, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::Dimension(format!("{what} is empty")));
    }
    Ok(m.nrows())
}

/// Builds a matrix from row-major nested rows, validating shape and finiteness.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::Dimension("matrix has no rows".into()));
    }
    let ncols = rows[0].len();
    if ncols == 0 {
        return Err(Error::Dimension("matrix has no columns".into()));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::Dimension(format!(
            "row {bad} has {} entries, expected {ncols}",
            rows[bad].len()
        )));
    }
    let m = Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
    ensure_finite(&m, "matrix")?;
    Ok(m)
}

/// Builds a matrix from a flat row-major slice.
pub fn matrix_from_row_slice(nrows: usize, ncols: usize, data: &[f64]) -> Result<Matrix> {
    if data.len() != nrows * ncols {
        return Err(Error::Dimension(format!(
            "expected {} entries for a {nrows}x{ncols} matrix, got {}",
            nrows * ncols,
            data.len()
        )));
    }
    let m = Matrix::from_row_slice(nrows, ncols, data);
    ensure_finite(&m, "matrix")?;
    Ok(m)
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Row-major flattening, the inverse of [`matrix_from_row_slice`].
pub fn matrix_to_row_vec(m: &Matrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

// Padé coefficients for the [m/m] approximants to exp, m = 3, 5, 7, 9, 13,
// together with the 1-norm bounds up to which each degree is accurate to unit
// roundoff in double precision.
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

fn norm1(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn pade_low(a: &Matrix, coeffs: &[f64]) -> (Matrix, Matrix) {
    let n = a.nrows();
    let id = Matrix::identity(n, n);
    let a2 = a * a;
    let mut u = &id * coeffs[1];
    let mut v = &id * coeffs[0];
    let mut pow = id.clone();
    for k in 1..coeffs.len() / 2 {
        pow = &pow * &a2;
        u += &pow * coeffs[2 * k + 1];
        v += &pow * coeffs[2 * k];
    }
    (a * u, v)
}

fn pade13(a: &Matrix) -> (Matrix, Matrix) {
    let b = &PADE13;
    let n = a.nrows();
    let id = Matrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = a * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    (u, v)
}

/// Matrix exponential by scaling and squaring with Padé approximants.
pub fn mat_exp(m: &Matrix) -> Result<Matrix> {
    ensure_square(m, "mat_exp input")?;
    ensure_finite(m, "mat_exp input")?;
    let norm = norm1(m);
    for &(degree, theta) in THETA.iter() {
        if norm <= theta {
            let coeffs: &[f64] = match degree {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            let (u, v) = pade_low(m, coeffs);
            return pade_solve(&u, &v);
        }
    }
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = m / 2f64.powi(squarings);
    let (u, v) = pade13(&scaled);
    let mut result = pade_solve(&u, &v)?;
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

fn pade_solve(u: &Matrix, v: &Matrix) -> Result<Matrix> {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::Singular("Padé denominator in mat_exp".into()))
}

pub fn singular_values(m: &Matrix) -> Vector {
    m.clone().svd(false, false).singular_values
}

/// Numerical rank: singular values exceeding `rel_tol` times the largest.
pub fn rank_with_tolerance(m: &Matrix, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    let largest = sv.iter().cloned().fold(0.0, f64::max);
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * largest).count()
}

/// Sign and log-magnitude of a determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    /// -1, 0 or +1. Zero when the matrix is singular at [`SINGULAR_REL_TOL`].
    pub sign: i8,
    pub log_abs: f64,
}

impl LogDet {
    pub fn is_singular(&self) -> bool {
        self.sign == 0
    }

    pub fn value(&self) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            f64::from(self.sign) * self.log_abs.exp()
        }
    }
}

pub fn log_abs_det_sign(m: &Matrix) -> Result<LogDet> {
    ensure_square(m, "determinant input")?;
    let sv = singular_values(m);
    let largest = sv.iter().cloned().fold(0.0, f64::max);
    let smallest = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let lu = m.clone().lu();
    let u = lu.u();
    let mut sign: f64 = lu.p().determinant();
    let mut log_abs = 0.0;
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        if d < 0.0 {
            sign = -sign;
        }
        log_abs += d.abs().ln();
    }
    if largest == 0.0 || smallest <= SINGULAR_REL_TOL * largest {
        return Ok(LogDet {
            sign: 0,
            log_abs: if log_abs.is_finite() {
                log_abs
            } else {
                f64::NEG_INFINITY
            },
        });
    }
    Ok(LogDet {
        sign: if sign > 0.0 { 1 } else { -1 },
        log_abs,
    })
}

/// True when `m` is singular at the library-wide threshold.
pub fn is_singular(m: &Matrix) -> bool {
    let sv = singular_values(m);
    let largest = sv.iter().cloned().fold(0.0, f64::max);
    let smallest = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    largest == 0.0 || smallest <= SINGULAR_REL_TOL * largest
}

/// Solves `m x = rhs`, refusing matrices that are singular at threshold.
pub fn solve(m: &Matrix, rhs: &Matrix, what: &str) -> Result<Matrix> {
    ensure_square(m, what)?;
    if m.nrows() != rhs.nrows() {
        return Err(Error::Dimension(format!(
            "{what}: {} rows vs right-hand side {}",
            m.nrows(),
            rhs.nrows()
        )));
    }
    if is_singular(m) {
        return Err(Error::Singular(what.to_string()));
    }
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::Singular(what.to_string()))
}

pub fn solve_vec(m: &Matrix, rhs: &Vector, what: &str) -> Result<Vector> {
    let r = Matrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
    let x = solve(m, &r, what)?;
    Ok(x.column(0).into_owned())
}

pub fn inverse(m: &Matrix, what: &str) -> Result<Matrix> {
    let n = ensure_square(m, what)?;
    solve(m, &Matrix::identity(n, n), what)
}

/// Frobenius norm of `m - m^T`, relative to the Frobenius norm of `m`.
pub fn symmetry_residual(m: &Matrix) -> f64 {
    let scale = m.norm();
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).norm() / scale
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &Matrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .cloned()
        .collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn operator_norm(m: &Matrix) -> f64 {
    singular_values(m).iter().cloned().fold(0.0, f64::max)
}

/// Symmetric positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(Matrix);

impl SpdMatrix {
    /// Validates symmetry (relative `1e-10`) and positivity (relative
    /// eigenvalue floor `1e-14`). The stored matrix is the symmetric part.
    pub fn new(m: Matrix) -> Result<Self> {
        ensure_square(&m, "SPD matrix")?;
        ensure_finite(&m, "SPD matrix")?;
        let asym = symmetry_residual(&m);
        if asym > SYMMETRY_REL_TOL {
            return Err(Error::NotSpd(format!(
                "relative asymmetry {asym:.3e} exceeds {SYMMETRY_REL_TOL:e}"
            )));
        }
        let sym = symmetrize(&m);
        let ev = sym_eigenvalues(&sym);
        let largest = ev.last().copied().unwrap_or(0.0);
        let smallest = ev.first().copied().unwrap_or(0.0);
        if largest <= 0.0 || smallest <= SPD_EIGEN_FLOOR * largest {
            return Err(Error::NotSpd(format!(
                "smallest eigenvalue {smallest:.3e} vs largest {largest:.3e}"
            )));
        }
        Ok(SpdMatrix(sym))
    }

    pub fn identity(n: usize) -> Self {
        SpdMatrix(Matrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    fn eigen_map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let eig = SymmetricEigen::new(self.0.clone());
        let d = Matrix::from_diagonal(&eig.eigenvalues.map(f));
        let v = &eig.eigenvectors;
        symmetrize(&(v * d * v.transpose()))
    }

    pub fn sqrt(&self) -> SpdMatrix {
        SpdMatrix(self.eigen_map(f64::sqrt))
    }

    pub fn inv_sqrt(&self) -> SpdMatrix {
        SpdMatrix(self.eigen_map(|l| 1.0 / l.sqrt()))
    }

    pub fn inverse(&self) -> SpdMatrix {
        SpdMatrix(self.eigen_map(|l| 1.0 / l))
    }

    pub fn log_det(&self) -> f64 {
        SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .map(|l| l.ln())
            .sum()
    }

    /// Lower Cholesky factor.
    pub fn cholesky_lower(&self) -> Matrix {
        self.0
            .clone()
            .cholesky()
            .map(|c| c.l())
            .unwrap_or_else(|| {
                // eigen-based factor for borderline conditioning
                self.sqrt().into_inner()
            })
    }
}

/// Principal square root of an SPD matrix via symmetric eigendecomposition.
pub fn spd_sqrt(s: &SpdMatrix) -> SpdMatrix {
    s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn taylor_exp(m: &Matrix, terms: usize) -> Matrix {
        let n = m.nrows();
        let mut sum = Matrix::identity(n, n);
        let mut term = Matrix::identity(n, n);
        for k in 1..=terms {
            term = &term * m / k as f64;
            sum += &term;
        }
        sum
    }

    fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Matrix {
        Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0) * scale)
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = mat_exp(&Matrix::zeros(2, 2)).unwrap();
        assert_eq!(e, Matrix::identity(2, 2));
    }

    #[test]
    fn exp_of_rotation_generator() {
        let g = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]) * FRAC_PI_2;
        let e = mat_exp(&g).unwrap();
        let oracle = taylor_exp(&g, 30);
        assert!(rel_err(&e, &oracle) < 1e-13);
        let expected = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!((&e - &expected).amax() < 1e-14);
    }

    #[test]
    fn exp_of_nilpotent_terminates() {
        for &tau in &[0.0, 0.3, 1.0, 7.5, -2.0] {
            let m = Matrix::from_row_slice(2, 2, &[-1.0, -1.0, 1.0, 1.0]) * tau;
            assert_eq!((&m * &m).amax(), 0.0);
            let e = mat_exp(&m).unwrap();
            let expected = Matrix::from_row_slice(2, 2, &[1.0 - tau, -tau, tau, 1.0 + tau]);
            assert!((&e - &expected).amax() <= 1e-12 * expected.amax());
        }
    }

    #[test]
    fn exp_matches_taylor_on_small_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..6 {
            for &scale in &[1e-3, 0.1, 0.5, 1.0] {
                let m = random_matrix(&mut rng, n, scale);
                let e = mat_exp(&m).unwrap();
                assert!(rel_err(&e, &taylor_exp(&m, 40)) < 1e-13);
            }
        }
    }

    #[test]
    fn exp_large_norm_diagonal() {
        // diagonal generator has a closed form at any norm
        let d = Vector::from_vec(vec![-600.0, -3.0, 2.5, 400.0]);
        let m = Matrix::from_diagonal(&d);
        let e = mat_exp(&m).unwrap();
        for i in 0..4 {
            let exact = d[i].exp();
            assert!((e[(i, i)] - exact).abs() <= 1e-12 * exact.max(1e-300));
        }
    }

    #[test]
    fn exp_rejects_non_square() {
        assert!(matches!(
            mat_exp(&Matrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn exp_commuting_sum_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let m = random_matrix(&mut rng, 4, 2.0);
            // polynomials in m commute with m
            let n = &m * &m * 0.3 - &m * 0.7;
            let lhs = mat_exp(&(&m + &n)).unwrap();
            let rhs = mat_exp(&m).unwrap() * mat_exp(&n).unwrap();
            assert!(rel_err(&lhs, &rhs) < 1e-10);
            let id = mat_exp(&(-&m)).unwrap() * mat_exp(&m).unwrap();
            assert!((id - Matrix::identity(4, 4)).amax() < 1e-10);
        }
    }

    #[test]
    fn sqrt_cases() {
        let id = SpdMatrix::identity(3);
        assert!((spd_sqrt(&id).into_inner() - Matrix::identity(3, 3)).amax() < 1e-15);
        let d = SpdMatrix::new(Matrix::from_diagonal(&Vector::from_vec(vec![4.0, 9.0]))).unwrap();
        let r = spd_sqrt(&d).into_inner();
        assert!((r - Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 3.0]))).amax() < 1e-14);
    }

    #[test]
    fn sqrt_random_spd_residual_and_commutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..7 {
            let g = random_matrix(&mut rng, n, 1.0);
            let s = SpdMatrix::new(&g * g.transpose() + Matrix::identity(n, n) * 0.1).unwrap();
            let r = spd_sqrt(&s);
            let rr = r.as_matrix() * r.as_matrix();
            assert!(rel_err(&rr, s.as_matrix()) < 1e-10);
            let comm = r.as_matrix() * s.as_matrix() - s.as_matrix() * r.as_matrix();
            assert!(comm.amax() < 1e-10);
            assert!(symmetry_residual(r.as_matrix()) < 1e-14);
            assert!(sym_eigenvalues(r.as_matrix())[0] > 0.0);
        }
    }

    #[test]
    fn spd_rejects_indefinite_and_asymmetric() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(SpdMatrix::new(m), Err(Error::NotSpd(_))));
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(SpdMatrix::new(m), Err(Error::NotSpd(_))));
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-15]);
        assert!(matches!(SpdMatrix::new(m), Err(Error::NotSpd(_))));
    }

    #[test]
    fn log_det_cases() {
        let ld = log_abs_det_sign(&Matrix::identity(4, 4)).unwrap();
        assert_eq!(ld.sign, 1);
        assert!(ld.log_abs.abs() < 1e-15);
        let ld = log_abs_det_sign(&Matrix::from_diagonal(&Vector::from_vec(vec![2.0, -3.0]))).unwrap();
        assert_eq!(ld.sign, -1);
        assert!((ld.log_abs - 6f64.ln()).abs() < 1e-14);
        let ld = log_abs_det_sign(&Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 1e-15]))).unwrap();
        assert_eq!(ld.sign, 0);
        assert!(ld.is_singular());
    }

    fn cofactor_det(m: &Matrix) -> f64 {
        let n = m.nrows();
        if n == 1 {
            return m[(0, 0)];
        }
        (0..n)
            .map(|j| {
                let minor = m.clone().remove_row(0).remove_column(j);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[(0, j)] * cofactor_det(&minor)
            })
            .sum()
    }

    #[test]
    fn log_det_agrees_with_cofactor_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in 1..=4 {
            for _ in 0..25 {
                let m = random_matrix(&mut rng, n, 2.0);
                let exact = cofactor_det(&m);
                let ld = log_abs_det_sign(&m).unwrap();
                assert!((ld.value() - exact).abs() <= 1e-10 * exact.abs());
            }
        }
    }

    #[test]
    fn rank_cases() {
        assert_eq!(rank_with_tolerance(&Matrix::identity(3, 3), 1e-10), 3);
        assert_eq!(rank_with_tolerance(&Matrix::zeros(2, 5), 1e-10), 0);
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(rank_with_tolerance(&m, 1e-10), 1);
    }

    #[test]
    fn row_major_round_trip() {
        let rows = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]];
        let m = matrix_from_rows(&rows).unwrap();
        assert_eq!(m[(0, 2)], 3.0);
        assert_eq!(matrix_to_rows(&m), rows);
        let flat = matrix_to_row_vec(&m);
        assert_eq!(matrix_from_row_slice(2, 3, &flat).unwrap(), m);
        assert!(matrix_from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(matches!(
            matrix_from_rows(&[vec![f64::NAN]]),
            Err(Error::NonFinite(_))
        ));
    }
}
