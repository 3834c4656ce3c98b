//! Small dense linear-algebra kernel: Lyapunov equation solving, symmetric
//! eigen-extrema, Hurwitz testing and matching-gain derivation.
//!
//! Everything here operates on heap-allocated `nalgebra` matrices; the systems
//! of interest are tiny (n <= ~10), so the Lyapunov equation is solved by a
//! direct dense solve of the vectorized equation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Eigenvalue real parts must be below `-HURWITZ_EPS` to count as stable.
pub const HURWITZ_EPS: f64 = 1e-9;
/// Maximum elementwise asymmetry accepted by the symmetric eigensolver.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Lyapunov residual bound, relative to `1 + ||Q||_F`.
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-9;
/// Elementwise residual bound for the matching-gain reconstruction.
pub const MATCHING_TOL: f64 = 1e-8;

/// A solved algebraic Lyapunov equation `A_m' P + P A_m = -Q` together with
/// its residual, kept as evidence that the solve succeeded.
#[derive(Debug, Clone)]
pub struct LyapunovPair {
    pub p: Matrix,
    pub q: Matrix,
    pub residual_norm: f64,
}

impl LyapunovPair {
    /// Quadratic form `e' P e`.
    pub fn quad_form(&self, e: &Vector) -> f64 {
        (&self.p * e).dot(e)
    }
}

fn max_eigenvalue_real_part(a: &Matrix) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// True iff every eigenvalue of `a` has real part below `-HURWITZ_EPS`.
pub fn is_hurwitz(a: &Matrix) -> bool {
    assert!(a.is_square(), "Hurwitz test requires a square matrix");
    max_eigenvalue_real_part(a) < -HURWITZ_EPS
}

fn check_symmetric(s: &Matrix) -> Result<()> {
    let mut asym: f64 = 0.0;
    for i in 0..s.nrows() {
        for j in (i + 1)..s.ncols() {
            asym = asym.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            tolerance: SYMMETRY_TOL,
        });
    }
    Ok(())
}

/// Smallest and largest eigenvalues of a symmetric matrix.
pub fn eig_extrema_sym(s: &Matrix) -> Result<(f64, f64)> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "symmetric eigensolver needs a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    check_symmetric(s)?;
    // symmetrize so the solver sees an exactly symmetric input
    let sym = (s + s.transpose()) * 0.5;
    let eigs = sym.symmetric_eigenvalues();
    let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((min, max))
}

/// Solve `A_m' P + P A_m = -Q` for symmetric positive-definite `P` by a dense
/// solve of the vectorized (Kronecker-form) equation.
pub fn solve_lyapunov(a_m: &Matrix, q: &Matrix) -> Result<LyapunovPair> {
    let n = a_m.nrows();
    if !a_m.is_square() || q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "Lyapunov solve needs square A_m and Q of equal order, got {}x{} and {}x{}",
            a_m.nrows(),
            a_m.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    let max_re = max_eigenvalue_real_part(a_m);
    if max_re >= -HURWITZ_EPS {
        return Err(Error::NotHurwitz {
            max_real_part: max_re,
        });
    }
    check_symmetric(q)?;
    let (q_min, _) = eig_extrema_sym(q)?;
    if q_min <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!(
            "Q has minimum eigenvalue {q_min:.3e}"
        )));
    }

    // Row-major vectorization: row r(i,j) = i*n + j of the operator encodes
    // sum_k A_m[k,i] P[k,j] + sum_k P[i,k] A_m[k,j] = -Q[i,j].
    let idx = |i: usize, j: usize| i * n + j;
    let mut op = Matrix::zeros(n * n, n * n);
    let mut rhs = Vector::zeros(n * n);
    for i in 0..n {
        for j in 0..n {
            let r = idx(i, j);
            for k in 0..n {
                op[(r, idx(k, j))] += a_m[(k, i)];
                op[(r, idx(i, k))] += a_m[(k, j)];
            }
            rhs[r] = -q[(i, j)];
        }
    }
    let vec_p = op.lu().solve(&rhs).ok_or(Error::SingularSystem)?;
    let mut p = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] = vec_p[idx(i, j)];
        }
    }
    let p = (&p + p.transpose()) * 0.5;

    let residual_norm = (a_m.transpose() * &p + &p * a_m + q).norm();
    if residual_norm > LYAPUNOV_RESIDUAL_TOL * (1.0 + q.norm()) {
        return Err(Error::SingularSystem);
    }
    let (p_min, _) = eig_extrema_sym(&p)?;
    if p_min <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!(
            "computed P has minimum eigenvalue {p_min:.3e}"
        )));
    }
    Ok(LyapunovPair {
        p,
        q: q.clone(),
        residual_norm,
    })
}

/// Recover the matching gains `K`, `l` from `A_m - A = B lambda K'` and
/// `B_m = B lambda l` by least squares on the rank-one structure.
///
/// Used only to build test fixtures and truth-dependent diagnostics; the
/// controller never sees the result.
pub fn derive_matching_gains(
    a: &Matrix,
    a_m: &Matrix,
    b: &Vector,
    lambda: f64,
    b_m: &Vector,
) -> Result<(Vector, f64)> {
    let n = a.nrows();
    if !a.is_square() || !a_m.is_square() || a_m.nrows() != n || b.len() != n || b_m.len() != n {
        return Err(Error::DimensionMismatch(
            "matching-gain derivation needs A, A_m square of order n and B, B_m of length n"
                .into(),
        ));
    }
    let bl = b * lambda;
    let denom = bl.norm_squared();
    if denom == 0.0 {
        return Err(Error::ZeroInputChannel);
    }
    let delta = a_m - a;
    // least-squares K: column j of delta projected onto bl
    let k = Vector::from_fn(n, |j, _| bl.dot(&delta.column(j).into_owned()) / denom);
    let l = bl.dot(b_m) / denom;

    let k_residual = (&delta - &bl * k.transpose()).amax();
    let l_residual = (b_m - &bl * l).amax();
    if k_residual > MATCHING_TOL || l_residual > MATCHING_TOL {
        return Err(Error::MatchingViolated {
            k_residual,
            l_residual,
        });
    }
    Ok((k, l))
}
