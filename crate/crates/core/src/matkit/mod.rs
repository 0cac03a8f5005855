//! Dense real linear-algebra kernels: spectra, rank, minimal polynomials,
//! Kronecker-vectorized solves, Riccati and Lyapunov equations, and the
//! matrix exponential.
//!
//! Everything operates on [`Mat`] (a dynamically sized `f64` matrix) and is a
//! pure function of its inputs.

mod care;
mod schur;
mod sylvester;

pub use care::{care_residual, solve_care};
pub use sylvester::{solve_general_sylvester, solve_lyapunov};

use nalgebra::{Complex, DMatrix, DVector, Schur};
use thiserror::Error;

use crate::config::{EIGEN_DEDUP_TOL, SYMMETRY_TOL};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type Complex64 = Complex<f64>;

const SCHUR_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("{op}: expected {expected}, got a {rows}x{cols} matrix")]
    Dimension {
        op: &'static str,
        expected: String,
        rows: usize,
        cols: usize,
    },
    #[error("{op}: matrix has non-finite entries")]
    NotFinite { op: &'static str },
    #[error("{op}: matrix is not symmetric (max deviation {deviation:.3e})")]
    NotSymmetric { op: &'static str, deviation: f64 },
    #[error("{op}: linear operator is singular (condition estimate {condition:.3e})")]
    Singular { op: &'static str, condition: f64 },
    #[error("{op}: pair is not stabilizable (uncontrollable mode at {mode})")]
    NotStabilizable { op: &'static str, mode: Complex64 },
    #[error("{op}: {reason}")]
    Numerical { op: &'static str, reason: String },
}

pub(crate) fn ensure_finite(op: &'static str, m: &Mat) -> Result<(), LinalgError> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NotFinite { op })
    }
}

pub(crate) fn ensure_square(op: &'static str, m: &Mat) -> Result<(), LinalgError> {
    if m.is_square() {
        Ok(())
    } else {
        Err(LinalgError::Dimension {
            op,
            expected: "a square matrix".into(),
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

/// Largest absolute difference between `m` and its transpose.
pub fn symmetry_deviation(m: &Mat) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            dev = dev.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    dev
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a square matrix with multiplicity, in no particular order.
///
/// Exactly symmetric input goes through the symmetric eigensolver so the
/// returned spectrum is real.
pub fn eigvals(m: &Mat) -> Result<Vec<Complex64>, LinalgError> {
    const OP: &str = "eigvals";
    ensure_square(OP, m)?;
    ensure_finite(OP, m)?;
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let scale = m.amax().max(1.0);
    if symmetry_deviation(m) <= 1e-14 * scale {
        return Ok(sym_eigvals(m)?
            .into_iter()
            .map(|re| Complex64::new(re, 0.0))
            .collect());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER).ok_or_else(|| {
        LinalgError::Numerical {
            op: OP,
            reason: "Schur iteration did not converge".into(),
        }
    })?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigvals(m: &Mat) -> Result<Vec<f64>, LinalgError> {
    const OP: &str = "sym_eigvals";
    ensure_square(OP, m)?;
    ensure_finite(OP, m)?;
    let eig = symmetrize(m)
        .try_symmetric_eigen(f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| LinalgError::Numerical {
            op: OP,
            reason: "symmetric eigen-iteration did not converge".into(),
        })?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Maximum real part over the spectrum.
pub fn spectral_abscissa(m: &Mat) -> Result<f64, LinalgError> {
    Ok(eigvals(m)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// True iff every eigenvalue has real part strictly below `-margin`.
pub fn is_hurwitz(m: &Mat, margin: f64) -> Result<bool, LinalgError> {
    Ok(spectral_abscissa(m)? < -margin)
}

/// True iff the symmetric matrix `m` has smallest eigenvalue above `tol`.
///
/// Fails with [`LinalgError::NotSymmetric`] if `m` deviates from symmetry by
/// more than `max(tol, SYMMETRY_TOL)`.
pub fn is_pos_def(m: &Mat, tol: f64) -> Result<bool, LinalgError> {
    const OP: &str = "is_pos_def";
    ensure_square(OP, m)?;
    ensure_finite(OP, m)?;
    let deviation = symmetry_deviation(m);
    if deviation > tol.max(SYMMETRY_TOL) {
        return Err(LinalgError::NotSymmetric { op: OP, deviation });
    }
    Ok(sym_eigvals(m)?.first().is_none_or(|&min| min > tol))
}

/// Numerical rank: singular values above `tol · max(rows, cols) · σ_max`.
pub fn matrix_rank(m: &Mat, tol: f64) -> Result<usize, LinalgError> {
    const OP: &str = "matrix_rank";
    ensure_finite(OP, m)?;
    if m.is_empty() {
        return Ok(0);
    }
    let sv = singular_values(m)?;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(0);
    }
    let cutoff = tol * m.nrows().max(m.ncols()) as f64 * smax;
    Ok(sv.iter().filter(|&&s| s > cutoff).count())
}

pub(crate) fn singular_values(m: &Mat) -> Result<Vec<f64>, LinalgError> {
    let svd = m
        .clone()
        .try_svd(false, false, f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| LinalgError::Numerical {
            op: "svd",
            reason: "singular value iteration did not converge".into(),
        })?;
    Ok(svd.singular_values.iter().copied().collect())
}

/// Real `2r×2c` embedding `[[Re, −Im], [Im, Re]]` of a complex matrix.
///
/// The complex rank of `re + i·im` is half the real rank of the embedding.
pub fn complex_embedding(re: &Mat, im: &Mat) -> Mat {
    assert_eq!(re.shape(), im.shape(), "complex_embedding: shape mismatch");
    let (r, c) = re.shape();
    let mut out = Mat::zeros(2 * r, 2 * c);
    out.view_mut((0, 0), (r, c)).copy_from(re);
    out.view_mut((0, c), (r, c)).copy_from(&(-im));
    out.view_mut((r, 0), (r, c)).copy_from(im);
    out.view_mut((r, c), (r, c)).copy_from(re);
    out
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// `vec(X)`: columns stacked top to bottom.
pub fn vec(m: &Mat) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Mat {
    Mat::from_column_slice(rows, cols, v.as_slice())
}

/// `e^{M t}` by scaling and squaring with a Padé approximant.
pub fn expm(m: &Mat, t: f64) -> Result<Mat, LinalgError> {
    const OP: &str = "expm";
    ensure_square(OP, m)?;
    ensure_finite(OP, m)?;
    if !t.is_finite() {
        return Err(LinalgError::NotFinite { op: OP });
    }
    let scaled = m * t;
    if !scaled.norm().is_finite() {
        return Err(LinalgError::Numerical {
            op: OP,
            reason: "argument norm overflows".into(),
        });
    }
    let e = scaled.exp();
    if e.iter().all(|x| x.is_finite()) {
        Ok(e)
    } else {
        Err(LinalgError::Numerical {
            op: OP,
            reason: format!("result overflows for |Mt| = {:.3e}", scaled.norm()),
        })
    }
}

/// Monic polynomial `s^d + c₁ s^{d−1} + … + c_d`, stored highest degree first
/// with the leading 1 kept explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCoeffs(Vec<f64>);

impl PolyCoeffs {
    /// Builds from the non-leading coefficients `c₁ … c_d`.
    ///
    /// # Panics
    /// If `tail` is empty (degree must be at least one).
    pub fn from_tail(tail: &[f64]) -> Self {
        assert!(!tail.is_empty(), "polynomial degree must be at least 1");
        let mut c = Vec::with_capacity(tail.len() + 1);
        c.push(1.0);
        c.extend_from_slice(tail);
        Self(c)
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    /// All coefficients, leading 1 first.
    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    /// `c₁ … c_d`.
    pub fn tail(&self) -> &[f64] {
        &self.0[1..]
    }

    /// Evaluates the polynomial at a square matrix (Horner).
    pub fn eval_matrix(&self, m: &Mat) -> Mat {
        let n = m.nrows();
        let mut acc = Mat::identity(n, n);
        for &c in self.tail() {
            acc = &acc * m + Mat::identity(n, n) * c;
        }
        acc
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.0
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }
}

/// Lowest-degree monic polynomial annihilating `m`.
///
/// Powers `I, M, M², …` (of a norm-scaled `M`) are vectorized and
/// orthogonalized one at a time; the first power whose residual against the
/// span of its predecessors falls below `tol` fixes the degree, and the
/// coefficients come from a least-squares fit on the Krylov columns.
pub fn minimal_polynomial(m: &Mat, tol: f64) -> Result<PolyCoeffs, LinalgError> {
    const OP: &str = "minimal_polynomial";
    ensure_square(OP, m)?;
    ensure_finite(OP, m)?;
    let n = m.nrows();
    if n == 0 {
        return Err(LinalgError::Dimension {
            op: OP,
            expected: "a non-empty square matrix".into(),
            rows: 0,
            cols: 0,
        });
    }
    let scale = m.norm();
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let ms = m / scale;

    let mut krylov: Vec<Vector> = Vec::new();
    let mut basis: Vec<Vector> = Vec::new();
    let mut power = Mat::identity(n, n);
    for _ in 0..=n {
        let v = vec(&power);
        let norm = v.norm();
        let mut r = v.clone();
        // Two passes of modified Gram-Schmidt keep the basis orthogonal.
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&r);
                r.axpy(-proj, q, 1.0);
            }
        }
        let rnorm = r.norm();
        if rnorm <= tol * norm.max(f64::MIN_POSITIVE) {
            let k = krylov.len();
            let mut lhs = Mat::zeros(n * n, k);
            // Columns ordered M^{k−1}, …, M⁰ so the solution reads c₁ … c_k.
            for (col, kv) in krylov.iter().rev().enumerate() {
                lhs.set_column(col, kv);
            }
            let svd = lhs.svd(true, true);
            let sol = svd
                .solve(&(-v), f64::EPSILON)
                .map_err(|e| LinalgError::Numerical {
                    op: OP,
                    reason: e.to_string(),
                })?;
            let tail: Vec<f64> = sol
                .iter()
                .enumerate()
                .map(|(j, &c)| c * scale.powi(j as i32 + 1))
                .collect();
            return Ok(PolyCoeffs::from_tail(&tail));
        }
        basis.push(r / rnorm);
        krylov.push(v);
        power = &power * &ms;
    }
    Err(LinalgError::Numerical {
        op: OP,
        reason: "Krylov search exceeded the matrix dimension".into(),
    })
}

/// Distinct eigenvalues of `m`, merging those closer than `tol`.
pub fn distinct_eigvals(m: &Mat, tol: f64) -> Result<Vec<Complex64>, LinalgError> {
    let mut out: Vec<Complex64> = Vec::new();
    for z in eigvals(m)? {
        if !out.iter().any(|w| (w - z).norm() <= tol) {
            out.push(z);
        }
    }
    Ok(out)
}

/// [`distinct_eigvals`] at the default deduplication tolerance.
pub fn distinct_eigvals_default(m: &Mat) -> Result<Vec<Complex64>, LinalgError> {
    distinct_eigvals(m, EIGEN_DEDUP_TOL)
}

/// Inverse square root of a symmetric positive definite matrix.
pub fn inv_sqrt_spd(m: &Mat) -> Result<Mat, LinalgError> {
    const OP: &str = "inv_sqrt_spd";
    ensure_square(OP, m)?;
    let eig = symmetrize(m)
        .try_symmetric_eigen(f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| LinalgError::Numerical {
            op: OP,
            reason: "symmetric eigen-iteration did not converge".into(),
        })?;
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(LinalgError::Numerical {
            op: OP,
            reason: "matrix is not positive definite".into(),
        });
    }
    let d = Mat::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}
