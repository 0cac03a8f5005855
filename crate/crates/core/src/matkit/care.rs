use super::schur::ordered_real_schur;
use super::{
    complex_embedding, eigvals, ensure_finite, is_hurwitz, matrix_rank, solve_lyapunov,
    sym_eigvals, symmetrize, symmetry_deviation, LinalgError, Mat,
};
use crate::config::{CARE_RESIDUAL_TOL, RANK_TOL, SYMMETRY_TOL};

const OP: &str = "solve_care";

/// Frobenius norm of `AᵀP + PA − PBR⁻¹BᵀP + Q`.
pub fn care_residual(a: &Mat, b: &Mat, q: &Mat, r: &Mat, p: &Mat) -> f64 {
    let g = match r.clone().try_inverse() {
        Some(ri) => b * ri * b.transpose(),
        None => return f64::INFINITY,
    };
    (a.transpose() * p + p * a - p * g * p + q).norm()
}

fn dim_err(expected: String, m: &Mat) -> LinalgError {
    LinalgError::Dimension {
        op: OP,
        expected,
        rows: m.nrows(),
        cols: m.ncols(),
    }
}

fn check_inputs(a: &Mat, b: &Mat, q: &Mat, r: &Mat) -> Result<(), LinalgError> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(dim_err("a square state matrix".into(), a));
    }
    if b.nrows() != n {
        return Err(dim_err(format!("an input matrix with {n} rows"), b));
    }
    let m = b.ncols();
    if q.shape() != (n, n) {
        return Err(dim_err(format!("a {n}x{n} state weight"), q));
    }
    if r.shape() != (m, m) {
        return Err(dim_err(format!("a {m}x{m} input weight"), r));
    }
    for x in [a, b, q, r] {
        ensure_finite(OP, x)?;
    }
    for w in [q, r] {
        let deviation = symmetry_deviation(w);
        if deviation > SYMMETRY_TOL * (1.0 + w.amax()) {
            return Err(LinalgError::NotSymmetric { op: OP, deviation });
        }
    }
    if m > 0 && sym_eigvals(r)?[0] <= 0.0 {
        return Err(LinalgError::Numerical {
            op: OP,
            reason: "input weight R is not positive definite".into(),
        });
    }
    if n > 0 && sym_eigvals(q)?[0] < -SYMMETRY_TOL * (1.0 + q.amax()) {
        return Err(LinalgError::Numerical {
            op: OP,
            reason: "state weight Q is not positive semidefinite".into(),
        });
    }
    Ok(())
}

/// Every eigenvalue of `A` with non-negative real part must be controllable
/// (Popov–Belevitch–Hautus test over the complex embedding).
fn check_stabilizable(a: &Mat, b: &Mat) -> Result<(), LinalgError> {
    let n = a.nrows();
    let scale = 1e-9 * (1.0 + a.amax());
    for lambda in eigvals(a)? {
        if lambda.re < -scale {
            continue;
        }
        let mut re = Mat::zeros(n, n + b.ncols());
        re.view_mut((0, 0), (n, n)).copy_from(&(a - Mat::identity(n, n) * lambda.re));
        re.view_mut((0, n), (n, b.ncols())).copy_from(b);
        let mut im = Mat::zeros(n, n + b.ncols());
        im.view_mut((0, 0), (n, n)).copy_from(&(Mat::identity(n, n) * -lambda.im));
        if matrix_rank(&complex_embedding(&re, &im), RANK_TOL)? < 2 * n {
            return Err(LinalgError::NotStabilizable { op: OP, mode: lambda });
        }
    }
    Ok(())
}

/// Stabilizing solution of the continuous algebraic Riccati equation
/// `AᵀP + PA − PBR⁻¹BᵀP + Q = 0`.
///
/// The stable invariant subspace of the Hamiltonian `[[A, −BR⁻¹Bᵀ], [−Q, −Aᵀ]]`
/// is read off an ordered real Schur form, `P = U₂₁U₁₁⁻¹`, and one
/// Newton–Kleinman step polishes the result.
pub fn solve_care(a: &Mat, b: &Mat, q: &Mat, r: &Mat) -> Result<Mat, LinalgError> {
    check_inputs(a, b, q, r)?;
    check_stabilizable(a, b)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let r_inv = r.clone().try_inverse().ok_or(LinalgError::Singular {
        op: OP,
        condition: f64::INFINITY,
    })?;
    let g = b * &r_inv * b.transpose();

    let mut h = Mat::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let schur = ordered_real_schur(&h, |z| z.re < 0.0)?;
    if schur.selected != n {
        return Err(LinalgError::Numerical {
            op: OP,
            reason: format!(
                "Hamiltonian has {} stable eigenvalues, expected {n} (eigenvalues on the imaginary axis?)",
                schur.selected
            ),
        });
    }
    let u11 = schur.q.view((0, 0), (n, n)).clone_owned();
    let u21 = schur.q.view((n, 0), (n, n)).clone_owned();
    let p = u11
        .transpose()
        .lu()
        .solve(&u21.transpose())
        .ok_or(LinalgError::Singular {
            op: OP,
            condition: f64::INFINITY,
        })?
        .transpose();
    let mut p = symmetrize(&p);

    // Newton–Kleinman refinement.
    let k = &r_inv * b.transpose() * &p;
    let closed = a - b * &k;
    if let Ok(refined) = solve_lyapunov(&closed, &(q + k.transpose() * r * &k)) {
        if care_residual(a, b, q, r, &refined) <= care_residual(a, b, q, r, &p) {
            p = refined;
        }
    }

    let scale = 1.0 + q.norm() + 2.0 * a.norm() * p.norm() + g.norm() * p.norm() * p.norm();
    let residual = care_residual(a, b, q, r, &p);
    if residual > CARE_RESIDUAL_TOL * scale {
        return Err(LinalgError::Numerical {
            op: OP,
            reason: format!("Riccati residual {residual:.3e} exceeds tolerance"),
        });
    }
    if !is_hurwitz(&(a - &g * &p), 0.0)? {
        return Err(LinalgError::Numerical {
            op: OP,
            reason: "Riccati solution does not stabilize the closed loop".into(),
        });
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(x: f64) -> Mat {
        Mat::from_element(1, 1, x)
    }

    #[test]
    fn lyapunov_limit_with_zero_input() {
        let p = solve_care(&scalar(-1.0), &scalar(0.0), &scalar(1.0), &scalar(1.0)).unwrap();
        assert_relative_eq!(p[(0, 0)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn scalar_integrator() {
        let p = solve_care(&scalar(0.0), &scalar(1.0), &scalar(1.0), &scalar(1.0)).unwrap();
        assert_relative_eq!(p[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn double_integrator_matches_closed_form() {
        // P = [[√3, 1], [1, √3]] for A = [[0,1],[0,0]], B = [0;1], Q = I, R = 1.
        let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = Mat::from_row_slice(2, 1, &[0.0, 1.0]);
        let p = solve_care(&a, &b, &Mat::identity(2, 2), &scalar(1.0)).unwrap();
        let s3 = 3f64.sqrt();
        assert_relative_eq!(p, Mat::from_row_slice(2, 2, &[s3, 1.0, 1.0, s3]), epsilon = 1e-10);
    }

    #[test]
    fn unstabilizable_pair_is_rejected() {
        let err = solve_care(&scalar(1.0), &scalar(0.0), &scalar(1.0), &scalar(1.0)).unwrap_err();
        assert!(matches!(err, LinalgError::NotStabilizable { .. }));
    }

    #[test]
    fn indefinite_input_weight_is_rejected() {
        assert!(solve_care(&scalar(0.0), &scalar(1.0), &scalar(1.0), &scalar(-1.0)).is_err());
    }
}
