use super::{ensure_finite, singular_values, unvec, vec, LinalgError, Mat};
use crate::config::{SINGULAR_CONDITION_LIMIT, SYLVESTER_RESIDUAL_TOL};

/// Solves `Σ_k L_k · X · R_k = C` for `X`.
///
/// The equation is vectorized as `(Σ_k R_kᵀ ⊗ L_k) vec(X) = vec(C)` with
/// column-major `vec`, and solved densely. Every term must agree on the
/// shape of `X`; the vectorized operator must be square and well conditioned.
pub fn solve_general_sylvester(terms: &[(&Mat, &Mat)], c: &Mat) -> Result<Mat, LinalgError> {
    const OP: &str = "solve_general_sylvester";
    let (first_l, first_r) = terms.first().ok_or_else(|| LinalgError::Dimension {
        op: OP,
        expected: "at least one term".into(),
        rows: c.nrows(),
        cols: c.ncols(),
    })?;
    let (xr, xc) = (first_l.ncols(), first_r.nrows());
    for (l, r) in terms {
        ensure_finite(OP, l)?;
        ensure_finite(OP, r)?;
        if l.nrows() != c.nrows() || l.ncols() != xr {
            return Err(LinalgError::Dimension {
                op: OP,
                expected: format!("left factor {}x{}", c.nrows(), xr),
                rows: l.nrows(),
                cols: l.ncols(),
            });
        }
        if r.ncols() != c.ncols() || r.nrows() != xc {
            return Err(LinalgError::Dimension {
                op: OP,
                expected: format!("right factor {}x{}", xc, c.ncols()),
                rows: r.nrows(),
                cols: r.ncols(),
            });
        }
    }
    ensure_finite(OP, c)?;
    let unknowns = xr * xc;
    if unknowns != c.len() {
        return Err(LinalgError::Dimension {
            op: OP,
            expected: format!("{unknowns} equations for a {xr}x{xc} unknown"),
            rows: c.nrows(),
            cols: c.ncols(),
        });
    }
    if unknowns == 0 {
        return Ok(Mat::zeros(xr, xc));
    }

    let mut op = Mat::zeros(unknowns, unknowns);
    for (l, r) in terms {
        op += r.transpose().kronecker(*l);
    }
    let sv = singular_values(&op)?;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= SINGULAR_CONDITION_LIMIT) {
        return Err(LinalgError::Singular { op: OP, condition });
    }
    let sol = op
        .lu()
        .solve(&vec(c))
        .ok_or(LinalgError::Singular { op: OP, condition })?;
    let x = unvec(&sol, xr, xc);

    let mut resid = -c.clone();
    for (l, r) in terms {
        resid += *l * &x * *r;
    }
    let bound = SYLVESTER_RESIDUAL_TOL * (1.0 + c.norm());
    if resid.norm() > bound {
        return Err(LinalgError::Numerical {
            op: OP,
            reason: format!(
                "residual {:.3e} exceeds {:.3e} (condition estimate {:.3e})",
                resid.norm(),
                bound,
                condition
            ),
        });
    }
    Ok(x)
}

/// Solves the continuous Lyapunov equation `AᵀX + XA + Q = 0`.
pub fn solve_lyapunov(a: &Mat, q: &Mat) -> Result<Mat, LinalgError> {
    super::ensure_square("solve_lyapunov", a)?;
    let n = a.nrows();
    let eye = Mat::identity(n, n);
    let at = a.transpose();
    let x = solve_general_sylvester(&[(&at, &eye), (&eye, a)], &(-q))?;
    Ok(super::symmetrize(&x))
}
