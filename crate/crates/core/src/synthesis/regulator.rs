//! Regulator equations and the steady-state manifolds of the closed loops.
//!
//! None of this is consumed by the controllers at run time; it exists to
//! check that zero-error tracking is feasible and to place simulations
//! exactly on the steady-state manifold.

use crate::matkit::{matrix_rank, singular_values, solve_general_sylvester, unvec, vec, LinalgError, Mat};
use crate::model::StateSpace;

use super::gains::{closed_loop_matrix, output_closed_loop_matrix, AgentGains};
use super::{InternalModel, SynthesisError};

#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorSolution {
    pub x: Mat,
    pub u: Mat,
    /// `‖XS − AX − BU‖_F`.
    pub dynamics_residual: f64,
    /// `‖CX + DU + F‖_F`.
    pub output_residual: f64,
}

/// Solves `XS = AX + BU`, `CX + DU + F = 0` for `(X, U)`.
///
/// The two equations are stacked into one Kronecker-vectorized system in
/// `(vec X, vec U)`. When inputs outnumber outputs the solution is not unique
/// and the minimum-norm one is returned.
pub fn solve_regulator_equations(ss: &StateSpace, s: &Mat, f: &Mat, rank_tol: f64) -> Result<RegulatorSolution, SynthesisError> {
    let (n, p, q, m) = (ss.n(), ss.p(), ss.q(), s.nrows());
    if f.shape() != (q, m) || !s.is_square() {
        return Err(SynthesisError::stage("regulator equations")(LinalgError::Dimension {
            op: "solve_regulator_equations",
            expected: format!("F of shape {q}x{m}"),
            rows: f.nrows(),
            cols: f.ncols(),
        }));
    }
    let rows = n * m + q * m;
    let cols = n * m + p * m;
    let eye_m = Mat::identity(m, m);
    let eye_n = Mat::identity(n, n);
    let mut op = Mat::zeros(rows, cols);
    // vec(XS − AX) = (Sᵀ ⊗ I − I ⊗ A) vec X ; vec(BU) = (I ⊗ B) vec U.
    op.view_mut((0, 0), (n * m, n * m))
        .copy_from(&(s.transpose().kronecker(&eye_n) - eye_m.kronecker(&ss.a)));
    op.view_mut((0, n * m), (n * m, p * m)).copy_from(&(-eye_m.kronecker(&ss.b)));
    op.view_mut((n * m, 0), (q * m, n * m)).copy_from(&eye_m.kronecker(&ss.c));
    op.view_mut((n * m, n * m), (q * m, p * m)).copy_from(&eye_m.kronecker(&ss.d));

    let mut rhs = nalgebra::DVector::zeros(rows);
    rhs.rows_mut(n * m, q * m).copy_from(&(-vec(f)));

    let sv = singular_values(&op).map_err(SynthesisError::stage("regulator equations"))?;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let condition = sv
        .get(rows.saturating_sub(1))
        .map_or(f64::INFINITY, |&s| if s > 0.0 { smax / s } else { f64::INFINITY });
    let rank = matrix_rank(&op, rank_tol).map_err(SynthesisError::stage("regulator equations"))?;
    if rank < rows {
        return Err(SynthesisError::RegulatorUnsolvable { condition });
    }
    let svd = op.clone().svd(true, true);
    let sol = svd
        .solve(&rhs, rank_tol * smax)
        .map_err(|e| SynthesisError::stage("regulator equations")(LinalgError::Numerical {
            op: "solve_regulator_equations",
            reason: e.to_string(),
        }))?;
    let x = unvec(&sol.rows(0, n * m).clone_owned(), n, m);
    let u = unvec(&sol.rows(n * m, p * m).clone_owned(), p, m);
    Ok(RegulatorSolution {
        dynamics_residual: (&x * s - &ss.a * &x - &ss.b * &u).norm(),
        output_residual: (&ss.c * &x + &ss.d * &u + f).norm(),
        x,
        u,
    })
}

/// Steady state of the state-feedback loop: `x = Xv`, `ξ = Zv`, `u = Uv`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFeedbackManifold {
    pub x: Mat,
    pub z: Mat,
    pub u: Mat,
}

/// Solves `[X; Z] S = A_c [X; Z] + [0; G₂F]` for the loop running `plant`
/// under nominal gains. Unique whenever `A_c` and `S` share no eigenvalue.
pub fn state_feedback_manifold(
    plant: &StateSpace,
    im: &InternalModel,
    gains: &AgentGains,
    s: &Mat,
    f: &Mat,
) -> Result<StateFeedbackManifold, SynthesisError> {
    let (n, nz, m) = (plant.n(), im.n_z(), s.nrows());
    let a_c = closed_loop_matrix(plant, im, &gains.k1, &gains.k2);
    let mut e = Mat::zeros(n + nz, m);
    e.view_mut((n, 0), (nz, m)).copy_from(&(&im.g2 * f));
    let eye = Mat::identity(n + nz, n + nz);
    let eye_m = Mat::identity(m, m);
    let neg = -a_c;
    let sol = solve_general_sylvester(&[(&eye, s), (&neg, &eye_m)], &e)
        .map_err(SynthesisError::stage("steady-state manifold"))?;
    let x = sol.rows(0, n).clone_owned();
    let z = sol.rows(n, nz).clone_owned();
    let u = &gains.k1 * &x + &gains.k2 * &z;
    Ok(StateFeedbackManifold { x, z, u })
}

/// Steady state of the output-feedback loop: `x = X̄v`, `ζ = Ȳv`, `ξ = Z̄v`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFeedbackManifold {
    pub x: Mat,
    pub y: Mat,
    pub z: Mat,
    pub u: Mat,
}

pub fn output_feedback_manifold(
    nominal: &StateSpace,
    actual: &StateSpace,
    im: &InternalModel,
    gains: &AgentGains,
    s: &Mat,
    f: &Mat,
) -> Result<OutputFeedbackManifold, SynthesisError> {
    let k3 = gains.k3.as_ref().ok_or(SynthesisError::ModeMismatch)?;
    let (n, nz, m) = (nominal.n(), im.n_z(), s.nrows());
    let a_bar = output_closed_loop_matrix(nominal, actual, im, gains, k3);
    let dim = 2 * n + nz;
    let mut e = Mat::zeros(dim, m);
    e.view_mut((2 * n, 0), (nz, m)).copy_from(&(&im.g2 * f));
    let eye = Mat::identity(dim, dim);
    let eye_m = Mat::identity(m, m);
    let neg = -a_bar;
    let sol = solve_general_sylvester(&[(&eye, s), (&neg, &eye_m)], &e)
        .map_err(SynthesisError::stage("steady-state manifold"))?;
    let x = sol.rows(0, n).clone_owned();
    let y = sol.rows(n, n).clone_owned();
    let z = sol.rows(2 * n, nz).clone_owned();
    let u = &gains.k1 * &y + &gains.k2 * &z;
    Ok(OutputFeedbackManifold { x, y, z, u })
}
