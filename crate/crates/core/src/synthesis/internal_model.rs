use crate::matkit::{kron, minimal_polynomial, Mat, PolyCoeffs};
use crate::model::check_controllable;

use super::SynthesisError;

/// `q` parallel copies of the companion realization of the exosystem's
/// minimal polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalModel {
    pub alpha: PolyCoeffs,
    pub beta: Mat,
    pub gamma: Mat,
    pub g1: Mat,
    pub g2: Mat,
    pub q: usize,
}

impl InternalModel {
    /// State dimension `q · deg α`.
    pub fn n_z(&self) -> usize {
        self.g1.nrows()
    }
}

/// Bottom-row companion matrix of `α` and the input vector `col(0, …, 0, 1)`.
pub fn companion(alpha: &PolyCoeffs) -> (Mat, Mat) {
    let d = alpha.degree();
    let mut beta = Mat::zeros(d, d);
    for i in 0..d.saturating_sub(1) {
        beta[(i, i + 1)] = 1.0;
    }
    // Last row: −α_d, −α_{d−1}, …, −α₁.
    for (j, &c) in alpha.tail().iter().rev().enumerate() {
        beta[(d - 1, j)] = -c;
    }
    let mut gamma = Mat::zeros(d, 1);
    gamma[(d - 1, 0)] = 1.0;
    (beta, gamma)
}

pub fn build_internal_model(s: &Mat, q: usize, tol: f64, rank_tol: f64) -> Result<InternalModel, SynthesisError> {
    let alpha = minimal_polynomial(s, tol).map_err(SynthesisError::stage("minimal polynomial"))?;
    let (beta, gamma) = companion(&alpha);
    let eye = Mat::identity(q, q);
    let g1 = kron(&eye, &beta);
    let g2 = kron(&eye, &gamma);
    if !check_controllable(&g1, &g2, rank_tol) {
        return Err(SynthesisError::InternalModelUncontrollable);
    }
    Ok(InternalModel {
        alpha,
        beta,
        gamma,
        g1,
        g2,
        q,
    })
}
