//! Distributed-observer design: a Lyapunov certificate for the leader, the
//! coupling gain, and a common decay rate valid across every topology.

use nalgebra::Cholesky;

use crate::matkit::{inv_sqrt_spd, solve_care, sym_eigvals, symmetrize, LinalgError, Mat};
use crate::model::check_observable;

use super::SynthesisError;

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverDesign {
    /// Symmetric positive definite Lyapunov matrix.
    pub p: Mat,
    pub mu_star: f64,
    pub mu: f64,
    /// Coupling gain `μ P⁻¹ Fᵀ`.
    pub l0: Mat,
    /// Certified common decay rate.
    pub c: f64,
    /// Smallest grounded-matrix eigenvalue over all topologies.
    pub lambda_bar: f64,
    /// Eigenvalues of each `H_p`, ascending.
    pub grounded_eigs: Vec<Vec<f64>>,
    /// Largest eigenvalue of `PS + SᵀP − 2FᵀF` (negative).
    pub lyapunov_margin: f64,
}

/// Largest eigenvalue of `PS + SᵀP − 2FᵀF`.
pub fn lyapunov_margin(p: &Mat, s: &Mat, f: &Mat) -> Result<f64, LinalgError> {
    let m = p * s + s.transpose() * p - f.transpose() * f * 2.0;
    Ok(*sym_eigvals(&m)?.last().unwrap_or(&f64::NEG_INFINITY))
}

/// Lyapunov matrix with `PS + SᵀP − 2FᵀF ≺ 0`.
///
/// `P = Σ⁻¹`, where `Σ` is the stabilizing solution of the filter Riccati
/// equation `SΣ + ΣSᵀ + I − ΣFᵀFΣ = 0`. Multiplying that equation by `P` on
/// both sides gives `PS + SᵀP − 2FᵀF = −P² − FᵀF`.
pub fn leader_lyapunov(s: &Mat, f: &Mat, rank_tol: f64) -> Result<Mat, SynthesisError> {
    if !check_observable(f, s, rank_tol) {
        return Err(SynthesisError::LeaderUnobservable);
    }
    let m = s.nrows();
    let sigma = solve_care(&s.transpose(), &f.transpose(), &Mat::identity(m, m), &Mat::identity(f.nrows(), f.nrows()))
        .map_err(SynthesisError::stage("filter Riccati equation"))?;
    let p = sigma.try_inverse().ok_or_else(|| {
        SynthesisError::stage("filter Riccati equation")(LinalgError::Singular {
            op: "leader_lyapunov",
            condition: f64::INFINITY,
        })
    })?;
    Ok(symmetrize(&p))
}

/// `μ* = max{1/λ̄, 1}`, `μ = μ*(1 + margin)`, `L₀ = μ P⁻¹ Fᵀ`.
pub fn observer_gain(p: &Mat, f: &Mat, lambda_bar: f64, margin: f64) -> Result<(f64, f64, Mat), SynthesisError> {
    if !(lambda_bar > 0.0) {
        return Err(SynthesisError::NonPositiveSpectrum(lambda_bar));
    }
    if !(margin >= 0.0) {
        return Err(SynthesisError::InvalidOption(format!("mu margin must be non-negative, got {margin}")));
    }
    let mu_star = (1.0 / lambda_bar).max(1.0);
    let mu = mu_star * (1.0 + margin);
    let p_inv = p.clone().try_inverse().ok_or_else(|| {
        SynthesisError::stage("observer gain")(LinalgError::Singular {
            op: "observer_gain",
            condition: f64::INFINITY,
        })
    })?;
    Ok((mu_star, mu, p_inv * f.transpose() * mu))
}

fn lmi_matrix(p: &Mat, l0: &Mat, s: &Mat, f: &Mat, lambda: f64) -> Mat {
    let closed = s - l0 * f * lambda;
    closed.transpose() * p + p * closed
}

/// Largest eigenvalue of `P^{-1/2} M_λ P^{-1/2}` for every `(topology, eigenvalue)` pair.
fn congruent_peaks(
    p: &Mat,
    l0: &Mat,
    s: &Mat,
    f: &Mat,
    grounded_eigs: &[Vec<f64>],
) -> Result<Vec<(usize, usize, f64)>, LinalgError> {
    let root = inv_sqrt_spd(p)?;
    let mut out = Vec::new();
    for (k, eigs) in grounded_eigs.iter().enumerate() {
        for (i, &lambda) in eigs.iter().enumerate() {
            let n = &root * lmi_matrix(p, l0, s, f, lambda) * &root;
            out.push((k, i, *sym_eigvals(&n)?.last().unwrap()));
        }
    }
    Ok(out)
}

/// Largest `c > 0`, to within `resolution`, such that
/// `(S − λL₀F)ᵀP + P(S − λL₀F) ⪯ −cP` for every listed eigenvalue `λ`.
///
/// Found by bisection on the congruence-transformed inequality
/// `λ_max(P^{-1/2} M_λ P^{-1/2}) + c ≤ slack`.
pub fn certify_common_lyapunov(
    p: &Mat,
    l0: &Mat,
    s: &Mat,
    f: &Mat,
    grounded_eigs: &[Vec<f64>],
    resolution: f64,
    slack: f64,
) -> Result<f64, SynthesisError> {
    let peaks = congruent_peaks(p, l0, s, f, grounded_eigs).map_err(SynthesisError::stage("common Lyapunov certificate"))?;
    let holds = |c: f64| peaks.iter().all(|&(_, _, peak)| peak + c <= slack);
    if !holds(resolution) {
        let violations = peaks
            .iter()
            .filter(|&&(_, _, peak)| peak + resolution > slack)
            .map(|&(k, i, _)| (k + 1, i + 1))
            .collect();
        return Err(SynthesisError::Certificate(violations));
    }
    let mut lo = resolution;
    let mut hi = 1.0;
    while holds(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Ok(lo);
        }
    }
    while hi - lo > 0.1 * resolution {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Decay rate computed directly, without bisection: `min_λ −λ_max(L⁻¹ M_λ L⁻ᵀ)`
/// with `P = LLᵀ` the Cholesky factorization.
pub fn common_decay_rate(
    p: &Mat,
    l0: &Mat,
    s: &Mat,
    f: &Mat,
    grounded_eigs: &[Vec<f64>],
) -> Result<f64, LinalgError> {
    let chol = Cholesky::new(p.clone()).ok_or_else(|| LinalgError::Numerical {
        op: "common_decay_rate",
        reason: "Lyapunov matrix is not positive definite".into(),
    })?;
    let l = chol.l();
    let mut rate = f64::INFINITY;
    for eigs in grounded_eigs {
        for &lambda in eigs {
            let m = lmi_matrix(p, l0, s, f, lambda);
            let y = l
                .solve_lower_triangular(&m)
                .and_then(|y| l.solve_lower_triangular(&y.transpose()))
                .ok_or_else(|| LinalgError::Numerical {
                    op: "common_decay_rate",
                    reason: "triangular solve failed".into(),
                })?;
            rate = rate.min(-sym_eigvals(&y)?.last().unwrap());
        }
    }
    Ok(rate)
}
