//! Numerical tolerances used throughout synthesis and simulation.
//!
//! Every threshold the library compares against lives here so that a run can
//! be reproduced (or loosened) from the command line without recompiling.

use std::fmt;

/// Relative singular-value threshold for numerical rank.
pub const RANK_TOL: f64 = 1e-9;
/// Relative threshold for linear dependence in the Krylov minimal-polynomial search.
pub const MINIMAL_POLYNOMIAL_TOL: f64 = 1e-8;
/// Absolute distance under which two eigenvalues of the exosystem are the same.
pub const EIGEN_DEDUP_TOL: f64 = 1e-8;
/// Absolute asymmetry admitted for matrices that must be symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Smallest eigenvalue a matrix must exceed to count as positive definite.
pub const POS_DEF_TOL: f64 = 1e-10;
/// Slack on negative-semidefinite checks of the common Lyapunov inequality.
pub const SEMIDEFINITE_TOL: f64 = 1e-9;
/// Bisection resolution for the common decay certificate.
pub const CERTIFICATE_RESOLUTION: f64 = 1e-6;
/// Relative residual accepted from the Riccati solver.
pub const CARE_RESIDUAL_TOL: f64 = 1e-8;
/// Relative residual accepted from Kronecker-vectorized linear solves.
pub const SYLVESTER_RESIDUAL_TOL: f64 = 1e-9;
/// Condition estimate above which a vectorized operator is treated as singular.
pub const SINGULAR_CONDITION_LIMIT: f64 = 1e12;
/// State norm at which an integration is declared divergent.
pub const DIVERGENCE_GUARD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rank: f64,
    pub minimal_polynomial: f64,
    pub eigen_dedup: f64,
    pub symmetry: f64,
    pub pos_def: f64,
    pub semidefinite: f64,
    pub certificate_resolution: f64,
    pub care_residual: f64,
    pub divergence_guard: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank: RANK_TOL,
            minimal_polynomial: MINIMAL_POLYNOMIAL_TOL,
            eigen_dedup: EIGEN_DEDUP_TOL,
            symmetry: SYMMETRY_TOL,
            pos_def: POS_DEF_TOL,
            semidefinite: SEMIDEFINITE_TOL,
            certificate_resolution: CERTIFICATE_RESOLUTION,
            care_residual: CARE_RESIDUAL_TOL,
            divergence_guard: DIVERGENCE_GUARD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownTolerance(pub String);

impl fmt::Display for UnknownTolerance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unknown tolerance `{}` (expected one of: {})",
            self.0,
            Tolerances::KEYS.join(", ")
        )
    }
}

impl std::error::Error for UnknownTolerance {}

impl Tolerances {
    pub const KEYS: [&'static str; 9] = [
        "rank",
        "minimal_polynomial",
        "eigen_dedup",
        "symmetry",
        "pos_def",
        "semidefinite",
        "certificate_resolution",
        "care_residual",
        "divergence_guard",
    ];

    /// Overrides one tolerance by name.
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), UnknownTolerance> {
        let slot = match key {
            "rank" => &mut self.rank,
            "minimal_polynomial" => &mut self.minimal_polynomial,
            "eigen_dedup" => &mut self.eigen_dedup,
            "symmetry" => &mut self.symmetry,
            "pos_def" => &mut self.pos_def,
            "semidefinite" => &mut self.semidefinite,
            "certificate_resolution" => &mut self.certificate_resolution,
            "care_residual" => &mut self.care_residual,
            "divergence_guard" => &mut self.divergence_guard,
            other => return Err(UnknownTolerance(other.to_string())),
        };
        *slot = value;
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        Some(match key {
            "rank" => self.rank,
            "minimal_polynomial" => self.minimal_polynomial,
            "eigen_dedup" => self.eigen_dedup,
            "symmetry" => self.symmetry,
            "pos_def" => self.pos_def,
            "semidefinite" => self.semidefinite,
            "certificate_resolution" => self.certificate_resolution,
            "care_residual" => self.care_residual,
            "divergence_guard" => self.divergence_guard,
            _ => return None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_round_trips() {
        let mut tol = Tolerances::default();
        for (i, key) in Tolerances::KEYS.iter().enumerate() {
            tol.set(key, i as f64 + 0.5).unwrap();
            assert_eq!(tol.get(key), Some(i as f64 + 0.5));
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        let mut tol = Tolerances::default();
        let err = tol.set("nope", 1.0).unwrap_err();
        assert!(err.to_string().contains("nope"));
    }
}
