//! Run reports, printed as TOML.

use serde::Serialize;

use crate::scenario_file::ModeName;

#[derive(Debug, Clone, Serialize)]
pub struct CertificateSummary {
    /// Largest eigenvalue of `PS + SᵀP − 2FᵀF`; negative when the leader inequality holds.
    pub lyapunov_margin: f64,
    pub lambda_bar: f64,
    pub mu_star: f64,
    pub mu: f64,
    /// Certified common decay rate.
    pub c: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AgentSummary {
    pub agent: usize,
    /// Spectral abscissa of the nominal closed loop.
    pub nominal_abscissa: f64,
    /// Spectral abscissa of the closed loop with the actual plant.
    pub actual_abscissa: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimator_abscissa: Option<f64>,
    /// Nominal closed-loop eigenvalues as `[re, im]` pairs.
    pub nominal_eigenvalues: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceSummary {
    pub t_end: f64,
    pub dt: f64,
    pub csv_rows: usize,
    pub tail_start: f64,
    pub tail_max_error: f64,
    pub tail_max_error_by_agent: Vec<f64>,
    pub final_max_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observer_decay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observer_decay_window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Artifacts {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bank: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plot_dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plot_files: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub scenario: String,
    pub mode: ModeName,
    pub certificate: CertificateSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSummary>,
    pub artifacts: Artifacts,
    pub agents: Vec<AgentSummary>,
}

impl RunReport {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report fields are always representable in TOML")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub command: String,
    pub scenario: String,
    pub mode: ModeName,
    pub points: usize,
    pub diverged: usize,
    pub worst_tail_max_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

impl SweepSummary {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("summary fields are always representable in TOML")
    }
}
