//! Controller synthesis: internal model, distributed observer, stabilizing
//! and estimator gains, and the regulator-equation oracle.

mod gains;
mod internal_model;
mod observer;
mod regulator;

pub use gains::{
    augmented_pair, closed_loop_matrix, estimator_similarity, luenberger_gain, output_closed_loop_matrix,
    stabilizing_gains, triangularized_output_loop, AgentGains,
};
pub use internal_model::{build_internal_model, companion, InternalModel};
pub use observer::{
    certify_common_lyapunov, common_decay_rate, leader_lyapunov, lyapunov_margin, observer_gain, ObserverDesign,
};
pub use regulator::{
    output_feedback_manifold, solve_regulator_equations, state_feedback_manifold, OutputFeedbackManifold,
    RegulatorSolution, StateFeedbackManifold,
};

use thiserror::Error;

use crate::graph::{grounded_eigenvalues, min_grounded_eig, GraphError};
use crate::matkit::{Complex64, LinalgError};
use crate::model::{check_transmission_zeros, validate_scenario, ControlMode, Scenario};

fn agent_suffix(agent: &Option<usize>) -> String {
    agent.map(|a| format!(" (agent {a})")).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("scenario failed validation: {0}")]
    Invalid(String),
    #[error("invalid synthesis option: {0}")]
    InvalidOption(String),
    #[error("leader pair (F, S) is not observable")]
    LeaderUnobservable,
    #[error("agent {agent}: transmission-zero condition fails at eigenvalue {lambda} of S")]
    TransmissionZero { agent: usize, lambda: Complex64 },
    #[error("agent {agent}: augmented plant/internal-model pair is not stabilizable (mode {mode})")]
    AugmentedUncontrollable { agent: usize, mode: Complex64 },
    #[error("agent {agent}: nominal (C, A) is not observable")]
    AgentUnobservable { agent: usize },
    #[error("agent {agent}: closed loop is not Hurwitz (spectral abscissa {abscissa:.3e})")]
    NotHurwitz { agent: usize, abscissa: f64 },
    #[error("internal model pair (G1, G2) is not controllable")]
    InternalModelUncontrollable,
    #[error("minimum grounded eigenvalue must be positive, got {0}")]
    NonPositiveSpectrum(f64),
    #[error("common Lyapunov inequality fails at (topology, eigenvalue) pairs {0:?}")]
    Certificate(Vec<(usize, usize)>),
    #[error("regulator equations are not solvable (condition estimate {condition:.3e})")]
    RegulatorUnsolvable { condition: f64 },
    #[error("controller bank mode does not match the requested closed loop")]
    ModeMismatch,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{stage}{}: {source}", agent_suffix(.agent))]
    Numerical {
        stage: &'static str,
        agent: Option<usize>,
        #[source]
        source: LinalgError,
    },
}

impl SynthesisError {
    pub(crate) fn stage(stage: &'static str) -> impl Fn(LinalgError) -> Self {
        move |source| SynthesisError::Numerical {
            stage,
            agent: None,
            source,
        }
    }

    pub(crate) fn agent_stage(stage: &'static str, agent: usize) -> impl Fn(LinalgError) -> Self {
        move |source| SynthesisError::Numerical {
            stage,
            agent: Some(agent),
            source,
        }
    }
}

/// Everything the distributed controllers need, plus the certificates that
/// justify them.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerBank {
    pub mode: ControlMode,
    pub observer: ObserverDesign,
    pub internal_model: InternalModel,
    pub agents: Vec<AgentGains>,
}

/// Builds the full controller bank for a scenario from nominal plant data only.
pub fn synthesize(s: &Scenario, mode: ControlMode) -> Result<ControllerBank, SynthesisError> {
    let report = validate_scenario(s);
    if let Some(item) = report.failures().find(|i| i.condition != crate::model::TRANSMISSION_ZEROS) {
        if item.condition == crate::model::LEADER_OBSERVABILITY {
            return Err(SynthesisError::LeaderUnobservable);
        }
        return Err(SynthesisError::Invalid(format!("{} {}: {}", item.condition, item.subject, item.detail)));
    }
    let opts = &s.synthesis;
    let tol = &opts.tolerances;
    let (sm, f) = (s.leader.s(), s.leader.f());

    let internal_model = build_internal_model(sm, s.leader.q(), tol.minimal_polynomial, tol.rank)?;

    let p = leader_lyapunov(sm, f, tol.rank)?;
    let topologies = s.signal.topologies();
    let lambda_bar = min_grounded_eig(topologies)?;
    let (mu_star, mu, l0) = observer_gain(&p, f, lambda_bar, opts.mu_margin)?;
    let grounded_eigs = topologies
        .iter()
        .map(grounded_eigenvalues)
        .collect::<Result<Vec<_>, _>>()?;
    let c = certify_common_lyapunov(&p, &l0, sm, f, &grounded_eigs, tol.certificate_resolution, tol.semidefinite)?;
    let margin = lyapunov_margin(&p, sm, f).map_err(SynthesisError::stage("Lyapunov inequality"))?;
    let observer = ObserverDesign {
        p,
        mu_star,
        mu,
        l0,
        c,
        lambda_bar,
        grounded_eigs,
        lyapunov_margin: margin,
    };

    let agents = s
        .agents
        .iter()
        .map(|plant| {
            let tz = check_transmission_zeros(plant, &s.leader, tol)
                .map_err(SynthesisError::agent_stage("transmission zeros", plant.index()))?;
            if let Some(&lambda) = tz.failing.first() {
                return Err(SynthesisError::TransmissionZero {
                    agent: plant.index(),
                    lambda,
                });
            }
            let (k1, k2) = stabilizing_gains(plant, &internal_model, opts.regulator)?;
            let k3 = match mode {
                ControlMode::State => None,
                ControlMode::Output => Some(luenberger_gain(plant, opts.estimator, tol.rank)?),
            };
            Ok(AgentGains { k1, k2, k3 })
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(ControllerBank {
        mode,
        observer,
        internal_model,
        agents,
    })
}
