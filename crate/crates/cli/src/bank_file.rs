//! TOML serialization of a [`ControllerBank`].
//!
//! Floats are written in shortest round-trip form, so loading a saved bank
//! reproduces every gain bit for bit.

use std::path::Path;

use consensus_core::matkit::{Mat, PolyCoeffs};
use consensus_core::synthesis::{AgentGains, ControllerBank, InternalModel, ObserverDesign};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario_file::{matrix, ModeName, RawMatrix, ScenarioError};

#[derive(Debug, Error)]
pub enum BankError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Syntax(String),
    #[error(transparent)]
    Field(#[from] ScenarioError),
    #[error("bank serialization failed: {0}")]
    Serialize(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObserverSection {
    #[serde(rename = "P")]
    p: RawMatrix,
    mu_star: f64,
    mu: f64,
    #[serde(rename = "L0")]
    l0: RawMatrix,
    c: f64,
    lambda_bar: f64,
    lyapunov_margin: f64,
    grounded_eigs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InternalModelSection {
    q: usize,
    /// Non-leading coefficients of the minimal polynomial.
    alpha: Vec<f64>,
    beta: RawMatrix,
    gamma: RawMatrix,
    #[serde(rename = "G1")]
    g1: RawMatrix,
    #[serde(rename = "G2")]
    g2: RawMatrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainsSection {
    #[serde(rename = "K1")]
    k1: RawMatrix,
    #[serde(rename = "K2")]
    k2: RawMatrix,
    #[serde(rename = "K3", default, skip_serializing_if = "Option::is_none")]
    k3: Option<RawMatrix>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BankDocument {
    mode: ModeName,
    observer: ObserverSection,
    internal_model: InternalModelSection,
    agents: Vec<GainsSection>,
}

fn raw(m: &Mat) -> RawMatrix {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn to_toml(bank: &ControllerBank) -> Result<String, BankError> {
    let o = &bank.observer;
    let im = &bank.internal_model;
    let doc = BankDocument {
        mode: bank.mode.into(),
        observer: ObserverSection {
            p: raw(&o.p),
            mu_star: o.mu_star,
            mu: o.mu,
            l0: raw(&o.l0),
            c: o.c,
            lambda_bar: o.lambda_bar,
            lyapunov_margin: o.lyapunov_margin,
            grounded_eigs: o.grounded_eigs.clone(),
        },
        internal_model: InternalModelSection {
            q: im.q,
            alpha: im.alpha.tail().to_vec(),
            beta: raw(&im.beta),
            gamma: raw(&im.gamma),
            g1: raw(&im.g1),
            g2: raw(&im.g2),
        },
        agents: bank
            .agents
            .iter()
            .map(|g| GainsSection {
                k1: raw(&g.k1),
                k2: raw(&g.k2),
                k3: g.k3.as_ref().map(raw),
            })
            .collect(),
    };
    toml::to_string(&doc).map_err(|e| BankError::Serialize(e.to_string()))
}

pub fn from_toml(text: &str) -> Result<ControllerBank, BankError> {
    let doc: BankDocument = toml::from_str(text).map_err(|e| BankError::Syntax(e.to_string().trim_end().to_string()))?;
    let o = doc.observer;
    let observer = ObserverDesign {
        p: matrix("observer.P", &o.p)?,
        mu_star: o.mu_star,
        mu: o.mu,
        l0: matrix("observer.L0", &o.l0)?,
        c: o.c,
        lambda_bar: o.lambda_bar,
        grounded_eigs: o.grounded_eigs,
        lyapunov_margin: o.lyapunov_margin,
    };
    let im = doc.internal_model;
    if im.alpha.is_empty() {
        return Err(ScenarioError::Field {
            field: "internal_model.alpha".into(),
            message: "polynomial must have degree at least 1".into(),
        }
        .into());
    }
    let internal_model = InternalModel {
        alpha: PolyCoeffs::from_tail(&im.alpha),
        beta: matrix("internal_model.beta", &im.beta)?,
        gamma: matrix("internal_model.gamma", &im.gamma)?,
        g1: matrix("internal_model.G1", &im.g1)?,
        g2: matrix("internal_model.G2", &im.g2)?,
        q: im.q,
    };
    let mode = doc.mode.into();
    let agents = doc
        .agents
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let field = format!("agents[{}]", i + 1);
            let k3 = match (&g.k3, doc.mode) {
                (Some(k), ModeName::Output) => Some(matrix(&format!("{field}.K3"), k)?),
                (None, ModeName::State) => None,
                (Some(_), ModeName::State) => {
                    return Err(ScenarioError::Field {
                        field: format!("{field}.K3"),
                        message: "state-mode bank must not carry an estimator gain".into(),
                    })
                }
                (None, ModeName::Output) => {
                    return Err(ScenarioError::Field {
                        field: format!("{field}.K3"),
                        message: "output-mode bank requires an estimator gain".into(),
                    })
                }
            };
            Ok(AgentGains {
                k1: matrix(&format!("{field}.K1"), &g.k1)?,
                k2: matrix(&format!("{field}.K2"), &g.k2)?,
                k3,
            })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    Ok(ControllerBank {
        mode,
        observer,
        internal_model,
        agents,
    })
}

pub fn load(path: &Path) -> Result<ControllerBank, BankError> {
    let text = std::fs::read_to_string(path).map_err(|source| BankError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_toml(&text).map_err(|e| match e {
        BankError::Syntax(msg) => BankError::Syntax(format!("{}: {msg}", path.display())),
        other => other,
    })
}
