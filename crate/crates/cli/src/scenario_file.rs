//! TOML scenario documents.
//!
//! Matrices are nested arrays of rows. Agents give their nominal matrices and
//! either explicit `actual` matrices or a list of `perturbation` masks, each
//! scaled by one entry of the top-level `epsilon` vector:
//! `actual = nominal + Σ ε_k · mask_k`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use consensus_core::graph::{Switch, SwitchingSignal, Topology};
use consensus_core::matkit::{Mat, Vector};
use consensus_core::model::{
    AgentPlant, ControlMode, InitialConditions, LeaderModel, LqrWeights, Scenario, SimParams, StateSpace,
    SynthesisOptions,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type RawMatrix = Vec<Vec<f64>>;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Syntax(String),
    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

fn field_err(field: impl Into<String>, message: impl ToString) -> ScenarioError {
    ScenarioError::Field {
        field: field.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    State,
    Output,
}

impl From<ModeName> for ControlMode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::State => ControlMode::State,
            ModeName::Output => ControlMode::Output,
        }
    }
}

impl From<ControlMode> for ModeName {
    fn from(m: ControlMode) -> Self {
        match m {
            ControlMode::State => ModeName::State,
            ControlMode::Output => ModeName::Output,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderSection {
    #[serde(rename = "S")]
    pub s: RawMatrix,
    #[serde(rename = "F")]
    pub f: RawMatrix,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatricesSection {
    #[serde(rename = "A")]
    pub a: RawMatrix,
    #[serde(rename = "B")]
    pub b: RawMatrix,
    #[serde(rename = "C")]
    pub c: RawMatrix,
    #[serde(rename = "D")]
    pub d: RawMatrix,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    /// 1-based index into the scenario's `epsilon` vector.
    pub epsilon: usize,
    #[serde(rename = "A")]
    pub a: Option<RawMatrix>,
    #[serde(rename = "B")]
    pub b: Option<RawMatrix>,
    #[serde(rename = "C")]
    pub c: Option<RawMatrix>,
    #[serde(rename = "D")]
    pub d: Option<RawMatrix>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub nominal: MatricesSection,
    pub actual: Option<MatricesSection>,
    #[serde(default)]
    pub perturbation: Vec<PerturbationSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub name: String,
    pub adjacency: RawMatrix,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicSection {
    pub sequence: Vec<String>,
    pub period: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub t: f64,
    pub graph: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchingSection {
    /// Minimum dwell time; defaults to the period, or the smallest schedule gap.
    pub dwell: Option<f64>,
    pub periodic: Option<PeriodicSection>,
    pub schedule: Option<Vec<ScheduleEntry>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub v0: Vec<f64>,
    pub x0: Vec<Vec<f64>>,
    pub eta0: Option<Vec<Vec<f64>>>,
    pub xi0: Option<Vec<Vec<f64>>>,
    pub zeta0: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_t_end() -> f64 {
    SimParams::default().t_end
}

fn default_dt() -> f64 {
    SimParams::default().dt
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            t_end: default_t_end(),
            dt: default_dt(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    pub state: f64,
    pub input: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSection {
    pub mode: Option<ModeName>,
    pub regulator: Option<WeightsSection>,
    pub estimator: Option<WeightsSection>,
    pub mu_margin: Option<f64>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub epsilon: Vec<f64>,
    pub leader: LeaderSection,
    pub agents: Vec<AgentSection>,
    pub graphs: Vec<GraphSection>,
    pub switching: SwitchingSection,
    pub init: InitSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub synthesis: SynthesisSection,
}

/// Values that replace the document's own when instantiating a scenario.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub epsilon: Option<Vec<f64>>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub mode: Option<ControlMode>,
    pub tolerances: Vec<(String, f64)>,
}

pub fn matrix(field: &str, raw: &RawMatrix) -> Result<Mat, ScenarioError> {
    let rows = raw.len();
    let cols = raw.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(field_err(field, "matrix must have at least one row and one column"));
    }
    for (r, row) in raw.iter().enumerate() {
        if row.len() != cols {
            return Err(field_err(
                field,
                format!("row {} has {} entries, expected {cols}", r + 1, row.len()),
            ));
        }
        if let Some(c) = row.iter().position(|x| !x.is_finite()) {
            return Err(field_err(field, format!("entry ({}, {}) is not finite", r + 1, c + 1)));
        }
    }
    Ok(Mat::from_fn(rows, cols, |i, j| raw[i][j]))
}

fn vector(field: &str, raw: &[f64]) -> Result<Vector, ScenarioError> {
    if let Some(k) = raw.iter().position(|x| !x.is_finite()) {
        return Err(field_err(field, format!("entry {} is not finite", k + 1)));
    }
    Ok(Vector::from_column_slice(raw))
}

fn vectors(field: &str, raw: &[Vec<f64>]) -> Result<Vec<Vector>, ScenarioError> {
    raw.iter()
        .enumerate()
        .map(|(i, v)| vector(&format!("{field}[{}]", i + 1), v))
        .collect()
}

fn state_space(field: &str, m: &MatricesSection) -> Result<StateSpace, ScenarioError> {
    let a = matrix(&format!("{field}.A"), &m.a)?;
    let b = matrix(&format!("{field}.B"), &m.b)?;
    let c = matrix(&format!("{field}.C"), &m.c)?;
    let d = matrix(&format!("{field}.D"), &m.d)?;
    StateSpace::new(a, b, c, d).map_err(|e| field_err(field, e))
}

fn positive(field: &str, x: f64) -> Result<f64, ScenarioError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(field_err(field, format!("must be positive and finite, got {x}")))
    }
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            ScenarioError::Syntax(msg) => ScenarioError::Syntax(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// True when at least one agent is built from epsilon-scaled masks.
    pub fn is_templated(&self) -> bool {
        !self.epsilon.is_empty() && self.agents.iter().any(|a| !a.perturbation.is_empty())
    }

    pub fn n_epsilon(&self) -> usize {
        self.epsilon.len()
    }

    fn actual_plant(
        &self,
        field: &str,
        agent: &AgentSection,
        nominal: &StateSpace,
        eps: &[f64],
    ) -> Result<StateSpace, ScenarioError> {
        if let Some(actual) = &agent.actual {
            if !agent.perturbation.is_empty() {
                return Err(field_err(field, "give either `actual` or `perturbation`, not both"));
            }
            return state_space(&format!("{field}.actual"), actual);
        }
        let mut ss = nominal.clone();
        for (k, pert) in agent.perturbation.iter().enumerate() {
            let pf = format!("{field}.perturbation[{}]", k + 1);
            if pert.epsilon == 0 || pert.epsilon > eps.len() {
                return Err(field_err(
                    format!("{pf}.epsilon"),
                    format!("index {} outside 1..={}", pert.epsilon, eps.len()),
                ));
            }
            let scale = eps[pert.epsilon - 1];
            let targets = [
                ("A", &pert.a, &mut ss.a),
                ("B", &pert.b, &mut ss.b),
                ("C", &pert.c, &mut ss.c),
                ("D", &pert.d, &mut ss.d),
            ];
            for (name, mask, target) in targets {
                let Some(mask) = mask else { continue };
                let mf = format!("{pf}.{name}");
                let mask = matrix(&mf, mask)?;
                if mask.shape() != target.shape() {
                    return Err(field_err(
                        mf,
                        format!(
                            "mask is {}x{}, nominal {name} is {}x{}",
                            mask.nrows(),
                            mask.ncols(),
                            target.nrows(),
                            target.ncols()
                        ),
                    ));
                }
                *target += mask * scale;
            }
        }
        Ok(ss)
    }

    fn signal(&self, t_end: f64) -> Result<SwitchingSignal, ScenarioError> {
        if self.graphs.is_empty() {
            return Err(field_err("graphs", "at least one graph is required"));
        }
        let mut index = HashMap::new();
        let mut topologies = Vec::new();
        for (k, g) in self.graphs.iter().enumerate() {
            let field = format!("graphs[{}]", k + 1);
            if index.insert(g.name.clone(), k).is_some() {
                return Err(field_err(format!("{field}.name"), format!("duplicate graph name `{}`", g.name)));
            }
            let adj = matrix(&format!("{field}.adjacency"), &g.adjacency)?;
            topologies.push(Topology::new(adj).map_err(|e| field_err(format!("{field}.adjacency"), e))?);
        }
        let lookup = |field: String, name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| field_err(field, format!("unknown graph `{name}`")))
        };
        let sw = &self.switching;
        match (&sw.periodic, &sw.schedule) {
            (Some(p), None) => {
                let period = positive("switching.periodic.period", p.period)?;
                let sequence = p
                    .sequence
                    .iter()
                    .enumerate()
                    .map(|(k, name)| lookup(format!("switching.periodic.sequence[{}]", k + 1), name))
                    .collect::<Result<Vec<_>, _>>()?;
                let dwell = match sw.dwell {
                    Some(d) => positive("switching.dwell", d)?,
                    None => period,
                };
                SwitchingSignal::periodic(topologies, &sequence, period, t_end, dwell)
                    .map_err(|e| field_err("switching", e))
            }
            (None, Some(entries)) => {
                let schedule = entries
                    .iter()
                    .enumerate()
                    .map(|(k, e)| {
                        Ok(Switch {
                            time: e.t,
                            topology: lookup(format!("switching.schedule[{}].graph", k + 1), &e.graph)?,
                        })
                    })
                    .collect::<Result<Vec<_>, ScenarioError>>()?;
                let dwell = match sw.dwell {
                    Some(d) => positive("switching.dwell", d)?,
                    None => schedule
                        .windows(2)
                        .map(|w| w[1].time - w[0].time)
                        .fold(f64::INFINITY, f64::min),
                };
                SwitchingSignal::new(topologies, schedule, dwell).map_err(|e| field_err("switching", e))
            }
            _ => Err(field_err("switching", "give exactly one of `periodic` or `schedule`")),
        }
    }

    fn synthesis_options(&self, o: &Overrides) -> Result<SynthesisOptions, ScenarioError> {
        let s = &self.synthesis;
        let mut opts = SynthesisOptions::default();
        if let Some(m) = s.mode {
            opts.mode = m.into();
        }
        if let Some(m) = o.mode {
            opts.mode = m;
        }
        let weights = |field: &str, w: Option<WeightsSection>| -> Result<LqrWeights, ScenarioError> {
            match w {
                None => Ok(LqrWeights::default()),
                Some(w) => Ok(LqrWeights {
                    state: positive(&format!("{field}.state"), w.state)?,
                    input: positive(&format!("{field}.input"), w.input)?,
                }),
            }
        };
        opts.regulator = weights("synthesis.regulator", s.regulator)?;
        opts.estimator = weights("synthesis.estimator", s.estimator)?;
        if let Some(m) = s.mu_margin {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(field_err("synthesis.mu_margin", format!("must be non-negative, got {m}")));
            }
            opts.mu_margin = m;
        }
        let overrides = o.tolerances.iter().map(|(k, v)| (k.as_str(), *v, "--tol"));
        let listed = s.tolerances.iter().map(|(k, v)| (k.as_str(), *v, "synthesis.tolerances"));
        for (key, value, origin) in listed.chain(overrides) {
            let field = format!("{origin}.{key}");
            positive(&field, value)?;
            opts.tolerances.set(key, value).map_err(|e| field_err(field, e))?;
        }
        Ok(opts)
    }

    /// Builds the in-memory scenario, applying `o` on top of the document.
    pub fn instantiate(&self, o: &Overrides) -> Result<Scenario, ScenarioError> {
        let eps = match &o.epsilon {
            Some(e) if e.len() != self.epsilon.len() => {
                return Err(field_err(
                    "epsilon",
                    format!("override has {} values, scenario declares {}", e.len(), self.epsilon.len()),
                ))
            }
            Some(e) => e.clone(),
            None => self.epsilon.clone(),
        };
        if let Some(k) = eps.iter().position(|x| !x.is_finite()) {
            return Err(field_err("epsilon", format!("entry {} is not finite", k + 1)));
        }
        let s = matrix("leader.S", &self.leader.s)?;
        let f = matrix("leader.F", &self.leader.f)?;
        let leader = LeaderModel::new(s, f).map_err(|e| field_err("leader", e))?;

        if self.agents.is_empty() {
            return Err(field_err("agents", "at least one agent is required"));
        }
        let agents = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let field = format!("agents[{}]", i + 1);
                let nominal = state_space(&format!("{field}.nominal"), &a.nominal)?;
                let actual = self.actual_plant(&field, a, &nominal, &eps)?;
                AgentPlant::new(i + 1, nominal, actual).map_err(|e| field_err(&field, e))
            })
            .collect::<Result<Vec<_>, _>>()?;

        let t_end = positive("sim.t_end", o.t_end.unwrap_or(self.sim.t_end))?;
        let dt = positive("sim.dt", o.dt.unwrap_or(self.sim.dt))?;
        let signal = self.signal(t_end)?;

        let init = &self.init;
        let init = InitialConditions {
            v0: vector("init.v0", &init.v0)?,
            x0: vectors("init.x0", &init.x0)?,
            eta0: init.eta0.as_deref().map(|v| vectors("init.eta0", v)).transpose()?,
            xi0: init.xi0.as_deref().map(|v| vectors("init.xi0", v)).transpose()?,
            zeta0: init.zeta0.as_deref().map(|v| vectors("init.zeta0", v)).transpose()?,
        };
        Ok(Scenario {
            leader,
            agents,
            signal,
            init,
            sim: SimParams { t_end, dt },
            synthesis: self.synthesis_options(o)?,
        })
    }
}
