//! Leader, follower plants, scenarios, and the well-posedness checks a
//! scenario must pass before synthesis.

use std::fmt;

use thiserror::Error;

use crate::config::Tolerances;
use crate::graph::{validate_connected, SwitchingSignal};
use crate::matkit::{self, complex_embedding, matrix_rank, Complex64, LinalgError, Mat, Vector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{what}: expected {expected}, got {rows}x{cols}")]
    Shape {
        what: String,
        expected: String,
        rows: usize,
        cols: usize,
    },
    #[error("{0}: non-finite entries")]
    NotFinite(String),
}

fn expect_shape(what: &str, m: &Mat, rows: usize, cols: usize) -> Result<(), ModelError> {
    if m.shape() != (rows, cols) {
        return Err(ModelError::Shape {
            what: what.to_string(),
            expected: format!("{rows}x{cols}"),
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::NotFinite(what.to_string()));
    }
    Ok(())
}

/// Exosystem `v̇ = S v`, `y₀ = −F v`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderModel {
    s: Mat,
    f: Mat,
}

impl LeaderModel {
    pub fn new(s: Mat, f: Mat) -> Result<Self, ModelError> {
        let m = s.nrows();
        expect_shape("leader S", &s, m, m)?;
        expect_shape("leader F", &f, f.nrows(), m)?;
        if f.nrows() == 0 || m == 0 {
            return Err(ModelError::Shape {
                what: "leader".into(),
                expected: "non-empty S and F".into(),
                rows: f.nrows(),
                cols: m,
            });
        }
        Ok(Self { s, f })
    }

    pub fn s(&self) -> &Mat {
        &self.s
    }

    pub fn f(&self) -> &Mat {
        &self.f
    }

    /// Exosystem order.
    pub fn m(&self) -> usize {
        self.s.nrows()
    }

    /// Output dimension.
    pub fn q(&self) -> usize {
        self.f.nrows()
    }
}

/// `ẋ = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
}

impl StateSpace {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self, ModelError> {
        let n = a.nrows();
        expect_shape("A", &a, n, n)?;
        let p = b.ncols();
        expect_shape("B", &b, n, p)?;
        let q = c.nrows();
        expect_shape("C", &c, q, n)?;
        expect_shape("D", &d, q, p)?;
        Ok(Self { a, b, c, d })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn p(&self) -> usize {
        self.b.ncols()
    }

    pub fn q(&self) -> usize {
        self.c.nrows()
    }
}

/// Follower `i` with the nominal model the controller is designed from and
/// the actual (perturbed) model the simulator runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPlant {
    index: usize,
    nominal: StateSpace,
    actual: StateSpace,
}

impl AgentPlant {
    /// `index` is the follower's node number (1-based).
    pub fn new(index: usize, nominal: StateSpace, actual: StateSpace) -> Result<Self, ModelError> {
        let (n, p, q) = (nominal.n(), nominal.p(), nominal.q());
        let what = |m: &str| format!("agent {index} actual {m}");
        expect_shape(&what("A"), &actual.a, n, n)?;
        expect_shape(&what("B"), &actual.b, n, p)?;
        expect_shape(&what("C"), &actual.c, q, n)?;
        expect_shape(&what("D"), &actual.d, q, p)?;
        Ok(Self {
            index,
            nominal,
            actual,
        })
    }

    /// A plant with no uncertainty.
    pub fn exact(index: usize, nominal: StateSpace) -> Self {
        Self {
            index,
            actual: nominal.clone(),
            nominal,
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn nominal(&self) -> &StateSpace {
        &self.nominal
    }

    pub fn actual(&self) -> &StateSpace {
        &self.actual
    }

    pub fn n(&self) -> usize {
        self.nominal.n()
    }

    pub fn p(&self) -> usize {
        self.nominal.p()
    }

    pub fn q(&self) -> usize {
        self.nominal.q()
    }

    pub fn delta_a(&self) -> Mat {
        &self.actual.a - &self.nominal.a
    }

    pub fn delta_b(&self) -> Mat {
        &self.actual.b - &self.nominal.b
    }

    pub fn delta_c(&self) -> Mat {
        &self.actual.c - &self.nominal.c
    }

    pub fn delta_d(&self) -> Mat {
        &self.actual.d - &self.nominal.d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControlMode {
    /// Dynamic state feedback `u = K₁x + K₂ξ`.
    #[default]
    State,
    /// Output feedback through a Luenberger estimate `u = K₁ζ + K₂ξ`.
    Output,
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControlMode::State => "state",
            ControlMode::Output => "output",
        })
    }
}

/// LQR weights `Q = state·I`, `R = input·I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrWeights {
    pub state: f64,
    pub input: f64,
}

impl Default for LqrWeights {
    fn default() -> Self {
        Self {
            state: 1.0,
            input: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    pub mode: ControlMode,
    /// Weights for the augmented plant–internal-model regulator.
    pub regulator: LqrWeights,
    /// Weights for the dual problem that yields the Luenberger gain.
    pub estimator: LqrWeights,
    /// Observer coupling gain is `μ = μ*·(1 + mu_margin)`.
    pub mu_margin: f64,
    pub tolerances: Tolerances,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            mode: ControlMode::State,
            regulator: LqrWeights::default(),
            estimator: LqrWeights::default(),
            mu_margin: 0.1,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub t_end: f64,
    pub dt: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            t_end: 60.0,
            dt: 1e-3,
        }
    }
}

/// Initial states. Controller states default to zero when absent.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialConditions {
    pub v0: Vector,
    pub x0: Vec<Vector>,
    pub eta0: Option<Vec<Vector>>,
    pub xi0: Option<Vec<Vector>>,
    pub zeta0: Option<Vec<Vector>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub leader: LeaderModel,
    pub agents: Vec<AgentPlant>,
    pub signal: SwitchingSignal,
    pub init: InitialConditions,
    pub sim: SimParams,
    pub synthesis: SynthesisOptions,
}

/// Kalman observability test: rank `[C; CA; …; CAⁿ⁻¹] = n`.
pub fn check_observable(c: &Mat, a: &Mat, tol: f64) -> bool {
    let n = a.nrows();
    if !a.is_square() || c.ncols() != n {
        return false;
    }
    if n == 0 {
        return true;
    }
    let mut blocks = Mat::zeros(c.nrows() * n, n);
    let mut row = c.clone();
    for k in 0..n {
        blocks.view_mut((k * c.nrows(), 0), (c.nrows(), n)).copy_from(&row);
        row = &row * a;
    }
    matrix_rank(&blocks, tol).is_ok_and(|r| r == n)
}

/// Kalman controllability test: rank `[B, AB, …, Aⁿ⁻¹B] = n`.
pub fn check_controllable(a: &Mat, b: &Mat, tol: f64) -> bool {
    check_observable(&b.transpose(), &a.transpose(), tol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionZeroReport {
    pub agent: usize,
    /// Distinct eigenvalues of `S` that were tested.
    pub checked: Vec<Complex64>,
    /// Those at which the Rosenbrock matrix loses rank.
    pub failing: Vec<Complex64>,
}

impl TransmissionZeroReport {
    pub fn passed(&self) -> bool {
        self.failing.is_empty()
    }
}

/// Complex rank of `[[A − λI, B], [C, D]]`.
pub fn rosenbrock_rank(ss: &StateSpace, lambda: Complex64, tol: f64) -> Result<usize, LinalgError> {
    let (n, p, q) = (ss.n(), ss.p(), ss.q());
    let mut re = Mat::zeros(n + q, n + p);
    re.view_mut((0, 0), (n, n)).copy_from(&(&ss.a - Mat::identity(n, n) * lambda.re));
    re.view_mut((0, n), (n, p)).copy_from(&ss.b);
    re.view_mut((n, 0), (q, n)).copy_from(&ss.c);
    re.view_mut((n, n), (q, p)).copy_from(&ss.d);
    let mut im = Mat::zeros(n + q, n + p);
    im.view_mut((0, 0), (n, n)).copy_from(&(Mat::identity(n, n) * -lambda.im));
    Ok(matrix_rank(&complex_embedding(&re, &im), tol)? / 2)
}

/// Full-row-rank test of the nominal Rosenbrock matrix at every distinct
/// eigenvalue of `S`.
pub fn check_transmission_zeros(
    plant: &AgentPlant,
    leader: &LeaderModel,
    tol: &Tolerances,
) -> Result<TransmissionZeroReport, LinalgError> {
    let checked = matkit::distinct_eigvals(leader.s(), tol.eigen_dedup)?;
    let target = plant.n() + plant.q();
    let mut failing = Vec::new();
    for &lambda in &checked {
        if rosenbrock_rank(plant.nominal(), lambda, tol.rank)? != target {
            failing.push(lambda);
        }
    }
    Ok(TransmissionZeroReport {
        agent: plant.index(),
        checked,
        failing,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckItem {
    /// Short name of the condition checked.
    pub condition: &'static str,
    /// What it was checked on ("leader", "agent 2", "graph 1", …).
    pub subject: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub items: Vec<CheckItem>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckItem> {
        self.items.iter().filter(|i| !i.passed)
    }

    fn push(&mut self, condition: &'static str, subject: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.items.push(CheckItem {
            condition,
            subject: subject.into(),
            passed,
            detail: detail.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for item in &self.items {
            writeln!(
                f,
                "[{}] {:<22} {:<10} {}",
                if item.passed { "PASS" } else { "FAIL" },
                item.condition,
                item.subject,
                item.detail
            )?;
        }
        Ok(())
    }
}

pub const LEADER_OBSERVABILITY: &str = "leader-observability";
pub const PLANT_MINIMALITY: &str = "plant-minimality";
pub const TRANSMISSION_ZEROS: &str = "transmission-zeros";
pub const GRAPH_CONNECTIVITY: &str = "graph-connectivity";
pub const DIMENSIONS: &str = "dimensions";
pub const DWELL_TIME: &str = "dwell-time";
pub const SIM_PARAMETERS: &str = "sim-parameters";

fn fmt_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{:.6}", z.re)
    } else {
        format!("{:.6}{:+.6}i", z.re, z.im)
    }
}

fn check_vectors(
    report: &mut ValidationReport,
    name: &str,
    vs: Option<&[Vector]>,
    dims: &[usize],
) {
    let Some(vs) = vs else { return };
    let ok = vs.len() == dims.len() && vs.iter().zip(dims).all(|(v, &d)| v.len() == d);
    report.push(
        DIMENSIONS,
        name,
        ok,
        if ok {
            format!("{} vectors", vs.len())
        } else {
            format!("expected lengths {dims:?}")
        },
    );
}

/// Runs every standing assumption on a parsed scenario.
pub fn validate_scenario(s: &Scenario) -> ValidationReport {
    let tol = &s.synthesis.tolerances;
    let mut report = ValidationReport::default();
    let leader = &s.leader;
    let n_agents = s.agents.len();

    let observable = check_observable(leader.f(), leader.s(), tol.rank);
    report.push(
        LEADER_OBSERVABILITY,
        "leader",
        observable,
        if observable { "(F, S) observable" } else { "(F, S) not observable" },
    );

    report.push(
        DIMENSIONS,
        "agents",
        n_agents > 0,
        format!("{n_agents} followers"),
    );

    for agent in &s.agents {
        let subject = format!("agent {}", agent.index());
        let nom = agent.nominal();
        if agent.q() != leader.q() {
            report.push(
                DIMENSIONS,
                subject,
                false,
                format!("output dimension {} differs from leader's {}", agent.q(), leader.q()),
            );
            continue;
        }
        let ctrb = check_controllable(&nom.a, &nom.b, tol.rank);
        let obsv = check_observable(&nom.c, &nom.a, tol.rank);
        report.push(
            PLANT_MINIMALITY,
            subject.clone(),
            ctrb && obsv,
            match (ctrb, obsv) {
                (true, true) => "nominal (C, A, B) controllable and observable".to_string(),
                (false, true) => "nominal (A, B) not controllable".to_string(),
                (true, false) => "nominal (C, A) not observable".to_string(),
                (false, false) => "nominal (A, B) not controllable, (C, A) not observable".to_string(),
            },
        );
        match check_transmission_zeros(agent, leader, tol) {
            Ok(tz) => report.push(
                TRANSMISSION_ZEROS,
                subject,
                tz.passed(),
                if tz.passed() {
                    format!("full rank at {} eigenvalue(s) of S", tz.checked.len())
                } else {
                    format!(
                        "rank deficient at λ = {}",
                        tz.failing.iter().map(|z| fmt_complex(*z)).collect::<Vec<_>>().join(", ")
                    )
                },
            ),
            Err(e) => report.push(TRANSMISSION_ZEROS, subject, false, e.to_string()),
        }
    }

    for (p, g) in s.signal.topologies().iter().enumerate() {
        let subject = format!("graph {}", p + 1);
        if g.n_followers() != n_agents {
            report.push(
                DIMENSIONS,
                subject,
                false,
                format!("{} followers, scenario has {n_agents}", g.n_followers()),
            );
            continue;
        }
        let r = validate_connected(g);
        let detail = if r.passed() {
            format!("connected, min eig(H) = {:.6}", r.min_eig.unwrap_or(f64::NAN))
        } else if !r.asymmetric.is_empty() {
            format!("follower subgraph directed at pairs {:?}", r.asymmetric)
        } else if !r.unreachable.is_empty() {
            format!("leader unreachable from followers {:?}", r.unreachable)
        } else {
            "grounded matrix not positive definite".to_string()
        };
        report.push(GRAPH_CONNECTIVITY, subject, r.passed(), detail);
    }

    let dwell = s.signal.dwell();
    let dwell_ok = s
        .signal
        .schedule()
        .windows(2)
        .all(|w| w[1].time - w[0].time >= dwell * (1.0 - 1e-12));
    report.push(DWELL_TIME, "schedule", dwell_ok && dwell > 0.0, format!("τ₀ = {dwell}"));

    let sim_ok = s.sim.dt > 0.0 && s.sim.t_end > 0.0 && s.sim.dt.is_finite() && s.sim.t_end.is_finite();
    report.push(
        SIM_PARAMETERS,
        "sim",
        sim_ok,
        format!("t_end = {}, dt = {}", s.sim.t_end, s.sim.dt),
    );

    let init = &s.init;
    report.push(
        DIMENSIONS,
        "v0",
        init.v0.len() == leader.m(),
        format!("length {} (leader order {})", init.v0.len(), leader.m()),
    );
    let ns: Vec<usize> = s.agents.iter().map(AgentPlant::n).collect();
    check_vectors(&mut report, "x0", Some(&init.x0), &ns);
    check_vectors(&mut report, "eta0", init.eta0.as_deref(), &vec![leader.m(); n_agents]);
    check_vectors(&mut report, "zeta0", init.zeta0.as_deref(), &ns);
    if let Some(xi0) = init.xi0.as_deref() {
        // The internal-model order is q·deg(α); only the count is known before synthesis.
        let ok = xi0.len() == n_agents;
        report.push(DIMENSIONS, "xi0", ok, format!("{} vectors", xi0.len()));
    }
    report
}
