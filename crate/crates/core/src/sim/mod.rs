//! Closed-loop assembly and fixed-step integration across a switching schedule.

mod layout;

pub use layout::{BlockKind, BlockLayout, Segment};

use thiserror::Error;

use crate::graph::SwitchingSignal;
use crate::matkit::{Mat, Vector};
use crate::model::{ControlMode, Scenario};
use crate::synthesis::ControllerBank;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("controller bank is in {bank} mode, {requested} mode requested")]
    ModeMismatch { bank: ControlMode, requested: ControlMode },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid simulation parameters: {0}")]
    Params(String),
    #[error("state norm {norm:.3e} exceeded the divergence guard at t = {time} (topology {topology})")]
    Divergence { time: f64, topology: usize, norm: f64 },
    #[error("topology matrices differ outside the observer coupling at ({row}, {col})")]
    Structure { row: usize, col: usize },
    #[error("{0}")]
    Domain(String),
}

/// One constant system matrix per topology over a shared [`BlockLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLTI {
    layout: BlockLayout,
    mode: ControlMode,
    matrices: Vec<Mat>,
    signal: SwitchingSignal,
    /// `yᵢ = outputs[i] · state`.
    outputs: Vec<Mat>,
    /// `y₀ = leader_output · state = −Fv`.
    leader_output: Mat,
}

impl PiecewiseLTI {
    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn mode(&self) -> ControlMode {
        self.mode
    }

    pub fn matrices(&self) -> &[Mat] {
        &self.matrices
    }

    pub fn signal(&self) -> &SwitchingSignal {
        &self.signal
    }

    pub fn output_map(&self, agent: usize) -> &Mat {
        &self.outputs[agent]
    }

    pub fn leader_output_map(&self) -> &Mat {
        &self.leader_output
    }

    /// Replaces every system matrix, keeping layout and output maps. Intended
    /// for experiments that perturb the assembled loop directly.
    pub fn with_matrices(&self, matrices: Vec<Mat>) -> Result<Self, SimError> {
        let dim = self.layout.dim();
        if matrices.len() != self.matrices.len() || matrices.iter().any(|m| m.shape() != (dim, dim)) {
            return Err(SimError::Dimension(format!(
                "expected {} matrices of size {dim}x{dim}",
                self.matrices.len()
            )));
        }
        Ok(Self {
            matrices,
            ..self.clone()
        })
    }

    /// Checks that the per-topology matrices agree on every row outside the
    /// observer blocks, bit for bit.
    pub fn check_structure(&self) -> Result<(), SimError> {
        let mask = self.layout.observer_mask();
        let first = &self.matrices[0];
        for m in &self.matrices[1..] {
            for row in (0..self.layout.dim()).filter(|&r| !mask[r]) {
                for col in 0..self.layout.dim() {
                    if m[(row, col)].to_bits() != first[(row, col)].to_bits() {
                        return Err(SimError::Structure { row, col });
                    }
                }
            }
        }
        Ok(())
    }
}

struct Assembler<'a> {
    s: &'a Scenario,
    bank: &'a ControllerBank,
    layout: BlockLayout,
}

impl<'a> Assembler<'a> {
    fn new(s: &'a Scenario, bank: &'a ControllerBank, mode: ControlMode) -> Result<Self, SimError> {
        if bank.mode != mode {
            return Err(SimError::ModeMismatch {
                bank: bank.mode,
                requested: mode,
            });
        }
        let n_agents = s.agents.len();
        if bank.agents.len() != n_agents {
            return Err(SimError::Dimension(format!(
                "bank has {} agents, scenario has {n_agents}",
                bank.agents.len()
            )));
        }
        if s.signal.n_followers() != n_agents {
            return Err(SimError::Dimension(format!(
                "graphs have {} followers, scenario has {n_agents}",
                s.signal.n_followers()
            )));
        }
        let m = s.leader.m();
        if bank.observer.l0.shape() != (m, s.leader.q()) || bank.internal_model.g2.ncols() != s.leader.q() {
            return Err(SimError::Dimension("bank does not match the leader dimensions".into()));
        }
        let n_z = bank.internal_model.n_z();
        for (plant, gains) in s.agents.iter().zip(&bank.agents) {
            let (n, p) = (plant.n(), plant.p());
            let k3_ok = match mode {
                ControlMode::State => true,
                ControlMode::Output => gains.k3.as_ref().is_some_and(|k| k.shape() == (n, plant.q())),
            };
            if gains.k1.shape() != (p, n) || gains.k2.shape() != (p, n_z) || !k3_ok {
                return Err(SimError::Dimension(format!(
                    "gains of agent {} do not match its plant",
                    plant.index()
                )));
            }
        }
        let dims: Vec<usize> = s.agents.iter().map(|a| a.n()).collect();
        let layout = BlockLayout::new(m, &dims, n_z, mode);
        Ok(Self { s, bank, layout })
    }

    /// Plant, internal-model and estimator rows, plus the uncoupled `Sηᵢ`
    /// term. Returns the matrix and the per-agent output maps.
    fn common(&self) -> (Mat, Vec<Mat>) {
        let l = &self.layout;
        let dim = l.dim();
        let sm = self.s.leader.s();
        let f = self.s.leader.f();
        let im = &self.bank.internal_model;
        let mut a = Mat::zeros(dim, dim);
        let mut outputs = Vec::new();
        let lv = l.leader();
        a.view_mut((lv.start, lv.start), (lv.len(), lv.len())).copy_from(sm);

        for (i, (plant, gains)) in self.s.agents.iter().zip(&self.bank.agents).enumerate() {
            let act = plant.actual();
            let nom = plant.nominal();
            let (x, eta, xi) = (l.plant(i), l.observer(i), l.internal_model(i));
            let q = plant.q();
            let mut set = |rows: &std::ops::Range<usize>, cols: &std::ops::Range<usize>, block: &Mat| {
                a.view_mut((rows.start, cols.start), (rows.len(), cols.len())).copy_from(block);
            };
            // u = K₁·(x or ζ) + K₂ξ; `y_map` holds y in terms of (x, ζ-or-x, ξ).
            let mut y_map = Mat::zeros(q, dim);
            match l.estimator(i) {
                None => {
                    set(&x, &x, &(&act.a + &act.b * &gains.k1));
                    set(&x, &xi, &(&act.b * &gains.k2));
                    y_map
                        .view_mut((0, x.start), (q, x.len()))
                        .copy_from(&(&act.c + &act.d * &gains.k1));
                    y_map.view_mut((0, xi.start), (q, xi.len())).copy_from(&(&act.d * &gains.k2));
                }
                Some(zeta) => {
                    let k3 = gains.k3.as_ref().expect("checked at construction");
                    set(&x, &x, &act.a);
                    set(&x, &zeta, &(&act.b * &gains.k1));
                    set(&x, &xi, &(&act.b * &gains.k2));
                    y_map.view_mut((0, x.start), (q, x.len())).copy_from(&act.c);
                    y_map.view_mut((0, zeta.start), (q, zeta.len())).copy_from(&(&act.d * &gains.k1));
                    y_map.view_mut((0, xi.start), (q, xi.len())).copy_from(&(&act.d * &gains.k2));
                    // ζ̇ = Aζ + Bu + K₃(y − Cζ − Du), nominal matrices.
                    let mut zrow = k3 * &y_map;
                    let mut add = |cols: &std::ops::Range<usize>, block: &Mat| {
                        let mut v = zrow.view_mut((0, cols.start), (block.nrows(), cols.len()));
                        v += block;
                    };
                    add(&zeta, &(&nom.a - k3 * &nom.c + (&nom.b - k3 * &nom.d) * &gains.k1));
                    add(&xi, &((&nom.b - k3 * &nom.d) * &gains.k2));
                    a.view_mut((zeta.start, 0), (zeta.len(), dim)).copy_from(&zrow);
                }
            }
            // ξ̇ = G₁ξ + G₂(y + Fη).
            let mut xrow = &im.g2 * &y_map;
            {
                let mut v = xrow.view_mut((0, xi.start), (xi.len(), xi.len()));
                v += &im.g1;
            }
            xrow.view_mut((0, eta.start), (xi.len(), eta.len())).copy_from(&(&im.g2 * f));
            a.view_mut((xi.start, 0), (xi.len(), dim)).copy_from(&xrow);
            a.view_mut((eta.start, eta.start), (eta.len(), eta.len())).copy_from(sm);
            outputs.push(y_map);
        }
        (a, outputs)
    }

    /// Adds `−L₀ Σⱼ a_ij F(ηᵢ − ηⱼ)` with `Fη₀ = Fv`.
    fn couple(&self, base: &Mat, topology: &crate::graph::Topology) -> Mat {
        let l = &self.layout;
        let lf = &self.bank.observer.l0 * self.s.leader.f();
        let mut a = base.clone();
        let n_agents = l.n_agents();
        let node = |j: usize| if j == 0 { l.leader() } else { l.observer(j - 1) };
        for i in 0..n_agents {
            let rows = l.observer(i);
            for j in 0..=n_agents {
                let w = topology.weight(i + 1, j);
                if j == i + 1 || w == 0.0 {
                    continue;
                }
                let block = &lf * w;
                let cols = node(j);
                {
                    let mut own = a.view_mut((rows.start, rows.start), (rows.len(), rows.len()));
                    own -= &block;
                }
                let mut other = a.view_mut((rows.start, cols.start), (rows.len(), cols.len()));
                other += &block;
            }
        }
        a
    }

    fn build(self) -> Result<PiecewiseLTI, SimError> {
        let (base, outputs) = self.common();
        let matrices = self
            .s
            .signal
            .topologies()
            .iter()
            .map(|g| self.couple(&base, g))
            .collect();
        let lv = self.layout.leader();
        let f = self.s.leader.f();
        let mut leader_output = Mat::zeros(f.nrows(), self.layout.dim());
        leader_output.view_mut((0, lv.start), (f.nrows(), lv.len())).copy_from(&(-f));
        let sys = PiecewiseLTI {
            layout: self.layout,
            mode: self.bank.mode,
            matrices,
            signal: self.s.signal.clone(),
            outputs,
            leader_output,
        };
        sys.check_structure()?;
        Ok(sys)
    }
}

/// Closed loop under the state-feedback law `uᵢ = K₁ᵢxᵢ + K₂ᵢξᵢ`; plant
/// blocks use the actual matrices.
pub fn assemble_state_feedback(s: &Scenario, bank: &ControllerBank) -> Result<PiecewiseLTI, SimError> {
    Assembler::new(s, bank, ControlMode::State)?.build()
}

/// Closed loop under the output-feedback law `uᵢ = K₁ᵢζᵢ + K₂ᵢξᵢ` with a
/// Luenberger estimator built from nominal matrices.
pub fn assemble_output_feedback(s: &Scenario, bank: &ControllerBank) -> Result<PiecewiseLTI, SimError> {
    Assembler::new(s, bank, ControlMode::Output)?.build()
}

/// Assembles whichever loop matches the bank's mode.
pub fn assemble(s: &Scenario, bank: &ControllerBank) -> Result<PiecewiseLTI, SimError> {
    match bank.mode {
        ControlMode::State => assemble_state_feedback(s, bank),
        ControlMode::Output => assemble_output_feedback(s, bank),
    }
}

/// Stacked initial state: `v₀`, `x₀ᵢ`, and controller states from the
/// scenario overrides or zero.
pub fn initial_state(sys: &PiecewiseLTI, s: &Scenario) -> Result<Vector, SimError> {
    let l = &sys.layout;
    let mut x = Vector::zeros(l.dim());
    let mut put = |range: std::ops::Range<usize>, v: &Vector, what: &str| {
        if v.len() != range.len() {
            return Err(SimError::Dimension(format!(
                "{what} has length {}, expected {}",
                v.len(),
                range.len()
            )));
        }
        x.rows_mut(range.start, range.len()).copy_from(v);
        Ok(())
    };
    put(l.leader(), &s.init.v0, "v0")?;
    let n = l.n_agents();
    let list = |vs: &Option<Vec<Vector>>, what: &str| -> Result<(), SimError> {
        match vs {
            Some(v) if v.len() != n => Err(SimError::Dimension(format!("{what} lists {} agents, expected {n}", v.len()))),
            _ => Ok(()),
        }
    };
    if s.init.x0.len() != n {
        return Err(SimError::Dimension(format!("x0 lists {} agents, expected {n}", s.init.x0.len())));
    }
    list(&s.init.eta0, "eta0")?;
    list(&s.init.xi0, "xi0")?;
    list(&s.init.zeta0, "zeta0")?;
    for i in 0..n {
        put(l.plant(i), &s.init.x0[i], "x0")?;
        if let Some(v) = &s.init.eta0 {
            put(l.observer(i), &v[i], "eta0")?;
        }
        if let Some(v) = &s.init.xi0 {
            put(l.internal_model(i), &v[i], "xi0")?;
        }
        if let (Some(range), Some(v)) = (l.estimator(i), &s.init.zeta0) {
            put(range, &v[i], "zeta0")?;
        }
    }
    Ok(x)
}

/// Sampled closed-loop solution. Output and error series are derived from
/// the stored states on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    layout: BlockLayout,
    outputs: Vec<Mat>,
    leader_output: Mat,
    times: Vec<f64>,
    /// One column per sample.
    states: Mat,
}

impl Trajectory {
    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn states(&self) -> &Mat {
        &self.states
    }

    pub fn state(&self, k: usize) -> Vector {
        self.states.column(k).clone_owned()
    }

    pub fn final_state(&self) -> Vector {
        self.state(self.len() - 1)
    }

    /// Index of the sample at exactly `t`, if one was recorded.
    pub fn sample_at(&self, t: f64) -> Option<usize> {
        let k = self.times.partition_point(|&s| s < t);
        (k < self.times.len() && self.times[k] == t).then_some(k)
    }

    pub fn n_agents(&self) -> usize {
        self.outputs.len()
    }

    /// `yᵢ` at every sample, one column per sample.
    pub fn output(&self, agent: usize) -> Mat {
        &self.outputs[agent] * &self.states
    }

    /// `y₀ = −Fv` at every sample.
    pub fn leader_output(&self) -> Mat {
        &self.leader_output * &self.states
    }

    /// `eᵢ = yᵢ − y₀` at every sample.
    pub fn tracking_error(&self, agent: usize) -> Mat {
        (&self.outputs[agent] - &self.leader_output) * &self.states
    }

    /// `Σᵢ ‖ηᵢ − v‖` at every sample.
    pub fn observer_error(&self) -> Vec<f64> {
        let lv = self.layout.leader();
        (0..self.len())
            .map(|k| {
                let col = self.states.column(k);
                let v = col.rows(lv.start, lv.len());
                (0..self.n_agents())
                    .map(|i| {
                        let r = self.layout.observer(i);
                        (col.rows(r.start, r.len()) - v).norm()
                    })
                    .sum()
            })
            .collect()
    }

    /// Largest `|eᵢₖ(t)|` over all agents and components for `t ≥ t_from`.
    pub fn max_tracking_error_after(&self, t_from: f64) -> f64 {
        let first = self.times.partition_point(|&t| t < t_from);
        (0..self.n_agents())
            .map(|i| {
                let e = self.tracking_error(i);
                e.columns(first, self.len() - first).amax()
            })
            .fold(0.0, f64::max)
    }
}

/// Propagates `ẋ = A x` by one classical Runge–Kutta step of size `h`.
struct Rk4 {
    k1: Vector,
    k2: Vector,
    k3: Vector,
    k4: Vector,
    tmp: Vector,
}

impl Rk4 {
    fn new(dim: usize) -> Self {
        let z = Vector::zeros(dim);
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }

    fn step(&mut self, a: &Mat, x: &mut Vector, h: f64) {
        self.k1.gemv(1.0, a, x, 0.0);
        self.tmp.copy_from(x);
        self.tmp.axpy(0.5 * h, &self.k1, 1.0);
        self.k2.gemv(1.0, a, &self.tmp, 0.0);
        self.tmp.copy_from(x);
        self.tmp.axpy(0.5 * h, &self.k2, 1.0);
        self.k3.gemv(1.0, a, &self.tmp, 0.0);
        self.tmp.copy_from(x);
        self.tmp.axpy(h, &self.k3, 1.0);
        self.k4.gemv(1.0, a, &self.tmp, 0.0);
        self.k1 += &self.k2 * 2.0;
        self.k1 += &self.k3 * 2.0;
        self.k1 += &self.k4;
        x.axpy(h / 6.0, &self.k1, 1.0);
    }
}

/// Integrates from an explicit initial state over `[0, t_end]` with step `dt`.
///
/// Steps are laid out as `start + k·dt` inside every constant-topology
/// interval, with the last step shortened to land on the interval end.
pub fn integrate_from(sys: &PiecewiseLTI, x0: &Vector, t_end: f64, dt: f64, guard: f64) -> Result<Trajectory, SimError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::Params(format!("dt must be positive, got {dt}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(SimError::Params(format!("t_end must be positive, got {t_end}")));
    }
    let dim = sys.layout.dim();
    if x0.len() != dim {
        return Err(SimError::Dimension(format!("initial state has length {}, expected {dim}", x0.len())));
    }
    let intervals = sys.signal.intervals(t_end);
    let estimate: usize = intervals
        .iter()
        .map(|iv| ((iv.end - iv.start) / dt).ceil() as usize + 1)
        .sum::<usize>()
        + 1;
    let mut times = Vec::with_capacity(estimate);
    let mut data = Vec::with_capacity(estimate * dim);
    let mut x = x0.clone();
    times.push(0.0);
    data.extend_from_slice(x.as_slice());
    let mut rk = Rk4::new(dim);
    for iv in &intervals {
        let a = &sys.matrices[iv.topology];
        let mut t = iv.start;
        let mut k = 1u64;
        while t < iv.end {
            let mut next = iv.start + k as f64 * dt;
            if next > iv.end || iv.end - next < 1e-9 * dt {
                next = iv.end;
            }
            rk.step(a, &mut x, next - t);
            t = next;
            k += 1;
            let norm = x.norm();
            if !(norm <= guard) {
                return Err(SimError::Divergence {
                    time: t,
                    topology: iv.topology + 1,
                    norm,
                });
            }
            times.push(t);
            data.extend_from_slice(x.as_slice());
        }
    }
    let states = Mat::from_vec(dim, times.len(), data);
    Ok(Trajectory {
        layout: sys.layout.clone(),
        outputs: sys.outputs.clone(),
        leader_output: sys.leader_output.clone(),
        times,
        states,
    })
}

/// Integrates the scenario's initial condition with its horizon and step.
pub fn integrate(sys: &PiecewiseLTI, s: &Scenario) -> Result<Trajectory, SimError> {
    let x0 = initial_state(sys, s)?;
    integrate_from(sys, &x0, s.sim.t_end, s.sim.dt, s.synthesis.tolerances.divergence_guard)
}

/// Negated least-squares slope of `ln(values)` over `window`.
pub fn decay_estimate(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<f64, SimError> {
    let (ta, tb) = window;
    if times.len() != values.len() {
        return Err(SimError::Dimension(format!(
            "{} times but {} values",
            times.len(),
            values.len()
        )));
    }
    let (Some(&first), Some(&last)) = (times.first(), times.last()) else {
        return Err(SimError::Domain("empty series".into()));
    };
    if !(ta < tb) || ta < first || tb > last {
        return Err(SimError::Domain(format!(
            "window [{ta}, {tb}] not inside the series span [{first}, {last}]"
        )));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(&t, _)| t >= ta && t <= tb)
        .map(|(&t, &v)| (t, v.max(1e-300).ln()))
        .collect();
    if pts.len() < 2 {
        return Err(SimError::Domain("fewer than two samples in the window".into()));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, y) in &pts {
        sxy += (t - tm) * (y - ym);
        sxx += (t - tm) * (t - tm);
    }
    Ok(-sxy / sxx)
}
