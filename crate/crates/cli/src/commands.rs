//! The four subcommands as library functions. Each returns the text to print
//! on standard output.

use std::path::{Path, PathBuf};

use consensus_core::matkit::{eigvals, spectral_abscissa, Mat};
use consensus_core::model::{validate_scenario, ControlMode, Scenario};
use consensus_core::sim::{assemble, integrate, SimError, Trajectory};
use consensus_core::synthesis::{
    closed_loop_matrix, output_closed_loop_matrix, synthesize, ControllerBank, SynthesisError,
};
use rayon::prelude::*;

use crate::bank_file;
use crate::output::{fmt_float, metrics, Table, MAX_ROWS};
use crate::report::{AgentSummary, Artifacts, CertificateSummary, ConvergenceSummary, RunReport, SweepSummary};
use crate::scenario_file::{Overrides, ScenarioFile};
use crate::CliError;

fn load_scenario(path: &Path, o: &Overrides) -> Result<(ScenarioFile, Scenario), CliError> {
    let file = ScenarioFile::load(path)?;
    let scenario = file.instantiate(o)?;
    Ok((file, scenario))
}

fn require_valid(s: &Scenario) -> Result<(), CliError> {
    let report = validate_scenario(s);
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Validation(report.to_string()))
    }
}

fn closed_loop(s: &Scenario, bank: &ControllerBank, agent: usize, actual: bool) -> Result<Mat, SynthesisError> {
    let plant = &s.agents[agent];
    let gains = &bank.agents[agent];
    let im = &bank.internal_model;
    let run = if actual { plant.actual() } else { plant.nominal() };
    Ok(match bank.mode {
        ControlMode::State => closed_loop_matrix(run, im, &gains.k1, &gains.k2),
        ControlMode::Output => {
            let k3 = gains.k3.as_ref().ok_or(SynthesisError::ModeMismatch)?;
            output_closed_loop_matrix(plant.nominal(), run, im, gains, k3)
        }
    })
}

fn numerical(stage: &'static str, agent: usize) -> impl Fn(consensus_core::matkit::LinalgError) -> SynthesisError {
    move |source| SynthesisError::Numerical {
        stage,
        agent: Some(agent),
        source,
    }
}

fn agent_summaries(s: &Scenario, bank: &ControllerBank) -> Result<Vec<AgentSummary>, SynthesisError> {
    (0..s.agents.len())
        .map(|i| {
            let index = s.agents[i].index();
            let nominal = closed_loop(s, bank, i, false)?;
            let actual = closed_loop(s, bank, i, true)?;
            let mut eig: Vec<[f64; 2]> = eigvals(&nominal)
                .map_err(numerical("closed-loop spectrum", index))?
                .into_iter()
                .map(|z| [z.re, z.im])
                .collect();
            eig.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
            let estimator_abscissa = match &bank.agents[i].k3 {
                Some(k3) => {
                    let nom = s.agents[i].nominal();
                    Some(spectral_abscissa(&(&nom.a - k3 * &nom.c)).map_err(numerical("estimator spectrum", index))?)
                }
                None => None,
            };
            Ok(AgentSummary {
                agent: index,
                nominal_abscissa: spectral_abscissa(&nominal).map_err(numerical("closed-loop spectrum", index))?,
                actual_abscissa: spectral_abscissa(&actual).map_err(numerical("closed-loop spectrum", index))?,
                estimator_abscissa,
                nominal_eigenvalues: eig,
            })
        })
        .collect()
}

fn certificate(bank: &ControllerBank) -> CertificateSummary {
    let o = &bank.observer;
    CertificateSummary {
        lyapunov_margin: o.lyapunov_margin,
        lambda_bar: o.lambda_bar,
        mu_star: o.mu_star,
        mu: o.mu,
        c: o.c,
    }
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::Divergence { .. } => CliError::Divergence(e),
        other => CliError::Simulation(other),
    }
}

/// Itemized assumption checks.
pub fn cmd_validate(path: &Path, o: &Overrides) -> Result<String, CliError> {
    let (_, s) = load_scenario(path, o)?;
    let report = validate_scenario(&s);
    if report.passed() {
        Ok(format!("{report}validation passed\n"))
    } else {
        Err(CliError::Validation(report.to_string()))
    }
}

/// Synthesizes the controller bank and optionally saves it.
pub fn cmd_synth(path: &Path, o: &Overrides, bank_out: Option<&Path>) -> Result<String, CliError> {
    let (_, s) = load_scenario(path, o)?;
    require_valid(&s)?;
    let bank = synthesize(&s, s.synthesis.mode)?;
    let mut artifacts = Artifacts::default();
    if let Some(out) = bank_out {
        std::fs::write(out, bank_file::to_toml(&bank)?).map_err(|e| CliError::io(out, e))?;
        artifacts.bank = Some(out.display().to_string());
    }
    let report = RunReport {
        command: "synth".into(),
        scenario: path.display().to_string(),
        mode: bank.mode.into(),
        certificate: certificate(&bank),
        convergence: None,
        artifacts,
        agents: agent_summaries(&s, &bank)?,
    };
    Ok(report.to_toml())
}

#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    pub bank: Option<PathBuf>,
    pub csv_out: Option<PathBuf>,
    pub plot_dir: Option<PathBuf>,
    /// Start of the tail window; defaults to two thirds of the horizon.
    pub tail_start: Option<f64>,
    pub max_rows: Option<usize>,
}

fn bank_for(s: &Scenario, explicit_mode: Option<ControlMode>, bank: Option<&Path>) -> Result<ControllerBank, CliError> {
    match bank {
        Some(p) => {
            let bank = bank_file::load(p)?;
            if explicit_mode.is_some_and(|m| m != bank.mode) {
                return Err(SynthesisError::ModeMismatch.into());
            }
            Ok(bank)
        }
        None => Ok(synthesize(s, s.synthesis.mode)?),
    }
}

pub fn default_tail_start(t_end: f64) -> f64 {
    t_end * 2.0 / 3.0
}

pub fn cmd_simulate(path: &Path, o: &Overrides, opts: &SimulateOptions) -> Result<String, CliError> {
    let (_, s) = load_scenario(path, o)?;
    require_valid(&s)?;
    let bank = bank_for(&s, o.mode, opts.bank.as_deref())?;
    let sys = assemble(&s, &bank).map_err(sim_error)?;
    let traj = integrate(&sys, &s).map_err(sim_error)?;
    let table = Table::from_trajectory(&traj, opts.max_rows.unwrap_or(MAX_ROWS));
    let tail_start = opts.tail_start.unwrap_or_else(|| default_tail_start(s.sim.t_end));
    let m = metrics(&table, tail_start).map_err(CliError::Simulation)?;

    let mut artifacts = Artifacts::default();
    if let Some(csv_path) = &opts.csv_out {
        let file = std::fs::File::create(csv_path).map_err(|e| CliError::io(csv_path, e))?;
        table
            .write_csv(std::io::BufWriter::new(file))
            .map_err(|e| CliError::Io(format!("{}: {e}", csv_path.display())))?;
        artifacts.csv = Some(csv_path.display().to_string());
    }
    if let Some(dir) = &opts.plot_dir {
        let files = table.write_plot_dir(dir).map_err(|e| CliError::io(dir, e))?;
        artifacts.plot_dir = Some(dir.display().to_string());
        artifacts.plot_files = Some(files.len());
    }
    if let Some(bank) = &opts.bank {
        artifacts.bank = Some(bank.display().to_string());
    }
    let report = RunReport {
        command: "simulate".into(),
        scenario: path.display().to_string(),
        mode: bank.mode.into(),
        certificate: certificate(&bank),
        convergence: Some(ConvergenceSummary {
            t_end: s.sim.t_end,
            dt: s.sim.dt,
            csv_rows: table.n_rows(),
            tail_start,
            tail_max_error: m.tail_max,
            tail_max_error_by_agent: m.tail_max_by_agent,
            final_max_error: m.final_max,
            observer_decay: m.observer_decay.map(|d| d.0),
            observer_decay_window: m.observer_decay.map(|d| [d.1 .0, d.1 .1]),
        }),
        artifacts,
        agents: agent_summaries(&s, &bank)?,
    };
    Ok(report.to_toml())
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Values taken by every epsilon component.
    pub grid: Vec<f64>,
    /// Use only points with all components equal.
    pub diagonal: bool,
    pub csv_out: Option<PathBuf>,
    pub tail_start: Option<f64>,
}

/// Grid points in lexicographic order, first component slowest.
pub fn grid_points(values: &[f64], dims: usize, diagonal: bool) -> Vec<Vec<f64>> {
    if values.is_empty() || dims == 0 {
        return Vec::new();
    }
    if diagonal {
        return values.iter().map(|&v| vec![v; dims]).collect();
    }
    let mut points = vec![Vec::new()];
    for _ in 0..dims {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    points
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: Vec<f64>,
    /// Per-agent tail error; empty when the run diverged.
    pub tail: Vec<f64>,
    pub diverged: bool,
}

fn tail_by_agent(traj: &Trajectory, tail_start: f64) -> Vec<f64> {
    let first = traj.times().partition_point(|&t| t < tail_start);
    (0..traj.n_agents())
        .map(|i| {
            let e = traj.tracking_error(i);
            e.columns(first, traj.len() - first).amax()
        })
        .collect()
}

pub fn run_sweep(file: &ScenarioFile, o: &Overrides, opts: &SweepOptions) -> Result<(ControlMode, Vec<SweepRow>), CliError> {
    if !file.is_templated() {
        return Err(CliError::NotTemplated);
    }
    let nominal = file.instantiate(o)?;
    require_valid(&nominal)?;
    let bank = synthesize(&nominal, nominal.synthesis.mode)?;
    let tail_start = opts.tail_start.unwrap_or_else(|| default_tail_start(nominal.sim.t_end));
    let points = grid_points(&opts.grid, file.n_epsilon(), opts.diagonal);
    let rows = points
        .into_par_iter()
        .map(|eps| {
            let s = file.instantiate(&Overrides {
                epsilon: Some(eps.clone()),
                ..o.clone()
            })?;
            let sys = assemble(&s, &bank).map_err(sim_error)?;
            match integrate(&sys, &s) {
                Ok(traj) => Ok(SweepRow {
                    epsilon: eps,
                    tail: tail_by_agent(&traj, tail_start),
                    diverged: false,
                }),
                Err(SimError::Divergence { .. }) => Ok(SweepRow {
                    epsilon: eps,
                    tail: Vec::new(),
                    diverged: true,
                }),
                Err(e) => Err(CliError::Simulation(e)),
            }
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok((bank.mode, rows))
}

pub fn write_sweep_csv<W: std::io::Write>(n_eps: usize, n_agents: usize, rows: &[SweepRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header: Vec<String> = (1..=n_eps).map(|k| format!("eps_{k}")).collect();
    header.extend((1..=n_agents).map(|i| format!("tail_e{i}")));
    header.push("tail_max".into());
    header.push("status".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = r.epsilon.iter().map(|&x| fmt_float(x)).collect();
        if r.diverged {
            rec.extend(std::iter::repeat_n("NaN".to_string(), n_agents + 1));
            rec.push("diverged".into());
        } else {
            rec.extend(r.tail.iter().map(|&x| fmt_float(x)));
            rec.push(fmt_float(r.tail.iter().copied().fold(0.0, f64::max)));
            rec.push("ok".into());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_sweep(path: &Path, o: &Overrides, opts: &SweepOptions) -> Result<String, CliError> {
    let file = ScenarioFile::load(path)?;
    let (mode, rows) = run_sweep(&file, o, opts)?;
    let n_agents = file.agents.len();
    let mut buf = Vec::new();
    write_sweep_csv(file.n_epsilon(), n_agents, &rows, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
    match &opts.csv_out {
        None => Ok(String::from_utf8(buf).expect("CSV output is ASCII")),
        Some(p) => {
            std::fs::write(p, &buf).map_err(|e| CliError::io(p, e))?;
            let summary = SweepSummary {
                command: "sweep".into(),
                scenario: path.display().to_string(),
                mode: mode.into(),
                points: rows.len(),
                diverged: rows.iter().filter(|r| r.diverged).count(),
                worst_tail_max_error: rows
                    .iter()
                    .flat_map(|r| r.tail.iter().copied())
                    .fold(0.0, f64::max),
                csv: Some(p.display().to_string()),
            };
            Ok(summary.to_toml())
        }
    }
}
