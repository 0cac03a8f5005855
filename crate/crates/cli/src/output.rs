//! Trajectory tables, CSV and plot-data emission, and the metrics derived
//! from exactly the rows that are emitted.

use std::io::Write;
use std::path::{Path, PathBuf};

use consensus_core::sim::{decay_estimate, SimError, Trajectory};

/// Default cap on emitted rows.
pub const MAX_ROWS: usize = 20_000;

/// Column-oriented sample table: `t`, `v_k`, then per agent `y{i}_{k}` and
/// `e{i}_{k}`, and a trailing `eta_err = Σᵢ ‖ηᵢ − v‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

/// Sample indices kept when at most `limit` rows may be emitted. The first
/// and last samples are always kept.
pub fn decimate(n: usize, limit: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    if n <= limit || limit < 2 {
        return (0..n).collect();
    }
    let stride = (n - 1).div_ceil(limit - 1);
    let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
    if *idx.last().unwrap() != n - 1 {
        idx.push(n - 1);
    }
    idx
}

impl Table {
    pub fn from_trajectory(traj: &Trajectory, limit: usize) -> Self {
        let keep = decimate(traj.len(), limit);
        let pick = |series: &[f64]| keep.iter().map(|&k| series[k]).collect::<Vec<f64>>();
        let mut header = vec!["t".to_string()];
        let mut columns = vec![pick(traj.times())];

        let lv = traj.layout().leader();
        for (k, row) in lv.clone().enumerate() {
            header.push(format!("v_{}", k + 1));
            columns.push(keep.iter().map(|&n| traj.states()[(row, n)]).collect());
        }
        for i in 0..traj.n_agents() {
            let y = traj.output(i);
            let e = traj.tracking_error(i);
            for (name, m) in [("y", &y), ("e", &e)] {
                for k in 0..m.nrows() {
                    header.push(format!("{name}{}_{}", i + 1, k + 1));
                    columns.push(keep.iter().map(|&n| m[(k, n)]).collect());
                }
            }
        }
        header.push("eta_err".to_string());
        columns.push(pick(&traj.observer_error()));
        Self { header, columns }
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.header
            .iter()
            .position(|h| h == name)
            .map(|k| self.columns[k].as_slice())
    }

    pub fn times(&self) -> &[f64] {
        &self.columns[0]
    }

    /// Names of the tracking-error columns, grouped by agent.
    pub fn error_columns(&self) -> Vec<Vec<usize>> {
        let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
        for (k, h) in self.header.iter().enumerate() {
            let Some(rest) = h.strip_prefix('e') else { continue };
            let Some((agent, _)) = rest.split_once('_') else { continue };
            if agent.is_empty() || !agent.bytes().all(|b| b.is_ascii_digit()) {
                continue;
            }
            match groups.iter_mut().find(|(a, _)| a == agent) {
                Some((_, cols)) => cols.push(k),
                None => groups.push((agent.to_string(), vec![k])),
            }
        }
        groups.into_iter().map(|(_, c)| c).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.header)?;
        for r in 0..self.n_rows() {
            w.write_record(self.columns.iter().map(|c| fmt_float(c[r])))?;
        }
        w.flush()?;
        Ok(())
    }

    /// One `t,value` file per series, named after the column.
    pub fn write_plot_dir(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, col) in self.header.iter().zip(&self.columns).skip(1) {
            let path = dir.join(format!("{name}.csv"));
            let mut text = String::from("t,value\n");
            for (t, v) in self.times().iter().zip(col) {
                text.push_str(&fmt_float(*t));
                text.push(',');
                text.push_str(&fmt_float(*v));
                text.push('\n');
            }
            std::fs::write(&path, text)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:?}")
}

/// Reads a table written by [`Table::write_csv`].
pub fn read_csv<R: std::io::Read>(input: R) -> Result<Table, csv::Error> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut columns = vec![Vec::new(); header.len()];
    for rec in r.records() {
        let rec = rec?;
        for (col, field) in columns.iter_mut().zip(rec.iter()) {
            col.push(field.parse::<f64>().unwrap_or(f64::NAN));
        }
    }
    Ok(Table { header, columns })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub tail_start: f64,
    /// Largest `|e|` per agent over rows with `t ≥ tail_start`.
    pub tail_max_by_agent: Vec<f64>,
    pub tail_max: f64,
    /// Largest `|e|` over all agents in the final row.
    pub final_max: f64,
    /// Observer decay estimate and its window, when the horizon allows one.
    pub observer_decay: Option<(f64, (f64, f64))>,
}

/// Observer decay is fitted on `[5, 40]`, clipped to the horizon.
pub const DECAY_WINDOW: (f64, f64) = (5.0, 40.0);

pub fn metrics(table: &Table, tail_start: f64) -> Result<Metrics, SimError> {
    let t = table.times();
    let first = t.partition_point(|&x| x < tail_start);
    let last = table.n_rows().saturating_sub(1);
    let tail_max_by_agent: Vec<f64> = table
        .error_columns()
        .iter()
        .map(|cols| {
            cols.iter()
                .flat_map(|&c| table.columns[c][first..].iter())
                .fold(0.0, |m: f64, v| m.max(v.abs()))
        })
        .collect();
    let tail_max = tail_max_by_agent.iter().copied().fold(0.0, f64::max);
    let final_max = table
        .error_columns()
        .iter()
        .flatten()
        .map(|&c| table.columns[c][last].abs())
        .fold(0.0, f64::max);
    let t_end = t.last().copied().unwrap_or(0.0);
    let window = (DECAY_WINDOW.0, DECAY_WINDOW.1.min(t_end));
    let observer_decay = match table.column("eta_err") {
        Some(err) if window.1 > window.0 => Some((decay_estimate(t, err, window)?, window)),
        _ => None,
    };
    Ok(Metrics {
        tail_start,
        tail_max_by_agent,
        tail_max,
        final_max,
        observer_decay,
    })
}
