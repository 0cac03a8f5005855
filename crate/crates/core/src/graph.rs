//! Communication topologies over the leader (node 0) and followers `1..=N`,
//! their Laplacians, connectivity validation, and switching signals.

use std::collections::VecDeque;

use thiserror::Error;

use crate::matkit::{self, LinalgError, Mat};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("adjacency matrix must be square with at least two nodes, got {rows}x{cols}")]
    Shape { rows: usize, cols: usize },
    #[error("edge weight a[{i}][{j}] = {weight} must be finite and non-negative")]
    BadWeight { i: usize, j: usize, weight: f64 },
    #[error("self loop at node {0}")]
    SelfLoop(usize),
    #[error("leader receives information from follower {0}")]
    LeaderInbound(usize),
    #[error("leader is not reachable from followers {0:?}")]
    Unreachable(Vec<usize>),
    #[error("follower subgraph is directed: a[{0}][{1}] != a[{1}][{0}]")]
    Asymmetric(usize, usize),
    #[error("grounded matrix is not positive definite (min eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("no topologies supplied")]
    Empty,
    #[error("topology {index} has {found} followers, expected {expected}")]
    FollowerCount {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid switching schedule: {0}")]
    Schedule(String),
    #[error("time {0} is outside the signal domain")]
    Domain(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Weighted digraph over nodes `0..=N`; `a_ij > 0` iff node `i` receives from node `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    adjacency: Mat,
}

impl Topology {
    pub fn new(adjacency: Mat) -> Result<Self, GraphError> {
        let (rows, cols) = adjacency.shape();
        if rows != cols || rows < 2 {
            return Err(GraphError::Shape { rows, cols });
        }
        for i in 0..rows {
            for j in 0..cols {
                let w = adjacency[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(GraphError::BadWeight { i, j, weight: w });
                }
            }
            if adjacency[(i, i)] != 0.0 {
                return Err(GraphError::SelfLoop(i));
            }
            if i > 0 && adjacency[(0, i)] != 0.0 {
                return Err(GraphError::LeaderInbound(i));
            }
        }
        Ok(Self { adjacency })
    }

    /// Builds from directed edges `(from, to, weight)`.
    pub fn from_edges(n_followers: usize, edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        let n = n_followers + 1;
        let mut adj = Mat::zeros(n, n);
        for &(from, to, w) in edges {
            if from >= n || to >= n {
                return Err(GraphError::Shape { rows: n, cols: n });
            }
            adj[(to, from)] = w;
        }
        Self::new(adj)
    }

    pub fn n_followers(&self) -> usize {
        self.adjacency.nrows() - 1
    }

    pub fn adjacency(&self) -> &Mat {
        &self.adjacency
    }

    /// Weight of the edge from `from` into `to`.
    pub fn weight(&self, to: usize, from: usize) -> f64 {
        self.adjacency[(to, from)]
    }
}

/// Weighted Laplacian with `l_ii = Σ_{j≠i} a_ij` and `l_ij = −a_ij`.
pub fn laplacian(g: &Topology) -> Mat {
    let a = g.adjacency();
    let n = a.nrows();
    let mut l = -a.clone();
    for i in 0..n {
        l[(i, i)] = (0..n).filter(|&j| j != i).map(|j| a[(i, j)]).sum();
    }
    l
}

/// Follower block `H` of the Laplacian (rows and columns `1..=N`).
pub fn grounded_matrix(g: &Topology) -> Mat {
    let n = g.n_followers();
    laplacian(g).view((1, 1), (n, n)).clone_owned()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityReport {
    /// Followers with no directed path from the leader.
    pub unreachable: Vec<usize>,
    /// Follower pairs `(i, j)`, `i < j`, with `a_ij ≠ a_ji`.
    pub asymmetric: Vec<(usize, usize)>,
    /// Smallest eigenvalue of `H`, recorded when the structural checks pass.
    pub min_eig: Option<f64>,
}

impl ConnectivityReport {
    pub fn passed(&self) -> bool {
        self.unreachable.is_empty()
            && self.asymmetric.is_empty()
            && self.min_eig.is_some_and(|l| l > 0.0)
    }

    pub fn into_result(self) -> Result<f64, GraphError> {
        if let Some(&(i, j)) = self.asymmetric.first() {
            return Err(GraphError::Asymmetric(i, j));
        }
        if !self.unreachable.is_empty() {
            return Err(GraphError::Unreachable(self.unreachable));
        }
        match self.min_eig {
            Some(l) if l > 0.0 => Ok(l),
            Some(l) => Err(GraphError::NotPositive(l)),
            None => Err(GraphError::NotPositive(f64::NAN)),
        }
    }
}

/// Checks that every follower is reachable from the leader and that the
/// follower subgraph is undirected.
pub fn validate_connected(g: &Topology) -> ConnectivityReport {
    let a = g.adjacency();
    let n = a.nrows();

    // Information flows along j → i whenever a_ij > 0.
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(j) = queue.pop_front() {
        for i in 0..n {
            if !seen[i] && a[(i, j)] > 0.0 {
                seen[i] = true;
                queue.push_back(i);
            }
        }
    }
    let unreachable: Vec<usize> = (1..n).filter(|&i| !seen[i]).collect();

    let mut asymmetric = Vec::new();
    for i in 1..n {
        for j in (i + 1)..n {
            if a[(i, j)] != a[(j, i)] {
                asymmetric.push((i, j));
            }
        }
    }

    let min_eig = if unreachable.is_empty() && asymmetric.is_empty() {
        matkit::sym_eigvals(&grounded_matrix(g))
            .ok()
            .and_then(|v| v.first().copied())
    } else {
        None
    };
    ConnectivityReport {
        unreachable,
        asymmetric,
        min_eig,
    }
}

/// Smallest eigenvalue of `H_p` over a set of connected topologies.
pub fn min_grounded_eig(gs: &[Topology]) -> Result<f64, GraphError> {
    if gs.is_empty() {
        return Err(GraphError::Empty);
    }
    gs.iter().try_fold(f64::INFINITY, |acc, g| {
        Ok(acc.min(validate_connected(g).into_result()?))
    })
}

/// Eigenvalues of `H`, ascending.
pub fn grounded_eigenvalues(g: &Topology) -> Result<Vec<f64>, GraphError> {
    Ok(matkit::sym_eigvals(&grounded_matrix(g))?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Switch {
    pub time: f64,
    pub topology: usize,
}

/// One maximal interval `[start, end)` on which a single topology is active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub topology: usize,
}

/// Piecewise-constant topology schedule with a dwell-time bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingSignal {
    topologies: Vec<Topology>,
    schedule: Vec<Switch>,
    dwell: f64,
}

impl SwitchingSignal {
    pub fn new(topologies: Vec<Topology>, schedule: Vec<Switch>, dwell: f64) -> Result<Self, GraphError> {
        let bad = |msg: String| Err(GraphError::Schedule(msg));
        if topologies.is_empty() {
            return Err(GraphError::Empty);
        }
        let n = topologies[0].n_followers();
        for (index, t) in topologies.iter().enumerate() {
            if t.n_followers() != n {
                return Err(GraphError::FollowerCount {
                    index,
                    expected: n,
                    found: t.n_followers(),
                });
            }
        }
        if !(dwell > 0.0) {
            return bad(format!("dwell time must be positive, got {dwell}"));
        }
        match schedule.first() {
            Some(s) if s.time == 0.0 => {}
            _ => return bad("schedule must start at t = 0".into()),
        }
        for s in &schedule {
            if s.topology >= topologies.len() {
                return bad(format!("topology index {} out of range", s.topology));
            }
            if !s.time.is_finite() {
                return bad("switch times must be finite".into());
            }
        }
        for w in schedule.windows(2) {
            let gap = w[1].time - w[0].time;
            if !(gap > 0.0) {
                return bad(format!("switch times not increasing at t = {}", w[1].time));
            }
            // Relative slack so that k·τ grids built in floating point pass.
            if gap < dwell * (1.0 - 1e-12) {
                return bad(format!(
                    "switch at t = {} follows the previous one after {gap}, below the dwell time {dwell}",
                    w[1].time
                ));
            }
        }
        Ok(Self {
            topologies,
            schedule,
            dwell,
        })
    }

    /// A single topology active forever.
    pub fn fixed(topology: Topology) -> Self {
        Self {
            topologies: vec![topology],
            schedule: vec![Switch {
                time: 0.0,
                topology: 0,
            }],
            dwell: f64::INFINITY,
        }
    }

    /// Cycles through `sequence` every `period` seconds, expanded explicitly
    /// over `[0, horizon]`.
    pub fn periodic(
        topologies: Vec<Topology>,
        sequence: &[usize],
        period: f64,
        horizon: f64,
        dwell: f64,
    ) -> Result<Self, GraphError> {
        if sequence.is_empty() {
            return Err(GraphError::Schedule("empty periodic sequence".into()));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(GraphError::Schedule(format!("period must be positive, got {period}")));
        }
        let mut schedule = Vec::new();
        let mut k = 0usize;
        loop {
            let time = k as f64 * period;
            if k > 0 && time >= horizon {
                break;
            }
            schedule.push(Switch {
                time,
                topology: sequence[k % sequence.len()],
            });
            k += 1;
        }
        Self::new(topologies, schedule, dwell)
    }

    pub fn topologies(&self) -> &[Topology] {
        &self.topologies
    }

    pub fn schedule(&self) -> &[Switch] {
        &self.schedule
    }

    pub fn dwell(&self) -> f64 {
        self.dwell
    }

    pub fn n_followers(&self) -> usize {
        self.topologies[0].n_followers()
    }

    /// Index of the topology active at `t`; a switch instant belongs to the new topology.
    pub fn active_index(&self, t: f64) -> Result<usize, GraphError> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(GraphError::Domain(t));
        }
        let k = self.schedule.partition_point(|s| s.time <= t);
        Ok(self.schedule[k - 1].topology)
    }

    /// Constant-topology intervals covering `[0, t_end]`.
    pub fn intervals(&self, t_end: f64) -> Vec<Interval> {
        let mut out = Vec::new();
        for (k, s) in self.schedule.iter().enumerate() {
            if s.time >= t_end {
                break;
            }
            let end = self
                .schedule
                .get(k + 1)
                .map_or(t_end, |next| next.time.min(t_end));
            out.push(Interval {
                start: s.time,
                end,
                topology: s.topology,
            });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// 0→1, 1↔2, 0→3.
    fn g1() -> Topology {
        Topology::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 1, 1.0), (0, 3, 1.0)]).unwrap()
    }

    /// 0→1, 0→2, 2↔3.
    fn g2() -> Topology {
        Topology::from_edges(3, &[(0, 1, 1.0), (0, 2, 1.0), (2, 3, 1.0), (3, 2, 1.0)]).unwrap()
    }

    #[test]
    fn single_edge_laplacian() {
        let g = Topology::from_edges(1, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(laplacian(&g), Mat::from_row_slice(2, 2, &[0.0, 0.0, -1.0, 1.0]));
        assert_eq!(grounded_matrix(&g), Mat::from_element(1, 1, 1.0));
    }

    #[test]
    fn empty_graph_laplacian_is_zero() {
        let g = Topology::new(Mat::zeros(3, 3)).unwrap();
        assert_eq!(laplacian(&g), Mat::zeros(3, 3));
    }

    #[test]
    fn switching_pair_grounded_matrices() {
        let h1 = Mat::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let h2 = Mat::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        assert_eq!(grounded_matrix(&g1()), h1);
        assert_eq!(grounded_matrix(&g2()), h2);
        let l = laplacian(&g1());
        assert_eq!(l.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0; 4]);
        for i in 0..4 {
            assert_eq!(l.row(i).sum(), 0.0);
        }
    }

    #[test]
    fn connectivity_reports() {
        let lam = (3.0 - 5f64.sqrt()) / 2.0;
        for g in [g1(), g2()] {
            let r = validate_connected(&g);
            assert!(r.passed(), "{r:?}");
            assert_relative_eq!(r.min_eig.unwrap(), lam, epsilon = 1e-12);
        }
        let isolated = Topology::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 1, 1.0)]).unwrap();
        let r = validate_connected(&isolated);
        assert!(!r.passed());
        assert_eq!(r.unreachable, vec![3]);

        let directed = Topology::from_edges(2, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let r = validate_connected(&directed);
        assert_eq!(r.asymmetric, vec![(1, 2)]);
        assert!(matches!(r.into_result(), Err(GraphError::Asymmetric(1, 2))));
    }

    #[test]
    fn min_grounded_eigenvalue() {
        assert_relative_eq!(
            min_grounded_eig(&[g1(), g2()]).unwrap(),
            (3.0 - 5f64.sqrt()) / 2.0,
            epsilon = 1e-12
        );
        let single = Topology::from_edges(1, &[(0, 1, 1.0)]).unwrap();
        assert_relative_eq!(min_grounded_eig(&[single]).unwrap(), 1.0, epsilon = 1e-15);
        let heavy = Topology::from_edges(1, &[(0, 1, 2.0)]).unwrap();
        assert_relative_eq!(min_grounded_eig(&[heavy]).unwrap(), 2.0, epsilon = 1e-15);
        assert!(matches!(min_grounded_eig(&[]), Err(GraphError::Empty)));
    }

    #[test]
    fn invalid_adjacency_is_rejected() {
        let mut a = Mat::zeros(3, 3);
        a[(1, 1)] = 1.0;
        assert_eq!(Topology::new(a), Err(GraphError::SelfLoop(1)));
        let mut a = Mat::zeros(3, 3);
        a[(0, 2)] = 1.0;
        assert_eq!(Topology::new(a), Err(GraphError::LeaderInbound(2)));
        let mut a = Mat::zeros(2, 2);
        a[(1, 0)] = -1.0;
        assert!(matches!(Topology::new(a), Err(GraphError::BadWeight { .. })));
        assert!(matches!(Topology::new(Mat::zeros(2, 3)), Err(GraphError::Shape { .. })));
    }

    #[test]
    fn periodic_active_index() {
        let sig = SwitchingSignal::periodic(vec![g1(), g2()], &[0, 1], 5.0, 60.0, 5.0).unwrap();
        assert_eq!(sig.active_index(2.0).unwrap(), 0);
        assert_eq!(sig.active_index(5.0).unwrap(), 1);
        assert_eq!(sig.active_index(12.3).unwrap(), 0);
        assert_eq!(sig.active_index(0.0).unwrap(), 0);
        assert!(matches!(sig.active_index(-1.0), Err(GraphError::Domain(_))));
        assert_eq!(sig.schedule().len(), 12);
    }

    #[test]
    fn intervals_cover_horizon() {
        let sig = SwitchingSignal::periodic(vec![g1(), g2()], &[0, 1], 5.0, 12.0, 1.0).unwrap();
        let iv = sig.intervals(12.0);
        assert_eq!(iv.len(), 3);
        assert_eq!(iv[0], Interval { start: 0.0, end: 5.0, topology: 0 });
        assert_eq!(iv[2], Interval { start: 10.0, end: 12.0, topology: 0 });
    }

    #[test]
    fn dwell_violations_are_rejected() {
        let sched = vec![
            Switch { time: 0.0, topology: 0 },
            Switch { time: 0.5, topology: 1 },
        ];
        assert!(matches!(
            SwitchingSignal::new(vec![g1(), g2()], sched, 1.0),
            Err(GraphError::Schedule(_))
        ));
        let late_start = vec![Switch { time: 1.0, topology: 0 }];
        assert!(SwitchingSignal::new(vec![g1()], late_start, 1.0).is_err());
        let bad_index = vec![Switch { time: 0.0, topology: 4 }];
        assert!(SwitchingSignal::new(vec![g1()], bad_index, 1.0).is_err());
        assert!(SwitchingSignal::new(vec![g1()], vec![Switch { time: 0.0, topology: 0 }], 0.0).is_err());
    }
}
