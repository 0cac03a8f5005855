#![allow(dead_code)]

use consensus_core::graph::{SwitchingSignal, Topology};
use consensus_core::matkit::{Mat, Vector};
use consensus_core::model::{
    AgentPlant, ControlMode, InitialConditions, LeaderModel, LqrWeights, Scenario, SimParams, StateSpace, SynthesisOptions,
};

pub fn m(rows: usize, cols: usize, data: &[f64]) -> Mat {
    Mat::from_row_slice(rows, cols, data)
}

pub fn three_agent_plants(eps: [f64; 3]) -> Vec<StateSpace> {
    let [e1, e2, e3] = eps;
    vec![
        StateSpace::new(m(1, 1, &[1.0 + e1]), m(1, 1, &[1.0 + e1]), m(1, 1, &[1.0 + e1]), m(1, 1, &[1.0 + e1])).unwrap(),
        StateSpace::new(
            m(2, 2, &[0.0, 1.0 + e2, -1.0 + e2, 0.0]),
            m(2, 1, &[0.0, 1.0 + e2]),
            m(1, 2, &[1.0 + e2, 0.0]),
            m(1, 1, &[e2]),
        )
        .unwrap(),
        StateSpace::new(
            m(3, 3, &[e3, 1.0, 0.0, -1.0 + e3, 0.0, 1.0, 2.0, e3, 1.0]),
            m(3, 1, &[0.0, 1.0, 1.0 + e1]),
            m(1, 3, &[0.0, 1.0, 0.0]),
            m(1, 1, &[1.0]),
        )
        .unwrap(),
    ]
}

/// The three-follower example with periodic switching every 5 s.
pub fn scenario(eps: [f64; 3], mode: ControlMode) -> Scenario {
    let leader = LeaderModel::new(m(2, 2, &[0.0, 1.0, -1.0, 0.0]), m(1, 2, &[1.0, 0.0])).unwrap();
    let nominal = three_agent_plants([0.0; 3]);
    let actual = three_agent_plants(eps);
    let agents = nominal
        .into_iter()
        .zip(actual)
        .enumerate()
        .map(|(i, (n, a))| AgentPlant::new(i + 1, n, a).unwrap())
        .collect();
    let g1 = Topology::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 1, 1.0), (0, 3, 1.0)]).unwrap();
    let g2 = Topology::from_edges(3, &[(0, 1, 1.0), (0, 2, 1.0), (2, 3, 1.0), (3, 2, 1.0)]).unwrap();
    let signal = SwitchingSignal::periodic(vec![g1, g2], &[0, 1], 5.0, 60.0, 5.0).unwrap();
    Scenario {
        leader,
        agents,
        signal,
        init: InitialConditions {
            v0: Vector::from_vec(vec![1.0, 0.0]),
            x0: vec![
                Vector::from_vec(vec![0.5]),
                Vector::from_vec(vec![-1.0, 0.5]),
                Vector::from_vec(vec![0.2, -0.3, 0.4]),
            ],
            eta0: None,
            xi0: None,
            zeta0: None,
        },
        sim: SimParams::default(),
        synthesis: SynthesisOptions {
            mode,
            regulator: LqrWeights { state: 10.0, input: 1.0 },
            estimator: LqrWeights { state: 10.0, input: 1.0 },
            ..SynthesisOptions::default()
        },
    }
}


/// Same example with the periodic schedule expanded to `t_end`.
pub fn scenario_until(eps: [f64; 3], mode: ControlMode, t_end: f64) -> Scenario {
    let mut s = scenario(eps, mode);
    s.signal = SwitchingSignal::periodic(s.signal.topologies().to_vec(), &[0, 1], 5.0, t_end, 5.0).unwrap();
    s.sim.t_end = t_end;
    s
}
