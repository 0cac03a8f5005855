use std::ops::Range;

use crate::model::ControlMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// Leader state `v`.
    Leader,
    /// Plant state `xᵢ`.
    Plant,
    /// Distributed observer `ηᵢ`.
    Observer,
    /// Internal model `ξᵢ`.
    InternalModel,
    /// Luenberger estimate `ζᵢ`.
    Estimator,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub kind: BlockKind,
    /// Follower position in the scenario (0-based); `None` for the leader.
    pub agent: Option<usize>,
    pub offset: usize,
    pub len: usize,
}

impl Segment {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }

    pub fn name(&self) -> String {
        let base = match self.kind {
            BlockKind::Leader => "v",
            BlockKind::Plant => "x",
            BlockKind::Observer => "eta",
            BlockKind::InternalModel => "xi",
            BlockKind::Estimator => "zeta",
        };
        match self.agent {
            Some(i) => format!("{base}{}", i + 1),
            None => base.to_string(),
        }
    }
}

/// Offsets of every block in the stacked closed-loop state:
/// `v`, then per agent `xᵢ, ηᵢ, ξᵢ` and, for output feedback, `ζᵢ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    segments: Vec<Segment>,
    n_agents: usize,
    dim: usize,
}

impl BlockLayout {
    pub fn new(m: usize, plant_dims: &[usize], n_z: usize, mode: ControlMode) -> Self {
        let mut segments = Vec::new();
        let mut offset = 0;
        let mut push = |kind, agent, len| {
            segments.push(Segment { kind, agent, offset, len });
            offset += len;
        };
        push(BlockKind::Leader, None, m);
        for (i, &n) in plant_dims.iter().enumerate() {
            push(BlockKind::Plant, Some(i), n);
            push(BlockKind::Observer, Some(i), m);
            push(BlockKind::InternalModel, Some(i), n_z);
            if mode == ControlMode::Output {
                push(BlockKind::Estimator, Some(i), n);
            }
        }
        Self {
            segments,
            n_agents: plant_dims.len(),
            dim: offset,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    fn find(&self, kind: BlockKind, agent: Option<usize>) -> Option<Range<usize>> {
        self.segments
            .iter()
            .find(|s| s.kind == kind && s.agent == agent)
            .map(Segment::range)
    }

    pub fn leader(&self) -> Range<usize> {
        self.find(BlockKind::Leader, None).expect("layout always has a leader block")
    }

    pub fn plant(&self, agent: usize) -> Range<usize> {
        self.find(BlockKind::Plant, Some(agent)).expect("agent out of range")
    }

    pub fn observer(&self, agent: usize) -> Range<usize> {
        self.find(BlockKind::Observer, Some(agent)).expect("agent out of range")
    }

    pub fn internal_model(&self, agent: usize) -> Range<usize> {
        self.find(BlockKind::InternalModel, Some(agent)).expect("agent out of range")
    }

    pub fn estimator(&self, agent: usize) -> Option<Range<usize>> {
        self.find(BlockKind::Estimator, Some(agent))
    }

    /// True for every index that belongs to an observer block.
    pub fn observer_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.dim];
        for s in self.segments.iter().filter(|s| s.kind == BlockKind::Observer) {
            mask[s.range()].iter_mut().for_each(|b| *b = true);
        }
        mask
    }
}
