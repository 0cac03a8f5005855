//! Robust consensus tracking for heterogeneous linear multi-agent systems
//! over switching leader–follower topologies.
//!
//! Each follower runs a distributed observer of the leader's state, a
//! `q`-copy internal model of the leader dynamics, and either state or
//! output feedback. [`synthesis::synthesize`] builds the gains from nominal
//! plant data; [`sim`] integrates the uncertain closed loop across the
//! switching schedule.

// `!(x > 0.0)` is used on purpose so that NaN is rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod graph;
pub mod matkit;
pub mod model;
pub mod sim;
pub mod synthesis;
