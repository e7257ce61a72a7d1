//! Desk-scale simulator and constrained-learning toolkit for dynamic RAN
//! slicing in vehicular networks.
//!
//! The crate models a road segment served by a row of MEC-enabled base
//! stations. Per slicing window it computes zone workloads from vehicle
//! density, M/M/1 offloading/processing delays, and a four-component system
//! cost, and it learns a slicing policy with a two-layer scheme: an
//! actor-critic outer layer picks integer spectrum/compute allocations
//! through a capacity-safe softmax head, and a convex inner layer splits
//! overlapped-zone workload between neighbouring base stations.
//!
//! Module map:
//! - [`topology`]: road/zone/BS geometry and zone-to-BS association
//! - [`traffic`]: density traces (CSV + synthetic diurnal generator)
//! - [`service`]: arrival aggregates, transmission rates, delays, stability
//! - [`cost`]: operation/reconfiguration/violation/revenue cost model
//! - [`inner`]: convex workload-distribution solver (barrier + projected gradient)
//! - [`env`]: the slicing MDP (state encoding, action decoding, step/reward)
//! - [`nn`]: minimal dense network with softmax-group heads, Adam, backprop
//! - [`learner`]: replay buffer, actor-critic updates, training loop, baselines
//! - [`oracle`]: independent validation oracles (event-driven M/M/1, grid search)
//! - [`config`]: experiment configuration (TOML) with literature defaults
//! - [`report`]: evaluation records, aggregates, plot-data CSV export
//! - [`harness`]: run-directory orchestration used by the CLI

pub mod config;
pub mod cost;
pub mod env;
pub mod error;
pub mod harness;
pub mod inner;
pub mod learner;
pub mod nn;
pub mod oracle;
pub mod report;
pub mod service;
pub mod topology;
pub mod traffic;

pub use error::{Error, Result};

/// Number of service slices: one delay-sensitive, one delay-tolerant.
pub const NUM_SERVICES: usize = 2;

/// Index of the delay-sensitive service in per-service arrays.
pub const SENSITIVE: usize = 0;

/// Index of the delay-tolerant service in per-service arrays.
pub const TOLERANT: usize = 1;
