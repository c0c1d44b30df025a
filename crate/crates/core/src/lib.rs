//! Deterministic, seedable simulator of the light-tunnel and wind-tunnel
//! causal chambers.
//!
//! A run is driven by a [`protocol::Protocol`] (SET / WAIT / MSR
//! instructions) executed by an [`engine::Engine`] in virtual time. The
//! engine evaluates the mechanistic models in [`models`], passes the true
//! values through the sensor layer in [`sensors`], and emits one
//! [`engine::Row`] per measurement. Rows are written to and read back from
//! CSV datasets with [`dataset`].
//!
//! [`graph`] holds the ground-truth causal graph of each configuration, and
//! [`validation`] checks its edges with randomized experiments scored by
//! the two-sample tests in [`stats`].
//!
//! Every random draw comes from a substream keyed by the run seed (see
//! [`rng`]), so equal seeds give bit-identical output.
//!
//! ```
//! use chamber_twin::engine::{Engine, Fidelity};
//! use chamber_twin::params::Params;
//! use chamber_twin::variables::Config;
//!
//! let mut engine = Engine::new(Config::WtStandard, Params::default(), Fidelity::SteadyState, 0).unwrap();
//! engine.set("load_in", 0.5).unwrap();
//! let rows = engine.measure_many(3, 1.0).unwrap();
//! assert_eq!(rows.len(), 3);
//! ```

// `!(x >= 0.0)` is how NaN is rejected alongside the range check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod dataset;
pub mod engine;
pub mod graph;
pub mod models;
pub mod ode;
pub mod params;
pub mod protocol;
pub mod rng;
pub mod sensors;
pub mod stats;
pub mod validation;
pub mod variables;
