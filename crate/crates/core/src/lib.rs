//! Weak synchronization of heterogeneous linear multi-agent systems over
//! directed graphs without connectivity assumptions.
//!
//! The pipeline is:
//!
//! 1. [`graph`]: Laplacian, bicomponents, canonical block-triangular order.
//! 2. [`kernel`]: convex-combination coefficients and kernel basis of `L`.
//! 3. [`agent`]: closed-loop agents and the assembled network matrix.
//! 4. [`sim`]: fixed-step simulation and the superposition split.
//! 5. [`analysis`]: stability, output-synchronization and limit verdicts.
//!
//! [`generate`], [`io`], [`plot`] and [`experiment`] provide the structured
//! graph generator, file formats, SVG output and the config-driven runner.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod analysis;
pub mod error;
pub mod experiment;
pub mod generate;
pub mod graph;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod matrix;
pub mod models;
pub mod plot;
pub mod sim;

pub use error::{Error, Result};
