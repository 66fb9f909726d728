//! Model of a bi-modal parcel delivery network: trucks on a road digraph,
//! drones on a star of aerial links out of a single hub.
//!
//! The crate is organised as a pipeline. [`model`] holds the network itself
//! and derives per-mode quantities from a path-flow vector. [`paths`]
//! enumerates bounded-length simple truck routes out of the hub.
//! [`latency`] fits and evaluates the affine congestion model for a road
//! edge. [`objective`] assembles the routing problem — a convex quadratic
//! program over path flows — and [`solver`] solves it with a primal-dual
//! interior-point method. [`scenario`] reads and writes the on-disk formats
//! (scenario JSON, latency sample CSV, result CSV, TNTP import).
//!
//! A typical run:
//!
//! ```
//! use bimodal_core::{objective, scenario, solver, paths, model::Mode};
//!
//! let net = scenario::example_network();
//! let ps = paths::enumerate_paths(&net, 8, None).unwrap();
//! let qp = objective::assemble_qp(&net, &ps, 0.5, Mode::Bimodal).unwrap();
//! let sol = solver::solve_qp(&qp, &solver::SolverOptions::default()).unwrap();
//! let report = objective::evaluate(&net, &ps, &sol.f).unwrap();
//! assert!(report.parcel_latency_hours > 0.0);
//! ```

pub mod error;
pub mod latency;
pub mod model;
pub mod objective;
pub mod paths;
pub mod scenario;
pub mod solver;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
