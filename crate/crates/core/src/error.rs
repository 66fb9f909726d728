//! Error type shared across the crate.

use thiserror::Error;

/// Anything that can go wrong while building, validating or solving a
/// scenario. Variants carry enough context to point at the offending
/// element without needing the call site to reconstruct it.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument is outside its domain (negative flow, zero truck
    /// capacity, non-finite input, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A flow assignment delivers more parcels to a node than it demands.
    #[error(
        "over-delivery at node {node}: delivered {delivered} parcels/h against demand {demand}"
    )]
    OverDelivery {
        node: u32,
        demand: f64,
        delivered: f64,
    },

    /// Latency samples that cannot pin down a plane (fewer than three
    /// points, or all points collinear in the flow coordinates).
    #[error("degenerate latency samples: {0}")]
    DegenerateSamples(String),

    /// A fitted or supplied latency plane with a non-positive free-flow
    /// term or a negative congestion slope.
    #[error("non-physical latency plane (omega = [{0}, {1}, {2}])")]
    NonPhysicalPlane(f64, f64, f64),

    /// Average latency is undefined because total demand is zero.
    #[error("average latency undefined: total demand is zero")]
    UndefinedAverage,

    /// Trade-off weight outside [0, 1].
    #[error("gamma must lie in [0, 1], got {0}")]
    GammaRange(f64),

    /// A demanded node that no admissible route (truck within the edge cap,
    /// or drone) can serve.
    #[error("node {node} demands {demand} parcels/h but no truck path within the edge cap nor an aerial edge serves it")]
    UnservableNode { node: u32, demand: f64 },

    /// Path enumeration exceeded the explosion guard.
    #[error("path enumeration exceeded {limit} paths; raise the limit or lower the edge cap")]
    TooManyPaths { limit: usize },

    /// Vector length does not match the dimension the structure expects.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The brute-force oracle refuses problems above its dimension limit.
    #[error("grid oracle supports at most {limit} variables, got {got}")]
    OracleDimension { limit: usize, got: usize },

    /// The constraint system admits no feasible point.
    #[error("infeasible constraint system: {0}")]
    Infeasible(String),

    /// The interior-point iteration failed to converge.
    #[error("solver did not converge within {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// A scenario file with an unknown or unsupported schema version.
    #[error("unsupported scenario schema version {found}, expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },

    /// A structural problem in an input file.
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    /// A scenario failed validation; the violations carry the detail.
    #[error("scenario failed validation: {0} violation(s)")]
    InvalidScenario(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
