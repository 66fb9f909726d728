//! Affine congestion model for a road edge.
//!
//! Edge traversal time is modelled as a plane in (truck flow, total flow)
//! space:
//!
//! ```text
//! latency(f_T, f) = omega0 + omega1 * f_T + omega2 * f      [hours]
//! ```
//!
//! where `f_T` is the truck flow on the edge and `f` is the total vehicle
//! flow (background traffic plus the trucks themselves). Trucks are counted
//! twice on purpose: once in `omega1` for their outsized per-vehicle impact
//! (size, stops) and once in `omega2` as ordinary members of the stream.
//! Planes are calibrated per lane class on a reference edge length and
//! rescaled linearly to each edge's actual length.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative singular-value cutoff below which a sample set is treated as
/// rank-deficient: the plane is not identifiable from the data.
const RANK_CUTOFF: f64 = 1e-12;

/// Affine latency plane `omega0 + omega1 * truck_flow + omega2 * total_flow`.
///
/// `omega0` is the free-flow traversal time in hours; the slopes are hours
/// per (vehicle/hour) of flow. A physical plane has `omega0 > 0` and
/// non-negative slopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyPlane {
    pub omega: [f64; 3],
}

impl LatencyPlane {
    pub fn new(omega0: f64, omega1: f64, omega2: f64) -> Self {
        Self {
            omega: [omega0, omega1, omega2],
        }
    }

    /// Free-flow traversal time in hours.
    pub fn free_flow(&self) -> f64 {
        self.omega[0]
    }

    /// `true` when the plane could have come from a real road: positive
    /// free-flow time, non-negative congestion slopes, all finite.
    pub fn is_physical(&self) -> bool {
        let [w0, w1, w2] = self.omega;
        w0.is_finite() && w1.is_finite() && w2.is_finite() && w0 > 0.0 && w1 >= 0.0 && w2 >= 0.0
    }
}

/// One calibration measurement: observed traversal time at a given mix of
/// truck and total flow. `total_flow` counts every vehicle on the edge,
/// trucks included, so `total_flow >= truck_flow` always holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub truck_flow: f64,
    pub total_flow: f64,
    pub latency_hours: f64,
}

/// Evaluates the plane at the given flows. Hours.
///
/// Errors on non-finite input, negative truck flow, or a total flow smaller
/// than the truck flow it must contain.
pub fn edge_latency(plane: &LatencyPlane, truck_flow: f64, total_flow: f64) -> Result<f64> {
    check_flows(truck_flow, total_flow)?;
    let [w0, w1, w2] = plane.omega;
    Ok(w0 + w1 * truck_flow + w2 * total_flow)
}

/// Fits a latency plane to samples by ordinary least squares.
///
/// Needs at least three samples that are not collinear in the
/// (truck flow, total flow) coordinates. The fit is solved through the SVD
/// of the design matrix `[1, truck_flow, total_flow]`, so near-collinear
/// sample sets are rejected rather than amplified into garbage
/// coefficients. A fit that comes back with a non-positive free-flow term
/// or a negative slope is rejected as non-physical.
pub fn fit_plane(samples: &[LatencySample]) -> Result<LatencyPlane> {
    if samples.len() < 3 {
        return Err(Error::DegenerateSamples(format!(
            "need at least 3 samples, got {}",
            samples.len()
        )));
    }
    for (i, s) in samples.iter().enumerate() {
        check_flows(s.truck_flow, s.total_flow)
            .map_err(|e| Error::Domain(format!("sample {i}: {e}")))?;
        if !s.latency_hours.is_finite() || s.latency_hours <= 0.0 {
            return Err(Error::Domain(format!(
                "sample {i}: latency must be positive and finite, got {}",
                s.latency_hours
            )));
        }
    }

    let n = samples.len();
    let design = DMatrix::from_fn(n, 3, |r, c| match c {
        0 => 1.0,
        1 => samples[r].truck_flow,
        _ => samples[r].total_flow,
    });
    let rhs = DVector::from_fn(n, |r, _| samples[r].latency_hours);

    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= smax * RANK_CUTOFF {
        return Err(Error::DegenerateSamples(
            "samples are collinear in (truck_flow, total_flow); the plane is not identifiable"
                .into(),
        ));
    }
    let coef = svd
        .solve(&rhs, smax * RANK_CUTOFF)
        .map_err(|e| Error::DegenerateSamples(e.to_string()))?;

    let plane = LatencyPlane::new(coef[0], coef[1], coef[2]);
    if !plane.is_physical() {
        let [w0, w1, w2] = plane.omega;
        return Err(Error::NonPhysicalPlane(w0, w1, w2));
    }
    Ok(plane)
}

/// Rescales a plane calibrated on a reference edge length to an edge of
/// `length_km`: traversal time is proportional to length, so every
/// coefficient scales by `length_km / ref_length_km`.
pub fn scale_plane(
    plane: &LatencyPlane,
    length_km: f64,
    ref_length_km: f64,
) -> Result<LatencyPlane> {
    if !(length_km.is_finite() && length_km > 0.0) {
        return Err(Error::Domain(format!(
            "edge length must be positive, got {length_km}"
        )));
    }
    if !(ref_length_km.is_finite() && ref_length_km > 0.0) {
        return Err(Error::Domain(format!(
            "reference length must be positive, got {ref_length_km}"
        )));
    }
    let k = length_km / ref_length_km;
    Ok(LatencyPlane::new(
        plane.omega[0] * k,
        plane.omega[1] * k,
        plane.omega[2] * k,
    ))
}

/// Flight time of a drone leg: straight-line distance over cruise speed.
pub fn aerial_latency(distance_km: f64, speed_kmh: f64) -> Result<f64> {
    if !(distance_km.is_finite() && distance_km >= 0.0) {
        return Err(Error::Domain(format!(
            "distance must be non-negative, got {distance_km}"
        )));
    }
    if !(speed_kmh.is_finite() && speed_kmh > 0.0) {
        return Err(Error::Domain(format!(
            "speed must be positive, got {speed_kmh}"
        )));
    }
    Ok(distance_km / speed_kmh)
}

fn check_flows(truck_flow: f64, total_flow: f64) -> Result<()> {
    if !truck_flow.is_finite() || truck_flow < 0.0 {
        return Err(Error::Domain(format!(
            "truck flow must be non-negative, got {truck_flow}"
        )));
    }
    if !total_flow.is_finite() || total_flow < truck_flow {
        return Err(Error::Domain(format!(
            "total flow ({total_flow}) must be at least the truck flow ({truck_flow})"
        )));
    }
    Ok(())
}
