//! Assembly of the routing problem as a convex quadratic program, and
//! direct evaluation of the quantities it optimises.
//!
//! With affine edge latencies the expensive part of the model collapses
//! into two per-edge numbers: substituting the background flow `f0_e` into
//! the plane gives
//!
//! ```text
//! latency_e(fT) = alpha_e + slope_e * fT,
//!     alpha_e = omega0 + omega2 * f0_e,   slope_e = omega1 + omega2,
//! ```
//!
//! so truck parcel-hours are quadratic in the path-flow vector and the
//! societal term is affine. The blended objective
//!
//! ```text
//! J(f) = gamma * L(f) + (1 - gamma) * Ls(f)
//! ```
//!
//! (parcel latency `L`, societal latency `Ls`, both in hours) is therefore
//! exactly `f' Q f + a' f + constant` with `Q` positive semidefinite, and
//! the delivery rules become the linear system `G f <= h`:
//!
//! * `f_p >= 0` for every path;
//! * at a node with a drone corridor (bimodal runs), trucks may cover at
//!   most the demand — drones fly the remainder;
//! * at a node without a corridor, or in truck-only runs, trucks must cover
//!   the demand exactly (a pair of opposing inequalities);
//! * hourly operational cost stays within the budget cap. Cost is affine in
//!   `f`, so the cap is one more row.
//!
//! Drone terms enter `J` for exactly the nodes that have a corridor,
//! whichever mode is being assembled; the mode changes only the feasible
//! set. Evaluation and assembly share the same conventions, so
//! `J(f) = gamma * L(f) + (1 - gamma) * Ls(f)` holds identically in `f`,
//! not just at optima, and relaxing truck-only to bimodal can only enlarge
//! the feasible set and lower the optimum.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::latency::edge_latency;
use crate::model::{derive_flows, operational_cost, FlowAssignment, Mode, Network, NodeId};
use crate::paths::PathSet;
use crate::{Error, Result};

/// The routing problem in standard form: minimise
/// `f' Q f + a' f + constant` subject to `G f <= h`, `f` being
/// trucks/hour per enumerated path.
#[derive(Debug, Clone)]
pub struct Qp {
    pub q: DMatrix<f64>,
    pub a: DVector<f64>,
    /// Flow-independent part of the objective; carried so that the QP value
    /// is the blended latency itself, not a shifted copy.
    pub constant: f64,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    /// What each row of `G` encodes, aligned with the rows.
    pub rows: Vec<RowKind>,
}

impl Qp {
    pub fn vars(&self) -> usize {
        self.a.len()
    }

    pub fn constraints(&self) -> usize {
        self.h.len()
    }
}

/// Provenance of one constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// `-f_p <= 0`.
    NonNegative(usize),
    /// Truck deliveries at the node may not exceed demand; drones absorb
    /// the rest.
    DroneCapacity(NodeId),
    /// Upper half of the exact-coverage pair at a truck-only node.
    DemandUpper(NodeId),
    /// Lower half of the exact-coverage pair.
    DemandLower(NodeId),
    /// Operational budget row.
    CostCap,
}

impl fmt::Display for RowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowKind::NonNegative(p) => write!(f, "f[{p}] >= 0"),
            RowKind::DroneCapacity(v) => write!(f, "truck parcels at {v} <= demand"),
            RowKind::DemandUpper(v) => write!(f, "truck parcels at {v} <= demand (exact)"),
            RowKind::DemandLower(v) => write!(f, "truck parcels at {v} >= demand (exact)"),
            RowKind::CostCap => write!(f, "operational cost <= cap"),
        }
    }
}

/// Direct evaluation of a flow vector: every reported rate is per hour and
/// every latency is in hours.
#[derive(Debug, Clone)]
pub struct Report {
    pub assignment: FlowAssignment,
    /// Congested traversal time of each road edge at this flow.
    pub edge_latency_hours: Vec<f64>,
    /// Parcel-hours accumulated per hour by truck-borne parcels.
    pub truck_parcel_hours: f64,
    /// Parcel-hours accumulated per hour by drone-borne parcels.
    pub drone_parcel_hours: f64,
    /// Demand-averaged delivery latency `L`, hours.
    pub parcel_latency_hours: f64,
    /// Background-traffic averaged latency `Ls`, hours.
    pub societal_latency_hours: f64,
    /// Hourly operational cost `C`.
    pub operational_cost: f64,
}

impl Report {
    /// The blended objective at this flow for a given trade-off weight.
    pub fn blended(&self, gamma: f64) -> f64 {
        gamma * self.parcel_latency_hours + (1.0 - gamma) * self.societal_latency_hours
    }
}

/// Per-edge affine substitution of the background flow into the plane.
fn edge_terms(net: &Network) -> (Vec<f64>, Vec<f64>) {
    let mut alpha = Vec::with_capacity(net.road_edges.len());
    let mut slope = Vec::with_capacity(net.road_edges.len());
    for e in &net.road_edges {
        let [w0, w1, w2] = e.plane.omega;
        alpha.push(w0 + w2 * e.nominal_flow);
        slope.push(w1 + w2);
    }
    (alpha, slope)
}

/// Flight time to each node that has a corridor, `None` elsewhere.
fn aerial_times(net: &Network) -> Vec<Option<f64>> {
    let mut t = vec![None; net.node_count()];
    for a in &net.aerial_edges {
        t[a.to.index()] = Some(a.latency_hours);
    }
    t
}

/// Builds the quadratic program for one trade-off weight and mode.
///
/// Errors when `gamma` leaves `[0, 1]`, when total demand is zero (the
/// parcel average is undefined), or when a node demands parcels that
/// neither an in-cap truck path nor (in bimodal mode) a drone corridor
/// can deliver.
pub fn assemble_qp(net: &Network, paths: &PathSet, gamma: f64, mode: Mode) -> Result<Qp> {
    if !(0.0..=1.0).contains(&gamma) || !gamma.is_finite() {
        return Err(Error::GammaRange(gamma));
    }
    let total_demand = net.total_demand();
    if total_demand <= 0.0 {
        return Err(Error::UndefinedAverage);
    }

    let n = paths.len();
    let (alpha, slope) = edge_terms(net);
    let aerial = aerial_times(net);
    let m = f64::from(net.constants.parcels_per_truck);
    let beta = net.constants.beta;
    let parcel_weight = gamma * m / total_demand;
    let societal_weight = (1.0 - gamma) / beta;

    // Quadratic term: every pair of paths sharing an edge couples through
    // that edge's congestion slope.
    let mut q = DMatrix::zeros(n, n);
    for (e, incident) in paths.by_edge.iter().enumerate() {
        let w = parcel_weight * slope[e];
        if w == 0.0 {
            continue;
        }
        for &p in incident {
            for &r in incident {
                q[(p, r)] += w;
            }
        }
    }

    // Linear term: free-flow path time, minus the drone time the truck
    // displaces at corridor nodes, plus the marginal societal delay the
    // truck inflicts on background traffic.
    let mut a = DVector::zeros(n);
    for (p, path) in paths.paths.iter().enumerate() {
        let mut free_flow = 0.0;
        let mut societal = 0.0;
        for e in &path.edges {
            free_flow += alpha[e.index()];
            societal += net.road_edges[e.index()].nominal_flow * slope[e.index()];
        }
        let displaced = aerial[path.destination.index()].unwrap_or(0.0);
        a[p] = parcel_weight * (free_flow - displaced) + societal_weight * societal;
    }

    // Flow-independent part: all-drone delivery at corridor nodes plus the
    // background traffic's delay under background flow alone.
    let mut constant = 0.0;
    for (v, t) in aerial.iter().enumerate() {
        if let Some(t) = t {
            constant += gamma / total_demand * net.demand[v] * t;
        }
    }
    for e in &net.road_edges {
        constant += societal_weight * e.nominal_flow * alpha[e.id.index()];
    }

    // Constraint rows. Order: non-negativity, per-node delivery, budget.
    let mut rows = Vec::new();
    let mut g_rows: Vec<DVector<f64>> = Vec::new();
    let mut h = Vec::new();

    for p in 0..n {
        let mut row = DVector::zeros(n);
        row[p] = -1.0;
        g_rows.push(row);
        h.push(0.0);
        rows.push(RowKind::NonNegative(p));
    }

    for (v, corridor) in aerial.iter().enumerate() {
        let id = NodeId(v as u32);
        if id == net.hub {
            continue;
        }
        let incoming = &paths.by_destination[v];
        let demand = net.demand[v];
        let drones_allowed = mode == Mode::Bimodal && corridor.is_some();
        if incoming.is_empty() {
            if demand > 0.0 && !drones_allowed {
                return Err(Error::UnservableNode {
                    node: v as u32,
                    demand,
                });
            }
            // No variables touch this node; nothing to constrain.
            continue;
        }
        let mut row = DVector::zeros(n);
        for &p in incoming {
            row[p] = m;
        }
        if drones_allowed {
            g_rows.push(row);
            h.push(demand);
            rows.push(RowKind::DroneCapacity(id));
        } else {
            g_rows.push(row.clone());
            h.push(demand);
            rows.push(RowKind::DemandUpper(id));
            g_rows.push(-row);
            h.push(-demand);
            rows.push(RowKind::DemandLower(id));
        }
    }

    // C(f) = truck_cost * 1'f + drone_cost * (D - m * 1'f) <= cost_cap.
    let c = &net.constants;
    let coeff = c.truck_cost - m * c.drone_cost;
    let mut row = DVector::zeros(n);
    for p in 0..n {
        row[p] = coeff;
    }
    g_rows.push(row);
    h.push(c.cost_cap - c.drone_cost * total_demand);
    rows.push(RowKind::CostCap);

    let g = DMatrix::from_rows(&g_rows.iter().map(|r| r.transpose()).collect::<Vec<_>>());
    let h = DVector::from_vec(h);

    Ok(Qp {
        q,
        a,
        constant,
        g,
        h,
        rows,
    })
}

/// The objective polynomial at `f`: `f' Q f + a' f + constant`.
pub fn objective_value(qp: &Qp, f: &[f64]) -> Result<f64> {
    if f.len() != qp.vars() {
        return Err(Error::DimensionMismatch {
            expected: qp.vars(),
            got: f.len(),
        });
    }
    let f = DVector::from_column_slice(f);
    Ok((f.transpose() * &qp.q * &f)[(0, 0)] + qp.a.dot(&f) + qp.constant)
}

/// Evaluates a flow vector directly from the network: edge latencies,
/// parcel latency, societal latency and operational cost.
///
/// Uses the same conventions as [`assemble_qp`] — drone terms appear for
/// exactly the corridor nodes — so for any non-negative flow vector the
/// identity `J = gamma * L + (1 - gamma) * Ls` holds to rounding error.
pub fn evaluate(net: &Network, paths: &PathSet, f: &[f64]) -> Result<Report> {
    let total_demand = net.total_demand();
    if total_demand <= 0.0 {
        return Err(Error::UndefinedAverage);
    }
    let assignment = derive_flows(net, paths, f)?;
    let m = f64::from(net.constants.parcels_per_truck);

    let mut edge_latency_hours = Vec::with_capacity(net.road_edges.len());
    for e in &net.road_edges {
        let truck = assignment.edge_truck_flow[e.id.index()];
        edge_latency_hours.push(edge_latency(&e.plane, truck, truck + e.nominal_flow)?);
    }

    let mut truck_parcel_hours = 0.0;
    for (p, path) in paths.paths.iter().enumerate() {
        let fp = assignment.path_flow[p];
        if fp == 0.0 {
            continue;
        }
        let path_time: f64 = path
            .edges
            .iter()
            .map(|e| edge_latency_hours[e.index()])
            .sum();
        truck_parcel_hours += m * fp * path_time;
    }

    // Raw remainder (not clamped at zero) keeps the identity with the QP
    // polynomial exact; within solver tolerance the two agree anyway.
    let mut drone_parcel_hours = 0.0;
    for a in &net.aerial_edges {
        let v = a.to.index();
        drone_parcel_hours += (net.demand[v] - assignment.truck_parcels[v]) * a.latency_hours;
    }

    let mut societal = 0.0;
    for e in &net.road_edges {
        societal += e.nominal_flow * edge_latency_hours[e.id.index()];
    }

    Ok(Report {
        parcel_latency_hours: (truck_parcel_hours + drone_parcel_hours) / total_demand,
        societal_latency_hours: societal / net.constants.beta,
        operational_cost: operational_cost(net, &assignment),
        assignment,
        edge_latency_hours,
        truck_parcel_hours,
        drone_parcel_hours,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latency::LatencyPlane;
    use crate::model::{AerialEdge, Constants, EdgeId, RoadEdge};
    use crate::paths::enumerate_paths;
    use approx::assert_relative_eq;

    /// One edge hub -> a with a drone corridor. Every number below is
    /// checkable by hand.
    fn one_edge_net() -> Network {
        Network {
            names: vec!["hub".into(), "a".into()],
            hub: NodeId(0),
            road_edges: vec![RoadEdge {
                id: EdgeId(0),
                from: NodeId(0),
                to: NodeId(1),
                length_km: 1.0,
                lanes: 2,
                nominal_flow: 0.2,
                plane: LatencyPlane::new(0.1, 0.1, 0.1),
            }],
            aerial_edges: vec![AerialEdge {
                from: NodeId(0),
                to: NodeId(1),
                latency_hours: 0.3,
            }],
            demand: vec![0.0, 100.0],
            constants: Constants {
                parcels_per_truck: 125,
                truck_cost: 30.0,
                drone_cost: 0.5,
                beta: 0.2,
                cost_cap: 100.0,
                drone_speed_kmh: 25.0,
            },
        }
    }

    #[test]
    fn evaluate_matches_hand_computation() {
        let net = one_edge_net();
        let ps = enumerate_paths(&net, 8, None).unwrap();
        let report = evaluate(&net, &ps, &[0.4]).unwrap();

        // latency = 0.1 + 0.1*0.4 + 0.1*(0.4 + 0.2) = 0.2 h
        assert_relative_eq!(report.edge_latency_hours[0], 0.2);
        // trucks: 125 * 0.4 * 0.2 = 10 parcel-hours/h
        assert_relative_eq!(report.truck_parcel_hours, 10.0);
        // drones: (100 - 50) * 0.3 = 15
        assert_relative_eq!(report.drone_parcel_hours, 15.0);
        // L = 25 / 100
        assert_relative_eq!(report.parcel_latency_hours, 0.25);
        // Ls = (0.2 * 0.2) / 0.2
        assert_relative_eq!(report.societal_latency_hours, 0.2);
        // C = 30 * 0.4 + 0.5 * 50 = 37
        assert_relative_eq!(report.operational_cost, 37.0);
    }

    #[test]
    fn qp_coefficients_by_hand() {
        let net = one_edge_net();
        let ps = enumerate_paths(&net, 8, None).unwrap();
        let qp = assemble_qp(&net, &ps, 0.5, Mode::Bimodal).unwrap();

        // slope = 0.2, alpha = 0.12, D = 100, parcel weight = 0.625,
        // societal weight = 2.5.
        assert_relative_eq!(qp.q[(0, 0)], 0.625 * 0.2);
        assert_relative_eq!(qp.a[0], 0.625 * (0.12 - 0.3) + 2.5 * (0.2 * 0.2));
        assert_relative_eq!(qp.constant, 0.005 * 100.0 * 0.3 + 2.5 * (0.2 * 0.12));

        // J(0.4) = 0.125*0.16 - 0.0125*0.4 + 0.21 = 0.225, which is the
        // blend of the evaluated latencies.
        let j = objective_value(&qp, &[0.4]).unwrap();
        assert_relative_eq!(j, 0.225);
        let report = evaluate(&net, &ps, &[0.4]).unwrap();
        assert_relative_eq!(j, report.blended(0.5), max_relative = 1e-12);
    }

    #[test]
    fn objective_identity_holds_for_any_gamma_and_flow() {
        let net = one_edge_net();
        let ps = enumerate_paths(&net, 8, None).unwrap();
        for gamma in [0.0, 0.3, 1.0] {
            let qp = assemble_qp(&net, &ps, gamma, Mode::Bimodal).unwrap();
            for f in [[0.0], [0.17], [0.8]] {
                let j = objective_value(&qp, &f).unwrap();
                let report = evaluate(&net, &ps, &f).unwrap();
                assert_relative_eq!(
                    j,
                    report.blended(gamma),
                    max_relative = 1e-12,
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn constraint_rows_by_mode() {
        let net = one_edge_net();
        let ps = enumerate_paths(&net, 8, None).unwrap();

        let bi = assemble_qp(&net, &ps, 0.5, Mode::Bimodal).unwrap();
        assert_eq!(
            bi.rows,
            vec![
                RowKind::NonNegative(0),
                RowKind::DroneCapacity(NodeId(1)),
                RowKind::CostCap,
            ]
        );
        // Drone row: 125 * f <= 100. Budget row: (30 - 62.5) f <= 100 - 50.
        assert_relative_eq!(bi.g[(1, 0)], 125.0);
        assert_relative_eq!(bi.h[1], 100.0);
        assert_relative_eq!(bi.g[(2, 0)], -32.5);
        assert_relative_eq!(bi.h[2], 50.0);

        let truck = assemble_qp(&net, &ps, 0.5, Mode::TruckOnly).unwrap();
        assert_eq!(
            truck.rows,
            vec![
                RowKind::NonNegative(0),
                RowKind::DemandUpper(NodeId(1)),
                RowKind::DemandLower(NodeId(1)),
                RowKind::CostCap,
            ]
        );
        assert_relative_eq!(truck.g[(2, 0)], -125.0);
        assert_relative_eq!(truck.h[2], -100.0);
    }

    #[test]
    fn rejects_bad_gamma_and_zero_demand() {
        let net = one_edge_net();
        let ps = enumerate_paths(&net, 8, None).unwrap();
        assert!(matches!(
            assemble_qp(&net, &ps, 1.5, Mode::Bimodal),
            Err(Error::GammaRange(_))
        ));
        assert!(matches!(
            assemble_qp(&net, &ps, -0.1, Mode::Bimodal),
            Err(Error::GammaRange(_))
        ));

        let mut empty = net.clone();
        empty.demand = vec![0.0, 0.0];
        assert!(matches!(
            assemble_qp(&empty, &ps, 0.5, Mode::Bimodal),
            Err(Error::UndefinedAverage)
        ));
    }

    #[test]
    fn unservable_demand_is_an_error() {
        // Demand at a node with no in-cap path: fine bimodal (corridor
        // exists), fatal truck-only.
        let net = one_edge_net();
        let ps = enumerate_paths(&net, 0, None).unwrap();
        assert!(ps.is_empty());
        assert!(assemble_qp(&net, &ps, 0.5, Mode::Bimodal).is_ok());
        match assemble_qp(&net, &ps, 0.5, Mode::TruckOnly) {
            Err(Error::UnservableNode { node, demand }) => {
                assert_eq!(node, 1);
                assert_eq!(demand, 100.0);
            }
            other => panic!("expected unservable node, got {other:?}"),
        }
    }

    #[test]
    fn quadratic_term_is_positive_semidefinite() {
        let net = one_edge_net();
        let ps = enumerate_paths(&net, 8, None).unwrap();
        for gamma in [0.0, 0.5, 1.0] {
            let qp = assemble_qp(&net, &ps, gamma, Mode::Bimodal).unwrap();
            let eig = qp.q.clone().symmetric_eigen();
            assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-8));
        }
    }
}
