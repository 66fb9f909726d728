//! Network representation and the bookkeeping that turns a path-flow vector
//! into per-edge and per-node quantities.
//!
//! A network is a road digraph plus a star of aerial links out of a single
//! hub. Trucks leave the hub along enumerated simple paths and carry a fixed
//! number of parcels each; whatever part of a node's demand the trucks do
//! not cover is flown out by single-parcel drones. All rates are per hour.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::latency::LatencyPlane;
use crate::paths::PathSet;
use crate::{Error, Result};

/// Slack allowed when checking that trucks do not deliver more than a node
/// demands. Solver output satisfies constraints to its own tolerance
/// (typically 1e-6), so the check must not be stricter than that.
const OVER_DELIVERY_TOL: f64 = 1e-6;

/// Relative slack between the configured background-flow total and the sum
/// of per-edge nominal flows.
const BETA_MATCH_TOL: f64 = 1e-6;

/// Dense node index, assigned at load time. External names live in
/// [`Network::names`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

/// Dense road-edge index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EdgeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Which delivery modes the routing problem may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Trucks must cover every parcel; drones stay grounded.
    TruckOnly,
    /// Trucks and drones split each node's demand.
    Bimodal,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::TruckOnly => "truck-only",
            Mode::Bimodal => "bimodal",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truck-only" | "truck_only" | "trucks" => Ok(Mode::TruckOnly),
            "bimodal" | "both" => Ok(Mode::Bimodal),
            other => Err(Error::Domain(format!(
                "unknown mode {other:?}; expected \"truck-only\" or \"bimodal\""
            ))),
        }
    }
}

/// One directed road segment.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadEdge {
    pub id: EdgeId,
    pub from: NodeId,
    pub to: NodeId,
    pub length_km: f64,
    /// Lane class, 2 or 3; decides which reference plane calibrates the edge.
    pub lanes: u8,
    /// Background (non-truck) vehicle flow on the edge, vehicles/hour.
    pub nominal_flow: f64,
    pub plane: LatencyPlane,
}

/// One drone corridor from the hub to a node. At most one per destination.
#[derive(Debug, Clone, PartialEq)]
pub struct AerialEdge {
    pub from: NodeId,
    pub to: NodeId,
    /// One-way flight time, hours.
    pub latency_hours: f64,
}

/// Scenario-wide constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Constants {
    /// Parcels a single truck carries per dispatch.
    pub parcels_per_truck: u32,
    /// Cost per truck dispatch.
    pub truck_cost: f64,
    /// Cost per drone flight (one parcel).
    pub drone_cost: f64,
    /// Total background vehicle flow; must equal the sum of per-edge
    /// nominal flows. Normalises the societal latency term.
    pub beta: f64,
    /// Budget ceiling on operational cost per hour.
    pub cost_cap: f64,
    /// Drone cruise speed, km/h.
    pub drone_speed_kmh: f64,
}

/// The full delivery network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    /// External node names, indexed by [`NodeId`].
    pub names: Vec<String>,
    pub hub: NodeId,
    pub road_edges: Vec<RoadEdge>,
    pub aerial_edges: Vec<AerialEdge>,
    /// Parcel demand per node, parcels/hour, indexed by [`NodeId`].
    pub demand: Vec<f64>,
    pub constants: Constants,
}

impl Network {
    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn node_name(&self, v: NodeId) -> &str {
        &self.names[v.index()]
    }

    pub fn total_demand(&self) -> f64 {
        self.demand.iter().sum()
    }

    /// Index into `aerial_edges` of the corridor serving `v`, if any.
    pub fn aerial_to(&self, v: NodeId) -> Option<usize> {
        self.aerial_edges.iter().position(|a| a.to == v)
    }

    /// Outgoing road adjacency, sorted by (destination, edge id) so that
    /// every traversal of the graph is deterministic.
    pub fn road_out(&self) -> Vec<Vec<(NodeId, EdgeId)>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for e in &self.road_edges {
            adj[e.from.index()].push((e.to, e.id));
        }
        for list in &mut adj {
            list.sort();
        }
        adj
    }

    /// Nodes reachable from the hub over road edges, ignoring path length.
    pub fn road_reachable(&self) -> Vec<bool> {
        let adj = self.road_out();
        let mut seen = vec![false; self.node_count()];
        if self.hub.index() >= seen.len() {
            return seen;
        }
        seen[self.hub.index()] = true;
        let mut queue = VecDeque::from([self.hub]);
        while let Some(v) = queue.pop_front() {
            for &(w, _) in &adj[v.index()] {
                if !seen[w.index()] {
                    seen[w.index()] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }
}

/// One failed invariant, pointing at the element that broke it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Stable machine-readable name of the invariant, e.g. `aerial-origin`.
    pub code: &'static str,
    /// The offending element (node, edge, constant) in display form.
    pub element: String,
    pub message: String,
}

impl Violation {
    fn new(code: &'static str, element: impl fmt::Display, message: impl Into<String>) -> Self {
        Self {
            code,
            element: element.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.code, self.element, self.message)
    }
}

/// Checks every structural invariant of the network and returns all
/// violations found; an empty vector means the network is well-formed.
pub fn validate(net: &Network) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = net.node_count();

    if net.hub.index() >= n {
        out.push(Violation::new(
            "hub-id",
            net.hub,
            format!("hub index out of range (network has {n} nodes)"),
        ));
        // Everything else keys off the hub; stop early on a broken one.
        return out;
    }

    for e in &net.road_edges {
        let el = e.id;
        if e.from.index() >= n || e.to.index() >= n {
            out.push(Violation::new("edge-endpoint", el, "endpoint out of range"));
            continue;
        }
        if e.from == e.to {
            out.push(Violation::new(
                "edge-loop",
                el,
                format!("self-loop at {}", net.node_name(e.from)),
            ));
        }
        if !(e.length_km.is_finite() && e.length_km > 0.0) {
            out.push(Violation::new(
                "edge-length",
                el,
                format!("length must be positive, got {}", e.length_km),
            ));
        }
        if e.lanes != 2 && e.lanes != 3 {
            out.push(Violation::new(
                "edge-lanes",
                el,
                format!("lane class must be 2 or 3, got {}", e.lanes),
            ));
        }
        if !(e.nominal_flow.is_finite() && e.nominal_flow >= 0.0) {
            out.push(Violation::new(
                "edge-nominal-flow",
                el,
                format!("nominal flow must be non-negative, got {}", e.nominal_flow),
            ));
        }
        if !e.plane.is_physical() {
            let [w0, w1, w2] = e.plane.omega;
            out.push(Violation::new(
                "edge-plane",
                el,
                format!("latency plane [{w0}, {w1}, {w2}] is not physical"),
            ));
        }
    }

    for (i, a) in net.aerial_edges.iter().enumerate() {
        let el = format!("aerial[{i}]");
        if a.to.index() >= n || a.from.index() >= n {
            out.push(Violation::new(
                "aerial-endpoint",
                &el,
                "endpoint out of range",
            ));
            continue;
        }
        if a.from != net.hub {
            out.push(Violation::new(
                "aerial-origin",
                &el,
                format!(
                    "aerial edges must originate at the hub {}, got {}",
                    net.node_name(net.hub),
                    net.node_name(a.from)
                ),
            ));
        }
        if a.to == net.hub {
            out.push(Violation::new(
                "aerial-loop",
                &el,
                "aerial edge ends at the hub",
            ));
        }
        if !(a.latency_hours.is_finite() && a.latency_hours > 0.0) {
            out.push(Violation::new(
                "aerial-latency",
                &el,
                format!("flight time must be positive, got {}", a.latency_hours),
            ));
        }
        if net.aerial_edges[..i].iter().any(|b| b.to == a.to) {
            out.push(Violation::new(
                "aerial-duplicate",
                &el,
                format!("second aerial edge to {}", net.node_name(a.to)),
            ));
        }
    }

    if net.demand.len() != n {
        out.push(Violation::new(
            "demand-size",
            "demand",
            format!("{} entries for {n} nodes", net.demand.len()),
        ));
    } else {
        for (v, &d) in net.demand.iter().enumerate() {
            let id = NodeId(v as u32);
            if !(d.is_finite() && d >= 0.0) {
                out.push(Violation::new(
                    "demand-negative",
                    net.node_name(id),
                    format!("demand must be non-negative, got {d}"),
                ));
            }
            if id == net.hub && d != 0.0 {
                out.push(Violation::new(
                    "demand-hub",
                    net.node_name(id),
                    "the hub cannot demand parcels from itself",
                ));
            }
        }

        let reachable = net.road_reachable();
        for (v, &d) in net.demand.iter().enumerate() {
            let id = NodeId(v as u32);
            if d > 0.0 && !reachable[v] && net.aerial_to(id).is_none() {
                out.push(Violation::new(
                    "unreachable-node",
                    net.node_name(id),
                    "demanded node has no road path from the hub and no aerial edge",
                ));
            }
        }
    }

    let c = &net.constants;
    if c.parcels_per_truck == 0 {
        out.push(Violation::new(
            "truck-capacity",
            "parcels_per_truck",
            "a truck must carry at least one parcel",
        ));
    }
    for (name, value, must_be_positive) in [
        ("truck_cost", c.truck_cost, false),
        ("drone_cost", c.drone_cost, false),
        ("beta", c.beta, true),
        ("cost_cap", c.cost_cap, true),
        ("drone_speed_kmh", c.drone_speed_kmh, true),
    ] {
        let ok = value.is_finite()
            && if must_be_positive {
                value > 0.0
            } else {
                value >= 0.0
            };
        if !ok {
            out.push(Violation::new(
                "constant-range",
                name,
                format!(
                    "must be {} and finite, got {value}",
                    if must_be_positive {
                        "positive"
                    } else {
                        "non-negative"
                    }
                ),
            ));
        }
    }

    let nominal_sum: f64 = net.road_edges.iter().map(|e| e.nominal_flow).sum();
    if c.beta.is_finite() && c.beta > 0.0 && (nominal_sum - c.beta).abs() > BETA_MATCH_TOL * c.beta
    {
        out.push(Violation::new(
            "beta-mismatch",
            "beta",
            format!(
                "beta is {} but per-edge nominal flows sum to {nominal_sum}",
                c.beta
            ),
        ));
    }

    out
}

/// Everything derivable from a path-flow vector.
///
/// `drone_parcels[v]` is simply the demand the trucks leave uncovered at
/// `v`; whether a drone corridor exists to actually fly it is a constraint
/// question settled by the optimiser, not by this accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowAssignment {
    /// Trucks/hour dispatched along each path.
    pub path_flow: Vec<f64>,
    /// Truck vehicles/hour traversing each road edge.
    pub edge_truck_flow: Vec<f64>,
    /// Parcels/hour delivered by truck to each node.
    pub truck_parcels: Vec<f64>,
    /// Parcels/hour left to drones at each node.
    pub drone_parcels: Vec<f64>,
}

/// Expands a path-flow vector into per-edge truck flows and per-node
/// truck/drone parcel splits.
///
/// Errors on a wrong-length vector, a meaningfully negative flow, or truck
/// deliveries exceeding a node's demand beyond solver tolerance.
pub fn derive_flows(net: &Network, paths: &PathSet, f: &[f64]) -> Result<FlowAssignment> {
    if f.len() != paths.paths.len() {
        return Err(Error::DimensionMismatch {
            expected: paths.paths.len(),
            got: f.len(),
        });
    }

    let mut path_flow = Vec::with_capacity(f.len());
    for (p, &fp) in f.iter().enumerate() {
        if !fp.is_finite() || fp < -OVER_DELIVERY_TOL {
            return Err(Error::Domain(format!(
                "path flow {p} must be non-negative, got {fp}"
            )));
        }
        // Interior-point output can sit a hair below zero; snap it.
        path_flow.push(fp.max(0.0));
    }

    let mut edge_truck_flow = vec![0.0; net.road_edges.len()];
    let mut truck_parcels = vec![0.0; net.node_count()];
    let m = f64::from(net.constants.parcels_per_truck);
    for (p, path) in paths.paths.iter().enumerate() {
        let fp = path_flow[p];
        if fp == 0.0 {
            continue;
        }
        for e in &path.edges {
            edge_truck_flow[e.index()] += fp;
        }
        truck_parcels[path.destination.index()] += m * fp;
    }

    let mut drone_parcels = vec![0.0; net.node_count()];
    for v in 0..net.node_count() {
        let demand = net.demand[v];
        if truck_parcels[v] > demand + OVER_DELIVERY_TOL * demand.max(1.0) {
            return Err(Error::OverDelivery {
                node: v as u32,
                demand,
                delivered: truck_parcels[v],
            });
        }
        drone_parcels[v] = (demand - truck_parcels[v]).max(0.0);
    }

    Ok(FlowAssignment {
        path_flow,
        edge_truck_flow,
        truck_parcels,
        drone_parcels,
    })
}

/// Hourly operational cost of an assignment: one truck fee per dispatch
/// plus one drone fee per parcel the trucks leave behind.
pub fn operational_cost(net: &Network, assignment: &FlowAssignment) -> f64 {
    let trucks: f64 = assignment.path_flow.iter().sum();
    let drone: f64 = assignment.drone_parcels.iter().sum();
    net.constants.truck_cost * trucks + net.constants.drone_cost * drone
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::enumerate_paths;

    /// Hub -> a -> b line network with one aerial edge to b.
    fn line_network(demand_a: f64, demand_b: f64) -> Network {
        let plane = LatencyPlane::new(0.1, 0.1, 0.1);
        Network {
            names: vec!["hub".into(), "a".into(), "b".into()],
            hub: NodeId(0),
            road_edges: vec![
                RoadEdge {
                    id: EdgeId(0),
                    from: NodeId(0),
                    to: NodeId(1),
                    length_km: 1.0,
                    lanes: 2,
                    nominal_flow: 60.0,
                    plane,
                },
                RoadEdge {
                    id: EdgeId(1),
                    from: NodeId(1),
                    to: NodeId(2),
                    length_km: 1.0,
                    lanes: 2,
                    nominal_flow: 40.0,
                    plane,
                },
            ],
            aerial_edges: vec![AerialEdge {
                from: NodeId(0),
                to: NodeId(2),
                latency_hours: 0.05,
            }],
            demand: vec![0.0, demand_a, demand_b],
            constants: Constants {
                parcels_per_truck: 125,
                truck_cost: 30.0,
                drone_cost: 0.5,
                beta: 100.0,
                cost_cap: 1000.0,
                drone_speed_kmh: 25.0,
            },
        }
    }

    #[test]
    fn valid_network_has_no_violations() {
        let net = line_network(100.0, 136.0);
        assert_eq!(validate(&net), Vec::new());
    }

    #[test]
    fn validate_flags_broken_invariants() {
        let mut net = line_network(100.0, 136.0);
        net.aerial_edges.push(AerialEdge {
            from: NodeId(1), // not the hub
            to: NodeId(2),   // and a second corridor to b
            latency_hours: -1.0,
        });
        net.road_edges[0].lanes = 5;
        net.demand[0] = 3.0;
        net.constants.beta = 500.0;

        let codes: Vec<&str> = validate(&net).iter().map(|v| v.code).collect();
        for expected in [
            "aerial-origin",
            "aerial-duplicate",
            "aerial-latency",
            "edge-lanes",
            "demand-hub",
            "beta-mismatch",
        ] {
            assert!(codes.contains(&expected), "missing {expected} in {codes:?}");
        }
    }

    #[test]
    fn validate_flags_unservable_demand() {
        let mut net = line_network(100.0, 136.0);
        // Cut b off from the roads and remove its aerial edge.
        net.road_edges.pop();
        net.aerial_edges.clear();
        let v = validate(&net);
        assert!(v
            .iter()
            .any(|v| v.code == "unreachable-node" && v.element == "b"));
    }

    #[test]
    fn derives_truck_and_drone_split() {
        let net = line_network(100.0, 136.0);
        let ps = enumerate_paths(&net, 8, None).unwrap();
        // Paths sorted by node sequence: hub->a, then hub->a->b.
        assert_eq!(ps.paths.len(), 2);
        let fa = derive_flows(&net, &ps, &[0.5, 0.4]).unwrap();

        // Edge 0 carries both paths, edge 1 only the second.
        assert_eq!(fa.edge_truck_flow, vec![0.9, 0.4]);
        // 125 parcels per truck: a receives 62.5, b receives 50.
        assert_eq!(fa.truck_parcels, vec![0.0, 62.5, 50.0]);
        assert_eq!(fa.drone_parcels, vec![0.0, 37.5, 86.0]);

        // 30 * 0.9 trucks + 0.5 * 123.5 drone parcels.
        let cost = operational_cost(&net, &fa);
        assert!((cost - (30.0 * 0.9 + 0.5 * 123.5)).abs() < 1e-12);
    }

    #[test]
    fn single_path_cost_by_hand() {
        // One truck path at 0.4 trucks/h to b: 50 of 136 parcels by truck,
        // 86 by drone. C = 30 * 0.4 + 0.5 * 86 = 55.
        let net = line_network(0.0, 136.0);
        let ps = enumerate_paths(&net, 8, None).unwrap();
        let fa = derive_flows(&net, &ps, &[0.0, 0.4]).unwrap();
        assert_eq!(fa.truck_parcels[2], 50.0);
        let cost = operational_cost(&net, &fa);
        assert!((cost - 55.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_over_delivery() {
        let net = line_network(100.0, 136.0);
        let ps = enumerate_paths(&net, 8, None).unwrap();
        // 1.2 trucks/h * 125 = 150 parcels against demand 136 at node b.
        let err = derive_flows(&net, &ps, &[0.0, 1.2]).unwrap_err();
        match err {
            Error::OverDelivery {
                node,
                demand,
                delivered,
            } => {
                assert_eq!(node, 2);
                assert_eq!(demand, 136.0);
                assert_eq!(delivered, 150.0);
            }
            other => panic!("expected over-delivery, got {other}"),
        }
    }

    #[test]
    fn rejects_negative_flow_and_bad_length() {
        let net = line_network(100.0, 136.0);
        let ps = enumerate_paths(&net, 8, None).unwrap();
        assert!(derive_flows(&net, &ps, &[0.1]).is_err());
        assert!(derive_flows(&net, &ps, &[-0.5, 0.0]).is_err());
        // A hair below zero is solver noise, not an error.
        let fa = derive_flows(&net, &ps, &[-1e-9, 0.0]).unwrap();
        assert_eq!(fa.path_flow[0], 0.0);
    }

    #[test]
    fn mode_parses_and_displays() {
        assert_eq!("truck-only".parse::<Mode>().unwrap(), Mode::TruckOnly);
        assert_eq!("bimodal".parse::<Mode>().unwrap(), Mode::Bimodal);
        assert!("hovercraft".parse::<Mode>().is_err());
        assert_eq!(Mode::Bimodal.to_string(), "bimodal");
    }
}
