//! On-disk formats: scenario JSON, latency-sample CSV, fitted-plane JSON,
//! result CSV, and import of the classic transportation-network text
//! formats (`*_net.tntp`, `*_node.tntp`, `*_flow.tntp`).
//!
//! A scenario file is versioned JSON naming nodes by external string ids;
//! loading assigns dense indices in listing order. Road edges may carry an
//! explicit latency plane or fall back to the bundled lane-class
//! calibration rescaled to their length. Aerial edges may carry an
//! explicit flight time or fall back to straight-line distance over the
//! scenario's drone speed, which needs node coordinates.

use std::collections::HashMap;
use std::fmt::Display;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::latency::{aerial_latency, scale_plane, LatencyPlane, LatencySample};
use crate::model::{AerialEdge, Constants, EdgeId, Network, NodeId, RoadEdge};
use crate::{Error, Result};

/// Scenario JSON schema version this build reads and writes.
pub const SCENARIO_SCHEMA: u32 = 1;

/// Length of the road segment the two-lane calibration samples describe.
pub const TWO_LANE_REF_LENGTH_KM: f64 = 0.5;
/// Length of the road segment the three-lane calibration samples describe.
pub const THREE_LANE_REF_LENGTH_KM: f64 = 2.0;

/// Plane fitted to `data/latency/two_lane_samples.csv`; kept in sync by a
/// test so scenarios without explicit planes calibrate identically
/// everywhere.
pub const TWO_LANE_REF_PLANE: LatencyPlane = LatencyPlane {
    omega: [
        0.012526310878788987,
        0.00018020484558701444,
        5.974137484855119e-6,
    ],
};

/// Plane fitted to `data/latency/three_lane_samples.csv`.
pub const THREE_LANE_REF_PLANE: LatencyPlane = LatencyPlane {
    omega: [0.0280004690667781, 6.0090027267377e-5, 2.498750022086732e-6],
};

/// The lane-class calibration rescaled to an edge of `length_km`.
pub fn reference_plane(lanes: u8, length_km: f64) -> Result<LatencyPlane> {
    match lanes {
        2 => scale_plane(&TWO_LANE_REF_PLANE, length_km, TWO_LANE_REF_LENGTH_KM),
        3 => scale_plane(&THREE_LANE_REF_PLANE, length_km, THREE_LANE_REF_LENGTH_KM),
        other => Err(Error::Domain(format!(
            "no reference calibration for lane class {other}"
        ))),
    }
}

/// A loaded scenario: the network plus the presentation extras that do not
/// influence the model (name, node coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub network: Network,
    /// Coordinates in km where known, indexed like the nodes.
    pub positions: Vec<Option<(f64, f64)>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    schema: u32,
    name: String,
    hub: String,
    nodes: Vec<NodeSpec>,
    road_edges: Vec<RoadEdgeSpec>,
    #[serde(default)]
    aerial_edges: Vec<AerialEdgeSpec>,
    constants: ConstantsSpec,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeSpec {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<f64>,
    #[serde(default)]
    demand: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoadEdgeSpec {
    from: String,
    to: String,
    length_km: f64,
    lanes: u8,
    nominal_flow: f64,
    /// Explicit latency plane; omitted means "rescale the lane-class
    /// calibration to this edge's length".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega: Option<[f64; 3]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AerialEdgeSpec {
    to: String,
    /// Explicit flight time; omitted means "straight-line distance over
    /// the drone speed", which requires coordinates on both endpoints.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    latency_hours: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantsSpec {
    parcels_per_truck: u32,
    truck_cost: f64,
    drone_cost: f64,
    beta: f64,
    cost_cap: f64,
    drone_speed_kmh: f64,
}

fn parse_err(file: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_string(),
        line: 0,
        message: message.into(),
    }
}

/// Reads and resolves a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_scenario(&text, &path.display().to_string())
}

/// Parses scenario JSON; `label` names the source in errors.
pub fn parse_scenario(text: &str, label: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    if file.schema != SCENARIO_SCHEMA {
        return Err(Error::SchemaVersion {
            found: file.schema,
            expected: SCENARIO_SCHEMA,
        });
    }

    let mut ids = HashMap::new();
    let mut names = Vec::new();
    let mut positions = Vec::new();
    let mut demand = Vec::new();
    for (i, node) in file.nodes.iter().enumerate() {
        if ids.insert(node.id.clone(), NodeId(i as u32)).is_some() {
            return Err(parse_err(label, format!("duplicate node id {:?}", node.id)));
        }
        names.push(node.id.clone());
        positions.push(match (node.x, node.y) {
            (Some(x), Some(y)) => Some((x, y)),
            (None, None) => None,
            _ => {
                return Err(parse_err(
                    label,
                    format!("node {:?} has only one of x and y", node.id),
                ))
            }
        });
        demand.push(node.demand);
    }
    let lookup = |id: &str| -> Result<NodeId> {
        ids.get(id)
            .copied()
            .ok_or_else(|| parse_err(label, format!("unknown node id {id:?}")))
    };

    let hub = lookup(&file.hub)?;
    let mut road_edges = Vec::new();
    for (i, e) in file.road_edges.iter().enumerate() {
        let plane = match e.omega {
            Some([w0, w1, w2]) => LatencyPlane::new(w0, w1, w2),
            None => reference_plane(e.lanes, e.length_km)
                .map_err(|err| parse_err(label, format!("road edge {i} has no omega and {err}")))?,
        };
        road_edges.push(RoadEdge {
            id: EdgeId(i as u32),
            from: lookup(&e.from)?,
            to: lookup(&e.to)?,
            length_km: e.length_km,
            lanes: e.lanes,
            nominal_flow: e.nominal_flow,
            plane,
        });
    }

    let mut aerial_edges = Vec::new();
    for a in &file.aerial_edges {
        let to = lookup(&a.to)?;
        let latency = match a.latency_hours {
            Some(t) => t,
            None => {
                let (hp, tp) = match (positions[hub.index()], positions[to.index()]) {
                    (Some(h), Some(t)) => (h, t),
                    _ => {
                        return Err(parse_err(
                            label,
                            format!(
                                "aerial edge to {:?} has no latency_hours and an endpoint \
                                 lacks coordinates",
                                a.to
                            ),
                        ))
                    }
                };
                let dist = ((hp.0 - tp.0).powi(2) + (hp.1 - tp.1).powi(2)).sqrt();
                aerial_latency(dist, file.constants.drone_speed_kmh)?
            }
        };
        aerial_edges.push(AerialEdge {
            from: hub,
            to,
            latency_hours: latency,
        });
    }

    let c = &file.constants;
    Ok(Scenario {
        name: file.name,
        network: Network {
            names,
            hub,
            road_edges,
            aerial_edges,
            demand,
            constants: Constants {
                parcels_per_truck: c.parcels_per_truck,
                truck_cost: c.truck_cost,
                drone_cost: c.drone_cost,
                beta: c.beta,
                cost_cap: c.cost_cap,
                drone_speed_kmh: c.drone_speed_kmh,
            },
        },
        positions,
    })
}

/// Writes a scenario with everything resolved (explicit planes and flight
/// times), so reloading reproduces the network exactly.
pub fn save_scenario(sc: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let net = &sc.network;
    let file = ScenarioFile {
        schema: SCENARIO_SCHEMA,
        name: sc.name.clone(),
        hub: net.node_name(net.hub).to_string(),
        nodes: (0..net.node_count())
            .map(|v| NodeSpec {
                id: net.names[v].clone(),
                x: sc.positions.get(v).copied().flatten().map(|p| p.0),
                y: sc.positions.get(v).copied().flatten().map(|p| p.1),
                demand: net.demand[v],
            })
            .collect(),
        road_edges: net
            .road_edges
            .iter()
            .map(|e| RoadEdgeSpec {
                from: net.node_name(e.from).to_string(),
                to: net.node_name(e.to).to_string(),
                length_km: e.length_km,
                lanes: e.lanes,
                nominal_flow: e.nominal_flow,
                omega: Some(e.plane.omega),
            })
            .collect(),
        aerial_edges: net
            .aerial_edges
            .iter()
            .map(|a| AerialEdgeSpec {
                to: net.node_name(a.to).to_string(),
                latency_hours: Some(a.latency_hours),
            })
            .collect(),
        constants: ConstantsSpec {
            parcels_per_truck: net.constants.parcels_per_truck,
            truck_cost: net.constants.truck_cost,
            drone_cost: net.constants.drone_cost,
            beta: net.constants.beta,
            cost_cap: net.constants.cost_cap,
            drone_speed_kmh: net.constants.drone_speed_kmh,
        },
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Reads calibration samples from CSV with the header
/// `truck_flow,total_flow,latency_hours`.
pub fn read_samples(path: impl AsRef<Path>) -> Result<Vec<LatencySample>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Writes calibration samples as CSV.
pub fn write_samples(path: impl AsRef<Path>, samples: &[LatencySample]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    for s in samples {
        writer.serialize(s)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a fitted plane from JSON of the form `{"omega": [w0, w1, w2]}`.
pub fn read_plane(path: impl AsRef<Path>) -> Result<LatencyPlane> {
    let text = fs::read_to_string(path.as_ref())?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes a fitted plane as JSON.
pub fn write_plane(path: impl AsRef<Path>, plane: &LatencyPlane) -> Result<()> {
    let mut text = serde_json::to_string_pretty(plane)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// One solved operating point, as written to the results CSV. Latencies
/// are reported in minutes; rates stay per hour.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub mode: String,
    pub gamma: f64,
    /// Blended objective (hours) at the optimum.
    pub objective: f64,
    pub parcel_latency_min: f64,
    pub societal_latency_min: f64,
    pub operational_cost: f64,
    pub trucks_per_hour: f64,
    pub truck_parcels_per_hour: f64,
    pub drone_parcels_per_hour: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    /// Non-zero path flows, packed as `index=value;...`.
    pub path_flows: Vec<(usize, f64)>,
    /// Drone parcels per node, packed as `name=value;...`.
    pub drone_parcels: Vec<(String, f64)>,
}

const RESULT_HEADER: [&str; 14] = [
    "scenario",
    "mode",
    "gamma",
    "objective",
    "parcel_latency_min",
    "societal_latency_min",
    "operational_cost",
    "trucks_per_hour",
    "truck_parcels_per_hour",
    "drone_parcels_per_hour",
    "iterations",
    "kkt_residual",
    "path_flows",
    "drone_parcels",
];

fn pack_pairs<K: Display>(pairs: &[(K, f64)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn unpack_pairs(cell: &str, file: &str) -> Result<Vec<(String, f64)>> {
    if cell.is_empty() {
        return Ok(Vec::new());
    }
    cell.split(';')
        .map(|item| {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| parse_err(file, format!("malformed pair {item:?}")))?;
            let v = v
                .parse()
                .map_err(|_| parse_err(file, format!("bad number in pair {item:?}")))?;
            Ok((k.to_string(), v))
        })
        .collect()
}

/// Writes result rows as CSV, header included.
pub fn write_results<W: io::Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(RESULT_HEADER)?;
    for r in rows {
        writer.write_record([
            r.scenario.clone(),
            r.mode.clone(),
            r.gamma.to_string(),
            r.objective.to_string(),
            r.parcel_latency_min.to_string(),
            r.societal_latency_min.to_string(),
            r.operational_cost.to_string(),
            r.trucks_per_hour.to_string(),
            r.truck_parcels_per_hour.to_string(),
            r.drone_parcels_per_hour.to_string(),
            r.iterations.to_string(),
            r.kkt_residual.to_string(),
            pack_pairs(&r.path_flows),
            pack_pairs(&r.drone_parcels),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes result rows to a file.
pub fn write_results_path(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    let file = fs::File::create(path.as_ref())?;
    write_results(io::BufWriter::new(file), rows)
}

/// Reads result rows back; the packed cells round-trip exactly because
/// numbers are written in shortest-round-trip form.
pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let label = path.as_ref().display().to_string();
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(&label, format!("missing column {name:?}")))
    };
    let idx: Vec<usize> = RESULT_HEADER
        .iter()
        .map(|name| col(name))
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let cell = |i: usize| record.get(idx[i]).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            cell(i)
                .parse()
                .map_err(|_| parse_err(&label, format!("bad number {:?}", cell(i))))
        };
        out.push(ResultRow {
            scenario: cell(0).to_string(),
            mode: cell(1).to_string(),
            gamma: num(2)?,
            objective: num(3)?,
            parcel_latency_min: num(4)?,
            societal_latency_min: num(5)?,
            operational_cost: num(6)?,
            trucks_per_hour: num(7)?,
            truck_parcels_per_hour: num(8)?,
            drone_parcels_per_hour: num(9)?,
            iterations: cell(10)
                .parse()
                .map_err(|_| parse_err(&label, format!("bad iteration count {:?}", cell(10))))?,
            kkt_residual: num(11)?,
            path_flows: unpack_pairs(cell(12), &label)?
                .into_iter()
                .map(|(k, v)| {
                    k.parse::<usize>()
                        .map(|k| (k, v))
                        .map_err(|_| parse_err(&label, format!("bad path index {k:?}")))
                })
                .collect::<Result<_>>()?,
            drone_parcels: unpack_pairs(cell(13), &label)?,
        });
    }
    Ok(out)
}

/// Everything the importer needs. Paths point at the three text files;
/// the remaining fields default to the headline urban configuration: one
/// hub at node "10", 5000 parcels/hour everywhere else, background flow
/// rescaled to 81,000 vehicles/hour, a 50,000 budget, and the network
/// stretched so its longer axis spans 12 km.
#[derive(Debug, Clone)]
pub struct ImportOptions {
    pub net: PathBuf,
    pub nodes: PathBuf,
    pub flows: PathBuf,
    pub name: String,
    pub hub: String,
    pub demand_per_node: f64,
    pub beta: f64,
    pub cost_cap: f64,
    pub extent_km: f64,
    pub parcels_per_truck: u32,
    pub truck_cost: f64,
    pub drone_cost: f64,
    pub drone_speed_kmh: f64,
    /// Edges with capacity strictly above this are treated as three-lane.
    pub three_lane_capacity: f64,
}

impl ImportOptions {
    pub fn new(net: PathBuf, nodes: PathBuf, flows: PathBuf) -> Self {
        Self {
            net,
            nodes,
            flows,
            name: "imported".into(),
            hub: "10".into(),
            demand_per_node: 5000.0,
            beta: 81_000.0,
            cost_cap: 50_000.0,
            extent_km: 12.0,
            parcels_per_truck: 125,
            truck_cost: 30.0,
            drone_cost: 0.5,
            drone_speed_kmh: 25.0,
            three_lane_capacity: 10_000.0,
        }
    }
}

/// Data rows of a whitespace-separated text file, with comment (`~`),
/// metadata (`<...>`) and header lines skipped. Yields (line number,
/// fields) with any trailing `;` dropped.
fn data_rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let trimmed = line.trim();
        let first = trimmed.chars().next()?;
        if !(first.is_ascii_digit() || first == '-') {
            return None;
        }
        let fields: Vec<&str> = trimmed
            .split_whitespace()
            .take_while(|tok| *tok != ";")
            .map(|tok| tok.trim_end_matches(';'))
            .filter(|tok| !tok.is_empty())
            .collect();
        Some((i + 1, fields))
    })
}

fn field<T: std::str::FromStr>(
    fields: &[&str],
    idx: usize,
    file: &str,
    line: usize,
    what: &str,
) -> Result<T> {
    fields
        .get(idx)
        .and_then(|tok| tok.parse().ok())
        .ok_or_else(|| Error::Parse {
            file: file.to_string(),
            line,
            message: format!("missing or malformed {what}"),
        })
}

/// Builds a scenario from the three-text-file network format: topology and
/// capacities from the net file, coordinates from the node file, and an
/// equilibrium flow pattern from the flow file.
///
/// Capacities pick each edge's lane class; coordinates (rescaled so the
/// longer axis spans `extent_km`) give road lengths and drone flight
/// times; the flow pattern, rescaled to sum to `beta`, becomes the
/// background traffic. Every non-hub node gets the uniform demand and a
/// drone corridor.
pub fn import_tntp(opts: &ImportOptions) -> Result<Scenario> {
    let node_label = opts.nodes.display().to_string();
    let node_text = fs::read_to_string(&opts.nodes)?;
    let mut names = Vec::new();
    let mut raw_pos = Vec::new();
    let mut ids = HashMap::new();
    for (line, fields) in data_rows(&node_text) {
        let id: String = field(&fields, 0, &node_label, line, "node id")?;
        let x: f64 = field(&fields, 1, &node_label, line, "x coordinate")?;
        let y: f64 = field(&fields, 2, &node_label, line, "y coordinate")?;
        if ids.insert(id.clone(), NodeId(names.len() as u32)).is_some() {
            return Err(Error::Parse {
                file: node_label,
                line,
                message: format!("duplicate node {id:?}"),
            });
        }
        names.push(id);
        raw_pos.push((x, y));
    }
    if names.is_empty() {
        return Err(parse_err(&node_label, "no node rows found"));
    }

    // Rescale raw coordinates so the longer bounding-box side spans
    // `extent_km`.
    let (min_x, max_x) = raw_pos
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.0), hi.max(p.0))
        });
    let (min_y, max_y) = raw_pos
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.1), hi.max(p.1))
        });
    let span = (max_x - min_x).max(max_y - min_y);
    if !(span.is_finite() && span > 0.0) {
        return Err(parse_err(
            &node_label,
            "degenerate coordinates: zero extent",
        ));
    }
    let km_per_unit = opts.extent_km / span;
    let positions: Vec<(f64, f64)> = raw_pos
        .iter()
        .map(|p| ((p.0 - min_x) * km_per_unit, (p.1 - min_y) * km_per_unit))
        .collect();
    let dist = |a: NodeId, b: NodeId| -> f64 {
        let (xa, ya) = positions[a.index()];
        let (xb, yb) = positions[b.index()];
        ((xa - xb).powi(2) + (ya - yb).powi(2)).sqrt()
    };

    let hub = *ids
        .get(&opts.hub)
        .ok_or_else(|| parse_err(&node_label, format!("hub {:?} not in node file", opts.hub)))?;

    let flow_label = opts.flows.display().to_string();
    let flow_text = fs::read_to_string(&opts.flows)?;
    let mut volumes = HashMap::new();
    for (line, fields) in data_rows(&flow_text) {
        let from: String = field(&fields, 0, &flow_label, line, "from node")?;
        let to: String = field(&fields, 1, &flow_label, line, "to node")?;
        let volume: f64 = field(&fields, 2, &flow_label, line, "volume")?;
        volumes.insert((from, to), volume);
    }

    let net_label = opts.net.display().to_string();
    let net_text = fs::read_to_string(&opts.net)?;
    struct RawEdge {
        from: NodeId,
        to: NodeId,
        lanes: u8,
        length_km: f64,
        volume: f64,
    }
    let mut raw_edges = Vec::new();
    for (line, fields) in data_rows(&net_text) {
        let from_name: String = field(&fields, 0, &net_label, line, "init node")?;
        let to_name: String = field(&fields, 1, &net_label, line, "term node")?;
        let capacity: f64 = field(&fields, 2, &net_label, line, "capacity")?;
        let lookup = |name: &str| {
            ids.get(name).copied().ok_or_else(|| Error::Parse {
                file: net_label.clone(),
                line,
                message: format!("edge endpoint {name:?} not in node file"),
            })
        };
        let from = lookup(&from_name)?;
        let to = lookup(&to_name)?;
        let volume = *volumes
            .get(&(from_name.clone(), to_name.clone()))
            .ok_or_else(|| Error::Parse {
                file: flow_label.clone(),
                line,
                message: format!("no flow row for edge {from_name} -> {to_name}"),
            })?;
        raw_edges.push(RawEdge {
            from,
            to,
            lanes: if capacity > opts.three_lane_capacity {
                3
            } else {
                2
            },
            length_km: dist(from, to),
            volume,
        });
    }
    if raw_edges.is_empty() {
        return Err(parse_err(&net_label, "no edge rows found"));
    }

    let total_volume: f64 = raw_edges.iter().map(|e| e.volume).sum();
    if !(total_volume.is_finite() && total_volume > 0.0) {
        return Err(parse_err(&flow_label, "flow volumes sum to zero"));
    }
    let scale = opts.beta / total_volume;

    let mut road_edges = Vec::new();
    for (i, e) in raw_edges.iter().enumerate() {
        road_edges.push(RoadEdge {
            id: EdgeId(i as u32),
            from: e.from,
            to: e.to,
            length_km: e.length_km,
            lanes: e.lanes,
            nominal_flow: e.volume * scale,
            plane: reference_plane(e.lanes, e.length_km)?,
        });
    }

    let aerial_edges = (0..names.len())
        .map(|v| NodeId(v as u32))
        .filter(|v| *v != hub)
        .map(|v| {
            Ok(AerialEdge {
                from: hub,
                to: v,
                latency_hours: aerial_latency(dist(hub, v), opts.drone_speed_kmh)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let demand = (0..names.len())
        .map(|v| {
            if NodeId(v as u32) == hub {
                0.0
            } else {
                opts.demand_per_node
            }
        })
        .collect();

    Ok(Scenario {
        name: opts.name.clone(),
        network: Network {
            names,
            hub,
            road_edges,
            aerial_edges,
            demand,
            constants: Constants {
                parcels_per_truck: opts.parcels_per_truck,
                truck_cost: opts.truck_cost,
                drone_cost: opts.drone_cost,
                beta: opts.beta,
                cost_cap: opts.cost_cap,
                drone_speed_kmh: opts.drone_speed_kmh,
            },
        },
        positions: positions.into_iter().map(Some).collect(),
    })
}

/// The bundled four-node walkthrough scenario: a hub, three demand nodes,
/// six road edges (two of them three-lane), drone corridors everywhere.
/// Small enough to check by hand, rich enough to exercise every feature.
pub fn example_scenario() -> Scenario {
    let positions: [(f64, f64); 4] = [(0.0, 0.0), (1.2, 1.6), (0.3, 0.4), (0.6, 0.8)];
    let demand = vec![0.0, 2000.0, 1500.0, 1500.0];
    let constants = Constants {
        parcels_per_truck: 125,
        truck_cost: 30.0,
        drone_cost: 0.5,
        beta: 14_000.0,
        cost_cap: 3000.0,
        drone_speed_kmh: 25.0,
    };

    // (from, to, length_km, lanes, nominal_flow); lengths are at least the
    // straight-line distances between the coordinates above.
    let edge_specs: [(u32, u32, f64, u8, f64); 6] = [
        (0, 1, 2.0, 3, 4600.0),
        (0, 2, 0.5, 2, 2400.0),
        (1, 3, 1.0, 3, 3400.0),
        (2, 3, 0.5, 2, 1800.0),
        (1, 2, 1.5, 2, 1000.0),
        (2, 1, 1.5, 2, 800.0),
    ];
    let road_edges = edge_specs
        .iter()
        .enumerate()
        .map(
            |(i, &(from, to, length_km, lanes, nominal_flow))| RoadEdge {
                id: EdgeId(i as u32),
                from: NodeId(from),
                to: NodeId(to),
                length_km,
                lanes,
                nominal_flow,
                plane: reference_plane(lanes, length_km).unwrap(),
            },
        )
        .collect();

    let aerial_edges = (1..4)
        .map(|v| {
            let (x, y) = positions[v];
            AerialEdge {
                from: NodeId(0),
                to: NodeId(v as u32),
                latency_hours: aerial_latency(x.hypot(y), constants.drone_speed_kmh).unwrap(),
            }
        })
        .collect();

    Scenario {
        name: "example".into(),
        network: Network {
            names: (0..4).map(|v| format!("v{v}")).collect(),
            hub: NodeId(0),
            road_edges,
            aerial_edges,
            demand,
            constants,
        },
        positions: positions.iter().copied().map(Some).collect(),
    }
}

/// The example scenario's network alone.
pub fn example_network() -> Network {
    example_scenario().network
}
