//! Enumeration of candidate truck routes.
//!
//! A route is a simple directed path out of the hub with at most
//! `max_edges` edges; every prefix of a route is itself a route, so a
//! single depth-first sweep lists them all. Visiting neighbours in sorted
//! order makes the listing deterministic: paths come out in lexicographic
//! order of their node sequences, and a path's index in the listing is its
//! identity everywhere else in the crate (flow vectors, QP columns, CSV
//! output).

use crate::model::{EdgeId, Network, NodeId};
use crate::{Error, Result};

/// Default ceiling on the number of enumerated paths. Sized so that a
/// runaway cap on a dense graph fails fast instead of filling memory.
pub const DEFAULT_PATH_LIMIT: usize = 1_000_000;

/// One simple truck route from the hub.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    /// Road edges in traversal order.
    pub edges: Vec<EdgeId>,
    /// Final node; the parcels on this route are for it.
    pub destination: NodeId,
}

impl Path {
    /// Node sequence including the hub.
    pub fn nodes(&self, net: &Network) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.edges.len() + 1);
        out.push(net.hub);
        for e in &self.edges {
            out.push(net.road_edges[e.index()].to);
        }
        out
    }
}

/// All enumerated routes plus the lookup tables the rest of the crate
/// leans on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSet {
    pub paths: Vec<Path>,
    /// Path indices ending at each node.
    pub by_destination: Vec<Vec<usize>>,
    /// Path indices traversing each road edge.
    pub by_edge: Vec<Vec<usize>>,
    /// The edge cap the set was enumerated under.
    pub max_edges: usize,
    /// Non-hub nodes no route reaches within the cap. Not fatal by itself:
    /// drones may still serve them.
    pub unreachable: Vec<NodeId>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Enumerates every simple path out of the hub with at most `max_edges`
/// edges, in lexicographic node-sequence order. `limit` guards against
/// path explosion; `None` uses [`DEFAULT_PATH_LIMIT`].
pub fn enumerate_paths(net: &Network, max_edges: usize, limit: Option<usize>) -> Result<PathSet> {
    let n = net.node_count();
    if net.hub.index() >= n {
        return Err(Error::Domain(format!(
            "hub {} out of range for {n} nodes",
            net.hub
        )));
    }
    let limit = limit.unwrap_or(DEFAULT_PATH_LIMIT);
    let adj = net.road_out();

    let mut walk = Walk {
        adj: &adj,
        max_edges,
        limit,
        on_path: vec![false; n],
        current: Vec::new(),
        paths: Vec::new(),
    };
    walk.on_path[net.hub.index()] = true;
    walk.descend(net.hub, 0)?;
    let paths = walk.paths;

    let mut by_destination = vec![Vec::new(); n];
    let mut by_edge = vec![Vec::new(); net.road_edges.len()];
    for (p, path) in paths.iter().enumerate() {
        by_destination[path.destination.index()].push(p);
        for e in &path.edges {
            by_edge[e.index()].push(p);
        }
    }
    let unreachable = (0..n)
        .map(|v| NodeId(v as u32))
        .filter(|v| *v != net.hub && by_destination[v.index()].is_empty())
        .collect();

    Ok(PathSet {
        paths,
        by_destination,
        by_edge,
        max_edges,
        unreachable,
    })
}

struct Walk<'a> {
    adj: &'a [Vec<(NodeId, EdgeId)>],
    max_edges: usize,
    limit: usize,
    on_path: Vec<bool>,
    current: Vec<EdgeId>,
    paths: Vec<Path>,
}

impl Walk<'_> {
    /// Records the path to every neighbour before recursing into it, so
    /// the output order is the lexicographic order of node sequences.
    fn descend(&mut self, v: NodeId, depth: usize) -> Result<()> {
        if depth == self.max_edges {
            return Ok(());
        }
        for &(w, e) in &self.adj[v.index()] {
            if self.on_path[w.index()] {
                continue;
            }
            if self.paths.len() == self.limit {
                return Err(Error::TooManyPaths { limit: self.limit });
            }
            self.current.push(e);
            self.on_path[w.index()] = true;
            self.paths.push(Path {
                edges: self.current.clone(),
                destination: w,
            });
            self.descend(w, depth + 1)?;
            self.on_path[w.index()] = false;
            self.current.pop();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latency::LatencyPlane;
    use crate::model::{Constants, RoadEdge};

    /// Bare network: nodes "0".."n-1", hub 0, given directed edges, no
    /// demand, placeholder constants.
    fn net(n: usize, edges: &[(u32, u32)]) -> Network {
        let plane = LatencyPlane::new(0.1, 0.01, 0.001);
        Network {
            names: (0..n).map(|v| v.to_string()).collect(),
            hub: NodeId(0),
            road_edges: edges
                .iter()
                .enumerate()
                .map(|(i, &(a, b))| RoadEdge {
                    id: EdgeId(i as u32),
                    from: NodeId(a),
                    to: NodeId(b),
                    length_km: 1.0,
                    lanes: 2,
                    nominal_flow: 1.0,
                    plane,
                })
                .collect(),
            aerial_edges: Vec::new(),
            demand: vec![0.0; n],
            constants: Constants {
                parcels_per_truck: 100,
                truck_cost: 1.0,
                drone_cost: 1.0,
                beta: edges.len() as f64,
                cost_cap: 1.0,
                drone_speed_kmh: 25.0,
            },
        }
    }

    fn node_seqs(net: &Network, ps: &PathSet) -> Vec<Vec<u32>> {
        ps.paths
            .iter()
            .map(|p| p.nodes(net).iter().map(|v| v.0).collect())
            .collect()
    }

    #[test]
    fn diamond_without_crossbar_has_four_paths() {
        // 0->1, 0->2, 1->3, 2->3; cap 2 reaches everything.
        let net = net(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]);
        let ps = enumerate_paths(&net, 2, None).unwrap();
        assert_eq!(
            node_seqs(&net, &ps),
            vec![vec![0, 1], vec![0, 1, 3], vec![0, 2], vec![0, 2, 3]]
        );
        assert!(ps.unreachable.is_empty());
    }

    #[test]
    fn listing_is_lexicographic_in_node_sequences() {
        let net = net(4, &[(0, 1), (0, 2), (1, 3), (2, 3), (1, 2)]);
        let ps = enumerate_paths(&net, 8, None).unwrap();
        let seqs = node_seqs(&net, &ps);
        assert_eq!(
            seqs,
            vec![
                vec![0, 1],
                vec![0, 1, 2],
                vec![0, 1, 2, 3],
                vec![0, 1, 3],
                vec![0, 2],
                vec![0, 2, 3],
            ]
        );
        let mut sorted = seqs.clone();
        sorted.sort();
        assert_eq!(seqs, sorted);
    }

    #[test]
    fn cap_truncates_and_reports_unreachable() {
        let net = net(4, &[(0, 1), (0, 2), (1, 3), (2, 3), (1, 2)]);
        let ps = enumerate_paths(&net, 1, None).unwrap();
        assert_eq!(node_seqs(&net, &ps), vec![vec![0, 1], vec![0, 2]]);
        assert_eq!(ps.unreachable, vec![NodeId(3)]);

        let none = enumerate_paths(&net, 0, None).unwrap();
        assert!(none.is_empty());
        assert_eq!(none.unreachable.len(), 3);
    }

    #[test]
    fn paths_are_simple() {
        // A cycle 0->1->2->0 plus chords; no node may repeat.
        let net = net(3, &[(0, 1), (1, 2), (2, 0), (0, 2), (2, 1)]);
        let ps = enumerate_paths(&net, 8, None).unwrap();
        for p in &ps.paths {
            let mut nodes = p.nodes(&net);
            nodes.sort();
            nodes.dedup();
            assert_eq!(nodes.len(), p.edges.len() + 1, "repeated node in path");
        }
    }

    #[test]
    fn lookup_tables_match_listing() {
        let net = net(4, &[(0, 1), (0, 2), (1, 3), (2, 3), (1, 2)]);
        let ps = enumerate_paths(&net, 8, None).unwrap();
        for (p, path) in ps.paths.iter().enumerate() {
            assert!(ps.by_destination[path.destination.index()].contains(&p));
            for e in &path.edges {
                assert!(ps.by_edge[e.index()].contains(&p));
            }
        }
        let listed: usize = ps.by_destination.iter().map(Vec::len).sum();
        assert_eq!(listed, ps.len());
    }

    #[test]
    fn explosion_guard_trips() {
        // Complete digraph on 6 nodes has far more than 20 short paths.
        let mut edges = Vec::new();
        for a in 0..6u32 {
            for b in 0..6u32 {
                if a != b {
                    edges.push((a, b));
                }
            }
        }
        let net = net(6, &edges);
        match enumerate_paths(&net, 5, Some(20)) {
            Err(Error::TooManyPaths { limit }) => assert_eq!(limit, 20),
            other => panic!("expected explosion guard, got {other:?}"),
        }
    }

    #[test]
    fn enumeration_is_deterministic() {
        let net = net(4, &[(0, 1), (0, 2), (1, 3), (2, 3), (1, 2), (2, 1)]);
        let a = enumerate_paths(&net, 8, None).unwrap();
        let b = enumerate_paths(&net, 8, None).unwrap();
        assert_eq!(a, b);
    }
}
