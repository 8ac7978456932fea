//! GeoJSON maps of a partition. Coordinates are the input's planar
//! kilometres, written as-is.

use serde::Serialize;

use crate::baseline::ClusterState;
use crate::netmodel::{NetworkTree, NodeId, NodeKind};
use crate::offgrid::{OffgridSystem, SystemKind};
use crate::partitioner::{NodeStatus, PartitionResult};

#[derive(Serialize)]
struct Collection {
    #[serde(rename = "type")]
    kind: &'static str,
    features: Vec<Feature>,
}

#[derive(Serialize)]
struct Feature {
    #[serde(rename = "type")]
    kind: &'static str,
    geometry: Geometry,
    properties: Properties,
}

#[derive(Serialize)]
#[serde(tag = "type", content = "coordinates")]
enum Geometry {
    Point([f64; 2]),
    LineString(Vec<[f64; 2]>),
}

#[derive(Serialize)]
struct Properties {
    id: u64,
    kind: NodeKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    status: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    system: Option<u64>,
}

fn at(tree: &NetworkTree, id: NodeId) -> [f64; 2] {
    let (x, y) = tree.node(id).location;
    [x, y]
}

fn mode_of(kind: SystemKind) -> &'static str {
    match kind {
        SystemKind::Microgrid => "microgrid",
        SystemKind::Isolated => "isolated",
    }
}

fn point(tree: &NetworkTree, id: NodeId, mode: &'static str, system: Option<u64>) -> Feature {
    Feature {
        kind: "Feature",
        geometry: Geometry::Point(at(tree, id)),
        properties: Properties {
            id: tree.label(id),
            kind: NodeKind::Consumer,
            mode: Some(mode),
            status: None,
            system,
        },
    }
}

fn finish(features: Vec<Feature>) -> String {
    let mut s = serde_json::to_string_pretty(&Collection {
        kind: "FeatureCollection",
        features,
    })
    .expect("map serializes");
    s.push('\n');
    s
}

/// Map of a top-down run: consumers coloured by mode, every line segment
/// from its parent's location to its own with its fate.
pub fn topdown_map(tree: &NetworkTree, result: &PartitionResult, systems: &[OffgridSystem]) -> String {
    let mut kind_of = vec![None; tree.len()];
    for s in systems {
        if let Some(r) = s.root {
            kind_of[r] = Some(s.kind);
        }
    }
    let mut features = Vec::new();
    for n in &tree.nodes {
        let status = result.node_status.get(n.id).copied().unwrap_or(NodeStatus::Grid);
        if n.is_consumer() {
            let (mode, system) = match status {
                NodeStatus::Offgrid { system } => (
                    kind_of[system].map_or("microgrid", mode_of),
                    Some(tree.label(system)),
                ),
                NodeStatus::PrunedRoot => (kind_of[n.id].map_or("isolated", mode_of), Some(n.label)),
                _ => ("grid", None),
            };
            features.push(point(tree, n.id, mode, system));
        } else if n.kind == NodeKind::LineSegment {
            let Some(p) = n.parent else { continue };
            let (status, system) = match status {
                NodeStatus::Grid => ("grid", None),
                NodeStatus::Offgrid { system } => ("microgrid", Some(tree.label(system))),
                NodeStatus::PrunedRoot | NodeStatus::Removed => ("pruned-removed", None),
            };
            features.push(Feature {
                kind: "Feature",
                geometry: Geometry::LineString(vec![at(tree, p), at(tree, n.id)]),
                properties: Properties {
                    id: n.label,
                    kind: NodeKind::LineSegment,
                    mode: None,
                    status: Some(status),
                    system,
                },
            });
        }
    }
    finish(features)
}

/// Map of a bottom-up run: consumers coloured by mode and the active arcs
/// that joined them.
pub fn bottomup_map(tree: &NetworkTree, state: &ClusterState) -> String {
    let mut cluster = vec![None; tree.len()];
    let mut features = Vec::new();
    let views = state.clusters();
    for v in &views {
        for &c in &v.consumers {
            cluster[c] = Some((v.representative, v.grid, v.consumers.len()));
        }
    }
    for &c in &tree.consumer_ids {
        let (rep, grid, size) = cluster[c].expect("every consumer is clustered");
        let mode = match (grid, size) {
            (true, _) => "grid",
            (false, 1) => "isolated",
            (false, _) => "microgrid",
        };
        features.push(point(tree, c, mode, (!grid).then(|| tree.label(rep))));
    }
    for a in state.active_arcs() {
        let (rep, grid, _) = cluster[a.a].expect("arc ends are consumers");
        features.push(Feature {
            kind: "Feature",
            geometry: Geometry::LineString(vec![at(tree, a.a), at(tree, a.b)]),
            properties: Properties {
                id: tree.label(a.a),
                kind: NodeKind::LineSegment,
                mode: None,
                status: Some(if grid { "grid" } else { "microgrid" }),
                system: (!grid).then(|| tree.label(rep)),
            },
        });
    }
    finish(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{build_tree, NetworkDoc, NodeRecord, VoltageLevel};

    #[test]
    fn all_grid_map_shape() {
        let rec = |id, kind, parent, len| NodeRecord {
            id,
            kind,
            parent,
            length_km: len,
            x_km: id as f64,
            y_km: 1.0,
            voltage: VoltageLevel::Lv,
            peak_kw: 1.0,
            annual_kwh: 100.0,
            profile_id: None,
        };
        let tree = build_tree(&NetworkDoc {
            nodes: vec![
                rec(10, NodeKind::Transformer, None, 0.0),
                rec(11, NodeKind::LineSegment, Some(10), 1.0),
                rec(12, NodeKind::Consumer, Some(11), 0.0),
            ],
            profiles: Default::default(),
        })
        .unwrap();
        let result = PartitionResult {
            method: crate::partitioner::Method::TopDown,
            offgrid_consumers: vec![],
            ongrid_consumers: vec![2],
            pruned_roots: vec![],
            audit: vec![],
            node_status: vec![NodeStatus::Grid; 3],
            grid_cost_usd_yr: 0.0,
            offgrid_cost_usd_yr: 0.0,
            total_cost_usd_yr: 0.0,
            all_grid_cost_usd_yr: 0.0,
        };
        let map: serde_json::Value = serde_json::from_str(&topdown_map(&tree, &result, &[])).unwrap();
        assert_eq!(map["type"], "FeatureCollection");
        let f = map["features"].as_array().unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f[0]["geometry"]["type"], "LineString");
        assert_eq!(f[0]["geometry"]["coordinates"], serde_json::json!([[10.0, 1.0], [11.0, 1.0]]));
        assert_eq!(f[0]["properties"]["status"], "grid");
        assert_eq!(f[1]["properties"]["mode"], "grid");
        assert_eq!(f[1]["properties"]["id"], 12);
    }
}
