//! Bottom-up comparator: consumers start as singleton clusters and are
//! merged along Delaunay arcs, shortest first, whenever being electrified
//! together is cheaper than apart. A first phase merges off-grid clusters;
//! a second connects clusters to the grid, alone or jointly.
//!
//! Deliberately simpler than a full planning tool. Arcs are
//! straight lines priced with the cheapest adequate conductor for the
//! lighter side, and a grid cluster is fed by a spur from its member
//! nearest to the grid point.

use serde::Serialize;

use crate::costmodel::{cnse, grid_energy_cost, line_cost, transformer_cost, Catalog, CostConfig};
use crate::delaunay::{build_delaunay, Arc, DuplicatePolicy};
use crate::error::{Error, Result};
use crate::netmodel::{Load, NetworkTree, NodeId};
use crate::offgrid::OffgridSystem;
use crate::partitioner::{all_grid_cost, offgrid_system_cost, Method, PartitionResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// Two off-grid clusters merged.
    Offgrid,
    /// A cluster connected to the grid on its own.
    Connect,
    /// Two clusters merged into one grid-connected cluster.
    GridMerge,
}

/// One accepted step of the agglomeration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeEvent {
    pub phase: Phase,
    pub pass: usize,
    pub a: NodeId,
    /// `None` for a lone connection.
    pub b: Option<NodeId>,
    pub length_km: f64,
    pub cost_before: f64,
    pub cost_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Cluster {
    members: Vec<usize>,
    load: Load,
    network_usd_yr: f64,
    grid: bool,
    /// Distance from the nearest member to the grid point.
    grid_distance_km: f64,
    cost: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterView {
    /// Lowest consumer id in the cluster.
    pub representative: NodeId,
    /// Ascending.
    pub consumers: Vec<NodeId>,
    pub grid: bool,
}

/// Clusters of consumers joined by active arcs.
#[derive(Debug, Clone)]
pub struct ClusterState {
    consumers: Vec<NodeId>,
    positions: Vec<(f64, f64)>,
    loads: Vec<Load>,
    /// Sorted ascending by length; endpoints are consumer node ids.
    arcs: Vec<Arc>,
    ends: Vec<(usize, usize)>,
    active: Vec<bool>,
    parent: Vec<usize>,
    clusters: Vec<Option<Cluster>>,
    grid_point: (f64, f64),
    passes: usize,
    pub merges: Vec<MergeEvent>,
}

const INFEASIBLE: f64 = f64::INFINITY;

fn finite(r: Result<f64>) -> f64 {
    r.unwrap_or(INFEASIBLE)
}

impl ClusterState {
    /// Singleton clusters over the tree's consumers, connected by their
    /// Delaunay arcs. The grid point is the root's location.
    pub fn new(tree: &NetworkTree, duplicates: DuplicatePolicy) -> Result<Self> {
        let points: Vec<_> = tree
            .consumer_ids
            .iter()
            .map(|&c| {
                let (x, y) = tree.node(c).location;
                (c, x, y)
            })
            .collect();
        let arcs = build_delaunay(&points, duplicates).map_err(|e| match e {
            Error::DuplicatePoints(a, b) => Error::DuplicatePoints(tree.label(a as usize), tree.label(b as usize)),
            e => e,
        })?;
        Self::with_arcs(tree, arcs)
    }

    /// Singleton clusters with a caller-supplied arc list, scanned in the
    /// given order.
    pub fn with_arcs(tree: &NetworkTree, arcs: Vec<Arc>) -> Result<Self> {
        let consumers = tree.consumer_ids.clone();
        let mut slot = vec![usize::MAX; tree.len()];
        for (k, &c) in consumers.iter().enumerate() {
            slot[c] = k;
        }
        let mut ends = Vec::with_capacity(arcs.len());
        for a in &arcs {
            let ka = slot.get(a.a).copied().unwrap_or(usize::MAX);
            let kb = slot.get(a.b).copied().unwrap_or(usize::MAX);
            if ka == usize::MAX || kb == usize::MAX || ka == kb {
                return Err(Error::InvalidNode {
                    node: a.a as u64,
                    reason: "arc must join two distinct consumers".into(),
                });
            }
            ends.push((ka, kb));
        }
        let n = consumers.len();
        let positions: Vec<_> = consumers.iter().map(|&c| tree.node(c).location).collect();
        let loads: Vec<_> = consumers.iter().map(|&c| tree.node(c).load()).collect();
        Ok(ClusterState {
            consumers,
            positions,
            loads,
            active: vec![false; arcs.len()],
            arcs,
            ends,
            parent: (0..n).collect(),
            clusters: vec![None; n],
            grid_point: tree.node(tree.root).location,
            passes: 0,
            merges: Vec::new(),
        })
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn active_arcs(&self) -> impl Iterator<Item = &Arc> {
        self.arcs.iter().zip(&self.active).filter(|(_, &on)| on).map(|(a, _)| a)
    }

    pub fn set_grid_point(&mut self, point: (f64, f64)) {
        self.grid_point = point;
        let positions = &self.positions;
        for c in self.clusters.iter_mut().flatten() {
            c.grid_distance_km = c
                .members
                .iter()
                .map(|&k| (positions[k].0 - point.0).hypot(positions[k].1 - point.1))
                .fold(f64::INFINITY, f64::min);
        }
    }

    fn find(&mut self, mut k: usize) -> usize {
        while self.parent[k] != k {
            self.parent[k] = self.parent[self.parent[k]];
            k = self.parent[k];
        }
        k
    }

    /// Cluster representative (lowest member consumer id) for each consumer,
    /// in consumer order.
    pub fn assignment(&mut self) -> Vec<NodeId> {
        (0..self.consumers.len())
            .map(|k| {
                let r = self.find(k);
                self.consumers[r]
            })
            .collect()
    }

    fn ensure_priced(&mut self, config: &CostConfig, catalog: &Catalog) {
        for k in 0..self.consumers.len() {
            if self.parent[k] == k && self.clusters[k].is_none() {
                let (x, y) = self.positions[k];
                let load = self.loads[k];
                self.clusters[k] = Some(Cluster {
                    members: vec![k],
                    load,
                    network_usd_yr: 0.0,
                    grid: false,
                    grid_distance_km: (x - self.grid_point.0).hypot(y - self.grid_point.1),
                    cost: finite(offgrid_system_cost(&load, 0.0, config, catalog)),
                });
            }
        }
    }

    fn arc_cost(&self, k: usize, ra: usize, rb: usize, config: &CostConfig, catalog: &Catalog) -> f64 {
        let (la, lb) = (self.clusters[ra].as_ref().unwrap().load, self.clusters[rb].as_ref().unwrap().load);
        let lighter = if la.peak_kw <= lb.peak_kw { la } else { lb };
        finite(line_cost(self.arcs[k].length_km, lighter.peak_kw, lighter.annual_kwh, catalog, config))
    }

    fn union(&mut self, k: usize, ra: usize, rb: usize, merged: Cluster) {
        let (keep, gone) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[gone] = keep;
        self.clusters[gone] = None;
        self.clusters[keep] = Some(merged);
        self.active[k] = true;
    }

    fn joined(&self, ra: usize, rb: usize, network_usd_yr: f64, grid: bool) -> Cluster {
        let (a, b) = (self.clusters[ra].as_ref().unwrap(), self.clusters[rb].as_ref().unwrap());
        let mut load = a.load;
        load.add(&b.load);
        let mut members = a.members.clone();
        members.extend_from_slice(&b.members);
        Cluster {
            members,
            load,
            network_usd_yr,
            grid,
            grid_distance_km: a.grid_distance_km.min(b.grid_distance_km),
            cost: 0.0,
        }
    }

    /// One scan of the arcs merging off-grid clusters; returns the number
    /// of arcs activated.
    pub fn offgrid_pass(&mut self, config: &CostConfig, catalog: &Catalog) -> usize {
        self.ensure_priced(config, catalog);
        self.passes += 1;
        let mut activated = 0;
        for k in 0..self.arcs.len() {
            if self.active[k] {
                continue;
            }
            let (ra, rb) = (self.find(self.ends[k].0), self.find(self.ends[k].1));
            if ra == rb {
                continue;
            }
            let (ca, cb) = (self.clusters[ra].as_ref().unwrap(), self.clusters[rb].as_ref().unwrap());
            if ca.grid || cb.grid {
                continue;
            }
            let before = ca.cost + cb.cost;
            let network = ca.network_usd_yr + cb.network_usd_yr + self.arc_cost(k, ra, rb, config, catalog);
            let mut merged = self.joined(ra, rb, network, false);
            merged.cost = finite(offgrid_system_cost(&merged.load, network, config, catalog));
            if merged.cost < before {
                self.merges.push(MergeEvent {
                    phase: Phase::Offgrid,
                    pass: self.passes,
                    a: self.arcs[k].a,
                    b: Some(self.arcs[k].b),
                    length_km: self.arcs[k].length_km,
                    cost_before: before,
                    cost_after: merged.cost,
                });
                self.union(k, ra, rb, merged);
                activated += 1;
            }
        }
        activated
    }

    fn grid_cost(c: &Cluster, config: &CostConfig, catalog: &Catalog) -> f64 {
        let spur = finite(line_cost(c.grid_distance_km, c.load.peak_kw, c.load.annual_kwh, catalog, config));
        let transformer = finite(transformer_cost(c.load.peak_kw, catalog, config));
        spur + transformer
            + c.network_usd_yr
            + grid_energy_cost(c.load.annual_kwh, config)
            + cnse(c.load.annual_kwh, config.grid_reliability, config)
    }

    /// One round of grid connection: lone connections first, then a scan
    /// of inactive arcs for joint connections. Returns the number of
    /// clusters connected plus arcs activated.
    pub fn ongrid_pass(&mut self, config: &CostConfig, catalog: &Catalog) -> usize {
        self.ensure_priced(config, catalog);
        self.passes += 1;
        let mut changed = 0;
        for r in 0..self.clusters.len() {
            let Some(c) = self.clusters[r].as_ref() else { continue };
            if c.grid {
                continue;
            }
            let g = Self::grid_cost(c, config, catalog);
            if g < c.cost {
                let before = c.cost;
                let c = self.clusters[r].as_mut().unwrap();
                c.grid = true;
                c.cost = g;
                self.merges.push(MergeEvent {
                    phase: Phase::Connect,
                    pass: self.passes,
                    a: self.consumers[r],
                    b: None,
                    length_km: c.grid_distance_km,
                    cost_before: before,
                    cost_after: g,
                });
                changed += 1;
            }
        }
        for k in 0..self.arcs.len() {
            if self.active[k] {
                continue;
            }
            let (ra, rb) = (self.find(self.ends[k].0), self.find(self.ends[k].1));
            if ra == rb {
                continue;
            }
            let before = self.clusters[ra].as_ref().unwrap().cost + self.clusters[rb].as_ref().unwrap().cost;
            let network = self.clusters[ra].as_ref().unwrap().network_usd_yr
                + self.clusters[rb].as_ref().unwrap().network_usd_yr
                + self.arc_cost(k, ra, rb, config, catalog);
            let mut merged = self.joined(ra, rb, network, true);
            merged.cost = Self::grid_cost(&merged, config, catalog);
            if merged.cost < before {
                self.merges.push(MergeEvent {
                    phase: Phase::GridMerge,
                    pass: self.passes,
                    a: self.arcs[k].a,
                    b: Some(self.arcs[k].b),
                    length_km: self.arcs[k].length_km,
                    cost_before: before,
                    cost_after: merged.cost,
                });
                self.union(k, ra, rb, merged);
                changed += 1;
            }
        }
        changed
    }

    /// Settled clusters, ordered by representative.
    pub fn clusters(&self) -> Vec<ClusterView> {
        self.live()
            .into_iter()
            .map(|(consumers, c)| ClusterView {
                representative: consumers[0],
                consumers,
                grid: c.grid,
            })
            .collect()
    }

    /// Consumer ids of each live cluster with its mode, ordered by
    /// representative.
    fn live(&self) -> Vec<(Vec<NodeId>, &Cluster)> {
        self.clusters
            .iter()
            .flatten()
            .map(|c| {
                let mut ids: Vec<NodeId> = c.members.iter().map(|&k| self.consumers[k]).collect();
                ids.sort_unstable();
                (ids, c)
            })
            .collect()
    }
}

/// Merges off-grid clusters until a full pass activates nothing.
pub fn agglomerate_offgrid(state: &mut ClusterState, config: &CostConfig, catalog: &Catalog) {
    while state.offgrid_pass(config, catalog) > 0 {}
}

/// Connects clusters to the grid point until a full round changes nothing.
pub fn agglomerate_ongrid(state: &mut ClusterState, grid_point: (f64, f64), config: &CostConfig, catalog: &Catalog) {
    state.set_grid_point(grid_point);
    while state.ongrid_pass(config, catalog) > 0 {}
}

#[derive(Debug, Clone)]
pub struct BottomUpOutcome {
    pub result: PartitionResult,
    pub systems: Vec<OffgridSystem>,
    pub state: ClusterState,
}

/// Runs both agglomeration phases on the tree's consumers, with the root's
/// location as the grid point.
pub fn run_bottom_up(
    tree: &NetworkTree,
    config: &CostConfig,
    catalog: &Catalog,
    duplicates: DuplicatePolicy,
) -> Result<BottomUpOutcome> {
    config.validate()?;
    catalog.validate()?;
    let mut state = ClusterState::new(tree, duplicates)?;
    agglomerate_offgrid(&mut state, config, catalog);
    let grid_point = tree.node(tree.root).location;
    agglomerate_ongrid(&mut state, grid_point, config, catalog);
    let (result, systems) = finish(&state, tree, config, catalog)?;
    Ok(BottomUpOutcome { result, systems, state })
}

/// Turns a settled cluster state into the shared result shape.
pub fn finish(
    state: &ClusterState,
    tree: &NetworkTree,
    config: &CostConfig,
    catalog: &Catalog,
) -> Result<(PartitionResult, Vec<OffgridSystem>)> {
    let (mut grid, mut offgrid) = (0.0, 0.0);
    let (mut on, mut off) = (Vec::new(), Vec::new());
    let mut systems = Vec::new();
    for (ids, c) in state.live() {
        if !c.cost.is_finite() {
            return Err(Error::CapacityExceedsCatalog {
                node: Some(tree.label(ids[0])),
                item: "generation",
                peak_kw: c.load.peak_kw,
            });
        }
        if c.grid {
            grid += c.cost;
            on.extend_from_slice(&ids);
        } else {
            offgrid += c.cost;
            off.extend_from_slice(&ids);
            systems.push(OffgridSystem::priced(None, ids, Vec::new(), c.network_usd_yr, tree, config, catalog)?);
        }
    }
    on.sort_unstable();
    off.sort_unstable();
    let result = PartitionResult {
        method: Method::BottomUp,
        offgrid_consumers: off,
        ongrid_consumers: on,
        pruned_roots: Vec::new(),
        audit: Vec::new(),
        node_status: Vec::new(),
        grid_cost_usd_yr: grid,
        offgrid_cost_usd_yr: offgrid,
        total_cost_usd_yr: grid + offgrid,
        all_grid_cost_usd_yr: all_grid_cost(tree, config, catalog)?,
    };
    Ok((result, systems))
}

#[derive(Debug, Serialize)]
struct MergeRow {
    pass: usize,
    phase: Phase,
    node_a: u64,
    node_b: Option<u64>,
    length_km: f64,
    cost_before: f64,
    cost_after: f64,
}

/// Writes the accepted merges as CSV, in the order they happened.
pub fn write_merges_csv<W: std::io::Write>(state: &ClusterState, tree: &NetworkTree, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if state.merges.is_empty() {
        w.write_record(["pass", "phase", "node_a", "node_b", "length_km", "cost_before", "cost_after"])
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    for m in &state.merges {
        w.serialize(MergeRow {
            pass: m.pass,
            phase: m.phase,
            node_a: tree.label(m.a),
            node_b: m.b.map(|b| tree.label(b)),
            length_km: m.length_km,
            cost_before: m.cost_before,
            cost_after: m.cost_after,
        })
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmodel::{ConductorType, GenerationModel, TransformerType};
    use crate::netmodel::{build_tree, NetworkDoc, NodeKind, NodeRecord, VoltageLevel};

    fn node(id: u64, kind: NodeKind, parent: Option<u64>, x: f64, peak: f64) -> NodeRecord {
        NodeRecord {
            id,
            kind,
            parent,
            length_km: if kind == NodeKind::LineSegment { 0.1 } else { 0.0 },
            x_km: x,
            y_km: 0.0,
            voltage: VoltageLevel::Lv,
            peak_kw: peak,
            annual_kwh: peak * 2000.0,
            profile_id: None,
        }
    }

    /// Root at x = 0; consumer i at `xs[i]`, each behind its own line.
    fn star(xs: &[f64]) -> NetworkTree {
        let mut nodes = vec![node(0, NodeKind::Transformer, None, 0.0, 0.0)];
        for (i, &x) in xs.iter().enumerate() {
            let line = 1 + 2 * i as u64;
            nodes.push(node(line, NodeKind::LineSegment, Some(0), x, 0.0));
            nodes.push(node(line + 1, NodeKind::Consumer, Some(line), x, 1.0));
        }
        build_tree(&NetworkDoc {
            nodes,
            profiles: Default::default(),
        })
        .unwrap()
    }

    fn catalog(conductor_usd_per_km: f64) -> Catalog {
        let mut generation = GenerationModel::diesel_only(400.0, 0.3, 10.0);
        generation.diesel_fixed_capex_usd = 3000.0;
        Catalog {
            conductors: vec![ConductorType {
                capacity_kw: 1000.0,
                capex_usd_per_km: conductor_usd_per_km,
                lifetime_yr: 30.0,
            }],
            transformers: vec![TransformerType {
                capacity_kw: 1000.0,
                capex_usd: 1000.0,
                lifetime_yr: 25.0,
            }],
            generation,
            lookup: None,
        }
    }

    fn offgrid_only(xs: &[f64], cat: &Catalog) -> ClusterState {
        let t = star(xs);
        let mut s = ClusterState::new(&t, DuplicatePolicy::Perturb).unwrap();
        agglomerate_offgrid(&mut s, &CostConfig::default(), cat);
        s
    }

    #[test]
    fn coincident_consumers_merge() {
        let mut s = offgrid_only(&[50.0, 50.0], &catalog(10_000.0));
        let a = s.assignment();
        assert_eq!(a[0], a[1]);
        assert_eq!(s.active_arcs().count(), 1);
    }

    #[test]
    fn distant_consumers_stay_apart() {
        let mut s = offgrid_only(&[50.0, 950.0], &catalog(10_000.0));
        let a = s.assignment();
        assert_ne!(a[0], a[1]);
        assert_eq!(s.offgrid_pass(&CostConfig::default(), &catalog(10_000.0)), 0);
    }

    #[test]
    fn consumer_next_to_grid_connects() {
        let t = star(&[0.01]);
        let cat = catalog(1000.0);
        let out = run_bottom_up(&t, &CostConfig::default(), &cat, DuplicatePolicy::Reject).unwrap();
        assert_eq!(out.result.ongrid_consumers, vec![2]);
        assert!(out.result.offgrid_consumers.is_empty());
    }

    #[test]
    fn far_consumers_stay_offgrid() {
        let t = star(&[1000.0, 1000.5, 1001.0]);
        let mut cat = catalog(20_000.0);
        cat.generation.diesel_fixed_capex_usd = 0.0;
        cat.generation.diesel_capex_usd_per_kw = 10.0;
        let out = run_bottom_up(&t, &CostConfig::default(), &cat, DuplicatePolicy::Reject).unwrap();
        assert_eq!(out.result.offgrid_consumers.len(), 3);
        assert!(out.result.check_partition(&t).is_empty());
    }

    #[test]
    fn each_merge_saves_and_fixpoint_is_stable() {
        let xs: Vec<f64> = (0..10).map(|i| 5.0 + 0.3 * i as f64).collect();
        let t = star(&xs);
        let cat = catalog(4000.0);
        let cfg = CostConfig::default();
        let mut out = run_bottom_up(&t, &cfg, &cat, DuplicatePolicy::Reject).unwrap();
        assert!(out.state.merges.iter().all(|m| m.cost_after < m.cost_before));
        assert_eq!(out.state.offgrid_pass(&cfg, &cat), 0);
        assert_eq!(out.state.ongrid_pass(&cfg, &cat), 0);
        let summary = crate::offgrid::summarize(&out.systems, &out.result).unwrap();
        assert_eq!(summary.all.customers, 10);
    }
}
