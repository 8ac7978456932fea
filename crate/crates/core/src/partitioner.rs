//! Greedy top-down partitioning of the network tree.
//!
//! Nodes are visited bottom-up (a node only after all of its descendants),
//! highest moments first among the eligible ones. At each node the decision
//! value δ = γ + η + ω − β − τ − ζ − σ is evaluated against the current tree
//! state and the subtree is pruned off-grid when δ < 0. Pruning is
//! irreversible and each node is visited once.
//!
//! A prune also removes every ancestor left without a downstream consumer:
//! such an element no longer serves anyone and its whole self cost is part
//! of the upstream savings β.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::costmodel::{
    cnse, element_cost, element_self_cost, generation_cost, grid_energy_cost, Catalog, CostConfig,
    DeltaBreakdown,
};
use crate::error::{Error, Result};
use crate::netmodel::{Load, NetworkTree, NodeId, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TopDown,
    BottomUp,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::TopDown => "top-down",
            Method::BottomUp => "bottom-up",
        }
    }
}

/// Where a node ended up after a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    /// Still part of the grid.
    Grid,
    /// A cut point: its element is removed and the subtree below goes
    /// off-grid as one system.
    PrunedRoot,
    /// Reused network element or consumer of the system cut at `system`.
    Offgrid { system: NodeId },
    /// Dropped from the grid because nothing downstream is served any more.
    Removed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditEntry {
    pub node: NodeId,
    pub breakdown: DeltaBreakdown,
    pub pruned: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionResult {
    pub method: Method,
    /// Ascending consumer ids.
    pub offgrid_consumers: Vec<NodeId>,
    pub ongrid_consumers: Vec<NodeId>,
    /// Cut points in the order they were pruned.
    pub pruned_roots: Vec<NodeId>,
    /// One entry per evaluated node, in evaluation order.
    pub audit: Vec<AuditEntry>,
    /// Final status of every node (empty for the bottom-up comparator).
    pub node_status: Vec<NodeStatus>,
    pub grid_cost_usd_yr: f64,
    pub offgrid_cost_usd_yr: f64,
    pub total_cost_usd_yr: f64,
    /// Cost of electrifying every consumer from the grid.
    pub all_grid_cost_usd_yr: f64,
}

impl PartitionResult {
    /// Partition disjointness/completeness against the tree's consumer list.
    pub fn check_partition(&self, tree: &NetworkTree) -> Vec<String> {
        let mut bad = Vec::new();
        let mut all: Vec<NodeId> = self
            .offgrid_consumers
            .iter()
            .chain(&self.ongrid_consumers)
            .copied()
            .collect();
        all.sort_unstable();
        let before = all.len();
        all.dedup();
        if all.len() != before {
            bad.push("a consumer is both on-grid and off-grid".into());
        }
        if all != tree.consumer_ids {
            bad.push("on-grid ∪ off-grid is not the consumer set".into());
        }
        let mut seen = vec![false; tree.len()];
        for e in &self.audit {
            if std::mem::replace(&mut seen[e.node], true) {
                bad.push(format!("node {} audited twice", tree.label(e.node)));
            }
        }
        bad
    }
}

// ---------------------------------------------------------------------------
// Candidate selection

/// Reference selection rule: among grid nodes (other than the root) not yet
/// evaluated whose children are all evaluated or off the grid, the one with
/// the highest moments; ties go to the lowest id.
pub fn next_candidate(tree: &NetworkTree) -> Option<NodeId> {
    tree.nodes
        .iter()
        .filter(|n| n.id != tree.root && !n.evaluated && !n.pruned)
        .filter(|n| {
            n.children.iter().all(|&c| {
                let c = tree.node(c);
                c.evaluated || c.pruned
            })
        })
        .max_by(|a, b| a.moments.total_cmp(&b.moments).then(b.id.cmp(&a.id)))
        .map(|n| n.id)
}

#[derive(Debug, PartialEq)]
struct Candidate {
    moments: f64,
    id: NodeId,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.moments
            .total_cmp(&other.moments)
            .then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// ---------------------------------------------------------------------------
// Decision value

/// Loads of `node`'s strict ancestors (nearest first) once its subtree is
/// taken off the grid; `None` marks an ancestor left with no consumer.
/// Each load is re-summed over the children in stored order so that the
/// values are exactly those `prune` will store.
fn loads_after_removal(tree: &NetworkTree, node: NodeId) -> Vec<(NodeId, Option<Load>)> {
    let mut out = Vec::with_capacity(tree.depth(node));
    let mut child = node;
    let mut child_after: Option<Load> = None;
    for a in tree.ancestors(node) {
        let mut load = Load::ZERO;
        for &c in &tree.node(a).children {
            if c == child {
                if let Some(l) = &child_after {
                    load.add(l);
                }
            } else if !tree.node(c).pruned {
                load.add(&tree.node(c).load());
            }
        }
        let after = (!load.is_empty()).then_some(load);
        out.push((a, after));
        child = a;
        child_after = after;
    }
    out
}

fn tag_node(e: Error, label: u64) -> Error {
    match e {
        Error::CapacityExceedsCatalog { node: None, item, peak_kw } => Error::CapacityExceedsCatalog {
            node: Some(label),
            item,
            peak_kw,
        },
        other => other,
    }
}

/// The seven terms of δ for pruning `node` from the current tree state.
pub fn evaluate_delta(
    tree: &NetworkTree,
    node: NodeId,
    config: &CostConfig,
    catalog: &Catalog,
) -> Result<DeltaBreakdown> {
    let n = tree.get(node)?;
    if node == tree.root {
        return Err(Error::RootNotPrunable(n.label));
    }
    if n.pruned {
        return Err(Error::AlreadyPruned(n.label));
    }
    let load = n.load();
    let generation =
        generation_cost(load.peak_kw, load.annual_kwh, config, catalog).map_err(|e| tag_node(e, n.label))?;
    let omega = cnse(load.annual_kwh, config.offgrid_reliability, config);
    let tau = cnse(load.annual_kwh, config.grid_reliability, config);
    let zeta = grid_energy_cost(load.annual_kwh, config);
    let sigma = element_self_cost(n, catalog, config)?;

    let mut beta = 0.0;
    for (a, after) in loads_after_removal(tree, node) {
        let anc = tree.node(a);
        let before = element_self_cost(anc, catalog, config)?;
        let after = match after {
            Some(l) => element_cost(anc.kind, anc.length_km, &l, catalog, config)
                .map_err(|e| tag_node(e, anc.label))?,
            None => 0.0,
        };
        beta += before - after;
    }
    Ok(DeltaBreakdown::new(
        generation.gamma,
        generation.om,
        omega,
        beta,
        tau,
        zeta,
        sigma,
    ))
}

/// Nodes affected by one prune.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PruneOutcome {
    /// The cut node followed by every grid node of its subtree (pre-order).
    pub claimed: Vec<NodeId>,
    /// Ancestors dropped because they no longer serve any consumer,
    /// nearest first.
    pub removed: Vec<NodeId>,
}

/// Takes `node`'s subtree off the grid, unloads its ancestors and refreshes
/// their moments.
pub fn prune(tree: &mut NetworkTree, node: NodeId) -> Result<PruneOutcome> {
    let n = tree.get(node)?;
    if node == tree.root {
        return Err(Error::RootNotPrunable(n.label));
    }
    if n.pruned {
        return Err(Error::AlreadyPruned(n.label));
    }
    if !n.evaluated {
        return Err(Error::NotEvaluated(n.label));
    }
    let path = loads_after_removal(tree, node);

    let mut outcome = PruneOutcome::default();
    let mut stack = vec![node];
    while let Some(i) = stack.pop() {
        if tree.nodes[i].pruned {
            continue;
        }
        tree.nodes[i].pruned = true;
        outcome.claimed.push(i);
        stack.extend(tree.nodes[i].children.iter().rev().copied());
    }

    for (a, after) in path {
        match after {
            Some(l) => {
                tree.nodes[a].set_load(&l);
                tree.nodes[a].moments = tree.moments_from_children(a);
            }
            None => {
                let anc = &mut tree.nodes[a];
                anc.pruned = true;
                anc.set_load(&Load::ZERO);
                anc.moments = 0.0;
                outcome.removed.push(a);
            }
        }
    }
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// Accounting

/// Annual cost of a single off-grid system: generation, off-grid O&M and
/// CNSE for its load, plus the reused network below the cut.
pub fn offgrid_system_cost(
    load: &Load,
    network_usd_yr: f64,
    config: &CostConfig,
    catalog: &Catalog,
) -> Result<f64> {
    let g = generation_cost(load.peak_kw, load.annual_kwh, config, catalog)?;
    Ok(g.gamma + g.om + cnse(load.annual_kwh, config.offgrid_reliability, config) + network_usd_yr)
}

/// Grid and off-grid annual cost of the tree in its current state.
fn accounting(
    tree: &NetworkTree,
    status: &[NodeStatus],
    config: &CostConfig,
    catalog: &Catalog,
) -> Result<(f64, f64)> {
    let mut grid = 0.0;
    let mut network = vec![0.0; tree.len()];
    for n in &tree.nodes {
        match status[n.id] {
            NodeStatus::Grid => {
                grid += element_self_cost(n, catalog, config)?;
                if n.is_consumer() {
                    grid += grid_energy_cost(n.annual_kwh, config)
                        + cnse(n.annual_kwh, config.grid_reliability, config);
                }
            }
            NodeStatus::Offgrid { system } => network[system] += element_self_cost(n, catalog, config)?,
            NodeStatus::PrunedRoot | NodeStatus::Removed => {}
        }
    }
    let mut offgrid = 0.0;
    for n in &tree.nodes {
        if status[n.id] == NodeStatus::PrunedRoot {
            offgrid += offgrid_system_cost(&n.load(), network[n.id], config, catalog)
                .map_err(|e| tag_node(e, n.label))?;
        }
    }
    Ok((grid, offgrid))
}

/// Annual cost of serving every consumer of an unpruned tree from the grid.
pub fn all_grid_cost(tree: &NetworkTree, config: &CostConfig, catalog: &Catalog) -> Result<f64> {
    let status = vec![NodeStatus::Grid; tree.len()];
    Ok(accounting(tree, &status, config, catalog)?.0)
}

/// Runs the greedy partitioner to completion on `tree`, which is left in
/// its final pruned state.
pub fn run_partitioner(
    tree: &mut NetworkTree,
    config: &CostConfig,
    catalog: &Catalog,
) -> Result<PartitionResult> {
    config.validate()?;
    catalog.validate()?;

    let mut status = vec![NodeStatus::Grid; tree.len()];
    for n in &tree.nodes {
        if n.pruned {
            return Err(Error::AlreadyPruned(n.label));
        }
    }
    let (all_grid, _) = accounting(tree, &status, config, catalog)?;

    let mut pending: Vec<usize> = tree.nodes.iter().map(|n| n.children.len()).collect();
    let mut heap: BinaryHeap<Candidate> = tree
        .nodes
        .iter()
        .filter(|n| n.children.is_empty() && n.id != tree.root)
        .map(|n| Candidate {
            moments: n.moments,
            id: n.id,
        })
        .collect();

    let mut audit = Vec::with_capacity(tree.len());
    let mut pruned_roots = Vec::new();

    while let Some(Candidate { id, .. }) = heap.pop() {
        let breakdown = evaluate_delta(tree, id, config, catalog)?;
        tree.nodes[id].evaluated = true;
        let cut = breakdown.delta < 0.0;
        audit.push(AuditEntry {
            node: id,
            breakdown,
            pruned: cut,
        });

        // The first ancestor still on the grid gains one finished child.
        let mut finished_parent = tree.nodes[id].parent;
        if cut {
            let outcome = prune(tree, id)?;
            status[id] = NodeStatus::PrunedRoot;
            for &m in &outcome.claimed[1..] {
                status[m] = NodeStatus::Offgrid { system: id };
            }
            for &a in &outcome.removed {
                status[a] = NodeStatus::Removed;
            }
            pruned_roots.push(id);
            finished_parent = outcome
                .removed
                .last()
                .map_or(finished_parent, |&top| tree.nodes[top].parent);
        }
        if let Some(p) = finished_parent {
            pending[p] -= 1;
            if pending[p] == 0 && p != tree.root {
                heap.push(Candidate {
                    moments: tree.nodes[p].moments,
                    id: p,
                });
            }
        }
    }

    let (grid, offgrid) = accounting(tree, &status, config, catalog)?;
    let (mut offgrid_consumers, mut ongrid_consumers) = (Vec::new(), Vec::new());
    for &c in &tree.consumer_ids {
        if status[c] == NodeStatus::Grid {
            ongrid_consumers.push(c);
        } else {
            offgrid_consumers.push(c);
        }
    }

    Ok(PartitionResult {
        method: Method::TopDown,
        offgrid_consumers,
        ongrid_consumers,
        pruned_roots,
        audit,
        node_status: status,
        grid_cost_usd_yr: grid,
        offgrid_cost_usd_yr: offgrid,
        total_cost_usd_yr: grid + offgrid,
        all_grid_cost_usd_yr: all_grid,
    })
}

// ---------------------------------------------------------------------------
// Audit table

#[derive(Debug, Serialize)]
struct AuditRow<'a> {
    node_id: u64,
    kind: NodeKind,
    gamma: f64,
    eta: f64,
    omega: f64,
    beta: f64,
    tau: f64,
    zeta: f64,
    sigma: f64,
    delta: f64,
    decision: &'a str,
}

/// Writes the audit trail as CSV, one row per evaluated node.
pub fn write_audit_csv<W: std::io::Write>(
    result: &PartitionResult,
    tree: &NetworkTree,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if result.audit.is_empty() {
        w.write_record([
            "node_id", "kind", "gamma", "eta", "omega", "beta", "tau", "zeta", "sigma", "delta",
            "decision",
        ])
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    for e in &result.audit {
        let b = &e.breakdown;
        w.serialize(AuditRow {
            node_id: tree.label(e.node),
            kind: tree.node(e.node).kind,
            gamma: b.gamma,
            eta: b.eta,
            omega: b.omega,
            beta: b.beta,
            tau: b.tau,
            zeta: b.zeta,
            sigma: b.sigma,
            delta: b.delta,
            decision: if e.pruned { "prune" } else { "keep" },
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
    use crate::netmodel::{build_tree, NetworkDoc, NodeRecord, VoltageLevel};

    fn rec(id: u64, kind: NodeKind, parent: Option<u64>, len: f64, peak: f64) -> NodeRecord {
        NodeRecord {
            id,
            kind,
            parent,
            length_km: len,
            x_km: id as f64,
            y_km: 0.0,
            voltage: VoltageLevel::Lv,
            peak_kw: peak,
            annual_kwh: peak * 2000.0,
            profile_id: None,
        }
    }

    fn doc(nodes: Vec<NodeRecord>) -> NetworkTree {
        build_tree(&NetworkDoc {
            nodes,
            profiles: Default::default(),
        })
        .unwrap()
    }

    fn chain() -> NetworkTree {
        doc(vec![
            rec(0, NodeKind::Transformer, None, 0.0, 0.0),
            rec(1, NodeKind::LineSegment, Some(0), 2.0, 0.0),
            rec(2, NodeKind::Consumer, Some(1), 0.0, 1.0),
        ])
    }

    /// root -> line 1 -> {line 2 -> c3 (3 kW), line 4 -> c5 (5 kW)}
    fn two_branches() -> NetworkTree {
        doc(vec![
            rec(0, NodeKind::Transformer, None, 0.0, 0.0),
            rec(1, NodeKind::LineSegment, Some(0), 1.0, 0.0),
            rec(2, NodeKind::LineSegment, Some(1), 1.0, 0.0),
            rec(3, NodeKind::Consumer, Some(2), 0.0, 3.0),
            rec(4, NodeKind::LineSegment, Some(1), 1.0, 0.0),
            rec(5, NodeKind::Consumer, Some(4), 0.0, 5.0),
        ])
    }

    fn catalog() -> Catalog {
        Catalog {
            conductors: vec![ConductorType {
                capacity_kw: 100.0,
                capex_usd_per_km: 1000.0,
                lifetime_yr: 30.0,
            }],
            transformers: vec![TransformerType {
                capacity_kw: 100.0,
                capex_usd: 2000.0,
                lifetime_yr: 20.0,
            }],
            generation: GenerationModel::diesel_only(500.0, 0.3, 10.0),
            lookup: None,
        }
    }

    #[test]
    fn fresh_chain_offers_the_consumer_first() {
        assert_eq!(next_candidate(&chain()), Some(2));
    }

    #[test]
    fn ties_and_ordering() {
        let mut t = two_branches();
        // consumers both have moments 0; lowest id first
        assert_eq!(next_candidate(&t), Some(3));
        t.nodes[3].evaluated = true;
        t.nodes[5].evaluated = true;
        // lines 2 (3 kW·km) and 4 (5 kW·km) are both eligible
        assert_eq!(t.nodes[4].moments, 5.0);
        assert_eq!(next_candidate(&t), Some(4));
    }

    #[test]
    fn root_is_never_prunable() {
        let t = chain();
        let cfg = CostConfig::default();
        assert_eq!(
            evaluate_delta(&t, 0, &cfg, &catalog()),
            Err(Error::RootNotPrunable(0))
        );
    }

    #[test]
    fn free_generation_gives_negative_delta() {
        let t = chain();
        let cfg = CostConfig {
            fuel_cost_usd_per_l: 0.0,
            cnse_usd_per_kwh: 0.0,
            ..Default::default()
        };
        let mut cat = catalog();
        cat.generation = GenerationModel::diesel_only(0.0, 0.3, 10.0);
        let d = evaluate_delta(&t, 1, &cfg, &cat).unwrap();
        assert_eq!((d.gamma, d.eta, d.omega), (0.0, 0.0, 0.0));
        assert!(d.sigma > 0.0);
        assert!(d.delta < 0.0);
    }

    #[test]
    fn symmetric_reliability_cancels_cnse() {
        let t = chain();
        let mut cfg = CostConfig::default();
        cfg.offgrid_reliability = cfg.grid_reliability;
        let d = evaluate_delta(&t, 1, &cfg, &catalog()).unwrap();
        assert_eq!(d.omega, d.tau);
        let without = DeltaBreakdown::new(d.gamma, d.eta, 0.0, d.beta, 0.0, d.zeta, d.sigma);
        assert!((without.delta - d.delta).abs() <= 1e-9 * d.delta.abs().max(1.0));
    }

    #[test]
    fn pruning_the_only_line_unloads_the_root() {
        let mut t = chain();
        t.nodes[2].evaluated = true;
        t.nodes[1].evaluated = true;
        let out = prune(&mut t, 1).unwrap();
        assert_eq!(out.claimed, vec![1, 2]);
        assert_eq!(out.removed, vec![0]);
        assert_eq!(t.node(0).peak_kw, 0.0);
        assert_eq!(prune(&mut t, 1), Err(Error::AlreadyPruned(1)));
    }

    #[test]
    fn pruning_one_branch_keeps_the_other() {
        let mut t = two_branches();
        assert_eq!(t.node(1).peak_kw, 8.0);
        t.nodes[3].evaluated = true;
        t.nodes[2].evaluated = true;
        prune(&mut t, 2).unwrap();
        assert_eq!(t.node(1).peak_kw, 5.0);
        assert_eq!(t.node(0).peak_kw, 5.0);
        assert_eq!(t.node(1).consumers, 1);
        assert!(t.check_invariants().is_empty(), "{:?}", t.check_invariants());
    }

    #[test]
    fn prune_requires_evaluation() {
        let mut t = chain();
        assert_eq!(prune(&mut t, 1), Err(Error::NotEvaluated(1)));
        assert_eq!(prune(&mut t, 0), Err(Error::RootNotPrunable(0)));
    }

    #[test]
    fn hopeless_generation_keeps_everyone_on_grid() {
        let mut t = two_branches();
        let cfg = CostConfig {
            fuel_cost_usd_per_l: 1e6,
            ..Default::default()
        };
        let mut cat = catalog();
        cat.generation = GenerationModel::diesel_only(1e9, 0.3, 10.0);
        let r = run_partitioner(&mut t, &cfg, &cat).unwrap();
        assert!(r.offgrid_consumers.is_empty());
        assert_eq!(r.ongrid_consumers, vec![3, 5]);
        assert_eq!(r.audit.len(), 5);
        assert_eq!(r.total_cost_usd_yr, r.all_grid_cost_usd_yr);
    }

    #[test]
    fn free_generation_takes_everyone_off_grid() {
        let mut t = two_branches();
        let cfg = CostConfig {
            fuel_cost_usd_per_l: 0.0,
            cnse_usd_per_kwh: 0.0,
            ..Default::default()
        };
        let mut cat = catalog();
        cat.generation = GenerationModel::diesel_only(0.0, 0.3, 10.0);
        let r = run_partitioner(&mut t, &cfg, &cat).unwrap();
        assert!(r.ongrid_consumers.is_empty());
        assert_eq!(r.offgrid_consumers, vec![3, 5]);
        assert_eq!(r.grid_cost_usd_yr, 0.0);
        assert!(r.check_partition(&t).is_empty());
        assert!(t.nodes.iter().all(|n| n.pruned));
    }

    #[test]
    fn engine_order_matches_reference_selection() {
        let base = two_branches();
        let cfg = CostConfig::default();
        let mut engine_tree = base.clone();
        let r = run_partitioner(&mut engine_tree, &cfg, &catalog()).unwrap();

        let mut t = base;
        let mut order = Vec::new();
        while let Some(i) = next_candidate(&t) {
            let d = evaluate_delta(&t, i, &cfg, &catalog()).unwrap();
            t.nodes[i].evaluated = true;
            if d.delta < 0.0 {
                prune(&mut t, i).unwrap();
            }
            order.push(i);
        }
        let engine: Vec<_> = r.audit.iter().map(|e| e.node).collect();
        assert_eq!(engine, order);
        assert_eq!(t, engine_tree);
    }

    #[test]
    fn audit_csv_has_one_row_per_evaluation() {
        let mut t = two_branches();
        let r = run_partitioner(&mut t, &CostConfig::default(), &catalog()).unwrap();
        let mut buf = Vec::new();
        write_audit_csv(&r, &t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), r.audit.len() + 1);
        assert!(text.starts_with("node_id,kind,gamma,eta,omega,beta,tau,zeta,sigma,delta,decision"));
    }
}
