//! Shared fixtures and an independent whole-system cost oracle.
#![allow(dead_code)]

use gridsplit::costmodel::{
    cnse, element_cost, generation_cost, grid_energy_cost, Catalog, ConductorType, CostConfig, GenerationModel,
    TransformerType,
};
use gridsplit::netmodel::{build_tree, Load, NetworkDoc, NetworkTree, NodeId, NodeKind, NodeRecord, VoltageLevel};
use gridsplit::partitioner::{evaluate_delta, next_candidate, prune, PartitionResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Annual cost of the whole system when exactly the nodes in `cuts` are
/// taken off the grid, computed from scratch on the unpruned tree.
///
/// Each consumer belongs to its nearest cut ancestor-or-self, or to the
/// grid when there is none. A grid element is paid for when it still
/// carries at least one grid consumer; a system reuses the elements
/// strictly below its cut that carry its own consumers. Loads are summed
/// over children in stored order.
pub fn system_cost(tree: &NetworkTree, cuts: &[NodeId], config: &CostConfig, catalog: &Catalog) -> f64 {
    let n = tree.len();
    let mut is_cut = vec![false; n];
    for &c in cuts {
        assert_ne!(c, tree.root, "the root cannot be cut");
        is_cut[c] = true;
    }
    // owner[i]: nearest cut at or above i
    let mut owner: Vec<Option<NodeId>> = vec![None; n];
    let mut stack = vec![tree.root];
    while let Some(i) = stack.pop() {
        for &c in &tree.node(i).children {
            owner[c] = if is_cut[c] { Some(c) } else { owner[i] };
            stack.push(c);
        }
    }

    // load[i] and consumer count carried at i for its owner
    let mut load = vec![Load::ZERO; n];
    let mut count = vec![0usize; n];
    for i in postorder(tree) {
        let node = tree.node(i);
        if node.kind == NodeKind::Consumer {
            load[i] = Load {
                peak_kw: node.peak_kw,
                annual_kwh: node.annual_kwh,
                consumers: 1,
            };
            count[i] = 1;
            continue;
        }
        let mut l = Load::ZERO;
        for &c in &node.children {
            if owner[c] == owner[i] {
                l.add(&load[c]);
                count[i] += count[c];
            }
        }
        load[i] = l;
    }
    let mut total = 0.0;
    let mut systems: Vec<NodeId> = Vec::new();
    for i in 0..n {
        let node = tree.node(i);
        match owner[i] {
            None => {
                if count[i] > 0 {
                    total += element_cost(node.kind, node.length_km, &load[i], catalog, config).unwrap();
                    if node.kind == NodeKind::Consumer {
                        total += grid_energy_cost(node.annual_kwh, config)
                            + cnse(node.annual_kwh, config.grid_reliability, config);
                    }
                }
            }
            Some(r) if r == i => systems.push(i),
            Some(_) => {
                if count[i] > 0 && node.kind != NodeKind::Consumer {
                    total += element_cost(node.kind, node.length_km, &load[i], catalog, config).unwrap();
                }
            }
        }
    }
    for r in systems {
        if count[r] == 0 {
            continue;
        }
        let g = generation_cost(load[r].peak_kw, load[r].annual_kwh, config, catalog).unwrap();
        total += g.gamma + g.om + cnse(load[r].annual_kwh, config.offgrid_reliability, config);
    }
    total
}

pub fn postorder(tree: &NetworkTree) -> Vec<NodeId> {
    let mut out = Vec::with_capacity(tree.len());
    let mut stack = vec![(tree.root, false)];
    while let Some((i, done)) = stack.pop() {
        if done {
            out.push(i);
        } else {
            stack.push((i, true));
            for &c in tree.node(i).children.iter().rev() {
                stack.push((c, false));
            }
        }
    }
    out
}

fn record(id: u64, kind: NodeKind, parent: Option<u64>, length_km: f64, at: (f64, f64)) -> NodeRecord {
    NodeRecord {
        id,
        kind,
        parent,
        length_km,
        x_km: at.0,
        y_km: at.1,
        voltage: VoltageLevel::Lv,
        peak_kw: 0.0,
        annual_kwh: 0.0,
        profile_id: None,
    }
}

/// A random valid radial tree with about `n` nodes: a skeleton of lines and
/// transformers under a transformer root, consumers on every skeleton leaf
/// and scattered elsewhere.
pub fn random_tree(rng: &mut impl Rng, n: usize) -> NetworkDoc {
    let n = n.max(3);
    let skeleton = rng.random_range(1..=(n / 2).max(1));
    let mut nodes = vec![record(0, NodeKind::Transformer, None, 0.0, (0.0, 0.0))];
    let mut pos = vec![(0.0, 0.0)];
    for id in 1..skeleton as u64 {
        let parent = rng.random_range(0..id as usize);
        let kind = if rng.random_bool(0.8) {
            NodeKind::LineSegment
        } else {
            NodeKind::Transformer
        };
        let len = if kind == NodeKind::LineSegment {
            rng.random_range(0.05..15.0)
        } else {
            0.0
        };
        let at = (pos[parent].0 + len, pos[parent].1 + rng.random_range(-1.0..1.0));
        nodes.push(record(id, kind, Some(parent as u64), len, at));
        pos.push(at);
    }
    let mut has_child = vec![false; skeleton];
    for r in &nodes[1..] {
        has_child[r.parent.unwrap() as usize] = true;
    }
    let mut parents: Vec<usize> = (0..skeleton).filter(|&i| !has_child[i]).collect();
    let extra = n.saturating_sub(skeleton + parents.len());
    for _ in 0..extra {
        parents.push(rng.random_range(0..skeleton));
    }
    for (k, p) in parents.into_iter().enumerate() {
        let id = (skeleton + k) as u64;
        let mut r = record(id, NodeKind::Consumer, Some(p as u64), 0.0, (pos[p].0, pos[p].1 + 0.01 * k as f64));
        r.peak_kw = rng.random_range(0.2..8.0);
        r.annual_kwh = r.peak_kw * rng.random_range(800.0..3000.0);
        nodes.push(r);
    }
    NetworkDoc {
        nodes,
        profiles: Default::default(),
    }
}

/// Cost settings spread around the defaults so both outcomes occur.
pub fn random_config(rng: &mut impl Rng) -> CostConfig {
    CostConfig {
        fuel_cost_usd_per_l: rng.random_range(0.2..2.0),
        grid_reliability: rng.random_range(0.6..1.0),
        offgrid_reliability: rng.random_range(0.8..1.0),
        cnse_usd_per_kwh: rng.random_range(0.0..1.0),
        energy_cost_usd_per_kwh: rng.random_range(0.03..0.3),
        ..CostConfig::default()
    }
}

/// Trees whose prune decisions are separable: nodes shared by two or more
/// consumers have zero length, transformers are free, line cost does not
/// depend on load and generation cost is additive over consumers.
pub fn separable_instance(rng: &mut impl Rng, n: usize) -> (NetworkTree, CostConfig, Catalog) {
    let mut doc = random_tree(rng, n);
    let tree = build_tree(&doc).unwrap();
    for r in doc.nodes.iter_mut() {
        let i = tree.nodes.iter().position(|x| x.label == r.id).unwrap();
        if tree.node(i).consumers >= 2 {
            r.length_km = 0.0;
        }
    }
    let tree = build_tree(&doc).unwrap();
    let config = CostConfig {
        loss_fraction_per_km: 0.0,
        mv_microgrid_peak_threshold_kw: 1e12,
        ..random_config(rng)
    };
    let catalog = Catalog {
        conductors: vec![ConductorType {
            capacity_kw: 1e9,
            capex_usd_per_km: rng.random_range(500.0..20_000.0),
            lifetime_yr: 30.0,
        }],
        transformers: vec![TransformerType {
            capacity_kw: 1e9,
            capex_usd: 0.0,
            lifetime_yr: 25.0,
        }],
        generation: GenerationModel::diesel_only(rng.random_range(100.0..800.0), 0.3, 10.0),
        lookup: None,
    };
    (tree, config, catalog)
}

/// All sets of non-root nodes no two of which are ancestor and descendant.
pub fn antichains(tree: &NetworkTree) -> Vec<Vec<NodeId>> {
    fn extend(tree: &NetworkTree, nodes: &[NodeId], at: usize, current: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
        if at == nodes.len() {
            out.push(current.clone());
            return;
        }
        extend(tree, nodes, at + 1, current, out);
        let v = nodes[at];
        if current.iter().all(|&u| !tree.is_ancestor(u, v) && !tree.is_ancestor(v, u)) {
            current.push(v);
            extend(tree, nodes, at + 1, current, out);
            current.pop();
        }
    }
    let nodes: Vec<NodeId> = (0..tree.len()).filter(|&i| i != tree.root).collect();
    let mut out = Vec::new();
    extend(tree, &nodes, 0, &mut Vec::new(), &mut out);
    out
}

/// Greedy run driven by the reference candidate scan, checking tree
/// invariants after every prune. Returns (cut set, violations).
pub fn stepwise(tree: &mut NetworkTree, config: &CostConfig, catalog: &Catalog) -> (Vec<NodeId>, Vec<String>) {
    let mut cuts = Vec::new();
    let mut bad = Vec::new();
    while let Some(id) = next_candidate(tree) {
        let d = evaluate_delta(tree, id, config, catalog).unwrap();
        tree.nodes[id].evaluated = true;
        if d.delta < 0.0 {
            prune(tree, id).unwrap();
            cuts.push(id);
            bad.extend(tree.check_invariants().into_iter().map(|v| format!("after pruning {id}: {v}")));
        }
    }
    (cuts, bad)
}

/// Every audited node comes after all audited nodes in its subtree.
pub fn audit_order_violations(tree: &NetworkTree, result: &PartitionResult) -> Vec<String> {
    let mut at = vec![usize::MAX; tree.len()];
    for (k, e) in result.audit.iter().enumerate() {
        at[e.node] = k;
    }
    let mut bad = Vec::new();
    for e in &result.audit {
        for d in tree.subtree(e.node).into_iter().skip(1) {
            if at[d] != usize::MAX && at[d] > at[e.node] {
                bad.push(format!("node {} audited before descendant {}", e.node, d));
            }
        }
    }
    bad
}
