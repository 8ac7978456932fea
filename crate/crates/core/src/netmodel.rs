//! Tree model of a radial distribution network.
//!
//! Every element of the reference network (line segment, MV/LV transformer,
//! consumer connection) is one [`NetworkNode`]. Parent pointers follow the
//! direction of power flow: the root is the grid connection point and the
//! consumers are exactly the leaves.
//!
//! Node ids inside a [`NetworkTree`] are dense indices assigned in input
//! order. The id written in the input document is kept as
//! [`NetworkNode::label`] and is what every output file reports.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense node index, `0..tree.len()`, in input order.
pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    LineSegment,
    Consumer,
    Transformer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VoltageLevel {
    #[serde(rename = "MV")]
    Mv,
    #[serde(rename = "LV")]
    Lv,
}

/// Aggregate demand carried by a node: the plain sum (coincidence factor 1)
/// over the consumers still served through it.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Load {
    pub peak_kw: f64,
    pub annual_kwh: f64,
    pub consumers: usize,
}

impl Load {
    pub const ZERO: Load = Load {
        peak_kw: 0.0,
        annual_kwh: 0.0,
        consumers: 0,
    };

    pub fn is_empty(&self) -> bool {
        self.consumers == 0
    }

    pub fn add(&mut self, other: &Load) {
        self.peak_kw += other.peak_kw;
        self.annual_kwh += other.annual_kwh;
        self.consumers += other.consumers;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkNode {
    pub id: NodeId,
    /// Id as given in the input document.
    pub label: u64,
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub length_km: f64,
    pub location: (f64, f64),
    pub voltage: VoltageLevel,
    /// Consumer demand at consumers, downstream sum elsewhere (kW).
    pub peak_kw: f64,
    /// Consumer energy at consumers, downstream sum elsewhere (kWh/yr).
    pub annual_kwh: f64,
    /// Number of grid-served consumers at or below this node.
    pub consumers: usize,
    /// Power-distance priority, kW·km.
    pub moments: f64,
    pub evaluated: bool,
    /// No longer part of the grid: inside a pruned subtree, or left without
    /// any downstream consumer by a prune below it.
    pub pruned: bool,
}

impl NetworkNode {
    pub fn is_consumer(&self) -> bool {
        self.kind == NodeKind::Consumer
    }

    pub fn load(&self) -> Load {
        Load {
            peak_kw: self.peak_kw,
            annual_kwh: self.annual_kwh,
            consumers: self.consumers,
        }
    }

    pub(crate) fn set_load(&mut self, load: &Load) {
        self.peak_kw = load.peak_kw;
        self.annual_kwh = load.annual_kwh;
        self.consumers = load.consumers;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTree {
    pub nodes: Vec<NetworkNode>,
    pub root: NodeId,
    /// All consumer ids, ascending.
    pub consumer_ids: Vec<NodeId>,
}

// ---------------------------------------------------------------------------
// Input document

/// One record of the network input document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: u64,
    pub kind: NodeKind,
    #[serde(default)]
    pub parent: Option<u64>,
    #[serde(default)]
    pub length_km: f64,
    #[serde(default)]
    pub x_km: f64,
    #[serde(default)]
    pub y_km: f64,
    pub voltage: VoltageLevel,
    #[serde(default)]
    pub peak_kw: f64,
    #[serde(default)]
    pub annual_kwh: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    pub peak_kw: f64,
    pub annual_kwh: f64,
}

/// The network input document: a `nodes` array plus an optional `profiles`
/// table whose entries override the demand of consumers naming them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NetworkDoc {
    pub nodes: Vec<NodeRecord>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub profiles: BTreeMap<String, DemandProfile>,
}

impl NetworkDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            file: "network".into(),
            reason: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network document serializes")
    }
}

// ---------------------------------------------------------------------------
// Construction

fn check_non_negative(label: u64, name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidNode {
            node: label,
            reason: format!("{name} must be a non-negative finite number, got {v}"),
        });
    }
    Ok(())
}

/// Builds and validates a tree, aggregating demand bottom-up and computing
/// moments.
pub fn build_tree(doc: &NetworkDoc) -> Result<NetworkTree> {
    let mut index: HashMap<u64, NodeId> = HashMap::with_capacity(doc.nodes.len());
    for (i, rec) in doc.nodes.iter().enumerate() {
        if index.insert(rec.id, i).is_some() {
            return Err(Error::DuplicateNodeId(rec.id));
        }
    }

    let mut nodes = Vec::with_capacity(doc.nodes.len());
    let mut root: Option<NodeId> = None;
    for (i, rec) in doc.nodes.iter().enumerate() {
        check_non_negative(rec.id, "length_km", rec.length_km)?;
        if rec.length_km > 0.0 && rec.kind != NodeKind::LineSegment {
            return Err(Error::InvalidNode {
                node: rec.id,
                reason: "only line segments may have a positive length".into(),
            });
        }
        if !rec.x_km.is_finite() || !rec.y_km.is_finite() {
            return Err(Error::InvalidNode {
                node: rec.id,
                reason: "coordinates must be finite".into(),
            });
        }
        let (peak_kw, annual_kwh) = if rec.kind == NodeKind::Consumer {
            match &rec.profile_id {
                Some(pid) => {
                    let p = doc.profiles.get(pid).ok_or_else(|| Error::InvalidNode {
                        node: rec.id,
                        reason: format!("unknown profile_id {pid:?}"),
                    })?;
                    (p.peak_kw, p.annual_kwh)
                }
                None => (rec.peak_kw, rec.annual_kwh),
            }
        } else {
            (0.0, 0.0)
        };
        check_non_negative(rec.id, "peak_kw", peak_kw)?;
        check_non_negative(rec.id, "annual_kwh", annual_kwh)?;

        let parent = match rec.parent {
            None => {
                if let Some(r) = root {
                    return Err(Error::MultipleRoots(doc.nodes[r].id, rec.id));
                }
                root = Some(i);
                None
            }
            Some(p) => Some(*index.get(&p).ok_or(Error::DanglingParentRef {
                node: rec.id,
                parent: p,
            })?),
        };

        nodes.push(NetworkNode {
            id: i,
            label: rec.id,
            kind: rec.kind,
            parent,
            children: Vec::new(),
            length_km: rec.length_km,
            location: (rec.x_km, rec.y_km),
            voltage: rec.voltage,
            peak_kw,
            annual_kwh,
            consumers: usize::from(rec.kind == NodeKind::Consumer),
            moments: 0.0,
            evaluated: false,
            pruned: false,
        });
    }
    let root = root.ok_or(Error::NoRoot)?;

    for i in 0..nodes.len() {
        if let Some(p) = nodes[i].parent {
            nodes[p].children.push(i);
        }
    }

    // Everything must hang off the root; whatever does not sits on a cycle.
    let mut reached = vec![false; nodes.len()];
    let mut stack = vec![root];
    reached[root] = true;
    while let Some(n) = stack.pop() {
        for &c in &nodes[n].children {
            if !reached[c] {
                reached[c] = true;
                stack.push(c);
            }
        }
    }
    if let Some(start) = reached.iter().position(|r| !r) {
        let mut seen = vec![false; nodes.len()];
        let mut cur = start;
        while !seen[cur] {
            seen[cur] = true;
            cur = nodes[cur].parent.expect("unreached nodes all have parents");
        }
        return Err(Error::CycleDetected(nodes[cur].label));
    }

    for n in &nodes {
        match (n.kind, n.children.is_empty()) {
            (NodeKind::Consumer, false) => return Err(Error::ConsumerWithChildren(n.label)),
            (NodeKind::LineSegment | NodeKind::Transformer, true) => {
                return Err(Error::NonConsumerLeaf(n.label))
            }
            _ => {}
        }
    }

    let consumer_ids = nodes
        .iter()
        .filter(|n| n.is_consumer())
        .map(|n| n.id)
        .collect();
    let mut tree = NetworkTree {
        nodes,
        root,
        consumer_ids,
    };
    tree.aggregate();
    compute_moments(&mut tree);
    Ok(tree)
}

/// Recomputes `moments` for every grid node from its current peak:
/// `moments = peak_kw × length_km + max(child moments)`.
pub fn compute_moments(tree: &mut NetworkTree) {
    for id in tree.postorder() {
        if !tree.nodes[id].pruned {
            tree.nodes[id].moments = tree.moments_from_children(id);
        }
    }
}

/// Grid-served consumers at or below `node`, ascending.
pub fn subtree_consumers(tree: &NetworkTree, node: NodeId) -> Result<Vec<NodeId>> {
    let n = tree.get(node)?;
    if n.pruned {
        return Err(Error::AlreadyPruned(n.label));
    }
    let mut out = Vec::new();
    let mut stack = vec![node];
    while let Some(i) = stack.pop() {
        let n = &tree.nodes[i];
        if n.pruned {
            continue;
        }
        if n.is_consumer() {
            out.push(i);
        }
        stack.extend(n.children.iter().copied());
    }
    out.sort_unstable();
    Ok(out)
}

impl NetworkTree {
    pub fn from_json(text: &str) -> Result<Self> {
        build_tree(&NetworkDoc::from_json(text)?)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, id: NodeId) -> Result<&NetworkNode> {
        self.nodes.get(id).ok_or(Error::UnknownNode(id as u64))
    }

    pub fn node(&self, id: NodeId) -> &NetworkNode {
        &self.nodes[id]
    }

    pub fn label(&self, id: NodeId) -> u64 {
        self.nodes[id].label
    }

    /// Post-order over the whole structure (children before parents,
    /// children in stored order).
    pub fn postorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root, 0usize)];
        while let Some((n, next)) = stack.pop() {
            if let Some(&c) = self.nodes[n].children.get(next) {
                stack.push((n, next + 1));
                stack.push((c, 0));
            } else {
                out.push(n);
            }
        }
        out
    }

    /// Strict ancestors of `id`, nearest first.
    pub fn ancestors(&self, id: NodeId) -> Ancestors<'_> {
        Ancestors {
            tree: self,
            next: self.nodes[id].parent,
        }
    }

    /// Root path length (number of edges).
    pub fn depth(&self, id: NodeId) -> usize {
        self.ancestors(id).count()
    }

    pub fn is_ancestor(&self, anc: NodeId, of: NodeId) -> bool {
        self.ancestors(of).any(|a| a == anc)
    }

    /// Every node of the structural subtree rooted at `id`, including
    /// already pruned ones, in pre-order.
    pub fn subtree(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n].children.iter().rev().copied());
        }
        out
    }

    /// Sum of the grid children's loads, in child order. Consumers carry
    /// their own demand.
    pub(crate) fn load_from_children(&self, id: NodeId) -> Load {
        let n = &self.nodes[id];
        if n.is_consumer() {
            return n.load();
        }
        let mut load = Load::ZERO;
        for &c in &n.children {
            let child = &self.nodes[c];
            if !child.pruned {
                load.add(&child.load());
            }
        }
        load
    }

    pub(crate) fn moments_from_children(&self, id: NodeId) -> f64 {
        let n = &self.nodes[id];
        let downstream = n
            .children
            .iter()
            .filter(|&&c| !self.nodes[c].pruned)
            .map(|&c| self.nodes[c].moments)
            .fold(0.0_f64, f64::max);
        n.peak_kw * n.length_km + downstream
    }

    /// Re-sums every grid node's load from its children.
    pub(crate) fn aggregate(&mut self) {
        for id in self.postorder() {
            if !self.nodes[id].pruned && !self.nodes[id].is_consumer() {
                let load = self.load_from_children(id);
                self.nodes[id].set_load(&load);
            }
        }
    }

    /// Structural and aggregate invariants of the grid part of the tree.
    /// Returns one message per violation; empty means consistent.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let edges: usize = self.nodes.iter().map(|n| n.children.len()).sum();
        if edges + 1 != self.nodes.len() {
            bad.push(format!("radiality: {} edges for {} nodes", edges, self.nodes.len()));
        }
        let consumers = self.nodes.iter().filter(|n| n.is_consumer()).count();
        let mut listed = self.consumer_ids.clone();
        listed.dedup();
        if listed.len() != self.consumer_ids.len()
            || consumers != listed.len()
            || listed.iter().any(|&c| !self.nodes[c].is_consumer())
        {
            bad.push("consumer_ids is not exactly the consumer set".into());
        }
        for n in &self.nodes {
            if let Some(p) = n.parent {
                if !self.nodes[p].children.contains(&n.id) {
                    bad.push(format!("node {} missing from parent's children", n.label));
                }
            }
            if n.pruned {
                continue;
            }
            if n.parent.is_some_and(|p| self.nodes[p].pruned) {
                bad.push(format!("grid node {} under a pruned parent", n.label));
            }
            let grid_children = n.children.iter().filter(|&&c| !self.nodes[c].pruned).count();
            if (grid_children == 0) != n.is_consumer() {
                bad.push(format!("leaf<=>consumer violated at node {}", n.label));
            }
            let expect = self.load_from_children(n.id);
            if !n.is_consumer() {
                let tol = 1e-9 * expect.peak_kw.abs().max(1.0);
                let tol_e = 1e-9 * expect.annual_kwh.abs().max(1.0);
                if (expect.peak_kw - n.peak_kw).abs() > tol
                    || (expect.annual_kwh - n.annual_kwh).abs() > tol_e
                    || expect.consumers != n.consumers
                {
                    bad.push(format!("aggregate mismatch at node {}", n.label));
                }
            }
            for &c in &n.children {
                let child = &self.nodes[c];
                if !child.pruned && child.moments > n.moments {
                    bad.push(format!(
                        "moments not monotone: node {} ({}) < child {} ({})",
                        n.label, n.moments, child.label, child.moments
                    ));
                }
            }
        }
        bad
    }

    /// Serializes the current structure back into an input document.
    pub fn to_doc(&self) -> NetworkDoc {
        NetworkDoc {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.label,
                    kind: n.kind,
                    parent: n.parent.map(|p| self.nodes[p].label),
                    length_km: n.length_km,
                    x_km: n.location.0,
                    y_km: n.location.1,
                    voltage: n.voltage,
                    peak_kw: if n.is_consumer() { n.peak_kw } else { 0.0 },
                    annual_kwh: if n.is_consumer() { n.annual_kwh } else { 0.0 },
                    profile_id: None,
                })
                .collect(),
            profiles: BTreeMap::new(),
        }
    }
}

pub struct Ancestors<'a> {
    tree: &'a NetworkTree,
    next: Option<NodeId>,
}

impl Iterator for Ancestors<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        let cur = self.next?;
        self.next = self.tree.nodes[cur].parent;
        Some(cur)
    }
}
