//! Off-grid systems formed from pruned subtrees, and the per-system-type
//! summary (Microgrids / Isolated / Grid / All).

use serde::Serialize;

use crate::costmodel::{cnse, element_cost, generation_cost, Catalog, CostConfig, Technology};
use crate::error::{Error, Result};
use crate::netmodel::{Load, NetworkTree, NodeId};
use crate::partitioner::{Method, NodeStatus, PartitionResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Microgrid,
    Isolated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffgridSystem {
    pub kind: SystemKind,
    /// Cut node for top-down systems; `None` for bottom-up clusters.
    pub root: Option<NodeId>,
    /// Ascending.
    pub consumer_ids: Vec<NodeId>,
    /// Reused network elements (top-down only).
    pub network_nodes: Vec<NodeId>,
    pub peak_kw: f64,
    pub annual_kwh: f64,
    pub technology: Technology,
    pub generation_usd_yr: f64,
    pub om_usd_yr: f64,
    pub cnse_usd_yr: f64,
    pub network_usd_yr: f64,
    pub annual_cost_usd: f64,
}

impl OffgridSystem {
    /// Prices a system with the given consumer set and network annuity.
    pub fn priced(
        root: Option<NodeId>,
        mut consumer_ids: Vec<NodeId>,
        network_nodes: Vec<NodeId>,
        network_usd_yr: f64,
        tree: &NetworkTree,
        config: &CostConfig,
        catalog: &Catalog,
    ) -> Result<Self> {
        consumer_ids.sort_unstable();
        let (mut peak_kw, mut annual_kwh) = (0.0, 0.0);
        for &c in &consumer_ids {
            peak_kw += tree.node(c).peak_kw;
            annual_kwh += tree.node(c).annual_kwh;
        }
        let g = generation_cost(peak_kw, annual_kwh, config, catalog)?;
        let cnse_usd_yr = cnse(annual_kwh, config.offgrid_reliability, config);
        Ok(OffgridSystem {
            kind: if consumer_ids.len() == 1 {
                SystemKind::Isolated
            } else {
                SystemKind::Microgrid
            },
            root,
            consumer_ids,
            network_nodes,
            peak_kw,
            annual_kwh,
            technology: g.technology,
            generation_usd_yr: g.gamma,
            om_usd_yr: g.om,
            cnse_usd_yr,
            network_usd_yr,
            annual_cost_usd: g.gamma + g.om + cnse_usd_yr + network_usd_yr,
        })
    }
}

/// One off-grid system per pruned root of a top-down run. The subtree's
/// network below the cut is kept as the system's distribution network at
/// the cost it had on the grid.
pub fn form_systems(
    result: &PartitionResult,
    tree: &NetworkTree,
    config: &CostConfig,
    catalog: &Catalog,
) -> Result<Vec<OffgridSystem>> {
    let status = &result.node_status;
    let mut systems = Vec::with_capacity(result.pruned_roots.len());
    for &root in &result.pruned_roots {
        let member = |i: NodeId| i == root || status[i] == NodeStatus::Offgrid { system: root };

        // Loads re-derived from the system's own consumers.
        let order: Vec<NodeId> = tree.subtree(root).into_iter().filter(|&i| member(i)).collect();
        let mut loads = vec![Load::ZERO; order.len()];
        let pos: std::collections::HashMap<NodeId, usize> =
            order.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        for (k, &i) in order.iter().enumerate().rev() {
            let n = tree.node(i);
            if n.is_consumer() {
                loads[k] = n.load();
            } else {
                let mut l = Load::ZERO;
                for c in &n.children {
                    if let Some(&kc) = pos.get(c) {
                        l.add(&loads[kc]);
                    }
                }
                loads[k] = l;
            }
        }

        let mut consumers = Vec::new();
        let mut network = Vec::new();
        let mut network_usd_yr = 0.0;
        for (k, &i) in order.iter().enumerate() {
            let n = tree.node(i);
            if n.is_consumer() {
                consumers.push(i);
            } else if i != root {
                network.push(i);
                network_usd_yr += element_cost(n.kind, n.length_km, &loads[k], catalog, config)?;
            }
        }
        systems.push(OffgridSystem::priced(
            Some(root),
            consumers,
            network,
            network_usd_yr,
            tree,
            config,
            catalog,
        )?);
    }
    Ok(systems)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SummaryCell {
    pub customers: usize,
    pub annual_cost_usd: f64,
}

/// Customers and annual cost per system type.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub method: Method,
    pub microgrids: SummaryCell,
    pub isolated: SummaryCell,
    pub grid: SummaryCell,
    pub all: SummaryCell,
}

/// Builds the summary and checks it against the engine's own total.
pub fn summarize(systems: &[OffgridSystem], result: &PartitionResult) -> Result<Summary> {
    let mut microgrids = SummaryCell::default();
    let mut isolated = SummaryCell::default();
    for s in systems {
        let cell = match s.kind {
            SystemKind::Microgrid => &mut microgrids,
            SystemKind::Isolated => &mut isolated,
        };
        cell.customers += s.consumer_ids.len();
        cell.annual_cost_usd += s.annual_cost_usd;
    }
    let grid = SummaryCell {
        customers: result.ongrid_consumers.len(),
        annual_cost_usd: result.grid_cost_usd_yr,
    };
    let all = SummaryCell {
        customers: microgrids.customers + isolated.customers + grid.customers,
        annual_cost_usd: microgrids.annual_cost_usd + isolated.annual_cost_usd + grid.annual_cost_usd,
    };
    let engine = result.total_cost_usd_yr;
    if (all.annual_cost_usd - engine).abs() > 1e-6 * engine.abs().max(1.0)
        || all.customers != result.ongrid_consumers.len() + result.offgrid_consumers.len()
    {
        return Err(Error::InconsistentTotals {
            rows: all.annual_cost_usd,
            engine,
        });
    }
    Ok(Summary {
        method: result.method,
        microgrids,
        isolated,
        grid,
        all,
    })
}

impl Summary {
    /// Delimited table in the results-summary layout: one column per system
    /// type, one row for customers and one for annual cost.
    pub fn to_csv(&self) -> String {
        let cells = [self.microgrids, self.isolated, self.grid, self.all];
        let mut out = String::from("system_type,Microgrids,Isolated,Grid,All\n");
        out.push_str("Number of Customers");
        for c in &cells {
            out.push_str(&format!(",{}", c.customers));
        }
        out.push_str("\nAnnual System Cost ($)");
        for c in &cells {
            out.push_str(&format!(",{:.2}", c.annual_cost_usd));
        }
        out.push('\n');
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}
