mod common;

use gridsplit::baseline::{agglomerate_offgrid, agglomerate_ongrid, run_bottom_up, ClusterState};
use gridsplit::costmodel::{Catalog, CostConfig};
use gridsplit::delaunay::DuplicatePolicy;
use gridsplit::harness::{run_method, Inputs};
use gridsplit::netmodel::{build_tree, NetworkDoc, NodeKind, NodeRecord, VoltageLevel};
use gridsplit::partitioner::Method;
use gridsplit::synthgen::{generate, ScenarioSpec};
use rand::seq::SliceRandom;

/// Ten equal consumers one every 200 m along a line, 30 km from the root.
fn line_of_ten() -> NetworkDoc {
    let rec = |id: u64, kind, parent: Option<u64>, len: f64, x: f64| NodeRecord {
        id,
        kind,
        parent,
        length_km: len,
        x_km: x,
        y_km: 0.0,
        voltage: VoltageLevel::Lv,
        peak_kw: if kind == NodeKind::Consumer { 1.0 } else { 0.0 },
        annual_kwh: if kind == NodeKind::Consumer { 1500.0 } else { 0.0 },
        profile_id: None,
    };
    let mut nodes = vec![rec(0, NodeKind::Transformer, None, 0.0, 0.0)];
    let mut parent = 0;
    for i in 0..10u64 {
        let x = 30.0 + 0.2 * i as f64;
        let line = 1 + 2 * i;
        nodes.push(rec(line, NodeKind::LineSegment, Some(parent), if i == 0 { 30.0 } else { 0.2 }, x));
        nodes.push(rec(line + 1, NodeKind::Consumer, Some(line), 0.0, x));
        parent = line;
    }
    NetworkDoc {
        nodes,
        profiles: Default::default(),
    }
}

#[test]
fn line_clustering_ignores_tie_order() {
    let tree = build_tree(&line_of_ten()).unwrap();
    let config = CostConfig::default();
    let catalog = Catalog::default();
    let mut reference = ClusterState::new(&tree, DuplicatePolicy::Reject).unwrap();
    agglomerate_offgrid(&mut reference, &config, &catalog);
    let expected = reference.assignment();
    assert!(reference.active_arcs().count() > 0);

    let arcs = reference.arcs().to_vec();
    let mut r = common::rng(3);
    for _ in 0..20 {
        // shuffle within runs of equal length only
        let mut shuffled = arcs.clone();
        let mut start = 0;
        while start < shuffled.len() {
            let mut end = start + 1;
            while end < shuffled.len() && (shuffled[end].length_km - shuffled[start].length_km).abs() < 1e-9 {
                end += 1;
            }
            shuffled[start..end].shuffle(&mut r);
            start = end;
        }
        let mut s = ClusterState::with_arcs(&tree, shuffled).unwrap();
        agglomerate_offgrid(&mut s, &config, &catalog);
        assert_eq!(s.assignment(), expected);
    }
}

#[test]
fn village_of_fifty_partitions_cleanly() {
    let spec = ScenarioSpec {
        n_villages: 1,
        consumers_per_village: (50, 50),
        village_distance_km: (15.0, 15.0),
        ..ScenarioSpec::default_scenario(11)
    };
    let tree = build_tree(&generate(&spec).unwrap()).unwrap();
    let inputs = Inputs::new(tree.clone(), CostConfig::default(), Catalog::default()).unwrap();
    let td = run_method(&inputs, Method::TopDown).unwrap();
    let bu = run_method(&inputs, Method::BottomUp).unwrap();
    assert!(bu.result.check_partition(&tree).is_empty());
    assert_eq!(bu.summary.all.customers, 50);
    let (lo, hi) = (td.result.total_cost_usd_yr, bu.result.total_cost_usd_yr);
    eprintln!("50-consumer village: top-down {lo:.2}, bottom-up {hi:.2}, all-grid {:.2}", td.result.all_grid_cost_usd_yr);
    assert!(lo.is_finite() && hi.is_finite());
}

#[test]
fn every_merge_saves_and_the_end_is_a_fixpoint() {
    for seed in 0..5 {
        let spec = ScenarioSpec {
            n_villages: 4,
            ..ScenarioSpec::default_scenario(seed)
        };
        let tree = build_tree(&generate(&spec).unwrap()).unwrap();
        let config = CostConfig::default();
        let catalog = Catalog::default();
        let mut out = run_bottom_up(&tree, &config, &catalog, DuplicatePolicy::Perturb).unwrap();
        assert!(out.state.merges.iter().all(|m| m.cost_after < m.cost_before));
        assert_eq!(out.state.offgrid_pass(&config, &catalog), 0);
        assert_eq!(out.state.ongrid_pass(&config, &catalog), 0);
        assert!(out.result.check_partition(&tree).is_empty());
    }
}

#[test]
fn far_cheap_generation_stays_offgrid_and_adjacent_connects() {
    let tree = build_tree(&line_of_ten()).unwrap();
    let config = CostConfig::default();
    let mut cheap = Catalog::default();
    cheap.generation.diesel_capex_usd_per_kw = 1.0;
    cheap.generation.diesel_fixed_capex_usd = 0.0;
    let mut s = ClusterState::new(&tree, DuplicatePolicy::Reject).unwrap();
    agglomerate_offgrid(&mut s, &config, &cheap);
    agglomerate_ongrid(&mut s, (-1000.0, 0.0), &config, &cheap);
    assert!(s.clusters().iter().all(|c| !c.grid));

    let mut s = ClusterState::new(&tree, DuplicatePolicy::Reject).unwrap();
    agglomerate_offgrid(&mut s, &config, &Catalog::default());
    agglomerate_ongrid(&mut s, (30.0, 0.001), &config, &Catalog::default());
    let first = tree.consumer_ids[0];
    assert!(s.clusters().iter().any(|c| c.grid && c.consumers.contains(&first)));
}
