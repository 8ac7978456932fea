//! Batch runs: load inputs, run one or both engines, write result bundles,
//! and sweep a cost parameter across values.
//!
//! Bundle layout under the output directory:
//!
//! ```text
//! top-down/   summary.csv audit.csv  partition.csv map.geojson
//! bottom-up/  summary.csv merges.csv partition.csv map.geojson
//! comparison.json            (both methods only)
//! report.csv                 (sweeps; bundles go under <parameter>=<value>/)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::baseline::{run_bottom_up, write_merges_csv, ClusterState};
use crate::costmodel::{Catalog, CostConfig, LookupTable};
use crate::delaunay::DuplicatePolicy;
use crate::error::{Error, Result};
use crate::geojson::{bottomup_map, topdown_map};
use crate::netmodel::{build_tree, NetworkDoc, NetworkTree};
use crate::offgrid::{form_systems, summarize, OffgridSystem, Summary, SystemKind};
use crate::partitioner::{run_partitioner, write_audit_csv, Method, PartitionResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Methods {
    TopDown,
    BottomUp,
    Both,
}

impl Methods {
    pub fn list(self) -> &'static [Method] {
        match self {
            Methods::TopDown => &[Method::TopDown],
            Methods::BottomUp => &[Method::BottomUp],
            Methods::Both => &[Method::TopDown, Method::BottomUp],
        }
    }
}

/// Validated inputs for a run. The tree is kept unpruned; each run works on
/// its own copy.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub tree: NetworkTree,
    pub config: CostConfig,
    pub catalog: Catalog,
    pub duplicates: DuplicatePolicy,
}

fn read(path: &Path, missing: fn(String) -> Error) -> Result<String> {
    if !path.is_file() {
        return Err(missing(path.display().to_string()));
    }
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn in_file(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse { reason, .. } => Error::Parse {
            file: path.display().to_string(),
            reason,
        },
        e => e,
    }
}

impl Inputs {
    /// Reads the network, and the config and catalog when given (defaults
    /// otherwise). A generation lookup table replaces the parametric model.
    pub fn load(
        network: &Path,
        config: Option<&Path>,
        catalog: Option<&Path>,
        lookup: Option<&Path>,
    ) -> Result<Self> {
        let doc = NetworkDoc::from_json(&read(network, Error::NetworkMissing)?).map_err(|e| in_file(e, network))?;
        let config = match config {
            Some(p) => CostConfig::from_json(&read(p, Error::ConfigMissing)?).map_err(|e| in_file(e, p))?,
            None => CostConfig::default(),
        };
        let mut catalog = match catalog {
            Some(p) => Catalog::from_json(&read(p, Error::CatalogMissing)?).map_err(|e| in_file(e, p))?,
            None => Catalog::default(),
        };
        if let Some(p) = lookup {
            let text = read(p, Error::CatalogMissing)?;
            catalog = catalog.with_lookup(LookupTable::from_csv(text.as_bytes())?);
        }
        Inputs::new(build_tree(&doc)?, config, catalog)
    }

    pub fn new(tree: NetworkTree, config: CostConfig, catalog: Catalog) -> Result<Self> {
        config.validate()?;
        catalog.validate()?;
        Ok(Inputs {
            tree,
            config,
            catalog,
            duplicates: DuplicatePolicy::default(),
        })
    }
}

/// Everything one engine run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub result: PartitionResult,
    pub systems: Vec<OffgridSystem>,
    pub summary: Summary,
    /// The tree after the run (pruned for top-down, untouched otherwise).
    pub tree: NetworkTree,
    /// Final clusters of a bottom-up run.
    pub clusters: Option<ClusterState>,
}

pub fn run_method(inputs: &Inputs, method: Method) -> Result<RunOutput> {
    let mut tree = inputs.tree.clone();
    let (result, systems, clusters) = match method {
        Method::TopDown => {
            let r = run_partitioner(&mut tree, &inputs.config, &inputs.catalog)?;
            let s = form_systems(&r, &tree, &inputs.config, &inputs.catalog)?;
            (r, s, None)
        }
        Method::BottomUp => {
            let out = run_bottom_up(&tree, &inputs.config, &inputs.catalog, inputs.duplicates)?;
            (out.result, out.systems, Some(out.state))
        }
    };
    let summary = summarize(&systems, &result)?;
    Ok(RunOutput {
        result,
        systems,
        summary,
        tree,
        clusters,
    })
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io(format!("{}: {e}", path.display()))
}

fn write(path: PathBuf, contents: &[u8]) -> Result<()> {
    fs::write(&path, contents).map_err(io(&path))
}

#[derive(Serialize)]
struct PartitionRow {
    consumer_id: u64,
    mode: &'static str,
    system_id: Option<u64>,
}

fn partition_csv(out: &RunOutput) -> Result<Vec<u8>> {
    let tree = &out.tree;
    let mut rows: Vec<PartitionRow> = out
        .result
        .ongrid_consumers
        .iter()
        .map(|&c| PartitionRow {
            consumer_id: tree.label(c),
            mode: "grid",
            system_id: None,
        })
        .collect();
    for s in &out.systems {
        let id = match s.root {
            Some(r) => tree.label(r),
            None => tree.label(s.consumer_ids[0]),
        };
        for &c in &s.consumer_ids {
            rows.push(PartitionRow {
                consumer_id: tree.label(c),
                mode: match s.kind {
                    SystemKind::Microgrid => "microgrid",
                    SystemKind::Isolated => "isolated",
                },
                system_id: Some(id),
            });
        }
    }
    rows.sort_by_key(|r| r.consumer_id);
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(["consumer_id", "mode", "system_id"]).map_err(|e| Error::Io(e.to_string()))?;
    }
    for r in &rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

/// Writes the four files of one run into `dir`, creating it.
pub fn write_bundle(dir: &Path, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    write(dir.join("summary.csv"), out.summary.to_csv().as_bytes())?;
    write(dir.join("partition.csv"), &partition_csv(out)?)?;
    match &out.clusters {
        None => {
            let mut buf = Vec::new();
            write_audit_csv(&out.result, &out.tree, &mut buf)?;
            write(dir.join("audit.csv"), &buf)?;
            write(dir.join("map.geojson"), topdown_map(&out.tree, &out.result, &out.systems).as_bytes())?;
        }
        Some(state) => {
            let mut buf = Vec::new();
            write_merges_csv(state, &out.tree, &mut buf)?;
            write(dir.join("merges.csv"), &buf)?;
            write(dir.join("map.geojson"), bottomup_map(&out.tree, state).as_bytes())?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodTotals {
    pub method: Method,
    pub offgrid_consumers: usize,
    pub microgrid_consumers: usize,
    pub isolated_consumers: usize,
    pub grid_consumers: usize,
    pub grid_cost_usd_yr: f64,
    pub offgrid_cost_usd_yr: f64,
    pub total_cost_usd_yr: f64,
}

impl MethodTotals {
    pub fn of(out: &RunOutput) -> Self {
        MethodTotals {
            method: out.result.method,
            offgrid_consumers: out.result.offgrid_consumers.len(),
            microgrid_consumers: out.summary.microgrids.customers,
            isolated_consumers: out.summary.isolated.customers,
            grid_consumers: out.result.ongrid_consumers.len(),
            grid_cost_usd_yr: out.result.grid_cost_usd_yr,
            offgrid_cost_usd_yr: out.result.offgrid_cost_usd_yr,
            total_cost_usd_yr: out.result.total_cost_usd_yr,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub all_grid_cost_usd_yr: f64,
    pub runs: Vec<MethodTotals>,
    /// Bottom-up total minus top-down total.
    pub bottom_up_minus_top_down_usd_yr: f64,
}

/// Runs the chosen method(s) and writes a bundle per method under
/// `out_dir/<method>/`, plus `comparison.json` when both ran.
pub fn run_once(inputs: &Inputs, methods: Methods, out_dir: &Path) -> Result<Vec<RunOutput>> {
    let mut outs = Vec::new();
    for &m in methods.list() {
        let out = run_method(inputs, m)?;
        write_bundle(&out_dir.join(m.as_str()), &out)?;
        outs.push(out);
    }
    if let [td, bu] = outs.as_slice() {
        let cmp = Comparison {
            all_grid_cost_usd_yr: td.result.all_grid_cost_usd_yr,
            runs: vec![MethodTotals::of(td), MethodTotals::of(bu)],
            bottom_up_minus_top_down_usd_yr: bu.result.total_cost_usd_yr - td.result.total_cost_usd_yr,
        };
        let mut text = serde_json::to_string_pretty(&cmp).expect("comparison serializes");
        text.push('\n');
        write(out_dir.join("comparison.json"), text.as_bytes())?;
    }
    Ok(outs)
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    FuelCost,
    GridReliability,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::FuelCost => "fuel_cost",
            SweepParameter::GridReliability => "grid_reliability",
        }
    }

    fn apply(self, config: &CostConfig, value: f64) -> CostConfig {
        let mut c = config.clone();
        match self {
            SweepParameter::FuelCost => c.fuel_cost_usd_per_l = value,
            SweepParameter::GridReliability => c.grid_reliability = value,
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    values: Vec<f64>,
}

impl SweepSpec {
    /// Values must be non-empty, finite and strictly increasing or strictly
    /// decreasing.
    pub fn new(parameter: SweepParameter, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSweep("no values".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSweep("values must be finite".into()));
        }
        let up = values.windows(2).all(|w| w[0] < w[1]);
        let down = values.windows(2).all(|w| w[0] > w[1]);
        if !(up || down) {
            return Err(Error::InvalidSweep("values must be strictly monotone".into()));
        }
        Ok(SweepSpec { parameter, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// One (value, method) line of a sweep report. Counts and costs are empty
/// when the run failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub method: Method,
    pub offgrid: Option<usize>,
    pub microgrid: Option<usize>,
    pub isolated: Option<usize>,
    pub grid: Option<usize>,
    pub total_cost_usd_yr: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn ok(value: f64, out: &RunOutput) -> Self {
        SweepRow {
            value,
            method: out.result.method,
            offgrid: Some(out.result.offgrid_consumers.len()),
            microgrid: Some(out.summary.microgrids.customers),
            isolated: Some(out.summary.isolated.customers),
            grid: Some(out.result.ongrid_consumers.len()),
            total_cost_usd_yr: Some(out.result.total_cost_usd_yr),
            error: None,
        }
    }

    fn failed(value: f64, method: Method, e: &Error) -> Self {
        SweepRow {
            value,
            method,
            offgrid: None,
            microgrid: None,
            isolated: None,
            grid: None,
            total_cost_usd_yr: None,
            error: Some(format!("{} {e}", e.class())),
        }
    }
}

/// Runs every value of the sweep, concurrently across values. A failing
/// value yields error rows and does not stop the others. When `out_dir` is
/// given, each value's bundles go to `<parameter>=<value>/` and the report
/// to `report.csv`.
pub fn run_sweep(spec: &SweepSpec, inputs: &Inputs, methods: Methods, out_dir: Option<&Path>) -> Result<Vec<SweepRow>> {
    let per_value: Vec<Vec<SweepRow>> = spec
        .values
        .par_iter()
        .map(|&value| {
            let config = spec.parameter.apply(&inputs.config, value);
            let local = Inputs {
                config,
                ..inputs.clone()
            };
            let dir = out_dir.map(|d| d.join(format!("{}={value}", spec.parameter.as_str())));
            methods
                .list()
                .iter()
                .map(|&m| {
                    let run = local.config.validate().and_then(|_| run_method(&local, m)).and_then(|out| {
                        if let Some(d) = &dir {
                            write_bundle(&d.join(m.as_str()), &out)?;
                        }
                        Ok(out)
                    });
                    match run {
                        Ok(out) => SweepRow::ok(value, &out),
                        Err(e) => SweepRow::failed(value, m, &e),
                    }
                })
                .collect()
        })
        .collect();
    let rows: Vec<SweepRow> = per_value.into_iter().flatten().collect();
    if let Some(d) = out_dir {
        fs::create_dir_all(d).map_err(io(d))?;
        write(d.join("report.csv"), &report_csv(spec.parameter, &rows)?)?;
    }
    Ok(rows)
}

pub fn report_csv(parameter: SweepParameter, rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let e = |e: csv::Error| Error::Io(e.to_string());
    w.write_record([
        parameter.as_str(),
        "method",
        "offgrid",
        "microgrid",
        "isolated",
        "grid",
        "total_cost_usd_yr",
        "error",
    ])
    .map_err(e)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in rows {
        w.write_record([
            r.value.to_string(),
            r.method.as_str().to_string(),
            opt(r.offgrid.map(|v| v.to_string())),
            opt(r.microgrid.map(|v| v.to_string())),
            opt(r.isolated.map(|v| v.to_string())),
            opt(r.grid.map(|v| v.to_string())),
            opt(r.total_cost_usd_yr.map(|v| format!("{v:.2}"))),
            opt(r.error.clone()),
        ])
        .map_err(e)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}
