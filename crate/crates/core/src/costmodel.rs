//! Economic model: annuitized element costs, losses, O&M, grid energy,
//! cost of non-served energy (CNSE) and the off-grid generation oracle.
//!
//! Units throughout: USD, kW, kWh, km, years. Every cost returned here is an
//! annual figure (USD/yr).

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{Load, NetworkNode, NodeKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub fuel_cost_usd_per_l: f64,
    pub grid_reliability: f64,
    pub offgrid_reliability: f64,
    pub energy_cost_usd_per_kwh: f64,
    pub cnse_usd_per_kwh: f64,
    pub discount_rate: f64,
    pub om_fraction_grid: f64,
    pub om_fraction_offgrid: f64,
    pub loss_fraction_per_km: f64,
    pub mv_microgrid_peak_threshold_kw: f64,
}

impl Default for CostConfig {
    /// Base case: diesel at 0.8 $/L, 90 % grid reliability, 0.08 $/kWh.
    fn default() -> Self {
        CostConfig {
            fuel_cost_usd_per_l: 0.8,
            grid_reliability: 0.90,
            offgrid_reliability: 0.95,
            energy_cost_usd_per_kwh: 0.08,
            cnse_usd_per_kwh: 0.5,
            discount_rate: 0.08,
            om_fraction_grid: 0.02,
            om_fraction_offgrid: 0.05,
            loss_fraction_per_km: 0.004,
            mv_microgrid_peak_threshold_kw: 100.0,
        }
    }
}

fn fraction(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidConfig(format!("{name} = {v} is not in [0, 1]")));
    }
    Ok(())
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidConfig(format!("{name} = {v} must be >= 0")));
    }
    Ok(())
}

impl CostConfig {
    pub fn validate(&self) -> Result<()> {
        fraction("grid_reliability", self.grid_reliability)?;
        fraction("offgrid_reliability", self.offgrid_reliability)?;
        fraction("om_fraction_grid", self.om_fraction_grid)?;
        fraction("om_fraction_offgrid", self.om_fraction_offgrid)?;
        fraction("loss_fraction_per_km", self.loss_fraction_per_km)?;
        non_negative("fuel_cost_usd_per_l", self.fuel_cost_usd_per_l)?;
        non_negative("energy_cost_usd_per_kwh", self.energy_cost_usd_per_kwh)?;
        non_negative("cnse_usd_per_kwh", self.cnse_usd_per_kwh)?;
        non_negative(
            "mv_microgrid_peak_threshold_kw",
            self.mv_microgrid_peak_threshold_kw,
        )?;
        if !(self.discount_rate.is_finite() && self.discount_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "discount_rate = {} must be > 0",
                self.discount_rate
            )));
        }
        fraction("discount_rate", self.discount_rate)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: CostConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            file: "config".into(),
            reason: e.to_string(),
        })?;
        c.validate()?;
        Ok(c)
    }
}

// ---------------------------------------------------------------------------
// Catalog

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConductorType {
    pub capacity_kw: f64,
    pub capex_usd_per_km: f64,
    pub lifetime_yr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformerType {
    pub capacity_kw: f64,
    pub capex_usd: f64,
    pub lifetime_yr: f64,
}

/// Parameters of the two parametric off-grid designs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationModel {
    pub diesel_capex_usd_per_kw: f64,
    #[serde(default)]
    pub diesel_fixed_capex_usd: f64,
    pub diesel_l_per_kwh: f64,
    pub diesel_lifetime_yr: f64,
    /// PV array cost, USD per kWp.
    pub solar_capex_usd_per_kw: f64,
    pub battery_capex_usd_per_kwh: f64,
    /// Inverter cost, USD per kW of peak demand.
    #[serde(default)]
    pub inverter_capex_usd_per_kw: f64,
    #[serde(default)]
    pub solar_fixed_capex_usd: f64,
    /// kWp of PV per kWh/day of demand.
    pub pv_kw_per_daily_kwh: f64,
    /// kWh of storage per kWh/day of demand.
    pub battery_kwh_per_daily_kwh: f64,
    pub solar_lifetime_yr: f64,
    pub battery_lifetime_yr: f64,
}

impl GenerationModel {
    /// Diesel only: the solar branch is priced out.
    pub fn diesel_only(capex_per_kw: f64, l_per_kwh: f64, lifetime_yr: f64) -> Self {
        GenerationModel {
            diesel_capex_usd_per_kw: capex_per_kw,
            diesel_fixed_capex_usd: 0.0,
            diesel_l_per_kwh: l_per_kwh,
            diesel_lifetime_yr: lifetime_yr,
            solar_capex_usd_per_kw: 1e12,
            battery_capex_usd_per_kwh: 1e12,
            inverter_capex_usd_per_kw: 1e12,
            solar_fixed_capex_usd: 1e12,
            pv_kw_per_daily_kwh: 1.0,
            battery_kwh_per_daily_kwh: 1.0,
            solar_lifetime_yr: 20.0,
            battery_lifetime_yr: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub conductors: Vec<ConductorType>,
    pub transformers: Vec<TransformerType>,
    pub generation: GenerationModel,
    /// Replaces the parametric model when present.
    #[serde(skip)]
    pub lookup: Option<LookupTable>,
}

impl Default for Catalog {
    fn default() -> Self {
        let c = |capacity_kw, capex_usd_per_km| ConductorType {
            capacity_kw,
            capex_usd_per_km,
            lifetime_yr: 30.0,
        };
        let t = |capacity_kw, capex_usd| TransformerType {
            capacity_kw,
            capex_usd,
            lifetime_yr: 25.0,
        };
        Catalog {
            conductors: vec![
                c(25.0, 6_000.0),
                c(75.0, 9_000.0),
                c(250.0, 14_000.0),
                c(1_000.0, 22_000.0),
                c(4_000.0, 35_000.0),
                c(12_000.0, 55_000.0),
            ],
            transformers: vec![
                t(25.0, 2_500.0),
                t(50.0, 4_000.0),
                t(100.0, 6_500.0),
                t(250.0, 11_000.0),
                t(630.0, 20_000.0),
                t(1_600.0, 40_000.0),
                t(5_000.0, 90_000.0),
                t(12_000.0, 180_000.0),
            ],
            generation: GenerationModel {
                diesel_capex_usd_per_kw: 500.0,
                diesel_fixed_capex_usd: 1_500.0,
                diesel_l_per_kwh: 0.3,
                diesel_lifetime_yr: 10.0,
                solar_capex_usd_per_kw: 1_500.0,
                battery_capex_usd_per_kwh: 450.0,
                inverter_capex_usd_per_kw: 300.0,
                solar_fixed_capex_usd: 2_000.0,
                pv_kw_per_daily_kwh: 0.3,
                battery_kwh_per_daily_kwh: 1.2,
                solar_lifetime_yr: 20.0,
                battery_lifetime_yr: 7.0,
            },
            lookup: None,
        }
    }
}

impl Catalog {
    pub fn validate(&self) -> Result<()> {
        fn check(name: &str, items: &[(f64, f64, f64)]) -> Result<()> {
            if items.is_empty() {
                return Err(Error::InvalidCatalog(format!("{name} list is empty")));
            }
            for (i, &(cap, cost, life)) in items.iter().enumerate() {
                if !(cap.is_finite() && cap > 0.0 && cost.is_finite() && cost >= 0.0) {
                    return Err(Error::InvalidCatalog(format!(
                        "{name}[{i}]: capacity must be > 0 and cost >= 0"
                    )));
                }
                if !(life.is_finite() && life >= 1.0) {
                    return Err(Error::InvalidCatalog(format!("{name}[{i}]: lifetime < 1 yr")));
                }
                if i > 0 {
                    let (pcap, pcost, _) = items[i - 1];
                    if cap <= pcap {
                        return Err(Error::InvalidCatalog(format!(
                            "{name}: capacities not strictly increasing at index {i}"
                        )));
                    }
                    if cost < pcost {
                        return Err(Error::InvalidCatalog(format!(
                            "{name}: capex decreases with capacity at index {i}"
                        )));
                    }
                }
            }
            Ok(())
        }
        let conductors: Vec<_> = self
            .conductors
            .iter()
            .map(|c| (c.capacity_kw, c.capex_usd_per_km, c.lifetime_yr))
            .collect();
        let transformers: Vec<_> = self
            .transformers
            .iter()
            .map(|t| (t.capacity_kw, t.capex_usd, t.lifetime_yr))
            .collect();
        check("conductors", &conductors)?;
        check("transformers", &transformers)?;

        let g = &self.generation;
        for (name, v) in [
            ("diesel_capex_usd_per_kw", g.diesel_capex_usd_per_kw),
            ("diesel_fixed_capex_usd", g.diesel_fixed_capex_usd),
            ("diesel_l_per_kwh", g.diesel_l_per_kwh),
            ("solar_capex_usd_per_kw", g.solar_capex_usd_per_kw),
            ("battery_capex_usd_per_kwh", g.battery_capex_usd_per_kwh),
            ("inverter_capex_usd_per_kw", g.inverter_capex_usd_per_kw),
            ("solar_fixed_capex_usd", g.solar_fixed_capex_usd),
            ("pv_kw_per_daily_kwh", g.pv_kw_per_daily_kwh),
            ("battery_kwh_per_daily_kwh", g.battery_kwh_per_daily_kwh),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidCatalog(format!("generation.{name} = {v}")));
            }
        }
        for (name, v) in [
            ("diesel_lifetime_yr", g.diesel_lifetime_yr),
            ("solar_lifetime_yr", g.solar_lifetime_yr),
            ("battery_lifetime_yr", g.battery_lifetime_yr),
        ] {
            if !(v.is_finite() && v >= 1.0) {
                return Err(Error::InvalidCatalog(format!("generation.{name} = {v}")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Catalog = serde_json::from_str(text).map_err(|e| Error::Parse {
            file: "catalog".into(),
            reason: e.to_string(),
        })?;
        c.validate()?;
        Ok(c)
    }

    pub fn with_lookup(mut self, table: LookupTable) -> Self {
        self.lookup = Some(table);
        self
    }

    /// Cheapest conductor able to carry `peak_kw`; ties go to the lower
    /// capacity, then the lower catalog index.
    pub fn conductor_for(&self, peak_kw: f64) -> Option<&ConductorType> {
        self.conductors
            .iter()
            .enumerate()
            .filter(|(_, c)| c.capacity_kw >= peak_kw)
            .min_by(|(ia, a), (ib, b)| {
                a.capex_usd_per_km
                    .total_cmp(&b.capex_usd_per_km)
                    .then(a.capacity_kw.total_cmp(&b.capacity_kw))
                    .then(ia.cmp(ib))
            })
            .map(|(_, c)| c)
    }

    pub fn transformer_for(&self, peak_kw: f64) -> Option<&TransformerType> {
        self.transformers
            .iter()
            .enumerate()
            .filter(|(_, t)| t.capacity_kw >= peak_kw)
            .min_by(|(ia, a), (ib, b)| {
                a.capex_usd
                    .total_cmp(&b.capex_usd)
                    .then(a.capacity_kw.total_cmp(&b.capacity_kw))
                    .then(ia.cmp(ib))
            })
            .map(|(_, t)| t)
    }
}

// ---------------------------------------------------------------------------
// Lookup-table generation oracle

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LookupRow {
    pub peak_min_kw: f64,
    pub energy_min_kwh: f64,
    pub gamma_usd_yr: f64,
    pub om_usd_yr: f64,
}

/// Pre-computed generation designs keyed by (peak bucket, energy bucket).
/// A query resolves to the row with the greatest lower bounds not above the
/// demand; demand below every bucket resolves to the smallest row.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    rows: Vec<LookupRow>,
}

impl LookupTable {
    pub fn new(mut rows: Vec<LookupRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidLookupTable("no rows".into()));
        }
        for r in &rows {
            let vals = [r.peak_min_kw, r.energy_min_kwh, r.gamma_usd_yr, r.om_usd_yr];
            if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidLookupTable(format!(
                    "row {r:?} has negative or non-finite values"
                )));
            }
        }
        rows.sort_by(|a, b| {
            a.peak_min_kw
                .total_cmp(&b.peak_min_kw)
                .then(a.energy_min_kwh.total_cmp(&b.energy_min_kwh))
        });
        if rows.windows(2).any(|w| {
            w[0].peak_min_kw == w[1].peak_min_kw && w[0].energy_min_kwh == w[1].energy_min_kwh
        }) {
            return Err(Error::InvalidLookupTable("duplicate bucket".into()));
        }
        Ok(LookupTable { rows })
    }

    /// Reads `peak_min_kw,energy_min_kwh,gamma_usd_yr,om_usd_yr` CSV with a
    /// header row.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let rows = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<LookupRow>, _>>()
            .map_err(|e| Error::InvalidLookupTable(e.to_string()))?;
        Self::new(rows)
    }

    pub fn rows(&self) -> &[LookupRow] {
        &self.rows
    }

    pub fn lookup(&self, peak_kw: f64, annual_kwh: f64) -> &LookupRow {
        self.rows
            .iter()
            .rfind(|r| r.peak_min_kw <= peak_kw && r.energy_min_kwh <= annual_kwh)
            .unwrap_or(&self.rows[0])
    }
}

// ---------------------------------------------------------------------------
// Cost functions

/// Equivalent annual cost of `capex` over `lifetime_yr` at `discount_rate`
/// (capital recovery factor).
pub fn annuity(capex: f64, lifetime_yr: f64, discount_rate: f64) -> Result<f64> {
    if !(lifetime_yr.is_finite() && lifetime_yr >= 1.0) {
        return Err(Error::InvalidLifetime(lifetime_yr));
    }
    if !(discount_rate.is_finite() && discount_rate > 0.0) {
        return Err(Error::InvalidRate(discount_rate));
    }
    Ok(capex * discount_rate / (1.0 - (1.0 + discount_rate).powf(-lifetime_yr)))
}

/// Annual cost of a line of `length_km` carrying `peak_kw` / `annual_kwh`:
/// conductor annuity, grid O&M and per-km losses priced at the grid tariff.
pub fn line_cost(
    length_km: f64,
    peak_kw: f64,
    annual_kwh: f64,
    catalog: &Catalog,
    config: &CostConfig,
) -> Result<f64> {
    let conductor = catalog
        .conductor_for(peak_kw)
        .ok_or(Error::CapacityExceedsCatalog {
            node: None,
            item: "conductor",
            peak_kw,
        })?;
    let capex = conductor.capex_usd_per_km * length_km;
    let losses =
        config.loss_fraction_per_km * length_km * annual_kwh * config.energy_cost_usd_per_kwh;
    Ok(annuity(capex, conductor.lifetime_yr, config.discount_rate)?
        + config.om_fraction_grid * capex
        + losses)
}

/// Annual cost of one transformer sized for `peak_kw`, with grid O&M.
pub fn transformer_cost(peak_kw: f64, catalog: &Catalog, config: &CostConfig) -> Result<f64> {
    let t = catalog
        .transformer_for(peak_kw)
        .ok_or(Error::CapacityExceedsCatalog {
            node: None,
            item: "transformer",
            peak_kw,
        })?;
    Ok(annuity(t.capex_usd, t.lifetime_yr, config.discount_rate)? + config.om_fraction_grid * t.capex_usd)
}

/// Self cost of an element at an arbitrary load. Consumers cost nothing.
pub fn element_cost(
    kind: NodeKind,
    length_km: f64,
    load: &Load,
    catalog: &Catalog,
    config: &CostConfig,
) -> Result<f64> {
    match kind {
        NodeKind::Consumer => Ok(0.0),
        NodeKind::LineSegment => line_cost(length_km, load.peak_kw, load.annual_kwh, catalog, config),
        NodeKind::Transformer => transformer_cost(load.peak_kw, catalog, config),
    }
}

/// Self cost σ of a node at its current aggregates.
pub fn element_self_cost(node: &NetworkNode, catalog: &Catalog, config: &CostConfig) -> Result<f64> {
    element_cost(node.kind, node.length_km, &node.load(), catalog, config).map_err(|e| match e {
        Error::CapacityExceedsCatalog { item, peak_kw, .. } => Error::CapacityExceedsCatalog {
            node: Some(node.label),
            item,
            peak_kw,
        },
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technology {
    Diesel,
    SolarBattery,
    Table,
}

/// Result of the generation oracle for one off-grid system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationCost {
    /// Annuitized investment plus fuel (γ), including the MV/LV transformer
    /// of large microgrids.
    pub gamma: f64,
    /// Off-grid O&M and management (feeds η).
    pub om: f64,
    pub technology: Technology,
}

fn diesel_design(peak_kw: f64, annual_kwh: f64, g: &GenerationModel, config: &CostConfig) -> Result<(f64, f64)> {
    let capex = g.diesel_fixed_capex_usd + g.diesel_capex_usd_per_kw * peak_kw;
    let fuel = config.fuel_cost_usd_per_l * g.diesel_l_per_kwh * annual_kwh * config.offgrid_reliability;
    Ok((
        annuity(capex, g.diesel_lifetime_yr, config.discount_rate)? + fuel,
        config.om_fraction_offgrid * capex,
    ))
}

fn solar_design(peak_kw: f64, annual_kwh: f64, g: &GenerationModel, config: &CostConfig) -> Result<(f64, f64)> {
    let daily_kwh = annual_kwh / 365.0;
    let pv_capex = g.solar_fixed_capex_usd
        + g.solar_capex_usd_per_kw * g.pv_kw_per_daily_kwh * daily_kwh
        + g.inverter_capex_usd_per_kw * peak_kw;
    let battery_capex = g.battery_capex_usd_per_kwh * g.battery_kwh_per_daily_kwh * daily_kwh;
    Ok((
        annuity(pv_capex, g.solar_lifetime_yr, config.discount_rate)?
            + annuity(battery_capex, g.battery_lifetime_yr, config.discount_rate)?,
        config.om_fraction_offgrid * (pv_capex + battery_capex),
    ))
}

/// Off-grid generation cost for an aggregate demand: the cheaper (by γ + O&M)
/// of the diesel and solar+battery designs, or the lookup table when the
/// catalog carries one.
pub fn generation_cost(peak_kw: f64, annual_kwh: f64, config: &CostConfig, catalog: &Catalog) -> Result<GenerationCost> {
    let mut cost = match &catalog.lookup {
        Some(table) => {
            let row = table.lookup(peak_kw, annual_kwh);
            GenerationCost {
                gamma: row.gamma_usd_yr,
                om: row.om_usd_yr,
                technology: Technology::Table,
            }
        }
        None => {
            let g = &catalog.generation;
            let (dg, dom) = diesel_design(peak_kw, annual_kwh, g, config)?;
            let (sg, som) = solar_design(peak_kw, annual_kwh, g, config)?;
            if sg + som < dg + dom {
                GenerationCost {
                    gamma: sg,
                    om: som,
                    technology: Technology::SolarBattery,
                }
            } else {
                GenerationCost {
                    gamma: dg,
                    om: dom,
                    technology: Technology::Diesel,
                }
            }
        }
    };
    if peak_kw > config.mv_microgrid_peak_threshold_kw {
        let t = catalog
            .transformer_for(peak_kw)
            .ok_or(Error::CapacityExceedsCatalog {
                node: None,
                item: "transformer",
                peak_kw,
            })?;
        cost.gamma += annuity(t.capex_usd, t.lifetime_yr, config.discount_rate)?;
    }
    Ok(cost)
}

/// Cost of non-served energy at the given reliability.
pub fn cnse(annual_kwh: f64, reliability: f64, config: &CostConfig) -> f64 {
    config.cnse_usd_per_kwh * (1.0 - reliability) * annual_kwh
}

/// Grid energy purchase cost; only served energy is paid for.
pub fn grid_energy_cost(annual_kwh: f64, config: &CostConfig) -> f64 {
    config.energy_cost_usd_per_kwh * annual_kwh * config.grid_reliability
}

/// The seven terms of the pruning decision value for one node.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DeltaBreakdown {
    /// Off-grid generation annuity.
    pub gamma: f64,
    /// Net O&M of supplying off-grid instead of from the grid.
    pub eta: f64,
    /// Off-grid CNSE.
    pub omega: f64,
    /// Upstream savings in ancestor self costs.
    pub beta: f64,
    /// Grid CNSE no longer incurred.
    pub tau: f64,
    /// Grid energy purchase no longer incurred.
    pub zeta: f64,
    /// The node's own self cost.
    pub sigma: f64,
    pub delta: f64,
}

impl DeltaBreakdown {
    pub fn new(gamma: f64, eta: f64, omega: f64, beta: f64, tau: f64, zeta: f64, sigma: f64) -> Self {
        DeltaBreakdown {
            gamma,
            eta,
            omega,
            beta,
            tau,
            zeta,
            sigma,
            delta: gamma + eta + omega - beta - tau - zeta - sigma,
        }
    }

    /// Cost of going off-grid (γ + η + ω).
    pub fn offgrid_cost(&self) -> f64 {
        self.gamma + self.eta + self.omega
    }

    /// Savings of leaving the grid (β + τ + ζ + σ).
    pub fn savings(&self) -> f64 {
        self.beta + self.tau + self.zeta + self.sigma
    }
}
