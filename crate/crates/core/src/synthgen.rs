//! Synthetic radial networks: villages scattered around a grid root, each
//! behind its own transformer, wired by nearest-neighbour spanning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{NetworkDoc, NodeKind, NodeRecord, VoltageLevel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileShare {
    pub share: f64,
    pub peak_kw: f64,
    pub annual_kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub n_villages: usize,
    /// Inclusive bounds.
    pub consumers_per_village: (usize, usize),
    pub village_radius_km: f64,
    /// Inclusive bounds on the distance of a village centre from the root.
    pub village_distance_km: (f64, f64),
    pub profiles: Vec<ProfileShare>,
}

fn default_profiles() -> Vec<ProfileShare> {
    vec![
        ProfileShare {
            share: 0.7,
            peak_kw: 0.6,
            annual_kwh: 700.0,
        },
        ProfileShare {
            share: 0.25,
            peak_kw: 1.5,
            annual_kwh: 2200.0,
        },
        ProfileShare {
            share: 0.05,
            peak_kw: 6.0,
            annual_kwh: 12000.0,
        },
    ]
}

impl ScenarioSpec {
    /// About a thousand consumers in twenty villages.
    pub fn default_scenario(seed: u64) -> Self {
        ScenarioSpec {
            seed,
            n_villages: 20,
            consumers_per_village: (30, 70),
            village_radius_km: 0.6,
            village_distance_km: (1.0, 40.0),
            profiles: default_profiles(),
        }
    }

    /// 152 villages of 44 consumers: 6688 in all.
    pub fn full_scale(seed: u64) -> Self {
        ScenarioSpec {
            n_villages: 152,
            consumers_per_village: (44, 44),
            village_distance_km: (1.0, 60.0),
            ..Self::default_scenario(seed)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            file: "scenario".into(),
            reason: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |why: &str| Err(Error::InfeasibleSpec(why.into()));
        let (cmin, cmax) = self.consumers_per_village;
        let (dmin, dmax) = self.village_distance_km;
        if self.n_villages == 0 {
            return fail("at least one village is required");
        }
        if cmin == 0 || cmin > cmax {
            return fail("consumers_per_village must satisfy 1 <= min <= max");
        }
        if !(self.village_radius_km.is_finite() && self.village_radius_km >= 0.0) {
            return fail("village_radius_km must be finite and non-negative");
        }
        if !(dmin.is_finite() && dmax.is_finite() && 0.0 <= dmin && dmin <= dmax) {
            return fail("village_distance_km must satisfy 0 <= min <= max");
        }
        if self.profiles.is_empty() {
            return fail("the profile mix is empty");
        }
        for p in &self.profiles {
            let ok = |v: f64| v.is_finite() && v >= 0.0;
            if !(ok(p.share) && ok(p.peak_kw) && ok(p.annual_kwh)) {
                return fail("profile shares and demands must be finite and non-negative");
            }
        }
        if self.profiles.iter().map(|p| p.share).sum::<f64>() <= 0.0 {
            return fail("profile shares sum to zero");
        }
        Ok(())
    }
}

struct Builder {
    nodes: Vec<NodeRecord>,
}

impl Builder {
    fn push(&mut self, kind: NodeKind, parent: Option<u64>, length_km: f64, at: (f64, f64), voltage: VoltageLevel) -> u64 {
        let id = self.nodes.len() as u64;
        self.nodes.push(NodeRecord {
            id,
            kind,
            parent,
            length_km,
            x_km: at.0,
            y_km: at.1,
            voltage,
            peak_kw: 0.0,
            annual_kwh: 0.0,
            profile_id: None,
        });
        id
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Prim's spanning from `origin`: for each point in connection order,
/// returns (point index, attachment) where attachment is `None` for the
/// origin or `Some(j)` for an earlier point.
fn span(origin: (f64, f64), points: &[(f64, f64)]) -> Vec<(usize, Option<usize>)> {
    let n = points.len();
    let mut best: Vec<(f64, Option<usize>)> = points.iter().map(|&p| (dist(origin, p), None)).collect();
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pick = usize::MAX;
        for i in 0..n {
            if !done[i] && (pick == usize::MAX || best[i].0 < best[pick].0) {
                pick = i;
            }
        }
        done[pick] = true;
        order.push((pick, best[pick].1));
        for i in 0..n {
            let d = dist(points[pick], points[i]);
            if !done[i] && d < best[i].0 {
                best[i] = (d, Some(pick));
            }
        }
    }
    order
}

/// Builds a network document from the spec. Same spec, same document.
pub fn generate(spec: &ScenarioSpec) -> Result<NetworkDoc> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total_share: f64 = spec.profiles.iter().map(|p| p.share).sum();

    let (dmin, dmax) = spec.village_distance_km;
    let centres: Vec<(f64, f64)> = (0..spec.n_villages)
        .map(|_| {
            let angle = rng.random::<f64>() * std::f64::consts::TAU;
            let r = dmin + (dmax - dmin) * rng.random::<f64>();
            (r * angle.cos(), r * angle.sin())
        })
        .collect();

    let mut b = Builder { nodes: Vec::new() };
    let root = b.push(NodeKind::Transformer, None, 0.0, (0.0, 0.0), VoltageLevel::Mv);

    // Medium-voltage backbone through the village centres.
    let mut feeder = vec![0u64; spec.n_villages];
    let mut transformer = vec![0u64; spec.n_villages];
    for (v, attach) in span((0.0, 0.0), &centres) {
        let (parent, from) = match attach {
            None => (root, (0.0, 0.0)),
            Some(j) => (feeder[j], centres[j]),
        };
        feeder[v] = b.push(NodeKind::LineSegment, Some(parent), dist(from, centres[v]), centres[v], VoltageLevel::Mv);
        transformer[v] = b.push(NodeKind::Transformer, Some(feeder[v]), 0.0, centres[v], VoltageLevel::Lv);
    }

    // Low-voltage spans inside each village, in village order.
    let (cmin, cmax) = spec.consumers_per_village;
    for v in 0..spec.n_villages {
        let n = rng.random_range(cmin..=cmax);
        let homes: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let angle = rng.random::<f64>() * std::f64::consts::TAU;
                let r = spec.village_radius_km * rng.random::<f64>().sqrt();
                (centres[v].0 + r * angle.cos(), centres[v].1 + r * angle.sin())
            })
            .collect();
        let demands: Vec<ProfileShare> = (0..n)
            .map(|_| {
                let mut pick = rng.random::<f64>() * total_share;
                for p in &spec.profiles {
                    if pick < p.share {
                        return *p;
                    }
                    pick -= p.share;
                }
                *spec.profiles.iter().rev().find(|p| p.share > 0.0).expect("positive share exists")
            })
            .collect();
        let mut line = vec![0u64; n];
        for (h, attach) in span(centres[v], &homes) {
            let (parent, from) = match attach {
                None => (transformer[v], centres[v]),
                Some(j) => (line[j], homes[j]),
            };
            line[h] = b.push(NodeKind::LineSegment, Some(parent), dist(from, homes[h]), homes[h], VoltageLevel::Lv);
            let c = b.push(NodeKind::Consumer, Some(line[h]), 0.0, homes[h], VoltageLevel::Lv);
            let rec = &mut b.nodes[c as usize];
            rec.peak_kw = demands[h].peak_kw;
            rec.annual_kwh = demands[h].annual_kwh;
        }
    }

    Ok(NetworkDoc {
        nodes: b.nodes,
        profiles: Default::default(),
    })
}
