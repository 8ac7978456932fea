//! Delaunay arcs between consumers, sorted by length.

use delaunator::{triangulate, Point};

use crate::error::{Error, Result};
use crate::netmodel::NodeId;

/// Undirected arc between two consumers, `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub a: NodeId,
    pub b: NodeId,
    pub length_km: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DuplicatePolicy {
    /// Nudge coincident points apart by a few millimetres.
    #[default]
    Perturb,
    Reject,
}

const NUDGE_KM: f64 = 1e-6;

fn sort_arcs(arcs: &mut [Arc]) {
    arcs.sort_by(|x, y| {
        x.length_km
            .total_cmp(&y.length_km)
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });
}

fn arc(points: &[(NodeId, f64, f64)], i: usize, j: usize) -> Arc {
    let (pi, pj) = (points[i], points[j]);
    let (a, b) = if pi.0 < pj.0 { (pi.0, pj.0) } else { (pj.0, pi.0) };
    Arc {
        a,
        b,
        length_km: (pi.1 - pj.1).hypot(pi.2 - pj.2),
    }
}

/// Delaunay triangulation edges of `points` (id, x, y), ascending by length
/// with ties broken by (lower id, higher id). Fewer than three points or a
/// collinear set fall back to the complete graph. Arc lengths are measured
/// on the original coordinates even when duplicates are nudged apart.
pub fn build_delaunay(points: &[(NodeId, f64, f64)], duplicates: DuplicatePolicy) -> Result<Vec<Arc>> {
    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        points[i]
            .1
            .total_cmp(&points[j].1)
            .then(points[i].2.total_cmp(&points[j].2))
            .then(points[i].0.cmp(&points[j].0))
    });
    let mut coords: Vec<Point> = points.iter().map(|p| Point { x: p.1, y: p.2 }).collect();
    let mut run = 0usize;
    for w in 1..n {
        let (i, j) = (order[w - 1], order[w]);
        if points[i].1 == points[j].1 && points[i].2 == points[j].2 {
            if duplicates == DuplicatePolicy::Reject {
                let (a, b) = (points[i].0.min(points[j].0), points[i].0.max(points[j].0));
                return Err(Error::DuplicatePoints(a as u64, b as u64));
            }
            run += 1;
            let angle = run as f64 * 2.399_963; // golden angle, spreads repeated nudges
            coords[j].x += NUDGE_KM * run as f64 * angle.cos();
            coords[j].y += NUDGE_KM * run as f64 * angle.sin();
        } else {
            run = 0;
        }
    }

    let mut arcs = Vec::new();
    let tri = if n >= 3 { Some(triangulate(&coords)) } else { None };
    match tri.filter(|t| !t.triangles.is_empty()) {
        None => {
            for i in 0..n {
                for j in i + 1..n {
                    arcs.push(arc(points, i, j));
                }
            }
        }
        Some(tri) => {
            for e in 0..tri.triangles.len() {
                // each interior edge appears twice; keep one half-edge
                let twin = tri.halfedges[e];
                if twin == delaunator::EMPTY || e > twin {
                    let i = tri.triangles[e];
                    let j = tri.triangles[delaunator::next_halfedge(e)];
                    arcs.push(arc(points, i, j));
                }
            }
        }
    }
    sort_arcs(&mut arcs);
    Ok(arcs)
}
