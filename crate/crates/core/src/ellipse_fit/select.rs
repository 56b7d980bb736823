//! Greedy choice of the connections that split a clump into nuclei.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{FitQuality, QualityParams};
use crate::geom::{self, Point};
use crate::pairing::{EdgeKind, PointPair, SubContour};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectionSource {
    /// Adjacent pair accepted by the fit-quality search.
    Adjacent,
    /// Non-adjacent pair used to partition the clump.
    Partition,
}

/// A committed straight connection between two candidate points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub a: usize,
    pub b: usize,
    pub source: ConnectionSource,
    /// Score of the region the connection closed off. `None` for partition cuts.
    pub q: Option<f64>,
}

impl Connection {
    pub fn key(&self) -> (usize, usize) {
        (self.a.min(self.b), self.a.max(self.b))
    }
}

/// One scored candidate region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Arc start and end vertex ids; the region is that arc plus the chord back.
    pub from: usize,
    pub to: usize,
    pub quality: Option<FitQuality>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Selection {
    /// Connections kept, in commit order.
    pub connections: Vec<Connection>,
    /// Final regions, one per nucleus.
    pub regions: Vec<SubContour>,
    pub evaluations: Vec<Evaluation>,
    /// Connections removed after the search (sharp angles, rejected partitions).
    pub pruned: Vec<Connection>,
}

fn q_of(f: &Option<FitQuality>) -> f64 {
    f.map_or(0.0, |f| f.q)
}

/// Repeatedly cut off the best-scoring region closed by an adjacent pair.
///
/// `regions` is the partition of the clump produced by the non-adjacent
/// cuts listed in `partition`. `positions` holds candidate coordinates and
/// `score` fits and scores a region (`None` means the fit failed).
///
/// After the search, each partition cut is kept only if merging the two
/// regions it separates does not score better than the weaker of them, and
/// connections meeting at a shared endpoint under `sharp_angle_min` are
/// pruned (the later one goes).
pub fn select_connections<F>(
    mut regions: Vec<SubContour>,
    c_plus: &[PointPair],
    partition: &[PointPair],
    positions: &[Point],
    params: &QualityParams,
    mut score: F,
) -> Selection
where
    F: FnMut(&SubContour) -> Option<FitQuality>,
{
    let adjacent: BTreeSet<(usize, usize)> = c_plus.iter().map(PointPair::key).collect();
    let mut connections: Vec<Connection> =
        partition.iter().map(|p| Connection { a: p.a, b: p.b, source: ConnectionSource::Partition, q: None }).collect();
    // an arc-plus-chord region depends only on its arc, so scores stay valid
    // across splits
    let mut cache: BTreeMap<(usize, usize), Option<FitQuality>> = BTreeMap::new();
    let mut evaluations = Vec::new();

    let crosses = |conns: &[Connection], u: usize, v: usize| {
        conns.iter().any(|c| geom::segments_cross(positions[u], positions[v], positions[c.a], positions[c.b]))
    };

    loop {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for (ri, region) in regions.iter().enumerate() {
            // the remainder must keep at least one arc
            if region.len() < 2 || region.arc_count() < 2 {
                continue;
            }
            for k in 0..region.len() {
                if region.edges[k] != EdgeKind::Arc {
                    continue;
                }
                let (u, v) = region.edge_ends(k);
                let key = (u.min(v), u.max(v));
                if u == v || !adjacent.contains(&key) || crosses(&connections, u, v) {
                    continue;
                }
                let quality = *cache.entry((u, v)).or_insert_with(|| {
                    let f = score(&SubContour::arc_with_chord(region.parent, u, v));
                    evaluations.push(Evaluation { from: u, to: v, quality: f });
                    f
                });
                let q = q_of(&quality);
                if q <= params.q_threshold {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bq, bkey, _, _)) => q > bq || (q == bq && key < bkey),
                };
                if better {
                    best = Some((q, key, ri, k));
                }
            }
        }
        let Some((q, _, ri, k)) = best else { break };
        let region = regions.remove(ri);
        let (u, v) = region.edge_ends(k);
        let (piece, rest) = region.split(k, (k + 1) % region.len());
        regions.push(piece);
        regions.push(rest);
        connections.push(Connection { a: u, b: v, source: ConnectionSource::Adjacent, q: Some(q) });
    }

    let mut pruned = Vec::new();

    // latest partition cuts first, so merges never reach through a removed chord
    let partition_keys: Vec<(usize, usize)> = partition.iter().rev().map(PointPair::key).collect();
    for key in partition_keys {
        let Some((i, j)) = regions_sharing(&regions, key) else { continue };
        let Some(merged) = regions[i].merge(&regions[j], key.0, key.1) else { continue };
        let weaker = q_of(&score(&regions[i])).min(q_of(&score(&regions[j])));
        if q_of(&score(&merged)) > weaker {
            replace_pair(&mut regions, i, j, merged);
            let pos = connections.iter().position(|c| c.key() == key).expect("partition cut is recorded");
            pruned.push(connections.remove(pos));
        }
    }

    let min_angle = params.sharp_angle_min.to_radians();
    let mut idx = 1;
    while idx < connections.len() {
        let c = connections[idx];
        let sharp = connections[..idx].iter().any(|o| {
            let shared = [c.a, c.b].into_iter().find(|&e| e == o.a || e == o.b);
            shared.is_some_and(|s| {
                let far_c = if c.a == s { c.b } else { c.a };
                let far_o = if o.a == s { o.b } else { o.a };
                geom::angle_between(positions[far_c] - positions[s], positions[far_o] - positions[s]) < min_angle
            })
        });
        if sharp && c.source == ConnectionSource::Adjacent {
            if let Some((i, j)) = regions_sharing(&regions, c.key()) {
                if let Some(merged) = regions[i].merge(&regions[j], c.a, c.b) {
                    replace_pair(&mut regions, i, j, merged);
                }
            }
            pruned.push(connections.remove(idx));
        } else {
            idx += 1;
        }
    }

    Selection { connections, regions, evaluations, pruned }
}

fn regions_sharing(regions: &[SubContour], (u, v): (usize, usize)) -> Option<(usize, usize)> {
    let mut hits = regions.iter().enumerate().filter(|(_, r)| r.has_chord(u, v)).map(|(i, _)| i);
    Some((hits.next()?, hits.next()?))
}

fn replace_pair(regions: &mut Vec<SubContour>, i: usize, j: usize, merged: SubContour) {
    let (lo, hi) = (i.min(j), i.max(j));
    regions.remove(hi);
    regions[lo] = merged;
}
