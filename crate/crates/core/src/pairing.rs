//! Candidate pair screening and contour partitioning.
//!
//! Candidates that follow each other along a contour are *adjacent*. Close
//! adjacent candidates separated by little convex boundary (low walking
//! energy) describe the same notch and are merged. Close non-adjacent
//! candidates are connected directly when they are within the inner radius,
//! or when their normal-angle score is high enough within the outer ring;
//! those connections partition the clump into sub-regions.

use serde::{Deserialize, Serialize};

use crate::curvature::{CandidatePoint, CurvatureProfile, Segment};
use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::image_prep::{BinaryMask, Contour};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingParams {
    /// Inner search radius (pixels).
    pub r1: f64,
    /// Outer search radius (pixels).
    pub r2: f64,
    /// Numerator weight of the pair score.
    pub alpha: f64,
    /// Curvature weight in the pair-score denominator.
    pub beta: f64,
    /// Ring pairs need a score above this.
    pub v_threshold: f64,
    /// Adjacent pairs below this convex turning (radians) are merged.
    pub walk_energy_threshold: f64,
    /// Also require the score test for non-adjacent pairs inside `r1`.
    pub inner_requires_v: bool,
}

impl Default for PairingParams {
    fn default() -> Self {
        Self {
            r1: 45.0,
            r2: 70.0,
            alpha: 100.0,
            beta: 0.34,
            v_threshold: 200.0,
            walk_energy_threshold: 0.35,
            inner_requires_v: false,
        }
    }
}

impl PairingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r1 > 0.0 && self.r1 < self.r2) {
            return Err(Error::Config(format!("need 0 < r1 < r2, got r1={} r2={}", self.r1, self.r2)));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::Config("alpha and beta must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    Adjacent,
    NonadjacentInner,
    NonadjacentRing,
}

/// A screened pair of candidates, referenced by index into the contour's
/// candidate list (`a < b`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointPair {
    pub a: usize,
    pub b: usize,
    pub kind: PairKind,
    pub distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub walk_energy: Option<f64>,
}

impl PointPair {
    pub fn key(&self) -> (usize, usize) {
        (self.a.min(self.b), self.a.max(self.b))
    }
}

/// Circularly consecutive candidates, as index pairs into `candidates`
/// (which must be sorted by contour index). Two candidates form a single
/// pair.
pub fn classify_adjacency(candidates: &[CandidatePoint]) -> Vec<(usize, usize)> {
    debug_assert!(candidates.windows(2).all(|w| w[0].contour_index <= w[1].contour_index));
    match candidates.len() {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        n => (0..n).map(|i| (i, (i + 1) % n)).collect(),
    }
}

/// Trapezoidal integral of `max(kappa, 0)` along the forward arc from
/// vertex `from` to vertex `to`.
pub fn arc_energy(profile: &CurvatureProfile, from: usize, to: usize) -> f64 {
    let n = profile.len();
    let steps = (to + n - from) % n;
    let mut e = 0.0;
    for k in 0..steps {
        let i = (from + k) % n;
        let j = (i + 1) % n;
        e += 0.5 * (profile.kappa[i].max(0.0) + profile.kappa[j].max(0.0)) * profile.step_length(i);
    }
    e
}

fn forward_length(profile: &CurvatureProfile, from: usize, to: usize) -> f64 {
    let d = profile.arc[to] - profile.arc[from];
    d.rem_euclid(1.0) * profile.length
}

/// Convex turning (radians) along the shorter contour arc between two
/// candidates.
pub fn walking_energy(profile: &CurvatureProfile, p: &CandidatePoint, q: &CandidatePoint) -> f64 {
    let i = p.contour_index.min(q.contour_index);
    let j = p.contour_index.max(q.contour_index);
    if i == j {
        return 0.0;
    }
    let fwd = forward_length(profile, i, j);
    if fwd <= profile.length - fwd {
        arc_energy(profile, i, j)
    } else {
        arc_energy(profile, j, i)
    }
}

/// Repeatedly merge the close adjacent pair with the lowest walking energy
/// below threshold, keeping the point with larger `|kappa|`.
pub fn merge_low_energy(
    mut candidates: Vec<CandidatePoint>,
    profile: &CurvatureProfile,
    params: &PairingParams,
) -> Vec<CandidatePoint> {
    candidates.sort_by_key(|c| c.contour_index);
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, j) in classify_adjacency(&candidates) {
            let (p, q) = (&candidates[i], &candidates[j]);
            if p.position.dist(q.position) > params.r1 {
                continue;
            }
            let e = walking_energy(profile, p, q);
            if e >= params.walk_energy_threshold {
                continue;
            }
            let key = p.contour_index.min(q.contour_index);
            let better = match best {
                None => true,
                Some((be, bi, bj)) => {
                    let bkey = candidates[bi].contour_index.min(candidates[bj].contour_index);
                    e < be || (e == be && key < bkey)
                }
            };
            if better {
                best = Some((e, i, j));
            }
        }
        let Some((_, i, j)) = best else { break };
        let (ki, kj) = (candidates[i].kappa.abs(), candidates[j].kappa.abs());
        let drop =
            if ki > kj || (ki == kj && candidates[i].contour_index < candidates[j].contour_index) { j } else { i };
        candidates.remove(drop);
    }
    candidates
}

/// Pair score `alpha * theta / (D + beta * (|kp| + |kq|))` with the normal
/// angle `theta` in degrees.
pub fn v_score(p: &CandidatePoint, q: &CandidatePoint, params: &PairingParams) -> Result<f64> {
    let d = p.position.dist(q.position);
    let denom = d + params.beta * (p.kappa.abs() + q.kappa.abs());
    if d <= 1e-12 || denom <= 1e-12 {
        return Err(Error::InvalidPair);
    }
    let theta = geom::angle_between(p.normal, q.normal).to_degrees();
    Ok(params.alpha * theta / denom)
}

/// Screening outcome for one contour.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Screening {
    /// Close adjacent pairs with high walking energy.
    pub c_plus: Vec<PointPair>,
    /// Accepted non-adjacent pairs, pairwise non-crossing, by descending score.
    pub c_minus: Vec<PointPair>,
    /// Every close pair that was evaluated, accepted or not.
    pub evaluated: Vec<PointPair>,
}

/// Split candidate pairs into close adjacent pairs (`c_plus`) and connected
/// non-adjacent pairs (`c_minus`).
pub fn screen_pairs(
    candidates: &[CandidatePoint],
    profile: &CurvatureProfile,
    mask: Option<&BinaryMask>,
    params: &PairingParams,
) -> Screening {
    let n = candidates.len();
    let adjacent = classify_adjacency(candidates);
    let is_adjacent = |i: usize, j: usize| adjacent.iter().any(|&(a, b)| (a, b) == (i, j) || (a, b) == (j, i));
    let mut out = Screening::default();
    let mut minus = Vec::new();

    for i in 0..n {
        for j in i + 1..n {
            let (p, q) = (&candidates[i], &candidates[j]);
            let distance = p.position.dist(q.position);
            if is_adjacent(i, j) {
                if distance > params.r1 {
                    continue;
                }
                let e = walking_energy(profile, p, q);
                let pair =
                    PointPair { a: i, b: j, kind: PairKind::Adjacent, distance, v_score: None, walk_energy: Some(e) };
                out.evaluated.push(pair);
                if e >= params.walk_energy_threshold {
                    out.c_plus.push(pair);
                }
                continue;
            }
            if distance > params.r2 {
                continue;
            }
            let Ok(v) = v_score(p, q, params) else { continue };
            let inner = distance <= params.r1;
            let pair = PointPair {
                a: i,
                b: j,
                kind: if inner { PairKind::NonadjacentInner } else { PairKind::NonadjacentRing },
                distance,
                v_score: Some(v),
                walk_energy: None,
            };
            out.evaluated.push(pair);
            let passes =
                if inner { !params.inner_requires_v || v > params.v_threshold } else { v > params.v_threshold };
            if passes && mask.is_none_or(|m| chord_inside(m, p.position, q.position)) {
                minus.push(pair);
            }
        }
    }

    minus.sort_by(|x, y| y.v_score.unwrap_or(0.0).total_cmp(&x.v_score.unwrap_or(0.0)).then(x.key().cmp(&y.key())));
    for pair in minus {
        let crosses = out.c_minus.iter().any(|kept: &PointPair| {
            chords_interleave(candidates, kept, &pair)
                || geom::segments_cross(
                    candidates[kept.a].position,
                    candidates[kept.b].position,
                    candidates[pair.a].position,
                    candidates[pair.b].position,
                )
        });
        if !crosses {
            out.c_minus.push(pair);
        }
    }
    out
}

/// True when every interior sample of the chord (away from the two
/// boundary endpoints) falls on foreground.
pub fn chord_inside(mask: &BinaryMask, p: Point, q: Point) -> bool {
    let d = p.dist(q);
    let margin = 1.5;
    if d <= 2.0 * margin {
        return true;
    }
    let steps = (d * 2.0).ceil() as usize;
    (0..=steps).all(|k| {
        let t = k as f64 / steps as f64;
        let s = t * d;
        if s < margin || d - s < margin {
            return true;
        }
        mask.at_point(p + (q - p) * t)
    })
}

/// Topological crossing: the endpoints of one chord separate those of the
/// other along the contour.
fn chords_interleave(c: &[CandidatePoint], x: &PointPair, y: &PointPair) -> bool {
    let (a, b) = x.key();
    let (p, q) = y.key();
    if a == p || a == q || b == p || b == q {
        return false;
    }
    let (a, b) = (c[a].contour_index, c[b].contour_index);
    let between = |i: usize| c[i].contour_index > a && c[i].contour_index < b;
    between(p) != between(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// The contour, walked forward between the two vertices.
    Arc,
    /// A straight connection between the two vertices.
    Chord,
}

/// A closed region of a clump bounded alternately by contour arcs and
/// straight connections between candidates.
///
/// Vertex `k` is joined to vertex `k + 1` (cyclically) by `edges[k]`.
/// Vertices index the contour's candidate list. A region with no vertices
/// is the whole contour; with one vertex, a single arc runs all the way
/// round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubContour {
    pub parent: usize,
    pub vertices: Vec<usize>,
    pub edges: Vec<EdgeKind>,
}

impl SubContour {
    /// The full clump with every candidate as a vertex, all edges arcs.
    pub fn whole(parent: usize, n_candidates: usize) -> Self {
        Self { parent, vertices: (0..n_candidates).collect(), edges: vec![EdgeKind::Arc; n_candidates] }
    }

    /// Region closed by the arc `from -> to` and the chord back.
    pub fn arc_with_chord(parent: usize, from: usize, to: usize) -> Self {
        Self { parent, vertices: vec![from, to], edges: vec![EdgeKind::Arc, EdgeKind::Chord] }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// `(from, to)` vertex ids of edge `k`.
    pub fn edge_ends(&self, k: usize) -> (usize, usize) {
        (self.vertices[k], self.vertices[(k + 1) % self.vertices.len()])
    }

    pub fn arc_count(&self) -> usize {
        if self.vertices.is_empty() {
            1
        } else {
            self.edges.iter().filter(|e| **e == EdgeKind::Arc).count()
        }
    }

    /// Contour index ranges of the arc edges.
    pub fn arcs(&self, candidates: &[CandidatePoint], n_points: usize) -> Vec<Segment> {
        if self.vertices.is_empty() {
            return vec![Segment { start: 0, end: n_points - 1 }];
        }
        (0..self.len())
            .filter(|&k| self.edges[k] == EdgeKind::Arc)
            .map(|k| {
                let (u, v) = self.edge_ends(k);
                let start = candidates[u].contour_index;
                let end = candidates[v].contour_index;
                if self.len() == 1 {
                    Segment { start, end: (start + n_points - 1) % n_points }
                } else {
                    Segment { start, end }
                }
            })
            .collect()
    }

    /// The straight connections closing the region, as `(from, to)` vertex ids.
    pub fn chords(&self) -> Vec<(usize, usize)> {
        (0..self.len()).filter(|&k| self.edges[k] == EdgeKind::Chord).map(|k| self.edge_ends(k)).collect()
    }

    /// Boundary polygon: arc vertices in contour order, chords as straight
    /// closing segments.
    pub fn polygon(&self, contour: &Contour, candidates: &[CandidatePoint]) -> Vec<Point> {
        let n = contour.len();
        if self.vertices.is_empty() {
            return contour.points().to_vec();
        }
        let mut out = Vec::new();
        for k in 0..self.len() {
            let (u, v) = self.edge_ends(k);
            let from = candidates[u].contour_index;
            match self.edges[k] {
                EdgeKind::Chord => out.push(contour.point(from)),
                EdgeKind::Arc => {
                    let to = candidates[v].contour_index;
                    let steps = if self.len() == 1 { n } else { (to + n - from) % n };
                    out.extend((0..steps).map(|s| contour.point(from + s)));
                }
            }
        }
        out
    }

    /// Contour vertices lying on the region's arcs, endpoints included.
    pub fn arc_points(&self, contour: &Contour, candidates: &[CandidatePoint]) -> Vec<Vec<Point>> {
        let n = contour.len();
        self.arcs(candidates, n).into_iter().map(|seg| seg.indices(n).map(|i| contour.point(i)).collect()).collect()
    }

    /// Position of vertex id `v` in this region's loop.
    pub fn position_of(&self, v: usize) -> Option<usize> {
        self.vertices.iter().position(|&x| x == v)
    }

    /// True when `u` and `v` are joined by an existing chord edge.
    pub fn has_chord(&self, u: usize, v: usize) -> bool {
        self.chords().iter().any(|&(a, b)| (a, b) == (u, v) || (a, b) == (v, u))
    }

    /// Split along a new chord between vertex positions `i` and `j`.
    pub fn split(&self, i: usize, j: usize) -> (SubContour, SubContour) {
        let m = self.len();
        let take = |from: usize, to: usize| {
            let count = (to + m - from) % m;
            let verts: Vec<usize> = (0..=count).map(|s| self.vertices[(from + s) % m]).collect();
            let mut edges: Vec<EdgeKind> = (0..count).map(|s| self.edges[(from + s) % m]).collect();
            edges.push(EdgeKind::Chord);
            SubContour { parent: self.parent, vertices: verts, edges }
        };
        (take(i, j), take(j, i))
    }

    /// Join two regions that share the chord `u - v`, removing it.
    pub fn merge(&self, other: &SubContour, u: usize, v: usize) -> Option<SubContour> {
        let (x, y) = if self.chord_edge(u, v).is_some() { (u, v) } else { (v, u) };
        let (va, ea) = self.open_at(x, y)?;
        let (vb, eb) = other.open_at(y, x)?;
        let mut vertices = va;
        vertices.extend_from_slice(&vb[1..vb.len() - 1]);
        let mut edges = ea;
        edges.extend(eb);
        Some(SubContour { parent: self.parent, vertices, edges })
    }

    fn chord_edge(&self, x: usize, y: usize) -> Option<usize> {
        (0..self.len()).find(|&k| self.edges[k] == EdgeKind::Chord && self.edge_ends(k) == (x, y))
    }

    /// Remove chord edge `x -> y`, returning the open path `y .. x`.
    fn open_at(&self, x: usize, y: usize) -> Option<(Vec<usize>, Vec<EdgeKind>)> {
        let k = self.chord_edge(x, y)?;
        let m = self.len();
        let verts = (1..=m).map(|s| self.vertices[(k + s) % m]).collect();
        let edges = (1..m).map(|s| self.edges[(k + s) % m]).collect();
        Some((verts, edges))
    }
}

/// Cut the clump along non-crossing non-adjacent connections, in the given
/// order. A connection whose endpoints no longer share a region (it would
/// cross an earlier one) is skipped. Returns the regions and the
/// connections actually used.
pub fn partition_contour(
    parent: usize,
    n_candidates: usize,
    c_minus: &[PointPair],
) -> (Vec<SubContour>, Vec<PointPair>) {
    let mut regions = vec![SubContour::whole(parent, n_candidates)];
    let mut used = Vec::new();
    for pair in c_minus {
        let (u, v) = (pair.a, pair.b);
        let Some(r) =
            regions.iter().position(|r| r.position_of(u).is_some() && r.position_of(v).is_some() && !r.has_chord(u, v))
        else {
            continue;
        };
        let region = regions.remove(r);
        let (a, b) = region.split(region.position_of(u).unwrap(), region.position_of(v).unwrap());
        regions.insert(r, b);
        regions.insert(r, a);
        used.push(*pair);
    }
    (regions, used)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, TAU};

    use crate::curvature::compute_curvature;

    fn cand(i: usize, x: f64, y: f64, kappa: f64, normal: Point) -> CandidatePoint {
        CandidatePoint { position: Point::new(x, y), contour_index: i, s_star: 0.0, kappa, normal }
    }

    fn circle(r: f64, n: usize) -> Contour {
        Contour::new(
            (0..n)
                .map(|i| {
                    let t = i as f64 / n as f64 * TAU;
                    Point::new(r * t.cos(), r * t.sin())
                })
                .collect(),
        )
        .unwrap()
    }

    fn at(c: &Contour, i: usize) -> CandidatePoint {
        cand(i, c.point(i).x, c.point(i).y, -0.1, crate::curvature::outward_normal(c, i))
    }

    #[test]
    fn adjacency_is_circular() {
        let cs: Vec<_> = [10, 50, 200].iter().map(|&i| cand(i, 0.0, 0.0, -0.1, Point::new(1.0, 0.0))).collect();
        assert_eq!(classify_adjacency(&cs), vec![(0, 1), (1, 2), (2, 0)]);
        assert!(classify_adjacency(&cs[..1]).is_empty());
    }

    #[test]
    fn labelled_neighbours_are_adjacent_but_distant_label_is_not() {
        // points numbered 1..=15 along a contour; 9 and 11 neighbour 10, 5 does not
        let cs: Vec<_> = (1..=15).map(|i| cand(i * 10, i as f64, 0.0, -0.1, Point::new(0.0, 1.0))).collect();
        let adj = classify_adjacency(&cs);
        let pos = |label: usize| label - 1;
        assert!(adj.contains(&(pos(9), pos(10))));
        assert!(adj.contains(&(pos(10), pos(11))));
        assert!(!adj.iter().any(|&(a, b)| (a, b) == (pos(5), pos(10)) || (a, b) == (pos(10), pos(5))));
    }

    #[test]
    fn quarter_circle_energy() {
        let c = circle(30.0, 800);
        let p = compute_curvature(&c);
        let e = walking_energy(&p, &at(&c, 0), &at(&c, 200));
        assert!((e - FRAC_PI_2).abs() < FRAC_PI_2 * 0.03, "E = {e}");
        // the shorter arc is used whichever end comes first
        let e2 = walking_energy(&p, &at(&c, 200), &at(&c, 0));
        assert!((e - e2).abs() < 1e-9);
        let e3 = walking_energy(&p, &at(&c, 700), &at(&c, 100));
        assert!((e3 - FRAC_PI_2).abs() < FRAC_PI_2 * 0.03);
    }

    #[test]
    fn v_score_examples() {
        let params = PairingParams::default();
        let p = cand(0, 0.0, 0.0, -0.1, Point::new(1.0, 0.0));
        let q = cand(5, 30.0, 0.0, -0.1, Point::new(0.0, 1.0));
        let v = v_score(&p, &q, &params).unwrap();
        assert!((v - 9000.0 / (30.0 + 0.34 * 0.2)).abs() < 1e-9);
        assert!((v - 299.3).abs() < 0.1);

        let q_par = cand(5, 30.0, 0.0, -0.1, Point::new(1.0, 0.0));
        assert_eq!(v_score(&p, &q_par, &params).unwrap(), 0.0);

        let q_opp = cand(5, 69.0, 0.0, 0.0, Point::new(-1.0, 0.0));
        let p0 = cand(0, 0.0, 0.0, 0.0, Point::new(1.0, 0.0));
        let v = v_score(&p0, &q_opp, &params).unwrap();
        assert!((v - 18000.0 / 69.0).abs() < 1e-9 && v > 200.0);

        assert!(matches!(v_score(&p0, &p0, &params), Err(Error::InvalidPair)));
    }

    #[test]
    fn screening_of_non_adjacent_pairs() {
        let params = PairingParams::default();
        // four candidates in contour order; 0-2 and 1-3 are non-adjacent
        let n_up = Point::new(0.0, -1.0);
        let n_down = Point::new(0.0, 1.0);
        let p = compute_curvature(&circle(60.0, 400));

        // 40 px apart, parallel normals (score 0): still in the inner set
        let cs = vec![
            cand(0, 0.0, 0.0, -0.1, n_up),
            cand(100, 200.0, 0.0, -0.1, n_up),
            cand(200, 40.0, 0.0, -0.1, n_up),
            cand(300, 400.0, 0.0, -0.1, n_up),
        ];
        let s = screen_pairs(&cs, &p, None, &params);
        assert_eq!(s.c_minus.len(), 1);
        assert_eq!((s.c_minus[0].a, s.c_minus[0].b, s.c_minus[0].kind), (0, 2, PairKind::NonadjacentInner));

        // 60 px apart with a score of ~150: excluded
        let cs = vec![
            cand(0, 0.0, 0.0, -0.1, Point::new(1.0, 0.0)),
            cand(100, 300.0, 0.0, -0.1, n_up),
            cand(200, 60.0, 0.0, -0.1, n_down),
            cand(300, 600.0, 0.0, -0.1, n_up),
        ];
        let v = v_score(&cs[0], &cs[2], &params).unwrap();
        assert!(v < 200.0);
        assert!(screen_pairs(&cs, &p, None, &params).c_minus.is_empty());

        // 60 px apart facing each other: in the ring set
        let cs = vec![
            cand(0, 0.0, 0.0, -0.1, n_up),
            cand(100, 300.0, 0.0, -0.1, n_up),
            cand(200, 0.0, 60.0, -0.1, n_down),
            cand(300, 600.0, 0.0, -0.1, n_up),
        ];
        let s = screen_pairs(&cs, &p, None, &params);
        assert_eq!(s.c_minus.len(), 1);
        assert_eq!(s.c_minus[0].kind, PairKind::NonadjacentRing);
    }

    #[test]
    fn raising_the_threshold_never_adds_ring_pairs() {
        let p = compute_curvature(&circle(60.0, 400));
        let cs: Vec<_> = (0..8)
            .map(|i| {
                let t = i as f64 / 8.0 * TAU;
                cand(
                    i * 50,
                    35.0 * t.cos(),
                    35.0 * t.sin(),
                    -0.05 * (1 + i % 3) as f64,
                    Point::new(-t.cos(), -t.sin()).rotated(0.3 * i as f64),
                )
            })
            .collect();
        let mut prev = usize::MAX;
        for thr in [50.0, 100.0, 200.0, 300.0, 500.0] {
            let params = PairingParams { v_threshold: thr, ..Default::default() };
            let ring = screen_pairs(&cs, &p, None, &params)
                .evaluated
                .iter()
                .filter(|x| x.kind == PairKind::NonadjacentRing && x.v_score.unwrap() > thr)
                .count();
            assert!(ring <= prev);
            prev = ring;
        }
    }

    #[test]
    fn whole_region_without_cuts() {
        let (regions, used) = partition_contour(0, 4, &[]);
        assert_eq!(regions, vec![SubContour::whole(0, 4)]);
        assert!(used.is_empty());
    }

    fn pair(a: usize, b: usize) -> PointPair {
        PointPair { a, b, kind: PairKind::NonadjacentInner, distance: 1.0, v_score: Some(1.0), walk_energy: None }
    }

    #[test]
    fn one_and_two_cuts() {
        let (regions, _) = partition_contour(0, 4, &[pair(0, 2)]);
        assert_eq!(regions.len(), 2);
        // 16 vertices (labelled 1..=16 at positions 0..16); cuts (2,15) and (5,10)
        let (regions, used) = partition_contour(0, 16, &[pair(1, 14), pair(4, 9)]);
        assert_eq!(regions.len(), 3);
        assert_eq!(used.len(), 2);
        // every arc edge lands in exactly one region
        let mut arcs: Vec<(usize, usize)> = regions
            .iter()
            .flat_map(|r| {
                (0..r.len()).filter(|&k| r.edges[k] == EdgeKind::Arc).map(|k| r.edge_ends(k)).collect::<Vec<_>>()
            })
            .collect();
        arcs.sort();
        assert_eq!(arcs, (0..16).map(|i| (i, (i + 1) % 16)).collect::<Vec<_>>());
    }

    #[test]
    fn interleaving_cut_is_skipped() {
        let (regions, used) = partition_contour(0, 6, &[pair(0, 3), pair(1, 4)]);
        assert_eq!(regions.len(), 2);
        assert_eq!(used.len(), 1);
    }

    #[test]
    fn split_then_merge_restores_region() {
        let whole = SubContour::whole(0, 6);
        let (a, b) = whole.split(1, 4);
        let merged = a.merge(&b, 1, 4).unwrap();
        // same cyclic loop, possibly rotated
        let m = merged.len();
        let rot = merged.position_of(0).unwrap();
        let verts: Vec<_> = (0..m).map(|k| merged.vertices[(rot + k) % m]).collect();
        let edges: Vec<_> = (0..m).map(|k| merged.edges[(rot + k) % m]).collect();
        assert_eq!(verts, whole.vertices);
        assert_eq!(edges, whole.edges);
    }
}
