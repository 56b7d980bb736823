//! Signed boundary curvature, concave runs and per-run candidate voting.

use serde::{Deserialize, Serialize};

use crate::geom::Point;
use crate::image_prep::{BinaryMask, Contour};

/// Per-vertex signed curvature of a contour.
///
/// Convex (outward-bulging) boundary has positive curvature, concavities are
/// negative. `arc` holds the normalized arc position of each vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureProfile {
    pub contour_id: usize,
    pub kappa: Vec<f64>,
    pub arc: Vec<f64>,
    /// Closed length of the contour in pixels.
    pub length: f64,
}

impl CurvatureProfile {
    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    /// Arc length in pixels of the forward step from vertex `i` to `i + 1`.
    pub fn step_length(&self, i: usize) -> f64 {
        let n = self.len();
        if i + 1 < n {
            (self.arc[i + 1] - self.arc[i]) * self.length
        } else {
            (1.0 - self.arc[n - 1]) * self.length
        }
    }
}

/// A voted high-curvature contour point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidatePoint {
    pub position: Point,
    pub contour_index: usize,
    /// Normalized arc position of the vote on the whole contour.
    pub s_star: f64,
    pub kappa: f64,
    /// Outward unit normal.
    pub normal: Point,
}

/// Inclusive run of contour indices, `start..=end`, wrapping past the seam
/// when `end < start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self, n: usize) -> usize {
        (self.end + n - self.start) % n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn indices(&self, n: usize) -> impl Iterator<Item = usize> {
        let start = self.start;
        (0..self.len(n)).map(move |k| (start + k) % n)
    }

    pub fn contains(&self, i: usize, n: usize) -> bool {
        (i + n - self.start) % n < self.len(n)
    }
}

/// Curvature by central differences with circular wrap-around.
pub fn compute_curvature(c: &Contour) -> CurvatureProfile {
    let pts = c.points();
    let n = pts.len();
    let mut kappa = vec![f64::NAN; n];
    for i in 0..n {
        let prev = pts[(i + n - 1) % n];
        let next = pts[(i + 1) % n];
        let cur = pts[i];
        let d1 = (next - prev) * 0.5;
        let d2 = next - cur * 2.0 + prev;
        let speed2 = d1.dot(d1);
        if speed2 > 1e-12 {
            kappa[i] = d1.cross(d2) / speed2.powf(1.5);
        }
    }
    fill_degenerate(&mut kappa);

    let cum = c.cumulative_length();
    let length = c.arc_length();
    let arc = cum.iter().map(|s| if length > 0.0 { s / length } else { 0.0 }).collect();
    CurvatureProfile { contour_id: 0, kappa, arc, length }
}

/// Replace NaN samples (coincident neighbours) with the nearest valid
/// sample along the contour.
fn fill_degenerate(kappa: &mut [f64]) {
    let n = kappa.len();
    if kappa.iter().all(|k| k.is_nan()) {
        kappa.iter_mut().for_each(|k| *k = 0.0);
        return;
    }
    let src = kappa.to_vec();
    for i in 0..n {
        if !src[i].is_nan() {
            continue;
        }
        for d in 1..n {
            let fwd = src[(i + d) % n];
            if !fwd.is_nan() {
                kappa[i] = fwd;
                break;
            }
            let back = src[(i + n - d) % n];
            if !back.is_nan() {
                kappa[i] = back;
                break;
            }
        }
    }
}

/// Maximal runs with `kappa <= -kappa_min`, merged across the seam. Runs of
/// a single sample are dropped.
pub fn find_concave_segments(p: &CurvatureProfile, kappa_min: f64) -> Vec<Segment> {
    let n = p.len();
    let concave: Vec<bool> = p.kappa.iter().map(|&k| k <= -kappa_min).collect();
    if concave.iter().all(|&b| b) {
        return vec![Segment { start: 0, end: n - 1 }];
    }
    // start scanning just after a non-concave sample so no run straddles the scan seam
    let origin = concave.iter().position(|&b| !b).expect("some sample is not concave");
    let mut out = Vec::new();
    let mut run: Option<usize> = None;
    for k in 1..=n {
        let i = (origin + k) % n;
        match (concave[i], run) {
            (true, None) => run = Some(i),
            (false, Some(s)) => {
                let seg = Segment { start: s, end: (i + n - 1) % n };
                if seg.len(n) >= 2 {
                    out.push(seg);
                }
                run = None;
            }
            _ => {}
        }
    }
    out.sort_by_key(|s| s.start);
    out
}

/// Vote one candidate for a concave run: the `|kappa|`-weighted mean of the
/// run's local arc parameter, integrated with trapezoidal weights, mapped
/// back to the nearest contour sample.
pub fn vote_candidate(c: &Contour, p: &CurvatureProfile, seg: Segment) -> CandidatePoint {
    let n = p.len();
    let idx: Vec<usize> = seg.indices(n).collect();

    // local arc positions in pixels from the segment start
    let mut local = Vec::with_capacity(idx.len());
    let mut acc = 0.0;
    local.push(0.0);
    for w in idx.windows(2) {
        acc += p.step_length(w[0]);
        local.push(acc);
    }
    let span = acc;

    let t_star = if span <= 0.0 {
        0.5
    } else {
        let t: Vec<f64> = local.iter().map(|s| s / span).collect();
        let w: Vec<f64> = idx.iter().map(|&i| p.kappa[i].abs()).collect();
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..idx.len() - 1 {
            let dt = t[k + 1] - t[k];
            num += 0.5 * dt * (w[k] * t[k] + w[k + 1] * t[k + 1]);
            den += 0.5 * dt * (w[k] + w[k + 1]);
        }
        if den > 0.0 {
            num / den
        } else {
            0.5
        }
    };

    let target = t_star * span;
    let k = local
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let index = idx[k];
    let s_star = (p.arc[seg.start] + target / p.length).rem_euclid(1.0);
    CandidatePoint {
        position: c.point(index),
        contour_index: index,
        s_star,
        kappa: p.kappa[index],
        normal: outward_normal(c, index),
    }
}

/// Unit normal at vertex `i` pointing away from the enclosed foreground,
/// from the central-difference tangent and the contour orientation.
pub fn outward_normal(c: &Contour, i: usize) -> Point {
    let n = c.len();
    let mut d = 1;
    loop {
        let t = c.point(i + d) - c.point(i + n - d);
        if let Some(t) = t.normalized() {
            return Point::new(t.y, -t.x);
        }
        if d >= n / 2 {
            return Point::new(1.0, 0.0);
        }
        d += 1;
    }
}

/// Outward normal confirmed against the mask: if the sample 2 px along the
/// normal is foreground while the opposite sample is background, the normal
/// is flipped.
pub fn outward_normal_checked(c: &Contour, i: usize, mask: &BinaryMask) -> Point {
    let nrm = outward_normal(c, i);
    let p = c.point(i);
    let ahead = mask.at_point(p + nrm * 2.0);
    let behind = mask.at_point(p - nrm * 2.0);
    if ahead && !behind {
        nrm * -1.0
    } else {
        nrm
    }
}

/// Curvature, concave runs and one vote per run for a smoothed contour.
pub fn detect_candidates(
    c: &Contour,
    kappa_min: f64,
    mask: Option<&BinaryMask>,
) -> (CurvatureProfile, Vec<Segment>, Vec<CandidatePoint>) {
    let profile = compute_curvature(c);
    let segments = find_concave_segments(&profile, kappa_min);
    let candidates = segments
        .iter()
        .map(|&s| {
            let mut cand = vote_candidate(c, &profile, s);
            if let Some(m) = mask {
                cand.normal = outward_normal_checked(c, cand.contour_index, m);
            }
            cand
        })
        .collect();
    (profile, segments, candidates)
}
