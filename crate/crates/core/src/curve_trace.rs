//! Dividing curves along intensity valleys, and their application to the
//! foreground mask.

use std::collections::HashSet;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval_metrics::LabelMask;
use crate::geom::{self, Pixel, Point};
use crate::image_prep::{gaussian_kernel, label_regions, BinaryMask, Connectivity, RasterImage};

/// Second derivatives of the Gaussian-smoothed intensity at every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianField {
    width: usize,
    height: usize,
    pub sigma: f64,
    xx: Vec<f64>,
    xy: Vec<f64>,
    yy: Vec<f64>,
}

impl HessianField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `(Ixx, Ixy, Iyy)` at a pixel.
    pub fn at(&self, x: usize, y: usize) -> (f64, f64, f64) {
        let i = y * self.width + x;
        (self.xx[i], self.xy[i], self.yy[i])
    }

    pub fn eigen_at(&self, x: usize, y: usize) -> Eigen2 {
        let (xx, xy, yy) = self.at(x, y);
        eigen_2x2(xx, xy, yy)
    }

    fn contains(&self, p: Pixel) -> bool {
        p.x >= 0 && p.y >= 0 && (p.x as usize) < self.width && (p.y as usize) < self.height
    }
}

/// Hessian of channel 0 of `img` after Gaussian smoothing with `sigma`.
/// Borders use clamped extension.
pub fn hessian_field(img: &RasterImage, sigma: f64) -> HessianField {
    let (w, h) = (img.width(), img.height());
    let src: Vec<f64> = (0..w * h).map(|i| img.get(i % w, i / w, 0)).collect();
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] =
                k.iter().enumerate().map(|(j, kv)| kv * src[y * w + clamp(x as isize + j as isize - r, w)]).sum();
        }
    }
    let mut s = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            s[y * w + x] =
                k.iter().enumerate().map(|(j, kv)| kv * tmp[clamp(y as isize + j as isize - r, h) * w + x]).sum();
        }
    }

    let at = |x: isize, y: isize| s[clamp(y, h) * w + clamp(x, w)];
    let mut xx = vec![0.0; w * h];
    let mut xy = vec![0.0; w * h];
    let mut yy = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            let c = at(x, y);
            xx[i] = at(x + 1, y) - 2.0 * c + at(x - 1, y);
            yy[i] = at(x, y + 1) - 2.0 * c + at(x, y - 1);
            xy[i] = 0.25 * (at(x + 1, y + 1) - at(x + 1, y - 1) - at(x - 1, y + 1) + at(x - 1, y - 1));
        }
    }
    HessianField { width: w, height: h, sigma, xx, xy, yy }
}

/// Eigen-decomposition of a symmetric 2x2 matrix, `l1 <= l2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen2 {
    pub l1: f64,
    pub l2: f64,
    pub v1: Point,
    pub v2: Point,
}

/// Closed-form eigen-decomposition of `[[xx, xy], [xy, yy]]`.
pub fn eigen_2x2(xx: f64, xy: f64, yy: f64) -> Eigen2 {
    let mean = 0.5 * (xx + yy);
    let half_diff = 0.5 * (xx - yy);
    let d = half_diff.hypot(xy);
    let (l1, l2) = (mean - d, mean + d);
    let v2 = if xy == 0.0 {
        if xx >= yy {
            Point::new(1.0, 0.0)
        } else {
            Point::new(0.0, 1.0)
        }
    } else {
        // two equivalent forms; the longer one is better conditioned
        let a = Point::new(l2 - yy, xy);
        let b = Point::new(xy, l2 - xx);
        let v = if a.norm() >= b.norm() { a } else { b };
        v.normalized().unwrap_or(Point::new(1.0, 0.0))
    };
    Eigen2 { l1, l2, v1: Point::new(-v2.y, v2.x), v2 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceParams {
    /// Half-width of the search sector around the bearing to the target, degrees.
    pub sector_deg: f64,
    /// `|l1|` must not exceed this fraction of `|l2|`.
    pub lambda1_rel_tol: f64,
}

impl Default for TraceParams {
    fn default() -> Self {
        Self { sector_deg: 45.0, lambda1_rel_tol: 0.15 }
    }
}

/// Floor for the `|l2|` scale in the near-zero test on `l1`.
const LAMBDA_EPS: f64 = 1e-12;

/// A pixel chain from one endpoint of a connection to the other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DividingPath {
    pub pixels: Vec<Pixel>,
    /// Candidate ids of the connection this path realizes, when known.
    pub source_pair: Option<(usize, usize)>,
    /// True when no valley could be followed and the straight chord was used.
    pub fallback: bool,
    /// Steps taken where no neighbour had a near-zero `l1`.
    pub relaxed_steps: usize,
}

impl DividingPath {
    pub fn straight(p: Pixel, q: Pixel) -> Self {
        Self { pixels: geom::bresenham(p, q), source_pair: None, fallback: true, relaxed_steps: 0 }
    }
}

/// Greedy valley walk from `p` to `q`. Each step goes to the 8-neighbour
/// within the sector around the bearing to `q` that has a near-zero `l1`
/// and the largest positive `l2`. Near the clump edge the intensity falls
/// off along the valley too, so `l1` is far from zero there; when no
/// neighbour passes that test the walk takes the largest positive `l2`
/// alone. Neighbours are scanned clockwise starting at the bearing, and the
/// first of equal scores wins. Falls back to the straight chord when no
/// neighbour has a positive `l2` or the step budget `4 |p - q|` runs out.
pub fn trace_dividing_curve(field: &HessianField, p: Point, q: Point, params: &TraceParams) -> Result<DividingPath> {
    let (start, goal) = (p.to_pixel(), q.to_pixel());
    for (pt, px) in [(p, start), (q, goal)] {
        if !field.contains(px) {
            return Err(Error::OutOfBounds(pt.x, pt.y));
        }
    }
    if start == goal {
        return Err(Error::InvalidPair);
    }
    let budget = (4.0 * start.to_point().dist(goal.to_point())).floor() as usize;
    let max_dev = params.sector_deg.to_radians() + 1e-9;

    let mut path = vec![start];
    let mut visited: HashSet<Pixel> = HashSet::from([start]);
    let mut cur = start;
    let mut relaxed_steps = 0;
    while !cur.is_8_adjacent(goal) {
        // the step about to be taken plus the final step onto `goal`
        if path.len() + 1 > budget {
            return Ok(DividingPath::straight(start, goal));
        }
        let to_goal = goal.to_point() - cur.to_point();
        let bearing = to_goal.y.atan2(to_goal.x);
        let mut options: Vec<(f64, Pixel)> = NEIGHBOURS
            .iter()
            .map(|&(dx, dy)| {
                let n = Pixel::new(cur.x + dx, cur.y + dy);
                let cw = ((dy as f64).atan2(dx as f64) - bearing).rem_euclid(TAU);
                (cw, n)
            })
            .filter(|&(cw, n)| cw.min(TAU - cw) <= max_dev && field.contains(n) && !visited.contains(&n))
            .collect();
        options.sort_by(|a, b| a.0.total_cmp(&b.0));

        // strict: near-zero l1 and the largest l2; relaxed: largest positive l2
        let mut strict: Option<(f64, Pixel)> = None;
        let mut relaxed: Option<(f64, Pixel)> = None;
        for (_, n) in options {
            let e = field.eigen_at(n.x as usize, n.y as usize);
            if e.l2 <= 0.0 {
                continue;
            }
            // near-equal scores count as ties so rounding noise cannot steer the walk
            let beats = |b: Option<(f64, Pixel)>| b.is_none_or(|(v, _)| e.l2 > v * (1.0 + 1e-9));
            if beats(relaxed) {
                relaxed = Some((e.l2, n));
            }
            if e.l1.abs() <= params.lambda1_rel_tol * e.l2.abs().max(LAMBDA_EPS) && beats(strict) {
                strict = Some((e.l2, n));
            }
        }
        let next = match (strict, relaxed) {
            (Some((_, n)), _) => n,
            (None, Some((_, n))) => {
                relaxed_steps += 1;
                n
            }
            (None, None) => return Ok(DividingPath::straight(start, goal)),
        };
        visited.insert(next);
        path.push(next);
        cur = next;
    }
    path.push(goal);
    Ok(DividingPath { pixels: path, source_pair: None, fallback: false, relaxed_steps })
}

const NEIGHBOURS: [(i32, i32); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

/// Largest angle between a step of `path` and the bearing from that step's
/// start to the path's last pixel, degrees.
pub fn max_sector_deviation(path: &DividingPath) -> f64 {
    let goal = *path.pixels.last().expect("paths are non-empty");
    path.pixels
        .windows(2)
        .map(|w| {
            let step = w[1].to_point() - w[0].to_point();
            let bearing = goal.to_point() - w[0].to_point();
            geom::angle_between(step, bearing) * 180.0 / PI
        })
        .fold(0.0, f64::max)
}

/// Longest extension of a path end out to the background, pixels.
const MAX_EXTENSION: usize = 12;

/// Cut the foreground along the paths and label the pieces.
///
/// Path ends are extended outward along the chord until they leave the
/// foreground, so each cut reaches the background. Cut pixels go to the
/// neighbouring piece with the nearest centroid. Pieces under
/// `min_fragment` pixels are merged into a neighbour, and each original
/// component keeps at most one more piece than the number of paths
/// touching it.
pub fn apply_divisions(mask: &BinaryMask, paths: &[DividingPath], min_fragment: usize) -> LabelMask {
    let (w, h) = (mask.width(), mask.height());
    let idx = |p: Pixel| p.y as usize * w + p.x as usize;
    let inside = |p: Pixel| p.x >= 0 && p.y >= 0 && (p.x as usize) < w && (p.y as usize) < h;
    let (components, _) = label_regions(w, h, Connectivity::Eight, |i| mask.bits()[i]);

    let mut cut = vec![false; w * h];
    let mut touched: Vec<HashSet<u32>> = Vec::new();
    for path in paths {
        let mut px = path.pixels.clone();
        if px.len() >= 2 {
            let (first, last) = (px[0], px[px.len() - 1]);
            let head = extend(mask, first, first.to_point() - last.to_point());
            let tail = extend(mask, last, last.to_point() - first.to_point());
            px.extend(head);
            px.extend(tail);
        }
        let mut comps = HashSet::new();
        for p in px.into_iter().filter(|&p| inside(p) && mask.at(p)) {
            cut[idx(p)] = true;
            comps.insert(components[idx(p)]);
        }
        touched.push(comps);
    }

    let (mut labels, n) = label_regions(w, h, Connectivity::Four, |i| mask.bits()[i] && !cut[i]);
    let mut n = n as u32;

    // cut pixels join the adjacent piece with the nearest centroid
    let centroids = centroids(&labels, w, n);
    let mut pending: Vec<usize> = (0..w * h).filter(|&i| cut[i] && mask.bits()[i]).collect();
    loop {
        let mut assigned = Vec::new();
        for &i in &pending {
            let p = Pixel::new((i % w) as i32, (i / w) as i32);
            let best = NEIGHBOURS
                .iter()
                .map(|&(dx, dy)| Pixel::new(p.x + dx, p.y + dy))
                .filter(|&q| inside(q) && labels[idx(q)] != 0)
                .map(|q| labels[idx(q)])
                .min_by(|&a, &b| {
                    let (ca, cb) = (centroids[a as usize], centroids[b as usize]);
                    p.to_point().dist(ca).total_cmp(&p.to_point().dist(cb)).then(a.cmp(&b))
                });
            if let Some(l) = best {
                assigned.push((i, l));
            }
        }
        if assigned.is_empty() {
            break;
        }
        for &(i, l) in &assigned {
            labels[i] = l;
        }
        pending.retain(|&i| labels[i] == 0);
    }
    // cut pixels with no labelled neighbour at all form their own pieces
    for i in pending {
        if labels[i] == 0 {
            n += 1;
            flood(&mut labels, w, h, i, n, |j| mask.bits()[j]);
        }
    }

    merge_small(&mut labels, w, h, n, min_fragment);

    let n_components = components.iter().copied().max().unwrap_or(0) as usize;
    let mut cap = vec![1usize; n_components + 1];
    for comps in &touched {
        for &c in comps {
            cap[c as usize] += 1;
        }
    }
    enforce_cap(&mut labels, &components, w, h, &cap);

    LabelMask::from_raw(w, h, labels).expect("buffer matches mask size")
}

fn extend(mask: &BinaryMask, from: Pixel, dir: Point) -> Vec<Pixel> {
    let Some(d) = dir.normalized() else { return Vec::new() };
    let mut out = Vec::new();
    let mut prev = from;
    for t in 1..=MAX_EXTENSION {
        let p = (from.to_point() + d * t as f64).to_pixel();
        if !mask.at(prev) {
            break;
        }
        out.extend(geom::bresenham(prev, p).into_iter().skip(1));
        prev = p;
    }
    out
}

fn centroids(labels: &[u32], w: usize, n: u32) -> Vec<Point> {
    let mut sum = vec![(0.0, 0.0, 0usize); n as usize + 1];
    for (i, &l) in labels.iter().enumerate() {
        let s = &mut sum[l as usize];
        s.0 += (i % w) as f64;
        s.1 += (i / w) as f64;
        s.2 += 1;
    }
    sum.into_iter()
        .map(|(x, y, c)| if c == 0 { Point::default() } else { Point::new(x / c as f64, y / c as f64) })
        .collect()
}

fn flood(labels: &mut [u32], w: usize, h: usize, seed: usize, label: u32, select: impl Fn(usize) -> bool) {
    let mut stack = vec![seed];
    labels[seed] = label;
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as i32, (i / w) as i32);
        for (dx, dy) in NEIGHBOURS {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                continue;
            }
            let j = ny as usize * w + nx as usize;
            if labels[j] == 0 && select(j) {
                labels[j] = label;
                stack.push(j);
            }
        }
    }
}

/// Number of 8-adjacent pixel pairs shared by label `l` with each other label.
fn contacts(labels: &[u32], w: usize, h: usize, l: u32) -> Vec<(u32, usize)> {
    let mut count = std::collections::BTreeMap::new();
    for (i, &li) in labels.iter().enumerate() {
        if li != l {
            continue;
        }
        let (x, y) = ((i % w) as i32, (i / w) as i32);
        for (dx, dy) in NEIGHBOURS {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                continue;
            }
            let o = labels[ny as usize * w + nx as usize];
            if o != 0 && o != l {
                *count.entry(o).or_insert(0usize) += 1;
            }
        }
    }
    count.into_iter().collect()
}

fn relabel(labels: &mut [u32], from: u32, to: u32) {
    labels.iter_mut().filter(|l| **l == from).for_each(|l| *l = to);
}

fn area_of(labels: &[u32], l: u32) -> usize {
    labels.iter().filter(|&&x| x == l).count()
}

/// Merge each piece smaller than `min_area` into the neighbour it touches most.
fn merge_small(labels: &mut [u32], w: usize, h: usize, n: u32, min_area: usize) {
    loop {
        let mut areas = vec![0usize; n as usize + 1];
        for &l in labels.iter() {
            areas[l as usize] += 1;
        }
        let victim = (1..=n)
            .filter(|&l| areas[l as usize] > 0 && areas[l as usize] < min_area)
            .filter_map(|l| {
                let best = contacts(labels, w, h, l).into_iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))?;
                Some((areas[l as usize], l, best.0))
            })
            .min();
        let Some((_, from, to)) = victim else { break };
        relabel(labels, from, to);
    }
}

/// Merge the smallest pieces of any component holding more than its cap.
fn enforce_cap(labels: &mut [u32], components: &[u32], w: usize, h: usize, cap: &[usize]) {
    loop {
        let mut pieces: Vec<HashSet<u32>> = vec![HashSet::new(); cap.len()];
        for (&l, &c) in labels.iter().zip(components) {
            if l != 0 {
                pieces[c as usize].insert(l);
            }
        }
        let over = (1..cap.len()).find(|&c| pieces[c].len() > cap[c]);
        let Some(c) = over else { break };
        let mut ls: Vec<u32> = pieces[c].iter().copied().collect();
        ls.sort_by_key(|&l| (area_of(labels, l), l));
        let merged = ls.iter().find_map(|&l| {
            let best = contacts(labels, w, h, l).into_iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))?;
            Some((l, best.0))
        });
        match merged {
            Some((from, to)) => relabel(labels, from, to),
            None => break,
        }
    }
}
