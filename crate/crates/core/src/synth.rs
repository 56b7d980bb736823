//! Synthetic fluorescence clumps with known ground truth.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ellipse_fit::Ellipse;
use crate::error::{Error, Result};
use crate::eval_metrics::LabelMask;
use crate::geom::Point;
use crate::image_prep::RasterImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NucleusSpec {
    pub center: Point,
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Major-axis angle from +x, radians.
    pub orientation: f64,
    /// Plateau intensity in `[0, 1]`.
    pub peak: f64,
}

impl NucleusSpec {
    pub fn ellipse(&self) -> Ellipse {
        Ellipse {
            center: self.center,
            semi_major: self.semi_major,
            semi_minor: self.semi_minor,
            orientation: self.orientation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    pub nuclei: Vec<NucleusSpec>,
    pub background: f64,
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Relative intensity drop along the boundary between overlapping nuclei.
    #[serde(default = "default_dip")]
    pub valley_dip: f64,
    /// Width of the dip across the boundary, pixels.
    #[serde(default = "default_dip_width")]
    pub valley_width: f64,
    /// Softness of nucleus edges, pixels.
    #[serde(default = "default_edge")]
    pub edge_width: f64,
}

fn default_dip() -> f64 {
    0.15
}

fn default_dip_width() -> f64 {
    2.0
}

fn default_edge() -> f64 {
    1.0
}

impl SyntheticSpec {
    pub fn new(width: usize, height: usize, nuclei: Vec<NucleusSpec>, seed: u64) -> Self {
        Self {
            width,
            height,
            nuclei,
            background: 0.1,
            noise_sigma: 0.02,
            seed,
            valley_dip: default_dip(),
            valley_width: default_dip_width(),
            edge_width: default_edge(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.nuclei.is_empty() {
            return Err(Error::InvalidInput("a synthetic clump needs at least one nucleus".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidInput("canvas must be non-empty".into()));
        }
        for n in &self.nuclei {
            if !(n.semi_major > 0.0 && n.semi_minor > 0.0) {
                return Err(Error::InvalidInput("semi-axes must be positive".into()));
            }
            let r = n.semi_major.max(n.semi_minor);
            let (c, w, h) = (n.center, self.width as f64, self.height as f64);
            if c.x - r < 0.0 || c.y - r < 0.0 || c.x + r > w - 1.0 || c.y + r > h - 1.0 {
                return Err(Error::OutOfBounds(c.x, c.y));
            }
        }
        Ok(())
    }
}

/// Render the clump and its ground truth. Each pixel inside one or more
/// ellipses belongs to the nucleus with the nearest center.
pub fn generate_synthetic_clump(spec: &SyntheticSpec) -> Result<(RasterImage, LabelMask)> {
    spec.validate()?;
    let ellipses: Vec<Ellipse> = spec.nuclei.iter().map(NucleusSpec::ellipse).collect();
    let overlapping: Vec<(usize, usize)> = (0..ellipses.len())
        .flat_map(|i| (i + 1..ellipses.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| overlaps(&ellipses[i], &ellipses[j]))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma.max(0.0)).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let (w, h) = (spec.width, spec.height);
    let mut data = Vec::with_capacity(w * h);
    let mut raw = vec![0u32; w * h];
    for y in 0..h {
        for x in 0..w {
            let p = Point::new(x as f64, y as f64);
            let profiles: Vec<f64> =
                spec.nuclei.iter().zip(&ellipses).map(|(n, e)| profile(e, p, spec.edge_width) * n.peak).collect();
            let mut signal = profiles.iter().copied().fold(0.0, f64::max);
            for &(i, j) in &overlapping {
                let d = bisector_distance(ellipses[i].center, ellipses[j].center, p);
                let weight = (profiles[i] / spec.nuclei[i].peak).min(profiles[j] / spec.nuclei[j].peak);
                signal *= 1.0 - spec.valley_dip * weight * (-d * d / (2.0 * spec.valley_width.powi(2))).exp();
            }
            let n = if spec.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            data.push((spec.background + (1.0 - spec.background) * signal + n).clamp(0.0, 1.0));

            let owner = ellipses
                .iter()
                .enumerate()
                .filter(|(_, e)| e.contains(p))
                .min_by(|a, b| a.1.center.dist(p).total_cmp(&b.1.center.dist(p)).then(a.0.cmp(&b.0)));
            if let Some((k, _)) = owner {
                raw[y * w + x] = k as u32 + 1;
            }
        }
    }
    let img = RasterImage::new(w, h, 1, data)?;
    Ok((img, LabelMask::from_raw(w, h, raw)?))
}

/// Smooth plateau: 1 inside, 0 outside, tanh transition at the ellipse edge.
fn profile(e: &Ellipse, p: Point, edge: f64) -> f64 {
    // distance to the edge, approximated along the normalized radius
    let mean_r = (e.semi_major * e.semi_minor).sqrt();
    let d = (e.rho(p) - 1.0) * mean_r;
    0.5 * (1.0 - (d / edge.max(1e-6)).tanh())
}

fn bisector_distance(a: Point, b: Point, p: Point) -> f64 {
    let mid = (a + b) * 0.5;
    let dir = (b - a).normalized().unwrap_or(Point::new(1.0, 0.0));
    (p - mid).dot(dir).abs()
}

/// True when the two ellipses share interior, checked on the segment
/// between their centers (enough for the convex shapes generated here).
fn overlaps(a: &Ellipse, b: &Ellipse) -> bool {
    (0..=200).any(|i| {
        let p = a.center + (b.center - a.center) * (i as f64 / 200.0);
        a.contains(p) && b.contains(p)
    })
}

/// Radius of `e` in direction `angle`.
fn radius_towards(e: &Ellipse, angle: f64) -> f64 {
    let phi = angle - e.orientation;
    let (a, b) = (e.semi_major, e.semi_minor);
    a * b / ((b * phi.cos()).powi(2) + (a * phi.sin()).powi(2)).sqrt()
}

/// A fixed-seed benchmark corpus of overlapping two- and three-nucleus
/// chains (alternating). Three-nucleus chains bend by 0 to 60 degrees at the
/// middle nucleus.
pub fn chain_corpus(count: usize, seed: u64) -> Vec<SyntheticSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let n_nuclei = if k % 2 == 0 { 2 } else { 3 };
            let mut nuclei: Vec<NucleusSpec> = Vec::new();
            let mut heading: f64 = rng.random_range(0.0..2.0 * PI);
            let mut center = Point::new(0.0, 0.0);
            for i in 0..n_nuclei {
                let semi_major = rng.random_range(16.0..21.0);
                let nucleus = NucleusSpec {
                    center,
                    semi_major,
                    semi_minor: semi_major * rng.random_range(0.7..0.95),
                    orientation: rng.random_range(0.0..PI),
                    peak: rng.random_range(0.6..0.9),
                };
                if i > 0 {
                    let prev = nuclei[i - 1];
                    let reach =
                        radius_towards(&prev.ellipse(), heading) + radius_towards(&nucleus.ellipse(), heading + PI);
                    let spacing = reach * rng.random_range(0.72..0.85);
                    let c = prev.center + Point::new(heading.cos(), heading.sin()) * spacing;
                    nuclei.push(NucleusSpec { center: c, ..nucleus });
                    let bend: f64 = rng.random_range(0.0..PI / 3.0);
                    heading += if rng.random_bool(0.5) { bend } else { -bend };
                } else {
                    nuclei.push(nucleus);
                }
                center = nuclei[i].center;
            }
            let margin = 12.0;
            let min_x = nuclei.iter().map(|n| n.center.x - n.semi_major).fold(f64::INFINITY, f64::min);
            let min_y = nuclei.iter().map(|n| n.center.y - n.semi_major).fold(f64::INFINITY, f64::min);
            let max_x = nuclei.iter().map(|n| n.center.x + n.semi_major).fold(f64::NEG_INFINITY, f64::max);
            let max_y = nuclei.iter().map(|n| n.center.y + n.semi_major).fold(f64::NEG_INFINITY, f64::max);
            let shift = Point::new(margin - min_x, margin - min_y);
            for n in &mut nuclei {
                n.center = n.center + shift;
            }
            let width = (max_x - min_x + 2.0 * margin).ceil() as usize;
            let height = (max_y - min_y + 2.0 * margin).ceil() as usize;
            SyntheticSpec::new(width, height, nuclei, seed.wrapping_mul(1000).wrapping_add(k as u64))
        })
        .collect()
}
