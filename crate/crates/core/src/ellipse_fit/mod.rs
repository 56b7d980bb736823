//! Ellipse fitting of candidate nucleus regions and the fit-quality score
//! used to decide which adjacent pairs get connected.

mod select;

pub use select::{select_connections, Connection, ConnectionSource, Evaluation, Selection};

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::curvature::CandidatePoint;
use crate::error::{Error, Result};
use crate::geom::{self, Pixel, Point};
use crate::image_prep::Contour;
use crate::pairing::SubContour;

/// Geometric ellipse. `orientation` is the angle of the major axis from +x,
/// in `[0, pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: Point,
    pub semi_major: f64,
    pub semi_minor: f64,
    pub orientation: f64,
}

impl Ellipse {
    /// Normalized radius: 1 on the ellipse, < 1 inside.
    pub fn rho(&self, p: Point) -> f64 {
        let d = (p - self.center).rotated(-self.orientation);
        ((d.x / self.semi_major).powi(2) + (d.y / self.semi_minor).powi(2)).sqrt()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.rho(p) <= 1.0
    }

    /// Ramanujan's perimeter approximation.
    pub fn perimeter(&self) -> f64 {
        let (a, b) = (self.semi_major, self.semi_minor);
        PI * (3.0 * (a + b) - ((3.0 * a + b) * (a + 3.0 * b)).sqrt())
    }

    pub fn area(&self) -> f64 {
        PI * self.semi_major * self.semi_minor
    }

    pub fn elongation(&self) -> f64 {
        self.semi_major / self.semi_minor
    }

    /// Point at parametric angle `t`.
    pub fn point_at(&self, t: f64) -> Point {
        self.center + Point::new(self.semi_major * t.cos(), self.semi_minor * t.sin()).rotated(self.orientation)
    }

    /// Pixels whose centers lie inside the ellipse.
    pub fn rasterize(&self) -> Vec<Pixel> {
        let r = self.semi_major.ceil() as i32 + 1;
        let (cx, cy) = (self.center.x.round() as i32, self.center.y.round() as i32);
        let mut out = Vec::new();
        for y in cy - r..=cy + r {
            for x in cx - r..=cx + r {
                if self.contains(Point::new(x as f64, y as f64)) {
                    out.push(Pixel::new(x, y));
                }
            }
        }
        out
    }
}

/// Direct least-squares ellipse fit (ellipse-specific constraint
/// `4AC - B^2 = 1`), solved in the numerically stable reduced 3x3 form on
/// centered and scaled coordinates.
pub fn fit_ellipse(points: &[Point]) -> Result<Ellipse> {
    if points.len() < 6 {
        return Err(Error::FitFailure("at least 6 points are required"));
    }
    let n = points.len() as f64;
    let mean = points.iter().fold(Point::default(), |a, &p| a + p) * (1.0 / n);
    let rms = (points.iter().map(|p| (*p - mean).dot(*p - mean)).sum::<f64>() / n).sqrt();
    if rms < 1e-9 {
        return Err(Error::FitFailure("points coincide"));
    }
    let scale = std::f64::consts::SQRT_2 / rms;

    let mut s1 = Matrix3::<f64>::zeros();
    let mut s2 = Matrix3::<f64>::zeros();
    let mut s3 = Matrix3::<f64>::zeros();
    for p in points {
        let u = (*p - mean) * scale;
        let d1 = Vector3::new(u.x * u.x, u.x * u.y, u.y * u.y);
        let d2 = Vector3::new(u.x, u.y, 1.0);
        s1 += d1 * d1.transpose();
        s2 += d1 * d2.transpose();
        s3 += d2 * d2.transpose();
    }
    let s3_inv = s3.try_inverse().ok_or(Error::FitFailure("points are collinear"))?;
    let t = -s3_inv * s2.transpose();
    let m = s1 + s2 * t;
    // premultiply by the inverse of the constraint block [[0,0,2],[0,-1,0],[2,0,0]]
    let reduced =
        Matrix3::from_rows(&[(m.row(2) * 0.5).into_owned(), (-m.row(1)).into_owned(), (m.row(0) * 0.5).into_owned()]);

    let mut best: Option<(f64, Vector3<f64>)> = None;
    for ev in reduced.complex_eigenvalues().iter() {
        if ev.im.abs() > 1e-9 * (1.0 + ev.re.abs()) {
            continue;
        }
        let Some(v) = null_vector(&(reduced - Matrix3::identity() * ev.re)) else { continue };
        let cond = 4.0 * v[0] * v[2] - v[1] * v[1];
        if cond > 0.0 {
            // smallest non-negative eigenvalue is the least-squares solution
            let score = ev.re.abs();
            if best.as_ref().is_none_or(|(s, _)| score < *s) {
                best = Some((score, v));
            }
        }
    }
    let (_, a1) = best.ok_or(Error::FitFailure("no elliptical solution"))?;
    let a2 = t * a1;

    // undo the normalization: u = (x - mean) * scale
    let (a, b, c) = (a1[0] * scale * scale, a1[1] * scale * scale, a1[2] * scale * scale);
    let (d0, e0, f0) = (a2[0] * scale, a2[1] * scale, a2[2]);
    let (mx, my) = (mean.x, mean.y);
    let d = d0 - 2.0 * a * mx - b * my;
    let e = e0 - 2.0 * c * my - b * mx;
    let f = a * mx * mx + b * mx * my + c * my * my - d0 * mx - e0 * my + f0;
    conic_to_ellipse([a, b, c, d, e, f])
}

/// Unit vector spanning the null space of a (near-)singular 3x3 matrix,
/// from the largest cross product of its rows.
fn null_vector(m: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let rows = [m.row(0).transpose(), m.row(1).transpose(), m.row(2).transpose()];
    let cands = [rows[0].cross(&rows[1]), rows[0].cross(&rows[2]), rows[1].cross(&rows[2])];
    let best = cands.iter().max_by(|x, y| x.norm().total_cmp(&y.norm()))?;
    let nrm = best.norm();
    (nrm > 1e-300).then(|| best / nrm)
}

/// Geometric parameters of the conic `A x^2 + B xy + C y^2 + D x + E y + F = 0`.
pub fn conic_to_ellipse(k: [f64; 6]) -> Result<Ellipse> {
    let [a, b, c, d, e, f] = k;
    let det = 4.0 * a * c - b * b;
    if det <= 0.0 {
        return Err(Error::FitFailure("conic is not an ellipse"));
    }
    let x0 = (b * e - 2.0 * c * d) / det;
    let y0 = (b * d - 2.0 * a * e) / det;
    let f_center = f + 0.5 * (d * x0 + e * y0);

    // eigen-decomposition of [[a, b/2], [b/2, c]]
    let tr = a + c;
    let disc = ((a - c) * (a - c) + b * b).sqrt();
    let l_small = 0.5 * (tr - disc);
    let l_large = 0.5 * (tr + disc);
    let (s1, s2) = (-f_center / l_small, -f_center / l_large);
    if !(s1 > 0.0 && s2 > 0.0) || !s1.is_finite() || !s2.is_finite() {
        return Err(Error::FitFailure("imaginary ellipse"));
    }
    // the small eigenvalue's eigenvector is the major axis
    let angle = if b.abs() < 1e-15 * (a.abs() + c.abs()) {
        if a <= c {
            0.0
        } else {
            PI / 2.0
        }
    } else {
        (l_small - a).atan2(0.5 * b)
    };
    Ok(Ellipse {
        center: Point::new(x0, y0),
        semi_major: s1.sqrt(),
        semi_minor: s2.sqrt(),
        orientation: angle.rem_euclid(PI),
    })
}

/// How the fit angle is expressed in the quality score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiUnit {
    /// Fraction of a full turn, in `[0, 1]`.
    Turns,
    Degrees,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityParams {
    pub mu: f64,
    pub nu: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub q_threshold: f64,
    /// Connections meeting at a shared endpoint under this angle (degrees)
    /// are pruned.
    pub sharp_angle_min: f64,
    pub psi_unit: PsiUnit,
}

impl Default for QualityParams {
    fn default() -> Self {
        Self {
            mu: 10.70,
            nu: 10.70,
            gamma1: 0.67,
            gamma2: 3.40,
            q_threshold: 0.7,
            sharp_angle_min: 20.0,
            psi_unit: PsiUnit::Turns,
        }
    }
}

/// Floor of the quality denominator; a perfect fit would otherwise divide by zero.
pub const QUALITY_EPS: f64 = 1e-3;

/// Components of the fit-quality score and the score itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitQuality {
    /// Intersection over union of region and ellipse.
    pub overlap: f64,
    /// Angular coverage of the region's contour arcs about the ellipse center.
    pub psi: f64,
    pub dx: f64,
    pub dy: f64,
    /// Absolute perimeter difference, pixels.
    pub d_perimeter: f64,
    /// Major over minor axis.
    pub elongation: f64,
    pub q: f64,
}

impl FitQuality {
    pub fn from_components(
        overlap: f64,
        psi: f64,
        dx: f64,
        dy: f64,
        d_perimeter: f64,
        elongation: f64,
        params: &QualityParams,
    ) -> Self {
        let mut fq = Self { overlap, psi, dx, dy, d_perimeter, elongation, q: 0.0 };
        fq.q = fq.recompute(params);
        fq
    }

    /// The score recomputed from the stored components.
    pub fn recompute(&self, p: &QualityParams) -> f64 {
        let num = p.mu * self.overlap + p.nu * self.psi;
        let den = (self.dx + self.dy) + p.gamma1 * self.d_perimeter + p.gamma2 * self.elongation;
        num / den.max(QUALITY_EPS)
    }
}

/// Boundary geometry of a candidate nucleus region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGeometry {
    /// Closed boundary (arcs joined by straight connections).
    pub polygon: Vec<Point>,
    /// The contour arcs of the boundary, each in order.
    pub arcs: Vec<Vec<Point>>,
}

impl RegionGeometry {
    pub fn of(region: &SubContour, contour: &Contour, candidates: &[CandidatePoint]) -> Self {
        Self { polygon: region.polygon(contour, candidates), arcs: region.arc_points(contour, candidates) }
    }

    pub fn arc_point_count(&self) -> usize {
        self.arcs.iter().map(Vec::len).sum()
    }
}

/// Score how well `e` explains the region.
pub fn fit_quality(region: &RegionGeometry, e: &Ellipse, params: &QualityParams) -> Result<FitQuality> {
    let region_px = geom::rasterize_polygon(&region.polygon);
    if region_px.is_empty() || region.polygon.len() < 3 {
        return Err(Error::EmptyRegion);
    }
    let ellipse_px = e.rasterize();
    let overlap = iou(&region_px, &ellipse_px);

    let mut sweep = 0.0;
    for arc in &region.arcs {
        let mut acc = 0.0;
        for w in arc.windows(2) {
            let (u, v) = (w[0] - e.center, w[1] - e.center);
            acc += u.cross(v).atan2(u.dot(v));
        }
        sweep += acc.abs();
    }
    let turns = (sweep / TAU).min(1.0);
    let psi = match params.psi_unit {
        PsiUnit::Turns => turns,
        PsiUnit::Degrees => turns * 360.0,
    };

    let centroid = geom::polygon_centroid(&region.polygon);
    let d_perimeter = (geom::closed_length(&region.polygon) - e.perimeter()).abs();
    Ok(FitQuality::from_components(
        overlap,
        psi,
        (centroid.x - e.center.x).abs(),
        (centroid.y - e.center.y).abs(),
        d_perimeter,
        e.elongation(),
        params,
    ))
}

fn iou(a: &[Pixel], b: &[Pixel]) -> f64 {
    use std::collections::HashSet;
    let sa: HashSet<Pixel> = a.iter().copied().collect();
    let inter = b.iter().filter(|p| sa.contains(p)).count();
    let union = sa.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Fit an ellipse to the region's arcs and score it. `None` when the arcs
/// are too short or the fit fails (the caller treats that as `Q = 0`).
pub fn score_region(geometry: &RegionGeometry, params: &QualityParams) -> Option<(Ellipse, FitQuality)> {
    let pts: Vec<Point> = geometry.arcs.iter().flatten().copied().collect();
    let e = fit_ellipse(&pts).ok()?;
    // a fit far larger than the region is a degenerate near-line solution
    if e.semi_major > 4.0 * geom::closed_length(&geometry.polygon) {
        return None;
    }
    let q = fit_quality(geometry, &e, params).ok()?;
    Some((e, q))
}
