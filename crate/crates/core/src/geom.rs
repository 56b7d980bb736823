//! Small planar geometry toolkit shared by the pipeline stages.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// A point (or vector) in pixel coordinates. `x` grows to the right, `y`
/// grows downwards as rows do.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> Option<Point> {
        let n = self.norm();
        (n > 1e-12).then(|| Point::new(self.x / n, self.y / n))
    }

    /// Rotate by `angle` radians about the origin.
    pub fn rotated(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn to_pixel(self) -> Pixel {
        Pixel::new(self.x.round() as i32, self.y.round() as i32)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

/// Integer pixel coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pixel {
    pub x: i32,
    pub y: i32,
}

impl Pixel {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn to_point(self) -> Point {
        Point::new(self.x as f64, self.y as f64)
    }

    pub fn is_8_adjacent(self, o: Pixel) -> bool {
        self != o && (self.x - o.x).abs() <= 1 && (self.y - o.y).abs() <= 1
    }
}

/// Shoelace signed area; positive when the vertex order turns from +x towards +y.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += poly[i].cross(poly[(i + 1) % n]);
    }
    0.5 * acc
}

/// Area centroid of a simple polygon. Falls back to the vertex mean for
/// degenerate (zero-area) input.
pub fn polygon_centroid(poly: &[Point]) -> Point {
    let n = poly.len();
    let a = signed_area(poly);
    if a.abs() < 1e-12 {
        let s = poly.iter().fold(Point::default(), |acc, &p| acc + p);
        return s * (1.0 / n.max(1) as f64);
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let w = p.cross(q);
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    Point::new(cx / (6.0 * a), cy / (6.0 * a))
}

/// Perimeter of the closed polygon.
pub fn closed_length(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| poly[i].dist(poly[(i + 1) % n])).sum()
}

/// True when the open segments `a0-a1` and `b0-b1` intersect at a single
/// interior point. Segments sharing an endpoint do not count as crossing.
pub fn segments_cross(a0: Point, a1: Point, b0: Point, b1: Point) -> bool {
    const EPS: f64 = 1e-9;
    let d1 = (a1 - a0).cross(b0 - a0);
    let d2 = (a1 - a0).cross(b1 - a0);
    let d3 = (b1 - b0).cross(a0 - b0);
    let d4 = (b1 - b0).cross(a1 - b0);
    ((d1 > EPS && d2 < -EPS) || (d1 < -EPS && d2 > EPS)) && ((d3 > EPS && d4 < -EPS) || (d3 < -EPS && d4 > EPS))
}

/// Even-odd test of a pixel center against a closed polygon.
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Pixels whose centers fall inside the polygon (even-odd rule), found by
/// scanline crossing. Returned in raster order.
pub fn rasterize_polygon(poly: &[Point]) -> Vec<Pixel> {
    let n = poly.len();
    if n < 3 {
        return Vec::new();
    }
    let ymin = poly.iter().map(|p| p.y).fold(f64::INFINITY, f64::min).ceil() as i32;
    let ymax = poly.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max).floor() as i32;
    let mut out = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    for y in ymin..=ymax {
        let yc = y as f64;
        xs.clear();
        for i in 0..n {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            if (a.y > yc) != (b.y > yc) {
                xs.push(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        xs.sort_by(f64::total_cmp);
        for span in xs.chunks_exact(2) {
            let x0 = span[0].ceil() as i32;
            let x1 = span[1].floor() as i32;
            // a center exactly on the right edge belongs to the next span
            let x1 = if (span[1] - x1 as f64).abs() < 1e-12 && x1 > x0 { x1 - 1 } else { x1 };
            for x in x0..=x1 {
                out.push(Pixel::new(x, y));
            }
        }
    }
    out
}

/// 8-connected Bresenham line from `a` to `b`, both endpoints included.
pub fn bresenham(a: Pixel, b: Pixel) -> Vec<Pixel> {
    let (mut x, mut y) = (a.x, a.y);
    let dx = (b.x - a.x).abs();
    let dy = -(b.y - a.y).abs();
    let sx = if a.x < b.x { 1 } else { -1 };
    let sy = if a.y < b.y { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        out.push(Pixel::new(x, y));
        if x == b.x && y == b.y {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

/// Smallest absolute angle between two directions, in radians.
pub fn angle_between(a: Point, b: Point) -> f64 {
    let c = a.dot(b) / (a.norm() * b.norm());
    c.clamp(-1.0, 1.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(side: f64) -> Vec<Point> {
        vec![Point::new(0.0, 0.0), Point::new(side, 0.0), Point::new(side, side), Point::new(0.0, side)]
    }

    #[test]
    fn area_and_centroid_of_square() {
        let sq = square(4.0);
        assert_eq!(signed_area(&sq), 16.0);
        let c = polygon_centroid(&sq);
        assert!((c.x - 2.0).abs() < 1e-12 && (c.y - 2.0).abs() < 1e-12);
        assert_eq!(closed_length(&sq), 16.0);
    }

    #[test]
    fn crossing_segments() {
        let o = Point::new(0.0, 0.0);
        assert!(segments_cross(o, Point::new(2.0, 2.0), Point::new(0.0, 2.0), Point::new(2.0, 0.0)));
        // shared endpoint is not a crossing
        assert!(!segments_cross(o, Point::new(2.0, 2.0), o, Point::new(2.0, 0.0)));
        assert!(!segments_cross(o, Point::new(1.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 1.0)));
    }

    #[test]
    fn rasterized_square_counts_interior_centers() {
        let sq = vec![Point::new(-0.5, -0.5), Point::new(9.5, -0.5), Point::new(9.5, 9.5), Point::new(-0.5, 9.5)];
        let px = rasterize_polygon(&sq);
        assert_eq!(px.len(), 100);
        assert!(px.iter().all(|p| (0..10).contains(&p.x) && (0..10).contains(&p.y)));
    }

    #[test]
    fn bresenham_endpoints_and_adjacency() {
        let line = bresenham(Pixel::new(0, 0), Pixel::new(7, -3));
        assert_eq!(line.first(), Some(&Pixel::new(0, 0)));
        assert_eq!(line.last(), Some(&Pixel::new(7, -3)));
        assert_eq!(line.len(), 8);
        assert!(line.windows(2).all(|w| w[0].is_8_adjacent(w[1])));
    }
}
