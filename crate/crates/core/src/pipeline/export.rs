//! Debug exports and overlay rendering.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use image::{Rgb, RgbImage};
use serde::Serialize;

use super::{Diagnostics, Segmentation};
use crate::curve_trace::DividingPath;
use crate::geom::{Pixel, Point};
use crate::image_prep::{select_nuclear_channel, RasterImage};

/// Per-point contour table: `contour,index,x,y,s,kappa`.
pub fn contour_csv(diag: &Diagnostics) -> String {
    let mut out = String::from("contour,index,x,y,s,kappa\n");
    for c in &diag.contours {
        for (i, p) in c.points.iter().enumerate() {
            writeln!(out, "{},{i},{:.4},{:.4},{:.6},{:.6}", c.id, p.x, p.y, c.arc[i], c.kappa[i]).unwrap();
        }
    }
    out
}

/// Chain-coded path: start pixel plus runs of `[direction, count]`, with
/// directions 0..8 counted clockwise from +x.
#[derive(Debug, Serialize)]
struct EncodedPath {
    source_pair: Option<(usize, usize)>,
    fallback: bool,
    start: (i32, i32),
    runs: Vec<(u8, usize)>,
}

fn direction(a: Pixel, b: Pixel) -> u8 {
    match (b.x - a.x, b.y - a.y) {
        (1, 0) => 0,
        (1, 1) => 1,
        (0, 1) => 2,
        (-1, 1) => 3,
        (-1, 0) => 4,
        (-1, -1) => 5,
        (0, -1) => 6,
        _ => 7,
    }
}

/// Paths as run-length encoded chain codes in JSON.
pub fn paths_json(paths: &[DividingPath]) -> String {
    let encoded: Vec<EncodedPath> = paths
        .iter()
        .map(|p| {
            let mut runs: Vec<(u8, usize)> = Vec::new();
            for w in p.pixels.windows(2) {
                let d = direction(w[0], w[1]);
                match runs.last_mut() {
                    Some((last, n)) if *last == d => *n += 1,
                    _ => runs.push((d, 1)),
                }
            }
            EncodedPath {
                source_pair: p.source_pair,
                fallback: p.fallback,
                start: (p.pixels[0].x, p.pixels[0].y),
                runs,
            }
        })
        .collect();
    serde_json::to_string_pretty(&encoded).expect("paths serialize")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OverlayOptions {
    pub candidates: bool,
    pub ellipses: bool,
    pub paths: bool,
}

fn label_colour(l: u32) -> Rgb<u8> {
    // golden-ratio hue steps keep neighbouring labels distinct
    let h = (l as f64 * 0.618_033_988_75).fract() * 6.0;
    let x = (1.0 - (h % 2.0 - 1.0).abs()) * 255.0;
    let (r, g, b) = match h as u32 {
        0 => (255.0, x, 0.0),
        1 => (x, 255.0, 0.0),
        2 => (0.0, 255.0, x),
        3 => (0.0, x, 255.0),
        4 => (x, 0.0, 255.0),
        _ => (255.0, 0.0, x),
    };
    Rgb([r as u8, g as u8, b as u8])
}

/// Grayscale image with label outlines, and optionally dividing paths,
/// candidate points and fitted ellipses drawn on top.
pub fn overlay(img: &RasterImage, seg: &Segmentation, opts: OverlayOptions) -> RgbImage {
    let plane = select_nuclear_channel(img);
    let (w, h) = (img.width(), img.height());
    let mut out = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let v = (plane.get(x as usize, y as usize, 0) * 255.0).round() as u8;
        Rgb([v, v, v])
    });
    let mut put = |p: Pixel, c: Rgb<u8>| {
        if p.x >= 0 && p.y >= 0 && (p.x as usize) < w && (p.y as usize) < h {
            out.put_pixel(p.x as u32, p.y as u32, c);
        }
    };
    for (k, boundary) in seg.labels.boundaries().iter().enumerate() {
        for &p in boundary {
            put(p, label_colour(k as u32 + 1));
        }
    }
    if opts.paths {
        for path in &seg.paths {
            for &p in &path.pixels {
                put(p, Rgb([255, 0, 0]));
            }
        }
    }
    if opts.ellipses {
        for e in seg.diagnostics.contours.iter().flat_map(|c| &c.ellipses) {
            for i in 0..360 {
                put(e.point_at(i as f64 / 360.0 * TAU).to_pixel(), Rgb([0, 255, 255]));
            }
        }
    }
    if opts.candidates {
        for c in seg.diagnostics.contours.iter().flat_map(|c| &c.candidates) {
            let center = c.position.to_pixel();
            for (dx, dy) in [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)] {
                put(Pixel::new(center.x + dx, center.y + dy), Rgb([255, 255, 0]));
            }
            let tip = c.position + c.normal * 4.0;
            for p in crate::geom::bresenham(center, Point::new(tip.x, tip.y).to_pixel()) {
                put(p, Rgb([255, 160, 0]));
            }
        }
    }
    out
}
