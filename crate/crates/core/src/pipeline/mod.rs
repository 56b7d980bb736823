//! End-to-end segmentation of one image.

mod batch;
mod export;

pub use batch::{aggregate_csv, evaluate_dirs, BatchReport, ImageReport, METRIC_NAMES};
pub use export::{contour_csv, overlay, paths_json, OverlayOptions};

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::curvature::{detect_candidates, CandidatePoint};
use crate::curve_trace::{apply_divisions, hessian_field, trace_dividing_curve, DividingPath};
use crate::ellipse_fit::{score_region, select_connections, Connection, Ellipse, Evaluation, RegionGeometry};
use crate::error::{Error, Result};
use crate::eval_metrics::LabelMask;
use crate::geom::Point;
use crate::image_prep::{binarize, select_nuclear_channel, smooth_contour, trace_contours, RasterImage};
use crate::pairing::{merge_low_energy, partition_contour, screen_pairs, PointPair};

/// What the pipeline decided for one clump contour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourReport {
    pub id: usize,
    /// Smoothed contour points.
    #[serde(skip)]
    pub points: Vec<Point>,
    /// Curvature at each smoothed point.
    #[serde(skip)]
    pub kappa: Vec<f64>,
    /// Normalized arc position of each point.
    #[serde(skip)]
    pub arc: Vec<f64>,
    pub candidates: Vec<CandidatePoint>,
    pub adjacent_pairs: Vec<PointPair>,
    /// Non-adjacent pairs used to partition the clump.
    pub partition_pairs: Vec<PointPair>,
    pub evaluations: Vec<Evaluation>,
    pub connections: Vec<Connection>,
    pub pruned: Vec<Connection>,
    /// Ellipse fitted to each final region.
    pub ellipses: Vec<Ellipse>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub width: usize,
    pub height: usize,
    pub otsu_foreground: usize,
    pub contours: Vec<ContourReport>,
    /// Paths that fell back to the straight connection.
    pub fallback_paths: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub labels: LabelMask,
    pub paths: Vec<DividingPath>,
    pub diagnostics: Diagnostics,
}

/// Segment the nuclei of one image.
pub fn run_pipeline(img: &RasterImage, cfg: &PipelineConfig) -> Result<Segmentation> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let channel = select_nuclear_channel(img);
    let mask = binarize(&channel, &cfg.cleanup());
    let pairing = cfg.pairing();
    let quality = cfg.quality();

    let mut reports = Vec::new();
    for (id, contour) in trace_contours(&mask).into_iter().enumerate() {
        let smoothed = smooth_contour(&contour, cfg.contour_sigma);
        let (profile, _, candidates) = detect_candidates(&smoothed, cfg.kappa_min, Some(&mask));
        let candidates = merge_low_energy(candidates, &profile, &pairing);
        let screening = screen_pairs(&candidates, &profile, Some(&mask), &pairing);
        let (regions, used) = partition_contour(id, candidates.len(), &screening.c_minus);
        let positions: Vec<Point> = candidates.iter().map(|c| c.position).collect();
        let selection = select_connections(regions, &screening.c_plus, &used, &positions, &quality, |r| {
            score_region(&RegionGeometry::of(r, &smoothed, &candidates), &quality).map(|(_, q)| q)
        });
        let ellipses = selection
            .regions
            .iter()
            .filter_map(|r| score_region(&RegionGeometry::of(r, &smoothed, &candidates), &quality).map(|(e, _)| e))
            .collect();
        reports.push(ContourReport {
            id,
            points: smoothed.points().to_vec(),
            kappa: profile.kappa,
            arc: profile.arc,
            candidates,
            adjacent_pairs: screening.c_plus,
            partition_pairs: used,
            evaluations: selection.evaluations,
            connections: selection.connections,
            pruned: selection.pruned,
            ellipses,
        });
    }

    let mut paths = Vec::new();
    if reports.iter().any(|r| !r.connections.is_empty()) {
        let field = hessian_field(&channel, cfg.hessian_sigma);
        let clamp =
            |p: Point| Point::new(p.x.clamp(0.0, (img.width() - 1) as f64), p.y.clamp(0.0, (img.height() - 1) as f64));
        for report in &reports {
            for conn in &report.connections {
                let (a, b) = (&report.candidates[conn.a], &report.candidates[conn.b]);
                // start from the deeper notch
                let (from, to) = if a.kappa.abs() >= b.kappa.abs() { (a, b) } else { (b, a) };
                match trace_dividing_curve(&field, clamp(from.position), clamp(to.position), &cfg.trace()) {
                    Ok(mut path) => {
                        path.source_pair = Some((conn.a, conn.b));
                        paths.push(path);
                    }
                    // endpoints rounding to the same pixel need no cut
                    Err(Error::InvalidPair) => {}
                    Err(e) => return Err(e.in_stage("curve_trace")),
                }
            }
        }
    }

    let labels = apply_divisions(&mask, &paths, cfg.min_area);
    let diagnostics = Diagnostics {
        width: img.width(),
        height: img.height(),
        otsu_foreground: mask.count(),
        contours: reports,
        fallback_paths: paths.iter().filter(|p| p.fallback).count(),
    };
    Ok(Segmentation { labels, paths, diagnostics })
}
