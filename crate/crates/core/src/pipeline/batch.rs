//! Directory-level evaluation and CSV aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval_metrics::{evaluate, LabelMask, MetricReport};

pub const METRIC_NAMES: [&str; 5] = ["jaccard", "precision", "recall", "f1", "hausdorff"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    /// Path relative to the prediction directory.
    pub name: String,
    /// Subdirectory the image came from, or `all` for top-level files.
    pub group: String,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BatchReport {
    pub images: Vec<ImageReport>,
    /// Files present on only one side.
    pub unpaired: Vec<String>,
}

/// PNG files directly in `dir` and in its immediate subdirectories, as
/// sorted relative paths.
fn label_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let read = |d: &Path| -> Result<Vec<PathBuf>> {
        let entries = std::fs::read_dir(d).map_err(|source| Error::Io { path: d.to_path_buf(), source })?;
        let mut out = Vec::new();
        for e in entries {
            let e = e.map_err(|source| Error::Io { path: d.to_path_buf(), source })?;
            out.push(e.path());
        }
        Ok(out)
    };
    let is_png = |p: &Path| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png"));
    let mut files = Vec::new();
    for p in read(dir)? {
        if p.is_dir() {
            files.extend(read(&p)?.into_iter().filter(|f| f.is_file() && is_png(f)));
        } else if is_png(&p) {
            files.push(p);
        }
    }
    let mut rel: Vec<PathBuf> =
        files.into_iter().map(|f| f.strip_prefix(dir).expect("listed under dir").to_path_buf()).collect();
    rel.sort();
    Ok(rel)
}

/// Score every predicted label mask against the ground truth with the same
/// relative path.
pub fn evaluate_dirs(pred_dir: &Path, gt_dir: &Path, iou_min: f64) -> Result<BatchReport> {
    let preds = label_files(pred_dir)?;
    let gts = label_files(gt_dir)?;
    let mut out = BatchReport::default();
    for rel in &preds {
        if !gts.contains(rel) {
            out.unpaired.push(format!("prediction without ground truth: {}", rel.display()));
            continue;
        }
        let pred = LabelMask::load_png(&pred_dir.join(rel))?;
        let gt = LabelMask::load_png(&gt_dir.join(rel))?;
        let report = evaluate(&pred, &gt, iou_min)?;
        let group = match rel.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.display().to_string(),
            _ => "all".to_string(),
        };
        out.images.push(ImageReport { name: rel.display().to_string(), group, report });
    }
    for rel in gts.iter().filter(|g| !preds.contains(g)) {
        out.unpaired.push(format!("ground truth without prediction: {}", rel.display()));
    }
    Ok(out)
}

fn metric(r: &MetricReport, name: &str) -> Option<f64> {
    match name {
        "jaccard" => Some(r.jaccard),
        "precision" => Some(r.precision),
        "recall" => Some(r.recall),
        "f1" => Some(r.f1),
        "hausdorff" => r.hausdorff,
        _ => None,
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// One row per group with the mean and standard deviation of each metric.
/// Hausdorff statistics cover only images with at least one match.
pub fn aggregate_csv(report: &BatchReport) -> String {
    let mut out = String::from("group,images");
    for m in METRIC_NAMES {
        write!(out, ",{m}_mean,{m}_std").unwrap();
    }
    out.push('\n');
    let mut groups: BTreeMap<&str, Vec<&MetricReport>> = BTreeMap::new();
    for img in &report.images {
        groups.entry(&img.group).or_default().push(&img.report);
    }
    for (group, reports) in groups {
        write!(out, "{group},{}", reports.len()).unwrap();
        for m in METRIC_NAMES {
            let values: Vec<f64> = reports.iter().filter_map(|r| metric(r, m)).collect();
            match mean_std(&values) {
                Some((mean, std)) => write!(out, ",{mean:.6},{std:.6}").unwrap(),
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(w: usize, x0: usize) -> LabelMask {
        LabelMask::from_raw(w, w, (0..w * w).map(|i| u32::from(i % w >= x0 && i % w < x0 + 5 && i / w < 5)).collect())
            .unwrap()
    }

    #[test]
    fn perfect_directory_has_zero_spread() {
        let (pred, gt) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for k in 0..5 {
            let m = square(20, k);
            m.save_png16(&pred.path().join(format!("img{k}.png"))).unwrap();
            m.save_png16(&gt.path().join(format!("img{k}.png"))).unwrap();
        }
        let report = evaluate_dirs(pred.path(), gt.path(), 0.5).unwrap();
        assert_eq!(report.images.len(), 5);
        let csv = aggregate_csv(&report);
        let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(&row[..4], &["all", "5", "1.000000", "0.000000"]);
    }

    #[test]
    fn empty_directory_gives_header_only() {
        let (pred, gt) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let csv = aggregate_csv(&evaluate_dirs(pred.path(), gt.path(), 0.5).unwrap());
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("group,images,jaccard_mean"));
    }

    #[test]
    fn unpaired_files_are_listed_and_groups_split() {
        let (pred, gt) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for d in [pred.path(), gt.path()] {
            std::fs::create_dir(d.join("bt")).unwrap();
            square(20, 0).save_png16(&d.join("bt/a.png")).unwrap();
        }
        square(20, 0).save_png16(&pred.path().join("lonely.png")).unwrap();
        square(20, 3).save_png16(&pred.path().join("shifted.png")).unwrap();
        square(20, 0).save_png16(&gt.path().join("shifted.png")).unwrap();
        let report = evaluate_dirs(pred.path(), gt.path(), 0.5).unwrap();
        assert_eq!(report.unpaired.len(), 1);
        let csv = aggregate_csv(&report);
        let groups: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(groups, vec!["all", "bt"]);
    }

    #[test]
    fn population_std() {
        assert_eq!(mean_std(&[1.0, 3.0]), Some((2.0, 1.0)));
        assert_eq!(mean_std(&[]), None);
    }
}
