//! Label masks and object-level segmentation metrics.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use image::{ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Pixel, Point};
use crate::image_prep::{label_regions, BinaryMask, Connectivity};

/// Per-pixel object labels, 0 for background. Labels are compact: `1..=K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    count: usize,
}

impl LabelMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, labels: vec![0; width * height], count: 0 }
    }

    /// Build from arbitrary ids; they are renumbered `1..=K` in raster order
    /// of first appearance.
    pub fn from_raw(width: usize, height: usize, raw: Vec<u32>) -> Result<Self> {
        if raw.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "label buffer has {} entries, expected {}",
                raw.len(),
                width * height
            )));
        }
        let mut map: HashMap<u32, u32> = HashMap::new();
        let labels: Vec<u32> = raw
            .into_iter()
            .map(|l| {
                if l == 0 {
                    return 0;
                }
                let next = map.len() as u32 + 1;
                *map.entry(l).or_insert(next)
            })
            .collect();
        Ok(Self { width, height, labels, count: map.len() })
    }

    /// One label per 8-connected foreground component.
    pub fn from_mask(mask: &BinaryMask) -> Self {
        let (labels, count) = label_regions(mask.width(), mask.height(), Connectivity::Eight, |i| mask.bits()[i]);
        Self { width: mask.width(), height: mask.height(), labels, count }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Number of objects.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn at(&self, p: Pixel) -> u32 {
        if p.x < 0 || p.y < 0 || p.x as usize >= self.width || p.y as usize >= self.height {
            0
        } else {
            self.get(p.x as usize, p.y as usize)
        }
    }

    /// Pixel count of each label; index 0 is background.
    pub fn areas(&self) -> Vec<usize> {
        let mut a = vec![0; self.count + 1];
        for &l in &self.labels {
            a[l as usize] += 1;
        }
        a
    }

    pub fn foreground(&self) -> BinaryMask {
        BinaryMask::from_bits(self.width, self.height, self.labels.iter().map(|&l| l != 0).collect())
    }

    /// Pixels of each object (index `k - 1` holds label `k`), raster order.
    pub fn objects(&self) -> Vec<Vec<Pixel>> {
        let mut out = vec![Vec::new(); self.count];
        for (i, &l) in self.labels.iter().enumerate() {
            if l != 0 {
                out[l as usize - 1].push(Pixel::new((i % self.width) as i32, (i / self.width) as i32));
            }
        }
        out
    }

    /// Object pixels with a 4-neighbour outside the object.
    pub fn boundaries(&self) -> Vec<Vec<Pixel>> {
        self.objects()
            .into_iter()
            .enumerate()
            .map(|(k, px)| {
                let l = k as u32 + 1;
                px.into_iter()
                    .filter(|p| {
                        [(1, 0), (-1, 0), (0, 1), (0, -1)]
                            .iter()
                            .any(|&(dx, dy)| self.at(Pixel::new(p.x + dx, p.y + dy)) != l)
                    })
                    .collect()
            })
            .collect()
    }

    /// Write as a 16-bit grayscale PNG holding the raw label values.
    pub fn save_png16(&self, path: &Path) -> Result<()> {
        if self.count > u16::MAX as usize {
            return Err(Error::InvalidInput(format!("{} labels do not fit in 16 bits", self.count)));
        }
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(
            self.width as u32,
            self.height as u32,
            self.labels.iter().map(|&l| l as u16).collect(),
        )
        .expect("buffer size matches dimensions");
        buf.save(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    /// Read a label PNG (8- or 16-bit grayscale). Ids are renumbered compactly.
    pub fn load_png(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let img = image::load_from_memory(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let raw: Vec<u32> = match img {
            image::DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(u32::from).collect(),
            image::DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(u32::from).collect(),
            other => {
                return Err(Error::Format(format!(
                    "{}: label masks must be grayscale, got {:?}",
                    path.display(),
                    other.color()
                )))
            }
        };
        Self::from_raw(w, h, raw)
    }
}

/// A matched predicted/ground-truth object pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectMatch {
    pub pred: u32,
    pub gt: u32,
    pub iou: f64,
}

/// Greedy one-to-one matching by descending IoU, keeping pairs with
/// `iou >= iou_min`.
pub fn match_objects(pred: &LabelMask, gt: &LabelMask, iou_min: f64) -> Result<Vec<ObjectMatch>> {
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(Error::DimensionMismatch(pred.width, pred.height, gt.width, gt.height));
    }
    let mut inter: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for (&p, &g) in pred.labels.iter().zip(&gt.labels) {
        if p != 0 && g != 0 {
            *inter.entry((p, g)).or_default() += 1;
        }
    }
    let (ap, ag) = (pred.areas(), gt.areas());
    let mut cands: Vec<ObjectMatch> = inter
        .into_iter()
        .map(|((p, g), n)| ObjectMatch { pred: p, gt: g, iou: n as f64 / (ap[p as usize] + ag[g as usize] - n) as f64 })
        .filter(|m| m.iou >= iou_min)
        .collect();
    cands.sort_by(|a, b| b.iou.total_cmp(&a.iou).then((a.pred, a.gt).cmp(&(b.pred, b.gt))));
    let mut used_p = vec![false; pred.count + 1];
    let mut used_g = vec![false; gt.count + 1];
    let mut out = Vec::new();
    for m in cands {
        if !used_p[m.pred as usize] && !used_g[m.gt as usize] {
            used_p[m.pred as usize] = true;
            used_g[m.gt as usize] = true;
            out.push(m);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedObject {
    pub pred: u32,
    pub gt: u32,
    pub iou: f64,
    pub hausdorff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Mean IoU of matched pairs.
    pub jaccard: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Mean boundary Hausdorff distance of matched pairs; `None` without matches.
    pub hausdorff: Option<f64>,
    pub pred_objects: usize,
    pub gt_objects: usize,
    pub per_object: Vec<MatchedObject>,
}

pub fn compute_metrics(matches: &[ObjectMatch], pred: &LabelMask, gt: &LabelMask) -> MetricReport {
    let tp = matches.len() as f64;
    let ratio = |n: usize| if n == 0 { 0.0 } else { tp / n as f64 };
    let (precision, recall) = (ratio(pred.count), ratio(gt.count));
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    let (bp, bg) = (pred.boundaries(), gt.boundaries());
    let per_object: Vec<MatchedObject> = matches
        .iter()
        .map(|m| {
            let a: Vec<Point> = bp[m.pred as usize - 1].iter().map(|p| p.to_point()).collect();
            let b: Vec<Point> = bg[m.gt as usize - 1].iter().map(|p| p.to_point()).collect();
            let hd = hausdorff(&a, &b).expect("matched objects are non-empty");
            MatchedObject { pred: m.pred, gt: m.gt, iou: m.iou, hausdorff: hd }
        })
        .collect();
    let mean = |f: fn(&MatchedObject) -> f64| {
        (!per_object.is_empty()).then(|| per_object.iter().map(f).sum::<f64>() / per_object.len() as f64)
    };
    MetricReport {
        jaccard: mean(|m| m.iou).unwrap_or(0.0),
        precision,
        recall,
        f1,
        hausdorff: mean(|m| m.hausdorff),
        pred_objects: pred.count,
        gt_objects: gt.count,
        per_object,
    }
}

/// Match and score in one call.
pub fn evaluate(pred: &LabelMask, gt: &LabelMask, iou_min: f64) -> Result<MetricReport> {
    let m = match_objects(pred, gt, iou_min)?;
    Ok(compute_metrics(&m, pred, gt))
}

/// Symmetric Euclidean Hausdorff distance between two point sets.
pub fn hausdorff(a: &[Point], b: &[Point]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let directed = |from: &[Point], to: &[Point]| {
        from.iter().map(|p| to.iter().map(|q| (*p - *q).dot(*p - *q)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_mask(w: usize, h: usize, rects: &[(usize, usize, usize, usize)]) -> LabelMask {
        let mut raw = vec![0u32; w * h];
        for (k, &(x0, y0, rw, rh)) in rects.iter().enumerate() {
            for y in y0..y0 + rh {
                for x in x0..x0 + rw {
                    raw[y * w + x] = k as u32 + 1;
                }
            }
        }
        LabelMask::from_raw(w, h, raw).unwrap()
    }

    #[test]
    fn identical_masks_are_perfect() {
        let m = rect_mask(40, 40, &[(1, 1, 8, 8), (20, 2, 5, 9), (5, 25, 12, 6)]);
        let matches = match_objects(&m, &m, 0.5).unwrap();
        assert_eq!(matches.len(), 3);
        assert!(matches.iter().all(|x| x.iou == 1.0));
        let r = compute_metrics(&matches, &m, &m);
        assert_eq!((r.precision, r.recall, r.f1, r.jaccard, r.hausdorff), (1.0, 1.0, 1.0, 1.0, Some(0.0)));
    }

    #[test]
    fn empty_prediction_matches_nothing() {
        let gt = rect_mask(30, 30, &[(1, 1, 5, 5), (10, 10, 5, 5)]);
        let r = evaluate(&LabelMask::empty(30, 30), &gt, 0.5).unwrap();
        assert!(r.per_object.is_empty());
        assert_eq!((r.precision, r.recall, r.f1, r.jaccard), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(r.hausdorff, None);
    }

    #[test]
    fn third_overlap_is_not_a_match() {
        let pred = rect_mask(30, 30, &[(0, 0, 10, 10)]);
        let gt = rect_mask(30, 30, &[(0, 5, 10, 10)]);
        assert!(match_objects(&pred, &gt, 0.5).unwrap().is_empty());
        let loose = match_objects(&pred, &gt, 0.3).unwrap();
        assert!((loose[0].iou - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn split_object_halves_precision() {
        let gt = rect_mask(30, 30, &[(0, 0, 20, 10)]);
        // one half slightly larger so exactly one half clears 0.5
        let pred = rect_mask(30, 30, &[(0, 0, 11, 10), (11, 0, 9, 10)]);
        let r = evaluate(&pred, &gt, 0.5).unwrap();
        assert_eq!((r.precision, r.recall), (0.5, 1.0));
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(matches!(
            match_objects(&LabelMask::empty(3, 4), &LabelMask::empty(4, 3), 0.5),
            Err(Error::DimensionMismatch(3, 4, 4, 3))
        ));
    }

    #[test]
    fn hausdorff_examples() {
        let seg: Vec<Point> = (0..10).map(|i| Point::new(i as f64, 0.0)).collect();
        let off: Vec<Point> = seg.iter().map(|p| *p + Point::new(0.0, 3.0)).collect();
        assert_eq!(hausdorff(&seg, &seg).unwrap(), 0.0);
        assert_eq!(hausdorff(&seg, &off).unwrap(), 3.0);
        let sq = rect_mask(30, 30, &[(2, 2, 10, 10)]);
        let shifted = rect_mask(30, 30, &[(7, 2, 10, 10)]);
        let a: Vec<Point> = sq.boundaries()[0].iter().map(|p| p.to_point()).collect();
        let b: Vec<Point> = shifted.boundaries()[0].iter().map(|p| p.to_point()).collect();
        assert_eq!(hausdorff(&a, &b).unwrap(), 5.0);
        assert!(matches!(hausdorff(&[], &a), Err(Error::EmptySet)));
    }

    #[test]
    fn raw_ids_are_compacted() {
        let m = LabelMask::from_raw(3, 1, vec![7, 0, 3]).unwrap();
        assert_eq!(m.labels(), &[1, 0, 2]);
        assert_eq!(m.count(), 2);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.png");
        let m = rect_mask(25, 17, &[(1, 1, 4, 4), (10, 3, 6, 9)]);
        m.save_png16(&path).unwrap();
        assert_eq!(LabelMask::load_png(&path).unwrap(), m);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn relabeling_does_not_change_metrics(perm in Just(vec![1u32, 2, 3, 4]).prop_shuffle(), shift in 0usize..3) {
                let gt = rect_mask(40, 40, &[(1, 1, 8, 8), (20, 2, 5, 9), (5, 25, 12, 6), (25, 25, 10, 10)]);
                let pred = rect_mask(40, 40, &[(1 + shift, 1, 8, 8), (20, 2 + shift, 5, 9), (5, 25, 12, 6), (27, 25, 10, 10)]);
                let raw: Vec<u32> = pred.labels().iter().map(|&l| if l == 0 { 0 } else { perm[l as usize - 1] * 11 }).collect();
                let permuted = LabelMask::from_raw(40, 40, raw).unwrap();
                let a = evaluate(&pred, &gt, 0.5).unwrap();
                let b = evaluate(&permuted, &gt, 0.5).unwrap();
                prop_assert_eq!(a.precision, b.precision);
                prop_assert_eq!(a.recall, b.recall);
                prop_assert!((a.jaccard - b.jaccard).abs() < 1e-12);
                prop_assert!((a.hausdorff.unwrap() - b.hausdorff.unwrap()).abs() < 1e-12);
                for v in [a.precision, a.recall, a.f1, a.jaccard] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }

            #[test]
            fn hausdorff_is_symmetric(a in prop::collection::vec((-20.0..20.0f64, -20.0..20.0f64), 1..20),
                                      b in prop::collection::vec((-20.0..20.0f64, -20.0..20.0f64), 1..20)) {
                let a: Vec<Point> = a.into_iter().map(|(x, y)| Point::new(x, y)).collect();
                let b: Vec<Point> = b.into_iter().map(|(x, y)| Point::new(x, y)).collect();
                prop_assert_eq!(hausdorff(&a, &b).unwrap(), hausdorff(&b, &a).unwrap());
                prop_assert!(hausdorff(&a, &b).unwrap() >= 0.0);
            }
        }
    }
}
