//! Acceptance checks at pinned tolerances. Prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use clumpseg::config::PipelineConfig;
use clumpseg::curvature::{
    compute_curvature, outward_normal, vote_candidate, CandidatePoint, CurvatureProfile, Segment,
};
use clumpseg::curve_trace::{eigen_2x2, hessian_field, max_sector_deviation, trace_dividing_curve, TraceParams};
use clumpseg::ellipse_fit::{fit_ellipse, Ellipse, FitQuality, QualityParams};
use clumpseg::eval_metrics::{evaluate, LabelMask};
use clumpseg::geom::Point;
use clumpseg::image_prep::{Contour, RasterImage};
use clumpseg::pairing::{v_score, walking_energy, PairingParams};
use clumpseg::pipeline::{aggregate_csv, evaluate_dirs, run_pipeline, Segmentation};
use clumpseg::synth::{chain_corpus, generate_synthetic_clump};

type Outcome = (bool, String);

fn circle(r: f64, n: usize) -> Contour {
    Contour::new((0..n).map(|i| Point::new(r, 0.0).rotated(i as f64 / n as f64 * TAU)).collect()).unwrap()
}

fn candidate(c: &Contour, i: usize, kappa: f64, normal: Point) -> CandidatePoint {
    CandidatePoint { position: c.point(i), contour_index: i, s_star: 0.0, kappa, normal }
}

fn curvature_of_circles() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for r in [10.0, 20.0, 50.0] {
        let n = (TAU * r).round() as usize;
        let p = compute_curvature(&circle(r, n));
        for k in &p.kappa {
            worst = worst.max((k * r - 1.0).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (worst <= 0.03 && secs < 1.0, format!("worst relative error {:.4}%, {secs:.3} s", worst * 100.0))
}

/// Unit-spaced profile over a large circle carrying the given curvature.
fn profile_with(kappa: Vec<f64>) -> (Contour, CurvatureProfile) {
    let n = kappa.len();
    let c = circle(n as f64 / TAU, n);
    let length = c.arc_length();
    let arc = (0..n).map(|i| i as f64 / n as f64).collect();
    (c, CurvatureProfile { contour_id: 0, kappa, arc, length })
}

fn candidate_voting() -> Outcome {
    let mut k = vec![0.05; 100];
    for j in 0..=20 {
        k[40 + j] = -(j as f64 / 20.0);
    }
    let (c, p) = profile_with(k);
    let cand = vote_candidate(&c, &p, Segment { start: 40, end: 60 });
    let t = (cand.s_star - p.arc[40]) / (p.arc[60] - p.arc[40]);

    let mut k = vec![0.05; 60];
    for (j, v) in [0.05, 0.1, 0.2, 0.3, 0.2, 0.1, 0.05].iter().enumerate() {
        k[20 + j] = -v;
    }
    let (c, p) = profile_with(k);
    let sym = vote_candidate(&c, &p, Segment { start: 20, end: 26 });
    let ok = (t - 2.0 / 3.0).abs() <= 0.02 && sym.contour_index == 23;
    (ok, format!("linear weight t* = {t:.4}, symmetric run votes index {}", sym.contour_index))
}

fn quarter_circle_energy() -> Outcome {
    let c = circle(30.0, 800);
    let p = compute_curvature(&c);
    let at = |i| candidate(&c, i, -0.1, outward_normal(&c, i));
    let e = walking_energy(&p, &at(0), &at(200));
    let rel = (e / FRAC_PI_2 - 1.0).abs();
    (rel <= 0.03, format!("E = {e:.5} ({:.3}% from pi/2)", rel * 100.0))
}

fn pair_score() -> Outcome {
    let params = PairingParams::default();
    let c = circle(100.0, 10);
    let mut p = candidate(&c, 0, -0.1, Point::new(1.0, 0.0));
    p.position = Point::new(0.0, 0.0);
    let mut q = candidate(&c, 5, -0.1, Point::new(0.0, 1.0));
    q.position = Point::new(30.0, 0.0);
    let v = v_score(&p, &q, &params).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut violations = 0;
    for _ in 0..1000 {
        let dir = Point::new(1.0, 0.0).rotated(rng.random_range(0.0..TAU));
        let d = rng.random_range(2.0..60.0);
        let mut a = p;
        a.kappa = -rng.random_range(0.0..0.5);
        a.normal = Point::new(1.0, 0.0).rotated(rng.random_range(0.0..TAU));
        let mut b = a;
        b.kappa = -rng.random_range(0.0..0.5);
        b.position = dir * d;
        let theta = rng.random_range(0.0..3.0);
        b.normal = a.normal.rotated(theta);
        let base = v_score(&a, &b, &params).unwrap();
        let mut farther = b;
        farther.position = dir * (d + rng.random_range(0.1..10.0));
        let mut wider = b;
        wider.normal = a.normal.rotated(theta + rng.random_range(0.01..0.14));
        if v_score(&a, &farther, &params).unwrap() > base || v_score(&a, &wider, &params).unwrap() < base {
            violations += 1;
        }
    }
    (
        (v - 299.3).abs() <= 0.1 && violations == 0,
        format!("V = {v:.3}, {violations} monotonicity violations in 1000 pairs"),
    )
}

fn ellipse_recovery() -> Outcome {
    let truth = Ellipse { center: Point::new(12.0, -7.0), semi_major: 25.0, semi_minor: 11.0, orientation: 0.6 };
    let pts: Vec<Point> = (0..120).map(|i| truth.point_at(i as f64 / 120.0 * TAU)).collect();
    let fit = fit_ellipse(&pts).unwrap();
    let angle_err = {
        let d = (fit.orientation - truth.orientation).rem_euclid(std::f64::consts::PI);
        d.min(std::f64::consts::PI - d)
    };
    let exact_err = [
        fit.center.dist(truth.center),
        (fit.semi_major - truth.semi_major).abs(),
        (fit.semi_minor - truth.semi_minor).abs(),
        angle_err,
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let noisy: Vec<Point> =
        pts.iter().map(|p| Point::new(p.x + noise.sample(&mut rng), p.y + noise.sample(&mut rng))).collect();
    let center_err = fit_ellipse(&noisy).unwrap().center.dist(truth.center);
    (
        exact_err <= 1e-3 && center_err < 0.5,
        format!("exact max error {exact_err:.2e}, noisy center error {center_err:.3}"),
    )
}

fn fit_quality_consistency(runs: &[(Segmentation, LabelMask)]) -> Outcome {
    let params = QualityParams::default();
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for (seg, _) in runs {
        for q in seg.diagnostics.contours.iter().flat_map(|c| &c.evaluations).filter_map(|e| e.quality) {
            worst = worst.max((q.q - q.recompute(&params)).abs());
            checked += 1;
        }
    }
    let base = FitQuality::from_components(0.8, 0.7, 1.0, 1.0, 5.0, 1.5, &params);
    let probes = [
        FitQuality::from_components(0.9, 0.7, 1.0, 1.0, 5.0, 1.5, &params).q > base.q,
        FitQuality::from_components(0.8, 0.8, 1.0, 1.0, 5.0, 1.5, &params).q > base.q,
        FitQuality::from_components(0.8, 0.7, 2.0, 1.0, 5.0, 1.5, &params).q < base.q,
        FitQuality::from_components(0.8, 0.7, 1.0, 1.0, 6.0, 1.5, &params).q < base.q,
        FitQuality::from_components(0.8, 0.7, 1.0, 1.0, 5.0, 2.0, &params).q < base.q,
    ];
    let monotone = probes.iter().all(|&b| b);
    (
        checked > 0 && worst <= 1e-9 && monotone,
        format!("{checked} stored scores, max drift {worst:.1e}, monotone in every component: {monotone}"),
    )
}

fn hessian_accuracy() -> Outcome {
    let start = Instant::now();
    // images hold values in [0, 1], so the analytic fields are scaled down
    let k = 1.0 / 8000.0;
    type Case = (fn(f64, f64) -> f64, (f64, f64, f64));
    let cases: [Case; 3] =
        [(|x, _| x * x, (2.0, 0.0, 0.0)), (|x, y| x * y, (0.0, 1.0, 0.0)), (|_, _| 0.0, (0.0, 0.0, 0.0))];
    let mut worst: f64 = 0.0;
    for (f, (exx, exy, eyy)) in cases {
        let img = RasterImage::from_fn(60, 60, |x, y| 0.05 + k * f(x as f64, y as f64));
        let field = hessian_field(&img, 2.0);
        for y in 15..45 {
            for x in 15..45 {
                let (xx, xy, yy) = field.at(x, y);
                for (got, want) in [(xx, exx), (xy, exy), (yy, eyy)] {
                    // relative to the largest second derivative among the fields
                    worst = worst.max((got - want * k).abs() / (2.0 * k));
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut recon: f64 = 0.0;
    for _ in 0..100_000 {
        let (xx, xy, yy) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let e = eigen_2x2(xx, xy, yy);
        let m = |v: Point, l: f64| (l * v.x * v.x, l * v.x * v.y, l * v.y * v.y);
        let (a, b) = (m(e.v1, e.l1), m(e.v2, e.l2));
        recon = recon.max((a.0 + b.0 - xx).abs()).max((a.1 + b.1 - xy).abs()).max((a.2 + b.2 - yy).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst <= 0.02 && recon <= 1e-12 && secs < 5.0,
        format!(
            "worst relative entry error {:.3}%, reconstruction {recon:.1e} over 1e5 matrices, {secs:.2} s",
            worst * 100.0
        ),
    )
}

fn valley_following(runs: &[(Segmentation, LabelMask)]) -> Outcome {
    let params = TraceParams::default();
    let y0 = 30.0;
    let flat = RasterImage::from_fn(80, 60, |_, y| (y as f64 - y0).powi(2) * 0.01 + 0.5);
    let path =
        trace_dividing_curve(&hessian_field(&flat, 2.0), Point::new(10.0, y0), Point::new(70.0, y0), &params).unwrap();
    let deviation = path.pixels.iter().map(|px| (px.y as f64 - y0).abs()).fold(0.0, f64::max);

    // tilted valley with a bell-shaped cross-section, so its floor is where l2 peaks
    let (p, q) = (Point::new(10.0, 20.0), Point::new(70.0, 50.0));
    let dir = (q - p).normalized().unwrap();
    let dist = |x: f64, y: f64| (Point::new(x, y) - p).cross(dir);
    let tilted = RasterImage::from_fn(80, 70, |x, y| 0.8 - 0.3 * (-dist(x as f64, y as f64).powi(2) / 18.0).exp());
    let slanted = trace_dividing_curve(&hessian_field(&tilted, 2.0), p, q, &params).unwrap();
    let tilted_dev = slanted.pixels.iter().map(|px| dist(px.x as f64, px.y as f64).abs()).fold(0.0, f64::max);

    let (mut traced, mut fallback, mut sector_worst) = (0, 0, 0.0f64);
    for (seg, _) in runs {
        for path in &seg.paths {
            if path.fallback {
                fallback += 1;
            } else {
                traced += 1;
                sector_worst = sector_worst.max(max_sector_deviation(path));
            }
        }
    }
    let ok = !path.fallback
        && deviation <= 1.0
        && !slanted.fallback
        && tilted_dev <= 1.0
        && sector_worst <= params.sector_deg + 1e-9;
    (
        ok,
        format!(
            "valley deviation {deviation:.3} px, tilted {tilted_dev:.3} px; corpus paths: {traced} traced, {fallback} straight, widest step {sector_worst:.3} deg"
        ),
    )
}

fn corpus_segmentation(runs: &[(Segmentation, LabelMask)], secs: f64) -> Outcome {
    let correct = runs.iter().filter(|(seg, gt)| seg.labels.count() == gt.count()).count();
    let jaccard =
        runs.iter().map(|(seg, gt)| evaluate(&seg.labels, gt, 0.5).unwrap().jaccard).sum::<f64>() / runs.len() as f64;
    let rate = correct as f64 / runs.len() as f64;
    (
        rate >= 0.9 && jaccard >= 0.75 && secs < 60.0,
        format!("{correct}/{} correct counts, mean Jaccard {jaccard:.3}, {secs:.2} s", runs.len()),
    )
}

fn metric_identities(runs: &[(Segmentation, LabelMask)]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut identity_ok = true;
    let mut relabel_ok = true;
    for (i, (seg, gt)) in runs.iter().enumerate() {
        let same = evaluate(gt, gt, 0.5).unwrap();
        identity_ok &= same.jaccard == 1.0
            && same.precision == 1.0
            && same.recall == 1.0
            && same.f1 == 1.0
            && same.hausdorff == Some(0.0);
        // permute label ids of the prediction
        let n = seg.labels.count() as u32;
        let mut perm: Vec<u32> = (1..=n).collect();
        for j in (1..perm.len()).rev() {
            perm.swap(j, rng.random_range(0..=j));
        }
        let raw =
            seg.labels.labels().iter().map(|&l| if l == 0 { 0 } else { perm[l as usize - 1] + 7 * i as u32 }).collect();
        let relabelled = LabelMask::from_raw(seg.labels.width(), seg.labels.height(), raw).unwrap();
        let (a, b) = (evaluate(&seg.labels, gt, 0.5).unwrap(), evaluate(&relabelled, gt, 0.5).unwrap());
        relabel_ok &=
            a.jaccard == b.jaccard && a.precision == b.precision && a.recall == b.recall && a.hausdorff == b.hausdorff;
    }
    (
        identity_ok && relabel_ok,
        format!("self-comparison perfect: {identity_ok}, {} relabelings invariant: {relabel_ok}", runs.len()),
    )
}

fn determinism(runs: &[(Segmentation, LabelMask)]) -> Outcome {
    let cfg = PipelineConfig::default();
    let specs = chain_corpus(runs.len(), 2024);
    let masks_equal = specs.iter().zip(runs).all(|(spec, (seg, _))| {
        let (img, _) = generate_synthetic_clump(spec).unwrap();
        run_pipeline(&img, &cfg).unwrap().labels == seg.labels
    });

    let csv = || {
        let dir = tempfile::tempdir().unwrap();
        let (pred, gt) = (dir.path().join("pred"), dir.path().join("gt"));
        std::fs::create_dir_all(&pred).unwrap();
        std::fs::create_dir_all(&gt).unwrap();
        for (k, (seg, truth)) in runs.iter().enumerate().take(20) {
            seg.labels.save_png16(&pred.join(format!("{k:03}.png"))).unwrap();
            truth.save_png16(&gt.join(format!("{k:03}.png"))).unwrap();
        }
        aggregate_csv(&evaluate_dirs(&pred, &gt, 0.5).unwrap())
    };
    let csv_equal = csv() == csv();
    (masks_equal && csv_equal, format!("label masks identical: {masks_equal}, metric CSV identical: {csv_equal}"))
}

fn main() {
    let cfg = PipelineConfig::default();
    let start = Instant::now();
    let runs: Vec<(Segmentation, LabelMask)> = chain_corpus(100, 2024)
        .iter()
        .map(|spec| {
            let (img, gt) = generate_synthetic_clump(spec).unwrap();
            (run_pipeline(&img, &cfg).unwrap(), gt)
        })
        .collect();
    let corpus_secs = start.elapsed().as_secs_f64();

    let results = [
        ("curvature of analytic circles within 3%", curvature_of_circles()),
        ("curvature-weighted vote position", candidate_voting()),
        ("walking energy of a quarter circle", quarter_circle_energy()),
        ("pair score value and monotonicity", pair_score()),
        ("direct ellipse fit recovery", ellipse_recovery()),
        ("fit-quality score consistency", fit_quality_consistency(&runs)),
        ("Hessian and eigen-decomposition accuracy", hessian_accuracy()),
        ("valley tracing and search sector", valley_following(&runs)),
        ("synthetic clump corpus", corpus_segmentation(&runs, corpus_secs)),
        ("metric identities and relabeling", metric_identities(&runs)),
        ("determinism across runs", determinism(&runs)),
    ];
    let mut failed = 0;
    for (i, (name, (ok, detail))) in results.iter().enumerate() {
        println!("{} {:>2} {name}: {detail}", if *ok { "PASS" } else { "FAIL" }, i + 1);
        failed += usize::from(!ok);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
