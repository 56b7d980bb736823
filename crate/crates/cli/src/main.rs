use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use clumpseg::config::PipelineConfig;
use clumpseg::image_prep::load_image;
use clumpseg::pipeline::{
    aggregate_csv, contour_csv, evaluate_dirs, overlay, paths_json, run_pipeline, OverlayOptions,
};
use clumpseg::synth::{chain_corpus, generate_synthetic_clump, SyntheticSpec};

/// Split clumped nuclei in fluorescence microscopy images.
#[derive(Debug, Parser)]
#[command(name = "clumpseg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Segment one image or every image in a directory.
    Segment(SegmentArgs),
    /// Render synthetic clumps with ground-truth labels.
    Synth(SynthArgs),
    /// Score predicted label masks against ground truth.
    Evaluate(EvaluateArgs),
    /// Print the default configuration as TOML.
    DefaultConfig,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    /// Image file, or a directory of PNG/TIFF images.
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write an overlay PNG with label outlines and dividing paths.
    #[arg(long)]
    overlay: bool,
    /// Write smoothed contours and curvature as CSV.
    #[arg(long)]
    debug_contours: bool,
    /// Mark candidate points on the overlay.
    #[arg(long)]
    debug_pairs: bool,
    /// Draw fitted ellipses on the overlay.
    #[arg(long)]
    debug_ellipses: bool,
    /// Write dividing paths as chain codes.
    #[arg(long)]
    debug_paths: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// TOML clump description.
    #[arg(long, required_unless_present = "corpus", conflicts_with = "corpus")]
    spec: Option<PathBuf>,
    /// Generate this many chain clumps instead of reading a description.
    #[arg(long)]
    corpus: Option<usize>,
    /// Noise seed; overrides the one in the description.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Aggregate CSV; per-image reports go next to it as JSON.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    iou_min: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Marks errors caused by bad arguments or input files, which exit with 1
/// rather than 2.
#[derive(Debug)]
struct BadInput;

impl std::fmt::Display for BadInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("invalid input")
    }
}

impl std::error::Error for BadInput {}

fn bad_input(msg: impl std::fmt::Display + Send + Sync + 'static) -> anyhow::Error {
    anyhow::Error::new(BadInput).context(msg)
}

fn load_config(path: Option<&Path>) -> anyhow::Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p).map_err(bad_input),
        None => Ok(PipelineConfig::default()),
    }
}

fn is_image(p: &Path) -> bool {
    p.extension()
        .and_then(|x| x.to_str())
        .is_some_and(|x| ["png", "tif", "tiff"].contains(&x.to_ascii_lowercase().as_str()))
}

fn inputs(path: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    if !path.is_dir() {
        return Err(bad_input(format!("no such input: {}", path.display())));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .with_context(|| format!("reading {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    files.sort();
    Ok(files)
}

fn segment_one(file: &Path, cfg: &PipelineConfig, args: &SegmentArgs) -> anyhow::Result<usize> {
    let stem = file.file_stem().and_then(|s| s.to_str()).context("input file has no name")?;
    let img = load_image(file)?;
    let seg = run_pipeline(&img, cfg)?;
    seg.labels.save_png16(&args.out.join("labels").join(format!("{stem}.png")))?;
    let diagnostics = serde_json::to_string_pretty(&seg.diagnostics)?;
    std::fs::write(args.out.join(format!("{stem}_diagnostics.json")), diagnostics)?;
    if args.debug_contours {
        std::fs::write(args.out.join(format!("{stem}_contours.csv")), contour_csv(&seg.diagnostics))?;
    }
    if args.debug_paths {
        std::fs::write(args.out.join(format!("{stem}_paths.json")), paths_json(&seg.paths))?;
    }
    if args.overlay || args.debug_pairs || args.debug_ellipses {
        let opts = OverlayOptions { candidates: args.debug_pairs, ellipses: args.debug_ellipses, paths: true };
        let path = args.out.join(format!("{stem}_overlay.png"));
        overlay(&img, &seg, opts).save(&path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(seg.labels.count())
}

fn segment(args: SegmentArgs) -> anyhow::Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let files = inputs(&args.input)?;
    if files.is_empty() {
        bail!("no images found in {}", args.input.display());
    }
    std::fs::create_dir_all(args.out.join("labels")).with_context(|| format!("creating {}", args.out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.workers).build()?;
    let results: Vec<_> = pool.install(|| files.par_iter().map(|f| segment_one(f, &cfg, &args)).collect());
    let mut failed = 0;
    for (file, r) in files.iter().zip(results) {
        match r {
            Ok(n) => println!("{}: {n} nuclei", file.display()),
            Err(e) => {
                eprintln!("{}: {e:#}", file.display());
                failed += 1;
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} images failed", files.len());
    }
    Ok(())
}

fn write_pair(out: &Path, name: &str, spec: &SyntheticSpec) -> anyhow::Result<()> {
    let (img, gt) = generate_synthetic_clump(spec)?;
    img.save_png16(&out.join("images").join(format!("{name}.png")))?;
    gt.save_png16(&out.join("gt").join(format!("{name}.png")))?;
    Ok(())
}

fn synth(args: SynthArgs) -> anyhow::Result<()> {
    let specs: Vec<(String, SyntheticSpec)> = match (&args.spec, args.corpus) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut spec: SyntheticSpec =
                toml::from_str(&text).map_err(|e| bad_input(format!("{}: {e}", path.display())))?;
            if let Some(seed) = args.seed {
                spec.seed = seed;
            }
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("clump").to_string();
            vec![(name, spec)]
        }
        (None, Some(n)) => chain_corpus(n, args.seed.unwrap_or(0))
            .into_iter()
            .enumerate()
            .map(|(i, s)| (format!("clump_{i:04}"), s))
            .collect(),
        (None, None) => unreachable!("clap requires one of --spec and --corpus"),
    };
    for dir in ["images", "gt"] {
        std::fs::create_dir_all(args.out.join(dir)).with_context(|| format!("creating {}", args.out.display()))?;
    }
    for (name, spec) in &specs {
        write_pair(&args.out, name, spec).with_context(|| name.clone())?;
    }
    println!("wrote {} synthetic images to {}", specs.len(), args.out.display());
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> anyhow::Result<()> {
    let iou_min = match args.iou_min {
        Some(v) if !(0.0..=1.0).contains(&v) => return Err(bad_input("--iou-min must lie in [0, 1]")),
        Some(v) => v,
        None => load_config(args.config.as_deref())?.iou_min,
    };
    let report = evaluate_dirs(&args.pred, &args.gt, iou_min)?;
    for note in &report.unpaired {
        eprintln!("warning: {note}");
    }
    std::fs::write(&args.out, aggregate_csv(&report)).with_context(|| format!("writing {}", args.out.display()))?;
    let json = args.out.with_extension("json");
    std::fs::write(&json, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing {}", json.display()))?;
    println!("scored {} images", report.images.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Segment(a) => segment(a),
        Command::Synth(a) => synth(a),
        Command::Evaluate(a) => evaluate(a),
        Command::DefaultConfig => {
            print!("{}", PipelineConfig::default().to_toml());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let causes: Vec<String> = e.chain().filter(|c| !c.is::<BadInput>()).map(|c| c.to_string()).collect();
            eprintln!("error: {}", causes.join(": "));
            if e.chain().any(|c| c.is::<BadInput>()) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
