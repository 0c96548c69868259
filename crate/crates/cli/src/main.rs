use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::bail;
use clap::{Args, Parser, Subcommand};

use actdet::evaluate::EvalReport;
use actdet::io::{self, Manifest};
use actdet::pipeline::{self, PipelineConfig};
use actdet::plot::{render_csv, render_svg, PlotSeries};
use actdet::segment::propose;
use actdet::synth::{self, SynthConfig};

#[derive(Parser)]
#[command(
    name = "actdet",
    version,
    about = "Temporal activity detection in untrimmed videos"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus.
    Synth(SynthArgs),
    /// Train the video-level SVMs, meta SVM and frame forest.
    Train(PipelineArgs),
    /// Write fused class scores and frame score tracks.
    Score(PipelineArgs),
    /// Segment score tracks into proposals (JSON lines).
    Propose(ProposeArgs),
    /// Score, propose and assemble detections into a results file.
    Detect(PipelineArgs),
    /// Untrimmed classification metrics: top-1, top-3, mAP.
    EvalCls(EvalClsArgs),
    /// Detection mAP at each TIoU threshold.
    EvalDet(EvalDetArgs),
    /// Render ground truth, frame scores and proposals of one video.
    Plot(PlotArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Synthetic corpus config (JSON); defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the single saturated two-instance video instead of a corpus.
    #[arg(long)]
    saturated: bool,
}

#[derive(Args, Clone, Default)]
struct SegmentFlags {
    /// Switch penalty; overrides --lambda and --alpha.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Pipeline config (JSON). Without it, paths follow the `synth` layout
    /// under --data.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    data: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    topk: Option<usize>,
    /// Comma-separated TIoU thresholds.
    #[arg(long, value_delimiter = ',')]
    tiou: Option<Vec<f64>>,
    #[command(flatten)]
    segment: SegmentFlags,
}

#[derive(Args)]
struct ProposeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    data: PathBuf,
    /// Track manifest; defaults to the tracks written by `score`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output JSON lines file; defaults to proposals.jsonl in the results dir.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    segment: SegmentFlags,
}

#[derive(Args)]
struct EvalClsArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    data: PathBuf,
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Fused score file written by `score` or `detect`.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Ground-truth subset to evaluate, or "all".
    #[arg(long)]
    subset: Option<String>,
    /// Report JSON; defaults to eval_cls.json in the results dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalDetArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    data: PathBuf,
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    results: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    tiou: Option<Vec<f64>>,
    #[arg(long)]
    subset: Option<String>,
    /// Report JSON; defaults to eval_det.json in the results dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    data: PathBuf,
    #[arg(long)]
    video: String,
    /// SVG path; the CSV sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Track manifest; defaults to the tracks written by `score`.
    #[arg(long)]
    tracks: Option<PathBuf>,
    #[command(flatten)]
    segment: SegmentFlags,
}

fn base_config(config: Option<&Path>, data: &Path) -> actdet::Result<PipelineConfig> {
    match config {
        Some(path) => PipelineConfig::load(path),
        None => Ok(PipelineConfig::for_data_dir(data)),
    }
}

fn apply_segment_flags(cfg: &mut PipelineConfig, flags: &SegmentFlags) {
    if let Some(l) = flags.lambda {
        cfg.segmenter.lambda = l;
    }
    if let Some(a) = flags.alpha {
        cfg.segmenter.alpha = a;
    }
    if let Some(g) = flags.gamma {
        cfg.segmenter.lambda = 1.0;
        cfg.segmenter.alpha = g;
    }
}

fn pipeline_config(args: &PipelineArgs) -> actdet::Result<PipelineConfig> {
    let mut cfg = base_config(args.config.as_deref(), &args.data)?;
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if let Some(k) = args.topk {
        cfg.topk = k;
    }
    if let Some(t) = &args.tiou {
        cfg.tiou = t.clone();
    }
    apply_segment_flags(&mut cfg, &args.segment);
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_synth(args: &SynthArgs) -> anyhow::Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = io::read_to_string(path)?;
            serde_json::from_str::<SynthConfig>(&text).map_err(|e| actdet::Error::Parse {
                path: path.clone(),
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?
        }
        None => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let corpus = if args.saturated {
        synth::saturated_video(&cfg)?
    } else {
        synth::generate_corpus(&cfg)?
    };
    synth::write_corpus(&corpus, &args.out)?;
    println!(
        "wrote {} videos, {} classes to {}",
        corpus.gt.videos.len(),
        corpus.gt.labels.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: &PipelineArgs) -> anyhow::Result<()> {
    let cfg = pipeline_config(args)?;
    let summary = pipeline::train(&cfg)?;
    println!("{:<10} {:>8} {:>10}", "model", "samples", "accuracy");
    for a in &summary.accuracies {
        println!(
            "{:<10} {:>8} {:>9.2}%",
            a.model,
            a.samples,
            100.0 * a.accuracy
        );
    }
    for f in &summary.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_score(args: &PipelineArgs) -> anyhow::Result<()> {
    let cfg = pipeline_config(args)?;
    let scores = pipeline::score(&cfg)?;
    println!(
        "scored {} videos; wrote {}",
        scores.videos.len(),
        cfg.results_dir.join(pipeline::SCORES_FILE).display()
    );
    Ok(())
}

fn cmd_propose(args: &ProposeArgs) -> anyhow::Result<()> {
    let mut cfg = base_config(args.config.as_deref(), &args.data)?;
    apply_segment_flags(&mut cfg, &args.segment);
    let manifest = args
        .manifest
        .clone()
        .unwrap_or_else(|| cfg.results_dir.join(pipeline::TRACKS_MANIFEST));
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| cfg.results_dir.join(pipeline::PROPOSALS_FILE));
    let proposals = pipeline::propose_manifest(&manifest, &cfg.segmenter, &out)?;
    let total: usize = proposals.values().map(Vec::len).sum();
    println!(
        "{total} proposals for {} videos (gamma = {}); wrote {}",
        proposals.len(),
        cfg.segmenter.gamma(),
        out.display()
    );
    Ok(())
}

fn cmd_detect(args: &PipelineArgs) -> anyhow::Result<()> {
    let cfg = pipeline_config(args)?;
    let out = pipeline::detect(&cfg)?;
    let empty = out.per_video.values().filter(|&&n| n == 0).count();
    println!(
        "{} detections for {} videos ({empty} without detections); wrote {}",
        out.detections.len(),
        out.per_video.len(),
        cfg.results_dir.join(pipeline::RESULTS_FILE).display()
    );
    Ok(())
}

fn cmd_eval_cls(args: &EvalClsArgs) -> anyhow::Result<()> {
    let cfg = base_config(args.config.as_deref(), &args.data)?;
    let gt_path = args.gt.clone().unwrap_or(cfg.gt.clone());
    let scores_path = args
        .scores
        .clone()
        .unwrap_or_else(|| cfg.results_dir.join(pipeline::SCORES_FILE));
    let subset = args.subset.clone().unwrap_or(cfg.eval_subset.clone());
    let gt = io::load_ground_truth(&gt_path)?;
    check_subset(&gt, &subset, &gt_path)?;
    let (labels, fused) = pipeline::load_scores(&scores_path)?;
    let report = pipeline::evaluate_classification(&gt, &labels, &fused, &subset)?;
    print!(
        "{}",
        pipeline::format_classification_table(&report, &subset)
    );
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| cfg.results_dir.join(pipeline::EVAL_CLS_FILE));
    pipeline::save_report(
        &EvalReport {
            classification: Some(report),
            detection: None,
        },
        &out,
    )?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn cmd_eval_det(args: &EvalDetArgs) -> anyhow::Result<()> {
    let mut cfg = base_config(args.config.as_deref(), &args.data)?;
    if let Some(t) = &args.tiou {
        cfg.tiou = t.clone();
    }
    cfg.validate()?;
    let gt_path = args.gt.clone().unwrap_or(cfg.gt.clone());
    let results_path = args
        .results
        .clone()
        .unwrap_or_else(|| cfg.results_dir.join(pipeline::RESULTS_FILE));
    let subset = args.subset.clone().unwrap_or(cfg.eval_subset.clone());
    let gt = io::load_ground_truth(&gt_path)?;
    check_subset(&gt, &subset, &gt_path)?;
    let detections = pipeline::load_results(&results_path, &gt.labels)?;
    let eval = pipeline::evaluate_detection(&gt, &detections, &cfg.tiou, &subset)?;
    if !eval.missing_videos.is_empty() {
        eprintln!(
            "warning: {} evaluated videos have no detections (counted as misses), e.g. {}",
            eval.missing_videos.len(),
            eval.missing_videos[0]
        );
    }
    if eval.ignored_detections > 0 {
        eprintln!(
            "warning: ignored {} detections for videos outside subset {subset:?}",
            eval.ignored_detections
        );
    }
    print!(
        "{}",
        pipeline::format_detection_table(&eval.report, &subset)
    );
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| cfg.results_dir.join(pipeline::EVAL_DET_FILE));
    pipeline::save_report(
        &EvalReport {
            classification: None,
            detection: Some(eval.report),
        },
        &out,
    )?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn check_subset(gt: &actdet::GroundTruth, subset: &str, path: &Path) -> actdet::Result<()> {
    if gt.subset(subset).videos.is_empty() {
        return Err(actdet::Error::InvalidArgument(format!(
            "{}: no videos in subset {subset:?} (use --subset all to evaluate every video)",
            path.display()
        )));
    }
    Ok(())
}

fn cmd_plot(args: &PlotArgs) -> anyhow::Result<()> {
    let mut cfg = base_config(args.config.as_deref(), &args.data)?;
    apply_segment_flags(&mut cfg, &args.segment);
    cfg.segmenter.validate()?;
    let gt_path = args.gt.clone().unwrap_or(cfg.gt.clone());
    let tracks_path = args
        .tracks
        .clone()
        .unwrap_or_else(|| cfg.results_dir.join(pipeline::TRACKS_MANIFEST));
    let gt = io::load_ground_truth(&gt_path)?;
    let manifest = Manifest::load(&tracks_path)?;
    if !manifest.entries.contains_key(&args.video) {
        bail!(actdet::Error::UnknownVideo(args.video.clone()));
    }
    let track = manifest.load_track(&args.video)?;
    let gt_segments: Vec<_> = gt
        .videos
        .get(&args.video)
        .map(|v| v.annotations.iter().map(|a| a.segment).collect())
        .unwrap_or_default();
    let proposals = propose(&track, &cfg.segmenter)?;
    let series = PlotSeries::new(&track, &gt_segments, &proposals);
    io::write_atomic(&args.out, render_svg(&series).as_bytes())?;
    let csv_path = args.out.with_extension("csv");
    io::write_atomic(&csv_path, render_csv(&series).as_bytes())?;
    println!(
        "{}: {} proposals; wrote {} and {}",
        args.video,
        proposals.len(),
        args.out.display(),
        csv_path.display()
    );
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Score(a) => cmd_score(a),
        Command::Propose(a) => cmd_propose(a),
        Command::Detect(a) => cmd_detect(a),
        Command::EvalCls(a) => cmd_eval_cls(a),
        Command::EvalDet(a) => cmd_eval_det(a),
        Command::Plot(a) => cmd_plot(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<actdet::Error>() {
        Some(e) if e.is_input_error() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
