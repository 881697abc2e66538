//! Command-line surface: `run`, `eval`, `bench`, `explain`, and
//! `backend-serve`. Exit codes: 0 success, 1 data error, 2 usage error.

use std::io::{stdin, stdout, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use vigil::bench::{bench, SleepingClassifier, SleepingDetector, TimingReport};
use vigil::config::{ClassifierChoice, DetectorChoice, RunConfig};
use vigil::jsonl;
use vigil::pnm;
use vigil::proc;
use vigil::report::{self, AlertRow, BenchReport, EvalReport, RunReport};

use vigil_core::backends::{
    Classifier, Detector, NullDetector, ReplayClassifier, ReplayDetector, ReplayScript,
};
use vigil_core::explain::{contours, normalize, overlay, Heatmap};
use vigil_core::fusion::{binary_alerts, FusionEngine, KeyObjectDictionary};
use vigil_core::model::{
    Alert, ClassMode, ClassRegistry, EvalConfig, ObjectRegistry, PipelineMode, RuleVariant,
};
use vigil_core::scenario::{generate_scenario, window_labels, Scenario, ScenarioSpec};
use vigil_core::windowing::generate;

#[derive(Parser)]
#[command(
    name = "vigil",
    version,
    about = "Rule-fused spatio-temporal anomaly detection over frame streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the serial or parallel pipeline over a configured scenario or
    /// replay inputs
    Run(RunArgs),
    /// Score predicted detections against ground-truth boxes
    Eval(EvalArgs),
    /// Time a configured pipeline window by window
    Bench(BenchArgs),
    /// Render heatmap overlays and contour outlines for a frame directory
    Explain(ExplainArgs),
    /// Answer detector/classifier requests from stdin using a replay script
    BackendServe(ServeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration file (key = value lines)
    #[arg(long)]
    config: PathBuf,
    /// Override: serial | parallel
    #[arg(long)]
    mode: Option<String>,
    /// Override: fn | fp (reduce false negatives / false positives)
    #[arg(long)]
    rule: Option<String>,
    /// Collapse alerts onto the normal/abnormal taxonomy
    #[arg(long)]
    binary: bool,
    /// Override the confidence threshold (0.55 and 55 mean the same)
    #[arg(long)]
    conf: Option<f64>,
    /// Override the NMS overlap threshold
    #[arg(long)]
    nms_overlap: Option<f64>,
    /// Override how many frames the detector skips in parallel mode
    #[arg(long)]
    frame_skip: Option<usize>,
    /// Override the sequence length
    #[arg(long)]
    seq_len: Option<usize>,
    /// Override the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Write a JSON run report here
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the scenario frames as PPM files into this directory
    #[arg(long)]
    emit_frames: Option<PathBuf>,
    /// Write the scenario ground-truth detections as JSONL here
    #[arg(long)]
    emit_gt: Option<PathBuf>,
    /// Write coarse ground-truth attention maps as JSONL here
    #[arg(long)]
    emit_heatmaps: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth detections (JSONL; confidences are ignored)
    #[arg(long)]
    gt: PathBuf,
    /// Predicted detections (JSONL)
    #[arg(long)]
    pred: PathBuf,
    /// Confidence threshold for the NMS pass
    #[arg(long, default_value_t = 0.55)]
    conf: f64,
    /// Overlap threshold for the NMS pass
    #[arg(long, default_value_t = 0.7)]
    nms_overlap: f64,
    /// Minimum IoU for a match to count as a true positive
    #[arg(long, default_value_t = 0.0)]
    iou_min: f64,
    /// Maximum IoU for a match to count as a true positive
    #[arg(long, default_value_t = 1.0)]
    iou_max: f64,
    /// Minimum predicted box side in pixels
    #[arg(long, default_value_t = 0.0)]
    min_box: f64,
    /// Write the report as JSON here
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the report as CSV here
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Run configuration file; detector_delay_ms / classifier_delay_ms add
    /// mock latency
    #[arg(long)]
    config: PathBuf,
    /// Write the timing report as JSON here
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ExplainArgs {
    /// Directory of .pgm/.ppm frames, ordered by file name
    #[arg(long)]
    frames: PathBuf,
    /// Heatmap series (JSONL), one record per frame
    #[arg(long)]
    heatmaps: PathBuf,
    /// Overlay opacity in `[0,1]`
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Contour level, strictly inside (0,1)
    #[arg(long, default_value_t = 0.5)]
    level: f64,
    /// Output directory for overlays and contours.json
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// Replay script with detection and/or verdict records
    #[arg(long)]
    replay: PathBuf,
}

enum AppError {
    Usage(String),
    Data(String),
}

impl AppError {
    fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }
}

macro_rules! data_error_from {
    ($($ty:ty),* $(,)?) => {$(
        impl From<$ty> for AppError {
            fn from(e: $ty) -> Self {
                AppError::Data(e.to_string())
            }
        }
    )*};
}

data_error_from!(
    std::io::Error,
    vigil::jsonl::JsonlError,
    vigil::pnm::PnmError,
    vigil::config::ConfigError,
    vigil_core::fusion::FusionError,
    vigil_core::model::ModelError,
    vigil_core::windowing::WindowError,
    vigil_core::scenario::ScenarioError,
    vigil_core::evaluation::EvalError,
    vigil_core::explain::ExplainError,
    csv::Error,
);

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Explain(args) => cmd_explain(args),
        Command::BackendServe(args) => cmd_backend_serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(AppError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn ratio(v: f64) -> f64 {
    if v > 1.0 {
        v / 100.0
    } else {
        v
    }
}

/// Everything a configured run needs, assembled from one config file.
struct Pipeline {
    run: RunConfig,
    classes: ClassRegistry,
    objects: ObjectRegistry,
    engine: FusionEngine,
    scenario: Scenario,
    windows: Vec<vigil_core::model::SequenceWindow>,
    detector: Box<dyn Detector>,
    classifier: Box<dyn Classifier>,
}

fn load_pipeline(config_path: &Path, overrides: Option<&RunArgs>) -> Result<Pipeline, AppError> {
    let classes = ClassRegistry::standard();
    let objects = ObjectRegistry::standard();
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| AppError::Data(format!("{}: {e}", config_path.display())))?;
    let mut run = RunConfig::parse(&text, &classes, &objects)?;

    if let Some(args) = overrides {
        if let Some(mode) = &args.mode {
            run.fusion.mode = match mode.as_str() {
                "serial" => PipelineMode::Serial,
                "parallel" => PipelineMode::Parallel,
                other => return Err(AppError::usage(format!("unknown mode `{other}`"))),
            };
        }
        if let Some(rule) = &args.rule {
            run.fusion.rule_variant = match rule.as_str() {
                "fn" => RuleVariant::ReduceFalseNegatives,
                "fp" => RuleVariant::ReduceFalsePositives,
                other => return Err(AppError::usage(format!("unknown rule `{other}`"))),
            };
        }
        if args.binary {
            run.fusion.class_mode = ClassMode::Binary;
        }
        if let Some(conf) = args.conf {
            run.fusion.confidence_threshold = ratio(conf);
        }
        if let Some(overlap) = args.nms_overlap {
            run.fusion.nms_overlap = ratio(overlap);
        }
        if let Some(skip) = args.frame_skip {
            run.fusion.frame_skip = skip;
        }
        if let Some(len) = args.seq_len {
            run.fusion.sequence_length = len;
        }
        if let Some(seed) = args.seed {
            run.scenario.seed = seed;
        }
    }

    let scenario = generate_scenario(&run.scenario, &objects, &classes)?;
    let windows = generate(&run.window_spec(), run.scenario.n_frames)?;

    let detector: Box<dyn Detector> = match &run.detector {
        DetectorChoice::ScenarioGt => Box::new(ReplayDetector::from_detections(
            scenario.gt_detections.iter().cloned(),
        )),
        DetectorChoice::Disabled => Box::new(NullDetector),
        DetectorChoice::Replay(path) => {
            let script = jsonl::load_replay(path, &objects, &classes)?;
            Box::new(ReplayDetector::new(Arc::new(script)))
        }
    };
    let detector: Box<dyn Detector> = if run.detector_delay_ms > 0 {
        Box::new(SleepingDetector::new(
            detector,
            Duration::from_millis(run.detector_delay_ms),
        ))
    } else {
        detector
    };

    let classifier: Box<dyn Classifier> = match &run.classifier {
        ClassifierChoice::WindowLabels => {
            let labels = window_labels(&run.scenario.events, &windows, &classes);
            let script = ReplayScript::from_window_labels(&labels, &classes)?;
            Box::new(ReplayClassifier::new(Arc::new(script), classes.clone()))
        }
        ClassifierChoice::AlwaysNormal => Box::new(ReplayClassifier::new(
            Arc::new(ReplayScript::new()),
            classes.clone(),
        )),
        ClassifierChoice::Replay(path) => {
            let script = jsonl::load_replay(path, &objects, &classes)?;
            Box::new(ReplayClassifier::new(Arc::new(script), classes.clone()))
        }
    };
    let classifier: Box<dyn Classifier> = if run.classifier_delay_ms > 0 {
        Box::new(SleepingClassifier::new(
            classifier,
            Duration::from_millis(run.classifier_delay_ms),
        ))
    } else {
        classifier
    };

    let dictionary = KeyObjectDictionary::standard(&objects, &classes)?;
    let engine = FusionEngine::new(
        run.fusion.clone(),
        dictionary,
        classes.clone(),
        objects.clone(),
    )?;

    Ok(Pipeline {
        run,
        classes,
        objects,
        engine,
        scenario,
        windows,
        detector,
        classifier,
    })
}

impl Pipeline {
    fn run_window(
        &self,
        window: &vigil_core::model::SequenceWindow,
    ) -> Result<Alert, vigil_core::fusion::FusionError> {
        match self.run.fusion.mode {
            PipelineMode::Parallel => self.engine.run_parallel_window(
                &self.scenario.frames,
                window,
                self.detector.as_ref(),
                self.classifier.as_ref(),
            ),
            PipelineMode::Serial => self.engine.run_serial_window(
                &self.scenario.frames,
                window,
                self.detector.as_ref(),
                self.classifier.as_ref(),
                self.run.serial_preprocess,
            ),
        }
    }

    /// Alerts in window order, collapsed to binary when configured, plus
    /// the registry naming them.
    fn finish_alerts(&self, alerts: Vec<Alert>) -> Result<(Vec<Alert>, ClassRegistry), AppError> {
        if self.run.fusion.class_mode == ClassMode::Binary {
            let binary = ClassRegistry::binary();
            let collapsed = binary_alerts(alerts, &self.run.fusion, &self.classes, &binary)?;
            Ok((collapsed, binary))
        } else {
            Ok((alerts, self.classes.clone()))
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<(), AppError> {
    let pipeline = load_pipeline(&args.config, Some(&args))?;
    let alerts: Vec<Alert> = pipeline
        .windows
        .iter()
        .map(|w| pipeline.run_window(w))
        .collect::<Result<_, _>>()?;
    let (alerts, naming) = pipeline.finish_alerts(alerts)?;

    for alert in &alerts {
        let final_name = naming.name(alert.final_class);
        if alert.rule_fired == vigil_core::model::RuleFired::None {
            println!("window {:>4}: {final_name}", alert.window_id);
        } else {
            println!(
                "window {:>4}: {final_name} (was {}, rule {})",
                alert.window_id,
                naming.name(alert.original_class),
                report::rule_name(alert.rule_fired),
            );
        }
    }

    if let Some(path) = &args.report {
        let run_report = RunReport {
            config: pipeline.run.fusion.clone(),
            n_frames: pipeline.run.scenario.n_frames,
            n_windows: pipeline.windows.len(),
            alerts: alerts
                .iter()
                .map(|a| AlertRow::from_alert(a, &naming))
                .collect(),
        };
        report::write_json(path, &run_report)?;
    }
    if let Some(dir) = &args.emit_frames {
        std::fs::create_dir_all(dir)?;
        for frame in &pipeline.scenario.frames {
            pnm::write_frame(&dir.join(format!("frame_{:05}.ppm", frame.index)), frame)?;
        }
    }
    if let Some(path) = &args.emit_gt {
        jsonl::write_detections(path, &pipeline.scenario.gt_detections, &pipeline.objects)?;
    }
    if let Some(path) = &args.emit_heatmaps {
        let maps = gt_heatmaps(&pipeline.scenario, &pipeline.run.scenario);
        jsonl::write_heatmaps(path, &maps)?;
    }
    Ok(())
}

/// Coarse attention proxy from the ground truth: one cell per 8x8 pixel
/// block, the detection confidence where a box covers the cell center.
fn gt_heatmaps(scenario: &Scenario, spec: &ScenarioSpec) -> Vec<(usize, Heatmap)> {
    let w = spec.width.div_ceil(8).max(1);
    let h = spec.height.div_ceil(8).max(1);
    scenario
        .frames
        .iter()
        .map(|frame| {
            let mut values = vec![0.0f64; (w * h) as usize];
            for det in scenario
                .gt_detections
                .iter()
                .filter(|d| d.frame_index == frame.index)
            {
                for cy in 0..h {
                    for cx in 0..w {
                        let px = cx as f64 * 8.0 + 4.0;
                        let py = cy as f64 * 8.0 + 4.0;
                        if px >= det.bbox.x
                            && px < det.bbox.right()
                            && py >= det.bbox.y
                            && py < det.bbox.bottom()
                        {
                            values[(cy * w + cx) as usize] = det.confidence;
                        }
                    }
                }
            }
            (
                frame.index,
                Heatmap::new(w, h, values).expect("cells sized to shape"),
            )
        })
        .collect()
}

fn cmd_eval(args: EvalArgs) -> Result<(), AppError> {
    let cfg = EvalConfig {
        confidence_threshold: ratio(args.conf),
        nms_overlap: ratio(args.nms_overlap),
        iou_min: ratio(args.iou_min),
        iou_max: ratio(args.iou_max),
        min_box_size: args.min_box,
    };
    cfg.validate().map_err(|e| AppError::usage(e.to_string()))?;

    let classes = ClassRegistry::standard();
    let objects = ObjectRegistry::standard();
    let gt_script = jsonl::load_replay(&args.gt, &objects, &classes)?;
    let pred_script = jsonl::load_replay(&args.pred, &objects, &classes)?;
    let gt: Vec<_> = gt_script.all_detections().cloned().collect();
    let preds: Vec<_> = pred_script.all_detections().cloned().collect();

    let report = vigil_core::evaluation::match_detections(&gt, &preds, &cfg, &objects)?;
    let eval = EvalReport::new(&report, cfg, &objects);

    println!(
        "class | detected | total | tp | fp | fn | badbox | mean_iou | precision | recall | f1"
    );
    for row in eval.classes.iter().chain([&eval.totals]) {
        println!(
            "{} | {} | {} | {} | {} | {} | {} | {:.4} | {:.4} | {:.4} | {:.4}",
            row.class,
            row.detected,
            row.total,
            row.true_positives,
            row.false_positives,
            row.false_negatives,
            row.badbox,
            row.mean_iou,
            row.precision,
            row.recall,
            row.f1,
        );
    }

    if let Some(path) = &args.json {
        report::write_json(path, &eval)?;
    }
    if let Some(path) = &args.csv {
        eval.write_csv(path)?;
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), AppError> {
    let pipeline = load_pipeline(&args.config, None)?;
    let (_, timing): (Vec<Alert>, TimingReport) =
        bench(&pipeline.windows, |w| pipeline.run_window(w))?;
    let bench_report = BenchReport {
        mode: match pipeline.run.fusion.mode {
            PipelineMode::Parallel => "parallel".into(),
            PipelineMode::Serial => "serial".into(),
        },
        video_duration_s: pipeline.run.scenario.n_frames as f64 / pipeline.run.fps,
        fps: pipeline.run.fps,
        n_windows: pipeline.windows.len(),
        timing,
    };
    print!("{}", bench_report.table());
    if let Some(path) = &args.report {
        report::write_json(path, &bench_report)?;
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct ContourRow {
    frame: usize,
    level: f64,
    points: Vec<(f64, f64)>,
}

fn cmd_explain(args: ExplainArgs) -> Result<(), AppError> {
    if !(0.0..=1.0).contains(&args.alpha) || !args.alpha.is_finite() {
        return Err(AppError::usage("alpha must lie in [0,1]"));
    }
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(AppError::usage("level must lie strictly inside (0,1)"));
    }

    let frames = pnm::read_frame_dir(&args.frames)?;
    let maps = jsonl::load_heatmaps(&args.heatmaps)?;
    if frames.len() != maps.len() {
        return Err(AppError::Data(format!(
            "{} frames but {} heatmaps",
            frames.len(),
            maps.len()
        )));
    }

    std::fs::create_dir_all(&args.out)?;
    let mut contour_rows = Vec::new();
    for (frame, (map_frame, map)) in frames.iter().zip(&maps) {
        let (normalized, _) = normalize(map);
        let rendered = overlay(frame, &normalized, args.alpha)?;
        let outlines = contours(&normalized, args.level)?;
        pnm::write_frame(
            &args.out.join(format!("overlay_{:05}.ppm", frame.index)),
            &rendered,
        )?;
        for c in outlines {
            contour_rows.push(ContourRow {
                frame: *map_frame,
                level: c.level,
                points: c.points,
            });
        }
    }
    report::write_json(&args.out.join("contours.json"), &contour_rows)?;
    println!(
        "wrote {} overlays and {} contours to {}",
        frames.len(),
        contour_rows.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_backend_serve(args: ServeArgs) -> Result<(), AppError> {
    let classes = ClassRegistry::standard();
    let objects = ObjectRegistry::standard();
    let script = Arc::new(jsonl::load_replay(&args.replay, &objects, &classes)?);
    let detector = ReplayDetector::new(script.clone());
    let classifier = ReplayClassifier::new(script, classes.clone());
    proc::serve(
        BufReader::new(stdin().lock()),
        stdout().lock(),
        &detector,
        &classifier,
        &objects,
        &classes,
    )?;
    Ok(())
}
