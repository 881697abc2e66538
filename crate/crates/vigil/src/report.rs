//! Report shapes written by the CLI: alert streams, detection-evaluation
//! tables (JSON and CSV), and benchmark timings. Detection rows carry
//! TP/FP/FN/badbox counts with precision/recall/F1; accuracy only appears
//! in classification reports where true negatives exist.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vigil_core::evaluation::{f1_from_pr, MatchReport};
use vigil_core::model::{
    Alert, ClassRegistry, EvalConfig, FusionConfig, ObjectRegistry, RuleFired,
};

use crate::bench::TimingReport;

pub fn rule_name(rule: RuleFired) -> &'static str {
    match rule {
        RuleFired::None => "none",
        RuleFired::KeyObjectFire => "key_object_fire",
        RuleFired::KeyObjectGunshot => "key_object_gunshot",
        RuleFired::FpVetoFire => "fp_veto_fire",
        RuleFired::FpVetoGunshot => "fp_veto_gunshot",
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AlertRow {
    pub window: usize,
    pub final_class: String,
    pub original_class: String,
    pub rule: String,
    pub supporting_detections: usize,
}

impl AlertRow {
    pub fn from_alert(alert: &Alert, classes: &ClassRegistry) -> Self {
        Self {
            window: alert.window_id,
            final_class: classes.name(alert.final_class).to_string(),
            original_class: classes.name(alert.original_class).to_string(),
            rule: rule_name(alert.rule_fired).to_string(),
            supporting_detections: alert.supporting_detections.len(),
        }
    }
}

/// JSON report of one pipeline run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: FusionConfig,
    pub n_frames: usize,
    pub n_windows: usize,
    pub alerts: Vec<AlertRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalRow {
    pub class: String,
    pub detected: usize,
    pub total: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub badbox: usize,
    pub mean_iou: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// JSON/CSV report of a detection evaluation; the config echoes the
/// thresholds the run used.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub classes: Vec<EvalRow>,
    pub totals: EvalRow,
}

fn eval_row(class: String, m: &vigil_core::evaluation::ClassMatch) -> EvalRow {
    let precision = if m.true_positives + m.false_positives > 0 {
        m.true_positives as f64 / (m.true_positives + m.false_positives) as f64
    } else {
        0.0
    };
    let recall = if m.gt_count > 0 {
        m.true_positives as f64 / m.gt_count as f64
    } else {
        0.0
    };
    EvalRow {
        class,
        detected: m.detected,
        total: m.gt_count,
        true_positives: m.true_positives,
        false_positives: m.false_positives,
        false_negatives: m.false_negatives,
        badbox: m.badbox,
        mean_iou: m.mean_iou,
        precision,
        recall,
        f1: f1_from_pr(precision, recall),
    }
}

impl EvalReport {
    pub fn new(report: &MatchReport, cfg: EvalConfig, objects: &ObjectRegistry) -> Self {
        let classes = objects
            .classes()
            .zip(report.rows())
            .map(|(class, m)| eval_row(objects.name(class).to_string(), m))
            .collect();
        Self {
            config: cfg,
            classes,
            totals: eval_row("all".to_string(), &report.totals()),
        }
    }

    pub fn write_csv(&self, path: &Path) -> csv::Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        for row in self.classes.iter().chain([&self.totals]) {
            writer.serialize(row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Benchmark report: the stream's shape plus wall-clock timings.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BenchReport {
    pub mode: String,
    pub video_duration_s: f64,
    pub fps: f64,
    pub n_windows: usize,
    pub timing: TimingReport,
}

impl BenchReport {
    /// One-row human table with the timing columns reports are compared by.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(
            "Video Duration | Video FPS | Average Detection Time | Total Processing Time\n",
        );
        out.push_str(&format!(
            "{:.2}s | {} | {:.3}ms | {:.3}ms\n",
            self.video_duration_s,
            self.fps,
            self.timing.average_detection_time_ms,
            self.timing.total_processing_ms,
        ));
        out
    }
}

/// Writes pretty JSON to a file.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use vigil_core::evaluation::match_detections;
    use vigil_core::model::{BoundingBox, Detection};

    #[test]
    fn eval_report_rows_mirror_the_match_report() {
        let objects = ObjectRegistry::standard();
        let gt = vec![Detection {
            bbox: BoundingBox {
                x: 0.0,
                y: 0.0,
                w: 4.0,
                h: 4.0,
            },
            object_class: objects.object("flame").unwrap(),
            confidence: 1.0,
            frame_index: 0,
        }];
        let report = match_detections(&gt, &gt, &EvalConfig::default(), &objects).unwrap();
        let eval = EvalReport::new(&report, EvalConfig::default(), &objects);
        let flame = eval.classes.iter().find(|r| r.class == "flame").unwrap();
        assert_eq!(flame.true_positives, 1);
        assert_eq!(flame.precision, 1.0);
        assert_eq!(flame.f1, 1.0);
        assert_eq!(eval.totals.total, 1);
        assert_eq!(eval.config, EvalConfig::default());
    }

    #[test]
    fn csv_and_json_agree() {
        let dir = tempfile::tempdir().unwrap();
        let objects = ObjectRegistry::standard();
        let report = match_detections(&[], &[], &EvalConfig::default(), &objects).unwrap();
        let eval = EvalReport::new(&report, EvalConfig::default(), &objects);

        let csv_path = dir.path().join("eval.csv");
        eval.write_csv(&csv_path).unwrap();
        let mut reader = csv::Reader::from_path(&csv_path).unwrap();
        let rows: Vec<EvalRow> = reader.deserialize().collect::<Result<_, _>>().unwrap();
        assert_eq!(rows.len(), eval.classes.len() + 1);
        assert_eq!(&rows[..eval.classes.len()], &eval.classes[..]);

        let json_path = dir.path().join("eval.json");
        write_json(&json_path, &eval).unwrap();
        let back: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
        assert_eq!(
            back["classes"].as_array().unwrap().len(),
            eval.classes.len()
        );
    }

    #[test]
    fn bench_table_lists_the_four_columns() {
        let report = BenchReport {
            mode: "parallel".into(),
            video_duration_s: 20.0,
            fps: 30.0,
            n_windows: 30,
            timing: TimingReport::from_per_window(vec![1.0, 3.0], 4.5),
        };
        let table = report.table();
        assert!(table.contains("Video Duration"));
        assert!(table.contains("Video FPS"));
        assert!(table.contains("Average Detection Time"));
        assert!(table.contains("Total Processing Time"));
        assert!(table.contains("2.000ms"));
    }
}
