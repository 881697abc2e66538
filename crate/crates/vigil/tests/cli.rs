//! End-to-end tests of the `vigil` binary: exit codes, report files, and
//! byte-level output contracts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vigil() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vigil"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run_ok(cmd: &mut Command) -> Output {
    let output = cmd.output().expect("spawn vigil");
    assert!(
        output.status.success(),
        "expected success, got {:?}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let output = vigil().arg("run").output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.to_lowercase().contains("usage"), "{stderr}");
}

#[test]
fn nonexistent_config_file_is_a_data_error() {
    let output = vigil()
        .args(["run", "--config", "/nonexistent/vigil.conf"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn parallel_run_reports_one_alert_per_window() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    let output = run_ok(vigil().args([
        "run",
        "--config",
        config("parallel.conf").to_str().unwrap(),
        "--report",
        report_path.to_str().unwrap(),
    ]));

    let stdout = String::from_utf8_lossy(&output.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 30, "600 frames / 20 per window");

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let alerts = report["alerts"].as_array().unwrap();
    assert_eq!(alerts.len(), 30);
    for (i, alert) in alerts.iter().enumerate() {
        assert_eq!(alert["window"].as_u64().unwrap() as usize, i);
    }
    // the fire event spans frames 110..290: windows 6..14 are covered at
    // least half and must come out fire, window 0 stays normal
    assert_eq!(alerts[0]["final_class"], "normal");
    for alert in &alerts[6..14] {
        assert_eq!(alert["final_class"], "fire", "{alert}");
    }
    assert_eq!(report["config"]["mode"], "parallel");
    assert_eq!(report["n_windows"], 30);
}

#[test]
fn runs_are_deterministic_given_config_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        run_ok(vigil().args([
            "run",
            "--config",
            config("parallel.conf").to_str().unwrap(),
            "--report",
            path.to_str().unwrap(),
        ]));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn binary_flag_collapses_alert_classes() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    run_ok(vigil().args([
        "run",
        "--config",
        config("parallel.conf").to_str().unwrap(),
        "--binary",
        "--report",
        report_path.to_str().unwrap(),
    ]));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let alerts = report["alerts"].as_array().unwrap();
    assert!(!alerts.is_empty());
    let mut seen_abnormal = false;
    for alert in alerts {
        let class = alert["final_class"].as_str().unwrap();
        assert!(class == "abnormal" || class == "normal", "{class}");
        seen_abnormal |= class == "abnormal";
    }
    assert!(seen_abnormal);
}

#[test]
fn serial_run_fires_no_rules() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    run_ok(vigil().args([
        "run",
        "--config",
        config("serial.conf").to_str().unwrap(),
        "--report",
        report_path.to_str().unwrap(),
    ]));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    for alert in report["alerts"].as_array().unwrap() {
        assert_eq!(alert["rule"], "none");
        assert_eq!(alert["final_class"], alert["original_class"]);
    }
}

#[test]
fn eval_of_a_perfect_detector_is_all_true_positives() {
    let dir = tempfile::tempdir().unwrap();
    let gt_path = dir.path().join("gt.jsonl");
    run_ok(vigil().args([
        "run",
        "--config",
        config("demo.conf").to_str().unwrap(),
        "--emit-gt",
        gt_path.to_str().unwrap(),
    ]));

    let json_path = dir.path().join("eval.json");
    let csv_path = dir.path().join("eval.csv");
    run_ok(vigil().args([
        "eval",
        "--gt",
        gt_path.to_str().unwrap(),
        "--pred",
        gt_path.to_str().unwrap(),
        "--nms-overlap",
        "1.0",
        "--json",
        json_path.to_str().unwrap(),
        "--csv",
        csv_path.to_str().unwrap(),
    ]));

    let eval: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    let totals = &eval["totals"];
    assert!(totals["total"].as_u64().unwrap() > 0);
    assert_eq!(totals["true_positives"], totals["total"]);
    assert_eq!(totals["false_positives"].as_u64(), Some(0));
    assert_eq!(totals["false_negatives"].as_u64(), Some(0));
    assert_eq!(totals["mean_iou"].as_f64(), Some(1.0));
    // paper-style defaults echoed into the report header
    assert_eq!(eval["config"]["confidence_threshold"].as_f64(), Some(0.55));
    assert!(std::fs::read_to_string(&csv_path)
        .unwrap()
        .contains("flame"));
}

#[test]
fn eval_rejects_malformed_jsonl_with_a_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(
        &bad,
        "{\"v\":1,\"frame\":0,\"class\":\"flame\",\"conf\":0.9,\"box\":[0,0,4,4]}\nnot json\n",
    )
    .unwrap();
    let output = vigil()
        .args([
            "eval",
            "--gt",
            bad.to_str().unwrap(),
            "--pred",
            bad.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("line 2"), "{stderr}");
}

#[test]
fn bench_table_and_json_agree() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("bench.json");
    let output = run_ok(vigil().args([
        "bench",
        "--config",
        config("bench.conf").to_str().unwrap(),
        "--report",
        report_path.to_str().unwrap(),
    ]));

    let stdout = String::from_utf8_lossy(&output.stdout);
    let mut lines = stdout.lines();
    let header = lines.next().unwrap();
    for column in [
        "Video Duration",
        "Video FPS",
        "Average Detection Time",
        "Total Processing Time",
    ] {
        assert!(header.contains(column), "{header}");
    }
    let row: Vec<&str> = lines.next().unwrap().split('|').map(str::trim).collect();

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let avg = report["timing"]["average_detection_time_ms"]
        .as_f64()
        .unwrap();
    let total = report["timing"]["total_processing_ms"].as_f64().unwrap();
    let table_avg: f64 = row[2].trim_end_matches("ms").parse().unwrap();
    let table_total: f64 = row[3].trim_end_matches("ms").parse().unwrap();
    assert!((table_avg - avg).abs() < 0.001, "{table_avg} vs {avg}");
    assert!((table_total - total).abs() < 0.001);
    assert_eq!(report["video_duration_s"].as_f64(), Some(4.0));
    // per-window mean equals the reported average exactly
    let per_window: Vec<f64> = report["timing"]["per_window_ms"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let mean = per_window.iter().sum::<f64>() / per_window.len() as f64;
    assert_eq!(mean, avg);
}

#[test]
fn explain_with_alpha_zero_reproduces_the_frames() {
    let dir = tempfile::tempdir().unwrap();
    let frames_dir = dir.path().join("frames");
    let maps_path = dir.path().join("maps.jsonl");
    run_ok(vigil().args([
        "run",
        "--config",
        config("demo.conf").to_str().unwrap(),
        "--emit-frames",
        frames_dir.to_str().unwrap(),
        "--emit-heatmaps",
        maps_path.to_str().unwrap(),
    ]));

    let out_dir = dir.path().join("out");
    run_ok(vigil().args([
        "explain",
        "--frames",
        frames_dir.to_str().unwrap(),
        "--heatmaps",
        maps_path.to_str().unwrap(),
        "--alpha",
        "0",
        "--level",
        "0.5",
        "--out",
        out_dir.to_str().unwrap(),
    ]));

    for i in 0..40 {
        let input = std::fs::read(frames_dir.join(format!("frame_{i:05}.ppm"))).unwrap();
        let overlay = std::fs::read(out_dir.join(format!("overlay_{i:05}.ppm"))).unwrap();
        assert_eq!(input, overlay, "frame {i} changed under alpha 0");
    }
    assert!(out_dir.join("contours.json").exists());
}

#[test]
fn explain_rejects_degenerate_levels() {
    let dir = tempfile::tempdir().unwrap();
    let output = vigil()
        .args([
            "explain",
            "--frames",
            dir.path().to_str().unwrap(),
            "--heatmaps",
            dir.path().join("missing.jsonl").to_str().unwrap(),
            "--level",
            "1.5",
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn explain_finds_both_ring_contours() {
    let dir = tempfile::tempdir().unwrap();
    let frames_dir = dir.path().join("frames");
    std::fs::create_dir_all(&frames_dir).unwrap();

    // one gray 9x9 frame plus a ring-shaped heatmap
    let mut pgm = b"P5\n9 9\n255\n".to_vec();
    pgm.extend(std::iter::repeat_n(128u8, 81));
    std::fs::write(frames_dir.join("frame0.pgm"), &pgm).unwrap();

    let ring: Vec<f64> = (0..81)
        .map(|i| {
            let (x, y) = (i % 9, i / 9);
            let in_outer = (1..8).contains(&x) && (1..8).contains(&y);
            let in_hole = (3..6).contains(&x) && (3..6).contains(&y);
            if in_outer && !in_hole {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let maps_path = dir.path().join("ring.jsonl");
    let record = serde_json::json!({"v": 1, "frame": 0, "w": 9, "h": 9, "values": ring});
    std::fs::write(&maps_path, format!("{record}\n")).unwrap();

    let out_dir = dir.path().join("out");
    run_ok(vigil().args([
        "explain",
        "--frames",
        frames_dir.to_str().unwrap(),
        "--heatmaps",
        maps_path.to_str().unwrap(),
        "--level",
        "0.5",
        "--out",
        out_dir.to_str().unwrap(),
    ]));

    let contours: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("contours.json")).unwrap())
            .unwrap();
    assert_eq!(contours.as_array().unwrap().len(), 2);
}
