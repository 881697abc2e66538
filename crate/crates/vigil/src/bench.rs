//! Wall-clock benchmark harness. Timings run single-threaded, one window
//! at a time, so the per-window numbers stay honest.

use std::thread::sleep;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use vigil_core::backends::{BackendError, Classifier, Detector};
use vigil_core::fusion::FusionError;
use vigil_core::model::{Alert, Detection, Frame, SequenceWindow, Verdict};

/// Per-window wall-clock timings of one pipeline run.
///
/// `average_detection_time_ms` is exactly `mean(per_window_ms)` (0 with no
/// windows); `total_processing_ms` is the wall-clock time of the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub per_window_ms: Vec<f64>,
    pub average_detection_time_ms: f64,
    pub total_processing_ms: f64,
}

impl TimingReport {
    pub fn from_per_window(per_window_ms: Vec<f64>, total_processing_ms: f64) -> Self {
        let average_detection_time_ms = if per_window_ms.is_empty() {
            0.0
        } else {
            per_window_ms.iter().sum::<f64>() / per_window_ms.len() as f64
        };
        Self {
            per_window_ms,
            average_detection_time_ms,
            total_processing_ms,
        }
    }
}

/// Times `run_window` over every window. Alerts come back alongside the
/// report in window order.
pub fn bench<F>(
    windows: &[SequenceWindow],
    mut run_window: F,
) -> Result<(Vec<Alert>, TimingReport), FusionError>
where
    F: FnMut(&SequenceWindow) -> Result<Alert, FusionError>,
{
    let total_start = Instant::now();
    let mut alerts = Vec::with_capacity(windows.len());
    let mut per_window_ms = Vec::with_capacity(windows.len());
    for window in windows {
        let start = Instant::now();
        alerts.push(run_window(window)?);
        per_window_ms.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let total = total_start.elapsed().as_secs_f64() * 1e3;
    Ok((alerts, TimingReport::from_per_window(per_window_ms, total)))
}

/// Adds a fixed per-call latency to a detector, for mock benchmarking.
pub struct SleepingDetector<D> {
    inner: D,
    delay: Duration,
}

impl<D> SleepingDetector<D> {
    pub fn new(inner: D, delay: Duration) -> Self {
        Self { inner, delay }
    }
}

impl<D: Detector> Detector for SleepingDetector<D> {
    fn detect(&self, frame: &Frame) -> Result<Vec<Detection>, BackendError> {
        if !self.delay.is_zero() {
            sleep(self.delay);
        }
        self.inner.detect(frame)
    }
}

/// Adds a fixed per-call latency to a classifier, for mock benchmarking.
pub struct SleepingClassifier<C> {
    inner: C,
    delay: Duration,
}

impl<C> SleepingClassifier<C> {
    pub fn new(inner: C, delay: Duration) -> Self {
        Self { inner, delay }
    }
}

impl<C: Classifier> Classifier for SleepingClassifier<C> {
    fn classify(&self, window: &SequenceWindow, frames: &[Frame]) -> Result<Verdict, BackendError> {
        if !self.delay.is_zero() {
            sleep(self.delay);
        }
        self.inner.classify(window, frames)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use vigil_core::model::{ClassRegistry, GeneratorKind, RuleFired};

    fn window(id: usize) -> SequenceWindow {
        SequenceWindow {
            window_id: id,
            generator: GeneratorKind::Sliding,
            frame_indices: vec![0, 1],
        }
    }

    #[test]
    fn empty_run_yields_empty_report() {
        let (alerts, report) = bench(&[], |_| unreachable!()).unwrap();
        assert!(alerts.is_empty());
        assert!(report.per_window_ms.is_empty());
        assert_eq!(report.average_detection_time_ms, 0.0);
    }

    #[test]
    fn average_is_exactly_the_mean_of_per_window() {
        let classes = ClassRegistry::standard();
        let windows: Vec<SequenceWindow> = (0..5).map(window).collect();
        let (_, report) = bench(&windows, |w| {
            sleep(Duration::from_millis(2));
            Ok(Alert {
                window_id: w.window_id,
                final_class: classes.normal(),
                original_class: classes.normal(),
                rule_fired: RuleFired::None,
                supporting_detections: vec![],
            })
        })
        .unwrap();
        let mean = report.per_window_ms.iter().sum::<f64>() / report.per_window_ms.len() as f64;
        assert_eq!(report.average_detection_time_ms, mean);
        assert!(report.per_window_ms.iter().all(|&ms| ms >= 2.0));
        assert!(report.total_processing_ms >= report.per_window_ms.iter().sum::<f64>());
    }
}
