//! External-process backend adapter: newline-delimited JSON requests over
//! the child's stdin, one JSON response per line on its stdout, versioned
//! with `"v":1`. Real detector/classifier runtimes plug in behind this
//! boundary without linking into the engine; `vigil backend-serve` speaks
//! the same protocol from a replay script, which is also how the adapter
//! is tested.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use vigil_core::backends::{
    BackendError, Classifier, DetectionRecord, Detector, VerdictRecord, PROTOCOL_VERSION,
};
use vigil_core::model::{
    ClassRegistry, Detection, Frame, GeneratorKind, ModelError, ObjectRegistry, SequenceWindow,
    Verdict,
};

#[derive(Debug, Serialize, Deserialize)]
pub struct FrameMsg {
    pub index: u64,
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    /// Base64 of the raw interleaved pixel buffer.
    pub pixels: String,
}

impl FrameMsg {
    pub fn from_frame(frame: &Frame) -> Self {
        Self {
            index: frame.index as u64,
            width: frame.width,
            height: frame.height,
            channels: frame.channels,
            pixels: B64.encode(&frame.pixels),
        }
    }

    pub fn to_frame(&self) -> Result<Frame, String> {
        let pixels = B64.decode(&self.pixels).map_err(|e| e.to_string())?;
        Frame::new(
            self.index as usize,
            self.width,
            self.height,
            self.channels,
            pixels,
        )
        .map_err(|e: ModelError| e.to_string())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum RequestBody {
    Detect { frame: FrameMsg },
    Classify { window: u64, frames: Vec<FrameMsg> },
    Shutdown,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Request {
    pub v: u32,
    #[serde(flatten)]
    pub body: RequestBody,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Response {
    pub v: u32,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detections: Option<Vec<DetectionRecord>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<VerdictRecord>,
}

impl Response {
    fn failure(message: String) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            ok: false,
            error: Some(message),
            detections: None,
            verdict: None,
        }
    }

    fn success() -> Self {
        Self {
            v: PROTOCOL_VERSION,
            ok: true,
            error: None,
            detections: None,
            verdict: None,
        }
    }
}

struct ProcIo {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// Client side of the protocol: a spawned child process usable as both a
/// [`Detector`] and a [`Classifier`]. Calls are serialized through a mutex,
/// so the adapter is safe to share between threads.
pub struct ProcessBackend {
    io: Mutex<ProcIo>,
    classes: ClassRegistry,
    objects: ObjectRegistry,
}

impl ProcessBackend {
    pub fn spawn(
        command: &mut Command,
        classes: ClassRegistry,
        objects: ObjectRegistry,
    ) -> std::io::Result<Self> {
        let mut child = command
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            io: Mutex::new(ProcIo {
                child,
                stdin,
                stdout,
            }),
            classes,
            objects,
        })
    }

    fn round_trip(&self, body: RequestBody) -> Result<Response, BackendError> {
        let request = Request {
            v: PROTOCOL_VERSION,
            body,
        };
        let mut io = self.io.lock().expect("adapter mutex");
        let line = serde_json::to_string(&request).expect("request serializes");
        writeln!(io.stdin, "{line}").map_err(|e| BackendError::Failure(e.to_string()))?;
        io.stdin
            .flush()
            .map_err(|e| BackendError::Failure(e.to_string()))?;
        let mut reply = String::new();
        io.stdout
            .read_line(&mut reply)
            .map_err(|e| BackendError::Failure(e.to_string()))?;
        if reply.is_empty() {
            return Err(BackendError::Failure(
                "backend process closed its stdout".into(),
            ));
        }
        let response: Response = serde_json::from_str(reply.trim())
            .map_err(|e| BackendError::Failure(format!("bad response: {e}")))?;
        if !response.ok {
            return Err(BackendError::Failure(
                response
                    .error
                    .unwrap_or_else(|| "unspecified backend error".into()),
            ));
        }
        Ok(response)
    }
}

impl Drop for ProcessBackend {
    fn drop(&mut self) {
        if let Ok(mut io) = self.io.lock() {
            let bye = Request {
                v: PROTOCOL_VERSION,
                body: RequestBody::Shutdown,
            };
            let _ = writeln!(io.stdin, "{}", serde_json::to_string(&bye).unwrap());
            let _ = io.stdin.flush();
            let _ = io.child.wait();
        }
    }
}

impl Detector for ProcessBackend {
    fn detect(&self, frame: &Frame) -> Result<Vec<Detection>, BackendError> {
        let response = self.round_trip(RequestBody::Detect {
            frame: FrameMsg::from_frame(frame),
        })?;
        let records = response.detections.unwrap_or_default();
        records
            .iter()
            .map(|r| r.to_detection(&self.objects).map_err(BackendError::Model))
            .collect()
    }
}

impl Classifier for ProcessBackend {
    fn classify(&self, window: &SequenceWindow, frames: &[Frame]) -> Result<Verdict, BackendError> {
        let response = self.round_trip(RequestBody::Classify {
            window: window.window_id as u64,
            frames: frames.iter().map(FrameMsg::from_frame).collect(),
        })?;
        let record = response
            .verdict
            .ok_or_else(|| BackendError::Failure("response carries no verdict".into()))?;
        let mut dense = vec![0.0; self.classes.len()];
        for (name, &p) in &record.dist {
            let label = self
                .classes
                .get(name)
                .ok_or_else(|| BackendError::Failure(format!("unknown class `{name}`")))?;
            dense[label.index()] = p;
        }
        Ok(Verdict::new(record.window as usize, dense, &self.classes)?)
    }
}

/// Server side: answers protocol requests from `input` with the given
/// backends until a shutdown request or end of input.
pub fn serve<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    detector: &dyn Detector,
    classifier: &dyn Classifier,
    objects: &ObjectRegistry,
    classes: &ClassRegistry,
) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<Request>(&line) {
            Err(e) => Response::failure(format!("bad request: {e}")),
            Ok(request) if request.v != PROTOCOL_VERSION => {
                Response::failure(format!("unsupported protocol version {}", request.v))
            }
            Ok(request) => match request.body {
                RequestBody::Shutdown => break,
                RequestBody::Detect { frame } => match frame.to_frame() {
                    Err(e) => Response::failure(e),
                    Ok(frame) => match detector.detect(&frame) {
                        Err(e) => Response::failure(e.to_string()),
                        Ok(dets) => {
                            let records = dets
                                .iter()
                                .map(|d| DetectionRecord::from_detection(d, objects))
                                .collect();
                            Response {
                                detections: Some(records),
                                ..Response::success()
                            }
                        }
                    },
                },
                RequestBody::Classify { window, frames } => {
                    let decoded: Result<Vec<Frame>, String> =
                        frames.iter().map(FrameMsg::to_frame).collect();
                    match decoded {
                        Err(e) => Response::failure(e),
                        Ok(frames) => {
                            let window = SequenceWindow {
                                window_id: window as usize,
                                generator: GeneratorKind::Sliding,
                                frame_indices: frames.iter().map(|f| f.index).collect(),
                            };
                            match classifier.classify(&window, &frames) {
                                Err(e) => Response::failure(e.to_string()),
                                Ok(verdict) => Response {
                                    verdict: Some(VerdictRecord::from_verdict(&verdict, classes)),
                                    ..Response::success()
                                },
                            }
                        }
                    }
                }
            },
        };
        serde_json::to_writer(&mut output, &response)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}
