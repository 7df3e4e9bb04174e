//! Demonstration capture: trajectories, the periodic recorder, torque
//! estimation and the JSON-lines demonstration file format.

mod file;
mod recorder;
mod torque;

pub use file::{load_record, read_record, save_record, write_record, RECORD_VERSION};
pub use recorder::{JointSample, LatestJointState, RecorderHandle, RecorderMeta, SessionRegistry};
pub use torque::{estimate_torques, finite_difference_weights};

use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("a recording session with id `{0}` is already active")]
    DuplicateSession(String),
    #[error("sample interval must be > 0, got {0}")]
    InvalidInterval(f64),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("waypoint times must be finite and strictly increasing (index {0})")]
    NonMonotonicTime(usize),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub q: Vec<f64>,
    pub t: f64,
}

/// Ordered configurations with strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    waypoints: Vec<Waypoint>,
}

impl<'de> Deserialize<'de> for Trajectory {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            waypoints: Vec<Waypoint>,
        }
        let raw = Raw::deserialize(d)?;
        Trajectory::new(raw.waypoints).map_err(serde::de::Error::custom)
    }
}

impl Trajectory {
    pub fn new(waypoints: Vec<Waypoint>) -> Result<Self, CaptureError> {
        if waypoints.len() < 2 {
            return Err(CaptureError::TooFewSamples(waypoints.len()));
        }
        let dof = waypoints[0].q.len();
        for (i, w) in waypoints.iter().enumerate() {
            if w.q.len() != dof {
                return Err(CaptureError::DimensionMismatch(format!(
                    "waypoint {i} has {} joints, expected {dof}",
                    w.q.len()
                )));
            }
            if !w.t.is_finite() || (i > 0 && !(w.t > waypoints[i - 1].t)) {
                return Err(CaptureError::NonMonotonicTime(i));
            }
            if w.q.iter().any(|v| !v.is_finite()) {
                return Err(CaptureError::InvalidRecord(format!("waypoint {i} has a non-finite joint value")));
            }
        }
        Ok(Self { waypoints })
    }

    /// Configurations at uniform times over [0, 1].
    pub fn uniform(configurations: Vec<Vec<f64>>) -> Result<Self, CaptureError> {
        let n = configurations.len();
        if n < 2 {
            return Err(CaptureError::TooFewSamples(n));
        }
        let last = (n - 1) as f64;
        Trajectory::new(
            configurations
                .into_iter()
                .enumerate()
                .map(|(k, q)| Waypoint {
                    q,
                    t: if k + 1 == n { 1.0 } else { k as f64 / last },
                })
                .collect(),
        )
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.waypoints[0].q.len()
    }

    pub fn times(&self) -> Vec<f64> {
        self.waypoints.iter().map(|w| w.t).collect()
    }

    pub fn configurations(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.waypoints.iter().map(|w| w.q.as_slice())
    }

    pub fn first(&self) -> &Waypoint {
        &self.waypoints[0]
    }

    pub fn last(&self) -> &Waypoint {
        &self.waypoints[self.waypoints.len() - 1]
    }

    pub fn duration(&self) -> f64 {
        self.last().t - self.first().t
    }

    pub fn is_normalized(&self) -> bool {
        self.first().t == 0.0 && self.last().t == 1.0
    }

    /// Affinely map times onto [0, 1], preserving relative spacing.
    pub fn normalized(&self) -> Trajectory {
        let t0 = self.first().t;
        let span = self.duration();
        let n = self.waypoints.len();
        let waypoints = self
            .waypoints
            .iter()
            .enumerate()
            .map(|(k, w)| Waypoint {
                q: w.q.clone(),
                t: match k {
                    0 => 0.0,
                    _ if k + 1 == n => 1.0,
                    _ => (w.t - t0) / span,
                },
            })
            .collect();
        Trajectory { waypoints }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoType {
    Correction,
    FeatureTrace,
    FullTask,
}

impl std::str::FromStr for DemoType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "correction" => Ok(DemoType::Correction),
            "feature_trace" => Ok(DemoType::FeatureTrace),
            "full_task" => Ok(DemoType::FullTask),
            other => Err(format!("unknown demo type `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryQuery {
    pub q_start: Vec<f64>,
    pub q_goal: Vec<f64>,
}

/// A recorded demonstration with per-waypoint joint torque estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RecordWire", into = "RecordWire")]
pub struct DemonstrationRecord {
    /// Normalized to t ∈ [0, 1].
    pub trajectory: Trajectory,
    /// n × n_joints, N·m.
    pub torques: Vec<Vec<f64>>,
    pub demo_type: DemoType,
    pub robot_name: String,
    pub scene_id: String,
    /// Seconds since the Unix epoch (simulated clocks may start at 0).
    pub started_at: f64,
    pub sample_interval: f64,
    /// Physical duration represented by the normalized [0, 1] timeline.
    pub raw_duration: f64,
    pub joint_names: Vec<String>,
    pub request_id: Option<String>,
}

impl DemonstrationRecord {
    pub fn validate(&self) -> Result<(), CaptureError> {
        let n = self.trajectory.len();
        let dof = self.trajectory.dof();
        if self.torques.len() != n || self.torques.iter().any(|row| row.len() != dof) {
            return Err(CaptureError::DimensionMismatch(format!(
                "torques must be {n} × {dof}"
            )));
        }
        if !(self.sample_interval > 0.0) {
            return Err(CaptureError::InvalidInterval(self.sample_interval));
        }
        if !(self.raw_duration > 0.0) || !self.raw_duration.is_finite() {
            return Err(CaptureError::InvalidRecord(format!(
                "raw_duration must be > 0, got {}",
                self.raw_duration
            )));
        }
        if !self.joint_names.is_empty() && self.joint_names.len() != dof {
            return Err(CaptureError::DimensionMismatch(format!(
                "{} joint names for {dof} joints",
                self.joint_names.len()
            )));
        }
        if !self.trajectory.is_normalized() {
            return Err(CaptureError::InvalidRecord("trajectory times must span exactly [0, 1]".into()));
        }
        Ok(())
    }

    pub fn query(&self) -> TrajectoryQuery {
        TrajectoryQuery {
            q_start: self.trajectory.first().q.clone(),
            q_goal: self.trajectory.last().q.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// Header fields shared by the single-document and JSON-lines forms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct RecordHeader {
    pub version: u32,
    pub robot: String,
    pub scene: String,
    pub demo_type: DemoType,
    pub sample_interval: f64,
    pub raw_duration: f64,
    pub joints: Vec<String>,
    #[serde(default)]
    pub started_at: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct WaypointLine {
    pub t: f64,
    pub q: Vec<f64>,
    pub tau: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct RecordWire {
    #[serde(flatten)]
    pub header: RecordHeader,
    pub waypoints: Vec<WaypointLine>,
}

impl RecordWire {
    pub(crate) fn assemble(header: RecordHeader, lines: Vec<WaypointLine>) -> Result<DemonstrationRecord, CaptureError> {
        if header.version != RECORD_VERSION {
            return Err(CaptureError::SchemaViolation(format!(
                "unsupported record version {}",
                header.version
            )));
        }
        let width = header.joints.len();
        let mut waypoints = Vec::with_capacity(lines.len());
        let mut torques = Vec::with_capacity(lines.len());
        for (i, line) in lines.into_iter().enumerate() {
            if line.q.len() != width || line.tau.len() != width {
                return Err(CaptureError::SchemaViolation(format!(
                    "waypoint {i}: expected {width} values in q and tau, got {} and {}",
                    line.q.len(),
                    line.tau.len()
                )));
            }
            waypoints.push(Waypoint { q: line.q, t: line.t });
            torques.push(line.tau);
        }
        let trajectory = Trajectory::new(waypoints).map_err(|e| CaptureError::SchemaViolation(e.to_string()))?;
        let record = DemonstrationRecord {
            trajectory,
            torques,
            demo_type: header.demo_type,
            robot_name: header.robot,
            scene_id: header.scene,
            started_at: header.started_at,
            sample_interval: header.sample_interval,
            raw_duration: header.raw_duration,
            joint_names: header.joints,
            request_id: header.request_id,
        };
        record.validate().map_err(|e| CaptureError::SchemaViolation(e.to_string()))?;
        Ok(record)
    }
}

impl From<&DemonstrationRecord> for RecordHeader {
    fn from(r: &DemonstrationRecord) -> Self {
        RecordHeader {
            version: RECORD_VERSION,
            robot: r.robot_name.clone(),
            scene: r.scene_id.clone(),
            demo_type: r.demo_type,
            sample_interval: r.sample_interval,
            raw_duration: r.raw_duration,
            joints: if r.joint_names.is_empty() {
                (0..r.trajectory.dof()).map(|i| format!("joint_{i}")).collect()
            } else {
                r.joint_names.clone()
            },
            started_at: r.started_at,
            request_id: r.request_id.clone(),
        }
    }
}

pub(crate) fn waypoint_lines(r: &DemonstrationRecord) -> impl Iterator<Item = WaypointLine> + '_ {
    r.trajectory
        .waypoints()
        .iter()
        .zip(&r.torques)
        .map(|(w, tau)| WaypointLine {
            t: w.t,
            q: w.q.clone(),
            tau: tau.clone(),
        })
}

impl From<DemonstrationRecord> for RecordWire {
    fn from(r: DemonstrationRecord) -> Self {
        RecordWire {
            header: RecordHeader::from(&r),
            waypoints: waypoint_lines(&r).collect(),
        }
    }
}

impl TryFrom<RecordWire> for DemonstrationRecord {
    type Error = CaptureError;
    fn try_from(w: RecordWire) -> Result<Self, CaptureError> {
        RecordWire::assemble(w.header, w.waypoints)
    }
}
