use super::{estimate_torques, CaptureError, DemoType, DemonstrationRecord, Trajectory, Waypoint};
use std::collections::HashSet;
use std::sync::{Arc, Mutex, RwLock};

/// One published joint configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSample {
    pub q: Vec<f64>,
    pub stamp: f64,
}

/// Latest joint state, replaced whole on every publish so readers never see
/// a half-written configuration.
#[derive(Debug, Clone, Default)]
pub struct LatestJointState(Arc<RwLock<Option<Arc<JointSample>>>>);

impl LatestJointState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn publish(&self, q: Vec<f64>, stamp: f64) {
        let sample = Arc::new(JointSample { q, stamp });
        *self.0.write().unwrap_or_else(|e| e.into_inner()) = Some(sample);
    }

    pub fn snapshot(&self) -> Option<Arc<JointSample>> {
        self.0.read().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

/// Metadata stamped onto a finished record.
#[derive(Debug, Clone)]
pub struct RecorderMeta {
    pub demo_type: DemoType,
    pub robot_name: String,
    pub scene_id: String,
    pub joint_names: Vec<String>,
    pub inertias: Vec<f64>,
    pub started_at: f64,
    pub request_id: Option<String>,
}

/// Tracks active session ids; cloning shares the same set.
#[derive(Debug, Clone, Default)]
pub struct SessionRegistry(Arc<Mutex<HashSet<String>>>);

impl SessionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_active(&self, session_id: &str) -> bool {
        self.0.lock().unwrap_or_else(|e| e.into_inner()).contains(session_id)
    }

    pub fn active_count(&self) -> usize {
        self.0.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    /// Open a session that snapshots `source` every `sample_interval` seconds
    /// of the clock passed to [`RecorderHandle::tick`].
    pub fn recorder_start(
        &self,
        session_id: &str,
        sample_interval: f64,
        source: LatestJointState,
        meta: RecorderMeta,
    ) -> Result<RecorderHandle, CaptureError> {
        if !(sample_interval > 0.0) || !sample_interval.is_finite() {
            return Err(CaptureError::InvalidInterval(sample_interval));
        }
        if meta.inertias.len() != meta.joint_names.len() && !meta.joint_names.is_empty() {
            return Err(CaptureError::DimensionMismatch(format!(
                "{} inertias for {} joints",
                meta.inertias.len(),
                meta.joint_names.len()
            )));
        }
        let mut active = self.0.lock().unwrap_or_else(|e| e.into_inner());
        if !active.insert(session_id.to_string()) {
            return Err(CaptureError::DuplicateSession(session_id.to_string()));
        }
        Ok(RecorderHandle {
            session_id: session_id.to_string(),
            sample_interval,
            source,
            meta,
            samples: Vec::new(),
            next_due: None,
            registry: self.clone(),
        })
    }

    fn release(&self, session_id: &str) {
        self.0.lock().unwrap_or_else(|e| e.into_inner()).remove(session_id);
    }
}

/// An active recording. Dropping it without finishing abandons the session.
#[derive(Debug)]
pub struct RecorderHandle {
    session_id: String,
    sample_interval: f64,
    source: LatestJointState,
    meta: RecorderMeta,
    samples: Vec<Waypoint>,
    next_due: Option<f64>,
    registry: SessionRegistry,
}

impl RecorderHandle {
    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn sample_interval(&self) -> f64 {
        self.sample_interval
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    pub fn meta(&self) -> &RecorderMeta {
        &self.meta
    }

    /// Snapshot the latest configuration if a sample is due at `now`.
    /// Returns whether a sample was appended.
    pub fn tick(&mut self, now: f64) -> bool {
        let slack = 1e-9 * self.sample_interval;
        if let Some(due) = self.next_due {
            if now + slack < due {
                return false;
            }
        }
        let Some(sample) = self.source.snapshot() else {
            return false;
        };
        // Keep a fixed cadence; resynchronize after a long stall.
        let due = self.next_due.unwrap_or(now);
        let mut next = due + self.sample_interval;
        if next <= now {
            next = now + self.sample_interval;
        }
        self.next_due = Some(next);
        self.push(sample.q.clone(), now)
    }

    /// Append a configuration directly, bypassing the interval gate.
    pub fn push(&mut self, q: Vec<f64>, now: f64) -> bool {
        if let Some(last) = self.samples.last() {
            if !(now > last.t) || q.len() != last.q.len() {
                return false;
            }
        }
        self.samples.push(Waypoint { q, t: now });
        true
    }

    /// Close the session: normalize timing and annotate torques.
    pub fn finish(mut self) -> Result<DemonstrationRecord, CaptureError> {
        self.registry.release(&self.session_id);
        let samples = std::mem::take(&mut self.samples);
        if samples.len() < 2 {
            return Err(CaptureError::TooFewSamples(samples.len()));
        }
        let raw = Trajectory::new(samples)?;
        let raw_duration = raw.duration();
        let trajectory = raw.normalized();
        let dof = trajectory.dof();
        let inertias = if self.meta.inertias.is_empty() { vec![1.0; dof] } else { self.meta.inertias.clone() };
        let torques = estimate_torques(&trajectory, &inertias, raw_duration)?;
        let record = DemonstrationRecord {
            trajectory,
            torques,
            demo_type: self.meta.demo_type,
            robot_name: self.meta.robot_name.clone(),
            scene_id: self.meta.scene_id.clone(),
            started_at: self.meta.started_at,
            sample_interval: self.sample_interval,
            raw_duration,
            joint_names: self.meta.joint_names.clone(),
            request_id: self.meta.request_id.clone(),
        };
        record.validate()?;
        Ok(record)
    }
}

impl Drop for RecorderHandle {
    fn drop(&mut self) {
        self.registry.release(&self.session_id);
    }
}
