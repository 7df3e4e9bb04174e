//! Hub-side nodes: trajectory playback and the demonstration recorder.

use super::schema::{JointStatesMsg, PlannedTrajectoryMsg};
use super::*;
use crate::capture::{DemoType, LatestJointState, RecorderHandle, RecorderMeta, SessionRegistry, Trajectory, Waypoint};
use std::collections::VecDeque;
use std::time::Duration;
use tokio::task::JoinHandle;
use tokio::time::Instant;

pub const DEFAULT_PLAYBACK_DURATION: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaybackControl {
    pub enabled: bool,
}

fn default_demo_type() -> DemoType {
    DemoType::FullTask
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum RecorderControl {
    Start {
        session_id: String,
        #[serde(default = "default_demo_type")]
        demo_type: DemoType,
        #[serde(default)]
        request_id: Option<String>,
        /// Seconds; defaults to the service's interval.
        #[serde(default)]
        sample_interval: Option<f64>,
    },
    Stop {
        #[serde(default)]
        session_id: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecorderStatus {
    /// "recording", "stopped" or "error".
    pub state: String,
    pub session_id: Option<String>,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

fn decode<T: serde::de::DeserializeOwned>(env: &Envelope) -> Option<T> {
    serde_json::from_str(env.payload()?).ok()
}

/// Replays every trajectory published on /planned_trajectory as a
/// /joint_states stream spread over `duration` seconds. Queued trajectories
/// play back to back; `{"enabled": false}` on /playback_control stops the
/// current one, clears the queue and ignores new ones until re-enabled.
pub fn spawn_playback(hub: &Hub, duration: f64) -> JoinHandle<()> {
    let conn = hub.connect();
    conn.subscribe(PLANNED_TRAJECTORY).expect("valid topic");
    conn.subscribe(PLAYBACK_CONTROL).expect("valid topic");
    tokio::spawn(async move {
        let mut enabled = true;
        let mut queue: VecDeque<Vec<Waypoint>> = VecDeque::new();
        // (waypoints, start instant, next index)
        let mut current: Option<(Vec<Waypoint>, Instant, usize)> = None;
        loop {
            if current.is_none() {
                current = queue.pop_front().map(|w| (w, Instant::now(), 0));
            }
            let deadline = current
                .as_ref()
                .map(|(w, start, k)| *start + Duration::from_secs_f64(w[*k].t * duration));
            tokio::select! {
                env = conn.recv() => {
                    let Some(env) = env else { break };
                    match env.topic.as_str() {
                        PLANNED_TRAJECTORY if enabled => {
                            if let Some(m) = decode::<PlannedTrajectoryMsg>(&env) {
                                if let Ok(t) = Trajectory::new(m.waypoints) {
                                    queue.push_back(t.normalized().waypoints().to_vec());
                                }
                            }
                        }
                        PLAYBACK_CONTROL => {
                            if let Some(c) = decode::<PlaybackControl>(&env) {
                                enabled = c.enabled;
                                if !enabled {
                                    current = None;
                                    queue.clear();
                                }
                            }
                        }
                        _ => {}
                    }
                }
                _ = tokio::time::sleep_until(deadline.unwrap_or_else(Instant::now)), if deadline.is_some() => {
                    let (w, _, k) = current.as_mut().expect("deadline implies a trajectory");
                    let msg = JointStatesMsg { q: w[*k].q.clone(), stamp: conn.hub().clock() };
                    if let Err(e) = conn.publish(JOINT_STATES, &msg) {
                        log::warn!("playback: {e}");
                    }
                    *k += 1;
                    if *k == w.len() {
                        current = None;
                    }
                }
            }
        }
    })
}

/// Records /joint_states between start/stop commands on /recorder_control,
/// publishing the finished record on /demonstration and every state change
/// on /recorder_status. `template` supplies robot, scene, joint names and
/// inertias; its demo type and request id are overridden per session.
pub fn spawn_recorder(hub: &Hub, template: RecorderMeta, default_interval: f64) -> JoinHandle<()> {
    let conn = hub.connect();
    conn.subscribe(RECORDER_CONTROL).expect("valid topic");
    conn.subscribe(JOINT_STATES).expect("valid topic");
    tokio::spawn(async move {
        let registry = SessionRegistry::new();
        let source = LatestJointState::new();
        let mut active: Option<RecorderHandle> = None;
        let status = |state: &str, session: Option<&str>, samples: usize, message: Option<String>| {
            let s = RecorderStatus {
                state: state.into(),
                session_id: session.map(str::to_owned),
                samples,
                message,
            };
            if let Err(e) = conn.publish(RECORDER_STATUS, &s) {
                log::warn!("recorder: {e}");
            }
        };
        while let Some(env) = conn.recv().await {
            match env.topic.as_str() {
                JOINT_STATES => {
                    let (Some(handle), Some(m)) = (active.as_mut(), decode::<JointStatesMsg>(&env)) else {
                        continue;
                    };
                    if m.q.len() != template.joint_names.len() && !template.joint_names.is_empty() {
                        continue;
                    }
                    source.publish(m.q, m.stamp);
                    handle.tick(m.stamp);
                }
                RECORDER_CONTROL => match decode::<RecorderControl>(&env) {
                    Some(RecorderControl::Start {
                        session_id,
                        demo_type,
                        request_id,
                        sample_interval,
                    }) => {
                        if let Some(h) = &active {
                            let msg = format!("session `{}` is still recording", h.session_id());
                            status("error", Some(&session_id), 0, Some(msg));
                            continue;
                        }
                        let meta = RecorderMeta {
                            demo_type,
                            request_id,
                            started_at: std::time::SystemTime::now()
                                .duration_since(std::time::UNIX_EPOCH)
                                .map_or(0.0, |d| d.as_secs_f64()),
                            ..template.clone()
                        };
                        let interval = sample_interval.unwrap_or(default_interval);
                        match registry.recorder_start(&session_id, interval, source.clone(), meta) {
                            Ok(h) => {
                                active = Some(h);
                                status("recording", Some(&session_id), 0, None);
                            }
                            Err(e) => status("error", Some(&session_id), 0, Some(e.to_string())),
                        }
                    }
                    Some(RecorderControl::Stop { session_id }) => {
                        let Some(h) = active.take() else {
                            status("error", session_id.as_deref(), 0, Some("no active session".into()));
                            continue;
                        };
                        if session_id.as_deref().is_some_and(|s| s != h.session_id()) {
                            let msg = format!("active session is `{}`", h.session_id());
                            status("error", session_id.as_deref(), h.sample_count(), Some(msg));
                            active = Some(h);
                            continue;
                        }
                        let id = h.session_id().to_owned();
                        let samples = h.sample_count();
                        match h.finish() {
                            Ok(record) => {
                                if let Err(e) = conn.publish_raw(DEMONSTRATION, &record.to_json()) {
                                    status("error", Some(&id), samples, Some(e.to_string()));
                                } else {
                                    status("stopped", Some(&id), samples, None);
                                }
                            }
                            Err(e) => status("error", Some(&id), samples, Some(e.to_string())),
                        }
                    }
                    None => {}
                },
                _ => {}
            }
        }
    })
}
