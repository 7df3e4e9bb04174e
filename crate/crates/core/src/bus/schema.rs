//! Payload schemas for the well-known topics. Anything else passes through.

use super::*;
use crate::capture::{DemonstrationRecord, Trajectory, Waypoint};
use serde::de::DeserializeOwned;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointStatesMsg {
    pub q: Vec<f64>,
    pub stamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloudMsg {
    pub points: Vec<[f64; 3]>,
    pub seed: u64,
    pub scene_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTraceRequestMsg {
    pub feature_hint: String,
    pub request_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedTrajectoryMsg {
    pub waypoints: Vec<Waypoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotDescriptionMsg {
    pub urdf: String,
    pub scene: serde_json::Value,
}

fn parse<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

fn finite(values: &[f64], what: &str) -> Result<(), String> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(format!("{what} must be finite"))
    }
}

pub fn is_well_known(topic: &str) -> bool {
    matches!(
        topic,
        JOINT_STATES
            | POINT_CLOUD
            | TRAJECTORY_QUERY
            | DEMONSTRATION
            | FEATURE_TRACE_REQUEST
            | PLANNED_TRAJECTORY
            | ROBOT_DESCRIPTION
            | PLAYBACK_CONTROL
            | RECORDER_CONTROL
    )
}

/// Check `payload` against the schema of `topic`; unknown topics are opaque.
pub fn validate(topic: &str, payload: &str) -> Result<(), BusError> {
    let check = || -> Result<(), String> {
        match topic {
            JOINT_STATES => {
                let m: JointStatesMsg = parse(payload)?;
                if m.q.is_empty() {
                    return Err("q must be nonempty".into());
                }
                finite(&m.q, "q")?;
                finite(&[m.stamp], "stamp")
            }
            POINT_CLOUD => {
                let m: PointCloudMsg = parse(payload)?;
                finite(m.points.as_flattened(), "points")
            }
            TRAJECTORY_QUERY => {
                let m: crate::capture::TrajectoryQuery = parse(payload)?;
                if m.q_start.is_empty() || m.q_start.len() != m.q_goal.len() {
                    return Err("q_start and q_goal must be nonempty and equally long".into());
                }
                finite(&m.q_start, "q_start")?;
                finite(&m.q_goal, "q_goal")
            }
            DEMONSTRATION => parse::<DemonstrationRecord>(payload).map(drop),
            FEATURE_TRACE_REQUEST => parse::<FeatureTraceRequestMsg>(payload).map(drop),
            PLANNED_TRAJECTORY => {
                let m: PlannedTrajectoryMsg = parse(payload)?;
                Trajectory::new(m.waypoints).map(drop).map_err(|e| e.to_string())
            }
            ROBOT_DESCRIPTION => {
                let m: RobotDescriptionMsg = parse(payload)?;
                if !m.scene.is_object() {
                    return Err("scene must be an object".into());
                }
                crate::model::parse_urdf(&m.urdf).map(drop).map_err(|e| e.to_string())
            }
            PLAYBACK_CONTROL => parse::<PlaybackControl>(payload).map(drop),
            RECORDER_CONTROL => {
                let m: RecorderControl = parse(payload)?;
                if let RecorderControl::Start { sample_interval: Some(dt), .. } = m {
                    if !(dt > 0.0) || !dt.is_finite() {
                        return Err("sample_interval must be > 0".into());
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    };
    check().map_err(|reason| BusError::SchemaViolation {
        topic: topic.into(),
        reason,
    })
}
