//! Topic pub/sub hub shared by the browser UI and the learning nodes.
//!
//! Two transports carry the same JSON envelopes: newline-delimited over raw
//! TCP and one text frame per envelope over websocket. Payloads are forwarded
//! verbatim, so subscribers see exactly the bytes the publisher sent.

mod client;
mod hub;
pub mod schema;
mod services;
mod transport;

pub use client::{BusClient, Incoming};
pub use hub::{Connection, Hub, DEFAULT_QUEUE_CAPACITY};
pub use services::{spawn_playback, spawn_recorder, PlaybackControl, RecorderControl, RecorderStatus, DEFAULT_PLAYBACK_DURATION};
pub use transport::{serve, BackgroundHub, RunningHub, ServeConfig};

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use thiserror::Error;

pub const ROBOT_DESCRIPTION: &str = "/robot_description";
pub const JOINT_STATES: &str = "/joint_states";
pub const POINT_CLOUD: &str = "/point_cloud";
pub const TRAJECTORY_QUERY: &str = "/trajectory_query";
pub const DEMONSTRATION: &str = "/demonstration";
pub const FEATURE_TRACE_REQUEST: &str = "/feature_trace_request";
pub const PLANNED_TRAJECTORY: &str = "/planned_trajectory";
pub const PLAYBACK_CONTROL: &str = "/playback_control";
pub const RECORDER_CONTROL: &str = "/recorder_control";
pub const RECORDER_STATUS: &str = "/recorder_status";
pub const DIAGNOSTICS: &str = "/diagnostics";

#[derive(Debug, Error)]
pub enum BusError {
    #[error("port {port} is already in use")]
    PortInUse { port: u16 },
    #[error("not connected to the hub")]
    NotConnected,
    #[error("schema violation on {topic}: {reason}")]
    SchemaViolation { topic: String, reason: String },
    #[error("invalid envelope: {0}")]
    InvalidEnvelope(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Advertise,
    Subscribe,
    Unsubscribe,
    Publish,
    /// Hub → client only.
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
}

/// One protocol message. `msg` is kept as raw JSON text end to end.
#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope {
    pub op: Op,
    pub topic: String,
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msg: Option<Box<RawValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

impl Envelope {
    pub fn new(op: Op, topic: &str, id: impl Into<String>) -> Self {
        Envelope {
            op,
            topic: topic.into(),
            id: id.into(),
            msg: None,
            error: None,
        }
    }

    pub fn publish(topic: &str, id: impl Into<String>, msg: Box<RawValue>) -> Self {
        Envelope {
            msg: Some(msg),
            ..Envelope::new(Op::Publish, topic, id)
        }
    }

    pub fn error(topic: &str, id: &str, kind: &str, message: impl Into<String>) -> Self {
        Envelope {
            error: Some(ErrorBody {
                kind: kind.into(),
                message: message.into(),
            }),
            ..Envelope::new(Op::Error, topic, id)
        }
    }

    /// Parse and check the structural invariants (topic shape, publish has
    /// a payload, no raw newline).
    pub fn parse(text: &str) -> Result<Self, BusError> {
        if text.contains('\n') {
            return Err(BusError::InvalidEnvelope("envelope contains a raw newline".into()));
        }
        let env = Envelope::decode(text)?;
        env.check()?;
        Ok(env)
    }

    /// Parse without the client-side checks (hub replies include `error`).
    pub fn decode(text: &str) -> Result<Self, BusError> {
        serde_json::from_str(text).map_err(|e| BusError::InvalidEnvelope(e.to_string()))
    }

    pub fn check(&self) -> Result<(), BusError> {
        if !self.topic.starts_with('/') || self.topic.len() < 2 {
            return Err(BusError::InvalidEnvelope(format!("topic `{}` must start with `/`", self.topic)));
        }
        match self.op {
            Op::Publish if self.msg.is_none() => Err(BusError::InvalidEnvelope("publish requires msg".into())),
            Op::Error => Err(BusError::InvalidEnvelope("clients may not send error envelopes".into())),
            _ => Ok(()),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("envelope serializes")
    }

    pub fn payload(&self) -> Option<&str> {
        self.msg.as_deref().map(RawValue::get)
    }
}
