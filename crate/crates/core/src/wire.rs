//! Framed JSON protocol shared by the environment server and its clients.
//!
//! Each frame is a 4-byte big-endian length followed by that many bytes of
//! UTF-8 JSON. Requests carry a `"cmd"` of `spec`, `reset`, `step` or
//! `close`; every request gets exactly one response, and failures are
//! reported as `{"error": "..."}`.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, Observation, StepInfo, StepResult};

pub const DEFAULT_PORT: u16 = 7878;
/// Frames larger than this are rejected without being parsed.
pub const MAX_FRAME_LEN: u32 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "lowercase", deny_unknown_fields)]
pub enum Request {
    Spec,
    Reset {
        #[serde(default)]
        seed: Option<u64>,
    },
    Step {
        action: [f64; 2],
    },
    Close,
}

impl Request {
    /// Parses a frame body, mapping every failure to a message suitable for
    /// an error response.
    pub fn parse(body: &[u8]) -> Result<Request, String> {
        let text = std::str::from_utf8(body).map_err(|e| format!("frame is not UTF-8: {e}"))?;
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("malformed JSON: {e}"))?;
        match value.get("cmd") {
            None if value.is_object() => return Err("missing \"cmd\" field".into()),
            None => return Err("request must be a JSON object".into()),
            Some(serde_json::Value::String(_)) => {}
            Some(_) => return Err("\"cmd\" must be a string".into()),
        }
        serde_json::from_value(value).map_err(|e| format!("invalid request: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecReply {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub preset: String,
    pub task: String,
    pub max_steps: usize,
    pub collision_radius: f64,
    pub sample_time: f64,
}

impl From<&EnvConfig> for SpecReply {
    fn from(c: &EnvConfig) -> Self {
        Self {
            obs_dim: c.obs_dim(),
            act_dim: 2,
            preset: c.preset.name().to_string(),
            task: c.task.name().to_string(),
            max_steps: c.max_steps,
            collision_radius: c.collision_radius(),
            sample_time: c.vehicle.sample_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetReply {
    pub obs: Vec<f64>,
    pub t: usize,
}

impl From<&Observation> for ResetReply {
    fn from(o: &Observation) -> Self {
        Self { obs: o.to_vec(), t: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReply {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

impl From<&StepResult> for StepReply {
    fn from(r: &StepResult) -> Self {
        Self {
            obs: r.observation.to_vec(),
            reward: r.reward,
            terminated: r.terminated,
            truncated: r.truncated,
            info: r.info,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloseReply {
    pub ok: bool,
}

pub fn error_body(msg: impl Into<String>) -> Vec<u8> {
    to_body(&ErrorReply { error: msg.into() })
}

pub fn to_body<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("wire types serialize")
}

/// Decodes a response body, turning `{"error": ...}` into `Err`.
pub fn decode_reply<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<Result<T, String>, serde_json::Error> {
    let value: serde_json::Value = serde_json::from_slice(body)?;
    if let Some(e) = value.get("error") {
        return Ok(Err(e.as_str().map_or_else(|| e.to_string(), str::to_string)));
    }
    serde_json::from_value(value).map(Ok)
}

pub fn write_frame<W: Write>(w: &mut W, body: &[u8]) -> io::Result<()> {
    let len = u32::try_from(body.len())
        .ok()
        .filter(|&n| n <= MAX_FRAME_LEN)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(body)?;
    w.flush()
}

/// Reads one frame. `Ok(None)` means the peer closed cleanly before a new
/// frame started.
pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len);
    if len > MAX_FRAME_LEN {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame of {len} bytes exceeds the {MAX_FRAME_LEN}-byte limit"),
        ));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    Ok(Some(body))
}
