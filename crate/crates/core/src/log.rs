//! Trajectory logs and their JSON-Lines wire format.
//!
//! A log file is one meta object on line 1 followed by one frame object per
//! line. Keys are written in a fixed order and floats with nine significant
//! digits (`{:.8e}`), so identical episodes serialize to identical bytes.

use crate::config::Behavior;
use serde::Deserialize;
use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("log parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("log is empty")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct LogMeta {
    pub route_id: String,
    pub seed: u64,
    pub config_digest: String,
}

/// One simulation frame as it appears in the log.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Frame {
    pub frame: u64,
    pub t: f64,
    pub ego_x: f64,
    pub ego_y: f64,
    pub ego_speed: f64,
    pub ego_accel: f64,
    pub ego_lane_offset: f64,
    pub lead_x: Option<f64>,
    pub lead_y: Option<f64>,
    pub lead_speed: Option<f64>,
    pub active_target_speed: f64,
    pub active_behavior: Option<Behavior>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub meta: LogMeta,
    pub frames: Vec<Frame>,
}

/// Nine-significant-digit float formatting used throughout the log format.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.8e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    match x {
        Some(v) => fmt_f64(v),
        None => "null".to_string(),
    }
}

impl TrajectoryLog {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{{\"route_id\":{},\"seed\":{},\"config_digest\":{}}}\n",
            serde_json::to_string(&self.meta.route_id).unwrap(),
            self.meta.seed,
            serde_json::to_string(&self.meta.config_digest).unwrap(),
        ));
        for f in &self.frames {
            let behavior = match f.active_behavior {
                Some(b) => format!("\"{b}\""),
                None => "null".to_string(),
            };
            out.push_str(&format!(
                "{{\"frame\":{},\"t\":{},\"ego_x\":{},\"ego_y\":{},\"ego_speed\":{},\"ego_accel\":{},\"ego_lane_offset\":{},\"lead_x\":{},\"lead_y\":{},\"lead_speed\":{},\"active_target_speed\":{},\"active_behavior\":{}}}\n",
                f.frame,
                fmt_f64(f.t),
                fmt_f64(f.ego_x),
                fmt_f64(f.ego_y),
                fmt_f64(f.ego_speed),
                fmt_f64(f.ego_accel),
                fmt_f64(f.ego_lane_offset),
                fmt_opt(f.lead_x),
                fmt_opt(f.lead_y),
                fmt_opt(f.lead_speed),
                fmt_f64(f.active_target_speed),
                behavior,
            ));
        }
        out
    }

    pub fn parse_jsonl(text: &str) -> Result<TrajectoryLog, LogError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, meta_line) = lines.next().ok_or(LogError::Empty)?;
        let meta: LogMeta = serde_json::from_str(meta_line).map_err(|e| LogError::Parse {
            line: 1,
            msg: e.to_string(),
        })?;
        let mut frames = Vec::new();
        for (idx, line) in lines {
            let frame: Frame = serde_json::from_str(line).map_err(|e| LogError::Parse {
                line: idx + 1,
                msg: e.to_string(),
            })?;
            frames.push(frame);
        }
        Ok(TrajectoryLog { meta, frames })
    }

    pub fn save(&self, path: &Path) -> Result<(), LogError> {
        let mut file = fs::File::create(path)?;
        file.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TrajectoryLog, LogError> {
        let text = fs::read_to_string(path)?;
        Self::parse_jsonl(&text)
    }

    /// Per-frame scalar speeds, the input to the re-annotation pipeline.
    pub fn speeds(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.ego_speed).collect()
    }
}
