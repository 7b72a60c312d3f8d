//! Virtual-target-speed re-annotation for regular driving logs.
//!
//! Two stages per frame: a tendency speed (the extremal speed inside a short
//! future window that continues the current monotonic trend) and a virtual
//! target speed (the tendency linearly extrapolated over a randomized
//! horizon, clipped and floored at zero). The randomized horizon prevents
//! the label from leaking the exact future.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnnotationError {
    #[error("trace too short: need at least 2 frames, got {0}")]
    TraceTooShort(usize),
    #[error("invalid annotation params: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnotationParams {
    /// Future-horizon length in frames.
    pub future_frames: usize,
    /// Frame rate of the trace (frames/s).
    pub fps: f64,
    /// Lower bound of the extrapolation horizon draw (s).
    pub t_min: f64,
    /// Upper bound of the extrapolation horizon draw (s).
    pub t_max: f64,
    /// Clip bound on the per-frame speed extension (m/s).
    pub max_extend: f64,
    pub seed: u64,
}

/// Lower horizon bound shared by both presets; the presets only pin the
/// horizon ceiling and the extension clip.
pub const DEFAULT_T_MIN: f64 = 0.5;

/// Annotation presets: a long-horizon/large-extension variant and a
/// conservative short-horizon variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Long,
    Short,
}

impl Preset {
    pub fn params(self, seed: u64) -> AnnotationParams {
        let (t_max, max_extend) = match self {
            Preset::Long => (3.0, 10.0),
            Preset::Short => (1.5, 3.0),
        };
        AnnotationParams {
            future_frames: 40,
            fps: 10.0,
            t_min: DEFAULT_T_MIN,
            t_max,
            max_extend,
            seed,
        }
    }

    pub fn parse(s: &str) -> Option<Preset> {
        match s {
            "long" => Some(Preset::Long),
            "short" => Some(Preset::Short),
            _ => None,
        }
    }
}

impl AnnotationParams {
    fn validate(&self) -> Result<(), AnnotationError> {
        if self.future_frames < 1 {
            return Err(AnnotationError::InvalidParams(
                "future_frames must be >= 1".to_string(),
            ));
        }
        let bounds_ok = 0.0 <= self.t_min && self.t_min <= self.t_max;
        if !bounds_ok {
            return Err(AnnotationError::InvalidParams(format!(
                "need 0 <= t_min <= t_max, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if !(self.max_extend.is_finite() && self.max_extend > 0.0) {
            return Err(AnnotationError::InvalidParams(format!(
                "max_extend must be > 0, got {}",
                self.max_extend
            )));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(AnnotationError::InvalidParams(format!(
                "fps must be > 0, got {}",
                self.fps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnotatedFrame {
    pub v: f64,
    pub v_tend: f64,
    pub v_virt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedTrace {
    pub frames: Vec<AnnotatedFrame>,
}

/// Tendency speed at frame `t`: the max (min) of the next `future_frames`
/// speeds when the next frame rises (falls), the current speed otherwise.
/// The window truncates at the end of the trace.
pub fn tendency_speed(trace: &[f64], t: usize, future_frames: usize) -> f64 {
    let v_t = trace[t];
    if t + 1 >= trace.len() {
        return v_t;
    }
    let window = &trace[t + 1..trace.len().min(t + 1 + future_frames)];
    if trace[t + 1] > v_t {
        window.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else if trace[t + 1] < v_t {
        window.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        v_t
    }
}

/// Annotate a speed trace with tendency and virtual target speeds.
///
/// For each frame `t >= 1`, the tendency delta is scaled by `fps` and a
/// horizon `r` drawn uniformly from `[t_min, t_max]` (one independent draw
/// per frame from the seeded stream), clipped to `max_extend` in magnitude,
/// added to the tendency, and floored at zero. Frame 0 carries its tendency
/// unchanged.
pub fn virtual_target_speed(
    trace: &[f64],
    params: &AnnotationParams,
) -> Result<AnnotatedTrace, AnnotationError> {
    params.validate()?;
    if trace.len() < 2 {
        return Err(AnnotationError::TraceTooShort(trace.len()));
    }
    let tend: Vec<f64> = (0..trace.len())
        .map(|t| tendency_speed(trace, t, params.future_frames))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut frames = Vec::with_capacity(trace.len());
    frames.push(AnnotatedFrame {
        v: trace[0],
        v_tend: tend[0],
        v_virt: tend[0],
    });
    for t in 1..trace.len() {
        let u: f64 = rng.gen();
        let r = params.t_min + u * (params.t_max - params.t_min);
        let delta = ((tend[t] - tend[t - 1]) * params.fps * r)
            .clamp(-params.max_extend, params.max_extend);
        frames.push(AnnotatedFrame {
            v: trace[t],
            v_tend: tend[t],
            v_virt: (tend[t] + delta).max(0.0),
        });
    }
    Ok(AnnotatedTrace { frames })
}

impl AnnotatedTrace {
    /// CSV with columns `frame,v,v_tend,v_virt`, six-decimal values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,v,v_tend,v_virt\n");
        for (i, f) in self.frames.iter().enumerate() {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6}\n",
                i, f.v, f.v_tend, f.v_virt
            ));
        }
        out
    }
}

/// Read a speed trace from CSV text with a header naming a `v` column.
pub fn speeds_from_csv(text: &str) -> Result<Vec<f64>, AnnotationError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or(AnnotationError::TraceTooShort(0))?;
    let v_col = header
        .split(',')
        .position(|name| name.trim() == "v")
        .ok_or_else(|| AnnotationError::InvalidParams("no 'v' column in CSV header".to_string()))?;
    let mut speeds = Vec::new();
    for (i, line) in lines.enumerate() {
        let field = line.split(',').nth(v_col).ok_or_else(|| {
            AnnotationError::InvalidParams(format!("row {}: missing column {}", i + 2, v_col))
        })?;
        let v: f64 = field.trim().parse().map_err(|_| {
            AnnotationError::InvalidParams(format!("row {}: bad speed '{}'", i + 2, field))
        })?;
        speeds.push(v);
    }
    Ok(speeds)
}
