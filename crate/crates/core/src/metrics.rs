//! Command-adherence and auxiliary scoring over trajectory logs.
//!
//! The speed-adherence score is a distance-weighted average of per-frame
//! exponential penalties on relative speed error; the overtake score is the
//! success ratio over commanded scenarios with untriggered scenarios counted
//! as failures. Route completion, collision penalty, efficiency, and comfort
//! round out the report.

use crate::config::{Behavior, Difficulty, ScenarioConfig};
use crate::log::TrajectoryLog;
use crate::route::{Route, SpeedPlan};
use crate::sim::ScenarioOutcome;
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("log has too few frames ({0}); need at least 2")]
    EmptyLog(usize),
    #[error("invalid route config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComfortLimits {
    /// Comfortable acceleration magnitude bound (m/s^2).
    pub accel_max: f64,
    /// Comfortable jerk magnitude bound (m/s^3).
    pub jerk_max: f64,
}

impl Default for ComfortLimits {
    fn default() -> Self {
        ComfortLimits {
            accel_max: 3.5,
            jerk_max: 10.0,
        }
    }
}

/// How lead-constrained frames are scored under the follow command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Softening {
    /// No special treatment.
    Off,
    /// Full credit: constrained frames score 1.
    Full,
    /// Partial credit: constrained frames score at least this value.
    Credit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    /// Penalty strength of the exponential speed-error score.
    pub alpha: f64,
    /// Floor on the target speed in the relative-error denominator (m/s).
    pub epsilon: f64,
    pub comfort: ComfortLimits,
    pub softening: Softening,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            alpha: 3.0,
            epsilon: 0.1,
            comfort: ComfortLimits::default(),
            softening: Softening::Full,
        }
    }
}

/// Per-frame terms of the speed-adherence score.
#[derive(Debug, Clone, Copy)]
pub struct FrameScore {
    pub frame: u64,
    /// Arc-length coordinate of the ego position (m).
    pub s: f64,
    /// Distance weight: step length from the previous frame (m).
    pub w: f64,
    pub v_actual: f64,
    pub v_target: f64,
    /// Relative speed error.
    pub e: f64,
    /// Per-frame score in (0, 1].
    pub score: f64,
    pub softened: bool,
}

#[derive(Debug, Clone)]
pub struct SpeedAdherenceBreakdown {
    pub frames: Vec<FrameScore>,
    /// Distance-weighted total in [0, 100]; 0 for a log that never moved.
    pub total: f64,
}

/// Speed-adherence score of a log against a route's speed plan.
///
/// Frames are scored from index 1: each gets weight `w = |pos_i - pos_{i-1}|`,
/// target speed looked up at its projected arc-length, relative error
/// `e = |v_actual - v_target| / max(v_target, epsilon)` and score
/// `exp(-alpha * e)`. Under the follow command, frames where a lead
/// constrains the ego (`v_lead <= v_actual < v_target`) are softened per the
/// configured mode.
pub fn speed_adherence(
    log: &TrajectoryLog,
    route: &Route,
    plan: &SpeedPlan,
    cfg: &MetricConfig,
) -> Result<SpeedAdherenceBreakdown, MetricsError> {
    if log.frames.len() < 2 {
        return Err(MetricsError::EmptyLog(log.frames.len()));
    }
    let mut frames = Vec::with_capacity(log.frames.len() - 1);
    let mut weighted = 0.0;
    let mut weight_sum = 0.0;
    for pair in log.frames.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        let pos = Vec2::new(cur.ego_x, cur.ego_y);
        let w = pos.distance(Vec2::new(prev.ego_x, prev.ego_y));
        let s = route.project(pos);
        let v_target = plan.speed_at_arc(s);
        let v_actual = cur.ego_speed;
        let e = (v_actual - v_target).abs() / v_target.max(cfg.epsilon);
        let base = (-cfg.alpha * e).exp();
        let constrained = cur.active_behavior == Some(Behavior::Follow)
            && matches!(cur.lead_speed, Some(vl) if vl <= v_actual && v_actual < v_target);
        let (score, softened) = if constrained {
            match cfg.softening {
                Softening::Off => (base, false),
                Softening::Full => (1.0, true),
                Softening::Credit(c) => (base.max(c), true),
            }
        } else {
            (base, false)
        };
        weighted += w * score;
        weight_sum += w;
        frames.push(FrameScore {
            frame: cur.frame,
            s,
            w,
            v_actual,
            v_target,
            e,
            score,
            softened,
        });
    }
    let total = if weight_sum > 0.0 {
        100.0 * weighted / weight_sum
    } else {
        0.0
    };
    Ok(SpeedAdherenceBreakdown { frames, total })
}

/// Overtake score: mean of per-scenario binary scores (100 on success, 0
/// otherwise). Untriggered scenarios count as failures. `None` for routes
/// with no commanded scenarios.
pub fn overtake_score(outcomes: &[ScenarioOutcome]) -> Option<f64> {
    if outcomes.is_empty() {
        return None;
    }
    let total: f64 = outcomes
        .iter()
        .map(|o| {
            let success = o.triggered
                && !o.collision
                && match o.commanded {
                    Behavior::Overtake => o.ego_finished_ahead,
                    Behavior::Follow => !o.ego_ever_passed,
                };
            if success {
                100.0
            } else {
                0.0
            }
        })
        .sum();
    Some(total / outcomes.len() as f64)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AuxScores {
    /// Furthest projected progress as a percentage of route length.
    pub route_completion: f64,
    /// Multiplicative collision penalty in [0, 1].
    pub safety_penalty: f64,
    /// `route_completion * safety_penalty`, in [0, 100].
    pub driving_score: f64,
    /// Distance-weighted actual speed over distance-weighted target speed,
    /// as a percentage.
    pub efficiency: f64,
    /// Share of frames within the comfort acceleration and jerk bounds.
    pub comfort: f64,
}

const COLLISION_PENALTY_BASE: f64 = 0.6;

pub fn auxiliary_scores(
    log: &TrajectoryLog,
    route: &Route,
    plan: &SpeedPlan,
    collisions: u32,
    cfg: &MetricConfig,
) -> Result<AuxScores, MetricsError> {
    if log.frames.len() < 2 {
        return Err(MetricsError::EmptyLog(log.frames.len()));
    }
    let mut max_s: f64 = 0.0;
    for f in &log.frames {
        max_s = max_s.max(route.project(Vec2::new(f.ego_x, f.ego_y)));
    }
    let route_completion = 100.0 * max_s / route.total_length();
    let safety_penalty = COLLISION_PENALTY_BASE.powi(collisions as i32);
    let driving_score = route_completion * safety_penalty;

    let mut w_actual = 0.0;
    let mut w_target = 0.0;
    let mut comfortable = 0usize;
    let mut judged = 0usize;
    for pair in log.frames.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        let pos = Vec2::new(cur.ego_x, cur.ego_y);
        let w = pos.distance(Vec2::new(prev.ego_x, prev.ego_y));
        let v_target = plan.speed_at_arc(route.project(pos));
        w_actual += w * cur.ego_speed;
        w_target += w * v_target;

        let dt = cur.t - prev.t;
        if dt > 0.0 {
            let jerk = (cur.ego_accel - prev.ego_accel) / dt;
            judged += 1;
            if cur.ego_accel.abs() <= cfg.comfort.accel_max && jerk.abs() <= cfg.comfort.jerk_max {
                comfortable += 1;
            }
        }
    }
    let efficiency = if w_target > 0.0 {
        100.0 * w_actual / w_target
    } else {
        0.0
    };
    let comfort = if judged > 0 {
        100.0 * comfortable as f64 / judged as f64
    } else {
        100.0
    };
    Ok(AuxScores {
        route_completion,
        safety_penalty,
        driving_score,
        efficiency,
        comfort,
    })
}

/// All scores for one scored route.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreReport {
    pub route_id: String,
    pub difficulty: Difficulty,
    pub speed_adherence: f64,
    /// `None` on routes without commanded scenarios (easy routes).
    pub overtake_score: Option<f64>,
    pub route_completion: f64,
    pub safety_penalty: f64,
    pub driving_score: f64,
    pub efficiency: f64,
    pub comfort: f64,
    pub collisions: u32,
    /// Episode-level success: full completion with zero collisions.
    pub success: bool,
}

/// Score one route end to end from its config, log, and episode results.
pub fn score_route(
    cfg: &ScenarioConfig,
    log: &TrajectoryLog,
    outcomes: &[ScenarioOutcome],
    collisions: u32,
    mc: &MetricConfig,
) -> Result<ScoreReport, MetricsError> {
    let route = cfg
        .route()
        .map_err(|e| MetricsError::BadConfig(e.to_string()))?;
    let plan = cfg
        .speed_plan(&route)
        .map_err(|e| MetricsError::BadConfig(e.to_string()))?;
    let adherence = speed_adherence(log, &route, &plan, mc)?;
    let aux = auxiliary_scores(log, &route, &plan, collisions, mc)?;
    Ok(ScoreReport {
        route_id: cfg.route_id.clone(),
        difficulty: cfg.difficulty,
        speed_adherence: adherence.total,
        overtake_score: overtake_score(outcomes),
        route_completion: aux.route_completion,
        safety_penalty: aux.safety_penalty,
        driving_score: aux.driving_score,
        efficiency: aux.efficiency,
        comfort: aux.comfort,
        collisions,
        success: aux.route_completion >= 100.0 - 1e-9 && collisions == 0,
    })
}

/// One metric row of the rollup: overall mean plus per-difficulty means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RollupRow {
    pub all: Option<f64>,
    pub easy: Option<f64>,
    pub medium: Option<f64>,
    pub hard: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rollup {
    pub routes: usize,
    pub speed_adherence: RollupRow,
    pub overtake_score: RollupRow,
    pub route_completion: RollupRow,
    pub driving_score: RollupRow,
    pub efficiency: RollupRow,
    pub comfort: RollupRow,
    pub success_rate: RollupRow,
}

fn mean_of(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn rollup_row(reports: &[&ScoreReport], pick: impl Fn(&ScoreReport) -> Option<f64>) -> RollupRow {
    let bucket = |difficulty: Option<Difficulty>| {
        let values: Vec<f64> = reports
            .iter()
            .filter(|r| difficulty.is_none_or(|d| r.difficulty == d))
            .filter_map(|r| pick(r))
            .collect();
        mean_of(&values)
    };
    RollupRow {
        all: bucket(None),
        easy: bucket(Some(Difficulty::Easy)),
        medium: bucket(Some(Difficulty::Medium)),
        hard: bucket(Some(Difficulty::Hard)),
    }
}

/// Unweighted per-difficulty and overall means. The overtake row averages
/// over routes that carry a score, so easy routes do not dilute it.
pub fn aggregate(reports: &[ScoreReport]) -> Rollup {
    let refs: Vec<&ScoreReport> = reports.iter().collect();
    Rollup {
        routes: reports.len(),
        speed_adherence: rollup_row(&refs, |r| Some(r.speed_adherence)),
        overtake_score: rollup_row(&refs, |r| r.overtake_score),
        route_completion: rollup_row(&refs, |r| Some(r.route_completion)),
        driving_score: rollup_row(&refs, |r| Some(r.driving_score)),
        efficiency: rollup_row(&refs, |r| Some(r.efficiency)),
        comfort: rollup_row(&refs, |r| Some(r.comfort)),
        success_rate: rollup_row(&refs, |r| Some(if r.success { 100.0 } else { 0.0 })),
    }
}

impl Rollup {
    /// CSV with one row per metric and A/E/M/H columns; `-` marks buckets
    /// without a value.
    pub fn to_csv(&self) -> String {
        let cell = |v: Option<f64>| match v {
            Some(x) => format!("{x:.2}"),
            None => "-".to_string(),
        };
        let mut out = String::from("metric,A,E,M,H\n");
        for (name, row) in [
            ("speed_adherence", self.speed_adherence),
            ("overtake_score", self.overtake_score),
            ("route_completion", self.route_completion),
            ("driving_score", self.driving_score),
            ("efficiency", self.efficiency),
            ("comfort", self.comfort),
            ("success_rate", self.success_rate),
        ] {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                name,
                cell(row.all),
                cell(row.easy),
                cell(row.medium),
                cell(row.hard)
            ));
        }
        out
    }
}
