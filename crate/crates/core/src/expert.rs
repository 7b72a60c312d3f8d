//! Built-in policies: the rule-based speed-conditioned expert, trivial
//! baselines, and log replay.
//!
//! The expert tracks the commanded target speed with an IDM controller,
//! keeps an IDM gap behind a slower lead under the follow command, and runs
//! a three-phase lane-change maneuver (shift out, pass, merge back) under
//! the overtake command. Static obstacles in the ego lane force the same
//! maneuver regardless of the commanded behavior.

use crate::config::Behavior;
use crate::log::TrajectoryLog;
use crate::sim::{
    AgentObs, Command, Observation, Policy, PolicyError, ACCEL_LIMIT, LANE_RATE_LIMIT,
};
use thiserror::Error;

/// Extra lateral margin beyond the body half-widths before two agents are
/// considered to share a corridor.
const LATERAL_MARGIN: f64 = 0.3;
/// Offset tolerance for maneuver phase transitions.
const OFFSET_TOL: f64 = 0.05;

#[derive(Debug, Error)]
#[error("invalid expert params: {0}")]
pub struct ParamError(String);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmParams {
    pub a_max: f64,
    pub b_comf: f64,
    pub s0: f64,
    pub t_headway: f64,
    pub delta_exp: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams {
            a_max: 3.0,
            b_comf: 2.0,
            s0: 4.0,
            t_headway: 1.2,
            delta_exp: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OvertakeParams {
    /// Gap to a blocker at which the lane change begins (m).
    pub clearance_ahead: f64,
    /// Longitudinal lead over the blocker before merging back (m).
    pub clearance_return: f64,
    /// Lateral speed used during lane changes (m/s).
    pub lane_change_rate: f64,
    /// Lateral offset held while passing (m).
    pub pass_offset: f64,
    /// Speed-scaled engagement horizon (s): a pass also engages within
    /// `engage_headway * v` meters of the blocker. Without this the IDM
    /// equilibrium gap behind a fast lead can exceed `clearance_ahead` and
    /// the maneuver would never start.
    pub engage_headway: f64,
}

impl Default for OvertakeParams {
    fn default() -> Self {
        OvertakeParams {
            clearance_ahead: 18.0,
            clearance_return: 12.0,
            lane_change_rate: 1.5,
            pass_offset: 3.0,
            engage_headway: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExpertParams {
    pub idm: IdmParams,
    pub overtake: OvertakeParams,
}

impl ExpertParams {
    /// Load params from a flat `key=value` file. Unknown keys are rejected;
    /// missing keys keep their defaults. Lines starting with `#` and blank
    /// lines are skipped.
    pub fn from_kv(text: &str) -> Result<ExpertParams, ParamError> {
        let mut params = ExpertParams::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ParamError(format!("line {}: expected key=value", lineno + 1)))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| ParamError(format!("line {}: bad number", lineno + 1)))?;
            match key.trim() {
                "idm.a_max" => params.idm.a_max = value,
                "idm.b_comf" => params.idm.b_comf = value,
                "idm.s0" => params.idm.s0 = value,
                "idm.t_headway" => params.idm.t_headway = value,
                "idm.delta_exp" => params.idm.delta_exp = value,
                "overtake.clearance_ahead" => params.overtake.clearance_ahead = value,
                "overtake.clearance_return" => params.overtake.clearance_return = value,
                "overtake.lane_change_rate" => params.overtake.lane_change_rate = value,
                "overtake.pass_offset" => params.overtake.pass_offset = value,
                "overtake.engage_headway" => params.overtake.engage_headway = value,
                other => return Err(ParamError(format!("unknown key '{other}'"))),
            }
        }
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<(), ParamError> {
        let positives = [
            ("idm.a_max", self.idm.a_max),
            ("idm.b_comf", self.idm.b_comf),
            ("idm.s0", self.idm.s0),
            ("idm.t_headway", self.idm.t_headway),
            ("overtake.clearance_ahead", self.overtake.clearance_ahead),
            ("overtake.clearance_return", self.overtake.clearance_return),
            ("overtake.lane_change_rate", self.overtake.lane_change_rate),
            ("overtake.pass_offset", self.overtake.pass_offset),
            ("overtake.engage_headway", self.overtake.engage_headway),
        ];
        for (name, v) in positives {
            if !(v.is_finite() && v > 0.0) {
                return Err(ParamError(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.idm.delta_exp < 1.0 {
            return Err(ParamError(format!(
                "idm.delta_exp must be >= 1, got {}",
                self.idm.delta_exp
            )));
        }
        Ok(())
    }
}

/// IDM acceleration toward `v_target`, optionally constrained by a blocker
/// at net gap `gap` moving at `blocker_speed`.
pub fn idm_accel(p: &IdmParams, v: f64, v_target: f64, blocker: Option<(f64, f64)>) -> f64 {
    let free = if v_target <= 1e-9 {
        if v > 1e-9 {
            -p.b_comf
        } else {
            0.0
        }
    } else {
        p.a_max * (1.0 - (v / v_target).powf(p.delta_exp))
    };
    match blocker {
        None => free,
        Some((gap, blocker_speed)) => {
            let gap = gap.max(0.1);
            let approach = v - blocker_speed;
            let dynamic = v * p.t_headway + v * approach / (2.0 * (p.a_max * p.b_comf).sqrt());
            let s_star = p.s0 + dynamic.max(0.0);
            free - p.a_max * (s_star / gap).powi(2)
        }
    }
}

/// Net gap at which IDM holds a steady state behind a blocker moving at the
/// ego's speed `v`, for desired speed `v_target > v`.
pub fn idm_equilibrium_gap(p: &IdmParams, v: f64, v_target: f64) -> f64 {
    let s_star = p.s0 + v * p.t_headway;
    s_star / (1.0 - (v / v_target).powf(p.delta_exp)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PassTarget {
    Lead,
    Obstacle { s_end: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Maneuver {
    LaneKeep,
    ShiftOut(PassTarget),
    Pass(PassTarget),
    MergeBack,
}

/// Rule-based speed-conditioned expert.
pub struct ExpertPolicy {
    params: ExpertParams,
    maneuver: Maneuver,
}

struct Blocker {
    gap_net: f64,
    speed: f64,
    is_obstacle: bool,
    obstacle_end: f64,
}

impl ExpertPolicy {
    pub fn new(params: ExpertParams) -> Self {
        ExpertPolicy {
            params,
            maneuver: Maneuver::LaneKeep,
        }
    }

    /// Entities ahead of the ego that overlap the corridor at `offset`.
    fn blockers_at(obs: &Observation, offset: f64) -> Vec<Blocker> {
        let mut out = Vec::new();
        let overlaps = |other_offset: f64, other_width: f64| {
            (offset - other_offset).abs() < (obs.ego_width + other_width) / 2.0 + LATERAL_MARGIN
        };
        if let Some(AgentObs {
            s,
            speed,
            lane_offset,
            length,
            width,
        }) = obs.lead
        {
            if s >= obs.ego_s && overlaps(lane_offset, width) {
                out.push(Blocker {
                    gap_net: (s - obs.ego_s) - (obs.ego_length + length) / 2.0,
                    speed,
                    is_obstacle: false,
                    obstacle_end: 0.0,
                });
            }
        }
        for ob in &obs.obstacles {
            let center = (ob.s_start + ob.s_end) / 2.0;
            let length = ob.s_end - ob.s_start;
            if center >= obs.ego_s && overlaps(ob.lane_offset, ob.width) {
                out.push(Blocker {
                    gap_net: (center - obs.ego_s) - (obs.ego_length + length) / 2.0,
                    speed: 0.0,
                    is_obstacle: true,
                    obstacle_end: ob.s_end,
                });
            }
        }
        out
    }

    fn update_maneuver(&mut self, obs: &Observation) {
        let ot = self.params.overtake;
        match self.maneuver {
            Maneuver::LaneKeep => {
                let engage_gap = ot.clearance_ahead.max(ot.engage_headway * obs.ego_speed);
                let blockers = Self::blockers_at(obs, obs.ego_lane_offset);
                for b in &blockers {
                    if b.gap_net >= engage_gap {
                        continue;
                    }
                    if b.is_obstacle {
                        // A stopped obstacle forces the lane change no
                        // matter what behavior is commanded.
                        self.maneuver = Maneuver::ShiftOut(PassTarget::Obstacle {
                            s_end: b.obstacle_end,
                        });
                        return;
                    }
                    if obs.behavior == Some(Behavior::Overtake) && b.speed < obs.target_speed {
                        self.maneuver = Maneuver::ShiftOut(PassTarget::Lead);
                        return;
                    }
                }
            }
            Maneuver::ShiftOut(target) => {
                if (obs.ego_lane_offset - ot.pass_offset).abs() < OFFSET_TOL {
                    self.maneuver = Maneuver::Pass(target);
                }
            }
            Maneuver::Pass(target) => {
                let cleared = match target {
                    PassTarget::Lead => match obs.lead {
                        Some(lead) => obs.ego_s - lead.s > ot.clearance_return,
                        None => true,
                    },
                    PassTarget::Obstacle { s_end } => obs.ego_s - s_end > ot.clearance_return,
                };
                if cleared {
                    self.maneuver = Maneuver::MergeBack;
                }
            }
            Maneuver::MergeBack => {
                if obs.ego_lane_offset.abs() < OFFSET_TOL {
                    self.maneuver = Maneuver::LaneKeep;
                }
            }
        }
    }
}

impl Policy for ExpertPolicy {
    fn decide(&mut self, obs: &Observation) -> Result<Command, PolicyError> {
        self.update_maneuver(obs);

        let desired_offset = match self.maneuver {
            Maneuver::LaneKeep | Maneuver::MergeBack => 0.0,
            Maneuver::ShiftOut(_) | Maneuver::Pass(_) => self.params.overtake.pass_offset,
        };
        let raw_rate = (desired_offset - obs.ego_lane_offset) / obs.dt;
        let lane_rate = raw_rate
            .clamp(
                -self.params.overtake.lane_change_rate,
                self.params.overtake.lane_change_rate,
            )
            .clamp(-LANE_RATE_LIMIT, LANE_RATE_LIMIT);

        let mut accel = idm_accel(&self.params.idm, obs.ego_speed, obs.target_speed, None);
        for b in Self::blockers_at(obs, obs.ego_lane_offset) {
            let constrained = idm_accel(
                &self.params.idm,
                obs.ego_speed,
                obs.target_speed,
                Some((b.gap_net, b.speed)),
            );
            accel = accel.min(constrained);
        }
        Ok(Command {
            accel: accel.clamp(-ACCEL_LIMIT, ACCEL_LIMIT),
            lane_rate,
        })
    }
}

/// Baseline that never accelerates and never steers.
pub struct InertPolicy;

impl Policy for InertPolicy {
    fn decide(&mut self, _obs: &Observation) -> Result<Command, PolicyError> {
        Ok(Command::default())
    }
}

/// Non-conditioned baseline: cruise at a fixed speed, ignore the command
/// channel, never change lanes. Slower traffic ahead is still respected via
/// IDM so the baseline does not simply rear-end the lead.
pub struct FixedSpeedPolicy {
    pub cruise: f64,
    idm: IdmParams,
}

impl FixedSpeedPolicy {
    pub fn new(cruise: f64) -> Self {
        FixedSpeedPolicy {
            cruise,
            idm: IdmParams::default(),
        }
    }
}

impl Policy for FixedSpeedPolicy {
    fn decide(&mut self, obs: &Observation) -> Result<Command, PolicyError> {
        let mut accel = idm_accel(&self.idm, obs.ego_speed, self.cruise, None);
        for b in ExpertPolicy::blockers_at(obs, obs.ego_lane_offset) {
            accel = accel.min(idm_accel(
                &self.idm,
                obs.ego_speed,
                self.cruise,
                Some((b.gap_net, b.speed)),
            ));
        }
        Ok(Command {
            accel: accel.clamp(-ACCEL_LIMIT, ACCEL_LIMIT),
            lane_rate: 0.0,
        })
    }
}

/// Replays a previously recorded log by emitting, each frame, the command
/// that reproduces the next logged state.
///
/// If the replayed episode runs one frame past the recorded log (possible
/// when a terminal threshold falls within the wire format's rounding), the
/// policy holds the last state instead of failing.
pub struct ReplayPolicy {
    speeds: Vec<f64>,
    offsets: Vec<f64>,
    /// Reconstructed lateral rate at the current frame.
    lat_rate: f64,
}

impl ReplayPolicy {
    pub fn new(log: &TrajectoryLog) -> Self {
        ReplayPolicy {
            speeds: log.frames.iter().map(|f| f.ego_speed).collect(),
            offsets: log.frames.iter().map(|f| f.ego_lane_offset).collect(),
            lat_rate: 0.0,
        }
    }

    fn v_long(speed: f64, lat_rate: f64) -> f64 {
        (speed * speed - lat_rate * lat_rate).max(0.0).sqrt()
    }
}

impl Policy for ReplayPolicy {
    fn decide(&mut self, obs: &Observation) -> Result<Command, PolicyError> {
        let k = obs.frame as usize;
        if k + 1 >= self.speeds.len() {
            return Ok(Command::default());
        }
        // Invert the simulator's trapezoidal lateral update to recover the
        // rate that lands exactly on the next logged offset.
        let next_rate = 2.0 * (self.offsets[k + 1] - obs.ego_lane_offset) / obs.dt - obs.ego_lat_rate;
        let next_v_long = Self::v_long(self.speeds[k + 1], next_rate);
        let accel = (next_v_long - obs.ego_speed) / obs.dt;
        self.lat_rate = next_rate;
        Ok(Command {
            accel: accel.clamp(-ACCEL_LIMIT, ACCEL_LIMIT),
            lane_rate: next_rate.clamp(-LANE_RATE_LIMIT, LANE_RATE_LIMIT),
        })
    }
}
