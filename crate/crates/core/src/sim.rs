//! Deterministic fixed-timestep closed-loop world.
//!
//! The world is route-centric: the ego vehicle tracks arc-length progress
//! `s` along the route plus a signed lateral lane offset, and its 2D position
//! is integrated along the local tangent/normal frame. A scripted lead
//! vehicle is spawned by the overtake/follow scenario state machine; static
//! obstacles block the ego lane over fixed arc-length intervals. Every run
//! is a pure function of (config, policy), so identical inputs produce
//! byte-identical logs.

use crate::config::{Behavior, ConfigError, ScenarioConfig};
use crate::log::{Frame, LogMeta, TrajectoryLog};
use crate::route::{Route, SpeedPlan};
use crate::vec2::Vec2;
use thiserror::Error;

pub const FPS: f64 = 10.0;
pub const DT: f64 = 1.0 / FPS;

/// Longitudinal acceleration limit (m/s^2).
pub const ACCEL_LIMIT: f64 = 4.0;
/// Lateral offset rate limit (m/s).
pub const LANE_RATE_LIMIT: f64 = 2.0;
/// Maximum lateral offset from the route centerline (m), one lane width.
pub const MAX_LANE_OFFSET: f64 = 3.5;

pub const VEHICLE_LENGTH: f64 = 4.5;
pub const VEHICLE_WIDTH: f64 = 2.0;

/// Episode timeout floor (s); the actual timeout scales with route length.
pub const MIN_EPISODE_TIMEOUT: f64 = 60.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error("step() called on an ended simulation")]
    SimEnded,
}

#[derive(Debug, Error)]
#[error("policy error: {0}")]
pub struct PolicyError(pub String);

/// Control command applied for one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Command {
    /// Longitudinal acceleration (m/s^2), clamped to [`ACCEL_LIMIT`].
    pub accel: f64,
    /// Lateral offset rate (m/s), clamped to [`LANE_RATE_LIMIT`].
    pub lane_rate: f64,
}

/// What a policy sees each frame.
#[derive(Debug, Clone)]
pub struct Observation {
    pub frame: u64,
    pub t: f64,
    pub dt: f64,
    pub route_length: f64,
    pub ego_s: f64,
    /// Longitudinal speed along the route (m/s).
    pub ego_speed: f64,
    pub ego_lane_offset: f64,
    /// Lateral rate applied in the step that produced this frame.
    pub ego_lat_rate: f64,
    pub ego_length: f64,
    pub ego_width: f64,
    pub lead: Option<AgentObs>,
    pub obstacles: Vec<ObstacleObs>,
    pub target_speed: f64,
    pub behavior: Option<Behavior>,
}

#[derive(Debug, Clone, Copy)]
pub struct AgentObs {
    pub s: f64,
    pub speed: f64,
    pub lane_offset: f64,
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ObstacleObs {
    /// Absolute arc-length interval blocked in the ego lane.
    pub s_start: f64,
    pub s_end: f64,
    pub lane_offset: f64,
    pub width: f64,
}

/// A closed-loop controller driving the ego vehicle.
pub trait Policy {
    fn decide(&mut self, obs: &Observation) -> Result<Command, PolicyError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Pending,
    Active,
    Done,
}

/// Result of one overtake/follow scenario.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScenarioOutcome {
    pub triggered: bool,
    pub commanded: Behavior,
    pub ego_finished_ahead: bool,
    pub ego_ever_passed: bool,
    pub timed_out: bool,
    pub collision: bool,
}

impl ScenarioOutcome {
    fn untriggered(commanded: Behavior) -> Self {
        ScenarioOutcome {
            triggered: false,
            commanded,
            ego_finished_ahead: false,
            ego_ever_passed: false,
            timed_out: false,
            collision: false,
        }
    }
}

#[derive(Debug, Clone)]
struct ScenarioState {
    spec: crate::config::OvertakeSpec,
    phase: Phase,
    activated_at: f64,
    ever_passed: bool,
    outcome: Option<ScenarioOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeEnd {
    Completed,
    TimedOut,
    Collision,
}

#[derive(Debug, Clone, Copy)]
struct EgoState {
    pos: Vec2,
    s: f64,
    lane_offset: f64,
    /// Longitudinal speed (m/s), always >= 0.
    v_long: f64,
    /// Lateral offset rate applied in the step that produced this state.
    lat_rate: f64,
    accel: f64,
}

#[derive(Debug, Clone, Copy)]
struct LeadState {
    s: f64,
    speed: f64,
}

#[derive(Debug, Clone, Copy)]
struct ObstacleState {
    s_start: f64,
    s_end: f64,
}

/// The closed-loop world for one episode.
pub struct World {
    route: Route,
    plan: SpeedPlan,
    seed: u64,
    route_id: String,
    config_digest: String,
    global_timeout: f64,

    frame: u64,
    t: f64,
    ego: EgoState,
    /// Ego position projected onto the route; scenario triggers, pass
    /// detection, and completion all use this coordinate.
    ego_s_proj: f64,
    lead: Option<LeadState>,
    obstacles: Vec<ObstacleState>,
    scenarios: Vec<ScenarioState>,
    active_behavior: Option<Behavior>,
    active_target_speed: f64,
    collisions: u32,
    end: Option<EpisodeEnd>,
}

impl World {
    /// Build the initial world: ego at the route start at speed zero, lead
    /// absent until the scenario trigger fires, all scenarios pending.
    pub fn new(cfg: &ScenarioConfig) -> Result<World, SimError> {
        cfg.validate()?;
        let route = cfg.route()?;
        let plan = cfg.speed_plan(&route)?;
        let length = route.total_length();
        let start = route.point_at(0.0);
        let ego = EgoState {
            pos: start,
            s: 0.0,
            lane_offset: 0.0,
            v_long: 0.0,
            lat_rate: 0.0,
            accel: 0.0,
        };
        let obstacles = cfg
            .obstacles
            .iter()
            .map(|ob| ObstacleState {
                s_start: ob.s_start * length,
                s_end: ob.s_end * length,
            })
            .collect();
        let mut scenarios: Vec<ScenarioState> = cfg
            .scenarios
            .iter()
            .map(|&spec| ScenarioState {
                spec,
                phase: Phase::Pending,
                activated_at: 0.0,
                ever_passed: false,
                outcome: None,
            })
            .collect();
        scenarios.sort_by(|a, b| a.spec.trigger_progress.total_cmp(&b.spec.trigger_progress));

        let global_timeout = (length / (0.3 * cfg.default_speed)).max(MIN_EPISODE_TIMEOUT);
        let active_target_speed = plan.query(start);
        Ok(World {
            route,
            plan,
            seed: cfg.seed,
            route_id: cfg.route_id.clone(),
            config_digest: cfg.digest(),
            global_timeout,
            frame: 0,
            t: 0.0,
            ego,
            ego_s_proj: 0.0,
            lead: None,
            obstacles,
            scenarios,
            active_behavior: None,
            active_target_speed,
            collisions: 0,
            end: None,
        })
    }

    pub fn route(&self) -> &Route {
        &self.route
    }

    pub fn plan(&self) -> &SpeedPlan {
        &self.plan
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_terminal(&self) -> bool {
        self.end.is_some()
    }

    pub fn end(&self) -> Option<EpisodeEnd> {
        self.end
    }

    pub fn collisions(&self) -> u32 {
        self.collisions
    }

    /// Advance one timestep. Commands are clamped to the ego limits.
    pub fn step(&mut self, cmd: Command) -> Result<(), SimError> {
        if self.end.is_some() {
            return Err(SimError::SimEnded);
        }
        let accel = cmd.accel.clamp(-ACCEL_LIMIT, ACCEL_LIMIT);
        let lane_rate = cmd.lane_rate.clamp(-LANE_RATE_LIMIT, LANE_RATE_LIMIT);

        // Ego integration: trapezoidal in both the longitudinal and lateral
        // rates, displaced along the local tangent/normal frame at the
        // current progress.
        let v0 = self.ego.v_long;
        let v1 = (v0 + accel * DT).max(0.0);
        let ds = 0.5 * (v0 + v1) * DT;
        let target_offset = (self.ego.lane_offset + 0.5 * (self.ego.lat_rate + lane_rate) * DT)
            .clamp(-MAX_LANE_OFFSET, MAX_LANE_OFFSET);
        let dlat = target_offset - self.ego.lane_offset;
        let tangent = self.route.tangent_at(self.ego.s);
        let normal = tangent.perp();
        self.ego.pos = self.ego.pos + tangent * ds + normal * dlat;
        self.ego.s += ds;
        self.ego.lane_offset = target_offset;
        self.ego.v_long = v1;
        self.ego.lat_rate = lane_rate;
        self.ego.accel = accel;

        if let Some(lead) = &mut self.lead {
            lead.s += lead.speed * DT;
        }

        self.frame += 1;
        self.t = self.frame as f64 * DT;
        self.ego_s_proj = self.route.project(self.ego.pos);

        let length = self.route.total_length();
        let completed = self.ego_s_proj >= length - 1e-9;

        self.update_scenarios(completed);
        let collided = self.check_collisions();

        if collided {
            self.finish(EpisodeEnd::Collision);
        } else if completed {
            self.finish(EpisodeEnd::Completed);
        } else if self.t >= self.global_timeout {
            self.finish(EpisodeEnd::TimedOut);
        }

        self.active_target_speed = self.plan.query(self.ego.pos);
        Ok(())
    }

    fn update_scenarios(&mut self, route_completed: bool) {
        let length = self.route.total_length();
        let ego_s = self.ego_s_proj;
        let mut any_active = self
            .scenarios
            .iter()
            .any(|sc| sc.phase == Phase::Active);

        for idx in 0..self.scenarios.len() {
            match self.scenarios[idx].phase {
                Phase::Pending => {
                    if !route_completed
                        && !any_active
                        && ego_s >= self.scenarios[idx].spec.trigger_progress * length
                    {
                        let spec = self.scenarios[idx].spec;
                        self.scenarios[idx].phase = Phase::Active;
                        self.scenarios[idx].activated_at = self.t;
                        self.lead = Some(LeadState {
                            s: spec.trigger_progress * length + spec.spawn_distance,
                            speed: spec.lead_speed,
                        });
                        self.active_behavior = Some(spec.behavior);
                        any_active = true;
                    }
                }
                Phase::Active => {
                    let lead = self.lead.expect("active scenario without lead");
                    if ego_s > lead.s + VEHICLE_LENGTH {
                        self.scenarios[idx].ever_passed = true;
                    }
                    let elapsed = self.t - self.scenarios[idx].activated_at;
                    if self.scenarios[idx].ever_passed {
                        self.record_outcome(idx, true, false, false);
                    } else if elapsed > self.scenarios[idx].spec.timeout {
                        self.record_outcome(idx, false, true, false);
                    }
                }
                Phase::Done => {}
            }
        }
    }

    fn record_outcome(&mut self, idx: usize, finished_ahead: bool, timed_out: bool, collision: bool) {
        let sc = &mut self.scenarios[idx];
        debug_assert!(sc.outcome.is_none(), "outcome recorded twice");
        sc.phase = Phase::Done;
        sc.outcome = Some(ScenarioOutcome {
            triggered: true,
            commanded: sc.spec.behavior,
            ego_finished_ahead: finished_ahead,
            ego_ever_passed: sc.ever_passed,
            timed_out,
            collision,
        });
        // The scenario script owns the front vehicle: when the scenario
        // terminates, the vehicle is released and the command channel
        // clears. Without this a timed-out follow scenario would pin the
        // ego behind a crawling lead for the rest of the route.
        self.lead = None;
        self.active_behavior = None;
    }

    fn check_collisions(&mut self) -> bool {
        let ego_s = self.ego_s_proj;
        let offset = self.ego.lane_offset;
        let mut hit = false;
        if let Some(lead) = &self.lead {
            if (ego_s - lead.s).abs() < VEHICLE_LENGTH && offset.abs() < VEHICLE_WIDTH {
                hit = true;
            }
        }
        for ob in &self.obstacles {
            let half = VEHICLE_LENGTH / 2.0;
            if ego_s + half > ob.s_start && ego_s - half < ob.s_end && offset.abs() < VEHICLE_WIDTH {
                hit = true;
            }
        }
        if hit {
            self.collisions += 1;
            if let Some(idx) = self
                .scenarios
                .iter()
                .position(|sc| sc.phase == Phase::Active)
            {
                self.record_outcome(idx, false, false, true);
            }
        }
        hit
    }

    /// Mark the episode ended and resolve every unfinished scenario: active
    /// ones keep their accumulated flags, pending ones become untriggered
    /// failures.
    fn finish(&mut self, end: EpisodeEnd) {
        self.end = Some(end);
        for idx in 0..self.scenarios.len() {
            match self.scenarios[idx].phase {
                Phase::Active => self.record_outcome(idx, false, false, false),
                Phase::Pending => {
                    self.scenarios[idx].phase = Phase::Done;
                    self.scenarios[idx].outcome =
                        Some(ScenarioOutcome::untriggered(self.scenarios[idx].spec.behavior));
                }
                Phase::Done => {}
            }
        }
    }

    /// Scenario outcomes in trigger order; unfinished scenarios resolve as
    /// if the episode ended now.
    pub fn outcomes(&self) -> Vec<ScenarioOutcome> {
        self.scenarios
            .iter()
            .map(|sc| match sc.outcome {
                Some(o) => o,
                None => match sc.phase {
                    Phase::Active => ScenarioOutcome {
                        triggered: true,
                        commanded: sc.spec.behavior,
                        ego_finished_ahead: false,
                        ego_ever_passed: sc.ever_passed,
                        timed_out: false,
                        collision: false,
                    },
                    _ => ScenarioOutcome::untriggered(sc.spec.behavior),
                },
            })
            .collect()
    }

    pub fn observation(&self) -> Observation {
        Observation {
            frame: self.frame,
            t: self.t,
            dt: DT,
            route_length: self.route.total_length(),
            ego_s: self.ego_s_proj,
            ego_speed: self.ego.v_long,
            ego_lane_offset: self.ego.lane_offset,
            ego_lat_rate: self.ego.lat_rate,
            ego_length: VEHICLE_LENGTH,
            ego_width: VEHICLE_WIDTH,
            lead: self.lead.map(|l| AgentObs {
                s: l.s,
                speed: l.speed,
                lane_offset: 0.0,
                length: VEHICLE_LENGTH,
                width: VEHICLE_WIDTH,
            }),
            obstacles: self
                .obstacles
                .iter()
                .map(|ob| ObstacleObs {
                    s_start: ob.s_start,
                    s_end: ob.s_end,
                    lane_offset: 0.0,
                    width: VEHICLE_WIDTH,
                })
                .collect(),
            target_speed: self.active_target_speed,
            behavior: self.active_behavior,
        }
    }

    /// The current state as a log frame. Logged speed is the magnitude of
    /// the 2D velocity (longitudinal plus lateral rate).
    pub fn frame_record(&self) -> Frame {
        let lead_pos = self.lead.map(|l| self.route.point_at(l.s));
        Frame {
            frame: self.frame,
            t: self.t,
            ego_x: self.ego.pos.x,
            ego_y: self.ego.pos.y,
            ego_speed: self.ego.v_long.hypot(self.ego.lat_rate),
            ego_accel: self.ego.accel,
            ego_lane_offset: self.ego.lane_offset,
            lead_x: lead_pos.map(|p| p.x),
            lead_y: lead_pos.map(|p| p.y),
            lead_speed: self.lead.map(|l| l.speed),
            active_target_speed: self.active_target_speed,
            active_behavior: self.active_behavior,
        }
    }

    fn meta(&self) -> LogMeta {
        LogMeta {
            route_id: self.route_id.clone(),
            seed: self.seed,
            config_digest: self.config_digest.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EpisodeStatus {
    Completed,
    TimedOut,
    Collision,
    Aborted(String),
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub log: TrajectoryLog,
    pub outcomes: Vec<ScenarioOutcome>,
    pub collisions: u32,
    pub status: EpisodeStatus,
}

/// Run one closed-loop episode to route completion, timeout, or terminal
/// collision. A policy error aborts the episode with the partial log kept.
pub fn run_episode(cfg: &ScenarioConfig, policy: &mut dyn Policy) -> Result<EpisodeResult, SimError> {
    let mut world = World::new(cfg)?;
    let mut frames = vec![world.frame_record()];
    let mut aborted = None;

    while !world.is_terminal() {
        match policy.decide(&world.observation()) {
            Ok(cmd) => {
                world.step(cmd)?;
                frames.push(world.frame_record());
            }
            Err(e) => {
                aborted = Some(e.to_string());
                break;
            }
        }
    }

    let status = match (aborted, world.end()) {
        (Some(msg), _) => EpisodeStatus::Aborted(msg),
        (None, Some(EpisodeEnd::Completed)) => EpisodeStatus::Completed,
        (None, Some(EpisodeEnd::TimedOut)) => EpisodeStatus::TimedOut,
        (None, Some(EpisodeEnd::Collision)) => EpisodeStatus::Collision,
        (None, None) => unreachable!("loop exits only on terminal or abort"),
    };
    Ok(EpisodeResult {
        log: TrajectoryLog {
            meta: world.meta(),
            frames,
        },
        outcomes: world.outcomes(),
        collisions: world.collisions(),
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Difficulty, OvertakeSpec};
    use crate::route::SpeedSegment;

    fn straight_cfg(difficulty: Difficulty, scenarios: Vec<OvertakeSpec>) -> ScenarioConfig {
        let waypoints = (0..=120).map(|i| Vec2::new(i as f64 * 5.0, 0.0)).collect();
        ScenarioConfig {
            route_id: "test".to_string(),
            difficulty,
            waypoints,
            speed_segments: vec![SpeedSegment::new(0.0, 1.0, 8.0)],
            scenarios,
            obstacles: vec![],
            default_speed: 6.0,
            seed: 7,
            weather: "clear".to_string(),
        }
    }

    fn overtake_spec(trigger: f64, behavior: Behavior) -> OvertakeSpec {
        OvertakeSpec {
            trigger_progress: trigger,
            lead_speed: 3.0,
            spawn_distance: 25.0,
            behavior,
            frequency: None,
            timeout: 120.0,
        }
    }

    struct Constant(Command);
    impl Policy for Constant {
        fn decide(&mut self, _obs: &Observation) -> Result<Command, PolicyError> {
            Ok(self.0)
        }
    }

    #[test]
    fn easy_route_never_spawns_lead() {
        let cfg = straight_cfg(Difficulty::Easy, vec![]);
        let mut policy = Constant(Command { accel: 1.0, lane_rate: 0.0 });
        let result = run_episode(&cfg, &mut policy).unwrap();
        assert!(result.log.frames.iter().all(|f| f.lead_x.is_none()));
        assert!(result.outcomes.is_empty());
    }

    #[test]
    fn immediate_trigger_spawns_lead_on_first_step() {
        let cfg = straight_cfg(
            Difficulty::Medium,
            vec![overtake_spec(0.0, Behavior::Follow)],
        );
        let mut world = World::new(&cfg).unwrap();
        assert!(world.observation().lead.is_none());
        world.step(Command::default()).unwrap();
        let lead = world.observation().lead.expect("lead spawned");
        assert!((lead.s - 25.0).abs() < 1e-12);
    }

    #[test]
    fn constant_speed_advances_half_meter_per_step() {
        let cfg = straight_cfg(Difficulty::Easy, vec![]);
        let mut world = World::new(&cfg).unwrap();
        // Reach 5 m/s first (accelerate 2.5 m/s^2 for 2 s), then coast.
        for _ in 0..20 {
            world.step(Command { accel: 2.5, lane_rate: 0.0 }).unwrap();
        }
        let before = world.frame_record();
        assert!((before.ego_speed - 5.0).abs() < 1e-9);
        world.step(Command::default()).unwrap();
        let after = world.frame_record();
        let step = Vec2::new(after.ego_x - before.ego_x, after.ego_y - before.ego_y).norm();
        assert!((step - 0.5).abs() < 1e-9, "step {step}");
    }

    #[test]
    fn passing_lead_completes_scenario_with_finished_ahead() {
        let mut spec = overtake_spec(0.0, Behavior::Overtake);
        spec.lead_speed = 1.0;
        spec.spawn_distance = 10.0;
        let cfg = straight_cfg(Difficulty::Medium, vec![spec]);
        let mut world = World::new(&cfg).unwrap();
        // Drive fast in the adjacent lane until well past the lead.
        world.step(Command { accel: 0.0, lane_rate: 2.0 }).unwrap();
        for _ in 0..200 {
            if world.is_terminal() {
                break;
            }
            let obs = world.observation();
            let lane_rate = if obs.ego_lane_offset < 3.0 { 2.0 } else { 0.0 };
            world.step(Command { accel: 4.0, lane_rate }).unwrap();
            if let Some(lead) = world.observation().lead {
                if world.observation().ego_s > lead.s + VEHICLE_LENGTH + 1.0 {
                    break;
                }
            }
        }
        let outcome = world.outcomes()[0];
        assert!(outcome.triggered);
        assert!(outcome.ego_finished_ahead, "{outcome:?}");
        assert!(outcome.ego_ever_passed);
        assert!(!outcome.collision);
    }

    #[test]
    fn scenario_timeout_marks_timed_out() {
        let mut spec = overtake_spec(0.0, Behavior::Overtake);
        spec.timeout = 1.0;
        let cfg = straight_cfg(Difficulty::Medium, vec![spec]);
        let mut world = World::new(&cfg).unwrap();
        for _ in 0..15 {
            world.step(Command::default()).unwrap();
        }
        let outcome = world.outcomes()[0];
        assert!(outcome.triggered);
        assert!(outcome.timed_out);
        assert!(!outcome.ego_finished_ahead);
    }

    #[test]
    fn inert_policy_times_out_with_zero_progress() {
        let cfg = straight_cfg(Difficulty::Easy, vec![]);
        let mut policy = Constant(Command::default());
        let result = run_episode(&cfg, &mut policy).unwrap();
        assert_eq!(result.status, EpisodeStatus::TimedOut);
        let last = result.log.frames.last().unwrap();
        assert_eq!(last.ego_x, 0.0);
        // Global timeout for this route: 600 m / (0.3 * 6 m/s).
        assert!((last.t - 600.0 / 1.8).abs() < 0.11);
    }

    #[test]
    fn identical_runs_serialize_identically() {
        let cfg = straight_cfg(
            Difficulty::Medium,
            vec![overtake_spec(0.2, Behavior::Follow)],
        );
        let run = |cfg: &ScenarioConfig| {
            let mut policy = Constant(Command { accel: 0.9, lane_rate: 0.1 });
            run_episode(cfg, &mut policy).unwrap().log.to_jsonl()
        };
        assert_eq!(run(&cfg), run(&cfg));
    }

    #[test]
    fn frames_are_contiguous_and_evenly_spaced() {
        let cfg = straight_cfg(Difficulty::Easy, vec![]);
        let mut policy = Constant(Command { accel: 4.0, lane_rate: 0.0 });
        let result = run_episode(&cfg, &mut policy).unwrap();
        for (i, f) in result.log.frames.iter().enumerate() {
            assert_eq!(f.frame, i as u64);
            assert!((f.t - i as f64 * DT).abs() < 1e-12);
        }
        assert_eq!(result.status, EpisodeStatus::Completed);
    }

    #[test]
    fn kinematic_consistency_under_erratic_commands() {
        let cfg = straight_cfg(Difficulty::Easy, vec![]);
        let mut world = World::new(&cfg).unwrap();
        let mut frames = vec![world.frame_record()];
        // Deterministic pseudo-erratic command sequence, including abrupt
        // lateral direction flips at low speed.
        for k in 0..400u64 {
            if world.is_terminal() {
                break;
            }
            let accel = ((k % 17) as f64 - 8.0) / 2.0;
            let lane_rate = if k % 13 < 6 { 2.0 } else { -2.0 };
            world.step(Command { accel, lane_rate }).unwrap();
            frames.push(world.frame_record());
        }
        for pair in frames.windows(2) {
            let d = Vec2::new(pair[1].ego_x - pair[0].ego_x, pair[1].ego_y - pair[0].ego_y).norm();
            let bound = 0.5 * (pair[0].ego_speed + pair[1].ego_speed) * DT + 1e-6;
            assert!(d <= bound, "step {} exceeds bound {}", d, bound);
        }
    }

    #[test]
    fn step_after_end_is_an_error() {
        let cfg = straight_cfg(Difficulty::Easy, vec![]);
        let mut world = World::new(&cfg).unwrap();
        while !world.is_terminal() {
            world.step(Command { accel: 4.0, lane_rate: 0.0 }).unwrap();
        }
        assert!(matches!(
            world.step(Command::default()),
            Err(SimError::SimEnded)
        ));
    }

    #[test]
    fn collision_with_lead_terminates_episode() {
        let mut spec = overtake_spec(0.0, Behavior::Follow);
        spec.lead_speed = 0.5;
        spec.spawn_distance = 12.0;
        let cfg = straight_cfg(Difficulty::Medium, vec![spec]);
        let mut policy = Constant(Command { accel: 4.0, lane_rate: 0.0 });
        let result = run_episode(&cfg, &mut policy).unwrap();
        assert_eq!(result.status, EpisodeStatus::Collision);
        assert_eq!(result.collisions, 1);
        assert!(result.outcomes[0].collision);
    }

    #[test]
    fn follow_behind_never_counts_as_passed() {
        let cfg = straight_cfg(
            Difficulty::Medium,
            vec![overtake_spec(0.0, Behavior::Follow)],
        );
        // Match the lead speed exactly; ego stays behind for the whole run.
        struct MatchLead;
        impl Policy for MatchLead {
            fn decide(&mut self, obs: &Observation) -> Result<Command, PolicyError> {
                let target = obs.lead.map(|l| l.speed).unwrap_or(obs.target_speed);
                let accel = ((target - obs.ego_speed) / obs.dt).clamp(-ACCEL_LIMIT, ACCEL_LIMIT);
                Ok(Command { accel, lane_rate: 0.0 })
            }
        }
        let result = run_episode(&cfg, &mut MatchLead).unwrap();
        assert!(!result.outcomes[0].ego_ever_passed);
        assert!(!result.outcomes[0].collision);
    }
}
