//! Deterministic evaluation-suite generation.
//!
//! Routes are drawn from four layout templates per difficulty (straights,
//! gentle curves, 90-degree turns), each paired with a fresh set of speed
//! commands. Medium routes add one overtake/follow scenario; hard routes add
//! a static lane-blocking obstacle ahead of the scenario. All draws come
//! from per-route ChaCha streams, so a suite is a pure function of
//! (difficulty, count, seed) and a longer suite extends a shorter one.

use crate::config::{Behavior, Difficulty, ObstacleSpec, OvertakeSpec, ScenarioConfig};
use crate::route::SpeedSegment;
use crate::vec2::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SuiteError {
    #[error("invalid count: {0} (need >= 1)")]
    InvalidCount(usize),
}

/// Lower bound for sampled lead speeds (m/s).
pub const LEAD_SPEED_FLOOR: f64 = 0.5;
/// Margin keeping the lead slower than the ego target at the trigger (m/s).
pub const LEAD_SPEED_MARGIN: f64 = 1.0;

/// Knobs for suite generation.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    /// Discrete target-speed command set (m/s).
    pub speed_set: Vec<f64>,
    pub weather_set: Vec<String>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            speed_set: vec![4.0, 6.0, 8.0, 10.0, 12.0],
            weather_set: vec![
                "clear".to_string(),
                "cloudy".to_string(),
                "rain".to_string(),
                "fog".to_string(),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Layout {
    Straight,
    Curving,
    LeftTurn,
    RightTurn,
}

fn layouts(difficulty: Difficulty) -> [Layout; 4] {
    match difficulty {
        Difficulty::Easy => [
            Layout::Curving,
            Layout::LeftTurn,
            Layout::Straight,
            Layout::Straight,
        ],
        Difficulty::Medium => [
            Layout::Curving,
            Layout::Straight,
            Layout::RightTurn,
            Layout::Straight,
        ],
        Difficulty::Hard => [
            Layout::Straight,
            Layout::Straight,
            Layout::RightTurn,
            Layout::LeftTurn,
        ],
    }
}

/// Quantize to the six-decimal grid used by the config wire format.
fn q6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn build_waypoints(layout: Layout, rng: &mut ChaCha8Rng) -> Vec<Vec2> {
    const SPACING: f64 = 5.0;
    let mut points = Vec::new();
    let push = |p: Vec2, points: &mut Vec<Vec2>| points.push(Vec2::new(q6(p.x), q6(p.y)));

    match layout {
        Layout::Straight => {
            let length = rng.gen_range(600.0..800.0);
            let n = (length / SPACING) as usize;
            for i in 0..=n {
                push(Vec2::new(i as f64 * SPACING, 0.0), &mut points);
            }
        }
        Layout::Curving => {
            let length = rng.gen_range(600.0..800.0);
            let amplitude = rng.gen_range(8.0..14.0);
            let wavelength = rng.gen_range(180.0..260.0);
            let n = (length / SPACING) as usize;
            for i in 0..=n {
                let x = i as f64 * SPACING;
                let y = amplitude * (std::f64::consts::TAU * x / wavelength).sin();
                push(Vec2::new(x, y), &mut points);
            }
        }
        Layout::LeftTurn | Layout::RightTurn => {
            let sign = if matches!(layout, Layout::LeftTurn) {
                1.0
            } else {
                -1.0
            };
            let pre = rng.gen_range(280.0..360.0);
            let post = rng.gen_range(320.0..420.0);
            let radius = rng.gen_range(15.0..25.0);
            let n_pre = (pre / SPACING) as usize;
            for i in 0..=n_pre {
                push(Vec2::new(i as f64 * SPACING, 0.0), &mut points);
            }
            let corner = Vec2::new(n_pre as f64 * SPACING, 0.0);
            let center = corner + Vec2::new(0.0, sign * radius);
            let arc_steps = (radius * std::f64::consts::FRAC_PI_2 / 4.0).ceil() as usize;
            for k in 1..=arc_steps {
                let theta = std::f64::consts::FRAC_PI_2 * k as f64 / arc_steps as f64;
                let p = Vec2::new(
                    center.x + radius * theta.sin(),
                    center.y - sign * radius * theta.cos(),
                );
                push(p, &mut points);
            }
            let exit = Vec2::new(center.x + radius, center.y);
            let n_post = (post / SPACING) as usize;
            for i in 1..=n_post {
                push(exit + Vec2::new(0.0, sign * i as f64 * SPACING), &mut points);
            }
        }
    }
    points
}

fn pick<T: Clone>(rng: &mut ChaCha8Rng, items: &[T]) -> T {
    items[rng.gen_range(0..items.len())].clone()
}

fn generate_config(
    difficulty: Difficulty,
    index: usize,
    seed: u64,
    options: &SuiteOptions,
) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);

    let layout = layouts(difficulty)[index % 4];
    let waypoints = build_waypoints(layout, &mut rng);
    let route = crate::route::Route::new(waypoints.clone()).expect("template route is valid");
    let length = route.total_length();

    // Two speed segments split near the middle; the second speed always
    // differs from the first so every route exercises a command change.
    let boundary = q6(rng.gen_range(0.4..0.6));
    let v1 = pick(&mut rng, &options.speed_set);
    let mut v2 = pick(&mut rng, &options.speed_set);
    if v2 == v1 {
        let pos = options.speed_set.iter().position(|&v| v == v1).unwrap();
        v2 = options.speed_set[(pos + 1) % options.speed_set.len()];
    }
    let speed_segments = vec![
        SpeedSegment::new(0.0, boundary, v1),
        SpeedSegment::new(boundary, 1.0, v2),
    ];

    let mut obstacles = Vec::new();
    let mut min_trigger = 0.30;
    if difficulty == Difficulty::Hard {
        let ob_start = q6(rng.gen_range(0.15..0.22));
        let span = rng.gen_range(8.0..12.0) / length;
        let ob_end = q6(ob_start + span);
        obstacles.push(ObstacleSpec {
            s_start: ob_start,
            s_end: ob_end,
        });
        // The lead spawns past the obstacle: leave room for the ego to
        // merge back before the scenario region begins.
        min_trigger = ob_end + 45.0 / length;
    }

    let mut scenarios = Vec::new();
    if difficulty != Difficulty::Easy {
        let trigger = q6(rng.gen_range(min_trigger..0.55));
        let plan = crate::route::SpeedPlan::build(&route, &speed_segments, 6.0).unwrap();
        // The lead must stay slower than the ego's command over the whole
        // scenario span (trigger to route end), not just at the trigger;
        // otherwise a later slow segment would leave the ego unable to pass
        // and the constant-speed lead could rear-end it.
        let mut v_floor = plan.speed_at_arc(trigger * length);
        for (&(_, v), &d) in plan.entries().iter().zip(route.cum_dist().iter()) {
            if d >= trigger * length {
                v_floor = v_floor.min(v);
            }
        }
        let lead_speed = q6(rng.gen_range(
            LEAD_SPEED_FLOOR..(v_floor - LEAD_SPEED_MARGIN),
        ))
        .min(v_floor - LEAD_SPEED_MARGIN);
        let behavior = if index.is_multiple_of(2) {
            Behavior::Overtake
        } else {
            Behavior::Follow
        };
        scenarios.push(OvertakeSpec {
            trigger_progress: trigger,
            lead_speed,
            spawn_distance: q6(rng.gen_range(25.0..35.0)),
            behavior,
            frequency: None,
            timeout: q6(rng.gen_range(90.0..150.0)),
        });
    }

    let route_seed: u64 = rng.gen();
    ScenarioConfig {
        route_id: format!("{}_{:04}", difficulty, index),
        difficulty,
        waypoints,
        speed_segments,
        scenarios,
        obstacles,
        default_speed: 6.0,
        seed: route_seed,
        weather: pick(&mut rng, &options.weather_set),
    }
}

/// Generate `count` configs for a difficulty, deterministic in the seed.
pub fn generate_suite(
    difficulty: Difficulty,
    count: usize,
    seed: u64,
) -> Result<Vec<ScenarioConfig>, SuiteError> {
    generate_suite_with(difficulty, count, seed, &SuiteOptions::default())
}

pub fn generate_suite_with(
    difficulty: Difficulty,
    count: usize,
    seed: u64,
    options: &SuiteOptions,
) -> Result<Vec<ScenarioConfig>, SuiteError> {
    if count < 1 {
        return Err(SuiteError::InvalidCount(count));
    }
    Ok((0..count)
        .map(|i| generate_config(difficulty, i, seed, options))
        .collect())
}
