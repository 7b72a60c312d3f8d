//! Closed-loop evaluation engine for desired-speed-conditioned driving.
//!
//! The crate provides a lightweight kinematic simulator with overtake/follow
//! scenarios, a rule-based speed-conditioned expert policy, command-adherence
//! metrics, and a virtual-target-speed re-annotation pipeline.

pub mod annotate;
pub mod config;
pub mod expert;
pub mod log;
pub mod metrics;
pub mod route;
pub mod sim;
pub mod suite;
pub mod vec2;

pub use config::{Behavior, ConfigError, Difficulty, ObstacleSpec, OvertakeSpec, ScenarioConfig};
pub use route::{Route, RouteError, SpeedPlan, SpeedSegment};
pub use vec2::Vec2;
