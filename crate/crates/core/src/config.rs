//! Route configuration files: parsing, validation, and canonical
//! serialization.
//!
//! The on-disk format is a small XML dialect:
//!
//! ```xml
//! <route id="route_0000" difficulty="medium" seed="7" weather="clear" default_speed="6.000000">
//!   <waypoints>
//!     <wp x="0.000000" y="0.000000"/>
//!     <wp x="5.000000" y="0.000000"/>
//!   </waypoints>
//!   <speed from="0.000000" to="0.500000" v="8.000000"/>
//!   <scenario type="overtake_route" behavior="overtake" trigger="0.400000"
//!             speed="4.000000" distance="25.000000" timeout="120.000000"/>
//!   <obstacle from="0.200000" to="0.215000"/>
//! </route>
//! ```
//!
//! `<speed>` bounds and `<obstacle>` bounds are normalized route progress in
//! [0, 1]. `<scenario>` carries the lead-vehicle parameters: `speed` is the
//! lead's cruising speed, `distance` the spawn distance ahead of the trigger
//! point, `frequency` an optional oncoming-spawn rate that is parsed but not
//! simulated. Unknown elements are skipped with a recorded warning.

use crate::route::{Route, RouteError, SpeedPlan, SpeedSegment};
use crate::vec2::Vec2;
use quick_xml::escape::escape;
use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation error: {0}")]
    Validation(String),
}

impl From<RouteError> for ConfigError {
    fn from(e: RouteError) -> Self {
        ConfigError::Validation(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }

    pub fn parse(s: &str) -> Option<Difficulty> {
        match s {
            "easy" => Some(Difficulty::Easy),
            "medium" => Some(Difficulty::Medium),
            "hard" => Some(Difficulty::Hard),
            _ => None,
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Behavior {
    Overtake,
    Follow,
}

impl Behavior {
    pub fn as_str(self) -> &'static str {
        match self {
            Behavior::Overtake => "overtake",
            Behavior::Follow => "follow",
        }
    }

    pub fn parse(s: &str) -> Option<Behavior> {
        match s {
            "overtake" => Some(Behavior::Overtake),
            "follow" => Some(Behavior::Follow),
            _ => None,
        }
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Lead-vehicle scenario parameters for one overtake/follow event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OvertakeSpec {
    /// Normalized route progress at which the scenario activates.
    pub trigger_progress: f64,
    /// Cruising speed of the lead vehicle (m/s).
    pub lead_speed: f64,
    /// Spawn distance ahead of the trigger point (m).
    pub spawn_distance: f64,
    pub behavior: Behavior,
    /// Oncoming-vehicle spawn rate (1/s); parsed but the two-way variant is
    /// not simulated.
    pub frequency: Option<f64>,
    /// Scenario timeout measured from activation (s).
    pub timeout: f64,
}

/// Static obstacle blocking the ego lane over a normalized progress interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    pub s_start: f64,
    pub s_end: f64,
}

/// Parsed and validated route configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub route_id: String,
    pub difficulty: Difficulty,
    pub waypoints: Vec<Vec2>,
    pub speed_segments: Vec<SpeedSegment>,
    pub scenarios: Vec<OvertakeSpec>,
    pub obstacles: Vec<ObstacleSpec>,
    pub default_speed: f64,
    pub seed: u64,
    pub weather: String,
}

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

impl ScenarioConfig {
    /// Parse a configuration document. Returns the config plus warnings for
    /// any unknown elements that were skipped.
    pub fn parse(text: &str) -> Result<(ScenarioConfig, Vec<String>), ConfigError> {
        let mut reader = Reader::from_str(text);
        reader.config_mut().trim_text(true);

        let mut warnings = Vec::new();
        let mut route_attrs: Option<AttrMap> = None;
        let mut waypoints: Vec<Vec2> = Vec::new();
        let mut saw_waypoints = false;
        let mut speed_segments = Vec::new();
        let mut scenarios = Vec::new();
        let mut obstacles = Vec::new();

        let mut in_route = false;
        let mut in_waypoints = false;
        loop {
            let event = reader
                .read_event()
                .map_err(|e| ConfigError::Parse(e.to_string()))?;
            match event {
                Event::Start(ref e) | Event::Empty(ref e) => {
                    let empty = matches!(event, Event::Empty(_));
                    let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                    match (in_route, in_waypoints, name.as_str()) {
                        (false, _, "route") => {
                            route_attrs = Some(AttrMap::read(e)?);
                            in_route = !empty;
                        }
                        (true, false, "waypoints") => {
                            saw_waypoints = true;
                            in_waypoints = !empty;
                        }
                        (true, true, "wp") => {
                            let attrs = AttrMap::read(e)?;
                            waypoints.push(Vec2::new(attrs.f64("wp", "x")?, attrs.f64("wp", "y")?));
                            if !empty {
                                skip_subtree(&mut reader, e.name().as_ref())?;
                            }
                        }
                        (true, false, "speed") => {
                            let attrs = AttrMap::read(e)?;
                            speed_segments.push(SpeedSegment::new(
                                attrs.f64("speed", "from")?,
                                attrs.f64("speed", "to")?,
                                attrs.f64("speed", "v")?,
                            ));
                            if !empty {
                                skip_subtree(&mut reader, e.name().as_ref())?;
                            }
                        }
                        (true, false, "scenario") => {
                            let attrs = AttrMap::read(e)?;
                            let behavior_raw = attrs.string("scenario", "behavior")?;
                            let behavior = Behavior::parse(&behavior_raw).ok_or_else(|| {
                                ConfigError::Validation(format!(
                                    "unknown scenario behavior '{behavior_raw}'"
                                ))
                            })?;
                            scenarios.push(OvertakeSpec {
                                trigger_progress: attrs.f64("scenario", "trigger")?,
                                lead_speed: attrs.f64("scenario", "speed")?,
                                spawn_distance: attrs.f64("scenario", "distance")?,
                                behavior,
                                frequency: attrs.opt_f64("scenario", "frequency")?,
                                timeout: attrs.f64("scenario", "timeout")?,
                            });
                            if !empty {
                                skip_subtree(&mut reader, e.name().as_ref())?;
                            }
                        }
                        (true, false, "obstacle") => {
                            let attrs = AttrMap::read(e)?;
                            obstacles.push(ObstacleSpec {
                                s_start: attrs.f64("obstacle", "from")?,
                                s_end: attrs.f64("obstacle", "to")?,
                            });
                            if !empty {
                                skip_subtree(&mut reader, e.name().as_ref())?;
                            }
                        }
                        _ => {
                            warnings.push(format!("ignored unknown element <{name}>"));
                            if !empty {
                                skip_subtree(&mut reader, e.name().as_ref())?;
                            }
                        }
                    }
                }
                Event::End(ref e) => match e.name().as_ref() {
                    b"waypoints" => in_waypoints = false,
                    b"route" => break,
                    _ => {}
                },
                Event::Eof => break,
                _ => {}
            }
        }

        let attrs = route_attrs
            .ok_or_else(|| ConfigError::Schema("missing <route> element".to_string()))?;
        if !saw_waypoints {
            return Err(ConfigError::Schema("missing <waypoints> element".to_string()));
        }

        let difficulty_raw = attrs.string("route", "difficulty")?;
        let difficulty = Difficulty::parse(&difficulty_raw).ok_or_else(|| {
            ConfigError::Validation(format!("unknown difficulty '{difficulty_raw}'"))
        })?;
        let cfg = ScenarioConfig {
            route_id: attrs.string("route", "id")?,
            difficulty,
            waypoints,
            speed_segments,
            scenarios,
            obstacles,
            default_speed: attrs.f64("route", "default_speed")?,
            seed: attrs.u64("route", "seed")?,
            weather: attrs.string("route", "weather")?,
        };
        cfg.validate()?;
        Ok((cfg, warnings))
    }

    /// Semantic validation beyond well-formedness.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let route = Route::new(self.waypoints.clone())?;
        SpeedPlan::build(&route, &self.speed_segments, self.default_speed)?;
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.default_speed) {
            return Err(ConfigError::Validation(format!(
                "default_speed {} must be > 0",
                self.default_speed
            )));
        }
        if self.difficulty == Difficulty::Easy && !self.scenarios.is_empty() {
            return Err(ConfigError::Validation(
                "easy routes must not contain scenarios".to_string(),
            ));
        }
        for sc in &self.scenarios {
            if !(0.0..=1.0).contains(&sc.trigger_progress) {
                return Err(ConfigError::Validation(format!(
                    "scenario trigger {} outside [0, 1]",
                    sc.trigger_progress
                )));
            }
            if !positive(sc.lead_speed) {
                return Err(ConfigError::Validation(format!(
                    "scenario lead speed {} must be > 0",
                    sc.lead_speed
                )));
            }
            if !positive(sc.spawn_distance) {
                return Err(ConfigError::Validation(format!(
                    "scenario spawn distance {} must be > 0",
                    sc.spawn_distance
                )));
            }
            if !positive(sc.timeout) {
                return Err(ConfigError::Validation(format!(
                    "scenario timeout {} must be > 0",
                    sc.timeout
                )));
            }
        }
        for ob in &self.obstacles {
            if !(0.0 <= ob.s_start && ob.s_start < ob.s_end && ob.s_end <= 1.0) {
                return Err(ConfigError::Validation(format!(
                    "obstacle interval [{}, {}] must satisfy 0 <= from < to <= 1",
                    ob.s_start, ob.s_end
                )));
            }
        }
        Ok(())
    }

    /// Canonical XML serialization: fixed element ordering (waypoints, speed
    /// segments by start, scenarios by trigger, obstacles by start) and
    /// six-decimal numeric formatting. Reparsing the output yields an equal
    /// config whenever the numeric fields carry at most six decimals, which
    /// holds for everything this crate generates or parses.
    pub fn to_xml(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "<route id=\"{}\" difficulty=\"{}\" seed=\"{}\" weather=\"{}\" default_speed=\"{}\">\n",
            escape(&self.route_id),
            self.difficulty,
            self.seed,
            escape(&self.weather),
            f6(self.default_speed),
        ));
        out.push_str("  <waypoints>\n");
        for wp in &self.waypoints {
            out.push_str(&format!("    <wp x=\"{}\" y=\"{}\"/>\n", f6(wp.x), f6(wp.y)));
        }
        out.push_str("  </waypoints>\n");

        let mut segments = self.speed_segments.clone();
        segments.sort_by(|a, b| a.s_start.total_cmp(&b.s_start));
        for seg in &segments {
            out.push_str(&format!(
                "  <speed from=\"{}\" to=\"{}\" v=\"{}\"/>\n",
                f6(seg.s_start),
                f6(seg.s_end),
                f6(seg.v)
            ));
        }

        let mut scenarios = self.scenarios.clone();
        scenarios.sort_by(|a, b| a.trigger_progress.total_cmp(&b.trigger_progress));
        for sc in &scenarios {
            let freq = match sc.frequency {
                Some(f) => format!(" frequency=\"{}\"", f6(f)),
                None => String::new(),
            };
            out.push_str(&format!(
                "  <scenario type=\"overtake_route\" behavior=\"{}\" trigger=\"{}\" speed=\"{}\" distance=\"{}\"{} timeout=\"{}\"/>\n",
                sc.behavior,
                f6(sc.trigger_progress),
                f6(sc.lead_speed),
                f6(sc.spawn_distance),
                freq,
                f6(sc.timeout)
            ));
        }

        let mut obstacles = self.obstacles.clone();
        obstacles.sort_by(|a, b| a.s_start.total_cmp(&b.s_start));
        for ob in &obstacles {
            out.push_str(&format!(
                "  <obstacle from=\"{}\" to=\"{}\"/>\n",
                f6(ob.s_start),
                f6(ob.s_end)
            ));
        }

        out.push_str("</route>\n");
        out
    }

    /// SHA-256 of the canonical serialization, as lowercase hex.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_xml().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn route(&self) -> Result<Route, ConfigError> {
        Ok(Route::new(self.waypoints.clone())?)
    }

    pub fn speed_plan(&self, route: &Route) -> Result<SpeedPlan, ConfigError> {
        Ok(SpeedPlan::build(route, &self.speed_segments, self.default_speed)?)
    }
}

struct AttrMap {
    attrs: Vec<(String, String)>,
}

impl AttrMap {
    fn read(e: &quick_xml::events::BytesStart) -> Result<AttrMap, ConfigError> {
        let mut attrs = Vec::new();
        for attr in e.attributes() {
            let attr = attr.map_err(|err| ConfigError::Parse(err.to_string()))?;
            let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
            let value = attr
                .unescape_value()
                .map_err(|err| ConfigError::Parse(err.to_string()))?
                .into_owned();
            attrs.push((key, value));
        }
        Ok(AttrMap { attrs })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn string(&self, elem: &str, key: &str) -> Result<String, ConfigError> {
        self.get(key).map(str::to_owned).ok_or_else(|| {
            ConfigError::Schema(format!("<{elem}> missing attribute '{key}'"))
        })
    }

    fn f64(&self, elem: &str, key: &str) -> Result<f64, ConfigError> {
        self.string(elem, key)?.parse().map_err(|_| {
            ConfigError::Schema(format!("<{elem}> attribute '{key}' is not a number"))
        })
    }

    fn opt_f64(&self, elem: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                ConfigError::Schema(format!("<{elem}> attribute '{key}' is not a number"))
            }),
        }
    }

    fn u64(&self, elem: &str, key: &str) -> Result<u64, ConfigError> {
        self.string(elem, key)?.parse().map_err(|_| {
            ConfigError::Schema(format!(
                "<{elem}> attribute '{key}' is not an unsigned integer"
            ))
        })
    }
}

fn skip_subtree(reader: &mut Reader<&[u8]>, name: &[u8]) -> Result<(), ConfigError> {
    reader
        .read_to_end(quick_xml::name::QName(name))
        .map(|_| ())
        .map_err(|e| ConfigError::Parse(e.to_string()))
}
