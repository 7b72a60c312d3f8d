//! Dependency-free SVG rendering of speed profiles: actual speed and the
//! plan's target speed against route arc-length.

use crate::CmdError;
use speedbench_core::config::ScenarioConfig;
use speedbench_core::log::TrajectoryLog;
use speedbench_core::vec2::Vec2;
use std::fmt::Write;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 450.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;

struct Axes {
    s_max: f64,
    v_max: f64,
}

impl Axes {
    fn x(&self, s: f64) -> f64 {
        MARGIN_LEFT + (s / self.s_max) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM - (v / self.v_max) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn polyline(points: &[(f64, f64)], axes: &Axes, stroke: &str) -> String {
    let coords: Vec<String> = points
        .iter()
        .map(|&(s, v)| format!("{:.2},{:.2}", axes.x(s), axes.y(v)))
        .collect();
    format!(
        "  <polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        stroke,
        coords.join(" ")
    )
}

/// Render actual vs. target speed over arc-length for one log.
pub fn speed_profile_svg(cfg: &ScenarioConfig, log: &TrajectoryLog) -> Result<String, CmdError> {
    let route = cfg.route()?;
    let plan = cfg.speed_plan(&route)?;
    let length = route.total_length();

    let actual: Vec<(f64, f64)> = log
        .frames
        .iter()
        .map(|f| (route.project(Vec2::new(f.ego_x, f.ego_y)), f.ego_speed))
        .collect();
    let samples = 400;
    let target: Vec<(f64, f64)> = (0..=samples)
        .map(|i| {
            let s = length * i as f64 / samples as f64;
            (s, plan.speed_at_arc(s))
        })
        .collect();

    let v_max = actual
        .iter()
        .chain(&target)
        .map(|&(_, v)| v)
        .fold(1.0, f64::max)
        * 1.15;
    let axes = Axes {
        s_max: length.max(1.0),
        v_max,
    };

    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    )
    .unwrap();
    writeln!(svg, "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>").unwrap();
    writeln!(
        svg,
        "  <text x=\"{:.0}\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\">{} — speed profile</text>",
        MARGIN_LEFT,
        xml_escape(&cfg.route_id)
    )
    .unwrap();

    // Axis frame and ticks.
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    writeln!(
        svg,
        "  <line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x1:.1}\" y2=\"{y0:.1}\" stroke=\"black\"/>"
    )
    .unwrap();
    writeln!(
        svg,
        "  <line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x0:.1}\" y2=\"{y1:.1}\" stroke=\"black\"/>"
    )
    .unwrap();
    for i in 0..=5 {
        let s = axes.s_max * i as f64 / 5.0;
        let x = axes.x(s);
        writeln!(
            svg,
            "  <line x1=\"{x:.1}\" y1=\"{y0:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
            y0 + 4.0
        )
        .unwrap();
        writeln!(
            svg,
            "  <text x=\"{x:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{s:.0}</text>",
            y0 + 18.0
        )
        .unwrap();
        let v = axes.v_max * i as f64 / 5.0;
        let y = axes.y(v);
        writeln!(
            svg,
            "  <line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{x0:.1}\" y2=\"{y:.1}\" stroke=\"black\"/>",
            x0 - 4.0
        )
        .unwrap();
        writeln!(
            svg,
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{v:.1}</text>",
            x0 - 8.0,
            y + 4.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        "  <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">arc length (m)</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0
    )
    .unwrap();
    writeln!(
        svg,
        "  <text x=\"16\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">speed (m/s)</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    )
    .unwrap();

    svg.push_str(&polyline(&target, &axes, "#e08214"));
    svg.push_str(&polyline(&actual, &axes, "#2166ac"));

    // Legend.
    writeln!(
        svg,
        "  <line x1=\"{:.0}\" y1=\"{y1}\" x2=\"{:.0}\" y2=\"{y1}\" stroke=\"#e08214\" stroke-width=\"1.5\"/>\n  <text x=\"{:.0}\" y=\"{:.0}\" font-family=\"sans-serif\" font-size=\"11\">target</text>",
        x1 - 150.0,
        x1 - 120.0,
        x1 - 114.0,
        y1 + 4.0
    )
    .unwrap();
    writeln!(
        svg,
        "  <line x1=\"{:.0}\" y1=\"{:.0}\" x2=\"{:.0}\" y2=\"{:.0}\" stroke=\"#2166ac\" stroke-width=\"1.5\"/>\n  <text x=\"{:.0}\" y=\"{:.0}\" font-family=\"sans-serif\" font-size=\"11\">actual</text>",
        x1 - 150.0,
        y1 + 16.0,
        x1 - 120.0,
        y1 + 16.0,
        x1 - 114.0,
        y1 + 20.0
    )
    .unwrap();

    svg.push_str("</svg>\n");
    Ok(svg)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
