//! Command implementations behind the `speedbench` binary: suite
//! generation, closed-loop runs, scoring, re-annotation, and speed-profile
//! plots. Each command is an ordinary function so integration tests drive
//! them directly.

pub mod plot;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use speedbench_core::annotate::{speeds_from_csv, virtual_target_speed, Preset};
use speedbench_core::config::{ConfigError, ScenarioConfig};
use speedbench_core::expert::{
    ExpertParams, ExpertPolicy, FixedSpeedPolicy, InertPolicy, ReplayPolicy,
};
use speedbench_core::log::TrajectoryLog;
use speedbench_core::metrics::{aggregate, score_route, MetricConfig, Rollup, ScoreReport};
use speedbench_core::sim::{run_episode, EpisodeStatus, Policy, ScenarioOutcome};
use speedbench_core::suite::generate_suite;
use speedbench_core::Difficulty;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CmdError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Suite(#[from] speedbench_core::suite::SuiteError),
    #[error(transparent)]
    Sim(#[from] speedbench_core::sim::SimError),
    #[error(transparent)]
    Log(#[from] speedbench_core::log::LogError),
    #[error(transparent)]
    Metrics(#[from] speedbench_core::metrics::MetricsError),
    #[error(transparent)]
    Annotation(#[from] speedbench_core::annotate::AnnotationError),
    #[error("no logs found for routes: {0:?}")]
    MissingLog(Vec<String>),
    #[error("config digest mismatch for route {0}: log was produced from a different config")]
    ConfigMismatch(String),
    #[error("{0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CmdError + '_ {
    move |source| CmdError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CmdError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn read_file(path: &Path) -> Result<String, CmdError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Filesystem-safe name for a route's artifacts; route ids come from config
/// files and may contain characters that do not belong in a filename.
fn safe_name(route_id: &str) -> String {
    route_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn log_file_name(route_id: &str) -> String {
    format!("{}.jsonl", safe_name(route_id))
}

// ---------------------------------------------------------------------------
// Suite files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteIndex {
    pub difficulty: String,
    pub count: usize,
    pub seed: u64,
    pub routes: Vec<SuiteIndexEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteIndexEntry {
    pub id: String,
    pub file: String,
    pub digest: String,
}

/// Generate `count` config files plus an index file into `out_dir`.
pub fn cmd_generate(
    difficulty: Difficulty,
    count: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<SuiteIndex, CmdError> {
    let suite = generate_suite(difficulty, count, seed)?;
    let mut routes = Vec::with_capacity(suite.len());
    for cfg in &suite {
        let file = format!("{}.xml", safe_name(&cfg.route_id));
        write_file(&out_dir.join(&file), &cfg.to_xml())?;
        routes.push(SuiteIndexEntry {
            id: cfg.route_id.clone(),
            file,
            digest: cfg.digest(),
        });
    }
    let index = SuiteIndex {
        difficulty: difficulty.to_string(),
        count,
        seed,
        routes,
    };
    write_file(
        &out_dir.join("index.json"),
        &format!("{}\n", serde_json::to_string_pretty(&index).unwrap()),
    )?;
    Ok(index)
}

/// Load a suite directory: `index.json` order when present, otherwise all
/// `*.xml` files sorted by name. Parse warnings are returned with the route.
pub fn load_suite(dir: &Path) -> Result<(Vec<ScenarioConfig>, Vec<String>), CmdError> {
    let mut files: Vec<PathBuf> = Vec::new();
    let index_path = dir.join("index.json");
    if index_path.is_file() {
        let index: SuiteIndex = serde_json::from_str(&read_file(&index_path)?)
            .map_err(|e| CmdError::Invalid(format!("bad index.json: {e}")))?;
        files.extend(index.routes.iter().map(|r| dir.join(&r.file)));
    } else {
        for entry in fs::read_dir(dir).map_err(io_err(dir))? {
            let path = entry.map_err(io_err(dir))?.path();
            if path.extension().is_some_and(|e| e == "xml") {
                files.push(path);
            }
        }
        files.sort();
    }
    if files.is_empty() {
        return Err(CmdError::Invalid(format!(
            "no route configs found in {}",
            dir.display()
        )));
    }
    let mut configs = Vec::with_capacity(files.len());
    let mut warnings = Vec::new();
    for file in files {
        let (cfg, warns) = ScenarioConfig::parse(&read_file(&file)?)?;
        warnings.extend(
            warns
                .into_iter()
                .map(|w| format!("{}: {w}", file.display())),
        );
        configs.push(cfg);
    }
    Ok((configs, warnings))
}

// ---------------------------------------------------------------------------
// Closed-loop runs
// ---------------------------------------------------------------------------

/// Which controller drives the ego.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Expert,
    Inert,
    Fixed(f64),
    /// Replay logs from a prior run directory (or a single log file).
    Replay(PathBuf),
}

impl PolicySpec {
    pub fn parse(s: &str) -> Result<PolicySpec, CmdError> {
        if s == "expert" {
            return Ok(PolicySpec::Expert);
        }
        if s == "inert" {
            return Ok(PolicySpec::Inert);
        }
        if let Some(v) = s.strip_prefix("fixed:") {
            let cruise: f64 = v
                .parse()
                .map_err(|_| CmdError::Invalid(format!("bad fixed policy speed '{v}'")))?;
            return Ok(PolicySpec::Fixed(cruise));
        }
        if let Some(path) = s.strip_prefix("replay:") {
            return Ok(PolicySpec::Replay(PathBuf::from(path)));
        }
        Err(CmdError::Invalid(format!(
            "unknown policy '{s}' (expected expert | inert | fixed:<m/s> | replay:<path>)"
        )))
    }

    pub fn id(&self) -> String {
        match self {
            PolicySpec::Expert => "expert".to_string(),
            PolicySpec::Inert => "inert".to_string(),
            PolicySpec::Fixed(v) => format!("fixed:{v}"),
            PolicySpec::Replay(p) => format!("replay:{}", p.display()),
        }
    }

    fn build(&self, route_id: &str, params: &ExpertParams) -> Result<Box<dyn Policy>, CmdError> {
        Ok(match self {
            PolicySpec::Expert => Box::new(ExpertPolicy::new(*params)),
            PolicySpec::Inert => Box::new(InertPolicy),
            PolicySpec::Fixed(v) => Box::new(FixedSpeedPolicy::new(*v)),
            PolicySpec::Replay(path) => {
                let log_path = if path.is_dir() {
                    path.join(log_file_name(route_id))
                } else {
                    path.clone()
                };
                Box::new(ReplayPolicy::new(&TrajectoryLog::load(&log_path)?))
            }
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RouteStatus {
    pub route_id: String,
    pub log_file: String,
    pub config_digest: String,
    /// `completed` | `timed_out` | `collision` | `aborted: <reason>`.
    pub status: String,
    pub collisions: u32,
    pub outcomes: Vec<ScenarioOutcome>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub suite_path: String,
    pub policy: String,
    pub seed: u64,
    pub output_dir: String,
    pub routes: Vec<RouteStatus>,
}

impl RunManifest {
    pub fn aborted_routes(&self) -> Vec<&RouteStatus> {
        self.routes
            .iter()
            .filter(|r| r.status.starts_with("aborted"))
            .collect()
    }

    pub fn load(dir: &Path) -> Result<RunManifest, CmdError> {
        let path = dir.join("manifest.json");
        serde_json::from_str(&read_file(&path)?)
            .map_err(|e| CmdError::Invalid(format!("bad manifest.json: {e}")))
    }
}

/// Run one episode per suite route with `jobs` parallel workers, writing one
/// JSONL log per route plus a `manifest.json`. Per-route failures are
/// recorded in the manifest; the run keeps going.
pub fn cmd_run(
    suite_dir: &Path,
    policy: &PolicySpec,
    out_dir: &Path,
    jobs: usize,
    params: &ExpertParams,
) -> Result<RunManifest, CmdError> {
    let (configs, warnings) = load_suite(suite_dir)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let seed = SuiteIndex::load_seed(suite_dir);
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CmdError::Invalid(format!("thread pool: {e}")))?;

    let routes: Vec<RouteStatus> = pool.install(|| {
        configs
            .par_iter()
            .map(|cfg| run_one(cfg, policy, out_dir, params))
            .collect()
    });

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        suite_path: suite_dir.display().to_string(),
        policy: policy.id(),
        seed,
        output_dir: out_dir.display().to_string(),
        routes,
    };
    write_file(
        &out_dir.join("manifest.json"),
        &format!("{}\n", serde_json::to_string_pretty(&manifest).unwrap()),
    )?;
    Ok(manifest)
}

impl SuiteIndex {
    fn load_seed(dir: &Path) -> u64 {
        fs::read_to_string(dir.join("index.json"))
            .ok()
            .and_then(|text| serde_json::from_str::<SuiteIndex>(&text).ok())
            .map(|idx| idx.seed)
            .unwrap_or(0)
    }
}

fn run_one(
    cfg: &ScenarioConfig,
    policy: &PolicySpec,
    out_dir: &Path,
    params: &ExpertParams,
) -> RouteStatus {
    let log_file = log_file_name(&cfg.route_id);
    let digest = cfg.digest();
    let fail = |msg: String| RouteStatus {
        route_id: cfg.route_id.clone(),
        log_file: log_file.clone(),
        config_digest: digest.clone(),
        status: format!("aborted: {msg}"),
        collisions: 0,
        outcomes: vec![],
    };
    let mut boxed = match policy.build(&cfg.route_id, params) {
        Ok(p) => p,
        Err(e) => return fail(e.to_string()),
    };
    let result = match run_episode(cfg, boxed.as_mut()) {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };
    if let Err(e) = result.log.save(&out_dir.join(&log_file)) {
        return fail(e.to_string());
    }
    let status = match &result.status {
        EpisodeStatus::Completed => "completed".to_string(),
        EpisodeStatus::TimedOut => "timed_out".to_string(),
        EpisodeStatus::Collision => "collision".to_string(),
        EpisodeStatus::Aborted(msg) => format!("aborted: {msg}"),
    };
    RouteStatus {
        route_id: cfg.route_id.clone(),
        log_file,
        config_digest: digest,
        status,
        collisions: result.collisions,
        outcomes: result.outcomes,
    }
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub reports: Vec<ScoreReport>,
    pub rollup: Rollup,
}

/// Score every suite route from its log, writing one report JSON per route
/// plus `rollup.csv`. Logs are matched to configs by route id and checked
/// against the config digest recorded at run time.
pub fn cmd_score(
    logs_dir: &Path,
    suite_dir: &Path,
    metric_cfg: &MetricConfig,
    out_dir: &Path,
) -> Result<ScoreSummary, CmdError> {
    let (configs, _) = load_suite(suite_dir)?;

    let missing: Vec<String> = configs
        .iter()
        .filter(|cfg| !logs_dir.join(log_file_name(&cfg.route_id)).is_file())
        .map(|cfg| cfg.route_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(CmdError::MissingLog(missing));
    }
    let manifest = RunManifest::load(logs_dir)?;

    let mut reports = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let log = TrajectoryLog::load(&logs_dir.join(log_file_name(&cfg.route_id)))?;
        if log.meta.config_digest != cfg.digest() {
            return Err(CmdError::ConfigMismatch(cfg.route_id.clone()));
        }
        let status = manifest
            .routes
            .iter()
            .find(|r| r.route_id == cfg.route_id)
            .ok_or_else(|| CmdError::Invalid(format!("{} not in manifest", cfg.route_id)))?;
        let report = score_route(cfg, &log, &status.outcomes, status.collisions, metric_cfg)?;
        write_file(
            &out_dir.join(format!("{}.report.json", safe_name(&cfg.route_id))),
            &format!("{}\n", serde_json::to_string_pretty(&report).unwrap()),
        )?;
        reports.push(report);
    }
    let rollup = aggregate(&reports);
    write_file(&out_dir.join("rollup.csv"), &rollup.to_csv())?;
    Ok(ScoreSummary { reports, rollup })
}

// ---------------------------------------------------------------------------
// Annotation
// ---------------------------------------------------------------------------

/// Annotate a speed trace (JSONL log or CSV with a `v` column) and write the
/// `frame,v,v_tend,v_virt` CSV.
pub fn cmd_annotate(
    input: &Path,
    preset: Preset,
    seed: u64,
    out_csv: &Path,
) -> Result<usize, CmdError> {
    let speeds = if input.extension().is_some_and(|e| e == "jsonl") {
        TrajectoryLog::load(input)?.speeds()
    } else {
        speeds_from_csv(&read_file(input)?)?
    };
    let annotated = virtual_target_speed(&speeds, &preset.params(seed))?;
    write_file(out_csv, &annotated.to_csv())?;
    Ok(annotated.frames.len())
}

// ---------------------------------------------------------------------------
// Plotting
// ---------------------------------------------------------------------------

/// Render the speed profile of a log against its route's plan as an SVG.
pub fn cmd_plot(log_path: &Path, config_path: &Path, out_svg: &Path) -> Result<(), CmdError> {
    let log = TrajectoryLog::load(log_path)?;
    let (cfg, _) = ScenarioConfig::parse(&read_file(config_path)?)?;
    let svg = plot::speed_profile_svg(&cfg, &log)?;
    write_file(out_svg, &svg)
}
