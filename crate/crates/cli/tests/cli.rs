//! Command-level tests: each subcommand's contract on real directories.

use speedbench::{cmd_annotate, cmd_generate, cmd_plot, cmd_run, cmd_score, CmdError, PolicySpec};
use speedbench_core::annotate::Preset;
use speedbench_core::expert::ExpertParams;
use speedbench_core::metrics::MetricConfig;
use speedbench_core::Difficulty;
use std::fs;
use std::path::Path;
use tempfile::tempdir;

fn read_dir_sorted(dir: &Path, ext: &str) -> Vec<std::path::PathBuf> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    files.sort();
    files
}

#[test]
fn generate_writes_count_files_deterministically() {
    let dir = tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    cmd_generate(Difficulty::Easy, 16, 1, &a).unwrap();
    cmd_generate(Difficulty::Easy, 16, 1, &b).unwrap();
    let files_a = read_dir_sorted(&a, "xml");
    assert_eq!(files_a.len(), 16);
    assert!(a.join("index.json").is_file());
    for file in &files_a {
        let other = b.join(file.file_name().unwrap());
        assert_eq!(
            fs::read(file).unwrap(),
            fs::read(&other).unwrap(),
            "bytes differ for {file:?}"
        );
    }
    assert_eq!(
        fs::read(a.join("index.json")).unwrap(),
        fs::read(b.join("index.json")).unwrap()
    );
}

#[test]
fn generate_medium_configs_carry_one_scenario() {
    let dir = tempdir().unwrap();
    cmd_generate(Difficulty::Medium, 4, 2, dir.path()).unwrap();
    let files = read_dir_sorted(dir.path(), "xml");
    assert_eq!(files.len(), 4);
    for file in files {
        let text = fs::read_to_string(file).unwrap();
        assert_eq!(text.matches("<scenario ").count(), 1);
    }
}

#[test]
fn run_inert_produces_logs_with_zero_completion() {
    let dir = tempdir().unwrap();
    let suite = dir.path().join("suite");
    let runs = dir.path().join("runs");
    let reports = dir.path().join("reports");
    cmd_generate(Difficulty::Easy, 2, 3, &suite).unwrap();
    let manifest = cmd_run(&suite, &PolicySpec::Inert, &runs, 1, &ExpertParams::default()).unwrap();
    assert!(manifest.aborted_routes().is_empty());
    assert_eq!(read_dir_sorted(&runs, "jsonl").len(), 2);
    let summary = cmd_score(&runs, &suite, &MetricConfig::default(), &reports).unwrap();
    for report in &summary.reports {
        assert_eq!(report.route_completion, 0.0);
        assert_eq!(report.speed_adherence, 0.0);
    }
}

#[test]
fn replay_reproduces_original_scores() {
    let dir = tempdir().unwrap();
    let suite = dir.path().join("suite");
    let runs = dir.path().join("runs");
    let replays = dir.path().join("replays");
    cmd_generate(Difficulty::Medium, 3, 5, &suite).unwrap();
    cmd_run(&suite, &PolicySpec::Expert, &runs, 1, &ExpertParams::default()).unwrap();
    let manifest = cmd_run(
        &suite,
        &PolicySpec::Replay(runs.clone()),
        &replays,
        1,
        &ExpertParams::default(),
    )
    .unwrap();
    assert!(manifest.aborted_routes().is_empty());

    let mc = MetricConfig::default();
    let original = cmd_score(&runs, &suite, &mc, &dir.path().join("r1")).unwrap();
    let replayed = cmd_score(&replays, &suite, &mc, &dir.path().join("r2")).unwrap();
    for (a, b) in original.reports.iter().zip(&replayed.reports) {
        assert!(
            (a.speed_adherence - b.speed_adherence).abs() < 1e-6,
            "{}: {} vs {}",
            a.route_id,
            a.speed_adherence,
            b.speed_adherence
        );
        assert!((a.route_completion - b.route_completion).abs() < 1e-6);
        assert_eq!(a.overtake_score, b.overtake_score);
    }
}

#[test]
fn score_missing_logs_lists_routes() {
    let dir = tempdir().unwrap();
    let suite = dir.path().join("suite");
    let empty = dir.path().join("empty");
    cmd_generate(Difficulty::Easy, 2, 3, &suite).unwrap();
    fs::create_dir_all(&empty).unwrap();
    match cmd_score(&empty, &suite, &MetricConfig::default(), &dir.path().join("out")) {
        Err(CmdError::MissingLog(routes)) => assert_eq!(routes.len(), 2),
        other => panic!("expected MissingLog, got {other:?}"),
    }
}

#[test]
fn score_rejects_mismatched_config_digest() {
    let dir = tempdir().unwrap();
    let suite = dir.path().join("suite");
    let runs = dir.path().join("runs");
    cmd_generate(Difficulty::Easy, 1, 3, &suite).unwrap();
    cmd_run(&suite, &PolicySpec::Inert, &runs, 1, &ExpertParams::default()).unwrap();
    // Tamper with the suite config after the run.
    let cfg_path = suite.join("easy_0000.xml");
    let text = fs::read_to_string(&cfg_path).unwrap();
    fs::write(&cfg_path, text.replace("default_speed=\"6.000000\"", "default_speed=\"7.000000\"")).unwrap();
    match cmd_score(&runs, &suite, &MetricConfig::default(), &dir.path().join("out")) {
        Err(CmdError::ConfigMismatch(route)) => assert_eq!(route, "easy_0000"),
        other => panic!("expected ConfigMismatch, got {other:?}"),
    }
}

#[test]
fn higher_alpha_scores_strictly_lower_on_imperfect_logs() {
    let dir = tempdir().unwrap();
    let suite = dir.path().join("suite");
    let runs = dir.path().join("runs");
    cmd_generate(Difficulty::Easy, 2, 9, &suite).unwrap();
    // Fixed-speed baseline tracks nothing, so its logs are imperfect.
    cmd_run(&suite, &PolicySpec::Fixed(8.0), &runs, 1, &ExpertParams::default()).unwrap();
    let score_at = |alpha: f64, out: &str| {
        let mc = MetricConfig {
            alpha,
            ..MetricConfig::default()
        };
        cmd_score(&runs, &suite, &mc, &dir.path().join(out))
            .unwrap()
            .rollup
            .speed_adherence
            .all
            .unwrap()
    };
    let a3 = score_at(3.0, "a3");
    let a6 = score_at(6.0, "a6");
    assert!(a6 < a3, "alpha 6 gave {a6}, alpha 3 gave {a3}");
}

#[test]
fn annotate_constant_log_keeps_virtual_equal() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("trace.csv");
    let mut csv = String::from("frame,v\n");
    for i in 0..100 {
        csv.push_str(&format!("{i},7.000000\n"));
    }
    fs::write(&input, csv).unwrap();
    let out = dir.path().join("anno.csv");
    cmd_annotate(&input, Preset::Long, 3, &out).unwrap();
    let text = fs::read_to_string(&out).unwrap();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[1], cols[3], "v != v_virt in {line}");
    }
}

#[test]
fn annotate_is_deterministic_and_long_extends_more() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("trace.csv");
    let mut csv = String::from("frame,v\n");
    // Accelerating, then braking.
    for i in 0..200 {
        let v = if i < 120 { i as f64 * 0.1 } else { 12.0 - (i - 120) as f64 * 0.08 };
        csv.push_str(&format!("{i},{v:.6}\n"));
    }
    fs::write(&input, csv).unwrap();

    let out1 = dir.path().join("a1.csv");
    let out2 = dir.path().join("a2.csv");
    cmd_annotate(&input, Preset::Long, 9, &out1).unwrap();
    cmd_annotate(&input, Preset::Long, 9, &out2).unwrap();
    assert_eq!(fs::read(&out1).unwrap(), fs::read(&out2).unwrap());

    let short_out = dir.path().join("short.csv");
    cmd_annotate(&input, Preset::Short, 9, &short_out).unwrap();
    let mean_ext = |path: &Path| {
        let text = fs::read_to_string(path).unwrap();
        let (mut sum, mut n) = (0.0, 0);
        for line in text.lines().skip(1) {
            let cols: Vec<f64> = line.split(',').skip(1).map(|c| c.parse().unwrap()).collect();
            sum += (cols[2] - cols[1]).abs();
            n += 1;
        }
        sum / n as f64
    };
    assert!(mean_ext(&out1) >= mean_ext(&short_out));
}

#[test]
fn plot_writes_svg_with_two_curves() {
    let dir = tempdir().unwrap();
    let suite = dir.path().join("suite");
    let runs = dir.path().join("runs");
    cmd_generate(Difficulty::Easy, 1, 4, &suite).unwrap();
    cmd_run(&suite, &PolicySpec::Expert, &runs, 1, &ExpertParams::default()).unwrap();
    let svg_path = dir.path().join("profile.svg");
    cmd_plot(
        &runs.join("easy_0000.jsonl"),
        &suite.join("easy_0000.xml"),
        &svg_path,
    )
    .unwrap();
    let svg = fs::read_to_string(&svg_path).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains("speed (m/s)"));
    assert!(svg.contains("arc length (m)"));
}

#[test]
fn plot_perfect_tracking_curves_coincide() {
    // A log whose speed equals the plan everywhere renders actual and
    // target curves that overlap within a pixel.
    let dir = tempdir().unwrap();
    let mut cfg = speedbench_core::suite::generate_suite(Difficulty::Easy, 1, 2)
        .unwrap()
        .remove(0);
    cfg.speed_segments = vec![speedbench_core::SpeedSegment::new(0.0, 1.0, 8.0)];
    let suite = dir.path().join("suite");
    fs::create_dir_all(&suite).unwrap();
    fs::write(suite.join(format!("{}.xml", cfg.route_id)), cfg.to_xml()).unwrap();

    let route = cfg.route().unwrap();
    let frames: Vec<speedbench_core::log::Frame> = (0..=64)
        .map(|i| {
            let p = route.point_at(i as f64 * 10.0);
            speedbench_core::log::Frame {
                frame: i,
                t: i as f64 * 0.1,
                ego_x: p.x,
                ego_y: p.y,
                ego_speed: 8.0,
                ego_accel: 0.0,
                ego_lane_offset: 0.0,
                lead_x: None,
                lead_y: None,
                lead_speed: None,
                active_target_speed: 8.0,
                active_behavior: None,
            }
        })
        .collect();
    let log = speedbench_core::log::TrajectoryLog {
        meta: speedbench_core::log::LogMeta {
            route_id: cfg.route_id.clone(),
            seed: cfg.seed,
            config_digest: cfg.digest(),
        },
        frames,
    };
    let log_path = dir.path().join("perfect.jsonl");
    log.save(&log_path).unwrap();

    let svg_path = dir.path().join("perfect.svg");
    cmd_plot(&log_path, &suite.join(format!("{}.xml", cfg.route_id)), &svg_path).unwrap();
    let svg = fs::read_to_string(&svg_path).unwrap();
    let ys: Vec<Vec<f64>> = svg
        .lines()
        .filter(|l| l.contains("<polyline"))
        .map(|l| {
            let points = l.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
            points
                .split(' ')
                .map(|pair| pair.split(',').nth(1).unwrap().parse().unwrap())
                .collect()
        })
        .collect();
    // Both curves are horizontal lines at the same plotted speed.
    let target_y = ys[0][0];
    for curve in &ys {
        for &y in curve {
            assert!((y - target_y).abs() <= 1.0, "curves diverge: {y} vs {target_y}");
        }
    }
}

#[test]
fn seed_env_var_is_a_fallback() {
    let dir = tempdir().unwrap();
    let via_flag = dir.path().join("flag");
    let via_env = dir.path().join("env");
    let run = |args: &[&str], env: Option<(&str, &str)>| {
        let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_speedbench"));
        cmd.args(args);
        if let Some((k, v)) = env {
            cmd.env(k, v);
        } else {
            cmd.env_remove("SPEEDBENCH_SEED");
        }
        assert!(cmd.output().unwrap().status.success());
    };
    run(
        &["generate", "--difficulty", "easy", "--count", "2", "--seed", "31",
          "--out", via_flag.to_str().unwrap()],
        None,
    );
    run(
        &["generate", "--difficulty", "easy", "--count", "2",
          "--out", via_env.to_str().unwrap()],
        Some(("SPEEDBENCH_SEED", "31")),
    );
    assert_eq!(
        fs::read(via_flag.join("easy_0000.xml")).unwrap(),
        fs::read(via_env.join("easy_0000.xml")).unwrap()
    );
}

#[test]
fn plot_curves_differ_across_target_speeds() {
    let dir = tempdir().unwrap();
    // Same route geometry, two different command sets.
    let make = |v: f64, name: &str| {
        let mut cfg = speedbench_core::suite::generate_suite(Difficulty::Easy, 1, 4)
            .unwrap()
            .remove(0);
        cfg.speed_segments = vec![speedbench_core::SpeedSegment::new(0.0, 1.0, v)];
        cfg.route_id = name.to_string();
        let suite = dir.path().join(name);
        fs::create_dir_all(&suite).unwrap();
        fs::write(suite.join(format!("{name}.xml")), cfg.to_xml()).unwrap();
        let runs = dir.path().join(format!("{name}-runs"));
        cmd_run(&suite, &PolicySpec::Expert, &runs, 1, &ExpertParams::default()).unwrap();
        let svg = dir.path().join(format!("{name}.svg"));
        cmd_plot(&runs.join(format!("{name}.jsonl")), &suite.join(format!("{name}.xml")), &svg)
            .unwrap();
        fs::read_to_string(svg).unwrap()
    };
    let slow = make(6.0, "slow");
    let fast = make(10.0, "fast");
    let actual_points = |svg: &str| {
        svg.lines()
            .filter(|l| l.contains("<polyline"))
            .nth(1)
            .unwrap()
            .to_string()
    };
    assert_ne!(actual_points(&slow), actual_points(&fast));
}

#[test]
fn run_aborts_are_recorded_and_exit_nonzero() {
    let dir = tempdir().unwrap();
    let suite = dir.path().join("suite");
    cmd_generate(Difficulty::Easy, 2, 3, &suite).unwrap();
    // Replay source does not exist: every route aborts, but the run still
    // writes a manifest and the process exits nonzero.
    let runs = dir.path().join("runs");
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_speedbench"))
        .args([
            "run",
            "--suite",
            suite.to_str().unwrap(),
            "--policy",
            "replay:/nonexistent-logs",
            "--out",
            runs.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let manifest = speedbench::RunManifest::load(&runs).unwrap();
    assert_eq!(manifest.aborted_routes().len(), 2);
}

#[test]
fn expert_params_file_is_applied() {
    let dir = tempdir().unwrap();
    let suite = dir.path().join("suite");
    cmd_generate(Difficulty::Easy, 1, 3, &suite).unwrap();
    let params = dir.path().join("expert.params");
    fs::write(&params, "idm.a_max = 1.0\n").unwrap();
    let run = |extra: &[&str], out: &std::path::Path| {
        let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_speedbench"));
        cmd.args([
            "run",
            "--suite",
            suite.to_str().unwrap(),
            "--policy",
            "expert",
            "--out",
            out.to_str().unwrap(),
        ]);
        cmd.args(extra);
        assert!(cmd.output().unwrap().status.success());
    };
    let default_out = dir.path().join("default");
    let tuned_out = dir.path().join("tuned");
    run(&[], &default_out);
    run(&["--expert-params", params.to_str().unwrap()], &tuned_out);
    // A weaker accelerator produces a visibly different trajectory.
    assert_ne!(
        fs::read(default_out.join("easy_0000.jsonl")).unwrap(),
        fs::read(tuned_out.join("easy_0000.jsonl")).unwrap()
    );
}

#[test]
fn binary_exits_nonzero_on_bad_input() {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_speedbench"))
        .args(["score", "--logs", "/nonexistent", "--suite", "/nonexistent", "--out", "/tmp/x"])
        .output()
        .unwrap();
    assert!(!out.status.success());

    let dir = tempdir().unwrap();
    let ok = std::process::Command::new(env!("CARGO_BIN_EXE_speedbench"))
        .args([
            "generate",
            "--difficulty",
            "easy",
            "--count",
            "2",
            "--seed",
            "1",
            "--out",
            dir.path().join("s").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(ok.status.success());
}
