use std::process::Command;

use insertion_meta::bench::*;
use insertion_meta::env::{EnvConfig, TaskFamily};
use insertion_meta::pearl::{PearlAgent, PearlConfig};
use insertion_meta::rng::rng_from_seed;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_insertion"))
}

#[test]
fn empty_report_is_header_only() {
    let csv = BenchReport::default().to_csv().unwrap();
    assert_eq!(
        csv,
        "policy,family,noise_mm,episodes,success_rate,steps_mean,steps_std,seconds_mean\n"
    );
}

#[test]
fn summary_statistics() {
    let outcomes = [
        (true, Some(2), Some(0.4)),
        (false, None, None),
        (true, Some(4), Some(0.8)),
        (true, Some(3), Some(0.6)),
    ];
    let r = summarize("x", "plug", 2.0, &outcomes);
    assert_eq!(r.success_rate, 0.75);
    assert_eq!(r.steps_mean, Some(3.0));
    assert!((r.steps_std.unwrap() - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert!((r.seconds_mean.unwrap() - 0.6).abs() < 1e-12);
    let none = summarize("x", "plug", 2.0, &[(false, None, None)]);
    assert_eq!((none.steps_mean, none.steps_std), (None, None));
    let one = summarize("x", "plug", 2.0, &[(true, Some(5), Some(1.0))]);
    assert_eq!(one.steps_std, Some(0.0));
}

#[test]
fn report_json_round_trip() {
    let suite = EvalSuite::named("all", 2, 2).unwrap();
    let out = eval_policy(&Policy::SpiralSearch(Default::default()), &suite, &EvalOptions::default(), 3).unwrap();
    assert_eq!(out.report.rows.len(), 5);
    let back = BenchReport::from_json(&out.report.to_json()).unwrap();
    assert_eq!(back, out.report);
    for r in &out.report.rows {
        assert!((0.0..=1.0).contains(&r.success_rate));
        assert_eq!(r.episodes, 4);
    }
}

#[test]
fn suites_validate() {
    assert!(EvalSuite::named("plug5", 1, 1).is_err());
    assert!(EvalSuite::named("plug2", 1, 0).is_err());
    let mut s = EvalSuite::named("gear2", 1, 1).unwrap();
    s.tasks[0].noise_mm = 1.0;
    assert!(s.validate().is_err());
    assert_eq!(EvalSuite::named("all", 20, 5).unwrap().episodes(), 500);
}

#[test]
fn straight_down_is_perfect_without_noise() {
    let suite = EvalSuite::named("plug0", 10, 3).unwrap();
    let out = eval_policy(&Policy::StraightDown, &suite, &EvalOptions::default(), 1).unwrap();
    assert_eq!(out.report.rows[0].success_rate, 1.0);
}

#[test]
fn adaptation_curve_uses_trials_times_horizon_steps() {
    let agent = PearlAgent::new(PearlConfig::default(), 2e-3, &mut rng_from_seed(0)).unwrap();
    let fam = TaskFamily::plug();
    let tasks = held_out_tasks(&fam, 2, 1).unwrap();
    let c = adaptation_curve(&agent, "t", &EnvConfig::from_family(&fam), &tasks, 2, 3, true, 5).unwrap();
    assert_eq!(c.env_steps_per_repeat, 3 * 50);
    assert_eq!(c.repeats, 4);
    assert_eq!(c.mean.len(), 3);
    assert!(c.mean.iter().all(|m| (0.0..=1.0).contains(m)));
}

#[test]
fn traces_have_one_row_per_step() {
    let suite = EvalSuite::named("plug2", 1, 2).unwrap();
    let opts = EvalOptions {
        keep_traces: true,
        ..EvalOptions::default()
    };
    let out = eval_policy(&Policy::StraightDown, &suite, &opts, 1).unwrap();
    let mut buf = Vec::new();
    write_traces(&out.traces, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let steps: usize = out.traces.iter().map(|t| t.transitions.len()).sum();
    assert_eq!(text.lines().count(), steps + 1);
    assert!(text.starts_with("episode,t,x,y,z,ax,ay,az,r,force\n"));
}

#[test]
fn cli_unknown_subcommand_fails_with_usage() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn cli_bench_spiral_gives_one_row() {
    let out = bin().args(["bench", "--suite", "plug0", "--policy", "spiral"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("spiral,plug,0.0,100,1.0,"));
}

#[test]
fn cli_errors_are_one_line() {
    let out = bin().args(["eval", "--policy", "sac", "--suite", "plug0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "));
}

#[test]
fn cli_grasp_correct_prints_offset() {
    let dir = tempfile::tempdir().unwrap();
    let r = insertion_meta::grasp::GrayImage::textured(48, 48, 2);
    r.write_pgm(&dir.path().join("r.pgm")).unwrap();
    r.shifted(3, -5).write_pgm(&dir.path().join("q.pgm")).unwrap();
    let out = bin()
        .current_dir(dir.path())
        .args(["grasp-correct", "--ref", "r.pgm", "--img", "q.pgm", "--mm-per-px", "0.1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let f: Vec<&str> = text.split_whitespace().collect();
    assert_eq!(&f[..2], &["3", "-5"]);
    assert!((f[2].parse::<f64>().unwrap() - 0.3).abs() < 1e-12);
    assert!((f[3].parse::<f64>().unwrap() + 0.5).abs() < 1e-12);
}

#[test]
fn cli_config_file_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "draws = 3\nepisodes = 2\n").unwrap();
    let out = bin()
        .current_dir(dir.path())
        .args(["--config", "c.toml", "eval", "--policy", "straight", "--suite", "gear2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("straight,gear,2.0,6,"));
    std::fs::write(dir.path().join("bad.toml"), "draw = 3\n").unwrap();
    let out = bin().current_dir(dir.path()).args(["--config", "bad.toml", "grad-check"]).output().unwrap();
    assert!(!out.status.success());
}
