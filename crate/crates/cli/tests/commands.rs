//! End-to-end tests of the CLI contract: exit codes, file outputs, and
//! rerun determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_slipstream")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn slipstream")
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("slipstream_cli_tests").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_tiny_config(dir: &Path, seed: u64) -> PathBuf {
    let path = dir.join("config.toml");
    let text = format!(
        r#"
run_name = "t"
reward_mode_name = "sparse-competitive"
out_dir = "{out}"

[track]
builtin = "mini"

[env]
episode_horizon = 40

[train]
rollout_horizon = 8
num_envs = 4
minibatch_count = 2
total_env_steps = 96
eval_cadence = 0
eval_episodes = 1
actor_hidden = [12, 12]
critic_hidden = [12, 12]
seed = {seed}

[eval]
runs = 2
laps = 1
races = 2
horizon = 120
"#,
        out = dir.join("out").display(),
        seed = seed
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn invalid_config_exits_2_with_line() {
    let dir = temp_dir("bad_config");
    let path = dir.join("bad.toml");
    std::fs::write(&path, "run_name = \"x\"\nmystery = 1\n").unwrap();
    let out = run(&["train", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("mystery"), "stderr names the bad key: {err}");
    assert!(err.contains("line"), "stderr has line info: {err}");
}

#[test]
fn missing_config_exits_2() {
    let out = run(&["train", "--config", "/nonexistent/nowhere.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_builtin_track_exits_2() {
    let dir = temp_dir("bad_track");
    let cfg = write_tiny_config(&dir, 1);
    let out = run(&["train", "--config", cfg.to_str().unwrap(), "--track", "figure-nine"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_checkpoint_exits_4() {
    let dir = temp_dir("no_ckpt");
    let cfg = write_tiny_config(&dir, 1);
    let out = run(&[
        "eval",
        "--config",
        cfg.to_str().unwrap(),
        "--checkpoint",
        "/nonexistent/x.ckpt",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn train_writes_log_and_checkpoints() {
    let dir = temp_dir("train_outputs");
    let cfg = write_tiny_config(&dir, 2);
    let out = run(&["train", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let run_dir = dir.join("out").join("t");
    assert!(run_dir.join("train_log.jsonl").exists());
    assert!(run_dir.join("agent0.ckpt").exists());
    assert!(run_dir.join("agent1.ckpt").exists());
    assert!(run_dir.join("best.ckpt").exists());
    assert!(run_dir.join("config.toml").exists());
    // 96 steps / (8 * 4) per iteration = 3 log rows.
    let log = std::fs::read_to_string(run_dir.join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 3);
}

/// Reward columns of the training log are bitwise identical across reruns
/// with the same config and seed.
#[test]
fn train_rerun_is_bitwise_deterministic_on_rewards() {
    let dir_a = temp_dir("det_a");
    let dir_b = temp_dir("det_b");
    let extract = |dir: &Path| -> Vec<String> {
        let cfg = write_tiny_config(dir, 7);
        let out = run(&["train", "--config", cfg.to_str().unwrap()]);
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
        let log = std::fs::read_to_string(dir.join("out/t/train_log.jsonl")).unwrap();
        log.lines()
            .map(|line| {
                let v: serde_json::Value = serde_json::from_str(line).unwrap();
                format!(
                    "{}|{}|{}|{}",
                    v["mean_reward"], v["surrogate_loss"], v["value_loss"], v["mean_gate_passes"]
                )
            })
            .collect()
    };
    assert_eq!(extract(&dir_a), extract(&dir_b));
}

#[test]
fn full_pipeline_eval_race_matrix_plot() {
    let dir = temp_dir("pipeline");
    let cfg = write_tiny_config(&dir, 3);
    let cfg_s = cfg.to_str().unwrap();
    assert!(run(&["train", "--config", cfg_s]).status.success());
    let run_dir = dir.join("out").join("t");
    let a0 = run_dir.join("agent0.ckpt");
    let a1 = run_dir.join("agent1.ckpt");

    let eval = run(&[
        "eval",
        "--config",
        cfg_s,
        "--checkpoint",
        a0.to_str().unwrap(),
        "--runs",
        "2",
        "--laps",
        "1",
    ]);
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    assert!(run_dir.join("eval_metrics.json").exists());

    let race = run(&[
        "race",
        "--config",
        cfg_s,
        "--checkpoints",
        &format!("{},{}", a0.display(), a1.display()),
        "--laps",
        "1",
    ]);
    assert!(race.status.success(), "{}", String::from_utf8_lossy(&race.stderr));
    assert!(run_dir.join("race_result.json").exists());
    assert!(run_dir.join("race_trajectory.jsonl").exists());

    let matrix = run(&[
        "matrix",
        "--config",
        cfg_s,
        "--checkpoints",
        &format!("{},{}", a0.display(), a1.display()),
        "--races",
        "2",
        "--laps",
        "1",
    ]);
    assert!(matrix.status.success(), "{}", String::from_utf8_lossy(&matrix.stderr));
    assert!(run_dir.join("win_matrix.json").exists());

    let plots = run(&[
        "plot-data",
        "--train-log",
        run_dir.join("train_log.jsonl").to_str().unwrap(),
        "--trajectory",
        run_dir.join("race_trajectory.jsonl").to_str().unwrap(),
        "--matrix",
        run_dir.join("win_matrix.json").to_str().unwrap(),
        "--out",
        dir.join("plots").to_str().unwrap(),
    ]);
    assert!(plots.status.success(), "{}", String::from_utf8_lossy(&plots.stderr));
    for file in ["reward_curves.tsv", "trajectory.tsv", "win_matrix.tsv"] {
        let path = dir.join("plots").join(file);
        assert!(path.exists(), "missing {file}");
        let content = std::fs::read_to_string(&path).unwrap();
        assert!(content.lines().count() >= 2, "{file} has no data rows");
    }
}

#[test]
fn track_export_round_trips_byte_exact() {
    let dir = temp_dir("track_tool");
    let saved = dir.join("lt.toml");
    let out = run(&["track", "--track", "lemniscate+obstacles", "--save", saved.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read(&saved).unwrap();
    // Re-exporting the saved file must be byte-identical.
    let saved2 = dir.join("lt2.toml");
    let out2 =
        run(&["track", "--track", saved.to_str().unwrap(), "--save", saved2.to_str().unwrap()]);
    assert!(out2.status.success());
    assert_eq!(first, std::fs::read(&saved2).unwrap());
}

#[test]
fn plot_data_without_inputs_exits_2() {
    let out = run(&["plot-data", "--out", "/tmp/slipstream_cli_tests/noinput"]);
    assert_eq!(out.status.code(), Some(2));
}
