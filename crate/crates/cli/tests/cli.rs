use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use evoplay_cli::{PlayReport, RunReport, ServeEvent, StatsOutput, TrainReport, TuneReport, ValidateReport, SNAPSHOT_ENV};
use evoplay_core::game::{Status, COIN_CORRIDOR};
use evoplay_core::learner::{input_len_for, load_model_for};
use evoplay_core::params::{default_registry, ParameterSet};

fn evoplay() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_evoplay"));
    c.env_remove(SNAPSHOT_ENV).env("RUST_LOG", "off");
    c
}

fn run(args: &[&str]) -> Output {
    evoplay().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json<T: serde::de::DeserializeOwned>(o: &Output) -> T {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(stdout(o).trim()).unwrap()
}

#[test]
fn validate_reports_ok_invalid_and_missing() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("corridor.gdf");
    std::fs::write(&good, COIN_CORRIDOR).unwrap();
    let o = run(&["validate", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "ok\n");
    let r: ValidateReport = json(&run(&["validate", good.to_str().unwrap(), "--format", "json"]));
    assert_eq!((r.ok, r.game.as_deref(), r.width, r.height), (true, Some("CoinCorridor"), Some(8), Some(1)));

    let bad = dir.path().join("bad.gdf");
    std::fs::write(&bad, "game Broken\nsprites\nA avatar avatar\n").unwrap();
    let o = run(&["validate", bad.to_str().unwrap(), "--format", "json"]);
    assert_eq!(o.status.code(), Some(1));
    let r: ValidateReport = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(!r.ok && r.error.is_some());

    let o = run(&["validate", dir.path().join("absent.gdf").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn play_is_byte_identical_across_runs() {
    let args = ["play", "--game", "CoinCorridor", "--episodes", "1", "--seed", "1", "--params", "default"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);

    let mut jargs = args.to_vec();
    jargs[4] = "3";
    jargs.extend(["--format", "json"]);
    let text = stdout(&run(&jargs));
    let r: PlayReport = serde_json::from_str(text.trim()).unwrap();
    assert_eq!(r.episodes.len(), 3);
    assert_eq!(r.game, "CoinCorridor");
    assert!(r.episodes.iter().all(|e| e.outcome != Status::Running && e.ticks > 0));
    assert_eq!(serde_json::to_string(&r).unwrap(), text.trim());
    assert_eq!(stdout(&run(&jargs)), text);
}

#[test]
fn unknown_flags_are_usage_errors_everywhere() {
    for sub in ["play", "run", "tune", "train", "stats", "serve", "validate"] {
        let o = run(&[sub, "--no-such-flag"]);
        assert_eq!(o.status.code(), Some(2), "{sub}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains("Usage:"), "{sub}: {err}");
    }
    assert_eq!(run(&["launch"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("validate"));
}

#[test]
fn seeds_are_required_in_experiments() {
    assert_eq!(run(&["play", "--game", "CoinCorridor"]).status.code(), Some(2));
    assert_eq!(run(&["tune", "--synthetic"]).status.code(), Some(2));
    assert_eq!(run(&["train", "--game", "KeyDoor", "--episodes", "1"]).status.code(), Some(2));
    let o = run(&["run", "--episodes", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));
}

#[test]
fn missing_game_and_params_files_exit_2() {
    let o = run(&["play", "--game", "NoSuchGame", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("NoSuchGame"));
    let o = run(&["play", "--game", "CoinCorridor", "--seed", "1", "--params", "/nonexistent/params.txt"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["play", "--game", "CoinCorridor", "--seed", "1", "--model", "/nonexistent/model.thy"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.txt");
    std::fs::write(&params, "budget = 7\n").unwrap();
    assert_eq!(run(&["play", "--game", "CoinCorridor", "--seed", "1", "--params", params.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&params, "# small\nbudget = 25\npopulation_size = 4\n").unwrap();
    let small: PlayReport = json(&run(&[
        "play", "--game", "CoinCorridor", "--seed", "1", "--params", params.to_str().unwrap(), "--format", "json",
    ]));
    let default: PlayReport = json(&run(&["play", "--game", "CoinCorridor", "--seed", "1", "--format", "json"]));
    assert_ne!(small.fingerprint, default.fingerprint);
}

#[test]
fn play_accepts_gdf_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sprint.gdf");
    std::fs::write(&path, COIN_CORRIDOR.replace("CoinCorridor", "Sprint")).unwrap();
    let r: PlayReport = json(&run(&["play", "--game", path.to_str().unwrap(), "--seed", "9", "--format", "json"]));
    assert_eq!(r.game, "Sprint");
}

/// Exhaustive optimum of the noise-free five-bit OneMax.
fn onemax_oracle() -> Vec<usize> {
    let mut best = (f64::MIN, vec![]);
    for code in 0..32usize {
        let bits: Vec<usize> = (0..5).map(|d| (code >> d) & 1).collect();
        let value = bits.iter().sum::<usize>() as f64 / 5.0;
        if value > best.0 {
            best = (value, bits);
        }
    }
    best.1
}

#[test]
fn synthetic_tune_finds_the_oracle_optimum() {
    let oracle = onemax_oracle();
    for seed in 1..=5 {
        let s = seed.to_string();
        let r: TuneReport = json(&run(&["tune", "--synthetic", "--seed", &s, "--format", "json"]));
        assert_eq!(r.recommended, oracle, "seed {seed}");
        assert_eq!(r.true_value, Some(1.0));
        assert_eq!(r.budget, 200);
    }
    let o = run(&["tune", "--synthetic", "--seed", "1", "--budget", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn game_tune_prints_a_reusable_params_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["tune", "--game", "CoinCorridor", "--budget", "3", "--seed", "2", "--neighbours", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("# tuned CoinCorridor with 3 evaluations"));
    let space = default_registry();
    let parsed = ParameterSet::from_text(&space, &text).unwrap();
    let r: TuneReport = json(&run(&[
        "tune", "--game", "CoinCorridor", "--budget", "3", "--seed", "2", "--neighbours", "5", "--format", "json",
    ]));
    assert_eq!(parsed.indices(), r.recommended.as_slice());
    let file = dir.path().join("tuned.txt");
    std::fs::write(&file, text).unwrap();
    assert_eq!(run(&["play", "--game", "CoinCorridor", "--seed", "1", "--params", file.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn train_writes_a_model_that_play_loads() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("corridor.thy");
    let r: TrainReport = json(&run(&[
        "train", "--game", "CoinCorridor", "--episodes", "10", "--seed", "2", "--model-out", model.to_str().unwrap(),
        "--format", "json",
    ]));
    assert_eq!(r.episodes.len(), 10);
    assert!(r.training_steps > 0);
    let spec = evoplay_core::game::builtin("CoinCorridor").unwrap();
    let w = load_model_for(&model, "CoinCorridor", input_len_for(&spec)).unwrap();
    assert_eq!(w.steps, r.training_steps);
    let o = run(&["play", "--game", "CoinCorridor", "--seed", "3", "--model", model.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    // A model for another game is refused.
    let o = run(&["play", "--game", "KeyDoor", "--seed", "3", "--model", model.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    // Too little play to reach the warmup is a runtime failure.
    let o = run(&[
        "train", "--game", "CoinCorridor", "--episodes", "1", "--seed", "2", "--model-out",
        dir.path().join("none.thy").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_resumes_from_the_env_snapshot_and_stats_reads_it() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("snap");
    let env_run = |args: &[&str]| {
        evoplay()
            .env(SNAPSHOT_ENV, &snap)
            .args(args)
            .output()
            .unwrap()
    };
    let small = dir.path().join("small.txt");
    std::fs::write(&small, "budget = 25\npopulation_size = 4\nindividual_length = 4\n").unwrap();
    let first: RunReport = json(&env_run(&[
        "run", "--episodes", "3", "--seed", "4", "--games", "CoinCorridor,KeyDoor", "--params",
        small.to_str().unwrap(), "--format", "json",
    ]));
    assert_eq!(first.played.iter().map(|r| r.game.as_str()).collect::<Vec<_>>(), ["CoinCorridor", "KeyDoor", "CoinCorridor"]);
    assert_eq!(first.snapshot.as_deref(), Some(snap.to_str().unwrap()));
    assert!(Path::new(&snap).join("manifest.txt").is_file());

    let second: RunReport = json(&env_run(&["run", "--episodes", "2", "--format", "json"]));
    assert_eq!(second.total_episodes, 5);
    assert_eq!(second.played[0].index, 3);
    assert_eq!(second.played[0].game, "KeyDoor");

    let all: StatsOutput = json(&env_run(&["stats", "--format", "json"]));
    assert_eq!(all.reports[0].game, None);
    assert_eq!(all.reports[0].episodes, 5);
    let per_game: Vec<(Option<String>, u64)> = all.reports[1..].iter().map(|r| (r.game.clone(), r.episodes)).collect();
    assert_eq!(per_game, [(Some("CoinCorridor".into()), 3), (Some("KeyDoor".into()), 2)]);

    let one: StatsOutput = json(&env_run(&["stats", "--game", "KeyDoor", "--format", "json"]));
    assert_eq!(one.reports.len(), 1);
    let o = env_run(&["stats", "--game", "KeyDoor"]);
    assert!(stdout(&o).starts_with("KeyDoor: 2 episodes"), "{}", stdout(&o));

    assert_eq!(run(&["stats"]).status.code(), Some(2));
    let o = run(&["stats", "--snapshot", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bounded_serve_stops_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("daemon");
    let o = run(&[
        "serve", "--port", "0", "--seed", "5", "--games", "CoinCorridor", "--episodes", "2", "--snapshot",
        snap.to_str().unwrap(), "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let lines: Vec<ServeEvent> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(matches!(&lines[0], ServeEvent::Listening { listening } if listening.starts_with("127.0.0.1:")));
    assert_eq!(
        lines[1],
        ServeEvent::Stopped {
            episodes: 2,
            snapshot: Some(snap.display().to_string())
        }
    );
    assert!(snap.join("manifest.txt").is_file());
}

#[test]
fn daemon_answers_the_control_protocol_until_interrupted() {
    let mut child = evoplay()
        .args(["serve", "--port", "0", "--seed", "6", "--games", "CoinCorridor,KeyDoor", "--format", "json"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut reader = BufReader::new(child.stdout.take().unwrap());
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    let ServeEvent::Listening { listening } = serde_json::from_str(line.trim()).unwrap() else {
        panic!("expected the listening line, got {line}");
    };

    let mut stream = TcpStream::connect(&listening).unwrap();
    write!(stream, "GET /v1/games HTTP/1.1\r\nHost: {listening}\r\nConnection: close\r\n\r\n").unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.contains(r#"{"games":["CoinCorridor","KeyDoor"]}"#), "{response}");

    let status = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(status.success());
    let mut rest = String::new();
    reader.read_to_string(&mut rest).unwrap();
    assert!(child.wait().unwrap().success());
    let stopped: ServeEvent = serde_json::from_str(rest.trim()).unwrap();
    assert!(matches!(stopped, ServeEvent::Stopped { snapshot: None, .. }));
}
