//! The `evoplay` command line. [`main_with`] maps an argument vector to an
//! exit code: 0 success, 1 runtime failure, 2 usage error. Every report is a
//! serde type, so `--format json` output reads back into the same struct.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evoplay_core::game::{builtin, builtin_suite, parse_gdf, GameSpec, ScoreBounds, Status};
use evoplay_core::learner::{input_len_for, load_model_for, save_model, ModelHandle};
use evoplay_core::params::{default_registry, ParameterSet, ParameterSpace};
use evoplay_core::planner::{play_episode, AgentFingerprint, Guide, Rhea, RheaConfig};
use evoplay_core::runtime::{
    parse_events, stats, EpisodeRecord, Event, ModerationConfig, Runtime, RuntimeConfig, StatsReport,
};
use evoplay_core::tuner::{run_ntbea, AgentTuningProblem, NtbeaConfig, OneMax, TuningProblem};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default location of snapshots for `run`, `stats` and `serve`.
pub const SNAPSHOT_ENV: &str = "THYIA_SNAPSHOT_DIR";

/// Dimensions and noise of `tune --synthetic`.
pub const SYNTHETIC_DIMS: usize = 5;
pub const SYNTHETIC_SIGMA: f64 = 0.1;

#[derive(Debug, Parser)]
#[command(name = "evoplay", version, about = "General game player: batch experiments and the always-on daemon")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Play episodes with a fixed planner and print each outcome.
    Play(PlayArgs),
    /// Run bounded cycles of the always-on loop, resuming from a snapshot if present.
    Run(RunArgs),
    /// Tune planner parameters with NTBEA.
    Tune(TuneArgs),
    /// Play, record and train on one game.
    Train(TrainArgs),
    /// Statistics from a snapshot's event log.
    Stats(StatsArgs),
    /// Start the daemon with its HTTP control protocol.
    Serve(ServeArgs),
    /// Parse a game description file.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct PlayArgs {
    /// Built-in game name or path to a .gdf file.
    #[arg(long)]
    pub game: String,
    #[arg(long, default_value_t = 1)]
    pub episodes: u64,
    #[arg(long)]
    pub seed: u64,
    /// `default` or a `name = value` parameter file.
    #[arg(long, default_value = "default")]
    pub params: String,
    /// Model file guiding nn-seeded and nn-weighted planners.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RuntimeArgs {
    /// Required unless resuming from a snapshot.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "default")]
    pub params: String,
    /// Comma-separated built-in names or .gdf paths; all built-ins by default.
    #[arg(long, value_delimiter = ',')]
    pub games: Vec<String>,
    /// `id term` lines of blocked terms.
    #[arg(long)]
    pub blocklist: Option<PathBuf>,
    /// Episodes per game between tuning runs; 0 disables tuning.
    #[arg(long)]
    pub tune_every: Option<u64>,
    #[arg(long, env = SNAPSHOT_ENV)]
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub episodes: u64,
    #[command(flatten)]
    pub runtime: RuntimeArgs,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub game: Option<String>,
    /// Tune the noisy five-bit OneMax problem instead of a game.
    #[arg(long)]
    pub synthetic: bool,
    /// Evaluations.
    #[arg(long, default_value_t = 200)]
    pub budget: usize,
    #[arg(long)]
    pub seed: u64,
    /// Episodes averaged per evaluation.
    #[arg(long, default_value_t = 1)]
    pub episodes: usize,
    #[arg(long, default_value_t = 50)]
    pub neighbours: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub game: String,
    #[arg(long)]
    pub episodes: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "default")]
    pub params: String,
    /// Where to write the trained model.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, env = SNAPSHOT_ENV)]
    pub snapshot: Option<PathBuf>,
    #[arg(long)]
    pub game: Option<String>,
    /// Episodes in the recent-mean window.
    #[arg(long, default_value_t = 20)]
    pub window: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Stop after this many episodes; unbounded by default.
    #[arg(long)]
    pub episodes: Option<u64>,
    #[command(flatten)]
    pub runtime: RuntimeArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub file: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

fn usage(e: impl ToString) -> CliError {
    CliError::Usage(e.to_string())
}

fn failure(e: impl ToString) -> CliError {
    CliError::Failure(e.to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayedEpisode {
    pub episode: u64,
    pub outcome: Status,
    pub score: i64,
    pub ticks: u32,
    pub fitness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayReport {
    pub game: String,
    pub seed: u64,
    pub fingerprint: String,
    pub episodes: Vec<PlayedEpisode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub played: Vec<EpisodeRecord>,
    /// Episodes in the runtime's lifetime, including restored ones.
    pub total_episodes: u64,
    pub snapshot: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    /// Game name, or `synthetic` for OneMax.
    pub problem: String,
    pub seed: u64,
    pub budget: usize,
    pub recommended: Vec<usize>,
    /// The recommendation as a parameter file.
    pub params: String,
    /// Noise-free value of the recommendation, where known.
    pub true_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub game: String,
    pub seed: u64,
    pub episodes: Vec<EpisodeRecord>,
    pub training_steps: u64,
    pub model: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsOutput {
    pub reports: Vec<StatsReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidateReport {
    pub file: String,
    pub ok: bool,
    pub game: Option<String>,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub error: Option<String>,
}

/// `serve` prints one of these when listening and one when it stops.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ServeEvent {
    Listening { listening: String },
    Stopped { episodes: u64, snapshot: Option<String> },
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return e.exit_code();
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let f = cli.format;
    match &cli.command {
        Command::Play(a) => play(a, f, out),
        Command::Run(a) => run(a, f, out),
        Command::Tune(a) => tune(a, f, out),
        Command::Train(a) => train(a, f, out),
        Command::Stats(a) => show_stats(a, f, out),
        Command::Serve(a) => serve(a, f, out),
        Command::Validate(a) => validate(a, f, out),
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, format: Format, report: &T, text: impl FnOnce() -> String) -> Result<(), CliError> {
    let line = match format {
        Format::Json => serde_json::to_string(report).map_err(failure)?,
        Format::Text => text(),
    };
    writeln!(out, "{}", line.trim_end()).map_err(failure)?;
    out.flush().map_err(failure)
}

/// A built-in name or a readable, parseable .gdf file.
pub fn load_game(name: &str) -> Result<Arc<GameSpec>, CliError> {
    if let Some(g) = builtin(name) {
        return Ok(g);
    }
    let path = Path::new(name);
    if !path.is_file() {
        let known: Vec<String> = builtin_suite().iter().map(|g| g.name.clone()).collect();
        return Err(usage(format!(
            "unknown game {name}: not a built-in ({}) and no such file",
            known.join(", ")
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{name}: {e}")))?;
    parse_gdf(&text)
        .map(Arc::new)
        .map_err(|e| usage(format!("{name}: {e}")))
}

/// `default`, or a parameter file; unnamed parameters keep their defaults.
pub fn load_params(space: &ParameterSpace, arg: &str) -> Result<ParameterSet, CliError> {
    if arg == "default" {
        return Ok(space.default_set());
    }
    let text = std::fs::read_to_string(arg).map_err(|e| usage(format!("params file {arg}: {e}")))?;
    ParameterSet::from_text(space, &text).map_err(|e| usage(format!("params file {arg}: {e}")))
}

fn play(a: &PlayArgs, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    let space = default_registry();
    let params = load_params(&space, &a.params)?;
    let spec = load_game(&a.game)?;
    let rcfg = RheaConfig::from_params(&space, &params).map_err(usage)?;
    let guide = match &a.model {
        Some(path) => {
            if !path.is_file() {
                return Err(usage(format!("model file {}: not found", path.display())));
            }
            let w = load_model_for(path, &spec.name, input_len_for(&spec))
                .map_err(|e| usage(format!("model file {}: {e}", path.display())))?;
            Some(ModelHandle::new(Arc::new(w), ScoreBounds::for_spec(&spec)))
        }
        None => None,
    };
    let mut bounds = ScoreBounds::for_spec(&spec);
    let mut episodes = Vec::new();
    for i in 0..a.episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        rng.set_stream(i);
        let (game_seed, planner_seed) = (rng.next_u64(), rng.next_u64());
        let mut planner = Rhea::new(rcfg.clone(), planner_seed);
        let o = play_episode(
            &spec,
            &mut planner,
            guide.as_ref().map(|g| g as &dyn Guide),
            game_seed,
            &mut bounds,
            |_, _, _| {},
        )
        .map_err(failure)?;
        episodes.push(PlayedEpisode {
            episode: i,
            outcome: o.status,
            score: o.score,
            ticks: o.ticks,
            fitness: o.fitness,
        });
    }
    let report = PlayReport {
        game: spec.name.clone(),
        seed: a.seed,
        fingerprint: AgentFingerprint::new(params, a.seed).hash(&space),
        episodes,
    };
    emit(out, format, &report, || {
        let mut s = format!("{} seed {} fingerprint {}\n", report.game, report.seed, report.fingerprint);
        for e in &report.episodes {
            s += &format!(
                "episode {}: {} score {} in {} ticks (fitness {:.4})\n",
                e.episode,
                status_word(e.outcome),
                e.score,
                e.ticks,
                e.fitness
            );
        }
        s
    })
}

fn status_word(s: Status) -> &'static str {
    match s {
        Status::Win => "win",
        Status::Loss => "loss",
        Status::Running => "running",
    }
}

fn record_line(r: &EpisodeRecord) -> String {
    format!(
        "episode {} {}: {} score {} in {} ticks (model steps {})",
        r.index,
        r.game,
        status_word(r.outcome),
        r.score,
        r.ticks,
        r.model_steps
    )
}

/// Restores from `snapshot` when it holds one, otherwise starts fresh.
fn open_runtime(a: &RuntimeArgs) -> Result<Runtime, CliError> {
    let space = default_registry();
    if let Some(dir) = &a.snapshot {
        if dir.join("manifest.txt").is_file() {
            return Runtime::restore(dir, space, None).map_err(failure);
        }
    }
    let seed = a
        .seed
        .ok_or_else(|| usage("--seed is required when not resuming from a snapshot"))?;
    let params = load_params(&space, &a.params)?;
    let games: Vec<GameSpec> = if a.games.is_empty() {
        builtin_suite().iter().map(|g| (**g).clone()).collect()
    } else {
        a.games
            .iter()
            .map(|g| load_game(g).map(|s| (*s).clone()))
            .collect::<Result<_, _>>()?
    };
    let mut moderation = ModerationConfig::default();
    if let Some(path) = &a.blocklist {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("blocklist {}: {e}", path.display())))?;
        moderation = moderation.with_blocklist_text(&text);
    }
    let defaults = RuntimeConfig::default();
    let cfg = RuntimeConfig {
        moderation,
        tune_every: a.tune_every.unwrap_or(defaults.tune_every),
        snapshot_dir: a.snapshot.clone(),
        ..defaults
    };
    Runtime::new(space, AgentFingerprint::new(params, seed), games, cfg).map_err(usage)
}

fn run(a: &RunArgs, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    let mut rt = open_runtime(&a.runtime)?;
    let played: Vec<EpisodeRecord> = (0..a.episodes).filter_map(|_| rt.step_cycle()).collect();
    let snapshot = match &a.runtime.snapshot {
        Some(dir) => {
            rt.snapshot(dir).map_err(failure)?;
            Some(dir.display().to_string())
        }
        None => None,
    };
    let report = RunReport {
        played,
        total_episodes: rt.episodes(),
        snapshot,
    };
    emit(out, format, &report, || {
        let mut s: String = report.played.iter().map(|r| record_line(r) + "\n").collect();
        s += &format!("{} episodes in total", report.total_episodes);
        if let Some(dir) = &report.snapshot {
            s += &format!("\nsnapshot written to {dir}");
        }
        s
    })
}

fn tune(a: &TuneArgs, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    if a.budget == 0 {
        return Err(usage("--budget must be at least 1"));
    }
    let cfg = NtbeaConfig {
        evaluations: a.budget,
        neighbours: a.neighbours,
        seed: a.seed,
        ..NtbeaConfig::default()
    };
    let (problem, space, recommended, true_value) = if a.synthetic {
        let mut p = OneMax::new(SYNTHETIC_DIMS, SYNTHETIC_SIGMA, a.seed);
        let run = run_ntbea(&mut p, &cfg);
        let value = p.true_value(&run.recommended);
        ("synthetic".to_string(), p.space().clone(), run.recommended, Some(value))
    } else {
        let spec = load_game(a.game.as_deref().unwrap_or_default())?;
        let space = default_registry();
        let mut p = AgentTuningProblem::new(space.clone(), Arc::clone(&spec), a.episodes, a.seed);
        let run = run_ntbea(&mut p, &cfg);
        (spec.name.clone(), space, run.recommended, None)
    };
    let report = TuneReport {
        problem,
        seed: a.seed,
        budget: a.budget,
        recommended: recommended.indices().to_vec(),
        params: recommended.to_text(&space),
        true_value,
    };
    emit(out, format, &report, || {
        let mut s = format!(
            "# tuned {} with {} evaluations, seed {}\n",
            report.problem, report.budget, report.seed
        );
        if let Some(v) = report.true_value {
            s += &format!("# true value {v:.4}\n");
        }
        s + &report.params
    })
}

fn train(a: &TrainArgs, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = load_game(&a.game)?;
    let space = default_registry();
    let params = load_params(&space, &a.params)?;
    let cfg = RuntimeConfig {
        tune_every: 0,
        ..RuntimeConfig::default()
    };
    let name = spec.name.clone();
    let mut rt = Runtime::new(space, AgentFingerprint::new(params, a.seed), vec![(*spec).clone()], cfg).map_err(usage)?;
    let episodes: Vec<EpisodeRecord> = (0..a.episodes).filter_map(|_| rt.step_cycle()).collect();
    if let Some(Event::Error { message }) = rt.events().iter().find(|e| matches!(e, Event::Error { .. })) {
        return Err(failure(message));
    }
    let slot = rt.slot(&name).expect("the trained game is in the library");
    let training_steps = slot.training_steps();
    let model = match &a.model_out {
        Some(path) => {
            let weights = slot.model.as_ref().ok_or_else(|| {
                failure("no model was trained: the replay buffer never reached training_warmup; play more episodes")
            })?;
            save_model(weights, path).map_err(failure)?;
            Some(path.display().to_string())
        }
        None => None,
    };
    let report = TrainReport {
        game: name,
        seed: a.seed,
        episodes,
        training_steps,
        model,
    };
    emit(out, format, &report, || {
        let mut s: String = report.episodes.iter().map(|r| record_line(r) + "\n").collect();
        s += &format!("{} training steps", report.training_steps);
        if let Some(m) = &report.model {
            s += &format!("\nmodel written to {m}");
        }
        s
    })
}

fn show_stats(a: &StatsArgs, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    let dir = a
        .snapshot
        .as_ref()
        .ok_or_else(|| usage(format!("--snapshot or {SNAPSHOT_ENV} is required")))?;
    if !dir.join("manifest.txt").is_file() {
        return Err(usage(format!("{}: not a snapshot directory", dir.display())));
    }
    let text = std::fs::read_to_string(dir.join("events.jsonl")).map_err(failure)?;
    let events = parse_events(&text).map_err(failure)?;
    let reports = match &a.game {
        Some(g) => vec![stats(&events, Some(g), a.window)],
        None => {
            let games: BTreeSet<&str> = events
                .iter()
                .filter_map(|e| match e {
                    Event::Episode(r) => Some(r.game.as_str()),
                    _ => None,
                })
                .collect();
            std::iter::once(stats(&events, None, a.window))
                .chain(games.into_iter().map(|g| stats(&events, Some(g), a.window)))
                .collect()
        }
    };
    let report = StatsOutput { reports };
    emit(out, format, &report, || {
        report.reports.iter().map(|r| r.to_text() + "\n").collect()
    })
}

fn serve(a: &ServeArgs, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    let rt = open_runtime(&a.runtime)?;
    let tokio = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(failure)?;
    let rt = tokio.block_on(async {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .map_err(|e| failure(format!("bind {}:{}: {e}", a.host, a.port)))?;
        let addr = listener.local_addr().map_err(failure)?.to_string();
        let listening = ServeEvent::Listening { listening: addr.clone() };
        emit(out, format, &listening, || format!("listening on http://{addr}"))?;
        evoplay_server::serve(rt, listener, a.episodes).await.map_err(failure)
    })?;
    let snapshot = match &a.runtime.snapshot {
        Some(dir) => {
            rt.snapshot(dir).map_err(failure)?;
            Some(dir.display().to_string())
        }
        None => None,
    };
    let stopped = ServeEvent::Stopped {
        episodes: rt.episodes(),
        snapshot: snapshot.clone(),
    };
    emit(out, format, &stopped, || match &snapshot {
        Some(dir) => format!("stopped after {} episodes; snapshot written to {dir}", rt.episodes()),
        None => format!("stopped after {} episodes", rt.episodes()),
    })
}

fn validate(a: &ValidateArgs, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.file).map_err(|e| usage(format!("{}: {e}", a.file.display())))?;
    let file = a.file.display().to_string();
    match parse_gdf(&text) {
        Ok(spec) => {
            let report = ValidateReport {
                file,
                ok: true,
                game: Some(spec.name.clone()),
                width: Some(spec.width),
                height: Some(spec.height),
                error: None,
            };
            emit(out, format, &report, || "ok".to_string())
        }
        Err(e) => {
            let report = ValidateReport {
                file: file.clone(),
                ok: false,
                game: None,
                width: None,
                height: None,
                error: Some(e.to_string()),
            };
            emit(out, format, &report, || format!("invalid: {e}"))?;
            Err(failure(format!("{file} is not a valid game")))
        }
    }
}
