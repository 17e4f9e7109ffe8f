//! Snapshot directory layout:
//!
//! ```text
//! manifest.txt          version, seed, episode count, fingerprint hash, wall clock
//! params.txt            agent fingerprint (seed + parameters)
//! config.json           loop settings
//! state.json            schedule, pending hint, suggestion queue
//! events.jsonl          event log, one record per line
//! games/NNN.gdf         game rules
//! games/NNN.params.txt  the game's (possibly tuned) parameters
//! games/NNN.json        score bounds, episode count, model seed
//! models/NNN.thy        model weights
//! models/NNN.sgd.json   optimiser velocity
//! replay/NNN.jsonl      replay buffer, oldest first
//! tuner/NNN.log         last tuning run
//! ```

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::control::{QueueState, Shared};
use super::coordinator::{GameSlot, Runtime, RuntimeConfig, RuntimeError};
use super::events::parse_events;
use super::schedule::Schedule;
use crate::game::{parse_gdf, serialize_gdf, Action, ScoreBounds};
use crate::learner::{decode_model, encode_model, ReplayBuffer, Sgd, TrainingExample};
use crate::params::{ParameterSet, ParameterSpace};
use crate::planner::AgentFingerprint;

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LoopState {
    schedule: Schedule,
    episodes: u64,
    hint: Option<[f64; Action::COUNT]>,
    queue: QueueState,
}

#[derive(Serialize, Deserialize)]
struct SlotMeta {
    name: String,
    bounds: ScoreBounds,
    episodes: u64,
    model_seed: Option<u64>,
    replay_capacity: usize,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RuntimeError + '_ {
    move |source| RuntimeError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn corrupt(file: &str, msg: impl ToString) -> RuntimeError {
    RuntimeError::Corrupt {
        file: file.to_string(),
        msg: msg.to_string(),
    }
}

struct Writer {
    root: PathBuf,
}

impl Writer {
    fn put(&self, rel: &str, bytes: &[u8]) -> Result<(), RuntimeError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        let mut f = fs::File::create(&path).map_err(io_err(&path))?;
        f.write_all(bytes).map_err(io_err(&path))?;
        f.sync_all().map_err(io_err(&path))
    }

    fn json(&self, rel: &str, value: &impl Serialize) -> Result<(), RuntimeError> {
        let text = serde_json::to_vec_pretty(value).map_err(|e| corrupt(rel, e))?;
        self.put(rel, &text)
    }
}

struct Reader<'a> {
    root: &'a Path,
}

impl Reader<'_> {
    fn bytes(&self, rel: &str) -> Result<Vec<u8>, RuntimeError> {
        let path = self.root.join(rel);
        fs::read(&path).map_err(io_err(&path))
    }

    fn text(&self, rel: &str) -> Result<String, RuntimeError> {
        String::from_utf8(self.bytes(rel)?).map_err(|e| corrupt(rel, e))
    }

    fn json<T: for<'de> Deserialize<'de>>(&self, rel: &str) -> Result<T, RuntimeError> {
        serde_json::from_slice(&self.bytes(rel)?).map_err(|e| corrupt(rel, e))
    }
}

fn manifest_value<'a>(manifest: &'a str, key: &str) -> Option<&'a str> {
    manifest.lines().find_map(|l| {
        let (k, v) = l.split_once('=')?;
        (k.trim() == key).then(|| v.trim())
    })
}

impl Runtime {
    /// Writes the complete state to `dir`. Call between episodes. The
    /// directory is built beside `dir` and renamed into place, so a failed
    /// write leaves any earlier snapshot untouched.
    pub fn snapshot(&self, dir: &Path) -> Result<(), RuntimeError> {
        let parent = dir
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        fs::create_dir_all(parent).map_err(io_err(parent))?;
        let stem = dir.file_name().map_or("snapshot".into(), |n| n.to_string_lossy().into_owned());
        let nonce = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default().as_nanos();
        let tmp = parent.join(format!(".{stem}.tmp-{}-{nonce}", std::process::id()));
        let result = self.write_into(&tmp).and_then(|()| swap_into_place(&tmp, dir));
        if result.is_err() {
            let _ = fs::remove_dir_all(&tmp);
        }
        result
    }

    fn write_into(&self, root: &Path) -> Result<(), RuntimeError> {
        let w = Writer {
            root: root.to_path_buf(),
        };
        fs::create_dir_all(root).map_err(io_err(root))?;
        let now = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default().as_millis();
        let manifest = format!(
            "version = {SNAPSHOT_VERSION}\nseed = {}\nepisodes = {}\nfingerprint = {}\ngames = {}\ncreated_unix_ms = {now}\n",
            self.fingerprint.seed,
            self.episodes,
            self.fingerprint.hash(&self.space),
            self.slots.len(),
        );
        w.put("manifest.txt", manifest.as_bytes())?;
        w.put("params.txt", self.fingerprint.to_text(&self.space).as_bytes())?;
        w.json("config.json", &self.cfg)?;
        w.json(
            "state.json",
            &LoopState {
                schedule: self.schedule.clone(),
                episodes: self.episodes,
                hint: self.hint,
                queue: self.shared.queue_snapshot(),
            },
        )?;
        let events: String = self.shared.events().iter().map(|e| e.to_line() + "\n").collect();
        w.put("events.jsonl", events.as_bytes())?;
        for (i, slot) in self.slots.values().enumerate() {
            w.put(&format!("games/{i:03}.gdf"), serialize_gdf(&slot.spec).as_bytes())?;
            w.put(&format!("games/{i:03}.params.txt"), slot.params.to_text(&self.space).as_bytes())?;
            w.json(
                &format!("games/{i:03}.json"),
                &SlotMeta {
                    name: slot.spec.name.clone(),
                    bounds: slot.bounds,
                    episodes: slot.episodes,
                    model_seed: slot.model_seed,
                    replay_capacity: slot.replay.capacity(),
                },
            )?;
            if let Some(model) = &slot.model {
                w.put(&format!("models/{i:03}.thy"), &encode_model(model))?;
                w.json(&format!("models/{i:03}.sgd.json"), &slot.optimiser)?;
            }
            let mut replay = String::new();
            for ex in slot.replay.iter() {
                replay.push_str(&serde_json::to_string(ex).map_err(|e| corrupt("replay", e))?);
                replay.push('\n');
            }
            w.put(&format!("replay/{i:03}.jsonl"), replay.as_bytes())?;
            w.put(&format!("tuner/{i:03}.log"), slot.tuner_log.as_bytes())?;
        }
        Ok(())
    }

    /// Rebuilds a runtime from `dir`. Parameters missing from the snapshot
    /// (registered after it was written) take their defaults. `cfg`
    /// overrides the stored loop settings.
    pub fn restore(
        dir: &Path,
        space: ParameterSpace,
        cfg: Option<RuntimeConfig>,
    ) -> Result<Runtime, RuntimeError> {
        if !dir.join("manifest.txt").is_file() {
            return Err(RuntimeError::MissingSnapshot(dir.to_path_buf()));
        }
        let r = Reader { root: dir };
        let manifest = r.text("manifest.txt")?;
        let version: u32 = manifest_value(&manifest, "version")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| corrupt("manifest.txt", "missing version"))?;
        if version > SNAPSHOT_VERSION {
            return Err(corrupt("manifest.txt", format!("unsupported version {version}")));
        }
        let games: usize = manifest_value(&manifest, "games")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| corrupt("manifest.txt", "missing game count"))?;
        let fingerprint = AgentFingerprint::from_text(&space, &r.text("params.txt")?)?;
        let cfg = match cfg {
            Some(c) => c,
            None => r.json("config.json")?,
        };
        let state: LoopState = r.json("state.json")?;
        let events = parse_events(&r.text("events.jsonl")?).map_err(|e| corrupt("events.jsonl", e))?;

        let mut slots = std::collections::BTreeMap::new();
        for i in 0..games {
            let gdf = format!("games/{i:03}.gdf");
            let spec = parse_gdf(&r.text(&gdf)?).map_err(|e| corrupt(&gdf, e))?;
            let params = ParameterSet::from_text(&space, &r.text(&format!("games/{i:03}.params.txt"))?)?;
            let meta: SlotMeta = r.json(&format!("games/{i:03}.json"))?;
            if meta.name != spec.name {
                return Err(corrupt(&gdf, "game name differs from its metadata"));
            }
            let model_file = format!("models/{i:03}.thy");
            let (model, optimiser) = if dir.join(&model_file).is_file() {
                let m = decode_model(&r.bytes(&model_file)?)?;
                if m.game != spec.name {
                    return Err(corrupt(&model_file, "model belongs to another game"));
                }
                let sgd: Sgd = r.json(&format!("models/{i:03}.sgd.json"))?;
                (Some(Arc::new(m)), sgd)
            } else {
                (None, Sgd::new())
            };
            let replay_file = format!("replay/{i:03}.jsonl");
            let mut replay = ReplayBuffer::new(&spec.name, meta.replay_capacity.max(1));
            for line in r.text(&replay_file)?.lines().filter(|l| !l.is_empty()) {
                let ex: TrainingExample = serde_json::from_str(line).map_err(|e| corrupt(&replay_file, e))?;
                replay.push(ex);
            }
            let slot = GameSlot {
                spec: Arc::new(spec),
                params,
                bounds: meta.bounds,
                episodes: meta.episodes,
                model,
                model_seed: meta.model_seed,
                optimiser,
                replay,
                tuner_log: r.text(&format!("tuner/{i:03}.log"))?,
            };
            slots.insert(meta.name, slot);
        }
        for g in state.schedule.library().iter().chain(state.schedule.pending()) {
            if !slots.contains_key(g) {
                return Err(corrupt("state.json", format!("scheduled game {g} has no rules")));
            }
        }

        let shared = Arc::new(Shared::new(cfg.moderation.clone(), cfg.window));
        shared.replace_events(events);
        shared.replace_queue(state.queue);
        let rt = Runtime {
            space,
            cfg,
            fingerprint,
            slots,
            schedule: state.schedule,
            episodes: state.episodes,
            hint: state.hint,
            shared,
        };
        rt.publish_view();
        Ok(rt)
    }
}

/// Replaces `dir` with the finished `tmp`. An old snapshot is moved aside
/// first and deleted only after the new one is in place.
fn swap_into_place(tmp: &Path, dir: &Path) -> Result<(), RuntimeError> {
    if dir.exists() {
        let old = tmp.with_extension("old");
        fs::rename(dir, &old).map_err(io_err(dir))?;
        if let Err(e) = fs::rename(tmp, dir) {
            let _ = fs::rename(&old, dir);
            return Err(io_err(dir)(e));
        }
        let _ = fs::remove_dir_all(&old);
        Ok(())
    } else {
        fs::rename(tmp, dir).map_err(io_err(dir))
    }
}
