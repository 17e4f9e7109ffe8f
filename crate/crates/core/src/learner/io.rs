//! Model file layout, all integers and floats little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `THY1` |
//! | 4 | `u32` game-id length `g` |
//! | g | game id, UTF-8 |
//! | 16 | `u32` ×4: input, hidden1, hidden2, actions |
//! | 8·P | `f64` parameters in `W1 b1 W2 b2 Wp bp wv bv` order, row-major |
//! | 8 | `u64` training-step counter |
//!
//! Nothing may follow the step counter.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::model::{param_count, LearnError, ModelWeights};
use crate::game::Action;

pub const MAGIC: &[u8; 4] = b"THY1";

pub fn encode_model(model: &ModelWeights) -> Vec<u8> {
    let mut out = Vec::with_capacity(40 + model.game.len() + 8 * model.params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(model.game.len() as u32).to_le_bytes());
    out.extend_from_slice(model.game.as_bytes());
    for d in model.dims.iter().copied().chain([Action::COUNT]) {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for w in &model.params {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out.extend_from_slice(&model.steps.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LearnError> {
        if self.buf.len() < n {
            return Err(LearnError::Format("truncated".into()));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, LearnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelWeights, LearnError> {
    let mut r = Reader { buf: bytes };
    if r.take(4)? != MAGIC {
        return Err(LearnError::Format("bad magic".into()));
    }
    let glen = r.u32()? as usize;
    let game = std::str::from_utf8(r.take(glen)?)
        .map_err(|_| LearnError::Format("game id is not UTF-8".into()))?
        .to_string();
    let dims = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    let actions = r.u32()? as usize;
    if actions != Action::COUNT {
        return Err(LearnError::Format(format!("{actions} actions, expected {}", Action::COUNT)));
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d.max(1)))
        .map(|_| param_count(dims))
        .ok_or_else(|| LearnError::Format("dimensions overflow".into()))?;
    let raw = r.take(count.checked_mul(8).ok_or_else(|| LearnError::Format("dimensions overflow".into()))?)?;
    let params = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let steps = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
    if !r.buf.is_empty() {
        return Err(LearnError::Format("trailing bytes".into()));
    }
    Ok(ModelWeights {
        game,
        dims,
        params,
        steps,
    })
}

/// Writes via a temporary file and rename, so readers never see a partial
/// model.
pub fn save_model(model: &ModelWeights, path: &Path) -> Result<(), LearnError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&encode_model(model))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelWeights, LearnError> {
    decode_model(&fs::read(path)?)
}

/// Loads a model and checks it belongs to `game` with the given input width.
pub fn load_model_for(path: &Path, game: &str, input_len: usize) -> Result<ModelWeights, LearnError> {
    let m = load_model(path)?;
    if m.game != game {
        return Err(LearnError::WrongGame {
            expected: game.to_string(),
            found: m.game,
        });
    }
    if m.dims[0] != input_len {
        return Err(LearnError::Dimension {
            expected: input_len,
            found: m.dims[0],
        });
    }
    Ok(m)
}
