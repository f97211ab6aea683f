//! Checkpoint container: `MZNV`, a little-endian `u16` version, then
//! length-prefixed sections (config echo, step, trainer state, loop state).

use std::path::Path;

use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 4] = b"MZNV";
pub const VERSION: u16 = 1;
const SECTIONS: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    /// Canonical config text the run was started with.
    pub config: String,
    pub step: u64,
    /// Learner, optimizer, replay, environment and RNG state.
    pub trainer: Vec<u8>,
    /// Training-loop bookkeeping (metrics so far, pending episode stats).
    pub progress: Vec<u8>,
}

fn bad(m: impl Into<String>) -> HarnessError {
    HarnessError::Runtime(format!("checkpoint: {}", m.into()))
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let step = self.step.to_le_bytes();
        let sections: [&[u8]; SECTIONS] = [self.config.as_bytes(), &step, &self.trainer, &self.progress];
        let mut out = Vec::with_capacity(6 + sections.iter().map(|s| s.len() + 8).sum::<usize>());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for s in sections {
            out.extend_from_slice(&(s.len() as u64).to_le_bytes());
            out.extend_from_slice(s);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 6 || &bytes[..4] != MAGIC {
            return Err(bad("missing MZNV header"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let mut pos = 6;
        let mut sections = Vec::with_capacity(SECTIONS);
        for i in 0..SECTIONS {
            let len_bytes = bytes.get(pos..pos + 8).ok_or_else(|| bad(format!("truncated before section {i}")))?;
            let len = u64::from_le_bytes(len_bytes.try_into().expect("8 bytes")) as usize;
            pos += 8;
            let end = pos.checked_add(len).filter(|e| *e <= bytes.len());
            let end = end.ok_or_else(|| bad(format!("section {i} overruns the file")))?;
            sections.push(&bytes[pos..end]);
            pos = end;
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        let config = String::from_utf8(sections[0].to_vec()).map_err(|_| bad("config echo is not UTF-8"))?;
        let step = u64::from_le_bytes(
            sections[1]
                .try_into()
                .map_err(|_| bad("step section must be 8 bytes"))?,
        );
        Ok(Checkpoint {
            config,
            step,
            trainer: sections[2].to_vec(),
            progress: sections[3].to_vec(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        // write-then-rename so an interrupted save never leaves a torn file
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| HarnessError::Runtime(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}
