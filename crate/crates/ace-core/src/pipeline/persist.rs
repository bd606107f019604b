//! Single-file pipeline persistence: 4 magic bytes, a little-endian `u16`
//! format version, then a self-describing JSON model tree. Reloading yields
//! bitwise-identical estimates.

use std::io::{Read, Write};

use thiserror::Error;

use crate::Real;

use super::TrainedPipeline;

pub const MAGIC: [u8; 4] = *b"ACEK";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a pipeline file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported format version {0} (this build reads {FORMAT_VERSION})")]
    UnsupportedVersion(u16),
    #[error("corrupt payload: {0}")]
    Corrupt(#[from] serde_json::Error),
    #[error("corrupt payload: truncated header")]
    Truncated,
}

pub fn save_pipeline<F: Real>(
    pipeline: &TrainedPipeline<F>,
    mut sink: impl Write,
) -> Result<(), PersistError> {
    sink.write_all(&MAGIC)?;
    sink.write_all(&FORMAT_VERSION.to_le_bytes())?;
    serde_json::to_writer(&mut sink, pipeline)?;
    sink.flush()?;
    Ok(())
}

pub fn load_pipeline<F: Real>(mut source: impl Read) -> Result<TrainedPipeline<F>, PersistError> {
    let mut header = [0u8; 6];
    source.read_exact(&mut header).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            PersistError::Truncated
        } else {
            PersistError::Io(e)
        }
    })?;
    if header[..4] != MAGIC {
        return Err(PersistError::BadMagic);
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != FORMAT_VERSION {
        return Err(PersistError::UnsupportedVersion(version));
    }
    Ok(serde_json::from_reader(source)?)
}
