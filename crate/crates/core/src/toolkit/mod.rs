//! Dataset ingestion, persistence formats and figure export.

pub mod idx;
pub mod pgm;
pub mod score_table;
pub mod synth;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::Result;

pub use idx::{parse_idx, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels, IdxData};
pub use pgm::{read_pgm, write_grid, Raster};
pub use score_table::{checksum, ScoreTable, TableMetadata};
pub use synth::{synth_dataset, synth_dataset_with_jitter, ShapeClass};

/// Pretty JSON with a trailing newline; field order follows the type.
pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, json_bytes(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}
