//! Checkpoint file format.
//!
//! ```text
//! "PXGENCKP"                 8-byte magic
//! u64 little-endian          header length in bytes
//! JSON header                shapes, epoch, learning rate, seed
//! f64 little-endian × N      per layer in header order: weight row-major, then bias
//! ```

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::params::{Architecture, VaeParams};
use super::train::Checkpoint;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PXGENCKP";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerShape {
    name: String,
    weight: [usize; 2],
    bias: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    image_width: usize,
    image_height: usize,
    hidden_dims: Vec<usize>,
    latent_dim: usize,
    epoch: usize,
    learning_rate: f64,
    seed: u64,
    layers: Vec<LayerShape>,
}

fn format_err(offset: u64, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: message.into(),
    }
}

pub fn checkpoint_to_bytes(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let p = &ckpt.params;
    p.validate()?;
    let header = Header {
        image_width: p.arch.image_width,
        image_height: p.arch.image_height,
        hidden_dims: p.arch.hidden_dims.clone(),
        latent_dim: p.arch.latent_dim,
        epoch: ckpt.epoch,
        learning_rate: ckpt.learning_rate,
        seed: ckpt.seed,
        layers: p
            .layer_names()
            .into_iter()
            .zip(p.layers())
            .map(|(name, l)| LayerShape {
                name,
                weight: [l.weight.nrows(), l.weight.ncols()],
                bias: l.bias.len(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + 8 * p.num_params());
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_u64::<LittleEndian>(json.len() as u64)?;
    out.write_all(&json)?;
    for v in p.values() {
        out.write_f64::<LittleEndian>(v)?;
    }
    Ok(out)
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let mut cur = Cursor::new(bytes);
    let mut magic = [0u8; 8];
    cur.read_exact(&mut magic)
        .map_err(|_| format_err(0, "file shorter than the magic"))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(format_err(0, "bad checkpoint magic"));
    }
    let header_len = cur
        .read_u64::<LittleEndian>()
        .map_err(|_| format_err(8, "truncated header length"))? as usize;
    let start = 16usize;
    let end = start
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| format_err(16, format!("header of {header_len} bytes is truncated")))?;
    let header: Header = serde_json::from_slice(&bytes[start..end])
        .map_err(|e| format_err(16, format!("invalid header: {e}")))?;

    let arch = Architecture::new(
        header.image_width,
        header.image_height,
        header.hidden_dims.clone(),
        header.latent_dim,
    )
    .map_err(|e| format_err(16, e.to_string()))?;
    let mut params = VaeParams::zeros(&arch);
    let declared_ok = header.layers.len() == params.layer_names().len()
        && header
            .layers
            .iter()
            .zip(params.layer_names().iter().zip(params.layers()))
            .all(|(s, (name, l))| {
                &s.name == name
                    && s.weight == [l.weight.nrows(), l.weight.ncols()]
                    && s.bias == l.bias.len()
            });
    if !declared_ok {
        return Err(format_err(16, "declared layer shapes do not match the architecture"));
    }

    let payload = &bytes[end..];
    let expected = 8 * params.num_params();
    if payload.len() != expected {
        return Err(format_err(
            end as u64 + payload.len().min(expected) as u64,
            format!("parameter payload has {} bytes, expected {expected}", payload.len()),
        ));
    }
    let mut cur = Cursor::new(payload);
    for v in params.values_mut() {
        *v = cur.read_f64::<LittleEndian>()?;
    }
    Ok(Checkpoint {
        epoch: header.epoch,
        params,
        learning_rate: header.learning_rate,
        seed: header.seed,
    })
}

pub fn write_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let bytes = checkpoint_to_bytes(ckpt)?;
    fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    checkpoint_from_bytes(&fs::read(path)?)
}
