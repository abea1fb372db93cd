//! Big-endian IDX files as used by MNIST.

use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{invalid, Error, Result};
use crate::image::Image;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub enum IdxData {
    Images(Vec<Image>),
    Labels(Vec<u8>),
}

fn format_error(offset: u64, message: impl Into<String>) -> Error {
    Error::Format { offset, message: message.into() }
}

fn read_u32(cur: &mut Cursor<&[u8]>, what: &str) -> Result<u32> {
    let offset = cur.position();
    cur.read_u32::<BigEndian>()
        .map_err(|_| format_error(offset, format!("truncated {what}")))
}

fn read_payload(cur: &mut Cursor<&[u8]>, len: usize) -> Result<Vec<u8>> {
    let offset = cur.position();
    let available = cur.get_ref().len() as u64 - offset;
    if (len as u64) > available {
        return Err(format_error(
            offset + available,
            format!("payload truncated: expected {len} bytes, found {available}"),
        ));
    }
    let mut buf = vec![0u8; len];
    cur.read_exact(&mut buf)?;
    if cur.position() != cur.get_ref().len() as u64 {
        return Err(format_error(cur.position(), "trailing bytes after payload"));
    }
    Ok(buf)
}

/// Decodes an IDX image (`0x00000803`) or label (`0x00000801`) file.
pub fn parse_idx_bytes(bytes: &[u8]) -> Result<IdxData> {
    let mut cur = Cursor::new(bytes);
    let magic = read_u32(&mut cur, "magic number")?;
    match magic {
        IMAGE_MAGIC => {
            let count = read_u32(&mut cur, "image count")? as usize;
            let height = read_u32(&mut cur, "row count")? as usize;
            let width = read_u32(&mut cur, "column count")? as usize;
            if width == 0 || height == 0 {
                return Err(format_error(8, format!("image size {width}x{height} must be positive")));
            }
            let size = width * height;
            let payload = read_payload(&mut cur, count * size)?;
            let images = payload
                .chunks_exact(size)
                .map(|chunk| Image::new(width, height, chunk.iter().map(|&b| f64::from(b) / 255.0).collect()))
                .collect::<Result<Vec<_>>>()?;
            Ok(IdxData::Images(images))
        }
        LABEL_MAGIC => {
            let count = read_u32(&mut cur, "label count")? as usize;
            Ok(IdxData::Labels(read_payload(&mut cur, count)?))
        }
        other => Err(format_error(0, format!("unrecognized magic number {other:#010x}"))),
    }
}

pub fn parse_idx(path: impl AsRef<Path>) -> Result<IdxData> {
    parse_idx_bytes(&std::fs::read(path)?)
}

pub fn read_idx_images(path: impl AsRef<Path>) -> Result<Vec<Image>> {
    match parse_idx(path)? {
        IdxData::Images(images) => Ok(images),
        IdxData::Labels(_) => Err(format_error(0, "expected an image file, found labels")),
    }
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    match parse_idx(path)? {
        IdxData::Labels(labels) => Ok(labels),
        IdxData::Images(_) => Err(format_error(0, "expected a label file, found images")),
    }
}

pub fn idx_images_to_bytes(images: &[Image]) -> Result<Vec<u8>> {
    let (width, height) = match images.first() {
        Some(first) => (first.width(), first.height()),
        None => return Err(invalid("cannot write an empty image file")),
    };
    if images.iter().any(|im| im.width() != width || im.height() != height) {
        return Err(invalid("all images in an IDX file must share one size"));
    }
    let mut out = Vec::with_capacity(16 + images.len() * width * height);
    out.write_u32::<BigEndian>(IMAGE_MAGIC)?;
    for dim in [images.len(), height, width] {
        out.write_u32::<BigEndian>(dim_u32(dim)?)?;
    }
    for image in images {
        out.extend(image.quantized());
    }
    Ok(out)
}

pub fn idx_labels_to_bytes(labels: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.write_u32::<BigEndian>(LABEL_MAGIC)?;
    out.write_u32::<BigEndian>(dim_u32(labels.len())?)?;
    out.extend_from_slice(labels);
    Ok(out)
}

fn dim_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| invalid(format!("dimension {n} does not fit in an IDX header")))
}

pub fn write_idx_images(images: &[Image], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, idx_images_to_bytes(images)?)?;
    Ok(())
}

pub fn write_idx_labels(labels: &[u8], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, idx_labels_to_bytes(labels)?)?;
    Ok(())
}
