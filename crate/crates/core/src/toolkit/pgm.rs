//! Binary PGM (P5) grids.

use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::image::Image;

pub const GUTTER: usize = 2;

/// An 8-bit grayscale raster as stored in a PGM file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Raster {
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }
}

/// Tiles images row-major with white gutters between cells.
pub fn grid_raster(images: &[Image], columns: usize) -> Result<Raster> {
    let first = images.first().ok_or_else(|| invalid("grid needs at least one image"))?;
    if columns == 0 {
        return Err(invalid("grid needs at least one column"));
    }
    let (w, h) = (first.width(), first.height());
    if images.iter().any(|im| im.width() != w || im.height() != h) {
        return Err(invalid("grid images must share one size"));
    }
    let cols = columns.min(images.len());
    let rows = images.len().div_ceil(cols);
    let width = cols * w + (cols - 1) * GUTTER;
    let height = rows * h + (rows - 1) * GUTTER;
    let mut pixels = vec![u8::MAX; width * height];
    for (i, image) in images.iter().enumerate() {
        let top = (i / cols) * (h + GUTTER);
        let left = (i % cols) * (w + GUTTER);
        let q = image.quantized();
        for r in 0..h {
            let start = (top + r) * width + left;
            pixels[start..start + w].copy_from_slice(&q[r * w..(r + 1) * w]);
        }
    }
    Ok(Raster { width, height, pixels })
}

pub fn raster_to_bytes(raster: &Raster) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", raster.width, raster.height).into_bytes();
    out.extend_from_slice(&raster.pixels);
    out
}

pub fn write_grid(images: &[Image], columns: usize, path: impl AsRef<Path>) -> Result<()> {
    let raster = grid_raster(images, columns)?;
    std::fs::write(path, raster_to_bytes(&raster))?;
    Ok(())
}

/// Parses a P5 file with maxval 255; header comments are skipped.
pub fn parse_pgm(bytes: &[u8]) -> Result<Raster> {
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format { offset: pos as u64, message: "truncated PGM header".into() });
        }
        fields.push((start, String::from_utf8_lossy(&bytes[start..pos]).into_owned()));
    }
    if fields[0].1 != "P5" {
        return Err(Error::Format { offset: 0, message: format!("expected P5, found {:?}", fields[0].1) });
    }
    let mut dims = [0usize; 3];
    for (slot, (offset, text)) in dims.iter_mut().zip(&fields[1..]) {
        *slot = text.parse().map_err(|_| Error::Format {
            offset: *offset as u64,
            message: format!("bad header number {text:?}"),
        })?;
    }
    let [width, height, maxval] = dims;
    if maxval != 255 {
        return Err(Error::Format { offset: fields[3].0 as u64, message: format!("unsupported maxval {maxval}") });
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let expected = width * height;
    if bytes.len() < pos || bytes.len() - pos != expected {
        return Err(Error::Format {
            offset: pos.min(bytes.len()) as u64,
            message: format!("expected {expected} raster bytes, found {}", bytes.len().saturating_sub(pos)),
        });
    }
    Ok(Raster { width, height, pixels: bytes[pos..].to_vec() })
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Raster> {
    parse_pgm(&std::fs::read(path)?)
}
