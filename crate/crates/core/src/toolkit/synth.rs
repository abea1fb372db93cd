//! Offline stand-in for handwritten digits: seeded 28×28 renderings of ring
//! ("0"-like) and bar ("1"-like) strokes.

use crate::error::{invalid, Result};
use crate::image::Image;
use crate::rng::SplitMix64;

pub const SYNTH_SIZE: usize = 28;
pub const DEFAULT_JITTER: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeClass {
    Ring,
    Bar,
}

impl ShapeClass {
    pub fn from_id(class_id: u32) -> Result<Self> {
        match class_id {
            0 => Ok(Self::Ring),
            1 => Ok(Self::Bar),
            other => Err(invalid(format!(
                "unknown synthetic class {other} (0 = ring, 1 = bar)"
            ))),
        }
    }
}

pub fn synth_dataset(n: usize, class_id: u32, seed: u64) -> Result<Vec<Image>> {
    synth_dataset_with_jitter(n, class_id, seed, DEFAULT_JITTER)
}

/// `jitter` scales every random perturbation; 0 renders the canonical shape.
pub fn synth_dataset_with_jitter(
    n: usize,
    class_id: u32,
    seed: u64,
    jitter: f64,
) -> Result<Vec<Image>> {
    if n == 0 {
        return Err(invalid("synthetic dataset size must be at least 1"));
    }
    if !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(invalid(format!("jitter must be finite and >= 0, got {jitter}")));
    }
    let class = ShapeClass::from_id(class_id)?;
    let mut rng = SplitMix64::stream(seed, 0x5EED_0000 + class_id as u64);
    Ok((0..n)
        .map(|_| match class {
            ShapeClass::Ring => render_ring(&mut rng, jitter),
            ShapeClass::Bar => render_bar(&mut rng, jitter),
        })
        .collect())
}

fn stroke(dist: f64, width: f64) -> f64 {
    (-0.5 * (dist / width).powi(2)).exp()
}

fn render(f: impl Fn(f64, f64) -> f64) -> Image {
    let mut pixels = Vec::with_capacity(SYNTH_SIZE * SYNTH_SIZE);
    for row in 0..SYNTH_SIZE {
        for col in 0..SYNTH_SIZE {
            pixels.push(f(col as f64, row as f64).clamp(0.0, 1.0));
        }
    }
    Image::new(SYNTH_SIZE, SYNTH_SIZE, pixels).expect("clamped pixels")
}

fn render_ring(rng: &mut SplitMix64, j: f64) -> Image {
    let cx = 13.5 + j * rng.normal();
    let cy = 13.5 + j * rng.normal();
    let rx = 6.5 + j * 1.2 * rng.normal();
    let ry = 8.5 + j * 1.0 * rng.normal();
    let rx = rx.clamp(3.0, 11.0);
    let ry = ry.clamp(4.0, 12.0);
    let tilt = j * 0.3 * rng.normal();
    let width = (1.1 + j * rng.uniform(-0.3, 0.6)).max(0.5);
    // A faded arc makes some rings look unfinished.
    let gap_depth = j * rng.uniform(0.0, 0.9) * f64::from(rng.next_f64() < 0.3);
    let gap_angle = rng.uniform(0.0, std::f64::consts::TAU);
    let (sin, cos) = tilt.sin_cos();
    render(|x, y| {
        let (dx, dy) = (x - cx, y - cy);
        let u = cos * dx + sin * dy;
        let v = -sin * dx + cos * dy;
        let r = ((u / rx).powi(2) + (v / ry).powi(2)).sqrt();
        let dist = (r - 1.0) * 0.5 * (rx + ry);
        let phi = v.atan2(u);
        let gap = (phi - gap_angle).cos().max(0.0).powi(4);
        stroke(dist, width) * (1.0 - gap_depth * gap)
    })
}

fn render_bar(rng: &mut SplitMix64, j: f64) -> Image {
    let cx = 13.5 + j * 1.5 * rng.normal();
    let cy = 13.5 + j * rng.normal();
    let half = (9.0 + j * rng.normal()).clamp(5.0, 12.0);
    let tilt = j * 0.3 * rng.normal();
    let width = (1.1 + j * rng.uniform(-0.3, 0.6)).max(0.5);
    let (sin, cos) = tilt.sin_cos();
    let (ax, ay) = (cx - sin * half, cy - cos * half);
    let (bx, by) = (cx + sin * half, cy + cos * half);
    render(|x, y| {
        let (abx, aby) = (bx - ax, by - ay);
        let t = (((x - ax) * abx + (y - ay) * aby) / (abx * abx + aby * aby)).clamp(0.0, 1.0);
        let (px, py) = (ax + t * abx, ay + t * aby);
        stroke(((x - px).powi(2) + (y - py).powi(2)).sqrt(), width)
    })
}
