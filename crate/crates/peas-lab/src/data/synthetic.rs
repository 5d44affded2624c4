//! Deterministic synthetic image classes: tiled geometric patterns
//! (bars/disks/crosses/checkers) with per-sample phase, contrast, tint, and
//! noise. Patterns tile the whole frame, so class identity survives the
//! subtle shifts and crops used during perceptual exploration while staying
//! separable for small CNNs.

use crate::error::{Error, Result};
use crate::rng::rng_for;
use crate::tensor::{ImageTensor, LabeledSample};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f32::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Number of classes (2..=16).
    pub classes: usize,
    pub shape: (usize, usize, usize),
    /// Training samples per class; the test split gets max(2, per_class/4).
    pub per_class: usize,
    pub seed: u64,
    /// Maximum half-width of the additive uniform pixel noise.
    pub noise: f32,
}

impl SyntheticSpec {
    pub fn new(classes: usize, shape: (usize, usize, usize), per_class: usize, seed: u64) -> Self {
        SyntheticSpec {
            classes,
            shape,
            per_class,
            seed,
            noise: 0.06,
        }
    }

    pub fn test_per_class(&self) -> usize {
        (self.per_class / 4).max(2)
    }
}

const MAX_CLASSES: usize = 16;

/// Generate (train, test) splits. Fully determined by the spec, including
/// the seed: per-sample streams are derived from (seed, split, class, index).
pub fn generate_synthetic_dataset(spec: &SyntheticSpec) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    let (c, h, w) = spec.shape;
    if spec.classes < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 classes, got {}",
            spec.classes
        )));
    }
    if spec.classes > MAX_CLASSES {
        return Err(Error::InvalidArgument(format!(
            "at most {MAX_CLASSES} synthetic classes are defined, got {}",
            spec.classes
        )));
    }
    if spec.per_class < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 samples per class, got {}",
            spec.per_class
        )));
    }
    if h < 8 || w < 8 {
        return Err(Error::InvalidArgument(format!(
            "degenerate shape: H and W must be >= 8, got {h}x{w}"
        )));
    }
    if c != 1 && c != 3 {
        return Err(Error::InvalidArgument(format!(
            "synthetic images support 1 or 3 channels, got {c}"
        )));
    }

    let mut train = Vec::with_capacity(spec.classes * spec.per_class);
    let mut test = Vec::with_capacity(spec.classes * spec.test_per_class());
    for (split_id, count, out) in [(0u64, spec.per_class, &mut train), (1u64, spec.test_per_class(), &mut test)] {
        for class in 0..spec.classes {
            for index in 0..count {
                let mut rng = rng_for(spec.seed, &[split_id, class as u64, index as u64]);
                out.push(LabeledSample::new(render(spec, class, &mut rng), class));
            }
        }
    }
    Ok((train, test))
}

/// Pattern families cycle with the class index; the tier (class / 4) varies
/// orientation or scale so up to 16 classes stay mutually distinct.
#[derive(Debug, Clone, Copy)]
enum Family {
    Bars,
    Disks,
    Crosses,
    Checkers,
}

fn family_of(class: usize) -> (Family, usize) {
    let family = match class % 4 {
        0 => Family::Bars,
        1 => Family::Disks,
        2 => Family::Crosses,
        _ => Family::Checkers,
    };
    (family, class / 4)
}

fn render(spec: &SyntheticSpec, class: usize, rng: &mut ChaCha8Rng) -> ImageTensor {
    let (c, h, w) = spec.shape;
    let (family, tier) = family_of(class);
    let side = h.min(w) as f32;

    // Per-sample appearance parameters.
    let jitter = rng.gen_range(0.90..1.10f32);
    let phase_y = rng.gen_range(0.0..side);
    let phase_x = rng.gen_range(0.0..side);
    let contrast = rng.gen_range(0.35..0.70f32);
    let bg = rng.gen_range(0.12..(0.92 - contrast));
    let fg = bg + contrast;
    let noise_amp = rng.gen_range(0.01..spec.noise.max(0.011));
    // Per-channel tint; for C=1 only the first entry is used.
    let tint_bg: Vec<f32> = (0..c).map(|_| rng.gen_range(0.80..1.0f32)).collect();
    let tint_fg: Vec<f32> = (0..c).map(|_| rng.gen_range(0.80..1.0f32)).collect();

    let mut img = ImageTensor::zeros(spec.shape);
    let mut mask = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            let fy = y as f32 + phase_y;
            let fx = x as f32 + phase_x;
            mask[y * w + x] = pattern_value(family, tier, side, jitter, fy, fx);
        }
    }
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                let v = mask[y * w + x];
                let base = bg * tint_bg[ch] + (fg * tint_fg[ch] - bg * tint_bg[ch]) * v;
                let noisy = base + rng.gen_range(-noise_amp..noise_amp);
                *img.at_mut(ch, y, x) = noisy.clamp(0.0, 1.0);
            }
        }
    }
    img
}

/// Pattern intensity in [0, 1] at (sub)pixel coordinates.
fn pattern_value(family: Family, tier: usize, side: f32, jitter: f32, fy: f32, fx: f32) -> f32 {
    match family {
        Family::Bars => {
            // Orientation by tier: horizontal, vertical, diagonal, anti-diagonal.
            let period = (side / 5.0).max(6.0) * jitter;
            let coord = match tier {
                0 => fy,
                1 => fx,
                2 => (fy + fx) * std::f32::consts::FRAC_1_SQRT_2,
                _ => (fy - fx) * std::f32::consts::FRAC_1_SQRT_2,
            };
            0.5 * (1.0 + (TAU * coord / period).sin())
        }
        Family::Disks => {
            let spacing = match tier {
                0 => (side / 4.0).max(8.0),
                1 => (side / 6.5).max(6.0),
                2 => (side / 3.0).max(10.0),
                _ => (side / 5.2).max(7.0),
            } * jitter;
            let radius = 0.32 * spacing;
            let dy = fy.rem_euclid(spacing) - spacing / 2.0;
            let dx = fx.rem_euclid(spacing) - spacing / 2.0;
            let d = (dy * dy + dx * dx).sqrt();
            let v = soft_step(radius - d, 1.2);
            if tier >= 2 {
                1.0 - v
            } else {
                v
            }
        }
        Family::Crosses => {
            let spacing = match tier {
                0 => (side / 4.0).max(9.0),
                1 => (side / 6.0).max(7.0),
                2 => (side / 3.2).max(11.0),
                _ => (side / 5.0).max(8.0),
            } * jitter;
            let thickness = (0.10 * spacing).max(1.2);
            let arm = 0.38 * spacing;
            let dy = (fy.rem_euclid(spacing) - spacing / 2.0).abs();
            let dx = (fx.rem_euclid(spacing) - spacing / 2.0).abs();
            let horizontal = soft_step(thickness - dy, 1.0) * soft_step(arm - dx, 1.0);
            let vertical = soft_step(thickness - dx, 1.0) * soft_step(arm - dy, 1.0);
            horizontal.max(vertical)
        }
        Family::Checkers => {
            let cell = match tier {
                0 => (side / 5.0).max(6.0),
                1 => (side / 8.0).max(4.0),
                2 => (side / 3.5).max(8.0),
                _ => (side / 6.5).max(5.0),
            } * jitter;
            // Smooth checkerboard: product of two gratings, sharpened.
            let gy = (TAU * fy / (2.0 * cell)).sin();
            let gx = (TAU * fx / (2.0 * cell)).sin();
            soft_step(gy * gx, 0.18)
        }
    }
}

/// 0 below -edge, 1 above +edge, linear in between.
fn soft_step(v: f32, edge: f32) -> f32 {
    ((v / edge + 1.0) * 0.5).clamp(0.0, 1.0)
}
