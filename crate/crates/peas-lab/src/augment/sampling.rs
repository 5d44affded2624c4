//! Sampling functions: seeded generators of perceptually equivalent variants.
//!
//! Three modes: one random augmentation per draw, all augmentations composed
//! in a fixed order, or plain epsilon-ball noise (the ranking baseline's
//! sampler). Draw `i` depends only on (seed, i, input), so exploration
//! workers can split a stream by index without coordinating.

use super::{
    apply_affine, apply_autocontrast, apply_color_jitter, apply_crop_pad, apply_gaussian_blur, apply_sharpness,
    AugmentPreset, AugmentationKind,
};
use crate::error::{Error, Result};
use crate::rng::rng_for;
use crate::tensor::ImageTensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How perceptually equivalent variants are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SamplingMode {
    /// One uniformly chosen augmentation from the set per draw.
    S1,
    /// All augmentations in the set, composed in the canonical order.
    S2,
    /// Uniform noise with L-inf radius `epsilon` (no augmentations).
    Noise { epsilon: f32 },
}

impl SamplingMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SamplingMode::S1 => "s1",
            SamplingMode::S2 => "s2",
            SamplingMode::Noise { .. } => "noise",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SamplingFunction {
    mode: SamplingMode,
    set: Vec<AugmentationKind>,
    preset: AugmentPreset,
    seed: u64,
    counter: u64,
}

impl SamplingFunction {
    /// Sampler over the full augmentation set.
    pub fn new(mode: SamplingMode, preset: AugmentPreset, seed: u64) -> Self {
        SamplingFunction {
            mode,
            set: AugmentationKind::ALL.to_vec(),
            preset,
            seed,
            counter: 0,
        }
    }

    /// Restrict the augmentation set (kept in canonical composition order).
    pub fn with_set(mut self, kinds: &[AugmentationKind]) -> Result<Self> {
        let set: Vec<AugmentationKind> = AugmentationKind::ALL
            .iter()
            .copied()
            .filter(|k| kinds.contains(k))
            .collect();
        if set.is_empty() && !matches!(self.mode, SamplingMode::Noise { .. }) {
            return Err(Error::InvalidArgument("augmentation set must be non-empty".to_string()));
        }
        self.set = set;
        Ok(self)
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    pub fn preset(&self) -> &AugmentPreset {
        &self.preset
    }

    /// Next draw from the stream.
    pub fn sample(&mut self, x: &ImageTensor) -> Result<ImageTensor> {
        let idx = self.counter;
        self.counter += 1;
        self.sample_at(x, idx)
    }

    /// Draw `index` of the stream; a pure function of (seed, index, x, mode).
    pub fn sample_at(&self, x: &ImageTensor, index: u64) -> Result<ImageTensor> {
        x.expect_displayable("sampling input")?;
        let mut rng = rng_for(self.seed, &[0x5A17, index]);
        match self.mode {
            SamplingMode::S1 => {
                let pick = self.set[rng.gen_range(0..self.set.len())];
                draw_and_apply(pick, x, &self.preset, &mut rng)
            }
            SamplingMode::S2 => {
                let mut cur = x.clone();
                for kind in &self.set {
                    cur = draw_and_apply(*kind, &cur, &self.preset, &mut rng)?;
                }
                Ok(cur)
            }
            SamplingMode::Noise { epsilon } => {
                if epsilon < 0.0 {
                    return Err(Error::InvalidArgument(format!("noise epsilon {epsilon} < 0")));
                }
                if epsilon == 0.0 {
                    return Ok(x.clone());
                }
                let mut out = x.clone();
                for v in out.data_mut() {
                    *v = (*v + rng.gen_range(-epsilon..=epsilon)).clamp(0.0, 1.0);
                }
                Ok(out)
            }
        }
    }
}

/// Draw fresh parameters for one augmentation and apply it.
fn draw_and_apply(
    kind: AugmentationKind,
    x: &ImageTensor,
    preset: &AugmentPreset,
    rng: &mut ChaCha8Rng,
) -> Result<ImageTensor> {
    match kind {
        AugmentationKind::RandomAffine => {
            let r = preset.rotation_deg;
            let s = preset.shift_frac;
            let rot = rng.gen_range(-r..=r);
            let dy = rng.gen_range(-s..=s);
            let dx = rng.gen_range(-s..=s);
            apply_affine(x, rot, (dy, dx), preset)
        }
        AugmentationKind::ColorJitter => {
            let w = preset.jitter_half_width;
            let b = rng.gen_range(1.0 - w..=1.0 + w);
            let c = rng.gen_range(1.0 - w..=1.0 + w);
            let (s, h) = if x.channels() == 3 {
                (rng.gen_range(1.0 - w..=1.0 + w), rng.gen_range(-w..=w))
            } else {
                (1.0, 0.0)
            };
            apply_color_jitter(x, b, c, s, h, preset)
        }
        AugmentationKind::RandomCrop => {
            let pad = preset.crop_pad;
            let off = (rng.gen_range(0..=2 * pad), rng.gen_range(0..=2 * pad));
            apply_crop_pad(x, pad, off)
        }
        AugmentationKind::GaussianBlur => apply_gaussian_blur(x, preset.blur_kernel, preset.blur_sigma),
        AugmentationKind::Sharpness => apply_sharpness(x, preset.sharpness_factor),
        AugmentationKind::Autocontrast => {
            if rng.gen_bool(preset.autocontrast_prob) {
                apply_autocontrast(x)
            } else {
                Ok(x.clone())
            }
        }
    }
}
