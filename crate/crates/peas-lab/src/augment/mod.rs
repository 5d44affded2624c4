//! Subtle image augmentations and perceptual-distance measurement.
//!
//! Each operation keeps the output shape, clamps to [0, 1], and reproduces
//! the input bit-exactly at neutral parameters. Parameter ranges come from a
//! per-resolution preset table; values outside the preset are rejected.

mod sampling;

pub use sampling::{SamplingFunction, SamplingMode};

use crate::data::PresetId;
use crate::error::{Error, Result};
use crate::tensor::ImageTensor;
use serde::{Deserialize, Serialize};

/// The augmentation set A. `ALL` lists the canonical composition order used
/// by the all-augmentations sampling mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugmentationKind {
    RandomAffine,
    ColorJitter,
    RandomCrop,
    GaussianBlur,
    Sharpness,
    Autocontrast,
}

impl AugmentationKind {
    pub const ALL: [AugmentationKind; 6] = [
        AugmentationKind::RandomAffine,
        AugmentationKind::ColorJitter,
        AugmentationKind::RandomCrop,
        AugmentationKind::GaussianBlur,
        AugmentationKind::Sharpness,
        AugmentationKind::Autocontrast,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AugmentationKind::RandomAffine => "random-affine",
            AugmentationKind::ColorJitter => "color-jitter",
            AugmentationKind::RandomCrop => "random-crop",
            AugmentationKind::GaussianBlur => "gaussian-blur",
            AugmentationKind::Sharpness => "sharpness",
            AugmentationKind::Autocontrast => "autocontrast",
        }
    }
}

/// Per-resolution augmentation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentPreset {
    /// Rotation bound in degrees (draws from [-bound, +bound]).
    pub rotation_deg: f32,
    /// Translation bound as a fraction of each image dimension.
    pub shift_frac: f32,
    /// Half-width of the color-jitter factor ranges around neutral.
    pub jitter_half_width: f32,
    /// Zero padding before the random re-crop to the original size.
    pub crop_pad: usize,
    /// Gaussian blur kernel width (odd).
    pub blur_kernel: usize,
    pub blur_sigma: f32,
    /// Sharpness blend factor, applied universally.
    pub sharpness_factor: f32,
    /// Probability that autocontrast fires within a sampling draw.
    pub autocontrast_prob: f64,
}

impl AugmentPreset {
    pub fn high_res() -> Self {
        AugmentPreset {
            rotation_deg: 2.0,
            shift_frac: 0.10,
            jitter_half_width: 0.05,
            crop_pad: 10,
            blur_kernel: 3,
            blur_sigma: 1.0,
            sharpness_factor: 2.0,
            autocontrast_prob: 0.5,
        }
    }

    pub fn low_res() -> Self {
        AugmentPreset {
            rotation_deg: 4.0,
            shift_frac: 0.10,
            jitter_half_width: 0.05,
            crop_pad: 3,
            blur_kernel: 3,
            blur_sigma: 1.9,
            sharpness_factor: 1.5,
            autocontrast_prob: 0.5,
        }
    }

    pub fn for_preset(id: PresetId) -> Self {
        match id {
            PresetId::HighRes => AugmentPreset::high_res(),
            PresetId::LowRes => AugmentPreset::low_res(),
        }
    }
}

/// L2 and L-inf distances between two equally shaped images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptualDistance {
    pub l2: f32,
    pub linf: f32,
}

pub fn perceptual_distance(a: &ImageTensor, b: &ImageTensor) -> Result<PerceptualDistance> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            "perceptual_distance",
            format!("{:?}", a.shape()),
            format!("{:?}", b.shape()),
        ));
    }
    Ok(PerceptualDistance {
        l2: a.l2_distance(b),
        linf: a.linf_distance(b),
    })
}

/// Rotation about the image center plus translation, bilinear resampling,
/// zero fill outside the frame. `shift_frac` is (dy, dx) as a fraction of
/// (H, W).
pub fn apply_affine(
    x: &ImageTensor,
    rotation_deg: f32,
    shift_frac: (f32, f32),
    preset: &AugmentPreset,
) -> Result<ImageTensor> {
    if rotation_deg.abs() > preset.rotation_deg + 1e-6 {
        return Err(Error::AugmentOutOfRange(format!(
            "rotation {rotation_deg} exceeds preset bound {}",
            preset.rotation_deg
        )));
    }
    if shift_frac.0.abs() > preset.shift_frac + 1e-6 || shift_frac.1.abs() > preset.shift_frac + 1e-6 {
        return Err(Error::AugmentOutOfRange(format!(
            "shift {shift_frac:?} exceeds preset bound {}",
            preset.shift_frac
        )));
    }
    let (c, h, w) = x.shape();
    let theta = rotation_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    let cy = (h as f32 - 1.0) / 2.0;
    let cx = (w as f32 - 1.0) / 2.0;
    let ty = shift_frac.0 * h as f32;
    let tx = shift_frac.1 * w as f32;

    let mut out = ImageTensor::zeros(x.shape());
    for ch in 0..c {
        for y in 0..h {
            let ddy = y as f32 - cy - ty;
            for xx in 0..w {
                let ddx = xx as f32 - cx - tx;
                // Inverse rotation of the displaced destination coordinate.
                let sy = cy + cos * ddy + sin * ddx;
                let sx = cx - sin * ddy + cos * ddx;
                *out.at_mut(ch, y, xx) = bilinear(x, ch, sy, sx).clamp(0.0, 1.0);
            }
        }
    }
    Ok(out)
}

fn bilinear(x: &ImageTensor, ch: usize, sy: f32, sx: f32) -> f32 {
    let (_, h, w) = x.shape();
    let y0 = sy.floor();
    let x0 = sx.floor();
    let fy = sy - y0;
    let fx = sx - x0;
    let sample = |yy: i64, xx: i64| -> f32 {
        if yy < 0 || xx < 0 || yy >= h as i64 || xx >= w as i64 {
            0.0
        } else {
            x.at(ch, yy as usize, xx as usize)
        }
    };
    let (y0, x0) = (y0 as i64, x0 as i64);
    sample(y0, x0) * (1.0 - fy) * (1.0 - fx)
        + sample(y0, x0 + 1) * (1.0 - fy) * fx
        + sample(y0 + 1, x0) * fy * (1.0 - fx)
        + sample(y0 + 1, x0 + 1) * fy * fx
}

/// Brightness, contrast, saturation, hue adjustments in that fixed order.
/// Factors are multiplicative around 1; hue shifts a fraction of the hue
/// circle. Grayscale inputs skip saturation and hue untouched.
pub fn apply_color_jitter(
    x: &ImageTensor,
    brightness: f32,
    contrast: f32,
    saturation: f32,
    hue: f32,
    preset: &AugmentPreset,
) -> Result<ImageTensor> {
    let w = preset.jitter_half_width;
    for (name, v) in [("brightness", brightness), ("contrast", contrast), ("saturation", saturation)] {
        if (v - 1.0).abs() > w + 1e-6 {
            return Err(Error::AugmentOutOfRange(format!(
                "{name} factor {v} outside [{}, {}]",
                1.0 - w,
                1.0 + w
            )));
        }
    }
    if hue.abs() > w + 1e-6 {
        return Err(Error::AugmentOutOfRange(format!("hue shift {hue} outside [-{w}, {w}]")));
    }

    let mut img = x.clone();
    if brightness != 1.0 {
        for v in img.data_mut() {
            *v = (*v * brightness).clamp(0.0, 1.0);
        }
    }
    if contrast != 1.0 {
        let mean = luma_mean(&img);
        for v in img.data_mut() {
            *v = (contrast * *v + (1.0 - contrast) * mean).clamp(0.0, 1.0);
        }
    }
    if img.channels() == 3 {
        if saturation != 1.0 {
            let (_, h, w) = img.shape();
            for y in 0..h {
                for xx in 0..w {
                    let g = luma(img.at(0, y, xx), img.at(1, y, xx), img.at(2, y, xx));
                    for ch in 0..3 {
                        let v = img.at(ch, y, xx);
                        *img.at_mut(ch, y, xx) = (saturation * v + (1.0 - saturation) * g).clamp(0.0, 1.0);
                    }
                }
            }
        }
        if hue != 0.0 {
            let (_, h, w) = img.shape();
            for y in 0..h {
                for xx in 0..w {
                    let rgb = (img.at(0, y, xx), img.at(1, y, xx), img.at(2, y, xx));
                    let (hh, s, v) = rgb_to_hsv(rgb);
                    let rgb2 = hsv_to_rgb((hh + hue).rem_euclid(1.0), s, v);
                    *img.at_mut(0, y, xx) = rgb2.0.clamp(0.0, 1.0);
                    *img.at_mut(1, y, xx) = rgb2.1.clamp(0.0, 1.0);
                    *img.at_mut(2, y, xx) = rgb2.2.clamp(0.0, 1.0);
                }
            }
        }
    }
    Ok(img)
}

fn luma(r: f32, g: f32, b: f32) -> f32 {
    0.299 * r + 0.587 * g + 0.114 * b
}

fn luma_mean(x: &ImageTensor) -> f32 {
    let (c, h, w) = x.shape();
    let mut acc = 0.0f64;
    if c == 3 {
        for y in 0..h {
            for xx in 0..w {
                acc += luma(x.at(0, y, xx), x.at(1, y, xx), x.at(2, y, xx)) as f64;
            }
        }
        (acc / (h * w) as f64) as f32
    } else {
        for v in x.data() {
            acc += *v as f64;
        }
        (acc / x.len() as f64) as f32
    }
}

fn rgb_to_hsv((r, g, b): (f32, f32, f32)) -> (f32, f32, f32) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        (((g - b) / delta).rem_euclid(6.0)) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

fn hsv_to_rgb(h: f32, s: f32, v: f32) -> (f32, f32, f32) {
    let h6 = h * 6.0;
    let c = v * s;
    let x = c * (1.0 - (h6.rem_euclid(2.0) - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match h6 as usize {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    (r + m, g + m, b + m)
}

/// Zero-pad by `pad` on every side, then crop back to the original shape at
/// `offset` in [0, 2*pad]^2. Offset (pad, pad) is the identity.
pub fn apply_crop_pad(x: &ImageTensor, pad: usize, offset: (usize, usize)) -> Result<ImageTensor> {
    if offset.0 > 2 * pad || offset.1 > 2 * pad {
        return Err(Error::AugmentOutOfRange(format!(
            "crop offset {offset:?} exceeds 2*pad = {}",
            2 * pad
        )));
    }
    let (c, h, w) = x.shape();
    let mut out = ImageTensor::zeros(x.shape());
    for ch in 0..c {
        for y in 0..h {
            let sy = y as i64 + offset.0 as i64 - pad as i64;
            if sy < 0 || sy >= h as i64 {
                continue;
            }
            for xx in 0..w {
                let sx = xx as i64 + offset.1 as i64 - pad as i64;
                if sx < 0 || sx >= w as i64 {
                    continue;
                }
                *out.at_mut(ch, y, xx) = x.at(ch, sy as usize, sx as usize);
            }
        }
    }
    Ok(out)
}

/// Normalized 1-D Gaussian taps for a kernel of odd width.
pub fn gaussian_kernel(size: usize, sigma: f32) -> Vec<f32> {
    assert!(size % 2 == 1, "kernel size must be odd");
    let c = (size / 2) as i64;
    let mut taps: Vec<f32> = (0..size as i64)
        .map(|i| {
            let d = (i - c) as f32;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f32 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

#[inline]
fn reflect(idx: i64, len: usize) -> usize {
    // Mirror without repeating the edge sample: -1 -> 1, len -> len-2.
    let last = len as i64 - 1;
    let mut i = idx;
    if i < 0 {
        i = -i;
    }
    if i > last {
        i = 2 * last - i;
    }
    i as usize
}

/// Separable Gaussian convolution with reflect padding.
pub fn apply_gaussian_blur(x: &ImageTensor, kernel_size: usize, sigma: f32) -> Result<ImageTensor> {
    if kernel_size % 2 == 0 || kernel_size == 0 {
        return Err(Error::AugmentOutOfRange(format!(
            "blur kernel size must be odd and positive, got {kernel_size}"
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::AugmentOutOfRange(format!("blur sigma must be positive, got {sigma}")));
    }
    let (c, h, w) = x.shape();
    if h < 2 || w < 2 {
        return Err(Error::AugmentOutOfRange("image too small to blur".to_string()));
    }
    let taps = gaussian_kernel(kernel_size, sigma);
    let half = (kernel_size / 2) as i64;

    // Horizontal pass, then vertical.
    let mut tmp = ImageTensor::zeros(x.shape());
    for ch in 0..c {
        for y in 0..h {
            let src = x.row(ch, y);
            let dst = tmp.row_mut(ch, y);
            for xx in 0..w {
                let mut acc = 0.0f32;
                for (k, t) in taps.iter().enumerate() {
                    acc += t * src[reflect(xx as i64 + k as i64 - half, w)];
                }
                dst[xx] = acc;
            }
        }
    }
    let mut out = ImageTensor::zeros(x.shape());
    for ch in 0..c {
        for y in 0..h {
            for xx in 0..w {
                let mut acc = 0.0f32;
                for (k, t) in taps.iter().enumerate() {
                    acc += t * tmp.at(ch, reflect(y as i64 + k as i64 - half, h), xx);
                }
                *out.at_mut(ch, y, xx) = acc.clamp(0.0, 1.0);
            }
        }
    }
    Ok(out)
}

/// Blend away from a 3x3 Gaussian smoothing of the image: factor 1 is the
/// identity, 0 the smoothed image, 2 an overshoot past the original.
pub fn apply_sharpness(x: &ImageTensor, factor: f32) -> Result<ImageTensor> {
    if !(0.0..=4.0).contains(&factor) {
        return Err(Error::AugmentOutOfRange(format!("sharpness factor {factor} outside [0, 4]")));
    }
    if factor == 1.0 {
        return Ok(x.clone());
    }
    let blurred = apply_gaussian_blur(x, 3, 1.0)?;
    let mut out = ImageTensor::zeros(x.shape());
    for ((o, &a), &b) in out.data_mut().iter_mut().zip(x.data()).zip(blurred.data()) {
        *o = (b + factor * (a - b)).clamp(0.0, 1.0);
    }
    Ok(out)
}

/// Per-channel linear remap sending the channel minimum to 0 and maximum
/// to 1; constant channels pass through unchanged.
pub fn apply_autocontrast(x: &ImageTensor) -> Result<ImageTensor> {
    let (c, h, w) = x.shape();
    let mut out = x.clone();
    for ch in 0..c {
        let channel = x.channel(ch);
        let min = channel.iter().copied().fold(f32::INFINITY, f32::min);
        let max = channel.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        if max > min {
            let scale = 1.0 / (max - min);
            let base = ch * h * w;
            for i in 0..h * w {
                let v = (out.data()[base + i] - min) * scale;
                out.data_mut()[base + i] = v.clamp(0.0, 1.0);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preset() -> AugmentPreset {
        AugmentPreset::high_res()
    }

    fn gradient_image(h: usize, w: usize) -> ImageTensor {
        let data: Vec<f32> = (0..h * w).map(|i| (i % w) as f32 / w as f32).collect();
        ImageTensor::new((1, h, w), data).unwrap()
    }

    #[test]
    fn affine_neutral_is_identity() {
        let x = gradient_image(16, 16);
        let y = apply_affine(&x, 0.0, (0.0, 0.0), &preset()).unwrap();
        assert_eq!(x.data(), y.data());
    }

    #[test]
    fn affine_one_pixel_shift_moves_lit_pixel() {
        let mut x = ImageTensor::zeros((1, 16, 16));
        *x.at_mut(0, 7, 5) = 1.0;
        // dx of exactly one pixel: shift_frac = 1/16.
        let y = apply_affine(&x, 0.0, (0.0, 1.0 / 16.0), &preset()).unwrap();
        assert_eq!(y.at(0, 7, 6), 1.0);
        assert_eq!(y.at(0, 7, 5), 0.0);
    }

    #[test]
    fn affine_rotation_roundtrips_on_smooth_blob() {
        // Bright gaussian blob centered in the frame, near zero at borders,
        // so zero fill matches the background.
        let (h, w) = (32, 32);
        let mut x = ImageTensor::zeros((1, h, w));
        for y in 0..h {
            for xx in 0..w {
                let dy = (y as f32 - 15.5) / 8.0;
                let dx = (xx as f32 - 15.5) / 8.0;
                *x.at_mut(0, y, xx) = (-(dy * dy + dx * dx)).exp();
            }
        }
        let rotated = apply_affine(&x, 2.0, (0.0, 0.0), &preset()).unwrap();
        let back = apply_affine(&rotated, -2.0, (0.0, 0.0), &preset()).unwrap();
        assert!(back.linf_distance(&x) < 0.1);
    }

    #[test]
    fn affine_rejects_out_of_preset_parameters() {
        let x = gradient_image(8, 8);
        assert!(apply_affine(&x, 5.0, (0.0, 0.0), &preset()).is_err());
        assert!(apply_affine(&x, 0.0, (0.2, 0.0), &preset()).is_err());
    }

    #[test]
    fn jitter_neutral_is_identity() {
        let x = gradient_image(8, 8);
        let y = apply_color_jitter(&x, 1.0, 1.0, 1.0, 0.0, &preset()).unwrap();
        assert_eq!(x.data(), y.data());
    }

    #[test]
    fn jitter_brightness_hand_cases() {
        let x = ImageTensor::constant((1, 4, 4), 0.5);
        let y = apply_color_jitter(&x, 1.05, 1.0, 1.0, 0.0, &preset()).unwrap();
        for &v in y.data() {
            assert!((v - 0.525).abs() < 1e-6);
        }
        let ones = ImageTensor::constant((1, 4, 4), 1.0);
        let z = apply_color_jitter(&ones, 1.05, 1.0, 1.0, 0.0, &preset()).unwrap();
        assert_eq!(z.data(), ones.data());
    }

    #[test]
    fn jitter_skips_hue_and_saturation_on_grayscale() {
        let x = gradient_image(8, 8);
        let y = apply_color_jitter(&x, 1.0, 1.0, 1.05, 0.05, &preset()).unwrap();
        assert_eq!(x.data(), y.data());
    }

    #[test]
    fn jitter_rejects_out_of_range_factors() {
        let x = gradient_image(8, 8);
        assert!(apply_color_jitter(&x, 1.2, 1.0, 1.0, 0.0, &preset()).is_err());
        assert!(apply_color_jitter(&x, 1.0, 1.0, 1.0, 0.2, &preset()).is_err());
    }

    #[test]
    fn hue_roundtrip_preserves_color() {
        let rgb = (0.7, 0.3, 0.5);
        let (h, s, v) = rgb_to_hsv(rgb);
        let back = hsv_to_rgb(h, s, v);
        assert!((back.0 - rgb.0).abs() < 1e-5);
        assert!((back.1 - rgb.1).abs() < 1e-5);
        assert!((back.2 - rgb.2).abs() < 1e-5);
    }

    #[test]
    fn crop_centered_offset_is_identity() {
        let x = gradient_image(12, 12);
        let y = apply_crop_pad(&x, 3, (3, 3)).unwrap();
        assert_eq!(x.data(), y.data());
        assert_eq!(y.shape(), x.shape());
    }

    #[test]
    fn crop_zero_offset_shifts_by_pad() {
        let mut x = ImageTensor::zeros((1, 10, 10));
        *x.at_mut(0, 2, 3) = 1.0;
        let y = apply_crop_pad(&x, 3, (0, 0)).unwrap();
        assert_eq!(y.at(0, 5, 6), 1.0);
        assert_eq!(y.at(0, 2, 3), 0.0);
    }

    #[test]
    fn crop_rejects_offset_beyond_pad_window() {
        let x = gradient_image(8, 8);
        assert!(apply_crop_pad(&x, 3, (7, 0)).is_err());
    }

    #[test]
    fn blur_keeps_constant_images_unchanged() {
        let x = ImageTensor::constant((2, 8, 8), 0.37);
        let y = apply_gaussian_blur(&x, 3, 1.0).unwrap();
        for (&a, &b) in x.data().iter().zip(y.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn blur_with_huge_sigma_approaches_local_mean() {
        let x = gradient_image(8, 8);
        let y = apply_gaussian_blur(&x, 3, 1e6).unwrap();
        // Interior pixel: compare to the 9-point mean.
        let mut mean = 0.0;
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                mean += x.at(0, (4 + dy) as usize, (4 + dx) as usize);
            }
        }
        mean /= 9.0;
        assert!((y.at(0, 4, 4) - mean).abs() < 1e-4);
    }

    #[test]
    fn blur_impulse_response_matches_hand_kernel() {
        let mut x = ImageTensor::zeros((1, 9, 9));
        *x.at_mut(0, 4, 4) = 1.0;
        let sigma = 0.8;
        let y = apply_gaussian_blur(&x, 3, sigma).unwrap();
        let taps = gaussian_kernel(3, sigma);
        for dy in 0..3 {
            for dx in 0..3 {
                let want = taps[dy] * taps[dx];
                let got = y.at(0, 3 + dy, 3 + dx);
                assert!((got - want).abs() < 1e-6, "({dy},{dx}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn blur_preserves_linear_ramp_interior() {
        // A symmetric normalized kernel reproduces linear functions exactly
        // away from the borders; catches normalization mistakes.
        let x = gradient_image(16, 16);
        let y = apply_gaussian_blur(&x, 3, 1.3).unwrap();
        for yy in 1..15 {
            for xx in 1..15 {
                assert!((y.at(0, yy, xx) - x.at(0, yy, xx)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn sharpness_factor_one_is_identity_and_zero_is_blur() {
        let x = gradient_image(10, 10);
        let same = apply_sharpness(&x, 1.0).unwrap();
        assert_eq!(x.data(), same.data());

        let smooth = apply_sharpness(&x, 0.0).unwrap();
        let blurred = apply_gaussian_blur(&x, 3, 1.0).unwrap();
        assert_eq!(smooth.data(), blurred.data());
    }

    #[test]
    fn sharpness_overshoots_on_step_edge() {
        let mut data = vec![0.2f32; 8 * 8];
        for y in 0..8 {
            for x in 4..8 {
                data[y * 8 + x] = 0.8;
            }
        }
        let x = ImageTensor::new((1, 8, 8), data).unwrap();
        let blurred = apply_gaussian_blur(&x, 3, 1.0).unwrap();
        let sharp = apply_sharpness(&x, 2.0).unwrap();
        // Direct blend arithmetic at a pixel beside the edge.
        let want = (blurred.at(0, 4, 4) + 2.0 * (x.at(0, 4, 4) - blurred.at(0, 4, 4))).clamp(0.0, 1.0);
        assert!((sharp.at(0, 4, 4) - want).abs() < 1e-6);
        // Overshoot: brighter than the original on the bright side.
        assert!(sharp.at(0, 4, 4) > x.at(0, 4, 4));
    }

    #[test]
    fn autocontrast_full_range_is_identity() {
        let mut x = gradient_image(8, 8);
        *x.at_mut(0, 0, 0) = 0.0;
        *x.at_mut(0, 7, 7) = 1.0;
        let y = apply_autocontrast(&x).unwrap();
        assert_eq!(x.data(), y.data());
    }

    #[test]
    fn autocontrast_remaps_narrow_range() {
        let x = ImageTensor::new((1, 1, 3), vec![0.25, 0.5, 0.75]).unwrap();
        let y = apply_autocontrast(&x).unwrap();
        assert!((y.at(0, 0, 0) - 0.0).abs() < 1e-6);
        assert!((y.at(0, 0, 1) - 0.5).abs() < 1e-6);
        assert!((y.at(0, 0, 2) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn autocontrast_leaves_constant_channels() {
        let x = ImageTensor::constant((3, 4, 4), 0.42);
        let y = apply_autocontrast(&x).unwrap();
        assert_eq!(x.data(), y.data());
    }

    #[test]
    fn distance_hand_cases() {
        let a = ImageTensor::zeros((1, 2, 2));
        let d = perceptual_distance(&a, &a).unwrap();
        assert_eq!((d.l2, d.linf), (0.0, 0.0));

        let mut b = a.clone();
        *b.at_mut(0, 0, 1) = 0.5;
        let d = perceptual_distance(&a, &b).unwrap();
        assert!((d.l2 - 0.5).abs() < 1e-7);
        assert!((d.linf - 0.5).abs() < 1e-7);
    }
}
