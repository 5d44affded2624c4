//! Dense CHW image tensors.
//!
//! `ImageTensor` is the unit every attack and augmentation operates on:
//! 32-bit floats in channel-major (C, H, W) layout. Displayable images keep
//! every element in [0, 1]; intermediate values (gradients, pre-clamp sums)
//! may leave that range and are clamped at the stage boundaries that claim
//! displayability.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTensor {
    shape: (usize, usize, usize),
    data: Vec<f32>,
}

impl ImageTensor {
    /// Build a tensor from raw CHW data. The element count must match the shape.
    pub fn new(shape: (usize, usize, usize), data: Vec<f32>) -> Result<Self> {
        let n = shape.0 * shape.1 * shape.2;
        if data.len() != n {
            return Err(Error::shape(
                "ImageTensor::new",
                format!("{} elements for {:?}", n, shape),
                format!("{} elements", data.len()),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: (usize, usize, usize)) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.0 * shape.1 * shape.2],
        }
    }

    pub fn constant(shape: (usize, usize, usize), value: f32) -> Self {
        Self {
            shape,
            data: vec![value; shape.0 * shape.1 * shape.2],
        }
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.shape.0
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.shape.1
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.shape.2
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.shape.1 + y) * self.shape.2 + x]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, y: usize, x: usize) -> &mut f32 {
        &mut self.data[(c * self.shape.1 + y) * self.shape.2 + x]
    }

    /// Row `y` of channel `c` as a contiguous slice.
    #[inline]
    pub fn row(&self, c: usize, y: usize) -> &[f32] {
        let start = (c * self.shape.1 + y) * self.shape.2;
        &self.data[start..start + self.shape.2]
    }

    #[inline]
    pub fn row_mut(&mut self, c: usize, y: usize) -> &mut [f32] {
        let start = (c * self.shape.1 + y) * self.shape.2;
        &mut self.data[start..start + self.shape.2]
    }

    /// Channel `c` as a contiguous slice of H*W values.
    #[inline]
    pub fn channel(&self, c: usize) -> &[f32] {
        let hw = self.shape.1 * self.shape.2;
        &self.data[c * hw..(c + 1) * hw]
    }

    pub fn clamp01_in_place(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    pub fn clamped01(mut self) -> Self {
        self.clamp01_in_place();
        self
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|&v| (0.0..=1.0).contains(&v))
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Largest absolute elementwise difference to `other`.
    pub fn linf_distance(&self, other: &Self) -> f32 {
        debug_assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max)
    }

    /// Euclidean distance to `other`, accumulated in f64.
    pub fn l2_distance(&self, other: &Self) -> f32 {
        debug_assert_eq!(self.shape, other.shape);
        let s: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| {
                let d = (*a - *b) as f64;
                d * d
            })
            .sum();
        s.sqrt() as f32
    }

    /// Check that this tensor is a valid network/attack input: expected shape,
    /// finite, inside [0, 1].
    pub fn expect_displayable(&self, context: &str) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::NonFinite(context.to_string()));
        }
        if !self.in_unit_range() {
            return Err(Error::InvalidArgument(format!(
                "{context}: image values must lie in [0, 1]"
            )));
        }
        Ok(())
    }
}

/// An image paired with its ground-truth class index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledSample {
    pub image: ImageTensor,
    pub label: usize,
}

impl LabeledSample {
    pub fn new(image: ImageTensor, label: usize) -> Self {
        Self { image, label }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_wrong_element_count() {
        let err = ImageTensor::new((1, 2, 2), vec![0.0; 3]).unwrap_err();
        assert!(err.to_string().contains("shape mismatch"));
    }

    #[test]
    fn indexing_is_chw() {
        let mut t = ImageTensor::zeros((2, 2, 3));
        *t.at_mut(1, 0, 2) = 0.5;
        // channel 1 starts at offset 6, row 0, col 2
        assert_eq!(t.data()[8], 0.5);
        assert_eq!(t.at(1, 0, 2), 0.5);
        assert_eq!(t.row(1, 0), &[0.0, 0.0, 0.5]);
    }

    #[test]
    fn distances_on_single_pixel_difference() {
        let a = ImageTensor::zeros((1, 2, 2));
        let mut b = ImageTensor::zeros((1, 2, 2));
        *b.at_mut(0, 1, 1) = 0.5;
        assert_eq!(a.linf_distance(&b), 0.5);
        assert!((a.l2_distance(&b) - 0.5).abs() < 1e-7);
    }

    #[test]
    fn clamp_keeps_unit_range() {
        let t = ImageTensor::new((1, 1, 3), vec![-0.2, 0.4, 1.7]).unwrap();
        let c = t.clamped01();
        assert_eq!(c.data(), &[0.0, 0.4, 1.0]);
        assert!(c.in_unit_range());
    }
}
