//! Dataset profiles, file-format loaders, and the synthetic generator.

mod cifar;
mod idx;
mod raw_dir;
mod synthetic;

pub use cifar::read_cifar10_batch;
pub use idx::{read_idx_images, read_idx_labels};
pub use raw_dir::{
    read_raw_tensor_dir, read_raw_tensor_file, write_raw_tensor_dir, write_raw_tensor_file, RAW_MAGIC,
};
pub use synthetic::{generate_synthetic_dataset, SyntheticSpec};

use crate::error::{Error, Result};
use crate::tensor::LabeledSample;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Augmentation-parameter preset family, keyed by dataset resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetId {
    HighRes,
    LowRes,
}

impl PresetId {
    /// Images with min(H, W) >= 48 use the high-res preset.
    pub fn for_shape(shape: (usize, usize, usize)) -> Self {
        if shape.1.min(shape.2) >= 48 {
            PresetId::HighRes
        } else {
            PresetId::LowRes
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PresetId::HighRes => "high-res",
            PresetId::LowRes => "low-res",
        }
    }
}

/// Static description of a dataset: shape, class count, preset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub name: String,
    pub shape: (usize, usize, usize),
    pub classes: usize,
    pub preset: PresetId,
}

impl DatasetProfile {
    pub fn new(name: impl Into<String>, shape: (usize, usize, usize), classes: usize) -> Self {
        DatasetProfile {
            name: name.into(),
            shape,
            classes,
            preset: PresetId::for_shape(shape),
        }
    }

    pub fn cifar10() -> Self {
        DatasetProfile::new("cifar10", (3, 32, 32), 10)
    }

    /// Validate that every sample matches the profile shape and label range.
    pub fn check_samples(&self, samples: &[LabeledSample]) -> Result<()> {
        for s in samples {
            if s.image.shape() != self.shape {
                return Err(Error::shape(
                    format!("dataset {}", self.name),
                    format!("{:?}", self.shape),
                    format!("{:?}", s.image.shape()),
                ));
            }
            if s.label >= self.classes {
                return Err(Error::LabelOutOfRange {
                    label: s.label,
                    classes: self.classes,
                });
            }
        }
        Ok(())
    }
}

/// On-disk dataset formats understood by [`load_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    Cifar10Binary,
    Idx,
    RawTensorDir,
}

/// Load a dataset from `path`, preserving the original train/test split.
/// Pixel values come back scaled to [0, 1].
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    if !path.exists() {
        return Err(Error::InvalidArgument(format!(
            "dataset path {} does not exist",
            path.display()
        )));
    }
    match format {
        DatasetFormat::Cifar10Binary => cifar::load_split(path),
        DatasetFormat::Idx => idx::load_split(path),
        DatasetFormat::RawTensorDir => raw_dir::load_split(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_follows_resolution() {
        assert_eq!(PresetId::for_shape((3, 64, 64)), PresetId::HighRes);
        assert_eq!(PresetId::for_shape((3, 32, 32)), PresetId::LowRes);
        assert_eq!(PresetId::for_shape((1, 28, 28)), PresetId::LowRes);
    }

    #[test]
    fn missing_path_is_rejected() {
        let err = load_dataset(Path::new("/nonexistent/xyz"), DatasetFormat::Idx).unwrap_err();
        assert!(err.to_string().contains("does not exist"));
    }
}
