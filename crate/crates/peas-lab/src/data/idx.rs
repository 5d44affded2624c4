//! IDX format (big-endian magic and dimensions, unsigned-byte payload), as
//! used by the classic MNIST distribution.

use crate::error::{Error, Result};
use crate::tensor::{ImageTensor, LabeledSample};
use std::fs;
use std::path::Path;

const MAGIC_IMAGES: u32 = 0x0000_0803;
const MAGIC_LABELS: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let slice = bytes.get(offset..offset + 4).ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        offset: offset as u64,
        message: "unexpected end of file in header".to_string(),
    })?;
    Ok(u32::from_be_bytes([slice[0], slice[1], slice[2], slice[3]]))
}

/// Read an IDX image file (magic 0x00000803) into grayscale tensors in [0, 1].
pub fn read_idx_images(path: &Path) -> Result<Vec<ImageTensor>> {
    let bytes = fs::read(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != MAGIC_IMAGES {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            offset: 0,
            message: format!("bad magic {magic:#010x}, expected {MAGIC_IMAGES:#010x}"),
        });
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() < expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            offset: bytes.len() as u64,
            message: format!("file truncated: need {expected} bytes for {count} {rows}x{cols} images"),
        });
    }
    let mut images = Vec::with_capacity(count);
    for i in 0..count {
        let start = 16 + i * rows * cols;
        let data: Vec<f32> = bytes[start..start + rows * cols]
            .iter()
            .map(|&b| b as f32 / 255.0)
            .collect();
        images.push(ImageTensor::new((1, rows, cols), data)?);
    }
    Ok(images)
}

/// Read an IDX label file (magic 0x00000801).
pub fn read_idx_labels(path: &Path) -> Result<Vec<usize>> {
    let bytes = fs::read(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != MAGIC_LABELS {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            offset: 0,
            message: format!("bad magic {magic:#010x}, expected {MAGIC_LABELS:#010x}"),
        });
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    if bytes.len() < 8 + count {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            offset: bytes.len() as u64,
            message: format!("file truncated: need {} bytes for {count} labels", 8 + count),
        });
    }
    Ok(bytes[8..8 + count].iter().map(|&b| b as usize).collect())
}

fn read_pair(images: &Path, labels: &Path) -> Result<Vec<LabeledSample>> {
    let imgs = read_idx_images(images)?;
    let labs = read_idx_labels(labels)?;
    if imgs.len() != labs.len() {
        return Err(Error::Parse {
            path: labels.to_path_buf(),
            offset: 4,
            message: format!("{} labels for {} images", labs.len(), imgs.len()),
        });
    }
    Ok(imgs
        .into_iter()
        .zip(labs)
        .map(|(image, label)| LabeledSample::new(image, label))
        .collect())
}

/// Directory layout: `train-images-idx3-ubyte` / `train-labels-idx1-ubyte`,
/// optional `t10k-*` test pair.
pub(super) fn load_split(path: &Path) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    let train = read_pair(
        &path.join("train-images-idx3-ubyte"),
        &path.join("train-labels-idx1-ubyte"),
    )?;
    let test_images = path.join("t10k-images-idx3-ubyte");
    let test = if test_images.exists() {
        read_pair(&test_images, &path.join("t10k-labels-idx1-ubyte"))?
    } else {
        Vec::new()
    };
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn idx_image_bytes(images: &[[u8; 4]]) -> Vec<u8> {
        // 2x2 grayscale fixtures.
        let mut b = Vec::new();
        b.extend_from_slice(&MAGIC_IMAGES.to_be_bytes());
        b.extend_from_slice(&(images.len() as u32).to_be_bytes());
        b.extend_from_slice(&2u32.to_be_bytes());
        b.extend_from_slice(&2u32.to_be_bytes());
        for img in images {
            b.extend_from_slice(img);
        }
        b
    }

    #[test]
    fn hand_built_fixture_parses() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("imgs");
        let fixtures = [[0u8, 255, 128, 64], [1, 2, 3, 4], [9, 9, 9, 9], [255, 0, 255, 0]];
        fs::write(&p, idx_image_bytes(&fixtures)).unwrap();
        let imgs = read_idx_images(&p).unwrap();
        assert_eq!(imgs.len(), 4);
        assert_eq!(imgs[0].shape(), (1, 2, 2));
        assert!((imgs[0].at(0, 0, 1) - 1.0).abs() < 1e-6);
        assert!((imgs[0].at(0, 1, 0) - 128.0 / 255.0).abs() < 1e-6);
    }

    #[test]
    fn wrong_magic_is_rejected_at_offset_zero() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad");
        fs::write(&p, 0x12345678u32.to_be_bytes()).unwrap();
        match read_idx_images(&p).unwrap_err() {
            Error::Parse { offset, .. } => assert_eq!(offset, 0),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("short");
        let mut bytes = idx_image_bytes(&[[1, 2, 3, 4]]);
        bytes.truncate(bytes.len() - 2);
        fs::write(&p, bytes).unwrap();
        assert!(matches!(read_idx_images(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn labels_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels");
        let mut b = Vec::new();
        b.extend_from_slice(&MAGIC_LABELS.to_be_bytes());
        b.extend_from_slice(&3u32.to_be_bytes());
        b.extend_from_slice(&[7, 0, 2]);
        fs::write(&p, b).unwrap();
        assert_eq!(read_idx_labels(&p).unwrap(), vec![7, 0, 2]);
    }
}
