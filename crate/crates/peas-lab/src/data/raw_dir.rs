//! Raw tensor files: the crate's own exchange format for labeled images.
//!
//! One file per sample, little-endian: magic `PEASIMG1`, u32 C/H/W, u32
//! label, then C*H*W f32 pixels. A dataset directory holds `train/` and
//! `test/` subdirectories of `.img` files; a bare directory of `.img` files
//! is read as a train-only split.

use crate::error::{Error, Result};
use crate::tensor::{ImageTensor, LabeledSample};
use std::fs;
use std::io::Write;
use std::path::Path;

pub const RAW_MAGIC: &[u8; 8] = b"PEASIMG1";

pub fn write_raw_tensor_file(path: &Path, sample: &LabeledSample) -> Result<()> {
    let (c, h, w) = sample.image.shape();
    let mut buf = Vec::with_capacity(8 + 16 + sample.image.len() * 4);
    buf.extend_from_slice(RAW_MAGIC);
    for v in [c as u32, h as u32, w as u32, sample.label as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for &px in sample.image.data() {
        buf.extend_from_slice(&px.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_raw_tensor_file(path: &Path) -> Result<LabeledSample> {
    let bytes = fs::read(path)?;
    let parse_err = |offset: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        offset: offset as u64,
        message,
    };
    if bytes.len() < 24 {
        return Err(parse_err(bytes.len(), "file shorter than header".to_string()));
    }
    if &bytes[..8] != RAW_MAGIC {
        return Err(parse_err(0, format!("bad magic {:?}", &bytes[..8])));
    }
    let word = |i: usize| {
        let s = &bytes[8 + 4 * i..12 + 4 * i];
        u32::from_le_bytes([s[0], s[1], s[2], s[3]]) as usize
    };
    let (c, h, w, label) = (word(0), word(1), word(2), word(3));
    let n = c
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| parse_err(8, format!("implausible shape {c}x{h}x{w}")))?;
    let expected = 24 + n * 4;
    if bytes.len() != expected {
        return Err(parse_err(
            bytes.len().min(expected),
            format!("expected {expected} bytes for shape {c}x{h}x{w}, found {}", bytes.len()),
        ));
    }
    let mut data = Vec::with_capacity(n);
    for (i, chunk) in bytes[24..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if !v.is_finite() {
            return Err(parse_err(24 + 4 * i, format!("non-finite pixel {v}")));
        }
        data.push(v);
    }
    Ok(LabeledSample::new(ImageTensor::new((c, h, w), data)?, label))
}

/// Read every `.img` file in a directory, sorted by file name.
pub fn read_raw_tensor_dir(dir: &Path) -> Result<Vec<LabeledSample>> {
    let mut files: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "img"))
        .collect();
    files.sort();
    files.iter().map(|p| read_raw_tensor_file(p)).collect()
}

/// Write a dataset as `train/` and `test/` subdirectories of numbered files.
pub fn write_raw_tensor_dir(dir: &Path, train: &[LabeledSample], test: &[LabeledSample]) -> Result<()> {
    for (sub, samples) in [("train", train), ("test", test)] {
        let subdir = dir.join(sub);
        fs::create_dir_all(&subdir)?;
        for (i, s) in samples.iter().enumerate() {
            write_raw_tensor_file(&subdir.join(format!("{i:06}.img")), s)?;
        }
    }
    Ok(())
}

pub(super) fn load_split(path: &Path) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    let train_dir = path.join("train");
    if train_dir.is_dir() {
        let train = read_raw_tensor_dir(&train_dir)?;
        let test_dir = path.join("test");
        let test = if test_dir.is_dir() {
            read_raw_tensor_dir(&test_dir)?
        } else {
            Vec::new()
        };
        Ok((train, test))
    } else {
        // Flat directory (possibly empty) is a train-only split.
        Ok((read_raw_tensor_dir(path)?, Vec::new()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> LabeledSample {
        let img = ImageTensor::new((2, 2, 3), (0..12).map(|i| i as f32 / 16.0).collect()).unwrap();
        LabeledSample::new(img, 5)
    }

    #[test]
    fn file_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.img");
        let s = sample();
        write_raw_tensor_file(&p, &s).unwrap();
        let back = read_raw_tensor_file(&p).unwrap();
        assert_eq!(back.label, s.label);
        assert_eq!(back.image.data(), s.image.data());
        assert_eq!(back.image.shape(), s.image.shape());
    }

    #[test]
    fn empty_directory_yields_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        let (train, test) = load_split(dir.path()).unwrap();
        assert!(train.is_empty());
        assert!(test.is_empty());
    }

    #[test]
    fn truncation_and_bad_magic_are_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.img");
        write_raw_tensor_file(&p, &sample()).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 3);
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_raw_tensor_file(&p), Err(Error::Parse { .. })));

        bytes[0] = b'X';
        fs::write(&p, &bytes).unwrap();
        match read_raw_tensor_file(&p).unwrap_err() {
            Error::Parse { offset, .. } => assert_eq!(offset, 0),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn split_directories_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let train = vec![sample(), sample()];
        let test = vec![sample()];
        write_raw_tensor_dir(dir.path(), &train, &test).unwrap();
        let (t, e) = load_split(dir.path()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(e.len(), 1);
    }
}
