//! CIFAR-10 binary format: records of 1 label byte followed by 3072 pixel
//! bytes (1024 R, 1024 G, 1024 B, row-major).

use crate::error::{Error, Result};
use crate::tensor::{ImageTensor, LabeledSample};
use std::fs;
use std::path::Path;

const RECORD_BYTES: usize = 1 + 3 * 32 * 32;
const CLASSES: usize = 10;

/// Read one binary batch file (10000 records in the distributed batches,
/// but any whole number of records is accepted).
pub fn read_cifar10_batch(path: &Path) -> Result<Vec<LabeledSample>> {
    let bytes = fs::read(path)?;
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            offset: (bytes.len() / RECORD_BYTES * RECORD_BYTES) as u64,
            message: format!(
                "file length {} is not a multiple of the {RECORD_BYTES}-byte record size",
                bytes.len()
            ),
        });
    }
    let mut samples = Vec::with_capacity(bytes.len() / RECORD_BYTES);
    for (rec, chunk) in bytes.chunks_exact(RECORD_BYTES).enumerate() {
        let label = chunk[0] as usize;
        if label >= CLASSES {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                offset: (rec * RECORD_BYTES) as u64,
                message: format!("label byte {label} out of range for 10 classes"),
            });
        }
        let data: Vec<f32> = chunk[1..].iter().map(|&b| b as f32 / 255.0).collect();
        samples.push(LabeledSample::new(ImageTensor::new((3, 32, 32), data)?, label));
    }
    Ok(samples)
}

/// Directory layout: `data_batch_*.bin` files form the train split and
/// `test_batch.bin` the test split. A bare file is treated as train-only.
pub(super) fn load_split(path: &Path) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    if path.is_file() {
        return Ok((read_cifar10_batch(path)?, Vec::new()));
    }
    let mut train_files: Vec<_> = fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("data_batch") && n.ends_with(".bin"))
        })
        .collect();
    train_files.sort();
    if train_files.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no data_batch*.bin files under {}",
            path.display()
        )));
    }
    let mut train = Vec::new();
    for f in &train_files {
        train.extend(read_cifar10_batch(f)?);
    }
    let test_path = path.join("test_batch.bin");
    let test = if test_path.exists() {
        read_cifar10_batch(&test_path)?
    } else {
        Vec::new()
    };
    Ok((train, test))
}
