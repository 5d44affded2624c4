//! The model zoo: five small, mutually distinct architectures trained on one
//! dataset, with checkpoint persistence and victim/surrogate/ranking role
//! enumeration.

use crate::data::DatasetProfile;
use crate::error::{Error, Result};
use crate::nn::{train_epoch, Layer, Network, TrainConfig};
use crate::rng::{derive_seed, rng_for};
use crate::tensor::LabeledSample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const ARCHITECTURE_IDS: [&str; 5] = ["cnn-a", "cnn-b", "cnn-wide", "mlp", "cnn-pool"];

const CHECKPOINT_VERSION: u32 = 1;

/// One trained member of the zoo.
#[derive(Debug, Clone)]
pub struct ZooEntry {
    pub arch_id: String,
    pub network: Network,
    pub accuracy: f64,
}

/// A set of trained models sharing one dataset profile. Immutable once
/// built/loaded; forward passes may run concurrently from many workers.
#[derive(Debug, Clone)]
pub struct ModelZoo {
    pub profile: DatasetProfile,
    pub entries: Vec<ZooEntry>,
}

impl ModelZoo {
    pub fn get(&self, arch_id: &str) -> Option<&ZooEntry> {
        self.entries.iter().find(|e| e.arch_id == arch_id)
    }

    pub fn network(&self, arch_id: &str) -> Result<&Network> {
        self.get(arch_id)
            .map(|e| &e.network)
            .ok_or_else(|| Error::UnknownArchitecture {
                id: arch_id.to_string(),
                valid: self.entries.iter().map(|e| e.arch_id.as_str()).collect::<Vec<_>>().join(", "),
            })
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.arch_id.clone()).collect()
    }
}

/// Victim / surrogate / ranking-set split of the zoo. The three sets are
/// disjoint by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleAssignment {
    pub victim: String,
    pub surrogate: String,
    pub ranking: Vec<String>,
}

/// Every ordered (victim, surrogate) pair with the remaining models as the
/// ranking set. Requires at least 3 models so the ranking set is non-empty.
pub fn enumerate_roles(zoo: &ModelZoo) -> Result<Vec<RoleAssignment>> {
    let ids = zoo.ids();
    if ids.len() < 3 {
        return Err(Error::ZooTooSmall {
            size: ids.len(),
            min: 3,
        });
    }
    let mut out = Vec::with_capacity(ids.len() * (ids.len() - 1));
    for victim in &ids {
        for surrogate in &ids {
            if victim == surrogate {
                continue;
            }
            let ranking: Vec<String> = ids
                .iter()
                .filter(|id| *id != victim && *id != surrogate)
                .cloned()
                .collect();
            out.push(RoleAssignment {
                victim: victim.clone(),
                surrogate: surrogate.clone(),
                ranking,
            });
        }
    }
    Ok(out)
}

/// Fraction of samples the network classifies correctly.
pub fn evaluate_accuracy(net: &Network, data: &[LabeledSample]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0usize;
    for s in data {
        if net.predict(&s.image)? == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

fn he_uniform(rng: &mut ChaCha8Rng, fan_in: usize, n: usize) -> Vec<f32> {
    let limit = (6.0 / fan_in as f32).sqrt();
    (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
}

fn conv(rng: &mut ChaCha8Rng, in_c: usize, out_c: usize, k: usize, pad: usize) -> Layer {
    Layer::Conv2d {
        weight: he_uniform(rng, in_c * k * k, out_c * in_c * k * k),
        bias: vec![0.0; out_c],
        out_channels: out_c,
        in_channels: in_c,
        kernel: k,
        padding: pad,
    }
}

fn dense(rng: &mut ChaCha8Rng, in_dim: usize, out_dim: usize) -> Layer {
    Layer::Dense {
        weight: he_uniform(rng, in_dim, out_dim * in_dim),
        bias: vec![0.0; out_dim],
        out_dim,
        in_dim,
    }
}

/// Leading max-pools that bring the spatial extent down to at most 32,
/// keeping desk-scale forward passes cheap at higher resolutions.
fn pre_pools(h: usize, w: usize) -> (usize, usize, usize) {
    let mut n = 0;
    let (mut h, mut w) = (h, w);
    while h.min(w) > 32 {
        h /= 2;
        w /= 2;
        n += 1;
    }
    (n, h, w)
}

/// Build one of the five untrained zoo architectures. The five differ in
/// depth, width, and kernel size; `mlp` contains no convolutions.
pub fn build_architecture(id: &str, profile: &DatasetProfile, seed: u64) -> Result<Network> {
    let (c, h0, w0) = profile.shape;
    let classes = profile.classes;
    let mut rng = rng_for(seed, &[0xA2C4]);
    let (np, h, w) = pre_pools(h0, w0);
    let mut layers: Vec<Layer> = std::iter::repeat_with(|| Layer::MaxPool2).take(np).collect();

    match id {
        "cnn-a" => {
            layers.push(conv(&mut rng, c, 6, 3, 1));
            layers.push(Layer::Relu);
            layers.push(Layer::MaxPool2);
            layers.push(conv(&mut rng, 6, 12, 3, 1));
            layers.push(Layer::Relu);
            layers.push(Layer::MaxPool2);
            layers.push(Layer::Flatten);
            layers.push(dense(&mut rng, 12 * (h / 4) * (w / 4), classes));
        }
        "cnn-b" => {
            layers.push(conv(&mut rng, c, 4, 5, 2));
            layers.push(Layer::Relu);
            layers.push(Layer::MaxPool2);
            layers.push(conv(&mut rng, 4, 10, 3, 1));
            layers.push(Layer::Relu);
            layers.push(Layer::MaxPool2);
            layers.push(conv(&mut rng, 10, 14, 3, 1));
            layers.push(Layer::Relu);
            layers.push(Layer::GlobalAvgPool);
            layers.push(dense(&mut rng, 14, classes));
        }
        "cnn-wide" => {
            layers.push(conv(&mut rng, c, 12, 3, 1));
            layers.push(Layer::Relu);
            layers.push(Layer::MaxPool2);
            layers.push(Layer::MaxPool2);
            layers.push(conv(&mut rng, 12, 16, 3, 1));
            layers.push(Layer::Relu);
            layers.push(Layer::GlobalAvgPool);
            layers.push(dense(&mut rng, 16, classes));
        }
        "mlp" => {
            layers.push(Layer::Flatten);
            let flat = c * h * w;
            layers.push(dense(&mut rng, flat, 64));
            layers.push(Layer::Relu);
            layers.push(dense(&mut rng, 64, 32));
            layers.push(Layer::Relu);
            layers.push(dense(&mut rng, 32, classes));
        }
        "cnn-pool" => {
            layers.push(conv(&mut rng, c, 8, 3, 1));
            layers.push(Layer::Relu);
            layers.push(Layer::MaxPool2);
            layers.push(Layer::MaxPool2);
            layers.push(conv(&mut rng, 8, 12, 3, 1));
            layers.push(Layer::Relu);
            layers.push(Layer::GlobalAvgPool);
            layers.push(dense(&mut rng, 12, classes));
        }
        other => {
            return Err(Error::UnknownArchitecture {
                id: other.to_string(),
                valid: ARCHITECTURE_IDS.join(", "),
            })
        }
    }
    Network::new(id, profile.shape, layers)
}

#[derive(Debug, Clone, Copy)]
pub struct TrainZooConfig {
    pub lr: f32,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Held-out accuracy every model must reach; training fails otherwise.
    pub min_accuracy: f64,
    /// Stop early once a model reaches this held-out accuracy.
    pub early_stop_accuracy: f64,
    pub seed: u64,
}

impl Default for TrainZooConfig {
    fn default() -> Self {
        TrainZooConfig {
            lr: 0.08,
            batch_size: 32,
            max_epochs: 30,
            min_accuracy: 0.85,
            early_stop_accuracy: 0.97,
            seed: 0,
        }
    }
}

/// Train all five architectures on one training set (models in parallel,
/// each single-threaded and fully seeded). Fails if any model misses the
/// accuracy floor, naming the offender.
pub fn train_zoo(
    profile: &DatasetProfile,
    train: &[LabeledSample],
    held_out: &[LabeledSample],
    config: TrainZooConfig,
) -> Result<ModelZoo> {
    if train.is_empty() || held_out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    profile.check_samples(train)?;
    profile.check_samples(held_out)?;

    let entries: Result<Vec<ZooEntry>> = ARCHITECTURE_IDS
        .par_iter()
        .enumerate()
        .map(|(i, id)| {
            let mut net = build_architecture(id, profile, derive_seed(config.seed, &[i as u64]))?;
            let mut accuracy = 0.0;
            for epoch in 0..config.max_epochs {
                train_epoch(
                    &mut net,
                    train,
                    TrainConfig {
                        lr: config.lr,
                        batch_size: config.batch_size,
                        seed: derive_seed(config.seed, &[i as u64, epoch as u64]),
                    },
                )?;
                accuracy = evaluate_accuracy(&net, held_out)?;
                if accuracy >= config.early_stop_accuracy {
                    break;
                }
            }
            if accuracy < config.min_accuracy {
                return Err(Error::AccuracyFloorUnmet {
                    arch: id.to_string(),
                    accuracy,
                    floor: config.min_accuracy,
                });
            }
            Ok(ZooEntry {
                arch_id: id.to_string(),
                network: net,
                accuracy,
            })
        })
        .collect();
    Ok(ModelZoo {
        profile: profile.clone(),
        entries: entries?,
    })
}

// --- checkpoint persistence -------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TensorManifest {
    name: String,
    shape: Vec<usize>,
    file: String,
}

#[derive(Serialize, Deserialize)]
struct ModelManifest {
    format_version: u32,
    arch_id: String,
    profile: DatasetProfile,
    accuracy: f64,
    tensors: Vec<TensorManifest>,
}

#[derive(Serialize, Deserialize)]
struct ZooManifest {
    format_version: u32,
    profile: DatasetProfile,
    models: Vec<String>,
}

fn write_f32_blob(path: &Path, values: &[f32]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn read_f32_blob(path: &Path, expected_len: usize) -> Result<Vec<f32>> {
    let bytes = fs::read(path)?;
    if bytes.len() != expected_len * 4 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            offset: bytes.len() as u64,
            message: format!("expected {} bytes, found {}", expected_len * 4, bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Save the zoo as a directory of per-model checkpoints: a JSON manifest
/// plus one little-endian f32 blob per parameter tensor.
pub fn save_zoo(zoo: &ModelZoo, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = ZooManifest {
        format_version: CHECKPOINT_VERSION,
        profile: zoo.profile.clone(),
        models: zoo.ids(),
    };
    fs::write(dir.join("zoo.json"), serde_json::to_string_pretty(&manifest)?)?;
    for entry in &zoo.entries {
        let model_dir = dir.join(&entry.arch_id);
        fs::create_dir_all(&model_dir)?;
        let mut tensors = Vec::new();
        for (name, shape, values) in entry.network.parameters() {
            let file = format!("{}.bin", name.replace('.', "_"));
            write_f32_blob(&model_dir.join(&file), values)?;
            tensors.push(TensorManifest { name, shape, file });
        }
        let manifest = ModelManifest {
            format_version: CHECKPOINT_VERSION,
            arch_id: entry.arch_id.clone(),
            profile: zoo.profile.clone(),
            accuracy: entry.accuracy,
            tensors,
        };
        fs::write(model_dir.join("model.json"), serde_json::to_string_pretty(&manifest)?)?;
    }
    Ok(())
}

/// Load a zoo saved by [`save_zoo`]. Parameter round-trips are bit-exact.
pub fn load_zoo(dir: &Path) -> Result<ModelZoo> {
    let manifest: ZooManifest = serde_json::from_str(&fs::read_to_string(dir.join("zoo.json"))?)?;
    if manifest.format_version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            expected: CHECKPOINT_VERSION,
            found: manifest.format_version,
        });
    }
    let mut entries = Vec::new();
    for id in &manifest.models {
        let model_dir = dir.join(id);
        let mm: ModelManifest = serde_json::from_str(&fs::read_to_string(model_dir.join("model.json"))?)?;
        if mm.format_version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                expected: CHECKPOINT_VERSION,
                found: mm.format_version,
            });
        }
        let mut net = build_architecture(&mm.arch_id, &manifest.profile, 0)?;
        let expected: Vec<(String, Vec<usize>)> = net
            .parameters()
            .iter()
            .map(|(n, s, _)| (n.clone(), s.clone()))
            .collect();
        let mut loaded: Vec<Vec<f32>> = Vec::with_capacity(expected.len());
        for ((name, shape), tm) in expected.iter().zip(&mm.tensors) {
            if &tm.name != name || &tm.shape != shape {
                return Err(Error::Parse {
                    path: model_dir.join("model.json"),
                    offset: 0,
                    message: format!(
                        "tensor {} with shape {:?} does not match architecture ({} {:?})",
                        tm.name, tm.shape, name, shape
                    ),
                });
            }
            let len = shape.iter().product();
            loaded.push(read_f32_blob(&model_dir.join(&tm.file), len)?);
        }
        if mm.tensors.len() != expected.len() {
            return Err(Error::Parse {
                path: model_dir.join("model.json"),
                offset: 0,
                message: format!("expected {} tensors, manifest lists {}", expected.len(), mm.tensors.len()),
            });
        }
        overwrite_parameters(&mut net, &loaded);
        entries.push(ZooEntry {
            arch_id: mm.arch_id,
            network: net,
            accuracy: mm.accuracy,
        });
    }
    Ok(ModelZoo {
        profile: manifest.profile,
        entries,
    })
}

fn overwrite_parameters(net: &mut Network, tensors: &[Vec<f32>]) {
    let mut it = tensors.iter();
    for layer in net.layers_mut() {
        match layer {
            Layer::Conv2d { weight, bias, .. } | Layer::Dense { weight, bias, .. } => {
                weight.copy_from_slice(it.next().expect("tensor count validated"));
                bias.copy_from_slice(it.next().expect("tensor count validated"));
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic_dataset, SyntheticSpec};
    use crate::tensor::ImageTensor;

    fn profile_16() -> DatasetProfile {
        DatasetProfile::new("test-synth", (1, 16, 16), 3)
    }

    #[test]
    fn build_is_deterministic_per_seed() {
        let p = profile_16();
        for id in ARCHITECTURE_IDS {
            let a = build_architecture(id, &p, 42).unwrap();
            let b = build_architecture(id, &p, 42).unwrap();
            let pa: Vec<u32> = a.parameters().iter().flat_map(|(_, _, v)| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>()).collect();
            let pb: Vec<u32> = b.parameters().iter().flat_map(|(_, _, v)| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>()).collect();
            assert_eq!(pa, pb, "{id}");
        }
    }

    #[test]
    fn all_architectures_emit_class_logits() {
        let p = profile_16();
        let x = ImageTensor::constant(p.shape, 0.4);
        for id in ARCHITECTURE_IDS {
            let net = build_architecture(id, &p, 1).unwrap();
            assert_eq!(net.forward(&x).unwrap().len(), p.classes, "{id}");
        }
    }

    #[test]
    fn parameter_counts_are_pairwise_distinct() {
        let p = DatasetProfile::new("synth64", (3, 64, 64), 6);
        let counts: Vec<usize> = ARCHITECTURE_IDS
            .iter()
            .map(|id| build_architecture(id, &p, 0).unwrap().parameter_count())
            .collect();
        for i in 0..counts.len() {
            for j in i + 1..counts.len() {
                assert_ne!(counts[i], counts[j], "{} vs {}", ARCHITECTURE_IDS[i], ARCHITECTURE_IDS[j]);
            }
        }
    }

    #[test]
    fn mlp_has_no_convolutions() {
        let net = build_architecture("mlp", &profile_16(), 0).unwrap();
        assert!(net.layers().iter().all(|l| !matches!(l, Layer::Conv2d { .. })));
    }

    #[test]
    fn unknown_architecture_lists_valid_ids() {
        let err = build_architecture("resnet", &profile_16(), 0).unwrap_err();
        let msg = err.to_string();
        for id in ARCHITECTURE_IDS {
            assert!(msg.contains(id), "{msg}");
        }
    }

    #[test]
    fn enumerate_roles_contract() {
        let p = profile_16();
        let make = |n: usize| ModelZoo {
            profile: p.clone(),
            entries: (0..n)
                .map(|i| ZooEntry {
                    arch_id: format!("m{i}"),
                    network: build_architecture("cnn-a", &p, i as u64).unwrap(),
                    accuracy: 1.0,
                })
                .collect(),
        };
        let roles = enumerate_roles(&make(5)).unwrap();
        assert_eq!(roles.len(), 20);
        for r in &roles {
            assert_ne!(r.victim, r.surrogate);
            assert_eq!(r.ranking.len(), 3);
            assert!(!r.ranking.contains(&r.victim));
            assert!(!r.ranking.contains(&r.surrogate));
        }
        assert!(matches!(enumerate_roles(&make(2)), Err(Error::ZooTooSmall { .. })));
    }

    #[test]
    fn accuracy_of_constant_classifier_is_chance() {
        // A dense layer with zero weights predicts class 0 for everything.
        let p = DatasetProfile::new("t", (1, 8, 8), 4);
        let net = Network::new(
            "const",
            p.shape,
            vec![
                Layer::Flatten,
                Layer::Dense {
                    weight: vec![0.0; 4 * 64],
                    bias: vec![0.0; 4],
                    out_dim: 4,
                    in_dim: 64,
                },
            ],
        )
        .unwrap();
        let data: Vec<LabeledSample> = (0..40)
            .map(|i| LabeledSample::new(ImageTensor::constant(p.shape, 0.5), i % 4))
            .collect();
        let acc = evaluate_accuracy(&net, &data).unwrap();
        assert!((acc - 0.25).abs() < 1e-9);
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let spec = SyntheticSpec::new(3, (1, 16, 16), 8, 3);
        let (train, test) = generate_synthetic_dataset(&spec).unwrap();
        let profile = DatasetProfile::new("ckpt-test", spec.shape, spec.classes);
        let mut net = build_architecture("cnn-pool", &profile, 7).unwrap();
        // A couple of epochs so parameters are not at init.
        for e in 0..2 {
            train_epoch(
                &mut net,
                &train,
                TrainConfig {
                    lr: 0.05,
                    batch_size: 8,
                    seed: e,
                },
            )
            .unwrap();
        }
        let zoo = ModelZoo {
            profile: profile.clone(),
            entries: vec![ZooEntry {
                arch_id: "cnn-pool".into(),
                network: net,
                accuracy: 0.5,
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        save_zoo(&zoo, dir.path()).unwrap();
        let back = load_zoo(dir.path()).unwrap();
        let x = &test[0].image;
        let before = zoo.entries[0].network.forward(x).unwrap();
        let after = back.entries[0].network.forward(x).unwrap();
        let b: Vec<u32> = before.iter().map(|v| v.to_bits()).collect();
        let a: Vec<u32> = after.iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = ZooManifest {
            format_version: 99,
            profile: profile_16(),
            models: vec![],
        };
        fs::write(dir.path().join("zoo.json"), serde_json::to_string(&manifest).unwrap()).unwrap();
        assert!(matches!(load_zoo(dir.path()), Err(Error::VersionMismatch { .. })));
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let spec = SyntheticSpec::new(3, (1, 16, 16), 4, 3);
        let profile = DatasetProfile::new("trunc", spec.shape, spec.classes);
        let zoo = ModelZoo {
            profile: profile.clone(),
            entries: vec![ZooEntry {
                arch_id: "mlp".into(),
                network: build_architecture("mlp", &profile, 0).unwrap(),
                accuracy: 0.9,
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        save_zoo(&zoo, dir.path()).unwrap();
        let blob = dir.path().join("mlp").join("layer1_weight.bin");
        let bytes = fs::read(&blob).unwrap();
        fs::write(&blob, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(load_zoo(dir.path()), Err(Error::Parse { .. })));
    }
}
