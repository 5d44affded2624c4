//! Shared test support: an independent f64 reference implementation of the
//! network forward pass (straight-line code, no shared kernels with the
//! engine), central finite differences with branch-flip detection, random
//! small-network generators, and the lazily trained desk fixture.

#![allow(dead_code)]

use peas_lab::data::{generate_synthetic_dataset, DatasetProfile, SyntheticSpec};
use peas_lab::nn::{Layer, Network};
use peas_lab::rng::rng_for;
use peas_lab::tensor::{ImageTensor, LabeledSample};
use peas_lab::zoo::{load_zoo, save_zoo, train_zoo, ModelZoo, TrainZooConfig};
use rand::Rng;
use std::path::PathBuf;
use std::sync::OnceLock;

// --- independent f64 reference network --------------------------------------

/// Branch decisions taken during a reference forward pass: one bool per relu
/// element plus one argmax index per pooling window. Finite differences are
/// only trusted when the signature is identical on both sides of the
/// perturbation (the loss is differentiable on the interval).
#[derive(PartialEq, Eq, Clone, Debug, Default)]
pub struct BranchSig {
    relu: Vec<bool>,
    pool: Vec<u8>,
}

/// Straight-line f64 evaluation of a network built from the engine's layer
/// parameters. Deliberately naive loops, sharing no code with the engine.
pub fn ref_logits(net: &Network, x: &[f64], sig: &mut BranchSig) -> Vec<f64> {
    let (c0, h0, w0) = net.input_shape();
    let mut data = x.to_vec();
    let (mut c, mut h, mut w) = (c0, h0, w0);
    for layer in net.layers() {
        match layer {
            Layer::Conv2d {
                weight,
                bias,
                out_channels,
                in_channels,
                kernel,
                padding,
            } => {
                let (oc, ic, k, p) = (*out_channels, *in_channels, *kernel, *padding);
                let oh = h + 2 * p - (k - 1);
                let ow = w + 2 * p - (k - 1);
                let mut out = vec![0.0f64; oc * oh * ow];
                for o in 0..oc {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = bias[o] as f64;
                            for i in 0..ic {
                                for ky in 0..k {
                                    for kx in 0..k {
                                        let iy = oy as i64 + ky as i64 - p as i64;
                                        let ix = ox as i64 + kx as i64 - p as i64;
                                        if iy < 0 || ix < 0 || iy >= h as i64 || ix >= w as i64 {
                                            continue;
                                        }
                                        let wv = weight[((o * ic + i) * k + ky) * k + kx] as f64;
                                        acc += wv * data[(i * h + iy as usize) * w + ix as usize];
                                    }
                                }
                            }
                            out[(o * oh + oy) * ow + ox] = acc;
                        }
                    }
                }
                data = out;
                c = oc;
                h = oh;
                w = ow;
            }
            Layer::Dense {
                weight,
                bias,
                out_dim,
                in_dim,
            } => {
                let mut out = vec![0.0f64; *out_dim];
                for (j, o) in out.iter_mut().enumerate() {
                    let mut acc = bias[j] as f64;
                    for i in 0..*in_dim {
                        acc += weight[j * in_dim + i] as f64 * data[i];
                    }
                    *o = acc;
                }
                data = out;
                c = *out_dim;
                h = 1;
                w = 1;
            }
            Layer::Relu => {
                for v in &mut data {
                    let on = *v > 0.0;
                    sig.relu.push(on);
                    if !on {
                        *v = 0.0;
                    }
                }
            }
            Layer::MaxPool2 => {
                let (oh, ow) = (h / 2, w / 2);
                let mut out = vec![0.0f64; c * oh * ow];
                for ch in 0..c {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut best = 0u8;
                            let mut bv = f64::NEG_INFINITY;
                            for (slot, (dy, dx)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
                                let v = data[(ch * h + 2 * oy + dy) * w + 2 * ox + dx];
                                if v > bv {
                                    bv = v;
                                    best = slot as u8;
                                }
                            }
                            sig.pool.push(best);
                            out[(ch * oh + oy) * ow + ox] = bv;
                        }
                    }
                }
                data = out;
                h = oh;
                w = ow;
            }
            Layer::GlobalAvgPool => {
                let mut out = vec![0.0f64; c];
                for (ch, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for i in 0..h * w {
                        acc += data[ch * h * w + i];
                    }
                    *o = acc / (h * w) as f64;
                }
                data = out;
                h = 1;
                w = 1;
            }
            Layer::Flatten => {
                c *= h * w;
                h = 1;
                w = 1;
            }
        }
    }
    data
}

/// f64 cross-entropy via the reference forward.
pub fn ref_loss(net: &Network, x: &[f64], y: usize, sig: &mut BranchSig) -> f64 {
    let logits = ref_logits(net, x, sig);
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln() - logits[y]
}

/// Central finite differences of the reference loss with respect to each
/// input pixel. Entries where a relu/pool branch flips across the
/// perturbation interval come back as `None` (the loss is not differentiable
/// there and the comparison would be meaningless).
pub fn fd_input_gradient(net: &Network, x: &ImageTensor, y: usize, h: f64) -> Vec<Option<f64>> {
    let base: Vec<f64> = x.data().iter().map(|&v| v as f64).collect();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] += h;
        let mut minus = base.clone();
        minus[i] -= h;
        let mut sig_p = BranchSig::default();
        let mut sig_m = BranchSig::default();
        let lp = ref_loss(net, &plus, y, &mut sig_p);
        let lm = ref_loss(net, &minus, y, &mut sig_m);
        if sig_p == sig_m {
            out.push(Some((lp - lm) / (2.0 * h)));
        } else {
            out.push(None);
        }
    }
    out
}

/// Outcome of comparing an analytic gradient against finite differences.
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped_nonsmooth: usize,
}

/// Two-tolerance comparison: entries within `abs_floor` of the oracle pass
/// outright; the rest contribute |a-n| / max(|a|, |n|).
pub fn compare_gradients(analytic: &[f32], fd: &[Option<f64>], abs_floor: f64) -> GradCheck {
    let mut max_rel: f64 = 0.0;
    let mut checked = 0;
    let mut skipped = 0;
    for (&a, n) in analytic.iter().zip(fd) {
        match n {
            None => skipped += 1,
            Some(n) => {
                checked += 1;
                let err = (a as f64 - n).abs();
                if err > abs_floor {
                    max_rel = max_rel.max(err / (a as f64).abs().max(n.abs()));
                }
            }
        }
    }
    GradCheck {
        max_rel_error: max_rel,
        checked,
        skipped_nonsmooth: skipped,
    }
}

// --- random small networks ---------------------------------------------------

fn he(rng: &mut rand_chacha::ChaCha8Rng, fan_in: usize, n: usize) -> Vec<f32> {
    let lim = (6.0 / fan_in as f32).sqrt();
    (0..n).map(|_| rng.gen_range(-lim..lim)).collect()
}

/// A random small architecture drawn from four templates (conv/pool/gap
/// mixes and a pure dense stack).
pub fn random_small_net(seed: u64) -> Network {
    let mut rng = rng_for(seed, &[0xACE]);
    let c = rng.gen_range(1..=3usize);
    let hw = rng.gen_range(8..=10usize) & !1; // even, pools stay clean
    let classes = rng.gen_range(2..=4usize);
    let template = rng.gen_range(0..4u32);
    let mut layers = Vec::new();
    match template {
        0 => {
            layers.push(Layer::Conv2d {
                weight: he(&mut rng, c * 9, 4 * c * 9),
                bias: vec![0.0; 4],
                out_channels: 4,
                in_channels: c,
                kernel: 3,
                padding: 1,
            });
            layers.push(Layer::Relu);
            layers.push(Layer::MaxPool2);
            layers.push(Layer::Conv2d {
                weight: he(&mut rng, 4 * 9, 6 * 4 * 9),
                bias: vec![0.0; 6],
                out_channels: 6,
                in_channels: 4,
                kernel: 3,
                padding: 1,
            });
            layers.push(Layer::Relu);
            layers.push(Layer::GlobalAvgPool);
            layers.push(Layer::Dense {
                weight: he(&mut rng, 6, classes * 6),
                bias: vec![0.0; classes],
                out_dim: classes,
                in_dim: 6,
            });
        }
        1 => {
            let oh = hw - 2;
            let flat = 5 * oh * oh;
            layers.push(Layer::Conv2d {
                weight: he(&mut rng, c * 9, 5 * c * 9),
                bias: vec![0.0; 5],
                out_channels: 5,
                in_channels: c,
                kernel: 3,
                padding: 0,
            });
            layers.push(Layer::Relu);
            layers.push(Layer::Flatten);
            layers.push(Layer::Dense {
                weight: he(&mut rng, flat, classes * flat),
                bias: vec![0.0; classes],
                out_dim: classes,
                in_dim: flat,
            });
        }
        2 => {
            let flat = c * hw * hw;
            layers.push(Layer::Flatten);
            layers.push(Layer::Dense {
                weight: he(&mut rng, flat, 16 * flat),
                bias: vec![0.0; 16],
                out_dim: 16,
                in_dim: flat,
            });
            layers.push(Layer::Relu);
            layers.push(Layer::Dense {
                weight: he(&mut rng, 16, classes * 16),
                bias: vec![0.0; classes],
                out_dim: classes,
                in_dim: 16,
            });
        }
        _ => {
            layers.push(Layer::Conv2d {
                weight: he(&mut rng, c * 25, 3 * c * 25),
                bias: vec![0.0; 3],
                out_channels: 3,
                in_channels: c,
                kernel: 5,
                padding: 2,
            });
            layers.push(Layer::Relu);
            layers.push(Layer::MaxPool2);
            let flat = 3 * (hw / 2) * (hw / 2);
            layers.push(Layer::Flatten);
            layers.push(Layer::Dense {
                weight: he(&mut rng, flat, classes * flat),
                bias: vec![0.0; classes],
                out_dim: classes,
                in_dim: flat,
            });
        }
    }
    Network::new(format!("rand-{seed}"), (c, hw, hw), layers).unwrap()
}

pub fn random_input(net: &Network, seed: u64) -> ImageTensor {
    let (c, h, w) = net.input_shape();
    let mut rng = rng_for(seed, &[0x1111]);
    ImageTensor::new((c, h, w), (0..c * h * w).map(|_| rng.gen_range(0.05..0.95)).collect()).unwrap()
}

// --- the shared desk fixture ---------------------------------------------------

/// Parameters of the desk-scale experiment shared by the acceptance criteria.
pub const DESK_CLASSES: usize = 6;
pub const DESK_SHAPE: (usize, usize, usize) = (3, 64, 64);
pub const DESK_PER_CLASS: usize = 200;
pub const DESK_DATA_SEED: u64 = 11;
pub const DESK_MASTER_SEED: u64 = 20_2608;
/// Bump to invalidate the on-disk fixture cache after changing any parameter
/// above or the training defaults.
const FIXTURE_TAG: &str = "desk-v1";

pub struct DeskFixture {
    pub profile: DatasetProfile,
    pub train: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
    pub zoo: ModelZoo,
}

static DESK: OnceLock<DeskFixture> = OnceLock::new();

fn fixture_cache_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(FIXTURE_TAG)
}

/// Dataset plus trained zoo, built once per process and cached on disk under
/// the cargo target dir so repeated test runs skip retraining.
pub fn desk() -> &'static DeskFixture {
    DESK.get_or_init(|| {
        let spec = SyntheticSpec::new(DESK_CLASSES, DESK_SHAPE, DESK_PER_CLASS, DESK_DATA_SEED);
        let (train, test) = generate_synthetic_dataset(&spec).unwrap();
        let profile = DatasetProfile::new(
            format!("synthetic-{}c-{}x{}", DESK_CLASSES, DESK_SHAPE.1, DESK_SHAPE.2),
            DESK_SHAPE,
            DESK_CLASSES,
        );
        let cache = fixture_cache_dir();
        let zoo = if cache.join("zoo.json").exists() {
            load_zoo(&cache).expect("fixture cache readable")
        } else {
            let zoo = train_zoo(
                &profile,
                &train,
                &test,
                TrainZooConfig {
                    seed: DESK_MASTER_SEED,
                    ..TrainZooConfig::default()
                },
            )
            .expect("zoo reaches the accuracy floor");
            save_zoo(&zoo, &cache).expect("fixture cache writable");
            zoo
        };
        DeskFixture {
            profile,
            train,
            test,
            zoo,
        }
    })
}
