//! Plain SGD training. Single-threaded per model with a fixed accumulation
//! order, so a fixed seed reproduces parameters bit for bit.

use super::{Layer, LayerGrad, Network};
use crate::error::{Error, Result};
use crate::rng::rng_for;
use crate::tensor::LabeledSample;
use rand::seq::SliceRandom;

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub lr: f32,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.05,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// One epoch of mini-batch SGD over `data` (shuffled by `config.seed`).
/// Returns the mean cross-entropy loss over all samples.
pub fn train_epoch(net: &mut Network, data: &[LabeledSample], config: TrainConfig) -> Result<f32> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !config.lr.is_finite() || config.lr < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be finite and >= 0, got {}",
            config.lr
        )));
    }
    let batch_size = config.batch_size.max(1);

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng_for(config.seed, &[]));

    let mut total_loss = 0.0f64;
    for batch in order.chunks(batch_size) {
        let mut acc: Option<Vec<LayerGrad>> = None;
        for &idx in batch {
            let sample = &data[idx];
            let (loss, grads) = net.parameter_gradients(&sample.image, sample.label)?;
            total_loss += loss as f64;
            match &mut acc {
                None => acc = Some(grads),
                Some(sum) => accumulate(sum, &grads),
            }
        }
        let grads = acc.expect("non-empty batch");
        apply_sgd_step(net, &grads, config.lr / batch.len() as f32)?;
    }
    Ok((total_loss / data.len() as f64) as f32)
}

fn accumulate(sum: &mut [LayerGrad], add: &[LayerGrad]) {
    for (s, a) in sum.iter_mut().zip(add) {
        if let (LayerGrad::Params { weight: sw, bias: sb }, LayerGrad::Params { weight: aw, bias: ab }) = (s, a) {
            for (x, y) in sw.iter_mut().zip(aw) {
                *x += y;
            }
            for (x, y) in sb.iter_mut().zip(ab) {
                *x += y;
            }
        }
    }
}

fn apply_sgd_step(net: &mut Network, grads: &[LayerGrad], scaled_lr: f32) -> Result<()> {
    let arch = net.arch_id().to_string();
    for (layer, grad) in net.layers_mut().iter_mut().zip(grads) {
        let (weight, bias) = match layer {
            Layer::Conv2d { weight, bias, .. } => (weight, bias),
            Layer::Dense { weight, bias, .. } => (weight, bias),
            _ => continue,
        };
        if let LayerGrad::Params { weight: dw, bias: db } = grad {
            for (w, g) in weight.iter_mut().zip(dw) {
                *w -= scaled_lr * g;
            }
            for (b, g) in bias.iter_mut().zip(db) {
                *b -= scaled_lr * g;
            }
        }
    }
    if !net.parameters_finite() {
        return Err(Error::TrainingDiverged { arch });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::ImageTensor;

    fn toy_net(seed_weights: &[f32]) -> Network {
        Network::new(
            "toy",
            (2, 1, 1),
            vec![Layer::Dense {
                weight: seed_weights.to_vec(),
                bias: vec![0.0; 2],
                out_dim: 2,
                in_dim: 2,
            }],
        )
        .unwrap()
    }

    fn toy_data() -> Vec<LabeledSample> {
        // Linearly separable: class = argmax coordinate.
        let mut samples = Vec::new();
        for i in 0..10 {
            let a = 0.55 + 0.04 * i as f32;
            let b = 0.45 - 0.04 * i as f32 * 0.5;
            samples.push(LabeledSample::new(
                ImageTensor::new((2, 1, 1), vec![a, b]).unwrap(),
                0,
            ));
            samples.push(LabeledSample::new(
                ImageTensor::new((2, 1, 1), vec![b, a]).unwrap(),
                1,
            ));
        }
        samples
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let mut net = toy_net(&[0.3, -0.1, 0.2, 0.4]);
        let before: Vec<f32> = net.parameters().iter().flat_map(|(_, _, v)| v.to_vec()).collect();
        train_epoch(
            &mut net,
            &toy_data(),
            TrainConfig {
                lr: 0.0,
                batch_size: 4,
                seed: 1,
            },
        )
        .unwrap();
        let after: Vec<f32> = net.parameters().iter().flat_map(|(_, _, v)| v.to_vec()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn separable_toy_set_converges() {
        let mut net = toy_net(&[0.01, 0.02, -0.02, 0.01]);
        let data = toy_data();
        for epoch in 0..50 {
            train_epoch(
                &mut net,
                &data,
                TrainConfig {
                    lr: 0.5,
                    batch_size: 5,
                    seed: epoch,
                },
            )
            .unwrap();
        }
        let correct = data
            .iter()
            .filter(|s| net.predict(&s.image).unwrap() == s.label)
            .count();
        let acc = correct as f64 / data.len() as f64;
        assert!(acc >= 0.95, "training accuracy {acc}");
    }

    #[test]
    fn fixed_seed_reproduces_parameters_exactly() {
        let data = toy_data();
        let run = || {
            let mut net = toy_net(&[0.05, -0.03, 0.02, 0.08]);
            for epoch in 0..3 {
                train_epoch(
                    &mut net,
                    &data,
                    TrainConfig {
                        lr: 0.2,
                        batch_size: 3,
                        seed: 77 + epoch,
                    },
                )
                .unwrap();
            }
            net.parameters()
                .iter()
                .flat_map(|(_, _, v)| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>())
                .collect::<Vec<u32>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let mut net = toy_net(&[0.0; 4]);
        assert!(matches!(
            train_epoch(&mut net, &[], TrainConfig::default()),
            Err(Error::EmptyDataset)
        ));
    }
}
