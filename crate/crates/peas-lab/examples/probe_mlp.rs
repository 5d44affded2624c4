//! Quick probe: per-epoch training curves for each architecture at a few
//! learning rates, to pick zoo training defaults.

use peas_lab::data::{generate_synthetic_dataset, DatasetProfile, SyntheticSpec};
use peas_lab::nn::{train_epoch, TrainConfig};
use peas_lab::rng::derive_seed;
use peas_lab::zoo::{build_architecture, evaluate_accuracy};

fn main() {
    let spec = SyntheticSpec::new(6, (3, 64, 64), 200, 11);
    let (train, test) = generate_synthetic_dataset(&spec).unwrap();
    let profile = DatasetProfile::new("synth", spec.shape, spec.classes);

    let arch = std::env::args().nth(1).unwrap_or_else(|| "mlp".to_string());
    for lr in [0.02f32, 0.05, 0.1, 0.2, 0.5] {
        let mut net = build_architecture(&arch, &profile, 1).unwrap();
        print!("{arch} lr={lr}: ");
        for epoch in 0..30u64 {
            let loss = train_epoch(
                &mut net,
                &train,
                TrainConfig {
                    lr,
                    batch_size: 32,
                    seed: derive_seed(5, &[epoch]),
                },
            )
            .unwrap();
            if epoch % 5 == 4 || epoch < 3 {
                let acc = evaluate_accuracy(&net, &test).unwrap();
                print!("e{epoch}:l{loss:.3}/a{acc:.3} ");
            }
        }
        println!();
    }
}
