//! Bring-up probe for the desk-scale experiment: trains the zoo on the
//! synthetic dataset, then prints accuracies, white-box and transfer attack
//! rates, exploration statistics, and rough timings. Useful when porting the
//! lab to a new machine or retuning the dataset.

use peas_lab::attacks::{attack_pgd, AttackSpec};
use peas_lab::augment::{AugmentPreset, SamplingFunction, SamplingMode};
use peas_lab::data::{generate_synthetic_dataset, DatasetProfile, SyntheticSpec};
use peas_lab::harness::build_pool;
use peas_lab::nn::argmax;
use peas_lab::peas::{explore_candidates, ExploreConfig, RankingModel};
use peas_lab::rng::derive_seed;
use peas_lab::zoo::{enumerate_roles, train_zoo, TrainZooConfig};
use rayon::prelude::*;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let spec = SyntheticSpec::new(6, (3, 64, 64), 200, 11);
    let (train, test) = generate_synthetic_dataset(&spec).unwrap();
    let profile = DatasetProfile::new("synthetic-6c-64x64", spec.shape, spec.classes);
    println!("dataset: train {} test {} ({:.1}s)", train.len(), test.len(), t0.elapsed().as_secs_f32());

    let t = Instant::now();
    let zoo = train_zoo(&profile, &train, &test, TrainZooConfig::default()).unwrap();
    println!("zoo trained in {:.1}s", t.elapsed().as_secs_f32());
    for e in &zoo.entries {
        println!("  {:10} acc {:.4}  params {}", e.arch_id, e.accuracy, e.network.parameter_count());
    }

    // Forward/backward timing on one model.
    let net = &zoo.entries[0].network;
    let x = &test[0].image;
    let t = Instant::now();
    for _ in 0..200 {
        let _ = net.forward(x).unwrap();
    }
    let fwd_us = t.elapsed().as_micros() as f64 / 200.0;
    let t = Instant::now();
    for _ in 0..200 {
        let _ = net.input_gradient(x, 0).unwrap();
    }
    let grad_us = t.elapsed().as_micros() as f64 / 200.0;
    println!("forward {fwd_us:.0}us  input_gradient {grad_us:.0}us");

    let eps_attack = 2.0 / 255.0;
    let eps_whitebox = 8.0 / 255.0;

    // White-box sanity per model.
    for e in &zoo.entries {
        let pool = build_pool(&e.network, &test, 60, 1).unwrap();
        let spec = AttackSpec::pgd(eps_whitebox);
        let fooled = pool
            .par_iter()
            .filter(|s| {
                let r = attack_pgd(&e.network, &s.image, s.label, &spec).unwrap();
                r.success_on_source
            })
            .count();
        println!("white-box pgd eps=8/255 on {:10}: {:.3}", e.arch_id, fooled as f64 / pool.len() as f64);
    }

    // Transfer + exploration stats over all role pairs (reduced pool).
    let roles = enumerate_roles(&zoo).unwrap();
    let pool_size = 40;
    let n = 30;
    let t = Instant::now();
    let mut bta_sum = 0.0;
    let mut peas_sum = 0.0;
    let mut vanilla_sum = 0.0;
    let mut oracle_sum = 0.0;
    let mut preserve_sum = 0.0;
    let mut linf_sum = 0.0;
    for (pair_idx, role) in roles.iter().enumerate() {
        let victim = zoo.network(&role.victim).unwrap();
        let surrogate = zoo.network(&role.surrogate).unwrap();
        let ranking: Vec<RankingModel> = role
            .ranking
            .iter()
            .map(|id| RankingModel {
                id,
                network: zoo.network(id).unwrap(),
            })
            .collect();
        let vidx = zoo.ids().iter().position(|i| i == &role.victim).unwrap() as u64;
        let pool = build_pool(victim, &test, pool_size, derive_seed(99, &[vidx])).unwrap();
        let stats: Vec<(bool, bool, bool, bool, f64, f64)> = pool
            .par_iter()
            .enumerate()
            .map(|(sidx, s)| {
                let spec = AttackSpec::pgd(eps_attack).with_seed(derive_seed(7, &[pair_idx as u64, sidx as u64]));
                // BTA
                let bta = attack_pgd(surrogate, &s.image, s.label, &spec).unwrap();
                let bta_ok = argmax(&victim.forward(&bta.adversarial).unwrap()) != s.label;
                // PEAS S2
                let sampling = SamplingFunction::new(
                    SamplingMode::S2,
                    AugmentPreset::high_res(),
                    derive_seed(13, &[pair_idx as u64, sidx as u64]),
                );
                let cands = explore_candidates(
                    &s.image,
                    s.label,
                    &ExploreConfig {
                        surrogate,
                        ranking: &ranking,
                        sampling: &sampling,
                        base_attack: Some(&spec),
                        n,
                        victim: Some(victim),
                        score_augmented: false,
                    },
                )
                .unwrap();
                let best = cands
                    .iter()
                    .max_by(|a, b| a.et.value.partial_cmp(&b.et.value).unwrap())
                    .unwrap();
                let peas_ok = best.fools_victim_adversarially.unwrap();
                let oracle_ok = cands.iter().any(|c| c.fools_victim_adversarially.unwrap());
                let preserved = cands.iter().filter(|c| !c.fools_victim_naturally.unwrap()).count() as f64
                    / cands.len() as f64;
                let mean_linf =
                    cands.iter().map(|c| c.distance_to_original.linf as f64).sum::<f64>() / cands.len() as f64;
                // Vanilla
                let vsampling = SamplingFunction::new(
                    SamplingMode::Noise { epsilon: eps_attack },
                    AugmentPreset::high_res(),
                    derive_seed(17, &[pair_idx as u64, sidx as u64]),
                );
                let vcands = explore_candidates(
                    &s.image,
                    s.label,
                    &ExploreConfig {
                        surrogate,
                        ranking: &ranking,
                        sampling: &vsampling,
                        base_attack: Some(&spec),
                        n,
                        victim: Some(victim),
                        score_augmented: false,
                    },
                )
                .unwrap();
                let vbest = vcands
                    .iter()
                    .max_by(|a, b| a.et.value.partial_cmp(&b.et.value).unwrap())
                    .unwrap();
                let vanilla_ok = vbest.fools_victim_adversarially.unwrap();
                (bta_ok, peas_ok, vanilla_ok, oracle_ok, preserved, mean_linf)
            })
            .collect();
        let m = pool.len() as f64;
        bta_sum += stats.iter().filter(|s| s.0).count() as f64 / m;
        peas_sum += stats.iter().filter(|s| s.1).count() as f64 / m;
        vanilla_sum += stats.iter().filter(|s| s.2).count() as f64 / m;
        oracle_sum += stats.iter().filter(|s| s.3).count() as f64 / m;
        preserve_sum += stats.iter().map(|s| s.4).sum::<f64>() / m;
        linf_sum += stats.iter().map(|s| s.5).sum::<f64>() / m;
    }
    let p = roles.len() as f64;
    println!(
        "pairs {} pool {} n {} eps 2/255  ({:.1}s)",
        roles.len(),
        pool_size,
        n,
        t.elapsed().as_secs_f32()
    );
    println!("macro BTA     {:.4}", bta_sum / p);
    println!("macro Vanilla {:.4}", vanilla_sum / p);
    println!("macro PEAS-S2 {:.4}", peas_sum / p);
    println!("macro Oracle  {:.4}", oracle_sum / p);
    println!("label preservation (S2) {:.4}", preserve_sum / p);
    println!("mean S2 linf {:.4} (= {:.1} x eps)", linf_sum / p, (linf_sum / p) / eps_attack as f64);
    println!("total {:.1}s", t0.elapsed().as_secs_f32());
}
