//! Experiment orchestration: victim-correct pools, every victim/surrogate
//! role pair, baselines vs. exploration strategies, ablations, and the
//! n / epsilon / augmentation sweeps, all emitting machine-readable reports.
//!
//! Every random decision derives from (master seed, pair id, sample id), so
//! role pairs and pool samples can run on any number of workers without
//! changing a single reported value.

mod report;

pub use report::{
    bootstrap_ci, bootstrap_ci_values, load_report, report_to_csv, rows_from_csv, write_report, CandidateDump,
    ExperimentReport, ReportRow, RunMeta, SampleDump, SelectedDump, BOOTSTRAP_RESAMPLES,
};

use crate::attacks::{run_attack, AttackAlgorithm, AttackModels, AttackSpec};
use crate::augment::{AugmentPreset, AugmentationKind, SamplingFunction, SamplingMode};
use crate::data::{generate_synthetic_dataset, load_dataset, DatasetFormat, DatasetProfile, SyntheticSpec};
use crate::error::{Error, Result};
use crate::nn::{argmax, Network};
use crate::peas::{explore_candidates, select_candidate, ExploreConfig, RankingModel, SelectionStrategy};
use crate::rng::derive_seed;
use crate::tensor::{ImageTensor, LabeledSample};
use crate::zoo::{enumerate_roles, load_zoo, save_zoo, train_zoo, ModelZoo, TrainZooConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::PathBuf;

// Seed-derivation namespaces.
const NS_POOL: u64 = 0x0001;
const NS_SAMPLING: u64 = 0x0002;
const NS_ATTACK: u64 = 0x0003;
const NS_SELECT: u64 = 0x0004;
const NS_ZOO: u64 = 0x0005;
const NS_CI: u64 = 0x0006;

// --- configuration ----------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSection {
    Synthetic {
        classes: usize,
        shape: (usize, usize, usize),
        per_class: usize,
        seed: u64,
        #[serde(default)]
        noise: Option<f32>,
    },
    Files {
        path: PathBuf,
        format: DatasetFormat,
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        classes: Option<usize>,
    },
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZooSection {
    pub dir: PathBuf,
    #[serde(default = "default_true")]
    pub train_if_missing: bool,
    #[serde(default)]
    pub lr: Option<f32>,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub max_epochs: Option<usize>,
    #[serde(default)]
    pub min_accuracy: Option<f64>,
    #[serde(default)]
    pub early_stop_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSection {
    pub algorithm: AttackAlgorithm,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub step_size: Option<f32>,
    #[serde(default)]
    pub timi_kernel: Option<usize>,
    #[serde(default)]
    pub timi_diversity_prob: Option<f32>,
    #[serde(default)]
    pub timi_momentum: Option<f32>,
}

impl Default for AttackSection {
    fn default() -> Self {
        AttackSection {
            algorithm: AttackAlgorithm::Pgd,
            steps: None,
            step_size: None,
            timi_kernel: None,
            timi_diversity_prob: None,
            timi_momentum: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrategySpec {
    /// Plain transfer attack from the original input, no exploration.
    Bta,
    /// Ranking over epsilon-ball noise starts (noise sampling + top-1 ET).
    Vanilla,
    /// Exploration with the configured sampling and the given selection.
    Peas {
        selection: SelectionStrategy,
        #[serde(default)]
        sampling: Option<SamplingMode>,
    },
}

fn default_n_values() -> Vec<usize> {
    vec![1, 2, 5, 10, 25, 50, 100]
}

fn default_eps_values() -> Vec<f32> {
    vec![1.0 / 255.0, 2.0 / 255.0, 4.0 / 255.0, 8.0 / 255.0]
}

fn default_eps_n() -> usize {
    20
}

fn default_aug_n_values() -> Vec<usize> {
    vec![1, 5, 10, 25]
}

fn default_sweep_pool() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    #[serde(default = "default_n_values")]
    pub n_values: Vec<usize>,
    #[serde(default = "default_eps_values")]
    pub eps_values: Vec<f32>,
    /// Exploration size used during the epsilon sweep.
    #[serde(default = "default_eps_n")]
    pub eps_n: usize,
    #[serde(default = "default_aug_n_values")]
    pub aug_n_values: Vec<usize>,
    /// Restrict the per-augmentation sweep; all six by default.
    #[serde(default)]
    pub aug_kinds: Option<Vec<AugmentationKind>>,
    /// Smaller pool used by the sweeps to keep grids affordable.
    #[serde(default = "default_sweep_pool")]
    pub sweep_pool_size: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            n_values: default_n_values(),
            eps_values: default_eps_values(),
            eps_n: default_eps_n(),
            aug_n_values: default_aug_n_values(),
            aug_kinds: None,
            sweep_pool_size: default_sweep_pool(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    pub zoo: ZooSection,
    pub pool_size: usize,
    /// L-inf budget; defaults to the dataset preset's value when absent.
    #[serde(default)]
    pub epsilon: Option<f32>,
    pub exploration_n: usize,
    pub sampling: SamplingMode,
    /// Restrict the augmentation set A; all six kinds by default.
    #[serde(default)]
    pub augmentations: Option<Vec<AugmentationKind>>,
    #[serde(default)]
    pub attack: AttackSection,
    pub strategies: Vec<StrategySpec>,
    #[serde(default)]
    pub sweeps: SweepSection,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub candidate_dumps: bool,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::InvalidConfig {
            field: "(root)".to_string(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: String| {
            Err(Error::InvalidConfig {
                field: field.to_string(),
                message,
            })
        };
        if self.pool_size == 0 {
            return bad("pool_size", "must be >= 1".into());
        }
        if self.exploration_n == 0 {
            return bad("exploration_n", "must be >= 1".into());
        }
        if self.strategies.is_empty() {
            return bad("strategies", "at least one strategy is required".into());
        }
        if let Some(eps) = self.epsilon {
            if !(0.0..=1.0).contains(&eps) {
                return bad("epsilon", format!("must lie in [0, 1], got {eps}"));
            }
        }
        if let Some(kinds) = &self.augmentations {
            if kinds.is_empty() {
                return bad("augmentations", "subset must be non-empty when given".into());
            }
        }
        if self.attack.algorithm == AttackAlgorithm::Simba {
            return bad(
                "attack.algorithm",
                "query attacks cannot drive exploration; use a transfer attack".into(),
            );
        }
        if let DatasetSection::Synthetic {
            classes, per_class, shape, ..
        } = &self.dataset
        {
            if *classes < 2 {
                return bad("dataset.classes", "need at least 2 classes".into());
            }
            if *per_class < 2 {
                return bad("dataset.per_class", "need at least 2 samples per class".into());
            }
            if shape.1 < 8 || shape.2 < 8 {
                return bad("dataset.shape", "H and W must be >= 8".into());
            }
        }
        if self.sweeps.n_values.is_empty() {
            return bad("sweeps.n_values", "grid must be non-empty".into());
        }
        if self.sweeps.eps_values.is_empty() {
            return bad("sweeps.eps_values", "grid must be non-empty".into());
        }
        if self.sweeps.aug_n_values.is_empty() {
            return bad("sweeps.aug_n_values", "grid must be non-empty".into());
        }
        if self.sweeps.eps_n == 0 {
            return bad("sweeps.eps_n", "must be >= 1".into());
        }
        if self.sweeps.sweep_pool_size == 0 {
            return bad("sweeps.sweep_pool_size", "must be >= 1".into());
        }
        Ok(())
    }

    /// Hash of the semantically meaningful fields (everything that can change
    /// a measured value; output paths, worker counts, and dump flags are
    /// excluded).
    pub fn semantic_hash(&self) -> String {
        #[derive(Serialize)]
        struct View<'a> {
            dataset: &'a DatasetSection,
            zoo: &'a ZooSection,
            pool_size: usize,
            epsilon: &'a Option<f32>,
            exploration_n: usize,
            sampling: &'a SamplingMode,
            augmentations: &'a Option<Vec<AugmentationKind>>,
            attack: &'a AttackSection,
            strategies: &'a Vec<StrategySpec>,
            sweeps: &'a SweepSection,
            master_seed: u64,
        }
        let view = View {
            dataset: &self.dataset,
            zoo: &self.zoo,
            pool_size: self.pool_size,
            epsilon: &self.epsilon,
            exploration_n: self.exploration_n,
            sampling: &self.sampling,
            augmentations: &self.augmentations,
            attack: &self.attack,
            strategies: &self.strategies,
            sweeps: &self.sweeps,
            master_seed: self.master_seed,
        };
        let json = serde_json::to_string(&view).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hex_string(&hasher.finalize())
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

// --- environment ------------------------------------------------------------

/// A prepared experiment: config plus the loaded zoo and test split.
pub struct ExperimentEnv {
    pub config: ExperimentConfig,
    pub profile: DatasetProfile,
    pub zoo: ModelZoo,
    pub test_data: Vec<LabeledSample>,
}

impl ExperimentEnv {
    /// Load or generate the dataset and zoo named by the config. Trains and
    /// saves the zoo when the checkpoint directory is empty and
    /// `train_if_missing` is set.
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let (profile, train, test) = load_dataset_section(&config.dataset)?;
        if test.is_empty() {
            return Err(Error::InvalidConfig {
                field: "dataset".to_string(),
                message: "test split is empty; pools need held-out data".to_string(),
            });
        }
        let zoo_manifest = config.zoo.dir.join("zoo.json");
        let zoo = if zoo_manifest.exists() {
            let zoo = load_zoo(&config.zoo.dir)?;
            if zoo.profile.shape != profile.shape || zoo.profile.classes != profile.classes {
                return Err(Error::InvalidConfig {
                    field: "zoo.dir".to_string(),
                    message: format!(
                        "checkpointed zoo was trained for {:?}/{} classes, dataset is {:?}/{}",
                        zoo.profile.shape, zoo.profile.classes, profile.shape, profile.classes
                    ),
                });
            }
            zoo
        } else if config.zoo.train_if_missing {
            let defaults = TrainZooConfig::default();
            let zoo = train_zoo(
                &profile,
                &train,
                &test,
                TrainZooConfig {
                    lr: config.zoo.lr.unwrap_or(defaults.lr),
                    batch_size: config.zoo.batch_size.unwrap_or(defaults.batch_size),
                    max_epochs: config.zoo.max_epochs.unwrap_or(defaults.max_epochs),
                    min_accuracy: config.zoo.min_accuracy.unwrap_or(defaults.min_accuracy),
                    early_stop_accuracy: config.zoo.early_stop_accuracy.unwrap_or(defaults.early_stop_accuracy),
                    seed: derive_seed(config.master_seed, &[NS_ZOO]),
                },
            )?;
            save_zoo(&zoo, &config.zoo.dir)?;
            zoo
        } else {
            return Err(Error::InvalidConfig {
                field: "zoo.dir".to_string(),
                message: format!("no checkpoint at {} and train_if_missing is false", config.zoo.dir.display()),
            });
        };
        Ok(ExperimentEnv {
            config,
            profile,
            zoo,
            test_data: test,
        })
    }

    /// Wrap an already loaded zoo and test split (no file access).
    pub fn from_parts(config: ExperimentConfig, zoo: ModelZoo, test_data: Vec<LabeledSample>) -> Result<Self> {
        config.validate()?;
        let profile = zoo.profile.clone();
        profile.check_samples(&test_data)?;
        Ok(ExperimentEnv {
            config,
            profile,
            zoo,
            test_data,
        })
    }

    pub fn epsilon(&self) -> f32 {
        self.config
            .epsilon
            .unwrap_or_else(|| AttackSpec::default_epsilon(self.profile.preset))
    }

    fn preset(&self) -> AugmentPreset {
        AugmentPreset::for_preset(self.profile.preset)
    }

    /// Resolve the configured base attack at the given budget.
    pub fn base_attack_spec(&self, epsilon: f32) -> Result<AttackSpec> {
        let a = &self.config.attack;
        let mut spec = match a.algorithm {
            AttackAlgorithm::Pgd => AttackSpec::pgd(epsilon),
            AttackAlgorithm::Fgsm => AttackSpec::fgsm(epsilon),
            AttackAlgorithm::Timi => AttackSpec::timi(epsilon, self.profile.preset),
            other => {
                return Err(Error::InvalidConfig {
                    field: "attack.algorithm".to_string(),
                    message: format!("{} cannot drive exploration", other.as_str()),
                })
            }
        };
        if let Some(steps) = a.steps {
            spec.steps = steps;
        }
        if let Some(step_size) = a.step_size {
            spec.step_size = step_size;
        }
        if let Some(k) = a.timi_kernel {
            spec.timi.kernel_size = k;
        }
        if let Some(p) = a.timi_diversity_prob {
            spec.timi.diversity_prob = p;
        }
        if let Some(m) = a.timi_momentum {
            spec.timi.momentum = m;
        }
        spec.validate()?;
        Ok(spec)
    }

    fn sampler(&self, mode: SamplingMode, seed: u64) -> Result<SamplingFunction> {
        let f = SamplingFunction::new(mode, self.preset(), seed);
        match (&self.config.augmentations, mode) {
            (Some(kinds), SamplingMode::S1 | SamplingMode::S2) => f.with_set(kinds),
            _ => Ok(f),
        }
    }

    /// Victim-correct pools, one per distinct victim id.
    fn build_pools(&self, size: usize) -> Result<BTreeMap<String, Vec<LabeledSample>>> {
        let mut pools = BTreeMap::new();
        for (idx, entry) in self.zoo.entries.iter().enumerate() {
            let seed = derive_seed(self.config.master_seed, &[NS_POOL, idx as u64]);
            let pool = build_pool(&entry.network, &self.test_data, size, seed)?;
            pools.insert(entry.arch_id.clone(), pool);
        }
        Ok(pools)
    }
}

fn load_dataset_section(section: &DatasetSection) -> Result<(DatasetProfile, Vec<LabeledSample>, Vec<LabeledSample>)> {
    match section {
        DatasetSection::Synthetic {
            classes,
            shape,
            per_class,
            seed,
            noise,
        } => {
            let mut spec = SyntheticSpec::new(*classes, *shape, *per_class, *seed);
            if let Some(n) = noise {
                spec.noise = *n;
            }
            let (train, test) = generate_synthetic_dataset(&spec)?;
            let profile = DatasetProfile::new(
                format!("synthetic-{}c-{}x{}", classes, shape.1, shape.2),
                *shape,
                *classes,
            );
            Ok((profile, train, test))
        }
        DatasetSection::Files {
            path,
            format,
            name,
            classes,
        } => {
            let (train, test) = load_dataset(path, *format)?;
            if train.is_empty() {
                return Err(Error::EmptyDataset);
            }
            let shape = train[0].image.shape();
            let inferred = train
                .iter()
                .chain(test.iter())
                .map(|s| s.label + 1)
                .max()
                .unwrap_or(0);
            let classes = classes.unwrap_or(inferred);
            let name = name.clone().unwrap_or_else(|| {
                path.file_name()
                    .map(|n| n.to_string_lossy().to_string())
                    .unwrap_or_else(|| "dataset".to_string())
            });
            let profile = DatasetProfile::new(name, shape, classes);
            profile.check_samples(&train)?;
            profile.check_samples(&test)?;
            Ok((profile, train, test))
        }
    }
}

// --- core measurements --------------------------------------------------------

/// Attack success rate: the fraction of (x*, y) pairs the victim misclassifies.
pub fn asr(victim: &Network, adversarials: &[(ImageTensor, usize)]) -> Result<f64> {
    if adversarials.is_empty() {
        return Ok(0.0);
    }
    let mut fooled = 0usize;
    for (x, y) in adversarials {
        if argmax(&victim.forward(x)?) != *y {
            fooled += 1;
        }
    }
    Ok(fooled as f64 / adversarials.len() as f64)
}

/// Exactly `size` victim-correct samples drawn as a seeded subsample of the
/// test split. Errors (reporting availability) when the victim classifies
/// fewer than `size` samples correctly.
pub fn build_pool(victim: &Network, test_data: &[LabeledSample], size: usize, seed: u64) -> Result<Vec<LabeledSample>> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..test_data.len()).collect();
    order.shuffle(&mut crate::rng::rng_for(seed, &[]));
    let mut pool = Vec::with_capacity(size);
    let mut correct_total = 0usize;
    for &i in &order {
        let s = &test_data[i];
        if victim.predict(&s.image)? == s.label {
            correct_total += 1;
            if pool.len() < size {
                pool.push(s.clone());
            }
        }
    }
    if pool.len() < size {
        return Err(Error::PoolExhausted {
            requested: size,
            available: correct_total,
        });
    }
    Ok(pool)
}

// --- strategy resolution ------------------------------------------------------

#[derive(Debug, Clone)]
struct ExploreGroup {
    mode: SamplingMode,
    needs_attack: bool,
    needs_victim: bool,
    needs_aug_scores: bool,
}

#[derive(Debug, Clone)]
enum ResolvedKind {
    Bta,
    Explore { group: usize, selection: SelectionStrategy },
}

#[derive(Debug, Clone)]
struct ResolvedStrategy {
    name: String,
    sampling_label: String,
    kind: ResolvedKind,
}

fn mode_tag(mode: SamplingMode) -> u64 {
    match mode {
        SamplingMode::S1 => 0x51,
        SamplingMode::S2 => 0x52,
        SamplingMode::Noise { epsilon } => 0x4E ^ ((epsilon.to_bits() as u64) << 8),
    }
}

fn resolve_strategies(
    specs: &[StrategySpec],
    default_mode: SamplingMode,
    epsilon: f32,
) -> (Vec<ResolvedStrategy>, Vec<ExploreGroup>) {
    let mut groups: Vec<ExploreGroup> = Vec::new();
    let mut resolved = Vec::new();
    let group_for = |mode: SamplingMode, sel: SelectionStrategy, groups: &mut Vec<ExploreGroup>| -> usize {
        let idx = match groups.iter().position(|g| g.mode == mode) {
            Some(i) => i,
            None => {
                groups.push(ExploreGroup {
                    mode,
                    needs_attack: false,
                    needs_victim: false,
                    needs_aug_scores: false,
                });
                groups.len() - 1
            }
        };
        groups[idx].needs_attack |= sel.needs_attack();
        groups[idx].needs_victim |= sel.needs_victim();
        groups[idx].needs_aug_scores |= sel.needs_augmented_scores();
        idx
    };
    for spec in specs {
        match spec {
            StrategySpec::Bta => resolved.push(ResolvedStrategy {
                name: "bta".to_string(),
                sampling_label: "-".to_string(),
                kind: ResolvedKind::Bta,
            }),
            StrategySpec::Vanilla => {
                let mode = SamplingMode::Noise { epsilon };
                let group = group_for(mode, SelectionStrategy::Top1Adversarial, &mut groups);
                resolved.push(ResolvedStrategy {
                    name: "vanilla".to_string(),
                    sampling_label: "noise".to_string(),
                    kind: ResolvedKind::Explore {
                        group,
                        selection: SelectionStrategy::Top1Adversarial,
                    },
                });
            }
            StrategySpec::Peas { selection, sampling } => {
                let mode = sampling.unwrap_or(default_mode);
                let group = group_for(mode, *selection, &mut groups);
                resolved.push(ResolvedStrategy {
                    name: format!("peas-{}", selection.as_str()),
                    sampling_label: mode.as_str().to_string(),
                    kind: ResolvedKind::Explore {
                        group,
                        selection: *selection,
                    },
                });
            }
        }
    }
    (resolved, groups)
}

// --- pairwise protocol ----------------------------------------------------------

struct SampleOutcome {
    successes: Vec<bool>,
    dumps: Vec<SampleDump>,
}

/// Run every configured strategy over every role pair on victim-correct
/// pools; emits one row per (victim, surrogate, strategy) plus macro/micro
/// aggregates per strategy.
pub fn run_pairwise(env: &ExperimentEnv) -> Result<ExperimentReport> {
    let epsilon = env.epsilon();
    let base = env.base_attack_spec(epsilon)?;
    let (strategies, groups) = resolve_strategies(&env.config.strategies, env.config.sampling, epsilon);
    let roles = enumerate_roles(&env.zoo)?;
    let pools = env.build_pools(env.config.pool_size)?;
    let attack_label = base.algorithm.as_str().to_string();
    let master = env.config.master_seed;

    let mut rows: Vec<ReportRow> = Vec::new();
    let mut all_dumps: Vec<SampleDump> = Vec::new();
    // Per strategy: per-pair ASRs and pooled successes for the aggregates.
    let mut pair_asrs: Vec<Vec<f64>> = vec![Vec::new(); strategies.len()];
    let mut pooled: Vec<Vec<bool>> = vec![Vec::new(); strategies.len()];

    for (pair_idx, role) in roles.iter().enumerate() {
        let victim = env.zoo.network(&role.victim)?;
        let surrogate = env.zoo.network(&role.surrogate)?;
        let ranking: Vec<RankingModel> = role
            .ranking
            .iter()
            .map(|id| {
                Ok(RankingModel {
                    id: id.as_str(),
                    network: env.zoo.network(id)?,
                })
            })
            .collect::<Result<_>>()?;
        let pool = &pools[&role.victim];

        let outcomes: Result<Vec<SampleOutcome>> = pool
            .par_iter()
            .enumerate()
            .map(|(sample_idx, sample)| {
                process_sample(
                    env,
                    pair_idx as u64,
                    sample_idx,
                    sample,
                    victim,
                    surrogate,
                    &ranking,
                    &base,
                    &strategies,
                    &groups,
                    role,
                )
            })
            .collect();
        let outcomes = outcomes?;

        for (s_idx, strategy) in strategies.iter().enumerate() {
            let successes: Vec<bool> = outcomes.iter().map(|o| o.successes[s_idx]).collect();
            let asr = successes.iter().filter(|&&b| b).count() as f64 / successes.len().max(1) as f64;
            let (ci_low, ci_high) = bootstrap_ci(
                &successes,
                BOOTSTRAP_RESAMPLES,
                derive_seed(master, &[NS_CI, pair_idx as u64, s_idx as u64]),
            );
            pair_asrs[s_idx].push(asr);
            pooled[s_idx].extend(successes.iter().copied());
            rows.push(ReportRow {
                dataset: env.profile.name.clone(),
                victim: role.victim.clone(),
                surrogate: role.surrogate.clone(),
                strategy: strategy.name.clone(),
                sampling: strategy.sampling_label.clone(),
                attack: attack_label.clone(),
                epsilon,
                n: strategy_n(strategy, env.config.exploration_n),
                asr,
                ci_low,
                ci_high,
                pool_size: pool.len(),
                seed: master,
            });
        }
        if env.config.candidate_dumps {
            for o in outcomes {
                all_dumps.extend(o.dumps);
            }
        }
    }

    for (s_idx, strategy) in strategies.iter().enumerate() {
        rows.push(aggregate_row(
            env,
            strategy,
            &attack_label,
            epsilon,
            "macro",
            &pair_asrs[s_idx],
            &pooled[s_idx],
            derive_seed(master, &[NS_CI, 0xAAAA, s_idx as u64]),
        ));
        rows.push(aggregate_row(
            env,
            strategy,
            &attack_label,
            epsilon,
            "micro",
            &pair_asrs[s_idx],
            &pooled[s_idx],
            derive_seed(master, &[NS_CI, 0xBBBB, s_idx as u64]),
        ));
    }

    Ok(ExperimentReport {
        kind: "pairwise".to_string(),
        config_hash: env.config.semantic_hash(),
        master_seed: master,
        rows,
        notes: vec![format!("{} role pairs, pool {} per victim", roles.len(), env.config.pool_size)],
        dumps: env.config.candidate_dumps.then_some(all_dumps),
    })
}

fn strategy_n(strategy: &ResolvedStrategy, n: usize) -> usize {
    match strategy.kind {
        ResolvedKind::Bta => 1,
        ResolvedKind::Explore { .. } => n,
    }
}

#[allow(clippy::too_many_arguments)]
fn aggregate_row(
    env: &ExperimentEnv,
    strategy: &ResolvedStrategy,
    attack_label: &str,
    epsilon: f32,
    scope: &str,
    pair_asrs: &[f64],
    pooled: &[bool],
    ci_seed: u64,
) -> ReportRow {
    let (asr, ci_low, ci_high) = if scope == "macro" {
        let mean = pair_asrs.iter().sum::<f64>() / pair_asrs.len().max(1) as f64;
        let (lo, hi) = bootstrap_ci_values(pair_asrs, BOOTSTRAP_RESAMPLES, ci_seed);
        (mean, lo, hi)
    } else {
        let mean = pooled.iter().filter(|&&b| b).count() as f64 / pooled.len().max(1) as f64;
        let (lo, hi) = bootstrap_ci(pooled, BOOTSTRAP_RESAMPLES, ci_seed);
        (mean, lo, hi)
    };
    ReportRow {
        dataset: env.profile.name.clone(),
        victim: scope.to_string(),
        surrogate: "all".to_string(),
        strategy: strategy.name.clone(),
        sampling: strategy.sampling_label.clone(),
        attack: attack_label.to_string(),
        epsilon,
        n: strategy_n(strategy, env.config.exploration_n),
        asr,
        ci_low,
        ci_high,
        pool_size: pooled.len(),
        seed: env.config.master_seed,
    }
}

#[allow(clippy::too_many_arguments)]
fn process_sample(
    env: &ExperimentEnv,
    pair_idx: u64,
    sample_idx: usize,
    sample: &LabeledSample,
    victim: &Network,
    surrogate: &Network,
    ranking: &[RankingModel],
    base: &AttackSpec,
    strategies: &[ResolvedStrategy],
    groups: &[ExploreGroup],
    role: &crate::zoo::RoleAssignment,
) -> Result<SampleOutcome> {
    let master = env.config.master_seed;
    let x = &sample.image;
    let y = sample.label;
    let attack_seed = derive_seed(master, &[NS_ATTACK, pair_idx, sample_idx as u64]);
    let select_seed = derive_seed(master, &[NS_SELECT, pair_idx, sample_idx as u64]);

    // Explore each sampling group once; strategies share the candidates.
    let mut group_candidates = Vec::with_capacity(groups.len());
    for group in groups {
        let sampling_seed = derive_seed(master, &[NS_SAMPLING, mode_tag(group.mode), pair_idx, sample_idx as u64]);
        let sampling = env.sampler(group.mode, sampling_seed)?;
        let candidates = explore_candidates(
            x,
            y,
            &ExploreConfig {
                surrogate,
                ranking,
                sampling: &sampling,
                base_attack: group.needs_attack.then_some(&base.with_seed(attack_seed)).as_ref().copied(),
                n: env.config.exploration_n,
                victim: Some(victim), // victim success is measured below anyway
                score_augmented: group.needs_aug_scores,
            },
        )?;
        group_candidates.push(candidates);
    }

    let mut successes = Vec::with_capacity(strategies.len());
    let mut selected_dumps: Vec<Vec<SelectedDump>> = vec![Vec::new(); groups.len()];
    for strategy in strategies {
        let fooled = match &strategy.kind {
            ResolvedKind::Bta => {
                let result = run_attack(
                    &base.with_seed(attack_seed),
                    &AttackModels::surrogate_only(surrogate),
                    x,
                    y,
                )?;
                argmax(&victim.forward(&result.adversarial)?) != y
            }
            ResolvedKind::Explore { group, selection } => {
                let candidates = &group_candidates[*group];
                let choice = select_candidate(candidates, *selection, select_seed)?;
                let chosen = &candidates[choice.index];
                let fooled = if selection.uses_adversarial() {
                    chosen.fools_victim_adversarially.expect("victim flags requested")
                } else {
                    chosen.fools_victim_naturally.expect("victim flags requested")
                };
                if env.config.candidate_dumps {
                    selected_dumps[*group].push(SelectedDump {
                        strategy: strategy.name.clone(),
                        index: choice.index,
                        used_fallback: choice.used_fallback,
                    });
                }
                fooled
            }
        };
        successes.push(fooled);
    }

    let mut dumps = Vec::new();
    if env.config.candidate_dumps {
        for (g_idx, candidates) in group_candidates.iter().enumerate() {
            dumps.push(SampleDump {
                victim: role.victim.clone(),
                surrogate: role.surrogate.clone(),
                sample: sample_idx,
                label: y,
                sampling: groups[g_idx].mode.as_str().to_string(),
                selected: std::mem::take(&mut selected_dumps[g_idx]),
                candidates: candidates
                    .iter()
                    .map(|c| CandidateDump {
                        index: c.index,
                        et: c.et.value,
                        et_augmented: c.et_augmented.as_ref().map(|e| e.value),
                        l2: c.distance_to_original.l2,
                        linf: c.distance_to_original.linf,
                    })
                    .collect(),
            });
        }
    }

    Ok(SampleOutcome { successes, dumps })
}

// --- sweeps -------------------------------------------------------------------

/// Candidate summaries kept per sample during prefix-reused sweeps.
struct CandidateSummary {
    et: f32,
    fools_adversarially: bool,
}

fn summarize(
    env: &ExperimentEnv,
    mode: SamplingMode,
    n: usize,
    pair_idx: u64,
    sample_idx: usize,
    sample: &LabeledSample,
    victim: &Network,
    surrogate: &Network,
    ranking: &[RankingModel],
    base: &AttackSpec,
) -> Result<Vec<CandidateSummary>> {
    let master = env.config.master_seed;
    let sampling_seed = derive_seed(master, &[NS_SAMPLING, mode_tag(mode), pair_idx, sample_idx as u64]);
    let attack_seed = derive_seed(master, &[NS_ATTACK, pair_idx, sample_idx as u64]);
    let sampling = env.sampler(mode, sampling_seed)?;
    let candidates = explore_candidates(
        &sample.image,
        sample.label,
        &ExploreConfig {
            surrogate,
            ranking,
            sampling: &sampling,
            base_attack: Some(&base.with_seed(attack_seed)),
            n,
            victim: Some(victim),
            score_augmented: false,
        },
    )?;
    Ok(candidates
        .into_iter()
        .map(|c| CandidateSummary {
            et: c.et.value,
            fools_adversarially: c.fools_victim_adversarially.expect("victim flags requested"),
        })
        .collect())
}

/// Success of the ET top-1 choice within the first `n` candidates.
fn prefix_top1(candidates: &[CandidateSummary], n: usize) -> bool {
    let prefix = &candidates[..n.min(candidates.len())];
    let mut best = 0;
    for (i, c) in prefix.iter().enumerate().skip(1) {
        if c.et > prefix[best].et {
            best = i;
        }
    }
    prefix[best].fools_adversarially
}

/// Success of the perfect-ranking oracle within the first `n` candidates.
fn prefix_oracle(candidates: &[CandidateSummary], n: usize) -> bool {
    candidates[..n.min(candidates.len())]
        .iter()
        .any(|c| c.fools_adversarially)
}

/// Effect of the exploration size: ASR(n) for the exploration strategy (ET
/// top-1 and the perfect-ranking oracle) and the noise-ranking baseline,
/// per pair and macro-averaged. Candidate lists are prefix-reused: the
/// results for n are the first n candidates of the largest run.
pub fn sweep_n(env: &ExperimentEnv, n_values: &[usize]) -> Result<ExperimentReport> {
    if n_values.is_empty() || n_values.contains(&0) {
        return Err(Error::InvalidArgument("n grid must be non-empty with n >= 1".to_string()));
    }
    let n_max = *n_values.iter().max().unwrap();
    let epsilon = env.epsilon();
    let base = env.base_attack_spec(epsilon)?;
    let roles = enumerate_roles(&env.zoo)?;
    let pools = env.build_pools(env.config.sweeps.sweep_pool_size)?;
    let master = env.config.master_seed;
    let attack_label = base.algorithm.as_str().to_string();
    let strategy_names = ["peas-top1-adversarial", "peas-oracle-perfect", "vanilla"];
    let sampling_labels = [env.config.sampling.as_str(), env.config.sampling.as_str(), "noise"];

    let mut rows = Vec::new();
    // strategy -> n -> per-pair ASRs
    let mut curves: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n_values.len()]; 3];

    for (pair_idx, role) in roles.iter().enumerate() {
        let victim = env.zoo.network(&role.victim)?;
        let surrogate = env.zoo.network(&role.surrogate)?;
        let ranking: Vec<RankingModel> = role
            .ranking
            .iter()
            .map(|id| {
                Ok(RankingModel {
                    id: id.as_str(),
                    network: env.zoo.network(id)?,
                })
            })
            .collect::<Result<_>>()?;
        let pool = &pools[&role.victim];

        let summaries: Result<Vec<(Vec<CandidateSummary>, Vec<CandidateSummary>)>> = pool
            .par_iter()
            .enumerate()
            .map(|(sample_idx, sample)| {
                let peas = summarize(
                    env,
                    env.config.sampling,
                    n_max,
                    pair_idx as u64,
                    sample_idx,
                    sample,
                    victim,
                    surrogate,
                    &ranking,
                    &base,
                )?;
                let vanilla = summarize(
                    env,
                    SamplingMode::Noise { epsilon },
                    n_max,
                    pair_idx as u64,
                    sample_idx,
                    sample,
                    victim,
                    surrogate,
                    &ranking,
                    &base,
                )?;
                Ok((peas, vanilla))
            })
            .collect();
        let summaries = summaries?;

        for (n_idx, &n) in n_values.iter().enumerate() {
            let per_strategy: [Vec<bool>; 3] = [
                summaries.iter().map(|(p, _)| prefix_top1(p, n)).collect(),
                summaries.iter().map(|(p, _)| prefix_oracle(p, n)).collect(),
                summaries.iter().map(|(_, v)| prefix_top1(v, n)).collect(),
            ];
            for (s_idx, successes) in per_strategy.iter().enumerate() {
                let asr = successes.iter().filter(|&&b| b).count() as f64 / successes.len().max(1) as f64;
                let (ci_low, ci_high) = bootstrap_ci(
                    successes,
                    BOOTSTRAP_RESAMPLES,
                    derive_seed(master, &[NS_CI, pair_idx as u64, n_idx as u64, s_idx as u64]),
                );
                curves[s_idx][n_idx].push(asr);
                rows.push(ReportRow {
                    dataset: env.profile.name.clone(),
                    victim: role.victim.clone(),
                    surrogate: role.surrogate.clone(),
                    strategy: strategy_names[s_idx].to_string(),
                    sampling: sampling_labels[s_idx].to_string(),
                    attack: attack_label.clone(),
                    epsilon,
                    n,
                    asr,
                    ci_low,
                    ci_high,
                    pool_size: pool.len(),
                    seed: master,
                });
            }
        }
    }

    for (s_idx, name) in strategy_names.iter().enumerate() {
        for (n_idx, &n) in n_values.iter().enumerate() {
            let asrs = &curves[s_idx][n_idx];
            let mean = asrs.iter().sum::<f64>() / asrs.len().max(1) as f64;
            let (ci_low, ci_high) = bootstrap_ci_values(
                asrs,
                BOOTSTRAP_RESAMPLES,
                derive_seed(master, &[NS_CI, 0xCCCC, s_idx as u64, n_idx as u64]),
            );
            rows.push(ReportRow {
                dataset: env.profile.name.clone(),
                victim: "macro".to_string(),
                surrogate: "all".to_string(),
                strategy: name.to_string(),
                sampling: sampling_labels[s_idx].to_string(),
                attack: attack_label.clone(),
                epsilon,
                n,
                asr: mean,
                ci_low,
                ci_high,
                pool_size: env.config.sweeps.sweep_pool_size,
                seed: master,
            });
        }
    }

    Ok(ExperimentReport {
        kind: "sweep-n".to_string(),
        config_hash: env.config.semantic_hash(),
        master_seed: master,
        rows,
        notes: vec!["candidate lists are prefix-reused across n values".to_string()],
        dumps: None,
    })
}

/// ASR as a function of the attack budget for the exploration strategy,
/// per pair, per victim (averaged over surrogates), and macro-averaged.
pub fn sweep_epsilon(env: &ExperimentEnv, eps_values: &[f32]) -> Result<ExperimentReport> {
    if eps_values.is_empty() {
        return Err(Error::InvalidArgument("epsilon grid must be non-empty".to_string()));
    }
    let n = env.config.sweeps.eps_n;
    let roles = enumerate_roles(&env.zoo)?;
    let pools = env.build_pools(env.config.sweeps.sweep_pool_size)?;
    let master = env.config.master_seed;

    let mut rows = Vec::new();
    for (e_idx, &epsilon) in eps_values.iter().enumerate() {
        let base = env.base_attack_spec(epsilon)?;
        let attack_label = base.algorithm.as_str().to_string();
        // victim id -> per-pair ASRs at this epsilon
        let mut per_victim: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (pair_idx, role) in roles.iter().enumerate() {
            let victim = env.zoo.network(&role.victim)?;
            let surrogate = env.zoo.network(&role.surrogate)?;
            let ranking: Vec<RankingModel> = role
                .ranking
                .iter()
                .map(|id| {
                    Ok(RankingModel {
                        id: id.as_str(),
                        network: env.zoo.network(id)?,
                    })
                })
                .collect::<Result<_>>()?;
            let pool = &pools[&role.victim];
            let successes: Result<Vec<bool>> = pool
                .par_iter()
                .enumerate()
                .map(|(sample_idx, sample)| {
                    // The epsilon index participates in the seed path so each
                    // budget draws fresh augmentations.
                    let summaries = summarize(
                        env,
                        env.config.sampling,
                        n,
                        derive_seed(pair_idx as u64, &[e_idx as u64]),
                        sample_idx,
                        sample,
                        victim,
                        surrogate,
                        &ranking,
                        &base,
                    )?;
                    Ok(prefix_top1(&summaries, n))
                })
                .collect();
            let successes = successes?;
            let asr = successes.iter().filter(|&&b| b).count() as f64 / successes.len().max(1) as f64;
            let (ci_low, ci_high) = bootstrap_ci(
                &successes,
                BOOTSTRAP_RESAMPLES,
                derive_seed(master, &[NS_CI, e_idx as u64, pair_idx as u64]),
            );
            per_victim.entry(role.victim.clone()).or_default().push(asr);
            rows.push(ReportRow {
                dataset: env.profile.name.clone(),
                victim: role.victim.clone(),
                surrogate: role.surrogate.clone(),
                strategy: "peas-top1-adversarial".to_string(),
                sampling: env.config.sampling.as_str().to_string(),
                attack: attack_label.clone(),
                epsilon,
                n,
                asr,
                ci_low,
                ci_high,
                pool_size: pool.len(),
                seed: master,
            });
        }
        let mut all: Vec<f64> = Vec::new();
        for (victim_id, asrs) in &per_victim {
            let mean = asrs.iter().sum::<f64>() / asrs.len() as f64;
            all.extend(asrs.iter().copied());
            rows.push(ReportRow {
                dataset: env.profile.name.clone(),
                victim: victim_id.clone(),
                surrogate: "avg".to_string(),
                strategy: "peas-top1-adversarial".to_string(),
                sampling: env.config.sampling.as_str().to_string(),
                attack: attack_label.clone(),
                epsilon,
                n,
                asr: mean,
                ci_low: mean,
                ci_high: mean,
                pool_size: env.config.sweeps.sweep_pool_size,
                seed: master,
            });
        }
        let macro_mean = all.iter().sum::<f64>() / all.len().max(1) as f64;
        let (ci_low, ci_high) = bootstrap_ci_values(&all, BOOTSTRAP_RESAMPLES, derive_seed(master, &[NS_CI, 0xDDDD, e_idx as u64]));
        rows.push(ReportRow {
            dataset: env.profile.name.clone(),
            victim: "macro".to_string(),
            surrogate: "all".to_string(),
            strategy: "peas-top1-adversarial".to_string(),
            sampling: env.config.sampling.as_str().to_string(),
            attack: attack_label,
            epsilon,
            n,
            asr: macro_mean,
            ci_low,
            ci_high,
            pool_size: env.config.sweeps.sweep_pool_size,
            seed: master,
        });
    }

    Ok(ExperimentReport {
        kind: "sweep-eps".to_string(),
        config_hash: env.config.semantic_hash(),
        master_seed: master,
        rows,
        notes: vec![],
        dumps: None,
    })
}

/// Per-augmentation effectiveness: the exploration strategy restricted to a
/// single augmentation kind (one-augmentation sampling over a singleton
/// set), across the exploration-size grid.
pub fn augmentation_effectiveness(env: &ExperimentEnv) -> Result<ExperimentReport> {
    let kinds: Vec<AugmentationKind> = env
        .config
        .sweeps
        .aug_kinds
        .clone()
        .unwrap_or_else(|| AugmentationKind::ALL.to_vec());
    if kinds.is_empty() {
        return Err(Error::InvalidArgument("augmentation grid must be non-empty".to_string()));
    }
    let n_values = env.config.sweeps.aug_n_values.clone();
    if n_values.is_empty() || n_values.contains(&0) {
        return Err(Error::InvalidArgument("aug_n_values must be non-empty with n >= 1".to_string()));
    }
    let n_max = *n_values.iter().max().unwrap();
    let epsilon = env.epsilon();
    let base = env.base_attack_spec(epsilon)?;
    let roles = enumerate_roles(&env.zoo)?;
    let pools = env.build_pools(env.config.sweeps.sweep_pool_size)?;
    let master = env.config.master_seed;
    let attack_label = base.algorithm.as_str().to_string();

    let mut rows = Vec::new();
    for (k_idx, kind) in kinds.iter().enumerate() {
        let label = format!("s1:{}", kind.as_str());
        let mut curves: Vec<Vec<f64>> = vec![Vec::new(); n_values.len()];
        for (pair_idx, role) in roles.iter().enumerate() {
            let victim = env.zoo.network(&role.victim)?;
            let surrogate = env.zoo.network(&role.surrogate)?;
            let ranking: Vec<RankingModel> = role
                .ranking
                .iter()
                .map(|id| {
                    Ok(RankingModel {
                        id: id.as_str(),
                        network: env.zoo.network(id)?,
                    })
                })
                .collect::<Result<_>>()?;
            let pool = &pools[&role.victim];
            let summaries: Result<Vec<Vec<CandidateSummary>>> = pool
                .par_iter()
                .enumerate()
                .map(|(sample_idx, sample)| {
                    let sampling_seed = derive_seed(
                        master,
                        &[NS_SAMPLING, 0xA6A6 + k_idx as u64, pair_idx as u64, sample_idx as u64],
                    );
                    let attack_seed = derive_seed(master, &[NS_ATTACK, pair_idx as u64, sample_idx as u64]);
                    let sampling = SamplingFunction::new(SamplingMode::S1, AugmentPreset::for_preset(env.profile.preset), sampling_seed)
                        .with_set(&[*kind])?;
                    let candidates = explore_candidates(
                        &sample.image,
                        sample.label,
                        &ExploreConfig {
                            surrogate,
                            ranking: &ranking,
                            sampling: &sampling,
                            base_attack: Some(&base.with_seed(attack_seed)),
                            n: n_max,
                            victim: Some(victim),
                            score_augmented: false,
                        },
                    )?;
                    Ok(candidates
                        .into_iter()
                        .map(|c| CandidateSummary {
                            et: c.et.value,
                            fools_adversarially: c.fools_victim_adversarially.expect("victim flags requested"),
                        })
                        .collect())
                })
                .collect();
            let summaries = summaries?;
            for (n_idx, &n) in n_values.iter().enumerate() {
                let successes: Vec<bool> = summaries.iter().map(|s| prefix_top1(s, n)).collect();
                let asr = successes.iter().filter(|&&b| b).count() as f64 / successes.len().max(1) as f64;
                let (ci_low, ci_high) = bootstrap_ci(
                    &successes,
                    BOOTSTRAP_RESAMPLES,
                    derive_seed(master, &[NS_CI, k_idx as u64, pair_idx as u64, n_idx as u64]),
                );
                curves[n_idx].push(asr);
                rows.push(ReportRow {
                    dataset: env.profile.name.clone(),
                    victim: role.victim.clone(),
                    surrogate: role.surrogate.clone(),
                    strategy: "peas-top1-adversarial".to_string(),
                    sampling: label.clone(),
                    attack: attack_label.clone(),
                    epsilon,
                    n,
                    asr,
                    ci_low,
                    ci_high,
                    pool_size: pool.len(),
                    seed: master,
                });
            }
        }
        for (n_idx, &n) in n_values.iter().enumerate() {
            let asrs = &curves[n_idx];
            let mean = asrs.iter().sum::<f64>() / asrs.len().max(1) as f64;
            let (ci_low, ci_high) = bootstrap_ci_values(
                asrs,
                BOOTSTRAP_RESAMPLES,
                derive_seed(master, &[NS_CI, 0xEEEE, k_idx as u64, n_idx as u64]),
            );
            rows.push(ReportRow {
                dataset: env.profile.name.clone(),
                victim: "macro".to_string(),
                surrogate: "all".to_string(),
                strategy: "peas-top1-adversarial".to_string(),
                sampling: label.clone(),
                attack: attack_label.clone(),
                epsilon,
                n,
                asr: mean,
                ci_low,
                ci_high,
                pool_size: env.config.sweeps.sweep_pool_size,
                seed: master,
            });
        }
    }

    Ok(ExperimentReport {
        kind: "sweep-aug".to_string(),
        config_hash: env.config.semantic_hash(),
        master_seed: master,
        rows,
        notes: vec!["candidate lists are prefix-reused across n values".to_string()],
        dumps: None,
    })
}
