//! The perceptual exploration attack strategy: generate perceptually
//! equivalent variants of an input, attack each on the surrogate, score every
//! result with the expected-transferability metric over a set of ranking
//! models, and keep the highest-scoring candidate.
//!
//! The ablation selection strategies (random picks, augmented-only picks,
//! victim-filtered picks, the perfect-ranking oracle) all share the same
//! exploration stage and differ only in how the final candidate is chosen.

use crate::attacks::{
    attack_simba_with_oracle, run_attack, AttackAlgorithm, AttackModels, AttackResult, AttackSpec, VictimOracle,
};
use crate::augment::{perceptual_distance, PerceptualDistance, SamplingFunction};
use crate::error::{Error, Result};
use crate::nn::{argmax, class_probability, Network};
use crate::rng::{derive_seed, rng_for};
use crate::tensor::ImageTensor;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One member of the ranking set F (never the surrogate or the victim).
#[derive(Clone, Copy)]
pub struct RankingModel<'a> {
    pub id: &'a str,
    pub network: &'a Network,
}

/// Expected transferability: mean over the ranking set of 1 - sigma_y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtScore {
    pub value: f32,
    /// Per-model terms (model id, 1 - sigma_y).
    pub per_model: Vec<(String, f32)>,
}

/// Mean of 1 - sigma_y(f(x)) over the ranking set. Errors on an empty set.
pub fn expected_transferability(x: &ImageTensor, y: usize, ranking: &[RankingModel]) -> Result<EtScore> {
    if ranking.is_empty() {
        return Err(Error::EmptyRankingSet);
    }
    let mut per_model = Vec::with_capacity(ranking.len());
    let mut sum = 0.0f64;
    for model in ranking {
        let term = 1.0 - class_probability(&model.network.forward(x)?, y)?;
        per_model.push((model.id.to_string(), term));
        sum += term as f64;
    }
    Ok(EtScore {
        value: (sum / ranking.len() as f64) as f32,
        per_model,
    })
}

/// One explored variant with its attack output and scores.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub index: usize,
    /// The perceptually equivalent start point x_i.
    pub augmented: ImageTensor,
    /// The attacked sample x'_i (equal to `augmented` when the strategy
    /// skips the attack stage).
    pub adversarial: ImageTensor,
    /// ET of `adversarial`.
    pub et: EtScore,
    /// ET of `augmented`, when requested for augmented-only selection.
    pub et_augmented: Option<EtScore>,
    /// Distance of the start point from the original input.
    pub distance_to_original: PerceptualDistance,
    /// Analysis-only victim signals, present when a victim was provided.
    pub fools_victim_naturally: Option<bool>,
    pub fools_victim_adversarially: Option<bool>,
}

/// How the final candidate is picked from the explored set. Oracle and
/// filtered kinds require victim access and are analysis-only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionStrategy {
    Top1Adversarial,
    Top1Augmented,
    RandomAugmented,
    RandomAdversarial,
    OraclePerfect,
    FilteredTop1Adversarial,
    FilteredTop1Augmented,
}

impl SelectionStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionStrategy::Top1Adversarial => "top1-adversarial",
            SelectionStrategy::Top1Augmented => "top1-augmented",
            SelectionStrategy::RandomAugmented => "random-augmented",
            SelectionStrategy::RandomAdversarial => "random-adversarial",
            SelectionStrategy::OraclePerfect => "oracle-perfect",
            SelectionStrategy::FilteredTop1Adversarial => "filtered-top1-adversarial",
            SelectionStrategy::FilteredTop1Augmented => "filtered-top1-augmented",
        }
    }

    /// Whether the attacked image (rather than the bare augmentation) is the
    /// strategy's output.
    pub fn uses_adversarial(self) -> bool {
        !matches!(
            self,
            SelectionStrategy::Top1Augmented
                | SelectionStrategy::RandomAugmented
                | SelectionStrategy::FilteredTop1Augmented
        )
    }

    /// Whether the attack stage runs at all.
    pub fn needs_attack(self) -> bool {
        self.uses_adversarial()
    }

    pub fn needs_augmented_scores(self) -> bool {
        matches!(
            self,
            SelectionStrategy::Top1Augmented | SelectionStrategy::FilteredTop1Augmented
        )
    }

    pub fn needs_victim(self) -> bool {
        matches!(
            self,
            SelectionStrategy::OraclePerfect
                | SelectionStrategy::FilteredTop1Adversarial
                | SelectionStrategy::FilteredTop1Augmented
        )
    }
}

/// Exploration stage parameters.
pub struct ExploreConfig<'a> {
    pub surrogate: &'a Network,
    pub ranking: &'a [RankingModel<'a>],
    pub sampling: &'a SamplingFunction,
    /// `None` skips the attack stage (augmented-only strategies).
    pub base_attack: Option<&'a AttackSpec>,
    pub n: usize,
    /// Analysis-only victim access; fills the `fools_victim_*` flags.
    pub victim: Option<&'a Network>,
    /// Score the un-attacked augmentation too.
    pub score_augmented: bool,
}

/// Generate, attack, and score `n` candidates. Candidate `i` depends only on
/// the sampler seed, the attack seed, and `i`, so the pipeline may run on any
/// number of workers without changing results.
pub fn explore_candidates(x: &ImageTensor, y: usize, cfg: &ExploreConfig) -> Result<Vec<Candidate>> {
    if cfg.n == 0 {
        return Err(Error::InvalidArgument("exploration size n must be >= 1".to_string()));
    }
    if let Some(spec) = cfg.base_attack {
        if !spec.algorithm.is_transfer() {
            return Err(Error::InvalidArgument(format!(
                "exploration uses transfer attacks only; {} queries the victim (run it after selection instead)",
                spec.algorithm.as_str()
            )));
        }
    }
    (0..cfg.n)
        .into_par_iter()
        .map(|i| {
            let augmented = cfg.sampling.sample_at(x, i as u64)?;
            let adversarial = match cfg.base_attack {
                Some(spec) => {
                    let per_candidate = spec.with_seed(derive_seed(spec.seed, &[0xA77C, i as u64]));
                    run_attack(
                        &per_candidate,
                        &AttackModels::surrogate_only(cfg.surrogate),
                        &augmented,
                        y,
                    )?
                    .adversarial
                }
                None => augmented.clone(),
            };
            let et = expected_transferability(&adversarial, y, cfg.ranking)?;
            let et_augmented = if cfg.score_augmented {
                Some(expected_transferability(&augmented, y, cfg.ranking)?)
            } else {
                None
            };
            let (fools_nat, fools_adv) = match cfg.victim {
                Some(victim) => (
                    Some(argmax(&victim.forward(&augmented)?) != y),
                    Some(argmax(&victim.forward(&adversarial)?) != y),
                ),
                None => (None, None),
            };
            Ok(Candidate {
                index: i,
                distance_to_original: perceptual_distance(&augmented, x)?,
                augmented,
                adversarial,
                et,
                et_augmented,
                fools_victim_naturally: fools_nat,
                fools_victim_adversarially: fools_adv,
            })
        })
        .collect()
}

/// Outcome of the selection stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub index: usize,
    /// Set when filtering removed every candidate and the unfiltered top-1
    /// was returned instead.
    pub used_fallback: bool,
}

fn argmax_et(candidates: &[Candidate], key: impl Fn(&Candidate) -> f32) -> usize {
    // Strict comparison keeps the lowest index on ties.
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        if key(c) > key(&candidates[best]) {
            best = i;
        }
    }
    candidates[best].index
}

fn et_aug_value(c: &Candidate) -> Result<f32> {
    c.et_augmented
        .as_ref()
        .map(|e| e.value)
        .ok_or_else(|| Error::InvalidArgument("strategy needs augmented ET scores; explore with score_augmented".to_string()))
}

/// Pick the final candidate per the strategy. `seed` drives the random
/// strategies; ties always break toward the lowest candidate index.
pub fn select_candidate(candidates: &[Candidate], strategy: SelectionStrategy, seed: u64) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidates to select from".to_string()));
    }
    let no_fallback = |index: usize| Selection {
        index,
        used_fallback: false,
    };
    match strategy {
        SelectionStrategy::Top1Adversarial => Ok(no_fallback(argmax_et(candidates, |c| c.et.value))),
        SelectionStrategy::Top1Augmented => {
            for c in candidates {
                et_aug_value(c)?;
            }
            Ok(no_fallback(argmax_et(candidates, |c| {
                c.et_augmented.as_ref().expect("checked above").value
            })))
        }
        SelectionStrategy::RandomAugmented | SelectionStrategy::RandomAdversarial => {
            let tag = if strategy == SelectionStrategy::RandomAugmented { 1 } else { 2 };
            let mut rng = rng_for(seed, &[0x5E1E, tag]);
            Ok(no_fallback(candidates[rng.gen_range(0..candidates.len())].index))
        }
        SelectionStrategy::OraclePerfect => {
            let winners: Vec<&Candidate> = candidates
                .iter()
                .filter(|c| {
                    c.fools_victim_adversarially
                        .expect("oracle strategy requires victim flags")
                })
                .collect();
            if winners.is_empty() {
                Ok(no_fallback(argmax_et(candidates, |c| c.et.value)))
            } else {
                let mut best = winners[0];
                for c in &winners[1..] {
                    if c.et.value > best.et.value {
                        best = c;
                    }
                }
                Ok(no_fallback(best.index))
            }
        }
        SelectionStrategy::FilteredTop1Adversarial | SelectionStrategy::FilteredTop1Augmented => {
            let kept: Vec<Candidate> = candidates
                .iter()
                .filter(|c| {
                    !c.fools_victim_naturally
                        .expect("filtered strategies require victim flags")
                })
                .cloned()
                .collect();
            let rank_augmented = strategy == SelectionStrategy::FilteredTop1Augmented;
            if kept.is_empty() {
                // Every augmentation already fools the victim: fall back to
                // the unfiltered top-1 and flag it.
                let index = if rank_augmented {
                    for c in candidates {
                        et_aug_value(c)?;
                    }
                    argmax_et(candidates, |c| c.et_augmented.as_ref().expect("checked").value)
                } else {
                    argmax_et(candidates, |c| c.et.value)
                };
                Ok(Selection {
                    index,
                    used_fallback: true,
                })
            } else {
                let index = if rank_augmented {
                    for c in &kept {
                        et_aug_value(c)?;
                    }
                    argmax_et(&kept, |c| c.et_augmented.as_ref().expect("checked").value)
                } else {
                    argmax_et(&kept, |c| c.et.value)
                };
                Ok(no_fallback(index))
            }
        }
    }
}

/// Stable descending-ET view of the candidates (ties keep input order).
pub fn rank_candidates(candidates: &[Candidate]) -> Vec<&Candidate> {
    let mut refs: Vec<&Candidate> = candidates.iter().collect();
    refs.sort_by(|a, b| b.et.value.total_cmp(&a.et.value));
    refs
}

/// Full strategy output: the chosen candidate index plus the explored set.
#[derive(Debug)]
pub struct PeasOutcome {
    pub strategy: SelectionStrategy,
    pub selected: usize,
    pub used_fallback: bool,
    pub candidates: Vec<Candidate>,
}

impl PeasOutcome {
    pub fn selected_candidate(&self) -> &Candidate {
        self.candidates
            .iter()
            .find(|c| c.index == self.selected)
            .expect("selected index comes from the candidate list")
    }

    /// The image the attack hands to the victim.
    pub fn selected_image(&self) -> &ImageTensor {
        let c = self.selected_candidate();
        if self.strategy.uses_adversarial() {
            &c.adversarial
        } else {
            &c.augmented
        }
    }
}

pub struct PeasConfig<'a> {
    pub surrogate: &'a Network,
    pub ranking: &'a [RankingModel<'a>],
    pub sampling: &'a SamplingFunction,
    pub base_attack: &'a AttackSpec,
    pub n: usize,
    pub strategy: SelectionStrategy,
    /// Required by oracle/filtered strategies; never queried otherwise.
    pub victim: Option<&'a Network>,
    pub selection_seed: u64,
}

/// Explore n candidates and select one per the strategy.
pub fn peas_attack(x: &ImageTensor, y: usize, cfg: &PeasConfig) -> Result<PeasOutcome> {
    if cfg.strategy.needs_victim() && cfg.victim.is_none() {
        return Err(Error::InvalidArgument(format!(
            "selection strategy {} requires victim access",
            cfg.strategy.as_str()
        )));
    }
    let candidates = explore_candidates(
        x,
        y,
        &ExploreConfig {
            surrogate: cfg.surrogate,
            ranking: cfg.ranking,
            sampling: cfg.sampling,
            base_attack: cfg.strategy.needs_attack().then_some(cfg.base_attack),
            n: cfg.n,
            victim: cfg.strategy.needs_victim().then_some(cfg.victim).flatten(),
            score_augmented: cfg.strategy.needs_augmented_scores(),
        },
    )?;
    let selection = select_candidate(&candidates, cfg.strategy, cfg.selection_seed)?;
    Ok(PeasOutcome {
        strategy: cfg.strategy,
        selected: selection.index,
        used_fallback: selection.used_fallback,
        candidates,
    })
}

/// Exploration first, queries second: run the strategy with a PGD base to
/// obtain x*, then hand x* to the query attack. No victim queries are spent
/// during exploration; one confirmation query checks whether x* already
/// fools the victim before the query attack launches.
pub fn peas_then_query(
    x: &ImageTensor,
    y: usize,
    surrogate: &Network,
    ranking: &[RankingModel],
    sampling: &SamplingFunction,
    n: usize,
    query_attack: &AttackSpec,
    victim: &Network,
) -> Result<AttackResult> {
    if query_attack.algorithm != AttackAlgorithm::Simba {
        return Err(Error::InvalidArgument(format!(
            "query stage supports simba, got {}",
            query_attack.algorithm.as_str()
        )));
    }
    let base = AttackSpec::pgd(query_attack.epsilon).with_seed(query_attack.seed);
    let outcome = peas_attack(
        x,
        y,
        &PeasConfig {
            surrogate,
            ranking,
            sampling,
            base_attack: &base,
            n,
            strategy: SelectionStrategy::Top1Adversarial,
            victim: None,
            selection_seed: query_attack.seed,
        },
    )?;
    let start = outcome.selected_image().clone();

    if query_attack.simba.max_queries == 0 {
        return Ok(AttackResult {
            adversarial: start,
            queries_used: 0,
            success_on_source: false,
        });
    }

    let mut oracle = VictimOracle::new(victim);
    let probs = oracle.probs(&start)?;
    if argmax(&probs) != y {
        return Ok(AttackResult {
            adversarial: start,
            queries_used: oracle.queries_used(),
            success_on_source: true,
        });
    }
    let mut remaining = *query_attack;
    remaining.simba.max_queries = query_attack.simba.max_queries - 1;
    let mut result = attack_simba_with_oracle(&mut oracle, &start, y, &remaining, Some(&probs))?;
    result.queries_used = oracle.queries_used();
    Ok(result)
}
