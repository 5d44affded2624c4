//! SimBA over the pixel basis: probe random pixel directions, keep a step
//! whenever the victim's probability of the true class drops, stop at
//! misclassification or query exhaustion. The oracle exposes softmax
//! probabilities only and counts every evaluation.

use super::{AttackResult, AttackSpec};
use crate::error::Result;
use crate::nn::{argmax, softmax, Network};
use crate::rng::rng_for;
use crate::tensor::ImageTensor;
use rand::seq::SliceRandom;

/// Query-only handle on the victim: softmax probabilities, no gradients.
/// One probability evaluation = one query.
pub struct VictimOracle<'a> {
    net: &'a Network,
    queries: usize,
}

impl<'a> VictimOracle<'a> {
    pub fn new(net: &'a Network) -> Self {
        VictimOracle { net, queries: 0 }
    }

    pub fn probs(&mut self, x: &ImageTensor) -> Result<Vec<f32>> {
        self.queries += 1;
        softmax(&self.net.forward(x)?)
    }

    pub fn queries_used(&self) -> usize {
        self.queries
    }
}

/// SimBA from `start` against `victim`, budgeted by `spec.simba.max_queries`.
pub fn attack_simba(victim: &Network, start: &ImageTensor, y: usize, spec: &AttackSpec) -> Result<AttackResult> {
    let mut oracle = VictimOracle::new(victim);
    attack_simba_with_oracle(&mut oracle, start, y, spec, None)
}

/// SimBA continuing on an existing oracle (so callers that already spent
/// queries keep exact accounting). `initial_probs` carries the known
/// probabilities of `start` when the caller has already queried it.
pub fn attack_simba_with_oracle(
    oracle: &mut VictimOracle,
    start: &ImageTensor,
    y: usize,
    spec: &AttackSpec,
    initial_probs: Option<&[f32]>,
) -> Result<AttackResult> {
    spec.validate()?;
    start.expect_displayable("simba start")?;
    let budget = spec.simba.max_queries;
    let spent_before = oracle.queries_used();
    let queries_spent = |o: &VictimOracle| o.queries_used() - spent_before;

    if budget == 0 && initial_probs.is_none() {
        return Ok(AttackResult {
            adversarial: start.clone(),
            queries_used: 0,
            success_on_source: false,
        });
    }

    let probs = match initial_probs {
        Some(p) => p.to_vec(),
        None => oracle.probs(start)?,
    };
    let mut best_p = probs[y];
    if argmax(&probs) != y {
        return Ok(AttackResult {
            adversarial: start.clone(),
            queries_used: queries_spent(oracle),
            success_on_source: true,
        });
    }

    let mut x = start.clone();
    let mut order: Vec<usize> = (0..start.len()).collect();
    order.shuffle(&mut rng_for(spec.seed, &[0x51BA]));

    let step = spec.simba.step.min(spec.epsilon);
    'outer: for &pixel in &order {
        for dir in [step, -step] {
            if queries_spent(oracle) >= budget {
                break 'outer;
            }
            let base = start.data()[pixel];
            let current = x.data()[pixel];
            let proposed = (current + dir).clamp(base - spec.epsilon, base + spec.epsilon).clamp(0.0, 1.0);
            if proposed == current {
                continue; // no movement, nothing to evaluate
            }
            let mut candidate = x.clone();
            candidate.data_mut()[pixel] = proposed;
            let p = oracle.probs(&candidate)?;
            if p[y] < best_p {
                best_p = p[y];
                x = candidate;
                if argmax(&p) != y {
                    return Ok(AttackResult {
                        adversarial: x,
                        queries_used: queries_spent(oracle),
                        success_on_source: true,
                    });
                }
                break; // accepted this direction; move to the next pixel
            }
        }
    }

    Ok(AttackResult {
        adversarial: x,
        queries_used: queries_spent(oracle),
        success_on_source: false,
    })
}
