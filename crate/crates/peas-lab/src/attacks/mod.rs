//! Base adversarial attacks behind one interface.
//!
//! Transfer attacks (FGSM, PGD, translation-invariant momentum FGSM) need
//! gradient access to a surrogate; SimBA queries a victim for softmax
//! probabilities only; `external` shells out to a user-provided command via a
//! file protocol. Every attack keeps its output inside the L-inf ball of
//! radius epsilon around its start point and inside [0, 1] after every
//! iteration.

mod external;
mod simba;
mod transfer;

pub use external::{attack_external, ExternalAttackConfig};
pub use simba::{attack_simba, attack_simba_with_oracle, VictimOracle};
pub use transfer::{attack_fgsm, attack_pgd, attack_timi};

use crate::data::PresetId;
use crate::error::{Error, Result};
use crate::nn::Network;
use crate::tensor::ImageTensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackAlgorithm {
    Fgsm,
    Pgd,
    Timi,
    Simba,
    External,
}

impl AttackAlgorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackAlgorithm::Fgsm => "fgsm",
            AttackAlgorithm::Pgd => "pgd",
            AttackAlgorithm::Timi => "timi",
            AttackAlgorithm::Simba => "simba",
            AttackAlgorithm::External => "external",
        }
    }

    /// Transfer attacks craft on a surrogate and never touch the victim.
    pub fn is_transfer(self) -> bool {
        matches!(self, AttackAlgorithm::Fgsm | AttackAlgorithm::Pgd | AttackAlgorithm::Timi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimiParams {
    /// Width of the Gaussian kernel convolved with the gradient (odd; 1
    /// disables smoothing).
    pub kernel_size: usize,
    /// Probability of the random resize-pad transform per step.
    pub diversity_prob: f32,
    /// Momentum decay; 0 reduces to plain iterative FGSM.
    pub momentum: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimbaParams {
    pub max_queries: usize,
    /// Per-pixel probe magnitude.
    pub step: f32,
}

/// A base attack plus its budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub algorithm: AttackAlgorithm,
    /// L-inf budget in [0, 1].
    pub epsilon: f32,
    pub steps: usize,
    pub step_size: f32,
    pub timi: TimiParams,
    pub simba: SimbaParams,
    pub seed: u64,
}

impl AttackSpec {
    /// PGD with the crate defaults: 10 steps of epsilon/4.
    pub fn pgd(epsilon: f32) -> Self {
        AttackSpec {
            algorithm: AttackAlgorithm::Pgd,
            epsilon,
            steps: 10,
            step_size: epsilon / 4.0,
            timi: TimiParams {
                kernel_size: 3,
                diversity_prob: 0.5,
                momentum: 1.0,
            },
            simba: SimbaParams {
                max_queries: 1000,
                step: epsilon,
            },
            seed: 0,
        }
    }

    pub fn fgsm(epsilon: f32) -> Self {
        AttackSpec {
            algorithm: AttackAlgorithm::Fgsm,
            steps: 1,
            step_size: epsilon,
            ..AttackSpec::pgd(epsilon)
        }
    }

    pub fn timi(epsilon: f32, preset: PresetId) -> Self {
        let kernel = match preset {
            PresetId::HighRes => 5,
            PresetId::LowRes => 3,
        };
        let mut spec = AttackSpec::pgd(epsilon);
        spec.algorithm = AttackAlgorithm::Timi;
        spec.timi.kernel_size = kernel;
        spec
    }

    pub fn simba(epsilon: f32, max_queries: usize) -> Self {
        let mut spec = AttackSpec::pgd(epsilon);
        spec.algorithm = AttackAlgorithm::Simba;
        spec.simba = SimbaParams {
            max_queries,
            step: epsilon,
        };
        spec
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f32) -> Self {
        let rescale = self.step_size / self.epsilon.max(f32::MIN_POSITIVE);
        self.epsilon = epsilon;
        self.step_size = if self.epsilon > 0.0 { epsilon * rescale } else { 0.0 };
        self.simba.step = epsilon;
        self
    }

    /// Default L-inf budget per dataset preset: 2/255 low-res, 12.75/255
    /// high-res.
    pub fn default_epsilon(preset: PresetId) -> f32 {
        match preset {
            PresetId::HighRes => 12.75 / 255.0,
            PresetId::LowRes => 2.0 / 255.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        match self.algorithm {
            AttackAlgorithm::Pgd | AttackAlgorithm::Timi => {
                if self.steps < 1 {
                    return Err(Error::InvalidArgument("iterative attacks need steps >= 1".to_string()));
                }
                if self.epsilon > 0.0 && !(self.step_size > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "step_size must be positive, got {}",
                        self.step_size
                    )));
                }
                if self.algorithm == AttackAlgorithm::Timi && self.timi.kernel_size % 2 == 0 {
                    return Err(Error::InvalidArgument("timi kernel size must be odd".to_string()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Attack output with exact victim-query accounting.
#[derive(Debug, Clone)]
pub struct AttackResult {
    pub adversarial: ImageTensor,
    /// Victim-model probability evaluations spent (0 for pure transfer
    /// attacks).
    pub queries_used: usize,
    /// Whether the model the attack was crafted on misclassifies the output.
    pub success_on_source: bool,
}

impl AttackResult {
    /// Re-validate the budget invariants (used when ingesting images from
    /// outside, e.g. the external-attack protocol).
    pub fn validate_budget(&self, start: &ImageTensor, epsilon: f32) -> Result<()> {
        if !self.adversarial.is_finite() {
            return Err(Error::NonFinite("adversarial image".to_string()));
        }
        if !self.adversarial.in_unit_range() {
            return Err(Error::InvalidArgument(
                "adversarial image leaves [0, 1]".to_string(),
            ));
        }
        let linf = self.adversarial.linf_distance(start);
        if linf > epsilon + 1e-6 {
            return Err(Error::BudgetViolation {
                linf: linf as f64,
                epsilon: epsilon as f64,
            });
        }
        Ok(())
    }
}

/// Models an attack may touch. Transfer attacks use `surrogate`; query
/// attacks use `victim` (softmax probabilities only).
#[derive(Clone, Copy)]
pub struct AttackModels<'a> {
    pub surrogate: Option<&'a Network>,
    pub victim: Option<&'a Network>,
    pub external: Option<&'a ExternalAttackConfig>,
}

impl<'a> AttackModels<'a> {
    pub fn surrogate_only(net: &'a Network) -> Self {
        AttackModels {
            surrogate: Some(net),
            victim: None,
            external: None,
        }
    }
}

/// Dispatch an attack per its spec.
pub fn run_attack(spec: &AttackSpec, models: &AttackModels, start: &ImageTensor, y: usize) -> Result<AttackResult> {
    spec.validate()?;
    let missing = |what: &str| Error::InvalidArgument(format!("{} attack requires {what}", spec.algorithm.as_str()));
    match spec.algorithm {
        AttackAlgorithm::Fgsm => attack_fgsm(models.surrogate.ok_or_else(|| missing("a surrogate"))?, start, y, spec),
        AttackAlgorithm::Pgd => attack_pgd(models.surrogate.ok_or_else(|| missing("a surrogate"))?, start, y, spec),
        AttackAlgorithm::Timi => attack_timi(models.surrogate.ok_or_else(|| missing("a surrogate"))?, start, y, spec),
        AttackAlgorithm::Simba => attack_simba(models.victim.ok_or_else(|| missing("a victim oracle"))?, start, y, spec),
        AttackAlgorithm::External => {
            attack_external(models.external.ok_or_else(|| missing("an external command"))?, start, y, spec)
        }
    }
}

/// Clamp `x` into the L-inf ball around `start` intersected with [0, 1].
pub(crate) fn project_ball(x: &mut ImageTensor, start: &ImageTensor, epsilon: f32) {
    for (v, &s) in x.data_mut().iter_mut().zip(start.data()) {
        *v = v.clamp(s - epsilon, s + epsilon).clamp(0.0, 1.0);
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::nn::Layer;

    pub(crate) fn tiny_net(seed: u64) -> Network {
        use crate::rng::rng_for;
        use rand::Rng;
        let mut rng = rng_for(seed, &[0xBEEF]);
        let mut w = |n: usize, fan_in: usize| -> Vec<f32> {
            let lim = (6.0 / fan_in as f32).sqrt();
            (0..n).map(|_| rng.gen_range(-lim..lim)).collect()
        };
        Network::new(
            "tiny",
            (2, 6, 6),
            vec![
                Layer::Conv2d {
                    weight: w(4 * 2 * 3 * 3, 18),
                    bias: vec![0.0; 4],
                    out_channels: 4,
                    in_channels: 2,
                    kernel: 3,
                    padding: 1,
                },
                Layer::Relu,
                Layer::MaxPool2,
                Layer::Flatten,
                Layer::Dense {
                    weight: w(3 * 36, 36),
                    bias: vec![0.0; 3],
                    out_dim: 3,
                    in_dim: 36,
                },
            ],
        )
        .unwrap()
    }

    pub(crate) fn random_image(seed: u64, shape: (usize, usize, usize)) -> ImageTensor {
        use crate::rng::rng_for;
        use rand::Rng;
        let mut rng = rng_for(seed, &[0xF00D]);
        let n = shape.0 * shape.1 * shape.2;
        ImageTensor::new(shape, (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn dispatch_requires_matching_model() {
        let net = tiny_net(0);
        let x = random_image(1, (2, 6, 6));
        let spec = AttackSpec::simba(0.05, 10);
        let err = run_attack(&spec, &AttackModels::surrogate_only(&net), &x, 0).unwrap_err();
        assert!(err.to_string().contains("victim"));
    }

    #[test]
    fn budget_validation_catches_violations() {
        let start = ImageTensor::constant((1, 2, 2), 0.5);
        let result = AttackResult {
            adversarial: ImageTensor::constant((1, 2, 2), 0.9),
            queries_used: 0,
            success_on_source: false,
        };
        assert!(matches!(
            result.validate_budget(&start, 0.1),
            Err(Error::BudgetViolation { .. })
        ));
        assert!(result.validate_budget(&start, 0.5).is_ok());
    }

    #[test]
    fn spec_validation() {
        assert!(AttackSpec::pgd(2.0).validate().is_err());
        let mut s = AttackSpec::pgd(0.05);
        s.steps = 0;
        assert!(s.validate().is_err());
        assert!(AttackSpec::pgd(0.05).validate().is_ok());
        // Zero-budget attacks are legal (identity).
        assert!(AttackSpec::pgd(0.0).validate().is_ok());
    }

    #[test]
    fn epsilon_rescale_keeps_step_fraction() {
        let spec = AttackSpec::pgd(0.04).with_epsilon(0.08);
        assert!((spec.step_size - 0.02).abs() < 1e-7);
        assert_eq!(spec.epsilon, 0.08);
    }
}
