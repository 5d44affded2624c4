//! Desk-scale laboratory for perceptual-exploration attacks on image
//! classifiers.
//!
//! The crate bundles everything needed to study transfer-based black-box
//! attacks end to end on a single machine:
//!
//! - [`tensor`] / [`nn`] — a small CHW tensor type and a feed-forward network
//!   engine with analytic input and parameter gradients;
//! - [`data`] / [`zoo`] — dataset loading (CIFAR-10 binary, IDX, raw tensor
//!   dirs), a deterministic synthetic generator, and a five-architecture
//!   model zoo with checkpointing;
//! - [`augment`] — subtle image augmentations, the sampling functions that
//!   generate perceptually equivalent variants, and L2/L-inf measurement;
//! - [`attacks`] — FGSM / PGD / translation-invariant momentum FGSM / SimBA
//!   behind one interface, plus a file protocol for external attacks;
//! - [`peas`] — the perceptual exploration strategy: explore, attack, rank by
//!   expected transferability, select;
//! - [`harness`] — the experiment protocol (role pairs, pools, baselines,
//!   ablations, sweeps) with CSV/JSON reports.

pub mod attacks;
pub mod augment;
pub mod data;
pub mod error;
pub mod harness;
pub mod nn;
pub mod peas;
pub mod rng;
pub mod tensor;
pub mod zoo;

pub use error::{Error, Result};
pub use tensor::{ImageTensor, LabeledSample};
