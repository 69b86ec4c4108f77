//! Digital data storage in simulated small-molecule mixtures.
//!
//! `mixcode` treats the contents of a microwell — which compounds from a
//! fixed library are present, and at what level — as a data symbol. It
//! bundles four pieces:
//!
//! - [`capacity`]: information-capacity and write-energy bounds for mixture
//!   memories (dense, duplication-free, multi-level, and sparse one-hot
//!   regimes, plus the confusion-limited capacity of a noisy readout).
//! - [`codec`]: bitstream ⇄ plate-layout mapping under the dense
//!   presence/absence scheme and the sparse one-hot scheme, with text file
//!   formats for libraries, layouts, and portable bitmap images.
//! - [`readout`]: a mass-spectrometry readout channel — log-normal peak
//!   intensities, sodiated-ion mass placement, per-well deterministic noise
//!   streams — and the matching decoders (Fisher-discriminant thresholding
//!   for dense plates, block argmax for sparse plates).
//! - [`ecc`]: channel coding over mixture bits — codebooks, a systematic
//!   Hamming(7,4) code, and a noise-guessing decoder that tests error
//!   patterns in maximum-likelihood order.
//!
//! The `mixcode` binary wires these into encode → simulate → decode → report
//! pipelines; see the README for a walkthrough.

pub mod capacity;
pub mod codec;
pub mod ecc;
pub mod readout;
pub mod report;

pub use capacity::{CapacityError, CapacityValue};
pub use codec::{BitImage, CompoundLibrary, Manifest, MixtureState, PlateLayout, Scheme};
pub use ecc::{Codebook, GrandOutcome, NoiseGuessOrder};
pub use readout::{ChannelConfig, ConfusionEstimate, IntensityClassifier, Spectrum};
