//! Simulated mass-spectrometry readout of plate layouts.
//!
//! Each well is rendered as a peak list: every library compound contributes
//! one peak at its sodiated mass, with intensity drawn from a log-normal
//! "on" distribution when the compound is present (scaled by level for
//! multi-level layouts) or from a log-normal "off" background when absent.
//! An optional dropout probability replaces a present compound's peak with a
//! background draw, modelling failed transfer or suppression.
//!
//! Noise is deterministic: every well gets its own ChaCha substream keyed by
//! `(rng_seed, well_id)`, so serial and data-parallel runs produce
//! bit-identical spectra.
//!
//! Decoding reverses the channel. Dense plates are read by matching each
//! compound's sodiated mass against the peak list (nearest peak within a ppm
//! window; no peak reads as intensity 0) and thresholding log-intensity with
//! a per-compound Fisher discriminant fitted on labelled calibration wells.
//! Sparse plates take the argmax of background-normalized intensity within
//! each one-hot block, which keeps the block one-hot by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

use crate::codec::{self, CompoundLibrary, Manifest, MixtureState, PlateLayout, Scheme};

/// Mass shift of the primary sodiated ion (Na+ replacing H+), in Daltons.
pub const DEFAULT_SODIATION_SHIFT: f64 = 21.9819;
/// Default peak-matching tolerance in parts per million.
pub const DEFAULT_MASS_TOLERANCE_PPM: f64 = 10.0;
/// Minimum labelled examples per class per compound for classifier fitting.
pub const MIN_CALIBRATION_EXAMPLES: usize = 10;

/// Intensities are floored here before taking logs so that exact zeros stay
/// finite yet unmistakably below any real peak.
const LOG_INTENSITY_FLOOR: f64 = 1e-30;

#[derive(Debug, Error)]
pub enum ReadoutError {
    #[error(
        "sodiated masses of compounds {a} and {b} are {separation:.6} Da apart, \
         below the {required:.6} Da resolution window"
    )]
    MassCollision {
        a: u32,
        b: u32,
        separation: f64,
        required: f64,
    },
    #[error("library has {library} compounds but layout declares {layout}")]
    LibraryMismatch { library: usize, layout: usize },
    #[error("expected {expected} spectra, found {found}")]
    SpectraCountMismatch { expected: usize, found: usize },
    #[error("expected a {expected} layout, found {found}")]
    SchemeMismatch { expected: Scheme, found: Scheme },
    #[error("multi-level readout decoding (L = {0}) is not supported; encode with L = 2")]
    UnsupportedLevels(u32),
    #[error("compound {compound} has {count} calibration examples of class {class}, need {min}")]
    CalibrationTooSmall {
        compound: u32,
        class: u8,
        count: usize,
        min: usize,
    },
    #[error("compound {compound} calibration classes are indistinguishable")]
    NoClassSeparation { compound: u32 },
    #[error("decoded and truth layouts have different shapes")]
    ShapeMismatch,
    #[error("channel config: {0}")]
    BadConfig(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Codec(#[from] codec::CodecError),
}

type Result<T> = std::result::Result<T, ReadoutError>;

// ---------------------------------------------------------------------------
// Channel configuration
// ---------------------------------------------------------------------------

/// Noise model of the readout channel.
///
/// `intensity_*_mean` / `intensity_*_sigma` are the mean and standard
/// deviation of ln-intensity; a mean of `-inf` collapses that class to
/// exactly zero intensity (the zero-noise preset uses it for the "off"
/// class).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub intensity_on_mean: f64,
    pub intensity_on_sigma: f64,
    pub intensity_off_mean: f64,
    pub intensity_off_sigma: f64,
    pub mass_tolerance_ppm: f64,
    pub sodiation_mass_shift: f64,
    pub dropout_probability: f64,
    pub rng_seed: u64,
}

impl ChannelConfig {
    /// Noiseless channel: present compounds read exactly 1, absent exactly 0.
    pub fn zero_noise(rng_seed: u64) -> Self {
        ChannelConfig {
            intensity_on_mean: 0.0,
            intensity_on_sigma: 0.0,
            intensity_off_mean: f64::NEG_INFINITY,
            intensity_off_sigma: 0.0,
            mass_tolerance_ppm: DEFAULT_MASS_TOLERANCE_PPM,
            sodiation_mass_shift: DEFAULT_SODIATION_SHIFT,
            dropout_probability: 0.0,
            rng_seed,
        }
    }

    /// Operating point of the dense plate experiment: the on/off ln-mean gap
    /// is set so the analytic two-class overlap equals a raw bit error rate
    /// of 6.5e-4.
    pub fn paper_dense(rng_seed: u64) -> Self {
        let gap = dense_gap_for_ber(DENSE_TARGET_RAW_BER, 1.0);
        ChannelConfig {
            intensity_on_mean: gap,
            intensity_on_sigma: 1.0,
            intensity_off_mean: 0.0,
            intensity_off_sigma: 1.0,
            mass_tolerance_ppm: DEFAULT_MASS_TOLERANCE_PPM,
            sodiation_mass_shift: DEFAULT_SODIATION_SHIFT,
            dropout_probability: 0.0,
            rng_seed,
        }
    }

    /// Operating point of the sparse plate experiment: the gap is set so
    /// block-argmax decoding lands at ~94.6% pixel accuracy for S = 16.
    pub fn paper_sparse(rng_seed: u64) -> Self {
        let gap = sparse_gap_for_pixel_accuracy(16, SPARSE_TARGET_ACCURACY);
        ChannelConfig {
            intensity_on_mean: gap,
            intensity_on_sigma: 1.0,
            intensity_off_mean: 0.0,
            intensity_off_sigma: 1.0,
            mass_tolerance_ppm: DEFAULT_MASS_TOLERANCE_PPM,
            sodiation_mass_shift: DEFAULT_SODIATION_SHIFT,
            dropout_probability: 0.0,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.intensity_on_sigma.is_nan()
            || self.intensity_on_sigma < 0.0
            || self.intensity_off_sigma.is_nan()
            || self.intensity_off_sigma < 0.0
        {
            return Err(ReadoutError::BadConfig(
                "sigmas must be non-negative".into(),
            ));
        }
        if self.mass_tolerance_ppm.is_nan() || self.mass_tolerance_ppm <= 0.0 {
            return Err(ReadoutError::BadConfig(
                "mass tolerance must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.dropout_probability) {
            return Err(ReadoutError::BadConfig(
                "dropout probability must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        format!(
            "# mixcode channel v1\n\
             intensity_on_mean: {}\n\
             intensity_on_sigma: {}\n\
             intensity_off_mean: {}\n\
             intensity_off_sigma: {}\n\
             mass_tolerance_ppm: {}\n\
             sodiation_mass_shift: {}\n\
             dropout_probability: {}\n\
             rng_seed: {}\n",
            self.intensity_on_mean,
            self.intensity_on_sigma,
            self.intensity_off_mean,
            self.intensity_off_sigma,
            self.mass_tolerance_ppm,
            self.sodiation_mass_shift,
            self.dropout_probability,
            self.rng_seed
        )
    }

    /// Parses a flat `key: value` config. Every field has a default except
    /// `rng_seed`, which is mandatory so that runs are reproducible on
    /// purpose rather than by accident.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, first)) if first.trim() == "# mixcode channel v1" => {}
            _ => {
                return Err(ReadoutError::Parse {
                    line: 1,
                    message: "expected `# mixcode channel v1` header".into(),
                })
            }
        }
        let mut config = ChannelConfig {
            intensity_on_mean: 0.0,
            intensity_on_sigma: 0.0,
            intensity_off_mean: f64::NEG_INFINITY,
            intensity_off_sigma: 0.0,
            mass_tolerance_ppm: DEFAULT_MASS_TOLERANCE_PPM,
            sodiation_mass_shift: DEFAULT_SODIATION_SHIFT,
            dropout_probability: 0.0,
            rng_seed: 0,
        };
        let mut saw_seed = false;
        for (idx, raw) in lines {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            let Some((key, value)) = line.split_once(':') else {
                return Err(ReadoutError::Parse {
                    line: lineno,
                    message: "expected `key: value`".into(),
                });
            };
            let value = value.trim();
            let bad = |msg: &str| ReadoutError::Parse {
                line: lineno,
                message: format!("{msg}: `{value}`"),
            };
            match key.trim() {
                "intensity_on_mean" => {
                    config.intensity_on_mean = value.parse().map_err(|_| bad("bad float"))?
                }
                "intensity_on_sigma" => {
                    config.intensity_on_sigma = value.parse().map_err(|_| bad("bad float"))?
                }
                "intensity_off_mean" => {
                    config.intensity_off_mean = value.parse().map_err(|_| bad("bad float"))?
                }
                "intensity_off_sigma" => {
                    config.intensity_off_sigma = value.parse().map_err(|_| bad("bad float"))?
                }
                "mass_tolerance_ppm" => {
                    config.mass_tolerance_ppm = value.parse().map_err(|_| bad("bad float"))?
                }
                "sodiation_mass_shift" => {
                    config.sodiation_mass_shift = value.parse().map_err(|_| bad("bad float"))?
                }
                "dropout_probability" => {
                    config.dropout_probability = value.parse().map_err(|_| bad("bad float"))?
                }
                "rng_seed" => {
                    config.rng_seed = value.parse().map_err(|_| bad("bad seed"))?;
                    saw_seed = true;
                }
                other => {
                    return Err(ReadoutError::Parse {
                        line: lineno,
                        message: format!("unknown channel key `{other}`"),
                    })
                }
            }
        }
        if !saw_seed {
            return Err(ReadoutError::BadConfig("rng_seed is mandatory".into()));
        }
        config.validate()?;
        Ok(config)
    }
}

// ---------------------------------------------------------------------------
// Calibration math
// ---------------------------------------------------------------------------

/// Raw bit error rate the dense operating point is calibrated to.
pub const DENSE_TARGET_RAW_BER: f64 = 6.5e-4;
/// Post-decode pixel accuracy the sparse operating point is calibrated to.
pub const SPARSE_TARGET_ACCURACY: f64 = 0.946;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// ln-mean gap between equal-sigma on/off classes such that the midpoint
/// threshold misreads a bit with probability `target_ber`:
/// `gap = 2σ·Φ⁻¹(1 − p)`.
pub fn dense_gap_for_ber(target_ber: f64, sigma: f64) -> f64 {
    2.0 * sigma * std_normal().inverse_cdf(1.0 - target_ber)
}

/// Probability that the present compound's log-normal draw beats all
/// `block_size - 1` background draws: `E_Z[Φ(Z + g)^(S-1)]`, by Simpson
/// quadrature over the standard normal.
pub fn sparse_block_correct_probability(gap_over_sigma: f64, block_size: usize) -> f64 {
    let n = std_normal();
    let power = (block_size - 1) as i32;
    let (lo, hi, steps) = (-10.0f64, 10.0f64, 4000usize);
    let h = (hi - lo) / steps as f64;
    let f = |z: f64| n.pdf(z) * n.cdf(z + gap_over_sigma).powi(power);
    let mut sum = f(lo) + f(hi);
    for i in 1..steps {
        let z = lo + h * i as f64;
        sum += f(z) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

/// Expected pixel accuracy of block-argmax decoding at a given block-correct
/// probability: a wrong block picks a uniformly random other index, flipping
/// `S/(2(S-1))` of its bits on average.
pub fn sparse_pixel_accuracy(block_correct: f64, block_size: usize) -> f64 {
    let s = block_size as f64;
    1.0 - (1.0 - block_correct) * s / (2.0 * (s - 1.0))
}

/// ln-mean gap (σ = 1) at which block-argmax decoding lands on the target
/// pixel accuracy, by bisection.
pub fn sparse_gap_for_pixel_accuracy(block_size: usize, target_accuracy: f64) -> f64 {
    let target_correct =
        1.0 - (1.0 - target_accuracy) * 2.0 * (block_size as f64 - 1.0) / block_size as f64;
    let (mut lo, mut hi) = (0.0f64, 30.0f64);
    for _ in 0..200 {
        let mid = (lo + hi) / 2.0;
        if sparse_block_correct_probability(mid, block_size) < target_correct {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / 2.0
}

// ---------------------------------------------------------------------------
// Spectra
// ---------------------------------------------------------------------------

/// One detected peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub mass: f64,
    pub intensity: f64,
}

/// Simulated (or loaded) peak list for one well, masses strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub well_id: u32,
    pub peaks: Vec<Peak>,
}

/// Peak-to-compound matching rule: nearest peak within a ppm window of the
/// compound's sodiated mass; no match reads as intensity 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakMatcher {
    pub mass_tolerance_ppm: f64,
    pub sodiation_mass_shift: f64,
}

impl PeakMatcher {
    pub fn from_config(config: &ChannelConfig) -> Self {
        PeakMatcher {
            mass_tolerance_ppm: config.mass_tolerance_ppm,
            sodiation_mass_shift: config.sodiation_mass_shift,
        }
    }

    pub fn target_mass(&self, detection_mass: f64) -> f64 {
        detection_mass + self.sodiation_mass_shift
    }

    /// Intensity of the peak nearest `target` within tolerance, or 0.
    pub fn intensity_at(&self, spectrum: &Spectrum, target: f64) -> f64 {
        let window = target * self.mass_tolerance_ppm * 1e-6;
        let peaks = &spectrum.peaks;
        let idx = peaks.partition_point(|p| p.mass < target);
        let mut best: Option<(f64, f64)> = None;
        for candidate in [idx.checked_sub(1), Some(idx)].into_iter().flatten() {
            if let Some(peak) = peaks.get(candidate) {
                let distance = (peak.mass - target).abs();
                if distance <= window && best.is_none_or(|(d, _)| distance < d) {
                    best = Some((distance, peak.intensity));
                }
            }
        }
        best.map_or(0.0, |(_, intensity)| intensity)
    }
}

/// Checks that all sodiated masses are separated by more than the sum of
/// their tolerance windows, i.e. twice the window for neighbouring masses.
fn check_mass_separation(library: &CompoundLibrary, matcher: &PeakMatcher) -> Result<()> {
    let mut sodiated: Vec<(f64, u32)> = library
        .compounds()
        .iter()
        .map(|c| (matcher.target_mass(c.detection_mass), c.id))
        .collect();
    sodiated.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for pair in sodiated.windows(2) {
        let (mass_a, id_a) = pair[0];
        let (mass_b, id_b) = pair[1];
        let required = (mass_a + mass_b) * matcher.mass_tolerance_ppm * 1e-6;
        let separation = mass_b - mass_a;
        if separation <= required {
            return Err(ReadoutError::MassCollision {
                a: id_a,
                b: id_b,
                separation,
                required,
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Per-well RNG substream keyed by `(seed, well_id)` so execution order
/// never changes the draws.
fn well_rng(seed: u64, well_id: u32) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&well_id.to_le_bytes());
    key[12..24].copy_from_slice(b"mixcode-well");
    ChaCha12Rng::from_seed(key)
}

fn simulate_well(
    well_id: u32,
    state: &MixtureState,
    library: &CompoundLibrary,
    levels: u32,
    config: &ChannelConfig,
) -> Spectrum {
    let mut rng = well_rng(config.rng_seed, well_id);
    let mut peaks: Vec<Peak> = Vec::with_capacity(library.len());
    for (compound, &level) in library.compounds().iter().zip(state.levels()) {
        // Fixed two draws per compound keep the stream layout independent of
        // the data.
        let dropout_draw: f64 = rng.random();
        let z: f64 = StandardNormal.sample(&mut rng);
        let dropped = dropout_draw < config.dropout_probability;
        let intensity = if level > 0 && !dropped {
            let scale = f64::from(level) / f64::from(levels - 1);
            (config.intensity_on_mean + config.intensity_on_sigma * z).exp() * scale
        } else {
            (config.intensity_off_mean + config.intensity_off_sigma * z).exp()
        };
        peaks.push(Peak {
            mass: compound.detection_mass + config.sodiation_mass_shift,
            intensity,
        });
    }
    peaks.sort_by(|a, b| a.mass.partial_cmp(&b.mass).unwrap());
    Spectrum { well_id, peaks }
}

fn prepare_simulation(
    layout: &PlateLayout,
    library: &CompoundLibrary,
    config: &ChannelConfig,
) -> Result<()> {
    config.validate()?;
    if library.len() != layout.manifest.library_size {
        return Err(ReadoutError::LibraryMismatch {
            library: library.len(),
            layout: layout.manifest.library_size,
        });
    }
    check_mass_separation(library, &PeakMatcher::from_config(config))
}

/// Simulates readout of every well, data-parallel.
pub fn simulate_readout(
    layout: &PlateLayout,
    library: &CompoundLibrary,
    config: &ChannelConfig,
) -> Result<Vec<Spectrum>> {
    prepare_simulation(layout, library, config)?;
    let levels = layout.manifest.levels;
    Ok(layout
        .wells
        .par_iter()
        .enumerate()
        .map(|(w, state)| simulate_well(w as u32, state, library, levels, config))
        .collect())
}

/// Serial twin of [`simulate_readout`]; bit-identical output by the per-well
/// RNG contract.
pub fn simulate_readout_serial(
    layout: &PlateLayout,
    library: &CompoundLibrary,
    config: &ChannelConfig,
) -> Result<Vec<Spectrum>> {
    prepare_simulation(layout, library, config)?;
    let levels = layout.manifest.levels;
    Ok(layout
        .wells
        .iter()
        .enumerate()
        .map(|(w, state)| simulate_well(w as u32, state, library, levels, config))
        .collect())
}

// ---------------------------------------------------------------------------
// Intensity classification
// ---------------------------------------------------------------------------

/// Per-compound 1-D Fisher discriminant on ln-intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct CompoundThreshold {
    /// Fisher projection weight `w = (μ1 - μ0) / (s0² + s1²)`.
    pub weight: f64,
    /// Decision threshold in ln-intensity.
    pub threshold: f64,
    /// True when zero pooled variance forced the plain-midpoint fallback.
    pub fallback: bool,
}

/// Presence classifier fitted on labelled calibration wells, bundled with
/// the peak-matching rule it was fitted under.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityClassifier {
    pub matcher: PeakMatcher,
    pub per_compound: Vec<CompoundThreshold>,
}

impl IntensityClassifier {
    /// Present iff `w·x > w·t` for the compound's discriminant.
    pub fn predict(&self, compound: usize, log_intensity: f64) -> bool {
        let t = &self.per_compound[compound];
        t.weight * log_intensity > t.weight * t.threshold
    }
}

pub fn log_intensity(intensity: f64) -> f64 {
    intensity.max(LOG_INTENSITY_FLOOR).ln()
}

fn mean_and_variance(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let variance = if samples.len() < 2 {
        0.0
    } else {
        samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    };
    (mean, variance)
}

/// Fits one two-class discriminant. Exposed for testing against the closed
/// form; [`fit_classifier`] applies it per compound.
pub fn fit_two_class(off: &[f64], on: &[f64], compound: u32) -> Result<CompoundThreshold> {
    let (mu0, var0) = mean_and_variance(off);
    let (mu1, var1) = mean_and_variance(on);
    if mu0 == mu1 {
        return Err(ReadoutError::NoClassSeparation { compound });
    }
    if var0 + var1 == 0.0 {
        // Degenerate but separable (e.g. the zero-noise channel): fall back
        // to the midpoint and flag it.
        return Ok(CompoundThreshold {
            weight: 1.0,
            threshold: (mu0 + mu1) / 2.0,
            fallback: true,
        });
    }
    // A class whose spread is negligible against the separation would pin
    // the boundary onto its own mean; floor the deviations so the threshold
    // stays strictly between the means.
    let gap = (mu1 - mu0).abs();
    let s0 = var0.sqrt().max(1e-9 * gap);
    let s1 = var1.sqrt().max(1e-9 * gap);
    let weight = (mu1 - mu0) / (s0 * s0 + s1 * s1);
    // Equal-deviate boundary: |t - μ0|/s0 = |t - μ1|/s1. Coincides with the
    // midpoint for equal variances and shifts toward the tighter class
    // otherwise.
    let threshold = (s0 * mu1 + s1 * mu0) / (s0 + s1);
    Ok(CompoundThreshold {
        weight,
        threshold,
        fallback: false,
    })
}

/// Fits the per-compound Fisher discriminants from calibration spectra and
/// their ground-truth layout.
pub fn fit_classifier(
    calibration_spectra: &[Spectrum],
    calibration_truth: &PlateLayout,
    library: &CompoundLibrary,
    matcher: &PeakMatcher,
) -> Result<IntensityClassifier> {
    if calibration_spectra.len() != calibration_truth.wells.len() {
        return Err(ReadoutError::SpectraCountMismatch {
            expected: calibration_truth.wells.len(),
            found: calibration_spectra.len(),
        });
    }
    if library.len() != calibration_truth.manifest.library_size {
        return Err(ReadoutError::LibraryMismatch {
            library: library.len(),
            layout: calibration_truth.manifest.library_size,
        });
    }
    let mut per_compound = Vec::with_capacity(library.len());
    for (i, compound) in library.compounds().iter().enumerate() {
        let target = matcher.target_mass(compound.detection_mass);
        let mut off = Vec::new();
        let mut on = Vec::new();
        for (spectrum, truth) in calibration_spectra.iter().zip(&calibration_truth.wells) {
            let x = log_intensity(matcher.intensity_at(spectrum, target));
            if truth.levels()[i] > 0 {
                on.push(x);
            } else {
                off.push(x);
            }
        }
        for (class, samples) in [(0u8, &off), (1u8, &on)] {
            if samples.len() < MIN_CALIBRATION_EXAMPLES {
                return Err(ReadoutError::CalibrationTooSmall {
                    compound: compound.id,
                    class,
                    count: samples.len(),
                    min: MIN_CALIBRATION_EXAMPLES,
                });
            }
        }
        per_compound.push(fit_two_class(&off, &on, compound.id)?);
    }
    Ok(IntensityClassifier {
        matcher: *matcher,
        per_compound,
    })
}

/// Per-compound geometric mean of off-class intensities, used to normalize
/// sparse block argmax when per-compound backgrounds differ.
pub fn estimate_background(
    calibration_spectra: &[Spectrum],
    calibration_truth: &PlateLayout,
    library: &CompoundLibrary,
    matcher: &PeakMatcher,
) -> Result<Vec<f64>> {
    if calibration_spectra.len() != calibration_truth.wells.len() {
        return Err(ReadoutError::SpectraCountMismatch {
            expected: calibration_truth.wells.len(),
            found: calibration_spectra.len(),
        });
    }
    let mut background = Vec::with_capacity(library.len());
    for (i, compound) in library.compounds().iter().enumerate() {
        let target = matcher.target_mass(compound.detection_mass);
        let mut log_sum = 0.0;
        let mut count = 0usize;
        for (spectrum, truth) in calibration_spectra.iter().zip(&calibration_truth.wells) {
            if truth.levels()[i] == 0 {
                log_sum += log_intensity(matcher.intensity_at(spectrum, target));
                count += 1;
            }
        }
        if count == 0 {
            return Err(ReadoutError::CalibrationTooSmall {
                compound: compound.id,
                class: 0,
                count: 0,
                min: 1,
            });
        }
        background.push((log_sum / count as f64).exp());
    }
    Ok(background)
}

// ---------------------------------------------------------------------------
// Spectra decoding
// ---------------------------------------------------------------------------

fn check_decode_inputs(
    spectra: &[Spectrum],
    library: &CompoundLibrary,
    manifest: &Manifest,
    expected_scheme: Scheme,
) -> Result<()> {
    if manifest.scheme != expected_scheme {
        return Err(ReadoutError::SchemeMismatch {
            expected: expected_scheme,
            found: manifest.scheme,
        });
    }
    if library.len() != manifest.library_size {
        return Err(ReadoutError::LibraryMismatch {
            library: library.len(),
            layout: manifest.library_size,
        });
    }
    if spectra.len() != manifest.wells {
        return Err(ReadoutError::SpectraCountMismatch {
            expected: manifest.wells,
            found: spectra.len(),
        });
    }
    Ok(())
}

/// Decodes a dense plate: per compound, classify presence from the matched
/// peak's log-intensity. Missing peaks decode as absent; nothing is fatal.
pub fn decode_dense_spectra(
    spectra: &[Spectrum],
    classifier: &IntensityClassifier,
    library: &CompoundLibrary,
    manifest: &Manifest,
) -> Result<(PlateLayout, Vec<bool>)> {
    check_decode_inputs(spectra, library, manifest, Scheme::Dense)?;
    if manifest.levels != 2 {
        return Err(ReadoutError::UnsupportedLevels(manifest.levels));
    }
    let targets: Vec<f64> = library
        .compounds()
        .iter()
        .map(|c| classifier.matcher.target_mass(c.detection_mass))
        .collect();
    let wells: Vec<MixtureState> = spectra
        .par_iter()
        .map(|spectrum| {
            let levels = targets
                .iter()
                .enumerate()
                .map(|(i, &target)| {
                    let x = log_intensity(classifier.matcher.intensity_at(spectrum, target));
                    u16::from(classifier.predict(i, x))
                })
                .collect();
            MixtureState::new(levels)
        })
        .collect();
    let layout = PlateLayout {
        manifest: manifest.clone(),
        wells,
    };
    let bits = codec::decode_dense(&layout)?;
    Ok((layout, bits))
}

/// Result of sparse spectra decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDecode {
    pub layout: PlateLayout,
    pub bits: Vec<bool>,
    /// Blocks whose intensities were all zero; index 0 was selected for them.
    pub empty_blocks: usize,
}

/// Decodes a sparse plate: within each block of `S` compounds, select the
/// argmax of background-normalized intensity (ties broken by lowest compound
/// id). Output blocks are one-hot by construction.
pub fn decode_sparse_spectra(
    spectra: &[Spectrum],
    library: &CompoundLibrary,
    manifest: &Manifest,
    matcher: &PeakMatcher,
    background: Option<&[f64]>,
) -> Result<SparseDecode> {
    check_decode_inputs(spectra, library, manifest, Scheme::Sparse)?;
    if let Some(bg) = background {
        if bg.len() != library.len() {
            return Err(ReadoutError::ShapeMismatch);
        }
        if bg.iter().any(|&b| b.is_nan() || b <= 0.0) {
            return Err(ReadoutError::BadConfig(
                "background means must be positive".into(),
            ));
        }
    }
    let s = manifest.block_size;
    let targets: Vec<f64> = library
        .compounds()
        .iter()
        .map(|c| matcher.target_mass(c.detection_mass))
        .collect();
    let decoded: Vec<(MixtureState, usize)> = spectra
        .par_iter()
        .map(|spectrum| {
            let mut levels = vec![0u16; library.len()];
            let mut empty = 0usize;
            for block_start in (0..library.len()).step_by(s) {
                let mut best_idx = 0usize;
                let mut best_score = f64::NEG_INFINITY;
                let mut all_zero = true;
                for offset in 0..s {
                    let i = block_start + offset;
                    let raw = matcher.intensity_at(spectrum, targets[i]);
                    if raw > 0.0 {
                        all_zero = false;
                    }
                    let score = raw / background.map_or(1.0, |bg| bg[i]);
                    // Strict > keeps the lowest compound id on ties.
                    if score > best_score {
                        best_score = score;
                        best_idx = offset;
                    }
                }
                if all_zero {
                    empty += 1;
                    best_idx = 0;
                }
                levels[block_start + best_idx] = 1;
            }
            (MixtureState::new(levels), empty)
        })
        .collect();
    let empty_blocks = decoded.iter().map(|(_, e)| e).sum();
    let layout = PlateLayout {
        manifest: manifest.clone(),
        wells: decoded.into_iter().map(|(w, _)| w).collect(),
    };
    let bits = codec::decode_sparse(&layout)?;
    Ok(SparseDecode {
        layout,
        bits,
        empty_blocks,
    })
}

// ---------------------------------------------------------------------------
// Confusion estimation
// ---------------------------------------------------------------------------

/// Well-level and per-compound error summary of a decode against truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionEstimate {
    /// Fraction of wells whose full mixture state decoded exactly.
    pub pc: f64,
    /// Per-compound raw error rate: fraction of wells where that compound's
    /// level was misread.
    pub per_compound_error: Vec<f64>,
    pub wells_exact: usize,
    pub wells_total: usize,
    /// Total mismatched compound levels across the plate.
    pub level_errors: usize,
}

impl ConfusionEstimate {
    /// `Π(1 - e_i)` — what Pc would be if per-compound errors were
    /// independent, as they are for the dense channel.
    pub fn independent_pc(&self) -> f64 {
        self.per_compound_error.iter().map(|e| 1.0 - e).product()
    }
}

/// Compares a decoded layout against truth well-by-well.
pub fn estimate_confusion(decoded: &PlateLayout, truth: &PlateLayout) -> Result<ConfusionEstimate> {
    if decoded.wells.len() != truth.wells.len()
        || decoded.manifest.library_size != truth.manifest.library_size
    {
        return Err(ReadoutError::ShapeMismatch);
    }
    let m = truth.manifest.library_size;
    let wells_total = truth.wells.len();
    let mut per_compound_miss = vec![0usize; m];
    let mut wells_exact = 0usize;
    for (got, want) in decoded.wells.iter().zip(&truth.wells) {
        let mut exact = true;
        for (i, (g, w)) in got.levels().iter().zip(want.levels()).enumerate() {
            if g != w {
                per_compound_miss[i] += 1;
                exact = false;
            }
        }
        if exact {
            wells_exact += 1;
        }
    }
    let level_errors = per_compound_miss.iter().sum();
    Ok(ConfusionEstimate {
        pc: wells_exact as f64 / wells_total as f64,
        per_compound_error: per_compound_miss
            .iter()
            .map(|&miss| miss as f64 / wells_total as f64)
            .collect(),
        wells_exact,
        wells_total,
        level_errors,
    })
}

// ---------------------------------------------------------------------------
// Spectra file format
// ---------------------------------------------------------------------------

/// One text table per plate: `well_id`, `mass`, `intensity`.
pub fn write_spectra(spectra: &[Spectrum]) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("# mixcode spectra v1\nwell_id\tmass\tintensity\n");
    for spectrum in spectra {
        for peak in &spectrum.peaks {
            let _ = writeln!(
                out,
                "{}\t{}\t{}",
                spectrum.well_id, peak.mass, peak.intensity
            );
        }
    }
    out
}

pub fn read_spectra(text: &str) -> Result<Vec<Spectrum>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim() == "# mixcode spectra v1" => {}
        _ => {
            return Err(ReadoutError::Parse {
                line: 1,
                message: "expected `# mixcode spectra v1` header".into(),
            })
        }
    }
    match lines.next() {
        Some((_, cols)) if cols.trim() == "well_id\tmass\tintensity" => {}
        _ => {
            return Err(ReadoutError::Parse {
                line: 2,
                message: "expected `well_id\\tmass\\tintensity` column header".into(),
            })
        }
    }
    let mut spectra: Vec<Spectrum> = Vec::new();
    for (idx, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let mut fields = line.split('\t');
        let (well, mass, intensity) = match (fields.next(), fields.next(), fields.next()) {
            (Some(w), Some(m), Some(i)) => (w, m, i),
            _ => {
                return Err(ReadoutError::Parse {
                    line: lineno,
                    message: "expected three tab-separated fields".into(),
                })
            }
        };
        let bad = |what: &str| ReadoutError::Parse {
            line: lineno,
            message: format!("bad {what}"),
        };
        let well_id: u32 = well.trim().parse().map_err(|_| bad("well_id"))?;
        let mass: f64 = mass.trim().parse().map_err(|_| bad("mass"))?;
        let intensity: f64 = intensity.trim().parse().map_err(|_| bad("intensity"))?;
        if intensity.is_nan() || intensity < 0.0 {
            return Err(bad("intensity (must be non-negative)"));
        }
        match spectra.last_mut() {
            Some(last) if last.well_id == well_id => {
                if last.peaks.last().is_some_and(|p| p.mass >= mass) {
                    return Err(ReadoutError::Parse {
                        line: lineno,
                        message: "masses must be strictly increasing within a well".into(),
                    });
                }
                last.peaks.push(Peak { mass, intensity });
            }
            Some(last) if well_id < last.well_id => {
                return Err(ReadoutError::Parse {
                    line: lineno,
                    message: "well ids must be grouped in ascending order".into(),
                })
            }
            _ => spectra.push(Spectrum {
                well_id,
                peaks: vec![Peak { mass, intensity }],
            }),
        }
    }
    Ok(spectra)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
