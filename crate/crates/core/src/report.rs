//! Run reports: everything a decode run claims, recomputed from persisted
//! artifacts.
//!
//! A [`RunReport`] is built from the truth and decoded layout files — never
//! from in-memory state — so any reported accuracy can be reproduced after
//! the fact. Optional sections are attached when their inputs exist:
//! per-compound intensity histograms need the spectra, the guesses histogram
//! needs an ECC decode.
//!
//! The text format is `key: value` lines followed by named CSV sections, and
//! round-trips through [`read_report`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::capacity::{self, StateCount};
use crate::codec::{self, CompoundLibrary, Manifest, PlateLayout, Scheme};
use crate::ecc::Codebook;
use crate::readout::{estimate_confusion, log_intensity, ConfusionEstimate, PeakMatcher, Spectrum};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Codec(#[from] codec::CodecError),
    #[error(transparent)]
    Readout(#[from] crate::readout::ReadoutError),
    #[error(transparent)]
    Capacity(#[from] capacity::CapacityError),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

type Result<T> = std::result::Result<T, ReportError>;

/// Raw presence/absence error tally for one compound.
#[derive(Debug, Clone, PartialEq)]
pub struct CompoundErrorRow {
    pub compound: u32,
    pub errors: usize,
    pub wells: usize,
}

impl CompoundErrorRow {
    pub fn rate(&self) -> f64 {
        self.errors as f64 / self.wells as f64
    }
}

/// One bin of an intensity histogram (ln-intensity edges).
#[derive(Debug, Clone, PartialEq)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

/// Binned ln-intensity table for one compound and class.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityHistogram {
    pub compound: u32,
    /// 0 = absent, 1 = present.
    pub class: u8,
    pub bins: Vec<HistBin>,
}

/// ECC decode summary attached when a codebook was in play.
#[derive(Debug, Clone, PartialEq)]
pub struct EccSummary {
    pub code_rate: f64,
    pub rate_admissible: bool,
    pub abandoned_blocks: usize,
    /// guesses -> number of blocks needing that many guesses.
    pub guesses_histogram: BTreeMap<u64, u64>,
}

/// Full account of one decode run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub manifest: Manifest,
    pub per_compound: Vec<CompoundErrorRow>,
    /// Payload-level accuracy after codec decoding of both layouts.
    pub bit_accuracy: f64,
    pub pc: f64,
    pub wells_exact: usize,
    pub wells_total: usize,
    pub level_errors: usize,
    /// Confusion-limited capacity at the measured Pc, per mixture.
    pub cprime_bits_per_mixture: f64,
    /// The same normalized per mixture bit.
    pub cprime_bits_per_use: f64,
    /// Compounds with raw error under 1%.
    pub compounds_under_one_percent: usize,
    pub ecc: Option<EccSummary>,
    pub sparse_empty_blocks: Option<usize>,
    pub histograms: Vec<IntensityHistogram>,
}

impl RunReport {
    /// Builds the core report by comparing a decoded layout against truth.
    ///
    /// Bit accuracy is measured on the payload bits obtained by running the
    /// plate codec over both layouts, so padding never dilutes it.
    pub fn from_layouts(truth: &PlateLayout, decoded: &PlateLayout) -> Result<RunReport> {
        let confusion = estimate_confusion(decoded, truth)?;
        let truth_bits = decode_payload(truth)?;
        let decoded_bits = decode_payload(decoded)?;
        let matching = truth_bits
            .iter()
            .zip(&decoded_bits)
            .filter(|(a, b)| a == b)
            .count();
        let bit_accuracy = matching as f64 / truth_bits.len() as f64;
        Ok(Self::from_confusion(
            truth.manifest.clone(),
            &confusion,
            bit_accuracy,
        ))
    }

    fn from_confusion(
        manifest: Manifest,
        confusion: &ConfusionEstimate,
        bit_accuracy: f64,
    ) -> Self {
        let wells = confusion.wells_total;
        let per_compound: Vec<CompoundErrorRow> = confusion
            .per_compound_error
            .iter()
            .enumerate()
            .map(|(i, &rate)| CompoundErrorRow {
                compound: i as u32,
                errors: (rate * wells as f64).round() as usize,
                wells,
            })
            .collect();
        let compounds_under_one_percent =
            per_compound.iter().filter(|row| row.rate() < 0.01).count();
        let bits_per_well = manifest.bits_per_well();
        let cprime_bits_per_mixture = if confusion.pc > 0.0 {
            capacity::confusion_limited_capacity(
                &StateCount::Log2(bits_per_well as f64),
                confusion.pc,
            )
            .map(|v| v.bits)
            .unwrap_or(0.0)
        } else {
            0.0
        };
        RunReport {
            manifest,
            per_compound,
            bit_accuracy,
            pc: confusion.pc,
            wells_exact: confusion.wells_exact,
            wells_total: confusion.wells_total,
            level_errors: confusion.level_errors,
            cprime_bits_per_mixture,
            cprime_bits_per_use: cprime_bits_per_mixture / bits_per_well as f64,
            compounds_under_one_percent,
            ecc: None,
            sparse_empty_blocks: None,
            histograms: Vec::new(),
        }
    }

    /// Attaches the ECC summary: the guesses histogram and the rate verdict
    /// against the achieved per-use capacity.
    pub fn with_ecc(mut self, codebook: &Codebook, guesses: &[u64], abandoned: usize) -> Self {
        let code_rate = codebook.log2_size() / codebook.codeword_length() as f64;
        let mut histogram = BTreeMap::new();
        for &g in guesses {
            *histogram.entry(g).or_insert(0u64) += 1;
        }
        self.ecc = Some(EccSummary {
            code_rate,
            rate_admissible: crate::ecc::rate_admissible(
                codebook.log2_size(),
                codebook.codeword_length(),
                self.cprime_bits_per_use,
            ),
            abandoned_blocks: abandoned,
            guesses_histogram: histogram,
        });
        self
    }

    pub fn with_sparse_diagnostics(mut self, empty_blocks: usize) -> Self {
        self.sparse_empty_blocks = Some(empty_blocks);
        self
    }

    /// Attaches per-compound on/off ln-intensity histograms binned from the
    /// spectra, labelled by the truth layout.
    pub fn with_intensity_histograms(
        mut self,
        spectra: &[Spectrum],
        truth: &PlateLayout,
        library: &CompoundLibrary,
        matcher: &PeakMatcher,
        bins: usize,
    ) -> Self {
        for (i, compound) in library.compounds().iter().enumerate() {
            let target = matcher.target_mass(compound.detection_mass);
            let mut on = Vec::new();
            let mut off = Vec::new();
            for (spectrum, well) in spectra.iter().zip(&truth.wells) {
                let x = log_intensity(matcher.intensity_at(spectrum, target));
                if well.levels()[i] > 0 {
                    on.push(x);
                } else {
                    off.push(x);
                }
            }
            for (class, samples) in [(0u8, off), (1u8, on)] {
                if !samples.is_empty() {
                    self.histograms.push(IntensityHistogram {
                        compound: compound.id,
                        class,
                        bins: bin_samples(&samples, bins),
                    });
                }
            }
        }
        self
    }
}

fn decode_payload(layout: &PlateLayout) -> Result<Vec<bool>> {
    Ok(match layout.manifest.scheme {
        Scheme::Dense => codec::decode_dense(layout)?,
        Scheme::Sparse => codec::decode_sparse(layout)?,
    })
}

fn bin_samples(samples: &[f64], bins: usize) -> Vec<HistBin> {
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return vec![HistBin {
            lo,
            hi,
            count: samples.len() as u64,
        }];
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &x in samples {
        let idx = (((x - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistBin {
            lo: lo + width * i as f64,
            hi: lo + width * (i + 1) as f64,
            count,
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Report file format
// ---------------------------------------------------------------------------

pub fn write_report(report: &RunReport) -> String {
    let mut out = String::from("# mixcode report v1\n");
    let m = &report.manifest;
    let _ = writeln!(out, "scheme: {}", m.scheme);
    let _ = writeln!(out, "m: {}", m.library_size);
    let _ = writeln!(out, "s: {}", m.block_size);
    let _ = writeln!(out, "l: {}", m.levels);
    let _ = writeln!(out, "original_bit_length: {}", m.original_bit_length);
    let _ = writeln!(out, "padding_bits: {}", m.padding_bits);
    let _ = writeln!(out, "wells: {}", m.wells);
    let _ = writeln!(out, "wells_per_plate: {}", m.wells_per_plate);
    let _ = writeln!(out, "well_pitch_mm: {}", m.well_pitch_mm);
    if let Some(library) = &m.library_ref {
        let _ = writeln!(out, "library: {library}");
    }
    if let Some((w, h)) = m.image_size {
        let _ = writeln!(out, "image_width: {w}");
        let _ = writeln!(out, "image_height: {h}");
    }
    if let Some(ecc) = m.ecc {
        let _ = writeln!(out, "ecc_data_bits: {}", ecc.data_bits);
        let _ = writeln!(out, "ecc_codeword_length: {}", ecc.codeword_length);
        if let Some(stride) = ecc.stride {
            let _ = writeln!(out, "ecc_stride: {stride}");
        }
    }
    let _ = writeln!(out, "bits_per_well: {}", m.bits_per_well());
    let _ = writeln!(out, "bit_accuracy: {}", report.bit_accuracy);
    let _ = writeln!(out, "pc: {}", report.pc);
    let _ = writeln!(out, "wells_exact: {}", report.wells_exact);
    let _ = writeln!(out, "wells_total: {}", report.wells_total);
    let _ = writeln!(out, "level_errors: {}", report.level_errors);
    let _ = writeln!(
        out,
        "cprime_bits_per_mixture: {}",
        report.cprime_bits_per_mixture
    );
    let _ = writeln!(out, "cprime_bits_per_use: {}", report.cprime_bits_per_use);
    let _ = writeln!(
        out,
        "compounds_under_one_percent_raw_error: {}",
        report.compounds_under_one_percent
    );
    if let Some(empty) = report.sparse_empty_blocks {
        let _ = writeln!(out, "sparse_empty_blocks: {empty}");
    }
    if let Some(ecc) = &report.ecc {
        let _ = writeln!(out, "ecc_code_rate: {}", ecc.code_rate);
        let _ = writeln!(out, "ecc_rate_admissible: {}", ecc.rate_admissible);
        let _ = writeln!(out, "ecc_abandoned_blocks: {}", ecc.abandoned_blocks);
    }
    out.push_str("\n[per_compound_error]\ncompound,errors,wells,rate\n");
    for row in &report.per_compound {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row.compound,
            row.errors,
            row.wells,
            row.rate()
        );
    }
    if let Some(ecc) = &report.ecc {
        out.push_str("\n[guesses_histogram]\nguesses,blocks\n");
        for (&guesses, &blocks) in &ecc.guesses_histogram {
            let _ = writeln!(out, "{guesses},{blocks}");
        }
    }
    for histogram in &report.histograms {
        let _ = writeln!(
            out,
            "\n[intensity_histogram compound={} class={}]",
            histogram.compound, histogram.class
        );
        out.push_str("bin_lo,bin_hi,count\n");
        for bin in &histogram.bins {
            let _ = writeln!(out, "{},{},{}", bin.lo, bin.hi, bin.count);
        }
    }
    out
}

/// Parses a report file back into a [`RunReport`]; exact inverse of
/// [`write_report`] for the data it carries.
pub fn read_report(text: &str) -> Result<RunReport> {
    let parse_err = |line: usize, message: String| ReportError::Parse { line, message };
    let mut lines = text.lines().enumerate().peekable();
    match lines.next() {
        Some((_, first)) if first.trim() == "# mixcode report v1" => {}
        _ => return Err(parse_err(1, "expected `# mixcode report v1` header".into())),
    }
    let mut keys: BTreeMap<String, String> = BTreeMap::new();
    let mut per_compound = Vec::new();
    let mut guesses_histogram = BTreeMap::new();
    let mut histograms: Vec<IntensityHistogram> = Vec::new();
    let mut section: Option<String> = None;
    let mut skip_columns = false;
    for (idx, raw) in lines {
        let line = raw.trim();
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = Some(name.to_string());
            skip_columns = true;
            if let Some(rest) = name.strip_prefix("intensity_histogram ") {
                let mut compound = None;
                let mut class = None;
                for field in rest.split_whitespace() {
                    if let Some(v) = field.strip_prefix("compound=") {
                        compound = v.parse::<u32>().ok();
                    } else if let Some(v) = field.strip_prefix("class=") {
                        class = v.parse::<u8>().ok();
                    }
                }
                let (Some(compound), Some(class)) = (compound, class) else {
                    return Err(parse_err(lineno, format!("bad histogram header `{name}`")));
                };
                histograms.push(IntensityHistogram {
                    compound,
                    class,
                    bins: Vec::new(),
                });
            }
            continue;
        }
        match &section {
            None => {
                let Some((key, value)) = line.split_once(':') else {
                    return Err(parse_err(lineno, "expected `key: value`".into()));
                };
                keys.insert(key.trim().to_string(), value.trim().to_string());
            }
            Some(name) => {
                if skip_columns {
                    // First row of each section is its CSV column header.
                    skip_columns = false;
                    continue;
                }
                let fields: Vec<&str> = line.split(',').collect();
                let num = |i: usize| -> std::result::Result<f64, ReportError> {
                    fields
                        .get(i)
                        .and_then(|f| f.parse().ok())
                        .ok_or_else(|| parse_err(lineno, format!("bad field {i}")))
                };
                match name.as_str() {
                    "per_compound_error" => per_compound.push(CompoundErrorRow {
                        compound: num(0)? as u32,
                        errors: num(1)? as usize,
                        wells: num(2)? as usize,
                    }),
                    "guesses_histogram" => {
                        guesses_histogram.insert(num(0)? as u64, num(1)? as u64);
                    }
                    _ => {
                        let histogram = histograms
                            .last_mut()
                            .ok_or_else(|| parse_err(lineno, "row outside a section".into()))?;
                        histogram.bins.push(HistBin {
                            lo: num(0)?,
                            hi: num(1)?,
                            count: num(2)? as u64,
                        });
                    }
                }
            }
        }
    }
    let get = |key: &str| -> std::result::Result<&String, ReportError> {
        keys.get(key)
            .ok_or_else(|| parse_err(0, format!("missing `{key}`")))
    };
    let parse_num = |key: &str| -> std::result::Result<f64, ReportError> {
        get(key)?
            .parse()
            .map_err(|_| parse_err(0, format!("bad `{key}`")))
    };
    let manifest = Manifest {
        scheme: get("scheme")?
            .parse()
            .map_err(|e: String| parse_err(0, e))?,
        library_size: parse_num("m")? as usize,
        block_size: parse_num("s")? as usize,
        levels: parse_num("l")? as u32,
        original_bit_length: parse_num("original_bit_length")? as usize,
        padding_bits: parse_num("padding_bits")? as usize,
        wells: parse_num("wells")? as usize,
        wells_per_plate: parse_num("wells_per_plate")? as u32,
        well_pitch_mm: parse_num("well_pitch_mm")?,
        library_ref: keys.get("library").cloned(),
        image_size: match (keys.get("image_width"), keys.get("image_height")) {
            (Some(w), Some(h)) => Some((
                w.parse()
                    .map_err(|_| parse_err(0, "bad image_width".into()))?,
                h.parse()
                    .map_err(|_| parse_err(0, "bad image_height".into()))?,
            )),
            _ => None,
        },
        ecc: match (keys.get("ecc_data_bits"), keys.get("ecc_codeword_length")) {
            (Some(d), Some(n)) => Some(codec::EccManifest {
                data_bits: d
                    .parse()
                    .map_err(|_| parse_err(0, "bad ecc_data_bits".into()))?,
                codeword_length: n
                    .parse()
                    .map_err(|_| parse_err(0, "bad ecc_codeword_length".into()))?,
                stride: keys
                    .get("ecc_stride")
                    .map(|v| v.parse())
                    .transpose()
                    .map_err(|_| parse_err(0, "bad ecc_stride".into()))?,
            }),
            _ => None,
        },
    };
    let ecc = if keys.contains_key("ecc_code_rate") {
        Some(EccSummary {
            code_rate: parse_num("ecc_code_rate")?,
            rate_admissible: get("ecc_rate_admissible")? == "true",
            abandoned_blocks: parse_num("ecc_abandoned_blocks")? as usize,
            guesses_histogram,
        })
    } else {
        None
    };
    Ok(RunReport {
        manifest,
        per_compound,
        bit_accuracy: parse_num("bit_accuracy")?,
        pc: parse_num("pc")?,
        wells_exact: parse_num("wells_exact")? as usize,
        wells_total: parse_num("wells_total")? as usize,
        level_errors: parse_num("level_errors")? as usize,
        cprime_bits_per_mixture: parse_num("cprime_bits_per_mixture")?,
        cprime_bits_per_use: parse_num("cprime_bits_per_use")?,
        compounds_under_one_percent: parse_num("compounds_under_one_percent_raw_error")? as usize,
        ecc,
        sparse_empty_blocks: keys
            .get("sparse_empty_blocks")
            .map(|v| v.parse::<usize>())
            .transpose()
            .map_err(|_| parse_err(0, "bad sparse_empty_blocks".into()))?,
        histograms,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode_dense, encode_sparse, CompoundLibrary, MixtureState};
    use crate::readout::{simulate_readout, ChannelConfig};
    use rand::{Rng as _, SeedableRng as _};
    use rand_chacha::ChaCha12Rng;

    fn random_bits(len: usize, seed: u64) -> Vec<bool> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random::<bool>()).collect()
    }

    #[test]
    fn perfect_decode_reports_all_zero_errors() {
        let library = CompoundLibrary::synthetic(5, 1, 2).unwrap();
        let layout = encode_dense(&random_bits(100, 1), &library, 2).unwrap();
        let report = RunReport::from_layouts(&layout, &layout).unwrap();
        assert_eq!(report.bit_accuracy, 1.0);
        assert_eq!(report.pc, 1.0);
        assert!(report.per_compound.iter().all(|row| row.errors == 0));
        assert_eq!(report.compounds_under_one_percent, 5);
        // Pc = 1 recovers the noiseless capacity per mixture.
        assert_eq!(report.cprime_bits_per_mixture, 5.0);
        assert_eq!(report.cprime_bits_per_use, 1.0);
    }

    #[test]
    fn single_flip_arithmetic() {
        let library = CompoundLibrary::synthetic(5, 1, 2).unwrap();
        let layout = encode_dense(&random_bits(5 * 1229, 2), &library, 2).unwrap();
        let mut decoded = layout.clone();
        let mut levels = decoded.wells[3].levels().to_vec();
        levels[1] ^= 1;
        decoded.wells[3] = MixtureState::new(levels);
        let report = RunReport::from_layouts(&layout, &decoded).unwrap();
        assert_eq!(report.wells_exact, 1228);
        assert_eq!(report.per_compound[1].errors, 1);
        assert!((report.per_compound[1].rate() - 1.0 / 1229.0).abs() < 1e-12);
        assert!((report.bit_accuracy - (6145.0 - 1.0) / 6145.0).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let library = CompoundLibrary::synthetic(5, 1, 2).unwrap();
        let a = encode_dense(&random_bits(100, 3), &library, 2).unwrap();
        let b = encode_dense(&random_bits(105, 3), &library, 2).unwrap();
        assert!(RunReport::from_layouts(&a, &b).is_err());
    }

    #[test]
    fn report_roundtrips_through_text() {
        let library = CompoundLibrary::synthetic(16, 4, 2).unwrap();
        let truth = encode_sparse(&random_bits(500, 4), &library).unwrap();
        let mut decoded = truth.clone();
        // Swap one block's selection.
        let mut levels = decoded.wells[0].levels().to_vec();
        let hot = levels.iter().position(|&v| v == 1).unwrap();
        levels[hot] = 0;
        levels[hot / 4 * 4 + (hot % 4 + 1) % 4] = 1;
        decoded.wells[0] = MixtureState::new(levels);

        let config = ChannelConfig::paper_sparse(11);
        let spectra = simulate_readout(&truth, &library, &config).unwrap();
        let matcher = crate::readout::PeakMatcher::from_config(&config);
        let codebook = Codebook::hamming74();
        let report = RunReport::from_layouts(&truth, &decoded)
            .unwrap()
            .with_ecc(&codebook, &[1, 1, 2, 1, 9], 1)
            .with_sparse_diagnostics(0)
            .with_intensity_histograms(&spectra, &truth, &library, &matcher, 8);

        let text = write_report(&report);
        let back = read_report(&text).unwrap();
        assert_eq!(back, report);
        // Idempotent serialization.
        assert_eq!(write_report(&back), text);
    }

    #[test]
    fn ecc_summary_carries_rate_verdict() {
        let library = CompoundLibrary::synthetic(5, 1, 2).unwrap();
        let layout = encode_dense(&random_bits(700, 5), &library, 2).unwrap();
        let codebook = Codebook::hamming74();
        let report = RunReport::from_layouts(&layout, &layout)
            .unwrap()
            .with_ecc(&codebook, &[1; 100], 0);
        let ecc = report.ecc.as_ref().unwrap();
        assert!((ecc.code_rate - 4.0 / 7.0).abs() < 1e-12);
        // Perfect channel: C' per use is 1 bit, comfortably above 4/7.
        assert!(ecc.rate_admissible);
        assert_eq!(ecc.guesses_histogram[&1], 100);
    }

    #[test]
    fn histogram_binning_covers_all_samples() {
        let samples = [0.0, 0.1, 0.5, 0.9, 1.0, 1.0, -2.0];
        let bins = bin_samples(&samples, 4);
        let total: u64 = bins.iter().map(|b| b.count).sum();
        assert_eq!(total, samples.len() as u64);
        assert_eq!(bins.len(), 4);
        // Degenerate all-equal case collapses to one bin.
        let degenerate = bin_samples(&[3.3; 10], 5);
        assert_eq!(degenerate.len(), 1);
        assert_eq!(degenerate[0].count, 10);
    }
}
