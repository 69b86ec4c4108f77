//! Bitstream ⇄ plate-layout codecs for mixture memories.
//!
//! Two schemes are supported:
//!
//! - **dense** — each library compound's level in a well directly encodes
//!   bits: presence/absence for `L = 2`, or `log2 L` bits per compound for
//!   power-of-two `L > 2`. A well carries `M·log2 L` bits.
//! - **sparse** — the library is split into blocks of `S` compounds; exactly
//!   one compound per block is present (one-hot), selecting `log2 S` bits.
//!   A well carries `(M/S)·log2 S` bits.
//!
//! Payloads that do not fill the final well are padded with level 0 (dense)
//! or block index 0 (sparse); the pad length is recorded in the layout
//! manifest so decoding is exact. Bit groups are always read big-endian.
//!
//! The module also owns the text file formats: compound library tables,
//! plate layouts with a `key: value` manifest header, raw bit files, and
//! portable bitmaps (ASCII `P1` and binary `P4` read; `P1` written).

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// Default number of mixture spots per plate.
pub const DEFAULT_WELLS_PER_PLATE: u32 = 1536;
/// Default spot pitch in millimetres.
pub const DEFAULT_WELL_PITCH_MM: f64 = 2.25;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("bitstream is empty")]
    EmptyBitstream,
    #[error("level count L = {0} must be a power of two and at least 2")]
    BadLevelCount(u32),
    #[error("sparsity S = {0} must be a power of two and at least 2")]
    BadSparsity(usize),
    #[error("library invalid: {0}")]
    BadLibrary(String),
    #[error("expected a {expected} layout, found {found}")]
    SchemeMismatch { expected: Scheme, found: Scheme },
    #[error("well {well} block {block} is not one-hot")]
    NotOneHot { well: usize, block: usize },
    #[error("bit vector length {got} does not match {width}x{height}")]
    ImageSizeMismatch { width: u32, height: u32, got: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("manifest inconsistent: {0}")]
    BadManifest(String),
}

type Result<T> = std::result::Result<T, CodecError>;

fn parse_err<T>(line: usize, message: impl Into<String>) -> Result<T> {
    Err(CodecError::Parse {
        line,
        message: message.into(),
    })
}

// ---------------------------------------------------------------------------
// Compound library
// ---------------------------------------------------------------------------

/// One distinguishable molecule in the encoding library.
#[derive(Debug, Clone, PartialEq)]
pub struct Compound {
    pub id: u32,
    pub name: String,
    /// Neutral detection mass in Daltons (adduct shifts are applied by the
    /// readout channel).
    pub detection_mass: f64,
}

/// The ordered set of `M` library compounds plus the coding geometry they
/// are used with: one-hot block size `S` and level count `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompoundLibrary {
    compounds: Vec<Compound>,
    block_size: usize,
    levels: u32,
}

impl CompoundLibrary {
    pub fn new(compounds: Vec<Compound>, block_size: usize, levels: u32) -> Result<Self> {
        if compounds.is_empty() {
            return Err(CodecError::BadLibrary("no compounds".into()));
        }
        for (i, c) in compounds.iter().enumerate() {
            if c.id as usize != i {
                return Err(CodecError::BadLibrary(format!(
                    "compound ids must be 0..M-1 in order; entry {i} has id {}",
                    c.id
                )));
            }
            if !c.detection_mass.is_finite() || c.detection_mass <= 0.0 {
                return Err(CodecError::BadLibrary(format!(
                    "compound {} has non-positive mass",
                    c.id
                )));
            }
        }
        let mut masses: Vec<f64> = compounds.iter().map(|c| c.detection_mass).collect();
        masses.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if masses.windows(2).any(|w| w[0] == w[1]) {
            return Err(CodecError::BadLibrary(
                "detection masses must be distinct".into(),
            ));
        }
        if block_size == 0 || !compounds.len().is_multiple_of(block_size) {
            return Err(CodecError::BadLibrary(format!(
                "block size {block_size} must divide library size {}",
                compounds.len()
            )));
        }
        if levels < 2 {
            return Err(CodecError::BadLevelCount(levels));
        }
        Ok(CompoundLibrary {
            compounds,
            block_size,
            levels,
        })
    }

    /// A synthetic library of `m` compounds with masses spaced `mass_step`
    /// Daltons apart starting at `mass_start` — comfortably separated for
    /// any realistic ppm tolerance.
    pub fn synthetic(m: usize, block_size: usize, levels: u32) -> Result<Self> {
        Self::synthetic_with_masses(m, block_size, levels, 150.0, 10.0)
    }

    pub fn synthetic_with_masses(
        m: usize,
        block_size: usize,
        levels: u32,
        mass_start: f64,
        mass_step: f64,
    ) -> Result<Self> {
        let compounds = (0..m)
            .map(|i| Compound {
                id: i as u32,
                name: format!("cmpd-{i:03}"),
                detection_mass: mass_start + mass_step * i as f64,
            })
            .collect();
        Self::new(compounds, block_size, levels)
    }

    pub fn len(&self) -> usize {
        self.compounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.compounds.is_empty()
    }

    pub fn compounds(&self) -> &[Compound] {
        &self.compounds
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    /// Override the coding geometry (CLI flags take precedence over the
    /// values stored in a library file).
    pub fn with_geometry(mut self, block_size: usize, levels: u32) -> Result<Self> {
        if block_size == 0 || !self.compounds.len().is_multiple_of(block_size) {
            return Err(CodecError::BadLibrary(format!(
                "block size {block_size} must divide library size {}",
                self.compounds.len()
            )));
        }
        if levels < 2 {
            return Err(CodecError::BadLevelCount(levels));
        }
        self.block_size = block_size;
        self.levels = levels;
        Ok(self)
    }

    // -- file format --------------------------------------------------------

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# mixcode library v1\n");
        let _ = writeln!(out, "block_size: {}", self.block_size);
        let _ = writeln!(out, "levels: {}", self.levels);
        out.push_str("id\tname\tdetection_mass\n");
        for c in &self.compounds {
            let _ = writeln!(out, "{}\t{}\t{}", c.id, c.name, c.detection_mass);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or(CodecError::Parse {
            line: 1,
            message: "empty file".into(),
        })?;
        if first.trim() != "# mixcode library v1" {
            return parse_err(1, "expected `# mixcode library v1` header");
        }
        let mut block_size = 1usize;
        let mut levels = 2u32;
        let mut compounds = Vec::new();
        let mut seen_columns = false;
        for (idx, raw) in lines {
            let line = raw.trim();
            let lineno = idx + 1;
            if line.is_empty() {
                continue;
            }
            if !seen_columns {
                if let Some((key, value)) = line.split_once(':') {
                    match key.trim() {
                        "block_size" => {
                            block_size = value.trim().parse().map_err(|_| CodecError::Parse {
                                line: lineno,
                                message: "bad block_size".into(),
                            })?
                        }
                        "levels" => {
                            levels = value.trim().parse().map_err(|_| CodecError::Parse {
                                line: lineno,
                                message: "bad levels".into(),
                            })?
                        }
                        other => {
                            return parse_err(lineno, format!("unknown library key `{other}`"))
                        }
                    }
                    continue;
                }
                if line == "id\tname\tdetection_mass" {
                    seen_columns = true;
                    continue;
                }
                return parse_err(
                    lineno,
                    "expected `id\\tname\\tdetection_mass` column header",
                );
            }
            let mut fields = line.split('\t');
            let (id, name, mass) = match (fields.next(), fields.next(), fields.next()) {
                (Some(id), Some(name), Some(mass)) => (id, name, mass),
                _ => return parse_err(lineno, "expected three tab-separated fields"),
            };
            let id: u32 = id.trim().parse().map_err(|_| CodecError::Parse {
                line: lineno,
                message: "bad id".into(),
            })?;
            let detection_mass: f64 = mass.trim().parse().map_err(|_| CodecError::Parse {
                line: lineno,
                message: "bad detection_mass".into(),
            })?;
            compounds.push(Compound {
                id,
                name: name.trim().to_string(),
                detection_mass,
            });
        }
        CompoundLibrary::new(compounds, block_size, levels)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|source| CodecError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CodecError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text)
    }
}

// ---------------------------------------------------------------------------
// Mixture states and plate layouts
// ---------------------------------------------------------------------------

/// Encoding scheme recorded in a layout manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Dense,
    Sparse,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::Dense => write!(f, "dense"),
            Scheme::Sparse => write!(f, "sparse"),
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dense" => Ok(Scheme::Dense),
            "sparse" => Ok(Scheme::Sparse),
            other => Err(format!("unknown scheme `{other}`")),
        }
    }
}

/// Per-well level vector: entry `i` is compound `i`'s level in `0..L`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixtureState {
    levels: Vec<u16>,
}

impl MixtureState {
    pub fn new(levels: Vec<u16>) -> Self {
        MixtureState { levels }
    }

    pub fn levels(&self) -> &[u16] {
        &self.levels
    }

    /// True when every block of `block_size` entries has exactly one
    /// nonzero entry and that entry is 1.
    pub fn is_one_hot(&self, block_size: usize) -> bool {
        self.levels.chunks(block_size).all(|block| {
            block.iter().filter(|&&v| v != 0).count() == 1 && block.iter().all(|&v| v <= 1)
        })
    }
}

/// Channel-coding parameters recorded when the payload went through an ECC
/// stage before plate encoding; the mixture bits then hold codewords, not
/// raw data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EccManifest {
    /// Payload length in data bits, before coding and padding.
    pub data_bits: usize,
    /// `N_c` of the codebook used.
    pub codeword_length: usize,
    /// Block-interleaver stride, if any.
    pub stride: Option<usize>,
}

/// Encoding manifest stored alongside the well matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub scheme: Scheme,
    /// `M`, compounds per well.
    pub library_size: usize,
    /// `S`, one-hot block size (1 for dense layouts).
    pub block_size: usize,
    /// `L`, levels per compound (2 for sparse layouts).
    pub levels: u32,
    pub original_bit_length: usize,
    pub padding_bits: usize,
    /// `W`, number of data wells.
    pub wells: usize,
    pub wells_per_plate: u32,
    pub well_pitch_mm: f64,
    /// Library file the layout was encoded against, if known.
    pub library_ref: Option<String>,
    /// Source image dimensions when the payload came from a bitmap.
    pub image_size: Option<(u32, u32)>,
    /// Present when the mixture bits carry ECC codewords.
    pub ecc: Option<EccManifest>,
}

impl Manifest {
    /// Data bits carried by one well under this manifest.
    pub fn bits_per_well(&self) -> usize {
        match self.scheme {
            Scheme::Dense => self.library_size * self.levels.ilog2() as usize,
            Scheme::Sparse => {
                (self.library_size / self.block_size) * self.block_size.ilog2() as usize
            }
        }
    }

    /// Checks field sanity and the accounting identity
    /// `W·bits_per_well = original + padding`.
    pub fn validate(&self) -> Result<()> {
        if self.library_size == 0 {
            return Err(CodecError::BadManifest("m must be positive".into()));
        }
        match self.scheme {
            Scheme::Dense => {
                if self.levels < 2 || !is_power_of_two(u64::from(self.levels)) {
                    return Err(CodecError::BadLevelCount(self.levels));
                }
            }
            Scheme::Sparse => {
                if self.block_size < 2 || !is_power_of_two(self.block_size as u64) {
                    return Err(CodecError::BadSparsity(self.block_size));
                }
                if !self.library_size.is_multiple_of(self.block_size) {
                    return Err(CodecError::BadManifest(format!(
                        "s = {} must divide m = {}",
                        self.block_size, self.library_size
                    )));
                }
            }
        }
        let total = self.wells * self.bits_per_well();
        if total != self.original_bit_length + self.padding_bits {
            return Err(CodecError::BadManifest(format!(
                "{} wells x {} bits/well = {total} != {} payload + {} padding",
                self.wells,
                self.bits_per_well(),
                self.original_bit_length,
                self.padding_bits
            )));
        }
        Ok(())
    }
}

/// `W` wells of mixture states plus their encoding manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateLayout {
    pub manifest: Manifest,
    pub wells: Vec<MixtureState>,
}

// ---------------------------------------------------------------------------
// Encoding and decoding
// ---------------------------------------------------------------------------

fn is_power_of_two(x: u64) -> bool {
    x != 0 && x & (x - 1) == 0
}

/// Reads `count` bits big-endian from `bits` starting at `pos`, zero-padding
/// past the end.
fn take_bits_be(bits: &[bool], pos: usize, count: usize) -> u16 {
    let mut value = 0u16;
    for i in 0..count {
        value <<= 1;
        if bits.get(pos + i).copied().unwrap_or(false) {
            value |= 1;
        }
    }
    value
}

fn push_bits_be(out: &mut Vec<bool>, value: u16, count: usize) {
    for i in (0..count).rev() {
        out.push(value >> i & 1 == 1);
    }
}

/// Encodes a bitstream densely: compound `i` of each well carries the well's
/// bits `[i·log2 L, (i+1)·log2 L)` as its level, big-endian. The final well
/// is zero-padded and the pad length recorded in the manifest.
pub fn encode_dense(bits: &[bool], library: &CompoundLibrary, levels: u32) -> Result<PlateLayout> {
    if bits.is_empty() {
        return Err(CodecError::EmptyBitstream);
    }
    // Levels are stored as u16, capping L at 2^16.
    if !(2..=1 << 16).contains(&levels) || !is_power_of_two(levels as u64) {
        return Err(CodecError::BadLevelCount(levels));
    }
    let m = library.len();
    let bits_per_compound = levels.ilog2() as usize;
    let bits_per_well = m * bits_per_compound;
    let wells_needed = bits.len().div_ceil(bits_per_well);
    let mut wells = Vec::with_capacity(wells_needed);
    for w in 0..wells_needed {
        let base = w * bits_per_well;
        let levels_vec = (0..m)
            .map(|i| take_bits_be(bits, base + i * bits_per_compound, bits_per_compound))
            .collect();
        wells.push(MixtureState::new(levels_vec));
    }
    let manifest = Manifest {
        scheme: Scheme::Dense,
        library_size: m,
        block_size: 1,
        levels,
        original_bit_length: bits.len(),
        padding_bits: wells_needed * bits_per_well - bits.len(),
        wells: wells_needed,
        wells_per_plate: DEFAULT_WELLS_PER_PLATE,
        well_pitch_mm: DEFAULT_WELL_PITCH_MM,
        library_ref: None,
        image_size: None,
        ecc: None,
    };
    Ok(PlateLayout { manifest, wells })
}

/// Exact inverse of [`encode_dense`]; padding is stripped using the manifest.
pub fn decode_dense(layout: &PlateLayout) -> Result<Vec<bool>> {
    if layout.manifest.scheme != Scheme::Dense {
        return Err(CodecError::SchemeMismatch {
            expected: Scheme::Dense,
            found: layout.manifest.scheme,
        });
    }
    let bits_per_compound = layout.manifest.levels.ilog2() as usize;
    let mut bits = Vec::with_capacity(layout.manifest.original_bit_length);
    for well in &layout.wells {
        for &level in well.levels() {
            push_bits_be(&mut bits, level, bits_per_compound);
        }
    }
    bits.truncate(layout.manifest.original_bit_length);
    Ok(bits)
}

/// Encodes a bitstream sparsely: each block of `S` compounds carries
/// `log2 S` bits big-endian as a one-hot index. Padding blocks select
/// index 0.
pub fn encode_sparse(bits: &[bool], library: &CompoundLibrary) -> Result<PlateLayout> {
    if bits.is_empty() {
        return Err(CodecError::EmptyBitstream);
    }
    let s = library.block_size();
    if s < 2 || !is_power_of_two(s as u64) {
        return Err(CodecError::BadSparsity(s));
    }
    let m = library.len();
    let blocks_per_well = m / s;
    let bits_per_block = s.ilog2() as usize;
    let bits_per_well = blocks_per_well * bits_per_block;
    let wells_needed = bits.len().div_ceil(bits_per_well);
    let mut wells = Vec::with_capacity(wells_needed);
    for w in 0..wells_needed {
        let mut levels = vec![0u16; m];
        let base = w * bits_per_well;
        for b in 0..blocks_per_well {
            let index = take_bits_be(bits, base + b * bits_per_block, bits_per_block) as usize;
            levels[b * s + index] = 1;
        }
        wells.push(MixtureState::new(levels));
    }
    let manifest = Manifest {
        scheme: Scheme::Sparse,
        library_size: m,
        block_size: s,
        levels: 2,
        original_bit_length: bits.len(),
        padding_bits: wells_needed * bits_per_well - bits.len(),
        wells: wells_needed,
        wells_per_plate: DEFAULT_WELLS_PER_PLATE,
        well_pitch_mm: DEFAULT_WELL_PITCH_MM,
        library_ref: None,
        image_size: None,
        ecc: None,
    };
    Ok(PlateLayout { manifest, wells })
}

/// Exact inverse of [`encode_sparse`]. Every block must be one-hot; readout
/// decoders guarantee this by construction, so a violation here means a
/// corrupt or hand-edited layout.
pub fn decode_sparse(layout: &PlateLayout) -> Result<Vec<bool>> {
    if layout.manifest.scheme != Scheme::Sparse {
        return Err(CodecError::SchemeMismatch {
            expected: Scheme::Sparse,
            found: layout.manifest.scheme,
        });
    }
    let s = layout.manifest.block_size;
    let bits_per_block = s.ilog2() as usize;
    let mut bits = Vec::with_capacity(layout.manifest.original_bit_length);
    for (w, well) in layout.wells.iter().enumerate() {
        for (b, block) in well.levels().chunks(s).enumerate() {
            if block.iter().filter(|&&v| v != 0).count() != 1 || block.iter().any(|&v| v > 1) {
                return Err(CodecError::NotOneHot { well: w, block: b });
            }
            let index = block.iter().position(|&v| v == 1).unwrap();
            push_bits_be(&mut bits, index as u16, bits_per_block);
        }
    }
    bits.truncate(layout.manifest.original_bit_length);
    Ok(bits)
}

// ---------------------------------------------------------------------------
// Bit images
// ---------------------------------------------------------------------------

/// A binary raster image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitImage {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl BitImage {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != (width as usize) * (height as usize) {
            return Err(CodecError::ImageSizeMismatch {
                width,
                height,
                got: bits.len(),
            });
        }
        Ok(BitImage {
            width,
            height,
            bits,
        })
    }
}

/// Row-major serialization of an image into a bit vector.
pub fn image_to_bits(image: &BitImage) -> Vec<bool> {
    image.bits.clone()
}

/// Inverse of [`image_to_bits`]; fails if the length does not match.
pub fn bits_to_image(bits: &[bool], width: u32, height: u32) -> Result<BitImage> {
    BitImage::new(width, height, bits.to_vec())
}

/// Writes an image as an ASCII portable bitmap (`P1`).
pub fn write_pbm(image: &BitImage) -> String {
    let mut out = format!("P1\n{} {}\n", image.width, image.height);
    for row in image.bits.chunks(image.width as usize) {
        let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Reads a portable bitmap, accepting both ASCII (`P1`) and binary (`P4`)
/// variants.
pub fn read_pbm(data: &[u8]) -> Result<BitImage> {
    // Header tokens (magic, width, height) are whitespace-separated with
    // `#` comments allowed between them.
    let mut pos = 0usize;
    let mut tokens = Vec::new();
    while tokens.len() < 3 && pos < data.len() {
        while pos < data.len() && (data[pos] as char).is_whitespace() {
            pos += 1;
        }
        if pos < data.len() && data[pos] == b'#' {
            while pos < data.len() && data[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < data.len() && !(data[pos] as char).is_whitespace() {
            pos += 1;
        }
        if pos > start {
            tokens.push(
                std::str::from_utf8(&data[start..pos]).map_err(|_| CodecError::Parse {
                    line: 1,
                    message: "non-UTF8 PBM header".into(),
                })?,
            );
        }
    }
    if tokens.len() < 3 {
        return parse_err(1, "truncated PBM header");
    }
    let magic = tokens[0];
    let width: u32 = tokens[1].parse().map_err(|_| CodecError::Parse {
        line: 1,
        message: "bad PBM width".into(),
    })?;
    let height: u32 = tokens[2].parse().map_err(|_| CodecError::Parse {
        line: 1,
        message: "bad PBM height".into(),
    })?;
    let pixels = (width as usize) * (height as usize);
    match magic {
        "P1" => {
            let body = std::str::from_utf8(&data[pos..]).map_err(|_| CodecError::Parse {
                line: 1,
                message: "non-UTF8 PBM body".into(),
            })?;
            let mut bits = Vec::with_capacity(pixels);
            for ch in body.chars() {
                match ch {
                    '0' => bits.push(false),
                    '1' => bits.push(true),
                    c if c.is_whitespace() => {}
                    other => return parse_err(1, format!("unexpected `{other}` in P1 body")),
                }
            }
            if bits.len() != pixels {
                return parse_err(1, format!("expected {pixels} pixels, found {}", bits.len()));
            }
            BitImage::new(width, height, bits)
        }
        "P4" => {
            // Exactly one whitespace byte separates the header from packed
            // rows, each padded to a whole byte.
            pos += 1;
            let row_bytes = (width as usize).div_ceil(8);
            if data.len() < pos + row_bytes * height as usize {
                return parse_err(1, "truncated P4 pixel data");
            }
            let mut bits = Vec::with_capacity(pixels);
            for row in 0..height as usize {
                let row_data = &data[pos + row * row_bytes..pos + (row + 1) * row_bytes];
                for col in 0..width as usize {
                    bits.push(row_data[col / 8] >> (7 - col % 8) & 1 == 1);
                }
            }
            BitImage::new(width, height, bits)
        }
        other => parse_err(1, format!("unsupported PBM magic `{other}`")),
    }
}

// ---------------------------------------------------------------------------
// Bit files
// ---------------------------------------------------------------------------

/// Writes bits as ASCII `0`/`1`, 64 per line, under a format header.
pub fn write_bits_text(bits: &[bool]) -> String {
    let mut out = String::from("# mixcode bits v1\n");
    for chunk in bits.chunks(64) {
        for &b in chunk {
            out.push(if b { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

/// Reads an ASCII bit file; the header line is optional and whitespace is
/// ignored.
pub fn read_bits_text(text: &str) -> Result<Vec<bool>> {
    let mut bits = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.starts_with('#') {
            continue;
        }
        for ch in line.chars() {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                c if c.is_whitespace() => {}
                other => return parse_err(idx + 1, format!("unexpected `{other}` in bit file")),
            }
        }
    }
    Ok(bits)
}

// ---------------------------------------------------------------------------
// Plate layout file format
// ---------------------------------------------------------------------------

/// Serializes a layout: manifest header (`key: value` lines), a blank line,
/// then one row per well with one integer level per compound.
pub fn write_layout(layout: &PlateLayout) -> String {
    let mut out = manifest_header(&layout.manifest);
    out.push('\n');
    for well in &layout.wells {
        let row: Vec<String> = well.levels().iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

fn manifest_header(manifest: &Manifest) -> String {
    let mut out = String::from("# mixcode layout v1\n");
    let _ = writeln!(out, "scheme: {}", manifest.scheme);
    let _ = writeln!(out, "m: {}", manifest.library_size);
    let _ = writeln!(out, "s: {}", manifest.block_size);
    let _ = writeln!(out, "l: {}", manifest.levels);
    let _ = writeln!(out, "original_bit_length: {}", manifest.original_bit_length);
    let _ = writeln!(out, "padding_bits: {}", manifest.padding_bits);
    let _ = writeln!(out, "wells: {}", manifest.wells);
    let _ = writeln!(out, "wells_per_plate: {}", manifest.wells_per_plate);
    let _ = writeln!(out, "well_pitch_mm: {}", manifest.well_pitch_mm);
    if let Some(library) = &manifest.library_ref {
        let _ = writeln!(out, "library: {library}");
    }
    if let Some((w, h)) = manifest.image_size {
        let _ = writeln!(out, "image_width: {w}");
        let _ = writeln!(out, "image_height: {h}");
    }
    if let Some(ecc) = manifest.ecc {
        let _ = writeln!(out, "ecc_data_bits: {}", ecc.data_bits);
        let _ = writeln!(out, "ecc_codeword_length: {}", ecc.codeword_length);
        if let Some(stride) = ecc.stride {
            let _ = writeln!(out, "ecc_stride: {stride}");
        }
    }
    out
}

/// Writes the manifest alone (header with no well rows) so a decoder can be
/// handed the encoding parameters without the plaintext states.
pub fn write_manifest(manifest: &Manifest) -> String {
    manifest_header(manifest)
}

/// Parses just the manifest header of a layout or manifest file.
pub fn read_manifest(text: &str) -> Result<Manifest> {
    let (manifest, _) = parse_header(text)?;
    Ok(manifest)
}

/// Parses a full layout file, validating row counts, level ranges, and the
/// manifest accounting identity.
pub fn read_layout(text: &str) -> Result<PlateLayout> {
    let (manifest, body_start) = parse_header(text)?;
    let mut wells = Vec::with_capacity(manifest.wells);
    for (idx, raw) in text.lines().enumerate().skip(body_start) {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut levels = Vec::with_capacity(manifest.library_size);
        for field in line.split_whitespace() {
            let v: u16 = field.parse().map_err(|_| CodecError::Parse {
                line: idx + 1,
                message: format!("bad level `{field}`"),
            })?;
            if u32::from(v) >= manifest.levels {
                return parse_err(
                    idx + 1,
                    format!("level {v} out of range for L = {}", manifest.levels),
                );
            }
            levels.push(v);
        }
        if levels.len() != manifest.library_size {
            return parse_err(
                idx + 1,
                format!(
                    "expected {} levels per well, found {}",
                    manifest.library_size,
                    levels.len()
                ),
            );
        }
        wells.push(MixtureState::new(levels));
    }
    if wells.len() != manifest.wells {
        return Err(CodecError::BadManifest(format!(
            "manifest declares {} wells but file has {}",
            manifest.wells,
            wells.len()
        )));
    }
    manifest.validate()?;
    Ok(PlateLayout { manifest, wells })
}

/// Parses the `key: value` header; returns the manifest and the line index
/// where well rows begin.
fn parse_header(text: &str) -> Result<(Manifest, usize)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim() == "# mixcode layout v1" => {}
        _ => return parse_err(1, "expected `# mixcode layout v1` header"),
    }
    let mut scheme = None;
    let mut m = None;
    let mut s = None;
    let mut l = None;
    let mut original = None;
    let mut padding = None;
    let mut wells = None;
    let mut wells_per_plate = DEFAULT_WELLS_PER_PLATE;
    let mut well_pitch_mm = DEFAULT_WELL_PITCH_MM;
    let mut library_ref = None;
    let mut image_w = None;
    let mut image_h = None;
    let mut ecc_data_bits = None;
    let mut ecc_codeword_length = None;
    let mut ecc_stride = None;
    let mut body_start = 0;
    for (idx, raw) in lines {
        let line = raw.trim();
        let lineno = idx + 1;
        if line.is_empty() {
            body_start = idx + 1;
            break;
        }
        let Some((key, value)) = line.split_once(':') else {
            return parse_err(lineno, "expected `key: value`");
        };
        let value = value.trim();
        macro_rules! num {
            () => {
                value.parse().map_err(|_| CodecError::Parse {
                    line: lineno,
                    message: format!("bad value `{value}` for `{}`", key.trim()),
                })?
            };
        }
        match key.trim() {
            "scheme" => {
                scheme = Some(value.parse::<Scheme>().map_err(|e| CodecError::Parse {
                    line: lineno,
                    message: e,
                })?)
            }
            "m" => m = Some(num!()),
            "s" => s = Some(num!()),
            "l" => l = Some(num!()),
            "original_bit_length" => original = Some(num!()),
            "padding_bits" => padding = Some(num!()),
            "wells" => wells = Some(num!()),
            "wells_per_plate" => wells_per_plate = num!(),
            "well_pitch_mm" => well_pitch_mm = num!(),
            "library" => library_ref = Some(value.to_string()),
            "image_width" => image_w = Some(num!()),
            "image_height" => image_h = Some(num!()),
            "ecc_data_bits" => ecc_data_bits = Some(num!()),
            "ecc_codeword_length" => ecc_codeword_length = Some(num!()),
            "ecc_stride" => ecc_stride = Some(num!()),
            other => return parse_err(lineno, format!("unknown manifest key `{other}`")),
        }
    }
    let missing = |field: &str| CodecError::BadManifest(format!("missing `{field}`"));
    let manifest = Manifest {
        scheme: scheme.ok_or_else(|| missing("scheme"))?,
        library_size: m.ok_or_else(|| missing("m"))?,
        block_size: s.ok_or_else(|| missing("s"))?,
        levels: l.ok_or_else(|| missing("l"))?,
        original_bit_length: original.ok_or_else(|| missing("original_bit_length"))?,
        padding_bits: padding.ok_or_else(|| missing("padding_bits"))?,
        wells: wells.ok_or_else(|| missing("wells"))?,
        wells_per_plate,
        well_pitch_mm,
        library_ref,
        image_size: match (image_w, image_h) {
            (Some(w), Some(h)) => Some((w, h)),
            _ => None,
        },
        ecc: match (ecc_data_bits, ecc_codeword_length) {
            (Some(data_bits), Some(codeword_length)) => Some(EccManifest {
                data_bits,
                codeword_length,
                stride: ecc_stride,
            }),
            _ => None,
        },
    };
    Ok((manifest, body_start))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
