//! Channel coding over mixture bits.
//!
//! Readout turns each well into a handful of bits; errors in those bits are
//! tamed by spreading data across codewords whose rate stays below the
//! confusion-limited capacity (`log2 |c| / N_c < C'`). This module provides:
//!
//! - [`Codebook`] — valid codewords of length `N_c`, held either as an
//!   explicit sorted list or as a linear-code parity-check matrix over GF(2)
//!   with a membership test.
//! - A systematic Hamming(7,4) code with syndrome decoding. Generator
//!   `G = [I4 | P]` with `P` rows `110`, `101`, `011`, `111`, and parity
//!   check `H = [Pᵀ | I3]`; any single bit flip is corrected exactly.
//! - [`grand_decode`] — noise guessing: error patterns are tried in
//!   maximum-likelihood order (non-decreasing Hamming weight, ties broken
//!   lexicographically) until `received ⊕ pattern` lands in the codebook or
//!   the guess budget runs out.
//! - [`ecc_encode`] / [`ecc_decode`] — chunk a payload through a codebook
//!   and back, with an optional block interleaver, for chaining with either
//!   plate codec scheme.
//!
//! Codewords of length `n ≤ 32` are packed into `u32`s with string position
//! `i` stored at integer bit `n-1-i`, so numeric order within a weight class
//! is exactly lexicographic order on the bit strings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

/// Longest supported codeword, set by the `u32` packing.
pub const MAX_CODEWORD_LENGTH: usize = 32;

#[derive(Debug, Error)]
pub enum EccError {
    #[error("codeword length {0} must lie in 1..={MAX_CODEWORD_LENGTH}")]
    BadCodewordLength(usize),
    #[error("codebook is empty")]
    EmptyCodebook,
    #[error("codeword {word:0width$b} repeated in explicit codebook", width = 1)]
    DuplicateCodeword { word: u32 },
    #[error("parity-check matrix has dependent rows (rank {rank} < {rows})")]
    RankDeficient { rank: usize, rows: usize },
    #[error("codebook holds {size} codewords, expected 2^{k}")]
    SizeMismatch { size: u64, k: usize },
    #[error("data chunk of {got} bits does not match the code's {want} data bits")]
    DataBitsMismatch { got: usize, want: usize },
    #[error("codebook cannot encode: explicit size is not a power of two")]
    NotEncodable,
    #[error("coded stream of {0} bits is not a whole number of codewords")]
    RaggedCodedStream(usize),
    #[error("interleave stride must be at least 1")]
    BadStride,
    #[error("guess budget must be at least 1")]
    ZeroBudget,
    #[error("code dimensions k = {k} must be less than n = {n}")]
    BadCodeDimensions { n: usize, k: usize },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

type Result<T> = std::result::Result<T, EccError>;

// ---------------------------------------------------------------------------
// Bit packing helpers
// ---------------------------------------------------------------------------

/// Packs a bit string into a word: position 0 (leftmost) at bit `n-1`.
pub fn pack_word(bits: &[bool]) -> u32 {
    bits.iter().fold(0, |acc, &b| acc << 1 | u32::from(b))
}

/// Unpacks a word into `n` bits, leftmost first.
pub fn unpack_word(word: u32, n: usize) -> Vec<bool> {
    (0..n).rev().map(|i| word >> i & 1 == 1).collect()
}

fn word_to_string(word: u32, n: usize) -> String {
    (0..n)
        .rev()
        .map(|i| if word >> i & 1 == 1 { '1' } else { '0' })
        .collect()
}

// ---------------------------------------------------------------------------
// Codebooks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum CodebookKind {
    /// Sorted, deduplicated list of codewords.
    Explicit { codewords: Vec<u32> },
    /// Linear code given by parity-check rows, plus the reduced form used
    /// for systematic encoding over the information set (the free columns).
    Linear {
        parity_rows: Vec<u32>,
        rref_rows: Vec<u32>,
        pivot_cols: Vec<usize>,
        free_cols: Vec<usize>,
    },
}

/// Valid codewords of length `N_c` with a membership oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    n: usize,
    kind: CodebookKind,
}

impl Codebook {
    pub fn explicit(n: usize, mut codewords: Vec<u32>) -> Result<Self> {
        check_length(n)?;
        if codewords.is_empty() {
            return Err(EccError::EmptyCodebook);
        }
        let mask = word_mask(n);
        if let Some(&w) = codewords.iter().find(|&&w| w & !mask != 0) {
            return Err(EccError::Parse {
                line: 0,
                message: format!("codeword {w:b} wider than n = {n}"),
            });
        }
        codewords.sort_unstable();
        if let Some(pair) = codewords.windows(2).find(|w| w[0] == w[1]) {
            return Err(EccError::DuplicateCodeword { word: pair[0] });
        }
        Ok(Codebook {
            n,
            kind: CodebookKind::Explicit { codewords },
        })
    }

    /// Builds a linear codebook from parity-check rows. The rows must be
    /// independent; `k = n - rows`.
    pub fn linear(n: usize, parity_rows: Vec<u32>) -> Result<Self> {
        check_length(n)?;
        if parity_rows.len() >= n {
            return Err(EccError::RankDeficient {
                rank: 0,
                rows: parity_rows.len(),
            });
        }
        let (rref_rows, pivot_cols) = rref(&parity_rows, n);
        if rref_rows.len() != parity_rows.len() {
            return Err(EccError::RankDeficient {
                rank: rref_rows.len(),
                rows: parity_rows.len(),
            });
        }
        let free_cols: Vec<usize> = (0..n).filter(|c| !pivot_cols.contains(c)).collect();
        Ok(Codebook {
            n,
            kind: CodebookKind::Linear {
                parity_rows,
                rref_rows,
                pivot_cols,
                free_cols,
            },
        })
    }

    /// The systematic Hamming(7,4) code: `H = [Pᵀ | I3]` with `P` rows
    /// `110`, `101`, `011`, `111`.
    #[allow(clippy::unusual_byte_groupings)] // grouped at the data|parity boundary
    pub fn hamming74() -> Self {
        let h = [
            0b1101_100u32, // 1101|100
            0b1011_010u32, // 1011|010
            0b0111_001u32, // 0111|001
        ];
        Codebook::linear(7, h.to_vec()).expect("hamming parity rows are independent")
    }

    /// A random full-rank linear code for tests and experiments.
    pub fn random_linear(n: usize, k: usize, seed: u64) -> Result<Self> {
        check_length(n)?;
        if k >= n {
            return Err(EccError::RankDeficient {
                rank: 0,
                rows: n - k,
            });
        }
        let rows = n - k;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mask = word_mask(n);
        loop {
            let candidate: Vec<u32> = (0..rows).map(|_| rng.random::<u32>() & mask).collect();
            if rref(&candidate, n).0.len() == rows {
                return Codebook::linear(n, candidate);
            }
        }
    }

    pub fn codeword_length(&self) -> usize {
        self.n
    }

    /// Number of valid codewords `|c|`.
    pub fn size(&self) -> u64 {
        match &self.kind {
            CodebookKind::Explicit { codewords } => codewords.len() as u64,
            CodebookKind::Linear { rref_rows, .. } => 1u64 << (self.n - rref_rows.len()),
        }
    }

    /// `log2 |c|`, the numerator of the code rate.
    pub fn log2_size(&self) -> f64 {
        match &self.kind {
            CodebookKind::Explicit { codewords } => (codewords.len() as f64).log2(),
            CodebookKind::Linear { rref_rows, .. } => (self.n - rref_rows.len()) as f64,
        }
    }

    /// Data bits per codeword, when the size is an exact power of two.
    pub fn data_bits(&self) -> Option<usize> {
        match &self.kind {
            CodebookKind::Explicit { codewords } => {
                let size = codewords.len();
                size.is_power_of_two()
                    .then(|| size.trailing_zeros() as usize)
            }
            CodebookKind::Linear { rref_rows, .. } => Some(self.n - rref_rows.len()),
        }
    }

    /// Membership test.
    pub fn contains(&self, word: u32) -> bool {
        match &self.kind {
            CodebookKind::Explicit { codewords } => codewords.binary_search(&word).is_ok(),
            CodebookKind::Linear { parity_rows, .. } => parity_rows
                .iter()
                .all(|&row| (row & word).count_ones().is_multiple_of(2)),
        }
    }

    /// Maps `k` data bits onto a codeword. For linear codes the data bits
    /// occupy the free columns in ascending order; for explicit codebooks
    /// the data value indexes the sorted codeword list.
    pub fn encode_word(&self, data: &[bool]) -> Result<u32> {
        let k = self.data_bits().ok_or(EccError::NotEncodable)?;
        if data.len() != k {
            return Err(EccError::DataBitsMismatch {
                got: data.len(),
                want: k,
            });
        }
        match &self.kind {
            CodebookKind::Explicit { codewords } => {
                let index = data
                    .iter()
                    .fold(0usize, |acc, &b| acc << 1 | usize::from(b));
                Ok(codewords[index])
            }
            CodebookKind::Linear {
                rref_rows,
                pivot_cols,
                free_cols,
                ..
            } => {
                let mut word = 0u32;
                for (&col, &bit) in free_cols.iter().zip(data) {
                    if bit {
                        word |= col_bit(col, self.n);
                    }
                }
                for (&row, &pivot) in rref_rows.iter().zip(pivot_cols) {
                    if (row & word).count_ones() % 2 == 1 {
                        word |= col_bit(pivot, self.n);
                    }
                }
                Ok(word)
            }
        }
    }

    /// Recovers the data bits a codeword carries (inverse of
    /// [`Codebook::encode_word`]).
    pub fn extract_data(&self, word: u32) -> Result<Vec<bool>> {
        let k = self.data_bits().ok_or(EccError::NotEncodable)?;
        match &self.kind {
            CodebookKind::Explicit { codewords } => {
                let index = codewords
                    .binary_search(&word)
                    .unwrap_or_else(|insert| insert.min(codewords.len() - 1));
                Ok((0..k).rev().map(|i| index >> i & 1 == 1).collect())
            }
            CodebookKind::Linear { free_cols, .. } => Ok(free_cols
                .iter()
                .map(|&col| word & col_bit(col, self.n) != 0)
                .collect()),
        }
    }

    /// All codewords, for oracles and small codes only.
    pub fn enumerate(&self) -> Vec<u32> {
        match &self.kind {
            CodebookKind::Explicit { codewords } => codewords.clone(),
            CodebookKind::Linear { .. } => {
                let k = self.data_bits().expect("linear codes always have k");
                (0..1u64 << k)
                    .map(|v| {
                        let data: Vec<bool> = (0..k).rev().map(|i| v >> i & 1 == 1).collect();
                        self.encode_word(&data).expect("in-range data")
                    })
                    .collect()
            }
        }
    }

    // -- file format --------------------------------------------------------

    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("# mixcode codebook v1\n");
        match &self.kind {
            CodebookKind::Explicit { codewords } => {
                let k = self.data_bits().map_or(0, |k| k);
                let _ = writeln!(out, "type: explicit\nn: {}\nk: {k}", self.n);
                for &word in codewords {
                    let _ = writeln!(out, "{}", word_to_string(word, self.n));
                }
            }
            CodebookKind::Linear { parity_rows, .. } => {
                let k = self.n - parity_rows.len();
                let _ = writeln!(out, "type: linear\nn: {}\nk: {k}", self.n);
                for &row in parity_rows {
                    let _ = writeln!(out, "{}", word_to_string(row, self.n));
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, first)) if first.trim() == "# mixcode codebook v1" => {}
            _ => {
                return Err(EccError::Parse {
                    line: 1,
                    message: "expected `# mixcode codebook v1` header".into(),
                })
            }
        }
        let mut kind: Option<String> = None;
        let mut n: Option<usize> = None;
        let mut k: Option<usize> = None;
        let mut rows: Vec<u32> = Vec::new();
        for (idx, raw) in lines {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            if let Some((key, value)) = line.split_once(':') {
                let value = value.trim();
                match key.trim() {
                    "type" => kind = Some(value.to_string()),
                    "n" => {
                        n = Some(value.parse().map_err(|_| EccError::Parse {
                            line: lineno,
                            message: "bad n".into(),
                        })?)
                    }
                    "k" => {
                        k = Some(value.parse().map_err(|_| EccError::Parse {
                            line: lineno,
                            message: "bad k".into(),
                        })?)
                    }
                    other => {
                        return Err(EccError::Parse {
                            line: lineno,
                            message: format!("unknown codebook key `{other}`"),
                        })
                    }
                }
                continue;
            }
            let n = n.ok_or(EccError::Parse {
                line: lineno,
                message: "n must precede rows".into(),
            })?;
            if line.len() != n || !line.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(EccError::Parse {
                    line: lineno,
                    message: format!("expected a {n}-character 0/1 row"),
                });
            }
            rows.push(
                line.bytes()
                    .fold(0u32, |acc, b| acc << 1 | u32::from(b == b'1')),
            );
        }
        let missing = |what: &str| EccError::Parse {
            line: 0,
            message: format!("missing `{what}`"),
        };
        let kind = kind.ok_or_else(|| missing("type"))?;
        let n = n.ok_or_else(|| missing("n"))?;
        let k = k.ok_or_else(|| missing("k"))?;
        match kind.as_str() {
            "explicit" => {
                let book = Codebook::explicit(n, rows)?;
                if book.size() != 1u64 << k {
                    return Err(EccError::SizeMismatch {
                        size: book.size(),
                        k,
                    });
                }
                Ok(book)
            }
            "linear" => {
                if rows.len() != n - k {
                    return Err(EccError::Parse {
                        line: 0,
                        message: format!(
                            "linear codebook needs n-k = {} parity rows, found {}",
                            n - k,
                            rows.len()
                        ),
                    });
                }
                Codebook::linear(n, rows)
            }
            other => Err(EccError::Parse {
                line: 0,
                message: format!("unknown codebook type `{other}`"),
            }),
        }
    }
}

fn check_length(n: usize) -> Result<()> {
    if n == 0 || n > MAX_CODEWORD_LENGTH {
        return Err(EccError::BadCodewordLength(n));
    }
    Ok(())
}

fn word_mask(n: usize) -> u32 {
    if n == 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

/// Integer bit holding string column `col` of an `n`-bit word.
fn col_bit(col: usize, n: usize) -> u32 {
    1u32 << (n - 1 - col)
}

/// Reduced row echelon form over GF(2); returns the nonzero rows and their
/// pivot columns. Pivots are taken from the rightmost columns so that a
/// standard-form `H = [A | I]` keeps its data positions in the leading
/// columns (the free columns become the information set for encoding).
fn rref(rows: &[u32], n: usize) -> (Vec<u32>, Vec<usize>) {
    let mut work: Vec<u32> = rows.to_vec();
    let mut pivots = Vec::new();
    let mut rank = 0usize;
    for col in (0..n).rev() {
        let bit = col_bit(col, n);
        let Some(pivot_row) = (rank..work.len()).find(|&r| work[r] & bit != 0) else {
            continue;
        };
        work.swap(rank, pivot_row);
        for r in 0..work.len() {
            if r != rank && work[r] & bit != 0 {
                work[r] ^= work[rank];
            }
        }
        pivots.push(col);
        rank += 1;
        if rank == work.len() {
            break;
        }
    }
    work.truncate(rank);
    (work, pivots)
}

// ---------------------------------------------------------------------------
// Rate admissibility
// ---------------------------------------------------------------------------

/// The channel-coding bound `log2 |c| / N_c < C'` (capacities per channel
/// use).
pub fn rate_admissible(code_size_log2: f64, codeword_length: usize, c_prime_per_use: f64) -> bool {
    code_size_log2 / (codeword_length as f64) < c_prime_per_use
}

// ---------------------------------------------------------------------------
// Hamming(7,4)
// ---------------------------------------------------------------------------

// P rows of G = [I4 | P]; data bit i contributes parity pattern P[i].
const HAMMING_P: [u32; 4] = [0b110, 0b101, 0b011, 0b111];

/// Encodes 4 data bits (`data < 16`, bit 3 first) into a systematic 7-bit
/// codeword `[d1 d2 d3 d4 p1 p2 p3]`.
pub fn hamming74_encode(data: u32) -> u32 {
    debug_assert!(data < 16);
    let mut parity = 0u32;
    for (i, &p) in HAMMING_P.iter().enumerate() {
        if data >> (3 - i) & 1 == 1 {
            parity ^= p;
        }
    }
    data << 3 | parity
}

/// Syndrome-decodes a 7-bit word to its 4 data bits, correcting any single
/// flip; with two or more flips it returns the (wrong) nearest codeword's
/// data, which is the code's documented behaviour.
pub fn hamming74_decode(word: u32) -> u32 {
    debug_assert!(word < 128);
    // Syndrome = H·word with H = [Pᵀ | I3].
    let mut syndrome = word & 0b111;
    for (i, &p) in HAMMING_P.iter().enumerate() {
        if word >> (6 - i) & 1 == 1 {
            syndrome ^= p;
        }
    }
    let corrected = if syndrome == 0 {
        word
    } else {
        // The syndrome equals the H column of the flipped position: data
        // columns carry P rows, parity columns the identity.
        let position = HAMMING_P
            .iter()
            .position(|&p| p == syndrome)
            .map(|i| 6 - i)
            .unwrap_or_else(|| syndrome.trailing_zeros() as usize);
        word ^ 1 << position
    };
    corrected >> 3
}

// ---------------------------------------------------------------------------
// Noise guessing
// ---------------------------------------------------------------------------

/// Enumeration order for noise patterns: non-decreasing Hamming weight,
/// lexicographic within each weight, capped by a guess budget.
///
/// This is the maximum-likelihood order for an independent bit-flip channel
/// with flip probability below one half.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseGuessOrder {
    codeword_length: usize,
    guess_budget: u64,
}

impl NoiseGuessOrder {
    pub fn new(codeword_length: usize, guess_budget: u64) -> Result<Self> {
        check_length(codeword_length)?;
        if guess_budget == 0 {
            return Err(EccError::ZeroBudget);
        }
        Ok(NoiseGuessOrder {
            codeword_length,
            guess_budget,
        })
    }

    /// Default budget: every pattern of weight at most 3.
    pub fn default_for(codeword_length: usize) -> Result<Self> {
        let n = codeword_length as u64;
        let budget = 1 + n + n * (n - 1) / 2 + n * (n - 1) * (n - 2) / 6;
        Self::new(codeword_length, budget)
    }

    /// Budget large enough to enumerate every pattern.
    pub fn exhaustive(codeword_length: usize) -> Result<Self> {
        check_length(codeword_length)?;
        Self::new(codeword_length, 1u64 << codeword_length)
    }

    pub fn guess_budget(&self) -> u64 {
        self.guess_budget
    }

    pub fn iter(&self) -> NoiseGuessIter {
        NoiseGuessIter {
            n: self.codeword_length as u32,
            weight: 0,
            current: 0,
            remaining: self.guess_budget,
        }
    }
}

/// Iterator over noise patterns in guessing order.
pub struct NoiseGuessIter {
    n: u32,
    weight: u32,
    current: u64,
    remaining: u64,
}

impl Iterator for NoiseGuessIter {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        if self.remaining == 0 || self.weight > self.n {
            return None;
        }
        let emitted = self.current as u32;
        self.remaining -= 1;
        // Advance: Gosper's hack within the weight class, then the smallest
        // pattern of the next weight.
        let advance_weight = if self.current == 0 {
            true
        } else {
            let c = self.current;
            let u = c & c.wrapping_neg();
            let v = c + u;
            let next = v + (((v ^ c) / u) >> 2);
            if next < 1u64 << self.n {
                self.current = next;
                false
            } else {
                true
            }
        };
        if advance_weight {
            self.weight += 1;
            if self.weight <= self.n {
                self.current = (1u64 << self.weight) - 1;
            }
        }
        Some(emitted)
    }
}

/// Outcome of a noise-guessing decode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrandOutcome {
    /// A codebook member was reached; `guesses_used` counts patterns tried
    /// including the successful one.
    Decoded { codeword: u32, guesses_used: u64 },
    /// The guess budget ran out — a distinguished non-error outcome.
    Abandoned { guesses_used: u64 },
}

/// Guesses noise patterns in maximum-likelihood order and returns the first
/// `received ⊕ pattern` that is a codebook member.
///
/// For flip probability below one half, a hit within budget is a
/// maximum-likelihood decode.
pub fn grand_decode(received: u32, codebook: &Codebook, order: &NoiseGuessOrder) -> GrandOutcome {
    let mut guesses_used = 0u64;
    for pattern in order.iter() {
        guesses_used += 1;
        let candidate = received ^ pattern;
        if codebook.contains(candidate) {
            return GrandOutcome::Decoded {
                codeword: candidate,
                guesses_used,
            };
        }
    }
    GrandOutcome::Abandoned { guesses_used }
}

// ---------------------------------------------------------------------------
// Payload pipeline
// ---------------------------------------------------------------------------

/// Block-interleaver read order: positions written row-major into `stride`
/// columns and read column-major. A bijection for any length.
fn interleave_indices(len: usize, stride: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(len);
    for col in 0..stride {
        let mut j = col;
        while j < len {
            order.push(j);
            j += stride;
        }
    }
    order
}

/// Applies the block interleaver to a coded stream.
pub fn interleave(coded: &[bool], stride: Option<usize>) -> Result<Vec<bool>> {
    match stride {
        None | Some(1) => Ok(coded.to_vec()),
        Some(0) => Err(EccError::BadStride),
        Some(s) => {
            let order = interleave_indices(coded.len(), s);
            Ok(order.into_iter().map(|j| coded[j]).collect())
        }
    }
}

/// Inverse of [`interleave`].
pub fn deinterleave(coded: &[bool], stride: Option<usize>) -> Result<Vec<bool>> {
    match stride {
        None | Some(1) => Ok(coded.to_vec()),
        Some(0) => Err(EccError::BadStride),
        Some(s) => {
            let order = interleave_indices(coded.len(), s);
            let mut out = vec![false; coded.len()];
            for (read_pos, &write_pos) in order.iter().enumerate() {
                out[write_pos] = coded[read_pos];
            }
            Ok(out)
        }
    }
}

/// Encodes a payload through the codebook: zero-padded to whole data blocks,
/// each block mapped to a codeword, then optionally interleaved.
pub fn ecc_encode(data: &[bool], codebook: &Codebook, stride: Option<usize>) -> Result<Vec<bool>> {
    let k = codebook.data_bits().ok_or(EccError::NotEncodable)?;
    let n = codebook.codeword_length();
    let blocks = data.len().div_ceil(k).max(1);
    let mut coded = Vec::with_capacity(blocks * n);
    for b in 0..blocks {
        let chunk: Vec<bool> = (0..k)
            .map(|i| data.get(b * k + i).copied().unwrap_or(false))
            .collect();
        let word = codebook.encode_word(&chunk)?;
        coded.extend(unpack_word(word, n));
    }
    interleave(&coded, stride)
}

/// Per-block decode statistics from [`ecc_decode`].
#[derive(Debug, Clone, PartialEq)]
pub struct EccDecodeReport {
    pub data: Vec<bool>,
    /// Guesses spent on each block, in block order.
    pub guesses: Vec<u64>,
    /// Blocks abandoned within budget; their received words were taken
    /// as-is.
    pub abandoned_blocks: usize,
}

/// Decodes a coded stream back to `data_len` payload bits via noise
/// guessing.
pub fn ecc_decode(
    coded: &[bool],
    data_len: usize,
    codebook: &Codebook,
    stride: Option<usize>,
    order: &NoiseGuessOrder,
) -> Result<EccDecodeReport> {
    let n = codebook.codeword_length();
    let deinterleaved = deinterleave(coded, stride)?;
    if deinterleaved.len() % n != 0 {
        return Err(EccError::RaggedCodedStream(deinterleaved.len()));
    }
    let mut data = Vec::with_capacity(data_len);
    let mut guesses = Vec::with_capacity(deinterleaved.len() / n);
    let mut abandoned_blocks = 0usize;
    for block in deinterleaved.chunks(n) {
        let received = pack_word(block);
        let word = match grand_decode(received, codebook, order) {
            GrandOutcome::Decoded {
                codeword,
                guesses_used,
            } => {
                guesses.push(guesses_used);
                codeword
            }
            GrandOutcome::Abandoned { guesses_used } => {
                guesses.push(guesses_used);
                abandoned_blocks += 1;
                received
            }
        };
        data.extend(codebook.extract_data(word)?);
    }
    data.truncate(data_len);
    Ok(EccDecodeReport {
        data,
        guesses,
        abandoned_blocks,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
