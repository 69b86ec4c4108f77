//! Information capacity and write-energy bounds for molecular mixture memories.
//!
//! A mixture drawn from a library of `M` distinguishable molecules can sit in
//! one of `Ω` states, bounding its capacity at `log2 Ω` bits. This module
//! evaluates that bound for the four mixture regimes:
//!
//! - `C1(M, Q)` — unordered mixtures of up to `Q` molecules with duplication,
//!   `Ω = Σ_{q=0..Q} C(M+q-1, M-1) = C(M+Q, M)`
//! - `C2(M, Q)` — the same without duplication, `Ω = Σ_{q=0..Q} C(M, q)`,
//!   saturating at `M` bits when `Q = M`
//! - `C3(M, L)` — presence refined to one of `L` concentration levels,
//!   `M·log2 L` bits
//! - `C4(M, S)` — sparse one-hot mixtures with exactly one molecule per block
//!   of `S`, `(M/S)·log2 S` bits
//!
//! plus the confusion-limited capacity `C'` of a noisy readout channel, the
//! binary entropy function, per-bit write-energy figures, and the
//! library-vs-wells partition optimum.
//!
//! State counts are exact arbitrary-precision integers while `M + Q` stays at
//! or below [`EXACT_STATE_LIMIT`]; beyond that everything moves to the log2
//! domain through the log-gamma function, which is what lets library sizes
//! like `4^40` be evaluated in microseconds.
//!
//! ## Example
//!
//! ```
//! use mixcode::capacity::{capacity_c2, capacity_c4};
//!
//! // A 256-compound library at sparsity 16 carries 16 * log2(16) bits.
//! let sparse = capacity_c4(256, 16).unwrap();
//! assert_eq!(sparse.bits, 64.0);
//!
//! // The dense presence/absence bound for the same library is far larger.
//! let dense = capacity_c2(256, 256).unwrap();
//! assert_eq!(dense.bits, 256.0);
//! ```

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

/// Largest `M + Q` for which state counts are computed as exact big integers.
pub const EXACT_STATE_LIMIT: u128 = 10_000;

const LN_2: f64 = std::f64::consts::LN_2;

/// Errors raised by capacity-domain preconditions.
#[derive(Debug, Error, PartialEq)]
pub enum CapacityError {
    #[error("library size M must be at least 1")]
    EmptyLibrary,
    #[error("selection bound Q = {q} exceeds library size M = {m} without duplication")]
    SelectionExceedsLibrary { m: u128, q: u128 },
    #[error("level count L must be at least 2, got {0}")]
    TooFewLevels(u32),
    #[error("sparsity S = {s} does not divide library size M = {m}")]
    SparsityDoesNotDivide { m: u128, s: u128 },
    #[error("sparsity S must be at least 1")]
    ZeroSparsity,
    #[error("correct-identification probability must lie in (0, 1], got {0}")]
    ConfusionProbabilityOutOfRange(f64),
    #[error("state count must be at least 2 for a confusion-limited capacity")]
    TooFewStates,
    #[error("entropy argument must lie in [0, 1], got {0}")]
    EntropyArgOutOfRange(f64),
    #[error("monomer alphabet must have at least 2 symbols, got {0}")]
    TooFewMonomers(u32),
    #[error("energy coefficients must be non-negative")]
    NegativeEnergy,
    #[error("well count W must be at least 1")]
    ZeroWells,
    #[error("partition target capacity must be at least 1 and finite, got {0}")]
    PartitionTargetInvalid(f64),
    #[error("address positions A = {a} exceed polymer length N = {n}")]
    AddressTooLong { a: u32, n: u32 },
    #[error("polymer length N must be at least 1")]
    ZeroLength,
}

type Result<T> = std::result::Result<T, CapacityError>;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Qualifier attached to a [`CapacityValue`] when the plain number needs care.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityFlag {
    /// Sparsity `S = 1` — every library molecule is present, the one-hot
    /// formula collapses to 0 bits, and the dense bound `C2(M, M)` is the
    /// relevant figure instead.
    DegenerateSparsity,
    /// The raw confusion-limited expression came out (numerically) below
    /// zero and was clamped; capacity cannot be negative.
    ClampedNonNegative,
}

/// A capacity figure in bits, with the exact state count attached whenever it
/// was computed exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityValue {
    /// Capacity upper bound in bits.
    pub bits: f64,
    /// `Ω`, present when the exact big-integer route was taken.
    pub exact_state_count: Option<BigUint>,
    /// Degenerate or clamped-result qualifier, if any.
    pub flag: Option<CapacityFlag>,
}

impl CapacityValue {
    fn from_exact(omega: BigUint) -> Self {
        CapacityValue {
            bits: log2_biguint(&omega),
            exact_state_count: Some(omega),
            flag: None,
        }
    }

    fn from_bits(bits: f64) -> Self {
        CapacityValue {
            bits,
            exact_state_count: None,
            flag: None,
        }
    }
}

/// Parameter bundle describing one mixture regime.
///
/// Groups the knobs the four capacity expressions draw from so they can be
/// validated together before any evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixtureRegime {
    /// `M`, number of distinguishable library molecules.
    pub library_size: u128,
    /// `Q`, upper bound on how many molecules one mixture may hold.
    pub max_select: u128,
    /// Whether a molecule may appear more than once (`C1` vs `C2`).
    pub allow_duplicates: bool,
    /// `L`, distinguishable concentration levels per molecule.
    pub levels: u32,
    /// `S`, one-hot block size for sparse coding.
    pub sparsity: u128,
}

impl MixtureRegime {
    pub fn validate(&self) -> Result<()> {
        if self.library_size == 0 {
            return Err(CapacityError::EmptyLibrary);
        }
        if !self.allow_duplicates && self.max_select > self.library_size {
            return Err(CapacityError::SelectionExceedsLibrary {
                m: self.library_size,
                q: self.max_select,
            });
        }
        if self.levels < 2 {
            return Err(CapacityError::TooFewLevels(self.levels));
        }
        if self.sparsity == 0 {
            return Err(CapacityError::ZeroSparsity);
        }
        if !self.library_size.is_multiple_of(self.sparsity) {
            return Err(CapacityError::SparsityDoesNotDivide {
                m: self.library_size,
                s: self.sparsity,
            });
        }
        Ok(())
    }
}

/// A linear polymer family: `B` monomer types, chains of length `N`, with the
/// first `A` positions reserved as an address.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolymerSpec {
    /// Monomer alphabet size `B` (4 for DNA, 20 for proteins).
    pub alphabet_size: u32,
    /// Chain length `N` in monomers.
    pub length: u32,
    /// Address positions `A`, `0 ≤ A ≤ N`.
    pub address_positions: u32,
}

impl PolymerSpec {
    pub fn new(alphabet_size: u32, length: u32, address_positions: u32) -> Result<Self> {
        if alphabet_size < 2 {
            return Err(CapacityError::TooFewMonomers(alphabet_size));
        }
        if length == 0 {
            return Err(CapacityError::ZeroLength);
        }
        if address_positions > length {
            return Err(CapacityError::AddressTooLong {
                a: address_positions,
                n: length,
            });
        }
        Ok(PolymerSpec {
            alphabet_size,
            length,
            address_positions,
        })
    }

    /// `M = B^N`, the number of distinct chains, exactly.
    pub fn library_size(&self) -> BigUint {
        BigUint::from(self.alphabet_size).pow(self.length)
    }

    /// `S = B^(N-A)`, the payload space shared by each address, exactly.
    pub fn sparsity(&self) -> BigUint {
        BigUint::from(self.alphabet_size).pow(self.length - self.address_positions)
    }

    /// Capacity of a single chain: `log2 M = N·log2 B` bits.
    pub fn single_molecule_bits(&self) -> f64 {
        f64::from(self.length) * f64::from(self.alphabet_size).log2()
    }
}

/// Result of mapping a polymer address/payload split onto mixture sparsity.
#[derive(Debug, Clone, PartialEq)]
pub struct AddressPayload {
    /// `B^A` — how many address slots the library is subdivided into.
    pub num_addresses: BigUint,
    /// `S = B^(N-A)` — payload choices per address slot.
    pub sparsity: BigUint,
    /// One sparse mixture carries `B^A · (N-A) · log2 B` bits.
    pub bits_per_mixture: f64,
    /// True when `A = N` (sparsity 1): the one-hot formula degenerates and
    /// the dense `C2` bound applies instead.
    pub degenerate: bool,
}

/// Marginal write-energy coefficients for one storage design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModel {
    /// Energy per monomer incorporation.
    pub epsilon: f64,
    /// Energy per fluid-handling / mixing action.
    pub gamma: f64,
    /// Number of independent wells.
    pub wells: u64,
}

impl EnergyModel {
    pub fn new(epsilon: f64, gamma: f64, wells: u64) -> Result<Self> {
        if epsilon.is_nan() || epsilon < 0.0 || gamma.is_nan() || gamma < 0.0 {
            return Err(CapacityError::NegativeEnergy);
        }
        if wells == 0 {
            return Err(CapacityError::ZeroWells);
        }
        Ok(EnergyModel {
            epsilon,
            gamma,
            wells,
        })
    }
}

/// `Ω` given either exactly or as `log2 Ω`, for confusion-limited capacity.
#[derive(Debug, Clone, PartialEq)]
pub enum StateCount {
    Exact(BigUint),
    Log2(f64),
}

/// Integer `(W, M)` minimizing `W + M` subject to `W·M ≥ C`, together with
/// the continuous optimum `√C` both sit next to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partition {
    pub wells: u64,
    pub library: u64,
    pub continuous: f64,
}

// ---------------------------------------------------------------------------
// Exact combinatorics
// ---------------------------------------------------------------------------

/// Exact binomial coefficient `C(n, k)` as a big integer.
///
/// Runs in `min(k, n-k)` big-integer multiplications, so it is cheap whenever
/// either index is small even if the other is astronomical.
pub fn binomial(n: u128, k: u128) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut result = BigUint::one();
    for i in 0..k {
        result = result * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    result
}

/// `Ω` for unordered mixtures of up to `Q` molecules with duplication:
/// `Σ_{q=0..Q} C(M+q-1, M-1)`, evaluated through the hockey-stick closed
/// form `C(M+Q, M)`. Exact for any arguments where `min(M, Q)` fits a loop.
pub fn omega_with_duplicates(m: u128, q: u128) -> Result<BigUint> {
    if m == 0 {
        return Err(CapacityError::EmptyLibrary);
    }
    Ok(binomial(m + q, m.min(q)))
}

/// `Ω` for duplication-free mixtures: `Σ_{q=0..Q} C(M, q)`, exact.
pub fn omega_without_duplicates(m: u128, q: u128) -> Result<BigUint> {
    if m == 0 {
        return Err(CapacityError::EmptyLibrary);
    }
    if q > m {
        return Err(CapacityError::SelectionExceedsLibrary { m, q });
    }
    // Incremental term update: C(M, q+1) = C(M, q)·(M-q)/(q+1).
    let mut term = BigUint::one();
    let mut total = BigUint::one();
    for i in 0..q {
        term = term * BigUint::from(m - i) / BigUint::from(i + 1);
        total += &term;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Capacity expressions
// ---------------------------------------------------------------------------

/// `C1(M, Q) = log2 Σ_{q=0..Q} C(M+q-1, M-1)`: capacity of an unordered
/// mixture of up to `Q` molecules drawn with duplication from `M` types.
///
/// Exact `Ω` is attached while `M + Q ≤` [`EXACT_STATE_LIMIT`]; larger
/// arguments are evaluated in the log2 domain via log-gamma.
pub fn capacity_c1(m: u128, q: u128) -> Result<CapacityValue> {
    if m == 0 {
        return Err(CapacityError::EmptyLibrary);
    }
    if m + q <= EXACT_STATE_LIMIT {
        return Ok(CapacityValue::from_exact(omega_with_duplicates(m, q)?));
    }
    Ok(CapacityValue::from_bits(log2_binomial(m + q, m)))
}

/// `C2(M, Q) = log2 Σ_{q=0..Q} C(M, q)`: capacity without duplication.
///
/// Saturates at exactly `M` bits when `Q = M`. Exact below
/// [`EXACT_STATE_LIMIT`], log-domain beyond it.
pub fn capacity_c2(m: u128, q: u128) -> Result<CapacityValue> {
    if m == 0 {
        return Err(CapacityError::EmptyLibrary);
    }
    if q > m {
        return Err(CapacityError::SelectionExceedsLibrary { m, q });
    }
    if m + q <= EXACT_STATE_LIMIT {
        return Ok(CapacityValue::from_exact(omega_without_duplicates(m, q)?));
    }
    if q == m {
        // Σ_{q=0..M} C(M, q) = 2^M, exactly M bits.
        return Ok(CapacityValue::from_bits(m as f64));
    }
    Ok(CapacityValue::from_bits(log2_partial_binomial_sum(m, q)))
}

/// `C3(M, L) = M·log2 L`: each of `M` molecules at one of `L` distinguishable
/// concentrations (or internal states).
pub fn capacity_c3(m: u128, l: u32) -> Result<CapacityValue> {
    if m == 0 {
        return Err(CapacityError::EmptyLibrary);
    }
    if l < 2 {
        return Err(CapacityError::TooFewLevels(l));
    }
    let bits = (m as f64) * f64::from(l).log2();
    // Attach L^M only while the integer stays a reasonable size.
    if bits <= 100_000.0 {
        let omega = BigUint::from(l).pow(m as u32);
        let mut value = CapacityValue::from_exact(omega);
        // The closed form is the definition; prefer it bit-for-bit.
        value.bits = bits;
        return Ok(value);
    }
    Ok(CapacityValue::from_bits(bits))
}

/// `C4(M, S) = (M/S)·log2 S`: sparse one-hot coding with exactly one molecule
/// per block of `S`.
///
/// `S = 1` yields 0 bits and is reported with a
/// [`CapacityFlag::DegenerateSparsity`] flag rather than an error — the dense
/// end of the sparsity axis is covered by `C2(M, M)` instead.
pub fn capacity_c4(m: u128, s: u128) -> Result<CapacityValue> {
    if m == 0 {
        return Err(CapacityError::EmptyLibrary);
    }
    if s == 0 {
        return Err(CapacityError::ZeroSparsity);
    }
    if !m.is_multiple_of(s) {
        return Err(CapacityError::SparsityDoesNotDivide { m, s });
    }
    let blocks = m / s;
    let bits = (blocks as f64) * (s as f64).log2();
    let mut value = if bits <= 100_000.0 && blocks <= u128::from(u32::MAX) {
        let omega = BigUint::from(s).pow(blocks as u32);
        let mut v = CapacityValue::from_exact(omega);
        v.bits = bits;
        v
    } else {
        CapacityValue::from_bits(bits)
    };
    if s == 1 {
        value.flag = Some(CapacityFlag::DegenerateSparsity);
    }
    Ok(value)
}

/// Maps a polymer address/payload split onto mixture sparsity: `B^A`
/// addresses, sparsity `S = B^(N-A)`, and `C4(B^N, B^(N-A))` bits per
/// mixture evaluated in the log domain.
pub fn address_payload_equivalence(spec: &PolymerSpec) -> Result<AddressPayload> {
    let num_addresses = BigUint::from(spec.alphabet_size).pow(spec.address_positions);
    let sparsity = spec.sparsity();
    let payload_positions = spec.length - spec.address_positions;
    // (M/S)·log2 S = B^A · (N-A) · log2 B
    let bits_per_mixture = biguint_to_f64(&num_addresses)
        * f64::from(payload_positions)
        * f64::from(spec.alphabet_size).log2();
    Ok(AddressPayload {
        num_addresses,
        sparsity,
        bits_per_mixture,
        degenerate: payload_positions == 0,
    })
}

/// Confusion-limited capacity under worst-case equiprobable confusion:
///
/// `C' = log2 Ω + Pc·log2 Pc + (1-Pc)·log2((1-Pc)/(Ω-1))`
///
/// Returns exactly `log2 Ω` at `Pc = 1`; a numerically negative result is
/// clamped to 0 with [`CapacityFlag::ClampedNonNegative`].
pub fn confusion_limited_capacity(omega: &StateCount, pc: f64) -> Result<CapacityValue> {
    if !(pc > 0.0 && pc <= 1.0) {
        return Err(CapacityError::ConfusionProbabilityOutOfRange(pc));
    }
    let (log2_omega, log2_omega_minus_1) = match omega {
        StateCount::Exact(n) => {
            if *n < BigUint::from(2u32) {
                return Err(CapacityError::TooFewStates);
            }
            (log2_biguint(n), log2_biguint(&(n - 1u32)))
        }
        StateCount::Log2(x) => {
            if x.is_nan() || *x < 1.0 {
                return Err(CapacityError::TooFewStates);
            }
            // log2(Ω-1) = log2 Ω + log2(1 - 1/Ω), kept accurate via ln_1p.
            let inv_omega = (-x * LN_2).exp();
            (*x, x + (-inv_omega).ln_1p() / LN_2)
        }
    };
    if pc == 1.0 {
        return Ok(CapacityValue::from_bits(log2_omega));
    }
    let raw = log2_omega + pc * pc.log2() + (1.0 - pc) * ((1.0 - pc).log2() - log2_omega_minus_1);
    if raw < 0.0 {
        let mut v = CapacityValue::from_bits(0.0);
        v.flag = Some(CapacityFlag::ClampedNonNegative);
        return Ok(v);
    }
    Ok(CapacityValue::from_bits(raw))
}

/// Large-`Ω` approximation of the confusion-limited capacity:
/// `C' ≈ Pc·log2 Ω − H_B(Pc)`.
pub fn confusion_limited_capacity_approx(log2_omega: f64, pc: f64) -> Result<f64> {
    if !(pc > 0.0 && pc <= 1.0) {
        return Err(CapacityError::ConfusionProbabilityOutOfRange(pc));
    }
    Ok(pc * log2_omega - binary_entropy(pc)?)
}

/// Binary entropy `H_B(p) = -p·log2 p - (1-p)·log2(1-p)`, with
/// `0·log2 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(CapacityError::EntropyArgOutOfRange(p));
    }
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.log2();
    }
    if p < 1.0 {
        h -= (1.0 - p) * (1.0 - p).log2();
    }
    Ok(h)
}

// ---------------------------------------------------------------------------
// Write-energy figures
// ---------------------------------------------------------------------------

/// Energy per bit for very sparse polymer mixtures: `ε / log2 B`.
///
/// Richer monomer alphabets amortize each incorporation over more bits.
pub fn energy_per_bit_sparse(epsilon: f64, alphabet_size: u32) -> Result<f64> {
    if alphabet_size < 2 {
        return Err(CapacityError::TooFewMonomers(alphabet_size));
    }
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(CapacityError::NegativeEnergy);
    }
    Ok(epsilon / f64::from(alphabet_size).log2())
}

/// Energy per bit for dense binary mixtures synthesized per well: `ε·N/2`.
///
/// Favors the simplest molecules able to reach the target capacity.
pub fn energy_per_bit_dense(epsilon: f64, monomer_length: u64) -> f64 {
    epsilon * monomer_length as f64 / 2.0
}

/// Energy per bit once the library is pre-synthesized and only mixing is
/// paid: a flat `γ/2`.
pub fn energy_per_bit_mixing(gamma: f64) -> f64 {
    gamma / 2.0
}

/// Integer `(W, M)` minimizing `W + M` subject to `W·M ≥ C` — the minimum
/// perimeter problem whose continuous optimum is `W ≈ M ≈ √C`.
///
/// Exhaustive search over `W ∈ [1, ⌈√C⌉+1]`; for perfect squares the result
/// is exactly `(√C, √C)`.
pub fn optimal_partition(target_capacity: f64) -> Result<Partition> {
    if !target_capacity.is_finite() || target_capacity < 1.0 {
        return Err(CapacityError::PartitionTargetInvalid(target_capacity));
    }
    // W·M is an integer, so W·M ≥ C is equivalent to W·M ≥ ⌈C⌉.
    let c = target_capacity.ceil() as u64;
    let root = (c as f64).sqrt().ceil() as u64 + 1;
    let mut best: Option<(u64, u64)> = None;
    for w in 1..=root {
        let m = c.div_ceil(w);
        if m < w {
            break;
        }
        match best {
            Some((bw, bm)) if bw + bm <= w + m => {}
            _ => best = Some((w, m)),
        }
    }
    let (wells, library) = best.expect("search range always contains a candidate");
    Ok(Partition {
        wells,
        library,
        continuous: target_capacity.sqrt(),
    })
}

// ---------------------------------------------------------------------------
// Log-domain machinery
// ---------------------------------------------------------------------------

/// `log2` of a positive big integer, exact for powers of two.
pub fn log2_biguint(x: &BigUint) -> f64 {
    assert!(!x.is_zero(), "log2 of zero");
    if x.count_ones() == 1 {
        return (x.bits() - 1) as f64;
    }
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().expect("fits in u64 by bit count") as f64).log2();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().expect("top word fits");
    (top as f64).log2() + shift as f64
}

/// Big integer to f64, saturating at infinity far beyond any use here.
pub fn biguint_to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

/// `log2 C(n, k)` through log-gamma, for arguments far beyond exact range.
fn log2_binomial(n: u128, k: u128) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    if k == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let kf = k as f64;
    // When the small side is negligible against n, the log-gamma difference
    // ln Γ(n+1) - ln Γ(n-k+1) cancels catastrophically (the result can sit
    // below one ulp of the operands), so those regimes are evaluated from
    // the product form Σ ln(n-i) instead.
    if k <= 100_000 {
        let sum_ln: f64 = (0..k).map(|i| ((n - i) as f64).ln()).sum();
        return (sum_ln - ln_gamma(kf + 1.0)) / LN_2;
    }
    if kf / nf < 1e-6 {
        // Σ_{i<k} ln(1 - i/n) to second order; the discarded terms are
        // below k·(k/n)^3.
        let correction = -(kf * (kf - 1.0) / 2.0) / nf
            - ((kf - 1.0) * kf * (2.0 * kf - 1.0) / 6.0) / (2.0 * nf * nf);
        return (kf * nf.ln() + correction - ln_gamma(kf + 1.0)) / LN_2;
    }
    // Both sides are large: the result is within a few orders of the
    // operands and the direct difference is accurate.
    (ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0)) / LN_2
}

/// `log2 Σ_{q=0..Q} C(M, q)` for large `M`, `Q < M`.
///
/// Anchored at the top term, the sum is accumulated downward; successive
/// term ratios `q/(M-q+1)` decay geometrically away from `Q ≈ M/2`, so the
/// window converges quickly except in a thin band around the midpoint where
/// the entropy form `M·H_B(Q/M)` is accurate to ~1e-10 relative anyway.
fn log2_partial_binomial_sum(m: u128, q: u128) -> f64 {
    debug_assert!(q < m);
    let mf = m as f64;
    let qf = q as f64;
    if q == 0 {
        return 0.0;
    }
    // More than half the mass: take the complement of the opposite tail.
    if 2 * q >= m {
        let tail_top = m - q - 1; // Σ_{q'=0..tail_top} C(M, q')
        let log2_tail = if tail_top == 0 {
            0.0
        } else {
            log2_partial_binomial_sum(m, tail_top)
        };
        return mf + (-(2f64.powf(log2_tail - mf))).ln_1p() / LN_2;
    }
    const MAX_WINDOW: u128 = 200_000;
    let anchor = log2_binomial(m, q);
    let mut ratio_log_sum = 0.0f64; // ln of the running downward term / top term
    let mut sum = 1.0f64; // Σ term_i / term_Q
    let mut converged = false;
    for i in 0..q.min(MAX_WINDOW) {
        let qi = q - i;
        ratio_log_sum += ((qi as f64) / (mf - qi as f64 + 1.0)).ln();
        let rel = ratio_log_sum.exp();
        sum += rel;
        if rel < 1e-18 * sum {
            converged = true;
            break;
        }
    }
    if converged || q <= MAX_WINDOW {
        anchor + sum.log2()
    } else {
        // Q within a hair of M/2 and both windows too slow: entropy form.
        mf * binary_entropy(qf / mf).expect("ratio in [0,1]")
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    // Brute-force enumeration oracles, independent of the closed forms.

    /// Counts multisets of size exactly `size` over `m` item types by
    /// recursive enumeration.
    fn enumerate_multisets(m: u128, size: u128) -> u64 {
        fn go(types_left: u128, remaining: u128) -> u64 {
            if remaining == 0 {
                return 1;
            }
            if types_left == 0 {
                return 0;
            }
            (0..=remaining)
                .map(|take| go(types_left - 1, remaining - take))
                .sum()
        }
        go(m, size)
    }

    /// Counts subsets of size exactly `size` over `m` items by recursion.
    fn enumerate_subsets(m: u128, size: u128) -> u64 {
        fn go(items_left: u128, remaining: u128) -> u64 {
            if remaining > items_left {
                return 0;
            }
            if remaining == 0 {
                return 1;
            }
            go(items_left - 1, remaining) + go(items_left - 1, remaining - 1)
        }
        go(m, size)
    }

    #[test]
    fn omega_with_duplicates_matches_enumeration() {
        for m in 1..=6u128 {
            for q in 0..=6u128 {
                let expected: u64 = (0..=q).map(|size| enumerate_multisets(m, size)).sum();
                assert_eq!(
                    omega_with_duplicates(m, q).unwrap(),
                    BigUint::from(expected),
                    "M={m} Q={q}"
                );
            }
        }
    }

    #[test]
    fn omega_without_duplicates_matches_enumeration() {
        for m in 1..=6u128 {
            for q in 0..=m {
                let expected: u64 = (0..=q).map(|size| enumerate_subsets(m, size)).sum();
                assert_eq!(
                    omega_without_duplicates(m, q).unwrap(),
                    BigUint::from(expected),
                    "M={m} Q={q}"
                );
            }
        }
    }

    #[test]
    fn omega_with_duplicates_examples() {
        // Empty mixture or the single molecule.
        assert_eq!(omega_with_duplicates(1, 1).unwrap(), BigUint::from(2u32));
        // All multisets of size ≤ 2 over 2 items: {}, {a}, {b}, {aa}, {ab}, {bb}.
        assert_eq!(omega_with_duplicates(2, 2).unwrap(), BigUint::from(6u32));
        // C(7, 3) = 35.
        assert_eq!(omega_with_duplicates(3, 4).unwrap(), BigUint::from(35u32));
        assert_eq!(
            omega_with_duplicates(0, 3),
            Err(CapacityError::EmptyLibrary)
        );
    }

    #[test]
    fn hockey_stick_closed_form_holds_exactly() {
        // Σ_{q=0..Q} C(M+q-1, M-1) = (Q+1)/M · C(M+Q, M-1) = C(M+Q, M).
        for m in 1..=50u128 {
            for q in 0..=50u128 {
                let sum: BigUint = (0..=q).map(|qq| binomial(m + qq - 1, m - 1)).sum();
                let closed = binomial(m + q, m);
                let alt = BigUint::from(q + 1) * binomial(m + q, m - 1) / BigUint::from(m);
                assert_eq!(sum, closed, "M={m} Q={q}");
                assert_eq!(sum, alt, "M={m} Q={q}");
            }
        }
    }

    #[test]
    fn capacity_c1_examples() {
        assert_eq!(capacity_c1(1, 1).unwrap().bits, 1.0);
        let v = capacity_c1(2, 2).unwrap();
        assert_eq!(v.exact_state_count, Some(BigUint::from(6u32)));
        assert!((v.bits - 2.584962500721156).abs() < 1e-12);
    }

    #[test]
    fn capacity_c1_log_route_agrees_with_exact() {
        // Wherever exact Ω is available, log-gamma must agree to 1e-9 relative.
        for (m, q) in [(10u128, 500u128), (100, 100), (400, 4000), (5000, 5000)] {
            let exact = capacity_c1(m, q).unwrap();
            let via_gamma = log2_binomial(m + q, m);
            let rel = (exact.bits - via_gamma).abs() / exact.bits.max(1.0);
            assert!(
                rel < 1e-9,
                "M={m} Q={q}: exact {} vs gamma {via_gamma}",
                exact.bits
            );
        }
    }

    #[test]
    fn capacity_c2_examples_and_saturation() {
        // Eq-style saturation: exactly M bits at Q = M.
        for m in 1..=64u128 {
            let v = capacity_c2(m, m).unwrap();
            assert_eq!(v.bits, m as f64, "M={m}");
            assert_eq!(v.exact_state_count, Some(BigUint::one() << (m as u32)));
        }
        // Subsets of ≤1 item over 2: {}, {a}, {b}.
        let v = capacity_c2(2, 1).unwrap();
        assert!((v.bits - 1.584962500721156).abs() < 1e-12);
        assert_eq!(
            capacity_c2(3, 4),
            Err(CapacityError::SelectionExceedsLibrary { m: 3, q: 4 })
        );
    }

    #[test]
    fn capacity_c2_large_m_routes() {
        // Exactly M bits through the huge-M shortcut.
        let m = 1u128 << 80; // 4^40
        let v = capacity_c2(m, m).unwrap();
        assert_eq!(v.bits, m as f64);
        assert!(v.exact_state_count.is_none());

        // Partial sums: windowed log-domain vs exact big-int at the largest
        // exact sizes.
        for (m, q) in [(6000u128, 1000u128), (6000, 2999), (8000, 3999)] {
            let exact = log2_biguint(&omega_without_duplicates(m, q).unwrap());
            let approx = log2_partial_binomial_sum(m, q);
            let rel = (exact - approx).abs() / exact;
            assert!(rel < 1e-9, "M={m} Q={q}: {exact} vs {approx} rel {rel}");
        }
        // Complement route (Q > M/2).
        for (m, q) in [(6000u128, 4000u128), (6000, 5999)] {
            let exact = log2_biguint(&omega_without_duplicates(m, q).unwrap());
            let approx = log2_partial_binomial_sum(m, q);
            let rel = (exact - approx).abs() / exact;
            assert!(rel < 1e-9, "M={m} Q={q}: {exact} vs {approx} rel {rel}");
        }
    }

    #[test]
    fn capacity_c1_c2_monotone_in_q() {
        let mut prev_c1 = -1.0;
        for q in 0..=300u128 {
            let c1 = capacity_c1(300, q).unwrap().bits;
            assert!(c1 >= prev_c1);
            prev_c1 = c1;
        }
        let mut prev_c2 = -1.0;
        for q in 0..=300u128 {
            let c2 = capacity_c2(300, q).unwrap().bits;
            assert!(c2 >= prev_c2);
            assert!(c2 <= 300.0 + 1e-12);
            prev_c2 = c2;
        }
    }

    #[test]
    fn capacity_c3_examples() {
        assert_eq!(capacity_c3(5, 2).unwrap().bits, 5.0);
        assert_eq!(capacity_c3(10, 4).unwrap().bits, 20.0);
        assert_eq!(capacity_c3(1, 2).unwrap().bits, 1.0);
        assert_eq!(capacity_c3(5, 1), Err(CapacityError::TooFewLevels(1)));
        let v = capacity_c3(3, 3).unwrap();
        assert_eq!(v.exact_state_count, Some(BigUint::from(27u32)));
        assert!((v.bits - 3.0 * 3f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn capacity_c4_examples_and_degenerate_flag() {
        assert_eq!(capacity_c4(256, 16).unwrap().bits, 64.0);
        assert_eq!(capacity_c4(256, 256).unwrap().bits, 8.0);
        let degenerate = capacity_c4(256, 1).unwrap();
        assert_eq!(degenerate.bits, 0.0);
        assert_eq!(degenerate.flag, Some(CapacityFlag::DegenerateSparsity));
        assert_eq!(
            capacity_c4(10, 3),
            Err(CapacityError::SparsityDoesNotDivide { m: 10, s: 3 })
        );
    }

    #[test]
    fn sparse_capacity_ordering() {
        // C4(M, S) ≤ C2(M, M/S) ≤ C1(M, M/S) across power-of-two divisor
        // sweeps, and C4 non-increasing along them.
        for m in [16u128, 64, 256] {
            let mut prev_c4 = f64::INFINITY;
            let mut s = 2u128;
            while s <= m {
                let q = m / s;
                let c4 = capacity_c4(m, s).unwrap().bits;
                let c2 = capacity_c2(m, q).unwrap().bits;
                let c1 = capacity_c1(m, q).unwrap().bits;
                assert!(c4 <= c2 + 1e-9, "M={m} S={s}: C4={c4} C2={c2}");
                assert!(c2 <= c1 + 1e-9, "M={m} S={s}: C2={c2} C1={c1}");
                assert!(c4 <= prev_c4 + 1e-9, "M={m} S={s}");
                prev_c4 = c4;
                s *= 2;
            }
        }
    }

    #[test]
    fn bits_per_molecule_grows_with_sparsity() {
        // log2 S increases with S even as total mixture capacity falls.
        let m = 256u128;
        let mut prev_per_molecule = 0.0;
        let mut s = 2u128;
        while s <= m {
            let per_molecule = (s as f64).log2();
            assert!(per_molecule > prev_per_molecule);
            prev_per_molecule = per_molecule;
            s *= 2;
        }
    }

    #[test]
    fn address_payload_matches_sparse_capacity() {
        // B=2, N=3, A=1: 2 addresses, S=4, 2·log2 4 = 4 bits — equal to
        // enumerating all 4^2 valid sparse mixtures.
        let spec = PolymerSpec::new(2, 3, 1).unwrap();
        let ap = address_payload_equivalence(&spec).unwrap();
        assert_eq!(ap.num_addresses, BigUint::from(2u32));
        assert_eq!(ap.sparsity, BigUint::from(4u32));
        assert_eq!(ap.bits_per_mixture, 4.0);
        assert!(!ap.degenerate);
        let states = 4u32.pow(2); // S^(M/S) valid sparse mixtures
        assert_eq!(f64::from(states).log2(), ap.bits_per_mixture);

        // A single 40-nt DNA molecule conveys 80 bits.
        let dna = PolymerSpec::new(4, 40, 0).unwrap();
        let ap = address_payload_equivalence(&dna).unwrap();
        assert_eq!(ap.num_addresses, BigUint::one());
        assert_eq!(ap.bits_per_mixture, 80.0);
        assert_eq!(dna.single_molecule_bits(), 80.0);

        // All-address split degenerates; the dense C2 bound takes over.
        let dense_end = PolymerSpec::new(4, 40, 40).unwrap();
        let ap = address_payload_equivalence(&dense_end).unwrap();
        assert!(ap.degenerate);
        assert_eq!(ap.bits_per_mixture, 0.0);
        assert_eq!(ap.sparsity, BigUint::one());
    }

    #[test]
    fn huge_library_mixture_capacity_scales_linearly_in_mixture_size() {
        // For M >> Q, log2 C(M+Q, Q) ~ Q (log2(M/Q) + log2 e): doubling the
        // mixture size roughly doubles the capacity of one mixture.
        let m = 1u128 << 80; // 4^40
        let mut prev: Option<(u128, f64)> = None;
        for q in [1_000u128, 2_000, 4_000, 8_000, 16_000] {
            let bits = capacity_c1(m, q).unwrap().bits;
            // Per-molecule information sits near the single-molecule figure
            // of 80 bits, reduced by log2 Q and raised by log2 e.
            let per_molecule = bits / q as f64;
            let expected = 80.0 - (q as f64).log2() + std::f64::consts::LOG2_E;
            assert!(
                (per_molecule - expected).abs() < 0.05,
                "Q={q}: {per_molecule} vs {expected}"
            );
            if let Some((prev_q, prev_bits)) = prev {
                let growth = bits / prev_bits;
                let expected = q as f64 / prev_q as f64;
                assert!(
                    (growth - expected).abs() / expected < 0.03,
                    "Q {prev_q} -> {q}: growth {growth}"
                );
            }
            prev = Some((q, bits));
        }
    }

    #[test]
    fn zettabyte_scale_mixture() {
        // One unordered mixture of 40-nt DNA: C2(4^40, 4^40) = 4^40 bits,
        // about 151 zettabytes.
        let m = 1u128 << 80;
        let bits = capacity_c2(m, m).unwrap().bits;
        let zettabytes = bits / 8.0 / 1e21;
        assert!((zettabytes - 151.0).abs() / 151.0 < 0.01, "{zettabytes} ZB");
    }

    #[test]
    fn confusion_limited_capacity_examples() {
        let two = StateCount::Exact(BigUint::from(2u32));
        assert_eq!(confusion_limited_capacity(&two, 1.0).unwrap().bits, 1.0);
        let coin_flip = confusion_limited_capacity(&two, 0.5).unwrap();
        assert!(coin_flip.bits.abs() < 1e-12);

        // Frozen from high-precision evaluation of the defining expression.
        let v = confusion_limited_capacity(&StateCount::Log2(20.0), 0.99).unwrap();
        assert!((v.bits - 19.719206877862707).abs() < 1e-9, "{}", v.bits);
        let approx = confusion_limited_capacity_approx(20.0, 0.99).unwrap();
        assert!((v.bits - approx).abs() < 0.15);

        assert!(matches!(
            confusion_limited_capacity(&two, 0.0),
            Err(CapacityError::ConfusionProbabilityOutOfRange(_))
        ));
        assert!(matches!(
            confusion_limited_capacity(&two, 1.5),
            Err(CapacityError::ConfusionProbabilityOutOfRange(_))
        ));
    }

    #[test]
    fn confusion_limited_capacity_properties() {
        for log2_omega in [1.0f64, 4.0, 10.0, 20.0, 40.0, 80.0] {
            // Pc = 1 recovers log2 Ω exactly.
            let best = confusion_limited_capacity(&StateCount::Log2(log2_omega), 1.0).unwrap();
            assert_eq!(best.bits, log2_omega);
            // Random-guessing point: zero within 1e-9.
            let pc_guess = (-log2_omega * LN_2).exp();
            let zero = confusion_limited_capacity(&StateCount::Log2(log2_omega), pc_guess).unwrap();
            assert!(zero.bits.abs() < 1e-9, "log2Ω={log2_omega}: {}", zero.bits);
            // Bounded by log2 Ω across Pc.
            for pc in [0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.999] {
                let v = confusion_limited_capacity(&StateCount::Log2(log2_omega), pc).unwrap();
                assert!(v.bits >= 0.0 && v.bits <= log2_omega + 1e-12);
            }
        }
        // Exact big-int route agrees with the log2 route.
        let omega = BigUint::from(1u32) << 20;
        let a = confusion_limited_capacity(&StateCount::Exact(omega), 0.97).unwrap();
        let b = confusion_limited_capacity(&StateCount::Log2(20.0), 0.97).unwrap();
        assert!((a.bits - b.bits).abs() < 1e-9);
    }

    #[test]
    fn confusion_approximation_quality() {
        // |C' − (Pc·log2 Ω − H_B(Pc))| ≤ 1 bit for Ω ≥ 2^10, Pc ≥ 0.5.
        for log2_omega in [10.0f64, 12.0, 16.0, 20.0, 32.0, 64.0] {
            for pc in [0.5, 0.6, 0.75, 0.9, 0.99, 0.9999] {
                let exact = confusion_limited_capacity(&StateCount::Log2(log2_omega), pc)
                    .unwrap()
                    .bits;
                let approx = confusion_limited_capacity_approx(log2_omega, pc).unwrap();
                assert!(
                    (exact - approx).abs() <= 1.0,
                    "log2Ω={log2_omega} Pc={pc}: {exact} vs {approx}"
                );
            }
        }
    }

    #[test]
    fn binary_entropy_examples() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // Frozen from high-precision evaluation.
        assert!((binary_entropy(0.11).unwrap() - 0.499915958164528).abs() < 1e-12);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn energy_figures() {
        assert_eq!(energy_per_bit_sparse(1.0, 2).unwrap(), 1.0);
        assert_eq!(energy_per_bit_sparse(1.0, 4).unwrap(), 0.5);
        assert!((energy_per_bit_sparse(2.0, 20).unwrap() - 0.4627564263195183).abs() < 1e-12);
        assert!(energy_per_bit_sparse(1.0, 1).is_err());

        assert_eq!(energy_per_bit_dense(1.0, 2), 1.0);
        assert_eq!(energy_per_bit_dense(1.0, 40), 20.0);
        assert_eq!(energy_per_bit_dense(0.5, 10), 2.5);

        assert_eq!(energy_per_bit_mixing(1.0), 0.5);
        assert_eq!(energy_per_bit_mixing(0.0), 0.0);
        assert_eq!(energy_per_bit_mixing(3.0), 1.5);
    }

    #[test]
    fn partition_examples() {
        let p = optimal_partition(100.0).unwrap();
        assert_eq!((p.wells, p.library), (10, 10));
        let p = optimal_partition(101.0).unwrap();
        assert_eq!(p.wells + p.library, 21);
        assert!(p.wells as u128 * p.library as u128 >= 101);
        let p = optimal_partition(1.0).unwrap();
        assert_eq!((p.wells, p.library), (1, 1));
        assert!(optimal_partition(0.5).is_err());
    }

    #[test]
    fn partition_matches_exhaustive_search() {
        // Independent oracle: scan every W up to C.
        fn exhaustive_best_sum(c: u64) -> u64 {
            (1..=c).map(|w| w + c.div_ceil(w)).min().unwrap()
        }
        for c in [2u64, 3, 7, 12, 99, 101, 1000, 12345, 99991] {
            let p = optimal_partition(c as f64).unwrap();
            assert!(p.wells as u128 * p.library as u128 >= c as u128);
            assert_eq!(p.wells + p.library, exhaustive_best_sum(c), "C={c}");
        }
    }

    #[test]
    fn mixture_regime_validation() {
        let mut regime = MixtureRegime {
            library_size: 16,
            max_select: 8,
            allow_duplicates: false,
            levels: 2,
            sparsity: 4,
        };
        assert!(regime.validate().is_ok());
        regime.max_select = 17;
        assert!(regime.validate().is_err());
        regime.allow_duplicates = true;
        assert!(regime.validate().is_ok());
        regime.sparsity = 3;
        assert!(regime.validate().is_err());
    }

    #[test]
    fn polymer_spec_and_energy_model_validation() {
        assert!(PolymerSpec::new(1, 10, 0).is_err());
        assert!(PolymerSpec::new(4, 0, 0).is_err());
        assert!(PolymerSpec::new(4, 10, 11).is_err());
        let dna = PolymerSpec::new(4, 3, 2).unwrap();
        assert_eq!(dna.library_size(), BigUint::from(64u32));
        assert_eq!(dna.sparsity(), BigUint::from(4u32));

        assert!(EnergyModel::new(1.0, 1.0, 96).is_ok());
        assert!(EnergyModel::new(-1.0, 1.0, 96).is_err());
        assert!(EnergyModel::new(1.0, f64::NAN, 96).is_err());
        assert!(EnergyModel::new(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn log2_biguint_powers_of_two_are_exact() {
        for k in [1u32, 7, 53, 64, 80, 200] {
            let x = BigUint::one() << k;
            assert_eq!(log2_biguint(&x), k as f64);
        }
        assert!((log2_biguint(&BigUint::from(1000u32)) - 1000f64.log2()).abs() < 1e-12);
    }
}
