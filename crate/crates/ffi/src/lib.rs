//! C ABI for the mixcode library.
//!
//! Exposes the capacity calculators, the dense/sparse plate codecs, the
//! readout simulator, and the Hamming(7,4) primitives behind opaque handles
//! and plain status codes, so other languages can drive the pipeline.
//!
//! Conventions:
//! - Every fallible function returns [`MxStatus`]; `MX_STATUS_OK` is 0.
//! - On failure, a thread-local message is readable via
//!   [`mx_last_error_message`].
//! - Opaque handles (`MxLibrary`, `MxLayout`, `MxSpectra`, `MxClassifier`)
//!   are created and destroyed by this library; pass them back to the
//!   matching `_free` function exactly once.
//! - Bit payloads cross the boundary as `uint8_t` arrays holding one 0/1
//!   value per byte.
//!
//! The C header is generated into `include/mixcode.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::path::Path;

use mixcode::capacity;
use mixcode::codec::{self, CompoundLibrary, PlateLayout};
use mixcode::ecc;
use mixcode::readout::{self, ChannelConfig, IntensityClassifier, PeakMatcher, Spectrum};

// ---------------------------------------------------------------------------
// Status codes and error reporting
// ---------------------------------------------------------------------------

/// Result of a mixcode call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[allow(non_camel_case_types)]
pub enum MxStatus {
    /// Success.
    MX_STATUS_OK = 0,
    /// A precondition on the arguments failed.
    MX_STATUS_INVALID_ARGUMENT = 1,
    /// A file or text payload failed to parse.
    MX_STATUS_PARSE_ERROR = 2,
    /// The readout channel failed (e.g. mass collision or shape mismatch).
    MX_STATUS_CHANNEL_ERROR = 3,
    /// A required pointer was null.
    MX_STATUS_NULL_POINTER = 4,
    /// File I/O failed.
    MX_STATUS_IO_ERROR = 5,
    /// A caller-supplied buffer was too small.
    MX_STATUS_BUFFER_TOO_SMALL = 6,
}

use MxStatus::*;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: impl Into<String>) {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message.into());
}

fn fail(status: MxStatus, message: impl Into<String>) -> MxStatus {
    set_error(message);
    status
}

/// Copies the last error message for this thread into `buffer` (NUL
/// terminated, truncated to `capacity`). Returns the full message length in
/// bytes, excluding the terminator.
///
/// # Safety
/// `buffer` must point to `capacity` writable bytes, or be null (the call
/// then only reports the length).
#[no_mangle]
pub unsafe extern "C" fn mx_last_error_message(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        if !buffer.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buffer.cast(), n);
            *buffer.add(n) = 0;
        }
        bytes.len()
    })
}

macro_rules! check_ptr {
    ($ptr:expr) => {
        if $ptr.is_null() {
            return fail(
                MX_STATUS_NULL_POINTER,
                concat!(stringify!($ptr), " is null"),
            );
        }
    };
}

unsafe fn path_from<'a>(ptr: *const c_char) -> Result<&'a Path, MxStatus> {
    if ptr.is_null() {
        set_error("path is null");
        return Err(MX_STATUS_NULL_POINTER);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(MX_STATUS_PARSE_ERROR)
        }
    }
}

unsafe fn bits_from(ptr: *const u8, len: usize) -> Vec<bool> {
    std::slice::from_raw_parts(ptr, len)
        .iter()
        .map(|&b| b != 0)
        .collect()
}

unsafe fn bits_into(bits: &[bool], buffer: *mut u8, capacity: usize) -> Result<(), MxStatus> {
    if bits.len() > capacity {
        set_error(format!(
            "buffer holds {capacity} bits but the payload needs {}",
            bits.len()
        ));
        return Err(MX_STATUS_BUFFER_TOO_SMALL);
    }
    for (i, &bit) in bits.iter().enumerate() {
        *buffer.add(i) = u8::from(bit);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Capacity calculators
// ---------------------------------------------------------------------------

fn capacity_out(
    result: Result<capacity::CapacityValue, capacity::CapacityError>,
    out_bits: *mut f64,
) -> MxStatus {
    match result {
        Ok(value) => {
            unsafe { *out_bits = value.bits };
            MX_STATUS_OK
        }
        Err(err) => fail(MX_STATUS_INVALID_ARGUMENT, err.to_string()),
    }
}

/// Capacity of an unordered mixture of up to `q` molecules drawn with
/// duplication from a library of `m`, in bits.
///
/// # Safety
/// `out_bits` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn mx_capacity_c1(m: u64, q: u64, out_bits: *mut f64) -> MxStatus {
    check_ptr!(out_bits);
    capacity_out(capacity::capacity_c1(m.into(), q.into()), out_bits)
}

/// The duplication-free capacity; saturates at exactly `m` bits when
/// `q == m`.
///
/// # Safety
/// `out_bits` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn mx_capacity_c2(m: u64, q: u64, out_bits: *mut f64) -> MxStatus {
    check_ptr!(out_bits);
    capacity_out(capacity::capacity_c2(m.into(), q.into()), out_bits)
}

/// Concentration-level capacity `m * log2(levels)`.
///
/// # Safety
/// `out_bits` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn mx_capacity_c3(m: u64, levels: u32, out_bits: *mut f64) -> MxStatus {
    check_ptr!(out_bits);
    capacity_out(capacity::capacity_c3(m.into(), levels), out_bits)
}

/// Sparse one-hot capacity `(m/s) * log2(s)`. `s = 1` yields 0 bits and
/// sets `out_degenerate` (which may be null).
///
/// # Safety
/// `out_bits` must point to a writable double; `out_degenerate` must be
/// writable or null.
#[no_mangle]
pub unsafe extern "C" fn mx_capacity_c4(
    m: u64,
    s: u64,
    out_bits: *mut f64,
    out_degenerate: *mut bool,
) -> MxStatus {
    check_ptr!(out_bits);
    match capacity::capacity_c4(m.into(), s.into()) {
        Ok(value) => {
            unsafe {
                *out_bits = value.bits;
                if !out_degenerate.is_null() {
                    *out_degenerate =
                        value.flag == Some(capacity::CapacityFlag::DegenerateSparsity);
                }
            }
            MX_STATUS_OK
        }
        Err(err) => fail(MX_STATUS_INVALID_ARGUMENT, err.to_string()),
    }
}

/// Confusion-limited capacity from `log2(omega)` and the correct-read
/// probability `pc` (in (0, 1]).
///
/// # Safety
/// `out_bits` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn mx_confusion_limited_capacity(
    log2_omega: f64,
    pc: f64,
    out_bits: *mut f64,
) -> MxStatus {
    check_ptr!(out_bits);
    capacity_out(
        capacity::confusion_limited_capacity(&capacity::StateCount::Log2(log2_omega), pc),
        out_bits,
    )
}

/// Binary entropy of `p`, with `0 log 0 = 0`.
///
/// # Safety
/// `out_bits` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn mx_binary_entropy(p: f64, out_bits: *mut f64) -> MxStatus {
    check_ptr!(out_bits);
    match capacity::binary_entropy(p) {
        Ok(h) => {
            unsafe { *out_bits = h };
            MX_STATUS_OK
        }
        Err(err) => fail(MX_STATUS_INVALID_ARGUMENT, err.to_string()),
    }
}

/// Energy per bit for very sparse polymer mixtures: `epsilon / log2(b)`.
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn mx_energy_per_bit_sparse(
    epsilon: f64,
    alphabet_size: u32,
    out: *mut f64,
) -> MxStatus {
    check_ptr!(out);
    match capacity::energy_per_bit_sparse(epsilon, alphabet_size) {
        Ok(e) => {
            unsafe { *out = e };
            MX_STATUS_OK
        }
        Err(err) => fail(MX_STATUS_INVALID_ARGUMENT, err.to_string()),
    }
}

/// Energy per bit for dense per-well synthesis: `epsilon * n / 2`.
#[no_mangle]
pub extern "C" fn mx_energy_per_bit_dense(epsilon: f64, monomer_length: u64) -> f64 {
    capacity::energy_per_bit_dense(epsilon, monomer_length)
}

/// Energy per bit with a premixed library: `gamma / 2`.
#[no_mangle]
pub extern "C" fn mx_energy_per_bit_mixing(gamma: f64) -> f64 {
    capacity::energy_per_bit_mixing(gamma)
}

/// Integer `(wells, library)` minimizing their sum subject to
/// `wells * library >= c`.
///
/// # Safety
/// `out_wells` and `out_library` must point to writable integers.
#[no_mangle]
pub unsafe extern "C" fn mx_optimal_partition(
    c: f64,
    out_wells: *mut u64,
    out_library: *mut u64,
) -> MxStatus {
    check_ptr!(out_wells);
    check_ptr!(out_library);
    match capacity::optimal_partition(c) {
        Ok(partition) => {
            unsafe {
                *out_wells = partition.wells;
                *out_library = partition.library;
            }
            MX_STATUS_OK
        }
        Err(err) => fail(MX_STATUS_INVALID_ARGUMENT, err.to_string()),
    }
}

// ---------------------------------------------------------------------------
// Compound libraries
// ---------------------------------------------------------------------------

/// Opaque compound library handle.
pub struct MxLibrary(CompoundLibrary);

/// Builds a synthetic library of `m` compounds with evenly spaced masses,
/// block size `s`, and `levels` concentration levels. Returns null on
/// invalid arguments.
#[no_mangle]
pub extern "C" fn mx_library_synthetic(m: usize, s: usize, levels: u32) -> *mut MxLibrary {
    match CompoundLibrary::synthetic(m, s, levels) {
        Ok(library) => Box::into_raw(Box::new(MxLibrary(library))),
        Err(err) => {
            set_error(err.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Loads a library from a mixcode library file. Returns null on failure.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mx_library_read(path: *const c_char) -> *mut MxLibrary {
    let Ok(path) = path_from(path) else {
        return std::ptr::null_mut();
    };
    match CompoundLibrary::read_file(path) {
        Ok(library) => Box::into_raw(Box::new(MxLibrary(library))),
        Err(err) => {
            set_error(err.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Number of compounds in the library (0 for a null handle).
///
/// # Safety
/// `library` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mx_library_len(library: *const MxLibrary) -> usize {
    if library.is_null() {
        return 0;
    }
    (*library).0.len()
}

/// # Safety
/// `library` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mx_library_free(library: *mut MxLibrary) {
    if !library.is_null() {
        drop(Box::from_raw(library));
    }
}

// ---------------------------------------------------------------------------
// Plate layouts and the codecs
// ---------------------------------------------------------------------------

/// Opaque plate layout handle.
pub struct MxLayout(PlateLayout);

fn layout_new(result: Result<PlateLayout, codec::CodecError>) -> *mut MxLayout {
    match result {
        Ok(layout) => Box::into_raw(Box::new(MxLayout(layout))),
        Err(err) => {
            set_error(err.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Encodes a bit payload densely (`levels` a power of two; 2 for plain
/// presence/absence). Returns null on failure.
///
/// # Safety
/// `bits` must point to `len` bytes; `library` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mx_encode_dense(
    library: *const MxLibrary,
    bits: *const u8,
    len: usize,
    levels: u32,
) -> *mut MxLayout {
    if library.is_null() || bits.is_null() {
        set_error("null argument");
        return std::ptr::null_mut();
    }
    let payload = bits_from(bits, len);
    layout_new(codec::encode_dense(&payload, &(*library).0, levels))
}

/// Encodes a bit payload into one-hot blocks of the library's block size.
/// Returns null on failure.
///
/// # Safety
/// `bits` must point to `len` bytes; `library` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mx_encode_sparse(
    library: *const MxLibrary,
    bits: *const u8,
    len: usize,
) -> *mut MxLayout {
    if library.is_null() || bits.is_null() {
        set_error("null argument");
        return std::ptr::null_mut();
    }
    let payload = bits_from(bits, len);
    layout_new(codec::encode_sparse(&payload, &(*library).0))
}

/// Payload length in bits, padding excluded (0 for a null handle).
///
/// # Safety
/// `layout` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mx_layout_payload_len(layout: *const MxLayout) -> usize {
    if layout.is_null() {
        return 0;
    }
    (*layout).0.manifest.original_bit_length
}

/// Number of wells in the layout (0 for a null handle).
///
/// # Safety
/// `layout` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mx_layout_wells(layout: *const MxLayout) -> usize {
    if layout.is_null() {
        return 0;
    }
    (*layout).0.manifest.wells
}

/// Data bits carried per well (0 for a null handle).
///
/// # Safety
/// `layout` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mx_layout_bits_per_well(layout: *const MxLayout) -> usize {
    if layout.is_null() {
        return 0;
    }
    (*layout).0.manifest.bits_per_well()
}

/// Decodes the layout back to its payload bits (inverse of whichever codec
/// built it). `buffer` receives one 0/1 byte per bit; size it with
/// [`mx_layout_payload_len`].
///
/// # Safety
/// `layout` must be live; `buffer` must hold `capacity` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mx_layout_decode(
    layout: *const MxLayout,
    buffer: *mut u8,
    capacity: usize,
    out_len: *mut usize,
) -> MxStatus {
    check_ptr!(layout);
    check_ptr!(buffer);
    check_ptr!(out_len);
    let layout = &(*layout).0;
    let result = match layout.manifest.scheme {
        codec::Scheme::Dense => codec::decode_dense(layout),
        codec::Scheme::Sparse => codec::decode_sparse(layout),
    };
    match result {
        Ok(bits) => {
            if let Err(status) = bits_into(&bits, buffer, capacity) {
                return status;
            }
            *out_len = bits.len();
            MX_STATUS_OK
        }
        Err(err) => fail(MX_STATUS_INVALID_ARGUMENT, err.to_string()),
    }
}

/// Writes the layout (manifest header plus well matrix) to a file.
///
/// # Safety
/// `layout` must be live; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mx_layout_write(layout: *const MxLayout, path: *const c_char) -> MxStatus {
    check_ptr!(layout);
    let path = match path_from(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match std::fs::write(path, codec::write_layout(&(*layout).0)) {
        Ok(()) => MX_STATUS_OK,
        Err(err) => fail(MX_STATUS_IO_ERROR, err.to_string()),
    }
}

/// Reads a layout file. Returns null on failure.
///
/// # Safety
/// `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mx_layout_read(path: *const c_char) -> *mut MxLayout {
    let Ok(path) = path_from(path) else {
        return std::ptr::null_mut();
    };
    let text = match std::fs::read_to_string(path) {
        Ok(text) => text,
        Err(err) => {
            set_error(err.to_string());
            return std::ptr::null_mut();
        }
    };
    layout_new(codec::read_layout(&text))
}

/// # Safety
/// `layout` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mx_layout_free(layout: *mut MxLayout) {
    if !layout.is_null() {
        drop(Box::from_raw(layout));
    }
}

// ---------------------------------------------------------------------------
// Readout simulation and decoding
// ---------------------------------------------------------------------------

/// Channel noise model (plain struct, passed by pointer). Intensity means
/// and sigmas parameterize ln-intensity; an off mean of -infinity reads
/// absent compounds as exactly zero.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MxChannelConfig {
    pub intensity_on_mean: f64,
    pub intensity_on_sigma: f64,
    pub intensity_off_mean: f64,
    pub intensity_off_sigma: f64,
    pub mass_tolerance_ppm: f64,
    pub sodiation_mass_shift: f64,
    pub dropout_probability: f64,
    pub rng_seed: u64,
}

impl From<ChannelConfig> for MxChannelConfig {
    fn from(config: ChannelConfig) -> Self {
        MxChannelConfig {
            intensity_on_mean: config.intensity_on_mean,
            intensity_on_sigma: config.intensity_on_sigma,
            intensity_off_mean: config.intensity_off_mean,
            intensity_off_sigma: config.intensity_off_sigma,
            mass_tolerance_ppm: config.mass_tolerance_ppm,
            sodiation_mass_shift: config.sodiation_mass_shift,
            dropout_probability: config.dropout_probability,
            rng_seed: config.rng_seed,
        }
    }
}

impl From<MxChannelConfig> for ChannelConfig {
    fn from(config: MxChannelConfig) -> Self {
        ChannelConfig {
            intensity_on_mean: config.intensity_on_mean,
            intensity_on_sigma: config.intensity_on_sigma,
            intensity_off_mean: config.intensity_off_mean,
            intensity_off_sigma: config.intensity_off_sigma,
            mass_tolerance_ppm: config.mass_tolerance_ppm,
            sodiation_mass_shift: config.sodiation_mass_shift,
            dropout_probability: config.dropout_probability,
            rng_seed: config.rng_seed,
        }
    }
}

/// The noiseless channel preset.
#[no_mangle]
pub extern "C" fn mx_channel_zero_noise(rng_seed: u64) -> MxChannelConfig {
    ChannelConfig::zero_noise(rng_seed).into()
}

/// The dense-experiment operating point (raw BER calibrated to 6.5e-4).
#[no_mangle]
pub extern "C" fn mx_channel_paper_dense(rng_seed: u64) -> MxChannelConfig {
    ChannelConfig::paper_dense(rng_seed).into()
}

/// The sparse-experiment operating point (pixel accuracy calibrated to
/// ~94.6% at block size 16).
#[no_mangle]
pub extern "C" fn mx_channel_paper_sparse(rng_seed: u64) -> MxChannelConfig {
    ChannelConfig::paper_sparse(rng_seed).into()
}

/// Opaque spectra handle (one spectrum per well).
pub struct MxSpectra(Vec<Spectrum>);

/// Simulates mass-spectrometry readout of every well. Returns null on
/// failure (including the mass-separation precondition).
///
/// # Safety
/// All handles must be live; `config` must point to a valid struct.
#[no_mangle]
pub unsafe extern "C" fn mx_simulate_readout(
    layout: *const MxLayout,
    library: *const MxLibrary,
    config: *const MxChannelConfig,
) -> *mut MxSpectra {
    if layout.is_null() || library.is_null() || config.is_null() {
        set_error("null argument");
        return std::ptr::null_mut();
    }
    let channel: ChannelConfig = (*config).into();
    match readout::simulate_readout(&(*layout).0, &(*library).0, &channel) {
        Ok(spectra) => Box::into_raw(Box::new(MxSpectra(spectra))),
        Err(err) => {
            set_error(err.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Writes spectra as a mixcode spectra file.
///
/// # Safety
/// `spectra` must be live; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mx_spectra_write(
    spectra: *const MxSpectra,
    path: *const c_char,
) -> MxStatus {
    check_ptr!(spectra);
    let path = match path_from(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match std::fs::write(path, readout::write_spectra(&(*spectra).0)) {
        Ok(()) => MX_STATUS_OK,
        Err(err) => fail(MX_STATUS_IO_ERROR, err.to_string()),
    }
}

/// Reads a mixcode spectra file. Returns null on failure.
///
/// # Safety
/// `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mx_spectra_read(path: *const c_char) -> *mut MxSpectra {
    let Ok(path) = path_from(path) else {
        return std::ptr::null_mut();
    };
    let text = match std::fs::read_to_string(path) {
        Ok(text) => text,
        Err(err) => {
            set_error(err.to_string());
            return std::ptr::null_mut();
        }
    };
    match readout::read_spectra(&text) {
        Ok(spectra) => Box::into_raw(Box::new(MxSpectra(spectra))),
        Err(err) => {
            set_error(err.to_string());
            std::ptr::null_mut()
        }
    }
}

/// # Safety
/// `spectra` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mx_spectra_free(spectra: *mut MxSpectra) {
    if !spectra.is_null() {
        drop(Box::from_raw(spectra));
    }
}

/// Opaque per-compound intensity classifier handle.
pub struct MxClassifier(IntensityClassifier);

/// Fits the per-compound Fisher discriminants from calibration spectra and
/// their ground-truth layout. Returns null on failure.
///
/// # Safety
/// All handles must be live; `config` must point to a valid struct.
#[no_mangle]
pub unsafe extern "C" fn mx_fit_classifier(
    calibration_spectra: *const MxSpectra,
    calibration_truth: *const MxLayout,
    library: *const MxLibrary,
    config: *const MxChannelConfig,
) -> *mut MxClassifier {
    if calibration_spectra.is_null()
        || calibration_truth.is_null()
        || library.is_null()
        || config.is_null()
    {
        set_error("null argument");
        return std::ptr::null_mut();
    }
    let channel: ChannelConfig = (*config).into();
    let matcher = PeakMatcher::from_config(&channel);
    match readout::fit_classifier(
        &(*calibration_spectra).0,
        &(*calibration_truth).0,
        &(*library).0,
        &matcher,
    ) {
        Ok(classifier) => Box::into_raw(Box::new(MxClassifier(classifier))),
        Err(err) => {
            set_error(err.to_string());
            std::ptr::null_mut()
        }
    }
}

/// # Safety
/// `classifier` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mx_classifier_free(classifier: *mut MxClassifier) {
    if !classifier.is_null() {
        drop(Box::from_raw(classifier));
    }
}

/// Decodes dense-plate spectra into a reconstructed layout. `manifest`
/// supplies the encoding parameters (any layout handle with the right
/// manifest works; its well states are not read).
///
/// # Safety
/// All handles must be live.
#[no_mangle]
pub unsafe extern "C" fn mx_decode_dense_spectra(
    spectra: *const MxSpectra,
    classifier: *const MxClassifier,
    library: *const MxLibrary,
    manifest: *const MxLayout,
    out_layout: *mut *mut MxLayout,
) -> MxStatus {
    check_ptr!(spectra);
    check_ptr!(classifier);
    check_ptr!(library);
    check_ptr!(manifest);
    check_ptr!(out_layout);
    match readout::decode_dense_spectra(
        &(*spectra).0,
        &(*classifier).0,
        &(*library).0,
        &(*manifest).0.manifest,
    ) {
        Ok((layout, _bits)) => {
            *out_layout = Box::into_raw(Box::new(MxLayout(layout)));
            MX_STATUS_OK
        }
        Err(err) => fail(MX_STATUS_CHANNEL_ERROR, err.to_string()),
    }
}

/// Decodes sparse-plate spectra by block argmax into a reconstructed
/// layout; every block of the result is one-hot.
///
/// # Safety
/// All handles must be live.
#[no_mangle]
pub unsafe extern "C" fn mx_decode_sparse_spectra(
    spectra: *const MxSpectra,
    library: *const MxLibrary,
    manifest: *const MxLayout,
    mass_tolerance_ppm: f64,
    sodiation_mass_shift: f64,
    out_layout: *mut *mut MxLayout,
) -> MxStatus {
    check_ptr!(spectra);
    check_ptr!(library);
    check_ptr!(manifest);
    check_ptr!(out_layout);
    let matcher = PeakMatcher {
        mass_tolerance_ppm,
        sodiation_mass_shift,
    };
    match readout::decode_sparse_spectra(
        &(*spectra).0,
        &(*library).0,
        &(*manifest).0.manifest,
        &matcher,
        None,
    ) {
        Ok(decode) => {
            *out_layout = Box::into_raw(Box::new(MxLayout(decode.layout)));
            MX_STATUS_OK
        }
        Err(err) => fail(MX_STATUS_CHANNEL_ERROR, err.to_string()),
    }
}

/// Compares a decoded layout against truth: fraction of wells read exactly
/// and the total number of misread compound levels.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn mx_estimate_confusion(
    decoded: *const MxLayout,
    truth: *const MxLayout,
    out_pc: *mut f64,
    out_level_errors: *mut usize,
) -> MxStatus {
    check_ptr!(decoded);
    check_ptr!(truth);
    check_ptr!(out_pc);
    check_ptr!(out_level_errors);
    match readout::estimate_confusion(&(*decoded).0, &(*truth).0) {
        Ok(confusion) => {
            *out_pc = confusion.pc;
            *out_level_errors = confusion.level_errors;
            MX_STATUS_OK
        }
        Err(err) => fail(MX_STATUS_INVALID_ARGUMENT, err.to_string()),
    }
}

// ---------------------------------------------------------------------------
// Hamming(7,4)
// ---------------------------------------------------------------------------

/// Encodes 4 data bits (value < 16) into a systematic 7-bit codeword.
#[no_mangle]
pub extern "C" fn mx_hamming74_encode(data: u32) -> u32 {
    ecc::hamming74_encode(data & 0xF)
}

/// Syndrome-decodes a 7-bit word (value < 128) back to 4 data bits,
/// correcting any single flip.
#[no_mangle]
pub extern "C" fn mx_hamming74_decode(word: u32) -> u32 {
    ecc::hamming74_decode(word & 0x7F)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_calls_round_values_through_the_abi() {
        let mut bits = 0.0f64;
        unsafe {
            assert_eq!(
                mx_capacity_c4(256, 16, &mut bits, std::ptr::null_mut()),
                MX_STATUS_OK
            );
            assert_eq!(bits, 64.0);
            assert_eq!(mx_capacity_c2(5, 5, &mut bits), MX_STATUS_OK);
            assert_eq!(bits, 5.0);
            let mut degenerate = false;
            assert_eq!(
                mx_capacity_c4(16, 1, &mut bits, &mut degenerate),
                MX_STATUS_OK
            );
            assert!(degenerate);
            assert_eq!(bits, 0.0);
        }
    }

    #[test]
    fn errors_set_a_readable_message() {
        let mut bits = 0.0f64;
        assert_eq!(
            unsafe { mx_capacity_c3(5, 1, &mut bits) },
            MX_STATUS_INVALID_ARGUMENT
        );
        let mut buffer = [0 as c_char; 256];
        let len = unsafe { mx_last_error_message(buffer.as_mut_ptr(), buffer.len()) };
        assert!(len > 0);
        let message = unsafe { CStr::from_ptr(buffer.as_ptr()) }.to_str().unwrap();
        assert!(message.contains('L'), "{message}");
    }

    #[test]
    fn handle_roundtrip_dense_codec() {
        let library = mx_library_synthetic(5, 1, 2);
        assert!(!library.is_null());
        let payload: Vec<u8> = vec![1, 0, 1, 0, 1];
        let layout = unsafe { mx_encode_dense(library, payload.as_ptr(), payload.len(), 2) };
        assert!(!layout.is_null());
        assert_eq!(unsafe { mx_layout_wells(layout) }, 1);
        assert_eq!(unsafe { mx_layout_payload_len(layout) }, 5);
        let mut decoded = vec![0u8; 5];
        let mut len = 0usize;
        let status =
            unsafe { mx_layout_decode(layout, decoded.as_mut_ptr(), decoded.len(), &mut len) };
        assert_eq!(status, MX_STATUS_OK);
        assert_eq!(len, 5);
        assert_eq!(decoded, payload);
        unsafe {
            mx_layout_free(layout);
            mx_library_free(library);
        }
    }

    #[test]
    fn hamming_primitives_cross_the_abi() {
        for data in 0..16u32 {
            let word = mx_hamming74_encode(data);
            assert_eq!(mx_hamming74_decode(word), data);
            assert_eq!(mx_hamming74_decode(word ^ 1), data);
        }
    }
}
