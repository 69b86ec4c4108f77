/* C bindings for the mixcode molecular-mixture data storage library. */

#ifndef MIXCODE_H
#define MIXCODE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a mixcode call.
 */
typedef enum MxStatus {
  /**
   * Success.
   */
  MX_STATUS_OK = 0,
  /**
   * A precondition on the arguments failed.
   */
  MX_STATUS_INVALID_ARGUMENT = 1,
  /**
   * A file or text payload failed to parse.
   */
  MX_STATUS_PARSE_ERROR = 2,
  /**
   * The readout channel failed (e.g. mass collision or shape mismatch).
   */
  MX_STATUS_CHANNEL_ERROR = 3,
  /**
   * A required pointer was null.
   */
  MX_STATUS_NULL_POINTER = 4,
  /**
   * File I/O failed.
   */
  MX_STATUS_IO_ERROR = 5,
  /**
   * A caller-supplied buffer was too small.
   */
  MX_STATUS_BUFFER_TOO_SMALL = 6,
} MxStatus;

/**
 * Opaque per-compound intensity classifier handle.
 */
typedef struct MxClassifier MxClassifier;

/**
 * Opaque plate layout handle.
 */
typedef struct MxLayout MxLayout;

/**
 * Opaque compound library handle.
 */
typedef struct MxLibrary MxLibrary;

/**
 * Opaque spectra handle (one spectrum per well).
 */
typedef struct MxSpectra MxSpectra;

/**
 * Channel noise model (plain struct, passed by pointer). Intensity means
 * and sigmas parameterize ln-intensity; an off mean of -infinity reads
 * absent compounds as exactly zero.
 */
typedef struct MxChannelConfig {
  double intensity_on_mean;
  double intensity_on_sigma;
  double intensity_off_mean;
  double intensity_off_sigma;
  double mass_tolerance_ppm;
  double sodiation_mass_shift;
  double dropout_probability;
  uint64_t rng_seed;
} MxChannelConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message for this thread into `buffer` (NUL
 * terminated, truncated to `capacity`). Returns the full message length in
 * bytes, excluding the terminator.
 *
 * # Safety
 * `buffer` must point to `capacity` writable bytes, or be null (the call
 * then only reports the length).
 */
size_t mx_last_error_message(char *buffer, size_t capacity);

/**
 * Capacity of an unordered mixture of up to `q` molecules drawn with
 * duplication from a library of `m`, in bits.
 *
 * # Safety
 * `out_bits` must point to a writable double.
 */
enum MxStatus mx_capacity_c1(uint64_t m, uint64_t q, double *out_bits);

/**
 * The duplication-free capacity; saturates at exactly `m` bits when
 * `q == m`.
 *
 * # Safety
 * `out_bits` must point to a writable double.
 */
enum MxStatus mx_capacity_c2(uint64_t m, uint64_t q, double *out_bits);

/**
 * Concentration-level capacity `m * log2(levels)`.
 *
 * # Safety
 * `out_bits` must point to a writable double.
 */
enum MxStatus mx_capacity_c3(uint64_t m, uint32_t levels, double *out_bits);

/**
 * Sparse one-hot capacity `(m/s) * log2(s)`. `s = 1` yields 0 bits and
 * sets `out_degenerate` (which may be null).
 *
 * # Safety
 * `out_bits` must point to a writable double; `out_degenerate` must be
 * writable or null.
 */
enum MxStatus mx_capacity_c4(uint64_t m, uint64_t s, double *out_bits, bool *out_degenerate);

/**
 * Confusion-limited capacity from `log2(omega)` and the correct-read
 * probability `pc` (in (0, 1]).
 *
 * # Safety
 * `out_bits` must point to a writable double.
 */
enum MxStatus mx_confusion_limited_capacity(double log2_omega, double pc, double *out_bits);

/**
 * Binary entropy of `p`, with `0 log 0 = 0`.
 *
 * # Safety
 * `out_bits` must point to a writable double.
 */
enum MxStatus mx_binary_entropy(double p, double *out_bits);

/**
 * Energy per bit for very sparse polymer mixtures: `epsilon / log2(b)`.
 *
 * # Safety
 * `out` must point to a writable double.
 */
enum MxStatus mx_energy_per_bit_sparse(double epsilon, uint32_t alphabet_size, double *out);

/**
 * Energy per bit for dense per-well synthesis: `epsilon * n / 2`.
 */
double mx_energy_per_bit_dense(double epsilon, uint64_t monomer_length);

/**
 * Energy per bit with a premixed library: `gamma / 2`.
 */
double mx_energy_per_bit_mixing(double gamma);

/**
 * Integer `(wells, library)` minimizing their sum subject to
 * `wells * library >= c`.
 *
 * # Safety
 * `out_wells` and `out_library` must point to writable integers.
 */
enum MxStatus mx_optimal_partition(double c, uint64_t *out_wells, uint64_t *out_library);

/**
 * Builds a synthetic library of `m` compounds with evenly spaced masses,
 * block size `s`, and `levels` concentration levels. Returns null on
 * invalid arguments.
 */
struct MxLibrary *mx_library_synthetic(size_t m, size_t s, uint32_t levels);

/**
 * Loads a library from a mixcode library file. Returns null on failure.
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
struct MxLibrary *mx_library_read(const char *path);

/**
 * Number of compounds in the library (0 for a null handle).
 *
 * # Safety
 * `library` must be a live handle or null.
 */
size_t mx_library_len(const struct MxLibrary *library);

/**
 * # Safety
 * `library` must come from this library and not be freed twice.
 */
void mx_library_free(struct MxLibrary *library);

/**
 * Encodes a bit payload densely (`levels` a power of two; 2 for plain
 * presence/absence). Returns null on failure.
 *
 * # Safety
 * `bits` must point to `len` bytes; `library` must be a live handle.
 */
struct MxLayout *mx_encode_dense(const struct MxLibrary *library,
                                 const uint8_t *bits,
                                 size_t len,
                                 uint32_t levels);

/**
 * Encodes a bit payload into one-hot blocks of the library's block size.
 * Returns null on failure.
 *
 * # Safety
 * `bits` must point to `len` bytes; `library` must be a live handle.
 */
struct MxLayout *mx_encode_sparse(const struct MxLibrary *library, const uint8_t *bits, size_t len);

/**
 * Payload length in bits, padding excluded (0 for a null handle).
 *
 * # Safety
 * `layout` must be a live handle or null.
 */
size_t mx_layout_payload_len(const struct MxLayout *layout);

/**
 * Number of wells in the layout (0 for a null handle).
 *
 * # Safety
 * `layout` must be a live handle or null.
 */
size_t mx_layout_wells(const struct MxLayout *layout);

/**
 * Data bits carried per well (0 for a null handle).
 *
 * # Safety
 * `layout` must be a live handle or null.
 */
size_t mx_layout_bits_per_well(const struct MxLayout *layout);

/**
 * Decodes the layout back to its payload bits (inverse of whichever codec
 * built it). `buffer` receives one 0/1 byte per bit; size it with
 * [`mx_layout_payload_len`].
 *
 * # Safety
 * `layout` must be live; `buffer` must hold `capacity` writable bytes.
 */
enum MxStatus mx_layout_decode(const struct MxLayout *layout,
                               uint8_t *buffer,
                               size_t capacity,
                               size_t *out_len);

/**
 * Writes the layout (manifest header plus well matrix) to a file.
 *
 * # Safety
 * `layout` must be live; `path` must be NUL-terminated.
 */
enum MxStatus mx_layout_write(const struct MxLayout *layout, const char *path);

/**
 * Reads a layout file. Returns null on failure.
 *
 * # Safety
 * `path` must be NUL-terminated.
 */
struct MxLayout *mx_layout_read(const char *path);

/**
 * # Safety
 * `layout` must come from this library and not be freed twice.
 */
void mx_layout_free(struct MxLayout *layout);

/**
 * The noiseless channel preset.
 */
struct MxChannelConfig mx_channel_zero_noise(uint64_t rng_seed);

/**
 * The dense-experiment operating point (raw BER calibrated to 6.5e-4).
 */
struct MxChannelConfig mx_channel_paper_dense(uint64_t rng_seed);

/**
 * The sparse-experiment operating point (pixel accuracy calibrated to
 * ~94.6% at block size 16).
 */
struct MxChannelConfig mx_channel_paper_sparse(uint64_t rng_seed);

/**
 * Simulates mass-spectrometry readout of every well. Returns null on
 * failure (including the mass-separation precondition).
 *
 * # Safety
 * All handles must be live; `config` must point to a valid struct.
 */
struct MxSpectra *mx_simulate_readout(const struct MxLayout *layout,
                                      const struct MxLibrary *library,
                                      const struct MxChannelConfig *config);

/**
 * Writes spectra as a mixcode spectra file.
 *
 * # Safety
 * `spectra` must be live; `path` must be NUL-terminated.
 */
enum MxStatus mx_spectra_write(const struct MxSpectra *spectra, const char *path);

/**
 * Reads a mixcode spectra file. Returns null on failure.
 *
 * # Safety
 * `path` must be NUL-terminated.
 */
struct MxSpectra *mx_spectra_read(const char *path);

/**
 * # Safety
 * `spectra` must come from this library and not be freed twice.
 */
void mx_spectra_free(struct MxSpectra *spectra);

/**
 * Fits the per-compound Fisher discriminants from calibration spectra and
 * their ground-truth layout. Returns null on failure.
 *
 * # Safety
 * All handles must be live; `config` must point to a valid struct.
 */
struct MxClassifier *mx_fit_classifier(const struct MxSpectra *calibration_spectra,
                                       const struct MxLayout *calibration_truth,
                                       const struct MxLibrary *library,
                                       const struct MxChannelConfig *config);

/**
 * # Safety
 * `classifier` must come from this library and not be freed twice.
 */
void mx_classifier_free(struct MxClassifier *classifier);

/**
 * Decodes dense-plate spectra into a reconstructed layout. `manifest`
 * supplies the encoding parameters (any layout handle with the right
 * manifest works; its well states are not read).
 *
 * # Safety
 * All handles must be live.
 */
enum MxStatus mx_decode_dense_spectra(const struct MxSpectra *spectra,
                                      const struct MxClassifier *classifier,
                                      const struct MxLibrary *library,
                                      const struct MxLayout *manifest,
                                      struct MxLayout **out_layout);

/**
 * Decodes sparse-plate spectra by block argmax into a reconstructed
 * layout; every block of the result is one-hot.
 *
 * # Safety
 * All handles must be live.
 */
enum MxStatus mx_decode_sparse_spectra(const struct MxSpectra *spectra,
                                       const struct MxLibrary *library,
                                       const struct MxLayout *manifest,
                                       double mass_tolerance_ppm,
                                       double sodiation_mass_shift,
                                       struct MxLayout **out_layout);

/**
 * Compares a decoded layout against truth: fraction of wells read exactly
 * and the total number of misread compound levels.
 *
 * # Safety
 * Both handles must be live.
 */
enum MxStatus mx_estimate_confusion(const struct MxLayout *decoded,
                                    const struct MxLayout *truth,
                                    double *out_pc,
                                    size_t *out_level_errors);

/**
 * Encodes 4 data bits (value < 16) into a systematic 7-bit codeword.
 */
uint32_t mx_hamming74_encode(uint32_t data);

/**
 * Syndrome-decodes a 7-bit word (value < 128) back to 4 data bits,
 * correcting any single flip.
 */
uint32_t mx_hamming74_decode(uint32_t word);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* MIXCODE_H */
