//! Cross-module integration: channel coding chained through the simulated
//! readout, and coherence between the capacity expressions and the codecs.

use rand::{Rng as _, SeedableRng as _};
use rand_chacha::ChaCha12Rng;

use mixcode::capacity::{self, StateCount};
use mixcode::codec::{self, CompoundLibrary};
use mixcode::ecc::{self, Codebook, NoiseGuessOrder};
use mixcode::readout::{self, ChannelConfig, PeakMatcher, DENSE_TARGET_RAW_BER};

fn random_bits(len: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random::<bool>()).collect()
}

/// Coding gain at the dense operating point: over 30 seeded trials the
/// post-ECC bit error rate stays below the raw rate.
///
/// Expected raw errors total ~137 (30 trials x 7000 coded bits x 6.5e-4);
/// a block only miscorrects on >= 2 flips (~21p^2 = 8.9e-6), so expected
/// post-ECC data-bit errors total well under 1. The comparison failing by
/// chance is far outside 99% confidence.
#[test]
fn hamming_grand_beats_raw_ber_at_the_dense_operating_point() {
    let library = CompoundLibrary::synthetic(5, 1, 2).unwrap();
    let codebook = Codebook::hamming74();
    let order = NoiseGuessOrder::default_for(7).unwrap();
    let payload = random_bits(4000, 0xEC);
    let coded = ecc::ecc_encode(&payload, &codebook, None).unwrap();
    let layout = codec::encode_dense(&coded, &library, 2).unwrap();

    let mut raw_errors = 0usize;
    let mut raw_bits = 0usize;
    let mut post_errors = 0usize;
    let mut post_bits = 0usize;
    let mut abandoned = 0usize;
    let mut max_guesses = 0u64;
    for trial in 0..30u64 {
        let config = ChannelConfig::paper_dense(trial);
        let matcher = PeakMatcher::from_config(&config);

        let calib_layout =
            codec::encode_dense(&random_bits(5 * 256, 0xCA + trial), &library, 2).unwrap();
        let mut calib_config = config.clone();
        calib_config.rng_seed = 40_000 + trial;
        let calib_spectra =
            readout::simulate_readout(&calib_layout, &library, &calib_config).unwrap();
        let classifier =
            readout::fit_classifier(&calib_spectra, &calib_layout, &library, &matcher).unwrap();

        let spectra = readout::simulate_readout(&layout, &library, &config).unwrap();
        let (_, received_coded) =
            readout::decode_dense_spectra(&spectra, &classifier, &library, &layout.manifest)
                .unwrap();
        raw_errors += received_coded
            .iter()
            .zip(&coded)
            .filter(|(a, b)| a != b)
            .count();
        raw_bits += coded.len();

        let outcome =
            ecc::ecc_decode(&received_coded, payload.len(), &codebook, None, &order).unwrap();
        post_errors += outcome
            .data
            .iter()
            .zip(&payload)
            .filter(|(a, b)| a != b)
            .count();
        post_bits += payload.len();
        abandoned += outcome.abandoned_blocks;
        max_guesses = max_guesses.max(outcome.guesses.iter().copied().max().unwrap_or(0));
    }
    let raw_ber = raw_errors as f64 / raw_bits as f64;
    let post_ber = post_errors as f64 / post_bits as f64;
    assert!(
        post_ber < raw_ber,
        "no coding gain: post {post_ber:.3e} vs raw {raw_ber:.3e}"
    );
    // Perfect code within a weight<=3 budget: no abandonment, and a single
    // flip is found within 1 + 7 guesses.
    assert_eq!(abandoned, 0);
    assert!(max_guesses <= 8, "max guesses {max_guesses}");
}

/// The shipped code preset respects the rate bound at its documented
/// operating point (Hamming(7,4) on the dense channel).
#[test]
fn hamming_preset_is_rate_admissible_at_the_dense_operating_point() {
    let codebook = Codebook::hamming74();
    // Well-level Pc expected from the calibrated per-bit error rate.
    let pc = (1.0 - DENSE_TARGET_RAW_BER).powi(5);
    let c_prime = capacity::confusion_limited_capacity(&StateCount::Log2(5.0), pc)
        .unwrap()
        .bits;
    let per_use = c_prime / 5.0;
    assert!(ecc::rate_admissible(
        codebook.log2_size(),
        codebook.codeword_length(),
        per_use
    ));
    // Per-bit confusion capacity clears the same bar.
    let per_bit =
        capacity::confusion_limited_capacity(&StateCount::Log2(1.0), 1.0 - DENSE_TARGET_RAW_BER)
            .unwrap()
            .bits;
    assert!(ecc::rate_admissible(
        codebook.log2_size(),
        codebook.codeword_length(),
        per_bit
    ));
}

/// Address-payload arithmetic agrees with what the sparse codec actually
/// packs into a well: B=2, N=3, A=1 gives an 8-compound library at sparsity
/// 4 carrying 4 bits per mixture.
#[test]
fn address_payload_split_matches_sparse_codec_geometry() {
    let spec = capacity::PolymerSpec::new(2, 3, 1).unwrap();
    let ap = capacity::address_payload_equivalence(&spec).unwrap();
    assert_eq!(ap.bits_per_mixture, 4.0);

    let library = CompoundLibrary::synthetic(8, 4, 2).unwrap();
    let layout = codec::encode_sparse(&random_bits(4, 3), &library).unwrap();
    assert_eq!(layout.manifest.bits_per_well() as f64, ap.bits_per_mixture);
    assert_eq!(layout.manifest.wells, 1);

    // And the capacity expression agrees with exhaustive enumeration of the
    // codec's reachable states: every 4-bit payload yields a distinct well.
    let mut states = std::collections::HashSet::new();
    for value in 0..16u32 {
        let bits: Vec<bool> = (0..4).rev().map(|i| value >> i & 1 == 1).collect();
        let layout = codec::encode_sparse(&bits, &library).unwrap();
        states.insert(layout.wells[0].levels().to_vec());
    }
    assert_eq!(states.len(), 16);
    assert_eq!(
        capacity::capacity_c4(8, 4).unwrap().bits,
        (states.len() as f64).log2()
    );
}
