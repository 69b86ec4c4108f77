//! End-to-end tests of the `mixcode` binary: pipelines over real files,
//! exit codes, and byte-level reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn mixcode() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mixcode"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    mixcode()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str], dir: &Path) -> String {
    let output = run(args, dir);
    assert!(
        output.status.success(),
        "mixcode {args:?} failed:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).expect("utf8 stdout")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn capacity_examples_print_twelve_significant_digits() {
    let dir = TempDir::new().unwrap();
    let out = run_ok(&["capacity", "--c4", "--M", "256", "--S", "16"], dir.path());
    assert!(out.contains("64.0000000000 bits"), "{out}");
    let out = run_ok(&["capacity", "--c2", "--M", "5", "--Q", "5"], dir.path());
    assert!(out.contains("5.00000000000 bits"), "{out}");
    let out = run_ok(
        &["capacity", "--cprime", "--omega-log2", "20", "--pc", "1.0"],
        dir.path(),
    );
    assert!(out.contains("20.0000000000 bits"), "{out}");
    // S = 1 surfaces both the degenerate C4 and the dense C2 figure.
    let out = run_ok(&["capacity", "--c4", "--M", "16", "--S", "1"], dir.path());
    assert!(out.contains("C4(M=16, S=1) = 0 bits"), "{out}");
    assert!(out.contains("C2(M=16, Q=16) = 16.0000000000 bits"), "{out}");
}

#[test]
fn capacity_sweep_emits_csv() {
    let dir = TempDir::new().unwrap();
    let out = run_ok(
        &["capacity", "--c2", "--M", "64", "--sweep", "Q=0:64:8"],
        dir.path(),
    );
    let lines: Vec<&str> = out.trim().lines().collect();
    assert_eq!(lines[0], "Q,bits");
    assert_eq!(lines.len(), 10);
    assert!(lines[9].starts_with("64,64.0000000000"));

    let out = run_ok(
        &["capacity", "--c4", "--M", "64", "--sweep", "S=divisors"],
        dir.path(),
    );
    let lines: Vec<&str> = out.trim().lines().collect();
    assert_eq!(lines[0], "S,bits");
    // Divisors of 64: 1, 2, 4, 8, 16, 32, 64.
    assert_eq!(lines.len(), 8);

    let out = run_ok(
        &[
            "capacity",
            "--cprime",
            "--omega-log2",
            "20",
            "--sweep",
            "pc=0.5:1.0:0.1",
        ],
        dir.path(),
    );
    let lines: Vec<&str> = out.trim().lines().collect();
    assert_eq!(lines[0], "pc,bits");
    assert_eq!(lines.len(), 7);
    assert!(lines[6].starts_with("1,20.0000000000"));
}

#[test]
fn usage_and_validation_exit_codes() {
    let dir = TempDir::new().unwrap();
    // clap usage errors exit 2.
    assert_eq!(
        exit_code(&run(&["capacity", "--no-such-flag"], dir.path())),
        2
    );
    assert_eq!(exit_code(&run(&["frobnicate"], dir.path())), 2);
    // Domain validation errors exit 3.
    let out = run(&["capacity", "--c2", "--M", "3", "--Q", "4"], dir.path());
    assert_eq!(exit_code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds library size"));
    let out = run(&["capacity", "--c3", "--M", "5", "--L", "1"], dir.path());
    assert_eq!(exit_code(&out), 3);
}

#[test]
fn mass_collision_exits_with_channel_code() {
    let dir = TempDir::new().unwrap();
    run_ok(
        &[
            "gen-library",
            "--M",
            "4",
            "--mass-step",
            "0.0001",
            "-o",
            "tight.tsv",
        ],
        dir.path(),
    );
    run_ok(
        &[
            "encode",
            "--random-bits",
            "40",
            "--seed",
            "1",
            "--library",
            "tight.tsv",
            "--scheme",
            "dense",
            "-o",
            "tight.layout",
        ],
        dir.path(),
    );
    let out = run(
        &[
            "simulate",
            "--layout",
            "tight.layout",
            "--channel-config",
            "zero-noise",
            "--seed",
            "2",
            "-o",
            "tight.spectra",
        ],
        dir.path(),
    );
    assert_eq!(
        exit_code(&out),
        4,
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(
        !dir.path().join("tight.spectra").exists(),
        "no partial artifacts"
    );
}

#[test]
fn dense_decode_requires_calibration() {
    let dir = TempDir::new().unwrap();
    run_ok(&["gen-library", "--M", "5", "-o", "lib.tsv"], dir.path());
    run_ok(
        &[
            "encode",
            "--random-bits",
            "200",
            "--seed",
            "1",
            "--library",
            "lib.tsv",
            "--scheme",
            "dense",
            "-o",
            "data.layout",
        ],
        dir.path(),
    );
    run_ok(
        &[
            "simulate",
            "--layout",
            "data.layout",
            "--channel-config",
            "zero-noise",
            "--seed",
            "3",
            "-o",
            "data.spectra",
        ],
        dir.path(),
    );
    let out = run(
        &[
            "decode",
            "--spectra",
            "data.spectra",
            "--library",
            "lib.tsv",
            "--manifest",
            "data.layout.manifest",
            "-o",
            "out.bits",
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("calibration"));
}

/// Zero-noise dense pipeline through the binary, image payload included.
#[test]
fn dense_image_pipeline_is_lossless_under_zero_noise() {
    let dir = TempDir::new().unwrap();
    // A small ASCII bitmap payload.
    let mut pbm = String::from("P1\n11 7\n");
    for row in 0..7 {
        let line: Vec<&str> = (0..11)
            .map(|col| if (row * 11 + col) % 3 == 0 { "1" } else { "0" })
            .collect();
        pbm.push_str(&line.join(" "));
        pbm.push('\n');
    }
    std::fs::write(dir.path().join("input.pbm"), &pbm).unwrap();

    run_ok(&["gen-library", "--M", "5", "-o", "lib.tsv"], dir.path());
    run_ok(
        &[
            "encode",
            "--image",
            "input.pbm",
            "--library",
            "lib.tsv",
            "--scheme",
            "dense",
            "-o",
            "img.layout",
        ],
        dir.path(),
    );
    run_ok(
        &[
            "encode",
            "--random-bits",
            "320",
            "--seed",
            "5",
            "--library",
            "lib.tsv",
            "--scheme",
            "dense",
            "-o",
            "calib.layout",
        ],
        dir.path(),
    );
    for (layout, spectra, seed) in [
        ("img.layout", "img.spectra", "7"),
        ("calib.layout", "calib.spectra", "8"),
    ] {
        run_ok(
            &[
                "simulate",
                "--layout",
                layout,
                "--channel-config",
                "zero-noise",
                "--seed",
                seed,
                "-o",
                spectra,
            ],
            dir.path(),
        );
    }
    run_ok(
        &[
            "decode",
            "--spectra",
            "img.spectra",
            "--library",
            "lib.tsv",
            "--manifest",
            "img.layout.manifest",
            "--calibration-spectra",
            "calib.spectra",
            "--calibration-truth",
            "calib.layout",
            "--truth",
            "img.layout",
            "-o",
            "decoded.pbm",
            "--layout-out",
            "decoded.layout",
            "--report",
            "run.report",
        ],
        dir.path(),
    );
    // The decoded bitmap reproduces the input pixels exactly.
    let decoded = read(dir.path(), "decoded.pbm");
    let original = mixcode::codec::read_pbm(pbm.as_bytes()).unwrap();
    let roundtrip = mixcode::codec::read_pbm(decoded.as_bytes()).unwrap();
    assert_eq!(original, roundtrip);

    // The report parses and claims perfection.
    let report = mixcode::report::read_report(&read(dir.path(), "run.report")).unwrap();
    assert_eq!(report.bit_accuracy, 1.0);
    assert_eq!(report.pc, 1.0);

    // The standalone report subcommand reproduces the same figures from the
    // persisted artifacts alone.
    let out = run_ok(
        &[
            "report",
            "--truth",
            "img.layout",
            "--decoded",
            "decoded.layout",
        ],
        dir.path(),
    );
    let reparsed = mixcode::report::read_report(&out).unwrap();
    assert_eq!(reparsed.bit_accuracy, 1.0);
    assert_eq!(reparsed.pc, 1.0);

    // With --spectra it adds intensity histograms, with --ecc a rate verdict.
    let out = run_ok(
        &[
            "report",
            "--truth",
            "img.layout",
            "--decoded",
            "decoded.layout",
            "--spectra",
            "img.spectra",
            "--library",
            "lib.tsv",
            "--ecc",
            "hamming74",
        ],
        dir.path(),
    );
    let enriched = mixcode::report::read_report(&out).unwrap();
    assert!(!enriched.histograms.is_empty());
    assert!(enriched.ecc.unwrap().rate_admissible);
}

/// Sparse + Hamming(7,4) pipeline through the binary under zero noise.
#[test]
fn sparse_ecc_pipeline_is_lossless_under_zero_noise() {
    let dir = TempDir::new().unwrap();
    run_ok(
        &["gen-library", "--M", "64", "--S", "16", "-o", "lib.tsv"],
        dir.path(),
    );
    run_ok(
        &[
            "encode",
            "--random-bits",
            "1000",
            "--seed",
            "21",
            "--library",
            "lib.tsv",
            "--scheme",
            "sparse",
            "--ecc",
            "hamming74",
            "-o",
            "data.layout",
        ],
        dir.path(),
    );
    run_ok(
        &[
            "simulate",
            "--layout",
            "data.layout",
            "--channel-config",
            "zero-noise",
            "--seed",
            "22",
            "-o",
            "data.spectra",
        ],
        dir.path(),
    );
    run_ok(
        &[
            "decode",
            "--spectra",
            "data.spectra",
            "--library",
            "lib.tsv",
            "--manifest",
            "data.layout.manifest",
            "--ecc",
            "hamming74",
            "--truth",
            "data.layout",
            "-o",
            "decoded.bits",
            "--report",
            "run.report",
        ],
        dir.path(),
    );
    let decoded = mixcode::codec::read_bits_text(&read(dir.path(), "decoded.bits")).unwrap();
    let mut reference_rng = <rand_chacha::ChaCha12Rng as rand::SeedableRng>::seed_from_u64(21);
    let expected: Vec<bool> = (0..1000)
        .map(|_| rand::Rng::random::<bool>(&mut reference_rng))
        .collect();
    assert_eq!(decoded, expected);

    let report = mixcode::report::read_report(&read(dir.path(), "run.report")).unwrap();
    let ecc = report.ecc.expect("ecc summary present");
    assert_eq!(ecc.abandoned_blocks, 0);
    assert!(ecc.rate_admissible);
    assert_eq!(ecc.guesses_histogram[&1], 250); // 1000 data bits / 4 per block
}

/// Interleaved ECC decodes identically through GRAND and plain syndrome
/// decoding on a clean channel.
#[test]
fn syndrome_decoder_honours_the_interleaver_stride() {
    let dir = TempDir::new().unwrap();
    run_ok(&["gen-library", "--M", "7", "-o", "lib.tsv"], dir.path());
    run_ok(
        &[
            "encode",
            "--random-bits",
            "400",
            "--seed",
            "51",
            "--library",
            "lib.tsv",
            "--scheme",
            "dense",
            "--ecc",
            "hamming74",
            "--ecc-stride",
            "13",
            "-o",
            "d.layout",
        ],
        dir.path(),
    );
    run_ok(
        &[
            "simulate",
            "--layout",
            "d.layout",
            "--channel-config",
            "zero-noise",
            "--seed",
            "52",
            "-o",
            "d.spectra",
        ],
        dir.path(),
    );
    run_ok(
        &[
            "encode",
            "--random-bits",
            "350",
            "--seed",
            "53",
            "--library",
            "lib.tsv",
            "--scheme",
            "dense",
            "-o",
            "calib.layout",
        ],
        dir.path(),
    );
    run_ok(
        &[
            "simulate",
            "--layout",
            "calib.layout",
            "--channel-config",
            "zero-noise",
            "--seed",
            "54",
            "-o",
            "calib.spectra",
        ],
        dir.path(),
    );
    for (out, extra) in [("grand.bits", None), ("syndrome.bits", Some("--syndrome"))] {
        let mut args = vec![
            "decode",
            "--spectra",
            "d.spectra",
            "--library",
            "lib.tsv",
            "--manifest",
            "d.layout.manifest",
            "--calibration-spectra",
            "calib.spectra",
            "--calibration-truth",
            "calib.layout",
            "--ecc",
            "hamming74",
            "-o",
            out,
        ];
        if let Some(flag) = extra {
            args.push(flag);
        }
        run_ok(&args, dir.path());
    }
    let grand = mixcode::codec::read_bits_text(&read(dir.path(), "grand.bits")).unwrap();
    let syndrome = mixcode::codec::read_bits_text(&read(dir.path(), "syndrome.bits")).unwrap();
    assert_eq!(grand, syndrome);
    assert_eq!(grand.len(), 400);
    let mut reference_rng = <rand_chacha::ChaCha12Rng as rand::SeedableRng>::seed_from_u64(51);
    let expected: Vec<bool> = (0..400)
        .map(|_| rand::Rng::random::<bool>(&mut reference_rng))
        .collect();
    assert_eq!(grand, expected);
}

#[test]
fn simulate_is_byte_reproducible_and_serial_matches_parallel() {
    let dir = TempDir::new().unwrap();
    run_ok(
        &["gen-library", "--M", "16", "--S", "4", "-o", "lib.tsv"],
        dir.path(),
    );
    run_ok(
        &[
            "encode",
            "--random-bits",
            "3000",
            "--seed",
            "31",
            "--library",
            "lib.tsv",
            "--scheme",
            "sparse",
            "-o",
            "d.layout",
        ],
        dir.path(),
    );
    for (out, extra) in [
        ("a.spectra", None),
        ("b.spectra", None),
        ("c.spectra", Some("--serial")),
    ] {
        let mut args = vec![
            "simulate",
            "--layout",
            "d.layout",
            "--channel-config",
            "paper-sparse",
            "--seed",
            "99",
            "-o",
            out,
        ];
        if let Some(flag) = extra {
            args.push(flag);
        }
        run_ok(&args, dir.path());
    }
    let a = read(dir.path(), "a.spectra");
    assert_eq!(a, read(dir.path(), "b.spectra"));
    assert_eq!(a, read(dir.path(), "c.spectra"));
}

#[test]
fn channel_config_dir_env_is_searched() {
    let dir = TempDir::new().unwrap();
    let config_dir = dir.path().join("configs");
    std::fs::create_dir(&config_dir).unwrap();
    let config = mixcode::readout::ChannelConfig::zero_noise(5);
    std::fs::write(config_dir.join("bench"), config.to_text()).unwrap();

    run_ok(&["gen-library", "--M", "4", "-o", "lib.tsv"], dir.path());
    run_ok(
        &[
            "encode",
            "--random-bits",
            "16",
            "--seed",
            "1",
            "--library",
            "lib.tsv",
            "--scheme",
            "dense",
            "-o",
            "d.layout",
        ],
        dir.path(),
    );
    let output = mixcode()
        .args([
            "simulate",
            "--layout",
            "d.layout",
            "--channel-config",
            "bench",
            "-o",
            "d.spectra",
        ])
        .env("MIXCODE_CONFIG_DIR", &config_dir)
        .current_dir(dir.path())
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(String::from_utf8_lossy(&output.stdout).contains("rng_seed: 5"));
}

#[test]
fn encode_rejects_empty_payload_without_artifacts() {
    let dir = TempDir::new().unwrap();
    run_ok(&["gen-library", "--M", "4", "-o", "lib.tsv"], dir.path());
    std::fs::write(dir.path().join("empty.bits"), "# mixcode bits v1\n").unwrap();
    let out = run(
        &[
            "encode",
            "--bits",
            "empty.bits",
            "--library",
            "lib.tsv",
            "--scheme",
            "dense",
            "-o",
            "e.layout",
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&out), 3);
    assert!(!dir.path().join("e.layout").exists());
}

#[test]
fn pipeline_manifest_reruns_to_identical_outputs() {
    // Same flags + seeds, fresh directory: every artifact byte-identical.
    let run_pipeline = |dir: &Path| -> (String, String, String) {
        run_ok(
            &["gen-library", "--M", "8", "--S", "4", "-o", "lib.tsv"],
            dir,
        );
        run_ok(
            &[
                "encode",
                "--random-bits",
                "500",
                "--seed",
                "77",
                "--library",
                "lib.tsv",
                "--scheme",
                "sparse",
                "-o",
                "d.layout",
            ],
            dir,
        );
        run_ok(
            &[
                "simulate",
                "--layout",
                "d.layout",
                "--channel-config",
                "paper-sparse",
                "--seed",
                "78",
                "-o",
                "d.spectra",
            ],
            dir,
        );
        run_ok(
            &[
                "decode",
                "--spectra",
                "d.spectra",
                "--library",
                "lib.tsv",
                "--manifest",
                "d.layout.manifest",
                "--truth",
                "d.layout",
                "-o",
                "d.bits",
                "--layout-out",
                "d.decoded.layout",
                "--report",
                "d.report",
            ],
            dir,
        );
        (
            read(dir, "d.spectra"),
            read(dir, "d.decoded.layout"),
            read(dir, "d.report"),
        )
    };
    let first = TempDir::new().unwrap();
    let second = TempDir::new().unwrap();
    assert_eq!(run_pipeline(first.path()), run_pipeline(second.path()));
}

#[test]
fn layout_paths_resolve_relative_to_the_layout_file() {
    // The manifest's library reference is usable from another directory.
    let dir = TempDir::new().unwrap();
    let sub = dir.path().join("plates");
    std::fs::create_dir(&sub).unwrap();
    run_ok(&["gen-library", "--M", "4", "-o", "lib.tsv"], &sub);
    run_ok(
        &[
            "encode",
            "--random-bits",
            "16",
            "--seed",
            "1",
            "--library",
            "lib.tsv",
            "--scheme",
            "dense",
            "-o",
            "d.layout",
        ],
        &sub,
    );
    // Simulate from the parent directory without --library.
    let layout: PathBuf = ["plates", "d.layout"].iter().collect();
    let spectra: PathBuf = ["plates", "d.spectra"].iter().collect();
    run_ok(
        &[
            "simulate",
            "--layout",
            layout.to_str().unwrap(),
            "--channel-config",
            "zero-noise",
            "--seed",
            "4",
            "-o",
            spectra.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(dir.path().join("plates/d.spectra").exists());
}
