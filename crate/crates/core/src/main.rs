//! `mixcode` — store digital data in simulated small-molecule mixtures.
//!
//! Subcommands cover the full pipeline: `capacity` evaluates the information
//! and energy bounds, `gen-library` writes a synthetic compound library,
//! `encode` maps a payload onto a plate layout, `simulate` renders noisy
//! mass-spectrometry readout, `decode` recovers the payload from spectra,
//! and `report` recomputes accuracy figures from persisted artifacts.
//!
//! Exit codes: 0 success, 2 usage error, 3 validation error, 4 channel
//! precondition failure (e.g. library masses colliding inside the readout
//! tolerance window).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use num_bigint::BigUint;
use rand::{Rng as _, SeedableRng as _};
use rand_chacha::ChaCha12Rng;

use mixcode::capacity::{self, StateCount};
use mixcode::codec::{self, CompoundLibrary, EccManifest, Scheme};
use mixcode::ecc::{self, Codebook, NoiseGuessOrder};
use mixcode::readout::{self, ChannelConfig, PeakMatcher};
use mixcode::report::{write_report, RunReport};

/// Environment variable naming a directory searched for channel configs
/// given by bare name.
const CONFIG_DIR_ENV: &str = "MIXCODE_CONFIG_DIR";

const EXIT_VALIDATION: u8 = 3;
const EXIT_CHANNEL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "mixcode",
    version,
    about = "Codec, capacity calculator, and mass-spectrometry readout simulator \
             for data storage in small-molecule mixtures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate capacity and energy bounds.
    Capacity(CapacityArgs),
    /// Write a synthetic compound library file.
    GenLibrary(GenLibraryArgs),
    /// Encode a payload into a plate layout.
    Encode(EncodeArgs),
    /// Simulate mass-spectrometry readout of a layout.
    Simulate(SimulateArgs),
    /// Decode spectra back to a payload.
    Decode(DecodeArgs),
    /// Recompute accuracy figures from truth and decoded layout files.
    Report(ReportArgs),
}

// ---------------------------------------------------------------------------
// Error plumbing
// ---------------------------------------------------------------------------

struct CliError {
    message: String,
    exit: u8,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            exit: EXIT_VALIDATION,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

macro_rules! impl_from_error {
    ($ty:ty) => {
        impl From<$ty> for CliError {
            fn from(err: $ty) -> Self {
                CliError::validation(err.to_string())
            }
        }
    };
}

impl_from_error!(capacity::CapacityError);
impl_from_error!(codec::CodecError);
impl_from_error!(ecc::EccError);
impl_from_error!(mixcode::report::ReportError);
impl_from_error!(std::io::Error);

impl From<readout::ReadoutError> for CliError {
    fn from(err: readout::ReadoutError) -> Self {
        let exit = match err {
            readout::ReadoutError::MassCollision { .. } => EXIT_CHANNEL,
            _ => EXIT_VALIDATION,
        };
        CliError {
            message: err.to_string(),
            exit,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Capacity(args) => run_capacity(args),
        Command::GenLibrary(args) => run_gen_library(args),
        Command::Encode(args) => run_encode(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Decode(args) => run_decode(args),
        Command::Report(args) => run_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("mixcode: {}", err.message);
            ExitCode::from(err.exit)
        }
    }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

/// Parses a count that may be written as a power, e.g. `4^40`.
fn parse_count(text: &str) -> Result<u128, String> {
    if let Some((base, exp)) = text.split_once('^') {
        let base: u128 = base
            .trim()
            .parse()
            .map_err(|_| format!("bad base in `{text}`"))?;
        let exp: u32 = exp
            .trim()
            .parse()
            .map_err(|_| format!("bad exponent in `{text}`"))?;
        base.checked_pow(exp)
            .ok_or_else(|| format!("`{text}` overflows 128-bit arithmetic"))
    } else {
        text.trim()
            .parse()
            .map_err(|_| format!("bad count `{text}`"))
    }
}

/// Formats a value with 12 significant digits.
fn fmt_sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..=14).contains(&exp) {
        let prec = (11 - exp).max(0) as usize;
        format!("{x:.prec$}")
    } else {
        format!("{x:.11e}")
    }
}

fn read_to_string(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

fn load_library(
    path: &Path,
    block_size: Option<usize>,
    levels: Option<u32>,
) -> CliResult<CompoundLibrary> {
    let library = CompoundLibrary::from_text(&read_to_string(path)?)?;
    match (block_size, levels) {
        (None, None) => Ok(library),
        (s, l) => {
            let s = s.unwrap_or(library.block_size());
            let l = l.unwrap_or(library.levels());
            Ok(library.with_geometry(s, l)?)
        }
    }
}

/// Resolves `--ecc`: the built-in `hamming74` preset or a codebook file.
fn load_codebook(spec: &str) -> CliResult<Codebook> {
    if spec == "hamming74" {
        return Ok(Codebook::hamming74());
    }
    Ok(Codebook::from_text(&read_to_string(Path::new(spec))?)?)
}

/// Resolves `--channel-config`: a file path, a built-in preset name
/// (`zero-noise`, `paper-dense`, `paper-sparse`; these require `--seed`),
/// or a file in `$MIXCODE_CONFIG_DIR`.
fn load_channel_config(spec: &str, seed: Option<u64>) -> CliResult<ChannelConfig> {
    let from_file = |path: &Path| -> CliResult<ChannelConfig> {
        let mut config = ChannelConfig::from_text(&read_to_string(path)?)?;
        if let Some(seed) = seed {
            config.rng_seed = seed;
        }
        Ok(config)
    };
    let path = Path::new(spec);
    if path.is_file() {
        return from_file(path);
    }
    let preset = |make: fn(u64) -> ChannelConfig| -> CliResult<ChannelConfig> {
        let seed = seed.ok_or_else(|| {
            CliError::validation(format!("channel preset `{spec}` requires --seed"))
        })?;
        Ok(make(seed))
    };
    match spec {
        "zero-noise" => return preset(ChannelConfig::zero_noise),
        "paper-dense" => return preset(ChannelConfig::paper_dense),
        "paper-sparse" => return preset(ChannelConfig::paper_sparse),
        _ => {}
    }
    if let Ok(dir) = std::env::var(CONFIG_DIR_ENV) {
        let candidate = PathBuf::from(dir).join(spec);
        if candidate.is_file() {
            return from_file(&candidate);
        }
    }
    Err(CliError::validation(format!(
        "channel config `{spec}` is neither a file, a preset \
         (zero-noise, paper-dense, paper-sparse), nor found under ${CONFIG_DIR_ENV}"
    )))
}

fn random_bits(len: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random::<bool>()).collect()
}

// ---------------------------------------------------------------------------
// capacity
// ---------------------------------------------------------------------------

#[derive(Args)]
#[command(group(
    ArgGroup::new("mode")
        .required(true)
        .args(["c1", "c2", "c3", "c4", "cprime", "entropy", "energy", "partition"]),
))]
struct CapacityArgs {
    /// Mixtures of up to Q molecules with duplication.
    #[arg(long)]
    c1: bool,
    /// Mixtures of up to Q molecules without duplication.
    #[arg(long)]
    c2: bool,
    /// M molecules at one of L concentration levels each.
    #[arg(long)]
    c3: bool,
    /// Sparse one-hot mixtures with block size S.
    #[arg(long)]
    c4: bool,
    /// Confusion-limited capacity from Omega and Pc.
    #[arg(long)]
    cprime: bool,
    /// Binary entropy of --p.
    #[arg(long)]
    entropy: bool,
    /// Per-bit write-energy figures.
    #[arg(long)]
    energy: bool,
    /// Integer (W, M) minimizing W+M subject to W*M >= C.
    #[arg(long)]
    partition: bool,

    /// Library size M (accepts `B^N` notation, e.g. `4^40`).
    #[arg(long = "M", value_parser = parse_count)]
    m: Option<u128>,
    /// Selection bound Q (accepts `B^N` notation).
    #[arg(long = "Q", value_parser = parse_count)]
    q: Option<u128>,
    /// Concentration levels L.
    #[arg(long = "L")]
    l: Option<u32>,
    /// Sparsity S (accepts `B^N` notation).
    #[arg(long = "S", value_parser = parse_count)]
    s: Option<u128>,
    /// Exact state count Omega (accepts `B^N` notation).
    #[arg(long, value_parser = parse_count)]
    omega: Option<u128>,
    /// log2(Omega), for state spaces too large to write out.
    #[arg(long)]
    omega_log2: Option<f64>,
    /// Correct-identification probability Pc.
    #[arg(long)]
    pc: Option<f64>,
    /// Probability argument for --entropy.
    #[arg(long)]
    p: Option<f64>,
    /// Energy per monomer incorporation.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Energy per fluid-handling action.
    #[arg(long)]
    gamma: Option<f64>,
    /// Monomer alphabet size B.
    #[arg(long = "B")]
    b: Option<u32>,
    /// Polymer length N.
    #[arg(long = "N")]
    n: Option<u64>,
    /// Target capacity C for --partition.
    #[arg(long = "C")]
    c: Option<f64>,
    /// Emit a CSV curve instead of one value: `VAR=START:END[:STEP]`
    /// (VAR one of M, Q, L, S, pc) or `S=divisors`.
    #[arg(long)]
    sweep: Option<String>,
}

fn require<T: Copy>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::validation(format!("missing required {flag}")))
}

fn print_capacity_value(label: &str, value: &capacity::CapacityValue) {
    println!("{label} = {} bits", fmt_sig12(value.bits));
    if let Some(omega) = &value.exact_state_count {
        println!("  exact state count: {omega}");
    }
    match value.flag {
        Some(capacity::CapacityFlag::DegenerateSparsity) => {
            println!("  note: S = 1 is degenerate (every molecule present, zero one-hot choice)");
        }
        Some(capacity::CapacityFlag::ClampedNonNegative) => {
            println!("  note: raw expression was negative and clamped to zero");
        }
        None => {}
    }
}

fn run_capacity(args: CapacityArgs) -> CliResult<()> {
    if let Some(sweep) = &args.sweep {
        return run_capacity_sweep(&args, sweep);
    }
    if args.c1 {
        let m = require(args.m, "--M")?;
        let q = require(args.q, "--Q")?;
        let value = capacity::capacity_c1(m, q)?;
        print_capacity_value(&format!("C1(M={m}, Q={q})"), &value);
    } else if args.c2 {
        let m = require(args.m, "--M")?;
        let q = args.q.unwrap_or(m);
        let value = capacity::capacity_c2(m, q)?;
        print_capacity_value(&format!("C2(M={m}, Q={q})"), &value);
    } else if args.c3 {
        let m = require(args.m, "--M")?;
        let l = require(args.l, "--L")?;
        let value = capacity::capacity_c3(m, l)?;
        print_capacity_value(&format!("C3(M={m}, L={l})"), &value);
    } else if args.c4 {
        let m = require(args.m, "--M")?;
        let s = require(args.s, "--S")?;
        let value = capacity::capacity_c4(m, s)?;
        print_capacity_value(&format!("C4(M={m}, S={s})"), &value);
        if s == 1 {
            // The dense end of the sparsity axis belongs to C2.
            let dense = capacity::capacity_c2(m, m)?;
            print_capacity_value(&format!("C2(M={m}, Q={m})"), &dense);
        }
    } else if args.cprime {
        let pc = require(args.pc, "--pc")?;
        let state_count = match (args.omega, args.omega_log2) {
            (Some(omega), None) => StateCount::Exact(BigUint::from(omega)),
            (None, Some(log2)) => StateCount::Log2(log2),
            _ => {
                return Err(CliError::validation(
                    "--cprime needs exactly one of --omega / --omega-log2",
                ))
            }
        };
        let value = capacity::confusion_limited_capacity(&state_count, pc)?;
        print_capacity_value(&format!("C'(Pc={pc})"), &value);
    } else if args.entropy {
        let p = require(args.p, "--p")?;
        println!("H_B({p}) = {}", fmt_sig12(capacity::binary_entropy(p)?));
    } else if args.energy {
        let epsilon = args.epsilon.unwrap_or(1.0);
        let mut printed = false;
        if let Some(b) = args.b {
            let e = capacity::energy_per_bit_sparse(epsilon, b)?;
            println!(
                "sparse polymer regime (epsilon/log2 B): {} per bit",
                fmt_sig12(e)
            );
            printed = true;
        }
        if let Some(n) = args.n {
            println!(
                "dense mixture regime (epsilon*N/2): {} per bit",
                fmt_sig12(capacity::energy_per_bit_dense(epsilon, n))
            );
            printed = true;
        }
        if let Some(gamma) = args.gamma {
            println!(
                "premixed library (gamma/2): {} per bit",
                fmt_sig12(capacity::energy_per_bit_mixing(gamma))
            );
            printed = true;
        }
        if !printed {
            return Err(CliError::validation(
                "--energy needs at least one of --B, --N, --gamma",
            ));
        }
    } else if args.partition {
        let c = require(args.c, "--C")?;
        let partition = capacity::optimal_partition(c)?;
        println!(
            "W = {}, M = {} (W+M = {}, W*M = {})",
            partition.wells,
            partition.library,
            partition.wells + partition.library,
            partition.wells as u128 * partition.library as u128
        );
        println!(
            "continuous optimum: sqrt(C) = {}",
            fmt_sig12(partition.continuous)
        );
    }
    Ok(())
}

enum SweepValues {
    Counts(Vec<u128>),
    Floats(Vec<f64>),
}

fn parse_sweep(spec: &str, divisors_of: Option<u128>) -> CliResult<(String, SweepValues)> {
    let (var, range) = spec
        .split_once('=')
        .ok_or_else(|| CliError::validation("--sweep expects VAR=START:END[:STEP]"))?;
    let var = var.trim().to_string();
    if range.trim() == "divisors" {
        let m =
            divisors_of.ok_or_else(|| CliError::validation("S=divisors needs --M to be given"))?;
        let mut divisors: Vec<u128> = (1..=m).filter(|d| m % d == 0).collect();
        divisors.retain(|&d| d <= m);
        return Ok((var, SweepValues::Counts(divisors)));
    }
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() < 2 || parts.len() > 3 {
        return Err(CliError::validation("--sweep expects VAR=START:END[:STEP]"));
    }
    if var == "pc" {
        let start: f64 = parts[0]
            .parse()
            .map_err(|_| CliError::validation("bad sweep start"))?;
        let end: f64 = parts[1]
            .parse()
            .map_err(|_| CliError::validation("bad sweep end"))?;
        let step: f64 = parts
            .get(2)
            .map(|s| s.parse())
            .transpose()
            .map_err(|_| CliError::validation("bad sweep step"))?
            .unwrap_or(0.01);
        if step <= 0.0 || end < start {
            return Err(CliError::validation("sweep range must ascend"));
        }
        // Index-based grid; accumulation would drift off round values.
        let count = ((end - start) / step + 1e-9).floor() as usize;
        let values = (0..=count)
            .map(|i| (start + step * i as f64).min(end))
            .collect();
        return Ok((var, SweepValues::Floats(values)));
    }
    let start = parse_count(parts[0]).map_err(CliError::validation)?;
    let end = parse_count(parts[1]).map_err(CliError::validation)?;
    let step = parts
        .get(2)
        .map(|s| parse_count(s))
        .transpose()
        .map_err(CliError::validation)?
        .unwrap_or(1);
    if step == 0 || end < start {
        return Err(CliError::validation("sweep range must ascend"));
    }
    let mut values = Vec::new();
    let mut x = start;
    loop {
        values.push(x);
        match x.checked_add(step) {
            Some(next) if next <= end => x = next,
            _ => break,
        }
    }
    Ok((var, SweepValues::Counts(values)))
}

fn run_capacity_sweep(args: &CapacityArgs, spec: &str) -> CliResult<()> {
    let (var, values) = parse_sweep(spec, args.m)?;
    let counts = match &values {
        SweepValues::Counts(v) => v.clone(),
        SweepValues::Floats(v) => {
            // Only Pc sweeps are float-valued.
            if !(args.cprime && var == "pc") {
                return Err(CliError::validation(
                    "float sweeps only apply to --cprime pc",
                ));
            }
            let log2_omega = match (args.omega, args.omega_log2) {
                (Some(omega), None) => capacity::log2_biguint(&BigUint::from(omega)),
                (None, Some(log2)) => log2,
                _ => {
                    return Err(CliError::validation(
                        "--cprime needs exactly one of --omega / --omega-log2",
                    ))
                }
            };
            println!("pc,bits");
            for &pc in v {
                let value =
                    capacity::confusion_limited_capacity(&StateCount::Log2(log2_omega), pc)?;
                println!("{pc},{}", fmt_sig12(value.bits));
            }
            return Ok(());
        }
    };
    let row = |x: u128| -> CliResult<Option<f64>> {
        let value = match var.as_str() {
            "Q" if args.c1 => Some(capacity::capacity_c1(require(args.m, "--M")?, x)?),
            "Q" if args.c2 => {
                let m = require(args.m, "--M")?;
                if x > m {
                    None
                } else {
                    Some(capacity::capacity_c2(m, x)?)
                }
            }
            "L" if args.c3 => {
                let l = u32::try_from(x)
                    .map_err(|_| CliError::validation("L out of range in sweep"))?;
                Some(capacity::capacity_c3(require(args.m, "--M")?, l)?)
            }
            "S" if args.c4 => {
                let m = require(args.m, "--M")?;
                if !m.is_multiple_of(x) {
                    None
                } else {
                    Some(capacity::capacity_c4(m, x)?)
                }
            }
            "M" if args.c1 => Some(capacity::capacity_c1(x, require(args.q, "--Q")?)?),
            "M" if args.c2 => {
                // Q defaults to M row-by-row: the dense presence/absence bound.
                let q = args.q.unwrap_or(x);
                if q > x {
                    None
                } else {
                    Some(capacity::capacity_c2(x, q)?)
                }
            }
            "M" if args.c3 => Some(capacity::capacity_c3(x, require(args.l, "--L")?)?),
            "M" if args.c4 => {
                let s = require(args.s, "--S")?;
                if !x.is_multiple_of(s) {
                    None
                } else {
                    Some(capacity::capacity_c4(x, s)?)
                }
            }
            _ => {
                return Err(CliError::validation(format!(
                    "sweep variable `{var}` does not fit the selected mode"
                )))
            }
        };
        Ok(value.map(|v| v.bits))
    };
    println!("{var},bits");
    for &x in &counts {
        if let Some(bits) = row(x)? {
            println!("{x},{}", fmt_sig12(bits));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// gen-library
// ---------------------------------------------------------------------------

#[derive(Args)]
struct GenLibraryArgs {
    /// Number of compounds.
    #[arg(long = "M")]
    m: usize,
    /// One-hot block size stored with the library.
    #[arg(long = "S", default_value_t = 1)]
    s: usize,
    /// Concentration levels stored with the library.
    #[arg(long = "L", default_value_t = 2)]
    l: u32,
    /// Mass of the first compound in Daltons.
    #[arg(long, default_value_t = 150.0)]
    mass_start: f64,
    /// Mass spacing between consecutive compounds in Daltons.
    #[arg(long, default_value_t = 10.0)]
    mass_step: f64,
    /// Output library file.
    #[arg(short, long)]
    output: PathBuf,
}

fn run_gen_library(args: GenLibraryArgs) -> CliResult<()> {
    let library = CompoundLibrary::synthetic_with_masses(
        args.m,
        args.s,
        args.l,
        args.mass_start,
        args.mass_step,
    )?;
    write_file(&args.output, &library.to_text())?;
    println!(
        "wrote {} compounds (S = {}, L = {}) to {}",
        library.len(),
        library.block_size(),
        library.levels(),
        args.output.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// encode
// ---------------------------------------------------------------------------

#[derive(Args)]
#[command(group(
    ArgGroup::new("payload").required(true).args(["bits", "image", "random_bits"]),
))]
struct EncodeArgs {
    /// Payload as an ASCII bit file.
    #[arg(long)]
    bits: Option<PathBuf>,
    /// Payload as a portable bitmap (P1 or P4).
    #[arg(long)]
    image: Option<PathBuf>,
    /// Generate a random payload of this many bits (requires --seed).
    #[arg(long)]
    random_bits: Option<usize>,
    /// Seed for --random-bits.
    #[arg(long)]
    seed: Option<u64>,
    /// Compound library file.
    #[arg(long)]
    library: PathBuf,
    /// Encoding scheme.
    #[arg(long)]
    scheme: Scheme,
    /// Concentration levels (dense scheme; power of two).
    #[arg(long = "L")]
    l: Option<u32>,
    /// One-hot block size override (sparse scheme; power of two).
    #[arg(long = "S")]
    s: Option<usize>,
    /// Error-correcting codebook: `hamming74` or a codebook file.
    #[arg(long)]
    ecc: Option<String>,
    /// Block-interleaver stride for the coded stream.
    #[arg(long)]
    ecc_stride: Option<usize>,
    /// Output layout file; a header-only manifest is written alongside as
    /// `<output>.manifest`.
    #[arg(short, long)]
    output: PathBuf,
}

fn run_encode(args: EncodeArgs) -> CliResult<()> {
    let library = load_library(&args.library, args.s, args.l)?;
    let (payload, image_size) = if let Some(path) = &args.bits {
        (codec::read_bits_text(&read_to_string(path)?)?, None)
    } else if let Some(path) = &args.image {
        let data = std::fs::read(path)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        let image = codec::read_pbm(&data)?;
        let size = (image.width, image.height);
        (codec::image_to_bits(&image), Some(size))
    } else {
        let len = args.random_bits.expect("clap group guarantees one source");
        let seed = args
            .seed
            .ok_or_else(|| CliError::validation("--random-bits requires --seed"))?;
        (random_bits(len, seed), None)
    };
    if payload.is_empty() {
        return Err(CliError::validation("payload is empty"));
    }

    let (mixture_bits, ecc_manifest) = match &args.ecc {
        None => (payload, None),
        Some(spec) => {
            let codebook = load_codebook(spec)?;
            let coded = ecc::ecc_encode(&payload, &codebook, args.ecc_stride)?;
            let info = EccManifest {
                data_bits: payload.len(),
                codeword_length: codebook.codeword_length(),
                stride: args.ecc_stride,
            };
            (coded, Some(info))
        }
    };

    let mut layout = match args.scheme {
        Scheme::Dense => codec::encode_dense(&mixture_bits, &library, library.levels())?,
        Scheme::Sparse => codec::encode_sparse(&mixture_bits, &library)?,
    };
    layout.manifest.library_ref = Some(args.library.display().to_string());
    layout.manifest.image_size = image_size;
    layout.manifest.ecc = ecc_manifest;

    write_file(&args.output, &codec::write_layout(&layout))?;
    let manifest_path = args.output.with_extension(format!(
        "{}manifest",
        args.output
            .extension()
            .map(|e| format!("{}.", e.to_string_lossy()))
            .unwrap_or_default()
    ));
    write_file(&manifest_path, &codec::write_manifest(&layout.manifest))?;

    println!(
        "wells: {}\nbits_per_well: {}\npadding_bits: {}",
        layout.manifest.wells,
        layout.manifest.bits_per_well(),
        layout.manifest.padding_bits
    );
    if let Some(ecc) = layout.manifest.ecc {
        println!(
            "ecc: {} data bits -> {} coded bits",
            ecc.data_bits, layout.manifest.original_bit_length
        );
    }
    println!(
        "wrote layout to {} and manifest to {}",
        args.output.display(),
        manifest_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SimulateArgs {
    /// Plate layout file to read out.
    #[arg(long)]
    layout: PathBuf,
    /// Channel config: file path, preset name, or $MIXCODE_CONFIG_DIR entry.
    #[arg(long)]
    channel_config: String,
    /// Seed override (mandatory when using a preset).
    #[arg(long)]
    seed: Option<u64>,
    /// Library override; defaults to the layout manifest's library
    /// reference.
    #[arg(long)]
    library: Option<PathBuf>,
    /// Run single-threaded (output is identical either way).
    #[arg(long)]
    serial: bool,
    /// Output spectra file.
    #[arg(short, long)]
    output: PathBuf,
}

/// The manifest's library reference is resolved relative to the layout
/// file's directory.
fn resolve_library_ref(layout_path: &Path, library_ref: &str) -> PathBuf {
    let candidate = PathBuf::from(library_ref);
    if candidate.is_file() {
        return candidate;
    }
    layout_path
        .parent()
        .map(|dir| dir.join(library_ref))
        .unwrap_or(candidate)
}

fn run_simulate(args: SimulateArgs) -> CliResult<()> {
    let layout = codec::read_layout(&read_to_string(&args.layout)?)?;
    let library_path = match &args.library {
        Some(path) => path.clone(),
        None => {
            let reference = layout.manifest.library_ref.as_ref().ok_or_else(|| {
                CliError::validation("layout has no library reference; pass --library")
            })?;
            resolve_library_ref(&args.layout, reference)
        }
    };
    let library = load_library(
        &library_path,
        Some(layout.manifest.block_size),
        Some(layout.manifest.levels),
    )?;
    let config = load_channel_config(&args.channel_config, args.seed)?;
    let spectra = if args.serial {
        readout::simulate_readout_serial(&layout, &library, &config)?
    } else {
        readout::simulate_readout(&layout, &library, &config)?
    };
    write_file(&args.output, &readout::write_spectra(&spectra))?;
    println!("effective channel config:");
    print!("{}", config.to_text());
    println!(
        "wrote {} spectra to {}",
        spectra.len(),
        args.output.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// decode
// ---------------------------------------------------------------------------

#[derive(Args)]
struct DecodeArgs {
    /// Spectra file from `simulate` (or an instrument export in the same
    /// format).
    #[arg(long)]
    spectra: PathBuf,
    /// Compound library file.
    #[arg(long)]
    library: PathBuf,
    /// Manifest (or full layout) file; only the header is read.
    #[arg(long)]
    manifest: PathBuf,
    /// Calibration spectra (labelled wells), required for dense decoding.
    #[arg(long)]
    calibration_spectra: Option<PathBuf>,
    /// Ground-truth layout of the calibration plate.
    #[arg(long)]
    calibration_truth: Option<PathBuf>,
    /// Channel config used for peak matching (file or preset; defaults
    /// match the simulator defaults).
    #[arg(long)]
    channel_config: Option<String>,
    /// Error-correcting codebook used at encode time.
    #[arg(long)]
    ecc: Option<String>,
    /// Noise-guessing budget (default: all patterns of weight <= 3).
    #[arg(long)]
    grand_budget: Option<u64>,
    /// Use plain syndrome decoding instead of noise guessing
    /// (hamming74 only).
    #[arg(long)]
    syndrome: bool,
    /// Ground-truth layout; enables the accuracy report.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Decoded payload output: a bit file, or a PBM when the manifest
    /// records image dimensions and the path ends in `.pbm`.
    #[arg(short, long)]
    output: PathBuf,
    /// Write the decoded mixture states as a layout file.
    #[arg(long)]
    layout_out: Option<PathBuf>,
    /// Write a run report (requires --truth).
    #[arg(long)]
    report: Option<PathBuf>,
}

fn run_decode(args: DecodeArgs) -> CliResult<()> {
    if args.report.is_some() && args.truth.is_none() {
        return Err(CliError::validation(
            "--report needs --truth: accuracies are only computed against a \
             persisted truth layout",
        ));
    }
    let manifest = codec::read_manifest(&read_to_string(&args.manifest)?)?;
    let library = load_library(
        &args.library,
        Some(manifest.block_size),
        Some(manifest.levels),
    )?;
    let spectra = readout::read_spectra(&read_to_string(&args.spectra)?)?;
    // Validate the truth layout up front so no output is written and then
    // orphaned by a late shape error.
    let truth = args
        .truth
        .as_ref()
        .map(|path| -> CliResult<codec::PlateLayout> {
            let truth = codec::read_layout(&read_to_string(path)?)?;
            if truth.manifest.wells != manifest.wells
                || truth.manifest.library_size != manifest.library_size
            {
                return Err(CliError::validation(
                    "truth layout shape does not match the manifest",
                ));
            }
            Ok(truth)
        })
        .transpose()?;
    let matcher = match &args.channel_config {
        Some(spec) => PeakMatcher::from_config(&load_channel_config(spec, Some(0))?),
        None => PeakMatcher {
            mass_tolerance_ppm: readout::DEFAULT_MASS_TOLERANCE_PPM,
            sodiation_mass_shift: readout::DEFAULT_SODIATION_SHIFT,
        },
    };

    let calibration = match (&args.calibration_spectra, &args.calibration_truth) {
        (Some(spectra_path), Some(truth_path)) => {
            let calib_spectra = readout::read_spectra(&read_to_string(spectra_path)?)?;
            let calib_truth = codec::read_layout(&read_to_string(truth_path)?)?;
            Some((calib_spectra, calib_truth))
        }
        (None, None) => None,
        _ => {
            return Err(CliError::validation(
                "--calibration-spectra and --calibration-truth go together",
            ))
        }
    };

    // Mixture-level decode.
    let (decoded_layout, mixture_bits, empty_blocks) = match manifest.scheme {
        Scheme::Dense => {
            let (calib_spectra, calib_truth) = calibration.as_ref().ok_or_else(|| {
                CliError::validation(
                    "dense decoding requires --calibration-spectra/--calibration-truth",
                )
            })?;
            let classifier =
                readout::fit_classifier(calib_spectra, calib_truth, &library, &matcher)?;
            let (layout, bits) =
                readout::decode_dense_spectra(&spectra, &classifier, &library, &manifest)?;
            (layout, bits, None)
        }
        Scheme::Sparse => {
            let background = calibration
                .as_ref()
                .map(|(calib_spectra, calib_truth)| {
                    readout::estimate_background(calib_spectra, calib_truth, &library, &matcher)
                })
                .transpose()?;
            let decode = readout::decode_sparse_spectra(
                &spectra,
                &library,
                &manifest,
                &matcher,
                background.as_deref(),
            )?;
            (decode.layout, decode.bits, Some(decode.empty_blocks))
        }
    };

    // Optional channel-coding stage.
    let (payload, ecc_stats) = match (&args.ecc, manifest.ecc) {
        (Some(spec), ecc_info) => {
            let codebook = load_codebook(spec)?;
            let data_len = ecc_info.map(|info| info.data_bits).ok_or_else(|| {
                CliError::validation("--ecc given but the manifest records no ecc_data_bits")
            })?;
            let stride = ecc_info.and_then(|info| info.stride);
            if args.syndrome {
                if codebook != Codebook::hamming74() {
                    return Err(CliError::validation(
                        "--syndrome only applies to the hamming74 codebook",
                    ));
                }
                let deinterleaved = ecc::deinterleave(&mixture_bits, stride)?;
                if deinterleaved.len() % 7 != 0 {
                    return Err(CliError::validation(format!(
                        "coded stream of {} bits is not a whole number of 7-bit codewords",
                        deinterleaved.len()
                    )));
                }
                let mut data = Vec::with_capacity(data_len);
                for block in deinterleaved.chunks(7) {
                    let word = ecc::pack_word(block);
                    let decoded = ecc::hamming74_decode(word);
                    data.extend(ecc::unpack_word(decoded, 4));
                }
                data.truncate(data_len);
                (data, Some((codebook, Vec::new(), 0usize)))
            } else {
                let order = match args.grand_budget {
                    Some(budget) => NoiseGuessOrder::new(codebook.codeword_length(), budget)?,
                    None => NoiseGuessOrder::default_for(codebook.codeword_length())?,
                };
                let outcome = ecc::ecc_decode(&mixture_bits, data_len, &codebook, stride, &order)?;
                (
                    outcome.data,
                    Some((codebook, outcome.guesses, outcome.abandoned_blocks)),
                )
            }
        }
        (None, Some(_)) => {
            return Err(CliError::validation(
                "manifest records an ECC stage; pass --ecc with the codebook",
            ))
        }
        (None, None) => (mixture_bits, None),
    };

    // Payload output: PBM when the image shape is known and asked for.
    let wrote_image =
        manifest.image_size.is_some() && args.output.extension().is_some_and(|e| e == "pbm");
    if wrote_image {
        let (width, height) = manifest.image_size.expect("checked above");
        let image = codec::bits_to_image(&payload, width, height)?;
        write_file(&args.output, &codec::write_pbm(&image))?;
    } else {
        write_file(&args.output, &codec::write_bits_text(&payload))?;
    }
    println!(
        "decoded {} payload bits to {}",
        payload.len(),
        args.output.display()
    );
    if let Some(empty) = empty_blocks {
        if empty > 0 {
            println!("note: {empty} all-zero blocks defaulted to index 0");
        }
    }

    if let Some(path) = &args.layout_out {
        write_file(path, &codec::write_layout(&decoded_layout))?;
        println!("wrote decoded layout to {}", path.display());
    }

    if let (Some(report_path), Some(truth)) = (&args.report, &truth) {
        let mut report = RunReport::from_layouts(truth, &decoded_layout)?;
        if let Some((codebook, guesses, abandoned)) = &ecc_stats {
            report = report.with_ecc(codebook, guesses, *abandoned);
        }
        if let Some(empty) = empty_blocks {
            report = report.with_sparse_diagnostics(empty);
        }
        report = report.with_intensity_histograms(&spectra, truth, &library, &matcher, 24);
        write_file(report_path, &write_report(&report))?;
        println!(
            "pc: {}\nbit_accuracy: {}\nreport written to {}",
            fmt_sig12(report.pc),
            fmt_sig12(report.bit_accuracy),
            report_path.display()
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

#[derive(Args)]
struct ReportArgs {
    /// Ground-truth layout file.
    #[arg(long)]
    truth: PathBuf,
    /// Decoded layout file.
    #[arg(long)]
    decoded: PathBuf,
    /// Spectra file; adds per-compound intensity histograms.
    #[arg(long)]
    spectra: Option<PathBuf>,
    /// Library file (needed with --spectra).
    #[arg(long)]
    library: Option<PathBuf>,
    /// Channel config for peak matching with --spectra.
    #[arg(long)]
    channel_config: Option<String>,
    /// Codebook for a rate-admissibility verdict.
    #[arg(long)]
    ecc: Option<String>,
    /// Output file (defaults to standard output).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn run_report(args: ReportArgs) -> CliResult<()> {
    let truth = codec::read_layout(&read_to_string(&args.truth)?)?;
    let decoded = codec::read_layout(&read_to_string(&args.decoded)?)?;
    let mut report = RunReport::from_layouts(&truth, &decoded)?;
    if let Some(spec) = &args.ecc {
        let codebook = load_codebook(spec)?;
        report = report.with_ecc(&codebook, &[], 0);
    }
    if let Some(spectra_path) = &args.spectra {
        let library_path = args
            .library
            .clone()
            .or_else(|| {
                truth
                    .manifest
                    .library_ref
                    .as_ref()
                    .map(|r| resolve_library_ref(&args.truth, r))
            })
            .ok_or_else(|| CliError::validation("--spectra needs --library"))?;
        let library = load_library(
            &library_path,
            Some(truth.manifest.block_size),
            Some(truth.manifest.levels),
        )?;
        let spectra = readout::read_spectra(&read_to_string(spectra_path)?)?;
        let matcher = match &args.channel_config {
            Some(spec) => PeakMatcher::from_config(&load_channel_config(spec, Some(0))?),
            None => PeakMatcher {
                mass_tolerance_ppm: readout::DEFAULT_MASS_TOLERANCE_PPM,
                sodiation_mass_shift: readout::DEFAULT_SODIATION_SHIFT,
            },
        };
        report = report.with_intensity_histograms(&spectra, &truth, &library, &matcher, 24);
    }
    let text = write_report(&report);
    match &args.output {
        Some(path) => {
            write_file(path, &text)?;
            let mut summary = String::new();
            let _ = writeln!(summary, "pc: {}", fmt_sig12(report.pc));
            let _ = writeln!(summary, "bit_accuracy: {}", fmt_sig12(report.bit_accuracy));
            let _ = writeln!(
                summary,
                "compounds under 1% raw error: {} / {}",
                report.compounds_under_one_percent,
                report.per_compound.len()
            );
            print!("{summary}");
            println!("report written to {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}
