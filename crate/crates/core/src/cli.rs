//! Command-line surface: generate, keygen, embed, extract, test, score,
//! repair, send, recv. Exit code 0 on success, 1 on domain failure (for
//! example a Failure verdict from `test`), 2 on usage errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::RngCore;
use serde_json::json;

use crate::analyze::{self, KeyFamily, SweepOptions};
use crate::bitio::BitSequence;
use crate::channel::{self, ChannelSession};
use crate::embed::{self, KeyFile, Keying, SkipList};
use crate::nist::{self, SuiteConfig, Verdict};
use crate::rbg::{self, RbgConfig, SampleWidth, Source};

#[derive(Parser)]
#[command(name = "randembed", version, about = "Embed information in certified-random bit streams")]
struct Cli {
    /// Worker threads for suite fan-out (falls back to RANDEMBED_THREADS,
    /// then to the available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write a JSON run report here.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Packed,
    Ascii,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SourceKind {
    Pseudorandom,
    Chaotic,
    Sample,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RepairMode {
    Skip,
    Replace,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a carrier bit sequence through the ADC/derivative/LSB pipeline.
    Generate(GenerateArgs),
    /// Generate a random embedding key.
    Keygen(KeygenArgs),
    /// Embed a fixed scheme or a message into a carrier.
    Embed(EmbedArgs),
    /// Extract embedded-channel bits from a sequence.
    Extract(ExtractArgs),
    /// Run the certification suite over a sequence.
    Test(TestArgs),
    /// Strength sweep: embed at each K in a grid and certify.
    Score(ScoreArgs),
    /// Embed, certify, and repair a failing sequence.
    Repair(RepairArgs),
    /// Encode covert-channel messages into a fresh carrier stream.
    Send(SendArgs),
    /// Decode covert-channel messages from a stream.
    Recv(RecvArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    /// Output length in bits.
    #[arg(long)]
    bits: usize,
    #[arg(long, value_enum, default_value = "pseudorandom")]
    source: SourceKind,
    /// Sample file for --source sample.
    #[arg(long)]
    sample: Option<PathBuf>,
    #[arg(long, default_value = "8")]
    sample_width: u8,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "8")]
    adc_bits: u32,
    #[arg(long, default_value = "3")]
    derivative: usize,
    #[arg(long, default_value = "5")]
    lsb: u32,
    #[arg(long, value_enum, default_value = "packed")]
    format: Format,
}

#[derive(Args)]
struct KeygenArgs {
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "5", allow_hyphen_values = true)]
    g: i64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    key: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Message bit file; omit to embed the fixed scheme.
    #[arg(long)]
    message: Option<PathBuf>,
    /// Block length in bits.
    #[arg(long, default_value = "1000000")]
    block: usize,
    /// Comma-separated block indices exempt from embedding.
    #[arg(long, value_delimiter = ',')]
    skip: Vec<usize>,
    #[arg(long, value_enum, default_value = "packed")]
    format: Format,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    key: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Number of embedded bits to read.
    #[arg(long)]
    bits: usize,
    #[arg(long, default_value = "1000000")]
    block: usize,
    #[arg(long, value_delimiter = ',')]
    skip: Vec<usize>,
    #[arg(long, value_enum, default_value = "packed")]
    format: Format,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "1000000")]
    block_len: usize,
    /// Cap on the number of blocks tested (default: all full blocks).
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long, default_value = "0.01")]
    alpha: f64,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "5", allow_hyphen_values = true)]
    g: i64,
    /// Comma-separated K grid; defaults to the built-in sweep grid.
    #[arg(long, value_delimiter = ',')]
    grid: Vec<usize>,
    #[arg(long, default_value = "1")]
    trials: usize,
    #[arg(long, default_value = "1000000")]
    block_len: usize,
    /// Derive a fresh random mask per trial from this seed instead of the
    /// full mask.
    #[arg(long)]
    random_masks: Option<u64>,
}

#[derive(Args)]
struct RepairArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    key: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "skip")]
    mode: RepairMode,
    /// Fresh random bits for --mode replace.
    #[arg(long)]
    fresh: Option<PathBuf>,
    #[arg(long, default_value = "1000000")]
    block_len: usize,
    #[arg(long, value_enum, default_value = "packed")]
    format: Format,
}

#[derive(Args)]
struct SendArgs {
    #[arg(long)]
    key: PathBuf,
    /// Message files (raw bytes), embedded in order.
    #[arg(long)]
    message: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Stream length in bits.
    #[arg(long)]
    length: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    filler_seed: Option<u64>,
    #[arg(long, default_value = "1000000")]
    block_len: usize,
    #[arg(long, value_enum, default_value = "packed")]
    format: Format,
}

#[derive(Args)]
struct RecvArgs {
    #[arg(long)]
    key: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    /// Directory for decoded messages (msg_000.bin, ...).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "1000000")]
    block_len: usize,
}

/// Parses argv and runs the selected subcommand.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    configure_threads(cli.threads);
    match run(cli.command, cli.report.as_deref()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn configure_threads(cli_threads: Option<usize>) {
    let threads = cli_threads.or_else(|| {
        std::env::var("RANDEMBED_THREADS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        // a global pool can only be installed once per process; later calls
        // keep the first configuration
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn run(command: Command, report_path: Option<&Path>) -> Result<i32> {
    match command {
        Command::Generate(a) => cmd_generate(a, report_path),
        Command::Keygen(a) => cmd_keygen(a, report_path),
        Command::Embed(a) => cmd_embed(a, report_path),
        Command::Extract(a) => cmd_extract(a, report_path),
        Command::Test(a) => cmd_test(a, report_path),
        Command::Score(a) => cmd_score(a, report_path),
        Command::Repair(a) => cmd_repair(a, report_path),
        Command::Send(a) => cmd_send(a, report_path),
        Command::Recv(a) => cmd_recv(a, report_path),
    }
}

fn os_seed() -> u64 {
    rand::rngs::OsRng.next_u64()
}

fn write_sequence(seq: &BitSequence, path: &Path, format: Format) -> Result<()> {
    match format {
        Format::Packed => {
            let file = fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            seq.write_bits_file(std::io::BufWriter::new(file))?;
        }
        Format::Ascii => {
            fs::write(path, seq.to_ascii())
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(())
}

fn load_sequence(path: &Path) -> Result<BitSequence> {
    BitSequence::load(path).with_context(|| format!("loading {}", path.display()))
}

fn load_key(path: &Path) -> Result<KeyFile> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading key {}", path.display()))?;
    Ok(embed::parse_key_file(&text)?)
}

fn emit_report(path: Option<&Path>, report: &serde_json::Value) -> Result<()> {
    if let Some(path) = path {
        fs::write(path, serde_json::to_string_pretty(report)?)
            .with_context(|| format!("writing report {}", path.display()))?;
    }
    Ok(())
}

fn cmd_generate(a: GenerateArgs, report_path: Option<&Path>) -> Result<i32> {
    let seed = a.seed.unwrap_or_else(os_seed);
    let source = match a.source {
        SourceKind::Pseudorandom => Source::Pseudorandom { seed },
        SourceKind::Chaotic => Source::ChaoticMap { seed, r: rbg::LOGISTIC_R },
        SourceKind::Sample => {
            let path = a.sample.clone().context("--source sample requires --sample <path>")?;
            let width = match a.sample_width {
                8 => SampleWidth::U8,
                16 => SampleWidth::U16Le,
                other => bail!("unsupported --sample-width {other} (use 8 or 16)"),
            };
            Source::SampleFile { path, width }
        }
    };
    let config = RbgConfig {
        source,
        adc_bits: a.adc_bits,
        derivative_order: a.derivative,
        lsb_count: a.lsb,
        output_bits: a.bits,
    };
    let bits = rbg::generate(&config)?;
    write_sequence(&bits, &a.out, a.format)?;
    println!("generated {} bits -> {}", bits.len(), a.out.display());
    emit_report(
        report_path,
        &json!({
            "command": "generate",
            "config": config,
            "seed": seed,
            "result": { "bits": bits.len(), "out": a.out },
        }),
    )?;
    Ok(0)
}

fn cmd_keygen(a: KeygenArgs, report_path: Option<&Path>) -> Result<i32> {
    let seed = a.seed.unwrap_or_else(os_seed);
    let key = embed::keygen(a.k, a.g, seed)?;
    let key_file = KeyFile { keying: Keying::Single(key), seed: Some(seed) };
    fs::write(&a.out, embed::format_key_file(&key_file))
        .with_context(|| format!("writing key {}", a.out.display()))?;
    println!(
        "key K={} G={} ({} scheme bits) -> {}",
        a.k,
        a.g,
        a.k - 1,
        a.out.display()
    );
    emit_report(
        report_path,
        &json!({
            "command": "keygen",
            "config": { "k": a.k, "g": a.g, "seed": seed },
            "result": { "out": a.out, "key_space": embed::key_space(a.k).to_string() },
        }),
    )?;
    Ok(0)
}

fn cmd_embed(a: EmbedArgs, report_path: Option<&Path>) -> Result<i32> {
    let key_file = load_key(&a.key)?;
    let carrier = load_sequence(&a.input)?;
    let skip = SkipList::from_indices(a.skip.iter().copied());
    let out = match &a.message {
        None => embed::embed_fixed(&carrier, &key_file.keying, &skip, a.block)?,
        Some(msg_path) => {
            let message = load_sequence(msg_path)?;
            let filler = key_file.seed.unwrap_or_else(|| key_file.keying.derived_filler_seed());
            embed::embed_message_seeded(&carrier, &key_file.keying, &message, &skip, a.block, filler)?
        }
    };
    write_sequence(&out, &a.out, a.format)?;
    let cap = embed::capacity(carrier.len(), &key_file.keying, &skip, a.block)?;
    println!("embedded -> {} (capacity {} bits)", a.out.display(), cap);
    emit_report(
        report_path,
        &json!({
            "command": "embed",
            "config": {
                "key": a.key, "block": a.block, "skip": a.skip,
                "message": a.message,
            },
            "result": { "out": a.out, "capacity": cap },
        }),
    )?;
    Ok(0)
}

fn cmd_extract(a: ExtractArgs, report_path: Option<&Path>) -> Result<i32> {
    let key_file = load_key(&a.key)?;
    let seq = load_sequence(&a.input)?;
    let skip = SkipList::from_indices(a.skip.iter().copied());
    let bits = embed::extract_message(&seq, &key_file.keying, &skip, a.block, a.bits)?;
    write_sequence(&bits, &a.out, a.format)?;
    println!("extracted {} bits -> {}", bits.len(), a.out.display());
    emit_report(
        report_path,
        &json!({
            "command": "extract",
            "config": { "key": a.key, "block": a.block, "skip": a.skip, "bits": a.bits },
            "result": { "out": a.out },
        }),
    )?;
    Ok(0)
}

fn cmd_test(a: TestArgs, report_path: Option<&Path>) -> Result<i32> {
    let seq = load_sequence(&a.input)?;
    let config = SuiteConfig { alpha: a.alpha, ..SuiteConfig::with_block_len(a.block_len) };
    let part = seq.partition(config.block_len);
    let mut blocks = part.blocks;
    if let Some(limit) = a.blocks {
        blocks.truncate(limit);
    }
    if blocks.is_empty() {
        bail!("no full blocks of {} bits in {}", a.block_len, a.input.display());
    }
    let report = nist::run_suite(&blocks, &config)?;
    print!("{}", report.render_text());
    emit_report(
        report_path,
        &json!({
            "command": "test",
            "config": config,
            "result": report,
        }),
    )?;
    Ok(if report.verdict == Verdict::Success { 0 } else { 1 })
}

fn cmd_score(a: ScoreArgs, report_path: Option<&Path>) -> Result<i32> {
    let seq = load_sequence(&a.input)?;
    let grid = if a.grid.is_empty() { analyze::default_grid() } else { a.grid.clone() };
    let config = SuiteConfig::with_block_len(a.block_len);
    let options = SweepOptions {
        key_family: match a.random_masks {
            Some(seed) => KeyFamily::RandomMask { seed },
            None => KeyFamily::FullMask,
        },
        trials: a.trials,
        ..SweepOptions::default()
    };
    let report = analyze::strength_sweep(&seq, &grid, a.g, &config, &options)?;
    for point in &report.grid {
        println!(
            "K={:<5} pass_probability={:.2} removed_blocks={:?}",
            point.k,
            point.pass_probability,
            point.trials.iter().map(|t| t.removed_blocks).collect::<Vec<_>>()
        );
    }
    match report.minimal_passing_k {
        Some(k) => println!("minimal passing K: {k}"),
        None => println!("no K in the grid passes"),
    }
    emit_report(
        report_path,
        &json!({
            "command": "score",
            "config": { "g": a.g, "grid": grid, "trials": a.trials, "block_len": a.block_len },
            "result": report,
        }),
    )?;
    Ok(0)
}

fn cmd_repair(a: RepairArgs, report_path: Option<&Path>) -> Result<i32> {
    let key_file = load_key(&a.key)?;
    let carrier = load_sequence(&a.input)?;
    let config = SuiteConfig::with_block_len(a.block_len);
    let embedded = embed::embed_fixed(&carrier, &key_file.keying, &SkipList::empty(), a.block_len)?;
    let part = embedded.partition(a.block_len);
    let first = nist::run_suite(&part.blocks, &config)?;
    if first.verdict == Verdict::Success {
        write_sequence(&embedded, &a.out, a.format)?;
        println!("already passing; no repair needed");
        emit_report(
            report_path,
            &json!({
                "command": "repair",
                "config": { "key": a.key, "block_len": a.block_len, "mode": format!("{:?}", a.mode) },
                "result": { "verdict": "Success", "repaired": false, "skip": [] },
            }),
        )?;
        return Ok(0);
    }
    let failing = first.failing_blocks_union();
    println!("suite failed; {} blocks attributed", failing.len());
    let (final_seq, skip, verdict) = match a.mode {
        RepairMode::Skip => {
            let (repaired, skip) = analyze::repair_skip(&carrier, &key_file.keying, &first)?;
            let part = repaired.partition(a.block_len);
            let second = nist::run_suite(&part.blocks, &config)?;
            (repaired, skip, second.verdict)
        }
        RepairMode::Replace => {
            let fresh_path = a.fresh.clone().context("--mode replace requires --fresh <path>")?;
            let fresh = load_sequence(&fresh_path)?;
            let skip = SkipList(failing.clone());
            let spliced = analyze::repair_replace(&carrier, &skip, &fresh, a.block_len)?;
            let re_embedded =
                embed::embed_fixed(&spliced, &key_file.keying, &SkipList::empty(), a.block_len)?;
            let part = re_embedded.partition(a.block_len);
            let second = nist::run_suite(&part.blocks, &config)?;
            (re_embedded, skip, second.verdict)
        }
    };
    write_sequence(&final_seq, &a.out, a.format)?;
    println!(
        "repair ({:?}) -> {} [{}]",
        a.mode,
        a.out.display(),
        if verdict == Verdict::Success { "Success" } else { "Failure" }
    );
    emit_report(
        report_path,
        &json!({
            "command": "repair",
            "config": { "key": a.key, "block_len": a.block_len, "mode": format!("{:?}", a.mode) },
            "result": {
                "verdict": verdict,
                "repaired": true,
                "skip": skip.0.iter().collect::<Vec<_>>(),
            },
        }),
    )?;
    Ok(if verdict == Verdict::Success { 0 } else { 1 })
}

fn payload_bits_from_bytes(bytes: &[u8]) -> BitSequence {
    BitSequence::read_packed(bytes, bytes.len() * 8).expect("byte payload always packs")
}

fn cmd_send(a: SendArgs, report_path: Option<&Path>) -> Result<i32> {
    let key_file = load_key(&a.key)?;
    let seed = a.seed.unwrap_or_else(os_seed);
    let filler_seed = a
        .filler_seed
        .or(key_file.seed)
        .unwrap_or_else(|| key_file.keying.derived_filler_seed());
    let session = ChannelSession {
        keying: key_file.keying,
        carrier: RbgConfig::with_defaults(Source::Pseudorandom { seed }, a.length),
        block_len: a.block_len,
        filler_seed,
    };
    let messages: Vec<BitSequence> = a
        .message
        .iter()
        .map(|p| {
            let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(payload_bits_from_bytes(&bytes))
        })
        .collect::<Result<_>>()?;
    let stream = channel::encode_stream(&session, &messages)?;
    write_sequence(&stream, &a.out, a.format)?;
    println!(
        "sent {} message(s) in a {}-bit stream -> {}",
        messages.len(),
        stream.len(),
        a.out.display()
    );
    emit_report(
        report_path,
        &json!({
            "command": "send",
            "config": {
                "key": a.key, "length": a.length, "block_len": a.block_len,
                "seed": seed, "filler_seed": filler_seed,
            },
            "result": { "out": a.out, "messages": messages.len() },
        }),
    )?;
    Ok(0)
}

fn cmd_recv(a: RecvArgs, report_path: Option<&Path>) -> Result<i32> {
    let key_file = load_key(&a.key)?;
    let stream = load_sequence(&a.input)?;
    let session = ChannelSession {
        keying: key_file.keying,
        carrier: RbgConfig::with_defaults(Source::Pseudorandom { seed: 0 }, stream.len()),
        block_len: a.block_len,
        filler_seed: 0,
    };
    let (payloads, diag) = channel::decode_stream(&stream, &session)?;
    fs::create_dir_all(&a.out)
        .with_context(|| format!("creating {}", a.out.display()))?;
    let mut written = Vec::new();
    for (i, payload) in payloads.iter().enumerate() {
        let path = a.out.join(format!("msg_{i:03}.bin"));
        fs::write(&path, payload.write_packed())?;
        written.push(json!({ "path": path, "bits": payload.len() }));
    }
    println!(
        "decoded {} frame(s), {} CRC failure(s) -> {}",
        diag.frames_decoded,
        diag.crc_failures,
        a.out.display()
    );
    emit_report(
        report_path,
        &json!({
            "command": "recv",
            "config": { "key": a.key, "block_len": a.block_len },
            "result": { "messages": written, "diagnostics": diag },
        }),
    )?;
    Ok(0)
}
