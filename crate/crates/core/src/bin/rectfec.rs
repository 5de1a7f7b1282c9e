use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use rectfec::analysis::{self, Statistic};
use rectfec::baseline::run_tcp_block;
use rectfec::blockfile::{read_block, write_block};
use rectfec::channel::{Channel, ChannelConfig, ChannelMode, StreamId};
use rectfec::codec::{choose_dimensions, decode_peel, encode_padded, CodeParams};
use rectfec::feedback::{build_gadget, frs_cells, min_frs, CostFunction};
use rectfec::packet::{ErrorConfiguration, GridCoord, Packet, DEFAULT_PACKET_LEN};
use rectfec::protocol::{reconstruct, run_block, run_stream, ProtocolConfig, DEFAULT_MAX_ITERS};
use rectfec::sweep::{experiment_sweep, write_csv, PPolicy, SweepConfig};
use rectfec::{Error, Result};

#[derive(Parser)]
#[command(name = "rectfec", version, about = "Rectangular erasure codes with minimum feedback repair")]
struct Cli {
    /// Base seed of every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Emit JSON.
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    /// Emit CSV.
    #[arg(long, global = true)]
    csv: bool,
    /// Cap on emissions per session.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a file into packets and write its encoded block.
    Encode(EncodeArgs),
    /// Peel a block file and write the recovered data.
    Decode(DecodeArgs),
    /// Minimum feedback repair set of an error configuration.
    Minfrs(MinfrsArgs),
    /// Single-block protocol trials.
    SimulateBlock(BlockArgs),
    /// Stream protocol trials.
    SimulateStream(StreamArgs),
    /// Selective-repeat ARQ trials.
    SimulateTcp(TcpArgs),
    /// Evaluate an exact formula.
    Analyze(AnalyzeArgs),
    /// Monte Carlo estimate over configurations with a fixed error count.
    Mc(McArgs),
    /// Protocol vs ARQ over random erasure probabilities, binned CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PACKET_LEN)]
    packet_len: usize,
    /// Pass the block through an erasure channel before writing it.
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct MinfrsArgs {
    /// Read the configuration from a block file.
    #[arg(long, conflicts_with_all = ["n", "m", "cells"])]
    block: Option<PathBuf>,
    #[arg(long, requires = "m")]
    n: Option<usize>,
    #[arg(long, requires = "n")]
    m: Option<usize>,
    /// Erroneous cells as `row,col` pairs separated by spaces or semicolons.
    #[arg(long, default_value = "")]
    cells: String,
    #[arg(long, default_value = "all-or-none")]
    cost: CostFunction,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelKind {
    Erasure,
    BitFlip,
}

#[derive(Args)]
struct ChannelArgs {
    /// Packet erasure probability.
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    #[arg(long, value_enum, default_value_t = ChannelKind::Erasure)]
    channel: ChannelKind,
    /// Bit flip probability for the bit-flip channel.
    #[arg(long, default_value_t = 1e-4)]
    p_b: f64,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    #[arg(long, default_value_t = 64)]
    packet_len: usize,
}

impl ChannelArgs {
    fn config(&self, seed: u64) -> Result<ChannelConfig> {
        match self.channel {
            ChannelKind::Erasure => ChannelConfig::erasure(self.p, seed),
            ChannelKind::BitFlip => ChannelConfig::bit_flip(self.p_b, seed),
        }
    }
}

#[derive(Args)]
struct BlockArgs {
    #[arg(long = "K")]
    k: usize,
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long, default_value = "all-or-none")]
    cost: CostFunction,
    /// Include the per-iteration trace.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct StreamArgs {
    #[arg(long)]
    message_packets: usize,
    #[arg(long = "K")]
    k: usize,
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long, default_value = "all-or-none")]
    cost: CostFunction,
}

#[derive(Args)]
struct TcpArgs {
    #[arg(long = "K")]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    #[arg(long, default_value_t = 1)]
    trials: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Formula {
    LawNe,
    ExpC,
    ExpR,
    Eq3,
    Eq3Printed,
    Lambda,
    Forests,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, value_enum)]
    formula: Formula,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n_e: Option<usize>,
    /// Cell count for law-ne (defaults to (n+1)(m+1)).
    #[arg(long)]
    cells: Option<usize>,
    /// Probability for law-ne, decimal or fraction.
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    x: Option<f64>,
    /// Fractional digits of the decimal rendering.
    #[arg(long, default_value_t = 12)]
    digits: usize,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n_e: usize,
    #[arg(long)]
    statistic: Statistic,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
}

#[derive(Args)]
struct SweepArgs {
    /// Block sizes, comma separated.
    #[arg(long = "K", value_delimiter = ',', default_value = "16,256")]
    ks: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 100)]
    bins: usize,
    /// Use this erasure probability for every trial instead of a uniform draw.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 1)]
    packet_len: usize,
    /// Write the table here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Print per-K summaries as JSON on stderr.
    #[arg(long)]
    summary: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::InvalidArgument(_) | Error::Config(_) => 2,
                Error::ResourceLimit(_) => 3,
                _ => 1,
            })
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let protocol = |cost| ProtocolConfig {
        cost,
        max_iters: cli.max_iters,
    };
    let mut out = BufWriter::new(io::stdout().lock());
    match &cli.command {
        Command::Encode(a) => encode(a, cli.seed)?,
        Command::Decode(a) => return decode(a, &mut out),
        Command::Minfrs(a) => minfrs(a, &mut out)?,
        Command::SimulateBlock(a) => {
            check_cost(a.cost, a.channel.channel)?;
            let channel = a.channel.config(cli.seed)?;
            for trial in 0..a.channel.trials {
                let inputs = payloads(a.k, a.channel.packet_len, cli.seed, trial);
                let run = run_block(inputs.clone(), &channel, protocol(a.cost), trial)?;
                let t = &run.trace;
                let verified = t.terminated && reconstruct(&run.receiver)? == inputs;
                let mut record = json!({
                    "K": a.k, "p": channel_p(&channel), "seed": cli.seed, "trial": trial,
                    "iterations": t.iteration_count(), "total_sent": t.total_sent,
                    "terminated": t.terminated, "verified": verified,
                });
                if a.trace {
                    record["trace"] = serde_json::to_value(&t.iterations).map_err(json_err)?;
                }
                emit(&mut out, cli.csv, trial == 0, &record)?;
            }
        }
        Command::SimulateStream(a) => {
            check_cost(a.cost, a.channel.channel)?;
            let channel = a.channel.config(cli.seed)?;
            for trial in 0..a.channel.trials {
                let message = payloads(a.message_packets, a.channel.packet_len, cli.seed, trial);
                let run = run_stream(&message, a.k, &channel, protocol(a.cost), trial)?;
                let t = &run.trace;
                let verified = t.terminated && reconstruct(&run.receiver)? == message;
                let record = json!({
                    "K": a.k, "p": channel_p(&channel), "seed": cli.seed, "trial": trial,
                    "message_packets": a.message_packets, "iterations": t.iterations.len(),
                    "total_sent": t.total_sent, "terminated": t.terminated, "verified": verified,
                });
                emit(&mut out, cli.csv, trial == 0, &record)?;
            }
        }
        Command::SimulateTcp(a) => {
            let channel = ChannelConfig::erasure(a.p, cli.seed)?;
            for trial in 0..a.trials {
                let t = run_tcp_block(a.k, &channel, protocol(CostFunction::AllOrNone), trial, 1)?;
                let record = json!({
                    "K": a.k, "p": a.p, "seed": cli.seed, "trial": trial,
                    "iterations": t.iteration_count(), "total_sent": t.total_sent,
                    "terminated": t.terminated,
                });
                emit(&mut out, cli.csv, trial == 0, &record)?;
            }
        }
        Command::Analyze(a) => analyze(a, &mut out)?,
        Command::Mc(a) => {
            let stats = analysis::mc_conditional(a.n, a.m, a.n_e, a.trials, cli.seed, a.statistic)?;
            let value = serde_json::to_value(&stats).map_err(json_err)?;
            emit(&mut out, cli.csv, true, &value)?;
        }
        Command::Sweep(a) => {
            let config = SweepConfig {
                ks: a.ks.clone(),
                trials: a.trials,
                seed: cli.seed,
                bins: a.bins,
                policy: a.p.map_or(PPolicy::Uniform, PPolicy::Fixed),
                protocol: protocol(CostFunction::AllOrNone),
                payload_len: a.packet_len,
            };
            let result = experiment_sweep(&config)?;
            let mut sink: Box<dyn Write> = match &a.output {
                Some(path) => Box::new(BufWriter::new(File::create(path)?)),
                None => Box::new(&mut out),
            };
            if cli.json {
                for row in &result.rows {
                    let v = serde_json::to_string(row).map_err(json_err)?;
                    writeln!(sink, "{v}")?;
                }
            } else {
                write_csv(&result.rows, &mut sink)?;
            }
            sink.flush()?;
            if a.summary {
                for s in &result.summaries {
                    eprintln!("{}", serde_json::to_string(s).map_err(json_err)?);
                }
            }
        }
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Format(e.to_string())
}

fn check_cost(cost: CostFunction, channel: ChannelKind) -> Result<()> {
    if cost == CostFunction::Graded && matches!(channel, ChannelKind::Erasure) {
        return Err(Error::InvalidArgument(
            "graded cost needs the bit-flip channel".into(),
        ));
    }
    Ok(())
}

fn channel_p(channel: &ChannelConfig) -> f64 {
    match channel.mode {
        ChannelMode::Erasure { p } => p,
        ChannelMode::BitFlip { p_b } => p_b,
    }
}

/// Deterministic pseudo-random payloads for trial `trial`.
fn payloads(count: usize, len: usize, seed: u64, trial: u64) -> Vec<Packet> {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(b"payload\0");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial);
    (0..count)
        .map(|_| {
            let mut bytes = vec![0u8; len];
            rng.fill_bytes(&mut bytes);
            Packet::new(bytes)
        })
        .collect()
}

/// One JSON object per line, or a CSV line of its scalar values preceded by
/// a header on the first record.
fn emit<W: Write>(out: &mut W, csv: bool, first: bool, value: &serde_json::Value) -> Result<()> {
    if csv {
        let scalars: Vec<(&String, &serde_json::Value)> = value
            .as_object()
            .map(|o| o.iter().filter(|(_, v)| !v.is_object() && !v.is_array()).collect())
            .unwrap_or_default();
        if first {
            let keys: Vec<&str> = scalars.iter().map(|(k, _)| k.as_str()).collect();
            writeln!(out, "{}", keys.join(","))?;
        }
        let fields: Vec<String> = scalars.iter().map(|(_, v)| v.to_string()).collect();
        writeln!(out, "{}", fields.join(","))?;
    } else {
        writeln!(out, "{value}")?;
    }
    Ok(())
}

fn encode(a: &EncodeArgs, seed: u64) -> Result<()> {
    if a.packet_len == 0 {
        return Err(Error::InvalidArgument("packet length must be positive".into()));
    }
    let mut data = Vec::new();
    BufReader::new(File::open(&a.input)?).read_to_end(&mut data)?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("input file is empty".into()));
    }
    // the last packet is zero padded
    let packets: Vec<Packet> = data
        .chunks(a.packet_len)
        .map(|c| {
            let mut v = c.to_vec();
            v.resize(a.packet_len, 0);
            Packet::new(v)
        })
        .collect();
    let dims = choose_dimensions(packets.len())?;
    let mut grid = encode_padded(dims.params, packets)?;
    if let Some(p) = a.p {
        grid = ChannelConfig::erasure(p, seed)?.transmit(&grid, StreamId::new(0, 0));
    }
    write_block(&grid, BufWriter::new(File::create(&a.output)?))
}

fn decode<W: Write>(a: &DecodeArgs, out: &mut W) -> Result<ExitCode> {
    let grid = read_block(BufReader::new(File::open(&a.input)?))?;
    let outcome = decode_peel(&grid);
    if !outcome.is_complete() {
        let g = build_gadget(&outcome.residual, CostFunction::AllOrNone, grid.params(), None)?;
        let frs = min_frs(&g)?;
        let report = json!({
            "decoded": false,
            "stopping_set": outcome.residual.iter().collect::<Vec<_>>(),
            "frs": frs,
        });
        writeln!(out, "{report}")?;
        out.flush()?;
        return Ok(ExitCode::from(1));
    }
    let mut sink = BufWriter::new(File::create(&a.output)?);
    for p in outcome.repaired.sources() {
        sink.write_all(p.payload())?;
    }
    sink.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn parse_cells(s: &str) -> Result<Vec<GridCoord>> {
    s.split(|c: char| c == ';' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            let bad = || Error::InvalidArgument(format!("cannot read cell {t:?}; expected row,col"));
            let (r, c) = t.split_once(',').ok_or_else(bad)?;
            Ok(GridCoord::new(
                r.trim().parse().map_err(|_| bad())?,
                c.trim().parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

fn minfrs<W: Write>(a: &MinfrsArgs, out: &mut W) -> Result<()> {
    let (config, params, grid) = match &a.block {
        Some(path) => {
            let grid = read_block(BufReader::new(File::open(path)?))?;
            (grid.error_configuration(), *grid.params(), Some(grid))
        }
        None => {
            let (Some(n), Some(m)) = (a.n, a.m) else {
                return Err(Error::InvalidArgument("give --block, or --n and --m".into()));
            };
            let params = CodeParams::row_major(n, m)?;
            (ErrorConfiguration::new(n, m, parse_cells(&a.cells)?)?, params, None)
        }
    };
    if a.cost == CostFunction::Graded {
        return Err(Error::InvalidArgument(
            "graded cost needs corruption masks, which configurations given here lack".into(),
        ));
    }
    let g = build_gadget(&config, a.cost, &params, grid.as_ref())?;
    let frs = min_frs(&g)?;
    let report = json!({
        "n": params.n(),
        "m": params.m(),
        "cost_function": a.cost.to_string(),
        "errors": config.len(),
        "stopping_set": rectfec::codec::peel_residual(&config).iter().collect::<Vec<_>>(),
        "counts": g.counts(),
        "frs": frs,
        "frs_cells": frs_cells(&frs, &params)?,
    });
    writeln!(out, "{report}")?;
    Ok(())
}

fn need<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidArgument(format!("this formula needs --{name}")))
}

fn analyze<W: Write>(a: &AnalyzeArgs, out: &mut W) -> Result<()> {
    let exact = |name: &str, v: num_rational::BigRational, out: &mut W| -> Result<()> {
        let report = json!({
            "formula": name,
            "exact": v.to_string(),
            "decimal": analysis::decimal(&v, a.digits),
            "value": v.to_f64(),
        });
        writeln!(out, "{report}")?;
        Ok(())
    };
    let nm_ne = || -> Result<(usize, usize, usize)> {
        Ok((need(a.n, "n")?, need(a.m, "m")?, need(a.n_e, "n-e")?))
    };
    match a.formula {
        Formula::LawNe => {
            let cells = match a.cells {
                Some(c) => c,
                None => (need(a.n, "n")? + 1) * (need(a.m, "m")? + 1),
            };
            let p = analysis::parse_probability(
                a.p.as_deref()
                    .ok_or_else(|| Error::InvalidArgument("this formula needs --p".into()))?,
            )?;
            exact("law-ne", analysis::law_ne(cells, &p, need(a.n_e, "n-e")?)?, out)?;
        }
        Formula::ExpC => {
            let (n, m, k) = nm_ne()?;
            exact("exp-c", analysis::exp_cols_given_ne(n, m, k)?, out)?;
        }
        Formula::ExpR => {
            let (n, m, k) = nm_ne()?;
            exact("exp-r", analysis::exp_rows_given_ne(n, m, k)?, out)?;
        }
        Formula::Eq3 => {
            let (n, m, k) = nm_ne()?;
            exact("eq3", analysis::expected_i_regime3(n, m, k)?, out)?;
        }
        Formula::Eq3Printed => {
            let (n, m, k) = nm_ne()?;
            exact("eq3-printed", analysis::expected_i_regime3_as_printed(n, m, k)?, out)?;
        }
        Formula::Lambda => {
            let x = need(a.x, "x")?;
            let report = json!({"formula": "lambda", "x": x, "value": analysis::lambda_of_x(x)?});
            writeln!(out, "{report}")?;
        }
        Formula::Forests => {
            let (n, m) = (need(a.n, "n")?, need(a.m, "m")?);
            let counts = analysis::forest_counts(n, m)?;
            let rows: Vec<_> = match a.n_e {
                Some(k) => vec![k],
                None => (0..counts.len()).collect(),
            };
            for k in rows {
                let f = analysis::count_acyclic_subgraphs(n, m, k)?;
                let pr = analysis::prob_i_zero(n, m, k)?;
                let report = json!({
                    "formula": "forests", "n": n, "m": m, "n_e": k, "count": f,
                    "prob_i_zero": pr.to_string(), "prob_i_zero_value": pr.to_f64(),
                });
                writeln!(out, "{report}")?;
            }
        }
    }
    Ok(())
}
