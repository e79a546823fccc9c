use std::fs;
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cmdsim::controller::{run_detailed, RunOptions};
use cmdsim::sweep::{sweep, sweep_csv, SweepParam};
use cmdsim::trace::{format_trace, generate_trace, parse_trace, GenParams, TraceRecord};
use cmdsim::verify::verify;
use cmdsim::{compare, emit, Format, Mode, SimConfig};

#[derive(Parser)]
#[command(name = "cmdsim", version, about = "Trace-driven L2 sector cache and deduplicating memory controller simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trace.
    Gen(GenArgs),
    /// Simulate one mode and print its traffic report.
    Run(RunArgs),
    /// Simulate several modes and report reductions against the baseline.
    Compare(CompareArgs),
    /// Vary one parameter and emit a CSV row per value.
    Sweep(SweepArgs),
    /// Check the simulator against the brute-force oracle.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    /// JSON file with generator parameters; flags override it.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_blocks: Option<u64>,
    #[arg(long)]
    n_records: Option<usize>,
    #[arg(long)]
    write_fraction: Option<f64>,
    #[arg(long)]
    intra_prob: Option<f64>,
    #[arg(long)]
    inter_pool_size: Option<usize>,
    #[arg(long)]
    readonly_set_size: Option<u64>,
    #[arg(long)]
    readonly_rereads: Option<usize>,
    /// Probabilities of 1, 2, 3 and 4 sector writes, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 4)]
    mask_distribution: Option<Vec<f64>>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    /// Trace file, or `-` for stdin.
    #[arg(long)]
    trace: PathBuf,
    /// JSON configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed of the initial memory image.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    partitions: Option<usize>,
    #[arg(long)]
    l2_bytes: Option<u64>,
    #[arg(long)]
    assoc: Option<usize>,
    #[arg(long)]
    fifo_entries: Option<usize>,
    /// Entries per partition, or `unbounded`.
    #[arg(long)]
    hash_entries: Option<String>,
    /// Per-partition budget in bytes, or `unbounded`.
    #[arg(long)]
    addr_cache_bytes: Option<String>,
    #[arg(long)]
    type_cache_bytes: Option<String>,
    #[arg(long)]
    mask_cache_bytes: Option<String>,
}

#[derive(Args)]
struct OutArgs {
    /// `json` or `csv`.
    #[arg(long, default_value = "json")]
    report: String,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    mode: String,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    output: OutArgs,
    /// Write the final per-block metadata and frame refcounts as JSON.
    #[arg(long)]
    dump_metadata: Option<PathBuf>,
    /// Scan all invariants every N records.
    #[arg(long)]
    check_every: Option<usize>,
    /// Write back all dirty L2 data after the last record.
    #[arg(long)]
    flush: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Modes to compare; all four when absent.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<String>>,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    output: OutArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    param: String,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<u64>,
    #[arg(long, default_value = "cmd")]
    mode: String,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    sim: SimArgs,
}

fn optional_bytes(text: &str, flag: &str) -> Result<Option<u64>> {
    if text == "unbounded" {
        return Ok(None);
    }
    text.parse::<u64>()
        .map(Some)
        .with_context(|| format!("--{flag} expects a number or `unbounded`, got {text:?}"))
}

impl SimArgs {
    fn config(&self) -> Result<SimConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                SimConfig::from_json(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => SimConfig::default(),
        };
        if let Some(v) = self.seed {
            c.bg_seed = v;
        }
        if let Some(v) = self.partitions {
            c.cache.n_partitions = v;
        }
        if let Some(v) = self.l2_bytes {
            c.cache.capacity_bytes = v;
        }
        if let Some(v) = self.assoc {
            c.cache.associativity = v;
        }
        if let Some(v) = self.fifo_entries {
            c.cache.fifo_entries_per_partition = v;
        }
        if let Some(v) = &self.hash_entries {
            c.hash_entries = optional_bytes(v, "hash-entries")?.map(|n| n as usize);
        }
        if let Some(v) = &self.addr_cache_bytes {
            c.metadata.addr_cache = optional_bytes(v, "addr-cache-bytes")?;
        }
        if let Some(v) = &self.type_cache_bytes {
            c.metadata.type_cache = optional_bytes(v, "type-cache-bytes")?;
        }
        if let Some(v) = &self.mask_cache_bytes {
            c.metadata.mask_cache = optional_bytes(v, "mask-cache-bytes")?;
        }
        c.validate()?;
        Ok(c)
    }

    fn trace(&self) -> Result<Vec<TraceRecord>> {
        if self.trace == Path::new("-") {
            let mut text = String::new();
            io::stdin().read_to_string(&mut text)?;
            return Ok(cmdsim::parse_trace_str(&text)?);
        }
        let file = fs::File::open(&self.trace).with_context(|| format!("opening {}", self.trace.display()))?;
        parse_trace(BufReader::new(file)).with_context(|| format!("in {}", self.trace.display()))
    }
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn gen(args: GenArgs) -> Result<()> {
    let mut p = match &args.params {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<GenParams>(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => GenParams::default(),
    };
    if let Some(v) = args.seed {
        p.seed = v;
    }
    if let Some(v) = args.n_blocks {
        p.n_blocks = v;
    }
    if let Some(v) = args.n_records {
        p.n_records = v;
    }
    if let Some(v) = args.write_fraction {
        p.write_fraction = v;
    }
    if let Some(v) = args.intra_prob {
        p.intra_prob = v;
    }
    if let Some(v) = args.inter_pool_size {
        p.inter_pool_size = v;
    }
    if let Some(v) = args.readonly_set_size {
        p.readonly_set_size = v;
    }
    if let Some(v) = args.readonly_rereads {
        p.readonly_rereads = v;
    }
    if let Some(v) = args.mask_distribution {
        p.mask_distribution = [v[0], v[1], v[2], v[3]];
    }
    let trace = generate_trace(&p)?;
    write_out(args.out.as_deref(), &format_trace(&trace))
}

fn run_cmd(args: RunArgs) -> Result<()> {
    let mode: Mode = args.mode.parse()?;
    let format: Format = args.output.report.parse()?;
    let config = args.sim.config()?;
    let trace = args.sim.trace()?;
    let opts = RunOptions {
        check_every: args.check_every,
        flush_at_end: args.flush,
        ..RunOptions::default()
    };
    let outcome = run_detailed(&trace, &config, mode, opts)?;
    if let Some(path) = &args.dump_metadata {
        let dump = serde_json::to_string_pretty(&outcome.sim.metadata_dump())?;
        fs::write(path, dump + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    write_out(args.output.out.as_deref(), &emit(&outcome.report, format)?)
}

fn compare_cmd(args: CompareArgs) -> Result<()> {
    let modes = match &args.modes {
        Some(names) => names.iter().map(|m| m.parse()).collect::<Result<Vec<Mode>, _>>()?,
        None => Mode::ALL.to_vec(),
    };
    let format: Format = args.output.report.parse()?;
    let config = args.sim.config()?;
    let trace = args.sim.trace()?;
    let report = compare(&trace, &config, &modes)?;
    write_out(args.output.out.as_deref(), &report.emit(format)?)
}

fn sweep_cmd(args: SweepArgs) -> Result<()> {
    let param: SweepParam = args.param.parse()?;
    let mode: Mode = args.mode.parse()?;
    let config = args.sim.config()?;
    let trace = args.sim.trace()?;
    let points = sweep(&trace, &config, mode, param, &args.values)?;
    write_out(args.out.as_deref(), &sweep_csv(param, &points)?)
}

fn verify_cmd(args: VerifyArgs) -> Result<()> {
    let config = args.sim.config()?;
    let trace = args.sim.trace()?;
    match verify(&trace, &config)? {
        None => {
            println!("equivalent");
            Ok(())
        }
        Some(d) => bail!("divergence: {d}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Run(a) => run_cmd(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Verify(a) => verify_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
