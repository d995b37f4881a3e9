//! `racelab` command-line front end.
//!
//! Exit codes: 0 for a clean result, 1 when races (or a divergence) were
//! found, 2 on any error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use racelab::diff::diff_trace;
use racelab::metrics::{emit, MetricsRecord, ReportFormat};
use racelab::trace::{generate_trace, handoff_trace, parse_trace, serialize_trace, GenConfig, SamplingPolicy};
use racelab::{run_engine, DetectionMode, EngineConfig, EngineKind, Trace};

#[derive(Parser)]
#[command(name = "racelab", version, about = "Sampling happens-before race detection lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random lock-disciplined trace.
    Gen(GenCmd),
    /// Run one engine over a trace and report races.
    Analyze(AnalyzeCmd),
    /// Compare every engine against the brute-force oracle.
    Diff(DiffCmd),
    /// Emit per-run metrics for every engine and rate.
    Bench(BenchCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    SampledOnly,
    Extended,
}

impl From<Mode> for DetectionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::SampledOnly => DetectionMode::SampledOnly,
            Mode::Extended => DetectionMode::Extended,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

fn parse_rate(s: &str) -> Result<f64, String> {
    let r: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if (0.0..=1.0).contains(&r) {
        Ok(r)
    } else {
        Err(format!("rate {r} is outside [0, 1]"))
    }
}

/// Engine options shared by `analyze`, `diff` and `bench`.
#[derive(Args)]
struct EngineOpts {
    /// Race detection mode.
    #[arg(long, value_enum, default_value = "sampled-only")]
    mode: Mode,
    /// Keep a released epoch beside the thread's list instead of copying it.
    #[arg(long, value_enum, default_value = "on")]
    local_epoch_opt: Switch,
}

impl EngineOpts {
    fn config(&self, kind: EngineKind) -> EngineConfig {
        EngineConfig::new(kind)
            .with_mode(self.mode.into())
            .with_local_epoch_opt(matches!(self.local_epoch_opt, Switch::On))
    }
}

/// Generator parameters.
#[derive(Args)]
struct GenOpts {
    #[arg(long, default_value_t = 4)]
    threads: usize,
    #[arg(long, default_value_t = 4)]
    locks: usize,
    #[arg(long, default_value_t = 4)]
    vars: usize,
    #[arg(long, default_value_t = 200)]
    events: usize,
    /// Probability that a step acquires a lock.
    #[arg(long, default_value_t = 0.3)]
    p_sync: f64,
    /// Probability of re-acquiring the most recently released lock.
    #[arg(long, default_value_t = 0.5)]
    contention: f64,
    /// Mean number of accesses inside a critical section.
    #[arg(long, default_value_t = 2.0)]
    accesses_per_cs: f64,
    /// Emit the two-thread handoff trace with this many handoffs instead.
    #[arg(long)]
    handoff: Option<usize>,
}

impl GenOpts {
    fn generate(&self, seed: u64) -> Result<Trace> {
        if let Some(n) = self.handoff {
            let per_cs = self.accesses_per_cs.round().max(1.0) as usize;
            return Ok(handoff_trace(n, per_cs));
        }
        let cfg = GenConfig {
            threads: self.threads,
            locks: self.locks,
            vars: self.vars,
            events: self.events,
            p_sync: self.p_sync,
            contention: self.contention,
            accesses_per_cs: self.accesses_per_cs,
        };
        Ok(generate_trace(&cfg, seed)?)
    }
}

#[derive(Args)]
struct GenCmd {
    #[command(flatten)]
    gen: GenOpts,
    /// Generator seed; also seeds the marks when `--rate` is given.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mark accesses with this probability; unmarked if absent.
    #[arg(long, value_parser = parse_rate)]
    rate: Option<f64>,
    /// Output path; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeCmd {
    #[arg(long)]
    trace: PathBuf,
    /// djitp, sampling, uclock or orderedlist.
    #[arg(long)]
    engine: EngineKind,
    /// Resample marks at this rate; the trace's own marks are used if absent.
    #[arg(long, value_parser = parse_rate)]
    rate: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    opts: EngineOpts,
    /// Race lines go here instead of stdout.
    #[arg(long)]
    out_races: Option<PathBuf>,
    #[arg(long)]
    out_metrics: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct DiffCmd {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, value_parser = parse_rate)]
    rate: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    opts: EngineOpts,
}

#[derive(Args)]
struct BenchCmd {
    /// Trace files; generated traces are used if none are given.
    #[arg(long)]
    trace: Vec<PathBuf>,
    #[command(flatten)]
    gen: GenOpts,
    /// Number of generated traces.
    #[arg(long, default_value_t = 1)]
    traces: usize,
    /// Seed of the first generated trace.
    #[arg(long, default_value_t = 0)]
    gen_seed: u64,
    /// Engines to run; all four if absent.
    #[arg(long)]
    engine: Vec<EngineKind>,
    #[arg(long, value_delimiter = ',', value_parser = parse_rate, default_values_t = [0.003, 0.03, 0.1, 1.0])]
    rate: Vec<f64>,
    /// First sampling seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sampling seeds per (trace, rate), counting up from `--seed`.
    #[arg(long, default_value_t = 1)]
    runs: u64,
    #[command(flatten)]
    opts: EngineOpts,
    /// Output path; stdout if absent.
    #[arg(long)]
    out_metrics: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn load_trace(path: &Path) -> Result<Trace> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_trace(&text).with_context(|| format!("parsing {}", path.display()))
}

fn marks(rate: Option<f64>, seed: u64) -> SamplingPolicy {
    match rate {
        Some(r) => SamplingPolicy::bernoulli(r, seed),
        None => SamplingPolicy::pre_marked(),
    }
}

fn write_to(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut f = io::BufWriter::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?);
            body(&mut f)?;
            f.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)?;
        }
    }
    Ok(())
}

fn cmd_gen(c: &GenCmd) -> Result<u8> {
    let mut tr = c.gen.generate(c.seed)?;
    if let Some(r) = c.rate {
        tr = SamplingPolicy::bernoulli(r, c.seed).apply(&tr);
    }
    let text = serialize_trace(&tr);
    write_to(c.out.as_deref(), |w| w.write_all(text.as_bytes()))?;
    eprintln!(
        "generated {} events: {} threads, {} locks, {} vars, {} marked",
        tr.len(),
        tr.num_threads(),
        tr.num_locks(),
        tr.num_vars(),
        tr.sample_size()
    );
    Ok(0)
}

fn cmd_analyze(c: &AnalyzeCmd) -> Result<u8> {
    let tr = marks(c.rate, c.seed).apply(&load_trace(&c.trace)?);
    let run = run_engine(&tr, &c.opts.config(c.engine));
    write_to(c.out_races.as_deref(), |w| {
        for r in &run.races {
            writeln!(w, "{}", r.render(tr.var_name(r.var)))?;
        }
        Ok(())
    })?;
    if let Some(p) = &c.out_metrics {
        let rec = MetricsRecord::new(
            c.engine.token(),
            &c.trace.display().to_string(),
            c.rate,
            c.seed,
            tr.num_threads(),
            run.metrics.clone(),
        );
        write_to(Some(p), |w| emit(&[rec], c.format.into(), w))?;
    }
    eprintln!(
        "{} races in {} events ({} sampled)",
        run.races.len(),
        tr.len(),
        tr.sample_size()
    );
    Ok(u8::from(!run.races.is_empty()))
}

fn cmd_diff(c: &DiffCmd) -> Result<u8> {
    let tr = marks(c.rate, c.seed).apply(&load_trace(&c.trace)?);
    let cfg = c.opts.config(EngineKind::Sampling);
    match diff_trace(&tr, cfg.mode, cfg.local_epoch_opt) {
        None => {
            println!("EQUIVALENT");
            Ok(0)
        }
        Some(d) => {
            println!("{d}");
            Ok(1)
        }
    }
}

fn cmd_bench(c: &BenchCmd) -> Result<u8> {
    if c.runs == 0 {
        bail!("--runs must be at least 1");
    }
    let traces: Vec<(String, Trace)> = if c.trace.is_empty() {
        (0..c.traces as u64)
            .map(|i| {
                let s = c.gen_seed + i;
                Ok((format!("gen#{s}"), c.gen.generate(s)?))
            })
            .collect::<Result<_>>()?
    } else {
        c.trace
            .iter()
            .map(|p| Ok((p.display().to_string(), load_trace(p)?)))
            .collect::<Result<_>>()?
    };
    let engines: Vec<EngineKind> = if c.engine.is_empty() {
        EngineKind::ALL.to_vec()
    } else {
        c.engine.clone()
    };

    let mut records = Vec::new();
    for (name, tr) in &traces {
        for &rate in &c.rate {
            for seed in c.seed..c.seed + c.runs {
                let marked = SamplingPolicy::bernoulli(rate, seed).apply(tr);
                for &kind in &engines {
                    let run = run_engine(&marked, &c.opts.config(kind));
                    records.push(MetricsRecord::new(
                        kind.token(),
                        name,
                        Some(rate),
                        seed,
                        marked.num_threads(),
                        run.metrics,
                    ));
                }
            }
        }
    }
    write_to(c.out_metrics.as_deref(), |w| emit(&records, c.format.into(), w))?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Gen(c) => cmd_gen(c),
        Command::Analyze(c) => cmd_analyze(c),
        Command::Diff(c) => cmd_diff(c),
        Command::Bench(c) => cmd_bench(c),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
