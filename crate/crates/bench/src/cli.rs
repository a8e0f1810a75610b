//! `softtopk` command line: `bench`, `gradcheck` and `demo`.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime or I/O error, 3 gradcheck
//! failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use softtopk_core::{
    exact_topk, generate_instance, nccs, GradCheckConfig, HalvingTopK, InstanceConfig, IterativeTopK, Matrix,
    PeakedKernel, SoftTopK, SoftmaxMode,
};

use crate::chart::emit_charts;
use crate::error::{BenchError, Result};
use crate::gradsweep::GradSweep;
use crate::list::parse_size_list;
use crate::record::emit_csv;
use crate::sweep::{iterative_time_warnings, run_sweep, SweepConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_GRADCHECK: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "softtopk",
    version,
    about = "Differentiable top-k operators: benchmark, gradient check, demo"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Time both operators and exact top-k over an (n, k) grid and score them by nCCS.
    Bench(BenchArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Print a worked forward/backward trace on one small instance.
    Demo(DemoArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Verbatim,
    Normalized,
}

impl From<ModeArg> for SoftmaxMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Verbatim => SoftmaxMode::Verbatim,
            ModeArg::Normalized => SoftmaxMode::Normalized,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OpArg {
    Halving,
    Iterative,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Candidate counts: comma list or min:max:xstep.
    #[arg(long, default_value = "16:16384:x2")]
    n: String,
    /// Selection sizes: comma list or min:max:xstep. Pairs with k >= n are skipped.
    #[arg(long, default_value = "2:2048:x2")]
    k: String,
    #[arg(long, default_value_t = 64)]
    d: usize,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    /// Boost constant C of the halving operator.
    #[arg(long, default_value_t = 100.0)]
    boost: f64,
    /// Peaked softmax variant of the iterative operator.
    #[arg(long, value_enum, default_value_t = ModeArg::Verbatim)]
    mode: ModeArg,
    /// Temperature for --mode normalized.
    #[arg(long, default_value_t = 100.0)]
    alpha: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value = "bench.csv")]
    csv: PathBuf,
    /// Write <PREFIX>time.svg and <PREFIX>nccs.svg.
    #[arg(long, value_name = "PREFIX")]
    charts: Option<PathBuf>,
    /// Run the timed batch on the worker pool (throughput mode).
    #[arg(long)]
    parallel_batch: bool,
    /// Worker pool size; overrides SOFTTOPK_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    /// Suppress progress lines on stderr.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, value_enum)]
    op: OpArg,
    #[arg(long, default_value = "8,16")]
    n: String,
    #[arg(long, default_value = "2,4")]
    k: String,
    #[arg(long, default_value_t = 4)]
    d: usize,
    /// Pass threshold on the max relative error.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    /// Central difference step.
    #[arg(long, default_value_t = 1e-6)]
    h: f64,
    #[arg(long, default_value_t = 5.0)]
    boost: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Verbatim)]
    mode: ModeArg,
    #[arg(long, default_value_t = 100.0)]
    alpha: f64,
    /// Instances per (n, k) pair.
    #[arg(long, default_value_t = 50)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 5.0)]
    boost: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Verbatim)]
    mode: ModeArg,
    #[arg(long, default_value_t = 100.0)]
    alpha: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ =
                if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Bench(a) => bench(a, out, err),
        Command::Gradcheck(a) => gradcheck(a, out),
        Command::Demo(a) => demo(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                BenchError::Usage(_) | BenchError::Core(softtopk_core::Error::Config(_)) => EXIT_USAGE,
                _ => EXIT_RUNTIME,
            }
        }
    }
}

fn write_io(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> Result<()> {
    out.write_fmt(text).map_err(|e| BenchError::io("<stdout>", e))
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        write_io($out, format_args!("{}\n", format_args!($($arg)*)))
    };
}

fn bench(a: BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = SweepConfig {
        n_list: parse_size_list(&a.n)?,
        k_list: parse_size_list(&a.k)?,
        d: a.d,
        batch: a.batch,
        boost: a.boost,
        mode: a.mode.into(),
        alpha: a.alpha,
        seed: a.seed,
        repeats: a.repeats,
        parallel_batch: a.parallel_batch,
        threads: a.threads,
        csv_path: Some(a.csv.clone()),
        chart_prefix: a.charts.clone(),
    };
    let quiet = a.quiet;
    let sweep = run_sweep(&cfg, |line| {
        if !quiet {
            let _ = writeln!(err, "{line}");
        }
    })?;
    if sweep.records.is_empty() {
        return Err(BenchError::Usage("every (n, k) pair has k >= n; nothing to run".into()));
    }
    emit_csv(&sweep.records, &a.csv)?;
    say!(out, "wrote {} records to {}", sweep.records.len(), a.csv.display())?;
    if let Some(prefix) = &a.charts {
        for path in emit_charts(&sweep.records, prefix)? {
            say!(out, "wrote {}", path.display())?;
        }
    }
    for warning in iterative_time_warnings(&sweep.records) {
        let _ = writeln!(err, "warning: {warning}");
    }
    Ok(EXIT_OK)
}

fn gradcheck(a: GradcheckArgs, out: &mut dyn Write) -> Result<i32> {
    let sweep = GradSweep {
        n_list: parse_size_list(&a.n)?,
        k_list: parse_size_list(&a.k)?,
        d: a.d,
        instances: a.instances,
        seed: a.seed,
    };
    if sweep.instances == 0 {
        return Err(BenchError::Usage("instances must be at least 1".into()));
    }
    let cfg = GradCheckConfig { h: a.h, tol: a.tol, ..Default::default() };
    let report = match a.op {
        OpArg::Halving => sweep.run(&HalvingTopK::new(a.boost), &cfg)?,
        OpArg::Iterative => {
            let kernel = PeakedKernel::for_mode(a.mode.into(), a.alpha);
            kernel.validate()?;
            sweep.run(&IterativeTopK::new(kernel), &cfg)?
        }
    };
    say!(
        out,
        "{}: {report}",
        match a.op {
            OpArg::Halving => "halving",
            OpArg::Iterative => "iterative",
        }
    )?;
    Ok(if report.passed { EXIT_OK } else { EXIT_GRADCHECK })
}

fn fmt_row(xs: &[f64]) -> String {
    let cells: Vec<String> = xs.iter().map(|x| format!("{x:>10.5}")).collect();
    format!("[{}]", cells.join(" "))
}

fn print_matrix(out: &mut dyn Write, name: &str, m: &Matrix) -> Result<()> {
    say!(out, "{name} ({}x{}):", m.rows(), m.cols())?;
    for (i, row) in m.row_iter().enumerate() {
        say!(out, "  {i:>3} {}", fmt_row(row))?;
    }
    Ok(())
}

fn demo(a: DemoArgs, out: &mut dyn Write) -> Result<i32> {
    let mode: SoftmaxMode = a.mode.into();
    let cfg = InstanceConfig { n: a.n, k: a.k, d: a.d, batch: 1, seed: a.seed, boost: a.boost, mode };
    let inst = generate_instance(&cfg)?.remove(0);
    let (e, v, k) = (&inst.embeddings, &inst.scores, a.k);
    say!(out, "instance n={} k={k} d={} seed={} boost={} mode={mode}", a.n, a.d, a.seed, a.boost)?;
    print_matrix(out, "E", e)?;
    say!(out, "v: {}", fmt_row(v.as_slice()))?;
    let exact = exact_topk(e, v, k)?;
    print_matrix(out, "exact top-k", &exact)?;
    let upstream = Matrix::filled(k, a.d, 1.0);

    say!(out, "\n== iterative ==")?;
    let kernel = PeakedKernel::for_mode(mode, a.alpha);
    kernel.validate()?;
    let it = IterativeTopK::new(kernel);
    let s = it.forward(e, v, k)?;
    for (i, step) in s.tape.as_iterative()?.steps.iter().enumerate() {
        say!(out, "step {i}: max={:.5} argmax={} (masked afterwards)", step.max, step.masked)?;
        say!(out, "  weights {}", fmt_row(&step.weights))?;
    }
    print_matrix(out, "output", &s.output)?;
    say!(out, "nCCS vs exact: {:.6}", nccs(&exact, &s.output)?)?;
    let g = it.backward(&s.tape, &upstream)?;
    say!(out, "backward with all-ones upstream gradient:")?;
    say!(out, "  dv {}", fmt_row(&g.d_scores))?;
    print_matrix(out, "dE", &g.d_embeddings)?;

    say!(out, "\n== halving ==")?;
    let hv = HalvingTopK::new(a.boost);
    let s = hv.forward(e, v, k)?;
    let tape = s.tape.as_halving()?;
    say!(
        out,
        "padded {} -> {} rows, {} rounds",
        tape.padding.original_n,
        tape.padding.padded_n,
        tape.round_count()
    )?;
    for (r, round) in tape.rounds.iter().enumerate() {
        say!(out, "round {r}: scores {}", fmt_row(&round.scores))?;
        say!(out, "  descending order {:?}", round.perm)?;
        let len = round.perm.len();
        for (i, (w0, w1)) in round.weights.iter().enumerate() {
            say!(out, "  pair ({}, {}) weights ({w0:.6}, {w1:.6})", round.perm[i], round.perm[len - 1 - i])?;
        }
    }
    print_matrix(out, "output", &s.output)?;
    say!(out, "nCCS vs exact: {:.6}", nccs(&exact, &s.output)?)?;
    let g = hv.backward(&s.tape, &upstream)?;
    say!(out, "backward with all-ones upstream gradient:")?;
    say!(out, "  dv {}", fmt_row(&g.d_scores))?;
    print_matrix(out, "dE", &g.d_embeddings)?;
    Ok(EXIT_OK)
}
