//! `smtwcet`: WCET bounds for loop-free programs from the command line.

mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use smtwcet::bench::{
    oracle_wcet_with, parse_sizes, run_equivalence, run_scaling, BenchError, BenchMode, BenchQuery,
    RandomSpec, ScalingConfig,
};
use smtwcet::encode::{emit_smtlib, encode, CostEncoding, CutMode, EncodingOptions};
use smtwcet::ir::{
    check_loop_free, parse_cfg_file, parse_minilang_with, unroll_with_costs, CostModel,
    ParseOptions, Program,
};
use smtwcet::omt::{analyze, AnalysisOptions, OmtError, Strategy};
use smtwcet::par::Exec;
use smtwcet::solve::SolverConfig;

use report::{AnalyzeReport, OracleReport, ReportConfig};

#[derive(Debug, Parser)]
#[command(
    name = "smtwcet",
    version,
    about = "WCET bounds by SMT optimization with cuts"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Minilang,
    Cfg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EncodingArg {
    Sum,
    Counter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CutsArg {
    None,
    Leaves,
    Hierarchical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Binary,
    CutOrdered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum QueryArg {
    Maximize,
    AboveOptimum,
}

#[derive(Debug, Args)]
struct Global {
    /// Program to analyze.
    #[arg(long, short, global = true)]
    input: Option<PathBuf>,
    /// Input format; `.json` files default to `cfg`, everything else to `minilang`.
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    #[arg(long, value_enum, default_value = "sum", global = true)]
    encoding: EncodingArg,
    #[arg(long, value_enum, default_value = "hierarchical", global = true)]
    cuts: CutsArg,
    #[arg(long, value_enum, default_value = "binary", global = true)]
    strategy: StrategyArg,
    /// Replace syntactic cut bounds by semantic bounds of each region.
    #[arg(long, global = true)]
    refine_portions: bool,
    /// Solver command line, e.g. `z3 -in -smt2` (default: $SMTWCET_SOLVER,
    /// else z3, cvc5 or yices-smt2 from PATH).
    #[arg(long, global = true)]
    solver: Option<String>,
    /// Per-query solver timeout.
    #[arg(long, default_value_t = 60_000, global = true)]
    timeout_ms: u64,
    /// Keep one solver process and push/pop per query.
    #[arg(long, global = true)]
    incremental: bool,
    #[arg(long, value_enum, default_value = "text", global = true)]
    output: Output,
    /// Directory receiving the SMT-LIB scripts with and without cuts.
    #[arg(long, global = true)]
    emit_smt_dir: Option<PathBuf>,
    /// Abstract unsupported constructs by nondeterministic values.
    #[arg(long, global = true)]
    havoc_unsupported: bool,
    /// Trip bound for loops that carry none.
    #[arg(long, global = true)]
    loop_bound: Option<u32>,
    /// Seed of the random programs of `bench --random`.
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    /// Log every solver query to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Compute the WCET of `--input`.
    Analyze,
    /// Write the SMT-LIB encoding of `--input` with and without cuts.
    EmitSmt,
    /// WCET by path enumeration, one feasibility query per path.
    Oracle {
        #[arg(long, default_value_t = smtwcet::bench::DEFAULT_PATH_LIMIT)]
        path_limit: usize,
    },
    /// Scaling runs on diamond programs, or oracle cross-checks on random ones.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Diamond sizes, `a..b` or `a,b,c`.
    #[arg(long)]
    diamond: Option<String>,
    /// Comma-separated modes: no-cuts, leaf-cuts, hierarchical, cut-ordered.
    #[arg(long, default_value = "no-cuts,leaf-cuts")]
    modes: String,
    #[arg(long, value_enum, default_value = "maximize")]
    query: QueryArg,
    /// Per-query budget of scaling runs.
    #[arg(long, default_value_t = 60_000)]
    budget_ms: u64,
    /// Repetitions per cell; rows report the median time.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Number of random programs (seeds `--seed` onwards) to cross-check.
    #[arg(long)]
    random: Option<u64>,
    /// Run instances concurrently.
    #[arg(long)]
    parallel: bool,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.global.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    let g = &cli.global;
    match &cli.command {
        Cmd::Analyze => cmd_analyze(g),
        Cmd::EmitSmt => cmd_emit_smt(g).map(|_| 0),
        Cmd::Oracle { path_limit } => cmd_oracle(g, *path_limit),
        Cmd::Bench(args) => cmd_bench(g, args).map(|_| 0),
    }
}

fn omt_error(e: OmtError) -> anyhow::Error {
    match e {
        OmtError::Solver(msg) => anyhow!("solve: {msg}"),
        OmtError::Encode(e) => anyhow!("encode: {e}"),
        OmtError::Cfg(e) => anyhow!("cfgkit: {e}"),
        e => anyhow!("omt: {e}"),
    }
}

fn bench_error(e: BenchError) -> anyhow::Error {
    match e {
        BenchError::Solver(msg) => anyhow!("solve: {msg}"),
        BenchError::Omt(e) => omt_error(e),
        e => anyhow!("bench: {e}"),
    }
}

fn solver_config(g: &Global) -> Result<SolverConfig> {
    let cfg = match &g.solver {
        Some(line) => SolverConfig::from_command_line(line, g.timeout_ms),
        None => SolverConfig::detect(g.timeout_ms),
    };
    Ok(cfg
        .map_err(|e| anyhow!("solve: {e}"))?
        .with_incremental(g.incremental))
}

fn analysis_options(g: &Global) -> Result<AnalysisOptions> {
    let opts = AnalysisOptions {
        encoding: match g.encoding {
            EncodingArg::Sum => CostEncoding::Sum,
            EncodingArg::Counter => CostEncoding::Counter,
        },
        cuts: match g.cuts {
            CutsArg::None => CutMode::None,
            CutsArg::Leaves => CutMode::Leaves,
            CutsArg::Hierarchical => CutMode::Hierarchical,
        },
        strategy: match g.strategy {
            StrategyArg::Binary => Strategy::Binary,
            StrategyArg::CutOrdered => Strategy::CutOrdered,
        },
        refine_portions: g.refine_portions,
    };
    opts.validate().map_err(|e| anyhow!("cli: {e}"))?;
    Ok(opts)
}

/// A parsed, loop-free input.
struct Loaded {
    path: PathBuf,
    program: Program,
    costs: CostModel,
    unrolled: bool,
}

fn load(g: &Global) -> Result<Loaded> {
    let path = g
        .input
        .clone()
        .ok_or_else(|| anyhow!("cli: --input is required"))?;
    let text = fs::read_to_string(&path)
        .with_context(|| format!("cli: cannot read {}", path.display()))?;
    let format = g
        .format
        .unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Format::Cfg,
            _ => Format::Minilang,
        });
    let (program, costs) = match format {
        Format::Minilang => parse_minilang_with(
            &text,
            ParseOptions {
                havoc_unsupported: g.havoc_unsupported,
            },
        )
        .map_err(|e| anyhow!("ir: {}: {e}", path.display()))?,
        Format::Cfg => parse_cfg_file(&text).map_err(|e| anyhow!("ir: {}: {e}", path.display()))?,
    };
    if check_loop_free(&program).is_ok() {
        return Ok(Loaded {
            path,
            program,
            costs,
            unrolled: false,
        });
    }
    let (program, costs) =
        unroll_with_costs(&program, &costs, g.loop_bound).map_err(|e| anyhow!("ir: {e}"))?;
    Ok(Loaded {
        path,
        program,
        costs,
        unrolled: true,
    })
}

fn write_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_analyze(g: &Global) -> Result<u8> {
    let opts = analysis_options(g)?;
    let solver = solver_config(g)?;
    let input = load(g)?;
    if g.emit_smt_dir.is_some() {
        cmd_emit_smt_for(g, &input, opts)?;
    }
    let t0 = Instant::now();
    let analysis = analyze(&input.program, &input.costs, opts, &solver).map_err(omt_error)?;
    let wall_ms = t0.elapsed().as_secs_f64() * 1000.0;
    let report = AnalyzeReport::new(
        &input.program,
        input.path.display().to_string(),
        ReportConfig::new(&opts, &solver),
        input.unrolled,
        &analysis,
        wall_ms,
    );
    match g.output {
        Output::Json => write_json(&report)?,
        Output::Text => print!("{}", report.to_text(g.verbose)),
    }
    Ok(if report.sound { 0 } else { 2 })
}

fn emit_scripts(
    dir: &Path,
    stem: &str,
    p: &Program,
    costs: &CostModel,
    opts: AnalysisOptions,
) -> Result<Vec<PathBuf>> {
    let with = EncodingOptions {
        cost_encoding: opts.encoding,
        cuts: opts.cuts,
    };
    let without = EncodingOptions {
        cuts: CutMode::None,
        ..with
    };
    let mut written = Vec::new();
    for (suffix, enc) in [("smt2", with), ("nocuts.smt2", without)] {
        let f = encode(p, costs, enc).map_err(|e| anyhow!("encode: {e}"))?;
        let file = dir.join(format!("{stem}.{suffix}"));
        fs::write(&file, emit_smtlib(&f, None))
            .with_context(|| format!("cli: cannot write {}", file.display()))?;
        written.push(file);
    }
    Ok(written)
}

fn cmd_emit_smt_for(g: &Global, input: &Loaded, opts: AnalysisOptions) -> Result<Vec<PathBuf>> {
    let dir = g.emit_smt_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let stem = input
        .path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(input.program.name())
        .to_string();
    emit_scripts(&dir, &stem, &input.program, &input.costs, opts)
}

fn cmd_emit_smt(g: &Global) -> Result<()> {
    let opts = analysis_options(g)?;
    let input = load(g)?;
    for file in cmd_emit_smt_for(g, &input, opts)? {
        println!("{}", file.display());
    }
    Ok(())
}

fn cmd_oracle(g: &Global, path_limit: usize) -> Result<u8> {
    let solver = solver_config(g)?;
    let input = load(g)?;
    let outcome = oracle_wcet_with(
        &input.program,
        &input.costs,
        &solver,
        path_limit,
        Exec::Parallel,
    )
    .map_err(bench_error)?;
    let report = OracleReport::new(&input.program, input.path.display().to_string(), &outcome);
    match g.output {
        Output::Json => write_json(&report)?,
        Output::Text => print!("{}", report.to_text()),
    }
    Ok(0)
}

fn parse_modes(s: &str) -> Result<Vec<BenchMode>> {
    s.split(',')
        .map(str::trim)
        .filter(|m| !m.is_empty())
        .map(|m| m.parse::<BenchMode>().map_err(|e| anyhow!("cli: {e}")))
        .collect()
}

fn open_out(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(
            fs::File::create(path)
                .with_context(|| format!("cli: cannot write {}", path.display()))?,
        ),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn cmd_bench(g: &Global, args: &BenchArgs) -> Result<()> {
    let modes = parse_modes(&args.modes)?;
    if modes.is_empty() {
        bail!("cli: --modes names no mode");
    }
    let exec = if args.parallel {
        Exec::Parallel
    } else {
        Exec::Sequential
    };
    match (&args.diamond, args.random) {
        (Some(sizes), None) => {
            let ns = parse_sizes(sizes).map_err(|e| anyhow!("cli: {e}"))?;
            let solver = solver_config(g)?;
            let cfg = ScalingConfig {
                query: match args.query {
                    QueryArg::Maximize => BenchQuery::Maximize,
                    QueryArg::AboveOptimum => BenchQuery::AboveOptimum,
                },
                budget_ms: args.budget_ms,
                refine_portions: g.refine_portions,
                runs: args.runs,
                exec,
            };
            let report = run_scaling(&ns, &modes, &cfg, &solver);
            report
                .write_csv(open_out(&args.out)?)
                .map_err(bench_error)?;
        }
        (None, Some(count)) => {
            let solver = solver_config(g)?;
            let seeds: Vec<u64> = (g.seed..g.seed.saturating_add(count)).collect();
            let report = run_equivalence(&seeds, RandomSpec::default(), &modes, &solver, exec);
            report
                .write_csv(open_out(&args.out)?)
                .map_err(bench_error)?;
            let disagreements = report.disagreements().count();
            if disagreements > 0 {
                log::warn!("{disagreements} runs disagree with the oracle");
            }
        }
        _ => bail!("cli: bench needs exactly one of --diamond and --random"),
    }
    Ok(())
}
