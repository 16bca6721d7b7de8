use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dscd::bilevel::{run_search, BilevelConfig};
use dscd::harness::{
    self, emit_trace_csv, read_json, run_replicates, write_json, BenchConfig, MethodSpec,
};
use dscd::local::LrSpec;
use dscd::objective::BenchmarkFunction;

#[derive(Parser)]
#[command(name = "dscd", version, about = "Hybrid Adam / DSCD optimization runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single run on a benchmark function; writes the per-evaluation trace.
    Optimize(OptimizeArgs),
    /// Replicated study from a JSON config; writes aggregate.csv and summary.json.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Toy architecture search; writes trace.csv and checkpoints.json.
    Bilevel {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    function: BenchmarkFunction,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value_t = 20_000)]
    budget: usize,
    /// adam, adam+dscd, dscd or uniform.
    #[arg(long)]
    method: String,
    #[arg(long, conflicts_with = "lr_schedule")]
    lr: Option<f64>,
    /// `linear:START:END`.
    #[arg(long)]
    lr_schedule: Option<LrSpec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Loss window length.
    #[arg(long, default_value_t = 1000)]
    k: usize,
    /// Alternation threshold, or `inf` to never switch.
    #[arg(long, default_value = "50", value_parser = parse_threshold)]
    t: Threshold,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy)]
struct Threshold(Option<usize>);

fn parse_threshold(s: &str) -> Result<Threshold, String> {
    if s.eq_ignore_ascii_case("inf") {
        return Ok(Threshold(None));
    }
    s.parse::<usize>()
        .map(|t| Threshold(Some(t)))
        .map_err(|_| format!("expected a positive integer or `inf`, got `{s}`"))
}

fn method_spec(args: &OptimizeArgs) -> Result<MethodSpec> {
    let lr = match (args.lr, args.lr_schedule) {
        (Some(v), None) => Some(LrSpec::Constant(v)),
        (None, Some(s)) => Some(s),
        _ => None,
    };
    if let Some(LrSpec::Constant(v)) = lr {
        if !(v > 0.0 && v.is_finite()) {
            bail!("--lr must be positive, got {v}");
        }
    }
    let spec = match args.method.as_str() {
        "adam" | "adam+dscd" => {
            let lr = lr.context("--lr or --lr-schedule is required for adam methods")?;
            MethodSpec::adam(lr, args.method == "adam+dscd")
        }
        "dscd" => MethodSpec::dscd(),
        "uniform" => MethodSpec::uniform(),
        other => bail!("unknown method `{other}`; expected adam, adam+dscd, dscd or uniform"),
    };
    Ok(spec)
}

fn optimize(args: &OptimizeArgs) -> Result<()> {
    let mut config = BenchConfig::new(
        args.function,
        args.dim,
        args.budget,
        vec![method_spec(args)?],
    );
    config.replicates = 1;
    config.base_seed = args.seed;
    config.k = args.k;
    config.t = args.t.0;
    let trace = run_replicates(&config)?.remove(0).trace;
    emit_trace_csv(&trace.records, &args.out)?;
    Ok(())
}

fn bench(config_path: &Path, out: Option<&Path>) -> Result<()> {
    let config = BenchConfig::from_json_file(config_path)?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .context("no output directory: pass --out or set output_dir")?;
    harness::run_bench(&config, &dir)?;
    Ok(())
}

fn bilevel(config_path: &Path, out: &Path) -> Result<()> {
    let config: BilevelConfig = read_json(config_path)?;
    let result = run_search(&config)?;
    emit_trace_csv(&result.trace.records, &out.join("trace.csv"))?;
    write_json(&result.checkpoints, &out.join("checkpoints.json"))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Optimize(args) => optimize(&args),
        Command::Bench { config, out } => bench(&config, out.as_deref()),
        Command::Bilevel { config, out } => bilevel(&config, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
