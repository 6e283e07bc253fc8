use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hmdp::hierarchy::{check_local_optimality, flatten};
use hmdp::io::generate::{chain_grid, token_model, ChainGridSpec, TokenLayout};
use hmdp::io::{write_trace, ModelBundle, RunConfig};
use hmdp::refine::{run, RefineConfig, TraceEntry};
use hmdp::{enumerate_baseline, Error, HierarchicalModel, SolverConfig};

#[derive(Parser)]
#[command(name = "hmdp", version, about = "Anytime bounds for hierarchical MDPs")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated model bundle.
    Gen {
        #[command(subcommand)]
        family: Family,
    },
    /// Bound the maximal expected reward by abstraction refinement.
    Solve(SolveArgs),
    /// Solve every call exactly and the macro MDP on top.
    Enumerate {
        bundle: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Build and solve the flat MDP.
    Flatten {
        bundle: PathBuf,
        #[arg(long)]
        cap: Option<u64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Print model statistics.
    Info { bundle: PathBuf },
}

#[derive(Subcommand)]
enum Family {
    /// The token-passing example.
    Token {
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, value_enum, default_value_t = Layout::Reference)]
        layout: Layout,
        #[arg(long)]
        out: PathBuf,
    },
    /// Levels of calls to a two-action chain template.
    ChainGrid {
        #[arg(long)]
        levels: usize,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        chain_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use this value for both parameters of every call.
        #[arg(long)]
        fixed: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Layout {
    Reference,
    Lattice,
}

#[derive(Args)]
struct SolveArgs {
    bundle: PathBuf,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Macro-check cadence.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Write the trace of macro checks as JSON.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// `single`, `success-target` or `success-target exit=<label>`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    override_local_optimality: bool,
    /// Solve individually refined calls on one thread.
    #[arg(long)]
    sequential: bool,
}

/// Exit status 1: the input is wrong; 2: an engine failed.
enum Failure {
    Input(String),
    Engine(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_)
            | Error::Invalid(_)
            | Error::Io(_)
            | Error::InvalidArgument(_)
            | Error::LocalOptimality(_) => Failure::Input(describe(&e)),
            _ => Failure::Engine(e.to_string()),
        }
    }
}

fn describe(e: &Error) -> String {
    match e {
        Error::Invalid(diags) => {
            let lines: Vec<String> = diags.iter().map(|d| format!("  {d}")).collect();
            format!("invalid model:\n{}", lines.join("\n"))
        }
        _ => e.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    init_logging(cli.verbose);
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Engine(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

/// Shortest decimal with at most nine fractional digits.
fn fmt_value(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn load(path: &Path) -> Result<(ModelBundle, HierarchicalModel), Failure> {
    let bundle = ModelBundle::load(path)?;
    let model = bundle.model()?;
    Ok((bundle, model))
}

fn solver(run: &RunConfig, epsilon: Option<f64>) -> SolverConfig {
    SolverConfig {
        epsilon: epsilon.unwrap_or(run.epsilon),
        ..SolverConfig::default()
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Gen { family } => gen(family),
        Command::Solve(args) => solve(args),
        Command::Enumerate { bundle, epsilon } => {
            let (b, model) = load(&bundle)?;
            let (v, _) = enumerate_baseline(&model, &solver(&b.run, epsilon))?;
            println!("{}", fmt_value(v));
            Ok(())
        }
        Command::Flatten {
            bundle,
            cap,
            epsilon,
        } => {
            let (b, model) = load(&bundle)?;
            let cfg = solver(&b.run, epsilon);
            let flat = flatten(&model, cap.unwrap_or(b.run.flat_cap), &cfg)?;
            let (v, _) = hmdp::numerics::max_expected_reward(&flat, &cfg)?;
            println!("states {}", flat.num_states());
            println!("value {}", fmt_value(v.at(flat.initial())));
            Ok(())
        }
        Command::Info { bundle } => info(&bundle),
    }
}

fn gen(family: Family) -> Result<(), Failure> {
    let (model, out, seed) = match family {
        Family::Token { depth, layout, out } => {
            let layout = match layout {
                Layout::Reference => TokenLayout::Reference,
                Layout::Lattice => TokenLayout::Lattice,
            };
            (token_model(layout, depth)?, out, 0)
        }
        Family::ChainGrid {
            levels,
            width,
            chain_len,
            seed,
            fixed,
            out,
        } => {
            let spec = ChainGridSpec {
                levels,
                width,
                chain_len,
                seed,
                fixed,
            };
            (chain_grid(&spec)?, out, seed)
        }
    };
    let run = RunConfig {
        seed,
        ..RunConfig::default()
    };
    ModelBundle::write(&out, &model, run)?;
    println!(
        "wrote {} ({} calls, {} flat states)",
        out.display(),
        model.num_calls(),
        model.flat_state_count()
    );
    Ok(())
}

fn solve(args: SolveArgs) -> Result<(), Failure> {
    let mut bundle = ModelBundle::load(&args.bundle)?;
    if args.mode.is_some() {
        bundle.run.mode = args.mode.clone();
    }
    if let Some(seed) = args.seed {
        bundle.run.seed = seed;
    }
    let model = bundle.model()?;
    let run_cfg = &bundle.run;
    let cfg = RefineConfig {
        eta: args.eta.unwrap_or(run_cfg.eta),
        k: args.k.unwrap_or(run_cfg.k),
        solver: solver(run_cfg, args.epsilon),
        max_iterations: args.max_iterations.unwrap_or(run_cfg.max_iterations),
        override_local_optimality: args.override_local_optimality
            || run_cfg.override_local_optimality,
        parallel: !args.sequential,
        interleave: true,
    };
    tracing::info!(eta = cfg.eta, k = cfg.k, seed = run_cfg.seed, "solving");
    let mut trace: Vec<TraceEntry> = Vec::new();
    let result = run(&model, cfg, |e| {
        tracing::info!(iter = e.iter, lb = e.lb, ub = e.ub, "macro check");
        trace.push(e.clone());
    });
    if let Some(path) = &args.trace {
        write_trace(path, &trace)?;
    }
    let out = result?;
    let ratio = if out.ub > 0.0 { out.lb / out.ub } else { 1.0 };
    println!("lb {}", fmt_value(out.lb));
    println!("ub {}", fmt_value(out.ub));
    println!("ratio {}", fmt_value(ratio));
    println!("iterations {}", out.iterations);
    println!("macro checks {}", out.trace.len());
    Ok(())
}

fn info(path: &Path) -> Result<(), Failure> {
    let (_, model) = load(path)?;
    let t = model.template();
    let p = t.pmdp();
    let distinct: std::collections::HashSet<Vec<u64>> = (0..model.num_calls())
        .map(|i| model.call_valuation(i).key())
        .collect();
    let offending = check_local_optimality(&model);
    println!("calls {}", model.num_calls());
    println!("distinct valuations {}", distinct.len());
    println!("macro states {}", model.num_states());
    println!("macro choices {}", model.num_macro_choices());
    println!("template states {}", p.num_states());
    println!("template choices {}", p.num_choices());
    println!("parameters {}", t.params().join(", "));
    println!("exits {}", t.exit_count());
    println!("mode {}", model.mode().name());
    println!("flat states {}", model.flat_state_count());
    println!(
        "local optimality {}",
        if offending.is_empty() {
            "ok"
        } else {
            "not guaranteed"
        }
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::fmt_value;

    #[test]
    fn values_print_short() {
        assert_eq!(fmt_value(12.865000000001), "12.865");
        assert_eq!(fmt_value(4.0), "4");
        assert_eq!(fmt_value(-1e-12), "0");
        assert_eq!(fmt_value(f64::INFINITY), "inf");
    }
}
