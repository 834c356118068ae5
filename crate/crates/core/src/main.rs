use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use treebo::drivers::Method;
use treebo::gp::KernelFamily;
use treebo::harness::{self, SuiteConfig, DEFAULT_REPEATS};
use treebo::objective::{self, Domain, ExternalCommand, Objective, TestFunction};

#[derive(Parser)]
#[command(name = "treebo", version, about = "Partitioned-tree Bayesian optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a paired benchmark suite and write CSV results.
    Run(RunArgs),
    /// List the built-in presets.
    Presets,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Treebo,
    Standard,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Powexp,
    Matern52,
}

impl From<KernelArg> for KernelFamily {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Powexp => KernelFamily::PowerExponential,
            KernelArg::Matern52 => KernelFamily::Matern52,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Named problem (see `presets`).
    #[arg(long, conflicts_with_all = ["objective", "dim"])]
    preset: Option<String>,
    /// Test function name, or a label for an external objective.
    #[arg(long, requires_all = ["dim", "n_init", "n_node", "n_total"])]
    objective: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    n_init: Option<usize>,
    #[arg(long)]
    n_node: Option<usize>,
    #[arg(long)]
    n_total: Option<usize>,
    #[arg(long, value_enum, default_value = "both")]
    method: MethodArg,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overrides the preset's kernel.
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    /// Output root; each suite writes to a subdirectory.
    #[arg(long, env = "TREEBO_OUT", default_value = "results")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Evaluator program speaking the line protocol, run through `sh -c`.
    #[arg(long)]
    external_cmd: Option<String>,
    /// Seconds to wait for each external evaluation.
    #[arg(long, default_value_t = 300)]
    external_timeout: u64,
    /// Expect constraint values from the external evaluator.
    #[arg(long)]
    constrained: bool,
    /// Allow splits that leave a child with at most `dim` points.
    #[arg(long)]
    allow_small_children: bool,
    /// Cluster on raw responses instead of standardized ones.
    #[arg(long)]
    raw_response_clustering: bool,
}

fn build(args: &RunArgs) -> Result<(SuiteConfig, Objective), String> {
    let mut constrained = args.constrained;
    let (mut cfg, function) = if let Some(name) = &args.preset {
        let p = harness::find_preset(name).ok_or_else(|| format!("unknown preset {name:?}"))?;
        constrained |= p.constrained;
        (SuiteConfig::from_preset(p), p.function)
    } else if let Some(name) = &args.objective {
        let function = TestFunction::from_name(name);
        let dim = args.dim.unwrap();
        let cfg = SuiteConfig {
            label: format!("{name}{dim}"),
            objective: function.map_or(name.as_str(), |f| f.name()).to_string(),
            dim,
            n_init: args.n_init.unwrap(),
            n_node: args.n_node.unwrap(),
            n_total: args.n_total.unwrap(),
            kernel: KernelFamily::PowerExponential,
            methods: Vec::new(),
            repeats: args.repeats,
            base_seed: args.seed,
            workers: args.workers,
            refuse_small_children: true,
            standardize_f: true,
        };
        (cfg, function)
    } else {
        return Err("either --preset or --objective is required".into());
    };
    cfg.methods = match args.method {
        MethodArg::Treebo => vec![Method::TreeBo],
        MethodArg::Standard => vec![Method::Standard],
        MethodArg::Both => vec![Method::TreeBo, Method::Standard],
    };
    cfg.repeats = args.repeats;
    cfg.base_seed = args.seed;
    cfg.workers = args.workers;
    cfg.refuse_small_children = !args.allow_small_children;
    cfg.standardize_f = !args.raw_response_clustering;
    if let Some(k) = args.kernel {
        cfg.kernel = k.into();
    }

    let obj = match (&args.external_cmd, function) {
        (Some(cmd), _) => {
            let command = ExternalCommand::shell(cmd.clone())
                .constrained(constrained)
                .timeout(std::time::Duration::from_secs(args.external_timeout));
            let domain = match function {
                Some(f) => f.domain(cfg.dim),
                None => Domain::unit(cfg.dim),
            }
            .map_err(|e| e.to_string())?;
            objective::external_objective(&cfg.objective, &command, domain).map_err(|e| e.to_string())?
        }
        (None, Some(f)) => Objective::analytic(f, cfg.dim).map_err(|e| e.to_string())?,
        (None, None) => return Err(format!("objective {:?} needs --external-cmd", cfg.objective)),
    };
    Ok((cfg, obj))
}

fn run(args: RunArgs) -> ExitCode {
    let (cfg, obj) = match build(&args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match harness::run_suite(&cfg, &obj) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let dir = harness::suite_dir(&args.out, &cfg);
    let summary = match harness::write_outputs(&dir, &result, &obj) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: writing results to {}: {e}", dir.display());
            return ExitCode::from(2);
        }
    };
    let last = *cfg.checkpoints().last().unwrap();
    for m in &cfg.methods {
        if let Some(s) = summary.get(m.name(), last) {
            println!(
                "{:<9} final best-so-far: mean {:.6} median {:.6} (n = {})",
                m.name(),
                s.mean,
                s.median,
                s.count
            );
        }
    }
    println!("results written to {}", dir.display());
    if result.all_completed() {
        ExitCode::SUCCESS
    } else {
        eprintln!("some runs failed; see failures.csv");
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Presets => {
            println!("name            dim  n_init  n_node  n_total  kernel");
            for p in &harness::PRESETS {
                println!(
                    "{:<15} {:>4} {:>7} {:>7} {:>8}  {}",
                    p.name,
                    p.dim,
                    p.n_init,
                    p.n_node,
                    p.n_total,
                    p.kernel.name()
                );
            }
            ExitCode::SUCCESS
        }
    }
}
