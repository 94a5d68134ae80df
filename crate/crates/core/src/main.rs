use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use misokg::acquisition::{latin_hypercube, CkgEvaluator};
use misokg::config::RunConfig;
use misokg::error::MisoError;
use misokg::experiment::{aggregate_dir, run_experiment, OUTPUT_DIR_ENV};
use misokg::runner::initialize;

const EXIT_CONFIG: u8 = 1;
const EXIT_PARTIAL: u8 = 2;

#[derive(Parser)]
#[command(name = "misokg", version, about = "Multi-information-source Bayesian optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replicated experiments and write per-replication CSV and JSON.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        replications: Option<usize>,
        /// Base seed; replication r uses seed + r.
        #[arg(long)]
        seed: Option<u64>,
        /// Budget limit, in the config's budget mode.
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output: Option<PathBuf>,
        /// Replications run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Summarize a result directory into summary.csv.
    Aggregate {
        dir: PathBuf,
        /// Points on the common cost grid.
        #[arg(long, default_value_t = 100)]
        grid: usize,
    },
    /// Fit hyperparameters on the initial design only and print them as JSON.
    Hyperfit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print CKG after the initial design on a grid of designs, as CSV.
    CkgEval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of designs (evenly spaced in 1-d, Latin hypercube otherwise).
        #[arg(long, default_value_t = 100)]
        grid: usize,
        /// Only this source; all sources by default.
        #[arg(long)]
        source: Option<usize>,
    },
}

enum Failure {
    Config(String),
    Partial(String),
}

impl From<MisoError> for Failure {
    fn from(e: MisoError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    Ok(cfg)
}

fn cmd_run(
    config: PathBuf,
    replications: Option<usize>,
    seed: Option<u64>,
    budget: Option<f64>,
    output: Option<PathBuf>,
    jobs: usize,
) -> Result<(), Failure> {
    let mut cfg = load(&config, seed)?;
    if let Some(r) = replications {
        cfg.run.replications = r;
    }
    if let Some(b) = budget {
        cfg.budget.limit = b;
    }
    if let Some(o) = output {
        cfg.run.output_dir = o;
    }
    cfg.validate()?;
    let outcomes = run_experiment(&cfg, jobs)?;
    let failed: Vec<_> = outcomes.iter().filter(|o| o.error.is_some()).collect();
    println!(
        "{} replications written to {} ({} failed)",
        outcomes.len(),
        cfg.run.output_dir.display(),
        failed.len()
    );
    if failed.is_empty() {
        Ok(())
    } else {
        let list: Vec<String> = failed.iter().map(|o| o.replication.to_string()).collect();
        Err(Failure::Partial(format!("replications {} failed", list.join(", "))))
    }
}

fn cmd_aggregate(dir: PathBuf, grid: usize) -> Result<(), Failure> {
    let out = aggregate_dir(&dir, grid)?;
    println!("replications: {}", out.replications);
    println!("final mean gain: {}", out.final_mean_gain);
    println!("mean cumulative cost: {}", out.mean_total_cost);
    println!("summary: {}", out.summary_path.display());
    Ok(())
}

fn cmd_hyperfit(config: PathBuf, seed: Option<u64>) -> Result<(), Failure> {
    let cfg = load(&config, seed)?;
    let problem = cfg.build_problem()?;
    let init = initialize(&problem, &cfg.run_options()?, cfg.run.seed)?;
    let report = serde_json::json!({
        "problem": problem.name(),
        "seed": cfg.run.seed,
        "initial_designs": init.designs,
        "priors": init.priors,
        "model": init.model,
        "fit": init.fit,
    });
    println!("{}", serde_json::to_string_pretty(&report).map_err(MisoError::from)?);
    Ok(())
}

fn cmd_ckg_eval(config: PathBuf, seed: Option<u64>, grid: usize, source: Option<usize>) -> Result<(), Failure> {
    let cfg = load(&config, seed)?;
    let problem = cfg.build_problem()?;
    let opts = cfg.run_options()?;
    let init = initialize(&problem, &opts, cfg.run.seed)?;
    let domain = problem.domain();
    let d = domain.dim();
    let m = problem.num_sources();
    let sources: Vec<usize> = match source {
        Some(l) if l >= m => return Err(Failure::Config(format!("--source {l}: problem has sources 0..{m}"))),
        Some(l) => vec![l],
        None => (0..m).collect(),
    };
    if grid < 2 {
        return Err(Failure::Config("--grid must be >= 2".into()));
    }
    let points = if d == 1 {
        let (lo, hi) = (domain.lower()[0], domain.upper()[0]);
        (0..grid).map(|i| vec![lo + (hi - lo) * i as f64 / (grid - 1) as f64]).collect()
    } else {
        latin_hypercube(grid, domain, cfg.run.seed)?
    };
    let eval = CkgEvaluator::new(&init.state, &init.candidates, problem.costs())?.with_h_workers(opts.h_workers);
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    let mut header = vec!["source".to_string()];
    header.extend((0..d).map(|i| format!("x_{i}")));
    header.extend(["ckg", "h", "cost"].map(String::from));
    w.write_record(&header).map_err(MisoError::from)?;
    for &l in &sources {
        for x in &points {
            let r = eval.evaluate(l, x)?;
            let mut row = vec![l.to_string()];
            row.extend(x.iter().map(f64::to_string));
            row.extend([r.ckg, r.h_value, r.cost].map(|v| v.to_string()));
            w.write_record(&row).map_err(MisoError::from)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run {
            config,
            replications,
            seed,
            budget,
            output,
            jobs,
        } => cmd_run(config, replications, seed, budget, output, jobs),
        Command::Aggregate { dir, grid } => cmd_aggregate(dir, grid),
        Command::Hyperfit { config, seed } => cmd_hyperfit(config, seed),
        Command::CkgEval {
            config,
            seed,
            grid,
            source,
        } => cmd_ckg_eval(config, seed, grid, source),
    };
    let _ = std::io::stdout().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Partial(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_PARTIAL)
        }
    }
}
