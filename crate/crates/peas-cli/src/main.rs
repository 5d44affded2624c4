//! Command-line entry point for the perceptual-exploration attack lab.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure. Paths of
//! produced artifacts go to stdout; diagnostics, the resolved config, and
//! the master seed go to stderr. Flags override config-file fields which
//! override built-in defaults.

use anyhow::{anyhow, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use peas_lab::attacks::{run_attack, AttackModels};
use peas_lab::data::{generate_synthetic_dataset, write_raw_tensor_dir, SyntheticSpec};
use peas_lab::harness::{
    augmentation_effectiveness, build_pool, load_report, run_pairwise, sweep_epsilon, sweep_n, write_report,
    ExperimentConfig, ExperimentEnv, ExperimentReport, RunMeta, StrategySpec,
};
use peas_lab::peas::SelectionStrategy;
use peas_lab::rng::derive_seed;
use peas_lab::zoo::{enumerate_roles, evaluate_accuracy};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "peas", version, about = "Perceptual-exploration attack laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as a raw tensor directory.
    GenData(GenDataArgs),
    /// Train the five-architecture model zoo and save checkpoints.
    TrainZoo(ConfigArgs),
    /// Run the base attack for one victim/surrogate pair (no exploration).
    Attack(AttackArgs),
    /// Run the full pairwise protocol with the configured strategies.
    Peas(ConfigArgs),
    /// Run the ablation strategy set (top-1 / random / filtered / oracle).
    Ablate(ConfigArgs),
    /// Sweep the exploration size n with prefix-reused candidates.
    SweepN(SweepNArgs),
    /// Sweep the attack budget epsilon.
    SweepEps(SweepEpsArgs),
    /// Measure each augmentation on its own.
    SweepAug(ConfigArgs),
    /// Summarize a previously written report directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Output directory (train/ and test/ subdirectories are created).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 6)]
    classes: usize,
    /// Image shape as CxHxW.
    #[arg(long, default_value = "3x64x64")]
    shape: String,
    #[arg(long, default_value_t = 200)]
    per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum additive noise half-width.
    #[arg(long)]
    noise: Option<f32>,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config file (JSON).
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    config: PathBuf,
    /// Victim architecture id.
    #[arg(long)]
    victim: String,
    /// Surrogate architecture id.
    #[arg(long)]
    surrogate: String,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct SweepNArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated n grid, e.g. 1,5,10,50.
    #[arg(long, value_delimiter = ',')]
    n_values: Option<Vec<usize>>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct SweepEpsArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated epsilon grid, e.g. 0.0039,0.0078.
    #[arg(long, value_delimiter = ',')]
    eps_values: Option<Vec<f32>>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory produced by an earlier command.
    #[arg(long)]
    dir: PathBuf,
}

/// Flag overrides applied on top of the config file.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    epsilon: Option<f32>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    pool: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to available parallelism).
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(path: &PathBuf, overrides: &Overrides) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(eps) = overrides.epsilon {
        config.epsilon = Some(eps);
    }
    if let Some(n) = overrides.n {
        config.exploration_n = n;
    }
    if let Some(pool) = overrides.pool {
        config.pool_size = pool;
    }
    if let Some(seed) = overrides.seed {
        config.master_seed = seed;
    }
    if let Some(out) = &overrides.out {
        config.output_dir = out.clone();
    }
    if let Some(workers) = overrides.workers {
        config.workers = Some(workers);
    }
    config.validate()?;
    if let Some(workers) = config.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .context("configuring worker pool")?;
    }
    eprintln!("resolved config: {}", serde_json::to_string(&config)?);
    eprintln!("master seed: {}", config.master_seed);
    Ok(config)
}

fn finish_report(report: &ExperimentReport, config: &ExperimentConfig, started: Instant) -> Result<()> {
    let run_dir = write_report(
        report,
        &config.output_dir,
        &RunMeta {
            wall_time_secs: started.elapsed().as_secs_f64(),
        },
    )?;
    println!("{}", run_dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(args) => gen_data(args),
        Command::TrainZoo(args) => {
            let config = load_config(&args.config, &args.overrides)?;
            let env = ExperimentEnv::prepare(config)?;
            for entry in &env.zoo.entries {
                eprintln!("{}: held-out accuracy {:.4}", entry.arch_id, entry.accuracy);
            }
            println!("{}", env.config.zoo.dir.display());
            Ok(())
        }
        Command::Attack(args) => attack_pair(args),
        Command::Peas(args) => {
            let started = Instant::now();
            let config = load_config(&args.config, &args.overrides)?;
            let env = ExperimentEnv::prepare(config)?;
            let report = run_pairwise(&env)?;
            finish_report(&report, &env.config, started)
        }
        Command::Ablate(args) => {
            let started = Instant::now();
            let mut config = load_config(&args.config, &args.overrides)?;
            config.strategies = ablation_strategies();
            let env = ExperimentEnv::prepare(config)?;
            let report = run_pairwise(&env)?;
            finish_report(&report, &env.config, started)
        }
        Command::SweepN(args) => {
            let started = Instant::now();
            let mut config = load_config(&args.config, &args.overrides)?;
            if let Some(values) = args.n_values {
                config.sweeps.n_values = values;
            }
            config.validate()?;
            let env = ExperimentEnv::prepare(config)?;
            let report = sweep_n(&env, &env.config.sweeps.n_values.clone())?;
            finish_report(&report, &env.config, started)
        }
        Command::SweepEps(args) => {
            let started = Instant::now();
            let mut config = load_config(&args.config, &args.overrides)?;
            if let Some(values) = args.eps_values {
                config.sweeps.eps_values = values;
            }
            config.validate()?;
            let env = ExperimentEnv::prepare(config)?;
            let report = sweep_epsilon(&env, &env.config.sweeps.eps_values.clone())?;
            finish_report(&report, &env.config, started)
        }
        Command::SweepAug(args) => {
            let started = Instant::now();
            let config = load_config(&args.config, &args.overrides)?;
            let env = ExperimentEnv::prepare(config)?;
            let report = augmentation_effectiveness(&env)?;
            finish_report(&report, &env.config, started)
        }
        Command::Report(args) => summarize_report(args),
    }
}

fn ablation_strategies() -> Vec<StrategySpec> {
    [
        SelectionStrategy::Top1Adversarial,
        SelectionStrategy::Top1Augmented,
        SelectionStrategy::RandomAugmented,
        SelectionStrategy::RandomAdversarial,
        SelectionStrategy::OraclePerfect,
        SelectionStrategy::FilteredTop1Adversarial,
        SelectionStrategy::FilteredTop1Augmented,
    ]
    .into_iter()
    .map(|selection| StrategySpec::Peas {
        selection,
        sampling: None,
    })
    .collect()
}

fn parse_shape(text: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<usize> = text
        .split('x')
        .map(|p| p.parse::<usize>().map_err(|e| anyhow!("bad shape component {p:?}: {e}")))
        .collect::<Result<_>>()?;
    match parts.as_slice() {
        [c, h, w] => Ok((*c, *h, *w)),
        _ => Err(anyhow!("shape must be CxHxW, got {text:?}")),
    }
}

fn gen_data(args: GenDataArgs) -> Result<()> {
    let shape = parse_shape(&args.shape)?;
    let mut spec = SyntheticSpec::new(args.classes, shape, args.per_class, args.seed);
    if let Some(noise) = args.noise {
        spec.noise = noise;
    }
    eprintln!("resolved config: {}", serde_json::to_string(&spec)?);
    eprintln!("master seed: {}", args.seed);
    let (train, test) = generate_synthetic_dataset(&spec)?;
    write_raw_tensor_dir(&args.out, &train, &test)?;
    println!("{}", args.out.display());
    Ok(())
}

fn attack_pair(args: AttackArgs) -> Result<()> {
    let config = load_config(&args.config, &args.overrides)?;
    let env = ExperimentEnv::prepare(config)?;
    let victim = env.zoo.network(&args.victim)?;
    let surrogate = env.zoo.network(&args.surrogate)?;
    if args.victim == args.surrogate {
        return Err(anyhow!("victim and surrogate must differ"));
    }
    // Sanity: the pair must be a legal role assignment.
    let roles = enumerate_roles(&env.zoo)?;
    if !roles.iter().any(|r| r.victim == args.victim && r.surrogate == args.surrogate) {
        return Err(anyhow!("no role assignment for ({}, {})", args.victim, args.surrogate));
    }
    let epsilon = env.epsilon();
    let spec = env.base_attack_spec(epsilon)?;
    let victim_idx = env.zoo.ids().iter().position(|id| id == &args.victim).unwrap() as u64;
    let pool = build_pool(
        victim,
        &env.test_data,
        env.config.pool_size,
        derive_seed(env.config.master_seed, &[0x0001, victim_idx]),
    )?;
    let mut fooled = 0usize;
    for (i, sample) in pool.iter().enumerate() {
        let result = run_attack(
            &spec.with_seed(derive_seed(env.config.master_seed, &[0x0003, i as u64])),
            &AttackModels::surrogate_only(surrogate),
            &sample.image,
            sample.label,
        )?;
        if victim.predict(&result.adversarial)? != sample.label {
            fooled += 1;
        }
    }
    let asr = fooled as f64 / pool.len().max(1) as f64;
    eprintln!(
        "victim accuracy on pool: {:.4} (by construction 1.0); surrogate accuracy: {:.4}",
        1.0,
        evaluate_accuracy(surrogate, &pool)?
    );
    println!(
        "{} -> {} {} eps={:.5} pool={} asr={:.4}",
        args.surrogate,
        args.victim,
        spec.algorithm.as_str(),
        epsilon,
        pool.len(),
        asr
    );
    Ok(())
}

fn summarize_report(args: ReportArgs) -> Result<()> {
    let report = load_report(&args.dir)?;
    println!("kind: {}", report.kind);
    println!("config hash: {}", report.config_hash);
    println!("master seed: {}", report.master_seed);
    for note in &report.notes {
        println!("note: {note}");
    }
    println!(
        "{:<12} {:<12} {:<28} {:<18} {:>8} {:>5} {:>8}",
        "victim", "surrogate", "strategy", "sampling", "epsilon", "n", "asr"
    );
    for row in &report.rows {
        println!(
            "{:<12} {:<12} {:<28} {:<18} {:>8.5} {:>5} {:>8.4}",
            row.victim, row.surrogate, row.strategy, row.sampling, row.epsilon, row.n, row.asr
        );
    }
    Ok(())
}
