//! `bltl-drive`: synthesize, validate and inspect control strategies.

mod svg;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use bltl_drive::bltl::{parse_formula, sequential_witness, to_sequential, TimedTrace};
use bltl_drive::config::RunConfig;
use bltl_drive::seeding::{stream, Purpose};
use bltl_drive::synthesis::{
    simulate_episode, synthesize, validate_true_system, BieResult, PolicyFile, RoundRecord, Termination,
};
use bltl_drive::tracegen::{read_samples_csv, write_samples_csv};

/// Exit status when synthesis stops at the round limit without converging.
const EXIT_MAX_ROUNDS: u8 = 2;
const SAMPLES_PER_STAGE: usize = 64;

#[derive(Parser)]
#[command(name = "bltl-drive", version, about = "BLTL control synthesis for a noisy differential-drive vehicle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a control strategy; writes policy.json, audit.jsonl and summary.json.
    Synth(SynthArgs),
    /// Estimate the satisfaction probability of a policy on the continuous system.
    Validate(ValidateArgs),
    /// Check a timed trace (CSV with columns label,duration) against a formula.
    Check(CheckArgs),
    /// Render the environment and trajectory CSV files as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config value.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); overrides the config value.
    #[arg(long)]
    workers: Option<usize>,
    /// Directory for output artifacts.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Policy file written by `synth`.
    #[arg(long)]
    policy: PathBuf,
    /// Proceed even if the policy was synthesized from a different config.
    #[arg(long)]
    override_hash: bool,
    /// Number of sample trajectories to export as CSV.
    #[arg(long, default_value_t = 20)]
    trajectories: u64,
}

#[derive(Args)]
struct CheckArgs {
    /// Timed trace CSV.
    #[arg(long)]
    trace: PathBuf,
    /// Formula; defaults to the one in `--config`.
    #[arg(long)]
    formula: Option<String>,
    /// Unsafe proposition; defaults to the config environment's, else `u`.
    #[arg(long = "unsafe")]
    unsafe_prop: Option<String>,
    /// Run configuration supplying the formula and unsafe proposition.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Run configuration supplying the environment.
    #[arg(long)]
    config: PathBuf,
    /// Trajectory CSV files or directories containing them. Files ending in
    /// `_sat.csv` / `_viol.csv` are drawn as satisfying / violating.
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "plot.svg")]
    name: String,
}

#[derive(Serialize)]
struct Summary<'a> {
    horizon: usize,
    termination: Termination,
    rounds: usize,
    p_hat: f64,
    estimate: &'a BieResult,
    config_hash: String,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct ValidationReport {
    policy_p_hat: f64,
    p_hat: f64,
    estimate: BieResult,
    delta: f64,
    bound: f64,
    holds: bool,
    seed: u64,
    config_hash: String,
    policy_config_hash: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Validate(a) => validate(a).map(|_| ExitCode::SUCCESS),
        Command::Check(a) => check(a).map(|_| ExitCode::SUCCESS),
        Command::Plot(a) => plot(a).map(|_| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}

fn load_config(run: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&run.config).with_context(|| format!("loading {}", run.config.display()))?;
    if let Some(s) = run.seed {
        cfg.seed = s;
    }
    if let Some(w) = run.workers {
        cfg.workers = w;
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build_global()
        .context("starting worker pool")?;
    fs::create_dir_all(&run.out_dir).with_context(|| format!("creating {}", run.out_dir.display()))?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn synth(args: SynthArgs) -> Result<ExitCode> {
    let cfg = load_config(&args.run)?;
    let problem = cfg.problem()?;
    let out = &args.run.out_dir;
    println!("horizon K = {}", problem.horizon);

    let mut audit = create(&out.join("audit.jsonl"))?;
    let mut audit_err = None;
    let outcome = synthesize(&problem, &cfg.synthesis, cfg.seed, |r: &RoundRecord| {
        let change = r.change.map_or("-".to_string(), |c| format!("{c:.4}"));
        println!(
            "round {:>3}: p_hat = {:.4} (n = {}), change = {change}",
            r.round, r.estimate.p_hat, r.estimate.samples
        );
        if let Err(e) = serde_json::to_writer(&mut audit, r)
            .map_err(anyhow::Error::from)
            .and_then(|_| writeln!(audit).map_err(Into::into))
        {
            audit_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = audit_err {
        return Err(e.context("writing audit log"));
    }
    audit.flush()?;

    let hash = cfg.hash();
    let file = PolicyFile::new(&outcome, &problem, &cfg.synthesis.bie, hash.clone(), cfg.seed);
    write_json(&out.join("policy.json"), &file)?;
    write_json(
        &out.join("summary.json"),
        &Summary {
            horizon: problem.horizon,
            termination: outcome.termination,
            rounds: outcome.rounds.len(),
            p_hat: outcome.estimate.p_hat,
            estimate: &outcome.estimate,
            config_hash: hash,
            config: &cfg,
        },
    )?;
    println!(
        "p_hat_M = {:.4} after {} rounds ({})",
        outcome.estimate.p_hat,
        outcome.rounds.len(),
        match outcome.termination {
            Termination::Converged => "converged",
            Termination::MaxRounds => "round limit reached",
        }
    );
    Ok(match outcome.termination {
        Termination::Converged => ExitCode::SUCCESS,
        Termination::MaxRounds => {
            eprintln!("error: no convergence within {} rounds", cfg.synthesis.max_rounds);
            ExitCode::from(EXIT_MAX_ROUNDS)
        }
    })
}

fn validate(args: ValidateArgs) -> Result<()> {
    let cfg = load_config(&args.run)?;
    let text = fs::read_to_string(&args.policy).with_context(|| format!("reading {}", args.policy.display()))?;
    let file: PolicyFile =
        serde_json::from_str(&text).with_context(|| format!("parsing policy {}", args.policy.display()))?;
    let hash = cfg.hash();
    if file.config_hash != hash {
        if !args.override_hash {
            bail!(
                "policy was synthesized from config {} but this config hashes to {}; pass --override-hash to proceed",
                file.config_hash,
                hash
            );
        }
        eprintln!("warning: config hash mismatch overridden");
    }
    let gamma = file.policy()?;
    let problem = cfg.problem()?;
    let bie = &cfg.synthesis.bie;
    let est = validate_true_system(&problem, &gamma, bie, cfg.synthesis.batch_size, cfg.seed);
    let bound = file.p_hat - 2.0 * bie.delta;
    let report = ValidationReport {
        policy_p_hat: file.p_hat,
        p_hat: est.p_hat,
        estimate: est,
        delta: bie.delta,
        bound,
        holds: est.p_hat >= bound,
        seed: cfg.seed,
        config_hash: hash,
        policy_config_hash: file.config_hash.clone(),
    };
    write_json(&args.run.out_dir.join("validation.json"), &report)?;

    let dir = args.run.out_dir.join("trajectories");
    if args.trajectories > 0 {
        fs::create_dir_all(&dir)?;
    }
    for i in 0..args.trajectories {
        let mut rng = stream(cfg.seed, Purpose::Validate, 0, i);
        let (traj, _, ok) = simulate_episode(&problem, &gamma, &mut rng);
        let stem = format!("traj_{i:03}_{}", if ok { "sat" } else { "viol" });
        write_samples_csv(create(&dir.join(format!("{stem}.csv")))?, &traj.samples(SAMPLES_PER_STAGE))?;
        problem
            .generator()
            .from_trajectory(&traj)
            .write_csv(create(&dir.join(format!("{stem}.trace.csv")))?)?;
    }

    println!("p_hat_M (policy)     = {:.4}", file.p_hat);
    println!("p_hat_S (simulation) = {:.4} (n = {}, {} satisfied)", est.p_hat, est.samples, est.successes);
    println!(
        "p_hat_S >= p_hat_M - 2*delta ({:.4}): {}",
        bound,
        if report.holds { "PASS" } else { "FAIL" }
    );
    Ok(())
}

fn check(args: CheckArgs) -> Result<()> {
    let cfg = args
        .config
        .as_ref()
        .map(|p| RunConfig::load(p).with_context(|| format!("loading {}", p.display())))
        .transpose()?;
    let formula = match (&args.formula, &cfg) {
        (Some(f), _) => f.clone(),
        (None, Some(c)) => c.formula.clone(),
        (None, None) => bail!("either --formula or --config is required"),
    };
    let unsafe_prop = match (&args.unsafe_prop, &cfg) {
        (Some(u), _) => u.clone(),
        (None, Some(c)) => c.environment()?.unsafe_prop().to_string(),
        (None, None) => "u".to_string(),
    };
    let spec = to_sequential(&parse_formula(&formula)?, &unsafe_prop)?;
    let file = File::open(&args.trace).with_context(|| format!("opening {}", args.trace.display()))?;
    let trace = TimedTrace::read_csv(file).with_context(|| format!("parsing trace {}", args.trace.display()))?;
    match sequential_witness(&trace, &spec) {
        Some(chain) => {
            println!("satisfied");
            for (j, w) in chain.iter().enumerate() {
                println!("phase {}: i = {}, k = {}, n = {}", j + 1, w.start + 1, w.offset, w.disjunct + 1);
            }
        }
        None => println!("violated"),
    }
    Ok(())
}

fn plot(args: PlotArgs) -> Result<()> {
    let cfg = RunConfig::load(&args.config).with_context(|| format!("loading {}", args.config.display()))?;
    let env = cfg.environment()?;
    let mut files = Vec::new();
    for input in &args.inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()?;
            found.retain(|p| is_trajectory_csv(p));
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    let mut paths = Vec::with_capacity(files.len());
    for f in &files {
        let rows = read_samples_csv(File::open(f).with_context(|| format!("opening {}", f.display()))?)
            .with_context(|| format!("parsing trajectory {}", f.display()))?;
        let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let satisfied = if name.ends_with("_sat.csv") {
            Some(true)
        } else if name.ends_with("_viol.csv") {
            Some(false)
        } else {
            None
        };
        paths.push(svg::Polyline {
            name,
            points: rows.iter().map(|r| (r.x, r.y)).collect(),
            satisfied,
        });
    }
    let (doc, clipped) = svg::render(&env, &paths);
    for name in clipped {
        eprintln!("warning: trajectory {name} leaves the workspace and was clipped");
    }
    fs::create_dir_all(&args.out_dir)?;
    let out = args.out_dir.join(&args.name);
    fs::write(&out, doc).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} ({} trajectories)", out.display(), paths.len());
    Ok(())
}

fn is_trajectory_csv(p: &Path) -> bool {
    let name = p.file_name().map(|n| n.to_string_lossy()).unwrap_or_default();
    name.ends_with(".csv") && !name.ends_with(".trace.csv")
}
