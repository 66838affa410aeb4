//! `amdp`: generate instances, analyze chains, solve for optimal exploration
//! allocations and run the online learners from the command line.

use active_mdp::fmh::{fmh_run, FmhParams};
use active_mdp::learner::{
    fixed_policy_run, fw_ame_fmh_run, fw_ame_run, uniform_baseline_run, Budget, LearnerOptions,
    LearnerTrace,
};
use active_mdp::mdp::{chain_from_policy, check_ergodic_assumption, garnet_generate};
use active_mdp::rng::SeedableStream;
use active_mdp::simlab::{preset_catalog, run_experiment, write_outputs, ExperimentConfig};
use active_mdp::solver::fw_solve;
use active_mdp::stats::{competitive_ratio, loss_empirical};
use active_mdp::{Mdp, Policy};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "amdp", version, about = "Active exploration in MDPs: solvers, heuristics and learners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random Garnet MDP instance as JSON
    Garnet(GarnetArgs),
    /// Chain and spectral report for a policy on an MDP
    Analyze(AnalyzeArgs),
    /// Solve for the asymptotically optimal allocation
    Solve(SolveArgs),
    /// Apply the faster-mixing heuristic to a policy
    Fmh(FmhArgs),
    /// Run a learner or baseline and report empirical losses
    Run(RunArgs),
    /// Run a bundled experiment preset (or a JSON config)
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GarnetArgs {
    #[arg(long)]
    states: usize,
    #[arg(long)]
    actions: usize,
    #[arg(long)]
    branching: usize,
    #[arg(long, default_value_t = 0.01)]
    sigma2_min: f64,
    #[arg(long, default_value_t = 10.0)]
    sigma2_max: f64,
    /// make every action's chain reversible under a common distribution
    #[arg(long)]
    reversible: bool,
    #[arg(long)]
    seed: u64,
    /// output file (stdout when omitted)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    mdp: PathBuf,
    /// policy JSON; the uniform policy when omitted
    #[arg(long)]
    policy: Option<PathBuf>,
    /// additionally probe ergodicity over randomly sampled policies
    #[arg(long)]
    check_ergodic: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    mdp: PathBuf,
    #[arg(long, default_value_t = 0.001)]
    eta_floor: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FmhArgs {
    #[arg(long)]
    mdp: PathBuf,
    /// exploration budget n driving the default ρ and slack
    #[arg(long)]
    budget: u64,
    /// policy to improve; the solved optimal policy when omitted
    #[arg(long)]
    policy: Option<PathBuf>,
    /// mixing-penalty weight ρ (default S/n)
    #[arg(long)]
    rho: Option<f64>,
    /// allowed deviation of the stationary distribution (default 1/n)
    #[arg(long)]
    delta_slack: Option<f64>,
    #[arg(long, default_value_t = 0.001)]
    eta_floor: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// one of fw-ame, fw-ame-fmh, uniform, fixed
    #[arg(long)]
    algo: String,
    #[arg(long)]
    mdp: PathBuf,
    #[arg(long)]
    budget: u64,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// integer seed, or "auto" for a fresh one
    #[arg(long)]
    seed: String,
    /// policy JSON, required for --algo fixed
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long, default_value_t = 0.001)]
    eta_floor: f64,
    /// write the last run's per-episode trace to this CSV file
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// a bundled preset name (see --list)
    #[arg(long)]
    preset: Option<String>,
    /// JSON config overriding the preset entirely
    #[arg(long)]
    config: Option<PathBuf>,
    /// master seed override, or "auto"
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    list: bool,
    #[arg(short, long, default_value = "out")]
    output: PathBuf,
}

fn load_mdp(path: &PathBuf) -> Result<Mdp> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    Ok(Mdp::from_json(&value)?)
}

fn load_policy(path: &PathBuf) -> Result<Policy> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    Ok(Policy::from_json(&value)?)
}

fn emit(value: &serde_json::Value, output: Option<&PathBuf>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match output {
        Some(path) => std::fs::write(path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn parse_seed(raw: &str) -> Result<u64> {
    if raw == "auto" {
        return Ok(rand::random());
    }
    raw.parse::<u64>()
        .map_err(|_| anyhow!("--seed must be an unsigned integer or \"auto\""))
}

fn cmd_garnet(args: GarnetArgs) -> Result<()> {
    let mdp = garnet_generate::<f64>(
        args.states,
        args.actions,
        args.branching,
        args.sigma2_min,
        args.sigma2_max,
        args.reversible,
        args.seed,
    )?;
    emit(&mdp.to_json(), args.output.as_ref())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let mdp = load_mdp(&args.mdp)?;
    let policy = match &args.policy {
        Some(p) => load_policy(p)?,
        None => Policy::uniform(mdp.num_states(), mdp.num_actions()),
    };
    let analysis = chain_from_policy(&mdp, &policy)?;
    let mut report = serde_json::json!({
        "eta": analysis.eta,
        "slem": analysis.slem,
        "spectral_gap": analysis.gap,
        "reversible": analysis.reversible,
        "ergodic": analysis.ergodic,
        "eta_min": analysis.eta_min(),
    });
    if args.check_ergodic {
        let probe = check_ergodic_assumption(&mdp, 20, 0);
        report["ergodic_probe"] = serde_json::json!({
            "pass": probe.pass,
            "policies_checked": probe.policies_checked,
            "min_eta": probe.min_eta,
            "min_gap": probe.min_gap,
            "failures": probe.failures,
        });
    }
    emit(&report, args.output.as_ref())
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let mdp = load_mdp(&args.mdp)?;
    let result = fw_solve(&mdp, args.eta_floor, args.tol, args.max_iters)?;
    emit(&result.to_json(), args.output.as_ref())
}

fn cmd_fmh(args: FmhArgs) -> Result<()> {
    let mdp = load_mdp(&args.mdp)?;
    let policy = match &args.policy {
        Some(p) => load_policy(p)?,
        None => fw_solve(&mdp, args.eta_floor, 1e-6, 100_000)?.policy,
    };
    let params = FmhParams {
        rho_n: args.rho,
        delta_n: args.delta_slack,
        eta_floor: None,
        max_iters: None,
    };
    let outcome = fmh_run(&mdp, &policy, args.budget, &params)?;
    emit(&outcome.to_json(), args.output.as_ref())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mdp = load_mdp(&args.mdp)?;
    if args.runs == 0 {
        bail!("--runs must be at least 1");
    }
    let seed = parse_seed(&args.seed)?;
    let fixed_policy = match args.algo.as_str() {
        "fixed" => Some(load_policy(args.policy.as_ref().ok_or_else(|| {
            anyhow!("--algo fixed requires --policy")
        })?)?),
        "fw-ame" | "fw-ame-fmh" | "uniform" => None,
        other => bail!("unknown --algo {other} (expected fw-ame, fw-ame-fmh, uniform or fixed)"),
    };
    let stream = SeedableStream::new(seed);
    let mut estimates = Vec::with_capacity(args.runs);
    let mut l_star = 0.0;
    let mut last_trace: Option<LearnerTrace<f64>> = None;
    for run in 0..args.runs {
        let options = LearnerOptions {
            eta_floor: args.eta_floor,
            ..LearnerOptions::defaults(&mdp, Budget::Steps(args.budget), stream.derive(&[run as u64]))
        };
        let trace = match args.algo.as_str() {
            "fw-ame" => fw_ame_run(&mdp, &options)?,
            "fw-ame-fmh" => fw_ame_fmh_run(&mdp, &options)?,
            "uniform" => uniform_baseline_run(&mdp, &options)?,
            _ => fixed_policy_run(&mdp, fixed_policy.as_ref().unwrap(), &options)?,
        };
        estimates.push(trace.mean_estimates());
        l_star = trace.l_star;
        last_trace = Some(trace);
    }
    let (loss, n_loss) = loss_empirical(&estimates, mdp.mu(), args.budget);
    let ratio = competitive_ratio(n_loss, l_star).ok();
    if let (Some(path), Some(trace)) = (&args.trace, &last_trace) {
        let file = std::fs::File::create(path)
            .with_context(|| format!("writing {}", path.display()))?;
        trace.write_csv(file)?;
    }
    let report = serde_json::json!({
        "algo": args.algo,
        "budget": args.budget,
        "runs": args.runs,
        "seed": seed,
        "loss": loss,
        "n_loss": n_loss,
        "l_star": l_star,
        "ratio": ratio,
        "avg_slem_last_run": last_trace.as_ref().map(|t| t.average_slem()),
    });
    emit(&report, args.output.as_ref())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    if args.list {
        for p in preset_catalog() {
            println!("{}", p.preset);
        }
        return Ok(());
    }
    let mut cfg: ExperimentConfig = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text)?
        }
        (None, Some(name)) => preset_catalog()
            .into_iter()
            .find(|p| &p.preset == name)
            .ok_or_else(|| anyhow!("unknown preset {name}; try --list"))?,
        (None, None) => bail!("provide --preset or --config"),
    };
    if let Some(raw) = &args.seed {
        cfg.master_seed = parse_seed(raw)?;
    }
    let output = run_experiment(&cfg)?;
    write_outputs(&output, &cfg, &args.output)?;
    eprintln!(
        "{}: {} records, {} failures -> {}",
        cfg.preset,
        output.records.len(),
        output.failures.len(),
        args.output.display()
    );
    if !output.failures.is_empty() {
        for f in &output.failures {
            eprintln!("failed cell {f}");
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Garnet(a) => cmd_garnet(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Fmh(a) => cmd_fmh(a),
        Command::Run(a) => cmd_run(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
