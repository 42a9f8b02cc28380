use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use sliceplace_core::constraints::is_feasible;
use sliceplace_core::eval::{emit_report, load_bundle_for, placement_csv, run_experiment, summary_text, Algorithm, ExperimentSpec};
use sliceplace_core::exact::{solve_exact_with, ExactOptions};
use sliceplace_core::heuristics::{place_cost_aware, place_load_balance, place_performance_aware, place_random_seeded};
use sliceplace_core::marl::{
    default_config, place_slices, train_many, training_curve_csv, AgentKind, InferenceOptions, PlacementMode, Policy, SchedulerBundle,
    TrainingOptions,
};
use sliceplace_core::profiler::{load_trace, profile_summary, profile_trace, measured_table, write_profile_csv, ResourceLookupTable};
use sliceplace_core::scenario_file::ScenarioFile;
use sliceplace_core::{Scenario, SliceType, SolveResult};

#[derive(Parser)]
#[command(name = "sliceplace", version, about = "VNF placement for network slices across edge, distributed and central clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a scenario file.
    Generate {
        #[arg(long)]
        slices: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Place one scenario and write the placement as CSV.
    Solve {
        #[arg(long, default_value = "exact")]
        algorithm: String,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        checkpoints: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// stop the exact search after this many seconds
        #[arg(long)]
        time_limit: Option<f64>,
        /// seed for the random heuristic
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// let learned agents pick actions that break the slice's budget
        #[arg(long)]
        no_sla_guard: bool,
    },
    /// Train agents and write checkpoints.
    Train {
        /// embb, urllc, mmtc, monolithic or all
        #[arg(long, default_value = "all")]
        agent: String,
        #[arg(long, default_value_t = 50_000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5000)]
        checkpoint_every: usize,
        /// longest generated training queue
        #[arg(long, default_value_t = sliceplace_core::mdp::Q_MAX)]
        max_queue: usize,
        #[arg(long, env = "SLICEPLACE_THREADS", default_value_t = 1)]
        threads: usize,
    },
    /// Profile a packet trace.
    Profile {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        window: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        slice_type: Option<String>,
    },
    /// Query or export the resource lookup table.
    Lookup {
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, requires_all = ["vnf", "users"])]
        slice_type: Option<String>,
        #[arg(long)]
        vnf: Option<String>,
        #[arg(long)]
        users: Option<u32>,
        /// write the table as CSV
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Run an experiment matrix and write metrics.csv and summary.txt.
    Evaluate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        checkpoints: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "SLICEPLACE_THREADS", default_value_t = 1)]
        threads: usize,
    },
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let file = ScenarioFile::load(path).with_context(|| format!("reading scenario {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(file.build(base)?)
}

fn write_placement(result: &SolveResult, scenario: &Scenario, out: Option<&Path>) -> Result<()> {
    let text = placement_csv(result, scenario)?;
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn solve(
    algorithm: &str,
    scenario_path: &Path,
    checkpoints: Option<&Path>,
    out: Option<&Path>,
    time_limit: Option<f64>,
    seed: u64,
    sla_guard: bool,
) -> Result<()> {
    let algorithm: Algorithm = algorithm.parse()?;
    let scenario = load_scenario(scenario_path)?;
    let inference = InferenceOptions { sla_guard };
    let result = match algorithm {
        Algorithm::Exact => solve_exact_with(&scenario, &ExactOptions { time_limit: time_limit.map(std::time::Duration::from_secs_f64) }),
        Algorithm::CostAware => place_cost_aware(&scenario),
        Algorithm::PerformanceAware => place_performance_aware(&scenario),
        Algorithm::LoadBalance => place_load_balance(&scenario),
        Algorithm::Random => place_random_seeded(&scenario, seed),
        Algorithm::Marl | Algorithm::Monolithic => {
            let dir = checkpoints.context("--checkpoints is required for learned schedulers")?;
            let bundle = SchedulerBundle::load(dir, &algorithm.required_agents())?;
            let mode = if algorithm == Algorithm::Marl { PlacementMode::Disaggregated } else { PlacementMode::Monolithic };
            let r = place_slices(&bundle, &scenario, mode, inference)?;
            eprintln!("decision time with one thread per agent: {:.6} s", r.parallel_time.as_secs_f64());
            r.solve
        }
    };
    write_placement(&result, &scenario, out)?;
    let placed = result.placement.as_ref().map_or(0, |p| (0..scenario.requests.len()).filter(|&s| p.slice_is_placed(s)).count());
    eprintln!(
        "{algorithm}: cost {:.6} $/h, {placed}/{} slices placed, decision time {:.6} s{}",
        result.cost.dollars_per_hour(),
        scenario.requests.len(),
        result.wall_time.as_secs_f64(),
        if result.optimal || !matches!(algorithm, Algorithm::Exact) { "" } else { " (time limit hit)" }
    );
    if let Some(p) = &result.placement {
        let report = is_feasible(p, &scenario);
        if !report.feasible() {
            eprintln!("placement breaks constraints: {}", report.diagnostics());
        }
    } else {
        eprintln!("no feasible placement found");
    }
    Ok(())
}

fn train(agent: &str, episodes: usize, seed: u64, out: &Path, checkpoint_every: usize, max_queue: usize, threads: usize) -> Result<()> {
    let kinds: Vec<AgentKind> = if agent.eq_ignore_ascii_case("all") { AgentKind::ALL.to_vec() } else { vec![agent.parse()?] };
    if max_queue == 0 || max_queue > sliceplace_core::mdp::Q_MAX {
        bail!("--max-queue must be between 1 and {}", sliceplace_core::mdp::Q_MAX);
    }
    let options = TrainingOptions {
        queue_len: (1, max_queue),
        checkpoint_dir: Some(out.to_path_buf()),
        checkpoint_every,
        ..Default::default()
    };
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let jobs = kinds.iter().map(|&k| (k, default_config(k, episodes, seed))).collect();
    let trained = train_many(jobs, &options, threads)?;
    let mut bundle = SchedulerBundle::default();
    for (kind, agent, report) in &trained {
        bundle.insert(*kind, Policy::from_agent(agent));
        std::fs::write(out.join(format!("{}-training.csv", kind.name())), training_curve_csv(report))?;
        let tail = &report.episode_rewards[report.episode_rewards.len().saturating_sub(100)..];
        eprintln!(
            "{kind}: {} episodes, {} steps, mean reward over the last {} episodes {:.3}",
            report.episode_rewards.len(),
            report.steps,
            tail.len(),
            tail.iter().sum::<f64>() / tail.len().max(1) as f64
        );
    }
    bundle.save(out)?;
    Ok(())
}

fn profile(trace: &Path, window: f64, out: &Path, slice_type: Option<&str>) -> Result<()> {
    let slice_type: Option<SliceType> = slice_type.map(str::parse).transpose()?;
    let t = load_trace(trace).with_context(|| format!("loading {}", trace.display()))?;
    for w in &t.warnings {
        eprintln!("warning: {w}");
    }
    let p = profile_trace(&t.records, window, slice_type)?;
    write_profile_csv(&p, out)?;
    print!("{}", profile_summary(&p));
    Ok(())
}

fn lookup(table: Option<&Path>, slice_type: Option<&str>, vnf: Option<&str>, users: Option<u32>, export: Option<&Path>) -> Result<()> {
    let table = match table {
        Some(p) => ResourceLookupTable::load(p)?,
        None => measured_table(),
    };
    if let Some(p) = export {
        table.save(p)?;
    }
    if let (Some(t), Some(v), Some(u)) = (slice_type, vnf, users) {
        let hit = table.lookup(t.parse()?, v, u)?;
        let mem = hit.mem_mib.map_or("unavailable".to_string(), |m| format!("{m} MiB"));
        let mut flags = Vec::new();
        if hit.clamped {
            flags.push("clamped to the measured range");
        }
        if hit.upper_bound {
            flags.push("upper bound");
        }
        println!("cpu {}%  mem {mem}{}", hit.cpu_percent, if flags.is_empty() { String::new() } else { format!("  ({})", flags.join(", ")) });
    } else if export.is_none() {
        print!("{}", table.to_csv_string()?);
    }
    Ok(())
}

fn evaluate(spec_path: &Path, checkpoints: Option<&Path>, out: &Path, threads: usize) -> Result<()> {
    let spec = ExperimentSpec::from_toml(&std::fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?)?;
    let bundle = match (spec.required_agents().is_empty(), checkpoints) {
        (true, _) => None,
        (false, Some(dir)) => load_bundle_for(&spec, dir)?,
        (false, None) => bail!("--checkpoints is required for learned schedulers"),
    };
    let rows = run_experiment(&spec, bundle.as_ref(), threads)?;
    emit_report(&rows, out)?;
    print!("{}", summary_text(&rows));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { slices, seed, out } => {
            std::fs::write(&out, ScenarioFile::generated(slices, seed).to_toml())?;
            Ok(())
        }
        Command::Solve { algorithm, scenario, checkpoints, out, time_limit, seed, no_sla_guard } => {
            solve(&algorithm, &scenario, checkpoints.as_deref(), out.as_deref(), time_limit, seed, !no_sla_guard)
        }
        Command::Train { agent, episodes, seed, out, checkpoint_every, max_queue, threads } => {
            train(&agent, episodes, seed, &out, checkpoint_every, max_queue, threads)
        }
        Command::Profile { trace, window, out, slice_type } => profile(&trace, window, &out, slice_type.as_deref()),
        Command::Lookup { table, slice_type, vnf, users, export } => {
            lookup(table.as_deref(), slice_type.as_deref(), vnf.as_deref(), users, export.as_deref())
        }
        Command::Evaluate { spec, checkpoints, out, threads } => evaluate(&spec, checkpoints.as_deref(), &out, threads),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
