//! Experiment matrix: every algorithm over generated scenarios of several
//! sizes, with cost, decision time, SLA violations under sampled latencies,
//! and per-tier utilisation.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constraints::{check_consolidation, infra_usage, user_plane_latency_at, Placement};
use crate::env_model::{default_catalog, derive_seed, Resources, Scenario, Tier};
use crate::error::{Error, Result};
use crate::exact::{solve_exact_with, ExactOptions, SolveResult};
use crate::heuristics::{place_cost_aware, place_load_balance, place_performance_aware, place_random_seeded};
use crate::marl::{place_slices, AgentKind, InferenceOptions, PlacementMode, SchedulerBundle};

/// Mean times below this are reported as this value, flagged as a bound.
pub const TIMER_RESOLUTION_S: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Exact,
    Marl,
    Monolithic,
    CostAware,
    PerformanceAware,
    LoadBalance,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Exact,
        Algorithm::Marl,
        Algorithm::Monolithic,
        Algorithm::CostAware,
        Algorithm::PerformanceAware,
        Algorithm::LoadBalance,
        Algorithm::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Exact => "exact",
            Algorithm::Marl => "marl",
            Algorithm::Monolithic => "monolithic",
            Algorithm::CostAware => "cost-aware",
            Algorithm::PerformanceAware => "performance-aware",
            Algorithm::LoadBalance => "load-balance",
            Algorithm::Random => "random",
        }
    }

    /// Agents the algorithm needs from a checkpoint bundle.
    pub fn required_agents(self) -> Vec<AgentKind> {
        match self {
            Algorithm::Marl => AgentKind::ALL[..3].to_vec(),
            Algorithm::Monolithic => vec![AgentKind::Monolithic],
            _ => vec![],
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "ilp" | "exact" => Ok(Algorithm::Exact),
            "mono" => Ok(Algorithm::Monolithic),
            _ => Algorithm::ALL
                .into_iter()
                .find(|a| a.name() == s)
                .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}'"))),
        }
    }
}

fn default_slice_counts() -> Vec<usize> {
    vec![5, 10, 15]
}
fn default_trials() -> usize {
    100
}
fn default_samples() -> usize {
    1
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_slice_counts")]
    pub slice_counts: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub latency_samples_per_slice: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_time_limit_s: Option<f64>,
    /// inference-time SLA guard for the learned schedulers
    #[serde(default = "default_true")]
    pub sla_guard: bool,
    /// when false, decision times are reported as zero so that repeated
    /// runs produce identical files
    #[serde(default = "default_true")]
    pub record_timing: bool,
}

impl ExperimentSpec {
    pub fn new(algorithms: Vec<Algorithm>) -> Self {
        ExperimentSpec {
            slice_counts: default_slice_counts(),
            trials: default_trials(),
            algorithms,
            seed: 0,
            latency_samples_per_slice: 1,
            exact_time_limit_s: None,
            sla_guard: true,
            record_timing: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("at least one algorithm is required".into()));
        }
        if self.slice_counts.is_empty() || self.slice_counts.contains(&0) {
            return Err(Error::Config("slice counts must be nonempty and positive".into()));
        }
        if self.latency_samples_per_slice == 0 {
            return Err(Error::Config("latency_samples_per_slice must be at least 1".into()));
        }
        if self.exact_time_limit_s.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Config("exact_time_limit_s must be positive".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    /// Seed of the scenario every algorithm sees in cell (`slices`, `trial`).
    pub fn scenario_seed(&self, slices: usize, trial: usize) -> u64 {
        derive_seed(derive_seed(self.seed, slices as u64), trial as u64)
    }

    pub fn scenario(&self, slices: usize, trial: usize) -> Scenario {
        default_catalog().generate(slices, self.scenario_seed(slices, trial))
    }

    pub fn required_agents(&self) -> Vec<AgentKind> {
        let mut kinds: Vec<AgentKind> = self.algorithms.iter().flat_map(|a| a.required_agents()).collect();
        kinds.sort();
        kinds.dedup();
        kinds
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TierUsage {
    pub tier: Tier,
    pub used: Resources,
    pub capacity: Resources,
    pub cpu_util_pct: f64,
    pub mem_util_pct: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub algorithm: Algorithm,
    pub slice_count: usize,
    pub trial: usize,
    pub scenario_seed: u64,
    pub cost_per_hour: f64,
    pub decision_time_s: f64,
    /// slowest single agent for the disaggregated scheduler; otherwise
    /// equal to `decision_time_s`
    pub parallel_decision_time_s: f64,
    pub sla_violation_pct: f64,
    pub consolidation_breaches: usize,
    pub placed_slices: usize,
    pub rejected_slices: usize,
    pub optimal: bool,
    /// sum of the demands of every placed VNF
    pub placed_demand: Resources,
    pub tiers: Vec<TierUsage>,
}

/// Standard-normal deviates shared by all algorithms in one trial:
/// `[slice][sample][hop]`.
pub fn common_latency_draws(scenario: &Scenario, samples: usize) -> Vec<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(scenario.rng_seed, 0x5EED_1A7E));
    scenario
        .requests
        .iter()
        .map(|r| {
            let hops = r.chain().len().saturating_sub(1);
            (0..samples).map(|_| (0..hops).map(|_| StandardNormal.sample(&mut rng)).collect()).collect()
        })
        .collect()
}

fn pct(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Metrics for one solved trial.
pub fn metrics_row(
    algorithm: Algorithm,
    trial: usize,
    scenario: &Scenario,
    result: &SolveResult,
    parallel_time: Duration,
    draws: &[Vec<Vec<f64>>],
) -> Result<MetricsRow> {
    let empty = Placement::empty(scenario);
    let placement = result.placement.as_ref().unwrap_or(&empty);
    let placed: Vec<usize> = (0..scenario.requests.len()).filter(|&s| placement.slice_is_placed(s)).collect();
    let mut placed_demand = Resources::ZERO;
    for &s in &placed {
        for v in &scenario.requests[s].vnfs {
            placed_demand += v.demand;
        }
    }
    let (mut violations, mut samples, mut breaches) = (0u64, 0u64, 0usize);
    for &s in &placed {
        let budget = scenario.requests[s].latency_budget_ms;
        for z in &draws[s] {
            samples += 1;
            if user_plane_latency_at(placement, s, scenario, z)? >= budget {
                violations += 1;
            }
        }
        if !check_consolidation(placement, s, &scenario.requests[s]) {
            breaches += 1;
        }
    }
    let usage = infra_usage(placement, scenario);
    let tiers = scenario
        .infrastructures
        .iter()
        .zip(&usage)
        .map(|(infra, used)| TierUsage {
            tier: infra.tier,
            used: *used,
            capacity: infra.capacity,
            cpu_util_pct: pct(used.cpu_milli, infra.capacity.cpu_milli),
            mem_util_pct: pct(used.mem_mgib, infra.capacity.mem_mgib),
        })
        .collect();
    Ok(MetricsRow {
        algorithm,
        slice_count: scenario.requests.len(),
        trial,
        scenario_seed: scenario.rng_seed,
        cost_per_hour: result.cost.dollars_per_hour(),
        decision_time_s: result.wall_time.as_secs_f64(),
        parallel_decision_time_s: parallel_time.as_secs_f64(),
        sla_violation_pct: pct(violations, samples),
        consolidation_breaches: breaches,
        placed_slices: placed.len(),
        rejected_slices: scenario.requests.len() - placed.len(),
        optimal: result.optimal,
        placed_demand,
        tiers,
    })
}

/// Loads the agents `spec` needs; fails before any trial when one is missing.
pub fn load_bundle_for(spec: &ExperimentSpec, dir: &Path) -> Result<Option<SchedulerBundle>> {
    let kinds = spec.required_agents();
    if kinds.is_empty() {
        return Ok(None);
    }
    SchedulerBundle::load(dir, &kinds).map(Some)
}

fn run_one(
    spec: &ExperimentSpec,
    bundle: Option<&SchedulerBundle>,
    algorithm: Algorithm,
    slices: usize,
    trial: usize,
) -> Result<(MetricsRow, Placement)> {
    let scenario = spec.scenario(slices, trial);
    let draws = common_latency_draws(&scenario, spec.latency_samples_per_slice);
    let inference = InferenceOptions { sla_guard: spec.sla_guard };
    let (result, parallel) = match algorithm {
        Algorithm::Exact => {
            let opts = ExactOptions { time_limit: spec.exact_time_limit_s.map(Duration::from_secs_f64) };
            let r = solve_exact_with(&scenario, &opts);
            let t = r.wall_time;
            (r, t)
        }
        Algorithm::Marl | Algorithm::Monolithic => {
            let mode = if algorithm == Algorithm::Marl { PlacementMode::Disaggregated } else { PlacementMode::Monolithic };
            let r = place_slices(bundle.expect("bundle checked up front"), &scenario, mode, inference)?;
            (r.solve, r.parallel_time)
        }
        Algorithm::CostAware | Algorithm::PerformanceAware | Algorithm::LoadBalance | Algorithm::Random => {
            let r = match algorithm {
                Algorithm::CostAware => place_cost_aware(&scenario),
                Algorithm::PerformanceAware => place_performance_aware(&scenario),
                Algorithm::LoadBalance => place_load_balance(&scenario),
                _ => place_random_seeded(&scenario, derive_seed(scenario.rng_seed, 0xA11CE)),
            };
            let t = r.wall_time;
            (r, t)
        }
    };
    let mut row = metrics_row(algorithm, trial, &scenario, &result, parallel, &draws)?;
    if !spec.record_timing {
        row.decision_time_s = 0.0;
        row.parallel_decision_time_s = 0.0;
    }
    Ok((row, result.placement.unwrap_or_else(|| Placement::empty(&scenario))))
}

pub fn run_experiment(spec: &ExperimentSpec, bundle: Option<&SchedulerBundle>, threads: usize) -> Result<Vec<MetricsRow>> {
    Ok(run_experiment_detailed(spec, bundle, threads)?.into_iter().map(|(r, _)| r).collect())
}

/// Rows with the placement each came from, ordered by (algorithm as listed
/// in the experiment, slice count, trial).
pub fn run_experiment_detailed(
    spec: &ExperimentSpec,
    bundle: Option<&SchedulerBundle>,
    threads: usize,
) -> Result<Vec<(MetricsRow, Placement)>> {
    spec.validate()?;
    for kind in spec.required_agents() {
        if bundle.and_then(|b| b.get(kind)).is_none() {
            return Err(Error::Experiment(format!("no trained {kind} agent loaded")));
        }
    }
    let mut cells = Vec::new();
    for &a in &spec.algorithms {
        for &n in &spec.slice_counts {
            for t in 0..spec.trials {
                cells.push((a, n, t));
            }
        }
    }
    let threads = threads.max(1).min(cells.len());
    if threads == 1 {
        return cells.iter().map(|&(a, n, t)| run_one(spec, bundle, a, n, t)).collect();
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<(MetricsRow, Placement)>>>> = Mutex::new((0..cells.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(a, n, t)) = cells.get(i) else { break };
                let r = run_one(spec, bundle, a, n, t);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    results.into_inner().unwrap().into_iter().map(|r| r.expect("every cell ran")).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpeedupRow {
    pub algorithm: Algorithm,
    pub slice_count: usize,
    pub mean_time_s: f64,
    pub speedup: f64,
    pub mean_parallel_time_s: f64,
    pub parallel_speedup: f64,
    /// the algorithm's mean time was under the timer resolution, so the
    /// speed-ups are lower bounds
    pub lower_bound: bool,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Mean exact decision time over mean algorithm decision time, per cell.
pub fn speedup_table(rows: &[MetricsRow]) -> Result<Vec<SpeedupRow>> {
    let mut groups: BTreeMap<(usize, Algorithm), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.slice_count, r.algorithm)).or_default().push(r);
    }
    let mut out = Vec::new();
    for (&(n, algorithm), cell) in &groups {
        let exact = groups
            .get(&(n, Algorithm::Exact))
            .ok_or_else(|| Error::Experiment(format!("no exact rows for {n} slices")))?;
        let exact_mean = mean(exact.iter().map(|r| r.decision_time_s)).max(TIMER_RESOLUTION_S);
        let t = mean(cell.iter().map(|r| r.decision_time_s));
        let tp = mean(cell.iter().map(|r| r.parallel_decision_time_s));
        let lower_bound = t < TIMER_RESOLUTION_S || tp < TIMER_RESOLUTION_S;
        out.push(SpeedupRow {
            algorithm,
            slice_count: n,
            mean_time_s: t,
            speedup: exact_mean / t.max(TIMER_RESOLUTION_S),
            mean_parallel_time_s: tp,
            parallel_speedup: exact_mean / tp.max(TIMER_RESOLUTION_S),
            lower_bound,
        });
    }
    out.sort_by_key(|r| (r.algorithm, r.slice_count));
    Ok(out)
}

/// One line per VNF: `slice_id,slice_type,vnf,infrastructure,tier`, with
/// empty infrastructure and tier `rejected` for unplaced VNFs.
pub fn placement_csv(result: &SolveResult, scenario: &Scenario) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["slice_id", "slice_type", "vnf", "infrastructure", "tier"])?;
    for (s, request) in scenario.requests.iter().enumerate() {
        for (v, vnf) in request.vnfs.iter().enumerate() {
            let (infra, tier) = match result.placement.as_ref().and_then(|p| p.get(s, v)) {
                Some(m) => (m.to_string(), scenario.infrastructures[m].tier.name()),
                None => (String::new(), "rejected"),
            };
            w.write_record([&request.id.to_string(), request.slice_type.tag(), &vnf.name, &infra, tier])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Experiment(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Column names of the metrics CSV for a scenario with `tiers`.
pub fn csv_header(tiers: &[Tier]) -> Vec<String> {
    let mut h: Vec<String> = [
        "algorithm",
        "slice_count",
        "trial",
        "scenario_seed",
        "cost_per_hour",
        "decision_time_s",
        "parallel_decision_time_s",
        "sla_violation_pct",
        "consolidation_breaches",
        "placed_slices",
        "rejected_slices",
        "optimal",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for t in tiers {
        for col in ["cpu_used_milli", "mem_used_mgib", "cpu_util_pct", "mem_util_pct"] {
            h.push(format!("{}_{col}", t.name()));
        }
    }
    h
}

pub fn write_metrics_csv<W: std::io::Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let tiers: Vec<Tier> = rows.first().map(|r| r.tiers.iter().map(|t| t.tier).collect()).unwrap_or_default();
    w.write_record(csv_header(&tiers))?;
    for r in rows {
        let mut rec = vec![
            r.algorithm.name().to_string(),
            r.slice_count.to_string(),
            r.trial.to_string(),
            r.scenario_seed.to_string(),
            r.cost_per_hour.to_string(),
            r.decision_time_s.to_string(),
            r.parallel_decision_time_s.to_string(),
            r.sla_violation_pct.to_string(),
            r.consolidation_breaches.to_string(),
            r.placed_slices.to_string(),
            r.rejected_slices.to_string(),
            r.optimal.to_string(),
        ];
        for t in &r.tiers {
            rec.push(t.used.cpu_milli.to_string());
            rec.push(t.used.mem_mgib.to_string());
            rec.push(t.cpu_util_pct.to_string());
            rec.push(t.mem_util_pct.to_string());
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-cell means grouped by metric, followed by the speed-up table when
/// exact rows are present.
pub fn summary_text(rows: &[MetricsRow]) -> String {
    let mut cells: BTreeMap<(Algorithm, usize), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        cells.entry((r.algorithm, r.slice_count)).or_default().push(r);
    }
    let mut s = String::new();
    let section = |s: &mut String, title: &str, f: &dyn Fn(&MetricsRow) -> f64, prec: usize| {
        let _ = writeln!(s, "{title}");
        for ((a, n), cell) in &cells {
            let _ = writeln!(s, "  {:<18} {:>3} slices  {:.*}", a.name(), n, prec, mean(cell.iter().map(|r| f(r))));
        }
        s.push('\n');
    };
    section(&mut s, "mean cost ($/h)", &|r| r.cost_per_hour, 6);
    section(&mut s, "mean decision time (s)", &|r| r.decision_time_s, 9);
    section(&mut s, "mean SLA violation (%)", &|r| r.sla_violation_pct, 4);
    section(&mut s, "mean rejected slices", &|r| r.rejected_slices as f64, 4);
    let tiers: Vec<Tier> = rows.first().map(|r| r.tiers.iter().map(|t| t.tier).collect()).unwrap_or_default();
    for (i, t) in tiers.iter().enumerate() {
        section(&mut s, &format!("mean {} cpu utilisation (%)", t.name()), &|r| r.tiers[i].cpu_util_pct, 4);
        section(&mut s, &format!("mean {} memory utilisation (%)", t.name()), &|r| r.tiers[i].mem_util_pct, 4);
    }
    if let Ok(table) = speedup_table(rows) {
        let _ = writeln!(s, "speed-up over exact (sequential / one thread per agent)");
        for r in table {
            let bound = if r.lower_bound { " (lower bound)" } else { "" };
            let _ = writeln!(
                s,
                "  {:<18} {:>3} slices  {:.3}x / {:.3}x{bound}",
                r.algorithm.name(),
                r.slice_count,
                r.speedup,
                r.parallel_speedup
            );
        }
    }
    s
}

/// Writes `metrics.csv` and `summary.txt` into `dir`.
pub fn emit_report(rows: &[MetricsRow], dir: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Experiment("no rows to report".into()));
    }
    std::fs::create_dir_all(dir)?;
    let file = std::fs::File::create(dir.join("metrics.csv"))?;
    write_metrics_csv(rows, std::io::BufWriter::new(file))?;
    std::fs::write(dir.join("summary.txt"), summary_text(rows))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heuristic_spec() -> ExperimentSpec {
        ExperimentSpec {
            trials: 4,
            ..ExperimentSpec::new(vec![Algorithm::Exact, Algorithm::CostAware, Algorithm::PerformanceAware, Algorithm::Random])
        }
    }

    #[test]
    fn spec_toml() {
        let spec = ExperimentSpec::from_toml("algorithms = [\"exact\", \"marl\"]\ntrials = 3\n").unwrap();
        assert_eq!(spec.slice_counts, vec![5, 10, 15]);
        assert_eq!(spec.required_agents().len(), 3);
        assert_eq!(ExperimentSpec::from_toml(&spec.to_toml()).unwrap(), spec);
        assert!(ExperimentSpec::from_toml("algorithms = []\n").is_err());
        assert!(ExperimentSpec::from_toml("algorithms = [\"exact\"]\ntrials = 0\n").is_err());
        assert_eq!("ilp".parse::<Algorithm>().unwrap(), Algorithm::Exact);
    }

    #[test]
    fn rows_are_ordered_and_paired() {
        let spec = heuristic_spec();
        let rows = run_experiment(&spec, None, 3).unwrap();
        assert_eq!(rows.len(), 4 * 3 * 4);
        let serial = run_experiment(&spec, None, 1).unwrap();
        let key = |r: &MetricsRow| (r.algorithm, r.slice_count, r.trial, r.scenario_seed, r.cost_per_hour.to_bits());
        assert_eq!(rows.iter().map(key).collect::<Vec<_>>(), serial.iter().map(key).collect::<Vec<_>>());
        for (i, r) in rows.iter().enumerate() {
            let a = spec.algorithms[i / 12];
            assert_eq!(r.algorithm, a);
            // every algorithm sees the same scenario in a cell
            assert_eq!(r.scenario_seed, rows[i % 12].scenario_seed);
        }
        for pair in rows[12..24].iter().zip(&rows[24..36]) {
            assert!(pair.0.cost_per_hour <= pair.1.cost_per_hour);
        }
    }

    #[test]
    fn exact_rows_meet_mean_budgets() {
        let rows = run_experiment(&heuristic_spec(), None, 2).unwrap();
        for r in rows.iter().filter(|r| r.algorithm == Algorithm::Exact) {
            assert_eq!(r.rejected_slices, 0);
            assert_eq!(r.consolidation_breaches, 0);
            assert!(r.sla_violation_pct <= 100.0);
        }
    }

    #[test]
    fn utilisation_is_conserved() {
        for r in run_experiment(&heuristic_spec(), None, 2).unwrap() {
            let used: Resources = r.tiers.iter().map(|t| t.used).sum();
            assert_eq!(used, r.placed_demand);
            for t in &r.tiers {
                assert!(t.used.fits_within(&t.capacity));
                assert!((0.0..=100.0).contains(&t.cpu_util_pct));
            }
        }
    }

    #[test]
    fn speedups() {
        let rows = run_experiment(&heuristic_spec(), None, 1).unwrap();
        let table = speedup_table(&rows).unwrap();
        for r in table.iter().filter(|r| r.algorithm == Algorithm::Exact) {
            assert_eq!(r.speedup, 1.0);
        }
        let no_exact: Vec<MetricsRow> = rows.into_iter().filter(|r| r.algorithm != Algorithm::Exact).collect();
        assert!(speedup_table(&no_exact).is_err());
    }

    #[test]
    fn report_is_deterministic() {
        let rows = run_experiment(&heuristic_spec(), None, 2).unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        emit_report(&rows, a.path()).unwrap();
        emit_report(&rows, b.path()).unwrap();
        for f in ["metrics.csv", "summary.txt"] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        }
        assert!(emit_report(&[], a.path()).is_err());
        // hand-averaged cost column matches the summary
        let exact5: Vec<f64> =
            rows.iter().filter(|r| r.algorithm == Algorithm::Exact && r.slice_count == 5).map(|r| r.cost_per_hour).collect();
        let hand = exact5.iter().sum::<f64>() / exact5.len() as f64;
        let summary = std::fs::read_to_string(a.path().join("summary.txt")).unwrap();
        assert!(summary.contains(&format!("exact                5 slices  {hand:.6}")), "{summary}");
    }

    #[test]
    fn missing_agents_fail_up_front() {
        let spec = ExperimentSpec { trials: 1, ..ExperimentSpec::new(vec![Algorithm::Exact, Algorithm::Marl]) };
        assert!(matches!(run_experiment(&spec, None, 1), Err(Error::Experiment(_))));
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_bundle_for(&spec, dir.path()), Err(Error::MissingCheckpoint(_))));
    }
}
