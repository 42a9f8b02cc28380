//! One DQN agent per slice type plus a single-agent baseline: training on
//! generated queues, checkpoint bundles, and arrival-order placement.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraints::{partial_cost, Placement};
use crate::dqn::{argmax, checkpoint, AgentConfig, DqnAgent, OptimizerKind, QNetwork};
use crate::env_model::{default_catalog, derive_seed, Catalog, InfraId, Resources, Scenario, SliceRequest, SliceType};
use crate::error::{Error, Result};
use crate::exact::{slice_completion_exists, SolveResult};
use crate::mdp::{per_type_rewards, uniform_rewards, RewardParams, SliceEnv, StateEncoder, StateLayout, Step, Q_MAX};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentKind {
    Typed(SliceType),
    Monolithic,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [
        AgentKind::Typed(SliceType::Urllc),
        AgentKind::Typed(SliceType::Embb),
        AgentKind::Typed(SliceType::Mmtc),
        AgentKind::Monolithic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Typed(t) => t.tag(),
            AgentKind::Monolithic => "monolithic",
        }
    }

    fn salt(self) -> u64 {
        match self {
            AgentKind::Typed(t) => t.index() as u64,
            AgentKind::Monolithic => 3,
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("monolithic") || s.eq_ignore_ascii_case("mono") {
            return Ok(AgentKind::Monolithic);
        }
        Ok(AgentKind::Typed(s.parse()?))
    }
}

/// Default hyperparameters for `kind`.
pub fn default_config(kind: AgentKind, episodes: usize, seed: u64) -> AgentConfig {
    let (lr, width, layout) = match kind {
        AgentKind::Typed(SliceType::Embb) => (0.05, 128, StateLayout::new(3)),
        AgentKind::Typed(SliceType::Urllc) => (0.01, 128, StateLayout::new(3)),
        AgentKind::Typed(SliceType::Mmtc) => (0.005, 256, StateLayout::new(3)),
        AgentKind::Monolithic => (0.05, 128, StateLayout::monolithic(3)),
    };
    let reward_params = match kind {
        AgentKind::Typed(t) => RewardParams::for_type(t),
        // per-type delta3 applies at run time; the stored value is unused
        AgentKind::Monolithic => RewardParams::for_type(SliceType::Embb),
    };
    AgentConfig {
        batch_size: 32,
        buffer_capacity: 20_000,
        episodes,
        sync_interval: 1000,
        epsilon_decay: 25_000.0,
        epsilon_start: 1.0,
        epsilon_end: 0.05,
        learning_rate: lr,
        discount: 0.01,
        hidden_layers: vec![width; 3],
        optimizer: OptimizerKind::Sgd,
        grad_clip: Some(10.0),
        rng_seed: derive_seed(seed, kind.salt()),
        layout,
        reward_params,
    }
}

#[derive(Clone, Debug)]
pub struct TrainingOptions {
    pub catalog: Catalog,
    /// inclusive range of generated queue lengths
    pub queue_len: (usize, usize),
    pub checkpoint_dir: Option<PathBuf>,
    pub checkpoint_every: usize,
}

impl Default for TrainingOptions {
    fn default() -> Self {
        TrainingOptions { catalog: default_catalog(), queue_len: (1, Q_MAX), checkpoint_dir: None, checkpoint_every: 5000 }
    }
}

/// Scenario for one training episode: a type-homogeneous queue for a typed
/// agent, a mixed one for the monolithic agent.
pub fn training_scenario(catalog: &Catalog, kind: AgentKind, queue_len: (usize, usize), seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(queue_len.0..=queue_len.1);
    let types: Vec<SliceType> = match kind {
        AgentKind::Typed(t) => vec![t; n],
        AgentKind::Monolithic => (0..n).map(|_| catalog.draw_type(&mut rng)).collect(),
    };
    catalog.scenario_from_types(&types, seed)
}

fn rewards_for(kind: AgentKind, config: &AgentConfig) -> [RewardParams; 3] {
    match kind {
        AgentKind::Typed(_) => uniform_rewards(&config.reward_params),
        AgentKind::Monolithic => per_type_rewards(&config.reward_params),
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingReport {
    pub episode_rewards: Vec<f64>,
    /// mean loss per episode, NaN before training starts
    pub episode_losses: Vec<f64>,
    pub steps: u64,
    pub syncs: u64,
    /// requests seen in training, by `SliceType::index`
    pub types_seen: [usize; 3],
    pub checkpoints: Vec<PathBuf>,
}

/// One training step as seen from outside, for audits.
pub struct StepRecord<'a> {
    pub episode: usize,
    pub available_before: &'a [Resources],
    pub request: &'a SliceRequest,
    pub vnf: usize,
    /// the head slice's assignment before the step
    pub assignment_before: &'a [Option<InfraId>],
    pub step: &'a Step,
    pub scenario: &'a Scenario,
}

/// `episode,reward,mean_loss`, one line per episode; empty loss before
/// training starts.
pub fn training_curve_csv(report: &TrainingReport) -> String {
    let mut out = String::from("episode,reward,mean_loss\n");
    for (i, (r, l)) in report.episode_rewards.iter().zip(&report.episode_losses).enumerate() {
        let loss = if l.is_nan() { String::new() } else { l.to_string() };
        out.push_str(&format!("{},{r},{loss}\n", i + 1));
    }
    out
}

pub fn train_agent(kind: AgentKind, config: AgentConfig, options: &TrainingOptions) -> Result<(DqnAgent, TrainingReport)> {
    train_agent_with(kind, config, options, &mut |_| {})
}

pub fn train_agent_with(
    kind: AgentKind,
    config: AgentConfig,
    options: &TrainingOptions,
    observer: &mut dyn FnMut(&StepRecord<'_>),
) -> Result<(DqnAgent, TrainingReport)> {
    let filter = match kind {
        AgentKind::Typed(t) => Some(t),
        AgentKind::Monolithic => None,
    };
    let mut env = SliceEnv::new(config.layout, rewards_for(kind, &config));
    let episodes = config.episodes;
    let mut agent = DqnAgent::new(config)?;
    let mut report = TrainingReport::default();
    for ep in 0..episodes {
        let seed = derive_seed(agent.config().rng_seed, 1_000 + ep as u64);
        let scenario = training_scenario(&options.catalog, kind, options.queue_len, seed);
        for r in &scenario.requests {
            report.types_seen[r.slice_type.index()] += 1;
        }
        let mut state = env.reset(&scenario, filter)?.features;
        let (mut total, mut loss_sum, mut loss_n) = (0.0, 0.0, 0usize);
        while !env.is_done() {
            let action = agent.act(&state)?;
            let available_before = env.available().to_vec();
            let assignment_before = env.assignment().to_vec();
            let request = env.current_request().unwrap().clone();
            let vnf = env.current_vnf_index().unwrap();
            let step = env.step(action)?;
            observer(&StepRecord {
                episode: ep,
                available_before: &available_before,
                request: &request,
                vnf,
                assignment_before: &assignment_before,
                step: &step,
                scenario: &scenario,
            });
            total += step.transition.reward;
            state = step.transition.next_state.clone();
            if let Some(l) = agent.observe(step.transition)? {
                loss_sum += l;
                loss_n += 1;
            }
        }
        report.episode_rewards.push(total);
        report.episode_losses.push(if loss_n == 0 { f64::NAN } else { loss_sum / loss_n as f64 });
        if let Some(dir) = &options.checkpoint_dir {
            if options.checkpoint_every > 0 && (ep + 1) % options.checkpoint_every == 0 {
                let name = format!("{}-ep{}", kind.name(), ep + 1);
                checkpoint::save(dir, &name, agent.online(), agent.config())?;
                report.checkpoints.push(checkpoint::checkpoint_paths(dir, &name).0);
            }
        }
        if (ep + 1) % 1000 == 0 {
            let recent = &report.episode_rewards[report.episode_rewards.len().saturating_sub(1000)..];
            log::info!(
                "{kind}: episode {}/{episodes}, mean reward {:.2}, epsilon {:.3}",
                ep + 1,
                recent.iter().sum::<f64>() / recent.len() as f64,
                agent.epsilon()
            );
        }
    }
    report.steps = agent.steps();
    report.syncs = agent.syncs();
    Ok((agent, report))
}

/// Trains several agents, each on its own thread when `threads > 1`.
pub fn train_many(
    jobs: Vec<(AgentKind, AgentConfig)>,
    options: &TrainingOptions,
    threads: usize,
) -> Result<Vec<(AgentKind, DqnAgent, TrainingReport)>> {
    let run = |(kind, cfg): (AgentKind, AgentConfig)| train_agent(kind, cfg, options).map(|(a, r)| (kind, a, r));
    if threads <= 1 || jobs.len() <= 1 {
        return jobs.into_iter().map(run).collect();
    }
    let mut out = Vec::with_capacity(jobs.len());
    let mut pending = jobs.into_iter().peekable();
    while pending.peek().is_some() {
        let chunk: Vec<_> = pending.by_ref().take(threads).collect();
        let results: Vec<Result<_>> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk.into_iter().map(|job| s.spawn(move || run(job))).collect();
            handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
        });
        for r in results {
            out.push(r?);
        }
    }
    Ok(out)
}

/// Trained weights and the config they were trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub config: AgentConfig,
    pub net: QNetwork,
}

impl Policy {
    pub fn from_agent(agent: &DqnAgent) -> Self {
        Policy { config: agent.config().clone(), net: agent.online().clone() }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SchedulerBundle {
    pub agents: BTreeMap<SliceType, Policy>,
    pub monolithic: Option<Policy>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlacementMode {
    Disaggregated,
    Monolithic,
}

impl SchedulerBundle {
    pub fn insert(&mut self, kind: AgentKind, policy: Policy) {
        match kind {
            AgentKind::Typed(t) => {
                self.agents.insert(t, policy);
            }
            AgentKind::Monolithic => self.monolithic = Some(policy),
        }
    }

    pub fn get(&self, kind: AgentKind) -> Option<&Policy> {
        match kind {
            AgentKind::Typed(t) => self.agents.get(&t),
            AgentKind::Monolithic => self.monolithic.as_ref(),
        }
    }

    pub fn dispatch(&self, request: &SliceRequest) -> Result<&Policy> {
        self.agents.get(&request.slice_type).ok_or(Error::NoAgent(request.slice_type))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        for kind in AgentKind::ALL {
            if let Some(p) = self.get(kind) {
                checkpoint::save(dir, kind.name(), &p.net, &p.config)?;
            }
        }
        Ok(())
    }

    /// Loads the listed agents; every one of them must be present.
    pub fn load(dir: &Path, kinds: &[AgentKind]) -> Result<Self> {
        let mut bundle = SchedulerBundle::default();
        for &kind in kinds {
            let (net, config) = checkpoint::load(dir, kind.name())?;
            bundle.insert(kind, Policy { config, net });
        }
        Ok(bundle)
    }

    /// Loads whatever agents `dir` holds.
    pub fn load_available(dir: &Path) -> Result<Self> {
        let kinds: Vec<AgentKind> = AgentKind::ALL.into_iter().filter(|k| checkpoint::exists(dir, k.name())).collect();
        Self::load(dir, &kinds)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InferenceOptions {
    /// Restrict actions to those that leave a mean-latency and
    /// consolidation-feasible completion of the slice; falls back to
    /// capacity-only when nothing qualifies.
    pub sla_guard: bool,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        InferenceOptions { sla_guard: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarlResult {
    pub solve: SolveResult,
    /// decision time spent by each agent, keyed by agent
    pub agent_time: BTreeMap<AgentKind, Duration>,
    /// slowest agent's total, i.e. the wall time with one thread per agent
    pub parallel_time: Duration,
    /// (request type, agent used) per decision
    pub dispatch_log: Vec<(SliceType, AgentKind)>,
    pub forward_passes: u64,
}

/// Places every request of `scenario` in arrival order with the greedy
/// policy of the matching agent.
pub fn place_slices(bundle: &SchedulerBundle, scenario: &Scenario, mode: PlacementMode, options: InferenceOptions) -> Result<MarlResult> {
    let mut order: Vec<usize> = (0..scenario.requests.len()).collect();
    order.sort_by_key(|&s| (scenario.requests[s].arrival_index, s));
    // resolve agents before any work so a missing one fails fast
    let mut encoders: BTreeMap<AgentKind, StateEncoder> = BTreeMap::new();
    for &s in &order {
        let r = &scenario.requests[s];
        let (kind, policy) = match mode {
            PlacementMode::Disaggregated => (AgentKind::Typed(r.slice_type), bundle.dispatch(r)?),
            PlacementMode::Monolithic => (AgentKind::Monolithic, bundle.monolithic.as_ref().ok_or_else(|| Error::Config("no monolithic agent".into()))?),
        };
        if !encoders.contains_key(&kind) {
            if policy.config.layout.num_infras != scenario.num_infras() {
                return Err(Error::Config(format!("{kind} agent expects {} infrastructures", policy.config.layout.num_infras)));
            }
            encoders.insert(kind, StateEncoder::for_scenario(policy.config.layout, scenario)?);
        }
    }

    let m_count = scenario.num_infras();
    let mut available: Vec<Resources> = scenario.infrastructures.iter().map(|i| i.capacity).collect();
    let mut placement = Placement::empty(scenario);
    let mut rejected = Vec::new();
    let mut agent_time: BTreeMap<AgentKind, Duration> = BTreeMap::new();
    let mut dispatch_log = Vec::with_capacity(order.len());
    let mut forward_passes = 0u64;
    let mut nodes = 0u64;
    let mut cap_ok = vec![false; m_count];
    let mut sla_ok = vec![false; m_count];

    for (pos, &s) in order.iter().enumerate() {
        let request = &scenario.requests[s];
        let (kind, policy) = match mode {
            PlacementMode::Disaggregated => (AgentKind::Typed(request.slice_type), bundle.dispatch(request)?),
            PlacementMode::Monolithic => (AgentKind::Monolithic, bundle.monolithic.as_ref().unwrap()),
        };
        dispatch_log.push((request.slice_type, kind));
        let encoder = &encoders[&kind];
        let q_max = policy.config.layout.q_max;
        let queue: Vec<&SliceRequest> = order[pos..]
            .iter()
            .map(|&o| &scenario.requests[o])
            .filter(|r| mode == PlacementMode::Monolithic || r.slice_type == request.slice_type)
            .take(q_max)
            .collect();
        let mut assignment: Vec<Option<InfraId>> = vec![None; request.vnfs.len()];
        let mut spent = Duration::ZERO;
        let mut ok = true;
        for v in 0..request.vnfs.len() {
            let started = Instant::now();
            let demand = request.vnfs[v].demand;
            for m in 0..m_count {
                cap_ok[m] = demand.fits_within(&available[m]);
                sla_ok[m] = cap_ok[m]
                    && (!options.sla_guard || {
                        assignment[v] = Some(m);
                        available[m] -= demand;
                        let exists = slice_completion_exists(request, scenario, &available, &assignment);
                        available[m] += demand;
                        assignment[v] = None;
                        exists
                    });
            }
            let allowed = if sla_ok.iter().any(|&b| b) { &sla_ok } else { &cap_ok };
            let count = allowed.iter().filter(|&&b| b).count();
            let choice = match count {
                0 => None,
                1 => allowed.iter().position(|&b| b),
                _ => {
                    let state = encoder.encode(&available, &queue, v, Some(demand))?;
                    let q = policy.net.forward(&state.features)?;
                    forward_passes += 1;
                    let masked: Vec<f64> = q.iter().zip(allowed).map(|(&q, &a)| if a { q } else { f64::NEG_INFINITY }).collect();
                    Some(argmax(&masked))
                }
            };
            spent += started.elapsed();
            nodes += 1;
            match choice {
                Some(m) => {
                    available[m] -= demand;
                    assignment[v] = Some(m);
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        *agent_time.entry(kind).or_default() += spent;
        if ok {
            for (v, m) in assignment.iter().enumerate() {
                placement.assign(s, v, m.unwrap());
            }
        } else {
            log::info!("rejected slice {} ({}): no infrastructure fits", request.id, request.slice_type);
            for (v, m) in assignment.iter().enumerate() {
                if let Some(m) = *m {
                    available[m] += request.vnfs[v].demand;
                }
            }
            rejected.push(s);
        }
    }

    let total: Duration = agent_time.values().sum();
    let parallel_time = agent_time.values().copied().max().unwrap_or_default();
    let cost = partial_cost(&placement, scenario);
    Ok(MarlResult {
        solve: SolveResult { placement: Some(placement), rejected, cost, nodes_explored: nodes, wall_time: total, optimal: false },
        agent_time,
        parallel_time,
        dispatch_log,
        forward_passes,
    })
}
