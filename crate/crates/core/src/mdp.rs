//! Slice-wise MDP: an agent places the VNFs of a queue of slice requests one
//! VNF per step, choosing an infrastructure index as its action.

use serde::{Deserialize, Serialize};

use crate::constraints::slice_meets_sla;
use crate::env_model::{InfraId, Resources, Scenario, SliceRequest, SliceType};
use crate::error::{Error, Result};

pub const Q_MAX: usize = 16;
/// Latency budgets are divided by this before entering the state vector.
pub const SLA_SCALE_MS: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub delta1: f64,
    /// one entry per infrastructure, indexed like the scenario's infrastructures
    pub delta2: Vec<f64>,
    pub delta3: f64,
}

pub fn default_delta3(slice_type: SliceType) -> f64 {
    match slice_type {
        SliceType::Urllc => 20.0,
        SliceType::Embb => 15.0,
        SliceType::Mmtc => 10.0,
    }
}

impl RewardParams {
    pub fn for_type(slice_type: SliceType) -> Self {
        RewardParams { delta1: -100.0, delta2: vec![1.0, 2.0, 4.0], delta3: default_delta3(slice_type) }
    }

    pub fn validate(&self, num_infras: usize) -> Result<()> {
        if !(self.delta1 < 0.0) {
            return Err(Error::Config(format!("delta1 must be negative, got {}", self.delta1)));
        }
        if !(self.delta3 > 0.0) {
            return Err(Error::Config(format!("delta3 must be positive, got {}", self.delta3)));
        }
        if self.delta2.len() != num_infras {
            return Err(Error::Config(format!("delta2 has {} entries for {num_infras} infrastructures", self.delta2.len())));
        }
        Ok(())
    }
}

/// Rewards per slice type, indexed by `SliceType::index`.
pub type RewardTable = [RewardParams; 3];

/// The same parameters for every slice type.
pub fn uniform_rewards(params: &RewardParams) -> RewardTable {
    [params.clone(), params.clone(), params.clone()]
}

/// Shared δ₁/δ₂ from `params`, with each type's own default δ₃.
pub fn per_type_rewards(params: &RewardParams) -> RewardTable {
    SliceType::ALL.map(|t| RewardParams { delta3: default_delta3(t), ..params.clone() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateLayout {
    pub num_infras: usize,
    pub q_max: usize,
    /// append the (cpu, mem) demand of the VNF being placed
    pub include_current_vnf: bool,
    /// append a one-hot of the head slice's type (monolithic agent)
    pub type_onehot: bool,
}

impl StateLayout {
    pub fn new(num_infras: usize) -> Self {
        StateLayout { num_infras, q_max: Q_MAX, include_current_vnf: true, type_onehot: false }
    }

    pub fn monolithic(num_infras: usize) -> Self {
        StateLayout { type_onehot: true, ..Self::new(num_infras) }
    }

    pub fn width(&self) -> usize {
        2 * self.num_infras + 1 + 2 + self.q_max + if self.include_current_vnf { 2 } else { 0 } + if self.type_onehot { 3 } else { 0 }
    }
}

/// Raw state components alongside the normalized feature vector fed to the
/// network.
#[derive(Clone, Debug, PartialEq)]
pub struct MdpState {
    pub available: Vec<Resources>,
    pub queued_count: usize,
    /// demand of the queued slices not yet placed
    pub total_demand: Resources,
    /// budgets in ms, zero-padded to `q_max`
    pub sla_params: Vec<f64>,
    pub current_vnf: Option<Resources>,
    pub slice_type: Option<SliceType>,
    pub features: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct StateEncoder {
    layout: StateLayout,
    capacities: Vec<Resources>,
    aggregate: Resources,
    vnf_scale: Resources,
}

fn ratio(x: u64, of: u64) -> f64 {
    if of == 0 {
        0.0
    } else {
        x as f64 / of as f64
    }
}

impl StateEncoder {
    pub fn new(layout: StateLayout, capacities: Vec<Resources>) -> Result<Self> {
        if capacities.len() != layout.num_infras {
            return Err(Error::Config(format!(
                "state layout expects {} infrastructures, scenario has {}",
                layout.num_infras,
                capacities.len()
            )));
        }
        let aggregate = capacities.iter().copied().sum();
        let vnf_scale = Resources::new(
            capacities.iter().map(|c| c.cpu_milli).min().unwrap_or(0),
            capacities.iter().map(|c| c.mem_mgib).min().unwrap_or(0),
        );
        Ok(StateEncoder { layout, capacities, aggregate, vnf_scale })
    }

    pub fn for_scenario(layout: StateLayout, scenario: &Scenario) -> Result<Self> {
        Self::new(layout, scenario.infrastructures.iter().map(|i| i.capacity).collect())
    }

    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    /// Encodes the state for the head of `queue`, whose first `head_offset`
    /// VNFs are already placed.
    pub fn encode(
        &self,
        available: &[Resources],
        queue: &[&SliceRequest],
        head_offset: usize,
        current_vnf: Option<Resources>,
    ) -> Result<MdpState> {
        let q_max = self.layout.q_max;
        if queue.len() > q_max {
            return Err(Error::QueueTooLong { len: queue.len(), q_max });
        }
        let mut total_demand = Resources::ZERO;
        for (i, r) in queue.iter().enumerate() {
            let skip = if i == 0 { head_offset } else { 0 };
            total_demand += r.vnfs.iter().skip(skip).map(|v| v.demand).sum();
        }
        let mut sla_params = vec![0.0; q_max];
        for (slot, r) in sla_params.iter_mut().zip(queue) {
            *slot = r.latency_budget_ms;
        }
        let slice_type = queue.first().map(|r| r.slice_type);

        let mut f = Vec::with_capacity(self.layout.width());
        for (a, c) in available.iter().zip(&self.capacities) {
            f.push(ratio(a.cpu_milli, c.cpu_milli));
            f.push(ratio(a.mem_mgib, c.mem_mgib));
        }
        f.push(queue.len() as f64 / q_max as f64);
        f.push(ratio(total_demand.cpu_milli, self.aggregate.cpu_milli));
        f.push(ratio(total_demand.mem_mgib, self.aggregate.mem_mgib));
        f.extend(sla_params.iter().map(|l| l / SLA_SCALE_MS));
        if self.layout.include_current_vnf {
            let d = current_vnf.unwrap_or(Resources::ZERO);
            f.push(ratio(d.cpu_milli, self.vnf_scale.cpu_milli));
            f.push(ratio(d.mem_mgib, self.vnf_scale.mem_mgib));
        }
        if self.layout.type_onehot {
            let mut onehot = [0.0; 3];
            if let Some(t) = slice_type {
                onehot[t.index()] = 1.0;
            }
            f.extend(onehot);
        }
        debug_assert_eq!(f.len(), self.layout.width());
        Ok(MdpState {
            available: available.to_vec(),
            queued_count: queue.len(),
            total_demand,
            sla_params,
            current_vnf,
            slice_type,
            features: f,
        })
    }

    /// Recovers absolute availability from a feature vector.
    pub fn decode_available(&self, features: &[f64]) -> Vec<Resources> {
        self.capacities
            .iter()
            .enumerate()
            .map(|(m, c)| {
                Resources::new(
                    (features[2 * m] * c.cpu_milli as f64).round() as u64,
                    (features[2 * m + 1] * c.mem_mgib as f64).round() as u64,
                )
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepInfo {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    /// the VNF was placed on this step
    pub placed: bool,
    /// scenario index of a slice finished by this step
    pub completed_slice: Option<usize>,
    /// scenario index of a slice aborted after too many violations
    pub rejected_slice: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub transition: Transition,
    pub info: StepInfo,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SliceOutcome {
    Placed { slice: usize, assignment: Vec<InfraId>, sla_ok: bool },
    Rejected { slice: usize },
}

/// Episode dynamics over one queue. Availability starts at full capacity on
/// every reset.
pub struct SliceEnv {
    layout: StateLayout,
    rewards: RewardTable,
    scenario: Option<Scenario>,
    encoder: Option<StateEncoder>,
    available: Vec<Resources>,
    queue: Vec<usize>,
    head: usize,
    vnf: usize,
    retries: usize,
    assignment: Vec<Option<InfraId>>,
    outcomes: Vec<SliceOutcome>,
    state: Option<MdpState>,
    done: bool,
}

impl SliceEnv {
    pub fn new(layout: StateLayout, rewards: RewardTable) -> Self {
        SliceEnv {
            layout,
            rewards,
            scenario: None,
            encoder: None,
            available: vec![],
            queue: vec![],
            head: 0,
            vnf: 0,
            retries: 0,
            assignment: vec![],
            outcomes: vec![],
            state: None,
            done: true,
        }
    }

    /// Queues the scenario's requests of `slice_type` (all requests when
    /// `None`) in arrival order and restores full capacity.
    pub fn reset(&mut self, scenario: &Scenario, slice_type: Option<SliceType>) -> Result<MdpState> {
        for r in &self.rewards {
            r.validate(scenario.num_infras())?;
        }
        let encoder = StateEncoder::for_scenario(self.layout, scenario)?;
        let mut queue: Vec<usize> =
            (0..scenario.requests.len()).filter(|&s| slice_type.is_none_or(|t| scenario.requests[s].slice_type == t)).collect();
        queue.sort_by_key(|&s| (scenario.requests[s].arrival_index, s));
        if queue.len() > self.layout.q_max {
            return Err(Error::QueueTooLong { len: queue.len(), q_max: self.layout.q_max });
        }
        self.available = scenario.infrastructures.iter().map(|i| i.capacity).collect();
        self.queue = queue;
        self.scenario = Some(scenario.clone());
        self.encoder = Some(encoder);
        self.head = 0;
        self.vnf = 0;
        self.retries = 0;
        self.outcomes.clear();
        self.done = false;
        self.skip_empty_slices();
        self.state = Some(self.encode()?);
        Ok(self.state.clone().unwrap())
    }

    fn scenario(&self) -> &Scenario {
        self.scenario.as_ref().expect("reset before use")
    }

    fn skip_empty_slices(&mut self) {
        while self.head < self.queue.len() && self.scenario().requests[self.queue[self.head]].vnfs.is_empty() {
            self.outcomes.push(SliceOutcome::Placed { slice: self.queue[self.head], assignment: vec![], sla_ok: true });
            self.head += 1;
        }
        if self.head == self.queue.len() {
            self.done = true;
            self.assignment.clear();
        } else {
            self.assignment = vec![None; self.scenario().requests[self.queue[self.head]].vnfs.len()];
        }
    }

    fn encode(&self) -> Result<MdpState> {
        let sc = self.scenario();
        let queue: Vec<&SliceRequest> = self.queue[self.head..].iter().map(|&s| &sc.requests[s]).collect();
        let current = self.current_request().map(|r| r.vnfs[self.vnf].demand);
        self.encoder.as_ref().unwrap().encode(&self.available, &queue, self.vnf, current)
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn state(&self) -> Option<&MdpState> {
        self.state.as_ref()
    }

    pub fn available(&self) -> &[Resources] {
        &self.available
    }

    /// Request whose VNF is placed next.
    pub fn current_request(&self) -> Option<&SliceRequest> {
        if self.done {
            return None;
        }
        Some(&self.scenario().requests[self.queue[self.head]])
    }

    pub fn current_vnf_index(&self) -> Option<usize> {
        (!self.done).then_some(self.vnf)
    }

    /// Assignment of the head slice so far.
    pub fn assignment(&self) -> &[Option<InfraId>] {
        &self.assignment
    }

    pub fn outcomes(&self) -> &[SliceOutcome] {
        &self.outcomes
    }

    pub fn retry_cap(&self) -> usize {
        3 * self.layout.num_infras
    }

    pub fn step(&mut self, action: usize) -> Result<Step> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let m_count = self.layout.num_infras;
        if action >= m_count {
            return Err(Error::InvalidAction { action, m: m_count });
        }
        let state = self.state.take().expect("state present while running").features;
        let slice = self.queue[self.head];
        let (slice_type, demand, n_vnfs) = {
            let r = &self.scenario().requests[slice];
            (r.slice_type, r.vnfs[self.vnf].demand, r.vnfs.len())
        };
        let params = &self.rewards[slice_type.index()];
        let (delta1, delta2, delta3) = (params.delta1, params.delta2[action], params.delta3);
        let mut info = StepInfo::default();

        if demand.fits_within(&self.available[action]) {
            info.r2 = delta2;
            info.placed = true;
            self.available[action] -= demand;
            self.assignment[self.vnf] = Some(action);
            self.vnf += 1;
            self.retries = 0;
            if self.vnf == n_vnfs {
                let sla_ok = slice_meets_sla(&self.scenario().requests[slice], &self.assignment, self.scenario());
                if sla_ok {
                    info.r3 = delta3;
                }
                let assignment = self.assignment.iter().map(|m| m.unwrap()).collect();
                self.outcomes.push(SliceOutcome::Placed { slice, assignment, sla_ok });
                info.completed_slice = Some(slice);
                self.next_slice();
            }
        } else {
            info.r1 = delta1;
            self.retries += 1;
            if self.retries >= self.retry_cap() {
                // resources of the VNFs already placed stay consumed
                self.outcomes.push(SliceOutcome::Rejected { slice });
                info.rejected_slice = Some(slice);
                self.next_slice();
            }
        }
        let next = self.encode()?;
        let transition = Transition {
            state,
            action,
            reward: info.r1 + info.r2 + info.r3,
            next_state: next.features.clone(),
            done: self.done,
        };
        self.state = Some(next);
        Ok(Step { transition, info })
    }

    fn next_slice(&mut self) {
        self.head += 1;
        self.vnf = 0;
        self.retries = 0;
        self.skip_empty_slices();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_model::default_catalog;

    fn env() -> SliceEnv {
        SliceEnv::new(StateLayout::new(3), uniform_rewards(&RewardParams::for_type(SliceType::Mmtc)))
    }

    fn scenario(types: &[SliceType]) -> Scenario {
        default_catalog().scenario_from_types(types, 0)
    }

    #[test]
    fn fresh_state() {
        let sc = scenario(&[SliceType::Mmtc, SliceType::Mmtc]);
        let s = env().reset(&sc, Some(SliceType::Mmtc)).unwrap();
        assert_eq!(s.features.len(), 2 * 3 + 1 + 2 + Q_MAX + 2);
        assert!(s.features[..6].iter().all(|&x| x == 1.0));
        assert_eq!(s.queued_count, 2);
        assert_eq!(s.total_demand, Resources::new(10_600, 9_120));
        assert_eq!(&s.sla_params[..3], &[50.0, 50.0, 0.0]);
        assert!(s.sla_params[2..].iter().all(|&x| x == 0.0));
        assert_eq!(s.features[6], 2.0 / 16.0);
    }

    #[test]
    fn empty_queue() {
        let sc = scenario(&[SliceType::Embb]);
        let mut e = env();
        let s = e.reset(&sc, Some(SliceType::Mmtc)).unwrap();
        assert_eq!(s.queued_count, 0);
        assert_eq!(s.total_demand, Resources::ZERO);
        assert!(s.sla_params.iter().all(|&x| x == 0.0));
        assert!(e.is_done());
        assert!(matches!(e.step(0), Err(Error::EpisodeDone)));
    }

    #[test]
    fn du_at_edge_component() {
        let mut sc = scenario(&[SliceType::Embb]);
        sc.requests[0].vnfs.retain(|v| v.name == "DU");
        let mut e = env();
        e.reset(&sc, None).unwrap();
        let step = e.step(0).unwrap();
        assert_eq!(step.transition.next_state[0], 0.8125);
        assert!(step.transition.done);
    }

    #[test]
    fn filters_by_type_and_resets_identically() {
        use SliceType::*;
        let sc = scenario(&[Mmtc, Embb, Mmtc, Embb, Mmtc]);
        let mut e = env();
        let a = e.reset(&sc, Some(Mmtc)).unwrap();
        assert_eq!(a.queued_count, 3);
        e.step(2).unwrap();
        let b = e.reset(&sc, Some(Mmtc)).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            e.reset(&scenario(&[Mmtc; 17]), Some(Mmtc)),
            Err(Error::QueueTooLong { len: 17, q_max: 16 })
        ));
    }

    #[test]
    fn rewards_per_step() {
        let sc = scenario(&[SliceType::Urllc]);
        let mut e = SliceEnv::new(StateLayout::new(3), per_type_rewards(&RewardParams::for_type(SliceType::Urllc)));
        e.reset(&sc, None).unwrap();
        // control plane to central, user plane at edge: 5 ms < 10 ms
        for (i, m) in [2, 2, 2, 2, 0, 0, 0].into_iter().enumerate() {
            let s = e.step(m).unwrap();
            let expect = if m == 2 { 4.0 } else { 1.0 } + if i == 6 { 20.0 } else { 0.0 };
            assert_eq!(s.transition.reward, expect);
        }
        assert!(e.is_done());
        assert!(matches!(e.outcomes()[0], SliceOutcome::Placed { sla_ok: true, .. }));
    }

    #[test]
    fn violation_retry_and_abort() {
        let mut sc = scenario(&[SliceType::Embb]);
        sc.infrastructures[0].capacity = Resources::new(1000, 2000);
        let mut e = env();
        e.reset(&sc, None).unwrap();
        // NRF and UDR/UDM/AUSF fit on the shrunken edge (800 millicores), AMF does not
        for _ in 0..2 {
            assert!(e.step(0).unwrap().info.placed);
        }
        let before = e.available().to_vec();
        for k in 1..=9 {
            let s = e.step(0).unwrap();
            assert_eq!(s.transition.reward, -100.0);
            assert_eq!(s.info.r2, 0.0);
            assert_eq!(e.available(), &before[..]);
            if k < 9 {
                assert_eq!(e.current_vnf_index(), Some(2));
            } else {
                assert_eq!(s.info.rejected_slice, Some(0));
                assert!(s.transition.done);
            }
        }
        assert_eq!(e.outcomes(), &[SliceOutcome::Rejected { slice: 0 }]);
    }

    #[test]
    fn decode_round_trip_and_monotone() {
        let sc = scenario(&[SliceType::Embb, SliceType::Embb, SliceType::Embb]);
        let mut e = env();
        let mut state = e.reset(&sc, None).unwrap();
        let enc = StateEncoder::for_scenario(StateLayout::new(3), &sc).unwrap();
        let mut k = 0usize;
        while !e.is_done() {
            let s = e.step(k % 3).unwrap();
            k += 1;
            assert_eq!(enc.decode_available(&s.transition.next_state), e.available());
            for (a, b) in enc.decode_available(&s.transition.next_state).iter().zip(&state.available) {
                assert!(a.fits_within(b));
            }
            state = e.state().unwrap().clone();
        }
    }

    #[test]
    fn monolithic_layout_has_onehot() {
        let sc = scenario(&[SliceType::Embb]);
        let mut e = SliceEnv::new(StateLayout::monolithic(3), per_type_rewards(&RewardParams::for_type(SliceType::Embb)));
        let s = e.reset(&sc, None).unwrap();
        assert_eq!(s.features.len(), StateLayout::monolithic(3).width());
        assert_eq!(&s.features[s.features.len() - 3..], &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn reward_params_validate() {
        let mut p = RewardParams::for_type(SliceType::Embb);
        assert!(p.validate(3).is_ok());
        p.delta1 = 1.0;
        assert!(p.validate(3).is_err());
        let p = RewardParams { delta2: vec![1.0], ..RewardParams::for_type(SliceType::Embb) };
        assert!(p.validate(3).is_err());
    }
}
