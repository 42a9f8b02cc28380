//! Exact minimum-cost placement by branch and bound.
//!
//! Each slice is split into independent units: a consolidated slice is one
//! unit, otherwise the user-plane chain is one unit and every control-plane
//! VNF is a unit of its own. Each unit is expanded into its standalone-feasible
//! configurations (mean latency budget, consolidation, capacity), merged by
//! per-infrastructure usage keeping the cheapest and sorted by cost. The
//! search picks one configuration per unit in arrival order (slices in order,
//! VNFs in catalog order) under the shared capacity constraints, pruning when
//! the partial cost plus the cheapest configurations of the remaining units
//! reaches the incumbent, or when the remaining demand no longer fits the
//! free capacity. Units with identical demands and constraints are
//! interchangeable, so their configuration indices are forced to be
//! nondecreasing.

use std::collections::HashMap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::constraints::{is_feasible_quick, partial_cost, Placement};
use crate::env_model::{slice_total_demand, Cost, InfraId, Resources, Scenario, SliceRequest};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub placement: Option<Placement>,
    /// Scenario positions of slices left unplaced.
    pub rejected: Vec<usize>,
    pub cost: Cost,
    pub nodes_explored: u64,
    pub wall_time: Duration,
    /// False when a time limit cut the search short.
    pub optimal: bool,
}

impl SolveResult {
    pub fn infeasible(nodes_explored: u64, wall_time: Duration, optimal: bool) -> Self {
        SolveResult { placement: None, rejected: vec![], cost: Cost::ZERO, nodes_explored, wall_time, optimal }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ExactOptions {
    pub time_limit: Option<Duration>,
}

#[derive(Clone, Debug)]
struct SliceConfig {
    usage: Vec<Resources>,
    cost: Cost,
    assignment: Vec<InfraId>,
}

/// Infrastructure indices sorted by unit price, ties by index.
pub fn cheapest_first(scenario: &Scenario) -> Vec<InfraId> {
    let mut order: Vec<InfraId> = (0..scenario.num_infras()).collect();
    order.sort_by_key(|&m| (scenario.infrastructures[m].unit_cost_micro, m));
    order
}

/// Partial mean-latency bookkeeping along a slice's user-plane chain.
struct ChainTracker<'a> {
    /// chain position of each VNF
    pos: Vec<Option<usize>>,
    chain: Vec<usize>,
    scenario: &'a Scenario,
}

impl<'a> ChainTracker<'a> {
    fn new(request: &SliceRequest, scenario: &'a Scenario) -> Self {
        let chain = request.chain();
        let mut pos = vec![None; request.vnfs.len()];
        for (k, &v) in chain.iter().enumerate() {
            pos[v] = Some(k);
        }
        ChainTracker { pos, chain, scenario }
    }

    /// Latency added by assigning `vnf` to `m`, given the other assignments.
    fn added(&self, vnf: usize, m: InfraId, assignment: &[Option<InfraId>]) -> f64 {
        let Some(k) = self.pos[vnf] else { return 0.0 };
        let model = &self.scenario.latency_model;
        let mut add = 0.0;
        if k > 0 {
            if let Some(prev) = assignment[self.chain[k - 1]] {
                add += model.mean(prev, m);
            }
        }
        if k + 1 < self.chain.len() {
            if let Some(next) = assignment[self.chain[k + 1]] {
                add += model.mean(m, next);
            }
        } else {
            add += self.scenario.infrastructures[m].dn_latency_ms;
        }
        add
    }
}

/// Whether some completion of `assignment` (with `None` for open VNFs)
/// satisfies the slice's latency budget, consolidation rule and the given
/// available capacities. Open VNFs are tried in order.
pub fn slice_completion_exists(
    request: &SliceRequest,
    scenario: &Scenario,
    available: &[Resources],
    assignment: &[Option<InfraId>],
) -> bool {
    let tracker = ChainTracker::new(request, scenario);
    let mut assignment = assignment.to_vec();
    let mut latency = 0.0;
    let m_count = scenario.num_infras();
    // latency of fixed hops
    let chain = &tracker.chain;
    for w in chain.windows(2) {
        if let (Some(a), Some(b)) = (assignment[w[0]], assignment[w[1]]) {
            latency += scenario.latency_model.mean(a, b);
        }
    }
    if let Some(&last) = chain.last() {
        if let Some(m) = assignment[last] {
            latency += scenario.infrastructures[m].dn_latency_ms;
        }
    }
    if latency >= request.latency_budget_ms {
        return false;
    }
    let anchor = if request.consolidation_required { assignment.iter().flatten().next().copied() } else { None };
    if let Some(a) = anchor {
        if assignment.iter().flatten().any(|&m| m != a) {
            return false;
        }
    }
    let open: Vec<usize> = (0..assignment.len()).filter(|&v| assignment[v].is_none()).collect();
    let mut room = available.to_vec();
    fn go(
        i: usize,
        open: &[usize],
        request: &SliceRequest,
        tracker: &ChainTracker<'_>,
        assignment: &mut Vec<Option<InfraId>>,
        room: &mut [Resources],
        latency: f64,
        anchor: Option<InfraId>,
        m_count: usize,
    ) -> bool {
        if i == open.len() {
            return true;
        }
        let v = open[i];
        let demand = request.vnfs[v].demand;
        let tiers: Vec<InfraId> = match anchor {
            Some(a) => vec![a],
            None => (0..m_count).collect(),
        };
        for m in tiers {
            if !demand.fits_within(&room[m]) {
                continue;
            }
            let lat = latency + tracker.added(v, m, assignment);
            if lat >= request.latency_budget_ms {
                continue;
            }
            room[m] -= demand;
            assignment[v] = Some(m);
            let next_anchor = if request.consolidation_required { Some(m) } else { None };
            let ok = go(i + 1, open, request, tracker, assignment, room, lat, anchor.or(next_anchor), m_count);
            assignment[v] = None;
            room[m] += demand;
            if ok {
                return true;
            }
        }
        false
    }
    go(0, &open, request, &tracker, &mut assignment, &mut room, latency, anchor, m_count)
}

/// All standalone-feasible configurations of one unit, merged by usage and
/// sorted by cost (ties keep cheapest-tier-first enumeration order).
fn unit_configs(request: &SliceRequest, scenario: &Scenario, tier_order: &[InfraId]) -> Vec<SliceConfig> {
    let m_count = scenario.num_infras();
    let tracker = ChainTracker::new(request, scenario);
    let mut assignment: Vec<Option<InfraId>> = vec![None; request.vnfs.len()];
    let mut usage = vec![Resources::ZERO; m_count];
    let mut found: Vec<SliceConfig> = Vec::new();
    let mut index: HashMap<Vec<Resources>, usize> = HashMap::new();

    #[allow(clippy::too_many_arguments)]
    fn go(
        v: usize,
        request: &SliceRequest,
        scenario: &Scenario,
        tier_order: &[InfraId],
        tracker: &ChainTracker<'_>,
        assignment: &mut Vec<Option<InfraId>>,
        usage: &mut Vec<Resources>,
        latency: f64,
        found: &mut Vec<SliceConfig>,
        index: &mut HashMap<Vec<Resources>, usize>,
    ) {
        if v == request.vnfs.len() {
            let form = scenario.cost_form;
            let cost: Cost = request
                .vnfs
                .iter()
                .zip(assignment.iter())
                .map(|(vnf, m)| form.vnf_cost(scenario.infrastructures[m.unwrap()].unit_cost_micro, &vnf.demand))
                .sum();
            let config = SliceConfig {
                usage: usage.clone(),
                cost,
                assignment: assignment.iter().map(|m| m.unwrap()).collect(),
            };
            match index.get(usage) {
                Some(&i) if found[i].cost <= cost => {}
                Some(&i) => found[i] = config,
                None => {
                    index.insert(usage.clone(), found.len());
                    found.push(config);
                }
            }
            return;
        }
        let demand = request.vnfs[v].demand;
        for &m in tier_order {
            if request.consolidation_required && v > 0 && assignment[0] != Some(m) {
                continue;
            }
            let next = usage[m] + demand;
            if !next.fits_within(&scenario.infrastructures[m].capacity) {
                continue;
            }
            let lat = latency + tracker.added(v, m, assignment);
            if lat >= request.latency_budget_ms {
                continue;
            }
            usage[m] = next;
            assignment[v] = Some(m);
            go(v + 1, request, scenario, tier_order, tracker, assignment, usage, lat, found, index);
            assignment[v] = None;
            usage[m] -= demand;
        }
    }

    go(0, request, scenario, tier_order, &tracker, &mut assignment, &mut usage, 0.0, &mut found, &mut index);
    found.sort_by_key(|c| c.cost);
    found
}

/// A group of VNFs of one slice that is placed as a whole.
struct Unit {
    slice: usize,
    vnfs: Vec<usize>,
    /// the unit as a request of its own, for configuration enumeration
    request: SliceRequest,
}

#[derive(Clone, PartialEq)]
struct Signature {
    vnfs: Vec<(Resources, Option<usize>)>,
    budget_bits: Option<u64>,
    consolidation: bool,
}

fn signature(u: &Unit) -> Signature {
    let r = &u.request;
    let has_chain = r.vnfs.iter().any(|v| v.chain_index.is_some());
    Signature {
        vnfs: r.vnfs.iter().map(|v| (v.demand, v.chain_index)).collect(),
        budget_bits: has_chain.then(|| r.latency_budget_ms.to_bits()),
        consolidation: r.consolidation_required && r.vnfs.len() > 1,
    }
}

fn split_units(scenario: &Scenario) -> Vec<Unit> {
    let mut units = Vec::new();
    for (s, r) in scenario.requests.iter().enumerate() {
        let sub = |vnfs: Vec<usize>| Unit {
            slice: s,
            request: SliceRequest { vnfs: vnfs.iter().map(|&v| r.vnfs[v].clone()).collect(), ..r.clone() },
            vnfs,
        };
        if r.consolidation_required {
            units.push(sub((0..r.vnfs.len()).collect()));
            continue;
        }
        // control-plane VNFs alone, in catalog order, with the chain taking
        // the position of its first member
        let chain: Vec<usize> = (0..r.vnfs.len()).filter(|&v| r.vnfs[v].chain_index.is_some()).collect();
        for v in 0..r.vnfs.len() {
            if r.vnfs[v].chain_index.is_none() {
                units.push(sub(vec![v]));
            } else if chain[0] == v {
                units.push(sub(chain.clone()));
            }
        }
    }
    units
}

struct Search {
    configs: Vec<Rc<Vec<SliceConfig>>>,
    prev_same: Vec<Option<usize>>,
    trivial_suffix: Vec<u64>,
    demand_suffix: Vec<Resources>,
    remaining: Vec<Resources>,
    chosen: Vec<usize>,
    best_cost: u64,
    best: Option<Vec<usize>>,
    nodes: u64,
    ticks: u64,
    deadline: Option<Instant>,
    timed_out: bool,
}

impl Search {
    fn demand_fits(&self, k: usize) -> bool {
        let free: Resources = self.remaining.iter().copied().sum();
        self.demand_suffix[k].fits_within(&free)
    }

    fn dfs(&mut self, k: usize, partial: u64) {
        let n = self.configs.len();
        if k == n {
            if partial < self.best_cost {
                self.best_cost = partial;
                self.best = Some(self.chosen.clone());
            }
            return;
        }
        if let Some(deadline) = self.deadline {
            self.ticks += 1;
            if self.ticks % 1024 == 0 && Instant::now() >= deadline {
                self.timed_out = true;
            }
        }
        if self.timed_out {
            return;
        }
        let configs = Rc::clone(&self.configs[k]);
        let start = self.prev_same[k].map_or(0, |p| self.chosen[p]);
        for (ci, c) in configs.iter().enumerate().skip(start) {
            let after = partial + c.cost.0;
            if after.saturating_add(self.trivial_suffix[k + 1]) >= self.best_cost {
                break;
            }
            self.nodes += 1;
            if !c.usage.iter().zip(&self.remaining).all(|(u, r)| u.fits_within(r)) {
                continue;
            }
            for (r, u) in self.remaining.iter_mut().zip(&c.usage) {
                *r -= *u;
            }
            if self.demand_fits(k + 1) {
                self.chosen[k] = ci;
                self.dfs(k + 1, after);
            }
            for (r, u) in self.remaining.iter_mut().zip(&c.usage) {
                *r += *u;
            }
            if self.timed_out {
                return;
            }
        }
    }
}

pub fn solve_exact(scenario: &Scenario) -> SolveResult {
    solve_exact_with(scenario, &ExactOptions::default())
}

pub fn solve_exact_with(scenario: &Scenario, options: &ExactOptions) -> SolveResult {
    let started = Instant::now();
    let tier_order = cheapest_first(scenario);
    // a slice without user-plane VNFs has no latency to meet, but an
    // impossible budget still rejects it
    if scenario.requests.iter().any(|r| r.latency_budget_ms <= 0.0) {
        return SolveResult::infeasible(0, started.elapsed(), true);
    }
    let units = split_units(scenario);
    let n = units.len();

    let mut sigs: Vec<(Signature, Rc<Vec<SliceConfig>>)> = Vec::new();
    let mut configs = Vec::with_capacity(n);
    let mut sig_of = Vec::with_capacity(n);
    for u in &units {
        let sig = signature(u);
        let idx = match sigs.iter().position(|(s, _)| *s == sig) {
            Some(i) => i,
            None => {
                sigs.push((sig, Rc::new(unit_configs(&u.request, scenario, &tier_order))));
                sigs.len() - 1
            }
        };
        sig_of.push(idx);
        configs.push(Rc::clone(&sigs[idx].1));
    }
    if configs.iter().any(|c| c.is_empty()) {
        return SolveResult::infeasible(0, started.elapsed(), true);
    }
    let prev_same: Vec<Option<usize>> =
        (0..n).map(|k| (0..k).rev().find(|&j| sig_of[j] == sig_of[k])).collect();

    let mut trivial_suffix = vec![0u64; n + 1];
    let mut demand_suffix = vec![Resources::ZERO; n + 1];
    for k in (0..n).rev() {
        trivial_suffix[k] = trivial_suffix[k + 1] + configs[k][0].cost.0;
        demand_suffix[k] = demand_suffix[k + 1] + slice_total_demand(&units[k].request);
    }
    let capacity: Vec<Resources> = scenario.infrastructures.iter().map(|i| i.capacity).collect();

    let mut search = Search {
        configs,
        prev_same,
        trivial_suffix,
        demand_suffix,
        remaining: capacity,
        chosen: vec![0; n],
        best_cost: u64::MAX,
        best: None,
        nodes: 0,
        ticks: 0,
        deadline: options.time_limit.map(|t| started + t),
        timed_out: false,
    };

    if search.demand_fits(0) {
        search.dfs(0, 0);
    }
    let nodes = search.nodes;
    let optimal = !search.timed_out;
    let Some(chosen) = search.best.take() else {
        return SolveResult::infeasible(nodes, started.elapsed(), optimal);
    };
    let mut placement = Placement::empty(scenario);
    for (k, &ci) in chosen.iter().enumerate() {
        for (&v, &m) in units[k].vnfs.iter().zip(&search.configs[k][ci].assignment) {
            placement.assign(units[k].slice, v, m);
        }
    }
    let cost = partial_cost(&placement, scenario);
    debug_assert_eq!(cost.0, search.best_cost);
    SolveResult { placement: Some(placement), rejected: vec![], cost, nodes_explored: nodes, wall_time: started.elapsed(), optimal }
}

/// Number of nodes in the full per-VNF assignment tree, for comparison with
/// `SolveResult::nodes_explored`.
pub fn full_tree_nodes(scenario: &Scenario) -> u128 {
    let m = scenario.num_infras() as u128;
    let depth = scenario.num_vnfs() as u32;
    (1..=depth).map(|d| m.saturating_pow(d)).fold(0u128, u128::saturating_add)
}

/// Exhaustive enumeration of every assignment of every VNF to every
/// infrastructure. Used as a test oracle on small instances.
pub struct Enumeration<'a> {
    scenario: &'a Scenario,
    /// flattened (slice, vnf) positions
    positions: Vec<(usize, usize)>,
    digits: Vec<InfraId>,
    total: u128,
    emitted: u128,
}

pub fn enumerate_all(scenario: &Scenario, limit: u128) -> Result<Enumeration<'_>> {
    let positions: Vec<(usize, usize)> = scenario
        .requests
        .iter()
        .enumerate()
        .flat_map(|(s, r)| (0..r.vnfs.len()).map(move |v| (s, v)))
        .collect();
    let m = scenario.num_infras() as u128;
    let total = m.checked_pow(positions.len() as u32).unwrap_or(u128::MAX);
    if total > limit {
        return Err(Error::EnumerationLimit { size: total, limit });
    }
    Ok(Enumeration { scenario, digits: vec![0; positions.len()], positions, total, emitted: 0 })
}

impl Enumeration<'_> {
    pub fn total(&self) -> u128 {
        self.total
    }

    fn advance(&mut self) {
        let m = self.scenario.num_infras();
        for d in self.digits.iter_mut().rev() {
            *d += 1;
            if *d < m {
                return;
            }
            *d = 0;
        }
    }

    /// Visits every remaining assignment without allocating per entry.
    pub fn visit(mut self, mut f: impl FnMut(&Placement, Cost, bool)) {
        let mut placement = Placement::empty(self.scenario);
        while self.emitted < self.total {
            for (&(s, v), &m) in self.positions.iter().zip(&self.digits) {
                placement.assign(s, v, m);
            }
            let cost = partial_cost(&placement, self.scenario);
            f(&placement, cost, is_feasible_quick(&placement, self.scenario));
            self.emitted += 1;
            self.advance();
        }
    }

    /// Cheapest feasible assignment in enumeration order, if any.
    pub fn min_feasible(self) -> Option<(Placement, Cost)> {
        let mut best: Option<(Placement, Cost)> = None;
        self.visit(|p, c, ok| {
            if ok && best.as_ref().is_none_or(|(_, b)| c < *b) {
                best = Some((p.clone(), c));
            }
        });
        best
    }
}

impl Iterator for Enumeration<'_> {
    type Item = (Placement, Cost, bool);

    fn next(&mut self) -> Option<Self::Item> {
        if self.emitted >= self.total {
            return None;
        }
        let mut placement = Placement::empty(self.scenario);
        for (&(s, v), &m) in self.positions.iter().zip(&self.digits) {
            placement.assign(s, v, m);
        }
        let cost = partial_cost(&placement, self.scenario);
        let ok = is_feasible_quick(&placement, self.scenario);
        self.emitted += 1;
        self.advance();
        Some((placement, cost, ok))
    }
}
