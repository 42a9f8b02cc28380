//! Non-learning baselines. All of them respect infrastructure capacity and
//! none of them look at latency budgets or consolidation.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraints::{partial_cost, Placement};
use crate::env_model::{InfraId, Resources, Scenario};
use crate::exact::{cheapest_first, SolveResult};

/// Places VNFs one by one (slices in arrival order, VNFs in catalog order),
/// asking `choose` for an infrastructure among those that still fit the VNF.
/// Returns no placement as soon as a VNF fits nowhere.
fn greedy(scenario: &Scenario, mut choose: impl FnMut(&[InfraId], &Resources, &[Resources]) -> InfraId) -> SolveResult {
    let started = Instant::now();
    let mut used = vec![Resources::ZERO; scenario.num_infras()];
    let mut placement = Placement::empty(scenario);
    let mut candidates = Vec::with_capacity(scenario.num_infras());
    let mut decisions = 0u64;
    for (s, request) in scenario.requests.iter().enumerate() {
        for (v, vnf) in request.vnfs.iter().enumerate() {
            candidates.clear();
            candidates.extend(
                scenario
                    .infrastructures
                    .iter()
                    .filter(|i| (used[i.id] + vnf.demand).fits_within(&i.capacity))
                    .map(|i| i.id),
            );
            if candidates.is_empty() {
                return SolveResult::infeasible(decisions, started.elapsed(), true);
            }
            let m = choose(&candidates, &vnf.demand, &used);
            used[m] += vnf.demand;
            placement.assign(s, v, m);
            decisions += 1;
        }
    }
    let cost = partial_cost(&placement, scenario);
    SolveResult {
        placement: Some(placement),
        rejected: vec![],
        cost,
        nodes_explored: decisions,
        wall_time: started.elapsed(),
        optimal: false,
    }
}

fn first_in_order(order: &[InfraId], candidates: &[InfraId]) -> InfraId {
    *order.iter().find(|m| candidates.contains(m)).expect("candidates drawn from order")
}

/// Cheapest infrastructure with room, per VNF.
pub fn place_cost_aware(scenario: &Scenario) -> SolveResult {
    let order = cheapest_first(scenario);
    greedy(scenario, |c, _, _| first_in_order(&order, c))
}

/// Closest tier (edge first) with room, per VNF.
pub fn place_performance_aware(scenario: &Scenario) -> SolveResult {
    let mut order: Vec<InfraId> = (0..scenario.num_infras()).collect();
    order.sort_by_key(|&m| (scenario.infrastructures[m].tier, m));
    greedy(scenario, |c, _, _| first_in_order(&order, c))
}

/// Uniform choice among the infrastructures with room.
pub fn place_random<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> SolveResult {
    greedy(scenario, |c, _, _| c[rng.random_range(0..c.len())])
}

/// [`place_random`] with a ChaCha8 stream seeded by `seed`.
pub fn place_random_seeded(scenario: &Scenario, seed: u64) -> SolveResult {
    place_random(scenario, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Dominant-resource utilization of `m` once `demand` is added.
fn balance_score(scenario: &Scenario, m: InfraId, demand: &Resources, used: &[Resources]) -> f64 {
    let cap = scenario.infrastructures[m].capacity;
    let after = used[m] + *demand;
    (after.cpu_milli as f64 / cap.cpu_milli as f64).max(after.mem_mgib as f64 / cap.mem_mgib as f64)
}

/// Lowest post-placement utilization score, ties by index.
pub fn place_load_balance(scenario: &Scenario) -> SolveResult {
    greedy(scenario, |c, demand, used| {
        let mut best = c[0];
        let mut best_score = balance_score(scenario, best, demand, used);
        for &m in &c[1..] {
            let score = balance_score(scenario, m, demand, used);
            if score < best_score {
                best = m;
                best_score = score;
            }
        }
        best
    })
}
