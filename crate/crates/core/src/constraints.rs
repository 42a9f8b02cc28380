//! Feasibility checks and the placement cost objective. Every solver defers
//! to these functions for what counts as a valid placement.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::env_model::{Cost, InfraId, Resources, Scenario, SliceRequest};
use crate::error::{Error, Result};

/// Assignment of every VNF of every slice to an infrastructure, indexed by
/// the slice's position in the scenario and the VNF's position in the slice.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Placement {
    slots: Vec<Vec<Option<InfraId>>>,
}

impl Placement {
    pub fn empty(scenario: &Scenario) -> Self {
        Placement { slots: scenario.requests.iter().map(|r| vec![None; r.vnfs.len()]).collect() }
    }

    pub fn from_slots(slots: Vec<Vec<Option<InfraId>>>) -> Self {
        Placement { slots }
    }

    /// Every VNF of every slice on infrastructure `m`.
    pub fn uniform(scenario: &Scenario, m: InfraId) -> Self {
        Placement { slots: scenario.requests.iter().map(|r| vec![Some(m); r.vnfs.len()]).collect() }
    }

    pub fn assign(&mut self, slice: usize, vnf: usize, m: InfraId) {
        self.slots[slice][vnf] = Some(m);
    }

    pub fn unassign(&mut self, slice: usize, vnf: usize) {
        self.slots[slice][vnf] = None;
    }

    pub fn clear_slice(&mut self, slice: usize) {
        self.slots[slice].iter_mut().for_each(|s| *s = None);
    }

    pub fn get(&self, slice: usize, vnf: usize) -> Option<InfraId> {
        self.slots.get(slice).and_then(|s| s.get(vnf).copied().flatten())
    }

    pub fn slice(&self, slice: usize) -> &[Option<InfraId>] {
        &self.slots[slice]
    }

    pub fn slots(&self) -> &[Vec<Option<InfraId>>] {
        &self.slots
    }

    pub fn num_assigned(&self) -> usize {
        self.slots.iter().flatten().filter(|s| s.is_some()).count()
    }

    pub fn slice_is_placed(&self, slice: usize) -> bool {
        self.slots[slice].iter().all(Option::is_some)
    }

    fn matches(&self, scenario: &Scenario) -> bool {
        self.slots.len() == scenario.requests.len()
            && self.slots.iter().zip(&scenario.requests).all(|(s, r)| s.len() == r.vnfs.len())
    }

    fn first_gap(&self) -> Option<(usize, usize)> {
        self.slots
            .iter()
            .enumerate()
            .find_map(|(s, slots)| slots.iter().position(Option::is_none).map(|v| (s, v)))
    }

    fn require_complete(&self, scenario: &Scenario) -> Result<()> {
        if !self.matches(scenario) {
            return Err(Error::PlacementShape);
        }
        match self.first_gap() {
            Some((slice, vnf)) => Err(Error::IncompletePlacement { slice, vnf }),
            None => Ok(()),
        }
    }
}

/// Constraint families of the placement problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintId {
    Completeness,
    CpuCapacity,
    MemCapacity,
    Latency,
    Consolidation,
}

impl ConstraintId {
    pub fn number(self) -> u8 {
        match self {
            ConstraintId::Completeness => 1,
            ConstraintId::CpuCapacity => 2,
            ConstraintId::MemCapacity => 3,
            ConstraintId::Latency => 4,
            ConstraintId::Consolidation => 5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subject {
    Slice(u32),
    Infra(InfraId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Violation {
    pub constraint: ConstraintId,
    pub subject: Subject,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.subject {
            Subject::Slice(id) => write!(f, "c{}:slice{}", self.constraint.number(), id),
            Subject::Infra(m) => write!(f, "c{}:infra{}", self.constraint.number(), m),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeasibilityReport {
    pub complete: bool,
    pub capacity_ok: bool,
    pub latency_ok: bool,
    pub consolidation_ok: bool,
    pub violated: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.complete && self.capacity_ok && self.latency_ok && self.consolidation_ok
    }

    /// Violations joined by `;`, for CSV diagnostics.
    pub fn diagnostics(&self) -> String {
        self.violated.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
    }
}

pub fn check_complete(p: &Placement, scenario: &Scenario) -> bool {
    p.matches(scenario) && p.first_gap().is_none()
}

/// Resources consumed on each infrastructure by the assigned VNFs.
pub fn infra_usage(p: &Placement, scenario: &Scenario) -> Vec<Resources> {
    let mut used = vec![Resources::ZERO; scenario.num_infras()];
    for (slots, request) in p.slots.iter().zip(&scenario.requests) {
        for (slot, vnf) in slots.iter().zip(&request.vnfs) {
            if let Some(m) = *slot {
                used[m] += vnf.demand;
            }
        }
    }
    used
}

pub fn check_capacity(p: &Placement, scenario: &Scenario) -> Result<bool> {
    p.require_complete(scenario)?;
    Ok(infra_usage(p, scenario)
        .iter()
        .zip(&scenario.infrastructures)
        .all(|(used, infra)| used.fits_within(&infra.capacity)))
}

/// Sums hop latencies along the user-plane chain plus the data-network
/// latency of the last chain element's infrastructure. `hop` supplies the
/// latency for a pair of distinct infrastructures.
fn chain_latency(
    request: &SliceRequest,
    slots: &[Option<InfraId>],
    scenario: &Scenario,
    slice: usize,
    mut hop: impl FnMut(usize, InfraId, InfraId) -> f64,
) -> Result<f64> {
    let chain = request.chain();
    let mut tiers = Vec::with_capacity(chain.len());
    for &v in &chain {
        tiers.push(slots.get(v).copied().flatten().ok_or(Error::MissingUserPlane(slice))?);
    }
    let mut total = 0.0;
    for (h, pair) in tiers.windows(2).enumerate() {
        if pair[0] != pair[1] {
            total += hop(h, pair[0], pair[1]);
        }
    }
    if let Some(&last) = tiers.last() {
        total += scenario.infrastructures[last].dn_latency_ms;
    }
    Ok(total)
}

/// How link latencies are evaluated.
pub enum LatencyMode<'a, R: Rng + ?Sized> {
    /// Distribution means.
    Mean,
    /// One fresh draw per inter-infrastructure hop.
    Sampled(&'a mut R),
}

pub fn user_plane_latency<R: Rng + ?Sized>(
    p: &Placement,
    slice: usize,
    scenario: &Scenario,
    mode: LatencyMode<'_, R>,
) -> Result<f64> {
    let request = &scenario.requests[slice];
    let slots = p.slots.get(slice).ok_or(Error::PlacementShape)?;
    match mode {
        LatencyMode::Mean => chain_latency(request, slots, scenario, slice, |_, a, b| {
            scenario.latency_model.mean(a, b)
        }),
        LatencyMode::Sampled(rng) => {
            let model = &scenario.latency_model;
            chain_latency(request, slots, scenario, slice, |_, a, b| {
                let link = model.link(a, b).expect("validated latency model");
                if link.stddev_ms == 0.0 {
                    link.mean_ms.max(0.0)
                } else {
                    link.at(rng.sample(StandardNormal))
                }
            })
        }
    }
}

pub fn user_plane_latency_mean(p: &Placement, slice: usize, scenario: &Scenario) -> Result<f64> {
    user_plane_latency::<rand::rngs::ThreadRng>(p, slice, scenario, LatencyMode::Mean)
}

/// Latency with the standard-normal deviate for hop `h` taken from `z[h]`.
/// Lets paired comparisons share one set of draws across placements.
pub fn user_plane_latency_at(p: &Placement, slice: usize, scenario: &Scenario, z: &[f64]) -> Result<f64> {
    let request = &scenario.requests[slice];
    let slots = p.slots.get(slice).ok_or(Error::PlacementShape)?;
    let model = &scenario.latency_model;
    chain_latency(request, slots, scenario, slice, |h, a, b| {
        model.link(a, b).expect("validated latency model").at(z[h])
    })
}

/// Mean chain latency strictly below the slice's budget.
pub fn check_latency(p: &Placement, slice: usize, scenario: &Scenario) -> Result<bool> {
    Ok(user_plane_latency_mean(p, slice, scenario)? < scenario.requests[slice].latency_budget_ms)
}

/// All assigned VNFs share one infrastructure when the slice demands it.
pub fn check_consolidation(p: &Placement, slice: usize, request: &SliceRequest) -> bool {
    if !request.consolidation_required {
        return true;
    }
    let mut assigned = p.slots[slice].iter().flatten();
    match assigned.next() {
        Some(first) => assigned.all(|m| m == first),
        None => true,
    }
}

/// Cost of the assigned VNFs only; the total when the placement is complete.
/// Mean-latency and consolidation check for one slice's assignment, taken on
/// its own. Unassigned user-plane VNFs fail the check.
pub fn slice_meets_sla(request: &SliceRequest, slots: &[Option<InfraId>], scenario: &Scenario) -> bool {
    let consolidated = !request.consolidation_required || {
        let mut assigned = slots.iter().flatten();
        match assigned.next() {
            Some(first) => assigned.all(|m| m == first),
            None => true,
        }
    };
    consolidated
        && chain_latency(request, slots, scenario, 0, |_, a, b| scenario.latency_model.mean(a, b))
            .is_ok_and(|l| l < request.latency_budget_ms)
}

pub fn partial_cost(p: &Placement, scenario: &Scenario) -> Cost {
    let form = scenario.cost_form;
    p.slots
        .iter()
        .zip(&scenario.requests)
        .flat_map(|(slots, request)| slots.iter().zip(&request.vnfs))
        .filter_map(|(slot, vnf)| {
            slot.map(|m| form.vnf_cost(scenario.infrastructures[m].unit_cost_micro, &vnf.demand))
        })
        .sum()
}

pub fn placement_cost(p: &Placement, scenario: &Scenario) -> Result<Cost> {
    p.require_complete(scenario)?;
    Ok(partial_cost(p, scenario))
}

/// Evaluates every constraint and lists each violation. Slices whose user
/// plane is not fully assigned are reported under completeness only.
pub fn is_feasible(p: &Placement, scenario: &Scenario) -> FeasibilityReport {
    let mut violated = Vec::new();
    if !p.matches(scenario) {
        return FeasibilityReport {
            complete: false,
            capacity_ok: false,
            latency_ok: false,
            consolidation_ok: false,
            violated: vec![],
        };
    }
    let mut complete = true;
    for (s, request) in scenario.requests.iter().enumerate() {
        if !p.slice_is_placed(s) {
            complete = false;
            violated.push(Violation { constraint: ConstraintId::Completeness, subject: Subject::Slice(request.id) });
        }
    }
    let mut capacity_ok = true;
    for (m, (used, infra)) in infra_usage(p, scenario).iter().zip(&scenario.infrastructures).enumerate() {
        if used.cpu_milli > infra.capacity.cpu_milli {
            capacity_ok = false;
            violated.push(Violation { constraint: ConstraintId::CpuCapacity, subject: Subject::Infra(m) });
        }
        if used.mem_mgib > infra.capacity.mem_mgib {
            capacity_ok = false;
            violated.push(Violation { constraint: ConstraintId::MemCapacity, subject: Subject::Infra(m) });
        }
    }
    let mut latency_ok = true;
    let mut consolidation_ok = true;
    for (s, request) in scenario.requests.iter().enumerate() {
        if let Ok(ok) = check_latency(p, s, scenario) {
            if !ok {
                latency_ok = false;
                violated.push(Violation { constraint: ConstraintId::Latency, subject: Subject::Slice(request.id) });
            }
        }
        if !check_consolidation(p, s, request) {
            consolidation_ok = false;
            violated.push(Violation { constraint: ConstraintId::Consolidation, subject: Subject::Slice(request.id) });
        }
    }
    FeasibilityReport { complete, capacity_ok, latency_ok, consolidation_ok, violated }
}

/// Allocation-free feasibility check, equivalent to `is_feasible(..).feasible()`.
pub fn is_feasible_quick(p: &Placement, scenario: &Scenario) -> bool {
    if !check_complete(p, scenario) {
        return false;
    }
    let m_count = scenario.num_infras();
    let mut used = [Resources::ZERO; 8];
    let mut used_vec;
    let used: &mut [Resources] = if m_count <= 8 {
        &mut used[..m_count]
    } else {
        used_vec = vec![Resources::ZERO; m_count];
        &mut used_vec
    };
    for (slots, request) in p.slots.iter().zip(&scenario.requests) {
        for (slot, vnf) in slots.iter().zip(&request.vnfs) {
            used[slot.expect("complete")] += vnf.demand;
        }
    }
    if !used.iter().zip(&scenario.infrastructures).all(|(u, i)| u.fits_within(&i.capacity)) {
        return false;
    }
    (0..scenario.requests.len()).all(|s| {
        let request = &scenario.requests[s];
        check_consolidation(p, s, request) && check_latency(p, s, scenario).unwrap_or(false)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_model::{default_catalog, SliceType};

    const EDGE: usize = 0;
    const DIST: usize = 1;
    const CENTRAL: usize = 2;
    // catalog positions
    const NRF: usize = 0;
    const UPF: usize = 4;
    const CU: usize = 5;
    const DU: usize = 6;

    fn scenario(types: &[SliceType]) -> Scenario {
        default_catalog().scenario_from_types(types, 0)
    }

    fn chain(p: &mut Placement, s: usize, du: usize, cu: usize, upf: usize) {
        p.assign(s, DU, du);
        p.assign(s, CU, cu);
        p.assign(s, UPF, upf);
    }

    #[test]
    fn completeness() {
        let sc = scenario(&[SliceType::Embb; 2]);
        let mut p = Placement::uniform(&sc, CENTRAL);
        assert!(check_complete(&p, &sc));
        p.unassign(1, 3);
        assert!(!check_complete(&p, &sc));
        assert!(matches!(placement_cost(&p, &sc), Err(Error::IncompletePlacement { slice: 1, vnf: 3 })));
        assert!(matches!(check_capacity(&p, &sc), Err(Error::IncompletePlacement { .. })));

        let empty = scenario(&[]);
        assert!(check_complete(&Placement::empty(&empty), &empty));
        assert_eq!(placement_cost(&Placement::empty(&empty), &empty).unwrap(), Cost::ZERO);
    }

    #[test]
    fn capacity_edges() {
        let three = scenario(&[SliceType::Embb; 3]);
        assert!(check_capacity(&Placement::uniform(&three, EDGE), &three).unwrap());
        let four = scenario(&[SliceType::Embb; 4]);
        assert!(!check_capacity(&Placement::uniform(&four, EDGE), &four).unwrap());
        let twelve = scenario(&[SliceType::Mmtc; 12]);
        assert!(check_capacity(&Placement::uniform(&twelve, CENTRAL), &twelve).unwrap());
        let thirteen = scenario(&[SliceType::Mmtc; 13]);
        assert!(!check_capacity(&Placement::uniform(&thirteen, CENTRAL), &thirteen).unwrap());
    }

    #[test]
    fn chain_latency_means() {
        let sc = scenario(&[SliceType::Urllc]);
        let mut p = Placement::uniform(&sc, CENTRAL);
        chain(&mut p, 0, EDGE, EDGE, EDGE);
        assert_eq!(user_plane_latency_mean(&p, 0, &sc).unwrap(), 5.0);
        chain(&mut p, 0, EDGE, DIST, CENTRAL);
        assert_eq!(user_plane_latency_mean(&p, 0, &sc).unwrap(), 30.5);
        chain(&mut p, 0, DIST, DIST, DIST);
        assert_eq!(user_plane_latency_mean(&p, 0, &sc).unwrap(), 7.5);

        p.unassign(0, CU);
        assert!(matches!(user_plane_latency_mean(&p, 0, &sc), Err(Error::MissingUserPlane(0))));
    }

    #[test]
    fn control_plane_does_not_affect_latency() {
        let sc = scenario(&[SliceType::Urllc]);
        let mut p = Placement::uniform(&sc, EDGE);
        let base = user_plane_latency_mean(&p, 0, &sc).unwrap();
        p.assign(0, NRF, CENTRAL);
        assert_eq!(user_plane_latency_mean(&p, 0, &sc).unwrap(), base);
    }

    #[test]
    fn latency_budgets_are_strict() {
        let sc = scenario(&[SliceType::Urllc, SliceType::Mmtc]);
        let mut p = Placement::uniform(&sc, EDGE);
        assert!(check_latency(&p, 0, &sc).unwrap());
        chain(&mut p, 0, EDGE, DIST, CENTRAL);
        assert!(!check_latency(&p, 0, &sc).unwrap());
        chain(&mut p, 1, EDGE, DIST, CENTRAL);
        assert!(check_latency(&p, 1, &sc).unwrap());
        // all-central URLLC sits exactly at 10 ms
        let p = Placement::uniform(&sc, CENTRAL);
        assert_eq!(user_plane_latency_mean(&p, 0, &sc).unwrap(), 10.0);
        assert!(!check_latency(&p, 0, &sc).unwrap());
    }

    #[test]
    fn consolidation() {
        let sc = scenario(&[SliceType::Mmtc, SliceType::Embb]);
        let mut p = Placement::uniform(&sc, CENTRAL);
        assert!(check_consolidation(&p, 0, &sc.requests[0]));
        p.assign(0, NRF, EDGE);
        assert!(!check_consolidation(&p, 0, &sc.requests[0]));
        p.assign(1, NRF, EDGE);
        p.assign(1, DU, DIST);
        assert!(check_consolidation(&p, 1, &sc.requests[1]));
    }

    #[test]
    fn cost_values() {
        let mut sc = scenario(&[SliceType::Mmtc]);
        sc.requests[0].vnfs.truncate(1);
        let p = Placement::uniform(&sc, CENTRAL);
        assert_eq!(placement_cost(&p, &sc).unwrap().dollars_per_hour(), 1.92e-5);

        let sc = scenario(&[SliceType::Mmtc]);
        let p = Placement::uniform(&sc, CENTRAL);
        // sum of cpu*mem over the catalog is 7.2416 core-GiB
        assert_eq!(placement_cost(&p, &sc).unwrap(), Cost(7_241_600_000));
    }

    #[test]
    fn feasibility_reports() {
        let sc = scenario(&[SliceType::Mmtc; 12]);
        assert!(is_feasible(&Placement::uniform(&sc, CENTRAL), &sc).feasible());

        let sc = scenario(&[SliceType::Urllc, SliceType::Mmtc]);
        let r = is_feasible(&Placement::uniform(&sc, CENTRAL), &sc);
        assert!(!r.feasible() && !r.latency_ok && r.capacity_ok);
        assert_eq!(r.violated, vec![Violation { constraint: ConstraintId::Latency, subject: Subject::Slice(0) }]);

        let sc = scenario(&[SliceType::Mmtc; 4]);
        let r = is_feasible(&Placement::uniform(&sc, EDGE), &sc);
        assert!(!r.capacity_ok);
        assert!(r.violated.contains(&Violation { constraint: ConstraintId::CpuCapacity, subject: Subject::Infra(0) }));
        assert!(r.violated.contains(&Violation { constraint: ConstraintId::MemCapacity, subject: Subject::Infra(0) }));
    }

    #[test]
    fn sampled_latency_converges_to_mean() {
        use rand::SeedableRng;
        let sc = scenario(&[SliceType::Mmtc]);
        let mut p = Placement::uniform(&sc, CENTRAL);
        chain(&mut p, 0, EDGE, DIST, CENTRAL);
        let mean = user_plane_latency_mean(&p, 0, &sc).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| user_plane_latency(&p, 0, &sc, LatencyMode::Sampled(&mut rng)).unwrap())
            .collect();
        let avg = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - avg).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((avg - mean).abs() < 3.0 * se, "{avg} vs {mean} (se {se})");
    }
}
