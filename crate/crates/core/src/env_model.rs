//! Multi-cloud infrastructure, slice catalog, cost and latency models, and
//! scenario generation.
//!
//! Resource quantities are kept in fixed point (millicores and thousandths
//! of a GiB) and prices in micro-dollars, so capacity checks and costs are
//! exact integer arithmetic. Latencies stay in floating point milliseconds.

use std::fmt;
use std::ops::{Add, AddAssign, Sub, SubAssign};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type InfraId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SliceType {
    Urllc,
    Embb,
    Mmtc,
}

impl SliceType {
    pub const ALL: [SliceType; 3] = [SliceType::Urllc, SliceType::Embb, SliceType::Mmtc];

    pub fn index(self) -> usize {
        match self {
            SliceType::Urllc => 0,
            SliceType::Embb => 1,
            SliceType::Mmtc => 2,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            SliceType::Urllc => "urllc",
            SliceType::Embb => "embb",
            SliceType::Mmtc => "mmtc",
        }
    }
}

impl fmt::Display for SliceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SliceType::Urllc => "URLLC",
            SliceType::Embb => "eMBB",
            SliceType::Mmtc => "mMTC",
        })
    }
}

impl FromStr for SliceType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "urllc" => Ok(SliceType::Urllc),
            "embb" => Ok(SliceType::Embb),
            "mmtc" => Ok(SliceType::Mmtc),
            other => Err(Error::Config(format!("unknown slice type '{other}'"))),
        }
    }
}

/// CPU and memory amount in fixed point: millicores and milli-GiB.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Resources {
    pub cpu_milli: u64,
    pub mem_mgib: u64,
}

impl Resources {
    pub const ZERO: Resources = Resources { cpu_milli: 0, mem_mgib: 0 };

    pub const fn new(cpu_milli: u64, mem_mgib: u64) -> Self {
        Resources { cpu_milli, mem_mgib }
    }

    /// Converts cores and GiB to fixed point, rounding to the nearest unit.
    pub fn from_units(cpu_cores: f64, mem_gib: f64) -> Result<Self> {
        Ok(Resources {
            cpu_milli: to_milli(cpu_cores, "cpu")?,
            mem_mgib: to_milli(mem_gib, "mem")?,
        })
    }

    pub fn cpu_cores(&self) -> f64 {
        self.cpu_milli as f64 / 1000.0
    }

    pub fn mem_gib(&self) -> f64 {
        self.mem_mgib as f64 / 1000.0
    }

    pub fn fits_within(&self, capacity: &Resources) -> bool {
        self.cpu_milli <= capacity.cpu_milli && self.mem_mgib <= capacity.mem_mgib
    }

    pub fn checked_sub(&self, other: &Resources) -> Option<Resources> {
        Some(Resources {
            cpu_milli: self.cpu_milli.checked_sub(other.cpu_milli)?,
            mem_mgib: self.mem_mgib.checked_sub(other.mem_mgib)?,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.cpu_milli == 0 && self.mem_mgib == 0
    }
}

fn to_milli(value: f64, what: &str) -> Result<u64> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::Config(format!("{what} amount must be a nonnegative number, got {value}")));
    }
    Ok((value * 1000.0).round() as u64)
}

impl Add for Resources {
    type Output = Resources;
    fn add(self, rhs: Resources) -> Resources {
        Resources::new(self.cpu_milli + rhs.cpu_milli, self.mem_mgib + rhs.mem_mgib)
    }
}

impl AddAssign for Resources {
    fn add_assign(&mut self, rhs: Resources) {
        self.cpu_milli += rhs.cpu_milli;
        self.mem_mgib += rhs.mem_mgib;
    }
}

impl Sub for Resources {
    type Output = Resources;
    fn sub(self, rhs: Resources) -> Resources {
        Resources::new(self.cpu_milli - rhs.cpu_milli, self.mem_mgib - rhs.mem_mgib)
    }
}

impl SubAssign for Resources {
    fn sub_assign(&mut self, rhs: Resources) {
        self.cpu_milli -= rhs.cpu_milli;
        self.mem_mgib -= rhs.mem_mgib;
    }
}

impl std::iter::Sum for Resources {
    fn sum<I: Iterator<Item = Resources>>(iter: I) -> Resources {
        iter.fold(Resources::ZERO, |a, b| a + b)
    }
}

/// Hourly cost in pico-dollars. Micro-dollar prices times millicores times
/// milli-GiB land exactly on this unit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cost(pub u64);

impl Cost {
    pub const ZERO: Cost = Cost(0);
    pub const PICO_PER_DOLLAR: f64 = 1e12;

    pub fn dollars_per_hour(self) -> f64 {
        self.0 as f64 / Self::PICO_PER_DOLLAR
    }
}

impl Add for Cost {
    type Output = Cost;
    fn add(self, rhs: Cost) -> Cost {
        Cost(self.0 + rhs.0)
    }
}

impl AddAssign for Cost {
    fn add_assign(&mut self, rhs: Cost) {
        self.0 += rhs.0;
    }
}

impl std::iter::Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        iter.fold(Cost::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.dollars_per_hour())
    }
}

/// How a VNF's demand is turned into an hourly charge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostForm {
    /// `price * cpu * mem`
    #[default]
    Product,
    /// `price * (cpu + mem)`
    WeightedSum,
}

impl CostForm {
    pub fn vnf_cost(self, unit_cost_micro: u64, demand: &Resources) -> Cost {
        match self {
            CostForm::Product => Cost(unit_cost_micro * demand.cpu_milli * demand.mem_mgib),
            CostForm::WeightedSum => Cost(unit_cost_micro * (demand.cpu_milli + demand.mem_mgib) * 1000),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Edge,
    Distributed,
    Central,
}

impl Tier {
    pub fn name(self) -> &'static str {
        match self {
            Tier::Edge => "edge",
            Tier::Distributed => "distributed",
            Tier::Central => "central",
        }
    }
}

impl FromStr for Tier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "edge" => Ok(Tier::Edge),
            "distributed" => Ok(Tier::Distributed),
            "central" => Ok(Tier::Central),
            other => Err(Error::Config(format!("unknown tier '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plane {
    User,
    Control,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VnfSpec {
    pub name: String,
    pub plane: Plane,
    pub demand: Resources,
    /// Position in the user-plane chain, DU = 0. `None` for control plane.
    pub chain_index: Option<usize>,
}

impl VnfSpec {
    pub fn control(name: &str, cpu_milli: u64, mem_mgib: u64) -> Self {
        VnfSpec {
            name: name.to_string(),
            plane: Plane::Control,
            demand: Resources::new(cpu_milli, mem_mgib),
            chain_index: None,
        }
    }

    pub fn user(name: &str, cpu_milli: u64, mem_mgib: u64, chain_index: usize) -> Self {
        VnfSpec {
            name: name.to_string(),
            plane: Plane::User,
            demand: Resources::new(cpu_milli, mem_mgib),
            chain_index: Some(chain_index),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Infrastructure {
    pub id: InfraId,
    pub tier: Tier,
    pub capacity: Resources,
    /// Hourly price per core-GiB, in micro-dollars.
    pub unit_cost_micro: u64,
    pub dn_latency_ms: f64,
}

impl Infrastructure {
    pub fn unit_cost(&self) -> f64 {
        self.unit_cost_micro as f64 / 1e6
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkLatency {
    pub mean_ms: f64,
    pub stddev_ms: f64,
}

impl LinkLatency {
    pub const ZERO: LinkLatency = LinkLatency { mean_ms: 0.0, stddev_ms: 0.0 };

    /// Latency at standard-normal deviate `z`, clamped at zero.
    pub fn at(&self, z: f64) -> f64 {
        (self.mean_ms + self.stddev_ms * z).max(0.0)
    }
}

/// Symmetric pairwise link latency with a zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct LatencyModel {
    size: usize,
    pairs: Vec<Option<LinkLatency>>,
}

impl LatencyModel {
    /// Builds the model from explicit `(a, b, latency)` entries. Pairs that are
    /// not given are composed through an intermediate infrastructure: means
    /// add and variances add. Pairs that still cannot be resolved are left
    /// unknown.
    pub fn from_pairs(size: usize, entries: &[(InfraId, InfraId, LinkLatency)]) -> Result<Self> {
        let mut pairs = vec![None; size * size];
        for m in 0..size {
            pairs[m * size + m] = Some(LinkLatency::ZERO);
        }
        for &(a, b, link) in entries {
            if a >= size || b >= size {
                return Err(Error::UnknownLinkPair(a, b));
            }
            if a == b {
                return Err(Error::Config(format!("diagonal latency entry ({a}, {a}) must be omitted")));
            }
            if !(link.mean_ms >= 0.0 && link.stddev_ms >= 0.0) {
                return Err(Error::Config(format!("negative latency for pair ({a}, {b})")));
            }
            pairs[a * size + b] = Some(link);
            pairs[b * size + a] = Some(link);
        }
        let mut model = LatencyModel { size, pairs };
        model.compose_missing();
        Ok(model)
    }

    fn compose_missing(&mut self) {
        let n = self.size;
        loop {
            let mut added = false;
            for a in 0..n {
                for c in (a + 1)..n {
                    if self.pairs[a * n + c].is_some() {
                        continue;
                    }
                    let via = (0..n).filter(|&b| b != a && b != c).find_map(|b| {
                        let ab = self.pairs[a * n + b]?;
                        let bc = self.pairs[b * n + c]?;
                        Some(LinkLatency {
                            mean_ms: ab.mean_ms + bc.mean_ms,
                            stddev_ms: (ab.stddev_ms.powi(2) + bc.stddev_ms.powi(2)).sqrt(),
                        })
                    });
                    if let Some(link) = via {
                        self.pairs[a * n + c] = Some(link);
                        self.pairs[c * n + a] = Some(link);
                        added = true;
                    }
                }
            }
            if !added {
                break;
            }
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn link(&self, a: InfraId, b: InfraId) -> Result<LinkLatency> {
        if a >= self.size || b >= self.size {
            return Err(Error::UnknownLinkPair(a, b));
        }
        self.pairs[a * self.size + b].ok_or(Error::UnknownLinkPair(a, b))
    }

    /// Mean latency; panics on pairs that `is_complete` would reject.
    pub fn mean(&self, a: InfraId, b: InfraId) -> f64 {
        self.pairs[a * self.size + b].expect("latency pair resolved").mean_ms
    }

    pub fn is_complete(&self) -> bool {
        self.pairs.iter().all(Option::is_some)
    }
}

/// One Gaussian link-latency draw, clamped at zero.
pub fn sample_link_latency<R: Rng + ?Sized>(
    model: &LatencyModel,
    a: InfraId,
    b: InfraId,
    rng: &mut R,
) -> Result<f64> {
    let link = model.link(a, b)?;
    if link.stddev_ms == 0.0 {
        return Ok(link.mean_ms.max(0.0));
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok(link.at(z))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceRequest {
    pub id: u32,
    pub slice_type: SliceType,
    pub vnfs: Vec<VnfSpec>,
    pub latency_budget_ms: f64,
    pub consolidation_required: bool,
    pub arrival_index: usize,
}

impl SliceRequest {
    /// Indices into `vnfs` of the user-plane chain, DU first.
    pub fn chain(&self) -> Vec<usize> {
        let mut chain: Vec<(usize, usize)> = self
            .vnfs
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.chain_index.map(|c| (c, i)))
            .collect();
        chain.sort_unstable();
        chain.into_iter().map(|(_, i)| i).collect()
    }
}

pub fn slice_total_demand(request: &SliceRequest) -> Resources {
    request.vnfs.iter().map(|v| v.demand).sum()
}

/// Per-slice-type settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceProfile {
    pub latency_budget_ms: f64,
    pub consolidation_required: bool,
    pub arrival_probability: f64,
}

/// The infrastructure, VNF catalog and latency model a scenario is built from.
#[derive(Clone, Debug, PartialEq)]
pub struct Catalog {
    pub infrastructures: Vec<Infrastructure>,
    pub vnfs: Vec<VnfSpec>,
    pub latency_model: LatencyModel,
    /// Indexed by `SliceType::index`.
    pub profiles: [SliceProfile; 3],
    pub cost_form: CostForm,
}

/// Three-tier reference configuration: edge, distributed and central clouds
/// with the seven-VNF slice catalog.
pub fn default_catalog() -> Catalog {
    let infrastructures = vec![
        Infrastructure {
            id: 0,
            tier: Tier::Edge,
            capacity: Resources::new(16_000, 16_000),
            unit_cost_micro: 10_000,
            dn_latency_ms: 5.0,
        },
        Infrastructure {
            id: 1,
            tier: Tier::Distributed,
            capacity: Resources::new(32_000, 32_000),
            unit_cost_micro: 5_000,
            dn_latency_ms: 7.5,
        },
        Infrastructure {
            id: 2,
            tier: Tier::Central,
            capacity: Resources::new(64_000, 64_000),
            unit_cost_micro: 1_000,
            dn_latency_ms: 10.0,
        },
    ];
    let vnfs = vec![
        VnfSpec::control("NRF", 150, 128),
        VnfSpec::control("UDR/UDM/AUSF", 650, 896),
        VnfSpec::control("AMF", 250, 256),
        VnfSpec::control("SMF", 250, 256),
        VnfSpec::user("UPF", 500, 512, 2),
        VnfSpec::user("CU", 500, 512, 1),
        VnfSpec::user("DU", 3000, 2000, 0),
    ];
    let latency_model = LatencyModel::from_pairs(
        3,
        &[
            (0, 1, LinkLatency { mean_ms: 0.5, stddev_ms: 0.1 }),
            (1, 2, LinkLatency { mean_ms: 20.0, stddev_ms: 1.0 }),
        ],
    )
    .expect("default latency pairs are valid");
    let profiles = [
        SliceProfile { latency_budget_ms: 10.0, consolidation_required: false, arrival_probability: 0.2 },
        SliceProfile { latency_budget_ms: 20.0, consolidation_required: false, arrival_probability: 0.3 },
        SliceProfile { latency_budget_ms: 50.0, consolidation_required: true, arrival_probability: 0.5 },
    ];
    Catalog { infrastructures, vnfs, latency_model, profiles, cost_form: CostForm::Product }
}

impl Catalog {
    pub fn profile(&self, slice_type: SliceType) -> &SliceProfile {
        &self.profiles[slice_type.index()]
    }

    pub fn request(&self, id: u32, slice_type: SliceType, arrival_index: usize) -> SliceRequest {
        let profile = self.profile(slice_type);
        SliceRequest {
            id,
            slice_type,
            vnfs: self.vnfs.clone(),
            latency_budget_ms: profile.latency_budget_ms,
            consolidation_required: profile.consolidation_required,
            arrival_index,
        }
    }

    /// Draws one slice type from the arrival distribution.
    pub fn draw_type<R: Rng + ?Sized>(&self, rng: &mut R) -> SliceType {
        let total: f64 = self.profiles.iter().map(|p| p.arrival_probability).sum();
        let mut u = rng.random::<f64>() * total;
        for t in SliceType::ALL {
            u -= self.profile(t).arrival_probability;
            if u < 0.0 {
                return t;
            }
        }
        SliceType::Mmtc
    }

    /// Scenario with `n_slices` requests whose types are drawn i.i.d. from the
    /// catalog's arrival distribution. Pure function of `(n_slices, seed)`.
    pub fn generate(&self, n_slices: usize, seed: u64) -> Scenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let types: Vec<SliceType> = (0..n_slices).map(|_| self.draw_type(&mut rng)).collect();
        self.scenario_from_types(&types, seed)
    }

    pub fn scenario_from_types(&self, types: &[SliceType], seed: u64) -> Scenario {
        let requests = types
            .iter()
            .enumerate()
            .map(|(i, &t)| self.request(i as u32, t, i))
            .collect();
        Scenario {
            infrastructures: self.infrastructures.clone(),
            latency_model: self.latency_model.clone(),
            requests,
            rng_seed: seed,
            cost_form: self.cost_form,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_infrastructures(&self.infrastructures, &self.latency_model)?;
        validate_vnfs(&self.vnfs)?;
        for t in SliceType::ALL {
            let p = self.profile(t);
            if !(p.latency_budget_ms > 0.0) {
                return Err(Error::Config(format!("latency budget for {t} must be positive")));
            }
            if !(p.arrival_probability >= 0.0) {
                return Err(Error::Config(format!("arrival probability for {t} must be nonnegative")));
            }
        }
        Ok(())
    }
}

fn validate_infrastructures(infras: &[Infrastructure], latency: &LatencyModel) -> Result<()> {
    if infras.is_empty() {
        return Err(Error::Config("at least one infrastructure is required".into()));
    }
    for (i, infra) in infras.iter().enumerate() {
        if infra.id != i {
            return Err(Error::Config(format!("infrastructure {i} carries id {}", infra.id)));
        }
        if infra.capacity.cpu_milli == 0 || infra.capacity.mem_mgib == 0 {
            return Err(Error::Config(format!("infrastructure {i} needs positive capacity")));
        }
        if !(infra.dn_latency_ms >= 0.0) {
            return Err(Error::Config(format!("infrastructure {i} has a negative DN latency")));
        }
    }
    if latency.size() != infras.len() {
        return Err(Error::Config("latency model size does not match infrastructures".into()));
    }
    if !latency.is_complete() {
        return Err(Error::Config("latency model leaves some infrastructure pairs unresolved".into()));
    }
    Ok(())
}

fn validate_vnfs(vnfs: &[VnfSpec]) -> Result<()> {
    if vnfs.is_empty() {
        return Err(Error::Config("VNF catalog is empty".into()));
    }
    let mut chain: Vec<usize> = Vec::new();
    for v in vnfs {
        if v.demand.cpu_milli == 0 || v.demand.mem_mgib == 0 {
            return Err(Error::Config(format!("VNF {} needs positive demand", v.name)));
        }
        match (v.plane, v.chain_index) {
            (Plane::User, Some(c)) => chain.push(c),
            (Plane::Control, None) => {}
            _ => return Err(Error::Config(format!("VNF {} has inconsistent plane and chain index", v.name))),
        }
    }
    chain.sort_unstable();
    if chain.iter().enumerate().any(|(i, &c)| i != c) {
        return Err(Error::Config("user-plane chain indices must be contiguous from 0".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub infrastructures: Vec<Infrastructure>,
    pub latency_model: LatencyModel,
    /// Arrival order.
    pub requests: Vec<SliceRequest>,
    pub rng_seed: u64,
    pub cost_form: CostForm,
}

impl Scenario {
    pub fn num_infras(&self) -> usize {
        self.infrastructures.len()
    }

    pub fn total_demand(&self) -> Resources {
        self.requests.iter().map(slice_total_demand).sum()
    }

    pub fn total_capacity(&self) -> Resources {
        self.infrastructures.iter().map(|i| i.capacity).sum()
    }

    pub fn num_vnfs(&self) -> usize {
        self.requests.iter().map(|r| r.vnfs.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        validate_infrastructures(&self.infrastructures, &self.latency_model)?;
        for r in &self.requests {
            validate_vnfs(&r.vnfs)?;
            if !(r.latency_budget_ms > 0.0) {
                return Err(Error::Config(format!("slice {} needs a positive latency budget", r.id)));
            }
        }
        Ok(())
    }
}

/// Default-catalog scenario with `n_slices` i.i.d. requests.
pub fn generate_scenario(n_slices: usize, seed: u64) -> Scenario {
    default_catalog().generate(n_slices, seed)
}

/// SplitMix64 step, used to derive independent stream seeds from a master seed.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_catalog_golden_values() {
        let c = default_catalog();
        assert_eq!(c.infrastructures.len(), 3);
        let caps: Vec<_> = c.infrastructures.iter().map(|i| (i.capacity.cpu_cores(), i.capacity.mem_gib())).collect();
        assert_eq!(caps, vec![(16.0, 16.0), (32.0, 32.0), (64.0, 64.0)]);
        let prices: Vec<_> = c.infrastructures.iter().map(|i| i.unit_cost()).collect();
        assert_eq!(prices, vec![0.010, 0.005, 0.001]);
        let dn: Vec<_> = c.infrastructures.iter().map(|i| i.dn_latency_ms).collect();
        assert_eq!(dn, vec![5.0, 7.5, 10.0]);

        let demands: Vec<(&str, f64, f64)> =
            c.vnfs.iter().map(|v| (v.name.as_str(), v.demand.cpu_cores(), v.demand.mem_gib())).collect();
        assert_eq!(
            demands,
            vec![
                ("NRF", 0.15, 0.128),
                ("UDR/UDM/AUSF", 0.65, 0.896),
                ("AMF", 0.25, 0.256),
                ("SMF", 0.25, 0.256),
                ("UPF", 0.5, 0.512),
                ("CU", 0.5, 0.512),
                ("DU", 3.0, 2.0),
            ]
        );

        let l = &c.latency_model;
        assert_eq!(l.link(0, 1).unwrap(), LinkLatency { mean_ms: 0.5, stddev_ms: 0.1 });
        assert_eq!(l.link(1, 2).unwrap(), LinkLatency { mean_ms: 20.0, stddev_ms: 1.0 });
        let d02 = l.link(0, 2).unwrap();
        assert_eq!(d02.mean_ms, 20.5);
        assert!((d02.stddev_ms.powi(2) - 1.01).abs() < 1e-12);
        for m in 0..3 {
            assert_eq!(l.link(m, m).unwrap(), LinkLatency::ZERO);
        }
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(l.link(a, b).unwrap(), l.link(b, a).unwrap());
            }
        }

        assert_eq!(c.profile(SliceType::Urllc).latency_budget_ms, 10.0);
        assert_eq!(c.profile(SliceType::Embb).latency_budget_ms, 20.0);
        assert_eq!(c.profile(SliceType::Mmtc).latency_budget_ms, 50.0);
        assert!(c.profile(SliceType::Mmtc).consolidation_required);
        assert!(!c.profile(SliceType::Embb).consolidation_required);
        c.validate().unwrap();
    }

    #[test]
    fn chain_follows_chain_index() {
        let r = default_catalog().request(0, SliceType::Embb, 0);
        let names: Vec<_> = r.chain().iter().map(|&i| r.vnfs[i].name.clone()).collect();
        assert_eq!(names, vec!["DU", "CU", "UPF"]);
    }

    #[test]
    fn slice_demand_sums() {
        let c = default_catalog();
        let full = c.request(0, SliceType::Mmtc, 0);
        assert_eq!(slice_total_demand(&full), Resources::new(5300, 4560));

        let mut du_only = full.clone();
        du_only.vnfs.retain(|v| v.name == "DU");
        assert_eq!(slice_total_demand(&du_only), Resources::new(3000, 2000));

        let mut empty = full;
        empty.vnfs.clear();
        assert_eq!(slice_total_demand(&empty), Resources::ZERO);
    }

    #[test]
    fn diagonal_latency_is_zero_and_unknown_pair_errors() {
        let model = default_catalog().latency_model;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_link_latency(&model, 0, 0, &mut rng).unwrap(), 0.0);
        assert!(matches!(sample_link_latency(&model, 0, 3, &mut rng), Err(Error::UnknownLinkPair(0, 3))));
        let partial = LatencyModel::from_pairs(3, &[(0, 1, LinkLatency { mean_ms: 1.0, stddev_ms: 0.0 })]).unwrap();
        assert!(partial.link(0, 2).is_err());
        assert!(!partial.is_complete());
    }

    #[test]
    fn link_latency_sample_means() {
        let model = default_catalog().latency_model;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 1_000_000;
        let mean01: f64 = (0..n).map(|_| sample_link_latency(&model, 0, 1, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean01 - 0.5).abs() < 0.01, "{mean01}");
        let mean12: f64 = (0..n).map(|_| sample_link_latency(&model, 1, 2, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean12 - 20.0).abs() < 0.1, "{mean12}");
    }

    #[test]
    fn sampled_latency_never_negative() {
        let model = LatencyModel::from_pairs(2, &[(0, 1, LinkLatency { mean_ms: 0.1, stddev_ms: 1.0 })]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..100_000).all(|_| sample_link_latency(&model, 0, 1, &mut rng).unwrap() >= 0.0));
    }

    #[test]
    fn scenario_is_deterministic_and_demands_scale() {
        let a = generate_scenario(15, 99);
        let b = generate_scenario(15, 99);
        assert_eq!(a, b);
        assert_ne!(
            a.requests.iter().map(|r| r.slice_type).collect::<Vec<_>>(),
            generate_scenario(15, 100).requests.iter().map(|r| r.slice_type).collect::<Vec<_>>()
        );
        let five = generate_scenario(5, 7);
        assert_eq!(five.total_demand(), Resources::new(26_500, 22_800));
        assert_eq!(five.total_capacity(), Resources::new(112_000, 112_000));
    }

    #[test]
    fn slice_type_frequencies_follow_multinomial() {
        let mut counts = [0usize; 3];
        for seed in 0..10_000u64 {
            for r in generate_scenario(15, seed).requests {
                counts[r.slice_type.index()] += 1;
            }
        }
        let total = counts.iter().sum::<usize>() as f64;
        for (c, p) in counts.iter().zip([0.2, 0.3, 0.5]) {
            assert!((*c as f64 / total - p).abs() < 0.02);
        }
    }

    #[test]
    fn budgets_follow_type() {
        for r in generate_scenario(50, 1).requests {
            let expected = match r.slice_type {
                SliceType::Urllc => 10.0,
                SliceType::Embb => 20.0,
                SliceType::Mmtc => 50.0,
            };
            assert_eq!(r.latency_budget_ms, expected);
            assert_eq!(r.consolidation_required, r.slice_type == SliceType::Mmtc);
        }
    }

    #[test]
    fn cost_forms() {
        let nrf = Resources::new(150, 128);
        // 0.001 $/h * 0.15 * 0.128 = 1.92e-5 $/h
        assert_eq!(CostForm::Product.vnf_cost(1_000, &nrf), Cost(19_200_000));
        assert_eq!(CostForm::Product.vnf_cost(1_000, &nrf).dollars_per_hour(), 1.92e-5);
        // 0.001 * (0.15 + 0.128)
        assert_eq!(CostForm::WeightedSum.vnf_cost(1_000, &nrf).dollars_per_hour(), 2.78e-4);
    }

    #[test]
    fn slice_type_parsing() {
        assert_eq!("eMBB".parse::<SliceType>().unwrap(), SliceType::Embb);
        assert!("video".parse::<SliceType>().is_err());
    }
}
