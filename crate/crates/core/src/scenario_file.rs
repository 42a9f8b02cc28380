//! TOML scenario descriptions.
//!
//! ```toml
//! seed = 7
//! slices = 10                 # i.i.d. types from the catalog, or
//! # types = ["embb", "mmtc"]  # an explicit arrival sequence
//! demand_source = "lookup"    # "static" (default) or "lookup"
//! users = 200                 # active users for lookup demands
//! # lookup_table = "table.csv" (defaults to the built-in measured table)
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env_model::{default_catalog, Resources, Scenario, SliceType};
use crate::error::{Error, Result};
use crate::profiler::{measured_table, ResourceLookupTable};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandSource {
    #[default]
    Static,
    Lookup,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slices: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub types: Option<Vec<String>>,
    #[serde(default)]
    pub demand_source: DemandSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub users: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lookup_table: Option<PathBuf>,
}

impl ScenarioFile {
    pub fn generated(slices: usize, seed: u64) -> Self {
        ScenarioFile { seed, slices: Some(slices), types: None, demand_source: DemandSource::Static, users: None, lookup_table: None }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario file serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Builds the scenario; relative table paths resolve against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<Scenario> {
        let catalog = default_catalog();
        let mut scenario = match (&self.slices, &self.types) {
            (Some(n), None) => catalog.generate(*n, self.seed),
            (None, Some(tags)) => {
                let types = tags.iter().map(|t| t.parse()).collect::<Result<Vec<SliceType>>>()?;
                catalog.scenario_from_types(&types, self.seed)
            }
            _ => return Err(Error::Config("scenario needs exactly one of `slices` or `types`".into())),
        };
        if self.demand_source == DemandSource::Lookup {
            let users = self.users.ok_or_else(|| Error::Config("lookup demands need `users`".into()))?;
            let table = match &self.lookup_table {
                Some(p) => ResourceLookupTable::load(&base_dir.join(p))?,
                None => measured_table(),
            };
            apply_lookup_demands(&mut scenario, &table, users)?;
        } else if self.users.is_some() || self.lookup_table.is_some() {
            return Err(Error::Config("`users` and `lookup_table` only apply to lookup demands".into()));
        }
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Replaces the CPU demand of every VNF that has a table series for its
/// slice type with the looked-up value (percent of a core to millicores).
/// Memory is replaced only where the table has it.
pub fn apply_lookup_demands(scenario: &mut Scenario, table: &ResourceLookupTable, users: u32) -> Result<()> {
    for r in &mut scenario.requests {
        for v in &mut r.vnfs {
            if table.series(r.slice_type, &v.name).is_none() {
                continue;
            }
            let hit = table.lookup(r.slice_type, &v.name, users)?;
            if hit.clamped {
                log::warn!("{} users is outside the measured grid for ({}, {}); using the boundary value", users, r.slice_type, v.name);
            }
            let cpu_milli = ((hit.cpu_percent * 10.0).round() as u64).max(1);
            let mem_mgib = hit.mem_mib.map_or(v.demand.mem_mgib, |m| ((m / 1024.0 * 1000.0).round() as u64).max(1));
            v.demand = Resources { cpu_milli, mem_mgib };
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_file_matches_generator() {
        let f = ScenarioFile::from_toml("seed = 3\nslices = 5\n").unwrap();
        assert_eq!(f.build(Path::new(".")).unwrap(), crate::generate_scenario(5, 3));
        assert_eq!(ScenarioFile::from_toml(&f.to_toml()).unwrap(), f);
    }

    #[test]
    fn explicit_types_and_bad_tags() {
        let f = ScenarioFile::from_toml("seed = 1\ntypes = [\"embb\", \"URLLC\"]\n").unwrap();
        let sc = f.build(Path::new(".")).unwrap();
        assert_eq!(sc.requests[1].slice_type, SliceType::Urllc);
        let bad = ScenarioFile::from_toml("seed = 1\ntypes = [\"video\"]\n").unwrap();
        assert!(bad.build(Path::new(".")).is_err());
        assert!(ScenarioFile::from_toml("seed = 1\nslices = 2\ntypes = []\n").unwrap().build(Path::new(".")).is_err());
        assert!(ScenarioFile::from_toml("seed = 1\nslicez = 2\n").is_err());
    }

    #[test]
    fn lookup_demands() {
        let f = ScenarioFile::from_toml("seed = 1\ntypes = [\"embb\"]\ndemand_source = \"lookup\"\nusers = 200\n").unwrap();
        let sc = f.build(Path::new(".")).unwrap();
        let upf = sc.requests[0].vnfs.iter().find(|v| v.name == "UPF").unwrap();
        assert_eq!(upf.demand.cpu_milli, 415);
        assert_eq!(upf.demand.mem_mgib, 512);
        let amf = sc.requests[0].vnfs.iter().find(|v| v.name == "AMF").unwrap();
        assert_eq!(amf.demand, Resources::new(250, 256));
        assert!(ScenarioFile::from_toml("seed = 1\nslices = 1\ndemand_source = \"lookup\"\n").unwrap().build(Path::new(".")).is_err());
    }
}
