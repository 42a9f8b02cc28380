//! Resource demand per (slice type, VNF, active users), interpolated between
//! measured user counts.
//!
//! CSV columns: `slice_type,vnf,users,cpu_percent,mem_mib[,cpu_bound]`.
//! Empty `mem_mib` means not measured; `cpu_bound = upper` marks a value that
//! is only known as an upper bound.

use std::collections::BTreeMap;
use std::path::Path;

use crate::env_model::SliceType;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LookupPoint {
    pub users: u32,
    /// percent of one core
    pub cpu_percent: f64,
    pub mem_mib: Option<f64>,
    pub cpu_upper_bound: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResourceLookupTable {
    /// Each series is sorted by `users` with no duplicates.
    series: BTreeMap<(SliceType, String), Vec<LookupPoint>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lookup {
    pub cpu_percent: f64,
    pub mem_mib: Option<f64>,
    /// `users` was outside the measured grid and the boundary value was used
    pub clamped: bool,
    /// the value depends on an upper-bound measurement
    pub upper_bound: bool,
}

impl ResourceLookupTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces one grid point.
    pub fn insert(&mut self, slice_type: SliceType, vnf: &str, point: LookupPoint) -> Result<()> {
        if !(point.cpu_percent >= 0.0) || !point.cpu_percent.is_finite() || point.mem_mib.is_some_and(|m| !(m >= 0.0)) {
            return Err(Error::Config(format!("negative or non-finite demand for ({slice_type}, {vnf})")));
        }
        let s = self.series.entry((slice_type, vnf.to_string())).or_default();
        match s.binary_search_by_key(&point.users, |p| p.users) {
            Ok(i) => s[i] = point,
            Err(i) => s.insert(i, point),
        }
        Ok(())
    }

    pub fn series(&self, slice_type: SliceType, vnf: &str) -> Option<&[LookupPoint]> {
        self.series.get(&(slice_type, vnf.to_string())).map(Vec::as_slice)
    }

    pub fn keys(&self) -> impl Iterator<Item = (SliceType, &str)> {
        self.series.keys().map(|(t, v)| (*t, v.as_str()))
    }

    pub fn lookup(&self, slice_type: SliceType, vnf: &str, users: u32) -> Result<Lookup> {
        let s = self
            .series(slice_type, vnf)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::UnknownSeries(slice_type, vnf.to_string()))?;
        let exact = |p: &LookupPoint, clamped| Lookup { cpu_percent: p.cpu_percent, mem_mib: p.mem_mib, clamped, upper_bound: p.cpu_upper_bound };
        let (first, last) = (&s[0], &s[s.len() - 1]);
        if users <= first.users {
            return Ok(exact(first, users < first.users));
        }
        if users >= last.users {
            return Ok(exact(last, users > last.users));
        }
        let i = s.partition_point(|p| p.users <= users);
        let (lo, hi) = (&s[i - 1], &s[i]);
        if lo.users == users {
            return Ok(exact(lo, false));
        }
        let t = f64::from(users - lo.users) / f64::from(hi.users - lo.users);
        let lerp = |a: f64, b: f64| a + (b - a) * t;
        Ok(Lookup {
            cpu_percent: lerp(lo.cpu_percent, hi.cpu_percent),
            mem_mib: lo.mem_mib.zip(hi.mem_mib).map(|(a, b)| lerp(a, b)),
            clamped: false,
            upper_bound: lo.cpu_upper_bound || hi.cpu_upper_bound,
        })
    }

    /// Series whose CPU decreases as users grow. Advisory only.
    pub fn monotonicity_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for ((t, v), s) in &self.series {
            for w in s.windows(2) {
                if w[1].cpu_percent < w[0].cpu_percent {
                    out.push(format!(
                        "({t}, {v}): cpu falls from {} at {} users to {} at {} users",
                        w[0].cpu_percent, w[0].users, w[1].cpu_percent, w[1].users
                    ));
                }
            }
        }
        out
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["slice_type", "vnf", "users", "cpu_percent", "mem_mib", "cpu_bound"])?;
        for ((t, v), s) in &self.series {
            for p in s {
                w.write_record([
                    t.tag().to_string(),
                    v.clone(),
                    p.users.to_string(),
                    p.cpu_percent.to_string(),
                    p.mem_mib.map(|m| m.to_string()).unwrap_or_default(),
                    if p.cpu_upper_bound { "upper".into() } else { String::new() },
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.len() < 5 || header[..5] != ["slice_type", "vnf", "users", "cpu_percent", "mem_mib"] {
            return Err(Error::Config("lookup table header must be slice_type,vnf,users,cpu_percent,mem_mib".into()));
        }
        let mut table = Self::new();
        for row in r.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            let bad = |what: &str| Error::Config(format!("lookup table line {line}: bad {what}"));
            if row.len() < 5 {
                return Err(bad("field count"));
            }
            let slice_type: SliceType = row[0].parse()?;
            let users = row[2].parse().map_err(|_| bad("users"))?;
            let cpu_percent = row[3].parse().map_err(|_| bad("cpu_percent"))?;
            let mem_mib = match &row[4] {
                "" => None,
                m => Some(m.parse().map_err(|_| bad("mem_mib"))?),
            };
            let cpu_upper_bound = match row.get(5).unwrap_or("") {
                "" => false,
                "upper" => true,
                _ => return Err(bad("cpu_bound")),
            };
            table.insert(slice_type, &row[1], LookupPoint { users, cpu_percent, mem_mib, cpu_upper_bound })?;
        }
        for w in table.monotonicity_warnings() {
            log::warn!("{w}");
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_csv_string()?)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }
}

/// CPU utilisation figures measured on a single-node 5G testbed at 10, 50 and
/// 200 active users. Memory was not reported and is left empty.
pub fn measured_table() -> ResourceLookupTable {
    let mut t = ResourceLookupTable::new();
    let mut put = |ty, vnf: &str, users, cpu, upper| {
        t.insert(ty, vnf, LookupPoint { users, cpu_percent: cpu, mem_mib: None, cpu_upper_bound: upper })
            .expect("seed values are valid");
    };
    use SliceType::*;
    for (vnf, at50, at200) in [("DU", 11.01, 31.67), ("CU", 9.18, 31.04), ("UPF", 14.15, 41.48)] {
        put(Embb, vnf, 50, at50, false);
        put(Embb, vnf, 200, at200, false);
    }
    for (vnf, cpu) in [("DU", 2.93), ("CU", 1.19), ("UPF", 2.71)] {
        put(Urllc, vnf, 200, cpu, false);
    }
    for (vnf, cpu) in [("DU", 2.77), ("CU", 1.82), ("UPF", 2.82)] {
        put(Mmtc, vnf, 10, 1.5, true);
        put(Mmtc, vnf, 200, cpu, false);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoted_values() {
        let t = measured_table();
        let cpu = |ty, v, u| t.lookup(ty, v, u).unwrap().cpu_percent;
        assert_eq!(cpu(SliceType::Embb, "UPF", 200), 41.48);
        assert_eq!(cpu(SliceType::Embb, "DU", 50), 11.01);
        assert_eq!(cpu(SliceType::Urllc, "CU", 200), 1.19);
        assert_eq!(cpu(SliceType::Mmtc, "DU", 200), 2.77);
        let low = t.lookup(SliceType::Mmtc, "UPF", 10).unwrap();
        assert!(low.cpu_percent <= 1.5 && low.upper_bound && low.mem_mib.is_none());
    }

    #[test]
    fn interpolation_and_clamping() {
        let t = measured_table();
        let mid = t.lookup(SliceType::Embb, "DU", 125).unwrap();
        assert!((mid.cpu_percent - 21.34).abs() < 1e-12);
        assert!(!mid.clamped);
        let hi = t.lookup(SliceType::Embb, "DU", 500).unwrap();
        assert_eq!((hi.cpu_percent, hi.clamped), (31.67, true));
        let lo = t.lookup(SliceType::Urllc, "DU", 5).unwrap();
        assert_eq!((lo.cpu_percent, lo.clamped), (2.93, true));
        assert!(matches!(t.lookup(SliceType::Embb, "AMF", 50), Err(Error::UnknownSeries(..))));
        // continuity at a grid point
        let a = t.lookup(SliceType::Embb, "CU", 199).unwrap().cpu_percent;
        assert!((a - 31.04).abs() < 0.2);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = measured_table();
        let text = t.to_csv_string().unwrap();
        let back = ResourceLookupTable::from_csv_str(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_csv_string().unwrap(), text);
        assert!(t.monotonicity_warnings().is_empty());
    }

    #[test]
    fn monotonicity_is_advisory() {
        let text = "slice_type,vnf,users,cpu_percent,mem_mib\nembb,DU,10,5.0,100\nembb,DU,20,4.0,\n";
        let t = ResourceLookupTable::from_csv_str(text).unwrap();
        assert_eq!(t.monotonicity_warnings().len(), 1);
        assert_eq!(t.lookup(SliceType::Embb, "DU", 15).unwrap().mem_mib, None);
        assert!(ResourceLookupTable::from_csv_str("a,b\n").is_err());
    }
}
