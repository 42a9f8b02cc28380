//! Packet-trace ingestion, per-slice traffic profiles, and the resource
//! demand lookup table.

pub mod lookup;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::env_model::SliceType;
use crate::error::{Error, Result};

pub use lookup::{measured_table, Lookup, LookupPoint, ResourceLookupTable};

pub const TRACE_HEADER: [&str; 4] = ["timestamp_us", "direction", "size_bytes", "flow_id"];

/// Share of malformed data lines above which a trace is refused.
pub const MAX_MALFORMED_FRACTION: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Uplink,
    Downlink,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uplink" | "ul" | "up" => Ok(Direction::Uplink),
            "downlink" | "dl" | "down" => Ok(Direction::Downlink),
            other => Err(Error::Trace(format!("unknown direction '{other}'"))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Uplink => "uplink",
            Direction::Downlink => "downlink",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    /// microseconds since trace start
    pub timestamp_us: u64,
    pub direction: Direction,
    pub size_bytes: u64,
    pub flow: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    /// sorted by timestamp, ties in file order
    pub records: Vec<TraceRecord>,
    /// (line number, reason) of each skipped line
    pub malformed: Vec<(u64, String)>,
    pub warnings: Vec<String>,
}

fn parse_record(fields: &csv::StringRecord) -> Result<TraceRecord> {
    if fields.len() != TRACE_HEADER.len() {
        return Err(Error::Trace(format!("expected {} fields, found {}", TRACE_HEADER.len(), fields.len())));
    }
    let num = |i: usize| -> Result<u64> {
        fields[i].trim().parse().map_err(|_| Error::Trace(format!("bad {} '{}'", TRACE_HEADER[i], &fields[i])))
    };
    Ok(TraceRecord {
        timestamp_us: num(0)?,
        direction: fields[1].parse()?,
        size_bytes: num(2)?,
        flow: fields[3].trim().to_string(),
    })
}

/// Parses trace CSV text. See [`load_trace`].
pub fn parse_trace(text: &str) -> Result<Trace> {
    if text.trim().is_empty() {
        return Ok(Trace::default());
    }
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Trace(format!("unreadable header: {e}")))?;
    if header.iter().collect::<Vec<_>>() != TRACE_HEADER {
        return Err(Error::Trace(format!("header must be '{}'", TRACE_HEADER.join(","))));
    }
    let mut trace = Trace::default();
    let mut lines = 0usize;
    for row in reader.records() {
        lines += 1;
        match row {
            Ok(r) => match parse_record(&r) {
                Ok(rec) => trace.records.push(rec),
                Err(e) => trace.malformed.push((r.position().map_or(lines as u64 + 1, |p| p.line()), e.to_string())),
            },
            Err(e) => trace.malformed.push((e.position().map_or(lines as u64 + 1, |p| p.line()), e.to_string())),
        }
    }
    for (line, reason) in &trace.malformed {
        trace.warnings.push(format!("line {line}: {reason}"));
    }
    if lines > 0 && trace.malformed.len() as f64 > MAX_MALFORMED_FRACTION * lines as f64 {
        let first: Vec<String> = trace.malformed.iter().take(5).map(|(l, r)| format!("line {l}: {r}")).collect();
        return Err(Error::Trace(format!(
            "{} of {lines} lines malformed ({})",
            trace.malformed.len(),
            first.join("; ")
        )));
    }
    if trace.records.windows(2).any(|w| w[1].timestamp_us < w[0].timestamp_us) {
        trace.records.sort_by_key(|r| r.timestamp_us);
        trace.warnings.push("timestamps out of order; records were re-sorted".into());
    }
    for w in &trace.warnings {
        log::warn!("{w}");
    }
    Ok(trace)
}

/// Reads a `timestamp_us,direction,size_bytes,flow_id` CSV file. Malformed
/// lines are skipped and reported, unless there are more than 1% of them.
pub fn load_trace(path: &Path) -> Result<Trace> {
    parse_trace(&std::fs::read_to_string(path)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateWindow {
    pub start_s: f64,
    pub packets: u64,
    pub bytes: u64,
    pub packets_per_s: f64,
    pub bits_per_s: f64,
    /// the trace extends to this window's end
    pub full: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterArrivalStats {
    pub mean_us: f64,
    pub stddev_us: f64,
    pub p50_us: f64,
    pub p90_us: f64,
    pub p99_us: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrafficProfile {
    pub slice_type: Option<SliceType>,
    pub window_s: f64,
    pub rate_series: Vec<RateWindow>,
    pub interarrival: InterArrivalStats,
    /// downlink bytes / total bytes
    pub direction_ratio: f64,
    pub packets: u64,
}

/// Nearest-rank percentile of sorted values.
fn percentile(sorted: &[u64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1] as f64
}

pub fn profile_trace(records: &[TraceRecord], window_s: f64, slice_type: Option<SliceType>) -> Result<TrafficProfile> {
    if records.len() < 2 {
        return Err(Error::Trace(format!("profiling needs at least 2 records, got {}", records.len())));
    }
    if !(window_s > 0.0) || !window_s.is_finite() {
        return Err(Error::Trace(format!("window must be positive, got {window_s}")));
    }
    if records.windows(2).any(|w| w[1].timestamp_us < w[0].timestamp_us) {
        return Err(Error::Trace("records must be sorted by timestamp".into()));
    }
    let window_us = window_s * 1e6;
    let last = records.last().unwrap().timestamp_us;
    let n_windows = (last as f64 / window_us).floor() as usize + 1;
    let mut rate_series: Vec<RateWindow> = (0..n_windows)
        .map(|k| RateWindow {
            start_s: k as f64 * window_s,
            packets: 0,
            bytes: 0,
            packets_per_s: 0.0,
            bits_per_s: 0.0,
            full: (k as f64 + 1.0) * window_us <= last as f64,
        })
        .collect();
    let (mut down, mut total) = (0u64, 0u64);
    for r in records {
        let k = ((r.timestamp_us as f64 / window_us).floor() as usize).min(n_windows - 1);
        rate_series[k].packets += 1;
        rate_series[k].bytes += r.size_bytes;
        total += r.size_bytes;
        if r.direction == Direction::Downlink {
            down += r.size_bytes;
        }
    }
    for w in &mut rate_series {
        w.packets_per_s = w.packets as f64 / window_s;
        w.bits_per_s = w.bytes as f64 * 8.0 / window_s;
    }

    let mut gaps: Vec<u64> = records.windows(2).map(|w| w[1].timestamp_us - w[0].timestamp_us).collect();
    let n = gaps.len() as f64;
    let mean = gaps.iter().map(|&g| g as f64).sum::<f64>() / n;
    let var = gaps.iter().map(|&g| (g as f64 - mean).powi(2)).sum::<f64>() / n;
    gaps.sort_unstable();
    Ok(TrafficProfile {
        slice_type,
        window_s,
        rate_series,
        interarrival: InterArrivalStats {
            mean_us: mean,
            stddev_us: var.sqrt(),
            p50_us: percentile(&gaps, 50.0),
            p90_us: percentile(&gaps, 90.0),
            p99_us: percentile(&gaps, 99.0),
        },
        direction_ratio: if total == 0 { 0.0 } else { down as f64 / total as f64 },
        packets: records.len() as u64,
    })
}

/// Per-window rates as CSV, followed by nothing else; the summary statistics
/// go in [`profile_summary`].
pub fn write_profile_csv(profile: &TrafficProfile, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["window_start_s", "packets", "bytes", "packets_per_s", "bits_per_s", "full"])?;
    for r in &profile.rate_series {
        w.write_record([
            r.start_s.to_string(),
            r.packets.to_string(),
            r.bytes.to_string(),
            r.packets_per_s.to_string(),
            r.bits_per_s.to_string(),
            r.full.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn profile_summary(profile: &TrafficProfile) -> String {
    let ia = &profile.interarrival;
    format!(
        "packets {}\nwindows {} x {} s\ninter-arrival mean {:.3} us, stddev {:.3} us, p50 {} us, p90 {} us, p99 {} us\ndownlink byte share {:.4}\n",
        profile.packets,
        profile.rate_series.len(),
        profile.window_s,
        ia.mean_us,
        ia.stddev_us,
        ia.p50_us,
        ia.p90_us,
        ia.p99_us,
        profile.direction_ratio
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: u64, d: Direction, size: u64) -> TraceRecord {
        TraceRecord { timestamp_us: t, direction: d, size_bytes: size, flow: "f".into() }
    }

    #[test]
    fn parses_small_files() {
        let t = parse_trace("timestamp_us,direction,size_bytes,flow_id\n0,uplink,100,a\n10,downlink,200,a\n20,ul,50,b\n").unwrap();
        assert_eq!(t.records.len(), 3);
        assert!(t.warnings.is_empty());
        assert_eq!(parse_trace("").unwrap().records.len(), 0);
        assert!(parse_trace("time,dir\n1,2\n").is_err());
    }

    #[test]
    fn out_of_order_is_stably_sorted() {
        let t = parse_trace("timestamp_us,direction,size_bytes,flow_id\n20,uplink,1,a\n10,uplink,2,b\n20,uplink,3,c\n").unwrap();
        let got: Vec<(u64, &str)> = t.records.iter().map(|r| (r.timestamp_us, r.flow.as_str())).collect();
        assert_eq!(got, vec![(10, "b"), (20, "a"), (20, "c")]);
        assert_eq!(t.warnings.len(), 1);
    }

    #[test]
    fn malformed_threshold() {
        let mut text = String::from("timestamp_us,direction,size_bytes,flow_id\n");
        for i in 0..200 {
            text.push_str(&format!("{i},uplink,10,a\n"));
        }
        text.push_str("oops,uplink,10,a\n");
        let t = parse_trace(&text).unwrap();
        assert_eq!(t.records.len(), 200);
        assert_eq!(t.malformed.len(), 1);
        assert_eq!(t.malformed[0].0, 202);
        text.push_str("5,sideways,10,a\n7,uplink\n");
        assert!(matches!(parse_trace(&text), Err(Error::Trace(_))));
    }

    #[test]
    fn constant_rate_trace() {
        let records: Vec<TraceRecord> = (0..1000).map(|i| rec(i * 10_000, Direction::Uplink, 100)).collect();
        let p = profile_trace(&records, 1.0, None).unwrap();
        assert_eq!(p.rate_series.len(), 10);
        assert!(p.rate_series.iter().all(|w| w.packets_per_s == 100.0));
        assert_eq!(p.interarrival.mean_us, 10_000.0);
        assert_eq!(p.interarrival.stddev_us, 0.0);
        assert_eq!(p.interarrival.mean_us * 999.0, 9_990_000.0);
        assert_eq!(p.rate_series.iter().map(|w| w.packets).sum::<u64>(), 1000);
        assert_eq!(p.direction_ratio, 0.0);
    }

    #[test]
    fn burst_then_silence() {
        let mut records: Vec<TraceRecord> = (0..50).map(|i| rec(i * 100, Direction::Downlink, 10)).collect();
        records.push(rec(4_500_000, Direction::Downlink, 10));
        let p = profile_trace(&records, 1.0, Some(SliceType::Embb)).unwrap();
        assert!(p.rate_series[0].packets_per_s > 0.0);
        assert!(p.rate_series[1..4].iter().all(|w| w.packets == 0));
        assert_eq!(p.direction_ratio, 1.0);
        let ia = &p.interarrival;
        assert!(ia.p50_us <= ia.p90_us && ia.p90_us <= ia.p99_us);
        assert!(profile_trace(&records[..1], 1.0, None).is_err());
    }
}
