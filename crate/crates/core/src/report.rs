//! Counters, derived metrics and stable serialization of run results.
//!
//! JSON field order follows struct declaration order, so identical runs emit
//! identical bytes.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::SimConfig;
use crate::controller::{CostModel, Mode};
use crate::dedup::HashStoreStats;
use crate::error::{Result, SimError};
use crate::metadata::MetaCacheStats;
use crate::trace::{format_trace, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub write: u64,
    pub data_read: u64,
    pub read_only: u64,
    pub metadata_read: u64,
    pub metadata_write: u64,
    pub dedup_read: u64,
    pub car_copy: u64,
    pub fifo_hit: u64,
    pub l2_hit: u64,
    pub l2_miss: u64,
}

impl Counts {
    pub fn offchip_total(&self) -> u64 {
        self.write + self.data_read + self.read_only + self.metadata_read + self.metadata_write + self.dedup_read
    }

    pub fn dram_reads(&self) -> u64 {
        self.data_read + self.read_only + self.metadata_read + self.dedup_read
    }

    pub fn dram_writes(&self) -> u64 {
        self.write + self.metadata_write
    }

    /// `(name, value)` pairs in serialization order.
    pub fn fields(&self) -> [(&'static str, u64); 10] {
        [
            ("write", self.write),
            ("data_read", self.data_read),
            ("read_only", self.read_only),
            ("metadata_read", self.metadata_read),
            ("metadata_write", self.metadata_write),
            ("dedup_read", self.dedup_read),
            ("car_copy", self.car_copy),
            ("fifo_hit", self.fifo_hit),
            ("l2_hit", self.l2_hit),
            ("l2_miss", self.l2_miss),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DedupCounts {
    pub intra_removed: u64,
    pub inter_removed: u64,
    pub unique_writes: u64,
}

/// Non-traffic events that feed the cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EventCounts {
    /// Writebacks that reached the memory controller.
    pub writebacks: u64,
    pub fingerprint: u64,
    pub metadata_hit: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Derived {
    pub offchip_total: u64,
    pub dedup_ratio: f64,
    pub extra_read_ratio: f64,
    pub est_cycles: u64,
    pub est_energy: f64,
}

impl Derived {
    pub fn compute(counts: &Counts, dedup: &DedupCounts, events: &EventCounts, cost: &CostModel) -> Self {
        let offchip_total = counts.offchip_total();
        Derived {
            offchip_total,
            dedup_ratio: (dedup.intra_removed + dedup.inter_removed) as f64 / events.writebacks.max(1) as f64,
            extra_read_ratio: counts.dedup_read as f64 / offchip_total.max(1) as f64,
            est_cycles: cost.cycles(counts, events),
            est_energy: cost.energy(counts, events),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetadataCacheReport {
    pub addr: MetaCacheStats,
    #[serde(rename = "type")]
    pub type_: MetaCacheStats,
    pub mask: MetaCacheStats,
}

impl MetadataCacheReport {
    pub fn total(&self) -> MetaCacheStats {
        let mut t = self.addr;
        t.add(&self.type_);
        t.add(&self.mask);
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HashStoreReport {
    pub entries: u64,
    pub evictions: u64,
    pub rejections: u64,
    pub saturations: u64,
}

impl HashStoreReport {
    pub fn add(&mut self, entries: usize, s: &HashStoreStats) {
        self.entries += entries as u64;
        self.evictions += s.evictions;
        self.rejections += s.rejections;
        self.saturations += s.saturations;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficReport {
    pub mode: Mode,
    pub trace_digest: String,
    pub counts: Counts,
    pub dedup: DedupCounts,
    pub derived: Derived,
    pub events: EventCounts,
    pub metadata_caches: MetadataCacheReport,
    pub hash_store: HashStoreReport,
    pub config: SimConfig,
}

impl TrafficReport {
    /// Recomputes every derived field and checks the class totality rule.
    pub fn check(&self) -> Result<()> {
        let expect = Derived::compute(&self.counts, &self.dedup, &self.events, &self.config.cost);
        if expect.offchip_total != self.derived.offchip_total {
            return Err(SimError::invariant(format!(
                "offchip_total {} but classes sum to {}",
                self.derived.offchip_total, expect.offchip_total
            )));
        }
        if expect != self.derived {
            return Err(SimError::invariant("derived metrics disagree with counters"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(SimError::Config(format!("unknown report format {s:?} (json, csv)"))),
        }
    }
}

/// SHA-256 of the canonical text form of the trace.
pub fn trace_digest(records: &[TraceRecord]) -> String {
    let digest = Sha256::digest(format_trace(records).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn csv_rows(rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).map_err(|e| SimError::invariant(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| SimError::invariant(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn count_rows(report: &TrafficReport) -> impl Iterator<Item = (&'static str, u64)> {
    report
        .counts
        .fields()
        .into_iter()
        .chain([("offchip_total", report.derived.offchip_total)])
}

/// Serializes one report. CSV has one row per (mode, class).
pub fn emit(report: &TrafficReport, format: Format) -> Result<String> {
    report.check()?;
    match format {
        Format::Json => Ok(json(report)),
        Format::Csv => {
            let header = ["mode", "class", "count"].map(String::from).to_vec();
            let mode = report.mode.to_string();
            csv_rows(std::iter::once(header).chain(
                count_rows(report).map(|(class, n)| vec![mode.clone(), class.to_string(), n.to_string()]),
            ))
        }
    }
}

/// Percent reduction of each DRAM class against the baseline run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Reductions {
    pub write: f64,
    pub data_read: f64,
    pub read_only: f64,
    pub metadata_read: f64,
    pub metadata_write: f64,
    pub dedup_read: f64,
    pub offchip_total: f64,
}

/// `(base - x) / base` in percent, rounded to 2 decimals; 0 when `base` is 0.
pub fn reduction_pct(base: u64, x: u64) -> f64 {
    if base == 0 {
        return 0.0;
    }
    let pct = (base as f64 - x as f64) / base as f64 * 100.0;
    let r = (pct * 100.0).round() / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl Reductions {
    pub fn between(base: &Counts, x: &Counts) -> Self {
        Reductions {
            write: reduction_pct(base.write, x.write),
            data_read: reduction_pct(base.data_read, x.data_read),
            read_only: reduction_pct(base.read_only, x.read_only),
            metadata_read: reduction_pct(base.metadata_read, x.metadata_read),
            metadata_write: reduction_pct(base.metadata_write, x.metadata_write),
            dedup_read: reduction_pct(base.dedup_read, x.dedup_read),
            offchip_total: reduction_pct(base.offchip_total(), x.offchip_total()),
        }
    }

    fn get(&self, class: &str) -> Option<f64> {
        Some(match class {
            "write" => self.write,
            "data_read" => self.data_read,
            "read_only" => self.read_only,
            "metadata_read" => self.metadata_read,
            "metadata_write" => self.metadata_write,
            "dedup_read" => self.dedup_read,
            "offchip_total" => self.offchip_total,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeResult {
    pub mode: Mode,
    pub reduction_pct: Reductions,
    pub report: TrafficReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub trace_digest: String,
    pub modes: Vec<ModeResult>,
}

impl CompareReport {
    /// `reports` must contain a baseline run; reductions are relative to it.
    pub fn from_reports(reports: Vec<TrafficReport>) -> Result<Self> {
        let base = reports
            .iter()
            .find(|r| r.mode == Mode::Baseline)
            .map(|r| r.counts)
            .ok_or_else(|| SimError::Config("compare needs a baseline run".into()))?;
        let trace_digest = reports.first().map(|r| r.trace_digest.clone()).unwrap_or_default();
        let modes = reports
            .into_iter()
            .map(|report| ModeResult {
                mode: report.mode,
                reduction_pct: Reductions::between(&base, &report.counts),
                report,
            })
            .collect();
        Ok(CompareReport { trace_digest, modes })
    }

    pub fn get(&self, mode: Mode) -> Option<&TrafficReport> {
        self.modes.iter().find(|m| m.mode == mode).map(|m| &m.report)
    }

    pub fn emit(&self, format: Format) -> Result<String> {
        for m in &self.modes {
            m.report.check()?;
        }
        match format {
            Format::Json => Ok(json(self)),
            Format::Csv => {
                let header = ["mode", "class", "count", "reduction_pct"].map(String::from).to_vec();
                let mut rows = vec![header];
                for m in &self.modes {
                    for (class, n) in count_rows(&m.report) {
                        let pct = m.reduction_pct.get(class).map(|p| format!("{p:.2}")).unwrap_or_default();
                        rows.push(vec![m.mode.to_string(), class.to_string(), n.to_string(), pct]);
                    }
                }
                csv_rows(rows)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(mode: Mode, counts: Counts) -> TrafficReport {
        let config = SimConfig::default();
        let dedup = DedupCounts::default();
        let events = EventCounts::default();
        TrafficReport {
            mode,
            trace_digest: trace_digest(&[]),
            counts,
            dedup,
            derived: Derived::compute(&counts, &dedup, &events, &config.cost),
            events,
            metadata_caches: MetadataCacheReport::default(),
            hash_store: HashStoreReport::default(),
            config,
        }
    }

    #[test]
    fn empty_run_is_all_zero() {
        let r = report(Mode::Cmd, Counts::default());
        assert_eq!(r.derived.offchip_total, 0);
        assert_eq!(r.derived.dedup_ratio, 0.0);
        assert_eq!(r.derived.extra_read_ratio, 0.0);
        assert_eq!(r.derived.est_cycles, 0);
        r.check().unwrap();
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let counts = Counts {
            write: 7,
            data_read: 3,
            dedup_read: 1,
            ..Counts::default()
        };
        let mut r = report(Mode::DedupCar, counts);
        r.dedup.inter_removed = 1;
        r.events.writebacks = 3;
        r.derived = Derived::compute(&r.counts, &r.dedup, &r.events, &r.config.cost);
        let text = emit(&r, Format::Json).unwrap();
        let back: TrafficReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(emit(&back, Format::Json).unwrap(), text);
        assert!((r.derived.extra_read_ratio - 1.0 / 11.0).abs() < 1e-15);
        assert!((r.derived.dedup_ratio - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn emit_rejects_broken_totality() {
        let mut r = report(Mode::Dedup, Counts::default());
        r.derived.offchip_total = 5;
        assert!(matches!(emit(&r, Format::Json), Err(SimError::Invariant(_))));
    }

    #[test]
    fn csv_has_row_per_class() {
        let r = report(Mode::Baseline, Counts { write: 2, ..Counts::default() });
        let text = emit(&r, Format::Csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "mode,class,count");
        assert_eq!(lines[1], "baseline,write,2");
        assert_eq!(lines.len(), 12);
    }

    #[test]
    fn reductions() {
        assert_eq!(reduction_pct(0, 5), 0.0);
        assert_eq!(reduction_pct(3, 2), 33.33);
        assert_eq!(reduction_pct(3, 3), 0.0);
        assert_eq!(reduction_pct(4, 5), -25.0);
        let base = report(Mode::Baseline, Counts { write: 10, read_only: 4, ..Counts::default() });
        let cmp = CompareReport::from_reports(vec![base.clone(), base]).unwrap();
        assert!(cmp.modes.iter().all(|m| m.reduction_pct == Reductions::default()));
        assert!(CompareReport::from_reports(vec![report(Mode::Cmd, Counts::default())]).is_err());
    }
}
