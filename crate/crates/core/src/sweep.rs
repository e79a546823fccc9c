//! One-parameter sensitivity sweeps.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::SimConfig;
use crate::controller::{run_detailed_with_digest, Mode, RunOptions};
use crate::error::{Result, SimError};
use crate::report::{reduction_pct, trace_digest, Counts, TrafficReport};
use crate::trace::TraceRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// FIFO entries per partition.
    FifoEntries,
    /// Hash-store entries per partition.
    HashEntries,
    /// Hash-store bytes summed over all partitions, at 22 bytes per entry.
    HashBytes,
    /// Per-partition metadata cache budgets.
    AddrCacheBytes,
    TypeCacheBytes,
    MaskCacheBytes,
    /// Total L2 capacity.
    L2Bytes,
}

impl SweepParam {
    pub const ALL: [SweepParam; 7] = [
        SweepParam::FifoEntries,
        SweepParam::HashEntries,
        SweepParam::HashBytes,
        SweepParam::AddrCacheBytes,
        SweepParam::TypeCacheBytes,
        SweepParam::MaskCacheBytes,
        SweepParam::L2Bytes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::FifoEntries => "fifo_entries",
            SweepParam::HashEntries => "hash_entries",
            SweepParam::HashBytes => "hash_bytes",
            SweepParam::AddrCacheBytes => "addr_cache_bytes",
            SweepParam::TypeCacheBytes => "type_cache_bytes",
            SweepParam::MaskCacheBytes => "mask_cache_bytes",
            SweepParam::L2Bytes => "l2_bytes",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &SimConfig, value: u64) -> Result<SimConfig> {
        let mut c = base.clone();
        match self {
            SweepParam::FifoEntries => c.cache.fifo_entries_per_partition = value as usize,
            SweepParam::HashEntries => c.hash_entries = Some(value as usize),
            SweepParam::HashBytes => c.hash_entries = Some(c.hash_entries_for_total_bytes(value)),
            SweepParam::AddrCacheBytes => c.metadata.addr_cache = Some(value),
            SweepParam::TypeCacheBytes => c.metadata.type_cache = Some(value),
            SweepParam::MaskCacheBytes => c.metadata.mask_cache = Some(value),
            SweepParam::L2Bytes => c.cache.capacity_bytes = value,
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        SweepParam::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<&str> = SweepParam::ALL.iter().map(|p| p.name()).collect();
            SimError::Config(format!("unknown sweep parameter {s:?} ({})", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: u64,
    pub report: TrafficReport,
    /// Baseline counts under the same configuration.
    pub baseline: Counts,
}

/// Runs `mode` and a baseline at every value. Points run in parallel and come
/// back in `values` order.
pub fn sweep(trace: &[TraceRecord], base: &SimConfig, mode: Mode, param: SweepParam, values: &[u64]) -> Result<Vec<SweepPoint>> {
    let digest = trace_digest(trace);
    let run = |config: &SimConfig, mode: Mode| {
        run_detailed_with_digest(trace, &digest, config, mode, RunOptions::default()).map(|o| o.report)
    };
    values
        .par_iter()
        .map(|&value| {
            let config = param.apply(base, value)?;
            let report = run(&config, mode)?;
            let baseline = if mode == Mode::Baseline {
                report.counts
            } else {
                run(&config, Mode::Baseline)?.counts
            };
            Ok(SweepPoint {
                value,
                report,
                baseline,
            })
        })
        .collect()
}

pub fn sweep_csv(param: SweepParam, points: &[SweepPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| SimError::invariant(e.to_string());
    w.write_record([
        "param",
        "value",
        "mode",
        "write",
        "data_read",
        "read_only",
        "metadata_read",
        "metadata_write",
        "dedup_read",
        "car_copy",
        "fifo_hit",
        "offchip_total",
        "dedup_ratio",
        "read_only_reduction_pct",
        "offchip_reduction_pct",
    ])
    .map_err(err)?;
    for p in points {
        p.report.check()?;
        let c = &p.report.counts;
        w.write_record([
            param.name().to_string(),
            p.value.to_string(),
            p.report.mode.to_string(),
            c.write.to_string(),
            c.data_read.to_string(),
            c.read_only.to_string(),
            c.metadata_read.to_string(),
            c.metadata_write.to_string(),
            c.dedup_read.to_string(),
            c.car_copy.to_string(),
            c.fifo_hit.to_string(),
            p.report.derived.offchip_total.to_string(),
            format!("{:.6}", p.report.derived.dedup_ratio),
            format!("{:.2}", reduction_pct(p.baseline.read_only, c.read_only)),
            format!("{:.2}", reduction_pct(p.baseline.offchip_total(), c.offchip_total())),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| SimError::invariant(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{generate_trace, GenParams};

    #[test]
    fn param_names_parse() {
        for p in SweepParam::ALL {
            assert_eq!(p.name().parse::<SweepParam>().unwrap(), p);
        }
        assert!("bogus".parse::<SweepParam>().is_err());
    }

    #[test]
    fn apply_validates() {
        let base = SimConfig::default();
        assert_eq!(SweepParam::HashBytes.apply(&base, 384 << 10).unwrap().hash_entries, Some(2234));
        assert!(SweepParam::L2Bytes.apply(&base, 1000).is_err());
        assert!(SweepParam::TypeCacheBytes.apply(&base, 8).is_err());
    }

    #[test]
    fn sweep_keeps_value_order() {
        let trace = generate_trace(&GenParams {
            n_records: 500,
            n_blocks: 64,
            readonly_set_size: 32,
            readonly_rereads: 1,
            ..GenParams::default()
        })
        .unwrap();
        let values = [32, 1, 8, 2];
        let points = sweep(&trace, &SimConfig::default(), Mode::Cmd, SweepParam::FifoEntries, &values).unwrap();
        let got: Vec<u64> = points.iter().map(|p| p.value).collect();
        assert_eq!(got, values);
        let csv = sweep_csv(SweepParam::FifoEntries, &points).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.lines().nth(1).unwrap().starts_with("fifo_entries,32,cmd,"));
    }
}
