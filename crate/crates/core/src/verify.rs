//! Simulator-versus-oracle equivalence checks.

use std::collections::BTreeSet;
use std::fmt;

use crate::config::SimConfig;
use crate::controller::{run_detailed_with_digest, Mode, RunOptions, WriteClass};
use crate::error::Result;
use crate::oracle::{oracle_read_all, oracle_replay, OracleClass, OracleReplay};
use crate::trace::{BlockAddr, SectorData, TraceRecord};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Divergence {
    /// A trace read returned the wrong bytes.
    Read {
        mode: Mode,
        index: usize,
        blk: BlockAddr,
        sector: usize,
        got: SectorData,
        want: SectorData,
    },
    /// Reading the final state back disagreed with the oracle.
    FinalState {
        mode: Mode,
        blk: BlockAddr,
        sector: usize,
        got: SectorData,
        want: SectorData,
    },
    /// Writeback number `writeback` was classified differently.
    Class {
        writeback: usize,
        blk: BlockAddr,
        got: WriteClass,
        want: OracleClass,
    },
    /// The simulator and oracle saw a different number of reads or writes.
    Length {
        mode: Mode,
        what: &'static str,
        got: usize,
        want: usize,
    },
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Divergence::Read {
                mode,
                index,
                blk,
                sector,
                got,
                want,
            } => write!(f, "{mode}: record {index} read {blk} sector {sector} returned {got:08x?}, expected {want:08x?}"),
            Divergence::FinalState {
                mode,
                blk,
                sector,
                got,
                want,
            } => write!(f, "{mode}: final {blk} sector {sector} is {got:08x?}, expected {want:08x?}"),
            Divergence::Class {
                writeback,
                blk,
                got,
                want,
            } => write!(f, "writeback {writeback} to {blk} classified {got:?}, oracle says {want:?}"),
            Divergence::Length { mode, what, got, want } => write!(f, "{mode}: {got} {what}, oracle has {want}"),
        }
    }
}

fn same_class(got: WriteClass, want: OracleClass) -> bool {
    matches!(
        (got, want),
        (WriteClass::Intra, OracleClass::Intra)
            | (WriteClass::Inter, OracleClass::Inter { .. })
            | (WriteClass::Unique, OracleClass::Unique)
    )
}

/// Replays `trace` in `mode`, comparing every read against the oracle and
/// then reading every materialized sector of the final state back through
/// the full pipeline.
pub fn check_integrity(trace: &[TraceRecord], config: &SimConfig, mode: Mode, oracle: &OracleReplay) -> Result<Option<Divergence>> {
    let opts = RunOptions {
        record_reads: true,
        ..RunOptions::default()
    };
    // Only the logs and final state are inspected, so the report digest is left empty.
    let mut out = run_detailed_with_digest(trace, "", config, mode, opts)?;
    if out.read_log.len() != oracle.reads.len() {
        return Ok(Some(Divergence::Length {
            mode,
            what: "reads",
            got: out.read_log.len(),
            want: oracle.reads.len(),
        }));
    }
    for (got, &(index, want)) in out.read_log.iter().zip(&oracle.reads) {
        if got.index != index || got.data != want {
            return Ok(Some(Divergence::Read {
                mode,
                index,
                blk: got.blk,
                sector: got.sector,
                got: got.data,
                want,
            }));
        }
    }
    let read_only: BTreeSet<BlockAddr> = trace.iter().filter(|r| !r.is_write()).map(|r| r.blk()).collect();
    for ((blk, sector), want) in oracle_read_all(&oracle.state, read_only) {
        let got = out.sim.read(blk, sector)?;
        if got != want {
            return Ok(Some(Divergence::FinalState {
                mode,
                blk,
                sector,
                got,
                want,
            }));
        }
    }
    out.sim.check_invariants()?;
    Ok(None)
}

/// Runs dedup mode with unbounded tables and classifies its writeback stream
/// with the oracle, writeback by writeback.
pub fn check_classes(trace: &[TraceRecord], config: &SimConfig) -> Result<Option<Divergence>> {
    let config = config.clone().unbounded();
    let opts = RunOptions {
        record_writes: true,
        flush_at_end: true,
        ..RunOptions::default()
    };
    let out = run_detailed_with_digest(trace, "", &config, Mode::Dedup, opts)?;
    let stream: Vec<TraceRecord> = out
        .write_log
        .iter()
        .map(|e| TraceRecord::Write {
            blk: e.wb.blk,
            mask: e.wb.mask,
            payload: e.wb.payload.clone(),
        })
        .collect();
    let oracle = oracle_replay(&stream, config.bg_seed, config.cache.n_partitions as u64)?;
    if oracle.classes.len() != out.write_log.len() {
        return Ok(Some(Divergence::Length {
            mode: Mode::Dedup,
            what: "writebacks",
            got: out.write_log.len(),
            want: oracle.classes.len(),
        }));
    }
    for (i, (entry, &(_, want))) in out.write_log.iter().zip(&oracle.classes).enumerate() {
        let got = entry.class.expect("dedup mode classifies");
        if !same_class(got, want) {
            return Ok(Some(Divergence::Class {
                writeback: i,
                blk: entry.wb.blk,
                got,
                want,
            }));
        }
    }
    Ok(None)
}

/// All checks, all modes. `None` means equivalent.
pub fn verify(trace: &[TraceRecord], config: &SimConfig) -> Result<Option<Divergence>> {
    let oracle = oracle_replay(trace, config.bg_seed, config.cache.n_partitions as u64)?;
    for mode in Mode::ALL {
        if let Some(d) = check_integrity(trace, config, mode, &oracle)? {
            return Ok(Some(d));
        }
    }
    check_classes(trace, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sector_cache::CacheConfig;
    use crate::trace::{generate_trace, GenParams};

    #[test]
    fn generated_trace_is_equivalent() {
        let params = GenParams {
            seed: 11,
            n_blocks: 96,
            n_records: 1500,
            readonly_set_size: 32,
            readonly_rereads: 2,
            ..GenParams::default()
        };
        let trace = generate_trace(&params).unwrap();
        let config = SimConfig {
            cache: CacheConfig {
                capacity_bytes: 128 * 4 * 4 * 2,
                associativity: 4,
                n_partitions: 2,
                fifo_entries_per_partition: 4,
                ..CacheConfig::default()
            },
            hash_entries: Some(8),
            ..SimConfig::default()
        };
        assert_eq!(verify(&trace, &config).unwrap(), None);
    }
}
