//! Brute-force reference model.
//!
//! Tracks every block's bytes directly and classifies writes by exact content
//! comparison against every block currently holding the same (mask, bytes),
//! with no capacity limits and no caches. Shares only the trace types and the
//! background-content function with the simulator.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Result, SimError};
use crate::trace::{bg_sector, BlockAddr, SectorData, SectorMask, TraceRecord, SECTORS_PER_LINE, WORDS_PER_SECTOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OracleClass {
    Intra,
    /// Same mask and bytes as the oldest current holder of that content,
    /// whose last write was record `dup_of`.
    Inter { dup_of: usize },
    Unique,
}

#[derive(Debug, Clone, Default)]
struct BlockContent {
    mask: SectorMask,
    sectors: [SectorData; SECTORS_PER_LINE],
    last_write: usize,
}

impl BlockContent {
    fn key(&self, partition: u64) -> (u64, u8, Vec<u32>) {
        let words = self.mask.sectors().flat_map(|s| self.sectors[s]).collect();
        (partition, self.mask.bits(), words)
    }

    fn uniform(&self) -> bool {
        let mut words = self.mask.sectors().flat_map(|s| self.sectors[s]);
        match words.next() {
            Some(first) => words.all(|w| w == first),
            None => false,
        }
    }
}

/// Final logical contents after a replay.
#[derive(Debug, Clone, Default)]
pub struct OracleState {
    bg_seed: u64,
    blocks: HashMap<BlockAddr, BlockContent>,
}

impl OracleState {
    /// Expected bytes of one sector, or `None` when a written block never had
    /// that sector written.
    pub fn sector(&self, blk: BlockAddr, sector: usize) -> Option<SectorData> {
        match self.blocks.get(&blk) {
            Some(b) => b.mask.contains(sector).then_some(b.sectors[sector]),
            None => Some(bg_sector(self.bg_seed, blk, sector)),
        }
    }

    pub fn written_mask(&self, blk: BlockAddr) -> SectorMask {
        self.blocks.get(&blk).map(|b| b.mask).unwrap_or_default()
    }

    pub fn written_blocks(&self) -> impl Iterator<Item = BlockAddr> + '_ {
        self.blocks.keys().copied()
    }
}

#[derive(Debug, Clone, Default)]
pub struct OracleReplay {
    /// `(record index, class)` for every write, in order.
    pub classes: Vec<(usize, OracleClass)>,
    /// `(record index, bytes)` for every read, in order.
    pub reads: Vec<(usize, SectorData)>,
    pub state: OracleState,
}

impl OracleReplay {
    pub fn removed(&self) -> usize {
        self.classes.iter().filter(|(_, c)| *c != OracleClass::Unique).count()
    }
}

/// Replays `trace`, merging each write into the block's sectors and
/// classifying the merged block. Duplicates are only recognized between blocks
/// of the same partition (`blk % n_partitions`).
pub fn oracle_replay(trace: &[TraceRecord], bg_seed: u64, n_partitions: u64) -> Result<OracleReplay> {
    let n_partitions = n_partitions.max(1);
    let mut out = OracleReplay {
        state: OracleState {
            bg_seed,
            blocks: HashMap::new(),
        },
        ..OracleReplay::default()
    };
    // Blocks holding each non-uniform content, oldest holder first.
    let mut holders: HashMap<(u64, u8, Vec<u32>), Vec<BlockAddr>> = HashMap::new();

    for (index, record) in trace.iter().enumerate() {
        match record {
            TraceRecord::Read { blk, sector } => {
                let s = usize::from(*sector);
                let data = (s < SECTORS_PER_LINE)
                    .then(|| out.state.sector(*blk, s))
                    .flatten()
                    .ok_or_else(|| SimError::TraceViolation {
                        index,
                        message: format!("read of never-written sector {s} of {blk}"),
                    })?;
                out.reads.push((index, data));
            }
            TraceRecord::Write { blk, mask, payload } => {
                if mask.is_empty() || payload.len() != mask.count() * WORDS_PER_SECTOR {
                    return Err(SimError::TraceViolation {
                        index,
                        message: "malformed write".into(),
                    });
                }
                let partition = blk.0 % n_partitions;
                let mut content = out.state.blocks.remove(blk).unwrap_or_default();
                if !content.mask.is_empty() {
                    let old_key = content.key(partition);
                    if let Some(list) = holders.get_mut(&old_key) {
                        list.retain(|b| b != blk);
                        if list.is_empty() {
                            holders.remove(&old_key);
                        }
                    }
                }
                for (nth, s) in mask.sectors().enumerate() {
                    content.sectors[s].copy_from_slice(&payload[nth * WORDS_PER_SECTOR..(nth + 1) * WORDS_PER_SECTOR]);
                }
                content.mask = content.mask.union(*mask);
                content.last_write = index;
                let class = if content.uniform() {
                    OracleClass::Intra
                } else {
                    let list = holders.entry(content.key(partition)).or_default();
                    let class = match list.first() {
                        Some(first) => OracleClass::Inter {
                            dup_of: out.state.blocks[first].last_write,
                        },
                        None => OracleClass::Unique,
                    };
                    list.push(*blk);
                    class
                };
                out.state.blocks.insert(*blk, content);
                out.classes.push((index, class));
            }
        }
    }
    Ok(out)
}

/// Every materialized sector of the final state: written sectors of written
/// blocks and all sectors of `extra_blocks` that were never written.
pub fn oracle_read_all(
    state: &OracleState,
    extra_blocks: impl IntoIterator<Item = BlockAddr>,
) -> BTreeMap<(BlockAddr, usize), SectorData> {
    let mut out = BTreeMap::new();
    for (blk, content) in &state.blocks {
        for s in content.mask.sectors() {
            out.insert((*blk, s), content.sectors[s]);
        }
    }
    for blk in extra_blocks {
        if !state.blocks.contains_key(&blk) {
            for s in 0..SECTORS_PER_LINE {
                out.insert((blk, s), bg_sector(state.bg_seed, blk, s));
            }
        }
    }
    out
}
