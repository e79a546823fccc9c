//! Set-associative L2 sector cache with a read-only victim FIFO.
//!
//! Lines are 128B with four 32B sectors, each carrying its own valid and dirty
//! bit. Replacement is LRU per set. On eviction only dirty sectors are written
//! back; clean valid sectors go to the partition's FIFO when it is enabled and
//! are dropped otherwise.
//!
//! One `SectorCache` models one memory partition. Blocks map to partitions by
//! `blk % n_partitions` and to sets by `(blk / n_partitions) % sets`.
//!
//! Clean sectors may carry the physical frame their bytes were read from. The
//! controller uses that tag to find a resident copy of a reference frame for
//! cache-assisted reads.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::metadata::FrameAddr;
use crate::trace::{payload_sector, BlockAddr, LinePayload, SectorData, SectorMask, LINE_BYTES, SECTORS_PER_LINE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheConfig {
    /// Total L2 capacity across all partitions.
    pub capacity_bytes: u64,
    pub line_bytes: u64,
    pub sectors_per_line: u64,
    pub associativity: usize,
    pub n_partitions: usize,
    pub fifo_entries_per_partition: usize,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig {
            capacity_bytes: 4 << 20,
            line_bytes: LINE_BYTES as u64,
            sectors_per_line: SECTORS_PER_LINE as u64,
            associativity: 16,
            n_partitions: 1,
            fifo_entries_per_partition: 16,
        }
    }
}

impl CacheConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.line_bytes != LINE_BYTES as u64 || self.sectors_per_line != SECTORS_PER_LINE as u64 {
            return bad("only 128B lines of four 32B sectors are modeled".into());
        }
        if self.associativity == 0 || self.n_partitions == 0 {
            return bad("associativity and n_partitions must be positive".into());
        }
        let unit = self.line_bytes * self.associativity as u64 * self.n_partitions as u64;
        if self.capacity_bytes == 0 || self.capacity_bytes % unit != 0 {
            return bad(format!(
                "capacity {} not a positive multiple of line_bytes * associativity * n_partitions = {unit}",
                self.capacity_bytes
            ));
        }
        Ok(())
    }

    pub fn sets_per_partition(&self) -> usize {
        (self.capacity_bytes / (self.line_bytes * self.associativity as u64 * self.n_partitions as u64)) as usize
    }

    pub fn partition_of(&self, blk: BlockAddr) -> usize {
        (blk.0 % self.n_partitions as u64) as usize
    }
}

/// Dirty sectors of an evicted line, bound for the memory controller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WritebackRequest {
    pub blk: BlockAddr,
    pub mask: SectorMask,
    pub payload: LinePayload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    HitCache(SectorData),
    HitFifo(SectorData),
    Miss,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FifoEntry {
    pub blk: BlockAddr,
    pub sector: u8,
    pub data: SectorData,
    /// Frame tag carried over from the cache, restored on a FIFO hit.
    pub src: Option<FrameAddr>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Slot {
    valid: bool,
    dirty: bool,
    data: SectorData,
    src: Option<FrameAddr>,
}

#[derive(Debug, Clone)]
struct Line {
    blk: BlockAddr,
    slots: [Slot; SECTORS_PER_LINE],
    last_use: u64,
}

impl Line {
    fn new(blk: BlockAddr) -> Self {
        Line {
            blk,
            slots: [Slot::default(); SECTORS_PER_LINE],
            last_use: 0,
        }
    }

    fn dirty_mask(&self) -> SectorMask {
        let mut m = SectorMask::EMPTY;
        for (s, slot) in self.slots.iter().enumerate() {
            if slot.dirty {
                m.insert(s);
            }
        }
        m
    }
}

type FrameIndex = HashMap<(FrameAddr, u8), BTreeSet<BlockAddr>>;

fn unindex(index: &mut FrameIndex, frame: FrameAddr, sector: usize, blk: BlockAddr) {
    let key = (frame, sector as u8);
    if let Some(set) = index.get_mut(&key) {
        set.remove(&blk);
        if set.is_empty() {
            index.remove(&key);
        }
    }
}

#[derive(Debug, Clone)]
pub struct SectorCache {
    n_sets: usize,
    associativity: usize,
    n_partitions: u64,
    sets: Vec<Vec<Line>>,
    fifo: VecDeque<FifoEntry>,
    fifo_capacity: usize,
    clock: u64,
    frame_index: FrameIndex,
}

impl SectorCache {
    /// One partition of the L2. `fifo_enabled` selects the victim FIFO; when
    /// false clean victims are dropped.
    pub fn new(cfg: &CacheConfig, fifo_enabled: bool) -> Result<Self> {
        cfg.validate()?;
        let n_sets = cfg.sets_per_partition();
        Ok(SectorCache {
            n_sets,
            associativity: cfg.associativity,
            n_partitions: cfg.n_partitions as u64,
            sets: vec![Vec::with_capacity(cfg.associativity); n_sets],
            fifo: VecDeque::with_capacity(cfg.fifo_entries_per_partition),
            fifo_capacity: if fifo_enabled { cfg.fifo_entries_per_partition } else { 0 },
            clock: 0,
            frame_index: HashMap::new(),
        })
    }

    fn set_of(&self, blk: BlockAddr) -> usize {
        ((blk.0 / self.n_partitions) % self.n_sets as u64) as usize
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    fn find(&self, blk: BlockAddr) -> Option<(usize, usize)> {
        let set = self.set_of(blk);
        self.sets[set].iter().position(|l| l.blk == blk).map(|way| (set, way))
    }

    fn fifo_take(&mut self, blk: BlockAddr, sector: usize) -> Option<FifoEntry> {
        let pos = self.fifo.iter().position(|e| e.blk == blk && usize::from(e.sector) == sector)?;
        self.fifo.remove(pos)
    }

    fn fifo_push(&mut self, entry: FifoEntry) {
        if self.fifo_capacity == 0 {
            return;
        }
        if self.fifo.len() == self.fifo_capacity {
            self.fifo.pop_front();
        }
        self.fifo.push_back(entry);
    }

    /// Retires a line: dirty sectors become a writeback, clean valid sectors go
    /// to the FIFO.
    fn retire(&mut self, line: Line) -> Option<WritebackRequest> {
        let mut payload = Vec::new();
        for (s, slot) in line.slots.iter().enumerate() {
            if let Some(frame) = slot.src {
                unindex(&mut self.frame_index, frame, s, line.blk);
            }
            if !slot.valid {
                continue;
            }
            if slot.dirty {
                payload.extend_from_slice(&slot.data);
            } else {
                self.fifo_push(FifoEntry {
                    blk: line.blk,
                    sector: s as u8,
                    data: slot.data,
                    src: slot.src,
                });
            }
        }
        let mask = line.dirty_mask();
        (!mask.is_empty()).then(|| WritebackRequest {
            blk: line.blk,
            mask,
            payload,
        })
    }

    /// Returns `(set, way)` of the line for `blk`, allocating (and evicting the
    /// LRU line if the set is full) when absent.
    fn ensure_line(&mut self, blk: BlockAddr, out: &mut Vec<WritebackRequest>) -> (usize, usize) {
        if let Some(hit) = self.find(blk) {
            return hit;
        }
        let set = self.set_of(blk);
        if self.sets[set].len() == self.associativity {
            let victim_way = self.sets[set]
                .iter()
                .enumerate()
                .min_by_key(|(_, l)| l.last_use)
                .map(|(w, _)| w)
                .expect("full set has lines");
            let victim = self.sets[set].swap_remove(victim_way);
            if let Some(wb) = self.retire(victim) {
                out.push(wb);
            }
        }
        self.sets[set].push(Line::new(blk));
        (set, self.sets[set].len() - 1)
    }

    /// Cache first, then FIFO. A FIFO hit moves the sector back into the
    /// cache as clean, which may evict a line.
    pub fn lookup_sector(&mut self, blk: BlockAddr, sector: usize) -> (Lookup, Vec<WritebackRequest>) {
        if let Some((set, way)) = self.find(blk) {
            let slot = self.sets[set][way].slots[sector];
            if slot.valid {
                let now = self.tick();
                self.sets[set][way].last_use = now;
                return (Lookup::HitCache(slot.data), Vec::new());
            }
        }
        if let Some(e) = self.fifo_take(blk, sector) {
            let wbs = self.fill_sector_from(blk, sector, e.data, true, e.src);
            return (Lookup::HitFifo(e.data), wbs);
        }
        (Lookup::Miss, Vec::new())
    }

    /// Write-allocate without fetch: written sectors become valid and dirty,
    /// other sectors of a newly allocated line stay invalid.
    pub fn write_sectors(&mut self, blk: BlockAddr, mask: SectorMask, payload: &[u32]) -> Vec<WritebackRequest> {
        debug_assert_eq!(payload.len(), mask.count() * 8);
        let mut out = Vec::new();
        for s in mask.sectors() {
            self.fifo_take(blk, s);
        }
        let (set, way) = self.ensure_line(blk, &mut out);
        let now = self.tick();
        let line = &mut self.sets[set][way];
        line.last_use = now;
        for (nth, s) in mask.sectors().enumerate() {
            let slot = &mut line.slots[s];
            if let Some(frame) = slot.src.take() {
                unindex(&mut self.frame_index, frame, s, blk);
            }
            *slot = Slot {
                valid: true,
                dirty: true,
                data: payload_sector(payload, nth),
                src: None,
            };
        }
        out
    }

    pub fn fill_sector(&mut self, blk: BlockAddr, sector: usize, data: SectorData, clean: bool) -> Vec<WritebackRequest> {
        self.fill_sector_from(blk, sector, data, clean, None)
    }

    /// Like [`fill_sector`](Self::fill_sector), tagging a clean sector with the
    /// frame its bytes came from.
    pub fn fill_sector_from(
        &mut self,
        blk: BlockAddr,
        sector: usize,
        data: SectorData,
        clean: bool,
        src: Option<FrameAddr>,
    ) -> Vec<WritebackRequest> {
        let mut out = Vec::new();
        self.fifo_take(blk, sector);
        let (set, way) = self.ensure_line(blk, &mut out);
        let now = self.tick();
        let line = &mut self.sets[set][way];
        line.last_use = now;
        let slot = &mut line.slots[sector];
        if let Some(frame) = slot.src.take() {
            unindex(&mut self.frame_index, frame, sector, blk);
        }
        let src = if clean { src } else { None };
        *slot = Slot {
            valid: true,
            dirty: !clean,
            data,
            src,
        };
        if let Some(frame) = src {
            self.frame_index.entry((frame, sector as u8)).or_default().insert(blk);
        }
        out
    }

    /// Clean fill used by cache-assisted reads.
    pub fn copy_into(&mut self, blk_dst: BlockAddr, sector: usize, data: SectorData) -> Vec<WritebackRequest> {
        self.fill_sector_from(blk_dst, sector, data, true, None)
    }

    /// Data of a resident, valid, clean sector. Does not touch recency.
    pub fn probe_clean_sector(&self, blk: BlockAddr, sector: usize) -> Option<SectorData> {
        let (set, way) = self.find(blk)?;
        let slot = &self.sets[set][way].slots[sector];
        (slot.valid && !slot.dirty).then_some(slot.data)
    }

    /// A resident clean copy of `sector` of physical frame `frame`, under any
    /// logical alias. Does not touch recency.
    pub fn probe_frame_sector(&self, frame: FrameAddr, sector: usize) -> Option<SectorData> {
        let blks = self.frame_index.get(&(frame, sector as u8))?;
        blks.iter().find_map(|&blk| self.probe_clean_sector(blk, sector))
    }

    /// Drops every frame tag pointing at `frame`, in the cache and the FIFO.
    /// Called when the frame is handed new contents.
    pub fn untag_frame(&mut self, frame: FrameAddr) {
        for e in self.fifo.iter_mut().filter(|e| e.src == Some(frame)) {
            e.src = None;
        }
        for s in 0..SECTORS_PER_LINE {
            let Some(blks) = self.frame_index.remove(&(frame, s as u8)) else {
                continue;
            };
            for blk in blks {
                if let Some((set, way)) = self.find(blk) {
                    self.sets[set][way].slots[s].src = None;
                }
            }
        }
    }

    /// Every tagged clean sector, cached or queued in the FIFO, as
    /// `(blk, sector, frame, data)`.
    pub fn tagged_sectors(&self) -> impl Iterator<Item = (BlockAddr, usize, FrameAddr, SectorData)> + '_ {
        let cached = self.sets.iter().flatten().flat_map(|line| {
            line.slots
                .iter()
                .enumerate()
                .filter_map(move |(s, slot)| slot.src.map(|f| (line.blk, s, f, slot.data)))
        });
        let queued = self
            .fifo
            .iter()
            .filter_map(|e| e.src.map(|f| (e.blk, usize::from(e.sector), f, e.data)));
        cached.chain(queued)
    }

    /// Evicts every line, oldest first, returning the writebacks.
    pub fn flush(&mut self) -> Vec<WritebackRequest> {
        let mut lines: Vec<Line> = self.sets.iter_mut().flat_map(|s| s.drain(..)).collect();
        lines.sort_by_key(|l| l.last_use);
        lines.into_iter().filter_map(|l| self.retire(l)).collect()
    }

    pub fn contains_sector(&self, blk: BlockAddr, sector: usize) -> bool {
        self.find(blk).is_some_and(|(set, way)| self.sets[set][way].slots[sector].valid)
    }

    pub fn is_dirty(&self, blk: BlockAddr, sector: usize) -> bool {
        self.find(blk).is_some_and(|(set, way)| self.sets[set][way].slots[sector].dirty)
    }

    pub fn fifo_contains(&self, blk: BlockAddr, sector: usize) -> bool {
        self.fifo.iter().any(|e| e.blk == blk && usize::from(e.sector) == sector)
    }

    /// FIFO contents, oldest first.
    pub fn fifo_entries(&self) -> impl Iterator<Item = &FifoEntry> {
        self.fifo.iter()
    }

    pub fn resident_lines(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    /// Checks the structural invariants: dirty implies valid, no block is
    /// both cached and in the FIFO, and the frame index matches the tags.
    pub fn check_invariants(&self) -> Result<()> {
        let mut tagged = 0usize;
        for set in &self.sets {
            if set.len() > self.associativity {
                return Err(SimError::invariant("set holds more lines than ways"));
            }
            for line in set {
                for (s, slot) in line.slots.iter().enumerate() {
                    if slot.dirty && !slot.valid {
                        return Err(SimError::invariant(format!("{} sector {s} dirty but invalid", line.blk)));
                    }
                    if slot.valid && self.fifo_contains(line.blk, s) {
                        return Err(SimError::invariant(format!("{} sector {s} in cache and FIFO", line.blk)));
                    }
                    if let Some(frame) = slot.src {
                        tagged += 1;
                        let indexed = self
                            .frame_index
                            .get(&(frame, s as u8))
                            .is_some_and(|b| b.contains(&line.blk));
                        if !indexed || slot.dirty || !slot.valid {
                            return Err(SimError::invariant(format!("bad frame tag on {} sector {s}", line.blk)));
                        }
                    }
                }
            }
        }
        let indexed: usize = self.frame_index.values().map(BTreeSet::len).sum();
        if indexed != tagged {
            return Err(SimError::invariant("frame index holds stale entries"));
        }
        if self.fifo.len() > self.fifo_capacity {
            return Err(SimError::invariant("FIFO over capacity"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(sets: usize, assoc: usize, fifo: usize) -> CacheConfig {
        CacheConfig {
            capacity_bytes: (sets * assoc * 128) as u64,
            associativity: assoc,
            n_partitions: 1,
            fifo_entries_per_partition: fifo,
            ..CacheConfig::default()
        }
    }

    fn sector(v: u32) -> SectorData {
        [v; 8]
    }

    #[test]
    fn default_geometry() {
        let c = CacheConfig::default();
        c.validate().unwrap();
        assert_eq!(c.sets_per_partition(), 2048);
        let full = CacheConfig {
            n_partitions: 8,
            ..c
        };
        assert_eq!(full.sets_per_partition(), 256);
        assert!(CacheConfig {
            capacity_bytes: 1000,
            ..CacheConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn lookup_miss_then_hit() {
        let mut c = SectorCache::new(&cfg(4, 2, 4), true).unwrap();
        assert_eq!(c.lookup_sector(BlockAddr(7), 0).0, Lookup::Miss);
        assert!(c.fill_sector(BlockAddr(7), 0, sector(9), true).is_empty());
        assert_eq!(c.lookup_sector(BlockAddr(7), 0).0, Lookup::HitCache(sector(9)));
        assert_eq!(c.lookup_sector(BlockAddr(7), 1).0, Lookup::Miss);
    }

    #[test]
    fn clean_victim_goes_through_fifo() {
        // 1 set, 1 way: filling block 2 evicts block 1.
        let mut c = SectorCache::new(&cfg(1, 1, 4), true).unwrap();
        c.fill_sector(BlockAddr(1), 0, sector(11), true);
        assert!(c.fill_sector(BlockAddr(2), 0, sector(22), true).is_empty());
        assert!(c.fifo_contains(BlockAddr(1), 0));
        let (res, wbs) = c.lookup_sector(BlockAddr(1), 0);
        assert_eq!(res, Lookup::HitFifo(sector(11)));
        assert!(wbs.is_empty());
        // Promotion evicted block 2 into the FIFO.
        assert!(!c.fifo_contains(BlockAddr(1), 0));
        assert!(c.fifo_contains(BlockAddr(2), 0));
        assert_eq!(c.lookup_sector(BlockAddr(1), 0).0, Lookup::HitCache(sector(11)));
        c.check_invariants().unwrap();
    }

    #[test]
    fn fifo_disabled_drops_clean_victims() {
        let mut c = SectorCache::new(&cfg(1, 1, 4), false).unwrap();
        c.fill_sector(BlockAddr(1), 0, sector(11), true);
        c.fill_sector(BlockAddr(2), 0, sector(22), true);
        assert_eq!(c.lookup_sector(BlockAddr(1), 0).0, Lookup::Miss);
        assert_eq!(c.fifo_entries().count(), 0);
    }

    #[test]
    fn write_to_empty_set_emits_nothing() {
        let mut c = SectorCache::new(&cfg(1, 16, 4), true).unwrap();
        assert!(c.write_sectors(BlockAddr(3), SectorMask::FULL, &[5; 32]).is_empty());
        assert!(c.is_dirty(BlockAddr(3), 2));
    }

    #[test]
    fn seventeenth_dirty_line_evicts_exactly_one() {
        let mut c = SectorCache::new(&cfg(1, 16, 16), true).unwrap();
        let mut wbs = Vec::new();
        for b in 0..17u64 {
            let mask = SectorMask::from_bits(0b0101);
            wbs.extend(c.write_sectors(BlockAddr(b), mask, &[b as u32; 16]));
        }
        assert_eq!(wbs.len(), 1);
        assert_eq!(wbs[0].blk, BlockAddr(0));
        assert_eq!(wbs[0].mask, SectorMask::from_bits(0b0101));
        assert_eq!(wbs[0].payload, vec![0; 16]);
    }

    #[test]
    fn writeback_carries_only_dirty_sectors() {
        let mut c = SectorCache::new(&cfg(1, 1, 4), true).unwrap();
        c.write_sectors(BlockAddr(1), SectorMask::single(0), &[7; 8]);
        c.fill_sector(BlockAddr(1), 1, sector(8), true);
        let wbs = c.fill_sector(BlockAddr(2), 0, sector(1), true);
        assert_eq!(wbs.len(), 1);
        assert_eq!(wbs[0].mask.to_string(), "1000");
        assert_eq!(wbs[0].payload, vec![7; 8]);
        assert!(c.fifo_contains(BlockAddr(1), 1));
        assert!(!c.fifo_contains(BlockAddr(1), 0));
    }

    #[test]
    fn fill_same_sector_twice_keeps_one_copy() {
        let mut c = SectorCache::new(&cfg(2, 2, 4), true).unwrap();
        c.fill_sector(BlockAddr(4), 3, sector(1), true);
        c.fill_sector(BlockAddr(4), 3, sector(2), true);
        assert_eq!(c.resident_lines(), 1);
        assert_eq!(c.probe_clean_sector(BlockAddr(4), 3), Some(sector(2)));
    }

    #[test]
    fn fill_forcing_eviction_writes_back_victim() {
        let mut c = SectorCache::new(&cfg(1, 2, 4), true).unwrap();
        c.fill_sector(BlockAddr(1), 0, sector(1), false);
        c.fill_sector(BlockAddr(2), 0, sector(2), true);
        let wbs = c.fill_sector(BlockAddr(3), 0, sector(3), true);
        assert_eq!(wbs.len(), 1);
        assert_eq!(wbs[0].blk, BlockAddr(1));
    }

    #[test]
    fn probe_sees_only_clean_resident() {
        let mut c = SectorCache::new(&cfg(2, 2, 4), true).unwrap();
        c.fill_sector(BlockAddr(1), 0, sector(1), true);
        c.write_sectors(BlockAddr(1), SectorMask::single(1), &[2; 8]);
        assert_eq!(c.probe_clean_sector(BlockAddr(1), 0), Some(sector(1)));
        assert_eq!(c.probe_clean_sector(BlockAddr(1), 1), None);
        assert_eq!(c.probe_clean_sector(BlockAddr(9), 0), None);
    }

    #[test]
    fn probe_does_not_touch_recency() {
        let mut c = SectorCache::new(&cfg(1, 2, 0), false).unwrap();
        c.fill_sector(BlockAddr(1), 0, sector(1), true);
        c.fill_sector(BlockAddr(2), 0, sector(2), true);
        assert!(c.probe_clean_sector(BlockAddr(1), 0).is_some());
        c.fill_sector(BlockAddr(3), 0, sector(3), true);
        // Block 1 stayed LRU despite the probe.
        assert!(!c.contains_sector(BlockAddr(1), 0));
        assert!(c.contains_sector(BlockAddr(2), 0));
    }

    #[test]
    fn frame_tags_follow_clean_state() {
        let mut c = SectorCache::new(&cfg(2, 2, 4), true).unwrap();
        let f = FrameAddr(40);
        c.fill_sector_from(BlockAddr(1), 2, sector(5), true, Some(f));
        assert_eq!(c.probe_frame_sector(f, 2), Some(sector(5)));
        assert_eq!(c.probe_frame_sector(f, 1), None);
        c.write_sectors(BlockAddr(1), SectorMask::single(2), &[6; 8]);
        assert_eq!(c.probe_frame_sector(f, 2), None);
        c.check_invariants().unwrap();
    }

    #[test]
    fn untag_frame_clears_aliases() {
        let mut c = SectorCache::new(&cfg(2, 2, 4), true).unwrap();
        let f = FrameAddr(9);
        c.fill_sector_from(BlockAddr(1), 0, sector(5), true, Some(f));
        c.fill_sector_from(BlockAddr(2), 0, sector(5), true, Some(f));
        c.fill_sector_from(BlockAddr(2), 1, sector(6), true, Some(FrameAddr(3)));
        assert_eq!(c.tagged_sectors().count(), 3);
        c.untag_frame(f);
        assert_eq!(c.probe_frame_sector(f, 0), None);
        assert_eq!(c.probe_frame_sector(FrameAddr(3), 1), Some(sector(6)));
        assert!(c.contains_sector(BlockAddr(1), 0));
        assert_eq!(c.tagged_sectors().count(), 1);
        c.check_invariants().unwrap();
    }

    #[test]
    fn fifo_hit_restores_frame_tag() {
        let mut c = SectorCache::new(&cfg(1, 1, 4), true).unwrap();
        let f = FrameAddr(7);
        c.fill_sector_from(BlockAddr(1), 0, sector(1), true, Some(f));
        c.fill_sector(BlockAddr(2), 0, sector(2), true);
        assert_eq!(c.probe_frame_sector(f, 0), None);
        assert_eq!(c.tagged_sectors().count(), 1, "queued entry keeps its tag");
        let (hit, _) = c.lookup_sector(BlockAddr(1), 0);
        assert_eq!(hit, Lookup::HitFifo(sector(1)));
        assert_eq!(c.probe_frame_sector(f, 0), Some(sector(1)));
        c.check_invariants().unwrap();

        // Evict again, then retag the frame while the copy is queued.
        c.fill_sector(BlockAddr(2), 0, sector(2), true);
        c.untag_frame(f);
        c.lookup_sector(BlockAddr(1), 0);
        assert_eq!(c.probe_frame_sector(f, 0), None);
        assert_eq!(c.tagged_sectors().count(), 0);
    }

    #[test]
    fn write_invalidates_fifo_copy() {
        let mut c = SectorCache::new(&cfg(1, 1, 4), true).unwrap();
        c.fill_sector(BlockAddr(1), 0, sector(1), true);
        c.fill_sector(BlockAddr(2), 0, sector(2), true);
        assert!(c.fifo_contains(BlockAddr(1), 0));
        c.write_sectors(BlockAddr(1), SectorMask::single(0), &[3; 8]);
        assert!(!c.fifo_contains(BlockAddr(1), 0));
        c.check_invariants().unwrap();
    }

    #[test]
    fn lru_thrash_on_assoc_plus_one() {
        let assoc = 4;
        let mut c = SectorCache::new(&cfg(1, assoc, 0), false).unwrap();
        let mut misses_after_warmup = 0;
        let rounds = 5;
        for round in 0..rounds {
            for b in 0..=assoc as u64 {
                let (res, _) = c.lookup_sector(BlockAddr(b), 0);
                if res == Lookup::Miss {
                    c.fill_sector(BlockAddr(b), 0, sector(b as u32), true);
                    if round > 0 {
                        misses_after_warmup += 1;
                    }
                }
            }
        }
        assert_eq!(misses_after_warmup, (rounds - 1) * (assoc + 1));
    }

    #[test]
    fn flush_writes_back_all_dirty() {
        let mut c = SectorCache::new(&cfg(2, 2, 8), true).unwrap();
        c.write_sectors(BlockAddr(0), SectorMask::FULL, &[1; 32]);
        c.write_sectors(BlockAddr(1), SectorMask::single(3), &[2; 8]);
        c.fill_sector(BlockAddr(2), 0, sector(3), true);
        let wbs = c.flush();
        assert_eq!(wbs.len(), 2);
        assert_eq!(c.resident_lines(), 0);
        assert!(c.fifo_contains(BlockAddr(2), 0));
    }
}
