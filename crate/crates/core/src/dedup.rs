//! Write deduplication.
//!
//! Blocks are managed at 128B granularity but may hold 1 to 4 valid sectors.
//! A block's identity for deduplication is its sector mask together with the
//! bytes of its valid sectors; two blocks are duplicates only when both match.

use std::collections::{BTreeMap, HashMap};

use md5::{Digest, Md5};

use crate::error::{Result, SimError};
use crate::metadata::{FrameAddr, FrameTable};
use crate::trace::{SectorData, SectorMask, WORDS_PER_SECTOR};

/// Largest duplicate count a hash entry can hold (2 bytes).
pub const MAX_COUNT: u16 = u16::MAX;

/// Bytes per hash store entry: 16B digest, 4B frame address, 2B count.
pub const HASH_ENTRY_BYTES: u64 = 22;

/// Whether a write fully supersedes the sectors a block already holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coverage {
    Covered,
    NeedsMerge,
}

/// `Covered` iff every sector set in `old_mask` is also set in `new_mask`.
pub fn coverage_check(new_mask: SectorMask, old_mask: SectorMask) -> Coverage {
    if new_mask.covers(old_mask) {
        Coverage::Covered
    } else {
        Coverage::NeedsMerge
    }
}

/// A block's valid sectors, packed ascending by sector then word offset.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalBlock {
    pub mask: SectorMask,
    pub words: Vec<u32>,
}

impl CanonicalBlock {
    pub fn new(mask: SectorMask, words: Vec<u32>) -> Self {
        debug_assert_eq!(words.len(), mask.count() * WORDS_PER_SECTOR);
        CanonicalBlock { mask, words }
    }

    pub fn empty() -> Self {
        CanonicalBlock {
            mask: SectorMask::EMPTY,
            words: Vec::new(),
        }
    }

    /// Every valid word equal to `word`.
    pub fn uniform(mask: SectorMask, word: u32) -> Self {
        CanonicalBlock {
            mask,
            words: vec![word; mask.count() * WORDS_PER_SECTOR],
        }
    }

    pub fn from_sectors(mask: SectorMask, mut sector: impl FnMut(usize) -> SectorData) -> Self {
        let words = mask.sectors().flat_map(|s| sector(s)).collect();
        CanonicalBlock { mask, words }
    }

    pub fn sector(&self, sector: usize) -> Option<SectorData> {
        if !self.mask.contains(sector) {
            return None;
        }
        let nth = self.mask.sectors().position(|s| s == sector)?;
        let mut out = [0u32; WORDS_PER_SECTOR];
        out.copy_from_slice(&self.words[nth * WORDS_PER_SECTOR..(nth + 1) * WORDS_PER_SECTOR]);
        Some(out)
    }
}

/// Combines a block with a partial write: the result holds `old.mask | new_mask`,
/// new bytes win where both are present.
pub fn merge(old: &CanonicalBlock, new_mask: SectorMask, new_payload: &[u32]) -> CanonicalBlock {
    let new = CanonicalBlock::new(new_mask, new_payload.to_vec());
    let mask = old.mask.union(new_mask);
    CanonicalBlock::from_sectors(mask, |s| {
        new.sector(s)
            .or_else(|| old.sector(s))
            .expect("sector comes from one side")
    })
}

/// The shared word if all valid words of the block are identical.
pub fn detect_intra(block: &CanonicalBlock) -> Option<u32> {
    let first = *block.words.first()?;
    block.words.iter().all(|&w| w == first).then_some(first)
}

/// 128-bit content digest, treated as collision-free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(pub u128);

/// MD5 over the mask byte followed by the valid words in little-endian order.
pub fn fingerprint(block: &CanonicalBlock) -> Fingerprint {
    let mut h = Md5::new();
    h.update([block.mask.bits()]);
    for w in &block.words {
        h.update(w.to_le_bytes());
    }
    Fingerprint(u128::from_be_bytes(h.finalize().into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEntry {
    pub digest: Fingerprint,
    pub ref_frame: FrameAddr,
    pub count: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DedupLookup {
    Duplicate(FrameAddr),
    Unique,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DedupInsert {
    Inserted,
    Rejected,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HashStoreStats {
    pub evictions: u64,
    pub rejections: u64,
    pub saturations: u64,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    ref_frame: FrameAddr,
    count: u16,
    stamp: u64,
}

/// Bounded on-chip table of reference blocks, LRU ordered.
///
/// Only entries whose count is 1 may be evicted. The frame-to-digest index is
/// simulator bookkeeping for decrements; it has no hardware cost model.
#[derive(Debug, Clone)]
pub struct HashStore {
    capacity: Option<usize>,
    slots: HashMap<Fingerprint, Slot>,
    lru: BTreeMap<u64, Fingerprint>,
    by_frame: HashMap<FrameAddr, Fingerprint>,
    clock: u64,
    stats: HashStoreStats,
}

impl HashStore {
    /// `None` means unbounded.
    pub fn new(capacity: Option<usize>) -> Self {
        HashStore {
            capacity,
            slots: HashMap::new(),
            lru: BTreeMap::new(),
            by_frame: HashMap::new(),
            clock: 0,
            stats: HashStoreStats::default(),
        }
    }

    /// Entries that fit in `bytes` of storage.
    pub fn entries_for_bytes(bytes: u64) -> usize {
        (bytes / HASH_ENTRY_BYTES) as usize
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn stats(&self) -> HashStoreStats {
        self.stats
    }

    pub fn get(&self, digest: Fingerprint) -> Option<HashEntry> {
        self.slots.get(&digest).map(|s| HashEntry {
            digest,
            ref_frame: s.ref_frame,
            count: s.count,
        })
    }

    pub fn entry_for_frame(&self, frame: FrameAddr) -> Option<HashEntry> {
        self.by_frame.get(&frame).and_then(|&d| self.get(d))
    }

    /// Entries from least to most recently used.
    pub fn entries_lru(&self) -> impl Iterator<Item = HashEntry> + '_ {
        self.lru.values().filter_map(|&d| self.get(d))
    }

    fn touch(&mut self, digest: Fingerprint) {
        self.clock += 1;
        let now = self.clock;
        if let Some(slot) = self.slots.get_mut(&digest) {
            self.lru.remove(&slot.stamp);
            slot.stamp = now;
            self.lru.insert(now, digest);
        }
    }

    fn remove(&mut self, digest: Fingerprint) {
        if let Some(slot) = self.slots.remove(&digest) {
            self.lru.remove(&slot.stamp);
            self.by_frame.remove(&slot.ref_frame);
        }
    }

    pub fn check_invariants(&self) -> Result<()> {
        if let Some(cap) = self.capacity {
            if self.slots.len() > cap {
                return Err(SimError::invariant("hash store over capacity"));
            }
        }
        if self.lru.len() != self.slots.len() || self.by_frame.len() != self.slots.len() {
            return Err(SimError::invariant("hash store indexes out of sync"));
        }
        for (d, s) in &self.slots {
            if s.count == 0 || self.by_frame.get(&s.ref_frame) != Some(d) || self.lru.get(&s.stamp) != Some(d) {
                return Err(SimError::invariant(format!("hash entry for frame {} inconsistent", s.ref_frame.0)));
            }
        }
        Ok(())
    }
}

/// Looks a digest up on behalf of a block currently stored at `self_frame`
/// (if any). A hit bumps the entry's count and recency.
pub fn dedup_lookup(store: &mut HashStore, digest: Fingerprint, self_frame: Option<FrameAddr>) -> DedupLookup {
    let Some(slot) = store.slots.get_mut(&digest) else {
        return DedupLookup::Unique;
    };
    if Some(slot.ref_frame) == self_frame {
        return DedupLookup::Unique;
    }
    if slot.count == MAX_COUNT {
        store.stats.saturations += 1;
        return DedupLookup::Unique;
    }
    slot.count += 1;
    let frame = slot.ref_frame;
    store.touch(digest);
    DedupLookup::Duplicate(frame)
}

/// Adds a new reference with count 1. A full store evicts its least recently
/// used entry whose count is 1; if there is none the insert is rejected.
pub fn dedup_insert(store: &mut HashStore, digest: Fingerprint, ref_frame: FrameAddr) -> DedupInsert {
    debug_assert!(!store.slots.contains_key(&digest));
    if store.capacity.is_some_and(|cap| store.slots.len() >= cap) {
        let victim = store
            .lru
            .values()
            .copied()
            .find(|d| store.slots.get(d).is_some_and(|s| s.count == 1));
        match victim {
            Some(d) => {
                store.remove(d);
                store.stats.evictions += 1;
            }
            None => {
                store.stats.rejections += 1;
                return DedupInsert::Rejected;
            }
        }
    }
    store.clock += 1;
    let stamp = store.clock;
    store.slots.insert(
        digest,
        Slot {
            ref_frame,
            count: 1,
            stamp,
        },
    );
    store.lru.insert(stamp, digest);
    store.by_frame.insert(ref_frame, digest);
    DedupInsert::Inserted
}

/// Drops one mapping to `ref_frame`. The frame table count always moves; the
/// hash entry (if it was not evicted) follows it and disappears at zero, at
/// which point an ownerless frame goes back to the free pool.
pub fn dedup_decrement(store: &mut HashStore, frames: &mut FrameTable, ref_frame: FrameAddr) -> Result<u32> {
    let remaining = frames.decrement(ref_frame)?;
    if let Some(&digest) = store.by_frame.get(&ref_frame) {
        if remaining == 0 {
            store.remove(digest);
        } else if let Some(slot) = store.slots.get_mut(&digest) {
            slot.count = remaining.min(u32::from(MAX_COUNT)) as u16;
        }
    }
    if remaining == 0 && frames.is_ownerless(ref_frame) {
        frames.release(ref_frame)?;
    }
    Ok(remaining)
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::trace::BlockAddr;

    fn m(s: &str) -> SectorMask {
        SectorMask::parse(s).unwrap()
    }

    fn fp(n: u32) -> Fingerprint {
        fingerprint(&CanonicalBlock::new(m("1000"), (0..8).map(|i| n * 8 + i).collect()))
    }

    #[test]
    fn coverage_examples() {
        for old in 0..16 {
            assert_eq!(coverage_check(SectorMask::FULL, SectorMask::from_bits(old)), Coverage::Covered);
        }
        assert_eq!(coverage_check(m("0110"), m("1011")), Coverage::NeedsMerge);
        assert_eq!(coverage_check(m("0110"), m("0110")), Coverage::Covered);
        assert_eq!(coverage_check(m("0110"), SectorMask::EMPTY), Coverage::Covered);
    }

    #[test]
    fn coverage_matches_per_sector_rule() {
        for new in 0..16u8 {
            for old in 0..16u8 {
                let rule = (0..4).all(|i| (new >> i) & 1 >= (old >> i) & 1);
                let got = coverage_check(SectorMask::from_bits(new), SectorMask::from_bits(old)) == Coverage::Covered;
                assert_eq!(rule, got, "new {new:04b} old {old:04b}");
            }
        }
    }

    #[test]
    fn merge_partial_over_existing() {
        // old 1011 = sectors {0, 2, 3}; new 0110 = sectors {1, 2}
        let old = CanonicalBlock::from_sectors(m("1011"), |s| [10 + s as u32; 8]);
        let new_payload: Vec<u32> = [[21u32; 8], [22u32; 8]].concat();
        let merged = merge(&old, m("0110"), &new_payload);
        assert_eq!(merged.mask, SectorMask::FULL);
        assert_eq!(merged.sector(0), Some([10; 8]));
        assert_eq!(merged.sector(1), Some([21; 8]));
        assert_eq!(merged.sector(2), Some([22; 8]));
        assert_eq!(merged.sector(3), Some([13; 8]));
    }

    #[test]
    fn merge_into_empty_and_overwrite() {
        let payload: Vec<u32> = (0..16).collect();
        let merged = merge(&CanonicalBlock::empty(), m("0011"), &payload);
        assert_eq!(merged, CanonicalBlock::new(m("0011"), payload.clone()));

        let old = CanonicalBlock::uniform(m("0011"), 9);
        assert_eq!(merge(&old, m("0011"), &payload).words, payload);
    }

    #[test]
    fn intra_detection() {
        assert_eq!(detect_intra(&CanonicalBlock::uniform(SectorMask::FULL, 0x3f80_0000)), Some(0x3f80_0000));
        let mut words = vec![1u32; 32];
        words[31] = 2;
        assert_eq!(detect_intra(&CanonicalBlock::new(SectorMask::FULL, words)), None);
        assert_eq!(detect_intra(&CanonicalBlock::uniform(m("0001"), 77)), Some(77));
    }

    #[test]
    fn fingerprint_includes_mask() {
        let words: Vec<u32> = (0..16).collect();
        let a = fingerprint(&CanonicalBlock::new(m("0011"), words.clone()));
        assert_eq!(a, fingerprint(&CanonicalBlock::new(m("0011"), words.clone())));
        assert_ne!(a, fingerprint(&CanonicalBlock::new(m("1100"), words)));
    }

    #[test]
    fn fingerprint_distinct_blocks_do_not_collide() {
        // Distinct 1..4-sector blocks built from a counter; brute-force set scan.
        let n = 1_000_000u32;
        let mut seen = HashSet::with_capacity(n as usize);
        for i in 0..n {
            let mask = SectorMask::from_bits((i % 15 + 1) as u8);
            let words: Vec<u32> = (0..mask.count() * 8).map(|j| i.wrapping_mul(2_654_435_761) ^ j as u32).collect();
            assert!(seen.insert(fingerprint(&CanonicalBlock::new(mask, words))), "collision at {i}");
        }
    }

    #[test]
    fn lookup_and_count() {
        let mut s = HashStore::new(Some(4));
        assert_eq!(dedup_lookup(&mut s, fp(1), None), DedupLookup::Unique);
        assert_eq!(dedup_insert(&mut s, fp(1), FrameAddr(5)), DedupInsert::Inserted);
        assert_eq!(dedup_lookup(&mut s, fp(1), None), DedupLookup::Duplicate(FrameAddr(5)));
        assert_eq!(s.get(fp(1)).unwrap().count, 2);
        // A block looking up its own stored content is not a duplicate of itself.
        assert_eq!(dedup_lookup(&mut s, fp(1), Some(FrameAddr(5))), DedupLookup::Unique);
        assert_eq!(s.get(fp(1)).unwrap().count, 2);
    }

    #[test]
    fn saturated_count_is_unique() {
        let mut s = HashStore::new(None);
        dedup_insert(&mut s, fp(1), FrameAddr(1));
        s.slots.get_mut(&fp(1)).unwrap().count = MAX_COUNT;
        assert_eq!(dedup_lookup(&mut s, fp(1), None), DedupLookup::Unique);
        assert_eq!(s.get(fp(1)).unwrap().count, MAX_COUNT);
        assert_eq!(s.stats().saturations, 1);
    }

    #[test]
    fn full_store_with_shared_entries_rejects() {
        let mut s = HashStore::new(Some(2));
        for i in 0..2 {
            dedup_insert(&mut s, fp(i), FrameAddr(i as u64));
            dedup_lookup(&mut s, fp(i), None);
        }
        assert_eq!(dedup_insert(&mut s, fp(9), FrameAddr(9)), DedupInsert::Rejected);
        assert_eq!(s.len(), 2);
        assert!(s.get(fp(9)).is_none());
    }

    #[test]
    fn eviction_takes_lru_count_one_entry() {
        // LRU order ends up 0 (count 2), 1 (count 1), 2 (count 2).
        let mut s = HashStore::new(Some(3));
        dedup_insert(&mut s, fp(0), FrameAddr(0));
        dedup_lookup(&mut s, fp(0), None);
        dedup_insert(&mut s, fp(1), FrameAddr(1));
        dedup_insert(&mut s, fp(2), FrameAddr(2));
        dedup_lookup(&mut s, fp(2), None);
        let order: Vec<(u64, u16)> = s.entries_lru().map(|e| (e.ref_frame.0, e.count)).collect();
        assert_eq!(order, vec![(0, 2), (1, 1), (2, 2)]);

        assert_eq!(dedup_insert(&mut s, fp(7), FrameAddr(7)), DedupInsert::Inserted);
        assert!(s.get(fp(1)).is_none());
        assert!(s.get(fp(0)).is_some() && s.get(fp(2)).is_some());
        assert_eq!(s.stats().evictions, 1);
        s.check_invariants().unwrap();
    }

    #[test]
    fn decrement_tracks_frame_table() {
        let mut s = HashStore::new(None);
        let mut ft = FrameTable::default();
        let home = BlockAddr(3);
        ft.vacate_home(home).unwrap();
        let f = ft.alloc(home).unwrap();
        dedup_insert(&mut s, fp(1), f);
        dedup_lookup(&mut s, fp(1), None);
        ft.increment(f).unwrap();

        assert_eq!(dedup_decrement(&mut s, &mut ft, f).unwrap(), 1);
        assert_eq!(s.get(fp(1)).unwrap().count, 1);
        assert!(!ft.is_free(f));

        assert_eq!(dedup_decrement(&mut s, &mut ft, f).unwrap(), 0);
        assert!(s.get(fp(1)).is_none());
        assert!(ft.is_free(f));

        assert!(matches!(dedup_decrement(&mut s, &mut ft, f), Err(SimError::Invariant(_))));
    }

    #[test]
    fn decrement_after_entry_eviction() {
        // Frame 0's entry is evicted while its count is 1; a later duplicate of
        // frame 1 and the rewrite of frame 0's owner still decrement correctly.
        let mut s = HashStore::new(Some(1));
        let mut ft = FrameTable::default();
        ft.vacate_home(BlockAddr(0)).unwrap();
        ft.vacate_home(BlockAddr(1)).unwrap();
        let f0 = ft.alloc(BlockAddr(0)).unwrap();
        dedup_insert(&mut s, fp(0), f0);
        let f1 = ft.alloc(BlockAddr(1)).unwrap();
        assert_eq!(dedup_insert(&mut s, fp(1), f1), DedupInsert::Inserted);
        assert!(s.entry_for_frame(f0).is_none());

        assert_eq!(ft.refcount(f0), 1);
        assert_eq!(dedup_decrement(&mut s, &mut ft, f0).unwrap(), 0);
        assert!(ft.is_free(f0));
        assert_eq!(s.get(fp(1)).unwrap().count, 1);
        s.check_invariants().unwrap();
    }
}
