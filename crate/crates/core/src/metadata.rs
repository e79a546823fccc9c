//! Per-block metadata, the physical frame table, and the on-chip metadata
//! caches.
//!
//! Every block owns three persistent fields: a 2-bit type flag, a 4-byte
//! mapping entry and a 4-bit stored-sector mask. They live in flat DRAM tables
//! indexed by the block's index within its partition; the controller reaches
//! them through small LRU caches that move 32B lines, so a miss is one
//! metadata DRAM read and evicting a dirty line is one metadata DRAM write.
//!
//! Frames are 128B physical slots. Frame `n` is the home of block `n`; a block
//! that has never been written keeps its initial contents there.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::trace::{BlockAddr, SectorMask};

pub const META_LINE_BYTES: u64 = 32;

/// 128B physical frame index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrameAddr(pub u64);

impl FrameAddr {
    pub fn home_of(blk: BlockAddr) -> Self {
        FrameAddr(blk.0)
    }

    pub fn home_block(self) -> BlockAddr {
        BlockAddr(self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TypeFlag {
    /// Never written; contents are the initial memory image at the home frame.
    #[default]
    ReadOnly,
    /// All valid words equal; the word sits in the mapping entry.
    Intra,
    /// Mapped onto another block's frame.
    Inter,
    /// Owns its frame (a reference for others, or simply not a duplicate).
    Reference,
}

impl TypeFlag {
    pub fn code(self) -> u8 {
        match self {
            TypeFlag::ReadOnly => 0b00,
            TypeFlag::Intra => 0b01,
            TypeFlag::Inter => 0b10,
            TypeFlag::Reference => 0b11,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0b00 => TypeFlag::ReadOnly,
            0b01 => TypeFlag::Intra,
            0b10 => TypeFlag::Inter,
            0b11 => TypeFlag::Reference,
            _ => return None,
        })
    }
}

impl fmt::Display for TypeFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02b}", self.code())
    }
}

impl Serialize for TypeFlag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TypeFlag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        u8::from_str_radix(&s, 2)
            .ok()
            .filter(|_| s.len() == 2)
            .and_then(TypeFlag::from_code)
            .ok_or_else(|| serde::de::Error::custom(format!("bad type flag {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaKind {
    Addr,
    Type,
    Mask,
}

impl MetaKind {
    pub const ALL: [MetaKind; 3] = [MetaKind::Addr, MetaKind::Type, MetaKind::Mask];

    /// Entries sharing one 32B metadata line.
    pub fn entries_per_line(self) -> u64 {
        match self {
            MetaKind::Addr => 8,   // 4B each
            MetaKind::Type => 128, // 2 bits each
            MetaKind::Mask => 64,  // 4 bits each
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetaValue {
    Addr(u32),
    Type(TypeFlag),
    Mask(SectorMask),
}

impl MetaValue {
    pub fn kind(self) -> MetaKind {
        match self {
            MetaValue::Addr(_) => MetaKind::Addr,
            MetaValue::Type(_) => MetaKind::Type,
            MetaValue::Mask(_) => MetaKind::Mask,
        }
    }
}

/// Per-partition metadata cache budgets in bytes; `null` means unbounded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetadataCacheConfig {
    pub addr_cache: Option<u64>,
    pub type_cache: Option<u64>,
    pub mask_cache: Option<u64>,
    pub line_bytes: u64,
}

impl Default for MetadataCacheConfig {
    fn default() -> Self {
        MetadataCacheConfig {
            addr_cache: Some(48 << 10),
            type_cache: Some(5 << 10),
            mask_cache: Some(10 << 10),
            line_bytes: META_LINE_BYTES,
        }
    }
}

impl MetadataCacheConfig {
    pub fn unbounded() -> Self {
        MetadataCacheConfig {
            addr_cache: None,
            type_cache: None,
            mask_cache: None,
            line_bytes: META_LINE_BYTES,
        }
    }

    pub fn budget(&self, kind: MetaKind) -> Option<u64> {
        match kind {
            MetaKind::Addr => self.addr_cache,
            MetaKind::Type => self.type_cache,
            MetaKind::Mask => self.mask_cache,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.line_bytes != META_LINE_BYTES {
            return Err(SimError::Config("metadata line size is fixed at 32 bytes".into()));
        }
        for kind in MetaKind::ALL {
            if let Some(b) = self.budget(kind) {
                if b < META_LINE_BYTES {
                    return Err(SimError::Config(format!("{kind:?} metadata cache budget {b}B holds no 32B line")));
                }
            }
        }
        Ok(())
    }
}

/// What one metadata access cost in DRAM traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MetaOutcome {
    pub hit: bool,
    pub dram_reads: u32,
    pub dram_writes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetaCacheStats {
    pub hits: u64,
    pub misses: u64,
    pub dirty_evictions: u64,
}

impl MetaCacheStats {
    pub fn hit_rate(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }

    pub fn add(&mut self, other: &MetaCacheStats) {
        self.hits += other.hits;
        self.misses += other.misses;
        self.dirty_evictions += other.dirty_evictions;
    }
}

#[derive(Debug, Clone, Copy)]
struct MetaLine {
    stamp: u64,
    dirty: bool,
}

/// Fully associative LRU cache of 32B metadata lines. Writes allocate with a
/// fetch and mark the line dirty.
#[derive(Debug, Clone)]
pub struct MetaCache {
    capacity_lines: Option<usize>,
    lines: HashMap<u64, MetaLine>,
    lru: BTreeMap<u64, u64>,
    clock: u64,
    stats: MetaCacheStats,
}

impl MetaCache {
    pub fn new(budget_bytes: Option<u64>) -> Self {
        MetaCache {
            capacity_lines: budget_bytes.map(|b| (b / META_LINE_BYTES) as usize),
            lines: HashMap::new(),
            lru: BTreeMap::new(),
            clock: 0,
            stats: MetaCacheStats::default(),
        }
    }

    pub fn access(&mut self, line: u64, write: bool) -> MetaOutcome {
        self.clock += 1;
        let now = self.clock;
        if let Some(entry) = self.lines.get_mut(&line) {
            self.lru.remove(&entry.stamp);
            entry.stamp = now;
            entry.dirty |= write;
            self.lru.insert(now, line);
            self.stats.hits += 1;
            return MetaOutcome {
                hit: true,
                ..MetaOutcome::default()
            };
        }
        self.stats.misses += 1;
        let mut out = MetaOutcome {
            hit: false,
            dram_reads: 1,
            dram_writes: 0,
        };
        if self.capacity_lines.is_some_and(|cap| self.lines.len() >= cap) {
            if let Some((_, victim)) = self.lru.pop_first() {
                let evicted = self.lines.remove(&victim).expect("lru and lines agree");
                if evicted.dirty {
                    self.stats.dirty_evictions += 1;
                    out.dram_writes = 1;
                }
            }
        }
        self.lines.insert(line, MetaLine { stamp: now, dirty: write });
        self.lru.insert(now, line);
        out
    }

    pub fn contains(&self, line: u64) -> bool {
        self.lines.contains_key(&line)
    }

    pub fn stats(&self) -> MetaCacheStats {
        self.stats
    }
}

/// Physical frame bookkeeping for one partition.
///
/// A frame is free iff no block maps to it and its home block no longer keeps
/// its initial contents there.
#[derive(Debug, Clone, Default)]
pub struct FrameTable {
    refcount: HashMap<FrameAddr, u32>,
    vacated: HashSet<FrameAddr>,
    free: BTreeSet<FrameAddr>,
}

impl FrameTable {
    pub fn refcount(&self, frame: FrameAddr) -> u32 {
        self.refcount.get(&frame).copied().unwrap_or(0)
    }

    pub fn is_free(&self, frame: FrameAddr) -> bool {
        self.free.contains(&frame)
    }

    /// Whether the frame's home block still keeps its initial contents there.
    pub fn home_in_use(&self, frame: FrameAddr) -> bool {
        !self.vacated.contains(&frame)
    }

    pub fn is_ownerless(&self, frame: FrameAddr) -> bool {
        self.refcount(frame) == 0 && !self.home_in_use(frame)
    }

    pub fn free_frames(&self) -> impl Iterator<Item = FrameAddr> + '_ {
        self.free.iter().copied()
    }

    pub fn live_frames(&self) -> impl Iterator<Item = (FrameAddr, u32)> + '_ {
        self.refcount.iter().map(|(&f, &c)| (f, c))
    }

    /// Called once, when `blk` is first written and stops using its home frame
    /// for its initial contents.
    pub fn vacate_home(&mut self, blk: BlockAddr) -> Result<()> {
        let home = FrameAddr::home_of(blk);
        if !self.vacated.insert(home) {
            return Err(SimError::invariant(format!("home frame of {blk} vacated twice")));
        }
        if self.refcount(home) == 0 {
            self.free.insert(home);
        }
        Ok(())
    }

    /// Takes the requesting block's home frame when it is free, otherwise the
    /// lowest free frame.
    pub fn alloc(&mut self, requester: BlockAddr) -> Result<FrameAddr> {
        let home = FrameAddr::home_of(requester);
        let frame = if self.free.remove(&home) {
            home
        } else {
            self.free
                .pop_first()
                .ok_or_else(|| SimError::invariant(format!("frame pool exhausted allocating for {requester}")))?
        };
        self.refcount.insert(frame, 1);
        Ok(frame)
    }

    /// Re-occupies a specific free frame.
    pub fn take(&mut self, frame: FrameAddr) -> Result<()> {
        if !self.free.remove(&frame) {
            return Err(SimError::invariant(format!("frame {} is not free", frame.0)));
        }
        self.refcount.insert(frame, 1);
        Ok(())
    }

    pub fn increment(&mut self, frame: FrameAddr) -> Result<u32> {
        let c = self
            .refcount
            .get_mut(&frame)
            .ok_or_else(|| SimError::invariant(format!("increment of untracked frame {}", frame.0)))?;
        *c += 1;
        Ok(*c)
    }

    pub fn decrement(&mut self, frame: FrameAddr) -> Result<u32> {
        let c = self
            .refcount
            .get_mut(&frame)
            .ok_or_else(|| SimError::invariant(format!("decrement of untracked frame {}", frame.0)))?;
        *c -= 1;
        let left = *c;
        if left == 0 {
            self.refcount.remove(&frame);
        }
        Ok(left)
    }

    /// Returns an unreferenced frame to the pool. `Ok(false)` when the home
    /// block still stores there; releasing a referenced or already free frame
    /// is a fault.
    pub fn release(&mut self, frame: FrameAddr) -> Result<bool> {
        if self.refcount(frame) > 0 {
            return Err(SimError::invariant(format!("release of live frame {}", frame.0)));
        }
        if self.free.contains(&frame) {
            return Err(SimError::invariant(format!("double release of frame {}", frame.0)));
        }
        if self.home_in_use(frame) {
            return Ok(false);
        }
        self.free.insert(frame);
        Ok(true)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockMeta {
    pub blk: BlockAddr,
    pub flag: TypeFlag,
    pub mapping: u32,
    pub mask: SectorMask,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub frame: FrameAddr,
    pub refcount: u32,
}

/// Post-run snapshot of every touched block and every referenced frame.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetadataDump {
    pub blocks: Vec<BlockMeta>,
    pub frames: Vec<FrameMeta>,
}

/// Metadata of one partition: the DRAM tables plus their on-chip caches.
#[derive(Debug, Clone)]
pub struct MetadataStore {
    n_partitions: u64,
    flags: HashMap<BlockAddr, TypeFlag>,
    mapping: HashMap<BlockAddr, u32>,
    masks: HashMap<BlockAddr, SectorMask>,
    addr_cache: MetaCache,
    type_cache: MetaCache,
    mask_cache: MetaCache,
    pub frames: FrameTable,
}

impl MetadataStore {
    pub fn new(cfg: &MetadataCacheConfig, n_partitions: usize) -> Self {
        MetadataStore {
            n_partitions: n_partitions.max(1) as u64,
            flags: HashMap::new(),
            mapping: HashMap::new(),
            masks: HashMap::new(),
            addr_cache: MetaCache::new(cfg.addr_cache),
            type_cache: MetaCache::new(cfg.type_cache),
            mask_cache: MetaCache::new(cfg.mask_cache),
            frames: FrameTable::default(),
        }
    }

    fn cache_mut(&mut self, kind: MetaKind) -> &mut MetaCache {
        match kind {
            MetaKind::Addr => &mut self.addr_cache,
            MetaKind::Type => &mut self.type_cache,
            MetaKind::Mask => &mut self.mask_cache,
        }
    }

    pub fn cache(&self, kind: MetaKind) -> &MetaCache {
        match kind {
            MetaKind::Addr => &self.addr_cache,
            MetaKind::Type => &self.type_cache,
            MetaKind::Mask => &self.mask_cache,
        }
    }

    /// 32B line holding `blk`'s entry in the `kind` table.
    pub fn line_of(&self, kind: MetaKind, blk: BlockAddr) -> u64 {
        (blk.0 / self.n_partitions) / kind.entries_per_line()
    }

    pub fn meta_read(&mut self, kind: MetaKind, blk: BlockAddr) -> MetaOutcome {
        let line = self.line_of(kind, blk);
        self.cache_mut(kind).access(line, false)
    }

    pub fn meta_write(&mut self, blk: BlockAddr, value: MetaValue) -> MetaOutcome {
        match value {
            MetaValue::Addr(v) => {
                self.mapping.insert(blk, v);
            }
            MetaValue::Type(f) => {
                self.flags.insert(blk, f);
            }
            MetaValue::Mask(m) => {
                self.masks.insert(blk, m);
            }
        }
        let line = self.line_of(value.kind(), blk);
        self.cache_mut(value.kind()).access(line, true)
    }

    pub fn flag(&self, blk: BlockAddr) -> TypeFlag {
        self.flags.get(&blk).copied().unwrap_or_default()
    }

    pub fn mask(&self, blk: BlockAddr) -> SectorMask {
        self.masks.get(&blk).copied().unwrap_or_default()
    }

    pub fn mapping(&self, blk: BlockAddr) -> u32 {
        self.mapping.get(&blk).copied().unwrap_or(0)
    }

    pub fn cache_stats(&self, kind: MetaKind) -> MetaCacheStats {
        self.cache(kind).stats()
    }

    /// Full scan of the frame and flag invariants.
    pub fn check_invariants(&self) -> Result<()> {
        let mut mapped: HashMap<FrameAddr, u32> = HashMap::new();
        for (&blk, &flag) in &self.flags {
            let mask = self.mask(blk);
            match flag {
                TypeFlag::ReadOnly => {
                    if !mask.is_empty() {
                        return Err(SimError::invariant(format!("{blk} read-only with mask {mask}")));
                    }
                }
                _ if mask.is_empty() => {
                    return Err(SimError::invariant(format!("{blk} flag {flag} with empty mask")));
                }
                TypeFlag::Inter | TypeFlag::Reference => {
                    *mapped.entry(FrameAddr(u64::from(self.mapping(blk)))).or_default() += 1;
                }
                TypeFlag::Intra => {}
            }
            if flag != TypeFlag::ReadOnly && self.frames.home_in_use(FrameAddr::home_of(blk)) {
                return Err(SimError::invariant(format!("{blk} written but home frame still marked in use")));
            }
        }
        for (frame, count) in self.frames.live_frames() {
            if mapped.get(&frame).copied().unwrap_or(0) != count {
                return Err(SimError::invariant(format!(
                    "frame {} refcount {count} but {} blocks map to it",
                    frame.0,
                    mapped.get(&frame).copied().unwrap_or(0)
                )));
            }
            if self.frames.home_in_use(frame) {
                return Err(SimError::invariant(format!("frame {} shared while home block is read-only", frame.0)));
            }
        }
        for (frame, _) in &mapped {
            if self.frames.refcount(*frame) == 0 {
                return Err(SimError::invariant(format!("blocks map to untracked frame {}", frame.0)));
            }
        }
        for frame in self.frames.free_frames() {
            if !self.frames.is_ownerless(frame) {
                return Err(SimError::invariant(format!("free frame {} is in use", frame.0)));
            }
        }
        for frame in self.frames.vacated.iter() {
            if self.frames.refcount(*frame) == 0 && !self.frames.is_free(*frame) {
                return Err(SimError::invariant(format!("frame {} leaked", frame.0)));
            }
        }
        Ok(())
    }

    pub fn dump(&self) -> MetadataDump {
        let mut blocks: Vec<BlockMeta> = self
            .flags
            .iter()
            .map(|(&blk, &flag)| BlockMeta {
                blk,
                flag,
                mapping: self.mapping(blk),
                mask: self.mask(blk),
            })
            .collect();
        blocks.sort_by_key(|b| b.blk);
        let mut frames: Vec<FrameMeta> = self
            .frames
            .live_frames()
            .map(|(frame, refcount)| FrameMeta { frame, refcount })
            .collect();
        frames.sort_by_key(|f| f.frame);
        MetadataDump { blocks, frames }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_codes() {
        assert_eq!(TypeFlag::default(), TypeFlag::ReadOnly);
        for code in 0..4 {
            assert_eq!(TypeFlag::from_code(code).unwrap().code(), code);
        }
        assert_eq!(TypeFlag::Inter.to_string(), "10");
        let json = serde_json::to_string(&TypeFlag::Intra).unwrap();
        assert_eq!(json, "\"01\"");
        assert_eq!(serde_json::from_str::<TypeFlag>(&json).unwrap(), TypeFlag::Intra);
    }

    #[test]
    fn type_line_covers_128_blocks() {
        let mut m = MetadataStore::new(&MetadataCacheConfig::default(), 1);
        let first = m.meta_read(MetaKind::Type, BlockAddr(0));
        assert!(!first.hit);
        assert_eq!(first.dram_reads, 1);
        assert!(m.meta_read(MetaKind::Type, BlockAddr(64)).hit);
        assert!(m.meta_read(MetaKind::Type, BlockAddr(127)).hit);
        assert!(!m.meta_read(MetaKind::Type, BlockAddr(128)).hit);
    }

    #[test]
    fn addr_line_covers_8_blocks() {
        let mut m = MetadataStore::new(&MetadataCacheConfig::default(), 1);
        m.meta_read(MetaKind::Addr, BlockAddr(0));
        assert!(m.meta_read(MetaKind::Addr, BlockAddr(7)).hit);
        assert!(!m.meta_read(MetaKind::Addr, BlockAddr(8)).hit);
        m.meta_read(MetaKind::Mask, BlockAddr(0));
        assert!(m.meta_read(MetaKind::Mask, BlockAddr(63)).hit);
        assert!(!m.meta_read(MetaKind::Mask, BlockAddr(64)).hit);
    }

    #[test]
    fn partitions_index_locally() {
        let m = MetadataStore::new(&MetadataCacheConfig::default(), 8);
        // Blocks 3 and 3 + 8 * 7 are locals 0 and 7 of partition 3.
        assert_eq!(m.line_of(MetaKind::Addr, BlockAddr(3)), m.line_of(MetaKind::Addr, BlockAddr(59)));
        assert_ne!(m.line_of(MetaKind::Addr, BlockAddr(3)), m.line_of(MetaKind::Addr, BlockAddr(67)));
    }

    #[test]
    fn write_allocates_then_hits_then_dirty_evicts() {
        // One line of capacity.
        let cfg = MetadataCacheConfig {
            addr_cache: Some(32),
            ..MetadataCacheConfig::default()
        };
        let mut m = MetadataStore::new(&cfg, 1);
        let cold = m.meta_write(BlockAddr(0), MetaValue::Addr(5));
        assert_eq!((cold.hit, cold.dram_reads, cold.dram_writes), (false, 1, 0));
        assert!(m.meta_write(BlockAddr(1), MetaValue::Addr(6)).hit);
        let evict = m.meta_read(MetaKind::Addr, BlockAddr(8));
        assert_eq!((evict.hit, evict.dram_reads, evict.dram_writes), (false, 1, 1));
        // The clean line now resident leaves without a write.
        let clean = m.meta_read(MetaKind::Addr, BlockAddr(16));
        assert_eq!(clean.dram_writes, 0);
        let s = m.cache_stats(MetaKind::Addr);
        assert_eq!((s.hits, s.misses, s.dirty_evictions), (1, 3, 1));
        assert_eq!(m.mapping(BlockAddr(1)), 6);
    }

    #[test]
    fn lru_order_in_metadata_cache() {
        let mut c = MetaCache::new(Some(64));
        c.access(0, false);
        c.access(1, false);
        c.access(0, false);
        c.access(2, false);
        assert!(c.contains(0));
        assert!(!c.contains(1));
    }

    #[test]
    fn alloc_prefers_home_then_lowest() {
        let mut ft = FrameTable::default();
        ft.vacate_home(BlockAddr(4)).unwrap();
        assert_eq!(ft.alloc(BlockAddr(4)).unwrap(), FrameAddr(4));

        let mut ft = FrameTable::default();
        for b in [9, 5, 2] {
            ft.vacate_home(BlockAddr(b)).unwrap();
        }
        // Home of 2 occupied by shared data.
        ft.take(FrameAddr(2)).unwrap();
        assert_eq!(ft.alloc(BlockAddr(2)).unwrap(), FrameAddr(5));
        assert_eq!(ft.alloc(BlockAddr(2)).unwrap(), FrameAddr(9));
        assert!(matches!(ft.alloc(BlockAddr(2)), Err(SimError::Invariant(_))));
    }

    #[test]
    fn release_rules() {
        let mut ft = FrameTable::default();
        ft.vacate_home(BlockAddr(1)).unwrap();
        let f = ft.alloc(BlockAddr(1)).unwrap();
        assert!(matches!(ft.release(f), Err(SimError::Invariant(_))));
        assert_eq!(ft.decrement(f).unwrap(), 0);
        assert!(ft.release(f).unwrap());
        assert!(matches!(ft.release(f), Err(SimError::Invariant(_))));
        // A frame whose home block is still read-only is not freed.
        assert!(!ft.release(FrameAddr(7)).unwrap());
        assert!(!ft.is_free(FrameAddr(7)));
        assert!(matches!(ft.decrement(FrameAddr(7)), Err(SimError::Invariant(_))));
    }

    #[test]
    fn dump_is_sorted() {
        let mut m = MetadataStore::new(&MetadataCacheConfig::unbounded(), 1);
        for b in [5u64, 1, 3] {
            m.frames.vacate_home(BlockAddr(b)).unwrap();
            m.meta_write(BlockAddr(b), MetaValue::Type(TypeFlag::Intra));
            m.meta_write(BlockAddr(b), MetaValue::Mask(SectorMask::FULL));
            m.meta_write(BlockAddr(b), MetaValue::Addr(b as u32));
        }
        m.check_invariants().unwrap();
        let d = m.dump();
        let order: Vec<u64> = d.blocks.iter().map(|b| b.blk.0).collect();
        assert_eq!(order, vec![1, 3, 5]);
        assert!(d.frames.is_empty());
    }
}
