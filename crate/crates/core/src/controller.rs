//! Memory-controller pipeline and the trace-driven simulator around it.
//!
//! Reads flow L2 → FIFO → controller; dirty sectors leave the L2 as
//! writebacks and are handled by the controller immediately, in eviction
//! order. In dedup modes every block is reached through its metadata: the
//! type flag picks how the bytes are materialized and the mapping entry holds
//! a frame number or an intra word.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::dedup::{
    coverage_check, dedup_decrement, dedup_insert, dedup_lookup, detect_intra, fingerprint, merge, CanonicalBlock,
    Coverage, DedupLookup, HashStore,
};
use crate::error::{Result, SimError};
use crate::metadata::{FrameAddr, MetaKind, MetaOutcome, MetaValue, MetadataDump, MetadataStore, TypeFlag};
use crate::report::{
    trace_digest, CompareReport, Counts, DedupCounts, Derived, EventCounts, HashStoreReport, MetadataCacheReport,
    TrafficReport,
};
use crate::sector_cache::{Lookup, SectorCache, WritebackRequest};
use crate::trace::{
    bg_sector, payload_sector, validate_trace, BlockAddr, SectorData, SectorMask, TraceRecord, TraceVerdict,
    SECTORS_PER_LINE, WORDS_PER_LINE, WORDS_PER_SECTOR,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Baseline,
    Dedup,
    DedupCar,
    Cmd,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Baseline, Mode::Dedup, Mode::DedupCar, Mode::Cmd];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Dedup => "dedup",
            Mode::DedupCar => "dedup_car",
            Mode::Cmd => "cmd",
        }
    }

    pub fn dedup(self) -> bool {
        self != Mode::Baseline
    }

    pub fn car(self) -> bool {
        matches!(self, Mode::DedupCar | Mode::Cmd)
    }

    pub fn fifo(self) -> bool {
        self == Mode::Cmd
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Mode::Baseline),
            "dedup" => Ok(Mode::Dedup),
            "dedup_car" | "dedup-car" | "dedup+car" => Ok(Mode::DedupCar),
            "cmd" => Ok(Mode::Cmd),
            _ => Err(SimError::Config(format!(
                "unknown mode {s:?} (baseline, dedup, dedup_car, cmd)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestClass {
    Write,
    DataRead,
    ReadOnly,
    Metadata,
    DedupRead,
    /// On-chip copy; never reaches DRAM.
    CarCopy,
}

impl RequestClass {
    pub fn is_dram(self) -> bool {
        self != RequestClass::CarCopy
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyWeights {
    pub dram_read: f64,
    pub dram_write: f64,
    pub metadata_cache_hit: f64,
    pub fingerprint: f64,
    pub l2_hit: f64,
    pub fifo_hit: f64,
    pub car_copy: f64,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        EnergyWeights {
            dram_read: 100.0,
            dram_write: 100.0,
            metadata_cache_hit: 1.0,
            fingerprint: 5.0,
            l2_hit: 2.0,
            fifo_hit: 1.0,
            car_copy: 2.0,
        }
    }
}

/// Additive per-event cost proxy. Nothing overlaps; the totals are estimates,
/// not IPC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    pub dram_read: u64,
    pub dram_write: u64,
    pub metadata_cache_hit: u64,
    pub fingerprint: u64,
    pub l2_hit: u64,
    pub fifo_hit: u64,
    pub car_copy: u64,
    pub energy: EnergyWeights,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            dram_read: 400,
            dram_write: 400,
            metadata_cache_hit: 20,
            fingerprint: 228,
            l2_hit: 120,
            fifo_hit: 20,
            car_copy: 120,
            energy: EnergyWeights::default(),
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        let e = &self.energy;
        let weights = [e.dram_read, e.dram_write, e.metadata_cache_hit, e.fingerprint, e.l2_hit, e.fifo_hit, e.car_copy];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(SimError::Config("energy weights must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn cycles(&self, c: &Counts, e: &EventCounts) -> u64 {
        c.dram_reads() * self.dram_read
            + c.dram_writes() * self.dram_write
            + e.metadata_hit * self.metadata_cache_hit
            + e.fingerprint * self.fingerprint
            + c.l2_hit * self.l2_hit
            + c.fifo_hit * self.fifo_hit
            + c.car_copy * self.car_copy
    }

    pub fn energy(&self, c: &Counts, e: &EventCounts) -> f64 {
        let w = &self.energy;
        c.dram_reads() as f64 * w.dram_read
            + c.dram_writes() as f64 * w.dram_write
            + e.metadata_hit as f64 * w.metadata_cache_hit
            + e.fingerprint as f64 * w.fingerprint
            + c.l2_hit as f64 * w.l2_hit
            + c.fifo_hit as f64 * w.fifo_hit
            + c.car_copy as f64 * w.car_copy
    }
}

/// How the controller disposed of one writeback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WriteClass {
    Intra,
    Inter,
    Unique,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WriteLogEntry {
    pub wb: WritebackRequest,
    /// `None` in baseline mode, which does not classify.
    pub class: Option<WriteClass>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadLogEntry {
    pub index: usize,
    pub blk: BlockAddr,
    pub sector: usize,
    pub data: SectorData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunStats {
    pub counts: Counts,
    pub dedup: DedupCounts,
    pub events: EventCounts,
}

type Line = [u32; WORDS_PER_LINE];

#[derive(Debug, Clone)]
struct Partition {
    meta: MetadataStore,
    hash: HashStore,
}

fn violation(message: impl Into<String>) -> SimError {
    SimError::TraceViolation {
        index: 0,
        message: message.into(),
    }
}

fn line_sector(line: &Line, sector: usize) -> SectorData {
    let mut out = [0; WORDS_PER_SECTOR];
    out.copy_from_slice(&line[sector * WORDS_PER_SECTOR..(sector + 1) * WORDS_PER_SECTOR]);
    out
}

/// The deduplicating memory controller of all partitions, plus the DRAM
/// contents it manages.
#[derive(Debug, Clone)]
pub struct MemoryController {
    mode: Mode,
    bg_seed: u64,
    n_partitions: u64,
    parts: Vec<Partition>,
    dram: HashMap<FrameAddr, Line>,
    written_back: HashSet<BlockAddr>,
    pub stats: RunStats,
}

impl MemoryController {
    pub fn new(config: &SimConfig, mode: Mode) -> Self {
        let n = config.cache.n_partitions;
        let parts = if mode.dedup() {
            (0..n)
                .map(|_| Partition {
                    meta: MetadataStore::new(&config.metadata, n),
                    hash: HashStore::new(config.hash_entries),
                })
                .collect()
        } else {
            Vec::new()
        };
        MemoryController {
            mode,
            bg_seed: config.bg_seed,
            n_partitions: n as u64,
            parts,
            dram: HashMap::new(),
            written_back: HashSet::new(),
            stats: RunStats::default(),
        }
    }

    fn part_index(&self, blk: BlockAddr) -> usize {
        (blk.0 % self.n_partitions) as usize
    }

    fn account(&mut self, o: MetaOutcome) {
        if o.hit {
            self.stats.events.metadata_hit += 1;
        }
        self.stats.counts.metadata_read += u64::from(o.dram_reads);
        self.stats.counts.metadata_write += u64::from(o.dram_writes);
    }

    fn meta_read(&mut self, p: usize, kind: MetaKind, blk: BlockAddr) {
        let o = self.parts[p].meta.meta_read(kind, blk);
        self.account(o);
    }

    fn meta_write(&mut self, p: usize, blk: BlockAddr, value: MetaValue) {
        let o = self.parts[p].meta.meta_write(blk, value);
        self.account(o);
    }

    fn frame_sector(&self, frame: FrameAddr, sector: usize) -> Result<SectorData> {
        self.dram
            .get(&frame)
            .map(|line| line_sector(line, sector))
            .ok_or_else(|| SimError::invariant(format!("frame {} holds no data", frame.0)))
    }

    /// Serves an L2 miss. Returns the bytes and, for clean data read from a
    /// frame, the frame the L2 copy should be tagged with. `cache` is the
    /// partition's L2, probed for cache-assisted reads.
    pub fn handle_read(&mut self, cache: &SectorCache, blk: BlockAddr, sector: usize) -> Result<(SectorData, Option<FrameAddr>)> {
        if !self.mode.dedup() {
            return Ok(if self.written_back.contains(&blk) {
                self.stats.counts.data_read += 1;
                (self.frame_sector(FrameAddr::home_of(blk), sector)?, None)
            } else {
                self.stats.counts.read_only += 1;
                (bg_sector(self.bg_seed, blk, sector), None)
            });
        }
        let p = self.part_index(blk);
        self.meta_read(p, MetaKind::Type, blk);
        let flag = self.parts[p].meta.flag(blk);
        if flag == TypeFlag::ReadOnly {
            self.stats.counts.read_only += 1;
            return Ok((bg_sector(self.bg_seed, blk, sector), None));
        }
        if !self.parts[p].meta.mask(blk).contains(sector) {
            return Err(violation(format!("read of unmaterialized sector {sector} of {blk}")));
        }
        self.meta_read(p, MetaKind::Addr, blk);
        let entry = self.parts[p].meta.mapping(blk);
        match flag {
            TypeFlag::Intra => Ok(([entry; WORDS_PER_SECTOR], None)),
            TypeFlag::Inter | TypeFlag::Reference => {
                let frame = FrameAddr(u64::from(entry));
                if flag == TypeFlag::Inter && self.mode.car() {
                    if let Some(data) = cache.probe_frame_sector(frame, sector) {
                        self.stats.counts.car_copy += 1;
                        return Ok((data, Some(frame)));
                    }
                }
                self.stats.counts.data_read += 1;
                Ok((self.frame_sector(frame, sector)?, Some(frame)))
            }
            TypeFlag::ReadOnly => unreachable!(),
        }
    }

    /// Processes one writeback. `cache` is the partition's L2, whose frame
    /// tags are dropped when a frame receives new contents.
    pub fn handle_write(&mut self, cache: &mut SectorCache, wb: &WritebackRequest) -> Result<Option<WriteClass>> {
        if wb.mask.is_empty() || wb.payload.len() != wb.mask.count() * WORDS_PER_SECTOR {
            return Err(SimError::invariant(format!("malformed writeback for {}", wb.blk)));
        }
        let blk = wb.blk;
        self.stats.events.writebacks += 1;
        if !self.mode.dedup() {
            self.stats.counts.write += 1;
            self.stats.dedup.unique_writes += 1;
            let seed = self.bg_seed;
            let line = self.dram.entry(FrameAddr::home_of(blk)).or_insert_with(|| {
                let mut l = [0; WORDS_PER_LINE];
                for s in 0..SECTORS_PER_LINE {
                    l[s * WORDS_PER_SECTOR..(s + 1) * WORDS_PER_SECTOR].copy_from_slice(&bg_sector(seed, blk, s));
                }
                l
            });
            for (nth, s) in wb.mask.sectors().enumerate() {
                line[s * WORDS_PER_SECTOR..(s + 1) * WORDS_PER_SECTOR].copy_from_slice(&payload_sector(&wb.payload, nth));
            }
            self.written_back.insert(blk);
            return Ok(None);
        }

        let p = self.part_index(blk);
        self.meta_read(p, MetaKind::Type, blk);
        let flag = self.parts[p].meta.flag(blk);
        let (old_mask, old_entry) = if flag == TypeFlag::ReadOnly {
            (SectorMask::EMPTY, 0)
        } else {
            self.meta_read(p, MetaKind::Mask, blk);
            self.meta_read(p, MetaKind::Addr, blk);
            (self.parts[p].meta.mask(blk), self.parts[p].meta.mapping(blk))
        };
        let old_frame = FrameAddr(u64::from(old_entry));

        let old = match coverage_check(wb.mask, old_mask) {
            Coverage::Covered => CanonicalBlock::empty(),
            Coverage::NeedsMerge => match flag {
                TypeFlag::Intra => CanonicalBlock::uniform(old_mask, old_entry),
                TypeFlag::Inter | TypeFlag::Reference => {
                    self.stats.counts.dedup_read += 1;
                    let line = *self
                        .dram
                        .get(&old_frame)
                        .ok_or_else(|| SimError::invariant(format!("frame {} holds no data", old_frame.0)))?;
                    CanonicalBlock::from_sectors(old_mask, |s| line_sector(&line, s))
                }
                TypeFlag::ReadOnly => unreachable!("empty stored mask is always covered"),
            },
        };
        let merged = merge(&old, wb.mask, &wb.payload);

        let part = &mut self.parts[p];
        let mut reusable = None;
        match flag {
            TypeFlag::ReadOnly => part.meta.frames.vacate_home(blk)?,
            TypeFlag::Intra => {}
            TypeFlag::Inter => {
                dedup_decrement(&mut part.hash, &mut part.meta.frames, old_frame)?;
            }
            TypeFlag::Reference => {
                // A shared frame stays with its duplicates; new unique data
                // then goes to a fresh frame.
                if dedup_decrement(&mut part.hash, &mut part.meta.frames, old_frame)? == 0 {
                    reusable = Some(old_frame);
                }
            }
        }

        let (class, new_flag, new_entry) = if let Some(word) = detect_intra(&merged) {
            self.stats.dedup.intra_removed += 1;
            (WriteClass::Intra, TypeFlag::Intra, word)
        } else {
            self.stats.events.fingerprint += 1;
            let digest = fingerprint(&merged);
            match dedup_lookup(&mut part.hash, digest, None) {
                DedupLookup::Duplicate(frame) => {
                    part.meta.frames.increment(frame)?;
                    self.stats.dedup.inter_removed += 1;
                    (WriteClass::Inter, TypeFlag::Inter, frame.0 as u32)
                }
                DedupLookup::Unique => {
                    let frame = match reusable {
                        Some(f) => {
                            part.meta.frames.take(f)?;
                            f
                        }
                        None => part.meta.frames.alloc(blk)?,
                    };
                    dedup_insert(&mut part.hash, digest, frame);
                    cache.untag_frame(frame);
                    let mut line = [0; WORDS_PER_LINE];
                    for s in merged.mask.sectors() {
                        let data = merged.sector(s).expect("merged mask sector");
                        line[s * WORDS_PER_SECTOR..(s + 1) * WORDS_PER_SECTOR].copy_from_slice(&data);
                    }
                    self.dram.insert(frame, line);
                    self.stats.counts.write += 1;
                    self.stats.dedup.unique_writes += 1;
                    (WriteClass::Unique, TypeFlag::Reference, frame.0 as u32)
                }
            }
        };

        self.meta_write(p, blk, MetaValue::Type(new_flag));
        self.meta_write(p, blk, MetaValue::Mask(merged.mask));
        self.meta_write(p, blk, MetaValue::Addr(new_entry));
        Ok(Some(class))
    }

    pub fn flag(&self, blk: BlockAddr) -> TypeFlag {
        self.parts
            .get(self.part_index(blk))
            .map_or(TypeFlag::ReadOnly, |p| p.meta.flag(blk))
    }

    pub fn stored_mask(&self, blk: BlockAddr) -> SectorMask {
        self.parts
            .get(self.part_index(blk))
            .map_or(SectorMask::EMPTY, |p| p.meta.mask(blk))
    }

    pub fn mapping(&self, blk: BlockAddr) -> u32 {
        self.parts.get(self.part_index(blk)).map_or(0, |p| p.meta.mapping(blk))
    }

    pub fn refcount(&self, frame: FrameAddr) -> u32 {
        self.parts
            .get(self.part_index(frame.home_block()))
            .map_or(0, |p| p.meta.frames.refcount(frame))
    }

    pub fn metadata_cache_report(&self) -> MetadataCacheReport {
        let mut r = MetadataCacheReport::default();
        for p in &self.parts {
            r.addr.add(&p.meta.cache_stats(MetaKind::Addr));
            r.type_.add(&p.meta.cache_stats(MetaKind::Type));
            r.mask.add(&p.meta.cache_stats(MetaKind::Mask));
        }
        r
    }

    pub fn hash_store_report(&self) -> HashStoreReport {
        let mut r = HashStoreReport::default();
        for p in &self.parts {
            r.add(p.hash.len(), &p.hash.stats());
        }
        r
    }

    pub fn metadata_dump(&self) -> MetadataDump {
        let mut out = MetadataDump::default();
        for p in &self.parts {
            let d = p.meta.dump();
            out.blocks.extend(d.blocks);
            out.frames.extend(d.frames);
        }
        out.blocks.sort_by_key(|b| b.blk);
        out.frames.sort_by_key(|f| f.frame);
        out
    }

    pub fn check_invariants(&self) -> Result<()> {
        for (i, p) in self.parts.iter().enumerate() {
            p.meta.check_invariants()?;
            p.hash.check_invariants()?;
            for e in p.hash.entries_lru() {
                if self.part_index(e.ref_frame.home_block()) != i {
                    return Err(SimError::invariant(format!("frame {} outside its partition", e.ref_frame.0)));
                }
                let live = p.meta.frames.refcount(e.ref_frame);
                if u32::from(e.count) != live {
                    return Err(SimError::invariant(format!(
                        "hash count {} but frame {} refcount {live}",
                        e.count, e.ref_frame.0
                    )));
                }
                if !self.dram.contains_key(&e.ref_frame) {
                    return Err(SimError::invariant(format!("hashed frame {} holds no data", e.ref_frame.0)));
                }
            }
        }
        let s = &self.stats;
        if self.mode.dedup() && s.dedup.intra_removed + s.dedup.inter_removed + s.dedup.unique_writes != s.events.writebacks {
            return Err(SimError::invariant("write classes do not sum to writebacks"));
        }
        if s.dedup.unique_writes != s.counts.write {
            return Err(SimError::invariant("unique writes differ from DRAM writes"));
        }
        let caches = self.metadata_cache_report().total();
        if self.mode.dedup() && (caches.misses != s.counts.metadata_read || caches.dirty_evictions != s.counts.metadata_write) {
            return Err(SimError::invariant("metadata traffic differs from metadata cache counters"));
        }
        Ok(())
    }
}

/// L2 partitions plus memory controller, driven one trace record at a time.
#[derive(Debug, Clone)]
pub struct Simulator {
    mode: Mode,
    config: SimConfig,
    caches: Vec<SectorCache>,
    mc: MemoryController,
    written: HashMap<BlockAddr, SectorMask>,
    cursor: usize,
    write_log: Option<Vec<WriteLogEntry>>,
}

impl Simulator {
    pub fn new(config: &SimConfig, mode: Mode) -> Result<Self> {
        config.validate()?;
        let caches = (0..config.cache.n_partitions)
            .map(|_| SectorCache::new(&config.cache, mode.fifo()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Simulator {
            mode,
            config: config.clone(),
            caches,
            mc: MemoryController::new(config, mode),
            written: HashMap::new(),
            cursor: 0,
            write_log: None,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn controller(&self) -> &MemoryController {
        &self.mc
    }

    pub fn cache(&self, partition: usize) -> &SectorCache {
        &self.caches[partition]
    }

    pub fn stats(&self) -> &RunStats {
        &self.mc.stats
    }

    /// Starts recording every writeback and its classification.
    pub fn record_writes(&mut self) {
        self.write_log.get_or_insert_with(Vec::new);
    }

    pub fn take_write_log(&mut self) -> Vec<WriteLogEntry> {
        self.write_log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    fn partition_of(&self, blk: BlockAddr) -> usize {
        self.config.cache.partition_of(blk)
    }

    fn at_cursor(&self, e: SimError) -> SimError {
        match e {
            SimError::TraceViolation { message, .. } => SimError::TraceViolation {
                index: self.cursor,
                message,
            },
            other => other,
        }
    }

    fn check_addr(&self, blk: BlockAddr) -> Result<()> {
        if blk.0 >= self.config.address_space_blocks {
            return Err(SimError::TraceViolation {
                index: self.cursor,
                message: format!("{blk} outside the {}-block address space", self.config.address_space_blocks),
            });
        }
        Ok(())
    }

    fn drain(&mut self, wbs: Vec<WritebackRequest>) -> Result<()> {
        for wb in wbs {
            let p = self.partition_of(wb.blk);
            let class = self.mc.handle_write(&mut self.caches[p], &wb).map_err(|e| self.at_cursor(e))?;
            if let Some(log) = self.write_log.as_mut() {
                log.push(WriteLogEntry { wb, class });
            }
        }
        Ok(())
    }

    pub fn read(&mut self, blk: BlockAddr, sector: usize) -> Result<SectorData> {
        self.check_addr(blk)?;
        if sector >= SECTORS_PER_LINE {
            return Err(SimError::TraceViolation {
                index: self.cursor,
                message: format!("sector {sector} out of range"),
            });
        }
        if self.written.get(&blk).is_some_and(|m| !m.contains(sector)) {
            return Err(SimError::TraceViolation {
                index: self.cursor,
                message: format!("read of never-written sector {sector} of written block {blk}"),
            });
        }
        let p = self.partition_of(blk);
        let (res, wbs) = self.caches[p].lookup_sector(blk, sector);
        let counts = &mut self.mc.stats.counts;
        let data = match res {
            Lookup::HitCache(d) => {
                counts.l2_hit += 1;
                d
            }
            Lookup::HitFifo(d) => {
                counts.l2_miss += 1;
                counts.fifo_hit += 1;
                d
            }
            Lookup::Miss => {
                counts.l2_miss += 1;
                debug_assert!(wbs.is_empty());
                let (d, src) = self
                    .mc
                    .handle_read(&self.caches[p], blk, sector)
                    .map_err(|e| self.at_cursor(e))?;
                let fill_wbs = self.caches[p].fill_sector_from(blk, sector, d, true, src);
                self.drain(fill_wbs)?;
                d
            }
        };
        self.drain(wbs)?;
        Ok(data)
    }

    pub fn write(&mut self, blk: BlockAddr, mask: SectorMask, payload: &[u32]) -> Result<()> {
        self.check_addr(blk)?;
        if mask.is_empty() || payload.len() != mask.count() * WORDS_PER_SECTOR {
            return Err(SimError::TraceViolation {
                index: self.cursor,
                message: format!("write to {blk} with mask {mask} and {} payload words", payload.len()),
            });
        }
        *self.written.entry(blk).or_default() = self.written.get(&blk).copied().unwrap_or_default().union(mask);
        let p = self.partition_of(blk);
        let wbs = self.caches[p].write_sectors(blk, mask, payload);
        self.drain(wbs)
    }

    /// Applies one record; reads return their data.
    pub fn apply(&mut self, record: &TraceRecord) -> Result<Option<SectorData>> {
        match record {
            TraceRecord::Read { blk, sector } => self.read(*blk, usize::from(*sector)).map(Some),
            TraceRecord::Write { blk, mask, payload } => self.write(*blk, *mask, payload).map(|_| None),
        }
    }

    /// Sets the record index used in error reports.
    pub fn set_cursor(&mut self, index: usize) {
        self.cursor = index;
    }

    /// Writes every dirty sector back and empties the L2.
    pub fn flush(&mut self) -> Result<()> {
        for p in 0..self.caches.len() {
            let wbs = self.caches[p].flush();
            self.drain(wbs)?;
        }
        Ok(())
    }

    pub fn check_invariants(&self) -> Result<()> {
        for cache in &self.caches {
            cache.check_invariants()?;
            for (blk, s, frame, data) in cache.tagged_sectors() {
                if self.mc.frame_sector(frame, s)? != data {
                    return Err(SimError::invariant(format!(
                        "{blk} sector {s} tagged with frame {} but the bytes differ",
                        frame.0
                    )));
                }
            }
        }
        self.mc.check_invariants()
    }

    pub fn metadata_dump(&self) -> MetadataDump {
        self.mc.metadata_dump()
    }

    pub fn report(&self, trace_digest: String) -> TrafficReport {
        let s = &self.mc.stats;
        TrafficReport {
            mode: self.mode,
            trace_digest,
            counts: s.counts,
            dedup: s.dedup,
            derived: Derived::compute(&s.counts, &s.dedup, &s.events, &self.config.cost),
            events: s.events,
            metadata_caches: self.mc.metadata_cache_report(),
            hash_store: self.mc.hash_store_report(),
            config: self.config.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Full invariant scan after every this many records, and at the end.
    pub check_every: Option<usize>,
    pub record_writes: bool,
    pub record_reads: bool,
    /// Write back all dirty L2 contents after the last record.
    pub flush_at_end: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: TrafficReport,
    pub write_log: Vec<WriteLogEntry>,
    pub read_log: Vec<ReadLogEntry>,
    pub sim: Simulator,
}

fn check_trace(trace: &[TraceRecord]) -> Result<()> {
    match validate_trace(trace) {
        TraceVerdict::Valid => Ok(()),
        TraceVerdict::Invalid { index, reason } => Err(SimError::TraceViolation { index, message: reason }),
    }
}

pub fn run_detailed(trace: &[TraceRecord], config: &SimConfig, mode: Mode, opts: RunOptions) -> Result<RunOutcome> {
    run_detailed_with_digest(trace, &trace_digest(trace), config, mode, opts)
}

/// [`run_detailed`] with the trace digest supplied by the caller, for callers
/// that run one trace many times.
pub fn run_detailed_with_digest(
    trace: &[TraceRecord],
    digest: &str,
    config: &SimConfig,
    mode: Mode,
    opts: RunOptions,
) -> Result<RunOutcome> {
    check_trace(trace)?;
    let mut sim = Simulator::new(config, mode)?;
    if opts.record_writes {
        sim.record_writes();
    }
    let mut read_log = Vec::new();
    for (index, record) in trace.iter().enumerate() {
        sim.set_cursor(index);
        let data = sim.apply(record)?;
        if let (true, Some(data)) = (opts.record_reads, data) {
            let TraceRecord::Read { blk, sector } = record else { unreachable!() };
            read_log.push(ReadLogEntry {
                index,
                blk: *blk,
                sector: usize::from(*sector),
                data,
            });
        }
        if opts.check_every.is_some_and(|n| n > 0 && (index + 1) % n == 0) {
            sim.check_invariants()?;
        }
    }
    if opts.flush_at_end {
        sim.flush()?;
    }
    if opts.check_every.is_some() {
        sim.check_invariants()?;
    }
    let report = sim.report(digest.to_string());
    let write_log = sim.take_write_log();
    Ok(RunOutcome {
        report,
        write_log,
        read_log,
        sim,
    })
}

pub fn run(trace: &[TraceRecord], config: &SimConfig, mode: Mode) -> Result<TrafficReport> {
    run_detailed(trace, config, mode, RunOptions::default()).map(|o| o.report)
}

/// Runs each mode on the same trace. A baseline run is added when absent so
/// reductions have a reference.
pub fn compare(trace: &[TraceRecord], config: &SimConfig, modes: &[Mode]) -> Result<CompareReport> {
    let mut modes: Vec<Mode> = modes.to_vec();
    if !modes.contains(&Mode::Baseline) {
        modes.insert(0, Mode::Baseline);
    }
    let digest = trace_digest(trace);
    let reports = modes
        .iter()
        .map(|&m| run_detailed_with_digest(trace, &digest, config, m, RunOptions::default()).map(|o| o.report))
        .collect::<Result<Vec<_>>>()?;
    CompareReport::from_reports(reports)
}
