//! L2-level access traces.
//!
//! A trace is a sequence of accesses as they arrive at the L2 (post-L1): sector
//! reads and masked sector writes carrying their full 32B-per-sector payload.
//!
//! # Text format
//!
//! One record per line, `#` starts a comment line, blank lines are skipped.
//!
//! ```text
//! R <blk:hex> <sector:0-3>
//! W <blk:hex> <mask:4 binary chars, leftmost = sector 0> <payload:hex>
//! ```
//!
//! The payload holds 64 hex characters per set mask bit, sectors ascending.
//! Each sector is eight 4-byte words; each word is written as eight hex digits,
//! most significant nibble first (`3f800000` is the word `0x3f80_0000`).

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub const SECTORS_PER_LINE: usize = 4;
pub const WORDS_PER_SECTOR: usize = 8;
pub const SECTOR_BYTES: usize = 32;
pub const LINE_BYTES: usize = 128;
pub const WORDS_PER_LINE: usize = SECTORS_PER_LINE * WORDS_PER_SECTOR;

/// The content of one 32B sector.
pub type SectorData = [u32; WORDS_PER_SECTOR];

/// 128B-aligned block index (byte address / 128).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockAddr(pub u64);

impl fmt::Display for BlockAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

/// Four sector bits; bit `i` is sector `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SectorMask(u8);

impl SectorMask {
    pub const EMPTY: SectorMask = SectorMask(0);
    pub const FULL: SectorMask = SectorMask(0b1111);

    pub fn from_bits(bits: u8) -> Self {
        SectorMask(bits & 0b1111)
    }

    pub fn single(sector: usize) -> Self {
        debug_assert!(sector < SECTORS_PER_LINE);
        SectorMask(1 << sector)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, sector: usize) -> bool {
        sector < SECTORS_PER_LINE && self.0 & (1 << sector) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(self, other: SectorMask) -> SectorMask {
        SectorMask(self.0 | other.0)
    }

    /// True iff every sector of `other` is also in `self`.
    pub fn covers(self, other: SectorMask) -> bool {
        other.0 & !self.0 == 0
    }

    pub fn insert(&mut self, sector: usize) {
        self.0 |= 1 << sector;
    }

    /// Set sectors in ascending order.
    pub fn sectors(self) -> impl Iterator<Item = usize> {
        (0..SECTORS_PER_LINE).filter(move |&s| self.contains(s))
    }

    /// Parses the 4-character binary form (leftmost character = sector 0).
    pub fn parse(text: &str) -> Option<SectorMask> {
        if text.len() != SECTORS_PER_LINE {
            return None;
        }
        let mut mask = SectorMask::EMPTY;
        for (i, c) in text.chars().enumerate() {
            match c {
                '1' => mask.insert(i),
                '0' => {}
                _ => return None,
            }
        }
        Some(mask)
    }
}

impl fmt::Display for SectorMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in 0..SECTORS_PER_LINE {
            f.write_char(if self.contains(s) { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl Serialize for SectorMask {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SectorMask {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        SectorMask::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("bad sector mask {s:?}")))
    }
}

/// Words of the sectors selected by a mask, ascending by sector then by word offset.
pub type LinePayload = Vec<u32>;

/// Returns the 8 words of the `nth` set sector within a packed payload.
pub fn payload_sector(payload: &[u32], nth: usize) -> SectorData {
    let mut out = [0u32; WORDS_PER_SECTOR];
    out.copy_from_slice(&payload[nth * WORDS_PER_SECTOR..(nth + 1) * WORDS_PER_SECTOR]);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceRecord {
    Read {
        blk: BlockAddr,
        sector: u8,
    },
    Write {
        blk: BlockAddr,
        mask: SectorMask,
        payload: LinePayload,
    },
}

impl TraceRecord {
    pub fn blk(&self) -> BlockAddr {
        match self {
            TraceRecord::Read { blk, .. } | TraceRecord::Write { blk, .. } => *blk,
        }
    }

    pub fn is_write(&self) -> bool {
        matches!(self, TraceRecord::Write { .. })
    }
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceRecord::Read { blk, sector } => write!(f, "R {:x} {}", blk.0, sector),
            TraceRecord::Write { blk, mask, payload } => {
                write!(f, "W {:x} {} ", blk.0, mask)?;
                for w in payload {
                    write!(f, "{w:08x}")?;
                }
                Ok(())
            }
        }
    }
}

/// Formats records in the canonical text form, one per line.
pub fn format_trace(records: &[TraceRecord]) -> String {
    const HEX: &[u8; 16] = b"0123456789abcdef";
    let mut out = String::with_capacity(records.len() * 24);
    for r in records {
        match r {
            TraceRecord::Read { .. } => {
                // Writing into a String cannot fail.
                let _ = write!(out, "{r}");
            }
            TraceRecord::Write { blk, mask, payload } => {
                let _ = write!(out, "W {:x} {mask} ", blk.0);
                out.reserve(payload.len() * 8);
                for w in payload {
                    for shift in (0..8).rev() {
                        out.push(HEX[(w >> (shift * 4)) as usize & 0xf] as char);
                    }
                }
            }
        }
        out.push('\n');
    }
    out
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> SimError {
    SimError::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Splits on ASCII whitespace, keeping the 1-based column of each token.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_ascii_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

/// Parses one non-comment line. `line_no` is 1-based and only used for errors.
pub fn parse_record(line: &str, line_no: usize) -> Result<TraceRecord> {
    let toks = tokens(line);
    let Some(&(kind_col, kind)) = toks.first() else {
        return Err(parse_err(line_no, 1, "empty record"));
    };
    let field = |i: usize, name: &str| -> Result<(usize, &str)> {
        toks.get(i)
            .copied()
            .ok_or_else(|| parse_err(line_no, line.len() + 1, format!("missing {name}")))
    };
    let (blk_col, blk_text) = field(1, "block address")?;
    let blk = u64::from_str_radix(blk_text, 16)
        .map(BlockAddr)
        .map_err(|_| parse_err(line_no, blk_col, format!("bad block address {blk_text:?}")))?;

    let rec = match kind {
        "R" => {
            let (col, text) = field(2, "sector")?;
            let sector: u8 = text
                .parse()
                .map_err(|_| parse_err(line_no, col, format!("bad sector {text:?}")))?;
            if usize::from(sector) >= SECTORS_PER_LINE {
                return Err(parse_err(line_no, col, format!("sector {sector} out of range 0-3")));
            }
            if let Some(&(col, _)) = toks.get(3) {
                return Err(parse_err(line_no, col, "trailing characters"));
            }
            TraceRecord::Read { blk, sector }
        }
        "W" => {
            let (mask_col, mask_text) = field(2, "mask")?;
            let mask = SectorMask::parse(mask_text).ok_or_else(|| {
                parse_err(line_no, mask_col, format!("mask must be 4 binary digits, got {mask_text:?}"))
            })?;
            if mask.is_empty() {
                return Err(parse_err(line_no, mask_col, "write mask selects no sector"));
            }
            let (pay_col, pay_text) = field(3, "payload")?;
            let want = mask.count() * SECTOR_BYTES * 2;
            if pay_text.len() != want {
                return Err(parse_err(
                    line_no,
                    pay_col,
                    format!("payload has {} hex chars, mask {mask} needs {want}", pay_text.len()),
                ));
            }
            if let Some(bad) = pay_text.bytes().position(|b| !b.is_ascii_hexdigit()) {
                return Err(parse_err(line_no, pay_col + bad, "non-hex payload character"));
            }
            let payload = pay_text
                .as_bytes()
                .chunks(8)
                .map(|chunk| {
                    // All bytes checked as ASCII hex above.
                    u32::from_str_radix(std::str::from_utf8(chunk).unwrap(), 16).unwrap()
                })
                .collect();
            if let Some(&(col, _)) = toks.get(4) {
                return Err(parse_err(line_no, col, "trailing characters"));
            }
            TraceRecord::Write { blk, mask, payload }
        }
        other => return Err(parse_err(line_no, kind_col, format!("unknown record kind {other:?}"))),
    };
    Ok(rec)
}

/// Parses a whole trace from a reader. Records are returned in file order.
pub fn parse_trace<R: BufRead>(reader: R) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| parse_err(i + 1, 1, format!("read error: {e}")))?;
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push(parse_record(&line, i + 1)?);
    }
    Ok(out)
}

pub fn parse_trace_str(text: &str) -> Result<Vec<TraceRecord>> {
    parse_trace(text.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceVerdict {
    Valid,
    /// `index` is the 0-based position of the first offending record.
    Invalid { index: usize, reason: String },
}

impl TraceVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, TraceVerdict::Valid)
    }
}

/// Checks that every read of a written block targets a sector some earlier
/// write to that block covered, and that writes are structurally sound.
pub fn validate_trace(records: &[TraceRecord]) -> TraceVerdict {
    let mut written: HashMap<BlockAddr, SectorMask> = HashMap::new();
    for (index, rec) in records.iter().enumerate() {
        match rec {
            TraceRecord::Read { blk, sector } => {
                if usize::from(*sector) >= SECTORS_PER_LINE {
                    return TraceVerdict::Invalid {
                        index,
                        reason: format!("sector {sector} out of range"),
                    };
                }
                if let Some(mask) = written.get(blk) {
                    if !mask.contains(usize::from(*sector)) {
                        return TraceVerdict::Invalid {
                            index,
                            reason: format!("read of block {blk} sector {sector}, never written (written mask {mask})"),
                        };
                    }
                }
            }
            TraceRecord::Write { blk, mask, payload } => {
                if mask.is_empty() {
                    return TraceVerdict::Invalid {
                        index,
                        reason: "write with empty mask".into(),
                    };
                }
                if payload.len() != mask.count() * WORDS_PER_SECTOR {
                    return TraceVerdict::Invalid {
                        index,
                        reason: format!("payload of {} words for mask {mask}", payload.len()),
                    };
                }
                let entry = written.entry(*blk).or_default();
                *entry = entry.union(*mask);
            }
        }
    }
    TraceVerdict::Valid
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Initial DRAM content of never-written memory.
///
/// `word_index` runs over the 32 words of the block (sector * 8 + offset). The
/// function is two rounds of splitmix64 over the seed, the block and the index,
/// truncated to the low 32 bits.
pub fn bg_word(seed: u64, blk: BlockAddr, word_index: usize) -> u32 {
    let h = splitmix64(seed ^ splitmix64(blk.0));
    splitmix64(h ^ word_index as u64) as u32
}

pub fn bg_sector(seed: u64, blk: BlockAddr, sector: usize) -> SectorData {
    std::array::from_fn(|i| bg_word(seed, blk, sector * WORDS_PER_SECTOR + i))
}

/// Knobs for the synthetic trace generator.
///
/// Blocks `0..readonly_set_size` are never written; they are swept
/// (`readonly_rereads` full passes over every sector) interleaved with
/// `n_records` mixed records. Mixed reads target already written sectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenParams {
    pub seed: u64,
    pub n_blocks: u64,
    pub n_records: usize,
    pub write_fraction: f64,
    pub intra_prob: f64,
    pub inter_pool_size: usize,
    pub readonly_set_size: u64,
    pub readonly_rereads: usize,
    /// Probability of a write covering 1, 2, 3 or 4 sectors.
    pub mask_distribution: [f64; 4],
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            seed: 1,
            n_blocks: 1024,
            n_records: 10_000,
            write_fraction: 0.4,
            intra_prob: 0.4,
            inter_pool_size: 64,
            readonly_set_size: 256,
            readonly_rereads: 4,
            mask_distribution: [0.05, 0.05, 0.05, 0.85],
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::InvalidParams(m));
        for (name, p) in [("write_fraction", self.write_fraction), ("intra_prob", self.intra_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} not in [0, 1]"));
            }
        }
        if self.inter_pool_size == 0 {
            return bad("inter_pool_size must be at least 1".into());
        }
        if self.n_blocks == 0 {
            return bad("n_blocks must be at least 1".into());
        }
        if self.readonly_set_size > self.n_blocks {
            return bad("readonly_set_size exceeds n_blocks".into());
        }
        if self.write_fraction > 0.0 && self.n_records > 0 && self.readonly_set_size == self.n_blocks {
            return bad("writes requested but every block is read-only".into());
        }
        if self.mask_distribution.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad(format!("mask_distribution {:?} has an entry outside [0, 1]", self.mask_distribution));
        }
        let sum: f64 = self.mask_distribution.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("mask_distribution sums to {sum}, expected 1"));
        }
        Ok(())
    }
}

/// Shared contents for inter-duplicate writes. No sector is uniform, so a
/// pool write is never intra-duplicate.
fn content_pool(rng: &mut ChaCha8Rng, size: usize) -> Vec<[u32; WORDS_PER_LINE]> {
    (0..size)
        .map(|_| {
            let mut words: [u32; WORDS_PER_LINE] = std::array::from_fn(|_| rng.gen());
            for s in 0..SECTORS_PER_LINE {
                let sec = &mut words[s * WORDS_PER_SECTOR..(s + 1) * WORDS_PER_SECTOR];
                if sec.iter().all(|&w| w == sec[0]) {
                    sec[1] ^= 1;
                }
            }
            words
        })
        .collect()
}

fn pick_popcount(rng: &mut ChaCha8Rng, dist: &[f64; 4]) -> usize {
    let x: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in dist.iter().enumerate() {
        acc += p;
        if x < acc {
            return i + 1;
        }
    }
    // Rounding slack: fall back to the largest popcount with nonzero weight.
    dist.iter().rposition(|&p| p > 0.0).map_or(4, |i| i + 1)
}

/// Produces a well-formed trace; identical parameters give identical traces.
pub fn generate_trace(params: &GenParams) -> Result<Vec<TraceRecord>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let pool = content_pool(&mut rng, params.inter_pool_size);

    let ro = params.readonly_set_size;
    let sweep_len = ro as usize * SECTORS_PER_LINE * params.readonly_rereads;
    let mut sweep_pos = 0usize;
    let mut mixed_left = params.n_records;

    let mut written_mask: HashMap<BlockAddr, SectorMask> = HashMap::new();
    let mut written_order: Vec<BlockAddr> = Vec::new();
    let mut out = Vec::with_capacity(sweep_len + params.n_records);
    let mut sectors = [0usize, 1, 2, 3];

    while sweep_pos < sweep_len || mixed_left > 0 {
        let sweep_left = sweep_len - sweep_pos;
        let take_sweep = rng.gen_range(0..sweep_left + mixed_left) < sweep_left;
        if take_sweep {
            let in_pass = sweep_pos % (ro as usize * SECTORS_PER_LINE);
            out.push(TraceRecord::Read {
                blk: BlockAddr((in_pass / SECTORS_PER_LINE) as u64),
                sector: (in_pass % SECTORS_PER_LINE) as u8,
            });
            sweep_pos += 1;
            continue;
        }
        mixed_left -= 1;

        let writable = params.n_blocks - ro;
        if writable > 0 && rng.gen_bool(params.write_fraction) {
            let blk = BlockAddr(ro + rng.gen_range(0..writable));
            let k = pick_popcount(&mut rng, &params.mask_distribution);
            sectors.shuffle(&mut rng);
            let mut mask = SectorMask::EMPTY;
            for &s in &sectors[..k] {
                mask.insert(s);
            }
            let payload: LinePayload = if rng.gen_bool(params.intra_prob) {
                let w: u32 = rng.gen();
                vec![w; k * WORDS_PER_SECTOR]
            } else {
                let content = &pool[rng.gen_range(0..pool.len())];
                mask.sectors()
                    .flat_map(|s| content[s * WORDS_PER_SECTOR..(s + 1) * WORDS_PER_SECTOR].iter().copied())
                    .collect()
            };
            let entry = written_mask.entry(blk).or_insert_with(|| {
                written_order.push(blk);
                SectorMask::EMPTY
            });
            *entry = entry.union(mask);
            out.push(TraceRecord::Write { blk, mask, payload });
        } else if !written_order.is_empty() {
            let blk = written_order[rng.gen_range(0..written_order.len())];
            let mask = written_mask[&blk];
            let nth = rng.gen_range(0..mask.count());
            let sector = mask.sectors().nth(nth).unwrap_or(0) as u8;
            out.push(TraceRecord::Read { blk, sector });
        } else {
            out.push(TraceRecord::Read {
                blk: BlockAddr(rng.gen_range(0..params.n_blocks)),
                sector: rng.gen_range(0..SECTORS_PER_LINE as u8),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_write(blk: u64, w: u32) -> TraceRecord {
        TraceRecord::Write {
            blk: BlockAddr(blk),
            mask: SectorMask::FULL,
            payload: vec![w; 32],
        }
    }

    #[test]
    fn parses_read() {
        let r = parse_record("R 2a 1", 1).unwrap();
        assert_eq!(
            r,
            TraceRecord::Read {
                blk: BlockAddr(0x2a),
                sector: 1
            }
        );
    }

    #[test]
    fn parses_full_write() {
        let text = format!("W 00 1111 {}", "0123abcd".repeat(32));
        let TraceRecord::Write { blk, mask, payload } = parse_record(&text, 1).unwrap() else {
            panic!("expected write");
        };
        assert_eq!(blk, BlockAddr(0));
        assert_eq!(mask, SectorMask::FULL);
        assert_eq!(payload.len(), 32);
        assert!(payload.iter().all(|&w| w == 0x0123_abcd));
    }

    #[test]
    fn parses_partial_write() {
        let text = format!("W 05 0110 {}", "f".repeat(128));
        let TraceRecord::Write { blk, mask, payload } = parse_record(&text, 1).unwrap() else {
            panic!("expected write");
        };
        assert_eq!(blk, BlockAddr(5));
        assert_eq!(mask.sectors().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(payload.len(), 16);
    }

    #[test]
    fn parse_errors_carry_position() {
        let cases = [
            ("R 2a 4", 1, 6),
            ("W 1 10a1 00", 1, 5),
            ("W 1 101 00", 1, 5),
            ("W 1 0001 abcd", 1, 10),
            ("R zz 0", 1, 3),
        ];
        for (text, line, column) in cases {
            match parse_record(text, line) {
                Err(SimError::Parse { line: l, column: c, .. }) => {
                    assert_eq!((l, c), (line, column), "{text}");
                }
                other => panic!("{text}: expected parse error, got {other:?}"),
            }
        }
        let bad_hex = format!("W 1 0001 {}g", "0".repeat(63));
        match parse_record(&bad_hex, 3) {
            Err(SimError::Parse { line, column, .. }) => assert_eq!((line, column), (3, 73)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = "# header\n\nR 1 0\n   # indented comment\nR 2 3\n";
        let recs = parse_trace_str(text).unwrap();
        assert_eq!(recs.len(), 2);
        match parse_trace_str("R 1 0\nX 1 0\n") {
            Err(SimError::Parse { line: 2, column: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validate_examples() {
        let w = TraceRecord::Write {
            blk: BlockAddr(1),
            mask: SectorMask::from_bits(0b0001),
            payload: vec![7; 8],
        };
        let ok = vec![w.clone(), TraceRecord::Read { blk: BlockAddr(1), sector: 0 }];
        assert!(validate_trace(&ok).is_valid());

        let bad = vec![w, TraceRecord::Read { blk: BlockAddr(1), sector: 3 }];
        assert!(matches!(validate_trace(&bad), TraceVerdict::Invalid { index: 1, .. }));

        let ro = vec![TraceRecord::Read { blk: BlockAddr(9), sector: 2 }];
        assert!(validate_trace(&ro).is_valid());
    }

    #[test]
    fn mask_text_is_sector_zero_first() {
        let m = SectorMask::parse("1000").unwrap();
        assert!(m.contains(0));
        assert_eq!(m.count(), 1);
        assert_eq!(m.to_string(), "1000");
        assert!(SectorMask::FULL.covers(SectorMask::from_bits(0b1011)));
        assert!(!SectorMask::parse("0110").unwrap().covers(SectorMask::parse("1011").unwrap()));
    }

    #[test]
    fn generator_all_intra() {
        let p = GenParams {
            write_fraction: 1.0,
            intra_prob: 1.0,
            readonly_set_size: 0,
            n_records: 500,
            ..GenParams::default()
        };
        let recs = generate_trace(&p).unwrap();
        assert_eq!(recs.len(), 500);
        for r in &recs {
            let TraceRecord::Write { payload, .. } = r else {
                panic!("expected only writes")
            };
            assert!(payload.iter().all(|&w| w == payload[0]));
        }
    }

    #[test]
    fn generator_single_pool_entry_is_identical() {
        let p = GenParams {
            write_fraction: 1.0,
            intra_prob: 0.0,
            inter_pool_size: 1,
            readonly_set_size: 0,
            mask_distribution: [0.0, 0.0, 0.0, 1.0],
            n_records: 300,
            ..GenParams::default()
        };
        let recs = generate_trace(&p).unwrap();
        let first = match &recs[0] {
            TraceRecord::Write { payload, .. } => payload.clone(),
            _ => unreachable!(),
        };
        for r in &recs {
            match r {
                TraceRecord::Write { mask, payload, .. } => {
                    assert_eq!(*mask, SectorMask::FULL);
                    assert_eq!(payload, &first);
                }
                _ => panic!("expected only writes"),
            }
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let p = GenParams {
            seed: 7,
            n_records: 10_000,
            ..GenParams::default()
        };
        let a = format_trace(&generate_trace(&p).unwrap());
        let b = format_trace(&generate_trace(&p).unwrap());
        assert_eq!(a, b);
        let c = format_trace(&generate_trace(&GenParams { seed: 8, ..p }).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn generator_counts_and_validity() {
        let p = GenParams {
            n_records: 2000,
            readonly_set_size: 10,
            readonly_rereads: 3,
            ..GenParams::default()
        };
        let recs = generate_trace(&p).unwrap();
        assert_eq!(recs.len(), 2000 + 10 * 4 * 3);
        assert!(validate_trace(&recs).is_valid());
        let ro_reads = recs
            .iter()
            .filter(|r| matches!(r, TraceRecord::Read { blk, .. } if blk.0 < 10))
            .count();
        assert!(ro_reads >= 120);
        assert!(recs.iter().all(|r| !(r.is_write() && r.blk().0 < 10)));
    }

    #[test]
    fn generator_rejects_bad_params() {
        let base = GenParams::default();
        let bad = [
            GenParams { write_fraction: 1.5, ..base.clone() },
            GenParams { intra_prob: -0.1, ..base.clone() },
            GenParams { inter_pool_size: 0, ..base.clone() },
            GenParams { mask_distribution: [0.5, 0.5, 0.5, 0.0], ..base.clone() },
            GenParams { readonly_set_size: 2000, ..base.clone() },
            GenParams { n_blocks: 0, readonly_set_size: 0, ..base },
        ];
        for p in bad {
            assert!(matches!(generate_trace(&p), Err(SimError::InvalidParams(_))), "{p:?}");
        }
    }

    #[test]
    fn bg_content_is_stable() {
        assert_eq!(bg_word(3, BlockAddr(17), 5), bg_word(3, BlockAddr(17), 5));
        assert_ne!(bg_word(3, BlockAddr(17), 5), bg_word(3, BlockAddr(17), 6));
        assert_ne!(bg_word(3, BlockAddr(17), 5), bg_word(4, BlockAddr(17), 5));
        let s = bg_sector(0, BlockAddr(2), 1);
        assert_eq!(s[0], bg_word(0, BlockAddr(2), 8));
    }

    #[test]
    fn display_round_trips_small_example() {
        let recs = vec![
            TraceRecord::Read { blk: BlockAddr(0x2a), sector: 1 },
            full_write(3, 0x3f80_0000),
        ];
        let text = format_trace(&recs);
        assert!(text.starts_with("R 2a 1\nW 3 1111 3f800000"));
        assert_eq!(parse_trace_str(&text).unwrap(), recs);
    }
}
