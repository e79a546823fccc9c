//! Top-level simulator configuration, loaded from and saved to JSON.

use serde::{Deserialize, Serialize};

use crate::controller::CostModel;
use crate::dedup::HashStore;
use crate::error::{Result, SimError};
use crate::metadata::MetadataCacheConfig;
use crate::sector_cache::CacheConfig;

/// Hash-store budget of one memory controller.
pub const DEFAULT_HASH_BYTES: u64 = 48 << 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub cache: CacheConfig,
    pub metadata: MetadataCacheConfig,
    /// Hash-store entries per partition; `null` means unbounded.
    pub hash_entries: Option<usize>,
    pub cost: CostModel,
    /// Seed of the initial memory image returned for never-written blocks.
    pub bg_seed: u64,
    /// Blocks in the logical address space; traces must stay below it.
    pub address_space_blocks: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            cache: CacheConfig {
                n_partitions: 8,
                ..CacheConfig::default()
            },
            metadata: MetadataCacheConfig::default(),
            hash_entries: Some(HashStore::entries_for_bytes(DEFAULT_HASH_BYTES)),
            cost: CostModel::default(),
            bg_seed: 0,
            address_space_blocks: 1 << 32,
        }
    }
}

impl SimConfig {
    /// Same cache geometry with no capacity limit on the hash store or any
    /// metadata cache.
    pub fn unbounded(mut self) -> Self {
        self.hash_entries = None;
        self.metadata = MetadataCacheConfig::unbounded();
        self
    }

    /// Per-partition hash entries equivalent to `total_bytes` of hash storage
    /// spread over all partitions.
    pub fn hash_entries_for_total_bytes(&self, total_bytes: u64) -> usize {
        HashStore::entries_for_bytes(total_bytes / self.cache.n_partitions.max(1) as u64)
    }

    pub fn validate(&self) -> Result<()> {
        self.cache.validate()?;
        self.metadata.validate()?;
        if self.hash_entries == Some(0) {
            return Err(SimError::Config("hash_entries must be positive or null".into()));
        }
        if self.address_space_blocks == 0 || self.address_space_blocks > 1 << 32 {
            return Err(SimError::Config(
                "address_space_blocks must be in 1..=2^32 so frames fit a 4-byte mapping entry".into(),
            ));
        }
        self.cost.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig = serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
