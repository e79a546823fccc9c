//! Trace-driven simulator of a GPU L2 sector cache in front of a
//! deduplicating memory controller.
//!
//! The controller removes duplicate and uniform writebacks, serves reads of
//! duplicate blocks from clean L2 copies of their reference frame, and a small
//! per-partition FIFO keeps clean L2 victims on chip. [`run`] and [`compare`]
//! replay a trace and count off-chip traffic by request class.

pub mod config;
pub mod controller;
pub mod dedup;
pub mod error;
pub mod metadata;
pub mod oracle;
pub mod report;
pub mod sector_cache;
pub mod sweep;
pub mod trace;
pub mod verify;

pub use config::SimConfig;
pub use controller::{compare, run, run_detailed, Mode, RunOptions, RunOutcome, Simulator, WriteClass};
pub use error::{Result, SimError};
pub use report::{emit, CompareReport, Format, TrafficReport};
pub use trace::{generate_trace, parse_trace, parse_trace_str, format_trace, validate_trace, BlockAddr, GenParams, SectorMask, TraceRecord};
