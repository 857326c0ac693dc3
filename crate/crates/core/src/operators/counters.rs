use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

/// Size of one stored value.
pub const WORD_BYTES: u64 = 8;

/// Sink for the data-movement and arithmetic events of a kernel.
///
/// Kernels are generic over this so that timed runs can use [`Untallied`]
/// and pay nothing for instrumentation.
pub trait Tally {
    fn global_read(&mut self, words: u64);
    fn global_write(&mut self, words: u64);
    fn scratch_read(&mut self, words: u64);
    fn scratch_write(&mut self, words: u64);
    /// Interpolation-matrix entries fetched from scratch (already included in
    /// the scratch reads).
    fn interp_load(&mut self, entries: u64);
    fn flops(&mut self, n: u64);
    fn sync(&mut self);
}

/// Byte, flop and barrier totals accumulated over one or more applications.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessCounters {
    pub global_reads: u64,
    pub global_writes: u64,
    pub scratch_reads: u64,
    pub scratch_writes: u64,
    /// Count of interpolation-matrix entries read, not bytes.
    pub interp_loads: u64,
    pub flops: u64,
    pub syncs: u64,
}

impl AccessCounters {
    pub fn global_bytes(&self) -> u64 {
        self.global_reads + self.global_writes
    }

    pub fn scratch_bytes(&self) -> u64 {
        self.scratch_reads + self.scratch_writes
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

impl Tally for AccessCounters {
    #[inline]
    fn global_read(&mut self, words: u64) {
        self.global_reads += words * WORD_BYTES;
    }
    #[inline]
    fn global_write(&mut self, words: u64) {
        self.global_writes += words * WORD_BYTES;
    }
    #[inline]
    fn scratch_read(&mut self, words: u64) {
        self.scratch_reads += words * WORD_BYTES;
    }
    #[inline]
    fn scratch_write(&mut self, words: u64) {
        self.scratch_writes += words * WORD_BYTES;
    }
    #[inline]
    fn interp_load(&mut self, entries: u64) {
        self.interp_loads += entries;
    }
    #[inline]
    fn flops(&mut self, n: u64) {
        self.flops += n;
    }
    #[inline]
    fn sync(&mut self) {
        self.syncs += 1;
    }
}

impl AddAssign for AccessCounters {
    fn add_assign(&mut self, o: Self) {
        self.global_reads += o.global_reads;
        self.global_writes += o.global_writes;
        self.scratch_reads += o.scratch_reads;
        self.scratch_writes += o.scratch_writes;
        self.interp_loads += o.interp_loads;
        self.flops += o.flops;
        self.syncs += o.syncs;
    }
}

impl Add for AccessCounters {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self += o;
        self
    }
}

/// Discards everything.
#[derive(Clone, Copy, Debug, Default)]
pub struct Untallied;

impl Tally for Untallied {
    #[inline(always)]
    fn global_read(&mut self, _: u64) {}
    #[inline(always)]
    fn global_write(&mut self, _: u64) {}
    #[inline(always)]
    fn scratch_read(&mut self, _: u64) {}
    #[inline(always)]
    fn scratch_write(&mut self, _: u64) {}
    #[inline(always)]
    fn interp_load(&mut self, _: u64) {}
    #[inline(always)]
    fn flops(&mut self, _: u64) {}
    #[inline(always)]
    fn sync(&mut self) {}
}
