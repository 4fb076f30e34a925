//! The simulated block store: weight-accounted streams and I/O counters.

use std::cell::Cell;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExtMemError {
    #[error("block store needs m >= 2b and b >= 1 (m = {m}, b = {b})")]
    BadConfig { m: usize, b: usize },
    #[error("delete-min on an empty priority queue")]
    EmptyQueue,
    #[error("{what} = {need} exceeds the internal memory budget m = {m}")]
    ResidencyExceeded {
        what: &'static str,
        need: usize,
        m: usize,
    },
}

/// Weight of an item in block-store units. Plain records weigh 1; forwarded
/// step functions weigh one per breakpoint plus a header.
pub trait ItemWeight {
    fn weight(&self) -> usize {
        1
    }
}

impl ItemWeight for u32 {}
impl ItemWeight for u64 {}
impl ItemWeight for (u32, u32) {}
impl ItemWeight for (u32, f64) {}
impl ItemWeight for (u32, f32) {}

/// Monotone transfer counters. Reset only between queries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IoCounters {
    pub reads: u64,
    pub writes: u64,
    /// Priority-queue insertions (time-forwarded functions).
    pub forwards: u64,
    /// Crossing-edge copies addressed to saddles (second I/O algorithm).
    pub saddle_forwards: u64,
}

/// Simulated two-level memory: an internal memory of `m` items and an
/// unbounded external store transferred in blocks of `b` items.
///
/// Buffer accounting: the sort and priority-queue implementations size their
/// working sets (run buffers, merge fan-in) from `m` and `b`; streaming
/// output cursors ride in the customary one-block slack of the I/O model.
#[derive(Debug)]
pub struct BlockStore {
    m: usize,
    b: usize,
    reads: Cell<u64>,
    writes: Cell<u64>,
    forwards: Cell<u64>,
    saddle_forwards: Cell<u64>,
}

impl BlockStore {
    pub fn new(m: usize, b: usize) -> Result<Self, ExtMemError> {
        if b < 1 || m < 2 * b {
            return Err(ExtMemError::BadConfig { m, b });
        }
        Ok(BlockStore {
            m,
            b,
            reads: Cell::new(0),
            writes: Cell::new(0),
            forwards: Cell::new(0),
            saddle_forwards: Cell::new(0),
        })
    }

    pub fn memory_items(&self) -> usize {
        self.m
    }

    pub fn block_items(&self) -> usize {
        self.b
    }

    pub fn counters(&self) -> IoCounters {
        IoCounters {
            reads: self.reads.get(),
            writes: self.writes.get(),
            forwards: self.forwards.get(),
            saddle_forwards: self.saddle_forwards.get(),
        }
    }

    pub fn reset_counters(&self) {
        self.reads.set(0);
        self.writes.set(0);
        self.forwards.set(0);
        self.saddle_forwards.set(0);
    }

    pub(crate) fn blocks_for(&self, weight: usize) -> u64 {
        weight.div_ceil(self.b) as u64
    }

    pub(crate) fn count_read(&self, weight: usize) {
        self.reads.set(self.reads.get() + self.blocks_for(weight));
    }

    pub(crate) fn count_write(&self, weight: usize) {
        self.writes.set(self.writes.get() + self.blocks_for(weight));
    }

    pub(crate) fn count_read_blocks(&self, blocks: u64) {
        self.reads.set(self.reads.get() + blocks);
    }

    pub(crate) fn count_forward(&self) {
        self.forwards.set(self.forwards.get() + 1);
    }

    pub(crate) fn count_saddle_forward(&self) {
        self.saddle_forwards.set(self.saddle_forwards.get() + 1);
    }
}

/// A sequence of items resident on the external store.
#[derive(Debug, Clone)]
pub struct ExtVec<I> {
    items: Vec<I>,
    total_weight: usize,
}

impl<I: ItemWeight> ExtVec<I> {
    /// Write a stream to the store (counted).
    pub fn write(store: &BlockStore, items: Vec<I>) -> Self {
        let total_weight = items.iter().map(|i| i.weight()).sum();
        store.count_write(total_weight.max(if items.is_empty() { 0 } else { 1 }));
        ExtVec {
            items,
            total_weight,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn total_weight(&self) -> usize {
        self.total_weight
    }

    /// Read the whole stream back (counted).
    pub fn read_all(&self, store: &BlockStore) -> &[I] {
        store.count_read(self.total_weight);
        &self.items
    }

    /// Raw access for cursor-based readers that do their own counting.
    pub(crate) fn peek_items(&self) -> &[I] {
        &self.items
    }

    /// Incremental reader counting one transfer per block boundary crossed.
    pub fn reader<'a>(&'a self, store: &'a BlockStore) -> StreamReader<'a, I> {
        StreamReader {
            store,
            items: &self.items,
            pos: 0,
            consumed_weight: 0,
            counted_blocks: 0,
        }
    }

    pub fn into_items(self) -> Vec<I> {
        self.items
    }
}

/// Sequential reader over an [`ExtVec`] with block-granular read counting.
pub struct StreamReader<'a, I> {
    store: &'a BlockStore,
    items: &'a [I],
    pos: usize,
    consumed_weight: usize,
    counted_blocks: u64,
}

impl<'a, I: ItemWeight> StreamReader<'a, I> {
    pub fn peek(&self) -> Option<&'a I> {
        self.items.get(self.pos)
    }

    /// Weight not yet consumed.
    pub fn remaining_weight(&self) -> usize {
        self.items[self.pos..].iter().map(|i| i.weight()).sum()
    }
}

impl<'a, I: ItemWeight> Iterator for StreamReader<'a, I> {
    type Item = &'a I;

    fn next(&mut self) -> Option<&'a I> {
        let item = self.items.get(self.pos)?;
        self.pos += 1;
        self.consumed_weight += item.weight();
        let needed = (self.consumed_weight.max(1)).div_ceil(self.store.b) as u64;
        if needed > self.counted_blocks {
            self.store.count_read_blocks(needed - self.counted_blocks);
            self.counted_blocks = needed;
        }
        Some(item)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_requires_two_blocks_of_memory() {
        assert!(matches!(
            BlockStore::new(7, 4),
            Err(ExtMemError::BadConfig { .. })
        ));
        assert!(BlockStore::new(8, 4).is_ok());
    }

    #[test]
    fn stream_io_is_counted_per_block() {
        let store = BlockStore::new(64, 4).unwrap();
        let v: Vec<u32> = (0..10).collect();
        let s = ExtVec::write(&store, v);
        assert_eq!(store.counters().writes, 3, "ceil(10/4)");
        let mut r = s.reader(&store);
        for _ in 0..4 {
            r.next();
        }
        assert_eq!(store.counters().reads, 1);
        while r.next().is_some() {}
        assert_eq!(store.counters().reads, 3);
    }
}
