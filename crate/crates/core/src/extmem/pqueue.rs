//! Buffered multi-level priority queue over the block store.
//!
//! Insertions land in an internal-memory buffer of up to `m` items; when it
//! overflows it is sorted and written as a level-0 run, and levels merge
//! `m/b` runs at a time into the next level. Amortized, `n` operations cost
//! `O(sort(n))` block transfers; workloads fitting in memory never touch
//! the store.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::block_store::{BlockStore, ExtMemError, ExtVec, ItemWeight};

type Entry<K, I> = (K, u64, I);

impl<K: ItemWeight, I: ItemWeight> ItemWeight for (K, u64, I) {
    fn weight(&self) -> usize {
        self.2.weight()
    }
}

struct Run<K, I> {
    entries: ExtVec<Entry<K, I>>,
    pos: usize,
    consumed_weight: usize,
    counted_blocks: u64,
}

impl<K: Ord + Clone + ItemWeight, I: ItemWeight + Clone> Run<K, I> {
    fn peek(&self) -> Option<&Entry<K, I>> {
        self.entries.peek_items().get(self.pos)
    }

    fn advance(&mut self, store: &BlockStore) {
        let w = self.entries.peek_items()[self.pos].weight();
        self.pos += 1;
        self.consumed_weight += w;
        let needed = (self.consumed_weight.max(1)).div_ceil(store.block_items()) as u64;
        if needed > self.counted_blocks {
            store.count_read_blocks(needed - self.counted_blocks);
            self.counted_blocks = needed;
        }
    }

    fn remaining(&self) -> &[Entry<K, I>] {
        &self.entries.peek_items()[self.pos..]
    }
}

struct BufEntry<K, I>(K, u64, I);

impl<K: Ord, I> PartialEq for BufEntry<K, I> {
    fn eq(&self, o: &Self) -> bool {
        self.0 == o.0 && self.1 == o.1
    }
}
impl<K: Ord, I> Eq for BufEntry<K, I> {}
impl<K: Ord, I> PartialOrd for BufEntry<K, I> {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl<K: Ord, I> Ord for BufEntry<K, I> {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.cmp(&o.0).then(self.1.cmp(&o.1))
    }
}

/// External-memory priority queue; extraction order is strict `(key, seq)`.
pub struct ExtPriorityQueue<'s, K, I> {
    store: &'s BlockStore,
    buffer: BinaryHeap<Reverse<BufEntry<K, I>>>,
    buffer_weight: usize,
    levels: Vec<Vec<Run<K, I>>>,
    seq: u64,
    len: usize,
}

impl<'s, K, I> ExtPriorityQueue<'s, K, I>
where
    K: Ord + Clone + ItemWeight,
    I: ItemWeight + Clone,
{
    pub fn new(store: &'s BlockStore) -> Self {
        ExtPriorityQueue {
            store,
            buffer: BinaryHeap::new(),
            buffer_weight: 0,
            levels: Vec::new(),
            seq: 0,
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Insert; counted as one forward.
    pub fn insert(&mut self, key: K, item: I) {
        self.store.count_forward();
        let w = item.weight();
        self.buffer.push(Reverse(BufEntry(key, self.seq, item)));
        self.seq += 1;
        self.buffer_weight += w;
        self.len += 1;
        if self.buffer_weight > self.store.memory_items() {
            self.flush_buffer();
        }
    }

    /// `(key, seq)` of the current minimum, without consuming it.
    fn min_source(&self) -> Option<(K, u64, Option<(usize, usize)>)> {
        let mut best: Option<(K, u64, Option<(usize, usize)>)> = self
            .buffer
            .peek()
            .map(|Reverse(BufEntry(k, s, _))| (k.clone(), *s, None));
        for (li, level) in self.levels.iter().enumerate() {
            for (ri, run) in level.iter().enumerate() {
                if let Some((k, s, _)) = run.peek() {
                    let replace = match &best {
                        Some((bk, bs, _)) => (k, *s) < (bk, *bs),
                        None => true,
                    };
                    if replace {
                        best = Some((k.clone(), *s, Some((li, ri))));
                    }
                }
            }
        }
        best
    }

    /// Smallest key currently queued.
    pub fn peek_key(&self) -> Option<K> {
        self.min_source().map(|(k, _, _)| k)
    }

    pub fn delete_min(&mut self) -> Result<(K, I), ExtMemError> {
        let (_, _, src) = self.min_source().ok_or(ExtMemError::EmptyQueue)?;
        self.len -= 1;
        match src {
            None => {
                let Reverse(BufEntry(k, _, item)) = self.buffer.pop().unwrap();
                self.buffer_weight -= item.weight();
                Ok((k, item))
            }
            Some((li, ri)) => {
                let run = &mut self.levels[li][ri];
                let (k, _, item) = run.peek().cloned().unwrap();
                run.advance(self.store);
                Ok((k, item))
            }
        }
    }

    fn flush_buffer(&mut self) {
        let mut entries: Vec<Entry<K, I>> = self
            .buffer
            .drain()
            .map(|Reverse(BufEntry(k, s, i))| (k, s, i))
            .collect();
        entries.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
        self.buffer_weight = 0;
        let run = Run {
            entries: ExtVec::write(self.store, entries),
            pos: 0,
            consumed_weight: 0,
            counted_blocks: 0,
        };
        if self.levels.is_empty() {
            self.levels.push(Vec::new());
        }
        self.levels[0].push(run);
        self.carry(0);
    }

    fn carry(&mut self, level: usize) {
        let arity = (self.store.memory_items() / self.store.block_items()).max(2);
        if self.levels[level].len() < arity {
            return;
        }
        let runs: Vec<Run<K, I>> = self.levels[level].drain(..).collect();
        // Read the unconsumed remainder of each run and merge.
        let mut merged: Vec<Entry<K, I>> = Vec::new();
        for run in &runs {
            let rem_weight: usize = run.remaining().iter().map(|e| e.weight()).sum();
            self.store.count_read(rem_weight);
            merged.extend(run.remaining().iter().cloned());
        }
        merged.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
        let out = Run {
            entries: ExtVec::write(self.store, merged),
            pos: 0,
            consumed_weight: 0,
            counted_blocks: 0,
        };
        if self.levels.len() <= level + 1 {
            self.levels.push(Vec::new());
        }
        self.levels[level + 1].push(out);
        self.carry(level + 1);
    }
}
