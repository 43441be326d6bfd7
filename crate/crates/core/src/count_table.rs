//! Bounded heavy-hitter counter table with a spillover counter.
//!
//! This is the Misra-Gries variant that never undercounts: a resident entry's
//! estimate is at least the true number of observations of that row since
//! the last global reset, and a non-resident row's true count is bounded by
//! the spillover counter. Triggering on `estimate >= T` is therefore
//! conservative.
//!
//! Observation rule:
//!
//! * resident row: increment its entry;
//! * free slot: insert at `spillover + 1`;
//! * table full and some entry equals `spillover`: evict the lowest-indexed
//!   such entry and insert at `spillover + 1`;
//! * otherwise: increment `spillover`.
//!
//! Every resident count is `>= spillover`, so "the minimum equals spillover"
//! reduces to looking at the smallest `(count, row)` pair.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::dram::Row;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct CountTable {
    capacity: usize,
    counts: HashMap<Row, u64>,
    // (count, row), so the first element is the lowest-indexed minimum
    order: BTreeSet<(u64, Row)>,
    spillover: u64,
}

impl CountTable {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("count table capacity must be positive".into()));
        }
        Ok(CountTable {
            capacity,
            counts: HashMap::with_capacity(capacity.min(1 << 16)),
            order: BTreeSet::new(),
            spillover: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn spillover(&self) -> u64 {
        self.spillover
    }

    pub fn resident_count(&self, addr: Row) -> Option<u64> {
        self.counts.get(&addr).copied()
    }

    /// Upper bound on the true count of `addr`: its entry, or the spillover.
    pub fn estimate(&self, addr: Row) -> u64 {
        self.resident_count(addr).unwrap_or(self.spillover)
    }

    /// Records one occurrence of `addr` and returns its new estimate.
    pub fn observe(&mut self, addr: Row) -> u64 {
        if let Some(count) = self.counts.get_mut(&addr) {
            self.order.remove(&(*count, addr));
            *count += 1;
            self.order.insert((*count, addr));
            return *count;
        }
        if self.counts.len() < self.capacity {
            return self.insert(addr);
        }
        match self.order.first().copied() {
            Some((min, victim)) if min == self.spillover => {
                self.order.remove(&(min, victim));
                self.counts.remove(&victim);
                self.insert(addr)
            }
            _ => {
                self.spillover += 1;
                self.spillover
            }
        }
    }

    fn insert(&mut self, addr: Row) -> u64 {
        let count = self.spillover + 1;
        self.counts.insert(addr, count);
        self.order.insert((count, addr));
        count
    }

    /// Frees `addr`'s slot, if it has one.
    pub fn reset_entry(&mut self, addr: Row) {
        if let Some(count) = self.counts.remove(&addr) {
            self.order.remove(&(count, addr));
        }
    }

    pub fn global_reset(&mut self) {
        self.counts.clear();
        self.order.clear();
        self.spillover = 0;
    }

    /// Resident rows whose estimate is at least `t`, ascending by row.
    pub fn over_threshold(&self, t: u64) -> Vec<Row> {
        let mut rows: Vec<Row> = self
            .order
            .range((t, Row(0))..)
            .map(|&(_, row)| row)
            .collect();
        rows.sort_unstable();
        rows
    }

    /// Resident `(row, count)` pairs in ascending row order.
    pub fn entries(&self) -> Vec<(Row, u64)> {
        let mut v: Vec<(Row, u64)> = self.counts.iter().map(|(&r, &c)| (r, c)).collect();
        v.sort_unstable();
        v
    }
}

impl fmt::Display for CountTable {
    /// `{r1:c1, r2:c2} spillover=s`, rows ascending.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (row, count)) in self.entries().into_iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{row}:{count}")?;
        }
        write!(f, "}} spillover={}", self.spillover)
    }
}
