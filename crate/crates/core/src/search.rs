//! Deduplicating point stores used by the iteration engines.

use crate::quadtree::{QuadTree, SearchOutcome, TreeCounters};
use crate::system::{CapacityExceeded, PointBuffer, WeightedPoint};

/// A structure that finds a point by exact coordinates or inserts it into
/// the buffer it indexes.
pub trait PointIndex {
    fn search_and_insert<F>(
        &mut self,
        buffer: &mut PointBuffer,
        u: f64,
        v: f64,
        r: f64,
        combine: F,
    ) -> Result<SearchOutcome, CapacityExceeded>
    where
        F: FnOnce(f64, f64) -> f64;

    fn counters(&self) -> TreeCounters;

    /// Tree height; 0 for flat stores.
    fn height(&self) -> u32;
}

impl PointIndex for QuadTree {
    #[inline]
    fn search_and_insert<F>(
        &mut self,
        buffer: &mut PointBuffer,
        u: f64,
        v: f64,
        r: f64,
        combine: F,
    ) -> Result<SearchOutcome, CapacityExceeded>
    where
        F: FnOnce(f64, f64) -> f64,
    {
        QuadTree::search_and_insert(self, buffer, u, v, r, combine)
    }

    fn counters(&self) -> TreeCounters {
        QuadTree::counters(self)
    }

    fn height(&self) -> u32 {
        QuadTree::height(self)
    }
}

const SCAN_BLOCK: usize = 32;

/// Linear search over every stored point, in insertion order.
///
/// Keeps a copy of the x bit patterns so the scan touches 8 bytes per
/// point; a block is only inspected point by point when it holds a
/// matching abscissa. `comparisons` counts the tests a plain front-to-back
/// scan would make: the position of the hit, or every stored point on a
/// miss.
#[derive(Debug, Clone, Default)]
pub struct LinearIndex {
    xs: Vec<u64>,
    counters: TreeCounters,
}

impl LinearIndex {
    pub fn new() -> Self {
        LinearIndex::default()
    }

    fn find(&self, points: &[WeightedPoint], ub: u64, vb: u64) -> Option<usize> {
        let mut base = 0;
        for block in self.xs.chunks(SCAN_BLOCK) {
            if block.iter().fold(false, |acc, &x| acc | (x == ub)) {
                for (i, &x) in block.iter().enumerate() {
                    if x == ub && points[base + i].y.to_bits() == vb {
                        return Some(base + i);
                    }
                }
            }
            base += block.len();
        }
        None
    }
}

impl PointIndex for LinearIndex {
    fn search_and_insert<F>(
        &mut self,
        buffer: &mut PointBuffer,
        u: f64,
        v: f64,
        r: f64,
        combine: F,
    ) -> Result<SearchOutcome, CapacityExceeded>
    where
        F: FnOnce(f64, f64) -> f64,
    {
        debug_assert_eq!(self.xs.len(), buffer.len(), "index and buffer out of sync");
        self.counters.searches += 1;
        match self.find(buffer.as_slice(), u.to_bits(), v.to_bits()) {
            Some(m) => {
                self.counters.comparisons += m as u64 + 1;
                let p = buffer.weight_mut(m);
                *p = combine(*p, r);
                Ok(SearchOutcome::Found(m))
            }
            None => {
                self.counters.comparisons += self.xs.len() as u64;
                let index = buffer.push(WeightedPoint::new(u, v, r))?;
                self.xs.push(u.to_bits());
                Ok(SearchOutcome::Inserted(index))
            }
        }
    }

    fn counters(&self) -> TreeCounters {
        self.counters
    }

    fn height(&self) -> u32 {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_counts_scan_length() {
        let mut buf = PointBuffer::new();
        let mut idx = LinearIndex::new();
        let add = |a: f64, b: f64| a + b;
        for i in 0..100 {
            let x = i as f64 / 100.0;
            assert_eq!(
                idx.search_and_insert(&mut buf, x, 0.5, 1.0, add).unwrap(),
                SearchOutcome::Inserted(i)
            );
        }
        assert_eq!(idx.counters().comparisons, (0..100).sum::<u64>());
        let out = idx.search_and_insert(&mut buf, 0.4, 0.5, 2.0, add).unwrap();
        assert_eq!(out, SearchOutcome::Found(40));
        assert_eq!(buf[40].p, 3.0);
        assert_eq!(idx.counters().comparisons, 4950 + 41);
        assert_eq!(idx.counters().searches, 101);
    }

    #[test]
    fn linear_needs_both_coordinates() {
        let mut buf = PointBuffer::new();
        let mut idx = LinearIndex::new();
        let keep = |a: f64, _| a;
        idx.search_and_insert(&mut buf, 0.25, 0.5, 0.0, keep).unwrap();
        let out = idx.search_and_insert(&mut buf, 0.25, 0.75, 0.0, keep).unwrap();
        assert_eq!(out, SearchOutcome::Inserted(1));
        let out = idx.search_and_insert(&mut buf, 0.25, 0.75, 0.0, keep).unwrap();
        assert_eq!(out, SearchOutcome::Found(1));
    }
}
