//! Quadtree index over a [`PointBuffer`].
//!
//! Nodes live in an arena; the four sons of a split node are stored
//! contiguously. Leaves hold indices into the point buffer, never copies
//! of the points, so weights have a single home.
//!
//! Quadrants are numbered by `2 * i(y) + i(x)`, where `i` is 0 for the lower
//! half of an interval and 1 otherwise (exact midpoints go up/right):
//!
//! ```text
//!   d +-----+-----+
//!     |  2  |  3  |
//!     +-----+-----+
//!     |  0  |  1  |
//!   c +-----+-----+
//!     a           b
//! ```

use std::fmt::Write as _;

use crate::system::{CapacityExceeded, PointBuffer, Region, WeightedPoint};

/// Depth at which leaves stop splitting and are allowed to exceed `n_max`.
pub const DEFAULT_DEPTH_CAP: u32 = 64;

#[inline]
fn half_index(v: f64, lo: f64, hi: f64) -> usize {
    let v = if v < lo {
        lo
    } else if v > hi {
        hi
    } else {
        v
    };
    if (v - lo) / (hi - lo) < 0.5 {
        0
    } else {
        1
    }
}

/// Quadrant of `(x, y)` within `bounds`, in `0..4`. Coordinates outside the
/// bounds are clamped first.
#[inline]
pub fn quadrant_index(x: f64, y: f64, bounds: &Region) -> usize {
    2 * half_index(y, bounds.c, bounds.d) + half_index(x, bounds.a, bounds.b)
}

/// Bounds of son `k` of a node covering `bounds`.
pub fn son_bounds(bounds: &Region, k: usize) -> Region {
    let mx = bounds.a + (bounds.b - bounds.a) / 2.0;
    let my = bounds.c + (bounds.d - bounds.c) / 2.0;
    let (a, b) = if k & 1 == 0 { (bounds.a, mx) } else { (mx, bounds.b) };
    let (c, d) = if k & 2 == 0 { (bounds.c, my) } else { (my, bounds.d) };
    Region { a, b, c, d }
}

#[derive(Debug, Clone)]
enum Content {
    Leaf(Vec<u32>),
    /// Arena id of son 0; sons 1..3 follow it.
    Internal(usize),
}

#[derive(Debug, Clone)]
pub struct QuadNode {
    pub bounds: Region,
    pub depth: u32,
    content: Content,
}

impl QuadNode {
    fn leaf(bounds: Region, depth: u32) -> Self {
        QuadNode {
            bounds,
            depth,
            content: Content::Leaf(Vec::new()),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.content, Content::Leaf(_))
    }

    /// Buffer indices held by a leaf; `None` for internal nodes.
    pub fn indices(&self) -> Option<&[u32]> {
        match &self.content {
            Content::Leaf(items) => Some(items),
            Content::Internal(_) => None,
        }
    }

    /// Arena ids of the four sons; `None` for leaves.
    pub fn sons(&self) -> Option<[usize; 4]> {
        match self.content {
            Content::Internal(first) => Some([first, first + 1, first + 2, first + 3]),
            Content::Leaf(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TreeCounters {
    pub searches: u64,
    pub comparisons: u64,
    pub splits: u64,
    /// Insertions into a depth-capped leaf that was already at `n_max`.
    pub overflow_inserts: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchOutcome {
    Found(usize),
    Inserted(usize),
}

impl SearchOutcome {
    pub fn index(self) -> usize {
        match self {
            SearchOutcome::Found(i) | SearchOutcome::Inserted(i) => i,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadTree {
    nodes: Vec<QuadNode>,
    n_max: usize,
    depth_cap: u32,
    height: u32,
    max_leaf_occupancy: usize,
    counters: TreeCounters,
}

impl QuadTree {
    pub const ROOT: usize = 0;

    pub fn new(bounds: Region, n_max: usize) -> Self {
        QuadTree::with_depth_cap(bounds, n_max, DEFAULT_DEPTH_CAP)
    }

    pub fn with_depth_cap(bounds: Region, n_max: usize, depth_cap: u32) -> Self {
        assert!(n_max >= 1, "n_max must be at least 1");
        QuadTree {
            nodes: vec![QuadNode::leaf(bounds, 0)],
            n_max,
            depth_cap,
            height: 0,
            max_leaf_occupancy: 0,
            counters: TreeCounters::default(),
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn depth_cap(&self) -> u32 {
        self.depth_cap
    }

    /// Maximum node depth; the root alone has height 0.
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn counters(&self) -> TreeCounters {
        self.counters
    }

    /// Largest number of indices any leaf has held.
    pub fn max_leaf_occupancy(&self) -> usize {
        self.max_leaf_occupancy
    }

    pub fn node(&self, id: usize) -> &QuadNode {
        &self.nodes[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[QuadNode] {
        &self.nodes
    }

    pub fn leaves(&self) -> impl Iterator<Item = (usize, &[u32])> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(id, n)| n.indices().map(|i| (id, i)))
    }

    /// Leaf reached by descending from the root along `quadrant_index`.
    pub fn locate(&self, x: f64, y: f64) -> usize {
        let mut id = Self::ROOT;
        while let Content::Internal(first) = self.nodes[id].content {
            id = first + quadrant_index(x, y, &self.nodes[id].bounds);
        }
        id
    }

    /// Turns leaf `id` into an internal node with four leaf sons and
    /// distributes its indices among them, preserving their relative order.
    ///
    /// Panics if `id` is not a leaf or is at the depth cap.
    pub fn split_node(&mut self, id: usize, buffer: &PointBuffer) {
        let depth = self.nodes[id].depth;
        assert!(depth < self.depth_cap, "cannot split a node at the depth cap");
        let first = self.nodes.len();
        let items = match std::mem::replace(&mut self.nodes[id].content, Content::Internal(first)) {
            Content::Leaf(items) => items,
            Content::Internal(_) => panic!("split_node called on an internal node"),
        };
        let bounds = self.nodes[id].bounds;
        for k in 0..4 {
            self.nodes.push(QuadNode::leaf(son_bounds(&bounds, k), depth + 1));
        }
        for index in items {
            let pt = &buffer[index as usize];
            let k = quadrant_index(pt.x, pt.y, &bounds);
            if let Content::Leaf(son) = &mut self.nodes[first + k].content {
                son.push(index);
            }
        }
        self.height = self.height.max(depth + 1);
        self.counters.splits += 1;
    }

    /// Looks `(u, v)` up by exact coordinate equality. A hit folds `r` into
    /// the stored weight with `combine(old, r)`; a miss appends `(u, v, r)` to
    /// `buffer` and indexes it, splitting full leaves on the way down.
    pub fn search_and_insert<F>(
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
        self.counters.searches += 1;
        let mut id = Self::ROOT;
        // Set once a leaf scan has missed; the sons of a split leaf only
        // hold indices that were already compared.
        let mut missed = false;
        loop {
            let node = &self.nodes[id];
            let items = match &node.content {
                Content::Internal(first) => {
                    id = first + quadrant_index(u, v, &node.bounds);
                    continue;
                }
                Content::Leaf(items) => items,
            };

            if !missed {
                let points = buffer.as_slice();
                let mut hit = None;
                for &index in items {
                    self.counters.comparisons += 1;
                    if points[index as usize].same_position(u, v) {
                        hit = Some(index as usize);
                        break;
                    }
                }
                if let Some(m) = hit {
                    let p = buffer.weight_mut(m);
                    *p = combine(*p, r);
                    return Ok(SearchOutcome::Found(m));
                }
                missed = true;
            }

            let len = items.len();
            let depth = node.depth;
            if len < self.n_max || depth >= self.depth_cap {
                if len >= self.n_max {
                    self.counters.overflow_inserts += 1;
                }
                let index = buffer.push(WeightedPoint::new(u, v, r))?;
                if let Content::Leaf(items) = &mut self.nodes[id].content {
                    items.push(index as u32);
                    self.max_leaf_occupancy = self.max_leaf_occupancy.max(items.len());
                }
                return Ok(SearchOutcome::Inserted(index));
            }

            // Full leaf: split and re-descend into the son that now covers
            // (u, v), splitting again if that son is full too.
            self.split_node(id, buffer);
        }
    }

    /// One line per node in depth-first order:
    /// `depth path a b c d n_points`, where `path` is `R` followed by the
    /// quadrant digits from the root and `n_points` counts every index in
    /// the node's subtree.
    pub fn dump(&self) -> String {
        let mut counts = vec![0usize; self.nodes.len()];
        // Sons always have larger arena ids than their parent.
        for id in (0..self.nodes.len()).rev() {
            counts[id] = match &self.nodes[id].content {
                Content::Leaf(items) => items.len(),
                Content::Internal(first) => (0..4).map(|k| counts[first + k]).sum(),
            };
        }

        let mut out = String::new();
        let mut stack = vec![(Self::ROOT, String::from("R"))];
        while let Some((id, path)) = stack.pop() {
            let node = &self.nodes[id];
            let b = node.bounds;
            let _ = writeln!(
                out,
                "{} {} {:?} {:?} {:?} {:?} {}",
                node.depth, path, b.a, b.b, b.c, b.d, counts[id]
            );
            if let Content::Internal(first) = node.content {
                for k in (0..4).rev() {
                    stack.push((first + k, format!("{path}{k}")));
                }
            }
        }
        out
    }
}
