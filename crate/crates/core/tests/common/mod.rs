#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use ifsq::quadtree::QuadTree;
use ifsq::system::{PointBuffer, Region};

/// Half selector written out from the addressing rule: clamp, normalize,
/// 0 below one half and 1 otherwise (including 0/0 on collapsed bounds).
fn side(v: f64, lo: f64, hi: f64) -> usize {
    let v = v.max(lo).min(hi);
    if (v - lo) / (hi - lo) < 0.5 {
        0
    } else {
        1
    }
}

fn code(x: f64, y: f64, r: &Region) -> usize {
    2 * side(y, r.c, r.d) + side(x, r.a, r.b)
}

fn sub(r: &Region, k: usize) -> Region {
    let mx = r.a + (r.b - r.a) / 2.0;
    let my = r.c + (r.d - r.c) / 2.0;
    Region {
        a: if k.is_multiple_of(2) { r.a } else { mx },
        b: if k.is_multiple_of(2) { mx } else { r.b },
        c: if k < 2 { r.c } else { my },
        d: if k < 2 { my } else { r.d },
    }
}

/// Checks partition, locating, capacity, dedup, son geometry and height
/// against `buffer`.
pub fn check_tree(tree: &QuadTree, buffer: &PointBuffer) -> Result<(), String> {
    let nodes = tree.nodes();
    let mut owner = vec![usize::MAX; buffer.len()];
    let mut max_depth = 0;
    let mut stack = vec![(QuadTree::ROOT, 0u32)];
    let mut reached = 0;
    while let Some((id, depth)) = stack.pop() {
        reached += 1;
        let node = &nodes[id];
        if node.depth != depth {
            return Err(format!("node {id} has depth {} at level {depth}", node.depth));
        }
        max_depth = max_depth.max(depth);
        match (node.sons(), node.indices()) {
            (Some(sons), None) => {
                for (k, &s) in sons.iter().enumerate() {
                    if nodes[s].bounds != sub(&node.bounds, k) {
                        return Err(format!("son {k} of node {id} has wrong bounds"));
                    }
                    stack.push((s, depth + 1));
                }
            }
            (None, Some(items)) => {
                if items.len() > tree.n_max() && depth < tree.depth_cap() {
                    return Err(format!("leaf {id} holds {} > n_max below the cap", items.len()));
                }
                for &i in items {
                    let i = i as usize;
                    if i >= buffer.len() {
                        return Err(format!("leaf {id} references index {i} past the buffer"));
                    }
                    if owner[i] != usize::MAX {
                        return Err(format!("index {i} in leaves {} and {id}", owner[i]));
                    }
                    owner[i] = id;
                }
            }
            _ => return Err(format!("node {id} is neither leaf nor internal")),
        }
    }
    if reached != nodes.len() {
        return Err(format!("{} arena nodes unreachable", nodes.len() - reached));
    }
    if max_depth != tree.height() {
        return Err(format!("height {} but deepest node {max_depth}", tree.height()));
    }

    let mut seen = HashSet::with_capacity(buffer.len());
    for (i, p) in buffer.iter().enumerate() {
        if owner[i] == usize::MAX {
            return Err(format!("index {i} in no leaf"));
        }
        if !seen.insert((p.x.to_bits(), p.y.to_bits())) {
            return Err(format!("duplicate point at index {i}"));
        }
        let mut id = QuadTree::ROOT;
        while let Some(sons) = nodes[id].sons() {
            id = sons[code(p.x, p.y, &nodes[id].bounds)];
        }
        if id != owner[i] {
            return Err(format!("index {i} stored in leaf {} but descends to {id}", owner[i]));
        }
    }
    let c = tree.counters();
    let bound = c.searches * tree.max_leaf_occupancy().max(tree.n_max()) as u64;
    if c.comparisons > bound {
        return Err(format!("{} comparisons over bound {bound}", c.comparisons));
    }
    Ok(())
}

/// Inserts `points` with additive combining and checks the outcome of each
/// call and the final weights against a hash-map oracle.
pub fn insert_and_check(
    tree: &mut QuadTree,
    buffer: &mut PointBuffer,
    points: &[(f64, f64, f64)],
) -> Result<(), String> {
    use ifsq::quadtree::SearchOutcome;
    let mut oracle: HashMap<(u64, u64), (usize, f64)> = HashMap::new();
    for &(x, y, w) in points {
        let key = (x.to_bits(), y.to_bits());
        let out = tree
            .search_and_insert(buffer, x, y, w, |a, b| a + b)
            .map_err(|e| e.to_string())?;
        match (oracle.get_mut(&key), out) {
            (Some((i, acc)), SearchOutcome::Found(j)) if *i == j => *acc += w,
            (None, SearchOutcome::Inserted(j)) => {
                oracle.insert(key, (j, w));
            }
            (expected, got) => {
                return Err(format!("({x}, {y}): oracle {expected:?}, tree {got:?}"));
            }
        }
    }
    if oracle.len() != buffer.len() {
        return Err(format!("{} distinct points, buffer holds {}", oracle.len(), buffer.len()));
    }
    for ((xb, yb), (i, acc)) in &oracle {
        let p = buffer[*i];
        if p.x.to_bits() != *xb || p.y.to_bits() != *yb || p.p != *acc {
            return Err(format!("index {i} holds {p:?}, expected weight {acc}"));
        }
    }
    check_tree(tree, buffer)
}

/// Gray-code check on the four quadrant codes: horizontal and vertical
/// neighbours differ in exactly one bit, diagonal ones in two.
pub fn check_gray_code(region: &Region) -> Result<(), String> {
    let centers: Vec<(f64, f64)> = (0..4).map(|k| sub(region, k).center()).collect();
    let codes: Vec<usize> = centers
        .iter()
        .map(|&(x, y)| ifsq::quadtree::quadrant_index(x, y, region))
        .collect();
    for (k, &c) in codes.iter().enumerate() {
        if c != k {
            return Err(format!("son {k} center classified as {c}"));
        }
    }
    let pairs = [((0, 1), 1), ((2, 3), 1), ((0, 2), 1), ((1, 3), 1), ((0, 3), 2), ((1, 2), 2)];
    for ((i, j), bits) in pairs {
        if (codes[i] ^ codes[j]).count_ones() != bits {
            return Err(format!("codes {} and {} differ in the wrong number of bits", codes[i], codes[j]));
        }
    }
    Ok(())
}
