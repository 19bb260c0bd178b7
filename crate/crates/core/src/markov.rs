//! Deterministic iteration of the Markov operator for IFS and GIFS.
//!
//! Each iteration applies every map to every current support point (every
//! ordered pair of points for GIFS), merging coincident images through a
//! [`PointIndex`]. The linear engine scans all points produced so far; the
//! quadtree engine builds a fresh [`QuadTree`] per iteration.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::quadtree::{QuadTree, DEFAULT_DEPTH_CAP};
use crate::search::{LinearIndex, PointIndex};
use crate::system::{
    apply_map2, apply_map2_f32, apply_map4, apply_map4_f32, validate_system, AffineMap2,
    AffineMap2F32, AffineMap4, AffineMap4F32, CapacityExceeded, Maps, MeasureMode, PointBuffer,
    Precision, Region, SystemKind, SystemSpec, ValidationErrors, WeightedPoint, DEFAULT_POINT_CAP,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Engine {
    Linear,
    Quadtree,
}

/// How a generated point's weight is initialized and merged with the
/// weight already stored at the same position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightRule {
    pub mode: MeasureMode,
}

impl WeightRule {
    pub fn new(mode: MeasureMode) -> Self {
        WeightRule { mode }
    }

    #[inline]
    pub fn init_ifs(self, map_weight: f64, v: f64) -> f64 {
        match self.mode {
            MeasureMode::Classic => map_weight * v,
            MeasureMode::Idempotent => map_weight + v,
        }
    }

    #[inline]
    pub fn init_gifs(self, map_weight: f64, v0: f64, v1: f64) -> f64 {
        match self.mode {
            MeasureMode::Classic => map_weight * v0 * v1,
            MeasureMode::Idempotent => map_weight + v0 + v1,
        }
    }

    #[inline]
    pub fn combine(self, old: f64, r: f64) -> f64 {
        match self.mode {
            MeasureMode::Classic => old + r,
            MeasureMode::Idempotent => old.max(r),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub iterations: usize,
    pub engine: Engine,
    pub n_max: usize,
    /// Deduplicate only; stored weights keep the value of their first
    /// insertion.
    pub attractor_only: bool,
    pub point_cap: usize,
    pub depth_cap: u32,
    pub precision: Precision,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            iterations: 0,
            engine: Engine::Quadtree,
            n_max: 64,
            attractor_only: false,
            point_cap: DEFAULT_POINT_CAP,
            depth_cap: DEFAULT_DEPTH_CAP,
            precision: Precision::default(),
        }
    }
}

impl RunConfig {
    pub fn new(iterations: usize, engine: Engine, n_max: usize) -> Self {
        RunConfig {
            iterations,
            engine,
            n_max,
            ..RunConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IterationStats {
    /// 1-based iteration number.
    pub iteration: usize,
    pub points: usize,
    pub searches: u64,
    pub comparisons: u64,
    pub tree_height: u32,
    pub split_count: u64,
    pub overflow_inserts: u64,
    /// Generated images that fell outside the region.
    pub out_of_region: u64,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    pub iterations: Vec<IterationStats>,
}

impl RunStats {
    pub fn total_searches(&self) -> u64 {
        self.iterations.iter().map(|s| s.searches).sum()
    }

    pub fn total_comparisons(&self) -> u64 {
        self.iterations.iter().map(|s| s.comparisons).sum()
    }

    pub fn total_overflow_inserts(&self) -> u64 {
        self.iterations.iter().map(|s| s.overflow_inserts).sum()
    }

    pub fn total_out_of_region(&self) -> u64 {
        self.iterations.iter().map(|s| s.out_of_region).sum()
    }

    pub fn total_time(&self) -> Duration {
        self.iterations.iter().map(|s| s.wall_time).sum()
    }

    /// Height of the last iteration's tree (0 for no iterations or the
    /// linear engine).
    pub fn final_height(&self) -> u32 {
        self.iterations.last().map_or(0, |s| s.tree_height)
    }

    /// Largest tree height over all iterations.
    pub fn max_height(&self) -> u32 {
        self.iterations.iter().map(|s| s.tree_height).max().unwrap_or(0)
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub points: PointBuffer,
    pub stats: RunStats,
    /// Quadtree of the final iteration, indexing `points`.
    pub tree: Option<QuadTree>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid system: {0}")]
    InvalidSpec(#[from] ValidationErrors),
    #[error("expected a {expected} system, got {got}")]
    WrongKind { expected: SystemKind, got: SystemKind },
    #[error("n_max must be at least 1")]
    InvalidNmax,
    #[error(transparent)]
    Capacity(#[from] CapacityExceeded),
    #[error("run too large for the linear oracle: about {predicted} points predicted (limit {limit})")]
    OracleTooLarge { predicted: u128, limit: u128 },
}

/// Observer called after every iteration with its statistics and the new
/// support.
pub type IterationHook<'a> = dyn FnMut(&IterationStats, &PointBuffer) + 'a;

pub fn iterate_ifs(spec: &SystemSpec, config: &RunConfig) -> Result<RunOutput, RunError> {
    expect_kind(spec, SystemKind::Ifs)?;
    iterate(spec, config)
}

pub fn iterate_gifs(spec: &SystemSpec, config: &RunConfig) -> Result<RunOutput, RunError> {
    expect_kind(spec, SystemKind::Gifs)?;
    iterate(spec, config)
}

fn expect_kind(spec: &SystemSpec, expected: SystemKind) -> Result<(), RunError> {
    if spec.kind() != expected {
        return Err(RunError::WrongKind {
            expected,
            got: spec.kind(),
        });
    }
    Ok(())
}

/// Runs `config.iterations` iterations for either kind of system.
pub fn iterate(spec: &SystemSpec, config: &RunConfig) -> Result<RunOutput, RunError> {
    iterate_with(spec, config, &mut |_, _| {})
}

pub fn iterate_with(
    spec: &SystemSpec,
    config: &RunConfig,
    hook: &mut IterationHook<'_>,
) -> Result<RunOutput, RunError> {
    let spec = validate_system(spec.clone())?;
    if config.n_max == 0 {
        return Err(RunError::InvalidNmax);
    }
    let rule = WeightRule::new(spec.mode);
    match (config.attractor_only, spec.mode) {
        (true, _) => run(&spec, config, hook, |old, _| old),
        (false, MeasureMode::Classic) => run(&spec, config, hook, move |old, r| rule.combine(old, r)),
        (false, MeasureMode::Idempotent) => {
            run(&spec, config, hook, move |old, r| rule.combine(old, r))
        }
    }
}

fn run<C>(
    spec: &SystemSpec,
    config: &RunConfig,
    hook: &mut IterationHook<'_>,
    combine: C,
) -> Result<RunOutput, RunError>
where
    C: Fn(f64, f64) -> f64 + Copy,
{
    let rule = WeightRule::new(spec.mode);
    let mut current = PointBuffer::with_cap(config.point_cap);
    let (x0, y0) = spec.initial;
    current.push(WeightedPoint::new(x0, y0, spec.initial_weight))?;

    let mut stats = RunStats::default();
    let mut last_tree = None;

    for iteration in 1..=config.iterations {
        let start = Instant::now();
        let mut next = PointBuffer::with_cap(config.point_cap);
        let step = match config.engine {
            Engine::Linear => {
                let mut index = LinearIndex::new();
                let out_of_region = generate(
                    spec,
                    config.precision,
                    rule,
                    &current,
                    &mut next,
                    &mut index,
                    combine,
                )?;
                StepSummary::from_index(&index, out_of_region)
            }
            Engine::Quadtree => {
                let mut tree =
                    QuadTree::with_depth_cap(spec.region, config.n_max, config.depth_cap);
                let out_of_region = generate(
                    spec,
                    config.precision,
                    rule,
                    &current,
                    &mut next,
                    &mut tree,
                    combine,
                )?;
                let summary = StepSummary::from_index(&tree, out_of_region);
                last_tree = Some(tree);
                summary
            }
        };
        let wall_time = start.elapsed();

        current = next;
        let it = IterationStats {
            iteration,
            points: current.len(),
            searches: step.searches,
            comparisons: step.comparisons,
            tree_height: step.height,
            split_count: step.splits,
            overflow_inserts: step.overflow_inserts,
            out_of_region: step.out_of_region,
            wall_time,
        };
        hook(&it, &current);
        stats.iterations.push(it);
    }

    Ok(RunOutput {
        points: current,
        stats,
        tree: last_tree,
    })
}

struct StepSummary {
    searches: u64,
    comparisons: u64,
    splits: u64,
    overflow_inserts: u64,
    height: u32,
    out_of_region: u64,
}

impl StepSummary {
    fn from_index<I: PointIndex>(index: &I, out_of_region: u64) -> Self {
        let c = index.counters();
        StepSummary {
            searches: c.searches,
            comparisons: c.comparisons,
            splits: c.splits,
            overflow_inserts: c.overflow_inserts,
            height: index.height(),
            out_of_region,
        }
    }
}

/// One application of the operator: fills `next` from `current`. Returns
/// the number of images outside the region.
fn generate<I, C>(
    spec: &SystemSpec,
    precision: Precision,
    rule: WeightRule,
    current: &PointBuffer,
    next: &mut PointBuffer,
    index: &mut I,
    combine: C,
) -> Result<u64, CapacityExceeded>
where
    I: PointIndex,
    C: Fn(f64, f64) -> f64 + Copy,
{
    let region = &spec.region;
    match (&spec.maps, precision) {
        (Maps::Ifs(maps), Precision::Binary64) => {
            generate_ifs(maps, region, rule, current, next, index, combine, apply_map2)
        }
        (Maps::Ifs(maps), Precision::Binary32) => {
            let maps32: Vec<(AffineMap2F32, f64)> =
                maps.iter().map(|m| (m.into(), m.weight)).collect();
            generate_ifs(&maps32, region, rule, current, next, index, combine, eval2_f32)
        }
        (Maps::Gifs(maps), Precision::Binary64) => {
            generate_gifs(maps, region, rule, current, next, index, combine, apply_map4)
        }
        (Maps::Gifs(maps), Precision::Binary32) => {
            let maps32: Vec<(AffineMap4F32, f64)> =
                maps.iter().map(|m| (m.into(), m.weight)).collect();
            generate_gifs(&maps32, region, rule, current, next, index, combine, eval4_f32)
        }
    }
}

/// Weight of a map, whatever coefficient type it carries.
trait Weighted {
    fn weight(&self) -> f64;
}

impl Weighted for AffineMap2 {
    fn weight(&self) -> f64 {
        self.weight
    }
}

impl Weighted for AffineMap4 {
    fn weight(&self) -> f64 {
        self.weight
    }
}

impl<M> Weighted for (M, f64) {
    fn weight(&self) -> f64 {
        self.1
    }
}

#[inline]
fn eval2_f32((m, _): &(AffineMap2F32, f64), (x, y): (f64, f64)) -> (f64, f64) {
    let (u, v) = apply_map2_f32(m, (x as f32, y as f32));
    (f64::from(u), f64::from(v))
}

#[inline]
fn eval4_f32(
    (m, _): &(AffineMap4F32, f64),
    (x1, y1): (f64, f64),
    (x2, y2): (f64, f64),
) -> (f64, f64) {
    let (u, v) = apply_map4_f32(m, (x1 as f32, y1 as f32), (x2 as f32, y2 as f32));
    (f64::from(u), f64::from(v))
}

#[allow(clippy::too_many_arguments)]
fn generate_ifs<M, I, C, E>(
    maps: &[M],
    region: &Region,
    rule: WeightRule,
    current: &PointBuffer,
    next: &mut PointBuffer,
    index: &mut I,
    combine: C,
    eval: E,
) -> Result<u64, CapacityExceeded>
where
    M: Weighted,
    I: PointIndex,
    C: Fn(f64, f64) -> f64 + Copy,
    E: Fn(&M, (f64, f64)) -> (f64, f64),
{
    let mut outside = 0;
    for map in maps {
        for pt in current {
            let (u, v) = eval(map, (pt.x, pt.y));
            let r = rule.init_ifs(map.weight(), pt.p);
            outside += u64::from(!region.contains(u, v));
            index.search_and_insert(next, u, v, r, combine)?;
        }
    }
    Ok(outside)
}

#[allow(clippy::too_many_arguments)]
fn generate_gifs<M, I, C, E>(
    maps: &[M],
    region: &Region,
    rule: WeightRule,
    current: &PointBuffer,
    next: &mut PointBuffer,
    index: &mut I,
    combine: C,
    eval: E,
) -> Result<u64, CapacityExceeded>
where
    M: Weighted,
    I: PointIndex,
    C: Fn(f64, f64) -> f64 + Copy,
    E: Fn(&M, (f64, f64), (f64, f64)) -> (f64, f64),
{
    let mut outside = 0;
    for map in maps {
        for first in current {
            for second in current {
                let (u, v) = eval(map, (first.x, first.y), (second.x, second.y));
                let r = rule.init_gifs(map.weight(), first.p, second.p);
                outside += u64::from(!region.contains(u, v));
                index.search_and_insert(next, u, v, r, combine)?;
            }
        }
    }
    Ok(outside)
}

/// Upper bound on the support size after `iterations` steps when no two
/// images coincide: `L^N` for IFS, `n_i = L * n_{i-1}^2` for GIFS.
/// Saturates at `u128::MAX`.
pub fn worst_case_points(kind: SystemKind, num_maps: usize, iterations: usize) -> u128 {
    let l = num_maps as u128;
    let mut n: u128 = 1;
    for _ in 0..iterations {
        n = match kind {
            SystemKind::Ifs => n.saturating_mul(l),
            SystemKind::Gifs => n.saturating_mul(n).saturating_mul(l),
        };
    }
    n
}

pub const ORACLE_LIMIT_IFS: u128 = 1_000_000;
pub const ORACLE_LIMIT_GIFS: u128 = 100_000;

/// Result of running the linear and quadtree engines on the same input.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub linear_points: usize,
    pub quadtree_points: usize,
    pub only_in_linear: usize,
    pub only_in_quadtree: usize,
    /// Largest `|w_linear - w_quadtree|` over positions present in both.
    pub max_abs_weight_discrepancy: f64,
    /// Largest discrepancy relative to `max(|w_linear|, |w_quadtree|)`.
    pub max_rel_weight_discrepancy: f64,
    pub weights_bitwise_equal: bool,
}

impl EquivalenceReport {
    pub fn sets_equal(&self) -> bool {
        self.only_in_linear == 0 && self.only_in_quadtree == 0
    }
}

/// Compares the linear engine (the reference) against the quadtree engine.
pub fn run_oracle_equivalence(
    spec: &SystemSpec,
    iterations: usize,
    n_max: usize,
) -> Result<EquivalenceReport, RunError> {
    let limit = match spec.kind() {
        SystemKind::Ifs => ORACLE_LIMIT_IFS,
        SystemKind::Gifs => ORACLE_LIMIT_GIFS,
    };
    let predicted = worst_case_points(spec.kind(), spec.num_maps(), iterations);
    if predicted > limit {
        return Err(RunError::OracleTooLarge { predicted, limit });
    }

    let linear = iterate(spec, &RunConfig::new(iterations, Engine::Linear, n_max))?;
    let quad = iterate(spec, &RunConfig::new(iterations, Engine::Quadtree, n_max))?;
    Ok(compare_buffers(&linear.points, &quad.points))
}

/// Set comparison of two buffers under bitwise coordinate equality.
pub fn compare_buffers(reference: &PointBuffer, other: &PointBuffer) -> EquivalenceReport {
    let key = |p: &WeightedPoint| (p.x.to_bits(), p.y.to_bits());
    let by_pos: HashMap<(u64, u64), f64> = reference.iter().map(|p| (key(p), p.p)).collect();

    let mut matched = 0;
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    let mut bitwise = true;
    for p in other {
        if let Some(&w) = by_pos.get(&key(p)) {
            matched += 1;
            if w.to_bits() != p.p.to_bits() {
                bitwise = false;
                let diff = (w - p.p).abs();
                let scale = w.abs().max(p.p.abs());
                max_abs = max_abs.max(diff);
                if scale > 0.0 {
                    max_rel = max_rel.max(diff / scale);
                }
            }
        }
    }

    EquivalenceReport {
        linear_points: reference.len(),
        quadtree_points: other.len(),
        only_in_linear: reference.len() - matched,
        only_in_quadtree: other.len() - matched,
        max_abs_weight_discrepancy: max_abs,
        max_rel_weight_discrepancy: max_rel,
        weights_bitwise_equal: bitwise,
    }
}
