//! Domain types for (G)IFS definitions: regions, affine maps, weighted
//! points and the point buffer shared by every engine.

use std::fmt;

use thiserror::Error;

/// Axis-aligned rectangle `[a, b] x [c, d]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Region {
    pub const UNIT: Region = Region { a: 0.0, b: 1.0, c: 0.0, d: 1.0 };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Region { a, b, c, d }
    }

    pub fn is_well_formed(&self) -> bool {
        self.a < self.b && self.c < self.d
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.a <= x && x <= self.b && self.c <= y && y <= self.d
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.a + (self.b - self.a) / 2.0,
            self.c + (self.d - self.c) / 2.0,
        )
    }
}

/// Affine map of the plane, `(x, y) -> (a11 x + a12 y + b1, a21 x + a22 y + b2)`,
/// together with its measure weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap2 {
    pub a11: f64,
    pub a12: f64,
    pub b1: f64,
    pub a21: f64,
    pub a22: f64,
    pub b2: f64,
    pub weight: f64,
}

impl AffineMap2 {
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        apply_map2(self, (x, y))
    }
}

/// Affine map `R^4 -> R^2` taking two points of the plane, used by GIFS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap4 {
    pub a11: f64,
    pub a12: f64,
    pub a13: f64,
    pub a14: f64,
    pub b1: f64,
    pub a21: f64,
    pub a22: f64,
    pub a23: f64,
    pub a24: f64,
    pub b2: f64,
    pub weight: f64,
}

impl AffineMap4 {
    pub fn apply(&self, p1: (f64, f64), p2: (f64, f64)) -> (f64, f64) {
        apply_map4(self, p1, p2)
    }
}

/// Evaluates an IFS map. The operand order is fixed (left to right); Rust
/// never contracts this into fused multiply-adds.
#[inline]
pub fn apply_map2(m: &AffineMap2, (x, y): (f64, f64)) -> (f64, f64) {
    (
        m.a11 * x + m.a12 * y + m.b1,
        m.a21 * x + m.a22 * y + m.b2,
    )
}

#[inline]
pub fn apply_map4(m: &AffineMap4, (x1, y1): (f64, f64), (x2, y2): (f64, f64)) -> (f64, f64) {
    (
        m.a11 * x1 + m.a12 * y1 + m.a13 * x2 + m.a14 * y2 + m.b1,
        m.a21 * x1 + m.a22 * y1 + m.a23 * x2 + m.a24 * y2 + m.b2,
    )
}

/// Arithmetic used to evaluate the maps. Point coordinates are always
/// stored as binary64; in binary32 mode every stored coordinate is a
/// binary32 value and maps are evaluated with binary32 coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Precision {
    #[default]
    Binary32,
    Binary64,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Binary32 => "f32",
            Precision::Binary64 => "f64",
        })
    }
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f32" | "binary32" => Ok(Precision::Binary32),
            "f64" | "binary64" => Ok(Precision::Binary64),
            other => Err(format!("unknown precision `{other}` (expected f32 or f64)")),
        }
    }
}

/// An [`AffineMap2`] with coefficients rounded to binary32.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap2F32 {
    pub a11: f32,
    pub a12: f32,
    pub b1: f32,
    pub a21: f32,
    pub a22: f32,
    pub b2: f32,
}

impl From<&AffineMap2> for AffineMap2F32 {
    fn from(m: &AffineMap2) -> Self {
        AffineMap2F32 {
            a11: m.a11 as f32,
            a12: m.a12 as f32,
            b1: m.b1 as f32,
            a21: m.a21 as f32,
            a22: m.a22 as f32,
            b2: m.b2 as f32,
        }
    }
}

/// An [`AffineMap4`] with coefficients rounded to binary32.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap4F32 {
    pub a11: f32,
    pub a12: f32,
    pub a13: f32,
    pub a14: f32,
    pub b1: f32,
    pub a21: f32,
    pub a22: f32,
    pub a23: f32,
    pub a24: f32,
    pub b2: f32,
}

impl From<&AffineMap4> for AffineMap4F32 {
    fn from(m: &AffineMap4) -> Self {
        AffineMap4F32 {
            a11: m.a11 as f32,
            a12: m.a12 as f32,
            a13: m.a13 as f32,
            a14: m.a14 as f32,
            b1: m.b1 as f32,
            a21: m.a21 as f32,
            a22: m.a22 as f32,
            a23: m.a23 as f32,
            a24: m.a24 as f32,
            b2: m.b2 as f32,
        }
    }
}

#[inline]
pub fn apply_map2_f32(m: &AffineMap2F32, (x, y): (f32, f32)) -> (f32, f32) {
    (
        m.a11 * x + m.a12 * y + m.b1,
        m.a21 * x + m.a22 * y + m.b2,
    )
}

#[inline]
pub fn apply_map4_f32(m: &AffineMap4F32, (x1, y1): (f32, f32), (x2, y2): (f32, f32)) -> (f32, f32) {
    (
        m.a11 * x1 + m.a12 * y1 + m.a13 * x2 + m.a14 * y2 + m.b1,
        m.a21 * x1 + m.a22 * y1 + m.a23 * x2 + m.a24 * y2 + m.b2,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemKind {
    Ifs,
    Gifs,
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SystemKind::Ifs => "ifs",
            SystemKind::Gifs => "gifs",
        })
    }
}

/// How weights propagate: probability measures (sum of products) or
/// idempotent max-plus measures (max of sums).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeasureMode {
    Classic,
    Idempotent,
}

impl MeasureMode {
    /// Weight of the initial Dirac mass.
    pub fn initial_weight(self) -> f64 {
        match self {
            MeasureMode::Classic => 1.0,
            MeasureMode::Idempotent => 0.0,
        }
    }
}

impl fmt::Display for MeasureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeasureMode::Classic => "classic",
            MeasureMode::Idempotent => "idempotent",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Maps {
    Ifs(Vec<AffineMap2>),
    Gifs(Vec<AffineMap4>),
}

impl Maps {
    pub fn len(&self) -> usize {
        match self {
            Maps::Ifs(m) => m.len(),
            Maps::Gifs(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> SystemKind {
        match self {
            Maps::Ifs(_) => SystemKind::Ifs,
            Maps::Gifs(_) => SystemKind::Gifs,
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        match self {
            Maps::Ifs(m) => m.iter().map(|m| m.weight).collect(),
            Maps::Gifs(m) => m.iter().map(|m| m.weight).collect(),
        }
    }

    /// Replaces every map weight, in order. Panics if the lengths differ.
    pub fn set_weights(&mut self, weights: &[f64]) {
        assert_eq!(weights.len(), self.len(), "one weight per map");
        match self {
            Maps::Ifs(m) => m.iter_mut().zip(weights).for_each(|(m, &w)| m.weight = w),
            Maps::Gifs(m) => m.iter_mut().zip(weights).for_each(|(m, &w)| m.weight = w),
        }
    }
}

/// A complete (G)IFS definition. The kind is carried by [`Maps`].
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub mode: MeasureMode,
    pub region: Region,
    pub maps: Maps,
    pub initial: (f64, f64),
    pub initial_weight: f64,
}

impl SystemSpec {
    pub fn kind(&self) -> SystemKind {
        self.maps.kind()
    }

    /// Number of maps, `L`.
    pub fn num_maps(&self) -> usize {
        self.maps.len()
    }
}

const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("maps: at least one map is required")]
    EmptyMapList,
    #[error("map {index} weight {weight}: {rule}")]
    WeightSignViolation {
        index: usize,
        weight: f64,
        rule: &'static str,
    },
    #[error("weights: {rule} (got {value})")]
    WeightNormalizationViolation { rule: &'static str, value: f64 },
    #[error("initial_weight: must be {expected} in {mode} mode (got {got})")]
    InitialWeightViolation {
        mode: MeasureMode,
        expected: f64,
        got: f64,
    },
    #[error("initial: point ({x}, {y}) lies outside the region")]
    InitialPointOutsideRegion { x: f64, y: f64 },
    #[error("region: requires a < b and c < d")]
    DegenerateRegion,
}

/// All violations found by [`validate_system`].
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ValidationErrors(pub Vec<ValidationError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Checks the weight normalization rules of the measure mode, the initial
/// weight and point, and the region. Contractivity is not checked.
pub fn validate_system(spec: SystemSpec) -> Result<SystemSpec, ValidationErrors> {
    let mut errors = Vec::new();

    if !spec.region.is_well_formed() {
        errors.push(ValidationError::DegenerateRegion);
    }

    let weights = spec.maps.weights();
    if weights.is_empty() {
        errors.push(ValidationError::EmptyMapList);
    }

    match spec.mode {
        MeasureMode::Idempotent => {
            for (index, &weight) in weights.iter().enumerate() {
                if !(weight <= 0.0) {
                    errors.push(ValidationError::WeightSignViolation {
                        index,
                        weight,
                        rule: "idempotent weights must be <= 0",
                    });
                }
            }
            if !weights.is_empty() {
                let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if max != 0.0 {
                    errors.push(ValidationError::WeightNormalizationViolation {
                        rule: "idempotent weights must have maximum exactly 0",
                        value: max,
                    });
                }
            }
        }
        MeasureMode::Classic => {
            for (index, &weight) in weights.iter().enumerate() {
                if !(weight >= 0.0) {
                    errors.push(ValidationError::WeightSignViolation {
                        index,
                        weight,
                        rule: "classic weights must be >= 0",
                    });
                }
            }
            if !weights.is_empty() {
                let sum: f64 = weights.iter().sum();
                if !((sum - 1.0).abs() <= NORMALIZATION_TOLERANCE) {
                    errors.push(ValidationError::WeightNormalizationViolation {
                        rule: "classic weights must sum to 1",
                        value: sum,
                    });
                }
            }
        }
    }

    let expected = spec.mode.initial_weight();
    if spec.initial_weight != expected {
        errors.push(ValidationError::InitialWeightViolation {
            mode: spec.mode,
            expected,
            got: spec.initial_weight,
        });
    }

    let (x, y) = spec.initial;
    if !spec.region.contains(x, y) {
        errors.push(ValidationError::InitialPointOutsideRegion { x, y });
    }

    if errors.is_empty() {
        Ok(spec)
    } else {
        Err(ValidationErrors(errors))
    }
}

/// A support point and its weight: a probability mass in classic mode, a
/// log-density in `[-inf, 0]` in idempotent mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPoint {
    pub x: f64,
    pub y: f64,
    pub p: f64,
}

impl WeightedPoint {
    pub fn new(x: f64, y: f64, p: f64) -> Self {
        WeightedPoint { x, y, p }
    }

    /// Coordinate equality used for deduplication: bitwise on binary64.
    #[inline]
    pub fn same_position(&self, x: f64, y: f64) -> bool {
        self.x.to_bits() == x.to_bits() && self.y.to_bits() == y.to_bits()
    }
}

/// Default hard cap on stored points (2^27).
pub const DEFAULT_POINT_CAP: usize = 1 << 27;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("point buffer capacity of {cap} points exceeded")]
pub struct CapacityExceeded {
    pub cap: usize,
}

/// Growable array of weighted points with a hard size cap.
#[derive(Debug, Clone, PartialEq)]
pub struct PointBuffer {
    items: Vec<WeightedPoint>,
    cap: usize,
}

impl Default for PointBuffer {
    fn default() -> Self {
        PointBuffer::new()
    }
}

impl PointBuffer {
    pub fn new() -> Self {
        PointBuffer::with_cap(DEFAULT_POINT_CAP)
    }

    pub fn with_cap(cap: usize) -> Self {
        PointBuffer {
            items: Vec::new(),
            cap,
        }
    }

    pub fn from_points(points: Vec<WeightedPoint>) -> Self {
        PointBuffer {
            cap: DEFAULT_POINT_CAP.max(points.len()),
            items: points,
        }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn as_slice(&self) -> &[WeightedPoint] {
        &self.items
    }

    pub fn iter(&self) -> std::slice::Iter<'_, WeightedPoint> {
        self.items.iter()
    }

    pub fn get(&self, index: usize) -> Option<&WeightedPoint> {
        self.items.get(index)
    }

    pub fn weight_mut(&mut self, index: usize) -> &mut f64 {
        &mut self.items[index].p
    }

    /// Appends a point and returns its index.
    pub fn push(&mut self, point: WeightedPoint) -> Result<usize, CapacityExceeded> {
        if self.items.len() >= self.cap {
            return Err(CapacityExceeded { cap: self.cap });
        }
        self.items.push(point);
        Ok(self.items.len() - 1)
    }

    pub fn clear(&mut self) {
        self.items.clear();
    }

    pub fn into_vec(self) -> Vec<WeightedPoint> {
        self.items
    }
}

impl std::ops::Index<usize> for PointBuffer {
    type Output = WeightedPoint;

    fn index(&self, index: usize) -> &WeightedPoint {
        &self.items[index]
    }
}

impl<'a> IntoIterator for &'a PointBuffer {
    type Item = &'a WeightedPoint;
    type IntoIter = std::slice::Iter<'a, WeightedPoint>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}
