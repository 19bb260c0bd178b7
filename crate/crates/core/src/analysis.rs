//! Search-count predictors and the `n_max` sweep harness.

use std::io::{self, Write};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};
use thiserror::Error;

use crate::markov::{iterate, Engine, RunConfig, RunError};
use crate::system::{Precision, SystemKind, SystemSpec};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("cost formulas need at least 2 maps (got {0})")]
    TooFewMaps(u32),
    #[error("the linear-search formulas need at least one iteration")]
    NoIterations,
    #[error("L^(L^(N-1)) is too large to evaluate (exponent {0})")]
    TooLarge(u128),
}

/// Parameters of the search-count formulas: `L` maps, `N` iterations and
/// leaf capacity `n_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostModel {
    pub num_maps: u32,
    pub iterations: u32,
    pub n_max: u64,
}

impl CostModel {
    pub fn new(num_maps: u32, iterations: u32, n_max: u64) -> Self {
        CostModel {
            num_maps,
            iterations,
            n_max,
        }
    }

    fn check_maps(&self) -> Result<(), AnalysisError> {
        if self.num_maps < 2 {
            return Err(AnalysisError::TooFewMaps(self.num_maps));
        }
        Ok(())
    }
}

/// A fixed-width prediction; `saturated` is set when the true value does
/// not fit in `u128` (and `value` is then `u128::MAX`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Predicted {
    pub value: u128,
    pub saturated: bool,
}

impl Predicted {
    fn from_checked(v: Option<u128>) -> Self {
        match v {
            Some(value) => Predicted {
                value,
                saturated: false,
            },
            None => Predicted {
                value: u128::MAX,
                saturated: true,
            },
        }
    }
}

/// `n_max (L^(N+1) - L) / (L - 1)`.
pub fn predicted_searches_ifs_quadtree(model: CostModel) -> Result<Predicted, AnalysisError> {
    model.check_maps()?;
    let l = u128::from(model.num_maps);
    let value = l
        .checked_pow(model.iterations + 1)
        .map(|p| (p - l) / (l - 1))
        .and_then(|v| v.checked_mul(u128::from(model.n_max)));
    Ok(Predicted::from_checked(value))
}

/// `n_max / (L^2 - 1) * ((L^2)^(N+1) - L^2) / L`.
///
/// Evaluated as `n_max * (((L^2)^(N+1) - L^2) / L) / (L^2 - 1)`; both
/// divisions are exact.
pub fn predicted_searches_gifs_quadtree(model: CostModel) -> Result<Predicted, AnalysisError> {
    model.check_maps()?;
    let l = u128::from(model.num_maps);
    let l2 = l * l;
    let value = l2
        .checked_pow(model.iterations + 1)
        .map(|p| (p - l2) / l / (l2 - 1))
        .and_then(|v| v.checked_mul(u128::from(model.n_max)));
    Ok(Predicted::from_checked(value))
}

/// Closed form of the quadtree GIFS count next to direct summations of its
/// loop bounds, `sum_i n_max L n_{i-1}^2`, under two growth laws for the
/// support size `n_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GifsQuadtreeCheck {
    pub closed_form: Predicted,
    /// With `n_i = L^i`.
    pub summed_geometric: BigInt,
    /// With `n_i = L n_{i-1}^2`, the collision-free GIFS growth.
    pub summed_worst_case: BigInt,
}

impl GifsQuadtreeCheck {
    pub fn matches_geometric(&self) -> bool {
        !self.closed_form.saturated && BigInt::from(self.closed_form.value) == self.summed_geometric
    }

    pub fn matches_worst_case(&self) -> bool {
        !self.closed_form.saturated && BigInt::from(self.closed_form.value) == self.summed_worst_case
    }
}

pub fn check_gifs_quadtree(model: CostModel) -> Result<GifsQuadtreeCheck, AnalysisError> {
    let closed_form = predicted_searches_gifs_quadtree(model)?;
    let l = BigInt::from(model.num_maps);
    let n_max = BigInt::from(model.n_max);
    let mut geometric = BigInt::zero();
    let mut worst = BigInt::zero();
    let mut n_geo = BigInt::one();
    let mut n_worst = BigInt::one();
    for _ in 0..model.iterations {
        geometric += &n_max * &l * &n_geo * &n_geo;
        worst += &n_max * &l * &n_worst * &n_worst;
        n_geo *= &l;
        n_worst = &l * &n_worst * &n_worst;
    }
    Ok(GifsQuadtreeCheck {
        closed_form,
        summed_geometric: geometric,
        summed_worst_case: worst,
    })
}

/// Linear-search search counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearCost {
    /// The pre-asymptotic closed form, evaluated exactly.
    pub exact: BigRational,
    /// The closed form with the sum replaced by its dominant last term.
    pub asymptotic: BigRational,
    /// `sum_i L n_{i-1} n_i` (IFS) or `sum_i L n_{i-1}^2 n_i` (GIFS) with
    /// `n_i = L^i`: every search scanning the whole next support.
    pub literal_worst_case: BigInt,
}

impl LinearCost {
    /// `asymptotic / exact` as a float.
    pub fn asymptotic_ratio(&self) -> f64 {
        use num_traits::ToPrimitive;
        (&self.asymptotic / &self.exact).to_f64().unwrap_or(f64::NAN)
    }
}

/// Largest exponent accepted for `L^(L^(i-1))`.
const MAX_TOWER_EXPONENT: u128 = 1 << 26;

fn tower(l: u32, i: u32) -> Result<BigInt, AnalysisError> {
    // L^(L^(i-1))
    let exp = u128::from(l)
        .checked_pow(i - 1)
        .filter(|&e| e <= MAX_TOWER_EXPONENT)
        .ok_or(AnalysisError::TooLarge(u128::MAX))?;
    Ok(Pow::pow(BigInt::from(l), exp as u32))
}

pub fn predicted_searches_linear(
    model: CostModel,
    kind: SystemKind,
) -> Result<LinearCost, AnalysisError> {
    model.check_maps()?;
    if model.iterations == 0 {
        return Err(AnalysisError::NoIterations);
    }
    let n = model.iterations;
    let l = BigInt::from(model.num_maps);
    let lm1 = BigInt::from(model.num_maps - 1);
    let l2 = &l * &l;
    let ratio = |num: BigInt, den: BigInt| BigRational::new(num, den);

    let mut literal = BigInt::zero();
    let mut prev = BigInt::one();
    for _ in 0..n {
        let next = &prev * &l;
        literal += match kind {
            SystemKind::Ifs => &l * &prev * &next,
            SystemKind::Gifs => &l * &prev * &prev * &next,
        };
        prev = next;
    }

    let (exact, asymptotic) = match kind {
        SystemKind::Ifs => {
            // -N L^2/(L-1) + L^2/(L-1) * sum_{i=1}^{N} L^(L^(i-1))
            let mut sum = BigInt::zero();
            for i in 1..=n {
                sum += tower(model.num_maps, i)?;
            }
            let head = ratio(-BigInt::from(n) * &l2, lm1.clone());
            let exact = &head + ratio(&l2 * sum, lm1.clone());
            let asymptotic = &head + ratio(&l2 * tower(model.num_maps, n)?, lm1.clone());
            (exact, asymptotic)
        }
        SystemKind::Gifs => {
            // (L^2 - L^2 L^N)/(L-1)^2 + 1/(L-1) * sum_{i=1}^{N} L^(i+1) L^(L^(i-1))
            let mut sum = BigInt::zero();
            for i in 1..=n {
                sum += Pow::pow(&l, i + 1) * tower(model.num_maps, i)?;
            }
            let head = ratio(&l2 - &l2 * Pow::pow(&l, n), &lm1 * &lm1);
            let exact = &head + ratio(sum, lm1.clone());
            let last = Pow::pow(&l, n + 1) * tower(model.num_maps, n)?;
            let asymptotic = &head + ratio(last, lm1.clone());
            (exact, asymptotic)
        }
    };

    Ok(LinearCost {
        exact,
        asymptotic,
        literal_worst_case: literal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub n_max: usize,
    pub height: u32,
    pub points: usize,
    /// Median wall time over the repetitions.
    pub time_seconds: f64,
    pub searches: u64,
    pub comparisons: u64,
    pub overflow_inserts: u64,
}

#[derive(Debug)]
pub struct SweepReport {
    /// Sorted by `n_max`.
    pub rows: Vec<SweepRow>,
    pub baseline_linear_time: Option<f64>,
    /// Rows whose run failed, with the error.
    pub failures: Vec<(usize, RunError)>,
}

impl SweepReport {
    pub fn heights(&self) -> Vec<u32> {
        self.rows.iter().map(|r| r.height).collect()
    }

    pub fn best_row(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .min_by(|a, b| a.time_seconds.total_cmp(&b.time_seconds))
    }

    /// `nmax,height,points,time_s,comparisons`, preceded by a
    /// `# linear_baseline_s=<t>` comment when a baseline was measured.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut out = io::BufWriter::new(out);
        if let Some(t) = self.baseline_linear_time {
            writeln!(out, "# linear_baseline_s={t:.6}")?;
        }
        writeln!(out, "nmax,height,points,time_s,comparisons")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{:.6},{}",
                r.n_max, r.height, r.points, r.time_seconds, r.comparisons
            )?;
        }
        out.flush()
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub iterations: usize,
    pub nmax_values: Vec<usize>,
    pub with_linear_baseline: bool,
    /// Timed runs per row; the median time is reported.
    pub repetitions: usize,
    pub precision: Precision,
}

impl SweepOptions {
    pub fn new(iterations: usize, nmax_values: Vec<usize>) -> Self {
        SweepOptions {
            iterations,
            nmax_values,
            with_linear_baseline: false,
            repetitions: 3,
            precision: Precision::default(),
        }
    }
}

/// The leaf capacities used in the published tables, `2, 4, ..., 1024`.
pub fn table_nmax_values() -> Vec<usize> {
    (1..=10).map(|k| 1usize << k).collect()
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

/// One quadtree run per `n_max` (repeated for timing), plus an optional
/// linear-engine baseline. Rows run sequentially so timings do not
/// contend. A failing row is recorded and the sweep continues.
pub fn run_nmax_sweep(spec: &SystemSpec, options: &SweepOptions) -> SweepReport {
    let mut nmax_values = options.nmax_values.clone();
    nmax_values.sort_unstable();
    nmax_values.dedup();
    let reps = options.repetitions.max(1);

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    'rows: for &n_max in &nmax_values {
        let mut config = RunConfig::new(options.iterations, Engine::Quadtree, n_max);
        config.precision = options.precision;
        let mut times = Vec::with_capacity(reps);
        let mut row = None;
        for _ in 0..reps {
            let start = Instant::now();
            match iterate(spec, &config) {
                Ok(out) => {
                    times.push(start.elapsed());
                    row.get_or_insert(SweepRow {
                        n_max,
                        height: out.stats.final_height(),
                        points: out.points.len(),
                        time_seconds: 0.0,
                        searches: out.stats.total_searches(),
                        comparisons: out.stats.total_comparisons(),
                        overflow_inserts: out.stats.total_overflow_inserts(),
                    });
                }
                Err(e) => {
                    failures.push((n_max, e));
                    continue 'rows;
                }
            }
        }
        if let Some(mut row) = row {
            row.time_seconds = median(times).as_secs_f64();
            rows.push(row);
        }
    }

    let baseline_linear_time = if options.with_linear_baseline {
        let mut config = RunConfig::new(options.iterations, Engine::Linear, 1);
        config.precision = options.precision;
        let start = Instant::now();
        match iterate(spec, &config) {
            Ok(_) => Some(start.elapsed().as_secs_f64()),
            Err(e) => {
                failures.push((0, e));
                None
            }
        }
    } else {
        None
    };

    SweepReport {
        rows,
        baseline_linear_time,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ifs_quadtree_closed_form() {
        let p = predicted_searches_ifs_quadtree(CostModel::new(4, 1, 64)).unwrap();
        assert_eq!(p, Predicted { value: 256, saturated: false });
        assert_eq!(
            predicted_searches_ifs_quadtree(CostModel::new(4, 10, 64)).unwrap().value,
            89_478_400
        );
        assert_eq!(predicted_searches_ifs_quadtree(CostModel::new(3, 0, 64)).unwrap().value, 0);
    }

    #[test]
    fn saturation_flag() {
        let p = predicted_searches_ifs_quadtree(CostModel::new(4, 80, 64)).unwrap();
        assert!(p.saturated);
        let p = predicted_searches_gifs_quadtree(CostModel::new(4, 40, 64)).unwrap();
        assert!(p.saturated);
    }

    #[test]
    fn needs_two_maps() {
        assert_eq!(
            predicted_searches_ifs_quadtree(CostModel::new(1, 3, 64)),
            Err(AnalysisError::TooFewMaps(1))
        );
        assert_eq!(
            predicted_searches_linear(CostModel::new(2, 0, 64), SystemKind::Ifs),
            Err(AnalysisError::NoIterations)
        );
    }

    #[test]
    fn gifs_quadtree_zero_iterations() {
        assert_eq!(predicted_searches_gifs_quadtree(CostModel::new(3, 0, 64)).unwrap().value, 0);
    }

    #[test]
    fn gifs_check_flags_growth_mismatch() {
        let c = check_gifs_quadtree(CostModel::new(3, 4, 64)).unwrap();
        assert!(c.matches_geometric());
        assert!(!c.matches_worst_case());
        let c = check_gifs_quadtree(CostModel::new(3, 1, 64)).unwrap();
        assert!(c.matches_geometric() && c.matches_worst_case());
    }

    #[test]
    fn linear_single_iteration() {
        // N = 1, L = 2: -4 + 4 * 2^(2^0) = 4.
        let c = predicted_searches_linear(CostModel::new(2, 1, 64), SystemKind::Ifs).unwrap();
        assert_eq!(c.exact, BigRational::from_integer(BigInt::from(4)));
        assert_eq!(c.exact, c.asymptotic);
        assert_eq!(c.literal_worst_case, BigInt::from(4));
    }

    #[test]
    fn too_large_tower() {
        assert!(matches!(
            predicted_searches_linear(CostModel::new(4, 20, 64), SystemKind::Ifs),
            Err(AnalysisError::TooLarge(_))
        ));
    }

    #[test]
    fn sweep_csv_layout() {
        let report = SweepReport {
            rows: vec![SweepRow {
                n_max: 64,
                height: 10,
                points: 1048540,
                time_seconds: 0.25,
                searches: 1,
                comparisons: 7,
                overflow_inserts: 0,
            }],
            baseline_linear_time: Some(12.5),
            failures: vec![],
        };
        let mut out = Vec::new();
        report.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "# linear_baseline_s=12.500000\nnmax,height,points,time_s,comparisons\n64,10,1048540,0.250000,7\n"
        );
    }

    #[test]
    fn table_values() {
        assert_eq!(table_nmax_values(), vec![2, 4, 8, 16, 32, 64, 128, 256, 512, 1024]);
    }
}
