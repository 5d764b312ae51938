//! Synthetic data and timing for the coalesce scaling measurement.

use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::exec::Execution;
use crate::physical::coalesce_op_with;
use crate::relation::{DataType, PeriodRow, Schema, SqlPeriodRelation, Tuple, Value};
use crate::telement::{Interval, TimeDomain};

/// Average number of rows sharing a key.
pub const ROWS_PER_KEY: usize = 8;

/// `n` rows over `(key int, tag str)` with short, frequently overlapping
/// intervals. Keys are shared by about [`ROWS_PER_KEY`] rows.
pub fn synthetic_relation(n: usize, seed: u64) -> SqlPeriodRelation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = TimeDomain::new(0, 10_000).expect("valid domain");
    let schema = Schema::of(&[("key", DataType::Int), ("tag", DataType::Str)]).expect("distinct");
    let keys = (n / ROWS_PER_KEY).max(1) as i64;
    let tags: Vec<Value> = ["x", "y"].into_iter().map(Value::str).collect();
    let rows = (0..n)
        .map(|_| {
            let key = rng.gen_range(0..keys);
            let tag = tags[(key % 2) as usize].clone();
            let begin = rng.gen_range(0..9_900);
            let end = begin + rng.gen_range(1..100);
            let mult = rng.gen_range(1..=2);
            PeriodRow::new(Tuple::new(vec![Value::Int(key), tag]), Interval::new(begin, end).expect("begin < end"), mult)
        })
        .collect();
    SqlPeriodRelation::new(schema, domain, rows).expect("rows fit the domain")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub rows: usize,
    /// One duration per repetition.
    pub runs: Vec<Duration>,
}

impl Measurement {
    pub fn mean_secs(&self) -> f64 {
        if self.runs.is_empty() {
            return 0.0;
        }
        self.runs.iter().map(Duration::as_secs_f64).sum::<f64>() / self.runs.len() as f64
    }

    pub fn stddev_secs(&self) -> f64 {
        if self.runs.len() < 2 {
            return 0.0;
        }
        let mean = self.mean_secs();
        let var = self
            .runs
            .iter()
            .map(|d| (d.as_secs_f64() - mean).powi(2))
            .sum::<f64>()
            / (self.runs.len() - 1) as f64;
        var.sqrt()
    }

    pub fn min_secs(&self) -> f64 {
        self.runs
            .iter()
            .map(Duration::as_secs_f64)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub measurements: Vec<Measurement>,
    /// Slope of log(time) over log(rows); `None` with fewer than two usable
    /// sizes.
    pub exponent: Option<f64>,
}

/// Times the coalesce operator on synthetic inputs of each size.
pub fn run_scaling(sizes: &[usize], repeats: usize, exec: Execution, seed: u64) -> ScalingReport {
    let measurements: Vec<Measurement> = sizes
        .iter()
        .map(|&n| {
            let input = synthetic_relation(n, seed);
            let runs = (0..repeats.max(1))
                .map(|_| {
                    let start = Instant::now();
                    let out = coalesce_op_with(&input, exec).expect("synthetic multiplicities are small");
                    let elapsed = start.elapsed();
                    std::hint::black_box(out);
                    elapsed
                })
                .collect();
            Measurement { rows: n, runs }
        })
        .collect();
    let points: Vec<(f64, f64)> = measurements
        .iter()
        .map(|m| (m.rows as f64, m.min_secs()))
        .collect();
    ScalingReport {
        exponent: fit_exponent(&points),
        measurements,
    }
}

/// Least-squares slope of `ln y` against `ln x`, skipping non-positive
/// points.
pub fn fit_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
