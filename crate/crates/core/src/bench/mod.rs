//! Parameter sweep over normals and volume fractions, with per-instance
//! records and aggregated truncation counts and timings.

mod emit;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polytope::{Polyhedron, Vec3};
use crate::positioning::{position, position_newton_baseline, PositionQuery, Status};
use crate::truncation::precompute;

pub use emit::{
    emit, read_csv, write_aggregate_csv, write_csv, write_heatmap_csv, write_json, Format,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid tolerance {0}")]
    InvalidTolerance(f64),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub phi: f64,
    pub theta: f64,
    pub normal: Vec3,
}

impl Direction {
    pub fn new(phi: f64, theta: f64) -> Self {
        let (sp, cp) = phi.sin_cos();
        let (st, ct) = theta.sin_cos();
        Self {
            phi,
            theta,
            normal: Vec3::new(cp * st, sp * st, ct),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    pub normals: Vec<Direction>,
    pub fractions: Vec<f64>,
}

impl SampleGrid {
    pub fn instance_count(&self) -> usize {
        self.normals.len() * self.fractions.len()
    }
}

/// Normals `(phi, theta) in pi/(2M) {1..2M} x pi/M {0..M}` ordered by `phi`
/// then `theta`, and fractions sorted ascending: `1e-9..1e-5`, `m_vof`
/// equidistant values on `[1e-4, 1 - 1e-4]` and their complements.
pub fn generate_grid(m_normal: usize, m_vof: usize) -> Result<SampleGrid, BenchError> {
    if m_normal < 1 {
        return Err(BenchError::InvalidGrid(format!(
            "m_normal must be >= 1, got {m_normal}"
        )));
    }
    if m_vof < 2 {
        return Err(BenchError::InvalidGrid(format!(
            "m_vof must be >= 2, got {m_vof}"
        )));
    }
    let mut normals = Vec::with_capacity(2 * m_normal * (m_normal + 1));
    for i in 1..=2 * m_normal {
        for j in 0..=m_normal {
            let phi = PI / (2 * m_normal) as f64 * i as f64;
            let theta = PI / m_normal as f64 * j as f64;
            normals.push(Direction::new(phi, theta));
        }
    }

    let mut fractions = Vec::with_capacity(m_vof + 10);
    for k in (5..=9).rev() {
        fractions.push(10f64.powi(-k));
    }
    let step = (1.0 - 2e-4) / (m_vof - 1) as f64;
    for m in 0..m_vof {
        fractions.push(1e-4 + m as f64 * step);
    }
    for k in 5..=9 {
        fractions.push(1.0 - 10f64.powi(-k));
    }
    Ok(SampleGrid { normals, fractions })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Proposed,
    Newton,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Proposed => "proposed",
            Method::Newton => "newton",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proposed" => Ok(Method::Proposed),
            "newton" => Ok(Method::Newton),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

/// One positioning instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub shape: String,
    pub alpha: f64,
    pub phi: f64,
    pub theta: f64,
    pub s_star: f64,
    /// Fraction re-truncated at `s_star` after the timed call.
    pub alpha_achieved: f64,
    pub n_trunc: usize,
    pub status: Status,
    pub time_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionAggregate {
    pub alpha: f64,
    pub n_av: f64,
    pub n_std: f64,
    pub t_av_ns: f64,
    pub t_std_ns: f64,
    pub fallbacks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalAggregate {
    pub phi: f64,
    pub theta: f64,
    pub n_av: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub shape: String,
    pub method: Method,
    pub instances: usize,
    /// Mean over fractions of the per-fraction averages.
    pub n_av: f64,
    pub t_av_ns: f64,
    /// Standard deviations over all instances.
    pub n_std: f64,
    pub t_std_ns: f64,
    pub fallbacks: usize,
    /// Instances with `|alpha_achieved - alpha| > tol` that did not fall back.
    pub violations: usize,
    pub max_error: f64,
    pub per_fraction: Vec<FractionAggregate>,
    #[serde(skip)]
    pub per_normal: Vec<NormalAggregate>,
}

#[derive(Debug, Clone, Copy)]
pub struct BenchConfig {
    pub method: Method,
    pub tol: f64,
    pub keep_records: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            method: Method::Proposed,
            tol: 1e-12,
            keep_records: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    /// Canonical order: fraction, then `phi`, then `theta`. Empty unless
    /// records were requested.
    pub records: Vec<Record>,
    pub aggregate: AggregateRow,
}

/// Running mean and variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).sqrt()
        }
    }
}

/// Streaming aggregation, fed one record at a time in any order.
#[derive(Debug, Clone)]
pub struct StreamingAggregate {
    tol: f64,
    fractions: Vec<(Welford, Welford, usize)>,
    normals: Vec<Welford>,
    all_n: Welford,
    all_t: Welford,
    violations: usize,
    max_error: f64,
}

impl StreamingAggregate {
    pub fn new(fractions: usize, normals: usize, tol: f64) -> Self {
        Self {
            tol,
            fractions: vec![(Welford::default(), Welford::default(), 0); fractions],
            normals: vec![Welford::default(); normals],
            all_n: Welford::default(),
            all_t: Welford::default(),
            violations: 0,
            max_error: 0.0,
        }
    }

    pub fn push(&mut self, fraction: usize, normal: usize, r: &Record) {
        let (n, t, fallbacks) = &mut self.fractions[fraction];
        n.push(r.n_trunc as f64);
        t.push(r.time_ns as f64);
        let fell_back = r.status == Status::BisectionFallback;
        *fallbacks += fell_back as usize;
        self.normals[normal].push(r.n_trunc as f64);
        self.all_n.push(r.n_trunc as f64);
        self.all_t.push(r.time_ns as f64);
        let err = (r.alpha_achieved - r.alpha).abs();
        if !fell_back {
            self.max_error = self.max_error.max(err);
            if err > self.tol {
                self.violations += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &StreamingAggregate) {
        for (a, b) in self.fractions.iter_mut().zip(&other.fractions) {
            a.0.merge(&b.0);
            a.1.merge(&b.1);
            a.2 += b.2;
        }
        for (a, b) in self.normals.iter_mut().zip(&other.normals) {
            a.merge(b);
        }
        self.all_n.merge(&other.all_n);
        self.all_t.merge(&other.all_t);
        self.violations += other.violations;
        self.max_error = self.max_error.max(other.max_error);
    }

    pub fn finish(&self, shape: &str, method: Method, grid: &SampleGrid) -> AggregateRow {
        let per_fraction: Vec<FractionAggregate> = self
            .fractions
            .iter()
            .zip(&grid.fractions)
            .map(|((n, t, f), &alpha)| FractionAggregate {
                alpha,
                n_av: n.mean(),
                n_std: n.std(),
                t_av_ns: t.mean(),
                t_std_ns: t.std(),
                fallbacks: *f,
            })
            .collect();
        let k = per_fraction.len().max(1) as f64;
        AggregateRow {
            shape: shape.to_string(),
            method,
            instances: self.all_n.count(),
            n_av: per_fraction.iter().map(|a| a.n_av).sum::<f64>() / k,
            t_av_ns: per_fraction.iter().map(|a| a.t_av_ns).sum::<f64>() / k,
            n_std: self.all_n.std(),
            t_std_ns: self.all_t.std(),
            fallbacks: per_fraction.iter().map(|a| a.fallbacks).sum(),
            violations: self.violations,
            max_error: self.max_error,
            per_fraction,
            per_normal: self
                .normals
                .iter()
                .zip(&grid.normals)
                .map(|(w, d)| NormalAggregate {
                    phi: d.phi,
                    theta: d.theta,
                    n_av: w.mean(),
                })
                .collect(),
        }
    }
}

/// Aggregation over stored records in canonical order, computing means first
/// and deviations in a second pass.
pub fn aggregate_two_pass(
    records: &[Record],
    grid: &SampleGrid,
    shape: &str,
    method: Method,
    tol: f64,
) -> AggregateRow {
    let nn = grid.normals.len();
    let nf = grid.fractions.len();
    assert_eq!(records.len(), nn * nf, "records must cover the grid");
    let mean = |xs: &mut dyn Iterator<Item = f64>| {
        let (s, c) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
        if c == 0 {
            0.0
        } else {
            s / c as f64
        }
    };
    let std = |xs: &mut dyn Iterator<Item = f64>, m: f64| {
        let (s, c) = xs.fold((0.0, 0usize), |(s, c), x| (s + (x - m) * (x - m), c + 1));
        if c == 0 {
            0.0
        } else {
            (s / c as f64).sqrt()
        }
    };
    let ntrunc = |r: &Record| r.n_trunc as f64;
    let time = |r: &Record| r.time_ns as f64;

    let per_fraction: Vec<FractionAggregate> = (0..nf)
        .map(|a| {
            let rows = &records[a * nn..(a + 1) * nn];
            let n_av = mean(&mut rows.iter().map(ntrunc));
            let t_av = mean(&mut rows.iter().map(time));
            FractionAggregate {
                alpha: grid.fractions[a],
                n_av,
                n_std: std(&mut rows.iter().map(ntrunc), n_av),
                t_av_ns: t_av,
                t_std_ns: std(&mut rows.iter().map(time), t_av),
                fallbacks: rows
                    .iter()
                    .filter(|r| r.status == Status::BisectionFallback)
                    .count(),
            }
        })
        .collect();
    let per_normal = (0..nn)
        .map(|i| NormalAggregate {
            phi: grid.normals[i].phi,
            theta: grid.normals[i].theta,
            n_av: mean(&mut (0..nf).map(|a| ntrunc(&records[a * nn + i]))),
        })
        .collect();
    let all_n = mean(&mut records.iter().map(ntrunc));
    let all_t = mean(&mut records.iter().map(time));
    let ok = records
        .iter()
        .filter(|r| r.status != Status::BisectionFallback);
    let errors: Vec<f64> = ok.map(|r| (r.alpha_achieved - r.alpha).abs()).collect();
    AggregateRow {
        shape: shape.to_string(),
        method,
        instances: records.len(),
        n_av: mean(&mut per_fraction.iter().map(|a| a.n_av)),
        t_av_ns: mean(&mut per_fraction.iter().map(|a| a.t_av_ns)),
        n_std: std(&mut records.iter().map(ntrunc), all_n),
        t_std_ns: std(&mut records.iter().map(time), all_t),
        fallbacks: per_fraction.iter().map(|a| a.fallbacks).sum(),
        violations: errors.iter().filter(|&&e| e > tol).count(),
        max_error: errors.iter().copied().fold(0.0, f64::max),
        per_fraction,
        per_normal,
    }
}

fn run_normal(
    p: &Polyhedron,
    shape: &str,
    dir: &Direction,
    fractions: &[f64],
    config: &BenchConfig,
) -> Vec<Record> {
    fractions
        .iter()
        .map(|&alpha| {
            let start = Instant::now();
            let coeffs = precompute(p, dir.normal);
            let query = PositionQuery::new(&coeffs, alpha)
                .and_then(|q| q.with_tolerance(config.tol, q.zero_tolerance()))
                .expect("grid fractions and tolerance are valid");
            let result = match config.method {
                Method::Proposed => position(&query),
                Method::Newton => position_newton_baseline(&query),
            };
            let time_ns = start.elapsed().as_nanos() as u64;
            let verified = coeffs.truncated_volume(result.s_star).volume / coeffs.total_volume();
            Record {
                shape: shape.to_string(),
                alpha,
                phi: dir.phi,
                theta: dir.theta,
                s_star: result.s_star,
                alpha_achieved: verified,
                n_trunc: result.n_trunc,
                status: result.status,
                time_ns,
            }
        })
        .collect()
}

/// Positions the plane for every (normal, fraction) instance of the grid.
/// Each instance is timed from coefficient precomputation to result.
pub fn run_benchmark(
    p: &Polyhedron,
    shape: &str,
    grid: &SampleGrid,
    config: &BenchConfig,
) -> Result<BenchOutcome, BenchError> {
    if config.tol.is_nan() || config.tol <= 0.0 {
        return Err(BenchError::InvalidTolerance(config.tol));
    }
    let nn = grid.normals.len();
    let nf = grid.fractions.len();
    let empty = || StreamingAggregate::new(nf, nn, config.tol);

    if !config.keep_records {
        let agg = grid
            .normals
            .par_iter()
            .enumerate()
            .fold(empty, |mut agg, (i, dir)| {
                for (a, r) in run_normal(p, shape, dir, &grid.fractions, config)
                    .iter()
                    .enumerate()
                {
                    agg.push(a, i, r);
                }
                agg
            })
            .reduce(empty, |mut a, b| {
                a.merge(&b);
                a
            });
        return Ok(BenchOutcome {
            records: Vec::new(),
            aggregate: agg.finish(shape, config.method, grid),
        });
    }

    let by_normal: Vec<Vec<Record>> = grid
        .normals
        .par_iter()
        .map(|dir| run_normal(p, shape, dir, &grid.fractions, config))
        .collect();
    let mut agg = empty();
    for (i, rows) in by_normal.iter().enumerate() {
        for (a, r) in rows.iter().enumerate() {
            agg.push(a, i, r);
        }
    }
    let mut slots: Vec<Option<Record>> = vec![None; nn * nf];
    for (i, rows) in by_normal.into_iter().enumerate() {
        for (a, r) in rows.into_iter().enumerate() {
            slots[a * nn + i] = Some(r);
        }
    }
    let records = slots
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect();
    Ok(BenchOutcome {
        records,
        aggregate: agg.finish(shape, config.method, grid),
    })
}
