//! Root finding for the plane position that truncates a prescribed volume
//! fraction.
//!
//! All iteration happens in normalized units: `z = (s - s_min) / L` and
//! `alpha = V / |P|`, so tolerances are independent of the polyhedron's size.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::truncation::{local_cubic, LocalCubic, StaticCoefficients, VolumeSample};

pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_ZERO_TOLERANCE: f64 = 1e-14;
pub const DEFAULT_MAX_ITERATIONS: usize = 100;

const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PositionError {
    #[error("target fraction {0} outside [0, 1]")]
    TargetOutOfRange(f64),
    #[error("tolerance {eps} must exceed zero tolerance {eps0}")]
    BadTolerance { eps: f64, eps0: f64 },
    #[error("vanishing first and second derivative, no step possible")]
    NoProgress,
    #[error("target {target} not enclosed by cubic values [{low}, {high}]")]
    NoSignChange { target: f64, low: f64, high: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "converged")]
    Converged,
    #[serde(rename = "cubic")]
    CubicSolved,
    #[serde(rename = "bisection")]
    BisectionFallback,
    #[serde(rename = "clamped")]
    BoundaryClamped,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::CubicSolved => "cubic",
            Status::BisectionFallback => "bisection",
            Status::BoundaryClamped => "clamped",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "converged" => Ok(Status::Converged),
            "cubic" => Ok(Status::CubicSolved),
            "bisection" => Ok(Status::BisectionFallback),
            "clamped" => Ok(Status::BoundaryClamped),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

/// How the position of a trace entry was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Initial,
    Taylor,
    Newton,
    LoopBreak,
    Midpoint,
    Bisection,
    Cubic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub s: f64,
    /// Fraction at `s`: truncated for every kind except `Cubic`, where it is
    /// the in-bracket polynomial value.
    pub alpha: f64,
    pub kind: StepKind,
}

#[derive(Debug, Clone, Copy)]
pub struct PositionQuery<'a> {
    coeffs: &'a StaticCoefficients,
    target: f64,
    eps: f64,
    eps0: f64,
    max_iterations: usize,
    trace: bool,
}

impl<'a> PositionQuery<'a> {
    pub fn new(coeffs: &'a StaticCoefficients, target: f64) -> Result<Self, PositionError> {
        if !(0.0..=1.0).contains(&target) {
            return Err(PositionError::TargetOutOfRange(target));
        }
        Ok(Self {
            coeffs,
            target,
            eps: DEFAULT_TOLERANCE,
            eps0: DEFAULT_ZERO_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            trace: false,
        })
    }

    pub fn with_tolerance(mut self, eps: f64, eps0: f64) -> Result<Self, PositionError> {
        if !(eps > eps0 && eps0 >= 0.0) {
            return Err(PositionError::BadTolerance { eps, eps0 });
        }
        self.eps = eps;
        self.eps0 = eps0;
        Ok(self)
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn with_trace(mut self, on: bool) -> Self {
        self.trace = on;
        self
    }

    pub fn coeffs(&self) -> &StaticCoefficients {
        self.coeffs
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn tolerance(&self) -> f64 {
        self.eps
    }

    pub fn zero_tolerance(&self) -> f64 {
        self.eps0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionResult {
    pub s_star: f64,
    pub alpha_achieved: f64,
    pub n_trunc: usize,
    pub status: Status,
    pub trace: Option<Vec<TraceEntry>>,
}

/// Normalized initial guess from the cubic `3z^2 - 2z^3` with vanishing
/// boundary derivatives.
pub fn initial_guess_normalized(target: f64) -> f64 {
    let x = (2.0 * target - 1.0).clamp(-1.0, 1.0);
    (0.5 + (x.asin() / 3.0).sin()).clamp(0.0, 1.0)
}

pub fn initial_guess(coeffs: &StaticCoefficients, target: f64) -> f64 {
    coeffs.s_min() + coeffs.span() * initial_guess_normalized(target)
}

/// Whether the boundary derivatives admit a monotone cubic on `[0, L]`.
pub fn admissible_boundary_derivatives(d_minus: f64, d_plus: f64, span: f64) -> bool {
    let sum = d_minus + d_plus;
    let diff = d_minus - d_plus;
    let shifted = sum - 4.0 / span;
    3.0 * shifted * shifted + diff * diff <= 12.0 / (span * span) || sum * span <= 3.0
}

/// Increment towards `target` from the quadratic model of `alpha` at a point
/// with value `alpha` and derivatives `d1`, `d2`.
pub fn taylor_increment(
    alpha: f64,
    d1: f64,
    d2: f64,
    target: f64,
    eps0: f64,
) -> Result<f64, PositionError> {
    if d1 <= eps0 && d2 <= eps0 {
        return Err(PositionError::NoProgress);
    }
    let delta = alpha - target;
    if d2.abs() > eps0 {
        let disc = d1 * d1 - 2.0 * delta * d2;
        if disc >= 0.0 {
            let denom = d1 + disc.sqrt();
            if denom > eps0 {
                return Ok(-2.0 * delta / denom);
            }
        }
    }
    newton_increment(alpha, d1, target, eps0)
}

pub fn newton_increment(alpha: f64, d1: f64, target: f64, eps0: f64) -> Result<f64, PositionError> {
    if d1 > eps0 {
        Ok(-(alpha - target) / d1)
    } else {
        Err(PositionError::NoProgress)
    }
}

/// Taylor step in physical units. Steps leaving `[s_min, s_max]` are replaced
/// by the Newton step.
pub fn taylor_step(
    coeffs: &StaticCoefficients,
    sample: &VolumeSample,
    target: f64,
    eps0: f64,
) -> Result<f64, PositionError> {
    let n = Normalizer::new(coeffs);
    let (z, alpha, d1, d2) = n.sample(sample);
    let dz = taylor_increment(alpha, d1, d2, target, eps0)?;
    let dz = if (0.0..=1.0).contains(&(z + dz)) {
        dz
    } else {
        newton_increment(alpha, d1, target, eps0)?
    };
    Ok(dz * n.span)
}

/// Root of `cubic(z) = target` on `[lo, hi]`, where the cubic is
/// non-decreasing across the interval.
pub fn cubic_root_in_bracket(
    cubic: &LocalCubic,
    target: f64,
    lo: f64,
    hi: f64,
    eps: f64,
    eps0: f64,
) -> Result<f64, PositionError> {
    let (f_lo, f_hi) = (cubic.eval(lo) - target, cubic.eval(hi) - target);
    if f_lo > eps0 || f_hi < -eps0 {
        return Err(PositionError::NoSignChange {
            target,
            low: f_lo + target,
            high: f_hi + target,
        });
    }
    if f_lo >= 0.0 {
        return Ok(lo);
    }
    if f_hi <= 0.0 {
        return Ok(hi);
    }

    let width = hi - lo;
    let local = cubic.recentered(lo);
    let [c0, c1, c2, c3] = local.coeffs;
    let scale = |c: f64, k: i32| (c * width.powi(k)).abs();
    if scale(c3, 3) < eps0 {
        let t = if scale(c2, 2) < eps0 {
            (target - c0) / c1
        } else {
            // Root of c2 t^2 + c1 t + (c0 - target), stable branch.
            let r = c0 - target;
            let disc = (c1 * c1 - 4.0 * c2 * r).max(0.0);
            let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
            if c1 >= 0.0 && q != 0.0 {
                r / q
            } else {
                q / c2
            }
        };
        if t.is_finite() {
            return Ok((lo + t).clamp(lo, hi));
        }
    }

    let inner = (eps * 1e-3).max(f64::EPSILON);
    let (mut a, mut b) = (lo, hi);
    let mut z = lo + width * (-f_lo) / (f_hi - f_lo);
    for _ in 0..MAX_BISECTIONS {
        let f = cubic.eval(z) - target;
        if f.abs() <= inner {
            return Ok(z);
        }
        if f < 0.0 {
            a = z;
        } else {
            b = z;
        }
        if b - a <= 4.0 * f64::EPSILON * b.abs().max(a.abs()).max(1.0) {
            return Ok(z);
        }
        let slope = cubic.derivative(z);
        let next = z - f / slope;
        z = if slope > 0.0 && next > a && next < b {
            next
        } else {
            0.5 * (a + b)
        };
    }
    Ok(z)
}

struct Normalizer {
    s_min: f64,
    s_max: f64,
    span: f64,
    volume: f64,
}

impl Normalizer {
    fn new(coeffs: &StaticCoefficients) -> Self {
        Self {
            s_min: coeffs.s_min(),
            s_max: coeffs.s_max(),
            span: coeffs.span(),
            volume: coeffs.total_volume(),
        }
    }

    fn z(&self, s: f64) -> f64 {
        (s - self.s_min) / self.span
    }

    fn s(&self, z: f64) -> f64 {
        (self.s_min + self.span * z).clamp(self.s_min, self.s_max)
    }

    fn sample(&self, v: &VolumeSample) -> (f64, f64, f64, f64) {
        (
            self.z(v.s),
            v.volume / self.volume,
            v.d1 * self.span / self.volume,
            v.d2 * self.span * self.span / self.volume,
        )
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Method {
    Proposed,
    Newton,
}

struct Solver<'q, 'a> {
    q: &'q PositionQuery<'a>,
    norm: Normalizer,
    n_trunc: usize,
    // Sign-change interval in normalized units: alpha(lo) <= target <= alpha(hi).
    lo: f64,
    hi: f64,
    trace: Option<Vec<TraceEntry>>,
}

impl<'q, 'a> Solver<'q, 'a> {
    fn new(q: &'q PositionQuery<'a>) -> Self {
        Self {
            q,
            norm: Normalizer::new(q.coeffs),
            n_trunc: 0,
            lo: 0.0,
            hi: 1.0,
            trace: q.trace.then(Vec::new),
        }
    }

    fn truncate(&mut self, z: f64, kind: StepKind) -> VolumeSample {
        let sample = self.q.coeffs.truncated_volume(self.norm.s(z));
        self.n_trunc += 1;
        let alpha = sample.volume / self.norm.volume;
        if alpha < self.q.target {
            self.lo = self.lo.max(z);
        } else if alpha > self.q.target {
            self.hi = self.hi.min(z);
        }
        self.record(sample.s, alpha, kind);
        sample
    }

    fn record(&mut self, s: f64, alpha: f64, kind: StepKind) {
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEntry { s, alpha, kind });
        }
    }

    fn finish(self, s_star: f64, alpha: f64, status: Status) -> PositionResult {
        PositionResult {
            s_star,
            alpha_achieved: alpha,
            n_trunc: self.n_trunc,
            status,
            trace: self.trace,
        }
    }

    fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn run(mut self, method: Method) -> PositionResult {
        let q = self.q;
        let target = q.target;
        if target <= q.eps0 {
            let s = q.coeffs.s_min();
            self.record(s, 0.0, StepKind::Initial);
            return self.finish(s, 0.0, Status::BoundaryClamped);
        }
        if target >= 1.0 - q.eps0 {
            let s = q.coeffs.s_max();
            self.record(s, 1.0, StepKind::Initial);
            return self.finish(s, 1.0, Status::BoundaryClamped);
        }

        let mut z = initial_guess_normalized(target);
        let mut kind = StepKind::Initial;
        let mut previous: Option<f64> = None;
        for _ in 0..q.max_iterations {
            let sample = self.truncate(z, kind);
            let (_, alpha, d1, d2) = self.norm.sample(&sample);
            if (alpha - target).abs() <= q.eps {
                return self.finish(sample.s, alpha, Status::Converged);
            }

            if method == Method::Proposed {
                let cubic = local_cubic(&sample).rescaled(
                    self.norm.s_min,
                    self.norm.span,
                    self.norm.volume,
                );
                let (b0, b1) = q.coeffs.bracket(sample.bracket);
                let (z0, z1) = (self.norm.z(b0), self.norm.z(b1));
                let (a0, a1) = (cubic.eval(z0), cubic.eval(z1));
                if a0 <= target && target <= a1 {
                    if let Ok(root) = cubic_root_in_bracket(&cubic, target, z0, z1, q.eps, q.eps0) {
                        let alpha = cubic.eval(root);
                        let s = self.norm.s(root);
                        self.record(s, alpha, StepKind::Cubic);
                        return self.finish(s, alpha, Status::CubicSolved);
                    }
                }
            }

            let newton = newton_increment(alpha, d1, target, q.eps0)
                .ok()
                .map(|dz| z + dz)
                .filter(|next| (0.0..=1.0).contains(next));
            let (mut next, mut next_kind) = match method {
                Method::Proposed => match taylor_increment(alpha, d1, d2, target, q.eps0) {
                    Ok(dz) if (0.0..=1.0).contains(&(z + dz)) => (Some(z + dz), StepKind::Taylor),
                    _ => (newton, StepKind::Newton),
                },
                Method::Newton => (newton, StepKind::Newton),
            };
            if let (Some(n), Some(p)) = (next, previous) {
                if (n - p).abs() < q.eps0 {
                    next = newton;
                    next_kind = StepKind::LoopBreak;
                }
            }
            let next = match next {
                Some(n) => n,
                None => {
                    next_kind = StepKind::Midpoint;
                    self.midpoint()
                }
            };
            previous = Some(z);
            z = next;
            kind = next_kind;
        }
        self.bisect()
    }

    fn bisect(mut self) -> PositionResult {
        let q = self.q;
        let mut best: Option<(f64, f64)> = None;
        for _ in 0..MAX_BISECTIONS {
            let z = self.midpoint();
            let sample = self.truncate(z, StepKind::Bisection);
            let alpha = sample.volume / self.norm.volume;
            let err = (alpha - q.target).abs();
            if best.is_none_or(|(_, a)| err < (a - q.target).abs()) {
                best = Some((sample.s, alpha));
            }
            if err <= q.eps || self.hi - self.lo <= 2.0 * f64::EPSILON {
                break;
            }
        }
        let (s, alpha) = best.expect("at least one bisection step");
        self.finish(s, alpha, Status::BisectionFallback)
    }
}

/// Implicit bracketing with Taylor steps and an exact cubic solve in the
/// target bracket.
pub fn position(query: &PositionQuery) -> PositionResult {
    Solver::new(query).run(Method::Proposed)
}

/// Plain Newton iteration on the same truncation, for comparison.
pub fn position_newton_baseline(query: &PositionQuery) -> PositionResult {
    Solver::new(query).run(Method::Newton)
}
