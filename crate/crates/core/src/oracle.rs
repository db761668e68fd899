//! Independent volume computations used to cross-check the truncation
//! coefficients: explicit clipping for convex bodies and Monte Carlo sampling
//! for anything else.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::polytope::{Polyhedron, Vec3};
use crate::truncation::PlaneFrame;

const CONVEXITY_TOL: f64 = 1e-10;
const CHUNK: usize = 1 << 16;
const MAX_RECASTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("vertex {vertex} lies outside the plane of face {face} by {excess}")]
    NotConvex {
        face: usize,
        vertex: usize,
        excess: f64,
    },
}

pub fn check_convex(p: &Polyhedron) -> Result<(), OracleError> {
    let tol = CONVEXITY_TOL * p.diameter();
    for (k, g) in p.face_geometry().iter().enumerate() {
        for (i, x) in p.vertices().iter().enumerate() {
            let excess = (x - g.reference).dot(&g.normal);
            if excess > tol {
                return Err(OracleError::NotConvex {
                    face: k,
                    vertex: i,
                    excess,
                });
            }
        }
    }
    Ok(())
}

/// Area vector of a closed polygon loop.
fn area_vector(points: &[Vec3]) -> Vec3 {
    let n = points.len();
    (0..n)
        .map(|i| points[i].cross(&points[(i + 1) % n]))
        .sum::<Vec3>()
        * 0.5
}

/// Part of a polygon on the non-positive side of `level`.
fn clip_polygon(points: &[Vec3], frame: &PlaneFrame) -> Vec<Vec3> {
    let n = points.len();
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let (a, b) = (points[i], points[(i + 1) % n]);
        let (la, lb) = (frame.level(&a), frame.level(&b));
        if la <= 0.0 {
            out.push(a);
        }
        if (la < 0.0 && lb > 0.0) || (la > 0.0 && lb < 0.0) {
            out.push(a + (b - a) * (la / (la - lb)));
        }
    }
    out
}

/// Truncated volume of a convex polyhedron by explicit face clipping and cap
/// reconstruction.
pub fn clip_convex_volume(p: &Polyhedron, frame: &PlaneFrame) -> Result<f64, OracleError> {
    check_convex(p)?;
    let tol = 1e-12 * p.diameter().max(1.0);
    let levels: Vec<f64> = p.vertices().iter().map(|x| frame.level(x)).collect();
    let lowest = levels.iter().copied().fold(f64::INFINITY, f64::min);
    let highest = levels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lowest >= -tol {
        return Ok(0.0);
    }
    if highest <= tol {
        return Ok(p.total_volume());
    }

    let origin = p.vertex_centroid();
    let mut volume = 0.0;
    let mut cap: Vec<Vec3> = Vec::new();
    for face in p.faces() {
        let loop_pts: Vec<Vec3> = face.iter().map(|&i| p.vertices()[i] - origin).collect();
        let shifted = PlaneFrame::new(frame.normal, frame.base - origin, frame.s);
        let clipped = clip_polygon(&loop_pts, &shifted);
        if clipped.len() < 3 {
            cap.extend(clipped.iter().filter(|x| shifted.level(x).abs() <= tol));
            continue;
        }
        volume += clipped[0].dot(&area_vector(&clipped)) / 3.0;
        cap.extend(clipped.iter().filter(|x| shifted.level(x).abs() <= tol));
    }

    dedup_points(&mut cap, tol * 10.0);
    if cap.len() >= 3 {
        let center = cap.iter().sum::<Vec3>() / cap.len() as f64;
        let n = frame.normal;
        let helper = if n.x.abs() < 0.9 {
            Vec3::x()
        } else {
            Vec3::y()
        };
        let u = n.cross(&helper).normalize();
        let w = n.cross(&u);
        let angle = |x: &Vec3| {
            let d = x - center;
            d.dot(&w).atan2(d.dot(&u))
        };
        cap.sort_by(|a, b| angle(a).total_cmp(&angle(b)));
        volume += cap[0].dot(&area_vector(&cap)) / 3.0;
    }
    Ok(volume)
}

fn dedup_points(points: &mut Vec<Vec3>, tol: f64) {
    let mut unique: Vec<Vec3> = Vec::with_capacity(points.len());
    for x in points.drain(..) {
        if !unique.iter().any(|y| (x - y).norm() <= tol) {
            unique.push(x);
        }
    }
    *points = unique;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub volume: f64,
    pub std_error: f64,
    pub samples: usize,
}

struct RayFace {
    normal: Vec3,
    offset: f64,
    // Projection axes dropping the dominant normal component.
    axes: (usize, usize),
    polygon: Vec<(f64, f64)>,
    lo: (f64, f64),
    hi: (f64, f64),
}

/// Point-in-polyhedron test by signed ray crossings (winding number), which
/// handles coplanar hole faces.
pub struct InsideTest {
    faces: Vec<RayFace>,
    direction: Vec3,
    near: f64,
}

impl InsideTest {
    pub fn new(p: &Polyhedron) -> Self {
        let faces = p
            .faces()
            .iter()
            .zip(p.face_geometry())
            .map(|(face, g)| {
                let n = g.normal;
                let drop = (0..3)
                    .max_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs()))
                    .unwrap();
                let axes = ((drop + 1) % 3, (drop + 2) % 3);
                let polygon: Vec<(f64, f64)> = face
                    .iter()
                    .map(|&i| (p.vertices()[i][axes.0], p.vertices()[i][axes.1]))
                    .collect();
                let lo = polygon.iter().fold((f64::INFINITY, f64::INFINITY), |m, q| {
                    (m.0.min(q.0), m.1.min(q.1))
                });
                let hi = polygon
                    .iter()
                    .fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |m, q| {
                        (m.0.max(q.0), m.1.max(q.1))
                    });
                RayFace {
                    normal: n,
                    offset: n.dot(&g.reference),
                    axes,
                    polygon,
                    lo,
                    hi,
                }
            })
            .collect();
        Self {
            faces,
            direction: Vec3::new(1.0, 2f64.sqrt(), std::f64::consts::PI).normalize(),
            near: 1e-9 * p.diameter().max(1.0),
        }
    }

    /// Winding number along `dir`, or `None` when the ray passes too close to
    /// an edge or grazes a face.
    fn winding(&self, x: &Vec3, dir: &Vec3) -> Option<i32> {
        let mut winding = 0;
        for f in &self.faces {
            let dn = dir.dot(&f.normal);
            let gap = f.offset - x.dot(&f.normal);
            if dn.abs() < 1e-12 {
                if gap.abs() <= self.near {
                    return None;
                }
                continue;
            }
            let t = gap / dn;
            if t <= 0.0 {
                continue;
            }
            let y = x + dir * t;
            let q = (y[f.axes.0], y[f.axes.1]);
            if q.0 < f.lo.0 - self.near
                || q.0 > f.hi.0 + self.near
                || q.1 < f.lo.1 - self.near
                || q.1 > f.hi.1 + self.near
            {
                continue;
            }
            match point_in_polygon(q, &f.polygon, self.near) {
                Some(true) => winding += if dn > 0.0 { 1 } else { -1 },
                Some(false) => {}
                None => return None,
            }
        }
        Some(winding)
    }

    pub fn contains(&self, x: &Vec3, rng: &mut impl Rng) -> bool {
        if let Some(w) = self.winding(x, &self.direction) {
            return w > 0;
        }
        for _ in 0..MAX_RECASTS {
            let dir = Vec3::new(
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
            );
            if dir.norm() < 1e-3 {
                continue;
            }
            if let Some(w) = self.winding(x, &dir.normalize()) {
                return w > 0;
            }
        }
        false
    }
}

/// Even-odd test in the plane; `None` when `q` is within `near` of an edge.
fn point_in_polygon(q: (f64, f64), polygon: &[(f64, f64)], near: f64) -> Option<bool> {
    let n = polygon.len();
    let mut inside = false;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        let (ex, ey) = (b.0 - a.0, b.1 - a.1);
        let len2 = ex * ex + ey * ey;
        let t = (((q.0 - a.0) * ex + (q.1 - a.1) * ey) / len2).clamp(0.0, 1.0);
        let (dx, dy) = (q.0 - a.0 - t * ex, q.1 - a.1 - t * ey);
        if dx * dx + dy * dy <= near * near {
            return None;
        }
        if (a.1 > q.1) != (b.1 > q.1) {
            let x = a.0 + (q.1 - a.1) / (b.1 - a.1) * ex;
            if q.0 < x {
                inside = !inside;
            }
        }
    }
    Some(inside)
}

/// Uniform samples in the bounding box with their inside flags resolved once,
/// so many planes can be evaluated against the same sample set.
pub struct McSampler {
    inside: Vec<Vec3>,
    samples: usize,
    box_volume: f64,
}

impl McSampler {
    pub fn new(p: &Polyhedron, samples: usize, seed: u64) -> Self {
        let test = InsideTest::new(p);
        let (lo, hi) = p.bounding_box();
        let extent = hi - lo;
        let chunks = samples.div_ceil(CHUNK);
        let inside: Vec<Vec<Vec3>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(c as u64);
                let count = CHUNK.min(samples - c * CHUNK);
                let mut found = Vec::with_capacity(count);
                for _ in 0..count {
                    let u: [f64; 3] = rng.random();
                    let x = lo + extent.component_mul(&Vec3::from(u));
                    if test.contains(&x, &mut rng) {
                        found.push(x);
                    }
                }
                found
            })
            .collect();
        Self {
            inside: inside.concat(),
            samples,
            box_volume: extent.x * extent.y * extent.z,
        }
    }

    fn estimate_hits(&self, hits: usize) -> McEstimate {
        let n = self.samples as f64;
        let p = hits as f64 / n;
        let var = if self.samples > 1 {
            p * (1.0 - p) * n / (n - 1.0)
        } else {
            0.0
        };
        McEstimate {
            volume: p * self.box_volume,
            std_error: var.sqrt() * self.box_volume / n.sqrt(),
            samples: self.samples,
        }
    }

    pub fn total(&self) -> McEstimate {
        self.estimate_hits(self.inside.len())
    }

    pub fn estimate(&self, frame: &PlaneFrame) -> McEstimate {
        let hits = self.inside.iter().filter(|x| frame.level(x) <= 0.0).count();
        self.estimate_hits(hits)
    }
}

/// Monte Carlo estimate of the volume below the plane.
pub fn monte_carlo_volume(
    p: &Polyhedron,
    frame: &PlaneFrame,
    samples: usize,
    seed: u64,
) -> McEstimate {
    McSampler::new(p, samples, seed).estimate(frame)
}
