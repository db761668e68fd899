//! Truncated volume of a polyhedron below a plane of fixed normal, as a
//! function of the plane's signed distance `s`.
//!
//! The divergence theorem is applied twice: once to reduce the volume to a
//! weighted sum of clipped face areas, and once more on every face to reduce
//! each area to a weighted sum of clipped edge lengths. Choosing the volume
//! reference on the plane and the area reference on the line where the face
//! plane meets the cutting plane removes the cap terms, so the only quantities
//! that depend on `s` are the clipped edge lengths `l(s)`. Everything else is
//! collected once per (polyhedron, normal) pair in [`StaticCoefficients`].
//!
//! Evaluation is a single loop over faces with an inner loop over that face's
//! own edges; edges shared by two faces are visited twice and no connectivity
//! between faces is ever built.

use crate::polytope::{Polyhedron, Vec3};

/// Half-width of the tube around the plane inside which a vertex counts as
/// lying on it, for a polyhedron of unit size.
pub const ZERO_TOL: f64 = 1e-14;
/// Faces with `|<n_F, n>| >= 1 - PARALLEL_TOL` are treated as parallel.
pub const PARALLEL_TOL: f64 = 1e-12;

/// Plane `{x : <x - base, normal> = s}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFrame {
    pub normal: Vec3,
    pub base: Vec3,
    pub s: f64,
}

impl PlaneFrame {
    pub fn new(normal: Vec3, base: Vec3, s: f64) -> Self {
        debug_assert!((normal.norm() - 1.0).abs() < 1e-12, "normal must be unit");
        Self { normal, base, s }
    }

    /// Level-set value `<x - base, normal> - s`; negative below the plane.
    pub fn level(&self, x: &Vec3) -> f64 {
        (x - self.base).dot(&self.normal) - self.s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(i8)]
pub enum VertexStatus {
    Interior = -1,
    OnPlane = 0,
    Exterior = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(i8)]
pub enum EdgeStatus {
    /// One vertex on the plane, the other below it.
    DegenerateInterior = -2,
    Interior = -1,
    Intersected = 0,
    Exterior = 1,
    /// One vertex on the plane, the other above it.
    DegenerateExterior = 2,
    /// Both vertices on the plane.
    InPlane = 3,
}

impl VertexStatus {
    pub fn code(self) -> i8 {
        self as i8
    }
}

impl EdgeStatus {
    pub fn code(self) -> i8 {
        self as i8
    }
}

/// Status of a level-set value with respect to the tube `(-tol, tol)`.
#[inline]
pub fn classify_level(level: f64, tol: f64) -> VertexStatus {
    if level.abs() < tol {
        VertexStatus::OnPlane
    } else if level < 0.0 {
        VertexStatus::Interior
    } else {
        VertexStatus::Exterior
    }
}

pub fn classify_vertex(x: &Vec3, frame: &PlaneFrame, tol: f64) -> VertexStatus {
    classify_level(frame.level(x), tol)
}

#[inline]
pub fn classify_edge(a: VertexStatus, b: VertexStatus) -> EdgeStatus {
    use VertexStatus::*;
    match (a, b) {
        (Exterior, Exterior) => EdgeStatus::Exterior,
        (Interior, Interior) => EdgeStatus::Interior,
        (Interior, Exterior) | (Exterior, Interior) => EdgeStatus::Intersected,
        (OnPlane, Exterior) | (Exterior, OnPlane) => EdgeStatus::DegenerateExterior,
        (OnPlane, Interior) | (Interior, OnPlane) => EdgeStatus::DegenerateInterior,
        (OnPlane, OnPlane) => EdgeStatus::InPlane,
    }
}

/// One-sided limit used where `V''` and `V'` jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Limit {
    /// Approaching from below; on-plane vertices behave as exterior.
    Left,
    /// Approaching from above; on-plane vertices behave as interior.
    Right,
}

#[derive(Debug, Clone, Copy)]
pub struct ParallelFace {
    /// `<n_F, n>`, either `+1` or `-1` up to rounding.
    pub sigma: f64,
    /// Signed distance of the face plane.
    pub offset: f64,
    pub area: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct FaceCoefficients {
    /// `B_k = <x_ref - x_b, n_F>`.
    pub constant: f64,
    /// `C_k = -<n_F, n>`.
    pub linear: f64,
    pub parallel: Option<ParallelFace>,
    first_edge: u32,
    edge_count: u32,
}

#[derive(Debug, Clone, Copy)]
pub struct EdgeCoefficients {
    /// `a_{k,m}`: constant part of the co-normal distance to the face base point.
    pub a: f64,
    /// `b_{k,m}`: its slope in `s`.
    pub b: f64,
    pub length: f64,
    /// `|x_j - x_i| / |<x_j - x_i, n>|`, or zero for edges parallel to the plane.
    pub slope: f64,
    /// Signed distances of the start and end vertex.
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceArea {
    pub area: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Truncated volume and its first three derivatives with respect to `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeSample {
    pub s: f64,
    pub volume: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    /// Index `i` of the bracket `(s_i, s_{i+1}]` containing `s`.
    pub bracket: usize,
}

/// Everything about a (polyhedron, normal) pair that does not depend on `s`.
#[derive(Debug, Clone)]
pub struct StaticCoefficients {
    normal: Vec3,
    base: Vec3,
    tol: f64,
    total_volume: f64,
    faces: Vec<FaceCoefficients>,
    edges: Vec<EdgeCoefficients>,
    bounds: Vec<f64>,
}

/// Precomputes the static coefficients with the vertex centroid as base point.
pub fn precompute(p: &Polyhedron, normal: Vec3) -> StaticCoefficients {
    StaticCoefficients::new(p, normal)
}

pub fn truncated_volume(coeffs: &StaticCoefficients, s: f64) -> VolumeSample {
    coeffs.truncated_volume(s)
}

impl StaticCoefficients {
    pub fn new(p: &Polyhedron, normal: Vec3) -> Self {
        Self::with_base(p, normal, p.vertex_centroid())
    }

    pub fn with_base(p: &Polyhedron, normal: Vec3, base: Vec3) -> Self {
        let tol = ZERO_TOL * p.diameter().max(1.0);

        let distances: Vec<f64> = p
            .vertices()
            .iter()
            .map(|v| (v - base).dot(&normal))
            .collect();

        let mut sorted = distances.clone();
        sorted.sort_by(f64::total_cmp);
        let mut bounds: Vec<f64> = Vec::with_capacity(sorted.len());
        for d in sorted {
            match bounds.last() {
                Some(&last) if d - last < tol => {}
                _ => bounds.push(d),
            }
        }

        let mut faces = Vec::with_capacity(p.face_count());
        let mut edges = Vec::with_capacity(2 * p.edge_count());
        for (face, geom) in p.faces().iter().zip(p.face_geometry()) {
            let n_f = geom.normal;
            let cos = n_f.dot(&normal);
            let x_ref = geom.reference - base;
            let constant = x_ref.dot(&n_f);
            let linear = -cos;
            let first_edge = edges.len() as u32;

            let parallel = (cos.abs() >= 1.0 - PARALLEL_TOL).then(|| ParallelFace {
                sigma: cos.signum(),
                offset: x_ref.dot(&normal),
                area: geom.area,
            });

            let denom = 1.0 - cos * cos;
            let shift = if parallel.is_none() {
                constant * cos / denom
            } else {
                0.0
            };
            let count = face.len();
            for m in 0..count {
                let i = face[m];
                let j = face[(m + 1) % count];
                let xi = p.vertices()[i];
                let xj = p.vertices()[j];
                let length = (xj - xi).norm();
                let (start, end) = (distances[i], distances[j]);
                let rise = (end - start).abs();
                let slope = if rise >= tol { length / rise } else { 0.0 };
                let (a, b) = if parallel.is_none() {
                    let cn = geom.conormals[m];
                    let cn_dot = cn.dot(&normal);
                    ((xi - base).dot(&cn) + shift * cn_dot, -cn_dot / denom)
                } else {
                    (0.0, 0.0)
                };
                edges.push(EdgeCoefficients {
                    a,
                    b,
                    length,
                    slope,
                    start,
                    end,
                });
            }
            faces.push(FaceCoefficients {
                constant,
                linear,
                parallel,
                first_edge,
                edge_count: count as u32,
            });
        }

        Self {
            normal,
            base,
            tol,
            total_volume: p.total_volume(),
            faces,
            edges,
            bounds,
        }
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn base(&self) -> Vec3 {
        self.base
    }

    pub fn frame(&self, s: f64) -> PlaneFrame {
        PlaneFrame::new(self.normal, self.base, s)
    }

    /// Tube half-width used for all zero comparisons.
    pub fn zero_tol(&self) -> f64 {
        self.tol
    }

    pub fn total_volume(&self) -> f64 {
        self.total_volume
    }

    pub fn faces(&self) -> &[FaceCoefficients] {
        &self.faces
    }

    pub fn edges(&self) -> &[EdgeCoefficients] {
        &self.edges
    }

    /// Edges of face `k`, in loop order.
    pub fn face_edges(&self, k: usize) -> &[EdgeCoefficients] {
        let f = &self.faces[k];
        &self.edges[f.first_edge as usize..(f.first_edge + f.edge_count) as usize]
    }

    /// Sorted, deduplicated vertex signed distances.
    pub fn bracket_bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn bracket_count(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn bracket(&self, i: usize) -> (f64, f64) {
        (self.bounds[i], self.bounds[i + 1])
    }

    pub fn s_min(&self) -> f64 {
        self.bounds[0]
    }

    pub fn s_max(&self) -> f64 {
        *self.bounds.last().unwrap()
    }

    /// `L = s_max - s_min`.
    pub fn span(&self) -> f64 {
        self.s_max() - self.s_min()
    }

    /// Index of the bracket `(s_i, s_{i+1}]` containing `s`, where the first
    /// bracket is closed on both sides and values outside are clamped.
    pub fn bracket_index(&self, s: f64) -> usize {
        let below = self.bounds.partition_point(|&b| b + self.tol <= s);
        below.saturating_sub(1).min(self.bounds.len() - 2)
    }

    fn limit_at(&self, s: f64) -> Limit {
        if s - self.s_min() < self.tol {
            Limit::Right
        } else {
            Limit::Left
        }
    }

    /// Clipped length of edge `m` of face `k` and its slope in `s`.
    pub fn edge_length(&self, k: usize, m: usize, s: f64) -> (f64, f64) {
        let edge = &self.face_edges(k)[m];
        edge_length(edge, s, self.tol, self.limit_at(s))
    }

    /// Status of edge `m` of face `k` at `s`.
    pub fn edge_status(&self, k: usize, m: usize, s: f64) -> EdgeStatus {
        let edge = &self.face_edges(k)[m];
        classify_edge(
            classify_level(edge.start - s, self.tol),
            classify_level(edge.end - s, self.tol),
        )
    }

    /// Area of face `k` below the plane and its first two derivatives.
    pub fn face_area(&self, k: usize, s: f64) -> FaceArea {
        face_area(
            &self.faces[k],
            self.face_edges(k),
            s,
            self.tol,
            self.limit_at(s),
        )
    }

    /// One truncation: `V(s)`, `V'(s)`, `V''(s)`, `V'''(s)`.
    pub fn truncated_volume(&self, s: f64) -> VolumeSample {
        let bracket = self.bracket_index(s);
        if s <= self.s_min() - self.tol {
            return VolumeSample {
                s,
                volume: 0.0,
                d1: 0.0,
                d2: 0.0,
                d3: 0.0,
                bracket,
            };
        }
        if s >= self.s_max() + self.tol {
            return VolumeSample {
                s,
                volume: self.total_volume,
                d1: 0.0,
                d2: 0.0,
                d3: 0.0,
                bracket,
            };
        }

        let limit = self.limit_at(s);
        let (mut v0, mut v1, mut v2, mut v3) = (0.0, 0.0, 0.0, 0.0);
        for face in &self.faces {
            let edges =
                &self.edges[face.first_edge as usize..(face.first_edge + face.edge_count) as usize];
            let area = face_area(face, edges, s, self.tol, limit);
            let weight = face.constant + s * face.linear;
            v0 += weight * area.area;
            v1 += weight * area.d1 + face.linear * area.area;
            v2 += weight * area.d2 + 2.0 * face.linear * area.d1;
            v3 += face.linear * area.d2;
        }

        VolumeSample {
            s,
            volume: (v0 / 3.0).clamp(0.0, self.total_volume),
            d1: (v1 / 3.0).max(0.0),
            d2: v2 / 3.0,
            d3: v3,
            bracket,
        }
    }
}

#[inline]
fn edge_length(edge: &EdgeCoefficients, s: f64, tol: f64, limit: Limit) -> (f64, f64) {
    let lift = |st: VertexStatus| match (st, limit) {
        (VertexStatus::OnPlane, Limit::Right) => VertexStatus::Interior,
        (st, _) => st,
    };
    let (li, lj) = (edge.start - s, edge.end - s);
    let si = lift(classify_level(li, tol));
    let sj = lift(classify_level(lj, tol));
    match classify_edge(si, sj) {
        EdgeStatus::Exterior | EdgeStatus::DegenerateExterior | EdgeStatus::InPlane => (0.0, 0.0),
        EdgeStatus::Interior => (edge.length, 0.0),
        EdgeStatus::DegenerateInterior => (edge.length, edge.slope),
        EdgeStatus::Intersected => {
            let depth = if si == VertexStatus::Interior {
                -li
            } else {
                -lj
            };
            ((depth.max(0.0) * edge.slope).min(edge.length), edge.slope)
        }
    }
}

#[inline]
fn face_area(
    face: &FaceCoefficients,
    edges: &[EdgeCoefficients],
    s: f64,
    tol: f64,
    limit: Limit,
) -> FaceArea {
    if let Some(par) = face.parallel {
        let gap = s - par.offset;
        let inside = match limit {
            Limit::Left => gap >= tol,
            Limit::Right => gap > -tol,
        };
        return FaceArea {
            area: if inside { par.area } else { 0.0 },
            d1: 0.0,
            d2: 0.0,
        };
    }
    let (mut a0, mut a1, mut a2) = (0.0, 0.0, 0.0);
    for e in edges {
        let (l, dl) = edge_length(e, s, tol, limit);
        let w = e.a + s * e.b;
        a0 += w * l;
        a1 += w * dl + e.b * l;
        a2 += e.b * dl;
    }
    FaceArea {
        area: 0.5 * a0,
        d1: 0.5 * a1,
        d2: a2,
    }
}

/// Cubic `c0 + c1 t + c2 t^2 + c3 t^3` in `t = z - center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalCubic {
    pub center: f64,
    pub coeffs: [f64; 4],
}

impl LocalCubic {
    pub fn eval(&self, z: f64) -> f64 {
        let t = z - self.center;
        let [c0, c1, c2, c3] = self.coeffs;
        ((c3 * t + c2) * t + c1) * t + c0
    }

    pub fn derivative(&self, z: f64) -> f64 {
        let t = z - self.center;
        let [_, c1, c2, c3] = self.coeffs;
        (3.0 * c3 * t + 2.0 * c2) * t + c1
    }

    /// Same polynomial expanded about another center.
    pub fn recentered(&self, center: f64) -> Self {
        let t = center - self.center;
        let [c0, c1, c2, c3] = self.coeffs;
        Self {
            center,
            coeffs: [
                ((c3 * t + c2) * t + c1) * t + c0,
                (3.0 * c3 * t + 2.0 * c2) * t + c1,
                3.0 * c3 * t + c2,
                c3,
            ],
        }
    }

    /// Rewrites `y = p(z)` as `y / value_scale` over `u = (z - origin) / arg_scale`.
    pub fn rescaled(&self, origin: f64, arg_scale: f64, value_scale: f64) -> Self {
        let [c0, c1, c2, c3] = self.coeffs;
        let inv = 1.0 / value_scale;
        Self {
            center: (self.center - origin) / arg_scale,
            coeffs: [
                c0 * inv,
                c1 * arg_scale * inv,
                c2 * arg_scale * arg_scale * inv,
                c3 * arg_scale * arg_scale * arg_scale * inv,
            ],
        }
    }
}

/// Taylor expansion of the truncated volume at the sample point, exact on the
/// sample's bracket.
pub fn local_cubic(sample: &VolumeSample) -> LocalCubic {
    LocalCubic {
        center: sample.s,
        coeffs: [sample.volume, sample.d1, sample.d2 / 2.0, sample.d3 / 6.0],
    }
}
