//! Polyhedron data model: a shared vertex list plus one ordered index loop per
//! face. Faces are oriented counter-clockwise with respect to their outward
//! normal; a hole in a face is an additional coplanar face with the opposite
//! orientation.

use nalgebra::Vector3;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Default planarity tolerance, relative to the bounding-box diagonal.
pub const PLANAR_TOL: f64 = 1e-9;
/// Vector-area closure tolerance, relative to the squared bounding-box diagonal.
pub const CLOSURE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolytopeError {
    #[error("polyhedron has no vertices or no faces")]
    Empty,
    #[error("face {face} has {count} vertices, at least 3 are required")]
    TooFewVertices { face: usize, count: usize },
    #[error("face {face} references vertex {index}, but only {len} vertices exist")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        len: usize,
    },
    #[error("face {face} is degenerate (zero area)")]
    DegenerateFace { face: usize },
    #[error("face {face} is not planar (residual {residual:e}, tolerance {tolerance:e})")]
    NonPlanarFace {
        face: usize,
        residual: f64,
        tolerance: f64,
    },
    #[error("surface is not closed: |sum of vector areas| = {residual:e} exceeds {tolerance:e}")]
    OpenSurface { residual: f64, tolerance: f64 },
    #[error("enclosed volume {volume:e} is not positive (inverted orientation?)")]
    NonPositiveVolume { volume: f64 },
}

/// Derived per-face geometry.
#[derive(Debug, Clone)]
pub struct FaceGeometry {
    /// Unit outward normal (Newell's method).
    pub normal: Vec3,
    /// First vertex of the loop, used as the face reference point.
    pub reference: Vec3,
    /// Polygon area.
    pub area: f64,
    /// Vertex average of the loop.
    pub centroid: Vec3,
    /// Unit in-plane edge normals pointing out of the face; entry `m` belongs
    /// to the edge from loop vertex `m` to `m + 1`.
    pub conormals: Vec<Vec3>,
}

#[derive(Debug, Clone)]
pub struct Polyhedron {
    vertices: Vec<Vec3>,
    faces: Vec<Vec<usize>>,
    geometry: Vec<FaceGeometry>,
    bbox: (Vec3, Vec3),
    volume: f64,
}

impl Polyhedron {
    /// Validates the face loops and derives per-face geometry.
    pub fn build(vertices: Vec<Vec3>, faces: Vec<Vec<usize>>) -> Result<Self, PolytopeError> {
        Self::build_with_tolerance(vertices, faces, PLANAR_TOL)
    }

    /// Like [`Polyhedron::build`] with a custom planarity tolerance (relative
    /// to the bounding-box diagonal).
    pub fn build_with_tolerance(
        vertices: Vec<Vec3>,
        faces: Vec<Vec<usize>>,
        planar_tol: f64,
    ) -> Result<Self, PolytopeError> {
        if vertices.is_empty() || faces.is_empty() {
            return Err(PolytopeError::Empty);
        }
        for (k, face) in faces.iter().enumerate() {
            if face.len() < 3 {
                return Err(PolytopeError::TooFewVertices {
                    face: k,
                    count: face.len(),
                });
            }
            if let Some(&index) = face.iter().find(|&&i| i >= vertices.len()) {
                return Err(PolytopeError::IndexOutOfRange {
                    face: k,
                    index,
                    len: vertices.len(),
                });
            }
        }

        let bbox = bounding_box(&vertices);
        let h = (bbox.1 - bbox.0).norm();

        let mut geometry = Vec::with_capacity(faces.len());
        let mut vector_area = Vec3::zeros();
        for (k, face) in faces.iter().enumerate() {
            let loop_pts: Vec<Vec3> = face.iter().map(|&i| vertices[i]).collect();
            let newell = newell_vector(&loop_pts);
            let twice_area = newell.norm();
            if twice_area <= f64::EPSILON * h * h {
                return Err(PolytopeError::DegenerateFace { face: k });
            }
            let normal = newell / twice_area;
            let reference = loop_pts[0];
            let residual = loop_pts
                .iter()
                .map(|x| (x - reference).dot(&normal).abs())
                .fold(0.0, f64::max);
            let tolerance = planar_tol * h;
            if residual > tolerance {
                return Err(PolytopeError::NonPlanarFace {
                    face: k,
                    residual,
                    tolerance,
                });
            }
            let n = loop_pts.len();
            let conormals = (0..n)
                .map(|m| {
                    let edge = loop_pts[(m + 1) % n] - loop_pts[m];
                    edge.cross(&normal).normalize()
                })
                .collect();
            let centroid = loop_pts.iter().sum::<Vec3>() / n as f64;
            let area = 0.5 * twice_area;
            vector_area += normal * area;
            geometry.push(FaceGeometry {
                normal,
                reference,
                area,
                centroid,
                conormals,
            });
        }

        let residual = vector_area.norm();
        let tolerance = CLOSURE_TOL * h * h;
        if residual > tolerance {
            return Err(PolytopeError::OpenSurface {
                residual,
                tolerance,
            });
        }

        let center = vertices.iter().sum::<Vec3>() / vertices.len() as f64;
        let volume = geometry
            .iter()
            .map(|g| (g.reference - center).dot(&g.normal) * g.area)
            .sum::<f64>()
            / 3.0;
        if volume.is_nan() || volume <= 0.0 {
            return Err(PolytopeError::NonPositiveVolume { volume });
        }

        Ok(Self {
            vertices,
            faces,
            geometry,
            bbox,
            volume,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[Vec<usize>] {
        &self.faces
    }

    pub fn face_geometry(&self) -> &[FaceGeometry] {
        &self.geometry
    }

    /// Vertex position `m` (periodic) of face `k`.
    pub fn face_vertex(&self, k: usize, m: usize) -> Vec3 {
        let face = &self.faces[k];
        self.vertices[face[m % face.len()]]
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        self.bbox
    }

    /// Bounding-box diagonal, the characteristic length `h`.
    pub fn diameter(&self) -> f64 {
        (self.bbox.1 - self.bbox.0).norm()
    }

    pub fn vertex_centroid(&self) -> Vec3 {
        self.vertices.iter().sum::<Vec3>() / self.vertices.len() as f64
    }

    /// Enclosed volume `|P*|`.
    pub fn total_volume(&self) -> f64 {
        self.volume
    }

    /// `sum_k A_k n_k`, zero for a closed surface.
    pub fn vector_area(&self) -> Vec3 {
        self.geometry.iter().map(|g| g.normal * g.area).sum()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Number of edges of a closed surface: every edge is shared by exactly two
    /// face loops, so this is half the number of loop edges.
    pub fn edge_count(&self) -> usize {
        self.faces.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Applies `f` to every vertex and rebuilds. Used for rigid-motion checks.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<Self, PolytopeError> {
        let vertices = self.vertices.iter().map(f).collect();
        Self::build(vertices, self.faces.clone())
    }
}

/// Newell's vector: twice the vector area of a closed polygon.
pub fn newell_vector(points: &[Vec3]) -> Vec3 {
    let n = points.len();
    let mut acc = Vec3::zeros();
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        acc.x += (a.y - b.y) * (a.z + b.z);
        acc.y += (a.z - b.z) * (a.x + b.x);
        acc.z += (a.x - b.x) * (a.y + b.y);
    }
    acc
}

fn bounding_box(vertices: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for v in vertices {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    (lo, hi)
}
