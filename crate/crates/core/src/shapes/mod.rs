//! Deterministic builders for the benchmark polyhedra and OFF-style I/O.

mod off;

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::polytope::{newell_vector, Polyhedron, PolytopeError, Vec3, PLANAR_TOL};

pub use off::{load_off, parse_off, save_off, write_off, OffError};

#[derive(Debug, Error)]
pub enum ShapeError {
    #[error("invalid shape parameters: {0}")]
    InvalidSpec(String),
    #[error("unknown shape `{0}`")]
    Unknown(String),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Off(#[from] OffError),
}

/// Torus discretization: `R` major radius, `gamma` minor radius ratio, node
/// counts along the major and minor circles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusSpec {
    pub major_radius: f64,
    pub ratio: f64,
    pub major_nodes: usize,
    pub minor_nodes: usize,
}

impl Default for TorusSpec {
    fn default() -> Self {
        Self {
            major_radius: 1.0,
            ratio: 0.5,
            major_nodes: 9,
            minor_nodes: 7,
        }
    }
}

/// Cuboid with edge lengths `{1, psi1, psi2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CuboidSpec {
    pub psi1: f64,
    pub psi2: f64,
}

pub fn make_unit_cube() -> Polyhedron {
    make_cuboid(CuboidSpec {
        psi1: 1.0,
        psi2: 1.0,
    })
    .expect("unit cube is valid")
}

pub fn make_cuboid(spec: CuboidSpec) -> Result<Polyhedron, ShapeError> {
    let CuboidSpec { psi1, psi2 } = spec;
    if !(psi1 > 0.0 && psi2 > 0.0 && psi1.is_finite() && psi2.is_finite()) {
        return Err(ShapeError::InvalidSpec(format!(
            "cuboid ratios must be positive, got ({psi1}, {psi2})"
        )));
    }
    let mut vertices = Vec::with_capacity(8);
    for z in [0.0, psi2] {
        for y in [0.0, psi1] {
            for x in [0.0, 1.0] {
                vertices.push(Vec3::new(x, y, z));
            }
        }
    }
    let faces = vec![
        vec![0, 2, 3, 1],
        vec![4, 5, 7, 6],
        vec![0, 1, 5, 4],
        vec![2, 6, 7, 3],
        vec![0, 4, 6, 2],
        vec![1, 3, 7, 5],
    ];
    Ok(Polyhedron::build(vertices, faces)?)
}

/// Tetrahedron spanned by the origin and the three unit vectors.
pub fn make_unit_tetrahedron() -> Polyhedron {
    let vertices = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()];
    let faces = vec![vec![0, 2, 1], vec![0, 1, 3], vec![0, 3, 2], vec![1, 2, 3]];
    Polyhedron::build(vertices, faces).expect("unit tetrahedron is valid")
}

/// Regular dodecahedron with unit edge length, centred at the origin.
pub fn make_dodecahedron() -> Polyhedron {
    let phi = 0.5 * (1.0 + 5f64.sqrt());
    let inv = 1.0 / phi;
    let mut raw = Vec::with_capacity(20);
    for x in [-1.0, 1.0] {
        for y in [-1.0, 1.0] {
            for z in [-1.0, 1.0] {
                raw.push(Vec3::new(x, y, z));
            }
        }
    }
    for a in [-1.0, 1.0] {
        for b in [-1.0, 1.0] {
            raw.push(Vec3::new(0.0, a * inv, b * phi));
            raw.push(Vec3::new(a * inv, b * phi, 0.0));
            raw.push(Vec3::new(a * phi, 0.0, b * inv));
        }
    }
    // Canonical edge length is 2/phi.
    let scale = 0.5 * phi;
    let vertices: Vec<Vec3> = raw.iter().map(|v| v * scale).collect();

    // Face normals point at the vertices of the dual icosahedron.
    let mut normals = Vec::with_capacity(12);
    for a in [-1.0, 1.0] {
        for b in [-1.0, 1.0] {
            normals.push(Vec3::new(0.0, a * phi, b).normalize());
            normals.push(Vec3::new(a * phi, b, 0.0).normalize());
            normals.push(Vec3::new(b, 0.0, a * phi).normalize());
        }
    }
    let faces = normals
        .iter()
        .map(|n| {
            let mut ranked: Vec<(usize, f64)> = vertices
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.dot(n)))
                .collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
            let ids: Vec<usize> = ranked[..5].iter().map(|&(i, _)| i).collect();
            ccw_loop(&vertices, ids, n)
        })
        .collect();
    Polyhedron::build(vertices, faces).expect("dodecahedron is valid")
}

/// Orders coplanar vertex ids counter-clockwise about `normal`.
fn ccw_loop(vertices: &[Vec3], mut ids: Vec<usize>, normal: &Vec3) -> Vec<usize> {
    let center = ids.iter().map(|&i| vertices[i]).sum::<Vec3>() / ids.len() as f64;
    let u = (vertices[ids[0]] - center).normalize();
    let w = normal.cross(&u);
    ids.sort_by(|&a, &b| {
        let angle = |i: usize| {
            let d = vertices[i] - center;
            d.dot(&w).atan2(d.dot(&u))
        };
        angle(a).total_cmp(&angle(b))
    });
    ids
}

fn torus_grid(spec: &TorusSpec) -> Result<(Vec<Vec3>, Vec<[usize; 4]>), ShapeError> {
    let TorusSpec {
        major_radius,
        ratio,
        major_nodes,
        minor_nodes,
    } = *spec;
    if major_nodes < 3 || minor_nodes < 3 {
        return Err(ShapeError::InvalidSpec(format!(
            "torus needs at least 3 nodes per circle, got {major_nodes}x{minor_nodes}"
        )));
    }
    if !(ratio > 0.0 && ratio < 1.0) || major_radius.is_nan() || major_radius <= 0.0 {
        return Err(ShapeError::InvalidSpec(format!(
            "torus needs R > 0 and 0 < gamma < 1, got R = {major_radius}, gamma = {ratio}"
        )));
    }
    let surface = |phi: f64, theta: f64| {
        let ring = 1.0 + ratio * theta.cos();
        major_radius * Vec3::new(ring * phi.cos(), ring * phi.sin(), ratio * theta.sin())
    };
    let mut vertices = Vec::with_capacity(major_nodes * minor_nodes);
    for i in 1..=major_nodes {
        for j in 1..=minor_nodes {
            let phi = 2.0 * PI * i as f64 / major_nodes as f64;
            let theta = 2.0 * PI * j as f64 / minor_nodes as f64;
            vertices.push(surface(phi, theta));
        }
    }
    let id = |i: usize, j: usize| (i % major_nodes) * minor_nodes + (j % minor_nodes);
    let mut quads = Vec::with_capacity(major_nodes * minor_nodes);
    for i in 0..major_nodes {
        for j in 0..minor_nodes {
            quads.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Ok((vertices, quads))
}

/// Torus from the parametric grid. Quads whose planarity residual exceeds the
/// default tolerance are split along their shorter diagonal.
pub fn make_torus(spec: TorusSpec) -> Result<Polyhedron, ShapeError> {
    let (vertices, quads) = torus_grid(&spec)?;
    let h = 2.0 * spec.major_radius * (1.0 + spec.ratio) * 2f64.sqrt();
    let mut faces = Vec::with_capacity(quads.len());
    for q in quads {
        let pts: Vec<Vec3> = q.iter().map(|&i| vertices[i]).collect();
        if planarity_residual(&pts) <= PLANAR_TOL * h {
            faces.push(q.to_vec());
        } else if (pts[2] - pts[0]).norm() <= (pts[3] - pts[1]).norm() {
            faces.push(vec![q[0], q[1], q[2]]);
            faces.push(vec![q[0], q[2], q[3]]);
        } else {
            faces.push(vec![q[0], q[1], q[3]]);
            faces.push(vec![q[1], q[2], q[3]]);
        }
    }
    Ok(Polyhedron::build(vertices, faces)?)
}

/// Torus keeping every grid quad as one face, with a relaxed planarity check.
pub fn make_torus_strict(spec: TorusSpec) -> Result<Polyhedron, ShapeError> {
    let (vertices, quads) = torus_grid(&spec)?;
    let faces = quads.iter().map(|q| q.to_vec()).collect();
    Ok(Polyhedron::build_with_tolerance(vertices, faces, 1e-3)?)
}

fn planarity_residual(points: &[Vec3]) -> f64 {
    let n = newell_vector(points).normalize();
    points
        .iter()
        .map(|x| (x - points[0]).dot(&n).abs())
        .fold(0.0, f64::max)
}

/// Extruded letter "A" with a triangular hole, depth 5/14.
pub fn make_letter_a() -> Polyhedron {
    const OUTER: [(f64, f64); 8] = [
        (0.0, 0.0),
        (4.0, 0.0),
        (6.0, 4.0),
        (8.0, 4.0),
        (10.0, 0.0),
        (14.0, 0.0),
        (10.0, 14.0),
        (8.0, 14.0),
    ];
    const HOLE: [(f64, f64); 3] = [(6.0, 6.0), (8.0, 6.0), (7.0, 8.0)];
    let mut vertices = Vec::with_capacity(22);
    for depth in [0.0, 5.0] {
        for &(x, y) in OUTER.iter().chain(HOLE.iter()) {
            vertices.push(Vec3::new(x, y, depth) / 14.0);
        }
    }
    let (no, nh) = (OUTER.len(), HOLE.len());
    let front = |i: usize| i;
    let back = |i: usize| no + nh + i;
    let outer: Vec<usize> = (0..no).collect();
    let hole: Vec<usize> = (no..no + nh).collect();

    let mut faces = Vec::with_capacity(15);
    // Front faces look along -z: outer loop clockwise in xy, hole loop inverted.
    faces.push(outer.iter().rev().map(|&i| front(i)).collect());
    faces.push(hole.iter().map(|&i| front(i)).collect());
    faces.push(outer.iter().map(|&i| back(i)).collect());
    faces.push(hole.iter().rev().map(|&i| back(i)).collect());
    for m in 0..no {
        let (a, b) = (outer[m], outer[(m + 1) % no]);
        faces.push(vec![front(a), front(b), back(b), back(a)]);
    }
    for m in 0..nh {
        let (a, b) = (hole[m], hole[(m + 1) % nh]);
        faces.push(vec![front(b), front(a), back(a), back(b)]);
    }
    Polyhedron::build(vertices, faces).expect("letter A is valid")
}

/// Named benchmark shape, as accepted on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeKind {
    Cube,
    Cuboid(CuboidSpec),
    Tetrahedron,
    Dodecahedron,
    Torus { spec: TorusSpec, strict: bool },
    LetterA,
    File(PathBuf),
}

impl ShapeKind {
    /// The five shapes of the benchmark table, in table order.
    pub fn standard() -> [ShapeKind; 5] {
        [
            ShapeKind::Cube,
            ShapeKind::Dodecahedron,
            ShapeKind::Torus {
                spec: TorusSpec::default(),
                strict: false,
            },
            ShapeKind::LetterA,
            ShapeKind::Tetrahedron,
        ]
    }

    pub fn build(&self) -> Result<Polyhedron, ShapeError> {
        Ok(match self {
            ShapeKind::Cube => make_unit_cube(),
            ShapeKind::Cuboid(spec) => make_cuboid(*spec)?,
            ShapeKind::Tetrahedron => make_unit_tetrahedron(),
            ShapeKind::Dodecahedron => make_dodecahedron(),
            ShapeKind::Torus {
                spec,
                strict: false,
            } => make_torus(*spec)?,
            ShapeKind::Torus { spec, strict: true } => make_torus_strict(*spec)?,
            ShapeKind::LetterA => make_letter_a(),
            ShapeKind::File(path) => load_off(path)?,
        })
    }

    /// Short identifier used in result files.
    pub fn id(&self) -> String {
        match self {
            ShapeKind::Cube => "cube".into(),
            ShapeKind::Cuboid(CuboidSpec { psi1, psi2 }) => format!("cuboid:{psi1},{psi2}"),
            ShapeKind::Tetrahedron => "tetra".into(),
            ShapeKind::Dodecahedron => "dodeca".into(),
            ShapeKind::Torus { .. } => "torus".into(),
            ShapeKind::LetterA => "letterA".into(),
            ShapeKind::File(path) => format!("file:{}", path.display()),
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for ShapeKind {
    type Err = ShapeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(ShapeKind::File(PathBuf::from(path)));
        }
        if let Some(ratios) = s.strip_prefix("cuboid:") {
            let parsed: Vec<f64> = ratios
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| ShapeError::InvalidSpec(format!("cuboid ratios `{ratios}`: {e}")))?;
            return match parsed[..] {
                [psi1, psi2] => Ok(ShapeKind::Cuboid(CuboidSpec { psi1, psi2 })),
                _ => Err(ShapeError::InvalidSpec(format!(
                    "expected `cuboid:psi1,psi2`, got `{s}`"
                ))),
            };
        }
        match s {
            "cube" => Ok(ShapeKind::Cube),
            "cuboid" => Ok(ShapeKind::Cuboid(CuboidSpec {
                psi1: 1.0,
                psi2: 1.0,
            })),
            "tetra" | "tetrahedron" => Ok(ShapeKind::Tetrahedron),
            "dodeca" | "dodecahedron" => Ok(ShapeKind::Dodecahedron),
            "torus" => Ok(ShapeKind::Torus {
                spec: TorusSpec::default(),
                strict: false,
            }),
            "letterA" | "lettera" => Ok(ShapeKind::LetterA),
            other => Err(ShapeError::Unknown(other.to_string())),
        }
    }
}
