//! Exact truncated volumes of arbitrary polyhedra and fast positioning of
//! cutting planes to a prescribed volume fraction.

pub mod bench;
pub mod oracle;
pub mod polytope;
pub mod positioning;
pub mod shapes;
pub mod truncation;

pub use polytope::{Polyhedron, PolytopeError, Vec3};
