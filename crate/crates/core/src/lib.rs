//! Coverage-constrained inspection path planning around triangle meshes.
//!
//! Pipeline: a mesh is surrounded by a filtered lattice of candidate
//! viewpoints ([`viewpoint`]), a viewpoint × face visibility matrix is
//! precomputed ([`visibility`]), a genetic algorithm evolves continuous
//! lattice walks that minimize length subject to a weighted area-coverage
//! goal ([`ga`]), and a greedy cover picks camera poses along the winning
//! walk ([`pose`]). [`runner`] wires these into configurable runs and
//! parameter sweeps.
//!
//! Geometry and metrics are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the runner uses.

pub mod bvh;
pub mod digest;
pub mod ga;
pub mod geometry;
pub mod mesh;
pub mod path;
pub mod pose;
pub mod runner;
pub mod scalar;
pub mod viewpoint;
pub mod visibility;

pub use scalar::Real;

pub type Vec3d = geometry::Vec3<f64>;
pub type Mesh = mesh::TriMesh<f64>;
pub type Mesh32 = mesh::TriMesh<f32>;
