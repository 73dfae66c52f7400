//! Spectral statistical process control for triangle meshes.

pub mod diagnostics;
pub mod geom;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod pipeline;
pub mod remesh;
pub mod roi;
pub mod scalar;
pub mod select;
pub mod spc;
pub mod svg;
pub mod synth;

pub use geom::{Mat3, Vec3};
pub use mesh::{DeviationMap, MeshError, TriangleMesh};
pub use scalar::Real;

pub type Mesh = TriangleMesh<f64>;
pub type MeshF32 = TriangleMesh<f32>;
