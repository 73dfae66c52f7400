//! Triangle mesh representation, file IO, repair, metrics and deviation maps.

mod bvh;
mod deviation;
pub mod io;
mod metrics;
mod repair;

use std::collections::HashMap;

use thiserror::Error;

use crate::geom::{triangle_area, Vec3};
use crate::scalar::Real;

pub use bvh::{Bvh, ClosestHit};
pub use deviation::{deviation_map, DeviationMap};
pub use io::{load_mesh, save_mesh, write_deviation_ply, MeshFormat, PlyEncoding};
pub use metrics::{
    aspect_ratios, boundary_vertices, connected_components, edge_lengths, percentile, unique_edges,
    vertex_normals,
};
pub use repair::{validate_and_repair, RepairPolicy, RepairReport};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("face {face} references vertex {index} but the mesh has {n} vertices")]
    IndexOutOfRange { face: usize, index: usize, n: usize },
    #[error("non-manifold edges (shared by more than two faces): {0:?}")]
    NonManifold(Vec<(usize, usize)>),
    #[error("degenerate face {0}")]
    DegenerateFace(usize),
    #[error("empty mesh")]
    Empty,
    #[error("mesh has {0} vertices, at least 3 are required")]
    TooFewVertices(usize),
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
}

/// Indexed triangle mesh with counterclockwise faces.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh<T> {
    vertices: Vec<Vec3<T>>,
    faces: Vec<[usize; 3]>,
    attribute: Option<Vec<T>>,
}

impl<T: Real> TriangleMesh<T> {
    /// Builds a mesh and checks every invariant (indices, degeneracy, manifoldness).
    pub fn new(vertices: Vec<Vec3<T>>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let m = Self::from_parts_unchecked(vertices, faces);
        m.validate()?;
        Ok(m)
    }

    /// Builds a mesh without any check.
    pub fn from_parts_unchecked(vertices: Vec<Vec3<T>>, faces: Vec<[usize; 3]>) -> Self {
        Self { vertices, faces, attribute: None }
    }

    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn attribute(&self) -> Option<&[T]> {
        self.attribute.as_deref()
    }

    /// Attaches a per-vertex scalar channel. Panics on length mismatch.
    pub fn set_attribute(&mut self, values: Vec<T>) {
        assert_eq!(values.len(), self.vertices.len(), "attribute length must equal vertex count");
        self.attribute = Some(values);
    }

    pub fn into_parts(self) -> (Vec<Vec3<T>>, Vec<[usize; 3]>) {
        (self.vertices, self.faces)
    }

    pub fn face_vertices(&self, f: usize) -> [Vec3<T>; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_area(&self, f: usize) -> T {
        let [a, b, c] = self.face_vertices(f);
        triangle_area(&a, &b, &c)
    }

    pub fn surface_area(&self) -> T {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bbox(&self) -> (Vec3<T>, Vec3<T>) {
        let mut it = self.vertices.iter();
        let first = match it.next() {
            Some(v) => *v,
            None => return (Vec3::zero(), Vec3::zero()),
        };
        it.fold((first, first), |(lo, hi), v| (lo.min_elem(v), hi.max_elem(v)))
    }

    pub fn bbox_diag(&self) -> T {
        let (lo, hi) = self.bbox();
        (hi - lo).norm()
    }

    /// Applies `f` to every vertex position.
    pub fn map_vertices(&self, f: impl Fn(&Vec3<T>) -> Vec3<T>) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
            attribute: self.attribute.clone(),
        }
    }

    pub fn cast<U: Real>(&self) -> TriangleMesh<U> {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| v.cast()).collect(),
            faces: self.faces.clone(),
            attribute: self.attribute.as_ref().map(|a| a.iter().map(|x| U::of(x.f64())).collect()),
        }
    }

    /// Checks index range and emptiness.
    pub fn check_indices(&self) -> Result<(), MeshError> {
        if self.faces.is_empty() || self.vertices.is_empty() {
            return Err(MeshError::Empty);
        }
        let n = self.vertices.len();
        for (fi, f) in self.faces.iter().enumerate() {
            for &i in f {
                if i >= n {
                    return Err(MeshError::IndexOutOfRange { face: fi, index: i, n });
                }
            }
        }
        Ok(())
    }

    /// Undirected edges used by more than two faces, sorted.
    pub fn non_manifold_edges(&self) -> Vec<(usize, usize)> {
        let mut count: HashMap<(usize, usize), u32> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if a == b {
                    continue;
                }
                *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut bad: Vec<_> = count.into_iter().filter(|&(_, c)| c > 2).map(|(e, _)| e).collect();
        bad.sort_unstable();
        bad
    }

    /// Index of the first face that is degenerate under the area tolerance
    /// `1e-12 * bbox_diag^2`.
    pub fn first_degenerate_face(&self) -> Option<usize> {
        let d = self.bbox_diag();
        let tol = T::of(1e-12) * d * d;
        self.faces.iter().enumerate().find_map(|(fi, f)| {
            let distinct = f[0] != f[1] && f[1] != f[2] && f[0] != f[2];
            if !distinct || self.face_area(fi) <= tol {
                Some(fi)
            } else {
                None
            }
        })
    }

    /// Full invariant check.
    pub fn validate(&self) -> Result<(), MeshError> {
        self.check_indices()?;
        if self.vertices.len() < 3 {
            return Err(MeshError::TooFewVertices(self.vertices.len()));
        }
        if let Some(f) = self.first_degenerate_face() {
            return Err(MeshError::DegenerateFace(f));
        }
        let bad = self.non_manifold_edges();
        if !bad.is_empty() {
            return Err(MeshError::NonManifold(bad));
        }
        Ok(())
    }

    /// Submesh made of the listed faces; vertices are re-indexed in order of
    /// first use. Returns the mesh and the parent index of each new vertex.
    pub fn submesh(&self, faces: &[usize]) -> (Self, Vec<usize>) {
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut parent = Vec::new();
        let mut new_faces = Vec::with_capacity(faces.len());
        for &fi in faces {
            let mut nf = [0usize; 3];
            for (k, &v) in self.faces[fi].iter().enumerate() {
                if remap[v] == usize::MAX {
                    remap[v] = parent.len();
                    parent.push(v);
                }
                nf[k] = remap[v];
            }
            new_faces.push(nf);
        }
        let verts = parent.iter().map(|&v| self.vertices[v]).collect();
        (Self::from_parts_unchecked(verts, new_faces), parent)
    }

    /// Content hash (SHA-256 hex) over vertex coordinates and face indices.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update((self.vertices.len() as u64).to_le_bytes());
        h.update((self.faces.len() as u64).to_le_bytes());
        for v in &self.vertices {
            for k in 0..3 {
                h.update(v[k].f64().to_le_bytes());
            }
        }
        for f in &self.faces {
            for &i in f {
                h.update((i as u64).to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}
