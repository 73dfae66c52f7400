use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{connected_components, MeshError, TriangleMesh};
use crate::geom::Vec3;
use crate::scalar::Real;

/// Which cleaning steps to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepairPolicy {
    /// Faces with any corner outside this box `[min, max]` are dropped.
    pub crop_box: Option<[[f64; 3]; 2]>,
    pub keep_largest_component: bool,
}

impl Default for RepairPolicy {
    fn default() -> Self {
        Self { crop_box: None, keep_largest_component: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairReport {
    pub cropped_faces: usize,
    pub merged_vertices: usize,
    pub degenerate_faces: usize,
    pub duplicate_faces: usize,
    pub removed_component_faces: usize,
    pub unreferenced_vertices: usize,
}

impl RepairReport {
    pub fn is_clean(&self) -> bool {
        *self == Self::default()
    }
}

/// Cleans a parsed mesh: crop, merge duplicate vertices (tolerance
/// `1e-9 * bbox_diag`), drop degenerate and duplicate faces, keep the largest
/// component, drop unreferenced vertices. Idempotent.
pub fn validate_and_repair<T: Real>(
    mesh: &TriangleMesh<T>,
    policy: &RepairPolicy,
) -> Result<(TriangleMesh<T>, RepairReport), MeshError> {
    mesh.check_indices()?;
    let mut report = RepairReport::default();
    let verts = mesh.vertices();
    let diag = mesh.bbox_diag();
    let mut faces: Vec<[usize; 3]> = mesh.faces().to_vec();

    if let Some([lo, hi]) = policy.crop_box {
        let inside = |v: &Vec3<T>| (0..3).all(|k| v[k].f64() >= lo[k] && v[k].f64() <= hi[k]);
        let before = faces.len();
        faces.retain(|f| f.iter().all(|&i| inside(&verts[i])));
        report.cropped_faces = before - faces.len();
    }

    let rep = merge_map(verts, T::of(1e-9) * diag);
    report.merged_vertices = rep.iter().enumerate().filter(|&(i, &r)| i != r).count();
    for f in &mut faces {
        for i in f.iter_mut() {
            *i = rep[*i];
        }
    }

    let area_tol = T::of(1e-12) * diag * diag;
    let before = faces.len();
    faces.retain(|f| {
        f[0] != f[1]
            && f[1] != f[2]
            && f[0] != f[2]
            && crate::geom::triangle_area(&verts[f[0]], &verts[f[1]], &verts[f[2]]) > area_tol
    });
    report.degenerate_faces = before - faces.len();

    let mut seen = HashSet::new();
    let before = faces.len();
    faces.retain(|f| {
        let mut k = *f;
        k.sort_unstable();
        seen.insert(k)
    });
    report.duplicate_faces = before - faces.len();

    if policy.keep_largest_component && !faces.is_empty() {
        let tmp = TriangleMesh::from_parts_unchecked(verts.to_vec(), faces.clone());
        let comps = connected_components(&tmp);
        let mut comp_of = vec![0usize; verts.len()];
        for (c, set) in comps.iter().enumerate() {
            for &v in set {
                comp_of[v] = c;
            }
        }
        let mut face_count = vec![0usize; comps.len()];
        for f in &faces {
            face_count[comp_of[f[0]]] += 1;
        }
        // largest by face count; earliest component wins ties
        let best = (0..comps.len()).fold(0, |b, c| if face_count[c] > face_count[b] { c } else { b });
        let before = faces.len();
        faces.retain(|f| comp_of[f[0]] == best);
        report.removed_component_faces = before - faces.len();
    }

    let mut used = vec![false; verts.len()];
    for f in &faces {
        for &i in f {
            used[i] = true;
        }
    }
    let mut remap = vec![usize::MAX; verts.len()];
    let mut new_verts = Vec::new();
    for (i, v) in verts.iter().enumerate() {
        if used[i] {
            remap[i] = new_verts.len();
            new_verts.push(*v);
        }
    }
    // merged-away vertices are counted as merges, not as unreferenced
    report.unreferenced_vertices = (0..verts.len()).filter(|&i| !used[i] && rep[i] == i).count();
    for f in &mut faces {
        for i in f.iter_mut() {
            *i = remap[*i];
        }
    }
    if faces.is_empty() {
        return Err(MeshError::Empty);
    }
    if new_verts.len() < 3 {
        return Err(MeshError::TooFewVertices(new_verts.len()));
    }
    Ok((TriangleMesh::from_parts_unchecked(new_verts, faces), report))
}

/// For each vertex the index of its representative: the first earlier
/// representative within `tol`, or itself.
fn merge_map<T: Real>(verts: &[Vec3<T>], tol: T) -> Vec<usize> {
    let mut rep: Vec<usize> = (0..verts.len()).collect();
    if tol <= T::zero() {
        let mut exact: HashMap<[u64; 3], usize> = HashMap::new();
        for (i, v) in verts.iter().enumerate() {
            let key = [v[0].f64().to_bits(), v[1].f64().to_bits(), v[2].f64().to_bits()];
            rep[i] = *exact.entry(key).or_insert(i);
        }
        return rep;
    }
    let cell = |v: &Vec3<T>| -> [i64; 3] { [0, 1, 2].map(|k| (v[k] / tol).floor().to_i64().unwrap_or(0)) };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, v) in verts.iter().enumerate() {
        let c = cell(v);
        let mut best: Option<usize> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &j in list {
                            if verts[j].distance(v) <= tol && best.is_none_or(|b| j < b) {
                                best = Some(j);
                            }
                        }
                    }
                }
            }
        }
        match best {
            Some(j) => rep[i] = j,
            None => grid.entry(c).or_default().push(i),
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_with_duplicate() -> TriangleMesh<f64> {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
        ];
        TriangleMesh::from_parts_unchecked(v, vec![[0, 1, 2], [0, 4, 3]])
    }

    #[test]
    fn merges_coincident_vertices() {
        let (m, r) = validate_and_repair(&square_with_duplicate(), &RepairPolicy::default()).unwrap();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(r.merged_vertices, 1);
        assert_eq!(m.faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn repair_is_idempotent() {
        let (once, _) = validate_and_repair(&square_with_duplicate(), &RepairPolicy::default()).unwrap();
        let (twice, r2) = validate_and_repair(&once, &RepairPolicy::default()).unwrap();
        assert_eq!(once, twice);
        assert!(r2.is_clean());
    }

    #[test]
    fn degenerate_and_duplicate_faces() {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        ];
        let m = TriangleMesh::from_parts_unchecked(v, vec![[0, 1, 2], [0, 1, 3], [2, 1, 0], [1, 1, 2]]);
        let (out, r) = validate_and_repair(&m, &RepairPolicy::default()).unwrap();
        assert_eq!(r.degenerate_faces, 2);
        assert_eq!(r.duplicate_faces, 1);
        assert_eq!(r.unreferenced_vertices, 1);
        assert_eq!(out.num_faces(), 1);
    }

    #[test]
    fn too_few_vertices_is_error() {
        let v = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 0.0)];
        let m = TriangleMesh::from_parts_unchecked(v, vec![[0, 1, 2]]);
        assert!(validate_and_repair(&m, &RepairPolicy::default()).is_err());
    }

    #[test]
    fn crop_drops_outside_faces() {
        let policy = RepairPolicy { crop_box: Some([[-0.5, -0.5, -0.5], [1.5, 1.5, 0.5]]), keep_largest_component: false };
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(5.0, 5.0, 5.0),
        ];
        let m = TriangleMesh::from_parts_unchecked(v, vec![[0, 1, 2], [1, 3, 2]]);
        let (out, r) = validate_and_repair(&m, &policy).unwrap();
        assert_eq!(r.cropped_faces, 1);
        assert_eq!(out.num_vertices(), 3);
    }
}
