use std::collections::HashMap;

use super::TriangleMesh;
use crate::geom::{triangle_normal, Vec3};
use crate::scalar::Real;

/// Longest-to-shortest edge ratio per face.
pub fn aspect_ratios<T: Real>(mesh: &TriangleMesh<T>) -> Vec<T> {
    (0..mesh.num_faces())
        .map(|f| {
            let [a, b, c] = mesh.face_vertices(f);
            let l = [a.distance(&b), b.distance(&c), c.distance(&a)];
            let hi = l[0].max(l[1]).max(l[2]);
            let lo = l[0].min(l[1]).min(l[2]);
            if hi == lo {
                T::one()
            } else {
                hi / lo
            }
        })
        .collect()
}

/// Undirected edges `(min, max)`, sorted ascending.
pub fn unique_edges<T: Real>(mesh: &TriangleMesh<T>) -> Vec<(usize, usize)> {
    let mut e: Vec<(usize, usize)> = mesh
        .faces()
        .iter()
        .flat_map(|f| (0..3).map(move |k| (f[k].min(f[(k + 1) % 3]), f[k].max(f[(k + 1) % 3]))))
        .collect();
    e.sort_unstable();
    e.dedup();
    e
}

/// Length of each edge returned by [`unique_edges`].
pub fn edge_lengths<T: Real>(mesh: &TriangleMesh<T>) -> Vec<T> {
    let v = mesh.vertices();
    unique_edges(mesh).iter().map(|&(a, b)| v[a].distance(&v[b])).collect()
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Vertex sets connected through shared faces. Sets are sorted and ordered
/// by their smallest vertex; an unreferenced vertex forms its own set.
pub fn connected_components<T: Real>(mesh: &TriangleMesh<T>) -> Vec<Vec<usize>> {
    let n = mesh.num_vertices();
    let mut parent: Vec<usize> = (0..n).collect();
    for f in mesh.faces() {
        for k in 1..3 {
            let (a, b) = (find(&mut parent, f[0]), find(&mut parent, f[k]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut slot: HashMap<usize, usize> = HashMap::new();
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for v in 0..n {
        let r = find(&mut parent, v);
        let id = *slot.entry(r).or_insert_with(|| {
            comps.push(Vec::new());
            comps.len() - 1
        });
        comps[id].push(v);
    }
    comps
}

/// Vertices lying on an edge used by exactly one face, ascending.
pub fn boundary_vertices<T: Real>(mesh: &TriangleMesh<T>) -> Vec<usize> {
    let mut count: HashMap<(usize, usize), u32> = HashMap::new();
    for f in mesh.faces() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let mut on = vec![false; mesh.num_vertices()];
    for (&(a, b), &c) in &count {
        if c == 1 {
            on[a] = true;
            on[b] = true;
        }
    }
    (0..on.len()).filter(|&i| on[i]).collect()
}

/// Area-weighted unit vertex normals.
pub fn vertex_normals<T: Real>(mesh: &TriangleMesh<T>) -> Vec<Vec3<T>> {
    let mut n = vec![Vec3::zero(); mesh.num_vertices()];
    for f in mesh.faces() {
        let v = mesh.vertices();
        let fn_ = triangle_normal(&v[f[0]], &v[f[1]], &v[f[2]]);
        for &i in f {
            n[i] += fn_;
        }
    }
    n.iter().map(|x| x.normalized()).collect()
}

/// `q`-th percentile (`q` in `[0, 100]`) with linear interpolation between
/// order statistics. Returns NaN for an empty slice.
pub fn percentile<T: Real>(values: &[T], q: f64) -> T {
    if values.is_empty() {
        return T::nan();
    }
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let pos = (q / 100.0).clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = T::of(pos - lo as f64);
    s[lo] + (s[hi] - s[lo]) * w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aspect_ratio_examples() {
        let h = 3f64.sqrt() / 2.0;
        let eq = TriangleMesh::from_parts_unchecked(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.5, h, 0.0)],
            vec![[0, 1, 2]],
        );
        assert!((aspect_ratios(&eq)[0] - 1.0).abs() < 1e-15);
        let right = TriangleMesh::from_parts_unchecked(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        );
        assert!((aspect_ratios(&right)[0] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn percentile_interpolates() {
        let v = [1.0f64, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 50.0), 3.0);
        assert_eq!(percentile(&v, 100.0), 5.0);
        assert!((percentile(&v, 95.0) - 4.8).abs() < 1e-12);
    }

    #[test]
    fn components_and_boundary() {
        let v: Vec<Vec3<f64>> = (0..6).map(|i| Vec3::new(i as f64, (i % 2) as f64, 0.0)).collect();
        let m = TriangleMesh::from_parts_unchecked(v, vec![[0, 1, 2], [3, 4, 5]]);
        assert_eq!(connected_components(&m), vec![vec![0, 1, 2], vec![3, 4, 5]]);
        assert_eq!(boundary_vertices(&m).len(), 6);
    }
}
