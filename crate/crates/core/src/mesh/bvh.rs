//! Bounding volume hierarchy over triangles for exact closest-point queries.

use super::TriangleMesh;
use crate::geom::{closest_point_on_triangle, Vec3};
use crate::scalar::Real;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node<T> {
    lo: Vec3<T>,
    hi: Vec3<T>,
    // leaf: range into `order`; inner: children indices
    a: usize,
    b: usize,
    leaf: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestHit<T> {
    pub point: Vec3<T>,
    pub face: usize,
    pub dist_sq: T,
}

#[derive(Debug, Clone)]
pub struct Bvh<T> {
    tris: Vec<[Vec3<T>; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

impl<T: Real> Bvh<T> {
    pub fn new(mesh: &TriangleMesh<T>) -> Self {
        let tris: Vec<[Vec3<T>; 3]> = (0..mesh.num_faces()).map(|f| mesh.face_vertices(f)).collect();
        let mut bvh = Self { order: (0..tris.len()).collect(), tris, nodes: Vec::new() };
        if !bvh.tris.is_empty() {
            let n = bvh.tris.len();
            bvh.build(0, n);
        }
        bvh
    }

    fn bounds(&self, start: usize, end: usize) -> (Vec3<T>, Vec3<T>) {
        let t0 = &self.tris[self.order[start]];
        let mut lo = t0[0];
        let mut hi = t0[0];
        for &i in &self.order[start..end] {
            for p in &self.tris[i] {
                lo = lo.min_elem(p);
                hi = hi.max_elem(p);
            }
        }
        (lo, hi)
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let (lo, hi) = self.bounds(start, end);
        let id = self.nodes.len();
        self.nodes.push(Node { lo, hi, a: start, b: end, leaf: true });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let ext = hi - lo;
        let axis = if ext[0] >= ext[1] && ext[0] >= ext[2] {
            0
        } else if ext[1] >= ext[2] {
            1
        } else {
            2
        };
        let mid = (start + end) / 2;
        let tris = &self.tris;
        let key = |i: &usize| tris[*i][0][axis] + tris[*i][1][axis] + tris[*i][2][axis];
        self.order[start..end].select_nth_unstable_by(mid - start, |x, y| {
            key(x).partial_cmp(&key(y)).unwrap_or(std::cmp::Ordering::Equal).then(x.cmp(y))
        });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        let node = &mut self.nodes[id];
        node.a = left;
        node.b = right;
        node.leaf = false;
        id
    }

    fn box_dist_sq(node: &Node<T>, p: &Vec3<T>) -> T {
        let mut d = T::zero();
        for k in 0..3 {
            let e = (node.lo[k] - p[k]).max(p[k] - node.hi[k]).max(T::zero());
            d += e * e;
        }
        d
    }

    /// Closest point on the triangle soup to `p`. `None` for an empty mesh.
    pub fn closest_point(&self, p: &Vec3<T>) -> Option<ClosestHit<T>> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = ClosestHit { point: *p, face: usize::MAX, dist_sq: T::infinity() };
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if Self::box_dist_sq(node, p) > best.dist_sq {
                continue;
            }
            if node.leaf {
                for &f in &self.order[node.a..node.b] {
                    let [a, b, c] = &self.tris[f];
                    let q = closest_point_on_triangle(p, a, b, c);
                    let d = (q - *p).norm_squared();
                    if d < best.dist_sq || (d == best.dist_sq && f < best.face) {
                        best = ClosestHit { point: q, face: f, dist_sq: d };
                    }
                }
            } else {
                let (l, r) = (node.a, node.b);
                let dl = Self::box_dist_sq(&self.nodes[l], p);
                let dr = Self::box_dist_sq(&self.nodes[r], p);
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        Some(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let verts: Vec<Vec3<f64>> =
            (0..60).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect();
        let faces: Vec<[usize; 3]> = (0..40).map(|i| [i, i + 7, i + 13]).collect();
        let mesh = TriangleMesh::from_parts_unchecked(verts, faces);
        let bvh = Bvh::new(&mesh);
        for _ in 0..200 {
            let p = Vec3::new(rng.random::<f64>() * 2.0 - 0.5, rng.random(), rng.random::<f64>() - 0.3);
            let brute = (0..mesh.num_faces())
                .map(|f| {
                    let [a, b, c] = mesh.face_vertices(f);
                    (closest_point_on_triangle(&p, &a, &b, &c) - p).norm_squared()
                })
                .fold(f64::INFINITY, f64::min);
            let hit = bvh.closest_point(&p).unwrap();
            assert!((hit.dist_sq - brute).abs() <= 1e-15);
        }
    }
}
