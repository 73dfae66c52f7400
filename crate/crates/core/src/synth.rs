//! Deterministic test geometry and spectra streams.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;
use crate::mesh::{vertex_normals, TriangleMesh};
use crate::scalar::Real;
use crate::spc::{Phase, SpectraSeries};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("subdivision level {0} outside [0, 7]")]
    Subdivisions(u32),
    #[error("noise sigma must be nonnegative, got {0}")]
    NegativeSigma(f64),
    #[error("bump radius covers the whole mesh")]
    BumpCoversMesh,
    #[error("shift time {shift} exceeds stream length {m}")]
    ShiftTime { shift: usize, m: usize },
    #[error("invalid stream shape p={p}, m={m}, shift vector length {len}")]
    Shape { p: usize, m: usize, len: usize },
    #[error("invalid sphere resolution: {0}")]
    Resolution(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

/// Subdivided icosahedron with all vertices at distance `radius` from the
/// origin; `10 * 4^s + 2` vertices.
pub fn icosphere<T: Real>(subdivisions: u32, radius: f64) -> Result<TriangleMesh<T>, SynthError> {
    if subdivisions > 7 {
        return Err(SynthError::Subdivisions(subdivisions));
    }
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<Vec3<f64>> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|&c| Vec3(c).normalized())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, v: &mut Vec<Vec3<f64>>| -> usize {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                v.push(((v[a] + v[b]) * 0.5).normalized());
                v.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut v);
            let bc = mid(b, c, &mut v);
            let ca = mid(c, a, &mut v);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let verts = v.iter().map(|p| (*p * radius).cast()).collect();
    Ok(TriangleMesh::from_parts_unchecked(verts, faces))
}

/// Latitude-longitude sphere with `rings` interior latitude circles of
/// `segments` vertices plus two poles.
pub fn uv_sphere<T: Real>(rings: usize, segments: usize, radius: f64) -> Result<TriangleMesh<T>, SynthError> {
    if rings < 1 || segments < 3 {
        return Err(SynthError::Resolution(format!("rings={rings}, segments={segments}")));
    }
    let mut v = vec![Vec3::new(0.0, 0.0, radius)];
    for i in 1..=rings {
        let th = std::f64::consts::PI * i as f64 / (rings + 1) as f64;
        for j in 0..segments {
            let ph = 2.0 * std::f64::consts::PI * j as f64 / segments as f64;
            v.push(Vec3::new(radius * th.sin() * ph.cos(), radius * th.sin() * ph.sin(), radius * th.cos()));
        }
    }
    v.push(Vec3::new(0.0, 0.0, -radius));
    let south = v.len() - 1;
    let at = |i: usize, j: usize| 1 + (i - 1) * segments + (j % segments);
    let mut f = Vec::new();
    for j in 0..segments {
        f.push([0, at(1, j), at(1, j + 1)]);
    }
    for i in 1..rings {
        for j in 0..segments {
            f.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
            f.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    for j in 0..segments {
        f.push([south, at(rings, j + 1), at(rings, j)]);
    }
    Ok(TriangleMesh::from_parts_unchecked(v.iter().map(|p| p.cast()).collect(), f))
}

/// Adds i.i.d. `N(0, sigma^2)` noise to every coordinate.
pub fn add_noise<T: Real>(mesh: &TriangleMesh<T>, spec: NoiseSpec) -> Result<TriangleMesh<T>, SynthError> {
    if spec.sigma.is_nan() || spec.sigma < 0.0 {
        return Err(SynthError::NegativeSigma(spec.sigma));
    }
    if spec.sigma == 0.0 {
        return Ok(mesh.clone());
    }
    let normal = Normal::new(0.0, spec.sigma).map_err(|_| SynthError::NegativeSigma(spec.sigma))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let offsets: Vec<Vec3<T>> = (0..mesh.num_vertices())
        .map(|_| {
            let d: [f64; 3] = [normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)];
            Vec3(d).cast()
        })
        .collect();
    let (verts, faces) = mesh.clone().into_parts();
    let verts = verts.into_iter().zip(offsets).map(|(p, d)| p + d).collect();
    Ok(TriangleMesh::from_parts_unchecked(verts, faces))
}

/// Displaces vertices within Euclidean distance `radius` of `center` along
/// their normals by `height * (1 + cos(pi d / radius)) / 2`.
pub fn add_bump<T: Real>(
    mesh: &TriangleMesh<T>,
    center: Vec3<T>,
    radius: T,
    height: T,
) -> Result<TriangleMesh<T>, SynthError> {
    let inside = bump_vertices(mesh, center, radius);
    if inside.len() == mesh.num_vertices() {
        return Err(SynthError::BumpCoversMesh);
    }
    if height == T::zero() {
        return Ok(mesh.clone());
    }
    let normals = vertex_normals(mesh);
    let pi = T::of(std::f64::consts::PI);
    let half = T::of(0.5);
    let (mut verts, faces) = mesh.clone().into_parts();
    for i in inside {
        let d = verts[i].distance(&center);
        let w = height * (T::one() + (pi * d / radius).cos()) * half;
        verts[i] += normals[i] * w;
    }
    Ok(TriangleMesh::from_parts_unchecked(verts, faces))
}

/// Vertices strictly within `radius` of `center` (those a bump displaces).
pub fn bump_vertices<T: Real>(mesh: &TriangleMesh<T>, center: Vec3<T>, radius: T) -> Vec<usize> {
    (0..mesh.num_vertices()).filter(|&i| mesh.vertices()[i].distance(&center) < radius).collect()
}

/// Two meshes in one vertex/face list.
pub fn disjoint_union<T: Real>(a: &TriangleMesh<T>, b: &TriangleMesh<T>) -> TriangleMesh<T> {
    let off = a.num_vertices();
    let mut v = a.vertices().to_vec();
    v.extend_from_slice(b.vertices());
    let mut f = a.faces().to_vec();
    f.extend(b.faces().iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]));
    TriangleMesh::from_parts_unchecked(v, f)
}

/// `m` i.i.d. standard normal rows of length `p`; rows from `shift_time`
/// (1-based) onward have `shift_vector` added.
pub fn spectra_stream(
    p: usize,
    m: usize,
    shift_time: Option<usize>,
    shift_vector: &[f64],
    seed: u64,
) -> Result<SpectraSeries, SynthError> {
    if p == 0 || m == 0 || (shift_time.is_some() && shift_vector.len() != p) {
        return Err(SynthError::Shape { p, m, len: shift_vector.len() });
    }
    if let Some(s) = shift_time {
        if s > m || s == 0 {
            return Err(SynthError::ShiftTime { shift: s, m });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (1..=m)
        .map(|t| {
            (0..p)
                .map(|j| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    match shift_time {
                        Some(s) if t >= s => z + shift_vector[j],
                        _ => z,
                    }
                })
                .collect()
        })
        .collect();
    Ok(SpectraSeries::unlabeled(rows, Phase::Monitoring).expect("generated rows are well formed"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::connected_components;

    fn signed_volume(m: &TriangleMesh<f64>) -> f64 {
        (0..m.num_faces())
            .map(|f| {
                let [a, b, c] = m.face_vertices(f);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    #[test]
    fn icosphere_counts_and_radius() {
        let m0: TriangleMesh<f64> = icosphere(0, 1.0).unwrap();
        assert_eq!((m0.num_vertices(), m0.num_faces()), (12, 20));
        let m: TriangleMesh<f64> = icosphere(4, 2.0).unwrap();
        assert_eq!(m.num_vertices(), 2562);
        assert!(m.vertices().iter().all(|v| (v.norm() - 2.0).abs() < 1e-12));
        assert!(signed_volume(&m) > 0.0);
        m.validate().unwrap();
        assert!(icosphere::<f64>(8, 1.0).is_err());
    }

    #[test]
    fn uv_sphere_is_closed_and_outward() {
        let m: TriangleMesh<f64> = uv_sphere(10, 20, 1.0).unwrap();
        assert_eq!(m.num_vertices(), 202);
        m.validate().unwrap();
        assert!(signed_volume(&m) > 0.0);
        assert!(crate::mesh::boundary_vertices(&m).is_empty());
    }

    #[test]
    fn noise_is_seeded_and_topology_preserving() {
        let m: TriangleMesh<f64> = icosphere(2, 1.0).unwrap();
        let a = add_noise(&m, NoiseSpec { sigma: 0.01, seed: 1 }).unwrap();
        let b = add_noise(&m, NoiseSpec { sigma: 0.01, seed: 1 }).unwrap();
        let c = add_noise(&m, NoiseSpec { sigma: 0.01, seed: 2 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.faces(), m.faces());
        assert_eq!(add_noise(&m, NoiseSpec { sigma: 0.0, seed: 1 }).unwrap(), m);
    }

    #[test]
    fn bump_height_zero_is_identity() {
        let m: TriangleMesh<f64> = icosphere(2, 1.0).unwrap();
        let c = Vec3::new(0.0, 0.0, 1.0);
        assert_eq!(add_bump(&m, c, 0.3, 0.0).unwrap(), m);
        assert_eq!(add_bump(&m, c, 5.0, 0.1).unwrap_err(), SynthError::BumpCoversMesh);
    }

    #[test]
    fn union_has_two_components() {
        let a: TriangleMesh<f64> = icosphere(1, 1.0).unwrap();
        let b = a.map_vertices(|p| *p + Vec3::new(3.0, 0.0, 0.0));
        assert_eq!(connected_components(&disjoint_union(&a, &b)).len(), 2);
    }

    #[test]
    fn stream_shift_and_errors() {
        let s = spectra_stream(5, 20, Some(11), &[0.0, 3.0, 0.0, 0.0, 0.0], 9).unwrap();
        let base = spectra_stream(5, 20, None, &[], 9).unwrap();
        for t in 0..20 {
            let d = s.rows()[t][1] - base.rows()[t][1];
            assert!((d - if t >= 10 { 3.0 } else { 0.0 }).abs() < 1e-12);
        }
        assert!(spectra_stream(5, 20, Some(21), &[0.0; 5], 1).is_err());
    }
}
