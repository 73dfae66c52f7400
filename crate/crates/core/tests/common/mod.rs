#![allow(dead_code)]

use nalgebra::{DMatrix, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectral_spc::fem::SparseSymmetricMatrix;
use spectral_spc::synth::icosphere;
use spectral_spc::{Mesh, Vec3};

pub fn dense(m: &SparseSymmetricMatrix<f64>) -> DMatrix<f64> {
    let n = m.dim();
    let mut d = DMatrix::zeros(n, n);
    for (i, j, v) in m.upper_triplets() {
        d[(i, j)] = v;
        d[(j, i)] = v;
    }
    d
}

/// All eigenpairs of `A x = l B x` through a Cholesky reduction, ascending.
/// Columns of the returned matrix are `B`-orthonormal.
pub fn generalized_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let l = b.clone().cholesky().expect("mass matrix is positive definite").l();
    let linv = l.clone().try_inverse().unwrap();
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let n = c.nrows();
    let e = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| e.eigenvalues[i].total_cmp(&e.eigenvalues[j]));
    let values = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(n, order.len(), |r, k| e.eigenvectors[(r, order[k])]);
    (values, linv.transpose() * y)
}

/// Icosphere whose vertex radii are perturbed by up to `amp`.
pub fn lumpy_sphere(subdivisions: u32, amp: f64, seed: u64) -> Mesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s: Mesh = icosphere(subdivisions, 1.0).unwrap();
    let scale: Vec<f64> = (0..s.num_vertices()).map(|_| 1.0 + amp * (2.0 * rng.random::<f64>() - 1.0)).collect();
    let verts = s.vertices().iter().zip(&scale).map(|(v, &c)| *v * c).collect();
    Mesh::new(verts, s.faces().to_vec()).unwrap()
}

pub fn rotate(mesh: &Mesh, axis: [f64; 3], angle: f64, shift: [f64; 3]) -> Mesh {
    let r = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::from(axis)), angle);
    mesh.map_vertices(|v| {
        let p = r * Vector3::new(v.x(), v.y(), v.z());
        Vec3::new(p.x + shift[0], p.y + shift[1], p.z + shift[2])
    })
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}
