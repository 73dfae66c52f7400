use super::sparse::SparseSymmetricMatrix;
use super::FemError;
use crate::mesh::TriangleMesh;
use crate::scalar::Real;

/// Linear finite element stiffness (cotangent) and consistent mass matrices.
pub fn assemble<T: Real>(
    mesh: &TriangleMesh<T>,
) -> Result<(SparseSymmetricMatrix<T>, SparseSymmetricMatrix<T>), FemError> {
    let n = mesh.num_vertices();
    let diag = mesh.bbox_diag();
    let area_tol = T::of(1e-12) * diag * diag;
    let half = T::of(0.5);
    let mut ta = Vec::with_capacity(9 * mesh.num_faces());
    let mut tb = Vec::with_capacity(9 * mesh.num_faces());
    for (fi, f) in mesh.faces().iter().enumerate() {
        let p = mesh.face_vertices(fi);
        let twice_area = (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
        let area = twice_area * half;
        if !(area > area_tol) || f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
            return Err(FemError::DegenerateFace(fi));
        }
        // cot of the angle at corner i, which sits opposite edge (j, k)
        let mut local = [[T::zero(); 3]; 3];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let u = p[j] - p[i];
            let v = p[k] - p[i];
            let w = -(u.dot(&v) / twice_area) * half;
            local[j][k] = w;
            local[k][j] = w;
        }
        for i in 0..3 {
            local[i][i] = -(local[i][(i + 1) % 3] + local[i][(i + 2) % 3]);
        }
        let m_diag = area / T::of(6.0);
        let m_off = area / T::of(12.0);
        for r in 0..3 {
            for c in 0..3 {
                ta.push((f[r], f[c], local[r][c]));
                tb.push((f[r], f[c], if r == c { m_diag } else { m_off }));
            }
        }
    }
    Ok((SparseSymmetricMatrix::from_full_triplets(n, ta), SparseSymmetricMatrix::from_full_triplets(n, tb)))
}
