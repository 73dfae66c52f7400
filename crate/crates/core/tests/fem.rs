mod common;

use common::{dense, generalized_eigen, lumpy_sphere, rel_close, rotate};
use proptest::prelude::*;
use spectral_spc::fem::*;
use spectral_spc::mesh::boundary_vertices;
use spectral_spc::synth::{disjoint_union, icosphere};
use spectral_spc::{Mesh, Vec3};

fn opts() -> EigenOptions {
    EigenOptions::default()
}

#[test]
fn equilateral_triangle_local_matrices() {
    let h = 3f64.sqrt() / 2.0;
    let m = Mesh::new(vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.5, h, 0.0)], vec![[0, 1, 2]]).unwrap();
    let (a, b) = assemble(&m).unwrap();
    let area = 3f64.sqrt() / 4.0;
    for i in 0..3 {
        for j in 0..3 {
            let (ea, eb) = if i == j { (1.0 / 3f64.sqrt(), area / 6.0) } else { (-1.0 / (2.0 * 3f64.sqrt()), area / 12.0) };
            assert!((a.get(i, j) - ea).abs() < 1e-14, "A[{i}{j}]");
            assert!((b.get(i, j) - eb).abs() < 1e-14, "B[{i}{j}]");
        }
    }
}

#[test]
fn stiffness_kills_constants_and_mass_sums_to_area() {
    for m in [icosphere::<f64>(0, 1.0).unwrap(), lumpy_sphere(2, 0.2, 4)] {
        let (a, b) = assemble(&m).unwrap();
        let ones = vec![1.0; m.num_vertices()];
        let r = a.mul_vec(&ones);
        assert!(r.iter().all(|x| x.abs() < 1e-12), "A 1 = {:?}", r.iter().fold(0.0f64, |s, x| s.max(x.abs())));
        let area: f64 = m
            .faces()
            .iter()
            .map(|f| {
                let [p, q, s] = f.map(|i| m.vertices()[i]);
                0.5 * (q - p).cross(&(s - p)).norm()
            })
            .sum();
        assert!(rel_close(b.sum_all(), area, 1e-12));
    }
}

#[test]
fn zero_area_face_refused() {
    let m = Mesh::from_parts_unchecked(
        vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
        vec![[0, 1, 3], [0, 1, 2]],
    );
    assert!(matches!(assemble(&m), Err(FemError::DegenerateFace(1))));
}

#[test]
fn unit_sphere_spectrum() {
    let m: Mesh = icosphere(4, 1.0).unwrap();
    let s = compute_spectrum(&m, 16, BoundaryCondition::Neumann, &opts()).unwrap();
    let mut expect = vec![];
    for l in 0..=3usize {
        expect.extend(std::iter::repeat_n((l * (l + 1)) as f64, 2 * l + 1));
    }
    assert!(s.eigenvalues[0].abs() < 1e-8);
    for (got, want) in s.eigenvalues.iter().zip(&expect).skip(1) {
        assert!(rel_close(*got, *want, 0.01), "{got} vs {want}");
    }
}

#[test]
fn disjoint_spheres_have_two_zero_modes() {
    let a: Mesh = icosphere(2, 1.0).unwrap();
    let two = disjoint_union(&a, &a.map_vertices(|v| *v + Vec3::new(3.0, 0.0, 0.0)));
    let s = compute_spectrum(&two, 6, BoundaryCondition::Neumann, &opts()).unwrap();
    assert_eq!(s.near_zero_count(1e-6), 2);
}

fn check_against_dense(m: &Mesh, k: usize) {
    let (a, b) = assemble(m).unwrap();
    let s = solve_lowest(&a, &b, k, BoundaryCondition::Neumann, &[], &opts()).unwrap();
    let (ad, bd) = (dense(&a), dense(&b));
    let (values, vecs) = generalized_eigen(&ad, &bd);
    let top = values[k - 1];
    for i in 0..k {
        assert!((s.eigenvalues[i] - values[i]).abs() <= 1e-9 * top, "lambda_{} {} vs {}", i + 1, s.eigenvalues[i], values[i]);
    }
    // each vector lies in the dense eigenspace of its cluster
    let phis = s.eigenvectors.as_ref().unwrap();
    for (i, phi) in phis.iter().enumerate() {
        let x = nalgebra::DVector::from_column_slice(phi);
        let bx = &bd * &x;
        let cluster: Vec<usize> = (0..values.len()).filter(|&j| (values[j] - values[i]).abs() <= 1e-6 * top).collect();
        let mut rest = x.clone();
        for &j in &cluster {
            let v = vecs.column(j);
            rest -= v * v.dot(&bx);
        }
        let off = (rest.transpose() * &bd * &rest)[(0, 0)].sqrt();
        assert!(off < 1e-6, "vector {} leaves its eigenspace by {off}", i + 1);
    }
}

#[test]
fn sparse_matches_dense_on_small_meshes() {
    check_against_dense(&lumpy_sphere(2, 0.15, 1), 10);
    let uv: Mesh = spectral_spc::synth::uv_sphere(14, 20, 1.0).unwrap();
    assert!(uv.num_vertices() <= 300);
    check_against_dense(&uv, 10);
    let s = lumpy_sphere(2, 0.1, 2);
    let keep: Vec<usize> = (0..s.num_faces()).filter(|&f| s.face_vertices(f).iter().all(|v| v.z() > -0.3)).collect();
    let (cap, _) = s.submesh(&keep);
    check_against_dense(&cap, 10);
}

#[test]
fn eigenvectors_are_b_orthonormal_with_small_residuals() {
    let m = lumpy_sphere(3, 0.1, 9);
    let (a, b) = assemble(&m).unwrap();
    let s = solve_lowest(&a, &b, 12, BoundaryCondition::Neumann, &[], &opts()).unwrap();
    let v = s.eigenvectors.as_ref().unwrap();
    let bv: Vec<Vec<f64>> = v.iter().map(|x| b.mul_vec(x)).collect();
    for i in 0..v.len() {
        for j in 0..v.len() {
            let d: f64 = v[i].iter().zip(&bv[j]).map(|(x, y)| x * y).sum();
            assert!((d - f64::from(u8::from(i == j))).abs() <= 1e-8, "({i},{j}) {d}");
        }
        let av = a.mul_vec(&v[i]);
        let r: f64 = av.iter().zip(&bv[i]).map(|(x, y)| (x - s.eigenvalues[i] * y).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = bv[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(r / nb <= 1e-8, "residual {}", r / nb);
    }
}

#[test]
fn dirichlet_dominates_neumann() {
    let s = lumpy_sphere(3, 0.05, 3);
    let keep: Vec<usize> = (0..s.num_faces()).filter(|&f| s.face_vertices(f).iter().all(|v| v.z() > 0.0)).collect();
    let (cap, _) = s.submesh(&keep);
    assert!(!boundary_vertices(&cap).is_empty());
    let n = compute_spectrum(&cap, 8, BoundaryCondition::Neumann, &opts()).unwrap();
    let d = compute_spectrum(&cap, 8, BoundaryCondition::Dirichlet, &opts()).unwrap();
    assert!(d.eigenvalues[0] > 1e-3);
    for (dn, dd) in n.eigenvalues.iter().zip(&d.eigenvalues) {
        assert!(dd >= dn, "{dd} < {dn}");
    }
    let closed: Mesh = icosphere(1, 1.0).unwrap();
    assert!(matches!(compute_spectrum(&closed, 3, BoundaryCondition::Dirichlet, &opts()), Err(FemError::EmptyBoundary)));
}

#[test]
fn too_many_eigenpairs_refused() {
    let m: Mesh = icosphere(0, 1.0).unwrap();
    assert!(matches!(compute_spectrum(&m, 13, BoundaryCondition::Neumann, &opts()), Err(FemError::InvalidK { .. })));
}

#[test]
fn scaled_spectrum_examples() {
    let spec = |v: Vec<f64>| LbSpectrum { eigenvalues: v, eigenvectors: None, boundary_condition: BoundaryCondition::Neumann, mesh_fingerprint: String::new() };
    assert_eq!(scaled_spectrum(&spec(vec![0.0, 4.0, 4.0, 4.0]), 2, 4).unwrap(), vec![1.0; 3]);
    assert!(matches!(scaled_spectrum(&spec(vec![0.0, 0.0, 4.0]), 2, 3), Err(FemError::NonPositiveEigenvalue { index: 2, .. })));
    assert!(scaled_spectrum(&spec(vec![0.0, 1.0]), 1, 2).is_err());
}

#[test]
fn spectra_csv_round_trip() {
    let ids = vec!["a".to_string(), "b".to_string()];
    let rows = vec![vec![0.0, 1.5, 2.25], vec![1e-17, 3.0, 1e6]];
    let mut buf = Vec::new();
    write_spectra_csv(&mut buf, &ids, &rows).unwrap();
    assert!(buf.starts_with(b"part_id,lambda_1,lambda_2,lambda_3\n"));
    let t = read_spectra_csv(&buf[..]).unwrap();
    assert_eq!(t.part_ids, ids);
    assert_eq!(t.rows, rows);
}

fn lowest(m: &Mesh, k: usize) -> Vec<f64> {
    compute_spectrum(m, k, BoundaryCondition::Neumann, &opts()).unwrap().eigenvalues
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rigid_motion_leaves_spectrum(seed in 0u64..1000, ax in -1.0f64..1.0, ay in -1.0f64..1.0, angle in 0.0f64..6.0, t in -5.0f64..5.0) {
        let m = lumpy_sphere(2, 0.2, seed);
        let moved = rotate(&m, [ax, ay, 0.7], angle, [t, -t, 2.0 * t]);
        let (a0, a1) = (lowest(&m, 10), lowest(&moved, 10));
        for i in 1..10 {
            prop_assert!(rel_close(a0[i], a1[i], 1e-10), "{} vs {}", a0[i], a1[i]);
        }
    }

    #[test]
    fn scaling_divides_by_square(seed in 0u64..1000, s in 0.1f64..10.0) {
        let m = lumpy_sphere(2, 0.2, seed);
        let big = m.map_vertices(|v| *v * s);
        let (a0, a1) = (lowest(&m, 8), lowest(&big, 8));
        for i in 1..8 {
            prop_assert!(rel_close(a0[i] / (s * s), a1[i], 1e-9));
        }
    }

    #[test]
    fn relabeling_vertices_leaves_spectrum(seed in 0u64..1000, shift in 1usize..100) {
        let m = lumpy_sphere(2, 0.2, seed);
        let n = m.num_vertices();
        // vertex i moves to slot (i * 7 + shift) mod n, a bijection since gcd(7, 162) = 1
        let slot: Vec<usize> = (0..n).map(|i| (i * 7 + shift) % n).collect();
        let mut verts = vec![Vec3::zero(); n];
        for i in 0..n {
            verts[slot[i]] = m.vertices()[i];
        }
        let faces = m.faces().iter().rev().map(|f| f.map(|i| slot[i])).collect();
        let p = Mesh::new(verts, faces).unwrap();
        let (a0, a1) = (lowest(&m, 10), lowest(&p, 10));
        for i in 1..10 {
            prop_assert!(rel_close(a0[i], a1[i], 1e-10));
        }
    }
}
