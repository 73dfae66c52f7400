use spectral_spc::fem::{compute_spectrum, BoundaryCondition, EigenOptions};
use spectral_spc::mesh::*;
use spectral_spc::remesh::*;
use spectral_spc::synth::{add_noise, icosphere, uv_sphere, NoiseSpec};
use spectral_spc::{Mesh, Vec3};

fn noisy_sphere(s: u32, sigma: f64, seed: u64) -> Mesh {
    add_noise(&icosphere::<f64>(s, 1.0).unwrap(), NoiseSpec { sigma, seed }).unwrap()
}

fn euler(m: &Mesh) -> i64 {
    m.num_vertices() as i64 - unique_edges(m).len() as i64 + m.num_faces() as i64
}

#[test]
fn edge_length_formula() {
    let s: Mesh = icosphere(6, 1.0).unwrap();
    let l = target_edge_length(&s, 10_000);
    let want = (4.0 * s.surface_area() / (3f64.sqrt() * 1e4)).sqrt();
    assert!((l - want).abs() < 1e-15);
    assert!((l - 0.0539).abs() < 1e-4, "{l}");
    let half = target_edge_length(&s, 20_000);
    assert!((half - l / 2f64.sqrt()).abs() < 1e-12);
    let square = Mesh::new(
        vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
        vec![[0, 1, 2], [0, 2, 3]],
    )
    .unwrap();
    assert!((target_edge_length(&square, 4) - 0.7598).abs() < 1e-4);
}

#[test]
fn noisy_sphere_contract() {
    let input = noisy_sphere(5, 0.01, 7);
    let params = RemeshParams { target_vertex_count: 3000, ..Default::default() };
    let out = isotropic_remesh(&input, &params).unwrap();
    out.validate().unwrap();
    let (_, rep) = validate_and_repair(&out, &RepairPolicy::default()).unwrap();
    assert!(rep.is_clean(), "{rep:?}");
    let n = out.num_vertices() as f64;
    assert!((n - 3000.0).abs() <= 600.0, "{n} vertices");
    let l = remesh_edge_length(&input, 3000);
    let e = edge_lengths(&out);
    let inside = e.iter().filter(|&&x| x >= 0.8 * l && x <= 1.33 * l).count() as f64 / e.len() as f64;
    assert!(inside >= 0.95, "{inside}");
    assert!(deviation_map(&out, &input).max() <= 2.0 * l);
    let (a_in, a_out) = (percentile(&aspect_ratios(&input), 95.0), percentile(&aspect_ratios(&out), 95.0));
    assert!(a_in > 1.5 && a_out <= a_in, "{a_in} -> {a_out}");
    assert_eq!(connected_components(&out).len(), 1);
    assert_eq!(euler(&out), 2);
}

#[test]
fn spectrum_survives_remeshing() {
    // at s = 5 the edges are only ~4 sigma long and the noise itself moves
    // the spectrum ~14% off the sphere's; see the notes in the README
    let input = noisy_sphere(4, 0.01, 3);
    let out = isotropic_remesh(&input, &RemeshParams { target_vertex_count: 2000, ..Default::default() }).unwrap();
    let o = EigenOptions::default();
    let a = compute_spectrum(&input, 16, BoundaryCondition::Neumann, &o).unwrap();
    let b = compute_spectrum(&out, 16, BoundaryCondition::Neumann, &o).unwrap();
    for i in 1..16 {
        let rel = (a.eigenvalues[i] - b.eigenvalues[i]).abs() / a.eigenvalues[i];
        assert!(rel < 0.05, "lambda_{} differs by {rel}", i + 1);
    }
}

#[test]
fn two_components_kept_apart() {
    let a: Mesh = icosphere(4, 1.0).unwrap();
    let two = spectral_spc::synth::disjoint_union(&a, &a.map_vertices(|v| *v + Vec3::new(4.0, 0.0, 0.0)));
    let out = isotropic_remesh(&two, &RemeshParams { target_vertex_count: 2000, ..Default::default() }).unwrap();
    assert_eq!(connected_components(&out).len(), 2);
    assert_eq!(euler(&out), 4);
}

#[test]
fn open_boundary_is_kept() {
    let s: Mesh = uv_sphere(40, 80, 1.0).unwrap();
    let keep: Vec<usize> = (0..s.num_faces()).filter(|&f| s.face_vertices(f).iter().all(|v| v.z() > -0.2)).collect();
    let (cap, _) = s.submesh(&keep);
    let out = isotropic_remesh(&cap, &RemeshParams { target_vertex_count: 1500, ..Default::default() }).unwrap();
    out.validate().unwrap();
    let rim = boundary_vertices(&out);
    assert!(!rim.is_empty());
    // boundary vertices stay on the cut
    let z_min = cap.vertices().iter().map(|v| v.z()).fold(f64::INFINITY, f64::min);
    for &i in &rim {
        assert!((out.vertices()[i].z() - z_min).abs() < 0.02, "rim vertex at z = {}", out.vertices()[i].z());
    }
    assert_eq!(euler(&out), euler(&cap));
}

#[test]
fn deterministic_output() {
    let input = noisy_sphere(4, 0.01, 1);
    let p = RemeshParams { target_vertex_count: 1200, ..Default::default() };
    assert_eq!(isotropic_remesh(&input, &p).unwrap(), isotropic_remesh(&input, &p).unwrap());
}

#[test]
fn refusals() {
    let m: Mesh = icosphere(2, 1.0).unwrap();
    let too_many = RemeshParams { target_vertex_count: 4 * m.num_vertices() + 1, ..Default::default() };
    assert!(matches!(isotropic_remesh(&m, &too_many), Err(RemeshError::TargetTooHigh { .. })));
    for bad in [
        RemeshParams { target_vertex_count: 99, ..Default::default() },
        RemeshParams { iterations: 0, ..Default::default() },
        RemeshParams { iterations: 21, ..Default::default() },
        RemeshParams { smoothing_weight: 0.0, ..Default::default() },
    ] {
        assert!(matches!(isotropic_remesh(&m, &bad), Err(RemeshError::InvalidParams(_))));
    }
}
