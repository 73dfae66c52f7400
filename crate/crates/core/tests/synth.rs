use proptest::prelude::*;
use spectral_spc::fem::{compute_spectrum, scaled_spectrum, BoundaryCondition, EigenOptions};
use spectral_spc::mesh::{connected_components, deviation_map};
use spectral_spc::remesh::{isotropic_remesh, RemeshParams};
use spectral_spc::synth::*;
use spectral_spc::{Mesh, Vec3};

fn analytic(count: usize) -> Vec<f64> {
    let mut v = Vec::new();
    let mut l = 1usize;
    while v.len() < count {
        v.extend(std::iter::repeat_n((l * (l + 1)) as f64, 2 * l + 1));
        l += 1;
    }
    v.truncate(count);
    v
}

#[test]
fn icosphere_counts_and_area() {
    let s0: Mesh = icosphere(0, 1.0).unwrap();
    assert_eq!((s0.num_vertices(), s0.num_faces()), (12, 20));
    for s in 1..=5u32 {
        let m: Mesh = icosphere(s, 2.5).unwrap();
        assert_eq!(m.num_vertices(), 10 * 4usize.pow(s) + 2);
        assert!(m.vertices().iter().all(|v| (v.norm() - 2.5).abs() <= 1e-12));
        m.validate().unwrap();
    }
    let m: Mesh = icosphere(4, 1.0).unwrap();
    let area: f64 = (0..m.num_faces()).map(|f| m.face_area(f)).sum();
    assert!((area / (4.0 * std::f64::consts::PI) - 1.0).abs() < 0.005);
    assert_eq!(icosphere::<f64>(8, 1.0).unwrap_err(), SynthError::Subdivisions(8));
}

fn nonzero_after_ira(sigma: f64, seed: u64) -> Vec<f64> {
    let m: Mesh = add_noise(&icosphere(4, 1.0).unwrap(), NoiseSpec { sigma, seed }).unwrap();
    let r = isotropic_remesh(&m, &RemeshParams { target_vertex_count: 2500, ..Default::default() }).unwrap();
    compute_spectrum(&r, 16, BoundaryCondition::Neumann, &EigenOptions::default()).unwrap().eigenvalues[1..].to_vec()
}

#[test]
fn small_noise_keeps_sphere_spectrum() {
    let got = nonzero_after_ira(0.01, 5);
    for (g, w) in got.iter().zip(analytic(15)) {
        assert!((g - w).abs() / w < 0.10, "{g} vs {w}");
    }
}

#[test]
fn large_noise_spoils_sphere_spectrum() {
    let got = nonzero_after_ira(0.05, 5);
    let worst = got.iter().zip(analytic(15)).map(|(g, w)| (g - w).abs() / w).fold(0.0, f64::max);
    assert!(worst > 0.10, "{worst}");
}

#[test]
fn bump_peaks_at_height() {
    let m: Mesh = icosphere(4, 1.0).unwrap();
    let c = Vec3::new(0.0, 0.0, 1.0);
    assert_eq!(add_bump(&m, c, 0.3, 0.0).unwrap(), m);
    let b = add_bump(&m, c, 0.3, 0.1).unwrap();
    let d = deviation_map(&b, &m).max();
    assert!((d - 0.1).abs() <= 0.005, "{d}");
    let moved = bump_vertices(&m, c, 0.3);
    for i in 0..m.num_vertices() {
        assert_eq!(moved.contains(&i), b.vertices()[i] != m.vertices()[i]);
    }
    assert_eq!(add_bump(&m, c, 3.0, 0.1).unwrap_err(), SynthError::BumpCoversMesh);
}

#[test]
fn bump_changes_scaled_spectrum_beyond_noise() {
    let base: Mesh = icosphere(4, 1.0).unwrap();
    let scaled = |m: &Mesh| {
        let s = compute_spectrum(m, 15, BoundaryCondition::Neumann, &EigenOptions::default()).unwrap();
        scaled_spectrum(&s, 2, 15).unwrap()
    };
    let gap = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
    let noisy = |seed| add_noise(&base, NoiseSpec { sigma: 0.005, seed }).unwrap();
    let (n1, n2) = (scaled(&noisy(1)), scaled(&noisy(2)));
    let bumped = scaled(&add_noise(&add_bump(&base, Vec3::new(0.0, 0.0, 1.0), 0.3, 0.1).unwrap(), NoiseSpec { sigma: 0.005, seed: 3 }).unwrap());
    let (noise_gap, bump_gap) = (gap(&n1, &n2), gap(&bumped, &n1));
    assert!(bump_gap > 10.0 * noise_gap, "bump {bump_gap} vs noise {noise_gap}");
}

#[test]
fn stream_shapes_and_errors() {
    let s = spectra_stream(5, 20, Some(11), &[0.0, 3.0, 0.0, 0.0, 0.0], 1).unwrap();
    assert_eq!((s.m(), s.p()), (20, 5));
    let quiet = spectra_stream(5, 20, None, &[], 1).unwrap();
    for t in 0..20 {
        for j in 0..5 {
            let shift = if t >= 10 && j == 1 { 3.0 } else { 0.0 };
            assert_eq!(s.rows()[t][j], quiet.rows()[t][j] + shift);
        }
    }
    assert!(matches!(spectra_stream(5, 20, Some(21), &[0.0; 5], 1), Err(SynthError::ShiftTime { .. })));
    assert!(spectra_stream(0, 20, None, &[], 1).is_err());
    assert!(spectra_stream(5, 20, Some(3), &[1.0], 1).is_err());
}

#[test]
fn stream_moments_match_across_seeds() {
    let m = 20_000;
    for seed in [1u64, 2] {
        let s = spectra_stream(3, m, None, &[], seed).unwrap();
        for j in 0..3 {
            let c = s.column(j);
            let mean = c.iter().sum::<f64>() / m as f64;
            let var = c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
            // 5 standard errors
            assert!(mean.abs() < 5.0 / (m as f64).sqrt(), "mean {mean}");
            assert!((var - 1.0).abs() < 5.0 * (2.0 / m as f64).sqrt(), "var {var}");
        }
    }
    assert_ne!(spectra_stream(3, 10, None, &[], 1).unwrap().rows(), spectra_stream(3, 10, None, &[], 2).unwrap().rows());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn noise_is_seeded_and_keeps_topology(seed in any::<u64>(), sigma in 0.0f64..0.05) {
        let m: Mesh = icosphere(2, 1.0).unwrap();
        let a = add_noise(&m, NoiseSpec { sigma, seed }).unwrap();
        prop_assert_eq!(&a, &add_noise(&m, NoiseSpec { sigma, seed }).unwrap());
        prop_assert_eq!(a.faces(), m.faces());
        prop_assert_eq!(connected_components(&a).len(), 1);
        if sigma == 0.0 {
            prop_assert_eq!(&a, &m);
        }
    }

    #[test]
    fn streams_are_seeded(seed in any::<u64>(), p in 1usize..6, m in 1usize..30) {
        let (a, b) = (spectra_stream(p, m, None, &[], seed).unwrap(), spectra_stream(p, m, None, &[], seed).unwrap());
        prop_assert_eq!(a.rows(), b.rows());
    }
}
