use num_complex::Complex64;
use proptest::prelude::*;

use prodnls::cli::snapshot::{decode_snapshots, encode_snapshots};
use prodnls::cli::RunConfig;
use prodnls::estimates::{algebra_ratio, trilinear_ratio, Parity};
use prodnls::fields::{hxy_norm, random_lattice_field, random_small_data};
use prodnls::lattice::{from_spectral, make_grid, to_spectral, GridSpec, SpectralField};
use prodnls::mixednorms::{mixed_norm, Trajectory};
use prodnls::propagators::{free_propagate, free_propagate_by_modes};
use prodnls::solver::{free_trajectory, EvolutionConfig};
use prodnls::SobolevSpec;

fn grid() -> GridSpec {
    make_grid(2, 1, 10.0, 16, 8, None).unwrap()
}

fn data(seed: u64) -> SpectralField {
    random_small_data(&grid(), &SobolevSpec::full(1, 0.6), 1.0, 2.5, seed).unwrap()
}

fn rel(a: &SpectralField, b: &SpectralField) -> f64 {
    a.sub(b).unwrap().l2_norm() / b.l2_norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transform_round_trip(seed in 0u64..1000) {
        let f = data(seed);
        prop_assert!(rel(&to_spectral(&from_spectral(&f), f.grid()).unwrap(), &f) < 1e-13);
    }

    #[test]
    fn free_flow_is_a_unitary_group(seed in 0u64..1000, s in -3.0f64..3.0, t in -3.0f64..3.0) {
        let f = data(seed);
        let composed = free_propagate(&free_propagate(&f, s), t);
        prop_assert!(rel(&composed, &free_propagate(&f, s + t)) < 1e-12);
        prop_assert!((free_propagate(&f, t).l2_norm() / f.l2_norm() - 1.0).abs() < 1e-13);
        prop_assert!(rel(&free_propagate_by_modes(&f, t).unwrap(), &free_propagate(&f, t)) < 1e-12);
    }

    #[test]
    fn sobolev_norm_is_homogeneous(seed in 0u64..1000, c in 0.01f64..100.0) {
        let f = data(seed);
        let spec = SobolevSpec::full(1, 0.6);
        let a = hxy_norm(&f.scale(Complex64::new(0.0, c)), &spec).unwrap();
        let b = c * hxy_norm(&f, &spec).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn mixed_norm_is_homogeneous(seed in 0u64..200, c in 0.1f64..10.0, p in 2.0f64..8.0, q in 2.0f64..8.0) {
        let cfg = EvolutionConfig::new(0.0, 0.5, 0.125);
        let traj = free_trajectory(&data(seed), &cfg).unwrap();
        let scaled = traj.map(|f| f.scale(Complex64::new(c, 0.0)));
        let a = mixed_norm(&scaled, p, q).unwrap();
        let b = c * mixed_norm(&traj, p, q).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn algebra_ratio_is_scale_invariant(seed in 0u64..500, c in 0.1f64..10.0) {
        let lat = grid().y_lattice();
        let f: Vec<_> = (0..3).map(|j| random_lattice_field(&lat, 2.0, Some(2), seed * 3 + j).unwrap()).collect();
        let a = algebra_ratio(&f[0], &f[1], &f[2], 0.6).unwrap();
        let b = algebra_ratio(&f[0].scale(Complex64::new(c, 0.0)), &f[1], &f[2], 0.6).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn snapshot_stream_is_bit_exact(seed in 0u64..1000, t in -1e3f64..1e3, hash in any::<[u8; 32]>()) {
        let f = data(seed);
        let bytes = encode_snapshots(f.grid(), &hash, &[(t, &f)]).unwrap();
        let back = decode_snapshots(&bytes[..]).unwrap();
        prop_assert_eq!(back.config_hash, hash);
        prop_assert_eq!(back.snapshots[0].0.to_bits(), t.to_bits());
        prop_assert_eq!(&back.snapshots[0].1, &f);
    }

    #[test]
    fn config_round_trip_is_a_fixed_point(
        delta in 1e-6f64..10.0,
        seed in any::<u32>(),
        ms in prop::collection::vec(-50.0f64..50.0, 1..5),
        dealias in any::<bool>(),
    ) {
        let mut cfg = RunConfig::default();
        cfg.set("data.delta", &delta.to_string()).unwrap();
        cfg.set("data.seed", &seed.to_string()).unwrap();
        let list: Vec<String> = ms.iter().map(|m| m.to_string()).collect();
        cfg.set("scan.m_list", &list.join(" , ")).unwrap();
        cfg.set("evolution.dealias", if dealias { "true" } else { "false" }).unwrap();
        let text = cfg.emit();
        let again = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.emit(), text);
        prop_assert_eq!(again.delta(), delta);
    }
}

#[test]
fn trilinear_ratio_is_scale_invariant() {
    let g = make_grid(2, 1, 4.0 * std::f64::consts::PI, 16, 8, None).unwrap();
    let cfg = EvolutionConfig::new(0.0, 1.0, 0.125);
    let spec = SobolevSpec::full(0, 0.0);
    let band = |s| prodnls::fields::random_data_in_band(&g, &spec, 1.0, 2.0, Some(1), s).unwrap();
    let u: Vec<Trajectory> = (0..3).map(|j| free_trajectory(&band(40 + j), &cfg).unwrap()).collect();
    let a = trilinear_ratio(&u[0], &u[1], &u[2], 0.1, Parity::Even).unwrap();
    let scaled = u[1].map(|f| f.scale(Complex64::new(0.0, 7.0)));
    let b = trilinear_ratio(&u[0], &scaled, &u[2], 0.1, Parity::Even).unwrap();
    assert!((a - b).abs() <= 1e-12 * a, "{a} {b}");
}
