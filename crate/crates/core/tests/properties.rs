//! Invariants under randomized inputs; the generator seed is fixed at 0.

use std::f64::consts::PI;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rdfront::cli::{parse_config, random_ordered_pair};
use rdfront::geometry::{build_polytope, planar_normal, surface_height};
use rdfront::medium::{checkerboard_diffusion, cubic_homogeneous, cubic_striped};
use rdfront::pulsating::smoothed_step;
use rdfront::solver::{check_comparison, step, Boundary, Field, Grid, SolverConfig};

fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(0),
        failure_persistence: None,
        ..Config::default()
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn comparison_principle(seed in 0u64..1_000_000, amp in 0.0..0.3f64) {
        let m = checkerboard_diffusion(2, 0.25, 1.0, amp, 1.0).unwrap();
        let g = Grid::new(&[-3.0, -3.0], &[3.0, 3.0], &[0.5, 0.5], Boundary::ZeroFlux).unwrap();
        let (lo, hi) = random_ordered_pair(&g, &mut ChaCha8Rng::seed_from_u64(seed));
        let r = check_comparison(&m, &lo, &hi, &SolverConfig::explicit(&g, &m, 3.0, 0.0)).unwrap();
        prop_assert!(r.min_gap >= -1e-10, "gap {}", r.min_gap);
    }

    #[test]
    fn unit_interval_is_invariant(seed in 0u64..1_000_000, theta in 0.1..0.9f64) {
        let m = cubic_striped(2, theta, 0.05, 1.0).unwrap();
        let g = Grid::new(&[-3.0, -3.0], &[3.0, 3.0], &[0.5, 0.5], Boundary::ZeroFlux).unwrap();
        let (u, _) = random_ordered_pair(&g, &mut ChaCha8Rng::seed_from_u64(seed));
        let cfg = SolverConfig::explicit(&g, &m, 1.0, 0.0);
        let mut u = u;
        for _ in 0..40 {
            u = step(&u, &m, &cfg).unwrap();
        }
        prop_assert!(u.min() >= 0.0 && u.max() <= 1.0);
    }

    #[test]
    fn periodic_axis_is_translation_invariant(vals in prop::collection::vec(0.0..1.0f64, 8 * 5)) {
        let m = cubic_homogeneous(2, 0.3, 1.0).unwrap();
        let g = Grid::new(&[0.0, 0.0], &[1.75, 1.0], &[0.25, 0.25], Boundary::ZeroFlux)
            .unwrap()
            .with_periodic_axis(0)
            .unwrap();
        let cfg = SolverConfig::explicit(&g, &m, 1.0, 0.0);
        let u = Field { grid: g.clone(), values: vals, time: 0.0 };
        let ny = g.counts[1];
        let roll = |f: &Field| {
            let mut out = f.clone();
            let n = f.values.len();
            for i in 0..n {
                out.values[(i + ny) % n] = f.values[i];
            }
            out
        };
        let a = roll(&step(&u, &m, &cfg).unwrap());
        let b = step(&roll(&u), &m, &cfg).unwrap();
        prop_assert!(a.sup_distance(&b) < 1e-15);
    }

    #[test]
    fn surface_lies_on_its_level_set(
        a1 in 20.0..80.0f64,
        a2 in 100.0..160.0f64,
        x in -30.0..30.0f64,
        alpha in 0.05..2.0f64,
    ) {
        let p = build_polytope(&[0.0, 1.0], &[planar_normal(a1.to_radians()), planar_normal(a2.to_radians())]).unwrap();
        let s = surface_height(&p, &[x], alpha).unwrap();
        let sum: f64 = s.q_hat.iter().map(|q| (-q).exp()).sum();
        prop_assert!((sum - 1.0).abs() < 1e-10);
        prop_assert!(s.q_hat.iter().all(|q| *q >= -1e-12));
        prop_assert!(s.h >= 0.0 && s.h <= 0.5 + 1e-12);
        prop_assert!((s.normal[0].hypot(s.normal[1]) - 1.0).abs() < 1e-12);
        prop_assert!(s.tau.iter().all(|t| *t >= 0.0));
        for k in 0..2 {
            let back: f64 = s.tau.iter().zip(&p.normals).map(|(t, e)| t * e[k]).sum();
            prop_assert!((back - s.normal[k]).abs() < 1e-12);
        }
        // never below the polytope boundary
        let plain = p.normals.iter().map(|e| -e[0] * x / e[1]).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(s.height >= plain - 1e-9);
    }

    #[test]
    fn smoothed_step_is_a_decreasing_front(a in -40.0..40.0f64, d in 1e-3..5.0f64) {
        let (u, v) = (smoothed_step(a), smoothed_step(a + d));
        prop_assert!((0.0..=1.0).contains(&u) && v <= u);
        prop_assert!((smoothed_step(a) + smoothed_step(-a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_echo_round_trips(
        theta in 0.05..0.95f64,
        h in prop::sample::select(vec![0.05, 0.1, 0.25, 0.5]),
        seed in 0u64..1000,
        dirs in 8usize..64,
    ) {
        let text = format!(
            "[experiment]\nkind = \"speed-map\"\nseed = {seed}\n[medium]\ntheta = {theta}\n[geometry]\ne0 = [0, 1]\n\
             [speedmap]\ndirections = {dirs}\n[numerics]\nh = {h}\n"
        );
        let a = parse_config(&text).unwrap();
        let b = parse_config(&a.echo()).unwrap();
        prop_assert_eq!(a.values, b.values);
    }

    #[test]
    fn unknown_keys_are_rejected(key in "[a-z_]{3,12}") {
        let known = [
            "h", "h_res", "dt", "direction", "eps", "alpha", "extent", "step", "sampling_density", "pairs",
            "first_horizon", "doublings", "half_width", "below", "above", "eta", "t_end", "ridge_radius", "bump",
        ];
        prop_assume!(!known.contains(&key.as_str()));
        let text = format!("[experiment]\nkind = \"front-speed\"\n[numerics]\n{key} = 1\n");
        prop_assert!(parse_config(&text).is_err());
    }

    #[test]
    fn field_binary_round_trip(vals in prop::collection::vec(-1.0..2.0f64, 12), t in 0.0..100.0f64) {
        let g = Grid::new(&[0.0, -1.0], &[1.5, 0.0], &[0.5, 0.5], Boundary::ZeroFlux).unwrap();
        let f = Field { grid: g, values: vals, time: t };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        f.write(&p).unwrap();
        let back = Field::read(&p).unwrap();
        prop_assert_eq!(back.values, f.values);
        prop_assert_eq!(back.time.to_bits(), f.time.to_bits());
    }
}

#[test]
fn symmetric_surface_is_even() {
    let p = build_polytope(&[0.0, 1.0], &[planar_normal(PI / 4.0), planar_normal(3.0 * PI / 4.0)]).unwrap();
    let mut runner = proptest::test_runner::TestRunner::new(config(64));
    runner
        .run(&(0.0..25.0f64, 0.1..3.0f64), |(x, alpha)| {
            let l = surface_height(&p, &[-x], alpha).unwrap();
            let r = surface_height(&p, &[x], alpha).unwrap();
            prop_assert!((l.phi - r.phi).abs() < 1e-12);
            prop_assert!((l.h - r.h).abs() < 1e-12);
            Ok(())
        })
        .unwrap();
}
