//! Closed-form and worked-example checks, one per module.

use std::f64::consts::{PI, SQRT_2};

use rdfront::cli::{emit_heatmap, parse_config, run, sha256_hex};
use rdfront::geometry::{build_polytope, planar_normal, surface_height, PolytopeSpec};
use rdfront::medium::{cubic_homogeneous, cubic_striped, validate_medium};
use rdfront::pulsating::{closed_form_error, compute_front, FrontConfig, FrontOutcome, PulsatingFront};
use rdfront::solver::{check_comparison, solve_cauchy, Boundary, Field, Grid, SolverConfig, Trajectory};
use rdfront::speedmap::{
    build_speed_map, check_theorem_conditions, grad_g_default, reversed_override, SpeedMap, Variant, Verdict,
};
use rdfront::Error;

fn pair45() -> PolytopeSpec {
    build_polytope(&[0.0, 1.0], &[planar_normal(PI / 4.0), planar_normal(3.0 * PI / 4.0)]).unwrap()
}

#[test]
fn cubic_speed_profile_and_decay() {
    let m = cubic_homogeneous(2, 0.25, 1.0).unwrap();
    let out = compute_front(&m, &[0.0, 1.0], &FrontConfig::new(0.05)).unwrap();
    let FrontOutcome::Converged(front) = out else {
        panic!("no converged front: {}", out.label())
    };
    let exact = 0.5 / SQRT_2;
    assert!((front.speed - exact).abs() <= 0.02 * exact, "c = {}", front.speed);
    assert!(closed_form_error(&front, 0.25).unwrap() <= 0.01);
    let mu = front.decay.as_ref().expect("decay fit").mu;
    assert!((mu - 1.0 / SQRT_2).abs() <= 0.1 / SQRT_2, "mu = {mu}");
}

#[test]
fn balanced_cubic_barely_moves() {
    let m = cubic_homogeneous(2, 0.5, 1.0).unwrap();
    let out = compute_front(&m, &[1.0, 0.0], &FrontConfig::new(0.1)).unwrap();
    let (c, _) = out.speed().unwrap_or((0.0, 0.0));
    assert!(c.abs() <= 1e-2, "{}: c = {c}", out.label());
}

#[test]
fn front_binary_round_trip() {
    let m = cubic_homogeneous(2, 0.25, 1.0).unwrap();
    let FrontOutcome::Converged(front) = compute_front(&m, &[0.6, 0.8], &FrontConfig::new(0.25)).unwrap() else {
        panic!("expected a converged front")
    };
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("front.bin");
    front.write(&p).unwrap();
    let back = PulsatingFront::read(&p).unwrap();
    assert_eq!(back.speed.to_bits(), front.speed.to_bits());
    assert_eq!(back.profile.values, front.profile.values);
}

#[test]
fn weak_stripes_perturb_the_speed_weakly() {
    // transverse periodic strip in a lattice direction
    let m = cubic_striped(2, 0.25, 1e-3, 1.0).unwrap();
    let c = compute_front(&m, &[0.0, 1.0], &FrontConfig::new(0.25).speed_only()).unwrap().speed().unwrap().0;
    let h = cubic_homogeneous(2, 0.25, 1.0).unwrap();
    let c0 = compute_front(&h, &[0.0, 1.0], &FrontConfig::new(0.25).speed_only()).unwrap().speed().unwrap().0;
    assert!((c - c0).abs() < 1e-3, "{c} vs {c0}");
}

#[test]
fn incommensurate_heterogeneous_direction_is_refused() {
    let m = cubic_striped(2, 0.25, 0.1, 1.0).unwrap();
    let e = planar_normal(22.5f64.to_radians());
    assert!(matches!(compute_front(&m, &e, &FrontConfig::new(0.25)), Err(Error::Precondition(_))));
}

#[test]
fn isotropic_speeds() {
    let m = cubic_homogeneous(2, 0.25, 1.0).unwrap();
    let map = build_speed_map(&m, &[0.0, 1.0], 8, &FrontConfig::new(0.1)).unwrap();
    let s: Vec<f64> = map.samples.iter().map(|d| d.speed).collect();
    let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| (a.0.min(v), a.1.max(v)));
    assert!((hi - lo) / lo <= 0.02);
}

#[test]
fn homogeneous_grad_g_closed_form() {
    let m = cubic_homogeneous(2, 0.25, 1.0).unwrap();
    let map = build_speed_map(&m, &[0.0, 1.0], 16, &FrontConfig::new(0.25)).unwrap();
    // the lattice speed replaces c_f (isotropic map)
    let cf = map.samples[0].speed;
    for deg in [45.0, 60.0, 75.0, 90.0, 110.0, 135.0_f64] {
        let e = planar_normal(deg.to_radians());
        let g = grad_g_default(&map, &e).unwrap();
        let d = e[1];
        let exact = [cf * e[0] * d / (d * d), cf * (e[1] * d - 1.0) / (d * d)];
        assert!((g[0] - exact[0]).abs() <= 1e-4 && (g[1] - exact[1]).abs() <= 1e-4, "{deg}: {g:?} vs {exact:?}");
        assert!((g[0] * e[0] + g[1] * e[1]).abs() <= 1e-6);
    }
    let p = pair45();
    let g1 = grad_g_default(&map, &p.normals[0]).unwrap();
    let v = g1[0] * p.normals[1][0] + g1[1] * p.normals[1][1];
    let expect = -SQRT_2 * 0.5 / SQRT_2;
    assert!((v - expect).abs() <= 0.02 * expect.abs(), "{v}");
}

#[test]
fn conditions_on_measured_and_reversed_maps() {
    let p = pair45();
    let m = cubic_homogeneous(2, 0.25, 1.0).unwrap();
    let map = build_speed_map(&m, &[0.0, 1.0], 16, &FrontConfig::new(0.25)).unwrap();
    let v = check_theorem_conditions(&map, &p, Variant::ExistenceV).unwrap();
    assert!(v.passed(), "{}", v.text());
    assert!(v.conditions.iter().skip(1).all(|c| c.margin > 0.0));
    let w = check_theorem_conditions(&map, &p, Variant::UniqueW).unwrap();
    assert!(!w.passed());

    let rev = SpeedMap::from_override(&[0.0, 1.0], reversed_override(0.5, 0.2, p.normals[0][1]), 32).unwrap();
    let w = check_theorem_conditions(&rev, &p, Variant::UniqueW).unwrap();
    assert!(w.passed(), "{}", w.text());
    let v = check_theorem_conditions(&rev, &p, Variant::ExistenceV).unwrap();
    assert_eq!(v.verdict("iii"), Some(Verdict::Fail));
    assert_eq!(v.verdict("iv"), Some(Verdict::Fail));
}

#[test]
fn symmetric_surface_closed_form() {
    let p = pair45();
    for k in -400..=400 {
        let x = k as f64 * 0.05;
        let s = surface_height(&p, &[x], 1.0).unwrap();
        assert!((s.phi - SQRT_2 * (2.0 * (x / SQRT_2).cosh()).ln()).abs() <= 1e-10, "x = {x}");
    }
    assert!((surface_height(&p, &[0.0], 1.0).unwrap().h - 0.5).abs() <= 1e-12);
}

#[test]
fn media_presets_validate() {
    for m in [cubic_homogeneous(2, 0.25, 1.0).unwrap(), cubic_striped(2, 0.25, 0.1, 1.0).unwrap()] {
        let r = validate_medium(&m, 16).unwrap();
        assert!(r.all_passed(), "{}", m.name);
    }
    assert!(validate_medium(&cubic_homogeneous(2, 0.25, 1.0).unwrap(), 4).is_err());
}

#[test]
fn ordered_data_stay_ordered() {
    let m = cubic_striped(2, 0.25, 0.1, 1.0).unwrap();
    let g = Grid::new(&[-4.0, -4.0], &[4.0, 4.0], &[0.25, 0.25], Boundary::ZeroFlux).unwrap();
    let lo = Field::from_fn(&g, 0.0, |x| if x[0].hypot(x[1]) < 2.0 { 0.8 } else { 0.0 });
    let hi = Field::from_fn(&g, 0.0, |x| if x[0].hypot(x[1]) < 2.5 { 1.0 } else { 0.05 });
    let r = check_comparison(&m, &lo, &hi, &SolverConfig::explicit(&g, &m, 10.0, 0.0)).unwrap();
    assert!(r.passed && r.min_gap >= -1e-10);
}

#[test]
fn trajectory_round_trip() {
    let m = cubic_homogeneous(2, 0.25, 1.0).unwrap();
    let g = Grid::new(&[0.0, 0.0], &[4.0, 4.0], &[0.5, 0.5], Boundary::ZeroFlux).unwrap();
    let u0 = Field::from_fn(&g, 0.0, |x| (-(x[0] * x[0] + x[1] * x[1]) / 4.0).exp());
    let traj = solve_cauchy(&m, &u0, &SolverConfig::explicit(&g, &m, 2.0, 1.0)).unwrap();
    assert_eq!(traj.snapshots.len(), 3);
    assert!((traj.snapshots.last().unwrap().time - 2.0).abs() <= SolverConfig::explicit(&g, &m, 2.0, 1.0).dt());
    let dir = tempfile::tempdir().unwrap();
    traj.write_dir(dir.path()).unwrap();
    let back = Trajectory::read_dir(dir.path()).unwrap();
    for (a, b) in traj.snapshots.iter().zip(&back.snapshots) {
        assert_eq!(a.values, b.values);
        assert_eq!(a.time.to_bits(), b.time.to_bits());
    }
}

#[test]
fn heatmaps_black_white_and_faults() {
    let g = Grid::new(&[0.0, 0.0], &[2.0, 1.0], &[0.5, 0.5], Boundary::ZeroFlux).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("u.ppm");
    for (v, byte) in [(0.0, 0u8), (1.0, 255u8)] {
        emit_heatmap(&Field::constant(&g, v, 0.0), &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let header = b"P6\n5 3\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert!(bytes[header.len()..].iter().all(|&b| b == byte));
        assert_eq!(bytes.len(), header.len() + 5 * 3 * 3);
    }
    assert!(matches!(emit_heatmap(&Field::constant(&g, 1.2, 0.0), &p), Err(Error::Divergence { .. })));
}

#[test]
fn config_schema_errors() {
    let missing = "[experiment]\nkind = \"surface\"\n[numerics]\nalpha = 1\n";
    assert!(matches!(parse_config(missing), Err(Error::Config(m)) if m.contains("geometry.e0")));
    let unknown = "[experiment]\nkind = \"front-speed\"\n[numerics]\nspeed = 3\n";
    assert!(matches!(parse_config(unknown), Err(Error::Config(m)) if m.contains("unknown key")));
    let dup = "[experiment]\nkind = \"front-speed\"\nseed = 1\nseed = 2\n";
    assert!(matches!(parse_config(dup), Err(Error::Config(m)) if m.contains("duplicate")));
    let bad = "[experiment]\nkind = \"front-speed\"\n[numerics]\nh = fast\n";
    assert!(parse_config(bad).is_err());
    let quoted = "[experiment]\nkind = \"front-speed\"\n[numerics]\nh = \"0.1\"\n";
    assert!(matches!(parse_config(quoted), Err(Error::Config(m)) if m.contains("numerics.h")));
    let flat = "[experiment]\nkind = \"speed-map\"\n[geometry]\ne0 = \"0, 1\"\n";
    assert!(matches!(parse_config(flat), Err(Error::Config(m)) if m.contains("array of numbers")));
    let orphan = "kind = \"front-speed\"\n";
    assert!(parse_config(orphan).is_err());
}

fn manifest_lists_every_file(dir: &std::path::Path) {
    let manifest = std::fs::read_to_string(dir.join("manifest.txt")).unwrap();
    for entry in std::fs::read_dir(dir).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if name == "manifest.txt" {
            continue;
        }
        let sum = sha256_hex(&std::fs::read(dir.join(&name)).unwrap());
        assert!(manifest.contains(&format!("{sum}  {name}")), "{name} missing from the manifest");
    }
}

#[test]
fn surface_run_writes_closed_form_and_is_deterministic() {
    let text = "[experiment]\nkind = \"surface\"\n[geometry]\ne0 = [0, 1]\nfacets = [45, 135]\n[numerics]\nalpha = 1\n";
    let cfg = parse_config(text).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run(&cfg, a.path(), 1).unwrap();
    run(&cfg, b.path(), 1).unwrap();
    assert!(ra.passed(), "{}", ra.summary());
    let csv = std::fs::read(a.path().join("surface.csv")).unwrap();
    assert_eq!(csv, std::fs::read(b.path().join("surface.csv")).unwrap());
    // row for x = 0 carries phi = sqrt2 ln 2
    let text = String::from_utf8(csv).unwrap();
    let row = text.lines().find(|l| l.starts_with("0.0000000000000000e0,")).unwrap();
    let phi: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((phi - SQRT_2 * 2f64.ln()).abs() < 1e-12);
    manifest_lists_every_file(a.path());
}

#[test]
fn front_speed_run_reports_the_oracle() {
    let text = "[experiment]\nkind = \"front-speed\"\n[medium]\ntheta = 0.25\n[numerics]\nh = 0.1\n";
    let dir = tempfile::tempdir().unwrap();
    let rep = run(&parse_config(text).unwrap(), dir.path(), 1).unwrap();
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("PASS speed within 2% of (1 - 2 theta)/sqrt 2"), "{summary}");
    assert!(rep.passed());
    manifest_lists_every_file(dir.path());
}

#[test]
fn seeded_validation_is_bit_identical() {
    let text = "[experiment]\nkind = \"validate-medium\"\nseed = 7\n[medium]\npreset = \"cubic-striped\"\namplitude = 0.1\n\
                [numerics]\npairs = 3\nh = 0.5\nextent = 4\nt_end = 2\n";
    let cfg = parse_config(text).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&cfg, a.path(), 1).unwrap();
    run(&cfg, b.path(), 1).unwrap();
    for f in ["validation.csv", "theta.csv", "comparison.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}
