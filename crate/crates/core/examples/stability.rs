//! Perturbations of a constructed pyramidal front and the minimizing-shift
//! gap `s(t) = min_tau sup |u(t) - V(t + tau)|`, plus the squeeze rates.
//!
//! A smaller window and shorter horizons than the defaults keep this quick.

use std::f64::consts::PI;
use std::time::Instant;

use rdfront::fronts::{
    compute_family, construct_front, measure_k, run_stability, squeeze_evaluator, ConstructConfig, FrontAssembly,
    ResidualLattice, StabilityConfig, StabilityParams,
};
use rdfront::geometry::{build_polytope, planar_normal};
use rdfront::medium::cubic_homogeneous;
use rdfront::pulsating::FrontConfig;
use rdfront::solver::Field;
use rdfront::speedmap::Variant;
use rdfront::tolerances::CFL_SAFETY;

fn main() -> rdfront::Result<()> {
    let medium = cubic_homogeneous(2, 0.25, 1.0)?;
    let h = 0.25;
    let angles: Vec<f64> = [45.0, 67.5, 90.0, 112.5, 135.0].iter().map(|d: &f64| d.to_radians()).collect();
    let family = compute_family(&medium, &angles, h, CFL_SAFETY * h * h / 4.0, &FrontConfig::new(h))?;
    let poly = build_polytope(&[0.0, 1.0], &[planar_normal(PI / 4.0), planar_normal(3.0 * PI / 4.0)])?;
    let asm = FrontAssembly::unchecked(&medium, poly, family, Variant::ExistenceV, 0.5 * medium.sigma, 0.1 / 2f64.sqrt())?;

    let mut cfg = ConstructConfig::new(h);
    cfg.window.half_width = 16.0;
    cfg.window.below = 8.0;
    cfg.window.above = 24.0;
    cfg.first_horizon = 160.0;
    cfg.max_doublings = 1;
    let t = Instant::now();
    let bundle = construct_front(&asm, &cfg)?;
    println!("front built in {:.1?}, last Cauchy difference {:.3e}", t.elapsed(), bundle.cauchy.last().map_or(f64::NAN, |c| c.1));

    let v0 = bundle.limit().clone();
    let bump = |p: &[f64], a: f64| a * (-(p[0] * p[0] + p[1] * p[1]) / 4.0).exp();
    let cases: Vec<(&str, Field)> = vec![
        ("ridge bump +0.2", map(&v0, |p, v| (v + bump(p, 0.2)).min(1.0))),
        ("ridge dent -0.2", map(&v0, |p, v| (v - bump(p, 0.2)).max(0.0))),
        ("planar mix", map(&v0, |p, _| asm.eval_planar_mix(0.0, p))),
        (
            "three bumps",
            map(&v0, |p, v| {
                let b = [(-3.0, 1.0, 0.08), (2.5, -2.0, -0.06), (0.5, 3.5, 0.05)];
                let s: f64 = b.iter().map(|(cx, cy, a)| a * (-((p[0] - cx).powi(2) + (p[1] - cy).powi(2)) / 4.0).exp()).sum();
                (v + s).clamp(0.0, 1.0)
            }),
        ),
    ];
    let scfg = StabilityConfig::new(60.0, 14.0);
    for (name, u0) in &cases {
        let t = Instant::now();
        let s = run_stability(&asm, &bundle, u0, &scfg)?;
        println!(
            "{name:16} s(0) {:.3e}  s(T) {:.3e}  late slope {:+.2e}  shift {:+.4}  passed {}  ({:.1?})",
            s.gaps[0],
            s.final_gap(),
            s.late_slope,
            s.shifts.last().unwrap(),
            s.passed,
            t.elapsed()
        );
        if std::env::var("SERIES").is_ok() {
            println!("{:?}", s.gaps.iter().step_by(5).map(|g| format!("{g:.3e}")).collect::<Vec<_>>());
        }
    }

    // squeeze rates of the planar-mix subsolution
    let lattice = ResidualLattice::new(h);
    let base = |t: f64, p: &[f64]| Ok(asm.eval_planar_mix(t, p));
    let k = measure_k(&lattice, asm.c_hat, medium.sigma, &base)?;
    let params = StabilityParams::new(&medium, k, 0.25 * medium.sigma, vec![1.0; 2])?;
    let sub = squeeze_evaluator(&base, params.clone(), -1.0);
    println!(
        "k = {k:.4e}, lambda = {:.4}, omega = {:.3}, squeezed-sub residual margin {:+.3e}",
        params.lambda,
        params.omega,
        sub.check(&medium, &lattice, asm.c_hat)?
    );
    Ok(())
}

fn map(f: &Field, g: impl Fn(&[f64], f64) -> f64) -> Field {
    let mut out = f.clone();
    for (i, v) in out.values.iter_mut().enumerate() {
        *v = g(&f.grid.physical(i), *v);
    }
    out
}
