//! Pyramidal front of a homogeneous cubic medium: planar pieces at 45 and 135
//! degrees, calibration of (eps, alpha) on a fine family and construction of
//! the entire solution in a co-moving window on a coarser lattice.
//!
//! `cargo run --release --example curved_front [h_res] [h]`

use std::f64::consts::PI;
use std::time::Instant;

use rdfront::fronts::{
    calibrate_eps_alpha, compute_family, construct_front, decay_distance, far_field_gap, transition_metrics,
    ConstructConfig, FrontAssembly, ResidualLattice,
};
use rdfront::geometry::{build_polytope, planar_normal};
use rdfront::medium::cubic_homogeneous;
use rdfront::pulsating::FrontConfig;
use rdfront::speedmap::Variant;
use rdfront::tolerances::CFL_SAFETY;

fn family_at(medium: &rdfront::medium::PeriodicMedium, h: f64) -> rdfront::Result<rdfront::pulsating::FrontFamily> {
    let angles: Vec<f64> = [45.0, 67.5, 90.0, 112.5, 135.0]
        .iter()
        .map(|d: &f64| d.to_radians())
        .collect();
    compute_family(medium, &angles, h, CFL_SAFETY * h * h / 4.0, &FrontConfig::new(h))
}

fn main() -> rdfront::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<f64>().expect("numeric argument"));
    let h_res = args.next().unwrap_or(0.1);
    let h = args.next().unwrap_or(0.25);
    let medium = cubic_homogeneous(2, 0.25, 1.0)?;
    let poly = || build_polytope(&[0.0, 1.0], &[planar_normal(PI / 4.0), planar_normal(3.0 * PI / 4.0)]);
    let cfg = ConstructConfig::new(h);

    let t = Instant::now();
    let fine = family_at(&medium, h_res)?;
    println!("fine family (h = {h_res}) in {:.1?}", t.elapsed());
    let probe = FrontAssembly::unchecked(&medium, poly()?, fine, Variant::ExistenceV, 0.5 * medium.sigma, 0.1)?;
    let cal = calibrate_eps_alpha(&probe, &ResidualLattice::new(h_res), &cfg.window)?;
    println!("calibration, tol {:.3e}:", cal.tol);
    for r in &cal.rows {
        println!(
            "  eps {:.4} alpha {:.4}  min N[V_bar] {:+.3e}  max N[W_under] {:+.3e}  order {:+.3e}",
            r.eps, r.alpha, r.super_min, r.sub_max, r.order_min
        );
    }
    let Some((eps, alpha)) = cal.chosen else {
        println!("no admissible pair (best margin {:.3e})", cal.best_margin);
        return Ok(());
    };
    println!("chosen eps = {eps:.4}, alpha = {alpha:.4}");

    let t = Instant::now();
    let family = family_at(&medium, h)?;
    let asm = FrontAssembly::unchecked(&medium, poly()?, family, Variant::ExistenceV, eps, alpha)?;
    println!("lattice family (h = {h}) in {:.1?}, c_hat = {:.6}", t.elapsed(), asm.c_hat);
    let t = Instant::now();
    let bundle = construct_front(&asm, &cfg)?;
    println!("construction in {:.1?}, converged: {}", t.elapsed(), bundle.converged);
    for (tt, d) in &bundle.cauchy {
        println!("  T = {tt:5.0}  sup diff {d:.3e}");
    }
    let s = bundle.sandwich;
    println!(
        "sandwich lower {:.3e}, upper {:.3e}, monotone {:.3e}, checks {}",
        s.lower, s.upper, s.monotone, s.checks
    );
    let d = decay_distance(&asm, 0.2, 0.05, 200.0)?;
    println!(
        "D(h <= 0.2) = {d:.2}, far-field gap {:.3e} (2 eps = {:.3e})",
        far_field_gap(&asm, &bundle, d)?,
        2.0 * eps
    );
    let m = transition_metrics(&asm, &bundle, &[0.05, 0.5])?;
    println!(
        "drift {:.5} +- {:.1e} (c_hat {:.5}), inf-distance rate {:.5}, M = {:?}",
        m.drift_speed, m.drift_stderr, asm.c_hat, m.inf_distance_rate, m.widths
    );
    Ok(())
}
