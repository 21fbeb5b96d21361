//! The mollified surface sum exp(-q_i) = 1 of a polytope: closed form for the
//! symmetric pair, interaction weight h, and a skewed three-facet example.

use std::f64::consts::{PI, SQRT_2};

use rdfront::geometry::{build_polytope, planar_normal, surface_height};

fn main() -> rdfront::Result<()> {
    let sym = build_polytope(&[0.0, 1.0], &[planar_normal(PI / 4.0), planar_normal(3.0 * PI / 4.0)])?;
    let mut worst = 0.0_f64;
    for k in -400..=400 {
        let x = k as f64 * 0.05;
        let s = surface_height(&sym, &[x], 1.0)?;
        worst = worst.max((s.phi - SQRT_2 * (2.0 * (x / SQRT_2).cosh()).ln()).abs());
    }
    println!("symmetric pair: max |phi - sqrt2 ln(2 cosh(x/sqrt2))| on [-20, 20] = {worst:.2e}");
    for x in [0.0, 1.0, 2.0, 5.0, 10.0] {
        let s = surface_height(&sym, &[x], 1.0)?;
        println!(
            "  x = {x:4.1}  phi {:.6}  h {:.3e}  normal ({:+.4}, {:+.4})  ridge distance {:.3}",
            s.phi,
            s.h,
            s.normal[0],
            s.normal[1],
            sym.distance_to_ridge(&[x, s.phi])?
        );
    }

    let skew = build_polytope(
        &[0.0, 1.0],
        &[planar_normal(40f64.to_radians()), planar_normal(100f64.to_radians()), planar_normal(150f64.to_radians())],
    )?;
    println!("three facets at 40/100/150 degrees, min sin = {:.4}", skew.min_sin());
    for alpha in [1.0, 0.25, 0.0625] {
        let s = surface_height(&skew, &[0.0], alpha)?;
        println!("  alpha {alpha:6.4}: height at x = 0 {:.4}, h {:.3e}", s.height, s.h);
    }
    Ok(())
}
