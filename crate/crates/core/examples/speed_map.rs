//! Speed map of a medium, g(e) = c_e / (e . e0) and its gradient against the
//! homogeneous closed form, then the existence and uniqueness conditions for
//! the 45/135 degree pair, on measured speeds and on the reversed override.

use std::f64::consts::{PI, SQRT_2};

use rdfront::geometry::{build_polytope, planar_normal};
use rdfront::medium::{cubic_homogeneous, cubic_striped};
use rdfront::pulsating::FrontConfig;
use rdfront::speedmap::{build_speed_map, check_theorem_conditions, grad_g_default, reversed_override, SpeedMap, Variant};

fn main() -> rdfront::Result<()> {
    let e0 = [0.0, 1.0];
    let poly = build_polytope(&e0, &[planar_normal(PI / 4.0), planar_normal(3.0 * PI / 4.0)])?;
    let cf = 0.5 / SQRT_2;

    let homog = build_speed_map(&cubic_homogeneous(2, 0.25, 1.0)?, &e0, 16, &FrontConfig::new(0.25))?;
    println!("homogeneous: gradient of g against c_f (e (e.e0) - e0) / (e.e0)^2");
    for deg in [45.0, 60.0, 90.0, 120.0, 135.0_f64] {
        let e = planar_normal(deg.to_radians());
        let g = grad_g_default(&homog, &e)?;
        let d = e[1];
        let exact = [cf * (e[0] * d) / (d * d), cf * (e[1] * d - 1.0) / (d * d)];
        println!(
            "  {deg:5.1}  grad g = ({:+.6}, {:+.6})  closed form ({:+.6}, {:+.6})  grad g . e = {:+.1e}",
            g[0],
            g[1],
            exact[0],
            exact[1],
            g[0] * e[0] + g[1] * e[1]
        );
    }
    print!("{}", check_theorem_conditions(&homog, &poly, Variant::ExistenceV)?.text());

    let striped = build_speed_map(&cubic_striped(2, 0.25, 0.1, 1.0)?, &e0, 8, &FrontConfig::new(0.25))?;
    // 8 equiangular directions are all lattice directions
    println!("striped medium speeds:");
    for s in &striped.samples {
        println!("  e = ({:+.3}, {:+.3})  c = {:.5} +- {:.1e}  {}", s.direction[0], s.direction[1], s.speed, s.stderr, s.outcome);
    }

    let reversed = SpeedMap::from_override(&e0, reversed_override(0.5, 0.2, poly.normals[0][1]), 32)?;
    for v in [Variant::ExistenceV, Variant::UniqueW] {
        print!("{}", check_theorem_conditions(&reversed, &poly, v)?.text());
    }
    Ok(())
}
