//! Presets of the periodic medium and their structural checks: ellipticity,
//! periodicity, bistability with the fringe slope, and the cell integral of f.

use rdfront::medium::{checkerboard_diffusion, cubic_homogeneous, cubic_striped, validate_medium};

fn main() -> rdfront::Result<()> {
    let media = [
        cubic_homogeneous(2, 0.25, 1.0)?,
        cubic_striped(2, 0.25, 0.1, 1.0)?,
        checkerboard_diffusion(2, 0.25, 1.0, 0.3, 1.0)?,
    ];
    for m in &media {
        let rep = validate_medium(m, 16)?;
        println!(
            "{}: kappa {:.3}, sigma {:.4}, lambda in [{:.3}, {:.3}], cell integral of f {:+.4e}",
            m.name, m.kappa, m.sigma, m.lambda_bounds.0, m.lambda_bounds.1, rep.h1_integral
        );
        for c in &rep.checks {
            println!("  {:4} {:22} margin {:+.3e}  {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.margin, c.detail);
        }
    }
    // a threshold above 1/2 everywhere reverses the invasion direction
    let slow = cubic_striped(2, 0.6, 0.05, 1.0)?;
    println!("{}: cell integral of f {:+.4e}", slow.name, validate_medium(&slow, 16)?.h1_integral);
    Ok(())
}
