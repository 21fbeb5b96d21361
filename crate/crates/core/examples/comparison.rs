//! The monotone scheme on its own: a radial bump invading the plane, written
//! as a snapshot and a heatmap, and the discrete comparison principle on
//! seeded random ordered pairs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rdfront::cli::{emit_heatmap, random_ordered_pair};
use rdfront::medium::cubic_striped;
use rdfront::solver::{check_comparison, solve_cauchy, Boundary, Field, Grid, SolverConfig};

fn main() -> rdfront::Result<()> {
    let medium = cubic_striped(2, 0.25, 0.1, 1.0)?;
    let grid = Grid::new(&[-15.0, -15.0], &[15.0, 15.0], &[0.25, 0.25], Boundary::ZeroFlux)?;
    let u0 = Field::from_fn(&grid, 0.0, |x| if x[0].hypot(x[1]) < 4.0 { 1.0 } else { 0.0 });
    let cfg = SolverConfig::explicit(&grid, &medium, 20.0, 5.0);
    let t = std::time::Instant::now();
    let traj = solve_cauchy(&medium, &u0, &cfg)?;
    println!("{} snapshots in {:.1?}", traj.snapshots.len(), t.elapsed());
    for s in &traj.snapshots {
        let invaded = s.values.iter().filter(|v| **v > 0.5).count() as f64 * 0.0625;
        println!("  t = {:5.1}  area(u > 1/2) = {invaded:8.2}  radius ~ {:.3}", s.time, (invaded / std::f64::consts::PI).sqrt());
    }
    let dir = std::env::temp_dir().join("rdfront-comparison");
    std::fs::create_dir_all(&dir).map_err(|e| rdfront::Error::io(&dir, e))?;
    let last = traj.snapshots.last().unwrap();
    last.write(&dir.join("final.bin"))?;
    emit_heatmap(last, &dir.join("final.ppm"))?;
    println!("final snapshot and heatmap in {}", dir.display());

    let small = Grid::new(&[-6.0, -6.0], &[6.0, 6.0], &[0.5, 0.5], Boundary::ZeroFlux)?;
    let cfg = SolverConfig::explicit(&small, &medium, 5.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst = f64::INFINITY;
    for _ in 0..20 {
        let (lo, hi) = random_ordered_pair(&small, &mut rng);
        worst = worst.min(check_comparison(&medium, &lo, &hi, &cfg)?.min_gap);
    }
    println!("20 ordered pairs: worst min(u_high - u_low) = {worst:+.3e}");
    Ok(())
}
