//! Spatially periodic bistable media: a diffusion matrix field `A(x)` and a
//! reaction `f(x, u)` with stable states 0 and 1.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::linalg::sym_eig_range;
use crate::tolerances::{PERIODICITY, THETA_BISECTION};
use crate::{Error, Result};

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Symmetric `N x N` matrix field, row-major.
pub type MatrixField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type ReactionFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Lattice points per axis used when a medium is built.
const CONSTRUCTION_SAMPLES: usize = 16;
/// Fringe slopes are searched up to this fraction of the distance to the
/// first zero of `f_u`.
const FRINGE_FRACTION: f64 = 0.5;
/// Profile cell lattice resolution along axes on which the medium varies.
pub const DEFAULT_CELL_RESOLUTION: usize = 8;

#[derive(Clone)]
pub enum Reaction {
    /// `f = u(1-u)(u-theta(x))` on `[0,1]`, extended linearly outside.
    Cubic { theta: ScalarField },
    General { f: ReactionFn, du: ReactionFn },
}

#[derive(Clone)]
pub struct PeriodicMedium {
    pub dim: usize,
    pub periods: Vec<f64>,
    pub kappa: f64,
    pub sigma: f64,
    pub lambda_bounds: (f64, f64),
    /// Coefficients do not depend on x.
    pub homogeneous: bool,
    /// Off-diagonal diffusion entries vanish identically.
    pub diagonal: bool,
    /// Cell lattice used for profile tables, per axis.
    pub cell_resolution: Vec<usize>,
    pub name: String,
    diffusion: MatrixField,
    reaction: Reaction,
}

impl std::fmt::Debug for PeriodicMedium {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PeriodicMedium")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("periods", &self.periods)
            .field("kappa", &self.kappa)
            .field("sigma", &self.sigma)
            .field("lambda_bounds", &self.lambda_bounds)
            .finish()
    }
}

/// Cubic derivative on `[0,1]`.
fn cubic_du(theta: f64, u: f64) -> f64 {
    -3.0 * u * u + 2.0 * (1.0 + theta) * u - theta
}

#[inline]
pub fn cubic_reaction(theta: f64, u: f64) -> f64 {
    if u < 0.0 {
        -theta * u
    } else if u > 1.0 {
        -(1.0 - theta) * (u - 1.0)
    } else {
        u * (1.0 - u) * (u - theta)
    }
}

#[inline]
pub fn cubic_reaction_du(theta: f64, u: f64) -> f64 {
    if u < 0.0 {
        -theta
    } else if u > 1.0 {
        -(1.0 - theta)
    } else {
        cubic_du(theta, u)
    }
}

/// Fringe width and slope bound of the cubic at a single `theta`.
fn cubic_fringe(theta: f64) -> (f64, f64) {
    let disc = ((1.0 + theta).powi(2) - 3.0 * theta).sqrt();
    let lo = ((1.0 + theta) - disc) / 3.0;
    let hi = ((1.0 + theta) + disc) / 3.0;
    let sigma = (FRINGE_FRACTION * lo.min(1.0 - hi)).min(0.49);
    let kappa = cubic_du(theta, sigma)
        .abs()
        .min(cubic_du(theta, 1.0 - sigma).abs());
    (sigma, kappa)
}

/// Points of the uniform lattice with `density` points per axis over one cell.
pub fn cell_lattice(periods: &[f64], density: usize) -> Vec<Vec<f64>> {
    let dim = periods.len();
    let total = density.pow(dim as u32);
    (0..total)
        .map(|mut k| {
            let mut x = vec![0.0; dim];
            for (a, xa) in x.iter_mut().enumerate() {
                let j = k % density;
                k /= density;
                *xa = (j as f64 + 0.5) / density as f64 * periods[a];
            }
            x
        })
        .collect()
}

fn location(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.6}")).collect();
    format!("({})", parts.join(", "))
}

/// Derives the ellipticity bounds from samples, rejecting non-SPD points.
fn sample_diffusion(
    dim: usize,
    periods: &[f64],
    diffusion: &MatrixField,
) -> Result<((f64, f64), bool)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut diagonal = true;
    for x in cell_lattice(periods, CONSTRUCTION_SAMPLES) {
        let a = diffusion(&x);
        if a.len() != dim * dim {
            return Err(Error::Medium(format!(
                "diffusion at {} has {} entries, expected {}",
                location(&x),
                a.len(),
                dim * dim
            )));
        }
        for i in 0..dim {
            for j in 0..dim {
                if (a[i * dim + j] - a[j * dim + i]).abs() > 1e-14 {
                    return Err(Error::Medium(format!(
                        "diffusion is not symmetric at cell point {}",
                        location(&x)
                    )));
                }
                if i != j && a[i * dim + j] != 0.0 {
                    diagonal = false;
                }
            }
        }
        let (l, h) = sym_eig_range(&a, dim);
        if !(l > 0.0) {
            return Err(Error::Medium(format!(
                "diffusion is not positive definite at cell point {} (eigenvalue {l:.3e})",
                location(&x)
            )));
        }
        lo = lo.min(l);
        hi = hi.max(h);
    }
    Ok(((lo, hi), diagonal))
}

/// Cubic bistable medium `f = u(1-u)(u - theta(x))`.
pub fn make_cubic_medium(
    theta_field: ScalarField,
    diffusion_field: MatrixField,
    periods: &[f64],
) -> Result<PeriodicMedium> {
    let dim = periods.len();
    if dim == 0 || periods.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::Medium("periods must be positive".into()));
    }
    let mut sigma = 0.49_f64;
    let mut kappa = f64::INFINITY;
    let lattice = cell_lattice(periods, CONSTRUCTION_SAMPLES);
    let first = theta_field(&lattice[0]);
    let mut constant_theta = true;
    for x in &lattice {
        let th = theta_field(x);
        if !(th > 0.0 && th < 1.0) {
            return Err(Error::Medium(format!(
                "theta = {th} outside (0,1) at cell point {}",
                location(x)
            )));
        }
        if th != first {
            constant_theta = false;
        }
        let (s, k) = cubic_fringe(th);
        sigma = sigma.min(s);
        kappa = kappa.min(k);
    }
    // recompute kappa at the common sigma
    for x in &lattice {
        let th = theta_field(x);
        kappa = kappa
            .min(cubic_du(th, sigma).abs())
            .min(cubic_du(th, 1.0 - sigma).abs());
    }
    let (lambda_bounds, diagonal) = sample_diffusion(dim, periods, &diffusion_field)?;
    let a0 = diffusion_field(&lattice[0]);
    let constant_a = lattice.iter().all(|x| diffusion_field(x) == a0);
    let homogeneous = constant_theta && constant_a;
    Ok(PeriodicMedium {
        dim,
        periods: periods.to_vec(),
        kappa,
        sigma,
        lambda_bounds,
        homogeneous,
        diagonal,
        cell_resolution: vec![if homogeneous { 1 } else { DEFAULT_CELL_RESOLUTION }; dim],
        name: "cubic".into(),
        diffusion: diffusion_field,
        reaction: Reaction::Cubic { theta: theta_field },
    })
}

/// Medium with a user-supplied reaction. `kappa` and `sigma` are taken as given
/// and checked by [`validate_medium`].
pub fn make_general_medium(
    f: ReactionFn,
    du: ReactionFn,
    diffusion_field: MatrixField,
    periods: &[f64],
    kappa: f64,
    sigma: f64,
) -> Result<PeriodicMedium> {
    let dim = periods.len();
    if !(kappa > 0.0) || !(sigma > 0.0 && sigma < 0.5) {
        return Err(Error::Medium(format!(
            "need kappa > 0 and sigma in (0, 1/2), got {kappa}, {sigma}"
        )));
    }
    let (lambda_bounds, diagonal) = sample_diffusion(dim, periods, &diffusion_field)?;
    Ok(PeriodicMedium {
        dim,
        periods: periods.to_vec(),
        kappa,
        sigma,
        lambda_bounds,
        homogeneous: false,
        diagonal,
        cell_resolution: vec![DEFAULT_CELL_RESOLUTION; dim],
        name: "general".into(),
        diffusion: diffusion_field,
        reaction: Reaction::General { f, du },
    })
}

fn scaled_identity(dim: usize, a: f64) -> Vec<f64> {
    let mut m = vec![0.0; dim * dim];
    for i in 0..dim {
        m[i * dim + i] = a;
    }
    m
}

/// Reduces `x` into `[0, L)` so presets are periodic bit-for-bit.
fn wrap(x: f64, period: f64) -> f64 {
    x.rem_euclid(period)
}

/// Homogeneous cubic medium with `A = I`.
pub fn cubic_homogeneous(dim: usize, theta: f64, period: f64) -> Result<PeriodicMedium> {
    let mut m = make_cubic_medium(
        Arc::new(move |_| theta),
        Arc::new(move |_| scaled_identity(dim, 1.0)),
        &vec![period; dim],
    )?;
    m.name = "cubic-homogeneous".into();
    Ok(m)
}

/// Cubic medium with `theta = theta0 + amplitude sin(2 pi x_1 / L)`, `A = I`.
pub fn cubic_striped(dim: usize, theta0: f64, amplitude: f64, period: f64) -> Result<PeriodicMedium> {
    let mut m = make_cubic_medium(
        Arc::new(move |x: &[f64]| theta0 + amplitude * (2.0 * PI * wrap(x[0], period) / period).sin()),
        Arc::new(move |_| scaled_identity(dim, 1.0)),
        &vec![period; dim],
    )?;
    m.name = "cubic-striped".into();
    if !m.homogeneous {
        m.cell_resolution = vec![1; dim];
        m.cell_resolution[0] = DEFAULT_CELL_RESOLUTION;
    }
    Ok(m)
}

/// Cubic medium with constant `theta` and `A = a(x) I`,
/// `a = a0 + amplitude prod_k sin(2 pi x_k / L)`.
pub fn checkerboard_diffusion(
    dim: usize,
    theta: f64,
    a0: f64,
    amplitude: f64,
    period: f64,
) -> Result<PeriodicMedium> {
    let mut m = make_cubic_medium(
        Arc::new(move |_| theta),
        Arc::new(move |x: &[f64]| {
            let s: f64 = x
                .iter()
                .map(|&xk| (2.0 * PI * wrap(xk, period) / period).sin())
                .product();
            scaled_identity(dim, a0 + amplitude * s)
        }),
        &vec![period; dim],
    )?;
    m.name = "checkerboard-diffusion".into();
    Ok(m)
}

impl PeriodicMedium {
    pub fn diffusion(&self, x: &[f64]) -> Vec<f64> {
        (self.diffusion)(x)
    }

    pub fn reaction(&self, x: &[f64], u: f64) -> f64 {
        match &self.reaction {
            Reaction::Cubic { theta } => cubic_reaction(theta(x), u),
            Reaction::General { f, .. } => f(x, u),
        }
    }

    pub fn reaction_du(&self, x: &[f64], u: f64) -> f64 {
        match &self.reaction {
            Reaction::Cubic { theta } => cubic_reaction_du(theta(x), u),
            Reaction::General { du, .. } => du(x, u),
        }
    }

    pub fn reaction_model(&self) -> &Reaction {
        &self.reaction
    }

    /// Replaces the diffusion field without re-validation, so that
    /// [`validate_medium`] can be exercised on deliberately broken media.
    pub fn with_diffusion_unchecked(mut self, diffusion: MatrixField) -> Self {
        self.diffusion = diffusion;
        self
    }

    pub fn cell_measure(&self) -> f64 {
        self.periods.iter().product()
    }

    /// Unstable zero of `f(x, .)` by bisection.
    pub fn theta_at(&self, x: &[f64]) -> f64 {
        if let Reaction::Cubic { theta } = &self.reaction {
            return theta(x);
        }
        let (mut lo, mut hi) = (self.sigma, 1.0 - self.sigma);
        let flo = self.reaction(x, lo);
        while hi - lo > THETA_BISECTION {
            let mid = 0.5 * (lo + hi);
            if (self.reaction(x, mid) < 0.0) == (flo < 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Sampled `max |f|` over the cell and `u in [0, 1]`.
    pub fn max_abs_reaction(&self) -> f64 {
        let mut best = 0.0_f64;
        for x in cell_lattice(&self.periods, 8) {
            for j in 0..=200 {
                best = best.max(self.reaction(&x, j as f64 / 200.0).abs());
            }
        }
        best
    }

    /// Sampled `max |f_u|` over the cell and `u in [-0.1, 1.1]`.
    pub fn max_abs_reaction_du(&self) -> f64 {
        let mut best = 0.0_f64;
        for x in cell_lattice(&self.periods, 8) {
            for j in 0..=240 {
                let u = -0.1 + 1.2 * j as f64 / 240.0;
                best = best.max(self.reaction_du(&x, u).abs());
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
pub struct CheckEntry {
    pub name: String,
    pub passed: bool,
    /// Worst-case margin; negative when the check fails.
    pub margin: f64,
    pub witness: Option<Vec<f64>>,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<CheckEntry>,
    /// `(cell point, theta_x)` for every sample.
    pub theta_samples: Vec<(Vec<f64>, f64)>,
    /// Integral of `f` over the cell times `[0, 1]`.
    pub h1_integral: f64,
    /// The integral vanishes within rounding (balanced medium).
    pub h1_boundary: bool,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckEntry> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Samples the medium hypotheses on a lattice with `sampling_density`
/// points per period per axis.
pub fn validate_medium(medium: &PeriodicMedium, sampling_density: usize) -> Result<ValidationReport> {
    if sampling_density < 8 {
        return Err(Error::Precondition(format!(
            "sampling density {sampling_density} < 8 points per period"
        )));
    }
    let dim = medium.dim;
    let lattice = cell_lattice(&medium.periods, sampling_density);
    let mut checks = Vec::new();

    // ellipticity
    let (l1, l2) = medium.lambda_bounds;
    let mut margin = f64::INFINITY;
    let mut witness = None;
    for x in &lattice {
        let (lo, hi) = sym_eig_range(&medium.diffusion(x), dim);
        let m = (lo - l1).min(l2 - hi).min(lo);
        if m < margin {
            margin = m;
            witness = Some(x.clone());
        }
    }
    let tol = 1e-12 * l2.max(1.0);
    checks.push(CheckEntry {
        name: "A4-ellipticity".into(),
        passed: margin >= -tol,
        margin,
        witness: if margin >= -tol { None } else { witness },
        detail: format!("eigenvalues within [{l1:.6}, {l2:.6}]"),
    });

    // periodicity
    let mut worst = 0.0_f64;
    let mut witness = None;
    let us = [-0.3, 0.0, 0.2, 0.5, 0.8, 1.0, 1.3];
    for (n, x) in lattice.iter().enumerate() {
        let mut shifted = x.clone();
        for (a, s) in shifted.iter_mut().enumerate() {
            let k = ((n + 3 * a) % 5) as f64 - 2.0;
            *s += k * medium.periods[a];
        }
        let ax = medium.diffusion(x);
        let asx = medium.diffusion(&shifted);
        let mut d = ax
            .iter()
            .zip(&asx)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        for &u in &us {
            d = d.max((medium.reaction(x, u) - medium.reaction(&shifted, u)).abs());
        }
        if d > worst {
            worst = d;
            witness = Some(x.clone());
        }
    }
    checks.push(CheckEntry {
        name: "A2-periodicity".into(),
        passed: worst <= PERIODICITY,
        margin: PERIODICITY - worst,
        witness: if worst <= PERIODICITY { None } else { witness },
        detail: format!("max deviation under lattice shifts {worst:.3e}"),
    });

    // bistable sign pattern
    let mut theta_samples = Vec::with_capacity(lattice.len());
    let mut ok = true;
    let mut margin = f64::INFINITY;
    let mut witness = None;
    for x in &lattice {
        let f0 = medium.reaction(x, 0.0);
        let f1 = medium.reaction(x, 1.0);
        let th = medium.theta_at(x);
        theta_samples.push((x.clone(), th));
        let mut good = f0 == 0.0 && f1 == 0.0 && th > 0.0 && th < 1.0;
        for j in 1..256 {
            let u = j as f64 / 256.0;
            let v = medium.reaction(x, u);
            if (u < th - 1e-9 && v >= 0.0) || (u > th + 1e-9 && v <= 0.0) {
                good = false;
            }
        }
        let m = th.min(1.0 - th);
        if !good {
            ok = false;
            witness.get_or_insert_with(|| x.clone());
        }
        margin = margin.min(if good { m } else { -m.abs() });
    }
    checks.push(CheckEntry {
        name: "A3-bistable".into(),
        passed: ok,
        margin,
        witness,
        detail: "f(x,0) = f(x,1) = 0, single sign change at theta_x".into(),
    });

    // fringe slope
    let mut margin = f64::INFINITY;
    let mut witness = None;
    let sigma = medium.sigma;
    for x in &lattice {
        for j in 0..=64 {
            let s = j as f64 / 64.0;
            for u in [-0.5 + s * (sigma + 0.5), 1.0 - sigma + s * (sigma + 0.5)] {
                let m = -medium.reaction_du(x, u) - medium.kappa;
                if m < margin {
                    margin = m;
                    witness = Some(x.clone());
                }
            }
        }
    }
    let fringe_ok = margin >= -1e-12;
    checks.push(CheckEntry {
        name: "fringe-slope".into(),
        passed: fringe_ok,
        margin,
        witness: if fringe_ok { None } else { witness },
        detail: format!("f_u <= -kappa = {:.6} for u in [-0.5, {sigma:.6}] and [{:.6}, 1.5]", -medium.kappa, 1.0 - sigma),
    });

    // H1 integral: midpoint in x, Simpson in u
    let nu = 1024;
    let mut integral = 0.0;
    for x in &lattice {
        let mut s = medium.reaction(x, 0.0) + medium.reaction(x, 1.0);
        for j in 1..nu {
            let w = if j % 2 == 1 { 4.0 } else { 2.0 };
            s += w * medium.reaction(x, j as f64 / nu as f64);
        }
        integral += s / (3.0 * nu as f64);
    }
    integral *= medium.cell_measure() / lattice.len() as f64;
    let h1_boundary = integral.abs() <= 1e-12;
    checks.push(CheckEntry {
        name: "H1-integral".into(),
        passed: integral > 1e-12,
        margin: integral,
        witness: None,
        detail: if h1_boundary {
            "integral vanishes: balanced boundary case".into()
        } else {
            format!("integral of f over cell x [0,1] = {integral:.6e}")
        },
    });

    Ok(ValidationReport {
        checks,
        theta_samples,
        h1_integral: integral,
        h1_boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_values() {
        let m = cubic_homogeneous(2, 0.25, 1.0).unwrap();
        assert_eq!(m.reaction(&[0.3, 0.1], 0.0), 0.0);
        assert_eq!(m.reaction(&[0.3, 0.1], 1.0), 0.0);
        assert!(m.homogeneous && m.diagonal);
    }

    #[test]
    fn striped_hand_value() {
        let m = cubic_striped(1, 0.3, 0.1, 2.0).unwrap();
        assert!((m.reaction(&[0.0], 0.5) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn extension_keeps_fringe_slope() {
        let m = cubic_homogeneous(1, 0.25, 1.0).unwrap();
        assert!(m.reaction_du(&[0.0], -0.4) <= -m.kappa);
        assert!(m.reaction_du(&[0.0], 1.4) <= -m.kappa);
        assert!(m.sigma > 0.0 && m.sigma < 0.5);
    }

    #[test]
    fn rejects_bad_theta_and_indefinite_a() {
        let bad = make_cubic_medium(Arc::new(|_| 1.2), Arc::new(|_| vec![1.0]), &[1.0]);
        assert!(matches!(bad, Err(Error::Medium(_))));
        let bad = make_cubic_medium(
            Arc::new(|_| 0.3),
            Arc::new(|x: &[f64]| if x[0] < 0.1 { vec![-1.0] } else { vec![1.0] }),
            &[1.0],
        );
        match bad {
            Err(Error::Medium(msg)) => assert!(msg.contains("cell point")),
            other => panic!("expected rejection, got {other:?}"),
        }
    }
}
