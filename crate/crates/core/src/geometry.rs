//! Polytopes `Q = {min_i X . e_i > 0}` and the mollified convex surface
//! `sum_i exp(-q_i(x, y)) = 1`, `q_i = x . nu_i cos(theta_i) + y sin(theta_i)`.

use crate::linalg::{dot, norm};
use crate::tolerances::SURFACE_RESIDUAL;
use crate::{Error, Result};

const MAX_NEWTON: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct PolytopeSpec {
    pub dim: usize,
    pub e0: Vec<f64>,
    /// Unit facet normals `e_i`.
    pub normals: Vec<Vec<f64>>,
    /// Horizontal parts `nu_i cos(theta_i)`.
    horizontal: Vec<Vec<f64>>,
    /// Vertical parts `sin(theta_i)`.
    vertical: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoordinateVariant {
    /// `xi_bar = (y - c t - phi(a x)/a) / sqrt(1 + |grad phi(a x)|^2)`
    Upper,
    /// `xi_under = (y - c t + phi(-a x)/a) / sqrt(1 + |grad phi(-a x)|^2)`
    Lower,
}

/// Validates condition (i) and builds the polytope. `e0` must be the last
/// coordinate axis.
pub fn build_polytope(e0: &[f64], normals: &[Vec<f64>]) -> Result<PolytopeSpec> {
    let dim = e0.len();
    if dim < 2 {
        return Err(Error::Geometry("polytopes need N >= 2".into()));
    }
    let axis_ok = e0[..dim - 1].iter().all(|v| *v == 0.0) && e0[dim - 1] == 1.0;
    if !axis_ok {
        return Err(Error::Geometry("e0 must be the last coordinate axis (0, ..., 0, 1)".into()));
    }
    if normals.is_empty() {
        return Err(Error::Geometry("at least one facet normal is required".into()));
    }
    let mut unit = Vec::with_capacity(normals.len());
    for (i, e) in normals.iter().enumerate() {
        if e.len() != dim {
            return Err(Error::Geometry(format!("e_{} has the wrong dimension", i + 1)));
        }
        let n = norm(e);
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::Geometry(format!("e_{} is not a unit vector (|e| = {n})", i + 1)));
        }
        let v: Vec<f64> = e.iter().map(|x| x / n).collect();
        if !(dot(&v, e0) > 0.0) {
            return Err(Error::Geometry(format!(
                "condition (i): e_{} . e0 = {} is not positive",
                i + 1,
                dot(&v, e0)
            )));
        }
        unit.push(v);
    }
    for i in 0..unit.len() {
        for j in 0..i {
            let d: f64 = unit[i].iter().zip(&unit[j]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if d < 1e-12 {
                return Err(Error::Geometry(format!(
                    "condition (i): e_{} and e_{} coincide",
                    j + 1,
                    i + 1
                )));
            }
        }
    }
    let horizontal = unit.iter().map(|e| e[..dim - 1].to_vec()).collect();
    let vertical = unit.iter().map(|e| e[dim - 1]).collect();
    Ok(PolytopeSpec {
        dim,
        e0: e0.to_vec(),
        normals: unit,
        horizontal,
        vertical,
    })
}

/// Planar facet normal at angle `beta` from the x-axis.
pub fn planar_normal(beta: f64) -> Vec<f64> {
    vec![beta.cos(), beta.sin()]
}

impl PolytopeSpec {
    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    pub fn min_sin(&self) -> f64 {
        self.vertical.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        self.normals.iter().all(|e| dot(point, e) > 0.0)
    }

    /// Boundary rays of a planar polytope as unit vectors (left, right).
    fn planar_rays(&self) -> (Vec<f64>, Vec<f64>) {
        // boundary y = max_i(-x p_i / s_i): slope m+ for x > 0, m- for x < 0
        let slopes: Vec<f64> = self
            .horizontal
            .iter()
            .zip(&self.vertical)
            .map(|(p, s)| -p[0] / s)
            .collect();
        let mp = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mm = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
        let r = vec![1.0 / (1.0 + mp * mp).sqrt(), mp / (1.0 + mp * mp).sqrt()];
        let l = vec![-1.0 / (1.0 + mm * mm).sqrt(), -mm / (1.0 + mm * mm).sqrt()];
        (l, r)
    }

    /// Distance to the ridge set `R`. For `N = 2` with `n >= 2` facets the
    /// ridge is the apex at the origin; with one facet it is empty.
    pub fn distance_to_ridge(&self, point: &[f64]) -> Result<f64> {
        if self.len() == 1 {
            return Ok(f64::INFINITY);
        }
        if self.dim != 2 {
            return Err(Error::Geometry("ridge distances are implemented for N = 2".into()));
        }
        Ok(norm(point))
    }

    /// Distance to `R + shift e0`.
    pub fn distance_to_translated_ridge(&self, point: &[f64], shift: f64) -> Result<f64> {
        let mut p = point.to_vec();
        p[self.dim - 1] -= shift;
        self.distance_to_ridge(&p)
    }

    /// Distance to the boundary of `Q` (both sides for `N = 2`, inside only otherwise).
    pub fn distance_to_boundary(&self, point: &[f64]) -> Result<f64> {
        if self.len() == 1 {
            return Ok(dot(point, &self.normals[0]).abs());
        }
        if self.contains(point) {
            return Ok(self
                .normals
                .iter()
                .map(|e| dot(point, e))
                .fold(f64::INFINITY, f64::min));
        }
        if self.dim != 2 {
            return Err(Error::Geometry("outside distances are implemented for N = 2".into()));
        }
        let (l, r) = self.planar_rays();
        let ray = |d: &[f64]| {
            let t = dot(point, d).max(0.0);
            ((point[0] - t * d[0]).powi(2) + (point[1] - t * d[1]).powi(2)).sqrt()
        };
        Ok(ray(&l).min(ray(&r)))
    }

    /// Signed distance to `partial Q`: positive inside `Q`.
    pub fn signed_distance(&self, point: &[f64]) -> Result<f64> {
        let d = self.distance_to_boundary(point)?;
        Ok(if self.contains(point) { d } else { -d })
    }

    /// Angular range of the cap `L(Q)` for `N = 2`: the normals span it.
    pub fn cap_angles(&self) -> Result<(f64, f64)> {
        if self.dim != 2 {
            return Err(Error::Geometry("cap sampling is implemented for N = 2".into()));
        }
        let angles: Vec<f64> = self.normals.iter().map(|e| e[1].atan2(e[0])).collect();
        let lo = angles.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = angles.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok((lo, hi))
    }
}

/// Surface quantities at a query point `x` for scale `alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceEval {
    pub x: Vec<f64>,
    pub alpha: f64,
    /// `phi(alpha x)`.
    pub phi: f64,
    /// `phi(alpha x) / alpha`.
    pub height: f64,
    /// `grad phi` at `alpha x`.
    pub grad: Vec<f64>,
    /// `grad^2 phi` at `alpha x`, row-major.
    pub hessian: Vec<f64>,
    /// `q_i(alpha x, phi(alpha x))`.
    pub q_hat: Vec<f64>,
    /// Interaction weight `h(alpha x)`.
    pub h: f64,
    /// Unit normal `e(x)`.
    pub normal: Vec<f64>,
    /// Non-negative weights with `e(x) = sum tau_i e_i`.
    pub tau: Vec<f64>,
}

impl SurfaceEval {
    pub fn slope_factor(&self) -> f64 {
        (1.0 + dot(&self.grad, &self.grad)).sqrt()
    }
}

/// Solves `sum_i exp(-(alpha x . p_i + Y s_i)) = 1` for `Y`.
pub fn surface_height(poly: &PolytopeSpec, x: &[f64], alpha: f64) -> Result<SurfaceEval> {
    if !(alpha > 0.0) {
        return Err(Error::Geometry(format!("alpha = {alpha} must be positive")));
    }
    let m = poly.dim - 1;
    if x.len() != m {
        return Err(Error::Geometry(format!("query point must have {m} components")));
    }
    let n = poly.len();
    let big_x: Vec<f64> = x.iter().map(|v| alpha * v).collect();
    let px: Vec<f64> = poly.horizontal.iter().map(|p| dot(&big_x, p)).collect();
    let s = &poly.vertical;
    let lo0 = (0..n).map(|i| -px[i] / s[i]).fold(f64::NEG_INFINITY, f64::max);
    let hi0 = lo0 + (n as f64).ln() / poly.min_sin();
    let eval = |y: f64| {
        let mut f = -1.0;
        let mut df = 0.0;
        for i in 0..n {
            let w = (-(px[i] + y * s[i])).exp();
            f += w;
            df -= s[i] * w;
        }
        (f, df)
    };
    let (mut lo, mut hi) = (lo0, hi0);
    let (f_lo, _) = eval(lo);
    let (f_hi, _) = eval(hi);
    // at lo one exponential is 1 up to rounding of px / s
    let slack = 1e-12 * n as f64;
    if f_lo < -slack || f_hi > slack {
        return Err(Error::Geometry(format!(
            "root not bracketed at x = {x:?}: F({lo}) = {f_lo}, F({hi}) = {f_hi}"
        )));
    }
    // Newton from the left end converges monotonically for the convex,
    // decreasing residual; bisection guards the rest.
    let mut y = lo;
    let mut converged = f_lo.abs() <= SURFACE_RESIDUAL;
    for _ in 0..MAX_NEWTON {
        if converged {
            break;
        }
        let (f, df) = eval(y);
        if f.abs() <= SURFACE_RESIDUAL {
            converged = true;
            break;
        }
        if f > 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let mut next = y - f / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == y {
            converged = f.abs() <= SURFACE_RESIDUAL;
            break;
        }
        y = next;
    }
    if !converged {
        let (f, _) = eval(y);
        if f.abs() > SURFACE_RESIDUAL {
            return Err(Error::Geometry(format!(
                "surface solve stalled at x = {x:?} with residual {f:.3e}"
            )));
        }
    }
    let q_hat: Vec<f64> = (0..n).map(|i| px[i] + y * s[i]).collect();
    let w: Vec<f64> = q_hat.iter().map(|q| (-q).exp()).collect();
    let ws: f64 = (0..n).map(|i| w[i] * s[i]).sum();
    let mut grad = vec![0.0; m];
    for i in 0..n {
        for k in 0..m {
            grad[k] -= w[i] * poly.horizontal[i][k] / ws;
        }
    }
    let mut hessian = vec![0.0; m * m];
    for i in 0..n {
        let d: Vec<f64> = (0..m).map(|k| poly.horizontal[i][k] + s[i] * grad[k]).collect();
        for k in 0..m {
            for l in 0..m {
                hessian[k * m + l] += w[i] * d[k] * d[l] / ws;
            }
        }
    }
    let mut h = 0.0;
    for j in 0..n {
        for k in j + 1..n {
            h += 2.0 * w[j] * w[k];
        }
    }
    let root = (1.0 + dot(&grad, &grad)).sqrt();
    let mut normal: Vec<f64> = grad.iter().map(|g| -g / root).collect();
    normal.push(1.0 / root);
    let tau = w.iter().map(|wi| wi / (root * ws)).collect();
    Ok(SurfaceEval {
        x: x.to_vec(),
        alpha,
        phi: y,
        height: y / alpha,
        grad,
        hessian,
        q_hat,
        h,
        normal,
        tau,
    })
}

/// `h(alpha x)`: ordered-pair sum over `j != k` of `exp(-(q_j + q_k))`.
pub fn interaction_h(poly: &PolytopeSpec, x: &[f64], alpha: f64) -> Result<f64> {
    Ok(surface_height(poly, x, alpha)?.h)
}

/// Unit normal `e(x)` and the weights `tau_i`.
pub fn normal_e(poly: &PolytopeSpec, x: &[f64], alpha: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = surface_height(poly, x, alpha)?;
    Ok((s.normal, s.tau))
}

pub fn moving_coordinate(
    poly: &PolytopeSpec,
    t: f64,
    x: &[f64],
    y: f64,
    c_bar: f64,
    alpha: f64,
    variant: CoordinateVariant,
) -> Result<f64> {
    Ok(match variant {
        CoordinateVariant::Upper => {
            let s = surface_height(poly, x, alpha)?;
            (y - c_bar * t - s.height) / s.slope_factor()
        }
        CoordinateVariant::Lower => {
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let s = surface_height(poly, &neg, alpha)?;
            (y - c_bar * t + s.height) / s.slope_factor()
        }
    })
}

/// Tilted direction set `e_ij = ((1 - l) e_i - l e_j) / |.|`, `e_ii = e_i`.
#[derive(Clone, Debug)]
pub struct ShiftedPolytope {
    pub facet: usize,
    pub lambda: f64,
    pub directions: Vec<Vec<f64>>,
    pub polytope: PolytopeSpec,
    /// `max_j |e_ij - e_i|`.
    pub spread: f64,
}

impl ShiftedPolytope {
    /// `h_hat(alpha x)` of the shifted surface.
    pub fn h_hat(&self, x: &[f64], alpha: f64) -> Result<f64> {
        interaction_h(&self.polytope, x, alpha)
    }
}

pub fn shifted_polytope(poly: &PolytopeSpec, i: usize, lambda: f64) -> Result<ShiftedPolytope> {
    if i >= poly.len() {
        return Err(Error::Geometry(format!("facet index {i} out of range")));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Geometry(format!("lambda = {lambda} must lie in (0, 1)")));
    }
    let ei = &poly.normals[i];
    let mut directions = Vec::with_capacity(poly.len());
    let mut spread = 0.0_f64;
    for (j, ej) in poly.normals.iter().enumerate() {
        if j == i {
            directions.push(ei.clone());
            continue;
        }
        let v: Vec<f64> = ei.iter().zip(ej).map(|(a, b)| (1.0 - lambda) * a - lambda * b).collect();
        let n = norm(&v);
        let v: Vec<f64> = v.iter().map(|x| x / n).collect();
        let tilt = dot(&v, &poly.e0);
        if !(tilt > 1e-12) {
            return Err(Error::Geometry(format!(
                "lambda = {lambda} too large: e_{}{} . e0 = {tilt:.3e} (blocked by j = {})",
                i + 1,
                j + 1,
                j + 1
            )));
        }
        let d = v.iter().zip(ei).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        spread = spread.max(d);
        directions.push(v);
    }
    let polytope = build_polytope(&poly.e0, &directions)?;
    Ok(ShiftedPolytope {
        facet: i,
        lambda,
        directions,
        polytope,
        spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, LN_2, SQRT_2};

    fn pair() -> PolytopeSpec {
        build_polytope(&[0.0, 1.0], &[planar_normal(FRAC_PI_4), planar_normal(3.0 * FRAC_PI_4)]).unwrap()
    }

    #[test]
    fn symmetric_pair_vertex() {
        let p = pair();
        let s = surface_height(&p, &[0.0], 1.0).unwrap();
        assert!((s.phi - SQRT_2 * LN_2).abs() < 1e-12);
        assert!((s.h - 0.5).abs() < 1e-12);
        assert!(s.normal[0].abs() < 1e-15 && (s.normal[1] - 1.0).abs() < 1e-15);
        assert_eq!(p.distance_to_ridge(&[0.0, 10.0]).unwrap(), 10.0);
    }

    #[test]
    fn single_facet_is_a_plane() {
        let e = planar_normal(1.0);
        let p = build_polytope(&[0.0, 1.0], &[e.clone()]).unwrap();
        let s = surface_height(&p, &[2.5], 0.7).unwrap();
        assert!((s.height + 2.5 * e[0] / e[1]).abs() < 1e-12);
        assert_eq!(s.h, 0.0);
        assert!(p.distance_to_ridge(&[1.0, 1.0]).unwrap().is_infinite());
    }

    #[test]
    fn shifted_pair_direction() {
        let s = shifted_polytope(&pair(), 0, 0.1).unwrap();
        assert!((s.directions[1][0] - 0.78087).abs() < 1e-5);
        assert!((s.directions[1][1] - 0.62470).abs() < 1e-5);
        assert!(shifted_polytope(&pair(), 0, 0.5).is_err());
    }

    #[test]
    fn rejects_condition_i() {
        let e = planar_normal(FRAC_PI_4);
        assert!(build_polytope(&[0.0, 1.0], &[e.clone(), e]).is_err());
        assert!(build_polytope(&[0.0, 1.0], &[planar_normal(-0.3)]).is_err());
    }
}
