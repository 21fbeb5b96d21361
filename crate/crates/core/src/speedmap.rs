//! Direction-dependent speeds `c_e`, the normalized map
//! `g(x) = c_{x/|x|} / ((x/|x|) . e0)` and the gluing conditions (i)-(iv).

use std::sync::Arc;

use rayon::prelude::*;

use crate::geometry::PolytopeSpec;
use crate::linalg::{angle, dot, norm, unit_at};
use crate::medium::PeriodicMedium;
use crate::pulsating::{compute_front, is_commensurate, FrontConfig, FrontOutcome};
use crate::tolerances::{CAP_GUARD, CAP_REFINEMENT, GRAD_STEP};
use crate::{Error, Result};

pub type SpeedFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionSample {
    pub direction: Vec<f64>,
    pub speed: f64,
    pub stderr: f64,
    /// Outcome label of the front run (`converged`, `near-stationary`, ...).
    pub outcome: String,
}

#[derive(Clone)]
pub struct SpeedMap {
    pub e0: Vec<f64>,
    /// Samples sorted by angle.
    pub samples: Vec<DirectionSample>,
    /// Directions whose runs failed to show a front.
    pub failed: Vec<Vec<f64>>,
    /// Widest angular gap between samples with a measured speed.
    pub spacing: f64,
    analytic: Option<SpeedFn>,
}

impl std::fmt::Debug for SpeedMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpeedMap")
            .field("e0", &self.e0)
            .field("samples", &self.samples.len())
            .field("failed", &self.failed)
            .field("spacing", &self.spacing)
            .field("analytic", &self.analytic.is_some())
            .finish()
    }
}

fn equiangular(count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| unit_at(2.0 * std::f64::consts::PI * k as f64 / count as f64))
        .collect()
}

/// Measures `c_e` for `count` equi-angular planar directions in parallel.
pub fn build_speed_map(
    medium: &PeriodicMedium,
    e0: &[f64],
    count: usize,
    config: &FrontConfig,
) -> Result<SpeedMap> {
    if medium.dim != 2 {
        return Err(Error::SpeedMap("sampled speed maps are planar (N = 2)".into()));
    }
    if count < 8 {
        return Err(Error::SpeedMap(format!("direction_count = {count} must be at least 8")));
    }
    let dirs = equiangular(count);
    let cfg = config.clone().speed_only();
    // None: no lattice period along e, which a heterogeneous strip needs
    let outcomes: Vec<Option<Result<FrontOutcome>>> = dirs
        .par_iter()
        .map(|e| is_commensurate(medium, e).then(|| compute_front(medium, e, &cfg)))
        .collect();
    let mut samples = Vec::with_capacity(count);
    let mut failed = Vec::new();
    for (e, outcome) in dirs.into_iter().zip(outcomes) {
        let Some(outcome) = outcome else {
            failed.push(e.clone());
            samples.push(DirectionSample {
                direction: e,
                speed: f64::NAN,
                stderr: f64::NAN,
                outcome: "incommensurate".into(),
            });
            continue;
        };
        let outcome = outcome?;
        match outcome.speed() {
            Some((speed, stderr)) => {
                if matches!(outcome, FrontOutcome::NearStationary { .. }) {
                    failed.push(e.clone());
                }
                samples.push(DirectionSample {
                    direction: e,
                    speed,
                    stderr,
                    outcome: outcome.label().to_string(),
                });
            }
            None => {
                failed.push(e.clone());
                samples.push(DirectionSample {
                    direction: e,
                    speed: f64::NAN,
                    stderr: f64::NAN,
                    outcome: outcome.label().to_string(),
                });
            }
        }
    }
    SpeedMap::from_samples(e0, samples, failed)
}

impl SpeedMap {
    /// A map built from measured samples covering the full circle.
    pub fn from_samples(e0: &[f64], mut samples: Vec<DirectionSample>, failed: Vec<Vec<f64>>) -> Result<Self> {
        if e0.len() != 2 || (norm(e0) - 1.0).abs() > 1e-12 {
            return Err(Error::SpeedMap("e0 must be a planar unit vector".into()));
        }
        if samples.len() < 3 {
            return Err(Error::SpeedMap("a map needs at least three samples".into()));
        }
        for s in &samples {
            if (norm(&s.direction) - 1.0).abs() > 1e-9 {
                return Err(Error::SpeedMap(format!("sample direction {:?} is not a unit vector", s.direction)));
            }
        }
        samples.sort_by(|a, b| angle(&a.direction).total_cmp(&angle(&b.direction)));
        let usable: Vec<f64> = samples.iter().filter(|s| s.speed.is_finite()).map(|s| angle(&s.direction)).collect();
        if usable.len() < 3 {
            return Err(Error::SpeedMap(format!("only {} directions have a measured speed", usable.len())));
        }
        // widest gap between usable samples
        let spacing = usable
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(usable[0] + 2.0 * std::f64::consts::PI - usable[usable.len() - 1], f64::max);
        Ok(SpeedMap {
            e0: e0.to_vec(),
            samples,
            failed,
            spacing,
            analytic: None,
        })
    }

    /// Analytic `e -> c_e`, tabulated at `count` directions for reporting.
    pub fn from_override(e0: &[f64], speed: SpeedFn, count: usize) -> Result<Self> {
        let samples = equiangular(count)
            .into_iter()
            .map(|e| DirectionSample {
                speed: speed(&e),
                direction: e,
                stderr: 0.0,
                outcome: "analytic".to_string(),
            })
            .collect();
        let mut map = SpeedMap::from_samples(e0, samples, Vec::new())?;
        map.analytic = Some(speed);
        Ok(map)
    }

    pub fn is_partial(&self) -> bool {
        !self.failed.is_empty()
    }

    pub fn is_analytic(&self) -> bool {
        self.analytic.is_some()
    }

    pub fn max_stderr(&self) -> f64 {
        self.samples.iter().map(|s| s.stderr).fold(0.0, f64::max)
    }

    /// `c_e` by linear interpolation in angle (periodic).
    pub fn speed(&self, e: &[f64]) -> Result<f64> {
        if let Some(f) = &self.analytic {
            return Ok(f(e));
        }
        let a = angle(e);
        // failed samples are skipped
        let (angles, speeds): (Vec<f64>, Vec<f64>) = self
            .samples
            .iter()
            .filter(|s| s.speed.is_finite())
            .map(|s| (angle(&s.direction), s.speed))
            .unzip();
        let n = angles.len();
        let k = angles.partition_point(|&b| b <= a);
        let (i, j, lo, hi) = if k == 0 || k == n {
            // wrap between the last and the first sample
            let lo = angles[n - 1];
            let hi = angles[0] + 2.0 * std::f64::consts::PI;
            (n - 1, 0, lo, hi)
        } else {
            (k - 1, k, angles[k - 1], angles[k])
        };
        let a = if a < lo { a + 2.0 * std::f64::consts::PI } else { a };
        let w = (a - lo) / (hi - lo);
        let (ci, cj) = (speeds[i], speeds[j]);
        Ok((1.0 - w) * ci + w * cj)
    }

    /// Interpolated stderr at `e` (zero for analytic maps).
    pub fn stderr(&self, e: &[f64]) -> f64 {
        if self.analytic.is_some() {
            return 0.0;
        }
        let a = angle(e);
        self.samples
            .iter()
            .min_by(|p, q| {
                let dp = (angle(&p.direction) - a).abs();
                let dq = (angle(&q.direction) - a).abs();
                dp.total_cmp(&dq)
            })
            .map(|s| s.stderr)
            .unwrap_or(0.0)
    }
}

/// `g(x) = c_{x/|x|} / ((x/|x|) . e0)`.
pub fn eval_g(map: &SpeedMap, x: &[f64]) -> Result<f64> {
    let n = norm(x);
    if !(n > 0.0) {
        return Err(Error::SpeedMap("g is undefined at x = 0".into()));
    }
    let e: Vec<f64> = x.iter().map(|v| v / n).collect();
    let tilt = dot(&e, &map.e0);
    if !(tilt > CAP_GUARD) {
        return Err(Error::SpeedMap(format!(
            "(x/|x|) . e0 = {tilt:.4} is not above the cap guard {CAP_GUARD}"
        )));
    }
    Ok(map.speed(&e)? / tilt)
}

/// Central differences of `g` in ambient coordinates.
pub fn grad_g(map: &SpeedMap, e: &[f64], delta: f64) -> Result<Vec<f64>> {
    if !map.is_analytic() && delta >= 2.0 * map.spacing {
        return Err(Error::SpeedMap(format!(
            "finite-difference step {delta} is not below twice the angular sample spacing {}",
            map.spacing
        )));
    }
    let mut out = vec![0.0; e.len()];
    for k in 0..e.len() {
        let mut p = e.to_vec();
        let mut m = e.to_vec();
        p[k] += delta;
        m[k] -= delta;
        out[k] = (eval_g(map, &p)? - eval_g(map, &m)?) / (2.0 * delta);
    }
    Ok(out)
}

pub fn grad_g_default(map: &SpeedMap, e: &[f64]) -> Result<Vec<f64>> {
    grad_g(map, e, GRAD_STEP)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Existence conditions with `c_hat > g` on the cap and `grad g(e_i) . e_j < 0`.
    ExistenceV,
    /// Reversed conditions with `c_hat < g` and `grad g(e_i) . e_j > 0`.
    UniqueW,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::ExistenceV => "V (c_hat > g, grad g(e_i).e_j < 0)",
            Variant::UniqueW => "W (c_hat < g, grad g(e_i).e_j > 0)",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionVerdict {
    pub name: &'static str,
    pub verdict: Verdict,
    pub margin: f64,
    /// Measurement error the margin is compared against.
    pub error: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub variant: Variant,
    pub conditions: Vec<ConditionVerdict>,
    pub c_hat: f64,
    /// Angular step used for the cap sampling in (iii).
    pub cap_resolution: f64,
    pub interpolation_limited: bool,
    /// `(i, j, grad g(e_i) . e_j)` for `i != j`.
    pub sign_table: Vec<(usize, usize, f64)>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.verdict == Verdict::Pass)
    }

    pub fn verdict(&self, name: &str) -> Option<Verdict> {
        self.conditions.iter().find(|c| c.name == name).map(|c| c.verdict)
    }

    pub fn text(&self) -> String {
        let mut s = format!(
            "variant {}\nc_hat = {:.10}\ncap resolution = {:.6} rad{}\n",
            self.variant.label(),
            self.c_hat,
            self.cap_resolution,
            if self.interpolation_limited { " (interpolation-limited)" } else { "" }
        );
        for c in &self.conditions {
            s.push_str(&format!(
                "  ({}) {:?}: margin {:.6e}, error {:.3e}; {}\n",
                c.name, c.verdict, c.margin, c.error, c.detail
            ));
        }
        for (i, j, v) in &self.sign_table {
            s.push_str(&format!("  grad g(e_{}) . e_{} = {:.6e}\n", i + 1, j + 1, v));
        }
        s
    }
}

fn classify(margin: f64, error: f64) -> Verdict {
    if margin > error {
        Verdict::Pass
    } else if margin < -error {
        Verdict::Fail
    } else {
        Verdict::Indeterminate
    }
}

pub fn check_theorem_conditions(map: &SpeedMap, poly: &PolytopeSpec, variant: Variant) -> Result<ConditionReport> {
    if map.is_partial() {
        return Err(Error::SpeedMap(format!(
            "speed map is partial; failing directions: {:?}",
            map.failed
        )));
    }
    if poly.dim != 2 {
        return Err(Error::SpeedMap("condition checks are planar".into()));
    }
    let normals = &poly.normals;
    let n = normals.len();
    let min_tilt = normals.iter().map(|e| dot(e, &map.e0)).fold(f64::INFINITY, f64::min);
    let mut conditions = Vec::new();

    // (i)
    let mut sep = f64::INFINITY;
    for i in 0..n {
        for j in 0..i {
            sep = sep.min(norm(&[normals[i][0] - normals[j][0], normals[i][1] - normals[j][1]]));
        }
    }
    let m_i = min_tilt.min(sep);
    conditions.push(ConditionVerdict {
        name: "i",
        verdict: if m_i > 0.0 { Verdict::Pass } else { Verdict::Fail },
        margin: m_i,
        error: 0.0,
        detail: format!("min e_i . e0 = {min_tilt:.6}, min |e_i - e_j| = {sep:.6}"),
    });

    // (ii)
    let g: Vec<f64> = normals.iter().map(|e| eval_g(map, e)).collect::<Result<_>>()?;
    let se: Vec<f64> = normals.iter().map(|e| map.stderr(e)).collect();
    let c_hat = if se.iter().all(|s| *s > 0.0) {
        let w: Vec<f64> = se.iter().map(|s| 1.0 / (s * s)).collect();
        g.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>()
    } else {
        g.iter().sum::<f64>() / n as f64
    };
    let deviation = g.iter().map(|v| (v - c_hat).abs()).fold(0.0, f64::max);
    let tol_ii = 3.0 * se.iter().cloned().fold(0.0, f64::max) / min_tilt;
    let exact = deviation <= 1e-12 * c_hat.abs().max(1.0);
    conditions.push(ConditionVerdict {
        name: "ii",
        verdict: if exact {
            Verdict::Pass
        } else if deviation <= tol_ii {
            Verdict::Indeterminate
        } else {
            Verdict::Fail
        },
        margin: tol_ii - deviation,
        error: tol_ii,
        detail: format!("max |g(e_i) - c_hat| = {deviation:.3e}"),
    });

    // (iii) over the cap at 10x resolution minus neighbourhoods of the e_i
    let (lo, hi) = poly.cap_angles()?;
    let step = map.spacing / CAP_REFINEMENT as f64;
    let normal_angles: Vec<f64> = normals.iter().map(|e| angle(e)).collect();
    let mut m_iii = f64::INFINITY;
    let mut witness = None;
    let mut samples = 0;
    let count = ((hi - lo) / step).ceil() as usize;
    for k in 0..=count {
        let b = (lo + k as f64 * step).min(hi);
        if normal_angles.iter().any(|a| (b - a).abs() < map.spacing - 1e-12) {
            continue;
        }
        let val = eval_g(map, &unit_at(b))?;
        let m = match variant {
            Variant::ExistenceV => c_hat - val,
            Variant::UniqueW => val - c_hat,
        };
        samples += 1;
        if m < m_iii {
            m_iii = m;
            witness = Some(b);
        }
    }
    let err_iii = 3.0 * map.max_stderr() / min_tilt;
    conditions.push(if samples == 0 {
        ConditionVerdict {
            name: "iii",
            verdict: Verdict::Indeterminate,
            margin: f64::NAN,
            error: err_iii,
            detail: "no cap samples outside the excluded neighbourhoods".into(),
        }
    } else {
        ConditionVerdict {
            name: "iii",
            verdict: classify(m_iii, err_iii),
            margin: m_iii,
            error: err_iii,
            detail: format!(
                "{samples} cap samples, worst at angle {:.6}",
                witness.unwrap_or(f64::NAN)
            ),
        }
    });

    // (iv)
    let mut sign_table = Vec::new();
    let mut m_iv = f64::INFINITY;
    let mut grad_scale = 0.0_f64;
    for i in 0..n {
        let gi = grad_g(map, &normals[i], GRAD_STEP)?;
        grad_scale = grad_scale.max(norm(&gi));
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = dot(&gi, &normals[j]);
            sign_table.push((i, j, v));
            let m = match variant {
                Variant::ExistenceV => -v,
                Variant::UniqueW => v,
            };
            m_iv = m_iv.min(m);
        }
    }
    let err_iv = if map.is_analytic() {
        1e-6 * (1.0 + grad_scale)
    } else {
        (3.0 * map.max_stderr() / (map.spacing * min_tilt)).max(1e-6 * (1.0 + grad_scale))
    };
    conditions.push(if sign_table.is_empty() {
        ConditionVerdict {
            name: "iv",
            verdict: Verdict::Pass,
            margin: f64::INFINITY,
            error: err_iv,
            detail: "single facet: no pairs".into(),
        }
    } else {
        ConditionVerdict {
            name: "iv",
            verdict: classify(m_iv, err_iv),
            margin: m_iv,
            error: err_iv,
            detail: format!("{} ordered pairs", sign_table.len()),
        }
    });

    Ok(ConditionReport {
        variant,
        conditions,
        c_hat,
        cap_resolution: step,
        interpolation_limited: !map.is_analytic(),
        sign_table,
    })
}

/// Override with a strict interior maximum of `g` at `e0` on the symmetric
/// planar cap, `c_e = (c_hat + k)(e . e0) - k s` with `s = e_i . e0`.
pub fn reversed_override(c_hat: f64, k: f64, s: f64) -> SpeedFn {
    Arc::new(move |e: &[f64]| (c_hat + k) * e[1] - k * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_is_reproduced() {
        let f: SpeedFn = Arc::new(|e: &[f64]| 0.3 + 0.05 * e[1] * e[1]);
        let map = SpeedMap::from_override(&[0.0, 1.0], f, 16).unwrap();
        let e = unit_at(1.1);
        assert_eq!(map.speed(&e).unwrap(), 0.3 + 0.05 * e[1] * e[1]);
        let x = [0.3, 0.9];
        let g1 = eval_g(&map, &x).unwrap();
        let g2 = eval_g(&map, &[0.6, 1.8]).unwrap();
        assert!((g1 - g2).abs() < 1e-14);
    }

    #[test]
    fn cap_guard() {
        let f: SpeedFn = Arc::new(|_: &[f64]| 0.3);
        let map = SpeedMap::from_override(&[0.0, 1.0], f, 16).unwrap();
        assert!(eval_g(&map, &[1.0, 0.01]).is_err());
    }
}
