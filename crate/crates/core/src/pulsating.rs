//! Pulsating fronts `U_e(x . e - c_e t, x)` computed on co-moving strips.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::isotonic::project_nonincreasing;
use crate::linalg::{angle, dot, norm};
use crate::medium::PeriodicMedium;
use crate::solver::{explicit_dt_bound, Boundary, Field, Frame, Grid, SolverConfig, Stepper, Trajectory};
use crate::tolerances::{ISOTONIC_THRESHOLD, NEAR_STATIONARY, NORMALIZATION, SPEED_WINDOW, STATIONARY_RELATIVE};
use crate::{Error, Result};

const PROFILE_MAGIC: &[u8; 8] = b"RDFPROF1";

/// Numerical setup of a front run along one direction.
#[derive(Clone, Debug, PartialEq)]
pub struct FrontConfig {
    /// Spacing along the strip axis.
    pub h: f64,
    /// Time step; `None` uses the explicit bound of the strip.
    pub dt: Option<f64>,
    /// Half-width `Xi` of the extracted profile table.
    pub profile_half_width: f64,
    /// Extra strip length beyond `2 Xi`.
    pub padding: f64,
    /// Transverse extent; `0` gives a single line of nodes.
    pub transverse_width: f64,
    pub transverse_offset: f64,
    pub t_max: f64,
    pub snapshot_every: f64,
    /// Snapshots before this time are not used for the speed.
    pub transient: f64,
    /// Bins per strip spacing (bin width `h / bins_per_h`).
    pub bins_per_h: usize,
    /// Duration of the per-step sampling that feeds the profile bins.
    pub profile_time: Option<f64>,
    /// Extract the profile; when false only the speed is measured.
    pub profile: bool,
}

impl FrontConfig {
    pub fn new(h: f64) -> Self {
        FrontConfig {
            h,
            dt: None,
            profile_half_width: 25.0,
            padding: 20.0,
            transverse_width: 0.0,
            transverse_offset: 0.0,
            t_max: 400.0,
            snapshot_every: 1.0,
            transient: 10.0,
            bins_per_h: 4,
            profile_time: None,
            profile: true,
        }
    }

    pub fn speed_only(mut self) -> Self {
        self.profile = false;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }
}

/// `1 / (1 + exp(s / sqrt 2))`.
pub fn smoothed_step(s: f64) -> f64 {
    1.0 / (1.0 + (s / std::f64::consts::SQRT_2).exp())
}

/// Profile values on a `xi`-grid for each point of the cell lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileTable {
    pub xi0: f64,
    pub dxi: f64,
    /// Cell lattice resolution per axis.
    pub cells: Vec<usize>,
    pub periods: Vec<f64>,
    pub cell_measure: f64,
    /// `values[cell][j]` at `xi0 + j dxi`.
    pub values: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
}

impl ProfileTable {
    pub fn new(
        xi0: f64,
        dxi: f64,
        cells: Vec<usize>,
        periods: Vec<f64>,
        cell_measure: f64,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n_cells: usize = cells.iter().product();
        if values.len() != n_cells || values.is_empty() {
            return Err(Error::Profile(format!(
                "table has {} cells, lattice needs {n_cells}",
                values.len()
            )));
        }
        let n = values[0].len();
        if n < 4 || values.iter().any(|v| v.len() != n) {
            return Err(Error::Profile("profile rows must share a length of at least 4".into()));
        }
        if !(dxi > 0.0) {
            return Err(Error::Profile(format!("dxi = {dxi} must be positive")));
        }
        let slopes = values.iter().map(|v| monotone_slopes(v, dxi)).collect();
        Ok(ProfileTable {
            xi0,
            dxi,
            cells,
            periods,
            cell_measure,
            values,
            slopes,
        })
    }

    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn xi_max(&self) -> f64 {
        self.xi0 + (self.len() - 1) as f64 * self.dxi
    }

    pub fn xi(&self, j: usize) -> f64 {
        self.xi0 + j as f64 * self.dxi
    }

    /// Nearest cell lattice point of `x` (taken modulo the periods).
    pub fn cell_index(&self, x: &[f64]) -> usize {
        if self.values.len() == 1 {
            return 0;
        }
        let mut idx = 0;
        for (k, &n) in self.cells.iter().enumerate() {
            let frac = (x[k] / self.periods[k]).rem_euclid(1.0);
            let m = ((frac * n as f64).round() as usize) % n;
            idx = idx * n + m;
        }
        idx
    }

    /// `(value, derivative)` of the cubic interpolant inside the table.
    fn hermite(&self, cell: usize, xi: f64) -> (f64, f64) {
        let v = &self.values[cell];
        let m = &self.slopes[cell];
        let r = (xi - self.xi0) / self.dxi;
        let j = (r.floor() as usize).min(self.len() - 2);
        let t = r - j as f64;
        let h = self.dxi;
        let (t2, t3) = (t * t, t * t * t);
        let val = (2.0 * t3 - 3.0 * t2 + 1.0) * v[j]
            + (t3 - 2.0 * t2 + t) * h * m[j]
            + (-2.0 * t3 + 3.0 * t2) * v[j + 1]
            + (t3 - t2) * h * m[j + 1];
        let der = (6.0 * t2 - 6.0 * t) * (v[j] - v[j + 1]) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * m[j]
            + (3.0 * t2 - 2.0 * t) * m[j + 1];
        (val, der)
    }
}

/// Fritsch-Carlson slopes; the interpolant preserves monotone data.
fn monotone_slopes(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let d: Vec<f64> = (0..n - 1).map(|j| (v[j + 1] - v[j]) / h).collect();
    let mut m = vec![0.0; n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for j in 1..n - 1 {
        m[j] = if d[j - 1] * d[j] <= 0.0 {
            0.0
        } else if j >= 2 && j + 2 < n {
            // fourth-order slope; the limiter below keeps monotonicity
            let f = (v[j - 2] - 8.0 * v[j - 1] + 8.0 * v[j + 1] - v[j + 2]) / (12.0 * h);
            if f * d[j] > 0.0 { f } else { 0.5 * (d[j - 1] + d[j]) }
        } else {
            0.5 * (d[j - 1] + d[j])
        };
    }
    for j in 0..n - 1 {
        if d[j] == 0.0 {
            m[j] = 0.0;
            m[j + 1] = 0.0;
            continue;
        }
        let a = m[j] / d[j];
        let b = m[j + 1] / d[j];
        let s = a * a + b * b;
        if s > 9.0 {
            let tau = 3.0 / s.sqrt();
            m[j] = tau * a * d[j];
            m[j + 1] = tau * b * d[j];
        }
    }
    m
}

/// Log-linear tail fits of `|dU/dxi|`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub mu: f64,
    pub c: f64,
    pub mu_left: f64,
    pub mu_right: f64,
    pub r2_left: f64,
    pub r2_right: f64,
    /// Raised when a tail is not resolved or not exponential.
    pub flagged: bool,
}

#[derive(Clone, Debug)]
pub struct PulsatingFront {
    pub direction: Vec<f64>,
    pub speed: f64,
    pub stderr: f64,
    pub profile: ProfileTable,
    /// Accumulated normalization shift.
    pub shift: f64,
    pub decay: Option<DecayFit>,
    /// `(delta, r)` over `|xi| <= 2`.
    pub interior: Option<(f64, f64)>,
    /// Largest raw increase along `xi` before projection.
    pub max_violation: f64,
    /// Set when the raw bins violated monotonicity beyond the noise threshold.
    pub monotonized: bool,
    tail_hits: Arc<AtomicU64>,
}

impl PulsatingFront {
    pub fn from_table(direction: Vec<f64>, speed: f64, stderr: f64, profile: ProfileTable) -> Self {
        PulsatingFront {
            direction,
            speed,
            stderr,
            profile,
            shift: 0.0,
            decay: None,
            interior: None,
            max_violation: 0.0,
            monotonized: false,
            tail_hits: Arc::new(AtomicU64::new(0)),
        }
    }

    /// Closed-form homogeneous cubic front `1 / (1 + exp(xi / sqrt 2))` tabulated.
    pub fn closed_form_cubic(dim: usize, direction: Vec<f64>, theta: f64, half_width: f64, dxi: f64) -> Result<Self> {
        let n = (2.0 * half_width / dxi).round() as usize + 1;
        let xi0 = -half_width;
        let row = (0..n).map(|j| smoothed_step(xi0 + j as f64 * dxi)).collect();
        let table = ProfileTable::new(xi0, dxi, vec![1; dim], vec![1.0; dim], 1.0, vec![row])?;
        let c = (1.0 - 2.0 * theta) / std::f64::consts::SQRT_2;
        Ok(PulsatingFront::from_table(direction, c, 0.0, table))
    }

    /// Times the evaluator left the table and used the exponential tails.
    pub fn tail_extensions(&self) -> u64 {
        self.tail_hits.load(Ordering::Relaxed)
    }

    fn tail_rates(&self) -> (f64, f64) {
        match &self.decay {
            Some(d) if d.mu_left > 0.0 && d.mu_right > 0.0 => (d.mu_left, d.mu_right),
            _ => (1.0, 1.0),
        }
    }

    /// `U_e(xi, x)`.
    pub fn value(&self, xi: f64, x: &[f64]) -> f64 {
        self.eval(xi, x).0
    }

    /// `dU_e/dxi (xi, x)`.
    pub fn derivative(&self, xi: f64, x: &[f64]) -> f64 {
        self.eval(xi, x).1
    }

    pub fn eval(&self, xi: f64, x: &[f64]) -> (f64, f64) {
        let t = &self.profile;
        let cell = t.cell_index(x);
        let (mu_l, mu_r) = self.tail_rates();
        if xi < t.xi0 {
            self.tail_hits.fetch_add(1, Ordering::Relaxed);
            let gap = 1.0 - t.values[cell][0];
            let e = (mu_l * (xi - t.xi0)).exp();
            return (1.0 - gap * e, -gap * mu_l * e);
        }
        if xi > t.xi_max() {
            self.tail_hits.fetch_add(1, Ordering::Relaxed);
            let end = t.values[cell][t.len() - 1];
            let e = (-mu_r * (xi - t.xi_max())).exp();
            return (end * e, -end * mu_r * e);
        }
        t.hermite(cell, xi)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let t = &self.profile;
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(PROFILE_MAGIC);
        buf.extend_from_slice(&(self.direction.len() as u64).to_le_bytes());
        for v in &self.direction {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in [self.speed, self.stderr, self.shift, t.xi0, t.dxi] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for (&n, &p) in t.cells.iter().zip(&t.periods) {
            buf.extend_from_slice(&(n as u64).to_le_bytes());
            buf.extend_from_slice(&p.to_le_bytes());
        }
        buf.extend_from_slice(&t.cell_measure.to_le_bytes());
        for row in &t.values {
            for v in row {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&buf).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<PulsatingFront> {
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let bad = |reason: &str| Error::Format {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        if bytes.len() < 16 || &bytes[..8] != PROFILE_MAGIC {
            return Err(bad("missing profile magic"));
        }
        let mut pos = 8;
        let mut word = || -> Result<[u8; 8]> {
            let w: [u8; 8] = bytes
                .get(pos..pos + 8)
                .and_then(|s| s.try_into().ok())
                .ok_or_else(|| bad("truncated profile"))?;
            pos += 8;
            Ok(w)
        };
        let dim = u64::from_le_bytes(word()?) as usize;
        if dim == 0 || dim > 8 {
            return Err(bad("implausible dimension"));
        }
        let mut direction = Vec::with_capacity(dim);
        for _ in 0..dim {
            direction.push(f64::from_le_bytes(word()?));
        }
        let speed = f64::from_le_bytes(word()?);
        let stderr = f64::from_le_bytes(word()?);
        let shift = f64::from_le_bytes(word()?);
        let xi0 = f64::from_le_bytes(word()?);
        let dxi = f64::from_le_bytes(word()?);
        let n = u64::from_le_bytes(word()?) as usize;
        let mut cells = Vec::new();
        let mut periods = Vec::new();
        for _ in 0..dim {
            cells.push(u64::from_le_bytes(word()?) as usize);
            periods.push(f64::from_le_bytes(word()?));
        }
        let cell_measure = f64::from_le_bytes(word()?);
        let n_cells: usize = cells.iter().product();
        let mut values = Vec::with_capacity(n_cells);
        for _ in 0..n_cells {
            let mut row = Vec::with_capacity(n);
            for _ in 0..n {
                row.push(f64::from_le_bytes(word()?));
            }
            values.push(row);
        }
        let table = ProfileTable::new(xi0, dxi, cells, periods, cell_measure, values)?;
        let mut front = PulsatingFront::from_table(direction, speed, stderr, table);
        front.shift = shift;
        front.decay = estimate_decay(&front).ok();
        Ok(front)
    }
}

#[derive(Clone, Debug)]
pub enum FrontOutcome {
    Converged(Box<PulsatingFront>),
    /// Speed measured, profile not extracted (non-commensurate direction or
    /// profile disabled).
    SpeedOnly { speed: f64, stderr: f64 },
    NearStationary { speed: f64, stderr: f64 },
    NoFrontDetected { elapsed: f64, last_slopes: Vec<f64> },
}

impl FrontOutcome {
    pub fn speed(&self) -> Option<(f64, f64)> {
        match self {
            FrontOutcome::Converged(f) => Some((f.speed, f.stderr)),
            FrontOutcome::SpeedOnly { speed, stderr } | FrontOutcome::NearStationary { speed, stderr } => {
                Some((*speed, *stderr))
            }
            FrontOutcome::NoFrontDetected { .. } => None,
        }
    }

    pub fn front(&self) -> Option<&PulsatingFront> {
        match self {
            FrontOutcome::Converged(f) => Some(f),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            FrontOutcome::Converged(_) => "converged",
            FrontOutcome::SpeedOnly { .. } => "speed-only",
            FrontOutcome::NearStationary { .. } => "near-stationary",
            FrontOutcome::NoFrontDetected { .. } => "no-front-detected",
        }
    }
}

/// Whether some small integer combination of the periods is parallel to `e`.
pub fn is_commensurate(medium: &PeriodicMedium, e: &[f64]) -> bool {
    if medium.homogeneous || medium.dim == 1 {
        return true;
    }
    if medium.dim != 2 {
        return e.iter().filter(|v| v.abs() > 1e-12).count() == 1;
    }
    period_along(medium, e).is_some()
}

/// Length of the shortest lattice vector parallel to `e` (planar media).
fn period_along(medium: &PeriodicMedium, e: &[f64]) -> Option<f64> {
    let (l1, l2) = (medium.periods[0], medium.periods[1]);
    let mut best: Option<f64> = None;
    for k1 in -8i32..=8 {
        for k2 in -8i32..=8 {
            if k1 == 0 && k2 == 0 {
                continue;
            }
            let v = [k1 as f64 * l1, k2 as f64 * l2];
            let n = norm(&v);
            let cross = (v[0] * e[1] - v[1] * e[0]) / n;
            if cross.abs() < 1e-9 && dot(&v, e) > 0.0 {
                best = Some(best.map_or(n, |b: f64| b.min(n)));
            }
        }
    }
    best
}

fn strip_frame(e: &[f64]) -> Frame {
    match e.len() {
        1 => Frame { axes: vec![vec![e[0]]] },
        2 => Frame {
            axes: vec![e.to_vec(), vec![-e[1], e[0]]],
        },
        _ => {
            // complete e to an orthonormal basis by Gram-Schmidt
            let dim = e.len();
            let mut axes = vec![e.to_vec()];
            for k in 0..dim {
                if axes.len() == dim {
                    break;
                }
                let mut v: Vec<f64> = (0..dim).map(|j| if j == k { 1.0 } else { 0.0 }).collect();
                for a in &axes {
                    let p = dot(&v, a);
                    for j in 0..dim {
                        v[j] -= p * a[j];
                    }
                }
                let n = norm(&v);
                if n > 1e-6 {
                    axes.push(v.iter().map(|x| x / n).collect());
                }
            }
            Frame { axes }
        }
    }
}

fn strip_grid(medium: &PeriodicMedium, e: &[f64], cfg: &FrontConfig) -> Result<Grid> {
    let dim = medium.dim;
    let h = cfg.h;
    let n = ((2.0 * cfg.profile_half_width + cfg.padding) / h).ceil();
    let mut lower = vec![0.0; dim];
    let mut upper = vec![0.0; dim];
    let mut spacing = vec![h; dim];
    upper[0] = n * h;
    // a heterogeneous plane needs the front across a whole transverse period
    let wrap = if dim == 2 && !medium.homogeneous && cfg.transverse_width == 0.0 {
        period_along(medium, &[-e[1], e[0]])
    } else {
        None
    };
    for k in 1..dim {
        lower[k] = cfg.transverse_offset;
        match wrap {
            Some(l) => {
                let m = (l / h).ceil().max(3.0);
                spacing[k] = l / m;
                upper[k] = cfg.transverse_offset + (m - 1.0) * spacing[k];
            }
            None => {
                let m = (cfg.transverse_width / h).round();
                upper[k] = cfg.transverse_offset + m * h;
            }
        }
    }
    let grid = Grid::new(&lower, &upper, &spacing, Boundary::ZeroFlux)?.with_frame(strip_frame(e));
    match wrap {
        Some(_) => grid.with_periodic_axis(1),
        None => Ok(grid),
    }
}

/// Mean position along `e` of the `u = 1/2` level set.
pub fn level_set_position(field: &Field, e: &[f64]) -> Result<f64> {
    let grid = &field.grid;
    let dim = grid.dim();
    let (axis, align) = (0..dim)
        .map(|k| (k, dot(&grid.frame.axes[k], e)))
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .expect("non-empty grid");
    if align.abs() < 1e-9 {
        return Err(Error::Config("direction is orthogonal to every grid axis".into()));
    }
    let strides = grid.strides();
    let na = grid.counts[axis];
    let st = strides[axis];
    let forward = align > 0.0;
    let mut sum = 0.0;
    let mut lines = 0usize;
    let mut missing = 0usize;
    for start in 0..grid.len() {
        if (start / st) % na != 0 {
            continue;
        }
        let at = |j: usize| if forward { start + j * st } else { start + (na - 1 - j) * st };
        let mut found = None;
        for j in 0..na - 1 {
            let (a, b) = (field.values[at(j)], field.values[at(j + 1)]);
            if a >= 0.5 && b < 0.5 {
                found = Some((j, (a - 0.5) / (a - b)));
                break;
            }
        }
        match found {
            Some((j, w)) => {
                let xa = grid.physical(at(j));
                let xb = grid.physical(at(j + 1));
                sum += dot(&xa, e) * (1.0 - w) + dot(&xb, e) * w;
                lines += 1;
            }
            None => missing += 1,
        }
    }
    if lines == 0 || missing > 0 {
        return Err(Error::Truncation(format!(
            "the u = 1/2 level set left the box at t = {} ({missing} lines without a crossing); enlarge the domain",
            field.time
        )));
    }
    Ok(sum / lines as f64)
}

/// Least-squares slope and its standard error.
pub(crate) fn fit_line(ts: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = ts.len() as f64;
    let mt = ts.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let stt: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    let sty: f64 = ts.iter().zip(ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let sse: f64 = ts.iter().zip(ys).map(|(t, y)| (y - intercept - slope * t).powi(2)).sum();
    let stderr = if ts.len() > 2 {
        (sse / (n - 2.0) / stt).sqrt()
    } else {
        0.0
    };
    (slope, stderr, intercept)
}

/// Speed from the level-set positions of all snapshots.
pub fn measure_speed(trajectory: &Trajectory, e: &[f64]) -> Result<(f64, f64)> {
    if trajectory.snapshots.len() < SPEED_WINDOW {
        return Err(Error::Precondition(format!(
            "speed needs at least {SPEED_WINDOW} snapshots, got {}",
            trajectory.snapshots.len()
        )));
    }
    let mut ts = Vec::new();
    let mut ps = Vec::new();
    for s in &trajectory.snapshots {
        ts.push(s.time);
        ps.push(level_set_position(s, e)?);
    }
    let (c, se, _) = fit_line(&ts, &ps);
    Ok((c, se))
}

/// Slopes of the last `count` disjoint windows of `SPEED_WINDOW` points.
fn window_slopes(ts: &[f64], ps: &[f64], count: usize) -> Option<Vec<f64>> {
    let w = SPEED_WINDOW;
    if ts.len() < w * count {
        return None;
    }
    let n = ts.len();
    Some(
        (0..count)
            .rev()
            .map(|k| {
                let hi = n - k * w;
                fit_line(&ts[hi - w..hi], &ps[hi - w..hi]).0
            })
            .collect(),
    )
}

fn slopes_agree(s: &[f64]) -> bool {
    let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = s.iter().map(|v| v.abs()).fold(NEAR_STATIONARY, f64::max);
    hi - lo <= STATIONARY_RELATIVE * scale
}

/// Grid of `xi` bins and accumulated sums per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileSpec {
    pub xi0: f64,
    pub dxi: f64,
    pub n_xi: usize,
}

struct ProfileBins {
    spec: ProfileSpec,
    cells: Vec<usize>,
    periods: Vec<f64>,
    sum: Vec<Vec<f64>>,
    count: Vec<Vec<f64>>,
}

impl ProfileBins {
    fn new(spec: ProfileSpec, medium: &PeriodicMedium) -> Self {
        let cells = if medium.homogeneous {
            vec![1; medium.dim]
        } else {
            medium.cell_resolution.clone()
        };
        let n_cells: usize = cells.iter().product();
        ProfileBins {
            sum: vec![vec![0.0; spec.n_xi]; n_cells],
            count: vec![vec![0.0; spec.n_xi]; n_cells],
            spec,
            cells,
            periods: medium.periods.clone(),
        }
    }

    fn cell_of(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        for (k, &n) in self.cells.iter().enumerate() {
            let frac = (x[k] / self.periods[k]).rem_euclid(1.0);
            idx = idx * n + ((frac * n as f64).round() as usize) % n;
        }
        idx
    }

    fn add(&mut self, field: &Field, e: &[f64], c: f64) {
        let grid = &field.grid;
        for i in 0..grid.len() {
            let x = grid.physical(i);
            let xi = dot(&x, e) - c * field.time;
            let r = ((xi - self.spec.xi0) / self.spec.dxi).round();
            if r < 0.0 || r >= self.spec.n_xi as f64 {
                continue;
            }
            let cell = self.cell_of(&x);
            self.sum[cell][r as usize] += field.values[i];
            self.count[cell][r as usize] += 1.0;
        }
    }

    /// Bin averages with the box-smoothing bias removed, projected onto
    /// non-increasing rows.
    fn finish(self, cell_measure: f64) -> Result<(ProfileTable, f64, bool)> {
        let mut empty = Vec::new();
        for (cell, row) in self.count.iter().enumerate() {
            let mut j = 0;
            while j < row.len() {
                if row[j] == 0.0 {
                    let start = j;
                    while j < row.len() && row[j] == 0.0 {
                        j += 1;
                    }
                    empty.push(format!(
                        "cell {cell}: xi in [{:.4}, {:.4}]",
                        self.spec.xi0 + start as f64 * self.spec.dxi,
                        self.spec.xi0 + (j - 1) as f64 * self.spec.dxi
                    ));
                } else {
                    j += 1;
                }
            }
        }
        if !empty.is_empty() {
            return Err(Error::Profile(format!("empty profile bins: {}", empty.join("; "))));
        }
        let mut max_violation = 0.0_f64;
        let mut values = Vec::with_capacity(self.sum.len());
        for (s, w) in self.sum.iter().zip(&self.count) {
            let avg: Vec<f64> = s.iter().zip(w).map(|(a, b)| a / b).collect();
            let n = avg.len();
            let mut row = avg.clone();
            for j in 1..n - 1 {
                row[j] -= (avg[j + 1] - 2.0 * avg[j] + avg[j - 1]) / 24.0;
            }
            for j in 0..n - 1 {
                max_violation = max_violation.max(row[j + 1] - row[j]);
            }
            let mut row = if row.windows(2).any(|p| p[1] > p[0]) {
                project_nonincreasing(&row, w)
            } else {
                row
            };
            for v in row.iter_mut() {
                *v = v.clamp(0.0, 1.0);
            }
            values.push(row);
        }
        let table = ProfileTable::new(
            self.spec.xi0,
            self.spec.dxi,
            self.cells,
            self.periods,
            cell_measure,
            values,
        )?;
        Ok((table, max_violation, max_violation > ISOTONIC_THRESHOLD))
    }
}

/// Bins the snapshots of a trajectory by `(x . e - c t, x mod L)`.
pub fn extract_profile(
    trajectory: &Trajectory,
    e: &[f64],
    c: f64,
    spec: ProfileSpec,
    medium: &PeriodicMedium,
) -> Result<ProfileTable> {
    if !is_commensurate(medium, e) {
        return Err(Error::Precondition("direction is not lattice-commensurate".into()));
    }
    let mut bins = ProfileBins::new(spec, medium);
    for s in &trajectory.snapshots {
        bins.add(s, e, c);
    }
    Ok(bins.finish(medium.cell_measure())?.0)
}

/// `int_{zeta > s} int_cell U(zeta)^2` by the trapezoid rule on the table.
fn tail_mass(t: &ProfileTable, s: f64) -> f64 {
    let n_cells = t.values.len() as f64;
    let mut total = 0.0;
    for row in &t.values {
        let n = row.len();
        let r = ((s - t.xi0) / t.dxi).clamp(0.0, (n - 1) as f64);
        let j = (r.floor() as usize).min(n - 2);
        let w = r - j as f64;
        let us = row[j] * (1.0 - w) + row[j + 1] * w;
        let mut acc = 0.5 * (us * us + row[j + 1] * row[j + 1]) * (1.0 - w) * t.dxi;
        for k in j + 1..n - 1 {
            acc += 0.5 * (row[k] * row[k] + row[k + 1] * row[k + 1]) * t.dxi;
        }
        if s < t.xi0 {
            acc += (t.xi0 - s) * row[0] * row[0];
        }
        total += acc;
    }
    total * t.cell_measure / n_cells
}

/// Shifts the table so that the tail mass of `U^2` over `xi > 0` is one.
pub fn normalize_shift(front: &PulsatingFront) -> Result<PulsatingFront> {
    let t = &front.profile;
    let tail_ok = t.values.iter().all(|row| row[0] > 1.0 - 1e-6 && row[row.len() - 1] < 1e-6);
    if !tail_ok {
        return Err(Error::Profile(
            "profile tails are not resolved (need U > 1 - 1e-6 and U < 1e-6 at the table ends)".into(),
        ));
    }
    let (mut lo, mut hi) = (t.xi0, t.xi_max());
    if tail_mass(t, lo) < 1.0 {
        return Err(Error::Profile(format!(
            "normalization mass unreachable: total mass {:.6} < 1; extend the xi-range",
            tail_mass(t, lo)
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail_mass(t, mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let s = 0.5 * (lo + hi);
    if (tail_mass(t, s) - 1.0).abs() > NORMALIZATION {
        return Err(Error::Profile("normalization bisection did not reach 1e-6".into()));
    }
    let mut out = front.clone();
    out.profile.xi0 = t.xi0 - s;
    out.shift = front.shift + s;
    out.tail_hits = Arc::new(AtomicU64::new(0));
    Ok(out)
}

/// Normalization mass `int_{xi>0} int_cell U^2` of a front.
pub fn normalization_mass(front: &PulsatingFront) -> f64 {
    tail_mass(&front.profile, 0.0)
}

pub fn estimate_decay(front: &PulsatingFront) -> Result<DecayFit> {
    let t = &front.profile;
    let n = t.len();
    let mut der = vec![0.0; n];
    let mut upper = vec![0.0_f64; n];
    let mut lower = vec![1.0_f64; n];
    for row in &t.values {
        for j in 0..n {
            let d = if j == 0 {
                (row[1] - row[0]) / t.dxi
            } else if j == n - 1 {
                (row[n - 1] - row[n - 2]) / t.dxi
            } else {
                (row[j + 1] - row[j - 1]) / (2.0 * t.dxi)
            };
            der[j] = f64::max(der[j], d.abs());
            upper[j] = upper[j].max(row[j]);
            lower[j] = lower[j].min(row[j]);
        }
    }
    let fit = |select: &dyn Fn(usize) -> bool| -> (f64, f64, f64, usize) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for j in 0..n {
            if select(j) && der[j] > 0.0 {
                xs.push(t.xi(j).abs());
                ys.push(der[j].ln());
            }
        }
        if xs.len() < 5 {
            return (0.0, 0.0, 0.0, xs.len());
        }
        let (slope, _, intercept) = fit_line(&xs, &ys);
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let sst: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 0.0 };
        (-slope, r2, intercept, xs.len())
    };
    let (mu_r, r2_r, _, n_r) = fit(&|j| t.xi(j) > 0.0 && upper[j] < 1e-2 && upper[j] > 1e-10);
    let (mu_l, r2_l, _, n_l) = fit(&|j| t.xi(j) < 0.0 && 1.0 - lower[j] < 1e-2 && 1.0 - lower[j] > 1e-10);
    let flagged = n_r < 5 || n_l < 5 || r2_r < 0.9 || r2_l < 0.9 || !(mu_r > 0.0) || !(mu_l > 0.0);
    let mu = if flagged && (mu_l <= 0.0 || mu_r <= 0.0) {
        mu_l.max(mu_r)
    } else {
        mu_l.min(mu_r)
    };
    let c = (0..n)
        .map(|j| der[j] * (mu * t.xi(j).abs()).exp())
        .fold(0.0, f64::max);
    Ok(DecayFit {
        mu,
        c,
        mu_left: mu_l,
        mu_right: mu_r,
        r2_left: r2_l,
        r2_right: r2_r,
        flagged,
    })
}

/// `delta = min(U, 1 - U)` and `r = min(-dU/dxi)` over `|xi| <= radius`.
pub fn interior_bounds(front: &PulsatingFront, radius: f64) -> Result<(f64, f64)> {
    let t = &front.profile;
    if !(radius >= 0.0) || -radius < t.xi0 || radius > t.xi_max() {
        return Err(Error::Precondition(format!(
            "R = {radius} is outside the table range [{}, {}]",
            t.xi0,
            t.xi_max()
        )));
    }
    let mut points = vec![-radius, radius];
    for j in 0..t.len() {
        if t.xi(j).abs() <= radius {
            points.push(t.xi(j));
        }
    }
    let mut delta = f64::INFINITY;
    let mut r = f64::INFINITY;
    for cell in 0..t.values.len() {
        for &xi in &points {
            let (u, d) = t.hermite(cell, xi);
            delta = delta.min(u.min(1.0 - u));
            r = r.min(-d);
        }
    }
    if !(r > 0.0) {
        return Err(Error::Profile(format!(
            "monotonicity fault: min(-dU/dxi) = {r:.3e} on |xi| <= {radius}"
        )));
    }
    Ok((delta, r))
}

/// Runs a co-moving strip along `e` until the level-set speed is stationary.
pub fn compute_front(medium: &PeriodicMedium, e: &[f64], config: &FrontConfig) -> Result<FrontOutcome> {
    if e.len() != medium.dim || (norm(e) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("direction {e:?} must be a unit vector in R^{}", medium.dim)));
    }
    if medium.dim == 2 && config.transverse_width == 0.0 && !is_commensurate(medium, e) {
        return Err(Error::Precondition(format!(
            "direction {e:?} has no lattice period in {}; heterogeneous planes take lattice directions",
            medium.name
        )));
    }
    let grid = strip_grid(medium, e, config)?;
    let dt = config.dt.unwrap_or_else(|| explicit_dt_bound(&grid, medium));
    let solver = SolverConfig::explicit(&grid, medium, config.t_max, config.snapshot_every).with_dt(dt);
    let mut stepper = Stepper::new(&grid, medium, &solver)?;
    let length = grid.upper(0) - grid.lower[0];
    let h = config.h;
    let start = 0.5 * length;
    let mut state = Field::from_fn(&grid, 0.0, |x| smoothed_step(dot(x, e) - start));

    let every = ((config.snapshot_every / dt).round() as usize).max(1);
    let probe = (every / 20).max(1);
    let period = if medium.homogeneous {
        None
    } else {
        Some(period_along(medium, e).unwrap_or_else(|| medium.periods.iter().cloned().fold(0.0, f64::max)))
    };
    let mut probes: Vec<(f64, f64)> = Vec::new();
    let mut ts: Vec<f64> = Vec::new();
    let mut ps: Vec<f64> = Vec::new();
    let total = (config.t_max / dt).ceil() as usize;
    let recenter = |stepper: &mut Stepper, state: &mut Field, p: f64| -> Result<()> {
        let center = state.grid.lower[0] + 0.5 * length;
        if (p - center).abs() > 2.0 {
            let nodes = ((p - center) / h).round() as isize;
            stepper.shift_window(state, 0, nodes, &|x| smoothed_step(dot(x, e) - p))?;
        }
        Ok(())
    };
    let mut stationary = false;
    let mut n = 0;
    while n < total {
        stepper.step(&mut state, None)?;
        n += 1;
        if n % probe == 0 || n % every == 0 {
            let p = level_set_position(&state, e)?;
            probes.push((state.time, p));
            recenter(&mut stepper, &mut state, p)?;
        }
        if n % every != 0 || state.time < config.transient {
            continue;
        }
        let p_now = probes.last().map(|q| q.1).unwrap_or(0.0);
        let pos = match (period, ps.len() >= 2) {
            (Some(l), true) => {
                // average over one pulsation period to remove the wobble; the
                // rate is fitted to the raw probes (averaged positions feed back)
                let (pt, pp): (Vec<f64>, Vec<f64>) = probes.iter().copied().unzip();
                let c_est = fit_line(&pt, &pp).0;
                let span = if c_est.abs() > NEAR_STATIONARY {
                    (l / c_est.abs()).min(50.0)
                } else {
                    config.snapshot_every
                };
                let recent: Vec<&(f64, f64)> = probes.iter().filter(|q| q.0 > state.time - span).collect();
                if probes.first().is_some_and(|q| q.0 <= state.time - span) {
                    let mt = recent.iter().map(|q| q.0).sum::<f64>() / recent.len() as f64;
                    let mp = recent.iter().map(|q| q.1).sum::<f64>() / recent.len() as f64;
                    // report the averaged position at the current time
                    mp + c_est * (state.time - mt)
                } else {
                    p_now
                }
            }
            _ => p_now,
        };
        let keep_from = state.time - 60.0;
        probes.retain(|q| q.0 >= keep_from);
        ts.push(state.time);
        ps.push(pos);
        if let Some(s) = window_slopes(&ts, &ps, 3) {
            if slopes_agree(&s) {
                stationary = true;
                break;
            }
        }
    }
    if !stationary {
        let last_slopes = window_slopes(&ts, &ps, 3).unwrap_or_default();
        return Ok(FrontOutcome::NoFrontDetected {
            elapsed: state.time,
            last_slopes,
        });
    }
    let k = ts.len() - 3 * SPEED_WINDOW;
    let (c, stderr, _) = fit_line(&ts[k..], &ps[k..]);
    if c.abs() < NEAR_STATIONARY {
        return Ok(FrontOutcome::NearStationary { speed: c, stderr });
    }
    // profiles of fronts with c < 0 follow from 1 - U(-xi) and are not tabulated
    if !config.profile || !is_commensurate(medium, e) || c < 0.0 {
        return Ok(FrontOutcome::SpeedOnly { speed: c, stderr });
    }
    if stderr >= 0.01 * c.abs() {
        return Err(Error::Precondition(format!(
            "speed stderr {stderr:.3e} is not below 1% of |c| = {:.3e}",
            c.abs()
        )));
    }

    // record node time series while the front passes; a discrete travelling
    // wave repeats at every node, so each series samples U at spacing c dt
    let dxi = h / config.bins_per_h.max(1) as f64;
    let half = config.profile_half_width;
    let sign = c.signum();
    let p0 = level_set_position(&state, e)?;
    let xi_c = p0 - c * state.time;
    let lattice_period = period.unwrap_or(h);
    let s_ref = p0 + sign * (half + 1.0);
    let cells = if medium.homogeneous {
        vec![1; medium.dim]
    } else {
        medium.cell_resolution.clone()
    };
    let probe_table = ProfileTable::new(0.0, 1.0, cells.clone(), medium.periods.clone(), 1.0, vec![vec![0.0; 4]; cells.iter().product()])?;
    let n_cells = probe_table.values.len();
    // one tracked node per cell point, taken from the band just ahead of s_ref
    let mut tracked: Vec<Option<(Vec<f64>, f64)>> = vec![None; n_cells];
    for i in 0..state.grid.len() {
        let x = state.grid.physical(i);
        let s = dot(&x, e);
        let ahead = (s - s_ref) * sign;
        if !(-1e-9..=lattice_period + h).contains(&ahead) {
            continue;
        }
        let cell = probe_table.cell_index(&x);
        let better = match &tracked[cell] {
            None => true,
            Some((_, best)) => ahead < *best,
        };
        if better {
            tracked[cell] = Some((x, ahead));
        }
    }
    // a coarse strip may miss some cell points; the speed stands on its own
    let Some(tracked) = tracked.into_iter().map(|t| t.map(|v| v.0)).collect::<Option<Vec<Vec<f64>>>>() else {
        return Ok(FrontOutcome::SpeedOnly { speed: c, stderr });
    };
    let k_periods = (10.0 / lattice_period).ceil();
    let partner: Vec<f64> = tracked[0].iter().zip(e).map(|(x, ev)| x - sign * k_periods * lattice_period * ev).collect();
    let node_at = |state: &Field, x: &[f64]| -> Result<f64> {
        let g = &state.grid;
        let mut idx = 0;
        for k in 0..g.dim() {
            let coord = dot(x, &g.frame.axes[k]);
            let r = ((coord - g.lower[k]) / g.spacing[k]).round();
            if r < 0.0 || r >= g.counts[k] as f64 {
                return Err(Error::Truncation("a tracked node left the co-moving strip; enlarge the padding".into()));
            }
            idx = idx * g.counts[k] + r as usize;
        }
        Ok(state.values[idx])
    };
    let s_far = tracked.iter().map(|x| dot(x, e) * sign).fold(f64::NEG_INFINITY, f64::max) * sign;
    let mut series: Vec<Vec<f64>> = vec![Vec::new(); n_cells];
    let mut partner_series: Vec<f64> = Vec::new();
    let t_start = state.time;
    let t_stop_guess = ((s_far - (xi_c - sign * (half + 3.0 * dxi))) / c).max(t_start);
    let t_stop = t_stop_guess;
    let mut m = 0usize;
    loop {
        for (cell, x) in tracked.iter().enumerate() {
            series[cell].push(node_at(&state, x)?);
        }
        partner_series.push(node_at(&state, &partner)?);
        if state.time >= t_stop {
            break;
        }
        stepper.step(&mut state, None)?;
        m += 1;
        if m % probe == 0 {
            let p = level_set_position(&state, e)?;
            recenter(&mut stepper, &mut state, p)?;
        }
        if state.time > t_start + config.t_max {
            return Err(Error::Profile("front passage did not complete within t_max".into()));
        }
    }
    let t_of = |n: f64| t_start + n * dt;
    let c_cross = match (crossing_index(&series[0]), crossing_index(&partner_series)) {
        (Some(a), Some(b)) => {
            let ds = dot(&tracked[0], e) - dot(&partner, e);
            ds / (t_of(a) - t_of(b))
        }
        _ => return Err(Error::Profile("tracked nodes never crossed u = 1/2".into())),
    };
    let c = c_cross;
    let n_xi = (2.0 * half / dxi).round() as usize + 1;
    let xi0 = xi_c - half;
    let mut values = Vec::with_capacity(n_cells);
    for (cell, x) in tracked.iter().enumerate() {
        let s_m = dot(x, e);
        let row: Vec<f64> = (0..n_xi)
            .map(|j| {
                let xi = xi0 + j as f64 * dxi;
                // xi = s_m - c t  ->  fractional sample index
                let r = ((s_m - xi) / c - t_start) / dt;
                lagrange4(&series[cell], r)
            })
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::Profile(format!("cell {cell}: passage does not cover [{:.3}, {:.3}]", xi0, xi0 + (n_xi - 1) as f64 * dxi)))?;
        values.push(row);
    }
    let mut max_violation = 0.0_f64;
    for row in values.iter_mut() {
        for j in 0..row.len() - 1 {
            max_violation = max_violation.max(row[j + 1] - row[j]);
        }
        if row.windows(2).any(|p| p[1] > p[0]) {
            *row = project_nonincreasing(row, &vec![1.0; row.len()]);
        }
        for v in row.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
    }
    let monotonized = max_violation > ISOTONIC_THRESHOLD;
    let table = ProfileTable::new(xi0, dxi, cells, medium.periods.clone(), medium.cell_measure(), values)?;
    let mut front = PulsatingFront::from_table(e.to_vec(), c, stderr, table);
    front.max_violation = max_violation;
    front.monotonized = monotonized;
    let mut front = normalize_shift(&front)?;
    front.decay = estimate_decay(&front).ok();
    front.interior = interior_bounds(&front, 2.0).ok();
    Ok(FrontOutcome::Converged(Box::new(front)))
}

/// First sample index (fractional) where a rising series crosses 1/2.
fn crossing_index(series: &[f64]) -> Option<f64> {
    let j = series.windows(2).position(|w| w[0] < 0.5 && w[1] >= 0.5)?;
    // refine with the cubic through four neighbours
    let (mut lo, mut hi) = (j as f64, j as f64 + 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if lagrange4(series, mid)? < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Cubic Lagrange interpolation of uniformly spaced samples at index `r`.
fn lagrange4(v: &[f64], r: f64) -> Option<f64> {
    if !(r >= 0.0) || r > (v.len() - 1) as f64 {
        return None;
    }
    let n = v.len();
    let j = (r.floor() as usize).clamp(1, n.saturating_sub(3).max(1));
    if j + 2 >= n {
        return Some(v[n - 1]);
    }
    let t = r - j as f64;
    let (a, b, c, d) = (v[j - 1], v[j], v[j + 1], v[j + 2]);
    Some(
        -t * (t - 1.0) * (t - 2.0) / 6.0 * a + (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0 * b
            - (t + 1.0) * t * (t - 2.0) / 2.0 * c
            + (t + 1.0) * t * (t - 1.0) / 6.0 * d,
    )
}

/// Sup distance over the table between a homogeneous cubic profile and the
/// closed form carrying the same normalization.
pub fn closed_form_error(front: &PulsatingFront, theta: f64) -> Result<f64> {
    let t = &front.profile;
    let half = 0.5 * (t.xi_max() - t.xi0);
    let exact = normalize_shift(&PulsatingFront::closed_form_cubic(
        front.direction.len(),
        front.direction.clone(),
        theta,
        half + 10.0,
        t.dxi / 4.0,
    )?)?;
    let origin = vec![0.0; front.direction.len()];
    Ok((0..t.len())
        .map(|j| (t.values[0][j] - exact.value(t.xi(j), &origin)).abs())
        .fold(0.0, f64::max))
}

/// Fronts over a set of directions, interpolated linearly in angle (planar).
#[derive(Clone, Debug)]
pub struct FrontFamily {
    fronts: Vec<PulsatingFront>,
    angles: Vec<f64>,
}

impl FrontFamily {
    pub fn new(mut fronts: Vec<PulsatingFront>) -> Result<Self> {
        if fronts.is_empty() {
            return Err(Error::Profile("a front family needs at least one front".into()));
        }
        if fronts[0].direction.len() != 2 {
            if fronts.len() == 1 {
                return Ok(FrontFamily {
                    angles: vec![0.0],
                    fronts,
                });
            }
            return Err(Error::Profile("direction interpolation is planar".into()));
        }
        fronts.sort_by(|a, b| angle(&a.direction).total_cmp(&angle(&b.direction)));
        let angles = fronts.iter().map(|f| angle(&f.direction)).collect();
        Ok(FrontFamily { fronts, angles })
    }

    pub fn fronts(&self) -> &[PulsatingFront] {
        &self.fronts
    }

    pub fn angle_range(&self) -> (f64, f64) {
        (self.angles[0], *self.angles.last().unwrap())
    }

    /// The front whose direction equals `e`, if tabulated.
    pub fn exact(&self, e: &[f64]) -> Option<&PulsatingFront> {
        self.fronts
            .iter()
            .find(|f| f.direction.iter().zip(e).all(|(a, b)| (a - b).abs() < 1e-9))
    }

    fn bracket(&self, e: &[f64]) -> Result<(usize, usize, f64)> {
        if self.fronts.len() == 1 || e.len() != 2 {
            return Ok((0, 0, 0.0));
        }
        let a = angle(e);
        let (lo, hi) = self.angle_range();
        if a < lo - 1e-9 || a > hi + 1e-9 {
            return Err(Error::Profile(format!(
                "direction at angle {a:.6} is outside the tabulated range [{lo:.6}, {hi:.6}]"
            )));
        }
        let a = a.clamp(lo, hi);
        let k = self.angles.partition_point(|&b| b <= a).clamp(1, self.angles.len() - 1);
        let w = (a - self.angles[k - 1]) / (self.angles[k] - self.angles[k - 1]);
        Ok((k - 1, k, w))
    }

    pub fn speed(&self, e: &[f64]) -> Result<f64> {
        let (i, j, w) = self.bracket(e)?;
        Ok((1.0 - w) * self.fronts[i].speed + w * self.fronts[j].speed)
    }

    pub fn value(&self, e: &[f64], xi: f64, x: &[f64]) -> Result<f64> {
        let (i, j, w) = self.bracket(e)?;
        if w == 0.0 {
            return Ok(self.fronts[i].value(xi, x));
        }
        Ok((1.0 - w) * self.fronts[i].value(xi, x) + w * self.fronts[j].value(xi, x))
    }

    pub fn tail_extensions(&self) -> u64 {
        self.fronts.iter().map(|f| f.tail_extensions()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_nodes_and_stays_monotone() {
        let f = PulsatingFront::closed_form_cubic(1, vec![1.0], 0.25, 10.0, 0.1).unwrap();
        for j in 0..f.profile.len() {
            let xi = f.profile.xi(j);
            assert!((f.value(xi, &[0.0]) - smoothed_step(xi)).abs() < 1e-14);
        }
        let mut prev = 1.0;
        for k in 0..2000 {
            let v = f.value(-10.0 + k as f64 * 0.01, &[0.0]);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
        assert_eq!(f.tail_extensions(), 0);
        f.value(12.0, &[0.0]);
        assert_eq!(f.tail_extensions(), 1);
    }

    #[test]
    fn normalization_is_idempotent() {
        let f = PulsatingFront::closed_form_cubic(1, vec![1.0], 0.25, 30.0, 0.01).unwrap();
        let g = normalize_shift(&f).unwrap();
        assert!((normalization_mass(&g) - 1.0).abs() < 1e-6);
        let again = normalize_shift(&g).unwrap();
        assert!((again.shift - g.shift).abs() < 1e-8);
    }

    #[test]
    fn window_detector() {
        let ts: Vec<f64> = (0..30).map(|k| k as f64).collect();
        let ps: Vec<f64> = ts.iter().map(|t| 0.3 * t).collect();
        assert!(slopes_agree(&window_slopes(&ts, &ps, 3).unwrap()));
        let bent: Vec<f64> = ts.iter().map(|t| 0.3 * t + 0.001 * t * t).collect();
        assert!(!slopes_agree(&window_slopes(&ts, &bent, 3).unwrap()));
    }
}
