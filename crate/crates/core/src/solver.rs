//! Monotone finite-difference solver for `u_t = div(A grad u) + f(x, u)` on a
//! truncated box, with conservative fluxes and harmonic-mean face coefficients.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::medium::{cubic_reaction, PeriodicMedium, Reaction};
use crate::tolerances::{CFL_SAFETY, CG_TOLERANCE, COMPARISON_SLACK, DIVERGENCE_GUARD};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"RDFRONT1";
/// Below this many nodes a step runs on the calling thread.
const PARALLEL_THRESHOLD: usize = 16_384;
const MAX_CG_ITERATIONS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Node values are prescribed (by a boundary function or frozen).
    Clamped,
    ZeroFlux,
    /// The last node couples to the first; the period is `counts * spacing`.
    Periodic,
}

/// Orthonormal axes mapping grid coordinates to physical space.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub axes: Vec<Vec<f64>>,
}

impl Frame {
    pub fn identity(dim: usize) -> Self {
        let axes = (0..dim)
            .map(|k| (0..dim).map(|j| if j == k { 1.0 } else { 0.0 }).collect())
            .collect();
        Frame { axes }
    }

    pub fn is_identity(&self) -> bool {
        *self == Frame::identity(self.axes.len())
    }

    pub fn to_physical(&self, g: &[f64]) -> Vec<f64> {
        let dim = self.axes.len();
        let mut x = vec![0.0; dim];
        for (gk, axis) in g.iter().zip(&self.axes) {
            for j in 0..dim {
                x[j] += gk * axis[j];
            }
        }
        x
    }

    /// `R^T M R` for a physical row-major matrix `M`.
    fn rotate_matrix(&self, m: &[f64]) -> Vec<f64> {
        let dim = self.axes.len();
        let mut out = vec![0.0; dim * dim];
        for k in 0..dim {
            for l in 0..dim {
                let mut s = 0.0;
                for i in 0..dim {
                    for j in 0..dim {
                        s += self.axes[k][i] * m[i * dim + j] * self.axes[l][j];
                    }
                }
                out[k * dim + l] = s;
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    /// Grid coordinate of the first node along each axis.
    pub lower: Vec<f64>,
    pub spacing: Vec<f64>,
    pub counts: Vec<usize>,
    /// Condition on the (lower, upper) face of each axis.
    pub boundary: Vec<[Boundary; 2]>,
    pub frame: Frame,
}

impl Grid {
    /// Axis-aligned box `[lower, upper]` with the given spacings.
    pub fn new(lower: &[f64], upper: &[f64], spacing: &[f64], boundary: Boundary) -> Result<Grid> {
        let dim = lower.len();
        if upper.len() != dim || spacing.len() != dim || dim == 0 {
            return Err(Error::Config("grid extents and spacings disagree in dimension".into()));
        }
        let mut counts = Vec::with_capacity(dim);
        for k in 0..dim {
            let h = spacing[k];
            let span = upper[k] - lower[k];
            if !(h > 0.0) || !(span >= 0.0) {
                return Err(Error::Config(format!("axis {k}: invalid extent or spacing")));
            }
            let n = span / h;
            if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
                return Err(Error::Config(format!(
                    "axis {k}: spacing {h} does not divide the extent {span}"
                )));
            }
            counts.push(n.round() as usize + 1);
        }
        if boundary == Boundary::Periodic && counts.iter().any(|&c| c < 3) {
            return Err(Error::Config("periodic axes need at least 3 nodes".into()));
        }
        Ok(Grid {
            lower: lower.to_vec(),
            spacing: spacing.to_vec(),
            counts,
            boundary: vec![[boundary; 2]; dim],
            frame: Frame::identity(dim),
        })
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    /// Wraps axis `k`; needs at least three nodes on it.
    pub fn with_periodic_axis(mut self, k: usize) -> Result<Self> {
        if self.counts[k] < 3 {
            return Err(Error::Config(format!("periodic axis {k} needs at least 3 nodes")));
        }
        self.boundary[k] = [Boundary::Periodic; 2];
        Ok(self)
    }

    pub fn periodic(&self, k: usize) -> bool {
        self.boundary[k][0] == Boundary::Periodic
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn upper(&self, k: usize) -> f64 {
        self.lower[k] + (self.counts[k] - 1) as f64 * self.spacing[k]
    }

    pub fn strides(&self) -> Vec<usize> {
        let dim = self.dim();
        let mut s = vec![1; dim];
        for k in (0..dim.saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.counts[k + 1];
        }
        s
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let dim = self.dim();
        let mut m = vec![0; dim];
        for k in (0..dim).rev() {
            m[k] = idx % self.counts[k];
            idx /= self.counts[k];
        }
        m
    }

    pub fn grid_coords(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(k, &i)| self.lower[k] + i as f64 * self.spacing[k])
            .collect()
    }

    pub fn physical(&self, idx: usize) -> Vec<f64> {
        let g = self.grid_coords(idx);
        if self.frame.is_identity() {
            g
        } else {
            self.frame.to_physical(&g)
        }
    }

    /// Nodes lying on a clamped face.
    pub fn clamped_nodes(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                let m = self.multi_index(i);
                (0..self.dim()).any(|k| {
                    (m[k] == 0 && self.boundary[k][0] == Boundary::Clamped && self.counts[k] > 1)
                        || (m[k] + 1 == self.counts[k]
                            && self.boundary[k][1] == Boundary::Clamped
                            && self.counts[k] > 1)
                })
            })
            .collect()
    }

    /// Boundary ring (any index at an end of a non-periodic axis with more
    /// than one node).
    pub fn on_ring(&self, idx: usize) -> bool {
        let m = self.multi_index(idx);
        (0..self.dim())
            .any(|k| self.counts[k] > 1 && !self.periodic(k) && (m[k] == 0 || m[k] + 1 == self.counts[k]))
    }

    pub fn same_lattice(&self, other: &Grid) -> bool {
        self.counts == other.counts
            && self.spacing == other.spacing
            && self
                .lower
                .iter()
                .zip(&other.lower)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
            && self.frame == other.frame
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn constant(grid: &Grid, value: f64, time: f64) -> Field {
        Field {
            grid: grid.clone(),
            values: vec![value; grid.len()],
            time,
        }
    }

    /// Samples `f(physical point)` at every node.
    pub fn from_fn(grid: &Grid, time: f64, f: impl Fn(&[f64]) -> f64 + Sync) -> Field {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| f(&grid.physical(i)))
            .collect();
        Field {
            grid: grid.clone(),
            values,
            time,
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_distance(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let g = &self.grid;
        let mut buf = Vec::with_capacity(16 + 24 * g.dim() + 8 * self.values.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(g.dim() as u64).to_le_bytes());
        for k in 0..g.dim() {
            buf.extend_from_slice(&g.lower[k].to_le_bytes());
            buf.extend_from_slice(&g.upper(k).to_le_bytes());
        }
        for k in 0..g.dim() {
            buf.extend_from_slice(&g.spacing[k].to_le_bytes());
        }
        buf.extend_from_slice(&self.time.to_le_bytes());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a snapshot; boundary tags are not stored and default to zero-flux.
    pub fn read(path: &Path) -> Result<Field> {
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let bad = |reason: &str| Error::Format {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("missing RDFRONT1 magic"));
        }
        let mut pos = 8;
        let next = |pos: &mut usize| -> Result<[u8; 8]> {
            let chunk = bytes
                .get(*pos..*pos + 8)
                .ok_or_else(|| bad("truncated header"))?;
            *pos += 8;
            Ok(chunk.try_into().unwrap())
        };
        let dim = u64::from_le_bytes(next(&mut pos)?) as usize;
        if dim == 0 || dim > 8 {
            return Err(bad("implausible dimension"));
        }
        let mut lower = vec![0.0; dim];
        let mut upper = vec![0.0; dim];
        for k in 0..dim {
            lower[k] = f64::from_le_bytes(next(&mut pos)?);
            upper[k] = f64::from_le_bytes(next(&mut pos)?);
        }
        let mut spacing = vec![0.0; dim];
        for s in spacing.iter_mut() {
            *s = f64::from_le_bytes(next(&mut pos)?);
        }
        let time = f64::from_le_bytes(next(&mut pos)?);
        let grid = Grid::new(&lower, &upper, &spacing, Boundary::ZeroFlux)
            .map_err(|_| bad("inconsistent extents and spacings"))?;
        let n = grid.len();
        if bytes.len() != pos + 8 * n {
            return Err(bad("payload length does not match the header"));
        }
        let values = bytes[pos..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Field { grid, values, time })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scheme {
    Explicit { dt: f64 },
    /// Backward-Euler diffusion solved by conjugate gradients, explicit reaction.
    ImplicitDiffusion { dt: f64, tol: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub t_end: f64,
    /// Time between stored snapshots; `0` stores only the endpoints.
    pub snapshot_every: f64,
    pub guard: f64,
    /// Reject time steps that break monotonicity. Disabling this exists only
    /// to demonstrate what the guard prevents.
    pub enforce_cfl: bool,
}

impl SolverConfig {
    /// Explicit scheme at the largest admissible step.
    pub fn explicit(grid: &Grid, medium: &PeriodicMedium, t_end: f64, snapshot_every: f64) -> Self {
        SolverConfig {
            scheme: Scheme::Explicit {
                dt: explicit_dt_bound(grid, medium),
            },
            t_end,
            snapshot_every,
            guard: DIVERGENCE_GUARD,
            enforce_cfl: true,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.scheme = match self.scheme {
            Scheme::Explicit { .. } => Scheme::Explicit { dt },
            Scheme::ImplicitDiffusion { tol, .. } => Scheme::ImplicitDiffusion { dt, tol },
        };
        self
    }

    pub fn implicit(medium: &PeriodicMedium, t_end: f64, snapshot_every: f64) -> Self {
        SolverConfig {
            scheme: Scheme::ImplicitDiffusion {
                dt: implicit_dt_bound(medium),
                tol: CG_TOLERANCE,
            },
            t_end,
            snapshot_every,
            guard: DIVERGENCE_GUARD,
            enforce_cfl: true,
        }
    }

    pub fn dt(&self) -> f64 {
        match self.scheme {
            Scheme::Explicit { dt } | Scheme::ImplicitDiffusion { dt, .. } => dt,
        }
    }
}

/// `0.9 / (2 lambda_2 sum_k 1/h_k^2)` over axes with more than one node;
/// equals `0.9 h^2 / (2 N lambda_2)` for uniform spacing.
pub fn explicit_dt_bound(grid: &Grid, medium: &PeriodicMedium) -> f64 {
    let s: f64 = (0..grid.dim())
        .filter(|&k| grid.counts[k] > 1)
        .map(|k| 1.0 / (grid.spacing[k] * grid.spacing[k]))
        .sum();
    if s == 0.0 {
        return f64::INFINITY;
    }
    CFL_SAFETY / (2.0 * medium.lambda_bounds.1 * s)
}

/// Keeps the explicit reaction update `u + dt f(u)` monotone.
pub fn implicit_dt_bound(medium: &PeriodicMedium) -> f64 {
    1.0 / (2.0 * medium.max_abs_reaction_du())
}

enum ReactionCache {
    Cubic(Vec<f64>),
    General(Vec<Vec<f64>>),
}

/// Spatial discretisation of a medium on a grid.
pub struct Discretization<'m> {
    medium: &'m PeriodicMedium,
    pub grid: Grid,
    strides: Vec<usize>,
    /// `face[k][i]`: coefficient of the face between `i` and `i + stride_k`
    /// divided by `h_k^2`; zero on the upper face.
    face: Vec<Vec<f64>>,
    /// Off-diagonal node values `a_kl / (4 h_k h_l)` for `k < l`.
    cross: Vec<((usize, usize), Vec<f64>)>,
    reaction: ReactionCache,
    /// Sum of all face coefficients touching a node, for the CFL check.
    diag_max: f64,
}

impl<'m> Discretization<'m> {
    pub fn new(grid: &Grid, medium: &'m PeriodicMedium) -> Result<Self> {
        if grid.dim() != medium.dim {
            return Err(Error::GridMismatch(format!(
                "grid dimension {} vs medium dimension {}",
                grid.dim(),
                medium.dim
            )));
        }
        let dim = grid.dim();
        let n = grid.len();
        let strides = grid.strides();
        let rotate = !grid.frame.is_identity();
        let positions: Vec<Vec<f64>> = (0..n).into_par_iter().map(|i| grid.physical(i)).collect();
        let mats: Vec<Vec<f64>> = positions
            .par_iter()
            .map(|x| {
                let a = medium.diffusion(x);
                if rotate {
                    grid.frame.rotate_matrix(&a)
                } else {
                    a
                }
            })
            .collect();
        let mut face = vec![vec![0.0; n]; dim];
        for k in 0..dim {
            let h2 = grid.spacing[k] * grid.spacing[k];
            let wrap = grid.periodic(k);
            let back = (grid.counts[k] - 1) * strides[k];
            let fk = &mut face[k];
            for i in 0..n {
                let m = (i / strides[k]) % grid.counts[k];
                let j = if m + 1 < grid.counts[k] {
                    i + strides[k]
                } else if wrap {
                    i - back
                } else {
                    continue;
                };
                let a = mats[i][k * dim + k];
                let b = mats[j][k * dim + k];
                fk[i] = 2.0 * a * b / (a + b) / h2;
            }
        }
        let mut cross = Vec::new();
        let any_wrap = (0..dim).any(|k| grid.periodic(k));
        for k in 0..dim {
            for l in k + 1..dim {
                if mats.iter().any(|m| m[k * dim + l] != 0.0) {
                    if any_wrap {
                        return Err(Error::Config("periodic axes need a diagonal diffusion matrix".into()));
                    }
                    let scale = 4.0 * grid.spacing[k] * grid.spacing[l];
                    cross.push(((k, l), mats.iter().map(|m| m[k * dim + l] / scale).collect()));
                }
            }
        }
        let mut diag_max = 0.0_f64;
        for i in 0..n {
            let mut s = 0.0;
            for k in 0..dim {
                s += face[k][i];
                if (i / strides[k]) % grid.counts[k] > 0 {
                    s += face[k][i - strides[k]];
                } else if grid.periodic(k) {
                    s += face[k][i + (grid.counts[k] - 1) * strides[k]];
                }
            }
            diag_max = diag_max.max(s);
        }
        let reaction = match medium.reaction_model() {
            Reaction::Cubic { theta } => {
                ReactionCache::Cubic(positions.par_iter().map(|x| theta(x)).collect())
            }
            Reaction::General { .. } => ReactionCache::General(positions),
        };
        Ok(Discretization {
            medium,
            grid: grid.clone(),
            strides,
            face,
            cross,
            reaction,
            diag_max,
        })
    }

    pub fn medium(&self) -> &PeriodicMedium {
        self.medium
    }

    #[inline]
    fn reaction_at(&self, i: usize, u: f64) -> f64 {
        match &self.reaction {
            ReactionCache::Cubic(theta) => cubic_reaction(theta[i], u),
            ReactionCache::General(pos) => self.medium.reaction(&pos[i], u),
        }
    }

    /// `div(A grad u)` at node `i` given its multi-index.
    #[inline]
    fn diffusion_at(&self, u: &[f64], i: usize, m: &[usize]) -> f64 {
        let ui = u[i];
        let mut s = 0.0;
        for k in 0..self.strides.len() {
            let st = self.strides[k];
            let nk = self.grid.counts[k];
            if m[k] + 1 < nk {
                s += self.face[k][i] * (u[i + st] - ui);
            } else if self.grid.periodic(k) {
                s += self.face[k][i] * (u[i - (nk - 1) * st] - ui);
            }
            if m[k] > 0 {
                s += self.face[k][i - st] * (u[i - st] - ui);
            } else if self.grid.periodic(k) {
                let j = i + (nk - 1) * st;
                s += self.face[k][j] * (u[j] - ui);
            }
        }
        for ((k, l), a) in &self.cross {
            let (k, l) = (*k, *l);
            let interior = m[k] > 0
                && m[k] + 1 < self.grid.counts[k]
                && m[l] > 0
                && m[l] + 1 < self.grid.counts[l];
            if !interior {
                continue;
            }
            let (sk, sl) = (self.strides[k], self.strides[l]);
            s += a[i + sk] * (u[i + sk + sl] - u[i + sk - sl]) - a[i - sk] * (u[i - sk + sl] - u[i - sk - sl]);
            s += a[i + sl] * (u[i + sl + sk] - u[i + sl - sk]) - a[i - sl] * (u[i - sl + sk] - u[i - sl - sk]);
        }
        s
    }

    /// Applies `F(u, i, m)` to every node, in parallel over blocks of lines.
    fn map_nodes<F>(&self, out: &mut [f64], f: F)
    where
        F: Fn(usize, &[usize]) -> f64 + Sync,
    {
        let dim = self.grid.dim();
        let line = self.grid.counts[dim - 1];
        let run = |first_line: usize, chunk: &mut [f64]| {
            let mut m = self.grid.multi_index(first_line * line);
            for (off, v) in chunk.iter_mut().enumerate() {
                let i = first_line * line + off;
                *v = f(i, &m);
                // advance the multi-index
                let mut k = dim - 1;
                loop {
                    m[k] += 1;
                    if m[k] < self.grid.counts[k] || k == 0 {
                        break;
                    }
                    m[k] = 0;
                    k -= 1;
                }
            }
        };
        let n = out.len();
        if n < PARALLEL_THRESHOLD {
            run(0, out);
        } else {
            let lines_per_block = (PARALLEL_THRESHOLD / 4 / line).max(1);
            out.par_chunks_mut(lines_per_block * line)
                .enumerate()
                .for_each(|(b, chunk)| run(b * lines_per_block, chunk));
        }
    }

    /// Forward Euler update on a planar grid without cross terms; `fixed`
    /// nodes are copied.
    fn explicit_planar(&self, u: &[f64], out: &mut [f64], fixed: &[bool], dt: f64) {
        let (nx, ny) = (self.grid.counts[0], self.grid.counts[1]);
        let (fx, fy) = (&self.face[0], &self.face[1]);
        let (wx, wy) = (self.grid.periodic(0), self.grid.periodic(1));
        let row = |ix: usize, dst: &mut [f64]| {
            let base = ix * ny;
            for (iy, v) in dst.iter_mut().enumerate() {
                let i = base + iy;
                let ui = u[i];
                if fixed[i] {
                    *v = ui;
                    continue;
                }
                let mut s = 0.0;
                if iy + 1 < ny {
                    s += fy[i] * (u[i + 1] - ui);
                } else if wy {
                    s += fy[i] * (u[base] - ui);
                }
                if iy > 0 {
                    s += fy[i - 1] * (u[i - 1] - ui);
                } else if wy {
                    s += fy[base + ny - 1] * (u[base + ny - 1] - ui);
                }
                if ix + 1 < nx {
                    s += fx[i] * (u[i + ny] - ui);
                } else if wx {
                    s += fx[i] * (u[iy] - ui);
                }
                if ix > 0 {
                    s += fx[i - ny] * (u[i - ny] - ui);
                } else if wx {
                    let j = (nx - 1) * ny + iy;
                    s += fx[j] * (u[j] - ui);
                }
                *v = ui + dt * (s + self.reaction_at(i, ui));
            }
        };
        if out.len() < PARALLEL_THRESHOLD {
            out.chunks_mut(ny).enumerate().for_each(|(ix, d)| row(ix, d));
        } else {
            out.par_chunks_mut(ny).enumerate().for_each(|(ix, d)| row(ix, d));
        }
    }

    /// `div(A grad u) + f(x, u)` at every node.
    pub fn operator(&self, u: &[f64], out: &mut [f64]) {
        self.map_nodes(out, |i, m| self.diffusion_at(u, i, m) + self.reaction_at(i, u[i]));
    }

    /// Largest explicit step keeping every nodal update monotone.
    pub fn monotone_dt(&self) -> f64 {
        1.0 / (self.diag_max + self.medium.max_abs_reaction_du())
    }
}

pub type BoundaryFn<'a> = &'a (dyn Fn(&[f64], f64) -> f64 + Sync);

/// Repeated time stepping on a fixed discretisation.
pub struct Stepper<'m> {
    pub disc: Discretization<'m>,
    config: SolverConfig,
    fixed: Vec<bool>,
    clamped: Vec<usize>,
    clamped_pos: Vec<Vec<f64>>,
    scratch: Vec<f64>,
}

impl<'m> Stepper<'m> {
    pub fn new(grid: &Grid, medium: &'m PeriodicMedium, config: &SolverConfig) -> Result<Self> {
        let disc = Discretization::new(grid, medium)?;
        Self::from_discretization(disc, config)
    }

    pub fn from_discretization(disc: Discretization<'m>, config: &SolverConfig) -> Result<Self> {
        let dt = config.dt();
        if !(dt > 0.0) {
            return Err(Error::Config(format!("time step {dt} must be positive")));
        }
        if config.enforce_cfl {
            match config.scheme {
                Scheme::Explicit { dt } => {
                    let bound = explicit_dt_bound(&disc.grid, disc.medium);
                    if dt > bound * (1.0 + 1e-12) || dt > disc.monotone_dt() {
                        return Err(Error::Cfl {
                            dt,
                            bound: bound.min(disc.monotone_dt()),
                        });
                    }
                }
                Scheme::ImplicitDiffusion { dt, .. } => {
                    let bound = implicit_dt_bound(disc.medium);
                    if dt > bound * (1.0 + 1e-12) {
                        return Err(Error::Cfl { dt, bound });
                    }
                }
            }
        }
        if matches!(config.scheme, Scheme::ImplicitDiffusion { .. }) && !disc.cross.is_empty() {
            return Err(Error::Config(
                "implicit diffusion requires a diagonal diffusion matrix".into(),
            ));
        }
        let clamped = disc.grid.clamped_nodes();
        let mut fixed = vec![false; disc.grid.len()];
        for &i in &clamped {
            fixed[i] = true;
        }
        let clamped_pos = clamped.iter().map(|&i| disc.grid.physical(i)).collect();
        let n = disc.grid.len();
        Ok(Stepper {
            disc,
            config: config.clone(),
            fixed,
            clamped,
            clamped_pos,
            scratch: vec![0.0; n],
        })
    }

    pub fn dt(&self) -> f64 {
        self.config.dt()
    }

    pub fn grid(&self) -> &Grid {
        &self.disc.grid
    }

    /// Indices of the nodes that take boundary data.
    pub fn clamped(&self) -> &[usize] {
        &self.clamped
    }

    /// Advances `state` by one step. Clamped nodes take `boundary(x, t+dt)`
    /// when given, or keep their values.
    pub fn step(&mut self, state: &mut Field, boundary: Option<BoundaryFn>) -> Result<()> {
        let dt = self.dt();
        let t_new = state.time + dt;
        match self.config.scheme {
            Scheme::Explicit { dt } => {
                let u = &state.values;
                let fixed = &self.fixed;
                let disc = &self.disc;
                let mut out = std::mem::take(&mut self.scratch);
                if disc.grid.dim() == 2 && disc.cross.is_empty() {
                    disc.explicit_planar(u, &mut out, fixed, dt);
                } else {
                    disc.map_nodes(&mut out, |i, m| {
                        if fixed[i] {
                            u[i]
                        } else {
                            u[i] + dt * (disc.diffusion_at(u, i, m) + disc.reaction_at(i, u[i]))
                        }
                    });
                }
                self.scratch = std::mem::replace(&mut state.values, out);
            }
            Scheme::ImplicitDiffusion { dt, tol } => {
                self.implicit_step(state, dt, tol, boundary, t_new)?;
            }
        }
        if let Some(b) = boundary {
            for (&i, x) in self.clamped.iter().zip(&self.clamped_pos) {
                state.values[i] = b(x, t_new);
            }
        }
        state.time = t_new;
        self.guard(state)
    }

    fn guard(&self, state: &Field) -> Result<()> {
        let g = self.config.guard;
        let bad = if state.values.len() < PARALLEL_THRESHOLD {
            state.values.iter().position(|v| !(v.abs() <= g))
        } else {
            state.values.par_iter().position_first(|v| !(v.abs() <= g))
        };
        match bad {
            None => Ok(()),
            Some(node) => Err(Error::Divergence {
                node,
                x: state.grid.physical(node),
                t: state.time,
                value: state.values[node],
            }),
        }
    }

    fn implicit_step(
        &mut self,
        state: &mut Field,
        dt: f64,
        tol: f64,
        boundary: Option<BoundaryFn>,
        t_new: f64,
    ) -> Result<()> {
        let n = self.disc.grid.len();
        let disc = &self.disc;
        let fixed = &self.fixed;
        // explicit reaction
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| {
                if fixed[i] {
                    state.values[i]
                } else {
                    let u = state.values[i];
                    u + dt * disc.reaction_at(i, u)
                }
            })
            .collect();
        let mut x = state.values.clone();
        if let Some(b) = boundary {
            for (&i, p) in self.clamped.iter().zip(&self.clamped_pos) {
                x[i] = b(p, t_new);
                rhs[i] = x[i];
            }
        }
        // residual r = rhs - (x - dt L x) on free nodes
        let apply = |v: &[f64], out: &mut [f64]| {
            disc.map_nodes(out, |i, m| {
                if fixed[i] {
                    0.0
                } else {
                    v[i] - dt * disc.diffusion_at(v, i, m)
                }
            });
        };
        let mut r = vec![0.0; n];
        apply(&x, &mut r);
        for i in 0..n {
            r[i] = if fixed[i] { 0.0 } else { rhs[i] - r[i] };
        }
        let norm_b = rhs.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let mut rr: f64 = r.iter().map(|v| v * v).sum();
        let mut it = 0;
        while rr.sqrt() > tol * norm_b {
            if it >= MAX_CG_ITERATIONS {
                return Err(Error::LinearSolve {
                    residual: rr.sqrt(),
                    iterations: it,
                });
            }
            apply(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            let alpha = rr / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rr_new: f64 = r.iter().map(|v| v * v).sum();
            let beta = rr_new / rr;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
            rr = rr_new;
            it += 1;
        }
        state.values = x;
        Ok(())
    }

    /// Moves a co-moving window by `nodes` along `axis`. Entering nodes are
    /// filled from `fill(x)`. Coefficients are re-sampled unless the shift is
    /// a whole number of periods (or the medium is homogeneous).
    pub fn shift_window(
        &mut self,
        state: &mut Field,
        axis: usize,
        nodes: isize,
        fill: &(dyn Fn(&[f64]) -> f64 + Sync),
    ) -> Result<()> {
        if nodes == 0 {
            return Ok(());
        }
        let grid = &mut state.grid;
        let strides = grid.strides();
        let n = grid.len();
        let na = grid.counts[axis] as isize;
        let old = state.values.clone();
        let mut moved = vec![f64::NAN; n];
        for (i, slot) in moved.iter_mut().enumerate() {
            let m = ((i / strides[axis]) % grid.counts[axis]) as isize;
            let src = m + nodes;
            if src >= 0 && src < na {
                let j = (i as isize + nodes * strides[axis] as isize) as usize;
                *slot = old[j];
            }
        }
        grid.lower[axis] += nodes as f64 * grid.spacing[axis];
        for (i, v) in moved.iter_mut().enumerate() {
            if v.is_nan() {
                *v = fill(&grid.physical(i));
            }
        }
        state.values = moved;
        let distance = nodes as f64 * grid.spacing[axis];
        let aligned = grid.frame.is_identity() && {
            let p = self.disc.medium.periods[axis];
            let r = distance / p;
            (r - r.round()).abs() < 1e-9
        };
        if self.disc.medium.homogeneous || aligned {
            self.disc.grid.lower = grid.lower.clone();
            self.clamped_pos = self.clamped.iter().map(|&i| grid.physical(i)).collect();
        } else {
            let disc = Discretization::new(grid, self.disc.medium)?;
            *self = Stepper::from_discretization(disc, &self.config)?;
        }
        Ok(())
    }
}

/// One step of the configured scheme; clamped nodes keep their values.
pub fn step(state: &Field, medium: &PeriodicMedium, config: &SolverConfig) -> Result<Field> {
    if let Some(i) = state.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            node: i,
            x: state.grid.physical(i),
            t: state.time,
            value: state.values[i],
        });
    }
    let mut stepper = Stepper::new(&state.grid, medium, config)?;
    let mut next = state.clone();
    stepper.step(&mut next, None)?;
    Ok(next)
}

/// Ordered snapshots of one run.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub snapshots: Vec<Field>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&Field> {
        self.snapshots.last()
    }

    /// Writes `index.csv` and one binary snapshot per entry.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut index = String::from("index,time,filename\n");
        let mut written = Vec::new();
        for (k, s) in self.snapshots.iter().enumerate() {
            let name = format!("snapshot_{k:05}.bin");
            let path = dir.join(&name);
            s.write(&path)?;
            index.push_str(&format!("{k},{},{name}\n", crate::cli::fmt17(s.time)));
            written.push(path);
        }
        let ipath = dir.join("index.csv");
        fs::write(&ipath, index).map_err(|e| Error::io(&ipath, e))?;
        written.push(ipath);
        Ok(written)
    }

    pub fn read_dir(dir: &Path) -> Result<Trajectory> {
        let ipath = dir.join("index.csv");
        let text = fs::read_to_string(&ipath).map_err(|e| Error::io(&ipath, e))?;
        let mut snapshots = Vec::new();
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let name = line.rsplit(',').next().ok_or_else(|| Error::Format {
                path: ipath.clone(),
                reason: format!("bad index line {line:?}"),
            })?;
            snapshots.push(Field::read(&dir.join(name))?);
        }
        Ok(Trajectory { snapshots })
    }
}

/// Evolves `u0` to `config.t_end`, storing snapshots at the configured cadence.
pub fn solve_cauchy(medium: &PeriodicMedium, u0: &Field, config: &SolverConfig) -> Result<Trajectory> {
    solve_cauchy_with(medium, u0, config, None)
}

pub fn solve_cauchy_with(
    medium: &PeriodicMedium,
    u0: &Field,
    config: &SolverConfig,
    boundary: Option<BoundaryFn>,
) -> Result<Trajectory> {
    let mut stepper = Stepper::new(&u0.grid, medium, config)?;
    let dt = stepper.dt();
    let total = ((config.t_end - u0.time) / dt).round().max(0.0) as usize;
    let every = if config.snapshot_every > 0.0 {
        ((config.snapshot_every / dt).round() as usize).max(1)
    } else {
        usize::MAX
    };
    let mut state = u0.clone();
    let mut traj = Trajectory {
        snapshots: vec![state.clone()],
    };
    for n in 1..=total {
        stepper.step(&mut state, boundary)?;
        if n % every == 0 || n == total {
            traj.snapshots.push(state.clone());
        }
    }
    Ok(traj)
}

/// `u_t - div(A grad u) - f(x,u)` at the middle of three equally spaced
/// snapshots; zero on the boundary ring.
pub fn residual(medium: &PeriodicMedium, snapshots: [&Field; 3]) -> Result<Field> {
    let [a, b, c] = snapshots;
    if !a.grid.same_lattice(&b.grid) || !b.grid.same_lattice(&c.grid) {
        return Err(Error::GridMismatch("snapshots live on different grids".into()));
    }
    let d1 = b.time - a.time;
    let d2 = c.time - b.time;
    if !(d1 > 0.0) || (d1 - d2).abs() > 1e-9 * d1.abs().max(1e-12) {
        return Err(Error::GridMismatch(format!(
            "snapshots are not equally spaced in time ({d1} vs {d2})"
        )));
    }
    let disc = Discretization::new(&b.grid, medium)?;
    let mut op = vec![0.0; b.grid.len()];
    disc.operator(&b.values, &mut op);
    let values = (0..b.grid.len())
        .map(|i| {
            if b.grid.on_ring(i) {
                0.0
            } else {
                (c.values[i] - a.values[i]) / (2.0 * d1) - op[i]
            }
        })
        .collect();
    Ok(Field {
        grid: b.grid.clone(),
        values,
        time: b.time,
    })
}

#[derive(Clone, Debug)]
pub struct ComparisonReport {
    /// Minimum over time and space of `u_high - u_low`.
    pub min_gap: f64,
    pub time_of_min: f64,
    pub passed: bool,
    /// Set when a run aborted (divergence) instead of finishing.
    pub fault: Option<String>,
}

/// Evolves an ordered pair and reports the worst ordering gap.
pub fn check_comparison(
    medium: &PeriodicMedium,
    low: &Field,
    high: &Field,
    config: &SolverConfig,
) -> Result<ComparisonReport> {
    if !low.grid.same_lattice(&high.grid) {
        return Err(Error::GridMismatch("ordered pair on different grids".into()));
    }
    if low.values.iter().zip(&high.values).any(|(a, b)| a > b) {
        return Err(Error::Precondition("initial data are not ordered".into()));
    }
    let mut stepper = Stepper::new(&low.grid, medium, config)?;
    let dt = stepper.dt();
    let total = ((config.t_end - low.time) / dt).round().max(0.0) as usize;
    let (mut lo, mut hi) = (low.clone(), high.clone());
    let gap = |a: &Field, b: &Field| {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| y - x)
            .fold(f64::INFINITY, f64::min)
    };
    let mut min_gap = gap(&lo, &hi);
    let mut time_of_min = lo.time;
    for _ in 0..total {
        let r = stepper.step(&mut lo, None).and_then(|_| stepper.step(&mut hi, None));
        if let Err(e) = r {
            return Ok(ComparisonReport {
                min_gap: min_gap.min(gap(&lo, &hi)),
                time_of_min,
                passed: false,
                fault: Some(e.to_string()),
            });
        }
        let g = gap(&lo, &hi);
        if g < min_gap {
            min_gap = g;
            time_of_min = lo.time;
        }
    }
    Ok(ComparisonReport {
        min_gap,
        time_of_min,
        passed: min_gap >= -COMPARISON_SLACK,
        fault: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::cubic_homogeneous;

    #[test]
    fn equilibria_are_preserved() {
        let m = cubic_homogeneous(2, 0.25, 1.0).unwrap();
        let g = Grid::new(&[0.0, 0.0], &[2.0, 2.0], &[0.25, 0.25], Boundary::ZeroFlux).unwrap();
        let cfg = SolverConfig::explicit(&g, &m, 1.0, 0.0);
        for v in [0.0, 1.0, 0.25] {
            let s = step(&Field::constant(&g, v, 0.0), &m, &cfg).unwrap();
            assert!(s.values.iter().all(|x| (x - v).abs() < 1e-15));
        }
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let m = cubic_homogeneous(1, 0.25, 1.0).unwrap();
        let g = Grid::new(&[0.0], &[1.0], &[0.1], Boundary::ZeroFlux).unwrap();
        let cfg = SolverConfig::explicit(&g, &m, 1.0, 0.0).with_dt(0.1);
        assert!(matches!(step(&Field::constant(&g, 0.5, 0.0), &m, &cfg), Err(Error::Cfl { .. })));
    }

    #[test]
    fn periodic_axis_commutes_with_cyclic_shifts() {
        // planar fast path and the generic stencil
        for dim in [1, 2] {
            let m = cubic_homogeneous(dim, 0.25, 1.0).unwrap();
            let upper = vec![1.75; dim];
            let g = Grid::new(&vec![0.0; dim], &upper, &vec![0.25; dim], Boundary::ZeroFlux)
                .unwrap()
                .with_periodic_axis(0)
                .unwrap();
            let cfg = SolverConfig::explicit(&g, &m, 1.0, 0.0);
            let u0 = Field::from_fn(&g, 0.0, |x| 0.5 + 0.4 * (3.1 * x[0]).sin() * (1.0 + 0.1 * x[dim - 1]));
            let st = g.strides()[0];
            let n = g.counts[0];
            let shift = |f: &Field| {
                let mut out = f.clone();
                for i in 0..g.len() {
                    let m0 = (i / st) % n;
                    let j = if m0 + 1 < n { i + st } else { i - (n - 1) * st };
                    out.values[j] = f.values[i];
                }
                out
            };
            let a = shift(&step(&u0, &m, &cfg).unwrap());
            let b = step(&shift(&u0), &m, &cfg).unwrap();
            assert!(a.sup_distance(&b) < 1e-15, "dim {dim}: {}", a.sup_distance(&b));
            assert!(!g.on_ring(0) || dim == 2);
        }
    }

    #[test]
    fn periodic_heat_conserves_mass() {
        // theta = 1/2 makes f odd about 1/2, so the mean of u - 1/2 stays zero
        let m = cubic_homogeneous(2, 0.5, 1.0).unwrap();
        let g = Grid::new(&[0.0, 0.0], &[1.75, 1.75], &[0.25, 0.25], Boundary::Periodic).unwrap();
        let cfg = SolverConfig::explicit(&g, &m, 1.0, 0.0);
        let mut u = Field::from_fn(&g, 0.0, |x| 0.5 + 0.01 * (2.0 * std::f64::consts::PI * x[0] / 2.0).cos());
        for _ in 0..100 {
            u = step(&u, &m, &cfg).unwrap();
        }
        let mean = u.values.iter().map(|v| v - 0.5).sum::<f64>() / g.len() as f64;
        assert!(mean.abs() < 1e-14, "{mean}");
    }

    #[test]
    fn grid_rejects_non_dividing_spacing() {
        assert!(Grid::new(&[0.0], &[1.0], &[0.3], Boundary::ZeroFlux).is_err());
    }
}
