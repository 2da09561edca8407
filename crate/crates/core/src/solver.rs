//! Explicit monotone finite-difference solvers for
//! `∂_t u + H(x, t, Du) − εF(x, t, D²u) = 0` and `ρu + H − εF = 0` on the
//! periodic grid, together with the exact oracles used as references:
//! Hopf-Lax formulas for convex x-independent Hamiltonians and the spectral
//! heat flow.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::cmp_penalized;
use crate::grid::{sup_norm_diff, Grid, GridFn, Point};
use crate::operators::{DiffusionKind, DiffusionSpec, Field, HamiltonianKind, HamiltonianSpec, ProblemSpec, SymMat};

/// Node count above which a stencil sweep is split across threads.
const PARALLEL_NODES: usize = 1 << 14;

/// `"auto"` or a fixed number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    Auto,
    Fixed(f64),
}

impl Serialize for Setting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Setting::Auto => s.serialize_str("auto"),
            Setting::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Setting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Wire {
            Number(f64),
            Text(String),
        }
        match Wire::deserialize(d)? {
            Wire::Number(v) => Ok(Setting::Fixed(v)),
            Wire::Text(t) if t == "auto" => Ok(Setting::Auto),
            Wire::Text(t) => Err(serde::de::Error::custom(format!("expected \"auto\" or a number, got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveParams {
    pub dt: Setting,
    pub cfl_safety: f64,
    /// Lax-Friedrichs coefficient θ; `Auto` uses `max |∂H/∂p_a|` per axis.
    pub artificial_viscosity: Setting,
    /// Defaults to `[T]` when empty. `t = 0` is always recorded.
    pub snapshot_times: Vec<f64>,
    /// Stationary solves: stop when the sup-residual drops below `tol`.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            dt: Setting::Auto,
            cfl_safety: 0.9,
            artificial_viscosity: Setting::Auto,
            snapshot_times: Vec::new(),
            tol: 1e-10,
            max_iters: 50_000_000,
        }
    }
}

impl SolveParams {
    pub fn at_times(times: &[f64]) -> Self {
        SolveParams {
            snapshot_times: times.to_vec(),
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidArgument(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety)));
        }
        for (name, s) in [("dt", self.dt), ("artificial_viscosity", self.artificial_viscosity)] {
            if let Setting::Fixed(v) = s {
                let ok = if name == "dt" { v > 0.0 } else { v >= 0.0 };
                if !ok || !v.is_finite() {
                    return Err(Error::InvalidArgument(format!("{name} must be \"auto\" or a valid number, got {v}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub steps: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Largest `dt · rate` over all steps; the scheme is monotone while ≤ 1.
    pub cfl_used: f64,
}

impl StepSummary {
    fn new() -> Self {
        StepSummary { steps: 0, dt_min: f64::INFINITY, dt_max: 0.0, cfl_used: 0.0 }
    }

    fn record(&mut self, dt: f64, rate: f64) {
        self.steps += 1;
        self.dt_min = self.dt_min.min(dt);
        self.dt_max = self.dt_max.max(dt);
        self.cfl_used = self.cfl_used.max(dt * rate);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub epsilon: f64,
    pub snapshots: Vec<(f64, GridFn)>,
    pub residual: Option<f64>,
    pub iterations: Option<usize>,
    pub steps: StepSummary,
}

#[derive(Serialize)]
struct Manifest<'a> {
    epsilon: f64,
    times: Vec<f64>,
    dt_history_summary: &'a StepSummary,
    cfl_used: f64,
    residual: Option<f64>,
    iterations: Option<usize>,
}

impl Solution {
    pub fn final_state(&self) -> &GridFn {
        &self.snapshots.last().expect("solutions carry at least one snapshot").1
    }

    pub fn at(&self, t: f64) -> Option<&GridFn> {
        self.snapshots.iter().find(|(s, _)| *s == t).map(|(_, u)| u)
    }

    /// Writes `snapshot_<k>.csv` per snapshot and `manifest.json`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (k, (_, u)) in self.snapshots.iter().enumerate() {
            let path = dir.join(format!("snapshot_{k}.csv"));
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            u.write_csv(std::io::BufWriter::new(file))?;
        }
        let manifest = Manifest {
            epsilon: self.epsilon,
            times: self.snapshots.iter().map(|(t, _)| *t).collect(),
            dt_history_summary: &self.steps,
            cfl_used: self.steps.cfl_used,
            residual: self.residual,
            iterations: self.iterations,
        };
        let path = dir.join("manifest.json");
        let mut file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::to_writer_pretty(&mut file, &manifest)?;
        file.write_all(b"\n").map_err(|e| Error::io(&path, e))
    }
}

enum HamNodes<'a> {
    Transport(Vec<[f64; 2]>),
    Eikonal(Vec<f64>),
    ForcedEikonal(Vec<f64>),
    Quadratic,
    Constant(f64),
    Custom(&'a HamiltonianSpec),
}

enum DiffNodes {
    Trace(Vec<f64>),
    Pucci { lambda: f64, big: f64 },
    Zero,
}

/// Stencils and per-node coefficients for one (problem, grid, ε).
struct Scheme<'a> {
    grid: Grid,
    h: f64,
    eps: f64,
    ham: HamNodes<'a>,
    diff: DiffNodes,
    /// `plus[a][i]`, `minus[a][i]`: periodic neighbours along axis `a`.
    plus: [Vec<u32>; 2],
    minus: [Vec<u32>; 2],
    coords: Vec<Point>,
    /// Fixed θ, or the p-independent part of the auto θ.
    theta_fixed: Option<[f64; 2]>,
    ellipticity: f64,
}

impl<'a> Scheme<'a> {
    fn new(ham: &'a HamiltonianSpec, diff: &DiffusionSpec, eps: f64, grid: &Grid, viscosity: Setting) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be nonnegative, got {eps}")));
        }
        let dim = grid.dim();
        let len = grid.len();
        if let HamiltonianKind::Transport { velocity } = &ham.kind {
            if velocity.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: velocity.len() });
            }
        }
        let l = grid.length();
        let coords: Vec<Point> = (0..len).map(|i| grid.coords(i)).collect();
        let on_nodes = |f: &Field| coords.iter().map(|x| f.eval(x, dim, l)).collect::<Vec<_>>();
        let hn = match &ham.kind {
            HamiltonianKind::Transport { velocity } => HamNodes::Transport(
                coords
                    .iter()
                    .map(|x| {
                        let mut c = [0.0; 2];
                        for (a, f) in velocity.iter().enumerate() {
                            c[a] = f.eval(x, dim, l);
                        }
                        c
                    })
                    .collect(),
            ),
            HamiltonianKind::Eikonal { speed } => HamNodes::Eikonal(on_nodes(speed)),
            HamiltonianKind::ForcedEikonal { forcing } => HamNodes::ForcedEikonal(on_nodes(forcing)),
            HamiltonianKind::Quadratic => HamNodes::Quadratic,
            HamiltonianKind::Constant { value } => HamNodes::Constant(*value),
            HamiltonianKind::CustomFirstOrder(_) => HamNodes::Custom(ham),
        };
        let dn = match &diff.kind {
            DiffusionKind::Laplacian => DiffNodes::Trace(vec![1.0; len]),
            DiffusionKind::ScaledTrace { coefficient } => DiffNodes::Trace(on_nodes(coefficient)),
            DiffusionKind::PucciMinus { lambda } => DiffNodes::Pucci { lambda: *lambda, big: diff.lambda_max },
            DiffusionKind::Zero => DiffNodes::Zero,
        };
        let ellipticity = match &dn {
            DiffNodes::Trace(a) => a.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            DiffNodes::Pucci { big, .. } => *big,
            DiffNodes::Zero => 0.0,
        };
        let mut plus = [Vec::new(), Vec::new()];
        let mut minus = [Vec::new(), Vec::new()];
        for a in 0..dim {
            plus[a] = (0..len).map(|i| grid.shift(i, a, 1) as u32).collect();
            minus[a] = (0..len).map(|i| grid.shift(i, a, -1) as u32).collect();
        }
        let theta_fixed = match viscosity {
            Setting::Fixed(v) => Some([v, v]),
            Setting::Auto => match &hn {
                HamNodes::Quadratic => None,
                _ => {
                    let mut th = [0.0f64; 2];
                    for (i, x) in coords.iter().enumerate() {
                        let lp = match &hn {
                            HamNodes::Transport(c) => [c[i][0].abs(), c[i][1].abs()],
                            HamNodes::Eikonal(s) => [s[i].abs(); 2],
                            _ => ham.p_lipschitz(x, &[0.0; 2], dim, l),
                        };
                        th[0] = th[0].max(lp[0]);
                        th[1] = th[1].max(lp[1]);
                    }
                    if dim == 1 {
                        th[1] = 0.0;
                    }
                    Some(th)
                }
            },
        };
        Ok(Scheme {
            grid: *grid,
            h: grid.spacing(),
            eps,
            ham: hn,
            diff: dn,
            plus,
            minus,
            coords,
            theta_fixed,
            ellipticity,
        })
    }

    fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// θ per axis for the current state.
    fn theta(&self, u: &[f64]) -> [f64; 2] {
        if let Some(th) = self.theta_fixed {
            return th;
        }
        // Quadratic: |∂H/∂p_a| = |p_a| over the one-sided differences.
        let mut th = [0.0f64; 2];
        for (a, t) in th.iter_mut().enumerate().take(self.dim()) {
            let p = &self.plus[a];
            *t = u
                .iter()
                .enumerate()
                .fold(0.0f64, |m, (i, v)| m.max((u[p[i] as usize] - v).abs()))
                / self.h;
        }
        th
    }

    /// Inverse of the monotonicity limit on the explicit step, so that the
    /// scheme is monotone when `dt · rate ≤ 1`.
    fn rate(&self, theta: &[f64; 2]) -> f64 {
        let d = self.dim() as f64;
        let first: f64 = theta[..self.dim()].iter().sum::<f64>() / self.h;
        first + 2.0 * d * self.eps * self.ellipticity / (self.h * self.h)
    }

    #[inline]
    fn node(&self, u: &[f64], i: usize, t: f64, theta: &[f64; 2]) -> f64 {
        let dim = self.dim();
        let h = self.h;
        let ui = u[i];
        let mut pc = [0.0; 2];
        let mut lf = 0.0;
        let mut second = [0.0; 2];
        for a in 0..dim {
            let up = u[self.plus[a][i] as usize];
            let um = u[self.minus[a][i] as usize];
            let dp = (up - ui) / h;
            let dm = (ui - um) / h;
            pc[a] = 0.5 * (dp + dm);
            lf += theta[a] * 0.5 * (dp - dm);
            second[a] = (up - 2.0 * ui + um) / (h * h);
        }
        let hv = match &self.ham {
            HamNodes::Transport(c) => c[i][0] * pc[0] + c[i][1] * pc[1],
            HamNodes::Eikonal(s) => s[i] * (pc[0] * pc[0] + pc[1] * pc[1]).sqrt(),
            HamNodes::ForcedEikonal(f) => (pc[0] * pc[0] + pc[1] * pc[1]).sqrt() - f[i],
            HamNodes::Quadratic => 0.5 * (pc[0] * pc[0] + pc[1] * pc[1]),
            HamNodes::Constant(c) => *c,
            HamNodes::Custom(spec) => spec.value(&self.coords[i], t, &pc[..dim], dim, self.grid.length()),
        };
        let fv = if self.eps == 0.0 {
            0.0
        } else {
            match &self.diff {
                DiffNodes::Trace(a) => a[i] * (second[0] + second[1]),
                DiffNodes::Pucci { lambda, big } => {
                    let mut m = SymMat::zero(dim);
                    m.xx = second[0];
                    if dim == 2 {
                        m.yy = second[1];
                        let pp = self.plus[1][self.plus[0][i] as usize] as usize;
                        let pm = self.minus[1][self.plus[0][i] as usize] as usize;
                        let mp = self.plus[1][self.minus[0][i] as usize] as usize;
                        let mm = self.minus[1][self.minus[0][i] as usize] as usize;
                        m.xy = (u[pp] - u[pm] - u[mp] + u[mm]) / (4.0 * h * h);
                    }
                    m.eigenvalues()
                        .into_iter()
                        .map(|e| if e > 0.0 { lambda * e } else { big * e })
                        .sum()
                }
                DiffNodes::Zero => 0.0,
            }
        };
        hv - lf - self.eps * fv
    }

    /// `out_i = H_num(u)_i − εF_h(u)_i`.
    fn apply(&self, u: &[f64], t: f64, theta: &[f64; 2], out: &mut [f64]) {
        if u.len() >= PARALLEL_NODES {
            out.par_iter_mut().enumerate().for_each(|(i, o)| *o = self.node(u, i, t, theta));
        } else {
            for (i, o) in out.iter_mut().enumerate() {
                *o = self.node(u, i, t, theta);
            }
        }
    }
}

fn snapshot_schedule(times: &[f64], horizon: f64) -> Result<Vec<f64>> {
    let mut ts: Vec<f64> = if times.is_empty() { vec![horizon] } else { times.to_vec() };
    for &t in &ts {
        if !(t >= 0.0 && t <= horizon) {
            return Err(Error::InvalidArgument(format!("snapshot time {t} outside [0, {horizon}]")));
        }
    }
    ts.push(0.0);
    ts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    ts.dedup();
    Ok(ts)
}

/// Solves the evolution problem from the sampled initial datum of `problem`.
pub fn solve_evolution(problem: &ProblemSpec, epsilon: f64, grid: &Grid, params: &SolveParams) -> Result<Solution> {
    let u0 = problem.initial(grid)?;
    solve_evolution_from(problem, epsilon, &u0, params)
}

/// Solves the evolution problem from explicit initial data.
pub fn solve_evolution_from(problem: &ProblemSpec, epsilon: f64, u0: &GridFn, params: &SolveParams) -> Result<Solution> {
    params.validate()?;
    let horizon = if problem.horizon > 0.0 { problem.horizon } else { params.snapshot_times.iter().cloned().fold(0.0, f64::max) };
    let schedule = snapshot_schedule(&params.snapshot_times, horizon)?;
    let scheme = Scheme::new(&problem.hamiltonian, &problem.diffusion, epsilon, u0.grid(), params.artificial_viscosity)?;
    let mut u = u0.values().to_vec();
    let mut work = vec![0.0; u.len()];
    let mut t = 0.0;
    let mut steps = StepSummary::new();
    let mut snapshots = Vec::with_capacity(schedule.len());
    for &target in &schedule {
        while t < target {
            let theta = scheme.theta(&u);
            let rate = scheme.rate(&theta);
            let limit = if rate > 0.0 { 1.0 / rate } else { f64::INFINITY };
            let dt = match params.dt {
                Setting::Fixed(dt) => {
                    if dt > limit {
                        return Err(Error::CflViolation { dt, limit });
                    }
                    dt
                }
                Setting::Auto => params.cfl_safety * limit,
            };
            let remaining = target - t;
            let (step, next) = if dt >= remaining * (1.0 - 1e-12) { (remaining, target) } else { (dt, t + dt) };
            scheme.apply(&u, t, &theta, &mut work);
            let mut finite = true;
            for (v, w) in u.iter_mut().zip(&work) {
                *v -= step * w;
                finite &= v.is_finite();
            }
            steps.record(step, rate);
            t = next;
            if !finite {
                return Err(Error::NonFinite { time: t, steps: steps.steps });
            }
        }
        snapshots.push((target, GridFn::from_parts_unchecked(*u0.grid(), u.clone())));
    }
    Ok(Solution {
        epsilon,
        snapshots,
        residual: None,
        iterations: None,
        steps,
    })
}

/// Damped pseudo-time iteration for `ρu + H − εF = 0`, started from the
/// sampled initial datum of `problem`.
pub fn solve_stationary(problem: &ProblemSpec, epsilon: f64, grid: &Grid, tol: f64, max_iters: usize) -> Result<Solution> {
    let params = SolveParams { tol, max_iters, ..Default::default() };
    let guess = problem.initial(grid)?;
    solve_stationary_from(problem, epsilon, &guess, &params)
}

pub fn solve_stationary_from(problem: &ProblemSpec, epsilon: f64, guess: &GridFn, params: &SolveParams) -> Result<Solution> {
    params.validate()?;
    let rho = problem.rho;
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("stationary solve needs rho > 0, got {rho}")));
    }
    if !(params.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {}", params.tol)));
    }
    let scheme = Scheme::new(&problem.hamiltonian, &problem.diffusion, epsilon, guess.grid(), params.artificial_viscosity)?;
    let mut u = guess.values().to_vec();
    let mut work = vec![0.0; u.len()];
    let mut steps = StepSummary::new();
    let mut history = Vec::new();
    let mut pseudo_time = 0.0;
    let record_every = (params.max_iters / 1000).max(1);
    for it in 0..=params.max_iters {
        let theta = scheme.theta(&u);
        let rate = scheme.rate(&theta) + rho;
        let limit = 1.0 / rate;
        let tau = match params.dt {
            Setting::Fixed(dt) => {
                if dt > limit {
                    return Err(Error::CflViolation { dt, limit });
                }
                dt
            }
            Setting::Auto => params.cfl_safety * limit,
        };
        scheme.apply(&u, 0.0, &theta, &mut work);
        let mut residual = 0.0f64;
        for (w, v) in work.iter_mut().zip(&u) {
            *w += rho * v;
            residual = residual.max(w.abs());
        }
        if !residual.is_finite() {
            return Err(Error::NonFinite { time: pseudo_time, steps: it });
        }
        if it % record_every == 0 {
            history.push(residual);
        }
        if residual < params.tol {
            return Ok(Solution {
                epsilon,
                snapshots: vec![(pseudo_time, GridFn::from_parts_unchecked(*guess.grid(), u))],
                residual: Some(residual),
                iterations: Some(it),
                steps,
            });
        }
        if it == params.max_iters {
            history.push(residual);
            return Err(Error::MaxIterations { iterations: it, residual, history });
        }
        for (v, w) in u.iter_mut().zip(&work) {
            *v -= tau * w;
        }
        steps.record(tau, rate);
        pseudo_time += tau;
    }
    unreachable!("loop returns on its last iteration")
}

fn hopf_lax_quadratic(u0: &GridFn, t: f64) -> GridFn {
    let grid = *u0.grid();
    let c = grid.spacing() * grid.spacing() / (2.0 * t);
    let f = u0.values();
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            // Minimise f_j + c·K_ij exactly; ties go to the smallest index.
            let mut best = 0usize;
            let mut best_k = grid.offset_sq(i, 0);
            for j in 1..f.len() {
                let k = grid.offset_sq(i, j);
                if cmp_penalized(-f[j], k, -f[best], best_k, c) == Ordering::Greater {
                    best = j;
                    best_k = k;
                }
            }
            f[best] + best_k as f64 * c
        })
        .collect();
    GridFn::from_parts_unchecked(grid, values)
}

fn hopf_lax_ball(u0: &GridFn, radius: f64) -> GridFn {
    let grid = *u0.grid();
    let h = grid.spacing();
    let reach = (radius / h).powi(2) * (1.0 + 4.0 * f64::EPSILON);
    let f = u0.values();
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            (0..f.len())
                .filter(|&j| grid.offset_sq(i, j) as f64 <= reach)
                .map(|j| f[j])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    GridFn::from_parts_unchecked(grid, values)
}

/// Grid Hopf-Lax formula for convex, x-independent Hamiltonians:
/// `|p|²/2` (minimum of `u₀(y) + dist(x,y)²/(2t)` over nodes), `a|p|` and
/// `|p| − f` with constant `a`, `f` (minimum over the ball of radius `a·t`),
/// and constant `H`.
pub fn hopf_lax(u0: &GridFn, hamiltonian: &HamiltonianSpec, t: f64) -> Result<GridFn> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    match &hamiltonian.kind {
        HamiltonianKind::Quadratic => Ok(hopf_lax_quadratic(u0, t)),
        HamiltonianKind::Eikonal { speed: Field::Constant { value } } if *value >= 0.0 => {
            Ok(hopf_lax_ball(u0, value * t))
        }
        HamiltonianKind::ForcedEikonal { forcing: Field::Constant { value } } => {
            hopf_lax_ball(u0, t).map(|v| v + value * t)
        }
        HamiltonianKind::Constant { value } => u0.map(|v| v - value * t),
        other => Err(Error::UnsupportedOracle(format!("Hopf-Lax for {other:?}"))),
    }
}

/// Exact inviscid solution at time `t`, where one is available: the
/// Hopf-Lax cases plus transport with constant velocity (exact
/// characteristics of a closed-form initial datum).
pub fn inviscid_oracle(problem: &ProblemSpec, grid: &Grid, t: f64) -> Result<GridFn> {
    if t == 0.0 {
        return problem.initial(grid);
    }
    if let HamiltonianKind::Transport { velocity } = &problem.hamiltonian.kind {
        let mut c = [0.0; 2];
        for (a, f) in velocity.iter().enumerate() {
            match f {
                Field::Constant { value } => c[a] = *value,
                _ => return Err(Error::UnsupportedOracle("transport with variable velocity".into())),
            }
        }
        let crate::operators::InitialData::Field(u0) = &problem.u0 else {
            return Err(Error::UnsupportedOracle("transport of sampled initial data".into()));
        };
        let dim = grid.dim();
        let l = grid.length();
        return GridFn::from_fn(*grid, |x| {
            let mut y = [0.0; 2];
            for a in 0..dim {
                y[a] = (x[a] - c[a] * t).rem_euclid(l);
            }
            u0.eval(&y, dim, l)
        });
    }
    hopf_lax(&problem.initial(grid)?, &problem.hamiltonian, t)
}

fn wavenumber(k: usize, n: usize, length: f64) -> f64 {
    let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    2.0 * std::f64::consts::PI * signed / length
}

/// Spectral solution of `∂_t u = ε·s·Δu`: each Fourier mode is damped by
/// `exp(−ε s |ξ_k|² t)`.
pub fn heat_exact(u0: &GridFn, epsilon: f64, lambda_scale: f64, t: f64) -> Result<GridFn> {
    for (name, v) in [("epsilon", epsilon), ("Lambda_scale", lambda_scale), ("t", t)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be nonnegative, got {v}")));
        }
    }
    let rate = epsilon * lambda_scale * t;
    if rate == 0.0 {
        return Ok(u0.clone());
    }
    let grid = *u0.grid();
    let n = grid.points_per_axis();
    let l = grid.length();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut data: Vec<Complex<f64>> = u0.values().iter().map(|&v| Complex::new(v, 0.0)).collect();
    match grid.dim() {
        1 => {
            fwd.process(&mut data);
            for (k, z) in data.iter_mut().enumerate() {
                *z *= (-rate * wavenumber(k, n, l).powi(2)).exp();
            }
            inv.process(&mut data);
        }
        _ => {
            let mut column = vec![Complex::new(0.0, 0.0); n];
            fwd.process(&mut data);
            for j in 0..n {
                for i in 0..n {
                    column[i] = data[i * n + j];
                }
                fwd.process(&mut column);
                for i in 0..n {
                    data[i * n + j] = column[i];
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let xi2 = wavenumber(i, n, l).powi(2) + wavenumber(j, n, l).powi(2);
                    data[i * n + j] *= (-rate * xi2).exp();
                }
            }
            for j in 0..n {
                for i in 0..n {
                    column[i] = data[i * n + j];
                }
                inv.process(&mut column);
                for i in 0..n {
                    data[i * n + j] = column[i];
                }
            }
            inv.process(&mut data);
        }
    }
    let scale = 1.0 / grid.len() as f64;
    GridFn::new(grid, data.iter().map(|z| z.re * scale).collect())
}

/// [`heat_exact`] for a constant-coefficient trace operator.
pub fn heat_exact_for(diffusion: &DiffusionSpec, u0: &GridFn, epsilon: f64, t: f64) -> Result<GridFn> {
    let scale = diffusion
        .constant_trace_scale()
        .ok_or_else(|| Error::UnsupportedOracle("spectral heat flow needs a constant-coefficient trace operator".into()))?;
    heat_exact(u0, epsilon, scale, t)
}

/// Finest-grid solution restricted to the base grid plus the observed
/// grid-convergence increments.
#[derive(Debug, Clone, PartialEq)]
pub struct RichardsonReference {
    pub snapshots: Vec<(f64, GridFn)>,
    /// `increments[k][s]`: `‖u_{2^{k+1}N} − u_{2^k N}‖_∞` on the base grid at snapshot `s`.
    pub increments: Vec<Vec<f64>>,
    /// Finest increment per snapshot, used as the discretization-error proxy.
    pub error_estimate: Vec<f64>,
}

impl RichardsonReference {
    pub fn proxy_at(&self, t: f64) -> Option<f64> {
        self.snapshots.iter().position(|(s, _)| *s == t).map(|k| self.error_estimate[k])
    }
}

/// Solves on `N, 2N, …, 2^refinements N` and restricts to `base_grid`.
/// Stationary problems use `params.tol` and `params.max_iters`.
pub fn richardson_reference(
    problem: &ProblemSpec,
    epsilon: f64,
    base_grid: &Grid,
    refinements: usize,
    params: &SolveParams,
) -> Result<RichardsonReference> {
    if refinements < 2 {
        return Err(Error::InvalidArgument(format!("refinements must be at least 2, got {refinements}")));
    }
    let mut levels: Vec<Vec<(f64, GridFn)>> = Vec::with_capacity(refinements + 1);
    for k in 0..=refinements {
        let grid = base_grid.with_points(base_grid.points_per_axis() << k)?;
        let sol = if problem.is_stationary() {
            let guess = problem.initial(&grid)?;
            solve_stationary_from(problem, epsilon, &guess, params)?
        } else {
            solve_evolution(problem, epsilon, &grid, params)?
        };
        let restricted = sol
            .snapshots
            .into_iter()
            .map(|(t, u)| Ok((t, u.restrict(base_grid)?)))
            .collect::<Result<Vec<_>>>()?;
        levels.push(restricted);
    }
    let mut increments = Vec::with_capacity(refinements);
    for pair in levels.windows(2) {
        increments.push(
            pair[0]
                .iter()
                .zip(&pair[1])
                .map(|((_, a), (_, b))| sup_norm_diff(a, b))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let error_estimate = increments.last().cloned().unwrap_or_default();
    let mut snapshots = levels.pop().expect("at least three levels");
    if problem.is_stationary() {
        // Pseudo-times differ between levels; report the stationary state only.
        snapshots.iter_mut().for_each(|(t, _)| *t = 0.0);
    }
    Ok(RichardsonReference { snapshots, increments, error_estimate })
}
