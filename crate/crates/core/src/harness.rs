//! ε-sweeps that compare viscous solutions against inviscid references,
//! evaluate the matching error bound per row, fit the empirical rate, and
//! write report files.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    bound_rhs, build_ledger, build_stationary_ledger, heat_bound, Provenance, RateLedger, SeminormTrace,
    StationaryLedger,
};
use crate::envelope::{check_section2_bounds, check_semiconvexity, inf_convolution, sup_convolution, Section2Report, SemiconvexityReport};
use crate::error::{Error, Result};
use crate::grid::{fmt_real, holder_seminorm, sup_norm_diff, Grid, GridFn, HolderClass};
use crate::operators::{certify_diffusion, certify_hamiltonian, Certificate, Field, ProblemConfig, ProblemSpec};
use crate::solver::{
    inviscid_oracle, richardson_reference, solve_evolution, solve_stationary_from, SolveParams,
};

/// Rows with `sup_error ≤ CONTAMINATION_FACTOR · proxy` are excluded from fits.
pub const CONTAMINATION_FACTOR: f64 = 3.0;
/// A row satisfies its bound when `sup_error ≤ bound + BOUND_SLACK_FACTOR · proxy`.
pub const BOUND_SLACK_FACTOR: f64 = 3.0;
/// Fitted rates may fall below the theoretical exponent by at most this much.
pub const RATE_TOLERANCE: f64 = 0.1;
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRange {
    pub eps_max: f64,
    pub eps_min: f64,
    pub count: usize,
}

impl EpsilonRange {
    /// Geometric sequence from `eps_min` up to `eps_max`.
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.eps_min > 0.0 && self.eps_max >= self.eps_min && self.eps_max.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < eps_min <= eps_max, got [{}, {}]",
                self.eps_min, self.eps_max
            )));
        }
        if self.count < MIN_FIT_POINTS {
            return Err(Error::Config(format!("epsilon count must be at least {MIN_FIT_POINTS}, got {}", self.count)));
        }
        let ratio = (self.eps_max / self.eps_min).ln() / (self.count - 1) as f64;
        Ok((0..self.count)
            .map(|k| {
                if k == 0 {
                    self.eps_min
                } else if k == self.count - 1 {
                    self.eps_max
                } else {
                    self.eps_min * (ratio * k as f64).exp()
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    Oracle,
    Richardson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// The general evolution or stationary estimate.
    #[default]
    Theorem,
    /// `4‖Du₀‖√(εt) + C_F tε` for pure diffusion.
    Heat,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(default)]
    pub problem: Option<ProblemConfig>,
    /// Used when `problem` is absent; relative paths resolve against the config file.
    #[serde(default)]
    pub problem_path: Option<PathBuf>,
    pub epsilons: EpsilonRange,
    pub reference: ReferenceKind,
    /// Defaults to `[T]`; ignored by stationary sweeps.
    #[serde(default)]
    pub eval_times: Vec<f64>,
    /// Points per axis of the viscous solves; defaults to the problem grid.
    #[serde(default)]
    pub grids: Vec<usize>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub bound: BoundKind,
    /// Measure `[u]_α` from the reference instead of using `u_holder.seminorm`.
    #[serde(default)]
    pub measure_holder: bool,
    /// Richardson references: points per axis of the finest solve.
    #[serde(default)]
    pub reference_points: Option<usize>,
    #[serde(default)]
    pub solver: SolveParams,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl SweepConfig {
    pub fn from_json_value(value: serde_json::Value, base_dir: Option<&Path>) -> Result<(Self, ProblemSpec)> {
        let mut cfg: SweepConfig = serde_json::from_value(value)?;
        let problem = match (&cfg.problem, &cfg.problem_path) {
            (Some(p), _) => p.clone(),
            (None, Some(path)) => {
                let full = match base_dir {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                let text = std::fs::read_to_string(&full).map_err(|e| Error::io(&full, e))?;
                let p: ProblemConfig = serde_json::from_str(&text)?;
                cfg.problem = Some(p.clone());
                p
            }
            (None, None) => return Err(Error::Config("config needs `problem` or `problem_path`".into())),
        };
        let spec = ProblemSpec::try_from(problem)?;
        if let Ok(seed) = std::env::var("HJRATE_SEED") {
            cfg.seed = seed
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("HJRATE_SEED must be an unsigned integer, got {seed:?}")))?;
        }
        Ok((cfg, spec))
    }

    fn solve_grids(&self, problem: &ProblemSpec) -> Result<Vec<Grid>> {
        if self.grids.is_empty() {
            return Ok(vec![problem.grid]);
        }
        self.grids.iter().map(|&n| problem.grid.with_points(n)).collect()
    }

    fn eval_times(&self, problem: &ProblemSpec) -> Result<Vec<f64>> {
        let mut ts = if self.eval_times.is_empty() { vec![problem.horizon] } else { self.eval_times.clone() };
        ts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        ts.dedup();
        for &t in &ts {
            if !(t > 0.0 && t <= problem.horizon) {
                return Err(Error::Config(format!("eval time {t} outside (0, {}]", problem.horizon)));
            }
        }
        Ok(ts)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = self.workers {
            if w == 0 {
                return Err(Error::Config("workers must be at least 1".into()));
            }
            b = b.num_threads(w);
        }
        b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    /// `None` for stationary problems.
    pub time: Option<f64>,
    pub points: usize,
    pub sup_error: f64,
    pub bound_rhs: f64,
    pub discretization_proxy: f64,
    pub contaminated: bool,
    pub bound_satisfied: bool,
}

impl SweepRow {
    fn new(epsilon: f64, time: Option<f64>, points: usize, sup_error: f64, bound: f64, proxy: f64) -> Self {
        SweepRow {
            epsilon,
            time,
            points,
            sup_error,
            bound_rhs: bound,
            discretization_proxy: proxy,
            contaminated: sup_error <= CONTAMINATION_FACTOR * proxy,
            bound_satisfied: sup_error <= bound + BOUND_SLACK_FACTOR * proxy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// `slope ± 2·stderr`.
    pub interval: [f64; 2],
    pub points: usize,
}

/// Ordinary least squares of `log error` on `log ε`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(e, r)| *e > 0.0 && *r > 0.0 && e.is_finite() && r.is_finite())
        .map(|(e, r)| (e.ln(), r.ln()))
        .collect();
    if usable.len() < MIN_FIT_POINTS || usable.len() != points.len() {
        return Err(Error::InsufficientPoints { needed: MIN_FIT_POINTS, got: usable.len() });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all epsilons coincide".into()));
    }
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = usable.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (sse / (n - 2.0) / sxx).sqrt();
    Ok(RateFit {
        slope,
        intercept,
        stderr,
        interval: [slope - 2.0 * stderr, slope + 2.0 * stderr],
        points: usable.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LedgerRecord {
    Evolution(RateLedger),
    Stationary(StationaryLedger),
    Heat {
        lipschitz_u0: f64,
        #[serde(rename = "C_F")]
        c_f: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub stationary: bool,
    pub epsilons: EpsilonRange,
    pub reference: ReferenceKind,
    pub bound: BoundKind,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
    pub fitted_rate: Option<RateFit>,
    /// Time and resolution of the rows used for the fit.
    pub fit_time: Option<f64>,
    pub fit_points: Option<usize>,
    pub fit_unavailable: Option<String>,
    pub theoretical_exponent: f64,
    /// `fitted slope ≥ theoretical exponent − RATE_TOLERANCE`, when a fit exists.
    pub rate_consistent: Option<bool>,
    /// Every uncontaminated row satisfies its bound.
    pub bounds_hold: bool,
    pub ledger: LedgerRecord,
    pub notes: Vec<String>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.bounds_hold && self.rate_consistent != Some(false)
    }
}

fn wrap(epsilon: f64, points: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Solve { epsilon, points, source: Box::new(e) }
}

fn finalize(
    mut rows: Vec<SweepRow>,
    stationary: bool,
    config: &SweepConfig,
    theoretical_exponent: f64,
    ledger: LedgerRecord,
    mut notes: Vec<String>,
) -> SweepReport {
    rows.sort_by(|a, b| {
        (a.points, a.time.unwrap_or(0.0), a.epsilon)
            .partial_cmp(&(b.points, b.time.unwrap_or(0.0), b.epsilon))
            .expect("finite")
    });
    let fit_points = rows.iter().map(|r| r.points).max();
    let fit_time = rows.iter().filter(|r| Some(r.points) == fit_points).filter_map(|r| r.time).fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.max(t))));
    let selected: Vec<&SweepRow> = rows
        .iter()
        .filter(|r| Some(r.points) == fit_points && r.time == fit_time && !r.contaminated)
        .collect();
    let contaminated = rows.iter().filter(|r| r.contaminated).count();
    if contaminated > 0 {
        notes.push(format!("{contaminated} row(s) within {CONTAMINATION_FACTOR}x of the discretization proxy excluded from the fit"));
    }
    let (fitted_rate, fit_unavailable) = match fit_rate(&selected.iter().map(|r| (r.epsilon, r.sup_error)).collect::<Vec<_>>()) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let rate_consistent = fitted_rate.map(|f| f.slope >= theoretical_exponent - RATE_TOLERANCE);
    let bounds_hold = rows.iter().filter(|r| !r.contaminated).all(|r| r.bound_satisfied);
    notes.push(format!(
        "epsilon range [{}, {}] with {} points; sharpness of the exponent is not tested (the estimate is an upper bound)",
        config.epsilons.eps_min, config.epsilons.eps_max, config.epsilons.count
    ));
    SweepReport {
        stationary,
        epsilons: config.epsilons,
        reference: config.reference,
        bound: config.bound,
        seed: config.seed,
        rows,
        fitted_rate,
        fit_time,
        fit_points,
        fit_unavailable,
        theoretical_exponent,
        rate_consistent,
        bounds_hold,
        ledger,
        notes,
    }
}

/// Reference snapshots on `grid` at `times`, with their discretization proxy.
fn evolution_reference(
    problem: &ProblemSpec,
    config: &SweepConfig,
    grid: &Grid,
    times: &[f64],
) -> Result<Vec<(f64, GridFn, f64)>> {
    match config.reference {
        ReferenceKind::Oracle => times
            .iter()
            .map(|&t| Ok((t, inviscid_oracle(problem, grid, t)?, 0.0)))
            .collect(),
        ReferenceKind::Richardson => {
            let levels = refinement_levels(config, grid)?;
            let params = SolveParams { snapshot_times: times.to_vec(), ..config.solver.clone() };
            let r = richardson_reference(problem, 0.0, grid, levels, &params).map_err(wrap(0.0, grid.points_per_axis() << levels))?;
            Ok(times
                .iter()
                .map(|&t| {
                    let k = r.snapshots.iter().position(|(s, _)| *s == t).expect("requested snapshot");
                    (t, r.snapshots[k].1.clone(), r.error_estimate[k])
                })
                .collect())
        }
    }
}

fn refinement_levels(config: &SweepConfig, grid: &Grid) -> Result<usize> {
    let n = grid.points_per_axis();
    match config.reference_points {
        None => Ok(2),
        Some(m) => {
            if m % n != 0 || !(m / n).is_power_of_two() || m / n < 4 {
                return Err(Error::Config(format!(
                    "reference_points = {m} must be N·2^k with k >= 2 for N = {n}"
                )));
            }
            Ok((m / n).trailing_zeros() as usize)
        }
    }
}

/// Viscous solution on `grid` at `times` and `‖u_N − u_{N/2}‖_∞` per time.
fn viscous_with_proxy(problem: &ProblemSpec, eps: f64, grid: &Grid, times: &[f64], params: &SolveParams) -> Result<Vec<(GridFn, f64)>> {
    let params = SolveParams { snapshot_times: times.to_vec(), ..params.clone() };
    let fine = solve_evolution(problem, eps, grid, &params)?;
    let coarse_grid = grid.with_points(grid.points_per_axis() / 2)?;
    let coarse = solve_evolution(problem, eps, &coarse_grid, &params)?;
    times
        .iter()
        .map(|&t| {
            let f = fine.at(t).expect("requested snapshot");
            let c = coarse.at(t).expect("requested snapshot");
            Ok((f.clone(), sup_norm_diff(&f.restrict(&coarse_grid)?, c)?))
        })
        .collect()
}

pub fn run_sweep(config: &SweepConfig, problem: &ProblemSpec) -> Result<SweepReport> {
    if problem.is_stationary() {
        return Err(Error::Config("problem has rho > 0; use the stationary sweep".into()));
    }
    let epsilons = config.epsilons.values()?;
    let times = config.eval_times(problem)?;
    let grids = config.solve_grids(problem)?;
    let pool = config.pool()?;
    let mut notes = Vec::new();

    // Ledger from the declared or measured seminorm trace.
    let finest = *grids.iter().max_by_key(|g| g.points_per_axis()).expect("at least one grid");
    let mut references = Vec::with_capacity(grids.len());
    for g in &grids {
        references.push(pool.install(|| evolution_reference(problem, config, g, &times))?);
    }
    let ledger = match config.bound {
        BoundKind::Heat => {
            if problem.u0_holder.alpha() != 1.0 {
                return Err(Error::Config("the heat bound needs a Lipschitz initial datum (eta = 1)".into()));
            }
            LedgerRecord::Heat { lipschitz_u0: problem.u0_holder.seminorm(), c_f: problem.diffusion.c_f }
        }
        BoundKind::Theorem => {
            let trace = if config.measure_holder {
                let fine_ref = &references[grids.iter().position(|g| *g == finest).expect("finest grid")];
                let alpha = problem.u_holder.alpha();
                let mut ts = vec![0.0];
                let mut vs = vec![holder_seminorm(&problem.initial(&finest)?, alpha)?];
                for (t, u, _) in fine_ref {
                    ts.push(*t);
                    vs.push(holder_seminorm(u, alpha)?);
                }
                notes.push(format!("[u(s)]_alpha measured from the reference at alpha = {alpha}"));
                SeminormTrace::new(ts, vs, Provenance::Measured)?
            } else {
                SeminormTrace::constant(problem.u_holder.seminorm(), problem.horizon)
            };
            let l = build_ledger(problem, &trace)?;
            if l.integrability_flagged {
                notes.push("seminorm trace grows towards s = 0; integrability assessed numerically only".into());
            }
            LedgerRecord::Evolution(l)
        }
    };
    let bound_at = |t: f64, eps: f64| -> Result<f64> {
        match &ledger {
            LedgerRecord::Evolution(l) => bound_rhs(l, t, eps),
            LedgerRecord::Heat { lipschitz_u0, c_f } => heat_bound(*lipschitz_u0, *c_f, t, eps),
            LedgerRecord::Stationary(_) => unreachable!("evolution sweep"),
        }
    };
    let theoretical = match &ledger {
        LedgerRecord::Evolution(l) => l.exponent,
        _ => 0.5,
    };

    let jobs: Vec<(usize, f64)> = (0..grids.len()).flat_map(|g| epsilons.iter().map(move |&e| (g, e))).collect();
    let results: Vec<Result<Vec<SweepRow>>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(gi, eps)| {
                let grid = &grids[gi];
                let n = grid.points_per_axis();
                let sols = viscous_with_proxy(problem, eps, grid, &times, &config.solver).map_err(wrap(eps, n))?;
                sols.iter()
                    .zip(&references[gi])
                    .map(|((u, proxy), (t, reference, ref_proxy))| {
                        let err = sup_norm_diff(u, reference)?;
                        Ok(SweepRow::new(eps, Some(*t), n, err, bound_at(*t, eps)?, proxy + ref_proxy))
                    })
                    .collect()
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(finalize(rows, false, config, theoretical, ledger, notes))
}

fn stationary_solve(problem: &ProblemSpec, eps: f64, grid: &Grid, params: &SolveParams) -> Result<(GridFn, f64)> {
    let guess = problem.initial(grid)?;
    let sol = solve_stationary_from(problem, eps, &guess, params)?;
    let residual = sol.residual.unwrap_or(0.0);
    Ok((sol.snapshots.into_iter().last().expect("one state").1, residual))
}

pub fn run_stationary_sweep(config: &SweepConfig, problem: &ProblemSpec) -> Result<SweepReport> {
    if !problem.is_stationary() {
        return Err(Error::Config("stationary sweep needs rho > 0".into()));
    }
    if config.bound == BoundKind::Heat {
        return Err(Error::Config("the heat bound applies to evolution problems only".into()));
    }
    let epsilons = config.epsilons.values()?;
    let grids = config.solve_grids(problem)?;
    let pool = config.pool()?;
    let rho = problem.rho;
    let mut notes = Vec::new();

    let finest = *grids.iter().max_by_key(|g| g.points_per_axis()).expect("at least one grid");
    // Reference restricted to the finest sweep grid, its proxy, and the full-resolution reference.
    let (reference, ref_proxy, full): (GridFn, f64, GridFn) = match config.reference {
        ReferenceKind::Oracle => match &problem.hamiltonian.kind {
            crate::operators::HamiltonianKind::Constant { value } if problem.diffusion.c_f == 0.0 => {
                notes.push("reference: exact constant solution -H/rho".into());
                let u = GridFn::constant(finest, -value / rho)?;
                (u.clone(), 0.0, u)
            }
            other => return Err(Error::UnsupportedOracle(format!("stationary solution for {other:?}"))),
        },
        ReferenceKind::Richardson => {
            let levels = refinement_levels(config, &finest)?;
            let fine_n = finest.points_per_axis() << levels;
            let fine_grid = finest.with_points(fine_n)?;
            let half_grid = finest.with_points(fine_n / 2)?;
            let (fine, half) = pool.install(|| {
                rayon::join(
                    || stationary_solve(problem, 0.0, &fine_grid, &config.solver),
                    || stationary_solve(problem, 0.0, &half_grid, &config.solver),
                )
            });
            let (uf, rf) = fine.map_err(wrap(0.0, fine_n))?;
            let (uh, rh) = half.map_err(wrap(0.0, fine_n / 2))?;
            let a = uf.restrict(&finest)?;
            let b = uh.restrict(&finest)?;
            let proxy = sup_norm_diff(&a, &b)? + (rf + rh) / rho;
            notes.push(format!("reference: inviscid stationary solve at N = {fine_n}"));
            (a, proxy, uf)
        }
    };
    let alpha = problem.u_holder.alpha();
    let (seminorm, provenance) = if config.measure_holder {
        notes.push(format!("[u]_alpha measured from the reference at alpha = {alpha}"));
        (holder_seminorm(&full, alpha)?, Provenance::Measured)
    } else {
        (problem.u_holder.seminorm(), Provenance::Declared)
    };
    let ledger = build_stationary_ledger(problem, seminorm, provenance)?;
    let references: Vec<GridFn> = grids.iter().map(|g| reference.restrict(g)).collect::<Result<_>>()?;

    let jobs: Vec<(usize, f64)> = (0..grids.len()).flat_map(|g| epsilons.iter().map(move |&e| (g, e))).collect();
    let results: Vec<Result<SweepRow>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(gi, eps)| {
                let grid = &grids[gi];
                let n = grid.points_per_axis();
                let coarse_grid = grid.with_points(n / 2)?;
                let ((u, r), (uc, rc)) = {
                    let (a, b) = rayon::join(
                        || stationary_solve(problem, eps, grid, &config.solver),
                        || stationary_solve(problem, eps, &coarse_grid, &config.solver),
                    );
                    (a.map_err(wrap(eps, n))?, b.map_err(wrap(eps, n / 2))?)
                };
                let proxy = sup_norm_diff(&u.restrict(&coarse_grid)?, &uc)? + (r + rc) / rho;
                let err = sup_norm_diff(&u, &references[gi])?;
                Ok(SweepRow::new(eps, None, n, err, crate::bounds::stationary_bound(&ledger, eps)?, proxy + ref_proxy))
            })
            .collect()
    });
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    let exponent = ledger.exponent;
    Ok(finalize(rows, true, config, exponent, LedgerRecord::Stationary(ledger), notes))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn rows_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "epsilon",
        "time",
        "points",
        "sup_error",
        "bound_rhs",
        "discretization_proxy",
        "contaminated",
        "bound_satisfied",
    ])?;
    for r in rows {
        w.write_record([
            fmt_real(r.epsilon),
            r.time.map(fmt_real).unwrap_or_default(),
            r.points.to_string(),
            fmt_real(r.sup_error),
            fmt_real(r.bound_rhs),
            fmt_real(r.discretization_proxy),
            r.contaminated.to_string(),
            r.bound_satisfied.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))
}

fn log10_or_nan(v: f64) -> String {
    if v > 0.0 {
        format!("{:.10}", v.log10())
    } else {
        "nan".into()
    }
}

pub fn plot_data(rows: &[SweepRow]) -> String {
    let mut out = String::from("# log10_epsilon log10_sup_error log10_bound time points\n");
    for r in rows {
        out.push_str(&format!(
            "{} {} {} {} {}\n",
            log10_or_nan(r.epsilon),
            log10_or_nan(r.sup_error),
            log10_or_nan(r.bound_rhs),
            r.time.map(|t| t.to_string()).unwrap_or_else(|| "-".into()),
            r.points
        ));
    }
    out
}

/// Writes `report.json`, `sweep.csv` and `plot.dat` into `output_dir`.
pub fn emit_report(report: &SweepReport, output_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let mut json = serde_json::to_vec_pretty(report)?;
    json.push(b'\n');
    write_atomic(&output_dir.join("report.json"), &json)?;
    write_atomic(&output_dir.join("sweep.csv"), &rows_csv(&report.rows)?)?;
    write_atomic(&output_dir.join("plot.dat"), plot_data(&report.rows).as_bytes())
}

pub fn read_report(path: &Path) -> Result<SweepReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub hamiltonian: Certificate,
    pub diffusion: Certificate,
}

impl CertifyReport {
    pub fn passed(&self) -> bool {
        self.hamiltonian.passed() && self.diffusion.passed()
    }
}

pub fn run_certify(problem: &ProblemSpec, samples: usize, seed: u64) -> Result<CertifyReport> {
    Ok(CertifyReport {
        hamiltonian: certify_hamiltonian(&problem.hamiltonian, &problem.grid, samples, seed)?,
        diffusion: certify_diffusion(&problem.diffusion, &problem.grid, samples, seed.wrapping_add(1))?,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeCheckConfig {
    pub grid: Grid,
    pub function: Field,
    pub alpha: f64,
    /// Measured when absent.
    #[serde(default)]
    pub seminorm: Option<f64>,
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheckEntry {
    pub delta: f64,
    pub section2: Section2Report,
    pub semiconvexity_sup: SemiconvexityReport,
    pub semiconvexity_inf: SemiconvexityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheckReport {
    pub alpha: f64,
    pub seminorm: f64,
    pub seminorm_provenance: Provenance,
    pub entries: Vec<EnvelopeCheckEntry>,
}

impl EnvelopeCheckReport {
    pub fn passed(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.section2.all_passed() && e.semiconvexity_sup.passed && e.semiconvexity_inf.passed)
    }
}

/// Runs the envelope bound suite; with `out`, also writes the envelopes as
/// CSV plus a JSON sidecar per `δ`.
pub fn run_envelope_check(config: &EnvelopeCheckConfig, out: Option<&Path>) -> Result<EnvelopeCheckReport> {
    let f = config.function.sample(&config.grid)?;
    let (seminorm, seminorm_provenance) = match config.seminorm {
        Some(s) => (s, Provenance::Declared),
        None => (holder_seminorm(&f, config.alpha)?, Provenance::Measured),
    };
    let holder = HolderClass::new(config.alpha, seminorm)?;
    let mut entries = Vec::with_capacity(config.deltas.len());
    for (k, &delta) in config.deltas.iter().enumerate() {
        let section2 = check_section2_bounds(&f, &holder, delta)?;
        let sup = sup_convolution(&f, delta)?;
        let inf = inf_convolution(&f, delta)?;
        let entry = EnvelopeCheckEntry {
            delta,
            section2,
            semiconvexity_sup: check_semiconvexity(&sup),
            semiconvexity_inf: check_semiconvexity(&inf),
        };
        if let Some(dir) = out {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            for (env, name) in [(&sup, "sup"), (&inf, "inf")] {
                let mut buf = Vec::new();
                env.write_csv(&mut buf)?;
                write_atomic(&dir.join(format!("envelope_{k}_{name}.csv")), &buf)?;
            }
            let sidecar = serde_json::json!({
                "delta": delta,
                "kind": ["sup", "inf"],
                "checks": {
                    "section2": &entry.section2,
                    "semiconvexity_sup": &entry.semiconvexity_sup,
                    "semiconvexity_inf": &entry.semiconvexity_inf,
                }
            });
            let mut bytes = serde_json::to_vec_pretty(&sidecar)?;
            bytes.push(b'\n');
            write_atomic(&dir.join(format!("envelope_{k}.json")), &bytes)?;
        }
        entries.push(entry);
    }
    Ok(EnvelopeCheckReport { alpha: config.alpha, seminorm, seminorm_provenance, entries })
}
