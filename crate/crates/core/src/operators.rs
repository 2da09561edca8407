//! Catalog of Hamiltonians `H(x, t, p, M)` and viscosity operators
//! `F(x, t, M)` with their declared structural constants, random audits of
//! those constants, and the problem description that ties them together.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn, HolderClass, Point};

/// Symmetric `d×d` matrix, `d ∈ {1, 2}`. Unused entries are zero in 1D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat {
    pub dim: usize,
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymMat {
    pub fn zero(dim: usize) -> Self {
        SymMat {
            dim,
            xx: 0.0,
            xy: 0.0,
            yy: 0.0,
        }
    }

    pub fn identity(dim: usize) -> Self {
        SymMat {
            dim,
            xx: 1.0,
            xy: 0.0,
            yy: if dim == 2 { 1.0 } else { 0.0 },
        }
    }

    pub fn diag(entries: &[f64]) -> Result<Self> {
        match entries {
            [a] => Ok(SymMat { dim: 1, xx: *a, xy: 0.0, yy: 0.0 }),
            [a, b] => Ok(SymMat { dim: 2, xx: *a, xy: 0.0, yy: *b }),
            _ => Err(Error::InvalidArgument(format!(
                "diagonal must have 1 or 2 entries, got {}",
                entries.len()
            ))),
        }
    }

    /// Builds from full rows; rejects non-symmetric input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        match rows.len() {
            1 if rows[0].len() == 1 => Ok(SymMat { dim: 1, xx: rows[0][0], xy: 0.0, yy: 0.0 }),
            2 if rows[0].len() == 2 && rows[1].len() == 2 => {
                if rows[0][1] != rows[1][0] {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not symmetric: {} != {}",
                        rows[0][1], rows[1][0]
                    )));
                }
                Ok(SymMat { dim: 2, xx: rows[0][0], xy: rows[0][1], yy: rows[1][1] })
            }
            _ => Err(Error::InvalidArgument("matrix must be 1x1 or 2x2".into())),
        }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn add(&self, other: &SymMat) -> SymMat {
        SymMat {
            dim: self.dim,
            xx: self.xx + other.xx,
            xy: self.xy + other.xy,
            yy: self.yy + other.yy,
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim == 1 {
            return vec![self.xx];
        }
        let mean = 0.5 * (self.xx + self.yy);
        let r = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        vec![mean - r, mean + r]
    }
}

/// Closed-form periodic profiles used for coefficients and initial data.
/// In 2D a profile is summed over both axes; `s = x_a / L` is the unit-period
/// coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Field {
    Constant { value: f64 },
    /// `offset + amplitude · Σ cos(2π k s)`
    Cosine {
        amplitude: f64,
        #[serde(default = "one")]
        wavenumber: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `offset + amplitude · Σ sin(2π k s)`
    Sine {
        amplitude: f64,
        #[serde(default = "one")]
        wavenumber: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `offset + amplitude · Σ L·dist(s, ℤ)`: slope `±amplitude`, kinks at `0` and `L/2`.
    Triangle {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `offset + amplitude · Σ |sin(π k s)|^exponent`
    AbsSinePower {
        #[serde(default = "one")]
        amplitude: f64,
        exponent: f64,
        #[serde(default = "one")]
        wavenumber: f64,
        #[serde(default)]
        offset: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Field {
    pub fn eval(&self, x: &[f64], dim: usize, length: f64) -> f64 {
        use std::f64::consts::PI;
        let sum = |g: &dyn Fn(f64) -> f64| (0..dim).map(|a| g(x[a] / length)).sum::<f64>();
        match *self {
            Field::Constant { value } => value,
            Field::Cosine { amplitude, wavenumber, offset } => {
                offset + amplitude * sum(&|s| (2.0 * PI * wavenumber * s).cos())
            }
            Field::Sine { amplitude, wavenumber, offset } => {
                offset + amplitude * sum(&|s| (2.0 * PI * wavenumber * s).sin())
            }
            Field::Triangle { amplitude, offset } => {
                offset
                    + amplitude
                        * sum(&|s| {
                            let r = s.rem_euclid(1.0);
                            length * r.min(1.0 - r)
                        })
            }
            Field::AbsSinePower { amplitude, exponent, wavenumber, offset } => {
                offset + amplitude * sum(&|s| (PI * wavenumber * s).sin().abs().powf(exponent))
            }
        }
    }

    pub fn sample(&self, grid: &Grid) -> Result<GridFn> {
        GridFn::from_fn(*grid, |x| self.eval(x, grid.dim(), grid.length()))
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            Field::Constant { .. } => true,
            Field::Cosine { amplitude, .. }
            | Field::Sine { amplitude, .. }
            | Field::Triangle { amplitude, .. }
            | Field::AbsSinePower { amplitude, .. } => amplitude == 0.0,
        }
    }

    /// Upper bound for `sup |g| ` of the field.
    pub fn sup_abs(&self, dim: usize) -> f64 {
        let d = dim as f64;
        match *self {
            Field::Constant { value } => value.abs(),
            Field::Cosine { amplitude, offset, .. } | Field::Sine { amplitude, offset, .. } => {
                offset.abs() + amplitude.abs() * d
            }
            Field::Triangle { amplitude, offset } => offset.abs() + amplitude.abs() * d * 0.5,
            Field::AbsSinePower { amplitude, offset, .. } => offset.abs() + amplitude.abs() * d,
        }
    }

    /// Upper bound for the Hölder seminorm `[g]_β` under the periodic
    /// Euclidean distance, or `None` if the field is not `C^β` with a known
    /// constant.
    pub fn holder_bound(&self, beta: f64, dim: usize, length: f64) -> Option<f64> {
        use std::f64::consts::PI;
        if !(beta > 0.0 && beta <= 1.0) {
            return None;
        }
        // Σ_a d_a^β ≤ dim^{1−β/2} |d|^β for the axis-wise sum.
        let axis_sum = (dim as f64).powf(1.0 - beta / 2.0);
        let per_axis = match *self {
            Field::Constant { .. } => return Some(0.0),
            // |g(x) − g(y)| ≤ min(lip·d, 2A) with d ≤ L/2.
            Field::Cosine { amplitude, wavenumber, .. } | Field::Sine { amplitude, wavenumber, .. } => {
                let a = amplitude.abs();
                let lip = a * 2.0 * PI * wavenumber.abs() / length;
                if lip == 0.0 {
                    return Some(0.0);
                }
                let knee = 2.0 * a / lip;
                if knee <= length / 2.0 {
                    (2.0 * a).powf(1.0 - beta) * lip.powf(beta)
                } else {
                    lip * (length / 2.0).powf(1.0 - beta)
                }
            }
            Field::Triangle { amplitude, .. } => amplitude.abs() * (length / 2.0).powf(1.0 - beta),
            Field::AbsSinePower { amplitude, exponent, wavenumber, .. } => {
                if exponent < beta {
                    return None;
                }
                // |sin(a)|^q is q-Hölder with constant 1 in a; then scale by (πk/L)^q.
                let k = PI * wavenumber.abs() / length;
                let q_const = k.powf(exponent);
                // Convert from exponent q to β ≤ q: distances ≤ L/2.
                amplitude.abs() * q_const * (length / 2.0).powf(exponent - beta)
            }
        };
        Some(axis_sum * per_axis)
    }
}

/// A user-supplied first-order Hamiltonian `H(x, t, p)`.
/// `H(x, t, p)` for a user-supplied first-order Hamiltonian.
pub type HamiltonianFn = dyn Fn(&Point, f64, &[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct CustomHamiltonian {
    pub name: String,
    pub func: Arc<HamiltonianFn>,
    /// Bound for `|∂H/∂p_a|` on the whole gradient range.
    pub lip_p: f64,
    /// `H` is convex in `p` and `H(x, t, 0) = 0`.
    pub x_independent: bool,
}

impl fmt::Debug for CustomHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomHamiltonian")
            .field("name", &self.name)
            .field("lip_p", &self.lip_p)
            .finish()
    }
}

impl PartialEq for CustomHamiltonian {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.func, &other.func)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum HamiltonianKind {
    /// `c(x)·p`, one field per axis.
    Transport { velocity: Vec<Field> },
    /// `a(x)|p|`
    Eikonal { speed: Field },
    /// `|p| − f(x)`
    ForcedEikonal { forcing: Field },
    /// `|p|²/2`
    Quadratic,
    /// `H ≡ value`
    Constant { value: f64 },
    #[serde(skip)]
    CustomFirstOrder(CustomHamiltonian),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    #[serde(flatten)]
    pub kind: HamiltonianKind,
    #[serde(rename = "C_H")]
    pub c_h: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(default)]
    pub time_dependent: bool,
}

impl HamiltonianSpec {
    pub fn new(kind: HamiltonianKind, c_h: f64, beta: f64, gamma: f64) -> Result<Self> {
        let spec = HamiltonianSpec { kind, c_h, beta, gamma, time_dependent: false };
        spec.validate()?;
        Ok(spec)
    }

    pub fn quadratic() -> Self {
        HamiltonianSpec { kind: HamiltonianKind::Quadratic, c_h: 0.0, beta: 1.0, gamma: 2.0, time_dependent: false }
    }

    pub fn constant(value: f64) -> Self {
        HamiltonianSpec { kind: HamiltonianKind::Constant { value }, c_h: 0.0, beta: 1.0, gamma: 0.0, time_dependent: false }
    }

    /// Transport with a constant velocity vector.
    pub fn constant_transport(velocity: &[f64]) -> Self {
        HamiltonianSpec {
            kind: HamiltonianKind::Transport {
                velocity: velocity.iter().map(|&v| Field::Constant { value: v }).collect(),
            },
            c_h: 0.0,
            beta: 1.0,
            gamma: 1.0,
            time_dependent: false,
        }
    }

    /// `|p| − f(x)` with `C_H = [f]_β` taken from the field's closed-form bound.
    pub fn forced_eikonal(forcing: Field, beta: f64, dim: usize, length: f64) -> Result<Self> {
        let c_h = forcing.holder_bound(beta, dim, length).ok_or_else(|| {
            Error::InvalidArgument(format!("forcing has no closed-form C^{beta} bound"))
        })?;
        HamiltonianSpec::new(HamiltonianKind::ForcedEikonal { forcing }, c_h, beta, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_h >= 0.0 && self.c_h.is_finite()) {
            return Err(Error::InvalidArgument(format!("C_H must be nonnegative, got {}", self.c_h)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidArgument(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        Ok(())
    }

    /// `H(x, t, p)`; the Hessian argument is ignored by every catalog entry.
    #[inline]
    pub fn value(&self, x: &Point, t: f64, p: &[f64], dim: usize, length: f64) -> f64 {
        let norm = || p[..dim].iter().map(|v| v * v).sum::<f64>().sqrt();
        match &self.kind {
            HamiltonianKind::Transport { velocity } => velocity
                .iter()
                .zip(p)
                .map(|(c, pa)| c.eval(x, dim, length) * pa)
                .sum(),
            HamiltonianKind::Eikonal { speed } => speed.eval(x, dim, length) * norm(),
            HamiltonianKind::ForcedEikonal { forcing } => norm() - forcing.eval(x, dim, length),
            HamiltonianKind::Quadratic => 0.5 * p[..dim].iter().map(|v| v * v).sum::<f64>(),
            HamiltonianKind::Constant { value } => *value,
            HamiltonianKind::CustomFirstOrder(c) => (c.func)(x, t, &p[..dim]),
        }
    }

    /// Bound for `|∂H/∂p_a|` at `x` when `|p_a| ≤ p_box[a]`.
    pub fn p_lipschitz(&self, x: &Point, p_box: &[f64; 2], dim: usize, length: f64) -> [f64; 2] {
        match &self.kind {
            HamiltonianKind::Transport { velocity } => {
                let mut out = [0.0; 2];
                for (a, c) in velocity.iter().enumerate().take(dim) {
                    out[a] = c.eval(x, dim, length).abs();
                }
                out
            }
            HamiltonianKind::Eikonal { speed } => {
                let s = speed.eval(x, dim, length).abs();
                [s, s]
            }
            HamiltonianKind::ForcedEikonal { .. } => [1.0, 1.0],
            HamiltonianKind::Quadratic => *p_box,
            HamiltonianKind::Constant { .. } => [0.0, 0.0],
            HamiltonianKind::CustomFirstOrder(c) => [c.lip_p, c.lip_p],
        }
    }

    pub fn is_x_independent(&self) -> bool {
        match &self.kind {
            HamiltonianKind::Transport { velocity } => velocity.iter().all(Field::is_constant),
            HamiltonianKind::Eikonal { speed } => speed.is_constant(),
            HamiltonianKind::ForcedEikonal { forcing } => forcing.is_constant(),
            HamiltonianKind::Quadratic | HamiltonianKind::Constant { .. } => true,
            HamiltonianKind::CustomFirstOrder(c) => c.x_independent,
        }
    }

    fn check_dims(&self, dim: usize, p: &[f64]) -> Result<()> {
        if p.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
        }
        if let HamiltonianKind::Transport { velocity } = &self.kind {
            if velocity.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: velocity.len() });
            }
        }
        Ok(())
    }
}

/// Evaluates `H(x, t, p, M)` on the torus of `grid`.
pub fn eval_hamiltonian(spec: &HamiltonianSpec, grid: &Grid, x: &[f64], t: f64, p: &[f64], m: &SymMat) -> Result<f64> {
    let dim = grid.dim();
    spec.check_dims(dim, p)?;
    if x.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
    }
    if m.dim != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: m.dim });
    }
    let mut pt = [0.0; 2];
    pt[..dim].copy_from_slice(x);
    Ok(spec.value(&pt, t, p, dim, grid.length()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum DiffusionKind {
    /// `Tr(M)`
    Laplacian,
    /// `a(x)·Tr(M)` with `0 ≤ a ≤ Λ`.
    ScaledTrace { coefficient: Field },
    /// `inf { Tr(AM) : λI ⪯ A ⪯ ΛI }`
    PucciMinus { lambda: f64 },
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSpec {
    #[serde(flatten)]
    pub kind: DiffusionKind,
    #[serde(rename = "Lambda")]
    pub lambda_max: f64,
    #[serde(rename = "C_F", default)]
    pub c_f: f64,
}

impl DiffusionSpec {
    pub fn laplacian() -> Self {
        DiffusionSpec { kind: DiffusionKind::Laplacian, lambda_max: 1.0, c_f: 0.0 }
    }

    pub fn zero() -> Self {
        DiffusionSpec { kind: DiffusionKind::Zero, lambda_max: 0.0, c_f: 0.0 }
    }

    pub fn pucci_minus(lambda: f64, lambda_max: f64) -> Result<Self> {
        let s = DiffusionSpec { kind: DiffusionKind::PucciMinus { lambda }, lambda_max, c_f: 0.0 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_max >= 0.0 && self.lambda_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("Lambda must be nonnegative, got {}", self.lambda_max)));
        }
        if !(self.c_f >= 0.0 && self.c_f.is_finite()) {
            return Err(Error::InvalidArgument(format!("C_F must be nonnegative, got {}", self.c_f)));
        }
        if let DiffusionKind::PucciMinus { lambda } = self.kind {
            if !(0.0..=self.lambda_max).contains(&lambda) {
                return Err(Error::InvalidArgument(format!(
                    "Pucci ellipticity needs 0 <= lambda <= Lambda, got ({lambda}, {})",
                    self.lambda_max
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn value(&self, x: &Point, m: &SymMat, length: f64) -> f64 {
        match &self.kind {
            DiffusionKind::Laplacian => m.trace(),
            DiffusionKind::ScaledTrace { coefficient } => coefficient.eval(x, m.dim, length) * m.trace(),
            DiffusionKind::PucciMinus { lambda } => m
                .eigenvalues()
                .into_iter()
                .map(|e| if e > 0.0 { lambda * e } else { self.lambda_max * e })
                .sum(),
            DiffusionKind::Zero => 0.0,
        }
    }

    /// The coefficient `ε Λ_eff` multiplying `Tr` in the parabolic CFL limit.
    pub fn ellipticity(&self) -> f64 {
        match self.kind {
            DiffusionKind::Laplacian => 1.0,
            DiffusionKind::Zero => 0.0,
            _ => self.lambda_max,
        }
    }

    /// Constant-coefficient `Λ_scale` for which `F = Λ_scale·Tr(M)`, if any.
    pub fn constant_trace_scale(&self) -> Option<f64> {
        match &self.kind {
            DiffusionKind::Laplacian => Some(1.0),
            DiffusionKind::Zero => Some(0.0),
            DiffusionKind::ScaledTrace { coefficient: Field::Constant { value } } => Some(*value),
            _ => None,
        }
    }
}

/// Evaluates `F(x, t, M)`.
pub fn eval_diffusion(spec: &DiffusionSpec, grid: &Grid, x: &[f64], _t: f64, m: &SymMat) -> Result<f64> {
    let dim = grid.dim();
    if m.dim != dim || x.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: m.dim });
    }
    let mut pt = [0.0; 2];
    pt[..dim].copy_from_slice(x);
    Ok(spec.value(&pt, m, grid.length()))
}

/// `β + (α − 1)γ > 0`.
pub fn check_compatibility(alpha: f64, beta: f64, gamma: f64) -> Result<bool> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidArgument(format!("beta must lie in (0, 1], got {beta}")));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma must be nonnegative, got {gamma}")));
    }
    Ok(beta + (alpha - 1.0) * gamma > 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub property: String,
    pub ratio: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub subject: String,
    pub samples: usize,
    /// Largest observed `lhs / rhs` of the audited inequalities.
    pub worst_ratio: f64,
    pub violations: Vec<Violation>,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Relative tolerance for rounding in the audits.
const AUDIT_TOL: f64 = 1e-12;

fn random_point(rng: &mut ChaCha8Rng, grid: &Grid) -> Point {
    let mut x = [0.0; 2];
    for v in x.iter_mut().take(grid.dim()) {
        *v = rng.gen_range(0.0..grid.length());
    }
    x
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> [f64; 2] {
    // Magnitudes spread over several decades to exercise the growth in |p|.
    let scale = 10f64.powf(rng.gen_range(-2.0..3.0));
    let mut p = [0.0; 2];
    for v in p.iter_mut().take(dim) {
        *v = scale * rng.gen_range(-1.0..1.0);
    }
    p
}

fn random_sym(rng: &mut ChaCha8Rng, dim: usize) -> SymMat {
    let scale = 10f64.powf(rng.gen_range(-1.0..2.0));
    let mut m = SymMat::zero(dim);
    m.xx = scale * rng.gen_range(-1.0..1.0);
    if dim == 2 {
        m.xy = scale * rng.gen_range(-1.0..1.0);
        m.yy = scale * rng.gen_range(-1.0..1.0);
    }
    m
}

fn random_psd(rng: &mut ChaCha8Rng, dim: usize) -> SymMat {
    // B Bᵀ
    let scale = 10f64.powf(rng.gen_range(-1.0..2.0));
    if dim == 1 {
        let b = scale * rng.gen_range(-1.0..1.0);
        return SymMat { dim, xx: b * b, xy: 0.0, yy: 0.0 };
    }
    let (a, b, c, d) = (
        scale * rng.gen_range(-1.0..1.0),
        scale * rng.gen_range(-1.0..1.0),
        scale * rng.gen_range(-1.0..1.0),
        scale * rng.gen_range(-1.0..1.0),
    );
    SymMat { dim, xx: a * a + b * b, xy: a * c + b * d, yy: c * c + d * d }
}

/// Audits `|H(x,t,p,M) − H(y,t,p,M)| ≤ C_H dist(x,y)^β (1 + |p|^γ)` on random samples.
pub fn certify_hamiltonian(spec: &HamiltonianSpec, grid: &Grid, samples: usize, seed: u64) -> Result<Certificate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    let mut worst = 0.0f64;
    let mut violations = Vec::new();
    for _ in 0..samples {
        let x = random_point(&mut rng, grid);
        // Half the pairs are close, to probe the small-distance regime.
        let y = if rng.gen_bool(0.5) {
            let mut y = x;
            let r = grid.length() * 10f64.powf(rng.gen_range(-6.0..-1.0));
            for v in y.iter_mut().take(dim) {
                *v = (*v + r * rng.gen_range(-1.0..1.0)).rem_euclid(grid.length());
            }
            y
        } else {
            random_point(&mut rng, grid)
        };
        let t = rng.gen_range(0.0..1.0);
        let p = random_vector(&mut rng, dim);
        let lhs = (spec.value(&x, t, &p, dim, grid.length()) - spec.value(&y, t, &p, dim, grid.length())).abs();
        let d = grid.periodic_distance(&x, &y);
        let pn = p[..dim].iter().map(|v| v * v).sum::<f64>().sqrt();
        let rhs = spec.c_h * d.powf(spec.beta) * (1.0 + pn.powf(spec.gamma));
        let ratio = if lhs == 0.0 {
            0.0
        } else if rhs == 0.0 {
            f64::INFINITY
        } else {
            lhs / rhs
        };
        worst = worst.max(ratio);
        // Absolute floor: evaluations carry rounding proportional to |H|.
        let floor = 1e-13 * (1.0 + spec.value(&x, t, &p, dim, grid.length()).abs());
        if lhs > rhs * (1.0 + AUDIT_TOL) + floor {
            violations.push(Violation {
                property: "assumption_h".into(),
                ratio,
                detail: format!("x = {:?}, y = {:?}, p = {:?}", &x[..dim], &y[..dim], &p[..dim]),
            });
        }
    }
    Ok(Certificate {
        subject: format!("hamiltonian {:?}", kind_name(&spec.kind)),
        samples,
        worst_ratio: worst,
        violations,
    })
}

fn kind_name(k: &HamiltonianKind) -> &'static str {
    match k {
        HamiltonianKind::Transport { .. } => "transport",
        HamiltonianKind::Eikonal { .. } => "eikonal",
        HamiltonianKind::ForcedEikonal { .. } => "forced_eikonal",
        HamiltonianKind::Quadratic => "quadratic",
        HamiltonianKind::Constant { .. } => "constant",
        HamiltonianKind::CustomFirstOrder(_) => "custom_first_order",
    }
}

/// Audits one-side ellipticity `F(M+N) − F(M) ≤ Λ Tr N` (`N ⪰ 0`),
/// monotonicity `F(M) ≤ F(M+N)` and `|F(x,t,0)| ≤ C_F`.
pub fn certify_diffusion(spec: &DiffusionSpec, grid: &Grid, samples: usize, seed: u64) -> Result<Certificate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    let l = grid.length();
    let mut worst = 0.0f64;
    let mut violations = Vec::new();
    for _ in 0..samples {
        let x = random_point(&mut rng, grid);
        let m = random_sym(&mut rng, dim);
        let n = random_psd(&mut rng, dim);
        let f_m = spec.value(&x, &m, l);
        let f_mn = spec.value(&x, &m.add(&n), l);
        let inc = f_mn - f_m;
        let cap = spec.lambda_max * n.trace();
        let round = 1e-13 * (1.0 + f_m.abs() + f_mn.abs());
        let ratio = if inc <= 0.0 { 0.0 } else if cap == 0.0 { f64::INFINITY } else { inc / cap };
        worst = worst.max(ratio);
        if inc > cap * (1.0 + AUDIT_TOL) + round {
            violations.push(Violation {
                property: "ellipticity".into(),
                ratio,
                detail: format!("M = {m:?}, N = {n:?}"),
            });
        }
        if inc < -round {
            violations.push(Violation {
                property: "monotonicity".into(),
                ratio: inc,
                detail: format!("M = {m:?}, N = {n:?}"),
            });
        }
        let f0 = spec.value(&x, &SymMat::zero(dim), l).abs();
        if f0 > spec.c_f {
            violations.push(Violation {
                property: "bound_at_zero".into(),
                ratio: f0,
                detail: format!("x = {:?}", &x[..dim]),
            });
        }
    }
    Ok(Certificate {
        subject: "diffusion".into(),
        samples,
        worst_ratio: worst,
        violations,
    })
}

/// Initial datum: a closed-form profile or explicit samples.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Field(Field),
    Samples(GridFn),
}

impl InitialData {
    pub fn sample(&self, grid: &Grid) -> Result<GridFn> {
        match self {
            InitialData::Field(f) => f.sample(grid),
            InitialData::Samples(g) if g.grid() == grid => Ok(g.clone()),
            InitialData::Samples(g) => g.restrict(grid),
        }
    }
}

/// Everything needed to pose `∂_t u + H − εF = 0` (`rho = 0`) or
/// `ρu + H − εF = 0` (`rho > 0`) and to evaluate its rate bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub hamiltonian: HamiltonianSpec,
    pub diffusion: DiffusionSpec,
    pub u0: InitialData,
    pub horizon: f64,
    pub rho: f64,
    /// Exponent `η` and seminorm `[u₀]_η`.
    pub u0_holder: HolderClass,
    /// Exponent `α` and a bound for `[u(t)]_α`.
    pub u_holder: HolderClass,
    pub grid: Grid,
}

impl ProblemSpec {
    pub fn is_stationary(&self) -> bool {
        self.rho > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        self.hamiltonian.validate()?;
        self.diffusion.validate()?;
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("rho must be nonnegative, got {}", self.rho)));
        }
        if !self.is_stationary() {
            if !(self.horizon > 0.0 && self.horizon.is_finite()) {
                return Err(Error::InvalidArgument(format!("T must be positive, got {}", self.horizon)));
            }
            let eta = self.u0_holder.alpha();
            if eta <= 0.0 {
                return Err(Error::InvalidArgument("eta must lie in (0, 1]".into()));
            }
            if eta > self.u_holder.alpha() {
                return Err(Error::InvalidArgument(format!(
                    "eta = {eta} exceeds alpha = {}",
                    self.u_holder.alpha()
                )));
            }
        }
        if let DiffusionKind::ScaledTrace { coefficient } = &self.diffusion.kind {
            let a = coefficient.sample(&self.grid)?;
            if a.min() < 0.0 || a.max() > self.diffusion.lambda_max {
                return Err(Error::InvalidArgument(format!(
                    "diffusion coefficient ranges over [{}, {}] on the grid, outside [0, Lambda = {}]",
                    a.min(),
                    a.max(),
                    self.diffusion.lambda_max
                )));
            }
        }
        if self.hamiltonian.c_h != 0.0
            && !check_compatibility(self.u_holder.alpha(), self.hamiltonian.beta, self.hamiltonian.gamma)?
        {
            let h = &self.hamiltonian;
            return Err(Error::Incompatible {
                value: h.beta + (self.u_holder.alpha() - 1.0) * h.gamma,
            });
        }
        Ok(())
    }

    pub fn initial(&self, grid: &Grid) -> Result<GridFn> {
        self.u0.sample(grid)
    }
}

/// JSON shape of a problem config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub hamiltonian: HamiltonianSpec,
    pub diffusion: DiffusionSpec,
    pub u0: InitialConfig,
    pub u_holder: HolderClass,
    #[serde(rename = "T", default)]
    pub horizon: f64,
    #[serde(default)]
    pub rho: f64,
    pub grid: Grid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialConfig {
    #[serde(flatten)]
    pub field: Field,
    pub eta: f64,
    pub seminorm: f64,
}

impl TryFrom<ProblemConfig> for ProblemSpec {
    type Error = Error;

    fn try_from(c: ProblemConfig) -> Result<Self> {
        let spec = ProblemSpec {
            hamiltonian: c.hamiltonian,
            diffusion: c.diffusion,
            u0: InitialData::Field(c.u0.field),
            horizon: c.horizon,
            rho: c.rho,
            u0_holder: HolderClass::new(c.u0.eta, c.u0.seminorm)?,
            u_holder: c.u_holder,
            grid: c.grid,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl ProblemSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ProblemConfig = serde_json::from_str(s)?;
        cfg.try_into()
    }

    /// Back to the config shape; fails for sampled data or custom Hamiltonians.
    pub fn to_config(&self) -> Result<ProblemConfig> {
        let InitialData::Field(field) = &self.u0 else {
            return Err(Error::Config("sampled initial data has no JSON form".into()));
        };
        if matches!(self.hamiltonian.kind, HamiltonianKind::CustomFirstOrder(_)) {
            return Err(Error::Config("custom Hamiltonians have no JSON form".into()));
        }
        Ok(ProblemConfig {
            hamiltonian: self.hamiltonian.clone(),
            diffusion: self.diffusion.clone(),
            u0: InitialConfig {
                field: field.clone(),
                eta: self.u0_holder.alpha(),
                seminorm: self.u0_holder.seminorm(),
            },
            u_holder: self.u_holder,
            horizon: self.horizon,
            rho: self.rho,
            grid: self.grid,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn g1() -> Grid {
        Grid::new(1, 64, 1.0).unwrap()
    }

    #[test]
    fn scaled_trace_coefficient_range_depends_on_dimension() {
        let coefficient = Field::Cosine { amplitude: 0.5, wavenumber: 1.0, offset: 0.5 };
        let mk = |grid| ProblemSpec {
            hamiltonian: HamiltonianSpec::constant(0.0),
            diffusion: DiffusionSpec {
                kind: DiffusionKind::ScaledTrace { coefficient: coefficient.clone() },
                lambda_max: 1.0,
                c_f: 0.0,
            },
            u0: InitialData::Field(Field::Constant { value: 0.0 }),
            horizon: 1.0,
            rho: 0.0,
            u0_holder: HolderClass::new(1.0, 0.0).unwrap(),
            u_holder: HolderClass::new(1.0, 0.0).unwrap(),
            grid,
        };
        assert!(mk(g1()).validate().is_ok());
        assert!(mk(Grid::new(2, 8, 1.0).unwrap()).validate().is_err());
    }

    #[test]
    fn hamiltonian_examples() {
        let g = g1();
        let m = SymMat::zero(1);
        assert_eq!(eval_hamiltonian(&HamiltonianSpec::quadratic(), &g, &[0.3], 0.0, &[0.0], &m).unwrap(), 0.0);
        let g2 = Grid::new(2, 8, 1.0).unwrap();
        let fe = HamiltonianSpec::new(
            HamiltonianKind::ForcedEikonal { forcing: Field::Constant { value: 0.0 } },
            0.0,
            1.0,
            0.0,
        )
        .unwrap();
        assert_eq!(eval_hamiltonian(&fe, &g2, &[0.1, 0.2], 0.0, &[3.0, 4.0], &SymMat::zero(2)).unwrap(), 5.0);
        let tr = HamiltonianSpec::constant_transport(&[1.0]);
        assert_eq!(eval_hamiltonian(&tr, &g, &[0.5], 0.0, &[2.0], &m).unwrap(), 2.0);
        assert!(matches!(
            eval_hamiltonian(&tr, &g, &[0.5], 0.0, &[2.0, 1.0], &m),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn diffusion_examples() {
        let g2 = Grid::new(2, 8, 1.0).unwrap();
        let zero = SymMat::zero(2);
        let kinds = [
            DiffusionSpec::laplacian(),
            DiffusionSpec::zero(),
            DiffusionSpec::pucci_minus(1.0, 2.0).unwrap(),
            DiffusionSpec {
                kind: DiffusionKind::ScaledTrace { coefficient: Field::Constant { value: 0.5 } },
                lambda_max: 0.5,
                c_f: 0.0,
            },
        ];
        for k in &kinds {
            assert_eq!(eval_diffusion(k, &g2, &[0.0, 0.0], 0.0, &zero).unwrap(), 0.0);
        }
        let m = SymMat::diag(&[2.0, -1.0]).unwrap();
        assert_eq!(eval_diffusion(&kinds[0], &g2, &[0.0, 0.0], 0.0, &m).unwrap(), 1.0);
        let m = SymMat::diag(&[1.0, -1.0]).unwrap();
        assert_eq!(eval_diffusion(&kinds[2], &g2, &[0.0, 0.0], 0.0, &m).unwrap(), -1.0);
        assert!(SymMat::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn pucci_matches_brute_force_over_diagonal_coefficients() {
        let spec = DiffusionSpec::pucci_minus(1.0, 2.0).unwrap();
        let x = [0.0; 2];
        for (a, b) in [(1.0, -1.0), (0.3, 2.0), (-4.0, -0.5), (0.0, 0.0)] {
            let m = SymMat::diag(&[a, b]).unwrap();
            let steps = 200;
            let mut best = f64::INFINITY;
            for i in 0..=steps {
                for j in 0..=steps {
                    let a1 = 1.0 + i as f64 / steps as f64;
                    let a2 = 1.0 + j as f64 / steps as f64;
                    best = best.min(a1 * a + a2 * b);
                }
            }
            assert!((spec.value(&x, &m, 1.0) - best).abs() < 1e-12);
        }
    }

    #[test]
    fn compatibility_examples() {
        assert!(check_compatibility(1.0, 1.0, 0.0).unwrap());
        assert!(!check_compatibility(0.3, 0.5, 1.0).unwrap());
        assert!(check_compatibility(0.8, 0.5, 1.0).unwrap());
        assert!(check_compatibility(1.2, 0.5, 1.0).is_err());
        assert!(check_compatibility(0.5, 0.0, 1.0).is_err());
        assert!(check_compatibility(0.5, 0.5, -1.0).is_err());
    }

    #[test]
    fn quadratic_certificate_ratio_is_zero() {
        let c = certify_hamiltonian(&HamiltonianSpec::quadratic(), &g1(), 1000, 1).unwrap();
        assert!(c.passed());
        assert_eq!(c.worst_ratio, 0.0);
    }

    #[test]
    fn laplacian_ellipticity_is_tight_on_identity() {
        let spec = DiffusionSpec::laplacian();
        let x = [0.0; 2];
        let m = SymMat::diag(&[0.5, -3.0]).unwrap();
        let n = SymMat::identity(2);
        let inc = spec.value(&x, &m.add(&n), 1.0) - spec.value(&x, &m, 1.0);
        assert_eq!(inc / (spec.lambda_max * n.trace()), 1.0);
        let c = certify_diffusion(&spec, &Grid::new(2, 4, 1.0).unwrap(), 2000, 5).unwrap();
        assert!(c.passed(), "{:?}", c.violations.first());
        assert!(c.worst_ratio <= 1.0 + 1e-12);
    }

    #[test]
    fn understated_constant_is_caught() {
        let spec = HamiltonianSpec::new(
            HamiltonianKind::ForcedEikonal {
                forcing: Field::AbsSinePower { amplitude: 1.0, exponent: 0.5, wavenumber: 1.0, offset: 0.0 },
            },
            0.5,
            0.5,
            0.0,
        )
        .unwrap();
        let c = certify_hamiltonian(&spec, &g1(), 5000, 2).unwrap();
        assert!(!c.passed());
        assert!(c.worst_ratio > 1.0);
    }

    #[test]
    fn abs_sine_power_bound_is_pi_to_beta() {
        let f = Field::AbsSinePower { amplitude: 1.0, exponent: 0.5, wavenumber: 1.0, offset: 0.0 };
        let b = f.holder_bound(0.5, 1, 1.0).unwrap();
        assert!((b - PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn problem_json_round_trip() {
        let json = r#"{
            "hamiltonian": {"kind": "transport", "params": {"velocity": [{"kind": "constant", "params": {"value": 1.0}}]},
                            "C_H": 0.0, "beta": 1.0, "gamma": 1.0},
            "diffusion": {"kind": "laplacian", "Lambda": 1.0, "C_F": 0.0},
            "u0": {"kind": "triangle", "params": {"amplitude": 1.0}, "eta": 1.0, "seminorm": 1.0},
            "u_holder": {"alpha": 1.0, "seminorm": 1.0},
            "T": 0.25, "rho": 0.0,
            "grid": {"dim": 1, "N": 64, "L": 1.0}
        }"#;
        let p = ProblemSpec::from_json(json).unwrap();
        assert_eq!(p.hamiltonian, HamiltonianSpec::constant_transport(&[1.0]));
        let back = serde_json::to_string(&p.to_config().unwrap()).unwrap();
        assert_eq!(ProblemSpec::from_json(&back).unwrap(), p);
    }

    #[test]
    fn incompatible_problem_is_rejected() {
        let json = r#"{
            "hamiltonian": {"kind": "eikonal", "params": {"speed": {"kind": "cosine", "params": {"amplitude": 0.1, "offset": 1.0}}},
                            "C_H": 1.0, "beta": 0.5, "gamma": 1.0},
            "diffusion": {"kind": "laplacian", "Lambda": 1.0},
            "u0": {"kind": "sine", "params": {"amplitude": 1.0}, "eta": 0.3, "seminorm": 7.0},
            "u_holder": {"alpha": 0.3, "seminorm": 7.0},
            "T": 1.0,
            "grid": {"dim": 1, "N": 64, "L": 1.0}
        }"#;
        assert!(matches!(ProblemSpec::from_json(json), Err(Error::Incompatible { .. })));
    }
}
