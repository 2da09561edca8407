//! Constants, exponents and right-hand sides of the vanishing-viscosity
//! error estimates: the evolution bound with its optimal regularization
//! parameter, the stationary bound, and the heat-equation special case.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{check_compatibility, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Closed-form or user-declared seminorm.
    Declared,
    /// Measured from computed solutions.
    Measured,
}

/// Tabulated `s ↦ [u(s)]_α` on a time mesh starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl SeminormTrace {
    pub fn constant(value: f64, horizon: f64) -> Self {
        SeminormTrace {
            times: vec![0.0, horizon],
            values: vec![value, value],
            provenance: Provenance::Declared,
        }
    }

    pub fn new(times: Vec<f64>, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "trace needs at least two matching points, got {} times and {} values",
                times.len(),
                values.len()
            )));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("trace times must start at 0 and increase strictly".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("trace values must be finite and nonnegative".into()));
        }
        Ok(SeminormTrace { times, values, provenance })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseTag {
    General,
    #[serde(rename = "C_H_zero")]
    CHZero,
    #[serde(rename = "C1_zero")]
    C1Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateLedger {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub eta: f64,
    #[serde(rename = "C_H")]
    pub c_h: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    #[serde(rename = "C_F")]
    pub c_f: f64,
    pub n: usize,
    #[serde(rename = "C1")]
    pub c1: f64,
    /// `C2` tabulated on the trace mesh (cumulative trapezoid).
    pub c2_times: Vec<f64>,
    pub c2_values: Vec<f64>,
    #[serde(rename = "P")]
    pub p: f64,
    pub exponent: f64,
    pub case_tag: CaseTag,
    pub seminorm_trace: SeminormTrace,
    /// `‖u₀ − u_(ε)(0)‖_∞`, added to the bound.
    #[serde(default)]
    pub initial_mismatch: f64,
    /// The integrand grows by more than a factor 10 towards `s = 0` on a
    /// measured trace; integrability is then only assessed numerically.
    pub integrability_flagged: bool,
}

fn integrand(c_h: f64, alpha: f64, beta: f64, gamma: f64, k: f64) -> f64 {
    if c_h == 0.0 {
        return 0.0;
    }
    let base = 2.0 * k;
    c_h * base.powf(beta / (2.0 - alpha)) * (1.0 + base.powf(gamma / (2.0 - alpha)))
}

/// `(β + γ(α − 1)) / (2 − α)`.
pub fn q_exponent(alpha: f64, beta: f64, gamma: f64) -> f64 {
    (beta + gamma * (alpha - 1.0)) / (2.0 - alpha)
}

pub fn build_ledger(problem: &ProblemSpec, trace: &SeminormTrace) -> Result<RateLedger> {
    let ham = &problem.hamiltonian;
    let eta = problem.u0_holder.alpha();
    let alpha = problem.u_holder.alpha();
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidArgument(format!("eta must lie in (0, 1], got {eta}")));
    }
    if eta > alpha {
        return Err(Error::InvalidArgument(format!("eta = {eta} exceeds alpha = {alpha}")));
    }
    let compatible = check_compatibility(alpha, ham.beta, ham.gamma)?;
    if ham.c_h != 0.0 && !compatible {
        return Err(Error::Incompatible { value: ham.beta + (alpha - 1.0) * ham.gamma });
    }
    let c1 = (2.0 * problem.u0_holder.seminorm()).powf(2.0 / (2.0 - eta));
    let mut c2_values = Vec::with_capacity(trace.times.len());
    let mut acc = 0.0;
    c2_values.push(0.0);
    for k in 1..trace.times.len() {
        let f0 = integrand(ham.c_h, alpha, ham.beta, ham.gamma, trace.values[k - 1]);
        let f1 = integrand(ham.c_h, alpha, ham.beta, ham.gamma, trace.values[k]);
        acc += 0.5 * (trace.times[k] - trace.times[k - 1]) * (f0 + f1);
        c2_values.push(acc);
    }
    let p_eta = eta / (2.0 - eta);
    let p_h = q_exponent(alpha, ham.beta, ham.gamma);
    let (p, case_tag) = if ham.c_h == 0.0 {
        (p_eta, CaseTag::CHZero)
    } else if c1 == 0.0 {
        (p_h, CaseTag::C1Zero)
    } else {
        (p_eta.min(p_h), CaseTag::General)
    };
    let integrability_flagged = trace.provenance == Provenance::Measured && {
        let ints: Vec<f64> = trace
            .values
            .iter()
            .map(|&k| integrand(ham.c_h, alpha, ham.beta, ham.gamma, k))
            .collect();
        let later = ints[1..].iter().cloned().fold(0.0, f64::max);
        ints[0] > 10.0 * later && later > 0.0
    };
    Ok(RateLedger {
        alpha,
        beta: ham.beta,
        gamma: ham.gamma,
        eta,
        c_h: ham.c_h,
        lambda: problem.diffusion.lambda_max,
        c_f: problem.diffusion.c_f,
        n: problem.grid.dim(),
        c1,
        c2_times: trace.times.clone(),
        c2_values,
        p,
        exponent: p / (p + 1.0),
        case_tag,
        seminorm_trace: trace.clone(),
        initial_mismatch: 0.0,
        integrability_flagged,
    })
}

impl RateLedger {
    /// `C2(t)`, integrating the linearly interpolated integrand up to `t`.
    pub fn c2(&self, t: f64) -> Result<f64> {
        let last = *self.c2_times.last().expect("nonempty mesh");
        if !(t >= 0.0 && t <= last * (1.0 + 1e-12)) {
            return Err(Error::InvalidArgument(format!("t = {t} outside the trace mesh [0, {last}]")));
        }
        let k = self.c2_times.partition_point(|&s| s <= t);
        if k == 0 {
            return Ok(0.0);
        }
        if k == self.c2_times.len() || self.c2_times[k - 1] == t {
            return Ok(self.c2_values[k - 1]);
        }
        let (s0, s1) = (self.c2_times[k - 1], self.c2_times[k]);
        let tr = &self.seminorm_trace.values;
        let f = |v| integrand(self.c_h, self.alpha, self.beta, self.gamma, v);
        let w = (t - s0) / (s1 - s0);
        let (f0, f1) = (f(tr[k - 1]), f(tr[k]));
        let ft = f0 + w * (f1 - f0);
        Ok(self.c2_values[k - 1] + 0.5 * (t - s0) * (f0 + ft))
    }

    /// Closed form of `P/(P+1)` in the general case.
    pub fn general_exponent_closed_form(&self) -> f64 {
        let num = self.beta + self.gamma * (self.alpha - 1.0);
        (self.eta / 2.0).min(num / (num + 2.0 - self.alpha))
    }

    /// `tεΛn/δ + (C1 + C2(t))δ^P + tεC_F`, the estimate before choosing `δ`.
    pub fn pre_optimization(&self, t: f64, epsilon: f64, delta: f64) -> Result<f64> {
        let c = self.c1 + self.c2(t)?;
        Ok(t * epsilon * self.lambda * self.n as f64 / delta + c * delta.powf(self.p) + t * epsilon * self.c_f)
    }
}

fn check_t_eps(t: f64, epsilon: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t must be nonnegative, got {t}")));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    Ok(())
}

/// `(C1+C2(t))^{1/(P+1)} (P+1)/P^{P/(P+1)} (Λtnε)^{P/(P+1)} + εtC_F`, plus
/// the initial mismatch.
pub fn bound_rhs(ledger: &RateLedger, t: f64, epsilon: f64) -> Result<f64> {
    check_t_eps(t, epsilon)?;
    let p = ledger.p;
    let c = ledger.c1 + ledger.c2(t)?;
    let forcing = epsilon * t * ledger.c_f + ledger.initial_mismatch;
    if c == 0.0 {
        return Ok(forcing);
    }
    let e = p / (p + 1.0);
    let main = c.powf(1.0 / (p + 1.0)) * (p + 1.0) / p.powf(e) * (ledger.lambda * t * ledger.n as f64 * epsilon).powf(e);
    Ok(main + forcing)
}

/// `δ* = (tεΛn / ((C1 + C2(t)) P))^{1/(P+1)}`.
pub fn optimal_delta(ledger: &RateLedger, t: f64, epsilon: f64) -> Result<f64> {
    check_t_eps(t, epsilon)?;
    let c = ledger.c1 + ledger.c2(t)?;
    if c == 0.0 {
        return Err(Error::Degenerate("C1 + C2(t) = 0: the estimate has no interior minimiser".into()));
    }
    if t == 0.0 || epsilon == 0.0 {
        return Err(Error::InvalidArgument("optimal delta needs t > 0 and epsilon > 0".into()));
    }
    let num = t * epsilon * ledger.lambda * ledger.n as f64;
    Ok((num / (c * ledger.p)).powf(1.0 / (ledger.p + 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryLedger {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(rename = "C_H")]
    pub c_h: f64,
    pub seminorm: f64,
    pub seminorm_provenance: Provenance,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "C3")]
    pub c3: f64,
    pub rho: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    #[serde(rename = "C_F")]
    pub c_f: f64,
    pub n: usize,
    pub exponent: f64,
}

/// `α = 0` is admitted; `seminorm` is then the oscillation.
pub fn build_stationary_ledger(problem: &ProblemSpec, seminorm: f64, provenance: Provenance) -> Result<StationaryLedger> {
    let ham = &problem.hamiltonian;
    let alpha = problem.u_holder.alpha();
    if !(problem.rho > 0.0) {
        return Err(Error::InvalidArgument(format!("stationary bound needs rho > 0, got {}", problem.rho)));
    }
    if !(seminorm >= 0.0 && seminorm.is_finite()) {
        return Err(Error::InvalidArgument(format!("seminorm must be nonnegative, got {seminorm}")));
    }
    let q = q_exponent(alpha, ham.beta, ham.gamma);
    if ham.c_h != 0.0 && q <= 0.0 {
        return Err(Error::Incompatible { value: q * (2.0 - alpha) });
    }
    let c3 = integrand(ham.c_h, alpha, ham.beta, ham.gamma, seminorm);
    Ok(StationaryLedger {
        alpha,
        beta: ham.beta,
        gamma: ham.gamma,
        c_h: ham.c_h,
        seminorm,
        seminorm_provenance: provenance,
        q,
        c3,
        rho: problem.rho,
        lambda: problem.diffusion.lambda_max,
        c_f: problem.diffusion.c_f,
        n: problem.grid.dim(),
        exponent: q / (q + 1.0),
    })
}

/// `(1/ρ)[C3^{1/(Q+1)} (Q+1)/Q^{Q/(Q+1)} (Λnε)^{Q/(Q+1)} + εC_F]`.
pub fn stationary_bound(ledger: &StationaryLedger, epsilon: f64) -> Result<f64> {
    check_t_eps(0.0, epsilon)?;
    if !(ledger.rho > 0.0) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {}", ledger.rho)));
    }
    let forcing = epsilon * ledger.c_f;
    if ledger.c3 == 0.0 {
        return Ok(forcing / ledger.rho);
    }
    let q = ledger.q;
    if q <= 0.0 {
        return Err(Error::Incompatible { value: q * (2.0 - ledger.alpha) });
    }
    let e = q / (q + 1.0);
    let main = ledger.c3.powf(1.0 / (q + 1.0)) * (q + 1.0) / q.powf(e) * (ledger.lambda * ledger.n as f64 * epsilon).powf(e);
    Ok((main + forcing) / ledger.rho)
}

/// `4‖Du₀‖√(εt) + C_F tε`.
pub fn heat_bound(lip_u0: f64, c_f: f64, t: f64, epsilon: f64) -> Result<f64> {
    check_t_eps(t, epsilon)?;
    if !(lip_u0 >= 0.0 && lip_u0.is_finite()) {
        return Err(Error::InvalidArgument(format!("Lipschitz constant must be finite and nonnegative, got {lip_u0}")));
    }
    Ok(4.0 * lip_u0 * (epsilon * t).sqrt() + c_f * t * epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, HolderClass};
    use crate::operators::{DiffusionSpec, Field, HamiltonianKind, HamiltonianSpec, InitialData};

    fn ledger(c1: f64, p: f64) -> RateLedger {
        RateLedger {
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.0,
            eta: 1.0,
            c_h: 0.0,
            lambda: 1.0,
            c_f: 0.0,
            n: 1,
            c1,
            c2_times: vec![0.0, 10.0],
            c2_values: vec![0.0, 0.0],
            p,
            exponent: p / (p + 1.0),
            case_tag: CaseTag::CHZero,
            seminorm_trace: SeminormTrace::constant(0.0, 10.0),
            initial_mismatch: 0.0,
            integrability_flagged: false,
        }
    }

    fn problem(c_h: f64, alpha: f64, beta: f64, gamma: f64, eta: f64, k0: f64) -> ProblemSpec {
        ProblemSpec {
            hamiltonian: HamiltonianSpec {
                kind: HamiltonianKind::Quadratic,
                c_h,
                beta,
                gamma,
                time_dependent: false,
            },
            diffusion: DiffusionSpec::laplacian(),
            u0: InitialData::Field(Field::Constant { value: 0.0 }),
            horizon: 1.0,
            rho: 0.0,
            u0_holder: HolderClass::new(eta, k0).unwrap(),
            u_holder: HolderClass::new(alpha, 1.0).unwrap(),
            grid: Grid::new(1, 8, 1.0).unwrap(),
        }
    }

    #[test]
    fn classical_lipschitz_case() {
        let p = problem(1.0, 1.0, 1.0, 0.0, 1.0, 1.0);
        let l = build_ledger(&p, &SeminormTrace::constant(1.0, 1.0)).unwrap();
        assert_eq!(l.case_tag, CaseTag::General);
        assert_eq!(l.p, 1.0);
        assert_eq!(l.exponent, 0.5);
    }

    #[test]
    fn holder_case_exponent() {
        let p = problem(1.0, 0.6, 0.6, 0.0, 0.6, 1.0);
        let l = build_ledger(&p, &SeminormTrace::constant(1.0, 1.0)).unwrap();
        assert!((l.exponent - 0.3).abs() < 1e-15);
        assert!((l.general_exponent_closed_form() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn zero_c_h_case() {
        let p = problem(0.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        let l = build_ledger(&p, &SeminormTrace::constant(1.0, 1.0)).unwrap();
        assert_eq!(l.case_tag, CaseTag::CHZero);
        assert_eq!((l.p, l.exponent), (1.0, 0.5));
        assert_eq!(l.c2(1.0).unwrap(), 0.0);
    }

    #[test]
    fn zero_c_h_with_overflowing_growth_term() {
        let p = problem(0.0, 0.999, 0.5, 600.0, 0.5, 1.0);
        let l = build_ledger(&p, &SeminormTrace::constant(3.0, 1.0)).unwrap();
        assert_eq!(l.c2(1.0).unwrap(), 0.0);
        assert!(bound_rhs(&l, 1.0, 1e-3).unwrap().is_finite());
    }

    #[test]
    fn constant_trace_gives_exact_c2() {
        let (c_h, a, b, g, k) = (1.5, 0.5, 0.75, 0.5, 2.0);
        let p = problem(c_h, a, b, g, 0.5, 1.0);
        let l = build_ledger(&p, &SeminormTrace::constant(k, 1.0)).unwrap();
        let expected = c_h * 0.6 * (2.0 * k).powf(b / (2.0 - a)) * (1.0 + (2.0 * k).powf(g / (2.0 - a)));
        assert!((l.c2(0.6).unwrap() - expected).abs() <= 1e-15 * expected);
    }

    #[test]
    fn ledger_errors() {
        assert!(build_ledger(&problem(1.0, 0.5, 1.0, 0.0, 0.8, 1.0), &SeminormTrace::constant(1.0, 1.0)).is_err());
        assert!(matches!(
            build_ledger(&problem(1.0, 0.3, 0.5, 1.0, 0.3, 1.0), &SeminormTrace::constant(1.0, 1.0)),
            Err(Error::Incompatible { .. })
        ));
    }

    #[test]
    fn bound_rhs_examples() {
        let l = ledger(1.0, 1.0);
        for eps in [1e-4, 0.3] {
            assert!((bound_rhs(&l, 1.0, eps).unwrap() - 2.0 * eps.sqrt()).abs() < 1e-15);
        }
        assert_eq!(bound_rhs(&l, 0.0, 0.5).unwrap(), 0.0);
        let mut l0 = ledger(0.0, 1.0);
        l0.c_f = 1.0;
        assert_eq!(bound_rhs(&l0, 0.5, 0.25).unwrap(), 0.125);
    }

    #[test]
    fn optimal_delta_examples() {
        let l = ledger(1.0, 1.0);
        assert_eq!(optimal_delta(&l, 1.0, 1.0).unwrap(), 1.0);
        let d = optimal_delta(&l, 0.7, 0.01).unwrap();
        let pre = l.pre_optimization(0.7, 0.01, d).unwrap();
        assert!((pre - bound_rhs(&l, 0.7, 0.01).unwrap()).abs() < 1e-12 * pre);
        assert!(matches!(optimal_delta(&ledger(0.0, 1.0), 1.0, 1.0), Err(Error::Degenerate(_))));
        let mut last = f64::INFINITY;
        for k in 1..10 {
            let d = optimal_delta(&l, 1.0, 10f64.powi(-k)).unwrap();
            assert!(d < last);
            last = d;
        }
    }

    #[test]
    fn stationary_examples() {
        let mut p = problem(0.0, 1.0, 1.0, 0.0, 1.0, 1.0);
        p.rho = 1.0;
        let l = build_stationary_ledger(&p, 1.0, Provenance::Declared).unwrap();
        assert_eq!(stationary_bound(&l, 0.1).unwrap(), 0.0);

        let mut p = problem(1.0, 0.0, 0.5, 0.0, 1.0, 1.0);
        p.u_holder = HolderClass::new(0.0, 1.0).unwrap();
        p.rho = 1.0;
        let l = build_stationary_ledger(&p, 1.0, Provenance::Declared).unwrap();
        assert!((l.exponent - 0.2).abs() < 1e-15);

        let mut p2 = p.clone();
        p2.rho = 2.0;
        let l2 = build_stationary_ledger(&p2, 1.0, Provenance::Declared).unwrap();
        let (b1, b2) = (stationary_bound(&l, 0.01).unwrap(), stationary_bound(&l2, 0.01).unwrap());
        assert!((b2 - b1 / 2.0).abs() < 1e-15 * b1);
    }

    #[test]
    fn heat_bound_examples() {
        assert_eq!(heat_bound(1.0, 0.0, 1.0, 1.0).unwrap(), 4.0);
        assert_eq!(heat_bound(1.0, 0.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(heat_bound(0.0, 0.0, 3.0, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn ledger_json_has_expected_keys() {
        let l = ledger(1.0, 1.0);
        let v: serde_json::Value = serde_json::to_value(&l).unwrap();
        for key in ["C1", "P", "C_H", "Lambda", "C_F", "case_tag", "seminorm_trace"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["case_tag"], "C_H_zero");
        let back: RateLedger = serde_json::from_value(v).unwrap();
        assert_eq!(back, l);
    }
}
