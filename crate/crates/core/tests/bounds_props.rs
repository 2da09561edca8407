use proptest::prelude::*;

use hjrate::bounds::{
    bound_rhs, build_ledger, build_stationary_ledger, heat_bound, optimal_delta, stationary_bound, CaseTag,
    Provenance, SeminormTrace,
};
use hjrate::operators::{DiffusionKind, DiffusionSpec, Field, HamiltonianKind, HamiltonianSpec, InitialData, ProblemSpec};
use hjrate::{Grid, HolderClass};

#[derive(Debug, Clone)]
struct Tuple {
    alpha: f64,
    eta: f64,
    beta: f64,
    gamma: f64,
    c_h: f64,
    u0_semi: f64,
    u_semi: f64,
    lambda: f64,
    c_f: f64,
    dim: usize,
}

fn tuples() -> impl Strategy<Value = Tuple> {
    (0.05f64..=1.0, 0.05f64..=1.0, 0.05f64..=1.0, 0.0f64..0.99, 0.0f64..5.0, 0.01f64..3.0, 0.01f64..3.0, 0.1f64..3.0, 0.0f64..1.0, 1usize..=2)
        .prop_map(|(alpha, eta, beta, g, c_h, u0_semi, u_semi, lambda, c_f, dim)| {
            let gamma_max = if alpha < 1.0 { (beta / (1.0 - alpha)).min(3.0) } else { 3.0 };
            Tuple { alpha, eta: eta.min(alpha), beta, gamma: g * gamma_max, c_h, u0_semi, u_semi, lambda, c_f, dim }
        })
}

fn spec(t: &Tuple, horizon: f64, rho: f64) -> ProblemSpec {
    ProblemSpec {
        hamiltonian: HamiltonianSpec { kind: HamiltonianKind::Quadratic, c_h: t.c_h, beta: t.beta, gamma: t.gamma, time_dependent: false },
        diffusion: DiffusionSpec { kind: DiffusionKind::Laplacian, lambda_max: t.lambda, c_f: t.c_f },
        u0: InitialData::Field(Field::Constant { value: 0.0 }),
        horizon,
        rho,
        u0_holder: HolderClass::new(t.eta, t.u0_semi).unwrap(),
        u_holder: HolderClass::new(t.alpha, t.u_semi).unwrap(),
        grid: Grid::new(t.dim, 8, 1.0).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn exponent_matches_closed_form(t in tuples()) {
        let l = build_ledger(&spec(&t, 1.0, 0.0), &SeminormTrace::constant(t.u_semi, 1.0)).unwrap();
        let expected = match l.case_tag {
            CaseTag::CHZero => t.eta / 2.0,
            _ => l.general_exponent_closed_form(),
        };
        prop_assert!((l.exponent - expected).abs() < 1e-12);
    }

    #[test]
    fn optimal_delta_minimises(t in tuples(), time in 0.01f64..1.0, le in -6.0f64..-0.5, s in 0.2f64..5.0) {
        prop_assume!(t.c_h > 0.0 || t.u0_semi > 0.0);
        let l = build_ledger(&spec(&t, 1.0, 0.0), &SeminormTrace::constant(t.u_semi, 1.0)).unwrap();
        let eps = 10f64.powf(le);
        let d = optimal_delta(&l, time, eps).unwrap();
        let best = l.pre_optimization(time, eps, d).unwrap();
        let b = bound_rhs(&l, time, eps).unwrap();
        prop_assert!((best - b).abs() <= 1e-12 * b);
        prop_assert!(l.pre_optimization(time, eps, d * s).unwrap() >= best * (1.0 - 1e-12));
    }

    #[test]
    fn bound_is_monotone(t in tuples(), time in 0.01f64..0.5, le in -6.0f64..-0.5, f in 1.0f64..2.0) {
        let l = build_ledger(&spec(&t, 1.0, 0.0), &SeminormTrace::constant(t.u_semi, 1.0)).unwrap();
        let eps = 10f64.powf(le);
        let b = bound_rhs(&l, time, eps).unwrap() * (1.0 - 1e-12);
        prop_assert!(bound_rhs(&l, time, eps * f).unwrap() >= b);
        prop_assert!(bound_rhs(&l, time * f, eps).unwrap() >= b);
        for edit in 0..4 {
            let mut m = l.clone();
            match edit {
                0 => m.lambda *= f,
                1 => m.n += 1,
                2 => m.c1 *= f,
                _ => m.c_f *= f,
            }
            prop_assert!(bound_rhs(&m, time, eps).unwrap() >= b);
        }
    }

    #[test]
    fn stationary_exponent_identity(t in tuples(), rho in 0.1f64..3.0, le in -6.0f64..-0.5) {
        prop_assume!(t.c_h > 0.0);
        let l = build_stationary_ledger(&spec(&t, 0.0, rho), t.u_semi, Provenance::Declared).unwrap();
        let q = (t.beta + t.gamma * (t.alpha - 1.0)) / (2.0 - t.alpha);
        prop_assert!((l.exponent - q / (q + 1.0)).abs() < 1e-12);
        let eps = 10f64.powf(le);
        prop_assert!(stationary_bound(&l, eps * 2.0).unwrap() >= stationary_bound(&l, eps).unwrap());
    }
}

#[test]
fn c2_quadrature_converges_for_smooth_trace() {
    let t = Tuple { alpha: 0.8, eta: 0.5, beta: 0.7, gamma: 0.5, c_h: 1.3, u0_semi: 1.0, u_semi: 1.0, lambda: 1.0, c_f: 0.0, dim: 1 };
    let problem = spec(&t, 1.0, 0.0);
    let trace = |m: usize| {
        let times: Vec<f64> = (0..=m).map(|k| k as f64 / m as f64).collect();
        let values = times.iter().map(|s| 1.0 + s * s).collect();
        SeminormTrace::new(times, values, Provenance::Measured).unwrap()
    };
    let coarse = build_ledger(&problem, &trace(1000)).unwrap().c2(0.7).unwrap();
    let fine = build_ledger(&problem, &trace(2000)).unwrap().c2(0.7).unwrap();
    assert!(((coarse - fine) / fine).abs() < 1e-6, "{coarse} vs {fine}");
}

#[test]
fn heat_bound_scales_with_square_root() {
    let a = heat_bound(1.0, 0.0, 1.0, 1e-4).unwrap();
    let b = heat_bound(1.0, 0.0, 1.0, 4e-4).unwrap();
    assert!((b / a - 2.0).abs() < 1e-12);
    assert_eq!(heat_bound(1.0, 0.0, 0.25, 0.01).unwrap(), 4.0 * 0.05);
}
