#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::FromPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hjrate::{Grid, GridFn};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rat(v: f64) -> BigRational {
    BigRational::from_f64(v).expect("finite")
}

/// Squared min-image node offset, in units of h², computed from coordinates
/// on each axis independently.
pub fn offset_sq(grid: &Grid, a: usize, b: usize) -> u64 {
    let n = grid.points_per_axis() as i64;
    let dim = grid.dim();
    let (ia, ib) = (a as i64, b as i64);
    let axes: Vec<(i64, i64)> = if dim == 1 {
        vec![(ia, ib)]
    } else {
        vec![(ia / n, ib / n), (ia % n, ib % n)]
    };
    axes.into_iter()
        .map(|(x, y)| {
            let d = (x - y).rem_euclid(n);
            let d = d.min(n - d) as u64;
            d * d
        })
        .sum()
}

/// Exact maximiser of `f_j − c·K_ij` (ties to the smallest index) for every
/// node, and the value `f[arg] − K·c` rounded once. Comparisons are exact
/// rationals whenever the floating gap is not decisive.
pub fn brute_force_sup(f: &GridFn, c: f64) -> (Vec<f64>, Vec<usize>) {
    let grid = *f.grid();
    let v = f.values();
    let cr = rat(c);
    let mut values = Vec::with_capacity(v.len());
    let mut args = Vec::with_capacity(v.len());
    for i in 0..v.len() {
        let mut best = 0usize;
        let mut best_k = offset_sq(&grid, i, 0);
        for j in 1..v.len() {
            let k = offset_sq(&grid, i, j);
            let approx_j = v[j] - c * k as f64;
            let approx_b = v[best] - c * best_k as f64;
            let scale = v[j].abs() + v[best].abs() + c * (k.max(best_k) as f64);
            let better = if approx_j - approx_b > 1e-9 * scale {
                true
            } else if approx_b - approx_j > 1e-9 * scale {
                false
            } else {
                let ej = rat(v[j]) - &cr * BigRational::from_integer(BigInt::from(k));
                let eb = rat(v[best]) - &cr * BigRational::from_integer(BigInt::from(best_k));
                ej > eb
            };
            if better {
                best = j;
                best_k = k;
            }
        }
        args.push(best);
        values.push(v[best] - best_k as f64 * c);
    }
    (values, args)
}

/// Minimiser counterpart: `f[arg] + K·c`.
pub fn brute_force_inf(f: &GridFn, c: f64) -> (Vec<f64>, Vec<usize>) {
    let neg = f.map(|x| -x).unwrap();
    let (vals, args) = brute_force_sup(&neg, c);
    (vals.into_iter().map(|x| -x).collect(), args)
}

/// Random values; `quantized` draws from a small lattice to force ties.
pub fn random_values(rng: &mut ChaCha8Rng, len: usize, quantized: bool) -> Vec<f64> {
    (0..len)
        .map(|_| {
            if quantized {
                rng.gen_range(-4i32..=4) as f64 / 8.0
            } else {
                rng.gen_range(-1.0..1.0)
            }
        })
        .collect()
}

/// A random function with Hölder exponent `alpha`: a sum of a few shifted
/// `|sin(π(k x + φ))|^alpha` bumps per axis.
pub fn random_holder_fn(rng: &mut ChaCha8Rng, grid: Grid, alpha: f64) -> GridFn {
    let terms: Vec<(f64, f64, f64, usize)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(1..4) as f64,
                rng.gen_range(0.0..1.0),
                rng.gen_range(0..grid.dim()),
            )
        })
        .collect();
    let l = grid.length();
    GridFn::from_fn(grid, |x| {
        terms
            .iter()
            .map(|&(a, k, phi, ax)| a * (std::f64::consts::PI * (k * x[ax] / l + phi)).sin().abs().powf(alpha))
            .sum()
    })
    .unwrap()
}
