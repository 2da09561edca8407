//! Exact comparison of quadratic-penalty candidates `f − c·K`.
//!
//! Values are compared in exact real arithmetic (a floating filter first,
//! falling back to a non-overlapping floating-point expansion), so the
//! argmax of an envelope is independent of evaluation order.

use std::cmp::Ordering;

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Sign of the exact sum of `terms`.
fn exact_sum_sign(terms: &[f64]) -> Ordering {
    // Grow a non-overlapping expansion, smallest component first.
    let mut expansion: Vec<f64> = Vec::with_capacity(terms.len());
    for &t in terms {
        let mut q = t;
        let mut next = Vec::with_capacity(expansion.len() + 1);
        for &e in &expansion {
            let (s, err) = two_sum(q, e);
            if err != 0.0 {
                next.push(err);
            }
            q = s;
        }
        if q != 0.0 {
            next.push(q);
        }
        expansion = next;
    }
    match expansion.last() {
        Some(v) if *v > 0.0 => Ordering::Greater,
        Some(_) => Ordering::Less,
        None => Ordering::Equal,
    }
}

/// Exact ordering of `fa − c·ka` against `fb − c·kb`.
pub(crate) fn cmp_penalized(fa: f64, ka: u64, fb: f64, kb: u64, c: f64) -> Ordering {
    if ka == kb {
        return fa.partial_cmp(&fb).expect("finite values");
    }
    let d = ka as f64 - kb as f64;
    let diff = fa - fb;
    let pen = c * d;
    let approx = diff - pen;
    let bound = 4.0 * f64::EPSILON * (fa.abs() + fb.abs() + pen.abs());
    if approx > bound {
        return Ordering::Greater;
    }
    if approx < -bound {
        return Ordering::Less;
    }
    let (p, e) = two_prod(c, d);
    exact_sum_sign(&[fa, -fb, -p, -e])
}
