//! Discrete sup- and inf-convolutions on the periodic grid.
//!
//! For a grid function `f` and `δ > 0`:
//!
//! ```text
//! u^δ_i = max_j  f_j − K(i, j)·c        u_δ_i = min_j  f_j + K(i, j)·c
//! ```
//!
//! where `K(i, j)` is the squared min-image node offset (so that
//! `dist(x_i, x_j)² = K·h²`) and `c = h² / (2δ)`. The maximizer is selected
//! in exact arithmetic with ties broken towards the smallest flat index, and
//! the stored value is `f[arg] ∓ (K as f64) * c` evaluated in that order.
//!
//! The fast path runs the lower envelope of parabolas along each axis over
//! three replicated periods, which reduces the `O(N^{2d})` scan to
//! `O(N^d log N)`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::cmp_penalized;
use crate::grid::{holder_seminorm, GridFn, HolderClass};

/// Relative allowance for floating-point rounding in the envelope checks.
pub const ROUNDING_GUARD: f64 = 8.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    Sup,
    Inf,
}

#[derive(Debug, Clone)]
pub struct EnvelopeResult {
    envelope: GridFn,
    arg_map: Vec<usize>,
    delta: f64,
    kind: EnvelopeKind,
}

impl EnvelopeResult {
    pub fn envelope(&self) -> &GridFn {
        &self.envelope
    }

    /// Flat index of the selected maximizer (sup) or minimizer (inf) per node.
    pub fn arg_map(&self) -> &[usize] {
        &self.arg_map
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn kind(&self) -> EnvelopeKind {
        self.kind
    }

    /// `h² / (2δ)`: the penalty per unit of squared node offset.
    pub fn penalty_scale(&self) -> f64 {
        penalty_scale(self.envelope.grid().spacing(), self.delta)
    }

    /// Writes `index,envelope,arg_index` rows.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index", "envelope", "arg_index"])?;
        for (i, (v, a)) in self
            .envelope
            .values()
            .iter()
            .zip(&self.arg_map)
            .enumerate()
        {
            out.write_record([
                i.to_string(),
                crate::grid::fmt_real(*v),
                a.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

pub fn penalty_scale(h: f64, delta: f64) -> f64 {
    h * h / (2.0 * delta)
}

fn check_delta(f: &GridFn, delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "delta must be positive and finite, got {delta}"
        )));
    }
    let h = f.grid().spacing();
    if delta < 10.0 * h * h {
        log::warn!("delta = {delta} is below 10 h² = {}; the envelope is close to the identity", 10.0 * h * h);
    }
    Ok(())
}

pub fn sup_convolution(f: &GridFn, delta: f64) -> Result<EnvelopeResult> {
    check_delta(f, delta)?;
    let grid = *f.grid();
    let c = penalty_scale(grid.spacing(), delta);
    let arg_map = argmax_map(f, c);
    let values = arg_map
        .iter()
        .enumerate()
        .map(|(i, &a)| f.values()[a] - (grid.offset_sq(i, a) as f64) * c)
        .collect();
    Ok(EnvelopeResult {
        envelope: GridFn::from_parts_unchecked(grid, values),
        arg_map,
        delta,
        kind: EnvelopeKind::Sup,
    })
}

/// Computed as `−sup_convolution(−f, δ)`, which is exact in floating point.
pub fn inf_convolution(f: &GridFn, delta: f64) -> Result<EnvelopeResult> {
    let neg = f.map(|v| -v)?;
    let sup = sup_convolution(&neg, delta)?;
    Ok(EnvelopeResult {
        envelope: sup.envelope.map(|v| -v)?,
        arg_map: sup.arg_map,
        delta,
        kind: EnvelopeKind::Inf,
    })
}

#[derive(Debug, Clone, Copy)]
struct Site {
    pos: isize,
    value: f64,
    base: u64,
    tag: usize,
}

impl Site {
    #[inline]
    fn weight_at(&self, i: isize) -> u64 {
        let d = (i - self.pos).unsigned_abs() as u64;
        self.base + d * d
    }
}

/// Does `q` win against `p` at query node `i`?
#[inline]
fn beats(q: &Site, p: &Site, i: isize, c: f64) -> bool {
    match cmp_penalized(q.value, q.weight_at(i), p.value, p.weight_at(i), c) {
        Ordering::Greater => true,
        Ordering::Equal => q.tag < p.tag,
        Ordering::Less => false,
    }
}

/// For `q.pos > p.pos` the set of nodes where `q` wins is a right half-line;
/// returns its first node in `0..n`, or `n` if it is empty.
fn takeover(p: &Site, q: &Site, n: usize, c: f64) -> usize {
    let (mut lo, mut hi) = (0usize, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if beats(q, p, mid as isize, c) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Index into `sites` of the winner at every query node `0..n`.
/// `sites` must be sorted by strictly increasing position.
fn line_winners(sites: &[Site], n: usize, c: f64) -> Vec<usize> {
    let mut stack: Vec<(usize, usize)> = Vec::with_capacity(sites.len());
    for (qi, q) in sites.iter().enumerate() {
        loop {
            let Some(&(pi, start)) = stack.last() else {
                stack.push((qi, 0));
                break;
            };
            let s = takeover(&sites[pi], q, n, c);
            if s <= start {
                stack.pop();
                continue;
            }
            if s < n {
                stack.push((qi, s));
            }
            break;
        }
    }
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        while k + 1 < stack.len() && stack[k + 1].1 <= i {
            k += 1;
        }
        out.push(stack[k].0);
    }
    out
}

/// Three periods of `line` (value, base, tag) centred on the primary one.
fn replicate(n: usize, line: impl Fn(usize) -> (f64, u64, usize)) -> Vec<Site> {
    (0..3 * n)
        .map(|r| {
            let (value, base, tag) = line(r % n);
            Site {
                pos: r as isize - n as isize,
                value,
                base,
                tag,
            }
        })
        .collect()
}

fn argmax_map(f: &GridFn, c: f64) -> Vec<usize> {
    let grid = f.grid();
    let n = grid.points_per_axis();
    let vals = f.values();
    if grid.dim() == 1 {
        let sites = replicate(n, |j| (vals[j], 0, j));
        return line_winners(&sites, n, c)
            .into_iter()
            .map(|w| sites[w].tag)
            .collect();
    }
    // Inner axis: best j1 for every (j0, i1), with its squared offset.
    let inner: Vec<Vec<(usize, u64)>> = (0..n)
        .into_par_iter()
        .map(|j0| {
            let row = &vals[j0 * n..(j0 + 1) * n];
            let sites = replicate(n, |j1| (row[j1], 0, j1));
            line_winners(&sites, n, c)
                .into_iter()
                .enumerate()
                .map(|(i1, w)| {
                    let j1 = sites[w].tag;
                    let k = grid.axis_offset(i1, j1) as u64;
                    (j1, k * k)
                })
                .collect()
        })
        .collect();
    // Outer axis: for every i1, choose j0 among the inner winners.
    let columns: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i1| {
            let sites = replicate(n, |j0| {
                let (j1, k) = inner[j0][i1];
                (vals[j0 * n + j1], k, j0 * n + j1)
            });
            line_winners(&sites, n, c)
                .into_iter()
                .map(|w| sites[w].tag)
                .collect()
        })
        .collect();
    let mut arg = vec![0; grid.len()];
    for (i1, col) in columns.iter().enumerate() {
        for (i0, &a) in col.iter().enumerate() {
            arg[i0 * n + i1] = a;
        }
    }
    arg
}

/// Measured left-hand side against the bound it must not exceed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

impl BoundCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        BoundCheck {
            lhs,
            rhs,
            passed: lhs <= rhs + ROUNDING_GUARD * rhs.abs(),
        }
    }

    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section2Report {
    pub delta: f64,
    pub alpha: f64,
    pub seminorm: f64,
    /// `inf_convolution ≤ f ≤ sup_convolution` node-wise.
    pub sandwich: bool,
    /// `dist(x, x^δ)^{2−α} ≤ 2δK`.
    pub argdist_sup: BoundCheck,
    /// `dist(x, x_δ)^{2−α} ≤ 2δK`.
    pub argdist_inf: BoundCheck,
    /// `‖u^δ − f‖_∞ ≤ (2K)^{2/(2−α)} δ^{α/(2−α)}`.
    pub speed_sup: BoundCheck,
    pub speed_inf: BoundCheck,
    /// Largest adjacent difference quotient of either envelope against
    /// `δ^{−(1−α)/(2−α)} (2K)^{1/(2−α)} + h/δ`.
    pub lipschitz: BoundCheck,
    /// The `h/δ` part of the Lipschitz right-hand side.
    pub lipschitz_grid_slack: f64,
}

impl Section2Report {
    pub fn checks(&self) -> [(&'static str, bool); 6] {
        [
            ("sandwich", self.sandwich),
            ("argdist_sup", self.argdist_sup.passed),
            ("argdist_inf", self.argdist_inf.passed),
            ("speed_sup", self.speed_sup.passed),
            ("speed_inf", self.speed_inf.passed),
            ("lipschitz", self.lipschitz.passed),
        ]
    }

    pub fn all_passed(&self) -> bool {
        self.checks().iter().all(|(_, ok)| *ok)
    }
}

pub fn check_section2_bounds(f: &GridFn, holder: &HolderClass, delta: f64) -> Result<Section2Report> {
    let alpha = holder.alpha();
    let k = holder.seminorm();
    let measured = holder_seminorm(f, alpha)?;
    if k < measured {
        return Err(Error::InvalidCertificate {
            alpha,
            claimed: k,
            measured,
        });
    }
    let sup = sup_convolution(f, delta)?;
    let inf = inf_convolution(f, delta)?;
    let grid = f.grid();
    let h = grid.spacing();

    let sandwich = (0..grid.len()).all(|i| {
        inf.envelope.values()[i] <= f.values()[i] && f.values()[i] <= sup.envelope.values()[i]
    });

    let argdist = |env: &EnvelopeResult| {
        env.arg_map
            .iter()
            .enumerate()
            .map(|(i, &a)| grid.node_distance(i, a).powf(2.0 - alpha))
            .fold(0.0, f64::max)
    };
    let dist_rhs = 2.0 * delta * k;

    let speed_rhs = (2.0 * k).powf(2.0 / (2.0 - alpha)) * delta.powf(alpha / (2.0 - alpha));
    let speed = |env: &EnvelopeResult| crate::grid::sup_norm_diff(env.envelope(), f);

    let lip_rhs_cont =
        delta.powf(-(1.0 - alpha) / (2.0 - alpha)) * (2.0 * k).powf(1.0 / (2.0 - alpha));
    let lip = max_difference_quotient(sup.envelope()).max(max_difference_quotient(inf.envelope()));

    Ok(Section2Report {
        delta,
        alpha,
        seminorm: k,
        sandwich,
        argdist_sup: BoundCheck::new(argdist(&sup), dist_rhs),
        argdist_inf: BoundCheck::new(argdist(&inf), dist_rhs),
        speed_sup: BoundCheck::new(speed(&sup)?, speed_rhs),
        speed_inf: BoundCheck::new(speed(&inf)?, speed_rhs),
        lipschitz: BoundCheck::new(lip, lip_rhs_cont + h / delta),
        lipschitz_grid_slack: h / delta,
    })
}

/// `max |u(x + h e_a) − u(x)| / h` over all nodes and axes, with wraparound.
pub fn max_difference_quotient(u: &GridFn) -> f64 {
    let grid = u.grid();
    let h = grid.spacing();
    let v = u.values();
    let mut best = 0.0f64;
    for i in 0..grid.len() {
        for ax in 0..grid.dim() {
            let j = grid.shift(i, ax, 1);
            best = best.max((v[j] - v[i]).abs() / h);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiconvexityReport {
    pub passed: bool,
    /// Most negative second difference (sup) or most positive (inf) among checked stencils.
    pub worst_second_difference: f64,
    /// `h²/δ`.
    pub threshold: f64,
    pub checked: usize,
    /// Stencils skipped because the min-image offset to the selected point wraps.
    pub flagged: usize,
}

/// Second differences of a sup-envelope are `≥ −h²/δ` (semiconvexity with
/// constant `1/δ`); of an inf-envelope `≤ h²/δ`.
pub fn check_semiconvexity(env: &EnvelopeResult) -> SemiconvexityReport {
    let u = env.envelope();
    let grid = u.grid();
    let h = grid.spacing();
    let threshold = h * h / env.delta;
    let c = env.penalty_scale();
    let sign = match env.kind {
        EnvelopeKind::Sup => 1.0,
        EnvelopeKind::Inf => -1.0,
    };
    let v = u.values();
    let mut worst = f64::INFINITY;
    let mut passed = true;
    let (mut checked, mut flagged) = (0, 0);
    for i in 0..grid.len() {
        let arg = grid.multi_index(env.arg_map[i]);
        for (ax, &arg_ax) in arg.iter().enumerate().take(grid.dim()) {
            let prev = grid.shift(i, ax, -1);
            let next = grid.shift(i, ax, 1);
            let o = |node: usize| grid.signed_axis_offset(arg_ax, grid.multi_index(node)[ax]);
            let (om, o0, op) = (o(prev), o(i), o(next));
            if op - o0 != 1 || o0 - om != 1 {
                flagged += 1;
                continue;
            }
            checked += 1;
            // Orient so that the sup case is checked from below.
            let s = sign * (v[next] - 2.0 * v[i] + v[prev]);
            // Each stored value is f[arg] ∓ K·c with |f[arg]| ≤ |u| + K·c.
            let scale: f64 = [(prev, 1.0), (i, 2.0), (next, 1.0)]
                .iter()
                .map(|&(node, w)| {
                    let kc = grid.offset_sq(node, env.arg_map[node]) as f64 * c;
                    w * (v[node].abs() + 2.0 * kc)
                })
                .sum();
            let tol = ROUNDING_GUARD * (scale + threshold);
            if s < -threshold - tol {
                passed = false;
            }
            worst = worst.min(s);
        }
    }
    if checked == 0 {
        worst = 0.0;
    }
    SemiconvexityReport {
        passed,
        worst_second_difference: sign * worst,
        threshold,
        checked,
        flagged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive maximization with plain floating comparisons; used only where
    /// no near-ties can occur.
    fn naive_sup(f: &GridFn, delta: f64) -> Vec<f64> {
        let g = f.grid();
        let c = penalty_scale(g.spacing(), delta);
        (0..g.len())
            .map(|i| {
                (0..g.len())
                    .map(|j| f.values()[j] - (g.offset_sq(i, j) as f64) * c)
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    #[test]
    fn constant_is_fixed() {
        for dim in [1, 2] {
            let g = Grid::new(dim, 8, 1.0).unwrap();
            let f = GridFn::constant(g, 2.5).unwrap();
            for delta in [1e-3, 0.1, 10.0] {
                let s = sup_convolution(&f, delta).unwrap();
                let m = inf_convolution(&f, delta).unwrap();
                assert_eq!(s.envelope(), &f);
                assert_eq!(m.envelope(), &f);
                assert!(s.arg_map().iter().enumerate().all(|(i, &a)| a == i));
            }
        }
    }

    #[test]
    fn three_point_hat() {
        // Nodes {0,1,2} on a long torus so nothing wraps.
        let g = Grid::new(1, 100, 100.0).unwrap();
        let mut vals = vec![-1e6; 100];
        vals[0] = 0.0;
        vals[1] = 1.0;
        vals[2] = 0.0;
        let f = GridFn::new(g, vals).unwrap();
        let s = sup_convolution(&f, 1.0).unwrap();
        assert_eq!(&s.envelope().values()[..3], &[0.5, 1.0, 0.5]);
        assert_eq!(&s.arg_map()[..3], &[1, 1, 1]);
    }

    #[test]
    fn rejects_nonpositive_delta() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let f = GridFn::constant(g, 0.0).unwrap();
        assert!(sup_convolution(&f, 0.0).is_err());
        assert!(inf_convolution(&f, -1.0).is_err());
    }

    #[test]
    fn matches_naive_scan_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (dim, n) in [(1, 64), (1, 37), (2, 12), (2, 9)] {
            let g = Grid::new(dim, n, 1.0).unwrap();
            let f = GridFn::new(g, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            for delta in [1e-3, 1e-2, 0.3] {
                let s = sup_convolution(&f, delta).unwrap();
                assert_eq!(s.envelope().values(), naive_sup(&f, delta).as_slice());
            }
        }
    }

    #[test]
    fn tie_break_prefers_smallest_index() {
        // Two equal peaks equidistant from node 2.
        let g = Grid::new(1, 8, 8.0).unwrap();
        let f = GridFn::new(g, vec![0.0, 5.0, 0.0, 5.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let s = sup_convolution(&f, 1.0).unwrap();
        assert_eq!(s.arg_map()[2], 1);
    }

    #[test]
    fn semiconvexity_of_constant() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let f = GridFn::constant(g, 1.0).unwrap();
        let r = check_semiconvexity(&sup_convolution(&f, 0.05).unwrap());
        assert!(r.passed);
        assert_eq!(r.worst_second_difference, 0.0);
    }

    #[test]
    fn invalid_certificate_is_rejected() {
        let g = Grid::new(1, 32, 1.0).unwrap();
        let f = GridFn::from_fn(g, |x| (6.0 * x[0]).sin()).unwrap();
        let h = HolderClass::new(1.0, 0.1).unwrap();
        assert!(matches!(
            check_section2_bounds(&f, &h, 0.01),
            Err(Error::InvalidCertificate { .. })
        ));
    }

    #[test]
    fn constant_passes_section2_with_zero_lhs() {
        let g = Grid::new(1, 32, 1.0).unwrap();
        let f = GridFn::constant(g, -4.0).unwrap();
        let r = check_section2_bounds(&f, &HolderClass::new(1.0, 0.0).unwrap(), 0.1).unwrap();
        assert!(r.all_passed());
        assert_eq!(r.argdist_sup.lhs, 0.0);
        assert_eq!(r.speed_inf.lhs, 0.0);
        assert_eq!(r.lipschitz.lhs, 0.0);
    }

    #[test]
    fn envelope_csv_header() {
        let g = Grid::new(1, 4, 1.0).unwrap();
        let f = GridFn::from_fn(g, |x| x[0]).unwrap();
        let mut buf = Vec::new();
        sup_convolution(&f, 0.1).unwrap().write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("index,envelope,arg_index\n"));
        assert_eq!(s.lines().count(), 5);
    }
}
