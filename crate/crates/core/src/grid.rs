//! Uniform periodic grids on the torus `[0, L)^d`, `d ∈ {1, 2}`, the grid
//! functions that live on them, and exhaustive Hölder-seminorm estimation.
//!
//! Nodes are addressed by a flat index in lexicographic (row-major) order of
//! the multi-index `(i0, i1)`; `i0` is the first axis. All distances use the
//! min-image convention per axis.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the torus. The second coordinate is unused in 1D.
pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridWire", into = "GridWire")]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
}

#[derive(Serialize, Deserialize)]
struct GridWire {
    dim: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "L")]
    length: f64,
}

impl TryFrom<GridWire> for Grid {
    type Error = Error;

    fn try_from(w: GridWire) -> Result<Self> {
        Grid::new(w.dim, w.n, w.length)
    }
}

impl From<Grid> for GridWire {
    fn from(g: Grid) -> Self {
        GridWire {
            dim: g.dim,
            n: g.n,
            length: g.length,
        }
    }
}

impl Grid {
    pub fn new(dim: usize, points_per_axis: usize, length: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        if points_per_axis < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points per axis, got {points_per_axis}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "length must be positive and finite, got {length}"
            )));
        }
        Ok(Grid {
            dim,
            n: points_per_axis,
            length,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Total number of nodes, `N^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Same torus and dimension with a different resolution.
    pub fn with_points(&self, points_per_axis: usize) -> Result<Self> {
        Grid::new(self.dim, points_per_axis, self.length)
    }

    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        if self.dim == 1 {
            [flat, 0]
        } else {
            [flat / self.n, flat % self.n]
        }
    }

    pub fn flat_index(&self, idx: [usize; 2]) -> usize {
        if self.dim == 1 {
            idx[0]
        } else {
            idx[0] * self.n + idx[1]
        }
    }

    pub fn coords(&self, flat: usize) -> Point {
        let h = self.spacing();
        let m = self.multi_index(flat);
        if self.dim == 1 {
            [m[0] as f64 * h, 0.0]
        } else {
            [m[0] as f64 * h, m[1] as f64 * h]
        }
    }

    /// Flat index of the neighbour `step` nodes away along `axis`, with wraparound.
    pub fn shift(&self, flat: usize, axis: usize, step: isize) -> usize {
        let mut m = self.multi_index(flat);
        let n = self.n as isize;
        m[axis] = (m[axis] as isize + step).rem_euclid(n) as usize;
        self.flat_index(m)
    }

    /// Min-image integer offset between two axis indices, in `0..=N/2`.
    pub fn axis_offset(&self, i: usize, j: usize) -> usize {
        let d = i.abs_diff(j);
        d.min(self.n - d)
    }

    /// Signed min-image offset from `from` to `to` along one axis, in `(-N/2, N/2]`.
    pub fn signed_axis_offset(&self, from: usize, to: usize) -> isize {
        let n = self.n as isize;
        let mut d = (to as isize - from as isize).rem_euclid(n);
        if 2 * d > n {
            d -= n;
        }
        d
    }

    /// Squared node distance in units of `h²`: `k0² + k1²` of the min-image offsets.
    pub fn offset_sq(&self, a: usize, b: usize) -> u64 {
        let ma = self.multi_index(a);
        let mb = self.multi_index(b);
        (0..self.dim)
            .map(|ax| {
                let k = self.axis_offset(ma[ax], mb[ax]) as u64;
                k * k
            })
            .sum()
    }

    /// Periodic distance between two nodes.
    pub fn node_distance(&self, a: usize, b: usize) -> f64 {
        (self.offset_sq(a, b) as f64).sqrt() * self.spacing()
    }

    /// Periodic distance between two arbitrary points of the torus.
    pub fn periodic_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let l = self.length;
        (0..self.dim)
            .map(|ax| {
                let d = (x[ax] - y[ax]).rem_euclid(l);
                let d = d.min(l - d);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// A real function sampled at every node of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFn {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("value at node {i} is not finite")));
        }
        Ok(GridFn { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&Point) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        GridFn::new(grid, values)
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        GridFn::new(grid, vec![c; grid.len()])
    }

    pub(crate) fn from_parts_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        GridFn { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        GridFn::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Subsample onto a coarser grid whose nodes are a subset of this one's.
    pub fn restrict(&self, coarse: &Grid) -> Result<GridFn> {
        let fine = &self.grid;
        if coarse.dim() != fine.dim()
            || coarse.length() != fine.length()
            || !fine.points_per_axis().is_multiple_of(coarse.points_per_axis())
        {
            return Err(Error::GridMismatch);
        }
        let stride = fine.points_per_axis() / coarse.points_per_axis();
        let values = (0..coarse.len())
            .map(|i| {
                let m = coarse.multi_index(i);
                self.values[fine.flat_index([m[0] * stride, m[1] * stride])]
            })
            .collect();
        GridFn::new(*coarse, values)
    }

    /// Writes `index,x[,y],value` rows in flat-index order.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        if self.grid.dim() == 1 {
            out.write_record(["index", "x", "value"])?;
        } else {
            out.write_record(["index", "x", "y", "value"])?;
        }
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.coords(i);
            let mut rec = vec![i.to_string(), fmt_real(p[0])];
            if self.grid.dim() == 2 {
                rec.push(fmt_real(p[1]));
            }
            rec.push(fmt_real(*v));
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Reads the format produced by [`GridFn::write_csv`] onto a known grid.
    pub fn read_csv<R: Read>(r: R, grid: &Grid) -> Result<GridFn> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        let expected: &[&str] = if grid.dim() == 1 {
            &["index", "x", "value"]
        } else {
            &["index", "x", "y", "value"]
        };
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::InvalidArgument(format!(
                "unexpected CSV header {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let mut values = vec![f64::NAN; grid.len()];
        let mut seen = 0;
        for rec in rdr.records() {
            let rec = rec?;
            let idx: usize = parse_field(&rec, 0)?;
            let v: f64 = parse_field(&rec, expected.len() - 1)?;
            if idx >= grid.len() {
                return Err(Error::InvalidArgument(format!("index {idx} out of range")));
            }
            values[idx] = v;
            seen += 1;
        }
        if seen != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} rows, got {seen}",
                grid.len()
            )));
        }
        GridFn::new(*grid, values)
    }
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::InvalidArgument(format!("bad CSV field {i} in {rec:?}")))
}

/// 17 significant digits, which round-trips every `f64`.
pub(crate) fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Regularity exponent together with a seminorm bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HolderWire", into = "HolderWire")]
pub struct HolderClass {
    alpha: f64,
    seminorm: f64,
}

#[derive(Serialize, Deserialize)]
struct HolderWire {
    alpha: f64,
    seminorm: f64,
}

impl TryFrom<HolderWire> for HolderClass {
    type Error = Error;
    fn try_from(w: HolderWire) -> Result<Self> {
        HolderClass::new(w.alpha, w.seminorm)
    }
}

impl From<HolderClass> for HolderWire {
    fn from(h: HolderClass) -> Self {
        HolderWire {
            alpha: h.alpha,
            seminorm: h.seminorm,
        }
    }
}

impl HolderClass {
    pub fn new(alpha: f64, seminorm: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(seminorm >= 0.0 && seminorm.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "seminorm must be finite and nonnegative, got {seminorm}"
            )));
        }
        Ok(HolderClass { alpha, seminorm })
    }

    /// Measures the seminorm of `f` exactly.
    pub fn measure(f: &GridFn, alpha: f64) -> Result<Self> {
        HolderClass::new(alpha, holder_seminorm(f, alpha)?)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn seminorm(&self) -> f64 {
        self.seminorm
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")))
    }
}

/// `max_{i≠j} |f_i − f_j| / dist(x_i, x_j)^α` over all node pairs; the
/// oscillation when `α = 0`.
pub fn holder_seminorm(f: &GridFn, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return Ok(f.max() - f.min());
    }
    let grid = f.grid();
    let n = grid.points_per_axis();
    let h = grid.spacing();
    let half = n / 2 + 1;
    // dist^α depends only on the min-image offset pair, so tabulate it.
    let table: Vec<f64> = (0..half * half)
        .map(|k| {
            let (a, b) = (k / half, k % half);
            let d = (((a * a + b * b) as f64).sqrt() * h).powf(alpha);
            if d > 0.0 {
                d.recip()
            } else {
                0.0
            }
        })
        .collect();
    let vals = f.values();
    let mut best = 0.0f64;
    for i in 0..grid.len() {
        let mi = grid.multi_index(i);
        for j in (i + 1)..grid.len() {
            let mj = grid.multi_index(j);
            let a = grid.axis_offset(mi[0], mj[0]);
            let b = if grid.dim() == 2 {
                grid.axis_offset(mi[1], mj[1])
            } else {
                0
            };
            let r = (vals[i] - vals[j]).abs() * table[a * half + b];
            if r > best {
                best = r;
            }
        }
    }
    Ok(best)
}

/// `max_i |f_i − g_i|`.
pub fn sup_norm_diff(f: &GridFn, g: &GridFn) -> Result<f64> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(f.values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}
