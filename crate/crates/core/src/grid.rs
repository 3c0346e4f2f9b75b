//! Uniform cell-centred grid on `[-L, L]`, finite-difference stencils and the
//! discrete norms used by the diagnostics.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Minimum number of cells accepted by [`Grid1D::new`].
pub const MIN_CELLS: usize = 16;

/// Cells excluded at each end by the interior norms.
pub const DEFAULT_BAND: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    half_width: f64,
    n: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "half-width must be positive, got {half_width}"
            )));
        }
        if n < MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_CELLS} cells, got {n}"
            )));
        }
        Ok(Grid1D {
            half_width,
            n,
            dx: 2.0 * half_width / n as f64,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Cell centre `i`.
    pub fn x(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: *self,
            values: (0..self.n).map(|i| f(self.x(i))).collect(),
        }
    }

    pub fn zeros(&self) -> Field {
        Field {
            grid: *self,
            values: vec![0.0; self.n],
        }
    }
}

/// Values on the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::InvalidGrid(format!(
                "field has {} values but grid has {} cells",
                values.len(),
                grid.n
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState {
                field: "field",
                index,
            });
        }
        Ok(Field { grid, values })
    }

    /// Wraps values without the finiteness check; used inside the solver
    /// where non-finite values are reported separately.
    pub(crate) fn from_raw(grid: Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n);
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(self.len(), other.len(), "fields live on different grids");
        Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, k: f64) -> Field {
        self.map(|v| k * v)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Two-column `x,value` CSV with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{:.16e},{:.16e}", self.grid.x(i), v);
        }
        out
    }

    /// Parses the output of [`Field::to_csv`] back onto `grid`.
    pub fn from_csv(grid: Grid1D, text: &str) -> Result<Field> {
        let mut values = Vec::with_capacity(grid.n);
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let value = line
                .split(',')
                .nth(1)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| {
                    Error::InvalidConfig(format!("bad field CSV line {}", lineno + 1))
                })?;
            values.push(value);
        }
        Field::new(grid, values)
    }
}

// Interior central stencils: (offsets from -2..=2, band width)
const CENTRAL: [([f64; 5], usize); 4] = [
    ([0.0, -0.5, 0.0, 0.5, 0.0], 1),
    ([0.0, 1.0, -2.0, 1.0, 0.0], 1),
    ([-0.5, 1.0, 0.0, -1.0, 0.5], 2),
    ([1.0, -4.0, 6.0, -4.0, 1.0], 2),
];

// Second-order forward one-sided stencils starting at the node itself.
const FORWARD: [&[f64]; 4] = [
    &[-1.5, 2.0, -0.5],
    &[
        35.0 / 12.0,
        -26.0 / 3.0,
        19.0 / 2.0,
        -14.0 / 3.0,
        11.0 / 12.0,
    ],
    &[-2.5, 9.0, -12.0, 7.0, -1.5],
    &[3.0, -14.0, 26.0, -24.0, 11.0, -2.0],
];

/// Central second-order differences in the interior, one-sided stencils of at
/// least second order in the boundary bands. `order` 0 returns a copy.
pub fn diff(f: &Field, order: usize) -> Result<Field> {
    let n = f.grid.n;
    if order == 0 {
        return Ok(f.clone());
    }
    if order > 4 || n <= 2 * order || n < FORWARD[order - 1].len() {
        return Err(Error::GridTooCoarse { n, order });
    }
    let (central, band) = CENTRAL[order - 1];
    let fwd = FORWARD[order - 1];
    let scale = f.grid.dx.powi(order as i32).recip();
    let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
    let v = &f.values;
    let mut out = vec![0.0; n];
    for i in band..n - band {
        let mut acc = 0.0;
        for (k, w) in central.iter().enumerate() {
            if *w != 0.0 {
                acc += w * v[i + k - 2];
            }
        }
        out[i] = acc * scale;
    }
    for i in 0..band {
        let left: f64 = fwd.iter().enumerate().map(|(j, w)| w * v[i + j]).sum();
        out[i] = left * scale;
        let r = n - 1 - i;
        let right: f64 = fwd.iter().enumerate().map(|(j, w)| w * v[r - j]).sum();
        out[r] = sign * right * scale;
    }
    Ok(Field {
        grid: f.grid,
        values: out,
    })
}

/// Discrete norms summed over the nodes `[band, n - band)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Norms {
    pub band: usize,
}

impl Default for Norms {
    fn default() -> Self {
        Norms::interior()
    }
}

impl Norms {
    pub fn full() -> Self {
        Norms { band: 0 }
    }

    pub fn interior() -> Self {
        Norms { band: DEFAULT_BAND }
    }

    pub fn range(&self, grid: &Grid1D) -> std::ops::Range<usize> {
        let b = self.band.min(grid.n / 2);
        b..grid.n - b
    }

    /// Riemann sum `sum f_i dx` over the band interior.
    pub fn integral(&self, f: &Field) -> f64 {
        let r = self.range(&f.grid);
        f.values[r].iter().sum::<f64>() * f.grid.dx
    }

    pub fn lp(&self, f: &Field, p: f64) -> f64 {
        let vals = &f.values[self.range(&f.grid)];
        if p.is_infinite() {
            return vals.iter().fold(0.0, |m, v| m.max(v.abs()));
        }
        if p == 2.0 {
            return (vals.iter().map(|v| v * v).sum::<f64>() * f.grid.dx).sqrt();
        }
        (vals.iter().map(|v| v.abs().powf(p)).sum::<f64>() * f.grid.dx).powf(p.recip())
    }

    fn l2_sq(&self, f: &Field) -> f64 {
        f.values[self.range(&f.grid)]
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            * f.grid.dx
    }

    /// `sqrt(sum_{k<=s} |d^k f|_2^2)`.
    pub fn hs(&self, f: &Field, s: usize) -> Result<f64> {
        let mut acc = 0.0;
        for k in 0..=s {
            acc += self.l2_sq(&diff(f, k)?);
        }
        Ok(acc.sqrt())
    }

    /// `|f_x|_2 + |f_xx|_2`.
    pub fn d1d2(&self, f: &Field) -> Result<f64> {
        Ok(self.lp(&diff(f, 1)?, 2.0) + self.lp(&diff(f, 2)?, 2.0))
    }

    /// H^s norm of `f - g` restricted to nodes with `|x| <= radius`;
    /// derivatives are taken on the full grid first.
    pub fn windowed_hs(&self, f: &Field, g: &Field, s: usize, radius: f64) -> Result<f64> {
        let grid = f.grid;
        if !(radius < grid.half_width) {
            return Err(Error::WindowExceedsDomain {
                radius,
                half_width: grid.half_width,
            });
        }
        let d = f.sub(g);
        let range = self.range(&grid);
        let mut acc = 0.0;
        for k in 0..=s {
            let dk = diff(&d, k)?;
            acc += range
                .clone()
                .filter(|&i| grid.x(i).abs() <= radius)
                .map(|i| dk.values[i] * dk.values[i])
                .sum::<f64>();
        }
        Ok((acc * grid.dx).sqrt())
    }
}

pub fn lp_norm(f: &Field, p: f64) -> f64 {
    Norms::full().lp(f, p)
}

pub fn hs_norm(f: &Field, s: usize) -> Result<f64> {
    Norms::full().hs(f, s)
}

pub fn d1d2_seminorm(f: &Field) -> Result<f64> {
    Norms::full().d1d2(f)
}

pub fn windowed_hs_norm(f: &Field, g: &Field, s: usize, radius: f64) -> Result<f64> {
    Norms::full().windowed_hs(f, g, s, radius)
}
