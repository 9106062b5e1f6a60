//! Uniform 1-D grids and the grid functions the backward operator maps.
//!
//! A [`GridFunction`] stands for a bounded continuous function on the whole
//! real line: piecewise-linear between nodes and held constant beyond the
//! first and last node.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Uniform grid `x_min + i*h`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    h: f64,
    n: usize,
}

impl Grid {
    pub fn new(x_min: f64, h: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && h.is_finite() && h > 0.0) {
            return Err(Error::InvalidGrid(format!("x_min = {x_min}, h = {h}")));
        }
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 nodes, got {n}")));
        }
        Ok(Grid { x_min, h, n })
    }

    /// Grid covering `[x_min, x_max]` with spacing `h`; `(x_max - x_min)/h`
    /// must be an integer to within 1e-9.
    pub fn from_range(x_min: f64, x_max: f64, h: f64) -> Result<Self> {
        if !(x_max > x_min) {
            return Err(Error::InvalidGrid(format!("x_min = {x_min} >= x_max = {x_max}")));
        }
        if !(h > 0.0) {
            return Err(Error::InvalidGrid(format!("h = {h}")));
        }
        let cells = (x_max - x_min) / h;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "h = {h} does not divide [{x_min}, {x_max}]"
            )));
        }
        Grid::new(x_min, h, rounded as usize + 1)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.n - 1)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }

    /// Index of the node nearest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let r = ((x - self.x_min) / self.h).round();
        if r <= 0.0 {
            0
        } else {
            (r as usize).min(self.n - 1)
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max()
    }

    pub fn sample(&self, f: impl FnMut(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: *self,
            vals: self.xs().map(f).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    vals: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, vals: Vec<f64>) -> Result<Self> {
        if vals.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} nodes",
                vals.len(),
                grid.len()
            )));
        }
        if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite value at node {i}")));
        }
        Ok(GridFunction { grid, vals })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        GridFunction {
            grid,
            vals: vec![c; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.vals
    }

    pub fn into_values(self) -> Vec<f64> {
        self.vals
    }

    /// Nodal value with constant-hold extension for out-of-range indices.
    #[inline]
    pub fn at_index(&self, i: isize) -> f64 {
        if i <= 0 {
            self.vals[0]
        } else if i as usize >= self.vals.len() {
            self.vals[self.vals.len() - 1]
        } else {
            self.vals[i as usize]
        }
    }

    /// Piecewise-linear interpolant, constant beyond the end nodes.
    #[inline]
    pub fn interpolate(&self, x: f64) -> f64 {
        let s = (x - self.grid.x_min) / self.grid.h;
        if !(s > 0.0) {
            return self.vals[0];
        }
        let last = self.vals.len() - 1;
        if s >= last as f64 {
            return self.vals[last];
        }
        let i = s as usize;
        let w = s - i as f64;
        if w == 0.0 {
            return self.vals[i];
        }
        (1.0 - w) * self.vals[i] + w * self.vals[i + 1]
    }

    /// Discrete Lipschitz constant: the largest adjacent slope.
    pub fn lipschitz(&self) -> f64 {
        self.vals
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max)
            / self.grid.h
    }

    pub fn sup_norm(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.vals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            vals: self.vals.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `a*self + b*other` on a shared grid.
    pub fn combine(&self, a: f64, other: &GridFunction, b: f64) -> GridFunction {
        assert_eq!(self.grid, other.grid, "grid functions live on different grids");
        GridFunction {
            grid: self.grid,
            vals: self
                .vals
                .iter()
                .zip(&other.vals)
                .map(|(u, v)| a * u + b * v)
                .collect(),
        }
    }

    /// CSV text with header `x,value` and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.vals.len() * 48 + 8);
        out.push_str("x,value\n");
        for (i, v) in self.vals.iter().enumerate() {
            let _ = writeln!(out, "{:.16e},{:.16e}", self.grid.x(i), v);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    /// Parses the output of [`GridFunction::to_csv`]. Node spacing must be
    /// uniform.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "x,value" => {}
            other => {
                return Err(Error::InvalidGrid(format!(
                    "expected header `x,value`, got {other:?}"
                )))
            }
        }
        let mut xs = Vec::new();
        let mut vals = Vec::new();
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| Error::InvalidGrid(format!("line {}: missing comma", ln + 2)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidGrid(format!("line {}: {e}", ln + 2)))
            };
            xs.push(parse(a)?);
            vals.push(parse(b)?);
        }
        if xs.len() < 2 {
            return Err(Error::InvalidGrid("fewer than 2 rows".into()));
        }
        let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        for (i, x) in xs.iter().enumerate() {
            if (x - (xs[0] + i as f64 * h)).abs() > 1e-9 * h.max(1.0) {
                return Err(Error::InvalidGrid(format!("non-uniform spacing at row {i}")));
            }
        }
        GridFunction::new(Grid::new(xs[0], h, xs.len())?, vals)
    }
}
