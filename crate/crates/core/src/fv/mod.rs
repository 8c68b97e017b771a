//! Monotone finite-volume solver in one space dimension.
//!
//! Each path segment is a classical conservation law with flux
//! `sum_i c_i A_i`; [`solve_path`] chains the segments.

mod composition;
mod numflux;
mod riemann;
mod solver;

pub use composition::composition_check;
pub use numflux::{eo_flux, EoTable, GodunovTable, PreparedFlux};
pub use riemann::burgers_riemann_exact;
pub use solver::{
    solve_path, solve_segment, step, Scheme, SegmentOutcome, SolverConfig, StepObserver,
    StepRecord, StepView, Trajectory,
};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rough_path::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    /// Ghost cells copy the adjacent interior value.
    Outflow,
}

impl std::str::FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "periodic" => Ok(Self::Periodic),
            "outflow" => Ok(Self::Outflow),
            other => Err(Error::Config(format!("unknown boundary `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n_cells: usize,
    pub bc: Boundary,
}

impl Grid1D {
    pub fn new(x_lo: f64, x_hi: f64, n_cells: usize, bc: Boundary) -> Result<Self> {
        if n_cells < 4 {
            return Err(Error::InvalidGrid(format!("n_cells = {n_cells} < 4")));
        }
        if !(x_hi > x_lo) || !x_lo.is_finite() || !x_hi.is_finite() {
            return Err(Error::InvalidGrid(format!("bad interval [{x_lo}, {x_hi}]")));
        }
        Ok(Self {
            x_lo,
            x_hi,
            n_cells,
            bc,
        })
    }

    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.n_cells as f64
    }

    pub fn center(&self, j: usize) -> f64 {
        self.x_lo + (j as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_cells).map(|j| self.center(j))
    }

    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n_cells: self.n_cells * factor,
            ..*self
        }
    }
}

/// Cell averages of `u` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub grid: Grid1D,
    pub u: Vec<f64>,
    pub t: f64,
}

impl CellState {
    pub fn new(grid: Grid1D, u: Vec<f64>, t: f64) -> Result<Self> {
        if u.len() != grid.n_cells {
            return Err(Error::GridMismatch(format!(
                "{} values for {} cells",
                u.len(),
                grid.n_cells
            )));
        }
        Ok(Self { grid, u, t })
    }

    /// Samples `f` at the cell centers.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let u = grid.centers().map(f).collect();
        Self { grid, u, t: 0.0 }
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx()
    }

    pub fn mass(&self) -> f64 {
        self.u.iter().sum::<f64>() * self.dx()
    }

    pub fn l1_norm(&self) -> f64 {
        self.u.iter().map(|v| v.abs()).sum::<f64>() * self.dx()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.u.iter().map(|v| v * v).sum::<f64>() * self.dx()
    }

    pub fn sup_norm(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn total_variation(&self) -> f64 {
        total_variation(&self.u, self.grid.bc)
    }

    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("states live on different grids".into()));
        }
        Ok(l1_distance(&self.u, &other.u, self.dx()))
    }

    /// First position where the profile crosses `level` from above, by
    /// linear interpolation between cell centers.
    pub fn level_crossing(&self, level: f64) -> Option<f64> {
        let dx = self.dx();
        self.u.windows(2).enumerate().find_map(|(j, w)| {
            (w[0] >= level && w[1] < level)
                .then(|| self.grid.center(j) + dx * (w[0] - level) / (w[0] - w[1]))
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["x", "u"])?;
        for (j, &v) in self.u.iter().enumerate() {
            wtr.write_record([fmt_f64(self.grid.center(j)), fmt_f64(v)])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub(crate) fn total_variation(u: &[f64], bc: Boundary) -> f64 {
    let inner: f64 = u.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    match bc {
        Boundary::Periodic => inner + (u[0] - u[u.len() - 1]).abs(),
        Boundary::Outflow => inner,
    }
}

pub(crate) fn l1_distance(a: &[f64], b: &[f64], dx: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * dx
}
