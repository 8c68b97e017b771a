//! Kinetic formulation: `chi(u, xi)`, the defect measure `m` extracted from
//! the discrete scheme, and checks of the identities and bounds it satisfies.

mod checks;
mod defect;
mod definition;

pub use checks::{check_kf_bounds, check_kf3, check_unpr1, Kf3Probe, Kf3Report, KfReport, UnprReport};
pub use defect::{defect_from_slab, DefectField, KineticObserver, SlabProbe, SlabRecord};
pub use definition::{
    definition_residual, rho_eval, DefinitionProbe, DefinitionReport, DefinitionWeights,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fv::CellState;
use crate::quad::GaussLegendre;

/// Uniform grid in the kinetic variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiGrid {
    pub xi_lo: f64,
    pub xi_hi: f64,
    pub n_xi: usize,
}

impl XiGrid {
    pub fn new(xi_lo: f64, xi_hi: f64, n_xi: usize) -> Result<Self> {
        if n_xi < 2 || !(xi_hi > xi_lo) {
            return Err(Error::InvalidGrid(format!(
                "bad xi grid [{xi_lo}, {xi_hi}] with {n_xi} cells"
            )));
        }
        Ok(Self { xi_lo, xi_hi, n_xi })
    }

    /// Symmetric grid with a cell face at 0 and two spare cells beyond
    /// `+-umax` on each side. `n_xi` must be even and at least 8.
    pub fn covering(umax: f64, n_xi: usize) -> Result<Self> {
        if n_xi < 8 || !n_xi.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("n_xi = {n_xi} must be even and >= 8")));
        }
        let umax = if umax > 0.0 { umax } else { 1.0 };
        let b = umax / (1.0 - 4.0 / n_xi as f64);
        Self::new(-b, b, n_xi)
    }

    pub fn dxi(&self) -> f64 {
        (self.xi_hi - self.xi_lo) / self.n_xi as f64
    }

    pub fn center(&self, k: usize) -> f64 {
        self.xi_lo + (k as f64 + 0.5) * self.dxi()
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_xi).map(|k| self.center(k))
    }

    /// Whether `[-umax - dxi, umax + dxi]` lies inside the grid.
    pub fn covers(&self, umax: f64) -> bool {
        self.xi_lo <= -umax - self.dxi() * (1.0 - 1e-12)
            && self.xi_hi >= umax + self.dxi() * (1.0 - 1e-12)
    }

    /// Indices of the cells whose centers lie in `[a, b]`.
    pub(crate) fn centers_within(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        let d = self.dxi();
        let first = ((a - self.xi_lo) / d - 0.5).ceil().max(0.0) as usize;
        let last = ((b - self.xi_lo) / d - 0.5).floor();
        if last < 0.0 {
            return 0..0;
        }
        let end = (last as usize + 1).min(self.n_xi);
        first.min(end)..end
    }

    /// Neighbouring centers around `xi` and the linear interpolation weight
    /// of the upper one.
    pub(crate) fn bracket(&self, xi: f64) -> (usize, usize, f64) {
        let s = ((xi - self.xi_lo) / self.dxi() - 0.5).clamp(0.0, (self.n_xi - 1) as f64);
        let k0 = (s.floor() as usize).min(self.n_xi - 2);
        (k0, k0 + 1, s - k0 as f64)
    }
}

/// `chi(u, xi)`: `+1` on `0 <= xi < u`, `-1` on `u <= xi < 0`, else 0.
#[inline]
pub fn chi(u: f64, xi: f64) -> i8 {
    if 0.0 <= xi && xi < u {
        1
    } else if u <= xi && xi < 0.0 {
        -1
    } else {
        0
    }
}

/// `chi` sampled at cell centers, row-major in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiField {
    pub xi: XiGrid,
    pub n_x: usize,
    pub t: f64,
    values: Vec<i8>,
}

impl ChiField {
    pub fn value(&self, j: usize, k: usize) -> i8 {
        self.values[j * self.xi.n_xi + k]
    }

    pub fn row(&self, j: usize) -> &[i8] {
        &self.values[j * self.xi.n_xi..(j + 1) * self.xi.n_xi]
    }

    /// `sum_k chi dxi` per cell.
    pub fn reconstruct(&self) -> Vec<f64> {
        let d = self.xi.dxi();
        (0..self.n_x)
            .map(|j| self.row(j).iter().map(|&c| c as f64).sum::<f64>() * d)
            .collect()
    }

    /// `int int |chi| dx dxi` with cell spacing `dx`.
    pub fn abs_mass(&self, dx: f64) -> f64 {
        self.values.iter().map(|c| c.unsigned_abs() as f64).sum::<f64>() * dx * self.xi.dxi()
    }
}

pub fn chi_from_state(state: &CellState, xi: &XiGrid) -> Result<ChiField> {
    let umax = state.sup_norm();
    if !xi.covers(umax) {
        return Err(Error::Domain {
            what: "sup |u| against the xi grid",
            value: umax,
            lo: xi.xi_lo + xi.dxi(),
            hi: xi.xi_hi - xi.dxi(),
        });
    }
    let mut values = Vec::with_capacity(state.u.len() * xi.n_xi);
    for &u in &state.u {
        values.extend(xi.centers().map(|c| chi(u, c)));
    }
    Ok(ChiField {
        xi: *xi,
        n_x: state.u.len(),
        t: state.t,
        values,
    })
}

/// Scaled mollifier `rho(z) = rho0(z/eta)/eta` with
/// `rho0 ~ exp(-1/(1-z^2))` on `(-1, 1)` normalized to unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelRho {
    pub eta: f64,
    norm: f64,
}

impl KernelRho {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::Config(format!("kernel width eta = {eta} must be > 0")));
        }
        let gl = GaussLegendre::new(64);
        let raw = |z: f64| if z.abs() < 1.0 { (-1.0 / (1.0 - z * z)).exp() } else { 0.0 };
        let mass: f64 = (0..8)
            .map(|p| {
                let a = -1.0 + 0.25 * p as f64;
                gl.integrate(raw, a, a + 0.25)
            })
            .sum();
        Ok(Self { eta, norm: mass })
    }

    pub fn value(&self, z: f64) -> f64 {
        let s = z / self.eta;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        (-1.0 / (1.0 - s * s)).exp() / (self.norm * self.eta)
    }

    pub fn derivative(&self, z: f64) -> f64 {
        let s = z / self.eta;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let q = 1.0 - s * s;
        self.value(z) * (-2.0 * s / (q * q)) / self.eta
    }

    pub fn support(&self) -> (f64, f64) {
        (-self.eta, self.eta)
    }
}
