use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux::{ScalarFlux, SegmentFlux};
use crate::fv::{Boundary, CellState, EoTable, Grid1D, PreparedFlux, StepObserver, StepView};
use crate::rough_path::fmt_f64;

use super::XiGrid;

/// Defect density `m(x, xi)` over one time slab, stored per x-cell as a
/// contiguous run of xi-cells (outside the run `m` vanishes up to the
/// per-cell conservation leftover).
#[derive(Debug, Clone)]
pub struct DefectField {
    pub grid: Grid1D,
    pub xi: XiGrid,
    /// Slab start.
    pub t: f64,
    pub dt: f64,
    first: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<f64>,
    /// `m` above the support of the cell: the conservation residual.
    leftover: Vec<f64>,
}

impl DefectField {
    /// First xi-index and values of the column at x-cell `j`.
    pub fn column(&self, j: usize) -> (usize, &[f64]) {
        (self.first[j], &self.values[self.offsets[j]..self.offsets[j + 1]])
    }

    pub fn value(&self, j: usize, k: usize) -> f64 {
        let (k0, col) = self.column(j);
        if k >= k0 && k < k0 + col.len() {
            col[k - k0]
        } else {
            0.0
        }
    }

    pub fn leftover(&self) -> &[f64] {
        &self.leftover
    }

    pub fn max_leftover(&self) -> f64 {
        self.leftover.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `int int m dx dxi`.
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx() * self.xi.dxi()
    }

    /// `int m(x, xi_k) dx` for every xi-cell.
    pub fn xi_profile(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.xi.n_xi];
        self.add_xi_profile(&mut out, self.grid.dx());
        out
    }

    pub(crate) fn add_xi_profile(&self, out: &mut [f64], scale: f64) {
        for j in 0..self.grid.n_cells {
            let (k0, col) = self.column(j);
            for (i, v) in col.iter().enumerate() {
                out[k0 + i] += scale * v;
            }
        }
    }

    /// `m(x_j, 0)` by linear interpolation between the neighbouring centers.
    pub fn at_zero(&self) -> Vec<f64> {
        let (k0, k1, w) = self.xi.bracket(0.0);
        (0..self.grid.n_cells)
            .map(|j| (1.0 - w) * self.value(j, k0) + w * self.value(j, k1))
            .collect()
    }

    /// `int m(x, 0) dx`.
    pub fn zero_line(&self) -> f64 {
        self.at_zero().iter().sum::<f64>() * self.grid.dx()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Nonzero entries as `x,xi,m`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["x", "xi", "m"])?;
        for j in 0..self.grid.n_cells {
            let (k0, col) = self.column(j);
            for (i, &v) in col.iter().enumerate() {
                if v != 0.0 {
                    wtr.write_record([
                        fmt_f64(self.grid.center(j)),
                        fmt_f64(self.xi.center(k0 + i)),
                        fmt_f64(v),
                    ])?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `int_{-inf}^{xi} chi(u, z) dz` together with the same integral weighted
/// by the positive and negative parts of `F'`.
#[inline]
fn primitives<F: ScalarFlux>(table: &EoTable<F>, u: f64, xi: f64) -> (f64, f64, f64) {
    let (lo, hi, sg) = if u >= 0.0 { (0.0, u, 1.0) } else { (u, 0.0, -1.0) };
    let z = xi.clamp(lo, hi);
    if z == lo {
        return (0.0, 0.0, 0.0);
    }
    let pos = table.positive_between(lo, z);
    let neg = table.negative_between(lo, z);
    (sg * (z - lo), sg * pos, sg * neg)
}

/// `m` for cell `j` at `xi`, exact in `xi`: the EO step is the kinetic
/// upwind step followed by the projection `chi_tilde -> chi(int chi_tilde)`,
/// and `m` integrates the projection defect from below.
#[inline]
fn defect_at<F: ScalarFlux>(
    table: &EoTable<F>,
    stencil: [f64; 3],
    u_next: f64,
    xi: f64,
    dt: f64,
    dx: f64,
) -> f64 {
    let [ul, uc, ur] = stencil;
    let (i_next, _, _) = primitives(table, u_next, xi);
    let (i_c, p_c, n_c) = primitives(table, uc, xi);
    let (_, p_l, _) = primitives(table, ul, xi);
    let (_, _, n_r) = primitives(table, ur, xi);
    (i_next - i_c) / dt + (p_c - p_l + n_r - n_c) / dx
}

fn eo_table(flux: &PreparedFlux<SegmentFlux>) -> Result<&EoTable<SegmentFlux>> {
    match flux {
        PreparedFlux::EngquistOsher(t) => Ok(t),
        PreparedFlux::Godunov(_) => Err(Error::Precondition(
            "defect extraction needs the Engquist-Osher scheme".into(),
        )),
    }
}

pub(crate) fn defect_from_slices<F: ScalarFlux>(
    grid: &Grid1D,
    before: &[f64],
    after: &[f64],
    table: &EoTable<F>,
    t: f64,
    dt: f64,
    xi: &XiGrid,
) -> Result<DefectField> {
    let n = grid.n_cells;
    if before.len() != n || after.len() != n {
        return Err(Error::GridMismatch("slab states do not match the grid".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Precondition(format!("slab dt = {dt} must be positive")));
    }
    let dx = grid.dx();
    let mut first = Vec::with_capacity(n);
    let mut offsets = Vec::with_capacity(n + 1);
    let mut values = Vec::new();
    let mut leftover = Vec::with_capacity(n);
    offsets.push(0);
    for j in 0..n {
        let (ul, ur) = match grid.bc {
            Boundary::Periodic => (before[(j + n - 1) % n], before[(j + 1) % n]),
            Boundary::Outflow => (before[j.saturating_sub(1)], before[(j + 1).min(n - 1)]),
        };
        let stencil = [ul, before[j], ur];
        let un = after[j];
        let lo = stencil.iter().fold(un, |m, &v| m.min(v));
        let hi = stencil.iter().fold(un, |m, &v| m.max(v));
        let range = if lo < hi { xi.centers_within(lo, hi) } else { 0..0 };
        first.push(range.start);
        for k in range {
            values.push(defect_at(table, stencil, un, xi.center(k), dt, dx));
        }
        offsets.push(values.len());
        leftover.push(defect_at(table, stencil, un, hi.max(0.0) + 1.0, dt, dx));
    }
    Ok(DefectField {
        grid: *grid,
        xi: *xi,
        t,
        dt,
        first,
        offsets,
        values,
        leftover,
    })
}

/// Defect of one explicit step from `before` to `after` (`after` must be
/// the EO update of `before` with `flux` and step `dt`).
pub fn defect_from_slab(
    before: &CellState,
    after: &CellState,
    flux: &PreparedFlux<SegmentFlux>,
    dt: f64,
    xi: &XiGrid,
) -> Result<DefectField> {
    if before.grid != after.grid {
        return Err(Error::GridMismatch("slab endpoints on different grids".into()));
    }
    defect_from_slices(&before.grid, &before.u, &after.u, eo_table(flux)?, before.t, dt, xi)
}

/// Per-slab summary kept by [`KineticObserver`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlabRecord {
    pub t: f64,
    pub dt: f64,
    /// `int int m dx dxi`.
    pub mass: f64,
    pub m_min: f64,
    pub m_max: f64,
    /// `int m(x, 0) dx`.
    pub zero_line: f64,
    pub l1_before: f64,
    pub l1_after: f64,
    pub leftover: f64,
}

/// Extra per-slab consumers of the defect field.
pub trait SlabProbe {
    fn on_slab(&mut self, view: &StepView<'_>, field: &DefectField) -> Result<()>;
}

/// Step observer extracting the defect of every step of a solve.
pub struct KineticObserver<'a> {
    pub xi: XiGrid,
    pub tol_m: f64,
    pub slabs: Vec<SlabRecord>,
    /// `sum_slabs dt int m(x, xi_k) dx`.
    pub xi_mass: Vec<f64>,
    pub m_min: f64,
    pub fields: Vec<DefectField>,
    keep_fields: bool,
    probes: Vec<&'a mut dyn SlabProbe>,
}

impl<'a> KineticObserver<'a> {
    /// `tol_m = 1e-8 ||u0||_{L2}^2 / dxi`.
    pub fn new(xi: XiGrid, u0: &CellState) -> Self {
        Self {
            xi,
            tol_m: 1e-8 * u0.l2_norm_sq() / xi.dxi(),
            slabs: Vec::new(),
            xi_mass: vec![0.0; xi.n_xi],
            m_min: 0.0,
            fields: Vec::new(),
            keep_fields: false,
            probes: Vec::new(),
        }
    }

    pub fn keep_fields(mut self) -> Self {
        self.keep_fields = true;
        self
    }

    pub fn with_probe(mut self, probe: &'a mut dyn SlabProbe) -> Self {
        self.probes.push(probe);
        self
    }

    /// `sum_slabs int int m dx dxi dt`.
    pub fn total_mass(&self) -> f64 {
        self.slabs.iter().map(|s| s.mass * s.dt).sum()
    }
}

impl StepObserver for KineticObserver<'_> {
    fn on_step(&mut self, view: &StepView<'_>) -> Result<()> {
        let umax = view.before.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !self.xi.covers(umax) {
            return Err(Error::Domain {
                what: "sup |u| against the xi grid",
                value: umax,
                lo: self.xi.xi_lo,
                hi: self.xi.xi_hi,
            });
        }
        let field = defect_from_slices(
            view.grid,
            view.before,
            view.after,
            eo_table(view.flux)?,
            view.t,
            view.dt,
            &self.xi,
        )?;
        let dx = view.grid.dx();
        let l1 = |u: &[f64]| u.iter().map(|v| v.abs()).sum::<f64>() * dx;
        let (m_min, m_max) = (field.min(), field.max());
        self.m_min = self.m_min.min(m_min);
        self.slabs.push(SlabRecord {
            t: view.t,
            dt: view.dt,
            mass: field.total_mass(),
            m_min,
            m_max,
            zero_line: field.zero_line(),
            l1_before: l1(view.before),
            l1_after: l1(view.after),
            leftover: field.max_leftover(),
        });
        field.add_xi_profile(&mut self.xi_mass, dx * view.dt);
        for p in self.probes.iter_mut() {
            p.on_slab(view, &field)?;
        }
        if self.keep_fields {
            self.fields.push(field);
        }
        Ok(())
    }
}
