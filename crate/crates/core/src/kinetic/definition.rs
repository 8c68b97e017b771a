use serde::{Deserialize, Serialize};

use crate::bump::Bump;
use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::fv::{solve_path, CellState, SolverConfig, StepView};
use crate::quad::GaussLegendre;
use crate::rough_path::PiecewiseLinearPath;

use super::defect::{DefectField, KineticObserver, SlabProbe};
use super::{KernelRho, XiGrid};

/// Transported kernel `rho0(y - x + sum_i a_i(xi) W^i(t))`.
pub fn rho_eval(
    kernel: &KernelRho,
    y: f64,
    x: f64,
    xi: f64,
    t: f64,
    path: &PiecewiseLinearPath,
    flux: &FluxModel,
) -> Result<f64> {
    if path.channels() != flux.n_channels() {
        return Err(Error::InvalidPath("path and flux channel counts differ".into()));
    }
    let w = path.eval(t)?;
    let shift: f64 = w.iter().enumerate().map(|(i, wi)| flux.a(i, xi) * wi).sum();
    Ok(kernel.value(y - x + shift))
}

/// Test weights: `psi` in xi, `phi` in t and `theta` in the kernel variable y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefinitionWeights {
    pub psi: Bump,
    pub phi: Bump,
    pub theta: Bump,
}

/// `Theta(z) = int theta(w + z) rho(w) dw` and its derivative, tabulated.
#[derive(Debug, Clone)]
struct SmoothedWeight {
    z0: f64,
    h: f64,
    value: Vec<f64>,
    slope: Vec<f64>,
}

impl SmoothedWeight {
    const NODES: usize = 8192;

    fn new(theta: &Bump, kernel: &KernelRho) -> Self {
        let (a, b) = theta.support();
        let z0 = a - kernel.eta;
        let h = (b - a + 2.0 * kernel.eta) / Self::NODES as f64;
        let gl = GaussLegendre::new(32);
        let panels = 4;
        let pw = 2.0 * kernel.eta / panels as f64;
        let conv = |f: &dyn Fn(f64) -> f64, z: f64| -> f64 {
            (0..panels)
                .map(|p| {
                    let lo = -kernel.eta + pw * p as f64;
                    gl.integrate(|w| f(w + z) * kernel.value(w), lo, lo + pw)
                })
                .sum()
        };
        let zs = (0..=Self::NODES).map(|k| z0 + h * k as f64);
        let value = zs.clone().map(|z| conv(&|v| theta.value(v), z)).collect();
        let slope = zs.map(|z| conv(&|v| theta.derivative(v), z)).collect();
        Self { z0, h, value, slope }
    }

    fn support(&self) -> (f64, f64) {
        (self.z0, self.z0 + self.h * Self::NODES as f64)
    }

    #[inline]
    fn eval(&self, z: f64) -> (f64, f64) {
        let s = (z - self.z0) / self.h;
        if !(s >= 0.0 && s < Self::NODES as f64) {
            return (0.0, 0.0);
        }
        let k = s as usize;
        let w = s - k as f64;
        (
            (1.0 - w) * self.value[k] + w * self.value[k + 1],
            (1.0 - w) * self.slope[k] + w * self.slope[k + 1],
        )
    }
}

/// Accumulates the weak-form residual
/// `-int phi' G dt + int phi int int (psi' Theta - psi A' Theta') m dx dxi dt`
/// with `G(t) = int int psi chi Theta(x - s) dx dxi`, `s = sum_i a_i(xi) W^i(t)`
/// and `A' = sum_i a_i'(xi) W^i(t)`. The time derivative of `G` is summed
/// by parts over the step sequence.
#[derive(Debug, Clone)]
pub struct DefinitionProbe {
    pub weights: DefinitionWeights,
    path: PiecewiseLinearPath,
    xi: XiGrid,
    table: SmoothedWeight,
    a: Vec<Vec<f64>>,
    a_prime: Vec<Vec<f64>>,
    psi: Vec<f64>,
    psi_prime: Vec<f64>,
    g_prev: Option<f64>,
    w_buf: Vec<f64>,
    pub transport_part: f64,
    pub defect_part: f64,
}

impl DefinitionProbe {
    /// Checks that `psi` fits in the xi grid, `phi` in `(0, horizon]`, and
    /// that the transported `theta` window never reaches the x boundary.
    pub fn new(
        weights: DefinitionWeights,
        kernel: &KernelRho,
        flux: &FluxModel,
        path: &PiecewiseLinearPath,
        xi: XiGrid,
        x_range: (f64, f64),
    ) -> Result<Self> {
        let (pa, pb) = weights.psi.support();
        if pa < xi.xi_lo || pb > xi.xi_hi {
            return Err(Error::Precondition(format!(
                "psi support [{pa}, {pb}] leaves the xi grid [{}, {}]",
                xi.xi_lo, xi.xi_hi
            )));
        }
        let (ta, tb) = weights.phi.support();
        if ta <= 0.0 || tb > path.horizon() {
            return Err(Error::Precondition(format!(
                "phi support [{ta}, {tb}] not inside (0, {}]",
                path.horizon()
            )));
        }
        if path.channels() != flux.n_channels() {
            return Err(Error::InvalidPath("path and flux channel counts differ".into()));
        }
        let table = SmoothedWeight::new(&weights.theta, kernel);
        let m = flux.n_channels();
        let centers: Vec<f64> = xi.centers().collect();
        let a: Vec<Vec<f64>> = (0..m).map(|i| centers.iter().map(|&c| flux.a(i, c)).collect()).collect();
        let a_prime: Vec<Vec<f64>> =
            (0..m).map(|i| centers.iter().map(|&c| flux.a_prime(i, c)).collect()).collect();
        let w_sup: Vec<f64> = (0..m)
            .map(|i| (0..=path.n_segments()).map(|k| path.row(k)[i].abs()).fold(0.0, f64::max))
            .collect();
        let shift: f64 = centers
            .iter()
            .enumerate()
            .filter(|(_, &c)| c >= pa && c <= pb)
            .map(|(k, _)| (0..m).map(|i| a[i][k].abs() * w_sup[i]).sum::<f64>())
            .fold(0.0, f64::max);
        let (za, zb) = table.support();
        if za - shift < x_range.0 || zb + shift > x_range.1 {
            return Err(Error::Precondition(format!(
                "transported theta window [{}, {}] leaves the domain",
                za - shift,
                zb + shift
            )));
        }
        Ok(Self {
            weights,
            path: path.clone(),
            xi,
            table,
            a,
            a_prime,
            psi: centers.iter().map(|&c| weights.psi.value(c)).collect(),
            psi_prime: centers.iter().map(|&c| weights.psi.derivative(c)).collect(),
            g_prev: None,
            w_buf: vec![0.0; m],
            transport_part: 0.0,
            defect_part: 0.0,
        })
    }

    pub fn residual(&self) -> f64 {
        self.transport_part + self.defect_part
    }

    fn shifts(&mut self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.path.eval_into(t, &mut self.w_buf)?;
        let n = self.xi.n_xi;
        let mut s = vec![0.0; n];
        let mut ap = vec![0.0; n];
        for (i, &w) in self.w_buf.iter().enumerate() {
            for k in 0..n {
                s[k] += self.a[i][k] * w;
                ap[k] += self.a_prime[i][k] * w;
            }
        }
        Ok((s, ap))
    }

    /// `int int psi chi Theta(x - s) dx dxi`, exact cell averages of `chi` in xi.
    fn g(&mut self, view_grid: &crate::fv::Grid1D, u: &[f64], t: f64) -> Result<f64> {
        let (s, _) = self.shifts(t)?;
        let d = self.xi.dxi();
        let mut total = 0.0;
        for (j, &uj) in u.iter().enumerate() {
            let x = view_grid.center(j);
            let (lo, hi, sg) = if uj >= 0.0 { (0.0, uj, 1.0) } else { (uj, 0.0, -1.0) };
            if lo == hi {
                continue;
            }
            let k_lo = (((lo - self.xi.xi_lo) / d).floor().max(0.0)) as usize;
            let k_hi = (((hi - self.xi.xi_lo) / d).ceil() as usize).min(self.xi.n_xi);
            let mut acc = 0.0;
            for (k, &sk) in s.iter().enumerate().take(k_hi).skip(k_lo) {
                if self.psi[k] == 0.0 {
                    continue;
                }
                let a = self.xi.xi_lo + k as f64 * d;
                let frac = ((a + d).min(hi) - a.max(lo)).max(0.0);
                acc += self.psi[k] * self.table.eval(x - sk).0 * frac;
            }
            total += sg * acc;
        }
        Ok(total * view_grid.dx())
    }
}

impl SlabProbe for DefinitionProbe {
    fn on_slab(&mut self, view: &StepView<'_>, field: &DefectField) -> Result<()> {
        let t0 = view.t;
        let t1 = view.t + view.dt;
        let tm = 0.5 * (t0 + t1);
        let phi = self.weights.phi.value(tm);
        let g0 = match self.g_prev {
            Some(g) => g,
            None => self.g(view.grid, view.before, t0)?,
        };
        let g1 = self.g(view.grid, view.after, t1)?;
        self.g_prev = Some(g1);
        if phi == 0.0 {
            return Ok(());
        }
        self.transport_part += phi * (g1 - g0);
        let (s, ap) = self.shifts(tm)?;
        let mut h = 0.0;
        for j in 0..view.grid.n_cells {
            let x = view.grid.center(j);
            let (k0, col) = field.column(j);
            for (i, &m) in col.iter().enumerate() {
                let k = k0 + i;
                if self.psi_prime[k] == 0.0 && self.psi[k] == 0.0 {
                    continue;
                }
                let (th, dth) = self.table.eval(x - s[k]);
                h += (self.psi_prime[k] * th - self.psi[k] * ap[k] * dth) * m;
            }
        }
        self.defect_part += view.dt * phi * h * view.grid.dx() * self.xi.dxi();
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DefinitionReport {
    pub weights: DefinitionWeights,
    pub residual: f64,
    /// `|residual| / (sup|psi| sup|phi| ||u0||_{L1})`.
    pub normalized: f64,
    pub transport_part: f64,
    pub defect_part: f64,
}

/// Solves to the path horizon and evaluates the weak-form residual for
/// every weight set.
#[allow(clippy::too_many_arguments)]
pub fn definition_residual(
    u0: &CellState,
    flux: &FluxModel,
    path: &PiecewiseLinearPath,
    config: &SolverConfig,
    xi: XiGrid,
    kernel: &KernelRho,
    weights: &[DefinitionWeights],
) -> Result<Vec<DefinitionReport>> {
    let range = (u0.grid.x_lo, u0.grid.x_hi);
    let mut probes: Vec<DefinitionProbe> = weights
        .iter()
        .map(|w| DefinitionProbe::new(*w, kernel, flux, path, xi, range))
        .collect::<Result<_>>()?;
    {
        let mut obs = KineticObserver::new(xi, u0);
        for p in probes.iter_mut() {
            obs = obs.with_probe(p);
        }
        solve_path(u0, flux, path, &[path.horizon()], config, &mut obs)?;
    }
    let l1 = u0.l1_norm();
    Ok(probes
        .into_iter()
        .map(|p| {
            let scale = p.weights.psi.height.abs() * p.weights.phi.height.abs() * l1;
            let r = p.residual();
            DefinitionReport {
                weights: p.weights,
                residual: r,
                normalized: if scale > 0.0 { r.abs() / scale } else { r.abs() },
                transport_part: p.transport_part,
                defect_part: p.defect_part,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fv::{Boundary, Grid1D};
    use crate::rough_path::{brownian_sample, PathSeed};

    fn weights(c: f64) -> DefinitionWeights {
        DefinitionWeights {
            psi: Bump::unit(c, 0.45).unwrap(),
            phi: Bump::unit(0.5, 0.45).unwrap(),
            theta: Bump::unit(0.0, 1.0).unwrap(),
        }
    }

    #[test]
    fn rho_examples() {
        let k = KernelRho::new(0.5).unwrap();
        let f = FluxModel::burgers((-1.0, 1.0));
        let id = PiecewiseLinearPath::identity(1.0).unwrap();
        let zero = PiecewiseLinearPath::zero(1.0, 1).unwrap();
        assert_eq!(rho_eval(&k, 0.3, 0.1, 1.0, 0.0, &id, &f).unwrap(), k.value(0.2));
        assert_eq!(rho_eval(&k, 0.3, 0.1, 1.0, 0.7, &zero, &f).unwrap(), k.value(0.2));
        // a(1) = 1: the bump center in y moves to x - t
        let peak = rho_eval(&k, 0.1 - 0.6, 0.1, 1.0, 0.6, &id, &f).unwrap();
        assert_eq!(peak, k.value(0.0));
    }

    #[test]
    fn trivial_residuals() {
        let f = FluxModel::burgers((-1.0, 1.0));
        let g = Grid1D::new(-4.0, 4.0, 64, Boundary::Outflow).unwrap();
        let xi = XiGrid::covering(1.0, 20).unwrap();
        let k = KernelRho::new(0.25).unwrap();
        let path = PiecewiseLinearPath::identity(1.0).unwrap();
        let cfg = SolverConfig::default();
        let zero = CellState::from_fn(g, |_| 0.0);
        let r = definition_residual(&zero, &f, &path, &cfg, xi, &k, &[weights(0.4)]).unwrap();
        assert_eq!(r[0].residual, 0.0);
        // a constant state is stationary and G(t) is constant when the
        // theta window stays inside the constant region
        let cst = CellState::from_fn(g, |_| 0.8);
        let r = definition_residual(&cst, &f, &path, &cfg, xi, &k, &[weights(0.4)]).unwrap();
        assert!(r[0].normalized < 1e-7, "{}", r[0].normalized);
        let mut bad = weights(0.4);
        bad.phi = Bump::unit(0.9, 0.5).unwrap();
        assert!(definition_residual(&cst, &f, &path, &cfg, xi, &k, &[bad]).is_err());
    }

    #[test]
    fn residual_decays_under_refinement() {
        let f = FluxModel::burgers((0.0, 1.0));
        let path = brownian_sample(&PathSeed::new(3), 1.0, 32, 1).unwrap();
        let k = KernelRho::new(0.25).unwrap();
        let cfg = SolverConfig::default();
        let ws = [weights(0.5)];
        let mut res = Vec::new();
        for level in 0..3 {
            let n = 100 << level;
            let g = Grid1D::new(-4.0, 4.0, n, Boundary::Outflow).unwrap();
            let u0 = CellState::from_fn(g, |x| if x < 0.0 { 1.0 } else { 0.0 });
            let xi = XiGrid::covering(1.0, 20 << level).unwrap();
            res.push(definition_residual(&u0, &f, &path, &cfg, xi, &k, &ws).unwrap()[0].normalized);
        }
        assert!(res[0] >= 1.5 * res[1] && res[1] >= 1.5 * res[2], "{res:?}");
    }
}
