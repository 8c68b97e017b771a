//! Local smooth solutions by characteristics and the windowed dissipative
//! inequality checked against solver snapshots.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::bump::{Bump, BumpSum};
use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::fv::{CellState, Trajectory};
use crate::rough_path::PiecewiseLinearPath;

type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Smooth datum `phi` with derivative; identically zero off `support`.
#[derive(Clone)]
pub struct SmoothDatum {
    value: Func,
    derivative: Func,
    support: (f64, f64),
}

impl fmt::Debug for SmoothDatum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothDatum").field("support", &self.support).finish()
    }
}

impl SmoothDatum {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: (f64, f64),
    ) -> Result<Self> {
        if !(support.1 > support.0) {
            return Err(Error::Config(format!("empty datum support {support:?}")));
        }
        Ok(Self {
            value: Arc::new(value),
            derivative: Arc::new(derivative),
            support,
        })
    }

    pub fn from_bumps(bumps: BumpSum) -> Result<Self> {
        if bumps.bumps.is_empty() {
            return Err(Error::Config("datum needs at least one bump".into()));
        }
        let support = bumps.support();
        let b2 = bumps.clone();
        Self::new(move |x| bumps.value(x), move |x| b2.derivative(x), support)
    }

    pub fn zero() -> Self {
        Self::new(|_| 0.0, |_| 0.0, (-1.0, 1.0)).expect("valid support")
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    fn inside(&self, x: f64) -> bool {
        x >= self.support.0 && x <= self.support.1
    }

    pub fn value(&self, x: f64) -> f64 {
        if self.inside(x) {
            (self.value)(x)
        } else {
            0.0
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if self.inside(x) {
            (self.derivative)(x)
        } else {
            0.0
        }
    }

    /// `n` equispaced points covering the support.
    fn sample_points(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        let (a, b) = self.support;
        (0..n).map(move |k| a + (b - a) * k as f64 / (n - 1) as f64)
    }

    pub fn sup(&self) -> f64 {
        self.sample_points(2001).map(|x| self.value(x).abs()).fold(0.0, f64::max)
    }
}

const JACOBIAN_FLOOR: f64 = 0.5;
const WINDOW_SAMPLES: usize = 1000;

/// `x0 -> x0 + sum_i a_i(phi(x0)) dW^i` for a fixed increment `dW`.
#[derive(Debug, Clone)]
pub struct CharacteristicMap {
    datum: SmoothDatum,
    flux: FluxModel,
    dw: Vec<f64>,
}

impl CharacteristicMap {
    fn new(datum: &SmoothDatum, flux: &FluxModel, dw: Vec<f64>) -> Self {
        Self {
            datum: datum.clone(),
            flux: flux.clone(),
            dw,
        }
    }

    pub fn increment(&self) -> &[f64] {
        &self.dw
    }

    pub fn apply(&self, x0: f64) -> f64 {
        let p = self.datum.value(x0);
        x0 + self
            .dw
            .iter()
            .enumerate()
            .map(|(i, d)| self.flux.a(i, p) * d)
            .sum::<f64>()
    }

    pub fn jacobian(&self, x0: f64) -> f64 {
        let p = self.datum.value(x0);
        let dp = self.datum.derivative(x0);
        1.0 + self
            .dw
            .iter()
            .enumerate()
            .map(|(i, d)| self.flux.a_prime(i, p) * dp * d)
            .sum::<f64>()
    }

    /// Inverse by bisection on the support, polished by Newton steps.
    pub fn invert(&self, x: f64) -> Result<f64> {
        let (a, b) = self.datum.support();
        let (xa, xb) = (self.apply(a), self.apply(b));
        if x <= xa || x >= xb {
            // phi vanishes off the support, so the map is a translation there
            let shift = self.apply(a) - a;
            return Ok(x - shift);
        }
        let (mut lo, mut hi) = (a, b);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.apply(mid) < x {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-9 * (1.0 + mid.abs()) {
                break;
            }
        }
        let mut x0 = 0.5 * (lo + hi);
        for _ in 0..4 {
            let j = self.jacobian(x0);
            if !(j > 0.0) {
                break;
            }
            let next = x0 - (self.apply(x0) - x) / j;
            if !(next >= lo && next <= hi) {
                break;
            }
            x0 = next;
        }
        let err = (self.apply(x0) - x).abs();
        if !(err <= 1e-10 * (1.0 + x.abs())) {
            return Err(Error::Numerical(format!(
                "characteristic inversion failed at x = {x} (residual {err:e})"
            )));
        }
        Ok(x0)
    }
}

fn increment(path: &PiecewiseLinearPath, t0: f64, t: f64) -> Result<Vec<f64>> {
    let w0 = path.eval(t0)?;
    let mut w = path.eval(t)?;
    for (a, b) in w.iter_mut().zip(&w0) {
        *a -= b;
    }
    Ok(w)
}

/// Times where `J` can be extremal on `[t0 - h, t0 + h]` clipped to the horizon:
/// window ends and interior knots (`W` is linear in between).
fn window_times(path: &PiecewiseLinearPath, t0: f64, h: f64) -> Vec<f64> {
    let lo = (t0 - h).max(0.0);
    let hi = (t0 + h).min(path.horizon());
    let mut ts = vec![lo, hi];
    ts.extend(path.knots().iter().copied().filter(|&k| k > lo && k < hi));
    ts
}

fn min_jacobian(
    coeffs: &[Vec<f64>],
    path: &PiecewiseLinearPath,
    t0: f64,
    h: f64,
) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for t in window_times(path, t0, h) {
        let dw = increment(path, t0, t)?;
        for c in coeffs {
            let j = 1.0 + c.iter().zip(&dw).map(|(a, b)| a * b).sum::<f64>();
            worst = worst.min(j);
        }
    }
    Ok(worst)
}

/// Largest `h <= h_max` keeping `J >= 1/2` over the support and the window,
/// by bisection. `h_max` defaults to the remaining horizon `T - t0`.
pub fn window(
    datum: &SmoothDatum,
    path: &PiecewiseLinearPath,
    flux: &FluxModel,
    t0: f64,
    h_max: Option<f64>,
) -> Result<f64> {
    let horizon = path.horizon();
    if !(t0 >= 0.0 && t0 <= horizon) {
        return Err(Error::Domain {
            what: "anchor time",
            value: t0,
            lo: 0.0,
            hi: horizon,
        });
    }
    if path.channels() != flux.n_channels() {
        return Err(Error::InvalidPath("path and flux channel counts differ".into()));
    }
    let h_max = h_max.unwrap_or(horizon - t0);
    let coeffs: Vec<Vec<f64>> = datum
        .sample_points(WINDOW_SAMPLES)
        .map(|x| {
            let p = datum.value(x);
            let dp = datum.derivative(x);
            (0..flux.n_channels()).map(|i| flux.a_prime(i, p) * dp).collect()
        })
        .collect();
    if min_jacobian(&coeffs, path, t0, h_max)? >= JACOBIAN_FLOOR {
        return Ok(h_max);
    }
    let (mut lo, mut hi) = (0.0, h_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if min_jacobian(&coeffs, path, t0, mid)? >= JACOBIAN_FLOOR {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * h_max.max(1e-300) {
            break;
        }
    }
    Ok(lo)
}

/// Smooth solution on `(t0 - h, t0 + h)` started from `datum` at `t0`.
#[derive(Debug, Clone)]
pub struct LocalSmoothSolution {
    pub datum: SmoothDatum,
    pub t0: f64,
    pub h: f64,
    path: PiecewiseLinearPath,
    flux: FluxModel,
}

impl LocalSmoothSolution {
    pub fn new(
        datum: SmoothDatum,
        path: &PiecewiseLinearPath,
        flux: &FluxModel,
        t0: f64,
        h_max: Option<f64>,
    ) -> Result<Self> {
        let h = window(&datum, path, flux, t0, h_max)?;
        Ok(Self {
            datum,
            t0,
            h,
            path: path.clone(),
            flux: flux.clone(),
        })
    }

    /// Window clipped to the path horizon.
    pub fn interval(&self) -> (f64, f64) {
        ((self.t0 - self.h).max(0.0), (self.t0 + self.h).min(self.path.horizon()))
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let (a, b) = self.interval();
        if t < a || t > b {
            return Err(Error::Domain {
                what: "time outside the smooth window",
                value: t,
                lo: a,
                hi: b,
            });
        }
        Ok(())
    }

    pub fn flow(&self, t: f64) -> Result<CharacteristicMap> {
        self.check_time(t)?;
        Ok(CharacteristicMap::new(
            &self.datum,
            &self.flux,
            increment(&self.path, self.t0, t)?,
        ))
    }

    /// `Psi(x, t) = phi(x0)` with `x0` the foot of the characteristic through `x`.
    pub fn evaluate(&self, x: f64, t: f64) -> Result<f64> {
        let map = self.flow(t)?;
        Ok(self.datum.value(map.invert(x)?))
    }

    pub fn evaluate_many(&self, xs: impl Iterator<Item = f64>, t: f64) -> Result<Vec<f64>> {
        let map = self.flow(t)?;
        xs.map(|x| map.invert(x).map(|x0| self.datum.value(x0))).collect()
    }
}

/// Forward characteristics `x0 -> x` from `t0` to `t`; fails outside the
/// smooth window.
pub fn characteristic_flow(
    datum: &SmoothDatum,
    path: &PiecewiseLinearPath,
    flux: &FluxModel,
    t0: f64,
    t: f64,
) -> Result<CharacteristicMap> {
    LocalSmoothSolution::new(datum.clone(), path, flux, t0, None)?.flow(t)
}

#[derive(Debug, Clone, Serialize)]
pub struct DissipativeReport {
    pub t0: f64,
    pub h: f64,
    pub times: Vec<f64>,
    /// `D(t) = int int psi(k) (u - k - Psi)_+ dx dk` at `times`.
    pub d: Vec<f64>,
    /// `max_j D(t_{j+1}) - D(t_j)`.
    pub max_increase: f64,
    pub spacing: f64,
    pub tol_d: f64,
    pub ok: bool,
}

const K_POINTS: usize = 200;

/// Checks that `D` is nonincreasing within `tol_D = (dx + spacing)(1 + u0_sup)`
/// over the snapshots of `traj` inside the window of `sol`.
pub fn dissipative_check(
    traj: &Trajectory,
    sol: &LocalSmoothSolution,
    psi: &Bump,
    u0_sup: f64,
) -> Result<DissipativeReport> {
    let (a, b) = sol.interval();
    let snaps: Vec<&CellState> = traj
        .snapshots
        .iter()
        .filter(|s| s.t >= a && s.t <= b)
        .collect();
    if snaps.len() < 2 {
        return Err(Error::Precondition(format!(
            "need at least two snapshots in the window [{a}, {b}]"
        )));
    }
    let spacing = snaps.windows(2).map(|w| w[1].t - w[0].t).fold(0.0, f64::max);
    if spacing > sol.h / 8.0 * (1.0 + 1e-9) {
        return Err(Error::Precondition(format!(
            "snapshot spacing {spacing} exceeds h/8 = {}",
            sol.h / 8.0
        )));
    }
    let (ka, kb) = psi.support();
    let dk = (kb - ka) / K_POINTS as f64;
    let ks: Vec<(f64, f64)> = (0..K_POINTS)
        .map(|i| {
            let k = ka + (i as f64 + 0.5) * dk;
            (k, psi.value(k) * dk)
        })
        .collect();
    let mut d = Vec::with_capacity(snaps.len());
    for s in &snaps {
        let grid = s.grid;
        let psi_bar = sol.evaluate_many(grid.centers(), s.t)?;
        let mut total = 0.0;
        for (u, p) in s.u.iter().zip(&psi_bar) {
            let w = u - p;
            for &(k, wk) in &ks {
                if w > k {
                    total += wk * (w - k);
                }
            }
        }
        d.push(total * grid.dx());
    }
    let max_increase = d.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let dx = snaps[0].dx();
    let tol_d = (dx + spacing) * (1.0 + u0_sup);
    Ok(DissipativeReport {
        t0: sol.t0,
        h: sol.h,
        times: snaps.iter().map(|s| s.t).collect(),
        d,
        max_increase,
        spacing,
        tol_d,
        ok: max_increase <= tol_d,
    })
}

/// Snapshot times covering `[a, b]` with `per_window` equal intervals.
pub fn window_snapshot_times(sol: &LocalSmoothSolution, per_window: usize) -> Vec<f64> {
    let (a, b) = sol.interval();
    (0..=per_window)
        .map(|k| if k == per_window { b } else { a + (b - a) * k as f64 / per_window as f64 })
        .collect()
}
