//! Semilinear laws `u_t + A(u)_x = Phi(u)`: the flow transform `u = Psi(v, t)`
//! that removes the source, and a direct splitting solver to compare against.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux::{FluxModel, ScalarFlux};
use crate::fv::{step, CellState, PreparedFlux, SolverConfig, StepRecord, Trajectory};
use crate::quad::adaptive;
use crate::rough_path::{fmt_f64, PiecewiseLinearPath};

type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Largest RK4 step per unit of driver variation.
const MAX_STEP: f64 = 1e-3;
const FLUX_TOL: f64 = 1e-9;
const POSITION_TOL: f64 = 1e-6;

#[derive(Clone)]
pub struct SourceTerm {
    pub name: String,
    phi: Func,
    dphi: Func,
    pub fixed_points: Vec<f64>,
}

impl fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceTerm")
            .field("name", &self.name)
            .field("fixed_points", &self.fixed_points)
            .finish()
    }
}

impl SourceTerm {
    pub fn new(
        name: impl Into<String>,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dphi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        fixed_points: Vec<f64>,
    ) -> Self {
        Self {
            name: name.into(),
            phi: Arc::new(phi),
            dphi: Arc::new(dphi),
            fixed_points,
        }
    }

    pub fn zero() -> Self {
        Self::new("zero", |_| 0.0, |_| 0.0, vec![])
    }

    /// `Phi(u) = u (1 - u)`.
    pub fn logistic() -> Self {
        Self::new("logistic", |u| u * (1.0 - u), |u| 1.0 - 2.0 * u, vec![0.0, 1.0])
    }

    /// `Phi(u) = lambda u`.
    pub fn linear(lambda: f64) -> Self {
        Self::new(format!("linear({lambda})"), move |u| lambda * u, move |_| lambda, vec![0.0])
    }

    pub fn value(&self, u: f64) -> f64 {
        (self.phi)(u)
    }

    pub fn derivative(&self, u: f64) -> f64 {
        (self.dphi)(u)
    }

    /// `Phi(0) = Phi(1) = 0` and `Phi > 0` on 1000 interior points of `(0, 1)`.
    pub fn is_counterexample(&self) -> bool {
        self.value(0.0) == 0.0
            && self.value(1.0) == 0.0
            && (1..=1000).all(|k| self.value(k as f64 / 1001.0) > 0.0)
    }
}

/// `Psi(v; t)` solving `dPsi = Phi(Psi) dW~`, `Psi(v; 0) = v`.
#[derive(Debug, Clone)]
pub struct FlowMap {
    source: SourceTerm,
    driver: PiecewiseLinearPath,
    u_range: (f64, f64),
}

impl FlowMap {
    pub fn new(source: SourceTerm, driver: PiecewiseLinearPath, u_range: (f64, f64)) -> Result<Self> {
        if driver.channels() != 1 {
            return Err(Error::InvalidPath("the source driver must be scalar".into()));
        }
        if !(u_range.1 > u_range.0) {
            return Err(Error::Config(format!("empty u_range {u_range:?}")));
        }
        Ok(Self {
            source,
            driver,
            u_range,
        })
    }

    /// Autonomous driver `W~(t) = t` on `[0, horizon]`.
    pub fn autonomous(source: SourceTerm, horizon: f64, u_range: (f64, f64)) -> Result<Self> {
        Self::new(source, PiecewiseLinearPath::identity(horizon)?, u_range)
    }

    pub fn source(&self) -> &SourceTerm {
        &self.source
    }

    pub fn horizon(&self) -> f64 {
        self.driver.horizon()
    }

    pub fn eval(&self, v: f64, t: f64) -> Result<f64> {
        Ok(self.eval_with_derivative(v, t)?.0)
    }

    /// `(Psi, Psi_v)` by RK4 on the flow and its variational equation, in the
    /// driver variable, segment by segment.
    pub fn eval_with_derivative(&self, v: f64, t: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.u_range;
        if !(v >= lo && v <= hi) {
            return Err(Error::Domain {
                what: "flow argument",
                value: v,
                lo,
                hi,
            });
        }
        let horizon = self.horizon();
        if !(t >= 0.0 && t <= horizon) {
            return Err(Error::Domain {
                what: "flow time",
                value: t,
                lo: 0.0,
                hi: horizon,
            });
        }
        let knots = self.driver.knots();
        let mut state = (v, 1.0);
        for k in 0..knots.len() - 1 {
            let (a, b) = (knots[k], knots[k + 1].min(t));
            if b <= a {
                break;
            }
            let dw = self.driver.slope(k)?[0] * (b - a);
            state = self.integrate(state, dw)?;
        }
        Ok(state)
    }

    fn integrate(&self, (mut p, mut q): (f64, f64), dw: f64) -> Result<(f64, f64)> {
        let n = (dw.abs() / MAX_STEP).ceil().max(1.0) as usize;
        let h = dw / n as f64;
        let limit = 10.0 * (self.u_range.1 - self.u_range.0);
        let rhs = |p: f64, q: f64| (self.source.value(p), self.source.derivative(p) * q);
        for _ in 0..n {
            let (k1p, k1q) = rhs(p, q);
            let (k2p, k2q) = rhs(p + 0.5 * h * k1p, q + 0.5 * h * k1q);
            let (k3p, k3q) = rhs(p + 0.5 * h * k2p, q + 0.5 * h * k2q);
            let (k4p, k4q) = rhs(p + h * k3p, q + h * k3q);
            p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
            if !(p.abs() <= limit) {
                return Err(Error::Numerical(format!("source flow blew up (|Psi| = {})", p.abs())));
            }
        }
        Ok((p, q))
    }
}

pub fn doss_sussmann_flow(flow: &FlowMap, v: f64, t: f64) -> Result<f64> {
    flow.eval(v, t)
}

fn scalar_channel(flux: &FluxModel) -> Result<()> {
    if flux.n_channels() != 1 {
        return Err(Error::InvalidFlux("the transform needs a single-channel flux".into()));
    }
    Ok(())
}

/// `A~(v, t) = int_0^v A'(Psi(w, t)) dw`.
pub fn transformed_flux(flux: &FluxModel, flow: &FlowMap, v: f64, t: f64) -> Result<f64> {
    scalar_channel(flux)?;
    let (lo, hi) = flux.u_range();
    if !(v >= lo && v <= hi) {
        return Err(Error::Domain {
            what: "transformed flux argument",
            value: v,
            lo,
            hi,
        });
    }
    integrate_speed(flux, flow, 0.0, v, t, FLUX_TOL)
}

fn integrate_speed(flux: &FluxModel, flow: &FlowMap, a: f64, b: f64, t: f64, tol: f64) -> Result<f64> {
    let err = std::cell::Cell::new(None);
    let v = adaptive(
        |w| match flow.eval(w, t) {
            Ok(p) => flux.a(0, p),
            Err(e) => {
                err.set(Some(e.to_string()));
                0.0
            }
        },
        a,
        b,
        tol,
    )?;
    match err.into_inner() {
        Some(e) => Err(Error::Numerical(e)),
        None => Ok(v),
    }
}

/// Rankine–Hugoniot speed of the transformed `v_l / v_r` jump at time `t`.
pub fn transformed_shock_speed(flux: &FluxModel, flow: &FlowMap, vl: f64, vr: f64, t: f64) -> Result<f64> {
    scalar_channel(flux)?;
    if vl == vr {
        return Err(Error::Precondition("Riemann states must differ".into()));
    }
    Ok(integrate_speed(flux, flow, vr, vl, t, FLUX_TOL)? / (vl - vr))
}

/// Shock position `x0 + int_0^t speed` of the transformed problem by nested
/// adaptive quadrature.
pub fn transformed_shock_position(
    flux: &FluxModel,
    flow: &FlowMap,
    vl: f64,
    vr: f64,
    x0: f64,
    t: f64,
) -> Result<f64> {
    Ok(x0 + shock_travel(flux, flow, vl, vr, 0.0, t)?)
}

fn shock_travel(flux: &FluxModel, flow: &FlowMap, vl: f64, vr: f64, a: f64, b: f64) -> Result<f64> {
    let err = std::cell::Cell::new(None);
    let v = adaptive(
        |tau| match transformed_shock_speed(flux, flow, vl, vr, tau) {
            Ok(s) => s,
            Err(e) => {
                err.set(Some(e.to_string()));
                0.0
            }
        },
        a,
        b,
        POSITION_TOL,
    )?;
    match err.into_inner() {
        Some(e) => Err(Error::Numerical(e)),
        None => Ok(v),
    }
}

fn rk4_scalar(source: &SourceTerm, mut u: f64, dt: f64) -> f64 {
    let n = (dt.abs() / MAX_STEP).ceil().max(1.0) as usize;
    let h = dt / n as f64;
    for _ in 0..n {
        let k1 = source.value(u);
        let k2 = source.value(u + 0.5 * h * k1);
        let k3 = source.value(u + 0.5 * h * k2);
        let k4 = source.value(u + h * k3);
        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    u
}

fn source_step(state: &mut CellState, source: &SourceTerm, dt: f64) {
    for u in &mut state.u {
        *u = rk4_scalar(source, *u, dt);
    }
}

/// Strang splitting for `u_t + A(u)_x = Phi(u)` with driver `t` for both the
/// flux and the source: half source step, conservation step, half source step.
pub fn direct_semilinear_solve(
    u0: &CellState,
    flux: &FluxModel,
    source: &SourceTerm,
    outputs: &[f64],
    config: &SolverConfig,
) -> Result<Trajectory> {
    config.validate()?;
    scalar_channel(flux)?;
    if outputs.windows(2).any(|w| !(w[1] >= w[0])) || outputs.first().is_some_and(|&t| t < u0.t) {
        return Err(Error::Precondition("output times must be sorted and >= t0".into()));
    }
    let prepared = PreparedFlux::new(flux.segment_flux(&[1.0])?, config.scheme)?;
    let max_speed = prepared.flux().max_speed();
    let dt_max = if max_speed > 0.0 {
        config.cfl * u0.dx() / max_speed
    } else {
        f64::INFINITY
    };
    let mut state = u0.clone();
    let mut snapshots = Vec::with_capacity(outputs.len());
    let mut steps = Vec::new();
    for &t_out in outputs {
        let span = t_out - state.t;
        if span > 0.0 {
            let n = if dt_max.is_finite() {
                (span / dt_max).ceil().max(1.0) as usize
            } else {
                1
            };
            let dt = span / n as f64;
            let t_start = state.t;
            for k in 0..n {
                source_step(&mut state, source, 0.5 * dt);
                if max_speed > 0.0 {
                    state = step(&state, &prepared, dt, config.cfl)?;
                }
                source_step(&mut state, source, 0.5 * dt);
                state.t = if k + 1 == n {
                    t_out
                } else {
                    t_start + (k + 1) as f64 * dt
                };
                steps.push(StepRecord::measure(&state.u, &state.grid, state.t, dt));
            }
        }
        snapshots.push(state.clone());
    }
    Ok(Trajectory { snapshots, steps })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MismatchRow {
    pub t: f64,
    pub x_transform: f64,
    pub x_direct: f64,
    pub gap: f64,
}

/// Shock positions of the `u_l / u_r` Riemann problem (jump at 0) from the
/// transform and from the direct solve at `times`. The direct shock is the
/// crossing of the midpoint between the two transported states.
pub fn mismatch_report(
    flux: &FluxModel,
    flow: &FlowMap,
    ul: f64,
    ur: f64,
    u0: &CellState,
    times: &[f64],
    config: &SolverConfig,
) -> Result<Vec<MismatchRow>> {
    if u0.grid.x_lo >= 0.0 || u0.grid.x_hi <= 0.0 {
        return Err(Error::Precondition("grid must contain the jump at 0".into()));
    }
    let (transform, direct) = std::thread::scope(|s| {
        let direct = s.spawn(|| direct_semilinear_solve(u0, flux, flow.source(), times, config));
        let mut acc = 0.0;
        let mut prev = u0.t;
        let transform: Result<Vec<f64>> = times
            .iter()
            .map(|&t| {
                acc += shock_travel(flux, flow, ul, ur, prev, t)?;
                prev = t;
                Ok(acc)
            })
            .collect();
        (transform, direct.join().expect("direct solve panicked"))
    });
    let (transform, direct) = (transform?, direct?);
    times
        .iter()
        .zip(transform)
        .zip(&direct.snapshots)
        .map(|((&t, x_transform), snap)| {
            let level = 0.5 * (flow.eval(ul, t)? + flow.eval(ur, t)?);
            let x_direct = snap.level_crossing(level).ok_or_else(|| {
                Error::Numerical(format!("no shock crossing of level {level} at t = {t}"))
            })?;
            Ok(MismatchRow {
                t,
                x_transform,
                x_direct,
                gap: x_transform - x_direct,
            })
        })
        .collect()
}

pub fn write_mismatch_csv<W: Write>(rows: &[MismatchRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["t", "x_transform", "x_direct", "gap"])?;
    for r in rows {
        wtr.write_record([fmt_f64(r.t), fmt_f64(r.x_transform), fmt_f64(r.x_direct), fmt_f64(r.gap)])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fv::{Boundary, Grid1D};
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn logistic_flow(horizon: f64) -> FlowMap {
        FlowMap::autonomous(SourceTerm::logistic(), horizon, (0.0, 1.0)).unwrap()
    }

    fn logistic_exact(v: f64, t: f64) -> f64 {
        v * t.exp() / (1.0 - v + v * t.exp())
    }

    /// `(alpha / beta)(1 - ln(1 + beta) / beta)`, `alpha = e^t`, `beta = alpha - 1`.
    fn speed_exact(t: f64) -> f64 {
        let beta = t.exp_m1();
        if beta < 1e-4 {
            return 0.5 + t / 12.0;
        }
        (t.exp() / beta) * (1.0 - t / beta)
    }

    #[test]
    fn flow_examples() {
        let zero = FlowMap::autonomous(SourceTerm::zero(), 1.0, (0.0, 1.0)).unwrap();
        assert_eq!(zero.eval(0.3, 1.0).unwrap(), 0.3);
        let f = logistic_flow(2.0);
        assert_eq!(f.eval(0.0, 1.5).unwrap(), 0.0);
        assert!((f.eval(1.0, 1.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((f.eval(0.5, 1.0).unwrap() - E / (1.0 + E)).abs() < 1e-12);
        for &v in &[0.01, 0.2, 0.7, 0.99] {
            for &t in &[0.1, 1.0, 2.0] {
                let (p, q) = f.eval_with_derivative(v, t).unwrap();
                assert!((p - logistic_exact(v, t)).abs() < 1e-8);
                let qe = t.exp() / (1.0 - v + v * t.exp()).powi(2);
                assert!((q - qe).abs() < 1e-8);
            }
        }
        assert!(f.eval(0.5, 2.5).is_err());
        assert!(f.eval(1.5, 1.0).is_err());
    }

    #[test]
    fn blow_up_detected() {
        let quad = SourceTerm::new("square", |u| u * u, |u| 2.0 * u, vec![0.0]);
        let f = FlowMap::autonomous(quad, 2.0, (0.0, 1.0)).unwrap();
        assert!(matches!(f.eval(1.0, 1.5), Err(Error::Numerical(_))));
    }

    #[test]
    fn counterexample_source() {
        assert!(SourceTerm::logistic().is_counterexample());
        assert!(!SourceTerm::zero().is_counterexample());
        assert!(!SourceTerm::linear(0.5).is_counterexample());
    }

    #[test]
    fn transformed_flux_examples() {
        let burgers = FluxModel::burgers((0.0, 1.0));
        let f = logistic_flow(1.0);
        let at0 = transformed_flux(&burgers, &f, 0.7, 0.0).unwrap();
        assert!((at0 - 0.245).abs() < 1e-12);
        // Burgers: A~(v, t) = int_0^v Psi(w; t) dw
        let s = transformed_flux(&burgers, &f, 1.0, 1.0).unwrap();
        assert!((s - E * (E - 2.0) / (E - 1.0).powi(2)).abs() < 1e-9, "{s}");
        assert!((s - speed_exact(1.0)).abs() < 1e-9);
        assert_eq!(transformed_flux(&burgers, &f, 0.0, 1.0).unwrap(), 0.0);
        // d/dv A~ = Psi
        let h = 1e-4;
        for &v in &[0.2, 0.5, 0.8] {
            let d = (transformed_flux(&burgers, &f, v + h, 0.6).unwrap()
                - transformed_flux(&burgers, &f, v - h, 0.6).unwrap())
                / (2.0 * h);
            assert!((d - logistic_exact(v, 0.6)).abs() < 1e-5);
        }
    }

    #[test]
    fn transformed_shock_examples() {
        let burgers = FluxModel::burgers((0.0, 1.0));
        let zero = FlowMap::autonomous(SourceTerm::zero(), 1.0, (0.0, 1.0)).unwrap();
        let x = transformed_shock_position(&burgers, &zero, 1.0, 0.0, 0.0, 0.8).unwrap();
        assert!((x - 0.4).abs() < 1e-12);
        let f = logistic_flow(1.0);
        let s = transformed_shock_speed(&burgers, &f, 1.0, 0.0, 1.0).unwrap();
        assert!((s - 0.661_303_112_661_534_1).abs() < 1e-6);
        // oracle: composite Simpson on the closed-form speed
        let n = 2000;
        let simpson: f64 = (0..=n)
            .map(|k| {
                let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                w * speed_exact(k as f64 / n as f64)
            })
            .sum::<f64>()
            / (3.0 * n as f64);
        assert!((simpson - 1.0 / (E - 1.0)).abs() < 1e-10);
        let x = transformed_shock_position(&burgers, &f, 1.0, 0.0, 0.0, 1.0).unwrap();
        assert!((x - simpson).abs() < 1e-5, "{x} vs {simpson}");
        assert!(x > 0.5);
    }

    fn riemann(n: usize) -> CellState {
        let g = Grid1D::new(-0.5, 1.5, n, Boundary::Outflow).unwrap();
        CellState::from_fn(g, |x| if x < 0.0 { 1.0 } else { 0.0 })
    }

    #[test]
    fn direct_solve_examples() {
        let burgers = FluxModel::burgers((0.0, 1.0));
        let cfg = SolverConfig::default();
        let u0 = riemann(400);
        let dx = u0.dx();
        for src in [SourceTerm::zero(), SourceTerm::logistic()] {
            let tr = direct_semilinear_solve(&u0, &burgers, &src, &[0.5, 1.0], &cfg).unwrap();
            for s in &tr.snapshots {
                let x = s.level_crossing(0.5).unwrap();
                assert!((x - s.t / 2.0).abs() <= 2.0 * dx, "{}: {x} at {}", src.name, s.t);
            }
        }
        let ones = CellState::from_fn(u0.grid, |_| 1.0);
        let tr = direct_semilinear_solve(&ones, &burgers, &SourceTerm::logistic(), &[1.0], &cfg).unwrap();
        assert!(tr.last().u.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn mismatch_examples() {
        let burgers = FluxModel::burgers((0.0, 1.0));
        let cfg = SolverConfig::default();
        let u0 = riemann(400);
        let dx = u0.dx();
        let times: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
        let zero = FlowMap::autonomous(SourceTerm::zero(), 1.0, (0.0, 1.0)).unwrap();
        let rows = mismatch_report(&burgers, &zero, 1.0, 0.0, &u0, &times, &cfg).unwrap();
        assert!(rows.iter().all(|r| r.gap.abs() <= 2.0 * dx));
        let rows = mismatch_report(&burgers, &logistic_flow(1.0), 1.0, 0.0, &u0, &times, &cfg).unwrap();
        assert!(rows.windows(2).all(|w| w[1].gap >= w[0].gap));
        let last = rows.last().unwrap();
        assert!((last.gap - (1.0 / (E - 1.0) - 0.5)).abs() <= 2.0 * dx + 1e-5);
        let mut buf = Vec::new();
        write_mismatch_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x_transform,x_direct,gap\n"));
        assert_eq!(text.lines().count(), 11);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn flow_property(v in 0.0f64..1.0, s in 0.0f64..1.0, t in 0.0f64..1.0) {
            let f = logistic_flow(2.0);
            let two = f.eval(f.eval(v, s).unwrap().clamp(0.0, 1.0), t).unwrap();
            let one = f.eval(v, s + t).unwrap();
            prop_assert!((two - one).abs() < 1e-7);
        }

        #[test]
        fn order_preserved(v1 in 0.0f64..1.0, v2 in 0.0f64..1.0, t in 0.0f64..2.0) {
            let f = logistic_flow(2.0);
            let (a, b) = if v1 <= v2 { (v1, v2) } else { (v2, v1) };
            prop_assert!(f.eval(a, t).unwrap() <= f.eval(b, t).unwrap());
        }
    }
}
