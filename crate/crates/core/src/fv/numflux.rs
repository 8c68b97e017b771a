use crate::error::{check_range, Error, Result};
use crate::flux::{sign_change_points, ScalarFlux};

use super::solver::Scheme;

/// Engquist–Osher flux in the form `F(u_r) + P(u_l) - P(u_r)`, where
/// `P(u) = int_{lo}^{u} max(F', 0)` is tabulated at the sign changes of `F'`.
/// Between two breakpoints `F'` has one sign, so `P` is either flat or a
/// flux increment there.
#[derive(Debug, Clone)]
pub struct EoTable<F> {
    flux: F,
    nodes: Vec<f64>,
    positive: Vec<bool>,
    cumulative: Vec<f64>,
}

impl<F: ScalarFlux> EoTable<F> {
    pub fn new(flux: F) -> Self {
        let (lo, hi) = flux.u_range();
        let mut nodes = vec![lo];
        if flux.max_speed() > 0.0 {
            nodes.extend(sign_change_points(&|u| flux.speed(u), lo, hi));
        }
        nodes.push(hi);
        nodes.dedup();
        let positive: Vec<bool> = nodes
            .windows(2)
            .map(|w| flux.speed(0.5 * (w[0] + w[1])) > 0.0)
            .collect();
        let mut cumulative = vec![0.0; nodes.len()];
        for k in 0..positive.len() {
            let inc = if positive[k] {
                flux.increment(nodes[k], nodes[k + 1])
            } else {
                0.0
            };
            cumulative[k + 1] = cumulative[k] + inc;
        }
        Self {
            flux,
            nodes,
            positive,
            cumulative,
        }
    }

    pub fn flux(&self) -> &F {
        &self.flux
    }

    /// Breakpoints of the sign of `F'` (including the range ends).
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    #[inline]
    fn interval(&self, u: f64) -> usize {
        let k = self.nodes.partition_point(|&n| n <= u);
        k.saturating_sub(1).min(self.positive.len() - 1)
    }

    /// `int_{lo}^{u} max(F'(s), 0) ds`.
    #[inline]
    pub fn positive_part(&self, u: f64) -> f64 {
        let k = self.interval(u);
        if self.positive[k] {
            self.cumulative[k] + self.flux.increment(self.nodes[k], u)
        } else {
            self.cumulative[k]
        }
    }

    /// `int_{a}^{b} max(F', 0)`.
    #[inline]
    pub fn positive_between(&self, a: f64, b: f64) -> f64 {
        self.positive_part(b) - self.positive_part(a)
    }

    /// `int_{a}^{b} min(F', 0)`.
    #[inline]
    pub fn negative_between(&self, a: f64, b: f64) -> f64 {
        self.flux.increment(a, b) - self.positive_between(a, b)
    }

    #[inline]
    pub fn eval(&self, ul: f64, ur: f64) -> f64 {
        self.flux.value(ur) + self.positive_part(ul) - self.positive_part(ur)
    }
}

/// Godunov flux for a convex `F`: `min` of `F` over `[u_l, u_r]` when
/// `u_l <= u_r`, otherwise the `max` over `[u_r, u_l]`.
#[derive(Debug, Clone)]
pub struct GodunovTable<F> {
    flux: F,
    argmin: f64,
}

impl<F: ScalarFlux> GodunovTable<F> {
    pub fn new(flux: F) -> Result<Self> {
        let (lo, hi) = flux.u_range();
        const N: usize = 1024;
        let mut prev = flux.speed(lo);
        let tol = 1e-12 * flux.max_speed().max(1.0);
        for k in 1..=N {
            let s = flux.speed(lo + (hi - lo) * k as f64 / N as f64);
            if s < prev - tol {
                return Err(Error::InvalidFlux(
                    "Godunov scheme needs a convex segment flux (F' nondecreasing)".into(),
                ));
            }
            prev = s;
        }
        let argmin = if flux.speed(lo) >= 0.0 {
            lo
        } else if flux.speed(hi) <= 0.0 {
            hi
        } else {
            sign_change_points(&|u| flux.speed(u), lo, hi)
                .first()
                .copied()
                .unwrap_or(lo)
        };
        Ok(Self { flux, argmin })
    }

    #[inline]
    pub fn eval(&self, ul: f64, ur: f64) -> f64 {
        if ul <= ur {
            self.flux.value(self.argmin.clamp(ul, ur))
        } else {
            self.flux.value(ul).max(self.flux.value(ur))
        }
    }
}

/// A segment flux with its numerical-flux tables built.
#[derive(Debug, Clone)]
pub enum PreparedFlux<F> {
    EngquistOsher(EoTable<F>),
    Godunov(GodunovTable<F>),
}

impl<F: ScalarFlux> PreparedFlux<F> {
    pub fn new(flux: F, scheme: Scheme) -> Result<Self> {
        Ok(match scheme {
            Scheme::EngquistOsher => Self::EngquistOsher(EoTable::new(flux)),
            Scheme::GodunovConvex => Self::Godunov(GodunovTable::new(flux)?),
        })
    }

    pub fn flux(&self) -> &F {
        match self {
            Self::EngquistOsher(t) => &t.flux,
            Self::Godunov(t) => &t.flux,
        }
    }

    #[inline]
    pub fn eval(&self, ul: f64, ur: f64) -> f64 {
        match self {
            Self::EngquistOsher(t) => t.eval(ul, ur),
            Self::Godunov(t) => t.eval(ul, ur),
        }
    }
}

/// Engquist–Osher numerical flux `F(0) + int_0^{u_l} max(F',0) + int_0^{u_r} min(F',0)`.
pub fn eo_flux<F: ScalarFlux>(table: &EoTable<F>, ul: f64, ur: f64) -> Result<f64> {
    let (lo, hi) = table.flux.u_range();
    check_range("u_l", ul, lo, hi)?;
    check_range("u_r", ur, lo, hi)?;
    Ok(table.eval(ul, ur))
}
