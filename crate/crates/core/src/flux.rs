//! Flux families `A = (A_1, ..., A_M)` with analytic derivatives.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad::GaussLegendre;

pub const MAX_POLY_DEGREE: usize = 8;

/// Dense polynomial `c0 + c1 u + ... + ck u^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self::new(vec![0.0])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new(
            (0..n)
                .map(|k| {
                    self.coeffs.get(k).copied().unwrap_or(0.0)
                        + other.coeffs.get(k).copied().unwrap_or(0.0)
                })
                .collect(),
        )
    }

    /// `sup |p|` on `[lo, hi]`, from endpoint and critical-point values.
    pub fn sup_abs(&self, lo: f64, hi: f64) -> f64 {
        let d = self.derivative();
        let mut best = self.eval(lo).abs().max(self.eval(hi).abs());
        for r in sign_change_points(&|u| d.eval(u), lo, hi) {
            best = best.max(self.eval(r).abs());
        }
        best
    }
}

/// Points in `(lo, hi)` where `f` changes sign (or vanishes on a sample),
/// located by sampling and bisection.
pub(crate) fn sign_change_points(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> Vec<f64> {
    const SAMPLES: usize = 2048;
    let mut out = Vec::new();
    if !(hi > lo) {
        return out;
    }
    let at = |k: usize| {
        if k == SAMPLES {
            hi
        } else {
            lo + (hi - lo) * k as f64 / SAMPLES as f64
        }
    };
    let mut a = lo;
    let mut fa = f(a);
    for k in 1..=SAMPLES {
        let b = at(k);
        let fb = f(b);
        if fb == 0.0 && k < SAMPLES {
            out.push(b);
        } else if fa * fb < 0.0 {
            let (mut l, mut r, mut fl) = (a, b, fa);
            for _ in 0..200 {
                let m = 0.5 * (l + r);
                if m <= l || m >= r {
                    break;
                }
                let fm = f(m);
                if fm == 0.0 {
                    l = m;
                    r = m;
                    break;
                }
                if (fm < 0.0) == (fl < 0.0) {
                    l = m;
                    fl = fm;
                } else {
                    r = m;
                }
            }
            out.push(0.5 * (l + r));
        }
        a = b;
        fa = fb;
    }
    out
}

/// A scalar flux `F` with derivative `F'` on a working range.
pub trait ScalarFlux: Send + Sync {
    fn value(&self, u: f64) -> f64;
    fn speed(&self, u: f64) -> f64;
    /// `F(b) - F(a)`.
    fn increment(&self, a: f64, b: f64) -> f64 {
        self.value(b) - self.value(a)
    }
    /// Certified bound for `|F'|` on the working range.
    fn max_speed(&self) -> f64;
    fn u_range(&self) -> (f64, f64);
}

/// `F = sum_i c_i A_i` for a constant path slope `c` on one segment.
#[derive(Debug, Clone)]
pub struct SegmentFlux {
    slope: Vec<f64>,
    flux: Polynomial,
    speed: Polynomial,
    max_speed: f64,
    u_range: (f64, f64),
}

impl SegmentFlux {
    pub fn slope(&self) -> &[f64] {
        &self.slope
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.flux
    }
}

impl ScalarFlux for SegmentFlux {
    fn value(&self, u: f64) -> f64 {
        self.flux.eval(u)
    }
    fn speed(&self, u: f64) -> f64 {
        self.speed.eval(u)
    }
    fn max_speed(&self) -> f64 {
        self.max_speed
    }
    fn u_range(&self) -> (f64, f64) {
        self.u_range
    }
}

/// Flux known only through its derivative; `F(b) - F(a)` is evaluated by
/// composite Gauss–Legendre quadrature.
#[derive(Clone)]
pub struct SpeedOnlyFlux {
    speed: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    value_at_zero: f64,
    rule: GaussLegendre,
    panels: usize,
    max_speed: f64,
    u_range: (f64, f64),
}

impl fmt::Debug for SpeedOnlyFlux {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpeedOnlyFlux")
            .field("u_range", &self.u_range)
            .field("max_speed", &self.max_speed)
            .finish()
    }
}

impl SpeedOnlyFlux {
    /// `points` Gauss nodes per panel; `max_speed` must bound `|speed|` on `u_range`.
    pub fn new(
        speed: impl Fn(f64) -> f64 + Send + Sync + 'static,
        value_at_zero: f64,
        points: usize,
        max_speed: f64,
        u_range: (f64, f64),
    ) -> Self {
        Self {
            speed: Arc::new(speed),
            value_at_zero,
            rule: GaussLegendre::new(points.max(1)),
            panels: 4,
            max_speed,
            u_range,
        }
    }
}

impl ScalarFlux for SpeedOnlyFlux {
    fn value(&self, u: f64) -> f64 {
        self.value_at_zero + self.increment(0.0, u)
    }
    fn speed(&self, u: f64) -> f64 {
        (self.speed)(u)
    }
    fn increment(&self, a: f64, b: f64) -> f64 {
        let h = (b - a) / self.panels as f64;
        (0..self.panels)
            .map(|p| {
                let lo = a + h * p as f64;
                self.rule.integrate(&*self.speed, lo, lo + h)
            })
            .sum()
    }
    fn max_speed(&self) -> f64 {
        self.max_speed
    }
    fn u_range(&self) -> (f64, f64) {
        self.u_range
    }
}

/// Per-channel flux with its name as given in configs.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFlux {
    pub name: String,
    pub flux: Polynomial,
    pub speed: Polynomial,
    pub speed_prime: Polynomial,
    /// `sup |a_i|` on the working range.
    pub lip_a: f64,
    /// `sup |a_i'|` on the working range.
    pub lip_a_prime: f64,
}

/// The flux family with certified bounds on `u_range`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxModel {
    channels: Vec<ChannelFlux>,
    u_range: (f64, f64),
}

const BOUND_MARGIN: f64 = 1e-9;

impl FluxModel {
    pub fn new(channels: Vec<(String, Polynomial)>, u_range: (f64, f64)) -> Result<Self> {
        let (lo, hi) = u_range;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidFlux(format!("bad u_range [{lo}, {hi}]")));
        }
        if channels.is_empty() {
            return Err(Error::InvalidFlux("need at least one channel".into()));
        }
        let channels = channels
            .into_iter()
            .map(|(name, flux)| {
                if flux.degree() > MAX_POLY_DEGREE {
                    return Err(Error::InvalidFlux(format!(
                        "polynomial degree {} exceeds {MAX_POLY_DEGREE}",
                        flux.degree()
                    )));
                }
                let speed = flux.derivative();
                let speed_prime = speed.derivative();
                let lip_a = speed.sup_abs(lo, hi);
                let lip_a_prime = speed_prime.sup_abs(lo, hi);
                Ok(ChannelFlux {
                    name,
                    lip_a: lip_a * (1.0 + BOUND_MARGIN) + f64::MIN_POSITIVE,
                    lip_a_prime: lip_a_prime * (1.0 + BOUND_MARGIN) + f64::MIN_POSITIVE,
                    flux,
                    speed,
                    speed_prime,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { channels, u_range })
    }

    /// Builds one channel per spec: `burgers`, `cubic` or `poly:c0,c1,...,ck`.
    pub fn parse<S: AsRef<str>>(specs: &[S], u_range: (f64, f64)) -> Result<Self> {
        let channels = specs
            .iter()
            .map(|s| builtin(s.as_ref()).map(|p| (s.as_ref().trim().to_string(), p)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(channels, u_range)
    }

    pub fn burgers(u_range: (f64, f64)) -> Self {
        Self::parse(&["burgers"], u_range).expect("valid builtin")
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[ChannelFlux] {
        &self.channels
    }

    pub fn u_range(&self) -> (f64, f64) {
        self.u_range
    }

    pub fn names(&self) -> Vec<String> {
        self.channels.iter().map(|c| c.name.clone()).collect()
    }

    pub fn flux(&self, i: usize, u: f64) -> f64 {
        self.channels[i].flux.eval(u)
    }

    pub fn a(&self, i: usize, u: f64) -> f64 {
        self.channels[i].speed.eval(u)
    }

    pub fn a_prime(&self, i: usize, u: f64) -> f64 {
        self.channels[i].speed_prime.eval(u)
    }

    /// `sum_i c_i A_i`, with max wave speed `sum_i |c_i| lip_a_i`.
    pub fn segment_flux(&self, slope: &[f64]) -> Result<SegmentFlux> {
        if slope.len() != self.channels.len() {
            return Err(Error::InvalidFlux(format!(
                "slope has {} channels, flux has {}",
                slope.len(),
                self.channels.len()
            )));
        }
        if slope.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidFlux("non-finite slope".into()));
        }
        let mut flux = Polynomial::zero();
        let mut max_speed = 0.0;
        for (c, ch) in slope.iter().zip(&self.channels) {
            flux = flux.add(&ch.flux.scaled(*c));
            max_speed += c.abs() * ch.lip_a;
        }
        Ok(SegmentFlux {
            slope: slope.to_vec(),
            speed: flux.derivative(),
            flux,
            max_speed,
            u_range: self.u_range,
        })
    }

    /// Finite-difference check of the analytic derivatives on a 1000-point
    /// grid: relative error of `a` against centered differences of `A` (and
    /// of `a'` against those of `a`) at step 1e-5. Returns the worst error.
    pub fn derivative_check(&self) -> f64 {
        let (lo, hi) = self.u_range;
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for ch in &self.channels {
            for k in 0..1000 {
                let u = lo + (hi - lo) * k as f64 / 999.0;
                let fd_a = (ch.flux.eval(u + h) - ch.flux.eval(u - h)) / (2.0 * h);
                let fd_ap = (ch.speed.eval(u + h) - ch.speed.eval(u - h)) / (2.0 * h);
                let a = ch.speed.eval(u);
                let ap = ch.speed_prime.eval(u);
                worst = worst.max((fd_a - a).abs() / a.abs().max(1.0));
                worst = worst.max((fd_ap - ap).abs() / ap.abs().max(1.0));
            }
        }
        worst
    }
}

/// Closed-form flux for a builtin name.
pub fn builtin(name: &str) -> Result<Polynomial> {
    let name = name.trim();
    match name {
        "burgers" => Ok(Polynomial::new(vec![0.0, 0.0, 0.5])),
        "cubic" => Ok(Polynomial::new(vec![0.0, 0.0, 0.0, 1.0 / 3.0])),
        _ => {
            let body = name
                .strip_prefix("poly:")
                .ok_or_else(|| Error::InvalidFlux(format!("unknown flux `{name}`")))?;
            let coeffs = body
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidFlux(format!("bad coefficient `{s}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if coeffs.is_empty() || coeffs.len() > MAX_POLY_DEGREE + 1 {
                return Err(Error::InvalidFlux(format!(
                    "polynomial needs 1..={} coefficients",
                    MAX_POLY_DEGREE + 1
                )));
            }
            Ok(Polynomial::new(coeffs))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn builtin_examples() {
        let f = FluxModel::parse(&["burgers", "cubic"], (-2.0, 2.0)).unwrap();
        for &u in &[-1.5, -0.3, 0.0, 0.7, 2.0] {
            assert_eq!(f.flux(0, u), 0.5 * u * u);
            assert_eq!(f.a(0, u), u);
            assert_eq!(f.a_prime(0, u), 1.0);
            assert!((f.flux(1, u) - u * u * u / 3.0).abs() < 1e-15);
            assert!((f.a(1, u) - u * u).abs() < 1e-15);
            assert!((f.a_prime(1, u) - 2.0 * u).abs() < 1e-15);
        }
        let p = FluxModel::parse(&["poly:0,0,0.5"], (-2.0, 2.0)).unwrap();
        let b = FluxModel::burgers((-2.0, 2.0));
        assert_eq!(p.channels()[0].flux, b.channels()[0].flux);
        assert!(builtin("nonsense").is_err());
        assert!(builtin("poly:1,2,x").is_err());
        assert!(builtin("poly:1,1,1,1,1,1,1,1,1,1").is_err());
        assert!(FluxModel::parse(&["burgers"], (1.0, -1.0)).is_err());
    }

    #[test]
    fn lip_bounds_dominate_samples() {
        let f = FluxModel::parse(&["burgers", "cubic", "poly:0,1,-3,0,1"], (-1.3, 0.9)).unwrap();
        assert!((f.channels()[0].lip_a - 1.3).abs() < 1e-8);
        assert!((f.channels()[1].lip_a - 1.69).abs() < 1e-8);
        for (i, ch) in f.channels().iter().enumerate() {
            for k in 0..1000 {
                let u = -1.3 + 2.2 * k as f64 / 999.0;
                assert!(f.a(i, u).abs() <= ch.lip_a);
                assert!(f.a_prime(i, u).abs() <= ch.lip_a_prime);
            }
        }
        assert!(f.derivative_check() <= 1e-6, "{}", f.derivative_check());
    }

    #[test]
    fn segment_flux_examples() {
        let f = FluxModel::parse(&["burgers"], (-1.0, 1.0)).unwrap();
        let s = f.segment_flux(&[1.0]).unwrap();
        let r = f.segment_flux(&[-1.0]).unwrap();
        let two = FluxModel::parse(&["burgers", "cubic"], (-1.0, 1.0)).unwrap();
        let c = two.segment_flux(&[2.0, -1.0]).unwrap();
        for &u in &[-1.0, -0.25, 0.5, 1.0] {
            assert_eq!(s.value(u), 0.5 * u * u);
            assert_eq!(r.value(u), -0.5 * u * u);
            assert!((c.value(u) - (u * u - u * u * u / 3.0)).abs() < 1e-15);
        }
        assert!(f.segment_flux(&[1.0, 2.0]).is_err());
        assert!(f.segment_flux(&[f64::NAN]).is_err());
    }

    #[test]
    fn speed_only_flux_matches_polynomial() {
        let g = SpeedOnlyFlux::new(|u| u * u, 0.0, 64, 1.0, (-1.0, 1.0));
        assert!((g.value(0.8) - 0.8f64.powi(3) / 3.0).abs() < 1e-14);
        assert!((g.increment(-0.5, 0.5) - 0.25 / 3.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn segment_flux_is_linear_in_slope(
            c1 in prop::collection::vec(-5.0f64..5.0, 2),
            c2 in prop::collection::vec(-5.0f64..5.0, 2),
            u in -1.0f64..1.0,
        ) {
            let f = FluxModel::parse(&["burgers", "poly:0.1,0.2,-1,0.5"], (-1.0, 1.0)).unwrap();
            let sum: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| a + b).collect();
            let (a, b, s) = (
                f.segment_flux(&c1).unwrap(),
                f.segment_flux(&c2).unwrap(),
                f.segment_flux(&sum).unwrap(),
            );
            prop_assert!((s.value(u) - a.value(u) - b.value(u)).abs() < 1e-12);
            prop_assert!((s.speed(u) - a.speed(u) - b.speed(u)).abs() < 1e-12);
        }

        #[test]
        fn wave_speed_bound_is_certified(
            c in prop::collection::vec(-10.0f64..10.0, 2),
            u in -1.0f64..1.0,
        ) {
            let f = FluxModel::parse(&["burgers", "cubic"], (-1.0, 1.0)).unwrap();
            let s = f.segment_flux(&c).unwrap();
            prop_assert!(s.speed(u).abs() <= s.max_speed());
        }
    }
}
