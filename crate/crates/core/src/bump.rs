//! Smooth compactly supported bumps built from `exp(-1/(1-z^2))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `height * exp(1 - 1/(1 - z^2))` with `z = (x - center)/width`; peak value
/// is `height`, support is `[center - width, center + width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    pub height: f64,
}

impl Bump {
    pub fn new(center: f64, width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0) || !center.is_finite() || !height.is_finite() {
            return Err(Error::Config(format!(
                "bump needs finite center/height and width > 0 (got {center}, {width}, {height})"
            )));
        }
        Ok(Self {
            center,
            width,
            height,
        })
    }

    pub fn unit(center: f64, width: f64) -> Result<Self> {
        Self::new(center, width, 1.0)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.width, self.center + self.width)
    }

    pub fn value(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.width;
        if z.abs() >= 1.0 {
            return 0.0;
        }
        self.height * (1.0 - 1.0 / (1.0 - z * z)).exp()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.width;
        if z.abs() >= 1.0 {
            return 0.0;
        }
        let q = 1.0 - z * z;
        self.value(x) * (-2.0 * z / (q * q)) / self.width
    }

    /// Sup of `|value'|`, sampled on 4001 points.
    pub fn max_slope(&self) -> f64 {
        (0..=4000)
            .map(|k| self.derivative(self.center - self.width + self.width * k as f64 / 2000.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Sum of bumps; a convenient smooth, compactly supported datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpSum {
    pub bumps: Vec<Bump>,
}

impl BumpSum {
    pub fn value(&self, x: f64) -> f64 {
        self.bumps.iter().map(|b| b.value(x)).sum()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.bumps.iter().map(|b| b.derivative(x)).sum()
    }

    pub fn support(&self) -> (f64, f64) {
        self.bumps.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| {
            let (a, c) = b.support();
            (lo.min(a), hi.max(c))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_shape() {
        let b = Bump::new(1.0, 0.5, 2.0).unwrap();
        assert_eq!(b.value(1.0), 2.0);
        assert_eq!(b.value(1.5), 0.0);
        assert_eq!(b.value(0.4), 0.0);
        assert_eq!(b.derivative(1.0), 0.0);
        let h = 1e-6;
        for &x in &[0.7, 0.9, 1.2, 1.4] {
            let fd = (b.value(x + h) - b.value(x - h)) / (2.0 * h);
            assert!((fd - b.derivative(x)).abs() < 1e-6);
        }
        assert!(Bump::new(0.0, 0.0, 1.0).is_err());
    }
}
