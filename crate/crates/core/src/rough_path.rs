//! Multi-channel piecewise-linear driving signals.
//!
//! A general continuous driver is represented by a sequence of dyadic
//! refinements; every solver in this crate only ever sees piecewise-linear
//! paths, on whose segments the driver has a constant slope.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};

/// Name recorded in run manifests for the Gaussian sampler below.
pub const GENERATOR_ID: &str = "chacha20-stdnormal-v1";

/// Seed plus the name of the pseudo-random algorithm it feeds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSeed {
    pub seed: u64,
    pub generator: String,
}

impl PathSeed {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            generator: GENERATOR_ID.to_string(),
        }
    }

    /// Independent stream `stream` derived from this seed.
    pub fn rng(&self, stream: u64) -> Result<ChaCha20Rng> {
        if self.generator != GENERATOR_ID {
            return Err(Error::Config(format!(
                "unknown generator `{}` (supported: {GENERATOR_ID})",
                self.generator
            )));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        Ok(rng)
    }
}

/// Continuous piecewise-linear map `[0, T] -> R^M`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearPath {
    channels: usize,
    knots: Vec<f64>,
    /// Row-major `(K+1) x M`.
    values: Vec<f64>,
}

/// Direction of a maximal monotone window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Nondecreasing,
    Nonincreasing,
}

/// Knot-index range `[start, end]` on which a single-channel path is monotone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonotoneSegment {
    pub start: usize,
    pub end: usize,
    pub direction: Direction,
}

impl PiecewiseLinearPath {
    pub fn new(knots: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidPath("need at least two knots".into()));
        }
        if rows.len() != knots.len() {
            return Err(Error::InvalidPath(format!(
                "{} knots but {} value rows",
                knots.len(),
                rows.len()
            )));
        }
        let channels = rows[0].len();
        if channels == 0 {
            return Err(Error::InvalidPath("need at least one channel".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * channels);
        for row in &rows {
            if row.len() != channels {
                return Err(Error::InvalidPath("ragged value rows".into()));
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(channels, knots, values)
    }

    fn from_flat(channels: usize, knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots[0] != 0.0 {
            return Err(Error::InvalidPath(format!("first knot must be 0, got {}", knots[0])));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) || knots.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidPath("knots must be finite and strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPath("path values must be finite".into()));
        }
        Ok(Self {
            channels,
            knots,
            values,
        })
    }

    /// Single-channel path sampled from `f` at the given knots.
    pub fn from_fn(knots: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = knots.iter().map(|&t| f(t)).collect();
        Self::from_flat(1, knots, values)
    }

    pub fn zero(horizon: f64, channels: usize) -> Result<Self> {
        Self::new(vec![0.0, horizon], vec![vec![0.0; channels]; 2])
    }

    /// `W(t) = t` on `[0, horizon]`, single channel.
    pub fn identity(horizon: f64) -> Result<Self> {
        Self::from_fn(vec![0.0, horizon], |t| t)
    }

    /// `W` rises with slope 1 on `[0, peak]` and returns to 0 at `2 peak`.
    pub fn tent(peak: f64) -> Result<Self> {
        Self::new(vec![0.0, peak, 2.0 * peak], vec![vec![0.0], vec![peak], vec![0.0]])
    }

    pub fn uniform_knots(horizon: f64, segments: usize) -> Vec<f64> {
        (0..=segments)
            .map(|k| {
                if k == segments {
                    horizon
                } else {
                    horizon * k as f64 / segments as f64
                }
            })
            .collect()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn n_segments(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.knots.last().expect("at least two knots")
    }

    /// Values at knot `k`.
    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.channels..(k + 1) * self.channels]
    }

    fn segment_of(&self, t: f64) -> usize {
        // last k with knots[k] <= t, capped to the final segment
        let k = self.knots.partition_point(|&s| s <= t);
        k.saturating_sub(1).min(self.n_segments() - 1)
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.channels];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        check_range("t", t, 0.0, self.horizon())?;
        let k = self.segment_of(t);
        let (t0, t1) = (self.knots[k], self.knots[k + 1]);
        let (a, b) = (self.row(k), self.row(k + 1));
        if t == t0 {
            out.copy_from_slice(a);
        } else if t == t1 {
            out.copy_from_slice(b);
        } else {
            let s = (t - t0) / (t1 - t0);
            for i in 0..self.channels {
                out[i] = a[i] + s * (b[i] - a[i]);
            }
        }
        Ok(())
    }

    pub fn slope(&self, k: usize) -> Result<Vec<f64>> {
        if k >= self.n_segments() {
            return Err(Error::Index {
                index: k,
                len: self.n_segments(),
            });
        }
        let dt = self.knots[k + 1] - self.knots[k];
        Ok(self
            .row(k + 1)
            .iter()
            .zip(self.row(k))
            .map(|(b, a)| (b - a) / dt)
            .collect())
    }

    /// Largest channel slope magnitude over all segments.
    pub fn max_abs_slope(&self) -> f64 {
        (0..self.n_segments())
            .flat_map(|k| self.slope(k).expect("in range"))
            .fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn is_uniform(&self) -> bool {
        let dt = self.knots[1] - self.knots[0];
        self.knots
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-12 * dt.max(1.0))
    }

    /// Pointwise `f(self(t), other(t))` on the merged knot set of both paths.
    pub fn combine(
        &self,
        other: &Self,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        if self.channels != other.channels {
            return Err(Error::InvalidPath("channel counts differ".into()));
        }
        let horizon = self.horizon().min(other.horizon());
        let knots = merged_knots(&self.knots, &other.knots, horizon);
        let mut values = Vec::with_capacity(knots.len() * self.channels);
        let mut a = vec![0.0; self.channels];
        let mut b = vec![0.0; self.channels];
        for &t in &knots {
            self.eval_into(t, &mut a)?;
            other.eval_into(t, &mut b)?;
            values.extend(a.iter().zip(&b).map(|(&x, &y)| f(x, y)));
        }
        Self::from_flat(self.channels, knots, values)
    }

    /// The path restricted to `[0, t]`.
    pub fn truncate(&self, t: f64) -> Result<Self> {
        check_range("t", t, 0.0, self.horizon())?;
        if t <= 0.0 {
            return Err(Error::InvalidPath("cannot truncate to an empty interval".into()));
        }
        let knots = merged_knots(&self.knots, &[t], t);
        let mut values = Vec::with_capacity(knots.len() * self.channels);
        let mut row = vec![0.0; self.channels];
        for &s in &knots {
            self.eval_into(s, &mut row)?;
            values.extend_from_slice(&row);
        }
        Self::from_flat(self.channels, knots, values)
    }

    /// Maximal monotone windows of a single-channel path. Zero-slope segments
    /// join the window on their left (a leading flat run joins the first
    /// window).
    pub fn monotone_segments(&self) -> Result<Vec<MonotoneSegment>> {
        if self.channels != 1 {
            return Err(Error::InvalidPath("monotone_segments needs a single channel".into()));
        }
        let mut out: Vec<MonotoneSegment> = Vec::new();
        let mut pending_flat_start: Option<usize> = None;
        for k in 0..self.n_segments() {
            let d = self.values[k + 1] - self.values[k];
            let dir = if d > 0.0 {
                Some(Direction::Nondecreasing)
            } else if d < 0.0 {
                Some(Direction::Nonincreasing)
            } else {
                None
            };
            match (dir, out.last_mut()) {
                (None, Some(last)) => last.end = k + 1,
                (None, None) => {
                    pending_flat_start.get_or_insert(k);
                }
                (Some(dir), Some(last)) if last.direction == dir => last.end = k + 1,
                (Some(dir), _) => out.push(MonotoneSegment {
                    start: pending_flat_start.take().unwrap_or(k),
                    end: k + 1,
                    direction: dir,
                }),
            }
        }
        if out.is_empty() {
            out.push(MonotoneSegment {
                start: 0,
                end: self.n_segments(),
                direction: Direction::Nondecreasing,
            });
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.channels).map(|i| format!("W{i}")));
        wtr.write_record(&header)?;
        for (k, &t) in self.knots.iter().enumerate() {
            let mut rec = vec![fmt_f64(t)];
            rec.extend(self.row(k).iter().map(|&v| fmt_f64(v)));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("t") || headers.len() < 2 {
            return Err(Error::InvalidPath("expected header `t,W1,...,WM`".into()));
        }
        let mut knots = Vec::new();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let mut nums = rec.iter().map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidPath(format!("bad number `{s}`: {e}")))
            });
            knots.push(nums.next().transpose()?.unwrap_or(f64::NAN));
            rows.push(nums.collect::<Result<Vec<_>>>()?);
        }
        Self::new(knots, rows)
    }
}

/// Formats with 17 significant digits so values round-trip exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn merged_knots(a: &[f64], b: &[f64], horizon: f64) -> Vec<f64> {
    let mut knots: Vec<f64> = a
        .iter()
        .chain(b)
        .copied()
        .filter(|&t| t <= horizon)
        .chain(std::iter::once(horizon))
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    knots
}

/// `sup_{s in [0,t]} max_i |p1_i(s) - p2_i(s)|`, exact for piecewise-linear
/// inputs (the difference is piecewise linear, so the sup sits on a knot).
pub fn sup_distance(p1: &PiecewiseLinearPath, p2: &PiecewiseLinearPath, t: f64) -> Result<f64> {
    if p1.channels != p2.channels {
        return Err(Error::InvalidPath("channel counts differ".into()));
    }
    check_range("t", t, 0.0, p1.horizon().min(p2.horizon()))?;
    let mut a = vec![0.0; p1.channels];
    let mut b = vec![0.0; p1.channels];
    let mut sup: f64 = 0.0;
    for s in merged_knots(&p1.knots, &p2.knots, t) {
        p1.eval_into(s, &mut a)?;
        p2.eval_into(s, &mut b)?;
        for (x, y) in a.iter().zip(&b) {
            sup = sup.max((x - y).abs());
        }
    }
    Ok(sup)
}

/// Brownian motion sampled on `segments` uniform steps of `[0, horizon]`.
pub fn brownian_sample(
    seed: &PathSeed,
    horizon: f64,
    segments: usize,
    channels: usize,
) -> Result<PiecewiseLinearPath> {
    if segments == 0 || channels == 0 || !(horizon > 0.0) {
        return Err(Error::Precondition(
            "brownian_sample needs segments >= 1, channels >= 1, horizon > 0".into(),
        ));
    }
    let mut rng = seed.rng(0)?;
    let knots = PiecewiseLinearPath::uniform_knots(horizon, segments);
    let sd = (horizon / segments as f64).sqrt();
    let mut values = vec![0.0; (segments + 1) * channels];
    for k in 1..=segments {
        for i in 0..channels {
            let z: f64 = StandardNormal.sample(&mut rng);
            values[k * channels + i] = values[(k - 1) * channels + i] + sd * z;
        }
    }
    PiecewiseLinearPath::from_flat(channels, knots, values)
}

/// Applies `level` rounds of Brownian-bridge midpoint insertion. Round `r`
/// draws from stream `r` of `seed`, so refinements at consecutive levels are
/// nested: `refine(p, s, l + 1)` refines `refine(p, s, l)`.
pub fn dyadic_refine(
    path: &PiecewiseLinearPath,
    seed: &PathSeed,
    level: u32,
) -> Result<PiecewiseLinearPath> {
    dyadic_refine_scaled(path, seed, level, 1.0)
}

/// As [`dyadic_refine`] with bridge noise multiplied by `noise_scale`
/// (0 gives plain linear midpoint insertion).
pub fn dyadic_refine_scaled(
    path: &PiecewiseLinearPath,
    seed: &PathSeed,
    level: u32,
    noise_scale: f64,
) -> Result<PiecewiseLinearPath> {
    if level == 0 {
        return Err(Error::Precondition("refinement level must be >= 1".into()));
    }
    if !path.is_uniform() {
        return Err(Error::InvalidPath("dyadic refinement needs uniform knots".into()));
    }
    let m = path.channels;
    let mut cur = path.clone();
    for round in 1..=u64::from(level) {
        let mut rng = seed.rng(round)?;
        let k = cur.n_segments();
        let dt = cur.horizon() / k as f64;
        let sd = noise_scale * (dt / 4.0).sqrt();
        let knots = PiecewiseLinearPath::uniform_knots(cur.horizon(), 2 * k);
        let mut values = vec![0.0; (2 * k + 1) * m];
        for j in 0..=k {
            values[2 * j * m..(2 * j + 1) * m].copy_from_slice(cur.row(j));
        }
        for j in 0..k {
            for i in 0..m {
                let z: f64 = StandardNormal.sample(&mut rng);
                let mid = 0.5 * (cur.row(j)[i] + cur.row(j + 1)[i]);
                values[(2 * j + 1) * m + i] = mid + sd * z;
            }
        }
        cur = PiecewiseLinearPath::from_flat(m, knots, values)?;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eval_examples() {
        let z = PiecewiseLinearPath::zero(2.0, 3).unwrap();
        assert_eq!(z.eval(1.3).unwrap(), vec![0.0; 3]);
        let p = PiecewiseLinearPath::new(vec![0.0, 1.0], vec![vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(p.eval(0.5).unwrap(), vec![1.0]);
        assert!(matches!(p.eval(1.5), Err(Error::Domain { .. })));
        assert!(p.eval(-0.1).is_err());
        let b = brownian_sample(&PathSeed::new(7), 1.0, 16, 2).unwrap();
        for k in 0..=16 {
            assert_eq!(b.eval(b.knots()[k]).unwrap(), b.row(k).to_vec());
        }
    }

    #[test]
    fn slope_examples() {
        let id = PiecewiseLinearPath::identity(3.0).unwrap();
        assert_eq!(id.slope(0).unwrap(), vec![1.0]);
        let tent = PiecewiseLinearPath::tent(1.0).unwrap();
        assert_eq!(tent.slope(1).unwrap(), vec![-1.0]);
        let two = PiecewiseLinearPath::new(
            vec![0.0, 0.5, 1.0],
            vec![vec![0.0, 0.0], vec![1.0, -0.5], vec![1.0, 0.5]],
        )
        .unwrap();
        assert_eq!(two.slope(0).unwrap(), vec![2.0, -1.0]);
        assert_eq!(two.slope(1).unwrap(), vec![0.0, 2.0]);
        assert!(matches!(two.slope(2), Err(Error::Index { .. })));
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(PiecewiseLinearPath::new(vec![0.0], vec![vec![0.0]]).is_err());
        assert!(PiecewiseLinearPath::new(vec![0.0, 0.0], vec![vec![0.0], vec![1.0]]).is_err());
        assert!(
            PiecewiseLinearPath::new(vec![0.0, 1.0], vec![vec![0.0], vec![f64::NAN]]).is_err()
        );
    }

    #[test]
    fn sup_distance_examples() {
        let id = PiecewiseLinearPath::identity(1.0).unwrap();
        assert_eq!(sup_distance(&id, &id, 1.0).unwrap(), 0.0);
        let eps = 0.125;
        let shifted = PiecewiseLinearPath::from_fn(vec![0.0, 1.0], |t| t + eps).unwrap();
        assert!((sup_distance(&id, &shifted, 1.0).unwrap() - eps).abs() < 1e-15);
        let tent = PiecewiseLinearPath::tent(1.0).unwrap();
        let zero = PiecewiseLinearPath::zero(2.0, 1).unwrap();
        assert_eq!(sup_distance(&tent, &zero, 2.0).unwrap(), 1.0);
        // the sup over [0, 0.5] is reached at the horizon, not at a knot of either path
        assert_eq!(sup_distance(&tent, &zero, 0.5).unwrap(), 0.5);
        assert!(sup_distance(&tent, &id, 1.5).is_err());
    }

    #[test]
    fn brownian_is_deterministic_and_scaled() {
        let s = PathSeed::new(42);
        let a = brownian_sample(&s, 2.0, 1, 3).unwrap();
        let b = brownian_sample(&s, 2.0, 1, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_segments(), 1);
        let c = brownian_sample(&PathSeed::new(43), 2.0, 1, 3).unwrap();
        assert_ne!(a, c);
        let bad = PathSeed {
            seed: 1,
            generator: "mt19937".into(),
        };
        assert!(brownian_sample(&bad, 1.0, 4, 1).is_err());
    }

    #[test]
    fn brownian_terminal_variance_matches_horizon() {
        // Monte-Carlo oracle: E[W(T)^2] = T
        let horizon = 1.5;
        let n = 10_000;
        let mean_sq: f64 = (0..n)
            .map(|s| {
                let p = brownian_sample(&PathSeed::new(s), horizon, 8, 1).unwrap();
                p.row(8)[0].powi(2)
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean_sq - horizon).abs() < 0.05 * horizon, "{mean_sq}");
    }

    #[test]
    fn refinement_examples() {
        let lin = PiecewiseLinearPath::from_fn(PiecewiseLinearPath::uniform_knots(1.0, 4), |t| {
            3.0 * t - 1.0
        })
        .unwrap();
        let r = dyadic_refine_scaled(&lin, &PathSeed::new(0), 2, 0.0).unwrap();
        assert_eq!(r.n_segments(), 16);
        for (k, &t) in r.knots().iter().enumerate() {
            assert!((r.row(k)[0] - (3.0 * t - 1.0)).abs() < 1e-15);
        }
        let b = brownian_sample(&PathSeed::new(5), 1.0, 8, 2).unwrap();
        let r1 = dyadic_refine(&b, &PathSeed::new(9), 1).unwrap();
        let r3 = dyadic_refine(&b, &PathSeed::new(9), 3).unwrap();
        for k in 0..=8 {
            assert_eq!(r1.row(2 * k), b.row(k));
            assert_eq!(r3.row(8 * k), b.row(k));
        }
        // nested levels
        for k in 0..=16 {
            assert_eq!(r3.row(4 * k), r1.row(k));
        }
        assert_eq!(r3, dyadic_refine(&b, &PathSeed::new(9), 3).unwrap());
        let nonuniform =
            PiecewiseLinearPath::new(vec![0.0, 0.3, 1.0], vec![vec![0.0]; 3]).unwrap();
        assert!(dyadic_refine(&nonuniform, &PathSeed::new(0), 1).is_err());
    }

    #[test]
    fn refinement_distance_median() {
        // Monte-Carlo oracle over seeds
        let segments = 16;
        let dt = 1.0 / segments as f64;
        let mut d: Vec<f64> = (0..1000)
            .map(|s| {
                let p = brownian_sample(&PathSeed::new(s), 1.0, segments, 1).unwrap();
                let r = dyadic_refine(&p, &PathSeed::new(s + 100_000), 1).unwrap();
                sup_distance(&p, &r, 1.0).unwrap()
            })
            .collect();
        d.sort_by(f64::total_cmp);
        let median = d[d.len() / 2];
        assert!(median <= 2.0 * dt.sqrt(), "median {median}");
    }

    #[test]
    fn monotone_segment_examples() {
        let id = PiecewiseLinearPath::identity(1.0).unwrap();
        assert_eq!(
            id.monotone_segments().unwrap(),
            vec![MonotoneSegment {
                start: 0,
                end: 1,
                direction: Direction::Nondecreasing
            }]
        );
        let tent = PiecewiseLinearPath::tent(1.0).unwrap();
        let segs = tent.monotone_segments().unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].direction, Direction::Nondecreasing);
        assert_eq!(segs[1].direction, Direction::Nonincreasing);
        assert_eq!((segs[1].start, segs[1].end), (1, 2));
        let flat = PiecewiseLinearPath::new(
            vec![0.0, 1.0, 2.0, 3.0],
            vec![vec![0.0], vec![1.0], vec![1.0], vec![2.0]],
        )
        .unwrap();
        assert_eq!(
            flat.monotone_segments().unwrap(),
            vec![MonotoneSegment {
                start: 0,
                end: 3,
                direction: Direction::Nondecreasing
            }]
        );
        let two = PiecewiseLinearPath::zero(1.0, 2).unwrap();
        assert!(two.monotone_segments().is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let p = brownian_sample(&PathSeed::new(3), 1.0, 5, 2).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,W1,W2\n"));
        let q = PiecewiseLinearPath::read_csv(buf.as_slice()).unwrap();
        assert_eq!(p, q);
    }

    fn arb_path() -> impl Strategy<Value = PiecewiseLinearPath> {
        (1usize..6, any::<u64>()).prop_map(|(k, s)| {
            brownian_sample(&PathSeed::new(s), 1.0, k, 2).unwrap()
        })
    }

    proptest! {
        #[test]
        fn eval_is_lipschitz(p in arb_path(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let l = p.max_abs_slope();
            let (x, y) = (p.eval(a).unwrap(), p.eval(b).unwrap());
            for i in 0..2 {
                prop_assert!((x[i] - y[i]).abs() <= l * (a - b).abs() * (1.0 + 1e-12) + 1e-14);
            }
        }

        #[test]
        fn sup_distance_is_a_metric(p in arb_path(), q in arb_path(), r in arb_path(), t in 0.01f64..1.0) {
            let pq = sup_distance(&p, &q, t).unwrap();
            let qp = sup_distance(&q, &p, t).unwrap();
            let pr = sup_distance(&p, &r, t).unwrap();
            let rq = sup_distance(&r, &q, t).unwrap();
            prop_assert_eq!(pq, qp);
            prop_assert!(pq <= pr + rq + 1e-12);
            prop_assert_eq!(sup_distance(&p, &p, t).unwrap(), 0.0);
            if p.eval(t).unwrap() != q.eval(t).unwrap() {
                prop_assert!(pq > 0.0);
            }
        }

        #[test]
        fn refinement_keeps_old_knots(p in arb_path(), s in any::<u64>(), level in 1u32..4) {
            let r = dyadic_refine(&p, &PathSeed::new(s), level).unwrap();
            for &t in p.knots() {
                prop_assert_eq!(p.eval(t).unwrap(), r.eval(t).unwrap());
            }
        }
    }
}
