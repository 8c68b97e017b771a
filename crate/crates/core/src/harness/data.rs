//! Initial data, paths and sources from their config strings.

use std::path::PathBuf;

use rand::Rng;

use crate::bump::{Bump, BumpSum};
use crate::error::{Error, Result};
use crate::fv::{CellState, Grid1D};
use crate::rough_path::{brownian_sample, PathSeed, PiecewiseLinearPath};
use crate::semilinear::SourceTerm;

/// Streams for data draws start here so they never meet path streams.
const DATA_STREAM: u64 = 1 << 32;
const SMOOTH_STREAM: u64 = 2 << 32;
const UNIFORM_STREAM: u64 = 3 << 32;

/// Splits `name(a, b, ...)` into the name and numeric arguments.
fn call(spec: &str) -> Result<(&str, Vec<f64>)> {
    let spec = spec.trim();
    let Some(open) = spec.find('(') else {
        return Ok((spec, vec![]));
    };
    let body = spec[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| Error::Config(format!("unbalanced parentheses in `{spec}`")))?;
    let args = body
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad number `{}` in `{spec}`: {e}", s.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((spec[..open].trim(), args))
}

fn arity(spec: &str, args: &[f64], allowed: &[usize]) -> Result<()> {
    if allowed.contains(&args.len()) {
        Ok(())
    } else {
        Err(Error::Config(format!("`{spec}` takes {allowed:?} arguments")))
    }
}

fn count(v: f64, what: &str) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::Config(format!("{what} must be a positive integer, got {v}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatumSpec {
    /// `riemann(u_l, u_r[, x0])`
    Riemann { ul: f64, ur: f64, x0: f64 },
    /// `bump(center, width, height)`
    Bump(Bump),
    /// `box(a, b, height)`: `height` on `[a, b]`, 0 elsewhere.
    Box { a: f64, b: f64, height: f64 },
    /// `sign-step`: 1 left of 0, -1 right of it.
    SignStep,
    /// `random-bv[(jumps)]`: piecewise constant with random jump positions
    /// and values in the flux range.
    RandomBv { jumps: usize },
    /// `table:<file>`: one value per cell, one per line.
    Table(PathBuf),
}

impl DatumSpec {
    pub fn parse(spec: &str) -> Result<Self> {
        if let Some(file) = spec.trim().strip_prefix("table:") {
            return Ok(Self::Table(PathBuf::from(file.trim())));
        }
        let (name, args) = call(spec)?;
        match name {
            "riemann" => {
                arity(spec, &args, &[2, 3])?;
                Ok(Self::Riemann {
                    ul: args[0],
                    ur: args[1],
                    x0: args.get(2).copied().unwrap_or(0.0),
                })
            }
            "bump" => {
                arity(spec, &args, &[3])?;
                Ok(Self::Bump(Bump::new(args[0], args[1], args[2])?))
            }
            "box" => {
                arity(spec, &args, &[3])?;
                if !(args[1] > args[0]) {
                    return Err(Error::Config(format!("empty box in `{spec}`")));
                }
                Ok(Self::Box {
                    a: args[0],
                    b: args[1],
                    height: args[2],
                })
            }
            "sign-step" => {
                arity(spec, &args, &[0])?;
                Ok(Self::SignStep)
            }
            "random-bv" => {
                arity(spec, &args, &[0, 1])?;
                let jumps = args.first().map(|&v| count(v, "jumps")).transpose()?.unwrap_or(6);
                Ok(Self::RandomBv { jumps })
            }
            _ => Err(Error::Config(format!("unknown datum `{spec}`"))),
        }
    }

    /// Cell averages on `grid`, sampled at centres. Random data draw from
    /// `stream` of `seed`.
    pub fn build(&self, grid: Grid1D, seed: u64, stream: u64, u_range: (f64, f64)) -> Result<CellState> {
        let state = match self {
            Self::Riemann { ul, ur, x0 } => CellState::from_fn(grid, |x| if x < *x0 { *ul } else { *ur }),
            Self::Bump(b) => CellState::from_fn(grid, |x| b.value(x)),
            Self::Box { a, b, height } => {
                CellState::from_fn(grid, |x| if x >= *a && x <= *b { *height } else { 0.0 })
            }
            Self::SignStep => CellState::from_fn(grid, |x| if x < 0.0 { 1.0 } else { -1.0 }),
            Self::RandomBv { jumps } => {
                let mut rng = PathSeed::new(seed).rng(DATA_STREAM + stream)?;
                let mut pts: Vec<(f64, f64)> = (0..*jumps)
                    .map(|_| {
                        (
                            rng.gen_range(grid.x_lo..grid.x_hi),
                            rng.gen_range(u_range.0..=u_range.1),
                        )
                    })
                    .collect();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                let wrap = pts.last().map_or(0.0, |p| p.1);
                CellState::from_fn(grid, |x| {
                    pts.iter().take_while(|p| p.0 <= x).last().map_or(wrap, |p| p.1)
                })
            }
            Self::Table(file) => {
                let text = std::fs::read_to_string(file)?;
                let u = text
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(|l| {
                        l.parse::<f64>()
                            .map_err(|e| Error::Config(format!("bad table value `{l}`: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                CellState::new(grid, u, 0.0)?
            }
        };
        let (lo, hi) = u_range;
        if state.min() < lo || state.max() > hi {
            return Err(Error::Config(format!(
                "datum range [{}, {}] exceeds the flux range [{lo}, {hi}]",
                state.min(),
                state.max()
            )));
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathSpec {
    /// `W(t) = t`.
    Identity,
    Zero,
    /// Up to `peak`, then back to 0 at `2 peak`.
    Tent { peak: f64 },
    /// `square(K)`: `W(t) = t^2` on `K` uniform segments.
    Square { segments: usize },
    /// `brownian(K, M)`: `M` channels on `K` uniform segments.
    Brownian { segments: usize, channels: usize },
    /// `file:<csv>` as written by the path CSV writer.
    File(PathBuf),
}

impl PathSpec {
    pub fn parse(spec: &str) -> Result<Self> {
        if let Some(file) = spec.trim().strip_prefix("file:") {
            return Ok(Self::File(PathBuf::from(file.trim())));
        }
        let (name, args) = call(spec)?;
        match name {
            "identity" => arity(spec, &args, &[0]).map(|_| Self::Identity),
            "zero" => arity(spec, &args, &[0]).map(|_| Self::Zero),
            "tent" => {
                arity(spec, &args, &[0, 1])?;
                Ok(Self::Tent {
                    peak: args.first().copied().unwrap_or(1.0),
                })
            }
            "square" => {
                arity(spec, &args, &[1])?;
                Ok(Self::Square {
                    segments: count(args[0], "segments")?,
                })
            }
            "brownian" => {
                arity(spec, &args, &[1, 2])?;
                Ok(Self::Brownian {
                    segments: count(args[0], "segments")?,
                    channels: args.get(1).map(|&v| count(v, "channels")).transpose()?.unwrap_or(1),
                })
            }
            _ => Err(Error::Config(format!("unknown path `{spec}`"))),
        }
    }

    /// Builds the path on `[0, horizon]`; `channels` is the flux channel count.
    pub fn build(&self, seed: u64, horizon: f64, channels: usize) -> Result<PiecewiseLinearPath> {
        let path = match self {
            Self::Identity => {
                let id = PiecewiseLinearPath::identity(horizon)?;
                if channels == 1 {
                    id
                } else {
                    let rows = id.knots().iter().map(|&t| vec![t; channels]).collect();
                    PiecewiseLinearPath::new(id.knots().to_vec(), rows)?
                }
            }
            Self::Zero => PiecewiseLinearPath::zero(horizon, channels)?,
            Self::Tent { peak } => PiecewiseLinearPath::tent(*peak)?,
            Self::Square { segments } => {
                PiecewiseLinearPath::from_fn(PiecewiseLinearPath::uniform_knots(horizon, *segments), |t| t * t)?
            }
            Self::Brownian { segments, channels: m } => {
                brownian_sample(&PathSeed::new(seed), horizon, *segments, *m)?
            }
            Self::File(file) => PiecewiseLinearPath::read_csv(std::fs::File::open(file)?)?,
        };
        if path.channels() != channels {
            return Err(Error::Config(format!(
                "path has {} channels, flux has {channels}",
                path.channels()
            )));
        }
        if path.horizon() < horizon * (1.0 - 1e-12) {
            return Err(Error::Config(format!(
                "path horizon {} is shorter than the run horizon {horizon}",
                path.horizon()
            )));
        }
        Ok(path)
    }
}

/// Two random bumps inside `range`: centres in its middle half, half-widths
/// in `[0.2, 0.5]` of a quarter of its length, heights in `[-0.5, 0.5]`.
pub fn random_smooth_datum(seed: u64, index: u64, range: (f64, f64)) -> Result<BumpSum> {
    let mut rng = PathSeed::new(seed).rng(SMOOTH_STREAM + index)?;
    let (lo, hi) = range;
    let len = hi - lo;
    let bumps = (0..2)
        .map(|_| {
            let c = rng.gen_range(lo + 0.25 * len..hi - 0.25 * len);
            let w = rng.gen_range(0.2..0.5) * 0.25 * len;
            let h = rng.gen_range(-0.5..0.5);
            Bump::new(c, w, h)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BumpSum { bumps })
}

/// Uniform draws in `[lo, hi]` from a dedicated stream, for anchor times.
pub fn random_uniforms(seed: u64, stream: u64, n: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let mut rng = PathSeed::new(seed).rng(UNIFORM_STREAM + stream)?;
    Ok((0..n).map(|_| rng.gen_range(lo..hi)).collect())
}

pub fn parse_source(spec: &str) -> Result<SourceTerm> {
    let (name, args) = call(spec)?;
    match name {
        "zero" => arity(spec, &args, &[0]).map(|_| SourceTerm::zero()),
        "logistic" => arity(spec, &args, &[0]).map(|_| SourceTerm::logistic()),
        "linear" => {
            arity(spec, &args, &[1])?;
            Ok(SourceTerm::linear(args[0]))
        }
        _ => Err(Error::Config(format!("unknown source `{spec}`"))),
    }
}
