use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::rough_path::PiecewiseLinearPath;

use super::solver::{solve_path, solve_segment, SolverConfig};
use super::CellState;

/// `|| u_path(., t) - v(., W(t)) ||_{L1}` where `v` solves the autonomous
/// problem with slope one. Only meaningful for a nondecreasing path.
pub fn composition_check(
    flux: &FluxModel,
    u0: &CellState,
    path: &PiecewiseLinearPath,
    t: f64,
    config: &SolverConfig,
) -> Result<f64> {
    if flux.n_channels() != 1 || path.channels() != 1 {
        return Err(Error::Precondition("composition needs a single channel".into()));
    }
    if path.row(0)[0] != 0.0 {
        return Err(Error::InvalidPath("composition needs W(0) = 0".into()));
    }
    for k in 0..path.n_segments() {
        if path.slope(k)?[0] < 0.0 {
            return Err(Error::InvalidPath(format!(
                "path decreases on segment {k}; composition only holds for nondecreasing paths"
            )));
        }
    }
    let traj = solve_path(u0, flux, path, &[t], config, &mut ())?;
    let w_t = path.eval(t)?[0];
    let start = CellState { t: 0.0, ..u0.clone() };
    let auto = solve_segment(&start, flux, &[1.0], w_t, config, &mut ())?;
    auto.state.l1_distance(traj.last())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fv::{Boundary, Grid1D};

    fn riemann(n: usize) -> CellState {
        let g = Grid1D::new(-1.0, 2.0, n, Boundary::Outflow).unwrap();
        CellState::from_fn(g, |x| if x < 0.0 { 1.0 } else { 0.0 })
    }

    #[test]
    fn identity_path_is_exact() {
        let f = FluxModel::burgers((0.0, 1.0));
        let id = PiecewiseLinearPath::identity(1.0).unwrap();
        let d = composition_check(&f, &riemann(200), &id, 1.0, &SolverConfig::default()).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn quadratic_time_change() {
        let f = FluxModel::burgers((0.0, 1.0));
        let p = PiecewiseLinearPath::from_fn(
            PiecewiseLinearPath::uniform_knots(1.0, 64),
            |t| t * t,
        )
        .unwrap();
        let s = riemann(300);
        let cfg = SolverConfig::default();
        let d = composition_check(&f, &s, &p, 1.0, &cfg).unwrap();
        assert!(d <= 10.0 * s.dx(), "{d}");
        let tr = solve_path(&s, &f, &p, &[1.0], &cfg, &mut ()).unwrap();
        let x = tr.last().level_crossing(0.5).unwrap();
        assert!((x - 0.5).abs() <= 2.0 * s.dx());
    }

    #[test]
    fn tent_rejected() {
        let f = FluxModel::burgers((0.0, 1.0));
        let tent = PiecewiseLinearPath::tent(1.0).unwrap();
        assert!(composition_check(&f, &riemann(64), &tent, 2.0, &SolverConfig::default()).is_err());
    }
}
