//! The experiments behind the CLI subcommands. Each returns a JSON report,
//! named pass/fail gates and in-memory output files.

use serde::Serialize;
use serde_json::{json, Value};

use crate::bump::Bump;
use crate::characteristics::{dissipative_check, window_snapshot_times, LocalSmoothSolution, SmoothDatum};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::flux::FluxModel;
use crate::fv::{solve_path, Boundary, CellState, SolverConfig, StepObserver, Trajectory};
use crate::kinetic::{check_kf_bounds, check_unpr1, KineticObserver};
use crate::quad::GaussLegendre;
use crate::rough_path::{dyadic_refine, fmt_f64, sup_distance, PathSeed, PiecewiseLinearPath};
use crate::semilinear::{mismatch_report, transformed_shock_speed, write_mismatch_csv, FlowMap};

use super::config::ExperimentConfig;
use super::data::{parse_source, random_smooth_datum, random_uniforms, DatumSpec, PathSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Gate {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: Value,
    pub gates: Vec<Gate>,
    pub files: Vec<OutputFile>,
}

impl ExperimentOutput {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.pass)
    }
}

pub const EXPERIMENTS: [&str; 7] = [
    "solve",
    "contraction",
    "path-stability",
    "refine",
    "kinetic-check",
    "dissipative-check",
    "semilinear-demo",
];

pub fn run_experiment(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.experiment.as_str() {
        "solve" => run_solve(cfg, exec),
        "contraction" => run_contraction(cfg, exec),
        "path-stability" => run_path_stability(cfg, exec),
        "refine" => run_refinement(cfg, exec),
        "kinetic-check" => run_kinetic_check(cfg, exec),
        "dissipative-check" => run_dissipative(cfg, exec),
        "semilinear-demo" => run_semilinear(cfg),
        other => Err(Error::Config(format!(
            "unknown experiment `{other}` (expected one of {EXPERIMENTS:?})"
        ))),
    }
}

fn seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    (cfg.seed..cfg.seed + cfg.seeds).collect()
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header)?;
    for r in rows {
        wtr.write_record(&r)?;
    }
    wtr.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn state_bytes(s: &CellState) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    s.write_csv(&mut buf)?;
    Ok(buf)
}

fn max_of(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Flux, grid, datum and path for one seed.
struct Setup {
    flux: FluxModel,
    solver: SolverConfig,
    u0: CellState,
    path: PiecewiseLinearPath,
    outputs: Vec<f64>,
}

fn setup(cfg: &ExperimentConfig, seed: u64) -> Result<Setup> {
    let flux = cfg.flux_model()?;
    let grid = cfg.grid()?;
    let u0 = DatumSpec::parse(&cfg.datum)?.build(grid, seed, 0, flux.u_range())?;
    let path = PathSpec::parse(&cfg.path)?.build(seed, cfg.horizon, flux.n_channels())?;
    Ok(Setup {
        flux,
        solver: cfg.solver()?,
        u0,
        path,
        outputs: cfg.output_times(),
    })
}

impl Setup {
    fn solve(&self, observer: &mut dyn StepObserver) -> Result<Trajectory> {
        solve_path(&self.u0, &self.flux, &self.path, &self.outputs, &self.solver, observer)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub seed: u64,
    pub steps: usize,
    /// Largest excursion outside `[min u0, max u0]`.
    pub max_principle_violation: f64,
    /// Largest per-step increase of total variation.
    pub tv_increase: f64,
    pub mass_drift: f64,
    /// `||u(T) - u0||_{L1}`.
    pub l1_change: f64,
    /// Where the final profile crosses the midpoint of the initial range.
    pub crossing: Option<f64>,
}

fn summarize(seed: u64, u0: &CellState, tr: &Trajectory) -> Result<SolveSummary> {
    let (lo, hi) = (u0.min(), u0.max());
    let mut tv_prev = u0.total_variation();
    let mut tv_increase = 0.0_f64;
    let mut violation = 0.0_f64;
    let mut drift = 0.0_f64;
    let mass0 = u0.mass();
    for r in &tr.steps {
        violation = violation.max(r.max - hi).max(lo - r.min);
        tv_increase = tv_increase.max(r.tv - tv_prev);
        tv_prev = r.tv;
        drift = drift.max((r.mass - mass0).abs());
    }
    let last = tr.last();
    Ok(SolveSummary {
        seed,
        steps: tr.steps.len(),
        max_principle_violation: violation,
        tv_increase,
        mass_drift: drift,
        l1_change: last.l1_distance(u0)?,
        crossing: last.level_crossing(0.5 * (lo + hi)),
    })
}

pub fn run_solve(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentOutput> {
    let seeds = seeds(cfg);
    let sweep = seeds.len() > 1;
    let results = exec.map(seeds, |seed| -> Result<(SolveSummary, Vec<OutputFile>)> {
        let s = setup(cfg, seed)?;
        let tr = s.solve(&mut ())?;
        let summary = summarize(seed, &s.u0, &tr)?;
        let snaps: Vec<&CellState> = if sweep {
            vec![tr.last()]
        } else {
            tr.snapshots.iter().collect()
        };
        let mut files = Vec::new();
        for (k, snap) in snaps.iter().enumerate() {
            let k = if sweep { tr.snapshots.len() - 1 } else { k };
            files.push(OutputFile {
                name: format!("seed{seed}_u_{k:03}.csv"),
                bytes: state_bytes(snap)?,
            });
        }
        Ok((summary, files))
    });
    let mut summaries = Vec::new();
    let mut files = Vec::new();
    for r in results {
        let (s, f) = r?;
        summaries.push(s);
        files.extend(f);
    }
    let periodic = cfg.boundary()? == Boundary::Periodic;
    let mp = max_of(summaries.iter().map(|s| s.max_principle_violation));
    let tv = max_of(summaries.iter().map(|s| s.tv_increase));
    let drift = max_of(summaries.iter().map(|s| s.mass_drift));
    let mut gates = vec![
        Gate::new("maximum principle", mp <= 1e-12, format!("max violation {mp:e} (limit 1e-12)")),
        Gate::new("tv nonincreasing", tv <= 1e-10, format!("max tv increase {tv:e} (limit 1e-10)")),
    ];
    if periodic {
        gates.push(Gate::new(
            "mass conservation",
            drift <= 1e-12,
            format!("max mass drift {drift:e} (limit 1e-12)"),
        ));
    }
    files.push(OutputFile {
        name: "invariants.csv".into(),
        bytes: csv_bytes(
            &["seed", "steps", "max_principle_violation", "tv_increase", "mass_drift", "l1_change"],
            summaries.iter().map(|s| {
                vec![
                    s.seed.to_string(),
                    s.steps.to_string(),
                    fmt_f64(s.max_principle_violation),
                    fmt_f64(s.tv_increase),
                    fmt_f64(s.mass_drift),
                    fmt_f64(s.l1_change),
                ]
            }),
        )?,
    });
    Ok(ExperimentOutput {
        report: json!({ "runs": summaries }),
        gates,
        files,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionSummary {
    pub seed: u64,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    /// `max_k d_{k+1} - d_k`.
    pub max_increase: f64,
}

pub fn run_contraction(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentOutput> {
    let results = exec.map(seeds(cfg), |seed| -> Result<ContractionSummary> {
        let s = setup(cfg, seed)?;
        let v0 = DatumSpec::parse(&cfg.datum2)?.build(s.u0.grid, seed, 1, s.flux.u_range())?;
        let a = s.solve(&mut ())?;
        let b = solve_path(&v0, &s.flux, &s.path, &s.outputs, &s.solver, &mut ())?;
        let mut distances = vec![s.u0.l1_distance(&v0)?];
        distances.extend(a.l1_series(&b)?);
        let mut times = vec![0.0];
        times.extend(a.times());
        Ok(ContractionSummary {
            seed,
            max_increase: max_of(distances.windows(2).map(|w| w[1] - w[0])),
            times,
            distances,
        })
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    let worst = max_of(runs.iter().map(|r| r.max_increase));
    let rows = runs.iter().flat_map(|r| {
        r.times
            .iter()
            .zip(&r.distances)
            .map(move |(t, d)| vec![r.seed.to_string(), fmt_f64(*t), fmt_f64(*d)])
    });
    let files = vec![OutputFile {
        name: "contraction.csv".into(),
        bytes: csv_bytes(&["seed", "t", "distance"], rows)?,
    }];
    Ok(ExperimentOutput {
        report: json!({ "runs": runs, "max_increase": worst }),
        gates: vec![Gate::new(
            "l1 contraction",
            worst <= 1e-10,
            format!("largest increase of the distance series {worst:e} (limit 1e-10)"),
        )],
        files,
    })
}

/// `base + eps sin(pi t / T)` in every channel, on the base knots merged with
/// 64 uniform ones.
pub fn perturbed_path(base: &PiecewiseLinearPath, eps: f64) -> Result<PiecewiseLinearPath> {
    let h = base.horizon();
    let knots = PiecewiseLinearPath::uniform_knots(h, 64);
    let rows = knots
        .iter()
        .map(|&t| vec![(std::f64::consts::PI * t / h).sin(); base.channels()])
        .collect();
    let shape = PiecewiseLinearPath::new(knots, rows)?;
    base.combine(&shape, |a, b| a + eps * b)
}

/// Least-squares slope and intercept of `ln y` against `ln x`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn sup_l1(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    Ok(max_of(a.l1_series(b)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub eps: Vec<f64>,
    pub e: Vec<f64>,
    pub slope: f64,
    /// `exp(intercept)` of the fit, the empirical constant in `E ~ C eps^slope`.
    pub constant: f64,
    pub monotone: bool,
    /// `E(eps_min)` at the run resolution and at twice that.
    pub richardson: (f64, f64),
    pub tv_u0: f64,
}

pub fn run_path_stability(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentOutput> {
    let mut eps = cfg.eps.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    let (e_max, e_min) = (eps[0], *eps.last().expect("validated"));
    if !(e_min > 0.0) || e_max / e_min < 8.0 * (1.0 - 1e-12) {
        return Err(Error::Config(format!(
            "eps must be positive and span at least 3 octaves, got {eps:?}"
        )));
    }
    let s = setup(cfg, cfg.seed)?;
    let paths = eps.iter().map(|&e| perturbed_path(&s.path, e)).collect::<Result<Vec<_>>>()?;
    let fine_cfg = ExperimentConfig {
        n_cells: 2 * cfg.n_cells,
        ..cfg.clone()
    };
    let fine = setup(&fine_cfg, cfg.seed)?;
    // jobs: base and perturbed at the run resolution, then base and eps_min at 2n
    let mut jobs: Vec<(&Setup, &PiecewiseLinearPath)> = vec![(&s, &s.path)];
    jobs.extend(paths.iter().map(|p| (&s, p)));
    jobs.push((&fine, &fine.path));
    jobs.push((&fine, paths.last().expect("nonempty")));
    let trs = exec
        .map(jobs, |(st, p)| solve_path(&st.u0, &st.flux, p, &st.outputs, &st.solver, &mut ()))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let n = eps.len();
    let e = (1..=n).map(|k| sup_l1(&trs[0], &trs[k])).collect::<Result<Vec<_>>>()?;
    let e_fine = sup_l1(&trs[n + 1], &trs[n + 2])?;
    let (slope, intercept) = loglog_fit(&eps, &e);
    let monotone = e.windows(2).all(|w| w[1] < w[0]);
    let e_coarse = e[n - 1];
    // first-order Richardson estimate of the grid error in E(eps_min)
    let grid_err = (e_coarse - e_fine).abs();
    let report = StabilityReport {
        eps: eps.clone(),
        e: e.clone(),
        slope,
        constant: intercept.exp(),
        monotone,
        richardson: (e_coarse, e_fine),
        tv_u0: s.u0.total_variation(),
    };
    let gates = vec![
        Gate::new(
            "stability slope",
            (0.45..=1.05).contains(&slope),
            format!("fitted slope {slope:.4} (range [0.45, 1.05])"),
        ),
        Gate::new("stability monotone", monotone, format!("E = {e:?}")),
        Gate::new(
            "stability resolution",
            grid_err <= e_coarse / 10.0,
            format!("|E_n - E_2n| = {grid_err:e} vs E(eps_min)/10 = {:e}", e_coarse / 10.0),
        ),
    ];
    let files = vec![OutputFile {
        name: "stability.csv".into(),
        bytes: csv_bytes(
            &["eps", "E"],
            eps.iter().zip(&e).map(|(a, b)| vec![fmt_f64(*a), fmt_f64(*b)]),
        )?,
    }];
    Ok(ExperimentOutput {
        report: serde_json::to_value(report)?,
        gates,
        files,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementSeries {
    pub seed: u64,
    /// `d_l = sup_t ||u^(l+1) - u^(l)||_{L1}` for `l = level_lo .. level_hi - 1`.
    pub d: Vec<f64>,
    /// Sup distance between the paths at consecutive levels.
    pub path_distance: Vec<f64>,
    /// Slope of `ln d` against `ln path_distance` (reported, not gated).
    pub distance_exponent: f64,
    pub decreasing: bool,
    pub rate_ok: bool,
}

/// Seed-averaged `d_l` and pass counts over the sweep (reported, not gated).
#[derive(Debug, Clone, Serialize)]
pub struct RefinementEnsemble {
    pub seeds: usize,
    pub mean_d: Vec<f64>,
    pub mean_decreasing: bool,
    pub mean_rate: f64,
    pub decreasing_count: usize,
    pub rate_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementReport {
    pub levels: Vec<u32>,
    /// Series for the configured base path; the gates use this one.
    pub base: RefinementSeries,
    pub ensemble: Option<RefinementEnsemble>,
}

fn refinement_series(cfg: &ExperimentConfig, seed: u64, levels: &[u32]) -> Result<RefinementSeries> {
    let s = setup(cfg, seed)?;
    let ps = PathSeed::new(seed);
    let paths = levels
        .iter()
        .map(|&l| dyadic_refine(&s.path, &ps, l))
        .collect::<Result<Vec<_>>>()?;
    let trs = paths
        .iter()
        .map(|p| solve_path(&s.u0, &s.flux, p, &s.outputs, &s.solver, &mut ()))
        .collect::<Result<Vec<_>>>()?;
    let d = trs.windows(2).map(|w| sup_l1(&w[0], &w[1])).collect::<Result<Vec<_>>>()?;
    let path_distance = paths
        .windows(2)
        .map(|w| sup_distance(&w[0], &w[1], cfg.horizon))
        .collect::<Result<Vec<_>>>()?;
    let (distance_exponent, _) = loglog_fit(&path_distance, &d);
    Ok(RefinementSeries {
        seed,
        decreasing: d.windows(2).all(|w| w[1] < w[0]),
        rate_ok: d[d.len() - 1] <= d[0] / 4.0,
        d,
        path_distance,
        distance_exponent,
    })
}

pub fn run_refinement(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentOutput> {
    if cfg.level_hi < cfg.level_lo + 3 {
        return Err(Error::Config("refinement needs level_hi >= level_lo + 3".into()));
    }
    let levels: Vec<u32> = (cfg.level_lo..=cfg.level_hi).collect();
    let all = exec
        .map(seeds(cfg), |seed| refinement_series(cfg, seed, &levels))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let base = all[0].clone();
    let ensemble = (all.len() > 1).then(|| {
        let n = all.len() as f64;
        let mean_d: Vec<f64> = (0..base.d.len())
            .map(|k| all.iter().map(|s| s.d[k]).sum::<f64>() / n)
            .collect();
        RefinementEnsemble {
            seeds: all.len(),
            mean_decreasing: mean_d.windows(2).all(|w| w[1] < w[0]),
            mean_rate: mean_d[mean_d.len() - 1] / mean_d[0],
            mean_d,
            decreasing_count: all.iter().filter(|s| s.decreasing).count(),
            rate_count: all.iter().filter(|s| s.rate_ok).count(),
        }
    });
    let (first, last) = (base.d[0], base.d[base.d.len() - 1]);
    let gates = vec![
        Gate::new("refinement decreasing", base.decreasing, format!("d = {:?}", base.d)),
        Gate::new(
            "refinement rate",
            base.rate_ok,
            format!("d_last = {last:e} vs d_first/4 = {:e}", first / 4.0),
        ),
    ];
    let rows = all.iter().flat_map(|s| {
        levels.iter().zip(&s.d).zip(&s.path_distance).map(move |((l, d), p)| {
            vec![s.seed.to_string(), l.to_string(), fmt_f64(*d), fmt_f64(*p)]
        })
    });
    let files = vec![OutputFile {
        name: "refinement.csv".into(),
        bytes: csv_bytes(&["seed", "level", "d", "path_distance"], rows)?,
    }];
    let report = RefinementReport {
        levels,
        base,
        ensemble,
    };
    Ok(ExperimentOutput {
        report: serde_json::to_value(report)?,
        gates,
        files,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct KineticSummary {
    pub seed: u64,
    pub kf: crate::kinetic::KfReport,
    pub unpr_max_relative: f64,
    pub unpr_max_abs: f64,
    pub slabs: usize,
}

pub fn run_kinetic_check(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentOutput> {
    let xi = cfg.xi_grid()?;
    let seeds = seeds(cfg);
    let single = seeds.len() == 1;
    let results = exec.map(seeds, |seed| -> Result<(KineticSummary, Vec<OutputFile>)> {
        let s = setup(cfg, seed)?;
        let mut obs = KineticObserver::new(xi, &s.u0);
        s.solve(&mut obs)?;
        let kf = check_kf_bounds(&obs, &s.u0);
        let unpr = check_unpr1(&obs, &s.u0);
        let mut files = Vec::new();
        if single {
            files.push(OutputFile {
                name: "slabs.csv".into(),
                bytes: csv_bytes(
                    &["t", "dt", "mass", "m_min", "zero_line", "unpr_residual"],
                    obs.slabs.iter().zip(&unpr.residuals).map(|(s, r)| {
                        vec![
                            fmt_f64(s.t),
                            fmt_f64(s.dt),
                            fmt_f64(s.mass),
                            fmt_f64(s.m_min),
                            fmt_f64(s.zero_line),
                            fmt_f64(*r),
                        ]
                    }),
                )?,
            });
            files.push(OutputFile {
                name: "xi_mass.csv".into(),
                bytes: csv_bytes(
                    &["xi", "mass"],
                    xi.centers().zip(&obs.xi_mass).map(|(x, m)| vec![fmt_f64(x), fmt_f64(*m)]),
                )?,
            });
        }
        Ok((
            KineticSummary {
                seed,
                unpr_max_relative: unpr.max_relative,
                unpr_max_abs: unpr.max_abs_residual,
                slabs: unpr.slabs,
                kf,
            },
            files,
        ))
    });
    let mut runs = Vec::new();
    let mut files = Vec::new();
    for r in results {
        let (s, f) = r?;
        runs.push(s);
        files.extend(f);
    }
    let kf1 = runs.iter().all(|r| r.kf.kf1_ok);
    let kf2 = runs.iter().all(|r| r.kf.kf2_ok);
    let nonneg = runs.iter().all(|r| r.kf.nonneg_ok);
    let unpr = max_of(runs.iter().map(|r| r.unpr_max_relative));
    let worst = |f: fn(&KineticSummary) -> f64| max_of(runs.iter().map(f));
    let gates = vec![
        Gate::new(
            "defect total mass",
            kf1,
            format!(
                "max total / (||u0||_2^2 / 2) = {:.4}",
                worst(|r| r.kf.total_mass / r.kf.kf1_bound.max(f64::MIN_POSITIVE))
            ),
        ),
        Gate::new(
            "defect per-xi mass",
            kf2,
            format!(
                "max per-xi / ||u0||_1 = {:.4}",
                worst(|r| r.kf.per_xi_max / r.kf.kf2_bound.max(f64::MIN_POSITIVE))
            ),
        ),
        Gate::new(
            "defect nonnegative",
            nonneg,
            format!("min m = {:e}", -worst(|r| -r.kf.m_min)),
        ),
        Gate::new(
            "l1 identity",
            unpr <= 0.1,
            format!("max relative residual {unpr:e} (limit 0.1)"),
        ),
    ];
    Ok(ExperimentOutput {
        report: json!({ "runs": runs, "n_xi": xi.n_xi }),
        gates,
        files,
    })
}

/// `psi(k)` bump with unit integral.
pub fn unit_mass_bump(center: f64, width: f64) -> Result<Bump> {
    let b = Bump::unit(center, width)?;
    let mass = GaussLegendre::new(64).integrate(|x| b.value(x), center - width, center + width);
    Bump::new(center, width, 1.0 / mass)
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowSummary {
    pub seed: u64,
    pub datum: usize,
    pub t0: f64,
    pub h: f64,
    pub max_increase: f64,
    pub tol_d: f64,
    pub ok: bool,
}

/// Snapshot intervals per smooth window; the check needs spacing `<= h/8`.
const WINDOW_INTERVALS: usize = 16;

pub fn run_dissipative(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentOutput> {
    let psi = unit_mass_bump(cfg.psi_center, cfg.psi_width)?;
    let results = exec.map(seeds(cfg), |seed| -> Result<(Vec<WindowSummary>, Vec<Vec<String>>)> {
        let s = setup(cfg, seed)?;
        let anchors = random_uniforms(seed, 0, cfg.anchors, 0.1 * cfg.horizon, 0.9 * cfg.horizon)?;
        let mut sols = Vec::new();
        for i in 0..cfg.smooth_data {
            let datum = SmoothDatum::from_bumps(random_smooth_datum(seed, i as u64, (cfg.x_lo, cfg.x_hi))?)?;
            for &t0 in &anchors {
                sols.push((i, LocalSmoothSolution::new(datum.clone(), &s.path, &s.flux, t0, None)?));
            }
        }
        let mut times: Vec<f64> = sols
            .iter()
            .flat_map(|(_, sol)| window_snapshot_times(sol, WINDOW_INTERVALS))
            .filter(|&t| t > 0.0)
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let tr = solve_path(&s.u0, &s.flux, &s.path, &times, &s.solver, &mut ())?;
        let mut summaries = Vec::new();
        let mut rows = Vec::new();
        for (i, sol) in &sols {
            let r = dissipative_check(&tr, sol, &psi, s.u0.sup_norm())?;
            for (t, d) in r.times.iter().zip(&r.d) {
                rows.push(vec![
                    seed.to_string(),
                    i.to_string(),
                    fmt_f64(r.t0),
                    fmt_f64(r.h),
                    fmt_f64(*t),
                    fmt_f64(*d),
                ]);
            }
            summaries.push(WindowSummary {
                seed,
                datum: *i,
                t0: r.t0,
                h: r.h,
                max_increase: r.max_increase,
                tol_d: r.tol_d,
                ok: r.ok,
            });
        }
        Ok((summaries, rows))
    });
    let mut windows = Vec::new();
    let mut rows = Vec::new();
    for r in results {
        let (w, rr) = r?;
        windows.extend(w);
        rows.extend(rr);
    }
    let failed = windows.iter().filter(|w| !w.ok).count();
    let min_h = windows.iter().map(|w| w.h).fold(f64::INFINITY, f64::min);
    let worst_ratio = max_of(windows.iter().map(|w| w.max_increase / w.tol_d));
    let gates = vec![
        Gate::new(
            "dissipative inequality",
            failed == 0,
            format!(
                "{failed} of {} windows exceed tol_D; worst increase / tol_D = {worst_ratio:.4}",
                windows.len()
            ),
        ),
        Gate::new("smooth windows nonempty", min_h > 0.0, format!("min h = {min_h:e}")),
    ];
    let files = vec![OutputFile {
        name: "dissipative.csv".into(),
        bytes: csv_bytes(&["seed", "datum", "t0", "h", "t", "D"], rows)?,
    }];
    Ok(ExperimentOutput {
        report: json!({ "windows": windows, "psi": psi }),
        gates,
        files,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SemilinearReport {
    pub source: String,
    pub speed_at_horizon: f64,
    pub x_transform: f64,
    pub x_direct: f64,
    pub gap: f64,
    pub dx: f64,
    pub rows: Vec<crate::semilinear::MismatchRow>,
}

pub fn run_semilinear(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let flux = cfg.flux_model()?;
    let source = parse_source(&cfg.source)?;
    let (ul, ur) = match DatumSpec::parse(&cfg.datum)? {
        DatumSpec::Riemann { ul, ur, x0: 0.0 } => (ul, ur),
        _ => return Err(Error::Config("semilinear-demo needs a riemann(u_l, u_r) datum at 0".into())),
    };
    let flow = FlowMap::autonomous(source.clone(), cfg.horizon, flux.u_range())?;
    let grid = cfg.grid()?;
    let u0 = DatumSpec::parse(&cfg.datum)?.build(grid, cfg.seed, 0, flux.u_range())?;
    let times = cfg.output_times();
    let rows = mismatch_report(&flux, &flow, ul, ur, &u0, &times, &cfg.solver()?)?;
    let speed = transformed_shock_speed(&flux, &flow, ul, ur, cfg.horizon)?;
    let last = *rows.last().expect("n_outputs >= 1");
    let dx = grid.dx();
    let mut gates = Vec::new();
    let states_fixed = source.value(ul) == 0.0 && source.value(ur) == 0.0;
    if states_fixed {
        let rh = 0.5 * (ul + ur);
        let worst = max_of(rows.iter().map(|r| (r.x_direct - rh * r.t).abs()));
        gates.push(Gate::new(
            "direct shock position",
            worst <= 2.0 * dx,
            format!("max |x_direct - s t| = {worst:e} (limit 2dx = {:e})", 2.0 * dx),
        ));
    }
    if source.is_counterexample() {
        let positive = rows.iter().all(|r| r.gap > 0.0);
        let nondecreasing = rows.windows(2).all(|w| w[1].gap >= w[0].gap);
        gates.push(Gate::new(
            "gap positive and nondecreasing",
            positive && nondecreasing,
            format!("gap(T) = {:.6}", last.gap),
        ));
    }
    let mut csv = Vec::new();
    write_mismatch_csv(&rows, &mut csv)?;
    let report = SemilinearReport {
        source: source.name.clone(),
        speed_at_horizon: speed,
        x_transform: last.x_transform,
        x_direct: last.x_direct,
        gap: last.gap,
        dx,
        rows,
    };
    Ok(ExperimentOutput {
        report: serde_json::to_value(report)?,
        gates,
        files: vec![OutputFile {
            name: "mismatch.csv".into(),
            bytes: csv,
        }],
    })
}
