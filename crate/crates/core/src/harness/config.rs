use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::fv::{Boundary, Grid1D, Scheme, SolverConfig};
use crate::kinetic::XiGrid;

use super::data::{DatumSpec, PathSpec};

/// Flat `key = value` experiment description. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    /// Channel fluxes: `burgers`, `cubic` or `poly:c0,c1,...`.
    pub flux: Vec<String>,
    pub u_min: f64,
    pub u_max: f64,
    pub datum: String,
    /// Second datum for `contraction`.
    pub datum2: String,
    pub path: String,
    pub horizon: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub n_cells: usize,
    pub bc: String,
    pub cfl: f64,
    pub scheme: String,
    /// Uniform output times `T k / n_outputs`, `k = 1..=n_outputs`.
    pub n_outputs: usize,
    pub n_xi: usize,
    /// Perturbation sizes for `path-stability`.
    pub eps: Vec<f64>,
    pub level_lo: u32,
    pub level_hi: u32,
    /// Smooth data and anchor times per path for `dissipative-check`.
    pub smooth_data: usize,
    pub anchors: usize,
    /// Seeds `seed .. seed + seeds` for sweeps.
    pub seeds: u64,
    /// `psi(k)` bump for `dissipative-check`: centre and half-width.
    pub psi_center: f64,
    pub psi_width: f64,
    /// `zero`, `logistic` or `linear(lambda)`.
    pub source: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: "solve".into(),
            seed: 0,
            flux: vec!["burgers".into()],
            u_min: -1.0,
            u_max: 1.0,
            datum: "riemann(1,0)".into(),
            datum2: "riemann(0.8,0)".into(),
            path: "identity".into(),
            horizon: 1.0,
            x_lo: -1.0,
            x_hi: 1.0,
            n_cells: 400,
            bc: "outflow".into(),
            cfl: 0.9,
            scheme: "eo".into(),
            n_outputs: 10,
            n_xi: 100,
            eps: vec![0.2, 0.1, 0.05, 0.025],
            level_lo: 4,
            level_hi: 10,
            smooth_data: 3,
            anchors: 3,
            seeds: 1,
            psi_center: 0.0,
            psi_width: 0.25,
            source: "logistic".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.flux_model()?;
        self.grid()?;
        self.solver()?.validate()?;
        DatumSpec::parse(&self.datum)?;
        DatumSpec::parse(&self.datum2)?;
        PathSpec::parse(&self.path)?;
        if !(self.horizon > 0.0) {
            return Err(Error::Config(format!("horizon = {} must be positive", self.horizon)));
        }
        if self.n_outputs == 0 {
            return Err(Error::Config("n_outputs must be >= 1".into()));
        }
        if self.n_xi < 8 || !self.n_xi.is_multiple_of(2) {
            return Err(Error::Config("n_xi must be even and >= 8".into()));
        }
        if self.level_lo == 0 || self.level_hi < self.level_lo {
            return Err(Error::Config("need 1 <= level_lo <= level_hi".into()));
        }
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be >= 1".into()));
        }
        if !(self.psi_width > 0.0) {
            return Err(Error::Config("psi_width must be positive".into()));
        }
        super::data::parse_source(&self.source)?;
        Ok(())
    }

    pub fn flux_model(&self) -> Result<FluxModel> {
        FluxModel::parse(&self.flux, (self.u_min, self.u_max))
    }

    pub fn boundary(&self) -> Result<Boundary> {
        match self.bc.as_str() {
            "periodic" => Ok(Boundary::Periodic),
            "outflow" => Ok(Boundary::Outflow),
            other => Err(Error::Config(format!("unknown bc `{other}`"))),
        }
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.x_lo, self.x_hi, self.n_cells, self.boundary()?)
    }

    pub fn solver(&self) -> Result<SolverConfig> {
        let scheme: Scheme = self.scheme.parse()?;
        let cfg = SolverConfig {
            cfl: self.cfl,
            scheme,
            ..SolverConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn xi_grid(&self) -> Result<XiGrid> {
        XiGrid::covering(self.u_min.abs().max(self.u_max.abs()), self.n_xi)
    }

    pub fn output_times(&self) -> Vec<f64> {
        let n = self.n_outputs;
        (1..=n)
            .map(|k| if k == n { self.horizon } else { self.horizon * k as f64 / n as f64 })
            .collect()
    }
}
