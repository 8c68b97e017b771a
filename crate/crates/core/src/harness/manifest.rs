//! Run directories `<root>/<id>/{manifest.json, report.json, config.toml, *.csv}`.

use std::collections::BTreeMap;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::exec::Exec;

use super::config::ExperimentConfig;
use super::experiments::{run_experiment, ExperimentOutput};

pub const OUT_ENV: &str = "ROUGH_SCL_OUT";

/// `--out` if given, else `$ROUGH_SCL_OUT`, else `runs`.
pub fn output_root(cli: Option<&Path>) -> PathBuf {
    match cli {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n_cells: usize,
    pub bc: String,
    pub n_xi: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub experiment: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub grid: GridInfo,
    pub versions: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub passed: bool,
    pub wall_clock_secs: f64,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

fn versions() -> BTreeMap<String, String> {
    let mut v = BTreeMap::new();
    v.insert(env!("CARGO_PKG_NAME").to_string(), env!("CARGO_PKG_VERSION").to_string());
    v.insert("rng".into(), "chacha20".into());
    v
}

/// Creates a fresh directory under `root`; concurrent callers never get the same one.
pub fn create_run_dir(root: &Path, stem: &str) -> Result<(String, PathBuf)> {
    fs::create_dir_all(root)?;
    for k in 0u32.. {
        let id = format!("{stem}-{k:04}");
        let dir = root.join(&id);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok((id, dir)),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!("run directory counter exhausted")
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub output: ExperimentOutput,
}

pub fn execute(cfg: &ExperimentConfig, root: &Path, exec: Exec) -> Result<RunResult> {
    cfg.validate()?;
    let started = Instant::now();
    let output = run_experiment(cfg, exec)?;
    let wall = started.elapsed().as_secs_f64();
    let (run_id, dir) = create_run_dir(root, &format!("{}-s{}", cfg.experiment, cfg.seed))?;
    let mut outputs = Vec::new();
    for f in &output.files {
        if f.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("output name `{}` is not a plain file name", f.name)));
        }
        fs::write(dir.join(&f.name), &f.bytes)?;
        outputs.push(f.name.clone());
    }
    fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    let report = json!({
        "experiment": cfg.experiment,
        "passed": output.passed(),
        "gates": output.gates,
        "report": output.report,
    });
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    let manifest = RunManifest {
        run_id,
        experiment: cfg.experiment.clone(),
        config: cfg.clone(),
        seeds: (cfg.seed..cfg.seed + cfg.seeds).collect(),
        grid: GridInfo {
            x_lo: cfg.x_lo,
            x_hi: cfg.x_hi,
            n_cells: cfg.n_cells,
            bc: cfg.bc.clone(),
            n_xi: cfg.n_xi,
        },
        versions: versions(),
        outputs,
        passed: output.passed(),
        wall_clock_secs: wall,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(RunResult { dir, manifest, output })
}

/// Re-executes the configuration stored in a manifest into a new run directory.
pub fn rerun(manifest: &Path, root: &Path, exec: Exec) -> Result<RunResult> {
    execute(&RunManifest::load(manifest)?.config, root, exec)
}

/// Output files whose bytes differ between two run directories.
pub fn compare_outputs(a: &RunResult, b: &RunResult) -> Result<Vec<String>> {
    let mut differing = Vec::new();
    if a.manifest.outputs != b.manifest.outputs {
        differing.push("<file list>".into());
    }
    for name in &a.manifest.outputs {
        if fs::read(a.dir.join(name))? != fs::read(b.dir.join(name)).unwrap_or_default() {
            differing.push(name.clone());
        }
    }
    Ok(differing)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_dirs_are_unique() {
        let tmp = tempfile::tempdir().unwrap();
        let (a, _) = create_run_dir(tmp.path(), "x").unwrap();
        let (b, _) = create_run_dir(tmp.path(), "x").unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn rerun_reproduces_csvs() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            experiment: "contraction".into(),
            path: "brownian(16)".into(),
            n_cells: 80,
            ..ExperimentConfig::default()
        };
        let first = execute(&cfg, tmp.path(), Exec::Parallel).unwrap();
        let again = rerun(&first.dir.join("manifest.json"), tmp.path(), Exec::Sequential).unwrap();
        assert_ne!(first.dir, again.dir);
        assert!(compare_outputs(&first, &again).unwrap().is_empty());
        assert!(first.dir.join("report.json").exists());
        let back = ExperimentConfig::load(&first.dir.join("config.toml")).unwrap();
        assert_eq!(back, cfg);
    }
}
