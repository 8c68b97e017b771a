use rough_scl::exec::Exec;
use rough_scl::harness::suite::{run_criterion, SuiteContext};
use rough_scl::harness::{execute, run_experiment, ExperimentConfig, EXPERIMENTS};

fn small(experiment: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        experiment: experiment.into(),
        n_cells: 120,
        n_outputs: 4,
        path: "brownian(16)".into(),
        ..ExperimentConfig::default()
    };
    match experiment {
        "refine" => {
            cfg.path = "brownian(1)".into();
            cfg.level_lo = 2;
            cfg.level_hi = 5;
        }
        "semilinear-demo" => {
            cfg.u_min = 0.0;
            cfg.path = "identity".into();
        }
        "dissipative-check" => {
            cfg.datum = "box(-0.5,0.5,1)".into();
            cfg.smooth_data = 1;
            cfg.anchors = 1;
        }
        _ => {}
    }
    cfg
}

#[test]
fn every_experiment_runs_from_toml() {
    let tmp = tempfile::tempdir().unwrap();
    for name in EXPERIMENTS {
        let cfg = ExperimentConfig::from_toml(&small(name).to_toml().unwrap()).unwrap();
        let r = execute(&cfg, tmp.path(), Exec::Sequential).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(!r.output.gates.is_empty(), "{name} has no gates");
        assert!(r.dir.join("manifest.json").exists());
    }
}

#[test]
fn sweep_results_do_not_depend_on_policy() {
    let cfg = ExperimentConfig {
        seeds: 4,
        datum: "random-bv".into(),
        ..small("kinetic-check")
    };
    let a = run_experiment(&cfg, Exec::Sequential).unwrap();
    let b = run_experiment(&cfg, Exec::Parallel).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.files, b.files);
}

#[test]
fn seeds_change_random_data() {
    let cfg = ExperimentConfig {
        datum: "random-bv".into(),
        ..small("solve")
    };
    let a = run_experiment(&cfg, Exec::Sequential).unwrap();
    let b = run_experiment(&ExperimentConfig { seed: 1, ..cfg }, Exec::Sequential).unwrap();
    assert_ne!(a.files, b.files);
}

#[test]
fn determinism_criterion_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let ctx = SuiteContext {
        exec: Exec::Parallel,
        root: tmp.path().to_path_buf(),
    };
    let r = run_criterion(12, &ctx);
    assert!(r.passed(), "{r:?}");
}
