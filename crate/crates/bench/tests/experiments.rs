use std::fs;
use std::path::Path;

use compsamp::diagnostics::quadrature_1d;
use compsamp::special::log_add_exp;
use compsamp::Vector;
use compsamp_bench::config::{Experiment, ExperimentConfig, Family, Policy};
use compsamp_bench::experiments::SCALING_HEADER;
use compsamp_bench::targets::{family_target, stream_rng, Stream};
use compsamp_bench::{run_autocorr, run_sample, run_scaling, run_verify, Algorithm, BenchError};

fn config(experiment: Experiment, dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        out_dir: dir.to_path_buf(),
        ..ExperimentConfig::defaults(experiment)
    }
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn json_config_overlays_defaults_and_rejects_unknown_fields() {
    let c = ExperimentConfig::from_json(Experiment::Scaling, r#"{"dims": [5, 6], "kappa": 4.0}"#).unwrap();
    assert_eq!(c.dims, vec![5, 6]);
    assert_eq!(c.kappa, 4.0);
    assert_eq!(c.mean_range, 0.0);
    assert_eq!(c.seeds.len(), 10);

    let err = ExperimentConfig::from_json(Experiment::Scaling, r#"{"dimz": 3}"#).unwrap_err();
    assert!(err.to_string().contains("dimz"));
    let err = ExperimentConfig::from_json(Experiment::Sample, r#"{"experiment": "verify"}"#).unwrap_err();
    assert!(matches!(err, BenchError::Config(_)));
}

#[test]
fn experiment_defaults_follow_the_published_settings() {
    let s = ExperimentConfig::defaults(Experiment::Scaling).resolve().unwrap();
    assert_eq!(s.dims, vec![10, 20, 40]);
    assert_eq!(s.mean_range, 0.0);
    assert_eq!(s.eta_for(20), Some(0.3 / 20.0));

    let s = ExperimentConfig {
        paper_grid: true,
        ..ExperimentConfig::defaults(Experiment::Scaling)
    };
    assert_eq!(s.resolve().unwrap().dims, vec![20, 35, 50, 65, 80]);

    let a = ExperimentConfig {
        paper_grid: true,
        ..ExperimentConfig::defaults(Experiment::Autocorr)
    }
    .resolve()
    .unwrap();
    assert_eq!((a.dim, a.eta, a.mean_range), (500, Some(0.0014), 0.5));
    assert_eq!(ExperimentConfig::defaults(Experiment::Autocorr).dim, 100);

    let v = ExperimentConfig::defaults(Experiment::Verify).resolve().unwrap();
    assert_eq!((v.dim, v.eta, v.k_iters, v.n_samples), (10, Some(0.01), Some(500), 3000));
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        ExperimentConfig {
            seeds: vec![],
            ..ExperimentConfig::defaults(Experiment::Sample)
        },
        ExperimentConfig {
            kappa: 0.5,
            ..ExperimentConfig::defaults(Experiment::Sample)
        },
        ExperimentConfig {
            dim: 16,
            ..ExperimentConfig::defaults(Experiment::Verify)
        },
        ExperimentConfig {
            dims: vec![],
            ..ExperimentConfig::defaults(Experiment::Scaling)
        },
        ExperimentConfig {
            family: None,
            ..ExperimentConfig::defaults(Experiment::Sample)
        },
        ExperimentConfig {
            paper_faithful: true,
            ..ExperimentConfig::defaults(Experiment::Verify)
        },
    ];
    for c in bad {
        assert!(matches!(c.resolve(), Err(BenchError::Config(_))));
    }
}

#[test]
fn unknown_family_lists_the_known_ones() {
    let err = "gaussian-simplex".parse::<Family>().unwrap_err();
    let msg = err.to_string();
    for known in ["gaussian-orthant", "gaussian-box", "gaussian-l1", "gaussian-unrestricted"] {
        assert!(msg.contains(known), "{msg}");
    }
}

#[test]
fn sample_with_zero_draws_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        dim: 3,
        n_samples: 0,
        ..config(Experiment::Sample, dir.path())
    };
    run_sample(&cfg).unwrap();
    assert_eq!(read(&dir.path().join("samples_seed0.csv")), "x1,x2,x3\n");
}

#[test]
fn sample_sidecar_reproduces_identical_bytes() {
    for family in [Family::GaussianOrthant, Family::GaussianBox, Family::GaussianL1, Family::GaussianUnrestricted] {
        let first = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            dim: 3,
            n_samples: 20,
            k_iters: Some(50),
            seeds: vec![11],
            family: Some(family),
            ..config(Experiment::Sample, first.path())
        };
        let report = run_sample(&cfg).unwrap();
        assert_eq!(report.samples[0].1.len(), 20);
        let csv = read(&first.path().join("samples_seed11.csv"));
        assert_eq!(csv.lines().count(), 21);

        let second = tempfile::tempdir().unwrap();
        let mut again = ExperimentConfig::from_file(Experiment::Sample, &first.path().join("params.json")).unwrap();
        again.out_dir = second.path().to_path_buf();
        run_sample(&again).unwrap();
        assert_eq!(csv, read(&second.path().join("samples_seed11.csv")), "{family:?}");
    }
}

#[test]
fn sample_output_does_not_depend_on_worker_count() {
    let run = |workers| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            dim: 4,
            n_samples: 12,
            k_iters: Some(30),
            workers: Some(workers),
            ..config(Experiment::Sample, dir.path())
        };
        run_sample(&cfg).unwrap();
        read(&dir.path().join("samples_seed0.csv"))
    };
    assert_eq!(run(1), run(3));
}

/// Log-partition and mean of ∝ exp(log_density) on [−r, r], split at the
/// kink of |x| at 0.
fn split_quadrature(log_density: &dyn Fn(f64) -> f64, r: f64) -> (f64, f64, f64) {
    let left = quadrature_1d(log_density, -r, 0.0, 32).unwrap();
    let right = quadrature_1d(log_density, 0.0, r, 32).unwrap();
    let log_z = log_add_exp(left.log_z, right.log_z);
    let (wl, wr) = ((left.log_z - log_z).exp(), (right.log_z - log_z).exp());
    let mean = wl * left.mean + wr * right.mean;
    let second = wl * (left.variance + left.mean.powi(2)) + wr * (right.variance + right.mean.powi(2));
    (log_z, mean, second - mean * mean)
}

#[test]
fn l1_family_mean_matches_two_dimensional_quadrature() {
    let dir = tempfile::tempdir().unwrap();
    let n = 2000;
    let cfg = ExperimentConfig {
        dim: 2,
        kappa: 2.0,
        smoothness: 1.0,
        eta: Some(0.01),
        k_iters: Some(2000),
        n_samples: n,
        seeds: vec![4],
        family: Some(Family::GaussianL1),
        ..config(Experiment::Sample, dir.path())
    };
    let report = run_sample(&cfg).unwrap();
    let draws = &report.samples[0].1;

    let target = family_target(
        Family::GaussianL1,
        2,
        2.0,
        1.0,
        cfg.mean_range,
        &mut stream_rng(4, Stream::Target, 2, 0),
    )
    .unwrap();
    let r = 14.0;
    for axis in 0..2 {
        // marginal of coordinate `axis`, integrating the other one out
        let marginal = |t: f64| {
            let inner = |s: f64| {
                let x = if axis == 0 { Vector::from_vec(vec![t, s]) } else { Vector::from_vec(vec![s, t]) };
                -target.neg_log_density(&x)
            };
            split_quadrature(&inner, r).0
        };
        let (_, mean, var) = split_quadrature(&marginal, r);
        let sample_mean = draws.iter().map(|x| x[axis]).sum::<f64>() / n as f64;
        let se = (var / n as f64).sqrt();
        assert!(
            (sample_mean - mean).abs() < 3.0 * se,
            "axis {axis}: sample mean {sample_mean}, quadrature {mean}, se {se}"
        );
    }
}

#[test]
fn verify_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        dim: 3,
        n_samples: 150,
        k_iters: Some(100),
        ..config(Experiment::Verify, dir.path())
    };
    let report = run_verify(&cfg).unwrap();
    let seed = &report.seeds[0];
    assert_eq!(seed.composite_samples, 150);
    assert_eq!(seed.rejection_samples, 150);
    assert_eq!(seed.ks.len(), 10);
    assert!(seed.rejection_trials >= 150);

    let composite = read(&dir.path().join("verify_seed0_composite.csv"));
    assert_eq!(composite.lines().count(), 151);
    assert!(composite.starts_with("x1,x2,x3\n"));
    for j in 1..=5 {
        let proj = read(&dir.path().join(format!("verify_seed0_projection_{j}.csv")));
        assert!(proj.starts_with("algorithm,u,v\n"));
        assert_eq!(proj.lines().count(), 301);
    }
    let ks = read(&dir.path().join("verify_seed0_ks.csv"));
    assert!(ks.starts_with("pair,axis,ks\n"));
    assert_eq!(ks.lines().count(), 11);
    assert!(dir.path().join("verify_seed0_stats.json").exists());
    assert!(dir.path().join("params.json").exists());
}

#[test]
fn verify_reports_an_exhausted_rejection_budget() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        dim: 3,
        n_samples: 50,
        rejection_budget: 10,
        algorithms: vec![Algorithm::Rejection],
        ..config(Experiment::Verify, dir.path())
    };
    assert!(matches!(run_verify(&cfg), Err(BenchError::RejectionExhausted { .. })));
}

#[test]
fn scaling_rows_are_sorted_and_failures_marked() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        dims: vec![4, 2],
        seeds: vec![3, 1],
        max_steps: 20_000,
        record_wall_clock: false,
        ..config(Experiment::Scaling, dir.path())
    };
    let report = run_scaling(&cfg).unwrap();
    let text = read(&dir.path().join("scaling.csv"));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), SCALING_HEADER.join(","));
    let keys: Vec<(String, usize, u64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(keys.len(), 8);
    for row in &report.rows {
        assert_eq!(row.wall_ms, 0);
        let steps = row.mixing_steps.expect("small problems mix well within the budget");
        match row.algorithm {
            Algorithm::HitAndRun => assert_eq!((row.gradient_calls, row.oracle_calls), (0, steps as u64)),
            _ => assert_eq!(row.oracle_calls, steps as u64 + 1),
        }
    }

    let failing = ExperimentConfig {
        dims: vec![3],
        seeds: vec![0],
        max_steps: 20,
        step_block: 10,
        ..cfg
    };
    let report = run_scaling(&failing).unwrap();
    assert!(report.rows.iter().all(|r| r.mixing_steps.is_none()));
    let text = read(&dir.path().join("scaling.csv"));
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(3) == Some("-1")));
}

#[test]
fn scaling_output_is_byte_identical_across_runs() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            dims: vec![3, 5],
            seeds: vec![0, 1],
            record_wall_clock: false,
            ..config(Experiment::Scaling, dir.path())
        };
        run_scaling(&cfg).unwrap();
        read(&dir.path().join("scaling.csv"))
    };
    assert_eq!(run(), run());
}

#[test]
fn autocorr_curves_start_at_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        dim: 5,
        n_samples: 3000,
        max_lag: 50,
        theta_policy: Policy::Literal,
        ..config(Experiment::Autocorr, dir.path())
    };
    let report = run_autocorr(&cfg).unwrap();
    for algo in [Algorithm::Composite, Algorithm::HitAndRun] {
        let curve = report.curve(0, algo).unwrap();
        assert_eq!(curve.len(), 51);
        assert_eq!(curve[0], 1.0);
        let text = read(&dir.path().join(format!("autocorr_seed0_{}.csv", algo.name())));
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("lag,autocorrelation"));
        assert_eq!(lines.next().unwrap().split(',').nth(1).unwrap().parse::<f64>().unwrap(), 1.0);
    }
}
