//! Command-level behaviour: config validation, exit codes, and output
//! schemas, exercised on a small dataset shared across the tests.

use std::path::PathBuf;

use once_cell::sync::Lazy;
use tempfile::TempDir;

use pc_resolve::integrators::Scheme;
use pc_resolve::stencils::DerivativeMode;
use pc_resolve_cli::{
    cmd_analyze, cmd_evaluate, cmd_generate, cmd_restart, cmd_superres, EvalSource, EvaluateArgs,
    RestartArgs, RunConfig, SuperresArgs, EXIT_CONFIG, EXIT_OK,
};

const TINY_CONFIG: &str = r#"{
  "problem": "allen-cahn",
  "series": 4,
  "steps": 10,
  "fine_n": 16,
  "coarse_factor": 4,
  "t_final": 3.0,
  "seed": 21
}
"#;

struct Fixture {
    _dir: TempDir,
    dataset: PathBuf,
}

static DATASET: Lazy<Fixture> = Lazy::new(|| {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("config.json");
    std::fs::write(&cfg_path, TINY_CONFIG).unwrap();
    let dataset = dir.path().join("ds");
    assert_eq!(cmd_generate(&cfg_path, Some(&dataset)), EXIT_OK);
    Fixture { dataset, _dir: dir }
});

#[test]
fn generate_smoke_manifest_has_all_entries() {
    let fx = &*DATASET;
    let manifest =
        pc_resolve::datagen::DatasetManifest::load(&fx.dataset.join("manifest.json")).unwrap();
    assert_eq!(manifest.entries.len(), 4);
    assert!(manifest.failed.is_empty());
    assert_eq!(manifest.problem, "allen-cahn");
    for e in &manifest.entries {
        assert!(fx.dataset.join(&e.coarse).exists());
        assert!(fx.dataset.join(&e.fine).exists());
    }
}

#[test]
fn malformed_json_is_a_config_error_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ \"problem\": \"allen-cahn\",, }").unwrap();
    assert_eq!(cmd_generate(&bad, None), EXIT_CONFIG);
    let err = RunConfig::load(&bad).unwrap_err();
    assert!(
        err.contains("line") && err.contains("column"),
        "error lacks position: {err}"
    );
}

#[test]
fn unknown_config_key_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{ "problem": "allen-cahn", "stepz": 10 }"#).unwrap();
    assert_eq!(cmd_generate(&bad, None), EXIT_CONFIG);
    let err = RunConfig::load(&bad).unwrap_err();
    assert!(err.contains("stepz"), "error does not name the key: {err}");
}

#[test]
fn missing_manifest_is_a_runtime_error() {
    let args = EvaluateArgs {
        manifest_path: std::path::Path::new("/nonexistent/manifest.json"),
        split: "all",
        scheme: Scheme::Bdf2,
        source: EvalSource::Gt,
        mode: DerivativeMode::StandardFD,
        weights: None,
        out_csv: std::path::Path::new("/tmp/never.csv"),
    };
    assert_eq!(cmd_evaluate(&args), pc_resolve_cli::EXIT_SOLVER);
}

#[test]
fn evaluate_gt_source_writes_expected_csv() {
    let fx = &*DATASET;
    let out = fx.dataset.parent().unwrap().join("eval.csv");
    let args = EvaluateArgs {
        manifest_path: &fx.dataset.join("manifest.json"),
        split: "all",
        scheme: Scheme::Bdf2,
        source: EvalSource::Gt,
        mode: DerivativeMode::StandardFD,
        weights: None,
        out_csv: &out,
    };
    assert_eq!(cmd_evaluate(&args), EXIT_OK);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert_eq!(
        header,
        "series,frame,pixel,inner,boundary,composite,mse,psnr,ssim,msge,gsnr"
    );
    assert_eq!(header.split(',').count(), 11);
    let mut data_rows = 0;
    let mut saw_aggregate = false;
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 11, "row has wrong arity: {line}");
        if cols[0] == "aggregate" {
            saw_aggregate = true;
            // GT against itself: zero pixel error, infinite PSNR
            assert_eq!(cols[2], "0");
            assert_eq!(cols[7], "inf");
            let inner: f64 = cols[3].parse().unwrap();
            assert!(inner <= 1e-11, "aggregate inner loss {inner}");
        } else {
            data_rows += 1;
            let mse: f64 = cols[6].parse().unwrap();
            assert_eq!(mse, 0.0);
            assert_eq!(cols[7], "inf");
            let ssim: f64 = cols[8].parse().unwrap();
            assert_eq!(ssim, 1.0);
        }
    }
    // 4 series x 9 eligible frames (n = 2..10)
    assert_eq!(data_rows, 36);
    assert!(saw_aggregate);
}

#[test]
fn evaluate_is_deterministic() {
    let fx = &*DATASET;
    let out1 = fx.dataset.parent().unwrap().join("eval_a.csv");
    let out2 = fx.dataset.parent().unwrap().join("eval_b.csv");
    for out in [&out1, &out2] {
        let args = EvaluateArgs {
            manifest_path: &fx.dataset.join("manifest.json"),
            split: "all",
            scheme: Scheme::Bdf2,
            source: EvalSource::Bicubic,
            mode: DerivativeMode::StandardFD,
            weights: None,
            out_csv: out,
        };
        assert_eq!(cmd_evaluate(&args), EXIT_OK);
    }
    assert_eq!(std::fs::read(&out1).unwrap(), std::fs::read(&out2).unwrap());
}

#[test]
fn superres_single_frame_writes_pgm_and_csv_row() {
    let fx = &*DATASET;
    let out_dir = fx.dataset.parent().unwrap().join("sr_out");
    let args = SuperresArgs {
        manifest_path: &fx.dataset.join("manifest.json"),
        split: "all",
        limit: 1,
        out_dir: &out_dir,
        baseline: false,
        max_iters: Some(150),
        scheme: Scheme::Bdf2,
    };
    assert_eq!(cmd_superres(&args), EXIT_OK);
    let csv = std::fs::read_to_string(out_dir.join("superres.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2, "expected header + one row: {csv}");
    assert!(lines[1].contains("variational-sr"));
    let pgms: Vec<_> = std::fs::read_dir(&out_dir)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "pgm")
        })
        .collect();
    assert_eq!(pgms.len(), 1);
}

#[test]
fn restart_command_produces_error_curves() {
    let fx = &*DATASET;
    let out_dir = fx.dataset.parent().unwrap().join("restart_out");
    let args = RestartArgs {
        dataset_dir: &fx.dataset,
        entry: 0,
        warmup: Some(5),
        n_continue: Some(3),
        include_oracle: true,
        out_dir: &out_dir,
        max_iters: Some(150),
    };
    assert_eq!(cmd_restart(&args), EXIT_OK);
    let csv = std::fs::read_to_string(out_dir.join("restart_errors.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "step,bicubic_l2,bicubic_linf,variational-sr_l2,variational-sr_linf,oracle_l2,oracle_linf"
    );
    assert_eq!(lines.len(), 4); // header + 3 steps
                                // oracle drift is identically zero
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[5], "0");
        assert_eq!(cols[6], "0");
    }
}

#[test]
fn restart_rejects_unknown_entry() {
    let fx = &*DATASET;
    let out_dir = fx.dataset.parent().unwrap().join("restart_bad");
    let args = RestartArgs {
        dataset_dir: &fx.dataset,
        entry: 99,
        warmup: Some(5),
        n_continue: Some(3),
        include_oracle: false,
        out_dir: &out_dir,
        max_iters: Some(50),
    };
    assert_eq!(cmd_restart(&args), EXIT_CONFIG);
}

#[test]
fn analyze_reports_slopes() {
    assert_eq!(cmd_analyze(Scheme::Bdf2, -1.0), EXIT_OK);
    assert_eq!(cmd_analyze(Scheme::Cn, -1.0), EXIT_OK);
    assert_eq!(cmd_analyze(Scheme::Ee, -1.0), EXIT_OK);
}

#[test]
fn config_round_trips_overrides() {
    let rc: RunConfig = serde_json::from_str(
        r#"{
            "problem": "eriksson-johnson",
            "series": 7,
            "steps": 20,
            "t_final": 0.25,
            "epsilon": [6e-3, 9e-3],
            "seed": 5
        }"#,
    )
    .unwrap();
    let cfg = rc.to_gen_config().unwrap();
    assert_eq!(cfg.n_series, 7);
    assert_eq!(cfg.n_steps, 20);
    assert_eq!(cfg.t_final, 0.25);
    assert_eq!(cfg.eps_range, (6e-3, 9e-3));
    assert_eq!(cfg.master_seed, 5);
    assert_eq!(cfg.problem, pc_resolve::grid::Problem::ErikssonJohnson);
    // untouched fields keep the per-problem defaults
    assert_eq!(cfg.fine_n, 64);
    assert_eq!(cfg.coarse_factor, 8);
}
