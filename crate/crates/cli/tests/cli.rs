#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use wecfarm::dataset::{FarmDataset, FarmRecord, Position, Scenario, WecLayout, WEC_COUNT};
use wecfarm::geometry::farm_summary;
use wecfarm::mlp::{init_model, save_model, MlpConfig, ModelBundle, TrainHistory};
use wecfarm::preprocess::ScalerParams;
use wecfarm::rng::PinnedRng;
use wecfarm::synth::{
    grid_dataset, linear_dataset, plant_power_extreme, record_for, synthetic_dataset,
};
use wecfarm_cli::commands::{cmd_evaluate, cmd_outliers, cmd_plotdata, cmd_stats, cmd_train};
use wecfarm_cli::config::{RunConfig, RESOLVED_CONFIG};

fn write_fixture(dir: &Path, ds: &FarmDataset) -> PathBuf {
    let path = dir.join(format!("{}_input.csv", ds.scenario));
    ds.write_csv(&path).unwrap();
    path
}

fn config_for(dir: &Path, datasets: &[&FarmDataset]) -> RunConfig {
    let mut cfg = RunConfig {
        output_dir: dir.join("out"),
        ..Default::default()
    };
    for ds in datasets {
        cfg.scenarios.insert(ds.scenario, write_fixture(dir, ds));
    }
    cfg.prepare().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn stats_on_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synthetic_dataset(Scenario::Sydney, 3, 1);
    let cfg = config_for(dir.path(), &[&ds]);
    let out = cmd_stats(&cfg);
    assert!(out.is_success());
    assert_eq!(out.results[&Scenario::Sydney], farm_summary(&ds));

    let rows = csv_rows(&cfg.output_dir.join("Sydney_distance_power.csv"));
    assert_eq!(rows[0], ["record", "farm_mean_distance", "total_power"]);
    assert_eq!(rows.len(), 4);
    let binned = csv_rows(&cfg.output_dir.join("Sydney_distance_power_binned.csv"));
    let counted: usize = binned[1..]
        .iter()
        .map(|r| r[2].parse::<usize>().unwrap())
        .sum();
    assert_eq!(counted, 3);
    let hist = csv_rows(&cfg.output_dir.join("Sydney_distributions.csv"));
    assert_eq!(hist[0], ["variable", "bin_start", "bin_end", "count"]);
    let power_count: usize = hist[1..]
        .iter()
        .filter(|r| r[0] == "total_power")
        .map(|r| r[3].parse::<usize>().unwrap())
        .sum();
    assert_eq!(power_count, 3);

    let json: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(cfg.output_dir.join("Sydney_summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(json["scenario"], "Sydney");
    assert_eq!(json["records"], 3);
}

#[test]
fn power_ratio_between_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let a = synthetic_dataset(Scenario::Sydney, 50, 2);
    let b = synthetic_dataset(Scenario::Tasmania, 50, 2);
    let out = cmd_stats(&config_for(dir.path(), &[&a, &b]));
    let ratio =
        out.results[&Scenario::Tasmania].mean_power / out.results[&Scenario::Sydney].mean_power;
    assert!((ratio - farm_summary(&b).mean_power / farm_summary(&a).mean_power).abs() < 1e-12);
}

#[test]
fn outliers_on_uniform_and_planted_grids() {
    let dir = tempfile::tempdir().unwrap();
    let clean = grid_dataset(Scenario::Perth, 12);
    let mut planted = grid_dataset(Scenario::Tasmania, 12);
    plant_power_extreme(&mut planted, 77, 1.6);
    let cfg = config_for(dir.path(), &[&clean, &planted]);
    let out = cmd_outliers(&cfg);
    assert!(out.is_success());
    let c = &out.results[&Scenario::Perth];
    assert_eq!(c.counts.lof, 0);
    assert_eq!(c.flagged_by_all, Vec::<usize>::new());
    let p = &out.results[&Scenario::Tasmania];
    assert_eq!(p.flagged_by_all, vec![77]);

    let rows = csv_rows(&cfg.output_dir.join("Tasmania_outliers.csv"));
    assert_eq!(
        rows[0],
        [
            "record",
            "lof_score",
            "z_score",
            "lof_flag",
            "z_flag",
            "iqr_flag"
        ]
    );
    assert_eq!(rows.len(), 145);
    assert_eq!(rows[78][3..], ["1", "1", "1"]);
}

fn linear_config(dir: &Path) -> RunConfig {
    let ds = linear_dataset(200, 3);
    let mut cfg = RunConfig {
        output_dir: dir.join("out"),
        ..Default::default()
    };
    cfg.scenarios
        .insert(Scenario::Sydney, write_fixture(dir, &ds));
    cfg.mlp = MlpConfig {
        hidden_layers: vec![16],
        learning_rate: 0.01,
        batch_size: 16,
        max_epochs: 200,
        ..Default::default()
    };
    cfg
}

#[test]
fn train_then_evaluate_on_linear_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = linear_config(dir.path()).prepare().unwrap();
    let start = Instant::now();
    let out = cmd_train(&cfg);
    assert!(start.elapsed().as_secs() < 60);
    assert!(out.per_farm.is_success(), "{:?}", out.per_farm.failures);
    let r = &out.per_farm.results[&Scenario::Sydney];
    assert!(r.metrics.mse < 1e-3, "test mse {}", r.metrics.mse);
    assert!(r.metrics.r2 > 0.98);

    let text = fs::read_to_string(cfg.output_dir.join("Sydney_history.json")).unwrap();
    let hist: TrainHistory = serde_json::from_str(&text).unwrap();
    assert_eq!(hist, r.history);
    assert!(hist.best_so_far().windows(2).all(|w| w[1] <= w[0]));
    let loss = csv_rows(&cfg.output_dir.join("Sydney_loss.csv"));
    assert_eq!(
        loss[0],
        ["epoch", "train_loss", "val_loss", "best_val_loss"]
    );
    assert_eq!(loss.len(), hist.epochs() + 1);

    let model = cfg.output_dir.join("Sydney_model.json");
    let ev = cmd_evaluate(&cfg, &model, None);
    assert!(ev.is_success(), "{:?}", ev.failures);
    let m = ev.results[&Scenario::Sydney];
    assert!((m.mse - hist.best_val_loss()).abs() <= 1e-12);
    assert_eq!(m, r.metrics);

    let mut other = cfg.clone();
    other.scenarios.insert(
        Scenario::Perth,
        write_fixture(dir.path(), &synthetic_dataset(Scenario::Perth, 20, 1)),
    );
    let ev = cmd_evaluate(&other, &model, Some(Scenario::Perth));
    assert!(ev.results.is_empty());
    assert!(
        ev.failures[0].error.contains("trained on Sydney"),
        "{:?}",
        ev.failures
    );
}

#[test]
fn evaluate_rejects_wrong_width() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_for(dir.path(), &[&synthetic_dataset(Scenario::Adelaide, 30, 1)]);
    let narrow = ModelBundle {
        model: init_model(&MlpConfig {
            input_dim: 31,
            hidden_layers: vec![4],
            ..Default::default()
        })
        .unwrap(),
        feature_scaler: ScalerParams::MinMax {
            min: vec![0.0; 31],
            max: vec![566.0; 31],
        },
        target_scaler: ScalerParams::MinMax {
            min: vec![0.0],
            max: vec![1.0],
        },
        split: None,
        scenario: None,
    };
    let path = dir.path().join("narrow.json");
    save_model(&narrow, &path).unwrap();
    let ev = cmd_evaluate(&cfg, &path, None);
    assert!(!ev.is_success());
    assert!(
        ev.failures[0].error.contains("31 inputs"),
        "{:?}",
        ev.failures
    );
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && p.file_name().unwrap() != RESOLVED_CONFIG)
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let mut cfg = linear_config(dir.path());
        cfg.mlp.max_epochs = 20;
        cfg.output_dir = dir.path().join(name);
        let cfg = cfg.prepare().unwrap();
        assert!(cmd_stats(&cfg).is_success());
        assert!(cmd_outliers(&cfg).is_success());
        assert!(cmd_train(&cfg).per_farm.is_success());
        assert!(cmd_plotdata(&cfg).is_success());
        snapshot(&cfg.output_dir)
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a.len(), 14);
    assert_eq!(a, b);
}

#[test]
fn plotdata_samples_ten_layouts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_for(dir.path(), &[&synthetic_dataset(Scenario::Perth, 40, 5)]);
    let out = cmd_plotdata(&cfg);
    let sampled = &out.results[&Scenario::Perth].sampled;
    assert_eq!(sampled.len(), 10);
    let rows = csv_rows(&cfg.output_dir.join("Perth_layouts.csv"));
    assert_eq!(rows[0], ["sample", "record", "wec", "x", "y"]);
    assert_eq!(rows.len(), 161);
    let pca = csv_rows(&cfg.output_dir.join("Perth_pca.csv"));
    assert_eq!(pca[0], ["record", "pc1", "pc2"]);
    assert_eq!(pca.len(), 41);
}

#[test]
fn rank_one_layouts_have_flat_second_component() {
    let mut rng = PinnedRng::new(4, 0);
    let base: Vec<Position> = (0..WEC_COUNT)
        .map(|_| Position::new(rng.uniform(150.0, 400.0), rng.uniform(150.0, 400.0)))
        .collect();
    let dir: Vec<(f64, f64)> = (0..WEC_COUNT)
        .map(|_| (rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)))
        .collect();
    let records: Vec<FarmRecord> = (0..30)
        .map(|_| {
            let t = rng.uniform(-100.0, 100.0);
            let mut p = [Position::default(); WEC_COUNT];
            for (k, slot) in p.iter_mut().enumerate() {
                *slot = Position::new(base[k].x + t * dir[k].0, base[k].y + t * dir[k].1);
            }
            record_for(Scenario::Adelaide, WecLayout::new(p))
        })
        .collect();
    let ds = FarmDataset::new(Scenario::Adelaide, records, "rank1").unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_for(tmp.path(), &[&ds]);
    cmd_plotdata(&cfg);
    let rows = csv_rows(&cfg.output_dir.join("Adelaide_pca.csv"));
    let mut spread: f64 = 0.0;
    for r in &rows[1..] {
        spread = spread.max(r[1].parse::<f64>().unwrap().abs());
        assert!(r[2].parse::<f64>().unwrap().abs() < 1e-9, "{r:?}");
    }
    assert!(spread > 10.0);
}

#[test]
fn pca_scores_match_eigen_oracle() {
    let ds = synthetic_dataset(Scenario::Sydney, 50, 9);
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_for(tmp.path(), &[&ds]);
    cmd_plotdata(&cfg);
    let rows = csv_rows(&cfg.output_dir.join("Sydney_pca.csv"));

    let data: Vec<Vec<f64>> = ds
        .records
        .iter()
        .map(|r| r.layout.flatten().to_vec())
        .collect();
    let (vals, vecs) = support::jacobi_eigen(&support::covariance_oracle(&data));
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let p = data[0].len();
    let mean: Vec<f64> = (0..p)
        .map(|j| data.iter().map(|r| r[j]).sum::<f64>() / 50.0)
        .collect();
    for (c, &e) in order[..2].iter().enumerate() {
        let oracle: Vec<f64> = data
            .iter()
            .map(|r| (0..p).map(|j| (r[j] - mean[j]) * vecs[j][e]).sum())
            .collect();
        let got: Vec<f64> = rows[1..]
            .iter()
            .map(|r| r[c + 1].parse().unwrap())
            .collect();
        let sign = if oracle.iter().zip(&got).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
            -1.0
        } else {
            1.0
        };
        for (o, g) in oracle.iter().zip(&got) {
            assert!((sign * o - g).abs() < 1e-6, "component {c}: {o} vs {g}");
        }
    }
}

#[test]
fn prepare_fails_fast_and_records_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig {
        output_dir: dir.path().join("never"),
        ..Default::default()
    };
    cfg.scenarios
        .insert(Scenario::Perth, dir.path().join("missing.csv"));
    let err = cfg.prepare().unwrap_err().to_string();
    assert!(err.contains("Perth"), "{err}");
    assert!(!dir.path().join("never").exists());

    let cfg = RunConfig {
        output_dir: dir.path().join("fx"),
        seed: 77,
        fixtures: true,
        fixture_rows: 25,
        ..Default::default()
    }
    .prepare()
    .unwrap();
    assert_eq!((cfg.split.seed, cfg.mlp.seed), (77, 77));
    assert_eq!(cfg.scenarios.len(), 4);
    let back = RunConfig::from_file(&cfg.output_dir.join(RESOLVED_CONFIG)).unwrap();
    assert_eq!(back, cfg);
}

fn exe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wecfarm"))
}

#[test]
fn binary_reports_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_fixture(dir.path(), &synthetic_dataset(Scenario::Sydney, 20, 1));
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1,2,3\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = exe()
        .arg("stats")
        .arg("--scenario")
        .arg(format!("Sydney={}", good.display()))
        .arg("--scenario")
        .arg(format!("Perth={}", bad.display()))
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Perth"), "{stderr}");
    assert!(!stderr.contains("Sydney:"), "{stderr}");
    assert!(out_dir.join("Sydney_summary.json").exists());
    assert!(!out_dir.join("Perth_summary.json").exists());
}

#[test]
fn binary_rejects_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = exe()
        .args([
            "outliers",
            "--scenario",
            "Perth=/nonexistent/file.csv",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = exe()
        .args(["stats", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn binary_config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.json");
    fs::write(
        &conf,
        format!(
            r#"{{"output_dir": {:?}, "fixtures": true, "fixture_rows": 30, "seed": 3, "outliers": {{"k": 4}}}}"#,
            dir.path().join("o").display().to_string()
        ),
    )
    .unwrap();
    let out = exe()
        .args(["outliers", "--k", "6", "--seed", "11", "--config"])
        .arg(&conf)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let resolved = RunConfig::from_file(&dir.path().join("o").join(RESOLVED_CONFIG)).unwrap();
    assert_eq!(
        (resolved.outliers.k, resolved.seed, resolved.fixture_rows),
        (6, 11, 30)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 4, "{stdout}");
}

#[test]
fn binary_trains_with_every_override() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_fixture(dir.path(), &synthetic_dataset(Scenario::Perth, 40, 1));
    let out_dir = dir.path().join("o");
    let out = exe()
        .args([
            "train",
            "--hidden",
            "3,2",
            "--epochs",
            "2",
            "--seed",
            "8",
            "--no-shuffle",
            "--strict",
        ])
        .args([
            "--k",
            "5",
            "--fixtures",
            "--fixture-rows",
            "30",
            "--combined",
        ])
        .arg("--scenario")
        .arg(format!("Perth={}", data.display()))
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cfg = RunConfig::from_file(&out_dir.join(RESOLVED_CONFIG)).unwrap();
    assert_eq!(cfg.mlp.hidden_layers, vec![3, 2]);
    assert_eq!(
        (cfg.mlp.max_epochs, cfg.mlp.seed, cfg.outliers.k),
        (2, 8, 5)
    );
    assert!(!cfg.split.shuffled && cfg.strict && cfg.combined);
    assert_eq!(cfg.scenarios[&Scenario::Perth], data);
    let model = out_dir.join("Perth_model.json");
    let hist: TrainHistory =
        serde_json::from_str(&fs::read_to_string(out_dir.join("Perth_history.json")).unwrap())
            .unwrap();
    assert_eq!(hist.epochs(), 2);
    assert!(out_dir.join("combined_comparison.json").exists());

    let out = exe()
        .args(["evaluate", "--model"])
        .arg(&model)
        .args(["--on", "perth", "--scenario"])
        .arg(format!("Perth={}", data.display()))
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out_dir.join("Perth_evaluation.json").exists());

    let out = exe()
        .args(["stats", "--hidden", "4,x", "--fixtures"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
