//! Subcommand implementations. Each writes scenario-namespaced files under
//! the output directory and returns what it computed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use wecfarm::dataset::{
    load_dataset, validate_dataset, FarmDataset, Scenario, ValidationReport, ValidationStatus,
};
use wecfarm::geometry::{self, mean_distances, pca_2d, position_features, summarize, FarmSummary};
use wecfarm::metrics::{evaluate_with_scaler, MetricsReport};
use wecfarm::mlp::{init_model, load_model, save_model, train, ModelBundle, Samples, TrainHistory};
use wecfarm::outliers::{low_distance_high_power, screen_dataset, OutlierParams, OutlierReport};
use wecfarm::preprocess::{fit_scaler, train_test_split, transform, ScalerParams, Split};
use wecfarm::rng::{PinnedRng, STREAM_SAMPLE};
use wecfarm::Matrix;

use crate::config::RunConfig;

const DISTANCE_BIN: f64 = 10.0;
const HISTOGRAM_BINS: usize = 30;
pub const COMBINED: &str = "combined";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    /// Scenario label or `combined`.
    pub scope: String,
    pub error: String,
}

/// Per-scenario results plus the scenarios that failed.
#[derive(Debug)]
pub struct Outcome<T> {
    pub results: BTreeMap<Scenario, T>,
    pub failures: Vec<Failure>,
}

impl<T> Outcome<T> {
    pub fn is_success(&self) -> bool {
        self.failures.is_empty()
    }

    fn run(config: &RunConfig, mut f: impl FnMut(Scenario) -> Result<T>) -> Self {
        let mut out = Outcome {
            results: BTreeMap::new(),
            failures: Vec::new(),
        };
        for &sc in config.scenarios.keys() {
            match f(sc) {
                Ok(v) => {
                    out.results.insert(sc, v);
                }
                Err(e) => out.failures.push(Failure {
                    scope: sc.to_string(),
                    error: format!("{e:#}"),
                }),
            }
        }
        out
    }
}

fn out_path(config: &RunConfig, name: &str) -> PathBuf {
    config.output_dir.join(name)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Loads and validates one scenario. Validation findings are printed as
/// warnings, or fail the scenario in strict mode.
pub fn load_scenario(config: &RunConfig, sc: Scenario) -> Result<(FarmDataset, ValidationReport)> {
    let path = config
        .scenarios
        .get(&sc)
        .with_context(|| format!("{sc} has no configured data file"))?;
    let ds = load_dataset(path, sc, config.header)?;
    let mut report = validate_dataset(&ds, config.sum_tolerance)?;
    if config.strict {
        report = report.strict();
    }
    let detail = format!(
        "{} range violations, {} total-power mismatches over {} records",
        report.range_violations.len(),
        report.sum_mismatches.len(),
        report.record_count
    );
    match report.status {
        ValidationStatus::Pass => {}
        ValidationStatus::Warn => eprintln!("warning: {sc}: {detail}"),
        ValidationStatus::Fail => bail!("validation failed: {detail}"),
    }
    Ok((ds, report))
}

#[derive(Debug, Clone, Serialize)]
struct SummaryFile<'a> {
    scenario: &'a str,
    #[serde(flatten)]
    summary: &'a FarmSummary,
}

/// Farm statistics and distance/power plot data.
pub fn cmd_stats(config: &RunConfig) -> Outcome<FarmSummary> {
    let outcome = Outcome::run(config, |sc| {
        let (ds, validation) = load_scenario(config, sc)?;
        let distances = mean_distances(&ds);
        let powers = ds.total_powers();
        let summary = summarize(&distances, &powers);

        write_json(
            &out_path(config, &format!("{sc}_summary.json")),
            &SummaryFile {
                scenario: sc.label(),
                summary: &summary,
            },
        )?;
        write_json(
            &out_path(config, &format!("{sc}_validation.json")),
            &validation,
        )?;

        let mut csv = String::from("record,farm_mean_distance,total_power\n");
        for (i, (d, p)) in distances.iter().zip(&powers).enumerate() {
            writeln!(csv, "{i},{d},{p}")?;
        }
        write_text(&out_path(config, &format!("{sc}_distance_power.csv")), &csv)?;
        write_text(
            &out_path(config, &format!("{sc}_distance_power_binned.csv")),
            &binned_means(&distances, &powers),
        )?;
        let mut hist = String::from("variable,bin_start,bin_end,count\n");
        histogram(&mut hist, "farm_mean_distance", &distances);
        histogram(&mut hist, "total_power", &powers);
        write_text(&out_path(config, &format!("{sc}_distributions.csv")), &hist)?;
        Ok(summary)
    });
    if !outcome.results.is_empty() {
        println!(
            "{:<10} {:>8} {:>12} {:>12} {:>12} {:>14} {:>14} {:>14} {:>8}",
            "scenario",
            "records",
            "mean_dist",
            "min_dist",
            "max_dist",
            "mean_power",
            "min_power",
            "max_power",
            "r"
        );
        for (sc, s) in &outcome.results {
            println!(
                "{:<10} {:>8} {:>12.6} {:>12.6} {:>12.6} {:>14.1} {:>14.1} {:>14.1} {:>8.4}",
                sc.label(),
                s.records,
                s.mean_distance,
                s.min_distance,
                s.max_distance,
                s.mean_power,
                s.min_power,
                s.max_power,
                s.pearson_r
            );
        }
    }
    outcome
}

/// Mean total power per 10 m farm-mean-distance bin; empty bins omitted.
fn binned_means(distances: &[f64], powers: &[f64]) -> String {
    let mut bins: BTreeMap<i64, (usize, f64)> = BTreeMap::new();
    for (d, p) in distances.iter().zip(powers) {
        let e = bins
            .entry((d / DISTANCE_BIN).floor() as i64)
            .or_insert((0, 0.0));
        e.0 += 1;
        e.1 += p;
    }
    let mut csv = String::from("bin_start,bin_end,count,mean_total_power\n");
    for (b, (n, sum)) in bins {
        let start = b as f64 * DISTANCE_BIN;
        let _ = writeln!(
            csv,
            "{start},{},{n},{}",
            start + DISTANCE_BIN,
            sum / n as f64
        );
    }
    csv
}

/// Equal-width histogram over the observed range; the top edge is inclusive.
fn histogram(out: &mut String, name: &str, values: &[f64]) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let mut counts = [0usize; HISTOGRAM_BINS];
    for &v in values {
        let b = if width > 0.0 {
            (((v - lo) / width) as usize).min(HISTOGRAM_BINS - 1)
        } else {
            0
        };
        counts[b] += 1;
    }
    for (b, c) in counts.iter().enumerate() {
        let start = lo + b as f64 * width;
        let _ = writeln!(out, "{name},{start},{},{c}", start + width);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OutlierCounts {
    pub lof: usize,
    pub z: usize,
    pub iqr: usize,
    pub all_three: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutlierSummary {
    pub scenario: String,
    pub records: usize,
    pub params: OutlierParams,
    pub counts: OutlierCounts,
    pub flagged_by_all: Vec<usize>,
    /// Lowest-5% distance records with above-median power.
    pub low_distance_high_power: Vec<usize>,
    /// Those of the above flagged by any detector.
    pub low_distance_high_power_flagged: Vec<usize>,
    pub report: OutlierReport,
}

/// LOF, z-score and IQR screening per scenario.
pub fn cmd_outliers(config: &RunConfig) -> Outcome<OutlierSummary> {
    let outcome = Outcome::run(config, |sc| {
        let (ds, _) = load_scenario(config, sc)?;
        let report = screen_dataset(&ds, &config.outliers)?;
        let extremes = low_distance_high_power(&mean_distances(&ds), &ds.total_powers());
        let any = report.flagged_by_any();
        let (lof, z, iqr) = report.counts();
        let all = report.flagged_by_all();
        let summary = OutlierSummary {
            scenario: sc.to_string(),
            records: ds.len(),
            params: config.outliers,
            counts: OutlierCounts {
                lof,
                z,
                iqr,
                all_three: all.len(),
            },
            flagged_by_all: all,
            low_distance_high_power_flagged: extremes
                .iter()
                .copied()
                .filter(|i| any.contains(i))
                .collect(),
            low_distance_high_power: extremes,
            report,
        };
        write_json(&out_path(config, &format!("{sc}_outliers.json")), &summary)?;

        let r = &summary.report;
        let mut csv = String::from("record,lof_score,z_score,lof_flag,z_flag,iqr_flag\n");
        for i in 0..r.len() {
            writeln!(
                csv,
                "{i},{},{},{},{},{}",
                r.lof_scores[i],
                r.z_scores[i],
                r.lof_flags[i] as u8,
                r.z_flags[i] as u8,
                r.iqr_flags[i] as u8
            )?;
        }
        write_text(&out_path(config, &format!("{sc}_outliers.csv")), &csv)?;
        println!(
            "{sc}: {} records; flagged LOF {lof}, z-score {z}, IQR {iqr}, all three {}; low-distance/high-power {} ({} flagged)",
            summary.records,
            summary.counts.all_three,
            summary.low_distance_high_power.len(),
            summary.low_distance_high_power_flagged.len()
        );
        Ok(summary)
    });
    outcome
}

/// Raw features and targets of one scenario split into train and test rows.
struct SplitData {
    x_train: Matrix,
    y_train: Matrix,
    x_test: Matrix,
    y_test: Matrix,
}

fn split_data(ds: &FarmDataset, split: &Split) -> SplitData {
    let x = position_features(ds);
    let y = Matrix::from_vec(ds.len(), 1, ds.total_powers()).expect("one target per record");
    SplitData {
        x_train: x.select_rows(&split.train),
        y_train: y.select_rows(&split.train),
        x_test: x.select_rows(&split.test),
        y_test: y.select_rows(&split.test),
    }
}

fn normalized(fs: &ScalerParams, ts: &ScalerParams, x: &Matrix, y: &Matrix) -> Result<Samples> {
    Ok(Samples::new(
        transform(fs, x)?,
        transform(ts, y)?.into_vec(),
    )?)
}

fn write_training_outputs(
    config: &RunConfig,
    prefix: &str,
    bundle: &ModelBundle,
    history: &TrainHistory,
) -> Result<()> {
    save_model(bundle, &out_path(config, &format!("{prefix}_model.json")))?;
    write_json(
        &out_path(config, &format!("{prefix}_history.json")),
        history,
    )?;
    let mut csv = String::from("epoch,train_loss,val_loss,best_val_loss\n");
    for (e, ((t, v), b)) in history
        .train_loss
        .iter()
        .zip(&history.val_loss)
        .zip(history.best_so_far())
        .enumerate()
    {
        writeln!(csv, "{e},{t},{v},{b}")?;
    }
    write_text(&out_path(config, &format!("{prefix}_loss.csv")), &csv)
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub bundle: ModelBundle,
    pub history: TrainHistory,
    /// Test-set metrics of the returned model.
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct CombinedComparison {
    pub scenario: String,
    pub per_farm_mse: f64,
    /// Combined model's test MSE in this farm's own normalized units.
    pub combined_mse: f64,
    pub combined_worse: bool,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub per_farm: Outcome<TrainResult>,
    pub combined: Option<TrainResult>,
    pub comparison: Vec<CombinedComparison>,
}

impl TrainOutcome {
    pub fn failures(&self) -> Vec<Failure> {
        self.per_farm.failures.clone()
    }
}

/// Per-scenario training, plus one model over all scenarios in combined
/// mode. Scalers are fitted on training rows only; the validation set used
/// for early stopping is the test split.
pub fn cmd_train(config: &RunConfig) -> TrainOutcome {
    let mut splits: BTreeMap<Scenario, (SplitData, ScalerParams)> = BTreeMap::new();
    let per_farm = Outcome::run(config, |sc| {
        let (ds, _) = load_scenario(config, sc)?;
        let split = train_test_split(ds.len(), &config.split)?;
        let data = split_data(&ds, &split);
        let fs = fit_scaler(&data.x_train, config.scaler)?;
        let ts = fit_scaler(&data.y_train, config.scaler)?;
        let tr = normalized(&fs, &ts, &data.x_train, &data.y_train)?;
        let te = normalized(&fs, &ts, &data.x_test, &data.y_test)?;
        let (model, history) = train(init_model(&config.mlp)?, &tr, &te, &config.mlp)?;
        let metrics = evaluate_with_scaler(&te.y, &model.predict(&te.x)?, &ts)?;
        let bundle = ModelBundle {
            model,
            feature_scaler: fs,
            target_scaler: ts.clone(),
            split: Some(config.split),
            scenario: Some(sc.to_string()),
        };
        write_training_outputs(config, sc.label(), &bundle, &history)?;
        write_json(&out_path(config, &format!("{sc}_metrics.json")), &metrics)?;
        splits.insert(sc, (data, ts));
        Ok(TrainResult {
            bundle,
            history,
            metrics,
        })
    });
    print_metrics(
        per_farm
            .results
            .iter()
            .map(|(sc, r)| (sc.label(), &r.metrics, Some(r.history.epochs()))),
    );

    let mut outcome = TrainOutcome {
        per_farm,
        combined: None,
        comparison: Vec::new(),
    };
    if config.combined {
        match train_combined(config, &splits, &outcome.per_farm.results) {
            Ok((res, cmp)) => {
                for c in &cmp {
                    println!(
                        "{:<10} per-farm mse {:.6e}  combined mse {:.6e}{}",
                        c.scenario,
                        c.per_farm_mse,
                        c.combined_mse,
                        if c.combined_worse {
                            ""
                        } else {
                            "  (combined not worse)"
                        }
                    );
                }
                outcome.combined = Some(res);
                outcome.comparison = cmp;
            }
            Err(e) => outcome.per_farm.failures.push(Failure {
                scope: COMBINED.into(),
                error: format!("{e:#}"),
            }),
        }
    }
    outcome
}

fn train_combined(
    config: &RunConfig,
    splits: &BTreeMap<Scenario, (SplitData, ScalerParams)>,
    per_farm: &BTreeMap<Scenario, TrainResult>,
) -> Result<(TrainResult, Vec<CombinedComparison>)> {
    if splits.len() < 2 {
        bail!(
            "combined mode needs at least two successfully trained scenarios, have {}",
            splits.len()
        );
    }
    let parts: Vec<&SplitData> = splits.values().map(|(d, _)| d).collect();
    let stack = |f: fn(&SplitData) -> &Matrix| -> Result<Matrix> {
        let mut m = f(parts[0]).clone();
        for d in &parts[1..] {
            m = m.vstack(f(d))?;
        }
        Ok(m)
    };
    let x_train = stack(|d| &d.x_train)?;
    let y_train = stack(|d| &d.y_train)?;
    let x_test = stack(|d| &d.x_test)?;
    let y_test = stack(|d| &d.y_test)?;
    let fs = fit_scaler(&x_train, config.scaler)?;
    let ts = fit_scaler(&y_train, config.scaler)?;
    let tr = normalized(&fs, &ts, &x_train, &y_train)?;
    let te = normalized(&fs, &ts, &x_test, &y_test)?;
    let (model, history) = train(init_model(&config.mlp)?, &tr, &te, &config.mlp)?;
    let metrics = evaluate_with_scaler(&te.y, &model.predict(&te.x)?, &ts)?;

    let mut per_scenario = BTreeMap::new();
    let mut comparison = Vec::new();
    for (sc, (data, farm_ts)) in splits {
        // Combined predictions in watts, re-expressed in the farm's own
        // normalized units so they compare with the per-farm model.
        let watts = ts.inverse_values(0, &model.predict(&transform(&fs, &data.x_test)?)?);
        let pred = farm_ts.transform_values(0, &watts);
        let truth = farm_ts.transform_values(0, data.y_test.as_slice());
        let m = evaluate_with_scaler(&truth, &pred, farm_ts)?;
        let per_farm_mse = per_farm[sc].metrics.mse;
        comparison.push(CombinedComparison {
            scenario: sc.to_string(),
            per_farm_mse,
            combined_mse: m.mse,
            combined_worse: m.mse > per_farm_mse,
        });
        per_scenario.insert(sc.to_string(), m);
    }

    let bundle = ModelBundle {
        model,
        feature_scaler: fs,
        target_scaler: ts,
        split: Some(config.split),
        scenario: Some(COMBINED.into()),
    };
    write_training_outputs(config, COMBINED, &bundle, &history)?;
    write_json(&out_path(config, "combined_metrics.json"), &metrics)?;
    write_json(
        &out_path(config, "combined_per_scenario_metrics.json"),
        &per_scenario,
    )?;
    write_json(&out_path(config, "combined_comparison.json"), &comparison)?;
    Ok((
        TrainResult {
            bundle,
            history,
            metrics,
        },
        comparison,
    ))
}

fn print_metrics<'a>(rows: impl Iterator<Item = (&'a str, &'a MetricsReport, Option<usize>)>) {
    println!(
        "{:<10} {:>7} {:>14} {:>14} {:>14} {:>10} {:>14} {:>7}",
        "scenario", "samples", "mse", "rmse", "mae", "r2", "rmse_watts", "epochs"
    );
    for (name, m, epochs) in rows {
        println!(
            "{:<10} {:>7} {:>14.6e} {:>14.6e} {:>14.6e} {:>10.6} {:>14.3} {:>7}",
            name,
            m.samples,
            m.mse,
            m.rmse,
            m.mae,
            m.r2,
            m.rmse_physical,
            epochs.map_or("-".to_string(), |e| e.to_string())
        );
    }
}

/// Re-evaluates a saved model on the test rows of one or more scenarios.
///
/// The split is rebuilt from the one stored with the model. A model trained
/// on a single scenario may only be evaluated on that scenario; metrics are
/// in the model's own target units.
pub fn cmd_evaluate(
    config: &RunConfig,
    model_path: &Path,
    scenario: Option<Scenario>,
) -> Outcome<MetricsReport> {
    let bundle = match load_model(model_path) {
        Ok(b) => b,
        Err(e) => {
            return Outcome {
                results: BTreeMap::new(),
                failures: vec![Failure {
                    scope: "model".into(),
                    error: format!("{}: {e}", model_path.display()),
                }],
            }
        }
    };
    let trained_on: Option<Scenario> = bundle.scenario.as_deref().and_then(|s| s.parse().ok());
    let targets: Vec<Scenario> = match (scenario, trained_on) {
        (Some(s), _) => vec![s],
        (None, Some(s)) => vec![s],
        (None, None) => config.scenarios.keys().copied().collect(),
    };
    let mut scoped = config.clone();
    scoped.scenarios.retain(|sc, _| targets.contains(sc));
    let mut outcome = Outcome::run(&scoped, |sc| {
        if let Some(t) = trained_on {
            if t != sc {
                bail!("model was trained on {t}, not {sc}");
            }
        }
        let (ds, _) = load_scenario(config, sc)?;
        let width = position_features(&ds).cols();
        if bundle.model.input_dim() != width || bundle.feature_scaler.features() != width {
            bail!(
                "model expects {} inputs with a {}-feature scaler; {sc} records have {width}",
                bundle.model.input_dim(),
                bundle.feature_scaler.features()
            );
        }
        let spec = bundle.split.unwrap_or(config.split);
        let data = split_data(&ds, &train_test_split(ds.len(), &spec)?);
        let te = normalized(
            &bundle.feature_scaler,
            &bundle.target_scaler,
            &data.x_test,
            &data.y_test,
        )?;
        let metrics =
            evaluate_with_scaler(&te.y, &bundle.model.predict(&te.x)?, &bundle.target_scaler)?;
        write_json(
            &out_path(config, &format!("{sc}_evaluation.json")),
            &metrics,
        )?;
        Ok(metrics)
    });
    for sc in &targets {
        if !config.scenarios.contains_key(sc) {
            outcome.failures.push(Failure {
                scope: sc.to_string(),
                error: "no data file configured".into(),
            });
        }
    }
    print_metrics(outcome.results.iter().map(|(sc, m)| (sc.label(), m, None)));
    outcome
}

#[derive(Debug, Clone, Serialize)]
pub struct PcaFile {
    pub scenario: String,
    pub features: usize,
    pub components: [Vec<f64>; 2],
    pub explained_variance: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct PlotResult {
    pub pca: geometry::PcaProjection,
    /// Record indices whose layouts were written.
    pub sampled: Vec<usize>,
}

/// PCA scores of the 32 coordinates and a sample of layouts for scatter
/// plots.
pub fn cmd_plotdata(config: &RunConfig) -> Outcome<PlotResult> {
    Outcome::run(config, |sc| {
        let (ds, _) = load_scenario(config, sc)?;
        let pca = pca_2d(&position_features(&ds))?;
        let mut csv = String::from("record,pc1,pc2\n");
        for (i, s) in pca.scores.iter().enumerate() {
            writeln!(csv, "{i},{},{}", s[0], s[1])?;
        }
        write_text(&out_path(config, &format!("{sc}_pca.csv")), &csv)?;
        write_json(
            &out_path(config, &format!("{sc}_pca.json")),
            &PcaFile {
                scenario: sc.to_string(),
                features: pca.components[0].len(),
                components: pca.components.clone(),
                explained_variance: pca.explained_variance,
            },
        )?;

        let mut sampled = PinnedRng::new(config.seed, STREAM_SAMPLE).permutation(ds.len());
        sampled.truncate(config.plot_samples.min(ds.len()));
        let mut csv = String::from("sample,record,wec,x,y\n");
        for (s, &r) in sampled.iter().enumerate() {
            for (w, p) in ds.records[r].layout.positions.iter().enumerate() {
                writeln!(csv, "{s},{r},{},{},{}", w + 1, p.x, p.y)?;
            }
        }
        write_text(&out_path(config, &format!("{sc}_layouts.csv")), &csv)?;
        Ok(PlotResult { pca, sampled })
    })
}
