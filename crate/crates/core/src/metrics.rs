//! Regression metrics in normalized and physical units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::ScalerParams;

/// MSE/RMSE/MAE in normalized target units plus their watt-domain
/// counterparts. `r2` is NaN (`null` in JSON) when the truth is constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub samples: usize,
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    #[serde(with = "crate::serde_nan")]
    pub r2: f64,
    #[serde(with = "crate::serde_nan")]
    pub mse_physical: f64,
    #[serde(with = "crate::serde_nan")]
    pub rmse_physical: f64,
    #[serde(with = "crate::serde_nan")]
    pub mae_physical: f64,
}

struct Errors {
    mse: f64,
    mae: f64,
}

fn errors(y_true: &[f64], y_pred: &[f64]) -> Errors {
    let n = y_true.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (t, p) in y_true.iter().zip(y_pred) {
        let r = t - p;
        se += r * r;
        ae += r.abs();
    }
    Errors {
        mse: se / n,
        mae: ae / n,
    }
}

fn check(y_true: &[f64], y_pred: &[f64]) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Shape(format!(
            "{} truths vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::InvalidArgument("no samples to evaluate".into()));
    }
    Ok(())
}

/// Normalized-unit metrics. Physical fields are NaN until filled by
/// [`evaluate_with_scaler`].
pub fn evaluate(y_true: &[f64], y_pred: &[f64]) -> Result<MetricsReport> {
    check(y_true, y_pred)?;
    let e = errors(y_true, y_pred);
    let n = y_true.len() as f64;
    let mean = y_true.iter().sum::<f64>() / n;
    let ss_tot: f64 = y_true.iter().map(|t| (t - mean) * (t - mean)).sum();
    let r2 = if ss_tot == 0.0 {
        f64::NAN
    } else {
        1.0 - e.mse * n / ss_tot
    };
    Ok(MetricsReport {
        samples: y_true.len(),
        mse: e.mse,
        rmse: e.mse.sqrt(),
        mae: e.mae,
        r2,
        mse_physical: f64::NAN,
        rmse_physical: f64::NAN,
        mae_physical: f64::NAN,
    })
}

/// Metrics on normalized values plus physical ones obtained by
/// inverse-transforming both series through column 0 of `target`.
pub fn evaluate_with_scaler(
    y_true: &[f64],
    y_pred: &[f64],
    target: &ScalerParams,
) -> Result<MetricsReport> {
    let mut rep = evaluate(y_true, y_pred)?;
    let t = target.inverse_values(0, y_true);
    let p = target.inverse_values(0, y_pred);
    let e = errors(&t, &p);
    rep.mse_physical = e.mse;
    rep.rmse_physical = e.mse.sqrt();
    rep.mae_physical = e.mae;
    Ok(rep)
}
