//! Feature/target scaling and reproducible train/test splits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{PinnedRng, STREAM_SPLIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalerKind {
    #[default]
    MinMax,
    Standard,
}

impl std::str::FromStr for ScalerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "minmax" => Ok(ScalerKind::MinMax),
            "standard" => Ok(ScalerKind::Standard),
            other => Err(Error::InvalidArgument(format!("scaler kind {other:?}"))),
        }
    }
}

/// Per-feature statistics fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScalerParams {
    MinMax { min: Vec<f64>, max: Vec<f64> },
    Standard { mean: Vec<f64>, std: Vec<f64> },
}

impl ScalerParams {
    pub fn kind(&self) -> ScalerKind {
        match self {
            ScalerParams::MinMax { .. } => ScalerKind::MinMax,
            ScalerParams::Standard { .. } => ScalerKind::Standard,
        }
    }

    pub fn features(&self) -> usize {
        match self {
            ScalerParams::MinMax { min, .. } => min.len(),
            ScalerParams::Standard { mean, .. } => mean.len(),
        }
    }

    /// (offset, scale) of feature `j`; scale 0 marks a constant feature.
    #[inline]
    fn affine(&self, j: usize) -> (f64, f64) {
        match self {
            ScalerParams::MinMax { min, max } => (min[j], max[j] - min[j]),
            ScalerParams::Standard { mean, std } => (mean[j], std[j]),
        }
    }

    fn check_width(&self, cols: usize) -> Result<()> {
        if cols != self.features() {
            return Err(Error::Shape(format!(
                "scaler fitted on {} features, data has {cols}",
                self.features()
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn transform_value(&self, j: usize, v: f64) -> f64 {
        let (offset, scale) = self.affine(j);
        if scale == 0.0 {
            0.0
        } else {
            (v - offset) / scale
        }
    }

    #[inline]
    pub fn inverse_value(&self, j: usize, v: f64) -> f64 {
        let (offset, scale) = self.affine(j);
        v * scale + offset
    }

    pub fn transform_values(&self, j: usize, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.transform_value(j, v)).collect()
    }

    pub fn inverse_values(&self, j: usize, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.inverse_value(j, v)).collect()
    }
}

pub fn fit_scaler(train: &Matrix, kind: ScalerKind) -> Result<ScalerParams> {
    if train.rows() == 0 || train.cols() == 0 {
        return Err(Error::InvalidArgument(
            "cannot fit a scaler on an empty matrix".into(),
        ));
    }
    let cols = train.cols();
    Ok(match kind {
        ScalerKind::MinMax => {
            let mut min = vec![f64::INFINITY; cols];
            let mut max = vec![f64::NEG_INFINITY; cols];
            for row in train.iter_rows() {
                for j in 0..cols {
                    min[j] = min[j].min(row[j]);
                    max[j] = max[j].max(row[j]);
                }
            }
            ScalerParams::MinMax { min, max }
        }
        ScalerKind::Standard => {
            let n = train.rows() as f64;
            let mut mean = vec![0.0; cols];
            for row in train.iter_rows() {
                for j in 0..cols {
                    mean[j] += row[j];
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            let mut var = vec![0.0; cols];
            for row in train.iter_rows() {
                for j in 0..cols {
                    var[j] += (row[j] - mean[j]).powi(2);
                }
            }
            let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
            ScalerParams::Standard { mean, std }
        }
    })
}

/// Scales every column; constant features map to 0 and nothing is clipped.
pub fn transform(params: &ScalerParams, data: &Matrix) -> Result<Matrix> {
    params.check_width(data.cols())?;
    let mut out = data.clone();
    for i in 0..out.rows() {
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            *v = params.transform_value(j, *v);
        }
    }
    Ok(out)
}

pub fn inverse_transform(params: &ScalerParams, data: &Matrix) -> Result<Matrix> {
    params.check_width(data.cols())?;
    let mut out = data.clone();
    for i in 0..out.rows() {
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            *v = params.inverse_value(j, *v);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
    pub shuffled: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            seed: 42,
            shuffled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Number of test rows: `round(test_fraction * n)`, halves away from zero.
pub fn test_size(n: usize, test_fraction: f64) -> usize {
    (test_fraction * n as f64).round() as usize
}

/// Permutes `0..n` (Fisher-Yates on the pinned split stream when shuffled)
/// and takes the tail as the test set.
pub fn train_test_split(n: usize, spec: &SplitSpec) -> Result<Split> {
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {}",
            spec.test_fraction
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("cannot split {n} records")));
    }
    let order = if spec.shuffled {
        PinnedRng::new(spec.seed, STREAM_SPLIT).permutation(n)
    } else {
        (0..n).collect()
    };
    let cut = n - test_size(n, spec.test_fraction);
    Ok(Split {
        train: order[..cut].to_vec(),
        test: order[cut..].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn minmax_endpoints_and_extrapolation() {
        let p = fit_scaler(&col(&[0.0, 5.0, 10.0]), ScalerKind::MinMax).unwrap();
        assert_eq!(
            p,
            ScalerParams::MinMax {
                min: vec![0.0],
                max: vec![10.0]
            }
        );
        let t = transform(&p, &col(&[0.0, 10.0, 15.0])).unwrap();
        assert_eq!(t.column(0), vec![0.0, 1.0, 1.5]);
        assert_eq!(inverse_transform(&p, &col(&[0.5])).unwrap().get(0, 0), 5.0);
    }

    #[test]
    fn constant_features() {
        let s = fit_scaler(&col(&[4.0, 4.0, 4.0]), ScalerKind::Standard).unwrap();
        assert_eq!(
            s,
            ScalerParams::Standard {
                mean: vec![4.0],
                std: vec![0.0]
            }
        );
        assert_eq!(
            transform(&s, &col(&[4.0, 9.0])).unwrap().column(0),
            vec![0.0, 0.0]
        );
        assert_eq!(inverse_transform(&s, &col(&[0.0])).unwrap().get(0, 0), 4.0);

        let m = fit_scaler(&col(&[7.0, 7.0]), ScalerKind::MinMax).unwrap();
        assert_eq!(transform(&m, &col(&[7.0])).unwrap().get(0, 0), 0.0);
        assert_eq!(inverse_transform(&m, &col(&[0.0])).unwrap().get(0, 0), 7.0);
    }

    #[test]
    fn width_and_empty_errors() {
        assert!(fit_scaler(&Matrix::zeros(0, 3), ScalerKind::MinMax).is_err());
        let p = fit_scaler(&col(&[1.0, 2.0]), ScalerKind::MinMax).unwrap();
        assert!(transform(&p, &Matrix::zeros(2, 2)).is_err());
        assert!(inverse_transform(&p, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn unshuffled_tail() {
        let s = train_test_split(
            10,
            &SplitSpec {
                test_fraction: 0.2,
                seed: 1,
                shuffled: false,
            },
        )
        .unwrap();
        assert_eq!(s.test, vec![8, 9]);
        assert_eq!(s.train, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn split_sizes_and_determinism() {
        assert_eq!(test_size(72_000, 0.2), 14_400);
        let spec = SplitSpec::default();
        let a = train_test_split(100, &spec).unwrap();
        let b = train_test_split(100, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.test.len(), 20);
        let c = train_test_split(100, &SplitSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_rejects_bad_fraction() {
        for f in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(train_test_split(
                10,
                &SplitSpec {
                    test_fraction: f,
                    ..Default::default()
                }
            )
            .is_err());
        }
    }

    #[test]
    fn scaler_json_is_tagged() {
        let p = ScalerParams::MinMax {
            min: vec![0.1],
            max: vec![0.7],
        };
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"kind":"minmax","min":[0.1],"max":[0.7]}"#);
        let back: ScalerParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
