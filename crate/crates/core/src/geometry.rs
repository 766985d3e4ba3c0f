//! Layout distance features, per-farm summary statistics, correlation and a
//! two-component PCA used for visualization.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataset::{FarmDataset, WecLayout, POSITION_FIELDS, WEC_COUNT};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::par;

/// Pairwise WEC distances in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceMatrix {
    pub values: [[f64; WEC_COUNT]; WEC_COUNT],
}

impl DistanceMatrix {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceSummary {
    /// Mean distance from each WEC to the other 15.
    pub per_wec_avg: [f64; WEC_COUNT],
    /// Mean of `per_wec_avg`.
    pub farm_mean_distance: f64,
}

pub fn pairwise_distances(layout: &WecLayout) -> DistanceMatrix {
    let mut values = [[0.0; WEC_COUNT]; WEC_COUNT];
    let p = &layout.positions;
    for i in 0..WEC_COUNT {
        for j in (i + 1)..WEC_COUNT {
            let d = p[i].distance(&p[j]);
            values[i][j] = d;
            values[j][i] = d;
        }
    }
    DistanceMatrix { values }
}

pub fn distance_summary(dm: &DistanceMatrix) -> DistanceSummary {
    let mut per_wec_avg = [0.0; WEC_COUNT];
    for (i, avg) in per_wec_avg.iter_mut().enumerate() {
        let s: f64 = (0..WEC_COUNT)
            .filter(|&j| j != i)
            .map(|j| dm.values[i][j])
            .sum();
        *avg = s / (WEC_COUNT - 1) as f64;
    }
    let farm_mean_distance = per_wec_avg.iter().sum::<f64>() / WEC_COUNT as f64;
    DistanceSummary {
        per_wec_avg,
        farm_mean_distance,
    }
}

/// Farm mean distance of one layout.
pub fn farm_mean_distance(layout: &WecLayout) -> f64 {
    distance_summary(&pairwise_distances(layout)).farm_mean_distance
}

/// Farm mean distance for every record, in record order.
pub fn mean_distances(ds: &FarmDataset) -> Vec<f64> {
    par::map_slice(&ds.records, |r| farm_mean_distance(&r.layout))
}

/// Per-scenario statistics of farm mean distance and total power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarmSummary {
    pub records: usize,
    pub mean_distance: f64,
    pub min_distance: f64,
    pub max_distance: f64,
    pub mean_power: f64,
    pub min_power: f64,
    pub max_power: f64,
    /// Pearson r between farm mean distance and total power; NaN (`null`)
    /// when undefined.
    #[serde(with = "crate::serde_nan")]
    pub pearson_r: f64,
}

fn min_mean_max(values: &[f64]) -> (f64, f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
    }
    (lo, sum / values.len() as f64, hi)
}

pub fn farm_summary(ds: &FarmDataset) -> FarmSummary {
    summarize(&mean_distances(ds), &ds.total_powers())
}

/// Summary from precomputed (distance, power) series of equal non-zero length.
pub fn summarize(distances: &[f64], powers: &[f64]) -> FarmSummary {
    let (min_distance, mean_distance, max_distance) = min_mean_max(distances);
    let (min_power, mean_power, max_power) = min_mean_max(powers);
    let pearson_r = pearson_correlation(distances, powers).unwrap_or(f64::NAN);
    FarmSummary {
        records: distances.len(),
        mean_distance,
        min_distance,
        max_distance,
        mean_power,
        min_power,
        max_power,
        pearson_r,
    }
}

/// Pearson product-moment correlation. Returns NaN when either series is
/// constant or shorter than two values.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "correlation of series with lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Ok(f64::NAN);
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(f64::NAN);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    /// Two unit-length principal directions, each with `features` entries.
    pub components: [Vec<f64>; 2],
    /// Covariance eigenvalues of the two components, descending.
    pub explained_variance: [f64; 2],
    /// Per-record coordinates on the two components.
    pub scores: Vec<[f64; 2]>,
}

/// Top-2 principal components of the (sample) covariance of `features`.
///
/// Each component's largest-magnitude entry is made positive.
pub fn pca_2d(features: &Matrix) -> Result<PcaProjection> {
    let (n, p) = (features.rows(), features.cols());
    if n < 2 || p < 2 {
        return Err(Error::InvalidArgument(format!(
            "PCA needs at least 2 records and 2 features, got {n}x{p}"
        )));
    }
    let means: Vec<f64> = (0..p)
        .map(|j| features.iter_rows().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();

    let mut cov = DMatrix::<f64>::zeros(p, p);
    let mut centered = vec![0.0; p];
    for row in features.iter_rows() {
        for j in 0..p {
            centered[j] = row[j] - means[j];
        }
        for a in 0..p {
            for b in a..p {
                cov[(a, b)] += centered[a] * centered[b];
            }
        }
    }
    for a in 0..p {
        for b in a..p {
            let v = cov[(a, b)] / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let component = |k: usize| -> Vec<f64> {
        let col = eig.eigenvectors.column(order[k]);
        let mut v: Vec<f64> = col.iter().copied().collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        v.iter_mut().for_each(|x| *x *= sign / norm);
        v
    };
    let components = [component(0), component(1)];
    let explained_variance = [
        eig.eigenvalues[order[0]].max(0.0),
        eig.eigenvalues[order[1]].max(0.0),
    ];

    let scores = par::map_range(n, |i| {
        let row = features.row(i);
        let mut s = [0.0; 2];
        for (k, comp) in components.iter().enumerate() {
            s[k] = row
                .iter()
                .zip(&means)
                .zip(comp)
                .map(|((v, m), c)| (v - m) * c)
                .sum();
        }
        s
    });

    Ok(PcaProjection {
        components,
        explained_variance,
        scores,
    })
}

/// The 32 flattened coordinates of every record.
pub fn position_features(ds: &FarmDataset) -> Matrix {
    let mut m = Matrix::zeros(ds.len(), POSITION_FIELDS);
    for (i, r) in ds.records.iter().enumerate() {
        m.row_mut(i).copy_from_slice(&r.layout.flatten());
    }
    m
}

/// Column-wise `(v - mean) / std` with the population std; constant columns
/// become 0.
pub fn standardize_columns(m: &Matrix) -> Matrix {
    let n = m.rows() as f64;
    let mut out = m.clone();
    for j in 0..m.cols() {
        let col = m.column(j);
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        for (i, v) in col.iter().enumerate() {
            out.set(i, j, if sd > 0.0 { (v - mean) / sd } else { 0.0 });
        }
    }
    out
}
