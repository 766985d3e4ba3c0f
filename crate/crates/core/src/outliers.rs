//! Outlier screening: Local Outlier Factor, z-scores and box-plot fences.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::dataset::FarmDataset;
use crate::error::{Error, Result};
use crate::geometry::{mean_distances, position_features, standardize_columns};
use crate::matrix::Matrix;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LofParams {
    /// Neighborhood size.
    pub k: usize,
}

impl Default for LofParams {
    fn default() -> Self {
        Self { k: 20 }
    }
}

/// Candidate neighbor ordered by (distance, index).
#[derive(Debug, Clone, Copy)]
struct Neighbor {
    dist: f64,
    idx: usize,
}

impl PartialEq for Neighbor {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.idx.cmp(&other.idx))
    }
}

#[inline]
fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// The `k` nearest other points of `i`, nearest first, ties to the lower index.
fn k_nearest(points: &Matrix, i: usize, k: usize) -> Vec<Neighbor> {
    let p = points.row(i);
    let mut heap: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(k + 1);
    for j in 0..points.rows() {
        if j == i {
            continue;
        }
        let cand = Neighbor {
            dist: euclidean(p, points.row(j)),
            idx: j,
        };
        if heap.len() < k {
            heap.push(cand);
        } else if let Some(top) = heap.peek() {
            if cand < *top {
                heap.pop();
                heap.push(cand);
            }
        }
    }
    heap.into_sorted_vec()
}

/// Classical LOF over exact brute-force k-NN.
///
/// Points whose reachability distances are all zero (exact duplicates) get
/// an infinite local reachability density; a point and its neighbors all at
/// infinite density score exactly 1.
pub fn lof_scores(points: &Matrix, params: &LofParams) -> Result<Vec<f64>> {
    let n = points.rows();
    let k = params.k;
    if k == 0 || n <= k {
        return Err(Error::InvalidArgument(format!(
            "LOF needs 1 <= k < number of points (k = {k}, points = {n})"
        )));
    }
    if points.cols() == 0 {
        return Err(Error::InvalidArgument(
            "LOF needs at least one feature".into(),
        ));
    }

    let neighbors: Vec<Vec<Neighbor>> = par::map_range(n, |i| k_nearest(points, i, k));
    let k_distance: Vec<f64> = neighbors.iter().map(|nb| nb[k - 1].dist).collect();

    let lrd: Vec<f64> = par::map_slice(&neighbors, |nb| {
        let reach: f64 = nb.iter().map(|o| k_distance[o.idx].max(o.dist)).sum();
        if reach == 0.0 {
            f64::INFINITY
        } else {
            k as f64 / reach
        }
    });

    Ok(par::map_range(n, |i| {
        let own = lrd[i];
        let mean_nb = neighbors[i].iter().map(|o| lrd[o.idx]).sum::<f64>() / k as f64;
        if own.is_infinite() {
            1.0
        } else {
            mean_nb / own
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScores {
    pub scores: Vec<f64>,
    pub flags: Vec<bool>,
}

/// `(v - mean) / std` with the population standard deviation; flags
/// `|z| > threshold`. A constant series scores all zeros.
pub fn zscore_flags(values: &[f64], threshold: f64) -> Result<ZScores> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "z-scores need at least 2 values, got {}",
            values.len()
        )));
    }
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "z threshold must be positive, got {threshold}"
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let scores: Vec<f64> = if sd > 0.0 {
        values.iter().map(|v| (v - mean) / sd).collect()
    } else {
        vec![0.0; values.len()]
    };
    let flags = scores.iter().map(|z| z.abs() > threshold).collect();
    Ok(ZScores { scores, flags })
}

/// Quantile by linear interpolation between order statistics of a sorted
/// slice: position `(n - 1) * q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqrFences {
    pub q1: f64,
    pub q3: f64,
    pub lower: f64,
    pub upper: f64,
    pub flags: Vec<bool>,
}

pub fn iqr_fences(values: &[f64], multiplier: f64) -> Result<IqrFences> {
    if values.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "box-plot fences need at least 4 values, got {}",
            values.len()
        )));
    }
    if multiplier.is_nan() || multiplier <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "IQR multiplier must be positive, got {multiplier}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let lower = q1 - multiplier * iqr;
    let upper = q3 + multiplier * iqr;
    let flags = values.iter().map(|&v| v < lower || v > upper).collect();
    Ok(IqrFences {
        q1,
        q3,
        lower,
        upper,
        flags,
    })
}

/// Feature space the detectors run in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSpace {
    /// `(farm_mean_distance, total_power)` per record.
    #[default]
    DistancePower,
    /// The 32 raw coordinates.
    Positions,
}

impl std::str::FromStr for FeatureSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distance_power" | "distance-power" => Ok(FeatureSpace::DistancePower),
            "positions" => Ok(FeatureSpace::Positions),
            other => Err(Error::InvalidArgument(format!("feature space {other:?}"))),
        }
    }
}

impl FeatureSpace {
    pub fn column_names(self) -> Vec<String> {
        match self {
            FeatureSpace::DistancePower => vec!["farm_mean_distance".into(), "total_power".into()],
            FeatureSpace::Positions => (0..crate::dataset::POSITION_FIELDS)
                .map(|i| crate::dataset::ColumnOrder::Interleaved.column_name(i))
                .collect(),
        }
    }

    pub fn extract(self, ds: &FarmDataset) -> Matrix {
        match self {
            FeatureSpace::DistancePower => {
                let d = mean_distances(ds);
                let mut m = Matrix::zeros(ds.len(), 2);
                for (i, (dist, rec)) in d.iter().zip(&ds.records).enumerate() {
                    m.set(i, 0, *dist);
                    m.set(i, 1, rec.total_power);
                }
                m
            }
            FeatureSpace::Positions => position_features(ds),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutlierParams {
    pub k: usize,
    pub lof_threshold: f64,
    pub z_threshold: f64,
    pub iqr_multiplier: f64,
    /// Standardize each feature before LOF so distance and power weigh equally.
    pub standardize: bool,
    pub feature_space: FeatureSpace,
}

impl Default for OutlierParams {
    fn default() -> Self {
        Self {
            k: 20,
            lof_threshold: 1.5,
            z_threshold: 3.0,
            iqr_multiplier: 1.5,
            standardize: true,
            feature_space: FeatureSpace::DistancePower,
        }
    }
}

/// Results of all three detectors. The univariate detectors run per feature
/// column and a record is flagged when any column flags it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub features: Vec<String>,
    pub lof_scores: Vec<f64>,
    pub lof_flags: Vec<bool>,
    /// Largest `|z|` over the feature columns.
    pub z_scores: Vec<f64>,
    pub z_flags: Vec<bool>,
    /// Per-feature lower fences.
    pub iqr_lower: Vec<f64>,
    /// Per-feature upper fences.
    pub iqr_upper: Vec<f64>,
    pub iqr_flags: Vec<bool>,
}

impl OutlierReport {
    pub fn len(&self) -> usize {
        self.lof_scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lof_scores.is_empty()
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        let c = |v: &[bool]| v.iter().filter(|&&f| f).count();
        (c(&self.lof_flags), c(&self.z_flags), c(&self.iqr_flags))
    }

    /// Records flagged by all three detectors.
    pub fn flagged_by_all(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.lof_flags[i] && self.z_flags[i] && self.iqr_flags[i])
            .collect()
    }

    /// Records flagged by at least one detector.
    pub fn flagged_by_any(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.lof_flags[i] || self.z_flags[i] || self.iqr_flags[i])
            .collect()
    }
}

/// Runs LOF, z-score and IQR screening on a record-by-feature matrix.
pub fn screen(
    features: &Matrix,
    names: Vec<String>,
    params: &OutlierParams,
) -> Result<OutlierReport> {
    let n = features.rows();
    let lof_input = if params.standardize {
        standardize_columns(features)
    } else {
        features.clone()
    };
    let lof = lof_scores(&lof_input, &LofParams { k: params.k })?;
    let lof_flags = lof.iter().map(|&s| s > params.lof_threshold).collect();

    let mut z_scores = vec![0.0f64; n];
    let mut z_flags = vec![false; n];
    let mut iqr_flags = vec![false; n];
    let mut iqr_lower = Vec::with_capacity(features.cols());
    let mut iqr_upper = Vec::with_capacity(features.cols());
    for j in 0..features.cols() {
        let col = features.column(j);
        let z = zscore_flags(&col, params.z_threshold)?;
        for i in 0..n {
            z_scores[i] = z_scores[i].max(z.scores[i].abs());
            z_flags[i] |= z.flags[i];
        }
        let f = iqr_fences(&col, params.iqr_multiplier)?;
        for (flag, &hit) in iqr_flags.iter_mut().zip(&f.flags) {
            *flag |= hit;
        }
        iqr_lower.push(f.lower);
        iqr_upper.push(f.upper);
    }

    Ok(OutlierReport {
        features: names,
        lof_scores: lof,
        lof_flags,
        z_scores,
        z_flags,
        iqr_lower,
        iqr_upper,
        iqr_flags,
    })
}

/// Screens a scenario in the configured feature space.
pub fn screen_dataset(ds: &FarmDataset, params: &OutlierParams) -> Result<OutlierReport> {
    let features = params.feature_space.extract(ds);
    screen(&features, params.feature_space.column_names(), params)
}

/// Records in the lowest 5% of farm mean distance whose total power is above
/// the median: the "close layout, high output" extremes.
pub fn low_distance_high_power(distances: &[f64], powers: &[f64]) -> Vec<usize> {
    if distances.len() < 4 {
        return Vec::new();
    }
    let mut sd = distances.to_vec();
    sd.sort_by(f64::total_cmp);
    let mut sp = powers.to_vec();
    sp.sort_by(f64::total_cmp);
    let d_cut = quantile_sorted(&sd, 0.05);
    let p_cut = quantile_sorted(&sp, 0.5);
    (0..distances.len())
        .filter(|&i| distances[i] <= d_cut && powers[i] > p_cut)
        .collect()
}
