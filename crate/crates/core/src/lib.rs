//! Wave-farm power prediction toolkit.
//!
//! Reads 16-WEC layout/power records, derives layout distance features and
//! per-farm statistics, screens outliers, and trains a from-scratch MLP that
//! predicts total farm power from converter positions.
//!
//! Data-parallel loops (per-record geometry, LOF neighbor search, batch
//! gradients, batch prediction) run on rayon when the default `parallel`
//! feature is enabled and sequentially otherwise; both builds produce the
//! same bits.

pub mod dataset;
pub mod error;
pub mod geometry;
pub mod matrix;
pub mod metrics;
pub mod mlp;
pub mod outliers;
pub mod par;
pub mod preprocess;
pub mod rng;
pub mod synth;

mod serde_nan;

pub use dataset::{
    format_record, load_dataset, parse_record, validate_dataset, FarmDataset, FarmRecord,
    HeaderPolicy, Position, Scenario, ValidationReport, ValidationStatus, WecLayout,
};
pub use error::{Error, Result};
pub use geometry::{
    distance_summary, farm_summary, pairwise_distances, pca_2d, pearson_correlation,
    DistanceMatrix, DistanceSummary, FarmSummary, PcaProjection,
};
pub use matrix::Matrix;
pub use metrics::{evaluate, evaluate_with_scaler, MetricsReport};
pub use mlp::{
    init_model, load_model, loss_and_gradients, predict_batch, save_model, train, Activation,
    MlpConfig, MlpModel, ModelBundle, OptimizerKind, Samples, TrainHistory,
};
pub use outliers::{iqr_fences, lof_scores, zscore_flags, LofParams, OutlierParams, OutlierReport};
pub use preprocess::{
    fit_scaler, inverse_transform, train_test_split, transform, ScalerKind, ScalerParams, Split,
    SplitSpec,
};
