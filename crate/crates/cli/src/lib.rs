//! Command-line pipeline over the `wecfarm` library: statistics, outlier
//! screening, training, evaluation and plot data per scenario.

pub mod commands;
pub mod config;
