//! Run configuration: one JSON file plus command-line overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use wecfarm::dataset::{HeaderPolicy, Scenario, POSITION_FIELDS};
use wecfarm::mlp::MlpConfig;
use wecfarm::outliers::OutlierParams;
use wecfarm::preprocess::{ScalerKind, SplitSpec};
use wecfarm::synth::synthetic_dataset;

pub const RESOLVED_CONFIG: &str = "resolved_config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Scenario name to CSV path.
    pub scenarios: BTreeMap<Scenario, PathBuf>,
    pub output_dir: PathBuf,
    /// Copied into `split.seed` and `mlp.seed` by [`RunConfig::prepare`].
    pub seed: u64,
    pub split: SplitSpec,
    pub scaler: ScalerKind,
    pub mlp: MlpConfig,
    pub outliers: OutlierParams,
    /// Also train one model on all scenarios' training rows.
    pub combined: bool,
    /// Treat validation warnings as failures.
    pub strict: bool,
    pub sum_tolerance: f64,
    pub header: HeaderPolicy,
    /// Records sampled for the layout scatter output.
    pub plot_samples: usize,
    /// Generate synthetic CSVs for scenarios without a configured path.
    pub fixtures: bool,
    pub fixture_rows: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenarios: BTreeMap::new(),
            output_dir: PathBuf::from("out"),
            seed: 42,
            split: SplitSpec::default(),
            scaler: ScalerKind::MinMax,
            mlp: MlpConfig::default(),
            outliers: OutlierParams::default(),
            combined: false,
            strict: false,
            sum_tolerance: 1e-6,
            header: HeaderPolicy::Auto,
            plot_samples: 10,
            fixtures: false,
            fixture_rows: 1000,
        }
    }
}

/// Command-line values that win over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scenarios: Vec<(Scenario, PathBuf)>,
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub epochs: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub fixture_rows: Option<usize>,
    pub combined: bool,
    pub fixtures: bool,
    pub strict: bool,
    pub no_shuffle: bool,
}

/// Parses `NAME=PATH`.
pub fn parse_scenario_arg(s: &str) -> Result<(Scenario, PathBuf)> {
    let (name, path) = s
        .split_once('=')
        .with_context(|| format!("expected NAME=PATH, got {s:?}"))?;
    Ok((name.parse()?, PathBuf::from(path)))
}

/// Parses a comma-separated width list such as `64,64`. Empty means no
/// hidden layers.
pub fn parse_hidden(s: &str) -> Result<Vec<usize>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .with_context(|| format!("bad layer width {w:?}"))
        })
        .collect()
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// File config (or defaults) with overrides applied.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        for (sc, path) in &o.scenarios {
            self.scenarios.insert(*sc, path.clone());
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(k) = o.k {
            self.outliers.k = k;
        }
        if let Some(h) = &o.hidden {
            self.mlp.hidden_layers = h.clone();
        }
        if let Some(e) = o.epochs {
            self.mlp.max_epochs = e;
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = dir.clone();
        }
        if let Some(n) = o.fixture_rows {
            self.fixture_rows = n;
        }
        self.combined |= o.combined;
        self.fixtures |= o.fixtures;
        self.strict |= o.strict;
        if o.no_shuffle {
            self.split.shuffled = false;
        }
    }

    /// Checks the configuration, propagates the seed, creates the output
    /// directory, writes fixtures if requested and records the resolved
    /// config next to the outputs. Configured paths are checked before
    /// anything is written.
    pub fn prepare(mut self) -> Result<Self> {
        self.split.seed = self.seed;
        self.mlp.seed = self.seed;
        if self.mlp.input_dim != POSITION_FIELDS {
            bail!(
                "mlp.input_dim must be {POSITION_FIELDS} for farm layouts, got {}",
                self.mlp.input_dim
            );
        }
        self.mlp.validate()?;
        if self.outliers.k == 0 {
            bail!("outliers.k must be at least 1");
        }
        for (sc, path) in &self.scenarios {
            if !path.is_file() {
                bail!("{sc}: data file {} does not exist", path.display());
            }
        }
        if self.scenarios.is_empty() && !self.fixtures {
            bail!("no scenarios configured; pass --scenario NAME=PATH or --fixtures");
        }

        fs::create_dir_all(&self.output_dir)
            .with_context(|| format!("creating output directory {}", self.output_dir.display()))?;
        if self.fixtures {
            if self.fixture_rows < 2 {
                bail!("fixture_rows must be at least 2");
            }
            let dir = self.output_dir.join("fixtures");
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            for sc in Scenario::ALL {
                if self.scenarios.contains_key(&sc) {
                    continue;
                }
                let path = dir.join(format!("{sc}_Data.csv"));
                synthetic_dataset(sc, self.fixture_rows, self.seed).write_csv(&path)?;
                self.scenarios.insert(sc, path);
            }
        }
        let text = serde_json::to_string_pretty(&self)? + "\n";
        let out = self.output_dir.join(RESOLVED_CONFIG);
        fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
        Ok(self)
    }
}
