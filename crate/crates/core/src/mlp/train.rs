use serde::{Deserialize, Serialize};

use super::{loss_and_gradients, mse, Gradients, MlpConfig, MlpModel, OptimizerKind};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{PinnedRng, STREAM_BATCHES};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

/// Feature rows with their targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub x: Matrix,
    pub y: Vec<f64>,
}

impl Samples {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::Shape(format!(
                "{} rows with {} targets",
                x.rows(),
                y.len()
            )));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Samples {
        Samples {
            x: self.x.select_rows(indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
        }
    }
}

/// Per-epoch losses in normalized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Batch-size-weighted mean of the mini-batch losses seen in each epoch.
    pub train_loss: Vec<f64>,
    /// Validation MSE after each epoch.
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.val_loss.len()
    }

    pub fn best_val_loss(&self) -> f64 {
        self.val_loss[self.best_epoch]
    }

    /// Running minimum of the validation loss.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.val_loss
            .iter()
            .scan(f64::INFINITY, |best, &v| {
                *best = best.min(v);
                Some(*best)
            })
            .collect()
    }
}

/// Parameter update rule with its state.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        step: i32,
        m: Gradients,
        v: Gradients,
    },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, model: &MlpModel) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                step: 0,
                m: Gradients::zeros_like(model),
                v: Gradients::zeros_like(model),
            },
        }
    }

    pub fn step(&mut self, model: &mut MlpModel, grads: &Gradients) {
        match self {
            Optimizer::Sgd { lr } => {
                let lr = *lr;
                let params = model.weights.iter_mut().chain(model.biases.iter_mut());
                let g = grads.weights.iter().chain(grads.biases.iter());
                for (p, g) in params.zip(g) {
                    p.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * g);
                }
            }
            Optimizer::Adam { lr, step, m, v } => {
                *step += 1;
                let c1 = 1.0 - BETA1.powi(*step);
                let c2 = 1.0 - BETA2.powi(*step);
                let lr = *lr;
                let params = model.weights.iter_mut().chain(model.biases.iter_mut());
                let g = grads.weights.iter().chain(grads.biases.iter());
                let ms = m.weights.iter_mut().chain(m.biases.iter_mut());
                let vs = v.weights.iter_mut().chain(v.biases.iter_mut());
                for (((p, g), m), v) in params.zip(g).zip(ms).zip(vs) {
                    for i in 0..p.len() {
                        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        p[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
                    }
                }
            }
        }
    }
}

/// Mini-batch training with early stopping on validation MSE.
///
/// Batches follow a fresh permutation of the training rows each epoch, drawn
/// from the pinned batch stream of `config.seed`. Returns the parameters of
/// the epoch with the lowest validation loss.
pub fn train(
    model: MlpModel,
    train_set: &Samples,
    val_set: &Samples,
    config: &MlpConfig,
) -> Result<(MlpModel, TrainHistory)> {
    config.validate()?;
    model.check_shapes()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "training needs non-empty sets (train {}, validation {})",
            train_set.len(),
            val_set.len()
        )));
    }
    let mut model = model;
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, &model);
    let mut rng = PinnedRng::new(config.seed, STREAM_BATCHES);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    let mut best = model.clone();
    let mut best_val = f64::INFINITY;
    let mut stale = 0usize;

    for epoch in 0..config.max_epochs {
        rng.shuffle(&mut order);
        let mut weighted = 0.0;
        for batch in order.chunks(config.batch_size) {
            let b = train_set.select(batch);
            let (loss, grads) = loss_and_gradients(&model, &b.x, &b.y)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            weighted += loss * batch.len() as f64;
            optimizer.step(&mut model, &grads);
        }
        let train_loss = weighted / train_set.len() as f64;
        let val_loss = mse(&model, &val_set.x, &val_set.y)?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: val_loss,
            });
        }
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);

        if val_loss < best_val {
            best_val = val_loss;
            best = model.clone();
            history.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if config.early_stop_patience > 0 && stale >= config.early_stop_patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    Ok((best, history))
}
