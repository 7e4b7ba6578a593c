//! The 35-5-5-1 multilayer perceptron that predicts the nonlinear SNR
//! (dB) from the feature vector: Glorot initialization, tanh hidden
//! layers, linear output, adaptive-moment training with early stopping
//! on a validation split, and versioned JSON serialization.
//!
//! Training is single-threaded and fully deterministic in the config
//! seed; reproducibility is prioritized over speed (the network is
//! tiny).

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_LAYOUT_ID};

pub const MODEL_VERSION: u32 = 1;

/// The paper's topology: 35 inputs, two hidden layers of 5, one output.
pub fn standard_layout() -> Vec<usize> {
    vec![35, 5, 5, 1]
}

/// MLP parameters plus the input standardization and the feature
/// layout the model was trained for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    pub version: u32,
    pub layout: Vec<usize>,
    pub feature_layout: String,
    /// Per-feature standardization, computed on the training split.
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    /// Row-major (out × in) weight matrix per layer.
    pub weights: Vec<Vec<f64>>,
    /// Bias vector per layer.
    pub biases: Vec<Vec<f64>>,
}

impl ModelWeights {
    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MODEL_VERSION {
            return Err(Error::data(format!(
                "unsupported model version {}",
                self.version
            )));
        }
        if self.layout.len() < 2 {
            return Err(Error::data("layout needs at least two layers".to_string()));
        }
        let n_layers = self.layout.len() - 1;
        if self.weights.len() != n_layers || self.biases.len() != n_layers {
            return Err(Error::data("layer count mismatch".to_string()));
        }
        for l in 0..n_layers {
            if self.weights[l].len() != self.layout[l] * self.layout[l + 1] {
                return Err(Error::data(format!("weight matrix {l} has wrong shape")));
            }
            if self.biases[l].len() != self.layout[l + 1] {
                return Err(Error::data(format!("bias vector {l} has wrong shape")));
            }
        }
        let d = self.layout[0];
        if self.feature_mean.len() != d || self.feature_std.len() != d {
            return Err(Error::data("standardization vectors have wrong shape".to_string()));
        }
        if self.feature_std.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::data("feature stds must be positive".to_string()));
        }
        if self
            .weights
            .iter()
            .flatten()
            .chain(self.biases.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::data("non-finite parameter".to_string()));
        }
        Ok(())
    }
}

/// Glorot-uniform initialization: weights in ±√(6/(fan_in+fan_out)),
/// biases zero, identity standardization. Deterministic per seed.
pub fn init(seed: u64, layout: &[usize]) -> Result<ModelWeights> {
    if layout.len() < 2 || layout.iter().any(|&n| n == 0) {
        return Err(Error::domain("invalid layer layout".to_string()));
    }
    let mut rng = crate::derive_rng(seed, 0, 11);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..layout.len() - 1 {
        let (fan_in, fan_out) = (layout[l], layout[l + 1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        weights.push(
            (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect(),
        );
        biases.push(vec![0.0; fan_out]);
    }
    Ok(ModelWeights {
        version: MODEL_VERSION,
        layout: layout.to_vec(),
        feature_layout: FEATURE_LAYOUT_ID.to_string(),
        feature_mean: vec![0.0; layout[0]],
        feature_std: vec![1.0; layout[0]],
        weights,
        biases,
    })
}

fn standardize(w: &ModelWeights, input: &[f64]) -> Vec<f64> {
    input
        .iter()
        .zip(&w.feature_mean)
        .zip(&w.feature_std)
        .map(|((x, m), s)| (x - m) / s)
        .collect()
}

/// Forward pass on an already-standardized input, returning every
/// layer's activations (index 0 is the input itself).
fn forward_std(w: &ModelWeights, x: &[f64]) -> Vec<Vec<f64>> {
    let n_layers = w.layout.len() - 1;
    let mut acts = Vec::with_capacity(n_layers + 1);
    acts.push(x.to_vec());
    for l in 0..n_layers {
        let (fan_in, fan_out) = (w.layout[l], w.layout[l + 1]);
        let prev = &acts[l];
        let mut out = Vec::with_capacity(fan_out);
        for o in 0..fan_out {
            let mut z = w.biases[l][o];
            let row = &w.weights[l][o * fan_in..(o + 1) * fan_in];
            for (wi, xi) in row.iter().zip(prev) {
                z += wi * xi;
            }
            out.push(if l + 1 < n_layers { z.tanh() } else { z });
        }
        acts.push(out);
    }
    acts
}

/// Predicted nonlinear SNR in dB for one feature vector.
pub fn forward(w: &ModelWeights, f: &FeatureVector) -> Result<f64> {
    if f.values().len() != w.layout[0] {
        return Err(Error::domain(format!(
            "feature length {} does not match model input size {}",
            f.values().len(),
            w.layout[0]
        )));
    }
    let x = standardize(w, f.values());
    Ok(*forward_std(w, &x)
        .last()
        .and_then(|o| o.first())
        .expect("non-empty layout"))
}

/// Parameter gradients of the mean squared error over one batch of
/// standardized inputs. Returns (d_weights, d_biases, batch_mse).
fn batch_gradients(
    w: &ModelWeights,
    inputs: &[Vec<f64>],
    targets: &[f64],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, f64) {
    let n_layers = w.layout.len() - 1;
    let mut dw: Vec<Vec<f64>> = w.weights.iter().map(|m| vec![0.0; m.len()]).collect();
    let mut db: Vec<Vec<f64>> = w.biases.iter().map(|b| vec![0.0; b.len()]).collect();
    let mut mse = 0.0;
    let scale = 1.0 / inputs.len() as f64;
    for (x, &t) in inputs.iter().zip(targets) {
        let acts = forward_std(w, x);
        let pred = acts[n_layers][0];
        let err = pred - t;
        mse += err * err * scale;
        // dL/d(output) for the MSE mean over the batch
        let mut delta = vec![2.0 * err * scale];
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (w.layout[l], w.layout[l + 1]);
            let prev = &acts[l];
            let mut delta_prev = vec![0.0; fan_in];
            for o in 0..fan_out {
                let g = delta[o];
                db[l][o] += g;
                let row = &mut dw[l][o * fan_in..(o + 1) * fan_in];
                let wrow = &w.weights[l][o * fan_in..(o + 1) * fan_in];
                for i in 0..fan_in {
                    row[i] += g * prev[i];
                    delta_prev[i] += g * wrow[i];
                }
            }
            if l > 0 {
                // tanh'(z) = 1 − tanh²(z); acts[l] stores tanh(z)
                for (dp, a) in delta_prev.iter_mut().zip(&acts[l]) {
                    *dp *= 1.0 - a * a;
                }
            }
            delta = delta_prev;
        }
    }
    (dw, db, mse)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Early-stop patience in epochs without validation improvement.
    pub patience: usize,
    /// Fraction of records held out for validation, in (0, 1).
    pub validation_fraction: f64,
    /// Decoupled weight decay; 0 disables it.
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 2000,
            patience: 20,
            validation_fraction: 0.15,
            weight_decay: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0)
            || self.batch_size == 0
            || self.max_epochs == 0
            || self.patience == 0
        {
            return Err(Error::domain("training parameters must be positive".to_string()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::domain("validation fraction must lie in (0, 1)".to_string()));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::domain("weight decay must be >= 0".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    pub warnings: Vec<String>,
    /// Epoch whose weights were kept (early stopping restores the best).
    pub best_epoch: usize,
}

fn shuffled_indices(n: usize, seed: u64, round: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = crate::derive_rng(seed, round, 12);
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

/// Trains the MLP with mini-batch Adam on the mean squared dB error.
/// Standardization comes from the training split only; zero-variance
/// features are clamped to unit std with a recorded warning. The
/// validation split never contributes gradients; early stopping
/// restores the best-validation weights.
pub fn train(
    dataset: &[(FeatureVector, f64)],
    cfg: &TrainConfig,
) -> Result<(ModelWeights, TrainHistory)> {
    cfg.validate()?;
    let n = dataset.len();
    if n < 10 {
        return Err(Error::domain(format!(
            "need at least 10 records to train, got {n}"
        )));
    }
    if dataset.iter().any(|(_, t)| !t.is_finite()) {
        return Err(Error::domain("non-finite training target".to_string()));
    }
    let layout = standard_layout();
    let d = layout[0];
    if dataset.iter().any(|(f, _)| f.values().len() != d) {
        return Err(Error::domain("feature length mismatch in dataset".to_string()));
    }

    // validation split from a seed-derived shuffle
    let shuffled = shuffled_indices(n, cfg.seed, u64::MAX);
    let n_val = ((n as f64 * cfg.validation_fraction).round() as usize).clamp(1, n - 1);
    let val_indices: Vec<usize> = shuffled[..n_val].to_vec();
    let train_indices: Vec<usize> = shuffled[n_val..].to_vec();

    // standardization on the training split only
    let mut warnings = Vec::new();
    let mut mean = vec![0.0; d];
    let mut std = vec![0.0; d];
    for &i in &train_indices {
        for (k, v) in dataset[i].0.values().iter().enumerate() {
            mean[k] += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= train_indices.len() as f64;
    }
    for &i in &train_indices {
        for (k, v) in dataset[i].0.values().iter().enumerate() {
            std[k] += (v - mean[k]) * (v - mean[k]);
        }
    }
    for (k, s) in std.iter_mut().enumerate() {
        *s = (*s / train_indices.len() as f64).sqrt();
        if *s <= 1e-12 * mean[k].abs().max(1.0) || !s.is_finite() {
            warnings.push(format!("feature {k} has zero variance; std clamped to 1"));
            *s = 1.0;
        }
    }

    let mut model = init(cfg.seed, &layout)?;
    model.feature_mean = mean;
    model.feature_std = std;

    let std_input = |i: usize, model: &ModelWeights| standardize(model, dataset[i].0.values());
    let train_std: Vec<Vec<f64>> = train_indices.iter().map(|&i| std_input(i, &model)).collect();
    let train_targets: Vec<f64> = train_indices.iter().map(|&i| dataset[i].1).collect();
    let val_std: Vec<Vec<f64>> = val_indices.iter().map(|&i| std_input(i, &model)).collect();
    let val_targets: Vec<f64> = val_indices.iter().map(|&i| dataset[i].1).collect();

    // Center the dB targets on the training mean so the output bias
    // starts on scale; the offset is folded back into the bias below.
    let target_mean: f64 = train_targets.iter().sum::<f64>() / train_targets.len() as f64;
    let train_targets: Vec<f64> = train_targets.iter().map(|t| t - target_mean).collect();
    let val_targets: Vec<f64> = val_targets.iter().map(|t| t - target_mean).collect();

    let mse_of = |model: &ModelWeights, xs: &[Vec<f64>], ts: &[f64]| -> f64 {
        let mut acc = 0.0;
        for (x, &t) in xs.iter().zip(ts) {
            let p = forward_std(model, x)[layout.len() - 1][0];
            acc += (p - t) * (p - t);
        }
        acc / xs.len() as f64
    };

    // Adam state
    let mut m_w: Vec<Vec<f64>> = model.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut v_w = m_w.clone();
    let mut m_b: Vec<Vec<f64>> = model.biases.iter().map(|b| vec![0.0; b.len()]).collect();
    let mut v_b = m_b.clone();
    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut step = 0usize;

    let mut history = Vec::new();
    let mut best = (0usize, f64::INFINITY, model.clone());
    let mut stall = 0usize;
    for epoch in 0..cfg.max_epochs {
        let order = shuffled_indices(train_std.len(), cfg.seed, epoch as u64);
        for chunk in order.chunks(cfg.batch_size) {
            let xs: Vec<Vec<f64>> = chunk.iter().map(|&i| train_std[i].clone()).collect();
            let ts: Vec<f64> = chunk.iter().map(|&i| train_targets[i]).collect();
            let (dw, db, _) = batch_gradients(&model, &xs, &ts);
            step += 1;
            let bc1 = 1.0 - beta1.powi(step as i32);
            let bc2 = 1.0 - beta2.powi(step as i32);
            for l in 0..model.weights.len() {
                for (i, g) in dw[l].iter().enumerate() {
                    m_w[l][i] = beta1 * m_w[l][i] + (1.0 - beta1) * g;
                    v_w[l][i] = beta2 * v_w[l][i] + (1.0 - beta2) * g * g;
                    let update = (m_w[l][i] / bc1) / ((v_w[l][i] / bc2).sqrt() + eps);
                    model.weights[l][i] -= cfg.learning_rate * update;
                    if cfg.weight_decay > 0.0 {
                        model.weights[l][i] -= cfg.learning_rate * cfg.weight_decay * model.weights[l][i];
                    }
                }
                for (i, g) in db[l].iter().enumerate() {
                    m_b[l][i] = beta1 * m_b[l][i] + (1.0 - beta1) * g;
                    v_b[l][i] = beta2 * v_b[l][i] + (1.0 - beta2) * g * g;
                    let update = (m_b[l][i] / bc1) / ((v_b[l][i] / bc2).sqrt() + eps);
                    model.biases[l][i] -= cfg.learning_rate * update;
                }
            }
        }
        let train_mse = mse_of(&model, &train_std, &train_targets);
        let val_mse = mse_of(&model, &val_std, &val_targets);
        history.push(EpochStats {
            epoch,
            train_mse,
            val_mse,
        });
        if val_mse < best.1 {
            best = (epoch, val_mse, model.clone());
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.patience {
                break;
            }
        }
    }
    let mut final_model = best.2;
    let out_layer = final_model.biases.len() - 1;
    final_model.biases[out_layer][0] += target_mean;
    Ok((
        final_model,
        TrainHistory {
            epochs: history,
            train_indices,
            val_indices,
            warnings,
            best_epoch: best.0,
        },
    ))
}

/// Writes the model as versioned JSON.
pub fn save(w: &ModelWeights, path: impl AsRef<Path>) -> Result<()> {
    w.validate()?;
    let json = serde_json::to_string_pretty(w)?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Loads a model, validating version, shapes, finiteness and the
/// feature layout identifier.
pub fn load(path: impl AsRef<Path>) -> Result<ModelWeights> {
    let text = std::fs::read_to_string(path)?;
    let w: ModelWeights = serde_json::from_str(&text)?;
    w.validate()?;
    if w.feature_layout != FEATURE_LAYOUT_ID {
        return Err(Error::data(format!(
            "model was trained for feature layout '{}', this build uses '{}'",
            w.feature_layout, FEATURE_LAYOUT_ID
        )));
    }
    Ok(w)
}
