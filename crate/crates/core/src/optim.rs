//! Adam with bias correction, global-norm clipping, and the full-batch BPTT
//! training loop.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::TrialRecord;
use crate::error::{Error, Result};
use crate::network::{
    loss_and_grad, NetKind, NetworkBundle, NetworkParams, Scaler, SequenceBatch, TrainingMeta,
};
use crate::scalar::Real;

/// Named flat tensors an optimizer can update.
pub trait Parameters<T> {
    fn tensors(&self) -> Vec<(&'static str, &[T])>;
    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [T])>;
}

impl<T: Real> Parameters<T> for NetworkParams<T> {
    fn tensors(&self) -> Vec<(&'static str, &[T])> {
        NetworkParams::tensors(self)
    }
    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [T])> {
        NetworkParams::tensors_mut(self)
    }
}

impl<T: Real> Parameters<T> for Vec<T> {
    fn tensors(&self) -> Vec<(&'static str, &[T])> {
        vec![("param", self.as_slice())]
    }
    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [T])> {
        vec![("param", self.as_mut_slice())]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment buffers mirroring a parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new<P: Parameters<T>>(config: AdamConfig, params: &P) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|(_, t)| t.len()).collect();
        AdamState {
            config,
            m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            step: 0,
        }
    }

    /// One update. A non-finite gradient rejects the whole step and leaves
    /// both parameters and moments untouched.
    pub fn step<P: Parameters<T>>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let gs = grads.tensors();
        if gs.len() != self.m.len() {
            return Err(Error::dim("adam tensor count", self.m.len(), gs.len()));
        }
        for (k, (name, g)) in gs.iter().enumerate() {
            if g.len() != self.m[k].len() {
                return Err(Error::dim("adam tensor length", self.m[k].len(), g.len()));
            }
            if let Some(pos) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {name}[{pos}]")));
            }
        }

        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let one = T::one();
        let step = i32::try_from(self.step).unwrap_or(i32::MAX);
        let bias1 = one - b1.powi(step);
        let bias2 = one - b2.powi(step);
        let lr = T::lit(c.learning_rate);
        let eps = T::lit(c.epsilon);

        for (k, ((_, p), (_, g))) in params.tensors_mut().into_iter().zip(gs).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for j in 0..p.len() {
                let gj = g[j];
                m[j] = b1 * m[j] + (one - b1) * gj;
                v[j] = b2 * v[j] + (one - b2) * gj * gj;
                let m_hat = m[j] / bias1;
                let v_hat = v[j] / bias2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Rescales `grads` so their joint L2 norm is at most `max_norm`. Returns
/// the norm before clipping.
pub fn clip_global_norm<T: Real, P: Parameters<T>>(grads: &mut P, max_norm: T) -> T {
    let norm = grads
        .tensors()
        .iter()
        .flat_map(|(_, t)| t.iter())
        .map(|&g| g * g)
        .sum::<T>()
        .sqrt();
    if norm > max_norm && norm > T::zero() {
        let scale = max_norm / norm;
        for (_, t) in grads.tensors_mut() {
            for g in t.iter_mut() {
                *g *= scale;
            }
        }
    }
    norm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub hidden_size: usize,
    pub adam: AdamConfig,
    /// Half-width of the uniform weight initialization.
    pub init_scale: f64,
    pub clip_norm: Option<f64>,
    pub seed: u64,
    /// Emit a log line every this many epochs; 0 disables.
    pub log_every: usize,
}

impl TrainConfig {
    /// Learning rate 0.01, 16 hidden units and the kind's fixed epoch budget.
    pub fn for_kind(kind: NetKind) -> Self {
        TrainConfig {
            epochs: kind.default_epochs(),
            hidden_size: 16,
            adam: AdamConfig::default(),
            init_scale: 0.08,
            clip_norm: Some(5.0),
            seed: 0,
            log_every: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.adam.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(
                "learning rate must be positive".into(),
            ));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be positive".into()));
        }
        if self.hidden_size == 0 {
            return Err(Error::InvalidArgument(
                "hidden size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Loss before this epoch's update, in standardized target space.
    pub loss: f64,
    pub accuracy: Option<f64>,
    pub grad_norm: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub bundle: NetworkBundle<T>,
    pub history: Vec<EpochRecord>,
    /// Loss (and stp accuracy) after the last update.
    pub final_loss: f64,
    pub final_accuracy: Option<f64>,
}

/// Standardization fitted on the batch, then a copy of the batch already in
/// standardized space so the inner loop skips rescaling.
fn prepare<T: Real>(batch: &SequenceBatch<T>) -> (Scaler<T>, Scaler<T>, SequenceBatch<T>) {
    let kind = batch.kind;
    let input = Scaler::fit(kind.input_size(), batch.valid_frames());
    let target = if kind == NetKind::Stp {
        Scaler::identity(kind.output_size())
    } else {
        let ts: Vec<T> = batch.valid_targets().collect();
        Scaler::fit(1, ts.chunks(1))
    };
    let mut scaled = batch.scaled_targets(&target);
    for seq in &mut scaled.inputs {
        for x in seq.iter_mut() {
            *x = input.apply(x);
        }
    }
    (input, target, scaled)
}

/// Trains a fresh network on `batch` with full-batch BPTT.
pub fn train_on_batch<T: Real>(
    batch: &SequenceBatch<T>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if batch.is_empty() {
        return Err(Error::Empty("training data"));
    }
    let kind = batch.kind;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut work = NetworkBundle::<T>::random(kind, cfg.hidden_size, cfg.init_scale, &mut rng);
    let (input_scaler, target_scaler, scaled) = prepare(batch);

    let mut adam = AdamState::new(cfg.adam, &work.params);
    let mut grads = work.params.zeros_like();
    let mut history = Vec::with_capacity(cfg.epochs);
    let start = Instant::now();
    for epoch in 1..=cfg.epochs {
        for (_, g) in grads.tensors_mut() {
            g.fill(T::zero());
        }
        let eval =
            loss_and_grad(&work, &scaled, Some(&mut grads)).map_err(|_| Error::Diverged {
                epoch,
                loss: f64::NAN,
            })?;
        let loss = eval.loss.as_f64();
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        let grad_norm = match cfg.clip_norm {
            Some(max) => clip_global_norm(&mut grads, T::lit(max)),
            None => clip_global_norm(&mut grads, T::infinity()),
        };
        let record = EpochRecord {
            epoch,
            loss,
            accuracy: eval.accuracy(),
            grad_norm: grad_norm.as_f64(),
            elapsed_s: start.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        history.push(record);
        adam.step(&mut work.params, &grads)
            .map_err(|_| Error::Diverged { epoch, loss })?;
    }

    let last = loss_and_grad(&work, &scaled, None)?;
    let final_loss = last.loss.as_f64();
    if !final_loss.is_finite() {
        return Err(Error::Diverged {
            epoch: cfg.epochs,
            loss: final_loss,
        });
    }
    let final_accuracy = last.accuracy();
    let bundle = NetworkBundle {
        kind,
        params: work.params,
        input_scaler,
        target_scaler,
        meta: Some(TrainingMeta {
            epochs: cfg.epochs,
            final_loss,
            accuracy: final_accuracy,
            learning_rate: cfg.adam.learning_rate,
            seed: cfg.seed,
            t_max: batch.t_max,
            trials: batch.len(),
        }),
    };
    Ok(TrainOutcome {
        bundle,
        history,
        final_loss,
        final_accuracy,
    })
}

/// Pads `trials` by the kind's rule to their longest length and trains.
pub fn train<T: Real>(
    kind: NetKind,
    trials: &[TrialRecord],
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<T>> {
    let t_max = trials
        .iter()
        .map(TrialRecord::len)
        .max()
        .ok_or(Error::Empty("training data"))?;
    let batch = SequenceBatch::from_trials(kind, trials, t_max)?;
    train_on_batch(&batch, cfg, on_epoch)
}

/// Writes `epoch,loss,accuracy` rows, plus wall time when `with_timing`.
/// Without timing the file depends only on the inputs and seed.
pub fn write_training_log(path: &Path, history: &[EpochRecord], with_timing: bool) -> Result<()> {
    let mut out = String::new();
    out.push_str(if with_timing {
        "epoch,loss,accuracy,elapsed_s\n"
    } else {
        "epoch,loss,accuracy\n"
    });
    for r in history {
        let acc = r.accuracy.map(|a| a.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}", r.epoch, r.loss, acc));
        if with_timing {
            out.push_str(&format!(",{:.3}", r.elapsed_s));
        }
        out.push('\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Mean loss over consecutive windows of `window` epochs.
pub fn windowed_means(history: &[EpochRecord], window: usize) -> Vec<f64> {
    history
        .chunks(window)
        .filter(|c| c.len() == window)
        .map(|c| c.iter().map(|r| r.loss).sum::<f64>() / window as f64)
        .collect()
}
