//! The three task networks: force estimator (`frc`), velocity generator
//! (`vel`) and stop classifier (`stp`).
//!
//! Every network is one LSTM layer, a learned initial state computed from the
//! first frame, and a fully connected head. Inputs are standardized with
//! statistics stored in the bundle; regression targets are standardized too,
//! and losses are computed in that standardized space.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{pad_sequence, PadMode, StaticContext, TrialRecord, STATIC_DIM};
use crate::error::{Error, Result};
use crate::linalg::{softmax_into, Matrix, Vector};
use crate::lstm::{
    backward_unchecked, init_state_backward, init_unchecked, step_unchecked, InitParams, LstmParams,
};
use crate::scalar::Real;

/// Probability floor inside the cross-entropy logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    Frc,
    Vel,
    Stp,
}

impl NetKind {
    pub const ALL: [NetKind; 3] = [NetKind::Frc, NetKind::Vel, NetKind::Stp];

    pub fn name(self) -> &'static str {
        match self {
            NetKind::Frc => "frc",
            NetKind::Vel => "vel",
            NetKind::Stp => "stp",
        }
    }

    /// `[θ, z]` for frc, `[θ, f, z]` otherwise.
    pub fn input_size(self) -> usize {
        match self {
            NetKind::Frc => 1 + STATIC_DIM,
            NetKind::Vel | NetKind::Stp => 2 + STATIC_DIM,
        }
    }

    pub fn output_size(self) -> usize {
        match self {
            NetKind::Stp => 2,
            NetKind::Frc | NetKind::Vel => 1,
        }
    }

    pub fn pad_mode(self) -> PadMode {
        match self {
            NetKind::Stp => PadMode::EndValue,
            NetKind::Frc | NetKind::Vel => PadMode::Zero,
        }
    }

    /// Fixed epoch budget used when nothing else is requested.
    pub fn default_epochs(self) -> usize {
        match self {
            NetKind::Vel => 4000,
            NetKind::Frc | NetKind::Stp => 2000,
        }
    }

    fn is_classifier(self) -> bool {
        self == NetKind::Stp
    }
}

impl fmt::Display for NetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for NetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frc" => Ok(NetKind::Frc),
            "vel" => Ok(NetKind::Vel),
            "stp" => Ok(NetKind::Stp),
            other => Err(Error::InvalidArgument(format!(
                "unknown network kind '{other}'"
            ))),
        }
    }
}

/// Builds one input frame for `kind`; `force` is ignored for frc.
pub fn input_frame<T: Real>(kind: NetKind, theta: T, force: T, z: &[T]) -> Vec<T> {
    let mut x = Vec::with_capacity(kind.input_size());
    x.push(theta);
    if kind != NetKind::Frc {
        x.push(force);
    }
    x.extend_from_slice(z);
    x
}

pub fn context_vector<T: Real>(z: &StaticContext) -> Vec<T> {
    z.to_array().iter().map(|&v| T::lit(v)).collect()
}

/// Per-feature affine standardization `(x - mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler<T> {
    pub mean: Vector<T>,
    pub std: Vector<T>,
}

impl<T: Real> Scaler<T> {
    pub fn identity(dim: usize) -> Self {
        Scaler {
            mean: Vector::zeros(dim),
            std: Vector(vec![T::one(); dim]),
        }
    }

    /// Fits mean and standard deviation; near-constant features get std 1.
    pub fn fit<'a, I>(dim: usize, samples: I) -> Self
    where
        I: IntoIterator<Item = &'a [T]>,
    {
        let mut n = 0usize;
        let mut sum = vec![0.0f64; dim];
        let mut sq = vec![0.0f64; dim];
        for s in samples {
            n += 1;
            for k in 0..dim {
                let v = s[k].as_f64();
                sum[k] += v;
                sq[k] += v * v;
            }
        }
        if n == 0 {
            return Self::identity(dim);
        }
        let mut mean = Vec::with_capacity(dim);
        let mut std = Vec::with_capacity(dim);
        for k in 0..dim {
            let m = sum[k] / n as f64;
            let var = (sq[k] / n as f64 - m * m).max(0.0);
            let sd = var.sqrt();
            mean.push(T::lit(m));
            std.push(T::lit(if sd > 1e-8 * m.abs().max(1.0) {
                sd
            } else {
                1.0
            }));
        }
        Scaler {
            mean: Vector(mean),
            std: Vector(std),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(self.mean.iter().zip(self.std.iter()))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, y: &[T]) -> Vec<T> {
        y.iter()
            .zip(self.mean.iter().zip(self.std.iter()))
            .map(|(&v, (&m, &s))| v * s + m)
            .collect()
    }
}

/// Trainable tensors of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams<T> {
    pub lstm: LstmParams<T>,
    pub init: InitParams<T>,
    pub head_w: Matrix<T>,
    pub head_b: Vector<T>,
}

impl<T: Real> NetworkParams<T> {
    pub fn zeros(kind: NetKind, hidden: usize) -> Self {
        NetworkParams {
            lstm: LstmParams::zeros(hidden, kind.input_size()),
            init: InitParams::zeros(hidden, kind.input_size()),
            head_w: Matrix::zeros(kind.output_size(), hidden),
            head_b: Vector::zeros(kind.output_size()),
        }
    }

    /// Every parameter uniform in `[-scale, scale]`, drawn in tensor order.
    pub fn uniform<R: Rng>(kind: NetKind, hidden: usize, scale: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(kind, hidden);
        for (_, t) in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = T::lit(rng.random_range(-scale..=scale));
            }
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(T::zero());
        }
        z
    }

    pub fn hidden_size(&self) -> usize {
        self.lstm.hidden_size
    }

    pub fn tensors(&self) -> Vec<(&'static str, &[T])> {
        let mut out: Vec<(&'static str, &[T])> = self.lstm.tensors().into_iter().collect();
        out.extend(self.init.tensors());
        out.push(("head.w", self.head_w.as_slice()));
        out.push(("head.b", &self.head_b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [T])> {
        let mut out: Vec<(&'static str, &mut [T])> = self.lstm.tensors_mut().into_iter().collect();
        out.extend(self.init.tensors_mut());
        out.push(("head.w", self.head_w.as_mut_slice()));
        out.push(("head.b", &mut self.head_b));
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn validate(&self, kind: NetKind) -> Result<()> {
        self.lstm.validate()?;
        let (h, i, o) = (self.lstm.hidden_size, kind.input_size(), kind.output_size());
        if self.lstm.input_size != i {
            return Err(Error::dim("lstm input size", i, self.lstm.input_size));
        }
        if self.init.w_init.shape() != (h, i) || self.init.b_init.len() != h {
            return Err(Error::dim("init head rows", h, self.init.w_init.rows()));
        }
        if self.head_w.shape() != (o, h) || self.head_b.len() != o {
            return Err(Error::dim("output head rows", o, self.head_w.rows()));
        }
        Ok(())
    }
}

/// What a training run recorded about itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub final_loss: f64,
    pub accuracy: Option<f64>,
    pub learning_rate: f64,
    pub seed: u64,
    pub t_max: usize,
    pub trials: usize,
}

/// A network ready for inference: parameters plus feature scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct NetworkBundle<T> {
    pub kind: NetKind,
    pub params: NetworkParams<T>,
    pub input_scaler: Scaler<T>,
    /// Standardization of regression targets; identity for stp.
    pub target_scaler: Scaler<T>,
    pub meta: Option<TrainingMeta>,
}

impl<T: Real> NetworkBundle<T> {
    /// All-zero parameters and identity scaling.
    pub fn zeros(kind: NetKind, hidden: usize) -> Self {
        NetworkBundle {
            kind,
            params: NetworkParams::zeros(kind, hidden),
            input_scaler: Scaler::identity(kind.input_size()),
            target_scaler: Scaler::identity(kind.output_size()),
            meta: None,
        }
    }

    pub fn random<R: Rng>(kind: NetKind, hidden: usize, scale: f64, rng: &mut R) -> Self {
        NetworkBundle {
            params: NetworkParams::uniform(kind, hidden, scale, rng),
            ..Self::zeros(kind, hidden)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate(self.kind)?;
        if self.input_scaler.dim() != self.kind.input_size()
            || self.input_scaler.std.len() != self.kind.input_size()
        {
            return Err(Error::dim(
                "input scaler",
                self.kind.input_size(),
                self.input_scaler.dim(),
            ));
        }
        if self.target_scaler.dim() != self.kind.output_size() {
            return Err(Error::dim(
                "target scaler",
                self.kind.output_size(),
                self.target_scaler.dim(),
            ));
        }
        if !self
            .input_scaler
            .std
            .iter()
            .chain(self.target_scaler.std.iter())
            .all(|&s| s > T::zero())
        {
            return Err(Error::InvalidArgument(
                "scaler std entries must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn expect_kind(&self, kind: NetKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::KindMismatch {
                expected: kind.name(),
                actual: self.kind.name(),
            });
        }
        Ok(())
    }

    /// Initializes the recurrent state from the first (raw) frame.
    pub fn start(&self, first_frame: &[T]) -> Result<Recurrent<'_, T>> {
        if first_frame.len() != self.kind.input_size() {
            return Err(Error::dim(
                "first frame",
                self.kind.input_size(),
                first_frame.len(),
            ));
        }
        let x = self.input_scaler.apply(first_frame);
        let (h, c) = init_unchecked(&self.params.init, &x);
        Ok(Recurrent { net: self, h, c })
    }

    /// Runs a whole sequence and returns one output per frame: the estimate
    /// in physical units for frc/vel, class probabilities for stp.
    pub fn forward_sequence(&self, frames: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        let first = frames.first().ok_or(Error::Empty("sequence"))?;
        let mut run = self.start(first)?;
        frames.iter().map(|x| run.step(x)).collect()
    }

    /// Loss of the bundle on `batch` through the plain inference path, in
    /// standardized target space.
    pub fn objective(&self, batch: &SequenceBatch<T>) -> Result<T> {
        batch.expect_kind(self.kind)?;
        let mut preds = Vec::with_capacity(batch.len());
        for i in 0..batch.len() {
            let eff = batch.effective_len(i);
            let mut run = self.start(&batch.inputs[i][0])?;
            let mut seq = Vec::with_capacity(eff);
            for x in &batch.inputs[i][..eff] {
                seq.push(run.step_model(x)?);
            }
            preds.push(seq);
        }
        if self.kind.is_classifier() {
            sequence_loss(self.kind, &preds, batch)
        } else {
            sequence_loss(
                self.kind,
                &preds,
                &batch.scaled_targets(&self.target_scaler),
            )
        }
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("bundle serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bundle: Self =
            serde_json::from_str(&text).map_err(|e| Error::malformed(path, e.to_string()))?;
        bundle
            .validate()
            .map_err(|e| Error::malformed(path, e.to_string()))?;
        Ok(bundle)
    }
}

/// Recurrent state threaded through a sequence.
#[derive(Debug, Clone)]
pub struct Recurrent<'a, T> {
    net: &'a NetworkBundle<T>,
    h: Vec<T>,
    c: Vec<T>,
}

impl<'a, T: Real> Recurrent<'a, T> {
    pub fn kind(&self) -> NetKind {
        self.net.kind
    }

    pub fn hidden(&self) -> (&[T], &[T]) {
        (&self.h, &self.c)
    }

    /// Advances one step and returns the raw head output (standardized
    /// space for regression, probabilities for stp).
    pub fn step_model(&mut self, frame: &[T]) -> Result<Vec<T>> {
        if frame.len() != self.net.kind.input_size() {
            return Err(Error::dim(
                "input frame",
                self.net.kind.input_size(),
                frame.len(),
            ));
        }
        let x = self.net.input_scaler.apply(frame);
        let cache = step_unchecked(&self.net.params.lstm, &x, &self.h, &self.c);
        self.h = cache.h();
        self.c = cache.c;
        let p = &self.net.params;
        let mut y = p.head_b.0.clone();
        p.head_w.matvec_acc(&self.h, &mut y);
        if self.net.kind.is_classifier() {
            let mut probs = vec![T::zero(); y.len()];
            softmax_into(&y, &mut probs);
            Ok(probs)
        } else {
            Ok(y)
        }
    }

    /// Advances one step and returns the output in physical units.
    pub fn step(&mut self, frame: &[T]) -> Result<Vec<T>> {
        let y = self.step_model(frame)?;
        if self.net.kind.is_classifier() {
            Ok(y)
        } else {
            Ok(self.net.target_scaler.invert(&y))
        }
    }
}

/// One vel step: predicted rotation velocity (degrees per sample).
pub fn forward_vel<T: Real>(run: &mut Recurrent<'_, T>, theta: T, force: T, z: &[T]) -> Result<T> {
    check_run_kind(run, NetKind::Vel)?;
    Ok(run.step(&input_frame(NetKind::Vel, theta, force, z))?[0])
}

/// One stp step: `[p(continue), p(stop)]`.
pub fn forward_stp<T: Real>(
    run: &mut Recurrent<'_, T>,
    theta: T,
    force: T,
    z: &[T],
) -> Result<[T; 2]> {
    check_run_kind(run, NetKind::Stp)?;
    let p = run.step(&input_frame(NetKind::Stp, theta, force, z))?;
    Ok([p[0], p[1]])
}

/// One frc step: estimated sensed force (lbf).
pub fn forward_frc<T: Real>(run: &mut Recurrent<'_, T>, theta: T, z: &[T]) -> Result<T> {
    check_run_kind(run, NetKind::Frc)?;
    Ok(run.step(&input_frame(NetKind::Frc, theta, T::zero(), z))?[0])
}

fn check_run_kind<T: Real>(run: &Recurrent<'_, T>, kind: NetKind) -> Result<()> {
    run.net.expect_kind(kind)
}

/// Padded sequences and targets for one network kind.
///
/// `targets[i][t]` holds ω_t (vel), f_t (frc) or the class index 0/1 (stp).
/// `masks[i][t]` marks steps that carry a real target.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch<T> {
    pub kind: NetKind,
    pub inputs: Vec<Vec<Vec<T>>>,
    pub targets: Vec<Vec<T>>,
    pub masks: Vec<Vec<bool>>,
    pub lengths: Vec<usize>,
    pub t_max: usize,
}

/// `ω_t = θ_{t+1} − θ_t`.
pub fn velocity_targets(theta: &[f64]) -> Result<Vec<f64>> {
    if theta.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "velocity needs at least 2 angles, got {}",
            theta.len()
        )));
    }
    Ok(theta.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Stop labels: 1 on the final frame and after, 0 before.
pub fn stop_labels(length: usize, t_max: usize) -> Vec<usize> {
    (0..t_max).map(|t| usize::from(t + 1 >= length)).collect()
}

impl<T: Real> SequenceBatch<T> {
    /// Pads `trials` to `t_max` with the rule that belongs to `kind`.
    pub fn from_trials(kind: NetKind, trials: &[TrialRecord], t_max: usize) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let mut batch = SequenceBatch {
            kind,
            inputs: Vec::with_capacity(trials.len()),
            targets: Vec::with_capacity(trials.len()),
            masks: Vec::with_capacity(trials.len()),
            lengths: Vec::with_capacity(trials.len()),
            t_max,
        };
        for trial in trials {
            trial.validate()?;
            let n = trial.len();
            if n > t_max {
                return Err(Error::InvalidArgument(format!(
                    "trial {} has {n} frames, longer than T_max {t_max}",
                    trial.id
                )));
            }
            let z: Vec<T> = context_vector(&trial.context);
            let frames: Vec<Vec<T>> = (0..n)
                .map(|t| input_frame(kind, T::lit(trial.theta[t]), T::lit(trial.force[t]), &z))
                .collect();
            let zero_frame = vec![T::zero(); kind.input_size()];
            let (inputs, _) = pad_sequence(&frames, t_max, kind.pad_mode(), zero_frame);
            let (targets, valid) = match kind {
                NetKind::Vel => {
                    let omega: Vec<T> = velocity_targets(&trial.theta)?
                        .into_iter()
                        .map(T::lit)
                        .collect();
                    (omega, n - 1)
                }
                NetKind::Frc => (trial.force.iter().map(|&f| T::lit(f)).collect(), n),
                NetKind::Stp => (
                    stop_labels(n, n)
                        .into_iter()
                        .map(|c| T::lit(c as f64))
                        .collect(),
                    n,
                ),
            };
            let (targets, _) = pad_sequence(&targets, t_max, kind.pad_mode(), T::zero());
            let mask = (0..t_max).map(|t| t < valid).collect();
            batch.inputs.push(inputs);
            batch.targets.push(targets);
            batch.masks.push(mask);
            batch.lengths.push(n);
        }
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn expect_kind(&self, kind: NetKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::KindMismatch {
                expected: kind.name(),
                actual: self.kind.name(),
            });
        }
        Ok(())
    }

    /// Steps that enter the loss: `T_i − 1` for vel, `T_i` for frc, the
    /// whole padded length for stp.
    pub fn effective_len(&self, i: usize) -> usize {
        match self.kind {
            NetKind::Vel => self.lengths[i] - 1,
            NetKind::Frc => self.lengths[i],
            NetKind::Stp => self.t_max,
        }
    }

    /// Valid (unpadded) input frames of every trial.
    pub fn valid_frames(&self) -> impl Iterator<Item = &[T]> {
        self.inputs
            .iter()
            .zip(&self.lengths)
            .flat_map(|(seq, &n)| seq[..n].iter().map(Vec::as_slice))
    }

    pub fn valid_targets(&self) -> impl Iterator<Item = T> + '_ {
        self.targets
            .iter()
            .zip(&self.masks)
            .flat_map(|(ts, ms)| ts.iter().zip(ms).filter(|(_, &m)| m).map(|(&t, _)| t))
    }

    /// Copy with regression targets standardized; labels pass through.
    pub fn scaled_targets(&self, scaler: &Scaler<T>) -> Self {
        if self.kind.is_classifier() {
            return self.clone();
        }
        let mut out = self.clone();
        let (m, s) = (scaler.mean[0], scaler.std[0]);
        for (ts, ms) in out.targets.iter_mut().zip(&self.masks) {
            for (t, &valid) in ts.iter_mut().zip(ms) {
                if valid {
                    *t = (*t - m) / s;
                }
            }
        }
        out
    }
}

/// The loss of `kind` for per-step `predictions` (`[trial][step][output]`).
///
/// vel/frc: mean over trials of the mean squared error over valid steps.
/// stp: cross-entropy summed over every trial and every padded step, with
/// probabilities floored at [`PROB_FLOOR`].
pub fn sequence_loss<T: Real>(
    kind: NetKind,
    predictions: &[Vec<Vec<T>>],
    batch: &SequenceBatch<T>,
) -> Result<T> {
    batch.expect_kind(kind)?;
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if predictions.len() != batch.len() {
        return Err(Error::dim(
            "predictions per batch",
            batch.len(),
            predictions.len(),
        ));
    }
    let floor = T::lit(PROB_FLOOR);
    let mut total = T::zero();
    for (i, pred) in predictions.iter().enumerate() {
        let eff = batch.effective_len(i);
        if pred.len() < eff {
            return Err(Error::dim("prediction steps", eff, pred.len()));
        }
        match kind {
            NetKind::Vel | NetKind::Frc => {
                let mut sum = T::zero();
                let mut count = 0usize;
                for t in 0..eff {
                    if batch.masks[i][t] {
                        let r = batch.targets[i][t] - pred[t][0];
                        sum += r * r;
                        count += 1;
                    }
                }
                if count > 0 {
                    total += sum / T::lit(count as f64);
                }
            }
            NetKind::Stp => {
                for t in 0..eff {
                    let label = class_of(batch.targets[i][t]);
                    let p = &pred[t];
                    if p.len() != 2 {
                        return Err(Error::dim("stp prediction width", 2, p.len()));
                    }
                    total -= p[label].max(floor).ln();
                }
            }
        }
    }
    if kind.is_classifier() {
        Ok(total)
    } else {
        Ok(total / T::lit(batch.len() as f64))
    }
}

#[inline]
fn class_of<T: Real>(v: T) -> usize {
    usize::from(v > T::lit(0.5))
}

/// Index of the largest entry; ties go to the lower index.
pub fn argmax<T: Real>(p: &[T]) -> usize {
    let mut best = 0;
    for k in 1..p.len() {
        if p[k] > p[best] {
            best = k;
        }
    }
    best
}

/// Fraction of stp steps whose argmax matches the label, micro-averaged over
/// every step the loss covers.
pub fn step_accuracy<T: Real>(
    predictions: &[Vec<Vec<T>>],
    batch: &SequenceBatch<T>,
) -> Result<f64> {
    batch.expect_kind(NetKind::Stp)?;
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut hits = 0usize;
    let mut total = 0usize;
    for (i, pred) in predictions.iter().enumerate() {
        let eff = batch.effective_len(i);
        if pred.len() < eff {
            return Err(Error::dim("prediction steps", eff, pred.len()));
        }
        for t in 0..eff {
            total += 1;
            if argmax(&pred[t]) == class_of(batch.targets[i][t]) {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / total as f64)
}

/// Result of one pass over a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchEval<T> {
    pub loss: T,
    /// stp only: correctly classified steps and steps counted.
    pub correct: usize,
    pub counted: usize,
}

impl<T: Real> BatchEval<T> {
    pub fn accuracy(&self) -> Option<f64> {
        (self.counted > 0).then(|| self.correct as f64 / self.counted as f64)
    }
}

/// Loss in standardized space and, when `grads` is given, its exact gradient
/// (accumulated into `grads`) by backpropagation through time.
pub fn loss_and_grad<T: Real>(
    net: &NetworkBundle<T>,
    batch: &SequenceBatch<T>,
    mut grads: Option<&mut NetworkParams<T>>,
) -> Result<BatchEval<T>> {
    batch.expect_kind(net.kind)?;
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let p = &net.params;
    let kind = net.kind;
    let hidden = p.hidden_size();
    let n_trials = T::lit(batch.len() as f64);
    let (t_mean, t_std) = (net.target_scaler.mean[0], net.target_scaler.std[0]);
    let floor = T::lit(PROB_FLOOR);
    let two = T::lit(2.0);

    let mut eval = BatchEval {
        loss: T::zero(),
        correct: 0,
        counted: 0,
    };
    let mut caches = Vec::with_capacity(batch.t_max);
    let mut hs: Vec<Vec<T>> = Vec::with_capacity(batch.t_max);
    let mut dys: Vec<Vec<T>> = Vec::with_capacity(batch.t_max);
    let mut y = vec![T::zero(); kind.output_size()];
    let mut probs = vec![T::zero(); kind.output_size()];

    for i in 0..batch.len() {
        let eff = batch.effective_len(i);
        let valid = batch.masks[i][..eff].iter().filter(|&&m| m).count();
        if eff == 0 || (!kind.is_classifier() && valid == 0) {
            continue;
        }
        let weight = T::one() / (n_trials * T::lit(valid.max(1) as f64));
        caches.clear();
        hs.clear();
        dys.clear();

        let x0 = net.input_scaler.apply(&batch.inputs[i][0]);
        let (h0, c0) = init_unchecked(&p.init, &x0);
        let (mut h, mut c) = (h0.clone(), c0);
        for t in 0..eff {
            let x = net.input_scaler.apply(&batch.inputs[i][t]);
            let cache = step_unchecked(&p.lstm, &x, &h, &c);
            h = cache.h();
            c = cache.c.clone();
            y.copy_from_slice(&p.head_b);
            p.head_w.matvec_acc(&h, &mut y);
            let mut dy = vec![T::zero(); y.len()];
            if kind.is_classifier() {
                softmax_into(&y, &mut probs);
                let label = class_of(batch.targets[i][t]);
                eval.loss -= probs[label].max(floor).ln();
                eval.counted += 1;
                if argmax(&probs) == label {
                    eval.correct += 1;
                }
                for k in 0..2 {
                    dy[k] = probs[k] - if k == label { T::one() } else { T::zero() };
                }
            } else if batch.masks[i][t] {
                let target = (batch.targets[i][t] - t_mean) / t_std;
                let r = y[0] - target;
                eval.loss += weight * r * r;
                dy[0] = two * weight * r;
            }
            caches.push(cache);
            hs.push(h.clone());
            dys.push(dy);
        }

        let Some(g) = grads.as_deref_mut() else {
            continue;
        };
        let mut dh_next = vec![T::zero(); hidden];
        let mut dc_next = vec![T::zero(); hidden];
        for t in (0..eff).rev() {
            let dy = &dys[t];
            g.head_w.outer_acc(dy, &hs[t]);
            for (b, &d) in g.head_b.iter_mut().zip(dy) {
                *b += d;
            }
            p.head_w.matvec_t_acc(dy, &mut dh_next);
            let back = backward_unchecked(&p.lstm, &caches[t], &dh_next, &dc_next, &mut g.lstm);
            dh_next = back.dh_prev;
            dc_next = back.dc_prev;
        }
        init_state_backward(&p.init, &x0, &h0, &dh_next, &dc_next, &mut g.init);
    }
    if !eval.loss.is_finite() {
        return Err(Error::NonFinite("batch loss".into()));
    }
    Ok(eval)
}

/// Micro-averaged stp accuracy through the inference path.
pub fn classifier_accuracy<T: Real>(
    net: &NetworkBundle<T>,
    batch: &SequenceBatch<T>,
) -> Result<f64> {
    net.expect_kind(NetKind::Stp)?;
    batch.expect_kind(NetKind::Stp)?;
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut preds = Vec::with_capacity(batch.len());
    for i in 0..batch.len() {
        let eff = batch.effective_len(i);
        preds.push(net.forward_sequence(&batch.inputs[i][..eff])?);
    }
    step_accuracy(&preds, batch)
}
