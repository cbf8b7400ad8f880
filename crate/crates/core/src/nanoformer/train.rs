//! The training loop: epoch shuffles, batching, gradient clipping, optimizer
//! steps, and checkpoint hooks.
//!
//! The shuffle for epoch e is derived from (shuffle seed, e) alone, and a
//! global step maps to (epoch, batch index) arithmetically, so resuming from
//! a checkpoint replays the exact batch sequence without any serialized RNG
//! state.

use super::forward::{loss_and_grads, Batch, LossPositions};
use super::optim::{lr_at_step, AdamW};
use super::Model;
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::rng::{child_seed_indexed, rng_from};
use crate::tok::Encoded;
use ndarray::Array1;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub warmup_steps: usize,
    pub min_lr_frac: f64,
    pub grad_clip: Option<f64>,
    pub loss_positions: LossPositions,
    /// Steps after which a checkpoint hook fires; 0 means the initial state.
    pub checkpoint_schedule: Vec<usize>,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 1000,
            batch_size: 64,
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.95,
            adam_eps: 1e-8,
            weight_decay: 0.01,
            warmup_steps: 100,
            min_lr_frac: 0.1,
            grad_clip: Some(1.0),
            loss_positions: LossPositions::All,
            checkpoint_schedule: Vec::new(),
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch_size == 0 {
            return Err(Error::Config("steps and batch_size must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("bad learning rate {}", self.lr)));
        }
        for pair in self.checkpoint_schedule.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::Config(format!(
                    "checkpoint schedule must be strictly increasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if let Some(&last) = self.checkpoint_schedule.last() {
            if last > self.steps {
                return Err(Error::Config(format!(
                    "checkpoint step {last} is beyond the run's {} steps",
                    self.steps
                )));
            }
        }
        Ok(())
    }
}

/// Dense early checkpoints, then log-spaced to the final step.
pub fn default_checkpoint_schedule(total_steps: usize) -> Vec<usize> {
    let early_every = 282;
    let dense_until = 1128;
    let mut set = std::collections::BTreeSet::new();
    let mut t = early_every;
    while t <= total_steps.min(dense_until) {
        set.insert(t);
        t += early_every;
    }
    if total_steps > dense_until {
        let a = (dense_until as f64).ln();
        let b = (total_steps as f64).ln();
        for i in 1..=8 {
            let v = (a + (b - a) * i as f64 / 8.0).exp().round() as usize;
            set.insert(v.min(total_steps));
        }
    }
    set.insert(total_steps);
    set.into_iter().collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainStats {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

pub struct Trainer<F: Scalar> {
    pub model: Model<F>,
    pub opt: AdamW<F>,
    pub config: TrainConfig,
    pub data: Vec<Encoded>,
    pub steps_done: usize,
    pub history: Vec<TrainStats>,
    cached_perm: Option<(usize, Vec<usize>)>,
}

impl<F: Scalar> Trainer<F> {
    pub fn new(model: Model<F>, data: Vec<Encoded>, config: TrainConfig) -> Result<Trainer<F>> {
        config.validate()?;
        if data.is_empty() {
            return Err(Error::Input("training set is empty".into()));
        }
        for e in &data {
            if e.ids.len() > model.config.max_seq_len {
                return Err(Error::Input(format!(
                    "a {}-token example exceeds max_seq_len {}",
                    e.ids.len(),
                    model.config.max_seq_len
                )));
            }
        }
        let opt = AdamW::new(
            &model.layout,
            config.beta1,
            config.beta2,
            config.adam_eps,
            config.weight_decay,
        );
        Ok(Trainer { model, opt, config, data, steps_done: 0, history: Vec::new(), cached_perm: None })
    }

    /// Rebuild a trainer mid-run from checkpointed state.
    pub fn resume(
        model: Model<F>,
        opt: AdamW<F>,
        steps_done: usize,
        data: Vec<Encoded>,
        config: TrainConfig,
    ) -> Result<Trainer<F>> {
        let mut trainer = Trainer::new(model, data, config)?;
        trainer.opt = opt;
        trainer.steps_done = steps_done;
        Ok(trainer)
    }

    pub fn n_batches_per_epoch(&self) -> usize {
        self.data.len().div_ceil(self.config.batch_size)
    }

    fn perm_for_epoch(&mut self, epoch: usize) -> &[usize] {
        let needs = self
            .cached_perm
            .as_ref()
            .map(|(e, _)| *e != epoch)
            .unwrap_or(true);
        if needs {
            let mut perm: Vec<usize> = (0..self.data.len()).collect();
            let seed = child_seed_indexed(self.config.shuffle_seed, "epoch-shuffle", epoch as u64);
            perm.shuffle(&mut rng_from(seed));
            self.cached_perm = Some((epoch, perm));
        }
        &self.cached_perm.as_ref().unwrap().1
    }

    pub fn batch_for_step(&mut self, step: usize) -> Result<Batch> {
        let n_batches = self.n_batches_per_epoch();
        let epoch = step / n_batches;
        let idx = step % n_batches;
        let bs = self.config.batch_size;
        let n = self.data.len();
        let perm = self.perm_for_epoch(epoch);
        let slice = &perm[idx * bs..((idx + 1) * bs).min(n)];
        // Collect references without holding the cache borrow.
        let indices: Vec<usize> = slice.to_vec();
        let refs: Vec<&Encoded> = indices.iter().map(|&i| &self.data[i]).collect();
        Batch::new(&refs)
    }

    pub fn step_once(&mut self) -> Result<TrainStats> {
        let step = self.steps_done;
        let batch = self.batch_for_step(step)?;
        let lr = lr_at_step(
            step,
            self.config.steps,
            self.config.lr,
            self.config.warmup_steps,
            self.config.min_lr_frac,
        );
        let (loss, mut grads) =
            loss_and_grads(&self.model, &batch, self.config.loss_positions).map_err(|e| {
                match e {
                    Error::Run(msg) => Error::Run(format!("training step {step}: {msg}")),
                    other => other,
                }
            })?;
        if let Some(clip) = self.config.grad_clip {
            clip_global_norm(&mut grads, clip);
        }
        self.opt.update(&mut self.model.params, &grads, lr);
        self.steps_done += 1;
        let stats = TrainStats { step: self.steps_done, loss, lr };
        self.history.push(stats.clone());
        Ok(stats)
    }

    /// Run to the configured step count, firing `hook` after every scheduled
    /// step (and before training if the schedule starts at 0).
    pub fn run<H>(&mut self, mut hook: H) -> Result<()>
    where
        H: FnMut(&Trainer<F>, usize) -> Result<()>,
    {
        if self.steps_done == 0 && self.config.checkpoint_schedule.first() == Some(&0) {
            hook(self, 0)?;
        }
        while self.steps_done < self.config.steps {
            self.step_once()?;
            let s = self.steps_done;
            if self.config.checkpoint_schedule.binary_search(&s).is_ok() {
                hook(self, s)?;
            }
        }
        Ok(())
    }
}

pub(super) fn clip_global_norm<F: Scalar>(grads: &mut Array1<F>, clip: f64) {
    let norm = grads.iter().map(|&g| g.to_f64() * g.to_f64()).sum::<f64>().sqrt();
    if norm > clip {
        let scale = crate::num::fl::<F>(clip / norm);
        grads.mapv_inplace(|g| g * scale);
    }
}

/// Convenience wrapper: init, train with hooks, return the trainer.
pub fn train<F: Scalar, H>(
    model: Model<F>,
    data: Vec<Encoded>,
    config: TrainConfig,
    hook: H,
) -> Result<Trainer<F>>
where
    H: FnMut(&Trainer<F>, usize) -> Result<()>,
{
    let mut trainer = Trainer::new(model, data, config)?;
    trainer.run(hook)?;
    Ok(trainer)
}
