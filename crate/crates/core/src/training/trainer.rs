//! The training loop: interleaved episodes, schedules, and logging hooks.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::TrainingSequence;
use super::episodes::{build_random_episode, ActualEpisode, LossOptions, RandomEpisodeConfig};
use super::loss::FocalWeights;
use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::nn::{sgd_step, Adam, Gradients};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Truncated-BPTT window in frames.
    pub window: usize,
    /// Largest span of a random episode in frames.
    pub max_gap: u32,
    /// Cap on the number of tracks in a random episode.
    pub n_max: usize,
    pub k_hard: usize,
    /// First epoch (0-based) that trains on mined hard examples only.
    pub hard_mining_start_epoch: usize,
    pub beta_pos: f64,
    pub beta_neg: f64,
    pub optimizer: Optimizer,
    pub lr: f64,
    pub lr_decay: f64,
    /// Epochs (0-based) at which the learning rate is multiplied by `lr_decay`.
    pub lr_milestones: Vec<usize>,
    pub epochs: usize,
    pub iterations_per_epoch: usize,
    /// Appearance drop rates, one per phase of the dropout schedule.
    pub dropout_rates: Vec<f64>,
    /// Phase boundaries as fractions of the total iteration count.
    pub dropout_boundaries: Vec<f64>,
    pub augment_missing: bool,
    pub random_episode_retries: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            window: 10,
            max_gap: 40,
            n_max: 8,
            k_hard: 30,
            hard_mining_start_epoch: 2,
            beta_pos: 4.0,
            beta_neg: 1.0,
            optimizer: Optimizer::Sgd,
            lr: 0.005,
            lr_decay: 0.1,
            lr_milestones: vec![4, 8],
            epochs: 12,
            iterations_per_epoch: 30_000,
            dropout_rates: vec![0.9, 0.6, 0.3, 0.0],
            dropout_boundaries: vec![19.0 / 120.0, 29.0 / 120.0, 38.0 / 120.0],
            augment_missing: true,
            random_episode_retries: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("train.window", self.window),
            ("train.max_gap", self.max_gap as usize),
            ("train.n_max", self.n_max),
            ("train.k_hard", self.k_hard),
            ("train.epochs", self.epochs),
            ("train.iterations_per_epoch", self.iterations_per_epoch),
            ("train.random_episode_retries", self.random_episode_retries),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        for (key, v) in [("train.beta_pos", self.beta_pos), ("train.beta_neg", self.beta_neg), ("train.lr", self.lr)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, "must be positive"));
            }
        }
        if !(self.lr_decay.is_finite() && self.lr_decay > 0.0) {
            return Err(Error::config("train.lr_decay", "must be positive"));
        }
        if self.dropout_rates.len() != self.dropout_boundaries.len() + 1 {
            return Err(Error::config(
                "train.dropout_rates",
                "needs exactly one more entry than dropout_boundaries",
            ));
        }
        if self.dropout_rates.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(Error::config("train.dropout_rates", "each rate must be in [0, 1)"));
        }
        if self.dropout_boundaries.windows(2).any(|w| w[0] > w[1])
            || self.dropout_boundaries.iter().any(|b| !(0.0..=1.0).contains(b))
        {
            return Err(Error::config(
                "train.dropout_boundaries",
                "must be non-decreasing fractions in [0, 1]",
            ));
        }
        Ok(())
    }

    pub fn focal(&self) -> FocalWeights {
        FocalWeights {
            beta_pos: self.beta_pos,
            beta_neg: self.beta_neg,
        }
    }

    pub fn total_iterations(&self) -> usize {
        self.epochs * self.iterations_per_epoch
    }

    pub fn epoch_of(&self, iter: usize) -> usize {
        iter / self.iterations_per_epoch
    }

    pub fn lr_at(&self, iter: usize) -> f64 {
        let epoch = self.epoch_of(iter);
        let decays = self.lr_milestones.iter().filter(|&&m| epoch >= m).count();
        self.lr * libm::pow(self.lr_decay, decays as f64)
    }

    /// First iteration of each dropout phase after the first.
    pub fn dropout_phase_starts(&self) -> Vec<usize> {
        let total = self.total_iterations() as f64;
        self.dropout_boundaries
            .iter()
            .map(|b| libm::round(b * total) as usize)
            .collect()
    }

    pub fn dropout_at(&self, iter: usize) -> f64 {
        let phase = self.dropout_phase_starts().iter().filter(|&&s| iter >= s).count();
        self.dropout_rates[phase]
    }

    pub fn hard_mining_at(&self, iter: usize) -> bool {
        self.epoch_of(iter) >= self.hard_mining_start_epoch
    }

    pub fn random_episode_config(&self) -> RandomEpisodeConfig {
        RandomEpisodeConfig {
            max_gap: self.max_gap,
            n_max: self.n_max,
            augment_missing: self.augment_missing,
            max_retries: self.random_episode_retries,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Actual,
    Random,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Actual => "actual",
            Phase::Random => "random",
        }
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub iter: usize,
    pub phase: Phase,
    pub loss: f64,
    pub lr: f64,
    pub dropout: f64,
}

impl core::fmt::Display for LogRow {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{},{},{},{},{}", self.iter, self.phase.as_str(), self.loss, self.lr, self.dropout)
    }
}

/// Receives progress from [`train`].
pub trait TrainObserver {
    fn iteration(&mut self, _row: &LogRow) -> Result<()> {
        Ok(())
    }

    fn epoch_end(&mut self, _epoch: usize, _model: &Classifier) -> Result<()> {
        Ok(())
    }
}

/// Collects every log row in memory.
#[derive(Debug, Clone, Default)]
pub struct LogCollector {
    pub rows: Vec<LogRow>,
}

impl TrainObserver for LogCollector {
    fn iteration(&mut self, row: &LogRow) -> Result<()> {
        self.rows.push(*row);
        Ok(())
    }
}

enum Opt {
    Sgd,
    Adam(Adam),
}

/// Cycles through the sequences in a shuffled order, one actual episode at a time.
struct ActualCursor {
    order: Vec<usize>,
    next: usize,
    current: Option<(usize, ActualEpisode)>,
}

impl ActualCursor {
    fn segment(
        &mut self,
        seqs: &[TrainingSequence],
        model: &Classifier,
        cfg: &TrainConfig,
        opts: &LossOptions,
        rng: &mut ChaCha8Rng,
    ) -> Result<(f64, Gradients)> {
        // Bounded by one full pass over every frame of every sequence.
        let budget: usize = seqs.iter().map(|s| s.frames().len()).sum::<usize>() + 2 * seqs.len() + 1;
        for _ in 0..budget {
            if self.current.as_ref().is_none_or(|(_, ep)| ep.is_finished()) {
                if self.next == self.order.len() {
                    self.order.shuffle(rng);
                    self.next = 0;
                }
                let k = self.order[self.next];
                self.next += 1;
                self.current = Some((k, ActualEpisode::new(&seqs[k])));
            }
            let (k, ep) = self.current.as_mut().ok_or(Error::State("no actual episode"))?;
            if let Some(seg) = ep.next_segment(&seqs[*k], model, cfg.window, opts, rng)? {
                if !seg.batches.is_empty() {
                    return Ok((seg.loss, seg.grads));
                }
            }
        }
        Err(Error::Episode("no sequence yields a proposal batch".into()))
    }
}

/// Trains `model` in place.
///
/// Iterations alternate between an actual-episode segment (even iterations)
/// and a random episode (odd iterations). Each iteration is one optimizer
/// step. A non-finite loss aborts training.
pub fn train(
    model: &mut Classifier,
    seqs: &[TrainingSequence],
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<()> {
    cfg.validate()?;
    if seqs.is_empty() {
        return Err(Error::Episode("no training sequences".into()));
    }
    for s in seqs {
        s.validate()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = match cfg.optimizer {
        Optimizer::Sgd => Opt::Sgd,
        Optimizer::Adam => Opt::Adam(Adam::new(model.params())),
    };
    let mut cursor = ActualCursor {
        order: (0..seqs.len()).collect(),
        next: seqs.len(),
        current: None,
    };
    let rcfg = cfg.random_episode_config();
    for iter in 0..cfg.total_iterations() {
        let lr = cfg.lr_at(iter);
        let dropout = if model.has_motion() { cfg.dropout_at(iter) } else { 0.0 };
        let opts = LossOptions {
            focal: cfg.focal(),
            hard_k: cfg.hard_mining_at(iter).then_some(cfg.k_hard),
            dropout,
        };
        let phase = if iter % 2 == 0 { Phase::Actual } else { Phase::Random };
        let (loss, grads) = match phase {
            Phase::Actual => cursor.segment(seqs, model, cfg, &opts, &mut rng)?,
            Phase::Random => {
                let ep = build_random_episode(seqs, &rcfg, &mut rng)?;
                ep.loss(&seqs[ep.sequence], model, &opts, &mut rng)?
            }
        };
        if !loss.is_finite() || !grads.is_finite() {
            log::error!("training diverged at iteration {iter} ({}): loss {loss}", phase.as_str());
            return Err(Error::NonFinite("training loss"));
        }
        match &mut opt {
            Opt::Sgd => sgd_step(model.params_mut(), &grads, lr)?,
            Opt::Adam(a) => a.step(model.params_mut(), &grads, lr)?,
        }
        observer.iteration(&LogRow {
            iter,
            phase,
            loss,
            lr,
            dropout,
        })?;
        if (iter + 1) % cfg.iterations_per_epoch == 0 {
            observer.epoch_end(cfg.epoch_of(iter), model)?;
        }
    }
    Ok(())
}
