//! The operations behind each command, usable without the command line.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use trackpool_core::classifier::{Classifier, ModelConfig, Pooling};
use trackpool_core::metrics::{evaluate, EvalReport, SequenceReport};
use trackpool_core::nn::FdOptions;
use trackpool_core::record::MotRecord;
use trackpool_core::sim::{generate, ScenarioSpec};
use trackpool_core::tracker::{BoxEmbedder, Gate, OutputRow, Smoothing, Tracker, TrackerConfig};
use trackpool_core::training::{
    train, FocalWeights, LabeledTrack, LossOptions, Observation, RandomEpisode, TrainConfig, TrainObserver,
    TrainingSequence,
};
use trackpool_core::BBox;

use crate::config::RunConfig;
use crate::dataset::Sequence;
use crate::error::{Error, Result};

/// Wall-clock figures of one tracking run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub frames: usize,
    pub seconds: f64,
    pub frames_per_second: f64,
    /// Mean time of one frame step (scoring, association and bookkeeping).
    pub mean_step_ms: f64,
    pub max_live_tracks: usize,
}

/// Tracks one sequence, handing rows to `sink` in `(frame, id)` order as
/// soon as no live track can still revise them.
pub fn track_sequence(
    model: &Classifier,
    cfg: &TrackerConfig,
    seq: &Sequence,
    embedder: Option<&mut dyn BoxEmbedder>,
    sink: &mut dyn FnMut(&OutputRow) -> Result<()>,
) -> Result<Timing> {
    let mut tracker = Tracker::new(model, cfg.clone())?;
    tracker.set_image_size(seq.info.width, seq.info.height)?;
    let mut embedder = embedder;
    let mut held: BTreeMap<(u32, i64), OutputRow> = BTreeMap::new();
    let empty = Vec::new();
    let last = seq.last_frame();
    let start = Instant::now();
    let mut step_total = 0.0;
    let mut max_live = 0;
    for frame in 1..=last {
        let dets = seq.by_frame.get(&frame).unwrap_or(&empty);
        let t0 = Instant::now();
        let rows = tracker.step_frame(frame, dets, embedder.as_mut().map(|e| &mut **e as &mut dyn BoxEmbedder))?;
        step_total += t0.elapsed().as_secs_f64();
        max_live = max_live.max(tracker.tracks().len());
        for r in rows {
            held.insert((r.frame, r.id), r);
        }
        // a later detection can still interpolate back to the frame after a
        // track's last detection, so nothing from that frame on is final yet
        let horizon = if cfg.smoothing == Smoothing::NearOnline {
            tracker
                .tracks()
                .iter()
                .map(|t| t.last_detected.frame + 1)
                .min()
                .unwrap_or(frame + 1)
                .min(frame + 1)
        } else {
            frame + 1
        };
        while let Some(entry) = held.first_entry() {
            if entry.key().0 >= horizon {
                break;
            }
            sink(&entry.remove())?;
        }
    }
    tracker.finish();
    for r in held.values() {
        sink(r)?;
    }
    let seconds = start.elapsed().as_secs_f64();
    let frames = last as usize;
    Ok(Timing {
        frames,
        seconds,
        frames_per_second: if seconds > 0.0 { frames as f64 / seconds } else { f64::INFINITY },
        mean_step_ms: 1e3 * step_total / frames.max(1) as f64,
        max_live_tracks: max_live,
    })
}

/// Tracks a sequence and collects the result rows.
pub fn track_to_records(
    model: &Classifier,
    cfg: &TrackerConfig,
    seq: &Sequence,
    seed: u64,
) -> Result<(Vec<MotRecord>, Timing)> {
    let mut embedder = seq.embedder(seed)?;
    let mut out = Vec::new();
    let timing = track_sequence(
        model,
        cfg,
        seq,
        embedder.as_mut().map(|e| e as &mut dyn BoxEmbedder),
        &mut |r| {
            out.push(r.to_record());
            Ok(())
        },
    )?;
    Ok((out, timing))
}

/// Trains a fresh model from `cfg.model` on `seqs`.
pub fn train_model(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    seqs: &[TrainingSequence],
    observer: &mut dyn TrainObserver,
) -> Result<Classifier> {
    let mut model = Classifier::new(model_cfg.clone())?;
    train(&mut model, seqs, train_cfg, observer)?;
    Ok(model)
}

/// Training scenes for a simulated run: `count` scenarios sharing `spec`
/// except for their seeds, which are derived from `seed` and never collide
/// with the evaluation seed itself.
pub fn training_scenes(spec: &ScenarioSpec, seed: u64, count: usize) -> Result<Vec<TrainingSequence>> {
    (0..count as u64)
        .map(|k| {
            let s = ScenarioSpec {
                seed: seed.wrapping_mul(1_000_003).wrapping_add(k + 1),
                ..spec.clone()
            };
            Ok(generate(&s)?.training_sequence(&format!("train-{seed}-{k}")))
        })
        .collect()
}

// ---------- gradient check ----------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub trials: usize,
    /// Worst relative error per parameter tensor over all trials.
    pub per_param: Vec<(String, f64)>,
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
}

/// Three tracks with two-frame histories and detections of two of them,
/// i.e. a 3 x 2 proposal batch, with random boxes and embeddings.
pub fn gradcheck_episode(embed_dim: usize, seed: u64) -> (TrainingSequence, RandomEpisode) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let emb = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..embed_dim).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let tracks: Vec<LabeledTrack> = (0..3)
        .map(|k| {
            let left = 80.0 + 150.0 * f64::from(k) + rng.random_range(-20.0..20.0);
            let observations = (1..=3)
                .map(|f| Observation {
                    frame: f,
                    bbox: BBox::new(
                        left + 4.0 * f64::from(f) + rng.random_range(-2.0..2.0),
                        60.0 + rng.random_range(-5.0..5.0),
                        40.0 + rng.random_range(-4.0..4.0),
                        100.0 + rng.random_range(-8.0..8.0),
                    ),
                    embedding: emb(&mut rng),
                })
                .collect();
            LabeledTrack {
                id: i64::from(k) + 1,
                observations,
            }
        })
        .collect();
    let seq = TrainingSequence {
        name: format!("gradcheck-{seed}"),
        image_width: 640.0,
        image_height: 480.0,
        tracks,
        clutter: Vec::new(),
    };
    let histories = seq
        .tracks
        .iter()
        .map(|t| LabeledTrack {
            id: t.id,
            observations: t.observations[..2].to_vec(),
        })
        .collect();
    let detections = seq.tracks[..2]
        .iter()
        .map(|t| (Some(t.id), t.observations[2].clone()))
        .collect();
    let ep = RandomEpisode {
        sequence: 0,
        start: 1,
        end: 3,
        histories,
        detections,
    };
    (seq, ep)
}

/// Finite-difference check of the full loss on `trials` random models and
/// batches. Odd trials also apply an appearance dropout mask.
pub fn gradcheck(
    model_cfg: &ModelConfig,
    focal: FocalWeights,
    trials: usize,
    seed: u64,
    coords_per_param: usize,
) -> Result<GradcheckReport> {
    let mut per_param: Vec<(String, f64)> = Vec::new();
    let mut checked = 0;
    let mut skipped = 0;
    for k in 0..trials as u64 {
        let s = seed.wrapping_add(k);
        let model = Classifier::new(ModelConfig {
            init_seed: s,
            ..model_cfg.clone()
        })?;
        let (seq, ep) = gradcheck_episode(model_cfg.embed_dim, s);
        let opts = LossOptions {
            focal,
            hard_k: None,
            dropout: if k % 2 == 1 && model.has_motion() { 0.5 } else { 0.0 },
        };
        let fd = FdOptions {
            eps: 1e-5,
            max_coords_per_param: Some(coords_per_param),
            seed: s,
        };
        let r = ep.check_gradient(&seq, &model, &opts, fd, s)?;
        if per_param.is_empty() {
            per_param = r.per_param.clone();
        }
        for (slot, (_, e)) in per_param.iter_mut().zip(&r.per_param) {
            slot.1 = slot.1.max(*e);
        }
        checked += r.checked;
        skipped += r.skipped_kinks;
    }
    let max_rel_error = per_param.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(GradcheckReport {
        trials,
        per_param,
        max_rel_error,
        checked,
        skipped_kinks: skipped,
    })
}

// ---------- evaluation ----------

pub fn evaluate_sequences(pairs: &[(String, Vec<MotRecord>, Vec<MotRecord>)]) -> Result<EvalReport> {
    let seqs = pairs
        .iter()
        .map(|(name, gt, pred)| Ok(evaluate(name, gt, pred)?))
        .collect::<Result<Vec<SequenceReport>>>()?;
    Ok(EvalReport::from_sequences(seqs)?)
}

// ---------- pooling ablation ----------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Arm {
    /// Trained with pooling, scored with pooling.
    Pooled,
    /// The same weights with the pooled other-track input forced to zero.
    Ablated,
    /// A model without the pooled input, trained with the same budget.
    Retrained,
}

impl Arm {
    pub fn label(self) -> &'static str {
        match self {
            Arm::Pooled => "pooled",
            Arm::Ablated => "pooling zeroed",
            Arm::Retrained => "no pooling (retrained)",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmResult {
    pub arm: Arm,
    /// One per seed, named `seed<k>`; pooled counts are in `report`.
    pub report: EvalReport,
    pub mean_idf1: f64,
    pub mean_idsw: f64,
    pub mean_mota: f64,
}

#[derive(Debug, Clone)]
pub struct AblationOptions {
    pub seeds: Vec<u64>,
    pub train_scenes: usize,
    pub retrained: bool,
    /// Use these weights instead of training a pooled model per seed.
    pub model: Option<Classifier>,
}

/// Tracks one simulated scene per seed with each arm and evaluates.
///
/// Motion gating is switched off so that association rests on the
/// classifier alone.
pub fn ablation(cfg: &RunConfig, opts: &AblationOptions, observer: &mut dyn TrainObserver) -> Result<Vec<ArmResult>> {
    if opts.seeds.is_empty() {
        return Err(Error::Core(trackpool_core::Error::Usage("ablation needs at least one seed".into())));
    }
    let tracker = TrackerConfig {
        gate: Gate::Off,
        ..cfg.tracker.clone()
    };
    let mut arms: Vec<Arm> = vec![Arm::Pooled, Arm::Ablated];
    if opts.retrained {
        arms.push(Arm::Retrained);
    }
    let mut per_arm: Vec<Vec<SequenceReport>> = vec![Vec::new(); arms.len()];
    for &seed in &opts.seeds {
        let spec = ScenarioSpec {
            seed,
            ..cfg.sim.clone()
        };
        let scene = Sequence::from_scenario(&format!("seed{seed}"), &generate(&spec)?);
        let train_cfg = TrainConfig {
            seed,
            ..cfg.train.clone()
        };
        let needs_training = opts.model.is_none() || opts.retrained;
        let scenes = if needs_training {
            training_scenes(&cfg.sim, seed, opts.train_scenes)?
        } else {
            Vec::new()
        };
        let pooled = match &opts.model {
            Some(m) => m.clone(),
            None => {
                let mc = ModelConfig {
                    pooling: true,
                    init_seed: seed,
                    ..cfg.model.clone()
                };
                train_model(&mc, &train_cfg, &scenes, observer)?
            }
        };
        let gt = scene.gt.clone().unwrap_or_default();
        for (k, arm) in arms.iter().enumerate() {
            let (model, pooling) = match arm {
                Arm::Pooled => (pooled.clone(), Pooling::Full),
                Arm::Ablated => (pooled.clone(), Pooling::Ablated),
                Arm::Retrained => {
                    let mc = ModelConfig {
                        pooling: false,
                        init_seed: seed,
                        ..cfg.model.clone()
                    };
                    (train_model(&mc, &train_cfg, &scenes, observer)?, Pooling::Full)
                }
            };
            let tc = TrackerConfig {
                pooling,
                ..tracker.clone()
            };
            let (rows, _) = track_to_records(&model, &tc, &scene, seed)?;
            per_arm[k].push(evaluate(&scene.name, &gt, &rows)?);
        }
    }
    arms.into_iter()
        .zip(per_arm)
        .map(|(arm, seqs)| {
            let n = seqs.len() as f64;
            let mean_idf1 = seqs.iter().map(|s| s.identity.idf1).sum::<f64>() / n;
            let mean_idsw = seqs.iter().map(|s| s.clear.idsw as f64).sum::<f64>() / n;
            let mean_mota = seqs.iter().map(|s| s.clear.mota).sum::<f64>() / n;
            Ok(ArmResult {
                arm,
                report: EvalReport::from_sequences(seqs)?,
                mean_idf1,
                mean_idsw,
                mean_mota,
            })
        })
        .collect()
}
