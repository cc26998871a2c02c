//! Actual and random tracking episodes and the losses computed on them.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::data::{LabeledTrack, Observation, ProposalBatch, TrainingSequence};
use super::loss::{mine_hard, FocalWeights};
use crate::classifier::{AppearanceMemory, Classifier, MotionState};
use crate::error::{Error, Result};
use crate::nn::{
    finite_diff_check, Backend, Dd, FdOptions, FdReport, Gradients, LstmState, NodeId, ParamStore, Precise, Probe, Tape,
};

/// Per-iteration knobs of the loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossOptions {
    pub focal: FocalWeights,
    /// Keep only the `k` hardest pairs of each batch for the gradient.
    pub hard_k: Option<usize>,
    /// Drop rate on the appearance features of the joint head.
    pub dropout: f64,
}

impl Default for LossOptions {
    fn default() -> Self {
        Self {
            focal: FocalWeights::default(),
            hard_k: None,
            dropout: 0.0,
        }
    }
}

/// Recurrent state of one track, detached from any tape.
#[derive(Debug, Clone, PartialEq)]
pub struct CarriedState {
    pub memory: AppearanceMemory,
    pub motion: Option<MotionState>,
}

struct TapeTrack<V> {
    memory: LstmState<V>,
    motion: Option<LstmState<V>>,
}

struct Column<V> {
    gt: Option<i64>,
    x: V,
    nbox: [f64; 4],
}

struct FrameLoss<V> {
    objective: V,
    logged: f64,
}

fn lift(tape: &mut Tape<'_>, s: &LstmState<Vec<f64>>) -> LstmState<NodeId> {
    LstmState {
        h: tape.leaf(s.h.clone()),
        c: tape.leaf(s.c.clone()),
    }
}

fn lower(tape: &Tape<'_>, s: &LstmState<NodeId>) -> LstmState<Vec<f64>> {
    LstmState {
        h: tape.value(s.h).to_vec(),
        c: tape.value(s.c).to_vec(),
    }
}

fn dropout_mask<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 - rate;
    (0..len)
        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

/// Focal loss over all pairs of one frame. The objective node averages the
/// (optionally mined) pair losses; `logged` is always the full-batch mean.
fn frame_loss<B: Backend, R: Rng + ?Sized>(
    model: &Classifier,
    tape: &mut B,
    rows: &[(i64, &TapeTrack<B::Value>)],
    cols: &[Column<B::Value>],
    opts: &LossOptions,
    rng: &mut R,
) -> Result<Option<FrameLoss<B::Value>>> {
    if rows.is_empty() || cols.is_empty() {
        return Ok(None);
    }
    let cfg = model.config();
    let mut matches = Vec::with_capacity(rows.len());
    for (_, t) in rows {
        let row = cols
            .iter()
            .map(|c| model.match_vector(tape, &t.memory.h, &c.x))
            .collect::<Result<Vec<_>>>()?;
        matches.push(row);
    }
    let use_mask = model.has_motion() && opts.dropout > 0.0;
    let mut terms = Vec::with_capacity(rows.len() * cols.len());
    let mut values = Vec::with_capacity(rows.len() * cols.len());
    for (i, (id, t)) in rows.iter().enumerate() {
        for (j, c) in cols.iter().enumerate() {
            let m_minus = if cfg.pooling {
                let others: Vec<B::Value> = (0..rows.len())
                    .filter(|&k| k != i)
                    .map(|k| matches[k][j].clone())
                    .collect();
                Some(model.pool(tape, &others)?)
            } else {
                None
            };
            let feat = match &t.motion {
                Some(ms) => {
                    let nb = tape.constant(c.nbox.to_vec());
                    Some(model.motion_step(tape, ms, &nb)?.0)
                }
                None => None,
            };
            let mask = use_mask.then(|| dropout_mask(model.app_feature_len(), opts.dropout, rng));
            let z = model.logits(tape, &matches[i][j], m_minus.as_ref(), feat.as_ref(), mask)?;
            let l = tape.focal(&z, c.gt == Some(*id), opts.focal)?;
            values.push(tape.data(&l)[0]);
            terms.push(l);
        }
    }
    let logged = values.iter().sum::<f64>() / values.len() as f64;
    let selected = match opts.hard_k {
        Some(k) => mine_hard(&values, k),
        None => (0..values.len()).collect(),
    };
    let w = 1.0 / selected.len() as f64;
    let weighted: Vec<(B::Value, f64)> = selected.into_iter().map(|k| (terms[k].clone(), w)).collect();
    Ok(Some(FrameLoss {
        objective: tape.weighted_sum(&weighted)?,
        logged,
    }))
}

fn columns<B: Backend>(
    model: &Classifier,
    tape: &mut B,
    seq: &TrainingSequence,
    dets: &[(Option<i64>, &Observation)],
) -> Result<Vec<Column<B::Value>>> {
    dets.iter()
        .map(|(gt, o)| {
            let raw = tape.constant(o.embedding.clone());
            Ok(Column {
                gt: *gt,
                x: model.embed(tape, &raw)?,
                nbox: seq.normalized(&o.bbox),
            })
        })
        .collect()
}

/// Advances a track by one assigned detection, or starts it.
fn advance<B: Backend>(
    model: &Classifier,
    tape: &mut B,
    track: Option<&TapeTrack<B::Value>>,
    col: &Column<B::Value>,
) -> Result<TapeTrack<B::Value>> {
    let nb = tape.constant(col.nbox.to_vec());
    match track {
        Some(t) => {
            let memory = model.memory_step(tape, &t.memory, &col.x)?;
            let motion = match &t.motion {
                Some(ms) => Some(model.motion_step(tape, ms, &nb)?.1),
                None => None,
            };
            Ok(TapeTrack { memory, motion })
        }
        None => {
            let memory = model.memory_init(tape, &col.x)?;
            let motion = if model.has_motion() {
                Some(model.motion_init(tape, &nb)?.1)
            } else {
                None
            };
            Ok(TapeTrack { memory, motion })
        }
    }
}

/// Loss and gradients of one truncated-BPTT segment.
#[derive(Debug, Clone)]
pub struct SegmentReport {
    /// Frames processed in this segment, including those without a batch.
    pub frames: Vec<u32>,
    pub batches: Vec<ProposalBatch>,
    /// Mean of the per-frame full-batch losses; `0` when there were no batches.
    pub loss: f64,
    pub grads: Gradients,
}

/// Walks a sequence frame by frame with teacher forcing.
///
/// Each call to [`ActualEpisode::next_segment`] processes the next `window`
/// frames on a fresh tape. Track states enter the segment as constants, so
/// gradients stop at the segment boundary while the state values continue
/// unchanged.
#[derive(Debug, Clone)]
pub struct ActualEpisode {
    frames: Vec<u32>,
    pos: usize,
    states: BTreeMap<i64, CarriedState>,
}

impl ActualEpisode {
    pub fn new(seq: &TrainingSequence) -> Self {
        Self {
            frames: seq.frames(),
            pos: 0,
            states: BTreeMap::new(),
        }
    }

    pub fn is_finished(&self) -> bool {
        self.pos >= self.frames.len()
    }

    /// States of the tracks alive after the last processed frame.
    pub fn states(&self) -> &BTreeMap<i64, CarriedState> {
        &self.states
    }

    pub fn next_segment<R: Rng + ?Sized>(
        &mut self,
        seq: &TrainingSequence,
        model: &Classifier,
        window: usize,
        opts: &LossOptions,
        rng: &mut R,
    ) -> Result<Option<SegmentReport>> {
        if window == 0 {
            return Err(Error::config("train.window", "must be at least 1"));
        }
        if self.is_finished() {
            return Ok(None);
        }
        let last_frame: BTreeMap<i64, u32> = seq
            .tracks
            .iter()
            .filter_map(|t| t.last_frame().map(|f| (t.id, f)))
            .collect();
        let mut tape = Tape::new(model.params());
        let mut live: BTreeMap<i64, TapeTrack<NodeId>> = BTreeMap::new();
        for (id, s) in &self.states {
            let memory = lift(&mut tape, &s.memory);
            let motion = s.motion.as_ref().map(|m| lift(&mut tape, m));
            live.insert(*id, TapeTrack { memory, motion });
        }
        let end = (self.pos + window).min(self.frames.len());
        let frames = self.frames[self.pos..end].to_vec();
        let mut losses = Vec::new();
        let mut batches = Vec::new();
        for &frame in &frames {
            live.retain(|id, _| last_frame.get(id).is_some_and(|&l| l >= frame));
            let dets = seq.detections_at(frame);
            let cols = columns(model, &mut tape, seq, &dets)?;
            let rows: Vec<(i64, &TapeTrack<NodeId>)> = live.iter().map(|(id, t)| (*id, t)).collect();
            if let Some(fl) = frame_loss(model, &mut tape, &rows, &cols, opts, rng)? {
                losses.push(fl);
                batches.extend(ProposalBatch::new(
                    frame,
                    rows.iter().map(|r| r.0).collect(),
                    cols.iter().map(|c| c.gt).collect(),
                ));
            }
            for c in &cols {
                if let Some(id) = c.gt {
                    let next = advance(model, &mut tape, live.get(&id), c)?;
                    live.insert(id, next);
                }
            }
        }
        self.pos = end;
        self.states = live
            .iter()
            .map(|(id, t)| {
                let s = CarriedState {
                    memory: lower(&tape, &t.memory),
                    motion: t.motion.as_ref().map(|m| lower(&tape, m)),
                };
                (*id, s)
            })
            .collect();
        if losses.is_empty() {
            return Ok(Some(SegmentReport {
                frames,
                batches,
                loss: 0.0,
                grads: Gradients::zeros_like(model.params()),
            }));
        }
        let w = 1.0 / losses.len() as f64;
        let loss = losses.iter().map(|l| l.logged).sum::<f64>() * w;
        let terms: Vec<(NodeId, f64)> = losses.iter().map(|l| (l.objective, w)).collect();
        let root = tape.weighted_sum(&terms)?;
        let grads = tape.backward(root)?;
        Ok(Some(SegmentReport {
            frames,
            batches,
            loss,
            grads,
        }))
    }
}

/// Drops each box of `track` with a rate drawn from `U[0.1, 0.9]`.
pub fn augment_missing<R: Rng + ?Sized>(track: &LabeledTrack, rng: &mut R) -> LabeledTrack {
    let rate = rng.random_range(0.1..=0.9);
    augment_missing_with_rate(track, rate, rng)
}

/// Drops each interior box independently with probability `rate`. The first
/// and last boxes are always kept.
pub fn augment_missing_with_rate<R: Rng + ?Sized>(track: &LabeledTrack, rate: f64, rng: &mut R) -> LabeledTrack {
    let n = track.observations.len();
    let observations = track
        .observations
        .iter()
        .enumerate()
        .filter(|&(k, _)| k == 0 || k + 1 == n || rng.random::<f64>() >= rate)
        .map(|(_, o)| o.clone())
        .collect();
    LabeledTrack {
        id: track.id,
        observations,
    }
}

/// Settings for sampling random episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomEpisodeConfig {
    pub max_gap: u32,
    pub n_max: usize,
    pub augment_missing: bool,
    pub max_retries: usize,
}

/// A short clip ending in one frame: clipped track histories and the
/// detections of the end frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomEpisode {
    pub sequence: usize,
    pub start: u32,
    pub end: u32,
    /// Histories strictly before `end`, each non-empty.
    pub histories: Vec<LabeledTrack>,
    pub detections: Vec<(Option<i64>, Observation)>,
}

/// Samples a random episode.
///
/// Picks a sequence and an end frame, a start frame at most `max_gap`
/// earlier, keeps at most `n_max` of the tracks detected at the end frame and
/// clips each history to begin at a uniformly chosen earlier observation.
/// Samples without any history are redrawn up to `max_retries` times.
pub fn build_random_episode<R: Rng + ?Sized>(
    seqs: &[TrainingSequence],
    cfg: &RandomEpisodeConfig,
    rng: &mut R,
) -> Result<RandomEpisode> {
    if cfg.max_gap == 0 || cfg.n_max == 0 {
        return Err(Error::config("train", "max_gap and n_max must be at least 1"));
    }
    let usable: Vec<(usize, Vec<u32>)> = seqs
        .iter()
        .enumerate()
        .map(|(k, s)| (k, s.frames()))
        .filter(|(_, f)| f.len() >= 2)
        .collect();
    if usable.is_empty() {
        return Err(Error::Episode("no sequence has two or more frames".into()));
    }
    for _ in 0..cfg.max_retries.max(1) {
        let (si, frames) = &usable[rng.random_range(0..usable.len())];
        let seq = &seqs[*si];
        let end = frames[rng.random_range(1..frames.len())];
        let gap = rng.random_range(1..=cfg.max_gap);
        let start = end.saturating_sub(gap).max(frames[0]);
        let alive: Vec<&LabeledTrack> = seq.tracks.iter().filter(|t| t.at(end).is_some()).collect();
        if alive.is_empty() {
            continue;
        }
        let mut picked: Vec<&LabeledTrack> = if alive.len() > cfg.n_max {
            let mut ix = index::sample(rng, alive.len(), cfg.n_max).into_vec();
            ix.sort_unstable();
            ix.into_iter().map(|k| alive[k]).collect()
        } else {
            alive
        };
        picked.sort_by_key(|t| t.id);
        let mut histories = Vec::new();
        let mut detections = Vec::new();
        for t in &picked {
            let before: Vec<&Observation> = t
                .observations
                .iter()
                .filter(|o| o.frame >= start && o.frame < end)
                .collect();
            if !before.is_empty() {
                let from = rng.random_range(0..before.len());
                let mut h = LabeledTrack {
                    id: t.id,
                    observations: before[from..].iter().map(|o| (*o).clone()).collect(),
                };
                if cfg.augment_missing && h.observations.len() >= 2 {
                    h = augment_missing(&h, rng);
                }
                histories.push(h);
            }
            if let Some(o) = t.at(end) {
                detections.push((Some(t.id), o.clone()));
            }
        }
        if histories.is_empty() {
            continue;
        }
        detections.extend(seq.clutter.iter().filter(|o| o.frame == end).map(|o| (None, o.clone())));
        return Ok(RandomEpisode {
            sequence: *si,
            start,
            end,
            histories,
            detections,
        });
    }
    Err(Error::Episode(alloc::format!(
        "no usable random episode after {} attempts",
        cfg.max_retries.max(1)
    )))
}

impl RandomEpisode {
    pub fn batch(&self) -> ProposalBatch {
        ProposalBatch {
            frame: self.end,
            track_ids: self.histories.iter().map(|h| h.id).collect(),
            detections: self.detections.iter().map(|d| d.0).collect(),
        }
    }

    /// Full-batch loss and the gradient of the (optionally mined) objective.
    /// Track memories are unrolled over their histories on the same tape.
    pub fn loss<R: Rng + ?Sized>(
        &self,
        seq: &TrainingSequence,
        model: &Classifier,
        opts: &LossOptions,
        rng: &mut R,
    ) -> Result<(f64, Gradients)> {
        let out = self.evaluate(seq, model, model.params(), opts, rng)?;
        Ok((out.loss, out.grads))
    }

    /// Like [`RandomEpisode::loss`] but with an explicit parameter set laid out
    /// like `model.params()`, and with the tape signature for gradient checks.
    pub fn evaluate<R: Rng + ?Sized>(
        &self,
        seq: &TrainingSequence,
        model: &Classifier,
        params: &ParamStore,
        opts: &LossOptions,
        rng: &mut R,
    ) -> Result<EpisodeLoss> {
        let mut tape = Tape::new(params);
        let fl = self.forward(seq, model, &mut tape, opts, rng)?;
        Ok(EpisodeLoss {
            loss: fl.logged,
            objective: tape.scalar(fl.objective),
            signature: tape.signature(),
            grads: tape.backward(fl.objective)?,
        })
    }

    /// The differentiated objective evaluated in double-double precision,
    /// with the branch signature. Used as the finite-difference reference.
    pub fn precise_objective<R: Rng + ?Sized>(
        &self,
        seq: &TrainingSequence,
        model: &Classifier,
        params: &ParamStore,
        opts: &LossOptions,
        rng: &mut R,
    ) -> Result<(Dd, u64)> {
        let mut be = Precise::new(params);
        let fl = self.forward(seq, model, &mut be, opts, rng)?;
        Ok((fl.objective.exact()[0], be.signature()))
    }

    /// Compares the tape gradient of the objective with central differences
    /// of the double-double objective. Probes are taken relative to the
    /// unperturbed objective so that the `f64` values handed to the difference
    /// quotient carry no cancellation error. Dropout masks are redrawn from
    /// `mask_seed` on every evaluation so all probes see the same masks.
    pub fn check_gradient(
        &self,
        seq: &TrainingSequence,
        model: &Classifier,
        opts: &LossOptions,
        fd: FdOptions,
        mask_seed: u64,
    ) -> Result<FdReport> {
        let rng = || ChaCha8Rng::seed_from_u64(mask_seed);
        let analytic = self.evaluate(seq, model, model.params(), opts, &mut rng())?;
        let (base, _) = self.precise_objective(seq, model, model.params(), opts, &mut rng())?;
        finite_diff_check(
            |ps| {
                let (v, signature) = self.precise_objective(seq, model, ps, opts, &mut rng())?;
                Ok(Probe {
                    value: v.sub(base).to_f64(),
                    signature,
                })
            },
            model.params(),
            &analytic.grads,
            fd,
        )
    }

    fn forward<B: Backend, R: Rng + ?Sized>(
        &self,
        seq: &TrainingSequence,
        model: &Classifier,
        be: &mut B,
        opts: &LossOptions,
        rng: &mut R,
    ) -> Result<FrameLoss<B::Value>> {
        let mut tracks = Vec::with_capacity(self.histories.len());
        for h in &self.histories {
            let refs: Vec<(Option<i64>, &Observation)> = h.observations.iter().map(|o| (Some(h.id), o)).collect();
            let cols = columns(model, be, seq, &refs)?;
            let mut state: Option<TapeTrack<B::Value>> = None;
            for c in &cols {
                state = Some(advance(model, be, state.as_ref(), c)?);
            }
            let state = state.ok_or(Error::State("empty track history"))?;
            tracks.push((h.id, state));
        }
        let refs: Vec<(Option<i64>, &Observation)> = self.detections.iter().map(|(g, o)| (*g, o)).collect();
        let cols = columns(model, be, seq, &refs)?;
        let rows: Vec<(i64, &TapeTrack<B::Value>)> = tracks.iter().map(|(id, t)| (*id, t)).collect();
        frame_loss(model, be, &rows, &cols, opts, rng)?.ok_or(Error::State("random episode without proposals"))
    }
}

/// Loss of one episode.
#[derive(Debug, Clone)]
pub struct EpisodeLoss {
    /// Full-batch mean pair loss.
    pub loss: f64,
    /// The value actually differentiated (differs from `loss` under hard mining).
    pub objective: f64,
    /// Piecewise-region signature of the forward pass.
    pub signature: u64,
    pub grads: Gradients,
}
