//! The online tracker: per-frame scoring, greedy association, track
//! lifecycle, extension and near-online emission.

use alloc::vec;
use alloc::vec::Vec;

use super::associate::{greedy_associate, motion_gate};
use super::config::{Gate, Smoothing, TrackerConfig};
use super::kalman::KalmanState;
use super::smooth::interpolate;
use crate::classifier::{AppearanceMemory, Classifier, MotionState, PairInput};
use crate::error::{check_len, Error, Result};
use crate::geometry::BBox;
use crate::record::{Detection, MotRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Detected,
    /// Kalman-predicted box accepted by the classifier.
    Extended,
    /// Filled in by near-online smoothing.
    Interpolated,
}

/// One emitted box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputRow {
    pub frame: u32,
    pub id: i64,
    pub bbox: BBox,
    pub source: Source,
}

impl OutputRow {
    /// Result-file row; confidence is always 1.
    pub fn to_record(&self) -> MotRecord {
        MotRecord::new(self.frame, self.id, self.bbox, 1.0)
    }
}

/// Supplies embeddings for boxes that were not detected.
pub trait BoxEmbedder {
    /// `None` means the box cannot be evaluated; the track's last detected
    /// embedding is used instead.
    fn embed_box(&mut self, frame: u32, bbox: &BBox) -> Option<Vec<f64>>;
}

/// A live track. In online mode its size does not depend on the sequence
/// length: besides the recurrent and Kalman states it holds only the last
/// detection. In near-online mode it also holds the extended rows since the
/// last detection, which can never outnumber its matched detections.
#[derive(Debug, Clone)]
pub struct Track {
    pub id: i64,
    pub memory: AppearanceMemory,
    pub motion: Option<MotionState>,
    pub kalman: KalmanState,
    pub matched_count: u32,
    pub missed_total: u32,
    pub consecutive_missed: u32,
    pub last_embedding: Vec<f64>,
    pub last_detected: OutputRow,
    pub last_frame: u32,
    pending: Vec<OutputRow>,
}

impl Track {
    /// Number of scalars held by this track.
    pub fn state_size(&self) -> usize {
        let lstm = |s: &crate::nn::LstmState<Vec<f64>>| s.h.len() + s.c.len();
        lstm(&self.memory)
            + self.motion.as_ref().map_or(0, lstm)
            + 8
            + 64
            + self.last_embedding.len()
            + 4 * (1 + self.pending.len())
    }

    pub fn pending(&self) -> &[OutputRow] {
        &self.pending
    }
}

/// Termination rule: more misses than matches overall, or more than
/// `n_miss` misses in a row.
pub fn maybe_terminate(track: &Track, cfg: &TrackerConfig) -> bool {
    track.missed_total > track.matched_count || track.consecutive_missed > cfg.n_miss
}

/// What happened to a track in one frame, decided before any state changes.
enum Decision {
    Matched(usize),
    Extended(BBox, [f64; 4]),
    Missed,
}

pub struct Tracker<'m> {
    model: &'m Classifier,
    cfg: TrackerConfig,
    image: (f64, f64),
    tracks: Vec<Track>,
    next_id: i64,
    last_frame: Option<u32>,
}

impl<'m> Tracker<'m> {
    pub fn new(model: &'m Classifier, cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        let image = (cfg.image_width, cfg.image_height);
        Ok(Self {
            model,
            cfg,
            image,
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
        })
    }

    /// Overrides the image size used to normalise motion inputs.
    pub fn set_image_size(&mut self, width: f64, height: f64) -> Result<()> {
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::config("tracker.image_width", "image size must be positive"));
        }
        self.image = (width, height);
        Ok(())
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Live tracks ordered by id.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    fn normalized(&self, b: &BBox) -> [f64; 4] {
        b.normalized(self.image.0, self.image.1)
    }

    /// Processes one frame and returns the rows that became final.
    ///
    /// In online mode these are exactly the current frame's boxes. In
    /// near-online mode extended boxes are held back until the track is
    /// detected again.
    pub fn step_frame(
        &mut self,
        frame: u32,
        detections: &[Detection],
        mut embedder: Option<&mut dyn BoxEmbedder>,
    ) -> Result<Vec<OutputRow>> {
        if self.last_frame.is_some_and(|l| frame <= l) {
            return Err(Error::Usage(alloc::format!(
                "frame {frame} arrived after frame {}",
                self.last_frame.unwrap_or(0)
            )));
        }
        let model = self.model;
        let dim = model.config().embed_dim;
        for d in detections {
            check_len("detection embedding", dim, d.embedding.len())?;
            if !d.bbox.is_finite() {
                return Err(Error::NonFinite("detection box"));
            }
        }

        let predicted: Vec<BBox> = self
            .tracks
            .iter_mut()
            .map(|t| {
                let mut b = t.kalman.bbox();
                for _ in t.last_frame..frame {
                    b = t.kalman.predict();
                }
                b
            })
            .collect();

        let xs = detections
            .iter()
            .map(|d| model.embed_detection(&d.embedding))
            .collect::<Result<Vec<_>>>()?;
        let nboxes: Vec<[f64; 4]> = detections.iter().map(|d| self.normalized(&d.bbox)).collect();
        let inputs: Vec<PairInput<'_>> = self
            .tracks
            .iter()
            .map(|t| PairInput {
                memory: &t.memory,
                motion: t.motion.as_ref(),
            })
            .collect();
        let gate = self.cfg.gate;
        let scores = model.score_matrix(
            &inputs,
            &xs,
            &nboxes,
            |i, j| match gate {
                Gate::Off => true,
                Gate::Iou(tau) => motion_gate(&predicted[i], &detections[j].bbox, tau),
            },
            self.cfg.pooling,
        )?;
        let pairs = greedy_associate(&scores, self.cfg.assoc_threshold);

        let mut decisions: Vec<Decision> = (0..self.tracks.len()).map(|_| Decision::Missed).collect();
        let mut det_taken = vec![false; detections.len()];
        for &(i, j) in &pairs {
            decisions[i] = Decision::Matched(j);
            det_taken[j] = true;
        }
        if self.cfg.extension {
            for i in 0..self.tracks.len() {
                if !matches!(decisions[i], Decision::Missed) {
                    continue;
                }
                let t = &self.tracks[i];
                let b = predicted[i];
                let raw = embedder
                    .as_deref_mut()
                    .and_then(|e| e.embed_box(frame, &b))
                    .unwrap_or_else(|| t.last_embedding.clone());
                check_len("extension embedding", dim, raw.len())?;
                let x = model.embed_detection(&raw)?;
                let others: Vec<&AppearanceMemory> = self
                    .tracks
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != i)
                    .map(|(_, o)| &o.memory)
                    .collect();
                let nb = self.normalized(&b);
                let p = model.score_pair(&t.memory, &others, &x, t.motion.as_ref().map(|m| (m, nb)), self.cfg.pooling)?;
                if p >= self.cfg.assoc_threshold {
                    decisions[i] = Decision::Extended(b, nb);
                }
            }
        }

        let near_online = self.cfg.smoothing == Smoothing::NearOnline;
        let mut out = Vec::new();
        for (t, decision) in self.tracks.iter_mut().zip(decisions) {
            match decision {
                Decision::Matched(j) => {
                    let d = &detections[j];
                    t.memory = model.update_memory(&t.memory, &xs[j])?;
                    if let Some(ms) = &t.motion {
                        t.motion = Some(model.motion_feature(ms, nboxes[j])?.1);
                    }
                    t.kalman.update(&d.bbox)?;
                    t.matched_count += 1;
                    t.consecutive_missed = 0;
                    t.last_embedding.clone_from(&d.embedding);
                    let row = OutputRow {
                        frame,
                        id: t.id,
                        bbox: d.bbox,
                        source: Source::Detected,
                    };
                    if near_online && frame > t.last_detected.frame + 1 {
                        out.extend(interpolate(t.id, &t.last_detected, &row));
                    }
                    t.pending.clear();
                    t.last_detected = row;
                    out.push(row);
                }
                Decision::Extended(b, nb) => {
                    t.missed_total += 1;
                    t.consecutive_missed = 0;
                    if let Some(ms) = &t.motion {
                        t.motion = Some(model.motion_feature(ms, nb)?.1);
                    }
                    t.kalman.update(&b)?;
                    let row = OutputRow {
                        frame,
                        id: t.id,
                        bbox: b,
                        source: Source::Extended,
                    };
                    if near_online {
                        t.pending.push(row);
                    } else {
                        out.push(row);
                    }
                }
                Decision::Missed => {
                    t.missed_total += 1;
                    t.consecutive_missed += 1;
                }
            }
            t.last_frame = frame;
        }

        for (j, d) in detections.iter().enumerate() {
            if det_taken[j] || d.conf < self.cfg.min_birth_conf {
                continue;
            }
            let (memory, motion) = model.init_track_state(&xs[j], nboxes[j])?;
            let row = OutputRow {
                frame,
                id: self.next_id,
                bbox: d.bbox,
                source: Source::Detected,
            };
            self.tracks.push(Track {
                id: self.next_id,
                memory,
                motion,
                kalman: KalmanState::new(&d.bbox),
                matched_count: 1,
                missed_total: 0,
                consecutive_missed: 0,
                last_embedding: d.embedding.clone(),
                last_detected: row,
                last_frame: frame,
                pending: Vec::new(),
            });
            self.next_id += 1;
            out.push(row);
        }

        let cfg = &self.cfg;
        self.tracks.retain(|t| !maybe_terminate(t, cfg));
        self.last_frame = Some(frame);
        out.sort_by_key(|r| (r.frame, r.id));
        Ok(out)
    }

    /// Ends the stream. Held-back extended rows are dropped, so nothing is
    /// emitted; the return value exists for symmetry with `step_frame`.
    pub fn finish(&mut self) -> Vec<OutputRow> {
        self.tracks.clear();
        Vec::new()
    }
}
