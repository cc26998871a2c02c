//! Labeled sequences used for training, and the proposal batches built from them.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::metrics::{hungarian, IOU_THRESHOLD};
use crate::record::{Detection, MotRecord};

/// One detection assigned to a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub frame: u32,
    pub bbox: BBox,
    pub embedding: Vec<f64>,
}

/// A track with a known identity. Frames are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrack {
    pub id: i64,
    pub observations: Vec<Observation>,
}

impl LabeledTrack {
    pub fn first_frame(&self) -> Option<u32> {
        self.observations.first().map(|o| o.frame)
    }

    pub fn last_frame(&self) -> Option<u32> {
        self.observations.last().map(|o| o.frame)
    }

    pub fn at(&self, frame: u32) -> Option<&Observation> {
        self.observations
            .binary_search_by_key(&frame, |o| o.frame)
            .ok()
            .map(|i| &self.observations[i])
    }

    /// A track is alive at `frame` once it has been seen strictly earlier and
    /// until its last observation.
    pub fn alive_at(&self, frame: u32) -> bool {
        matches!((self.first_frame(), self.last_frame()), (Some(a), Some(b)) if a < frame && frame <= b)
    }
}

/// Labeled tracks of one video plus unlabeled detections (clutter).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingSequence {
    pub name: String,
    pub image_width: f64,
    pub image_height: f64,
    pub tracks: Vec<LabeledTrack>,
    pub clutter: Vec<Observation>,
}

impl TrainingSequence {
    pub fn validate(&self) -> Result<()> {
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return Err(Error::Episode(alloc::format!("{}: image size must be positive", self.name)));
        }
        for t in &self.tracks {
            if t.observations.windows(2).any(|w| w[0].frame >= w[1].frame) {
                return Err(Error::Episode(alloc::format!(
                    "{}: track {} frames are not strictly increasing",
                    self.name,
                    t.id
                )));
            }
        }
        Ok(())
    }

    /// Every frame with at least one detection, ascending.
    pub fn frames(&self) -> Vec<u32> {
        let mut f: Vec<u32> = self
            .tracks
            .iter()
            .flat_map(|t| t.observations.iter().map(|o| o.frame))
            .chain(self.clutter.iter().map(|o| o.frame))
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    pub fn normalized(&self, b: &BBox) -> [f64; 4] {
        b.normalized(self.image_width, self.image_height)
    }

    /// Detections of `frame` as `(gt id, observation)`: labeled ones ordered by
    /// track id, then clutter in input order.
    pub fn detections_at(&self, frame: u32) -> Vec<(Option<i64>, &Observation)> {
        let mut labeled: Vec<(i64, &Observation)> = self
            .tracks
            .iter()
            .filter_map(|t| t.at(frame).map(|o| (t.id, o)))
            .collect();
        labeled.sort_by_key(|(id, _)| *id);
        labeled
            .into_iter()
            .map(|(id, o)| (Some(id), o))
            .chain(self.clutter.iter().filter(|o| o.frame == frame).map(|o| (None, o)))
            .collect()
    }

    /// The actual-episode proposal batches, one per frame with at least one
    /// live track and one detection.
    pub fn proposal_batches(&self) -> Vec<ProposalBatch> {
        self.frames()
            .into_iter()
            .filter_map(|frame| {
                let mut track_ids: Vec<i64> = self.tracks.iter().filter(|t| t.alive_at(frame)).map(|t| t.id).collect();
                track_ids.sort_unstable();
                let detections: Vec<Option<i64>> = self.detections_at(frame).into_iter().map(|(id, _)| id).collect();
                ProposalBatch::new(frame, track_ids, detections)
            })
            .collect()
    }
}

/// All track/detection pairs of one frame with their binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalBatch {
    pub frame: u32,
    pub track_ids: Vec<i64>,
    /// Ground-truth id of each detection; `None` for clutter.
    pub detections: Vec<Option<i64>>,
}

impl ProposalBatch {
    /// `None` when there is nothing to classify.
    pub fn new(frame: u32, track_ids: Vec<i64>, detections: Vec<Option<i64>>) -> Option<Self> {
        (!track_ids.is_empty() && !detections.is_empty()).then_some(Self {
            frame,
            track_ids,
            detections,
        })
    }

    pub fn len(&self) -> usize {
        self.track_ids.len() * self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn label(&self, i: usize, j: usize) -> bool {
        self.detections[j] == Some(self.track_ids[i])
    }

    /// Labels in row-major `(track, detection)` order.
    pub fn labels(&self) -> Vec<bool> {
        let n = self.detections.len();
        (0..self.len()).map(|k| self.label(k / n, k % n)).collect()
    }

    pub fn num_positive(&self) -> usize {
        self.labels().iter().filter(|&&y| y).count()
    }
}

/// Result of labeling raw detections with ground-truth identities.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoisyTracks {
    pub tracks: Vec<LabeledTrack>,
    /// Detections that matched no ground-truth box.
    pub clutter: Vec<Observation>,
}

/// Labels detections with ground-truth ids by a per-frame assignment that
/// maximises total IoU, keeping matches with IoU >= 0.5.
///
/// The resulting tracks carry the detector's localisation errors and misses.
pub fn assign_ids_by_iou(gt: &[MotRecord], detections: &[(u32, Detection)]) -> Result<NoisyTracks> {
    let mut gt_by_frame: BTreeMap<u32, Vec<&MotRecord>> = BTreeMap::new();
    for r in gt {
        gt_by_frame.entry(r.frame).or_default().push(r);
    }
    let mut det_by_frame: BTreeMap<u32, Vec<&Detection>> = BTreeMap::new();
    for (f, d) in detections {
        det_by_frame.entry(*f).or_default().push(d);
    }
    let mut tracks: BTreeMap<i64, Vec<Observation>> = BTreeMap::new();
    let mut clutter = Vec::new();
    for (&frame, dets) in &det_by_frame {
        let gts = gt_by_frame.get(&frame).map(Vec::as_slice).unwrap_or(&[]);
        let mut owner = alloc::vec![None; dets.len()];
        if !gts.is_empty() {
            let cost: Vec<Vec<f64>> = gts
                .iter()
                .map(|g| {
                    dets.iter()
                        .map(|d| {
                            let iou = g.bbox.iou(&d.bbox);
                            if iou >= IOU_THRESHOLD {
                                1.0 - iou
                            } else {
                                f64::INFINITY
                            }
                        })
                        .collect()
                })
                .collect();
            for (gi, dj) in hungarian(&cost)?.pairs {
                owner[dj] = Some(gts[gi].id);
            }
        }
        for (d, id) in dets.iter().zip(owner) {
            let obs = Observation {
                frame,
                bbox: d.bbox,
                embedding: d.embedding.clone(),
            };
            match id {
                Some(id) => tracks.entry(id).or_default().push(obs),
                None => clutter.push(obs),
            }
        }
    }
    Ok(NoisyTracks {
        tracks: tracks
            .into_iter()
            .map(|(id, observations)| LabeledTrack { id, observations })
            .collect(),
        clutter,
    })
}
