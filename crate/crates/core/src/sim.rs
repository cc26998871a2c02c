//! Seeded synthetic scenes with confusable appearance clusters.
//!
//! Targets move with near-constant velocity and bounce off the image border.
//! Each target's embedding is its cluster centroid plus a fixed personal
//! offset of norm `sigma_c`, plus fresh Gaussian noise every frame, so
//! `sigma_c` alone controls how easily same-cluster targets are confused.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::record::{Detection, MotRecord};
use crate::training::{LabeledTrack, Observation, TrainingSequence};

/// Most targets a single appearance cluster may hold.
pub const CLUSTER_CAPACITY: usize = 32;

/// Height ratio between consecutive targets. Same-aspect boxes whose areas
/// differ by at least this squared can never reach an IoU above 0.9.
const HEIGHT_RATIO: f64 = 0.94;
const _: () = assert!(HEIGHT_RATIO * HEIGHT_RATIO < 0.9);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub image_width: f64,
    pub image_height: f64,
    pub num_targets: usize,
    pub num_clusters: usize,
    /// Norm of each target's fixed offset from its cluster centroid.
    pub sigma_c: f64,
    /// Per-coordinate embedding noise.
    pub sigma_e: f64,
    pub p_miss: f64,
    /// Mean number of false positives per frame.
    pub lambda_fp: f64,
    /// Per-coordinate box jitter in pixels.
    pub sigma_b: f64,
    pub frames: u32,
    pub speed_min: f64,
    pub speed_max: f64,
    /// Per-frame velocity perturbation in pixels.
    pub accel_sigma: f64,
    /// Height of the tallest target as a fraction of the image height.
    pub box_height: f64,
    pub embed_dim: usize,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            image_width: 960.0,
            image_height: 540.0,
            num_targets: 8,
            num_clusters: 2,
            sigma_c: 0.2,
            sigma_e: 0.05,
            p_miss: 0.05,
            lambda_fp: 0.2,
            sigma_b: 1.0,
            frames: 300,
            speed_min: 2.0,
            speed_max: 6.0,
            accel_sigma: 0.2,
            box_height: 0.25,
            embed_dim: 32,
            seed: 0,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return Err(Error::config("sim.image_width", "image size must be positive"));
        }
        if self.num_targets == 0 || self.num_clusters == 0 {
            return Err(Error::config("sim.num_targets", "targets and clusters must be at least 1"));
        }
        if self.num_clusters > self.num_targets {
            return Err(Error::config("sim.num_clusters", "cannot exceed num_targets"));
        }
        if self.num_targets > self.num_clusters * CLUSTER_CAPACITY {
            return Err(Error::config(
                "sim.num_targets",
                alloc::format!("at most {CLUSTER_CAPACITY} targets per cluster"),
            ));
        }
        for (key, v) in [
            ("sim.sigma_c", self.sigma_c),
            ("sim.sigma_e", self.sigma_e),
            ("sim.sigma_b", self.sigma_b),
            ("sim.lambda_fp", self.lambda_fp),
            ("sim.accel_sigma", self.accel_sigma),
            ("sim.speed_min", self.speed_min),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key, "must be finite and non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.p_miss) {
            return Err(Error::config("sim.p_miss", "must be a probability"));
        }
        if !(self.speed_max.is_finite() && self.speed_max >= self.speed_min) {
            return Err(Error::config("sim.speed_max", "must be at least speed_min"));
        }
        if !(self.box_height > 0.0 && self.box_height < 1.0) {
            return Err(Error::config("sim.box_height", "must be in (0, 1)"));
        }
        if self.box_height * self.image_height * 0.4 >= self.image_width {
            return Err(Error::config("sim.box_height", "targets do not fit the image"));
        }
        if self.frames == 0 || self.embed_dim == 0 {
            return Err(Error::config("sim.frames", "frames and embed_dim must be at least 1"));
        }
        Ok(())
    }

    fn target_size(&self, k: usize) -> (f64, f64) {
        let h = self.box_height * self.image_height * libm::pow(HEIGHT_RATIO, k as f64);
        (0.4 * h, h)
    }
}

/// One generated detection row.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDetection {
    pub record: MotRecord,
    pub embedding: Vec<f64>,
    /// Target that produced it; `None` for a false positive.
    pub source: Option<i64>,
}

/// The generated ground truth, detections and embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    /// Ground-truth rows, ids `1..=num_targets`, sorted by frame then id.
    pub gt: Vec<MotRecord>,
    /// Detections in file order: by frame, shuffled within a frame.
    pub detections: Vec<SimDetection>,
    /// Noise-free appearance of each target (centroid plus offset).
    pub identities: Vec<Vec<f64>>,
    pub cluster_of: Vec<usize>,
}

fn unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn noisy<R: Rng + ?Sized>(base: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    if sigma == 0.0 {
        return base.to_vec();
    }
    let n = Normal::new(0.0, sigma).expect("sigma validated");
    base.iter().map(|b| b + n.sample(rng)).collect()
}

/// Generates a scenario. Deterministic for a given spec.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (iw, ih) = (spec.image_width, spec.image_height);

    let centroids: Vec<Vec<f64>> = (0..spec.num_clusters).map(|_| unit_vector(spec.embed_dim, &mut rng)).collect();
    let cluster_of: Vec<usize> = (0..spec.num_targets).map(|k| k % spec.num_clusters).collect();
    let identities: Vec<Vec<f64>> = cluster_of
        .iter()
        .map(|&c| {
            let dir = unit_vector(spec.embed_dim, &mut rng);
            centroids[c].iter().zip(&dir).map(|(a, d)| a + spec.sigma_c * d).collect()
        })
        .collect();

    struct Mover {
        cx: f64,
        cy: f64,
        vx: f64,
        vy: f64,
        w: f64,
        h: f64,
    }
    let mut movers: Vec<Mover> = (0..spec.num_targets)
        .map(|k| {
            let (w, h) = spec.target_size(k);
            let cx = rng.random_range(w / 2.0..=iw - w / 2.0);
            let cy = rng.random_range(h / 2.0..=(ih - h / 2.0).max(h / 2.0));
            let speed = rng.random_range(spec.speed_min..=spec.speed_max);
            let angle = rng.random_range(0.0..core::f64::consts::TAU);
            Mover {
                cx,
                cy,
                vx: speed * libm::cos(angle),
                vy: speed * libm::sin(angle),
                w,
                h,
            }
        })
        .collect();

    let accel = (spec.accel_sigma > 0.0).then(|| Normal::new(0.0, spec.accel_sigma).expect("validated"));
    let jitter = (spec.sigma_b > 0.0).then(|| Normal::new(0.0, spec.sigma_b).expect("validated"));
    let fp_count = (spec.lambda_fp > 0.0).then(|| Poisson::new(spec.lambda_fp).expect("validated"));
    let (min_h, max_h) = (spec.target_size(spec.num_targets - 1).1, spec.target_size(0).1);

    let mut gt = Vec::new();
    let mut detections = Vec::new();
    for frame in 1..=spec.frames {
        if frame > 1 {
            for m in movers.iter_mut() {
                if let Some(a) = &accel {
                    m.vx += a.sample(&mut rng);
                    m.vy += a.sample(&mut rng);
                    let s = libm::hypot(m.vx, m.vy);
                    let target = s.clamp(spec.speed_min, spec.speed_max);
                    if s > 1e-12 {
                        m.vx *= target / s;
                        m.vy *= target / s;
                    }
                }
                m.cx += m.vx;
                m.cy += m.vy;
                reflect(&mut m.cx, &mut m.vx, m.w / 2.0, iw - m.w / 2.0);
                reflect(&mut m.cy, &mut m.vy, m.h / 2.0, ih - m.h / 2.0);
            }
        }
        let mut frame_dets = Vec::new();
        for (k, m) in movers.iter().enumerate() {
            let id = k as i64 + 1;
            let bbox = BBox::from_center(m.cx, m.cy, m.w, m.h);
            gt.push(MotRecord::new(frame, id, bbox, 1.0));
            if rng.random::<f64>() < spec.p_miss {
                continue;
            }
            let det_box = match &jitter {
                Some(j) => BBox::new(
                    bbox.left + j.sample(&mut rng),
                    bbox.top + j.sample(&mut rng),
                    (bbox.width + j.sample(&mut rng)).max(1.0),
                    (bbox.height + j.sample(&mut rng)).max(1.0),
                ),
                None => bbox,
            };
            frame_dets.push(SimDetection {
                record: MotRecord::new(frame, -1, det_box, 1.0),
                embedding: noisy(&identities[k], spec.sigma_e, &mut rng),
                source: Some(id),
            });
        }
        let n_fp = fp_count.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
        for _ in 0..n_fp {
            let h = rng.random_range(min_h..=max_h);
            let w = 0.4 * h;
            let bbox = BBox::new(rng.random_range(0.0..=iw - w), rng.random_range(0.0..=(ih - h).max(0.0)), w, h);
            frame_dets.push(SimDetection {
                record: MotRecord::new(frame, -1, bbox, 1.0),
                embedding: unit_vector(spec.embed_dim, &mut rng),
                source: None,
            });
        }
        frame_dets.shuffle(&mut rng);
        detections.extend(frame_dets);
    }
    Ok(Scenario {
        spec: spec.clone(),
        gt,
        detections,
        identities,
        cluster_of,
    })
}

fn reflect(pos: &mut f64, vel: &mut f64, lo: f64, hi: f64) {
    if hi <= lo {
        *pos = lo;
        *vel = 0.0;
        return;
    }
    // a few bounces cover any speed below the span width
    for _ in 0..4 {
        if *pos < lo {
            *pos = 2.0 * lo - *pos;
            *vel = -*vel;
        } else if *pos > hi {
            *pos = 2.0 * hi - *pos;
            *vel = -*vel;
        } else {
            return;
        }
    }
    *pos = pos.clamp(lo, hi);
}

impl Scenario {
    /// Detections paired with their frame, in file order.
    pub fn frame_detections(&self) -> Vec<(u32, Detection)> {
        self.detections
            .iter()
            .map(|d| {
                (
                    d.record.frame,
                    Detection {
                        bbox: d.record.bbox,
                        conf: d.record.conf,
                        embedding: d.embedding.clone(),
                    },
                )
            })
            .collect()
    }

    /// Detection rows grouped per frame, in file order.
    pub fn detections_by_frame(&self) -> BTreeMap<u32, Vec<Detection>> {
        let mut out: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
        for (f, d) in self.frame_detections() {
            out.entry(f).or_default().push(d);
        }
        out
    }

    /// Training view labeled by the generator's own knowledge of which target
    /// produced each detection.
    pub fn training_sequence(&self, name: &str) -> TrainingSequence {
        let mut tracks: BTreeMap<i64, Vec<Observation>> = BTreeMap::new();
        let mut clutter = Vec::new();
        for d in &self.detections {
            let o = Observation {
                frame: d.record.frame,
                bbox: d.record.bbox,
                embedding: d.embedding.clone(),
            };
            match d.source {
                Some(id) => tracks.entry(id).or_default().push(o),
                None => clutter.push(o),
            }
        }
        TrainingSequence {
            name: name.into(),
            image_width: self.spec.image_width,
            image_height: self.spec.image_height,
            tracks: tracks
                .into_iter()
                .map(|(id, observations)| LabeledTrack { id, observations })
                .collect(),
            clutter,
        }
    }

    /// Embedding a detector would produce for an arbitrary box: the identity of
    /// the best-overlapping target plus noise, or a random direction when no
    /// target overlaps by at least half.
    pub fn embed_box<R: Rng + ?Sized>(&self, frame: u32, bbox: &BBox, rng: &mut R) -> Vec<f64> {
        let best = self
            .gt
            .iter()
            .filter(|r| r.frame == frame)
            .map(|r| (r.bbox.iou(bbox), r.id))
            .filter(|(iou, _)| *iou >= 0.5)
            .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        match best {
            Some((_, id)) => noisy(&self.identities[(id - 1) as usize], self.spec.sigma_e, rng),
            None => unit_vector(self.spec.embed_dim, rng),
        }
    }
}
