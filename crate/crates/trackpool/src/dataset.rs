//! Sequence directories in the MOT layout:
//!
//! ```text
//! <dir>/seqinfo.ini
//! <dir>/gt/gt.txt          (optional for tracking)
//! <dir>/det/det.txt
//! <dir>/det/emb.txt
//! <dir>/scenario.json      (only for simulated sequences)
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trackpool_core::record::{Detection, MotRecord};
use trackpool_core::sim::{generate, Scenario, ScenarioSpec};
use trackpool_core::tracker::BoxEmbedder;
use trackpool_core::training::{assign_ids_by_iou, TrainingSequence};
use trackpool_core::BBox;

use crate::embeddings::{read_embeddings, write_embeddings, EmbeddingStore};
use crate::error::{read_to_string, write, Error, Result};
use crate::mot::{format_record, read_mot, write_mot};
use crate::seqinfo::SeqInfo;

pub fn gt_path(dir: &Path) -> PathBuf {
    dir.join("gt").join("gt.txt")
}

pub fn det_path(dir: &Path) -> PathBuf {
    dir.join("det").join("det.txt")
}

pub fn emb_path(dir: &Path) -> PathBuf {
    dir.join("det").join("emb.txt")
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a generated scenario as a sequence directory.
pub fn write_scenario(dir: &Path, name: &str, sc: &Scenario) -> Result<()> {
    create_dir(&dir.join("gt"))?;
    create_dir(&dir.join("det"))?;
    let info = SeqInfo {
        name: name.into(),
        width: sc.spec.image_width,
        height: sc.spec.image_height,
        length: sc.spec.frames,
    };
    write(&dir.join("seqinfo.ini"), info.to_ini())?;
    write(&gt_path(dir), write_mot(&sc.gt))?;
    // detections keep generator order so that indices match the embeddings
    let mut det = String::new();
    let mut store = EmbeddingStore::new(sc.spec.embed_dim);
    let mut index: BTreeMap<u32, usize> = BTreeMap::new();
    for d in &sc.detections {
        det.push_str(&format_record(&d.record));
        det.push('\n');
        let k = index.entry(d.record.frame).or_default();
        store.insert(d.record.frame, *k, d.embedding.clone())?;
        *k += 1;
    }
    write(&det_path(dir), det)?;
    write(&emb_path(dir), write_embeddings(&store))?;
    write(&dir.join("scenario.json"), serde_json::to_string_pretty(&sc.spec)?)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Sequence {
    pub name: String,
    pub info: SeqInfo,
    pub gt: Option<Vec<MotRecord>>,
    pub detections: Vec<MotRecord>,
    pub by_frame: BTreeMap<u32, Vec<Detection>>,
    /// Generator settings when the sequence was simulated.
    pub scenario: Option<ScenarioSpec>,
}

impl Sequence {
    pub fn load(dir: &Path) -> Result<Self> {
        let info = SeqInfo::read(&dir.join("seqinfo.ini"))?;
        let gp = gt_path(dir);
        let gt = if gp.exists() { Some(read_mot(&gp)?) } else { None };
        let detections = read_mot(&det_path(dir))?;
        let store = read_embeddings(&emb_path(dir))?;
        let by_frame = store.attach(&detections)?;
        let sp = dir.join("scenario.json");
        let scenario = if sp.exists() {
            Some(serde_json::from_str(&read_to_string(&sp)?)?)
        } else {
            None
        };
        let name = if info.name.is_empty() {
            dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
        } else {
            info.name.clone()
        };
        Ok(Self {
            name,
            info,
            gt,
            detections,
            by_frame,
            scenario,
        })
    }

    /// Builds an in-memory sequence from a generated scenario.
    pub fn from_scenario(name: &str, sc: &Scenario) -> Self {
        Self {
            name: name.into(),
            info: SeqInfo {
                name: name.into(),
                width: sc.spec.image_width,
                height: sc.spec.image_height,
                length: sc.spec.frames,
            },
            gt: Some(sc.gt.clone()),
            detections: sc.detections.iter().map(|d| d.record).collect(),
            by_frame: sc.detections_by_frame(),
            scenario: Some(sc.spec.clone()),
        }
    }

    /// Last frame with either a detection or a ground-truth row.
    pub fn last_frame(&self) -> u32 {
        let det = self.by_frame.keys().next_back().copied().unwrap_or(0);
        let gt = self.gt.iter().flatten().map(|r| r.frame).max().unwrap_or(0);
        det.max(gt).max(self.info.length)
    }

    /// Training view: detections labeled with ground-truth ids by IoU.
    pub fn training_sequence(&self) -> Result<TrainingSequence> {
        let gt = self
            .gt
            .as_ref()
            .ok_or_else(|| Error::Integrity(format!("sequence `{}` has no ground truth", self.name)))?;
        let dets: Vec<(u32, Detection)> = self
            .by_frame
            .iter()
            .flat_map(|(f, ds)| ds.iter().map(move |d| (*f, d.clone())))
            .collect();
        let labeled = assign_ids_by_iou(gt, &dets)?;
        Ok(TrainingSequence {
            name: self.name.clone(),
            image_width: self.info.width,
            image_height: self.info.height,
            tracks: labeled.tracks,
            clutter: labeled.clutter,
        })
    }

    /// Embedding source for extension boxes: the generator when the sequence
    /// was simulated, otherwise none.
    pub fn embedder(&self, seed: u64) -> Result<Option<SimEmbedder>> {
        match &self.scenario {
            Some(spec) => Ok(Some(SimEmbedder::new(generate(spec)?, seed))),
            None => Ok(None),
        }
    }
}

/// Asks the generator what a detector would see in an arbitrary box.
pub struct SimEmbedder {
    scenario: Scenario,
    rng: ChaCha8Rng,
}

impl SimEmbedder {
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        Self {
            scenario,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl BoxEmbedder for SimEmbedder {
    fn embed_box(&mut self, frame: u32, bbox: &BBox) -> Option<Vec<f64>> {
        Some(self.scenario.embed_box(frame, bbox, &mut self.rng))
    }
}
