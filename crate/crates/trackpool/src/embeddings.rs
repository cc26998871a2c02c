//! Appearance embedding files.
//!
//! A `dim=D` header line, then one line per detection:
//! `frame,det_index,e_0,...,e_{D-1}`, where `det_index` is the 0-based
//! position of the detection among the rows of its frame in the detection
//! file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use trackpool_core::record::{Detection, MotRecord};

use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    map: BTreeMap<(u32, usize), Vec<f64>>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            map: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, frame: u32, index: usize) -> Option<&[f64]> {
        self.map.get(&(frame, index)).map(Vec::as_slice)
    }

    pub fn insert(&mut self, frame: u32, index: usize, v: Vec<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Integrity(format!(
                "embedding ({frame},{index}) has length {}, expected {}",
                v.len(),
                self.dim
            )));
        }
        if self.map.insert((frame, index), v).is_some() {
            return Err(Error::Integrity(format!("duplicate embedding for ({frame},{index})")));
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, usize, &[f64])> {
        self.map.iter().map(|(&(f, i), v)| (f, i, v.as_slice()))
    }

    /// Checks that the store holds exactly one embedding for each detection.
    pub fn check_total(&self, detections: &[MotRecord]) -> Result<()> {
        let keys = detection_keys(detections);
        for (k, key) in keys.iter().enumerate() {
            if !self.map.contains_key(key) {
                return Err(Error::Integrity(format!(
                    "detection {} (frame {}, index {}) has no embedding",
                    k + 1,
                    key.0,
                    key.1
                )));
            }
        }
        if self.map.len() != keys.len() {
            let known: std::collections::BTreeSet<_> = keys.into_iter().collect();
            let stray = self.map.keys().find(|k| !known.contains(k)).copied().unwrap_or_default();
            return Err(Error::Integrity(format!(
                "embedding ({},{}) has no matching detection",
                stray.0, stray.1
            )));
        }
        Ok(())
    }

    /// Detections grouped by frame with their embeddings attached.
    pub fn attach(&self, detections: &[MotRecord]) -> Result<BTreeMap<u32, Vec<Detection>>> {
        self.check_total(detections)?;
        let mut out: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
        for (r, key) in detections.iter().zip(detection_keys(detections)) {
            out.entry(r.frame).or_default().push(Detection {
                bbox: r.bbox,
                conf: r.conf,
                embedding: self.map[&key].clone(),
            });
        }
        Ok(out)
    }
}

/// `(frame, index within frame)` of every detection, in file order.
pub fn detection_keys(detections: &[MotRecord]) -> Vec<(u32, usize)> {
    let mut seen: BTreeMap<u32, usize> = BTreeMap::new();
    detections
        .iter()
        .map(|r| {
            let n = seen.entry(r.frame).or_default();
            *n += 1;
            (r.frame, *n - 1)
        })
        .collect()
}

pub fn parse_embeddings(text: &str) -> Result<EmbeddingStore> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hl, header) = lines.next().ok_or_else(|| Error::parse(1, "missing `dim=D` header"))?;
    let dim = header
        .trim()
        .strip_prefix("dim=")
        .and_then(|d| d.trim().parse::<usize>().ok())
        .filter(|d| *d > 0)
        .ok_or_else(|| Error::parse(hl + 1, "missing `dim=D` header"))?;
    let mut store = EmbeddingStore::new(dim);
    for (k, l) in lines {
        let line = k + 1;
        let fields: Vec<&str> = l.split(',').map(str::trim).collect();
        if fields.len() != dim + 2 {
            return Err(Error::parse(
                line,
                format!("expected {} values for dim={dim}, found {}", dim, fields.len().saturating_sub(2)),
            ));
        }
        let frame = fields[0]
            .parse::<u32>()
            .ok()
            .filter(|f| *f >= 1)
            .ok_or_else(|| Error::parse(line, format!("bad frame `{}`", fields[0])))?;
        let index = fields[1]
            .parse::<usize>()
            .map_err(|_| Error::parse(line, format!("bad detection index `{}`", fields[1])))?;
        let v = fields[2..]
            .iter()
            .map(|f| match f.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(Error::parse(line, format!("`{f}` is not a finite number"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        store.insert(frame, index, v).map_err(|e| match e {
            Error::Integrity(m) => Error::Integrity(format!("line {line}: {m}")),
            other => other,
        })?;
    }
    Ok(store)
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingStore> {
    parse_embeddings(&read_to_string(path)?).map_err(|e| e.in_file(path))
}

pub fn write_embeddings(store: &EmbeddingStore) -> String {
    let mut out = format!("dim={}\n", store.dim);
    for (f, i, v) in store.iter() {
        let _ = write!(out, "{f},{i}");
        for x in v {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}
