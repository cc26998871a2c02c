use alloc::string::String;
use alloc::vec::Vec;

use super::clear::{clear_mot, ClearMot};
use super::identity::{idf1, IdScores};
use crate::error::{Error, Result};
use crate::record::MotRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceReport {
    pub name: String,
    pub clear: ClearMot,
    pub identity: IdScores,
}

pub fn evaluate(name: &str, gt: &[MotRecord], pred: &[MotRecord]) -> Result<SequenceReport> {
    Ok(SequenceReport {
        name: name.into(),
        clear: clear_mot(gt, pred)?,
        identity: idf1(gt, pred)?,
    })
}

/// Scores pooled over several sequences plus the per-sequence breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mota: f64,
    pub idf1: f64,
    pub idp: f64,
    pub idr: f64,
    pub fp: usize,
    pub fn_: usize,
    pub idsw: usize,
    pub frag: usize,
    pub mt: usize,
    pub ml: usize,
    pub num_gt_tracks: usize,
    pub sequences: Vec<SequenceReport>,
}

impl EvalReport {
    pub fn from_sequences(sequences: Vec<SequenceReport>) -> Result<Self> {
        if sequences.is_empty() {
            return Err(Error::Eval("no sequences to report".into()));
        }
        let sum = |f: fn(&SequenceReport) -> usize| sequences.iter().map(f).sum::<usize>();
        let num_gt = sum(|s| s.clear.num_gt);
        let (fp, fn_, idsw) = (sum(|s| s.clear.fp), sum(|s| s.clear.fn_), sum(|s| s.clear.idsw));
        let idtp = sum(|s| s.identity.idtp);
        let idfp = sum(|s| s.identity.idfp);
        let idfn = sum(|s| s.identity.idfn);
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        Ok(Self {
            mota: 1.0 - (fp + fn_ + idsw) as f64 / num_gt as f64,
            idf1: ratio(2 * idtp, 2 * idtp + idfp + idfn),
            idp: ratio(idtp, idtp + idfp),
            idr: ratio(idtp, idtp + idfn),
            fp,
            fn_,
            idsw,
            frag: sum(|s| s.clear.frag),
            mt: sum(|s| s.clear.mt),
            ml: sum(|s| s.clear.ml),
            num_gt_tracks: sum(|s| s.clear.num_gt_tracks),
            sequences,
        })
    }

    pub fn mt_pct(&self) -> f64 {
        100.0 * self.mt as f64 / self.num_gt_tracks.max(1) as f64
    }

    pub fn ml_pct(&self) -> f64 {
        100.0 * self.ml as f64 / self.num_gt_tracks.max(1) as f64
    }
}
