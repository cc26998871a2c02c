use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::clear::by_frame;
use super::hungarian::hungarian;
use super::IOU_THRESHOLD;
use crate::error::{Error, Result};
use crate::record::MotRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct IdScores {
    pub idf1: f64,
    pub idp: f64,
    pub idr: f64,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

/// Identity precision/recall/F1 under the one-to-one trajectory pairing that
/// maximises identity true positives.
pub fn idf1(gt: &[MotRecord], pred: &[MotRecord]) -> Result<IdScores> {
    if gt.is_empty() {
        return Err(Error::Eval("ground truth is empty".into()));
    }
    let index = |rows: &[MotRecord]| -> BTreeMap<i64, usize> {
        let mut ids: Vec<i64> = rows.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter().enumerate().map(|(i, id)| (id, i)).collect()
    };
    let gidx = index(gt);
    let pidx = index(pred);
    let mut overlap = alloc::vec![alloc::vec![0usize; pidx.len()]; gidx.len()];
    for (gts, preds) in by_frame(gt, pred).values() {
        for (gid, gb) in gts {
            for (pid, pb) in preds {
                if gb.iou(pb) >= IOU_THRESHOLD {
                    overlap[gidx[gid]][pidx[pid]] += 1;
                }
            }
        }
    }
    let idtp = if pidx.is_empty() {
        0
    } else {
        let cost: Vec<Vec<f64>> = overlap
            .iter()
            .map(|row| row.iter().map(|&c| -(c as f64)).collect())
            .collect();
        hungarian(&cost)?
            .pairs
            .iter()
            .map(|&(g, p)| overlap[g][p])
            .sum()
    };
    let idfn = gt.len() - idtp;
    let idfp = pred.len() - idtp;
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(IdScores {
        idf1: ratio(2 * idtp, 2 * idtp + idfp + idfn),
        idp: ratio(idtp, idtp + idfp),
        idr: ratio(idtp, idtp + idfn),
        idtp,
        idfp,
        idfn,
    })
}
