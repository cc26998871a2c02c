use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::hungarian::hungarian;
use super::IOU_THRESHOLD;
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::record::MotRecord;

/// Correspondences of one frame as `(gt index, prediction index)`.
pub type FrameMatch = Vec<(usize, usize)>;

/// Matches ground truth to predictions in one frame.
///
/// Pairs from `previous` (gt id -> predicted id) that are both present and
/// still overlap by at least [`IOU_THRESHOLD`] are kept first; the rest are
/// matched by Hungarian assignment on `1 - IoU`, forbidding pairs below the
/// threshold.
pub fn match_frame(gt: &[(i64, BBox)], pred: &[(i64, BBox)], previous: &BTreeMap<i64, i64>) -> Result<FrameMatch> {
    let mut gt_used = vec![false; gt.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut out = Vec::new();
    for (gi, (gid, gbox)) in gt.iter().enumerate() {
        let Some(pid) = previous.get(gid) else { continue };
        if let Some(pi) = pred.iter().position(|(id, _)| id == pid) {
            if !pred_used[pi] && gbox.iou(&pred[pi].1) >= IOU_THRESHOLD {
                gt_used[gi] = true;
                pred_used[pi] = true;
                out.push((gi, pi));
            }
        }
    }
    let free_gt: Vec<usize> = (0..gt.len()).filter(|&i| !gt_used[i]).collect();
    let free_pred: Vec<usize> = (0..pred.len()).filter(|&i| !pred_used[i]).collect();
    if !free_gt.is_empty() && !free_pred.is_empty() {
        let cost: Vec<Vec<f64>> = free_gt
            .iter()
            .map(|&g| {
                free_pred
                    .iter()
                    .map(|&p| {
                        let iou = gt[g].1.iou(&pred[p].1);
                        if iou >= IOU_THRESHOLD {
                            1.0 - iou
                        } else {
                            f64::INFINITY
                        }
                    })
                    .collect()
            })
            .collect();
        for (r, c) in hungarian(&cost)?.pairs {
            out.push((free_gt[r], free_pred[c]));
        }
    }
    out.sort_unstable();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClearMot {
    pub num_gt: usize,
    pub num_matches: usize,
    pub fp: usize,
    pub fn_: usize,
    pub idsw: usize,
    pub frag: usize,
    pub num_gt_tracks: usize,
    /// Ground-truth tracks covered for at least 80% of their boxes.
    pub mt: usize,
    /// Ground-truth tracks covered for at most 20% of their boxes.
    pub ml: usize,
    pub mota: f64,
}

type FrameRows = (Vec<(i64, BBox)>, Vec<(i64, BBox)>);

pub(crate) fn by_frame(gt: &[MotRecord], pred: &[MotRecord]) -> BTreeMap<u32, FrameRows> {
    let mut frames: BTreeMap<u32, FrameRows> = BTreeMap::new();
    for r in gt {
        frames.entry(r.frame).or_default().0.push((r.id, r.bbox));
    }
    for r in pred {
        frames.entry(r.frame).or_default().1.push((r.id, r.bbox));
    }
    frames
}

/// CLEAR-MOT counts over a whole sequence.
pub fn clear_mot(gt: &[MotRecord], pred: &[MotRecord]) -> Result<ClearMot> {
    if gt.is_empty() {
        return Err(Error::Eval("ground truth is empty".into()));
    }
    let mut last_match: BTreeMap<i64, i64> = BTreeMap::new();
    let mut status: BTreeMap<i64, Vec<bool>> = BTreeMap::new();
    let (mut num_matches, mut fp, mut fn_, mut idsw) = (0, 0, 0, 0);
    for (gts, preds) in by_frame(gt, pred).values() {
        let matches = match_frame(gts, preds, &last_match)?;
        let mut tracked = vec![false; gts.len()];
        for &(g, p) in &matches {
            let (gid, pid) = (gts[g].0, preds[p].0);
            if let Some(&prev) = last_match.get(&gid) {
                if prev != pid {
                    idsw += 1;
                }
            }
            last_match.insert(gid, pid);
            tracked[g] = true;
        }
        for (g, (gid, _)) in gts.iter().enumerate() {
            status.entry(*gid).or_default().push(tracked[g]);
        }
        num_matches += matches.len();
        fn_ += gts.len() - matches.len();
        fp += preds.len() - matches.len();
    }
    let (mut frag, mut mt, mut ml) = (0, 0, 0);
    for s in status.values() {
        let mut seen_tracked = false;
        for w in 0..s.len() {
            if s[w] {
                if seen_tracked && !s[w - 1] {
                    frag += 1;
                }
                seen_tracked = true;
            }
        }
        let ratio = s.iter().filter(|&&t| t).count() as f64 / s.len() as f64;
        if ratio >= 0.8 {
            mt += 1;
        } else if ratio <= 0.2 {
            ml += 1;
        }
    }
    let num_gt = gt.len();
    Ok(ClearMot {
        num_gt,
        num_matches,
        fp,
        fn_,
        idsw,
        frag,
        num_gt_tracks: status.len(),
        mt,
        ml,
        mota: 1.0 - (fn_ + fp + idsw) as f64 / num_gt as f64,
    })
}
