//! Motion gating and greedy assignment.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::BBox;

/// Closed IoU gate: `IoU >= tau`.
pub fn motion_gate(predicted: &BBox, detection: &BBox, tau: f64) -> bool {
    predicted.iou(detection) >= tau
}

/// Greedy assignment from the highest score down.
///
/// `scores[i][j]` is the match probability of track `i` (tracks ordered by
/// id) and detection `j`; `None` marks a gated pair. Pairs are visited by
/// descending score, then ascending track, then ascending detection, and a
/// pair is accepted when its score reaches `threshold` and neither side is
/// taken yet. Returns `(track, detection)` pairs sorted by track.
pub fn greedy_associate(scores: &[Vec<Option<f64>>], threshold: f64) -> Vec<(usize, usize)> {
    let n = scores.first().map_or(0, Vec::len);
    let mut pairs: Vec<(f64, usize, usize)> = scores
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(j, s)| s.filter(|v| *v >= threshold).map(|v| (v, i, j)))
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut row_used = vec![false; scores.len()];
    let mut col_used = vec![false; n];
    let mut out = Vec::new();
    for (_, i, j) in pairs {
        if !row_used[i] && !col_used[j] {
            row_used[i] = true;
            col_used[j] = true;
            out.push((i, j));
        }
    }
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(m: &[&[f64]]) -> Vec<Vec<Option<f64>>> {
        m.iter().map(|r| r.iter().map(|v| Some(*v)).collect()).collect()
    }

    #[test]
    fn hand_cases() {
        assert_eq!(greedy_associate(&full(&[&[0.9, 0.6], &[0.8, 0.7]]), 0.5), vec![(0, 0), (1, 1)]);
        assert!(greedy_associate(&full(&[&[0.4]]), 0.5).is_empty());
        assert_eq!(greedy_associate(&full(&[&[0.9, 0.9], &[0.9, 0.9]]), 0.5), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn masked_pairs_are_skipped() {
        let s = vec![vec![None, Some(0.6)], vec![Some(0.7), Some(0.95)]];
        assert_eq!(greedy_associate(&s, 0.5), vec![(1, 1)]);
    }

    #[test]
    fn gate_boundary_is_closed() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        assert!(motion_gate(&a, &a, 0.1));
        assert!(!motion_gate(&a, &BBox::new(20.0, 0.0, 10.0, 10.0), 0.1));
        // overlap 5x10 over union 150 -> IoU 1/3
        let b = BBox::new(5.0, 0.0, 10.0, 10.0);
        let iou = a.iou(&b);
        assert!(motion_gate(&a, &b, iou));
        assert!(!motion_gate(&a, &b, iou + 1e-12));
    }
}
