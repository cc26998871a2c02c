//! Near-online smoothing of finished tracks.

use alloc::vec::Vec;

use super::engine::{OutputRow, Source};
use crate::geometry::BBox;

/// Boxes between two detections, strictly inside `(a.frame, b.frame)`,
/// linearly interpolated in all four coordinates.
pub(crate) fn interpolate(id: i64, a: &OutputRow, b: &OutputRow) -> Vec<OutputRow> {
    let span = f64::from(b.frame - a.frame);
    (a.frame + 1..b.frame)
        .map(|f| OutputRow {
            frame: f,
            id,
            bbox: BBox::lerp(&a.bbox, &b.bbox, f64::from(f - a.frame) / span),
            source: Source::Interpolated,
        })
        .collect()
}

/// Smooths one track's rows (frames strictly increasing).
///
/// Every frame strictly between two consecutive detected rows is replaced
/// by linear interpolation between them, and rows after the last detection
/// are dropped.
pub fn smooth_track(rows: &[OutputRow]) -> Vec<OutputRow> {
    let detected: Vec<&OutputRow> = rows.iter().filter(|r| r.source == Source::Detected).collect();
    let mut out = Vec::with_capacity(rows.len());
    for (k, d) in detected.iter().enumerate() {
        if k > 0 {
            out.extend(interpolate(d.id, detected[k - 1], d));
        }
        out.push(**d);
    }
    out
}

/// Applies [`smooth_track`] to every track of a result set. Rows are grouped
/// by id; the output is sorted by `(frame, id)`.
pub fn smooth_tracks(rows: &[OutputRow]) -> Vec<OutputRow> {
    let mut by_id: alloc::collections::BTreeMap<i64, Vec<OutputRow>> = Default::default();
    for r in rows {
        by_id.entry(r.id).or_default().push(*r);
    }
    let mut out: Vec<OutputRow> = by_id
        .values_mut()
        .flat_map(|v| {
            v.sort_by_key(|r| r.frame);
            smooth_track(v)
        })
        .collect();
    out.sort_by_key(|r| (r.frame, r.id));
    out
}
