use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trackpool_core::metrics::{clear_mot, evaluate, hungarian, idf1, match_frame, EvalReport};
use trackpool_core::record::MotRecord;
use trackpool_core::BBox;

/// Exhaustive oracle: (number of allowed pairs, min total cost) over all
/// injections of the smaller side.
fn brute_force(cost: &[Vec<f64>]) -> (usize, f64) {
    let rows = cost.len();
    let cols = cost[0].len();
    let (n, m, t) = if rows <= cols { (rows, cols, false) } else { (cols, rows, true) };
    let at = |i: usize, j: usize| if t { cost[j][i] } else { cost[i][j] };
    let mut best = (0usize, f64::INFINITY);
    let mut perm: Vec<usize> = Vec::new();
    fn rec(
        i: usize,
        n: usize,
        m: usize,
        used: &mut Vec<bool>,
        perm: &mut Vec<usize>,
        at: &dyn Fn(usize, usize) -> f64,
        best: &mut (usize, f64),
    ) {
        if i == n {
            let mut cnt = 0;
            let mut c = 0.0;
            for (r, &col) in perm.iter().enumerate() {
                let v = at(r, col);
                if v.is_finite() {
                    cnt += 1;
                    c += v;
                }
            }
            if cnt > best.0 || (cnt == best.0 && c < best.1) {
                *best = (cnt, c);
            }
            return;
        }
        for j in 0..m {
            if !used[j] {
                used[j] = true;
                perm.push(j);
                rec(i + 1, n, m, used, perm, at, best);
                perm.pop();
                used[j] = false;
            }
        }
    }
    let mut used = vec![false; m];
    rec(0, n, m, &mut used, &mut perm, &at, &mut best);
    if best.0 == 0 {
        best.1 = 0.0;
    }
    best
}

#[test]
fn hungarian_equals_brute_force_up_to_7x7() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..500 {
        let rows = rng.random_range(1..=7);
        let cols = rng.random_range(1..=7);
        let forbid = if trial % 3 == 0 { 0.3 } else { 0.0 };
        let cost: Vec<Vec<f64>> = (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| {
                        if rng.random::<f64>() < forbid {
                            f64::INFINITY
                        } else if trial % 5 == 0 {
                            rng.random_range(0..4) as f64
                        } else {
                            rng.random_range(-5.0..10.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let got = hungarian(&cost).unwrap();
        let (cnt, best) = brute_force(&cost);
        assert_eq!(got.pairs.len(), cnt, "trial {trial}: {cost:?}");
        assert!((got.cost - best).abs() < 1e-9, "trial {trial}: {} vs {best}", got.cost);
        let mut r: Vec<_> = got.pairs.iter().map(|p| p.0).collect();
        let mut c: Vec<_> = got.pairs.iter().map(|p| p.1).collect();
        r.dedup();
        c.sort_unstable();
        c.dedup();
        assert_eq!(r.len(), got.pairs.len());
        assert_eq!(c.len(), got.pairs.len());
    }
}

fn rec(frame: u32, id: i64, left: f64) -> MotRecord {
    MotRecord::new(frame, id, BBox::new(left, 0.0, 10.0, 10.0), 1.0)
}

fn single_track(frames: std::ops::RangeInclusive<u32>, id: i64) -> Vec<MotRecord> {
    frames.map(|f| rec(f, id, 20.0 * f as f64)).collect()
}

#[test]
fn perfect_tracking() {
    let gt: Vec<_> = single_track(1..=10, 1)
        .into_iter()
        .chain(single_track(1..=10, 2).into_iter().map(|mut r| {
            r.bbox.top = 100.0;
            r
        }))
        .collect();
    let c = clear_mot(&gt, &gt).unwrap();
    assert_eq!(c.mota, 1.0);
    assert_eq!((c.fp, c.fn_, c.idsw, c.frag), (0, 0, 0, 0));
    assert_eq!(c.mt, 2);
    assert_eq!(idf1(&gt, &gt).unwrap().idf1, 1.0);
}

#[test]
fn mid_track_id_switch() {
    let gt = single_track(1..=10, 1);
    let pred: Vec<_> = gt
        .iter()
        .map(|r| MotRecord {
            id: if r.frame >= 6 { 8 } else { 7 },
            ..*r
        })
        .collect();
    let c = clear_mot(&gt, &pred).unwrap();
    assert_eq!(c.idsw, 1);
    assert!((c.mota - 0.9).abs() < 1e-15);
    // split identity: each predicted id covers 5 of 10 frames
    let ids = idf1(&gt, &pred).unwrap();
    assert!((ids.idf1 - 0.5).abs() < 1e-15);
    assert_eq!((ids.idtp, ids.idfp, ids.idfn), (5, 5, 5));
}

#[test]
fn missing_middle_frames() {
    let gt = single_track(1..=10, 1);
    let pred: Vec<_> = gt.iter().filter(|r| !(4..=6).contains(&r.frame)).copied().collect();
    let c = clear_mot(&gt, &pred).unwrap();
    assert_eq!((c.fn_, c.frag, c.idsw, c.fp), (3, 1, 0, 0));
    assert_eq!((c.mt, c.ml), (0, 0));
    assert!((c.mota - 0.7).abs() < 1e-15);
}

#[test]
fn no_predictions() {
    let gt = single_track(1..=10, 1);
    let ids = idf1(&gt, &[]).unwrap();
    assert_eq!((ids.idf1, ids.idr), (0.0, 0.0));
    let c = clear_mot(&gt, &[]).unwrap();
    assert_eq!((c.fn_, c.ml), (10, 1));
}

#[test]
fn empty_ground_truth_is_an_error() {
    assert!(clear_mot(&[], &single_track(1..=2, 1)).is_err());
    assert!(idf1(&[], &[]).is_err());
}

#[test]
fn match_frame_cases() {
    let b = |l: f64| BBox::new(l, 0.0, 10.0, 10.0);
    // identical sets, no history
    let gt = vec![(1, b(0.0)), (2, b(50.0))];
    let m = match_frame(&gt, &gt, &BTreeMap::new()).unwrap();
    assert_eq!(m, vec![(0, 0), (1, 1)]);
    // disjoint
    let far = vec![(9, b(500.0))];
    assert!(match_frame(&gt, &far, &BTreeMap::new()).unwrap().is_empty());

    // continuity: held pair at IoU 0.55 survives a 0.6 alternative
    let s55 = 4.5 / 1.55;
    let gt = vec![(1, b(0.0))];
    let preds = vec![(10, b(s55)), (11, b(-2.5))];
    assert!((b(0.0).iou(&b(s55)) - 0.55).abs() < 1e-12);
    assert!((b(0.0).iou(&b(-2.5)) - 0.6).abs() < 1e-12);
    let fresh = match_frame(&gt, &preds, &BTreeMap::new()).unwrap();
    assert_eq!(fresh, vec![(0, 1)]);
    let held = match_frame(&gt, &preds, &BTreeMap::from([(1, 10)])).unwrap();
    assert_eq!(held, vec![(0, 0)]);

    // and through clear_mot: frame 1 establishes 1 -> 10, frame 2 keeps it
    let gt_rows = vec![rec(1, 1, 0.0), rec(2, 1, 0.0)];
    let pred_rows = vec![rec(1, 10, 0.0), rec(2, 10, s55), rec(2, 11, -2.5)];
    let c = clear_mot(&gt_rows, &pred_rows).unwrap();
    assert_eq!((c.idsw, c.fp), (0, 1));
}

fn random_scene(rng: &mut ChaCha8Rng) -> (Vec<MotRecord>, Vec<MotRecord>) {
    let mut gt = Vec::new();
    let mut pred = Vec::new();
    for id in 0..4 {
        let y = 40.0 * id as f64;
        for f in 1..=20u32 {
            let bb = BBox::new(3.0 * f as f64, y, 20.0, 30.0);
            gt.push(MotRecord::new(f, id, bb, 1.0));
            if rng.random::<f64>() < 0.8 {
                let pid = if rng.random::<f64>() < 0.1 { id + 10 } else { id + 100 };
                let j = BBox::new(bb.left + rng.random_range(-3.0..3.0), bb.top, 20.0, 30.0);
                pred.push(MotRecord::new(f, pid, j, 1.0));
            }
        }
    }
    (gt, pred)
}

#[test]
fn relabelling_ids_changes_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let (gt, pred) = random_scene(&mut rng);
        let relabel = |rows: &[MotRecord], k: i64| -> Vec<MotRecord> {
            rows.iter().map(|r| MotRecord { id: 1000 - r.id * k, ..*r }).collect()
        };
        let a = evaluate("s", &gt, &pred).unwrap();
        let b = evaluate("s", &relabel(&gt, 3), &relabel(&pred, 7)).unwrap();
        assert_eq!(a.clear, b.clear);
        assert_eq!(a.identity, b.identity);
    }
}

#[test]
fn injected_false_positive_never_raises_mota() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let (gt, mut pred) = random_scene(&mut rng);
        let before = clear_mot(&gt, &pred).unwrap().mota;
        pred.push(MotRecord::new(rng.random_range(1..=20), 999, BBox::new(900.0, 900.0, 5.0, 5.0), 1.0));
        assert!(clear_mot(&gt, &pred).unwrap().mota <= before);
    }
}

#[test]
fn self_identity_is_perfect() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let (gt, _) = random_scene(&mut rng);
        assert_eq!(idf1(&gt, &gt).unwrap().idf1, 1.0);
    }
}

#[test]
fn aggregate_report() {
    let gt = single_track(1..=10, 1);
    let s = evaluate("a", &gt, &gt).unwrap();
    let r = EvalReport::from_sequences(vec![s.clone(), s]).unwrap();
    assert_eq!((r.mota, r.idf1, r.mt, r.num_gt_tracks), (1.0, 1.0, 2, 2));
    assert!(EvalReport::from_sequences(vec![]).is_err());
}
