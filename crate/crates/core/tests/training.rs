use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trackpool_core::classifier::{Classifier, HeadMode, ModelConfig};
use trackpool_core::nn::{Backend, FdOptions, Gradients, LstmState, NodeId, Tape};
use trackpool_core::record::{Detection, MotRecord};
use trackpool_core::sim::{generate, ScenarioSpec};
use trackpool_core::training::{
    assign_ids_by_iou, augment_missing, augment_missing_with_rate, batch_loss, build_random_episode, focal_term,
    train, ActualEpisode, FocalWeights, LabeledTrack, LogCollector, LossOptions, Observation, Optimizer, Phase,
    RandomEpisode, RandomEpisodeConfig, TrainConfig, TrainingSequence,
};
use trackpool_core::BBox;

fn model(head: HeadMode, seed: u64) -> Classifier {
    Classifier::new(ModelConfig {
        head,
        init_seed: seed,
        ..ModelConfig::default()
    })
    .unwrap()
}

fn emb(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..32).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn obs(rng: &mut ChaCha8Rng, frame: u32, left: f64) -> Observation {
    Observation {
        frame,
        bbox: BBox::new(left + 3.0 * frame as f64, 40.0, 20.0, 50.0),
        embedding: emb(rng),
    }
}

/// Tracks with ids `1..` and given `(first, last)` frame spans, plus one
/// clutter detection on every third frame.
fn toy_sequence(spans: &[(u32, u32)], seed: u64) -> TrainingSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tracks = spans
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| LabeledTrack {
            id: k as i64 + 1,
            observations: (a..=b).map(|f| obs(&mut rng, f, 60.0 * k as f64)).collect(),
        })
        .collect();
    let last = spans.iter().map(|s| s.1).max().unwrap();
    let clutter = (1..=last).filter(|f| f % 3 == 0).map(|f| obs(&mut rng, f, 400.0)).collect();
    TrainingSequence {
        name: "toy".into(),
        image_width: 640.0,
        image_height: 480.0,
        tracks,
        clutter,
    }
}

// ---------- independent full-BPTT unroll ----------

struct OracleTrack {
    mem: LstmState<NodeId>,
    motion: Option<LstmState<NodeId>>,
}

/// Teacher-forced unroll of a whole sequence on one tape; the objective is
/// the mean over frames of the mean focal loss over all pairs.
fn full_bptt(model: &Classifier, seq: &TrainingSequence, focal: FocalWeights) -> (f64, Gradients) {
    let mut tape = Tape::new(model.params());
    let mut frames: Vec<u32> = seq
        .tracks
        .iter()
        .flat_map(|t| t.observations.iter().map(|o| o.frame))
        .chain(seq.clutter.iter().map(|o| o.frame))
        .collect();
    frames.sort_unstable();
    frames.dedup();
    let mut live: BTreeMap<i64, OracleTrack> = BTreeMap::new();
    let mut frame_losses = Vec::new();
    for f in frames {
        live.retain(|id, _| seq.tracks.iter().any(|t| t.id == *id && t.observations.last().unwrap().frame >= f));
        let mut dets: Vec<(Option<i64>, &Observation)> = Vec::new();
        for t in &seq.tracks {
            if let Some(o) = t.observations.iter().find(|o| o.frame == f) {
                dets.push((Some(t.id), o));
            }
        }
        dets.sort_by_key(|d| d.0);
        dets.extend(seq.clutter.iter().filter(|o| o.frame == f).map(|o| (None, o)));
        let xs: Vec<NodeId> = dets
            .iter()
            .map(|(_, o)| {
                let raw = tape.leaf(o.embedding.clone());
                model.embed(&mut tape, &raw).unwrap()
            })
            .collect();
        let ids: Vec<i64> = live.keys().copied().collect();
        if !ids.is_empty() && !dets.is_empty() {
            let mut terms = Vec::new();
            for (i, id) in ids.iter().enumerate() {
                for (j, (gt, o)) in dets.iter().enumerate() {
                    let mp = model.match_vector(&mut tape, &live[id].mem.h, &xs[j]).unwrap();
                    let others: Vec<NodeId> = ids
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != i)
                        .map(|(_, o)| model.match_vector(&mut tape, &live[o].mem.h, &xs[j]).unwrap())
                        .collect();
                    let mm = model.pool(&mut tape, &others).unwrap();
                    let nb = tape.leaf(o.bbox.normalized(seq.image_width, seq.image_height).to_vec());
                    let feat = live[id]
                        .motion
                        .as_ref()
                        .map(|ms| model.motion_step(&mut tape, ms, &nb).unwrap().0);
                    let z = model.logits(&mut tape, &mp, Some(&mm), feat.as_ref(), None).unwrap();
                    terms.push(tape.focal(&z, *gt == Some(*id), focal).unwrap());
                }
            }
            let w = 1.0 / terms.len() as f64;
            let weighted: Vec<(NodeId, f64)> = terms.into_iter().map(|t| (t, w)).collect();
            frame_losses.push(tape.weighted_sum(&weighted).unwrap());
        }
        for (j, (gt, o)) in dets.iter().enumerate() {
            let Some(id) = gt else { continue };
            let nb = tape.leaf(o.bbox.normalized(seq.image_width, seq.image_height).to_vec());
            let next = match live.get(id) {
                Some(t) => OracleTrack {
                    mem: model.memory_step(&mut tape, &t.mem, &xs[j]).unwrap(),
                    motion: t.motion.as_ref().map(|ms| model.motion_step(&mut tape, ms, &nb).unwrap().1),
                },
                None => OracleTrack {
                    mem: model.memory_init(&mut tape, &xs[j]).unwrap(),
                    motion: model.has_motion().then(|| model.motion_init(&mut tape, &nb).unwrap().1),
                },
            };
            live.insert(*id, next);
        }
    }
    let w = 1.0 / frame_losses.len() as f64;
    let terms: Vec<(NodeId, f64)> = frame_losses.into_iter().map(|t| (t, w)).collect();
    let root = tape.weighted_sum(&terms).unwrap();
    (tape.scalar(root), tape.backward(root).unwrap())
}

fn run_all_segments(
    model: &Classifier,
    seq: &TrainingSequence,
    window: usize,
) -> (Vec<Vec<u32>>, Vec<BTreeMap<i64, trackpool_core::training::CarriedState>>, Vec<(f64, Gradients)>) {
    let mut ep = ActualEpisode::new(seq);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut frames = Vec::new();
    let mut states = Vec::new();
    let mut grads = Vec::new();
    while let Some(seg) = ep.next_segment(seq, model, window, &LossOptions::default(), &mut rng).unwrap() {
        frames.push(seg.frames.clone());
        states.push(ep.states().clone());
        grads.push((seg.loss, seg.grads));
    }
    (frames, states, grads)
}

#[test]
fn untruncated_window_equals_full_bptt() {
    for head in [HeadMode::Joint, HeadMode::AppearanceOnly] {
        let m = model(head, 3);
        let seq = toy_sequence(&[(1, 5), (2, 5), (1, 4)], 11);
        let (oracle_loss, oracle) = full_bptt(&m, &seq, FocalWeights::default());
        for window in [5, 6, 100] {
            let (frames, _, segs) = run_all_segments(&m, &seq, window);
            assert_eq!(frames, vec![vec![1, 2, 3, 4, 5]]);
            let (loss, g) = &segs[0];
            assert!((loss - oracle_loss).abs() < 1e-12);
            let diff = g.max_abs_diff(&oracle);
            assert!(diff < 1e-10, "{head:?} window {window}: {diff}");
            assert!(g.norm() > 0.0);
        }
    }
}

#[test]
fn window_ten_cuts_at_frames_ten_and_twenty() {
    let m = model(HeadMode::Joint, 4);
    let seq = toy_sequence(&[(1, 25), (3, 25), (1, 18), (12, 25)], 12);
    let (frames, states, _) = run_all_segments(&m, &seq, 10);
    let lens: Vec<usize> = frames.iter().map(Vec::len).collect();
    assert_eq!(lens, vec![10, 10, 5]);
    assert_eq!(frames[0].last(), Some(&10));
    assert_eq!(frames[1].first(), Some(&11));
    assert_eq!(frames[1].last(), Some(&20));
    assert_eq!(frames[2], (21..=25).collect::<Vec<_>>());

    // states are continuous: the value at each cut equals the one obtained by
    // running straight through with other windows
    let (_, full_states, _) = run_all_segments(&m, &seq, 25);
    assert_eq!(states[2], full_states[0]);
    let (f5, s5, _) = run_all_segments(&m, &seq, 5);
    assert_eq!(f5.len(), 5);
    assert_eq!(states[0], s5[1]);
    assert_eq!(states[1], s5[3]);
    assert_eq!(states[2], s5[4]);
    // track 3 ended at frame 18 and is gone afterwards
    assert!(states[0].contains_key(&3) && !states[1].contains_key(&3));
}

#[test]
fn truncation_changes_gradients_but_not_states() {
    let m = model(HeadMode::Joint, 5);
    let seq = toy_sequence(&[(1, 12), (1, 12)], 13);
    let (_, _, whole) = run_all_segments(&m, &seq, 12);
    let (_, _, cut) = run_all_segments(&m, &seq, 6);
    let mut sum = Gradients::zeros_like(m.params());
    sum.add_scaled(&cut[0].1, 0.5);
    sum.add_scaled(&cut[1].1, 0.5);
    // the averaged truncated gradient drops the cross-boundary terms
    assert!(sum.max_abs_diff(&whole[0].1) > 1e-9);
}

#[test]
fn batch_counting_and_labels() {
    let seq = toy_sequence(&[(1, 4), (1, 4)], 1);
    let batches = seq.proposal_batches();
    let b2 = batches.iter().find(|b| b.frame == 2).unwrap();
    assert_eq!(b2.len(), 4);
    assert_eq!(b2.num_positive(), 2);
    // frame 3 carries a clutter detection: 2 x 3 pairs, still 2 positives
    let b3 = batches.iter().find(|b| b.frame == 3).unwrap();
    assert_eq!((b3.len(), b3.num_positive()), (6, 2));
    // frame 1 has detections but no live track
    assert!(batches.iter().all(|b| b.frame != 1));
    for b in &batches {
        for (k, y) in b.labels().iter().enumerate() {
            let (i, j) = (k / b.detections.len(), k % b.detections.len());
            let gt = seq.tracks.iter().find(|t| t.id == b.track_ids[i]).unwrap();
            let det_gt = b.detections[j];
            assert_eq!(*y, det_gt == Some(gt.id));
        }
        // at most one positive per detection column
        for j in 0..b.detections.len() {
            assert!((0..b.track_ids.len()).filter(|&i| b.label(i, j)).count() <= 1);
        }
    }
}

#[test]
fn segments_report_batches_consistent_with_ground_truth() {
    let m = model(HeadMode::Joint, 6);
    let seq = toy_sequence(&[(1, 9), (2, 7), (4, 9)], 14);
    let mut ep = ActualEpisode::new(&seq);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut got = Vec::new();
    while let Some(seg) = ep.next_segment(&seq, &m, 4, &LossOptions::default(), &mut rng).unwrap() {
        got.extend(seg.batches);
    }
    assert_eq!(got, seq.proposal_batches());
}

#[test]
fn teacher_forced_trajectory_is_bit_stable() {
    let m = model(HeadMode::Joint, 7);
    let seq = toy_sequence(&[(1, 10), (2, 10)], 15);
    let a = run_all_segments(&m, &seq, 3);
    let b = run_all_segments(&m, &seq, 3);
    assert_eq!(a.1, b.1);
    for (x, y) in a.2.iter().zip(&b.2) {
        assert_eq!(x.0.to_bits(), y.0.to_bits());
        assert_eq!(x.1.max_abs_diff(&y.1), 0.0);
    }
}

// ---------- random episodes ----------

fn rcfg() -> RandomEpisodeConfig {
    RandomEpisodeConfig {
        max_gap: 40,
        n_max: 8,
        augment_missing: true,
        max_retries: 100,
    }
}

#[test]
fn random_episode_caps_tracks_at_n_max() {
    let spans: Vec<(u32, u32)> = (0..12).map(|_| (1, 60)).collect();
    let seq = toy_sequence(&spans, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let ep = build_random_episode(std::slice::from_ref(&seq), &rcfg(), &mut rng).unwrap();
        let labeled = ep.detections.iter().filter(|d| d.0.is_some()).count();
        assert_eq!(labeled, 8);
        assert!(ep.histories.len() <= 8);
        assert!(ep.end - ep.start <= 40);
    }
}

#[test]
fn random_episode_histories_and_labels() {
    let seq = toy_sequence(&[(1, 30), (5, 50), (20, 45), (44, 60)], 3);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..200 {
        let ep = build_random_episode(std::slice::from_ref(&seq), &rcfg(), &mut rng).unwrap();
        assert!(ep.end > ep.start && ep.end - ep.start <= 40);
        for h in &ep.histories {
            assert!(!h.observations.is_empty());
            assert!(h.observations.iter().all(|o| o.frame >= ep.start && o.frame < ep.end));
        }
        // recount positives from the ground truth
        let expected = seq
            .tracks
            .iter()
            .filter(|t| ep.detections.iter().any(|d| d.0 == Some(t.id)))
            .filter(|t| t.observations.iter().any(|o| o.frame >= ep.start && o.frame < ep.end))
            .count();
        let batch = ep.batch();
        assert_eq!(batch.num_positive(), expected);
        assert_eq!(batch.num_positive(), ep.histories.len());
    }
}

#[test]
fn random_episode_fails_without_history() {
    // every track is a single frame: no history is ever possible
    let seq = toy_sequence(&[(3, 3), (7, 7)], 4);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = RandomEpisodeConfig { max_retries: 20, ..rcfg() };
    assert!(build_random_episode(std::slice::from_ref(&seq), &cfg, &mut rng).is_err());
}

#[test]
fn augmentation() {
    let seq = toy_sequence(&[(1, 100)], 5);
    let track = &seq.tracks[0];
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let kept = augment_missing_with_rate(track, 0.1, &mut rng).observations.len();
    // binomial(98, 0.9) + 2 anchors; mean 90.2, sd 3
    assert!((80..=100).contains(&kept), "{kept}");
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    for _ in 0..100 {
        let a = augment_missing_with_rate(track, 0.9, &mut rng);
        assert!(a.observations.len() >= 2);
        assert_eq!(a.observations.first(), track.observations.first());
        assert_eq!(a.observations.last(), track.observations.last());
    }
    let a = augment_missing(track, &mut ChaCha8Rng::seed_from_u64(5));
    let b = augment_missing(track, &mut ChaCha8Rng::seed_from_u64(5));
    assert_eq!(a, b);
    let frac = (0..200)
        .map(|s| augment_missing(track, &mut ChaCha8Rng::seed_from_u64(s)).observations.len())
        .sum::<usize>() as f64
        / 200.0;
    // rate ~ U[0.1, 0.9] has mean 0.5
    assert!((40.0..60.0).contains(&frac), "{frac}");
}

#[test]
fn iou_assignment() {
    let gt_box = BBox::new(0.0, 0.0, 10.0, 10.0);
    let gt = vec![MotRecord::new(1, 7, gt_box, 1.0), MotRecord::new(1, 8, BBox::new(100.0, 0.0, 10.0, 10.0), 1.0)];
    let det = |b: BBox| Detection {
        bbox: b,
        conf: 1.0,
        embedding: vec![0.0; 2],
    };
    // exact copies
    let exact: Vec<(u32, Detection)> = gt.iter().map(|r| (1, det(r.bbox))).collect();
    let noisy = assign_ids_by_iou(&gt, &exact).unwrap();
    assert_eq!(noisy.tracks.iter().map(|t| t.id).collect::<Vec<_>>(), vec![7, 8]);
    assert!(noisy.clutter.is_empty());
    for t in &noisy.tracks {
        let g = gt.iter().find(|r| r.id == t.id).unwrap();
        assert_eq!(t.observations[0].bbox, g.bbox);
    }
    // shifted by s so IoU = (10-s)/(10+s) = 0.6 -> s = 2.5; and 0.3 -> s = 70/13
    let s6 = BBox::new(2.5, 0.0, 10.0, 10.0);
    let s3 = BBox::new(100.0 + 70.0 / 13.0, 0.0, 10.0, 10.0);
    assert!((gt_box.iou(&s6) - 0.6).abs() < 1e-12);
    assert!((gt[1].bbox.iou(&s3) - 0.3).abs() < 1e-12);
    let noisy = assign_ids_by_iou(&gt, &[(1, det(s6)), (1, det(s3))]).unwrap();
    assert_eq!(noisy.tracks.len(), 1);
    assert_eq!(noisy.tracks[0].id, 7);
    assert_eq!(noisy.clutter.len(), 1);
}

#[test]
fn assignment_of_simulated_detections_recovers_sources() {
    let sc = generate(&ScenarioSpec {
        frames: 40,
        sigma_b: 1.0,
        ..ScenarioSpec::default()
    })
    .unwrap();
    let noisy = assign_ids_by_iou(&sc.gt, &sc.frame_detections()).unwrap();
    let direct = sc.training_sequence("s");
    let n_direct: usize = direct.tracks.iter().map(|t| t.observations.len()).sum();
    let n_noisy: usize = noisy.tracks.iter().map(|t| t.observations.len()).sum();
    // small jitter: every true detection is recovered, clutter may be absorbed rarely
    assert!(n_noisy >= n_direct);
}

// ---------- loss ----------

#[test]
fn loss_oracle_on_random_batches() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let w = FocalWeights::default();
    for _ in 0..1000 {
        let n = rng.random_range(1..40);
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(1e-6..1.0 - 1e-6)).collect();
        let y: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let got = batch_loss(&p, &y, w).unwrap();
        let mut oracle = 0.0;
        for (pi, yi) in p.iter().zip(&y) {
            oracle += if *yi {
                4.0 * (1.0 - pi).powi(2) * -pi.ln()
            } else {
                pi.powi(2) * -(1.0 - pi).ln()
            };
        }
        oracle /= n as f64;
        assert!((got.mean - oracle).abs() < 1e-12);
    }
}

#[test]
fn loss_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let p: Vec<f64> = (0..20).map(|_| rng.random_range(0.01..0.99)).collect();
    let y: Vec<bool> = (0..20).map(|_| rng.random()).collect();
    let base = batch_loss(&p, &y, FocalWeights::default()).unwrap().mean;
    let mut idx: Vec<usize> = (0..20).collect();
    idx.reverse();
    let pp: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
    let yy: Vec<bool> = idx.iter().map(|&i| y[i]).collect();
    assert!((batch_loss(&pp, &yy, FocalWeights::default()).unwrap().mean - base).abs() < 1e-15);
    let one = FocalWeights { beta_pos: 1.0, beta_neg: 1.0 };
    let c = FocalWeights { beta_pos: 3.0, beta_neg: 3.0 };
    let l1 = batch_loss(&p, &y, one).unwrap().mean;
    let lc = batch_loss(&p, &y, c).unwrap().mean;
    assert!((lc - 3.0 * l1).abs() < 1e-14);
    assert_eq!(format!("{:.4}", focal_term(0.5, true, FocalWeights::default()).0), "0.6931");
    assert_eq!(format!("{:.4}", focal_term(0.5, false, FocalWeights::default()).0), "0.1733");
}

// ---------- gradient check of the joint loss ----------

/// Three tracks with two-frame histories; detections of two of them.
fn gradcheck_episode(seed: u64) -> (TrainingSequence, RandomEpisode) {
    let seq = toy_sequence(&[(1, 3), (1, 3), (1, 3)], seed);
    let histories: Vec<LabeledTrack> = seq
        .tracks
        .iter()
        .map(|t| LabeledTrack {
            id: t.id,
            observations: t.observations[..2].to_vec(),
        })
        .collect();
    let detections = seq.tracks[..2].iter().map(|t| (Some(t.id), t.observations[2].clone())).collect();
    let ep = RandomEpisode {
        sequence: 0,
        start: 1,
        end: 3,
        histories,
        detections,
    };
    (seq, ep)
}


#[test]
fn joint_loss_gradient_matches_finite_differences() {
    for seed in 0..3 {
        let m = model(HeadMode::Joint, 100 + seed);
        let (seq, ep) = gradcheck_episode(seed);
        assert_eq!(ep.batch().len(), 6);
        let fd = FdOptions {
            max_coords_per_param: Some(6),
            seed,
            ..FdOptions::default()
        };
        let report = ep.check_gradient(&seq, &m, &LossOptions::default(), fd, 0).unwrap();
        assert!(report.max_rel_error < 1e-4, "seed {seed}: {:?}", report.per_param);
        assert!(report.checked > 100);
    }
}

// ---------- training loop ----------

fn small_cfg(iters: usize) -> TrainConfig {
    TrainConfig {
        epochs: 1,
        iterations_per_epoch: iters,
        lr_milestones: vec![],
        ..TrainConfig::default()
    }
}

#[test]
fn schedules() {
    let cfg = TrainConfig {
        iterations_per_epoch: 10,
        ..TrainConfig::default()
    };
    assert_eq!(cfg.total_iterations(), 120);
    assert_eq!(cfg.lr_at(0), 0.005);
    assert_eq!(cfg.lr_at(39), 0.005);
    assert!((cfg.lr_at(40) - 0.0005).abs() < 1e-18);
    assert!((cfg.lr_at(79) - 0.0005).abs() < 1e-18);
    assert!((cfg.lr_at(80) - 0.00005).abs() < 1e-18);
    assert!((cfg.lr_at(119) - 0.00005).abs() < 1e-18);
    assert!(!cfg.hard_mining_at(19) && cfg.hard_mining_at(20));
    assert_eq!(cfg.dropout_phase_starts(), vec![19, 29, 38]);
    assert_eq!(cfg.dropout_at(18), 0.9);
    assert_eq!(cfg.dropout_at(19), 0.6);
    assert_eq!(cfg.dropout_at(29), 0.3);
    assert_eq!(cfg.dropout_at(38), 0.0);
    assert_eq!(cfg.dropout_at(119), 0.0);
}

#[test]
fn log_shows_schedule_boundaries() {
    let seq = toy_sequence(&[(1, 20), (1, 20)], 30);
    let mut m = model(HeadMode::Joint, 8);
    let cfg = TrainConfig {
        epochs: 3,
        iterations_per_epoch: 8,
        lr_milestones: vec![1, 2],
        dropout_boundaries: vec![0.25, 0.5, 0.75],
        ..TrainConfig::default()
    };
    let mut log = LogCollector::default();
    train(&mut m, &[seq], &cfg, &mut log).unwrap();
    assert_eq!(log.rows.len(), 24);
    let changes = |f: &dyn Fn(&trackpool_core::training::LogRow) -> f64| -> Vec<usize> {
        log.rows.windows(2).filter(|w| f(&w[0]) != f(&w[1])).map(|w| w[1].iter).collect()
    };
    assert_eq!(changes(&|r| r.dropout), vec![6, 12, 18]);
    assert_eq!(changes(&|r| r.lr), vec![8, 16]);
    assert!(log.rows.iter().enumerate().all(|(k, r)| r.iter == k));
    assert!(log.rows.iter().all(|r| r.phase == if r.iter % 2 == 0 { Phase::Actual } else { Phase::Random }));
    assert_eq!(log.rows[0].to_string().split(',').count(), 5);
    assert!(log.rows[0].to_string().starts_with("0,actual,"));
}

#[test]
fn initial_loss_is_near_the_uninformative_baseline() {
    let seqs: Vec<TrainingSequence> = (0..3).map(|s| toy_sequence(&[(1, 30), (1, 30), (5, 30)], 40 + s)).collect();
    // analytic loss of a p = 0.5 classifier on the first actual segment
    let baseline = {
        let batches: Vec<_> = seqs[0].proposal_batches().into_iter().filter(|b| b.frame <= 10).collect();
        let w = FocalWeights::default();
        let per_frame: Vec<f64> = batches
            .iter()
            .map(|b| {
                let labels = b.labels();
                labels.iter().map(|&y| focal_term(0.5, y, w).0).sum::<f64>() / labels.len() as f64
            })
            .collect();
        per_frame.iter().sum::<f64>() / per_frame.len() as f64
    };
    for head in [HeadMode::Joint, HeadMode::AppearanceOnly] {
        for seed in 0..5 {
            let mut m = model(head, seed);
            let mut log = LogCollector::default();
            let mut cfg = small_cfg(1);
            cfg.seed = 99;
            train(&mut m, &seqs[..1], &cfg, &mut log).unwrap();
            let l0 = log.rows[0].loss;
            assert!((l0 / baseline - 1.0).abs() < 0.3, "{head:?} seed {seed}: {l0} vs {baseline}");
        }
    }
}

#[test]
fn overfits_a_two_track_scene() {
    let sc = generate(&ScenarioSpec {
        num_targets: 2,
        num_clusters: 2,
        frames: 60,
        p_miss: 0.0,
        lambda_fp: 0.0,
        seed: 3,
        ..ScenarioSpec::default()
    })
    .unwrap();
    let seq = sc.training_sequence("two");
    let mut m = model(HeadMode::Joint, 1);
    let mut cfg = small_cfg(200);
    cfg.optimizer = Optimizer::Adam;
    cfg.dropout_rates = vec![0.0];
    cfg.dropout_boundaries = vec![];
    let mut log = LogCollector::default();
    train(&mut m, &[seq], &cfg, &mut log).unwrap();
    let tail: Vec<f64> = log.rows[180..].iter().map(|r| r.loss).collect();
    let last = tail.iter().sum::<f64>() / tail.len() as f64;
    assert!(last < 0.1, "final loss {last}, first {}", log.rows[0].loss);
}

#[test]
fn divergence_is_reported() {
    let seq = toy_sequence(&[(1, 10), (1, 10)], 31);
    let mut m = model(HeadMode::Joint, 2);
    let id = m.params().id("head.out.b").unwrap();
    m.params_mut().get_mut(id).data_mut()[0] = f64::NAN;
    let err = train(&mut m, &[seq], &small_cfg(2), &mut LogCollector::default());
    assert!(err.is_err());
}

