use trackpool::checkpoint;
use trackpool::config::{parse_config, RunConfig};
use trackpool::report::{rows, to_csv, to_table, COLUMNS};
use trackpool::Error;
use trackpool_core::classifier::{Classifier, ModelConfig, Pooling, Profile};
use trackpool_core::metrics::{evaluate, EvalReport};
use trackpool_core::record::MotRecord;
use trackpool_core::tracker::Gate;
use trackpool_core::BBox;

#[test]
fn defaults_carry_the_published_settings() {
    for profile in [Profile::Desk, Profile::Paper] {
        let c = RunConfig::defaults(profile);
        assert_eq!(c.tracker.assoc_threshold, 0.5);
        assert_eq!(c.tracker.n_miss, 60);
        assert_eq!(c.tracker.gate, Gate::Iou(0.1));
        assert_eq!(c.train.window, 10);
        assert_eq!(c.train.max_gap, 40);
        assert_eq!(c.train.n_max, 8);
        assert_eq!(c.train.k_hard, 30);
        assert_eq!(c.train.beta_pos, 4.0);
        assert_eq!(c.train.beta_neg, 1.0);
        assert_eq!(c.train.lr, 0.005);
        assert_eq!(c.train.dropout_rates, vec![0.9, 0.6, 0.3, 0.0]);
        assert_eq!(c.model.rows, 8);
        assert_eq!(c.sim.embed_dim, c.model.embed_dim);
        c.validate().unwrap();
    }
    let paper = RunConfig::defaults(Profile::Paper).model;
    assert_eq!((paper.embed_dim, paper.key_dim, paper.hidden), (2048, 256, 2048));
    let desk = RunConfig::defaults(Profile::Desk).model;
    assert_eq!((desk.embed_dim, desk.key_dim, desk.motion_hidden), (32, 16, 16));
}

#[test]
fn empty_document_is_the_defaults() {
    let loaded = parse_config("{}", Profile::Desk).unwrap();
    assert_eq!(loaded.config, RunConfig::defaults(Profile::Desk));
    assert!(loaded.unknown_keys.is_empty());
}

#[test]
fn bad_values_name_their_key() {
    let err = parse_config(r#"{"model": {"hidden": 100}}"#, Profile::Desk).unwrap_err();
    assert!(err.to_string().contains("model.hidden"), "{err}");
    let err = parse_config(r#"{"train": {"window": "ten"}}"#, Profile::Desk).unwrap_err();
    assert!(err.to_string().contains("train.window"), "{err}");
    let err = parse_config(r#"{"tracker": {"assoc_threshold": 1.5}}"#, Profile::Desk).unwrap_err();
    assert!(err.to_string().contains("tracker.assoc_threshold"), "{err}");
    let err = parse_config(r#"{"sim": {"embed_dim": 5}}"#, Profile::Desk).unwrap_err();
    assert!(err.to_string().contains("sim.embed_dim"), "{err}");
    assert!(parse_config("[1, 2]", Profile::Desk).is_err());
    assert!(matches!(parse_config("{", Profile::Desk), Err(Error::Json(_))));
}

#[test]
fn unknown_keys_are_reported_and_ignored() {
    let loaded = parse_config(
        r#"{"train": {"lr": 0.01, "momentum": 0.9}, "extras": {}}"#,
        Profile::Desk,
    )
    .unwrap();
    assert_eq!(loaded.config.train.lr, 0.01);
    assert_eq!(loaded.unknown_keys, vec!["extras".to_string(), "train.momentum".to_string()]);
}

#[test]
fn sim_follows_the_model_width() {
    let c = parse_config(r#"{"model": {"embed_dim": 12}}"#, Profile::Desk).unwrap().config;
    assert_eq!(c.sim.embed_dim, 12);
}

#[test]
fn reseed_touches_every_source() {
    let mut c = RunConfig::defaults(Profile::Desk);
    c.reseed(77);
    assert_eq!((c.model.init_seed, c.train.seed, c.sim.seed), (77, 77, 77));
    let back = parse_config(&c.to_json(), Profile::Desk).unwrap();
    assert_eq!(back.config, c);
}

#[test]
fn checkpoint_round_trip() {
    let model = Classifier::new(ModelConfig {
        init_seed: 9,
        ..ModelConfig::default()
    })
    .unwrap();
    let bytes = checkpoint::encode(&model).unwrap();
    let back = checkpoint::decode(&bytes).unwrap();
    assert_eq!(back.config(), model.config());
    for ((_, na, ta), (_, nb, tb)) in model.params().iter().zip(back.params().iter()) {
        assert_eq!(na, nb);
        assert!(ta.data().iter().zip(tb.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
    assert_eq!(checkpoint::fingerprint(&model).unwrap(), checkpoint::fingerprint(&back).unwrap());
    let x = model.embed_detection(&[0.1; 32]).unwrap();
    let (mem, motion) = model.init_track_state(&x, [0.1, 0.2, 0.05, 0.2]).unwrap();
    let p = |m: &Classifier| {
        m.score_pair(&mem, &[], &x, motion.as_ref().map(|s| (s, [0.11, 0.2, 0.05, 0.2])), Pooling::Full)
            .unwrap()
    };
    assert_eq!(p(&model).to_bits(), p(&back).to_bits());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    checkpoint::save(&path, &model).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
    assert_eq!(checkpoint::load(&path).unwrap().config(), model.config());
}

#[test]
fn corrupted_checkpoints_are_rejected() {
    let model = Classifier::new(ModelConfig::default()).unwrap();
    let bytes = checkpoint::encode(&model).unwrap();
    for at in [0, 5, bytes.len() / 2, bytes.len() - 1] {
        let mut bad = bytes.clone();
        bad[at] ^= 0x40;
        assert!(checkpoint::decode(&bad).is_err(), "flip at {at}");
    }
    assert!(checkpoint::decode(&bytes[..bytes.len() - 10]).is_err());
    assert!(checkpoint::decode(&[]).is_err());
}

#[test]
fn report_columns_follow_the_benchmark_order() {
    assert_eq!(&COLUMNS[..6], &["MOTA", "IDF1", "IDS", "MT", "ML", "Frag"]);
    let gt: Vec<MotRecord> = (1..=10)
        .map(|f| MotRecord::new(f, 1, BBox::new(10.0 * f64::from(f), 0.0, 20.0, 40.0), 1.0))
        .collect();
    let report = EvalReport::from_sequences(vec![evaluate("a", &gt, &gt).unwrap()]).unwrap();
    let r = rows(&report);
    assert_eq!(r.len(), 2);
    let csv = to_csv(&r);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), format!("name,{}", COLUMNS.join(",")));
    assert!(lines.next().unwrap().starts_with("a,1,1,0,"));
    let table = to_table(&r);
    let header = table.lines().next().unwrap();
    let pos: Vec<usize> = COLUMNS.iter().map(|c| header.find(c).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
}
