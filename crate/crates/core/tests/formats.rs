//! Write → read → write round trips for every on-disk format.

mod common;

use std::collections::BTreeMap;
use std::path::Path;

use common::{quick_config, small_synthetic};
use poseswap_core::config::{self, from_toml_str, to_toml_string};
use poseswap_core::data::{load_dataset, write_dataset, SyntheticConfig};
use poseswap_core::pose::{format_keypoint_records, parse_keypoint_records, KeypointRecord};
use poseswap_core::swap_eval::{EvalConfig, EvalReport};
use poseswap_core::train::{
    format_metrics, parse_metrics, read_metrics, snapshot, Checkpoint, MethodConfig, StepRecord, Trainer,
};
use poseswap_core::Method;
use proptest::prelude::*;

#[test]
fn keypoint_file_round_trip() {
    let kp: Vec<[f64; 2]> = (0..17).map(|i| [i as f64 * 9.25 + 0.125, 119.0 - i as f64 * 3.5]).collect();
    let records = vec![
        KeypointRecord::detected(0, kp.clone(), 160, 120),
        KeypointRecord::missing(1, 160, 120),
        KeypointRecord::detected(2, kp, 160, 120),
    ];
    let text = format_keypoint_records(&records);
    let parsed = parse_keypoint_records(&text, Path::new("x.kp")).unwrap();
    assert_eq!(parsed, records);
    assert_eq!(format_keypoint_records(&parsed), text);
}

#[test]
fn config_round_trip() {
    let mut cfg = MethodConfig { method: Method::CganTriplet, epochs: 7, learning_rate: 2.5e-4, ..Default::default() };
    cfg.weights.margin = 0.75;
    cfg.net.base_channels = 12;
    let text = to_toml_string(&cfg);
    let back: MethodConfig = from_toml_str(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(to_toml_string(&back), text);

    let synth = SyntheticConfig { n_clips: 3, seed: 9, ..Default::default() };
    let text = to_toml_string(&synth);
    assert_eq!(to_toml_string(&from_toml_str::<SyntheticConfig>(&text).unwrap()), text);
}

#[test]
fn config_files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    let cfg = MethodConfig { method: Method::Cgan, ..Default::default() };
    config::save(&cfg, &path).unwrap();
    let first = std::fs::read(&path).unwrap();
    let back: MethodConfig = config::load(Some(&path), &[]).unwrap();
    config::save(&back, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

#[test]
fn checkpoint_round_trip_for_every_method() {
    let (clips, _) = small_synthetic(4, 6, 32);
    for method in Method::ALL {
        let cfg = quick_config(method);
        let mut trainer = Trainer::new(cfg, &clips).unwrap();
        let mut records = Vec::new();
        for _ in 0..2 {
            let losses = trainer.step().unwrap();
            records.push(StepRecord { step: trainer.global_step, epoch: 1, losses, wall_time: 0.5 });
        }
        let bytes = snapshot(&trainer, &records).to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes().unwrap(), bytes, "{method}");
        assert_eq!(back.meta.global_step, 2);
    }
    let oracle = Checkpoint::identity_oracle(64).to_bytes().unwrap();
    assert_eq!(Checkpoint::from_bytes(&oracle).unwrap().to_bytes().unwrap(), oracle);
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (clips, _) = small_synthetic(3, 5, 32);
    let trainer = Trainer::new(quick_config(Method::DisentangledBaseline), &clips).unwrap();
    let path = dir.path().join("a.safetensors");
    snapshot(&trainer, &[]).save(&path).unwrap();
    let first = std::fs::read(&path).unwrap();
    Checkpoint::load(&path).unwrap().save(&path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

#[test]
fn dataset_layout_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (clips, _) = small_synthetic(2, 4, 32);
    write_dataset(dir.path(), &clips).unwrap();
    let loaded = load_dataset(dir.path(), None).unwrap();
    // frames are stored as 8-bit PNG, so compare after one quantization
    for (a, b) in clips.iter().zip(&loaded) {
        assert_eq!(a.video_id, b.video_id);
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            assert!(fa.mse(fb) < 1e-4);
        }
    }
    let again = tempfile::tempdir().unwrap();
    write_dataset(again.path(), &loaded).unwrap();
    assert_eq!(load_dataset(again.path(), None).unwrap(), loaded);
}

#[test]
fn eval_report_round_trip() {
    let report = EvalReport {
        method: "cgan".into(),
        protocol: EvalConfig::default(),
        mse: 0.0123,
        n_pairs: 20,
        per_clip: BTreeMap::from([("a".to_string(), 0.01), ("b".to_string(), 0.0146)]),
        distribution: poseswap_core::swap_eval::Distribution::of(&[0.01, 0.0146]).unwrap(),
        diagnostics: None,
    };
    let text = report.to_json();
    let back = EvalReport::from_json(&text).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.to_json(), text);
}

fn record_strategy() -> impl Strategy<Value = StepRecord> {
    (
        0u64..1_000_000,
        0usize..500,
        prop::collection::btree_map("[a-z_]{1,12}", -1e6f64..1e6, 0..5),
        0.0f64..1e5,
    )
        .prop_map(|(step, epoch, losses, wall_time)| StepRecord { step, epoch, losses, wall_time })
}

proptest! {
    #[test]
    fn metrics_log_round_trip(records in prop::collection::vec(record_strategy(), 0..20)) {
        let text = format_metrics(&records);
        let back = parse_metrics(&text, Path::new("m.jsonl")).unwrap();
        prop_assert_eq!(&back, &records);
        prop_assert_eq!(format_metrics(&back), text);
    }

    #[test]
    fn keypoint_records_round_trip(
        frames in prop::collection::vec(
            prop::option::of(prop::collection::vec((0.0f64..160.0, 0.0f64..120.0), 17)),
            1..6,
        ),
    ) {
        let records: Vec<KeypointRecord> = frames
            .into_iter()
            .enumerate()
            .map(|(i, kp)| match kp {
                Some(kp) => KeypointRecord::detected(i, kp.into_iter().map(|(x, y)| [x, y]).collect(), 160, 120),
                None => KeypointRecord::missing(i, 160, 120),
            })
            .collect();
        let text = format_keypoint_records(&records);
        let back = parse_keypoint_records(&text, Path::new("p.kp")).unwrap();
        prop_assert_eq!(&back, &records);
        prop_assert_eq!(format_keypoint_records(&back), text);
    }
}

#[test]
fn metrics_files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.jsonl");
    let records = vec![StepRecord {
        step: 1,
        epoch: 1,
        losses: BTreeMap::from([("rec".to_string(), 0.1 + 0.2)]),
        wall_time: 0.1,
    }];
    poseswap_core::train::write_metrics(&path, &records).unwrap();
    let first = std::fs::read(&path).unwrap();
    poseswap_core::train::write_metrics(&path, &read_metrics(&path).unwrap()).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

#[test]
fn shipped_configs_load_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg: MethodConfig = config::load(Some(&path), &[]).unwrap();
            cfg.validate().unwrap();
            seen += 1;
        }
    }
    assert_eq!(seen, 5);
}
