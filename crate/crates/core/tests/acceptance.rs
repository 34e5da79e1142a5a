//! One pass/fail line per acceptance criterion, at the pinned tolerances.
//!
//! Criteria 5 and 6 train the pilot configuration in full (about twenty minutes on one core).

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::LN_2;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::{all_networks, brute_force_heatmap, check_network_gradients, quick_config, small_synthetic, tiny_net, Probe};
use poseswap_core::config::{self, config_hash};
use poseswap_core::data::{generate_synthetic, Clip, Split, SyntheticConfig};
use poseswap_core::losses::*;
use poseswap_core::nets::{self, ContentCode, Models};
use poseswap_core::pose::{
    format_keypoint_records, parse_keypoint_records, render_heatmap, HeatmapConfig, KeypointRecord, PoseVector,
};
use poseswap_core::swap_eval::{evaluate_mse, synthetic_swap_evaluation, EvalConfig, Reconstructor};
use poseswap_core::train::*;
use poseswap_core::Method;
use poseswap_grad::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Hash of `configs/synthetic_pilot.toml` as loaded, pinned when the thresholds were set.
const PILOT_CONFIG_HASH: &str = "d38ad4dbba7338ed6287a4f04c9e4c1d8372b14d945fed4980e50c44f90fd68b";
const PILOT_MSE: f64 = 0.01;
const PILOT_CONTENT_SCORE: f64 = 0.9;
const PILOT_POSE_ERROR_PX: f64 = 3.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn random_pose(rng: &mut ChaCha8Rng) -> PoseVector {
    let mut kp = [[0.0; 2]; 17];
    for p in kp.iter_mut() {
        *p = [rng.random_range(-1.1..1.1), rng.random_range(-1.1..1.1)];
    }
    PoseVector::new(kp).unwrap()
}

fn heatmap_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for res in [64, 128] {
        let cfg = HeatmapConfig::for_resolution(res);
        for _ in 0..1000 {
            let pose = random_pose(&mut rng);
            let fast = render_heatmap(&pose, &cfg);
            for (a, b) in fast.values.iter().zip(brute_force_heatmap(&pose, &cfg)) {
                worst = worst.max((a - b).abs() / b.abs().max(f64::MIN_POSITIVE));
            }
        }
    }
    let t = start.elapsed();
    outcome(worst <= 1e-6 && within(t, 60), format!("max relative error {worst:.2e}, {:.1}s", t.as_secs_f64()))
}

fn loss_exactness() -> Outcome {
    let t = |shape: &[usize], v: Vec<f64>| Tensor::from_vec(shape, v);
    let code = ContentCode { bottleneck: t(&[1, 2, 1, 1], vec![0.3, -0.2]), skips: vec![t(&[1, 1, 2, 2], vec![0.5; 4])] };
    let f = t(&[1, 3, 2, 2], (0..12).map(|i| i as f64 / 12.0).collect());
    let a = t(&[1, 2], vec![0.0, 0.0]);
    let n = t(&[1, 2], vec![1.0, 0.0]);
    let zeros = [
        loss_consistency(&code, &code).unwrap(),
        loss_reconstruction(&f, &f).unwrap(),
        loss_triplet(&a, &a, &n, 0.5).unwrap(),
        loss_triplet(&a, &a, &n, 1.0).unwrap(),
    ];
    let halves = [
        loss_adv_scene_discriminator(&[0.5], &[0.5]).unwrap(),
        loss_pose_discriminator(&[0.5], &[0.5]).unwrap(),
        loss_content_discriminator(&[0.5], &[0.5]).unwrap(),
        loss_generator_gan(&[0.5], &[0.5]).unwrap(),
    ];
    let half_err = halves.iter().map(|v| (v - 2.0 * LN_2).abs()).fold(0.0, f64::max);
    let worked = (loss_triplet(&a, &a, &n, 2.0).unwrap() - 1.0).abs();
    outcome(
        zeros.iter().all(|&z| z == 0.0) && half_err <= 1e-12 && worked <= 1e-12,
        format!("zero cases {zeros:?}, 2 ln 2 error {half_err:.1e}, worked example error {worked:.1e}"),
    )
}

fn gradient_verification() -> Outcome {
    let start = Instant::now();
    let cfg = tiny_net();
    let probe = Probe::new(&cfg, 3);
    let mut worst: f64 = 0.0;
    let mut all_checked = true;
    for (method, name) in all_networks() {
        let m = Models::<f64>::new(method, &cfg, 11).unwrap();
        let r = check_network_gradients(&m, name, &probe, 100, 5);
        all_checked &= r.checked == 100;
        worst = worst.max(r.max_rel_err);
    }
    let t = start.elapsed();
    outcome(
        all_checked && worst <= 1e-4 && within(t, 300),
        format!("{} networks x 100 parameters, max relative error {worst:.2e}, {:.1}s", all_networks().len(), t.as_secs_f64()),
    )
}

fn trace(cfg: &MethodConfig, clips: &[Clip], steps: usize) -> Vec<LossRecord> {
    let mut t = Trainer::new(cfg.clone(), clips).unwrap();
    (0..steps).map(|_| t.step().unwrap()).collect()
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let (clips, _) = small_synthetic(8, 10, 32);
    let mut notes = Vec::new();
    let mut pass = true;
    for method in Method::ALL {
        let cfg = MethodConfig { epochs: 4, ..quick_config(method) };
        let same = trace(&cfg, &clips, 50) == trace(&cfg, &clips, 50);

        let dir = tempfile::tempdir().unwrap();
        let full = run_training(&cfg, &clips, &RunOptions { out_dir: dir.path().join("full"), ..Default::default() }).unwrap();
        let part = dir.path().join("part");
        let spe = full.records.len() as u64 / 4;
        run_training(&cfg, &clips, &RunOptions { out_dir: part.clone(), max_steps: Some(2 * spe + 3), ..Default::default() })
            .unwrap();
        let resume = Some(epoch_checkpoint_path(&part, 2));
        let resumed = run_training(&cfg, &clips, &RunOptions { out_dir: part, resume, ..Default::default() }).unwrap();
        let losses = |rs: &[StepRecord]| rs.iter().map(|r| (r.step, r.losses.clone())).collect::<Vec<_>>();
        let continued = losses(&full.records) == losses(&resumed.records);

        pass &= same && continued;
        notes.push(format!("{method}: traces {}, resume {}", ok(same), ok(continued)));
    }
    let t = start.elapsed();
    outcome(pass && within(t, 600), format!("{}; {:.1}s", notes.join(", "), t.as_secs_f64()))
}

fn ok(b: bool) -> &'static str {
    if b {
        "identical"
    } else {
        "DIFFER"
    }
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

struct Pilot {
    train_time: Duration,
    mse: f64,
    content_score: f64,
    pose_error_px: f64,
    hash: String,
}

fn run_pilot() -> Pilot {
    let cfg: MethodConfig = config::load(Some(&workspace_root().join("configs/synthetic_pilot.toml")), &[]).unwrap();
    let (clips, truth) = generate_synthetic(&SyntheticConfig::default()).unwrap();
    let train = Split::Train.select(&clips);
    let test = Split::Test.select(&clips);
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let run = run_training(&cfg, &train, &RunOptions { out_dir: dir.path().into(), ..Default::default() }).unwrap();
    let train_time = start.elapsed();
    let model = Reconstructor::from_checkpoint(&Checkpoint::load(&run.final_checkpoint).unwrap()).unwrap();
    let report = evaluate_mse(&model, &test, &EvalConfig::default()).unwrap();
    let swap = synthetic_swap_evaluation(&model, &test, &truth, 10).unwrap();
    Pilot {
        train_time,
        mse: report.mse,
        content_score: swap.content_score,
        pose_error_px: swap.pose_error_px,
        hash: config_hash(&cfg),
    }
}

fn synthetic_learning(p: &Pilot) -> Outcome {
    let pinned = p.hash == PILOT_CONFIG_HASH;
    outcome(
        p.mse <= PILOT_MSE && within(p.train_time, 1800) && pinned,
        format!(
            "held-out mse {:.5} (threshold {PILOT_MSE}), trained in {:.0}s, config hash {} {}",
            p.mse,
            p.train_time.as_secs_f64(),
            &p.hash[..12],
            if pinned { "pinned" } else { "NOT PINNED" }
        ),
    )
}

fn synthetic_disentanglement(p: &Pilot) -> Outcome {
    outcome(
        p.content_score >= PILOT_CONTENT_SCORE && p.pose_error_px <= PILOT_POSE_ERROR_PX,
        format!(
            "content score {:.3} (>= {PILOT_CONTENT_SCORE}), pose-centroid error {:.2}px (<= {PILOT_POSE_ERROR_PX})",
            p.content_score, p.pose_error_px
        ),
    )
}

fn alternation() -> Outcome {
    use nets::*;
    let (clips, _) = small_synthetic(6, 8, 32);
    let mut violations = Vec::new();
    let mut checked = 0usize;
    for method in [Method::DisentangledBaseline, Method::Cgan, Method::CganTriplet] {
        let mut t = Trainer::new(quick_config(method), &clips).unwrap();
        t.enable_audit();
        for _ in 0..100 {
            t.step().unwrap();
        }
        for a in t.take_audit() {
            checked += 1;
            let changed: BTreeSet<&str> = a.changed.iter().copied().collect();
            let allowed: &[&str] = match a.substep {
                SUBSTEP_D_POSE => &[POSE_DISCRIMINATOR],
                SUBSTEP_D_CONTENT => &[CONTENT_DISCRIMINATOR],
                SUBSTEP_TRIPLET => &[CONTENT_EMBEDDER],
                SUBSTEP_GENERATOR => &[CONTENT_ENCODER, GENERATOR],
                SUBSTEP_SCENE => &[SCENE_DISCRIMINATOR],
                SUBSTEP_POSE_CODE => &[CONTENT_ENCODER, GENERATOR, POSE_ENCODER],
                _ => &[],
            };
            if !changed.iter().all(|n| allowed.contains(n)) || changed.is_empty() {
                violations.push(format!("{method}/{}: {changed:?}", a.substep));
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!("{checked} sub-steps audited over 100 steps per adversarial method, {} violations {violations:?}", violations.len()),
    )
}

fn round_trips() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut results = BTreeMap::new();

    let kp: Vec<[f64; 2]> = (0..17).map(|i| [i as f64 * 9.25 + 0.125, 119.0 - i as f64 * 3.5]).collect();
    let records = vec![KeypointRecord::detected(0, kp, 160, 120), KeypointRecord::missing(1, 160, 120)];
    let text = format_keypoint_records(&records);
    let again = format_keypoint_records(&parse_keypoint_records(&text, Path::new("k")).unwrap());
    results.insert("keypoints", text == again);

    let cfg_path = dir.path().join("c.toml");
    config::save(&MethodConfig { method: Method::CganTriplet, ..Default::default() }, &cfg_path).unwrap();
    let first = std::fs::read(&cfg_path).unwrap();
    config::save(&config::load::<MethodConfig>(Some(&cfg_path), &[]).unwrap(), &cfg_path).unwrap();
    results.insert("config", std::fs::read(&cfg_path).unwrap() == first);

    let (clips, _) = small_synthetic(3, 5, 32);
    let mut all = true;
    for method in Method::ALL {
        let mut t = Trainer::new(quick_config(method), &clips).unwrap();
        let losses = t.step().unwrap();
        let rec = StepRecord { step: 1, epoch: 1, losses, wall_time: 0.25 };
        let path = dir.path().join(format!("{method}.safetensors"));
        snapshot(&t, std::slice::from_ref(&rec)).save(&path).unwrap();
        let first = std::fs::read(&path).unwrap();
        Checkpoint::load(&path).unwrap().save(&path).unwrap();
        all &= std::fs::read(&path).unwrap() == first;
    }
    results.insert("checkpoints", all);

    let m = dir.path().join("m.jsonl");
    let records = vec![StepRecord { step: 3, epoch: 1, losses: BTreeMap::from([("rec".into(), 0.1 + 0.2)]), wall_time: 1.5 }];
    write_metrics(&m, &records).unwrap();
    let first = std::fs::read(&m).unwrap();
    write_metrics(&m, &read_metrics(&m).unwrap()).unwrap();
    results.insert("metrics", std::fs::read(&m).unwrap() == first);

    outcome(results.values().all(|&b| b), format!("{results:?}"))
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
        outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
    })
}

#[test]
fn acceptance_criteria() {
    let mut lines = Vec::new();
    let mut report = |n: usize, name: &str, o: Outcome| {
        let line = format!("criterion {n} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        // straight to the handle so the lines show without --nocapture
        writeln!(std::io::stderr(), "{line}").unwrap();
        lines.push((o.pass, line));
    };
    report(1, "heatmap oracle equivalence", guarded(heatmap_oracle));
    report(2, "loss exactness", guarded(loss_exactness));
    report(3, "gradient verification", guarded(gradient_verification));
    report(4, "determinism", guarded(determinism));
    let pilot = catch_unwind(run_pilot);
    match &pilot {
        Ok(p) => {
            report(5, "synthetic learning", synthetic_learning(p));
            report(6, "synthetic disentanglement", synthetic_disentanglement(p));
        }
        Err(_) => {
            report(5, "synthetic learning", outcome(false, "pilot training panicked"));
            report(6, "synthetic disentanglement", outcome(false, "pilot training panicked"));
        }
    }
    report(7, "alternation and freezing", guarded(alternation));
    report(8, "format round trips", guarded(round_trips));
    let failed: Vec<&String> = lines.iter().filter(|(p, _)| !p).map(|(_, l)| l).collect();
    assert!(failed.is_empty(), "{} criteria failed:\n{}", failed.len(), failed.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("\n"));
}
