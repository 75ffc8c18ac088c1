use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use retouch_core::image::{save_image, Image};
use retouch_core::synth::{distort, SceneGenerator};
use retouch_core::trainer::{Checkpoint, TrainConfig, Trainer};

fn retouch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_retouch"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("RETOUCH_SEED")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A few source and target scenes on disk.
fn toy_dirs(root: &Path, n: usize) -> (PathBuf, PathBuf) {
    let (src, tgt) = (root.join("src"), root.join("tgt"));
    std::fs::create_dir_all(&src).unwrap();
    std::fs::create_dir_all(&tgt).unwrap();
    let g = SceneGenerator::new(3);
    for i in 0..n {
        save_image(&distort(&g.render(i as u64, 48)), src.join(format!("{i}.png"))).unwrap();
        save_image(&g.render((n + i) as u64, 80), tgt.join(format!("{i}.png"))).unwrap();
    }
    (src, tgt)
}

const TINY: [&str; 4] = ["--set", "critic_channels=[4,8]", "--set", "agent_channels=[4,8]"];

#[test]
fn train_rejects_empty_source_dir() {
    let dir = tempfile::tempdir().unwrap();
    let (_, tgt) = toy_dirs(dir.path(), 1);
    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let out = dir.path().join("m.ckpt");
    let o = retouch(&["train", "--source", s(&empty), "--target", s(&tgt), "--out", s(&out)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains(s(&empty)), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn train_rejects_unwritable_output() {
    let dir = tempfile::tempdir().unwrap();
    let (src, tgt) = toy_dirs(dir.path(), 1);
    let out = dir.path().join("missing/dir/m.ckpt");
    let o = retouch(&["train", "--source", s(&src), "--target", s(&tgt), "--out", s(&out), "--steps", "0"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("cannot write"), "{}", stderr(&o));
}

#[test]
fn zero_steps_writes_valid_checkpoint_and_header_only_log() {
    let dir = tempfile::tempdir().unwrap();
    let (src, tgt) = toy_dirs(dir.path(), 2);
    let out = dir.path().join("m.ckpt");
    let o = retouch(&["train", "--source", s(&src), "--target", s(&tgt), "--out", s(&out), "--steps", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ck = Checkpoint::load(&out).unwrap();
    assert_eq!(ck.progress.generator_steps, 0);
    assert_eq!(ck.config, TrainConfig { generator_steps: 0, ..TrainConfig::default() });
    let log = std::fs::read_to_string(dir.path().join("m.ckpt.log.csv")).unwrap();
    assert_eq!(log, "step,reward,value_loss,policy_loss,critic_loss\n");
}

#[test]
fn short_run_logs_one_row_per_step_and_honours_flags() {
    let dir = tempfile::tempdir().unwrap();
    let (src, tgt) = toy_dirs(dir.path(), 3);
    let cfg = dir.path().join("train.toml");
    std::fs::write(&cfg, "seed = 5\nalpha = 50.0\nreplay_capacity = 64\n").unwrap();
    let out = dir.path().join("m.ckpt");
    let log = dir.path().join("log.csv");
    let mut args = vec![
        "train", "--source", s(&src), "--target", s(&tgt), "--out", s(&out), "--log", s(&log), "--config", s(&cfg),
        "--steps", "4", "--lr", "0.001", "--critic-updates", "2",
    ];
    args.extend(TINY);
    let o = retouch(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&log).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[3].starts_with("4,"));
    let ck = Checkpoint::load(&out).unwrap();
    assert_eq!((ck.config.seed, ck.config.alpha, ck.config.lr), (5, 50.0, 0.001));
    assert_eq!((ck.config.critic_updates, ck.config.replay_capacity), (2, 64));
    assert_eq!(ck.progress.critic_steps, 8);
}

#[test]
fn seed_env_var_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let (src, tgt) = toy_dirs(dir.path(), 1);
    let cfg = dir.path().join("train.toml");
    std::fs::write(&cfg, "seed = 5\n").unwrap();
    let out = dir.path().join("m.ckpt");
    let o = Command::new(env!("CARGO_BIN_EXE_retouch"))
        .args(["train", "--source", s(&src), "--target", s(&tgt), "--out", s(&out), "--config", s(&cfg)])
        .args(["--steps", "0"])
        .env("RETOUCH_SEED", "99")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(Checkpoint::load(&out).unwrap().config.seed, 99);
}

fn neutral_checkpoint(path: &Path) {
    let mut t = Trainer::new(TrainConfig {
        critic_channels: vec![4],
        ..TrainConfig::default()
    })
    .unwrap();
    t.agent_mut().force_policy(&[16; 12]).unwrap();
    t.checkpoint().save(path).unwrap();
}

#[test]
fn neutral_agent_leaves_image_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("n.ckpt");
    neutral_checkpoint(&ck);
    let input = dir.path().join("in.png");
    save_image(&SceneGenerator::new(1).render_rect(0, 150, 100), &input).unwrap();
    let out = dir.path().join("out.png");
    let report = dir.path().join("params.json");
    let o = retouch(&["enhance", "--ckpt", s(&ck), "--in", s(&input), "--out", s(&out), "--report", s(&report)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&input).unwrap());
    let text = std::fs::read_to_string(&report).unwrap();
    assert_eq!(text.matches("\"value\": 0.0000").count(), 12);
}

#[test]
fn enhance_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("r.ckpt");
    Trainer::new(TrainConfig {
        critic_channels: vec![4],
        seed: 3,
        ..TrainConfig::default()
    })
    .unwrap()
    .checkpoint()
    .save(&ck)
    .unwrap();
    let input = dir.path().join("in.ppm");
    save_image(&SceneGenerator::new(2).render(4, 96), &input).unwrap();
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("out{i}.png"));
        let rep = dir.path().join(format!("rep{i}.json"));
        let o = retouch(&["enhance", "--ckpt", s(&ck), "--in", s(&input), "--out", s(&out), "--report", s(&rep)]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push((std::fs::read(&out).unwrap(), std::fs::read(&rep).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let o = retouch(&["export-params", "--ckpt", s(&ck), "--in", s(&input)]);
    assert!(o.status.success());
    assert_eq!(o.stdout, outputs[0].1);
}

#[test]
fn corrupt_checkpoint_is_rejected_before_touching_output() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("bad.ckpt");
    neutral_checkpoint(&ck);
    let bytes = std::fs::read(&ck).unwrap();
    std::fs::write(&ck, &bytes[..bytes.len() / 3]).unwrap();
    let input = dir.path().join("in.png");
    save_image(&Image::filled(8, 8, [0.3; 3]).unwrap(), &input).unwrap();
    let out = dir.path().join("out.png");
    std::fs::write(&out, b"keep me").unwrap();
    let o = retouch(&["enhance", "--ckpt", s(&ck), "--in", s(&input), "--out", s(&out)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("truncated"), "{}", stderr(&o));
    assert_eq!(std::fs::read(&out).unwrap(), b"keep me");
}

/// 16-bit PPM so that the 0.1 offset survives quantization (to 1e-5).
fn write_ppm16(path: &Path, w: usize, h: usize, value: u16) {
    let mut bytes = format!("P6\n{w} {h}\n65535\n").into_bytes();
    for _ in 0..w * h * 3 {
        bytes.extend(value.to_be_bytes());
    }
    std::fs::write(path, bytes).unwrap();
}

#[test]
fn eval_reports_cap_offset_and_skips_unmatched() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for d in [&a, &b, &c] {
        std::fs::create_dir_all(d).unwrap();
    }
    for name in ["x.ppm", "y.ppm"] {
        write_ppm16(&a.join(name), 16, 12, 6553);
        write_ppm16(&b.join(name), 16, 12, 6553);
        write_ppm16(&c.join(name), 16, 12, 6553 + 6554);
    }
    write_ppm16(&a.join("only_in.ppm"), 4, 4, 0);

    let csv_same = dir.path().join("same.csv");
    let o = retouch(&["eval", "--in", s(&a), "--ref", s(&b), "--out", s(&csv_same)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("only_in.ppm"));
    let text = std::fs::read_to_string(&csv_same).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1], "x.ppm,100.000000,1.000000");

    let csv_off = dir.path().join("off.csv");
    let o = retouch(&["eval", "--in", s(&a), "--ref", s(&c), "--out", s(&csv_off)]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    let mean_line = stdout.lines().last().unwrap();
    let mean: f64 = mean_line.split_whitespace().rev().nth(1).unwrap().parse().unwrap();
    assert!((mean - 20.0).abs() < 0.01, "{stdout}");
}

#[test]
fn eval_with_no_pairs_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    write_ppm16(&a.join("x.ppm"), 2, 2, 0);
    write_ppm16(&b.join("y.ppm"), 2, 2, 0);
    let o = retouch(&["eval", "--in", s(&a), "--ref", s(&b), "--out", s(&dir.path().join("e.csv"))]);
    assert!(!o.status.success());
}
