use super::*;
use crate::synth::{distort, SceneGenerator};

fn tiny_config() -> TrainConfig {
    TrainConfig {
        critic_channels: vec![4, 8],
        agent_channels: vec![4, 8],
        generator_steps: 3,
        replay_capacity: 20,
        seed: 11,
        ..TrainConfig::default()
    }
}

fn toy_dataset(n: usize, seed: u64) -> Dataset {
    let gen = SceneGenerator::new(seed);
    let source = (0..n).map(|i| distort(&gen.render(i as u64, 64))).collect();
    let target = (0..n).map(|i| gen.render((n + i) as u64, 64)).collect();
    Dataset::from_images(source, target, 64).unwrap()
}

#[test]
fn buffer_grows_by_batch_until_capacity() {
    let data = toy_dataset(4, 1);
    let mut t = Trainer::new(tiny_config()).unwrap();
    let mut sizes = Vec::new();
    for _ in 0..4 {
        t.generator_step(&data).unwrap();
        sizes.push(t.buffer().len());
    }
    assert_eq!(sizes, vec![8, 16, 20, 20]);
}

#[test]
fn critic_step_skips_on_empty_buffer() {
    let data = toy_dataset(2, 2);
    let mut t = Trainer::new(tiny_config()).unwrap();
    assert!(t.critic_step(&data).unwrap().is_none());
    assert_eq!(t.progress().critic_steps, 0);
}

#[test]
fn schedule_runs_u_critic_updates_per_step() {
    let data = toy_dataset(3, 3);
    let mut t = Trainer::new(tiny_config()).unwrap();
    for _ in 0..3 {
        t.step(&data).unwrap();
    }
    assert_eq!(t.progress().generator_steps, 3);
    assert_eq!(t.progress().critic_steps, 15);
}

#[test]
fn neutral_policy_against_zero_critic_drives_value_to_zero() {
    let data = toy_dataset(4, 4);
    let mut t = Trainer::new(TrainConfig {
        lr: 1e-3,
        ..tiny_config()
    })
    .unwrap();
    t.critic_mut().zero_head();
    t.agent_mut().force_policy(&[16; 12]).unwrap();
    let first = t.generator_step(&data).unwrap();
    assert_eq!(first.reward, 0.0);
    let mut last = first;
    for _ in 0..60 {
        last = t.generator_step(&data).unwrap();
        assert_eq!(last.reward, 0.0);
    }
    assert!(first.value_loss > 0.0);
    assert!(last.value_loss < 0.05 * first.value_loss, "{first:?} -> {last:?}");
}

#[test]
fn critic_learns_to_separate_real_from_frozen_fakes() {
    let data = toy_dataset(16, 5);
    let mut t = Trainer::new(tiny_config()).unwrap();
    for img in data.source() {
        t.buffer.push(img.clone());
    }
    let reals: Vec<&Image> = data.target().iter().collect();
    let fakes: Vec<&Image> = data.source().iter().collect();
    let before_real = mean(&t.critic().score_batch(&reals).unwrap());
    let before_gap = before_real - mean(&t.critic().score_batch(&fakes).unwrap());
    for _ in 0..50 {
        t.critic_step(&data).unwrap().unwrap();
    }
    let after_real = mean(&t.critic().score_batch(&reals).unwrap());
    let after_gap = after_real - mean(&t.critic().score_batch(&fakes).unwrap());
    assert!(after_real > before_real, "{before_real} -> {after_real}");
    assert!(after_gap > before_gap, "{before_gap} -> {after_gap}");
}

#[test]
fn smoke_run_is_finite_and_reproducible() {
    let data = toy_dataset(6, 6);
    let cfg = TrainConfig {
        generator_steps: 100,
        ..tiny_config()
    };
    let mut rows = Vec::new();
    let a = run_training(cfg.clone(), &data, |log, _| {
        rows.push(*log);
        Ok(())
    })
    .unwrap();
    assert_eq!(rows.len(), 100);
    for r in &rows {
        assert!(r.reward.is_finite() && r.value_loss.is_finite() && r.policy_loss.is_finite());
        assert!(r.critic_loss.is_finite());
    }
    let b = run_training(cfg, &data, |_, _| Ok(())).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
}

#[test]
fn zero_steps_returns_initial_state() {
    let data = toy_dataset(2, 7);
    let cfg = TrainConfig {
        generator_steps: 0,
        ..tiny_config()
    };
    let ck = run_training(cfg.clone(), &data, |_, _| Ok(())).unwrap();
    assert_eq!(ck, Trainer::new(cfg).unwrap().checkpoint());
    assert_eq!(ck.progress, Progress::default());
}

#[test]
fn rejects_wrong_dataset_size() {
    let gen = SceneGenerator::new(8);
    let data = Dataset::from_images(vec![gen.render(0, 32)], vec![gen.render(1, 32)], 32).unwrap();
    let mut t = Trainer::new(tiny_config()).unwrap();
    assert!(t.generator_step(&data).is_err());
}

mod checkpoints {
    use super::*;

    fn trained() -> Checkpoint {
        let data = toy_dataset(3, 9);
        run_training(tiny_config(), &data, |_, _| Ok(())).unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let ck = trained();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        ck.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded, ck);
        assert_eq!(loaded.agent_opt.first_moments(), ck.agent_opt.first_moments());
        assert_eq!(loaded.critic_opt.second_moments(), ck.critic_opt.second_moments());
        assert_eq!(loaded.agent_opt.step_count(), 3);
        assert_eq!(std::fs::read(&path).unwrap(), loaded.to_bytes());
    }

    #[test]
    fn truncated_and_foreign_files_fail_cleanly() {
        let bytes = trained().to_bytes();
        for cut in [0, 5, 12, 40, bytes.len() / 2, bytes.len() - 1] {
            let err = Checkpoint::from_bytes(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, Error::Checkpoint(_)), "cut {cut}: {err}");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
        assert!(Checkpoint::from_bytes(b"PNG not a checkpoint").is_err());
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let mut bytes = trained().to_bytes();
        bytes[8..12].copy_from_slice(&(VERSION + 1).to_le_bytes());
        let err = Checkpoint::from_bytes(&bytes).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");
    }

    #[test]
    fn header_records_hyperparameters() {
        let bytes = trained().to_bytes();
        let text = String::from_utf8_lossy(&bytes[..bytes.len().min(2000)]);
        for key in ["lambda = 10.0", "alpha = 100.0", "levels = 33", "adam_beta1 = 0.5", "seed = 11"] {
            assert!(text.contains(key), "missing {key}");
        }
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = Checkpoint::load("/nonexistent/x.ckpt").unwrap_err().to_string();
        assert!(err.contains("/nonexistent/x.ckpt"), "{err}");
    }
}
