//! Run the toy experiment with periodic held-out evaluation.
//! Usage: toy_pilot [steps] [key=value ...]

use std::time::Instant;

use retouch_core::experiment::{evaluate_toy, toy_config, toy_setup};
use retouch_core::trainer::Trainer;

fn main() -> retouch_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = toy_config();
    if let Some(steps) = args.next() {
        cfg.generator_steps = steps.parse().expect("steps");
    }
    for kv in args {
        let (k, v) = kv.split_once('=').expect("key=value");
        cfg.set(k, v)?;
    }
    let setup = toy_setup(7, 200, 200, 50, 64)?;
    let mut t = Trainer::new(cfg.clone())?;
    let start = Instant::now();
    let every = (cfg.generator_steps / 10).max(1);
    let mut acc = [0.0f64; 5];
    for s in 1..=cfg.generator_steps {
        let log = t.step(&setup.train)?;
        acc[0] += log.reward;
        acc[1] += log.value_loss;
        acc[2] += log.policy_loss;
        acc[3] += log.critic_loss;
        acc[4] += log.critic_gap;
        if s % every == 0 {
            let r = evaluate_toy(t.agent(), &setup.heldout)?;
            let k = every as f64;
            println!(
                "step {s:5} {:6.1}s R {:8.3} vl {:8.3} pl {:8.3} cl {:8.3} gap {:7.3} | exp+ {:.2} col+ {:.2} both {:.2} exp {:+.3} sat {:+.3} vib {:+.3} psnr {:.2}->{:.2}",
                start.elapsed().as_secs_f64(),
                acc[0] / k, acc[1] / k, acc[2] / k, acc[3] / k, acc[4] / k,
                r.exposure_positive, r.color_positive, r.both_positive,
                r.mean_exposure, r.mean_saturation, r.mean_vibrance,
                r.psnr_identity, r.psnr_enhanced
            );
            acc = [0.0; 5];
        }
    }
    Ok(())
}
