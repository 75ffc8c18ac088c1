use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use retouch_core::critic::{CriticConfig, CriticNet, PenaltyMode};
use retouch_core::image::Image;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let channels: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse().unwrap())
        .collect();
    let cfg = if channels.is_empty() {
        CriticConfig::default()
    } else {
        CriticConfig { channels, ..CriticConfig::default() }
    };
    let net = CriticNet::<f32>::new(cfg, &mut rng);
    let imgs: Vec<Image> = (0..24)
        .map(|i| Image::filled(64, 64, [0.1 * (i % 9) as f32, 0.5, 0.3]).unwrap())
        .collect();
    let r: Vec<&Image> = imgs[..8].iter().collect();
    let f: Vec<&Image> = imgs[8..16].iter().collect();
    let it: Vec<&Image> = imgs[16..].iter().collect();
    let t = Instant::now();
    for _ in 0..3 {
        net.loss_gradients(&r, &f, &it, 10.0, PenaltyMode::default(), &mut rng).unwrap();
    }
    println!("critic step: {:.3}s", t.elapsed().as_secs_f64() / 3.0);
    let t = Instant::now();
    for _ in 0..3 {
        net.score_batch(&r).unwrap();
    }
    println!("score 8: {:.3}s", t.elapsed().as_secs_f64() / 3.0);
}
