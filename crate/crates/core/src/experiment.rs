//! The synthetic unpaired experiment: learn to undo a darken-and-desaturate
//! distortion from unpaired distorted and clean scenes.

use crate::agent::AgentNet;
use crate::enhance::enhance;
use crate::error::Result;
use crate::filters::Filter;
use crate::image::{psnr, Image};
use crate::nn::Real;
use crate::synth::{distort, SceneGenerator};
use crate::trainer::{Dataset, TrainConfig};

pub struct ToySetup {
    pub train: Dataset,
    /// Held-out `(distorted, original)` pairs, never seen in training.
    pub heldout: Vec<(Image, Image)>,
}

/// Disjoint scene indices for source, target and held-out sets.
pub fn toy_setup(seed: u64, sources: usize, targets: usize, heldout: usize, size: usize) -> Result<ToySetup> {
    let gen = SceneGenerator::new(seed);
    let source = (0..sources).map(|i| distort(&gen.render(i as u64, size))).collect();
    let target = (sources..sources + targets).map(|i| gen.render(i as u64, size)).collect();
    let start = sources + targets;
    let heldout = (start..start + heldout)
        .map(|i| {
            let original = gen.render(i as u64, size);
            (distort(&original), original)
        })
        .collect();
    Ok(ToySetup {
        train: Dataset::from_images(source, target, size)?,
        heldout,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToyReport {
    pub images: usize,
    /// Fraction of held-out images with a positive Exposure parameter.
    pub exposure_positive: f64,
    /// Fraction with a positive Saturation or Vibrance parameter.
    pub color_positive: f64,
    /// Fraction meeting both conditions at once.
    pub both_positive: f64,
    pub mean_exposure: f64,
    pub mean_saturation: f64,
    pub mean_vibrance: f64,
    /// Mean PSNR of the untouched distorted image against the original.
    pub psnr_identity: f64,
    pub psnr_enhanced: f64,
}

impl ToyReport {
    pub fn psnr_gain(&self) -> f64 {
        self.psnr_enhanced - self.psnr_identity
    }
}

pub fn evaluate_toy<T: Real>(agent: &AgentNet<T>, heldout: &[(Image, Image)]) -> Result<ToyReport> {
    let n = heldout.len() as f64;
    let mut r = ToyReport {
        images: heldout.len(),
        exposure_positive: 0.0,
        color_positive: 0.0,
        both_positive: 0.0,
        mean_exposure: 0.0,
        mean_saturation: 0.0,
        mean_vibrance: 0.0,
        psnr_identity: 0.0,
        psnr_enhanced: 0.0,
    };
    for (distorted, original) in heldout {
        let out = enhance(agent, distorted)?;
        let exp = out.action.get(Filter::Exposure);
        let sat = out.action.get(Filter::Saturation);
        let vib = out.action.get(Filter::Vibrance);
        let color = sat > 0.0 || vib > 0.0;
        r.exposure_positive += f64::from(u8::from(exp > 0.0)) / n;
        r.color_positive += f64::from(u8::from(color)) / n;
        r.both_positive += f64::from(u8::from(exp > 0.0 && color)) / n;
        r.mean_exposure += exp / n;
        r.mean_saturation += sat / n;
        r.mean_vibrance += vib / n;
        r.psnr_identity += psnr(distorted, original)? / n;
        r.psnr_enhanced += psnr(&out.image, original)? / n;
    }
    Ok(r)
}

/// Configuration of the toy run: published hyperparameters, batch 8,
/// 2,000 generator steps, and a narrower critic so the run fits a laptop
/// CPU budget.
pub fn toy_config() -> TrainConfig {
    TrainConfig {
        generator_steps: 2000,
        critic_channels: vec![16, 32, 64, 128],
        seed: 2024,
        ..TrainConfig::default()
    }
}
