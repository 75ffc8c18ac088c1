//! Alternating adversarial training: one A2C update of the agent, then
//! `U` Wasserstein updates of the critic against a replay buffer.

mod buffer;
mod checkpoint;
mod config;
mod dataset;

pub use buffer::ReplayBuffer;
pub use checkpoint::{Checkpoint, Progress, MAGIC, VERSION};
pub use config::{PenaltyKind, TrainConfig};
pub use dataset::{list_files, load_dir, Dataset};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::{compute_reward, generator_loss, policies_from_graph, sample_action, AgentNet, Rollouts};
use crate::critic::{images_to_tensor, CriticLossParts, CriticNet};
use crate::error::{Error, Result};
use crate::filters::apply_pipeline;
use crate::image::{mse, Image};
use crate::nn::{Adam, Graph};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorStats {
    pub reward: f64,
    pub value_loss: f64,
    pub policy_loss: f64,
    pub score: f64,
    pub mse: f64,
}

/// One row of the training log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLog {
    pub step: u64,
    pub reward: f64,
    pub value_loss: f64,
    pub policy_loss: f64,
    /// Mean over this step's critic updates; NaN if all were skipped.
    pub critic_loss: f64,
    /// Mean `D(real) - D(fake)` over this step's critic updates.
    pub critic_gap: f64,
}

pub struct Trainer {
    config: TrainConfig,
    agent: AgentNet<f32>,
    critic: CriticNet<f32>,
    agent_opt: Adam<f32>,
    critic_opt: Adam<f32>,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    progress: Progress,
}

impl Trainer {
    /// Fresh networks; all randomness flows from `config.seed`.
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let critic = CriticNet::new(config.critic_config(), &mut rng);
        let agent = AgentNet::new(config.agent_config(), &mut rng)?;
        let agent_opt = Adam::new(config.adam(), agent.params());
        let critic_opt = Adam::new(config.adam(), critic.params());
        Ok(Trainer {
            buffer: ReplayBuffer::new(config.replay_capacity),
            config,
            agent,
            critic,
            agent_opt,
            critic_opt,
            rng,
            progress: Progress::default(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn agent(&self) -> &AgentNet<f32> {
        &self.agent
    }

    pub fn agent_mut(&mut self) -> &mut AgentNet<f32> {
        &mut self.agent
    }

    pub fn critic(&self) -> &CriticNet<f32> {
        &self.critic
    }

    pub fn critic_mut(&mut self) -> &mut CriticNet<f32> {
        &mut self.critic
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn progress(&self) -> Progress {
        self.progress
    }

    fn check_size(&self, dataset: &Dataset) -> Result<()> {
        let want = self.agent.config().input_size;
        if dataset.size() != want {
            return Err(Error::invalid(format!(
                "dataset images are {0}x{0}, networks expect {want}x{want}",
                dataset.size()
            )));
        }
        Ok(())
    }

    /// Sample actions for a batch of source states, reward them with the
    /// critic and take one optimizer step on value + policy loss.
    pub fn generator_step(&mut self, dataset: &Dataset) -> Result<GeneratorStats> {
        self.check_size(dataset)?;
        let n = self.config.batch_size;
        let states = dataset.sample_source(n, &mut self.rng);
        let mut g = Graph::with_params(self.agent.params());
        let x = g.input(images_to_tensor(&states)?);
        let out = self.agent.forward(&mut g, x)?;
        let policies = policies_from_graph(&g, out.log_policy)?;
        let values: Vec<f64> = g.value(out.value).data().iter().map(|&v| v as f64).collect();

        let mut chosen = Vec::with_capacity(n);
        let mut edited = Vec::with_capacity(n);
        for (q, state) in policies.iter().zip(&states) {
            let (levels, action) = sample_action(q, &mut self.rng)?;
            edited.push(apply_pipeline(state, &action)?);
            chosen.push(levels);
        }
        let scores = self.critic.score_batch(&edited.iter().collect::<Vec<_>>())?;
        let mut rewards = Vec::with_capacity(n);
        let mut mses = Vec::with_capacity(n);
        for ((state, y), &score) in states.iter().zip(&edited).zip(&scores) {
            let e = mse(state, y)?;
            rewards.push(compute_reward(score, e, self.config.alpha)?.value);
            mses.push(e);
        }
        let advantages = rewards.iter().zip(&values).map(|(r, v)| r - v).collect();
        let rollouts = Rollouts {
            chosen,
            rewards,
            advantages,
        };
        let (loss, parts) = generator_loss(&mut g, out, &rollouts, self.config.beta)?;
        let step = self.progress.generator_steps + 1;
        let grads = g
            .backward(loss)
            .map_err(|e| Error::NonFinite(format!("generator step {step}: {e} (parts {parts:?})")))?;
        drop(g);
        self.agent_opt.step(self.agent.params_mut(), &grads.into_params())?;
        for y in edited {
            self.buffer.push(y);
        }
        self.progress.generator_steps = step;
        Ok(GeneratorStats {
            reward: mean(&rollouts.rewards),
            value_loss: parts.value_loss,
            policy_loss: parts.policy_loss,
            score: mean(&scores),
            mse: mean(&mses),
        })
    }

    /// One critic update on target reals versus buffered fakes. Returns
    /// `None` (and logs a warning) while the buffer is still empty.
    pub fn critic_step(&mut self, dataset: &Dataset) -> Result<Option<CriticLossParts>> {
        self.check_size(dataset)?;
        if self.buffer.is_empty() {
            log::warn!("replay buffer is empty; skipping critic update");
            return Ok(None);
        }
        let n = self.config.batch_size;
        let reals = dataset.sample_target(n, &mut self.rng);
        let fakes = self.buffer.sample(n, &mut self.rng);
        let interps = reals
            .iter()
            .zip(&fakes)
            .map(|(r, f)| {
                let eps: f32 = self.rng.gen();
                r.interpolate(f, eps)
            })
            .collect::<Result<Vec<Image>>>()?;
        let interp_refs: Vec<&Image> = interps.iter().collect();
        let mode = self.config.penalty_mode();
        let step = self.progress.critic_steps + 1;
        let (parts, grads) = self
            .critic
            .loss_gradients(&reals, &fakes, &interp_refs, self.config.lambda, mode, &mut self.rng)
            .map_err(|e| Error::NonFinite(format!("critic update {step}: {e}")))?;
        if !parts.loss.is_finite() {
            return Err(Error::NonFinite(format!("critic update {step}: loss {parts:?}")));
        }
        self.critic_opt.step(self.critic.params_mut(), &grads)?;
        self.progress.critic_steps = step;
        Ok(Some(parts))
    }

    /// One generator step followed by `U` critic steps.
    pub fn step(&mut self, dataset: &Dataset) -> Result<StepLog> {
        let gen = self.generator_step(dataset)?;
        let mut losses = Vec::new();
        let mut gaps = Vec::new();
        for _ in 0..self.config.critic_updates {
            if let Some(p) = self.critic_step(dataset)? {
                losses.push(p.loss);
                gaps.push(p.mean_real - p.mean_fake);
            }
        }
        let avg = |v: &[f64]| if v.is_empty() { f64::NAN } else { mean(v) };
        Ok(StepLog {
            step: self.progress.generator_steps,
            reward: gen.reward,
            value_loss: gen.value_loss,
            policy_loss: gen.policy_loss,
            critic_loss: avg(&losses),
            critic_gap: avg(&gaps),
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            progress: self.progress,
            agent: self.agent.params().clone(),
            critic: self.critic.params().clone(),
            agent_opt: self.agent_opt.clone(),
            critic_opt: self.critic_opt.clone(),
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Train for `config.generator_steps` steps. `on_step` sees every log row
/// and the trainer (for periodic checkpoints); an error from it aborts.
pub fn run_training(
    config: TrainConfig,
    dataset: &Dataset,
    mut on_step: impl FnMut(&StepLog, &Trainer) -> Result<()>,
) -> Result<Checkpoint> {
    let mut trainer = Trainer::new(config)?;
    for _ in 0..trainer.config.generator_steps {
        let log = trainer.step(dataset)?;
        on_step(&log, &trainer)?;
    }
    Ok(trainer.checkpoint())
}

#[cfg(test)]
mod tests;
