//! The generator: an actor-critic agent that looks at a 64x64 thumbnail once
//! and picks one discrete parameter per filter.

use rand::Rng;

use crate::critic::images_to_tensor;
use crate::error::{Error, Result};
use crate::filters::{ActionVector, FilterSpec, FILTERS, NUM_FILTERS};
use crate::image::Image;
use crate::nn::{Graph, ParamId, ParamSet, Real, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    pub trunk_channels: Vec<usize>,
    pub kernel: usize,
    pub slope: f64,
    pub input_size: usize,
    /// Discretization steps per filter (`L`).
    pub levels: usize,
    /// Channels of the 1D policy sequence.
    pub seq_channels: usize,
    pub value_hidden: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            trunk_channels: vec![16, 32, 64, 64],
            kernel: 5,
            slope: 0.2,
            input_size: 64,
            levels: 33,
            seq_channels: 64,
            value_hidden: 64,
        }
    }
}

impl AgentConfig {
    fn flat_features(&self) -> usize {
        let mut side = self.input_size;
        for _ in &self.trunk_channels {
            side = side.div_ceil(2);
        }
        self.trunk_channels.last().copied().unwrap_or(3) * side * side
    }

    /// Length of the sequence entering the policy convolutions; two
    /// unpadded kernel-3 layers shrink it to exactly `levels`.
    pub fn seq_len(&self) -> usize {
        self.levels + 4
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::Config(format!("levels must be at least 2, got {}", self.levels)));
        }
        if self.kernel == 0 || self.input_size == 0 || self.seq_channels == 0 || self.value_hidden == 0 {
            return Err(Error::Config("agent sizes must be positive".into()));
        }
        if self.seq_channels < NUM_FILTERS {
            return Err(Error::Config(format!(
                "seq_channels must be at least {NUM_FILTERS}, got {}",
                self.seq_channels
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Layers {
    trunk: Vec<(ParamId, ParamId)>,
    value_hidden: (ParamId, ParamId),
    value_out: (ParamId, ParamId),
    policy_dense: (ParamId, ParamId),
    policy_conv: [(ParamId, ParamId); 2],
}

#[derive(Clone, Debug)]
pub struct AgentNet<T: Real> {
    config: AgentConfig,
    params: ParamSet<T>,
    layers: Layers,
}

/// Graph nodes produced by one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct AgentOutputs {
    /// Column log-probabilities, `[N, L, K]`.
    pub log_policy: Var,
    /// State values, `[N, 1]`.
    pub value: Var,
}

impl<T: Real> AgentNet<T> {
    pub fn new<R: Rng + ?Sized>(config: AgentConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut p = ParamSet::new();
        let k = config.kernel;
        let mut trunk = Vec::new();
        let mut c_in = 3;
        for (i, &c_out) in config.trunk_channels.iter().enumerate() {
            let w = p.add_he_uniform(format!("trunk{i}.weight"), &[c_out, c_in, k, k], c_in * k * k, rng);
            let b = p.add_zeros(format!("trunk{i}.bias"), &[c_out]);
            trunk.push((w, b));
            c_in = c_out;
        }
        let flat = config.flat_features();
        let hidden = config.value_hidden;
        let value_hidden = (
            p.add_he_uniform("value.hidden.weight", &[hidden, flat], flat, rng),
            p.add_zeros("value.hidden.bias", &[hidden]),
        );
        let value_out = (
            p.add_he_uniform("value.out.weight", &[1, hidden], hidden, rng),
            p.add_zeros("value.out.bias", &[1]),
        );
        let seq = config.seq_channels * config.seq_len();
        let policy_dense = (
            p.add_he_uniform("policy.dense.weight", &[seq, flat], flat, rng),
            p.add_zeros("policy.dense.bias", &[seq]),
        );
        let c = config.seq_channels;
        let conv0 = (
            p.add_he_uniform("policy.conv0.weight", &[c, c, 3], c * 3, rng),
            p.add_zeros("policy.conv0.bias", &[c]),
        );
        let conv1 = (
            p.add_he_uniform("policy.conv1.weight", &[NUM_FILTERS, c, 3], c * 3, rng),
            p.add_zeros("policy.conv1.bias", &[NUM_FILTERS]),
        );
        Ok(AgentNet {
            config,
            params: p,
            layers: Layers {
                trunk,
                value_hidden,
                value_out,
                policy_dense,
                policy_conv: [conv0, conv1],
            },
        })
    }

    pub fn from_params(config: AgentConfig, params: ParamSet<T>) -> Result<Self> {
        let template = AgentNet::<T>::new(config, &mut rand::rngs::mock::StepRng::new(0, 0))?;
        crate::critic::check_layout(&template.params, &params)?;
        Ok(AgentNet { params, ..template })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn forward(&self, g: &mut Graph<'_, T>, input: Var) -> Result<AgentOutputs> {
        let cfg = &self.config;
        let s = cfg.input_size;
        let shape = g.shape(input);
        if shape.len() != 4 || shape[1..] != [3, s, s] {
            return Err(Error::shape("agent input", shape, &[0, 3, s, s]));
        }
        let n = shape[0];
        let mut h = input;
        for &(w, b) in &self.layers.trunk {
            let (w, b) = (g.param(w), g.param(b));
            h = g.conv2d(h, w, b, 2)?;
            h = g.leaky_relu(h, cfg.slope);
        }
        let feat = g.reshape(h, &[n, cfg.flat_features()])?;

        let (w, b) = self.layers.value_hidden;
        let (w, b) = (g.param(w), g.param(b));
        let v = g.dense(feat, w, b)?;
        let v = g.leaky_relu(v, cfg.slope);
        let (w, b) = self.layers.value_out;
        let (w, b) = (g.param(w), g.param(b));
        let value = g.dense(v, w, b)?;

        let (w, b) = self.layers.policy_dense;
        let (w, b) = (g.param(w), g.param(b));
        let seq = g.dense(feat, w, b)?;
        let mut seq = g.reshape(seq, &[n, cfg.seq_channels, cfg.seq_len()])?;
        for (i, &(w, b)) in self.layers.policy_conv.iter().enumerate() {
            seq = g.leaky_relu(seq, cfg.slope);
            let (w, b) = (g.param(w), g.param(b));
            seq = g.conv1d_valid(seq, w, b)?;
            debug_assert_eq!(g.shape(seq)[2], cfg.seq_len() - 2 * (i + 1));
        }
        // [N, K, L] -> [N, L, K] so each filter is a column.
        let logits = g.swap_last2(seq)?;
        let log_policy = g.log_softmax_columns(logits)?;
        Ok(AgentOutputs { log_policy, value })
    }

    /// Policies and values for a batch of states.
    pub fn evaluate(&self, states: &[&Image]) -> Result<Vec<(PolicyMatrix, f64)>> {
        let mut g = Graph::frozen(&self.params);
        let x = g.input(images_to_tensor(states)?);
        let out = self.forward(&mut g, x)?;
        let policies = policies_from_graph(&g, out.log_policy)?;
        let values = g.value(out.value).data().iter().map(|v| v.as_f64());
        Ok(policies.into_iter().zip(values).collect())
    }

    pub fn act(&self, state: &Image) -> Result<(PolicyMatrix, f64)> {
        Ok(self.evaluate(&[state])?.remove(0))
    }

    /// Rig the policy head so every column is (numerically) one-hot at the
    /// given 0-based level regardless of the input.
    pub fn force_policy(&mut self, levels: &[usize; NUM_FILTERS]) -> Result<()> {
        let cfg = self.config.clone();
        if let Some(&bad) = levels.iter().find(|&&l| l >= cfg.levels) {
            return Err(Error::invalid(format!("level {bad} out of range for L = {}", cfg.levels)));
        }
        let (dw, db) = self.layers.policy_dense;
        let [(w0, b0), (w1, b1)] = self.layers.policy_conv;
        for id in [dw, db, w0, b0, w1, b1] {
            self.params.get_mut(id).data_mut().iter_mut().for_each(|v| *v = T::zero());
        }
        let c = cfg.seq_channels;
        let seq_len = cfg.seq_len();
        let bias = self.params.get_mut(db).data_mut();
        for (k, &l) in levels.iter().enumerate() {
            // Two valid convs with centre taps shift positions by 2.
            bias[k * seq_len + l + 2] = T::one();
        }
        let w = self.params.get_mut(w0).data_mut();
        for ch in 0..c {
            w[(ch * c + ch) * 3 + 1] = T::one();
        }
        let w = self.params.get_mut(w1).data_mut();
        for k in 0..NUM_FILTERS {
            w[(k * c + k) * 3 + 1] = T::of(50.0);
        }
        Ok(())
    }
}

/// Read `[N, L, K]` log-probabilities out of a graph.
pub fn policies_from_graph<T: Real>(g: &Graph<'_, T>, log_policy: Var) -> Result<Vec<PolicyMatrix>> {
    let t = g.value(log_policy);
    let &[n, l, k] = t.shape() else {
        return Err(Error::shape("policy", t.shape(), &[0, 0, NUM_FILTERS]));
    };
    let per = l * k;
    (0..n)
        .map(|i| {
            let probs = t.data()[i * per..(i + 1) * per].iter().map(|v| v.as_f64().exp()).collect();
            PolicyMatrix::new(l, k, probs)
        })
        .collect()
}

/// `q` in `R^{L x K}`, stored level-major: entry `(l, k)` at `l * K + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyMatrix {
    levels: usize,
    filters: usize,
    probs: Vec<f64>,
}

impl PolicyMatrix {
    pub fn new(levels: usize, filters: usize, probs: Vec<f64>) -> Result<Self> {
        if levels < 2 || filters == 0 {
            return Err(Error::invalid(format!("policy needs L >= 2 and K >= 1, got {levels}x{filters}")));
        }
        if probs.len() != levels * filters {
            return Err(Error::shape("policy matrix", &[probs.len()], &[levels, filters]));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::NonFinite("policy probabilities must be finite and non-negative".into()));
        }
        let q = PolicyMatrix { levels, filters, probs };
        for k in 0..filters {
            let total: f64 = q.column(k).sum();
            if (total - 1.0).abs() > 1e-4 {
                return Err(Error::invalid(format!("policy column {k} sums to {total}")));
            }
        }
        Ok(q)
    }

    /// Every column uniform.
    pub fn uniform(levels: usize, filters: usize) -> Self {
        PolicyMatrix {
            levels,
            filters,
            probs: vec![1.0 / levels as f64; levels * filters],
        }
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn filters(&self) -> usize {
        self.filters
    }

    pub fn get(&self, l: usize, k: usize) -> f64 {
        self.probs[l * self.filters + k]
    }

    pub fn column(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.levels).map(move |l| self.get(l, k))
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Natural-log entropy of column `k`.
    pub fn entropy(&self, k: usize) -> f64 {
        -self.column(k).filter(|&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
    }

    /// 0-based argmax per column, ties to the smallest level.
    pub fn greedy_levels(&self) -> Vec<usize> {
        (0..self.filters)
            .map(|k| {
                let mut best = 0;
                for l in 1..self.levels {
                    if self.get(l, k) > self.get(best, k) {
                        best = l;
                    }
                }
                best
            })
            .collect()
    }

    /// 0-based levels drawn independently per column by inverse CDF.
    pub fn sample_levels<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        (0..self.filters)
            .map(|k| {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for l in 0..self.levels {
                    acc += self.get(l, k);
                    if u < acc {
                        return l;
                    }
                }
                // Rounding left the column a hair short of 1.
                (0..self.levels).rev().find(|&l| self.get(l, k) > 0.0).unwrap_or(self.levels - 1)
            })
            .collect()
    }
}

/// `a_min + (a_max - a_min) * (l - 1) / (L - 1)` for 1-based `l`.
pub fn decode_action(l: usize, spec: &FilterSpec, levels: usize) -> Result<f64> {
    if levels < 2 {
        return Err(Error::invalid(format!("need at least 2 levels, got {levels}")));
    }
    if l == 0 || l > levels {
        return Err(Error::invalid(format!("level {l} outside 1..={levels}")));
    }
    if l == levels {
        return Ok(spec.max);
    }
    Ok(spec.min + (spec.max - spec.min) * (l - 1) as f64 / (levels - 1) as f64)
}

/// Action vector for 0-based levels, one per filter.
pub fn levels_to_action(levels: &[usize], l_count: usize) -> Result<ActionVector> {
    if levels.len() != NUM_FILTERS {
        return Err(Error::invalid(format!("expected {NUM_FILTERS} levels, got {}", levels.len())));
    }
    let mut values = [0.0; NUM_FILTERS];
    for ((v, &l), f) in values.iter_mut().zip(levels).zip(FILTERS) {
        *v = decode_action(l + 1, &f.spec(), l_count)?;
    }
    ActionVector::new(values)
}

/// Stochastic action: chosen 0-based levels and the decoded vector.
pub fn sample_action<R: Rng + ?Sized>(q: &PolicyMatrix, rng: &mut R) -> Result<(Vec<usize>, ActionVector)> {
    let levels = q.sample_levels(rng);
    let a = levels_to_action(&levels, q.levels())?;
    Ok((levels, a))
}

pub fn greedy_action(q: &PolicyMatrix) -> Result<ActionVector> {
    levels_to_action(&q.greedy_levels(), q.levels())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reward {
    pub value: f64,
    pub score: f64,
    pub mse: f64,
}

/// `R = D(y') - alpha * MSE(x, y')`.
pub fn compute_reward(score: f64, mse: f64, alpha: f64) -> Result<Reward> {
    if mse.is_nan() || mse < 0.0 || !score.is_finite() || !alpha.is_finite() {
        return Err(Error::invalid(format!("bad reward inputs: score {score}, mse {mse}, alpha {alpha}")));
    }
    Ok(Reward {
        value: score - alpha * mse,
        score,
        mse,
    })
}

/// `(V - R)^2 / 2`.
pub fn value_loss(v: f64, r: f64) -> f64 {
    0.5 * (v - r) * (v - r)
}

/// `sum_k -ln q(l_k, k) * (R - V) - beta * H_k`, chosen levels 0-based.
pub fn policy_loss(q: &PolicyMatrix, chosen: &[usize], r: f64, v: f64, beta: f64) -> Result<f64> {
    if chosen.len() != q.filters() {
        return Err(Error::shape("policy_loss", &[chosen.len()], &[q.filters()]));
    }
    let adv = r - v;
    let mut total = 0.0;
    for (k, &l) in chosen.iter().enumerate() {
        if l >= q.levels() {
            return Err(Error::invalid(format!("chosen level {l} out of range")));
        }
        total += -q.get(l, k).ln() * adv - beta * q.entropy(k);
    }
    Ok(total)
}

/// What one batch of rollouts feeds back into the generator loss.
#[derive(Clone, Debug)]
pub struct Rollouts {
    /// 0-based chosen levels, `K` per sample.
    pub chosen: Vec<Vec<usize>>,
    pub rewards: Vec<f64>,
    /// `R - V`, held constant in the policy term.
    pub advantages: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorLossParts {
    pub value_loss: f64,
    pub policy_loss: f64,
}

/// Batch-mean value loss plus policy loss, as graph nodes.
pub fn generator_loss<T: Real>(
    g: &mut Graph<'_, T>,
    out: AgentOutputs,
    rollouts: &Rollouts,
    beta: f64,
) -> Result<(Var, GeneratorLossParts)> {
    let shape = g.shape(out.log_policy).to_vec();
    let &[n, l, k] = shape.as_slice() else {
        return Err(Error::shape("generator_loss", &shape, &[0, 0, NUM_FILTERS]));
    };
    if rollouts.chosen.len() != n || rollouts.rewards.len() != n || rollouts.advantages.len() != n {
        return Err(Error::shape(
            "rollouts",
            &[rollouts.chosen.len(), rollouts.rewards.len(), rollouts.advantages.len()],
            &[n, n, n],
        ));
    }
    let inv_n = 1.0 / n as f64;

    let mut indices = Vec::with_capacity(n * k);
    let mut weights = Vec::with_capacity(n * k);
    for (i, (levels, &adv)) in rollouts.chosen.iter().zip(&rollouts.advantages).enumerate() {
        if levels.len() != k || levels.iter().any(|&lv| lv >= l) {
            return Err(Error::invalid(format!("sample {i}: chosen levels {levels:?} do not fit {l}x{k}")));
        }
        for (kk, &lv) in levels.iter().enumerate() {
            indices.push((i * l + lv) * k + kk);
            weights.push(-adv * inv_n);
        }
    }
    let picked = g.gather(out.log_policy, &indices)?;
    let pg = g.weighted_sum(picked, &weights)?;

    // -beta * H = beta * sum q ln q.
    let q = g.exp(out.log_policy);
    let qlogq = g.mul(q, out.log_policy)?;
    let neg_h = g.sum(qlogq);
    let ent = g.scale(neg_h, beta * inv_n);
    let policy = g.add(pg, ent)?;

    let targets = Tensor::new(&[n, 1], rollouts.rewards.iter().map(|&r| T::of(r)).collect())?;
    let r = g.input(targets);
    let diff = g.sub(out.value, r)?;
    let sq = g.square(diff);
    let total = g.sum(sq);
    let value = g.scale(total, 0.5 * inv_n);

    let loss = g.add(policy, value)?;
    let parts = GeneratorLossParts {
        value_loss: g.value(value).item().as_f64(),
        policy_loss: g.value(policy).item().as_f64(),
    };
    Ok((loss, parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::Filter;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn small_config() -> AgentConfig {
        AgentConfig {
            trunk_channels: vec![2, 3],
            kernel: 3,
            input_size: 8,
            levels: 5,
            seq_channels: 12,
            value_hidden: 4,
            ..AgentConfig::default()
        }
    }

    fn random_image(size: usize, r: &mut ChaCha8Rng) -> Image {
        Image::new(size, size, (0..size * size * 3).map(|_| r.gen::<f32>()).collect()).unwrap()
    }

    #[test]
    fn decode_endpoints_and_midpoint() {
        let s = Filter::Exposure.spec();
        assert_eq!(decode_action(1, &s, 33).unwrap(), -1.0);
        assert_eq!(decode_action(33, &s, 33).unwrap(), 1.0);
        assert_eq!(decode_action(17, &s, 33).unwrap(), 0.0);
        assert!(decode_action(0, &s, 33).is_err());
        assert!(decode_action(34, &s, 33).is_err());
        assert!(decode_action(1, &s, 1).is_err());
        let all: Vec<f64> = (1..=33).map(|l| decode_action(l, &s, 33).unwrap()).collect();
        assert!(all.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn greedy_prefers_first_of_ties() {
        let q = PolicyMatrix::new(3, 1, vec![0.4, 0.4, 0.2]).unwrap();
        assert_eq!(q.greedy_levels(), vec![0]);
        let q = PolicyMatrix::new(3, 1, vec![0.2, 0.4, 0.4]).unwrap();
        assert_eq!(q.greedy_levels(), vec![1]);
    }

    #[test]
    fn one_hot_column_always_sampled() {
        let mut probs = vec![0.0; 4 * 2];
        probs[2 * 2] = 1.0;
        probs[3 * 2 + 1] = 1.0;
        let q = PolicyMatrix::new(4, 2, probs).unwrap();
        let mut r = rng(1);
        for _ in 0..200 {
            assert_eq!(q.sample_levels(&mut r), vec![2, 3]);
        }
    }

    #[test]
    fn uniform_sampling_frequencies() {
        let l = 33;
        let q = PolicyMatrix::uniform(l, 1);
        let mut counts = vec![0usize; l];
        let mut r = rng(2);
        let draws = 100_000;
        for _ in 0..draws {
            counts[q.sample_levels(&mut r)[0]] += 1;
        }
        let p = 1.0 / l as f64;
        let expected = draws as f64 * p;
        let sd = (expected * (1.0 - p)).sqrt();
        // A 3 sigma family-wise bound over 33 bins is about 3.94 sigma per bin.
        for &c in &counts {
            assert!((c as f64 - expected).abs() < 3.94 * sd, "{counts:?}");
        }
        // Chi-square with 32 degrees of freedom; 99.9th percentile is 62.5.
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 62.5, "{chi2}");
    }

    #[test]
    fn reward_and_losses() {
        assert!((compute_reward(0.5, 0.001, 100.0).unwrap().value - 0.4).abs() < 1e-12);
        assert_eq!(compute_reward(0.7, 0.0, 100.0).unwrap().value, 0.7);
        assert_eq!(compute_reward(0.7, 0.3, 0.0).unwrap().value, 0.7);
        assert!(compute_reward(0.7, -0.1, 1.0).is_err());
        assert_eq!(value_loss(1.0, 0.0), 0.5);
        assert_eq!(value_loss(2.0, 2.0), 0.0);
        assert_eq!(value_loss(2.0, -1.0), 4.5);
        let q = PolicyMatrix::uniform(2, 1);
        assert!((policy_loss(&q, &[0], 1.0, 0.0, 0.0).unwrap() - 0.5f64.ln().abs()).abs() < 1e-12);
        let q = PolicyMatrix::uniform(33, 12);
        assert!((q.entropy(0) - 33f64.ln()).abs() < 1e-12);
        let bonus = -policy_loss(&q, &[0; 12], 0.0, 0.0, 0.001).unwrap();
        assert!((bonus - 0.041_96).abs() < 1e-5);
    }

    #[test]
    fn forward_shapes_and_normalization() {
        let mut r = rng(3);
        let net = AgentNet::<f32>::new(AgentConfig::default(), &mut r).unwrap();
        let img = random_image(64, &mut r);
        let (q, v) = net.act(&img).unwrap();
        assert_eq!((q.levels(), q.filters()), (33, 12));
        for k in 0..12 {
            let s: f64 = q.column(k).sum();
            assert!((s - 1.0).abs() < 1e-6);
            assert!(q.column(k).all(|p| p > 0.0));
        }
        assert!(v.is_finite());
        assert_eq!(net.act(&img).unwrap(), (q, v));
        assert!(net.act(&random_image(32, &mut r)).is_err());
    }

    #[test]
    fn forced_policy_is_greedy_choice() {
        let mut r = rng(4);
        let mut net = AgentNet::<f32>::new(AgentConfig::default(), &mut r).unwrap();
        let levels = [16, 0, 32, 20, 16, 16, 3, 16, 16, 16, 25, 16];
        net.force_policy(&levels).unwrap();
        let (q, _) = net.act(&random_image(64, &mut r)).unwrap();
        assert_eq!(q.greedy_levels(), levels);
        assert!(q.get(0, 1) > 0.999_999);
        net.force_policy(&[16; 12]).unwrap();
        let (q, _) = net.act(&random_image(64, &mut r)).unwrap();
        assert_eq!(greedy_action(&q).unwrap(), ActionVector::neutral());
    }

    /// The graph loss must agree with the scalar formulas.
    #[test]
    fn graph_loss_matches_scalar_loss() {
        let mut r = rng(5);
        let net = AgentNet::<f64>::new(small_config(), &mut r).unwrap();
        let imgs: Vec<Image> = (0..3).map(|_| random_image(8, &mut r)).collect();
        let refs: Vec<&Image> = imgs.iter().collect();
        let mut g = Graph::with_params(net.params());
        let x = g.input(images_to_tensor(&refs).unwrap());
        let out = net.forward(&mut g, x).unwrap();
        let qs = policies_from_graph(&g, out.log_policy).unwrap();
        let vs: Vec<f64> = g.value(out.value).data().to_vec();
        let chosen: Vec<Vec<usize>> = qs.iter().map(|q| q.sample_levels(&mut r)).collect();
        let rewards = vec![0.3, -0.2, 1.1];
        let advantages: Vec<f64> = rewards.iter().zip(&vs).map(|(r, v)| r - v).collect();
        let roll = Rollouts {
            chosen: chosen.clone(),
            rewards: rewards.clone(),
            advantages,
        };
        let (_, parts) = generator_loss(&mut g, out, &roll, 0.01).unwrap();
        let mut pl = 0.0;
        let mut vl = 0.0;
        for i in 0..3 {
            pl += policy_loss(&qs[i], &chosen[i], rewards[i], vs[i], 0.01).unwrap() / 3.0;
            vl += value_loss(vs[i], rewards[i]) / 3.0;
        }
        assert!((parts.policy_loss - pl).abs() < 1e-9);
        assert!((parts.value_loss - vl).abs() < 1e-9);
    }

    #[test]
    fn positive_advantage_raises_chosen_probability() {
        let mut r = rng(6);
        let mut net = AgentNet::<f64>::new(small_config(), &mut r).unwrap();
        let img = random_image(8, &mut r);
        let (q0, v0) = net.act(&img).unwrap();
        let chosen = vec![1usize; 12];
        let mut g = Graph::with_params(net.params());
        let x = g.input(images_to_tensor(&[&img]).unwrap());
        let out = net.forward(&mut g, x).unwrap();
        let roll = Rollouts {
            chosen: vec![chosen.clone()],
            rewards: vec![v0 + 1.0],
            advantages: vec![1.0],
        };
        let (loss, _) = generator_loss(&mut g, out, &roll, 0.0).unwrap();
        let grads = g.backward(loss).unwrap().into_params();
        for (p, gr) in net.params_mut().values_mut().iter_mut().zip(&grads) {
            for (w, d) in p.data_mut().iter_mut().zip(gr.data()) {
                *w -= 1e-3 * d;
            }
        }
        let (q1, _) = net.act(&img).unwrap();
        for k in 0..12 {
            assert!(q1.get(1, k) > q0.get(1, k), "filter {k}");
        }
    }
}
