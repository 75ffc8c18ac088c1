//! The discriminator: a convolutional critic trained with the Wasserstein
//! objective plus a gradient penalty on interpolated images.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::{Graph, ParamId, ParamSet, Real, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct CriticConfig {
    /// Output channels of the stride-2 conv stack. Empty means a purely
    /// linear critic (one dense layer on the flattened image).
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub slope: f64,
    pub input_size: usize,
}

impl Default for CriticConfig {
    fn default() -> Self {
        CriticConfig {
            channels: vec![32, 64, 128, 256],
            kernel: 5,
            slope: 0.2,
            input_size: 64,
        }
    }
}

impl CriticConfig {
    fn flat_features(&self) -> usize {
        let mut side = self.input_size;
        for _ in &self.channels {
            side = side.div_ceil(2);
        }
        let c = self.channels.last().copied().unwrap_or(3);
        c * side * side
    }
}

#[derive(Clone, Debug)]
pub struct CriticNet<T: Real> {
    config: CriticConfig,
    params: ParamSet<T>,
    convs: Vec<(ParamId, ParamId)>,
    head: (ParamId, ParamId),
}

/// How the penalty's input-gradient norm is obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PenaltyMode {
    /// Exact input gradient by backprop. The weight gradient of the norm is
    /// a forward difference of weight gradients along the unit input
    /// gradient, with the given step.
    Exact { step: f64 },
    /// Central differences along `directions` random unit vectors:
    /// `|grad D|^2 ~ n / R * sum_r d_r^2` for input dimension `n`.
    Directional { directions: usize, step: f64 },
}

impl Default for PenaltyMode {
    fn default() -> Self {
        PenaltyMode::Exact { step: 1e-2 }
    }
}

/// Batch estimate of `E[(|grad D(y_hat)| - 1)^2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GpEstimate {
    pub value: f64,
    pub norms: Vec<f64>,
}

/// Loss terms reported by one critic update.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticLossParts {
    pub loss: f64,
    pub mean_real: f64,
    pub mean_fake: f64,
    pub penalty: GpEstimate,
}

/// `-mean(real) + mean(fake) + lambda * Z`.
pub fn critic_loss(scores_real: &[f64], scores_fake: &[f64], penalty: f64, lambda: f64) -> Result<f64> {
    if scores_real.is_empty() || scores_fake.is_empty() {
        return Err(Error::invalid("critic loss needs non-empty batches"));
    }
    if scores_real.len() != scores_fake.len() {
        return Err(Error::shape("critic_loss", &[scores_real.len()], &[scores_fake.len()]));
    }
    Ok(-mean(scores_real) + mean(scores_fake) + lambda * penalty)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Stack images into a planar `[N, 3, H, W]` tensor.
pub fn images_to_tensor<T: Real>(images: &[&Image]) -> Result<Tensor<T>> {
    let first = images.first().ok_or_else(|| Error::invalid("empty image batch"))?;
    let (w, h) = first.dims();
    let mut data = Vec::with_capacity(images.len() * 3 * w * h);
    for img in images {
        if img.dims() != (w, h) {
            return Err(Error::shape("image batch", &[h, w], &[img.height(), img.width()]));
        }
        data.extend(img.to_planar().into_iter().map(|v| T::of(v as f64)));
    }
    Tensor::new(&[images.len(), 3, h, w], data)
}

impl<T: Real> CriticNet<T> {
    pub fn new<R: Rng + ?Sized>(config: CriticConfig, rng: &mut R) -> Self {
        let mut params = ParamSet::new();
        let mut convs = Vec::new();
        let mut c_in = 3;
        let k = config.kernel;
        for (i, &c_out) in config.channels.iter().enumerate() {
            let w = params.add_he_uniform(format!("conv{i}.weight"), &[c_out, c_in, k, k], c_in * k * k, rng);
            let b = params.add_zeros(format!("conv{i}.bias"), &[c_out]);
            convs.push((w, b));
            c_in = c_out;
        }
        let flat = config.flat_features();
        let hw = params.add_he_uniform("head.weight", &[1, flat], flat, rng);
        let hb = params.add_zeros("head.bias", &[1]);
        CriticNet {
            config,
            params,
            convs,
            head: (hw, hb),
        }
    }

    /// Rebuild from loaded parameters; names and shapes must match `config`.
    pub fn from_params(config: CriticConfig, params: ParamSet<T>) -> Result<Self> {
        let template = CriticNet::<T>::new(config.clone(), &mut rand::rngs::mock::StepRng::new(0, 0));
        check_layout(&template.params, &params)?;
        Ok(CriticNet { params, ..template })
    }

    pub fn config(&self) -> &CriticConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    /// Head weight and bias ids, handy for constructing probe critics.
    pub fn head(&self) -> (ParamId, ParamId) {
        self.head
    }

    /// Zero the final layer so every input scores exactly 0.
    pub fn zero_head(&mut self) {
        for id in [self.head.0, self.head.1] {
            self.params.get_mut(id).data_mut().iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// Scores `[N, 1]` for an `[N, 3, S, S]` input node.
    pub fn forward(&self, g: &mut Graph<'_, T>, input: Var) -> Result<Var> {
        let s = self.config.input_size;
        let shape = g.shape(input);
        if shape.len() != 4 || shape[1..] != [3, s, s] {
            return Err(Error::shape("critic input", shape, &[0, 3, s, s]));
        }
        let n = shape[0];
        let mut h = input;
        for &(w, b) in &self.convs {
            let (w, b) = (g.param(w), g.param(b));
            h = g.conv2d(h, w, b, 2)?;
            h = g.leaky_relu(h, self.config.slope);
        }
        let h = g.reshape(h, &[n, self.config.flat_features()])?;
        let (w, b) = (g.param(self.head.0), g.param(self.head.1));
        g.dense(h, w, b)
    }

    pub fn score_tensor(&self, input: Tensor<T>) -> Result<Vec<f64>> {
        let mut g = Graph::frozen(&self.params);
        let x = g.input(input);
        let out = self.forward(&mut g, x)?;
        Ok(g.value(out).data().iter().map(|v| v.as_f64()).collect())
    }

    pub fn score_batch(&self, images: &[&Image]) -> Result<Vec<f64>> {
        self.score_tensor(images_to_tensor(images)?)
    }

    pub fn score(&self, image: &Image) -> Result<f64> {
        Ok(self.score_batch(&[image])?[0])
    }

    /// Input gradients of `D` at each sample of `input`, one flat vector per sample.
    fn input_gradients(&self, input: Tensor<T>) -> Result<Vec<Vec<T>>> {
        let n = input.shape()[0];
        let per = input.len() / n;
        let mut g = Graph::frozen(&self.params);
        let x = g.input_with_grad(input);
        let out = self.forward(&mut g, x)?;
        let total = g.sum(out);
        let grads = g.backward(total)?;
        let gx = grads.wrt(x).expect("input requires grad").data();
        Ok(gx.chunks(per).map(<[T]>::to_vec).collect())
    }

    /// Penalty value on a batch of interpolates.
    pub fn gradient_penalty<R: Rng + ?Sized>(
        &self,
        interpolates: &[&Image],
        mode: PenaltyMode,
        rng: &mut R,
    ) -> Result<GpEstimate> {
        if interpolates.is_empty() {
            return Err(Error::invalid("gradient penalty needs a non-empty batch"));
        }
        let input = images_to_tensor::<T>(interpolates)?;
        let norms = match mode {
            PenaltyMode::Exact { .. } => self
                .input_gradients(input)?
                .iter()
                .map(|g| norm(g))
                .collect(),
            PenaltyMode::Directional { directions, step } => {
                let mut probe = DirectionalProbe::new(&input, directions, step, rng)?;
                let scores = self.score_tensor(probe.take_batch())?;
                probe.norms(&scores)
            }
        };
        Ok(estimate(norms))
    }

    /// Loss terms and parameter gradients of
    /// `-mean D(real) + mean D(fake) + lambda * Z(interpolates)`.
    pub fn loss_gradients<R: Rng + ?Sized>(
        &self,
        reals: &[&Image],
        fakes: &[&Image],
        interpolates: &[&Image],
        lambda: f64,
        mode: PenaltyMode,
        rng: &mut R,
    ) -> Result<(CriticLossParts, Vec<Tensor<T>>)> {
        if reals.is_empty() || fakes.is_empty() || interpolates.is_empty() {
            return Err(Error::invalid("critic update needs non-empty batches"));
        }
        let (nr, nf) = (reals.len(), fakes.len());
        let all: Vec<&Image> = reals.iter().chain(fakes).copied().collect();
        let rf = images_to_tensor::<T>(&all)?;
        let interp = images_to_tensor::<T>(interpolates)?;
        let ni = interpolates.len();
        let per = interp.len() / ni;

        let mut weights: Vec<f64> = (0..nr).map(|_| -1.0 / nr as f64).chain((0..nf).map(|_| 1.0 / nf as f64)).collect();

        match mode {
            PenaltyMode::Exact { step } => {
                let gxs = self.input_gradients(interp.clone())?;
                let norms: Vec<f64> = gxs.iter().map(|g| norm(g)).collect();
                // d|g|/dtheta = d/dtheta [u . grad_x D] with u = g/|g| held fixed,
                // which is (grad_theta D(x + h u) - grad_theta D(x)) / h.
                let mut data = rf.into_data();
                data.extend_from_slice(interp.data());
                for (i, g) in gxs.iter().enumerate() {
                    let x = &interp.data()[i * per..(i + 1) * per];
                    let n = norms[i];
                    let scale = if n > 0.0 { step / n } else { 0.0 };
                    data.extend(x.iter().zip(g).map(|(&xv, &gv)| xv + T::of(scale) * gv));
                }
                for &n in &norms {
                    let c = if n > 0.0 {
                        lambda / ni as f64 * 2.0 * (n - 1.0) / step
                    } else {
                        0.0
                    };
                    weights.push(-c);
                }
                for &n in &norms {
                    let c = if n > 0.0 {
                        lambda / ni as f64 * 2.0 * (n - 1.0) / step
                    } else {
                        0.0
                    };
                    weights.push(c);
                }
                let s = self.config.input_size;
                let batch = Tensor::new(&[nr + nf + 2 * ni, 3, s, s], data)?;
                let mut g = Graph::with_params(&self.params);
                let x = g.input(batch);
                let scores = self.forward(&mut g, x)?;
                let objective = g.weighted_sum(scores, &weights)?;
                let grads = g.backward(objective)?;
                let sv: Vec<f64> = g.value(scores).data().iter().map(|v| v.as_f64()).collect();
                let penalty = estimate(norms);
                let loss = critic_loss(&sv[..nr], &sv[nr..nr + nf], penalty.value, lambda)?;
                let parts = CriticLossParts {
                    loss,
                    mean_real: mean(&sv[..nr]),
                    mean_fake: mean(&sv[nr..nr + nf]),
                    penalty,
                };
                Ok((parts, grads.into_params()))
            }
            PenaltyMode::Directional { directions, step } => {
                let mut probe = DirectionalProbe::new(&interp, directions, step, rng)?;
                let mut g = Graph::with_params(&self.params);
                let x = g.input(rf);
                let scores = self.forward(&mut g, x)?;
                let wass = g.weighted_sum(scores, &weights)?;
                let px = g.input(probe.take_batch());
                let ps = self.forward(&mut g, px)?;
                let z = probe.penalty_node(&mut g, ps)?;
                let z_scaled = g.scale(z, lambda);
                let objective = g.add(wass, z_scaled)?;
                let grads = g.backward(objective)?;

                let sv: Vec<f64> = g.value(scores).data().iter().map(|v| v.as_f64()).collect();
                let probe_scores: Vec<f64> = g.value(ps).data().iter().map(|v| v.as_f64()).collect();
                let penalty = estimate(probe.norms(&probe_scores));
                let loss = critic_loss(&sv[..nr], &sv[nr..], penalty.value, lambda)?;
                let parts = CriticLossParts {
                    loss,
                    mean_real: mean(&sv[..nr]),
                    mean_fake: mean(&sv[nr..]),
                    penalty,
                };
                Ok((parts, grads.into_params()))
            }
        }
    }
}

fn norm<T: Real>(g: &[T]) -> f64 {
    g.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt()
}

fn estimate(norms: Vec<f64>) -> GpEstimate {
    let value = norms.iter().map(|n| (n - 1.0).powi(2)).sum::<f64>() / norms.len() as f64;
    GpEstimate { value, norms }
}

/// Inputs `y_hat_i +- step * u_ir` for random unit directions `u_ir`.
struct DirectionalProbe<T> {
    batch: Tensor<T>,
    samples: usize,
    directions: usize,
    step: f64,
    dim: usize,
}

impl<T: Real> DirectionalProbe<T> {
    /// Hand the probe batch to a graph, keeping the bookkeeping.
    fn take_batch(&mut self) -> Tensor<T> {
        std::mem::replace(&mut self.batch, Tensor::scalar(T::zero()))
    }

    fn new<R: Rng + ?Sized>(input: &Tensor<T>, directions: usize, step: f64, rng: &mut R) -> Result<Self> {
        if directions == 0 || step <= 0.0 {
            return Err(Error::invalid("directional penalty needs directions >= 1 and step > 0"));
        }
        let samples = input.shape()[0];
        let dim = input.len() / samples;
        let m = samples * directions;
        let mut plus = Vec::with_capacity(m * dim);
        let mut minus = Vec::with_capacity(m * dim);
        let mut u = vec![0.0f64; dim];
        for i in 0..samples {
            let x = &input.data()[i * dim..(i + 1) * dim];
            for _ in 0..directions {
                unit_direction(&mut u, rng);
                plus.extend(x.iter().zip(&u).map(|(&xv, &uv)| xv + T::of(step * uv)));
                minus.extend(x.iter().zip(&u).map(|(&xv, &uv)| xv - T::of(step * uv)));
            }
        }
        plus.extend(minus);
        let mut shape = input.shape().to_vec();
        shape[0] = 2 * m;
        Ok(DirectionalProbe {
            batch: Tensor::new(&shape, plus)?,
            samples,
            directions,
            step,
            dim,
        })
    }

    fn norms(&self, scores: &[f64]) -> Vec<f64> {
        let m = self.samples * self.directions;
        (0..self.samples)
            .map(|i| {
                let ss: f64 = (0..self.directions)
                    .map(|r| {
                        let k = i * self.directions + r;
                        let d = (scores[k] - scores[m + k]) / (2.0 * self.step);
                        d * d
                    })
                    .sum();
                (ss * self.dim as f64 / self.directions as f64).sqrt()
            })
            .collect()
    }

    /// Same estimate as [`Self::norms`], as a differentiable graph node.
    fn penalty_node(&self, g: &mut Graph<'_, T>, scores: Var) -> Result<Var> {
        let m = self.samples * self.directions;
        let flat = g.reshape(scores, &[2 * m])?;
        let plus = g.rows(flat, 0, m)?;
        let minus = g.rows(flat, m, m)?;
        let diff = g.sub(plus, minus)?;
        let d = g.scale(diff, 1.0 / (2.0 * self.step));
        let d2 = g.square(d);
        let d2 = g.reshape(d2, &[self.samples, self.directions])?;
        let ss = g.sum_last(d2);
        let ss = g.scale(ss, self.dim as f64 / self.directions as f64);
        let n = g.sqrt(ss);
        let dev = g.shift(n, -1.0);
        let sq = g.square(dev);
        let total = g.sum(sq);
        Ok(g.scale(total, 1.0 / self.samples as f64))
    }
}

fn unit_direction<R: Rng + ?Sized>(u: &mut [f64], rng: &mut R) {
    loop {
        for v in u.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let n = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-12 {
            u.iter_mut().for_each(|v| *v /= n);
            return;
        }
    }
}

pub(crate) fn check_layout<T: Real>(want: &ParamSet<T>, got: &ParamSet<T>) -> Result<()> {
    if want.len() != got.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {}",
            want.len(),
            got.len()
        )));
    }
    for ((_, wn, wv), (_, gn, gv)) in want.iter().zip(got.iter()) {
        if wn != gn || wv.shape() != gv.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor {gn} {:?} does not match expected {wn} {:?}",
                gv.shape(),
                wv.shape()
            )));
        }
    }
    Ok(())
}
