use super::{ParamSet, Real, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    /// WGAN-GP moments (0.5, 0.9) with learning rate 1e-4.
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.5,
            beta2: 0.9,
            eps: 1e-8,
        }
    }
}

/// Adam optimizer state for one [`ParamSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig, params: &ParamSet<T>) -> Self {
        let zeros = || params.values().iter().map(|p| Tensor::zeros(p.shape())).collect();
        Adam {
            config,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    /// Rebuild from saved moments. Shapes must line up with `params`.
    pub fn from_parts(
        config: AdamConfig,
        step: u64,
        first: Vec<Tensor<T>>,
        second: Vec<Tensor<T>>,
        params: &ParamSet<T>,
    ) -> Result<Self> {
        if first.len() != params.len() || second.len() != params.len() {
            return Err(Error::invalid("adam moments do not match parameter count"));
        }
        for ((m, v), p) in first.iter().zip(&second).zip(params.values()) {
            if m.shape() != p.shape() || v.shape() != p.shape() {
                return Err(Error::shape("adam moments", m.shape(), p.shape()));
            }
        }
        Ok(Adam {
            config,
            step,
            first,
            second,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor<T>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor<T>] {
        &self.second
    }

    /// One bias-corrected update. Nothing is modified if any gradient is
    /// non-finite or shapes disagree.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &[Tensor<T>]) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::invalid(format!(
                "adam got {} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        for ((id, name, p), g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::shape("adam", p.shape(), g.shape()));
            }
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("gradient of {name} (param {})", id.index())));
            }
        }

        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
        let correct1 = T::of(1.0 - c.beta1.powi(t));
        let correct2 = T::of(1.0 - c.beta2.powi(t));
        let (lr, eps) = (T::of(c.lr), T::of(c.eps));

        for (((p, g), m), v) in params
            .values_mut()
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for (((w, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mv = b1 * *mv + one_b1 * gv;
                *vv = b2 * *vv + one_b2 * gv * gv;
                let m_hat = *mv / correct1;
                let v_hat = *vv / correct2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
