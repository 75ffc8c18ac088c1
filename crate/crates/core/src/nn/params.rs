use rand::Rng;

use super::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named collection of trainable tensors owned by one network.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet<T> {
    names: Vec<String>,
    values: Vec<Tensor<T>>,
}

impl<T: Real> Default for ParamSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        let name = name.into();
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    /// He-style uniform weights, `U(-sqrt(6/fan_in), sqrt(6/fan_in))`.
    pub fn add_he_uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        rng: &mut R,
    ) -> ParamId {
        let bound = (6.0 / fan_in.max(1) as f64).sqrt();
        let len: usize = shape.iter().product();
        let data = (0..len)
            .map(|_| T::of(rng.gen_range(-bound..bound)))
            .collect();
        self.add(name, Tensor::new(shape, data).expect("consistent shape"))
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<T>)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    pub fn values(&self) -> &[Tensor<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.values
    }

    /// Replace a parameter's data, keeping its shape.
    pub fn set(&mut self, id: ParamId, data: &[T]) -> Result<()> {
        let slot = &mut self.values[id.0];
        if slot.len() != data.len() {
            return Err(Error::shape("set_param", slot.shape(), &[data.len()]));
        }
        slot.data_mut().copy_from_slice(data);
        Ok(())
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        ParamSet {
            names: self.names.clone(),
            values: self.values.iter().map(Tensor::cast).collect(),
        }
    }
}
