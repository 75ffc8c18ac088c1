//! Binary checkpoint: magic, version, a TOML header with the full training
//! config and progress counters, then named little-endian f32 tensors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::agent::AgentNet;
use crate::critic::CriticNet;
use crate::error::{Error, Result};
use crate::image::io::write_atomic;
use crate::nn::{Adam, ParamSet, Tensor};

/// First and second Adam moments, in parameter order.
type Moments = (Vec<Tensor<f32>>, Vec<Tensor<f32>>);

pub const MAGIC: &[u8; 8] = b"RETOUCH\0";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub generator_steps: u64,
    pub critic_steps: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    progress: Progress,
    agent_adam_step: u64,
    critic_adam_step: u64,
    config: TrainConfig,
}

/// Everything needed to resume or deploy a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub progress: Progress,
    pub agent: ParamSet<f32>,
    pub critic: ParamSet<f32>,
    pub agent_opt: Adam<f32>,
    pub critic_opt: Adam<f32>,
}

impl Checkpoint {
    pub fn agent_net(&self) -> Result<AgentNet<f32>> {
        AgentNet::from_params(self.config.agent_config(), self.agent.clone())
    }

    pub fn critic_net(&self) -> Result<CriticNet<f32>> {
        CriticNet::from_params(self.config.critic_config(), self.critic.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            progress: self.progress,
            agent_adam_step: self.agent_opt.step_count(),
            critic_adam_step: self.critic_opt.step_count(),
            config: self.config.clone(),
        };
        let text = toml::to_string(&header).expect("header always serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_u32(&mut out, text.len());
        out.extend_from_slice(text.as_bytes());

        let mut tensors: Vec<(String, &Tensor<f32>)> = Vec::new();
        for (ns, params, opt) in [
            ("agent", &self.agent, &self.agent_opt),
            ("critic", &self.critic, &self.critic_opt),
        ] {
            for (_, name, t) in params.iter() {
                tensors.push((format!("{ns}/{name}"), t));
            }
            for ((_, name, _), (m, v)) in params.iter().zip(opt.first_moments().iter().zip(opt.second_moments())) {
                tensors.push((format!("adam/{ns}/m/{name}"), m));
                tensors.push((format!("adam/{ns}/v/{name}"), v));
            }
        }
        put_u32(&mut out, tensors.len());
        for (name, t) in tensors {
            put_u32(&mut out, name.len());
            out.extend_from_slice(name.as_bytes());
            put_u32(&mut out, t.shape().len());
            for &d in t.shape() {
                put_u32(&mut out, d);
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version} (expected {VERSION})"
            )));
        }
        let len = r.u32()? as usize;
        let text = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Checkpoint("header is not UTF-8".into()))?;
        let header: Header = toml::from_str(text).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        header.config.validate()?;

        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
                .to_string();
            let ndim = r.u32()? as usize;
            let shape = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            let n = n.ok_or_else(|| Error::Checkpoint(format!("tensor {name} is too large")))?;
            let raw = r.take(n.checked_mul(4).ok_or_else(|| Error::Checkpoint("tensor too large".into()))?)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let t = Tensor::new(&shape, data).map_err(|e| Error::Checkpoint(format!("tensor {name}: {e}")))?;
            tensors.push((name, t));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }

        let config = header.config;
        let take_ns = |prefix: &str| -> ParamSet<f32> {
            let mut set = ParamSet::new();
            for (name, t) in tensors.iter().filter(|(n, _)| n.starts_with(prefix)) {
                set.add(&name[prefix.len()..], t.clone());
            }
            set
        };
        let agent = take_ns("agent/");
        let critic = take_ns("critic/");
        let moments = |set: &ParamSet<f32>, ns: &str| -> Result<Moments> {
            let find = |kind: &str, name: &str| {
                let key = format!("adam/{ns}/{kind}/{name}");
                tensors
                    .iter()
                    .find(|(n, _)| *n == key)
                    .map(|(_, t)| t.clone())
                    .ok_or_else(|| Error::Checkpoint(format!("missing tensor {key}")))
            };
            let mut m = Vec::new();
            let mut v = Vec::new();
            for (_, name, _) in set.iter() {
                m.push(find("m", name)?);
                v.push(find("v", name)?);
            }
            Ok((m, v))
        };
        // Layout checks against freshly built networks.
        AgentNet::from_params(config.agent_config(), agent.clone())?;
        CriticNet::from_params(config.critic_config(), critic.clone())?;
        let (am, av) = moments(&agent, "agent")?;
        let (cm, cv) = moments(&critic, "critic")?;
        let expected = 3 * (agent.len() + critic.len());
        if tensors.len() != expected {
            return Err(Error::Checkpoint(format!(
                "expected {expected} tensors, found {}",
                tensors.len()
            )));
        }
        let agent_opt = Adam::from_parts(config.adam(), header.agent_adam_step, am, av, &agent)?;
        let critic_opt = Adam::from_parts(config.adam(), header.critic_adam_step, cm, cv, &critic)?;
        Ok(Checkpoint {
            config,
            progress: header.progress,
            agent,
            critic,
            agent_opt,
            critic_opt,
        })
    }

    /// Written to a sibling temp file and renamed into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    let v = u32::try_from(v).expect("checkpoint field fits in u32");
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
