//! Minimal layer set on top of candle tensors with seeded, reproducible
//! initialization. All parameters are `f64` on the CPU.

use std::collections::BTreeMap;

use candle_core::{DType, Device, Tensor, Var, D};
use candle_nn::optim::{AdamW, Optimizer, ParamsAdamW};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DTYPE: DType = DType::F64;
pub const LEAK: f64 = 0.2;

pub fn device() -> Device {
    Device::Cpu
}

/// Named parameter collection. Names are `/`-separated paths; iteration
/// order is lexicographic so optimizer state and checkpoints are stable.
pub struct ParamStore {
    vars: BTreeMap<String, Var>,
    rng: ChaCha8Rng,
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        ParamStore {
            vars: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn insert(&mut self, name: String, data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        if self.vars.contains_key(&name) {
            return Err(Error::validation(format!("parameter {name} defined twice")));
        }
        let var = Var::from_tensor(&Tensor::from_vec(data, shape, &device())?)?;
        let t = var.as_tensor().clone();
        self.vars.insert(name, var);
        Ok(t)
    }

    pub fn uniform(&mut self, name: String, shape: &[usize], bound: f64) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| self.rng.random_range(-bound..=bound))
            .collect();
        self.insert(name, data, shape)
    }

    pub fn zeros(&mut self, name: String, shape: &[usize]) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        self.insert(name, vec![0.0; n], shape)
    }

    pub fn var(&self, name: &str) -> Option<&Var> {
        self.vars.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.keys().map(String::as_str)
    }

    /// Variables whose names start with any of `prefixes`.
    pub fn vars_under(&self, prefixes: &[&str]) -> Vec<Var> {
        self.vars
            .iter()
            .filter(|(k, _)| prefixes.iter().any(|p| k.starts_with(p)))
            .map(|(_, v)| v.clone())
            .collect()
    }

    pub fn tensors(&self) -> BTreeMap<String, Tensor> {
        self.vars
            .iter()
            .map(|(k, v)| (k.clone(), v.as_tensor().clone()))
            .collect()
    }

    /// Overwrites every parameter from `tensors`. Names and shapes must match
    /// exactly.
    pub fn assign(&self, tensors: &BTreeMap<String, Tensor>) -> Result<()> {
        if tensors.len() != self.vars.len() {
            return Err(Error::validation(format!(
                "expected {} tensors, found {}",
                self.vars.len(),
                tensors.len()
            )));
        }
        for (name, var) in &self.vars {
            let t = tensors
                .get(name)
                .ok_or_else(|| Error::validation(format!("missing tensor {name}")))?;
            if t.dims() != var.dims() {
                return Err(Error::validation(format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    t.dims(),
                    var.dims()
                )));
            }
            var.set(&t.to_dtype(DTYPE)?)?;
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Result<BTreeMap<String, Vec<f64>>> {
        self.vars
            .iter()
            .map(|(k, v)| Ok((k.clone(), v.as_tensor().flatten_all()?.to_vec1::<f64>()?)))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    weight: Tensor,
    bias: Tensor,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, outputs: usize) -> Result<Self> {
        let bound = 1.0 / (inputs as f64).sqrt();
        Ok(Linear {
            weight: store.uniform(format!("{name}/weight"), &[outputs, inputs], bound)?,
            bias: store.zeros(format!("{name}/bias"), &[outputs])?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.matmul(&self.weight.t()?)?.broadcast_add(&self.bias)?)
    }
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    weight: Tensor,
    bias: Tensor,
    stride: usize,
    padding: usize,
}

impl Conv2d {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        outputs: usize,
        kernel: usize,
        stride: usize,
    ) -> Result<Self> {
        let bound = 1.0 / ((inputs * kernel * kernel) as f64).sqrt();
        Ok(Conv2d {
            weight: store.uniform(
                format!("{name}/weight"),
                &[outputs, inputs, kernel, kernel],
                bound,
            )?,
            bias: store.zeros(format!("{name}/bias"), &[outputs])?,
            stride,
            padding: kernel / 2,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.conv2d(&self.weight, self.padding, self.stride, 1, 1)?;
        let bias = self.bias.reshape((1, (), 1, 1))?;
        Ok(y.broadcast_add(&bias)?)
    }
}

#[derive(Debug, Clone)]
pub struct Embedding {
    table: Tensor,
    rows: usize,
}

impl Embedding {
    pub fn new(store: &mut ParamStore, name: &str, rows: usize, dim: usize) -> Result<Self> {
        Ok(Embedding {
            table: store.uniform(format!("{name}/table"), &[rows, dim], 1.0)?,
            rows,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn forward(&self, ids: &[u32]) -> Result<Tensor> {
        if let Some(bad) = ids.iter().find(|&&i| i as usize >= self.rows) {
            return Err(Error::validation(format!(
                "id {bad} out of range for {} rows",
                self.rows
            )));
        }
        let idx = Tensor::from_slice(ids, ids.len(), &device())?;
        Ok(self.table.index_select(&idx, 0)?)
    }
}

pub fn leaky(x: &Tensor) -> Result<Tensor> {
    Ok(candle_nn::ops::leaky_relu(x, LEAK)?)
}

pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok(candle_nn::ops::sigmoid(x)?)
}

/// Mean over every element.
pub fn mean_all(x: &Tensor) -> Result<Tensor> {
    Ok(x.mean_all()?)
}

/// Spatial mean of an `[N, C, H, W]` tensor, giving `[N, C]`.
pub fn global_pool(x: &Tensor) -> Result<Tensor> {
    Ok(x.mean(D::Minus1)?.mean(D::Minus1)?)
}

pub fn rows(data: &[Vec<f64>]) -> Result<Tensor> {
    let cols = data.first().map_or(0, Vec::len);
    if data.iter().any(|r| r.len() != cols) {
        return Err(Error::validation("ragged rows"));
    }
    let flat: Vec<f64> = data.iter().flatten().copied().collect();
    Ok(Tensor::from_vec(flat, (data.len(), cols), &device())?)
}

pub fn to_rows(t: &Tensor) -> Result<Vec<Vec<f64>>> {
    Ok(t.to_vec2::<f64>()?)
}

/// Adam with GAN-style momentum (β₁ = 0.5) and no weight decay.
pub fn adam(vars: Vec<Var>, lr: f64) -> Result<AdamW> {
    Ok(AdamW::new(
        vars,
        ParamsAdamW {
            lr,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        },
    )?)
}

/// One optimizer update on `loss`.
pub fn descend(opt: &mut AdamW, loss: &Tensor) -> Result<()> {
    let grads = loss.backward()?;
    opt.step(&grads)?;
    Ok(())
}
