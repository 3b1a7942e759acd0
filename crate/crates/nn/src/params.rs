//! Named trainable parameters with seeded initialization.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use candle_core::{DType, Device, Tensor, Var};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use sabia_core::SeededRng;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Ones,
    Uniform(f64),
    Normal(f64),
}

/// Every parameter of a model, keyed by a dotted path. Values loaded ahead
/// of model construction (pretrained weights) take precedence over the
/// initializer.
#[derive(Debug)]
pub struct ParamStore {
    vars: BTreeMap<String, Var>,
    preloaded: HashMap<String, Tensor>,
    dtype: DType,
    device: Device,
}

impl ParamStore {
    pub fn new(dtype: DType) -> Self {
        ParamStore {
            vars: BTreeMap::new(),
            preloaded: HashMap::new(),
            dtype,
            device: Device::Cpu,
        }
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn preload(&mut self, tensors: HashMap<String, Tensor>) {
        self.preloaded.extend(tensors);
    }

    pub fn preloaded_names(&self) -> impl Iterator<Item = &str> {
        self.preloaded.keys().map(String::as_str)
    }

    /// Create (or fetch a preloaded) parameter.
    pub fn param(&mut self, name: &str, shape: &[usize], init: Init, rng: &mut SeededRng) -> Result<Tensor> {
        if let Some(v) = self.vars.get(name) {
            return Ok(v.as_tensor().clone());
        }
        let tensor = match self.preloaded.remove(name) {
            Some(t) => {
                if t.dims() != shape {
                    return Err(Error::Config(format!(
                        "pretrained tensor {name} has shape {:?}, expected {shape:?}",
                        t.dims()
                    )));
                }
                t.to_dtype(self.dtype)?
            }
            None => self.random(shape, init, rng)?,
        };
        let var = Var::from_tensor(&tensor)?;
        let t = var.as_tensor().clone();
        self.vars.insert(name.to_string(), var);
        Ok(t)
    }

    fn random(&self, shape: &[usize], init: Init, rng: &mut SeededRng) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = match init {
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
            Init::Uniform(a) => (0..n).map(|_| rng.random_range(-a..=a)).collect(),
            Init::Normal(std) => {
                let d = Normal::new(0.0, std).map_err(|e| Error::Config(e.to_string()))?;
                (0..n).map(|_| d.sample(rng)).collect()
            }
        };
        Ok(Tensor::from_vec(data, shape, &self.device)?.to_dtype(self.dtype)?)
    }

    pub fn get(&self, name: &str) -> Option<&Var> {
        self.vars.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.keys().map(String::as_str)
    }

    /// Variables in name order, as handed to an optimizer.
    pub fn vars(&self) -> Vec<Var> {
        self.vars.values().cloned().collect()
    }

    pub fn vars_with_prefix(&self, prefix: &str) -> Vec<Var> {
        self.vars
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, v)| v.clone())
            .collect()
    }

    pub fn n_parameters(&self) -> usize {
        self.vars.values().map(|v| v.elem_count()).sum()
    }

    pub fn tensors(&self) -> HashMap<String, Tensor> {
        self.vars.iter().map(|(k, v)| (k.clone(), v.as_tensor().clone())).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        candle_core::safetensors::save(&self.tensors(), path)?;
        Ok(())
    }

    /// Overwrite existing parameters from a safetensors file; every stored
    /// parameter must be present with a matching shape.
    pub fn load_values(&self, path: &Path) -> Result<()> {
        let loaded = candle_core::safetensors::load(path, &self.device)?;
        for (name, var) in &self.vars {
            let t = loaded
                .get(name)
                .ok_or_else(|| Error::checkpoint(path, format!("missing tensor {name}")))?;
            if t.dims() != var.dims() {
                return Err(Error::checkpoint(
                    path,
                    format!("tensor {name} has shape {:?}, expected {:?}", t.dims(), var.dims()),
                ));
            }
            var.set(&t.to_dtype(self.dtype)?)?;
        }
        Ok(())
    }
}
