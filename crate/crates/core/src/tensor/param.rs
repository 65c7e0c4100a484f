use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};

use super::{Element, Gradients, Tensor, Var};

/// Index of a parameter inside its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone)]
pub struct Parameter<T: Element> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Option<Tensor<T>>,
    pub frozen: bool,
}

/// Named, ordered collection of trainable tensors.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<T: Element> {
    params: Vec<Parameter<T>>,
    index: HashMap<String, usize>,
}

impl<T: Element> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Contract(format!("duplicate parameter name {name}")));
        }
        let id = self.params.len();
        self.index.insert(name.clone(), id);
        self.params.push(Parameter {
            name,
            value,
            grad: None,
            frozen: false,
        });
        Ok(ParamId(id))
    }

    /// Adds a conv weight `[c_out, c_in, kh, kw]` drawn uniformly from
    /// `±1 / sqrt(fan_in)`, plus a zero bias.
    pub fn add_conv(
        &mut self,
        prefix: &str,
        c_out: usize,
        c_in: usize,
        kernel: (usize, usize),
        rng: &mut impl Rng,
    ) -> Result<(ParamId, ParamId)> {
        let fan_in = c_in * kernel.0 * kernel.1;
        let bound = 1.0 / (fan_in as f64).sqrt();
        let w = Tensor::from_fn([c_out, c_in, kernel.0, kernel.1], |_| {
            T::from_f64(rng.gen_range(-bound..bound))
        });
        let wid = self.add(format!("{prefix}.w"), w)?;
        let bid = self.add(format!("{prefix}.b"), Tensor::zeros([c_out]))?;
        Ok((wid, bid))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_elements(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter<T>> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn freeze_all(&mut self) {
        for p in &mut self.params {
            p.frozen = true;
            p.grad = None;
        }
    }

    pub fn unfreeze_all(&mut self) {
        for p in &mut self.params {
            p.frozen = false;
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.params.iter().all(|p| p.frozen)
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }

    /// Sets every value to zero (biases included).
    pub fn zero_values(&mut self) {
        for p in &mut self.params {
            p.value.data_mut().fill(T::zero());
        }
    }

    /// Creates this step's graph inputs: leaves for trainable parameters,
    /// constants for frozen ones.
    pub fn bind(&self) -> Bound<T> {
        Bound {
            vars: self
                .params
                .iter()
                .map(|p| {
                    if p.frozen {
                        Var::constant(p.value.clone())
                    } else {
                        Var::leaf(p.value.clone())
                    }
                })
                .collect(),
        }
    }

    /// Stores the gradients computed for `bound` on the unfrozen parameters,
    /// replacing whatever was there.
    pub fn collect_grads(&mut self, bound: &Bound<T>, grads: &mut Gradients<T>) {
        for (p, v) in self.params.iter_mut().zip(&bound.vars) {
            p.grad = if p.frozen { None } else { grads.take(v) };
        }
    }

    /// Copies values from `other` by name; shapes must agree and every
    /// parameter of `self` must be present.
    pub fn load_values(&mut self, other: &ParamStore<T>) -> Result<()> {
        for p in &mut self.params {
            let src = other
                .by_name(&p.name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {}", p.name)))?;
            if src.value.shape() != p.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {} has shape {:?}, checkpoint holds {:?}",
                    p.name,
                    p.value.shape(),
                    src.value.shape()
                )));
            }
            p.value = src.value.clone();
        }
        Ok(())
    }
}

/// Per-step graph leaves of a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Bound<T: Element> {
    vars: Vec<Var<T>>,
}

impl<T: Element> Bound<T> {
    pub fn get(&self, id: ParamId) -> &Var<T> {
        &self.vars[id.0]
    }
}
