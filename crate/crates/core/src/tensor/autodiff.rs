//! Define-by-run reverse-mode autodiff.
//!
//! A [`Var`] owns its value and, when any input requires a gradient, the
//! closure that maps the output gradient back onto its parents. Graphs that
//! need no gradient keep no parents alive, so inference frees intermediates
//! as soon as they go out of scope.

use std::collections::HashMap;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

use super::kernels::{self, AxisTaps, Conv2dParams, IndexMap};
use super::{Element, Tensor};

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

type BackwardFn<T> = dyn Fn(&Tensor<T>, &[Var<T>], &[bool]) -> Result<Vec<Option<Tensor<T>>>>;

struct GradFn<T: Element> {
    parents: Vec<Var<T>>,
    backward: Box<BackwardFn<T>>,
}

struct Node<T: Element> {
    id: u64,
    value: Tensor<T>,
    requires_grad: bool,
    grad_fn: Option<GradFn<T>>,
}

/// A tensor value in the autodiff graph.
pub struct Var<T: Element>(Rc<Node<T>>);

impl<T: Element> Clone for Var<T> {
    fn clone(&self) -> Self {
        Var(Rc::clone(&self.0))
    }
}

impl<T: Element> std::fmt::Debug for Var<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.0.id)
            .field("requires_grad", &self.0.requires_grad)
            .field("value", &self.0.value)
            .finish()
    }
}

impl<T: Element> Var<T> {
    fn new_node(value: Tensor<T>, requires_grad: bool, grad_fn: Option<GradFn<T>>) -> Self {
        Var(Rc::new(Node {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            value,
            requires_grad,
            grad_fn,
        }))
    }

    /// A value that never receives a gradient.
    pub fn constant(value: Tensor<T>) -> Self {
        Self::new_node(value, false, None)
    }

    /// A graph input whose gradient is reported by [`backward`].
    pub fn leaf(value: Tensor<T>) -> Self {
        Self::new_node(value, true, None)
    }

    fn from_op<F>(value: Tensor<T>, op: &str, parents: Vec<Var<T>>, backward: F) -> Result<Self>
    where
        F: Fn(&Tensor<T>, &[Var<T>], &[bool]) -> Result<Vec<Option<Tensor<T>>>> + 'static,
    {
        value.check_finite(op)?;
        if parents.iter().any(Var::requires_grad) {
            Ok(Self::new_node(
                value,
                true,
                Some(GradFn {
                    parents,
                    backward: Box::new(backward),
                }),
            ))
        } else {
            Ok(Self::constant(value))
        }
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn value(&self) -> &Tensor<T> {
        &self.0.value
    }

    pub fn shape(&self) -> &[usize] {
        self.0.value.shape()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    /// Copy of the value with the graph history dropped.
    pub fn detach(&self) -> Self {
        Self::constant(self.0.value.clone())
    }

    pub fn conv2d(&self, weight: &Var<T>, bias: Option<&Var<T>>, p: Conv2dParams) -> Result<Self> {
        let out = kernels::conv2d(self.value(), weight.value(), bias.map(Var::value), &p)?;
        let mut parents = vec![self.clone(), weight.clone()];
        parents.extend(bias.cloned());
        Self::from_op(out, "conv2d", parents, move |g, ps, needs| {
            let want_bias = needs.get(2).copied().unwrap_or(false);
            let [dx, dw, db] =
                kernels::conv2d_backward(ps[0].value(), ps[1].value(), g, &p, [needs[0], needs[1], want_bias])?;
            let mut grads = vec![dx, dw];
            if ps.len() == 3 {
                grads.push(db);
            }
            Ok(grads)
        })
    }

    pub fn leaky_relu(&self, slope: f64) -> Result<Self> {
        let s = T::from_f64(slope);
        let out = kernels::leaky_relu(self.value(), s);
        Self::from_op(out, "leaky_relu", vec![self.clone()], move |g, ps, _| {
            Ok(vec![Some(kernels::leaky_relu_backward(ps[0].value(), g, s)?)])
        })
    }

    pub fn sigmoid(&self) -> Result<Self> {
        let out = self.value().map(|v| T::one() / (T::one() + (-v).exp()));
        let y = out.clone();
        Self::from_op(out, "sigmoid", vec![self.clone()], move |g, _, _| {
            Ok(vec![Some(y.zip_map(g, |y, g| g * y * (T::one() - y))?)])
        })
    }

    pub fn add(&self, other: &Var<T>) -> Result<Self> {
        let out = self.value().zip_map(other.value(), |a, b| a + b)?;
        Self::from_op(out, "add", vec![self.clone(), other.clone()], |g, _, needs| {
            Ok(vec![needs[0].then(|| g.clone()), needs[1].then(|| g.clone())])
        })
    }

    pub fn sub(&self, other: &Var<T>) -> Result<Self> {
        let out = self.value().zip_map(other.value(), |a, b| a - b)?;
        Self::from_op(out, "sub", vec![self.clone(), other.clone()], |g, _, needs| {
            Ok(vec![needs[0].then(|| g.clone()), needs[1].then(|| g.map(|v| -v))])
        })
    }

    pub fn scale(&self, factor: f64) -> Result<Self> {
        let f = T::from_f64(factor);
        let out = self.value().map(|v| v * f);
        Self::from_op(out, "scale", vec![self.clone()], move |g, _, _| {
            Ok(vec![Some(g.map(|v| v * f))])
        })
    }

    /// Sum of several same-shaped values.
    pub fn sum_of(xs: &[Var<T>]) -> Result<Self> {
        let first = xs.first().ok_or_else(|| Error::dim("sum_of zero values"))?;
        let mut out = first.value().clone();
        for x in &xs[1..] {
            out.add_assign(x.value())?;
        }
        Self::from_op(out, "sum", xs.to_vec(), |g, ps, needs| {
            Ok(ps.iter().zip(needs).map(|(_, &n)| n.then(|| g.clone())).collect())
        })
    }

    pub fn reshape(&self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let out = self.value().clone().reshape(shape)?;
        let in_shape = self.shape().to_vec();
        Self::from_op(out, "reshape", vec![self.clone()], move |g, _, _| {
            Ok(vec![Some(g.clone().reshape(in_shape.clone())?)])
        })
    }

    /// Applies a precomputed rearrangement / selection.
    pub fn rearrange(&self, map: IndexMap) -> Result<Self> {
        let out = map.gather(self.value())?;
        Self::from_op(out, "rearrange", vec![self.clone()], move |g, _, _| {
            Ok(vec![Some(map.scatter_add(g)?)])
        })
    }

    pub fn pixel_shuffle(&self, r: usize) -> Result<Self> {
        self.rearrange(IndexMap::pixel_shuffle(self.shape(), r)?)
    }

    pub fn pixel_shuffle_1d(&self, r: usize) -> Result<Self> {
        self.rearrange(IndexMap::pixel_shuffle_1d(self.shape(), r)?)
    }

    pub fn transpose_hw(&self) -> Result<Self> {
        self.rearrange(IndexMap::transpose_hw(self.shape())?)
    }

    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Self> {
        self.rearrange(IndexMap::narrow(self.shape(), axis, start, len)?)
    }

    pub fn select(&self, axis: usize, indices: &[usize]) -> Result<Self> {
        self.rearrange(IndexMap::select(self.shape(), axis, indices)?)
    }

    pub fn concat(xs: &[Var<T>], axis: usize) -> Result<Self> {
        let values: Vec<&Tensor<T>> = xs.iter().map(Var::value).collect();
        let out = kernels::concat(&values, axis)?;
        let extents: Vec<usize> = xs.iter().map(|x| x.shape()[axis]).collect();
        Self::from_op(out, "concat", xs.to_vec(), move |g, _, needs| {
            let parts = kernels::split(g, axis, &extents)?;
            Ok(parts.into_iter().zip(needs).map(|(p, &n)| n.then_some(p)).collect())
        })
    }

    /// Forward difference along `axis`.
    pub fn diff(&self, axis: usize) -> Result<Self> {
        let out = kernels::diff(self.value(), axis)?;
        let in_shape = self.shape().to_vec();
        Self::from_op(out, "diff", vec![self.clone()], move |g, _, _| {
            Ok(vec![Some(kernels::diff_backward(g, &in_shape, axis)?)])
        })
    }

    /// Separable linear resampling of the last two axes.
    pub fn resample_hw(&self, rows: AxisTaps, cols: AxisTaps) -> Result<Self> {
        let out = kernels::resample_hw(self.value(), &rows, &cols)?;
        let in_shape = self.shape().to_vec();
        Self::from_op(out, "resample", vec![self.clone()], move |g, _, _| {
            Ok(vec![Some(kernels::resample_hw_backward(g, &in_shape, &rows, &cols)?)])
        })
    }

    /// `[b, c, h, w] → [b, c, 1, 1]` spatial mean.
    pub fn global_avg_pool(&self) -> Result<Self> {
        let [b, c, h, w] = self.value().dims()?;
        let hw = h * w;
        let inv = T::one() / T::from_usize(hw);
        let data: Vec<T> = self
            .value()
            .data()
            .chunks(hw)
            .map(|p| p.iter().fold(T::zero(), |a, &v| a + v) * inv)
            .collect();
        let out = Tensor::new([b, c, 1, 1], data)?;
        Self::from_op(out, "global_avg_pool", vec![self.clone()], move |g, _, _| {
            let data = g
                .data()
                .iter()
                .flat_map(|&v| std::iter::repeat_n(v * inv, hw))
                .collect();
            Ok(vec![Some(Tensor::new([b, c, h, w], data)?)])
        })
    }

    /// Multiplies each `[b, c]` plane by the matching entry of `gate: [b, c, 1, 1]`.
    pub fn scale_channels(&self, gate: &Var<T>) -> Result<Self> {
        let [b, c, h, w] = self.value().dims()?;
        if gate.shape() != [b, c, 1, 1] {
            return Err(Error::dim(format!(
                "channel gate must be [{b}, {c}, 1, 1], got {:?}",
                gate.shape()
            )));
        }
        let hw = h * w;
        let x = self.value().data();
        let gv = gate.value().data();
        let data: Vec<T> = x
            .chunks(hw)
            .zip(gv)
            .flat_map(|(p, &s)| p.iter().map(move |&v| v * s))
            .collect();
        let out = Tensor::new([b, c, h, w], data)?;
        Self::from_op(
            out,
            "scale_channels",
            vec![self.clone(), gate.clone()],
            move |g, ps, needs| {
                let x = ps[0].value().data();
                let gate = ps[1].value().data();
                let dx = needs[0].then(|| {
                    let d = g
                        .data()
                        .chunks(hw)
                        .zip(gate)
                        .flat_map(|(p, &s)| p.iter().map(move |&v| v * s))
                        .collect();
                    Tensor::new([b, c, h, w], d)
                });
                let dg = needs[1].then(|| {
                    let d = g
                        .data()
                        .chunks(hw)
                        .zip(x.chunks(hw))
                        .map(|(gp, xp)| gp.iter().zip(xp).fold(T::zero(), |a, (&gv, &xv)| a + gv * xv))
                        .collect();
                    Tensor::new([b, c, 1, 1], d)
                });
                Ok(vec![dx.transpose()?, dg.transpose()?])
            },
        )
    }

    /// Mean absolute difference; subgradient 0 where the arguments agree.
    pub fn l1_mean(&self, other: &Var<T>) -> Result<Self> {
        self.value().expect_same_shape(other.value())?;
        let n = self.value().numel();
        if n == 0 {
            return Err(Error::dim("l1_mean of empty tensors"));
        }
        let sum = self
            .value()
            .data()
            .iter()
            .zip(other.value().data())
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b).abs());
        let inv = T::one() / T::from_usize(n);
        let out = Tensor::scalar(sum * inv);
        Self::from_op(
            out,
            "l1_mean",
            vec![self.clone(), other.clone()],
            move |g, ps, needs| {
                let scale = g.item()? * inv;
                let sign = ps[0].value().zip_map(ps[1].value(), |a, b| {
                    if a > b {
                        scale
                    } else if a < b {
                        -scale
                    } else {
                        T::zero()
                    }
                })?;
                Ok(vec![needs[0].then(|| sign.clone()), needs[1].then(|| sign.map(|v| -v))])
            },
        )
    }

    /// Mean of all elements, as a scalar.
    pub fn mean(&self) -> Result<Self> {
        let n = self.value().numel();
        let inv = T::one() / T::from_usize(n.max(1));
        let out = Tensor::scalar(self.value().sum() * inv);
        let shape = self.shape().to_vec();
        Self::from_op(out, "mean", vec![self.clone()], move |g, _, _| {
            Ok(vec![Some(Tensor::full(shape.clone(), g.item()? * inv))])
        })
    }
}

/// Gradients of graph leaves, keyed by [`Var::id`].
#[derive(Debug, Default)]
pub struct Gradients<T: Element> {
    grads: HashMap<u64, Tensor<T>>,
}

impl<T: Element> Gradients<T> {
    pub fn get(&self, v: &Var<T>) -> Option<&Tensor<T>> {
        self.grads.get(&v.id())
    }

    pub fn take(&mut self, v: &Var<T>) -> Option<Tensor<T>> {
        self.grads.remove(&v.id())
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

/// Back-propagates from a scalar `loss` to every reachable leaf that requires
/// a gradient.
pub fn backward<T: Element>(loss: &Var<T>) -> Result<Gradients<T>> {
    if loss.value().numel() != 1 {
        return Err(Error::Contract(format!(
            "backward needs a scalar loss, got shape {:?}",
            loss.shape()
        )));
    }
    let mut out = Gradients::default();
    if !loss.requires_grad() {
        return Ok(out);
    }

    let mut nodes: HashMap<u64, Var<T>> = HashMap::new();
    let mut stack = vec![loss.clone()];
    while let Some(v) = stack.pop() {
        if nodes.contains_key(&v.id()) {
            continue;
        }
        if let Some(gf) = &v.0.grad_fn {
            for p in &gf.parents {
                // Parents are always created before their children.
                assert!(p.id() < v.id(), "autodiff graph is not a DAG");
                if p.requires_grad() {
                    stack.push(p.clone());
                }
            }
        }
        nodes.insert(v.id(), v);
    }
    let mut order: Vec<u64> = nodes.keys().copied().collect();
    order.sort_unstable_by(|a, b| b.cmp(a));

    let mut pending: HashMap<u64, Tensor<T>> = HashMap::new();
    pending.insert(loss.id(), Tensor::full(loss.shape().to_vec(), T::one()));
    for id in order {
        let Some(grad) = pending.remove(&id) else {
            continue;
        };
        let node = &nodes[&id];
        match &node.0.grad_fn {
            None => {
                out.grads.insert(id, grad);
            }
            Some(gf) => {
                let needs: Vec<bool> = gf.parents.iter().map(Var::requires_grad).collect();
                let parent_grads = (gf.backward)(&grad, &gf.parents, &needs)?;
                for ((p, g), &need) in gf.parents.iter().zip(parent_grads).zip(&needs) {
                    let (Some(g), true) = (g, need) else {
                        continue;
                    };
                    if g.shape() != p.shape() {
                        return Err(Error::Contract(format!(
                            "gradient shape {:?} does not match value shape {:?}",
                            g.shape(),
                            p.shape()
                        )));
                    }
                    match pending.get_mut(&p.id()) {
                        Some(acc) => acc.add_assign(&g)?,
                        None => {
                            pending.insert(p.id(), g);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}
