use std::cell::RefCell;

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::tensor::{Bound, Conv2dParams, Element, ParamId, ParamStore, Var};

/// What a trace row records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowKind {
    /// A named group of rows (Distg-Block, SFE, ...).
    Span,
    Conv2d,
    LeakyRelu,
    PixelShuffle,
    PixelShuffle1d,
    Lf2MacPi,
    Cat,
    Sigmoid,
    Pool,
    /// Layout change with no arithmetic.
    Rearrange,
    Add,
    Resample,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub depth: usize,
    pub label: String,
    /// Labels of the enclosing spans, outermost first.
    pub parents: Vec<String>,
    pub kind: RowKind,
    pub inputs: Vec<Vec<usize>>,
    /// `[kh, kw, c_in, c_out]` for convolutions.
    pub kernel: Option<[usize; 4]>,
    pub output: Vec<usize>,
}

/// Ordered record of every layer executed by one forward pass.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    /// Flattens the trace to a presentation level: spans for which `expand`
    /// returns false are emitted as one row and their contents skipped;
    /// expanded spans are replaced by their children.
    pub fn project(&self, expand: impl Fn(&TraceRow) -> bool) -> Vec<TraceRow> {
        let mut out = Vec::new();
        let mut skip_below: Option<usize> = None;
        for row in &self.rows {
            if let Some(d) = skip_below {
                if row.depth > d {
                    continue;
                }
                skip_below = None;
            }
            if row.kind == RowKind::Span {
                if !expand(row) {
                    out.push(row.clone());
                    skip_below = Some(row.depth);
                }
            } else {
                out.push(row.clone());
            }
        }
        out
    }
}

/// Per-forward state: bound parameters plus an optional trace recorder.
pub struct Ctx<'a, T: Element> {
    bound: &'a Bound<T>,
    trace: Option<RefCell<(Vec<TraceRow>, Vec<String>)>>,
}

impl<'a, T: Element> Ctx<'a, T> {
    pub fn new(bound: &'a Bound<T>) -> Self {
        Self { bound, trace: None }
    }

    pub fn traced(bound: &'a Bound<T>) -> Self {
        Self {
            bound,
            trace: Some(RefCell::new((Vec::new(), Vec::new()))),
        }
    }

    pub fn param(&self, id: ParamId) -> &Var<T> {
        self.bound.get(id)
    }

    pub fn into_trace(self) -> Option<Trace> {
        self.trace.map(|t| Trace { rows: t.into_inner().0 })
    }

    pub(crate) fn record(
        &self,
        kind: RowKind,
        label: &str,
        inputs: &[&Var<T>],
        kernel: Option<[usize; 4]>,
        out: &Var<T>,
    ) {
        if let Some(t) = &self.trace {
            let mut t = t.borrow_mut();
            let parents = t.1.clone();
            t.0.push(TraceRow {
                depth: parents.len(),
                label: label.to_string(),
                parents,
                kind,
                inputs: inputs.iter().map(|v| v.shape().to_vec()).collect(),
                kernel,
                output: out.shape().to_vec(),
            });
        }
    }

    /// Runs `f` inside a named span.
    pub(crate) fn span(&self, label: &str, inputs: &[&Var<T>], f: impl FnOnce() -> Result<Var<T>>) -> Result<Var<T>> {
        let Some(t) = &self.trace else {
            return f();
        };
        let index = {
            let mut t = t.borrow_mut();
            let parents = t.1.clone();
            t.0.push(TraceRow {
                depth: parents.len(),
                label: label.to_string(),
                parents,
                kind: RowKind::Span,
                inputs: inputs.iter().map(|v| v.shape().to_vec()).collect(),
                kernel: None,
                output: Vec::new(),
            });
            t.1.push(label.to_string());
            t.0.len() - 1
        };
        let out = f();
        let mut t = t.borrow_mut();
        t.1.pop();
        if let Ok(y) = &out {
            t.0[index].output = y.shape().to_vec();
        }
        out
    }

    pub(crate) fn lrelu(&self, x: &Var<T>) -> Result<Var<T>> {
        let y = x.leaky_relu(LRELU_SLOPE)?;
        self.record(RowKind::LeakyRelu, "LeakyReLU", &[x], None, &y);
        Ok(y)
    }

    pub(crate) fn add(&self, x: &Var<T>, y: &Var<T>) -> Result<Var<T>> {
        let z = x.add(y)?;
        self.record(RowKind::Add, "Add", &[x, y], None, &z);
        Ok(z)
    }

    pub(crate) fn cat(&self, xs: &[Var<T>]) -> Result<Var<T>> {
        let y = Var::concat(xs, 1)?;
        let refs: Vec<&Var<T>> = xs.iter().collect();
        self.record(RowKind::Cat, "Cat", &refs, None, &y);
        Ok(y)
    }

    pub(crate) fn rearrange(
        &self,
        label: &str,
        kind: RowKind,
        x: &Var<T>,
        f: impl FnOnce(&Var<T>) -> Result<Var<T>>,
    ) -> Result<Var<T>> {
        let y = f(x)?;
        self.record(kind, label, &[x], None, &y);
        Ok(y)
    }
}

pub const LRELU_SLOPE: f64 = 0.1;

/// Convolution with bias, parameters held in a [`ParamStore`].
#[derive(Debug, Clone)]
pub(crate) struct Conv {
    w: ParamId,
    b: ParamId,
    p: Conv2dParams,
    kernel: [usize; 4],
}

impl Conv {
    pub fn new<T: Element>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: (usize, usize),
        p: Conv2dParams,
    ) -> Result<Self> {
        let (w, b) = store.add_conv(name, c_out, c_in, kernel, rng)?;
        Ok(Self {
            w,
            b,
            p,
            kernel: [kernel.0, kernel.1, c_in, c_out],
        })
    }

    /// `k×k` conv with "same" padding and dilation `d`.
    pub fn same<T: Element>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        d: usize,
    ) -> Result<Self> {
        Self::new(store, rng, name, c_in, c_out, (k, k), Conv2dParams::same(k, d))
    }

    pub fn forward<T: Element>(&self, ctx: &Ctx<T>, x: &Var<T>) -> Result<Var<T>> {
        let y = x.conv2d(ctx.param(self.w), Some(ctx.param(self.b)), self.p)?;
        ctx.record(RowKind::Conv2d, "Conv2d", &[x], Some(self.kernel), &y);
        Ok(y)
    }

    pub fn weight(&self) -> ParamId {
        self.w
    }
}
