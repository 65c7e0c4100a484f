//! Central finite differences against reverse-mode gradients, in f64.

use hlfsr_core::networks::{Ctx, DistgBlockNet};
use hlfsr_core::resample::{bicubic_resize_var, Scale};
use hlfsr_core::tensor::kernels::IndexMap;
use hlfsr_core::tensor::{backward, Bound, Conv2dParams};
use hlfsr_core::{Result, Tensor, Var};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-6;
/// Below this magnitude errors are measured absolutely.
const FLOOR: f64 = 1e-3;
/// Coordinates probed per input tensor; smaller tensors are probed fully.
const PROBES: usize = 24;
pub const TOLERANCE: f64 = 1e-4;

type Op = Box<dyn Fn(&[Var<f64>]) -> Result<Var<f64>>>;

pub struct Case {
    pub name: String,
    inputs: Vec<Tensor<f64>>,
    op: Op,
}

pub struct Outcome {
    pub name: String,
    pub max_rel_err: f64,
    pub probes: usize,
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| rng.gen_range(-1.0..1.0))
}

/// Values bounded away from zero so no probe straddles a kink.
fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| {
        let m = rng.gen_range(0.05..1.0);
        if rng.gen_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

/// Random linear functional of `out`, so every output element contributes.
fn project(out: &Var<f64>, weights: &Tensor<f64>) -> Result<Var<f64>> {
    let n = out.value().numel();
    let flat = out.reshape([1, n, 1, 1])?;
    let w = Var::constant(weights.clone().reshape([1, n, 1, 1])?);
    flat.conv2d(&w, None, Conv2dParams::default())
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(FLOOR)
}

fn probe_indices(rng: &mut ChaCha8Rng, numel: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..numel).collect();
    if numel > PROBES {
        idx.shuffle(rng);
        idx.truncate(PROBES);
    }
    idx
}

impl Case {
    fn new(
        name: impl Into<String>,
        inputs: Vec<Tensor<f64>>,
        op: impl Fn(&[Var<f64>]) -> Result<Var<f64>> + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            inputs,
            op: Box::new(op),
        }
    }

    fn loss(&self, inputs: &[Var<f64>], weights: &Tensor<f64>) -> Result<Var<f64>> {
        project(&(self.op)(inputs)?, weights)
    }

    pub fn check(&self, rng: &mut ChaCha8Rng) -> Result<Outcome> {
        let leaves: Vec<Var<f64>> = self.inputs.iter().cloned().map(Var::leaf).collect();
        let out = (self.op)(&leaves)?;
        let weights = uniform(rng, out.shape());
        let grads = backward(&project(&out, &weights)?)?;
        let eval = |inputs: Vec<Tensor<f64>>| -> Result<f64> {
            let vars: Vec<Var<f64>> = inputs.into_iter().map(Var::constant).collect();
            self.loss(&vars, &weights)?.value().item()
        };
        let mut outcome = Outcome {
            name: self.name.clone(),
            max_rel_err: 0.0,
            probes: 0,
        };
        for (i, leaf) in leaves.iter().enumerate() {
            let numel = self.inputs[i].numel();
            let analytic = grads
                .get(leaf)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(self.inputs[i].shape().to_vec()));
            for k in probe_indices(rng, numel) {
                let shifted = |delta: f64| {
                    let mut xs = self.inputs.clone();
                    xs[i].data_mut()[k] += delta;
                    xs
                };
                let numeric = (eval(shifted(EPS))? - eval(shifted(-EPS))?) / (2.0 * EPS);
                outcome.max_rel_err = outcome.max_rel_err.max(rel_err(analytic.data()[k], numeric));
                outcome.probes += 1;
            }
        }
        Ok(outcome)
    }
}

/// Finite differences over every parameter tensor and the input of a
/// Distg-Block with `c` channels at angular extent `a`.
pub fn check_distg_block(seed: u64, c: usize, a: usize, h: usize, w: usize) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = DistgBlockNet::<f64>::new(c, a, &mut rng)?;
    let x = uniform(&mut rng, &[1, c, a * h, a * w]);
    let forward =
        |net: &DistgBlockNet<f64>, x: Var<f64>, weights: Option<&Tensor<f64>>| -> Result<(Var<f64>, Bound<f64>)> {
            let bound = net.store.bind();
            let y = net.forward(&Ctx::new(&bound), &x)?;
            let loss = match weights {
                Some(wt) => project(&y, wt)?,
                None => y,
            };
            Ok((loss, bound))
        };
    let (y, _) = forward(&net, Var::constant(x.clone()), None)?;
    let weights = uniform(&mut rng, y.shape());

    let xv = Var::leaf(x.clone());
    let (loss, bound) = forward(&net, xv.clone(), Some(&weights))?;
    let mut grads = backward(&loss)?;
    let dx = grads.get(&xv).cloned().expect("input gradient");
    net.store.collect_grads(&bound, &mut grads);

    let eval = |net: &DistgBlockNet<f64>, x: &Tensor<f64>| -> Result<f64> {
        forward(net, Var::constant(x.clone()), Some(&weights))?.0.value().item()
    };
    let mut outcome = Outcome {
        name: format!("distg_block c={c} a={a}"),
        max_rel_err: 0.0,
        probes: 0,
    };
    for k in probe_indices(&mut rng, x.numel()) {
        let mut xp = x.clone();
        xp.data_mut()[k] += EPS;
        let mut xm = x.clone();
        xm.data_mut()[k] -= EPS;
        let numeric = (eval(&net, &xp)? - eval(&net, &xm)?) / (2.0 * EPS);
        outcome.max_rel_err = outcome.max_rel_err.max(rel_err(dx.data()[k], numeric));
        outcome.probes += 1;
    }
    let n_params = net.store.len();
    for p in 0..n_params {
        let (numel, analytic) = {
            let param = net.store.iter().nth(p).unwrap();
            (param.value.numel(), param.grad.clone().expect("parameter gradient"))
        };
        for k in probe_indices(&mut rng, numel) {
            let mut nudge = |delta: f64| -> Result<f64> {
                net.store.iter_mut().nth(p).unwrap().value.data_mut()[k] += delta;
                let v = eval(&net, &x);
                net.store.iter_mut().nth(p).unwrap().value.data_mut()[k] -= delta;
                v
            };
            let numeric = (nudge(EPS)? - nudge(-EPS)?) / (2.0 * EPS);
            outcome.max_rel_err = outcome.max_rel_err.max(rel_err(analytic.data()[k], numeric));
            outcome.probes += 1;
        }
    }
    Ok(outcome)
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, xs: &[T]) -> T {
    xs[rng.gen_range(0..xs.len())]
}

/// `per_op` random cases for every differentiable primitive.
pub fn cases(seed: u64, per_op: usize) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for i in 0..per_op {
        let r = &mut rng;
        let b = r.gen_range(1..=2);
        let c = r.gen_range(1..=3);
        let h = r.gen_range(2..=5);
        let w = r.gen_range(2..=5);
        let x4 = [b, c, h, w];

        let (stride, pad, dil) = (r.gen_range(1..=3), r.gen_range(0..=3), r.gen_range(1..=3));
        let (kh, kw) = (r.gen_range(1..=3), r.gen_range(1..=3));
        let (ch, cw) = (
            dil * (kh - 1) + 1 + r.gen_range(0..=4),
            dil * (kw - 1) + 1 + r.gen_range(0..=4),
        );
        let cout = r.gen_range(1..=3);
        let p = Conv2dParams {
            stride: (stride, r.gen_range(1..=3)),
            padding: (pad, r.gen_range(0..=3)),
            dilation: (dil, dil),
        };
        out.push(Case::new(
            format!("conv2d #{i} {p:?}"),
            vec![
                uniform(r, &[b, c, ch, cw]),
                uniform(r, &[cout, c, kh, kw]),
                uniform(r, &[cout]),
            ],
            move |v| v[0].conv2d(&v[1], Some(&v[2]), p),
        ));

        let slope = r.gen_range(0.01..0.3);
        out.push(Case::new(
            format!("leaky_relu #{i}"),
            vec![away_from_zero(r, &x4)],
            move |v| v[0].leaky_relu(slope),
        ));
        out.push(Case::new(format!("sigmoid #{i}"), vec![uniform(r, &x4)], |v| {
            v[0].sigmoid()
        }));
        out.push(Case::new(
            format!("add #{i}"),
            vec![uniform(r, &x4), uniform(r, &x4)],
            |v| v[0].add(&v[1]),
        ));
        out.push(Case::new(
            format!("sub #{i}"),
            vec![uniform(r, &x4), uniform(r, &x4)],
            |v| v[0].sub(&v[1]),
        ));
        let factor = r.gen_range(-2.0..2.0);
        out.push(Case::new(format!("scale #{i}"), vec![uniform(r, &x4)], move |v| {
            v[0].scale(factor)
        }));
        out.push(Case::new(
            format!("sum_of #{i}"),
            vec![uniform(r, &x4), uniform(r, &x4), uniform(r, &x4)],
            Var::sum_of,
        ));
        out.push(Case::new(format!("reshape #{i}"), vec![uniform(r, &x4)], move |v| {
            v[0].reshape([c, b, w, h])?.sigmoid()
        }));

        let s = r.gen_range(1..=3);
        out.push(Case::new(
            format!("pixel_shuffle #{i} r={s}"),
            vec![uniform(r, &[b, c * s * s, h, w])],
            move |v| v[0].pixel_shuffle(s),
        ));
        out.push(Case::new(
            format!("pixel_shuffle_1d #{i} r={s}"),
            vec![uniform(r, &[b, c * s, h, w])],
            move |v| v[0].pixel_shuffle_1d(s),
        ));
        out.push(Case::new(format!("transpose_hw #{i}"), vec![uniform(r, &x4)], |v| {
            v[0].transpose_hw()
        }));

        let axis = r.gen_range(0..4);
        let len = x4[axis];
        let start = r.gen_range(0..len);
        let n = r.gen_range(1..=len - start);
        out.push(Case::new(
            format!("narrow #{i} axis={axis}"),
            vec![uniform(r, &x4)],
            move |v| v[0].narrow(axis, start, n),
        ));
        // Repeated indices exercise gradient accumulation.
        let picks: Vec<usize> = (0..r.gen_range(1..=5)).map(|_| r.gen_range(0..len)).collect();
        out.push(Case::new(
            format!("select #{i} axis={axis} {picks:?}"),
            vec![uniform(r, &x4)],
            move |v| v[0].select(axis, &picks),
        ));
        let mut other = x4;
        other[axis] = r.gen_range(1..=3);
        out.push(Case::new(
            format!("concat #{i} axis={axis}"),
            vec![uniform(r, &x4), uniform(r, &other), uniform(r, &x4)],
            move |v| Var::concat(v, axis),
        ));
        let diff_axis = r.gen_range(0..4);
        let mut long = x4;
        long[diff_axis] += 1;
        out.push(Case::new(
            format!("diff #{i} axis={diff_axis}"),
            vec![uniform(r, &long)],
            move |v| v[0].diff(diff_axis),
        ));

        let scale = pick(
            r,
            &[Scale::up(2), Scale::up(3), Scale::down(2), Scale { num: 3, den: 2 }],
        );
        out.push(Case::new(
            format!("resample_hw #{i} {}/{}", scale.num, scale.den),
            vec![uniform(r, &[b, c, 2 * h, 2 * w])],
            move |v| bicubic_resize_var(&v[0], scale),
        ));
        out.push(Case::new(format!("global_avg_pool #{i}"), vec![uniform(r, &x4)], |v| {
            v[0].global_avg_pool()
        }));
        out.push(Case::new(
            format!("scale_channels #{i}"),
            vec![uniform(r, &x4), uniform(r, &[b, c, 1, 1])],
            |v| v[0].scale_channels(&v[1]),
        ));
        // Differences bounded away from zero keep l1 smooth near the probe.
        let base = uniform(r, &x4);
        let gap = away_from_zero(r, &x4);
        let shifted = base.zip_map(&gap, |p, q| p + q).unwrap();
        out.push(Case::new(format!("l1_mean #{i}"), vec![base, shifted], |v| {
            v[0].l1_mean(&v[1])
        }));
        out.push(Case::new(format!("mean #{i}"), vec![uniform(r, &x4)], |v| v[0].mean()));

        let a = pick(r, &[2, 3]);
        out.push(Case::new(
            format!("views_to_macpi #{i} a={a}"),
            vec![uniform(r, &[b, a * a, h, w])],
            move |v| v[0].rearrange(IndexMap::views_to_macpi(v[0].shape(), a)?),
        ));
        out.push(Case::new(
            format!("macpi_to_views #{i} a={a}"),
            vec![uniform(r, &[b, 1, a * h, a * w])],
            move |v| v[0].rearrange(IndexMap::macpi_to_views(v[0].shape(), a)?),
        ));
    }
    out
}

/// Runs the primitive cases and a few Distg-Blocks.
pub fn run_suite(seed: u64) -> Result<Vec<Outcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    let mut outcomes = Vec::new();
    for case in cases(seed, 5) {
        outcomes.push(case.check(&mut rng)?);
    }
    for (k, (c, a, h, w)) in [(4, 3, 2, 3), (4, 2, 3, 2), (8, 5, 2, 2)].into_iter().enumerate() {
        outcomes.push(check_distg_block(seed + k as u64, c, a, h, w)?);
    }
    Ok(outcomes)
}
