//! Minimal fully connected network with manual backprop and Adam, enough for
//! the adversarial generator/discriminator pair. Batches are row-major
//! `(batch, features)` matrices.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) enum Activation {
    Relu,
    LeakyRelu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::Relu => z.max(S::zero()),
            Activation::LeakyRelu => {
                if z >= S::zero() {
                    z
                } else {
                    z * S::cast(LEAKY_SLOPE)
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the post-activation value.
    fn derive_from_output<S: Scalar>(self, a: S) -> S {
        match self {
            Activation::Relu => {
                if a > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::LeakyRelu => {
                if a > S::zero() {
                    S::one()
                } else {
                    S::cast(LEAKY_SLOPE)
                }
            }
            Activation::Tanh => S::one() - a * a,
            Activation::Identity => S::one(),
        }
    }
}

#[derive(Debug, Clone)]
struct Layer<S> {
    w: Array2<S>,
    b: Array1<S>,
    act: Activation,
}

#[derive(Debug, Clone)]
pub(crate) struct Mlp<S> {
    layers: Vec<Layer<S>>,
}

/// Per-layer gradients in layer order.
pub(crate) type Grads<S> = Vec<(Array2<S>, Array1<S>)>;

impl<S: Scalar> Mlp<S> {
    /// Xavier-uniform init, biases zero, deterministic from `rng`.
    pub(crate) fn new(sizes: &[usize], acts: &[Activation], rng: &mut ChaCha8Rng) -> Self {
        assert_eq!(sizes.len(), acts.len() + 1);
        let mut layers = Vec::new();
        for (l, &act) in acts.iter().enumerate() {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let lim = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w = Array2::from_shape_fn((fan_in, fan_out), |_| {
                S::cast(rng.gen_range(-lim..lim))
            });
            layers.push(Layer {
                w,
                b: Array1::zeros(fan_out),
                act,
            });
        }
        Mlp { layers }
    }

    pub(crate) fn forward(&self, x: &Array2<S>) -> Array2<S> {
        let mut a = x.clone();
        for layer in &self.layers {
            let mut z = a.dot(&layer.w) + &layer.b;
            z.mapv_inplace(|v| layer.act.apply(v));
            a = z;
        }
        a
    }

    /// Forward pass keeping every layer input and output for backprop.
    fn forward_cached(&self, x: &Array2<S>) -> (Array2<S>, Vec<Array2<S>>) {
        let mut acts = vec![x.clone()];
        for layer in &self.layers {
            let prev = acts.last().unwrap();
            let mut z = prev.dot(&layer.w) + &layer.b;
            z.mapv_inplace(|v| layer.act.apply(v));
            acts.push(z);
        }
        (acts.last().unwrap().clone(), acts)
    }

    /// Backprop from `d_out = dL/d(output)`; returns parameter gradients and
    /// the gradient with respect to the input batch.
    fn backward(&self, acts: &[Array2<S>], d_out: Array2<S>) -> (Grads<S>, Array2<S>) {
        let mut grads: Grads<S> = Vec::with_capacity(self.layers.len());
        let mut d_a = d_out;
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let a_out = &acts[l + 1];
            let a_in = &acts[l];
            let mut d_z = d_a;
            d_z.zip_mut_with(a_out, |g, &a| *g = *g * layer.act.derive_from_output(a));
            let d_w = a_in.t().dot(&d_z);
            let d_b = d_z.sum_axis(Axis(0));
            d_a = d_z.dot(&layer.w.t());
            grads.push((d_w, d_b));
        }
        grads.reverse();
        (grads, d_a)
    }

    pub(crate) fn params_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().all(|v| v.is_finite()) && l.b.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub(crate) fn get_param(&self, idx: usize) -> S {
        let mut i = idx;
        for l in &self.layers {
            if i < l.w.len() {
                return *l.w.as_slice().unwrap().get(i).unwrap();
            }
            i -= l.w.len();
            if i < l.b.len() {
                return l.b[i];
            }
            i -= l.b.len();
        }
        panic!("param index {idx} out of range");
    }

    pub(crate) fn set_param(&mut self, idx: usize, v: S) {
        let mut i = idx;
        for l in &mut self.layers {
            if i < l.w.len() {
                l.w.as_slice_mut().unwrap()[i] = v;
                return;
            }
            i -= l.w.len();
            if i < l.b.len() {
                l.b[i] = v;
                return;
            }
            i -= l.b.len();
        }
        panic!("param index {idx} out of range");
    }

    /// Binary cross-entropy step against a constant label over the batch.
    /// The final layer must be `Identity`; sigmoid and the loss are fused for
    /// stability. Updates parameters when an optimizer is given; returns the
    /// mean loss.
    pub(crate) fn bce_step(&mut self, x: &Array2<S>, label_real: bool, adam: Option<&mut Adam<S>>) -> f64 {
        let (logits, acts) = self.forward_cached(x);
        let (loss, d_logits) = bce_with_logits(&logits, label_real);
        let (grads, _) = self.backward(&acts, d_logits);
        if let Some(opt) = adam {
            opt.update(self, grads);
        }
        loss
    }

    /// Loss and parameter gradients without any update; used by tests.
    pub(crate) fn bce_loss_and_grads(&self, x: &Array2<S>, label_real: bool) -> (f64, Grads<S>) {
        let (logits, acts) = self.forward_cached(x);
        let (loss, d_logits) = bce_with_logits(&logits, label_real);
        let (grads, _) = self.backward(&acts, d_logits);
        (loss, grads)
    }

    pub(crate) fn to_raw(&self) -> RawMlp {
        RawMlp {
            layers: self
                .layers
                .iter()
                .map(|l| RawLayer {
                    rows: l.w.nrows(),
                    cols: l.w.ncols(),
                    w: l.w.iter().map(|v| v.as_f64()).collect(),
                    b: l.b.iter().map(|v| v.as_f64()).collect(),
                    act: l.act,
                })
                .collect(),
        }
    }

    pub(crate) fn from_raw(raw: &RawMlp) -> Result<Self> {
        let mut layers = Vec::new();
        for rl in &raw.layers {
            if rl.w.len() != rl.rows * rl.cols || rl.b.len() != rl.cols {
                return Err(Error::InvalidConfig("checkpoint layer shape mismatch".into()));
            }
            let w = Array2::from_shape_vec((rl.rows, rl.cols), rl.w.iter().map(|&v| S::cast(v)).collect())
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            layers.push(Layer {
                w,
                b: Array1::from_iter(rl.b.iter().map(|&v| S::cast(v))),
                act: rl.act,
            });
        }
        Ok(Mlp { layers })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct RawLayer {
    rows: usize,
    cols: usize,
    w: Vec<f64>,
    b: Vec<f64>,
    act: Activation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct RawMlp {
    layers: Vec<RawLayer>,
}

/// Mean binary cross-entropy with logits against a constant label, and the
/// gradient at the logits. `softplus(z) - y z` with the stable softplus.
fn bce_with_logits<S: Scalar>(logits: &Array2<S>, label_real: bool) -> (f64, Array2<S>) {
    let y = if label_real { 1.0 } else { 0.0 };
    let count = logits.len() as f64;
    let mut loss = 0.0;
    let grad = logits.mapv(|z| {
        let zf = z.as_f64();
        let softplus = zf.max(0.0) + (-zf.abs()).exp().ln_1p();
        loss += softplus - y * zf;
        let p = 1.0 / (1.0 + (-zf).exp());
        S::cast((p - y) / count)
    });
    (loss / count, grad)
}

/// One generator update: fresh noise through G, scored by a frozen D against
/// the "real" label; G's parameters move, D's do not. Returns the loss.
pub(crate) fn generator_step<S: Scalar>(
    gen: &mut Mlp<S>,
    disc: &Mlp<S>,
    noise: &Array2<S>,
    adam_g: &mut Adam<S>,
) -> f64 {
    let (fake, g_acts) = gen.forward_cached(noise);
    let (logits, d_acts) = disc.forward_cached(&fake);
    let (loss, d_logits) = bce_with_logits(&logits, true);
    let (_d_grads, d_fake) = disc.backward(&d_acts, d_logits);
    let (g_grads, _) = gen.backward(&g_acts, d_fake);
    adam_g.update(gen, g_grads);
    loss
}

/// Adam with the usual bias correction; beta1 = 0.5 as is customary for
/// adversarial training.
#[derive(Debug, Clone)]
pub(crate) struct Adam<S> {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Grads<S>,
    v: Grads<S>,
}

impl<S: Scalar> Adam<S> {
    pub(crate) fn new(mlp: &Mlp<S>, lr: f64) -> Self {
        let zeros: Grads<S> = mlp
            .layers
            .iter()
            .map(|l| (Array2::zeros(l.w.dim()), Array1::zeros(l.b.len())))
            .collect();
        Adam {
            lr,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub(crate) fn update(&mut self, mlp: &mut Mlp<S>, grads: Grads<S>) {
        self.t += 1;
        let b1 = S::cast(self.beta1);
        let b2 = S::cast(self.beta2);
        let c1 = S::cast(1.0 - self.beta1.powi(self.t));
        let c2 = S::cast(1.0 - self.beta2.powi(self.t));
        let lr = S::cast(self.lr);
        let eps = S::cast(self.eps);
        for (l, (gw, gb)) in grads.into_iter().enumerate() {
            let (mw, mb) = &mut self.m[l];
            let (vw, vb) = &mut self.v[l];
            mw.zip_mut_with(&gw, |m, &g| *m = b1 * *m + (S::one() - b1) * g);
            vw.zip_mut_with(&gw, |v, &g| *v = b2 * *v + (S::one() - b2) * g * g);
            mb.zip_mut_with(&gb, |m, &g| *m = b1 * *m + (S::one() - b1) * g);
            vb.zip_mut_with(&gb, |v, &g| *v = b2 * *v + (S::one() - b2) * g * g);
            let layer = &mut mlp.layers[l];
            ndarray::Zip::from(&mut layer.w)
                .and(&*mw)
                .and(&*vw)
                .for_each(|p, &m, &v| {
                    *p = *p - lr * (m / c1) / ((v / c2).sqrt() + eps);
                });
            ndarray::Zip::from(&mut layer.b)
                .and(&*mb)
                .and(&*vb)
                .for_each(|p, &m, &v| {
                    *p = *p - lr * (m / c1) / ((v / c2).sqrt() + eps);
                });
        }
    }
}

/// Worst relative disagreement between analytic parameter gradients and
/// central finite differences on a 5-parameter toy network (2 -> 1 -> 1,
/// tanh hidden), using the fused sigmoid + cross-entropy loss.
pub fn gradient_check_max_relative_error(seed: u64) -> f64 {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mlp: Mlp<f64> = Mlp::new(&[2, 1, 1], &[Activation::Tanh, Activation::Identity], &mut rng);
    assert_eq!(mlp.n_params(), 5);
    let x = ndarray::arr2(&[[0.3, -0.7], [1.1, 0.4], [-0.5, 0.9]]);

    let (_, grads) = mlp.bce_loss_and_grads(&x, true);
    let flat: Vec<f64> = grads
        .iter()
        .flat_map(|(w, b)| w.iter().copied().chain(b.iter().copied()))
        .collect();

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..mlp.n_params() {
        let orig = mlp.get_param(i);
        mlp.set_param(i, orig + h);
        let (lp, _) = mlp.bce_loss_and_grads(&x, true);
        mlp.set_param(i, orig - h);
        let (lm, _) = mlp.bce_loss_and_grads(&x, true);
        mlp.set_param(i, orig);
        let numeric = (lp - lm) / (2.0 * h);
        let rel = (flat[i] - numeric).abs() / numeric.abs().max(1e-6);
        worst = worst.max(rel);
    }
    worst
}
