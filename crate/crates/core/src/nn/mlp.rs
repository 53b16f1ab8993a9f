use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::binio::{BinReader, BinWriter};
use super::gemm::gemm;
use crate::error::{dim, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative given the pre-activation `z` and activation `y`.
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }

    fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        match t {
            0 => Ok(Activation::Identity),
            1 => Ok(Activation::Relu),
            2 => Ok(Activation::Tanh),
            _ => Err(Error::Checkpoint(format!("unknown activation tag {t}"))),
        }
    }
}

/// Layer widths `[input, hidden.., output]`; hidden layers use ReLU.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpSpec {
    widths: Vec<usize>,
    output: Activation,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, output: Activation) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::Config("an MLP needs at least one hidden layer".into()));
        }
        if widths.contains(&0) {
            return Err(Error::Config("MLP widths must be at least 1".into()));
        }
        Ok(Self { widths, output })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.n_layers() {
            self.output
        } else {
            Activation::Relu
        }
    }

    /// Offset of layer `l`'s weight block; its bias follows the weights.
    pub fn layer_offset(&self, l: usize) -> usize {
        self.widths.windows(2).take(l).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn n_params(&self) -> usize {
        self.layer_offset(self.n_layers())
    }
}

/// Dense network with flat parameter storage: for each layer, the
/// `out × in` row-major weight matrix followed by the `out` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    pub params: Vec<f64>,
}

/// Per-layer values saved by the forward pass.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache {
    batch: usize,
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Pre-activations of layer `l`.
    pub fn pre_activation(&self, l: usize) -> &[f64] {
        &self.pre[l]
    }
}

impl Mlp {
    pub fn zeros(spec: MlpSpec) -> Self {
        let n = spec.n_params();
        Self {
            spec,
            params: vec![0.0; n],
        }
    }

    /// Weights and biases uniform in `±1/√fan_in`.
    pub fn init<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Self {
        let mut net = Self::zeros(spec);
        for l in 0..net.spec.n_layers() {
            let fan_in = net.spec.widths[l];
            let bound = 1.0 / (fan_in as f64).sqrt();
            let off = net.spec.layer_offset(l);
            let end = net.spec.layer_offset(l + 1);
            for p in &mut net.params[off..end] {
                *p = rng.gen_range(-bound..bound);
            }
        }
        net
    }

    pub fn from_params(spec: MlpSpec, params: Vec<f64>) -> Result<Self> {
        dim("mlp params", spec.n_params(), params.len())?;
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        let off = self.spec.layer_offset(l);
        &self.params[off..off + self.spec.widths[l] * self.spec.widths[l + 1]]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let off = self.spec.layer_offset(l) + self.spec.widths[l] * self.spec.widths[l + 1];
        &self.params[off..off + self.spec.widths[l + 1]]
    }

    /// Runs a batch (`batch` rows of `input_dim`, row-major) through the
    /// network, leaving every intermediate in `cache`.
    pub fn forward(&self, input: &[f64], batch: usize, cache: &mut ForwardCache) -> Result<()> {
        let widths = &self.spec.widths;
        dim("mlp input", batch * widths[0], input.len())?;
        let nl = self.spec.n_layers();
        cache.batch = batch;
        cache.acts.resize_with(nl + 1, Vec::new);
        cache.pre.resize_with(nl, Vec::new);
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(input);
        for l in 0..nl {
            let (n_in, n_out) = (widths[l], widths[l + 1]);
            let w = self.weights(l);
            let b = self.bias(l);
            let act = self.spec.activation(l);
            let (head, tail) = cache.acts.split_at_mut(l + 1);
            let x = &head[l];
            let z = &mut cache.pre[l];
            z.resize(batch * n_out, 0.0);
            gemm(batch, n_in, n_out, 1.0, x, (n_in, 1), w, (1, n_in), 0.0, z, (n_out, 1));
            let y = &mut tail[0];
            y.resize(batch * n_out, 0.0);
            for (zr, yr) in z.chunks_exact_mut(n_out).zip(y.chunks_exact_mut(n_out)) {
                for ((zv, yv), bv) in zr.iter_mut().zip(yr.iter_mut()).zip(b) {
                    *zv += bv;
                    *yv = act.apply(*zv);
                }
            }
        }
        if cache.output().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mlp forward output"));
        }
        Ok(())
    }

    /// Single-row convenience forward.
    pub fn predict(&self, input: &[f64], cache: &mut ForwardCache) -> Result<Vec<f64>> {
        self.forward(input, 1, cache)?;
        Ok(cache.output().to_vec())
    }

    /// Backpropagates `out_grad` (d objective / d output, `batch × output_dim`)
    /// through the cached forward pass.
    ///
    /// Parameter gradients are *added* into `param_grad` when given. When
    /// `input_grad` is given, the gradient with respect to the input columns
    /// in its range is written there (`batch × range.len()`).
    pub fn backward(
        &self,
        cache: &mut ForwardCache,
        out_grad: &[f64],
        mut param_grad: Option<&mut [f64]>,
        input_grad: Option<(&mut [f64], Range<usize>)>,
    ) -> Result<()> {
        let widths = &self.spec.widths;
        let nl = self.spec.n_layers();
        let batch = cache.batch;
        if cache.acts.len() != nl + 1 {
            return Err(Error::Dimension {
                what: "mlp cache layers",
                expected: nl + 1,
                got: cache.acts.len(),
            });
        }
        dim("mlp output gradient", batch * widths[nl], out_grad.len())?;
        if let Some(g) = param_grad.as_deref() {
            dim("mlp parameter gradient", self.params.len(), g.len())?;
        }

        let out_act = self.spec.activation(nl - 1);
        let mut delta = std::mem::take(&mut cache.delta);
        let mut delta_prev = std::mem::take(&mut cache.delta_prev);
        delta.clear();
        delta.extend(
            out_grad
                .iter()
                .zip(&cache.pre[nl - 1])
                .zip(&cache.acts[nl])
                .map(|((g, &z), &y)| g * out_act.derivative(z, y)),
        );

        let mut input_grad = input_grad;
        for l in (0..nl).rev() {
            let (n_in, n_out) = (widths[l], widths[l + 1]);
            let w = self.weights(l);
            if let Some(pg) = param_grad.as_deref_mut() {
                let off = self.spec.layer_offset(l);
                let (gw, gb) = pg[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                let x = &cache.acts[l];
                gemm(
                    n_out,
                    batch,
                    n_in,
                    1.0,
                    &delta,
                    (1, n_out),
                    x,
                    (n_in, 1),
                    1.0,
                    gw,
                    (n_in, 1),
                );
                for row in delta.chunks_exact(n_out) {
                    for (g, d) in gb.iter_mut().zip(row) {
                        *g += d;
                    }
                }
            }
            if l > 0 {
                delta_prev.resize(batch * n_in, 0.0);
                gemm(
                    batch,
                    n_out,
                    n_in,
                    1.0,
                    &delta,
                    (n_out, 1),
                    w,
                    (n_in, 1),
                    0.0,
                    &mut delta_prev,
                    (n_in, 1),
                );
                for (d, &z) in delta_prev.iter_mut().zip(&cache.pre[l - 1]) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
                std::mem::swap(&mut delta, &mut delta_prev);
            } else if let Some((ig, cols)) = input_grad.take() {
                if cols.end > n_in || cols.start > cols.end {
                    return Err(Error::Dimension {
                        what: "mlp input-gradient columns",
                        expected: n_in,
                        got: cols.end,
                    });
                }
                let nc = cols.len();
                dim("mlp input gradient", batch * nc, ig.len())?;
                if nc > 0 {
                    gemm(
                        batch,
                        n_out,
                        nc,
                        1.0,
                        &delta,
                        (n_out, 1),
                        &w[cols.start..],
                        (n_in, 1),
                        0.0,
                        ig,
                        (nc, 1),
                    );
                }
                if ig.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("mlp input gradient"));
                }
            }
        }
        cache.delta = delta;
        cache.delta_prev = delta_prev;
        if let Some(pg) = param_grad {
            if pg.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("mlp parameter gradient"));
            }
        }
        Ok(())
    }

    pub fn write(&self, w: &mut BinWriter) {
        w.u8(self.spec.output.tag());
        w.u32(self.spec.widths.len() as u32);
        for &x in &self.spec.widths {
            w.u32(x as u32);
        }
        w.f64s(&self.params);
    }

    pub fn read(r: &mut BinReader<'_>) -> Result<Self> {
        let output = Activation::from_tag(r.u8()?)?;
        let n = r.u32()? as usize;
        if n > 64 {
            return Err(Error::Checkpoint(format!("implausible layer count {n}")));
        }
        let widths = (0..n)
            .map(|_| r.u32().map(|x| x as usize))
            .collect::<Result<Vec<_>>>()?;
        let spec = MlpSpec::new(widths, output).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let params = r.f64s(spec.n_params())?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        Mlp::from_params(spec, params)
    }
}

/// Single-input forward pass returning the output and the cache.
pub fn mlp_forward(p: &Mlp, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
    let mut cache = ForwardCache::default();
    let out = p.predict(input, &mut cache)?;
    Ok((out, cache))
}

/// Gradients of the objective whose output gradient is `output_grad`, with
/// respect to all parameters and to the full input.
pub fn mlp_backward(p: &Mlp, cache: &mut ForwardCache, output_grad: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut pg = vec![0.0; p.params.len()];
    let n_in = p.spec.input_dim();
    let mut ig = vec![0.0; cache.batch * n_in];
    p.backward(cache, output_grad, Some(&mut pg), Some((&mut ig, 0..n_in)))?;
    Ok((pg, ig))
}

/// `target ← tau·online + (1 − tau)·target`, elementwise.
pub fn polyak_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if target.spec != online.spec {
        return Err(Error::Config("polyak update between different network specs".into()));
    }
    for (t, &o) in target.params.iter_mut().zip(&online.params) {
        *t = tau * o + (1.0 - tau) * *t;
    }
    Ok(())
}
