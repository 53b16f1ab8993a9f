//! Central finite-difference check of [`Mlp::backward`].

use crate::error::{dim, Result};

use super::{Activation, ForwardCache, Mlp};

/// Denominator floor for relative errors, so that two gradients that are
/// both at round-off level do not count as a mismatch.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    /// Coordinates compared.
    pub checked: usize,
    /// Coordinates whose perturbation crossed a ReLU kink.
    pub skipped: usize,
    pub max_param_rel_error: f64,
    pub max_input_rel_error: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.max_param_rel_error.max(self.max_input_rel_error)
    }
}

pub fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

/// Sign pattern of every ReLU pre-activation.
fn kinks(net: &Mlp, cache: &ForwardCache) -> Vec<bool> {
    let mut out = Vec::new();
    for l in 0..net.spec().n_layers() {
        if net.spec().activation(l) == Activation::Relu {
            out.extend(cache.pre_activation(l).iter().map(|&z| z > 0.0));
        }
    }
    out
}

/// Compares analytic gradients of `L = Σ weights ⊙ net(input)` with
/// central differences of step `h`, for every parameter and every input.
pub fn check_mlp_gradients(net: &Mlp, input: &[f64], batch: usize, weights: &[f64], h: f64) -> Result<GradCheckReport> {
    let n_in = net.spec().input_dim();
    dim("gradcheck weights", batch * net.spec().output_dim(), weights.len())?;
    let mut cache = ForwardCache::default();
    net.forward(input, batch, &mut cache)?;
    let base = kinks(net, &cache);
    let mut pg = vec![0.0; net.params.len()];
    let mut ig = vec![0.0; batch * n_in];
    net.backward(&mut cache, weights, Some(&mut pg), Some((&mut ig, 0..n_in)))?;

    let objective = |net: &Mlp, x: &[f64], cache: &mut ForwardCache| -> Result<(f64, bool)> {
        net.forward(x, batch, cache)?;
        let l = cache.output().iter().zip(weights).map(|(y, w)| y * w).sum();
        Ok((l, kinks(net, cache) == base))
    };

    let mut report = GradCheckReport::default();
    let mut probe = net.clone();
    for (k, &analytic) in pg.iter().enumerate() {
        let p0 = probe.params[k];
        probe.params[k] = p0 + h;
        let (lp, sp) = objective(&probe, input, &mut cache)?;
        probe.params[k] = p0 - h;
        let (lm, sm) = objective(&probe, input, &mut cache)?;
        probe.params[k] = p0;
        if !(sp && sm) {
            report.skipped += 1;
            continue;
        }
        let e = rel_error(analytic, (lp - lm) / (2.0 * h));
        report.max_param_rel_error = report.max_param_rel_error.max(e);
        report.checked += 1;
    }
    let mut x = input.to_vec();
    for k in 0..x.len() {
        let x0 = x[k];
        x[k] = x0 + h;
        let (lp, sp) = objective(net, &x, &mut cache)?;
        x[k] = x0 - h;
        let (lm, sm) = objective(net, &x, &mut cache)?;
        x[k] = x0;
        if !(sp && sm) {
            report.skipped += 1;
            continue;
        }
        let e = rel_error(ig[k], (lp - lm) / (2.0 * h));
        report.max_input_rel_error = report.max_input_rel_error.max(e);
        report.checked += 1;
    }
    Ok(report)
}

/// Gradient checks over `count` random networks (widths 1..=16, one to
/// three hidden layers, random output activation, batch of 1..=4 rows).
pub fn random_spec_suite(count: usize, seed: u64, h: f64) -> Result<Vec<(Vec<usize>, GradCheckReport)>> {
    use rand::Rng;

    use super::MlpSpec;

    let mut rng = crate::rng::stream(seed, crate::rng::ids::INIT);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let hidden = rng.gen_range(1..=3);
        let widths: Vec<usize> = (0..hidden + 2).map(|_| rng.gen_range(1..=16)).collect();
        let output = [Activation::Identity, Activation::Tanh, Activation::Relu][rng.gen_range(0..3)];
        let net = Mlp::init(MlpSpec::new(widths.clone(), output)?, &mut rng);
        let batch = rng.gen_range(1..=4);
        let input: Vec<f64> = (0..batch * widths[0]).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let weights: Vec<f64> = (0..batch * widths[hidden + 1])
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        out.push((widths, check_mlp_gradients(&net, &input, batch, &weights, h)?));
    }
    Ok(out)
}
