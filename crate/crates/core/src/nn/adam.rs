use crate::error::{dim, Error, Result};

use super::{BinReader, BinWriter};

/// Adam optimizer state laid out like the parameter vector it updates.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected Adam update. A non-finite gradient is rejected
    /// before anything is modified.
    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        dim("adam params", self.m.len(), params.len())?;
        dim("adam gradient", self.m.len(), grad.len())?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence("non-finite gradient".into()));
        }
        self.step += 1;
        let t = self.step as f64;
        let c1 = 1.0 - self.beta1.powf(t);
        let c2 = 1.0 - self.beta2.powf(t);
        let (b1, b2) = (self.beta1, self.beta2);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }

    pub fn write(&self, w: &mut BinWriter) {
        w.u64(self.step);
        for x in [self.lr, self.beta1, self.beta2, self.eps] {
            w.f64(x);
        }
        w.u64(self.m.len() as u64);
        w.f64s(&self.m);
        w.f64s(&self.v);
    }

    pub fn read(r: &mut BinReader<'_>) -> Result<Self> {
        let step = r.u64()?;
        let (lr, beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
        let n = r.u64()? as usize;
        let m = r.f64s(n)?;
        let v = r.f64s(n)?;
        Ok(Self {
            m,
            v,
            step,
            lr,
            beta1,
            beta2,
            eps,
        })
    }
}

pub fn adam_step(params: &mut [f64], grad: &[f64], st: &mut AdamState) -> Result<()> {
    st.update(params, grad)
}

/// Rescales `grad` in place so its L2 norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}
