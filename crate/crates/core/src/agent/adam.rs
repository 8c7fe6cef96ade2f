use crate::error::{QapError, Result};
use crate::model::{TensorSet, TENSOR_NAMES};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates per scalar, plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
    pub step: u64,
}

impl OptimizerState {
    pub fn for_params<P: TensorSet>(params: &P) -> Self {
        Self::with_sizes(params.slices().iter().map(|s| s.len()))
    }

    pub fn with_sizes<I: IntoIterator<Item = usize>>(sizes: I) -> Self {
        let first: Vec<Vec<f64>> = sizes.into_iter().map(|n| vec![0.0; n]).collect();
        Self {
            second: first.clone(),
            first,
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` along `grads`.
pub fn adam_step<P: TensorSet, G: TensorSet>(
    params: &mut P,
    grads: &G,
    opt: &mut OptimizerState,
    cfg: &AdamConfig,
) -> Result<()> {
    let grads = grads.slices();
    for (name, g) in TENSOR_NAMES.iter().zip(grads.iter()) {
        if let Some(i) = g.iter().position(|x| !x.is_finite()) {
            return Err(QapError::Training(format!(
                "non-finite gradient {} at {name}[{i}] (step {})",
                g[i], opt.step
            )));
        }
    }
    let mut params = params.slices_mut();
    adam_update_slices(&mut params, &grads, opt, cfg)
}

/// Adam over parallel lists of flat parameter and gradient slices.
pub fn adam_update_slices(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    opt: &mut OptimizerState,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != opt.first.len() {
        return Err(QapError::Dimension("optimizer state does not match parameters".into()));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&opt.first) {
        if p.len() != g.len() || p.len() != m.len() {
            return Err(QapError::Dimension("optimizer state does not match parameters".into()));
        }
    }
    if let Some(bad) = grads.iter().flat_map(|g| g.iter()).find(|x| !x.is_finite()) {
        return Err(QapError::Training(format!("non-finite gradient {bad} at step {}", opt.step)));
    }
    opt.step += 1;
    let t = opt.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut opt.first[k];
        let v = &mut opt.second[k];
        for i in 0..p.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
