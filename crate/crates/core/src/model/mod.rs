//! The scoring stack: a message-passing encoder over the complement graph,
//! left/right context aggregation around the acting phone, and a two-branch
//! Q-head with one output per host.
//!
//! Gradients come from a hand-written reverse pass over this fixed topology
//! (see [`loss_and_grad`]); [`finite_diff_check`] cross-checks it.

mod checkpoint;
mod grad;
mod network;

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{QapError, Result};
use crate::rng::rng_from_seed;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use grad::{finite_diff_check, finite_diff_check_against, loss_and_grad, td_target, LossReport};
pub use network::{
    contexts, encode, forward, forward_batch, q_values, ContextPair, EmbeddingSet,
};

/// Encoder tensors, shared by all `layers` recursions.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    /// `d_h × d_h`, pre-pooling transform.
    pub theta1: Array2<f64>,
    /// `d_h × d_h`, applied to the pooled neighbour messages.
    pub theta2: Array2<f64>,
    /// `d_h × n`, lifts the one-hot host vector; also the residual path.
    pub theta3: Array2<f64>,
    /// `d_h`, pre-pooling bias.
    pub mu1: Array1<f64>,
    pub layers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    /// `d'_h × d_h`, right-context channel.
    pub theta4: Array2<f64>,
    /// `d'_h × d_h`, left-context channel.
    pub theta5: Array2<f64>,
    /// `n × 2d'_h`, output layer.
    pub theta6: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
}

/// Layer sizes of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ModelDims {
    pub n: usize,
    pub d_h: usize,
    pub d_prime: usize,
    pub layers: usize,
}

/// Names of the trainable tensors, in storage order.
pub const TENSOR_NAMES: [&str; 7] = ["theta1", "theta2", "theta3", "mu1", "theta4", "theta5", "theta6"];

/// Gradient of a scalar with respect to every trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub theta1: Array2<f64>,
    pub theta2: Array2<f64>,
    pub theta3: Array2<f64>,
    pub mu1: Array1<f64>,
    pub theta4: Array2<f64>,
    pub theta5: Array2<f64>,
    pub theta6: Array2<f64>,
}

/// Uniform flat access to a set of seven tensors in [`TENSOR_NAMES`] order.
pub trait TensorSet {
    fn slices(&self) -> [&[f64]; 7];
    fn slices_mut(&mut self) -> [&mut [f64]; 7];

    fn scalar_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }
}

fn flat(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("tensors are kept in standard layout")
}

fn flat_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("tensors are kept in standard layout")
}

impl TensorSet for ModelParams {
    fn slices(&self) -> [&[f64]; 7] {
        let (e, d) = (&self.encoder, &self.decoder);
        [
            flat(&e.theta1),
            flat(&e.theta2),
            flat(&e.theta3),
            e.mu1.as_slice().expect("standard layout"),
            flat(&d.theta4),
            flat(&d.theta5),
            flat(&d.theta6),
        ]
    }

    fn slices_mut(&mut self) -> [&mut [f64]; 7] {
        let (e, d) = (&mut self.encoder, &mut self.decoder);
        [
            flat_mut(&mut e.theta1),
            flat_mut(&mut e.theta2),
            flat_mut(&mut e.theta3),
            e.mu1.as_slice_mut().expect("standard layout"),
            flat_mut(&mut d.theta4),
            flat_mut(&mut d.theta5),
            flat_mut(&mut d.theta6),
        ]
    }
}

impl TensorSet for GradientSet {
    fn slices(&self) -> [&[f64]; 7] {
        [
            flat(&self.theta1),
            flat(&self.theta2),
            flat(&self.theta3),
            self.mu1.as_slice().expect("standard layout"),
            flat(&self.theta4),
            flat(&self.theta5),
            flat(&self.theta6),
        ]
    }

    fn slices_mut(&mut self) -> [&mut [f64]; 7] {
        [
            flat_mut(&mut self.theta1),
            flat_mut(&mut self.theta2),
            flat_mut(&mut self.theta3),
            self.mu1.as_slice_mut().expect("standard layout"),
            flat_mut(&mut self.theta4),
            flat_mut(&mut self.theta5),
            flat_mut(&mut self.theta6),
        ]
    }
}

impl GradientSet {
    pub fn zeros(dims: ModelDims) -> Self {
        let ModelDims { n, d_h, d_prime, .. } = dims;
        Self {
            theta1: Array2::zeros((d_h, d_h)),
            theta2: Array2::zeros((d_h, d_h)),
            theta3: Array2::zeros((d_h, n)),
            mu1: Array1::zeros(d_h),
            theta4: Array2::zeros((d_prime, d_h)),
            theta5: Array2::zeros((d_prime, d_h)),
            theta6: Array2::zeros((n, 2 * d_prime)),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (dst, src) in self.slices_mut().into_iter().zip(other.slices()) {
            dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }
}

impl ModelParams {
    pub fn dims(&self) -> ModelDims {
        ModelDims {
            n: self.encoder.theta3.ncols(),
            d_h: self.encoder.theta1.nrows(),
            d_prime: self.decoder.theta4.nrows(),
            layers: self.encoder.layers,
        }
    }

    pub fn n(&self) -> usize {
        self.dims().n
    }

    /// All-zero parameters of the given shape.
    pub fn zeros(dims: ModelDims) -> Self {
        let g = GradientSet::zeros(dims);
        Self {
            encoder: EncoderParams {
                theta1: g.theta1,
                theta2: g.theta2,
                theta3: g.theta3,
                mu1: g.mu1,
                layers: dims.layers,
            },
            decoder: DecoderParams {
                theta4: g.theta4,
                theta5: g.theta5,
                theta6: g.theta6,
            },
        }
    }

    /// Checks mutual shape consistency, finiteness and positive sizes.
    pub fn validate(&self) -> Result<()> {
        let dims = self.dims();
        dims.validate()?;
        let ModelDims { n, d_h, d_prime, .. } = dims;
        let e = &self.encoder;
        let d = &self.decoder;
        let expect = [
            ("theta1", e.theta1.dim(), (d_h, d_h)),
            ("theta2", e.theta2.dim(), (d_h, d_h)),
            ("theta3", e.theta3.dim(), (d_h, n)),
            ("theta4", d.theta4.dim(), (d_prime, d_h)),
            ("theta5", d.theta5.dim(), (d_prime, d_h)),
            ("theta6", d.theta6.dim(), (n, 2 * d_prime)),
        ];
        for (name, got, want) in expect {
            if got != want {
                return Err(QapError::Dimension(format!("{name} is {got:?}, expected {want:?}")));
            }
        }
        if e.mu1.len() != d_h {
            return Err(QapError::Dimension(format!("mu1 has {} entries, expected {d_h}", e.mu1.len())));
        }
        for (name, s) in TENSOR_NAMES.iter().zip(self.slices()) {
            if s.iter().any(|x| !x.is_finite()) {
                return Err(QapError::Config(format!("{name} has non-finite entries")));
            }
        }
        Ok(())
    }
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d_h == 0 || self.d_prime == 0 || self.layers == 0 {
            return Err(QapError::Config(format!("model dimensions must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn shape_of(&self, name: &str) -> Option<Vec<usize>> {
        let ModelDims { n, d_h, d_prime, .. } = *self;
        Some(match name {
            "theta1" | "theta2" => vec![d_h, d_h],
            "theta3" => vec![d_h, n],
            "mu1" => vec![d_h],
            "theta4" | "theta5" => vec![d_prime, d_h],
            "theta6" => vec![n, 2 * d_prime],
            _ => return None,
        })
    }
}

/// Glorot-uniform initialization: every tensor is drawn from
/// `Uniform(−r, r)` with `r = sqrt(6 / (fan_in + fan_out))`; `mu1` counts as
/// a `d_h × 1` tensor.
pub fn init_params(dims: ModelDims, seed: u64) -> Result<ModelParams> {
    dims.validate()?;
    let mut params = ModelParams::zeros(dims);
    let mut rng = rng_from_seed(seed);
    for (name, slice) in TENSOR_NAMES.iter().zip(params.slices_mut()) {
        let r = glorot_bound(&dims, name);
        for x in slice.iter_mut() {
            *x = rng.gen_range(-r..r);
        }
    }
    Ok(params)
}

pub fn glorot_bound(dims: &ModelDims, name: &str) -> f64 {
    let shape = dims.shape_of(name).expect("known tensor name");
    let (rows, cols) = (shape[0], shape.get(1).copied().unwrap_or(1));
    (6.0 / (rows + cols) as f64).sqrt()
}
