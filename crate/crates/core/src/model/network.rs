use ndarray::{concatenate, s, Array1, Array2, ArrayView1, Axis};

use super::{DecoderParams, EncoderParams, ModelParams};
use crate::error::{QapError, Result};
use crate::problem::{AllocationState, ProblemInstance};

/// Final-layer node embeddings, one row per phone.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub h: Array2<f64>,
}

/// Weighted sums of embeddings over phones before (`left`) and from
/// (`right`) the acting phone.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextPair {
    pub left: Array1<f64>,
    pub right: Array1<f64>,
}

/// Intermediate tensors of one encoder pass, kept for the reverse pass.
#[derive(Debug, Clone)]
pub(crate) struct EncoderTrace {
    /// `θ3 x_i` per row: initial embedding and residual input.
    pub lifted: Array2<f64>,
    /// `h^{(l)}` for `l = 0..=L`.
    pub h: Vec<Array2<f64>>,
    /// Pre-pooling pre-activations `h θ1ᵀ + μ1`, per layer.
    pub pre_pool: Vec<Array2<f64>>,
    /// Pooled messages `W̄ relu(pre_pool)`, per layer.
    pub messages: Vec<Array2<f64>>,
    /// Update pre-activations `θ3 x + messages θ2ᵀ`, per layer.
    pub update: Vec<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub(crate) struct HeadTrace {
    pub ctx: ContextPair,
    /// `[θ5 c_left, θ4 c_right]` before the relu.
    pub joined: Array1<f64>,
    pub q: Array1<f64>,
}

fn relu(a: &Array2<f64>) -> Array2<f64> {
    a.mapv(|x| x.max(0.0))
}

pub(crate) fn check_inputs(p: &EncoderParams, w_bar: &Array2<f64>, s: &AllocationState, n: usize) -> Result<()> {
    let m = s.len();
    if w_bar.dim() != (m, m) {
        return Err(QapError::Dimension(format!(
            "complement matrix is {:?}, state has {m} phones",
            w_bar.dim()
        )));
    }
    if p.theta3.ncols() != n {
        return Err(QapError::Dimension(format!(
            "encoder built for {} hosts, instance has {n}",
            p.theta3.ncols()
        )));
    }
    if p.layers == 0 {
        return Err(QapError::Config("encoder needs at least one layer".into()));
    }
    s.check(m, n)
}

pub(crate) fn encode_traced(p: &EncoderParams, w_bar: &Array2<f64>, s: &AllocationState) -> EncoderTrace {
    let lifted = p.theta3.t().select(Axis(0), s.assign());
    let mut trace = EncoderTrace {
        h: vec![lifted.clone()],
        lifted,
        pre_pool: Vec::with_capacity(p.layers),
        messages: Vec::with_capacity(p.layers),
        update: Vec::with_capacity(p.layers),
    };
    for l in 0..p.layers {
        let pre_pool = trace.h[l].dot(&p.theta1.t()) + &p.mu1;
        let messages = w_bar.dot(&relu(&pre_pool));
        let update = &trace.lifted + &messages.dot(&p.theta2.t());
        trace.h.push(relu(&update));
        trace.pre_pool.push(pre_pool);
        trace.messages.push(messages);
        trace.update.push(update);
    }
    trace
}

/// Runs `layers` rounds of
/// `h_i ← relu(θ3 x_i + θ2 Σ_j w̄_ij relu(θ1 h_j + μ1))` from `h_i = θ3 x_i`.
pub fn encode(p: &EncoderParams, w_bar: &Array2<f64>, s: &AllocationState, n: usize) -> Result<EmbeddingSet> {
    check_inputs(p, w_bar, s, n)?;
    let mut trace = encode_traced(p, w_bar, s);
    Ok(EmbeddingSet {
        h: trace.h.pop().expect("at least the initial embedding"),
    })
}

pub(crate) fn contexts_unchecked(h: &Array2<f64>, w_bar: &Array2<f64>, t: usize) -> ContextPair {
    let row: ArrayView1<f64> = w_bar.row(t);
    ContextPair {
        left: row.slice(s![..t]).dot(&h.slice(s![..t, ..])),
        right: row.slice(s![t..]).dot(&h.slice(s![t.., ..])),
    }
}

/// Context around phone `t` (0-based): `left = Σ_{t'<t} w̄[t][t'] h_{t'}`,
/// `right = Σ_{t'≥t} w̄[t][t'] h_{t'}`.
pub fn contexts(e: &EmbeddingSet, w_bar: &Array2<f64>, t: usize) -> Result<ContextPair> {
    let m = e.h.nrows();
    if t >= m {
        return Err(QapError::State(format!("phone {t} out of range ({m} phones)")));
    }
    if w_bar.dim() != (m, m) {
        return Err(QapError::Dimension("complement matrix does not match embeddings".into()));
    }
    Ok(contexts_unchecked(&e.h, w_bar, t))
}

pub(crate) fn head_traced(d: &DecoderParams, ctx: ContextPair) -> HeadTrace {
    let joined = concatenate![Axis(0), d.theta5.dot(&ctx.left), d.theta4.dot(&ctx.right)];
    let q = d.theta6.dot(&joined.mapv(|x| x.max(0.0)));
    HeadTrace { ctx, joined, q }
}

/// `θ6 relu([θ5 c_left, θ4 c_right])`.
pub fn q_values(d: &DecoderParams, c: &ContextPair) -> Result<Array1<f64>> {
    let d_h = d.theta4.ncols();
    if c.left.len() != d_h || c.right.len() != d_h || d.theta5.ncols() != d_h {
        return Err(QapError::Dimension(format!(
            "context widths {}/{} do not match decoder input {d_h}",
            c.left.len(),
            c.right.len()
        )));
    }
    if d.theta6.ncols() != d.theta4.nrows() + d.theta5.nrows() {
        return Err(QapError::Dimension("theta6 width must be 2·d'_h".into()));
    }
    Ok(head_traced(d, c.clone()).q)
}

/// Q-values for moving phone `t` of the current allocation to each host.
pub fn forward(p: &ModelParams, inst: &ProblemInstance, s: &AllocationState, t: usize) -> Result<Array1<f64>> {
    let e = encode(&p.encoder, inst.w_bar(), s, inst.n())?;
    let c = contexts(&e, inst.w_bar(), t)?;
    q_values(&p.decoder, &c)
}

pub fn forward_batch(
    p: &ModelParams,
    items: &[(&ProblemInstance, &AllocationState, usize)],
) -> Result<Vec<Array1<f64>>> {
    items.iter().map(|(inst, s, t)| forward(p, inst, s, *t)).collect()
}

/// Forward pass keeping every intermediate needed by the gradient.
pub(crate) fn forward_traced(
    p: &ModelParams,
    inst: &ProblemInstance,
    s: &AllocationState,
    t: usize,
) -> Result<(EncoderTrace, HeadTrace)> {
    check_inputs(&p.encoder, inst.w_bar(), s, inst.n())?;
    if t >= s.len() {
        return Err(QapError::State(format!("phone {t} out of range ({} phones)", s.len())));
    }
    let enc = encode_traced(&p.encoder, inst.w_bar(), s);
    let ctx = contexts_unchecked(enc.h.last().expect("initial embedding"), inst.w_bar(), t);
    let head = head_traced(&p.decoder, ctx);
    Ok((enc, head))
}
