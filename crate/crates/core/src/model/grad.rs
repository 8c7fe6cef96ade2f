//! Mean squared k-step TD loss and its exact gradient.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Axis};

use super::network::{forward_traced, head_traced, EncoderTrace, HeadTrace};
use super::{forward, q_values, GradientSet, ModelParams, TensorSet};
use crate::agent::Transition;
use crate::error::{QapError, Result};

/// Loss value together with per-sample diagnostics.
#[derive(Debug, Clone)]
pub struct LossReport {
    pub loss: f64,
    pub grads: GradientSet,
    /// `prediction − target` per transition.
    pub td_errors: Vec<f64>,
}

/// `r + γ · max_a Q̂(next)`, without the bootstrap term on terminal transitions.
pub fn td_target(target: &ModelParams, tr: &Transition, gamma: f64) -> Result<f64> {
    let Some(next_phone) = tr.next_phone else {
        return Ok(tr.reward);
    };
    let q_next = match &tr.frozen {
        Some(f) => {
            let ctx = f.next.as_ref().ok_or_else(|| {
                QapError::Training("frozen transition lacks next contexts".into())
            })?;
            q_values(&target.decoder, ctx)?
        }
        None => forward(target, &tr.instance, &tr.next_state, next_phone)?,
    };
    Ok(tr.reward + gamma * q_next.fold(f64::NEG_INFINITY, |a, &b| a.max(b)))
}

fn prediction(p: &ModelParams, tr: &Transition) -> Result<f64> {
    let q = match &tr.frozen {
        Some(f) => q_values(&p.decoder, &f.context)?,
        None => forward(p, &tr.instance, &tr.state, tr.phone)?,
    };
    q.get(tr.action)
        .copied()
        .ok_or_else(|| QapError::State(format!("action {} out of range", tr.action)))
}

/// Mean loss by plain forward evaluation; no gradient.
pub fn batch_loss(p: &ModelParams, target: &ModelParams, batch: &[Transition], gamma: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(QapError::Config("empty batch".into()));
    }
    let mut total = 0.0;
    for tr in batch {
        let diff = prediction(p, tr)? - td_target(target, tr, gamma)?;
        total += diff * diff;
    }
    Ok(total / batch.len() as f64)
}

/// Mean over the batch of `(Q(s, a) − (r + γ max Q̂(s')))²` and its gradient
/// with respect to every tensor of `p`. `target` is held constant.
pub fn loss_and_grad(
    p: &ModelParams,
    target: &ModelParams,
    batch: &[Transition],
    gamma: f64,
) -> Result<(f64, GradientSet)> {
    let report = loss_report(p, target, batch, gamma)?;
    Ok((report.loss, report.grads))
}

pub fn loss_report(p: &ModelParams, target: &ModelParams, batch: &[Transition], gamma: f64) -> Result<LossReport> {
    if batch.is_empty() {
        return Err(QapError::Config("empty batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grads = GradientSet::zeros(p.dims());
    let mut loss = 0.0;
    let mut td_errors = Vec::with_capacity(batch.len());
    for tr in batch {
        let y = td_target(target, tr, gamma)?;
        let (enc, head) = match &tr.frozen {
            Some(f) => (None, head_traced(&p.decoder, f.context.clone())),
            None => {
                let (enc, head) = forward_traced(p, &tr.instance, &tr.state, tr.phone)?;
                (Some(enc), head)
            }
        };
        let pred = *head
            .q
            .get(tr.action)
            .ok_or_else(|| QapError::State(format!("action {} out of range", tr.action)))?;
        let diff = pred - y;
        loss += diff * diff * scale;
        td_errors.push(diff);
        if diff == 0.0 {
            continue;
        }
        let mut dq = Array1::zeros(head.q.len());
        dq[tr.action] = 2.0 * diff * scale;
        let (d_left, d_right) = head_backward(p, &head, &dq, &mut grads);
        if let Some(enc) = enc {
            encoder_backward(p, &enc, tr, &d_left, &d_right, &mut grads);
        }
    }
    Ok(LossReport { loss, grads, td_errors })
}

fn add_outer(acc: &mut Array2<f64>, col: &Array1<f64>, row: &Array1<f64>) {
    let c = col.view().insert_axis(Axis(1));
    let r = row.view().insert_axis(Axis(0));
    general_mat_mul(1.0, &c, &r, 1.0, acc);
}

/// Returns the gradient with respect to the left and right contexts.
fn head_backward(p: &ModelParams, head: &HeadTrace, dq: &Array1<f64>, grads: &mut GradientSet) -> (Array1<f64>, Array1<f64>) {
    let d = &p.decoder;
    let half = d.theta5.nrows();
    let activated = head.joined.mapv(|x| x.max(0.0));
    add_outer(&mut grads.theta6, dq, &activated);
    let mut d_joined = d.theta6.t().dot(dq);
    d_joined.zip_mut_with(&head.joined, |g, &x| {
        if x <= 0.0 {
            *g = 0.0;
        }
    });
    let d_left_ch = d_joined.slice(s![..half]).to_owned();
    let d_right_ch = d_joined.slice(s![half..]).to_owned();
    add_outer(&mut grads.theta5, &d_left_ch, &head.ctx.left);
    add_outer(&mut grads.theta4, &d_right_ch, &head.ctx.right);
    (d.theta5.t().dot(&d_left_ch), d.theta4.t().dot(&d_right_ch))
}

fn encoder_backward(
    p: &ModelParams,
    enc: &EncoderTrace,
    tr: &Transition,
    d_left: &Array1<f64>,
    d_right: &Array1<f64>,
    grads: &mut GradientSet,
) {
    let e = &p.encoder;
    let w_bar = tr.instance.w_bar();
    let t = tr.phone;
    let m = w_bar.nrows();
    let w_row = w_bar.row(t);

    let mut d_h = Array2::<f64>::zeros((m, e.theta1.nrows()));
    for (j, mut row) in d_h.outer_iter_mut().enumerate() {
        let src = if j < t { d_left } else { d_right };
        row.scaled_add(w_row[j], src);
    }
    let mut d_lift = Array2::<f64>::zeros(d_h.dim());
    for l in (0..e.layers).rev() {
        let mut d_update = d_h;
        d_update.zip_mut_with(&enc.update[l], |g, &x| {
            if x <= 0.0 {
                *g = 0.0;
            }
        });
        d_lift += &d_update;
        general_mat_mul(1.0, &d_update.t(), &enc.messages[l], 1.0, &mut grads.theta2);
        let d_messages = d_update.dot(&e.theta2);
        let mut d_pre = w_bar.t().dot(&d_messages);
        d_pre.zip_mut_with(&enc.pre_pool[l], |g, &x| {
            if x <= 0.0 {
                *g = 0.0;
            }
        });
        grads.mu1 += &d_pre.sum_axis(Axis(0));
        general_mat_mul(1.0, &d_pre.t(), &enc.h[l], 1.0, &mut grads.theta1);
        d_h = d_pre.dot(&e.theta1);
    }
    d_lift += &d_h;
    for (i, &host) in tr.state.assign().iter().enumerate() {
        let mut col = grads.theta3.column_mut(host);
        col += &d_lift.row(i);
    }
}

/// Worst relative error between the analytic gradient of
/// [`loss_and_grad`] and central differences with the given step, using
/// `max(|a|, |b|, 1e-8)` as the denominator.
pub fn finite_diff_check(
    p: &ModelParams,
    target: &ModelParams,
    batch: &[Transition],
    gamma: f64,
    step: f64,
) -> Result<f64> {
    let (_, grads) = loss_and_grad(p, target, batch, gamma)?;
    finite_diff_check_against(p, target, batch, gamma, step, &grads)
}

/// Same comparison against a caller-supplied gradient.
pub fn finite_diff_check_against(
    p: &ModelParams,
    target: &ModelParams,
    batch: &[Transition],
    gamma: f64,
    step: f64,
    analytic: &GradientSet,
) -> Result<f64> {
    if analytic.scalar_count() != p.scalar_count() {
        return Err(QapError::Dimension("gradient does not match parameters".into()));
    }
    let mut probe = p.clone();
    let mut worst: f64 = 0.0;
    let analytic = analytic.slices();
    for (tensor, grad) in analytic.iter().enumerate() {
        for (idx, &a) in grad.iter().enumerate() {
            let orig = probe.slices()[tensor][idx];
            probe.slices_mut()[tensor][idx] = orig + step;
            let up = batch_loss(&probe, target, batch, gamma)?;
            probe.slices_mut()[tensor][idx] = orig - step;
            let down = batch_loss(&probe, target, batch, gamma)?;
            probe.slices_mut()[tensor][idx] = orig;
            let numeric = (up - down) / (2.0 * step);
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}
