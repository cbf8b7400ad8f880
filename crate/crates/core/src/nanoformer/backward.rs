//! Manual reverse-mode differentiation mirroring the forward pass.
//!
//! Produces a flat gradient buffer aligned with the parameter layout. The
//! finite-difference helper at the bottom is the correctness oracle: run in
//! f64 it bounds the relative error of every analytic gradient.

use super::forward::{gelu, gelu_prime, Batch, ForwardCache, LossPositions, NormCache, ROPE_BASE};
use super::{view, view_mut, Model, Positional};
use crate::error::Result;
use crate::num::{fl, Scalar};
use crate::rng::{child_seed, rng_from};
use ndarray::{s, Array1, Array2};
use rand::seq::SliceRandom;

/// dL/dx and dL/dgain of y = gain * x / rms(x).
fn rms_backward<F: Scalar>(
    x: &Array2<F>,
    cache: &NormCache<F>,
    gain: &Array1<F>,
    dy: &Array2<F>,
) -> (Array2<F>, Array1<F>) {
    let d = x.ncols();
    let inv_d = fl::<F>(1.0 / d as f64);
    let mut dgain = Array1::<F>::zeros(d);
    let mut dx = Array2::<F>::zeros(x.raw_dim());
    for n in 0..x.nrows() {
        let r = cache.inv_rms[n];
        let xr = x.row(n);
        let dyr = dy.row(n);
        let mut inner = F::zero();
        for j in 0..d {
            dgain[j] += dyr[j] * xr[j] * r;
            inner += dyr[j] * gain[j] * xr[j];
        }
        let coeff = r * r * r * inv_d * inner;
        let mut dxr = dx.row_mut(n);
        for j in 0..d {
            dxr[j] = r * gain[j] * dyr[j] - xr[j] * coeff;
        }
    }
    (dx, dgain)
}

pub fn backward<F: Scalar>(
    model: &Model<F>,
    batch: &Batch,
    cache: &ForwardCache<F>,
    dlogits: Array2<F>,
) -> Array1<F> {
    let config = &model.config;
    let layout = &model.layout;
    let (b_n, l) = (cache.n_examples, cache.seq_len);
    let d = config.d_model;
    let hd = config.head_dim();
    let scale = fl::<F>(1.0 / (hd as f64).sqrt());
    let mut grads = Array1::<F>::zeros(layout.total);

    // Unembedding and final norm.
    let d_unembed = cache.final_norm.y.t().dot(&dlogits);
    view_mut(layout, &mut grads, "unembed").assign(&d_unembed);
    let unembed = view(layout, &model.params, "unembed");
    let dh = dlogits.dot(&unembed.t());
    let gf = view(layout, &model.params, "final_norm.g").row(0).to_owned();
    let (mut dx, dgf) = rms_backward(&cache.x_final, &cache.final_norm, &gf, &dh);
    view_mut(layout, &mut grads, "final_norm.g")
        .row_mut(0)
        .assign(&dgf);

    for t_layer in (0..config.n_layers).rev() {
        let lc = &cache.layers[t_layer];
        let name = |suffix: &str| format!("layer{t_layer}.{suffix}");

        // MLP half: x_out = x_mid + (gelu(gate) * up) . wd
        let wd = view(layout, &model.params, &name("mlp.wd"));
        let dact = dx.dot(&wd.t());
        let d_wd = lc.act.t().dot(&dx);
        view_mut(layout, &mut grads, &name("mlp.wd")).assign(&d_wd);
        let mut dgate = dact.clone();
        let mut dup = dact;
        for ((dg, du), (&g, &u)) in dgate
            .iter_mut()
            .zip(dup.iter_mut())
            .zip(lc.gate.iter().zip(lc.up.iter()))
        {
            let shared = *dg;
            *dg = shared * u * gelu_prime(g);
            *du = shared * gelu(g);
        }
        let d_wg = lc.norm2.y.t().dot(&dgate);
        let d_wu = lc.norm2.y.t().dot(&dup);
        view_mut(layout, &mut grads, &name("mlp.wg")).assign(&d_wg);
        view_mut(layout, &mut grads, &name("mlp.wu")).assign(&d_wu);
        let wg = view(layout, &model.params, &name("mlp.wg"));
        let wu = view(layout, &model.params, &name("mlp.wu"));
        let dy2 = dgate.dot(&wg.t()) + dup.dot(&wu.t());
        let g2 = view(layout, &model.params, &name("norm2.g")).row(0).to_owned();
        let (dx_norm2, dg2) = rms_backward(&lc.x_mid, &lc.norm2, &g2, &dy2);
        view_mut(layout, &mut grads, &name("norm2.g"))
            .row_mut(0)
            .assign(&dg2);
        let dx_mid = &dx + &dx_norm2;

        // Attention half: x_mid = x_in + ctx . wo
        let wo = view(layout, &model.params, &name("attn.wo"));
        let dctx = dx_mid.dot(&wo.t());
        let d_wo = lc.ctx.t().dot(&dx_mid);
        view_mut(layout, &mut grads, &name("attn.wo")).assign(&d_wo);

        let mut dq = Array2::<F>::zeros((b_n * l, d));
        let mut dk = Array2::<F>::zeros((b_n * l, d));
        let mut dv = Array2::<F>::zeros((b_n * l, d));
        for b in 0..b_n {
            let len = batch.lens[b];
            let rows = b * l..b * l + len;
            for h in 0..config.n_heads {
                let cols = h * hd..(h + 1) * hd;
                let probs = &lc.probs[b * config.n_heads + h];
                let dctx_bh = dctx.slice(s![rows.clone(), cols.clone()]);
                let v_bh = lc.v.slice(s![rows.clone(), cols.clone()]);
                let q_bh = lc.q.slice(s![rows.clone(), cols.clone()]);
                let k_bh = lc.k.slice(s![rows.clone(), cols.clone()]);
                let dprobs = dctx_bh.dot(&v_bh.t());
                dv.slice_mut(s![rows.clone(), cols.clone()])
                    .assign(&probs.t().dot(&dctx_bh));
                // Softmax backward per row; masked cells have prob 0 and
                // therefore contribute nothing.
                let mut dscores = dprobs;
                for i in 0..len {
                    let mut inner = F::zero();
                    for j in 0..len {
                        inner += dscores[[i, j]] * probs[[i, j]];
                    }
                    for j in 0..len {
                        dscores[[i, j]] = probs[[i, j]] * (dscores[[i, j]] - inner) * scale;
                    }
                }
                dq.slice_mut(s![rows.clone(), cols.clone()])
                    .assign(&dscores.dot(&k_bh));
                dk.slice_mut(s![rows.clone(), cols])
                    .assign(&dscores.t().dot(&q_bh));
            }
        }
        if config.positional == Positional::Rotary {
            // The rotation is orthogonal, so its gradient is the inverse
            // rotation applied to the downstream gradient.
            super::forward::rope_in_place(&mut dq, l, config.n_heads, hd, ROPE_BASE, -1.0);
            super::forward::rope_in_place(&mut dk, l, config.n_heads, hd, ROPE_BASE, -1.0);
        }
        let d_wq = lc.norm1.y.t().dot(&dq);
        let d_wk = lc.norm1.y.t().dot(&dk);
        let d_wv = lc.norm1.y.t().dot(&dv);
        view_mut(layout, &mut grads, &name("attn.wq")).assign(&d_wq);
        view_mut(layout, &mut grads, &name("attn.wk")).assign(&d_wk);
        view_mut(layout, &mut grads, &name("attn.wv")).assign(&d_wv);
        let wq = view(layout, &model.params, &name("attn.wq"));
        let wk = view(layout, &model.params, &name("attn.wk"));
        let wv = view(layout, &model.params, &name("attn.wv"));
        let dy1 = dq.dot(&wq.t()) + dk.dot(&wk.t()) + dv.dot(&wv.t());
        let g1 = view(layout, &model.params, &name("norm1.g")).row(0).to_owned();
        let (dx_norm1, dg1) = rms_backward(&lc.x_in, &lc.norm1, &g1, &dy1);
        view_mut(layout, &mut grads, &name("norm1.g"))
            .row_mut(0)
            .assign(&dg1);
        dx = dx_mid + dx_norm1;
    }

    // Scatter into the embedding (and learned positions).
    {
        let mut d_embed = view_mut(layout, &mut grads, "embed");
        for b in 0..b_n {
            for t in 0..l {
                let id = batch.ids[[b, t]] as usize;
                let src = dx.row(b * l + t);
                let mut dst = d_embed.row_mut(id);
                dst += &src;
            }
        }
    }
    if config.positional == Positional::Learned {
        let mut d_pos = view_mut(layout, &mut grads, "pos_embed");
        for b in 0..b_n {
            for t in 0..l {
                let src = dx.row(b * l + t);
                let mut dst = d_pos.row_mut(t);
                dst += &src;
            }
        }
    }
    grads
}

/// Compare every (or a sampled subset of) analytic gradient coordinate with
/// a central finite difference. Returns (max, mean) relative error, where
/// the relative scale is |analytic| + |numeric| floored at 1e-10.
pub fn finite_difference_check(
    model: &mut Model<f64>,
    batch: &Batch,
    mode: LossPositions,
    eps: f64,
    probes: Option<usize>,
    probe_seed: u64,
) -> Result<(f64, f64)> {
    let (_, grads) = super::forward::loss_and_grads(model, batch, mode)?;
    let mut indices: Vec<usize> = (0..model.layout.total).collect();
    if let Some(n) = probes {
        let mut rng = rng_from(child_seed(probe_seed, "fd-probes"));
        indices.shuffle(&mut rng);
        indices.truncate(n);
    }
    let mut max_rel = 0.0f64;
    let mut sum_rel = 0.0f64;
    for &i in &indices {
        let saved = model.params[i];
        model.params[i] = saved + eps;
        let up = super::forward::loss_only(model, batch, mode)?;
        model.params[i] = saved - eps;
        let down = super::forward::loss_only(model, batch, mode)?;
        model.params[i] = saved;
        let numeric = (up - down) / (2.0 * eps);
        let analytic = grads[i];
        let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-10);
        max_rel = max_rel.max(rel);
        sum_rel += rel;
    }
    Ok((max_rel, sum_rel / indices.len() as f64))
}
