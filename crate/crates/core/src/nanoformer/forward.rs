//! Batched forward pass with full activation caching, plus the masked
//! next-token cross-entropy loss.
//!
//! Sequences are right-padded; padded rows flow through the math but are
//! excluded from attention (per-example score matrices cover only the real
//! length) and from the loss, so they contribute exactly zero gradient.

use super::{view, Model};
use crate::error::{Error, Result};
use crate::num::{fl, Scalar};
use crate::tok::{Encoded, PAD_ID};
use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossPositions {
    All,
    AnswerOnly,
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub ids: Array2<u32>,
    pub lens: Vec<usize>,
    pub answer_starts: Vec<usize>,
}

impl Batch {
    pub fn new(examples: &[&Encoded]) -> Result<Batch> {
        if examples.is_empty() {
            return Err(Error::Input("empty batch".into()));
        }
        let max_len = examples.iter().map(|e| e.ids.len()).max().unwrap();
        let mut ids = Array2::<u32>::from_elem((examples.len(), max_len), PAD_ID);
        let mut lens = Vec::with_capacity(examples.len());
        let mut answer_starts = Vec::with_capacity(examples.len());
        for (b, e) in examples.iter().enumerate() {
            if e.answer_start == 0 || e.answer_start >= e.ids.len() {
                return Err(Error::Input(format!(
                    "malformed example: answer_start {} in a sequence of {}",
                    e.answer_start,
                    e.ids.len()
                )));
            }
            for (t, &id) in e.ids.iter().enumerate() {
                ids[[b, t]] = id;
            }
            lens.push(e.ids.len());
            answer_starts.push(e.answer_start);
        }
        Ok(Batch { ids, lens, answer_starts })
    }

    pub fn n_examples(&self) -> usize {
        self.ids.nrows()
    }

    pub fn seq_len(&self) -> usize {
        self.ids.ncols()
    }

    /// Flat (row, target) pairs of the positions the loss covers: position t
    /// predicts the token at t + 1. Answer-only mode keeps just the
    /// positions whose prediction lands inside the answer span.
    pub fn selected(&self, mode: LossPositions) -> Result<Vec<(usize, u32)>> {
        let l = self.seq_len();
        let mut sel = Vec::new();
        for b in 0..self.n_examples() {
            let (from, to) = match mode {
                LossPositions::All => (0, self.lens[b] - 1),
                LossPositions::AnswerOnly => (self.answer_starts[b] - 1, self.lens[b] - 1),
            };
            for t in from..to {
                sel.push((b * l + t, self.ids[[b, t + 1]]));
            }
        }
        if sel.is_empty() {
            return Err(Error::Input("loss position selection is empty".into()));
        }
        Ok(sel)
    }
}

#[derive(Debug, Clone)]
pub struct NormCache<F: Scalar> {
    /// 1 / rms per row of the norm's input.
    pub inv_rms: Array1<F>,
    /// The norm's output.
    pub y: Array2<F>,
}

#[derive(Debug, Clone)]
pub struct LayerCache<F: Scalar> {
    pub x_in: Array2<F>,
    pub norm1: NormCache<F>,
    /// Query/key are cached after the positional rotation.
    pub q: Array2<F>,
    pub k: Array2<F>,
    pub v: Array2<F>,
    /// One attention matrix per (example, head), row-major over examples.
    pub probs: Vec<Array2<F>>,
    /// Concatenated per-head context, before the output projection.
    pub ctx: Array2<F>,
    pub x_mid: Array2<F>,
    pub norm2: NormCache<F>,
    pub gate: Array2<F>,
    pub up: Array2<F>,
    pub act: Array2<F>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache<F: Scalar> {
    pub x0: Array2<F>,
    pub layers: Vec<LayerCache<F>>,
    /// Residual stream entering the final norm.
    pub x_final: Array2<F>,
    pub final_norm: NormCache<F>,
    pub logits: Array2<F>,
    pub n_examples: usize,
    pub seq_len: usize,
}

impl<F: Scalar> ForwardCache<F> {
    /// Residual stream right after block `t` (post residual addition).
    pub fn residual_after(&self, t: usize) -> &Array2<F> {
        if t + 1 < self.layers.len() {
            &self.layers[t + 1].x_in
        } else {
            &self.x_final
        }
    }

    pub fn row(&self, example: usize, position: usize) -> usize {
        example * self.seq_len + position
    }
}

pub(super) fn rms_norm<F: Scalar>(x: &Array2<F>, gain: &Array1<F>, eps: f64) -> NormCache<F> {
    let d = x.ncols();
    let inv_d = fl::<F>(1.0 / d as f64);
    let eps = fl::<F>(eps);
    let mut inv_rms = Array1::<F>::zeros(x.nrows());
    for (n, row) in x.rows().into_iter().enumerate() {
        let ms = row.iter().map(|&v| v * v).sum::<F>() * inv_d;
        inv_rms[n] = F::one() / (ms + eps).sqrt();
    }
    let mut y = x.clone();
    for (n, mut row) in y.rows_mut().into_iter().enumerate() {
        let r = inv_rms[n];
        for (v, &g) in row.iter_mut().zip(gain.iter()) {
            *v = *v * r * g;
        }
    }
    NormCache { inv_rms, y }
}

pub(super) fn gelu<F: Scalar>(x: F) -> F {
    let c = fl::<F>(0.7978845608028654);
    let a = fl::<F>(0.044715);
    let half = fl::<F>(0.5);
    let u = c * (x + a * x * x * x);
    half * x * (F::one() + u.tanh())
}

pub(super) fn gelu_prime<F: Scalar>(x: F) -> F {
    let c = fl::<F>(0.7978845608028654);
    let a = fl::<F>(0.044715);
    let half = fl::<F>(0.5);
    let three = fl::<F>(3.0);
    let u = c * (x + a * x * x * x);
    let t = u.tanh();
    let sech2 = F::one() - t * t;
    half * (F::one() + t) + half * x * sech2 * c * (F::one() + three * a * x * x)
}

/// Rotate query/key pairs (i, i + head_dim/2) by the per-position angles.
/// `sign` +1 applies the rotation, -1 inverts it (used by the backward pass).
pub(super) fn rope_in_place<F: Scalar>(
    x: &mut Array2<F>,
    seq_len: usize,
    n_heads: usize,
    head_dim: usize,
    base: f64,
    sign: f64,
) {
    let half = head_dim / 2;
    let mut cos = Array2::<F>::zeros((seq_len, half));
    let mut sin = Array2::<F>::zeros((seq_len, half));
    for t in 0..seq_len {
        for i in 0..half {
            let theta = t as f64 * base.powf(-2.0 * i as f64 / head_dim as f64) * sign;
            cos[[t, i]] = fl(theta.cos());
            sin[[t, i]] = fl(theta.sin());
        }
    }
    for (n, mut row) in x.rows_mut().into_iter().enumerate() {
        let t = n % seq_len;
        for h in 0..n_heads {
            let off = h * head_dim;
            for i in 0..half {
                let a = row[off + i];
                let b = row[off + i + half];
                row[off + i] = a * cos[[t, i]] - b * sin[[t, i]];
                row[off + i + half] = a * sin[[t, i]] + b * cos[[t, i]];
            }
        }
    }
}

pub const ROPE_BASE: f64 = 10_000.0;

pub fn forward<F: Scalar>(model: &Model<F>, batch: &Batch) -> Result<ForwardCache<F>> {
    let config = &model.config;
    let (b_n, l) = (batch.n_examples(), batch.seq_len());
    if l > config.max_seq_len {
        return Err(Error::Input(format!(
            "sequence length {l} exceeds max_seq_len {}",
            config.max_seq_len
        )));
    }
    let d = config.d_model;
    let hd = config.head_dim();
    let n = b_n * l;

    let embed = view(&model.layout, &model.params, "embed");
    let mut x = Array2::<F>::zeros((n, d));
    for b in 0..b_n {
        for t in 0..l {
            let id = batch.ids[[b, t]] as usize;
            if id >= config.vocab_size {
                return Err(Error::Input(format!(
                    "token id {id} out of vocabulary ({})",
                    config.vocab_size
                )));
            }
            x.row_mut(b * l + t).assign(&embed.row(id));
        }
    }
    if config.positional == super::Positional::Learned {
        let pos = view(&model.layout, &model.params, "pos_embed");
        for b in 0..b_n {
            for t in 0..l {
                let mut row = x.row_mut(b * l + t);
                row += &pos.row(t);
            }
        }
    }
    let x0 = x.clone();

    let scale = fl::<F>(1.0 / (hd as f64).sqrt());
    let neg_inf = fl::<F>(f64::NEG_INFINITY);
    let mut layers = Vec::with_capacity(config.n_layers);
    for t_layer in 0..config.n_layers {
        let g1 = view(&model.layout, &model.params, &format!("layer{t_layer}.norm1.g"))
            .row(0)
            .to_owned();
        let norm1 = rms_norm(&x, &g1, config.rms_eps);
        let wq = view(&model.layout, &model.params, &format!("layer{t_layer}.attn.wq"));
        let wk = view(&model.layout, &model.params, &format!("layer{t_layer}.attn.wk"));
        let wv = view(&model.layout, &model.params, &format!("layer{t_layer}.attn.wv"));
        let wo = view(&model.layout, &model.params, &format!("layer{t_layer}.attn.wo"));
        let mut q = norm1.y.dot(&wq);
        let mut k = norm1.y.dot(&wk);
        let v = norm1.y.dot(&wv);
        if config.positional == super::Positional::Rotary {
            rope_in_place(&mut q, l, config.n_heads, hd, ROPE_BASE, 1.0);
            rope_in_place(&mut k, l, config.n_heads, hd, ROPE_BASE, 1.0);
        }

        let mut probs = Vec::with_capacity(b_n * config.n_heads);
        let mut ctx = Array2::<F>::zeros((n, d));
        for b in 0..b_n {
            let len = batch.lens[b];
            let rows = b * l..b * l + len;
            for h in 0..config.n_heads {
                let cols = h * hd..(h + 1) * hd;
                let q_bh = q.slice(s![rows.clone(), cols.clone()]);
                let k_bh = k.slice(s![rows.clone(), cols.clone()]);
                let v_bh = v.slice(s![rows.clone(), cols.clone()]);
                let mut scores = q_bh.dot(&k_bh.t());
                scores *= scale;
                for i in 0..len {
                    for j in (i + 1)..len {
                        scores[[i, j]] = neg_inf;
                    }
                }
                // Row-wise softmax with max subtraction.
                for mut row in scores.rows_mut() {
                    let max = row.iter().fold(neg_inf, |acc, &v| if v > acc { v } else { acc });
                    let mut sum = F::zero();
                    for v in row.iter_mut() {
                        *v = (*v - max).exp();
                        sum += *v;
                    }
                    for v in row.iter_mut() {
                        *v = *v / sum;
                    }
                }
                let ctx_bh = scores.dot(&v_bh);
                ctx.slice_mut(s![rows.clone(), cols]).assign(&ctx_bh);
                probs.push(scores);
            }
        }
        let attn_out = ctx.dot(&wo);
        let x_mid = &x + &attn_out;

        let g2 = view(&model.layout, &model.params, &format!("layer{t_layer}.norm2.g"))
            .row(0)
            .to_owned();
        let norm2 = rms_norm(&x_mid, &g2, config.rms_eps);
        let wg = view(&model.layout, &model.params, &format!("layer{t_layer}.mlp.wg"));
        let wu = view(&model.layout, &model.params, &format!("layer{t_layer}.mlp.wu"));
        let wd = view(&model.layout, &model.params, &format!("layer{t_layer}.mlp.wd"));
        let gate = norm2.y.dot(&wg);
        let up = norm2.y.dot(&wu);
        let mut act = gate.clone();
        for (a, &u) in act.iter_mut().zip(up.iter()) {
            *a = gelu(*a) * u;
        }
        let mlp_out = act.dot(&wd);
        let x_out = &x_mid + &mlp_out;

        layers.push(LayerCache {
            x_in: x,
            norm1,
            q,
            k,
            v,
            probs,
            ctx,
            x_mid,
            norm2,
            gate,
            up,
            act,
        });
        x = x_out;
    }

    let gf = view(&model.layout, &model.params, "final_norm.g").row(0).to_owned();
    let final_norm = rms_norm(&x, &gf, config.rms_eps);
    let unembed = view(&model.layout, &model.params, "unembed");
    let logits = final_norm.y.dot(&unembed);
    Ok(ForwardCache {
        x0,
        layers,
        x_final: x,
        final_norm,
        logits,
        n_examples: b_n,
        seq_len: l,
    })
}

/// Mean cross-entropy over the selected positions, plus the logit gradient
/// scaled for that mean.
pub(super) fn cross_entropy<F: Scalar>(
    logits: &Array2<F>,
    selected: &[(usize, u32)],
    want_grad: bool,
) -> Result<(f64, Option<Array2<F>>)> {
    let w = fl::<F>(1.0 / selected.len() as f64);
    let mut loss = 0.0f64;
    let mut dlogits = if want_grad {
        Some(Array2::<F>::zeros(logits.raw_dim()))
    } else {
        None
    };
    for &(row, target) in selected {
        let r = logits.row(row);
        let max = r.iter().fold(f64::NEG_INFINITY, |acc, &v| acc.max(v.to_f64()));
        let mut sum = F::zero();
        for &v in r.iter() {
            sum += (v - fl(max)).exp();
        }
        let lse = fl::<F>(max) + sum.ln();
        loss += (lse - r[target as usize]).to_f64();
        if let Some(d) = dlogits.as_mut() {
            let mut drow = d.row_mut(row);
            for (j, &v) in r.iter().enumerate() {
                drow[j] = (v - lse).exp() * w;
            }
            drow[target as usize] -= w;
        }
    }
    loss /= selected.len() as f64;
    if !loss.is_finite() {
        return Err(Error::Run(format!(
            "non-finite loss over {} positions (first row {})",
            selected.len(),
            selected[0].0
        )));
    }
    Ok((loss, dlogits))
}

pub fn loss_only<F: Scalar>(model: &Model<F>, batch: &Batch, mode: LossPositions) -> Result<f64> {
    let cache = forward(model, batch)?;
    let selected = batch.selected(mode)?;
    let (loss, _) = cross_entropy(&cache.logits, &selected, false)?;
    Ok(loss)
}

/// Forward + backward in one call: the scalar loss and the gradient of every
/// parameter, flat in layout order.
pub fn loss_and_grads<F: Scalar>(
    model: &Model<F>,
    batch: &Batch,
    mode: LossPositions,
) -> Result<(f64, Array1<F>)> {
    let cache = forward(model, batch)?;
    let selected = batch.selected(mode)?;
    let (loss, dlogits) = cross_entropy(&cache.logits, &selected, true)?;
    let grads = super::backward(model, batch, &cache, dlogits.unwrap());
    Ok((loss, grads))
}
