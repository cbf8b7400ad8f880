//! A small decoder-only transformer trained from scratch on CPU.
//!
//! Parameters live in one flat vector with a named layout table, which keeps
//! the optimizer, checkpoint serialization, finite-difference checks, and
//! parameter-subset gradient extraction trivial. Blocks are pre-norm with an
//! RMS norm (gain only), rotary or learned positions, and a gated MLP; there
//! are no bias vectors anywhere. Everything is generic over the scalar type:
//! training runs in f32, gradient verification in f64.

mod backward;
mod checkpoint;
mod forward;
mod optim;
mod train;

pub use backward::{backward, finite_difference_check};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, CHECKPOINT_MAGIC};
pub use forward::{forward, loss_and_grads, loss_only, Batch, ForwardCache, LossPositions};
pub use optim::{lr_at_step, AdamW};
pub use train::{default_checkpoint_schedule, train, TrainConfig, TrainStats, Trainer};

use crate::error::{Error, Result};
use crate::num::{fl, Scalar};
use crate::rng::{child_seed, rng_from};
use ndarray::{Array1, ArrayView2, ArrayViewMut2};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Positional {
    Rotary,
    Learned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    /// Width of the gated MLP. The default keeps the parameter count of a
    /// conventional 4x MLP while using three matrices instead of two.
    pub d_ff: usize,
    pub max_seq_len: usize,
    pub positional: Positional,
    pub rms_eps: f64,
    pub init_std: f64,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_size: 600,
            n_layers: 6,
            n_heads: 4,
            d_model: 128,
            d_ff: 512,
            max_seq_len: 64,
            positional: Positional::Rotary,
            rms_eps: 1e-5,
            init_std: 0.02,
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 3 {
            return Err(Error::Config("vocab_size must cover the specials".into()));
        }
        if self.n_layers == 0 || self.n_heads == 0 || self.d_model == 0 || self.d_ff == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.positional == Positional::Rotary && self.head_dim() % 2 != 0 {
            return Err(Error::Config(format!(
                "rotary positions need an even head dim, got {}",
                self.head_dim()
            )));
        }
        if self.max_seq_len == 0 {
            return Err(Error::Config("max_seq_len must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }
}

/// Named, ordered map from tensor names to segments of the flat parameter
/// vector. Order: embedding, learned positions (if any), blocks in depth
/// order, final norm, unembedding — so the final block through the
/// unembedding is one contiguous tail segment.
#[derive(Debug, Clone)]
pub struct Layout {
    pub specs: Vec<TensorSpec>,
    by_name: HashMap<String, usize>,
    pub total: usize,
}

impl Layout {
    pub fn build(config: &ModelConfig) -> Layout {
        let d = config.d_model;
        let mut specs: Vec<TensorSpec> = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, rows: usize, cols: usize, offset: &mut usize| {
            specs.push(TensorSpec { name, offset: *offset, rows, cols });
            *offset += rows * cols;
        };
        push("embed".into(), config.vocab_size, d, &mut offset);
        if config.positional == Positional::Learned {
            push("pos_embed".into(), config.max_seq_len, d, &mut offset);
        }
        for t in 0..config.n_layers {
            push(format!("layer{t}.norm1.g"), 1, d, &mut offset);
            for w in ["wq", "wk", "wv", "wo"] {
                push(format!("layer{t}.attn.{w}"), d, d, &mut offset);
            }
            push(format!("layer{t}.norm2.g"), 1, d, &mut offset);
            push(format!("layer{t}.mlp.wg"), d, config.d_ff, &mut offset);
            push(format!("layer{t}.mlp.wu"), d, config.d_ff, &mut offset);
            push(format!("layer{t}.mlp.wd"), config.d_ff, d, &mut offset);
        }
        push("final_norm.g".into(), 1, d, &mut offset);
        push("unembed".into(), d, config.vocab_size, &mut offset);
        let by_name = specs
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name.clone(), i))
            .collect();
        Layout { specs, by_name, total: offset }
    }

    pub fn spec(&self, name: &str) -> &TensorSpec {
        &self.specs[self.by_name[name]]
    }

    pub fn range(&self, name: &str) -> std::ops::Range<usize> {
        let s = self.spec(name);
        s.offset..s.offset + s.len()
    }

    /// Contiguous range covering the last block, the final norm, and the
    /// unembedding — the default parameter subset for gradient features.
    pub fn final_block_and_unembed_range(&self, config: &ModelConfig) -> std::ops::Range<usize> {
        let start = self.range(&format!("layer{}.norm1.g", config.n_layers - 1)).start;
        start..self.total
    }

    /// True for tensors that take decoupled weight decay (all matrices; the
    /// norm gains are exempt).
    pub fn decays(name: &str) -> bool {
        !name.ends_with(".g")
    }
}

pub fn view<'a, F: Scalar>(
    layout: &Layout,
    buf: &'a Array1<F>,
    name: &str,
) -> ArrayView2<'a, F> {
    let s = layout.spec(name);
    buf.slice(ndarray::s![s.offset..s.offset + s.len()])
        .into_shape_with_order((s.rows, s.cols))
        .expect("layout segments are contiguous")
}

pub fn view_mut<'a, F: Scalar>(
    layout: &Layout,
    buf: &'a mut Array1<F>,
    name: &str,
) -> ArrayViewMut2<'a, F> {
    let s = layout.spec(name);
    buf.slice_mut(ndarray::s![s.offset..s.offset + s.len()])
        .into_shape_with_order((s.rows, s.cols))
        .expect("layout segments are contiguous")
}

#[derive(Debug, Clone)]
pub struct Model<F: Scalar> {
    pub config: ModelConfig,
    pub layout: Layout,
    pub params: Array1<F>,
}

/// Closed-form parameter count for a config.
pub fn param_count(config: &ModelConfig) -> usize {
    let d = config.d_model;
    let per_layer = 2 * d + 4 * d * d + 3 * d * config.d_ff;
    let positional = match config.positional {
        Positional::Rotary => 0,
        Positional::Learned => config.max_seq_len * d,
    };
    2 * config.vocab_size * d + positional + config.n_layers * per_layer + d
}

impl<F: Scalar> Model<F> {
    /// Initialize parameters: scaled normals for all matrices, with the
    /// residual-writing projections shrunk by 1/sqrt(2 * n_layers); norm
    /// gains start at one. The draw sequence is fixed in f64 so the same
    /// seed yields the same weights at either precision.
    pub fn init(config: &ModelConfig) -> Result<Model<F>> {
        config.validate()?;
        let layout = Layout::build(config);
        let mut params = Array1::<F>::zeros(layout.total);
        let mut rng = rng_from(child_seed(config.init_seed, "model-init"));
        let base = Normal::new(0.0f64, config.init_std).map_err(|e| {
            Error::Config(format!("bad init distribution: {e}"))
        })?;
        let residual_scale = 1.0 / (2.0 * config.n_layers as f64).sqrt();
        for spec in &layout.specs {
            let mut seg = params.slice_mut(ndarray::s![spec.offset..spec.offset + spec.len()]);
            if spec.name.ends_with(".g") {
                seg.fill(F::one());
            } else {
                let scale = if spec.name.ends_with(".wo") || spec.name.ends_with(".wd") {
                    residual_scale
                } else {
                    1.0
                };
                for x in seg.iter_mut() {
                    *x = fl(base.sample(&mut rng) * scale);
                }
            }
        }
        Ok(Model { config: config.clone(), layout, params })
    }

    pub fn param_count(&self) -> usize {
        self.layout.total
    }

    pub fn tensor(&self, name: &str) -> ArrayView2<'_, F> {
        view(&self.layout, &self.params, name)
    }

    /// Convert the parameters to another precision (used by the gradient
    /// oracle, which re-runs the same model in f64).
    pub fn cast<G: Scalar>(&self) -> Model<G> {
        Model {
            config: self.config.clone(),
            layout: self.layout.clone(),
            params: self.params.mapv(|x| G::from_f64(x.to_f64())),
        }
    }
}
