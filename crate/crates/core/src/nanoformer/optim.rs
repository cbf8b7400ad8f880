//! Adam with decoupled weight decay and a warmup-plus-cosine step-size
//! schedule. Moments live in flat buffers aligned with the parameter layout;
//! norm gains are exempt from decay via a 0/1 mask built from tensor names.

use super::Layout;
use crate::num::{fl, Scalar};
use ndarray::Array1;

/// Linear warmup to `base_lr`, then cosine decay to `base_lr * min_frac`.
pub fn lr_at_step(
    step: usize,
    total_steps: usize,
    base_lr: f64,
    warmup_steps: usize,
    min_frac: f64,
) -> f64 {
    if warmup_steps > 0 && step < warmup_steps {
        return base_lr * (step + 1) as f64 / warmup_steps as f64;
    }
    let floor = base_lr * min_frac;
    if total_steps <= warmup_steps {
        return base_lr;
    }
    let t = (step - warmup_steps) as f64 / (total_steps - warmup_steps) as f64;
    let t = t.clamp(0.0, 1.0);
    floor + 0.5 * (1.0 + (std::f64::consts::PI * t).cos()) * (base_lr - floor)
}

#[derive(Debug, Clone)]
pub struct AdamW<F: Scalar> {
    pub m: Array1<F>,
    pub v: Array1<F>,
    pub steps_done: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    decay_mask: Array1<F>,
}

impl<F: Scalar> AdamW<F> {
    pub fn new(layout: &Layout, beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> AdamW<F> {
        let mut decay_mask = Array1::<F>::zeros(layout.total);
        for spec in &layout.specs {
            if Layout::decays(&spec.name) {
                decay_mask
                    .slice_mut(ndarray::s![spec.offset..spec.offset + spec.len()])
                    .fill(F::one());
            }
        }
        AdamW {
            m: Array1::zeros(layout.total),
            v: Array1::zeros(layout.total),
            steps_done: 0,
            beta1,
            beta2,
            eps,
            weight_decay,
            decay_mask,
        }
    }

    pub fn update(&mut self, params: &mut Array1<F>, grads: &Array1<F>, lr: f64) {
        self.steps_done += 1;
        let b1 = fl::<F>(self.beta1);
        let b2 = fl::<F>(self.beta2);
        let one_minus_b1 = fl::<F>(1.0 - self.beta1);
        let one_minus_b2 = fl::<F>(1.0 - self.beta2);
        let correction1 = fl::<F>(1.0 / (1.0 - self.beta1.powi(self.steps_done as i32)));
        let correction2 = fl::<F>(1.0 / (1.0 - self.beta2.powi(self.steps_done as i32)));
        let eps = fl::<F>(self.eps);
        let lr_f = fl::<F>(lr);
        let decay = fl::<F>(lr * self.weight_decay);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + one_minus_b1 * g;
            self.v[i] = b2 * self.v[i] + one_minus_b2 * g * g;
            let m_hat = self.m[i] * correction1;
            let v_hat = self.v[i] * correction2;
            params[i] = params[i]
                - lr_f * m_hat / (v_hat.sqrt() + eps)
                - decay * self.decay_mask[i] * params[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nanoformer::ModelConfig;

    #[test]
    fn schedule_warms_up_then_decays_to_the_floor() {
        let (total, lr, warmup, frac) = (1000, 3e-4, 100, 0.1);
        assert!((lr_at_step(0, total, lr, warmup, frac) - lr / 100.0).abs() < 1e-12);
        assert!((lr_at_step(99, total, lr, warmup, frac) - lr).abs() < 1e-12);
        let end = lr_at_step(1000, total, lr, warmup, frac);
        assert!((end - lr * frac).abs() < 1e-12);
        // Monotone non-increasing after warmup.
        let mut prev = f64::INFINITY;
        for step in 100..=1000 {
            let v = lr_at_step(step, total, lr, warmup, frac);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn adamw_minimizes_a_quadratic() {
        let config = ModelConfig {
            vocab_size: 3,
            n_layers: 1,
            n_heads: 1,
            d_model: 2,
            d_ff: 2,
            ..ModelConfig::default()
        };
        let layout = Layout::build(&config);
        let mut params = Array1::<f64>::zeros(layout.total);
        let mut opt = AdamW::<f64>::new(&layout, 0.9, 0.95, 1e-8, 0.0);
        // Minimize sum_i (p_i - 3)^2 by gradient descent.
        for _ in 0..2000 {
            let grads = params.mapv(|p| 2.0 * (p - 3.0));
            opt.update(&mut params, &grads, 0.01);
        }
        for &p in params.iter() {
            assert!((p - 3.0).abs() < 1e-3, "param {p}");
        }
    }

    #[test]
    fn first_update_has_unit_adaptive_magnitude() {
        let config = ModelConfig {
            vocab_size: 3,
            n_layers: 1,
            n_heads: 1,
            d_model: 2,
            d_ff: 2,
            ..ModelConfig::default()
        };
        let layout = Layout::build(&config);
        let mut params = Array1::<f64>::zeros(layout.total);
        let mut opt = AdamW::<f64>::new(&layout, 0.9, 0.95, 1e-12, 0.0);
        let grads = Array1::<f64>::from_elem(layout.total, 0.5);
        opt.update(&mut params, &grads, 0.01);
        for &p in params.iter() {
            // m_hat / sqrt(v_hat) = g/|g| on the first step.
            assert!((p + 0.01).abs() < 1e-6, "param {p}");
        }
    }

    #[test]
    fn weight_decay_spares_norm_gains() {
        let config = ModelConfig {
            vocab_size: 3,
            n_layers: 1,
            n_heads: 1,
            d_model: 2,
            d_ff: 2,
            ..ModelConfig::default()
        };
        let layout = Layout::build(&config);
        let mut params = Array1::<f64>::from_elem(layout.total, 1.0);
        let mut opt = AdamW::<f64>::new(&layout, 0.9, 0.95, 1e-8, 0.1);
        let grads = Array1::<f64>::zeros(layout.total);
        opt.update(&mut params, &grads, 0.01);
        for spec in &layout.specs {
            let expected = if Layout::decays(&spec.name) { 1.0 - 0.01 * 0.1 } else { 1.0 };
            for i in spec.offset..spec.offset + spec.len() {
                assert!((params[i] - expected).abs() < 1e-12, "{} at {i}", spec.name);
            }
        }
    }
}
