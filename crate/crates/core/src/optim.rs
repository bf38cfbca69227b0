//! AdamW with decoupled weight decay.
//!
//! Decay is applied to the pre-update parameters, separate from the adaptive
//! step: `θ ← θ − η·m̂/(√v̂+ε) − η·λ·θ`. No gradient clipping. By default
//! decay covers every tensor including biases and embeddings; a mask can
//! exclude the single-row tensors.

use crate::math;
use crate::matrix::Matrix;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-8,
            weight_decay: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptimError {
    NonFiniteGradient { tensor_index: usize },
    TensorCountMismatch { params: usize, grads: usize },
    ShapeMismatch { tensor_index: usize },
}

impl fmt::Display for OptimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptimError::NonFiniteGradient { tensor_index } => {
                write!(f, "non-finite gradient in tensor {tensor_index}")
            }
            OptimError::TensorCountMismatch { params, grads } => {
                write!(f, "{params} parameter tensors vs {grads} gradients")
            }
            OptimError::ShapeMismatch { tensor_index } => {
                write!(f, "gradient shape mismatch at tensor {tensor_index}")
            }
        }
    }
}

impl core::error::Error for OptimError {}

/// Per-tensor first/second moments plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    pub config: AdamWConfig,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    pub t: u64,
    /// `decay_mask[i] == false` exempts tensor `i` from weight decay.
    pub decay_mask: Vec<bool>,
}

impl AdamWState {
    pub fn new(param_shapes: &[(usize, usize)], config: AdamWConfig) -> Self {
        let m = param_shapes
            .iter()
            .map(|&(r, c)| Matrix::zeros(r, c))
            .collect::<Vec<_>>();
        let v = m.clone();
        let decay_mask = alloc::vec![true; param_shapes.len()];
        AdamWState {
            config,
            m,
            v,
            t: 0,
            decay_mask,
        }
    }

    pub fn moments(&self) -> (&[Matrix], &[Matrix]) {
        (&self.m, &self.v)
    }

    /// Rebuilds state from checkpointed moments.
    pub fn from_parts(config: AdamWConfig, m: Vec<Matrix>, v: Vec<Matrix>, t: u64, decay_mask: Vec<bool>) -> Self {
        AdamWState {
            config,
            m,
            v,
            t,
            decay_mask,
        }
    }

    /// One optimizer step over all tensors.
    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[&Matrix]) -> Result<(), OptimError> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(OptimError::TensorCountMismatch {
                params: params.len(),
                grads: grads.len(),
            });
        }
        for (i, g) in grads.iter().enumerate() {
            if g.shape() != params[i].shape() {
                return Err(OptimError::ShapeMismatch { tensor_index: i });
            }
            if !g.is_finite() {
                return Err(OptimError::NonFiniteGradient { tensor_index: i });
            }
        }
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - math::powf(c.beta1, self.t as f64);
        let bc2 = 1.0 - math::powf(c.beta2, self.t as f64);
        for (i, p) in params.iter_mut().enumerate() {
            let decay = if self.decay_mask[i] { c.lr * c.weight_decay } else { 0.0 };
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let g = grads[i].data();
            for ((pe, me), (ve, ge)) in p
                .data_mut()
                .iter_mut()
                .zip(m.iter_mut())
                .zip(v.iter_mut().zip(g.iter()))
            {
                *me = c.beta1 * *me + (1.0 - c.beta1) * ge;
                *ve = c.beta2 * *ve + (1.0 - c.beta2) * ge * ge;
                let mhat = *me / bc1;
                let vhat = *ve / bc2;
                let old = *pe;
                *pe = old - c.lr * mhat / (math::sqrt(vhat) + c.eps) - decay * old;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> Matrix {
        Matrix::from_vec(1, 1, alloc::vec![x]).unwrap()
    }

    #[test]
    fn zero_gradient_applies_pure_decay() {
        let mut p = Matrix::from_fn(2, 3, |i, j| (i * 3 + j) as f64 + 1.0);
        let expected = p.scale(0.999);
        let g = Matrix::zeros(2, 3);
        let mut st = AdamWState::new(&[(2, 3)], AdamWConfig::default());
        st.step(&mut [&mut p], &[&g]).unwrap();
        assert_eq!(p, expected, "λ=1, η=1e-3 ⇒ every entry × 0.999 exactly");
    }

    #[test]
    fn first_step_magnitude_is_lr_over_one_plus_eps() {
        let mut p = scalar(0.0);
        let g = scalar(1.0);
        let mut st = AdamWState::new(&[(1, 1)], AdamWConfig::default());
        st.step(&mut [&mut p], &[&g]).unwrap();
        // m̂ = 1, v̂ = 1 after bias correction, so the step is η/(1+ε).
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((p.get(0, 0) - expected).abs() < 1e-18, "{}", p.get(0, 0));
    }

    #[test]
    fn bias_correction_first_step_recovers_gradient() {
        let g = 0.37;
        let cfg = AdamWConfig::default();
        let mut st = AdamWState::new(&[(1, 1)], cfg);
        let mut p = scalar(5.0);
        let gm = scalar(g);
        st.step(&mut [&mut p], &[&gm]).unwrap();
        let (m, _) = st.moments();
        let mhat = m[0].get(0, 0) / (1.0 - cfg.beta1);
        assert!((mhat - g).abs() < 1e-15, "m̂ after one step must equal g");
    }

    #[test]
    fn lambda_zero_matches_manual_three_step_trace() {
        // Hand-rolled Adam trace (no decay), θ0 = 1, grads 1.0, -0.5, 0.25.
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..AdamWConfig::default()
        };
        let (b1, b2, lr, eps) = (cfg.beta1, cfg.beta2, cfg.lr, cfg.eps);
        let grads = [1.0, -0.5, 0.25];
        let (mut m, mut v, mut theta) = (0.0f64, 0.0f64, 1.0f64);
        for (step, &g) in grads.iter().enumerate() {
            let t = (step + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mhat = m / (1.0 - b1.powi(t));
            let vhat = v / (1.0 - b2.powi(t));
            theta -= lr * mhat / (vhat.sqrt() + eps);
        }

        let mut p = scalar(1.0);
        let mut st = AdamWState::new(&[(1, 1)], cfg);
        for &g in &grads {
            let gm = scalar(g);
            st.step(&mut [&mut p], &[&gm]).unwrap();
        }
        assert!(
            (p.get(0, 0) - theta).abs() < 1e-15,
            "optimizer {} vs manual {theta}",
            p.get(0, 0)
        );
    }

    #[test]
    fn decay_mask_exempts_biases() {
        let cfg = AdamWConfig::default();
        let mut st = AdamWState::new(&[(1, 2), (2, 2)], cfg);
        st.decay_mask = alloc::vec![false, true];
        let mut bias = Matrix::filled(1, 2, 4.0);
        let mut w = Matrix::filled(2, 2, 4.0);
        let gb = Matrix::zeros(1, 2);
        let gw = Matrix::zeros(2, 2);
        st.step(&mut [&mut bias, &mut w], &[&gb, &gw]).unwrap();
        assert_eq!(bias.get(0, 0), 4.0, "masked tensor must not decay");
        assert_eq!(w.get(0, 0), 4.0 * 0.999);
    }

    #[test]
    fn norm_decays_geometrically_under_zero_gradients() {
        let cfg = AdamWConfig::default();
        let ratio = 1.0 - cfg.lr * cfg.weight_decay;
        let mut p = Matrix::from_fn(3, 3, |i, j| (i + 2 * j) as f64 - 2.0);
        let g = Matrix::zeros(3, 3);
        let mut st = AdamWState::new(&[(3, 3)], cfg);
        let mut prev = p.frobenius_norm();
        for _ in 0..100 {
            st.step(&mut [&mut p], &[&g]).unwrap();
            let now = p.frobenius_norm();
            assert!(((now / prev) - ratio).abs() < 1e-12);
            prev = now;
        }
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut p = scalar(1.0);
        let g = scalar(f64::NAN);
        let mut st = AdamWState::new(&[(1, 1)], AdamWConfig::default());
        assert!(matches!(
            st.step(&mut [&mut p], &[&g]),
            Err(OptimError::NonFiniteGradient { tensor_index: 0 })
        ));
        assert_eq!(st.t, 0, "failed step must not advance the counter");
    }
}
