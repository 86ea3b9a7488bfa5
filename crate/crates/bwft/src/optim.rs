//! Adam with bias correction.
//!
//! Moment accumulators are kept in f64 and the update is computed in f64
//! before the parameter is stored back to f32, so long traces stay within
//! tight tolerances of a scalar reference implementation.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct AdamParams {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            lr: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-tensor optimizer state: first/second moments and the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> AdamState {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update over a parameter tensor. Errors on non-finite gradients;
/// the step counter advances by exactly one.
pub fn adam_step(values: &mut [f32], grads: &[f32], state: &mut AdamState, cfg: &AdamParams) -> Result<()> {
    assert_eq!(values.len(), grads.len());
    assert_eq!(values.len(), state.m.len());

    state.t += 1;
    let b1 = cfg.beta1 as f64;
    let b2 = cfg.beta2 as f64;
    let lr = cfg.lr as f64;
    let eps = cfg.eps as f64;
    let bc1 = 1.0 - b1.powi(state.t as i32);
    let bc2 = 1.0 - b2.powi(state.t as i32);

    for ((w, &g), (m, v)) in values
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        if !g.is_finite() {
            return Err(Error::numeric("non-finite gradient in adam step"));
        }
        let g = g as f64;
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *w = (*w as f64 - lr * m_hat / (v_hat.sqrt() + eps)) as f32;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step_matches_hand_computation() {
        // m̂ = 0.5, v̂ = 0.25, so the step is lr · 0.5/0.5 = lr.
        let mut w = [1.0f32];
        let mut st = AdamState::new(1);
        adam_step(&mut w, &[0.5], &mut st, &AdamParams::default()).unwrap();
        assert!((w[0] - 0.99995).abs() < 1e-9, "w {}", w[0]);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn zero_gradient_leaves_weight_unchanged() {
        let mut w = [1.0f32];
        let mut st = AdamState::new(1);
        adam_step(&mut w, &[0.0], &mut st, &AdamParams::default()).unwrap();
        assert_eq!(w[0], 1.0);
    }

    #[test]
    fn two_constant_steps_match_scalar_oracle() {
        let mut w = [1.0f32];
        let mut st = AdamState::new(1);
        let cfg = AdamParams::default();
        adam_step(&mut w, &[0.5], &mut st, &cfg).unwrap();
        adam_step(&mut w, &[0.5], &mut st, &cfg).unwrap();

        // Scalar oracle, written out longhand.
        let (b1, b2, lr, eps) = (0.9f64, 0.999f64, 5e-5f64, 1e-8f64);
        let mut ow = 1.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * 0.5;
            v = b2 * v + (1.0 - b2) * 0.25;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            ow -= lr * mh / (vh.sqrt() + eps);
        }
        assert!((w[0] as f64 - ow).abs() < 1e-7, "impl {} oracle {}", w[0], ow);
        assert!((w[0] - 0.99990).abs() < 1e-6);
    }

    #[test]
    fn non_finite_grad_is_numeric_error() {
        let mut w = [1.0f32];
        let mut st = AdamState::new(1);
        assert!(adam_step(&mut w, &[f32::NAN], &mut st, &AdamParams::default()).is_err());
    }
}
