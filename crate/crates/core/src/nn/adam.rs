use serde::{Deserialize, Serialize};

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Adam hyperparameters. Defaults are the Keras ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first_moment: Vec<Tensor<T>>,
    pub second_moment: Vec<Tensor<T>>,
    pub step_count: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor<T>>) -> Self {
        let first_moment: Vec<Tensor<T>> = params
            .into_iter()
            .map(|p| Tensor::zeros(p.shape()).expect("parameter shapes are valid"))
            .collect();
        AdamState {
            second_moment: first_moment.clone(),
            first_moment,
            step_count: 0,
        }
    }
}

/// One bias-corrected Adam update over `params`, in place.
///
/// A non-finite gradient aborts the step before anything is modified.
pub fn adam_step<T: Real>(
    params: &mut [&mut Tensor<T>],
    grads: &[&Tensor<T>],
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::shape(
            "adam parameter list",
            &[state.first_moment.len(), params.len()],
            &[grads.len()],
        ));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.first_moment[i].shape() {
            return Err(Error::shape("adam tensor", p.shape(), g.shape()));
        }
        if let Some(pos) = g.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!(
                "non-finite gradient in tensor {i} at element {pos} (step {})",
                state.step_count + 1
            )));
        }
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let b1 = T::cast(cfg.beta1);
    let b2 = T::cast(cfg.beta2);
    let one = T::one();
    let correction1 = T::cast(1.0 - cfg.beta1.powi(t));
    let correction2 = T::cast(1.0 - cfg.beta2.powi(t));
    let lr = T::cast(cfg.lr);
    let eps = T::cast(cfg.eps);

    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut().zip(state.second_moment.iter_mut()))
    {
        for (((pi, &gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = b1 * *mi + (one - b1) * gi;
            *vi = b2 * *vi + (one - b2) * gi * gi;
            let m_hat = *mi / correction1;
            let v_hat = *vi / correction2;
            *pi -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Tensor::vector(vec![0.3f64, -1.2]);
        let g = Tensor::vector(vec![0.0f64, 0.0]);
        let mut st = AdamState::new([&p]);
        for _ in 0..5 {
            adam_step(&mut [&mut p], &[&g], &mut st, &AdamConfig::default()).unwrap();
        }
        assert_eq!(p.data(), &[0.3, -1.2]);
        assert_eq!(st.step_count, 5);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Tensor::vector(vec![1.0f64]);
        let g = Tensor::vector(vec![1.0f64]);
        let mut st = AdamState::new([&p]);
        let cfg = AdamConfig::default();
        adam_step(&mut [&mut p], &[&g], &mut st, &cfg).unwrap();
        let expected = 1.0 - 0.001 / (1.0 + 1e-7);
        assert!((p.data()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn identical_params_stay_identical() {
        let mut p = Tensor::vector(vec![0.5f64, 0.5]);
        let mut st = AdamState::new([&p]);
        for k in 0..50 {
            let g = Tensor::vector(vec![(k as f64).sin(); 2]);
            adam_step(&mut [&mut p], &[&g], &mut st, &AdamConfig::default()).unwrap();
            assert_eq!(p.data()[0], p.data()[1]);
        }
    }

    #[test]
    fn nan_gradient_aborts_untouched() {
        let mut p = Tensor::vector(vec![1.0f64]);
        let mut st = AdamState::new([&p]);
        let g = Tensor::vector(vec![f64::NAN]);
        let err = adam_step(&mut [&mut p], &[&g], &mut st, &AdamConfig::default());
        assert!(matches!(err, Err(Error::Divergence(_))));
        assert_eq!(st.step_count, 0);
        assert_eq!(p.data(), &[1.0]);
    }
}
