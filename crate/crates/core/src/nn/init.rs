use rand::Rng as _;

use super::rng::Rng;
use super::tensor::{Real, Tensor};
use crate::error::Result;

/// Fan-in and fan-out under the usual convention: the last axis is the
/// output axis, the second to last the input axis, and any leading axes form
/// the receptive field.
fn fans(shape: &[usize]) -> (usize, usize) {
    match shape {
        [n] => (*n, *n),
        [fan_in, fan_out] => (*fan_in, *fan_out),
        _ => {
            let receptive: usize = shape[..shape.len() - 2].iter().product();
            let cin = shape[shape.len() - 2];
            let cout = shape[shape.len() - 1];
            (receptive * cin, receptive * cout)
        }
    }
}

/// Glorot (Xavier) uniform initialization on `[-L, L]` with
/// `L = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_init<T: Real>(shape: &[usize], rng: &mut Rng) -> Result<Tensor<T>> {
    let mut t = Tensor::zeros(shape)?;
    let (fan_in, fan_out) = fans(shape);
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in t.data_mut() {
        let u: f64 = rng.random();
        *v = T::cast((2.0 * u - 1.0) * limit);
    }
    Ok(t)
}

pub fn glorot_limit(shape: &[usize]) -> f64 {
    let (fan_in, fan_out) = fans(shape);
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Biases start at zero.
pub fn zero_bias<T: Real>(len: usize) -> Result<Tensor<T>> {
    Tensor::zeros(&[len])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn single_weight_within_sqrt3() {
        for seed in 0..50 {
            let t: Tensor<f64> = glorot_init(&[1, 1], &mut Rng::new(seed)).unwrap();
            assert!(t.data()[0].abs() <= 3f64.sqrt());
        }
    }

    #[test]
    fn dense_20_by_2_bound() {
        let bound = (6.0f64 / 22.0).sqrt();
        assert!((bound - 0.522).abs() < 1e-3);
        let t: Tensor<f64> = glorot_init(&[20, 2], &mut Rng::new(3)).unwrap();
        assert_eq!(t.len(), 40);
        assert!(t.data().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn conv_fans_use_receptive_field() {
        assert_eq!(fans(&[3, 3, 3, 8]), (27, 72));
        assert!((glorot_limit(&[3, 3, 3, 8]) - (6.0f64 / 99.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bias_is_zero() {
        let b: Tensor<f32> = zero_bias(8).unwrap();
        assert!(b.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_dim_rejected() {
        let r: Result<Tensor<f64>> = glorot_init(&[0, 4], &mut Rng::new(0));
        assert!(matches!(r, Err(Error::InvalidShape { .. })));
    }
}
