use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Clamp inside the logarithm so a saturated softmax gives a finite loss.
pub const LOG_EPS: f64 = 1e-12;

fn check_onehot<T: Real>(onehot: &Tensor<T>, classes: usize) -> Result<usize> {
    if onehot.len() != classes {
        return Err(Error::Label(format!(
            "one-hot has {} entries, expected {classes}",
            onehot.len()
        )));
    }
    let ones: Vec<usize> = onehot
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == T::one())
        .map(|(i, _)| i)
        .collect();
    let zeros = onehot.data().iter().filter(|&&v| v == T::zero()).count();
    match ones.as_slice() {
        [k] if zeros == classes - 1 => Ok(*k),
        _ => Err(Error::Label(format!("malformed one-hot {:?}", onehot.data()))),
    }
}

pub fn onehot<T: Real>(class: usize, classes: usize) -> Tensor<T> {
    let mut v = vec![T::zero(); classes];
    v[class] = T::one();
    Tensor::vector(v)
}

/// Categorical cross-entropy `-sum_k onehot_k * ln(probs_k + eps)`.
pub fn cross_entropy<T: Real>(probs: &Tensor<T>, onehot: &Tensor<T>) -> Result<f64> {
    let k = check_onehot(onehot, probs.len())?;
    Ok(-(probs.data()[k].as_f64() + LOG_EPS).ln())
}

/// Gradient of the cross-entropy with respect to the pre-softmax logits.
pub fn cross_entropy_logit_grad<T: Real>(probs: &Tensor<T>, onehot: &Tensor<T>) -> Result<Tensor<T>> {
    check_onehot(onehot, probs.len())?;
    Ok(Tensor::vector(
        probs
            .data()
            .iter()
            .zip(onehot.data())
            .map(|(&p, &y)| p - y)
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(data: &[f64]) -> Tensor<f64> {
        Tensor::vector(data.to_vec())
    }

    #[test]
    fn perfect_prediction_is_zero() {
        let l = cross_entropy(&v(&[1.0, 0.0]), &v(&[1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(l, 0.0, epsilon = 1e-11);
    }

    #[test]
    fn uniform_is_ln2() {
        let l = cross_entropy(&v(&[0.5, 0.5]), &v(&[0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(l, std::f64::consts::LN_2, epsilon = 1e-11);
    }

    #[test]
    fn saturated_is_finite() {
        let l = cross_entropy(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(l, -LOG_EPS.ln(), epsilon = 1e-9);
    }

    #[test]
    fn logit_gradient() {
        let g = cross_entropy_logit_grad(&v(&[0.8, 0.2]), &v(&[0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(g.data()[0], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(g.data()[1], -0.8, epsilon = 1e-15);
    }

    #[test]
    fn malformed_onehot() {
        for bad in [[1.0, 1.0], [0.0, 0.0], [0.5, 0.5]] {
            assert!(matches!(
                cross_entropy(&v(&[0.5, 0.5]), &v(&bad)),
                Err(Error::Label(_))
            ));
        }
    }
}
