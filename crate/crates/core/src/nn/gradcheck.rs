//! Central finite-difference checks of analytic gradients.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::layers::{
    conv2d_apply, conv2d_backward, dense_apply, dense_backward, dropout_apply, dropout_backward,
    flatten_apply, maxpool2d_apply, maxpool2d_backward, relu_apply, relu_backward, softmax_apply,
    softmax_backward, unflatten, LayerParams,
};
use super::rng::Rng;
use super::tensor::Tensor;
use crate::error::Result;

pub const FD_STEP: f64 = 1e-5;

/// Below this magnitude the relative error is measured against the floor
/// instead, so vanishing gradients do not amplify finite-difference roundoff.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares `analytic` against central differences of `loss` at `params`.
///
/// `loss` receives the perturbed parameter vector. When `indices` is given
/// only those coordinates are perturbed.
pub fn grad_check(
    name: &str,
    mut loss: impl FnMut(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    indices: Option<&[usize]>,
    tolerance: f64,
) -> GradCheckReport {
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let all: Vec<usize>;
    let indices = match indices {
        Some(ix) => ix,
        None => {
            all = (0..params.len()).collect();
            &all
        }
    };
    let mut x = params.to_vec();
    let mut worst = (0.0f64, 0usize);
    for &i in indices {
        let orig = x[i];
        x[i] = orig + FD_STEP;
        let plus = loss(&x);
        x[i] = orig - FD_STEP;
        let minus = loss(&x);
        x[i] = orig;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let err = relative_error(analytic[i], numeric);
        if err > worst.0 || !err.is_finite() {
            worst = (err, i);
        }
    }
    GradCheckReport {
        name: name.to_string(),
        checked: indices.len(),
        max_rel_error: worst.0,
        worst_index: worst.1,
        tolerance,
        passed: worst.0.is_finite() && worst.0 < tolerance,
    }
}

/// Up to `count` distinct coordinates out of `len`, sorted.
pub fn sample_indices(len: usize, count: usize, rng: &mut Rng) -> Vec<usize> {
    if count >= len {
        return (0..len).collect();
    }
    let mut picked = rand::seq::index::sample(rng, len, count).into_vec();
    picked.sort_unstable();
    picked
}

fn random_tensor(shape: &[usize], rng: &mut Rng) -> Tensor<f64> {
    let mut t = Tensor::zeros(shape).expect("valid shape");
    for v in t.data_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    t
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

type ParamBackward =
    fn(&Tensor<f64>, &LayerParams<f64>, &Tensor<f64>) -> Result<(Tensor<f64>, LayerParams<f64>)>;

/// Checks a layer `y = f(x, params)` through the scalar `L = <r, y>` for a
/// random projection `r`. The checked vector is `[x, weights, bias]`.
fn check_parametric(
    name: &str,
    x: &Tensor<f64>,
    p: &LayerParams<f64>,
    apply: fn(&Tensor<f64>, &LayerParams<f64>) -> Result<Tensor<f64>>,
    backward: ParamBackward,
    tolerance: f64,
    rng: &mut Rng,
) -> Result<GradCheckReport> {
    let y = apply(x, p)?;
    let r = random_tensor(y.shape(), rng);
    let (gx, gp) = backward(x, p, &r)?;
    let (nx, nw) = (x.len(), p.weights.len());
    let flat: Vec<f64> = [x.data(), p.weights.data(), p.bias.data()].concat();
    let analytic: Vec<f64> = [gx.data(), gp.weights.data(), gp.bias.data()].concat();
    let loss = |v: &[f64]| {
        let xx = Tensor::from_vec(x.shape(), v[..nx].to_vec()).unwrap();
        let pp = LayerParams {
            kind: p.kind,
            weights: Tensor::from_vec(p.weights.shape(), v[nx..nx + nw].to_vec()).unwrap(),
            bias: Tensor::from_vec(p.bias.shape(), v[nx + nw..].to_vec()).unwrap(),
        };
        dot(apply(&xx, &pp).unwrap().data(), r.data())
    };
    Ok(grad_check(name, loss, &flat, &analytic, None, tolerance))
}

fn check_elementwise(
    name: &str,
    x: &Tensor<f64>,
    apply: impl Fn(&Tensor<f64>) -> Tensor<f64>,
    backward: impl Fn(&Tensor<f64>, &Tensor<f64>) -> Tensor<f64>,
    tolerance: f64,
    rng: &mut Rng,
) -> GradCheckReport {
    let y = apply(x);
    let r = random_tensor(y.shape(), rng);
    let gx = backward(x, &r);
    let loss = |v: &[f64]| {
        let xx = Tensor::from_vec(x.shape(), v.to_vec()).unwrap();
        dot(apply(&xx).data(), r.data())
    };
    grad_check(name, loss, x.data(), gx.data(), None, tolerance)
}

pub fn check_dense(inputs: usize, outputs: usize, tolerance: f64, rng: &mut Rng) -> Result<GradCheckReport> {
    let x = random_tensor(&[inputs], rng);
    let mut p = LayerParams::init_dense(inputs, outputs, rng)?;
    p.bias = random_tensor(&[outputs], rng);
    check_parametric("dense", &x, &p, dense_apply, dense_backward, tolerance, rng)
}

pub fn check_conv2d(
    input: [usize; 3],
    filters: usize,
    tolerance: f64,
    rng: &mut Rng,
) -> Result<GradCheckReport> {
    let x = random_tensor(&input, rng);
    let mut p = LayerParams::init_conv2d((3, 3), input[2], filters, rng)?;
    p.bias = random_tensor(&[filters], rng);
    check_parametric("conv2d", &x, &p, conv2d_apply, conv2d_backward, tolerance, rng)
}

pub fn check_maxpool2d(tolerance: f64, rng: &mut Rng) -> GradCheckReport {
    let x = random_tensor(&[6, 6, 3], rng);
    check_elementwise(
        "maxpool2d",
        &x,
        |x| maxpool2d_apply(x).unwrap().0,
        |x, g| maxpool2d_backward(&maxpool2d_apply(x).unwrap().1, g).unwrap(),
        tolerance,
        rng,
    )
}

pub fn check_relu(tolerance: f64, rng: &mut Rng) -> GradCheckReport {
    let x = random_tensor(&[50], rng);
    check_elementwise("relu", &x, relu_apply, relu_backward, tolerance, rng)
}

pub fn check_softmax(tolerance: f64, rng: &mut Rng) -> GradCheckReport {
    let x = random_tensor(&[5], rng);
    check_elementwise(
        "softmax",
        &x,
        softmax_apply,
        |x, g| softmax_backward(&softmax_apply(x), g),
        tolerance,
        rng,
    )
}

/// Dropout with a frozen mask is linear; the check confirms the backward
/// applies the same mask.
pub fn check_dropout(tolerance: f64, rng: &mut Rng) -> GradCheckReport {
    let x = random_tensor(&[40], rng);
    let (_, mask) = dropout_apply(&x, 0.1, true, Some(rng)).unwrap();
    let mask = mask.expect("training dropout yields a mask");
    let apply = |x: &Tensor<f64>| Tensor::vector(x.data().iter().zip(&mask).map(|(a, m)| a * m).collect());
    check_elementwise(
        "dropout",
        &x,
        apply,
        |_, g| dropout_backward(Some(&mask), g),
        tolerance,
        rng,
    )
}

pub fn check_flatten(tolerance: f64, rng: &mut Rng) -> GradCheckReport {
    let x = random_tensor(&[3, 2, 4], rng);
    check_elementwise(
        "flatten",
        &x,
        |x| flatten_apply(x.clone()),
        |x, g| unflatten(g.clone(), x.shape()).unwrap(),
        tolerance,
        rng,
    )
}

/// Every layer kernel at the given tolerance.
pub fn check_all_layers(tolerance: f64, seed: u64) -> Result<Vec<GradCheckReport>> {
    let mut rng = Rng::new(seed);
    Ok(vec![
        check_dense(4, 3, tolerance, &mut rng)?,
        check_conv2d([6, 6, 2], 3, tolerance, &mut rng)?,
        check_maxpool2d(tolerance, &mut rng),
        check_relu(tolerance, &mut rng),
        check_softmax(tolerance, &mut rng),
        check_dropout(tolerance, &mut rng),
        check_flatten(tolerance, &mut rng),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_4_to_3() {
        let r = check_dense(4, 3, 1e-6, &mut Rng::new(1)).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn conv2d_6x6x2() {
        let r = check_conv2d([6, 6, 2], 3, 1e-6, &mut Rng::new(2)).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn all_layers() {
        for r in check_all_layers(1e-4, 9).unwrap() {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let f = |v: &[f64]| v[0] * v[0];
        let r = grad_check("square", f, &[3.0], &[5.0], None, 1e-4);
        assert!(!r.passed);
        assert!((r.max_rel_error - 1.0 / 6.0).abs() < 1e-6);
    }
}
