#![allow(dead_code)]

use rand::Rng as _;
use sensecomm::nn::{LayerParams, Rng, Tensor};

/// Direct double loop: `y[o] = b[o] + sum_i x[i] * w[i][o]`.
pub fn dense_oracle(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let (n_in, n_out) = (x.len(), b.len());
    let mut y = vec![0.0; n_out];
    for o in 0..n_out {
        let mut acc = b[o];
        for i in 0..n_in {
            acc += x[i] * w[i * n_out + o];
        }
        y[o] = acc;
    }
    y
}

/// Valid cross-correlation over an HWC image with `[kh, kw, cin, f]` weights.
pub fn conv_oracle(
    x: &[f64],
    (h, w, c): (usize, usize, usize),
    k: &[f64],
    (kh, kw, f): (usize, usize, usize),
    b: &[f64],
) -> Vec<f64> {
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let mut y = vec![0.0; oh * ow * f];
    for oy in 0..oh {
        for ox in 0..ow {
            for fi in 0..f {
                let mut acc = b[fi];
                for dy in 0..kh {
                    for dx in 0..kw {
                        for ci in 0..c {
                            acc +=
                                x[((oy + dy) * w + ox + dx) * c + ci] * k[((dy * kw + dx) * c + ci) * f + fi];
                        }
                    }
                }
                y[(oy * ow + ox) * f + fi] = acc;
            }
        }
    }
    y
}

pub fn uniform(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_dense(n_in: usize, n_out: usize, rng: &mut Rng) -> (Tensor<f64>, LayerParams<f64>) {
    let x = Tensor::vector(uniform(n_in, rng));
    let p = LayerParams::dense(
        Tensor::from_vec(&[n_in, n_out], uniform(n_in * n_out, rng)).unwrap(),
        Tensor::vector(uniform(n_out, rng)),
    )
    .unwrap();
    (x, p)
}

pub fn random_conv(
    (h, w, c): (usize, usize, usize),
    (kh, kw, f): (usize, usize, usize),
    rng: &mut Rng,
) -> (Tensor<f64>, LayerParams<f64>) {
    let x = Tensor::from_vec(&[h, w, c], uniform(h * w * c, rng)).unwrap();
    let p = LayerParams::conv2d(
        Tensor::from_vec(&[kh, kw, c, f], uniform(kh * kw * c * f, rng)).unwrap(),
        Tensor::vector(uniform(f, rng)),
    )
    .unwrap();
    (x, p)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Adam at step `t` written out from the update rule, for one scalar.
/// Returns the new `(param, m, v)`.
pub fn adam_scalar(
    p: f64,
    g: f64,
    m: f64,
    v: f64,
    t: i32,
    (lr, b1, b2, eps): (f64, f64, f64, f64),
) -> (f64, f64, f64) {
    let m = b1 * m + (1.0 - b1) * g;
    let v = b2 * v + (1.0 - b2) * g * g;
    let m_hat = m / (1.0 - b1.powi(t));
    let v_hat = v / (1.0 - b2.powi(t));
    (p - lr * m_hat / (v_hat.sqrt() + eps), m, v)
}
