//! Forward and backward kernels for the layer set the encoders and the
//! decoder are built from.
//!
//! Image tensors are `[height, width, channels]`. Dense weights are
//! `[in, out]`; conv2d weights are `[kh, kw, in_channels, filters]`. Every
//! backward kernel *accumulates* parameter gradients into the buffers it is
//! given, so a batch can be summed sample by sample.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::init::{glorot_init, zero_bias};
use super::rng::Rng;
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Dense,
    Conv2d,
}

/// Trainable weights and bias of one dense or conv2d layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub kind: ParamKind,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> LayerParams<T> {
    pub fn dense(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        match weights.shape() {
            [_, out] => bias.require_shape("dense bias", &[*out])?,
            other => return Err(Error::shape("dense weights", &[0, 0], other)),
        }
        Ok(LayerParams {
            kind: ParamKind::Dense,
            weights,
            bias,
        })
    }

    pub fn conv2d(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        match weights.shape() {
            [_, _, _, filters] => bias.require_shape("conv2d bias", &[*filters])?,
            other => return Err(Error::shape("conv2d weights", &[0, 0, 0, 0], other)),
        }
        Ok(LayerParams {
            kind: ParamKind::Conv2d,
            weights,
            bias,
        })
    }

    /// Glorot-initialized dense layer with zero bias.
    pub fn init_dense(inputs: usize, outputs: usize, rng: &mut Rng) -> Result<Self> {
        Self::dense(glorot_init(&[inputs, outputs], rng)?, zero_bias(outputs)?)
    }

    /// Glorot-initialized conv2d layer with zero bias.
    pub fn init_conv2d(
        kernel: (usize, usize),
        in_channels: usize,
        filters: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        Self::conv2d(
            glorot_init(&[kernel.0, kernel.1, in_channels, filters], rng)?,
            zero_bias(filters)?,
        )
    }

    /// Zero tensors of the same shapes, used as gradient accumulators.
    pub fn zeros_like(&self) -> Self {
        LayerParams {
            kind: self.kind,
            weights: Tensor::zeros(self.weights.shape()).expect("shape already validated"),
            bias: Tensor::zeros(self.bias.shape()).expect("shape already validated"),
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

fn hwc(op: &'static str, x: &Tensor<impl Real>) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [h, w, c] => Ok((h, w, c)),
        ref other => Err(Error::shape(op, &[0, 0, 0], other)),
    }
}

// ---------------------------------------------------------------- dense

pub fn dense_apply<T: Real>(x: &Tensor<T>, p: &LayerParams<T>) -> Result<Tensor<T>> {
    let (inputs, outputs) = (p.weights.shape()[0], p.weights.shape()[1]);
    x.require_shape("dense input", &[inputs])?;
    let w = p.weights.data();
    let mut y = p.bias.data().to_vec();
    for (i, &xi) in x.data().iter().enumerate() {
        if xi == T::zero() {
            continue;
        }
        let row = &w[i * outputs..(i + 1) * outputs];
        for (yj, &wij) in y.iter_mut().zip(row) {
            *yj += xi * wij;
        }
    }
    Ok(Tensor::vector(y))
}

/// Accumulates `dL/dW` and `dL/db` into `grads` and returns `dL/dx`.
pub fn dense_backward_into<T: Real>(
    x: &Tensor<T>,
    p: &LayerParams<T>,
    grad_out: &Tensor<T>,
    grads: &mut LayerParams<T>,
) -> Result<Tensor<T>> {
    let (inputs, outputs) = (p.weights.shape()[0], p.weights.shape()[1]);
    x.require_shape("dense input", &[inputs])?;
    grad_out.require_shape("dense grad_out", &[outputs])?;
    let g = grad_out.data();
    let w = p.weights.data();
    let gw = grads.weights.data_mut();
    let mut grad_x = vec![T::zero(); inputs];
    for (i, &xi) in x.data().iter().enumerate() {
        let row = &w[i * outputs..(i + 1) * outputs];
        let grow = &mut gw[i * outputs..(i + 1) * outputs];
        let mut acc = T::zero();
        for j in 0..outputs {
            grow[j] += xi * g[j];
            acc += row[j] * g[j];
        }
        grad_x[i] = acc;
    }
    for (b, &gj) in grads.bias.data_mut().iter_mut().zip(g) {
        *b += gj;
    }
    Ok(Tensor::vector(grad_x))
}

/// Returns `(dL/dx, dL/dparams)` for a single application.
pub fn dense_backward<T: Real>(
    x: &Tensor<T>,
    p: &LayerParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, LayerParams<T>)> {
    let mut grads = p.zeros_like();
    let gx = dense_backward_into(x, p, grad_out, &mut grads)?;
    Ok((gx, grads))
}

// ---------------------------------------------------------------- conv2d

/// Valid-padding, stride-1 cross-correlation plus per-filter bias.
pub fn conv2d_apply<T: Real>(x: &Tensor<T>, p: &LayerParams<T>) -> Result<Tensor<T>> {
    let (h, w, c) = hwc("conv2d input", x)?;
    let [kh, kw, kc, f] = *p.weights.shape() else {
        return Err(Error::shape("conv2d weights", &[0, 0, 0, 0], p.weights.shape()));
    };
    if kc != c {
        return Err(Error::shape("conv2d channels", &[kc], &[c]));
    }
    if kh > h || kw > w {
        return Err(Error::shape(
            "conv2d kernel larger than input",
            &[h, w],
            &[kh, kw],
        ));
    }
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let xd = x.data();
    let wd = p.weights.data();
    let bias = p.bias.data();
    let mut out = vec![T::zero(); oh * ow * f];
    for oy in 0..oh {
        for ox in 0..ow {
            let o = &mut out[(oy * ow + ox) * f..(oy * ow + ox + 1) * f];
            o.copy_from_slice(bias);
            for dy in 0..kh {
                for dx in 0..kw {
                    let xin = &xd[((oy + dy) * w + ox + dx) * c..((oy + dy) * w + ox + dx + 1) * c];
                    let wbase = (dy * kw + dx) * c * f;
                    for (ci, &v) in xin.iter().enumerate() {
                        let wrow = &wd[wbase + ci * f..wbase + (ci + 1) * f];
                        for (oj, &wj) in o.iter_mut().zip(wrow) {
                            *oj += v * wj;
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(&[oh, ow, f], out)
}

pub fn conv2d_backward_into<T: Real>(
    x: &Tensor<T>,
    p: &LayerParams<T>,
    grad_out: &Tensor<T>,
    grads: &mut LayerParams<T>,
) -> Result<Tensor<T>> {
    let (h, w, c) = hwc("conv2d input", x)?;
    let [kh, kw, _, f] = *p.weights.shape() else {
        return Err(Error::shape("conv2d weights", &[0, 0, 0, 0], p.weights.shape()));
    };
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    grad_out.require_shape("conv2d grad_out", &[oh, ow, f])?;
    let xd = x.data();
    let wd = p.weights.data();
    let gd = grad_out.data();
    let gw = grads.weights.data_mut();
    let mut gx = vec![T::zero(); h * w * c];
    for oy in 0..oh {
        for ox in 0..ow {
            let g = &gd[(oy * ow + ox) * f..(oy * ow + ox + 1) * f];
            for dy in 0..kh {
                for dx in 0..kw {
                    let xoff = ((oy + dy) * w + ox + dx) * c;
                    let wbase = (dy * kw + dx) * c * f;
                    for ci in 0..c {
                        let v = xd[xoff + ci];
                        let wrow = &wd[wbase + ci * f..wbase + (ci + 1) * f];
                        let gwrow = &mut gw[wbase + ci * f..wbase + (ci + 1) * f];
                        let mut acc = T::zero();
                        for j in 0..f {
                            gwrow[j] += v * g[j];
                            acc += wrow[j] * g[j];
                        }
                        gx[xoff + ci] += acc;
                    }
                }
            }
            for (b, &gj) in grads.bias.data_mut().iter_mut().zip(g) {
                *b += gj;
            }
        }
    }
    Tensor::from_vec(&[h, w, c], gx)
}

pub fn conv2d_backward<T: Real>(
    x: &Tensor<T>,
    p: &LayerParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, LayerParams<T>)> {
    let mut grads = p.zeros_like();
    let gx = conv2d_backward_into(x, p, grad_out, &mut grads)?;
    Ok((gx, grads))
}

// ---------------------------------------------------------------- maxpool

/// Output of a 2x2 max pool plus the flat input index each output came from.
#[derive(Debug, Clone)]
pub struct PoolTrace {
    pub input_shape: Vec<usize>,
    pub argmax: Vec<usize>,
}

/// Non-overlapping 2x2 max pooling. A trailing odd row or column is dropped.
/// Ties go to the first position in row-major order.
pub fn maxpool2d_apply<T: Real>(x: &Tensor<T>) -> Result<(Tensor<T>, PoolTrace)> {
    let (h, w, c) = hwc("maxpool2d input", x)?;
    let (oh, ow) = (h / 2, w / 2);
    if oh == 0 || ow == 0 {
        return Err(Error::shape("maxpool2d input", &[2, 2, c], &[h, w, c]));
    }
    let xd = x.data();
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut argmax = Vec::with_capacity(oh * ow * c);
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut best = (2 * oy * w + 2 * ox) * c + ch;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = ((2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                    if xd[idx] > xd[best] {
                        best = idx;
                    }
                }
                out.push(xd[best]);
                argmax.push(best);
            }
        }
    }
    Ok((
        Tensor::from_vec(&[oh, ow, c], out)?,
        PoolTrace {
            input_shape: vec![h, w, c],
            argmax,
        },
    ))
}

pub fn maxpool2d_backward<T: Real>(trace: &PoolTrace, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if grad_out.len() != trace.argmax.len() {
        return Err(Error::shape(
            "maxpool2d grad_out",
            &[trace.argmax.len()],
            &[grad_out.len()],
        ));
    }
    let mut gx = Tensor::zeros(&trace.input_shape)?;
    let gxd = gx.data_mut();
    for (&idx, &g) in trace.argmax.iter().zip(grad_out.data()) {
        gxd[idx] += g;
    }
    Ok(gx)
}

// ---------------------------------------------------------------- activations

pub fn relu_apply<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let mut y = x.clone();
    for v in y.data_mut() {
        if *v <= T::zero() {
            *v = T::zero();
        }
    }
    y
}

/// Passes gradient where the input was strictly positive.
pub fn relu_backward<T: Real>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let mut g = grad_out.clone();
    for (gi, &xi) in g.data_mut().iter_mut().zip(x.data()) {
        if xi <= T::zero() {
            *gi = T::zero();
        }
    }
    g
}

pub fn softmax_apply<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let max = x.data().iter().copied().fold(T::neg_infinity(), |a, b| a.max(b));
    let mut y: Vec<T> = x.data().iter().map(|&v| (v - max).exp()).collect();
    let sum: T = y.iter().copied().sum();
    y.iter_mut().for_each(|v| *v = *v / sum);
    Tensor::vector(y)
}

/// Vector-Jacobian product of softmax: `p * (g - <p, g>)`.
pub fn softmax_backward<T: Real>(probs: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let dot: T = probs
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&p, &g)| p * g)
        .sum();
    Tensor::vector(
        probs
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&p, &g)| p * (g - dot))
            .collect(),
    )
}

// ---------------------------------------------------------------- dropout

/// Inverted dropout. Returns the output and the per-element scale that was
/// applied (`None` when the layer acted as the identity).
pub fn dropout_apply<T: Real>(
    x: &Tensor<T>,
    rate: f64,
    training: bool,
    rng: Option<&mut Rng>,
) -> Result<(Tensor<T>, Option<Vec<T>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let rng = rng.ok_or_else(|| Error::Config("training dropout needs an rng".into()))?;
    let keep = T::cast(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..x.len())
        .map(|_| {
            if rng.random::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect();
    let mut y = x.clone();
    for (v, &m) in y.data_mut().iter_mut().zip(&mask) {
        *v *= m;
    }
    Ok((y, Some(mask)))
}

pub fn dropout_backward<T: Real>(mask: Option<&[T]>, grad_out: &Tensor<T>) -> Tensor<T> {
    let mut g = grad_out.clone();
    if let Some(mask) = mask {
        for (v, &m) in g.data_mut().iter_mut().zip(mask) {
            *v *= m;
        }
    }
    g
}

// ---------------------------------------------------------------- flatten

pub fn flatten_apply<T: Real>(x: Tensor<T>) -> Tensor<T> {
    let n = x.len();
    x.reshape(&[n]).expect("length preserved")
}

pub fn unflatten<T: Real>(x: Tensor<T>, shape: &[usize]) -> Result<Tensor<T>> {
    x.reshape(shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn dense_unit_vector_selects_row() {
        let p = LayerParams::dense(t(&[2, 2], &[2., 3., 4., 5.]), t(&[2], &[0., 0.])).unwrap();
        let y = dense_apply(&t(&[2], &[1., 0.]), &p).unwrap();
        assert_eq!(y.data(), &[2., 3.]);
    }

    #[test]
    fn dense_sums() {
        let p = LayerParams::dense(t(&[2, 2], &[1.; 4]), t(&[2], &[1., 1.])).unwrap();
        let y = dense_apply(&t(&[2], &[1., 1.]), &p).unwrap();
        assert_eq!(y.data(), &[3., 3.]);
    }

    #[test]
    fn dense_rejects_wrong_input() {
        let p = LayerParams::dense(t(&[2, 2], &[1.; 4]), t(&[2], &[1., 1.])).unwrap();
        assert!(matches!(
            dense_apply(&t(&[3], &[1., 1., 1.]), &p),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn conv_valid_shape() {
        let mut rng = Rng::new(0);
        let p = LayerParams::<f32>::init_conv2d((3, 3), 3, 8, &mut rng).unwrap();
        let x = Tensor::zeros(&[32, 32, 3]).unwrap();
        assert_eq!(conv2d_apply(&x, &p).unwrap().shape(), &[30, 30, 8]);
    }

    #[test]
    fn conv_zero_input_gives_bias() {
        let mut rng = Rng::new(0);
        let mut p = LayerParams::<f64>::init_conv2d((3, 3), 2, 3, &mut rng).unwrap();
        p.bias = t(&[3], &[0.5, -1.0, 2.0]);
        let y = conv2d_apply(&Tensor::zeros(&[5, 5, 2]).unwrap(), &p).unwrap();
        for px in y.data().chunks(3) {
            assert_eq!(px, &[0.5, -1.0, 2.0]);
        }
    }

    #[test]
    fn conv_kernel_larger_than_input() {
        let mut rng = Rng::new(0);
        let p = LayerParams::<f64>::init_conv2d((3, 3), 1, 1, &mut rng).unwrap();
        assert!(conv2d_apply(&Tensor::zeros(&[2, 5, 1]).unwrap(), &p).is_err());
    }

    #[test]
    fn maxpool_window_max() {
        let (y, _) = maxpool2d_apply(&t(&[2, 2, 1], &[1., 2., 3., 4.])).unwrap();
        assert_eq!(y.data(), &[4.]);
    }

    #[test]
    fn maxpool_constant_ties_go_to_first() {
        let x = Tensor::filled(&[4, 4, 1], 7.0).unwrap();
        let (y, trace) = maxpool2d_apply(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 7.0));
        let g = maxpool2d_backward(&trace, &Tensor::filled(&[2, 2, 1], 1.0).unwrap()).unwrap();
        let expected = [
            1., 0., 1., 0., //
            0., 0., 0., 0., //
            1., 0., 1., 0., //
            0., 0., 0., 0.,
        ];
        assert_eq!(g.data(), &expected);
    }

    #[test]
    fn maxpool_shapes() {
        let x = Tensor::<f32>::zeros(&[28, 28, 4]).unwrap();
        assert_eq!(maxpool2d_apply(&x).unwrap().0.shape(), &[14, 14, 4]);
        let odd = Tensor::<f32>::zeros(&[5, 7, 2]).unwrap();
        assert_eq!(maxpool2d_apply(&odd).unwrap().0.shape(), &[2, 3, 2]);
    }

    #[test]
    fn relu_basic() {
        assert_eq!(relu_apply(&t(&[3], &[-1., 0., 2.])).data(), &[0., 0., 2.]);
        let g = relu_backward(&t(&[3], &[-1., 0., 2.]), &t(&[3], &[5., 5., 5.]));
        assert_eq!(g.data(), &[0., 0., 5.]);
    }

    #[test]
    fn softmax_cases() {
        assert_eq!(softmax_apply(&t(&[2], &[0., 0.])).data(), &[0.5, 0.5]);
        let p = softmax_apply(&t(&[2], &[1000., -1000.]));
        assert!(p.is_finite());
        assert_abs_diff_eq!(p.data()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.data()[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn dropout_identity_cases() {
        let x = t(&[4], &[1., 2., 3., 4.]);
        assert_eq!(dropout_apply(&x, 0.1, false, None).unwrap().0, x);
        let mut rng = Rng::new(1);
        assert_eq!(dropout_apply(&x, 0.0, true, Some(&mut rng)).unwrap().0, x);
        assert!(matches!(
            dropout_apply(&x, 1.0, true, Some(&mut rng)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn dropout_statistics() {
        let n = 1_000_000;
        let x = Tensor::filled(&[n], 1.0f64).unwrap();
        let mut rng = Rng::new(11);
        let (y, _) = dropout_apply(&x, 0.1, true, Some(&mut rng)).unwrap();
        let survivors = y.data().iter().filter(|&&v| v != 0.0).count() as f64 / n as f64;
        let mean = y.data().iter().sum::<f64>() / n as f64;
        assert!((survivors - 0.9).abs() < 0.002, "survivors {survivors}");
        assert!((mean - 1.0).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn flatten_cases() {
        let x = Tensor::<f64>::zeros(&[6, 6, 4]).unwrap();
        assert_eq!(flatten_apply(x).shape(), &[144]);
        let abc = t(&[1, 1, 3], &[1., 2., 3.]);
        let flat = flatten_apply(abc.clone());
        assert_eq!(flat.data(), &[1., 2., 3.]);
        assert_eq!(unflatten(flat, &[1, 1, 3]).unwrap(), abc);
    }
}
