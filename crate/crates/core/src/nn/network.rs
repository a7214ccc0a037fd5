use super::layers::{
    conv2d_apply, conv2d_backward_into, dense_apply, dense_backward_into, dropout_apply, dropout_backward,
    flatten_apply, maxpool2d_apply, maxpool2d_backward, relu_apply, relu_backward, unflatten, LayerParams,
    PoolTrace,
};
use super::rng::Rng;
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Conv2d(LayerParams<T>),
    Dense(LayerParams<T>),
    Relu,
    MaxPool2d,
    Dropout(f64),
    Flatten,
}

impl<T> Layer<T> {
    pub fn params(&self) -> Option<&LayerParams<T>> {
        match self {
            Layer::Conv2d(p) | Layer::Dense(p) => Some(p),
            _ => None,
        }
    }

    pub fn params_mut(&mut self) -> Option<&mut LayerParams<T>> {
        match self {
            Layer::Conv2d(p) | Layer::Dense(p) => Some(p),
            _ => None,
        }
    }
}

/// What a layer keeps from its forward pass for the backward pass.
#[derive(Debug, Clone)]
pub enum Trace<T> {
    Input(Tensor<T>),
    Pool(PoolTrace),
    Dropout(Option<Vec<T>>),
    Flatten(Vec<usize>),
}

/// Parameter gradients of a [`Network`], one entry per parametrized layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerParams<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn fill_zero(&mut self) {
        for p in &mut self.layers {
            p.weights.fill_zero();
            p.bias.fill_zero();
        }
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.layers.iter().flat_map(|p| [&p.weights, &p.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.layers.iter_mut().flat_map(|p| [&mut p.weights, &mut p.bias])
    }
}

/// A feed-forward stack of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    layers: Vec<Layer<T>>,
}

impl<T: Real> Network<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Self {
        Network { layers }
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    /// Forward pass. Dropout draws from `rng` when `training` is set.
    pub fn forward(
        &self,
        x: Tensor<T>,
        training: bool,
        mut rng: Option<&mut Rng>,
    ) -> Result<(Tensor<T>, Vec<Trace<T>>)> {
        let mut traces = Vec::with_capacity(self.layers.len());
        let mut a = x;
        for layer in &self.layers {
            a = match layer {
                Layer::Conv2d(p) => {
                    let y = conv2d_apply(&a, p)?;
                    traces.push(Trace::Input(a));
                    y
                }
                Layer::Dense(p) => {
                    let y = dense_apply(&a, p)?;
                    traces.push(Trace::Input(a));
                    y
                }
                Layer::Relu => {
                    let y = relu_apply(&a);
                    traces.push(Trace::Input(a));
                    y
                }
                Layer::MaxPool2d => {
                    let (y, trace) = maxpool2d_apply(&a)?;
                    traces.push(Trace::Pool(trace));
                    y
                }
                Layer::Dropout(rate) => {
                    let (y, mask) = dropout_apply(&a, *rate, training, rng.as_deref_mut())?;
                    traces.push(Trace::Dropout(mask));
                    y
                }
                Layer::Flatten => {
                    traces.push(Trace::Flatten(a.shape().to_vec()));
                    flatten_apply(a)
                }
            };
        }
        Ok((a, traces))
    }

    /// Inference-mode forward pass that keeps no traces.
    pub fn infer(&self, x: Tensor<T>) -> Result<Tensor<T>> {
        let mut a = x;
        for layer in &self.layers {
            a = match layer {
                Layer::Conv2d(p) => conv2d_apply(&a, p)?,
                Layer::Dense(p) => dense_apply(&a, p)?,
                Layer::Relu => relu_apply(&a),
                Layer::MaxPool2d => maxpool2d_apply(&a)?.0,
                Layer::Dropout(_) => a,
                Layer::Flatten => flatten_apply(a),
            };
        }
        Ok(a)
    }

    /// Backward pass. Parameter gradients are accumulated into `grads`;
    /// the gradient with respect to the network input is returned.
    pub fn backward(
        &self,
        traces: &[Trace<T>],
        grad_out: Tensor<T>,
        grads: &mut Gradients<T>,
    ) -> Result<Tensor<T>> {
        if traces.len() != self.layers.len() {
            return Err(Error::shape(
                "network traces",
                &[self.layers.len()],
                &[traces.len()],
            ));
        }
        let mut slot = grads.layers.len();
        let mut g = grad_out;
        for (layer, trace) in self.layers.iter().zip(traces).rev() {
            g = match (layer, trace) {
                (Layer::Conv2d(p), Trace::Input(x)) => {
                    slot -= 1;
                    conv2d_backward_into(x, p, &g, &mut grads.layers[slot])?
                }
                (Layer::Dense(p), Trace::Input(x)) => {
                    slot -= 1;
                    dense_backward_into(x, p, &g, &mut grads.layers[slot])?
                }
                (Layer::Relu, Trace::Input(x)) => relu_backward(x, &g),
                (Layer::MaxPool2d, Trace::Pool(t)) => maxpool2d_backward(t, &g)?,
                (Layer::Dropout(_), Trace::Dropout(mask)) => dropout_backward(mask.as_deref(), &g),
                (Layer::Flatten, Trace::Flatten(shape)) => unflatten(g, shape)?,
                _ => return Err(Error::Config("trace does not match layer".into())),
            };
        }
        Ok(g)
    }

    pub fn zero_grads(&self) -> Gradients<T> {
        Gradients {
            layers: self.params().map(LayerParams::zeros_like).collect(),
        }
    }

    pub fn params(&self) -> impl Iterator<Item = &LayerParams<T>> {
        self.layers.iter().filter_map(Layer::params)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut LayerParams<T>> {
        self.layers.iter_mut().filter_map(Layer::params_mut)
    }

    /// Weight and bias tensors in declaration order.
    pub fn tensors(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.params().flat_map(|p| [&p.weights, &p.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.params_mut().flat_map(|p| [&mut p.weights, &mut p.bias])
    }

    pub fn param_count(&self) -> usize {
        self.params().map(LayerParams::param_count).sum()
    }

    /// Output shape of every layer for an input of `input_shape`.
    pub fn activation_shapes(&self, input_shape: &[usize]) -> Result<Vec<Vec<usize>>> {
        let mut a = Tensor::<T>::zeros(input_shape)?;
        let mut shapes = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            a = Network::new(vec![layer.clone()]).infer(a)?;
            shapes.push(a.shape().to_vec());
        }
        Ok(shapes)
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        let cast_params = |p: &LayerParams<T>| LayerParams {
            kind: p.kind,
            weights: p.weights.cast(),
            bias: p.bias.cast(),
        };
        Network {
            layers: self
                .layers
                .iter()
                .map(|l| match l {
                    Layer::Conv2d(p) => Layer::Conv2d(cast_params(p)),
                    Layer::Dense(p) => Layer::Dense(cast_params(p)),
                    Layer::Relu => Layer::Relu,
                    Layer::MaxPool2d => Layer::MaxPool2d,
                    Layer::Dropout(r) => Layer::Dropout(*r),
                    Layer::Flatten => Layer::Flatten,
                })
                .collect(),
        }
    }
}
