use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, x: Tensor) -> Tensor {
        match self {
            Activation::Relu => g.relu(x),
            Activation::Sigmoid => g.sigmoid(x),
            Activation::Tanh => g.tanh(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        stride: usize,
        padding: usize,
    },
    #[serde(rename = "maxpool1d")]
    MaxPool1d { pool_size: usize, stride: usize },
    Lstm { input_size: usize, hidden_size: usize },
    #[serde(rename = "bilstm")]
    BiLstm { input_size: usize, hidden_size: usize },
    Dense {
        in_features: usize,
        out_features: usize,
        activation: Activation,
    },
    Flatten,
    Activation { function: Activation },
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        let sizes: Vec<(&str, usize)> = match self {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel_size,
                stride,
                ..
            } => vec![
                ("in_channels", *in_channels),
                ("out_channels", *out_channels),
                ("kernel_size", *kernel_size),
                ("stride", *stride),
            ],
            LayerSpec::MaxPool1d { pool_size, stride } => {
                vec![("pool_size", *pool_size), ("stride", *stride)]
            }
            LayerSpec::Lstm {
                input_size,
                hidden_size,
            }
            | LayerSpec::BiLstm {
                input_size,
                hidden_size,
            } => vec![("input_size", *input_size), ("hidden_size", *hidden_size)],
            LayerSpec::Dense {
                in_features,
                out_features,
                ..
            } => vec![("in_features", *in_features), ("out_features", *out_features)],
            LayerSpec::Flatten | LayerSpec::Activation { .. } => vec![],
        };
        match sizes.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(Error::Config(format!("{name} must be >= 1 in {self:?}"))),
            None => Ok(()),
        }
    }

    /// Names and shapes of the weight tensors this layer owns, in storage order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let lstm = |prefix: &str, input: usize, hidden: usize| {
            vec![
                (format!("{prefix}W"), vec![4 * hidden, input]),
                (format!("{prefix}U"), vec![4 * hidden, hidden]),
                (format!("{prefix}b"), vec![4 * hidden]),
            ]
        };
        match *self {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel_size,
                ..
            } => vec![
                ("kernel".into(), vec![out_channels, in_channels, kernel_size]),
                ("bias".into(), vec![out_channels]),
            ],
            LayerSpec::Lstm {
                input_size,
                hidden_size,
            } => lstm("", input_size, hidden_size),
            LayerSpec::BiLstm {
                input_size,
                hidden_size,
            } => {
                let mut v = lstm("fwd.", input_size, hidden_size);
                v.extend(lstm("bwd.", input_size, hidden_size));
                v
            }
            LayerSpec::Dense {
                in_features,
                out_features,
                ..
            } => vec![
                ("W".into(), vec![out_features, in_features]),
                ("b".into(), vec![out_features]),
            ],
            LayerSpec::MaxPool1d { .. } | LayerSpec::Flatten | LayerSpec::Activation { .. } => {
                vec![]
            }
        }
    }

    /// Output shape for a given input shape, or a shape error.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let need_2d = |what: &str| -> Result<(usize, usize)> {
            match input {
                [t, c] => Ok((*t, *c)),
                _ => Err(Error::Shape(format!("{what} expects [time, channels], got {input:?}"))),
            }
        };
        match *self {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel_size,
                stride,
                padding,
            } => {
                let (t, c) = need_2d("conv1d")?;
                if c != in_channels {
                    return Err(Error::Dimension(format!(
                        "conv1d expects {in_channels} input channels, got {c}"
                    )));
                }
                let padded = t + 2 * padding;
                if padded < kernel_size {
                    return Err(Error::Shape(format!(
                        "conv1d: length {t} with padding {padding} is shorter than kernel {kernel_size}"
                    )));
                }
                Ok(vec![(padded - kernel_size) / stride + 1, out_channels])
            }
            LayerSpec::MaxPool1d { pool_size, stride } => {
                let (t, c) = need_2d("maxpool1d")?;
                if t < pool_size {
                    return Err(Error::Shape(format!(
                        "maxpool1d: length {t} is shorter than pool size {pool_size}"
                    )));
                }
                Ok(vec![(t - pool_size) / stride + 1, c])
            }
            LayerSpec::Lstm {
                input_size,
                hidden_size,
            }
            | LayerSpec::BiLstm {
                input_size,
                hidden_size,
            } => {
                let (t, c) = need_2d("lstm")?;
                if c != input_size {
                    return Err(Error::Dimension(format!(
                        "lstm expects {input_size} features, got {c}"
                    )));
                }
                let width = if matches!(self, LayerSpec::BiLstm { .. }) {
                    2 * hidden_size
                } else {
                    hidden_size
                };
                Ok(vec![t, width])
            }
            LayerSpec::Dense {
                in_features,
                out_features,
                ..
            } => {
                if input != [in_features] {
                    return Err(Error::Dimension(format!(
                        "dense expects [{in_features}], got {input:?}"
                    )));
                }
                Ok(vec![out_features])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Activation { .. } => Ok(input.to_vec()),
        }
    }
}

/// One named weight tensor. Storage is shared so forward passes can reference
/// it without copying.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Arc<Vec<f64>>,
}

impl Param {
    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut Vec<f64> {
        Arc::make_mut(&mut self.data)
    }
}

/// Weights owned by one layer, in the order given by [`LayerSpec::param_shapes`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerWeights {
    pub params: Vec<Param>,
}

impl LayerWeights {
    pub fn zeros(spec: &LayerSpec) -> Self {
        LayerWeights {
            params: spec
                .param_shapes()
                .into_iter()
                .map(|(name, shape)| {
                    let n = shape.iter().product();
                    Param {
                        name,
                        shape,
                        data: Arc::new(vec![0.0; n]),
                    }
                })
                .collect(),
        }
    }

    /// Checks that shapes match `spec` and every value is finite.
    pub fn validate(&self, spec: &LayerSpec) -> Result<()> {
        let expected = spec.param_shapes();
        if expected.len() != self.params.len() {
            return Err(Error::Dimension(format!(
                "{spec:?} owns {} weight tensors, got {}",
                expected.len(),
                self.params.len()
            )));
        }
        for ((name, shape), p) in expected.iter().zip(&self.params) {
            if name != &p.name || shape != &p.shape || p.data.len() != shape.iter().product() {
                return Err(Error::Dimension(format!(
                    "weight {} {:?} does not match expected {name} {shape:?}",
                    p.name, p.shape
                )));
            }
            if let Some(i) = p.data.iter().position(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "weight {} has non-finite value at index {i}",
                    p.name
                )));
            }
        }
        Ok(())
    }

    /// Registers every weight as a graph leaf; trainable leaves receive gradients.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Result<Vec<Tensor>> {
        self.params
            .iter()
            .map(|p| {
                if trainable {
                    g.parameter(&p.shape, Arc::clone(&p.data))
                } else {
                    g.shared_constant(&p.shape, Arc::clone(&p.data))
                }
            })
            .collect()
    }
}

fn expect_params(what: &str, params: &[Tensor], n: usize) -> Result<()> {
    if params.len() != n {
        return Err(Error::Dimension(format!(
            "{what} expects {n} weight tensors, got {}",
            params.len()
        )));
    }
    Ok(())
}

/// `input [time, in_channels]` → `[out_time, out_channels]`. No activation.
pub fn conv1d_forward(
    g: &mut Graph,
    input: Tensor,
    spec: &LayerSpec,
    params: &[Tensor],
) -> Result<Tensor> {
    let LayerSpec::Conv1d {
        in_channels,
        stride,
        padding,
        ..
    } = *spec
    else {
        return Err(Error::Contract(format!("conv1d_forward given {spec:?}")));
    };
    expect_params("conv1d", params, 2)?;
    let shape = g.shape(input);
    if shape.len() != 2 || shape[1] != in_channels {
        return Err(Error::Dimension(format!(
            "conv1d expects [time, {in_channels}], got {shape:?}"
        )));
    }
    g.conv1d(input, params[0], params[1], stride, padding)
}

pub fn maxpool1d_forward(
    g: &mut Graph,
    input: Tensor,
    pool_size: usize,
    stride: usize,
) -> Result<Tensor> {
    g.maxpool1d(input, pool_size, stride)
}

/// Single-direction LSTM over `input [time, features]` with gate order
/// (input, forget, cell candidate, output). Returns `[time, hidden]` in
/// ascending time order for either direction.
pub fn lstm_forward(
    g: &mut Graph,
    input: Tensor,
    input_size: usize,
    hidden: usize,
    params: &[Tensor],
    direction: Direction,
) -> Result<Tensor> {
    expect_params("lstm", params, 3)?;
    let shape = g.shape(input).to_vec();
    if shape.len() != 2 || shape[1] != input_size {
        return Err(Error::Dimension(format!(
            "lstm expects [time, {input_size}], got {shape:?}"
        )));
    }
    for p in params {
        if let Some(i) = g.value(*p).iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "lstm weight node {} has non-finite value at index {i}",
                p.id()
            )));
        }
    }
    let time = shape[0];
    let (w, u, b) = (params[0], params[1], params[2]);

    let wt = g.transpose(w)?;
    let proj = g.matmul(input, wt)?;
    let proj = g.add(proj, b)?;
    let ut = g.transpose(u)?;

    let order: Vec<usize> = match direction {
        Direction::Forward => (0..time).collect(),
        Direction::Reverse => (0..time).rev().collect(),
    };
    let mut h_prev: Option<Tensor> = None;
    let mut c_prev: Option<Tensor> = None;
    let mut outputs = Vec::with_capacity(time);
    for t in order {
        let row = g.narrow(proj, 0, t, 1)?;
        let z = match h_prev {
            Some(h) => {
                let rec = g.matmul(h, ut)?;
                g.add(row, rec)?
            }
            None => row,
        };
        let s = g.sigmoid(z);
        let th = g.tanh(z);
        let i_gate = g.narrow(s, 1, 0, hidden)?;
        let o_gate = g.narrow(s, 1, 3 * hidden, hidden)?;
        let cand = g.narrow(th, 1, 2 * hidden, hidden)?;
        let fresh = g.mul(i_gate, cand)?;
        let c = match c_prev {
            Some(c_old) => {
                let f_gate = g.narrow(s, 1, hidden, hidden)?;
                let kept = g.mul(f_gate, c_old)?;
                g.add(kept, fresh)?
            }
            None => fresh,
        };
        let tc = g.tanh(c);
        let h = g.mul(o_gate, tc)?;
        outputs.push(h);
        h_prev = Some(h);
        c_prev = Some(c);
    }
    if direction == Direction::Reverse {
        outputs.reverse();
    }
    g.concat(&outputs, 0)
}

/// Forward and reverse LSTMs concatenated on the feature axis: `[time, 2·hidden]`.
/// `params` holds the forward direction's `W, U, b` followed by the reverse one's.
pub fn bilstm_forward(
    g: &mut Graph,
    input: Tensor,
    input_size: usize,
    hidden: usize,
    params: &[Tensor],
) -> Result<Tensor> {
    expect_params("bilstm", params, 6)?;
    let fwd = lstm_forward(g, input, input_size, hidden, &params[..3], Direction::Forward)?;
    let bwd = lstm_forward(g, input, input_size, hidden, &params[3..], Direction::Reverse)?;
    g.concat(&[fwd, bwd], 1)
}

/// `activation(W·x + b)` for a 1-D `input [features]`.
pub fn dense_forward(
    g: &mut Graph,
    input: Tensor,
    in_features: usize,
    out_features: usize,
    activation: Activation,
    params: &[Tensor],
) -> Result<Tensor> {
    expect_params("dense", params, 2)?;
    let shape = g.shape(input);
    if shape != [in_features] {
        return Err(Error::Dimension(format!(
            "dense expects [{in_features}], got {shape:?}"
        )));
    }
    let col = g.reshape(input, vec![in_features, 1])?;
    let wx = g.matmul(params[0], col)?;
    let wx = g.reshape(wx, vec![out_features])?;
    let z = g.add(wx, params[1])?;
    Ok(activation.apply(g, z))
}

/// Dispatches one layer's forward pass.
pub fn layer_forward(
    g: &mut Graph,
    input: Tensor,
    spec: &LayerSpec,
    params: &[Tensor],
) -> Result<Tensor> {
    match *spec {
        LayerSpec::Conv1d { .. } => conv1d_forward(g, input, spec, params),
        LayerSpec::MaxPool1d { pool_size, stride } => maxpool1d_forward(g, input, pool_size, stride),
        LayerSpec::Lstm {
            input_size,
            hidden_size,
        } => lstm_forward(g, input, input_size, hidden_size, params, Direction::Forward),
        LayerSpec::BiLstm {
            input_size,
            hidden_size,
        } => bilstm_forward(g, input, input_size, hidden_size, params),
        LayerSpec::Dense {
            in_features,
            out_features,
            activation,
        } => dense_forward(g, input, in_features, out_features, activation, params),
        LayerSpec::Flatten => {
            let n = g.value(input).len();
            g.reshape(input, vec![n])
        }
        LayerSpec::Activation { function } => Ok(function.apply(g, input)),
    }
}
