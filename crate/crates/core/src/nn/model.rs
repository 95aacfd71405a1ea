use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{layer_forward, Activation, LayerSpec, LayerWeights, Param};
use crate::autodiff::{Array, Graph, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Bilstm,
    CnnLstm,
    CnnBilstm,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [
        Architecture::Bilstm,
        Architecture::CnnLstm,
        Architecture::CnnBilstm,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Architecture::Bilstm => "bilstm",
            Architecture::CnnLstm => "cnn_lstm",
            Architecture::CnnBilstm => "cnn_bilstm",
        }
    }

    /// Name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Architecture::Bilstm => "BiLSTM",
            Architecture::CnnLstm => "CNN-LSTM",
            Architecture::CnnBilstm => "CNN-BiLSTM",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown architecture {s:?}")))
    }
}

/// Layer sizes. Defaults: filters 32/64/64, kernel 5, pool 2/2, 64 recurrent
/// units per direction, 64 hidden dense units with sigmoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub conv_filters: Vec<usize>,
    pub kernel_size: usize,
    pub conv_stride: usize,
    pub conv_padding: usize,
    pub pool_size: usize,
    pub pool_stride: usize,
    pub lstm_hidden: usize,
    pub dense_units: usize,
    pub dense_activation: Activation,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            conv_filters: vec![32, 64, 64],
            kernel_size: 5,
            conv_stride: 1,
            conv_padding: 0,
            pool_size: 2,
            pool_stride: 2,
            lstm_hidden: 64,
            dense_units: 64,
            dense_activation: Activation::Sigmoid,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weights: LayerWeights,
}

/// A sequence classifier mapping `[time, channels]` windows to a probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub architecture: Architecture,
    pub input_shape: [usize; 2],
    pub layers: Vec<Layer>,
}

fn layer_specs(
    architecture: Architecture,
    input_shape: [usize; 2],
    hyper: &Hyperparameters,
) -> Result<Vec<LayerSpec>> {
    let mut specs = Vec::new();
    let mut channels = input_shape[1];
    if architecture != Architecture::Bilstm {
        for &filters in &hyper.conv_filters {
            specs.push(LayerSpec::Conv1d {
                in_channels: channels,
                out_channels: filters,
                kernel_size: hyper.kernel_size,
                stride: hyper.conv_stride,
                padding: hyper.conv_padding,
            });
            specs.push(LayerSpec::Activation {
                function: Activation::Relu,
            });
            specs.push(LayerSpec::MaxPool1d {
                pool_size: hyper.pool_size,
                stride: hyper.pool_stride,
            });
            channels = filters;
        }
    }
    let recurrent = if architecture == Architecture::CnnLstm {
        LayerSpec::Lstm {
            input_size: channels,
            hidden_size: hyper.lstm_hidden,
        }
    } else {
        LayerSpec::BiLstm {
            input_size: channels,
            hidden_size: hyper.lstm_hidden,
        }
    };
    specs.push(recurrent);
    specs.push(LayerSpec::Flatten);

    let mut shape = input_shape.to_vec();
    for s in &specs {
        s.validate()?;
        shape = s.output_shape(&shape)?;
    }
    let flat = shape[0];
    specs.push(LayerSpec::Dense {
        in_features: flat,
        out_features: hyper.dense_units,
        activation: hyper.dense_activation,
    });
    specs.push(LayerSpec::Dense {
        in_features: hyper.dense_units,
        out_features: 1,
        activation: Activation::Sigmoid,
    });
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}

/// Smallest window length the architecture accepts, if any length up to `limit` works.
pub fn min_window_length(
    architecture: Architecture,
    channels: usize,
    hyper: &Hyperparameters,
    limit: usize,
) -> Option<usize> {
    (1..=limit).find(|&t| layer_specs(architecture, [t, channels], hyper).is_ok())
}

/// Builds an architecture's layer stack with deterministic initial weights.
///
/// Conv and dense weights draw from U(−√(1/fan_in), √(1/fan_in)); LSTM matrices
/// from U(−√(1/hidden), √(1/hidden)); LSTM forget-gate biases start at 1.0 and
/// all other biases at 0.
pub fn build_model(
    architecture: Architecture,
    input_shape: [usize; 2],
    hyper: &Hyperparameters,
    seed: u64,
) -> Result<Model> {
    if input_shape[0] == 0 || input_shape[1] == 0 {
        return Err(Error::Config(format!("input shape {input_shape:?} must be positive")));
    }
    let specs = layer_specs(architecture, input_shape, hyper).map_err(|e| match e {
        Error::Shape(msg) => {
            let hint = match min_window_length(architecture, input_shape[1], hyper, 4096) {
                Some(t) => format!("minimal admissible window length is {t} rows"),
                None => "no window length up to 4096 rows is admissible".to_string(),
            };
            Error::Config(format!(
                "window of {} rows is too short for {architecture}: {msg}; {hint}",
                input_shape[0]
            ))
        }
        other => other,
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = specs
        .into_iter()
        .map(|spec| {
            let weights = init_weights(&spec, &mut rng);
            Layer { spec, weights }
        })
        .collect();
    Ok(Model {
        architecture,
        input_shape,
        layers,
    })
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

fn init_weights(spec: &LayerSpec, rng: &mut ChaCha8Rng) -> LayerWeights {
    let mut weights = LayerWeights::zeros(spec);
    let hidden = match spec {
        LayerSpec::Lstm { hidden_size, .. } | LayerSpec::BiLstm { hidden_size, .. } => *hidden_size,
        _ => 0,
    };
    for p in &mut weights.params {
        let n = p.data.len();
        let values = match (spec, p.name.rsplit('.').next().unwrap_or("")) {
            (LayerSpec::Conv1d { in_channels, kernel_size, .. }, "kernel") => {
                uniform(rng, n, (1.0 / (in_channels * kernel_size) as f64).sqrt())
            }
            (LayerSpec::Dense { in_features, .. }, "W") => {
                uniform(rng, n, (1.0 / *in_features as f64).sqrt())
            }
            (LayerSpec::Lstm { .. } | LayerSpec::BiLstm { .. }, "W" | "U") => {
                uniform(rng, n, (1.0 / hidden as f64).sqrt())
            }
            (LayerSpec::Lstm { .. } | LayerSpec::BiLstm { .. }, "b") => {
                let mut b = vec![0.0; n];
                b[hidden..2 * hidden].fill(1.0);
                b
            }
            _ => vec![0.0; n],
        };
        p.data = Arc::new(values);
    }
    weights
}

impl Model {
    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec.clone()).collect()
    }

    pub fn params(&self) -> impl Iterator<Item = &Param> {
        self.layers.iter().flat_map(|l| l.weights.params.iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.layers.iter_mut().flat_map(|l| l.weights.params.iter_mut())
    }

    /// `layer{index}.{name}` for every parameter, in storage order.
    pub fn param_names(&self) -> Vec<String> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.weights.params.iter().map(move |p| format!("layer{i}.{}", p.name)))
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.params().map(|p| p.data.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let mut shape = self.input_shape.to_vec();
        for layer in &self.layers {
            layer.spec.validate()?;
            layer.weights.validate(&layer.spec)?;
            shape = layer.spec.output_shape(&shape)?;
        }
        if shape != [1] {
            return Err(Error::Dimension(format!(
                "model output shape is {shape:?}, expected [1]"
            )));
        }
        Ok(())
    }

    /// Appends the forward pass to `g`. Returns the `[1]` output and the
    /// parameter leaves in storage order.
    pub fn forward(
        &self,
        g: &mut Graph,
        input: Tensor,
        trainable: bool,
    ) -> Result<(Tensor, Vec<Tensor>)> {
        let shape = g.shape(input);
        if shape != self.input_shape {
            return Err(Error::Dimension(format!(
                "model expects input {:?}, got {shape:?}",
                self.input_shape
            )));
        }
        let mut x = input;
        let mut handles = Vec::new();
        for layer in &self.layers {
            let params = layer.weights.bind(g, trainable)?;
            x = layer_forward(g, x, &layer.spec, &params)?;
            handles.extend(params);
        }
        Ok((x, handles))
    }

    /// Probability of the positive class for one `[time, channels]` window.
    pub fn predict(&self, window: &[f64]) -> Result<f64> {
        let mut g = Graph::new();
        let input = g.constant(Array::new(self.input_shape.to_vec(), window.to_vec())?);
        let (out, _) = self.forward(&mut g, input, false)?;
        let p = g.value(out)[0];
        if !p.is_finite() {
            return Err(Error::Numeric("model produced a non-finite output".into()));
        }
        Ok(p)
    }
}
