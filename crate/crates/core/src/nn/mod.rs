//! Layers and the three sequence architectures built on the autodiff engine.

mod layers;
mod model;

pub use layers::{
    bilstm_forward, conv1d_forward, dense_forward, layer_forward, lstm_forward, maxpool1d_forward,
    Activation, Direction, LayerSpec, LayerWeights, Param,
};
pub use model::{build_model, min_window_length, Architecture, Hyperparameters, Layer, Model};
