//! Reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! A [`Graph`] is rebuilt for every forward pass. Each operation appends a node
//! holding its value and a record of its inputs; [`Graph::backward`] walks the
//! nodes in reverse insertion order and accumulates gradients into every leaf
//! created with [`Graph::variable`] or [`Graph::parameter`].

mod array;
mod backward;
mod gradcheck;
mod graph;

pub use array::Array;
pub use backward::Gradients;
pub use gradcheck::gradient_check;
pub use graph::{
    BinaryKind, ElementwiseKind, Graph, NodeId, ReduceKind, Tensor, UnaryKind, LOG_CLAMP,
};
