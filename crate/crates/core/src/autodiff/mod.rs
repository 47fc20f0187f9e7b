//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Graphs are built define-by-run: each builder call evaluates its node
//! eagerly and records the op so that [`Graph::backward`] can replay the
//! chain rule in reverse insertion order. Gradients computed outside the
//! graph (persistent-homology losses) enter either through
//! [`Graph::inject_gradient`] or through a [`Graph::custom`] node.

mod graph;
pub(crate) mod kernels;
mod tensor;

pub use graph::{CustomFn, Graph, NodeId};
pub use tensor::Tensor;
