//! Dense tensors, reverse-mode autodiff, layers, AdamW and checkpoints.

mod checkpoint;
mod gradcheck;
mod graph;
mod layers;
mod optim;
mod param;
mod tensor;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{compare_gradients, gradient_check, numeric_gradient, GradCheck};
pub use graph::{Gradients, Graph, Var};
pub use layers::{Activation, AttentionBlock, Init, Linear, Mlp, MlpSpec, OutputActivation};
pub use optim::AdamW;
pub use param::{ParamGrads, ParamId, ParamStore};
pub use tensor::{dot, Tensor};

