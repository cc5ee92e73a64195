//! Trainable backbone (MLP or small CNN) with per-task normalization, linear
//! heads, exact backpropagation, SGD/Adam, and LoRA-augmented forward passes.

mod forward;
mod network;
mod optim;
mod train;

pub use forward::{
    backward, cross_entropy, features, forward, lora_effective_weight, softmax, AdapterGrad, AdapterSet,
    BackwardOutput, BatchStats, Gradients, ModelView, NormGrad, ParamGrad, Phase, TrainScope, NORM_EPS,
};
pub use network::{
    glorot, ClassifierHead, ConvGeometry, Layer, LayerKind, LayerSpec, Network, NetworkSpec, NormLayer, NormParams,
};
pub use optim::{OptimizerKind, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use train::{fit, Backbone, LrSchedule, TrainConfig, Trainee, NORM_MOMENTUM};
