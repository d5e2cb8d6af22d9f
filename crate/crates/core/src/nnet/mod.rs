//! Small dense networks with reverse-mode gradients and an Adam optimizer.

mod checkpoint;
mod layer;
mod network;
mod optim;
mod pcdn;
mod tensor;

pub use checkpoint::{decode_networks, encode_networks, load_networks, save_networks};
pub use layer::{sigmoid, softplus, Activation, DenseLayer, WeightConstraint};
pub use network::{
    shifted_softplus, ForwardCache, Gradients, LayerGrad, Network, OutputTransform, POSITIVE_FLOOR,
    POSITIVE_SHIFT,
};
pub use optim::{Adam, AdamConfig};
pub use pcdn::{build_pcdn, selected_count};
pub use tensor::Tensor;
