//! A small reverse-mode differentiation engine with the layer kinds needed
//! by the moment encoders and neural volumes.

pub mod adam;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod linalg;
pub mod params;
pub mod tape;

pub use adam::{Adam, Stage};
pub use error::{NnError, Result};
pub use layers::{Chain, LayerSpec, LRELU_SLOPE};
pub use params::{load_params, save_params, Params};
pub use tape::{ConvTable, Gradients, Sparse, Tape, Var};
