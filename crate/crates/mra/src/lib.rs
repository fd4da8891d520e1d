//! Multireference alignment: forward model, moments, spectral inversion,
//! and the neural moment encoder with its training and refinement loops.

pub mod dataset;
pub mod encoder;
pub mod error;
pub mod metrics;
pub mod mixture;
pub mod moments;
pub mod recon;
pub mod signal;
pub mod spectral;
pub mod train;

pub use error::{MraError, Result};
pub use mixture::{Component, MixtureFamily, MixtureSpec1D};
pub use moments::{analytic_moments, empirical_moments, simulate_moments, simulate_observations, MomentKind, MomentPair};
pub use signal::{MraDensity, MraSignal};
pub use spectral::{spectral_invert, EigenMethod, SpectralOptions, SpectralResult};
pub use dataset::{make_dataset, Dataset};
pub use encoder::{build_encoder, Encoder, EncoderArch, Head};
pub use recon::{align_latents, latents_to_moments, refine, ReconConfig, Refinement, TraceRow};
pub use orbit_nn::Stage;
pub use train::{train_supervised, TrainConfig, TrainReport};
