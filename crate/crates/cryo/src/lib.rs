//! Simplified cryo-EM: rotations and quadrature on SO(3), volumes and their
//! central slices, image moments, neural volume fitting, moment-matching
//! reconstruction and volume comparison.

pub mod designs;
pub mod error;
pub mod eval;
pub mod mrc;
pub mod neural;
pub mod quadrature;
pub mod recon;
pub mod rotation;
pub mod slice;
pub mod volume;

pub use error::{CryoError, Result};
pub use eval::{align_volumes, fsc, relative_error_volume, rotate_volume, AlignOptions, Alignment, FscCurve};
pub use mrc::{fourier_crop, read_mrc, write_mrc, MrcMap};
pub use neural::{fit_neural_gt, FitConfig, FitReport, NeuralArch, NeuralVolume};
pub use quadrature::{quadrature_moments, QuadratureDensity};
pub use recon::{build_cryo_encoder, reconstruct, CryoEncoder, CryoReconConfig, CryoReconstruction, CryoTraceRow};
pub use rotation::{build_quadrature, quadrature, sample_rotations, QuadratureSet, Rotation, VmfMixtureSpec};
pub use slice::{empirical_moments_2d, simulate_images, simulate_moments_2d, slice, CryoMomentPair};
pub use volume::{FourierVolume, GaussianVolumeSpec, GridVolume};
