//! Numerical core shared by the MRA and cryo-EM pipelines.
//!
//! Everything here is a pure function of its inputs. Parallel work is split
//! into fixed-size blocks whose partial results are combined in a fixed
//! order, so outputs never depend on how many workers ran.

pub mod error;
pub mod fft;
pub mod grid;
pub mod omt;
pub mod par;
pub mod reduce;
pub mod rng;
pub mod tensor;

pub use error::{CoreError, Result};
pub use num_complex::Complex64;
pub use par::Workers;
pub use rng::{Distribution, SeededRng};
pub use tensor::{CTensor, RTensor, Tensor};
