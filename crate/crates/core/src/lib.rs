//! Simulation and target recovery for a tensor-domain sub-Nyquist MIMO radar
//! that is thinned in spectrum, aperture and pulse train at once.
//!
//! The measurement model is a partially observed third-order tensor
//! (delay-frequency x virtual element x pulse). Two recovery routes are
//! provided: greedy tensor OMP on the native grid ([`omp`]) and
//! Hankel-regularized low-CP-rank tensor completion for off-grid targets
//! ([`tc`]). [`harness`] drives seeded Monte-Carlo sweeps over both.

pub mod error;
pub mod hankel;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod omp;
pub mod synth;
pub mod tc;
pub mod tensor;

pub use error::{RadarError, Result};
pub use model::{GridMaps, RadarConfig, SparseSceneTensor, Target, TargetScene};
pub use synth::{add_noise, build_index_sets, scene_to_tensor, synthesize, IndexSets, PartialMeasurementTensor};
pub use tensor::{build_dictionaries, khatri_rao_support, multilinear_product, vandermonde_vectors, Tensor3};
