//! Mating-of-trees samplers and the boundary-length extraction pipeline.

mod crt;
mod extract;
mod sphere;

pub use crt::{sample_crt, stopped_crt_disk, CrtPath, InverseGamma, StoppedCrt, GUARD_FACTOR};
pub use extract::{
    extract_boundary_process, extract_sphere_boundary_process, pooled_covariance, BoundaryLengthProcess, ExtractOptions, Frame,
};
pub use sphere::{
    conditioned_passage_marginal, conditioned_passage_time, qv_ratio, sample_sphere_pair, SpherePair, ELL_MIN, MAX_STEPS,
};
