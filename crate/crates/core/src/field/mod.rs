//! Regularized Gaussian and Liouville fields on grids.

pub mod coord;
pub mod factor;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod sample;
pub mod sphere;

pub use coord::{coordinate_change, Composite, ConformalMap, DiskMobius, Identity};
pub use factor::{covariance_kernel, projected_kernel, CovarianceFactorization};
pub use grid::{Domain, GridDescriptor, GridSpec, Layout, Stencil};
pub use io::{decode_field, encode_field, FieldRecord, FieldSidecar};
pub use kernel::{disk_kernel, double_circle_log, green_disk, green_halfplane, halfplane_kernel, HPoint};
pub use sample::{
    girsanov_reweight, sample_gff, sample_lf_disk, sample_lf_disk_fixed_length, tail_shapes, FieldSample, Insertion, Pullback, Tails,
};
pub use sphere::{area_conditioned_constant, condition_on_area, conditioned_drifted_bm, conditioned_drifted_bm_steps, sample_sphere_field, sphere_grid};
