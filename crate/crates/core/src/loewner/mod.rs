//! Radial, whole-plane and reverse Loewner evolutions.

mod chain;
mod chordal;
mod driving;
mod stepper;

pub use chain::{
    evolve_forward_radial, evolve_forward_radial_with, evolve_reverse_radial, evolve_reverse_radial_with, forward_map,
    flow_boundary_angle, invert_chain_at, invert_with_derivative, invert_within, log_derivative_at_zero, probe_circle, retrack, retreat_map, simulate_whole_plane,
    simulate_whole_plane_with, ChainOptions, Direction, Geometry, LoewnerChain, MapValue, TrackedPoint,
};
pub use chordal::{evolve_reverse_chordal_rho, evolve_reverse_chordal_rho_with};
pub use driving::{sample_radial_driving, sample_two_sided_driving, DrivingKind, DrivingPath};
pub use stepper::{Scheme, StepControl};

use crate::error::{Error, Result};
use crate::C64;

/// Phi(u, z) = z (u + z) / (u - z).
pub fn mobius_vector_field(u: C64, z: C64) -> Result<C64> {
    let den = u - z;
    if den == C64::new(0.0, 0.0) {
        return Err(Error::Singular);
    }
    Ok(z * (u + z) / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn vector_field_examples() {
        let one = C64::new(1.0, 0.0);
        assert_eq!(mobius_vector_field(one, C64::new(0.0, 0.0)).unwrap(), C64::new(0.0, 0.0));
        assert_eq!(mobius_vector_field(one, -one).unwrap().norm(), 0.0);
        let v = mobius_vector_field(C64::i(), one).unwrap();
        assert_relative_eq!(v.re, 0.0, epsilon = 1e-15);
        assert_relative_eq!(v.im, -1.0, epsilon = 1e-15);
        assert_eq!(mobius_vector_field(one, one), Err(Error::Singular));
    }
}
