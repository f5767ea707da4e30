//! Base manifolds, spherical harmonics, and heat kernels on the base, the
//! structure group and the frame bundle.

mod fiber;
mod harmonics;
mod kernel;
mod space;

pub use fiber::{bundle_kernel, relative_element, FiberPoint};
pub(crate) use fiber::sphere_relative_angle;
pub use harmonics::{legendre, legendre_all, spherical_harmonic, spherical_harmonics};
pub use kernel::{
    base_heat_kernel, base_positivity_threshold, group_heat_kernel, group_positivity_threshold,
    KernelSpec, RadialProfile,
};
pub use space::{circle_grid, geodesic_distance, sample_points, sphere_grid, Manifold, Point};
pub(crate) use space::distance_unchecked;
