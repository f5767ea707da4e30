//! Atlases, gauges and transition functions, feature fields as sections of
//! the associated bundle, and the equivariance harness.

mod atlas;
mod equivariance;
mod field;

pub use atlas::{Atlas, ChartId};
pub use equivariance::{check_equivariance, EquivarianceReport, Isometry};
pub use field::FeatureField;
pub use crate::manifold::FiberPoint;
