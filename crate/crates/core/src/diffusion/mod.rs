//! Radius graphs, the generalized Laplacian, the twisted Dirichlet energy and
//! its gradient flows.

mod graph;
mod operator;
mod weights;

pub use graph::{build_graph, GeometricGraph, Neighbor};
pub use operator::{
    apply_laplacian, beltrami_step, dirichlet_step, euler_step, generalized_laplacian, laplacian_parts,
    polyakov_energy, propagate_exact, stable_dt, symmetric_expm, EnergyTerms, NodeState, DENSE_LIMIT,
};
pub use weights::{EdgeWeights, EnergyConfig, WeightRule};
