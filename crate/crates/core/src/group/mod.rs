//! Compact structure groups SO(2) and SO(3): elements, real irreps,
//! generators, Casimirs, Haar quadrature and Clebsch–Gordan coupling.

mod clebsch_gordan;
mod element;
mod irrep;
mod quadrature;
mod so3_basis;

pub use clebsch_gordan::{clebsch_gordan, triangle, ClebschGordan};
pub use element::{reduce_angle, GroupElement, GroupTag};
pub use irrep::{
    casimir, casimir_on_space, character, generators, irrep_matrix, Channel, IrrepLabel,
    RepBlock, RepSpace,
};
pub use quadrature::{gauss_legendre, haar_rule, integrate_over_group, QuadratureRule};
