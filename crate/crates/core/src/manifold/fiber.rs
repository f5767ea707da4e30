use nalgebra::Matrix3;

use super::kernel::KernelSpec;
use super::space::{Manifold, Point};
use crate::error::{Error, Result};
use crate::group::GroupElement;

/// A point of the frame bundle: a base point together with an orthonormal
/// frame there.
///
/// Euclidean frames are elements of SO(d). A sphere frame is a rotation whose
/// third column is the base point, so the first two columns span the tangent
/// plane and SO(2) acts by rotating about the normal. Circle frames are
/// trivial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberPoint {
    pub base: Point,
    pub frame: GroupElement,
}

const FRAME_TOL: f64 = 1e-9;

impl FiberPoint {
    pub fn new(m: &Manifold, base: Point, frame: GroupElement) -> Result<Self> {
        let p = FiberPoint { base, frame };
        p.validate(m)?;
        Ok(p)
    }

    pub fn validate(&self, m: &Manifold) -> Result<()> {
        m.validate(&self.base)?;
        let ok = match (m, &self.frame) {
            (Manifold::Euclidean { dim: 3 }, GroupElement::So3(_)) => true,
            (Manifold::Euclidean { dim: 2 }, GroupElement::So2(_)) => true,
            (Manifold::Circle, GroupElement::So2(_)) => true,
            (Manifold::Sphere2, GroupElement::So3(f)) => {
                (f.column(2) - self.base).norm() <= FRAME_TOL
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("fiber point does not belong to the {m} frame bundle")))
        }
    }

    /// Right action of a structure-group element.
    pub fn act(&self, m: &Manifold, g: &GroupElement) -> Result<FiberPoint> {
        if g.tag() != m.structure_group() {
            return Err(Error::invalid(format!(
                "{m} fibers are acted on by {}, got an {} element",
                m.structure_group(),
                g.tag()
            )));
        }
        let frame = match (m, &self.frame) {
            (Manifold::Circle, f) => *f,
            (Manifold::Sphere2, GroupElement::So3(f)) => {
                let theta = g.angle().unwrap_or(0.0);
                GroupElement::So3(f * GroupElement::rot_z(theta).so3_matrix())
            }
            (_, f) => f.compose(g)?,
        };
        Ok(FiberPoint { base: self.base, frame })
    }
}

/// Structure-group element relating the frame of `p1` to that of `p2`.
///
/// On the sphere this is the rotation about the normal obtained from
/// `F1ᵀ F2 = Rz(α) Ry(β) Rz(γ)` as `α + γ`, which is invariant under the
/// right SO(2) action on both arguments.
pub fn relative_element(m: &Manifold, p1: &FiberPoint, p2: &FiberPoint) -> Result<GroupElement> {
    match (m, &p1.frame, &p2.frame) {
        (Manifold::Circle, _, _) => Ok(GroupElement::so2(0.0)),
        (Manifold::Sphere2, GroupElement::So3(f1), GroupElement::So3(f2)) => {
            Ok(GroupElement::so2(sphere_relative_angle(f1, f2)))
        }
        (_, a, b) => a.inverse().compose(b),
    }
}

pub(crate) fn sphere_relative_angle(f1: &Matrix3<f64>, f2: &Matrix3<f64>) -> f64 {
    let r = f1.transpose() * f2;
    (r[(1, 0)] - r[(0, 1)]).atan2(r[(0, 0)] + r[(1, 1)])
}

/// Product heat kernel on the frame bundle: base kernel times the group
/// kernel at the relative frame element.
pub fn bundle_kernel(spec: &KernelSpec, m: &Manifold, p1: &FiberPoint, p2: &FiberPoint) -> Result<f64> {
    p1.validate(m)?;
    p2.validate(m)?;
    let base = spec.base(m, &p1.base, &p2.base)?;
    if m.trivial_structure() {
        return Ok(base);
    }
    let g = relative_element(m, p1, p2)?;
    Ok(base * spec.group(m.structure_group(), &g)?)
}
