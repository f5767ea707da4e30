use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Matrix3, Unit, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The compact structure groups supported by the library.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupTag {
    So2,
    So3,
}

impl GroupTag {
    /// Dimension of the Lie algebra.
    pub fn algebra_dim(self) -> usize {
        match self {
            GroupTag::So2 => 1,
            GroupTag::So3 => 3,
        }
    }
}

impl std::fmt::Display for GroupTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GroupTag::So2 => write!(f, "SO(2)"),
            GroupTag::So3 => write!(f, "SO(3)"),
        }
    }
}

/// An element of SO(2) (stored as an angle in `[0, 2π)`) or SO(3) (stored as
/// a rotation matrix).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GroupElement {
    So2(f64),
    So3(Matrix3<f64>),
}

/// Reduce an angle into `[0, 2π)`.
pub fn reduce_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl GroupElement {
    pub fn identity(tag: GroupTag) -> Self {
        match tag {
            GroupTag::So2 => GroupElement::So2(0.0),
            GroupTag::So3 => GroupElement::So3(Matrix3::identity()),
        }
    }

    pub fn so2(theta: f64) -> Self {
        GroupElement::So2(reduce_angle(theta))
    }

    pub fn rot_x(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        GroupElement::So3(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn rot_y(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        GroupElement::So3(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn rot_z(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        GroupElement::So3(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// `Rz(α)·Ry(β)·Rz(γ)`.
    pub fn from_euler(alpha: f64, beta: f64, gamma: f64) -> Self {
        let m = Self::rot_z(alpha).so3_matrix() * Self::rot_y(beta).so3_matrix()
            * Self::rot_z(gamma).so3_matrix();
        GroupElement::So3(m)
    }

    /// Rotation by `angle` about `axis` (normalized internally).
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let rot = UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle);
        GroupElement::So3(rot.to_rotation_matrix().into_inner())
    }

    /// Wrap a 3×3 matrix, checking orthogonality and orientation.
    pub fn try_from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let ortho = (m.transpose() * m - Matrix3::identity()).norm();
        let det = m.determinant();
        if ortho > 1e-10 || (det - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!(
                "matrix is not a rotation (‖RᵀR − I‖ = {ortho:.3e}, det = {det:.6})"
            )));
        }
        Ok(GroupElement::So3(m))
    }

    pub fn tag(&self) -> GroupTag {
        match self {
            GroupElement::So2(_) => GroupTag::So2,
            GroupElement::So3(_) => GroupTag::So3,
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match self {
            GroupElement::So2(t) => Some(*t),
            GroupElement::So3(_) => None,
        }
    }

    /// The defining matrix. Panics on SO(2); use [`GroupElement::matrix`] for
    /// the tag-agnostic form.
    pub fn so3_matrix(&self) -> Matrix3<f64> {
        match self {
            GroupElement::So3(m) => *m,
            GroupElement::So2(_) => panic!("so3_matrix called on an SO(2) element"),
        }
    }

    /// Defining (fundamental) matrix: 2×2 for SO(2), 3×3 for SO(3).
    pub fn matrix(&self) -> nalgebra::DMatrix<f64> {
        match self {
            GroupElement::So2(t) => {
                let (s, c) = t.sin_cos();
                let m = Matrix2::new(c, -s, s, c);
                nalgebra::DMatrix::from_iterator(2, 2, m.iter().copied())
            }
            GroupElement::So3(m) => nalgebra::DMatrix::from_iterator(3, 3, m.iter().copied()),
        }
    }

    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        match (self, other) {
            (GroupElement::So2(a), GroupElement::So2(b)) => Ok(GroupElement::so2(a + b)),
            (GroupElement::So3(a), GroupElement::So3(b)) => Ok(GroupElement::So3(a * b)),
            _ => Err(Error::invalid(format!(
                "cannot compose {} with {}",
                self.tag(),
                other.tag()
            ))),
        }
    }

    pub fn inverse(&self) -> GroupElement {
        match self {
            GroupElement::So2(t) => GroupElement::so2(-t),
            GroupElement::So3(m) => GroupElement::So3(m.transpose()),
        }
    }

    /// Distance from another element in the defining representation.
    pub fn distance(&self, other: &GroupElement) -> f64 {
        (self.matrix() - other.matrix()).norm()
    }

    /// Unit quaternion `(w, x, y, z)` of an SO(3) element (Shepperd's method).
    pub fn quaternion(&self) -> [f64; 4] {
        let m = self.so3_matrix();
        let tr = m.trace();
        let candidates = [tr, m[(0, 0)], m[(1, 1)], m[(2, 2)]];
        let (best, _) = candidates
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let q = match best {
            0 => {
                let s = 2.0 * (1.0 + tr).sqrt();
                [
                    0.25 * s,
                    (m[(2, 1)] - m[(1, 2)]) / s,
                    (m[(0, 2)] - m[(2, 0)]) / s,
                    (m[(1, 0)] - m[(0, 1)]) / s,
                ]
            }
            1 => {
                let s = 2.0 * (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt();
                [
                    (m[(2, 1)] - m[(1, 2)]) / s,
                    0.25 * s,
                    (m[(0, 1)] + m[(1, 0)]) / s,
                    (m[(0, 2)] + m[(2, 0)]) / s,
                ]
            }
            2 => {
                let s = 2.0 * (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt();
                [
                    (m[(0, 2)] - m[(2, 0)]) / s,
                    (m[(0, 1)] + m[(1, 0)]) / s,
                    0.25 * s,
                    (m[(1, 2)] + m[(2, 1)]) / s,
                ]
            }
            _ => {
                let s = 2.0 * (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt();
                [
                    (m[(1, 0)] - m[(0, 1)]) / s,
                    (m[(0, 2)] + m[(2, 0)]) / s,
                    (m[(1, 2)] + m[(2, 1)]) / s,
                    0.25 * s,
                ]
            }
        };
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        [q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm]
    }

    /// ZYZ Euler angles `(α, β, γ)` with `α, γ ∈ [0, 2π)` and `β ∈ [0, π]`.
    ///
    /// Extracted from the quaternion so that `α + γ` stays well conditioned
    /// near `β = 0` and `α − γ` near `β = π`. When `β` is `0` or `π` to
    /// rounding the split is fixed by `γ = 0`.
    pub fn euler_angles(&self) -> (f64, f64, f64) {
        let [w, x, y, z] = self.quaternion();
        let cos_half = w.hypot(z);
        let sin_half = x.hypot(y);
        let beta = 2.0 * sin_half.atan2(cos_half);
        const GIMBAL: f64 = 1e-15;
        let (alpha, gamma) = if sin_half <= GIMBAL {
            (2.0 * z.atan2(w), 0.0)
        } else if cos_half <= GIMBAL {
            (2.0 * (-x).atan2(y), 0.0)
        } else {
            let sum = 2.0 * z.atan2(w);
            let diff = 2.0 * (-x).atan2(y);
            (0.5 * (sum + diff), 0.5 * (sum - diff))
        };
        (reduce_angle(alpha), beta.min(PI), reduce_angle(gamma))
    }

    /// The class (rotation) angle in `[0, π]`.
    pub fn rotation_angle(&self) -> f64 {
        match self {
            GroupElement::So2(t) => {
                let t = reduce_angle(*t);
                if t > PI {
                    TAU - t
                } else {
                    t
                }
            }
            GroupElement::So3(_) => {
                let [w, x, y, z] = self.quaternion();
                2.0 * (x * x + y * y + z * z).sqrt().atan2(w.abs())
            }
        }
    }

    /// Haar-uniform random element.
    pub fn random<R: Rng + ?Sized>(tag: GroupTag, rng: &mut R) -> Self {
        match tag {
            GroupTag::So2 => GroupElement::so2(rng.random::<f64>() * TAU),
            GroupTag::So3 => {
                let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
                let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
                    q[0], q[1], q[2], q[3],
                ));
                GroupElement::So3(q.to_rotation_matrix().into_inner())
            }
        }
    }

    /// Defining-representation action on a point of the plane or space.
    pub fn act(&self, v: &Vector3<f64>) -> Vector3<f64> {
        match self {
            GroupElement::So2(t) => {
                let (s, c) = t.sin_cos();
                Vector3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
            }
            GroupElement::So3(m) => m * v,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn compose_with_identity() {
        let g = GroupElement::from_euler(0.3, 1.1, 2.0);
        let id = GroupElement::identity(GroupTag::So3);
        assert!(id.compose(&g).unwrap().distance(&g) < 1e-15);
        let h = GroupElement::so2(1.3);
        assert_eq!(GroupElement::identity(GroupTag::So2).compose(&h).unwrap(), h);
    }

    #[test]
    fn so2_angles_add() {
        let g = GroupElement::so2(1.0).compose(&GroupElement::so2(2.0)).unwrap();
        assert!((g.angle().unwrap() - 3.0).abs() < 1e-15);
        let wrap = GroupElement::so2(5.0).compose(&GroupElement::so2(2.0)).unwrap();
        assert!((wrap.angle().unwrap() - (7.0 - TAU)).abs() < 1e-15);
    }

    #[test]
    fn z_rotations_form_a_subgroup() {
        let (a1, a2) = (4.0, 3.5);
        let g = GroupElement::rot_z(a1).compose(&GroupElement::rot_z(a2)).unwrap();
        assert!(g.distance(&GroupElement::rot_z(reduce_angle(a1 + a2))) < 1e-14);
    }

    #[test]
    fn mismatched_tags_are_rejected() {
        let err = GroupElement::so2(0.1).compose(&GroupElement::rot_x(0.1));
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn inverses() {
        assert_eq!(GroupElement::so2(0.0).inverse(), GroupElement::so2(0.0));
        let t = 1.25;
        assert!((GroupElement::so2(t).inverse().angle().unwrap() - (TAU - t)).abs() < 1e-15);
        let g = GroupElement::from_euler(0.4, 2.2, 5.1);
        assert_eq!(g.inverse().so3_matrix(), g.so3_matrix().transpose());
        let e = g.compose(&g.inverse()).unwrap();
        assert!(e.distance(&GroupElement::identity(GroupTag::So3)) < 1e-12);
    }

    #[test]
    fn euler_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let g = GroupElement::random(GroupTag::So3, &mut rng);
            let (a, b, c) = g.euler_angles();
            assert!((0.0..TAU).contains(&a) && (0.0..TAU).contains(&c));
            assert!((0.0..=PI).contains(&b));
            let back = GroupElement::from_euler(a, b, c);
            assert!(back.distance(&g) < 1e-13, "{}", back.distance(&g));
        }
    }

    #[test]
    fn euler_gimbal_cases_use_zero_gamma() {
        let (a, b, c) = GroupElement::rot_z(1.2).euler_angles();
        assert!((a - 1.2).abs() < 1e-14 && b.abs() < 1e-14 && c == 0.0);
        let g = GroupElement::from_euler(0.7, PI, 0.0);
        let (a, b, c) = g.euler_angles();
        assert!((b - PI).abs() < 1e-14 && c == 0.0);
        assert!(GroupElement::from_euler(a, b, c).distance(&g) < 1e-14);
    }

    #[test]
    fn random_rotations_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let m = GroupElement::random(GroupTag::So3, &mut rng).so3_matrix();
            assert!((m.transpose() * m - Matrix3::identity()).norm() < 1e-12);
            assert!((m.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_reflections() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(GroupElement::try_from_matrix(m).is_err());
    }
}
