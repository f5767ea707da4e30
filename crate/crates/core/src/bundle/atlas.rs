use std::f64::consts::PI;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupTag};
use crate::manifold::{sphere_relative_angle, FiberPoint, Manifold, Point};

/// Chart labels. Euclidean space and the circle have one global chart; the
/// sphere has the complements of its two poles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartId {
    Global,
    North,
    South,
}

impl std::fmt::Display for ChartId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ChartId::Global => "global",
            ChartId::North => "north",
            ChartId::South => "south",
        };
        f.write_str(s)
    }
}

/// Distance in `1 ± z` below which a sphere point counts as a chart's
/// excluded pole.
const POLE_MARGIN: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atlas {
    manifold: Manifold,
}

impl Atlas {
    pub fn new(manifold: Manifold) -> Self {
        Atlas { manifold }
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn charts(&self) -> &'static [ChartId] {
        match self.manifold {
            Manifold::Sphere2 => &[ChartId::North, ChartId::South],
            _ => &[ChartId::Global],
        }
    }

    pub fn contains(&self, chart: ChartId, x: &Point) -> bool {
        match (self.manifold, chart) {
            (Manifold::Sphere2, ChartId::North) => x.z > -1.0 + POLE_MARGIN,
            (Manifold::Sphere2, ChartId::South) => x.z < 1.0 - POLE_MARGIN,
            (Manifold::Sphere2, ChartId::Global) => false,
            (_, ChartId::Global) => true,
            _ => false,
        }
    }

    /// Chart assigned to a point; sphere points covered by both charts go
    /// north.
    pub fn default_chart(&self, x: &Point) -> ChartId {
        match self.manifold {
            Manifold::Sphere2 => {
                if self.contains(ChartId::North, x) {
                    ChartId::North
                } else {
                    ChartId::South
                }
            }
            _ => ChartId::Global,
        }
    }

    fn check(&self, chart: ChartId, x: &Point) -> Result<()> {
        self.manifold.validate(x)?;
        if self.contains(chart, x) {
            Ok(())
        } else {
            Err(Error::Domain(format!("point {:?} is outside the {chart} chart", x.as_slice())))
        }
    }

    /// Reference frame of `chart` at `x`.
    ///
    /// Sphere frames are the orthonormalized stereographic coordinate bases:
    /// the north frame is `Rz(φ) Ry(θ) Rz(−φ)`, the rotation carrying `ẑ` to
    /// `x` along the meridian, and the south frame is its image under the
    /// half-turn about the x axis.
    pub fn frame(&self, chart: ChartId, x: &Point) -> Result<GroupElement> {
        self.check(chart, x)?;
        Ok(match (self.manifold, chart) {
            (Manifold::Sphere2, ChartId::North) => GroupElement::So3(north_frame(x)),
            (Manifold::Sphere2, _) => {
                let flip = GroupElement::rot_x(PI).so3_matrix();
                GroupElement::So3(flip * north_frame(&(flip * x)))
            }
            (Manifold::Euclidean { dim: 3 }, _) => GroupElement::identity(GroupTag::So3),
            _ => GroupElement::identity(GroupTag::So2),
        })
    }

    pub fn reference_point(&self, chart: ChartId, x: &Point) -> Result<FiberPoint> {
        Ok(FiberPoint { base: *x, frame: self.frame(chart, x)? })
    }

    /// `g^{BA}_x`, which maps A-frame coordinates of a tangent vector to its
    /// B-frame coordinates.
    pub fn transition_function(&self, a: ChartId, b: ChartId, x: &Point) -> Result<GroupElement> {
        let fa = self.frame(a, x)?;
        let fb = self.frame(b, x)?;
        Ok(match (fa, fb) {
            (GroupElement::So3(fa), GroupElement::So3(fb)) if self.manifold == Manifold::Sphere2 => {
                GroupElement::so2(sphere_relative_angle(&fb, &fa))
            }
            _ => fb.inverse().compose(&fa)?,
        })
    }
}

fn north_frame(x: &Point) -> Matrix3<f64> {
    // Rz(φ) Ry(θ) Rz(−φ) written without evaluating φ, which is undefined at
    // the pole: with c = cos θ = z and (x, y) = sin θ (cos φ, sin φ),
    // the tangent part is I + (c − 1)/(sin²θ) · ((x,y)(x,y)ᵀ) on the plane.
    let (px, py, c) = (x.x, x.y, x.z);
    let k = 1.0 / (1.0 + c);
    Matrix3::new(
        1.0 - k * px * px,
        -k * px * py,
        px,
        -k * px * py,
        1.0 - k * py * py,
        py,
        -px,
        -py,
        c,
    )
}
