use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{gauss_legendre, reduce_angle, GroupTag};

/// A point stored in three slots: `(θ, 0, 0)` on the circle, `(x, y, 0)` on
/// the plane, the embedded coordinates otherwise.
pub type Point = Vector3<f64>;

const SPHERE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Manifold {
    Circle,
    Sphere2,
    Euclidean { dim: usize },
}

impl Manifold {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 2 || dim == 3 {
            Ok(Manifold::Euclidean { dim })
        } else {
            Err(Error::invalid(format!("Euclidean dimension must be 2 or 3, got {dim}")))
        }
    }

    /// Number of coordinates used to serialize a point.
    pub fn coord_dim(&self) -> usize {
        match self {
            Manifold::Circle => 1,
            Manifold::Sphere2 => 3,
            Manifold::Euclidean { dim } => *dim,
        }
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match self {
            Manifold::Circle => 1,
            Manifold::Sphere2 => 2,
            Manifold::Euclidean { dim } => *dim,
        }
    }

    /// Structure group of the frame bundle; the circle carries the trivial
    /// group, represented by the trivial SO(2) irrep only.
    pub fn structure_group(&self) -> GroupTag {
        match self {
            Manifold::Euclidean { dim: 3 } => GroupTag::So3,
            _ => GroupTag::So2,
        }
    }

    /// Whether the structure group is trivial.
    pub fn trivial_structure(&self) -> bool {
        matches!(self, Manifold::Circle)
    }

    pub fn point(&self, coords: &[f64]) -> Result<Point> {
        if coords.len() != self.coord_dim() {
            return Err(Error::invalid(format!(
                "{self} points need {} coordinates, got {}",
                self.coord_dim(),
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("point has non-finite coordinates"));
        }
        let p = match self {
            Manifold::Circle => Vector3::new(reduce_angle(coords[0]), 0.0, 0.0),
            Manifold::Sphere2 => Vector3::new(coords[0], coords[1], coords[2]),
            Manifold::Euclidean { dim } => {
                let mut v = Vector3::zeros();
                v.as_mut_slice()[..*dim].copy_from_slice(coords);
                v
            }
        };
        self.validate(&p)?;
        Ok(p)
    }

    pub fn coords(&self, p: &Point) -> Vec<f64> {
        p.as_slice()[..self.coord_dim()].to_vec()
    }

    pub fn validate(&self, p: &Point) -> Result<()> {
        match self {
            Manifold::Sphere2 => {
                let n = p.norm();
                if (n - 1.0).abs() > SPHERE_TOL {
                    return Err(Error::invalid(format!(
                        "sphere point has norm {n}, expected 1 within {SPHERE_TOL:e}"
                    )));
                }
            }
            Manifold::Circle => {
                if !(0.0..TAU).contains(&p.x) || p.y != 0.0 || p.z != 0.0 {
                    return Err(Error::invalid("circle point must be an angle in [0, 2π)"));
                }
            }
            Manifold::Euclidean { dim: 2 } => {
                if p.z != 0.0 {
                    return Err(Error::invalid("planar point has a third coordinate"));
                }
            }
            Manifold::Euclidean { .. } => {}
        }
        Ok(())
    }

    /// Total Riemannian volume, `None` for Euclidean space.
    pub fn volume(&self) -> Option<f64> {
        match self {
            Manifold::Circle => Some(TAU),
            Manifold::Sphere2 => Some(4.0 * PI),
            Manifold::Euclidean { .. } => None,
        }
    }
}

impl std::fmt::Display for Manifold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Manifold::Circle => write!(f, "S1"),
            Manifold::Sphere2 => write!(f, "S2"),
            Manifold::Euclidean { dim } => write!(f, "R{dim}"),
        }
    }
}

/// Distance without validating the inputs.
pub(crate) fn distance_unchecked(m: &Manifold, x: &Point, y: &Point) -> f64 {
    match m {
        Manifold::Circle => {
            let d = (x.x - y.x).abs() % TAU;
            d.min(TAU - d)
        }
        Manifold::Sphere2 => x.cross(y).norm().atan2(x.dot(y)),
        Manifold::Euclidean { .. } => (x - y).norm(),
    }
}

pub fn geodesic_distance(m: &Manifold, x: &Point, y: &Point) -> Result<f64> {
    m.validate(x)?;
    m.validate(y)?;
    Ok(distance_unchecked(m, x, y))
}

/// Seeded points: uniform angles on the circle, normalized Gaussians on the
/// sphere, uniform in the unit cube for Euclidean space.
pub fn sample_points(m: &Manifold, n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| match m {
            Manifold::Circle => Vector3::new(reduce_angle(rng.random::<f64>() * TAU), 0.0, 0.0),
            Manifold::Sphere2 => loop {
                let v = Vector3::new(
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                );
                let n = v.norm();
                if n > 1e-8 {
                    break v / n;
                }
            },
            Manifold::Euclidean { dim } => {
                let mut v = Vector3::zeros();
                for k in 0..*dim {
                    v[k] = rng.random::<f64>();
                }
                v
            }
        })
        .collect()
}

/// Tensor product grid on S²: Gauss–Legendre in `cos θ` times equispaced `φ`,
/// exact for polynomials of total degree `degree`. Weights sum to `4π`.
pub fn sphere_grid(degree: u32) -> Vec<(Point, f64)> {
    let n_gl = degree as usize / 2 + 1;
    let n_phi = degree as usize + 1;
    let (xs, ws) = gauss_legendre(n_gl);
    let mut out = Vec::with_capacity(n_gl * n_phi);
    for (z, w) in xs.iter().zip(&ws) {
        let s = (1.0 - z * z).max(0.0).sqrt();
        for k in 0..n_phi {
            let phi = TAU * k as f64 / n_phi as f64;
            out.push((Vector3::new(s * phi.cos(), s * phi.sin(), *z), w * TAU / n_phi as f64));
        }
    }
    out
}

/// Equispaced circle grid exact for trigonometric polynomials of degree
/// `degree`. Weights sum to `2π`.
pub fn circle_grid(degree: u32) -> Vec<(Point, f64)> {
    let n = degree as usize + 1;
    (0..n)
        .map(|k| (Vector3::new(TAU * k as f64 / n as f64, 0.0, 0.0), TAU / n as f64))
        .collect()
}
