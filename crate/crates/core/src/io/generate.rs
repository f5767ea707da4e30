use std::sync::Arc;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bundle::FeatureField;
use crate::diffusion::{build_graph, GeometricGraph};
use crate::error::{Error, Result};
use crate::group::{GroupTag, RepSpace};
use crate::manifold::{sample_points, spherical_harmonics, Manifold};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldInit {
    Zeros,
    #[default]
    Random,
    /// A known equivariant function of the point cloud.
    TestPattern,
}

impl std::str::FromStr for FieldInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zeros" => Ok(FieldInit::Zeros),
            "random" => Ok(FieldInit::Random),
            "test_pattern" | "test-pattern" | "pattern" => Ok(FieldInit::TestPattern),
            _ => Err(Error::invalid(format!("unknown initialization `{s}`"))),
        }
    }
}

/// Seeded point cloud with derived edges and initialized features.
pub fn gen_graph(
    m: Manifold,
    n: usize,
    cutoff: f64,
    seed: u64,
    space: &RepSpace,
    init: FieldInit,
) -> Result<FeatureField> {
    if n == 0 {
        return Err(Error::invalid("a graph needs at least one node"));
    }
    let graph = Arc::new(build_graph(m, sample_points(&m, n, seed), cutoff)?);
    match init {
        FieldInit::Zeros => FeatureField::zeros(graph, space.clone()),
        FieldInit::Random => {
            // A separate stream from the positions.
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f1e1d);
            let data = (0..n * space.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            FeatureField::new(graph, space.clone(), data)
        }
        FieldInit::TestPattern => test_pattern(&graph, space),
    }
}

/// `(Re aᵐ, Im aᵐ)` for a complex number `a = (re, im)`.
fn complex_power(re: f64, im: f64, m: u32) -> [f64; 2] {
    let (mut x, mut y) = (1.0, 0.0);
    for _ in 0..m {
        (x, y) = (x * re - y * im, x * im + y * re);
    }
    [x, y]
}

/// Per-channel solid-harmonic pattern. Positions are taken relative to the
/// centroid, which makes the field invariant under translations; each
/// channel gets its own Gaussian envelope so channels differ.
pub fn test_pattern(graph: &Arc<GeometricGraph>, space: &RepSpace) -> Result<FeatureField> {
    let m = graph.manifold();
    let n = graph.len();
    let centroid: Vector3<f64> = graph.positions().iter().sum::<Vector3<f64>>() / n as f64;
    let mut data = Vec::with_capacity(n * space.dim());
    for i in 0..n {
        let x = graph.position(i);
        for (c, ch) in space.channels().iter().enumerate() {
            let deg = ch.irrep.degree;
            let envelope = |r2: f64| (-(c as f64 + 1.0) * r2).exp();
            match m {
                Manifold::Euclidean { .. } if space.group() == GroupTag::So3 => {
                    let v = x - centroid;
                    let r = v.norm();
                    let e = envelope(r * r);
                    if r == 0.0 {
                        let y0 = spherical_harmonics(0, &Vector3::z())[0];
                        data.extend((0..ch.irrep.dim()).map(|k| if deg == 0 && k == 0 { e * y0 } else { 0.0 }));
                    } else {
                        let scale = e * r.powi(deg as i32);
                        data.extend(spherical_harmonics(deg, &(v / r)).into_iter().map(|y| scale * y));
                    }
                }
                Manifold::Euclidean { .. } => {
                    let v = x - centroid;
                    let e = envelope(v.norm_squared());
                    push_so2(&mut data, deg, v.x, v.y, e);
                }
                Manifold::Sphere2 => {
                    // Tangential part of the centroid in the node's frame.
                    let f = graph.frame(i).so3_matrix();
                    let t = centroid - x * centroid.dot(x);
                    let (a, b) = (t.dot(&f.column(0)), t.dot(&f.column(1)));
                    let e = envelope(t.norm_squared()) * (1.0 + x.dot(&centroid));
                    push_so2(&mut data, deg, a, b, e);
                }
                Manifold::Circle => {
                    let (s, co) = graph.positions().iter().fold((0.0, 0.0), |(s, c), p| (s + p.x.sin(), c + p.x.cos()));
                    let mean = s.atan2(co);
                    data.push((c as f64 + 1.0) * (x.x - mean).cos());
                }
            }
        }
    }
    FeatureField::new(graph.clone(), space.clone(), data)
}

fn push_so2(data: &mut Vec<f64>, deg: u32, re: f64, im: f64, scale: f64) {
    if deg == 0 {
        data.push(scale * (1.0 + re * re + im * im));
    } else {
        let [x, y] = complex_power(re, im, deg);
        data.push(scale * x);
        data.push(scale * y);
    }
}
