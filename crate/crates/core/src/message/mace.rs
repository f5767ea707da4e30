//! Closed-form reference path on Euclidean(3): spherical expansion of the
//! base kernel, A-features from radial tables and real harmonics, the group
//! integral reduced to the character algebra of SO(3), and Clebsch–Gordan
//! contraction.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{MessageConfig, Plan};
use super::engine::{higher_order_message_at, MessageResult};
use crate::bundle::FeatureField;
use crate::error::{Error, Result};
use crate::group::{clebsch_gordan, RepSpace};
use crate::manifold::{legendre_all, spherical_harmonics, sphere_grid, KernelSpec, Manifold, Point};

/// Truncated harmonic expansion of a base kernel.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelExpansion {
    /// `k(x, y) = Σ_l c_l P_l(x·y)` on S².
    Sphere { coefficients: Vec<f64> },
    /// `k(x, y) = c_0 + 2Σ_n c_n cos(n(θ_x − θ_y))` on the circle.
    Circle { coefficients: Vec<f64> },
    /// `k(x, y) = Σ_{lm} c_lm(|x − y|) Y_lm((x − y)/|x − y|)` on R³, tabulated
    /// at fixed radii. Row `r` holds `(l, m)` at index `l² + l + m`.
    Radial { l_max: u32, radii: Vec<f64>, table: Vec<Vec<f64>> },
}

/// Expands the base factor of `spec` up to degree `l_max`. Euclidean(3)
/// needs the radii at which the radial profiles are tabulated.
pub fn expand_kernel(spec: &KernelSpec, m: &Manifold, l_max: u32, radii: &[f64]) -> Result<KernelExpansion> {
    spec.validate()?;
    let multiplier = |l: u32, eigen: f64| match &spec.coefficients {
        Some(c) => c.get(l as usize).copied().unwrap_or(0.0),
        None => (-eigen * spec.t).exp(),
    };
    match m {
        Manifold::Sphere2 => Ok(KernelExpansion::Sphere {
            coefficients: (0..=l_max)
                .map(|l| {
                    if l > spec.l_base {
                        0.0
                    } else {
                        (2 * l + 1) as f64 / (4.0 * PI) * multiplier(l, (l * (l + 1)) as f64)
                    }
                })
                .collect(),
        }),
        Manifold::Circle => Ok(KernelExpansion::Circle {
            coefficients: (0..=l_max)
                .map(|n| if n > spec.l_base { 0.0 } else { multiplier(n, (n * n) as f64) / (2.0 * PI) })
                .collect(),
        }),
        Manifold::Euclidean { dim: 3 } => {
            if radii.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
                return Err(Error::invalid("radii must be finite and non-negative"));
            }
            let grid = sphere_grid(2 * l_max + 12);
            let origin = Point::zeros();
            let table = radii
                .par_iter()
                .map(|&r| {
                    let mut row = vec![0.0; ((l_max + 1) * (l_max + 1)) as usize];
                    for (u, w) in &grid {
                        let k = spec.base(m, &(u * r), &origin)?;
                        for l in 0..=l_max {
                            let start = (l * l) as usize;
                            for (k2, y) in spherical_harmonics(l, u).iter().enumerate() {
                                row[start + k2] += w * k * y;
                            }
                        }
                    }
                    Ok(row)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(KernelExpansion::Radial { l_max, radii: radii.to_vec(), table })
        }
        Manifold::Euclidean { .. } => Err(Error::UnsupportedConfiguration(format!(
            "kernel expansion is available on the circle, S² and R³, not {m}"
        ))),
    }
}

fn radial_row(radii: &[f64], r: f64) -> Result<usize> {
    radii
        .iter()
        .position(|&s| (s - r).abs() <= 1e-9 * r.max(1.0))
        .ok_or_else(|| Error::Domain(format!("radius {r} is not tabulated")))
}

fn direction(d: &Vector3<f64>) -> Vector3<f64> {
    let n = d.norm();
    if n > 0.0 {
        d / n
    } else {
        Vector3::z()
    }
}

impl KernelExpansion {
    pub fn l_max(&self) -> u32 {
        match self {
            KernelExpansion::Sphere { coefficients } | KernelExpansion::Circle { coefficients } => {
                coefficients.len() as u32 - 1
            }
            KernelExpansion::Radial { l_max, .. } => *l_max,
        }
    }

    /// Evaluates the expansion truncated at degree `l` (all terms if `None`).
    pub fn reconstruct(&self, x: &Point, y: &Point, l: Option<u32>) -> Result<f64> {
        let top = l.unwrap_or(self.l_max()).min(self.l_max());
        match self {
            KernelExpansion::Sphere { coefficients } => {
                let p = legendre_all(top, x.dot(y).clamp(-1.0, 1.0));
                Ok(coefficients.iter().zip(&p).map(|(c, p)| c * p).sum())
            }
            KernelExpansion::Circle { coefficients } => {
                let d = x.x - y.x;
                let mut s = coefficients[0];
                for n in 1..=top as usize {
                    s += 2.0 * coefficients[n] * (n as f64 * d).cos();
                }
                Ok(s)
            }
            KernelExpansion::Radial { radii, table, .. } => {
                let d = x - y;
                let row = &table[radial_row(radii, d.norm())?];
                let u = direction(&d);
                let mut s = 0.0;
                for k in 0..=top {
                    let start = (k * k) as usize;
                    for (i, y) in spherical_harmonics(k, &u).iter().enumerate() {
                        s += row[start + i] * y;
                    }
                }
                Ok(s)
            }
        }
    }

    /// Bound on `|k − k_l|` for the expansion truncated at degree `l`.
    pub fn tail_bound(&self, l: u32) -> f64 {
        match self {
            KernelExpansion::Sphere { coefficients } => coefficients.iter().skip(l as usize + 1).fold(0.0, |a, c| a + c.abs()),
            KernelExpansion::Circle { coefficients } => {
                coefficients.iter().skip(l as usize + 1).fold(0.0, |a, c| a + 2.0 * c.abs())
            }
            KernelExpansion::Radial { l_max, table, .. } => table
                .iter()
                .map(|row| {
                    (l + 1..=*l_max)
                        .map(|k| {
                            let start = (k * k) as usize;
                            let norm = row[start..start + (2 * k + 1) as usize]
                                .iter()
                                .map(|c| c * c)
                                .sum::<f64>()
                                .sqrt();
                            norm * ((2 * k + 1) as f64 / (4.0 * PI)).sqrt()
                        })
                        .fold(0.0, |a, b| a + b)
                })
                .fold(0.0, f64::max),
        }
    }
}

/// Coefficients of `(Σ_l a_l χ_l)^n` in the character basis of SO(3).
pub fn character_power(a: &[f64], n: usize) -> Vec<f64> {
    let mut acc = vec![1.0];
    for _ in 0..n {
        let mut next = vec![0.0; acc.len() + a.len() - 1];
        for (l, x) in acc.iter().enumerate() {
            for (m, y) in a.iter().enumerate() {
                if *x == 0.0 || *y == 0.0 {
                    continue;
                }
                for c in l.abs_diff(m)..=l + m {
                    next[c] += x * y;
                }
            }
        }
        acc = next;
    }
    acc
}

/// Message of the same configuration computed without group quadrature.
/// Only Euclidean(3) with SO(3) is supported.
pub fn mace_reference_message(field: &FeatureField, spec: &KernelSpec, cfg: &MessageConfig) -> Result<MessageResult> {
    let graph = field.graph();
    let m = graph.manifold();
    if m != (Manifold::Euclidean { dim: 3 }) {
        return Err(Error::UnsupportedConfiguration(format!(
            "the closed-form reference path needs Euclidean(3), not {m}"
        )));
    }
    spec.validate()?;
    let plan = cfg.plan(field.space())?;
    let space = field.space();
    let mut timings = Vec::new();

    let clock = Instant::now();
    let mut radii: Vec<f64> = (0..graph.len())
        .flat_map(|i| graph.neighbors(i).iter().map(|n| n.distance))
        .collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let l_dir = spec.l_grp;
    let expansion = expand_kernel(spec, &m, l_dir, &radii)?;
    let KernelExpansion::Radial { table, .. } = &expansion else { unreachable!() };
    timings.push(("radial", clock.elapsed().as_secs_f64() * 1e3));

    let clock = Instant::now();
    let a: Vec<f64> = (0..=spec.l_grp)
        .map(|l| (2 * l + 1) as f64 * (-((l * (l + 1)) as f64) * spec.t).exp())
        .collect();
    let power = character_power(&a, cfg.order);
    let gamma = |degree: u32| power.get(degree as usize).copied().unwrap_or(0.0) / (2 * degree + 1) as f64;

    let values: Vec<Vec<f64>> = (0..graph.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            // B_i = Σ_{lm} A_{i,lm}, A_{i,lm} = Σ_j c_lm(r_ij) Y_lm(r̂_ij) h_j.
            let mut b = vec![0.0; space.dim()];
            for n in graph.neighbors(i) {
                let d = graph.position(i) - graph.position(n.index);
                let row = &table[radial_row(&radii, d.norm())?];
                let u = direction(&d);
                let mut k = 0.0;
                for l in 0..=l_dir {
                    let start = (l * l) as usize;
                    for (idx, y) in spherical_harmonics(l, &u).iter().enumerate() {
                        k += row[start + idx] * y;
                    }
                }
                for (o, h) in b.iter_mut().zip(field.node(n.index)) {
                    *o += k * h;
                }
            }
            let channel = |c: usize| &b[space.channels()[c].range()];
            Ok(match &plan {
                Plan::Scalar { tuples } => {
                    let g0 = gamma(0);
                    tuples.iter().map(|t| g0 * t.iter().map(|&c| channel(c)[0]).product::<f64>()).collect()
                }
                Plan::Tensor { channels, output, path } => {
                    let degrees: Vec<u32> = channels.iter().map(|&c| space.channels()[c].irrep.degree).collect();
                    let mut targets = path.clone();
                    targets.push(output.degree);
                    let mut v = channel(channels[0]).to_vec();
                    let mut left = degrees[0];
                    for (k, &mu) in targets.iter().enumerate().take(cfg.order - 1) {
                        v = clebsch_gordan(left, degrees[k + 1], mu).couple(&v, channel(channels[k + 1]));
                        left = mu;
                    }
                    let damp = if cfg.casimir_damping { (-spec.t * output.casimir_value()).exp() } else { 1.0 };
                    let s = damp * gamma(output.degree);
                    v.into_iter().map(|x| s * x).collect()
                }
                Plan::Pairwise => unreachable!("plans from a config are never pairwise"),
            })
        })
        .collect::<Result<_>>()?;
    timings.push(("contraction", clock.elapsed().as_secs_f64() * 1e3));

    let (out_space, path) = match &plan {
        Plan::Scalar { tuples } => (RepSpace::scalars(space.group(), tuples.len())?, None),
        Plan::Tensor { output, path, .. } => {
            (RepSpace::from_degrees(space.group(), &[(output.degree, 1)])?, Some(path.clone()))
        }
        Plan::Pairwise => unreachable!(),
    };
    Ok(MessageResult { space: out_space, values, quadrature_order: 0, residual: None, path, timings })
}

/// Largest disagreement between the quadrature path at each band limit and
/// the closed-form reference.
pub fn band_limit_sweep(
    field: &FeatureField,
    spec: &KernelSpec,
    cfg: &MessageConfig,
    orders: impl IntoIterator<Item = u32>,
) -> Result<Vec<(u32, f64)>> {
    let reference = mace_reference_message(field, spec, cfg)?;
    orders
        .into_iter()
        .map(|l| {
            let q = higher_order_message_at(field, spec, cfg, l)?;
            let err = q
                .values
                .iter()
                .zip(&reference.values)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max);
            Ok((l, err))
        })
        .collect()
}
