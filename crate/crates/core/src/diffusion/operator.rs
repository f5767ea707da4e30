use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use super::graph::GeometricGraph;
use super::weights::{EdgeWeights, EnergyConfig};
use crate::bundle::FeatureField;
use crate::error::{Error, Result};
use crate::group::{GroupElement, RepSpace};

/// Largest `n · dim(V)` for which dense operators are assembled.
pub const DENSE_LIMIT: usize = 4096;

fn is_identity(g: &GroupElement) -> bool {
    match g {
        GroupElement::So2(t) => *t == 0.0,
        GroupElement::So3(m) => *m == nalgebra::Matrix3::identity(),
    }
}

/// `ρ_V(r_ij) h_j`: neighbor features expressed in node i's gauge.
pub(crate) fn transported(space: &RepSpace, g: &GroupElement, v: &[f64]) -> Result<Vec<f64>> {
    if is_identity(g) || space.is_scalar() {
        Ok(v.to_vec())
    } else {
        space.apply(g, v)
    }
}

fn check_weights(graph: &GeometricGraph, weights: &EdgeWeights) -> Result<()> {
    for i in 0..graph.len() {
        if weights.node(i).len() != graph.neighbors(i).len() {
            return Err(Error::invalid("edge weights do not match the graph"));
        }
    }
    Ok(())
}

/// `Σ_j c_ij (ρ(r_ij) h_j − h_i)` per node, summed in ascending `j`.
fn neighbor_sum<C>(field: &FeatureField, coef: C) -> Result<Vec<Vec<f64>>>
where
    C: Fn(usize, usize) -> f64 + Sync,
{
    let graph = field.graph();
    let space = field.space();
    (0..field.len())
        .into_par_iter()
        .map(|i| {
            let hi = field.node(i);
            let mut acc = vec![0.0; hi.len()];
            for (k, n) in graph.neighbors(i).iter().enumerate() {
                let c = coef(i, k);
                let hj = transported(space, &n.transport, field.node(n.index))?;
                for ((a, x), y) in acc.iter_mut().zip(&hj).zip(hi) {
                    *a += c * (x - y);
                }
            }
            Ok(acc)
        })
        .collect()
}

/// Matrix-free `Δᴱ h = −L h − Cas h`, node-major.
pub fn apply_laplacian(field: &FeatureField, weights: &EdgeWeights) -> Result<Vec<f64>> {
    let field = field.canonical()?;
    check_weights(field.graph(), weights)?;
    let cas = field.space().casimir_diagonal();
    let sums = neighbor_sum(&field, |i, k| weights.node(i)[k])?;
    let mut out = Vec::with_capacity(field.data().len());
    for (i, s) in sums.iter().enumerate() {
        for ((v, c), h) in s.iter().zip(&cas).zip(field.node(i)) {
            out.push(v - c * h);
        }
    }
    Ok(out)
}

fn dense_size(graph: &GeometricGraph, space: &RepSpace) -> Result<usize> {
    let size = graph.len() * space.dim();
    if size > DENSE_LIMIT {
        return Err(Error::UnsupportedSize { size, limit: DENSE_LIMIT });
    }
    Ok(size)
}

/// Dense connection Laplacian `L` (positive semidefinite) and the
/// block-diagonal Casimir, so that `Δᴱ = −(L + Cas)`.
pub fn laplacian_parts(
    graph: &GeometricGraph,
    weights: &EdgeWeights,
    space: &RepSpace,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let size = dense_size(graph, space)?;
    check_weights(graph, weights)?;
    let d = space.dim();
    let mut l = DMatrix::zeros(size, size);
    for i in 0..graph.len() {
        let ws = weights.node(i);
        let deg: f64 = ws.iter().sum();
        for a in 0..d {
            l[(i * d + a, i * d + a)] += deg;
        }
        for (n, w) in graph.neighbors(i).iter().zip(ws) {
            let t = space.matrix(&n.transport)?;
            let mut block = l.view_mut((i * d, n.index * d), (d, d));
            block -= t * *w;
        }
    }
    let cas = DMatrix::from_diagonal(&DVector::from_vec(
        (0..graph.len()).flat_map(|_| space.casimir_diagonal()).collect(),
    ));
    Ok((l, cas))
}

/// Dense `Δᴱ` for `n · dim(V) ≤ DENSE_LIMIT`.
pub fn generalized_laplacian(graph: &GeometricGraph, weights: &EdgeWeights, space: &RepSpace) -> Result<DMatrix<f64>> {
    let (l, cas) = laplacian_parts(graph, weights, space)?;
    Ok(-(l + cas))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyTerms {
    pub total: f64,
    pub dirichlet: f64,
    pub casimir: f64,
}

/// Twisted Dirichlet energy `κ Σ_{i<j} w_ij ‖h_i − ρ(r_ij) h_j‖² + ½ Σ ⟨Cas h_i, h_i⟩`.
pub fn polyakov_energy(field: &FeatureField, weights: &EdgeWeights, cfg: &EnergyConfig) -> Result<EnergyTerms> {
    cfg.validate()?;
    let field = field.canonical()?;
    let graph = field.graph();
    check_weights(graph, weights)?;
    let space = field.space();
    let mut dirichlet = 0.0;
    for i in 0..graph.len() {
        for (n, w) in graph.neighbors(i).iter().zip(weights.node(i)) {
            if n.index <= i {
                continue;
            }
            let hj = transported(space, &n.transport, field.node(n.index))?;
            let sq: f64 = field.node(i).iter().zip(&hj).map(|(a, b)| (a - b) * (a - b)).sum();
            dirichlet += w * sq;
        }
    }
    dirichlet *= cfg.kappa;
    let casimir = if cfg.casimir_term {
        let cas = space.casimir_diagonal();
        0.5 * (0..graph.len())
            .map(|i| field.node(i).iter().zip(&cas).map(|(h, c)| c * h * h).sum::<f64>())
            .sum::<f64>()
    } else {
        0.0
    };
    Ok(EnergyTerms { total: dirichlet + casimir, dirichlet, casimir })
}

/// `0.9 / (2 max_i Σ_j w_ij + cas_max)`, below which explicit Euler does not
/// increase the energy.
pub fn stable_dt(weights: &EdgeWeights, space: &RepSpace) -> f64 {
    let denom = 2.0 * weights.max_degree() + space.max_casimir();
    if denom > 0.0 {
        0.9 / denom
    } else {
        0.9
    }
}

/// `h ← h + dt Δᴱ h`.
pub fn euler_step(field: &FeatureField, dt: f64, weights: &EdgeWeights) -> Result<FeatureField> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    let field = field.canonical()?;
    check_weights(field.graph(), weights)?;
    let cas = field.space().casimir_diagonal();
    let sums = neighbor_sum(&field, |i, k| weights.node(i)[k])?;
    let mut data = Vec::with_capacity(field.data().len());
    for (i, s) in sums.iter().enumerate() {
        for ((v, c), h) in s.iter().zip(&cas).zip(field.node(i)) {
            data.push(h + dt * (v - c * h));
        }
    }
    field.with_data(data)
}

/// Gradient step on the Dirichlet term alone: `h ← h − 2κ dt L h`.
pub fn dirichlet_step(field: &FeatureField, dt: f64, weights: &EdgeWeights, kappa: f64) -> Result<FeatureField> {
    let field = field.canonical()?;
    check_weights(field.graph(), weights)?;
    let sums = neighbor_sum(&field, |i, k| weights.node(i)[k])?;
    let scale = 2.0 * kappa * dt;
    let mut data = Vec::with_capacity(field.data().len());
    for (i, s) in sums.iter().enumerate() {
        for (v, h) in s.iter().zip(field.node(i)) {
            data.push(h + scale * v);
        }
    }
    field.with_data(data)
}

/// `e^{tΔᴱ} h` through the eigendecomposition of the dense operator.
pub fn propagate_exact(field: &FeatureField, t: f64, weights: &EdgeWeights) -> Result<FeatureField> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("propagation time must be nonnegative, got {t}")));
    }
    let field = field.canonical()?;
    let op = generalized_laplacian(field.graph(), weights, field.space())?;
    if t == 0.0 {
        return Ok(field);
    }
    let prop = symmetric_expm(&op, t);
    let h = DVector::from_column_slice(field.data());
    field.with_data((prop * h).as_slice().to_vec())
}

/// `exp(t A)` for symmetric `A`.
pub fn symmetric_expm(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let q = &eig.eigenvectors;
    let d = eig.eigenvalues.map(|l| (t * l).exp());
    q * DMatrix::from_diagonal(&d) * q.transpose()
}

/// State of a node as seen by an attention function.
pub struct NodeState<'a> {
    pub index: usize,
    pub position: &'a crate::manifold::Point,
    pub features: &'a [f64],
}

/// Attentional flow step `h_i ← h_i + dt Σ_j a(σ_j, σ_i)(h_j − h_i)` with
/// neighbor features carried into node i's gauge.
pub fn beltrami_step<A>(field: &FeatureField, attention: A, dt: f64) -> Result<FeatureField>
where
    A: Fn(&NodeState, &NodeState) -> f64 + Sync,
{
    let field = field.canonical()?;
    let graph = field.graph().clone();
    let state = |i: usize| NodeState { index: i, position: graph.position(i), features: field.node(i) };
    let coef = |i: usize, k: usize| {
        let j = graph.neighbors(i)[k].index;
        attention(&state(j), &state(i))
    };
    let sums = neighbor_sum(&field, coef)?;
    let mut data = Vec::with_capacity(field.data().len());
    for (i, s) in sums.iter().enumerate() {
        for (v, h) in s.iter().zip(field.node(i)) {
            if !v.is_finite() {
                return Err(Error::invalid(format!("attention produced a non-finite update at node {i}")));
            }
            data.push(h + dt * v);
        }
    }
    field.with_data(data)
}
