use std::sync::Arc;

use nalgebra::Vector3;
use rand::Rng;

use super::field::FeatureField;
use crate::diffusion::{build_graph, GeometricGraph};
use crate::error::Result;
use crate::group::{reduce_angle, GroupElement, GroupTag, RepSpace};
use crate::manifold::{sphere_relative_angle, Manifold, Point};

/// A global isometry: a rotation (SO(d) on Euclidean space, SO(3) on the
/// sphere, SO(2) on the circle) followed by a translation on Euclidean space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Isometry {
    pub rotation: GroupElement,
    pub translation: Vector3<f64>,
}

impl Isometry {
    pub fn rotation(rotation: GroupElement) -> Self {
        Isometry { rotation, translation: Vector3::zeros() }
    }

    /// Random isometry; Euclidean translations are drawn from `[-1, 1]^d`.
    pub fn random<R: Rng + ?Sized>(m: &Manifold, rng: &mut R) -> Self {
        match m {
            Manifold::Euclidean { dim } => {
                let rotation = GroupElement::random(m.structure_group(), rng);
                let mut translation = Vector3::zeros();
                for k in 0..*dim {
                    translation[k] = 2.0 * rng.random::<f64>() - 1.0;
                }
                Isometry { rotation, translation }
            }
            Manifold::Sphere2 => Isometry::rotation(GroupElement::random(GroupTag::So3, rng)),
            Manifold::Circle => Isometry::rotation(GroupElement::random(GroupTag::So2, rng)),
        }
    }

    pub fn apply_point(&self, m: &Manifold, x: &Point) -> Point {
        match (m, &self.rotation) {
            (Manifold::Circle, g) => Vector3::new(reduce_angle(x.x + g.angle().unwrap_or(0.0)), 0.0, 0.0),
            (Manifold::Euclidean { dim: 2 }, GroupElement::So2(t)) => {
                let (s, c) = t.sin_cos();
                Vector3::new(c * x.x - s * x.y + self.translation.x, s * x.x + c * x.y + self.translation.y, 0.0)
            }
            (Manifold::Sphere2, g) => {
                let y = g.act(x);
                y / y.norm()
            }
            (_, g) => g.act(x) + self.translation,
        }
    }

    /// Structure-group element `e_i` with which node features transform:
    /// `h'_i = ρ(e_i) h_i`, where `e_i = F_new⁻¹ Q F_old` relates the image of
    /// the old reference frame to the new one.
    pub fn node_action(&self, m: &Manifold, old_frame: &GroupElement, new_frame: &GroupElement) -> GroupElement {
        match (m, old_frame, new_frame) {
            (Manifold::Circle, _, _) => GroupElement::so2(0.0),
            (Manifold::Sphere2, GroupElement::So3(fo), GroupElement::So3(fn_)) => {
                let moved = self.rotation.so3_matrix() * fo;
                GroupElement::so2(sphere_relative_angle(fn_, &moved))
            }
            (_, fo, fn_) => {
                let q = self.rotation.compose(fo).expect("rotation matches the frame group");
                fn_.inverse().compose(&q).expect("frames share a group")
            }
        }
    }

    /// Moved graph plus the per-node feature actions.
    pub fn apply_graph(&self, graph: &GeometricGraph) -> Result<(Arc<GeometricGraph>, Vec<GroupElement>)> {
        let m = graph.manifold();
        let moved: Vec<Point> = graph.positions().iter().map(|x| self.apply_point(&m, x)).collect();
        let new_graph = build_graph(m, moved, graph.cutoff())?;
        let actions = (0..graph.len())
            .map(|i| self.node_action(&m, graph.frame(i), new_graph.frame(i)))
            .collect();
        Ok((Arc::new(new_graph), actions))
    }

    /// Transformed scene: moved positions and features `ρ_V(e_i) h_i`.
    pub fn apply_field(&self, field: &FeatureField) -> Result<(FeatureField, Vec<GroupElement>)> {
        let canonical = field.canonical()?;
        let (graph, actions) = self.apply_graph(field.graph())?;
        let space = field.space();
        let mut data = Vec::with_capacity(field.data().len());
        for (i, e) in actions.iter().enumerate() {
            data.extend(space.apply(e, canonical.node(i))?);
        }
        Ok((FeatureField::new(graph, space.clone(), data)?, actions))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivarianceReport {
    pub max_deviation: f64,
    pub deviations: Vec<f64>,
    pub tol: f64,
    pub pass: bool,
}

/// Compare `F(g·input)` with `ρ_out(g)·F(input)` over the given isometries.
///
/// `f` returns per-node vectors in `out_space`, expressed in the graph's
/// default gauge. The deviation for one isometry is the largest node error
/// divided by `1 + max_i ‖F(input)_i‖`.
pub fn check_equivariance<F>(
    input: &FeatureField,
    out_space: &RepSpace,
    isometries: &[Isometry],
    tol: f64,
    f: F,
) -> Result<EquivarianceReport>
where
    F: Fn(&FeatureField) -> Result<Vec<Vec<f64>>>,
{
    let base = f(input)?;
    let scale = 1.0
        + base
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
    let mut deviations = Vec::with_capacity(isometries.len());
    for iso in isometries {
        let (moved, actions) = iso.apply_field(input)?;
        let out = f(&moved)?;
        let mut worst: f64 = 0.0;
        for ((o, b), e) in out.iter().zip(&base).zip(&actions) {
            let expected = out_space.apply(e, b)?;
            let err = o.iter().zip(&expected).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            worst = worst.max(err);
        }
        deviations.push(worst / scale);
    }
    let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
    Ok(EquivarianceReport { max_deviation, deviations, tol, pass: max_deviation <= tol })
}
