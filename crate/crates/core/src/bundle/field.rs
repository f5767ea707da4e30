use std::sync::Arc;

use super::atlas::{Atlas, ChartId};
use crate::diffusion::GeometricGraph;
use crate::error::{Error, Result};
use crate::group::RepSpace;
use crate::manifold::{relative_element, FiberPoint};

/// Per-node feature vectors in a representation space, each expressed in the
/// gauge of a chart containing the node.
#[derive(Clone, Debug)]
pub struct FeatureField {
    graph: Arc<GeometricGraph>,
    space: RepSpace,
    data: Vec<f64>,
    charts: Vec<ChartId>,
}

impl PartialEq for FeatureField {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.graph, &other.graph) || *self.graph == *other.graph)
            && self.space == other.space
            && self.data == other.data
            && self.charts == other.charts
    }
}

fn check_space(graph: &GeometricGraph, space: &RepSpace) -> Result<()> {
    let m = graph.manifold();
    if space.group() != m.structure_group() {
        return Err(Error::invalid(format!(
            "features on {m} transform under {}, not {}",
            m.structure_group(),
            space.group()
        )));
    }
    if m.trivial_structure() && !space.is_scalar() {
        return Err(Error::invalid(format!("{m} carries the trivial group; only scalar channels are allowed")));
    }
    Ok(())
}

impl FeatureField {
    /// Field from a flat node-major buffer in each node's default chart.
    pub fn new(graph: Arc<GeometricGraph>, space: RepSpace, data: Vec<f64>) -> Result<Self> {
        let charts = (0..graph.len()).map(|i| graph.chart(i)).collect();
        Self::with_charts(graph, space, data, charts)
    }

    pub fn with_charts(
        graph: Arc<GeometricGraph>,
        space: RepSpace,
        data: Vec<f64>,
        charts: Vec<ChartId>,
    ) -> Result<Self> {
        check_space(&graph, &space)?;
        if data.len() != graph.len() * space.dim() {
            return Err(Error::invalid(format!(
                "feature buffer has {} entries, expected {} nodes × {}",
                data.len(),
                graph.len(),
                space.dim()
            )));
        }
        if charts.len() != graph.len() {
            return Err(Error::invalid("one chart id per node is required"));
        }
        let atlas = Atlas::new(graph.manifold());
        for (i, c) in charts.iter().enumerate() {
            if !atlas.contains(*c, graph.position(i)) {
                return Err(Error::Domain(format!("node {i} is not covered by the {c} chart")));
            }
        }
        Ok(FeatureField { graph, space, data, charts })
    }

    pub fn from_nodes(graph: Arc<GeometricGraph>, space: RepSpace, nodes: &[Vec<f64>]) -> Result<Self> {
        for (i, v) in nodes.iter().enumerate() {
            if v.len() != space.dim() {
                return Err(Error::invalid(format!(
                    "node {i} has {} features, expected {}",
                    v.len(),
                    space.dim()
                )));
            }
        }
        Self::new(graph, space, nodes.concat())
    }

    pub fn zeros(graph: Arc<GeometricGraph>, space: RepSpace) -> Result<Self> {
        let n = graph.len() * space.dim();
        Self::new(graph, space, vec![0.0; n])
    }

    pub fn graph(&self) -> &Arc<GeometricGraph> {
        &self.graph
    }

    pub fn space(&self) -> &RepSpace {
        &self.space
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        let d = self.space.dim();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.node(i).to_vec()).collect()
    }

    pub fn chart(&self, i: usize) -> ChartId {
        self.charts[i]
    }

    pub fn charts(&self) -> &[ChartId] {
        &self.charts
    }

    /// Same graph and space, new values in the default charts.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.graph.clone(), self.space.clone(), data)
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.len())
            .map(|i| self.node(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Re-express node `i` in `target`: `f^B = ρ(g^{BA}) f^A`.
    pub fn gauge_transform(&self, i: usize, target: ChartId) -> Result<Self> {
        let mut out = self.clone();
        out.gauge_transform_in_place(i, target)?;
        Ok(out)
    }

    fn gauge_transform_in_place(&mut self, i: usize, target: ChartId) -> Result<()> {
        let current = self.charts[i];
        if current == target {
            return Ok(());
        }
        let atlas = Atlas::new(self.graph.manifold());
        let g = atlas.transition_function(current, target, self.graph.position(i))?;
        let d = self.space.dim();
        let v = self.space.apply(&g, &self.data[i * d..(i + 1) * d])?;
        self.data[i * d..(i + 1) * d].copy_from_slice(&v);
        self.charts[i] = target;
        Ok(())
    }

    /// Every node expressed in the graph's default chart.
    pub fn canonical(&self) -> Result<Self> {
        let mut out = self.clone();
        for i in 0..self.len() {
            out.gauge_transform_in_place(i, self.graph.chart(i))?;
        }
        Ok(out)
    }

    /// `h(p)` for a frame `p` over node `i`: with `p = p_ref · g` this is
    /// `ρ(g)⁻¹` applied to the stored vector.
    pub fn evaluate_equivariant(&self, i: usize, p: &FiberPoint) -> Result<Vec<f64>> {
        let m = self.graph.manifold();
        let x = self.graph.position(i);
        if (p.base - x).norm() > 1e-12 {
            return Err(Error::invalid(format!("fiber point is not over node {i}")));
        }
        p.validate(&m)?;
        let reference = Atlas::new(m).reference_point(self.charts[i], x)?;
        let g = relative_element(&m, &reference, p)?;
        self.space.apply(&g.inverse(), self.node(i))
    }

    /// Section associated with an equivariant function on the frame bundle.
    pub fn from_equivariant<H>(
        graph: Arc<GeometricGraph>,
        space: RepSpace,
        h: H,
        charts: Option<Vec<ChartId>>,
    ) -> Result<Self>
    where
        H: Fn(&FiberPoint) -> Vec<f64>,
    {
        let charts = charts.unwrap_or_else(|| (0..graph.len()).map(|i| graph.chart(i)).collect());
        if charts.len() != graph.len() {
            return Err(Error::invalid("one chart id per node is required"));
        }
        let atlas = Atlas::new(graph.manifold());
        let mut data = Vec::with_capacity(graph.len() * space.dim());
        for (i, c) in charts.iter().enumerate() {
            let v = h(&atlas.reference_point(*c, graph.position(i))?);
            if v.len() != space.dim() {
                return Err(Error::invalid(format!("equivariant function returned {} values", v.len())));
            }
            data.extend(v);
        }
        Self::with_charts(graph, space, data, charts)
    }
}
