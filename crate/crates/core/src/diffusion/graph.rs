use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use crate::bundle::{Atlas, ChartId};
use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::manifold::{distance_unchecked, relative_element, FiberPoint, Manifold, Point};

/// Tolerance on the cutoff comparison, so that pairs placed exactly at the
/// cutoff survive rounding in the distance.
const CUTOFF_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
    /// Structure-group element `r_ij` relating node i's reference frame to
    /// node j's; `ρ(r_ij)` carries j's features into i's gauge.
    pub transport: GroupElement,
}

/// Radius graph over manifold points with per-node reference frames.
#[derive(Clone, Debug)]
pub struct GeometricGraph {
    manifold: Manifold,
    positions: Vec<Point>,
    cutoff: f64,
    charts: Vec<ChartId>,
    frames: Vec<GroupElement>,
    neighbors: Vec<Vec<Neighbor>>,
}

impl PartialEq for GeometricGraph {
    fn eq(&self, other: &Self) -> bool {
        self.manifold == other.manifold
            && self.positions == other.positions
            && self.cutoff == other.cutoff
            && self.charts == other.charts
            && self.edges() == other.edges()
    }
}

pub fn build_graph(manifold: Manifold, positions: Vec<Point>, cutoff: f64) -> Result<GeometricGraph> {
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(Error::invalid(format!("cutoff must be positive, got {cutoff}")));
    }
    if manifold == Manifold::Sphere2 && cutoff >= FRAC_PI_2 {
        return Err(Error::invalid(format!(
            "sphere cutoff {cutoff} violates the chart-coverage rule r_c < π/2"
        )));
    }
    for (i, p) in positions.iter().enumerate() {
        manifold
            .validate(p)
            .map_err(|e| Error::invalid(format!("node {i}: {e}")))?;
    }
    let atlas = Atlas::new(manifold);
    let charts: Vec<ChartId> = positions.iter().map(|p| atlas.default_chart(p)).collect();
    let frames = positions
        .iter()
        .zip(&charts)
        .map(|(p, c)| atlas.frame(*c, p))
        .collect::<Result<Vec<_>>>()?;
    let fibers: Vec<FiberPoint> = positions
        .iter()
        .zip(&frames)
        .map(|(p, f)| FiberPoint { base: *p, frame: *f })
        .collect();
    let neighbors = (0..positions.len())
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for j in 0..positions.len() {
                if i == j {
                    continue;
                }
                let d = distance_unchecked(&manifold, &positions[i], &positions[j]);
                if d <= cutoff + CUTOFF_SLACK * cutoff.max(1.0) {
                    let transport = relative_element(&manifold, &fibers[i], &fibers[j])?;
                    out.push(Neighbor { index: j, distance: d, transport });
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GeometricGraph { manifold, positions, cutoff, charts, frames, neighbors })
}

impl GeometricGraph {
    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> &Point {
        &self.positions[i]
    }

    /// Chart in which node `i` expresses its features by default.
    pub fn chart(&self, i: usize) -> ChartId {
        self.charts[i]
    }

    pub fn frame(&self, i: usize) -> &GroupElement {
        &self.frames[i]
    }

    pub fn reference_point(&self, i: usize) -> FiberPoint {
        FiberPoint { base: self.positions[i], frame: self.frames[i] }
    }

    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.neighbors[i]
    }

    /// Undirected edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, ns) in self.neighbors.iter().enumerate() {
            for n in ns.iter().filter(|n| n.index > i) {
                out.push((i, n.index));
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }
}
