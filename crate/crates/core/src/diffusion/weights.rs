use serde::{Deserialize, Serialize};

use super::graph::GeometricGraph;
use crate::error::{Error, Result};
use crate::manifold::base_heat_kernel;

/// Edge weights aligned with the graph's neighbor lists.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeWeights {
    values: Vec<Vec<f64>>,
}

impl EdgeWeights {
    pub fn unit(graph: &GeometricGraph) -> Self {
        Self::constant(graph, 1.0)
    }

    pub fn constant(graph: &GeometricGraph, w: f64) -> Self {
        EdgeWeights { values: (0..graph.len()).map(|i| vec![w; graph.neighbors(i).len()]).collect() }
    }

    /// `w_ij = k_{t0}(r_i, r_j)`, evaluated once per undirected edge.
    pub fn heat(graph: &GeometricGraph, t0: f64, l_base: u32) -> Result<Self> {
        let m = graph.manifold();
        let mut values: Vec<Vec<f64>> = (0..graph.len()).map(|i| vec![0.0; graph.neighbors(i).len()]).collect();
        for i in 0..graph.len() {
            for (k, n) in graph.neighbors(i).iter().enumerate() {
                if n.index > i {
                    let w = base_heat_kernel(&m, t0, graph.position(i), graph.position(n.index), l_base)?;
                    values[i][k] = w;
                    let back = graph.neighbors(n.index).iter().position(|b| b.index == i).unwrap();
                    values[n.index][back] = w;
                }
            }
        }
        Self::from_values(graph, values)
    }

    pub fn from_fn(graph: &GeometricGraph, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let values = (0..graph.len())
            .map(|i| graph.neighbors(i).iter().map(|n| f(i, n.index)).collect())
            .collect();
        Self::from_values(graph, values)
    }

    /// Validates symmetry and nonnegativity.
    pub fn from_values(graph: &GeometricGraph, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != graph.len() {
            return Err(Error::invalid("one weight list per node is required"));
        }
        for i in 0..graph.len() {
            if values[i].len() != graph.neighbors(i).len() {
                return Err(Error::invalid(format!("node {i} has the wrong number of edge weights")));
            }
            for (k, n) in graph.neighbors(i).iter().enumerate() {
                let w = values[i][k];
                if !(w >= 0.0 && w.is_finite()) {
                    return Err(Error::invalid(format!("weight on edge ({i}, {}) is {w}", n.index)));
                }
                let back = graph.neighbors(n.index).iter().position(|b| b.index == i).unwrap();
                let w2 = values[n.index][back];
                if (w - w2).abs() > 1e-14 * w.abs().max(w2.abs()) {
                    return Err(Error::invalid(format!(
                        "asymmetric weights on edge ({i}, {}): {w} vs {w2}",
                        n.index
                    )));
                }
            }
        }
        Ok(EdgeWeights { values })
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    /// `max_i Σ_j w_ij`.
    pub fn max_degree(&self) -> f64 {
        self.values.iter().map(|v| v.iter().sum::<f64>()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightRule {
    /// Base heat kernel at reference time `t0`.
    Heat {
        t0: f64,
        #[serde(default = "default_l_base")]
        l_base: u32,
    },
    Unit,
}

fn default_l_base() -> u32 {
    16
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyConfig {
    pub weights: WeightRule,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_true")]
    pub casimir_term: bool,
}

fn default_kappa() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig { weights: WeightRule::Heat { t0: 0.1, l_base: 16 }, kappa: 1.0, casimir_term: true }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::invalid(format!("kappa must be positive, got {}", self.kappa)));
        }
        if let WeightRule::Heat { t0, .. } = self.weights {
            if !(t0 > 0.0 && t0.is_finite()) {
                return Err(Error::invalid(format!("reference time t0 must be positive, got {t0}")));
            }
        }
        Ok(())
    }

    pub fn edge_weights(&self, graph: &GeometricGraph) -> Result<EdgeWeights> {
        self.validate()?;
        match self.weights {
            WeightRule::Unit => Ok(EdgeWeights::unit(graph)),
            WeightRule::Heat { t0, l_base } => EdgeWeights::heat(graph, t0, l_base),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::build_graph;
    use crate::manifold::{sample_points, Manifold};

    #[test]
    fn heat_weights_are_symmetric() {
        for m in [Manifold::Sphere2, Manifold::euclidean(3).unwrap(), Manifold::Circle] {
            let g = build_graph(m, sample_points(&m, 20, 1), 0.8).unwrap();
            let w = EdgeWeights::heat(&g, 0.1, 12).unwrap();
            for i in 0..g.len() {
                for (k, n) in g.neighbors(i).iter().enumerate() {
                    let back = g.neighbors(n.index).iter().position(|b| b.index == i).unwrap();
                    assert_eq!(w.node(i)[k], w.node(n.index)[back]);
                }
            }
        }
    }

    #[test]
    fn asymmetric_weights_error() {
        let m = Manifold::euclidean(2).unwrap();
        let g = build_graph(m, sample_points(&m, 10, 2), 0.6).unwrap();
        assert!(g.edge_count() > 0);
        assert!(EdgeWeights::from_fn(&g, |i, j| if i < j { 1.0 } else { 2.0 }).is_err());
        assert!(EdgeWeights::from_fn(&g, |i, j| (i + j) as f64).is_ok());
        assert!(EdgeWeights::from_fn(&g, |_, _| -1.0).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = EnergyConfig::default();
        assert!(c.validate().is_ok());
        c.kappa = 0.0;
        assert!(c.validate().is_err());
    }
}
