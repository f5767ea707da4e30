use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{parse_json, read_file, write_file};
use crate::bundle::{Atlas, ChartId, FeatureField};
use crate::diffusion::build_graph;
use crate::error::{Error, Result};
use crate::group::{GroupTag, RepSpace};
use crate::manifold::Manifold;

/// `{irrep, multiplicity}` entry of a representation declaration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepEntry {
    pub irrep: u32,
    pub multiplicity: usize,
}

pub fn rep_space(group: GroupTag, entries: &[RepEntry]) -> Result<RepSpace> {
    let degrees: Vec<(u32, usize)> = entries.iter().map(|e| (e.irrep, e.multiplicity)).collect();
    RepSpace::from_degrees(group, &degrees)
}

pub fn rep_entries(space: &RepSpace) -> Vec<RepEntry> {
    space
        .blocks()
        .iter()
        .map(|b| RepEntry { irrep: b.irrep.degree, multiplicity: b.multiplicity })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: usize,
    pub position: Vec<f64>,
    pub chart: ChartId,
    pub features: Vec<f64>,
}

/// On-disk graph: positions, cutoff and features. Edges are derived from
/// positions and cutoff; an `edges` list is read only to report how far it
/// disagrees with the derived set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub manifold: Manifold,
    pub cutoff: f64,
    pub rep: Vec<RepEntry>,
    pub nodes: Vec<NodeRecord>,
    #[serde(default, skip_serializing)]
    pub edges: Option<Vec<[usize; 2]>>,
}

impl GraphDocument {
    pub fn from_field(field: &FeatureField) -> Self {
        let graph = field.graph();
        let m = graph.manifold();
        GraphDocument {
            manifold: m,
            cutoff: graph.cutoff(),
            rep: rep_entries(field.space()),
            nodes: (0..field.len())
                .map(|i| NodeRecord {
                    id: i,
                    position: m.coords(graph.position(i)),
                    chart: field.chart(i),
                    features: field.node(i).to_vec(),
                })
                .collect(),
            edges: None,
        }
    }

    /// Rebuilds the graph and field; also returns the number of listed edges
    /// that differ from the derived set.
    pub fn into_field(self) -> Result<(FeatureField, usize)> {
        let m = self.manifold;
        if let Manifold::Euclidean { dim } = m {
            Manifold::euclidean(dim).map_err(|e| Error::validation("manifold.dim", e.to_string()))?;
        }
        let space = rep_space(m.structure_group(), &self.rep).map_err(|e| Error::validation("rep", e.to_string()))?;
        let n = self.nodes.len();
        let mut order: Vec<Option<usize>> = vec![None; n];
        for (k, node) in self.nodes.iter().enumerate() {
            if node.id >= n {
                return Err(Error::validation(
                    format!("nodes[{k}].id"),
                    format!("node id {} is out of range for {n} nodes", node.id),
                ));
            }
            if order[node.id].replace(k).is_some() {
                return Err(Error::validation(format!("nodes[{k}].id"), format!("duplicate node id {}", node.id)));
            }
        }
        let atlas = Atlas::new(m);
        let mut positions = Vec::with_capacity(n);
        let mut charts = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n * space.dim());
        for slot in &order {
            let node = &self.nodes[slot.expect("ids form a permutation")];
            let p = m.point(&node.position).map_err(|e| {
                Error::validation(format!("nodes[id={}].position", node.id), e.to_string())
            })?;
            if !atlas.charts().contains(&node.chart) {
                return Err(Error::validation(
                    format!("nodes[id={}].chart", node.id),
                    format!("unknown chart id `{}` for {m}", node.chart),
                ));
            }
            if !atlas.contains(node.chart, &p) {
                return Err(Error::validation(
                    format!("nodes[id={}].chart", node.id),
                    format!("the {} chart does not cover this node", node.chart),
                ));
            }
            if node.features.len() != space.dim() {
                return Err(Error::validation(
                    format!("nodes[id={}].features", node.id),
                    format!("node {} has {} features, expected dimension {}", node.id, node.features.len(), space.dim()),
                ));
            }
            positions.push(p);
            charts.push(node.chart);
            data.extend_from_slice(&node.features);
        }
        let graph = build_graph(m, positions, self.cutoff).map_err(|e| Error::validation("cutoff", e.to_string()))?;
        let discrepancies = match &self.edges {
            None => 0,
            Some(listed) => {
                let listed: BTreeSet<(usize, usize)> =
                    listed.iter().map(|&[a, b]| (a.min(b), a.max(b))).collect();
                let derived: BTreeSet<(usize, usize)> = graph.edges().into_iter().collect();
                listed.symmetric_difference(&derived).count()
            }
        };
        let field = FeatureField::with_charts(Arc::new(graph), space, data, charts)?;
        Ok((field, discrepancies))
    }
}

pub fn graph_to_json(field: &FeatureField) -> String {
    let mut s = serde_json::to_string_pretty(&GraphDocument::from_field(field)).expect("graph documents serialize");
    s.push('\n');
    s
}

pub fn save_graph(path: &Path, field: &FeatureField) -> Result<()> {
    write_file(path, &graph_to_json(field))
}

/// Parses a graph document; the second value counts listed edges that
/// disagree with the derived ones.
pub fn parse_graph(text: &str, source_name: &str) -> Result<(FeatureField, usize)> {
    let doc: GraphDocument = parse_json(text, source_name)?;
    doc.into_field()
}

pub fn load_graph(path: &Path) -> Result<FeatureField> {
    let text = read_file(path)?;
    let (field, discrepancies) = parse_graph(&text, &path.display().to_string())?;
    if discrepancies > 0 {
        log::warn!(
            "{}: ignored the listed edges; {discrepancies} differ from the edges derived from the cutoff",
            path.display()
        );
    }
    Ok(field)
}
