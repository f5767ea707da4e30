use std::collections::HashMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::config::{MessageConfig, Plan};
use crate::bundle::FeatureField;
use crate::error::{Error, Result};
use crate::group::{clebsch_gordan, haar_rule, irrep_matrix, GroupElement, IrrepLabel, QuadratureRule, RepSpace};
use crate::manifold::KernelSpec;

/// Per-node message vectors with bookkeeping about how they were computed.
#[derive(Clone, Debug)]
pub struct MessageResult {
    pub space: RepSpace,
    pub values: Vec<Vec<f64>>,
    /// Band limit of the Haar rule that was used.
    pub quadrature_order: u32,
    /// Largest change of node 0's message under the rule one degree finer.
    pub residual: Option<f64>,
    pub path: Option<Vec<u32>>,
    /// Wall-clock milliseconds per phase.
    pub timings: Vec<(&'static str, f64)>,
}

impl MessageResult {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn flat(&self) -> Vec<f64> {
        self.values.concat()
    }
}

/// `A_i(g) = Σ_j k(p_i, p̃_j·g) h̃_j` for all channels of V at once, where
/// `p̃_j = p_j·r_ij⁻¹` is neighbor j's frame aligned with node i's and
/// `h̃_j = ρ(r_ij) h_j` its features in that frame.
pub fn atomic_basis(i: usize, field: &FeatureField, spec: &KernelSpec, g: &GroupElement) -> Result<Vec<f64>> {
    spec.validate()?;
    let field = field.canonical()?;
    if i >= field.len() {
        return Err(Error::invalid(format!("node {i} out of range for {} nodes", field.len())));
    }
    let m = field.graph().manifold();
    if g.tag() != m.structure_group() {
        return Err(Error::invalid(format!("element of {} on a bundle over {m}", g.tag())));
    }
    let b = aligned_sum(&field, spec, i)?;
    let k = group_factor(spec, &field, g)?;
    Ok(b.into_iter().map(|x| k * x).collect())
}

/// `Σ_j k^M(x_i, x_j) ρ(r_ij) h_j`.
fn aligned_sum(field: &FeatureField, spec: &KernelSpec, i: usize) -> Result<Vec<f64>> {
    let graph = field.graph();
    let m = graph.manifold();
    let mut out = vec![0.0; field.space().dim()];
    for n in graph.neighbors(i) {
        let k = spec.base(&m, graph.position(i), graph.position(n.index))?;
        let h = field.space().apply(&n.transport, field.node(n.index))?;
        for (o, x) in out.iter_mut().zip(&h) {
            *o += k * x;
        }
    }
    Ok(out)
}

/// `k^G(g)`; the circle carries no group factor.
fn group_factor(spec: &KernelSpec, field: &FeatureField, g: &GroupElement) -> Result<f64> {
    let m = field.graph().manifold();
    if m.trivial_structure() {
        Ok(1.0)
    } else {
        spec.group(m.structure_group(), g)
    }
}

/// Aligned neighbor sums and group-kernel values on the rule nodes.
struct Table {
    field: FeatureField,
    rule: QuadratureRule,
    sums: Vec<Vec<f64>>,
    kernel: Vec<f64>,
    rho: HashMap<IrrepLabel, Vec<DMatrix<f64>>>,
}

impl Table {
    /// Tabulates every node, or only `only` when given.
    fn build(
        field: &FeatureField,
        spec: &KernelSpec,
        order: u32,
        irreps: &[IrrepLabel],
        only: Option<usize>,
    ) -> Result<Self> {
        let field = field.canonical()?;
        let m = field.graph().manifold();
        let tag = m.structure_group();
        let rule = haar_rule(tag, if m.trivial_structure() { 0 } else { order });
        let f = &field;
        let sums = (0..field.len())
            .into_par_iter()
            .map(|i| if only.is_some_and(|o| o != i) { Ok(Vec::new()) } else { aligned_sum(f, spec, i) })
            .collect::<Result<Vec<_>>>()?;
        let kernel = rule.nodes().iter().map(|g| group_factor(spec, f, g)).collect::<Result<Vec<_>>>()?;
        let mut rho = HashMap::new();
        for irrep in irreps {
            if irrep.group != tag {
                continue;
            }
            let mats = rule.nodes().iter().map(|g| irrep_matrix(irrep, g)).collect::<Result<Vec<_>>>()?;
            rho.insert(*irrep, mats);
        }
        Ok(Table { field, rule, sums, kernel, rho })
    }

    /// Channel `c` of `A_i(g_q)`.
    fn atomic(&self, i: usize, c: usize, q: usize) -> Vec<f64> {
        let range = self.field.space().channels()[c].range();
        let k = self.kernel[q];
        self.sums[i][range].iter().map(|x| k * x).collect()
    }

    fn rho(&self, irrep: &IrrepLabel, q: usize) -> &DMatrix<f64> {
        &self.rho[irrep][q]
    }

    /// `Σ_q w_q ρ_λ(g_q)ᵀ A^c_i(g_q)` before damping.
    fn project_channel(&self, i: usize, c: usize) -> Vec<f64> {
        let irrep = self.field.space().channels()[c].irrep;
        let mut acc = DVector::zeros(irrep.dim());
        for (q, w) in self.rule.weights().iter().enumerate() {
            let a = DVector::from_vec(self.atomic(i, c, q));
            acc += self.rho(&irrep, q).tr_mul(&a) * *w;
        }
        acc.data.into()
    }

    fn eval(&self, i: usize, plan: &Plan, cfg: &MessageConfig, spec: &KernelSpec) -> Vec<f64> {
        let space = self.field.space();
        let damp = |irrep: &IrrepLabel| {
            if cfg.casimir_damping {
                (-spec.t * irrep.casimir_value()).exp()
            } else {
                1.0
            }
        };
        match plan {
            Plan::Pairwise => {
                let mut out = Vec::with_capacity(space.dim());
                for (c, ch) in space.channels().iter().enumerate() {
                    let d = damp(&ch.irrep);
                    out.extend(self.project_channel(i, c).into_iter().map(|v| d * v));
                }
                out
            }
            Plan::Scalar { tuples } if cfg.order == 1 => {
                tuples.iter().map(|t| self.project_channel(i, t[0])[0]).collect()
            }
            Plan::Tensor { channels, output, .. } if cfg.order == 1 => {
                let d = damp(output);
                self.project_channel(i, channels[0]).into_iter().map(|v| d * v).collect()
            }
            Plan::Scalar { tuples } => {
                let mut out = vec![0.0; tuples.len()];
                for (q, w) in self.rule.weights().iter().enumerate() {
                    let mut cache: HashMap<usize, f64> = HashMap::new();
                    for (o, t) in out.iter_mut().zip(tuples) {
                        let mut p = 1.0;
                        for &c in t {
                            p *= *cache.entry(c).or_insert_with(|| self.atomic(i, c, q)[0]);
                        }
                        *o += w * p;
                    }
                }
                out
            }
            Plan::Tensor { channels, output, path } => {
                let degrees: Vec<u32> = channels.iter().map(|&c| space.channels()[c].irrep.degree).collect();
                let mut targets = path.clone();
                targets.push(output.degree);
                let mut acc = DVector::zeros(output.dim());
                for (q, w) in self.rule.weights().iter().enumerate() {
                    let mut v = self.atomic(i, channels[0], q);
                    let mut left = degrees[0];
                    for (k, &mu) in targets.iter().enumerate() {
                        let right = self.atomic(i, channels[k + 1], q);
                        v = clebsch_gordan(left, degrees[k + 1], mu).couple(&v, &right);
                        left = mu;
                    }
                    acc += self.rho(output, q).tr_mul(&DVector::from_vec(v)) * *w;
                }
                let d = damp(output);
                acc.iter().map(|v| d * v).collect()
            }
        }
    }
}

fn needed_irreps(plan: &Plan, space: &RepSpace) -> Vec<IrrepLabel> {
    match plan {
        Plan::Pairwise => space.irreps(),
        Plan::Scalar { .. } => vec![IrrepLabel::trivial(space.group())],
        Plan::Tensor { channels, output, .. } => {
            let mut v: Vec<IrrepLabel> = channels.iter().map(|&c| space.channels()[c].irrep).collect();
            v.push(*output);
            v
        }
    }
}

fn run(field: &FeatureField, spec: &KernelSpec, cfg: &MessageConfig, plan: Plan, order: u32) -> Result<MessageResult> {
    spec.validate()?;
    let mut timings = Vec::new();
    let irreps = needed_irreps(&plan, field.space());

    let clock = Instant::now();
    let table = Table::build(field, spec, order, &irreps, None)?;
    timings.push(("kernel", clock.elapsed().as_secs_f64() * 1e3));

    let clock = Instant::now();
    let values: Vec<Vec<f64>> = (0..table.field.len())
        .into_par_iter()
        .map(|i| table.eval(i, &plan, cfg, spec))
        .collect();
    timings.push(("quadrature", clock.elapsed().as_secs_f64() * 1e3));

    let clock = Instant::now();
    let residual = if values.is_empty() || field.graph().manifold().trivial_structure() {
        None
    } else {
        let finer = Table::build(&table.field, spec, table.rule.l_exact() + 1, &irreps, Some(0))?;
        let check = finer.eval(0, &plan, cfg, spec);
        Some(check.iter().zip(&values[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    };
    timings.push(("residual", clock.elapsed().as_secs_f64() * 1e3));

    let path = match &plan {
        Plan::Tensor { path, .. } => Some(path.clone()),
        _ => None,
    };
    Ok(MessageResult {
        space: plan.output_space(field.space())?,
        values,
        quadrature_order: table.rule.l_exact(),
        residual,
        path,
        timings,
    })
}

/// `m_i = e^{−t·Cas} Σ_q w_q ρ_V(g_q)ᵀ A_i(g_q)`.
pub fn pairwise_message(field: &FeatureField, spec: &KernelSpec, cfg: &MessageConfig) -> Result<MessageResult> {
    let plan = Plan::Pairwise;
    let m = field.graph().manifold();
    let required = cfg.required_order(&plan, spec, &m, field.space());
    let order = cfg.certified_order(required)?;
    run(field, spec, cfg, plan, order)
}

/// Order-n message: scalar-channel products or Clebsch–Gordan contraction
/// of n atomic-basis factors, integrated over the structure group.
pub fn higher_order_message(field: &FeatureField, spec: &KernelSpec, cfg: &MessageConfig) -> Result<MessageResult> {
    let plan = cfg.plan(field.space())?;
    let m = field.graph().manifold();
    let required = cfg.required_order(&plan, spec, &m, field.space());
    let order = cfg.certified_order(required)?;
    run(field, spec, cfg, plan, order)
}

/// Same as [`higher_order_message`] with the rule band limit forced to
/// `order`, certified or not.
pub fn higher_order_message_at(
    field: &FeatureField,
    spec: &KernelSpec,
    cfg: &MessageConfig,
    order: u32,
) -> Result<MessageResult> {
    let plan = cfg.plan(field.space())?;
    run(field, spec, cfg, plan, order)
}
