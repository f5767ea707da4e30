use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{triangle, GroupTag, IrrepLabel, RepSpace};
use crate::manifold::{KernelSpec, Manifold};

/// How the n factors of a higher-order message are multiplied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductMode {
    /// Products of invariant-channel scalars.
    #[default]
    ScalarChannels,
    /// Tensor product of irrep channels contracted to one output irrep by
    /// Clebsch–Gordan coupling.
    TensorContraction,
}

pub const MAX_ORDER: usize = 4;
pub const MAX_OUTPUTS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageConfig {
    /// Correlation order n.
    #[serde(default = "one")]
    pub order: usize,
    #[serde(default)]
    pub mode: ProductMode,
    /// Output irrep degree for tensor contraction.
    #[serde(default)]
    pub output: u32,
    /// Channel feeding each factor; missing entries default to channel 0.
    #[serde(default)]
    pub selectors: Vec<usize>,
    /// Channel tuples for scalar products; defaults to every nondecreasing
    /// tuple of invariant channels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuples: Option<Vec<Vec<usize>>>,
    /// Intermediate degrees `μ_1, …, μ_{n−2}` of the left-to-right coupling;
    /// found by search when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<u32>>,
    /// Band limit of the Haar rule; defaults to the certified minimum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_order: Option<u32>,
    #[serde(default = "yes")]
    pub casimir_damping: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl Default for MessageConfig {
    fn default() -> Self {
        MessageConfig {
            order: 1,
            mode: ProductMode::ScalarChannels,
            output: 0,
            selectors: Vec::new(),
            tuples: None,
            path: None,
            quadrature_order: None,
            casimir_damping: true,
        }
    }
}

/// A checked plan for one message computation.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Plan {
    /// Every channel of V, damped per irrep.
    Pairwise,
    Scalar { tuples: Vec<Vec<usize>> },
    Tensor { channels: Vec<usize>, output: IrrepLabel, path: Vec<u32> },
}

impl Plan {
    pub(crate) fn output_space(&self, space: &RepSpace) -> Result<RepSpace> {
        match self {
            Plan::Pairwise => Ok(space.clone()),
            Plan::Scalar { tuples } => RepSpace::scalars(space.group(), tuples.len()),
            Plan::Tensor { output, .. } => RepSpace::from_degrees(space.group(), &[(output.degree, 1)]),
        }
    }
}

impl MessageConfig {
    pub fn pairwise() -> Self {
        MessageConfig::default()
    }

    pub fn scalar(order: usize) -> Self {
        MessageConfig { order, ..Default::default() }
    }

    pub fn tensor(order: usize, selectors: Vec<usize>, output: u32) -> Self {
        MessageConfig { order, mode: ProductMode::TensorContraction, output, selectors, ..Default::default() }
    }

    fn selector(&self, k: usize) -> usize {
        self.selectors.get(k).copied().unwrap_or(0)
    }

    pub(crate) fn plan(&self, space: &RepSpace) -> Result<Plan> {
        if self.order == 0 || self.order > MAX_ORDER {
            return Err(Error::invalid(format!("correlation order must be in 1..={MAX_ORDER}, got {}", self.order)));
        }
        let channels = space.channels();
        let check_channel = |c: usize| -> Result<IrrepLabel> {
            channels
                .get(c)
                .map(|ch| ch.irrep)
                .ok_or_else(|| Error::invalid(format!("selector {c} is out of range for {} channels", channels.len())))
        };
        match self.mode {
            ProductMode::ScalarChannels => {
                let tuples = match &self.tuples {
                    Some(t) => t.clone(),
                    None => {
                        let trivial: Vec<usize> =
                            (0..channels.len()).filter(|&c| channels[c].irrep.is_trivial()).collect();
                        nondecreasing_tuples(&trivial, self.order)
                    }
                };
                if tuples.is_empty() {
                    return Err(Error::invalid("scalar products need at least one invariant channel"));
                }
                if tuples.len() > MAX_OUTPUTS {
                    return Err(Error::invalid(format!(
                        "{} channel tuples exceed the limit of {MAX_OUTPUTS} outputs per node",
                        tuples.len()
                    )));
                }
                for t in &tuples {
                    if t.len() != self.order {
                        return Err(Error::invalid(format!("channel tuple {t:?} does not have {} entries", self.order)));
                    }
                    for &c in t {
                        if !check_channel(c)?.is_trivial() {
                            return Err(Error::invalid(format!("channel {c} is not invariant")));
                        }
                    }
                }
                Ok(Plan::Scalar { tuples })
            }
            ProductMode::TensorContraction => {
                if space.group() != GroupTag::So3 {
                    return Err(Error::UnsupportedConfiguration(
                        "tensor contraction is implemented for SO(3) only".into(),
                    ));
                }
                let chans: Vec<usize> = (0..self.order).map(|k| self.selector(k)).collect();
                let degrees = chans.iter().map(|&c| check_channel(c).map(|l| l.degree)).collect::<Result<Vec<_>>>()?;
                let path = match &self.path {
                    Some(p) => {
                        check_path(&degrees, p, self.output)?;
                        p.clone()
                    }
                    None => find_path(&degrees, self.output)?,
                };
                Ok(Plan::Tensor { channels: chans, output: IrrepLabel::so3(self.output), path })
            }
        }
    }

    /// Message space of a higher-order message on `space`, after checking
    /// the plan and the quadrature band limit.
    pub fn message_space(&self, space: &RepSpace, spec: &KernelSpec, m: &Manifold) -> Result<RepSpace> {
        let plan = self.plan(space)?;
        self.certified_order(self.required_order(&plan, spec, m, space))?;
        plan.output_space(space)
    }

    /// Same check for a pairwise message, whose space is `space` itself.
    pub fn pairwise_space(&self, space: &RepSpace, spec: &KernelSpec, m: &Manifold) -> Result<RepSpace> {
        self.certified_order(self.required_order(&Plan::Pairwise, spec, m, space))?;
        Ok(space.clone())
    }

    /// Quadrature band limit the integrand needs.
    pub(crate) fn required_order(&self, plan: &Plan, spec: &KernelSpec, m: &Manifold, space: &RepSpace) -> u32 {
        if m.trivial_structure() {
            return 0;
        }
        match plan {
            Plan::Pairwise => spec.l_grp + space.max_degree(),
            Plan::Scalar { .. } => self.order as u32 * spec.l_grp,
            Plan::Tensor { output, .. } => self.order as u32 * spec.l_grp + output.degree,
        }
    }

    /// The rule band limit to use, refusing under-resolved integrals.
    pub(crate) fn certified_order(&self, required: u32) -> Result<u32> {
        match self.quadrature_order {
            None => Ok(required),
            Some(q) if q >= required => Ok(q),
            Some(q) => Err(Error::invalid(format!(
                "quadrature band limit {q} is below the integrand band limit {required}"
            ))),
        }
    }
}

fn nondecreasing_tuples(items: &[usize], n: usize) -> Vec<Vec<usize>> {
    fn rec(items: &[usize], n: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for k in start..items.len() {
            cur.push(items[k]);
            rec(items, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, n, 0, &mut Vec::new(), &mut out);
    out
}

/// Intermediate degrees of the full chain `λ_1 ⊗ λ_2 → μ_1, …, → λ_out`.
fn chain(degrees: &[u32], path: &[u32], output: u32) -> Vec<u32> {
    let mut full = path.to_vec();
    if degrees.len() >= 2 {
        full.push(output);
    }
    full
}

fn check_path(degrees: &[u32], path: &[u32], output: u32) -> Result<()> {
    let n = degrees.len();
    if n == 1 {
        if !path.is_empty() || degrees[0] != output {
            return Err(Error::invalid(format!(
                "triangle rule fails: a single l={} factor cannot produce l={output}",
                degrees[0]
            )));
        }
        return Ok(());
    }
    if path.len() != n - 2 {
        return Err(Error::invalid(format!("coupling path needs {} intermediate degrees", n - 2)));
    }
    let full = chain(degrees, path, output);
    let mut left = degrees[0];
    for (k, &mu) in full.iter().enumerate() {
        let right = degrees[k + 1];
        if !triangle(left, right, mu) {
            return Err(Error::invalid(format!(
                "triangle rule fails at step {}: l={left} ⊗ l={right} does not contain l={mu}",
                k + 1
            )));
        }
        left = mu;
    }
    Ok(())
}

/// Depth-first search over intermediate degrees, smallest first.
fn find_path(degrees: &[u32], output: u32) -> Result<Vec<u32>> {
    let n = degrees.len();
    if n == 1 {
        check_path(degrees, &[], output)?;
        return Ok(Vec::new());
    }
    fn dfs(degrees: &[u32], output: u32, left: u32, k: usize, cur: &mut Vec<u32>) -> bool {
        let right = degrees[k];
        if k == degrees.len() - 1 {
            return triangle(left, right, output);
        }
        for mu in left.abs_diff(right)..=left + right {
            cur.push(mu);
            if dfs(degrees, output, mu, k + 1, cur) {
                return true;
            }
            cur.pop();
        }
        false
    }
    let mut cur = Vec::new();
    if dfs(degrees, output, degrees[0], 1, &mut cur) {
        Ok(cur)
    } else {
        Err(Error::invalid(format!(
            "triangle rule fails: no coupling of degrees {degrees:?} reaches l={output}"
        )))
    }
}
