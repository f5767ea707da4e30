use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::engine::MessageResult;
use crate::bundle::FeatureField;
use crate::error::{Error, Result};
use crate::group::{generators, IrrepLabel, RepSpace};

const INTERTWINER_TOL: f64 = 1e-10;

/// Equivariant linear map between representation spaces, stored densely.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearUpdate {
    input: RepSpace,
    output: RepSpace,
    matrix: DMatrix<f64>,
}

impl LinearUpdate {
    /// One `k_out × k_in` channel-mixing matrix per irrep of `input`; the
    /// output holds `k_out` copies of each irrep, in the same order.
    pub fn from_blocks(input: &RepSpace, blocks: &[(IrrepLabel, DMatrix<f64>)]) -> Result<Self> {
        let mut degrees = Vec::new();
        for (irrep, w) in blocks {
            let k_in = input.channels_of(irrep).len();
            if k_in == 0 {
                return Err(Error::invalid(format!("input has no {irrep} channels")));
            }
            if w.ncols() != k_in {
                return Err(Error::invalid(format!("{irrep} block has {} columns, expected {k_in}", w.ncols())));
            }
            if w.nrows() == 0 {
                return Err(Error::invalid(format!("{irrep} block has no rows")));
            }
            if degrees.iter().any(|(d, _)| *d == irrep.degree) {
                return Err(Error::invalid(format!("duplicate block for {irrep}")));
            }
            degrees.push((irrep.degree, w.nrows()));
        }
        let output = RepSpace::from_degrees(input.group(), &degrees)?;
        let mut matrix = DMatrix::zeros(output.dim(), input.dim());
        for (irrep, w) in blocks {
            let ins = input.channels_of(irrep);
            let outs = output.channels_of(irrep);
            for (r, &co) in outs.iter().enumerate() {
                for (c, &ci) in ins.iter().enumerate() {
                    let (ro, ri) = (output.channels()[co].range(), input.channels()[ci].range());
                    for (a, b) in ro.zip(ri) {
                        matrix[(a, b)] = w[(r, c)];
                    }
                }
            }
        }
        Ok(LinearUpdate { input: input.clone(), output, matrix })
    }

    /// Accepts a dense `dim(out) × dim(in)` matrix only if every channel block
    /// intertwines: zero between different irreps, commuting with the
    /// generators within one irrep.
    pub fn from_dense(input: &RepSpace, output: &RepSpace, matrix: DMatrix<f64>) -> Result<Self> {
        if input.group() != output.group() {
            return Err(Error::invalid("input and output spaces belong to different groups"));
        }
        if matrix.shape() != (output.dim(), input.dim()) {
            return Err(Error::invalid(format!(
                "weight matrix is {:?}, expected {:?}",
                matrix.shape(),
                (output.dim(), input.dim())
            )));
        }
        let scale = matrix.amax().max(1.0);
        for (co, out_ch) in output.channels().iter().enumerate() {
            for (ci, in_ch) in input.channels().iter().enumerate() {
                let ro = out_ch.range();
                let ri = in_ch.range();
                let block = matrix.view((ro.start, ri.start), (ro.len(), ri.len())).into_owned();
                if out_ch.irrep != in_ch.irrep {
                    if block.amax() > INTERTWINER_TOL * scale {
                        return Err(Error::invalid(format!(
                            "weights mix irreps: input channel {ci} ({}) feeds output channel {co} ({})",
                            in_ch.irrep, out_ch.irrep
                        )));
                    }
                    continue;
                }
                for j in generators(&in_ch.irrep) {
                    let comm = &block * &j - &j * &block;
                    if comm.amax() > INTERTWINER_TOL * scale {
                        return Err(Error::invalid(format!(
                            "block from input channel {ci} to output channel {co} does not commute with {}",
                            in_ch.irrep
                        )));
                    }
                }
            }
        }
        Ok(LinearUpdate { input: input.clone(), output: output.clone(), matrix })
    }

    pub fn input(&self) -> &RepSpace {
        &self.input
    }

    pub fn output(&self) -> &RepSpace {
        &self.output
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(v)).data.into()
    }
}

/// Scales each non-invariant channel by `2σ(w·z + b)`, where `z` collects the
/// invariant channels. Invariant channels pass through.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatedUpdate {
    /// One row per non-invariant channel, one column per invariant channel.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl GatedUpdate {
    /// Gates that start at exactly one.
    pub fn neutral(space: &RepSpace) -> Self {
        let (scalars, gated) = split(space);
        GatedUpdate { weights: vec![vec![0.0; scalars.len()]; gated.len()], bias: vec![0.0; gated.len()] }
    }

    pub fn check(&self, space: &RepSpace) -> Result<()> {
        let (scalars, gated) = split(space);
        if self.weights.len() != gated.len() || self.bias.len() != gated.len() {
            return Err(Error::invalid(format!("gate needs {} rows, one per non-invariant channel", gated.len())));
        }
        if self.weights.iter().any(|r| r.len() != scalars.len()) {
            return Err(Error::invalid(format!("gate rows need {} entries, one per invariant channel", scalars.len())));
        }
        Ok(())
    }

    pub fn apply(&self, space: &RepSpace, v: &[f64]) -> Vec<f64> {
        let (scalars, gated) = split(space);
        let z: Vec<f64> = scalars.iter().map(|&c| v[space.channels()[c].offset]).collect();
        let mut out = v.to_vec();
        for (k, &c) in gated.iter().enumerate() {
            let a = self.bias[k] + self.weights[k].iter().zip(&z).map(|(w, x)| w * x).sum::<f64>();
            let s = 2.0 / (1.0 + (-a).exp());
            for x in &mut out[space.channels()[c].range()] {
                *x *= s;
            }
        }
        out
    }
}

fn split(space: &RepSpace) -> (Vec<usize>, Vec<usize>) {
    (0..space.channels().len()).partition(|&c| space.channels()[c].irrep.is_trivial())
}

#[derive(Clone, Debug, PartialEq, Default)]
pub enum UpdateMode {
    #[default]
    Identity,
    Linear(LinearUpdate),
    Gated(GatedUpdate),
}

/// New field from per-node messages; `field` supplies the graph.
pub fn update(field: &FeatureField, message: &MessageResult, mode: &UpdateMode) -> Result<FeatureField> {
    if message.len() != field.len() {
        return Err(Error::invalid(format!("{} messages for {} nodes", message.len(), field.len())));
    }
    let (space, data) = match mode {
        UpdateMode::Identity => (message.space.clone(), message.flat()),
        UpdateMode::Linear(lin) => {
            if lin.input != message.space {
                return Err(Error::invalid("linear update input does not match the message space"));
            }
            (lin.output.clone(), message.values.iter().flat_map(|v| lin.apply(v)).collect())
        }
        UpdateMode::Gated(gate) => {
            gate.check(&message.space)?;
            (message.space.clone(), message.values.iter().flat_map(|v| gate.apply(&message.space, v)).collect())
        }
    };
    FeatureField::new(field.graph().clone(), space, data)
}

/// Per-node invariant scores `y_i = Σ_c w_c h_i^c` and their sum. Weights on
/// non-invariant channels must be zero.
pub fn readout(field: &FeatureField, weights: &[f64]) -> Result<(Vec<f64>, f64)> {
    let space = field.space();
    if weights.len() != space.channels().len() {
        return Err(Error::invalid(format!(
            "readout has {} weights for {} channels",
            weights.len(),
            space.channels().len()
        )));
    }
    for (c, (w, ch)) in weights.iter().zip(space.channels()).enumerate() {
        if *w != 0.0 && !ch.irrep.is_trivial() {
            return Err(Error::invalid(format!("readout weight on channel {c} ({}) is not invariant", ch.irrep)));
        }
    }
    let scores: Vec<f64> = (0..field.len())
        .map(|i| {
            let h = field.node(i);
            weights
                .iter()
                .zip(space.channels())
                .filter(|(w, _)| **w != 0.0)
                .map(|(w, ch)| w * h[ch.offset])
                .sum()
        })
        .collect();
    let total = scores.iter().sum();
    Ok((scores, total))
}
