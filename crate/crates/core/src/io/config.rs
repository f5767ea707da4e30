use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::generate::FieldInit;
use super::graph::{rep_space, RepEntry};
use super::{parse_json, read_file};
use crate::diffusion::EnergyConfig;
use crate::error::{Error, Result};
use crate::group::{GroupTag, IrrepLabel, RepSpace};
use crate::manifold::{KernelSpec, Manifold};
use crate::message::{GatedUpdate, LinearUpdate, MessageConfig, UpdateMode};

/// What one iteration of a run does.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Explicit Euler step of the generalized heat equation.
    Diffusion,
    /// Attentional flow with `a = exp(−β (‖h_j‖ − ‖h_i‖)²)`.
    Beltrami {
        #[serde(default = "one")]
        beta: f64,
    },
    /// Pairwise message over every channel, then the update.
    Pairwise {
        #[serde(default = "yes")]
        casimir_damping: bool,
    },
    /// Higher-order message, then the update.
    Message(MessageConfig),
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Step size for diffusion and Beltrami modes; defaults to the stability
    /// bound of the graph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_mode")]
    pub mode: ScheduleMode,
}

fn default_steps() -> usize {
    10
}

fn default_mode() -> ScheduleMode {
    ScheduleMode::Diffusion
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { steps: default_steps(), dt: None, mode: default_mode() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearBlock {
    pub irrep: u32,
    /// `k_out × k_in` channel mixing, row-major.
    pub weights: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UpdateConfig {
    #[default]
    Identity,
    Linear { blocks: Vec<LinearBlock> },
    /// Neutral gates when weights are omitted.
    Gated {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bias: Option<Vec<f64>>,
    },
}

impl UpdateConfig {
    /// Concrete update for messages living in `space`.
    pub fn resolve(&self, space: &RepSpace) -> Result<UpdateMode> {
        match self {
            UpdateConfig::Identity => Ok(UpdateMode::Identity),
            UpdateConfig::Linear { blocks } => {
                let blocks = blocks
                    .iter()
                    .map(|b| {
                        let rows = b.weights.len();
                        let cols = b.weights.first().map_or(0, Vec::len);
                        if b.weights.iter().any(|r| r.len() != cols) {
                            return Err(Error::invalid(format!("irrep {} weights are ragged", b.irrep)));
                        }
                        let flat: Vec<f64> = b.weights.concat();
                        Ok((IrrepLabel { group: space.group(), degree: b.irrep }, DMatrix::from_row_slice(rows, cols, &flat)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(UpdateMode::Linear(LinearUpdate::from_blocks(space, &blocks)?))
            }
            UpdateConfig::Gated { weights, bias } => {
                let neutral = GatedUpdate::neutral(space);
                let gate = GatedUpdate {
                    weights: weights.clone().unwrap_or(neutral.weights),
                    bias: bias.clone().unwrap_or(neutral.bias),
                };
                Ok(UpdateMode::Gated(gate))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    #[serde(default = "default_nodes")]
    pub n: usize,
    #[serde(default)]
    pub init: FieldInit,
}

fn default_nodes() -> usize {
    16
}

impl Default for GenerateSpec {
    fn default() -> Self {
        GenerateSpec { n: default_nodes(), init: FieldInit::Random }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_trace")]
    pub trace: PathBuf,
    #[serde(default = "default_final")]
    pub final_state: PathBuf,
}

fn default_trace() -> PathBuf {
    "trace.csv".into()
}

fn default_final() -> PathBuf {
    "final.json".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { trace: default_trace(), final_state: default_final() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifold: Manifold,
    /// Must match the manifold's structure group when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupTag>,
    pub rep: Vec<RepEntry>,
    pub cutoff: f64,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub energy: EnergyConfig,
    #[serde(default)]
    pub update: UpdateConfig,
    /// One weight per channel of the final space; non-invariant channels must
    /// carry zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_order: Option<u32>,
    #[serde(default)]
    pub seed: u64,
    /// Graph JSON to start from; generated from `generate` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub generate: GenerateSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Equivariance spot check every k-th iteration; 0 disables it.
    #[serde(default)]
    pub equiv_every: usize,
}

fn field_err(field: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Validation { .. } => e,
        other => Error::validation(field, strip_kind(&other)),
    }
}

fn strip_kind(e: &Error) -> String {
    match e {
        Error::InvalidArgument(m) | Error::Domain(m) | Error::UnsupportedConfiguration(m) => m.clone(),
        other => other.to_string(),
    }
}

impl RunConfig {
    /// Initial feature space.
    pub fn space(&self) -> Result<RepSpace> {
        rep_space(self.manifold.structure_group(), &self.rep).map_err(field_err("rep"))
    }

    /// Checks every precondition the run will rely on and fills the
    /// quadrature band limit of message schedules.
    pub fn validate(&mut self) -> Result<()> {
        let m = self.manifold;
        if let Manifold::Euclidean { dim } = m {
            Manifold::euclidean(dim).map_err(field_err("manifold.dim"))?;
        }
        if let Some(g) = self.group {
            if g != m.structure_group() {
                return Err(Error::validation(
                    "group",
                    format!("{m} has structure group {}, not {g}", m.structure_group()),
                ));
            }
        }
        let space = self.space()?;
        if m.trivial_structure() && !space.is_scalar() {
            return Err(Error::validation("rep", format!("{m} carries the trivial group; only irrep 0 is allowed")));
        }
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return Err(Error::validation("cutoff", format!("cutoff must be positive, got {}", self.cutoff)));
        }
        if m == Manifold::Sphere2 && self.cutoff >= FRAC_PI_2 {
            return Err(Error::validation(
                "cutoff",
                format!("chart-coverage rule r_c < π/2 violated by cutoff {}", self.cutoff),
            ));
        }
        self.kernel.validate().map_err(field_err("kernel"))?;
        self.energy.validate().map_err(field_err("energy"))?;
        if let Some(dt) = self.schedule.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::validation("schedule.dt", format!("time step must be positive, got {dt}")));
            }
        }
        if self.input.is_none() && self.generate.n == 0 {
            return Err(Error::validation("generate.n", "a generated graph needs at least one node"));
        }
        if let ScheduleMode::Beltrami { beta } = self.schedule.mode {
            if !(beta >= 0.0 && beta.is_finite()) {
                return Err(Error::validation("schedule.mode.beta", format!("beta must be non-negative, got {beta}")));
            }
        }
        if let ScheduleMode::Message(cfg) = &mut self.schedule.mode {
            if cfg.quadrature_order.is_none() {
                cfg.quadrature_order = self.quadrature_order;
            }
        }
        let final_space = self.evolve_space(&space)?;
        if let Some(w) = &self.readout {
            if w.len() != final_space.channels().len() {
                return Err(Error::validation(
                    "readout",
                    format!("{} weights for {} channels of the final space", w.len(), final_space.channels().len()),
                ));
            }
            for (c, (w, ch)) in w.iter().zip(final_space.channels()).enumerate() {
                if *w != 0.0 && !ch.irrep.is_trivial() {
                    return Err(Error::validation(
                        format!("readout[{c}]"),
                        format!("channel {c} carries {} and is not invariant", ch.irrep),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Space after one iteration.
    pub fn step_space(&self, space: &RepSpace) -> Result<RepSpace> {
        let message_space = match &self.schedule.mode {
            ScheduleMode::Diffusion | ScheduleMode::Beltrami { .. } => return Ok(space.clone()),
            ScheduleMode::Pairwise { casimir_damping } => {
                let cfg = self.pairwise_config(*casimir_damping);
                cfg.pairwise_space(space, &self.kernel, &self.manifold).map_err(field_err("quadrature_order"))?
            }
            ScheduleMode::Message(cfg) => {
                cfg.message_space(space, &self.kernel, &self.manifold).map_err(field_err("schedule.mode"))?
            }
        };
        match self.update.resolve(&message_space).map_err(field_err("update"))? {
            UpdateMode::Linear(l) => Ok(l.output().clone()),
            UpdateMode::Gated(g) => {
                g.check(&message_space).map_err(field_err("update"))?;
                Ok(message_space)
            }
            UpdateMode::Identity => Ok(message_space),
        }
    }

    pub(crate) fn pairwise_config(&self, casimir_damping: bool) -> MessageConfig {
        MessageConfig { quadrature_order: self.quadrature_order, casimir_damping, ..MessageConfig::pairwise() }
    }

    fn evolve_space(&self, start: &RepSpace) -> Result<RepSpace> {
        let mut space = start.clone();
        for _ in 0..self.schedule.steps {
            let next = self.step_space(&space)?;
            if next == space {
                break;
            }
            space = next;
        }
        Ok(space)
    }

    /// Final space after all iterations.
    pub fn final_space(&self) -> Result<RepSpace> {
        self.evolve_space(&self.space()?)
    }

    /// Relative paths resolve against `dir`.
    pub fn resolve_paths(&mut self, dir: &Path) {
        if let Some(p) = &self.input {
            if p.is_relative() {
                self.input = Some(dir.join(p));
            }
        }
    }
}

pub fn parse_config(text: &str, source_name: &str) -> Result<RunConfig> {
    let mut cfg: RunConfig = parse_json(text, source_name)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and validates a run configuration; a relative `input` path is taken
/// relative to the configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = read_file(path)?;
    let mut cfg = parse_config(&text, &path.display().to_string())?;
    if let Some(dir) = path.parent() {
        cfg.resolve_paths(dir);
    }
    Ok(cfg)
}
