use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{RunConfig, ScheduleMode};
use super::generate::gen_graph;
use super::graph::{load_graph, rep_entries, GraphDocument};
use super::write_file;
use crate::bundle::{check_equivariance, EquivarianceReport, FeatureField, Isometry};
use crate::diffusion::{beltrami_step, euler_step, polyakov_energy, stable_dt, EdgeWeights};
use crate::error::{Error, Result};
use crate::message::{higher_order_message, pairwise_message, readout, update};

/// Tolerance of the in-run equivariance spot check.
pub const SPOT_CHECK_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub energy: f64,
    pub dirichlet: f64,
    pub casimir: f64,
    pub max_norm: f64,
    pub equiv_residual: Option<f64>,
    pub ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergySummary {
    pub total: f64,
    pub dirichlet: f64,
    pub casimir: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReadoutSummary {
    pub scores: Vec<f64>,
    pub total: f64,
}

/// Final state of a run. Carries no timings, so equal inputs give equal
/// bytes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub steps: usize,
    pub dt: Option<f64>,
    pub energy: EnergySummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub readout: Option<ReadoutSummary>,
    pub graph: GraphDocument,
    #[serde(skip)]
    pub trace: Vec<TraceRecord>,
    #[serde(skip)]
    pub field: Option<FeatureField>,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summaries serialize");
        s.push('\n');
        s
    }
}

pub fn trace_csv(trace: &[TraceRecord]) -> String {
    let mut s = String::from("iter,energy,dirichlet,casimir,max_norm,equiv_residual,ms\n");
    for r in trace {
        let eq = r.equiv_residual.map(|e| e.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{},{},{},{:.3}", r.iter, r.energy, r.dirichlet, r.casimir, r.max_norm, eq, r.ms);
    }
    s
}

/// Hex SHA-256 of the validated configuration in canonical JSON.
pub fn config_hash(cfg: &RunConfig) -> String {
    let text = serde_json::to_string(cfg).expect("configurations serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// One iteration of the schedule.
fn step(cfg: &RunConfig, field: &FeatureField, weights: &EdgeWeights, dt: f64) -> Result<FeatureField> {
    let message = match &cfg.schedule.mode {
        ScheduleMode::Diffusion => return euler_step(field, dt, weights),
        ScheduleMode::Beltrami { beta } => {
            let beta = *beta;
            let norm = |h: &[f64]| h.iter().map(|x| x * x).sum::<f64>().sqrt();
            return beltrami_step(
                field,
                |j, i| {
                    let d = norm(j.features) - norm(i.features);
                    (-beta * d * d).exp()
                },
                dt,
            );
        }
        ScheduleMode::Pairwise { casimir_damping } => {
            pairwise_message(field, &cfg.kernel, &cfg.pairwise_config(*casimir_damping))?
        }
        ScheduleMode::Message(m) => higher_order_message(field, &cfg.kernel, m)?,
    };
    let mode = cfg.update.resolve(&message.space)?;
    update(field, &message, &mode)
}

fn uses_dt(cfg: &RunConfig) -> bool {
    matches!(cfg.schedule.mode, ScheduleMode::Diffusion | ScheduleMode::Beltrami { .. })
}

/// Field the run starts from: the `input` graph, or a generated one.
pub fn initial_field(cfg: &RunConfig) -> Result<FeatureField> {
    let space = cfg.space()?;
    match &cfg.input {
        Some(path) => {
            let field = load_graph(path)?;
            let g = field.graph();
            if g.manifold() != cfg.manifold {
                return Err(Error::validation(
                    "input",
                    format!("graph lives on {}, configuration on {}", g.manifold(), cfg.manifold),
                ));
            }
            if field.space() != &space {
                return Err(Error::validation("input", "graph representation differs from `rep`"));
            }
            if (g.cutoff() - cfg.cutoff).abs() > 1e-12 * cfg.cutoff.max(1.0) {
                return Err(Error::validation(
                    "input",
                    format!("graph cutoff {} differs from configured cutoff {}", g.cutoff(), cfg.cutoff),
                ));
            }
            Ok(field)
        }
        None => gen_graph(cfg.manifold, cfg.generate.n, cfg.cutoff, cfg.seed, &space, cfg.generate.init),
    }
}

/// Equivariance of one schedule iteration applied to `field`, over
/// `transforms` seeded random isometries.
pub fn step_equivariance(cfg: &RunConfig, field: &FeatureField, transforms: usize, tol: f64) -> Result<EquivarianceReport> {
    let mut cfg = cfg.clone();
    cfg.validate()?;
    let cfg = &cfg;
    let field = field.canonical()?;
    let weights = cfg.energy.edge_weights(field.graph())?;
    let dt = cfg.schedule.dt.unwrap_or_else(|| stable_dt(&weights, field.space()));
    let out = step(cfg, &field, &weights, dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x150_e7a1);
    let isos: Vec<Isometry> = (0..transforms).map(|_| Isometry::random(&cfg.manifold, &mut rng)).collect();
    check_equivariance(&field, out.space(), &isos, tol, |x| {
        let w = cfg.energy.edge_weights(x.graph())?;
        Ok(step(cfg, x, &w, dt)?.canonical()?.nodes())
    })
}

/// Runs the schedule on a generated or loaded field without touching disk.
pub fn run_with_field(cfg: &RunConfig, field: FeatureField) -> Result<RunSummary> {
    let mut cfg = cfg.clone();
    cfg.validate()?;
    let cfg = &cfg;
    let mut field = field.canonical()?;
    let weights = cfg.energy.edge_weights(field.graph())?;
    let dt = uses_dt(cfg).then(|| cfg.schedule.dt.unwrap_or_else(|| stable_dt(&weights, field.space())));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x150_e7a1);

    let record = |iter: usize, f: &FeatureField, equiv: Option<f64>, ms: f64| -> Result<TraceRecord> {
        let e = polyakov_energy(f, &weights, &cfg.energy)?;
        Ok(TraceRecord {
            iter,
            energy: e.total,
            dirichlet: e.dirichlet,
            casimir: e.casimir,
            max_norm: f.max_norm(),
            equiv_residual: equiv,
            ms,
        })
    };

    let mut trace = vec![record(0, &field, None, 0.0)?];
    for iter in 1..=cfg.schedule.steps {
        let clock = Instant::now();
        let next = step(cfg, &field, &weights, dt.unwrap_or(0.0))?;
        let ms = clock.elapsed().as_secs_f64() * 1e3;
        let equiv = if cfg.equiv_every > 0 && iter % cfg.equiv_every == 0 {
            let iso = Isometry::random(&cfg.manifold, &mut rng);
            let report = check_equivariance(&field, next.space(), &[iso], SPOT_CHECK_TOL, |x| {
                let w = cfg.energy.edge_weights(x.graph())?;
                Ok(step(cfg, x, &w, dt.unwrap_or(0.0))?.canonical()?.nodes())
            })?;
            if !report.pass {
                log::warn!("iteration {iter}: equivariance residual {:.3e}", report.max_deviation);
            }
            Some(report.max_deviation)
        } else {
            None
        };
        field = next;
        trace.push(record(iter, &field, equiv, ms)?);
    }

    let e = polyakov_energy(&field, &weights, &cfg.energy)?;
    let readout = match &cfg.readout {
        Some(w) => {
            let (scores, total) = readout(&field, w)?;
            Some(ReadoutSummary { scores, total })
        }
        None => None,
    };
    Ok(RunSummary {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        config_hash: config_hash(cfg),
        steps: cfg.schedule.steps,
        dt,
        energy: EnergySummary { total: e.total, dirichlet: e.dirichlet, casimir: e.casimir },
        readout,
        graph: GraphDocument::from_field(&field),
        trace,
        field: Some(field),
    })
}

/// Runs the schedule and writes the trace and final state under `out_dir`.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunSummary> {
    let field = initial_field(cfg)?;
    log::info!(
        "{} nodes on {}, rep {:?}, {} steps",
        field.len(),
        cfg.manifold,
        rep_entries(field.space()).iter().map(|r| (r.irrep, r.multiplicity)).collect::<Vec<_>>(),
        cfg.schedule.steps
    );
    let summary = run_with_field(cfg, field)?;
    write_file(&out_dir.join(&cfg.output.trace), &trace_csv(&summary.trace))?;
    write_file(&out_dir.join(&cfg.output.final_state), &summary.to_json())?;
    Ok(summary)
}
