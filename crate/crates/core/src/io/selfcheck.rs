use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::generate::{gen_graph, FieldInit};
use crate::bundle::{check_equivariance, FeatureField, Isometry};
use crate::diffusion::{build_graph, euler_step, laplacian_parts, stable_dt, symmetric_expm, EdgeWeights};
use crate::error::{Error, Result};
use crate::group::{
    casimir, character, generators, haar_rule, integrate_over_group, irrep_matrix, GroupElement, GroupTag, IrrepLabel,
    RepSpace,
};
use crate::manifold::{base_heat_kernel, circle_grid, sample_points, sphere_grid, KernelSpec, Manifold, Point};
use crate::message::{
    higher_order_message, mace_reference_message, pairwise_message, readout, GatedUpdate, LinearUpdate, MessageConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Casimir,
    Schur,
    Semigroup,
    Equivariance,
    Mace,
    All,
}

impl Suite {
    const EACH: [Suite; 5] = [Suite::Casimir, Suite::Schur, Suite::Semigroup, Suite::Equivariance, Suite::Mace];
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "casimir" => Ok(Suite::Casimir),
            "schur" => Ok(Suite::Schur),
            "semigroup" => Ok(Suite::Semigroup),
            "equivariance" => Ok(Suite::Equivariance),
            "mace" => Ok(Suite::Mace),
            "all" => Ok(Suite::All),
            _ => Err(Error::invalid(format!(
                "unknown suite `{s}`; expected casimir, schur, semigroup, equivariance, mace or all"
            ))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Casimir => "casimir",
            Suite::Schur => "schur",
            Suite::Semigroup => "semigroup",
            Suite::Equivariance => "equivariance",
            Suite::Mace => "mace",
            Suite::All => "all",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub suite: Suite,
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelfCheckReport {
    pub suite: Suite,
    pub pass: bool,
    pub checks: Vec<CheckResult>,
}

impl SelfCheckReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

struct Collector {
    suite: Suite,
    checks: Vec<CheckResult>,
}

impl Collector {
    fn push(&mut self, name: impl Into<String>, residual: f64, tol: f64) {
        // NaN residuals fail.
        let pass = residual <= tol;
        self.checks.push(CheckResult { suite: self.suite, name: name.into(), residual, tol, pass });
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn labels(tag: GroupTag, max: u32) -> impl Iterator<Item = IrrepLabel> {
    (0..=max).map(move |d| IrrepLabel { group: tag, degree: d })
}

fn casimir_suite(c: &mut Collector) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (tag, max) in [(GroupTag::So3, 4), (GroupTag::So2, 4)] {
        for label in labels(tag, max) {
            let d = label.dim();
            let expected = DMatrix::identity(d, d) * label.casimir_value();
            let from_generators = generators(&label).iter().fold(DMatrix::zeros(d, d), |acc, x| acc - x * x);
            let mut r = max_abs(&(from_generators - &expected)).max(max_abs(&(casimir(&label) - &expected)));
            // Central: commutes with the representation.
            for _ in 0..3 {
                let rho = irrep_matrix(&label, &GroupElement::random(tag, &mut rng))?;
                let cas = casimir(&label);
                r = r.max(max_abs(&(&rho * &cas - &cas * &rho)));
            }
            c.push(format!("casimir {label}"), r, 1e-12);
        }
    }
    Ok(())
}

fn schur_suite(c: &mut Collector) -> Result<()> {
    for (tag, max) in [(GroupTag::So3, 4), (GroupTag::So2, 4)] {
        for label in labels(tag, max) {
            let d = label.dim();
            let rule = haar_rule(tag, 2 * max);
            let mean = integrate_over_group(|g| irrep_matrix(&label, g).expect("matching group"), &rule)?;
            let mean_expected = if label.is_trivial() { DMatrix::identity(1, 1) } else { DMatrix::zeros(d, d) };
            c.push(format!("haar mean {label}"), max_abs(&(mean - mean_expected)), 1e-10);

            // ∫ χ(g) ρ(g⁻¹) dg = I / d on SO(3).
            let proj = integrate_over_group(
                |g| irrep_matrix(&label, &g.inverse()).expect("matching group") * character(&label, g).expect("matching group"),
                &rule,
            )?;
            let expected = if tag == GroupTag::So2 {
                // Real SO(2) irreps of degree m ≥ 1 split into ±m over ℂ, so
                // the character projects onto the whole block.
                DMatrix::identity(d, d)
            } else {
                DMatrix::identity(d, d) / d as f64
            };
            c.push(format!("character projection {label}"), max_abs(&(proj - expected)), 1e-10);
        }
    }
    Ok(())
}

fn semigroup_suite(c: &mut Collector) -> Result<()> {
    let sphere = Manifold::Sphere2;
    let x = sample_points(&sphere, 1, 8)[0];
    let mut r: f64 = 0.0;
    for t in [0.05, 0.1, 1.0] {
        let total: f64 = sphere_grid(32).iter().map(|(z, w)| w * base_heat_kernel(&sphere, t, &x, z, 16).unwrap()).sum();
        r = r.max((total - 1.0).abs());
    }
    c.push("sphere normalization", r, 1e-8);

    for m in [Manifold::Sphere2, Manifold::Circle] {
        let pts = sample_points(&m, 6, 4);
        let grid: Vec<(Point, f64)> = if m == Manifold::Sphere2 { sphere_grid(32) } else { circle_grid(32) };
        for (s, t) in [(0.1, 0.1), (0.05, 0.2), (0.3, 0.7)] {
            let mut r: f64 = 0.0;
            for p in pts.chunks(2) {
                let lhs: f64 = grid
                    .iter()
                    .map(|(z, w)| {
                        w * base_heat_kernel(&m, s, &p[0], z, 16).unwrap() * base_heat_kernel(&m, t, z, &p[1], 16).unwrap()
                    })
                    .sum();
                r = r.max((lhs - base_heat_kernel(&m, s + t, &p[0], &p[1], 16)?).abs());
            }
            c.push(format!("semigroup {m} s={s} t={t}"), r, 1e-8);
        }
    }

    // Euclidean kernel against the product of one-dimensional Gaussians.
    let mut r: f64 = 0.0;
    for dim in [2usize, 3] {
        let m = Manifold::euclidean(dim)?;
        for (k, p) in sample_points(&m, 6, 9).chunks(2).enumerate() {
            let t = 0.1 + 0.3 * k as f64;
            let k_m = base_heat_kernel(&m, t, &p[0], &p[1], 0)?;
            let product: f64 = (0..dim)
                .map(|a| {
                    let d = p[0][a] - p[1][a];
                    (-d * d / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
                })
                .product();
            r = r.max(((k_m - product) / product).abs());
        }
        let o = Vector3::zeros();
        let at_origin = base_heat_kernel(&m, 1.0, &o, &o, 0)?;
        r = r.max((at_origin - (4.0 * PI).powf(-(dim as f64) / 2.0)).abs());
    }
    c.push("euclidean gaussian closed form", r, 1e-14);

    // e^{tΔ} = e^{−tL} e^{−t Cas}: transports preserve irrep blocks.
    for m in [Manifold::Sphere2, Manifold::euclidean(3)?] {
        let graph = build_graph(m, sample_points(&m, 8, 12), 0.9)?;
        let space = RepSpace::from_degrees(m.structure_group(), &[(0, 1), (1, 1), (2, 1)])?;
        let weights = EdgeWeights::heat(&graph, 0.1, 12)?;
        let (l, cas) = laplacian_parts(&graph, &weights, &space)?;
        let t = 0.3;
        let full = symmetric_expm(&(-(&l + &cas)), t);
        let split = symmetric_expm(&(-&l), t) * DMatrix::from_diagonal(&cas.diagonal().map(|x| (-t * x).exp()));
        c.push(format!("propagator factorization {m}"), max_abs(&(full - split)), 1e-12);
    }
    Ok(())
}

fn scene(m: Manifold, seed: u64) -> Result<FeatureField> {
    let space = RepSpace::from_degrees(m.structure_group(), &[(0, 2), (1, 1), (2, 1)])?;
    let cutoff = if m == Manifold::Sphere2 { 1.0 } else { 0.7 };
    gen_graph(m, 10, cutoff, seed, &space, FieldInit::Random)
}

fn equivariance_suite(c: &mut Collector) -> Result<()> {
    let spec = KernelSpec::new(0.2, 8, 2)?;
    let tol = 1e-8;
    for (k, m) in [Manifold::euclidean(2)?, Manifold::euclidean(3)?, Manifold::Sphere2].into_iter().enumerate() {
        let field = scene(m, 30 + k as u64)?;
        let space = field.space().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(40 + k as u64);
        let isos: Vec<Isometry> = (0..20).map(|_| Isometry::random(&m, &mut rng)).collect();
        let mut push = |name: &str, out: &RepSpace, f: &dyn Fn(&FeatureField) -> Result<Vec<Vec<f64>>>| -> Result<()> {
            let report = check_equivariance(&field, out, &isos, tol, f)?;
            c.push(format!("{name} on {m}"), report.max_deviation, tol);
            Ok(())
        };

        push("pairwise message", &space, &|x| Ok(pairwise_message(x, &spec, &MessageConfig::pairwise())?.values))?;

        let scalar = MessageConfig::scalar(2);
        let out = higher_order_message(&field, &spec, &scalar)?.space;
        push("order-2 scalar message", &out, &|x| Ok(higher_order_message(x, &spec, &scalar)?.values))?;

        if m.structure_group() == GroupTag::So3 {
            let tensor = MessageConfig::tensor(2, vec![2, 3], 1);
            let out = higher_order_message(&field, &spec, &tensor)?.space;
            push("order-2 tensor message", &out, &|x| Ok(higher_order_message(x, &spec, &tensor)?.values))?;
        }

        let tag = space.group();
        let linear = LinearUpdate::from_blocks(
            &space,
            &[
                (IrrepLabel::trivial(tag), DMatrix::from_row_slice(2, 2, &[0.7, -0.2, 0.4, 1.1])),
                (IrrepLabel { group: tag, degree: 1 }, DMatrix::from_element(1, 1, -0.8)),
                (IrrepLabel { group: tag, degree: 2 }, DMatrix::from_element(1, 1, 1.3)),
            ],
        )?;
        push("linear update", linear.output(), &|x| Ok(x.canonical()?.nodes().iter().map(|v| linear.apply(v)).collect()))?;

        let gate = GatedUpdate { weights: vec![vec![0.5, -0.3], vec![0.2, 0.9]], bias: vec![0.1, -0.4] };
        gate.check(&space)?;
        push("gated update", &space, &|x| Ok(x.canonical()?.nodes().iter().map(|v| gate.apply(&space, v)).collect()))?;

        let scores = RepSpace::scalars(tag, 1)?;
        push("readout", &scores, &|x| Ok(readout(x, &[1.0, -0.5, 0.0, 0.0])?.0.into_iter().map(|y| vec![y]).collect()))?;

        push("diffusion step", &space, &|x| {
            let w = EdgeWeights::heat(x.graph(), 0.1, 12)?;
            let dt = stable_dt(&w, x.space());
            Ok(euler_step(x, dt, &w)?.nodes())
        })?;
    }
    Ok(())
}

fn mace_suite(c: &mut Collector) -> Result<()> {
    let spec = KernelSpec::new(0.2, 8, 2)?;
    let m = Manifold::euclidean(3)?;
    let space = RepSpace::from_degrees(GroupTag::So3, &[(0, 2), (1, 1), (2, 1)])?;
    for seed in 0..3u64 {
        let graph = Arc::new(build_graph(m, sample_points(&m, 8, 50 + seed), 0.8)?);
        let field = super::generate::test_pattern(&graph, &space)?;
        let configs = [
            ("scalar n=1", MessageConfig::scalar(1)),
            ("scalar n=2", MessageConfig::scalar(2)),
            ("tensor n=1", MessageConfig::tensor(1, vec![3], 2)),
            ("tensor n=2", MessageConfig::tensor(2, vec![2, 3], 1)),
        ];
        for (name, cfg) in configs {
            let quad = higher_order_message(&field, &spec, &cfg)?;
            let closed = mace_reference_message(&field, &spec, &cfg)?;
            let scale = 1.0 + quad.flat().iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let diff = quad.flat().iter().zip(closed.flat()).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
            c.push(format!("closed form vs quadrature, {name}, cloud {seed}"), diff / scale, 1e-8);
        }
    }
    Ok(())
}

/// Runs one suite, or every suite for [`Suite::All`].
pub fn selfcheck(suite: Suite) -> Result<SelfCheckReport> {
    let suites: Vec<Suite> = if suite == Suite::All { Suite::EACH.to_vec() } else { vec![suite] };
    let mut checks = Vec::new();
    for s in suites {
        let mut c = Collector { suite: s, checks: Vec::new() };
        match s {
            Suite::Casimir => casimir_suite(&mut c)?,
            Suite::Schur => schur_suite(&mut c)?,
            Suite::Semigroup => semigroup_suite(&mut c)?,
            Suite::Equivariance => equivariance_suite(&mut c)?,
            Suite::Mace => mace_suite(&mut c)?,
            Suite::All => unreachable!(),
        }
        checks.extend(c.checks);
    }
    Ok(SelfCheckReport { suite, pass: checks.iter().all(|c| c.pass), checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::EACH.iter().chain([&Suite::All]) {
            assert_eq!(s.to_string().parse::<Suite>().unwrap(), *s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn every_suite_passes() {
        for s in [Suite::Casimir, Suite::Schur, Suite::Semigroup, Suite::Equivariance, Suite::Mace] {
            let r = selfcheck(s).unwrap();
            for c in &r.checks {
                assert!(c.pass, "{} {}: {:e}", s, c.name, c.residual);
            }
        }
    }
}
