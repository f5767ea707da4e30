use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::bundle::{check_equivariance, FeatureField, Isometry};
use crate::diffusion::build_graph;
use crate::group::{
    character, haar_rule, integrate_over_group, irrep_matrix, GroupElement, GroupTag, IrrepLabel, RepSpace,
};
use crate::manifold::{bundle_kernel, sample_points, KernelSpec, Manifold};

fn field(m: Manifold, n: usize, cutoff: f64, degrees: &[(u32, usize)], seed: u64) -> FeatureField {
    let g = Arc::new(build_graph(m, sample_points(&m, n, seed), cutoff).unwrap());
    let v = RepSpace::from_degrees(m.structure_group(), degrees).unwrap();
    let data = (0..g.len() * v.dim()).map(|k| ((k as f64 + 0.5) * 0.731 + seed as f64).sin()).collect();
    FeatureField::new(g, v, data).unwrap()
}

fn e3(degrees: &[(u32, usize)]) -> FeatureField {
    field(Manifold::euclidean(3).unwrap(), 12, 0.6, degrees, 1)
}

fn spec(l_base: u32, l_grp: u32) -> KernelSpec {
    KernelSpec::new(0.15, l_base, l_grp).unwrap()
}

fn isometries(m: &Manifold, n: usize, seed: u64) -> Vec<Isometry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Isometry::random(m, &mut rng)).collect()
}

fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn atomic_basis_matches_bundle_kernel_sum() {
    for f in [
        e3(&[(0, 1), (1, 1)]),
        field(Manifold::Sphere2, 14, 1.2, &[(0, 1), (1, 1)], 2),
        field(Manifold::euclidean(2).unwrap(), 10, 0.6, &[(2, 1)], 3),
    ] {
        let m = f.graph().manifold();
        let s = spec(6, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..f.len() {
            let g = GroupElement::random(m.structure_group(), &mut rng);
            let got = atomic_basis(i, &f, &s, &g).unwrap();
            let pi = f.graph().reference_point(i);
            let mut want = vec![0.0; f.space().dim()];
            for n in f.graph().neighbors(i) {
                let aligned = f.graph().reference_point(n.index).act(&m, &n.transport.inverse()).unwrap();
                let k = bundle_kernel(&s, &m, &pi, &aligned.act(&m, &g).unwrap()).unwrap();
                let h = f.space().apply(&n.transport, f.node(n.index)).unwrap();
                for (w, h) in want.iter_mut().zip(&h) {
                    *w += k * h;
                }
            }
            let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12, "{m} node {i}: {err}");
        }
    }
}

#[test]
fn atomic_basis_is_covariant() {
    let f = e3(&[(1, 1), (2, 1)]);
    let s = spec(0, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..5 {
        let g0 = GroupElement::random(GroupTag::So3, &mut rng);
        let (moved, _) = Isometry::rotation(g0).apply_field(&f).unwrap();
        let g = GroupElement::random(GroupTag::So3, &mut rng);
        let conj = g0.inverse().compose(&g).unwrap().compose(&g0).unwrap();
        for i in 0..f.len() {
            let lhs = atomic_basis(i, &moved, &s, &g).unwrap();
            let rhs = f.space().apply(&g0, &atomic_basis(i, &f, &s, &conj).unwrap()).unwrap();
            let err = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12);
        }
    }
}

#[test]
fn single_irrep_message_is_a_scaled_neighbor_sum() {
    for l in 0..=2 {
        let f = e3(&[(l, 1)]);
        let s = spec(0, 2);
        let msg = pairwise_message(&f, &s, &MessageConfig::pairwise()).unwrap();
        // Oracle factor: e^{-t·Cas} ∫ k^G(g) ρ(g)ᵀ dg on a rule far above the
        // integrand's band limit.
        let lab = IrrepLabel::so3(l);
        let rule = haar_rule(GroupTag::So3, 2 * (s.l_grp + l) + 4);
        let proj = integrate_over_group(
            |g| irrep_matrix(&lab, g).unwrap().transpose() * s.group(GroupTag::So3, g).unwrap(),
            &rule,
        )
        .unwrap();
        let factor = (-s.t * lab.casimir_value()).exp() * proj[(0, 0)];
        assert!(factor > 0.0);
        assert!((&proj - DMatrix::identity(lab.dim(), lab.dim()) * proj[(0, 0)]).amax() < 1e-12);
        let m = f.graph().manifold();
        for i in 0..f.len() {
            let mut want = vec![0.0; lab.dim()];
            for n in f.graph().neighbors(i) {
                let k = s.base(&m, f.graph().position(i), f.graph().position(n.index)).unwrap();
                for (w, h) in want.iter_mut().zip(f.node(n.index)) {
                    *w += factor * k * h;
                }
            }
            let err = msg.node(i).iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "l={l} node {i}: {err}");
        }
    }
}

#[test]
fn pairwise_equivariance_on_every_manifold() {
    let cases = [
        (e3(&[(0, 2), (1, 2), (2, 1)]), spec(0, 2)),
        (field(Manifold::euclidean(2).unwrap(), 12, 0.6, &[(0, 1), (1, 2), (2, 1)], 4), spec(0, 3)),
        (field(Manifold::Sphere2, 16, 1.2, &[(0, 1), (1, 1), (3, 1)], 5), spec(8, 3)),
    ];
    for (f, s) in cases {
        let m = f.graph().manifold();
        let cfg = MessageConfig::pairwise();
        let r = check_equivariance(&f, f.space(), &isometries(&m, 8, 9), 1e-8, |x| {
            Ok(pairwise_message(x, &s, &cfg)?.values)
        })
        .unwrap();
        assert!(r.pass, "{m}: {}", r.max_deviation);
    }
}

#[test]
fn higher_order_equivariance() {
    let f = e3(&[(0, 2), (1, 2), (2, 1)]);
    let s = spec(0, 2);
    let m = f.graph().manifold();
    let configs = [
        MessageConfig::scalar(2),
        MessageConfig::scalar(3),
        MessageConfig::tensor(2, vec![2, 3], 1),
        MessageConfig::tensor(2, vec![2, 4], 2),
        MessageConfig::tensor(3, vec![2, 3, 4], 0),
    ];
    for cfg in configs {
        let probe = higher_order_message(&f, &s, &cfg).unwrap();
        let r = check_equivariance(&f, &probe.space, &isometries(&m, 5, 10), 1e-8, |x| {
            Ok(higher_order_message(x, &s, &cfg)?.values)
        })
        .unwrap();
        assert!(r.pass, "{cfg:?}: {}", r.max_deviation);
    }
    for (f, s) in [
        (field(Manifold::euclidean(2).unwrap(), 12, 0.6, &[(0, 2), (1, 1)], 4), spec(0, 2)),
        (field(Manifold::Sphere2, 16, 1.2, &[(0, 2), (2, 1)], 5), spec(8, 2)),
    ] {
        let m = f.graph().manifold();
        let cfg = MessageConfig::scalar(2);
        let probe = higher_order_message(&f, &s, &cfg).unwrap();
        let r = check_equivariance(&f, &probe.space, &isometries(&m, 5, 11), 1e-8, |x| {
            Ok(higher_order_message(x, &s, &cfg)?.values)
        })
        .unwrap();
        assert!(r.pass, "{m}: {}", r.max_deviation);
    }
}

#[test]
fn first_order_reduces_to_pairwise_bitwise() {
    let f = e3(&[(0, 2), (1, 1), (2, 1)]);
    let s = spec(0, 2);
    let pair = pairwise_message(&f, &s, &MessageConfig::pairwise()).unwrap();
    let order = pair.quadrature_order;
    for c in 0..f.space().channels().len() {
        let ch = f.space().channels()[c];
        let cfg = MessageConfig { quadrature_order: Some(order), ..MessageConfig::tensor(1, vec![c], ch.irrep.degree) };
        let one = higher_order_message(&f, &s, &cfg).unwrap();
        for i in 0..f.len() {
            assert_eq!(one.node(i), &pair.node(i)[ch.range()]);
        }
    }
    let cfg = MessageConfig { quadrature_order: Some(order), ..MessageConfig::scalar(1) };
    let one = higher_order_message(&f, &s, &cfg).unwrap();
    assert_eq!(one.space.dim(), 2);
    for i in 0..f.len() {
        assert_eq!(one.node(i)[0], pair.node(i)[0]);
        assert_eq!(one.node(i)[1], pair.node(i)[1]);
    }
}

#[test]
fn closed_form_path_agrees_with_quadrature() {
    let f = e3(&[(0, 2), (1, 2), (2, 1)]);
    let s = spec(0, 2);
    let configs = [
        MessageConfig::scalar(1),
        MessageConfig::scalar(2),
        MessageConfig::tensor(1, vec![2], 1),
        MessageConfig::tensor(2, vec![2, 3], 0),
        MessageConfig::tensor(2, vec![2, 3], 1),
        MessageConfig::tensor(2, vec![2, 4], 2),
        MessageConfig::tensor(2, vec![4, 4], 2),
    ];
    for cfg in configs {
        let q = higher_order_message(&f, &s, &cfg).unwrap();
        let r = mace_reference_message(&f, &s, &cfg).unwrap();
        assert_eq!(q.space, r.space);
        let err = max_diff(&q.values, &r.values);
        assert!(err < 1e-8, "{cfg:?}: {err}");
    }
}

#[test]
fn closed_form_first_order_matches_pairwise() {
    let f = e3(&[(0, 1), (1, 1)]);
    let s = spec(0, 2);
    let pair = pairwise_message(&f, &s, &MessageConfig::pairwise()).unwrap();
    let r = mace_reference_message(&f, &s, &MessageConfig::scalar(1)).unwrap();
    for i in 0..f.len() {
        assert!((r.node(i)[0] - pair.node(i)[0]).abs() < 1e-8);
    }
}

#[test]
fn closed_form_path_is_euclidean_three_only() {
    let f = field(Manifold::Sphere2, 10, 1.0, &[(0, 1)], 2);
    assert!(matches!(
        mace_reference_message(&f, &spec(4, 1), &MessageConfig::scalar(1)),
        Err(crate::Error::UnsupportedConfiguration(_))
    ));
}

fn principal_sines(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    // Largest sine of the principal angles between two orthonormal bases,
    // taken from the residual of projecting one onto the other.
    let residual = b - a * (a.transpose() * b);
    residual.singular_values().max()
}

#[test]
fn coupling_paths_span_the_same_space() {
    // Factors (a, a, c) of l = 1 coupled to l = 1: the outputs live in the
    // two-dimensional span of (a·a)c and (a·c)a.
    let f = e3(&[(1, 2)]);
    let s = spec(0, 1);
    let orderings = [vec![0, 0, 1], vec![0, 1, 0], vec![1, 0, 0]];
    let outputs = |path: u32| -> Vec<Vec<Vec<f64>>> {
        orderings
            .iter()
            .map(|sel| {
                let cfg = MessageConfig { path: Some(vec![path]), ..MessageConfig::tensor(3, sel.clone(), 1) };
                let r = higher_order_message(&f, &s, &cfg).unwrap();
                assert_eq!(r.path, Some(vec![path]));
                r.values
            })
            .collect()
    };
    let (p0, p2) = (outputs(0), outputs(2));
    let mut checked = 0;
    for i in 0..f.len() {
        let cols = |o: &Vec<Vec<Vec<f64>>>| {
            DMatrix::from_columns(&o.iter().map(|v| DVector::from_column_slice(&v[i])).collect::<Vec<_>>())
        };
        let (a, b) = (cols(&p0), cols(&p2));
        let sv = a.singular_values();
        if sv.max() < 1e-6 {
            continue;
        }
        let rank = |m: &DMatrix<f64>| {
            let s = m.singular_values();
            s.iter().filter(|v| **v > 1e-9 * s.max()).count()
        };
        assert_eq!(rank(&a), 2, "node {i}");
        assert_eq!(rank(&b), 2, "node {i}");
        let trim = |m: &DMatrix<f64>| {
            let svd = m.clone().svd(true, false);
            svd.u.unwrap().columns(0, 2).into_owned()
        };
        assert!(principal_sines(&trim(&a), &trim(&b)) < 1e-8, "node {i}");
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn under_resolved_rules_are_refused() {
    let f = e3(&[(0, 1), (1, 1)]);
    let s = spec(0, 2);
    let cfg = MessageConfig { quadrature_order: Some(3), ..MessageConfig::tensor(2, vec![1, 1], 0) };
    let err = higher_order_message(&f, &s, &cfg).unwrap_err().to_string();
    assert!(err.contains("band limit"), "{err}");
    let cfg = MessageConfig { quadrature_order: Some(2), ..MessageConfig::pairwise() };
    assert!(pairwise_message(&f, &s, &cfg).is_err());
    let cfg = MessageConfig::tensor(2, vec![1, 1], 3);
    assert!(higher_order_message(&f, &s, &cfg).unwrap_err().to_string().contains("triangle"));
}

#[test]
fn certified_residual_is_negligible() {
    let f = e3(&[(0, 1), (1, 1)]);
    let r = higher_order_message(&f, &spec(0, 2), &MessageConfig::tensor(2, vec![1, 1], 1)).unwrap();
    assert_eq!(r.quadrature_order, 5);
    assert!(r.residual.unwrap() < 1e-10);
    let names: Vec<_> = r.timings.iter().map(|(n, _)| *n).collect();
    assert_eq!(names, ["kernel", "quadrature", "residual"]);
}

#[test]
fn band_limit_sweep_converges() {
    let f = e3(&[(0, 1), (1, 2)]);
    let s = spec(0, 2);
    let cfg = MessageConfig::tensor(2, vec![1, 2], 1);
    let sweep = band_limit_sweep(&f, &s, &cfg, 0..=7).unwrap();
    let (_, last) = *sweep.last().unwrap();
    assert!(last < 1e-8);
    assert!(sweep[0].1 > 1e-4);
    for w in sweep.windows(2) {
        assert!(w[1].1 <= w[0].1 + 1e-10, "{sweep:?}");
    }
}

#[test]
fn messages_commute_with_relabeling() {
    let m = Manifold::Sphere2;
    let pts = sample_points(&m, 14, 6);
    let v = RepSpace::from_degrees(GroupTag::So2, &[(0, 1), (1, 1)]).unwrap();
    let data: Vec<Vec<f64>> = (0..14).map(|i| (0..3).map(|k| ((i * 3 + k) as f64).cos()).collect()).collect();
    let perm: Vec<usize> = (0..14).map(|i| (i * 5 + 3) % 14).collect();
    let g1 = Arc::new(build_graph(m, pts.clone(), 1.2).unwrap());
    let g2 = Arc::new(build_graph(m, perm.iter().map(|&p| pts[p]).collect(), 1.2).unwrap());
    let f1 = FeatureField::from_nodes(g1, v.clone(), &data).unwrap();
    let f2 = FeatureField::from_nodes(g2, v, &perm.iter().map(|&p| data[p].clone()).collect::<Vec<_>>()).unwrap();
    let s = spec(8, 2);
    for cfg in [MessageConfig::pairwise(), MessageConfig::scalar(2)] {
        let run = |f: &FeatureField| {
            if cfg == MessageConfig::pairwise() {
                pairwise_message(f, &s, &cfg).unwrap()
            } else {
                higher_order_message(f, &s, &cfg).unwrap()
            }
        };
        let (a, b) = (run(&f1), run(&f2));
        for (k, &p) in perm.iter().enumerate() {
            let err = a.node(p).iter().zip(b.node(k)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12);
        }
    }
}

#[test]
fn circle_messages_need_no_group_integral() {
    let f = field(Manifold::Circle, 12, 0.8, &[(0, 2)], 7);
    let s = spec(10, 3);
    let r = pairwise_message(&f, &s, &MessageConfig::pairwise()).unwrap();
    assert_eq!(r.quadrature_order, 0);
    assert!(r.residual.is_none());
    let m = f.graph().manifold();
    for i in 0..f.len() {
        let mut want = [0.0; 2];
        for n in f.graph().neighbors(i) {
            let k = s.base(&m, f.graph().position(i), f.graph().position(n.index)).unwrap();
            want[0] += k * f.node(n.index)[0];
            want[1] += k * f.node(n.index)[1];
        }
        assert!((r.node(i)[0] - want[0]).abs() < 1e-13);
        assert!((r.node(i)[1] - want[1]).abs() < 1e-13);
    }
}

#[test]
fn character_power_matches_quadrature() {
    let t = 0.3;
    let a: Vec<f64> = (0..=2u32).map(|l| (2 * l + 1) as f64 * (-((l * (l + 1)) as f64) * t).exp()).collect();
    for n in 1..=3 {
        let p = character_power(&a, n);
        assert_eq!(p.len(), 2 * n + 1);
        let rule = haar_rule(GroupTag::So3, 4 * n as u32 + 2);
        for (l, c) in p.iter().enumerate() {
            let lab = IrrepLabel::so3(l as u32);
            let q = integrate_over_group(
                |g| {
                    let k = KernelSpec::new(t, 0, 2).unwrap().group(GroupTag::So3, g).unwrap();
                    DMatrix::from_element(1, 1, k.powi(n as i32) * character(&lab, g).unwrap())
                },
                &rule,
            )
            .unwrap()[(0, 0)];
            assert!((q - c).abs() < 1e-9 * c.abs().max(1.0), "n={n} l={l}");
        }
    }
}

#[test]
fn sphere_expansion_reconstructs_and_bounds_truncation() {
    let m = Manifold::Sphere2;
    let s = spec(12, 0);
    let e = expand_kernel(&s, &m, 12, &[]).unwrap();
    let pts = sample_points(&m, 8, 3);
    for x in &pts {
        for y in &pts {
            let k = s.base(&m, x, y).unwrap();
            assert!((e.reconstruct(x, y, None).unwrap() - k).abs() < 1e-12);
            for l in 0..12 {
                let err = (e.reconstruct(x, y, Some(l)).unwrap() - k).abs();
                assert!(err <= e.tail_bound(l) + 1e-14);
            }
        }
    }
    assert_eq!(e.tail_bound(12), 0.0);
}

#[test]
fn radial_expansion_reconstructs_gaussian() {
    let m = Manifold::euclidean(3).unwrap();
    let s = spec(0, 2);
    let pts = sample_points(&m, 6, 4);
    let radii: Vec<f64> = pts.iter().map(|p| (p - pts[0]).norm()).collect();
    let e = expand_kernel(&s, &m, 3, &radii).unwrap();
    for p in &pts {
        let k = s.base(&m, p, &pts[0]).unwrap();
        assert!((e.reconstruct(p, &pts[0], None).unwrap() - k).abs() < 1e-12);
    }
    assert!(e.tail_bound(0) < 1e-12);
    let off = pts[0] + nalgebra::Vector3::new(10.0, 0.0, 0.0);
    assert!(matches!(e.reconstruct(&off, &pts[0], None), Err(crate::Error::Domain(_))));
    assert!(expand_kernel(&s, &Manifold::euclidean(2).unwrap(), 2, &[]).is_err());
}

#[test]
fn linear_update_is_equivariant() {
    let f = e3(&[(0, 2), (1, 2)]);
    let s = spec(0, 2);
    let cfg = MessageConfig::pairwise();
    let msg = pairwise_message(&f, &s, &cfg).unwrap();
    let lin = LinearUpdate::from_blocks(
        &msg.space,
        &[
            (IrrepLabel::so3(0), DMatrix::from_row_slice(1, 2, &[0.5, -1.0])),
            (IrrepLabel::so3(1), DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 1.0, -0.3, 0.7])),
        ],
    )
    .unwrap();
    assert_eq!(lin.output(), &RepSpace::from_degrees(GroupTag::So3, &[(0, 1), (1, 3)]).unwrap());
    let mode = UpdateMode::Linear(lin.clone());
    let r = check_equivariance(&f, lin.output(), &isometries(&f.graph().manifold(), 5, 12), 1e-8, |x| {
        Ok(update(x, &pairwise_message(x, &s, &cfg)?, &mode)?.nodes())
    })
    .unwrap();
    assert!(r.pass, "{}", r.max_deviation);
    // The dense form of a valid update round-trips.
    assert!(LinearUpdate::from_dense(&msg.space, lin.output(), lin.matrix().clone()).is_ok());
}

#[test]
fn dense_weights_mixing_irreps_are_rejected() {
    let v = RepSpace::from_degrees(GroupTag::So3, &[(0, 1), (1, 1)]).unwrap();
    let mut w = DMatrix::identity(4, 4);
    w[(1, 0)] = 0.2;
    let err = LinearUpdate::from_dense(&v, &v, w).unwrap_err().to_string();
    assert!(err.contains("mix irreps"), "{err}");
    let mut w = DMatrix::identity(4, 4);
    w[(1, 2)] = 0.2;
    assert!(LinearUpdate::from_dense(&v, &v, w).is_err());
    // SO(2) intertwiners may include the quarter turn.
    let v2 = RepSpace::from_degrees(GroupTag::So2, &[(1, 1)]).unwrap();
    let rot = DMatrix::from_row_slice(2, 2, &[0.3, -0.8, 0.8, 0.3]);
    assert!(LinearUpdate::from_dense(&v2, &v2, rot).is_ok());
}

#[test]
fn gated_update_and_readout_are_equivariant() {
    let f = e3(&[(0, 2), (1, 1), (2, 1)]);
    let s = spec(0, 2);
    let cfg = MessageConfig::pairwise();
    let gate = GatedUpdate { weights: vec![vec![0.4, -1.2], vec![2.0, 0.1]], bias: vec![0.1, -0.5] };
    let mode = UpdateMode::Gated(gate);
    let isos = isometries(&f.graph().manifold(), 5, 13);
    let r = check_equivariance(&f, f.space(), &isos, 1e-8, |x| {
        Ok(update(x, &pairwise_message(x, &s, &cfg)?, &mode)?.nodes())
    })
    .unwrap();
    assert!(r.pass, "{}", r.max_deviation);

    let neutral = UpdateMode::Gated(GatedUpdate::neutral(f.space()));
    let msg = pairwise_message(&f, &s, &cfg).unwrap();
    assert_eq!(update(&f, &msg, &neutral).unwrap().data(), msg.flat().as_slice());

    let w = [1.0, -0.5, 0.0, 0.0];
    let (_, total) = readout(&f, &w).unwrap();
    for iso in &isos {
        let (moved, _) = iso.apply_field(&f).unwrap();
        assert!((readout(&moved, &w).unwrap().1 - total).abs() < 1e-12);
    }
    assert!(readout(&f, &[1.0, 0.0, 0.3, 0.0]).unwrap_err().to_string().contains("not invariant"));
    assert!(readout(&f, &[1.0]).is_err());
}
