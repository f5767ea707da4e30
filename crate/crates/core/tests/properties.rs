use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;

use equidiff::bundle::{ChartId, FeatureField, Isometry};
use equidiff::diffusion::{build_graph, euler_step, polyakov_energy, stable_dt, EnergyConfig};
use equidiff::group::{clebsch_gordan, irrep_matrix, triangle, GroupElement, GroupTag, IrrepLabel, RepSpace};
use equidiff::io::{gen_graph, graph_to_json, parse_graph, FieldInit};
use equidiff::manifold::{base_heat_kernel, base_positivity_threshold, sample_points, KernelSpec, Manifold};
use equidiff::message::{pairwise_message, MessageConfig};

fn so3() -> impl Strategy<Value = GroupElement> {
    (0.0..TAU, 0.0..PI, 0.0..TAU).prop_map(|(a, b, c)| GroupElement::from_euler(a, b, c))
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn manifold() -> impl Strategy<Value = Manifold> {
    prop_oneof![
        Just(Manifold::Sphere2),
        Just(Manifold::Circle),
        Just(Manifold::Euclidean { dim: 2 }),
        Just(Manifold::Euclidean { dim: 3 }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn irreps_are_orthogonal_homomorphisms(g in so3(), h in so3(), l in 0u32..=4) {
        let label = IrrepLabel::so3(l);
        let gh = irrep_matrix(&label, &g.compose(&h).unwrap()).unwrap();
        let prod = irrep_matrix(&label, &g).unwrap() * irrep_matrix(&label, &h).unwrap();
        prop_assert!(max_abs(&(gh - &prod)) < 1e-12);
        let d = label.dim();
        prop_assert!(max_abs(&(prod.transpose() * &prod - DMatrix::identity(d, d))) < 1e-12);
    }

    #[test]
    fn coupling_intertwines(g in so3(), l1 in 0u32..=3, l2 in 0u32..=3, l in 0u32..=6, seed in 0u64..1000) {
        prop_assume!(triangle(l1, l2, l));
        let cg = clebsch_gordan(l1, l2, l);
        let (a, b) = (IrrepLabel::so3(l1), IrrepLabel::so3(l2));
        let x: Vec<f64> = (0..a.dim()).map(|k| ((k as u64 + seed) as f64 * 0.7).sin()).collect();
        let y: Vec<f64> = (0..b.dim()).map(|k| ((k as u64 * 3 + seed) as f64 * 0.3).cos()).collect();
        let rx = irrep_matrix(&a, &g).unwrap() * nalgebra::DVector::from_vec(x.clone());
        let ry = irrep_matrix(&b, &g).unwrap() * nalgebra::DVector::from_vec(y.clone());
        let lhs = cg.couple(rx.as_slice(), ry.as_slice());
        let rhs = irrep_matrix(&IrrepLabel::so3(l), &g).unwrap() * nalgebra::DVector::from_vec(cg.couple(&x, &y));
        for (p, q) in lhs.iter().zip(rhs.iter()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn base_kernels_are_symmetric_and_positive(m in manifold(), seed in 0u64..500, t in 0.05f64..2.0) {
        let pts = sample_points(&m, 2, seed);
        let l = 16;
        let k = base_heat_kernel(&m, t, &pts[0], &pts[1], l).unwrap();
        let k_swap = base_heat_kernel(&m, t, &pts[1], &pts[0], l).unwrap();
        prop_assert!((k - k_swap).abs() <= 1e-15 * k.abs().max(1.0));
        if matches!(m, Manifold::Euclidean { .. }) || t > base_positivity_threshold(&m, l) {
            prop_assert!(k > 0.0);
        }
    }

    #[test]
    fn graph_documents_round_trip(m in manifold(), seed in 0u64..500, n in 1usize..14) {
        let space = if m == Manifold::Circle {
            RepSpace::scalars(GroupTag::So2, 2).unwrap()
        } else {
            RepSpace::from_degrees(m.structure_group(), &[(0, 1), (1, 1), (2, 1)]).unwrap()
        };
        let cutoff = if m == Manifold::Sphere2 { 1.0 } else { 0.5 };
        let field = gen_graph(m, n, cutoff, seed, &space, FieldInit::Random).unwrap();
        let text = graph_to_json(&field);
        let (back, discrepancies) = parse_graph(&text, "doc").unwrap();
        prop_assert_eq!(discrepancies, 0);
        prop_assert_eq!(&back, &field);
        prop_assert_eq!(graph_to_json(&back), text);
    }

    #[test]
    fn energy_splits_and_decreases(seed in 0u64..500, n in 2usize..12) {
        let m = Manifold::euclidean(3).unwrap();
        let space = RepSpace::from_degrees(GroupTag::So3, &[(0, 1), (1, 1), (2, 1)]).unwrap();
        let f = gen_graph(m, n, 0.6, seed, &space, FieldInit::Random).unwrap();
        let cfg = EnergyConfig::default();
        let w = cfg.edge_weights(f.graph()).unwrap();
        let e = polyakov_energy(&f, &w, &cfg).unwrap();
        prop_assert!((e.total - (e.dirichlet + e.casimir)).abs() <= 1e-12 * e.total.max(1.0));
        prop_assert!(e.dirichlet >= 0.0 && e.casimir >= 0.0);
        let next = euler_step(&f, stable_dt(&w, f.space()), &w).unwrap();
        prop_assert!(polyakov_energy(&next, &w, &cfg).unwrap().total <= e.total);
    }

    #[test]
    fn gauge_changes_round_trip(seed in 0u64..500) {
        let m = Manifold::Sphere2;
        let graph = Arc::new(build_graph(m, sample_points(&m, 10, seed), 1.0).unwrap());
        let space = RepSpace::from_degrees(GroupTag::So2, &[(0, 1), (1, 2), (3, 1)]).unwrap();
        let data = (0..graph.len() * space.dim()).map(|k| ((k as u64 + seed) as f64 * 0.41).sin()).collect();
        let f = FeatureField::new(graph.clone(), space, data).unwrap();
        let mut g = f.clone();
        for i in 0..graph.len() {
            g = g.gauge_transform(i, ChartId::South).unwrap();
        }
        let back = g.canonical().unwrap();
        for (a, b) in back.data().iter().zip(f.data()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pairwise_messages_commute_with_isometries(m in manifold(), seed in 0u64..200, iso_seed in 0u64..1000) {
        prop_assume!(m != Manifold::Circle);
        let space = RepSpace::from_degrees(m.structure_group(), &[(0, 1), (1, 1), (2, 1)]).unwrap();
        let cutoff = if m == Manifold::Sphere2 { 1.0 } else { 0.6 };
        let field = gen_graph(m, 9, cutoff, seed, &space, FieldInit::Random).unwrap();
        let spec = KernelSpec::new(0.3, 8, 2).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(iso_seed);
        let iso = Isometry::random(&m, &mut rng);
        let (moved, actions) = iso.apply_field(&field).unwrap();
        let cfg = MessageConfig::pairwise();
        let base = pairwise_message(&field, &spec, &cfg).unwrap();
        let out = pairwise_message(&moved, &spec, &cfg).unwrap();
        for (i, e) in actions.iter().enumerate() {
            let expected = space.apply(e, base.node(i)).unwrap();
            for (p, q) in out.node(i).iter().zip(&expected) {
                prop_assert!((p - q).abs() < 1e-8 * (1.0 + q.abs()));
            }
        }
    }
}
