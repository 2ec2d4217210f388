//! Property tests for the invariants of each module.

use std::collections::BTreeSet;

use nalgebra::{Matrix2, Rotation3, Vector2, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use pssa::grassmann::{chordal_distance, chordal_distance_via_complement, grassmann_pssa_chain, principal_angles, GrassmannPoint};
use pssa::linalg::{orthonormalize, projection_residual, Matrix, Vector};
use pssa::polysphere::{coupled_tangent_model, fit_coupled_spheres, lie_triple_check, TangentBlockVector};
use pssa::report::Report;
use pssa::sphere::{projection_distance_to_subsphere, riemannian_distance_to_subsphere, sphere_pssa_chain, SpherePoint};
use pssa::synth::generate;
use pssa::torus::{
    enumerate_resonances, fit_subtorus, hermite_normal_form, is_unimodular, lattice::minor_gcd, reduce_resonance_basis,
    same_row_lattice, wrap_half, IntMatrix, ResonanceMatrix, TorusPoint,
};
use pssa::pipeline::tree_report;
use pssa::tree::{build_tree, Dataset, NodeModel, PssaConfig, PssaNode};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| normal(rng))
}

fn unit_columns(rng: &mut ChaCha8Rng, dim: usize, count: usize) -> Matrix {
    let mut x = gaussian(rng, dim, count);
    for mut c in x.column_iter_mut() {
        let n = c.norm();
        c /= n;
    }
    x
}

fn random_plane(rng: &mut ChaCha8Rng, n: usize, k: usize) -> GrassmannPoint {
    GrassmannPoint::new(orthonormalize(&gaussian(rng, n, k)).unwrap()).unwrap()
}

fn unit3(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::new(normal(rng), normal(rng), normal(rng)).normalize()
}

fn rotation(rng: &mut ChaCha8Rng) -> Rotation3<f64> {
    Rotation3::from_euler_angles(rng.random::<f64>() * 6.0, rng.random::<f64>() * 6.0, rng.random::<f64>() * 6.0)
}

fn torus_points(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<TorusPoint> {
    (0..count)
        .map(|_| TorusPoint::new((0..n).map(|_| rng.random::<f64>()).collect()).unwrap())
        .collect()
}

fn gram_defect(a: &IntMatrix) -> f64 {
    let rows = a.to_f64_rows();
    let k = rows.len();
    let g = nalgebra::DMatrix::from_fn(k, k, |i, j| rows[i].iter().zip(&rows[j]).map(|(x, y)| x * y).sum::<f64>());
    let norms: f64 = (0..k).map(|i| g[(i, i)].sqrt()).product();
    norms / g.determinant().sqrt()
}

fn check_tree(node: &PssaNode) -> Result<(), String> {
    for c in &node.children {
        if c.dim >= node.dim {
            return Err(format!("child {} of dim {} under {} of dim {}", c.label, c.dim, node.label, node.dim));
        }
        let failed = matches!(c.model, NodeModel::Failed { .. });
        if !failed && c.fit_error + 1e-12 < node.fit_error {
            return Err(format!("fit error drops from {} to {} at {}", node.fit_error, c.fit_error, c.label));
        }
        check_tree(c)?;
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sphere_chain_is_nested_and_monotone(seed in any::<u64>(), n in 2usize..6, count in 6usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = unit_columns(&mut rng, n + 1, count);
        let chain = sphere_pssa_chain(&x).unwrap();
        for w in chain.windows(2) {
            prop_assert!(projection_residual(&w[1].subspace_basis(), &w[0].subspace_basis()) < 1e-8);
            prop_assert!(w[1].total_error + 1e-12 >= w[0].total_error);
        }
    }

    #[test]
    fn sphere_projection_distance_is_sine_of_geodesic(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = SpherePoint::normalized(Vector::from_fn(n + 1, |_, _| normal(&mut rng))).unwrap();
        let m = 1 + rng.random_range(0..n);
        let v = orthonormalize(&gaussian(&mut rng, n + 1, m)).unwrap();
        let p = projection_distance_to_subsphere(&x, &v).unwrap();
        let r = riemannian_distance_to_subsphere(&x, &v).unwrap();
        prop_assert!((p - r.sin()).abs() < 1e-10);
    }

    #[test]
    fn grassmann_distance_identities(seed in any::<u64>(), n in 3usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(1..n);
        let (x, y) = (random_plane(&mut rng, n, k), random_plane(&mut rng, n, k));
        let d = chordal_distance(&x, &y).unwrap();
        let sines = principal_angles(&x, &y).unwrap().iter().map(|t| t.sin().powi(2)).sum::<f64>().sqrt();
        prop_assert!((d - sines).abs() < 1e-10);
        prop_assert!((d - chordal_distance_via_complement(&x, &y).unwrap()).abs() < 1e-10);
        prop_assert!((d - chordal_distance(&y, &x).unwrap()).abs() < 1e-12);
        prop_assert!(chordal_distance(&x, &x).unwrap() < 1e-7);
    }

    #[test]
    fn grassmann_chain_is_nested(seed in any::<u64>(), n in 3usize..6, count in 4usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(1..n);
        let planes: Vec<GrassmannPoint> = (0..count).map(|_| random_plane(&mut rng, n, k)).collect();
        let chain = grassmann_pssa_chain(&planes, n - k).unwrap();
        for w in chain.windows(2) {
            prop_assert!(projection_residual(&w[0].complement_frame, &w[1].complement_frame) < 1e-8);
            prop_assert!(w[1].total_error + 1e-12 >= w[0].total_error);
        }
    }

    #[test]
    fn torus_fit_is_translation_equivariant(seed in any::<u64>(), which in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = [vec![vec![2, 5]], vec![vec![1, -1, 0]], vec![vec![-1, -1, 1], vec![-2, 1, 0]]][which].clone();
        let a = ResonanceMatrix::from_rows(&rows).unwrap();
        let n = rows[0].len();
        let points = torus_points(&mut rng, n, 20);
        let t: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let moved: Vec<TorusPoint> = points.iter().map(|p| p.translate(&t)).collect();
        let (Ok(f), Ok(g)) = (fit_subtorus(&points, &a), fit_subtorus(&moved, &a)) else {
            return Ok(());
        };
        for (j, row) in rows.iter().enumerate() {
            let shift: f64 = row.iter().zip(&t).map(|(r, x)| *r as f64 * x).sum();
            prop_assert!(wrap_half(g.offset[j] - f.offset[j] - shift).abs() < 1e-9);
        }
        prop_assert!((f.mean_error - g.mean_error).abs() < 1e-9);
    }

    #[test]
    fn procrustes_is_equivariant(seed in any::<u64>(), count in 3usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs: Vec<(Vector3<f64>, Vector3<f64>)> = (0..count).map(|_| (unit3(&mut rng), unit3(&mut rng))).collect();
        let (p, q) = (rotation(&mut rng), rotation(&mut rng));
        let moved: Vec<_> = pairs.iter().map(|(x, y)| (p * x, q * y)).collect();
        let f = fit_coupled_spheres(&pairs).unwrap();
        let g = fit_coupled_spheres(&moved).unwrap();
        prop_assert!((f.error - g.error).abs() < 1e-8 * (1.0 + f.error));
        if !f.degenerate && !g.degenerate {
            let expected = q.matrix() * f.rotation * p.matrix().transpose();
            prop_assert!((expected - g.rotation).norm() < 1e-6);
        }
    }

    #[test]
    fn lie_triple_verdict_ignores_basis_choice(angle in 0.0f64..6.3, scale in 0.2f64..3.0, mix in 0.1f64..5.0) {
        let r = Matrix2::new(angle.cos(), -angle.sin(), angle.sin(), angle.cos());
        for b in [r, r * scale] {
            let basis = coupled_tangent_model(&b);
            let mixed = vec![
                TangentBlockVector(basis[0].0.iter().zip(&basis[1].0).map(|(u, v)| u * mix + v).collect::<Vec<Vector2<f64>>>()),
                TangentBlockVector(basis[1].0.iter().map(|v| v * -2.0).collect()),
            ];
            let verdict = lie_triple_check(&basis).unwrap();
            prop_assert_eq!(verdict, lie_triple_check(&mixed).unwrap());
            prop_assert_eq!(verdict, b == r || (scale - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn reduction_keeps_lattice_and_improves_gram(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<i64>> = (0..2).map(|_| (0..3).map(|_| rng.random_range(-9i64..10)).collect()).collect();
        let Ok(a) = ResonanceMatrix::from_rows(&rows) else {
            return Ok(());
        };
        let mut m = a.matrix().clone();
        // skew the basis by a unimodular row operation
        let t = IntMatrix::from_rows(&[vec![1, rng.random_range(-6i64..7)], vec![0, 1]]);
        m = t.mul(&m);
        let skewed = ResonanceMatrix::new(m).unwrap();
        let reduced = reduce_resonance_basis(&skewed).unwrap();
        prop_assert!(same_row_lattice(reduced.matrix(), skewed.matrix()));
        prop_assert!(gram_defect(reduced.matrix()) <= gram_defect(skewed.matrix()) + 1e-9);
    }

    #[test]
    fn torus_tree_dims_decrease(seed in 0u64..1000) {
        let s = generate("torus-123", seed).unwrap();
        let cfg = PssaConfig { max_children_per_node: 2, resonance_bound: 4, ..Default::default() };
        let root = build_tree(&s.data, s.data.manifold().unwrap(), &cfg).unwrap();
        prop_assert!(check_tree(&root).is_ok(), "{:?}", check_tree(&root));
    }
}

#[test]
fn sphere_and_polysphere_trees_decrease() {
    let cfg = PssaConfig {
        max_children_per_node: 2,
        resonance_bound: 4,
        ..Default::default()
    };
    for id in ["sphere-1", "sphere-3", "polysphere-coupled", "polysphere-torus"] {
        let s = generate(id, 3).unwrap();
        let root = build_tree(&s.data, s.data.manifold().unwrap(), &cfg).unwrap();
        check_tree(&root).unwrap();
    }
}

#[test]
fn grassmann_tree_decreases() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let planes: Vec<GrassmannPoint> = (0..10).map(|_| random_plane(&mut rng, 5, 2)).collect();
    let data = Dataset::Grassmannian(planes);
    let root = build_tree(&data, data.manifold().unwrap(), &PssaConfig::default()).unwrap();
    check_tree(&root).unwrap();
}

#[test]
fn serialized_trees_are_deterministic() {
    let cfg = PssaConfig {
        max_children_per_node: 2,
        resonance_bound: 5,
        ..Default::default()
    };
    for id in ["sphere-2", "torus-25", "polysphere-torus"] {
        let s = generate(id, 5).unwrap();
        let a = tree_report(&s.data, &cfg).unwrap().to_json().unwrap();
        let b = tree_report(&s.data, &cfg).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        assert_eq!(Report::from_json(&a).unwrap().to_json().unwrap(), a);
    }
}

#[test]
fn enumeration_matches_hermite_dedup() {
    for (n, k, bound) in [(2, 1, 4), (3, 1, 3), (3, 2, 3), (4, 2, 2), (4, 3, 2)] {
        let b = bound as i64 - 1;
        let side = (2 * b + 1) as usize;
        let mut brute = BTreeSet::new();
        for code in 0..side.pow((n * k) as u32) {
            let mut c = code;
            let rows: Vec<Vec<i64>> = (0..k)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            let v = (c % side) as i64 - b;
                            c /= side;
                            v
                        })
                        .collect()
                })
                .collect();
            let m = IntMatrix::from_rows(&rows);
            if minor_gcd(&m) == 1.into() {
                brute.insert(hermite_normal_form(&m).0);
            }
        }
        let found: Vec<IntMatrix> = enumerate_resonances(n, k, bound)
            .iter()
            .map(|a| {
                assert!(is_unimodular(a.matrix()).unwrap());
                hermite_normal_form(a.matrix()).0
            })
            .collect();
        let distinct: BTreeSet<IntMatrix> = found.iter().cloned().collect();
        assert_eq!(distinct.len(), found.len(), "duplicates for n={n} k={k}");
        assert_eq!(distinct, brute, "n={n} k={k} bound={bound}");
    }
}
