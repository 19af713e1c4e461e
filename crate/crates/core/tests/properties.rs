mod common;

use std::sync::Arc;

use common::*;
use num_complex::Complex64;
use opkernel::algebra::{cyclic_group_table, Algebra, Element};
use opkernel::domination::{dominates, radon_nikodym};
use opkernel::io;
use opkernel::kernel::{random_in_m, RandomParams};
use opkernel::stinespring::factor;
use opkernel::{Error, Kernel32};
use proptest::prelude::*;
use rand::Rng;

fn config() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    prop::collection::vec((1usize..=2, 1usize..=2), 1..=2).prop_map(|v| v.into_iter().unzip())
}

fn algebra_strategy() -> impl Strategy<Value = Algebra<f64>> {
    prop_oneof![
        prop::collection::vec(1usize..=3, 1..=2).prop_map(|d| Algebra::from_matrix_blocks(&d).unwrap()),
        (1usize..=4).prop_map(|n| Algebra::from_group_table(&cyclic_group_table(n), 0).unwrap()),
        Just(Algebra::from_group_table(&s3_table(), 0).unwrap()),
    ]
}

fn element(alg: &Algebra<f64>, seed: u64) -> Element<f64> {
    let mut g = rng(seed);
    let coords = nalgebra::DVector::from_fn(alg.dim(), |_, _| gauss(&mut g));
    alg.element(coords).unwrap()
}

fn close(a: &M, b: &M, tol: f64) -> bool {
    fro(&(a - b)) <= tol * fro(b).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn algebra_laws(alg in algebra_strategy(), s in any::<u64>()) {
        let (a, b, c) = (element(&alg, s), element(&alg, s ^ 1), element(&alg, s ^ 2));
        let ab_c = alg.multiply(&alg.multiply(&a, &b).unwrap(), &c).unwrap();
        let a_bc = alg.multiply(&a, &alg.multiply(&b, &c).unwrap()).unwrap();
        prop_assert!((ab_c.coords - a_bc.coords).norm() <= 1e-10 * a.coords.norm().max(1.0).powi(3) * 10.0);

        let ab_star = alg.adjoint(&alg.multiply(&a, &b).unwrap()).unwrap();
        let b_star_a_star = alg.multiply(&alg.adjoint(&b).unwrap(), &alg.adjoint(&a).unwrap()).unwrap();
        prop_assert!((ab_star.coords - b_star_a_star.coords).norm() <= 1e-9);
        prop_assert_eq!(alg.adjoint(&alg.adjoint(&a).unwrap()).unwrap(), a.clone());

        let unit_a = alg.multiply(&alg.unit(), &a).unwrap();
        prop_assert!((unit_a.coords - &a.coords).norm() <= 1e-12 * a.coords.norm().max(1.0));

        // matrix picture agrees with the structure constants
        let ra = alg.represent(&a).unwrap();
        let rb = alg.represent(&b).unwrap();
        let rab = alg.represent(&alg.multiply(&a, &b).unwrap()).unwrap();
        prop_assert!(close(&(&ra * &rb), &rab, 1e-10));
        prop_assert!(close(&ra.adjoint(), &alg.represent(&alg.adjoint(&a).unwrap()).unwrap(), 1e-12));
        let back = alg.expand(&ra);
        prop_assert!((back - &a.coords).norm() <= 1e-12 * a.coords.norm().max(1.0));

        // left multiplication is a *-homomorphism into the coordinate matrices
        let la = alg.left_mult_matrix(&a).unwrap();
        let lb = alg.left_mult_matrix(&b).unwrap();
        let lab = alg.left_mult_matrix(&alg.multiply(&a, &b).unwrap()).unwrap();
        prop_assert!(close(&(&la * &lb), &lab, 1e-10));

        // C*-identity ||a* a|| = ||a||^2
        let n = alg.op_norm(&a).unwrap();
        let nn = alg.op_norm(&alg.multiply(&alg.adjoint(&a).unwrap(), &a).unwrap()).unwrap();
        prop_assert!((nn - n * n).abs() <= 1e-9 * nn.max(1.0));
    }

    #[test]
    fn random_kernels_are_positive((dims, mult) in config(), m in 1usize..=3, n in 1usize..=2, seed in any::<u64>()) {
        let alg = blocks_alg(&dims);
        let rk = instance(&alg, &mult, m, n, seed);
        let k = &rk.kernel;
        let mem = k.is_in_class_m(1e-9).unwrap();
        prop_assert!(mem.in_class);
        prop_assert!(mem.witness.is_none());
        let grid = k.gram().unwrap();
        prop_assert!(close(&grid.gram, &gram_oracle(k), 1e-12));

        // the class is a convex cone
        let other = instance(&alg, &mult, m, n, seed.wrapping_add(1)).kernel;
        prop_assert!(k.add(&other).unwrap().is_in_class_m(1e-9).unwrap().in_class);
        prop_assert!(k.scale(0.3).is_in_class_m(1e-9).unwrap().in_class);
    }

    #[test]
    fn order_axioms((dims, mult) in config(), m in 1usize..=2, n in 1usize..=2, seed in any::<u64>()) {
        let alg = blocks_alg(&dims);
        let l = instance(&alg, &mult, m, n, seed).kernel;
        let j = instance(&alg, &mult, m, n, seed.wrapping_add(7)).kernel;
        // reflexive
        prop_assert!(dominates(&l, &l, 1e-9).unwrap().in_class);
        // 0 <= K <= K + J and transitivity through a scaled chain
        let zero = l.scale(0.0);
        prop_assert!(dominates(&zero, &l, 1e-9).unwrap().in_class);
        prop_assert!(dominates(&l, &l.add(&j).unwrap(), 1e-9).unwrap().in_class);
        let half = l.scale(0.5);
        let quarter = l.scale(0.25);
        prop_assert!(dominates(&quarter, &half, 1e-9).unwrap().in_class);
        prop_assert!(dominates(&half, &l, 1e-9).unwrap().in_class);
        prop_assert!(dominates(&quarter, &l, 1e-9).unwrap().in_class);
        // antisymmetric in the strict direction
        prop_assert!(!dominates(&l.scale(1.5), &l, 1e-9).unwrap().in_class);
    }

    #[test]
    fn derivative_is_monotone((dims, mult) in config(), m in 1usize..=2, n in 1usize..=2, seed in any::<u64>()) {
        let alg = blocks_alg(&dims);
        let rk = instance(&alg, &mult, m, n, seed);
        let l = &rk.kernel;
        let fl = factor(l, 1e-10).unwrap();
        let w1 = rk.truth.random_commutant_contraction(seed ^ 0xa);
        // K2 = K1 + (W1 scaled) stays below L since W1 <= 1/(1+u) < 1
        let k1 = rk.truth.kernel(l.points().to_vec(), alg.clone(), Some(&(&w1 * Complex64::new(0.5, 0.0)))).unwrap();
        let k2 = rk.truth.kernel(l.points().to_vec(), alg.clone(), Some(&w1)).unwrap();
        let c1 = radon_nikodym(&k1, l, &fl, 1e-8).unwrap();
        let c2 = radon_nikodym(&k2, l, &fl, 1e-8).unwrap();
        // K1 <= K2 implies dK1/dL <= dK2/dL
        let gap = &c2.a - &c1.a;
        prop_assert!(min_eigenvalue(&gap) >= -1e-9);
        // dK/dL of a sum is the sum of derivatives
        let sum = radon_nikodym(&k1.scale(0.5).add(&k2.scale(0.5)).unwrap(), l, &fl, 1e-8).unwrap();
        let avg = (&c1.a + &c2.a) * Complex64::new(0.5, 0.0);
        prop_assert!(close(&sum.a, &avg, 1e-9));
    }

    #[test]
    fn kernel_files_round_trip(alg in algebra_strategy(), m in 1usize..=2, n in 1usize..=2, seed in any::<u64>()) {
        let alg = Arc::new(alg);
        let mult = vec![1; alg.block_dims().len()];
        let rk = random_in_m(alg, &RandomParams { m, n, multiplicities: mult, seed }).unwrap();
        let text = io::to_json_string(&io::kernel_to_file(&rk.kernel)).unwrap();
        let file: io::KernelFile = serde_json::from_str(&text).unwrap();
        let back = io::kernel_from_file::<f64>(&file).unwrap();
        prop_assert_eq!(back.blocks(), rk.kernel.blocks());

        let f = factor(&rk.kernel, 1e-10).unwrap();
        let text = io::to_json_string(&io::factorization_to_file(&f)).unwrap();
        let ff: io::FactorizationFile = serde_json::from_str(&text).unwrap();
        let g = io::factorization_from_file(&ff, &back).unwrap();
        prop_assert_eq!(g.v(), f.v());
        prop_assert_eq!(g.pi(), f.pi());
    }
}

/// Domination holds exactly when a contractive certificate exists.
#[test]
fn domination_matches_certificate_existence() {
    let mut g = rng(77);
    let mut yes = 0;
    let mut no = 0;
    for s in 0..24u64 {
        let (dims, mult) = random_config(&mut g, 3, 2);
        let alg = blocks_alg(&dims);
        let m = g.random_range(1..=2);
        let n = g.random_range(1..=2);
        let rk = instance(&alg, &mult, m, n, 900 + s);
        let l = &rk.kernel;
        let fl = factor(l, 1e-10).unwrap();
        let k = match s % 3 {
            0 => l.scale(g.random_range(0.0..1.0)),
            1 => l.scale(g.random_range(1.1..2.0)),
            _ => {
                let w = rk.truth.random_commutant_contraction(s);
                rk.truth.kernel(l.points().to_vec(), alg.clone(), Some(&(&w * Complex64::new(1.8, 0.0)))).unwrap()
            }
        };
        let decided = dominates(&k, l, 1e-9).unwrap().in_class;
        match radon_nikodym(&k, l, &fl, 1e-8) {
            Ok(cert) => {
                assert!(decided, "certificate for a non-dominated pair ({s})");
                assert!(cert.spectrum_t.iter().all(|&x| (-1e-8..=1.0 + 1e-8).contains(&x)));
                yes += 1;
            }
            Err(Error::NotDominated { .. } | Error::ContractionViolation { .. }) => {
                assert!(!decided, "no certificate for a dominated pair ({s})");
                no += 1;
            }
            Err(e) => panic!("unexpected error {e}"),
        }
    }
    assert!(yes >= 8 && no >= 8, "{yes} dominated, {no} not");
}

#[test]
fn single_precision_pipeline() {
    let alg = Arc::new(Algebra::<f32>::from_matrix_blocks(&[2, 1]).unwrap());
    let rk = random_in_m(alg, &RandomParams { m: 2, n: 2, multiplicities: vec![1, 1], seed: 5 }).unwrap();
    let k: &Kernel32 = &rk.kernel;
    assert!(k.is_in_class_m(1e-5).unwrap().in_class);
    let f = factor(k, 1e-5).unwrap();
    assert_eq!(f.r(), rk.truth.r());
    assert!(f.reconstruct().unwrap().max_block_residual(k).unwrap() < 1e-4);
    let half = k.scale(0.5);
    let cert = radon_nikodym(&half, k, &f, 1e-4).unwrap();
    let lambda = cert.lambda.unwrap();
    assert!((lambda.re - 0.5).abs() < 1e-4 && lambda.im.abs() < 1e-4);
}

#[test]
fn negative_kernel_witness_lives_on_the_grid() {
    let alg = blocks_alg(&[2]);
    let a = instance(&alg, &[1], 2, 1, 1).kernel;
    let b = instance(&alg, &[1], 2, 1, 2).kernel;
    let k = a.sub(&b).unwrap();
    let err = factor(&k, 1e-10).unwrap_err();
    let Error::NotPositive { witness, min_eigenvalue, .. } = err else {
        panic!("expected a positivity failure");
    };
    assert!(min_eigenvalue < 0.0);
    assert!(!witness.terms.is_empty());
    let grid = k.grid_size();
    assert_eq!(witness.coefficients.len(), grid);
    for t in &witness.terms {
        assert!(t.point < 2 && t.alpha < alg.dim() && t.p < 1);
        assert_eq!(t.label, k.points()[t.point]);
    }
    let family = k.witness_family(&witness).unwrap();
    let sum = k.family_sum(&family).unwrap();
    assert!((sum.re - witness.eigenvalue).abs() < 1e-9 * witness.eigenvalue.abs().max(1.0));
}
