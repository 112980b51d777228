//! Properties of the algebraic layer: rings, posets, triangular calculus, chain
//! complexes and K₁ data. Inputs come from the seeded generators.

use std::collections::{BTreeMap, BTreeSet};

use ctrlk_core::chains::{
    find_cancellation, fold_two_degrees, mapping_cone, standardize_cancellation, validate_complex, ChainComplex,
    Contraction,
};
use ctrlk_core::gen;
use ctrlk_core::ksimplex::{
    cancellation_data, fix_signs, validate_k1_morphism, validate_k1_simplex, volodin_check, volodin_to_k1,
    K1SimplexData, SignMode, VolodinPath,
};
use ctrlk_core::morphisms::{
    decompose_triangular, factor_elementary, invert_triangular, multiply_factors, Morphism,
};
use ctrlk_core::posets::{find_common_order, validate_poset, Poset, PosetError};
use ctrlk_core::rings::{identity_matrix, matrix_inverse_oracle, matrix_mul, Elem, Ring, UnitKind};
use ctrlk_core::Label;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ring_for(i: u8) -> Ring {
    match i % 3 {
        0 => Ring::Z,
        1 => Ring::zmod(5).unwrap(),
        _ => Ring::zmod(7).unwrap(),
    }
}

/// A linear extension of `p`, picking minimal elements in label order.
fn linear_extension(p: &Poset) -> Poset {
    let mut left: BTreeSet<Label> = p.elements().clone();
    let mut out = Vec::new();
    while !left.is_empty() {
        let m = left.iter().find(|x| !left.iter().any(|y| p.lt(y, x))).cloned().unwrap();
        left.remove(&m);
        out.push(m);
    }
    Poset::chain(&out)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unit_inverse_is_involutive(seed: u64, which in 0u8..4) {
        let mut r = rng(seed);
        let ring = match which {
            0 => Ring::Z,
            1 => Ring::zmod(7).unwrap(),
            2 => Ring::Laurent,
            _ => Ring::group_ring(vec![vec![0, 1, 2], vec![1, 2, 0], vec![2, 0, 1]]).unwrap(),
        };
        let u = gen::unit(&mut r, &ring);
        let inv = ring.invert_unit(&u).unwrap();
        prop_assert_eq!(ring.invert_unit(&inv).unwrap(), u.clone());
        prop_assert!(ring.is_one(&ring.mul(&u, &inv)));
    }

    #[test]
    fn oracle_inverse_is_exact(seed: u64, which: u8, n in 1usize..6) {
        let ring = ring_for(which);
        let m = gen::invertible(&mut rng(seed), &ring, n);
        let inv = matrix_inverse_oracle(&ring, &m).unwrap();
        prop_assert_eq!(matrix_mul(&ring, &inv, &m), identity_matrix(&ring, n));
    }

    #[test]
    fn validated_posets_are_acyclic(seed: u64, n in 1usize..7, m in 0usize..10) {
        let mut r = rng(seed);
        let els = gen::labels("p", n);
        let covers: Vec<(Label, Label)> = (0..m)
            .map(|_| (els[r.gen_range(0..n)].clone(), els[r.gen_range(0..n)].clone()))
            .collect();
        match validate_poset(els.clone(), &covers) {
            Ok(p) => {
                for a in &els {
                    prop_assert!(!p.lt(a, a));
                    for b in &els {
                        prop_assert!(!(p.lt(a, b) && p.lt(b, a)));
                    }
                }
                for (a, b) in &covers {
                    prop_assert!(p.lt(a, b));
                }
            }
            Err(PosetError::CycleDetected(c)) => {
                prop_assert!(c.len() >= 2);
                prop_assert_eq!(c.first(), c.last());
                for w in c.windows(2) {
                    prop_assert!(covers.contains(&(w[0].clone(), w[1].clone())));
                }
            }
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn common_order_exists_iff_some_total_order_fits(seed: u64, n in 1usize..6, m in 0usize..8) {
        let mut r = rng(seed);
        let els = gen::labels("e", n);
        let cons: Vec<(Label, Label)> = (0..m)
            .map(|_| (els[r.gen_range(0..n)].clone(), els[r.gen_range(0..n)].clone()))
            .collect();
        let brute = permutations(n).into_iter().any(|p| {
            let pos = |l: &Label| p[els.iter().position(|e| e == l).unwrap()];
            cons.iter().all(|(a, b)| pos(a) < pos(b))
        });
        let found = find_common_order(els.clone(), &cons);
        prop_assert_eq!(found.is_ok(), brute);
        if let Ok(p) = found {
            for (a, b) in &cons {
                prop_assert!(p.lt(a, b));
            }
        }
    }

    #[test]
    fn decomposition_is_unique(seed: u64, which: u8, n in 1usize..7) {
        let ring = ring_for(which);
        let t = gen::triangular(&mut rng(seed), &ring, n, false);
        let a = decompose_triangular(&t.f, &t.target_order, Some(&t.source_order), UnitKind::AllUnits).unwrap();
        let b = decompose_triangular(&t.f, &t.target_order, Some(&t.source_order), UnitKind::AllUnits).unwrap();
        prop_assert_eq!(&a, &b);
        let lin = linear_extension(&t.target_order);
        let c = decompose_triangular(&t.f, &lin, None, UnitKind::AllUnits).unwrap();
        prop_assert_eq!(&a.diagonal, &c.diagonal);
        prop_assert_eq!(&a.increasing, &c.increasing);
        prop_assert_eq!(a.original(), t.f);
    }

    #[test]
    fn increasing_perturbation_keeps_the_diagonal(seed: u64, which: u8, n in 1usize..7) {
        let ring = ring_for(which);
        let mut r = rng(seed);
        let t = gen::triangular(&mut r, &ring, n, false);
        let d = decompose_triangular(&t.f, &t.target_order, None, UnitKind::AllUnits).unwrap();
        let mut extra = Vec::new();
        for (col, row0) in &d.base_function {
            for row in t.target_order.above(row0) {
                if r.gen_bool(0.5) {
                    extra.push(((row.clone(), col.clone()), gen::nonzero(&mut r, &ring)));
                }
            }
        }
        let v = Morphism::new(t.f.source(), t.f.target(), extra).unwrap();
        let g = t.f.add(&v).unwrap();
        let dg = decompose_triangular(&g, &t.target_order, None, UnitKind::AllUnits).unwrap();
        prop_assert_eq!(dg.diagonal, d.diagonal);
    }

    #[test]
    fn diagonal_is_functorial(seed: u64, which: u8, n in 1usize..6) {
        let ring = ring_for(which);
        let (f, g) = gen::composable_pair(&mut rng(seed), &ring, n);
        let df = decompose_triangular(&f.f, &f.target_order, Some(&f.source_order), UnitKind::AllUnits).unwrap();
        let dg = decompose_triangular(&g.f, &g.target_order, Some(&g.source_order), UnitKind::AllUnits).unwrap();
        let gf = g.f.after(&f.f).unwrap();
        let dgf = decompose_triangular(&gf, &g.target_order, Some(&f.source_order), UnitKind::AllUnits).unwrap();
        prop_assert_eq!(dgf.diagonal, dg.diagonal.after(&df.diagonal).unwrap());
    }

    #[test]
    fn triangular_inverse_is_two_sided_and_triangular(seed: u64, which: u8, n in 1usize..7) {
        let ring = ring_for(which);
        let t = gen::triangular(&mut rng(seed), &ring, n, false);
        let d = decompose_triangular(&t.f, &t.target_order, Some(&t.source_order), UnitKind::AllUnits).unwrap();
        let g = invert_triangular(&d).unwrap();
        prop_assert_eq!(g.after(&t.f).unwrap(), Morphism::identity(t.f.source()));
        prop_assert_eq!(t.f.after(&g).unwrap(), Morphism::identity(t.f.target()));
        let back = decompose_triangular(&g, &t.source_order, Some(&t.target_order), UnitKind::AllUnits);
        prop_assert!(back.is_ok(), "{:?}", back.err());
    }

    #[test]
    fn elementary_factors_rebuild_and_annihilate(seed: u64, which: u8, n in 1usize..7) {
        let ring = ring_for(which);
        let t = gen::triangular(&mut rng(seed), &ring, n, true);
        let d = decompose_triangular(&t.f, &t.target_order, Some(&t.source_order), UnitKind::One).unwrap();
        let (alphas, h) = factor_elementary(&d).unwrap();
        prop_assert_eq!(multiply_factors(&alphas, &h).unwrap(), t.f.clone());
        for i in 0..alphas.len() {
            for j in 0..=i {
                prop_assert!(alphas[i].after(&alphas[j]).unwrap().is_zero(), "a{i} a{j} != 0");
            }
        }
    }

    #[test]
    fn cones_of_isomorphisms_are_contractible(seed: u64, which: u8) {
        let ring = ring_for(which);
        let (c, d, f) = gen::chain_isomorphism(&mut rng(seed), &ring);
        let (cone, beta) = mapping_cone(&f, &c, &d).unwrap();
        let rep = validate_complex(&cone, beta.as_ref()).unwrap();
        prop_assert!(beta.is_some());
        prop_assert!(rep.ok(), "{rep:?}");
    }

    #[test]
    fn folding_gives_inverse_pair(seed: u64, which: u8) {
        let ring = ring_for(which);
        let (c, x) = gen::contractible_complex(&mut rng(seed), &ring, 6, 5, "c");
        let (f, fx) = fold_two_degrees(&c, &x).unwrap();
        prop_assert!(f.degrees().iter().all(|d| *d == 0 || *d == 1));
        let b = f.c(1);
        let k = fx.at(&f, 0);
        prop_assert_eq!(b.after(&k).unwrap(), Morphism::identity(&f.module(0)));
        prop_assert_eq!(k.after(&b).unwrap(), Morphism::identity(&f.module(1)));
        // already folded
        prop_assert_eq!(fold_two_degrees(&f, &fx).unwrap(), (f.clone(), fx.clone()));
    }

    #[test]
    fn standardization_projects_to_a_chain_map(seed: u64) {
        let k = gen::cancellation_case(&mut rng(seed), &Ring::Z);
        let dec = find_cancellation(&k.complex, &k.contraction, &k.kept, &k.orders, UnitKind::PlusMinusOne).unwrap();
        let s = standardize_cancellation(&k.complex, &k.contraction, &dec).unwrap();
        for d in s.b.degrees() {
            let rows = dec.kept.get(&(d - 1)).cloned().unwrap_or_default();
            let cols: BTreeSet<Label> =
                s.b.module(d).basis_set().difference(&dec.kept.get(&d).cloned().unwrap_or_default()).cloned().collect();
            // no boundary from the cancelled part into Ĉ
            prop_assert!(s.b.c(d).block(&rows, &cols).unwrap().is_zero(), "degree {d}");
        }
    }

    #[test]
    fn volodin_map_commutes_with_faces(seed: u64, k in 1usize..4, len in 2usize..5) {
        let ring = Ring::zmod(3).unwrap();
        let v = gen::volodin_sequence(&mut rng(seed), &ring, k, len);
        prop_assume!(volodin_check(&v).is_ok());
        let s = volodin_to_k1(&v).unwrap();
        for j in 0..len {
            let a = s.face(j);
            let b = volodin_to_k1(&v.face(j)).unwrap();
            prop_assert_eq!(&a.complexes, &b.complexes);
            prop_assert_eq!(&a.contractions, &b.contractions);
            prop_assert!(validate_k1_simplex(&a).unwrap().ok());
        }
    }

    #[test]
    fn sign_changes_keep_plus_minus_paths(seed: u64, k in 1usize..4, len in 1usize..4) {
        let ring = Ring::Z;
        let mut r = rng(seed);
        let v = gen::signed_loop(&mut r, &ring, k, len, true);
        let order = volodin_check(&v).unwrap();
        let signed: Vec<Vec<Vec<Elem>>> = v
            .matrices
            .iter()
            .map(|m| {
                m.iter()
                    .map(|row| {
                        let s = gen::sign(&mut r, &ring);
                        row.iter().map(|x| ring.mul(&s, x)).collect()
                    })
                    .collect()
            })
            .collect();
        let w = VolodinPath::new(&ring, k, signed, SignMode::PlusMinus).unwrap();
        prop_assert_eq!(volodin_check(&w).unwrap(), order);
    }

    #[test]
    fn fixed_signs_are_one_triangular(seed: u64, k in 1usize..4, len in 1usize..4) {
        let ring = Ring::zmod(5).unwrap();
        let v = gen::signed_loop(&mut rng(seed), &ring, k, len, false);
        let fixed = fix_signs(&v, true).unwrap();
        prop_assert_eq!(fixed.mode, SignMode::One);
        prop_assert!(volodin_check(&fixed).is_ok());
    }

    #[test]
    fn cancellation_data_validates(seed: u64, which: u8) {
        let ring = ring_for(which);
        let (c, x) = gen::contractible_complex(&mut rng(seed), &ring, 3, 2, "c");
        let s = K1SimplexData {
            ring: ring.clone(),
            complexes: vec![c],
            contractions: vec![x],
            maps: BTreeMap::new(),
            orders: vec![BTreeMap::new()],
            control: None,
        };
        let cd = cancellation_data(&s).unwrap();
        prop_assert!(validate_k1_simplex(&cd.sum).unwrap().ok());
        prop_assert!(validate_k1_simplex(&cd.cone).unwrap().ok());
        let (rep, _) = validate_k1_morphism(&cd.morphism, &cd.sum, &cd.cone).unwrap();
        prop_assert!(rep.ok(), "{:?}", rep.failures());
    }
}

#[test]
fn contraction_zero_on_zero_complex() {
    let z = Ring::Z;
    let c = ChainComplex::zero(&z);
    assert!(validate_complex(&c, Some(&Contraction::zero())).unwrap().ok());
}
