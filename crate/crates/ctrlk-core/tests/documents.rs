//! Documents survive a trip through canonical text.

use std::collections::BTreeMap;

use ctrlk_core::doc::{
    space_doc, Body, ComplexDoc, DocError, Document, GeoComplexDoc, K1SimplexDoc, ReferenceDoc, VolodinDoc,
};
use ctrlk_core::gen;
use ctrlk_core::geometric::cellular_chains;
use ctrlk_core::ksimplex::volodin_to_k1;
use ctrlk_core::rings::Ring;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Canonical text parses back to the same document and is a fixed point.
fn reparse(doc: &Document) -> Document {
    let text = doc.canonical();
    let back = Document::parse(&text).unwrap();
    assert_eq!(back.canonical(), text);
    back
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn complexes_round_trip(seed: u64, zmod: bool) {
        let ring = if zmod { Ring::zmod(5).unwrap() } else { Ring::Z };
        let (c, x) = gen::contractible_complex(&mut rng(seed), &ring, 4, 3, "c");
        let doc = Document::new(Body::Complex(ComplexDoc::from_complex(&c, Some(&x))));
        let Body::Complex(back) = reparse(&doc).body else { panic!("kind changed") };
        let (r2, c2, x2) = back.to_complex().unwrap();
        prop_assert_eq!(r2, ring);
        prop_assert_eq!(c2, c);
        prop_assert_eq!(x2, Some(x));
    }

    #[test]
    fn volodin_paths_round_trip(seed: u64, k in 1usize..4, len in 1usize..4) {
        let v = gen::signed_loop(&mut rng(seed), &Ring::Z, k, len, false);
        let doc = Document::new(Body::Volodin(VolodinDoc::from_path(&v)));
        let Body::Volodin(back) = reparse(&doc).body else { panic!("kind changed") };
        prop_assert_eq!(back.to_path().unwrap(), v);
    }

    #[test]
    fn k1_simplices_round_trip(seed: u64, k in 1usize..4, len in 2usize..4) {
        let ring = Ring::zmod(3).unwrap();
        let v = gen::volodin_sequence(&mut rng(seed), &ring, k, len);
        let Ok(s) = volodin_to_k1(&v) else { return Ok(()) };
        let doc = Document::new(Body::K1Simplex(K1SimplexDoc::from_data(&s)));
        let Body::K1Simplex(back) = reparse(&doc).body else { panic!("kind changed") };
        prop_assert_eq!(back.to_data().unwrap(), s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn cellular_complexes_round_trip(seed: u64) {
        let k = gen::simplicial(&mut rng(seed), 2, 1.0);
        let cc = cellular_chains(&k).unwrap();
        let reference = ReferenceDoc::identity(space_doc(&cc.reference.x).unwrap());
        let doc = Document::new(Body::GeometricComplex(GeoComplexDoc::from_parts(
            reference,
            &cc.complex,
            &cc.nullhomotopies,
            Some(1.0),
        )));
        let Body::GeometricComplex(back) = reparse(&doc).body else { panic!("kind changed") };
        let parts = back.to_parts().unwrap();
        prop_assert_eq!(parts.complex, cc.complex);
        prop_assert_eq!(parts.witnesses, cc.nullhomotopies);
        prop_assert_eq!(parts.contraction, None);
    }
}

#[test]
fn foreign_sign_convention_is_rejected() {
    let text = r#"{"schema":"ctrlk/1","kind":"ring","sign_convention":"ranicki","ring":{"kind":"Z"}}"#;
    assert!(matches!(Document::parse(text), Err(DocError::SignConvention(_))));
    let ok = r#"{"schema":"ctrlk/1","kind":"ring","sign_convention":"suspension","ring":{"kind":"Z"}}"#;
    assert!(Document::parse(ok).is_ok());
}

#[test]
fn unknown_fields_and_kinds_are_rejected() {
    assert!(Document::parse(r#"{"schema":"ctrlk/1","kind":"ring","ring":{"kind":"Z"},"extra":1}"#).is_err());
    assert!(matches!(
        Document::parse(r#"{"schema":"ctrlk/1","kind":"sheaf"}"#),
        Err(DocError::UnknownKind(_))
    ));
    assert!(matches!(Document::parse(r#"{"schema":"ctrlk/2","kind":"ring","ring":{"kind":"Z"}}"#), Err(DocError::Schema(_))));
}

#[test]
fn empty_orders_map_is_kept() {
    let doc = Document::parse(r#"{"schema":"ctrlk/1","kind":"orders","orders":[{}]}"#).unwrap();
    let Body::Orders(o) = &doc.body else { panic!("kind changed") };
    assert_eq!(o.to_orders().unwrap(), vec![BTreeMap::new()]);
}
