use std::collections::{BTreeMap, BTreeSet};

use ctrlk_core::chains::{fold_two_degrees, validate_complex};
use ctrlk_core::control::ControlSpace;
use ctrlk_core::doc::{
    geo_morphism_body, Body, ComplexDoc, Document, GeoComplexDoc, MorphismBody, ReferenceDoc, SetDoc,
    VolodinDoc,
};
use ctrlk_core::geometric::{
    cellular_chains, controlled_triangular_inverse, factor_unipotent, gcompose, gradius, is_inverse_pair, reduce_paths,
    split_by_support, validate_controlled, Controlled, GeometricMorphism, ReferenceMap,
};
use ctrlk_core::ksimplex::{fix_signs, validate_k1_morphism, validate_k1_simplex, volodin_check, SignMode};
use ctrlk_core::morphisms::{
    compose, decompose_triangular, factor_elementary, invert_triangular, multiply_factors, Morphism,
    TriangularDecomposition,
};
use ctrlk_core::posets::{is_epsilon_bounded, Poset};
use ctrlk_core::Label;
use serde_json::{json, Value};

use crate::report::{CliError, Report};

pub type Res = Result<(), CliError>;

fn doc_value(body: Body) -> Value {
    Document::new(body).to_value()
}

fn list(s: &BTreeSet<Label>) -> String {
    s.iter().cloned().collect::<Vec<_>>().join(",")
}

/// Comma-separated point list; the empty string is the empty set.
pub fn parse_set(s: &str) -> BTreeSet<Label> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(str::to_string).collect()
}

fn parse_eps(s: &str) -> Result<f64, CliError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(CliError::malformed(format!("{s:?} is not a nonnegative length"))),
    }
}

fn need_eps(flag: Option<f64>, doc: Option<f64>) -> Result<f64, CliError> {
    flag.or(doc).ok_or_else(|| CliError::malformed("a scale epsilon is required (--epsilon or \"epsilon\")"))
}

pub struct ValidateArgs {
    pub kind: Option<String>,
    pub epsilon: Option<f64>,
    pub orders: Option<Document>,
}

pub fn validate(rep: &mut Report, doc: Document, args: ValidateArgs) -> Res {
    if let Some(k) = &args.kind {
        if k != doc.body.kind() {
            return Err(CliError::malformed(format!("expected a {k} document, found {}", doc.body.kind())));
        }
    }
    rep.metric("kind", doc.body.kind());
    let eps = args.epsilon;
    if args.orders.is_some() && !matches!(doc.body, Body::K1Simplex(_)) {
        return Err(CliError::malformed("--orders applies to k1_simplex documents"));
    }
    match doc.body {
        Body::Ring(b) => {
            let r = ctrlk_core::doc::ring_of(&b.ring)?;
            rep.check("ring descriptor is valid", true, r.name());
        }
        Body::Space(s) => {
            let x = ControlSpace::from_doc(&s)?;
            rep.check("metric is valid", true, "");
            rep.metric("points", x.len());
            rep.metric("frontier_points", x.frontier().len());
        }
        Body::Poset(p) => match Poset::from_doc(&p) {
            Ok(p) => {
                rep.check("covers are acyclic", true, "");
                rep.metric("elements", p.elements().len());
            }
            Err(ctrlk_core::posets::PosetError::CycleDetected(c)) => {
                rep.check("covers are acyclic", false, c.join(" < "));
            }
            Err(e) => return Err(e.into()),
        },
        Body::Morphism(m) => {
            let (_, f, pt, ps) = m.to_parts()?;
            rep.metric("nonzero_entries", f.nnz());
            if let Some(pt) = pt {
                match decompose_triangular(&f, &pt, ps.as_ref(), m.unit) {
                    Ok(d) => {
                        rep.check("triangular", true, "");
                        rep.check("diagonal plus increasing part reproduces f", d.original() == f, "");
                    }
                    Err(e) if CliError::from(e.clone()).status == crate::report::Status::Invalid => {
                        rep.check("triangular", false, e.to_string())
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        Body::Complex(c) => {
            if eps.is_some() {
                return Err(CliError::malformed("--epsilon needs a geometric document"));
            }
            let (_, c, xi) = c.to_complex()?;
            let r = validate_complex(&c, xi.as_ref())?;
            rep.check("c² = 0", r.c_squared_failures.is_empty(), degrees(&r.c_squared_failures));
            if r.contraction_checked {
                rep.check("c ξ + ξ c = 1", r.contraction_failures.is_empty(), degrees(&r.contraction_failures));
            }
            rep.metric("degrees", c.degrees().len());
            rep.metric("rank", c.modules().values().map(|m| m.rank()).sum::<usize>());
        }
        Body::Simplicial(s) => {
            let k = s.to_complex();
            cellular_report(rep, &k, eps)?;
        }
        Body::GeometricMorphism(g) => {
            let p = g.to_parts()?;
            let r = gradius(&p.rm, &p.f)?;
            rep.metric("radius", r);
            rep.check("paths are walks over X", true, "");
            if let Some(e) = eps.or(p.epsilon) {
                rep.check("radius < eps", r < e, format!("radius {r}"));
                if let Some(order) = &p.order {
                    controlled_inverse_checks(rep, &p.rm, &p.f, order, e)?;
                }
            }
        }
        Body::GeometricComplex(g) => {
            let p = g.to_parts()?;
            let e = need_eps(eps, p.epsilon)?;
            let r = validate_controlled(&p.rm, Controlled::Complex { complex: &p.complex, witnesses: &p.witnesses }, e)?;
            rep.core_checks(&r.checks);
            if let Some(xi) = &p.contraction {
                let r = validate_controlled(
                    &p.rm,
                    Controlled::Contraction { complex: &p.complex, xi, witnesses: &p.contraction_witnesses },
                    e,
                )?;
                rep.core_checks(&r.checks);
            }
            rep.metric("epsilon", e);
        }
        Body::GeometricIsomorphism(g) => {
            let p = g.to_parts()?;
            let e = need_eps(eps, p.epsilon)?;
            let r = validate_controlled(
                &p.rm,
                Controlled::Isomorphism { f: &p.f, inverse: p.inverse.as_ref(), h_a: p.h_a.as_ref(), h_b: p.h_b.as_ref() },
                e,
            )?;
            rep.core_checks(&r.checks);
            rep.metric("epsilon", e);
        }
        Body::Volodin(v) => {
            let path = v.to_path()?;
            volodin_checks(rep, &path)?;
        }
        Body::K1Simplex(k) => {
            let mut data = k.to_data()?;
            if let Some(o) = args.orders {
                let Body::Orders(o) = o.body else {
                    return Err(CliError::malformed("--orders must name an orders document"));
                };
                data.orders = o.to_orders()?;
            }
            if let (Some(e), Some(c)) = (eps, data.control.as_mut()) {
                c.eps = e;
            }
            let r = validate_k1_simplex(&data)?;
            rep.core_checks(&r.checks);
            rep.metric("dimension", data.dim());
        }
        Body::K1Morphism(k) => {
            let (a, c, f) = k.to_parts()?;
            let (r, simplices) = validate_k1_morphism(&f, &a, &c)?;
            rep.core_checks(&r.checks);
            rep.metric("triangulation_simplices", simplices.len());
        }
        Body::Orders(o) => {
            let os = o.to_orders()?;
            rep.check("orders are acyclic", true, "");
            rep.metric("vertices", os.len());
        }
        Body::Set(s) => {
            rep.metric("points", s.points.len());
        }
    }
    Ok(())
}

fn degrees(ds: &[i64]) -> String {
    if ds.is_empty() {
        String::new()
    } else {
        format!("degrees {ds:?}")
    }
}

fn controlled_inverse_checks(rep: &mut Report, rm: &ReferenceMap, f: &GeometricMorphism, order: &Poset, eps: f64) -> Res {
    let loc = f.target().x_locations(rm)?;
    let b = is_epsilon_bounded(order, &loc, eps, &rm.x)?;
    rep.check("order is eps-bounded", b.epsilon_bounded, b.violating_element.unwrap_or_default());
    if !b.epsilon_bounded {
        return Ok(());
    }
    let inv = controlled_triangular_inverse(rm, f, order, eps)?;
    let r = gradius(rm, &inv)?;
    rep.metric("inverse_radius", r);
    rep.check("inverse radius < 3 eps", r < 3.0 * eps, format!("radius {r}"));
    rep.check("inverse is exact", is_inverse_pair(f, &inv)?, "");
    Ok(())
}

fn volodin_checks(rep: &mut Report, path: &ctrlk_core::ksimplex::VolodinPath) -> Result<Option<Poset>, CliError> {
    rep.metric("k", path.k);
    rep.metric("length", path.matrices.len());
    match volodin_check(path) {
        Ok(p) => {
            let chain: Vec<String> = p.covers().into_iter().map(|(a, b)| format!("{a}<{b}")).collect();
            rep.check("a common triangularizing order exists", true, chain.join(","));
            Ok(Some(p))
        }
        Err(ctrlk_core::ksimplex::KError::NoOrderExists(c)) => {
            let w = match c.as_slice() {
                [one] => format!("zero diagonal entry at {one}"),
                _ => format!("cycle {}", c.join(" < ")),
            };
            rep.check("a common triangularizing order exists", false, w);
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn cellular_report(rep: &mut Report, k: &ctrlk_core::geometric::SimplicialComplex, eps: Option<f64>) -> Result<ctrlk_core::geometric::CellularChains, CliError> {
    let ch = cellular_chains(k)?;
    let r = &ch.report;
    rep.check("algebraic c² = 0", r.algebraic_square_zero, "");
    rep.check("geometric c² paths pair off", r.pairing_complete, format!("{} composite paths", r.composite_paths));
    rep.metric("mesh", r.mesh);
    rep.metric("boundary_radius", r.boundary_radius);
    rep.metric("pairing_radius", r.pairing_radius);
    rep.metric("composite_paths", r.composite_paths);
    for (d, m) in &ch.complex.modules {
        rep.metric(&format!("cells_{d}"), m.rank());
    }
    if let Some(e) = eps {
        rep.check("mesh < eps", r.mesh < e, if r.mesh < e { String::new() } else { r.widest.join("|") });
        if r.mesh < e {
            rep.check("boundary radius < eps", r.boundary_radius < e, format!("radius {}", r.boundary_radius));
            rep.check("pairing radius < 2 eps", r.pairing_radius < 2.0 * e, format!("radius {}", r.pairing_radius));
        }
    }
    Ok(ch)
}

pub fn fold(rep: &mut Report, doc: Document) -> Res {
    let Body::Complex(c) = doc.body else {
        return Err(CliError::malformed(format!("fold needs a complex document, found {}", doc.body.kind())));
    };
    let (_, c, xi) = c.to_complex()?;
    let xi = xi.ok_or_else(|| CliError::invalid("not strict contractible: no contraction given"))?;
    let (f, fx) = fold_two_degrees(&c, &xi)?;
    let (hi, lo) = match f.degrees().as_slice() {
        [] => (1, 0),
        ds => (*ds.iter().max().expect("nonempty"), *ds.iter().min().expect("nonempty")),
    };
    let b = f.c(hi);
    let x = fx.at(&f, lo);
    let exact = if hi == lo + 1 {
        compose(&b, &x)? == Morphism::identity(&f.module(hi)) && compose(&x, &b)? == Morphism::identity(&f.module(lo))
    } else {
        f.modules().values().all(|m| m.rank() == 0)
    };
    rep.check("folded boundary and contraction are inverse", exact, "");
    rep.metric("rank", f.module(hi).rank());
    rep.output = Some(doc_value(Body::Complex(ComplexDoc::from_complex(&f, Some(&fx)))));
    Ok(())
}

pub fn volodin(rep: &mut Report, doc: Document, fix: bool, require_loop: bool) -> Res {
    let Body::Volodin(v) = doc.body else {
        return Err(CliError::malformed(format!("volodin needs a volodin document, found {}", doc.body.kind())));
    };
    let path = v.to_path()?;
    let order = volodin_checks(rep, &path)?;
    if !fix {
        if let Some(p) = order {
            rep.output = Some(doc_value(Body::Poset(p.to_doc())));
        }
        return Ok(());
    }
    if order.is_none() {
        return Ok(());
    }
    let fixed = fix_signs(&path, require_loop)?;
    let ok = fixed.mode == SignMode::One && volodin_check(&fixed).is_ok();
    rep.check("fixed path passes the mode-one check", ok, "");
    let changed = fixed.matrices.iter().zip(&path.matrices).filter(|(a, b)| a != b).count();
    rep.metric("changed_matrices", changed);
    rep.output = Some(doc_value(Body::Volodin(VolodinDoc::from_path(&fixed))));
    Ok(())
}

pub fn cellular(rep: &mut Report, doc: Document, eps: Option<f64>) -> Res {
    let Body::Simplicial(s) = doc.body else {
        return Err(CliError::malformed(format!("cellular needs a simplicial document, found {}", doc.body.kind())));
    };
    let ch = cellular_report(rep, &s.to_complex(), eps)?;
    let space = ch.reference.x.to_doc().cloned().ok_or_else(|| CliError::malformed("barycentric space has no document"))?;
    let out = GeoComplexDoc::from_parts(ReferenceDoc::identity(space), &ch.complex, &ch.nullhomotopies, eps);
    rep.output = Some(doc_value(Body::GeometricComplex(out)));
    Ok(())
}

pub enum SpaceOp {
    Enlarge(String, String),
    Reduce(String, String),
    Frontier(String),
    Excise(String, String),
}

pub fn space(rep: &mut Report, doc: Document, op: SpaceOp) -> Res {
    let Body::Space(s) = doc.body else {
        return Err(CliError::malformed(format!("space needs a space document, found {}", doc.body.kind())));
    };
    let x = ControlSpace::from_doc(&s)?;
    let out = match op {
        SpaceOp::Enlarge(ys, e) => {
            let ys = parse_set(&ys);
            let out = x.enlarge(&ys, parse_eps(&e)?)?;
            rep.check("Y is contained in its enlargement", ys.is_subset(&out), "");
            out
        }
        SpaceOp::Reduce(ys, e) => {
            let ys = parse_set(&ys);
            let out = x.reduce(&ys, parse_eps(&e)?)?;
            rep.check("reduction is contained in Y", out.is_subset(&ys), "");
            out
        }
        SpaceOp::Frontier(e) => x.frontier_enlargement(parse_eps(&e)?),
        SpaceOp::Excise(us, e) => {
            let us = parse_set(&us);
            let r = x.check_excision(&us, None, parse_eps(&e)?)?;
            let w = if r.holds { String::new() } else { format!("lhs {{{}}} rhs {{{}}}", list(&r.lhs), list(&r.rhs)) };
            rep.check("excision equality holds", r.holds, w);
            rep.metric("boundary", x.boundary(&us)?.len());
            r.lhs
        }
    };
    rep.metric("size", out.len());
    rep.output = Some(doc_value(Body::Set(SetDoc { points: out.into_iter().collect() })));
    Ok(())
}

#[derive(Clone, Copy)]
pub enum TriangularOp {
    Decompose,
    Invert,
    Factor,
}

fn decomposition(m: &MorphismBody) -> Result<(Morphism, TriangularDecomposition), CliError> {
    let (_, f, pt, ps) = m.to_parts()?;
    let pt = pt.ok_or_else(|| CliError::malformed("a target_order is required"))?;
    let d = decompose_triangular(&f, &pt, ps.as_ref(), m.unit)?;
    Ok((f, d))
}

pub fn triangular(rep: &mut Report, doc: Document, op: TriangularOp) -> Res {
    let Body::Morphism(m) = doc.body else {
        return Err(CliError::malformed(format!("triangular needs a morphism document, found {}", doc.body.kind())));
    };
    let (f, d) = decomposition(&m)?;
    rep.check("triangular", true, "");
    match op {
        TriangularOp::Decompose => {
            rep.check("diagonal plus increasing part reproduces f", d.original() == f, "");
            rep.output = Some(json!({
                "diagonal": d.diagonal.to_doc(),
                "increasing": d.increasing.to_doc(),
                "base_function": d.base_function,
            }));
        }
        TriangularOp::Invert => {
            let g = invert_triangular(&d)?;
            let left = compose(&f, &g)? == Morphism::identity(f.source());
            let right = compose(&g, &f)? == Morphism::identity(f.target());
            rep.check("inverse is two-sided", left && right, "");
            rep.metric("nonzero_entries", g.nnz());
            // the inverse is triangular from the target order to the source order
            let back: BTreeMap<Label, Label> = d.base_function.iter().map(|(s, t)| (t.clone(), s.clone())).collect();
            let pt = m.target_order.as_ref().map(Poset::from_doc).transpose()?.expect("checked above");
            let ps = match m.source_order.as_ref().map(Poset::from_doc).transpose()? {
                Some(p) => p,
                None => pt.relabel(|l| back.get(l).cloned().unwrap_or_else(|| l.clone())),
            };
            let out = MorphismBody {
                ring: m.ring.clone(),
                morphism: g.to_doc(),
                target_order: Some(ps.to_doc()),
                source_order: Some(pt.to_doc()),
                unit: m.unit,
            };
            rep.output = Some(doc_value(Body::Morphism(out)));
        }
        TriangularOp::Factor => {
            let (alphas, h) = factor_elementary(&d)?;
            rep.check("product of factors reproduces f", multiply_factors(&alphas, &h)? == f, "");
            let mut bad = Vec::new();
            for (i, ai) in alphas.iter().enumerate() {
                for (j, aj) in alphas.iter().enumerate().take(i + 1) {
                    if !ai.after(aj)?.is_zero() {
                        bad.push(format!("({i},{j})"));
                    }
                }
            }
            rep.check("a_i a_j = 0 for j <= i", bad.is_empty(), bad.join(" "));
            rep.metric("factors", alphas.len());
            rep.output = Some(json!({
                "factors": alphas.iter().map(Morphism::to_doc).collect::<Vec<_>>(),
                "diagonal": h.to_doc(),
            }));
        }
    }
    Ok(())
}

#[derive(Clone, Copy)]
pub enum LocalizeOp {
    Split,
    Unipotent,
}

pub fn localize(rep: &mut Report, doc: Document, op: LocalizeOp, eps: Option<f64>) -> Res {
    let Body::GeometricMorphism(g) = doc.body else {
        return Err(CliError::malformed(format!("localize needs a geometric_morphism document, found {}", doc.body.kind())));
    };
    let p = g.to_parts()?;
    let ys = p.subset.clone().ok_or_else(|| CliError::malformed("a subset is required"))?;
    match op {
        LocalizeOp::Split => {
            let (fy, rest) = split_by_support(&p.rm, &p.f, &ys)?;
            rep.check("the two parts add up to f", fy.add(&rest)? == p.f, "");
            rep.metric("supported_paths", fy.len());
            rep.metric("other_paths", rest.len());
            rep.output = Some(json!({ "supported": geo_morphism_body(&fy), "rest": geo_morphism_body(&rest) }));
        }
        LocalizeOp::Unipotent => {
            let e = need_eps(eps, p.epsilon)?;
            let order = p.order.as_ref().ok_or_else(|| CliError::malformed("an order is required"))?;
            let (d1, d2) = factor_unipotent(&p.rm, &p.f, order, &ys, e)?;
            let prod = reduce_paths(&gcompose(&d1, &d2)?);
            rep.check("d2 d1 reproduces d", prod == reduce_paths(&p.f), "");
            let far = p.rm.x.enlarge(&ys, 3.0 * e)?;
            let d2r = reduce_paths(&d2);
            let mut bad = Vec::new();
            for (x, at) in d2.source().locations() {
                if far.contains(p.rm.project(at)?) {
                    continue;
                }
                let col = d2r.column(x);
                let id = col.len() == 1
                    && col.iter().all(|((to, via), c)| to == x && via == &vec![at.clone()] && d2.ring().is_one(c));
                if !id {
                    bad.push(x.clone());
                }
            }
            rep.check("d2 is the identity outside Y^3eps", bad.is_empty(), bad.join(","));
            rep.metric("d1_radius", gradius(&p.rm, &d1)?);
            rep.metric("d2_radius", gradius(&p.rm, &d2)?);
            rep.output = Some(json!({ "d1": geo_morphism_body(&d1), "d2": geo_morphism_body(&d2) }));
        }
    }
    Ok(())
}

/// Canonical re-serialization; the canonical text must reparse to the same text.
pub fn fmt(rep: &mut Report, doc: Document) -> Res {
    let text = doc.canonical();
    let again = Document::parse(&text)?.canonical();
    rep.check("canonical form is a fixed point", again == text, "");
    rep.output = Some(doc.to_value());
    Ok(())
}
