//! Seeded random instances for property tests and the acceptance corpus.
//!
//! The base seed comes from `CTRLK_SEED` (decimal or `0x` hex) and falls back to
//! [`DEFAULT_SEED`]. Each caller picks a stream number so that corpora stay
//! independent of one another.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chains::{ChainComplex, ChainMap, Contraction};
use crate::control::{ControlSpace, FrontierDoc, MetricDoc, SpaceDoc};
use crate::geometric::{
    GeometricHomotopy, GeometricModule, GeometricMorphism, GPath, ReferenceMap, SimplicialComplex, Track,
};
use crate::ksimplex::{SignMode, VolodinPath};
use crate::morphisms::{BasedModule, Morphism};
use crate::posets::{validate_poset, Poset};
use crate::rings::{identity_matrix, matrix_inverse_oracle, matrix_mul, Elem, Ring};
use crate::Label;

pub const DEFAULT_SEED: u64 = 0x00c7_71c0;
pub const SEED_VAR: &str = "CTRLK_SEED";

pub fn base_seed() -> u64 {
    let Ok(s) = std::env::var(SEED_VAR) else { return DEFAULT_SEED };
    let s = s.trim();
    match s.strip_prefix("0x") {
        Some(h) => u64::from_str_radix(h, 16).unwrap_or(DEFAULT_SEED),
        None => s.parse().unwrap_or(DEFAULT_SEED),
    }
}

pub fn rng(stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(base_seed() ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// A unit of the ±1 subgroup (`Z`) or any unit (`Z/n`).
pub fn unit(rng: &mut impl Rng, ring: &Ring) -> Elem {
    match ring {
        Ring::Zmod(n) => loop {
            let e = ring.from_int(rng.gen_range(1..*n as i64));
            if ring.is_unit(&e) {
                return e;
            }
        },
        _ => ring.from_int(if rng.gen_bool(0.5) { 1 } else { -1 }),
    }
}

pub fn sign(rng: &mut impl Rng, ring: &Ring) -> Elem {
    ring.from_int(if rng.gen_bool(0.5) { 1 } else { -1 })
}

/// A nonzero element with small representative.
pub fn nonzero(rng: &mut impl Rng, ring: &Ring) -> Elem {
    loop {
        let e = ring.from_int(rng.gen_range(-3..=3));
        if !ring.is_zero(&e) {
            return e;
        }
    }
}

pub fn labels(prefix: &str, n: usize) -> Vec<Label> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Random order contained in a random total order.
pub fn poset(rng: &mut impl Rng, elements: &[Label], density: f64) -> Poset {
    let mut perm = elements.to_vec();
    perm.shuffle(rng);
    let mut covers = Vec::new();
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if rng.gen_bool(density) {
                covers.push((perm[i].clone(), perm[j].clone()));
            }
        }
    }
    validate_poset(elements.iter().cloned(), &covers).expect("acyclic by construction")
}

/// Pull an order back along a bijection `base: source -> target`.
pub fn pullback(p: &Poset, base: &BTreeMap<Label, Label>) -> Poset {
    let mut covers = Vec::new();
    for (x, hx) in base {
        for (y, hy) in base {
            if p.lt(hx, hy) {
                covers.push((x.clone(), y.clone()));
            }
        }
    }
    validate_poset(base.keys().cloned(), &covers).expect("pullback of an order")
}

/// A triangular morphism with its orders: `f = h + u`, `h` a unit-coefficient bijection.
#[derive(Debug, Clone)]
pub struct TriangularCase {
    pub f: Morphism,
    pub base: BTreeMap<Label, Label>,
    pub source_order: Poset,
    pub target_order: Poset,
}

/// Triangular `f` between modules with the given labels, with respect to `pt`.
/// `unipotent` forces the source to equal the target and the diagonal to be the identity.
pub fn triangular_with(
    rng: &mut impl Rng,
    ring: &Ring,
    src: &[Label],
    tgt: &[Label],
    pt: &Poset,
    unipotent: bool,
    density: f64,
) -> TriangularCase {
    let s = BasedModule::new(ring, src.to_vec()).expect("distinct labels");
    let t = BasedModule::new(ring, tgt.to_vec()).expect("distinct labels");
    let mut image = tgt.to_vec();
    if !unipotent {
        image.shuffle(rng);
    }
    let base: BTreeMap<Label, Label> = src.iter().cloned().zip(image).collect();
    let mut entries = Vec::new();
    for (x, hx) in &base {
        let c = if unipotent { ring.one() } else { unit(rng, ring) };
        entries.push(((hx.clone(), x.clone()), c));
        for y in tgt {
            if pt.lt(hx, y) && rng.gen_bool(density) {
                entries.push(((y.clone(), x.clone()), nonzero(rng, ring)));
            }
        }
    }
    let f = Morphism::new(&s, &t, entries).expect("labels");
    TriangularCase { source_order: pullback(pt, &base), target_order: pt.clone(), f, base }
}

pub fn triangular(rng: &mut impl Rng, ring: &Ring, n: usize, unipotent: bool) -> TriangularCase {
    let tgt = labels("y", n);
    let src = if unipotent { tgt.clone() } else { labels("x", n) };
    let pt = poset(rng, &tgt, 0.5);
    triangular_with(rng, ring, &src, &tgt, &pt, unipotent, 0.5)
}

/// `f: A -> B` and `g: B -> C`, both triangular with order-preserving base functions.
pub fn composable_pair(rng: &mut impl Rng, ring: &Ring, n: usize) -> (TriangularCase, TriangularCase) {
    let (a, b, c) = (labels("a", n), labels("b", n), labels("c", n));
    let pc = poset(rng, &c, 0.5);
    let g = triangular_with(rng, ring, &b, &c, &pc, false, 0.5);
    let f = triangular_with(rng, ring, &a, &b, &g.source_order, false, 0.5);
    (f, g)
}

/// Random invertible square matrix: a product of elementary operations and unit scalings.
pub fn invertible(rng: &mut impl Rng, ring: &Ring, n: usize) -> Vec<Vec<Elem>> {
    let mut m = identity_matrix(ring, n);
    for r in 0..n {
        let u = unit(rng, ring);
        for x in m[r].iter_mut() {
            *x = ring.mul(&u, x);
        }
    }
    if n < 2 {
        return m;
    }
    for _ in 0..2 * n {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i == j {
            continue;
        }
        let c = ring.from_int(rng.gen_range(-2..=2));
        let src = m[j].clone();
        for (x, y) in m[i].iter_mut().zip(&src) {
            *x = ring.add(x, &ring.mul(&c, y));
        }
    }
    m
}

fn dense_on(m: &BasedModule, a: &[Vec<Elem>]) -> Morphism {
    Morphism::from_dense(m, m, a).expect("square")
}

/// Strict contractible complex built from elementary pieces `R -> R` in degrees
/// `(d+1, d)` with `0 <= d < max_degree`, then conjugated by random automorphisms.
pub fn contractible_complex(
    rng: &mut impl Rng,
    ring: &Ring,
    max_degree: i64,
    max_rank: usize,
    prefix: &str,
) -> (ChainComplex, Contraction) {
    let mut rank: BTreeMap<i64, usize> = BTreeMap::new();
    let mut bnd: Vec<(i64, Label, Label, Elem)> = Vec::new();
    let pieces = rng.gen_range(1..=(max_degree as usize * max_rank / 2).max(1));
    for _ in 0..pieces {
        let d = rng.gen_range(0..max_degree.max(1));
        if rank.get(&d).copied().unwrap_or(0) >= max_rank || rank.get(&(d + 1)).copied().unwrap_or(0) >= max_rank {
            continue;
        }
        let lo = format!("{prefix}{d}_{}", rank.get(&d).copied().unwrap_or(0));
        let hi = format!("{prefix}{}_{}", d + 1, rank.get(&(d + 1)).copied().unwrap_or(0));
        *rank.entry(d).or_default() += 1;
        *rank.entry(d + 1).or_default() += 1;
        bnd.push((d + 1, hi, lo, sign(rng, ring)));
    }
    let modules: BTreeMap<i64, BasedModule> = rank
        .keys()
        .map(|&d| (d, BasedModule::new(ring, (0..rank[&d]).map(|k| format!("{prefix}{d}_{k}"))).expect("labels")))
        .collect();
    let m = |d: i64| modules.get(&d).cloned().unwrap_or_else(|| BasedModule::zero(ring));
    let mut c: BTreeMap<i64, Morphism> = BTreeMap::new();
    let mut x: BTreeMap<i64, Morphism> = BTreeMap::new();
    for (d, hi, lo, s) in &bnd {
        let cd = c.entry(*d).or_insert_with(|| Morphism::zero(&m(*d), &m(d - 1)));
        *cd = cd.add(&Morphism::new(&m(*d), &m(d - 1), [((lo.clone(), hi.clone()), s.clone())]).unwrap()).unwrap();
        let xd = x.entry(d - 1).or_insert_with(|| Morphism::zero(&m(d - 1), &m(*d)));
        *xd = xd.add(&Morphism::new(&m(d - 1), &m(*d), [((hi.clone(), lo.clone()), s.clone())]).unwrap()).unwrap();
    }
    let cx = ChainComplex::new(ring, modules.clone(), c).expect("complex");
    let xi = Contraction::new(&cx, x).expect("contraction");
    let phi: BTreeMap<i64, Vec<Vec<Elem>>> = modules.iter().map(|(d, b)| (*d, invertible(rng, ring, b.rank()))).collect();
    conjugate(&cx, &xi, &phi)
}

/// Transport `(c, ξ)` along the automorphisms `φ_d` (dense, in basis order).
pub fn conjugate(c: &ChainComplex, xi: &Contraction, phi: &BTreeMap<i64, Vec<Vec<Elem>>>) -> (ChainComplex, Contraction) {
    let ring = &c.ring;
    let auto = |d: i64| -> (Morphism, Morphism) {
        let m = c.module(d);
        match phi.get(&d) {
            Some(a) => {
                let inv = matrix_inverse_oracle(ring, a).expect("invertible by construction");
                (dense_on(&m, a), dense_on(&m, &inv))
            }
            None => (Morphism::identity(&m), Morphism::identity(&m)),
        }
    };
    let mut bnd = BTreeMap::new();
    let mut con = BTreeMap::new();
    for d in c.degrees() {
        let (p, pinv) = auto(d);
        bnd.insert(d, auto(d - 1).0.after(&c.c(d).after(&pinv).unwrap()).unwrap());
        con.insert(d, auto(d + 1).0.after(&xi.at(c, d).after(&pinv).unwrap()).unwrap());
        let _ = p;
    }
    let out = ChainComplex::new(ring, c.modules().clone(), bnd).expect("complex");
    let x = Contraction::new(&out, con).expect("contraction");
    (out, x)
}

/// A chain isomorphism `f: C -> D` with `D` a relabeled conjugate of `C`.
pub fn chain_isomorphism(rng: &mut impl Rng, ring: &Ring) -> (ChainComplex, ChainComplex, ChainMap) {
    let (c, _) = contractible_complex(rng, ring, 4, 3, "c");
    let phi: BTreeMap<i64, Vec<Vec<Elem>>> =
        c.modules().iter().map(|(d, b)| (*d, invertible(rng, ring, b.rank()))).collect();
    let rl = |l: &Label| format!("d{}", &l[1..]);
    let mut bnd = BTreeMap::new();
    let mut f = BTreeMap::new();
    for d in c.degrees() {
        let (m, m1) = (c.module(d), c.module(d - 1));
        let p = dense_on(&m, &phi[&d]);
        let pinv = dense_on(&m, &matrix_inverse_oracle(ring, &phi[&d]).unwrap());
        let p1 = phi.get(&(d - 1)).map(|a| dense_on(&m1, a)).unwrap_or_else(|| Morphism::identity(&m1));
        bnd.insert(d, p1.after(&c.c(d).after(&pinv).unwrap()).unwrap().relabel(rl, rl));
        f.insert(d, p.relabel(|l| l.clone(), rl));
    }
    let mods = c.modules().iter().map(|(d, b)| (*d, b.relabel(rl))).collect();
    let dcx = ChainComplex::new(ring, mods, bnd).expect("complex");
    (c, dcx, f)
}

/// A complex with a known cancellation: `K ⊕ E` sheared by `1 + a`, `a: E -> K`.
#[derive(Debug, Clone)]
pub struct CancellationCase {
    pub complex: ChainComplex,
    pub contraction: Contraction,
    pub kept: BTreeMap<i64, BTreeSet<Label>>,
    pub orders: BTreeMap<i64, Poset>,
}

pub fn cancellation_case(rng: &mut impl Rng, ring: &Ring) -> CancellationCase {
    let (k, xk) = contractible_complex(rng, ring, 4, 3, "k");
    let (e0, xe0) = contractible_complex(rng, ring, 4, 2, "e");
    // E must stay in elementary form so that the complement splits as D ⊕ D̄
    let mut bnd = BTreeMap::new();
    let mut con = BTreeMap::new();
    let pieces: Vec<(i64, Label, Label, Elem)> = e0
        .degrees()
        .into_iter()
        .flat_map(|d| {
            let b = e0.c(d);
            b.entries().iter().map(move |((r, c), v)| (d, c.clone(), r.clone(), v.clone())).collect::<Vec<_>>()
        })
        .collect();
    drop(xe0);
    let mut used: BTreeSet<Label> = BTreeSet::new();
    let mut keep: Vec<(i64, Label, Label, Elem)> = Vec::new();
    for (d, hi, lo, _) in pieces {
        if used.contains(&hi) || used.contains(&lo) {
            continue;
        }
        used.insert(hi.clone());
        used.insert(lo.clone());
        keep.push((d, hi, lo, sign(rng, ring)));
    }
    let mut emods: BTreeMap<i64, Vec<Label>> = BTreeMap::new();
    for (d, hi, lo, _) in &keep {
        emods.entry(*d).or_default().push(hi.clone());
        emods.entry(d - 1).or_default().push(lo.clone());
    }
    let degs: BTreeSet<i64> = k.degrees().into_iter().chain(emods.keys().copied()).collect();
    let mut modules = BTreeMap::new();
    let mut kept = BTreeMap::new();
    for &d in &degs {
        let kb = k.module(d);
        let eb = BasedModule::new(ring, emods.get(&d).cloned().unwrap_or_default()).unwrap();
        modules.insert(d, kb.direct_sum(&eb).unwrap());
        kept.insert(d, kb.basis_set().clone());
    }
    let m = |d: i64| modules.get(&d).cloned().unwrap_or_else(|| BasedModule::zero(ring));
    for &d in &degs {
        bnd.insert(d, k.c(d).embed(&m(d), &m(d - 1)).unwrap());
        con.insert(d, xk.at(&k, d).embed(&m(d), &m(d + 1)).unwrap());
    }
    for (d, hi, lo, s) in &keep {
        let b = Morphism::new(&m(*d), &m(d - 1), [((lo.clone(), hi.clone()), s.clone())]).unwrap();
        bnd.insert(*d, bnd[d].add(&b).unwrap());
        let x = Morphism::new(&m(d - 1), &m(*d), [((hi.clone(), lo.clone()), s.clone())]).unwrap();
        con.insert(d - 1, con[&(d - 1)].add(&x).unwrap());
    }
    let sum = ChainComplex::new(ring, modules.clone(), bnd).unwrap();
    let xs = Contraction::new(&sum, con).unwrap();
    // shear by 1 + a with a: E_d -> K_d
    let mut phi = BTreeMap::new();
    for &d in &degs {
        let md = m(d);
        let mut a = Morphism::zero(&md, &md);
        for e in emods.get(&d).into_iter().flatten() {
            for kk in kept[&d].iter() {
                if rng.gen_bool(0.4) {
                    a = a.add(&Morphism::new(&md, &md, [((kk.clone(), e.clone()), nonzero(rng, ring))]).unwrap()).unwrap();
                }
            }
        }
        phi.insert(d, Morphism::identity(&md).add(&a).unwrap().to_dense());
    }
    let (complex, contraction) = conjugate(&sum, &xs, &phi);
    let orders = degs
        .iter()
        .map(|&d| {
            let comp: Vec<Label> = emods.get(&d).cloned().unwrap_or_default();
            let covers: Vec<(Label, Label)> = comp
                .iter()
                .flat_map(|e| kept[&d].iter().map(move |kk| (e.clone(), kk.clone())))
                .collect();
            (d, validate_poset(m(d).basis().iter().cloned(), &covers).unwrap())
        })
        .collect();
    CancellationCase { complex, contraction, kept, orders }
}

/// Connected weighted graph: a random spanning tree plus extra edges.
pub fn weighted_graph(rng: &mut impl Rng, n: usize) -> ControlSpace {
    let points = labels("p", n);
    let mut edges = Vec::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        edges.push((points[j].clone(), points[i].clone(), weight(rng)));
    }
    for _ in 0..n / 2 {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i != j {
            edges.push((points[i].clone(), points[j].clone(), weight(rng)));
        }
    }
    ControlSpace::from_doc(&SpaceDoc { points, metric: MetricDoc::Graph { edges }, frontier: vec![] }).expect("graph")
}

fn weight(rng: &mut impl Rng) -> f64 {
    rng.gen_range(1..=8) as f64 * 0.25
}

pub fn subset(rng: &mut impl Rng, pts: &[Label], p: f64) -> BTreeSet<Label> {
    pts.iter().filter(|_| rng.gen_bool(p)).cloned().collect()
}

pub fn grid_label(i: usize, j: usize) -> Label {
    format!("{i}.{j}")
}

/// `w × h` grid with unit edges; the optional frontier point sits one unit past column `w-1`.
pub fn grid(w: usize, h: usize, frontier: bool) -> ControlSpace {
    let mut points = Vec::new();
    let mut edges = Vec::new();
    for i in 0..w {
        for j in 0..h {
            points.push(grid_label(i, j));
            if i + 1 < w {
                edges.push((grid_label(i, j), grid_label(i + 1, j), 1.0));
            }
            if j + 1 < h {
                edges.push((grid_label(i, j), grid_label(i, j + 1), 1.0));
            }
        }
    }
    let frontier = if frontier {
        let dist = (0..w)
            .flat_map(|i| (0..h).map(move |j| (grid_label(i, j), (w - i) as f64)))
            .collect();
        vec![FrontierDoc { id: "edge".into(), dist }]
    } else {
        vec![]
    };
    ControlSpace::from_doc(&SpaceDoc { points, metric: MetricDoc::Graph { edges }, frontier }).expect("grid")
}

/// Random edge walk of `len` steps from `start`.
pub fn walk(rng: &mut impl Rng, x: &ControlSpace, start: &str, len: usize) -> Vec<Label> {
    let mut cur = x.idx(start).expect("point");
    let mut out = vec![x.points()[cur].clone()];
    for _ in 0..len {
        let nb = x.neighbors(cur);
        if nb.is_empty() {
            break;
        }
        cur = nb[rng.gen_range(0..nb.len())].0;
        out.push(x.points()[cur].clone());
    }
    out
}

fn module_at(ring: &Ring, prefix: &str, pts: &BTreeSet<Label>) -> GeometricModule {
    GeometricModule::new(ring, pts.iter().map(|p| (format!("{prefix}@{p}"), p.clone())).collect())
}

/// Paths from every basis element of `src` along random walks; targets sit at walk ends.
fn walk_morphism(
    rng: &mut impl Rng,
    rm: &ReferenceMap,
    src: &GeometricModule,
    prefix: &str,
    max_len: usize,
) -> GeometricMorphism {
    let ring = src.ring.clone();
    let mut walks = Vec::new();
    for (l, p) in src.locations() {
        for _ in 0..rng.gen_range(0..=2) {
            let len = rng.gen_range(0..=max_len);
            walks.push((l.clone(), walk(rng, &rm.e, p, len)));
        }
    }
    let ends: BTreeSet<Label> = walks.iter().map(|(_, w)| w.last().unwrap().clone()).collect();
    let tgt = module_at(&ring, prefix, &ends);
    let paths: Vec<GPath> = walks
        .into_iter()
        .map(|(l, w)| GPath {
            coeff: nonzero(rng, &ring),
            from: l,
            to: format!("{prefix}@{}", w.last().unwrap()),
            via: w,
        })
        .collect();
    GeometricMorphism::new(src, &tgt, paths).expect("walk morphism")
}

/// Composable `f: A -> B`, `g: B -> C` of random walks on a grid.
pub fn geometric_pair(rng: &mut impl Rng, ring: &Ring) -> (ReferenceMap, GeometricMorphism, GeometricMorphism) {
    let x = grid(rng.gen_range(2..=6), rng.gen_range(1..=5), false);
    let rm = ReferenceMap::identity(x.clone());
    let a = module_at(ring, "a", &subset(rng, x.points(), 0.5));
    let f = walk_morphism(rng, &rm, &a, "b", 4);
    let g = walk_morphism(rng, &rm, f.target(), "c", 4);
    (rm, f, g)
}

/// A walk morphism with a two- or three-stage homotopy moving interior samples to neighbours.
pub fn homotopy_case(rng: &mut impl Rng, ring: &Ring) -> (ReferenceMap, GeometricMorphism, GeometricHomotopy) {
    let x = grid(rng.gen_range(3..=6), rng.gen_range(2..=5), false);
    let rm = ReferenceMap::identity(x.clone());
    let a = module_at(ring, "a", &subset(rng, x.points(), 0.4));
    let f = walk_morphism(rng, &rm, &a, "b", 5);
    let mut tracks = Vec::new();
    for k in f.terms().keys() {
        let stages = rng.gen_range(1..=3);
        let mut st = vec![k.via.clone()];
        for _ in 1..stages {
            let mut next = k.via.clone();
            let n = next.len();
            for s in next.iter_mut().take(n.saturating_sub(1)).skip(1) {
                if rng.gen_bool(0.5) {
                    let i = x.idx(s).unwrap();
                    let nb = x.neighbors(i);
                    *s = x.points()[nb[rng.gen_range(0..nb.len())].0].clone();
                }
            }
            st.push(next);
        }
        tracks.push(Track { from: k.from.clone(), to: k.to.clone(), stages: st });
    }
    (rm, f, GeometricHomotopy::new(tracks).expect("tracks"))
}

/// Random 2- or 3-dimensional complex of simplices with mesh below `eps`.
pub fn simplicial(rng: &mut impl Rng, dim: usize, eps: f64) -> SimplicialComplex {
    let n = rng.gen_range(dim + 1..=dim + 6);
    let mut coords = BTreeMap::new();
    let scale = 0.9 * eps;
    for i in 0..n {
        coords.insert(format!("v{i}"), (0..dim).map(|_| rng.gen_range(0.0..scale)).collect::<Vec<f64>>());
    }
    let names: Vec<Label> = coords.keys().cloned().collect();
    let dist = |a: &Label, b: &Label| -> f64 {
        let (p, q): (&Vec<f64>, &Vec<f64>) = (&coords[a], &coords[b]);
        p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    let mut simplices = Vec::new();
    for _ in 0..rng.gen_range(1..=4) {
        let mut vs = names.clone();
        vs.shuffle(rng);
        vs.truncate(rng.gen_range(2..=dim + 1));
        let ok = vs.iter().enumerate().all(|(i, a)| vs[i + 1..].iter().all(|b| dist(a, b) < eps));
        if ok {
            simplices.push(vs);
        }
    }
    if simplices.is_empty() {
        simplices.push(vec![names[0].clone()]);
    }
    SimplicialComplex { coords, simplices }
}

/// Basis elements on a line or grid, an order made of chains inside windows of
/// diameter `< eps`, and a triangular morphism whose off-diagonal paths stay in a window.
#[derive(Debug, Clone)]
pub struct ControlledTriangularCase {
    pub rm: ReferenceMap,
    pub f: GeometricMorphism,
    pub order: Poset,
    pub eps: f64,
}

pub fn controlled_triangular(rng: &mut impl Rng, ring: &Ring, unipotent: bool) -> ControlledTriangularCase {
    let (x, window): (ControlSpace, Box<dyn Fn(&str) -> Label>) = if rng.gen_bool(0.5) {
        let n = rng.gen_range(4..=16);
        (ControlSpace::line(n), Box::new(|p: &str| (p.parse::<usize>().unwrap() / 3).to_string()))
    } else {
        let (w, h) = (rng.gen_range(2..=5), rng.gen_range(2..=4));
        let win = |p: &str| {
            let (i, j) = p.split_once('.').unwrap();
            format!("{}.{}", i.parse::<usize>().unwrap() / 2, j.parse::<usize>().unwrap() / 2)
        };
        (grid(w, h, false), Box::new(win))
    };
    // windows have diameter 2; eps = 3
    let eps = 3.0;
    let rm = ReferenceMap::identity(x.clone());
    let pts = subset(rng, x.points(), 0.7);
    let pts = if pts.is_empty() { BTreeSet::from([x.points()[0].clone()]) } else { pts };
    let m = module_at(ring, "b", &pts);
    let mut by_win: BTreeMap<Label, Vec<Label>> = BTreeMap::new();
    for (l, p) in m.locations() {
        by_win.entry(window(p)).or_default().push(l.clone());
    }
    let mut covers = Vec::new();
    for ls in by_win.values() {
        let mut ls = ls.clone();
        ls.shuffle(rng);
        for i in 0..ls.len() {
            for j in i + 1..ls.len() {
                if rng.gen_bool(0.6) {
                    covers.push((ls[i].clone(), ls[j].clone()));
                }
            }
        }
    }
    let order = validate_poset(m.basis().cloned(), &covers).unwrap();
    let mut paths = Vec::new();
    for (l, p) in m.locations() {
        let coeff = if unipotent { ring.one() } else { unit(rng, ring) };
        let via = if !unipotent && rng.gen_bool(0.3) {
            let nb = x.neighbors(x.idx(p).unwrap());
            vec![p.clone(), x.points()[nb[0].0].clone(), p.clone()]
        } else {
            vec![p.clone()]
        };
        paths.push(GPath { coeff, from: l.clone(), to: l.clone(), via });
        for t in order.above(l) {
            if rng.gen_bool(0.6) {
                let q = m.at(t).unwrap();
                paths.push(GPath { coeff: nonzero(rng, ring), from: l.clone(), to: t.clone(), via: shortest_walk(&x, p, q) });
            }
        }
    }
    let f = GeometricMorphism::new(&m, &m, paths).unwrap();
    ControlledTriangularCase { rm, f, order, eps }
}

/// A shortest edge walk between two points of a graph space.
pub fn shortest_walk(x: &ControlSpace, a: &str, b: &str) -> Vec<Label> {
    let (ia, ib) = (x.idx(a).unwrap(), x.idx(b).unwrap());
    let mut out = vec![ia];
    let mut cur = ia;
    while cur != ib {
        let next = x
            .neighbors(cur)
            .into_iter()
            .find(|(v, w)| (x.d_idx(*v, ib) + w - x.d_idx(cur, ib)).abs() < 1e-9)
            .expect("connected graph")
            .0;
        out.push(next);
        cur = next;
    }
    out.into_iter().map(|i| x.points()[i].clone()).collect()
}

/// Random Volodin-style sequence over `ring` of `k × k` matrices. About half are
/// built to share one order; the rest mix orders or use arbitrary matrices.
pub fn volodin_sequence(rng: &mut impl Rng, ring: &Ring, k: usize, len: usize) -> VolodinPath {
    let g0 = invertible(rng, ring, k);
    let kind = rng.gen_range(0..3);
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(rng);
    let mut ms = Vec::new();
    for _ in 0..len {
        let m = match kind {
            0 => matrix_mul(ring, &unitriangular(rng, ring, &perm, 0.4), &g0),
            1 => {
                let mut p: Vec<usize> = (0..k).collect();
                p.shuffle(rng);
                matrix_mul(ring, &unitriangular(rng, ring, &p, 0.3), &g0)
            }
            _ => (0..k).map(|_| (0..k).map(|_| ring.from_int(rng.gen_range(0..3))).collect()).collect(),
        };
        ms.push(m);
    }
    VolodinPath::new(ring, k, ms, SignMode::One).unwrap()
}

/// `1 + n` with `n[r][c] ≠ 0` only when `c` comes before `r` in `perm`.
pub fn unitriangular(rng: &mut impl Rng, ring: &Ring, perm: &[usize], density: f64) -> Vec<Vec<Elem>> {
    let k = perm.len();
    let mut m = identity_matrix(ring, k);
    for a in 0..k {
        for b in a + 1..k {
            if rng.gen_bool(density) {
                m[perm[b]][perm[a]] = nonzero(rng, ring);
            }
        }
    }
    m
}

/// A plus-minus Volodin loop `I, s_1 L_1, ..., s_{n-1} L_{n-1}, I` for one order;
/// with `positive` every sign matrix is the identity.
pub fn signed_loop(rng: &mut impl Rng, ring: &Ring, k: usize, len: usize, positive: bool) -> VolodinPath {
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(rng);
    let mut ms = vec![identity_matrix(ring, k)];
    for _ in 0..len {
        let mut l = unitriangular(rng, ring, &perm, 0.4);
        if !positive {
            for row in l.iter_mut() {
                let s = sign(rng, ring);
                for x in row.iter_mut() {
                    *x = ring.mul(&s, x);
                }
            }
        }
        ms.push(l);
    }
    ms.push(identity_matrix(ring, k));
    VolodinPath::new(ring, k, ms, SignMode::PlusMinus).unwrap()
}

/// `d = 1 + u` on a line or grid with an ε-bounded order, and a subset `Y`.
#[derive(Debug, Clone)]
pub struct LocalizationCase {
    pub rm: ReferenceMap,
    pub d: GeometricMorphism,
    pub order: Poset,
    pub ys: BTreeSet<Label>,
    pub eps: f64,
}

pub fn localization_case(rng: &mut impl Rng, ring: &Ring) -> LocalizationCase {
    let c = controlled_triangular(rng, ring, true);
    let ys = subset(rng, c.rm.x.points(), 0.4);
    LocalizationCase { rm: c.rm, d: c.f, order: c.order, ys, eps: c.eps }
}

/// A controlled isomorphism `f = 1 + u`, `f⁻ = 1 - v` with witnesses moving `v` onto `u`.
#[derive(Debug, Clone)]
pub struct IsoCase {
    pub rm: ReferenceMap,
    pub f: GeometricMorphism,
    pub inverse: GeometricMorphism,
    pub h_a: GeometricHomotopy,
    pub h_b: GeometricHomotopy,
    pub eps: f64,
}

/// Two monotone grid walks between the same corners: columns first or rows first.
fn corner_walks(a: (usize, usize), b: (usize, usize)) -> (Vec<Label>, Vec<Label>) {
    let step = |from: usize, to: usize| -> Vec<usize> {
        if from <= to {
            (from..=to).collect()
        } else {
            (to..=from).rev().collect()
        }
    };
    let (is, js) = (step(a.0, b.0), step(a.1, b.1));
    let mut p = Vec::new();
    let mut q = Vec::new();
    for &i in &is {
        p.push(grid_label(i, a.1));
    }
    for &j in &js[1..] {
        p.push(grid_label(b.0, j));
    }
    for &j in &js {
        q.push(grid_label(a.0, j));
    }
    for &i in &is[1..] {
        q.push(grid_label(i, b.1));
    }
    (p, q)
}

pub fn epsilon_iso(rng: &mut impl Rng, ring: &Ring) -> IsoCase {
    let (w, h) = (rng.gen_range(3..=7), rng.gen_range(3..=6));
    let x = grid(w, h, true);
    let rm = ReferenceMap::identity(x.clone());
    let eps = 3.0;
    let m = module_at(ring, "b", &x.all_points());
    let mut one = Vec::new();
    let mut uu = Vec::new();
    let mut vv = Vec::new();
    let mut tracks = Vec::new();
    for (l, p) in m.locations() {
        one.push(GPath { coeff: ring.one(), from: l.clone(), to: l.clone(), via: vec![p.clone()] });
    }
    // sources in even columns, targets in odd columns
    for i in (0..w).step_by(2) {
        for j in 0..h {
            if !rng.gen_bool(0.6) {
                continue;
            }
            let di: i64 = if rng.gen_bool(0.5) { 1 } else { -1 };
            let ti = i as i64 + di;
            if ti < 0 || ti >= w as i64 {
                continue;
            }
            let tj = (j as i64 + rng.gen_range(-1..=1)).clamp(0, h as i64 - 1) as usize;
            let (a, b) = ((i, j), (ti as usize, tj));
            let (pu, pv) = corner_walks(a, b);
            let c = nonzero(rng, ring);
            let (s, t) = (format!("b@{}", grid_label(a.0, a.1)), format!("b@{}", grid_label(b.0, b.1)));
            uu.push(GPath { coeff: c.clone(), from: s.clone(), to: t.clone(), via: pu.clone() });
            vv.push(GPath { coeff: ring.neg(&c), from: s.clone(), to: t.clone(), via: pv.clone() });
            if pu != pv {
                tracks.push(Track { from: s, to: t, stages: vec![pv, pu] });
            }
        }
    }
    let f = GeometricMorphism::new(&m, &m, one.iter().cloned().chain(uu)).unwrap();
    let inverse = GeometricMorphism::new(&m, &m, one.into_iter().chain(vv)).unwrap();
    let h = GeometricHomotopy::new(tracks).unwrap();
    IsoCase { rm, f, inverse, h_a: h.clone(), h_b: h, eps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::{standardize_cancellation, validate_complex, find_cancellation};
    use crate::geometric::{validate_controlled, Controlled};
    use crate::rings::UnitKind;

    #[test]
    fn generated_complexes_are_contractible() {
        let mut r = rng(1);
        for ring in [Ring::Z, Ring::zmod(5).unwrap()] {
            for _ in 0..20 {
                let (c, x) = contractible_complex(&mut r, &ring, 5, 4, "c");
                assert!(validate_complex(&c, Some(&x)).unwrap().ok());
            }
        }
    }

    #[test]
    fn generated_cancellations_standardize() {
        let mut r = rng(2);
        for _ in 0..20 {
            let k = cancellation_case(&mut r, &Ring::Z);
            let dec = find_cancellation(&k.complex, &k.contraction, &k.kept, &k.orders, UnitKind::PlusMinusOne).unwrap();
            standardize_cancellation(&k.complex, &k.contraction, &dec).unwrap();
        }
    }

    #[test]
    fn generated_isomorphisms_validate() {
        let mut r = rng(3);
        for _ in 0..10 {
            let c = epsilon_iso(&mut r, &Ring::Z);
            let rep = validate_controlled(
                &c.rm,
                Controlled::Isomorphism { f: &c.f, inverse: Some(&c.inverse), h_a: Some(&c.h_a), h_b: Some(&c.h_b) },
                c.eps,
            )
            .unwrap();
            assert!(rep.ok(), "{:?}", rep.failures());
        }
    }

    #[test]
    fn seed_is_read_from_environment_format() {
        assert_eq!(rng(7).gen::<u64>(), rng(7).gen::<u64>());
        assert_ne!(rng(7).gen::<u64>(), rng(8).gen::<u64>());
    }
}
