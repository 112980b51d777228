//! K₁ simplices and morphisms, Volodin paths, and the explicit constructions
//! on them (cancellation of inverses, stabilization, sign fixing).

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::chains::{
    direct_sum, find_cancellation, is_chain_map, mapping_cone, suspend, tag_source, tag_target, validate_complex,
    ChainComplex, ChainError, ChainMap, Contraction,
};
use crate::control::{ControlError, ControlSpace, MetricDoc, SpaceDoc};
use crate::geometric::Check;
use crate::morphisms::{decompose_triangular, is_u_diagonal, BasedModule, MorphError, Morphism};
use crate::posets::{find_common_order, is_epsilon_bounded, shuffle_orders, Poset, PosetError, ShuffleInput};
use crate::rings::{identity_matrix, matrix_inverse_oracle, matrix_mul, Elem, Ring, RingError, UnitKind};
use crate::Label;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KError {
    #[error("missing certificate: {0}")]
    MissingCertificate(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("matrix {0} is not invertible")]
    NotInvertible(usize),
    #[error("g_{j} g_{i}^-1 has diagonal entry {value} at e{index}", j = .pair.1, i = .pair.0, index = .index + 1)]
    DiagonalNotOne { pair: (usize, usize), index: usize, value: String },
    #[error("no common order: cycle {0:?}")]
    NoOrderExists(Vec<Label>),
    #[error("complement has rank {expected} but the stabilizing map has rank {got}")]
    WrongComplementRank { expected: usize, got: usize },
    #[error("path does not start and end at the identity")]
    NotALoop,
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Morph(#[from] MorphError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Poset(#[from] PosetError),
    #[error(transparent)]
    Control(#[from] ControlError),
}

/// Control data for the controlled variant: basis locations are read from the based modules.
#[derive(Debug, Clone, PartialEq)]
pub struct K1Control {
    pub space: ControlSpace,
    pub eps: f64,
}

/// Complexes `C_0..C_n` with contractions, chain maps `c_{i,j}` for `i < j`, and
/// per-complex, per-degree order certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct K1SimplexData {
    pub ring: Ring,
    pub complexes: Vec<ChainComplex>,
    pub contractions: Vec<Contraction>,
    pub maps: BTreeMap<(usize, usize), ChainMap>,
    pub orders: Vec<BTreeMap<i64, Poset>>,
    pub control: Option<K1Control>,
}

impl K1SimplexData {
    pub fn dim(&self) -> usize {
        self.complexes.len().saturating_sub(1)
    }

    /// `c_{i,j}` in degree `d`; the identity when `i = j`, zero when absent.
    pub fn map(&self, i: usize, j: usize, d: i64) -> Morphism {
        let (s, t) = (self.complexes[i].module(d), self.complexes[j].module(d));
        if i == j {
            return Morphism::identity(&s);
        }
        self.maps.get(&(i, j)).and_then(|m| m.get(&d)).cloned().unwrap_or_else(|| Morphism::zero(&s, &t))
    }

    pub fn chain_map(&self, i: usize, j: usize) -> ChainMap {
        self.degrees().into_iter().map(|d| (d, self.map(i, j, d))).collect()
    }

    pub fn order(&self, i: usize, d: i64) -> Poset {
        self.orders
            .get(i)
            .and_then(|o| o.get(&d))
            .cloned()
            .unwrap_or_else(|| Poset::antichain(self.complexes[i].module(d).basis().iter().cloned()))
    }

    /// Union of the degrees of all complexes.
    pub fn degrees(&self) -> Vec<i64> {
        let set: BTreeSet<i64> = self.complexes.iter().flat_map(|c| c.degrees()).collect();
        set.into_iter().collect()
    }

    /// The `j`-th face: omit `C_j`.
    pub fn face(&self, j: usize) -> K1SimplexData {
        let keep: Vec<usize> = (0..self.complexes.len()).filter(|&k| k != j).collect();
        let pos = |k: usize| keep.iter().position(|&x| x == k);
        let maps = self
            .maps
            .iter()
            .filter_map(|((a, b), m)| Some(((pos(*a)?, pos(*b)?), m.clone())))
            .collect();
        K1SimplexData {
            ring: self.ring.clone(),
            complexes: keep.iter().map(|&k| self.complexes[k].clone()).collect(),
            contractions: keep.iter().map(|&k| self.contractions[k].clone()).collect(),
            maps,
            orders: keep.iter().filter_map(|&k| self.orders.get(k).cloned()).collect(),
            control: self.control.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct K1Report {
    pub checks: Vec<Check>,
}

impl K1Report {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.ok).collect()
    }

    fn push(&mut self, clause: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.checks.push(Check { clause: clause.into(), ok, detail: detail.into() });
    }

    fn absorb(&mut self, prefix: &str, other: K1Report) {
        for c in other.checks {
            self.push(format!("{prefix}: {}", c.clause), c.ok, c.detail);
        }
    }
}

/// Largest distance between the locations of a nonzero entry's row and column.
pub fn entry_radius(m: &Morphism, space: &ControlSpace) -> Result<f64, KError> {
    let (Some(ls), Some(lt)) = (m.source().location(), m.target().location()) else {
        return Err(KError::MissingCertificate("basis locations".into()));
    };
    let mut r: f64 = 0.0;
    for (row, col) in m.entries().keys() {
        r = r.max(space.d(&lt[row], &ls[col])?);
    }
    Ok(r)
}

fn all_locations(m: &BasedModule) -> BTreeMap<Label, Label> {
    m.location().cloned().unwrap_or_default()
}

/// Per-degree check of one structure map `f: A_i -> C_j`: ±1 triangular injection
/// whose image is not preceded by its complement. Returns the base function.
fn check_triangular_map(
    rep: &mut K1Report,
    name: &str,
    f: &Morphism,
    ps: &Poset,
    pt: &Poset,
    exempt: &BTreeSet<Label>,
) -> Option<BTreeMap<Label, Label>> {
    match decompose_triangular(f, pt, Some(ps), UnitKind::PlusMinusOne) {
        Err(e) => {
            rep.push(format!("{name} is ±1 triangular"), false, e.to_string());
            None
        }
        Ok(dec) => {
            let injective = dec.base_function.len() == f.source().rank();
            rep.push(format!("{name} is ±1 triangular"), injective, if injective { "" } else { "kills a basis element" });
            let image: BTreeSet<&Label> = dec.base_function.values().collect();
            let bad: Vec<(Label, Label)> = f
                .target()
                .basis()
                .iter()
                .filter(|a| !image.contains(a) && !exempt.contains(*a))
                .flat_map(|a| image.iter().filter(|b| pt.lt(b, a)).map(move |b| ((*b).clone(), a.clone())))
                .collect();
            rep.push(format!("{name}: complement precedes image"), bad.is_empty(), format!("{bad:?}"));
            Some(dec.base_function)
        }
    }
}

fn compose_base(f: &BTreeMap<Label, Label>, g: &BTreeMap<Label, Label>) -> BTreeMap<Label, Label> {
    f.iter().filter_map(|(x, y)| g.get(y).map(|z| (x.clone(), z.clone()))).collect()
}

fn same_base(a: &BTreeMap<Label, Label>, b: &BTreeMap<Label, Label>, partial: bool) -> bool {
    if partial {
        a.iter().all(|(k, v)| b.get(k).is_none_or(|w| w == v))
    } else {
        a == b
    }
}

fn image_sets(bf: &BTreeMap<i64, BTreeMap<Label, Label>>) -> BTreeMap<i64, BTreeSet<Label>> {
    bf.iter().map(|(d, m)| (*d, m.values().cloned().collect())).collect()
}

/// Frontier points' reach in the controlled case (labels exempt from the order clause).
fn frontier_exempt(s: &K1SimplexData, j: usize, d: i64) -> BTreeSet<Label> {
    let Some(ctl) = &s.control else { return BTreeSet::new() };
    let fr = ctl.space.frontier_enlargement(ctl.eps);
    all_locations(&s.complexes[j].module(d)).into_iter().filter(|(_, p)| fr.contains(p)).map(|(l, _)| l).collect()
}

fn check_complex(rep: &mut K1Report, s: &K1SimplexData, i: usize) -> Result<(), KError> {
    let c = &s.complexes[i];
    let xi = &s.contractions[i];
    let r = validate_complex(c, Some(xi))?;
    rep.push(
        format!("C_{i} is a complex with contraction"),
        r.ok(),
        format!("c² fails {:?}, contraction fails {:?}", r.c_squared_failures, r.contraction_failures),
    );
    if let Some(ctl) = &s.control {
        let mut rc: f64 = 0.0;
        for b in c.boundaries().values() {
            rc = rc.max(entry_radius(b, &ctl.space)?);
        }
        rep.push(format!("C_{i}: boundary radius < eps"), rc < ctl.eps, format!("radius {rc}"));
        // powers of ξ until they vanish
        let mut worst: f64 = 0.0;
        for d in c.degrees() {
            let mut pw = xi.at(c, d);
            let mut k = d;
            while !pw.is_zero() {
                worst = worst.max(entry_radius(&pw, &ctl.space)?);
                k += 1;
                pw = xi.at(c, k).after(&pw)?;
            }
        }
        rep.push(format!("C_{i}: every power of the contraction has radius < eps"), worst < ctl.eps, format!("radius {worst}"));
        for d in c.degrees() {
            let p = s.order(i, d);
            let b = is_epsilon_bounded(&p, &all_locations(&c.module(d)), ctl.eps, &ctl.space)?;
            rep.push(format!("C_{i}: order in degree {d} is eps bounded"), b.epsilon_bounded, format!("{:?}", b.violating_element));
        }
    }
    Ok(())
}

pub fn validate_k1_simplex(s: &K1SimplexData) -> Result<K1Report, KError> {
    let n = s.complexes.len();
    if n == 0 || s.contractions.len() != n {
        return Err(KError::InvalidInput("need one contraction per complex".into()));
    }
    if s.orders.len() != n {
        return Err(KError::MissingCertificate(format!("{} order certificates for {n} complexes", s.orders.len())));
    }
    if s.complexes.iter().any(|c| c.ring != s.ring) {
        return Err(KError::Chain(ChainError::RingMismatch));
    }
    let mut rep = K1Report::default();
    for i in 0..n {
        check_complex(&mut rep, s, i)?;
    }
    let degs = s.degrees();
    let mut base: BTreeMap<(usize, usize), BTreeMap<i64, BTreeMap<Label, Label>>> = BTreeMap::new();
    for j in 0..n {
        for i in 0..j {
            let cm = s.chain_map(i, j);
            let bad = is_chain_map(&cm, &s.complexes[i], &s.complexes[j])?;
            rep.push(format!("c_{i}{j} is a chain map"), bad.is_none(), format!("{bad:?}"));
            if let Some(ctl) = &s.control {
                let mut r: f64 = 0.0;
                for m in cm.values() {
                    r = r.max(entry_radius(m, &ctl.space)?);
                }
                rep.push(format!("c_{i}{j}: radius < eps"), r < ctl.eps, format!("radius {r}"));
            }
            let mut per = BTreeMap::new();
            for &d in &degs {
                let exempt = frontier_exempt(s, j, d);
                let name = format!("c_{i}{j} in degree {d}");
                if let Some(bf) = check_triangular_map(&mut rep, &name, &cm[&d], &s.order(i, d), &s.order(j, d), &exempt) {
                    per.insert(d, bf);
                }
            }
            base.insert((i, j), per);
        }
    }
    let partial = s.control.is_some();
    for k in 0..n {
        for j in 0..k {
            for i in 0..j {
                let ok = degs.iter().all(|d| {
                    let get = |a: usize, b: usize| base.get(&(a, b)).and_then(|m| m.get(d));
                    match (get(i, j), get(j, k), get(i, k)) {
                        (Some(f), Some(g), Some(h)) => same_base(&compose_base(f, g), h, partial),
                        _ => false,
                    }
                });
                rep.push(format!("c_{j}{k} c_{i}{j} has the basis function of c_{i}{k}"), ok, "");
            }
        }
    }
    for j in 0..n {
        for i in 0..j {
            let Some(bf) = base.get(&(i, j)) else { continue };
            let kept = image_sets(bf);
            let r = find_cancellation(&s.complexes[j], &s.contractions[j], &kept, &s.orders[j], UnitKind::PlusMinusOne);
            rep.push(
                format!("xi_{j} cancels the complement of the image of c_{i}{j}"),
                r.is_ok(),
                r.err().map(|e| e.to_string()).unwrap_or_default(),
            );
        }
    }
    Ok(rep)
}

/// The `k`-th simplex of the triangulation of `f: A -> C`: vertices `A_0..A_k, C_k..C_n`.
pub fn triangulation_simplex(
    f: &BTreeMap<(usize, usize), ChainMap>,
    a: &K1SimplexData,
    c: &K1SimplexData,
    k: usize,
) -> K1SimplexData {
    let n = c.complexes.len() - 1;
    let mut complexes = Vec::new();
    let mut contractions = Vec::new();
    let mut orders = Vec::new();
    for i in 0..=k {
        complexes.push(a.complexes[i].clone());
        contractions.push(a.contractions[i].clone());
        orders.push(a.orders.get(i).cloned().unwrap_or_default());
    }
    for j in k..=n {
        complexes.push(c.complexes[j].clone());
        contractions.push(c.contractions[j].clone());
        orders.push(c.orders.get(j).cloned().unwrap_or_default());
    }
    let mut maps = BTreeMap::new();
    for q in 0..complexes.len() {
        for p in 0..q {
            let m = if q <= k {
                a.maps.get(&(p, q)).cloned()
            } else if p > k {
                c.maps.get(&(p - 1, q - 1)).cloned()
            } else {
                f.get(&(p, q - 1)).cloned()
            };
            if let Some(m) = m {
                maps.insert((p, q), m);
            }
        }
    }
    K1SimplexData { ring: c.ring.clone(), complexes, contractions, maps, orders, control: c.control.clone() }
}

/// Checks a K₁ morphism `f_{i,j}: A_i -> C_j` (`i <= j`) and every simplex of its triangulation.
pub fn validate_k1_morphism(
    f: &BTreeMap<(usize, usize), ChainMap>,
    a: &K1SimplexData,
    c: &K1SimplexData,
) -> Result<(K1Report, Vec<K1SimplexData>), KError> {
    if a.complexes.len() != c.complexes.len() {
        return Err(KError::InvalidInput("source and target have different dimensions".into()));
    }
    let n = c.complexes.len();
    let mut rep = K1Report::default();
    rep.absorb("source", validate_k1_simplex(a)?);
    rep.absorb("target", validate_k1_simplex(c)?);
    let degs: Vec<i64> = {
        let mut s: BTreeSet<i64> = a.degrees().into_iter().collect();
        s.extend(c.degrees());
        s.into_iter().collect()
    };
    let fm = |i: usize, j: usize, d: i64| -> Morphism {
        f.get(&(i, j))
            .and_then(|m| m.get(&d))
            .cloned()
            .unwrap_or_else(|| Morphism::zero(&a.complexes[i].module(d), &c.complexes[j].module(d)))
    };
    let mut base: BTreeMap<(usize, usize), BTreeMap<i64, BTreeMap<Label, Label>>> = BTreeMap::new();
    for j in 0..n {
        for i in 0..=j {
            let cm: ChainMap = degs.iter().map(|&d| (d, fm(i, j, d))).collect();
            let bad = is_chain_map(&cm, &a.complexes[i], &c.complexes[j])?;
            rep.push(format!("f_{i}{j} is a chain map"), bad.is_none(), format!("{bad:?}"));
            let mut per = BTreeMap::new();
            for &d in &degs {
                let exempt = frontier_exempt(c, j, d);
                let name = format!("f_{i}{j} in degree {d}");
                if let Some(bf) = check_triangular_map(&mut rep, &name, &cm[&d], &a.order(i, d), &c.order(j, d), &exempt) {
                    per.insert(d, bf);
                }
            }
            base.insert((i, j), per);
        }
    }
    let bf_of = |s: &K1SimplexData, i: usize, j: usize, d: i64| -> Option<BTreeMap<Label, Label>> {
        let m = s.map(i, j, d);
        decompose_triangular(&m, &s.order(j, d), None, UnitKind::PlusMinusOne).ok().map(|t| t.base_function)
    };
    for k in 0..n {
        for j in 0..=k {
            for i in 0..=j {
                let ok = degs.iter().all(|&d| {
                    let fij = base.get(&(i, j)).and_then(|m| m.get(&d));
                    let fik = base.get(&(i, k)).and_then(|m| m.get(&d));
                    let fjk = base.get(&(j, k)).and_then(|m| m.get(&d));
                    match (fij, fik, fjk, bf_of(c, j, k, d), bf_of(a, i, j, d)) {
                        (Some(fij), Some(fik), Some(fjk), Some(cjk), Some(aij)) => {
                            compose_base(fij, &cjk) == *fik && compose_base(&aij, fjk) == *fik
                        }
                        _ => false,
                    }
                });
                rep.push(format!("c_{j}{k} f_{i}{j}, f_{i}{k}, f_{j}{k} a_{i}{j} share a basis function"), ok, "");
            }
        }
    }
    for j in 0..n {
        for i in 0..=j {
            let Some(bf) = base.get(&(i, j)) else { continue };
            let kept = image_sets(bf);
            let r = find_cancellation(&c.complexes[j], &c.contractions[j], &kept, &c.orders[j], UnitKind::PlusMinusOne);
            rep.push(
                format!("xi_{j} cancels the complement of the image of f_{i}{j}"),
                r.is_ok(),
                r.err().map(|e| e.to_string()).unwrap_or_default(),
            );
        }
    }
    let tri: Vec<K1SimplexData> = (0..n).map(|k| triangulation_simplex(f, a, c, k)).collect();
    for (k, t) in tri.iter().enumerate() {
        let r = validate_k1_simplex(t)?;
        rep.push(format!("triangulation simplex {k} is a K1 simplex"), r.ok(), format!("{:?}", r.failures()));
    }
    Ok((rep, tri))
}

/// Output of [`cancellation_data`].
#[derive(Debug, Clone, PartialEq)]
pub struct CancellationData {
    /// `C ⊕ SC` with contraction `ξ ⊕ -ξ`.
    pub sum: K1SimplexData,
    /// The cone on the identity, `C ⊕₁ SC`.
    pub cone: K1SimplexData,
    /// `f_{i,j} = [[1, -ξ_j], [0, 1]] (c_{i,j} ⊕ c_{i,j})`.
    pub morphism: BTreeMap<(usize, usize), ChainMap>,
    /// The zero simplex mapping into the cone.
    pub zero: K1SimplexData,
}

fn sum_map(s: &K1SimplexData, i: usize, j: usize, src: &ChainComplex, tgt: &ChainComplex) -> Result<ChainMap, KError> {
    let mut out = BTreeMap::new();
    for d in src.degrees().into_iter().chain(tgt.degrees()).collect::<BTreeSet<_>>() {
        let t = s.map(i, j, d).relabel(tag_target, tag_target);
        let u = s.map(i, j, d - 1).relabel(tag_source, tag_source);
        let (a, b) = (src.module(d), tgt.module(d));
        out.insert(d, t.embed(&a, &b)?.add(&u.embed(&a, &b)?)?);
    }
    Ok(out)
}

/// Shuffled order on `C_j ⊕ SC_j` in every degree.
fn shuffled(s: &K1SimplexData, j: usize, sum: &ChainComplex) -> Result<BTreeMap<i64, Poset>, KError> {
    let c = &s.complexes[j];
    let (space, eps, loc_of): (ControlSpace, f64, Box<dyn Fn(&Label, i64) -> Label>) = match &s.control {
        Some(ctl) => {
            let locs: BTreeMap<i64, BTreeMap<Label, Label>> =
                c.modules().iter().map(|(d, m)| (*d, all_locations(m))).collect();
            (ctl.space.clone(), ctl.eps, Box::new(move |l: &Label, d: i64| locs[&d][l].clone()))
        }
        None => {
            let pt = ControlSpace::from_doc(&SpaceDoc {
                points: vec!["*".into()],
                metric: MetricDoc::Euclidean { coords: BTreeMap::from([("*".to_string(), vec![0.0])]) },
                frontier: vec![],
            })?;
            (pt, f64::INFINITY, Box::new(|_: &Label, _: i64| "*".to_string()))
        }
    };
    // images C_{i,j} for i < j, as labels per degree
    let mut images: BTreeMap<i64, Vec<BTreeSet<Label>>> = BTreeMap::new();
    for i in 0..j {
        for d in c.degrees() {
            let m = s.map(i, j, d);
            let bf = decompose_triangular(&m, &s.order(j, d), None, UnitKind::PlusMinusOne)?;
            images.entry(d).or_default().push(bf.base_function.values().cloned().collect());
        }
    }
    let mut out = BTreeMap::new();
    for d in sum.degrees() {
        let c_order = s.order(j, d).relabel(tag_target);
        let sc_order = s.order(j, d - 1).relabel(tag_source);
        let mut degree = BTreeMap::new();
        let mut loc = BTreeMap::new();
        for l in c.module(d).basis() {
            degree.insert(tag_target(l), d);
            loc.insert(tag_target(l), loc_of(l, d));
        }
        for l in c.module(d - 1).basis() {
            degree.insert(tag_source(l), d);
            loc.insert(tag_source(l), loc_of(l, d - 1));
        }
        let empty = Vec::new();
        let pairs: Vec<(BTreeSet<Label>, BTreeSet<Label>)> = images
            .get(&d)
            .unwrap_or(&empty)
            .iter()
            .zip(images.get(&(d - 1)).unwrap_or(&empty).iter().map(Some).chain(std::iter::repeat(None)))
            .map(|(im_c, im_sc)| {
                (
                    im_c.iter().map(tag_target).collect(),
                    im_sc.map(|x| x.iter().map(tag_source).collect()).unwrap_or_default(),
                )
            })
            .collect();
        let pairs = if images.get(&d).is_none() {
            images
                .get(&(d - 1))
                .unwrap_or(&empty)
                .iter()
                .map(|im| (BTreeSet::new(), im.iter().map(tag_source).collect()))
                .collect()
        } else {
            pairs
        };
        let p = shuffle_orders(&ShuffleInput {
            c_order: &c_order,
            sc_order: &sc_order,
            degree: &degree,
            images: &pairs,
            loc: &loc,
            eps,
            space: &space,
        })?;
        out.insert(d, p);
    }
    Ok(out)
}

/// The sum, cone and cancellation morphism for a K₁ simplex, with shuffled certificates.
pub fn cancellation_data(s: &K1SimplexData) -> Result<CancellationData, KError> {
    let rep = validate_k1_simplex(s)?;
    if !rep.ok() {
        return Err(KError::InvalidInput(format!("not a K1 simplex: {:?}", rep.failures())));
    }
    let n = s.complexes.len();
    let mut sums = Vec::new();
    let mut sum_x = Vec::new();
    let mut cones = Vec::new();
    let mut cone_x = Vec::new();
    let mut orders = Vec::new();
    for j in 0..n {
        let c = &s.complexes[j];
        let xi = &s.contractions[j];
        let (sc, sx) = suspend(c, Some(xi), 1, false)?;
        let (sc, sx) = (sc.relabel(tag_source), sx.expect("contraction given").relabel(tag_source));
        let (a, ax) = direct_sum(&c.relabel(tag_target), &xi.relabel(tag_target), &sc, &sx)?;
        let id: ChainMap = c.degrees().into_iter().map(|d| (d, Morphism::identity(&c.module(d)))).collect();
        let (cone, cx) = mapping_cone(&id, c, c)?;
        let cx = cx.ok_or_else(|| KError::InvalidInput("identity cone has no contraction".into()))?;
        // the cone and the sum share modules; use the cone's ordering of bases
        let a = ChainComplex::new(&s.ring, cone.modules().clone(), a.boundaries().clone())?;
        let ax = Contraction::new(&a, ax.maps().clone())?;
        orders.push(shuffled(s, j, &a)?);
        sums.push(a);
        sum_x.push(ax);
        cones.push(cone);
        cone_x.push(cx);
    }
    let mut sum_maps = BTreeMap::new();
    let mut cone_maps = BTreeMap::new();
    let mut morphism = BTreeMap::new();
    for j in 0..n {
        for i in 0..=j {
            let m = sum_map(s, i, j, &sums[i], &sums[j])?;
            // [[1, -ξ_j], [0, 1]] on C_j ⊕ SC_j
            let mut f = BTreeMap::new();
            for (d, mm) in &m {
                let tgt = sums[j].module(*d);
                let xi = s.contractions[j].at(&s.complexes[j], d - 1).relabel(tag_source, tag_target).neg();
                let shear = Morphism::identity(&tgt).add(&xi.embed(&tgt, &tgt)?)?;
                f.insert(*d, shear.after(mm)?);
            }
            morphism.insert((i, j), f);
            if i < j {
                sum_maps.insert((i, j), m.clone());
                cone_maps.insert((i, j), m);
            }
        }
    }
    let sum = K1SimplexData {
        ring: s.ring.clone(),
        complexes: sums,
        contractions: sum_x,
        maps: sum_maps,
        orders: orders.clone(),
        control: s.control.clone(),
    };
    let cone = K1SimplexData {
        ring: s.ring.clone(),
        complexes: cones,
        contractions: cone_x,
        maps: cone_maps,
        orders,
        control: s.control.clone(),
    };
    let zero = K1SimplexData {
        ring: s.ring.clone(),
        complexes: vec![ChainComplex::zero(&s.ring); n],
        contractions: vec![Contraction::zero(); n],
        maps: BTreeMap::new(),
        orders: vec![BTreeMap::new(); n],
        control: s.control.clone(),
    };
    Ok(CancellationData { sum, cone, morphism, zero })
}

/// The zero maps `0 -> C_j`.
pub fn zero_morphism(n: usize) -> BTreeMap<(usize, usize), ChainMap> {
    (0..n).flat_map(|j| (0..=j).map(move |i| ((i, j), BTreeMap::new()))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SignMode {
    One,
    PlusMinus,
}

/// A sequence of invertible `k × k` matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VolodinPath {
    pub ring: Ring,
    pub k: usize,
    pub matrices: Vec<Vec<Vec<Elem>>>,
    pub mode: SignMode,
}

pub fn basis_label(i: usize) -> Label {
    format!("e{}", i + 1)
}

impl VolodinPath {
    pub fn new(ring: &Ring, k: usize, matrices: Vec<Vec<Vec<Elem>>>, mode: SignMode) -> Result<Self, KError> {
        for (i, m) in matrices.iter().enumerate() {
            if m.len() != k || m.iter().any(|r| r.len() != k) {
                return Err(KError::InvalidInput(format!("matrix {i} is not {k}x{k}")));
            }
            for r in m {
                for x in r {
                    ring.check(x)?;
                }
            }
        }
        Ok(VolodinPath { ring: ring.clone(), k, matrices, mode })
    }

    pub fn face(&self, j: usize) -> VolodinPath {
        let mut v = self.clone();
        v.matrices.remove(j);
        v
    }

    fn inverses(&self) -> Result<Vec<Vec<Vec<Elem>>>, KError> {
        self.matrices
            .iter()
            .enumerate()
            .map(|(i, g)| matrix_inverse_oracle(&self.ring, g).map_err(|_| KError::NotInvertible(i)))
            .collect()
    }
}

/// The common order making every `g_j g_i^{-1}` (`j > i`) 1-triangular (±1 in plus-minus mode).
pub fn volodin_check(v: &VolodinPath) -> Result<Poset, KError> {
    let ring = &v.ring;
    let inv = v.inverses()?;
    let mut constraints = Vec::new();
    for j in 0..v.matrices.len() {
        for i in 0..j {
            let q = matrix_mul(ring, &v.matrices[j], &inv[i]);
            for (r, row) in q.iter().enumerate() {
                let d = &row[r];
                let allowed = match v.mode {
                    SignMode::One => ring.is_one(d),
                    SignMode::PlusMinus => ring.is_one(d) || ring.is_one(&ring.neg(d)),
                };
                if ring.is_zero(d) {
                    return Err(KError::NoOrderExists(vec![basis_label(r)]));
                }
                if !allowed {
                    return Err(KError::DiagonalNotOne { pair: (i, j), index: r, value: ring.format(d) });
                }
                for (c, x) in row.iter().enumerate() {
                    if c != r && !ring.is_zero(x) {
                        constraints.push((basis_label(c), basis_label(r)));
                    }
                }
            }
        }
    }
    find_common_order((0..v.k).map(basis_label), &constraints).map_err(|e| match e {
        PosetError::NoOrderExists(c) | PosetError::CycleDetected(c) => KError::NoOrderExists(c),
        other => KError::Poset(other),
    })
}

fn dense(ring: &Ring, k: usize, m: &[Vec<Elem>]) -> Result<Morphism, KError> {
    let labels: Vec<Label> = (0..k).map(basis_label).collect();
    let b = BasedModule::new(ring, labels)?;
    Ok(Morphism::from_dense(&b, &b, m)?)
}

/// Two-degree complexes with boundary `g_i`, contraction `g_i^{-1}`, and chain maps
/// `(1, g_j g_i^{-1})`; the Volodin order certifies both degrees.
pub fn volodin_to_k1(v: &VolodinPath) -> Result<K1SimplexData, KError> {
    let order = volodin_check(v)?;
    let ring = &v.ring;
    let inv = v.inverses()?;
    let module = BasedModule::new(ring, (0..v.k).map(basis_label))?;
    let mut complexes = Vec::new();
    let mut contractions = Vec::new();
    for (g, gi) in v.matrices.iter().zip(&inv) {
        let c = ChainComplex::new(
            ring,
            BTreeMap::from([(0, module.clone()), (1, module.clone())]),
            BTreeMap::from([(1, dense(ring, v.k, g)?)]),
        )?;
        let x = Contraction::new(&c, BTreeMap::from([(0, dense(ring, v.k, gi)?)]))?;
        complexes.push(c);
        contractions.push(x);
    }
    let mut maps = BTreeMap::new();
    for j in 0..v.matrices.len() {
        for i in 0..j {
            let q = matrix_mul(ring, &v.matrices[j], &inv[i]);
            maps.insert((i, j), BTreeMap::from([(1, Morphism::identity(&module)), (0, dense(ring, v.k, &q)?)]));
        }
    }
    let per = BTreeMap::from([(0, order.clone()), (1, order)]);
    Ok(K1SimplexData {
        ring: ring.clone(),
        orders: vec![per; complexes.len()],
        complexes,
        contractions,
        maps,
        control: None,
    })
}

pub fn stab_label(i: usize) -> Label {
    format!("stab:{i}")
}

/// Stabilize a two-degree 1-simplex `f: B -> C` by `φ: R^ℓ -> C¹` onto the complement
/// of the image of `f¹`: the 2-simplex `B -> B ⊕ 1_{R^ℓ} -> C`.
pub fn stabilize_morphism(s: &K1SimplexData, phi: &Morphism) -> Result<K1SimplexData, KError> {
    if s.complexes.len() != 2 || s.complexes.iter().any(|c| !c.is_two_degree()) {
        return Err(KError::InvalidInput("expected a two-degree 1-simplex".into()));
    }
    let ring = &s.ring;
    let (b, c) = (&s.complexes[0], &s.complexes[1]);
    let f1 = s.map(0, 1, 1);
    let f0 = s.map(0, 1, 0);
    let p1 = s.order(1, 1);
    let bf1 = decompose_triangular(&f1, &p1, Some(&s.order(0, 1)), UnitKind::PlusMinusOne)?.base_function;
    let image: BTreeSet<Label> = bf1.values().cloned().collect();
    let complement: BTreeSet<Label> = c.module(1).basis_set().difference(&image).cloned().collect();
    let l = phi.source().rank();
    if l != complement.len() {
        return Err(KError::WrongComplementRank { expected: complement.len(), got: l });
    }
    let phi_base = is_u_diagonal(phi, UnitKind::PlusMinusOne)?;
    let hit: BTreeSet<Label> = phi_base.values().cloned().collect();
    if phi_base.len() != l || hit != complement {
        return Err(KError::InvalidInput("φ is not a based isomorphism onto the complement".into()));
    }
    // R^ℓ relabeled to stab:k in both degrees
    let rename: BTreeMap<Label, Label> =
        phi.source().basis().iter().enumerate().map(|(k, x)| (x.clone(), stab_label(k))).collect();
    let r = |x: &Label| rename.get(x).cloned().unwrap_or_else(|| x.clone());
    let stab = BasedModule::new(ring, (0..l).map(stab_label))?;
    let phi = phi.relabel(r, |x| x.clone());
    let one = Morphism::identity(&stab);
    let stab_cx = ChainComplex::new(ring, BTreeMap::from([(0, stab.clone()), (1, stab.clone())]), BTreeMap::from([(1, one.clone())]))?;
    let stab_x = Contraction::new(&stab_cx, BTreeMap::from([(0, one)]))?;
    let (mid, mid_x) = direct_sum(b, &s.contractions[0], &stab_cx, &stab_x)?;
    let m1 = mid.module(1);
    let m0 = mid.module(0);
    let fhat1 = f1.embed(&m1, &c.module(1))?.add(&phi.embed(&m1, &c.module(1))?)?;
    let cphi = c.c(1).after(&phi)?;
    let fhat0 = f0.embed(&m0, &c.module(0))?.add(&cphi.embed(&m0, &c.module(0))?)?;
    let incl1 = Morphism::identity(&b.module(1)).embed(&b.module(1), &m1)?;
    let incl0 = Morphism::identity(&b.module(0)).embed(&b.module(0), &m0)?;
    // degree 1: pull back the order of C¹ along the basis function of f̂¹
    let h1 = decompose_triangular(&fhat1, &p1, None, UnitKind::PlusMinusOne)?.base_function;
    let mut pairs1 = Vec::new();
    for (x, hx) in &h1 {
        for (y, hy) in &h1 {
            if p1.lt(hx, hy) {
                pairs1.push((x.clone(), y.clone()));
            }
        }
    }
    let o1 = find_common_order(m1.basis().iter().cloned(), &pairs1)?;
    // degree 0: B⁰'s order, R^ℓ before B⁰, and R^ℓ pulled back along cφ
    let p0 = s.order(1, 0);
    let pb0 = s.order(0, 0);
    let mut pairs0 = pb0.pairs();
    for k in 0..l {
        for x in b.module(0).basis() {
            pairs0.push((stab_label(k), x.clone()));
        }
    }
    let hc = decompose_triangular(&cphi, &p0, None, UnitKind::PlusMinusOne)?.base_function;
    for (x, hx) in &hc {
        for (y, hy) in &hc {
            if p0.lt(hx, hy) {
                pairs0.push((x.clone(), y.clone()));
            }
        }
    }
    let o0 = find_common_order(m0.basis().iter().cloned(), &pairs0)?;
    let mut maps = BTreeMap::new();
    maps.insert((0, 1), BTreeMap::from([(1, incl1), (0, incl0)]));
    maps.insert((1, 2), BTreeMap::from([(1, fhat1), (0, fhat0)]));
    maps.insert((0, 2), BTreeMap::from([(1, f1), (0, f0)]));
    let out = K1SimplexData {
        ring: ring.clone(),
        complexes: vec![b.clone(), mid, c.clone()],
        contractions: vec![s.contractions[0].clone(), mid_x, s.contractions[1].clone()],
        maps,
        orders: vec![s.orders[0].clone(), BTreeMap::from([(0, o0), (1, o1)]), s.orders[1].clone()],
        control: None,
    };
    let rep = validate_k1_simplex(&out)?;
    if !rep.ok() {
        return Err(KError::InvalidInput(format!("stabilization is not a 2-simplex: {:?}", rep.failures())));
    }
    Ok(out)
}

fn diag_of(ring: &Ring, m: &[Vec<Elem>]) -> Vec<Vec<Elem>> {
    let k = m.len();
    let mut out = vec![vec![ring.zero(); k]; k];
    for i in 0..k {
        out[i][i] = m[i][i].clone();
    }
    out
}

/// `ε_0 = 1`, `ε_i = diag(g_i g_{i-1}^{-1} ε_{i-1}^{-1})`; output `(ε_i g_i)` in mode one,
/// with a trailing identity when `ε_n ≠ 1`.
pub fn fix_signs(v: &VolodinPath, require_loop: bool) -> Result<VolodinPath, KError> {
    let ring = &v.ring;
    let id = identity_matrix(ring, v.k);
    if require_loop && (v.matrices.first() != Some(&id) || v.matrices.last() != Some(&id)) {
        return Err(KError::NotALoop);
    }
    let pm = VolodinPath { mode: SignMode::PlusMinus, ..v.clone() };
    volodin_check(&pm)?;
    let inv = v.inverses()?;
    let mut eps = vec![id.clone()];
    for i in 1..v.matrices.len() {
        let prev = &eps[i - 1];
        let prev_inv = matrix_inverse_oracle(ring, prev)?;
        let q = matrix_mul(ring, &matrix_mul(ring, &v.matrices[i], &inv[i - 1]), &prev_inv);
        let d = diag_of(ring, &q);
        for (r, row) in d.iter().enumerate() {
            let x = &row[r];
            if !(ring.is_one(x) || ring.is_one(&ring.neg(x))) {
                return Err(KError::DiagonalNotOne { pair: (i - 1, i), index: r, value: ring.format(x) });
            }
        }
        eps.push(d);
    }
    let mut matrices: Vec<Vec<Vec<Elem>>> =
        v.matrices.iter().zip(&eps).map(|(g, e)| matrix_mul(ring, e, g)).collect();
    if eps.last().is_some_and(|e| *e != id) {
        matrices.push(id);
    }
    let out = VolodinPath { ring: ring.clone(), k: v.k, matrices, mode: SignMode::One };
    volodin_check(&out)?;
    Ok(out)
}
