//! Bounded chain complexes with contractions: suspension, cones, cancellation,
//! standardization and two-degree folding.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::morphisms::{decompose_triangular, BasedModule, MorphError, Morphism};
use crate::posets::Poset;
use crate::rings::{Ring, UnitKind};
use crate::Label;

/// Largest supported degree.
pub const MAX_DEGREE: i64 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("not a chain map in degree {0}")]
    NotAChainMap(i64),
    #[error("no cancellation: {0}")]
    NoCancellation(String),
    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),
    #[error("not strictly contractible: {0}")]
    NotStrictContractible(String),
    #[error("ring mismatch")]
    RingMismatch,
    #[error("degree {0} out of range")]
    DegreeOutOfRange(i64),
    #[error("structure map in degree {0} does not fit the modules")]
    Shape(i64),
    #[error(transparent)]
    Morph(#[from] MorphError),
}

/// A bounded complex; `boundary[i]` maps degree `i` to degree `i - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainComplex {
    pub ring: Ring,
    modules: BTreeMap<i64, BasedModule>,
    boundary: BTreeMap<i64, Morphism>,
}

/// Degree +1 maps `maps[i]: C^i -> C^{i+1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contraction {
    maps: BTreeMap<i64, Morphism>,
}

/// Per-degree maps of a chain map.
pub type ChainMap = BTreeMap<i64, Morphism>;

fn fits(m: &Morphism, s: &BasedModule, t: &BasedModule) -> bool {
    m.source().basis_set() == s.basis_set() && m.target().basis_set() == t.basis_set()
}

impl ChainComplex {
    pub fn new(
        ring: &Ring,
        modules: BTreeMap<i64, BasedModule>,
        boundary: BTreeMap<i64, Morphism>,
    ) -> Result<Self, ChainError> {
        for (d, m) in &modules {
            if d.abs() > MAX_DEGREE {
                return Err(ChainError::DegreeOutOfRange(*d));
            }
            if &m.ring != ring {
                return Err(ChainError::RingMismatch);
            }
        }
        let modules: BTreeMap<i64, BasedModule> = modules.into_iter().filter(|(_, m)| m.rank() > 0).collect();
        let mut c = ChainComplex { ring: ring.clone(), modules, boundary: BTreeMap::new() };
        for (d, b) in boundary {
            if !fits(&b, &c.module(d), &c.module(d - 1)) {
                return Err(ChainError::Shape(d));
            }
            if !b.is_zero() {
                c.boundary.insert(d, b);
            }
        }
        Ok(c)
    }

    pub fn zero(ring: &Ring) -> Self {
        ChainComplex { ring: ring.clone(), modules: BTreeMap::new(), boundary: BTreeMap::new() }
    }

    pub fn module(&self, d: i64) -> BasedModule {
        self.modules.get(&d).cloned().unwrap_or_else(|| BasedModule::zero(&self.ring))
    }

    pub fn modules(&self) -> &BTreeMap<i64, BasedModule> {
        &self.modules
    }

    /// Degrees carrying a nonzero module.
    pub fn degrees(&self) -> Vec<i64> {
        self.modules.keys().copied().collect()
    }

    /// `c: C^d -> C^{d-1}` (zero when absent).
    pub fn c(&self, d: i64) -> Morphism {
        self.boundary
            .get(&d)
            .cloned()
            .unwrap_or_else(|| Morphism::zero(&self.module(d), &self.module(d - 1)))
    }

    pub fn boundaries(&self) -> &BTreeMap<i64, Morphism> {
        &self.boundary
    }

    pub fn is_two_degree(&self) -> bool {
        self.modules.keys().all(|d| *d == 0 || *d == 1)
    }

    /// Based subcomplex on the given labels per degree (not checked for closure).
    pub fn restrict(&self, keep: &BTreeMap<i64, BTreeSet<Label>>) -> Result<ChainComplex, ChainError> {
        let empty = BTreeSet::new();
        let get = |d: i64| keep.get(&d).unwrap_or(&empty);
        let mut modules = BTreeMap::new();
        for (d, m) in &self.modules {
            modules.insert(*d, m.sub(get(*d))?);
        }
        let mut boundary = BTreeMap::new();
        for (d, b) in &self.boundary {
            boundary.insert(*d, b.block(get(d - 1), get(*d))?);
        }
        ChainComplex::new(&self.ring, modules, boundary)
    }

    pub fn relabel(&self, f: impl Fn(&Label) -> Label) -> ChainComplex {
        ChainComplex {
            ring: self.ring.clone(),
            modules: self.modules.iter().map(|(d, m)| (*d, m.relabel(&f))).collect(),
            boundary: self.boundary.iter().map(|(d, b)| (*d, b.relabel(&f, &f))).collect(),
        }
    }
}

impl Contraction {
    pub fn new(c: &ChainComplex, maps: BTreeMap<i64, Morphism>) -> Result<Self, ChainError> {
        let mut out = BTreeMap::new();
        for (d, m) in maps {
            if !fits(&m, &c.module(d), &c.module(d + 1)) {
                return Err(ChainError::Shape(d));
            }
            if !m.is_zero() {
                out.insert(d, m);
            }
        }
        Ok(Contraction { maps: out })
    }

    pub fn zero() -> Self {
        Contraction { maps: BTreeMap::new() }
    }

    /// `ξ: C^d -> C^{d+1}` (zero when absent).
    pub fn at(&self, c: &ChainComplex, d: i64) -> Morphism {
        self.maps
            .get(&d)
            .cloned()
            .unwrap_or_else(|| Morphism::zero(&c.module(d), &c.module(d + 1)))
    }

    pub fn maps(&self) -> &BTreeMap<i64, Morphism> {
        &self.maps
    }

    pub fn restrict(&self, c: &ChainComplex, keep: &BTreeMap<i64, BTreeSet<Label>>) -> Result<Contraction, ChainError> {
        let empty = BTreeSet::new();
        let get = |d: i64| keep.get(&d).unwrap_or(&empty);
        let mut maps = BTreeMap::new();
        for (d, m) in &self.maps {
            maps.insert(*d, m.block(get(d + 1), get(*d))?);
        }
        let sub = c.restrict(keep)?;
        Contraction::new(&sub, maps)
    }

    pub fn relabel(&self, f: impl Fn(&Label) -> Label) -> Contraction {
        Contraction { maps: self.maps.iter().map(|(d, m)| (*d, m.relabel(&f, &f))).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ComplexReport {
    /// Degrees `d` with `c_{d-1} c_d ≠ 0`.
    pub c_squared_failures: Vec<i64>,
    /// Degrees `d` with `c ξ + ξ c ≠ 1` on `C^d`.
    pub contraction_failures: Vec<i64>,
    pub contraction_checked: bool,
}

impl ComplexReport {
    pub fn ok(&self) -> bool {
        self.c_squared_failures.is_empty() && self.contraction_failures.is_empty()
    }
}

fn degree_span(c: &ChainComplex) -> Vec<i64> {
    match (c.modules.keys().next(), c.modules.keys().last()) {
        (Some(lo), Some(hi)) => (*lo - 1..=*hi + 1).collect(),
        _ => vec![],
    }
}

/// `c ξ + ξ c` on degree `d`.
pub fn homotopy_sum(c: &ChainComplex, xi: &Contraction, d: i64) -> Result<Morphism, ChainError> {
    let a = c.c(d + 1).after(&xi.at(c, d))?;
    let b = xi.at(c, d - 1).after(&c.c(d))?;
    Ok(a.add(&b)?)
}

pub fn validate_complex(c: &ChainComplex, xi: Option<&Contraction>) -> Result<ComplexReport, ChainError> {
    let mut rep = ComplexReport { contraction_checked: xi.is_some(), ..Default::default() };
    for d in degree_span(c) {
        if !c.c(d - 1).after(&c.c(d))?.is_zero() {
            rep.c_squared_failures.push(d);
        }
        if let Some(xi) = xi {
            if homotopy_sum(c, xi, d)? != Morphism::identity(&c.module(d)) {
                rep.contraction_failures.push(d);
            }
        }
    }
    Ok(rep)
}

fn sign_map(m: &Morphism, flip: bool) -> Morphism {
    if flip {
        m.neg()
    } else {
        m.clone()
    }
}

/// Shift the grading up by `j`; boundary and contraction change sign once per shift.
/// With `truncate`, negative degrees are dropped.
pub fn suspend(
    c: &ChainComplex,
    xi: Option<&Contraction>,
    j: i64,
    truncate: bool,
) -> Result<(ChainComplex, Option<Contraction>), ChainError> {
    let flip = j.rem_euclid(2) == 1;
    let keep = |d: i64| !truncate || d >= 0;
    let modules: BTreeMap<i64, BasedModule> = c
        .modules
        .iter()
        .map(|(d, m)| (d + j, m.clone()))
        .filter(|(d, _)| keep(*d))
        .collect();
    let boundary: BTreeMap<i64, Morphism> = c
        .boundary
        .iter()
        .map(|(d, b)| (d + j, sign_map(b, flip)))
        .filter(|(d, _)| keep(*d) && keep(d - 1))
        .collect();
    let out = ChainComplex::new(&c.ring, modules, boundary)?;
    let xi_out = match xi {
        Some(xi) => {
            let maps = xi
                .maps
                .iter()
                .map(|(d, m)| (d + j, sign_map(m, flip)))
                .filter(|(d, _)| keep(*d) && keep(d + 1))
                .collect();
            Some(Contraction::new(&out, maps)?)
        }
        None => None,
    };
    Ok((out, xi_out))
}

pub fn is_chain_map(f: &ChainMap, c: &ChainComplex, d: &ChainComplex) -> Result<Option<i64>, ChainError> {
    let at = |k: i64| {
        f.get(&k).cloned().unwrap_or_else(|| Morphism::zero(&c.module(k), &d.module(k)))
    };
    let mut span = degree_span(c);
    span.extend(degree_span(d));
    span.sort_unstable();
    span.dedup();
    for k in span {
        let lhs = d.c(k).after(&at(k))?;
        let rhs = at(k - 1).after(&c.c(k))?;
        if lhs != rhs {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

pub fn tag_target(l: &Label) -> Label {
    format!("t:{l}")
}

pub fn tag_source(l: &Label) -> Label {
    format!("s:{l}")
}

/// Cone of `f: C -> D`: modules `D ⊕ SC` with boundary `[[d, f], [0, -c]]`; when every
/// `f^i` is invertible also the contraction `[[0, 0], [f^{-1}, 0]]`.
pub fn mapping_cone(
    f: &ChainMap,
    c: &ChainComplex,
    d: &ChainComplex,
) -> Result<(ChainComplex, Option<Contraction>), ChainError> {
    if c.ring != d.ring {
        return Err(ChainError::RingMismatch);
    }
    if let Some(k) = is_chain_map(f, c, d)? {
        return Err(ChainError::NotAChainMap(k));
    }
    let ring = &c.ring;
    let mut degs: BTreeSet<i64> = d.modules.keys().copied().collect();
    degs.extend(c.modules.keys().map(|k| k + 1));
    let cone_module = |k: i64| -> Result<BasedModule, ChainError> {
        Ok(d.module(k).relabel(tag_target).direct_sum(&c.module(k - 1).relabel(tag_source))?)
    };
    let mut modules = BTreeMap::new();
    for &k in &degs {
        modules.insert(k, cone_module(k)?);
    }
    let fk = |k: i64| f.get(&k).cloned().unwrap_or_else(|| Morphism::zero(&c.module(k), &d.module(k)));
    let mut boundary = BTreeMap::new();
    for &k in &degs {
        let (src, tgt) = (cone_module(k)?, cone_module(k - 1)?);
        let parts = [
            d.c(k).relabel(tag_target, tag_target),
            fk(k - 1).relabel(tag_source, tag_target),
            c.c(k - 1).neg().relabel(tag_source, tag_source),
        ];
        let mut b = Morphism::zero(&src, &tgt);
        for p in parts {
            b = b.add(&p.embed(&src, &tgt)?)?;
        }
        boundary.insert(k, b);
    }
    let cone = ChainComplex::new(ring, modules, boundary)?;
    let mut maps = BTreeMap::new();
    for &k in &degs {
        let fkk = fk(k);
        if fkk.source().rank() == 0 && fkk.target().rank() == 0 {
            continue;
        }
        let Ok(inv) = fkk.try_inverse() else {
            return Ok((cone, None));
        };
        let (src, tgt) = (cone.module(k), cone.module(k + 1));
        maps.insert(k, inv.relabel(tag_target, tag_source).embed(&src, &tgt)?);
    }
    let xi = Contraction::new(&cone, maps)?;
    Ok((cone, Some(xi)))
}

/// `Ĉ ⊕ D ⊕ D̄` splitting with `δ: D̄^i -> D^{i+1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CancellationDecomposition {
    pub kept: BTreeMap<i64, BTreeSet<Label>>,
    pub upper: BTreeMap<i64, BTreeSet<Label>>,
    pub lower: BTreeMap<i64, BTreeSet<Label>>,
    pub delta: BTreeMap<i64, Morphism>,
}

fn get_set(m: &BTreeMap<i64, BTreeSet<Label>>, d: i64) -> BTreeSet<Label> {
    m.get(&d).cloned().unwrap_or_default()
}

/// Check that `kept` spans a based subcomplex.
pub fn is_subcomplex(c: &ChainComplex, kept: &BTreeMap<i64, BTreeSet<Label>>) -> Option<i64> {
    for (d, b) in c.boundaries() {
        let src = get_set(kept, *d);
        let tgt = get_set(kept, d - 1);
        if b.entries().keys().any(|(r, col)| src.contains(col) && !tgt.contains(r)) {
            return Some(*d);
        }
    }
    None
}

/// Finds the unique `(D, D̄, δ)` for which `ξ` cancels the complement of `kept`.
/// `orders` gives the certified order on each degree; `unit` is the subgroup for `δ`.
pub fn find_cancellation(
    c: &ChainComplex,
    xi: &Contraction,
    kept: &BTreeMap<i64, BTreeSet<Label>>,
    orders: &BTreeMap<i64, Poset>,
    unit: UnitKind,
) -> Result<CancellationDecomposition, ChainError> {
    let fail = |s: String| Err(ChainError::NoCancellation(s));
    for (d, k) in kept {
        if let Some(x) = k.iter().find(|x| !c.module(*d).contains(x)) {
            return fail(format!("{x:?} is not a basis element in degree {d}"));
        }
    }
    if let Some(d) = is_subcomplex(c, kept) {
        return fail(format!("kept part is not a subcomplex in degree {d}"));
    }
    let empty = Poset::default();
    let mut comp: BTreeMap<i64, BTreeSet<Label>> = BTreeMap::new();
    for (d, m) in c.modules() {
        let k = get_set(kept, *d);
        let rest: BTreeSet<Label> = m.basis_set().difference(&k).cloned().collect();
        let p = orders.get(d).unwrap_or(&empty);
        for a in &k {
            if let Some(b) = rest.iter().find(|b| p.lt(a, b)) {
                return fail(format!("kept {a:?} precedes complement {b:?} in degree {d}"));
            }
        }
        comp.insert(*d, rest);
    }
    let mut upper: BTreeMap<i64, BTreeSet<Label>> = BTreeMap::new();
    for (d, m) in xi.maps() {
        let src = get_set(&comp, *d);
        let tgt = get_set(&comp, d + 1);
        for (r, col) in m.entries().keys() {
            if src.contains(col) && tgt.contains(r) {
                upper.entry(d + 1).or_default().insert(r.clone());
            }
        }
    }
    let mut lower = BTreeMap::new();
    for (d, rest) in &comp {
        let up = get_set(&upper, *d);
        let low: BTreeSet<Label> = rest.difference(&up).cloned().collect();
        if !low.is_empty() {
            lower.insert(*d, low);
        }
    }
    let mut delta = BTreeMap::new();
    for d in c.degrees().into_iter().chain(upper.keys().map(|k| k - 1)).collect::<BTreeSet<_>>() {
        let m = xi.at(c, d);
        let (k0, u0, l0) = (get_set(kept, d), get_set(&upper, d), get_set(&lower, d));
        let (u1, l1) = (get_set(&upper, d + 1), get_set(&lower, d + 1));
        for (r, col) in m.entries().keys() {
            let bad = (k0.contains(col) && !get_set(kept, d + 1).contains(r))
                || (u0.contains(col) && (u1.contains(r) || l1.contains(r)))
                || (l0.contains(col) && l1.contains(r));
            if bad {
                return fail(format!("contraction entry ({r:?} <- {col:?}) in degree {d} breaks the block form"));
            }
        }
        if l0.is_empty() && u1.is_empty() {
            continue;
        }
        let dm = m.block(&u1, &l0)?;
        let pt = orders.get(&(d + 1)).unwrap_or(&empty).restrict(&u1);
        let ps = orders.get(&d).unwrap_or(&empty).restrict(&l0);
        let dec = decompose_triangular(&dm, &pt, Some(&ps), unit)
            .map_err(|e| ChainError::NoCancellation(format!("delta in degree {d}: {e}")))?;
        if dec.base_function.len() != l0.len() || l0.len() != u1.len() {
            return fail(format!("delta in degree {d} is not an isomorphism"));
        }
        delta.insert(d, dm);
    }
    Ok(CancellationDecomposition { kept: kept.clone(), upper, lower, delta })
}

/// Output of [`standardize_cancellation`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Standardization {
    pub f: ChainMap,
    pub b: ChainComplex,
    pub beta: Contraction,
}

/// `f = (1 - p) + c q ξ p` with `p` projecting to `D̄` and `q` to `D`; `b = f^{-1} c f`,
/// `β = f^{-1} ξ f`. Verifies `f b = c f`, `f β = ξ f` and the block form of `b`.
pub fn standardize_cancellation(
    c: &ChainComplex,
    xi: &Contraction,
    dec: &CancellationDecomposition,
) -> Result<Standardization, ChainError> {
    let bad = |s: String| ChainError::InvalidDecomposition(s);
    let mut f: ChainMap = BTreeMap::new();
    let mut finv: ChainMap = BTreeMap::new();
    for d in c.degrees() {
        let m = c.module(d);
        let one = Morphism::identity(&m);
        let p = Morphism::projection(&m, &get_set(&dec.lower, d));
        let q = Morphism::projection(&c.module(d + 1), &get_set(&dec.upper, d + 1));
        let extra = c.c(d + 1).after(&q.after(&xi.at(c, d).after(&p)?)?)?;
        let fd = one.sub(&p)?.add(&extra)?;
        let off = fd.sub(&one)?;
        if !off.after(&off)?.is_zero() {
            return Err(bad(format!("off-diagonal part of f is not square-zero in degree {d}")));
        }
        finv.insert(d, one.sub(&off)?);
        f.insert(d, fd);
    }
    let at = |m: &ChainMap, d: i64| m.get(&d).cloned().unwrap_or_else(|| Morphism::identity(&c.module(d)));
    let mut boundary = BTreeMap::new();
    for d in c.degrees() {
        boundary.insert(d, at(&finv, d - 1).after(&c.c(d).after(&at(&f, d))?)?);
    }
    let b = ChainComplex::new(&c.ring, c.modules.clone(), boundary)?;
    let mut maps = BTreeMap::new();
    for d in c.degrees() {
        maps.insert(d, at(&finv, d + 1).after(&xi.at(c, d).after(&at(&f, d))?)?);
    }
    let beta = Contraction::new(&b, maps)?;
    for d in degree_span(c) {
        if at(&f, d - 1).after(&b.c(d))? != c.c(d).after(&at(&f, d))? {
            return Err(bad(format!("f b ≠ c f in degree {d}")));
        }
        if at(&f, d + 1).after(&beta.at(&b, d))? != xi.at(c, d).after(&at(&f, d))? {
            return Err(bad(format!("f β ≠ ξ f in degree {d}")));
        }
        // b = ĉ ⊕ (δ^{-1}: D -> D̄) ⊕ 0
        let bd = b.c(d);
        let (k0, k1) = (get_set(&dec.kept, d), get_set(&dec.kept, d - 1));
        let (u0, l1) = (get_set(&dec.upper, d), get_set(&dec.lower, d - 1));
        for (r, col) in bd.entries().keys() {
            let allowed = (k0.contains(col) && k1.contains(r)) || (u0.contains(col) && l1.contains(r));
            if !allowed {
                return Err(bad(format!("standardized boundary has entry ({r:?} <- {col:?}) in degree {d}")));
            }
        }
        if let Some(delta) = dec.delta.get(&(d - 1)) {
            let blk = bd.block(&l1, &u0)?;
            if blk.after(delta)? != Morphism::identity(delta.source()) {
                return Err(bad(format!("standardized boundary block is not δ^(-1) in degree {d}")));
            }
        }
        // β = [[ξ̂, u, -ĉuδ], [0, 0, δ], [0, 0, 0]]
        if let Some(delta) = dec.delta.get(&d) {
            let (k1, k2) = (get_set(&dec.kept, d + 1), get_set(&dec.kept, d + 2));
            let (ld, ud1) = (get_set(&dec.lower, d), get_set(&dec.upper, d + 1));
            let u = beta.at(&b, d + 1).block(&k2, &ud1)?;
            let chat = b.c(d + 2).block(&k1, &k2)?;
            let want = chat.after(&u.after(delta)?)?.neg();
            let bt = beta.at(&b, d);
            if bt.block(&k1, &ld)? != want || bt.block(&ud1, &ld)? != *delta {
                return Err(bad(format!("standardized contraction has the wrong lower column in degree {d}")));
            }
        }
    }
    Ok(Standardization { f, b, beta })
}

/// Remove the `u` block of a standardized contraction with the degree-2 homotopy
/// `a = u δ` placed in the (Ĉ, D̄) corner.
pub fn improve_contraction(
    s: &Standardization,
    dec: &CancellationDecomposition,
) -> Result<Contraction, ChainError> {
    let b = &s.b;
    let mut h = BTreeMap::new();
    for (d, delta) in &dec.delta {
        let (k2, u1) = (get_set(&dec.kept, d + 2), get_set(&dec.upper, d + 1));
        let u = s.beta.at(b, d + 1).block(&k2, &u1)?;
        let a = u.after(delta)?;
        h.insert(*d, a.embed(&b.module(*d), &b.module(d + 2))?);
    }
    modify_contraction(b, &s.beta, &h)
}

/// Modify a contraction by a degree-2 map: `β + b h - h b` (still a contraction).
pub fn modify_contraction(
    c: &ChainComplex,
    beta: &Contraction,
    h: &BTreeMap<i64, Morphism>,
) -> Result<Contraction, ChainError> {
    let hz = |d: i64| h.get(&d).cloned().unwrap_or_else(|| Morphism::zero(&c.module(d), &c.module(d + 2)));
    let mut maps = BTreeMap::new();
    for d in degree_span(c) {
        let v = beta
            .at(c, d)
            .add(&c.c(d + 2).after(&hz(d))?)?
            .sub(&hz(d - 1).after(&c.c(d))?)?;
        maps.insert(d, v);
    }
    Contraction::new(c, maps)
}

pub fn fold_label(l: &Label, d: i64) -> Label {
    format!("{l}@{d}")
}

/// Collapse a strict contractible complex to degrees 0 and 1 with boundary
/// `c - ξcξ` (odd to even) and contraction `ξcξ - cξc` (even to odd).
pub fn fold_two_degrees(c: &ChainComplex, xi: &Contraction) -> Result<(ChainComplex, Contraction), ChainError> {
    let rep = validate_complex(c, Some(xi))?;
    if !rep.ok() {
        return Err(ChainError::NotStrictContractible(format!(
            "c^2 fails in {:?}, contraction fails in {:?}",
            rep.c_squared_failures, rep.contraction_failures
        )));
    }
    if c.is_two_degree() {
        return Ok((c.clone(), xi.clone()));
    }
    let ring = &c.ring;
    let tagged = |d: i64| c.module(d).relabel(|l| fold_label(l, d));
    let mut even = BasedModule::zero(ring);
    let mut odd = BasedModule::zero(ring);
    for &d in c.modules.keys() {
        if d.rem_euclid(2) == 0 {
            even = even.direct_sum(&tagged(d))?;
        } else {
            odd = odd.direct_sum(&tagged(d))?;
        }
    }
    let tag = |m: &Morphism, s: i64, t: i64| m.relabel(|l| fold_label(l, s), |l| fold_label(l, t));
    let mut bnd = Morphism::zero(&odd, &even);
    let mut con = Morphism::zero(&even, &odd);
    for &d in c.modules.keys() {
        let xd = xi.at(c, d);
        let xcx = xd.after(&c.c(d + 1).after(&xd)?)?;
        if d.rem_euclid(2) == 1 {
            bnd = bnd.add(&tag(&c.c(d), d, d - 1).embed(&odd, &even)?)?;
            bnd = bnd.sub(&tag(&xcx, d, d + 1).embed(&odd, &even)?)?;
        } else {
            let cxc = c.c(d).after(&xi.at(c, d - 1).after(&c.c(d))?)?;
            con = con.add(&tag(&xcx, d, d + 1).embed(&even, &odd)?)?;
            con = con.sub(&tag(&cxc, d, d - 1).embed(&even, &odd)?)?;
        }
    }
    let out = ChainComplex::new(ring, BTreeMap::from([(0, even.clone()), (1, odd.clone())]), BTreeMap::from([(1, bnd)]))?;
    let xi_out = Contraction::new(&out, BTreeMap::from([(0, con)]))?;
    Ok((out, xi_out))
}

/// Blockwise sum of two complexes with contractions; labels must be disjoint per degree.
pub fn direct_sum(
    a: &ChainComplex,
    xa: &Contraction,
    b: &ChainComplex,
    xb: &Contraction,
) -> Result<(ChainComplex, Contraction), ChainError> {
    if a.ring != b.ring {
        return Err(ChainError::RingMismatch);
    }
    let degs: BTreeSet<i64> = a.modules.keys().chain(b.modules.keys()).copied().collect();
    let mut modules = BTreeMap::new();
    for &d in &degs {
        modules.insert(d, a.module(d).direct_sum(&b.module(d))?);
    }
    let get = |d: i64| modules.get(&d).cloned().unwrap_or_else(|| BasedModule::zero(&a.ring));
    let mut boundary = BTreeMap::new();
    let mut maps = BTreeMap::new();
    for &d in &degs {
        let (s, t) = (get(d), get(d - 1));
        boundary.insert(d, a.c(d).embed(&s, &t)?.add(&b.c(d).embed(&s, &t)?)?);
        let t1 = get(d + 1);
        maps.insert(d, xa.at(a, d).embed(&s, &t1)?.add(&xb.at(b, d).embed(&s, &t1)?)?);
    }
    let sum = ChainComplex::new(&a.ring, modules, boundary)?;
    let xi = Contraction::new(&sum, maps)?;
    Ok((sum, xi))
}

/// `R` in degrees 1 and 0 with boundary 1 and contraction 1 (the cone of the identity).
pub fn elementary_complex(ring: &Ring, upper: &str, lower: &str) -> (ChainComplex, Contraction) {
    let m1 = BasedModule::from_strs(ring, &[upper]);
    let m0 = BasedModule::from_strs(ring, &[lower]);
    let c = Morphism::new(&m1, &m0, [((lower.to_string(), upper.to_string()), ring.one())]).expect("labels");
    let x = Morphism::new(&m0, &m1, [((upper.to_string(), lower.to_string()), ring.one())]).expect("labels");
    let cc = ChainComplex::new(ring, BTreeMap::from([(0, m0), (1, m1)]), BTreeMap::from([(1, c)])).expect("shape");
    let xi = Contraction::new(&cc, BTreeMap::from([(0, x)])).expect("shape");
    (cc, xi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring_r(ring: &Ring, deg: i64, l: &str) -> ChainComplex {
        ChainComplex::new(ring, BTreeMap::from([(deg, BasedModule::from_strs(ring, &[l]))]), BTreeMap::new()).unwrap()
    }

    fn scalar(ring: &Ring, s: &BasedModule, t: &BasedModule, v: i64) -> Morphism {
        Morphism::new(s, t, [((t.basis()[0].clone(), s.basis()[0].clone()), ring.from_int(v))]).unwrap()
    }

    #[test]
    fn zero_and_elementary_complexes() {
        let z = Ring::Z;
        assert!(validate_complex(&ChainComplex::zero(&z), Some(&Contraction::zero())).unwrap().ok());
        let (c, xi) = elementary_complex(&z, "x", "y");
        assert!(validate_complex(&c, Some(&xi)).unwrap().ok());
    }

    #[test]
    fn c_squared_failure_names_degree() {
        let z = Ring::Z;
        let m = |l: &str| BasedModule::from_strs(&z, &[l]);
        let c = ChainComplex::new(
            &z,
            BTreeMap::from([(0, m("a")), (1, m("b")), (2, m("c"))]),
            BTreeMap::from([(1, scalar(&z, &m("b"), &m("a"), 1)), (2, scalar(&z, &m("c"), &m("b"), 1))]),
        )
        .unwrap();
        let rep = validate_complex(&c, None).unwrap();
        assert_eq!(rep.c_squared_failures, vec![2]);
    }

    #[test]
    fn suspension_signs() {
        let z = Ring::Z;
        let (c, xi) = elementary_complex(&z, "x", "y");
        let (s0, _) = suspend(&c, Some(&xi), 0, false).unwrap();
        assert_eq!(s0, c);
        let (s1, x1) = suspend(&c, Some(&xi), 1, false).unwrap();
        assert_eq!(s1.c(2), c.c(1).neg());
        assert_eq!(x1.unwrap().at(&s1, 1), xi.at(&c, 0).neg());
        let (s2, _) = suspend(&s1, None, 1, false).unwrap();
        assert_eq!(s2.c(3), c.c(1));
        let (t, _) = suspend(&c, None, -1, true).unwrap();
        assert_eq!(t.degrees(), vec![0]);
    }

    #[test]
    fn cone_examples() {
        let z = Ring::Z;
        let c = ring_r(&z, 0, "x");
        let id = BTreeMap::from([(0, Morphism::identity(&c.module(0)))]);
        let (cone, xi) = mapping_cone(&id, &c, &c).unwrap();
        let xi = xi.unwrap();
        assert_eq!(cone.degrees(), vec![0, 1]);
        assert!(validate_complex(&cone, Some(&xi)).unwrap().ok());

        let r = Ring::Zmod(5);
        let c = ring_r(&r, 0, "x");
        let two = BTreeMap::from([(0, scalar(&r, &c.module(0), &c.module(0), 2))]);
        let (cone, xi) = mapping_cone(&two, &c, &c).unwrap();
        let xi = xi.unwrap();
        assert_eq!(xi.at(&cone, 0).get("s:x", "t:x"), Some(&r.from_int(3)));
        assert!(validate_complex(&cone, Some(&xi)).unwrap().ok());

        let c = ring_r(&z, 0, "x");
        let two = BTreeMap::from([(0, scalar(&z, &c.module(0), &c.module(0), 2))]);
        let (_, xi) = mapping_cone(&two, &c, &c).unwrap();
        assert!(xi.is_none());
    }

    #[test]
    fn cone_rejects_non_chain_map() {
        let z = Ring::Z;
        let (c, _) = elementary_complex(&z, "x", "y");
        let f = BTreeMap::from([(1, Morphism::identity(&c.module(1)))]);
        assert!(matches!(mapping_cone(&f, &c, &c), Err(ChainError::NotAChainMap(_))));
    }

    /// The three-term example: C² = R, C¹ = R², C⁰ = R.
    pub(crate) fn three_term(ring: &Ring) -> (ChainComplex, Contraction) {
        let m2 = BasedModule::from_strs(ring, &["x"]);
        let m1 = BasedModule::from_strs(ring, &["a", "b"]);
        let m0 = BasedModule::from_strs(ring, &["y"]);
        let one = ring.one();
        let e = |r: &str, c: &str| ((r.to_string(), c.to_string()), one.clone());
        let c2 = Morphism::new(&m2, &m1, [e("a", "x")]).unwrap();
        let c1 = Morphism::new(&m1, &m0, [e("y", "b")]).unwrap();
        let x0 = Morphism::new(&m0, &m1, [e("b", "y")]).unwrap();
        let x1 = Morphism::new(&m1, &m2, [e("x", "a")]).unwrap();
        let c = ChainComplex::new(
            ring,
            BTreeMap::from([(0, m0), (1, m1), (2, m2)]),
            BTreeMap::from([(1, c1), (2, c2)]),
        )
        .unwrap();
        let xi = Contraction::new(&c, BTreeMap::from([(0, x0), (1, x1)])).unwrap();
        (c, xi)
    }

    #[test]
    fn fold_three_term() {
        let z = Ring::Z;
        let (c, xi) = three_term(&z);
        assert!(validate_complex(&c, Some(&xi)).unwrap().ok());
        let (f, fx) = fold_two_degrees(&c, &xi).unwrap();
        let b = f.c(1);
        assert_eq!(b.get("y@0", "b@1"), Some(&z.one()));
        assert_eq!(b.get("x@2", "a@1"), Some(&z.from_int(-1)));
        assert_eq!(b.nnz(), 2);
        let k = fx.at(&f, 0);
        assert_eq!(b.after(&k).unwrap(), Morphism::identity(&f.module(0)));
        assert_eq!(k.after(&b).unwrap(), Morphism::identity(&f.module(1)));
    }

    #[test]
    fn fold_leaves_two_degree_input() {
        let z = Ring::Z;
        let (c, xi) = elementary_complex(&z, "x", "y");
        assert_eq!(fold_two_degrees(&c, &xi).unwrap(), (c, xi));
    }

    #[test]
    fn cancellation_of_cone() {
        let z = Ring::Z;
        let (c, xi) = elementary_complex(&z, "u", "l");
        let all = BTreeMap::from([(0, BTreeSet::from(["l".to_string()])), (1, BTreeSet::from(["u".to_string()]))]);
        let d = find_cancellation(&c, &xi, &all, &BTreeMap::new(), UnitKind::PlusMinusOne).unwrap();
        assert!(d.upper.is_empty() && d.lower.is_empty());
        let d = find_cancellation(&c, &xi, &BTreeMap::new(), &BTreeMap::new(), UnitKind::PlusMinusOne).unwrap();
        assert_eq!(d.upper[&1], BTreeSet::from(["u".to_string()]));
        assert_eq!(d.lower[&0], BTreeSet::from(["l".to_string()]));
        assert_eq!(d.delta[&0].get("u", "l"), Some(&z.one()));
    }

    #[test]
    fn standardize_already_standard_cone() {
        let r = Ring::Zmod(5);
        let c = ring_r(&r, 0, "x");
        let two = BTreeMap::from([(0, scalar(&r, &c.module(0), &c.module(0), 2))]);
        let (cone, xi) = mapping_cone(&two, &c, &c).unwrap();
        let xi = xi.unwrap();
        let dec = find_cancellation(&cone, &xi, &BTreeMap::new(), &BTreeMap::new(), UnitKind::AllUnits).unwrap();
        let s = standardize_cancellation(&cone, &xi, &dec).unwrap();
        for (d, f) in &s.f {
            assert_eq!(*f, Morphism::identity(&cone.module(*d)));
        }
        assert_eq!(s.b, cone);
        assert_eq!(s.beta, xi);
    }

    fn build(ring: &Ring, mods: &[(i64, &[&str])], bnd: &[(i64, &str, &str, i64)], con: &[(i64, &str, &str, i64)]) -> (ChainComplex, Contraction) {
        let modules: BTreeMap<i64, BasedModule> = mods.iter().map(|(d, l)| (*d, BasedModule::from_strs(ring, l))).collect();
        let get = |d: i64| modules.get(&d).cloned().unwrap_or_else(|| BasedModule::zero(ring));
        let mut bm: BTreeMap<i64, Morphism> = BTreeMap::new();
        for (d, r, c, v) in bnd {
            let m = Morphism::new(&get(*d), &get(d - 1), [((r.to_string(), c.to_string()), ring.from_int(*v))]).unwrap();
            let prev = bm.remove(d).unwrap_or_else(|| Morphism::zero(&get(*d), &get(d - 1)));
            bm.insert(*d, prev.add(&m).unwrap());
        }
        let mut xm: BTreeMap<i64, Morphism> = BTreeMap::new();
        for (d, r, c, v) in con {
            let m = Morphism::new(&get(*d), &get(d + 1), [((r.to_string(), c.to_string()), ring.from_int(*v))]).unwrap();
            let prev = xm.remove(d).unwrap_or_else(|| Morphism::zero(&get(*d), &get(d + 1)));
            xm.insert(*d, prev.add(&m).unwrap());
        }
        let cc = ChainComplex::new(ring, modules.clone(), bm).unwrap();
        let xi = Contraction::new(&cc, xm).unwrap();
        (cc, xi)
    }

    fn set(d: &[(i64, &[&str])]) -> BTreeMap<i64, BTreeSet<Label>> {
        d.iter().map(|(k, l)| (*k, l.iter().map(|s| s.to_string()).collect())).collect()
    }

    #[test]
    fn standardize_with_x_block() {
        let z = Ring::Z;
        let (c, xi) = build(
            &z,
            &[(1, &["k1", "u1"]), (0, &["k0", "l0"])],
            &[(1, "k0", "k1", 1), (1, "l0", "u1", 1), (1, "k0", "u1", 1)],
            &[(0, "k1", "k0", 1), (0, "u1", "l0", 1), (0, "k1", "l0", -1)],
        );
        assert!(validate_complex(&c, Some(&xi)).unwrap().ok());
        let kept = set(&[(1, &["k1"]), (0, &["k0"])]);
        let dec = find_cancellation(&c, &xi, &kept, &BTreeMap::new(), UnitKind::PlusMinusOne).unwrap();
        let s = standardize_cancellation(&c, &xi, &dec).unwrap();
        assert_eq!(s.f[&0].get("k0", "l0"), Some(&z.one()));
        assert_eq!(s.b.c(1).get("k0", "u1"), None);
        assert!(validate_complex(&s.b, Some(&s.beta)).unwrap().ok());
        // projection to the kept part is a chain map for b
        let proj: ChainMap = c.degrees().into_iter().map(|d| (d, Morphism::projection(&c.module(d), &kept[&d]))).collect();
        assert_eq!(is_chain_map(&proj, &s.b, &s.b).unwrap(), None);
    }

    #[test]
    fn improvement_clears_u_block() {
        let z = Ring::Z;
        let (c, xi) = build(
            &z,
            &[(2, &["k2"]), (1, &["k1", "u1"]), (0, &["l0"])],
            &[(2, "k1", "k2", 1), (1, "l0", "u1", 1)],
            &[(1, "k2", "k1", 1), (1, "k2", "u1", 1), (0, "u1", "l0", 1), (0, "k1", "l0", -1)],
        );
        assert!(validate_complex(&c, Some(&xi)).unwrap().ok());
        let kept = set(&[(2, &["k2"]), (1, &["k1"])]);
        let dec = find_cancellation(&c, &xi, &kept, &BTreeMap::new(), UnitKind::PlusMinusOne).unwrap();
        let s = standardize_cancellation(&c, &xi, &dec).unwrap();
        let better = improve_contraction(&s, &dec).unwrap();
        assert!(validate_complex(&s.b, Some(&better)).unwrap().ok());
        assert_eq!(better.at(&s.b, 1).get("k2", "u1"), None);
        assert_eq!(better.at(&s.b, 0).get("k1", "l0"), None);
        assert_eq!(better.at(&s.b, 0).get("u1", "l0"), Some(&z.one()));
    }

    #[test]
    fn sum_with_suspension_negates_contraction() {
        let z = Ring::Z;
        let (c, xi) = elementary_complex(&z, "x", "y");
        let (sc, sx) = suspend(&c, Some(&xi), 1, false).unwrap();
        let (sc, sx) = (sc.relabel(|l| format!("{l}'")), sx.unwrap().relabel(|l| format!("{l}'")));
        let (sum, sxi) = direct_sum(&c, &xi, &sc, &sx).unwrap();
        assert!(validate_complex(&sum, Some(&sxi)).unwrap().ok());
        assert_eq!(sxi.at(&sum, 1).get("x'", "y'"), Some(&z.from_int(-1)));
        let (same, _) = direct_sum(&c, &xi, &ChainComplex::zero(&z), &Contraction::zero()).unwrap();
        assert_eq!(same, c);
    }
}
