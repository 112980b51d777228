//! Based free modules and the diagonal/triangular morphism calculus.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::posets::Poset;
use crate::rings::{matrix_inverse_oracle, Elem, Ring, RingError, UnitKind};
use crate::Label;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MorphError {
    #[error("{0:?} is not a sub-basis")]
    NotASubbasis(Label),
    #[error("not diagonal at source label {0:?}")]
    NotDiagonal(Label),
    #[error("coefficient outside the unit subgroup at ({row:?}, {col:?})")]
    CoefficientOutsideU { row: Label, col: Label },
    #[error("not triangular at entry ({row:?} <- {col:?})")]
    NotTriangular { row: Label, col: Label },
    #[error("diagonal part is not invertible: {0}")]
    DiagonalNotInvertible(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("ring mismatch: {0} vs {1}")]
    RingMismatch(String, String),
    #[error("duplicate basis label {0:?}")]
    DuplicateLabel(Label),
    #[error("unknown label {0:?}")]
    UnknownLabel(Label),
    #[error("not invertible: {0}")]
    NotInvertible(String),
    #[error(transparent)]
    Ring(#[from] RingError),
}

/// A free module with a finite labeled basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasedModule {
    pub ring: Ring,
    basis: Vec<Label>,
    set: BTreeSet<Label>,
    location: Option<BTreeMap<Label, Label>>,
}

impl BasedModule {
    pub fn new<I: IntoIterator<Item = Label>>(ring: &Ring, basis: I) -> Result<Self, MorphError> {
        let basis: Vec<Label> = basis.into_iter().collect();
        let mut set = BTreeSet::new();
        for b in &basis {
            if !set.insert(b.clone()) {
                return Err(MorphError::DuplicateLabel(b.clone()));
            }
        }
        Ok(BasedModule { ring: ring.clone(), basis, set, location: None })
    }

    pub fn from_strs(ring: &Ring, basis: &[&str]) -> Self {
        Self::new(ring, basis.iter().map(|s| s.to_string())).expect("distinct labels")
    }

    pub fn zero(ring: &Ring) -> Self {
        Self::new(ring, []).expect("empty basis")
    }

    pub fn with_location(mut self, loc: BTreeMap<Label, Label>) -> Result<Self, MorphError> {
        if let Some(b) = self.basis.iter().find(|b| !loc.contains_key(*b)) {
            return Err(MorphError::UnknownLabel(b.clone()));
        }
        self.location = Some(loc.into_iter().filter(|(k, _)| self.set.contains(k)).collect());
        Ok(self)
    }

    pub fn basis(&self) -> &[Label] {
        &self.basis
    }

    pub fn basis_set(&self) -> &BTreeSet<Label> {
        &self.set
    }

    pub fn location(&self) -> Option<&BTreeMap<Label, Label>> {
        self.location.as_ref()
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn contains(&self, l: &str) -> bool {
        self.set.contains(l)
    }

    /// Submodule on the listed labels, keeping this module's basis order.
    pub fn sub(&self, keep: &BTreeSet<Label>) -> Result<BasedModule, MorphError> {
        if let Some(x) = keep.iter().find(|k| !self.set.contains(*k)) {
            return Err(MorphError::NotASubbasis(x.clone()));
        }
        let mut m = BasedModule::new(&self.ring, self.basis.iter().filter(|b| keep.contains(*b)).cloned())?;
        if let Some(loc) = &self.location {
            m.location = Some(loc.iter().filter(|(k, _)| keep.contains(*k)).map(|(a, b)| (a.clone(), b.clone())).collect());
        }
        Ok(m)
    }

    /// Based direct sum; the label sets must be disjoint.
    pub fn direct_sum(&self, other: &BasedModule) -> Result<BasedModule, MorphError> {
        if self.ring != other.ring {
            return Err(MorphError::RingMismatch(self.ring.name(), other.ring.name()));
        }
        let mut m = BasedModule::new(&self.ring, self.basis.iter().chain(other.basis.iter()).cloned())?;
        if let (Some(a), Some(b)) = (&self.location, &other.location) {
            let mut loc = a.clone();
            loc.extend(b.iter().map(|(k, v)| (k.clone(), v.clone())));
            m.location = Some(loc);
        }
        Ok(m)
    }

    pub fn relabel(&self, f: impl Fn(&Label) -> Label) -> BasedModule {
        let mut m = BasedModule::new(&self.ring, self.basis.iter().map(&f)).expect("relabeling is injective");
        m.location = self.location.as_ref().map(|loc| loc.iter().map(|(k, v)| (f(k), v.clone())).collect());
        m
    }
}

/// `perp(C, D)`: the module on the complementary basis.
pub fn perp(c: &BasedModule, d: &BTreeSet<Label>) -> Result<BasedModule, MorphError> {
    if let Some(x) = d.iter().find(|x| !c.contains(x)) {
        return Err(MorphError::NotASubbasis(x.clone()));
    }
    let rest: BTreeSet<Label> = c.basis_set().difference(d).cloned().collect();
    c.sub(&rest)
}

/// A module map stored sparsely as `(row = target label, col = source label) -> coefficient`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Morphism {
    source: BasedModule,
    target: BasedModule,
    entries: BTreeMap<(Label, Label), Elem>,
}

impl Morphism {
    pub fn new<I>(source: &BasedModule, target: &BasedModule, entries: I) -> Result<Self, MorphError>
    where
        I: IntoIterator<Item = ((Label, Label), Elem)>,
    {
        if source.ring != target.ring {
            return Err(MorphError::RingMismatch(source.ring.name(), target.ring.name()));
        }
        let ring = &source.ring;
        let mut m = Morphism::zero(source, target);
        for ((row, col), v) in entries {
            if !target.contains(&row) {
                return Err(MorphError::UnknownLabel(row));
            }
            if !source.contains(&col) {
                return Err(MorphError::UnknownLabel(col));
            }
            ring.check(&v)?;
            m.add_entry(row, col, &v);
        }
        Ok(m)
    }

    pub fn zero(source: &BasedModule, target: &BasedModule) -> Self {
        Morphism { source: source.clone(), target: target.clone(), entries: BTreeMap::new() }
    }

    pub fn identity(m: &BasedModule) -> Self {
        let one = m.ring.one();
        Morphism {
            source: m.clone(),
            target: m.clone(),
            entries: m.basis.iter().map(|b| ((b.clone(), b.clone()), one.clone())).collect(),
        }
    }

    /// Projection onto the span of `keep` as an endomorphism.
    pub fn projection(m: &BasedModule, keep: &BTreeSet<Label>) -> Self {
        let one = m.ring.one();
        Morphism {
            source: m.clone(),
            target: m.clone(),
            entries: m
                .basis
                .iter()
                .filter(|b| keep.contains(*b))
                .map(|b| ((b.clone(), b.clone()), one.clone()))
                .collect(),
        }
    }

    /// Build from a dense matrix indexed `[row][col]` in basis order.
    pub fn from_dense(source: &BasedModule, target: &BasedModule, m: &[Vec<Elem>]) -> Result<Self, MorphError> {
        if m.len() != target.rank() || m.iter().any(|r| r.len() != source.rank()) {
            return Err(MorphError::ShapeMismatch("dense matrix shape".into()));
        }
        let entries = target.basis.iter().enumerate().flat_map(|(i, y)| {
            source.basis.iter().enumerate().map(move |(j, x)| ((y.clone(), x.clone()), m[i][j].clone()))
        });
        Morphism::new(source, target, entries)
    }

    pub fn to_dense(&self) -> Vec<Vec<Elem>> {
        let ring = self.ring();
        self.target
            .basis
            .iter()
            .map(|y| self.source.basis.iter().map(|x| self.get(y, x).cloned().unwrap_or_else(|| ring.zero())).collect())
            .collect()
    }

    pub fn ring(&self) -> &Ring {
        &self.source.ring
    }

    pub fn source(&self) -> &BasedModule {
        &self.source
    }

    pub fn target(&self) -> &BasedModule {
        &self.target
    }

    pub fn entries(&self) -> &BTreeMap<(Label, Label), Elem> {
        &self.entries
    }

    pub fn get(&self, row: &str, col: &str) -> Option<&Elem> {
        self.entries.get(&(row.to_string(), col.to_string()))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Nonzero entries of the column `col` as `(row, coefficient)`.
    pub fn column(&self, col: &str) -> Vec<(Label, Elem)> {
        self.entries
            .iter()
            .filter(|((_, c), _)| c == col)
            .map(|((r, _), v)| (r.clone(), v.clone()))
            .collect()
    }

    fn columns(&self) -> BTreeMap<&Label, Vec<(&Label, &Elem)>> {
        let mut cols: BTreeMap<&Label, Vec<(&Label, &Elem)>> = BTreeMap::new();
        for ((r, c), v) in &self.entries {
            cols.entry(c).or_default().push((r, v));
        }
        cols
    }

    /// Source labels with a nonzero column.
    pub fn support(&self) -> BTreeSet<Label> {
        self.entries.keys().map(|(_, c)| c.clone()).collect()
    }

    fn add_entry(&mut self, row: Label, col: Label, v: &Elem) {
        let ring = self.source.ring.clone();
        if ring.is_zero(v) {
            return;
        }
        let key = (row, col);
        let nv = match self.entries.get(&key) {
            Some(old) => ring.add(old, v),
            None => v.clone(),
        };
        if ring.is_zero(&nv) {
            self.entries.remove(&key);
        } else {
            self.entries.insert(key, nv);
        }
    }

    fn same_shape(&self, other: &Morphism) -> Result<(), MorphError> {
        if self.source.basis_set() != other.source.basis_set() || self.target.basis_set() != other.target.basis_set() {
            return Err(MorphError::ShapeMismatch("operands have different source or target".into()));
        }
        if self.ring() != other.ring() {
            return Err(MorphError::RingMismatch(self.ring().name(), other.ring().name()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Morphism) -> Result<Morphism, MorphError> {
        self.same_shape(other)?;
        let mut m = self.clone();
        for ((r, c), v) in &other.entries {
            m.add_entry(r.clone(), c.clone(), v);
        }
        Ok(m)
    }

    pub fn neg(&self) -> Morphism {
        let ring = self.ring().clone();
        let mut m = self.clone();
        for v in m.entries.values_mut() {
            *v = ring.neg(v);
        }
        m
    }

    pub fn sub(&self, other: &Morphism) -> Result<Morphism, MorphError> {
        self.add(&other.neg())
    }

    /// Multiply every entry by `r` on the left.
    pub fn scale(&self, r: &Elem) -> Morphism {
        let ring = self.ring().clone();
        let mut m = Morphism::zero(&self.source, &self.target);
        for ((row, col), v) in &self.entries {
            m.add_entry(row.clone(), col.clone(), &ring.mul(r, v));
        }
        m
    }

    /// Matrix product `self ∘ f` (apply `f` first).
    pub fn after(&self, f: &Morphism) -> Result<Morphism, MorphError> {
        compose(f, self)
    }

    /// Sub-block on the given rows and columns.
    pub fn block(&self, rows: &BTreeSet<Label>, cols: &BTreeSet<Label>) -> Result<Morphism, MorphError> {
        let target = self.target.sub(rows)?;
        let source = self.source.sub(cols)?;
        let entries = self
            .entries
            .iter()
            .filter(|((r, c), _)| rows.contains(r) && cols.contains(c))
            .map(|(k, v)| (k.clone(), v.clone()));
        Morphism::new(&source, &target, entries)
    }

    /// Re-home into larger modules containing the current labels.
    pub fn embed(&self, source: &BasedModule, target: &BasedModule) -> Result<Morphism, MorphError> {
        Morphism::new(source, target, self.entries.iter().map(|(k, v)| (k.clone(), v.clone())))
    }

    /// Same entries between modules with identical label sets (e.g. with new locations).
    pub fn with_modules(&self, source: &BasedModule, target: &BasedModule) -> Result<Morphism, MorphError> {
        if source.basis_set() != self.source.basis_set() || target.basis_set() != self.target.basis_set() {
            return Err(MorphError::ShapeMismatch("modules differ in labels".into()));
        }
        self.embed(source, target)
    }

    pub fn relabel(&self, fs: impl Fn(&Label) -> Label, ft: impl Fn(&Label) -> Label) -> Morphism {
        Morphism {
            source: self.source.relabel(&fs),
            target: self.target.relabel(&ft),
            entries: self.entries.iter().map(|((r, c), v)| ((ft(r), fs(c)), v.clone())).collect(),
        }
    }

    /// Two-sided inverse: diagonal maps directly, otherwise the dense oracle over `Z` or `Z/n`.
    pub fn try_inverse(&self) -> Result<Morphism, MorphError> {
        if self.source.rank() != self.target.rank() {
            return Err(MorphError::NotInvertible("ranks differ".into()));
        }
        let ring = self.ring().clone();
        if let Ok(base) = is_u_diagonal(self, UnitKind::AllUnits) {
            if base.len() == self.source.rank() {
                let mut inv = Morphism::zero(&self.target, &self.source);
                for (x, y) in &base {
                    let c = ring.invert_unit(&self.entries[&(y.clone(), x.clone())])?;
                    inv.add_entry(x.clone(), y.clone(), &c);
                }
                return Ok(inv);
            }
        }
        let dense = matrix_inverse_oracle(&ring, &self.to_dense())
            .map_err(|e| MorphError::NotInvertible(e.to_string()))?;
        Morphism::from_dense(&self.target, &self.source, &dense)
    }

    pub fn to_doc(&self) -> MorphismDoc {
        let ring = self.ring();
        MorphismDoc {
            source: self.source.basis.clone(),
            target: self.target.basis.clone(),
            entries: self
                .entries
                .iter()
                .map(|((r, c), v)| EntryDoc { row: r.clone(), col: c.clone(), coeff: ring.elem_to_json(v) })
                .collect(),
        }
    }

    pub fn from_doc(ring: &Ring, doc: &MorphismDoc) -> Result<Morphism, MorphError> {
        let source = BasedModule::new(ring, doc.source.iter().cloned())?;
        let target = BasedModule::new(ring, doc.target.iter().cloned())?;
        let mut entries = Vec::with_capacity(doc.entries.len());
        for e in &doc.entries {
            entries.push(((e.row.clone(), e.col.clone()), ring.elem_from_json(&e.coeff)?));
        }
        Morphism::new(&source, &target, entries)
    }
}

/// `g ∘ f`, requiring the target of `f` to be the source of `g`.
pub fn compose(f: &Morphism, g: &Morphism) -> Result<Morphism, MorphError> {
    if f.target.basis_set() != g.source.basis_set() {
        return Err(MorphError::ShapeMismatch("target of f is not the source of g".into()));
    }
    if f.ring() != g.ring() {
        return Err(MorphError::RingMismatch(f.ring().name(), g.ring().name()));
    }
    let ring = f.ring().clone();
    let gcols = g.columns();
    let mut out = Morphism::zero(&f.source, &g.target);
    for ((y, x), a) in &f.entries {
        if let Some(col) = gcols.get(y) {
            for (z, b) in col {
                out.add_entry((*z).clone(), x.clone(), &ring.mul(b, a));
            }
        }
    }
    Ok(out)
}

/// Base function of a `U`-diagonal morphism: source label -> target label.
pub fn is_u_diagonal(f: &Morphism, u: UnitKind) -> Result<BTreeMap<Label, Label>, MorphError> {
    let ring = f.ring();
    let mut base = BTreeMap::new();
    let mut hit: BTreeSet<&Label> = BTreeSet::new();
    for (x, col) in f.columns() {
        if col.len() != 1 {
            return Err(MorphError::NotDiagonal(x.clone()));
        }
        let (y, c) = col[0];
        if !hit.insert(y) {
            return Err(MorphError::NotDiagonal(x.clone()));
        }
        if !ring.in_unit_subgroup(c, u) {
            return Err(MorphError::CoefficientOutsideU { row: y.clone(), col: x.clone() });
        }
        base.insert(x.clone(), y.clone());
    }
    Ok(base)
}

/// `f = h + u` with `h` diagonal and `u` increasing with respect to `h`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriangularDecomposition {
    pub diagonal: Morphism,
    pub increasing: Morphism,
    pub base_function: BTreeMap<Label, Label>,
    pub unit: UnitKind,
}

impl TriangularDecomposition {
    pub fn original(&self) -> Morphism {
        self.diagonal.add(&self.increasing).expect("same shape")
    }
}

/// The unique diagonal-plus-increasing decomposition with respect to the order `pt`
/// on the target basis; when `ps` is given the base function must also be
/// order-preserving from it.
pub fn decompose_triangular(
    f: &Morphism,
    pt: &Poset,
    ps: Option<&Poset>,
    u: UnitKind,
) -> Result<TriangularDecomposition, MorphError> {
    let ring = f.ring().clone();
    let mut base: BTreeMap<Label, Label> = BTreeMap::new();
    let mut owner: BTreeMap<Label, Label> = BTreeMap::new();
    let mut diag = Morphism::zero(&f.source, &f.target);
    let mut inc = Morphism::zero(&f.source, &f.target);
    for x in &f.source.basis {
        let col = f.column(x);
        if col.is_empty() {
            continue;
        }
        let minimal: Vec<&(Label, Elem)> = col
            .iter()
            .filter(|(y, _)| col.iter().all(|(z, _)| z == y || pt.lt(y, z)))
            .collect();
        let Some((h, c)) = minimal.first().map(|(y, v)| (y.clone(), v.clone())) else {
            // witness: an entry not above some other entry of the column
            let (y, _) = col
                .iter()
                .find(|(y, _)| col.iter().any(|(z, _)| z != y && !pt.lt(z, y)))
                .expect("a column with no minimum has an incomparable entry");
            return Err(MorphError::NotTriangular { row: y.clone(), col: x.clone() });
        };
        if owner.contains_key(&h) {
            return Err(MorphError::NotTriangular { row: h, col: x.clone() });
        }
        if !ring.in_unit_subgroup(&c, u) {
            return Err(MorphError::CoefficientOutsideU { row: h, col: x.clone() });
        }
        owner.insert(h.clone(), x.clone());
        base.insert(x.clone(), h.clone());
        diag.add_entry(h.clone(), x.clone(), &c);
        for (y, v) in &col {
            if *y != h {
                inc.add_entry(y.clone(), x.clone(), v);
            }
        }
    }
    if let Some(ps) = ps {
        for (a, ha) in &base {
            for b in ps.above(a) {
                if let Some(hb) = base.get(b) {
                    if !pt.lt(ha, hb) {
                        return Err(MorphError::NotTriangular { row: hb.clone(), col: b.clone() });
                    }
                }
            }
        }
    }
    Ok(TriangularDecomposition { diagonal: diag, increasing: inc, base_function: base, unit: u })
}

fn diagonal_inverse(d: &TriangularDecomposition) -> Result<Morphism, MorphError> {
    let h = &d.diagonal;
    let ring = h.ring().clone();
    if d.base_function.len() != h.source.rank() || h.source.rank() != h.target.rank() {
        return Err(MorphError::DiagonalNotInvertible("base function is not a bijection".into()));
    }
    let mut inv = Morphism::zero(&h.target, &h.source);
    for (x, y) in &d.base_function {
        let c = &h.entries[&(y.clone(), x.clone())];
        let ci = ring
            .invert_unit(c)
            .map_err(|_| MorphError::DiagonalNotInvertible(format!("coefficient {} at {x:?}", ring.format(c))))?;
        inv.add_entry(x.clone(), y.clone(), &ci);
    }
    Ok(inv)
}

/// `(h + u)^{-1} = Σ (-h^{-1} u)^i h^{-1}`.
pub fn invert_triangular(d: &TriangularDecomposition) -> Result<Morphism, MorphError> {
    let hinv = diagonal_inverse(d)?;
    let step = hinv.after(&d.increasing)?.neg();
    let mut term = hinv.clone();
    let mut total = hinv;
    for _ in 0..=d.diagonal.source.rank() {
        term = step.after(&term)?;
        if term.is_zero() {
            return Ok(total);
        }
        total = total.add(&term)?;
    }
    Err(MorphError::DiagonalNotInvertible("increasing part is not nilpotent".into()))
}

/// `f = (1 + α_n) ··· (1 + α_1) diag(f)` with `α_i α_j = 0` for `j ≤ i`.
/// Zero factors are dropped; the list is ordered `α_1, α_2, ...`.
pub fn factor_elementary(d: &TriangularDecomposition) -> Result<(Vec<Morphism>, Morphism), MorphError> {
    let hinv = diagonal_inverse(d)?;
    let u = d.increasing.after(&hinv)?;
    let target = d.diagonal.target.clone();
    // D_i: basis elements whose u-image lies in D_{i-1}
    let mut level: BTreeSet<Label> = BTreeSet::new();
    let mut alphas = Vec::new();
    let mut used = Morphism::zero(&target, &target);
    while level.len() < target.rank() {
        let next: BTreeSet<Label> = target
            .basis
            .iter()
            .filter(|y| u.column(y).iter().all(|(z, _)| level.contains(z)))
            .cloned()
            .collect();
        if next.len() == level.len() {
            return Err(MorphError::DiagonalNotInvertible("increasing part is not nilpotent".into()));
        }
        let p = Morphism::projection(&target, &next);
        let alpha = u.sub(&used)?.after(&p)?;
        used = used.add(&alpha)?;
        if !alpha.is_zero() {
            alphas.push(alpha);
        }
        level = next;
    }
    Ok((alphas, d.diagonal.clone()))
}

/// Reassemble `(1 + α_n) ··· (1 + α_1) h`.
pub fn multiply_factors(alphas: &[Morphism], h: &Morphism) -> Result<Morphism, MorphError> {
    let one = Morphism::identity(h.target());
    let mut acc = h.clone();
    for a in alphas {
        acc = one.add(a)?.after(&acc)?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryDoc {
    pub row: Label,
    pub col: Label,
    pub coeff: Value,
}

/// Morphism document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphismDoc {
    pub source: Vec<Label>,
    pub target: Vec<Label>,
    #[serde(default)]
    pub entries: Vec<EntryDoc>,
}
