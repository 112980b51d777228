//! Geometric modules and morphisms over a reference map `p: E -> X`, with radii,
//! homotopies, cellular chains, controlled validators and the localization splittings.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use thiserror::Error;

use crate::control::{ControlError, ControlSpace, MetricDoc, SpaceDoc};
use crate::morphisms::{BasedModule, MorphError, Morphism};
use crate::posets::{is_epsilon_bounded, Poset};
use crate::rings::{Elem, Ring, RingError};
use crate::Label;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("module mismatch: {0}")]
    ModuleMismatch(String),
    #[error("homotopy does not match the morphism: {0}")]
    TrackMismatch(String),
    #[error("bad path: {0}")]
    BadPath(String),
    #[error("E is not connected")]
    Disconnected,
    #[error("not a spanning tree: {0}")]
    NotATree(String),
    #[error("no generator for the edge {0:?} -> {1:?}")]
    MissingGenerator(Label, Label),
    #[error("not a simplicial complex: {0}")]
    NotAComplex(String),
    #[error("missing witness: {0}")]
    MissingWitness(String),
    #[error("order is not epsilon bounded at {0:?}")]
    NotEpsilonBounded(Label),
    #[error("not diagonal: {0}")]
    NotDiagonal(String),
    #[error("diagonal coefficient at {0:?} is not invertible")]
    DiagonalNotInvertible(Label),
    #[error("not triangular: {0}")]
    NotTriangular(String),
    #[error("not unipotent: {0}")]
    NotUnipotent(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Morph(#[from] MorphError),
}

/// `p: E -> X`. Sizes are measured in `X`; `E` only carries path data.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceMap {
    pub e: ControlSpace,
    pub x: ControlSpace,
    proj: BTreeMap<Label, Label>,
}

impl ReferenceMap {
    pub fn new(e: ControlSpace, x: ControlSpace, proj: BTreeMap<Label, Label>) -> Result<Self, GeoError> {
        for p in e.points() {
            let img = proj.get(p).ok_or_else(|| ControlError::UnknownPoint(p.clone()))?;
            x.idx(img)?;
        }
        let proj = proj.into_iter().filter(|(k, _)| e.contains(k)).collect();
        Ok(ReferenceMap { e, x, proj })
    }

    /// `E = X` with the identity projection.
    pub fn identity(x: ControlSpace) -> Self {
        let proj = x.points().iter().map(|p| (p.clone(), p.clone())).collect();
        ReferenceMap { e: x.clone(), x, proj }
    }

    pub fn project(&self, p: &str) -> Result<&Label, GeoError> {
        self.proj.get(p).ok_or_else(|| GeoError::Control(ControlError::UnknownPoint(p.to_string())))
    }

    pub fn projection(&self) -> &BTreeMap<Label, Label> {
        &self.proj
    }

    pub fn x_path(&self, via: &[Label]) -> Result<Vec<Label>, GeoError> {
        via.iter().map(|p| self.project(p).cloned()).collect()
    }

    pub fn path_radius(&self, via: &[Label]) -> Result<f64, GeoError> {
        Ok(self.x.path_radius(&self.x_path(via)?)?)
    }

    pub fn lies_over(&self, via: &[Label], ys: &BTreeSet<Label>) -> Result<bool, GeoError> {
        for p in via {
            if !ys.contains(self.project(p)?) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The reference map over the subspace `U` of `X`.
    pub fn restrict(&self, us: &BTreeSet<Label>) -> Result<ReferenceMap, GeoError> {
        let x = self.x.subspace(us)?;
        let e_pts: BTreeSet<Label> =
            self.proj.iter().filter(|(_, v)| us.contains(*v)).map(|(k, _)| k.clone()).collect();
        let e = self.e.subspace(&e_pts)?;
        let proj = self.proj.iter().filter(|(k, _)| e_pts.contains(*k)).map(|(a, b)| (a.clone(), b.clone())).collect();
        Ok(ReferenceMap { e, x, proj })
    }
}

/// Free module with basis locations `s: label -> E`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeometricModule {
    pub ring: Ring,
    at: BTreeMap<Label, Label>,
}

impl GeometricModule {
    pub fn new(ring: &Ring, at: BTreeMap<Label, Label>) -> Self {
        GeometricModule { ring: ring.clone(), at }
    }

    pub fn from_pairs(ring: &Ring, pairs: &[(&str, &str)]) -> Self {
        Self::new(ring, pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect())
    }

    pub fn check(&self, rm: &ReferenceMap) -> Result<(), GeoError> {
        for p in self.at.values() {
            rm.e.idx(p)?;
        }
        Ok(())
    }

    pub fn locations(&self) -> &BTreeMap<Label, Label> {
        &self.at
    }

    pub fn at(&self, l: &str) -> Option<&Label> {
        self.at.get(l)
    }

    pub fn basis(&self) -> impl Iterator<Item = &Label> {
        self.at.keys()
    }

    pub fn rank(&self) -> usize {
        self.at.len()
    }

    pub fn contains(&self, l: &str) -> bool {
        self.at.contains_key(l)
    }

    /// Basis locations pushed down to `X`.
    pub fn x_locations(&self, rm: &ReferenceMap) -> Result<BTreeMap<Label, Label>, GeoError> {
        self.at.iter().map(|(k, v)| Ok((k.clone(), rm.project(v)?.clone()))).collect()
    }

    /// Basis elements located over `ys`.
    pub fn restrict(&self, rm: &ReferenceMap, ys: &BTreeSet<Label>) -> Result<GeometricModule, GeoError> {
        let mut at = BTreeMap::new();
        for (k, v) in &self.at {
            if ys.contains(rm.project(v)?) {
                at.insert(k.clone(), v.clone());
            }
        }
        Ok(GeometricModule { ring: self.ring.clone(), at })
    }

    /// The underlying based module, located at E-points.
    pub fn to_based(&self) -> BasedModule {
        BasedModule::new(&self.ring, self.at.keys().cloned())
            .and_then(|m| m.with_location(self.at.clone()))
            .expect("map keys are distinct")
    }

    pub fn direct_sum(&self, other: &GeometricModule) -> Result<GeometricModule, GeoError> {
        if self.ring != other.ring {
            return Err(GeoError::ModuleMismatch("rings differ".into()));
        }
        let mut at = self.at.clone();
        for (k, v) in &other.at {
            if at.insert(k.clone(), v.clone()).is_some() {
                return Err(GeoError::ModuleMismatch(format!("label {k:?} appears twice")));
            }
        }
        Ok(GeometricModule { ring: self.ring.clone(), at })
    }
}

/// One term `coeff · γ` with `γ` from `s(from)` to `s(to)` sampled at `via`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GPath {
    pub coeff: Elem,
    pub from: Label,
    pub to: Label,
    pub via: Vec<Label>,
}

/// Sort key: sample sequence first, then endpoints.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PathKey {
    pub via: Vec<Label>,
    pub from: Label,
    pub to: Label,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeometricMorphism {
    source: GeometricModule,
    target: GeometricModule,
    paths: BTreeMap<PathKey, Elem>,
}

impl GeometricMorphism {
    pub fn new<I>(source: &GeometricModule, target: &GeometricModule, paths: I) -> Result<Self, GeoError>
    where
        I: IntoIterator<Item = GPath>,
    {
        if source.ring != target.ring {
            return Err(GeoError::ModuleMismatch("rings differ".into()));
        }
        let mut m = GeometricMorphism::zero(source, target);
        for p in paths {
            let (Some(s), Some(t)) = (source.at(&p.from), target.at(&p.to)) else {
                return Err(GeoError::BadPath(format!("unknown endpoint in {:?} -> {:?}", p.from, p.to)));
            };
            if p.via.first() != Some(s) || p.via.last() != Some(t) {
                return Err(GeoError::BadPath(format!("path {:?} does not join {s:?} to {t:?}", p.via)));
            }
            source.ring.check(&p.coeff)?;
            m.add_term(PathKey { via: p.via, from: p.from, to: p.to }, &p.coeff);
        }
        Ok(m)
    }

    pub fn zero(source: &GeometricModule, target: &GeometricModule) -> Self {
        GeometricMorphism { source: source.clone(), target: target.clone(), paths: BTreeMap::new() }
    }

    /// Constant paths with coefficient one.
    pub fn identity(m: &GeometricModule) -> Self {
        let one = m.ring.one();
        let paths = m
            .at
            .iter()
            .map(|(k, v)| (PathKey { via: vec![v.clone()], from: k.clone(), to: k.clone() }, one.clone()))
            .collect();
        GeometricMorphism { source: m.clone(), target: m.clone(), paths }
    }

    fn add_term(&mut self, key: PathKey, c: &Elem) {
        let ring = &self.source.ring;
        let v = match self.paths.remove(&key) {
            Some(old) => ring.add(&old, c),
            None => c.clone(),
        };
        if !ring.is_zero(&v) {
            self.paths.insert(key, v);
        }
    }

    pub fn ring(&self) -> &Ring {
        &self.source.ring
    }

    pub fn source(&self) -> &GeometricModule {
        &self.source
    }

    pub fn target(&self) -> &GeometricModule {
        &self.target
    }

    pub fn terms(&self) -> &BTreeMap<PathKey, Elem> {
        &self.paths
    }

    pub fn paths(&self) -> Vec<GPath> {
        self.paths
            .iter()
            .map(|(k, c)| GPath { coeff: c.clone(), from: k.from.clone(), to: k.to.clone(), via: k.via.clone() })
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    fn same_shape(&self, other: &GeometricMorphism) -> Result<(), GeoError> {
        if self.source != other.source || self.target != other.target {
            return Err(GeoError::ModuleMismatch("sum of morphisms between different modules".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &GeometricMorphism) -> Result<GeometricMorphism, GeoError> {
        self.same_shape(other)?;
        let mut out = self.clone();
        for (k, c) in &other.paths {
            out.add_term(k.clone(), c);
        }
        Ok(out)
    }

    pub fn neg(&self) -> GeometricMorphism {
        let ring = self.ring().clone();
        GeometricMorphism {
            source: self.source.clone(),
            target: self.target.clone(),
            paths: self.paths.iter().map(|(k, c)| (k.clone(), ring.neg(c))).collect(),
        }
    }

    pub fn sub(&self, other: &GeometricMorphism) -> Result<GeometricMorphism, GeoError> {
        self.add(&other.neg())
    }

    /// Same paths between larger modules.
    pub fn embed(&self, source: &GeometricModule, target: &GeometricModule) -> Result<GeometricMorphism, GeoError> {
        GeometricMorphism::new(source, target, self.paths())
    }

    /// Paths starting at basis element `x`, keyed by `(to, via)`.
    pub fn column(&self, x: &str) -> BTreeMap<(Label, Vec<Label>), Elem> {
        self.paths
            .iter()
            .filter(|(k, _)| k.from == x)
            .map(|(k, c)| ((k.to.clone(), k.via.clone()), c.clone()))
            .collect()
    }

    /// Check that every path is a walk in `E` (graph models).
    pub fn check_walks(&self, rm: &ReferenceMap) -> Result<(), GeoError> {
        self.source.check(rm)?;
        self.target.check(rm)?;
        for k in self.paths.keys() {
            rm.e.validate_walk(&k.via)?;
        }
        Ok(())
    }

    /// Forget the paths: the module map with summed coefficients.
    pub fn algebraic(&self) -> Result<Morphism, GeoError> {
        let entries = self.paths.iter().map(|(k, c)| ((k.to.clone(), k.from.clone()), c.clone()));
        Ok(Morphism::new(&self.source.to_based(), &self.target.to_based(), entries)?)
    }

    pub fn map_paths(&self, f: impl Fn(&[Label]) -> Vec<Label>) -> GeometricMorphism {
        let mut out = GeometricMorphism::zero(&self.source, &self.target);
        for (k, c) in &self.paths {
            out.add_term(PathKey { via: f(&k.via), from: k.from.clone(), to: k.to.clone() }, c);
        }
        out
    }
}

/// Max X-radius over the paths of `f`; 0 for the empty morphism.
pub fn gradius(rm: &ReferenceMap, f: &GeometricMorphism) -> Result<f64, GeoError> {
    let mut r: f64 = 0.0;
    for k in f.paths.keys() {
        r = r.max(rm.path_radius(&k.via)?);
    }
    Ok(r)
}

/// `g ∘ f`: every `g`-path after every `f`-path meeting it, coefficients `g · f`.
pub fn gcompose(f: &GeometricMorphism, g: &GeometricMorphism) -> Result<GeometricMorphism, GeoError> {
    if f.target != g.source {
        return Err(GeoError::ModuleMismatch("target of f is not the source of g".into()));
    }
    let ring = f.ring().clone();
    let mut by_start: BTreeMap<&Label, Vec<(&PathKey, &Elem)>> = BTreeMap::new();
    for (k, c) in &g.paths {
        by_start.entry(&k.from).or_default().push((k, c));
    }
    let mut out = GeometricMorphism::zero(&f.source, &g.target);
    for (kf, cf) in &f.paths {
        for (kg, cg) in by_start.get(&kf.to).into_iter().flatten() {
            let mut via = kf.via.clone();
            via.extend(kg.via[1..].iter().cloned());
            let key = PathKey { via, from: kf.from.clone(), to: kg.to.clone() };
            out.add_term(key, &ring.mul(cg, cf));
        }
    }
    Ok(out)
}

/// Paths lying entirely over `ys`, between the modules restricted to `ys`.
pub fn grestrict(rm: &ReferenceMap, f: &GeometricMorphism, ys: &BTreeSet<Label>) -> Result<GeometricMorphism, GeoError> {
    let mut out = GeometricMorphism::zero(&f.source.restrict(rm, ys)?, &f.target.restrict(rm, ys)?);
    for (k, c) in &f.paths {
        if rm.lies_over(&k.via, ys)? {
            out.paths.insert(k.clone(), c.clone());
        }
    }
    Ok(out)
}

/// Drop repeated consecutive samples.
pub fn destutter(via: &[Label]) -> Vec<Label> {
    let mut out: Vec<Label> = Vec::with_capacity(via.len());
    for s in via {
        if out.last() != Some(s) {
            out.push(s.clone());
        }
    }
    out
}

/// Free reduction: drop stutters and immediate backtracks `a, b, a -> a`.
pub fn reduce_path(via: &[Label]) -> Vec<Label> {
    let mut out: Vec<Label> = Vec::with_capacity(via.len());
    for s in via {
        if out.last() == Some(s) {
            continue;
        }
        if out.len() >= 2 && &out[out.len() - 2] == s {
            out.pop();
            continue;
        }
        out.push(s.clone());
    }
    out
}

pub fn reduce_paths(f: &GeometricMorphism) -> GeometricMorphism {
    f.map_paths(reduce_path)
}

/// One path homotopy rel endpoints: equal-length sampled stages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Track {
    pub from: Label,
    pub to: Label,
    pub stages: Vec<Vec<Label>>,
}

impl Track {
    pub fn constant(k: &PathKey) -> Self {
        Track { from: k.from.clone(), to: k.to.clone(), stages: vec![k.via.clone()] }
    }

    pub fn start_key(&self) -> PathKey {
        PathKey { via: self.stages[0].clone(), from: self.from.clone(), to: self.to.clone() }
    }

    pub fn end(&self) -> &Vec<Label> {
        self.stages.last().expect("tracks are nonempty")
    }

    fn check(&self) -> Result<(), GeoError> {
        let bad = |s: &str| Err(GeoError::TrackMismatch(format!("{s} in track {:?} -> {:?}", self.from, self.to)));
        let Some(first) = self.stages.first() else { return bad("no stages") };
        if first.is_empty() {
            return bad("empty stage");
        }
        for st in &self.stages {
            if st.len() != first.len() {
                return bad("stages of different lengths");
            }
            if st.first() != first.first() || st.last() != first.last() {
                return bad("endpoints move");
            }
        }
        Ok(())
    }

    /// Max over sample positions of the X-diameter swept by that sample.
    pub fn radius(&self, rm: &ReferenceMap) -> Result<f64, GeoError> {
        let mut r: f64 = 0.0;
        for i in 0..self.stages[0].len() {
            let col: Vec<Label> = self.stages.iter().map(|s| rm.project(&s[i]).cloned()).collect::<Result<_, _>>()?;
            let idx: Vec<usize> = col.iter().map(|p| rm.x.idx(p)).collect::<Result<_, _>>()?;
            for (a, &p) in idx.iter().enumerate() {
                for &q in &idx[a + 1..] {
                    r = r.max(rm.x.d_idx(p, q));
                }
            }
        }
        Ok(r)
    }
}

/// Homotopy of a geometric morphism: one track per path.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GeometricHomotopy {
    pub tracks: Vec<Track>,
}

impl GeometricHomotopy {
    pub fn new(tracks: Vec<Track>) -> Result<Self, GeoError> {
        let mut seen = BTreeSet::new();
        for t in &tracks {
            t.check()?;
            if !seen.insert(t.start_key()) {
                return Err(GeoError::TrackMismatch(format!("two tracks start at {:?}", t.stages[0])));
            }
        }
        Ok(GeometricHomotopy { tracks })
    }

    pub fn constant(f: &GeometricMorphism) -> Self {
        GeometricHomotopy { tracks: f.paths.keys().map(Track::constant).collect() }
    }

    /// Add constant tracks for paths of `f` that have none.
    pub fn extend_constant(&self, f: &GeometricMorphism) -> Self {
        let have: BTreeSet<PathKey> = self.tracks.iter().map(Track::start_key).collect();
        let mut tracks = self.tracks.clone();
        tracks.extend(f.paths.keys().filter(|k| !have.contains(*k)).map(Track::constant));
        GeometricHomotopy { tracks }
    }

    pub fn reversed(&self) -> Self {
        let tracks = self
            .tracks
            .iter()
            .map(|t| Track { from: t.from.clone(), to: t.to.clone(), stages: t.stages.iter().rev().cloned().collect() })
            .collect();
        GeometricHomotopy { tracks }
    }

    pub fn radius(&self, rm: &ReferenceMap) -> Result<f64, GeoError> {
        let mut r: f64 = 0.0;
        for t in &self.tracks {
            r = r.max(t.radius(rm)?);
        }
        Ok(r)
    }

    /// Tracks lying entirely over `ys`.
    pub fn restrict(&self, rm: &ReferenceMap, ys: &BTreeSet<Label>) -> Result<Self, GeoError> {
        let mut tracks = Vec::new();
        for t in &self.tracks {
            let mut inside = true;
            for s in &t.stages {
                inside &= rm.lies_over(s, ys)?;
            }
            if inside {
                tracks.push(t.clone());
            }
        }
        Ok(GeometricHomotopy { tracks })
    }
}

/// The morphism at the end of `h`: same coefficients, end paths.
pub fn apply_homotopy(f: &GeometricMorphism, h: &GeometricHomotopy) -> Result<GeometricMorphism, GeoError> {
    let starts: BTreeSet<PathKey> = h.tracks.iter().map(Track::start_key).collect();
    let have: BTreeSet<PathKey> = f.paths.keys().cloned().collect();
    if starts != have {
        let odd = starts.symmetric_difference(&have).next().map(|k| k.via.clone()).unwrap_or_default();
        return Err(GeoError::TrackMismatch(format!("no one-to-one match at path {odd:?}")));
    }
    let mut out = GeometricMorphism::zero(&f.source, &f.target);
    for t in &h.tracks {
        t.check()?;
        let c = &f.paths[&t.start_key()];
        out.add_term(PathKey { via: t.end().clone(), from: t.from.clone(), to: t.to.clone() }, c);
    }
    Ok(out)
}

/// Spanning tree and generator images for forgetting control.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopData {
    pub basepoint: Label,
    pub tree: Vec<(Label, Label)>,
    /// Image of each non-tree edge traversed `a -> b`: a Laurent exponent or a group index.
    pub generators: BTreeMap<(Label, Label), i64>,
}

/// Replace each path by the coefficient times its loop class in `R[π₁E]`.
/// Loop words are read right to left so that `forget(g ∘ f) = forget(g) · forget(f)`.
pub fn forget_control(
    rm: &ReferenceMap,
    f: &GeometricMorphism,
    data: &LoopData,
    target: &Ring,
) -> Result<Morphism, GeoError> {
    let e = &rm.e;
    let n = e.len();
    e.idx(&data.basepoint)?;
    if !e.is_graph() {
        return Err(GeoError::Unsupported("forgetting control needs a graph E".into()));
    }
    // Union-find check that the tree spans without cycles.
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut Vec<usize>, mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut tree = BTreeSet::new();
    for (a, b) in &data.tree {
        let (i, j) = (e.idx(a)?, e.idx(b)?);
        if e.edge_weight(i, j).is_none() {
            return Err(GeoError::NotATree(format!("{a:?} - {b:?} is not an edge")));
        }
        let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
        if ri == rj {
            return Err(GeoError::NotATree(format!("{a:?} - {b:?} closes a cycle")));
        }
        parent[ri] = rj;
        tree.insert((i.min(j), i.max(j)));
    }
    let r0 = root(&mut parent, 0);
    if (0..n).any(|i| root(&mut parent, i) != r0) {
        return Err(GeoError::Disconnected);
    }
    let gen_elem = |a: &Label, b: &Label| -> Result<Elem, GeoError> {
        let (fwd, k) = match (data.generators.get(&(a.clone(), b.clone())), data.generators.get(&(b.clone(), a.clone()))) {
            (Some(k), _) => (true, *k),
            (None, Some(k)) => (false, *k),
            (None, None) => return Err(GeoError::MissingGenerator(a.clone(), b.clone())),
        };
        let g = match target {
            Ring::Laurent => target.t_pow(k)?,
            Ring::GroupRing(_) => {
                let idx = usize::try_from(k).map_err(|_| GeoError::Unsupported(format!("group index {k}")))?;
                target.group_elem(idx)?
            }
            _ => return Err(GeoError::Unsupported(format!("forgetting control into {}", target.name()))),
        };
        Ok(if fwd { g } else { target.invert_unit(&g)? })
    };
    let mut entries = Vec::new();
    for (k, c) in &f.paths {
        let Elem::Int(v) = c else {
            return Err(GeoError::Unsupported("coefficients must be integers".into()));
        };
        if !matches!(f.ring(), Ring::Z) {
            return Err(GeoError::Unsupported("coefficients must lie in Z".into()));
        }
        let mut word = target.one();
        for w in k.via.windows(2) {
            if w[0] == w[1] {
                continue;
            }
            let (i, j) = (e.idx(&w[0])?, e.idx(&w[1])?);
            if e.edge_weight(i, j).is_none() {
                return Err(GeoError::Control(ControlError::NotAWalk(w[0].clone(), w[1].clone())));
            }
            if tree.contains(&(i.min(j), i.max(j))) {
                continue;
            }
            word = target.mul(&gen_elem(&w[0], &w[1])?, &word);
        }
        let coeff = target.mul(&target.from_bigint(BigInt::clone(v)), &word);
        entries.push(((k.to.clone(), k.from.clone()), coeff));
    }
    let src = BasedModule::new(target, f.source.at.keys().cloned())?;
    let tgt = BasedModule::new(target, f.target.at.keys().cloned())?;
    Ok(Morphism::new(&src, &tgt, entries)?)
}

/// Geometric modules `C^i` with boundaries `c: C^i -> C^{i-1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeometricComplex {
    pub ring: Ring,
    pub modules: BTreeMap<i64, GeometricModule>,
    pub boundary: BTreeMap<i64, GeometricMorphism>,
}

impl GeometricComplex {
    pub fn module(&self, d: i64) -> GeometricModule {
        self.modules.get(&d).cloned().unwrap_or_else(|| GeometricModule::new(&self.ring, BTreeMap::new()))
    }

    pub fn c(&self, d: i64) -> GeometricMorphism {
        self.boundary
            .get(&d)
            .cloned()
            .unwrap_or_else(|| GeometricMorphism::zero(&self.module(d), &self.module(d - 1)))
    }

    /// Degrees in which `c²` may be nonzero.
    fn span(&self) -> Vec<i64> {
        match (self.modules.keys().next(), self.modules.keys().last()) {
            (Some(lo), Some(hi)) => (*lo..=*hi).collect(),
            _ => vec![],
        }
    }
}

/// Finite simplicial complex with vertex coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialComplex {
    pub coords: BTreeMap<Label, Vec<f64>>,
    pub simplices: Vec<Vec<Label>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellularReport {
    pub mesh: f64,
    /// A cell whose diameter is the mesh.
    pub widest: Vec<Label>,
    pub boundary_radius: f64,
    pub pairing_radius: f64,
    pub pairing_complete: bool,
    pub algebraic_square_zero: bool,
    pub composite_paths: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellularChains {
    pub reference: ReferenceMap,
    pub complex: GeometricComplex,
    /// Nullhomotopies of `c²` starting in each degree.
    pub nullhomotopies: BTreeMap<i64, GeometricHomotopy>,
    pub report: CellularReport,
}

pub fn simplex_label(vs: &[Label]) -> Label {
    vs.join("|")
}

/// Barycentric geometric cellular chains over `Z`, located in the ambient Euclidean space.
pub fn cellular_chains(k: &SimplicialComplex) -> Result<CellularChains, GeoError> {
    let bad = |s: String| Err(GeoError::NotAComplex(s));
    let dim = k.coords.values().next().map(Vec::len).unwrap_or(0);
    for (v, c) in &k.coords {
        if v.contains('|') {
            return bad(format!("vertex label {v:?} contains '|'"));
        }
        if c.len() != dim || c.iter().any(|x| !x.is_finite()) {
            return bad(format!("bad coordinates for {v:?}"));
        }
    }
    let mut cells: BTreeMap<usize, BTreeSet<Vec<Label>>> = BTreeMap::new();
    for s in &k.simplices {
        let mut vs = s.clone();
        vs.sort();
        vs.dedup();
        if vs.is_empty() || vs.len() != s.len() {
            return bad(format!("simplex {s:?} is empty or repeats a vertex"));
        }
        if let Some(v) = vs.iter().find(|v| !k.coords.contains_key(*v)) {
            return bad(format!("unknown vertex {v:?}"));
        }
        if vs.len() > 12 {
            return bad(format!("simplex {s:?} has too many vertices"));
        }
        // all faces
        for mask in 1u32..(1 << vs.len()) {
            let face: Vec<Label> = vs.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, v)| v.clone()).collect();
            cells.entry(face.len() - 1).or_default().insert(face);
        }
    }
    let bary = |vs: &[Label]| -> Vec<f64> {
        let mut b = vec![0.0; dim];
        for v in vs {
            for (x, y) in b.iter_mut().zip(&k.coords[v]) {
                *x += y;
            }
        }
        b.iter().map(|x| x / vs.len() as f64).collect()
    };
    let coords: BTreeMap<Label, Vec<f64>> =
        cells.values().flatten().map(|s| (simplex_label(s), bary(s))).collect();
    let x = ControlSpace::from_doc(&SpaceDoc {
        points: coords.keys().cloned().collect(),
        metric: MetricDoc::Euclidean { coords },
        frontier: vec![],
    })?;
    let rm = ReferenceMap::identity(x);
    let z = Ring::Z;
    let mut modules = BTreeMap::new();
    for (d, ss) in &cells {
        let at = ss.iter().map(|s| (simplex_label(s), simplex_label(s))).collect();
        modules.insert(*d as i64, GeometricModule::new(&z, at));
    }
    let mut complex = GeometricComplex { ring: z.clone(), modules, boundary: BTreeMap::new() };
    let mut mesh: f64 = 0.0;
    let mut widest = Vec::new();
    for ss in cells.values() {
        for s in ss {
            for (i, a) in s.iter().enumerate() {
                for b in &s[i + 1..] {
                    let d: f64 = k.coords[a].iter().zip(&k.coords[b]).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
                    if d > mesh {
                        mesh = d;
                        widest = s.clone();
                    }
                }
            }
        }
    }
    for (d, ss) in &cells {
        if *d == 0 {
            continue;
        }
        let mut paths = Vec::new();
        for s in ss {
            for i in 0..s.len() {
                let mut face = s.clone();
                face.remove(i);
                let coeff = z.from_int(if i % 2 == 0 { 1 } else { -1 });
                let (from, to) = (simplex_label(s), simplex_label(&face));
                paths.push(GPath { coeff, via: vec![from.clone(), to.clone()], from, to });
            }
        }
        let di = *d as i64;
        let m = GeometricMorphism::new(&complex.module(di), &complex.module(di - 1), paths)?;
        complex.boundary.insert(di, m);
    }
    let mut boundary_radius: f64 = 0.0;
    for b in complex.boundary.values() {
        boundary_radius = boundary_radius.max(gradius(&rm, b)?);
    }
    let mut pairing_radius: f64 = 0.0;
    let mut pairing_complete = true;
    let mut algebraic_square_zero = true;
    let mut composite_paths = 0;
    let mut nullhomotopies = BTreeMap::new();
    for &d in complex.boundary.keys() {
        if d < 2 {
            continue;
        }
        let sq = gcompose(&complex.c(d), &complex.c(d - 1))?;
        algebraic_square_zero &= sq.algebraic()?.is_zero();
        composite_paths += sq.len();
        let mut groups: BTreeMap<(Label, Label), Vec<(Vec<Label>, Elem)>> = BTreeMap::new();
        for (key, c) in sq.terms() {
            groups.entry((key.from.clone(), key.to.clone())).or_default().push((key.via.clone(), c.clone()));
        }
        let mut tracks = Vec::new();
        for ((from, to), g) in groups {
            let [(va, ca), (vb, cb)] = g.as_slice() else {
                pairing_complete = false;
                continue;
            };
            if !z.is_zero(&z.add(ca, cb)) {
                pairing_complete = false;
                continue;
            }
            let mut union = va.clone();
            union.extend(vb.iter().cloned());
            pairing_radius = pairing_radius.max(rm.path_radius(&union)?);
            // move the negative path onto the positive one
            let (neg, pos) = if z.is_one(ca) { (vb, va) } else { (va, vb) };
            tracks.push(Track { from, to, stages: vec![neg.clone(), pos.clone()] });
        }
        nullhomotopies.insert(d, GeometricHomotopy::new(tracks)?);
    }
    Ok(CellularChains {
        reference: rm,
        complex,
        nullhomotopies,
        report: CellularReport {
            mesh,
            widest,
            boundary_radius,
            pairing_radius,
            pairing_complete,
            algebraic_square_zero,
            composite_paths,
        },
    })
}

/// One checked clause of a controlled definition.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub clause: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControlledReport {
    pub checks: Vec<Check>,
}

impl ControlledReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.ok).collect()
    }

    fn push(&mut self, clause: String, ok: bool, detail: String) {
        self.checks.push(Check { clause, ok, detail });
    }

    fn radius(&mut self, rm: &ReferenceMap, name: &str, f: &GeometricMorphism, eps: f64) -> Result<(), GeoError> {
        let r = gradius(rm, f)?;
        self.push(format!("radius of {name} < eps"), r < eps, format!("radius {r}"));
        Ok(())
    }
}

/// Objects the controlled validator understands; absent witnesses mean constant homotopies.
#[derive(Debug, Clone, Copy)]
pub enum Controlled<'a> {
    Complex {
        complex: &'a GeometricComplex,
        witnesses: &'a BTreeMap<i64, GeometricHomotopy>,
    },
    ChainMap {
        source: &'a GeometricComplex,
        target: &'a GeometricComplex,
        maps: &'a BTreeMap<i64, GeometricMorphism>,
        witnesses: &'a BTreeMap<i64, GeometricHomotopy>,
    },
    Contraction {
        complex: &'a GeometricComplex,
        xi: &'a BTreeMap<i64, GeometricMorphism>,
        witnesses: &'a BTreeMap<i64, GeometricHomotopy>,
    },
    Isomorphism {
        f: &'a GeometricMorphism,
        inverse: Option<&'a GeometricMorphism>,
        h_a: Option<&'a GeometricHomotopy>,
        h_b: Option<&'a GeometricHomotopy>,
    },
}

/// Column of `f` at `x` up to stutter, for comparisons.
fn column_norm(f: &GeometricMorphism, x: &str) -> BTreeMap<(Label, Vec<Label>), Elem> {
    let ring = f.ring();
    let mut out: BTreeMap<(Label, Vec<Label>), Elem> = BTreeMap::new();
    for ((to, via), c) in f.column(x) {
        let key = (to, destutter(&via));
        let v = match out.remove(&key) {
            Some(o) => ring.add(&o, &c),
            None => c,
        };
        if !ring.is_zero(&v) {
            out.insert(key, v);
        }
    }
    out
}

/// Basis elements of `m` located outside `Fr^{k eps}`.
fn outside_frontier(rm: &ReferenceMap, m: &GeometricModule, reach: f64) -> Result<Vec<Label>, GeoError> {
    let fr = rm.x.frontier_enlargement(reach);
    let mut out = Vec::new();
    for (k, v) in m.locations() {
        if !fr.contains(rm.project(v)?) {
            out.push(k.clone());
        }
    }
    Ok(out)
}

/// Runs the witness homotopy from `start` and returns its end morphism after checking its radius.
fn run_witness(
    rep: &mut ControlledReport,
    rm: &ReferenceMap,
    name: &str,
    start: &GeometricMorphism,
    h: Option<&GeometricHomotopy>,
    eps: f64,
) -> Result<GeometricMorphism, GeoError> {
    let h = h.cloned().unwrap_or_default().extend_constant(start);
    let r = h.radius(rm)?;
    rep.push(format!("witness homotopy for {name} has radius < eps"), r < eps, format!("radius {r}"));
    apply_homotopy(start, &h)
}

fn is_identity_at(f: &GeometricMorphism, x: &str) -> bool {
    let col = column_norm(f, x);
    let Some(at) = f.source.at(x) else { return false };
    col.len() == 1
        && col.iter().all(|((to, via), c)| to == x && via == &vec![at.clone()] && f.ring().is_one(c))
}

pub fn validate_controlled(rm: &ReferenceMap, obj: Controlled<'_>, eps: f64) -> Result<ControlledReport, GeoError> {
    let mut rep = ControlledReport::default();
    match obj {
        Controlled::Complex { complex, witnesses } => {
            for (d, c) in &complex.boundary {
                rep.radius(rm, &format!("c in degree {d}"), c, eps)?;
            }
            for d in complex.span() {
                let sq = gcompose(&complex.c(d), &complex.c(d - 1))?;
                let end = run_witness(&mut rep, rm, &format!("c² in degree {d}"), &sq, witnesses.get(&d), eps)?;
                let bad: Vec<Label> = outside_frontier(rm, &complex.module(d), 3.0 * eps)?
                    .into_iter()
                    .filter(|x| !column_norm(&end, x).is_empty())
                    .collect();
                rep.push(format!("c² ends trivial outside Fr^3eps in degree {d}"), bad.is_empty(), format!("{bad:?}"));
            }
        }
        Controlled::ChainMap { source, target, maps, witnesses } => {
            let zero = |d: i64| GeometricMorphism::zero(&source.module(d), &target.module(d));
            for (d, f) in maps {
                rep.radius(rm, &format!("f in degree {d}"), f, eps)?;
            }
            for d in source.span() {
                let fd = maps.get(&d).cloned().unwrap_or_else(|| zero(d));
                let fd1 = maps.get(&(d - 1)).cloned().unwrap_or_else(|| zero(d - 1));
                let df = gcompose(&fd, &target.c(d))?;
                let fc = gcompose(&source.c(d), &fd1)?;
                let end = run_witness(&mut rep, rm, &format!("d f in degree {d}"), &df, witnesses.get(&d), eps)?;
                let bad: Vec<Label> = outside_frontier(rm, &source.module(d), eps)?
                    .into_iter()
                    .filter(|x| column_norm(&end, x) != column_norm(&fc, x))
                    .collect();
                rep.push(format!("d f agrees with f c outside Fr^eps in degree {d}"), bad.is_empty(), format!("{bad:?}"));
            }
        }
        Controlled::Contraction { complex, xi, witnesses } => {
            let zero = |d: i64| GeometricMorphism::zero(&complex.module(d), &complex.module(d + 1));
            for (d, x) in xi {
                rep.radius(rm, &format!("xi in degree {d}"), x, eps)?;
            }
            for d in complex.span() {
                let xd = xi.get(&d).cloned().unwrap_or_else(|| zero(d));
                let xd1 = xi.get(&(d - 1)).cloned().unwrap_or_else(|| zero(d - 1));
                let sum = gcompose(&xd, &complex.c(d + 1))?.add(&gcompose(&complex.c(d), &xd1)?)?;
                let end = run_witness(&mut rep, rm, &format!("c xi + xi c in degree {d}"), &sum, witnesses.get(&d), eps)?;
                let bad: Vec<Label> = outside_frontier(rm, &complex.module(d), 3.0 * eps)?
                    .into_iter()
                    .filter(|x| !is_identity_at(&end, x))
                    .collect();
                rep.push(format!("c xi + xi c ends at the identity outside Fr^3eps in degree {d}"), bad.is_empty(), format!("{bad:?}"));
            }
        }
        Controlled::Isomorphism { f, inverse, h_a, h_b } => {
            let Some(g) = inverse else {
                return Err(GeoError::MissingWitness("inverse morphism f⁻".into()));
            };
            rep.radius(rm, "f", f, eps)?;
            rep.radius(rm, "f⁻", g, eps)?;
            for (name, start, h, m) in [
                ("f⁻ f", gcompose(f, g)?, h_a, f.source()),
                ("f f⁻", gcompose(g, f)?, h_b, f.target()),
            ] {
                let end = run_witness(&mut rep, rm, name, &start, h, eps)?;
                let bad: Vec<Label> = outside_frontier(rm, m, 3.0 * eps)?
                    .into_iter()
                    .filter(|x| !is_identity_at(&end, x))
                    .collect();
                rep.push(format!("{name} ends at the identity outside Fr^3eps"), bad.is_empty(), format!("{bad:?}"));
            }
        }
    }
    Ok(rep)
}

/// Diagonal part `d` and remainder `u` of a triangular geometric morphism.
fn split_diagonal(
    f: &GeometricMorphism,
    p: &Poset,
) -> Result<(BTreeMap<Label, (PathKey, Elem)>, GeometricMorphism), GeoError> {
    let mut diag: BTreeMap<Label, (PathKey, Elem)> = BTreeMap::new();
    let mut rest = GeometricMorphism::zero(&f.source, &f.target);
    for x in f.source.basis() {
        let col: Vec<(&PathKey, &Elem)> = f.paths.iter().filter(|(k, _)| &k.from == x).collect();
        let targets: BTreeSet<&Label> = col.iter().map(|(k, _)| &k.to).collect();
        let minimal: Vec<&Label> = targets.iter().copied().filter(|t| !targets.iter().any(|s| p.lt(s, t))).collect();
        let [h] = minimal.as_slice() else {
            return Err(GeoError::NotTriangular(format!("column {x:?} has no unique minimal target")));
        };
        let hits: Vec<&(&PathKey, &Elem)> = col.iter().filter(|(k, _)| &k.to == *h).collect();
        let [(k, c)] = hits.as_slice() else {
            return Err(GeoError::NotDiagonal(format!("several paths from {x:?} to {h:?}")));
        };
        if targets.iter().any(|t| t != h && !p.lt(h, t)) {
            return Err(GeoError::NotTriangular(format!("column {x:?} is not above {h:?}")));
        }
        if diag.values().any(|(k2, _)| &k2.to == *h) {
            return Err(GeoError::NotDiagonal(format!("two columns share the diagonal target {h:?}")));
        }
        diag.insert(x.clone(), ((*k).clone(), (*c).clone()));
        for (k2, c2) in &col {
            if k2 != k {
                rest.add_term((*k2).clone(), c2);
            }
        }
    }
    if diag.len() != f.target.rank() {
        return Err(GeoError::NotDiagonal("diagonal part is not a bijection of bases".into()));
    }
    Ok((diag, rest))
}

/// `f^{-1} = d^{-1} Σ (-u d^{-1})^i` with path concatenation; checked as an exact inverse
/// up to free reduction of paths.
pub fn controlled_triangular_inverse(
    rm: &ReferenceMap,
    f: &GeometricMorphism,
    p: &Poset,
    eps: f64,
) -> Result<GeometricMorphism, GeoError> {
    let loc = f.target.x_locations(rm)?;
    let rep = is_epsilon_bounded(p, &loc, eps, &rm.x)?;
    if let Some(v) = rep.violating_element {
        return Err(GeoError::NotEpsilonBounded(v));
    }
    let ring = f.ring().clone();
    let (diag, u) = split_diagonal(f, p)?;
    let mut dinv = GeometricMorphism::zero(&f.target, &f.source);
    for (x, (k, c)) in &diag {
        let inv = ring.invert_unit(c).map_err(|_| GeoError::DiagonalNotInvertible(x.clone()))?;
        let mut via = k.via.clone();
        via.reverse();
        dinv.add_term(PathKey { via, from: k.to.clone(), to: x.clone() }, &inv);
    }
    let w = gcompose(&dinv, &u)?.neg();
    let mut sum = GeometricMorphism::identity(&f.target);
    let mut power = sum.clone();
    for _ in 0..=f.target.rank() {
        power = gcompose(&power, &w)?;
        if power.is_zero() {
            break;
        }
        sum = sum.add(&power)?;
    }
    if !power.is_zero() {
        return Err(GeoError::NotTriangular("the increasing part is not nilpotent".into()));
    }
    let inv = gcompose(&sum, &dinv)?;
    if !is_inverse_pair(f, &inv)? {
        return Err(GeoError::NotTriangular("series does not invert f".into()));
    }
    Ok(inv)
}

/// `g f = 1` and `f g = 1` after free reduction of paths.
pub fn is_inverse_pair(f: &GeometricMorphism, g: &GeometricMorphism) -> Result<bool, GeoError> {
    let a = reduce_paths(&gcompose(f, g)?);
    let b = reduce_paths(&gcompose(g, f)?);
    Ok(a == GeometricMorphism::identity(&f.source) && b == GeometricMorphism::identity(&f.target))
}

/// `(paths starting over Y, the others)`.
pub fn split_by_support(
    rm: &ReferenceMap,
    f: &GeometricMorphism,
    ys: &BTreeSet<Label>,
) -> Result<(GeometricMorphism, GeometricMorphism), GeoError> {
    let mut fy = GeometricMorphism::zero(&f.source, &f.target);
    let mut rest = fy.clone();
    for (k, c) in &f.paths {
        if ys.contains(rm.project(&k.via[0])?) {
            fy.paths.insert(k.clone(), c.clone());
        } else {
            rest.paths.insert(k.clone(), c.clone());
        }
    }
    Ok((fy, rest))
}

/// Factor `d = 1 + u` as `d = d₂ ∘ d₁` with `d₁` the identity over `Y`
/// (it keeps the part of `u` starting off `Y`) and `d₂ = d d₁^{-1}`, which is the
/// identity on basis elements outside `Y^{3ε}`.
pub fn factor_unipotent(
    rm: &ReferenceMap,
    d: &GeometricMorphism,
    p: &Poset,
    ys: &BTreeSet<Label>,
    eps: f64,
) -> Result<(GeometricMorphism, GeometricMorphism), GeoError> {
    if d.source != d.target {
        return Err(GeoError::NotUnipotent("source and target differ".into()));
    }
    let one = GeometricMorphism::identity(&d.source);
    let u = d.sub(&one)?;
    for k in u.paths.keys() {
        if !p.lt(&k.from, &k.to) {
            return Err(GeoError::NotUnipotent(format!("path {:?} -> {:?} is not increasing", k.from, k.to)));
        }
    }
    let loc = d.source.x_locations(rm)?;
    let rep = is_epsilon_bounded(p, &loc, eps, &rm.x)?;
    if let Some(v) = rep.violating_element {
        return Err(GeoError::NotEpsilonBounded(v));
    }
    let (_, u_off) = split_by_support(rm, &u, ys)?;
    let d1 = one.add(&u_off)?;
    let d1inv = controlled_triangular_inverse(rm, &d1, p, eps)?;
    let d2 = reduce_paths(&gcompose(&d1inv, d)?);
    Ok((d1, d2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_rm(n: usize) -> ReferenceMap {
        ReferenceMap::identity(ControlSpace::line(n))
    }

    fn module(ring: &Ring, n: usize) -> GeometricModule {
        GeometricModule::new(ring, (0..n).map(|i| (format!("b{i}"), i.to_string())).collect())
    }

    fn walk(a: usize, b: usize) -> Vec<Label> {
        if a <= b {
            (a..=b).map(|i| i.to_string()).collect()
        } else {
            (b..=a).rev().map(|i| i.to_string()).collect()
        }
    }

    fn gpath(ring: &Ring, c: i64, a: usize, b: usize) -> GPath {
        GPath { coeff: ring.from_int(c), from: format!("b{a}"), to: format!("b{b}"), via: walk(a, b) }
    }

    #[test]
    fn compose_multiplies_and_cancels() {
        let z = Ring::Z;
        let rm = line_rm(3);
        let m = module(&z, 3);
        let f = GeometricMorphism::new(&m, &m, [gpath(&z, 2, 0, 1)]).unwrap();
        let g = GeometricMorphism::new(&m, &m, [gpath(&z, 3, 1, 2)]).unwrap();
        let gf = gcompose(&f, &g).unwrap();
        assert_eq!(gf.paths(), vec![GPath { coeff: z.from_int(6), from: "b0".into(), to: "b2".into(), via: walk(0, 2) }]);
        assert!(gradius(&rm, &gf).unwrap() <= gradius(&rm, &f).unwrap() + gradius(&rm, &g).unwrap());
        let h = GeometricMorphism::new(&m, &m, [gpath(&z, 1, 0, 1), gpath(&z, -1, 0, 1)]).unwrap();
        assert!(h.is_zero());
        assert_eq!(gradius(&rm, &h).unwrap(), 0.0);
    }

    #[test]
    fn restriction_and_homotopy() {
        let z = Ring::Z;
        let rm = line_rm(3);
        let m = module(&z, 3);
        let f = GeometricMorphism::new(&m, &m, [gpath(&z, 1, 0, 1), gpath(&z, 1, 1, 2)]).unwrap();
        assert_eq!(grestrict(&rm, &f, &rm.x.all_points()).unwrap(), f);
        assert!(grestrict(&rm, &f, &BTreeSet::new()).unwrap().is_zero());
        let h = GeometricHomotopy::constant(&f);
        assert_eq!(apply_homotopy(&f, &h).unwrap(), f);
        let bent = GeometricHomotopy::new(vec![
            Track { from: "b0".into(), to: "b1".into(), stages: vec![vec!["0".into(), "0".into(), "1".into()], vec!["0".into(), "1".into(), "1".into()]] },
        ])
        .unwrap();
        let g = GeometricMorphism::new(&m, &m, [GPath { coeff: z.one(), from: "b0".into(), to: "b1".into(), via: vec!["0".into(), "0".into(), "1".into()] }]).unwrap();
        let moved = apply_homotopy(&g, &bent).unwrap();
        assert_eq!(apply_homotopy(&moved, &bent.reversed()).unwrap(), g);
        assert!(matches!(apply_homotopy(&f, &bent), Err(GeoError::TrackMismatch(_))));
    }

    #[test]
    fn forget_control_on_a_triangle() {
        let z = Ring::Z;
        let e = ControlSpace::from_doc(&SpaceDoc {
            points: vec!["a".into(), "b".into(), "c".into()],
            metric: MetricDoc::Graph { edges: vec![("a".into(), "b".into(), 1.0), ("b".into(), "c".into(), 1.0), ("c".into(), "a".into(), 1.0)] },
            frontier: vec![],
        })
        .unwrap();
        let rm = ReferenceMap::identity(e);
        let data = LoopData {
            basepoint: "a".into(),
            tree: vec![("a".into(), "b".into()), ("b".into(), "c".into())],
            generators: BTreeMap::from([(("c".into(), "a".into()), 1)]),
        };
        let m = GeometricModule::from_pairs(&z, &[("x", "a")]);
        let lp = |via: &[&str]| GPath { coeff: z.one(), from: "x".into(), to: "x".into(), via: via.iter().map(|s| s.to_string()).collect() };
        let f = GeometricMorphism::new(&m, &m, [lp(&["a", "b", "c", "a"])]).unwrap();
        let lr = Ring::Laurent;
        let ff = forget_control(&rm, &f, &data, &lr).unwrap();
        assert_eq!(ff.get("x", "x"), Some(&lr.t_pow(1).unwrap()));
        let tree_path = GeometricMorphism::new(&m, &m, [lp(&["a", "b", "a"])]).unwrap();
        assert_eq!(forget_control(&rm, &tree_path, &data, &lr).unwrap().get("x", "x"), Some(&lr.one()));
        let ff2 = forget_control(&rm, &gcompose(&f, &f).unwrap(), &data, &lr).unwrap();
        assert_eq!(ff2, ff.after(&ff).unwrap());
    }

    #[test]
    fn single_edge_and_triangle_cells() {
        let k = SimplicialComplex {
            coords: BTreeMap::from([("a".into(), vec![0.0]), ("b".into(), vec![0.5])]),
            simplices: vec![vec!["a".into(), "b".into()]],
        };
        let cc = cellular_chains(&k).unwrap();
        let b = cc.complex.c(1).algebraic().unwrap();
        assert_eq!(b.get("b", "a|b"), Some(&Ring::Z.one()));
        assert_eq!(b.get("a", "a|b"), Some(&Ring::Z.from_int(-1)));

        let h = 0.9 * 3f64.sqrt() / 2.0;
        let t = SimplicialComplex {
            coords: BTreeMap::from([("a".into(), vec![0.0, 0.0]), ("b".into(), vec![0.9, 0.0]), ("c".into(), vec![0.45, h])]),
            simplices: vec![vec!["a".into(), "b".into(), "c".into()]],
        };
        let cc = cellular_chains(&t).unwrap();
        let r = &cc.report;
        assert!(r.algebraic_square_zero && r.pairing_complete);
        assert_eq!(r.composite_paths, 6);
        assert!(r.boundary_radius < 0.9 && r.pairing_radius < 1.8);
        let w = cc.nullhomotopies.clone();
        let rep = validate_controlled(&cc.reference, Controlled::Complex { complex: &cc.complex, witnesses: &w }, 0.9 + 1e-9).unwrap();
        assert!(rep.ok(), "{:?}", rep.failures());
    }

    #[test]
    fn unipotent_inverse_and_shift_example() {
        let z = Ring::Z;
        let rm = line_rm(4);
        let m = module(&z, 4);
        let names: Vec<Label> = (0..4).map(|i| format!("b{i}")).collect();
        let order = Poset::chain(&names);
        let one = GeometricMorphism::identity(&m);
        let u = GeometricMorphism::new(&m, &m, [gpath(&z, 1, 0, 1)]).unwrap();
        let f = one.add(&u).unwrap();
        let near = crate::posets::find_common_order(names.clone(), &[("b0".into(), "b1".into())]).unwrap();
        let inv = controlled_triangular_inverse(&rm, &f, &near, 1.5).unwrap();
        assert_eq!(inv, one.sub(&u).unwrap());
        // shift on the whole line: the chain order is not bounded at small eps
        let shift = GeometricMorphism::new(&m, &m, (0..3).map(|i| gpath(&z, 1, i, i + 1))).unwrap();
        let g = one.add(&shift).unwrap();
        assert!(matches!(controlled_triangular_inverse(&rm, &g, &order, 1.5), Err(GeoError::NotEpsilonBounded(_))));
        let ginv = controlled_triangular_inverse(&rm, &g, &order, 3.5).unwrap();
        assert_eq!(gradius(&rm, &ginv).unwrap(), 3.0);
    }

    #[test]
    fn factor_unipotent_cases() {
        let z = Ring::Z;
        let rm = line_rm(8);
        let m = module(&z, 8);
        let names: Vec<Label> = (0..8).map(|i| format!("b{i}")).collect();
        let pairs = [("b0".to_string(), "b1".to_string()), ("b6".to_string(), "b7".to_string())];
        let p = crate::posets::find_common_order(names, &pairs).unwrap();
        let one = GeometricMorphism::identity(&m);
        let d = one.add(&GeometricMorphism::new(&m, &m, [gpath(&z, 1, 0, 1), gpath(&z, 1, 6, 7)]).unwrap()).unwrap();
        let ys: BTreeSet<Label> = ["0", "1"].iter().map(|s| s.to_string()).collect();
        let (d1, d2) = factor_unipotent(&rm, &d, &p, &ys, 1.5).unwrap();
        assert_eq!(reduce_paths(&gcompose(&d1, &d2).unwrap()), d);
        assert!(is_identity_at(&d1, "b0"));
        assert!(is_identity_at(&d2, "b6"));
        // u entirely over Y: d1 is the identity and d2 = d
        let dy = one.add(&GeometricMorphism::new(&m, &m, [gpath(&z, 1, 0, 1)]).unwrap()).unwrap();
        let (a, b) = factor_unipotent(&rm, &dy, &p, &ys, 1.5).unwrap();
        assert_eq!((a, b), (one.clone(), dy.clone()));
        // u entirely off Y: d1 = d and d2 is the identity
        let dn = one.add(&GeometricMorphism::new(&m, &m, [gpath(&z, 1, 6, 7)]).unwrap()).unwrap();
        let (a, b) = factor_unipotent(&rm, &dn, &p, &ys, 1.5).unwrap();
        assert_eq!((a, b), (dn, one));
    }
}
