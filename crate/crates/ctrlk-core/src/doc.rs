//! Self-describing JSON documents (`"schema": "ctrlk/1"`) and their conversions.
//!
//! Every document is an object with `schema`, `kind` and kind-specific fields.
//! Canonical text is pretty JSON with sorted keys and a trailing newline.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::chains::{ChainComplex, ChainError, Contraction};
use crate::control::{ControlError, ControlSpace, SpaceDoc};
use crate::geometric::{
    GeoError, GeometricComplex, GeometricHomotopy, GeometricModule, GeometricMorphism, GPath, ReferenceMap,
    SimplicialComplex, Track,
};
use crate::ksimplex::{K1Control, K1SimplexData, KError, SignMode, VolodinPath};
use crate::morphisms::{BasedModule, EntryDoc, MorphError, Morphism, MorphismDoc};
use crate::posets::{Poset, PosetDoc, PosetError};
use crate::rings::{Ring, RingDoc, RingError, UnitKind};
use crate::Label;

pub const SCHEMA: &str = "ctrlk/1";
/// The only accepted sign convention: signs live in the suspension.
pub const SIGN_CONVENTION: &str = "suspension";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DocError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error("sign convention {0:?} is not supported; only \"suspension\" is")]
    SignConvention(String),
    #[error("unknown document kind {0:?}")]
    UnknownKind(String),
    #[error("invalid document: {0}")]
    Invalid(String),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Morph(#[from] MorphError),
    #[error(transparent)]
    Poset(#[from] PosetError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    K(#[from] KError),
}

impl From<serde_json::Error> for DocError {
    fn from(e: serde_json::Error) -> Self {
        DocError::Json(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingBody {
    pub ring: RingDoc,
}

/// A chain complex; `boundary[d]: C_d -> C_{d-1}`, `contraction[d]: C_d -> C_{d+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexBody {
    pub modules: BTreeMap<i64, Vec<Label>>,
    #[serde(default)]
    pub boundary: BTreeMap<i64, MorphismDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contraction: Option<BTreeMap<i64, MorphismDoc>>,
    /// Basis locations in a control space, for controlled K₁ data.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub locations: BTreeMap<i64, BTreeMap<Label, Label>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexDoc {
    pub ring: RingDoc,
    pub complex: ComplexBody,
}

/// A morphism with its triangularity data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphismBody {
    pub ring: RingDoc,
    pub morphism: MorphismDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_order: Option<PosetDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_order: Option<PosetDoc>,
    #[serde(default = "default_unit")]
    pub unit: UnitKind,
}

fn default_unit() -> UnitKind {
    UnitKind::PlusMinusOne
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimplicialBody {
    pub coords: BTreeMap<Label, Vec<f64>>,
    pub simplices: Vec<Vec<Label>>,
}

/// `p: E -> X`; without `x` the map is the identity of `e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceDoc {
    pub e: SpaceDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<SpaceDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<BTreeMap<Label, Label>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisDoc {
    pub id: Label,
    pub at: Label,
}

/// Geometric module: basis elements with their locations in `E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleDoc {
    pub basis: Vec<BasisDoc>,
}

impl ModuleDoc {
    pub fn to_module(&self, ring: &Ring) -> Result<GeometricModule, DocError> {
        let mut at = BTreeMap::new();
        for b in &self.basis {
            if at.insert(b.id.clone(), b.at.clone()).is_some() {
                return Err(DocError::Invalid(format!("duplicate basis element {:?}", b.id)));
            }
        }
        Ok(GeometricModule::new(ring, at))
    }

    pub fn from_module(m: &GeometricModule) -> ModuleDoc {
        ModuleDoc {
            basis: m.locations().iter().map(|(id, at)| BasisDoc { id: id.clone(), at: at.clone() }).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathDoc {
    pub from: Label,
    pub to: Label,
    pub via: Vec<Label>,
    pub coeff: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackDoc {
    pub from: Label,
    pub to: Label,
    pub stages: Vec<Vec<Label>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoMorphismBody {
    pub source: ModuleDoc,
    pub target: ModuleDoc,
    #[serde(default)]
    pub paths: Vec<PathDoc>,
}

/// A geometric morphism with optional order, subset and scale for the triangular
/// and localization commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoMorphismDoc {
    pub ring: RingDoc,
    pub reference: ReferenceDoc,
    pub morphism: GeoMorphismBody,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<PosetDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<Vec<Label>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

/// A geometric complex with optional contraction and witness homotopies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoComplexDoc {
    pub ring: RingDoc,
    pub reference: ReferenceDoc,
    pub modules: BTreeMap<i64, ModuleDoc>,
    #[serde(default)]
    pub boundary: BTreeMap<i64, Vec<PathDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contraction: Option<BTreeMap<i64, Vec<PathDoc>>>,
    /// Tracks moving `c c` in degree `d` to zero.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub witnesses: BTreeMap<i64, Vec<TrackDoc>>,
    /// Tracks moving `c ξ + ξ c` in degree `d` to the identity.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub contraction_witnesses: BTreeMap<i64, Vec<TrackDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoIsoDoc {
    pub ring: RingDoc,
    pub reference: ReferenceDoc,
    pub module: ModuleDoc,
    pub f: Vec<PathDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse: Option<Vec<PathDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_a: Option<Vec<TrackDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_b: Option<Vec<TrackDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeDoc {
    #[serde(rename = "one")]
    One,
    #[serde(rename = "pm")]
    PlusMinus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolodinDoc {
    pub ring: RingDoc,
    pub k: usize,
    pub mode: ModeDoc,
    pub matrices: Vec<Vec<Vec<Value>>>,
}

/// Chain map `c_{from,to}` degree by degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDoc {
    pub from: usize,
    pub to: usize,
    pub degrees: BTreeMap<i64, Vec<EntryDoc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlDoc {
    pub space: SpaceDoc,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct K1Body {
    pub complexes: Vec<ComplexBody>,
    #[serde(default)]
    pub maps: Vec<MapDoc>,
    pub orders: Vec<BTreeMap<i64, PosetDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct K1SimplexDoc {
    pub ring: RingDoc,
    pub simplex: K1Body,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct K1MorphismDoc {
    pub ring: RingDoc,
    pub source: K1Body,
    pub target: K1Body,
    pub maps: Vec<MapDoc>,
}

/// Order certificates to substitute into a K₁ simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrdersDoc {
    pub orders: Vec<BTreeMap<i64, PosetDoc>>,
}

/// A computed set of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetDoc {
    pub points: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Ring(RingBody),
    Space(SpaceDoc),
    Poset(PosetDoc),
    Morphism(MorphismBody),
    Complex(ComplexDoc),
    Simplicial(SimplicialBody),
    GeometricMorphism(GeoMorphismDoc),
    GeometricComplex(GeoComplexDoc),
    GeometricIsomorphism(GeoIsoDoc),
    Volodin(VolodinDoc),
    K1Simplex(K1SimplexDoc),
    K1Morphism(K1MorphismDoc),
    Orders(OrdersDoc),
    Set(SetDoc),
}

impl Body {
    pub fn kind(&self) -> &'static str {
        match self {
            Body::Ring(_) => "ring",
            Body::Space(_) => "space",
            Body::Poset(_) => "poset",
            Body::Morphism(_) => "morphism",
            Body::Complex(_) => "complex",
            Body::Simplicial(_) => "simplicial",
            Body::GeometricMorphism(_) => "geometric_morphism",
            Body::GeometricComplex(_) => "geometric_complex",
            Body::GeometricIsomorphism(_) => "geometric_isomorphism",
            Body::Volodin(_) => "volodin",
            Body::K1Simplex(_) => "k1_simplex",
            Body::K1Morphism(_) => "k1_morphism",
            Body::Orders(_) => "orders",
            Body::Set(_) => "set",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    /// `Some` only when the input declared it explicitly.
    pub sign_convention: Option<String>,
    pub body: Body,
}

impl Document {
    pub fn new(body: Body) -> Self {
        Document { sign_convention: None, body }
    }

    pub fn parse(text: &str) -> Result<Document, DocError> {
        let v: Value = serde_json::from_str(text)?;
        Document::from_value(v)
    }

    pub fn from_value(v: Value) -> Result<Document, DocError> {
        let Value::Object(mut obj) = v else {
            return Err(DocError::Schema("a document is a JSON object".into()));
        };
        match obj.remove("schema") {
            Some(Value::String(s)) if s == SCHEMA => {}
            Some(other) => return Err(DocError::Schema(format!("expected {SCHEMA:?}, found {other}"))),
            None => return Err(DocError::Schema("missing \"schema\"".into())),
        }
        let sign_convention = match obj.remove("sign_convention") {
            None => None,
            Some(Value::String(s)) if s == SIGN_CONVENTION => Some(s),
            Some(Value::String(s)) => return Err(DocError::SignConvention(s)),
            Some(other) => return Err(DocError::SignConvention(other.to_string())),
        };
        let kind = match obj.remove("kind") {
            Some(Value::String(s)) => s,
            _ => return Err(DocError::Schema("missing \"kind\"".into())),
        };
        let rest = Value::Object(obj);
        let body = match kind.as_str() {
            "ring" => Body::Ring(serde_json::from_value(rest)?),
            "space" => Body::Space(serde_json::from_value(rest)?),
            "poset" => Body::Poset(serde_json::from_value(rest)?),
            "morphism" => Body::Morphism(serde_json::from_value(rest)?),
            "complex" => Body::Complex(serde_json::from_value(rest)?),
            "simplicial" => Body::Simplicial(serde_json::from_value(rest)?),
            "geometric_morphism" => Body::GeometricMorphism(serde_json::from_value(rest)?),
            "geometric_complex" => Body::GeometricComplex(serde_json::from_value(rest)?),
            "geometric_isomorphism" => Body::GeometricIsomorphism(serde_json::from_value(rest)?),
            "volodin" => Body::Volodin(serde_json::from_value(rest)?),
            "k1_simplex" => Body::K1Simplex(serde_json::from_value(rest)?),
            "k1_morphism" => Body::K1Morphism(serde_json::from_value(rest)?),
            "orders" => Body::Orders(serde_json::from_value(rest)?),
            "set" => Body::Set(serde_json::from_value(rest)?),
            other => return Err(DocError::UnknownKind(other.to_string())),
        };
        Ok(Document { sign_convention, body })
    }

    pub fn to_value(&self) -> Value {
        let inner = match &self.body {
            Body::Ring(b) => serde_json::to_value(b),
            Body::Space(b) => serde_json::to_value(b),
            Body::Poset(b) => serde_json::to_value(b),
            Body::Morphism(b) => serde_json::to_value(b),
            Body::Complex(b) => serde_json::to_value(b),
            Body::Simplicial(b) => serde_json::to_value(b),
            Body::GeometricMorphism(b) => serde_json::to_value(b),
            Body::GeometricComplex(b) => serde_json::to_value(b),
            Body::GeometricIsomorphism(b) => serde_json::to_value(b),
            Body::Volodin(b) => serde_json::to_value(b),
            Body::K1Simplex(b) => serde_json::to_value(b),
            Body::K1Morphism(b) => serde_json::to_value(b),
            Body::Orders(b) => serde_json::to_value(b),
            Body::Set(b) => serde_json::to_value(b),
        };
        let Value::Object(mut obj) = inner.expect("document bodies serialize") else {
            unreachable!("document bodies are structs")
        };
        obj.insert("schema".into(), Value::from(SCHEMA));
        obj.insert("kind".into(), Value::from(self.body.kind()));
        if let Some(s) = &self.sign_convention {
            obj.insert("sign_convention".into(), Value::from(s.as_str()));
        }
        Value::Object(obj)
    }

    pub fn canonical(&self) -> String {
        canonical_json(&self.to_value())
    }
}

/// Pretty JSON with sorted object keys and a trailing newline.
pub fn canonical_json(v: &Value) -> String {
    // serde_json's map is ordered by key, so re-parsing through Value sorts everything
    let sorted: Value = serde_json::from_str(&v.to_string()).expect("valid JSON");
    let mut s = serde_json::to_string_pretty(&sorted).expect("serializable");
    s.push('\n');
    s
}

pub fn ring_of(d: &RingDoc) -> Result<Ring, DocError> {
    Ok(Ring::from_descriptor(d)?)
}

fn entries_to_morphism(ring: &Ring, s: &BasedModule, t: &BasedModule, es: &[EntryDoc]) -> Result<Morphism, DocError> {
    let doc = MorphismDoc { source: s.basis().to_vec(), target: t.basis().to_vec(), entries: es.to_vec() };
    Ok(Morphism::from_doc(ring, &doc)?)
}

pub fn morphism_entries(m: &Morphism) -> Vec<EntryDoc> {
    m.to_doc().entries
}

/// A morphism document between the given modules; the label sets must agree.
fn doc_to_morphism(ring: &Ring, s: &BasedModule, t: &BasedModule, doc: &MorphismDoc) -> Result<Morphism, DocError> {
    Ok(Morphism::from_doc(ring, doc)?.with_modules(s, t)?)
}

impl ComplexBody {
    pub fn to_complex(&self, ring: &Ring) -> Result<(ChainComplex, Option<Contraction>), DocError> {
        let mut modules = BTreeMap::new();
        for (d, ls) in &self.modules {
            let mut m = BasedModule::new(ring, ls.clone())?;
            if let Some(loc) = self.locations.get(d) {
                m = m.with_location(loc.clone())?;
            }
            modules.insert(*d, m);
        }
        if let Some(d) = self.locations.keys().find(|d| !self.modules.contains_key(d)) {
            return Err(DocError::Invalid(format!("locations given for empty degree {d}")));
        }
        let get = |d: i64| modules.get(&d).cloned().unwrap_or_else(|| BasedModule::zero(ring));
        let mut bnd = BTreeMap::new();
        for (d, m) in &self.boundary {
            bnd.insert(*d, doc_to_morphism(ring, &get(*d), &get(d - 1), m)?);
        }
        let c = ChainComplex::new(ring, modules.clone(), bnd)?;
        let xi = match &self.contraction {
            None => None,
            Some(m) => {
                let mut maps = BTreeMap::new();
                for (d, md) in m {
                    maps.insert(*d, doc_to_morphism(ring, &get(*d), &get(d + 1), md)?);
                }
                Some(Contraction::new(&c, maps)?)
            }
        };
        Ok((c, xi))
    }

    pub fn from_complex(c: &ChainComplex, xi: Option<&Contraction>) -> ComplexBody {
        let modules = c.modules().iter().map(|(d, m)| (*d, m.basis().to_vec())).collect();
        let locations = c
            .modules()
            .iter()
            .filter_map(|(d, m)| m.location().map(|l| (*d, l.clone())))
            .collect();
        let boundary = c
            .boundaries()
            .iter()
            .filter(|(_, m)| !m.is_zero())
            .map(|(d, m)| (*d, m.to_doc()))
            .collect();
        let contraction = xi.map(|x| {
            x.maps().iter().filter(|(_, m)| !m.is_zero()).map(|(d, m)| (*d, m.to_doc())).collect()
        });
        ComplexBody { modules, boundary, contraction, locations }
    }
}

impl ComplexDoc {
    pub fn from_complex(c: &ChainComplex, xi: Option<&Contraction>) -> ComplexDoc {
        ComplexDoc { ring: c.ring.to_descriptor(), complex: ComplexBody::from_complex(c, xi) }
    }

    pub fn to_complex(&self) -> Result<(Ring, ChainComplex, Option<Contraction>), DocError> {
        let ring = ring_of(&self.ring)?;
        let (c, x) = self.complex.to_complex(&ring)?;
        Ok((ring, c, x))
    }
}

impl MorphismBody {
    pub fn to_parts(&self) -> Result<(Ring, Morphism, Option<Poset>, Option<Poset>), DocError> {
        let ring = ring_of(&self.ring)?;
        let m = Morphism::from_doc(&ring, &self.morphism)?;
        let pt = self.target_order.as_ref().map(Poset::from_doc).transpose()?;
        let ps = self.source_order.as_ref().map(Poset::from_doc).transpose()?;
        Ok((ring, m, pt, ps))
    }
}

impl ReferenceDoc {
    pub fn to_reference(&self) -> Result<ReferenceMap, DocError> {
        let e = ControlSpace::from_doc(&self.e)?;
        match (&self.x, &self.projection) {
            (None, None) => Ok(ReferenceMap::identity(e)),
            (Some(x), Some(p)) => Ok(ReferenceMap::new(e, ControlSpace::from_doc(x)?, p.clone())?),
            _ => Err(DocError::Invalid("reference needs both x and projection, or neither".into())),
        }
    }

    pub fn identity(space: SpaceDoc) -> ReferenceDoc {
        ReferenceDoc { e: space, x: None, projection: None }
    }
}

pub fn space_doc(x: &ControlSpace) -> Result<SpaceDoc, DocError> {
    x.to_doc().cloned().ok_or_else(|| DocError::Invalid("space has no document form".into()))
}

fn paths_to(ring: &Ring, s: &GeometricModule, t: &GeometricModule, ps: &[PathDoc]) -> Result<GeometricMorphism, DocError> {
    let mut out = Vec::with_capacity(ps.len());
    for p in ps {
        out.push(GPath { coeff: ring.elem_from_json(&p.coeff)?, from: p.from.clone(), to: p.to.clone(), via: p.via.clone() });
    }
    Ok(GeometricMorphism::new(s, t, out)?)
}

pub fn path_docs(f: &GeometricMorphism) -> Vec<PathDoc> {
    let ring = f.ring();
    f.paths()
        .into_iter()
        .map(|p| PathDoc { coeff: ring.elem_to_json(&p.coeff), from: p.from, to: p.to, via: p.via })
        .collect()
}

fn tracks_to(ts: &[TrackDoc]) -> Result<GeometricHomotopy, DocError> {
    let tracks = ts
        .iter()
        .map(|t| Track { from: t.from.clone(), to: t.to.clone(), stages: t.stages.clone() })
        .collect();
    Ok(GeometricHomotopy::new(tracks)?)
}

pub fn track_docs(h: &GeometricHomotopy) -> Vec<TrackDoc> {
    let mut out: Vec<TrackDoc> = h
        .tracks
        .iter()
        .map(|t| TrackDoc { from: t.from.clone(), to: t.to.clone(), stages: t.stages.clone() })
        .collect();
    out.sort_by(|a, b| (&a.from, &a.to, &a.stages).cmp(&(&b.from, &b.to, &b.stages)));
    out
}

/// Parsed geometric morphism document.
pub struct GeoMorphismParts {
    pub ring: Ring,
    pub rm: ReferenceMap,
    pub f: GeometricMorphism,
    pub order: Option<Poset>,
    pub subset: Option<BTreeSet<Label>>,
    pub epsilon: Option<f64>,
}

impl GeoMorphismDoc {
    pub fn to_parts(&self) -> Result<GeoMorphismParts, DocError> {
        let ring = ring_of(&self.ring)?;
        let rm = self.reference.to_reference()?;
        let s = self.morphism.source.to_module(&ring)?;
        let t = self.morphism.target.to_module(&ring)?;
        s.check(&rm)?;
        t.check(&rm)?;
        let f = paths_to(&ring, &s, &t, &self.morphism.paths)?;
        f.check_walks(&rm)?;
        let order = self.order.as_ref().map(Poset::from_doc).transpose()?;
        let subset = match &self.subset {
            None => None,
            Some(v) => {
                for p in v {
                    rm.x.idx(p)?;
                }
                Some(v.iter().cloned().collect())
            }
        };
        Ok(GeoMorphismParts { ring, rm, f, order, subset, epsilon: self.epsilon })
    }
}

pub fn geo_morphism_body(f: &GeometricMorphism) -> GeoMorphismBody {
    GeoMorphismBody {
        source: ModuleDoc::from_module(f.source()),
        target: ModuleDoc::from_module(f.target()),
        paths: path_docs(f),
    }
}

/// Parsed geometric complex document.
pub struct GeoComplexParts {
    pub rm: ReferenceMap,
    pub complex: GeometricComplex,
    pub contraction: Option<BTreeMap<i64, GeometricMorphism>>,
    pub witnesses: BTreeMap<i64, GeometricHomotopy>,
    pub contraction_witnesses: BTreeMap<i64, GeometricHomotopy>,
    pub epsilon: Option<f64>,
}

impl GeoComplexDoc {
    pub fn to_parts(&self) -> Result<GeoComplexParts, DocError> {
        let ring = ring_of(&self.ring)?;
        let rm = self.reference.to_reference()?;
        let modules: BTreeMap<i64, GeometricModule> =
            self.modules.iter().map(|(d, m)| Ok((*d, m.to_module(&ring)?))).collect::<Result<_, DocError>>()?;
        for m in modules.values() {
            m.check(&rm)?;
        }
        let get = |d: i64| modules.get(&d).cloned().unwrap_or_else(|| GeometricModule::new(&ring, BTreeMap::new()));
        let mut boundary = BTreeMap::new();
        for (d, ps) in &self.boundary {
            let f = paths_to(&ring, &get(*d), &get(d - 1), ps)?;
            f.check_walks(&rm)?;
            boundary.insert(*d, f);
        }
        let contraction = match &self.contraction {
            None => None,
            Some(m) => {
                let mut out = BTreeMap::new();
                for (d, ps) in m {
                    let f = paths_to(&ring, &get(*d), &get(d + 1), ps)?;
                    f.check_walks(&rm)?;
                    out.insert(*d, f);
                }
                Some(out)
            }
        };
        let tr = |m: &BTreeMap<i64, Vec<TrackDoc>>| -> Result<BTreeMap<i64, GeometricHomotopy>, DocError> {
            m.iter().map(|(d, t)| Ok((*d, tracks_to(t)?))).collect()
        };
        Ok(GeoComplexParts {
            rm,
            complex: GeometricComplex { ring: ring.clone(), modules, boundary },
            contraction,
            witnesses: tr(&self.witnesses)?,
            contraction_witnesses: tr(&self.contraction_witnesses)?,
            epsilon: self.epsilon,
        })
    }

    pub fn from_parts(
        reference: ReferenceDoc,
        complex: &GeometricComplex,
        witnesses: &BTreeMap<i64, GeometricHomotopy>,
        epsilon: Option<f64>,
    ) -> GeoComplexDoc {
        GeoComplexDoc {
            ring: complex.ring.to_descriptor(),
            reference,
            modules: complex.modules.iter().map(|(d, m)| (*d, ModuleDoc::from_module(m))).collect(),
            boundary: complex.boundary.iter().map(|(d, f)| (*d, path_docs(f))).collect(),
            contraction: None,
            witnesses: witnesses.iter().map(|(d, h)| (*d, track_docs(h))).collect(),
            contraction_witnesses: BTreeMap::new(),
            epsilon,
        }
    }
}

/// Parsed isomorphism document.
pub struct GeoIsoParts {
    pub rm: ReferenceMap,
    pub f: GeometricMorphism,
    pub inverse: Option<GeometricMorphism>,
    pub h_a: Option<GeometricHomotopy>,
    pub h_b: Option<GeometricHomotopy>,
    pub epsilon: Option<f64>,
}

impl GeoIsoDoc {
    pub fn to_parts(&self) -> Result<GeoIsoParts, DocError> {
        let ring = ring_of(&self.ring)?;
        let rm = self.reference.to_reference()?;
        let m = self.module.to_module(&ring)?;
        m.check(&rm)?;
        let f = paths_to(&ring, &m, &m, &self.f)?;
        let inverse = self.inverse.as_ref().map(|p| paths_to(&ring, &m, &m, p)).transpose()?;
        let h_a = self.h_a.as_ref().map(|t| tracks_to(t)).transpose()?;
        let h_b = self.h_b.as_ref().map(|t| tracks_to(t)).transpose()?;
        Ok(GeoIsoParts { rm, f, inverse, h_a, h_b, epsilon: self.epsilon })
    }
}

impl SimplicialBody {
    pub fn to_complex(&self) -> SimplicialComplex {
        SimplicialComplex { coords: self.coords.clone(), simplices: self.simplices.clone() }
    }
}

impl VolodinDoc {
    pub fn to_path(&self) -> Result<VolodinPath, DocError> {
        let ring = ring_of(&self.ring)?;
        let mut ms = Vec::with_capacity(self.matrices.len());
        for m in &self.matrices {
            let mut rows = Vec::with_capacity(m.len());
            for r in m {
                rows.push(r.iter().map(|v| ring.elem_from_json(v)).collect::<Result<Vec<_>, _>>()?);
            }
            ms.push(rows);
        }
        let mode = match self.mode {
            ModeDoc::One => SignMode::One,
            ModeDoc::PlusMinus => SignMode::PlusMinus,
        };
        Ok(VolodinPath::new(&ring, self.k, ms, mode)?)
    }

    pub fn from_path(v: &VolodinPath) -> VolodinDoc {
        VolodinDoc {
            ring: v.ring.to_descriptor(),
            k: v.k,
            mode: match v.mode {
                SignMode::One => ModeDoc::One,
                SignMode::PlusMinus => ModeDoc::PlusMinus,
            },
            matrices: v
                .matrices
                .iter()
                .map(|m| m.iter().map(|r| r.iter().map(|x| v.ring.elem_to_json(x)).collect()).collect())
                .collect(),
        }
    }
}

fn orders_from(docs: &[BTreeMap<i64, PosetDoc>]) -> Result<Vec<BTreeMap<i64, Poset>>, DocError> {
    docs.iter()
        .map(|m| m.iter().map(|(d, p)| Ok((*d, Poset::from_doc(p)?))).collect())
        .collect()
}

fn maps_from(
    ring: &Ring,
    maps: &[MapDoc],
    src: &[ChainComplex],
    tgt: &[ChainComplex],
) -> Result<BTreeMap<(usize, usize), BTreeMap<i64, Morphism>>, DocError> {
    let mut out = BTreeMap::new();
    for m in maps {
        let (Some(a), Some(b)) = (src.get(m.from), tgt.get(m.to)) else {
            return Err(DocError::Invalid(format!("map {} -> {} names a missing vertex", m.from, m.to)));
        };
        let mut per = BTreeMap::new();
        for d in a.degrees().into_iter().chain(b.degrees()) {
            per.insert(d, Morphism::zero(&a.module(d), &b.module(d)));
        }
        for (d, es) in &m.degrees {
            per.insert(*d, entries_to_morphism(ring, &a.module(*d), &b.module(*d), es)?);
        }
        if out.insert((m.from, m.to), per).is_some() {
            return Err(DocError::Invalid(format!("map {} -> {} given twice", m.from, m.to)));
        }
    }
    Ok(out)
}

impl K1Body {
    pub fn to_data(&self, ring: &Ring) -> Result<K1SimplexData, DocError> {
        let mut complexes = Vec::new();
        let mut contractions = Vec::new();
        for (i, c) in self.complexes.iter().enumerate() {
            let (cx, x) = c.to_complex(ring)?;
            let x = x.ok_or_else(|| KError::MissingCertificate(format!("contraction of complex {i}")))?;
            complexes.push(cx);
            contractions.push(x);
        }
        let maps = maps_from(ring, &self.maps, &complexes, &complexes)?;
        if let Some(k) = maps.keys().find(|(a, b)| a >= b) {
            return Err(DocError::Invalid(format!("map {} -> {} does not go forward", k.0, k.1)));
        }
        let control = match &self.control {
            None => None,
            Some(c) => Some(K1Control { space: ControlSpace::from_doc(&c.space)?, eps: c.epsilon }),
        };
        Ok(K1SimplexData { ring: ring.clone(), complexes, contractions, maps, orders: orders_from(&self.orders)?, control })
    }

    pub fn from_data(s: &K1SimplexData) -> K1Body {
        K1Body {
            complexes: s
                .complexes
                .iter()
                .zip(&s.contractions)
                .map(|(c, x)| ComplexBody::from_complex(c, Some(x)))
                .collect(),
            maps: map_docs(&s.maps),
            orders: s.orders.iter().map(|m| m.iter().map(|(d, p)| (*d, p.to_doc())).collect()).collect(),
            control: s
                .control
                .as_ref()
                .and_then(|c| c.space.to_doc().map(|d| ControlDoc { space: d.clone(), epsilon: c.eps })),
        }
    }
}

pub fn map_docs(maps: &BTreeMap<(usize, usize), BTreeMap<i64, Morphism>>) -> Vec<MapDoc> {
    maps.iter()
        .map(|((a, b), m)| MapDoc {
            from: *a,
            to: *b,
            degrees: m.iter().filter(|(_, f)| !f.is_zero()).map(|(d, f)| (*d, morphism_entries(f))).collect(),
        })
        .collect()
}

impl K1SimplexDoc {
    pub fn to_data(&self) -> Result<K1SimplexData, DocError> {
        self.simplex.to_data(&ring_of(&self.ring)?)
    }

    pub fn from_data(s: &K1SimplexData) -> K1SimplexDoc {
        K1SimplexDoc { ring: s.ring.to_descriptor(), simplex: K1Body::from_data(s) }
    }
}

pub type K1MorphismParts = (K1SimplexData, K1SimplexData, BTreeMap<(usize, usize), BTreeMap<i64, Morphism>>);

impl K1MorphismDoc {
    pub fn to_parts(&self) -> Result<K1MorphismParts, DocError> {
        let ring = ring_of(&self.ring)?;
        let a = self.source.to_data(&ring)?;
        let c = self.target.to_data(&ring)?;
        let f = maps_from(&ring, &self.maps, &a.complexes, &c.complexes)?;
        if let Some(k) = f.keys().find(|(i, j)| i > j) {
            return Err(DocError::Invalid(format!("map {} -> {} goes backward", k.0, k.1)));
        }
        Ok((a, c, f))
    }
}

impl OrdersDoc {
    pub fn to_orders(&self) -> Result<Vec<BTreeMap<i64, Poset>>, DocError> {
        orders_from(&self.orders)
    }
}
