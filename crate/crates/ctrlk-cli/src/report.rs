use std::collections::BTreeMap;
use std::fmt::Write as _;

use ctrlk_core::chains::ChainError;
use ctrlk_core::control::ControlError;
use ctrlk_core::doc::{canonical_json, DocError};
use ctrlk_core::geometric::{Check as CoreCheck, GeoError};
use ctrlk_core::ksimplex::KError;
use ctrlk_core::morphisms::MorphError;
use ctrlk_core::posets::PosetError;
use ctrlk_core::rings::RingError;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Invalid,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Invalid => 1,
            Status::Error => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub status: Status,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<Value>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report {
            command: command.to_string(),
            status: Status::Ok,
            checks: Vec::new(),
            metrics: BTreeMap::new(),
            error: None,
            output: None,
        }
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool, witness: impl Into<String>) {
        let w = witness.into();
        self.checks.push(Check { name: name.into(), pass, witness: (!w.is_empty()).then_some(w) });
    }

    pub fn core_checks(&mut self, cs: &[CoreCheck]) {
        for c in cs {
            let w = if c.detail == "[]" { String::new() } else { c.detail.clone() };
            self.check(c.clause.clone(), c.ok, w);
        }
    }

    pub fn metric(&mut self, name: &str, v: impl Into<Value>) {
        self.metrics.insert(name.to_string(), v.into());
    }

    /// Status follows the checks; a failure recorded in `fail` overrides it.
    pub fn finish(mut self) -> Self {
        if self.status == Status::Ok && self.checks.iter().any(|c| !c.pass) {
            self.status = Status::Invalid;
        }
        self
    }

    pub fn fail(mut self, e: CliError) -> Self {
        self.status = e.status;
        self.error = Some(e.message);
        self
    }

    pub fn to_json(&self) -> String {
        canonical_json(&serde_json::to_value(self).expect("report serializes"))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let status = serde_json::to_value(self.status).expect("status");
        let _ = writeln!(s, "{}: {}", self.command, status.as_str().unwrap_or_default());
        if let Some(e) = &self.error {
            let _ = writeln!(s, "error: {e}");
        }
        for c in &self.checks {
            let mark = if c.pass { "pass" } else { "FAIL" };
            match &c.witness {
                Some(w) => {
                    let _ = writeln!(s, "  [{mark}] {} ({w})", c.name);
                }
                None => {
                    let _ = writeln!(s, "  [{mark}] {}", c.name);
                }
            }
        }
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "  {k} = {v}");
        }
        s
    }
}

/// A command failure with the status it maps to.
#[derive(Debug, Clone)]
pub struct CliError {
    pub status: Status,
    pub message: String,
}

impl CliError {
    pub fn malformed(message: impl Into<String>) -> Self {
        CliError { status: Status::Error, message: message.into() }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        CliError { status: Status::Invalid, message: message.into() }
    }
}

// Failures of a mathematical property are "invalid"; everything that stops the
// input from being read as the object it claims to be is "error".

fn ring_invalid(e: &RingError) -> bool {
    matches!(e, RingError::NotAUnit(_) | RingError::Singular)
}

fn morph_invalid(e: &MorphError) -> bool {
    match e {
        MorphError::NotDiagonal(_)
        | MorphError::CoefficientOutsideU { .. }
        | MorphError::NotTriangular { .. }
        | MorphError::DiagonalNotInvertible(_)
        | MorphError::NotInvertible(_) => true,
        MorphError::Ring(r) => ring_invalid(r),
        _ => false,
    }
}

fn poset_invalid(e: &PosetError) -> bool {
    matches!(e, PosetError::CycleDetected(_) | PosetError::NoOrderExists(_) | PosetError::NotNested(_))
}

fn chain_invalid(e: &ChainError) -> bool {
    match e {
        ChainError::NotAChainMap(_)
        | ChainError::NoCancellation(_)
        | ChainError::InvalidDecomposition(_)
        | ChainError::NotStrictContractible(_) => true,
        ChainError::Morph(m) => morph_invalid(m),
        _ => false,
    }
}

fn geo_invalid(e: &GeoError) -> bool {
    match e {
        GeoError::NotEpsilonBounded(_)
        | GeoError::NotDiagonal(_)
        | GeoError::DiagonalNotInvertible(_)
        | GeoError::NotTriangular(_)
        | GeoError::NotUnipotent(_) => true,
        GeoError::Morph(m) => morph_invalid(m),
        GeoError::Ring(r) => ring_invalid(r),
        _ => false,
    }
}

fn k_invalid(e: &KError) -> bool {
    match e {
        KError::NotInvertible(_)
        | KError::DiagonalNotOne { .. }
        | KError::NoOrderExists(_)
        | KError::WrongComplementRank { .. }
        | KError::NotALoop => true,
        KError::Chain(c) => chain_invalid(c),
        KError::Morph(m) => morph_invalid(m),
        KError::Ring(r) => ring_invalid(r),
        KError::Poset(p) => poset_invalid(p),
        _ => false,
    }
}

fn doc_invalid(e: &DocError) -> bool {
    match e {
        DocError::Ring(r) => ring_invalid(r),
        DocError::Morph(m) => morph_invalid(m),
        DocError::Poset(p) => poset_invalid(p),
        DocError::Chain(c) => chain_invalid(c),
        DocError::Geo(g) => geo_invalid(g),
        DocError::K(k) => k_invalid(k),
        _ => false,
    }
}

macro_rules! classify {
    ($($t:ty => $f:expr),* $(,)?) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                let status = if $f(&e) { Status::Invalid } else { Status::Error };
                CliError { status, message: e.to_string() }
            }
        })*
    };
}

classify! {
    DocError => doc_invalid,
    RingError => ring_invalid,
    MorphError => morph_invalid,
    PosetError => poset_invalid,
    ChainError => chain_invalid,
    GeoError => geo_invalid,
    KError => k_invalid,
    ControlError => |_: &ControlError| false,
}
