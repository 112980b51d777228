//! Exact coefficient rings and their designated unit subgroups.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RingError {
    #[error("element {0} is not a unit")]
    NotAUnit(String),
    #[error("matrix is singular")]
    Singular,
    #[error("invalid ring descriptor: {0}")]
    BadDescriptor(String),
    #[error("invalid ring element: {0}")]
    BadElement(String),
    #[error("operation not supported over {0}")]
    Unsupported(String),
}

/// Multiplication table of a finite group, validated on construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupTable {
    table: Vec<Vec<usize>>,
    identity: usize,
    inverse: Vec<usize>,
}

impl GroupTable {
    pub fn new(table: Vec<Vec<usize>>) -> Result<Self, RingError> {
        let n = table.len();
        if n == 0 {
            return Err(RingError::BadDescriptor("empty group table".into()));
        }
        for row in &table {
            if row.len() != n || row.iter().any(|&v| v >= n) {
                return Err(RingError::BadDescriptor("table is not n x n over 0..n".into()));
            }
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|g| table[e][g] == g && table[g][e] == g))
            .ok_or_else(|| RingError::BadDescriptor("no identity element".into()))?;
        let mut inverse = vec![0; n];
        for g in 0..n {
            inverse[g] = (0..n)
                .find(|&h| table[g][h] == identity && table[h][g] == identity)
                .ok_or_else(|| RingError::BadDescriptor(format!("element {g} has no inverse")))?;
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if table[table[a][b]][c] != table[a][table[b][c]] {
                        return Err(RingError::BadDescriptor(format!(
                            "not associative at ({a},{b},{c})"
                        )));
                    }
                }
            }
        }
        Ok(GroupTable { table, identity, inverse })
    }

    /// Cyclic group of order `n` with generator 1.
    pub fn cyclic(n: usize) -> Self {
        let table = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        GroupTable::new(table).expect("cyclic table is a group")
    }

    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a][b]
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.table
    }
}

/// Coefficient ring descriptor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ring {
    Z,
    Zmod(u64),
    GroupRing(Arc<GroupTable>),
    Laurent,
}

/// A ring element. Integers and residues use `Int` (residues reduced to `0..n`);
/// group ring and Laurent elements are sparse maps from group index or exponent
/// to a nonzero integer coefficient.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Elem {
    Int(BigInt),
    Sparse(BTreeMap<i64, BigInt>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitKind {
    One,
    PlusMinusOne,
    PlusMinusGroup,
    AllUnits,
}

/// A designated subgroup `U` of the units of a ring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitSubgroup {
    pub ring: Ring,
    pub kind: UnitKind,
}

impl UnitSubgroup {
    pub fn new(ring: &Ring, kind: UnitKind) -> Self {
        UnitSubgroup { ring: ring.clone(), kind }
    }

    pub fn contains(&self, r: &Elem) -> bool {
        self.ring.in_unit_subgroup(r, self.kind)
    }
}

impl Ring {
    pub fn zmod(n: u64) -> Result<Ring, RingError> {
        if n < 2 {
            return Err(RingError::BadDescriptor(format!("Zmod needs n >= 2, got {n}")));
        }
        Ok(Ring::Zmod(n))
    }

    pub fn group_ring(table: Vec<Vec<usize>>) -> Result<Ring, RingError> {
        Ok(Ring::GroupRing(Arc::new(GroupTable::new(table)?)))
    }

    pub fn name(&self) -> String {
        match self {
            Ring::Z => "Z".into(),
            Ring::Zmod(n) => format!("Z/{n}"),
            Ring::GroupRing(g) => format!("Z[G], |G| = {}", g.order()),
            Ring::Laurent => "Z[t,t^-1]".into(),
        }
    }

    fn is_sparse(&self) -> bool {
        matches!(self, Ring::GroupRing(_) | Ring::Laurent)
    }

    fn unit_key(&self) -> i64 {
        match self {
            Ring::GroupRing(g) => g.identity() as i64,
            _ => 0,
        }
    }

    pub fn zero(&self) -> Elem {
        if self.is_sparse() {
            Elem::Sparse(BTreeMap::new())
        } else {
            Elem::Int(BigInt::zero())
        }
    }

    pub fn one(&self) -> Elem {
        self.from_int(1)
    }

    pub fn from_int(&self, v: i64) -> Elem {
        self.from_bigint(BigInt::from(v))
    }

    pub fn from_bigint(&self, v: BigInt) -> Elem {
        match self {
            Ring::Z => Elem::Int(v),
            Ring::Zmod(n) => Elem::Int(v.mod_floor(&BigInt::from(*n))),
            Ring::GroupRing(_) | Ring::Laurent => {
                let mut m = BTreeMap::new();
                if !v.is_zero() {
                    m.insert(self.unit_key(), v);
                }
                Elem::Sparse(m)
            }
        }
    }

    /// The basis element `g` of a group ring.
    pub fn group_elem(&self, g: usize) -> Result<Elem, RingError> {
        match self {
            Ring::GroupRing(t) if g < t.order() => {
                Ok(Elem::Sparse(BTreeMap::from([(g as i64, BigInt::one())])))
            }
            _ => Err(RingError::BadElement(format!("no group element {g} in {}", self.name()))),
        }
    }

    /// `t^k` in the Laurent ring.
    pub fn t_pow(&self, k: i64) -> Result<Elem, RingError> {
        match self {
            Ring::Laurent => Ok(Elem::Sparse(BTreeMap::from([(k, BigInt::one())]))),
            _ => Err(RingError::BadElement(format!("t^{k} is not in {}", self.name()))),
        }
    }

    /// Check that `r` is a well-formed element of this ring.
    pub fn check(&self, r: &Elem) -> Result<(), RingError> {
        match (self, r) {
            (Ring::Z, Elem::Int(_)) => Ok(()),
            (Ring::Zmod(n), Elem::Int(v)) => {
                if v.is_negative() || *v >= BigInt::from(*n) {
                    Err(RingError::BadElement(format!("{v} is not reduced mod {n}")))
                } else {
                    Ok(())
                }
            }
            (Ring::GroupRing(t), Elem::Sparse(m)) => {
                if m.iter().any(|(k, v)| *k < 0 || *k as usize >= t.order() || v.is_zero()) {
                    Err(RingError::BadElement("group ring element out of range".into()))
                } else {
                    Ok(())
                }
            }
            (Ring::Laurent, Elem::Sparse(m)) => {
                if m.values().any(|v| v.is_zero()) {
                    Err(RingError::BadElement("zero Laurent coefficient stored".into()))
                } else {
                    Ok(())
                }
            }
            _ => Err(RingError::BadElement(format!("element kind does not match {}", self.name()))),
        }
    }

    pub fn is_zero(&self, r: &Elem) -> bool {
        match r {
            Elem::Int(v) => v.is_zero(),
            Elem::Sparse(m) => m.is_empty(),
        }
    }

    pub fn is_one(&self, r: &Elem) -> bool {
        *r == self.one()
    }

    pub fn add(&self, a: &Elem, b: &Elem) -> Elem {
        match (a, b) {
            (Elem::Int(x), Elem::Int(y)) => self.from_bigint(x + y),
            (Elem::Sparse(x), Elem::Sparse(y)) => {
                let mut m = x.clone();
                for (k, v) in y {
                    let e = m.entry(*k).or_insert_with(BigInt::zero);
                    *e += v;
                    if e.is_zero() {
                        m.remove(k);
                    }
                }
                Elem::Sparse(m)
            }
            _ => panic!("mixed element kinds in {}", self.name()),
        }
    }

    pub fn neg(&self, a: &Elem) -> Elem {
        match a {
            Elem::Int(x) => self.from_bigint(-x),
            Elem::Sparse(m) => Elem::Sparse(m.iter().map(|(k, v)| (*k, -v)).collect()),
        }
    }

    pub fn sub(&self, a: &Elem, b: &Elem) -> Elem {
        self.add(a, &self.neg(b))
    }

    pub fn mul(&self, a: &Elem, b: &Elem) -> Elem {
        match (self, a, b) {
            (_, Elem::Int(x), Elem::Int(y)) => self.from_bigint(x * y),
            (Ring::GroupRing(t), Elem::Sparse(x), Elem::Sparse(y)) => {
                let mut m: BTreeMap<i64, BigInt> = BTreeMap::new();
                for (g, u) in x {
                    for (h, v) in y {
                        let k = t.mul(*g as usize, *h as usize) as i64;
                        *m.entry(k).or_insert_with(BigInt::zero) += u * v;
                    }
                }
                m.retain(|_, v| !v.is_zero());
                Elem::Sparse(m)
            }
            (Ring::Laurent, Elem::Sparse(x), Elem::Sparse(y)) => {
                let mut m: BTreeMap<i64, BigInt> = BTreeMap::new();
                for (g, u) in x {
                    for (h, v) in y {
                        *m.entry(g + h).or_insert_with(BigInt::zero) += u * v;
                    }
                }
                m.retain(|_, v| !v.is_zero());
                Elem::Sparse(m)
            }
            _ => panic!("mixed element kinds in {}", self.name()),
        }
    }

    /// Returns `s` with `r s = s r = 1`.
    pub fn invert_unit(&self, r: &Elem) -> Result<Elem, RingError> {
        let fail = || RingError::NotAUnit(self.format(r));
        match (self, r) {
            (Ring::Z, Elem::Int(v)) => {
                if v.abs().is_one() {
                    Ok(r.clone())
                } else {
                    Err(fail())
                }
            }
            (Ring::Zmod(n), Elem::Int(v)) => {
                let n = BigInt::from(*n);
                let eg = v.extended_gcd(&n);
                if eg.gcd.is_one() {
                    Ok(self.from_bigint(eg.x))
                } else {
                    Err(fail())
                }
            }
            (Ring::GroupRing(t), Elem::Sparse(m)) => match single_term(m) {
                Some((g, c)) if c.abs().is_one() => {
                    Ok(Elem::Sparse(BTreeMap::from([(t.inv(g as usize) as i64, c.clone())])))
                }
                _ => Err(fail()),
            },
            (Ring::Laurent, Elem::Sparse(m)) => match single_term(m) {
                Some((k, c)) if c.abs().is_one() => Ok(Elem::Sparse(BTreeMap::from([(-k, c.clone())]))),
                _ => Err(fail()),
            },
            _ => Err(RingError::BadElement(self.format(r))),
        }
    }

    pub fn is_unit(&self, r: &Elem) -> bool {
        self.invert_unit(r).is_ok()
    }

    pub fn in_unit_subgroup(&self, r: &Elem, kind: UnitKind) -> bool {
        let pm_one = *r == self.one() || *r == self.neg(&self.one());
        match kind {
            UnitKind::One => *r == self.one(),
            UnitKind::PlusMinusOne => pm_one,
            UnitKind::PlusMinusGroup => match (self, r) {
                (Ring::GroupRing(_) | Ring::Laurent, Elem::Sparse(m)) => {
                    matches!(single_term(m), Some((_, c)) if c.abs().is_one())
                }
                _ => pm_one,
            },
            UnitKind::AllUnits => self.is_unit(r),
        }
    }

    pub fn format(&self, r: &Elem) -> String {
        match r {
            Elem::Int(v) => v.to_string(),
            Elem::Sparse(m) if m.is_empty() => "0".into(),
            Elem::Sparse(m) => {
                let sym = if matches!(self, Ring::Laurent) { "t^" } else { "g" };
                m.iter()
                    .map(|(k, v)| format!("{v}{sym}{k}"))
                    .collect::<Vec<_>>()
                    .join(" + ")
            }
        }
    }

    pub fn elem_to_json(&self, r: &Elem) -> Value {
        match r {
            Elem::Int(v) => bigint_to_json(v),
            Elem::Sparse(m) => {
                let map = m.iter().map(|(k, v)| (k.to_string(), bigint_to_json(v))).collect();
                Value::Object(map)
            }
        }
    }

    pub fn elem_from_json(&self, v: &Value) -> Result<Elem, RingError> {
        match v {
            Value::Number(_) | Value::String(_) => Ok(self.from_bigint(json_to_bigint(v)?)),
            Value::Object(map) if self.is_sparse() => {
                let mut m = BTreeMap::new();
                for (k, c) in map {
                    let key: i64 = k
                        .parse()
                        .map_err(|_| RingError::BadElement(format!("bad key {k:?}")))?;
                    let c = json_to_bigint(c)?;
                    if !c.is_zero() {
                        *m.entry(key).or_insert_with(BigInt::zero) += c;
                    }
                }
                m.retain(|_, c: &mut BigInt| !c.is_zero());
                let e = Elem::Sparse(m);
                self.check(&e)?;
                Ok(e)
            }
            other => Err(RingError::BadElement(format!("cannot read {other} in {}", self.name()))),
        }
    }

    pub fn to_descriptor(&self) -> RingDoc {
        match self {
            Ring::Z => RingDoc::Z,
            Ring::Zmod(n) => RingDoc::Zmod { n: *n },
            Ring::GroupRing(t) => RingDoc::GroupRing { table: t.rows().to_vec() },
            Ring::Laurent => RingDoc::Laurent,
        }
    }

    pub fn from_descriptor(d: &RingDoc) -> Result<Ring, RingError> {
        match d {
            RingDoc::Z => Ok(Ring::Z),
            RingDoc::Zmod { n } => Ring::zmod(*n),
            RingDoc::GroupRing { table } => Ring::group_ring(table.clone()),
            RingDoc::Laurent => Ok(Ring::Laurent),
        }
    }
}

fn single_term(m: &BTreeMap<i64, BigInt>) -> Option<(i64, &BigInt)> {
    if m.len() == 1 {
        m.iter().next().map(|(k, v)| (*k, v))
    } else {
        None
    }
}

fn bigint_to_json(v: &BigInt) -> Value {
    match v.to_i64() {
        Some(i) => Value::from(i),
        None => Value::String(v.to_string()),
    }
}

fn json_to_bigint(v: &Value) -> Result<BigInt, RingError> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .map(BigInt::from)
            .ok_or_else(|| RingError::BadElement(format!("{n} is not an integer"))),
        Value::String(s) => s
            .parse()
            .map_err(|_| RingError::BadElement(format!("{s:?} is not an integer"))),
        other => Err(RingError::BadElement(format!("{other} is not an integer"))),
    }
}

/// Ring descriptor document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum RingDoc {
    Z,
    Zmod { n: u64 },
    GroupRing { table: Vec<Vec<usize>> },
    Laurent,
}

impl fmt::Display for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Two-sided inverse of a square matrix over `Z` or `Z/n` by Euclidean row reduction.
/// Used as an independent oracle; other rings report `Unsupported`.
pub fn matrix_inverse_oracle(ring: &Ring, m: &[Vec<Elem>]) -> Result<Vec<Vec<Elem>>, RingError> {
    let modulus = match ring {
        Ring::Z => None,
        Ring::Zmod(n) => Some(BigInt::from(*n)),
        other => return Err(RingError::Unsupported(other.name())),
    };
    let n = m.len();
    let red = |v: BigInt| match &modulus {
        Some(q) => v.mod_floor(q),
        None => v,
    };
    let mut a: Vec<Vec<BigInt>> = Vec::with_capacity(n);
    for (i, row) in m.iter().enumerate() {
        if row.len() != n {
            return Err(RingError::Singular);
        }
        let mut r: Vec<BigInt> = Vec::with_capacity(2 * n);
        for e in row {
            match e {
                Elem::Int(v) => r.push(red(v.clone())),
                Elem::Sparse(_) => return Err(RingError::BadElement(ring.format(e))),
            }
        }
        for j in 0..n {
            r.push(if i == j { BigInt::one() } else { BigInt::zero() });
        }
        a.push(r);
    }
    for col in 0..n {
        // Euclid on the column until a single nonzero entry remains at or below `col`.
        loop {
            let nz: Vec<usize> = (col..n).filter(|&r| !a[r][col].is_zero()).collect();
            if nz.is_empty() {
                return Err(RingError::Singular);
            }
            let piv = *nz
                .iter()
                .min_by(|&&x, &&y| a[x][col].abs().cmp(&a[y][col].abs()))
                .expect("nonempty");
            if nz.len() == 1 {
                a.swap(col, piv);
                break;
            }
            for &r in &nz {
                if r == piv {
                    continue;
                }
                let q = a[r][col].div_floor(&a[piv][col]);
                for j in 0..2 * n {
                    let v = &a[r][j] - &q * &a[piv][j];
                    a[r][j] = red(v);
                }
            }
        }
        let p = ring.from_bigint(a[col][col].clone());
        let pinv = match ring.invert_unit(&p) {
            Ok(Elem::Int(v)) => v,
            _ => return Err(RingError::Singular),
        };
        for j in 0..2 * n {
            let v = &a[col][j] * &pinv;
            a[col][j] = red(v);
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for j in 0..2 * n {
                let v = &a[r][j] - &f * &a[col][j];
                a[r][j] = red(v);
            }
        }
    }
    Ok(a
        .into_iter()
        .map(|row| row[n..].iter().map(|v| ring.from_bigint(v.clone())).collect())
        .collect())
}

/// Dense matrix product over `ring`.
pub fn matrix_mul(ring: &Ring, a: &[Vec<Elem>], b: &[Vec<Elem>]) -> Vec<Vec<Elem>> {
    let inner = b.len();
    let cols = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    (0..inner).fold(ring.zero(), |acc, k| ring.add(&acc, &ring.mul(&row[k], &b[k][j])))
                })
                .collect()
        })
        .collect()
}

pub fn identity_matrix(ring: &Ring, n: usize) -> Vec<Vec<Elem>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { ring.one() } else { ring.zero() }).collect())
        .collect()
}

pub fn int_matrix(ring: &Ring, rows: &[&[i64]]) -> Vec<Vec<Elem>> {
    rows.iter().map(|r| r.iter().map(|&v| ring.from_int(v)).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_in_z5() {
        let r = Ring::Zmod(5);
        assert_eq!(r.invert_unit(&r.from_int(2)).unwrap(), r.from_int(3));
    }

    #[test]
    fn units_of_z() {
        assert_eq!(Ring::Z.invert_unit(&Ring::Z.from_int(1)).unwrap(), Ring::Z.from_int(1));
        assert!(matches!(Ring::Z.invert_unit(&Ring::Z.from_int(2)), Err(RingError::NotAUnit(_))));
    }

    #[test]
    fn unit_subgroup_membership() {
        let z = Ring::Z;
        assert!(z.in_unit_subgroup(&z.from_int(-1), UnitKind::PlusMinusOne));
        let r = Ring::Zmod(5);
        assert!(!r.in_unit_subgroup(&r.from_int(2), UnitKind::One));
        let c2 = Ring::GroupRing(Arc::new(GroupTable::cyclic(2)));
        let g = c2.group_elem(1).unwrap();
        assert!(c2.in_unit_subgroup(&g, UnitKind::PlusMinusGroup));
        assert!(!c2.in_unit_subgroup(&g, UnitKind::PlusMinusOne));
    }

    #[test]
    fn group_table_rejects_non_groups() {
        assert!(GroupTable::new(vec![vec![0, 1], vec![1, 1]]).is_err());
        assert!(GroupTable::new(vec![vec![0, 1], vec![1, 0]]).is_ok());
    }

    #[test]
    fn oracle_examples() {
        let r = Ring::Zmod(5);
        let m = int_matrix(&r, &[&[1, 0], &[2, 1]]);
        assert_eq!(matrix_inverse_oracle(&r, &m).unwrap(), int_matrix(&r, &[&[1, 0], &[3, 1]]));
        let z = Ring::Z;
        let s = int_matrix(&z, &[&[0, 1], &[1, 0]]);
        assert_eq!(matrix_inverse_oracle(&z, &s).unwrap(), s);
        let id = identity_matrix(&z, 3);
        assert_eq!(matrix_inverse_oracle(&z, &id).unwrap(), id);
        assert_eq!(
            matrix_inverse_oracle(&z, &int_matrix(&z, &[&[2, 0], &[0, 1]])),
            Err(RingError::Singular)
        );
    }

    #[test]
    fn oracle_composite_modulus() {
        let r = Ring::Zmod(6);
        // det = 2*1 - 3*... chosen with no unit in the first column
        let m = int_matrix(&r, &[&[2, 1], &[3, 2]]);
        let inv = matrix_inverse_oracle(&r, &m).unwrap();
        assert_eq!(matrix_mul(&r, &inv, &m), identity_matrix(&r, 2));
    }

    #[test]
    fn laurent_and_group_arithmetic() {
        let l = Ring::Laurent;
        let t = l.t_pow(1).unwrap();
        let ti = l.invert_unit(&t).unwrap();
        assert_eq!(l.mul(&t, &ti), l.one());
        let s3 = Ring::group_ring(vec![
            vec![0, 1, 2, 3, 4, 5],
            vec![1, 2, 0, 4, 5, 3],
            vec![2, 0, 1, 5, 3, 4],
            vec![3, 5, 4, 0, 2, 1],
            vec![4, 3, 5, 1, 0, 2],
            vec![5, 4, 3, 2, 1, 0],
        ])
        .unwrap();
        let a = s3.group_elem(1).unwrap();
        let b = s3.group_elem(3).unwrap();
        assert_ne!(s3.mul(&a, &b), s3.mul(&b, &a));
        let ai = s3.invert_unit(&a).unwrap();
        assert_eq!(s3.mul(&a, &ai), s3.one());
    }

    #[test]
    fn json_round_trip() {
        let l = Ring::Laurent;
        let e = l.add(&l.t_pow(-1).unwrap(), &l.from_int(3));
        let v = l.elem_to_json(&e);
        assert_eq!(l.elem_from_json(&v).unwrap(), e);
        let z = Ring::Z;
        let big: BigInt = "123456789012345678901234567890".parse().unwrap();
        let e = z.from_bigint(big);
        assert_eq!(z.elem_from_json(&z.elem_to_json(&e)).unwrap(), e);
    }
}
