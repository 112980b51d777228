//! Finite partial orders on basis labels.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{ControlError, ControlSpace};
use crate::Label;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PosetError {
    #[error("cycle detected: {0:?}")]
    CycleDetected(Vec<Label>),
    #[error("no order exists: {0:?}")]
    NoOrderExists(Vec<Label>),
    #[error("images are not nested in degree {0}")]
    NotNested(i64),
    #[error("unknown element {0:?}")]
    UnknownElement(Label),
}

/// Poset document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosetDoc {
    pub elements: Vec<Label>,
    #[serde(default)]
    pub covers: Vec<(Label, Label)>,
}

/// A finite partial order stored with its transitive closure.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Poset {
    elements: BTreeSet<Label>,
    above: BTreeMap<Label, BTreeSet<Label>>,
}

impl Poset {
    pub fn antichain<I: IntoIterator<Item = Label>>(elements: I) -> Poset {
        let elements: BTreeSet<Label> = elements.into_iter().collect();
        let above = elements.iter().map(|e| (e.clone(), BTreeSet::new())).collect();
        Poset { elements, above }
    }

    /// Total order following the slice.
    pub fn chain(order: &[Label]) -> Poset {
        let covers: Vec<(Label, Label)> = order.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
        validate_poset(order.iter().cloned(), &covers).expect("a chain is acyclic")
    }

    pub fn elements(&self) -> &BTreeSet<Label> {
        &self.elements
    }

    pub fn contains(&self, e: &str) -> bool {
        self.elements.contains(e)
    }

    /// Strictly-less test.
    pub fn lt(&self, a: &str, b: &str) -> bool {
        self.above.get(a).is_some_and(|s| s.contains(b))
    }

    pub fn comparable(&self, a: &str, b: &str) -> bool {
        self.lt(a, b) || self.lt(b, a)
    }

    pub fn above(&self, a: &str) -> impl Iterator<Item = &Label> {
        self.above.get(a).into_iter().flatten()
    }

    /// All strict pairs `a < b` of the closure.
    pub fn pairs(&self) -> Vec<(Label, Label)> {
        self.above
            .iter()
            .flat_map(|(a, s)| s.iter().map(move |b| (a.clone(), b.clone())))
            .collect()
    }

    /// Covering pairs (the Hasse diagram).
    pub fn covers(&self) -> Vec<(Label, Label)> {
        let mut out = Vec::new();
        for (a, ups) in &self.above {
            for b in ups {
                let between = ups.iter().any(|m| m != b && self.lt(m, b));
                if !between {
                    out.push((a.clone(), b.clone()));
                }
            }
        }
        out
    }

    /// Length of the longest increasing chain starting at `e` (counting `e`).
    pub fn max_chain_length(&self) -> BTreeMap<Label, usize> {
        // elements with larger up-sets are processed after everything above them
        let mut order: Vec<&Label> = self.elements.iter().collect();
        order.sort_by_key(|e| self.above[*e].len());
        let mut out: BTreeMap<Label, usize> = BTreeMap::new();
        for e in order {
            let best = self.above[e].iter().map(|b| out[b]).max().unwrap_or(0);
            out.insert(e.clone(), best + 1);
        }
        out
    }

    /// Restriction to a subset of the elements.
    pub fn restrict(&self, keep: &BTreeSet<Label>) -> Poset {
        let elements: BTreeSet<Label> = self.elements.intersection(keep).cloned().collect();
        let above = elements
            .iter()
            .map(|e| (e.clone(), self.above[e].intersection(keep).cloned().collect()))
            .collect();
        Poset { elements, above }
    }

    /// Rename elements by an injective map (unmapped elements keep their label).
    pub fn relabel(&self, f: impl Fn(&Label) -> Label) -> Poset {
        let elements = self.elements.iter().map(&f).collect();
        let above = self
            .above
            .iter()
            .map(|(a, s)| (f(a), s.iter().map(&f).collect()))
            .collect();
        Poset { elements, above }
    }

    /// Union of two posets on disjoint element sets plus extra relations, re-closed.
    pub fn union_with(&self, other: &Poset, extra: &[(Label, Label)]) -> Result<Poset, PosetError> {
        let mut covers = self.pairs();
        covers.extend(other.pairs());
        covers.extend(extra.iter().cloned());
        validate_poset(self.elements.iter().chain(other.elements.iter()).cloned(), &covers)
    }

    /// Whether the order refines (contains) `other` on the shared elements.
    pub fn refines(&self, other: &Poset) -> bool {
        other.pairs().iter().all(|(a, b)| self.lt(a, b))
    }

    pub fn to_doc(&self) -> PosetDoc {
        PosetDoc { elements: self.elements.iter().cloned().collect(), covers: self.covers() }
    }

    pub fn from_doc(doc: &PosetDoc) -> Result<Poset, PosetError> {
        for (a, b) in &doc.covers {
            for x in [a, b] {
                if !doc.elements.contains(x) {
                    return Err(PosetError::UnknownElement(x.clone()));
                }
            }
        }
        validate_poset(doc.elements.iter().cloned(), &doc.covers)
    }
}

/// Closes the cover relation transitively, rejecting cycles.
pub fn validate_poset<I: IntoIterator<Item = Label>>(
    elements: I,
    covers: &[(Label, Label)],
) -> Result<Poset, PosetError> {
    let mut elements: BTreeSet<Label> = elements.into_iter().collect();
    let mut succ: BTreeMap<Label, BTreeSet<Label>> = BTreeMap::new();
    for (a, b) in covers {
        elements.insert(a.clone());
        elements.insert(b.clone());
        succ.entry(a.clone()).or_default().insert(b.clone());
    }
    if let Some(cycle) = find_cycle(&elements, &succ) {
        return Err(PosetError::CycleDetected(cycle));
    }
    let mut above = BTreeMap::new();
    for e in &elements {
        let mut seen: BTreeSet<Label> = BTreeSet::new();
        let mut stack: Vec<&Label> = succ.get(e).into_iter().flatten().collect();
        while let Some(x) = stack.pop() {
            if seen.insert(x.clone()) {
                stack.extend(succ.get(x).into_iter().flatten());
            }
        }
        above.insert(e.clone(), seen);
    }
    Ok(Poset { elements, above })
}

fn find_cycle(elements: &BTreeSet<Label>, succ: &BTreeMap<Label, BTreeSet<Label>>) -> Option<Vec<Label>> {
    // 0 = unvisited, 1 = on stack, 2 = finished
    let mut state: BTreeMap<&Label, u8> = elements.iter().map(|e| (e, 0)).collect();
    for root in elements {
        if state[root] != 0 {
            continue;
        }
        let mut path: Vec<&Label> = vec![root];
        let mut iters: Vec<Vec<&Label>> = vec![succ.get(root).into_iter().flatten().collect()];
        state.insert(root, 1);
        while let Some(it) = iters.last_mut() {
            match it.pop() {
                Some(next) => match state[next] {
                    0 => {
                        state.insert(next, 1);
                        path.push(next);
                        iters.push(succ.get(next).into_iter().flatten().collect());
                    }
                    1 => {
                        let start = path.iter().position(|p| *p == next).expect("on stack");
                        let mut cyc: Vec<Label> = path[start..].iter().map(|s| (*s).clone()).collect();
                        cyc.push(next.clone());
                        return Some(cyc);
                    }
                    _ => {}
                },
                None => {
                    let done = path.pop().expect("nonempty");
                    state.insert(done, 2);
                    iters.pop();
                }
            }
        }
    }
    None
}

/// The minimal order satisfying the required pairs `x < y`.
pub fn find_common_order<I: IntoIterator<Item = Label>>(
    elements: I,
    constraints: &[(Label, Label)],
) -> Result<Poset, PosetError> {
    validate_poset(elements, constraints).map_err(|e| match e {
        PosetError::CycleDetected(c) => PosetError::NoOrderExists(c),
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundednessReport {
    pub max_chain_length: BTreeMap<Label, usize>,
    pub epsilon_bounded: bool,
    pub violating_element: Option<Label>,
}

/// Every increasing chain from `s` must stay in the open `eps`-ball about `loc(s)`.
pub fn is_epsilon_bounded(
    p: &Poset,
    loc: &BTreeMap<Label, Label>,
    eps: f64,
    x: &ControlSpace,
) -> Result<BoundednessReport, ControlError> {
    let mut violating = None;
    for s in p.elements() {
        let ls = loc.get(s).ok_or_else(|| ControlError::UnknownPoint(s.clone()))?;
        for t in p.above(s) {
            let lt = loc.get(t).ok_or_else(|| ControlError::UnknownPoint(t.clone()))?;
            if x.d(ls, lt)? >= eps && violating.is_none() {
                violating = Some(s.clone());
            }
        }
    }
    Ok(BoundednessReport {
        max_chain_length: p.max_chain_length(),
        epsilon_bounded: violating.is_none(),
        violating_element: violating,
    })
}

/// Image order on one degree: `images[0] ⊂ images[1] ⊂ ...`, with each later
/// complement preceding everything before it.
pub fn image_partial_order(
    images: &BTreeMap<i64, Vec<BTreeSet<Label>>>,
) -> Result<BTreeMap<i64, Poset>, PosetError> {
    let mut out = BTreeMap::new();
    for (deg, chain) in images {
        let mut blocks: Vec<BTreeSet<Label>> = Vec::new();
        let mut prev: BTreeSet<Label> = BTreeSet::new();
        for stage in chain {
            if !prev.is_subset(stage) {
                return Err(PosetError::NotNested(*deg));
            }
            blocks.push(stage.difference(&prev).cloned().collect());
            prev = stage.clone();
        }
        let mut covers = Vec::new();
        for (i, later) in blocks.iter().enumerate() {
            for earlier in &blocks[..i] {
                for a in later {
                    for b in earlier {
                        covers.push((a.clone(), b.clone()));
                    }
                }
            }
        }
        out.insert(*deg, validate_poset(prev.iter().cloned(), &covers)?);
    }
    Ok(out)
}

/// Input to [`shuffle_orders`]. Labels of the two sides must be disjoint.
/// `degree` gives the degree in the sum `C ⊕ SC` of every label, and `images`
/// lists pairs `(im C_j, im SC_j)` for every earlier vertex `j`.
#[derive(Debug, Clone)]
pub struct ShuffleInput<'a> {
    pub c_order: &'a Poset,
    pub sc_order: &'a Poset,
    pub degree: &'a BTreeMap<Label, i64>,
    pub images: &'a [(BTreeSet<Label>, BTreeSet<Label>)],
    pub loc: &'a BTreeMap<Label, Label>,
    pub eps: f64,
    pub space: &'a ControlSpace,
}

/// Union order in which an `SC` element `t` precedes a `C` element `s` of the same
/// degree exactly when they lie within `5 eps` and every image containing `t`
/// has its partner containing `s`.
pub fn shuffle_orders(input: &ShuffleInput<'_>) -> Result<Poset, PosetError> {
    let mut extra = Vec::new();
    for s in input.c_order.elements() {
        for t in input.sc_order.elements() {
            let (Some(ds), Some(dt)) = (input.degree.get(s), input.degree.get(t)) else {
                return Err(PosetError::UnknownElement(if input.degree.contains_key(s) {
                    t.clone()
                } else {
                    s.clone()
                }));
            };
            if ds != dt {
                continue;
            }
            let (ls, lt) = match (input.loc.get(s), input.loc.get(t)) {
                (Some(a), Some(b)) => (a, b),
                (None, _) => return Err(PosetError::UnknownElement(s.clone())),
                (_, None) => return Err(PosetError::UnknownElement(t.clone())),
            };
            let d = input.space.d(ls, lt).map_err(|_| PosetError::UnknownElement(s.clone()))?;
            if d >= 5.0 * input.eps {
                continue;
            }
            if input.images.iter().all(|(im_c, im_sc)| !im_sc.contains(t) || im_c.contains(s)) {
                extra.push((t.clone(), s.clone()));
            }
        }
    }
    input.c_order.union_with(input.sc_order, &extra)
}
