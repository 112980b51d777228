//! Finite metric control spaces, sampled paths, enlargements and declared frontiers.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Label;

/// Slack used when validating metric axioms on floating-point input.
pub const METRIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("unknown point {0:?}")]
    UnknownPoint(String),
    #[error("invalid metric: {0}")]
    BadMetric(String),
    #[error("path is not a walk: {0:?} and {1:?} are not adjacent")]
    NotAWalk(String, String),
    #[error("empty path")]
    EmptyPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MetricDoc {
    Graph { edges: Vec<(Label, Label, f64)> },
    Euclidean { coords: BTreeMap<Label, Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontierDoc {
    pub id: Label,
    pub dist: BTreeMap<Label, f64>,
}

/// Space document: points, a metric description and declared frontier points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDoc {
    pub points: Vec<Label>,
    pub metric: MetricDoc,
    #[serde(default)]
    pub frontier: Vec<FrontierDoc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub id: Label,
    pub dist: Vec<f64>,
}

/// A finite metric space. In the graph model paths are edge walks; in the
/// Euclidean model consecutive samples are unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSpace {
    points: Vec<Label>,
    index: BTreeMap<Label, usize>,
    dist: Vec<Vec<f64>>,
    adj: Option<Vec<BTreeMap<usize, f64>>>,
    frontier: Vec<FrontierPoint>,
    /// Description it was loaded from; graph subspaces have none.
    doc: Option<SpaceDoc>,
}

impl ControlSpace {
    pub fn from_doc(doc: &SpaceDoc) -> Result<Self, ControlError> {
        let mut index = BTreeMap::new();
        for (i, p) in doc.points.iter().enumerate() {
            if index.insert(p.clone(), i).is_some() {
                return Err(ControlError::BadMetric(format!("duplicate point {p:?}")));
            }
        }
        let n = doc.points.len();
        let (dist, adj) = match &doc.metric {
            MetricDoc::Graph { edges } => {
                let mut adj: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
                for (a, b, w) in edges {
                    let ia = *index.get(a).ok_or_else(|| ControlError::UnknownPoint(a.clone()))?;
                    let ib = *index.get(b).ok_or_else(|| ControlError::UnknownPoint(b.clone()))?;
                    if !(w.is_finite() && *w > 0.0) {
                        return Err(ControlError::BadMetric(format!("edge weight {w} must be positive")));
                    }
                    if ia == ib {
                        return Err(ControlError::BadMetric(format!("self-loop at {a:?}")));
                    }
                    for (x, y) in [(ia, ib), (ib, ia)] {
                        let e = adj[x].entry(y).or_insert(*w);
                        *e = e.min(*w);
                    }
                }
                let dist = (0..n).map(|s| dijkstra(&adj, s)).collect();
                (dist, Some(adj))
            }
            MetricDoc::Euclidean { coords } => {
                let mut pts = Vec::with_capacity(n);
                for p in &doc.points {
                    pts.push(coords.get(p).ok_or_else(|| ControlError::UnknownPoint(p.clone()))?);
                }
                if let Some(extra) = coords.keys().find(|k| !index.contains_key(*k)) {
                    return Err(ControlError::UnknownPoint(extra.clone()));
                }
                let dim = pts.first().map_or(0, |v| v.len());
                if pts.iter().any(|v| v.len() != dim || v.iter().any(|c| !c.is_finite())) {
                    return Err(ControlError::BadMetric("coordinates differ in dimension".into()));
                }
                let dist = pts
                    .iter()
                    .map(|a| pts.iter().map(|b| euclid(a, b)).collect())
                    .collect();
                (dist, None)
            }
        };
        let mut frontier = Vec::new();
        for f in &doc.frontier {
            if index.contains_key(&f.id) {
                return Err(ControlError::BadMetric(format!("frontier id {:?} is a point", f.id)));
            }
            let mut d = vec![f64::INFINITY; n];
            for (p, v) in &f.dist {
                let i = *index.get(p).ok_or_else(|| ControlError::UnknownPoint(p.clone()))?;
                if !(*v >= 0.0) {
                    return Err(ControlError::BadMetric(format!("negative frontier distance {v}")));
                }
                d[i] = *v;
            }
            frontier.push(FrontierPoint { id: f.id.clone(), dist: d });
        }
        let space = ControlSpace { points: doc.points.clone(), index, dist, adj, frontier, doc: Some(doc.clone()) };
        space.validate_frontier()?;
        Ok(space)
    }

    fn validate_frontier(&self) -> Result<(), ControlError> {
        for f in &self.frontier {
            for i in 0..self.len() {
                for j in 0..self.len() {
                    let (a, b, d) = (f.dist[i], f.dist[j], self.dist[i][j]);
                    if a.is_finite() && b.is_finite() && a > b + d + METRIC_TOL {
                        return Err(ControlError::BadMetric(format!(
                            "frontier {:?} violates the triangle inequality at {:?}, {:?}",
                            f.id, self.points[i], self.points[j]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Line graph `0 - 1 - ... - (n-1)` with unit edges.
    pub fn line(n: usize) -> Self {
        let points: Vec<Label> = (0..n).map(|i| i.to_string()).collect();
        let edges = (1..n).map(|i| ((i - 1).to_string(), i.to_string(), 1.0)).collect();
        ControlSpace::from_doc(&SpaceDoc { points, metric: MetricDoc::Graph { edges }, frontier: vec![] })
            .expect("line graph is a metric space")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Label] {
        &self.points
    }

    pub fn all_points(&self) -> BTreeSet<Label> {
        self.points.iter().cloned().collect()
    }

    pub fn frontier(&self) -> &[FrontierPoint] {
        &self.frontier
    }

    pub fn is_graph(&self) -> bool {
        self.adj.is_some()
    }

    pub fn idx(&self, p: &str) -> Result<usize, ControlError> {
        self.index.get(p).copied().ok_or_else(|| ControlError::UnknownPoint(p.to_string()))
    }

    pub fn contains(&self, p: &str) -> bool {
        self.index.contains_key(p)
    }

    pub fn d(&self, a: &str, b: &str) -> Result<f64, ControlError> {
        Ok(self.dist[self.idx(a)?][self.idx(b)?])
    }

    pub fn d_idx(&self, a: usize, b: usize) -> f64 {
        self.dist[a][b]
    }

    /// Graph neighbors of a point (every other point in the Euclidean model).
    pub fn neighbors(&self, i: usize) -> Vec<(usize, f64)> {
        match &self.adj {
            Some(adj) => adj[i].iter().map(|(j, w)| (*j, *w)).collect(),
            None => (0..self.len()).filter(|&j| j != i).map(|j| (j, self.dist[i][j])).collect(),
        }
    }

    pub fn edge_weight(&self, a: usize, b: usize) -> Option<f64> {
        self.adj.as_ref().and_then(|adj| adj[a].get(&b).copied())
    }

    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        match &self.adj {
            Some(adj) => adj
                .iter()
                .enumerate()
                .flat_map(|(a, m)| m.iter().filter(move |(b, _)| a < **b).map(move |(b, w)| (a, *b, *w)))
                .collect(),
            None => vec![],
        }
    }

    /// Check that consecutive samples are equal or adjacent (graph model only).
    pub fn validate_walk(&self, samples: &[Label]) -> Result<(), ControlError> {
        if samples.is_empty() {
            return Err(ControlError::EmptyPath);
        }
        let idx: Vec<usize> = samples.iter().map(|s| self.idx(s)).collect::<Result<_, _>>()?;
        if self.adj.is_some() {
            for (w, s) in idx.windows(2).zip(samples.windows(2)) {
                if w[0] != w[1] && self.edge_weight(w[0], w[1]).is_none() {
                    return Err(ControlError::NotAWalk(s[0].clone(), s[1].clone()));
                }
            }
        }
        Ok(())
    }

    /// Diameter of the sample set; graph walks also include the lengths of traversed edges.
    pub fn path_radius(&self, samples: &[Label]) -> Result<f64, ControlError> {
        let idx: Vec<usize> = samples.iter().map(|s| self.idx(s)).collect::<Result<_, _>>()?;
        Ok(self.radius_idx(&idx))
    }

    pub fn radius_idx(&self, idx: &[usize]) -> f64 {
        let mut r: f64 = 0.0;
        for (k, &a) in idx.iter().enumerate() {
            for &b in &idx[k + 1..] {
                r = r.max(self.dist[a][b]);
            }
        }
        for w in idx.windows(2) {
            if let Some(e) = self.edge_weight(w[0], w[1]) {
                r = r.max(e);
            }
        }
        r
    }

    fn set_indices(&self, ys: &BTreeSet<Label>) -> Result<Vec<usize>, ControlError> {
        ys.iter().map(|y| self.idx(y)).collect()
    }

    fn labels_of(&self, mask: &[bool]) -> BTreeSet<Label> {
        mask.iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(i, _)| self.points[i].clone())
            .collect()
    }

    /// `Y^eps`: points reachable from `Y` by a path of radius `< eps`.
    pub fn enlarge(&self, ys: &BTreeSet<Label>, eps: f64) -> Result<BTreeSet<Label>, ControlError> {
        self.enlarge_within(ys, eps, &self.all_points())
    }

    /// Enlargement using only paths that stay inside `allowed`.
    pub fn enlarge_within(
        &self,
        ys: &BTreeSet<Label>,
        eps: f64,
        allowed: &BTreeSet<Label>,
    ) -> Result<BTreeSet<Label>, ControlError> {
        let seeds = self.set_indices(ys)?;
        if eps <= 0.0 {
            return Ok(ys.clone());
        }
        let mut allow = vec![false; self.len()];
        for i in self.set_indices(allowed)? {
            allow[i] = true;
        }
        let mut out = vec![false; self.len()];
        if self.adj.is_some() && allow.iter().all(|a| *a) {
            // a shortest walk has diameter equal to the distance of its ends
            for v in 0..self.len() {
                out[v] = seeds.iter().any(|&s| s == v || self.dist[s][v] < eps);
            }
            return Ok(self.labels_of(&out));
        }
        for s in seeds {
            out[s] = true;
            if allow[s] {
                self.reach(&[s], eps, &allow, &mut out);
            }
        }
        Ok(self.labels_of(&out))
    }

    /// `Y^{-eps} = X - (X - Y)^eps`.
    pub fn reduce(&self, ys: &BTreeSet<Label>, eps: f64) -> Result<BTreeSet<Label>, ControlError> {
        self.set_indices(ys)?;
        let rest: BTreeSet<Label> = self.all_points().difference(ys).cloned().collect();
        let grown = self.enlarge(&rest, eps)?;
        Ok(self.all_points().difference(&grown).cloned().collect())
    }

    /// `Fr^eps X`: points reachable from a declared frontier point by a path of radius `< eps`.
    pub fn frontier_enlargement(&self, eps: f64) -> BTreeSet<Label> {
        let mut out = vec![false; self.len()];
        if eps <= 0.0 {
            return BTreeSet::new();
        }
        // a one-sample path at any point within eps of the frontier point already
        // reaches it, and every sample of a longer path must be within eps as well
        for f in &self.frontier {
            for v in 0..self.len() {
                out[v] |= f.dist[v] < eps;
            }
        }
        self.labels_of(&out)
    }

    /// Marks in `out` every point reachable by extending the connected sample set `start`.
    fn reach(&self, start: &[usize], eps: f64, allow: &[bool], out: &mut [bool]) {
        let n = self.len();
        let within = |a: usize, set: &[usize]| {
            set.iter().all(|&b| self.dist[a][b] < eps)
        };
        if self.adj.is_none() {
            for v in 0..n {
                if allow[v] && within(v, start) {
                    out[v] = true;
                }
            }
            return;
        }
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        let mut stack: Vec<Vec<usize>> = vec![start.to_vec()];
        seen.insert(start.to_vec());
        while let Some(set) = stack.pop() {
            let mut cand: BTreeSet<usize> = BTreeSet::new();
            for &s in &set {
                for (v, w) in self.neighbors(s) {
                    if w < eps && allow[v] && !set.contains(&v) {
                        cand.insert(v);
                    }
                }
            }
            for v in cand {
                if !within(v, &set) {
                    continue;
                }
                out[v] = true;
                let mut next = set.clone();
                next.push(v);
                next.sort_unstable();
                if seen.insert(next.clone()) {
                    stack.push(next);
                }
            }
        }
    }

    /// Combinatorial boundary of `U`: outside points adjacent to `U` (all outside points
    /// in the Euclidean model).
    pub fn boundary(&self, us: &BTreeSet<Label>) -> Result<BTreeSet<Label>, ControlError> {
        let idx = self.set_indices(us)?;
        let mut out = BTreeSet::new();
        for i in idx {
            for (j, _) in self.neighbors(i) {
                if !us.contains(&self.points[j]) {
                    out.insert(self.points[j].clone());
                }
            }
        }
        Ok(out)
    }

    /// Checks `(X-U)^eps ∩ U = (Ū-U)^eps ∩ U`, the right side using paths inside `Ū`.
    pub fn check_excision(
        &self,
        us: &BTreeSet<Label>,
        boundary: Option<&BTreeSet<Label>>,
        eps: f64,
    ) -> Result<ExcisionReport, ControlError> {
        let bd = match boundary {
            Some(b) => b.clone(),
            None => self.boundary(us)?,
        };
        let outside: BTreeSet<Label> = self.all_points().difference(us).cloned().collect();
        let lhs: BTreeSet<Label> = self.enlarge(&outside, eps)?.intersection(us).cloned().collect();
        let closure: BTreeSet<Label> = us.union(&bd).cloned().collect();
        let rhs: BTreeSet<Label> =
            self.enlarge_within(&bd, eps, &closure)?.intersection(us).cloned().collect();
        Ok(ExcisionReport { holds: lhs == rhs, lhs, rhs })
    }

    /// The subspace `U` with the induced metric. Its frontier is the frontier of the
    /// ambient space together with the combinatorial boundary of `U`.
    pub fn subspace(&self, us: &BTreeSet<Label>) -> Result<ControlSpace, ControlError> {
        let idx = self.set_indices(us)?;
        let points: Vec<Label> = idx.iter().map(|&i| self.points[i].clone()).collect();
        let index = points.iter().enumerate().map(|(k, p)| (p.clone(), k)).collect();
        let dist = idx.iter().map(|&a| idx.iter().map(|&b| self.dist[a][b]).collect()).collect();
        let adj = self.adj.as_ref().map(|adj| {
            idx.iter()
                .map(|&a| {
                    adj[a]
                        .iter()
                        .filter_map(|(b, w)| idx.iter().position(|x| x == b).map(|k| (k, *w)))
                        .collect()
                })
                .collect()
        });
        let mut frontier: Vec<FrontierPoint> = self
            .frontier
            .iter()
            .map(|f| FrontierPoint { id: f.id.clone(), dist: idx.iter().map(|&i| f.dist[i]).collect() })
            .collect();
        for b in self.boundary(us)? {
            let bi = self.idx(&b)?;
            frontier.push(FrontierPoint { id: b, dist: idx.iter().map(|&i| self.dist[bi][i]).collect() });
        }
        let doc = match self.doc.as_ref().map(|d| &d.metric) {
            Some(MetricDoc::Euclidean { coords }) => Some(SpaceDoc {
                points: points.clone(),
                metric: MetricDoc::Euclidean {
                    coords: points.iter().filter_map(|p| coords.get(p).map(|c| (p.clone(), c.clone()))).collect(),
                },
                frontier: frontier
                    .iter()
                    .map(|f| FrontierDoc {
                        id: f.id.clone(),
                        dist: points
                            .iter()
                            .zip(&f.dist)
                            .filter(|(_, d)| d.is_finite())
                            .map(|(p, d)| (p.clone(), *d))
                            .collect(),
                    })
                    .collect(),
            }),
            _ => None,
        };
        Ok(ControlSpace { points, index, dist, adj, frontier, doc })
    }

    /// The document this space can be rebuilt from, when there is one.
    pub fn to_doc(&self) -> Option<&SpaceDoc> {
        self.doc.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExcisionReport {
    pub holds: bool,
    pub lhs: BTreeSet<Label>,
    pub rhs: BTreeSet<Label>,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn dijkstra(adj: &[BTreeMap<usize, f64>], s: usize) -> Vec<f64> {
    let n = adj.len();
    let mut d = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    d[s] = 0.0;
    for _ in 0..n {
        let u = (0..n).filter(|&i| !done[i] && d[i].is_finite()).min_by(|&a, &b| d[a].total_cmp(&d[b]));
        let Some(u) = u else { break };
        done[u] = true;
        for (&v, &w) in &adj[u] {
            if d[u] + w < d[v] {
                d[v] = d[u] + w;
            }
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[&str]) -> BTreeSet<Label> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn radius_of_samples() {
        let doc = SpaceDoc {
            points: vec!["a".into(), "b".into(), "c".into()],
            metric: MetricDoc::Euclidean {
                coords: BTreeMap::from([
                    ("a".into(), vec![0.0]),
                    ("b".into(), vec![0.4]),
                    ("c".into(), vec![0.9]),
                ]),
            },
            frontier: vec![],
        };
        let x = ControlSpace::from_doc(&doc).unwrap();
        assert_eq!(x.path_radius(&["a".into()]).unwrap(), 0.0);
        assert!((x.path_radius(&["a".into(), "b".into(), "c".into()]).unwrap() - 0.9).abs() < 1e-12);
        assert!(x.path_radius(&["zz".into()]).is_err());
    }

    #[test]
    fn enlarge_line() {
        let x = ControlSpace::line(4);
        assert_eq!(x.enlarge(&set(&["0"]), 1.5).unwrap(), set(&["0", "1"]));
        assert_eq!(x.enlarge(&set(&["0"]), 0.0).unwrap(), set(&["0"]));
        assert_eq!(x.enlarge(&x.all_points(), 1.5).unwrap(), x.all_points());
    }

    #[test]
    fn reduce_line() {
        let x = ControlSpace::line(6);
        assert_eq!(x.reduce(&set(&["0", "1", "2"]), 1.5).unwrap(), set(&["0", "1"]));
        assert_eq!(x.reduce(&x.all_points(), 1.5).unwrap(), x.all_points());
        assert_eq!(x.reduce(&BTreeSet::new(), 1.5).unwrap(), BTreeSet::new());
    }

    #[test]
    fn frontier_of_open_interval() {
        // samples of (0,1) at 0.1, 0.2, ..., 0.9 with ideal ends 0 and 1
        let points: Vec<Label> = (1..10).map(|i| format!("p{i}")).collect();
        let edges = (1..9).map(|i| (format!("p{i}"), format!("p{}", i + 1), 0.1)).collect();
        let lo = (1..10).map(|i| (format!("p{i}"), i as f64 / 10.0)).collect();
        let hi = (1..10).map(|i| (format!("p{i}"), 1.0 - i as f64 / 10.0)).collect();
        let doc = SpaceDoc {
            points,
            metric: MetricDoc::Graph { edges },
            frontier: vec![FrontierDoc { id: "0".into(), dist: lo }, FrontierDoc { id: "1".into(), dist: hi }],
        };
        let x = ControlSpace::from_doc(&doc).unwrap();
        // 0.1 and 0.2 from the left end, 0.8 and 0.9 from the right (0.25 reach, floating 0.3 excluded)
        assert_eq!(x.frontier_enlargement(0.25), set(&["p1", "p2", "p8", "p9"]));
        assert!(x.frontier_enlargement(0.0).is_empty());
        assert!(ControlSpace::line(3).frontier_enlargement(1.0).is_empty());
    }

    #[test]
    fn excision_trivial_cases() {
        let x = ControlSpace::line(5);
        let r = x.check_excision(&x.all_points(), None, 1.5).unwrap();
        assert!(r.holds && r.lhs.is_empty());
        let r = x.check_excision(&BTreeSet::new(), None, 1.5).unwrap();
        assert!(r.holds && r.lhs.is_empty());
        let r = x.check_excision(&set(&["2", "3", "4"]), None, 2.5).unwrap();
        assert!(r.holds);
        assert_eq!(r.lhs, set(&["2", "3"]));
    }

    #[test]
    fn subspace_frontier_contains_boundary() {
        let x = ControlSpace::line(5);
        let u = x.subspace(&set(&["1", "2", "3"])).unwrap();
        assert_eq!(u.frontier().len(), 2);
        assert_eq!(u.frontier_enlargement(1.5), set(&["1", "3"]));
    }
}
