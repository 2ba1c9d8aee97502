//! Filtrations, boundary-matrix reduction and persistence diagrams.
//!
//! Reduction is the standard left-to-right column algorithm with clearing: higher
//! dimensions are reduced first so that columns of simplices that are known to be
//! positive never need to be touched. Representatives of finite bars are the reduced
//! death columns; representatives of essential classes come from the tracked
//! change-of-basis column.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::chain::{Chain, Simplex};
use crate::vecops::dist;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PersistenceError {
    #[error("input point cloud is empty")]
    EmptyInput,
    #[error("point {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("maximum simplex dimension {0} is not supported (at most 2)")]
    UnsupportedDimension(usize),
    #[error("edge ({0}, {1}) has negative weight")]
    NegativeWeight(usize, usize),
    #[error("simplex {0:?} appears before one of its faces")]
    FaceOrder(Simplex),
    #[error("filtration value must be finite and non-negative")]
    InvalidBirth,
    #[error("infinite bar counts differ in dimension {dim}: {left} vs {right}")]
    InfiniteBarMismatch {
        dim: usize,
        left: usize,
        right: usize,
    },
    #[error("simplex {0:?} is not part of the filtration")]
    UnknownSimplex(Simplex),
}

/// Simplices paired with birth values, in filtration order.
#[derive(Clone, Debug, PartialEq)]
pub struct Filtration {
    entries: Vec<(Simplex, f64)>,
}

fn filtration_order(a: &(Simplex, f64), b: &(Simplex, f64)) -> Ordering {
    a.1.total_cmp(&b.1)
        .then(a.0.dim().cmp(&b.0.dim()))
        .then_with(|| a.0.cmp(&b.0))
}

impl Filtration {
    /// Sorts by (birth, dimension, vertices) and checks that faces come first.
    pub fn new(mut entries: Vec<(Simplex, f64)>) -> Result<Self, PersistenceError> {
        if entries.iter().any(|(_, b)| !b.is_finite() || *b < 0.0) {
            return Err(PersistenceError::InvalidBirth);
        }
        entries.sort_by(filtration_order);
        entries.dedup_by(|a, b| a.0 == b.0);
        let mut seen: BTreeMap<&Simplex, ()> = BTreeMap::new();
        for (s, _) in &entries {
            if s.faces().any(|f| !seen.contains_key(&f)) {
                return Err(PersistenceError::FaceOrder(s.clone()));
            }
            seen.insert(s, ());
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(Simplex, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct birth values, ascending.
    pub fn scales(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.entries.iter().map(|(_, b)| *b).collect();
        v.dedup();
        v
    }

    /// Simplices born at or before `scale`.
    pub fn complex_at(&self, scale: f64) -> impl Iterator<Item = &Simplex> {
        self.entries
            .iter()
            .take_while(move |(_, b)| *b <= scale)
            .map(|(s, _)| s)
    }

    fn index(&self) -> BTreeMap<Simplex, usize> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, (s, _))| (s.clone(), i))
            .collect()
    }
}

/// Vietoris–Rips filtration up to `max_dim` (at most 2), cut off at `max_scale`.
pub fn build_vr(
    points: &[Vec<f64>],
    max_dim: usize,
    max_scale: f64,
) -> Result<Filtration, PersistenceError> {
    let first = points.first().ok_or(PersistenceError::EmptyInput)?;
    if max_dim > 2 {
        return Err(PersistenceError::UnsupportedDimension(max_dim));
    }
    for (index, p) in points.iter().enumerate() {
        if p.len() != first.len() {
            return Err(PersistenceError::DimensionMismatch {
                index,
                expected: first.len(),
                found: p.len(),
            });
        }
    }
    let n = points.len();
    let mut table = vec![f64::INFINITY; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist(&points[i], &points[j]);
            table[i * n + j] = d;
            table[j * n + i] = d;
        }
    }
    let weight = |i: usize, j: usize| Some(table[i * n + j]).filter(|d| *d <= max_scale);
    Ok(flag_filtration(n, max_dim, weight))
}

/// Flag complex of a weighted graph, with edge births from `weight` (None = absent).
fn flag_filtration(n: usize, max_dim: usize, weight: impl Fn(usize, usize) -> Option<f64>) -> Filtration {
    let mut entries: Vec<(Simplex, f64)> = (0..n).map(|v| (Simplex::vertex(v as u32), 0.0)).collect();
    if max_dim >= 1 {
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in adj.iter_mut().enumerate() {
            for j in (i + 1)..n {
                if let Some(w) = weight(i, j) {
                    entries.push((Simplex::edge(i as u32, j as u32), w));
                    row.push((j, w));
                }
            }
        }
        if max_dim >= 2 {
            for i in 0..n {
                for (a, &(j, wij)) in adj[i].iter().enumerate() {
                    for &(k, wik) in &adj[i][a + 1..] {
                        if let Ok(p) = adj[j].binary_search_by(|(v, _)| v.cmp(&k)) {
                            let wjk = adj[j][p].1;
                            let s = Simplex::new(vec![i as u32, j as u32, k as u32])
                                .expect("increasing triple");
                            entries.push((s, wij.max(wik).max(wjk)));
                        }
                    }
                }
            }
        }
    }
    entries.sort_by(filtration_order);
    Filtration { entries }
}

/// An undirected graph with non-negative edge weights.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightedGraph {
    pub nodes: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

/// Flag complex (up to triangles) of a weighted graph: vertices at 0, edges at their
/// weight, triangles at their heaviest edge.
pub fn build_graph_filtration(graph: &WeightedGraph) -> Result<Filtration, PersistenceError> {
    let n = graph.nodes;
    let mut w = BTreeMap::new();
    for &(i, j, x) in &graph.edges {
        if x < 0.0 || x.is_nan() {
            return Err(PersistenceError::NegativeWeight(i, j));
        }
        if i == j {
            continue;
        }
        let key = (i.min(j), i.max(j));
        let e = w.entry(key).or_insert(x);
        if x < *e {
            *e = x;
        }
    }
    Ok(flag_filtration(n, 2, |i, j| w.get(&(i, j)).copied()))
}

/// One persistence interval with a representative cycle.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bar {
    pub dim: usize,
    pub birth: f64,
    /// `f64::INFINITY` for essential classes.
    #[cfg_attr(feature = "serde", serde(with = "crate::vecops::serde_extended"))]
    pub death: f64,
    pub representative: Chain,
}

impl Bar {
    pub fn lifetime(&self) -> f64 {
        self.death - self.birth
    }

    pub fn is_infinite(&self) -> bool {
        self.death.is_infinite()
    }

    /// Alive on the half-open interval `[birth, death)`.
    pub fn alive_at(&self, scale: f64) -> bool {
        self.birth <= scale && scale < self.death
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PersistenceDiagram {
    pub bars: Vec<Bar>,
}

impl PersistenceDiagram {
    pub fn of_dim(&self, dim: usize) -> impl Iterator<Item = &Bar> {
        self.bars.iter().filter(move |b| b.dim == dim)
    }

    pub fn alive_count(&self, dim: usize, scale: f64) -> usize {
        self.of_dim(dim).filter(|b| b.alive_at(scale)).count()
    }

    pub fn infinite_count(&self, dim: usize) -> usize {
        self.of_dim(dim).filter(|b| b.is_infinite()).count()
    }

    /// Bars of `dim` ordered by decreasing lifetime.
    pub fn ranked(&self, dim: usize) -> Vec<&Bar> {
        let mut v: Vec<&Bar> = self.of_dim(dim).collect();
        v.sort_by(|a, b| b.lifetime().total_cmp(&a.lifetime()));
        v
    }
}

type Column = Vec<usize>;

/// Symmetric difference of two sorted index lists.
fn xor_into(target: &mut Column, other: &[usize]) {
    let mut out = Vec::with_capacity(target.len() + other.len());
    let (mut i, mut j) = (0, 0);
    while i < target.len() && j < other.len() {
        match target[i].cmp(&other[j]) {
            Ordering::Less => {
                out.push(target[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(other[j]);
                j += 1;
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&target[i..]);
    out.extend_from_slice(&other[j..]);
    *target = out;
}

/// Reduced boundary matrix of a filtration.
#[derive(Clone, Debug)]
pub struct Reduction {
    filtration: Filtration,
    index: BTreeMap<Simplex, usize>,
    reduced: Vec<Column>,
    /// `pivot_of[i] = Some(j)` when row `i` is the lowest entry of reduced column `j`.
    pivot_of: Vec<Option<usize>>,
    /// Change-of-basis columns for unpaired positive simplices of dimension ≥ 1.
    cycles: BTreeMap<usize, Column>,
    /// Highest homology dimension reported.
    max_hom_dim: usize,
}

fn boundary_column(s: &Simplex, index: &BTreeMap<Simplex, usize>) -> Column {
    let mut col: Column = s.faces().map(|f| index[&f]).collect();
    col.sort_unstable();
    col
}

/// Reduces `col` against earlier pivots; returns the change-of-basis column when `basis_of`
/// is given.
fn reduce_column(
    col: &mut Column,
    j: usize,
    reduced: &[Column],
    pivot_of: &[Option<usize>],
    basis_of: Option<&[Column]>,
) -> Column {
    let mut basis: Column = vec![j];
    while let Some(&low) = col.last() {
        match pivot_of[low] {
            Some(k) => {
                xor_into(col, &reduced[k]);
                if let Some(v) = basis_of {
                    xor_into(&mut basis, &v[k]);
                }
            }
            None => break,
        }
    }
    basis
}

impl Reduction {
    /// Full reduction in every dimension present.
    pub fn new(filtration: &Filtration) -> Self {
        Self::up_to(filtration, usize::MAX)
    }

    /// Reduction reporting homology up to `max_hom_dim` only.
    ///
    /// Dimension `max_hom_dim + 1` is not reduced in full: its negative simplices are
    /// found by a coboundary (cohomology) pass and only those columns are reduced. This
    /// skips the many positive triangles of a truncated Rips complex.
    pub fn up_to(filtration: &Filtration, max_hom_dim: usize) -> Self {
        let top = filtration.entries.iter().map(|(s, _)| s.dim()).max().unwrap_or(0);
        if max_hom_dim >= top {
            Self::full(filtration, top)
        } else {
            Self::truncated(filtration, max_hom_dim)
        }
    }

    fn full(filtration: &Filtration, top: usize) -> Self {
        let n = filtration.len();
        let index = filtration.index();
        let mut reduced: Vec<Column> = vec![Vec::new(); n];
        let mut pivot_of: Vec<Option<usize>> = vec![None; n];
        let mut cleared = vec![false; n];
        let mut cycles = BTreeMap::new();
        let mut basis_of: Vec<Column> = vec![Vec::new(); n];

        // Clearing: a simplex that is the pivot of a higher column is positive and its own
        // column would reduce to zero, so it is skipped.
        for dim in (1..=top).rev() {
            for j in 0..n {
                let s = &filtration.entries[j].0;
                if s.dim() != dim || cleared[j] {
                    continue;
                }
                let mut col = boundary_column(s, &index);
                let basis = reduce_column(&mut col, j, &reduced, &pivot_of, Some(&basis_of));
                match col.last() {
                    Some(&low) => {
                        pivot_of[low] = Some(j);
                        cleared[low] = true;
                        basis_of[j] = basis;
                    }
                    None => {
                        cycles.insert(j, basis);
                    }
                }
                reduced[j] = col;
            }
        }
        cycles.retain(|j, _| pivot_of[*j].is_none());
        Self {
            filtration: filtration.clone(),
            index,
            reduced,
            pivot_of,
            cycles,
            max_hom_dim: top,
        }
    }

    fn truncated(filtration: &Filtration, h: usize) -> Self {
        let n = filtration.len();
        let entries = &filtration.entries;
        let index = filtration.index();
        let mut reduced: Vec<Column> = vec![Vec::new(); n];
        let mut pivot_of: Vec<Option<usize>> = vec![None; n];
        let mut cycles = BTreeMap::new();
        let mut basis_of: Vec<Column> = vec![Vec::new(); n];

        for dim in 1..=h {
            for j in 0..n {
                let s = &entries[j].0;
                if s.dim() != dim {
                    continue;
                }
                let mut col = boundary_column(s, &index);
                let basis = reduce_column(&mut col, j, &reduced, &pivot_of, Some(&basis_of));
                match col.last() {
                    Some(&low) => {
                        pivot_of[low] = Some(j);
                        basis_of[j] = basis;
                    }
                    None => {
                        cycles.insert(j, basis);
                    }
                }
                reduced[j] = col;
            }
        }

        // Coboundary pass over dimension h in reverse order. Pivots are the earliest
        // cofaces; the pairs coincide with those of the homology reduction.
        let mut cofaces: Vec<Column> = vec![Vec::new(); n];
        for (t, (s, _)) in entries.iter().enumerate() {
            if s.dim() == h + 1 {
                for f in s.faces() {
                    cofaces[index[&f]].push(t);
                }
            }
        }
        let mut co_reduced: Vec<Column> = vec![Vec::new(); n];
        let mut co_pivot: Vec<Option<usize>> = vec![None; n];
        let mut negative = Vec::new();
        for j in (0..n).rev() {
            // Simplices already killing a lower class, and those never reaching a coface,
            // contribute nothing.
            if entries[j].0.dim() != h || !reduced[j].is_empty() {
                continue;
            }
            let mut col = core::mem::take(&mut cofaces[j]);
            while let Some(&first) = col.first() {
                match co_pivot[first] {
                    Some(k) => xor_into(&mut col, &co_reduced[k]),
                    None => break,
                }
            }
            if let Some(&first) = col.first() {
                co_pivot[first] = Some(j);
                negative.push(first);
                co_reduced[j] = col;
            }
        }
        negative.sort_unstable();
        for j in negative {
            let mut col = boundary_column(&entries[j].0, &index);
            reduce_column(&mut col, j, &reduced, &pivot_of, None);
            let low = *col.last().expect("cohomology pairing marks negative columns");
            pivot_of[low] = Some(j);
            reduced[j] = col;
        }
        cycles.retain(|j, _| pivot_of[*j].is_none());
        Self {
            filtration: filtration.clone(),
            index,
            reduced,
            pivot_of,
            cycles,
            max_hom_dim: h,
        }
    }

    pub fn filtration(&self) -> &Filtration {
        &self.filtration
    }

    fn chain_from(&self, col: &[usize]) -> Chain {
        let dim = col
            .first()
            .map(|&i| self.filtration.entries[i].0.dim())
            .unwrap_or(0);
        Chain::from_simplices(dim, col.iter().map(|&i| self.filtration.entries[i].0.clone()))
            .expect("reduced columns are homogeneous")
    }

    pub fn diagram(&self) -> PersistenceDiagram {
        let entries = &self.filtration.entries;
        let mut bars = Vec::new();
        for (j, col) in self.reduced.iter().enumerate() {
            if let Some(&low) = col.last() {
                let (birth_s, birth) = &entries[low];
                bars.push(Bar {
                    dim: birth_s.dim(),
                    birth: *birth,
                    death: entries[j].1,
                    representative: self.chain_from(col),
                });
            }
        }
        for (i, (s, birth)) in entries.iter().enumerate() {
            let positive = self.reduced[i].is_empty();
            if positive && self.pivot_of[i].is_none() && s.dim() <= self.max_hom_dim {
                let representative = if s.dim() == 0 {
                    Chain::from_simplices(0, [s.clone()]).expect("vertex chain")
                } else {
                    self.chain_from(&self.cycles[&i])
                };
                bars.push(Bar {
                    dim: s.dim(),
                    birth: *birth,
                    death: f64::INFINITY,
                    representative,
                });
            }
        }
        bars.sort_by(|a, b| {
            a.dim
                .cmp(&b.dim)
                .then(a.birth.total_cmp(&b.birth))
                .then(a.death.total_cmp(&b.death))
        });
        PersistenceDiagram { bars }
    }

    /// Smallest filtration value at which `c` becomes a boundary, `None` if never.
    ///
    /// Reduction by pivots is forced, so the set of reduced columns used is unique and
    /// its latest member fixes the scale.
    pub fn boundary_death(&self, c: &Chain) -> Result<Option<f64>, PersistenceError> {
        let mut col: Column = Vec::with_capacity(c.len());
        for s in c.terms() {
            col.push(
                *self
                    .index
                    .get(s)
                    .ok_or_else(|| PersistenceError::UnknownSimplex(s.clone()))?,
            );
        }
        col.sort_unstable();
        let mut latest: Option<usize> = None;
        while let Some(&low) = col.last() {
            match self.pivot_of[low] {
                Some(k) => {
                    xor_into(&mut col, &self.reduced[k]);
                    latest = Some(latest.map_or(k, |l| l.max(k)));
                }
                None => return Ok(None),
            }
        }
        Ok(Some(latest.map_or(0.0, |k| self.filtration.entries[k].1)))
    }

    /// Filtration value at which every simplex of `c` is present.
    pub fn chain_birth(&self, c: &Chain) -> Result<f64, PersistenceError> {
        let mut b: f64 = 0.0;
        for s in c.terms() {
            let i = *self
                .index
                .get(s)
                .ok_or_else(|| PersistenceError::UnknownSimplex(s.clone()))?;
            b = b.max(self.filtration.entries[i].1);
        }
        Ok(b)
    }
}

/// Barcode with representatives.
pub fn reduce(f: &Filtration) -> PersistenceDiagram {
    Reduction::new(f).diagram()
}

/// Barcode restricted to homology dimensions `0..=max_hom_dim`.
pub fn reduce_up_to(f: &Filtration, max_hom_dim: usize) -> PersistenceDiagram {
    Reduction::up_to(f, max_hom_dim).diagram()
}

/// Bars whose lifetime is at least `tau`; essential bars are always kept.
pub fn pers_tau(d: &PersistenceDiagram, tau: f64) -> Vec<Bar> {
    d.bars
        .iter()
        .filter(|b| b.is_infinite() || b.lifetime() >= tau)
        .cloned()
        .collect()
}

/// Threshold at the widest gap between consecutive sorted finite lifetimes of `dim`.
///
/// Returns the upper end of the gap so that only bars above it survive; `0.0` when
/// fewer than two finite bars exist.
pub fn elbow_tau(d: &PersistenceDiagram, dim: usize) -> f64 {
    let mut lifetimes: Vec<f64> = d
        .of_dim(dim)
        .filter(|b| !b.is_infinite())
        .map(Bar::lifetime)
        .collect();
    lifetimes.sort_by(f64::total_cmp);
    let mut best = (0.0, 0.0);
    for w in lifetimes.windows(2) {
        let gap = w[1] - w[0];
        if gap > best.0 {
            best = (gap, w[1]);
        }
    }
    best.1
}

/// Exact bottleneck distance between the `dim` parts of two diagrams.
///
/// Zero-lifetime bars lie on the diagonal and are dropped first.
pub fn bottleneck(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    dim: usize,
) -> Result<f64, PersistenceError> {
    let mut inf1: Vec<f64> = d1.of_dim(dim).filter(|b| b.is_infinite()).map(|b| b.birth).collect();
    let mut inf2: Vec<f64> = d2.of_dim(dim).filter(|b| b.is_infinite()).map(|b| b.birth).collect();
    if inf1.len() != inf2.len() {
        return Err(PersistenceError::InfiniteBarMismatch {
            dim,
            left: inf1.len(),
            right: inf2.len(),
        });
    }
    inf1.sort_by(f64::total_cmp);
    inf2.sort_by(f64::total_cmp);
    let essential = inf1
        .iter()
        .zip(&inf2)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let a: Vec<(f64, f64)> = d1
        .of_dim(dim)
        .filter(|b| !b.is_infinite() && b.lifetime() > 0.0)
        .map(|b| (b.birth, b.death))
        .collect();
    let b: Vec<(f64, f64)> = d2
        .of_dim(dim)
        .filter(|b| !b.is_infinite() && b.lifetime() > 0.0)
        .map(|b| (b.birth, b.death))
        .collect();
    Ok(essential.max(finite_bottleneck(&a, &b)))
}

fn finite_bottleneck(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let size = n + m;
    if size == 0 {
        return 0.0;
    }
    // Left: a_0..a_n, then diagonal projections of b. Right: b_0..b_m, then
    // diagonal projections of a.
    let half = |p: &(f64, f64)| (p.1 - p.0) / 2.0;
    let cost = |l: usize, r: usize| -> Option<f64> {
        match (l < n, r < m) {
            (true, true) => {
                let (p, q) = (a[l], b[r]);
                Some((p.0 - q.0).abs().max((p.1 - q.1).abs()))
            }
            (true, false) => (r - m == l).then(|| half(&a[l])),
            (false, true) => (l - n == r).then(|| half(&b[r])),
            (false, false) => Some(0.0),
        }
    };
    let mut candidates: Vec<f64> = Vec::new();
    for l in 0..size {
        for r in 0..size {
            if let Some(c) = cost(l, r) {
                candidates.push(c);
            }
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let feasible = |threshold: f64| {
        let adj: Vec<Vec<usize>> = (0..size)
            .map(|l| {
                (0..size)
                    .filter(|&r| cost(l, r).is_some_and(|c| c <= threshold))
                    .collect()
            })
            .collect();
        max_matching(&adj, size) == size
    };
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

/// Hopcroft–Karp maximum bipartite matching.
fn max_matching(adj: &[Vec<usize>], right: usize) -> usize {
    const NIL: usize = usize::MAX;
    let left = adj.len();
    let mut match_l = vec![NIL; left];
    let mut match_r = vec![NIL; right];
    let mut dist = vec![0usize; left];
    let mut result = 0;
    loop {
        // BFS layering from free left vertices.
        let mut queue = Vec::with_capacity(left);
        for l in 0..left {
            if match_l[l] == NIL {
                dist[l] = 0;
                queue.push(l);
            } else {
                dist[l] = usize::MAX;
            }
        }
        let mut found = false;
        let mut head = 0;
        while head < queue.len() {
            let l = queue[head];
            head += 1;
            for &r in &adj[l] {
                let next = match_r[r];
                if next == NIL {
                    found = true;
                } else if dist[next] == usize::MAX {
                    dist[next] = dist[l] + 1;
                    queue.push(next);
                }
            }
        }
        if !found {
            break;
        }
        fn augment(
            l: usize,
            adj: &[Vec<usize>],
            match_l: &mut [usize],
            match_r: &mut [usize],
            dist: &mut [usize],
        ) -> bool {
            for &r in &adj[l] {
                let next = match_r[r];
                if next == usize::MAX
                    || (dist[next] == dist[l] + 1 && augment(next, adj, match_l, match_r, dist))
                {
                    match_l[l] = r;
                    match_r[r] = l;
                    return true;
                }
            }
            dist[l] = usize::MAX;
            false
        }
        for l in 0..left {
            if match_l[l] == NIL && augment(l, adj, &mut match_l, &mut match_r, &mut dist) {
                result += 1;
            }
        }
    }
    result
}
