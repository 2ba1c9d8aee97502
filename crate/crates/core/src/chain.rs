//! Simplicial chains with coefficients in the two-element field.
//!
//! Chains are sets of simplices: adding a simplex that is already present cancels it.
//! The homology routines here use exact dense elimination and serve as the reference
//! against which the persistence pipeline is checked.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::gf2::{BitVec, EchelonBasis};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("simplex has no vertices")]
    EmptySimplex,
    #[error("simplex vertices must be strictly increasing")]
    UnsortedVertices,
    #[error("chain dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("chain is not a cycle")]
    NotACycle,
    #[error("complex is not closed under taking faces")]
    NotFaceClosed,
    #[error("parse error: {0}")]
    Parse(String),
}

/// An unoriented simplex given by its strictly increasing vertex ids.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Simplex(Vec<u32>);

impl Simplex {
    pub fn new(vertices: Vec<u32>) -> Result<Self, ChainError> {
        if vertices.is_empty() {
            return Err(ChainError::EmptySimplex);
        }
        if vertices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ChainError::UnsortedVertices);
        }
        Ok(Self(vertices))
    }

    /// Builds a simplex from vertices in any order; duplicates are rejected.
    pub fn from_unsorted(mut vertices: Vec<u32>) -> Result<Self, ChainError> {
        vertices.sort_unstable();
        Self::new(vertices)
    }

    pub fn vertex(v: u32) -> Self {
        Self(alloc::vec![v])
    }

    pub fn edge(a: u32, b: u32) -> Self {
        if a < b {
            Self(alloc::vec![a, b])
        } else {
            Self(alloc::vec![b, a])
        }
    }

    pub fn vertices(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    /// Codimension-one faces; empty for a vertex.
    pub fn faces(&self) -> impl Iterator<Item = Simplex> + '_ {
        let n = if self.0.len() > 1 { self.0.len() } else { 0 };
        (0..n).map(move |skip| {
            Simplex(
                self.0
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != skip)
                    .map(|(_, v)| *v)
                    .collect(),
            )
        })
    }
}

impl fmt::Display for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// A formal sum of same-dimension simplices over GF(2).
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Chain {
    dim: usize,
    terms: BTreeSet<Simplex>,
}

impl Chain {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeSet::new(),
        }
    }

    pub fn from_simplices(
        dim: usize,
        simplices: impl IntoIterator<Item = Simplex>,
    ) -> Result<Self, ChainError> {
        let mut c = Self::zero(dim);
        for s in simplices {
            c.toggle(s)?;
        }
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &BTreeSet<Simplex> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, s: &Simplex) -> bool {
        self.terms.contains(s)
    }

    /// Adds one simplex with coefficient 1.
    pub fn toggle(&mut self, s: Simplex) -> Result<(), ChainError> {
        if s.dim() != self.dim {
            return Err(ChainError::DimensionMismatch {
                expected: self.dim,
                found: s.dim(),
            });
        }
        if !self.terms.remove(&s) {
            self.terms.insert(s);
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Chain) -> Result<(), ChainError> {
        if other.is_empty() {
            return Ok(());
        }
        if self.is_empty() {
            self.dim = other.dim;
        }
        if other.dim != self.dim {
            return Err(ChainError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        for s in &other.terms {
            if !self.terms.remove(s) {
                self.terms.insert(s.clone());
            }
        }
        Ok(())
    }

    pub fn sum(&self, other: &Chain) -> Result<Chain, ChainError> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    /// Vertices touched by the chain, ascending.
    pub fn support_vertices(&self) -> BTreeSet<u32> {
        self.terms
            .iter()
            .flat_map(|s| s.vertices().iter().copied())
            .collect()
    }
}

/// Boundary of a chain; the boundary of a 0-chain is the empty 0-chain.
pub fn boundary(c: &Chain) -> Chain {
    if c.dim == 0 {
        return Chain::zero(0);
    }
    let mut out = Chain::zero(c.dim - 1);
    for s in &c.terms {
        for face in s.faces() {
            if !out.terms.remove(&face) {
                out.terms.insert(face);
            }
        }
    }
    out
}

pub fn is_cycle(c: &Chain) -> bool {
    boundary(c).is_empty()
}

/// A finite face-closed set of simplices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimplicialComplex {
    simplices: BTreeSet<Simplex>,
}

impl SimplicialComplex {
    /// Validates face-closure of the given simplex set.
    pub fn new(simplices: impl IntoIterator<Item = Simplex>) -> Result<Self, ChainError> {
        let simplices: BTreeSet<Simplex> = simplices.into_iter().collect();
        for s in &simplices {
            if s.faces().any(|f| !simplices.contains(&f)) {
                return Err(ChainError::NotFaceClosed);
            }
        }
        Ok(Self { simplices })
    }

    /// Smallest face-closed complex containing every given simplex.
    pub fn closure(simplices: impl IntoIterator<Item = Simplex>) -> Self {
        let mut all = BTreeSet::new();
        let mut stack: Vec<Simplex> = simplices.into_iter().collect();
        while let Some(s) = stack.pop() {
            if all.contains(&s) {
                continue;
            }
            stack.extend(s.faces());
            all.insert(s);
        }
        Self { simplices: all }
    }

    pub fn simplices(&self) -> &BTreeSet<Simplex> {
        &self.simplices
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn contains(&self, s: &Simplex) -> bool {
        self.simplices.contains(s)
    }

    pub fn max_dim(&self) -> usize {
        self.simplices.iter().map(Simplex::dim).max().unwrap_or(0)
    }

    pub fn of_dim(&self, k: usize) -> Vec<&Simplex> {
        self.simplices.iter().filter(|s| s.dim() == k).collect()
    }

    pub fn supports(&self, c: &Chain) -> bool {
        c.terms.iter().all(|s| self.simplices.contains(s))
    }

    fn index_of_dim(&self, k: usize) -> BTreeMap<&Simplex, usize> {
        self.of_dim(k)
            .into_iter()
            .enumerate()
            .map(|(i, s)| (s, i))
            .collect()
    }

    /// Columns of the boundary map from dimension `k` into dimension `k - 1`.
    fn boundary_columns(&self, k: usize) -> (usize, Vec<BitVec>) {
        if k == 0 {
            return (0, Vec::new());
        }
        let rows = self.index_of_dim(k - 1);
        let cols = self
            .of_dim(k)
            .into_iter()
            .map(|s| {
                let mut col = BitVec::zeros(rows.len());
                for f in s.faces() {
                    col.flip(rows[&f]);
                }
                col
            })
            .collect();
        (rows.len(), cols)
    }

    fn boundary_rank(&self, k: usize) -> usize {
        let (len, cols) = self.boundary_columns(k);
        crate::gf2::rank(len, &cols)
    }
}

/// Whether `c` is the boundary of some chain of `complex`.
pub fn is_boundary(c: &Chain, complex: &SimplicialComplex) -> bool {
    if c.is_empty() {
        return true;
    }
    if !complex.supports(c) {
        return false;
    }
    let (len, cols) = complex.boundary_columns(c.dim + 1);
    if cols.is_empty() {
        return false;
    }
    let rows = complex.index_of_dim(c.dim);
    let mut target = BitVec::zeros(len);
    for s in &c.terms {
        target.set(rows[s]);
    }
    let mut basis = EchelonBasis::new(len);
    for col in cols {
        basis.insert(col);
    }
    basis.contains(&target)
}

/// Betti number of dimension `k`: dim ker of the k-th boundary minus rank of the next.
pub fn betti(complex: &SimplicialComplex, k: usize) -> usize {
    let n_k = complex.of_dim(k).len();
    n_k - complex.boundary_rank(k) - complex.boundary_rank(k + 1)
}

/// Whether two cycles are homologous in `complex`.
pub fn class_equal(c1: &Chain, c2: &Chain, complex: &SimplicialComplex) -> Result<bool, ChainError> {
    if !is_cycle(c1) || !is_cycle(c2) {
        return Err(ChainError::NotACycle);
    }
    Ok(is_boundary(&c1.sum(c2)?, complex))
}

impl fmt::Display for Chain {
    /// `k: v0 v1 ; v0 v1 ; ...`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.dim)?;
        for (i, s) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" ;")?;
            }
            write!(f, " {s}")?;
        }
        Ok(())
    }
}

impl FromStr for Chain {
    type Err = ChainError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let (head, body) = line
            .split_once(':')
            .ok_or_else(|| ChainError::Parse("missing ':' after dimension".to_string()))?;
        let dim: usize = head
            .trim()
            .parse()
            .map_err(|_| ChainError::Parse(alloc::format!("bad dimension {:?}", head.trim())))?;
        let mut chain = Chain::zero(dim);
        for part in body.split(';') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let verts = part
                .split_whitespace()
                .map(|t| {
                    t.parse::<u32>()
                        .map_err(|_| ChainError::Parse(alloc::format!("bad vertex id {t:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            chain.toggle(Simplex::from_unsorted(verts)?)?;
        }
        Ok(chain)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn s(v: &[u32]) -> Simplex {
        Simplex::new(v.to_vec()).unwrap()
    }

    fn chain(dim: usize, sx: &[&[u32]]) -> Chain {
        Chain::from_simplices(dim, sx.iter().map(|v| s(v))).unwrap()
    }

    pub(crate) fn hollow_triangle() -> SimplicialComplex {
        SimplicialComplex::closure([s(&[0, 1]), s(&[1, 2]), s(&[0, 2])])
    }

    pub(crate) fn figure_eight() -> SimplicialComplex {
        SimplicialComplex::closure([
            s(&[0, 1]),
            s(&[1, 2]),
            s(&[0, 2]),
            s(&[0, 3]),
            s(&[3, 4]),
            s(&[0, 4]),
        ])
    }

    #[test]
    fn simplex_validation() {
        assert_eq!(Simplex::new(vec![]), Err(ChainError::EmptySimplex));
        assert_eq!(Simplex::new(vec![2, 1]), Err(ChainError::UnsortedVertices));
        assert_eq!(Simplex::new(vec![1, 1]), Err(ChainError::UnsortedVertices));
        assert_eq!(s(&[0, 3, 7]).dim(), 2);
    }

    #[test]
    fn edge_boundary_is_its_endpoints() {
        let b = boundary(&chain(1, &[&[0, 1]]));
        assert_eq!(b, chain(0, &[&[0], &[1]]));
    }

    #[test]
    fn closed_loop_has_empty_boundary() {
        assert!(boundary(&chain(1, &[&[0, 1], &[1, 2], &[0, 2]])).is_empty());
        assert!(boundary(&boundary(&chain(2, &[&[0, 1, 2]]))).is_empty());
        assert!(boundary(&chain(0, &[&[4]])).is_empty());
    }

    #[test]
    fn cycle_predicate() {
        assert!(is_cycle(&chain(1, &[&[0, 1], &[1, 2], &[0, 2]])));
        assert!(!is_cycle(&chain(1, &[&[0, 1], &[1, 2]])));
        assert!(is_cycle(&Chain::zero(1)));
    }

    #[test]
    fn adding_twice_cancels() {
        let mut c = Chain::zero(1);
        c.toggle(s(&[0, 1])).unwrap();
        c.toggle(s(&[0, 1])).unwrap();
        assert!(c.is_empty());
        assert!(c.toggle(s(&[0])).is_err());
    }

    #[test]
    fn boundary_membership() {
        let loop_ = chain(1, &[&[0, 1], &[1, 2], &[0, 2]]);
        let filled = SimplicialComplex::closure([s(&[0, 1, 2])]);
        assert!(is_boundary(&loop_, &filled));
        assert!(!is_boundary(&loop_, &hollow_triangle()));
        let petals = chain(1, &[&[0, 1], &[1, 2], &[0, 2], &[0, 3], &[3, 4], &[0, 4]]);
        assert!(!is_boundary(&petals, &figure_eight()));
    }

    #[test]
    fn betti_numbers_of_small_complexes() {
        assert_eq!(betti(&hollow_triangle(), 0), 1);
        assert_eq!(betti(&hollow_triangle(), 1), 1);
        assert_eq!(betti(&figure_eight(), 1), 2);
        assert_eq!(betti(&SimplicialComplex::closure([s(&[0, 1, 2])]), 1), 0);
        let two = SimplicialComplex::closure([s(&[0, 1]), s(&[2, 3])]);
        assert_eq!(betti(&two, 0), 2);
    }

    #[test]
    fn homology_classes() {
        let k = SimplicialComplex::closure([s(&[0, 1, 2]), s(&[2, 3]), s(&[0, 3])]);
        let outer = chain(1, &[&[0, 1], &[1, 2], &[2, 3], &[0, 3]]);
        let inner = chain(1, &[&[0, 2], &[2, 3], &[0, 3]]);
        assert_eq!(class_equal(&outer, &outer, &k), Ok(true));
        assert_eq!(class_equal(&outer, &inner, &k), Ok(true));

        let f8 = figure_eight();
        let a = chain(1, &[&[0, 1], &[1, 2], &[0, 2]]);
        let b = chain(1, &[&[0, 3], &[3, 4], &[0, 4]]);
        assert_eq!(class_equal(&a, &b, &f8), Ok(false));
        let open = chain(1, &[&[0, 1]]);
        assert_eq!(class_equal(&a, &open, &f8), Err(ChainError::NotACycle));
    }

    #[test]
    fn text_format_round_trip() {
        let c: Chain = "1: 0 1 ; 2 1 ; 0 2".parse().unwrap();
        assert_eq!(c, chain(1, &[&[0, 1], &[1, 2], &[0, 2]]));
        assert_eq!(c.to_string(), "1: 0 1 ; 0 2 ; 1 2");
        assert_eq!("2:".parse::<Chain>().unwrap(), Chain::zero(2));
        assert!("x: 1".parse::<Chain>().is_err());
        assert!("1: 0 1 2".parse::<Chain>().is_err());
    }

    #[test]
    fn face_closure_is_validated() {
        assert_eq!(
            SimplicialComplex::new([s(&[0, 1])]),
            Err(ChainError::NotFaceClosed)
        );
        assert!(SimplicialComplex::new([s(&[0]), s(&[1]), s(&[0, 1])]).is_ok());
    }
}
