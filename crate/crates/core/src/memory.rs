//! The cycle library: admitted loop classes, alignment-cost retrieval and the
//! admit/falsify update.
//!
//! Classes found in different episodes live in different complexes. To compare them,
//! every path is mapped onto a shared landmark set and tested in the *anchored complex*:
//! landmarks joined by every edge some stored or candidate path has walked (born at 0)
//! plus Rips edges between landmarks (born at their length), filled by flag triangles.
//! Two closed paths carry the same class at scale `s` when their sum is a boundary by
//! scale `s`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::chain::{Chain, Simplex};
use crate::persistence::{Bar, Filtration, PersistenceError, Reduction};
use crate::tasks::{LatentTrajectory, Modality, StateGraph};
use crate::vecops::{dist, dist2};

pub type ClassId = u64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MemoryError {
    #[error("unknown class id {0}")]
    UnknownClassId(ClassId),
    #[error("class id {0} is already stored")]
    DuplicateClassId(ClassId),
    #[error("libraries do not share a landmark anchor space")]
    NoSharedAnchor,
    #[error("latent dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Persistence(#[from] PersistenceError),
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CycleRecord {
    pub class_id: ClassId,
    /// Closed landmark path: the last point repeats the first.
    pub representative_path: Vec<Vec<f64>>,
    #[cfg_attr(feature = "serde", serde(with = "crate::vecops::serde_extended"))]
    pub lifetime: f64,
    pub dim: usize,
    pub modality_tags: BTreeSet<Modality>,
    pub hit_count: u64,
    pub created_episode: u64,
    /// Trajectory steps covered by one path segment.
    pub node_steps: usize,
}

impl CycleRecord {
    /// Path points without the closing repeat.
    pub fn nodes(&self) -> &[Vec<f64>] {
        let n = self.representative_path.len();
        &self.representative_path[..n.saturating_sub(1)]
    }

    pub fn latent_dim(&self) -> usize {
        self.representative_path.first().map_or(0, Vec::len)
    }
}

/// Landmark and anchored-complex knobs.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MemoryParams {
    /// New landmarks are added while some seen state is farther than this from all.
    pub landmark_radius: f64,
    pub max_landmarks: usize,
    /// Rips edges between landmarks are cut off here.
    pub anchor_max_scale: f64,
}

impl Default for MemoryParams {
    fn default() -> Self {
        Self {
            landmark_radius: 0.1,
            max_landmarks: 128,
            anchor_max_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CycleLibrary {
    records: Vec<CycleRecord>,
    landmarks: Vec<Vec<f64>>,
    /// Identifies the latent coordinate system; libraries are comparable only within one.
    pub anchor_space: u64,
    next_id: ClassId,
}

impl CycleLibrary {
    pub fn new(anchor_space: u64) -> Self {
        Self {
            anchor_space,
            ..Self::default()
        }
    }

    /// Records in ascending class id.
    pub fn records(&self) -> &[CycleRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: ClassId) -> Option<&CycleRecord> {
        self.records.iter().find(|r| r.class_id == id)
    }

    pub fn class_ids(&self) -> Vec<ClassId> {
        self.records.iter().map(|r| r.class_id).collect()
    }

    pub fn landmarks(&self) -> &[Vec<f64>] {
        &self.landmarks
    }

    pub fn record_hit(&mut self, id: ClassId) {
        if let Some(r) = self.records.iter_mut().find(|r| r.class_id == id) {
            r.hit_count += 1;
        }
    }

    /// Greedy max-min extension of the landmark set by newly seen states. Existing
    /// landmarks never move, so stored paths keep their anchoring.
    pub fn observe(&mut self, states: &[Vec<f64>], params: &MemoryParams) {
        if states.is_empty() {
            return;
        }
        let mut nearest: Vec<f64> = states
            .iter()
            .map(|z| {
                self.landmarks
                    .iter()
                    .map(|l| dist(l, z))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        while self.landmarks.len() < params.max_landmarks {
            let (i, far) = nearest
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, d)| if *d > best.1 { (i, *d) } else { best });
            if far <= params.landmark_radius {
                break;
            }
            let l = states[i].clone();
            for (d, z) in nearest.iter_mut().zip(states) {
                *d = d.min(dist(&l, z));
            }
            self.landmarks.push(l);
        }
    }
}

fn nearest_index(points: &[Vec<f64>], z: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, p) in points.iter().enumerate() {
        let d = dist2(p, z);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Landmark edges walked by a path, as ordered vertex pairs.
fn walked_edges(landmarks: &[Vec<f64>], path: &[Vec<f64>]) -> Vec<(u32, u32)> {
    let ids: Vec<u32> = path.iter().map(|z| nearest_index(landmarks, z) as u32).collect();
    ids.windows(2)
        .filter(|w| w[0] != w[1])
        .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
        .collect()
}

/// The anchored complex over a landmark set, reduced once and queried many times.
#[derive(Clone, Debug)]
pub struct AnchoredComplex {
    landmarks: Vec<Vec<f64>>,
    reduction: Reduction,
}

impl AnchoredComplex {
    pub fn build(landmarks: &[Vec<f64>], paths: &[&[Vec<f64>]], params: &MemoryParams) -> Self {
        let n = landmarks.len();
        let mut births: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let d = dist(&landmarks[i], &landmarks[j]);
                if d <= params.anchor_max_scale {
                    births.insert((i as u32, j as u32), d);
                }
            }
        }
        for path in paths {
            for e in walked_edges(landmarks, path) {
                births.insert(e, 0.0);
            }
        }
        let mut adj: Vec<BTreeMap<u32, f64>> = vec![BTreeMap::new(); n];
        let mut entries: Vec<(Simplex, f64)> = (0..n as u32).map(|v| (Simplex::vertex(v), 0.0)).collect();
        for (&(a, b), &w) in &births {
            adj[a as usize].insert(b, w);
            entries.push((Simplex::edge(a, b), w));
        }
        for (a, nbrs) in adj.iter().enumerate() {
            for (&b, &wab) in nbrs {
                for (&c, &wac) in nbrs.range(b + 1..) {
                    if let Some(&wbc) = adj[b as usize].get(&c) {
                        let t = Simplex::new(vec![a as u32, b, c]).expect("increasing triple");
                        entries.push((t, wab.max(wac).max(wbc)));
                    }
                }
            }
        }
        let f = Filtration::new(entries).expect("flag complex is face-closed");
        Self {
            landmarks: landmarks.to_vec(),
            reduction: Reduction::up_to(&f, 1),
        }
    }

    /// Anchored complex of a library plus extra candidate paths.
    pub fn of_library(lib: &CycleLibrary, extra: &[&[Vec<f64>]], params: &MemoryParams) -> Self {
        let mut paths: Vec<&[Vec<f64>]> = lib
            .records
            .iter()
            .map(|r| r.representative_path.as_slice())
            .collect();
        paths.extend_from_slice(extra);
        Self::build(&lib.landmarks, &paths, params)
    }

    pub fn landmarks(&self) -> &[Vec<f64>] {
        &self.landmarks
    }

    pub fn reduction(&self) -> &Reduction {
        &self.reduction
    }

    /// The 1-chain a closed path walks in the anchored complex.
    pub fn chain_of(&self, path: &[Vec<f64>]) -> Chain {
        let mut c = Chain::zero(1);
        for (a, b) in walked_edges(&self.landmarks, path) {
            c.toggle(Simplex::edge(a, b)).expect("edges are 1-simplices");
        }
        c
    }

    /// Scale at which a chain becomes a boundary; infinite if it never does.
    pub fn death(&self, c: &Chain) -> Result<f64, MemoryError> {
        Ok(self.reduction.boundary_death(c)?.unwrap_or(f64::INFINITY))
    }

    /// Lifetime of the class of a closed path: death minus the scale at which it exists.
    pub fn lifetime(&self, path: &[Vec<f64>]) -> Result<f64, MemoryError> {
        let c = self.chain_of(path);
        let birth = self.reduction.chain_birth(&c)?;
        Ok(self.death(&c)? - birth)
    }

    /// Same class at scale `scale`: the sum of the chains is a boundary by then.
    pub fn class_equal_at(&self, a: &[Vec<f64>], b: &[Vec<f64>], scale: f64) -> Result<bool, MemoryError> {
        let sum = self
            .chain_of(a)
            .sum(&self.chain_of(b))
            .expect("both chains are 1-chains");
        Ok(self.death(&sum)? <= scale)
    }
}

/// A closed path proposed for admission.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub path: Vec<Vec<f64>>,
    pub dim: usize,
    pub modality: Modality,
    pub node_steps: usize,
}

/// Closed node paths of H₁ bars: the representative's nodes in order of first visit.
pub fn candidates_from_bars(bars: &[Bar], graph: &StateGraph, modality: Modality) -> Vec<Candidate> {
    bars.iter()
        .filter(|b| b.dim == 1)
        .filter_map(|b| {
            let mut nodes: Vec<usize> = b
                .representative
                .support_vertices()
                .into_iter()
                .map(|v| v as usize)
                .collect();
            nodes.sort_by_key(|&v| graph.first_bin_of(v).unwrap_or(usize::MAX));
            if nodes.len() < 3 {
                return None;
            }
            let mut path: Vec<Vec<f64>> = nodes.iter().map(|&v| graph.nodes[v].clone()).collect();
            path.push(path[0].clone());
            Some(Candidate {
                path,
                dim: 1,
                modality,
                node_steps: graph.bin,
            })
        })
        .collect()
}

/// New records for candidates that are persistent and not already known.
///
/// Each candidate must have anchored lifetime at least `tau` (and above zero) and must
/// not share a class at scale `tau` with a stored record or an earlier candidate.
/// Records are returned with fresh ids but not inserted; see [`update_memory`].
pub fn admit(
    lib: &CycleLibrary,
    candidates: &[Candidate],
    episode: u64,
    tau: f64,
    params: &MemoryParams,
) -> Result<Vec<CycleRecord>, MemoryError> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let extra: Vec<&[Vec<f64>]> = candidates.iter().map(|c| c.path.as_slice()).collect();
    let anchored = AnchoredComplex::of_library(lib, &extra, params);
    let mut admitted: Vec<CycleRecord> = Vec::new();
    for cand in candidates {
        let lifetime = anchored.lifetime(&cand.path)?;
        if !(lifetime > 0.0 && lifetime >= tau) {
            continue;
        }
        let mut known = false;
        for other in lib.records.iter().chain(admitted.iter()) {
            if anchored.class_equal_at(&cand.path, &other.representative_path, tau)? {
                known = true;
                break;
            }
        }
        if known {
            continue;
        }
        admitted.push(CycleRecord {
            class_id: lib.next_id + admitted.len() as u64,
            representative_path: cand.path.clone(),
            lifetime,
            dim: cand.dim,
            modality_tags: BTreeSet::from([cand.modality]),
            hit_count: 0,
            created_episode: episode,
            node_steps: cand.node_steps,
        });
    }
    Ok(admitted)
}

/// Records whose lifetime, re-evaluated in `context`, has dropped below `tau`.
pub fn falsify(lib: &CycleLibrary, context: &AnchoredComplex, tau: f64) -> Result<Vec<ClassId>, MemoryError> {
    let mut out = Vec::new();
    for r in &lib.records {
        if context.lifetime(&r.representative_path)? < tau {
            out.push(r.class_id);
        }
    }
    Ok(out)
}

/// `(Φ ∪ admitted) \ falsified`.
pub fn update_memory(lib: &mut CycleLibrary, admitted: Vec<CycleRecord>, falsified: &[ClassId]) -> Result<(), MemoryError> {
    for id in falsified {
        if lib.get(*id).is_none() && !admitted.iter().any(|r| r.class_id == *id) {
            return Err(MemoryError::UnknownClassId(*id));
        }
    }
    for r in &admitted {
        if lib.get(r.class_id).is_some() {
            return Err(MemoryError::DuplicateClassId(r.class_id));
        }
    }
    for r in admitted {
        lib.next_id = lib.next_id.max(r.class_id + 1);
        lib.records.push(r);
    }
    lib.records.retain(|r| !falsified.contains(&r.class_id));
    lib.records.sort_by_key(|r| r.class_id);
    Ok(())
}

/// Groups of records, one per library, that share a class in the joint anchored complex.
pub fn intersect(libs: &[&CycleLibrary], tau: f64, params: &MemoryParams) -> Result<Vec<Vec<ClassId>>, MemoryError> {
    let Some(first) = libs.first() else {
        return Ok(Vec::new());
    };
    if libs.iter().any(|l| l.anchor_space != first.anchor_space) {
        return Err(MemoryError::NoSharedAnchor);
    }
    let mut joint = CycleLibrary::new(first.anchor_space);
    for l in libs {
        joint.observe(&l.landmarks, params);
    }
    let paths: Vec<&[Vec<f64>]> = libs
        .iter()
        .flat_map(|l| l.records.iter().map(|r| r.representative_path.as_slice()))
        .collect();
    let anchored = AnchoredComplex::build(&joint.landmarks, &paths, params);
    let mut groups = Vec::new();
    'outer: for r in &first.records {
        let mut group = vec![r.class_id];
        for l in &libs[1..] {
            let mut hit = None;
            for s in &l.records {
                if anchored.class_equal_at(&r.representative_path, &s.representative_path, tau)? {
                    hit = Some(s.class_id);
                    break;
                }
            }
            match hit {
                Some(id) => group.push(id),
                None => continue 'outer,
            }
        }
        groups.push(group);
    }
    Ok(groups)
}

fn dtw(a: &[Vec<f64>], b: &[Vec<f64>], band: Option<usize>, open_b: bool) -> f64 {
    // Cells hold (cost sum, path length). With `open_b` the alignment may start and end
    // anywhere along `b` (subsequence matching).
    let (n, m) = (a.len(), b.len());
    let inf = (f64::INFINITY, 0usize);
    let mut prev = vec![inf; m + 1];
    let mut cur = vec![inf; m + 1];
    prev[0] = (0.0, 0);
    if open_b {
        for p in prev.iter_mut() {
            *p = (0.0, 0);
        }
    }
    for i in 1..=n {
        cur[0] = inf;
        for j in 1..=m {
            if let Some(w) = band {
                let centre = i * m / n;
                if centre.abs_diff(j) > w {
                    cur[j] = inf;
                    continue;
                }
            }
            let c = dist(&a[i - 1], &b[j - 1]);
            let best = [prev[j - 1], prev[j], cur[j - 1]]
                .into_iter()
                .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
                .expect("three options");
            cur[j] = (best.0 + c, best.1 + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    let end = if open_b {
        prev[1..]
            .iter()
            .copied()
            .min_by(|x, y| (x.0 / x.1 as f64).total_cmp(&(y.0 / y.1 as f64)))
            .unwrap_or(inf)
    } else {
        prev[m]
    };
    if end.1 == 0 {
        f64::INFINITY
    } else {
        end.0 / end.1 as f64
    }
}

fn rotations(closed: &[Vec<f64>]) -> Vec<Vec<Vec<f64>>> {
    let k = closed.len() - 1;
    (0..k)
        .map(|r| {
            let mut v: Vec<Vec<f64>> = (0..k).map(|i| closed[(i + r) % k].clone()).collect();
            v.push(v[0].clone());
            v
        })
        .collect()
}

/// Length-normalised DTW cost, minimised over cyclic starts of the representative and,
/// for closed trajectories, of the trajectory too.
pub fn align_cost(tr: &LatentTrajectory, rec: &CycleRecord) -> Result<f64, MemoryError> {
    align_cost_banded(tr, rec, None)
}

/// [`align_cost`] with an optional Sakoe–Chiba band half-width.
pub fn align_cost_banded(tr: &LatentTrajectory, rec: &CycleRecord, band: Option<usize>) -> Result<f64, MemoryError> {
    if tr.dim() != rec.latent_dim() {
        return Err(MemoryError::DimensionMismatch {
            expected: rec.latent_dim(),
            found: tr.dim(),
        });
    }
    if tr.is_empty() || rec.representative_path.len() < 2 {
        return Ok(f64::INFINITY);
    }
    let reps = rotations(&rec.representative_path);
    let trajs = if tr.len() > 2 && tr.is_closed(1e-9) {
        rotations(&tr.states)
    } else {
        vec![tr.states.clone()]
    };
    let mut best = f64::INFINITY;
    for t in &trajs {
        for r in &reps {
            best = best.min(dtw(t, r, band, false));
        }
    }
    Ok(best)
}

/// Subsequence cost of a trajectory window anywhere along a record's loop.
pub fn window_cost(window: &[Vec<f64>], rec: &CycleRecord) -> f64 {
    let nodes = rec.nodes();
    let doubled: Vec<Vec<f64>> = nodes.iter().chain(nodes).chain(nodes.first()).cloned().collect();
    dtw(window, &doubled, None, true)
}

/// The `k` cheapest records, ascending by (cost, class id).
pub fn retrieve<'a>(tr: &LatentTrajectory, lib: &'a CycleLibrary, k: usize) -> Result<Vec<(&'a CycleRecord, f64)>, MemoryError> {
    let mut scored = Vec::with_capacity(lib.len());
    for r in &lib.records {
        scored.push((r, align_cost(tr, r)?));
    }
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.class_id.cmp(&b.0.class_id)));
    scored.truncate(k);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persistence::{build_graph_filtration, pers_tau, reduce_up_to};
    use crate::tasks::{build_state_graph, encode, gen_t1, Encoder, Shape, LATENT_DIM};

    const TAU: f64 = 0.5;

    fn trajectory(shape: Shape, jitter: f64, seed: u64) -> LatentTrajectory {
        let ep = gen_t1(shape, 65, jitter, true, seed).unwrap();
        encode(&Encoder::identity(LATENT_DIM), &ep).unwrap()
    }

    /// One closure pass: returns the records that would be admitted.
    fn closure(lib: &mut CycleLibrary, tr: &LatentTrajectory, episode: u64, tau: f64) -> Vec<ClassId> {
        let params = MemoryParams::default();
        lib.observe(&tr.states, &params);
        let g = build_state_graph(tr, 4, 2);
        let d = reduce_up_to(&build_graph_filtration(&g.weighted()).unwrap(), 1);
        let cands = candidates_from_bars(&pers_tau(&d, tau), &g, Modality::A);
        let admitted = admit(lib, &cands, episode, tau, &params).unwrap();
        let ids = admitted.iter().map(|r| r.class_id).collect();
        update_memory(lib, admitted, &[]).unwrap();
        ids
    }

    fn record(path: Vec<Vec<f64>>) -> CycleRecord {
        CycleRecord {
            class_id: 0,
            representative_path: path,
            lifetime: 1.0,
            dim: 1,
            modality_tags: BTreeSet::new(),
            hit_count: 0,
            created_episode: 0,
            node_steps: 1,
        }
    }

    fn square(side: f64, steps: usize) -> Vec<Vec<f64>> {
        let corners = [[0.0, 0.0], [side, 0.0], [side, side], [0.0, side], [0.0, 0.0]];
        let mut out = Vec::new();
        for w in corners.windows(2) {
            for s in 0..steps {
                let t = s as f64 / steps as f64;
                out.push(vec![w[0][0] + t * (w[1][0] - w[0][0]), w[0][1] + t * (w[1][1] - w[0][1])]);
            }
        }
        out.push(out[0].clone());
        out
    }

    #[test]
    fn alignment_cost_properties() {
        let path = square(1.0, 3);
        let rec = record(path.clone());
        let tr = LatentTrajectory::new(path.clone(), 1);
        assert!(align_cost(&tr, &rec).unwrap() < 1e-12);

        let doubled: Vec<Vec<f64>> = path.iter().flat_map(|p| [p.clone(), p.clone()]).collect();
        assert!(align_cost(&LatentTrajectory::new(doubled, 1), &rec).unwrap() < 1e-12);

        let delta = 0.07;
        let shifted: Vec<Vec<f64>> = path.iter().map(|p| vec![p[0] + delta, p[1]]).collect();
        assert!(align_cost(&LatentTrajectory::new(shifted, 1), &rec).unwrap() <= delta + 1e-12);

        let wrong = LatentTrajectory::new(vec![vec![0.0; 3]; 4], 1);
        assert!(matches!(align_cost(&wrong, &rec), Err(MemoryError::DimensionMismatch { .. })));
    }

    #[test]
    fn alignment_ignores_start_of_closed_trajectory() {
        let tr = trajectory(Shape::Circle, 0.0, 1);
        let rec = record(square(1.0, 4).into_iter().map(|p| vec![p[0], p[1], 0.0, 0.0]).collect());
        let base = align_cost(&tr, &rec).unwrap();
        let k = tr.len() - 1;
        for r in [1, 5, 17] {
            let mut states: Vec<Vec<f64>> = (0..k).map(|i| tr.states[(i + r) % k].clone()).collect();
            states.push(states[0].clone());
            let rotated = align_cost(&LatentTrajectory::new(states, 1), &rec).unwrap();
            assert!((base - rotated).abs() < 1e-12);
        }
    }

    #[test]
    fn first_circle_is_admitted_once() {
        let mut lib = CycleLibrary::new(0);
        assert_eq!(closure(&mut lib, &trajectory(Shape::Circle, 0.01, 1), 0, TAU).len(), 1);
        assert_eq!(closure(&mut lib, &trajectory(Shape::Circle, 0.01, 2), 1, TAU).len(), 0);
        assert!(!closure(&mut lib, &trajectory(Shape::Figure8, 0.01, 3), 2, TAU).is_empty());
        let n = lib.len();
        assert_eq!(closure(&mut lib, &trajectory(Shape::Figure8, 0.01, 4), 3, TAU).len(), 0);
        assert_eq!(lib.len(), n);
    }

    #[test]
    fn retrieval_ranks_the_matching_shape_first() {
        let mut lib = CycleLibrary::new(0);
        closure(&mut lib, &trajectory(Shape::Circle, 0.01, 1), 0, TAU);
        closure(&mut lib, &trajectory(Shape::Figure8, 0.01, 2), 1, TAU);
        let circle_id = lib.records()[0].class_id;
        let hits = retrieve(&trajectory(Shape::Circle, 0.01, 9), &lib, 3).unwrap();
        assert_eq!(hits[0].0.class_id, circle_id);
        assert_eq!(hits.len(), lib.len().min(3));
        assert!(hits.windows(2).all(|w| w[0].1 <= w[1].1));
        let all = retrieve(&trajectory(Shape::Circle, 0.01, 9), &lib, 100).unwrap();
        assert_eq!(all.len(), lib.len());
        let empty = CycleLibrary::new(0);
        assert!(retrieve(&trajectory(Shape::Circle, 0.0, 1), &empty, 3).unwrap().is_empty());
    }

    #[test]
    fn falsification() {
        let params = MemoryParams::default();
        let mut lib = CycleLibrary::new(0);
        closure(&mut lib, &trajectory(Shape::Circle, 0.01, 1), 0, TAU);
        let tr = trajectory(Shape::Circle, 0.03, 5);
        lib.observe(&tr.states, &params);
        let ctx = AnchoredComplex::of_library(&lib, &[tr.states.as_slice()], &params);
        assert!(falsify(&lib, &ctx, TAU).unwrap().is_empty());

        // A small spurious loop survives on sparse landmarks but is filled once the
        // region inside it has been visited.
        let blob: Vec<Vec<f64>> = square(0.6, 3).into_iter().map(|p| vec![p[0] + 5.0, p[1], 0.0, 0.0]).collect();
        let mut noisy = CycleLibrary::new(0);
        let sparse = MemoryParams {
            landmark_radius: 0.2,
            anchor_max_scale: 0.5,
            ..params
        };
        noisy.observe(&blob, &sparse);
        let rec = admit(
            &noisy,
            &[Candidate {
                path: blob.clone(),
                dim: 1,
                modality: Modality::A,
                node_steps: 1,
            }],
            0,
            0.3,
            &sparse,
        )
        .unwrap();
        assert_eq!(rec.len(), 1);
        update_memory(&mut noisy, rec, &[]).unwrap();
        let filler: Vec<Vec<f64>> = (0..=6)
            .flat_map(|i| (0..=6).map(move |j| vec![5.0 + 0.1 * i as f64, 0.1 * j as f64, 0.0, 0.0]))
            .collect();
        noisy.observe(&filler, &sparse);
        let ctx = AnchoredComplex::of_library(&noisy, &[filler.as_slice()], &sparse);
        assert_eq!(falsify(&noisy, &ctx, 0.3).unwrap(), vec![0]);
        assert!(falsify(&noisy, &ctx, 0.0).unwrap().is_empty());
    }

    #[test]
    fn update_is_union_then_difference() {
        let mut lib = CycleLibrary::new(0);
        let mut r = record(square(1.0, 2));
        r.class_id = 3;
        update_memory(&mut lib, vec![r], &[]).unwrap();
        assert_eq!(lib.class_ids(), vec![3]);
        let before = lib.clone();
        update_memory(&mut lib, vec![], &[]).unwrap();
        assert_eq!(lib, before);
        assert_eq!(update_memory(&mut lib, vec![], &[9]), Err(MemoryError::UnknownClassId(9)));
        update_memory(&mut lib, vec![], &[3]).unwrap();
        assert!(lib.is_empty());
    }

    #[test]
    fn intersection_of_libraries() {
        let mut a = CycleLibrary::new(1);
        closure(&mut a, &trajectory(Shape::Circle, 0.01, 1), 0, TAU);
        closure(&mut a, &trajectory(Shape::Figure8, 0.01, 2), 1, TAU);
        let params = MemoryParams::default();
        let own = intersect(&[&a, &a], TAU, &params).unwrap();
        assert_eq!(own.len(), a.len());

        let mut b = CycleLibrary::new(1);
        closure(&mut b, &trajectory(Shape::Circle, 0.01, 7), 0, TAU);
        assert_eq!(intersect(&[&a, &b], TAU, &params).unwrap().len(), 1);

        let mut c = CycleLibrary::new(1);
        closure(&mut c, &trajectory(Shape::Figure8, 0.01, 8), 0, TAU);
        assert!(intersect(&[&b, &c], TAU, &params).unwrap().is_empty());
        assert_eq!(intersect(&[&a, &CycleLibrary::new(2)], TAU, &params), Err(MemoryError::NoSharedAnchor));
    }
}
