//! Synthetic task suite and the latent encoder.
//!
//! T1 episodes walk a closed curve in the plane. Each observation is the position plus
//! its first difference, so the canonical latent space has four coordinates. T2 and T3
//! render the same canonical observations through fixed random mixing matrices.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;
use core::fmt;
use core::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::persistence::WeightedGraph;
use crate::rng::{rng, subseed};
use crate::vecops::{dist, dist2, mean};

/// Dimension of canonical observations and of the latent space.
pub const LATENT_DIM: usize = 4;
/// Observation dimension of modality A in T2/T3.
pub const OBS_DIM_A: usize = 12;
/// Observation dimension of modality B in T2.
pub const OBS_DIM_B: usize = 7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TaskError {
    #[error("unknown shape {0:?}")]
    UnknownShape(String),
    #[error("episodes need at least 8 steps, got {0}")]
    TooShort(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("encoder fit needs matching, non-empty observation and target sequences")]
    BadFit,
    #[error("lipschitz bound must be positive and leak in [0, 1)")]
    BadEncoder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Shape {
    Circle,
    Figure8,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::Circle => "circle",
            Shape::Figure8 => "figure8",
        }
    }

    /// Number of independent loops.
    pub fn loops(self) -> usize {
        match self {
            Shape::Circle => 1,
            Shape::Figure8 => 2,
        }
    }

    /// Point on the curve at parameter `t` (period 2π). The figure-8 is centred at
    /// (3, 0) so the two shapes never touch.
    pub fn position(self, t: f64) -> [f64; 2] {
        match self {
            Shape::Circle => [libm::cos(t), libm::sin(t)],
            Shape::Figure8 => [3.0 + libm::sin(t), libm::sin(t) * libm::cos(t)],
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "circle" => Ok(Shape::Circle),
            "figure8" | "figure-8" => Ok(Shape::Figure8),
            other => Err(TaskError::UnknownShape(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Modality {
    #[default]
    A,
    B,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Episode {
    pub observations: Vec<Vec<f64>>,
    pub modality: Modality,
    pub loop_class: Shape,
    pub permutation_seed: u64,
    pub jitter: f64,
    /// Whether the walk returns to its start.
    pub closed: bool,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.observations.first().map_or(0, Vec::len)
    }
}

/// Everything that determines a T1 episode apart from its seed.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpisodeSpec {
    pub shape: Shape,
    pub steps: usize,
    pub jitter: f64,
    /// Class-preserving reordering of micro-events.
    pub permute: bool,
    /// `false` walks only `open_fraction` of the loop.
    pub closed: bool,
    /// Class-breaking global shuffle of steps.
    pub scramble: bool,
    /// Segment length for class-preserving permutations.
    pub segment: usize,
    pub open_fraction: f64,
    /// Start each walk at a uniformly random phase instead of `t = 0`.
    pub random_phase: bool,
}

impl EpisodeSpec {
    pub fn new(shape: Shape, steps: usize) -> Self {
        Self {
            shape,
            steps,
            jitter: 0.0,
            permute: false,
            closed: true,
            scramble: false,
            segment: 4,
            open_fraction: 0.7,
            random_phase: true,
        }
    }
}

/// Samples the curve and applies the requested reordering and noise.
pub fn gen_episode(spec: &EpisodeSpec, seed: u64) -> Result<Episode, TaskError> {
    if spec.steps < 8 {
        return Err(TaskError::TooShort(spec.steps));
    }
    let span = if spec.closed { TAU } else { TAU * spec.open_fraction };
    let dt = span / (spec.steps - 1) as f64;
    let mut r = rng(seed);
    let phase = if spec.random_phase { r.random::<f64>() * TAU } else { 0.0 };
    let clean: Vec<Vec<f64>> = (0..spec.steps)
        .map(|i| {
            // Closed walks land exactly on their start on the last step.
            let t = phase + if spec.closed && i == spec.steps - 1 { 0.0 } else { dt * i as f64 };
            let p = spec.shape.position(t);
            let q = spec.shape.position(t - dt);
            vec![p[0], p[1], p[0] - q[0], p[1] - q[1]]
        })
        .collect();

    let mut order: Vec<usize> = (0..spec.steps).collect();
    if spec.scramble {
        order.shuffle(&mut r);
    } else if spec.permute {
        order = class_preserving_order(spec.steps, spec.segment, spec.closed, &mut r);
    }
    let noise = Normal::new(0.0, spec.jitter.max(0.0)).expect("finite jitter");
    let observations = order
        .iter()
        .map(|&i| {
            clean[i]
                .iter()
                .map(|x| if spec.jitter > 0.0 { x + noise.sample(&mut r) } else { *x })
                .collect()
        })
        .collect();
    Ok(Episode {
        observations,
        modality: Modality::A,
        loop_class: spec.shape,
        permutation_seed: seed,
        jitter: spec.jitter,
        closed: spec.closed && !spec.scramble,
    })
}

/// Rotates whole segments and shuffles segment interiors, keeping every segment's
/// endpoints in place; closed walks are re-closed on their new start.
fn class_preserving_order(steps: usize, segment: usize, closed: bool, r: &mut impl Rng) -> Vec<usize> {
    let unique = if closed { steps - 1 } else { steps };
    let segment = segment.max(1);
    let segments = unique.div_ceil(segment);
    let shift = if closed { r.random_range(0..segments) * segment } else { 0 };
    let mut order: Vec<usize> = (0..unique).map(|i| (i + shift) % unique).collect();
    for block in order.chunks_mut(segment) {
        if block.len() > 2 {
            let n = block.len();
            block[1..n - 1].shuffle(r);
        }
    }
    if closed {
        order.push(order[0]);
    }
    order
}

/// A fresh class-preserving reordering of an existing episode's steps; noise is kept.
pub fn permute_episode(ep: &Episode, segment: usize, seed: u64) -> Episode {
    let order = class_preserving_order(ep.len(), segment, ep.closed, &mut rng(seed));
    Episode {
        observations: order.iter().map(|&i| ep.observations[i].clone()).collect(),
        permutation_seed: seed,
        ..ep.clone()
    }
}

/// T1: one walk on `shape`.
pub fn gen_t1(shape: Shape, steps: usize, jitter: f64, permute: bool, seed: u64) -> Result<Episode, TaskError> {
    let spec = EpisodeSpec {
        jitter,
        permute,
        ..EpisodeSpec::new(shape, steps)
    };
    gen_episode(&spec, seed)
}

/// A fixed linear observation map with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationMap {
    matrix: DMatrix<f64>,
}

impl ObservationMap {
    pub fn random(obs_dim: usize, seed: u64) -> Self {
        let mut r = rng(seed);
        let g = DMatrix::<f64>::from_fn(obs_dim, LATENT_DIM, |_, _| StandardNormal.sample(&mut r));
        Self {
            matrix: g.qr().q(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, ep: &Episode, modality: Modality) -> Episode {
        let observations = ep
            .observations
            .iter()
            .map(|x| {
                let v = &self.matrix * nalgebra::DVector::from_column_slice(x);
                v.iter().copied().collect()
            })
            .collect();
        Episode {
            observations,
            modality,
            ..ep.clone()
        }
    }
}

/// The two observation maps of the cross-modal task.
#[derive(Clone, Debug, PartialEq)]
pub struct Modalities {
    pub a: ObservationMap,
    pub b: ObservationMap,
}

impl Modalities {
    pub fn new(world_seed: u64) -> Self {
        Self {
            a: ObservationMap::random(OBS_DIM_A, subseed(world_seed, &[0xA])),
            b: ObservationMap::random(OBS_DIM_B, subseed(world_seed, &[0xB])),
        }
    }

    pub fn render(&self, canonical: &Episode) -> (Episode, Episode) {
        (self.a.apply(canonical, Modality::A), self.b.apply(canonical, Modality::B))
    }
}

/// T2: the same walk seen through two modalities.
pub fn gen_t2(shape: Shape, steps: usize, seed: u64) -> Result<(Episode, Episode), TaskError> {
    let canonical = gen_t1(shape, steps, 0.0, false, subseed(seed, &[1]))?;
    Ok(Modalities::new(seed).render(&canonical))
}

/// Idiosyncratic observation maps of a teacher and a student.
#[derive(Clone, Debug, PartialEq)]
pub struct Agents {
    pub teacher: ObservationMap,
    pub student: ObservationMap,
}

impl Agents {
    pub fn new(world_seed: u64) -> Self {
        Self {
            teacher: ObservationMap::random(OBS_DIM_A, subseed(world_seed, &[0x7E])),
            student: ObservationMap::random(OBS_DIM_A, subseed(world_seed, &[0x57])),
        }
    }
}

/// T3: teacher and student observe the same walk through independent maps.
pub fn gen_t3(shape: Shape, steps: usize, seed: u64) -> Result<(Episode, Episode), TaskError> {
    let canonical = gen_t1(shape, steps, 0.0, false, subseed(seed, &[1]))?;
    let agents = Agents::new(seed);
    Ok((
        agents.teacher.apply(&canonical, Modality::A),
        agents.student.apply(&canonical, Modality::A),
    ))
}

/// Leaky linear encoder `z_t = λ z_{t-1} + W x_t` with spectrally clipped `W`.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    weights: DMatrix<f64>,
    leak: f64,
    lipschitz: f64,
}

fn spectral_clip(w: DMatrix<f64>, bound: f64) -> DMatrix<f64> {
    let svd = w.svd(true, true);
    if svd.singular_values.iter().all(|s| *s <= bound) {
        return svd.recompose().expect("u and v requested");
    }
    let mut svd = svd;
    for s in svd.singular_values.iter_mut() {
        *s = s.min(bound);
    }
    svd.recompose().expect("u and v requested")
}

impl Encoder {
    /// `weights` is row-major `latent_dim × obs_dim`.
    pub fn new(latent_dim: usize, obs_dim: usize, weights: &[f64], leak: f64, lipschitz: f64) -> Result<Self, TaskError> {
        if weights.len() != latent_dim * obs_dim {
            return Err(TaskError::DimensionMismatch {
                expected: latent_dim * obs_dim,
                found: weights.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(latent_dim, obs_dim, weights), leak, lipschitz)
    }

    fn from_matrix(w: DMatrix<f64>, leak: f64, lipschitz: f64) -> Result<Self, TaskError> {
        if lipschitz.is_nan() || lipschitz <= 0.0 || !(0.0..1.0).contains(&leak) {
            return Err(TaskError::BadEncoder);
        }
        Ok(Self {
            weights: spectral_clip(w, lipschitz),
            leak,
            lipschitz,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            weights: DMatrix::identity(dim, dim),
            leak: 0.0,
            lipschitz: 1.0,
        }
    }

    /// Ridge least-squares map from observations to target latents.
    pub fn fit(observations: &[Vec<f64>], targets: &[Vec<f64>], ridge: f64, lipschitz: f64) -> Result<Self, TaskError> {
        let (Some(x0), Some(z0)) = (observations.first(), targets.first()) else {
            return Err(TaskError::BadFit);
        };
        if observations.len() != targets.len() {
            return Err(TaskError::BadFit);
        }
        let n = observations.len();
        let x = DMatrix::from_fn(x0.len(), n, |i, j| observations[j][i]);
        let z = DMatrix::from_fn(z0.len(), n, |i, j| targets[j][i]);
        // Ridge pseudo-inverse through the SVD of X; better conditioned than the Gram form
        // when observations span a low-dimensional subspace.
        let svd = x.svd(true, true);
        let (u, vt) = (svd.u.ok_or(TaskError::BadFit)?, svd.v_t.ok_or(TaskError::BadFit)?);
        let shrink = svd.singular_values.map(|s| if s > 0.0 { s / (s * s + ridge) } else { 0.0 });
        let pinv = vt.transpose() * DMatrix::from_diagonal(&shrink) * u.transpose();
        Self::from_matrix(z * pinv, 0.0, lipschitz)
    }

    pub fn latent_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn leak(&self) -> f64 {
        self.leak
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn operator_norm(&self) -> f64 {
        self.weights.singular_values().iter().copied().fold(0.0, f64::max)
    }

    /// One encoder step from the previous latent state.
    pub fn step(&self, prev: &[f64], x: &[f64]) -> Vec<f64> {
        let wx = &self.weights * nalgebra::DVector::from_column_slice(x);
        wx.iter().zip(prev).map(|(a, b)| a + self.leak * b).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LatentTrajectory {
    pub states: Vec<Vec<f64>>,
    pub time_bin: usize,
}

impl LatentTrajectory {
    pub fn new(states: Vec<Vec<f64>>, time_bin: usize) -> Self {
        Self { states, time_bin }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    /// First and last states coincide within `tol`.
    pub fn is_closed(&self, tol: f64) -> bool {
        match (self.states.first(), self.states.last()) {
            (Some(a), Some(b)) if self.states.len() > 1 => dist(a, b) <= tol,
            _ => false,
        }
    }
}

pub fn encode(e: &Encoder, ep: &Episode) -> Result<LatentTrajectory, TaskError> {
    if ep.obs_dim() != e.obs_dim() {
        return Err(TaskError::DimensionMismatch {
            expected: e.obs_dim(),
            found: ep.obs_dim(),
        });
    }
    let mut z = vec![0.0; e.latent_dim()];
    let states = ep
        .observations
        .iter()
        .map(|x| {
            z = e.step(&z, x);
            z.clone()
        })
        .collect();
    Ok(LatentTrajectory::new(states, 1))
}

/// Binned latent states joined by temporal and nearest-neighbour edges.
#[derive(Clone, Debug, PartialEq)]
pub struct StateGraph {
    pub nodes: Vec<Vec<f64>>,
    pub edges: Vec<(usize, usize, f64)>,
    /// Node of each bin, in time order.
    pub bin_nodes: Vec<usize>,
    pub bin: usize,
}

impl StateGraph {
    /// Nearest node to `z`, lowest index on ties.
    pub fn nearest_node(&self, z: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, c) in self.nodes.iter().enumerate() {
            let d = dist2(c, z);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    /// Node of every state of a trajectory.
    pub fn node_walk(&self, tr: &LatentTrajectory) -> Vec<usize> {
        tr.states.iter().map(|z| self.nearest_node(z)).collect()
    }

    pub fn weighted(&self) -> WeightedGraph {
        WeightedGraph {
            nodes: self.nodes.len(),
            edges: self.edges.clone(),
        }
    }

    pub fn first_bin_of(&self, node: usize) -> Option<usize> {
        self.bin_nodes.iter().position(|&n| n == node)
    }
}

/// State-graph construction knobs.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GraphParams {
    pub bin: usize,
    pub knn: usize,
    /// A bin is merged into an earlier node whose centroid lies within this fraction
    /// of the median consecutive-bin distance.
    pub merge_fraction: f64,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            bin: 4,
            knn: 2,
            merge_fraction: 0.5,
        }
    }
}

pub fn build_state_graph(tr: &LatentTrajectory, bin: usize, knn: usize) -> StateGraph {
    build_state_graph_with(
        tr,
        &GraphParams {
            bin,
            knn,
            ..GraphParams::default()
        },
    )
}

pub fn build_state_graph_with(tr: &LatentTrajectory, params: &GraphParams) -> StateGraph {
    let bin = params.bin.max(1);
    let centroids: Vec<Vec<f64>> = tr.states.chunks(bin).map(mean).collect();
    let mut steps: Vec<f64> = centroids.windows(2).map(|w| dist(&w[0], &w[1])).collect();
    steps.sort_by(f64::total_cmp);
    let tol = steps.get(steps.len() / 2).map_or(0.0, |m| m * params.merge_fraction);

    let mut nodes: Vec<Vec<f64>> = Vec::new();
    let mut bin_nodes = Vec::with_capacity(centroids.len());
    for c in centroids {
        // Revisits of an earlier region reuse its node; this is what closes loops.
        let hit = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (dist(n, &c), i))
            .filter(|(d, _)| *d <= tol)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        match hit {
            Some((_, i)) => bin_nodes.push(i),
            None => {
                nodes.push(c);
                bin_nodes.push(nodes.len() - 1);
            }
        }
    }

    let mut edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut add = |a: usize, b: usize| {
        if a != b {
            let key = (a.min(b), a.max(b));
            edges.insert(key, dist(&nodes[a], &nodes[b]));
        }
    };
    for w in bin_nodes.windows(2) {
        add(w[0], w[1]);
    }
    for i in 0..nodes.len() {
        let mut others: Vec<(f64, usize)> = (0..nodes.len())
            .filter(|&j| j != i)
            .map(|j| (dist(&nodes[i], &nodes[j]), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in others.iter().take(params.knn) {
            add(i, j);
        }
    }
    StateGraph {
        edges: edges.into_iter().map(|((a, b), w)| (a, b, w)).collect(),
        nodes,
        bin_nodes,
        bin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{betti, Simplex, SimplicialComplex};

    fn flag_betti1(g: &StateGraph) -> usize {
        let mut gens: Vec<Simplex> = (0..g.nodes.len() as u32).map(Simplex::vertex).collect();
        let adj: BTreeMap<(usize, usize), ()> = g.edges.iter().map(|&(a, b, _)| ((a, b), ())).collect();
        for &(a, b, _) in &g.edges {
            gens.push(Simplex::edge(a as u32, b as u32));
            for c in (b + 1)..g.nodes.len() {
                if adj.contains_key(&(a, c)) && adj.contains_key(&(b, c)) {
                    gens.push(Simplex::new(vec![a as u32, b as u32, c as u32]).unwrap());
                }
            }
        }
        betti(&SimplicialComplex::closure(gens), 1)
    }

    #[test]
    fn closed_circle_returns_to_start() {
        let ep = gen_t1(Shape::Circle, 64, 0.0, false, 1).unwrap();
        assert_eq!(ep.len(), 64);
        assert_eq!(ep.obs_dim(), LATENT_DIM);
        assert!(dist(&ep.observations[0], &ep.observations[63]) < 1e-9);
        assert_eq!("circle".parse::<Shape>().unwrap(), Shape::Circle);
        assert!(matches!("torus".parse::<Shape>(), Err(TaskError::UnknownShape(_))));
        assert_eq!(gen_t1(Shape::Circle, 7, 0.0, false, 1), Err(TaskError::TooShort(7)));
    }

    #[test]
    fn permutation_keeps_closure_and_bins() {
        let base = gen_t1(Shape::Circle, 65, 0.0, false, 3).unwrap();
        for seed in 0..20 {
            let p = permute_episode(&base, 4, seed);
            assert!(dist(&p.observations[0], &p.observations[64]) < 1e-9);
            let mut a: Vec<Vec<f64>> = p.observations[..64].chunks(4).map(mean).collect();
            let mut b: Vec<Vec<f64>> = base.observations[..64].chunks(4).map(mean).collect();
            a.sort_by(|x, y| x.partial_cmp(y).unwrap());
            b.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for (x, y) in a.iter().zip(&b) {
                assert!(dist(x, y) < 1e-12);
            }
        }
    }

    #[test]
    fn episodes_are_reproducible() {
        let a = gen_t1(Shape::Figure8, 65, 0.05, true, 42).unwrap();
        let b = gen_t1(Shape::Figure8, 65, 0.05, true, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_t1(Shape::Figure8, 65, 0.05, true, 43).unwrap());
    }

    #[test]
    fn cross_modal_pair() {
        let (a, b) = gen_t2(Shape::Circle, 65, 5).unwrap();
        assert_eq!((a.obs_dim(), b.obs_dim()), (OBS_DIM_A, OBS_DIM_B));
        assert_eq!(a.loop_class, b.loop_class);
        assert_eq!((a.modality, b.modality), (Modality::A, Modality::B));
        let (t, s) = gen_t3(Shape::Circle, 65, 5).unwrap();
        assert_ne!(t.observations, s.observations);
    }

    #[test]
    fn identity_encoder_and_zero_input() {
        let ep = gen_t1(Shape::Circle, 16, 0.0, false, 0).unwrap();
        let tr = encode(&Encoder::identity(LATENT_DIM), &ep).unwrap();
        assert_eq!(tr.states, ep.observations);
        let zero = Episode {
            observations: vec![vec![0.0; 4]; 10],
            ..ep.clone()
        };
        let tr = encode(&Encoder::identity(LATENT_DIM), &zero).unwrap();
        assert!(tr.states.iter().all(|z| z.iter().all(|x| *x == 0.0)));
        assert!(matches!(
            encode(&Encoder::identity(3), &ep),
            Err(TaskError::DimensionMismatch { expected: 3, found: 4 })
        ));
    }

    #[test]
    fn encoder_is_clipped_and_lipschitz() {
        let w: Vec<f64> = (0..12).map(|i| (i as f64 - 5.0) * 0.7).collect();
        let e = Encoder::new(3, 4, &w, 0.3, 1.5).unwrap();
        assert!(e.operator_norm() <= 1.5 + 1e-9);
        let mut r = rng(9);
        let prev = [0.2, -0.1, 0.4];
        for _ in 0..1000 {
            let x: Vec<f64> = (0..4).map(|_| r.random_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..4).map(|_| r.random_range(-3.0..3.0)).collect();
            let lhs = dist(&e.step(&prev, &x), &e.step(&prev, &y));
            assert!(lhs <= 1.5 * dist(&x, &y) + 1e-9);
        }
        assert_eq!(Encoder::new(1, 1, &[1.0], 1.0, 1.0), Err(TaskError::BadEncoder));
    }

    #[test]
    fn fitted_encoder_inverts_mixing() {
        let canonical = gen_t1(Shape::Circle, 65, 0.0, false, 1).unwrap();
        let (a, _) = Modalities::new(3).render(&canonical);
        let e = Encoder::fit(&a.observations, &canonical.observations, 1e-9, 2.0).unwrap();
        let tr = encode(&e, &a).unwrap();
        for (z, x) in tr.states.iter().zip(&canonical.observations) {
            assert!(dist(z, x) < 1e-6);
        }
    }

    #[test]
    fn circle_graph_has_one_loop() {
        let ep = gen_t1(Shape::Circle, 65, 0.0, false, 0).unwrap();
        let tr = encode(&Encoder::identity(LATENT_DIM), &ep).unwrap();
        let g = build_state_graph(&tr, 4, 1);
        assert_eq!(flag_betti1(&g), 1);
        let walk = g.node_walk(&tr);
        assert_eq!(walk.first(), walk.last());

        let one = build_state_graph(&tr, tr.len(), 2);
        assert_eq!(one.nodes.len(), 1);
        assert!(one.edges.is_empty());
    }

    #[test]
    fn open_walk_is_a_path() {
        let spec = EpisodeSpec {
            closed: false,
            ..EpisodeSpec::new(Shape::Circle, 65)
        };
        let tr = encode(&Encoder::identity(LATENT_DIM), &gen_episode(&spec, 0).unwrap()).unwrap();
        let g = build_state_graph(&tr, 4, 1);
        assert_eq!(flag_betti1(&g), 0);
    }

    #[test]
    fn figure_eight_graph_has_two_loops() {
        for seed in 0..5 {
            let ep = gen_t1(Shape::Figure8, 65, 0.01, true, seed).unwrap();
            let tr = encode(&Encoder::identity(LATENT_DIM), &ep).unwrap();
            let g = build_state_graph(&tr, 4, 2);
            assert_eq!(flag_betti1(&g), 2, "seed {seed}");
        }
    }
}
