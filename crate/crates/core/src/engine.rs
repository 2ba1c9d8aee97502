//! The episode loop: retrieve stored loops, predict with fast residual adaptation,
//! test closure, then fold the fast correction into slow parameters.
//!
//! Prediction blends template continuation with persistence,
//! `ẑ = z + w (p − z) + o`, where `p` advances along the nearest retrieved loop.
//! The slow decoder holds a per-class trust `w_θ`; the per-episode scaffold holds a
//! gain correction `w_Ψ` (so `w = w_θ + w_Ψ`, clamped to `[0, 1]`) and an offset `o`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::memory::{
    admit, align_cost, candidates_from_bars, falsify, retrieve, update_memory, window_cost, AnchoredComplex,
    ClassId, CycleLibrary, CycleRecord, MemoryError, MemoryParams,
};
use crate::persistence::{build_graph_filtration, pers_tau, reduce_up_to, PersistenceError};
use crate::tasks::{
    build_state_graph_with, encode, Encoder, Episode, GraphParams, LatentTrajectory, Modality, Shape, StateGraph,
    TaskError,
};
use crate::vecops::{dist2, lerp, median, norm2, rem_euclid};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("no stored cycle to retrieve")]
    NoRetrieval,
    #[error("need at least {needed} episodes, got {found}")]
    InsufficientEpisodes { needed: usize, found: usize },
    #[error("no encoder for modality {0:?}")]
    MissingEncoder(Modality),
    #[error("invalid engine config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Persistence(#[from] PersistenceError),
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EngineConfig {
    pub tau: f64,
    /// Retrieval count.
    pub k: usize,
    pub eta_fast: f64,
    pub eta_slow: f64,
    /// Closure weight: folds shrink by `1 / (1 + lambda_r R)`.
    pub lambda_r: f64,
    /// Penalty on the size of a slow fold in the replay gate.
    pub lambda_p: f64,
    /// Reference contraction factor reported next to fitted γ.
    pub gamma_target: f64,
    pub bin: usize,
    pub knn: usize,
    pub merge_fraction: f64,
    pub memory: MemoryParams,
    /// Retrievals with a higher alignment cost are dropped.
    pub max_align_cost: f64,
    /// Clip for the scaffold gain and offset norm.
    pub scaffold_bound: f64,
    /// Residual level that counts as "adapted".
    pub target_residual: f64,
    /// Consecutive steps at or below target needed to stop counting.
    pub target_run: usize,
    /// Upper edge of the residual histogram used by the entropy proxy.
    pub entropy_max: f64,
    pub coherence_window: usize,
    pub coherence_stride: usize,
    pub retrieval: bool,
    /// `false` freezes the scaffold.
    pub adapt: bool,
    pub falsification: bool,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            k: 3,
            eta_fast: 0.02,
            eta_slow: 0.5,
            lambda_r: 1.0,
            lambda_p: 0.1,
            gamma_target: 0.9,
            bin: 4,
            knn: 2,
            merge_fraction: 0.5,
            memory: MemoryParams::default(),
            max_align_cost: 0.5,
            scaffold_bound: 2.0,
            target_residual: 0.003,
            target_run: 3,
            entropy_max: 0.02,
            coherence_window: 16,
            coherence_stride: 8,
            retrieval: true,
            adapt: true,
            falsification: true,
            seed: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let checks: [(bool, &'static str); 8] = [
            (self.tau >= 0.0, "tau must be >= 0"),
            (self.k >= 1, "k must be >= 1"),
            (self.eta_fast > 0.0 && self.eta_fast <= 1.0, "eta_fast must be in (0, 1]"),
            (self.eta_slow > 0.0, "eta_slow must be > 0"),
            (self.lambda_r >= 0.0 && self.lambda_p >= 0.0, "lambda weights must be >= 0"),
            (self.bin >= 1 && self.knn >= 1, "bin and knn must be >= 1"),
            (self.entropy_max > 0.0 && self.target_residual >= 0.0, "residual scales must be positive"),
            (self.coherence_window >= 2 && self.coherence_stride >= 1, "coherence window too small"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(EngineError::InvalidConfig(msg)),
            None => Ok(()),
        }
    }

    pub fn graph(&self) -> GraphParams {
        GraphParams {
            bin: self.bin,
            knn: self.knn,
            merge_fraction: self.merge_fraction,
        }
    }
}

/// Slow readout: trust in each stored loop's continuation.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Decoder {
    pub trust: BTreeMap<ClassId, f64>,
}

impl Decoder {
    pub fn weight(&self, id: ClassId) -> f64 {
        self.trust.get(&id).copied().unwrap_or(0.0)
    }
}

/// Fast per-episode parameters; reset at every episode end.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Scaffold {
    pub gain: f64,
    pub offset: Vec<f64>,
    /// Steps predicted from each class during the episode.
    pub usage: BTreeMap<ClassId, usize>,
}

impl Scaffold {
    pub fn zero(dim: usize) -> Self {
        Self {
            gain: 0.0,
            offset: vec![0.0; dim],
            usage: BTreeMap::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.gain == 0.0 && self.offset.iter().all(|x| *x == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpisodeReport {
    pub episode: u64,
    pub loop_class: Shape,
    pub residual_series: Vec<f64>,
    pub residual_median: f64,
    pub residual_boundary_norm: f64,
    pub admitted: Vec<ClassId>,
    pub falsified: Vec<ClassId>,
    /// Retrieved classes with their alignment costs.
    pub retrieval_hits: Vec<(ClassId, f64)>,
    /// Class whose template drove each prediction.
    pub step_classes: Vec<Option<ClassId>>,
    pub inner_steps_used: usize,
    pub target_reached: bool,
    pub phi_size_after: usize,
    pub entropy_proxy: f64,
    /// Share of trajectory windows decoding to the most common class.
    pub coherence: f64,
}

/// Outcome of the closure test, before memory is updated.
#[derive(Clone, Debug, PartialEq)]
pub struct Closure {
    pub admitted: Vec<CycleRecord>,
    pub falsified: Vec<ClassId>,
    pub boundary_norm: f64,
    /// Closed candidate paths that survived the τ filter.
    pub candidates: usize,
}

#[derive(Clone, Debug)]
pub struct MAIState {
    pub encoders: BTreeMap<Modality, Encoder>,
    pub decoder: Decoder,
    pub library: CycleLibrary,
    pub scaffold: Scaffold,
    pub episode_counter: u64,
    pub config: EngineConfig,
    last_report: Option<EpisodeReport>,
}

/// A stored loop as a closed polyline; parameter `x ∈ [0, K)` runs over its K segments.
struct Template<'a> {
    id: ClassId,
    nodes: &'a [Vec<f64>],
    step: f64,
}

impl<'a> Template<'a> {
    fn of(rec: &'a CycleRecord) -> Option<Self> {
        (rec.nodes().len() >= 2).then(|| Self {
            id: rec.class_id,
            nodes: rec.nodes(),
            step: 1.0 / rec.node_steps.max(1) as f64,
        })
    }

    /// Parameter of the closest point and its squared distance.
    fn project(&self, z: &[f64]) -> (f64, f64) {
        let k = self.nodes.len();
        let mut best = (0.0, f64::INFINITY);
        for s in 0..k {
            let (a, b) = (&self.nodes[s], &self.nodes[(s + 1) % k]);
            let ab = dist2(a, b);
            let u = if ab > 0.0 {
                let dot: f64 = z.iter().zip(a).zip(b).map(|((zi, ai), bi)| (zi - ai) * (bi - ai)).sum();
                (dot / ab).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let d = dist2(&lerp(a, b, u), z);
            if d < best.1 {
                best = (s as f64 + u, d);
            }
        }
        best
    }

    fn at(&self, x: f64) -> Vec<f64> {
        let k = self.nodes.len();
        let x = rem_euclid(x, k as f64);
        let s = (libm::floor(x) as usize).min(k - 1);
        lerp(&self.nodes[s], &self.nodes[(s + 1) % k], x - s as f64)
    }
}

fn nearest_template<'a, 'b>(templates: &'b [Template<'a>], z: &[f64]) -> Option<(&'b Template<'a>, f64, f64)> {
    templates
        .iter()
        .map(|t| {
            let (x, d) = t.project(z);
            (t, x, d)
        })
        .min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.id.cmp(&b.0.id)))
}

/// Number of odd-degree vertices of the trajectory's walk through the graph, i.e. the
/// support size of the walk chain's boundary over GF(2).
pub fn residual_boundary_norm(g: &StateGraph, tr: &LatentTrajectory) -> f64 {
    let walk = g.node_walk(tr);
    let mut odd = vec![false; g.nodes.len()];
    for w in walk.windows(2) {
        if w[0] != w[1] {
            odd[w[0]] ^= true;
            odd[w[1]] ^= true;
        }
    }
    odd.iter().filter(|o| **o).count() as f64
}

/// Steps until the residual stays at or below `target` for `run` consecutive steps;
/// `None` if that never happens.
pub fn steps_to_target(residuals: &[f64], target: f64, run: usize) -> Option<usize> {
    let run = run.max(1);
    let mut streak = 0;
    for (t, r) in residuals.iter().enumerate() {
        streak = if *r <= target { streak + 1 } else { 0 };
        if streak == run {
            return Some(t + 1);
        }
    }
    None
}

/// Mean over retrieved classes of the Shannon entropy (bits) of a 16-bin residual
/// histogram on `[0, max]`; residuals above `max` land in the top bin.
pub fn entropy_proxy(history: &[&EpisodeReport], max: f64) -> f64 {
    const BINS: usize = 16;
    let mut groups: BTreeMap<Option<ClassId>, [usize; BINS]> = BTreeMap::new();
    for rep in history {
        for (r, c) in rep.residual_series.iter().zip(&rep.step_classes) {
            let b = if max > 0.0 { (libm::floor(r / max * BINS as f64).max(0.0) as usize).min(BINS - 1) } else { 0 };
            groups.entry(*c).or_insert([0; BINS])[b] += 1;
        }
    }
    if groups.is_empty() {
        return 0.0;
    }
    let total: f64 = groups
        .values()
        .map(|h| {
            let n: usize = h.iter().sum();
            h.iter()
                .filter(|c| **c > 0)
                .map(|c| {
                    let p = *c as f64 / n as f64;
                    -p * libm::log2(p)
                })
                .sum::<f64>()
        })
        .sum();
    total / groups.len() as f64
}

impl MAIState {
    pub fn new(config: EngineConfig) -> Result<Self, EngineError> {
        config.validate()?;
        Ok(Self {
            encoders: BTreeMap::new(),
            decoder: Decoder::default(),
            library: CycleLibrary::new(config.seed),
            scaffold: Scaffold::default(),
            episode_counter: 0,
            config,
            last_report: None,
        })
    }

    pub fn with_encoder(mut self, modality: Modality, encoder: Encoder) -> Self {
        self.encoders.insert(modality, encoder);
        self
    }

    pub fn encode(&self, ep: &Episode) -> Result<LatentTrajectory, EngineError> {
        let e = self.encoders.get(&ep.modality).ok_or(EngineError::MissingEncoder(ep.modality))?;
        let mut tr = encode(e, ep)?;
        tr.time_bin = self.config.bin;
        Ok(tr)
    }

    fn offset(&self, dim: usize) -> Vec<f64> {
        if self.scaffold.offset.len() == dim {
            self.scaffold.offset.clone()
        } else {
            vec![0.0; dim]
        }
    }

    /// Pure template continuation from the aligned phase, plus the scaffold offset.
    pub fn bootstrap_forward(&self, z: &[f64], retrieved: Option<&CycleRecord>) -> Result<Vec<f64>, EngineError> {
        let t = retrieved.and_then(Template::of).ok_or(EngineError::NoRetrieval)?;
        let (x, _) = t.project(z);
        let p = t.at(x + t.step);
        Ok(p.iter().zip(self.offset(z.len())).map(|(a, o)| a + o).collect())
    }

    /// One step backward along the stored loop closest to `z_next`.
    pub fn retrieval_inverse(&self, z_next: &[f64]) -> Result<Vec<f64>, EngineError> {
        let templates: Vec<Template> = self.library.records().iter().filter_map(Template::of).collect();
        let o = self.offset(z_next.len());
        let unshifted: Vec<f64> = z_next.iter().zip(&o).map(|(a, b)| a - b).collect();
        let (t, x, _) = nearest_template(&templates, &unshifted).ok_or(EngineError::NoRetrieval)?;
        Ok(t.at(x - t.step))
    }

    /// Next-state prediction, the class that drove it and the trust direction `p − z`.
    fn predict(&self, z: &[f64], templates: &[Template]) -> (Vec<f64>, Option<ClassId>, Option<Vec<f64>>) {
        let o = self.offset(z.len());
        match nearest_template(templates, z) {
            Some((t, x, _)) => {
                let p = t.at(x + t.step);
                let w = (self.decoder.weight(t.id) + self.scaffold.gain).clamp(0.0, 1.0);
                let dir: Vec<f64> = p.iter().zip(z).map(|(a, b)| a - b).collect();
                let zhat = z.iter().zip(&dir).zip(&o).map(|((zi, di), oi)| zi + w * di + oi).collect();
                (zhat, Some(t.id), Some(dir))
            }
            None => (z.iter().zip(&o).map(|(a, b)| a + b).collect(), None, None),
        }
    }

    /// Normalised-LMS step on the scaffold against `‖r‖²`; nothing else is touched.
    pub fn fast_adapt(&mut self, residual: &[f64], direction: Option<&[f64]>) {
        if !self.config.adapt {
            return;
        }
        let (eta, bound) = (self.config.eta_fast, self.config.scaffold_bound);
        if self.scaffold.offset.len() != residual.len() {
            self.scaffold.offset = vec![0.0; residual.len()];
        }
        if let Some(g) = direction {
            let gg = norm2(g);
            if gg > 1e-12 {
                let rg: f64 = residual.iter().zip(g).map(|(a, b)| a * b).sum();
                self.scaffold.gain = (self.scaffold.gain + eta * rg / gg).clamp(-bound, bound);
            }
        }
        for (o, r) in self.scaffold.offset.iter_mut().zip(residual) {
            *o += eta * r;
        }
        let n = libm::sqrt(norm2(&self.scaffold.offset));
        if n > bound {
            self.scaffold.offset.iter_mut().for_each(|o| *o *= bound / n);
        }
    }

    /// Predicts every step of `tr`, adapting the scaffold online. Returns squared
    /// residuals and the class behind each prediction.
    fn inner_loop(&mut self, tr: &LatentTrajectory, records: &[CycleRecord]) -> (Vec<f64>, Vec<Option<ClassId>>) {
        let templates: Vec<Template> = records.iter().filter_map(Template::of).collect();
        let mut residuals = Vec::with_capacity(tr.len().saturating_sub(1));
        let mut classes = Vec::with_capacity(residuals.capacity());
        for w in tr.states.windows(2) {
            let (zhat, class, dir) = self.predict(&w[0], &templates);
            let r: Vec<f64> = w[1].iter().zip(&zhat).map(|(a, b)| a - b).collect();
            residuals.push(norm2(&r));
            classes.push(class);
            if let Some(c) = class {
                *self.scaffold.usage.entry(c).or_insert(0) += 1;
            }
            self.fast_adapt(&r, dir.as_deref());
        }
        (residuals, classes)
    }

    fn retrieved(&self, tr: &LatentTrajectory) -> Result<Vec<(CycleRecord, f64)>, EngineError> {
        if !self.config.retrieval || self.library.is_empty() {
            return Ok(Vec::new());
        }
        Ok(retrieve(tr, &self.library, self.config.k)?
            .into_iter()
            .filter(|(_, c)| *c <= self.config.max_align_cost)
            .map(|(r, c)| (r.clone(), c))
            .collect())
    }

    /// Graph → filtration → persistence → τ filter → admit/falsify. Admission is gated
    /// on a zero residual boundary norm. Memory is not modified.
    pub fn closure_test(&self, tr: &LatentTrajectory, modality: Modality) -> Result<Closure, EngineError> {
        let cfg = &self.config;
        let graph = build_state_graph_with(tr, &cfg.graph());
        let boundary_norm = residual_boundary_norm(&graph, tr);
        let f = build_graph_filtration(&graph.weighted())?;
        let bars = pers_tau(&reduce_up_to(&f, 1), cfg.tau);
        let candidates = candidates_from_bars(&bars, &graph, modality);
        let closed = boundary_norm == 0.0;
        let admitted = if closed {
            admit(&self.library, &candidates, self.episode_counter, cfg.tau, &cfg.memory)?
        } else {
            Vec::new()
        };
        let falsified = if cfg.falsification && !self.library.is_empty() {
            let extra: Vec<&[Vec<f64>]> = if closed { candidates.iter().map(|c| c.path.as_slice()).collect() } else { Vec::new() };
            let ctx = AnchoredComplex::of_library(&self.library, &extra, &cfg.memory);
            falsify(&self.library, &ctx, cfg.tau)?
        } else {
            Vec::new()
        };
        Ok(Closure {
            admitted,
            falsified,
            boundary_norm,
            candidates: candidates.len(),
        })
    }

    /// Stored classes of the trajectory's persistent loops, longest-lived first;
    /// `None` marks a loop matching no stored class. Memory is not modified.
    pub fn classify(&self, tr: &LatentTrajectory, modality: Modality) -> Result<Vec<Option<ClassId>>, EngineError> {
        let cfg = &self.config;
        let graph = build_state_graph_with(tr, &cfg.graph());
        let f = build_graph_filtration(&graph.weighted())?;
        let mut bars = pers_tau(&reduce_up_to(&f, 1), cfg.tau);
        bars.sort_by(|a, b| b.lifetime().total_cmp(&a.lifetime()));
        let candidates = candidates_from_bars(&bars, &graph, modality);
        if candidates.is_empty() {
            return Ok(Vec::new());
        }
        let extra: Vec<&[Vec<f64>]> = candidates.iter().map(|c| c.path.as_slice()).collect();
        let ctx = AnchoredComplex::of_library(&self.library, &extra, &cfg.memory);
        let mut out = Vec::with_capacity(candidates.len());
        for c in &candidates {
            let mut found = None;
            for r in self.library.records() {
                if ctx.class_equal_at(&c.path, &r.representative_path, cfg.tau)? {
                    found = Some(r.class_id);
                    break;
                }
            }
            out.push(found);
        }
        Ok(out)
    }

    /// Decoder-only replay loss on a stored loop: walk its polyline at trajectory
    /// resolution and predict each next point with trust `w`.
    fn replay_loss(rec: &CycleRecord, w: f64) -> f64 {
        let Some(t) = Template::of(rec) else {
            return 0.0;
        };
        let n = t.nodes.len() * rec.node_steps.max(1);
        let w = w.clamp(0.0, 1.0);
        let mut total = 0.0;
        for i in 0..n {
            let x = i as f64 * t.step;
            let (z, next) = (t.at(x), t.at(x + t.step));
            let (px, _) = t.project(&z);
            let p = t.at(px + t.step);
            let zhat: Vec<f64> = z.iter().zip(&p).map(|(a, b)| a + w * (b - a)).collect();
            total += dist2(&zhat, &next);
        }
        total / n as f64
    }

    /// Folds the episode's gain into the trust of every class it used, scaled down by
    /// the boundary norm, and keeps a fold only if it does not worsen replay loss on
    /// that class's stored loop (plus a `lambda_p` penalty on the squared fold). Resets
    /// the scaffold.
    pub fn slow_consolidate(&mut self, boundary_norm: f64) {
        let cfg = &self.config;
        let scale = cfg.eta_slow / (1.0 + cfg.lambda_r * boundary_norm);
        let gain = self.scaffold.gain;
        let used: Vec<ClassId> = self.scaffold.usage.keys().copied().collect();
        for id in used {
            let Some(rec) = self.library.get(id) else { continue };
            let step = scale * gain;
            if step == 0.0 {
                continue;
            }
            let old = self.decoder.weight(id);
            let new = old + step;
            // The penalty is scaled by the loop's own step energy so it is unit-free.
            let penalty = cfg.lambda_p * step * step * Self::replay_loss(rec, 0.0);
            if Self::replay_loss(rec, new) + penalty <= Self::replay_loss(rec, old) {
                self.decoder.trust.insert(id, new);
            }
        }
        let dim = self.scaffold.offset.len();
        self.scaffold = Scaffold::zero(dim);
    }

    /// Share of overlapping windows whose cheapest stored loop is the most common one.
    pub fn coherence(&self, states: &[Vec<f64>]) -> f64 {
        let (w, s) = (self.config.coherence_window, self.config.coherence_stride);
        if self.library.is_empty() || states.len() < w {
            return 0.0;
        }
        let mut votes: BTreeMap<ClassId, usize> = BTreeMap::new();
        let mut n = 0;
        let mut start = 0;
        while start + w <= states.len() {
            let window = &states[start..start + w];
            let best = self
                .library
                .records()
                .iter()
                .filter(|r| r.latent_dim() == window[0].len())
                .map(|r| (r.class_id, window_cost(window, r)))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            if let Some((id, _)) = best {
                *votes.entry(id).or_insert(0) += 1;
            }
            n += 1;
            start += s;
        }
        votes.values().copied().max().map_or(0.0, |m| m as f64 / n as f64)
    }

    /// Inner-loop steps to target on `ep` from the current state, with or without
    /// retrieval; memory is left untouched. `None` if the target is never held.
    pub fn inner_steps(&self, ep: &Episode, retrieval: bool) -> Result<(usize, bool), EngineError> {
        let tr = self.encode(ep)?;
        let mut probe = self.clone();
        probe.config.retrieval = retrieval && self.config.retrieval;
        probe.scaffold = Scaffold::zero(tr.dim());
        let records: Vec<CycleRecord> = probe.retrieved(&tr)?.into_iter().map(|(r, _)| r).collect();
        let (res, _) = probe.inner_loop(&tr, &records);
        let cap = res.len();
        Ok(match steps_to_target(&res, self.config.target_residual, self.config.target_run) {
            Some(s) => (s, true),
            None => (cap, false),
        })
    }

    /// One episode: retrieve, predict and adapt, closure test and memory update, then
    /// slow consolidation.
    pub fn run_episode(&mut self, ep: &Episode) -> Result<EpisodeReport, EngineError> {
        let tr = self.encode(ep)?;
        let cfg = self.config.clone();

        let retrieved = self.retrieved(&tr)?;
        let hits: Vec<(ClassId, f64)> = retrieved.iter().map(|(r, c)| (r.class_id, *c)).collect();
        let coherence = self.coherence(&tr.states);

        self.scaffold = Scaffold::zero(tr.dim());
        let records: Vec<CycleRecord> = retrieved.into_iter().map(|(r, _)| r).collect();
        let (residuals, step_classes) = self.inner_loop(&tr, &records);

        self.library.observe(&tr.states, &cfg.memory);
        let closure = self.closure_test(&tr, ep.modality)?;
        let admitted: Vec<ClassId> = closure.admitted.iter().map(|r| r.class_id).collect();
        update_memory(&mut self.library, closure.admitted, &closure.falsified)?;
        for (id, _) in &hits {
            self.library.record_hit(*id);
        }
        for id in &closure.falsified {
            self.decoder.trust.remove(id);
        }

        self.slow_consolidate(closure.boundary_norm);

        let (inner_steps_used, target_reached) = match steps_to_target(&residuals, cfg.target_residual, cfg.target_run) {
            Some(s) => (s, true),
            None => (residuals.len(), false),
        };
        let mut report = EpisodeReport {
            episode: self.episode_counter,
            loop_class: ep.loop_class,
            residual_median: median(&residuals),
            residual_series: residuals,
            residual_boundary_norm: closure.boundary_norm,
            admitted,
            falsified: closure.falsified,
            retrieval_hits: hits,
            step_classes,
            inner_steps_used,
            target_reached,
            phi_size_after: self.library.len(),
            entropy_proxy: 0.0,
            coherence,
        };
        let history: Vec<&EpisodeReport> = self.last_report.iter().chain(core::iter::once(&report)).collect();
        report.entropy_proxy = entropy_proxy(&history, cfg.entropy_max);
        self.last_report = Some(report.clone());
        self.episode_counter += 1;
        Ok(report)
    }

    /// Mean amortized loss minus mean oracle loss over held-out episodes.
    pub fn amortization_gap(&self, episodes: &[Episode]) -> Result<GapEstimate, EngineError> {
        const NEEDED: usize = 5;
        if episodes.len() < NEEDED {
            return Err(EngineError::InsufficientEpisodes {
                needed: NEEDED,
                found: episodes.len(),
            });
        }
        let mut per_episode = Vec::with_capacity(episodes.len());
        for ep in episodes {
            let tr = self.encode(ep)?;
            let period = if ep.closed { tr.len() - 1 } else { tr.len() };
            let nodes = (period / self.config.bin).max(3);
            let oracle = oracle_fit(&tr.states, period, nodes).loss;
            let best = self.library.records().iter().map(|r| (r, align_cost(&tr, r))).fold(
                None::<(&CycleRecord, f64)>,
                |best, (r, c)| match (best, c) {
                    (_, Err(_)) => best,
                    (Some(b), Ok(c)) if b.1 <= c => Some(b),
                    (_, Ok(c)) => Some((r, c)),
                },
            );
            let amortized = match best {
                Some((rec, _)) => template_fit(&tr.states, period, &resample(rec.nodes(), nodes)),
                None => oracle,
            };
            per_episode.push((amortized, oracle));
        }
        let n = per_episode.len() as f64;
        let amortized = per_episode.iter().map(|p| p.0).sum::<f64>() / n;
        let oracle = per_episode.iter().map(|p| p.1).sum::<f64>() / n;
        Ok(GapEstimate {
            amortized,
            oracle,
            epsilon: amortized - oracle,
            per_episode,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GapEstimate {
    pub amortized: f64,
    pub oracle: f64,
    pub epsilon: f64,
    /// `(amortized, oracle)` per episode.
    pub per_episode: Vec<(f64, f64)>,
}

/// Interpolation weights of a cyclic piecewise-linear template with `nodes` knots over
/// `period` steps; knot `j` sits at the centre of bin `j`.
fn template_weights(t: usize, period: usize, nodes: usize) -> [(usize, f64); 2] {
    let spacing = period as f64 / nodes as f64;
    let first = (spacing - 1.0) / 2.0;
    let u = rem_euclid((t % period) as f64 - first, period as f64) / spacing;
    let j = (libm::floor(u) as usize).min(nodes - 1);
    let frac = u - j as f64;
    [(j, 1.0 - frac), ((j + 1) % nodes, frac)]
}

/// A per-episode template fit by direct least squares on the knots.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleFit {
    pub nodes: Vec<Vec<f64>>,
    /// Mean squared reconstruction error per step.
    pub loss: f64,
}

pub fn oracle_fit(states: &[Vec<f64>], period: usize, nodes: usize) -> OracleFit {
    let (n, d) = (states.len(), states.first().map_or(0, Vec::len));
    if n == 0 || period == 0 || nodes == 0 {
        return OracleFit { nodes: Vec::new(), loss: 0.0 };
    }
    let mut a = DMatrix::<f64>::zeros(n, nodes);
    for t in 0..n {
        for (j, w) in template_weights(t, period, nodes) {
            a[(t, j)] += w;
        }
    }
    let z = DMatrix::from_fn(n, d, |t, c| states[t][c]);
    let gram = a.transpose() * &a + DMatrix::<f64>::identity(nodes, nodes) * 1e-10;
    let knots = match gram.cholesky() {
        Some(ch) => ch.solve(&(a.transpose() * &z)),
        None => DMatrix::zeros(nodes, d),
    };
    let fit = &a * &knots;
    let loss = (&fit - &z).iter().map(|e| e * e).sum::<f64>() / n as f64;
    OracleFit {
        nodes: (0..nodes).map(|j| knots.row(j).iter().copied().collect()).collect(),
        loss,
    }
}

/// Stored knots at their best cyclic phase (searched in 1/64 of a knot spacing)
/// with a closed-form gain and offset.
pub fn template_fit(states: &[Vec<f64>], period: usize, knots: &[Vec<f64>]) -> f64 {
    const SUB: usize = 64;
    let (n, k) = (states.len(), knots.len());
    if n == 0 || k < 2 || period == 0 {
        return 0.0;
    }
    let d = states[0].len();
    let poly = Template { id: 0, nodes: knots, step: 0.0 };
    let spacing = period as f64 / k as f64;
    let first = (spacing - 1.0) / 2.0;
    let mut best = f64::INFINITY;
    for rot in 0..k * SUB {
        let curve: Vec<Vec<f64>> = (0..n)
            .map(|t| {
                let u = rem_euclid((t % period) as f64 - first, period as f64) / spacing;
                poly.at(u + rot as f64 / SUB as f64)
            })
            .collect();
        let (gm, zm) = (crate::vecops::mean(&curve), crate::vecops::mean(states));
        let (mut num, mut den) = (0.0, 0.0);
        for (g, z) in curve.iter().zip(states) {
            for c in 0..d {
                num += (g[c] - gm[c]) * (z[c] - zm[c]);
                den += (g[c] - gm[c]) * (g[c] - gm[c]);
            }
        }
        let a = if den > 0.0 { num / den } else { 0.0 };
        let loss = curve
            .iter()
            .zip(states)
            .map(|(g, z)| (0..d).map(|c| { let e = a * (g[c] - gm[c]) + zm[c] - z[c]; e * e }).sum::<f64>())
            .sum::<f64>()
            / n as f64;
        best = best.min(loss);
    }
    best
}

/// `nodes` points equally spaced in parameter along the closed polyline.
fn resample(knots: &[Vec<f64>], nodes: usize) -> Vec<Vec<f64>> {
    if knots.len() == nodes || knots.len() < 2 {
        return knots.to_vec();
    }
    let t = Template { id: 0, nodes: knots, step: 0.0 };
    (0..nodes).map(|j| t.at(j as f64 * knots.len() as f64 / nodes as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{gen_t1, EpisodeSpec, gen_episode, LATENT_DIM};

    fn state() -> MAIState {
        MAIState::new(EngineConfig::default())
            .unwrap()
            .with_encoder(Modality::A, Encoder::identity(LATENT_DIM))
    }

    fn circle(jitter: f64, seed: u64) -> Episode {
        gen_t1(Shape::Circle, 65, jitter, true, seed).unwrap()
    }

    fn trained() -> MAIState {
        let mut s = state();
        for i in 0..6 {
            s.run_episode(&circle(0.01, 100 + i)).unwrap();
        }
        s
    }

    #[test]
    fn boundary_norm_counts_open_ends() {
        let closed = LatentTrajectory::new(circle(0.0, 1).observations, 4);
        let g = build_state_graph_with(&closed, &GraphParams::default());
        assert_eq!(residual_boundary_norm(&g, &closed), 0.0);

        let spec = EpisodeSpec { closed: false, ..EpisodeSpec::new(Shape::Circle, 65) };
        let open = LatentTrajectory::new(gen_episode(&spec, 1).unwrap().observations, 4);
        let g = build_state_graph_with(&open, &GraphParams::default());
        assert_eq!(residual_boundary_norm(&g, &open), 2.0);

        // Full loop followed by a tail that leaves and stays away.
        let mut tail = closed.states.clone();
        tail.extend((1..=12).map(|i| vec![1.0 + 0.1 * i as f64, 0.0, 0.1, 0.0]));
        let tr = LatentTrajectory::new(tail, 4);
        let g = build_state_graph_with(&tr, &GraphParams::default());
        assert_eq!(residual_boundary_norm(&g, &tr), 2.0);
    }

    #[test]
    fn forward_follows_a_stored_loop_and_inverts() {
        let s = trained();
        let rec = s.library.records()[0].clone();
        let t = Template::of(&rec).unwrap();
        let z0 = t.at(0.3);
        let mut z = z0.clone();
        let loop_steps = rec.nodes().len() * rec.node_steps;
        for _ in 0..loop_steps {
            let next = s.bootstrap_forward(&z, Some(&rec)).unwrap();
            let back = s.retrieval_inverse(&next).unwrap();
            assert!(dist2(&back, &z) < 1e-18);
            z = next;
        }
        assert!(dist2(&z, &z0) < 1e-18);

        // True next circle sample from a circle sample.
        let ep = gen_t1(Shape::Circle, 65, 0.0, false, 9).unwrap();
        let next = s.bootstrap_forward(&ep.observations[10], Some(&rec)).unwrap();
        assert!(dist2(&next, &ep.observations[11]).sqrt() < 0.05);

        // Off the loop, forward-then-inverse cannot recover the query.
        let off = vec![0.0, 0.0, 0.0, 0.0];
        let back = s.retrieval_inverse(&s.bootstrap_forward(&off, Some(&rec)).unwrap()).unwrap();
        assert!(dist2(&back, &off) > 0.5);

        assert_eq!(state().retrieval_inverse(&off), Err(EngineError::NoRetrieval));
        assert_eq!(s.bootstrap_forward(&off, None), Err(EngineError::NoRetrieval));
    }

    #[test]
    fn fast_adapt_touches_only_the_scaffold() {
        let mut s = trained();
        let (lib, dec, enc) = (s.library.clone(), s.decoder.clone(), s.encoders.clone());
        s.scaffold = Scaffold::zero(4);
        s.fast_adapt(&[0.0; 4], Some(&[0.1, 0.0, 0.0, 0.0]));
        assert!(s.scaffold.is_zero());
        for i in 0..1000 {
            let r = [0.01 * libm::sin(i as f64), 0.02, -0.01, 0.0];
            s.fast_adapt(&r, Some(&[0.1, 0.05, 0.0, 0.0]));
        }
        assert_eq!(s.library, lib);
        assert_eq!(s.decoder, dec);
        assert_eq!(s.encoders, enc);
    }

    #[test]
    fn constant_drift_is_absorbed_geometrically() {
        let mut s = state();
        s.scaffold = Scaffold::zero(2);
        let bias = [0.05, -0.02];
        let mut errs = Vec::new();
        for _ in 0..200 {
            let r: Vec<f64> = bias.iter().zip(&s.scaffold.offset).map(|(b, o)| b - o).collect();
            errs.push(libm::sqrt(norm2(&r)));
            s.fast_adapt(&r, None);
        }
        let ratio = 1.0 - s.config.eta_fast;
        for w in errs.windows(2) {
            assert!((w[1] - ratio * w[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_stream_keeps_one_class_and_descends() {
        let mut s = state();
        let reports: Vec<EpisodeReport> = (0..10).map(|i| s.run_episode(&circle(0.01, i)).unwrap()).collect();
        assert!(reports[0].retrieval_hits.is_empty());
        assert!(reports.iter().all(|r| r.phi_size_after == 1));
        assert!(reports.iter().all(|r| r.residual_boundary_norm == 0.0));
        let early = median(&reports[..5].iter().map(|r| r.residual_median).collect::<Vec<_>>());
        let late = median(&reports[5..].iter().map(|r| r.residual_median).collect::<Vec<_>>());
        assert!(late < early, "{late} !< {early}");
        for r in &reports {
            assert!(r.residual_series.iter().all(|x| x.is_finite() && *x >= 0.0));
            assert!(r.entropy_proxy.is_finite() && r.entropy_proxy >= 0.0);
        }
        assert!(s.scaffold.is_zero());
    }

    #[test]
    fn closure_gates_admission() {
        let s = trained();
        let tr = s.encode(&circle(0.01, 77)).unwrap();
        assert!(s.closure_test(&tr, Modality::A).unwrap().admitted.is_empty());

        let eight = s.encode(&gen_t1(Shape::Figure8, 65, 0.01, true, 5).unwrap()).unwrap();
        let mut novel = s.clone();
        novel.library.observe(&eight.states, &novel.config.memory);
        assert!(!novel.closure_test(&eight, Modality::A).unwrap().admitted.is_empty());

        let spec = EpisodeSpec { closed: false, jitter: 0.01, ..EpisodeSpec::new(Shape::Figure8, 65) };
        let open = s.encode(&gen_episode(&spec, 3).unwrap()).unwrap();
        let c = s.closure_test(&open, Modality::A).unwrap();
        assert!(c.admitted.is_empty());
        assert!(c.boundary_norm > 0.0);
    }

    #[test]
    fn consolidation_never_worsens_replay_and_settles() {
        let mut s = trained();
        let rec = s.library.records()[0].clone();
        let mut before = MAIState::replay_loss(&rec, s.decoder.weight(rec.class_id));
        for i in 0..100 {
            s.scaffold = Scaffold::zero(4);
            s.scaffold.gain = if i % 3 == 0 { -0.4 } else { 0.7 };
            s.scaffold.usage.insert(rec.class_id, 1);
            s.slow_consolidate(0.0);
            let after = MAIState::replay_loss(&rec, s.decoder.weight(rec.class_id));
            assert!(after <= before + 1e-15);
            before = after;
        }
        let w = s.decoder.weight(rec.class_id);
        assert!(w.is_finite() && w <= 1.0 + s.config.eta_slow);

        let mut empty = state();
        empty.scaffold.gain = 0.3;
        empty.slow_consolidate(0.0);
        assert!(empty.scaffold.is_zero() && empty.decoder.trust.is_empty());
    }

    #[test]
    fn entropy_proxy_extremes() {
        let mk = |res: Vec<f64>| EpisodeReport {
            episode: 0,
            loop_class: Shape::Circle,
            step_classes: vec![Some(0); res.len()],
            residual_median: 0.0,
            residual_series: res,
            residual_boundary_norm: 0.0,
            admitted: vec![],
            falsified: vec![],
            retrieval_hits: vec![],
            inner_steps_used: 0,
            target_reached: false,
            phi_size_after: 0,
            entropy_proxy: 0.0,
            coherence: 0.0,
        };
        let zeros = mk(vec![0.0; 32]);
        assert_eq!(entropy_proxy(&[&zeros, &zeros], 1.0), 0.0);
        let uniform = mk((0..16).map(|b| (b as f64 + 0.5) / 16.0).collect());
        assert!((entropy_proxy(&[&uniform, &uniform], 1.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_beats_or_ties_any_stored_template() {
        let s = trained();
        let eps: Vec<Episode> = (0..5).map(|i| circle(0.0, 500 + i)).collect();
        let gap = s.amortization_gap(&eps).unwrap();
        assert!(gap.epsilon >= -1e-12);
        assert!(gap.per_episode.iter().all(|(a, o)| a + 1e-12 >= *o));
        assert_eq!(
            s.amortization_gap(&eps[..3]),
            Err(EngineError::InsufficientEpisodes { needed: 5, found: 3 })
        );
        let cold = state().amortization_gap(&eps).unwrap();
        assert_eq!(cold.epsilon, 0.0);
    }

    #[test]
    fn steps_to_target_needs_a_run() {
        assert_eq!(steps_to_target(&[1.0, 0.1, 0.1, 1.0, 0.1, 0.1, 0.1], 0.2, 3), Some(7));
        assert_eq!(steps_to_target(&[1.0; 4], 0.2, 3), None);
    }
}
