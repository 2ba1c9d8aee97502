//! Episode streams, hypothesis checks and ablation arms.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::engine::{EngineConfig, EngineError, EpisodeReport, MAIState};
use crate::persistence::{bottleneck, build_vr, Reduction};
use crate::rng::subseed;
use crate::memory::{intersect, ClassId};
use crate::tasks::{
    gen_episode, gen_t1, permute_episode, Agents, Encoder, Episode, EpisodeSpec, Modality, ObservationMap, Shape, LATENT_DIM,
};
use crate::vecops::median;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unknown ablation {0:?} (expected A1..A5)")]
    UnknownAblation(String),
    #[error("need at least {needed} {what}, got {found}")]
    TooShort { what: &'static str, needed: usize, found: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

impl From<crate::tasks::TaskError> for EvalError {
    fn from(e: crate::tasks::TaskError) -> Self {
        EvalError::Engine(e.into())
    }
}

impl From<crate::persistence::PersistenceError> for EvalError {
    fn from(e: crate::persistence::PersistenceError) -> Self {
        EvalError::Engine(e.into())
    }
}

/// A T1 episode stream: `base` episodes, with `novel` alternating in from `novel_from`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StreamSpec {
    pub episode: EpisodeSpec,
    pub novel: Option<Shape>,
    pub novel_from: usize,
    pub epochs: usize,
    pub episodes_per_epoch: usize,
}

impl StreamSpec {
    pub fn stationary(shape: Shape) -> Self {
        Self {
            episode: EpisodeSpec {
                jitter: 0.01,
                permute: true,
                ..EpisodeSpec::new(shape, 65)
            },
            novel: None,
            novel_from: 0,
            epochs: 6,
            episodes_per_epoch: 5,
        }
    }

    pub fn len(&self) -> usize {
        self.epochs * self.episodes_per_epoch
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape_at(&self, index: usize) -> Shape {
        match self.novel {
            Some(n) if index >= self.novel_from && (index - self.novel_from).is_multiple_of(2) => n,
            _ => self.episode.shape,
        }
    }

    /// Episode `index`, seeded by `hash(seed, epoch, episode-in-epoch)`.
    pub fn episode(&self, index: usize, seed: u64) -> Result<Episode, EvalError> {
        let per = self.episodes_per_epoch.max(1);
        let spec = EpisodeSpec {
            shape: self.shape_at(index),
            ..self.episode
        };
        let s = subseed(seed, &[(index / per) as u64, (index % per) as u64]);
        Ok(gen_episode(&spec, s)?)
    }
}

/// Everything an arm needs besides its seed.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunSpec {
    pub engine: EngineConfig,
    pub stream: StreamSpec,
}

impl RunSpec {
    pub fn t1(shape: Shape) -> Self {
        Self {
            engine: EngineConfig::default(),
            stream: StreamSpec::stationary(shape),
        }
    }

    /// Circle for the first half, then figure-8 alternating with circle.
    pub fn t1_novel() -> Self {
        let mut r = Self::t1(Shape::Circle);
        r.stream.novel = Some(Shape::Figure8);
        r.stream.novel_from = r.stream.len() / 2;
        r
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentLog {
    pub reports: Vec<EpisodeReport>,
    pub spec: RunSpec,
    pub seed: u64,
}

impl ExperimentLog {
    /// Reports grouped by epoch.
    pub fn epochs(&self) -> impl Iterator<Item = &[EpisodeReport]> {
        self.reports.chunks(self.spec.stream.episodes_per_epoch.max(1))
    }
}

/// A fresh engine for T1 (identity encoder on modality A).
pub fn t1_state(engine: &EngineConfig, seed: u64) -> Result<MAIState, EvalError> {
    let cfg = EngineConfig { seed, ..engine.clone() };
    Ok(MAIState::new(cfg)?.with_encoder(Modality::A, Encoder::identity(LATENT_DIM)))
}

pub fn run_stream(spec: &RunSpec, seed: u64) -> Result<(MAIState, ExperimentLog), EvalError> {
    let mut state = t1_state(&spec.engine, seed)?;
    let mut reports = Vec::with_capacity(spec.stream.len());
    for i in 0..spec.stream.len() {
        reports.push(state.run_episode(&spec.stream.episode(i, seed)?)?);
    }
    let log = ExperimentLog {
        reports,
        spec: spec.clone(),
        seed,
    };
    Ok((state, log))
}

/// Thresholds for the checks. The hypotheses only state a direction; the numbers
/// are calibration choices.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EvalConfig {
    /// H2 needs the log-residual slope below `-h2_min_descent` per epoch.
    pub h2_min_descent: f64,
    pub h3_permutations: usize,
    pub h3_epsilon: f64,
    pub h5_ratio: f64,
    pub h5_held_out: usize,
    pub a2_ratio: f64,
    /// A3 counts as "no benefit" when the ablated H5 ratio is at least this.
    pub a3_ratio: f64,
    pub a4_fraction: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            h2_min_descent: 0.05,
            h3_permutations: 50,
            h3_epsilon: 0.05,
            h5_ratio: 0.5,
            h5_held_out: 10,
            a2_ratio: 5.0,
            a3_ratio: 0.9,
            a4_fraction: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Verdict {
    pub id: String,
    pub pass: bool,
    pub statistic: f64,
    /// Named raw series behind the statistic.
    pub detail: Vec<(String, Vec<f64>)>,
}

impl Verdict {
    fn new(id: &str, pass: bool, statistic: f64) -> Self {
        Self {
            id: id.to_string(),
            pass,
            statistic,
            detail: Vec::new(),
        }
    }

    fn with(mut self, name: &str, series: Vec<f64>) -> Self {
        self.detail.push((name.to_string(), series));
        self
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.detail.iter().find(|(n, _)| n == name).map(|(_, s)| s.as_slice())
    }
}

/// Library size is nondecreasing except where a falsification is recorded; with a
/// novel loop in the stream at least one strict increase is required. The statistic
/// counts strict increases (from an empty library).
pub fn check_h1(log: &ExperimentLog) -> Verdict {
    let sizes: Vec<usize> = log.reports.iter().map(|r| r.phi_size_after).collect();
    let falsified: Vec<bool> = log.reports.iter().map(|r| !r.falsified.is_empty()).collect();
    h1_from_sizes(&sizes, &falsified, log.spec.stream.novel.is_some())
}

pub fn h1_from_sizes(sizes: &[usize], falsified: &[bool], novel: bool) -> Verdict {
    let mut prev = 0;
    let mut monotone = true;
    let mut increases = 0;
    for (i, &s) in sizes.iter().enumerate() {
        if s < prev && !falsified.get(i).copied().unwrap_or(false) {
            monotone = false;
        }
        if s > prev {
            increases += 1;
        }
        prev = s;
    }
    let pass = sizes.len() >= 2 && monotone && (!novel || increases >= 1);
    Verdict::new("H1", pass, increases as f64)
        .with("phi_size", sizes.iter().map(|s| *s as f64).collect())
        .with("falsified", falsified.iter().map(|f| if *f { 1.0 } else { 0.0 }).collect())
}

/// Per-epoch median of all step residuals.
pub fn epoch_medians(log: &ExperimentLog) -> Vec<f64> {
    log.epochs()
        .map(|ep| {
            let all: Vec<f64> = ep.iter().flat_map(|r| r.residual_series.iter().copied()).collect();
            median(&all)
        })
        .collect()
}

/// Least-squares slope of `ln(median)` against epoch index; γ = exp(slope).
pub fn h2_from_medians(medians: &[f64], min_descent: f64) -> Verdict {
    if medians.iter().all(|m| *m == 0.0) {
        return Verdict::new("H2", true, 0.0).with("epoch_median", medians.to_vec());
    }
    let slope = log_slope(medians);
    let gamma = libm::exp(slope);
    Verdict::new("H2", medians.len() >= 2 && slope < -min_descent, gamma)
        .with("epoch_median", medians.to_vec())
        .with("slope", vec![slope])
}

fn log_slope(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let ys: Vec<f64> = values.iter().map(|v| libm::log(v.max(f64::MIN_POSITIVE))).collect();
    let xm = (n - 1.0) / 2.0;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xm;
        num += dx * (y - ym);
        den += dx * dx;
    }
    num / den
}

pub fn check_h2(log: &ExperimentLog, cfg: &EvalConfig) -> Verdict {
    h2_from_medians(&epoch_medians(log), cfg.h2_min_descent)
}

/// H2 over seeds: the statistic is the median fitted γ, and the check passes when the
/// median slope clears the descent threshold.
pub fn check_h2_seeds(logs: &[ExperimentLog], cfg: &EvalConfig) -> Verdict {
    let per: Vec<Verdict> = logs.iter().map(|l| check_h2(l, cfg)).collect();
    let slopes: Vec<f64> = per.iter().map(|v| v.series("slope").map_or(f64::NEG_INFINITY, |s| s[0])).collect();
    let gammas: Vec<f64> = per.iter().map(|v| v.statistic).collect();
    let slope = median(&slopes);
    Verdict::new("H2", !logs.is_empty() && slope < -cfg.h2_min_descent, median(&gammas))
        .with("gamma", gammas)
        .with("slope", slopes)
}

/// Class-preserving permutations of `ep` must all close, decode to the same stored
/// classes as `ep`, and keep the latent diagram within `h3_epsilon` in bottleneck
/// distance.
pub fn check_h3(state: &MAIState, ep: &Episode, cfg: &EvalConfig) -> Result<Verdict, EvalError> {
    let base_tr = state.encode(ep)?;
    let base = state.classify(&base_tr, ep.modality)?;
    let diagram = |states: &[Vec<f64>]| -> Result<_, EvalError> {
        let f = build_vr(states, 2, 1.0)?;
        Ok(Reduction::up_to(&f, 1).diagram())
    };
    let d0 = diagram(&base_tr.states)?;
    let mut same = 0usize;
    let mut distances = Vec::with_capacity(cfg.h3_permutations);
    for i in 0..cfg.h3_permutations {
        let perm = permute_episode(ep, 4, subseed(ep.permutation_seed, &[0x43, i as u64]));
        let tr = state.encode(&perm)?;
        let classes = state.classify(&tr, perm.modality)?;
        if !base.is_empty() && base.iter().all(Option::is_some) && classes == base {
            same += 1;
        }
        let d = diagram(&tr.states)?;
        distances.push(bottleneck(&d0, &d, 1).unwrap_or(f64::INFINITY));
    }
    let worst = distances.iter().copied().fold(0.0, f64::max);
    let pass = same == cfg.h3_permutations && worst <= cfg.h3_epsilon;
    Ok(Verdict::new("H3", pass, same as f64 / cfg.h3_permutations.max(1) as f64)
        .with("bottleneck", distances)
        .with("base_classes", base.iter().map(|c| c.map_or(-1.0, |c| c as f64)).collect()))
}

/// Mean window-decode coherence must not drop from the first to the last epoch.
pub fn check_h4(log: &ExperimentLog) -> Verdict {
    let means: Vec<f64> = log
        .epochs()
        .map(|ep| ep.iter().map(|r| r.coherence).sum::<f64>() / ep.len().max(1) as f64)
        .collect();
    let (first, last) = (means.first().copied().unwrap_or(0.0), means.last().copied().unwrap_or(0.0));
    Verdict::new("H4", means.len() >= 2 && last >= first, last - first).with("epoch_coherence", means)
}

/// Inner steps to target with retrieval over steps without it, per held-out episode.
pub fn h5_ratios(state: &MAIState, held_out: &[Episode]) -> Result<(Vec<f64>, usize), EvalError> {
    let mut ratios = Vec::with_capacity(held_out.len());
    let mut unreachable = 0;
    for ep in held_out {
        let (with, ok) = state.inner_steps(ep, true)?;
        let (without, _) = state.inner_steps(ep, false)?;
        unreachable += usize::from(!ok);
        ratios.push(with as f64 / without.max(1) as f64);
    }
    Ok((ratios, unreachable))
}

pub fn check_h5(state: &MAIState, held_out: &[Episode], cfg: &EvalConfig) -> Result<Verdict, EvalError> {
    let (ratios, unreachable) = h5_ratios(state, held_out)?;
    let m = median(&ratios);
    Ok(Verdict::new("H5", !ratios.is_empty() && m <= cfg.h5_ratio, m)
        .with("ratio", ratios)
        .with("target_unreachable", vec![unreachable as f64]))
}

/// Fresh episodes from the same stream distribution, seeded apart from training.
pub fn held_out(stream: &StreamSpec, shape: Shape, n: usize, seed: u64) -> Result<Vec<Episode>, EvalError> {
    let spec = EpisodeSpec { shape, ..stream.episode };
    (0..n)
        .map(|i| Ok(gen_episode(&spec, subseed(seed, &[0x5E1D, i as u64]))?))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Ablation {
    /// Open loops.
    A1,
    /// τ = 0.
    A2,
    /// No retrieval.
    A3,
    /// Class-breaking scrambles.
    A4,
    /// Frozen scaffold.
    A5,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [Ablation::A1, Ablation::A2, Ablation::A3, Ablation::A4, Ablation::A5];

    /// The one config field this arm changes.
    pub fn field(self) -> &'static str {
        match self {
            Ablation::A1 => "stream.episode.closed",
            Ablation::A2 => "engine.tau",
            Ablation::A3 => "engine.retrieval",
            Ablation::A4 => "stream.episode.scramble",
            Ablation::A5 => "engine.adapt",
        }
    }

    pub fn apply(self, base: &RunSpec) -> RunSpec {
        let mut r = base.clone();
        match self {
            Ablation::A1 => r.stream.episode.closed = false,
            Ablation::A2 => r.engine.tau = 0.0,
            Ablation::A3 => r.engine.retrieval = false,
            Ablation::A4 => r.stream.episode.scramble = true,
            Ablation::A5 => r.engine.adapt = false,
        }
        r
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Ablation {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "A1" => Ok(Ablation::A1),
            "A2" => Ok(Ablation::A2),
            "A3" => Ok(Ablation::A3),
            "A4" => Ok(Ablation::A4),
            "A5" => Ok(Ablation::A5),
            _ => Err(EvalError::UnknownAblation(s.to_string())),
        }
    }
}

/// Names of the config fields where two run specs differ.
pub fn differing_fields(a: &RunSpec, b: &RunSpec) -> Vec<&'static str> {
    let (e, f) = (&a.engine, &b.engine);
    let (s, t) = (&a.stream, &b.stream);
    let checks: [(&'static str, bool); 30] = [
        ("engine.tau", e.tau != f.tau),
        ("engine.k", e.k != f.k),
        ("engine.eta_fast", e.eta_fast != f.eta_fast),
        ("engine.eta_slow", e.eta_slow != f.eta_slow),
        ("engine.lambda_r", e.lambda_r != f.lambda_r),
        ("engine.lambda_p", e.lambda_p != f.lambda_p),
        ("engine.gamma_target", e.gamma_target != f.gamma_target),
        ("engine.bin", e.bin != f.bin),
        ("engine.knn", e.knn != f.knn),
        ("engine.merge_fraction", e.merge_fraction != f.merge_fraction),
        ("engine.memory", e.memory != f.memory),
        ("engine.max_align_cost", e.max_align_cost != f.max_align_cost),
        ("engine.scaffold_bound", e.scaffold_bound != f.scaffold_bound),
        ("engine.target_residual", e.target_residual != f.target_residual),
        ("engine.target_run", e.target_run != f.target_run),
        ("engine.entropy_max", e.entropy_max != f.entropy_max),
        ("engine.coherence_window", e.coherence_window != f.coherence_window),
        ("engine.coherence_stride", e.coherence_stride != f.coherence_stride),
        ("engine.retrieval", e.retrieval != f.retrieval),
        ("engine.adapt", e.adapt != f.adapt),
        ("engine.falsification", e.falsification != f.falsification),
        ("engine.seed", e.seed != f.seed),
        ("stream.episode.shape", s.episode.shape != t.episode.shape),
        ("stream.episode.steps", s.episode.steps != t.episode.steps),
        ("stream.episode.jitter", s.episode.jitter != t.episode.jitter),
        ("stream.episode.permute", s.episode.permute != t.episode.permute),
        ("stream.episode.closed", s.episode.closed != t.episode.closed),
        ("stream.episode.scramble", s.episode.scramble != t.episode.scramble),
        ("stream.episode.segment+open_fraction", s.episode.segment != t.episode.segment || s.episode.open_fraction != t.episode.open_fraction),
        ("stream.schedule", s.novel != t.novel || s.novel_from != t.novel_from || s.epochs != t.epochs || s.episodes_per_epoch != t.episodes_per_epoch),
    ];
    checks.iter().filter(|(_, d)| *d).map(|(n, _)| *n).collect()
}

/// Both arms of an ablation, one log per seed.
#[derive(Clone, Debug)]
pub struct AblationOutcome {
    pub ablation: Ablation,
    pub verdict: Verdict,
    pub baseline: Vec<ExperimentLog>,
    pub ablated: Vec<ExperimentLog>,
}

fn final_sizes(logs: &[ExperimentLog]) -> Vec<f64> {
    logs.iter()
        .map(|l| l.reports.last().map_or(0.0, |r| r.phi_size_after as f64))
        .collect()
}

fn mean_residual(logs: &[ExperimentLog]) -> f64 {
    let all: Vec<f64> = logs.iter().flat_map(|l| l.reports.iter().map(|r| r.residual_median)).collect();
    all.iter().sum::<f64>() / all.len().max(1) as f64
}

/// Runs baseline and ablated arms over `seeds` and judges the expected effect.
pub fn run_ablation(ablation: Ablation, base: &RunSpec, seeds: &[u64], cfg: &EvalConfig) -> Result<AblationOutcome, EvalError> {
    let arm = ablation.apply(base);
    let mut baseline = Vec::with_capacity(seeds.len());
    let mut base_states = Vec::with_capacity(seeds.len());
    let mut ablated = Vec::with_capacity(seeds.len());
    let mut arm_states = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let (s, l) = run_stream(base, seed)?;
        base_states.push(s);
        baseline.push(l);
        let (s, l) = run_stream(&arm, seed)?;
        arm_states.push(s);
        ablated.push(l);
    }
    let id = format!("{ablation}");
    let verdict = match ablation {
        Ablation::A1 => {
            let admissions: usize = ablated.iter().flat_map(|l| &l.reports).map(|r| r.admitted.len()).sum();
            let open = ablated.iter().flat_map(|l| &l.reports).all(|r| r.residual_boundary_norm > 0.0);
            let norms: Vec<f64> = ablated.iter().flat_map(|l| l.reports.iter().map(|r| r.residual_boundary_norm)).collect();
            Verdict::new(&id, admissions == 0 && open, admissions as f64).with("boundary_norm", norms)
        }
        Ablation::A2 => {
            let (b, a) = (final_sizes(&baseline), final_sizes(&ablated));
            let ratio = median(&a) / median(&b).max(f64::MIN_POSITIVE);
            Verdict::new(&id, ratio >= cfg.a2_ratio, ratio)
                .with("baseline_phi", b)
                .with("ablated_phi", a)
        }
        Ablation::A3 => {
            let mut rb = Vec::new();
            let mut ra = Vec::new();
            for ((bs, asx), &seed) in base_states.iter().zip(&arm_states).zip(seeds) {
                let eps = held_out(&base.stream, base.stream.episode.shape, cfg.h5_held_out, seed)?;
                rb.push(median(&h5_ratios(bs, &eps)?.0));
                ra.push(median(&h5_ratios(asx, &eps)?.0));
            }
            let (mb, ma) = (median(&rb), median(&ra));
            let (resb, resa) = (mean_residual(&baseline), mean_residual(&ablated));
            Verdict::new(&id, ma >= cfg.a3_ratio && resa > resb, ma)
                .with("baseline_h5_ratio", rb)
                .with("ablated_h5_ratio", ra)
                .with("h5_ratio_medians", vec![mb, ma])
                .with("mean_residual", vec![resb, resa])
        }
        Ablation::A4 => {
            let mut broken = 0usize;
            let mut total = 0usize;
            for (bs, &seed) in base_states.iter().zip(seeds) {
                let known: Vec<u64> = bs.library.class_ids();
                for i in 0..arm.stream.len() {
                    let ep = arm.stream.episode(i, seed)?;
                    let tr = bs.encode(&ep)?;
                    let closure = bs.closure_test(&tr, ep.modality)?;
                    let keeps_class = closure.boundary_norm == 0.0
                        && bs.classify(&tr, ep.modality)?.iter().any(|c| c.is_some_and(|c| known.contains(&c)));
                    broken += usize::from(!keeps_class);
                    total += 1;
                }
            }
            let frac = broken as f64 / total.max(1) as f64;
            Verdict::new(&id, frac >= cfg.a4_fraction, frac).with("counts", vec![broken as f64, total as f64])
        }
        Ablation::A5 => {
            let hb = check_h2_seeds(&baseline, cfg);
            let ha = check_h2_seeds(&ablated, cfg);
            Verdict::new(&id, !ha.pass, ha.statistic)
                .with("baseline_gamma", vec![hb.statistic])
                .with("ablated_slope", ha.series("slope").unwrap_or(&[]).to_vec())
        }
    };
    Ok(AblationOutcome {
        ablation,
        verdict,
        baseline,
        ablated,
    })
}

/// Outcome of the teacher/student task.
#[derive(Clone, Debug)]
pub struct SocialOutcome {
    pub groups: Vec<Vec<ClassId>>,
    pub teacher: MAIState,
    pub student: MAIState,
}

/// Encoder from an agent's observations back to the shared latent frame, fit on one
/// calibration walk of each shape.
fn calibrated_encoder(map: &ObservationMap, seed: u64) -> Result<Encoder, EvalError> {
    let mut obs = Vec::new();
    let mut targets = Vec::new();
    for (i, shape) in [Shape::Circle, Shape::Figure8].into_iter().enumerate() {
        let canonical = gen_t1(shape, 65, 0.01, false, subseed(seed, &[0xCA1, i as u64]))?;
        obs.extend(map.apply(&canonical, Modality::A).observations);
        targets.extend(canonical.observations);
    }
    Ok(Encoder::fit(&obs, &targets, 1e-6, 2.0)?)
}

/// Teacher and student each learn from their own view of a loop; returns the classes
/// both libraries share. Both agents anchor in the frame named by `seed`.
pub fn run_social(
    engine: &EngineConfig,
    teacher_shape: Shape,
    student_shape: Shape,
    episodes: usize,
    seed: u64,
) -> Result<SocialOutcome, EvalError> {
    let agents = Agents::new(seed);
    let run = |map: &ObservationMap, shape: Shape, who: u64| -> Result<MAIState, EvalError> {
        let cfg = EngineConfig { seed, ..engine.clone() };
        let mut state = MAIState::new(cfg)?.with_encoder(Modality::A, calibrated_encoder(map, subseed(seed, &[who]))?);
        for e in 0..episodes {
            let canonical = gen_t1(shape, 65, 0.01, true, subseed(seed, &[who, e as u64]))?;
            state.run_episode(&map.apply(&canonical, Modality::A))?;
        }
        Ok(state)
    };
    let teacher = run(&agents.teacher, teacher_shape, 0x7E)?;
    let student = run(&agents.student, student_shape, 0x57)?;
    let groups = intersect(&[&teacher.library, &student.library], engine.tau, &engine.memory).map_err(EngineError::from)?;
    Ok(SocialOutcome { groups, teacher, student })
}
