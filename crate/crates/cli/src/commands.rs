use std::io::{self, Write};
use std::path::Path;

use mai_core::chain::betti;
use mai_core::engine::MAIState;
use mai_core::eval::{
    check_h1, check_h2, check_h3, check_h4, check_h5, held_out, run_ablation, t1_state, Ablation, AblationOutcome,
    ExperimentLog, Verdict,
};
use mai_core::memory::CycleLibrary;
use mai_core::persistence::{build_vr, reduce, reduce_up_to, Bar};
use mai_core::tasks::Episode;
use mai_core::vecops::median;
use serde::Serialize;

use crate::config::{Check, RunConfig};
use crate::error::CliError;
use crate::io::{self as files, ReportSink};

/// Whether the run's hypothesis checks all held.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    HypothesisFail,
}

impl Status {
    fn from_verdicts(v: &[Verdict]) -> Self {
        if v.iter().all(|v| v.pass) {
            Status::Pass
        } else {
            Status::HypothesisFail
        }
    }
}

pub fn homology(path: &Path) -> Result<Status, CliError> {
    let k = files::read_complex(path)?;
    let top = if k.is_empty() { 1 } else { k.max_dim().max(1) };
    let line: Vec<String> = (0..=top.min(2)).map(|d| format!("β{d}={}", betti(&k, d))).collect();
    println!("{}", line.join(" "));
    Ok(Status::Pass)
}

pub struct PersistenceArgs<'a> {
    pub points: &'a Path,
    pub max_scale: f64,
    pub max_dim: usize,
    pub representatives: bool,
    pub out: Option<&'a Path>,
}

/// Rips barcode of a point cloud; homology is reported below the top simplex dimension.
/// Zero-length bars (simplices born and killed at one scale) are left out.
pub fn persistence(a: PersistenceArgs<'_>) -> Result<Status, CliError> {
    let pts = files::read_points(a.points)?;
    let f = build_vr(&pts, a.max_dim, a.max_scale)?;
    let hom = a.max_dim.saturating_sub(1);
    let d = if a.max_dim == 0 { reduce(&f) } else { reduce_up_to(&f, hom) };
    let bars: Vec<&Bar> = d.bars.iter().filter(|b| b.dim <= hom && b.lifetime() > 0.0).collect();
    match a.out {
        Some(p) => files::write_diagram(files::create(p)?, &bars, a.representatives),
        None => files::write_diagram(io::stdout().lock(), &bars, a.representatives),
    }?;
    Ok(Status::Pass)
}

/// Runs one episode through an engine seeded from the config, carrying the library
/// across invocations. The episode is read from `input` or generated (stream index
/// `index`) and is written to the output directory either way.
pub fn episode(cfg: &RunConfig, input: Option<&Path>, index: usize) -> Result<Status, CliError> {
    let out = cfg.out_dir();
    let (ep, seed): (Episode, u64) = match input {
        Some(p) => {
            let (ep, h) = files::read_episode(p)?;
            (ep, h.seed)
        }
        None => (cfg.task.stream().episode(index, cfg.seed)?, cfg.seed),
    };
    files::write_episode(&out.join("episode.csv"), &ep, seed)?;
    let mut state = engine_state(cfg)?;
    let report = state.run_episode(&ep)?;
    let mut sink = ReportSink::in_dir(&out)?;
    sink.push(&report)?;
    sink.finish()?;
    save_library(cfg, &out, &state.library)?;
    println!(
        "episode {}: {} steps, R={}, admitted {:?}, falsified {:?}, |Φ|={}, inner steps {}",
        report.episode,
        ep.len(),
        report.residual_boundary_norm,
        report.admitted,
        report.falsified,
        report.phi_size_after,
        report.inner_steps_used
    );
    Ok(Status::Pass)
}

/// A T1 engine, continuing from the library snapshot when one is configured.
fn engine_state(cfg: &RunConfig) -> Result<MAIState, CliError> {
    let mut state = t1_state(&cfg.engine, cfg.seed)?;
    if let Some(lib) = &cfg.library {
        state.library = files::load_library(lib, cfg.seed)?;
        state.episode_counter = state.library.records().iter().map(|r| r.created_episode + 1).max().unwrap_or(0);
    }
    Ok(state)
}

fn save_library(cfg: &RunConfig, out: &Path, lib: &CycleLibrary) -> Result<(), CliError> {
    files::write_json(&out.join("library.json"), lib)?;
    if let Some(p) = &cfg.library {
        files::write_json(p, lib)?;
    }
    Ok(())
}

/// Full stream for one seed, then the enabled hypothesis checks. With `ablation`
/// set in the config both arms run instead.
pub fn experiment(cfg: &RunConfig) -> Result<Status, CliError> {
    if let Some(id) = &cfg.ablation {
        let ab: Ablation = id.parse()?;
        return ablate(cfg, ab);
    }
    let out = cfg.out_dir();
    let spec = cfg.run_spec();
    let stream = &spec.stream;
    let mut state = engine_state(cfg)?;
    files::write_json(&out.join("config.json"), cfg)?;
    let mut sink = ReportSink::in_dir(&out)?;
    let mut reports = Vec::with_capacity(stream.len());
    for i in 0..stream.len() {
        let r = state.run_episode(&stream.episode(i, cfg.seed)?)?;
        sink.push(&r)?;
        reports.push(r);
    }
    sink.finish()?;
    let log = ExperimentLog {
        reports,
        spec: spec.clone(),
        seed: cfg.seed,
    };

    let shape = stream.episode.shape;
    let mut verdicts = Vec::with_capacity(cfg.checks.len());
    for check in &cfg.checks {
        verdicts.push(match check {
            Check::H1 => check_h1(&log),
            Check::H2 => check_h2(&log, &cfg.eval),
            Check::H3 => {
                let ep = held_out(stream, shape, 1, cfg.seed)?.remove(0);
                check_h3(&state, &ep, &cfg.eval)?
            }
            Check::H4 => check_h4(&log),
            Check::H5 => check_h5(&state, &held_out(stream, shape, cfg.eval.h5_held_out, cfg.seed)?, &cfg.eval)?,
        });
    }
    files::write_json(&out.join("verdicts.json"), &verdicts)?;
    save_library(cfg, &out, &state.library)?;

    let mut so = io::stdout().lock();
    let _ = writeln!(so, "{} episodes, seed {}, final |Φ|={}", log.reports.len(), cfg.seed, state.library.len());
    let _ = print_verdicts(&mut so, &verdicts);
    let _ = writeln!(so, "outputs in {}", out.display());
    Ok(Status::from_verdicts(&verdicts))
}

#[derive(Serialize)]
struct ArmSummary {
    arm: &'static str,
    seed: u64,
    final_phi: usize,
    residual_median: f64,
    admissions: usize,
    falsifications: usize,
    inner_steps_median: f64,
}

fn summarize(arm: &'static str, log: &ExperimentLog) -> ArmSummary {
    let r = &log.reports;
    ArmSummary {
        arm,
        seed: log.seed,
        final_phi: r.last().map_or(0, |r| r.phi_size_after),
        residual_median: median(&r.iter().map(|r| r.residual_median).collect::<Vec<_>>()),
        admissions: r.iter().map(|r| r.admitted.len()).sum(),
        falsifications: r.iter().map(|r| r.falsified.len()).sum(),
        inner_steps_median: median(&r.iter().map(|r| r.inner_steps_used as f64).collect::<Vec<_>>()),
    }
}

fn write_arms(dir: &Path, arm: &str, logs: &[ExperimentLog]) -> Result<(), CliError> {
    for log in logs {
        let mut sink = ReportSink::in_dir(&dir.join(arm).join(format!("seed-{}", log.seed)))?;
        for r in &log.reports {
            sink.push(r)?;
        }
        sink.finish()?;
    }
    Ok(())
}

/// Baseline and ablated arms over the configured seeds, with per-arm reports, a
/// comparison table and the ablation's verdict.
pub fn ablate(cfg: &RunConfig, ab: Ablation) -> Result<Status, CliError> {
    let out = cfg.out_dir();
    let seeds = cfg.seeds();
    let AblationOutcome {
        verdict,
        baseline,
        ablated,
        ..
    } = run_ablation(ab, &cfg.run_spec(), &seeds, &cfg.eval)?;
    files::write_json(&out.join("config.json"), cfg)?;
    write_arms(&out, "baseline", &baseline)?;
    write_arms(&out, "ablated", &ablated)?;
    let rows: Vec<ArmSummary> = baseline
        .iter()
        .map(|l| summarize("baseline", l))
        .chain(ablated.iter().map(|l| summarize("ablated", l)))
        .collect();
    let mut cmp = csv::Writer::from_writer(files::create(&out.join("comparison.csv"))?);
    for r in &rows {
        cmp.serialize(r)?;
    }
    cmp.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
    let verdicts = vec![verdict];
    files::write_json(&out.join("verdicts.json"), &verdicts)?;

    let mut so = io::stdout().lock();
    let _ = writeln!(so, "ablation {ab} ({}), seeds {seeds:?}", ab.field());
    let _ = writeln!(
        so,
        "{:<9} {:>6} {:>9} {:>15} {:>10} {:>14} {:>11}",
        "arm", "seed", "final |Φ|", "residual median", "admissions", "falsifications", "inner steps"
    );
    for r in &rows {
        let _ = writeln!(
            so,
            "{:<9} {:>6} {:>9} {:>15.6} {:>10} {:>14} {:>11}",
            r.arm, r.seed, r.final_phi, r.residual_median, r.admissions, r.falsifications, r.inner_steps_median
        );
    }
    let _ = print_verdicts(&mut so, &verdicts);
    let _ = writeln!(so, "outputs in {}", out.display());
    Ok(Status::from_verdicts(&verdicts))
}

fn print_verdicts<W: Write>(w: &mut W, verdicts: &[Verdict]) -> io::Result<()> {
    writeln!(w, "{:<4} {:<6} {:>12}  detail", "id", "result", "statistic")?;
    for v in verdicts {
        let detail: Vec<String> = v
            .detail
            .iter()
            .filter(|(_, s)| s.len() <= 12)
            .map(|(n, s)| {
                let vals: Vec<String> = s.iter().map(|x| format!("{x:.4}")).collect();
                format!("{n}=[{}]", vals.join(" "))
            })
            .collect();
        writeln!(
            w,
            "{:<4} {:<6} {:>12.6}  {}",
            v.id,
            if v.pass { "pass" } else { "FAIL" },
            v.statistic,
            detail.join(" ")
        )?;
    }
    Ok(())
}
