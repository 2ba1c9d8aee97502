//! File formats: complexes, point clouds, diagrams, episodes, reports, libraries.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use mai_core::chain::{Chain, SimplicialComplex};
use mai_core::engine::EpisodeReport;
use mai_core::memory::CycleLibrary;
use mai_core::persistence::Bar;
use mai_core::tasks::{Episode, Modality, Shape};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(CliError::io("cannot create directory", dir))?;
    }
    let f = File::create(path).map_err(CliError::io("cannot create", path))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    Ok(BufReader::new(File::open(path).map_err(CliError::io("cannot open", path))?))
}

/// One chain per line in `k: v0 v1 ; ...` form; `#` starts a comment. The complex is
/// the closure of every simplex listed.
pub fn read_complex(path: &Path) -> Result<SimplicialComplex, CliError> {
    let mut simplices = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(CliError::io("cannot read", path))?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let chain: Chain = body.parse().map_err(|e| CliError::parse(path, i as u64 + 1, e))?;
        simplices.extend(chain.terms().iter().cloned());
    }
    Ok(SimplicialComplex::closure(simplices))
}

/// Numeric CSV, one point per row. A leading row with no numeric field is a header.
pub fn read_points(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(open(path)?);
    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::parse(path, line, e)
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let parsed: Vec<Result<f64, _>> = rec.iter().map(str::parse::<f64>).collect();
        if i == 0 && parsed.iter().all(Result::is_err) {
            continue;
        }
        let mut point = Vec::with_capacity(parsed.len());
        for (field, v) in rec.iter().zip(parsed) {
            match v {
                Ok(x) if x.is_finite() => point.push(x),
                _ => return Err(CliError::parse(path, line, format!("not a finite number: {field:?}"))),
            }
        }
        points.push(point);
    }
    Ok(points)
}

fn fmt_f64(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        x.to_string()
    }
}

/// `dim,birth,death,lifetime` with `inf` for essential bars, optionally followed by the
/// representative chain.
pub fn write_diagram<W: Write>(w: W, bars: &[&Bar], representatives: bool) -> Result<(), CliError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["dim", "birth", "death", "lifetime"];
    if representatives {
        header.push("representative");
    }
    out.write_record(&header)?;
    for b in bars {
        let mut row = vec![b.dim.to_string(), fmt_f64(b.birth), fmt_f64(b.death), fmt_f64(b.lifetime())];
        if representatives {
            row.push(b.representative.to_string());
        }
        out.write_record(&row)?;
    }
    out.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}

/// Metadata stored next to an episode CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeHeader {
    pub shape: Shape,
    #[serde(rename = "T")]
    pub steps: usize,
    pub jitter: f64,
    pub seed: u64,
    pub modality: Modality,
    pub closed: bool,
    pub obs_dim: usize,
}

/// `run/ep.csv` keeps its header in `run/ep.json`.
pub fn header_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn write_episode(csv_path: &Path, ep: &Episode, seed: u64) -> Result<(), CliError> {
    let header = EpisodeHeader {
        shape: ep.loop_class,
        steps: ep.len(),
        jitter: ep.jitter,
        seed,
        modality: ep.modality,
        closed: ep.closed,
        obs_dim: ep.obs_dim(),
    };
    let mut h = create(&header_path(csv_path))?;
    serde_json::to_writer_pretty(&mut h, &header)?;
    writeln!(h).and_then(|_| h.flush()).map_err(CliError::io("cannot write", csv_path))?;

    let mut out = csv::Writer::from_writer(create(csv_path)?);
    let mut cols = vec!["step".to_string()];
    cols.extend((0..header.obs_dim).map(|i| format!("x{i}")));
    out.write_record(&cols)?;
    for (t, x) in ep.observations.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(x.iter().map(|v| v.to_string()));
        out.write_record(&row)?;
    }
    out.flush().map_err(CliError::io("cannot write", csv_path))?;
    Ok(())
}

pub fn read_episode(csv_path: &Path) -> Result<(Episode, EpisodeHeader), CliError> {
    let hp = header_path(csv_path);
    let header: EpisodeHeader = serde_json::from_reader(open(&hp)?)
        .map_err(|e| CliError::parse(&hp, e.line() as u64, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(csv_path)?);
    let mut observations = Vec::with_capacity(header.steps);
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::parse(csv_path, e.position().map_or(0, |p| p.line()), e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.obs_dim + 1 {
            return Err(CliError::parse(
                csv_path,
                line,
                format!("expected {} columns, found {}", header.obs_dim + 1, rec.len()),
            ));
        }
        let x = rec
            .iter()
            .skip(1)
            .map(|f| f.parse::<f64>().map_err(|_| CliError::parse(csv_path, line, format!("not a number: {f:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        observations.push(x);
    }
    if observations.len() != header.steps {
        return Err(CliError::Input(format!(
            "{}: header says T={} but found {} rows",
            csv_path.display(),
            header.steps,
            observations.len()
        )));
    }
    let ep = Episode {
        observations,
        modality: header.modality,
        loop_class: header.shape,
        permutation_seed: header.seed,
        jitter: header.jitter,
        closed: header.closed,
    };
    Ok((ep, header))
}

/// Episode reports, one JSON object per line.
pub struct ReportSink<W: Write> {
    ndjson: W,
    aggregate: csv::Writer<W>,
}

pub const AGGREGATE_COLUMNS: [&str; 8] = [
    "episode",
    "phi_size",
    "residual_median",
    "R",
    "admissions",
    "falsifications",
    "inner_steps",
    "entropy_proxy",
];

impl ReportSink<BufWriter<File>> {
    pub fn in_dir(dir: &Path) -> Result<Self, CliError> {
        Self::new(create(&dir.join("reports.ndjson"))?, create(&dir.join("aggregate.csv"))?)
    }
}

impl<W: Write> ReportSink<W> {
    pub fn new(ndjson: W, aggregate: W) -> Result<Self, CliError> {
        let mut aggregate = csv::Writer::from_writer(aggregate);
        aggregate.write_record(AGGREGATE_COLUMNS)?;
        Ok(Self { ndjson, aggregate })
    }

    pub fn push(&mut self, r: &EpisodeReport) -> Result<(), CliError> {
        serde_json::to_writer(&mut self.ndjson, r)?;
        writeln!(self.ndjson).map_err(runtime)?;
        self.aggregate.write_record([
            r.episode.to_string(),
            r.phi_size_after.to_string(),
            r.residual_median.to_string(),
            r.residual_boundary_norm.to_string(),
            r.admitted.len().to_string(),
            r.falsified.len().to_string(),
            r.inner_steps_used.to_string(),
            r.entropy_proxy.to_string(),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.ndjson.flush().map_err(runtime)?;
        self.aggregate.flush().map_err(runtime)?;
        Ok(())
    }
}

fn runtime(e: io::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(CliError::io("cannot write", path))
}

/// Loads a snapshot; a missing file means an empty library.
pub fn load_library(path: &Path, anchor_space: u64) -> Result<CycleLibrary, CliError> {
    if !path.exists() {
        return Ok(CycleLibrary::new(anchor_space));
    }
    serde_json::from_reader(open(path)?).map_err(|e| CliError::parse(path, e.line() as u64, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use mai_core::persistence::{build_vr, reduce};
    use mai_core::tasks::gen_t1;

    #[test]
    fn diagram_csv_marks_infinite_bars() {
        let pts = vec![vec![0.0], vec![1.0]];
        let d = reduce(&build_vr(&pts, 1, 2.0).unwrap());
        let bars: Vec<&Bar> = d.of_dim(0).collect();
        let mut buf = Vec::new();
        write_diagram(&mut buf, &bars, false).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "dim,birth,death,lifetime\n0,0,1,1\n0,0,inf,inf\n");
    }

    #[test]
    fn episode_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ep.csv");
        let ep = gen_t1(Shape::Figure8, 33, 0.01, true, 5).unwrap();
        write_episode(&path, &ep, 5).unwrap();
        let (back, header) = read_episode(&path).unwrap();
        assert_eq!(header.steps, 33);
        assert_eq!(back.observations, ep.observations);
        assert_eq!(back.loop_class, Shape::Figure8);
    }

    #[test]
    fn aggregate_header() {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        ReportSink::new(&mut a, &mut b).unwrap().finish().unwrap();
        assert!(a.is_empty());
        assert_eq!(
            String::from_utf8(b).unwrap().trim(),
            "episode,phi_size,residual_median,R,admissions,falsifications,inner_steps,entropy_proxy"
        );
    }

    #[test]
    fn library_with_essential_cycle_round_trips() {
        use mai_core::engine::MAIState;
        use mai_core::eval::{run_stream, RunSpec};
        let mut spec = RunSpec::t1(Shape::Circle);
        spec.stream.epochs = 1;
        let (state, _): (MAIState, _) = run_stream(&spec, 1).unwrap();
        assert!(state.library.records().iter().any(|r| r.lifetime.is_infinite()));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lib.json");
        write_json(&p, &state.library).unwrap();
        assert_eq!(load_library(&p, 0).unwrap(), state.library);
        assert!(load_library(&dir.path().join("absent.json"), 4).unwrap().is_empty());
    }

    #[test]
    fn points_with_header_and_bad_cell() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        fs::write(&p, "x,y\n0,0\n1,0\n").unwrap();
        assert_eq!(read_points(&p).unwrap().len(), 2);
        fs::write(&p, "0,0\n1,zz\n").unwrap();
        assert!(matches!(read_points(&p), Err(CliError::Parse { line: 2, .. })));
    }
}
