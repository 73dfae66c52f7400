//! Dataset-level stages: preprocessing, spectra, control charts, ROI search
//! and registration diagnostics. Each stage reads the dataset or the files
//! written by earlier stages under `output_dir` and writes its own.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

pub use config::{
    DiagnoseConfig, KChoice, Phase1Config, Phase2Config, PreprocessConfig, RoiConfig, RunConfig, SimulateConfig, SimulateKind,
    SpcConfig, SpectrumConfig,
};

use crate::diagnostics::{icp_register, initial_align, localize, write_transform, CorrespondenceSet, DiagnosticsError, RigidTransform};
use crate::fem::{compute_spectrum, read_spectra_csv, write_spectra_csv, BoundaryCondition, FemError};
use crate::mesh::io::{encode_mesh, parse_mesh};
use crate::mesh::{load_mesh, save_mesh, validate_and_repair, write_deviation_ply, MeshError, MeshFormat, RepairReport};
use crate::remesh::isotropic_remesh;
use crate::roi::{find_roi, roi_report, RoiError};
use crate::select::{default_k_values, scree_curve, write_scree_csv, SelectError};
use crate::spc::{
    estimate_changepoint, phase1_test, phase2_chart, write_phase1_csv, write_phase1_summary, write_phase2_csv, Phase, SpcError,
    SpectraSeries,
};
use crate::svg::LineChart;
use crate::synth::{add_bump, add_noise, icosphere, spectra_stream, NoiseSpec, SynthError};
use crate::{Mesh, Vec3};

pub const MANIFEST: &str = "manifest.csv";
pub const PROCESSED_DIR: &str = "processed";
pub const SPECTRA: &str = "spectra.csv";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("missing input {}: {hint}", path.display())]
    MissingInput { path: PathBuf, hint: &'static str },
    #[error("preprocessing halted; failing parts:\n{}", offenders.iter().map(|(p, e)| format!("  {p}: {e}")).collect::<Vec<_>>().join("\n"))]
    Halted { offenders: Vec<(String, String)> },
    #[error("part {part}: {msg}")]
    Part { part: String, msg: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Spc(#[from] SpcError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Roi(#[from] RoiError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok,
    /// Out-of-control signal.
    Alarm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub status: Status,
    pub outputs: Vec<PathBuf>,
    /// Human-readable summary, also written to the stage's report file
    /// where it has one.
    pub summary: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn require(path: &Path, hint: &'static str) -> Result<(), PipelineError> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::MissingInput { path: path.to_path_buf(), hint })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn splitmix(seed: u64, i: u64) -> u64 {
    let mut z = seed.wrapping_add(i.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn read_mesh(path: &Path) -> Result<Mesh, PipelineError> {
    require(path, "mesh file")?;
    let fmt = MeshFormat::from_path(path).ok_or_else(|| PipelineError::Config(format!("{}: unknown mesh extension", path.display())))?;
    Ok(load_mesh(path, fmt)?)
}

/// Mesh files of the dataset directory in time order (byte-wise filename
/// order).
pub fn dataset_files(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    require(dir, "dataset directory")?;
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && MeshFormat::from_path(p).is_some())
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    if files.is_empty() {
        return Err(PipelineError::MissingInput { path: dir.to_path_buf(), hint: "no .off/.ply/.obj/.stl files in dataset directory" });
    }
    Ok(files)
}

fn part_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub part_id: String,
    pub source: String,
    pub source_sha256: String,
    pub input_vertices: usize,
    pub input_faces: usize,
    pub repair: RepairReport,
    pub output_vertices: usize,
    pub output_faces: usize,
    pub output_sha256: String,
}

const MANIFEST_HEADER: [&str; 15] = [
    "part_id",
    "source",
    "source_sha256",
    "input_vertices",
    "input_faces",
    "cropped_faces",
    "merged_vertices",
    "degenerate_faces",
    "duplicate_faces",
    "removed_component_faces",
    "unreferenced_vertices",
    "output_vertices",
    "output_faces",
    "output_file",
    "output_sha256",
];

fn processed_path(cfg: &RunConfig, id: &str) -> PathBuf {
    cfg.output_dir.join(PROCESSED_DIR).join(format!("{id}.ply"))
}

fn preprocess_one(cfg: &RunConfig, path: &Path) -> Result<(ManifestEntry, Vec<u8>), String> {
    let bytes = fs::read(path).map_err(|e| e.to_string())?;
    let fmt = MeshFormat::from_path(path).expect("filtered by extension");
    let raw: Mesh = parse_mesh(&bytes, fmt).map_err(|e| e.to_string())?;
    let (repaired, report) = validate_and_repair(&raw, &cfg.preprocess.repair).map_err(|e| e.to_string())?;
    let mesh = if cfg.preprocess.remesh {
        isotropic_remesh(&repaired, &cfg.preprocess.remesh_params()).map_err(|e| e.to_string())?
    } else {
        repaired
    };
    mesh.validate().map_err(|e| e.to_string())?;
    let out = encode_mesh(&mesh, MeshFormat::Ply);
    let entry = ManifestEntry {
        part_id: part_id(path),
        source: path.file_name().unwrap().to_string_lossy().into_owned(),
        source_sha256: sha256_hex(&bytes),
        input_vertices: raw.num_vertices(),
        input_faces: raw.num_faces(),
        repair: report,
        output_vertices: mesh.num_vertices(),
        output_faces: mesh.num_faces(),
        output_sha256: sha256_hex(&out),
    };
    Ok((entry, out))
}

/// Validates, repairs and remeshes every dataset mesh; writes
/// `processed/<part>.ply` and the manifest. Nothing is written when any part
/// fails.
pub fn run_preprocess(cfg: &RunConfig) -> Result<StageReport, PipelineError> {
    cfg.validate()?;
    let files = dataset_files(&cfg.dataset_dir)?;
    let mut ids: Vec<String> = files.iter().map(|p| part_id(p)).collect();
    ids.sort();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(PipelineError::Config(format!("two dataset files share the part id '{}'", w[0])));
    }
    let results: Vec<_> = files.par_iter().map(|p| preprocess_one(cfg, p)).collect();
    let offenders: Vec<(String, String)> = files
        .iter()
        .zip(&results)
        .filter_map(|(p, r)| r.as_ref().err().map(|e| (p.file_name().unwrap().to_string_lossy().into_owned(), e.clone())))
        .collect();
    if !offenders.is_empty() {
        return Err(PipelineError::Halted { offenders });
    }
    let mut outputs = Vec::new();
    let mut entries = Vec::new();
    for (entry, bytes) in results.into_iter().map(Result::unwrap) {
        let path = processed_path(cfg, &entry.part_id);
        write_file(&path, bytes)?;
        outputs.push(path);
        entries.push(entry);
    }
    let mpath = cfg.output_dir.join(MANIFEST);
    let mut w = csv::Writer::from_writer(create(&mpath)?);
    let csv_err = |e: csv::Error| PipelineError::Config(format!("{}: {e}", mpath.display()));
    w.write_record(MANIFEST_HEADER).map_err(csv_err)?;
    for e in &entries {
        let r = &e.repair;
        let file = format!("{PROCESSED_DIR}/{}.ply", e.part_id);
        let nums = [
            e.input_vertices,
            e.input_faces,
            r.cropped_faces,
            r.merged_vertices,
            r.degenerate_faces,
            r.duplicate_faces,
            r.removed_component_faces,
            r.unreferenced_vertices,
            e.output_vertices,
            e.output_faces,
        ]
        .map(|n| n.to_string());
        let mut rec = vec![e.part_id.clone(), e.source.clone(), e.source_sha256.clone()];
        rec.extend(nums);
        rec.push(file);
        rec.push(e.output_sha256.clone());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(&mpath))?;
    outputs.push(mpath);
    let summary = format!("preprocessed {} parts into {}", entries.len(), cfg.output_dir.join(PROCESSED_DIR).display());
    Ok(StageReport { status: Status::Ok, outputs, summary })
}

/// Part ids in time order, from the manifest.
pub fn manifest_parts(cfg: &RunConfig) -> Result<Vec<String>, PipelineError> {
    let path = cfg.output_dir.join(MANIFEST);
    require(&path, "run the preprocess stage first")?;
    let mut rd = csv::Reader::from_path(&path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    rd.records()
        .map(|r| {
            r.map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
                .map(|r| r.get(0).unwrap_or_default().to_string())
        })
        .collect()
}

/// Picks `k` from the reconstruction curve of the reference mesh; writes
/// `scree.csv` and `scree.svg`.
pub fn run_select_k(cfg: &RunConfig) -> Result<(usize, StageReport), PipelineError> {
    let path = match &cfg.spectrum.reference_mesh {
        Some(p) => p.clone(),
        None => {
            let parts = manifest_parts(cfg)?;
            let first = parts.first().ok_or_else(|| PipelineError::Config("manifest lists no parts".into()))?;
            processed_path(cfg, first)
        }
    };
    let mesh = read_mesh(&path)?;
    let k_values = default_k_values(mesh.num_vertices());
    let k_top = k_values.last().copied().unwrap_or(0);
    let spec = compute_spectrum(&mesh, k_top, BoundaryCondition::Neumann, &cfg.spectrum.eigen)?;
    let vectors = spec.eigenvectors.as_deref().unwrap_or_default();
    let curve = scree_curve(mesh.vertices(), vectors, &k_values)?;
    let csv_path = cfg.output_dir.join("scree.csv");
    write_scree_csv(create(&csv_path)?, &curve).map_err(io_err(&csv_path))?;
    let sel = curve.k_values.iter().position(|&k| k == curve.selected_k);
    let chart = LineChart {
        title: format!("Reconstruction error, selected k = {}", curve.selected_k),
        x_label: "k".into(),
        y_label: "||P_k - P_0||_F".into(),
        points: curve.k_values.iter().zip(&curve.distances).map(|(&k, &d)| (k as f64, d)).collect(),
        limit: None,
        marker: sel.map(|i| (curve.k_values[i] as f64, curve.distances[i])),
    };
    let svg_path = cfg.output_dir.join("scree.svg");
    write_file(&svg_path, chart.render())?;
    log::info!("selected k = {} from {}", curve.selected_k, path.display());
    let summary = format!("selected k = {} (reference mesh {})", curve.selected_k, path.display());
    Ok((curve.selected_k, StageReport { status: Status::Ok, outputs: vec![csv_path, svg_path], summary }))
}

/// Lowest `k` Neumann eigenvalues of every processed part, one CSV row per
/// part in time order.
pub fn run_spectra(cfg: &RunConfig) -> Result<StageReport, PipelineError> {
    cfg.validate()?;
    let parts = manifest_parts(cfg)?;
    let mut outputs = Vec::new();
    let k = match cfg.spectrum.k {
        KChoice::Fixed(k) => k,
        KChoice::Auto => {
            let (k, rep) = run_select_k(cfg)?;
            outputs.extend(rep.outputs);
            k
        }
    };
    let rows: Vec<Vec<f64>> = parts
        .par_iter()
        .map(|id| {
            let fail = |msg: String| PipelineError::Part { part: id.clone(), msg };
            let mesh = read_mesh(&processed_path(cfg, id)).map_err(|e| fail(e.to_string()))?;
            let spec = compute_spectrum(&mesh, k, BoundaryCondition::Neumann, &cfg.spectrum.eigen).map_err(|e| fail(e.to_string()))?;
            Ok(spec.eigenvalues)
        })
        .collect::<Result<_, PipelineError>>()?;
    let path = cfg.output_dir.join(SPECTRA);
    write_spectra_csv(create(&path)?, &parts, &rows)?;
    outputs.push(path);
    let summary = format!("wrote {} spectra with k = {k}", rows.len());
    Ok(StageReport { status: Status::Ok, outputs, summary })
}

/// Monitored variables from the spectra CSV, and the eigenvalue index of
/// variable 1 minus one.
fn load_series(cfg: &RunConfig) -> Result<(SpectraSeries, usize), PipelineError> {
    let path = cfg.output_dir.join(SPECTRA);
    require(&path, "run the spectrum stage (or simulate --kind spectra) first")?;
    let table = read_spectra_csv(fs::File::open(&path).map_err(io_err(&path))?)?;
    let skip = usize::from(cfg.spc.skip_zero_eigenvalue);
    let rows = table.rows.iter().map(|r| r.get(skip..).unwrap_or_default().to_vec()).collect();
    Ok((SpectraSeries::new(rows, table.part_ids, Phase::Reference)?, skip))
}

fn var_name(j: usize, offset: usize) -> String {
    format!("X_{j} (lambda_{})", j + offset)
}

/// Retrospective changepoint test on the first `m0` parts.
pub fn run_phase1(cfg: &RunConfig) -> Result<StageReport, PipelineError> {
    cfg.validate()?;
    let (all, offset) = load_series(cfg)?;
    let m = cfg.spc.m0.min(all.m());
    if m < cfg.spc.m0 {
        log::warn!("only {} parts available; Phase I uses all of them instead of m0 = {}", all.m(), cfg.spc.m0);
    }
    let series = all.slice(0, m, Phase::Reference)?;
    let r = phase1_test(&series, cfg.phase1.n_perm, cfg.phase1.alpha, cfg.seed)?;
    let dir = &cfg.output_dir;
    let (csv_path, sum_path, svg_path, rep_path) =
        (dir.join("phase1.csv"), dir.join("phase1_summary.csv"), dir.join("phase1.svg"), dir.join("phase1_report.txt"));
    write_phase1_csv(create(&csv_path)?, &r).map_err(io_err(&csv_path))?;
    write_phase1_summary(create(&sum_path)?, &r).map_err(io_err(&sum_path))?;
    let chart = LineChart {
        title: format!("Phase I permutation test, p = {:.4}", r.p_value),
        x_label: "split time".into(),
        y_label: "statistic".into(),
        points: r.statistic_trace.iter().map(|&(t, s)| (t as f64, s)).collect(),
        limit: None,
        marker: r.changepoint.and_then(|c| r.statistic_trace.iter().find(|x| x.0 == c)).map(|&(t, s)| (t as f64, s)),
    };
    write_file(&svg_path, chart.render())?;
    let alarm = r.p_value < r.alpha;
    let mut s = String::new();
    let _ = writeln!(s, "phase I on {} parts x {} variables", series.m(), series.p());
    let _ = writeln!(s, "p_value {:.6} (alpha {}, {} permutations)", r.p_value, r.alpha, r.n_perm);
    if alarm {
        let _ = writeln!(s, "out of control");
        if let Some(c) = r.changepoint {
            let _ = writeln!(s, "changepoint: time {c} (part {})", series.part_ids()[c - 1]);
        }
        for f in &r.flagged {
            let _ = writeln!(s, "flagged {}: score {:.4} > {:.4}", var_name(f.index, offset), f.score, f.threshold);
        }
    } else {
        let _ = writeln!(s, "in control");
    }
    write_file(&rep_path, &s)?;
    Ok(StageReport {
        status: if alarm { Status::Alarm } else { Status::Ok },
        outputs: vec![csv_path, sum_path, svg_path, rep_path],
        summary: s,
    })
}

/// Online chart of parts `m0 + 1..` against the first `m0`.
pub fn run_phase2(cfg: &RunConfig) -> Result<StageReport, PipelineError> {
    cfg.validate()?;
    let (all, offset) = load_series(cfg)?;
    let m0 = cfg.spc.m0;
    if all.m() <= m0 {
        return Err(PipelineError::Config(format!("phase II needs more than m0 = {m0} parts, found {}", all.m())));
    }
    let reference = all.slice(0, m0, Phase::Reference)?;
    let stream = all.slice(m0, all.m(), Phase::Monitoring)?;
    let r = phase2_chart(&reference, &stream, &cfg.phase2_options())?;
    let dir = &cfg.output_dir;
    let (csv_path, svg_path, rep_path) = (dir.join("phase2.csv"), dir.join("phase2.svg"), dir.join("phase2_report.txt"));
    write_phase2_csv(create(&csv_path)?, &r).map_err(io_err(&csv_path))?;
    let chart = LineChart {
        title: format!("Rank EWMA chart, lambda = {}", r.ewma_lambda),
        x_label: "t".into(),
        y_label: "Q_t".into(),
        points: r.q.iter().enumerate().map(|(i, &q)| ((i + 1) as f64, q)).collect(),
        limit: Some((r.h, format!("h = {:.3}", r.h))),
        marker: r.alarm_time.map(|t| (t as f64, r.q[t - 1])),
    };
    write_file(&svg_path, chart.render())?;
    let mut s = String::new();
    let _ = writeln!(s, "phase II: reference {} parts, monitoring {} parts, {} variables", reference.m(), stream.m(), stream.p());
    let _ = writeln!(s, "variables X_1..X_{} = lambda_{}..lambda_{}", stream.p(), 1 + offset, stream.p() + offset);
    let _ = writeln!(s, "h {:.6} (target ARL0 {}, simulated ARL0 {:.1})", r.h, r.target_arl0, r.calibrated_arl0);
    match r.alarm_time {
        Some(t) => {
            let _ = writeln!(s, "alarm at t = {t} (part {})", stream.part_ids()[t - 1]);
            let c = estimate_changepoint(&reference, &stream, t)?;
            let _ = writeln!(s, "estimated changepoint t = {c} (part {})", stream.part_ids()[c - 1]);
        }
        None => {
            let _ = writeln!(s, "no alarm");
        }
    }
    write_file(&rep_path, &s)?;
    Ok(StageReport {
        status: if r.alarm_time.is_some() { Status::Alarm } else { Status::Ok },
        outputs: vec![csv_path, svg_path, rep_path],
        summary: s,
    })
}

fn pair_paths(part: &Option<PathBuf>, cad: &Option<PathBuf>, stage: &str) -> Result<(PathBuf, PathBuf), PipelineError> {
    match (part, cad) {
        (Some(p), Some(c)) => Ok((p.clone(), c.clone())),
        _ => Err(PipelineError::Config(format!("{stage} needs both a part and a CAD mesh"))),
    }
}

/// Recursive nodal bisection of a part against its CAD model.
pub fn run_roi(cfg: &RunConfig) -> Result<StageReport, PipelineError> {
    cfg.validate()?;
    let (part_path, cad_path) = pair_paths(&cfg.roi.part, &cfg.roi.cad, "roi")?;
    let part = read_mesh(&part_path)?;
    let cad = read_mesh(&cad_path)?;
    let trace = find_roi(&part, &cad, &cfg.roi.options)?;
    let dir = &cfg.output_dir;
    let (rep_path, roi_path, cad_roi_path, idx_path) =
        (dir.join("roi_report.txt"), dir.join("roi.ply"), dir.join("cad_roi.ply"), dir.join("roi_vertices.csv"));
    let report = roi_report(&trace);
    write_file(&rep_path, &report)?;
    write_file(&roi_path, encode_mesh(&trace.roi, MeshFormat::Ply))?;
    write_file(&cad_roi_path, encode_mesh(&trace.cad_roi, MeshFormat::Ply))?;
    let mut idx = String::from("roi_vertex,part_vertex\n");
    for (i, p) in trace.roi_parent.iter().enumerate() {
        let _ = writeln!(idx, "{i},{p}");
    }
    write_file(&idx_path, idx)?;
    Ok(StageReport { status: Status::Ok, outputs: vec![rep_path, roi_path, cad_roi_path, idx_path], summary: report })
}

/// Registers the CAD mesh onto the part and maps the remaining deviation.
pub fn run_diagnose(cfg: &RunConfig) -> Result<StageReport, PipelineError> {
    cfg.validate()?;
    let (part_path, cad_path) = pair_paths(&cfg.diagnose.part, &cfg.diagnose.cad, "diagnose")?;
    let part = read_mesh(&part_path)?;
    let cad = read_mesh(&cad_path)?;
    let init = match &cfg.diagnose.correspondences {
        Some(p) => {
            require(p, "correspondence file")?;
            initial_align(&CorrespondenceSet::load(p)?)?
        }
        None => RigidTransform::identity(),
    };
    let icp = icp_register(&cad, &part, &init, &cfg.diagnose.icp)?;
    let (moved, dev) = localize(&cad, &part, &icp.transform);
    let dir = &cfg.output_dir;
    let (tr_path, rms_path, dev_path, rep_path) =
        (dir.join("transform.txt"), dir.join("icp_rms.csv"), dir.join("deviation.ply"), dir.join("diagnose_report.txt"));
    write_transform(create(&tr_path)?, &icp.transform).map_err(io_err(&tr_path))?;
    let mut rms = String::from("iteration,rms\n");
    for (i, r) in icp.rms_history.iter().enumerate() {
        let _ = writeln!(rms, "{i},{r}");
    }
    write_file(&rms_path, rms)?;
    if let Some(d) = dev_path.parent() {
        fs::create_dir_all(d).map_err(io_err(d))?;
    }
    write_deviation_ply(&dev_path, &moved, &dev.values)?;
    let diag = part.bbox_diag();
    let mut s = String::new();
    let _ = writeln!(s, "icp: {} iterations, converged {}", icp.iterations, icp.converged);
    let _ = writeln!(s, "final rms {:.6e} ({:.3e} x bbox diagonal)", icp.final_rms(), icp.final_rms() / diag);
    if icp.local_minimum {
        let _ = writeln!(s, "warning: local minimum suspected; supply at least 3 correspondences");
    }
    let _ = writeln!(s, "deviation: median {:.4e}, p95 {:.4e}, max {:.4e}", dev.median(), dev.quantile(0.95), dev.max());
    write_file(&rep_path, &s)?;
    Ok(StageReport { status: Status::Ok, outputs: vec![tr_path, rms_path, dev_path, rep_path], summary: s })
}

/// Writes a synthetic dataset: noisy icospheres into `dataset_dir` (bumped
/// from `shift_time` on) and the clean sphere as `output_dir/cad.<ext>`; or
/// a Gaussian stream as `output_dir/spectra.csv` with a leading zero column
/// standing in for `lambda_1`.
pub fn run_simulate(cfg: &RunConfig) -> Result<StageReport, PipelineError> {
    let s = &cfg.simulate;
    if s.parts == 0 {
        return Err(PipelineError::Config("simulate.parts must be positive".into()));
    }
    let ids: Vec<String> = (1..=s.parts).map(|i| format!("part_{i:03}")).collect();
    match s.kind {
        SimulateKind::Spectra => {
            let shift = match s.shift.len() {
                1 => vec![s.shift[0]; s.p],
                n if n == s.p => s.shift.clone(),
                n => return Err(PipelineError::Config(format!("simulate.shift has {n} entries for p = {}", s.p))),
            };
            let series = spectra_stream(s.p, s.parts, s.shift_time, &shift, cfg.seed)?;
            let rows: Vec<Vec<f64>> = series.rows().iter().map(|r| std::iter::once(0.0).chain(r.iter().copied()).collect()).collect();
            let path = cfg.output_dir.join(SPECTRA);
            write_spectra_csv(create(&path)?, &ids, &rows)?;
            Ok(StageReport { status: Status::Ok, outputs: vec![path], summary: format!("simulated {} x {} spectra stream", s.parts, s.p) })
        }
        SimulateKind::Meshes => {
            let sphere: Mesh = icosphere(s.subdivisions, s.radius)?;
            let center = Vec3::new(s.bump_center[0], s.bump_center[1], s.bump_center[2]);
            let meshes: Vec<Mesh> = (1..=s.parts)
                .into_par_iter()
                .map(|i| {
                    let base = match s.shift_time {
                        Some(t) if i >= t => add_bump(&sphere, center, s.bump_radius, s.bump_height)?,
                        _ => sphere.clone(),
                    };
                    Ok(add_noise(&base, NoiseSpec { sigma: s.noise_sigma, seed: splitmix(cfg.seed, i as u64) })?)
                })
                .collect::<Result<_, PipelineError>>()?;
            let ext = s.format.extension();
            let mut outputs = Vec::new();
            fs::create_dir_all(&cfg.dataset_dir).map_err(io_err(&cfg.dataset_dir))?;
            for (id, m) in ids.iter().zip(&meshes) {
                let path = cfg.dataset_dir.join(format!("{id}.{ext}"));
                save_mesh(&path, m, s.format)?;
                outputs.push(path);
            }
            let cad_path = cfg.output_dir.join(format!("cad.{ext}"));
            fs::create_dir_all(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
            save_mesh(&cad_path, &sphere, s.format)?;
            outputs.push(cad_path);
            let summary = format!("simulated {} parts ({} vertices each) in {}", s.parts, sphere.num_vertices(), cfg.dataset_dir.display());
            Ok(StageReport { status: Status::Ok, outputs, summary })
        }
    }
}

/// Preprocess, spectra, Phase I and (when parts remain after the reference
/// sample) Phase II; the status is the worst of the charts.
pub fn run_all(cfg: &RunConfig) -> Result<StageReport, PipelineError> {
    let mut reports = vec![run_preprocess(cfg)?, run_spectra(cfg)?, run_phase1(cfg)?];
    if manifest_parts(cfg)?.len() > cfg.spc.m0 {
        reports.push(run_phase2(cfg)?);
    }
    let status = reports.iter().map(|r| r.status).max().unwrap_or(Status::Ok);
    let outputs = reports.iter().flat_map(|r| r.outputs.iter().cloned()).collect();
    let summary = reports.iter().map(|r| r.summary.trim_end()).collect::<Vec<_>>().join("\n");
    Ok(StageReport { status, outputs, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_spreads_indices() {
        let a: Vec<u64> = (0..4).map(|i| splitmix(1, i)).collect();
        let mut b = a.clone();
        b.dedup();
        assert_eq!(a.len(), b.len());
        assert_ne!(splitmix(1, 0), splitmix(2, 0));
    }

    #[test]
    fn var_names_follow_offset() {
        assert_eq!(var_name(5, 1), "X_5 (lambda_6)");
        assert_eq!(var_name(5, 0), "X_5 (lambda_5)");
    }
}
