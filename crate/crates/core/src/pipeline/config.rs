use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::PipelineError;
use crate::diagnostics::IcpOptions;
use crate::fem::EigenOptions;
use crate::mesh::{MeshFormat, RepairPolicy};
use crate::remesh::RemeshParams;
use crate::roi::RoiOptions;
use crate::spc::{Calibration, Phase2Options};

/// Number of monitored eigenvalues: fixed, or chosen from the scree curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    Auto,
    Fixed(usize),
}

impl Default for KChoice {
    fn default() -> Self {
        Self::Fixed(15)
    }
}

impl fmt::Display for KChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl std::str::FromStr for KChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim().eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        s.trim().parse().map(Self::Fixed).map_err(|_| format!("k must be an integer or \"auto\", got '{s}'"))
    }
}

impl Serialize for KChoice {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Auto => s.serialize_str("auto"),
            Self::Fixed(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for KChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(k) if k >= 0 => Ok(Self::Fixed(k as usize)),
            Raw::Int(k) => Err(serde::de::Error::custom(format!("k = {k} is negative"))),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub repair: RepairPolicy,
    pub remesh: bool,
    pub target_vertices: usize,
    pub remesh_iterations: usize,
    pub smoothing_weight: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        let r = RemeshParams::default();
        Self {
            repair: RepairPolicy::default(),
            remesh: true,
            target_vertices: r.target_vertex_count,
            remesh_iterations: r.iterations,
            smoothing_weight: r.smoothing_weight,
        }
    }
}

impl PreprocessConfig {
    pub fn remesh_params(&self) -> RemeshParams {
        RemeshParams { target_vertex_count: self.target_vertices, iterations: self.remesh_iterations, smoothing_weight: self.smoothing_weight }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub k: KChoice,
    /// Mesh whose reconstruction curve picks `k` when `k = "auto"`; the
    /// first processed part when unset.
    pub reference_mesh: Option<PathBuf>,
    pub eigen: EigenOptions,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { k: KChoice::default(), reference_mesh: None, eigen: EigenOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpcConfig {
    /// Leading rows that form the reference sample.
    pub m0: usize,
    /// Drop `lambda_1` (zero on every closed or Neumann mesh) so that
    /// variable `X_j` is `lambda_{j+1}`.
    pub skip_zero_eigenvalue: bool,
}

impl Default for SpcConfig {
    fn default() -> Self {
        Self { m0: 20, skip_zero_eigenvalue: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Phase1Config {
    pub n_perm: usize,
    pub alpha: f64,
}

impl Default for Phase1Config {
    fn default() -> Self {
        Self { n_perm: 999, alpha: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Phase2Config {
    pub lambda: f64,
    pub arl0: f64,
    pub n_cal: usize,
    pub calibration: Calibration,
    pub horizon_factor: f64,
}

impl Default for Phase2Config {
    fn default() -> Self {
        let o = Phase2Options::default();
        Self { lambda: o.ewma_lambda, arl0: o.target_arl0, n_cal: o.n_cal, calibration: o.calibration, horizon_factor: o.horizon_factor }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RoiConfig {
    pub part: Option<PathBuf>,
    pub cad: Option<PathBuf>,
    #[serde(flatten)]
    pub options: RoiOptions,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnoseConfig {
    pub part: Option<PathBuf>,
    pub cad: Option<PathBuf>,
    pub correspondences: Option<PathBuf>,
    #[serde(flatten)]
    pub icp: IcpOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimulateKind {
    /// Noisy icospheres, bumped from `shift_time` on, plus a clean CAD mesh.
    #[default]
    Meshes,
    /// A Gaussian spectra stream written straight to the spectra CSV.
    Spectra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub kind: SimulateKind,
    pub parts: usize,
    /// 1-based index of the first shifted part.
    pub shift_time: Option<usize>,
    pub subdivisions: u32,
    pub radius: f64,
    pub noise_sigma: f64,
    pub bump_center: [f64; 3],
    pub bump_radius: f64,
    pub bump_height: f64,
    pub format: MeshFormat,
    /// Variables of a simulated spectra stream.
    pub p: usize,
    /// Added to every variable of shifted rows; a single value applies to
    /// all variables.
    pub shift: Vec<f64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            kind: SimulateKind::Meshes,
            parts: 20,
            shift_time: None,
            subdivisions: 4,
            radius: 1.0,
            noise_sigma: 0.005,
            bump_center: [0.0, 0.0, 1.0],
            bump_radius: 0.3,
            bump_height: 0.1,
            format: MeshFormat::Ply,
            p: 14,
            shift: vec![3.0],
        }
    }
}

/// Everything one pipeline run needs. Relative paths in a config file are
/// taken relative to that file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_dir: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub preprocess: PreprocessConfig,
    pub spectrum: SpectrumConfig,
    pub spc: SpcConfig,
    pub phase1: Phase1Config,
    pub phase2: Phase2Config,
    pub roi: RoiConfig,
    pub diagnose: DiagnoseConfig,
    pub simulate: SimulateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_dir: PathBuf::from("dataset"),
            output_dir: PathBuf::from("out"),
            seed: 0x5eed,
            preprocess: PreprocessConfig::default(),
            spectrum: SpectrumConfig::default(),
            spc: SpcConfig::default(),
            phase1: Phase1Config::default(),
            phase2: Phase2Config::default(),
            roi: RoiConfig::default(),
            diagnose: DiagnoseConfig::default(),
            simulate: SimulateConfig::default(),
        }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads a TOML config and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.dataset_dir, &mut cfg.output_dir] {
            rebase(base, p);
        }
        for p in [
            &mut cfg.spectrum.reference_mesh,
            &mut cfg.roi.part,
            &mut cfg.roi.cad,
            &mut cfg.diagnose.part,
            &mut cfg.diagnose.cad,
            &mut cfg.diagnose.correspondences,
        ]
        .into_iter()
        .flatten()
        {
            rebase(base, p);
        }
        Ok(cfg)
    }

    /// Value checks that do not touch the file system.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if let KChoice::Fixed(k) = self.spectrum.k {
            if !(2..=200).contains(&k) {
                return bad(format!("k = {k} outside [2, 200]"));
            }
        }
        if self.preprocess.remesh {
            self.preprocess.remesh_params().validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        if self.spc.m0 < 2 {
            return bad(format!("m0 = {} must be at least 2", self.spc.m0));
        }
        if !(self.phase1.alpha > 0.0 && self.phase1.alpha < 1.0) {
            return bad(format!("alpha = {} outside (0, 1)", self.phase1.alpha));
        }
        if self.phase1.n_perm == 0 {
            return bad("n_perm must be positive".into());
        }
        self.roi.options.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn phase2_options(&self) -> Phase2Options {
        let p = &self.phase2;
        Phase2Options {
            ewma_lambda: p.lambda,
            target_arl0: p.arl0,
            n_cal: p.n_cal,
            seed: self.seed ^ 0x9e37_79b9_7f4a_7c15,
            calibration: p.calibration,
            horizon_factor: p.horizon_factor,
        }
    }
}
