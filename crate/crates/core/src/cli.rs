//! Batch front-end: TOML config in, JSON/CSV/Matrix Market artifacts and a
//! digest manifest out.
//!
//! ```toml
//! schema_version = 1
//! seed = 7
//! output_dir = "out"
//! analyses = ["check-field", "evolve", "verify"]
//! shift = 1.0
//!
//! [field]
//! kind = "polynomial"          # terms of the potential V, W = ∇V/4
//! terms = [{ exponents = [2], coeff = 2.0 }]
//! # kind = "tabulated"; path = "w.txt"
//!
//! [grid]
//! dim = 1
//! half_width = 6.0
//! points = 64
//! bulk_width = 3
//!
//! [time]
//! horizon = 0.5
//! steps = 128
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use faer::c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::field::{self, AssumptionReport, PolynomialPotential, PotentialTerm, SampleBox, ScalarField, TabulatedField, VectorField};
use crate::grid::GridSpec;
use crate::lindblad::{self, LindbladSystem, DEFAULT_SHIFT};
use crate::linalg;
use crate::semigroup::{self, ChoiReport, ClassicalComparison, MasterOracle, Observable, PicardOptions, TimeGrid, CHOI_CAP};
use crate::verifier::{self, CFReport, EntryStatus, PencilEstimate, Subspace, Verdict};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const CONSERVATIVITY_TOL: f64 = 1e-8;
pub const MONOTONICITY_TOL: f64 = 1e-10;
pub const MANIFEST: &str = "manifest.json";
const PROBE_VECTORS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    CheckField,
    Assemble,
    Evolve,
    Verify,
    Classical,
    Choi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FieldSpec {
    /// Potential terms; the drift is `W = ∇V/4`.
    Polynomial {
        #[serde(default)]
        dim: Option<usize>,
        terms: Vec<PotentialTerm>,
    },
    /// Plain-text table, see [`TabulatedField::parse`].
    Tabulated {
        #[serde(default)]
        dim: Option<usize>,
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
    #[serde(default = "default_bulk_width")]
    pub bulk_width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub horizon: f64,
    pub steps: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Points per axis for the refinement trend; defaults to `[N, 2N]` when
    /// `2N` fits the dense cap, otherwise `[N]`.
    #[serde(default)]
    pub resolutions: Option<Vec<usize>>,
    #[serde(default = "default_offsets")]
    pub offsets: Vec<f64>,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalConfig {
    /// Variance of the centered Gaussian initial datum.
    #[serde(default = "default_variance")]
    pub variance: f64,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        ClassicalConfig {
            variance: default_variance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChoiConfig {
    #[serde(default = "default_choi_points")]
    pub points: usize,
    #[serde(default = "default_choi_times")]
    pub times: Vec<f64>,
}

impl Default for ChoiConfig {
    fn default() -> Self {
        ChoiConfig {
            points: default_choi_points(),
            times: default_choi_times(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub analyses: BTreeSet<Analysis>,
    #[serde(default = "default_shift")]
    pub shift: f64,
    #[serde(default)]
    pub label: Option<String>,
    pub field: FieldSpec,
    pub grid: GridConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub classical: ClassicalConfig,
    #[serde(default)]
    pub choi: ChoiConfig,
}

fn default_bulk_width() -> usize {
    verifier::DEFAULT_BULK_WIDTH
}
fn default_tol() -> f64 {
    PicardOptions::default().tol
}
fn default_max_iter() -> usize {
    PicardOptions::default().max_iter
}
fn default_offsets() -> Vec<f64> {
    vec![10.0]
}
fn default_epsilons() -> Vec<f64> {
    vec![0.5]
}
fn default_variance() -> f64 {
    0.5
}
fn default_choi_points() -> usize {
    8
}
fn default_choi_times() -> Vec<f64> {
    vec![0.05, 0.1]
}
fn default_shift() -> f64 {
    DEFAULT_SHIFT
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses `path`; relative paths inside are resolved against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        if let FieldSpec::Tabulated { path: p, .. } = &mut cfg.field {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    fn needs_system(&self) -> bool {
        self.analyses.iter().any(|a| *a != Analysis::CheckField)
    }
}

/// Validated inputs, built before anything touches the output directory.
struct Plan {
    grid: GridSpec,
    field: VectorField,
    time: TimeGrid,
    opts: PicardOptions,
    resolutions: Vec<usize>,
    choi_grid: Option<GridSpec>,
}

fn prepare(cfg: &RunConfig) -> Result<Plan> {
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "schema_version {} unsupported (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    if cfg.analyses.is_empty() {
        return Err(Error::Config("no analysis requested".into()));
    }
    if !(cfg.shift > 0.0 && cfg.shift.is_finite()) {
        return Err(Error::Config(format!("shift must be positive, got {}", cfg.shift)));
    }
    let gc = cfg.grid;
    let grid = GridSpec::new(gc.dim, gc.half_width, gc.points, gc.bulk_width)?;
    if cfg.needs_system() {
        grid.check_dense_cap()?;
    }
    let field = build_field(cfg, &grid)?;
    let time = TimeGrid::new(cfg.time.horizon, cfg.time.steps)?;
    if !(cfg.time.tol > 0.0) || cfg.time.max_iter == 0 {
        return Err(Error::Config("time.tol must be positive and time.max_iter at least 1".into()));
    }
    let opts = PicardOptions {
        tol: cfg.time.tol,
        max_iter: cfg.time.max_iter,
        ..PicardOptions::default()
    };

    let resolutions = match &cfg.verify.resolutions {
        Some(r) if r.is_empty() => return Err(Error::Config("verify.resolutions is empty".into())),
        Some(r) => r.clone(),
        None => {
            let mut r = vec![grid.points];
            if grid.with_points(2 * grid.points).and_then(|g| g.check_dense_cap()).is_ok() {
                r.push(2 * grid.points);
            }
            r
        }
    };
    if cfg.analyses.contains(&Analysis::Verify) {
        for &n in &resolutions {
            let g = grid.with_points(n)?;
            g.check_dense_cap()?;
        }
        if cfg.verify.offsets.iter().chain(&cfg.verify.epsilons).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config("verify.offsets and verify.epsilons must be positive".into()));
        }
    }
    if cfg.analyses.contains(&Analysis::Classical) && !(cfg.classical.variance > 0.0 && cfg.classical.variance.is_finite()) {
        return Err(Error::Config("classical.variance must be positive".into()));
    }
    let choi_grid = if cfg.analyses.contains(&Analysis::Choi) {
        let g = grid.with_points(cfg.choi.points)?;
        if g.size() > CHOI_CAP {
            return Err(Error::DimensionCap(format!("Choi grid has M = {} > {CHOI_CAP}", g.size())));
        }
        if cfg.choi.times.is_empty() || cfg.choi.times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Config("choi.times must be a non-empty list of positive times".into()));
        }
        Some(g)
    } else {
        None
    };
    Ok(Plan {
        grid,
        field,
        time,
        opts,
        resolutions,
        choi_grid,
    })
}

fn build_field(cfg: &RunConfig, grid: &GridSpec) -> Result<VectorField> {
    let check_dim = |dim: Option<usize>| match dim {
        Some(d) if d != grid.dim => Err(Error::DimensionMismatch(format!("field has d = {d}, grid has d = {}", grid.dim))),
        _ => Ok(()),
    };
    let field = match &cfg.field {
        FieldSpec::Polynomial { dim, terms } => {
            check_dim(*dim)?;
            let v = PolynomialPotential::new(grid.dim, terms)?;
            let w = field::grad_potential(&v)?;
            match &cfg.label {
                Some(l) => w.with_label(l.as_str()),
                None => w,
            }
        }
        FieldSpec::Tabulated { dim, path } => {
            check_dim(*dim)?;
            if !path.is_file() {
                return Err(Error::Config(format!("field table {} does not exist", path.display())));
            }
            let label = cfg.label.clone().unwrap_or_else(|| format!("tabulated {}", file_name(path)));
            TabulatedField::from_file(grid.dim, path)?.into_field(label)
        }
    };
    Ok(field)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitStatus {
    Success,
    Config,
    Violation,
    Numerical,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Config => 1,
            ExitStatus::Violation => 2,
            ExitStatus::Numerical => 3,
        }
    }
}

/// Exit status for an error raised before or during a run.
pub fn status_of(e: &Error) -> ExitStatus {
    match e {
        Error::Config(_)
        | Error::DimensionCap(_)
        | Error::InvalidGrid(_)
        | Error::InvalidPotential(_)
        | Error::DimensionMismatch(_)
        | Error::MatrixMarket(_)
        | Error::AxisOutOfRange { .. } => ExitStatus::Config,
        _ => ExitStatus::Numerical,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub seed: u64,
    pub analyses: Vec<Analysis>,
    pub status: i32,
    pub violations: Vec<String>,
    pub error: Option<String>,
    pub artifacts: Vec<ArtifactEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblySummary {
    pub field: String,
    pub points: usize,
    pub size: usize,
    pub shift: f64,
    pub form_residual: f64,
    pub form_limit: f64,
    pub shift_exact: bool,
    pub operators: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveSummary {
    pub horizon: f64,
    pub steps: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub max_conservativity_defect: f64,
    pub tolerance: f64,
    pub conservative: bool,
    pub monotonicity_min: f64,
    /// Seeded probes `0 ≤ ⟨u, T_T(I) u⟩ ≤ ‖u‖²`; stores the extreme ratios.
    pub probe_min: f64,
    pub probe_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSummary {
    pub variance: f64,
    pub comparisons: Vec<ClassicalComparison>,
    pub observed_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PencilSummary {
    pub relative: Vec<PencilEstimate>,
    pub commutator: Vec<PencilEstimate>,
}

/// Result of [`run`]: manifest already written to `<output_dir>/manifest.json`.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: ExitStatus,
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
}

struct Writer {
    root: PathBuf,
    entries: Vec<ArtifactEntry>,
}

impl Writer {
    fn record(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let rel = path.strip_prefix(&self.root).unwrap_or(path);
        let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        self.entries.push(ArtifactEntry {
            path: rel,
            sha256: hex::encode(Sha256::digest(&bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.root.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.record(&path)
    }
}

/// Runs the configured analyses. Invalid configs fail with an error before
/// anything is written; later failures still produce a manifest.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let plan = prepare(cfg).map_err(|e| match e {
        Error::Config(_) | Error::DimensionCap(_) => e,
        other => Error::Config(other.to_string()),
    })?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let mut w = Writer {
        root: cfg.output_dir.clone(),
        entries: Vec::new(),
    };
    let mut violations = Vec::new();
    let result = execute(cfg, &plan, &mut w, &mut violations);
    let (status, error) = match result {
        Ok(()) if violations.is_empty() => (ExitStatus::Success, None),
        Ok(()) => (ExitStatus::Violation, None),
        Err(e) => (status_of(&e), Some(e.to_string())),
    };
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        analyses: cfg.analyses.iter().copied().collect(),
        status: status.code(),
        violations,
        error,
        artifacts: w.entries,
    };
    let manifest_path = cfg.output_dir.join(MANIFEST);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(RunOutcome {
        status,
        manifest_path,
        manifest,
    })
}

fn execute(cfg: &RunConfig, plan: &Plan, w: &mut Writer, violations: &mut Vec<String>) -> Result<()> {
    let has = |a: Analysis| cfg.analyses.contains(&a);
    if has(Analysis::CheckField) {
        let report = field::check_all(&plan.field, &SampleBox::from_grid(&plan.grid))?;
        w.json("assumptions.json", &report)?;
    }
    if !cfg.needs_system() {
        return Ok(());
    }

    let sys = lindblad::assemble(&plan.field, &plan.grid, cfg.shift)?;
    let op_dir = w.root.join("operators");
    fs::create_dir_all(&op_dir).map_err(|e| Error::io(&op_dir, e))?;
    let mut operators = Vec::new();
    for p in sys.export(&op_dir)? {
        w.record(&p)?;
        operators.push(format!("operators/{}", file_name(&p)));
    }
    let phi_max = linalg::max_abs(sys.phi().as_ref());
    let assembly = AssemblySummary {
        field: plan.field.label().to_string(),
        points: plan.grid.points,
        size: sys.size(),
        shift: sys.shift(),
        form_residual: sys.form_identity_defect(),
        form_limit: 1e-12 * (1.0 + phi_max),
        shift_exact: verifier::shift_is_exact(&sys),
        operators,
    };
    if !(assembly.form_residual <= assembly.form_limit) {
        violations.push(format!("form identity residual {:e} exceeds {:e}", assembly.form_residual, assembly.form_limit));
    }
    w.json("assembly.json", &assembly)?;

    let mut numerical: Option<Error> = None;
    if has(Analysis::Evolve) {
        if let Err(e) = evolve(cfg, plan, &sys, w, violations) {
            numerical.get_or_insert(e);
        }
    }
    if has(Analysis::Verify) {
        verify(cfg, plan, &sys, w, violations)?;
    }
    if has(Analysis::Classical) {
        classical(cfg, plan, &sys, w)?;
    }
    if has(Analysis::Choi) {
        choi(cfg, plan, w, violations)?;
    }
    match numerical {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn evolve(cfg: &RunConfig, plan: &Plan, sys: &LindbladSystem, w: &mut Writer, violations: &mut Vec<String>) -> Result<()> {
    let run = semigroup::picard_run(sys, &Observable::identity(sys.size()), plan.time, &plan.opts)?;
    let defect = run.identity_defect();
    let residual_path = w.root.join("residuals.csv");
    semigroup::write_metrics_csv(&residual_path, &run.residual_rows())?;
    w.record(&residual_path)?;
    let cons_path = w.root.join("conservativity.csv");
    semigroup::write_metrics_csv(&cons_path, &run.node_rows("conservativity_defect", &defect))?;
    w.record(&cons_path)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut probe_min, mut probe_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..PROBE_VECTORS {
        let u: Vec<c64> = (0..sys.size())
            .map(|_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let ratio = linalg::quadratic_form(run.last(), &u).re / linalg::norm2(&u).powi(2);
        probe_min = probe_min.min(ratio);
        probe_max = probe_max.max(ratio);
    }

    let max_defect = defect.iter().copied().fold(0.0, f64::max);
    let monotonicity_min = run.monotonicity.iter().copied().fold(f64::INFINITY, f64::min);
    let summary = EvolveSummary {
        horizon: plan.time.horizon,
        steps: plan.time.steps,
        iterations: run.iterations,
        converged: run.converged,
        final_residual: run.residuals.last().copied().unwrap_or(0.0),
        max_conservativity_defect: max_defect,
        tolerance: CONSERVATIVITY_TOL,
        conservative: run.converged && max_defect <= CONSERVATIVITY_TOL,
        monotonicity_min,
        probe_min,
        probe_max,
    };
    w.json("evolve.json", &summary)?;
    if !run.converged {
        return Err(Error::Diverged(format!(
            "Picard iteration did not reach tol {:e} in {} sweeps (last residual {:e})",
            plan.opts.tol, run.iterations, summary.final_residual
        )));
    }
    if max_defect > CONSERVATIVITY_TOL {
        violations.push(format!("conservativity defect {max_defect:e} exceeds {CONSERVATIVITY_TOL:e}"));
    }
    if monotonicity_min < -MONOTONICITY_TOL {
        violations.push(format!("Picard difference with λ_min = {monotonicity_min:e}"));
    }
    let slack = 1e-8;
    if probe_min < -slack || probe_max > 1.0 + slack {
        violations.push(format!("T_t(I) probe ratios [{probe_min}, {probe_max}] outside [0, 1]"));
    }
    Ok(())
}

fn verify(cfg: &RunConfig, plan: &Plan, sys: &LindbladSystem, w: &mut Writer, violations: &mut Vec<String>) -> Result<()> {
    let report = verifier::cf_check(sys, &plan.resolutions, plan.grid.bulk_width)?;
    for c in ["c", "d"] {
        if let Some(e) = report.entry(c).filter(|e| e.status == EntryStatus::Failed) {
            violations.push(format!("condition ({c}) failed: {}", e.evidence));
        }
    }
    w.json("cf_report.json", &report)?;
    if let Some(t) = report.trend.iter().find(|t| t.points == plan.grid.points) {
        let path = w.root.join("cf_witness.txt");
        verifier::write_witness(&path, &t.estimate)?;
        w.record(&path)?;
    }
    let sub = Subspace::Bulk {
        width: plan.grid.bulk_width,
    };
    let pencils = PencilSummary {
        relative: verifier::relative_bound(sys.g0(), sys.hamiltonian(), &plan.grid, &cfg.verify.offsets, sub)?,
        commutator: verifier::commutator_bound(sys.g0(), sys.hamiltonian(), &plan.grid, &cfg.verify.epsilons, sub)?,
    };
    w.json("pencils.json", &pencils)
}

fn classical(cfg: &RunConfig, plan: &Plan, sys: &LindbladSystem, w: &mut Writer) -> Result<()> {
    let f0 = ScalarField::gaussian(vec![0.0; plan.grid.dim], cfg.classical.variance)?;
    let fine = semigroup::compare_classical(sys, &f0, plan.time, &plan.opts)?;
    let n = plan.grid.points;
    let coarse_points = if n % 2 == 1 { n.div_ceil(2) } else { n / 2 };
    let mut comparisons = Vec::new();
    let coarse = plan
        .grid
        .with_points(coarse_points)
        .and_then(|g| lindblad::assemble(&plan.field, &g, cfg.shift))
        .and_then(|s| semigroup::compare_classical(&s, &f0, plan.time, &plan.opts));
    let mut observed_order = None;
    if let Ok(c) = coarse {
        if c.error > 0.0 && fine.error > 0.0 {
            observed_order = Some((c.error / fine.error).ln() / (c.spacing / fine.spacing).ln());
        }
        comparisons.push(c);
    }
    comparisons.push(fine);
    let summary = ClassicalSummary {
        variance: cfg.classical.variance,
        comparisons,
        observed_order,
    };
    w.json("classical.json", &summary)
}

fn choi(cfg: &RunConfig, plan: &Plan, w: &mut Writer, violations: &mut Vec<String>) -> Result<()> {
    let g = plan.choi_grid.expect("validated in prepare");
    let sys = lindblad::assemble(&plan.field, &g, cfg.shift)?;
    let norm = MasterOracle::new(&sys)?.generator_norm();
    let mut reports: Vec<ChoiReport> = Vec::new();
    for &t in &cfg.choi.times {
        let dt = (0.02 / norm.max(1.0)).min(1e-3).min(t);
        let r = semigroup::choi_map(&sys, t, dt)?;
        if !r.completely_positive {
            violations.push(format!("Choi λ_min = {:e} at t = {t} (λ_max = {:e})", r.lambda_min, r.lambda_max));
        }
        reports.push(r);
    }
    w.json("choi.json", &reports)
}

/// Plain-text summary of a manifest. The flag is `true` when every listed
/// artifact was present, matched its digest and parsed.
pub fn report(manifest_path: &Path) -> Result<(String, bool)> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Config(format!("corrupt manifest: {e}")))?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let mut out = String::new();
    let mut clean = true;
    out.push_str(&format!("run status: {}\n", manifest.status));
    if let Some(e) = &manifest.error {
        out.push_str(&format!("run error: {e}\n"));
    }
    for v in &manifest.violations {
        out.push_str(&format!("violation: {v}\n"));
    }
    if manifest.artifacts.is_empty() {
        out.push_str("no artifacts\n");
        return Ok((out, true));
    }

    let mut loaded: Vec<(String, String)> = Vec::new();
    for a in &manifest.artifacts {
        let path = root.join(&a.path);
        match fs::read(&path) {
            Err(e) => {
                clean = false;
                out.push_str(&format!("error: {}: {e}\n", a.path));
            }
            Ok(bytes) if hex::encode(Sha256::digest(&bytes)) != a.sha256 => {
                clean = false;
                out.push_str(&format!("error: {}: digest mismatch\n", a.path));
            }
            Ok(bytes) => {
                if a.path.ends_with(".json") {
                    loaded.push((a.path.clone(), String::from_utf8_lossy(&bytes).into_owned()));
                }
            }
        }
    }

    for (name, body) in &loaded {
        let section = match name.as_str() {
            "assumptions.json" => parse(body).map(|r: AssumptionReport| render_assumptions(&r)),
            "assembly.json" => parse(body).map(|r: AssemblySummary| {
                format!(
                    "form identity residual {:.3e} (limit {:.3e}), C − Φ = σI exactly: {}\n",
                    r.form_residual, r.form_limit, r.shift_exact
                )
            }),
            "evolve.json" => parse(body).map(|r: EvolveSummary| render_evolve(&r)),
            "cf_report.json" => parse(body).map(|r: CFReport| render_cf(&r)),
            "pencils.json" => parse(body).map(|r: PencilSummary| render_pencils(&r)),
            "classical.json" => parse(body).map(|r: ClassicalSummary| render_classical(&r)),
            "choi.json" => parse(body).map(|r: Vec<ChoiReport>| {
                r.iter()
                    .map(|c| format!("Choi λ_min = {:.3e} (λ_max {:.3e}) at t = {}, M = {}\n", c.lambda_min, c.lambda_max, c.time, c.dim))
                    .collect()
            }),
            _ => Ok(String::new()),
        };
        match section {
            Ok(s) => out.push_str(&s),
            Err(e) => {
                clean = false;
                out.push_str(&format!("error: {name}: {e}\n"));
            }
        }
    }
    Ok((out, clean))
}

fn parse<T: for<'de> Deserialize<'de>>(body: &str) -> Result<T> {
    serde_json::from_str(body).map_err(Error::from)
}

fn render_assumptions(r: &AssumptionReport) -> String {
    let mut s = format!("assumptions for {}:\n", r.field);
    for e in &r.entries {
        let status = serde_json::to_value(e.status).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        let cond = serde_json::to_value(e.condition).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        let flag = if e.growth_violation { " [growth-violation]" } else { "" };
        s.push_str(&format!("  {cond}: {status}{flag}\n"));
    }
    s
}

fn render_evolve(r: &EvolveSummary) -> String {
    let mut s = if r.conservative {
        format!(
            "conservativity defect ≤ 1e-8 (max {:.3e} over {} nodes, {} Picard sweeps)\n",
            r.max_conservativity_defect,
            r.steps + 1,
            r.iterations
        )
    } else {
        format!(
            "conservativity defect {:.3e} above 1e-8 or run not converged (converged: {})\n",
            r.max_conservativity_defect, r.converged
        )
    };
    s.push_str(&format!("monotonicity: min λ_min of Picard differences {:.3e}\n", r.monotonicity_min));
    s
}

fn render_cf(r: &CFReport) -> String {
    let verdict = match r.verdict {
        Verdict::Supported => "supported",
        Verdict::NotSupported => "not supported",
    };
    let trend: Vec<String> = r.trend.iter().map(|t| format!("N={} k={:.4}", t.points, t.k)).collect();
    format!("CF verdict: {verdict}, k = {:.4}, trend [{}], drift {:.3}\n", r.k, trend.join(", "), r.drift)
}

fn render_pencils(r: &PencilSummary) -> String {
    let mut s = String::new();
    for p in &r.relative {
        s.push_str(&format!("relative bound: a = {:.4}, a·b = {:.4}\n", p.value, p.offset));
    }
    for p in &r.commutator {
        s.push_str(&format!("commutator bound: ε = {}, c = {:.4}\n", p.offset, p.value));
    }
    s
}

fn render_classical(r: &ClassicalSummary) -> String {
    let mut s = String::new();
    for c in &r.comparisons {
        s.push_str(&format!("classical comparison: N = {}, error {:.3e}, leakage {:.3e}\n", c.points, c.error, c.leakage));
    }
    match r.observed_order {
        Some(p) => s.push_str(&format!("classical observed order {p:.2}\n")),
        None => s.push_str("classical observed order unavailable\n"),
    }
    s
}
