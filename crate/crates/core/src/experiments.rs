//! Simulation harness: noise, metrics, the toy scenarios and real-data runs.
//!
//! Every scenario writes one [`ExperimentRecord`] per (size, noise level,
//! method, trial) followed by averaged rows (`trial = mean`). Nothing here
//! depends on wall-clock time unless `timing` is switched on, so a rerun with
//! the same configuration reproduces the results byte for byte.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, WsfError};
use crate::estimator::{EvaluationPlan, InterpolationSystem, LabeledData, WeightedSystem};
use crate::filters::FilterFamily;
use crate::geometry::{load_tdesign, rotated_design, sample_random, PointSet};
use crate::kernels::{target_function, KernelSpec};
use crate::model_selection::{
    argmin_score, candidate_coefficients, kfold_select, quadrature_for, score_candidates, ParameterGrid,
};
use crate::quadrature::{tdesign_rule, QuadratureRule};

pub const DEFAULT_TRUNCATION: f64 = 2.5;
pub const CSV_HEADER: &str =
    "scenario,sampler,n_train,delta,method,param,trial,rmse,sup_err,cnkm,stability_err,fitting_err,wall_ms";
pub const DUMP_HEADER: &str = "x,y,z,truth,prediction";
/// File name of the 120-point 15-design the rotated sampler starts from.
pub const ROTATION_BASE_FILE: &str = "design15_120.txt";

/// Truncated Gaussian noise `N(0, δ²)`, clamped to `±truncation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub std_dev: f64,
    pub truncation: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(std_dev: f64, seed: u64) -> Self {
        NoiseSpec {
            std_dev,
            truncation: DEFAULT_TRUNCATION,
            seed,
        }
    }
}

pub fn gen_noise(spec: &NoiseSpec, n: usize) -> Result<Vec<f64>> {
    if !(spec.std_dev >= 0.0) || !spec.std_dev.is_finite() {
        return Err(WsfError::invalid("noise level must be nonnegative"));
    }
    if !(spec.truncation >= 0.0) {
        return Err(WsfError::invalid("truncation bound must be nonnegative"));
    }
    if spec.std_dev == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let normal = Normal::new(0.0, spec.std_dev).map_err(|e| WsfError::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..n)
        .map(|_| normal.sample(&mut rng).clamp(-spec.truncation, spec.truncation))
        .collect())
}

fn check_pair(p: &[f64], t: &[f64]) -> Result<()> {
    if p.len() != t.len() {
        return Err(WsfError::LengthMismatch {
            expected: t.len(),
            got: p.len(),
        });
    }
    if p.is_empty() {
        return Err(WsfError::invalid("cannot score an empty prediction"));
    }
    Ok(())
}

pub fn rmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    check_pair(predictions, targets)?;
    let ss: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((ss / targets.len() as f64).sqrt())
}

pub fn sup_err(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    check_pair(predictions, targets)?;
    Ok(predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).abs())
        .fold(0.0, f64::max))
}

/// Points uniform in `[-1, 1]³` pushed radially onto the sphere, labeled
/// with the clean target.
pub fn make_testset(n: usize, seed: u64) -> Result<LabeledData> {
    if n == 0 {
        return Err(WsfError::invalid("test set must be nonempty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xyz = Vec::with_capacity(n);
    while xyz.len() < n {
        let v: [f64; 3] = [
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        ];
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if r < 1e-9 {
            continue;
        }
        xyz.push([v[0] / r, v[1] / r, v[2] / r]);
    }
    let points = PointSet::from_xyz(&xyz)?;
    let y: Vec<f64> = points.iter().map(target_function).collect();
    LabeledData::with_clean(points, y.clone(), y)
}

/// One row of the results table. `trial` is `None` on averaged rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub scenario: String,
    pub sampler: String,
    pub n_train: usize,
    pub delta: f64,
    pub method: String,
    pub param: Option<f64>,
    pub trial: Option<usize>,
    pub rmse: Option<f64>,
    pub sup_err: Option<f64>,
    pub cnkm: Option<f64>,
    pub stability_err: Option<f64>,
    pub fitting_err: Option<f64>,
    pub wall_ms: Option<u64>,
}

impl ExperimentRecord {
    fn new(cell: &Cell, method: impl Into<String>, trial: Option<usize>) -> Self {
        ExperimentRecord {
            scenario: cell.scenario.to_string(),
            sampler: cell.sampler.to_string(),
            n_train: cell.n_train,
            delta: cell.delta,
            method: method.into(),
            param: None,
            trial,
            rmse: None,
            sup_err: None,
            cnkm: None,
            stability_err: None,
            fitting_err: None,
            wall_ms: None,
        }
    }

    pub fn is_mean(&self) -> bool {
        self.trial.is_none()
    }

    pub fn csv_row(&self) -> String {
        fn num(v: Option<f64>) -> String {
            v.map(|x| format!("{x:e}")).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.sampler,
            self.n_train,
            self.delta,
            self.method,
            num(self.param),
            self.trial.map(|t| t.to_string()).unwrap_or_else(|| "mean".into()),
            num(self.rmse),
            num(self.sup_err),
            num(self.cnkm),
            num(self.stability_err),
            num(self.fitting_err),
            self.wall_ms.map(|t| t.to_string()).unwrap_or_default(),
        )
    }
}

pub fn records_to_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub fn write_records(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    crate::io::write_text(path, &records_to_csv(records))
}

/// Parses a results table written by [`write_records`].
pub fn read_records(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(parse_error(path, 1, "unexpected results header"));
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| csv_error(path, e))?;
        let opt = |k: usize| -> Result<Option<f64>> {
            let s = &row[k];
            if s.is_empty() {
                return Ok(None);
            }
            s.parse()
                .map(Some)
                .map_err(|_| parse_error(path, line, &format!("bad number {s:?}")))
        };
        let int = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| parse_error(path, line, &format!("bad integer {s:?}")))
        };
        out.push(ExperimentRecord {
            scenario: row[0].to_string(),
            sampler: row[1].to_string(),
            n_train: int(&row[2])?,
            delta: opt(3)?.unwrap_or(0.0),
            method: row[4].to_string(),
            param: opt(5)?,
            trial: if &row[6] == "mean" { None } else { Some(int(&row[6])?) },
            rmse: opt(7)?,
            sup_err: opt(8)?,
            cnkm: opt(9)?,
            stability_err: opt(10)?,
            fitting_err: opt(11)?,
            wall_ms: opt(12)?.map(|v| v as u64),
        });
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> WsfError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    parse_error(path, line, &e.to_string())
}

fn parse_error(path: &Path, line: usize, message: &str) -> WsfError {
    WsfError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.to_string(),
    }
}

/// Mean rows over trials, grouped by method (and by parameter when `by_param`).
/// A field is averaged only when every trial has it.
pub fn average_records(records: &[ExperimentRecord], by_param: bool) -> Vec<ExperimentRecord> {
    let mut groups: Vec<(String, Vec<&ExperimentRecord>)> = Vec::new();
    for r in records.iter().filter(|r| !r.is_mean()) {
        let key = format!(
            "{}|{}|{}|{}|{}|{}",
            r.scenario,
            r.sampler,
            r.n_train,
            r.delta,
            r.method,
            if by_param {
                format!("{:?}", r.param)
            } else {
                String::new()
            }
        );
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(_, g)| {
            let mean = |f: fn(&ExperimentRecord) -> Option<f64>| -> Option<f64> {
                let v: Option<Vec<f64>> = g.iter().map(|r| f(r)).collect();
                v.map(|v| v.iter().sum::<f64>() / v.len() as f64)
            };
            let first = g[0];
            ExperimentRecord {
                trial: None,
                param: mean(|r| r.param),
                rmse: mean(|r| r.rmse),
                sup_err: mean(|r| r.sup_err),
                cnkm: mean(|r| r.cnkm),
                stability_err: mean(|r| r.stability_err),
                fitting_err: mean(|r| r.fitting_err),
                wall_ms: mean(|r| r.wall_ms.map(|w| w as f64)).map(|w| w.round() as u64),
                ..first.clone()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scenario {
    Sim1,
    Sim2,
    Sim3,
    Sim4,
    Sim5,
    Sim6,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Sim1,
        Scenario::Sim2,
        Scenario::Sim3,
        Scenario::Sim4,
        Scenario::Sim5,
        Scenario::Sim6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Sim1 => "sim1",
            Scenario::Sim2 => "sim2",
            Scenario::Sim3 => "sim3",
            Scenario::Sim4 => "sim4",
            Scenario::Sim5 => "sim5",
            Scenario::Sim6 => "sim6",
        }
    }

    /// Parameter sweeps rather than cross-validated fits.
    pub fn is_sweep(self) -> bool {
        matches!(self, Scenario::Sim1 | Scenario::Sim2)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = WsfError;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| WsfError::invalid(format!("unknown scenario {s:?}")))
    }
}

/// How training inputs are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    /// Uniform random points; sizes are point counts.
    Random,
    /// Shipped spherical t-designs; sizes are the strengths `t`.
    TDesign,
    /// Copies of the 120-point 15-design rotated about the z-axis; sizes are
    /// the number of copies `k + 1`.
    Rotation,
}

impl Sampler {
    pub fn name(self) -> &'static str {
        match self {
            Sampler::Random => "random",
            Sampler::TDesign => "tdesign",
            Sampler::Rotation => "rotation",
        }
    }
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sampler {
    type Err = WsfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Sampler::Random),
            "tdesign" => Ok(Sampler::TDesign),
            "rotation" => Ok(Sampler::Rotation),
            _ => Err(WsfError::invalid(format!("unknown sampler {s:?}"))),
        }
    }
}

/// Path of the shipped t-design of strength `t` inside `dir`.
pub fn design_path(dir: &Path, t: usize) -> PathBuf {
    dir.join(format!("tdesign_{t:03}.txt"))
}

/// Strengths of the shipped designs `3, 7, …, 47`.
pub fn design_strengths(max_t: usize) -> Vec<usize> {
    (3..=max_t).step_by(4).collect()
}

/// `C(λ^{-(1+ε)/2} |D|^{-1/2} + λ^{3/4-ε/2})` with `ε = 1e-5`.
pub fn sup_norm_bound(c: f64, lambda: f64, n: usize) -> f64 {
    let eps = 1e-5;
    c * (lambda.powf(-(1.0 + eps) / 2.0) / (n as f64).sqrt() + lambda.powf(0.75 - eps / 2.0))
}

/// Overlay constant for the sup-norm bound at the three reference noise levels.
pub fn bound_constant(delta: f64) -> Option<f64> {
    [(0.1, 0.6), (0.3, 1.4), (0.5, 2.0)]
        .into_iter()
        .find(|(d, _)| (d - delta).abs() < 1e-12)
        .map(|(_, c)| c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub sampler: Sampler,
    pub sizes: Vec<usize>,
    pub deltas: Vec<f64>,
    pub families: Vec<FilterFamily>,
    pub include_ki: bool,
    pub trials: usize,
    pub seed: u64,
    pub test_size: usize,
    pub validation_t: usize,
    pub truncation: f64,
    pub kernel: KernelSpec,
    pub design_dir: PathBuf,
    /// Parameter sweep of the sweep scenarios, as fractions of κ.
    pub sweep_ratios: Vec<f64>,
    /// Quadrature degree on non-design training sets; searched when `None`.
    pub quad_degree: Option<usize>,
    pub timing: bool,
    /// Where the visualization scenario writes its prediction dumps.
    pub dump_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    /// Default sizes, noise levels and trial counts of each scenario.
    pub fn new(scenario: Scenario, sampler: Option<Sampler>, design_dir: impl Into<PathBuf>) -> Self {
        let sampler = sampler.unwrap_or(match scenario {
            Scenario::Sim1 => Sampler::Rotation,
            _ => Sampler::TDesign,
        });
        let sizes = default_sizes(scenario, sampler);
        let deltas = match scenario {
            Scenario::Sim1 | Scenario::Sim3 => vec![0.5],
            Scenario::Sim2 => vec![0.3, 0.1, 0.01],
            _ => vec![0.1, 0.3, 0.5],
        };
        let validation_t = match scenario {
            Scenario::Sim2 | Scenario::Sim6 => 45,
            _ => 47,
        };
        ScenarioConfig {
            scenario,
            sampler,
            sizes,
            deltas,
            families: FilterFamily::ALL.to_vec(),
            include_ki: true,
            trials: if scenario == Scenario::Sim6 { 1 } else { 5 },
            seed: 2024,
            test_size: if scenario == Scenario::Sim6 { 6000 } else { 4000 },
            validation_t,
            truncation: DEFAULT_TRUNCATION,
            kernel: KernelSpec::default(),
            design_dir: design_dir.into(),
            sweep_ratios: (0..=24).map(|k| 10f64.powf(-k as f64 / 4.0)).collect(),
            quad_degree: None,
            timing: false,
            dump_dir: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.deltas.is_empty() {
            return Err(WsfError::invalid(
                "scenario needs at least one size and one noise level",
            ));
        }
        if self.trials == 0 {
            return Err(WsfError::invalid("trials must be positive"));
        }
        if self.families.is_empty() && !self.include_ki {
            return Err(WsfError::invalid("no methods selected"));
        }
        if self.deltas.iter().any(|d| !(*d >= 0.0)) {
            return Err(WsfError::invalid("noise levels must be nonnegative"));
        }
        if self.scenario.is_sweep() && self.sweep_ratios.iter().any(|r| !(*r > 0.0)) {
            return Err(WsfError::invalid("sweep ratios must be positive"));
        }
        Ok(())
    }
}

pub fn default_sizes(scenario: Scenario, sampler: Sampler) -> Vec<usize> {
    let single = matches!(scenario, Scenario::Sim2 | Scenario::Sim3 | Scenario::Sim6);
    match (sampler, single) {
        (Sampler::TDesign, true) => vec![47],
        (Sampler::Random, true) => vec![1130],
        (Sampler::Rotation, true) => vec![10],
        (Sampler::TDesign, false) => {
            if scenario == Scenario::Sim1 {
                vec![47]
            } else {
                design_strengths(47)
            }
        }
        (Sampler::Random, false) => {
            if scenario == Scenario::Sim1 {
                vec![1200]
            } else {
                vec![32, 122, 280, 500, 784, 1130]
            }
        }
        (Sampler::Rotation, false) => {
            if scenario == Scenario::Sim1 {
                vec![10]
            } else {
                (1..=10).collect()
            }
        }
    }
}

/// Records plus cells that could not run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioOutput {
    pub records: Vec<ExperimentRecord>,
    /// `(size, reason)` for each skipped size.
    pub skipped: Vec<(usize, String)>,
    pub dumps: Vec<PathBuf>,
}

impl ScenarioOutput {
    pub fn csv(&self) -> String {
        records_to_csv(&self.records)
    }
}

struct Cell {
    scenario: Scenario,
    sampler: Sampler,
    n_train: usize,
    delta: f64,
}

/// Everything about one training set that does not depend on the noise.
struct Prepared {
    clean: Vec<f64>,
    system: WeightedSystem,
    interp: Option<InterpolationSystem>,
    test_plan: EvaluationPlan,
    grids: Vec<ParameterGrid>,
}

fn training_points(cfg: &ScenarioConfig, size: usize) -> Result<PointSet> {
    match cfg.sampler {
        Sampler::TDesign => load_tdesign(&design_path(&cfg.design_dir, size), size),
        Sampler::Random => sample_random(size, cfg.seed.wrapping_add(size as u64)),
        Sampler::Rotation => {
            if size == 0 {
                return Err(WsfError::invalid("rotation sampler needs at least one copy"));
            }
            let base = load_tdesign(&cfg.design_dir.join(ROTATION_BASE_FILE), 15)?;
            rotated_design(&base, size - 1)
        }
    }
}

fn training_rule(cfg: &ScenarioConfig, size: usize, points: &PointSet) -> Result<QuadratureRule> {
    match cfg.sampler {
        Sampler::TDesign => tdesign_rule(points, size),
        _ => quadrature_for(points, cfg.quad_degree),
    }
}

fn prepare(cfg: &ScenarioConfig, size: usize, test: &LabeledData) -> Result<Prepared> {
    let points = training_points(cfg, size)?;
    let rule = training_rule(cfg, size, &points)?;
    let system = WeightedSystem::new(cfg.kernel, &rule)?;
    let kappa = system.kappa();
    let grids = cfg
        .families
        .iter()
        .map(|&f| ParameterGrid::harmonic(f, points.len(), kappa))
        .collect::<Result<Vec<_>>>()?;
    let interp = if cfg.include_ki {
        Some(InterpolationSystem::new(cfg.kernel, points.clone())?)
    } else {
        None
    };
    Ok(Prepared {
        clean: points.iter().map(target_function).collect(),
        test_plan: EvaluationPlan::new(&cfg.kernel, &points, &test.points),
        system,
        interp,
        grids,
    })
}

fn elapsed_ms(start: Instant, timing: bool) -> Option<u64> {
    timing.then(|| start.elapsed().as_millis() as u64)
}

fn truth(data: &LabeledData) -> &[f64] {
    data.clean_values.as_deref().unwrap_or(&data.values)
}

/// Runs a toy scenario end to end.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    cfg.validate()?;
    let test = make_testset(cfg.test_size, cfg.seed.wrapping_add(0x7e57))?;
    let val = if cfg.scenario.is_sweep() {
        None
    } else {
        let points = load_tdesign(&design_path(&cfg.design_dir, cfg.validation_t), cfg.validation_t)?;
        let rule = tdesign_rule(&points, cfg.validation_t)?;
        let clean: Vec<f64> = points.iter().map(target_function).collect();
        Some((LabeledData::with_clean(points, clean.clone(), clean)?, rule))
    };
    if let Some(dir) = &cfg.dump_dir {
        std::fs::create_dir_all(dir).map_err(|e| WsfError::io(dir, e))?;
    }

    let mut out = ScenarioOutput::default();
    for &size in &cfg.sizes {
        let prepared = match prepare(cfg, size, &test) {
            Ok(p) => p,
            Err(e @ (WsfError::InfeasibleDegree { .. } | WsfError::NotADesign { .. } | WsfError::Io { .. })) => {
                out.skipped.push((size, e.to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        let n = prepared.clean.len();
        for &delta in &cfg.deltas {
            let cell = Cell {
                scenario: cfg.scenario,
                sampler: cfg.sampler,
                n_train: n,
                delta,
            };
            let mut rows = Vec::new();
            for trial in 0..cfg.trials {
                let n_val = val.as_ref().map_or(0, |v| v.0.len());
                let noise = gen_noise(
                    &NoiseSpec {
                        std_dev: delta,
                        truncation: cfg.truncation,
                        seed: cfg.seed.wrapping_add(trial as u64),
                    },
                    n + n_val,
                )?;
                let y: Vec<f64> = prepared.clean.iter().zip(&noise).map(|(c, e)| c + e).collect();
                let trial_val = val.as_ref().map(|(v, rule)| {
                    let values = truth(v).iter().zip(&noise[n..]).map(|(c, e)| c + e).collect();
                    (LabeledData { values, ..v.clone() }, rule)
                });
                let ctx = TrialContext {
                    cfg,
                    cell: &cell,
                    trial,
                    prepared: &prepared,
                    y: &y,
                    test: &test,
                };
                if cfg.scenario.is_sweep() {
                    ctx.sweep(&mut rows)?;
                } else {
                    let (v, rule) = trial_val.expect("validation set");
                    ctx.cross_validated(&v, rule, &mut rows, &mut out.dumps)?;
                }
            }
            let means = average_records(&rows, cfg.scenario.is_sweep());
            out.records.extend(rows);
            if cfg.trials > 1 {
                out.records.extend(means);
            }
        }
    }
    if out.records.is_empty() && !out.skipped.is_empty() {
        let reasons: Vec<String> = out.skipped.iter().map(|(s, r)| format!("{s}: {r}")).collect();
        return Err(WsfError::invalid(format!(
            "every size was skipped ({})",
            reasons.join("; ")
        )));
    }
    Ok(out)
}

struct TrialContext<'a> {
    cfg: &'a ScenarioConfig,
    cell: &'a Cell,
    trial: usize,
    prepared: &'a Prepared,
    y: &'a [f64],
    test: &'a LabeledData,
}

impl TrialContext<'_> {
    fn record(&self, method: impl Into<String>) -> ExperimentRecord {
        ExperimentRecord::new(self.cell, method, Some(self.trial))
    }

    fn ki(&self) -> Result<Option<(ExperimentRecord, Vec<f64>)>> {
        let Some(interp) = &self.prepared.interp else {
            return Ok(None);
        };
        let start = Instant::now();
        let model = interp.fit(self.y)?;
        let pred = self.prepared.test_plan.apply(&model.coefficients);
        let mut r = self.record("ki");
        r.rmse = Some(rmse(&pred, truth(self.test))?);
        r.sup_err = Some(sup_err(&pred, truth(self.test))?);
        r.cnkm = model.diagnostics.map(|d| d.cnkm);
        r.wall_ms = elapsed_ms(start, self.cfg.timing);
        Ok(Some((r, pred)))
    }

    /// Fixed-parameter sweep; the rotation scenario also splits the error
    /// into its stability and fitting parts.
    fn sweep(&self, rows: &mut Vec<ExperimentRecord>) -> Result<()> {
        let p = self.prepared;
        let system = &p.system;
        let kappa = system.kappa();
        let decompose = self.cell.scenario == Scenario::Sim1;
        if let Some((r, _)) = self.ki()? {
            rows.push(r);
        }
        for &family in &self.cfg.families {
            let grid = ParameterGrid::relative(family, kappa, &self.cfg.sweep_ratios)?;
            for spec in grid.specs() {
                let start = Instant::now();
                let a = system.coefficients_spectral(self.y, &spec)?;
                let pred = p.test_plan.apply(&a);
                let mut r = self.record(family.name());
                r.param = Some(spec.parameter);
                r.rmse = Some(rmse(&pred, truth(self.test))?);
                r.sup_err = Some(sup_err(&pred, truth(self.test))?);
                r.cnkm = system.conditioning(Some(&spec))?.map(|c| c.cnkm);
                if decompose {
                    let a0 = system.coefficients_spectral(&p.clean, &spec)?;
                    let pred0 = p.test_plan.apply(&a0);
                    r.stability_err = Some(rmse(&pred, &pred0)?);
                    r.fitting_err = Some(rmse(&pred0, truth(self.test))?);
                }
                r.wall_ms = elapsed_ms(start, self.cfg.timing);
                rows.push(r);
            }
        }
        Ok(())
    }

    fn cross_validated(
        &self,
        val: &LabeledData,
        val_rule: &QuadratureRule,
        rows: &mut Vec<ExperimentRecord>,
        dumps: &mut Vec<PathBuf>,
    ) -> Result<()> {
        let p = self.prepared;
        let target = truth(self.test);
        let scenario = self.cell.scenario;
        let mut predictions: Vec<(String, Vec<f64>)> = Vec::new();
        if let Some((r, pred)) = self.ki()? {
            rows.push(r);
            predictions.push(("ki".into(), pred));
        }
        for grid in &p.grids {
            let family = grid.family;
            let start = Instant::now();
            let coefs = candidate_coefficients(&p.system, self.y, grid);
            let cv = score_candidates(&p.system, &coefs, grid, val, val_rule, &self.cfg.kernel)?;
            let spec = cv.chosen_spec(family);
            let a = coefs[cv.chosen_index]
                .as_ref()
                .map_err(|e| WsfError::invalid(e.to_string()))?;
            let pred = p.test_plan.apply(a);
            let mut r = self.record(family.name());
            r.param = Some(spec.parameter);
            r.rmse = Some(rmse(&pred, target)?);
            r.sup_err = Some(sup_err(&pred, target)?);
            r.cnkm = p.system.conditioning(Some(&spec))?.map(|c| c.cnkm);
            r.wall_ms = elapsed_ms(start, self.cfg.timing);
            rows.push(r);

            if scenario == Scenario::Sim3 {
                let scores: Vec<f64> = coefs
                    .iter()
                    .map(|c| match c {
                        Ok(a) => rmse(&p.test_plan.apply(a), target).unwrap_or(f64::NAN),
                        Err(_) => f64::NAN,
                    })
                    .collect();
                let best = argmin_score(&scores).ok_or(WsfError::AllCandidatesFailed)?;
                let mut o = self.record(format!("{}_oracle", family.name()));
                o.param = Some(grid.candidates[best]);
                o.rmse = Some(scores[best]);
                let a = coefs[best].as_ref().map_err(|e| WsfError::invalid(e.to_string()))?;
                o.sup_err = Some(sup_err(&p.test_plan.apply(a), target)?);
                rows.push(o);
            }
            if scenario == Scenario::Sim5 && family == FilterFamily::Tikhonov {
                if let Some(c) = bound_constant(self.cell.delta) {
                    let mut b = self.record("tikhonov_bound");
                    b.param = Some(spec.parameter);
                    b.sup_err = Some(sup_norm_bound(c, spec.parameter, self.cell.n_train));
                    rows.push(b);
                }
            }
            predictions.push((family.name().into(), pred));
        }
        if scenario == Scenario::Sim6 {
            if let Some(dir) = &self.cfg.dump_dir {
                let train_pts = p.system.points();
                let tag = format!("n{}_delta{}_trial{}", self.cell.n_train, self.cell.delta, self.trial);
                let path = dir.join(format!("sim6_train_{tag}.csv"));
                write_dump(&path, train_pts, &p.clean, self.y)?;
                dumps.push(path);
                for (method, pred) in &predictions {
                    let path = dir.join(format!("sim6_{method}_{tag}.csv"));
                    write_dump(&path, &self.test.points, target, pred)?;
                    dumps.push(path);
                }
            }
        }
        Ok(())
    }
}

pub fn dump_to_csv(points: &PointSet, truth: &[f64], prediction: &[f64]) -> Result<String> {
    check_pair(prediction, truth)?;
    if points.len() != truth.len() {
        return Err(WsfError::LengthMismatch {
            expected: points.len(),
            got: truth.len(),
        });
    }
    let mut out = String::from(DUMP_HEADER);
    out.push('\n');
    for (i, p) in points.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e}",
            p[0], p[1], p[2], truth[i], prediction[i]
        );
    }
    Ok(out)
}

/// Writes `x,y,z,truth,prediction` rows.
pub fn write_dump(path: &Path, points: &PointSet, truth: &[f64], prediction: &[f64]) -> Result<()> {
    crate::io::write_text(path, &dump_to_csv(points, truth, prediction)?)
}

/// `[cos φ cos θ, cos φ sin θ, sin φ]` for latitude φ and longitude θ in degrees.
pub fn latlon_to_unit(lat_deg: f64, lon_deg: f64) -> [f64; 3] {
    let (phi, theta) = (lat_deg.to_radians(), lon_deg.to_radians());
    [phi.cos() * theta.cos(), phi.cos() * theta.sin(), phi.sin()]
}

/// Reads a headed CSV with `lat_deg`, `lon_deg` and the named value column.
pub fn ingest_latlon_csv(path: &Path, value_column: &str) -> Result<LabeledData> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_error(path, 1, &format!("missing column {name:?}")))
    };
    let (ilat, ilon, ival) = (column("lat_deg")?, column("lon_deg")?, column(value_column)?);
    let mut xyz = Vec::new();
    let mut values = Vec::new();
    let mut rows = Vec::new();
    let mut seen: BTreeMap<(i64, i64, i64), usize> = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let cell = |k: usize, name: &str| -> Result<f64> {
            let s = row.get(k).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_error(path, line, &format!("{name}: not a number: {s:?}")))
        };
        let (lat, lon, v) = (
            cell(ilat, "lat_deg")?,
            cell(ilon, "lon_deg")?,
            cell(ival, value_column)?,
        );
        if lat.abs() > 90.0 {
            return Err(parse_error(path, line, &format!("latitude {lat} outside [-90, 90]")));
        }
        let p = latlon_to_unit(lat, lon);
        let key = (
            (p[0] * 1e10).round() as i64,
            (p[1] * 1e10).round() as i64,
            (p[2] * 1e10).round() as i64,
        );
        if let Some(first) = seen.insert(key, line) {
            return Err(parse_error(
                path,
                line,
                &format!("duplicate location (first seen on line {first})"),
            ));
        }
        xyz.push(p);
        values.push(v);
        rows.push(line);
    }
    if xyz.is_empty() {
        return Err(parse_error(path, 1, "no data rows"));
    }
    let points = PointSet::from_xyz(&xyz).map_err(|e| match e {
        WsfError::DuplicatePoint { first, second } => parse_error(
            path,
            rows[second],
            &format!("duplicate location (first seen on line {})", rows[first]),
        ),
        other => other,
    })?;
    LabeledData::new(points, values)
}

/// Real-data protocol: noisy training values, parameters by plain k-fold CV
/// (or by weighted validation when a validation set is given), scored on
/// the untouched test values.
#[derive(Debug, Clone, PartialEq)]
pub struct RealDataConfig {
    pub delta: f64,
    /// Defaults to `5δ` when `None`.
    pub truncation: Option<f64>,
    pub clamp_nonnegative: bool,
    pub folds: usize,
    pub trials: usize,
    pub seed: u64,
    pub families: Vec<FilterFamily>,
    pub include_ki: bool,
    pub kernel: KernelSpec,
    pub quad_degree: Option<usize>,
    /// Candidate fractions of κ; the harmonic grid of the training size when `None`.
    pub ratios: Option<Vec<f64>>,
    pub timing: bool,
    pub dump_dir: Option<PathBuf>,
}

impl Default for RealDataConfig {
    fn default() -> Self {
        RealDataConfig {
            delta: 0.5,
            truncation: None,
            clamp_nonnegative: false,
            folds: 5,
            trials: 5,
            seed: 2024,
            families: FilterFamily::ALL.to_vec(),
            include_ki: true,
            kernel: KernelSpec::default(),
            quad_degree: None,
            ratios: None,
            timing: false,
            dump_dir: None,
        }
    }
}

pub fn run_real_data(
    train: &LabeledData,
    test: &LabeledData,
    validation: Option<&LabeledData>,
    cfg: &RealDataConfig,
) -> Result<ScenarioOutput> {
    if cfg.trials == 0 {
        return Err(WsfError::invalid("trials must be positive"));
    }
    let truncation = cfg.truncation.unwrap_or(5.0 * cfg.delta);
    let n = train.len();
    let n_val = validation.map_or(0, |v| v.len());
    let rule = quadrature_for(&train.points, cfg.quad_degree)?;
    let system = WeightedSystem::new(cfg.kernel, &rule)?;
    let kappa = system.kappa();
    let ratios = cfg.ratios.clone().unwrap_or_else(|| {
        (1..=(n as f64).sqrt().ceil() as usize)
            .map(|j| 1.0 / j as f64)
            .collect()
    });
    let test_plan = EvaluationPlan::new(&cfg.kernel, &train.points, &test.points);
    let val_rule = validation
        .map(|v| quadrature_for(&v.points, cfg.quad_degree))
        .transpose()?;
    let interp = if cfg.include_ki {
        Some(InterpolationSystem::new(cfg.kernel, train.points.clone())?)
    } else {
        None
    };
    if let Some(dir) = &cfg.dump_dir {
        std::fs::create_dir_all(dir).map_err(|e| WsfError::io(dir, e))?;
    }
    let cell = Cell {
        scenario: Scenario::Sim1,
        sampler: Sampler::Random,
        n_train: n,
        delta: cfg.delta,
    };
    let finish = |pred: &mut Vec<f64>| {
        if cfg.clamp_nonnegative {
            pred.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    };

    let mut out = ScenarioOutput::default();
    let mut rows = Vec::new();
    for trial in 0..cfg.trials {
        let noise = gen_noise(
            &NoiseSpec {
                std_dev: cfg.delta,
                truncation,
                seed: cfg.seed.wrapping_add(trial as u64),
            },
            n + n_val,
        )?;
        let y: Vec<f64> = train.values.iter().zip(&noise).map(|(v, e)| v + e).collect();
        let noisy = LabeledData::new(train.points.clone(), y.clone())?;
        let record = |method: &str,
                      param: Option<f64>,
                      pred: &[f64],
                      cnkm: Option<f64>,
                      start: Instant|
         -> Result<ExperimentRecord> {
            let mut r = ExperimentRecord::new(&cell, method, Some(trial));
            r.scenario = "real".into();
            r.sampler = "data".into();
            r.param = param;
            r.rmse = Some(rmse(pred, &test.values)?);
            r.sup_err = Some(sup_err(pred, &test.values)?);
            r.cnkm = cnkm;
            r.wall_ms = elapsed_ms(start, cfg.timing);
            Ok(r)
        };
        let mut predictions = Vec::new();
        if let Some(interp) = &interp {
            let start = Instant::now();
            let model = interp.fit(&y)?;
            let mut pred = test_plan.apply(&model.coefficients);
            finish(&mut pred);
            rows.push(record("ki", None, &pred, model.diagnostics.map(|d| d.cnkm), start)?);
            predictions.push(("ki".to_string(), pred));
        }
        for &family in &cfg.families {
            let start = Instant::now();
            let spec = match (validation, &val_rule) {
                (Some(v), Some(vr)) => {
                    let vy = v.values.iter().zip(&noise[n..]).map(|(a, e)| a + e).collect();
                    let vdata = LabeledData::new(v.points.clone(), vy)?;
                    let grid = ParameterGrid::relative(family, kappa, &ratios)?;
                    let coefs = candidate_coefficients(&system, &y, &grid);
                    score_candidates(&system, &coefs, &grid, &vdata, vr, &cfg.kernel)?.chosen_spec(family)
                }
                _ => {
                    let (r, _) = kfold_select(
                        &noisy,
                        cfg.folds,
                        cfg.seed.wrapping_add(trial as u64),
                        &cfg.kernel,
                        family,
                        &ratios,
                        cfg.quad_degree,
                    )?;
                    ParameterGrid::relative(family, kappa, &[r])?.specs()[0]
                }
            };
            let a: DVector<f64> = system.coefficients(&y, &spec)?;
            let mut pred = test_plan.apply(&a);
            finish(&mut pred);
            let cnkm = system.conditioning(Some(&spec))?.map(|c| c.cnkm);
            rows.push(record(family.name(), Some(spec.parameter), &pred, cnkm, start)?);
            predictions.push((family.name().to_string(), pred));
        }
        if let (Some(dir), 0) = (&cfg.dump_dir, trial) {
            for (method, pred) in &predictions {
                let path = dir.join(format!("real_{method}.csv"));
                write_dump(&path, &test.points, &test.values, pred)?;
                out.dumps.push(path);
            }
        }
    }
    let means = average_records(&rows, false);
    out.records.extend(rows);
    if cfg.trials > 1 {
        out.records.extend(means);
    }
    Ok(out)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    if x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(WsfError::invalid("slope needs two or more positive pairs"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(WsfError::invalid("slope needs at least two distinct sizes"));
    }
    Ok(sxy / sxx)
}

/// Averaged rows of one method, sorted by training size.
pub fn mean_curve<'a>(records: &'a [ExperimentRecord], method: &str, delta: f64) -> Vec<&'a ExperimentRecord> {
    let mut v: Vec<_> = records
        .iter()
        .filter(|r| r.is_mean() && r.method == method && (r.delta - delta).abs() < 1e-12)
        .collect();
    v.sort_by_key(|r| r.n_train);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn noise_properties() {
        assert_eq!(gen_noise(&NoiseSpec::new(0.0, 1), 5).unwrap(), vec![0.0; 5]);
        let e = gen_noise(&NoiseSpec::new(0.5, 3), 100_000).unwrap();
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        let sd = (e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / e.len() as f64).sqrt();
        assert!(mean.abs() < 0.02 && (sd - 0.5).abs() < 0.02, "{mean} {sd}");
        let big = gen_noise(&NoiseSpec::new(10.0, 3), 10_000).unwrap();
        assert!(big.iter().all(|x| x.abs() <= 2.5));
        let at_bound = big.iter().filter(|x| x.abs() == 2.5).count();
        assert!(at_bound > 7_000);
        assert_eq!(e[..10], gen_noise(&NoiseSpec::new(0.5, 3), 10).unwrap()[..]);
        assert!(gen_noise(&NoiseSpec::new(-1.0, 3), 3).is_err());
    }

    #[test]
    fn metrics() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(rmse(&[1.5, 2.5], &[1.0, 2.0]).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(sup_err(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 4.0);
        assert_eq!(sup_err(&[2.0], &[-1.0]).unwrap(), 3.0);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(sup_err(&[], &[]).is_err());
    }

    #[test]
    fn testset_is_on_the_sphere() {
        let t = make_testset(500, 1).unwrap();
        for p in t.points.iter() {
            assert_abs_diff_eq!(p[0] * p[0] + p[1] * p[1] + p[2] * p[2], 1.0, epsilon = 1e-14);
        }
        assert_eq!(t.values, t.clean_values.clone().unwrap());
        assert_eq!(make_testset(500, 1).unwrap(), t);
    }

    #[test]
    fn latlon_transform() {
        let close = |a: [f64; 3], b: [f64; 3]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15);
        assert!(close(latlon_to_unit(0.0, 0.0), [1.0, 0.0, 0.0]));
        assert!(close(latlon_to_unit(90.0, 123.0), [0.0, 0.0, 1.0]));
        assert!(close(latlon_to_unit(0.0, 90.0), [0.0, 1.0, 0.0]));
    }

    #[test]
    fn ingest_errors_name_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "lat_deg,lon_deg,speed\n0,0,1.5\n10,20,2\n").unwrap();
        let d = ingest_latlon_csv(&p, "speed").unwrap();
        assert_eq!(d.values, vec![1.5, 2.0]);
        assert!(ingest_latlon_csv(&p, "temp").unwrap_err().to_string().contains("temp"));
        std::fs::write(&p, "lat_deg,lon_deg,speed\n0,0,1\n5,5,x\n").unwrap();
        assert!(ingest_latlon_csv(&p, "speed").unwrap_err().to_string().contains(":3:"));
        std::fs::write(&p, "lat_deg,lon_deg,speed\n0,0,1\n5,5,2\n0,360,3\n").unwrap();
        let e = ingest_latlon_csv(&p, "speed").unwrap_err().to_string();
        assert!(e.contains(":4:") && e.contains("line 2"), "{e}");
    }

    #[test]
    fn csv_round_trip_and_means() {
        let cell = Cell {
            scenario: Scenario::Sim4,
            sampler: Sampler::TDesign,
            n_train: 32,
            delta: 0.5,
        };
        let mut a = ExperimentRecord::new(&cell, "tikhonov", Some(0));
        a.param = Some(0.1);
        a.rmse = Some(0.2);
        let mut b = ExperimentRecord::new(&cell, "tikhonov", Some(1));
        b.param = Some(0.3);
        b.rmse = Some(0.4);
        let means = average_records(&[a.clone(), b.clone()], false);
        assert_eq!(means.len(), 1);
        assert_abs_diff_eq!(means[0].rmse.unwrap(), 0.3, epsilon = 1e-15);
        assert!(means[0].cnkm.is_none());
        assert!(means[0].csv_row().contains(",mean,"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let all = vec![a, b, means[0].clone()];
        write_records(&p, &all).unwrap();
        assert_eq!(read_records(&p).unwrap(), all);
        assert_eq!(average_records(&all, true).len(), 2);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [10.0, 100.0, 1000.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.4)).collect();
        assert_abs_diff_eq!(log_log_slope(&x, &y).unwrap(), -0.4, epsilon = 1e-12);
        assert!(log_log_slope(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn bound_curve() {
        assert_eq!(bound_constant(0.3), Some(1.4));
        assert_eq!(bound_constant(0.2), None);
        let b = sup_norm_bound(2.0, 0.01, 100);
        assert!(b > 2.0 * (0.1 / 10.0 + 0.01f64.powf(0.75)) * 0.99);
    }
}
