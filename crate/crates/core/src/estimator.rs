//! Kernel interpolation and the weighted spectral filter estimator.
//!
//! Both produce `f = Σ a_i φ(x_i · ·)`. Interpolation solves `Φ a = y`; the
//! filtered estimator uses `a = W^{1/2} g_λ(Ψ) W^{1/2} y` with
//! `Ψ = W^{1/2} Φ W^{1/2}` and `W` the quadrature weights.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, WsfError};
use crate::filters::{FilterFamily, FilterSpec, SpectralOperator};
use crate::geometry::PointSet;
use crate::io;
use crate::kernels::{cross_matrix, kernel_matrix, KernelFamily, KernelSpec};
use crate::quadrature::QuadratureRule;

/// Above this many centers conditioning diagnostics are skipped.
pub const DIAGNOSTICS_LIMIT: usize = 2500;

/// Scattered samples `y_i = f*(x_i) + ε_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub points: PointSet,
    pub values: Vec<f64>,
    /// `f*(x_i)`, known in simulations only.
    pub clean_values: Option<Vec<f64>>,
}

impl LabeledData {
    pub fn new(points: PointSet, values: Vec<f64>) -> Result<Self> {
        if values.len() != points.len() {
            return Err(WsfError::LengthMismatch {
                expected: points.len(),
                got: values.len(),
            });
        }
        Ok(LabeledData {
            points,
            values,
            clean_values: None,
        })
    }

    pub fn with_clean(points: PointSet, values: Vec<f64>, clean: Vec<f64>) -> Result<Self> {
        if clean.len() != points.len() {
            return Err(WsfError::LengthMismatch {
                expected: points.len(),
                got: clean.len(),
            });
        }
        let mut d = Self::new(points, values)?;
        d.clean_values = Some(clean);
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The same points labeled with the clean values.
    pub fn noise_free(&self) -> Result<LabeledData> {
        let clean = self.clean_values.clone().ok_or(WsfError::MissingCleanValues)?;
        Ok(LabeledData {
            points: self.points.clone(),
            values: clean.clone(),
            clean_values: Some(clean),
        })
    }

    pub fn select(&self, indices: &[usize]) -> Result<LabeledData> {
        let pick = |v: &[f64]| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Ok(LabeledData {
            points: self.points.select(indices)?,
            values: pick(&self.values),
            clean_values: self.clean_values.as_deref().map(pick),
        })
    }
}

/// Which estimator produced a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Ki,
    Wsf(FilterSpec),
}

impl Method {
    /// `ki`, `tikhonov`, `landweber` or `cutoff`.
    pub fn name(&self) -> &'static str {
        match self {
            Method::Ki => "ki",
            Method::Wsf(f) => f.family.name(),
        }
    }

    pub fn param(&self) -> Option<f64> {
        match self {
            Method::Ki => None,
            Method::Wsf(f) => Some(f.parameter),
        }
    }

    fn parse(tag: &str, param: Option<f64>) -> Result<Method> {
        if tag == "ki" {
            return Ok(Method::Ki);
        }
        let family: FilterFamily = tag.strip_prefix("wsf+").unwrap_or(tag).parse()?;
        let p = param.ok_or_else(|| WsfError::invalid("filter model without a parameter"))?;
        Ok(Method::Wsf(FilterSpec::new(family, p)?))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Ki => f.write_str("ki"),
            Method::Wsf(s) => write!(f, "wsf+{}", s.family),
        }
    }
}

/// Extremes of the spectrum of the matrix an estimator effectively inverts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditioningReport {
    pub cnkm: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub clamped_weight_count: usize,
}

impl ConditioningReport {
    fn from_spectrum(values: impl IntoIterator<Item = f64>, clamped_weight_count: usize) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !hi.is_finite() || hi <= 0.0 {
            // nothing retained
            return ConditioningReport {
                cnkm: 1.0,
                sigma_min: 0.0,
                sigma_max: 0.0,
                clamped_weight_count,
            };
        }
        ConditioningReport {
            cnkm: hi / lo.max(f64::EPSILON * hi),
            sigma_min: lo,
            sigma_max: hi,
            clamped_weight_count,
        }
    }
}

/// Eigenvalue-based condition report of a symmetric PSD matrix.
pub fn conditioning(matrix: &DMatrix<f64>) -> Result<ConditioningReport> {
    let eig = crate::numerics::sym_eig(matrix)?;
    Ok(ConditioningReport::from_spectrum(eig.eigenvalues.iter().copied(), 0))
}

/// `f = Σ a_i φ(x_i · ·)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub kernel: KernelSpec,
    pub centers: PointSet,
    pub coefficients: DVector<f64>,
    pub method: Method,
    /// `None` when skipped for size.
    pub diagnostics: Option<ConditioningReport>,
    /// Set when the linear solve could not meet its residual guarantee.
    pub ill_conditioned: bool,
}

impl FittedModel {
    pub fn evaluate(&self, queries: &PointSet) -> Vec<f64> {
        evaluate(self, queries)
    }
}

/// `v_j = Σ_i a_i φ(x_i · q_j)`.
pub fn evaluate(model: &FittedModel, queries: &PointSet) -> Vec<f64> {
    let a = &model.coefficients;
    let mut out = Vec::with_capacity(queries.len());
    for q in queries.iter() {
        let mut v = 0.0;
        for (c, &ai) in model.centers.iter().zip(a.iter()) {
            if ai != 0.0 {
                v += ai * model.kernel.eval(c, q);
            }
        }
        out.push(v);
    }
    out
}

/// Kernel values between fixed centers and fixed queries, for evaluating
/// many coefficient vectors on the same points.
#[derive(Debug, Clone)]
pub struct EvaluationPlan {
    matrix: DMatrix<f64>,
}

impl EvaluationPlan {
    pub fn new(kernel: &KernelSpec, centers: &PointSet, queries: &PointSet) -> Self {
        EvaluationPlan {
            matrix: cross_matrix(kernel, queries, centers),
        }
    }

    pub fn apply(&self, coefficients: &DVector<f64>) -> Vec<f64> {
        (&self.matrix * coefficients).iter().copied().collect()
    }
}

/// Kernel interpolation on a fixed node set. Φ and its spectrum are kept so
/// several right-hand sides can be solved without reassembly.
#[derive(Debug)]
pub struct InterpolationSystem {
    kernel: KernelSpec,
    points: PointSet,
    operator: SpectralOperator,
}

impl InterpolationSystem {
    pub fn new(kernel: KernelSpec, points: PointSet) -> Result<Self> {
        if points.is_empty() {
            return Err(WsfError::EmptyPointSet);
        }
        let phi = kernel_matrix(&kernel, &points);
        Ok(InterpolationSystem {
            kernel,
            points,
            operator: SpectralOperator::new(phi)?,
        })
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        self.operator.matrix()
    }

    pub fn conditioning(&self) -> Result<Option<ConditioningReport>> {
        if self.points.len() > DIAGNOSTICS_LIMIT {
            return Ok(None);
        }
        let eig = self.operator.eig()?;
        Ok(Some(ConditioningReport::from_spectrum(
            eig.eigenvalues.iter().copied(),
            0,
        )))
    }

    /// Solves `Φ a = y`. Ill-conditioning is flagged on the model, not fatal.
    pub fn fit(&self, values: &[f64]) -> Result<FittedModel> {
        check_len(&self.points, values)?;
        let y = DVector::from_column_slice(values);
        let sol = crate::numerics::solve_spd(self.operator.matrix(), &y, 0.0)?;
        Ok(FittedModel {
            kernel: self.kernel,
            centers: self.points.clone(),
            coefficients: sol.x,
            method: Method::Ki,
            diagnostics: self.conditioning()?,
            ill_conditioned: sol.ill_conditioned,
        })
    }
}

/// The weighted system `Ψ = W^{1/2} Φ W^{1/2}` of a quadrature rule, reusable
/// across filters and right-hand sides.
#[derive(Debug)]
pub struct WeightedSystem {
    kernel: KernelSpec,
    points: PointSet,
    sqrt_w: DVector<f64>,
    clamped: usize,
    operator: SpectralOperator,
}

impl WeightedSystem {
    pub fn new(kernel: KernelSpec, rule: &QuadratureRule) -> Result<Self> {
        if rule.is_empty() {
            return Err(WsfError::EmptyPointSet);
        }
        let sqrt_w = DVector::from_iterator(rule.len(), rule.weights.iter().map(|w| w.sqrt()));
        let mut psi = kernel_matrix(&kernel, &rule.points);
        for j in 0..psi.ncols() {
            for i in 0..psi.nrows() {
                psi[(i, j)] *= sqrt_w[i] * sqrt_w[j];
            }
        }
        Ok(WeightedSystem {
            kernel,
            points: rule.points.clone(),
            sqrt_w,
            clamped: rule.clamped_count,
            operator: SpectralOperator::new(psi)?,
        })
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn operator(&self) -> &SpectralOperator {
        &self.operator
    }

    /// κ, the largest eigenvalue of Ψ.
    pub fn kappa(&self) -> f64 {
        self.operator.kappa()
    }

    fn weighted_rhs(&self, values: &[f64]) -> Result<DVector<f64>> {
        check_len(&self.points, values)?;
        Ok(DVector::from_iterator(
            values.len(),
            values.iter().zip(self.sqrt_w.iter()).map(|(y, s)| y * s),
        ))
    }

    fn unweight(&self, mut u: DVector<f64>) -> DVector<f64> {
        u.component_mul_assign(&self.sqrt_w);
        u
    }

    /// `W^{1/2} g_λ(Ψ) W^{1/2} y`.
    pub fn coefficients(&self, values: &[f64], filter: &FilterSpec) -> Result<DVector<f64>> {
        let rhs = self.weighted_rhs(values)?;
        Ok(self.unweight(self.operator.apply(filter, &rhs)?))
    }

    /// Same as [`coefficients`](Self::coefficients) but through the
    /// eigendecomposition of Ψ, cheap once it is cached.
    pub fn coefficients_spectral(&self, values: &[f64], filter: &FilterSpec) -> Result<DVector<f64>> {
        let rhs = self.weighted_rhs(values)?;
        Ok(self.unweight(self.operator.apply_spectral(filter, &rhs)?))
    }

    /// Landweber coefficients for several iteration counts from one sweep.
    pub fn landweber_coefficients(&self, values: &[f64], iterations: &[u64]) -> Result<Vec<DVector<f64>>> {
        let rhs = self.weighted_rhs(values)?;
        Ok(self
            .operator
            .landweber_path(&rhs, iterations)
            .into_iter()
            .map(|u| self.unweight(u))
            .collect())
    }

    /// Condition report of the regularized matrix `1/g_λ(Ψ)` on its retained
    /// spectrum, or of Ψ itself when `filter` is `None`.
    pub fn conditioning(&self, filter: Option<&FilterSpec>) -> Result<Option<ConditioningReport>> {
        if self.points.len() > DIAGNOSTICS_LIMIT {
            return Ok(None);
        }
        let values = match filter {
            Some(f) => self.operator.effective_spectrum(f)?,
            None => self.operator.eig()?.eigenvalues.iter().copied().collect(),
        };
        Ok(Some(ConditioningReport::from_spectrum(values, self.clamped)))
    }

    pub fn model(&self, coefficients: DVector<f64>, filter: &FilterSpec, diagnostics: bool) -> Result<FittedModel> {
        Ok(FittedModel {
            kernel: self.kernel,
            centers: self.points.clone(),
            coefficients,
            method: Method::Wsf(*filter),
            diagnostics: if diagnostics {
                self.conditioning(Some(filter))?
            } else {
                None
            },
            ill_conditioned: false,
        })
    }

    pub fn fit(&self, values: &[f64], filter: &FilterSpec) -> Result<FittedModel> {
        let a = self.coefficients(values, filter)?;
        self.model(a, filter, true)
    }
}

fn check_len(points: &PointSet, values: &[f64]) -> Result<()> {
    if values.len() != points.len() {
        return Err(WsfError::LengthMismatch {
            expected: points.len(),
            got: values.len(),
        });
    }
    Ok(())
}

/// Kernel interpolant `a = Φ⁻¹ y`.
pub fn fit_ki(data: &LabeledData, kernel: &KernelSpec) -> Result<FittedModel> {
    InterpolationSystem::new(*kernel, data.points.clone())?.fit(&data.values)
}

/// Weighted spectral filter estimator.
pub fn fit_wsf(
    data: &LabeledData,
    kernel: &KernelSpec,
    rule: &QuadratureRule,
    filter: &FilterSpec,
) -> Result<FittedModel> {
    if rule.points != data.points {
        return Err(WsfError::PointSetMismatch);
    }
    WeightedSystem::new(*kernel, rule)?.fit(&data.values, filter)
}

/// The same estimator fed `f*(x_i)` in place of `y_i`.
pub fn fit_wsf_noise_free(
    data: &LabeledData,
    kernel: &KernelSpec,
    rule: &QuadratureRule,
    filter: &FilterSpec,
) -> Result<FittedModel> {
    fit_wsf(&data.noise_free()?, kernel, rule, filter)
}

/// Writes `x y z a` rows under `# kernel=`, `# method=` and `# param=` headers.
pub fn write_model(path: &Path, model: &FittedModel) -> Result<()> {
    let mut meta = vec![
        ("kernel", model.kernel.family.to_string()),
        ("support", model.kernel.support_radius.to_string()),
        ("method", model.method.to_string()),
    ];
    if let Some(p) = model.method.param() {
        meta.push(("param", p.to_string()));
    }
    let a: Vec<f64> = model.coefficients.iter().copied().collect();
    io::write_text(path, &io::format_rows(&meta, &model.centers, &[&a]))
}

pub fn read_model(path: &Path) -> Result<FittedModel> {
    let table = io::read_table(path, 4)?;
    let bad = |message: &str| WsfError::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: message.into(),
    };
    let family: KernelFamily = table
        .meta("kernel")
        .ok_or_else(|| bad("missing `# kernel=` header"))?
        .parse()?;
    let support = match table.meta("support") {
        Some(s) => s.parse().map_err(|_| bad("bad `# support=` header"))?,
        None => 1.0,
    };
    let param = match table.meta("param") {
        Some(p) => Some(p.parse::<f64>().map_err(|_| bad("bad `# param=` header"))?),
        None => None,
    };
    let method = Method::parse(
        table.meta("method").ok_or_else(|| bad("missing `# method=` header"))?,
        param,
    )?;
    let xyz: Vec<[f64; 3]> = table.rows.iter().map(|r| [r[0], r[1], r[2]]).collect();
    Ok(FittedModel {
        kernel: KernelSpec::new(family, support)?,
        centers: PointSet::from_xyz(&xyz)?,
        coefficients: DVector::from_iterator(xyz.len(), table.rows.iter().map(|r| r[3])),
        method,
        diagnostics: None,
        ill_conditioned: false,
    })
}
