//! Spectral filters `g_λ` acting on the weighted kernel matrix Ψ.
//!
//! Three families are provided: Tikhonov `1/(σ + μ)`, Landweber
//! `τ Σ_{k=0}^{l} (1 − τσ)^k` with `λ = 1/l`, and spectral cut-off
//! `1/σ` for `σ ≥ ν`, zero below.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, WsfError};
use crate::numerics::{largest_eigenvalue, solve_spd, sym_eig, SymmetricEigenDecomposition};

/// Relative tolerance of the power iteration that estimates κ.
pub const KAPPA_TOLERANCE: f64 = 1e-8;

/// Safety margin applied to the estimated κ before taking `τ = 1/κ`, so that
/// `τ ≤ 1/κ` survives the estimate's error.
const KAPPA_MARGIN: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterFamily {
    Tikhonov,
    Landweber,
    Cutoff,
}

impl FilterFamily {
    pub const ALL: [FilterFamily; 3] = [FilterFamily::Tikhonov, FilterFamily::Landweber, FilterFamily::Cutoff];

    pub fn name(self) -> &'static str {
        match self {
            FilterFamily::Tikhonov => "tikhonov",
            FilterFamily::Landweber => "landweber",
            FilterFamily::Cutoff => "cutoff",
        }
    }

    /// Largest `v` for which the residual bound holds.
    pub fn qualification(self) -> f64 {
        match self {
            FilterFamily::Tikhonov => 1.0,
            FilterFamily::Landweber | FilterFamily::Cutoff => f64::INFINITY,
        }
    }

    /// A constant `b` with `|g_λ| ≤ b/λ` and `|g_λ σ| ≤ b` for every admissible λ.
    pub fn stability_constant_b(self) -> f64 {
        match self {
            FilterFamily::Tikhonov | FilterFamily::Cutoff => 1.0,
            // l + 1 terms against λ = 1/l: sup λ|g| = 1 + 1/l
            FilterFamily::Landweber => 2.0,
        }
    }
}

impl fmt::Display for FilterFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterFamily {
    type Err = WsfError;

    fn from_str(s: &str) -> Result<Self> {
        FilterFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| WsfError::invalid(format!("unknown filter {s:?}")))
    }
}

/// A filter family with its parameter.
///
/// `parameter` is μ for Tikhonov and ν for cut-off, both in the units of the
/// spectrum of Ψ. For Landweber it is `1/l`; `l = 0` is stored as `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub family: FilterFamily,
    pub parameter: f64,
}

impl FilterSpec {
    pub fn new(family: FilterFamily, parameter: f64) -> Result<Self> {
        if !(parameter > 0.0) || parameter.is_nan() {
            return Err(WsfError::invalid(format!(
                "filter parameter must be positive, got {parameter}"
            )));
        }
        match family {
            FilterFamily::Landweber if parameter.is_finite() => Ok(Self::landweber((1.0 / parameter).round() as u64)),
            FilterFamily::Landweber => Ok(Self::landweber(0)),
            _ if parameter.is_finite() => Ok(FilterSpec { family, parameter }),
            _ => Err(WsfError::invalid("filter parameter must be finite")),
        }
    }

    pub fn tikhonov(mu: f64) -> Result<Self> {
        Self::new(FilterFamily::Tikhonov, mu)
    }

    pub fn cutoff(nu: f64) -> Result<Self> {
        Self::new(FilterFamily::Cutoff, nu)
    }

    pub fn landweber(iterations: u64) -> Self {
        let parameter = if iterations == 0 {
            f64::INFINITY
        } else {
            1.0 / iterations as f64
        };
        FilterSpec {
            family: FilterFamily::Landweber,
            parameter,
        }
    }

    /// `l = round(1/λ)`; meaningful for Landweber only.
    pub fn iterations(&self) -> u64 {
        if self.parameter.is_infinite() {
            0
        } else {
            (1.0 / self.parameter).round() as u64
        }
    }

    pub fn qualification(&self) -> f64 {
        self.family.qualification()
    }

    pub fn stability_constant_b(&self) -> f64 {
        self.family.stability_constant_b()
    }

    /// The parameter on the scale of the spectrum: μ, ν, or `κ/l`.
    pub fn spectral_level(&self, kappa: f64) -> f64 {
        match self.family {
            FilterFamily::Landweber => kappa * self.parameter,
            _ => self.parameter,
        }
    }

    /// Human-readable tag such as `tikhonov(1e-4)` or `landweber(l=200)`.
    pub fn label(&self) -> String {
        match self.family {
            FilterFamily::Landweber => format!("landweber(l={})", self.iterations()),
            f => format!("{}({:e})", f.name(), self.parameter),
        }
    }
}

/// `g_λ(σ)` for any real σ. Nonpositive σ (round-off in a PSD spectrum) gets
/// the filter's limit at zero.
fn filter_value(spec: &FilterSpec, sigma: f64, tau: f64) -> f64 {
    match spec.family {
        FilterFamily::Tikhonov => 1.0 / (sigma.max(0.0) + spec.parameter),
        FilterFamily::Cutoff => {
            if sigma >= spec.parameter && sigma > 0.0 {
                1.0 / sigma
            } else {
                0.0
            }
        }
        FilterFamily::Landweber => {
            let terms = spec.iterations() as f64 + 1.0;
            let x = tau * sigma;
            if x <= 0.0 {
                return tau * terms;
            }
            if x >= 1.0 {
                // (1 − τσ)^k with τσ = 1 leaves the k = 0 term only
                return if x == 1.0 {
                    tau
                } else {
                    landweber_sum(x, spec.iterations()) * tau
                };
            }
            // 1 − (1 − x)^{l+1}, accurate for small x
            let tail = -(terms * (-x).ln_1p()).exp_m1();
            tail / sigma
        }
    }
}

fn landweber_sum(x: f64, l: u64) -> f64 {
    let q = 1.0 - x;
    let mut acc = 0.0;
    let mut p = 1.0;
    for _ in 0..=l {
        acc += p;
        p *= q;
    }
    acc
}

/// Scalar filter value. For Landweber the result is `τ Σ_{k=0}^{l} (1 − τσ)^k`.
pub fn filter_scalar(spec: &FilterSpec, sigma: f64, kappa: f64, tau: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(WsfError::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if spec.family == FilterFamily::Landweber && !(tau > 0.0 && tau * kappa <= 1.0) {
        return Err(WsfError::invalid(format!(
            "landweber step {tau} outside (0, 1/κ] for κ = {kappa}"
        )));
    }
    Ok(filter_value(spec, sigma, tau))
}

/// Ψ together with lazily computed κ and eigendecomposition, so repeated
/// filter applications on the same matrix share the expensive pieces.
#[derive(Debug)]
pub struct SpectralOperator {
    psi: DMatrix<f64>,
    kappa: OnceLock<f64>,
    eig: OnceLock<SymmetricEigenDecomposition>,
}

impl SpectralOperator {
    pub fn new(psi: DMatrix<f64>) -> Result<Self> {
        if !psi.is_square() {
            return Err(WsfError::invalid("matrix is not square"));
        }
        Ok(SpectralOperator {
            psi,
            kappa: OnceLock::new(),
            eig: OnceLock::new(),
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn len(&self) -> usize {
        self.psi.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.nrows() == 0
    }

    /// Estimated κ, the largest eigenvalue. Taken from the eigendecomposition
    /// when one has already been computed.
    pub fn kappa(&self) -> f64 {
        *self.kappa.get_or_init(|| match self.eig.get() {
            Some(e) => e.max().max(0.0),
            None => largest_eigenvalue(&self.psi, KAPPA_TOLERANCE).unwrap_or(0.0),
        })
    }

    /// Landweber step `τ = 1/κ̂`, with κ̂ slightly inflated.
    pub fn tau(&self) -> f64 {
        let k = self.kappa();
        if k > 0.0 {
            1.0 / (k * (1.0 + KAPPA_MARGIN))
        } else {
            1.0
        }
    }

    pub fn eig(&self) -> Result<&SymmetricEigenDecomposition> {
        if let Some(e) = self.eig.get() {
            return Ok(e);
        }
        let e = sym_eig(&self.psi)?;
        Ok(self.eig.get_or_init(|| e))
    }

    pub fn has_eig(&self) -> bool {
        self.eig.get().is_some()
    }

    /// `g_λ(Ψ) rhs` by the family's own realization: a shifted Cholesky solve,
    /// the Landweber recursion, or the truncated eigendecomposition.
    pub fn apply(&self, spec: &FilterSpec, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        if rhs.len() != self.len() {
            return Err(WsfError::LengthMismatch {
                expected: self.len(),
                got: rhs.len(),
            });
        }
        match spec.family {
            FilterFamily::Tikhonov => Ok(solve_spd(&self.psi, rhs, spec.parameter)?.x),
            FilterFamily::Landweber => {
                let l = spec.iterations();
                Ok(self.landweber_path(rhs, &[l]).pop().expect("one snapshot"))
            }
            FilterFamily::Cutoff => {
                let eig = self.eig()?;
                Ok(eig.apply(rhs, |s| filter_value(spec, s, 1.0)))
            }
        }
    }

    /// Same result computed through the eigendecomposition, for any family.
    pub fn apply_spectral(&self, spec: &FilterSpec, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let tau = self.tau();
        let eig = self.eig()?;
        Ok(eig.apply(rhs, |s| filter_value(spec, s, tau)))
    }

    /// Landweber iterates `u_l` for every requested `l`, from a single pass of
    /// `u_0 = τ rhs`, `u_{k+1} = u_k + τ (rhs − Ψ u_k)`. Output follows the
    /// order of `iterations`.
    pub fn landweber_path(&self, rhs: &DVector<f64>, iterations: &[u64]) -> Vec<DVector<f64>> {
        let tau = self.tau();
        let mut order: Vec<usize> = (0..iterations.len()).collect();
        order.sort_by_key(|&i| iterations[i]);
        let mut out = vec![DVector::zeros(0); iterations.len()];
        let mut u = rhs * tau;
        let mut step = 0u64;
        let mut work = DVector::zeros(rhs.len());
        for &i in &order {
            while step < iterations[i] {
                work.gemv(-1.0, &self.psi, &u, 0.0);
                work += rhs;
                u.axpy(tau, &work, 1.0);
                step += 1;
            }
            out[i] = u.clone();
        }
        out
    }

    /// Spectrum of the regularized matrix that the filter inverts, `1/g_λ(σ)`,
    /// restricted to eigenvalues the filter keeps.
    pub fn effective_spectrum(&self, spec: &FilterSpec) -> Result<Vec<f64>> {
        let tau = self.tau();
        let eig = self.eig()?;
        Ok(eig
            .eigenvalues
            .iter()
            .map(|&s| filter_value(spec, s, tau))
            .filter(|&g| g > 0.0)
            .map(|g| 1.0 / g)
            .collect())
    }
}

/// `g_λ(Ψ) rhs` for a one-off matrix. See [`SpectralOperator::apply`].
pub fn apply_filter(spec: &FilterSpec, psi: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    SpectralOperator::new(psi.clone())?.apply(spec, rhs)
}

/// Grid suprema for the high-pass filter conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterConditionReport {
    /// `max |g_λ(σ)|·λ`, with λ on the scale of σ.
    pub sup_g_times_lambda: f64,
    /// `max |g_λ(σ) σ|`.
    pub sup_g_sigma: f64,
    /// `(v, max |1 − g_λ(σ)σ| σ^v / λ^v)`.
    pub residual_bounds: Vec<(f64, f64)>,
}

impl FilterConditionReport {
    /// Smallest `b` compatible with both stability conditions on the grid.
    pub fn b(&self) -> f64 {
        self.sup_g_times_lambda.max(self.sup_g_sigma)
    }
}

/// Evaluates the filter conditions on `grid_size` log-spaced values of σ in
/// `(κ·1e-12, κ]`, with `τ = 1/κ` for Landweber.
pub fn check_filter_conditions(spec: &FilterSpec, kappa: f64, grid_size: usize) -> Result<FilterConditionReport> {
    if !(kappa > 0.0) || grid_size < 2 {
        return Err(WsfError::invalid("need κ > 0 and at least two grid points"));
    }
    let tau = 1.0 / kappa;
    let lambda = spec.spectral_level(kappa);
    let mut vs = vec![0.0, 0.5, 1.0];
    if spec.family != FilterFamily::Tikhonov {
        vs.push(2.0);
    }
    let (lo, hi) = ((kappa * 1e-12).ln(), kappa.ln());
    let mut report = FilterConditionReport {
        sup_g_times_lambda: 0.0,
        sup_g_sigma: 0.0,
        residual_bounds: vs.iter().map(|&v| (v, 0.0)).collect(),
    };
    for j in 1..=grid_size {
        let sigma = (lo + (hi - lo) * j as f64 / grid_size as f64).exp();
        let g = filter_scalar(spec, sigma, kappa, tau)?;
        report.sup_g_times_lambda = report.sup_g_times_lambda.max(g.abs() * lambda);
        report.sup_g_sigma = report.sup_g_sigma.max((g * sigma).abs());
        let r = (1.0 - g * sigma).abs();
        for (v, bound) in report.residual_bounds.iter_mut() {
            *bound = bound.max(r * (sigma / lambda).powf(*v));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_psd(n: usize, seed: u64, floor: f64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let mut m = &a * a.transpose() / n as f64;
        for i in 0..n {
            m[(i, i)] += floor;
        }
        m
    }

    fn random_vec(n: usize, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn scalar_examples() {
        let t = FilterSpec::tikhonov(0.1).unwrap();
        assert_relative_eq!(filter_scalar(&t, 0.9, 1.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        let l0 = FilterSpec::landweber(0);
        assert_eq!(filter_scalar(&l0, 0.3, 1.0, 0.7).unwrap(), 0.7);
        let c = FilterSpec::cutoff(0.5).unwrap();
        assert_eq!(filter_scalar(&c, 0.4, 1.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(filter_scalar(&c, 0.6, 1.0, 1.0).unwrap(), 1.0 / 0.6);
        // τ above 1/κ is rejected for landweber only
        assert!(filter_scalar(&l0, 0.3, 1.0, 1.5).is_err());
        assert!(filter_scalar(&t, 0.3, 1.0, 1.5).is_ok());
        assert!(filter_scalar(&t, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn landweber_closed_form_matches_sum() {
        for &l in &[1u64, 5, 40, 300] {
            let spec = FilterSpec::landweber(l);
            for &x in &[1e-9, 1e-4, 0.01, 0.3, 0.99, 1.0] {
                let sigma = x * 2.0;
                let tau = 0.5;
                let direct = tau * landweber_sum(tau * sigma, l);
                let g = filter_scalar(&spec, sigma, 2.0, tau).unwrap();
                assert_relative_eq!(g, direct, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn spec_parameters() {
        let l = FilterSpec::new(FilterFamily::Landweber, 0.01).unwrap();
        assert_eq!(l.iterations(), 100);
        assert_eq!(FilterSpec::new(FilterFamily::Landweber, 0.3).unwrap().iterations(), 3);
        assert!(FilterSpec::tikhonov(0.0).is_err());
        assert!(FilterSpec::cutoff(-1.0).is_err());
        assert_eq!("cutoff".parse::<FilterFamily>().unwrap(), FilterFamily::Cutoff);
        assert_eq!(FilterFamily::Tikhonov.qualification(), 1.0);
        assert!(FilterFamily::Landweber.qualification().is_infinite());
    }

    #[test]
    fn realizations_match_spectral_calculus() {
        let psi = random_psd(20, 3, 1e-3);
        let rhs = random_vec(20, 4);
        let op = SpectralOperator::new(psi).unwrap();
        let kappa = op.kappa();
        for spec in [
            FilterSpec::tikhonov(1e-2).unwrap(),
            FilterSpec::landweber(37),
            FilterSpec::cutoff(0.3 * kappa).unwrap(),
        ] {
            let direct = op.apply(&spec, &rhs).unwrap();
            let eig = op.eig().unwrap();
            let tau = op.tau();
            let oracle = eig.apply(&rhs, |s| filter_scalar(&spec, s, kappa, tau).unwrap());
            assert!((direct - &oracle).norm() <= 1e-8 * oracle.norm().max(1.0), "{spec:?}");
        }
    }

    #[test]
    fn filters_approach_inversion() {
        let psi = random_psd(12, 9, 0.05);
        let rhs = random_vec(12, 10);
        let op = SpectralOperator::new(psi.clone()).unwrap();
        let exact = psi.clone().cholesky().unwrap().solve(&rhs);
        let smin = op.eig().unwrap().min();
        for spec in [
            FilterSpec::tikhonov(1e-12).unwrap(),
            FilterSpec::cutoff(smin / 2.0).unwrap(),
            FilterSpec::landweber(10_000),
        ] {
            let x = op.apply(&spec, &rhs).unwrap();
            assert!((x - &exact).norm() <= 1e-4 * exact.norm(), "{spec:?}");
        }
    }

    #[test]
    fn edge_cases() {
        let psi = random_psd(8, 1, 0.1);
        let rhs = random_vec(8, 2);
        let op = SpectralOperator::new(psi).unwrap();
        let nu = 2.0 * op.kappa();
        assert_eq!(op.apply(&FilterSpec::cutoff(nu).unwrap(), &rhs).unwrap().norm(), 0.0);
        let u0 = op.apply(&FilterSpec::landweber(0), &rhs).unwrap();
        assert!((u0 - &rhs * op.tau()).norm() < 1e-15);
        assert!(op.apply(&FilterSpec::landweber(1), &random_vec(3, 0)).is_err());
    }

    #[test]
    fn landweber_path_is_nested() {
        let psi = random_psd(15, 5, 0.01);
        let rhs = random_vec(15, 6);
        let op = SpectralOperator::new(psi).unwrap();
        let path = op.landweber_path(&rhs, &[50, 3, 0, 50]);
        for (l, u) in [50u64, 3, 0, 50].iter().zip(&path) {
            let single = op.apply(&FilterSpec::landweber(*l), &rhs).unwrap();
            assert_eq!(&single, u);
        }
    }

    #[test]
    fn filter_conditions() {
        let kappa = 0.04;
        for r in [1.0, 0.1, 1e-3, 1e-6] {
            let t = check_filter_conditions(&FilterSpec::tikhonov(r * kappa).unwrap(), kappa, 10_000).unwrap();
            assert!(t.b() <= 1.0 + 1e-12);
            let c = check_filter_conditions(&FilterSpec::cutoff(r * kappa).unwrap(), kappa, 10_000).unwrap();
            assert!(c.b() <= 1.0 + 1e-12);
            for (_, bound) in t.residual_bounds.iter().chain(&c.residual_bounds) {
                assert!(bound.is_finite() && *bound <= 1.0 + 1e-12);
            }
        }
        for l in [1u64, 10, 1000] {
            let rep = check_filter_conditions(&FilterSpec::landweber(l), kappa, 10_000).unwrap();
            assert!(rep.sup_g_sigma <= 1.0 + 1e-12);
            let expected = 1.0 + 1.0 / l as f64;
            assert!(rep.sup_g_times_lambda <= expected + 1e-9);
            assert!(rep.sup_g_times_lambda >= expected * (1.0 - 1e-6));
            assert!(rep.residual_bounds.iter().all(|(_, b)| b.is_finite()));
        }
    }

    #[test]
    fn effective_condition_number_decreases_with_parameter() {
        let psi = random_psd(30, 12, 1e-6);
        let op = SpectralOperator::new(psi).unwrap();
        let kappa = op.kappa();
        let cond = |spec: FilterSpec| {
            let s = op.effective_spectrum(&spec).unwrap();
            let (lo, hi) = s
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
            hi / lo
        };
        let mut last = [f64::INFINITY; 3];
        for r in [1e-6, 1e-4, 1e-2, 0.5] {
            let specs = [
                FilterSpec::tikhonov(r * kappa).unwrap(),
                FilterSpec::new(FilterFamily::Landweber, r).unwrap(),
                FilterSpec::cutoff(r * kappa).unwrap(),
            ];
            for (k, spec) in specs.into_iter().enumerate() {
                let c = cond(spec);
                assert!(c <= last[k] * (1.0 + 1e-12), "{spec:?}: {c} > {}", last[k]);
                last[k] = c;
            }
        }
    }
}
