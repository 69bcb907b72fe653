//! Weighted hold-out cross-validation for the filter parameter.
//!
//! Candidates are fitted on the training part; each is scored on the
//! validation part by `Σ w_i (f(x_i) − y_i)²` with the validation points'
//! own quadrature weights, and the minimizer is kept.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, WsfError};
use crate::estimator::{EvaluationPlan, LabeledData, WeightedSystem};
use crate::filters::{FilterFamily, FilterSpec};
use crate::geometry::PointSet;
use crate::kernels::KernelSpec;
use crate::quadrature::{best_rule, degree_hint, QuadratureRule};

/// Candidate filter parameters, largest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid {
    pub family: FilterFamily,
    pub candidates: Vec<f64>,
}

impl ParameterGrid {
    /// Validates positivity and sorts descending. Landweber values are
    /// snapped to `1/l` and duplicates in `l` removed.
    pub fn new(family: FilterFamily, candidates: Vec<f64>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(WsfError::invalid("parameter grid is empty"));
        }
        let mut specs = candidates
            .into_iter()
            .map(|c| FilterSpec::new(family, c).map(|s| s.parameter))
            .collect::<Result<Vec<f64>>>()?;
        specs.sort_by(|a, b| b.total_cmp(a));
        if family == FilterFamily::Landweber {
            specs.dedup();
        }
        Ok(ParameterGrid {
            family,
            candidates: specs,
        })
    }

    /// `{1, 1/2, …, 1/⌈√n⌉}` on the normalized spectrum `σ/κ`: Tikhonov and
    /// cut-off parameters are `κ/j`, Landweber runs `l = j` steps.
    pub fn harmonic(family: FilterFamily, n: usize, kappa: f64) -> Result<Self> {
        let m = (n as f64).sqrt().ceil().max(1.0) as usize;
        Self::relative(family, kappa, &(1..=m).map(|j| 1.0 / j as f64).collect::<Vec<_>>())
    }

    /// Candidates given as fractions `r` of κ (Landweber: `l = round(1/r)`).
    pub fn relative(family: FilterFamily, kappa: f64, ratios: &[f64]) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(WsfError::invalid("κ must be positive"));
        }
        let values = ratios
            .iter()
            .map(|&r| match family {
                FilterFamily::Landweber => r,
                _ => r * kappa,
            })
            .collect();
        Self::new(family, values)
    }

    pub fn specs(&self) -> Vec<FilterSpec> {
        self.candidates
            .iter()
            .map(|&c| FilterSpec {
                family: self.family,
                parameter: c,
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub chosen_lambda: f64,
    pub chosen_index: usize,
    pub candidates: Vec<f64>,
    /// Weighted validation error per candidate; `NaN` where the fit failed.
    pub weighted_scores: Vec<f64>,
    pub train_size: usize,
    pub val_size: usize,
}

impl CvResult {
    pub fn chosen_spec(&self, family: FilterFamily) -> FilterSpec {
        FilterSpec {
            family,
            parameter: self.chosen_lambda,
        }
    }
}

/// Seeded random split into `round(fraction·n)` training and the rest validation.
pub fn split_data(data: &LabeledData, fraction: f64, seed: u64) -> Result<(LabeledData, LabeledData)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(WsfError::invalid("split fraction must lie in (0, 1)"));
    }
    let n = data.len();
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(WsfError::invalid(format!(
            "split of {n} points at {fraction} leaves an empty part"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (tr, va) = idx.split_at(n_train);
    Ok((data.select(tr)?, data.select(va)?))
}

/// The highest-degree strictly positive rule found from the `floor(c/h)` hint.
pub fn quadrature_for(points: &PointSet, degree: Option<usize>) -> Result<QuadratureRule> {
    let hint = match degree {
        Some(s) => s,
        None => degree_hint(points, 1.0)?,
    };
    best_rule(points, hint)
}

/// Coefficient vectors for every candidate on a prepared weighted system.
/// Landweber candidates share one iteration sweep.
pub fn candidate_coefficients(
    system: &WeightedSystem,
    values: &[f64],
    grid: &ParameterGrid,
) -> Vec<Result<DVector<f64>>> {
    let specs = grid.specs();
    if grid.family == FilterFamily::Landweber {
        let ls: Vec<u64> = specs.iter().map(|s| s.iterations()).collect();
        return match system.landweber_coefficients(values, &ls) {
            Ok(all) => all.into_iter().map(Ok).collect(),
            Err(e) => {
                let msg = e.to_string();
                specs.iter().map(|_| Err(WsfError::invalid(msg.clone()))).collect()
            }
        };
    }
    if grid.family == FilterFamily::Cutoff {
        // one decomposition serves every candidate
        if let Err(e) = system.operator().eig() {
            let msg = e.to_string();
            return specs.iter().map(|_| Err(WsfError::invalid(msg.clone()))).collect();
        }
    }
    map_candidates(&specs, |s| system.coefficients(values, s))
}

#[cfg(feature = "parallel")]
fn map_candidates<F>(specs: &[FilterSpec], f: F) -> Vec<Result<DVector<f64>>>
where
    F: Fn(&FilterSpec) -> Result<DVector<f64>> + Sync + Send,
{
    use rayon::prelude::*;
    specs.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_candidates<F>(specs: &[FilterSpec], f: F) -> Vec<Result<DVector<f64>>>
where
    F: Fn(&FilterSpec) -> Result<DVector<f64>>,
{
    specs.iter().map(f).collect()
}

/// Index of the smallest finite score; ties go to the earlier (larger) candidate.
pub fn argmin_score(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_finite() && best.is_none_or(|b| s < scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// `Σ w_i (p_i − y_i)²`.
pub fn weighted_score(predictions: &[f64], targets: &[f64], weights: &[f64]) -> f64 {
    predictions
        .iter()
        .zip(targets)
        .zip(weights)
        .map(|((p, y), w)| w * (p - y) * (p - y))
        .sum()
}

/// Scores precomputed candidate coefficients against a validation rule.
pub fn score_candidates(
    system: &WeightedSystem,
    coefficients: &[Result<DVector<f64>>],
    grid: &ParameterGrid,
    val: &LabeledData,
    val_rule: &QuadratureRule,
    kernel: &KernelSpec,
) -> Result<CvResult> {
    if val_rule.points != val.points {
        return Err(WsfError::PointSetMismatch);
    }
    let plan = EvaluationPlan::new(kernel, system.points(), &val.points);
    let scores: Vec<f64> = coefficients
        .iter()
        .map(|c| match c {
            Ok(a) => weighted_score(&plan.apply(a), &val.values, &val_rule.weights),
            Err(_) => f64::NAN,
        })
        .collect();
    let chosen_index = argmin_score(&scores).ok_or(WsfError::AllCandidatesFailed)?;
    Ok(CvResult {
        chosen_lambda: grid.candidates[chosen_index],
        chosen_index,
        candidates: grid.candidates.clone(),
        weighted_scores: scores,
        train_size: system.points().len(),
        val_size: val.len(),
    })
}

/// Fits every candidate on `train` with a rule computed on the training
/// points and returns the weighted-validation minimizer.
pub fn select_parameter(
    train: &LabeledData,
    val: &LabeledData,
    val_rule: &QuadratureRule,
    kernel: &KernelSpec,
    grid: &ParameterGrid,
) -> Result<CvResult> {
    let rule = quadrature_for(&train.points, None)?;
    let system = WeightedSystem::new(*kernel, &rule)?;
    select_with_system(&system, &train.values, val, val_rule, kernel, grid)
}

pub fn select_with_system(
    system: &WeightedSystem,
    train_values: &[f64],
    val: &LabeledData,
    val_rule: &QuadratureRule,
    kernel: &KernelSpec,
    grid: &ParameterGrid,
) -> Result<CvResult> {
    let coefficients = candidate_coefficients(system, train_values, grid);
    score_candidates(system, &coefficients, grid, val, val_rule, kernel)
}

/// Seeded shuffle into `k` folds of near-equal size.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(WsfError::invalid(format!("cannot make {k} folds from {n} points")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in idx.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    Ok(folds)
}

/// Plain k-fold cross-validation with unweighted mean-square scoring, for
/// data without a usable validation design. Candidates are taken relative to
/// each fold's own κ so the grid stays meaningful across folds.
pub fn kfold_select(
    data: &LabeledData,
    folds: usize,
    seed: u64,
    kernel: &KernelSpec,
    family: FilterFamily,
    ratios: &[f64],
    degree: Option<usize>,
) -> Result<(f64, Vec<f64>)> {
    let parts = kfold_indices(data.len(), folds, seed)?;
    let mut totals = vec![0.0; ratios.len()];
    for (f, held) in parts.iter().enumerate() {
        let train_idx: Vec<usize> = parts
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, p)| p.iter().copied())
            .collect();
        let train = data.select(&train_idx)?;
        let test = data.select(held)?;
        let rule = quadrature_for(&train.points, degree)?;
        let system = WeightedSystem::new(*kernel, &rule)?;
        let kappa = system.kappa();
        let plan = EvaluationPlan::new(kernel, &train.points, &test.points);
        for (j, &r) in ratios.iter().enumerate() {
            let grid = ParameterGrid::relative(family, kappa, &[r])?;
            let a = system.coefficients(&train.values, &grid.specs()[0]);
            totals[j] += match a {
                Ok(a) => {
                    let p = plan.apply(&a);
                    p.iter().zip(&test.values).map(|(p, y)| (p - y) * (p - y)).sum::<f64>()
                }
                Err(_) => f64::NAN,
            };
        }
    }
    let scores: Vec<f64> = totals.iter().map(|t| t / data.len() as f64).collect();
    let best = argmin_score(&scores).ok_or(WsfError::AllCandidatesFailed)?;
    Ok((ratios[best], scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_random;
    use crate::kernels::target_function;
    use crate::quadrature::compute_weights;

    fn data(n: usize, seed: u64) -> LabeledData {
        let pts = sample_random(n, seed).unwrap();
        let y: Vec<f64> = pts.iter().map(target_function).collect();
        LabeledData::new(pts, y).unwrap()
    }

    #[test]
    fn grid_construction() {
        let g = ParameterGrid::new(FilterFamily::Tikhonov, vec![0.1, 1.0, 0.5]).unwrap();
        assert_eq!(g.candidates, vec![1.0, 0.5, 0.1]);
        assert!(ParameterGrid::new(FilterFamily::Cutoff, vec![]).is_err());
        assert!(ParameterGrid::new(FilterFamily::Cutoff, vec![0.1, -1.0]).is_err());
        let l = ParameterGrid::new(FilterFamily::Landweber, vec![0.5, 0.49, 0.1]).unwrap();
        assert_eq!(
            l.specs().iter().map(|s| s.iterations()).collect::<Vec<_>>(),
            vec![2, 10]
        );
        let h = ParameterGrid::harmonic(FilterFamily::Tikhonov, 100, 2.0).unwrap();
        assert_eq!(h.len(), 10);
        assert_eq!(h.candidates[0], 2.0);
        assert!((h.candidates[9] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = data(100, 1);
        let (a, b) = split_data(&d, 0.5, 7).unwrap();
        assert_eq!((a.len(), b.len()), (50, 50));
        let (a2, _) = split_data(&d, 0.5, 7).unwrap();
        assert_eq!(a, a2);
        assert!(split_data(&data(10, 2), 0.999, 1).is_err());
        assert!(split_data(&d, 1.0, 1).is_err());
    }

    #[test]
    fn argmin_prefers_larger_parameter_on_ties() {
        assert_eq!(argmin_score(&[2.0, 1.0, 1.0]), Some(1));
        assert_eq!(argmin_score(&[f64::NAN, 3.0]), Some(1));
        assert_eq!(argmin_score(&[f64::NAN]), None);
    }

    #[test]
    fn exact_candidate_wins() {
        // validation on the training nodes with clean values: the weakest
        // filter reproduces them best
        let d = data(80, 3);
        let rule = compute_weights(&d.points, 2).unwrap();
        let k = KernelSpec::default();
        let system = WeightedSystem::new(k, &rule).unwrap();
        let grid = ParameterGrid::relative(FilterFamily::Cutoff, system.kappa(), &[0.5, 1e-14]).unwrap();
        let cv = select_with_system(&system, &d.values, &d, &rule, &k, &grid).unwrap();
        assert_eq!(cv.chosen_index, 1);
        assert!(cv.weighted_scores[1] < 1e-16);
    }

    #[test]
    fn weight_scaling_leaves_choice_unchanged() {
        let tr = data(120, 4);
        let va = data(90, 5);
        let k = KernelSpec::default();
        let val_rule = compute_weights(&va.points, 2).unwrap();
        let grid = ParameterGrid::new(FilterFamily::Tikhonov, vec![1e-1, 1e-2, 1e-3, 1e-4]).unwrap();
        let a = select_parameter(&tr, &va, &val_rule, &k, &grid).unwrap();
        let mut scaled = val_rule.clone();
        scaled.weights.iter_mut().for_each(|w| *w *= 3.0);
        let b = select_parameter(&tr, &va, &scaled, &k, &grid).unwrap();
        assert_eq!(a.chosen_lambda, b.chosen_lambda);
        for (x, y) in a.weighted_scores.iter().zip(&b.weighted_scores) {
            assert!((3.0 * x - y).abs() <= 1e-12 * y.abs());
        }
        let c = select_parameter(&tr, &va, &val_rule, &k, &grid).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn duplicate_candidates_tie_on_the_same_value() {
        let tr = data(60, 6);
        let va = data(50, 7);
        let k = KernelSpec::default();
        let val_rule = compute_weights(&va.points, 1).unwrap();
        let grid = ParameterGrid::new(FilterFamily::Tikhonov, vec![1e-3, 1e-3]).unwrap();
        let cv = select_parameter(&tr, &va, &val_rule, &k, &grid).unwrap();
        assert_eq!(cv.chosen_index, 0);
        assert_eq!(cv.weighted_scores[0], cv.weighted_scores[1]);
    }

    #[test]
    fn folds_partition_indices() {
        let folds = kfold_indices(23, 5, 1).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(folds.iter().all(|f| f.len() == 4 || f.len() == 5));
        assert!(kfold_indices(3, 5, 1).is_err());
    }
}
