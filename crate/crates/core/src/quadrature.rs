//! Positive quadrature rules on scattered nodes of S².
//!
//! A rule of order `s` integrates every spherical polynomial of degree `≤ s`
//! exactly against the normalized measure. Equal weights do this for a
//! t-design; for general nodes the weights come from a nonnegative
//! least-squares solve of the moment system `Σ_i w_i Y_{k,ℓ}(x_i) = δ_{k0}`.

use std::path::Path;

use nalgebra::DVector;

use crate::error::{Result, WsfError};
use crate::geometry::{mesh_norm, PointSet};
use crate::harmonics::{basis_len, harmonic_basis, HarmonicEvaluator};
use crate::io;
use crate::numerics::nnls_from;

/// Absolute tolerance on the moment residual.
pub const EXACTNESS_TOLERANCE: f64 = 1e-8;

/// Weights that NNLS drives to zero are lifted to this value.
pub const CLAMPED_WEIGHT: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: PointSet,
    pub weights: Vec<f64>,
    pub degree_s: usize,
    /// Nodes whose solver weight was zero and got lifted to [`CLAMPED_WEIGHT`].
    pub clamped_count: usize,
}

impl QuadratureRule {
    /// Checks the positivity and normalization invariants of a rule read from elsewhere.
    pub fn new(points: PointSet, weights: Vec<f64>, degree_s: usize) -> Result<Self> {
        if weights.len() != points.len() {
            return Err(WsfError::LengthMismatch {
                expected: points.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(WsfError::invalid("quadrature weights must be positive"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > EXACTNESS_TOLERANCE {
            return Err(WsfError::invalid(format!("weights sum to {sum}, expected 1")));
        }
        Ok(QuadratureRule {
            points,
            weights,
            degree_s,
            clamped_count: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// `max_{k ≤ s, ℓ} |Σ_i w_i Y_{k,ℓ}(x_i) − δ_{k0}|`.
pub fn exactness_residual(points: &PointSet, weights: &[f64], s: usize) -> Result<f64> {
    if points.sphere_dim() != 2 {
        return Err(WsfError::UnsupportedDimension(points.sphere_dim()));
    }
    if weights.len() != points.len() {
        return Err(WsfError::LengthMismatch {
            expected: points.len(),
            got: weights.len(),
        });
    }
    let len = basis_len(s);
    let mut eval = HarmonicEvaluator::new(s);
    let mut y = vec![0.0; len];
    let mut moments = vec![0.0; len];
    for (p, &w) in points.iter().zip(weights) {
        eval.eval(p, &mut y);
        for (m, v) in moments.iter_mut().zip(&y) {
            *m += w * v;
        }
    }
    moments[0] -= 1.0;
    Ok(moments.iter().fold(0.0, |acc, v| acc.max(v.abs())))
}

pub fn verify_exactness(rule: &QuadratureRule, s: usize) -> Result<f64> {
    exactness_residual(&rule.points, &rule.weights, s)
}

/// Equal weights on a spherical t-design.
pub fn tdesign_rule(points: &PointSet, t: usize) -> Result<QuadratureRule> {
    let n = points.len();
    let weights = vec![1.0 / n as f64; n];
    let residual = exactness_residual(points, &weights, t)?;
    if residual > EXACTNESS_TOLERANCE {
        return Err(WsfError::NotADesign { t, residual });
    }
    Ok(QuadratureRule {
        points: points.clone(),
        weights,
        degree_s: t,
        clamped_count: 0,
    })
}

/// Positive weights exact to degree `s`, found by NNLS on the moment system.
///
/// The solve starts from equal weights so that, when the degree is well below
/// what the nodes support, every node keeps a positive weight. Nodes the
/// solver zeroes are lifted to [`CLAMPED_WEIGHT`] and the weights rescaled to
/// sum to one; their count is reported in `clamped_count`.
pub fn compute_weights(points: &PointSet, s: usize) -> Result<QuadratureRule> {
    let n = points.len();
    let basis = harmonic_basis(points, s)?;
    let mut moments = DVector::zeros(basis.rows());
    moments[0] = 1.0;
    let start = DVector::from_element(n, 1.0 / n as f64);
    let sol = nnls_from(&basis.values, &moments, &start)?;

    let raw: Vec<f64> = sol.x.iter().copied().collect();
    let residual = exactness_residual(points, &raw, s)?;
    if residual > EXACTNESS_TOLERANCE {
        return Err(WsfError::InfeasibleDegree { degree: s, residual });
    }
    let clamped_count = raw.iter().filter(|&&w| w <= 0.0).count();
    let mut weights: Vec<f64> = raw.iter().map(|&w| w.max(CLAMPED_WEIGHT)).collect();
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    Ok(QuadratureRule {
        points: points.clone(),
        weights,
        degree_s: s,
        clamped_count,
    })
}

/// Default search start `floor(c / h)` from the probed mesh norm.
pub fn degree_hint(points: &PointSet, c: f64) -> Result<usize> {
    let h = mesh_norm(points, 100)?;
    Ok((c / h).floor() as usize)
}

/// Highest degree `≤ s_hint` with strictly positive NNLS weights on every node.
pub fn max_feasible_degree(points: &PointSet, s_hint: usize) -> Result<usize> {
    best_rule(points, s_hint).map(|r| r.degree_s)
}

/// The rule found by the descending search of [`max_feasible_degree`].
pub fn best_rule(points: &PointSet, s_hint: usize) -> Result<QuadratureRule> {
    let mut last_err = None;
    for s in (0..=s_hint).rev() {
        match compute_weights(points, s) {
            Ok(rule) if rule.clamped_count == 0 => return Ok(rule),
            Ok(rule) => {
                last_err = Some(WsfError::InfeasibleDegree {
                    degree: s,
                    residual: verify_exactness(&rule, s)?,
                })
            }
            Err(e @ WsfError::InfeasibleDegree { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or(WsfError::InfeasibleDegree {
        degree: 0,
        residual: f64::NAN,
    }))
}

/// Writes `x y z w` rows under a `# degree=s` header.
pub fn write_rule(path: &Path, rule: &QuadratureRule) -> Result<()> {
    let text = io::format_rows(
        &[
            ("degree", rule.degree_s.to_string()),
            ("clamped", rule.clamped_count.to_string()),
        ],
        &rule.points,
        &[&rule.weights],
    );
    io::write_text(path, &text)
}

pub fn read_rule(path: &Path) -> Result<QuadratureRule> {
    let table = io::read_table(path, 4)?;
    let degree = table
        .meta("degree")
        .and_then(|d| d.parse::<usize>().ok())
        .ok_or_else(|| WsfError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "missing `# degree=<s>` header".into(),
        })?;
    let xyz: Vec<[f64; 3]> = table.rows.iter().map(|r| [r[0], r[1], r[2]]).collect();
    let points = PointSet::from_xyz(&xyz)?;
    let weights = table.rows.iter().map(|r| r[3]).collect();
    let mut rule = QuadratureRule::new(points, weights, degree)?;
    rule.clamped_count = table.meta("clamped").and_then(|c| c.parse().ok()).unwrap_or(0);
    Ok(rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_random;

    fn octahedron() -> PointSet {
        PointSet::from_xyz(&[
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ])
        .unwrap()
    }

    #[test]
    fn octahedron_is_a_three_design() {
        let rule = tdesign_rule(&octahedron(), 3).unwrap();
        assert!(verify_exactness(&rule, 3).unwrap() < 1e-14);
        assert!(matches!(
            tdesign_rule(&octahedron(), 4),
            Err(WsfError::NotADesign { t: 4, .. })
        ));
    }

    #[test]
    fn degree_zero_residual_is_weight_sum_error() {
        let pts = sample_random(10, 2).unwrap();
        let w = vec![0.11; 10];
        let r = exactness_residual(&pts, &w, 0).unwrap();
        assert!((r - 0.1).abs() < 1e-14);
    }

    #[test]
    fn random_points_with_equal_weights_are_not_exact() {
        let pts = sample_random(200, 5).unwrap();
        assert!(tdesign_rule(&pts, 5).is_err());
        let w = vec![1.0 / 200.0; 200];
        assert!(exactness_residual(&pts, &w, 5).unwrap() > 1e-3);
    }

    #[test]
    fn degree_zero_always_feasible() {
        let pts = sample_random(7, 9).unwrap();
        let rule = compute_weights(&pts, 0).unwrap();
        assert!(rule.weights.iter().all(|&w| w > 0.0));
        assert!((rule.weight_sum() - 1.0).abs() < 1e-12);
        assert_eq!(max_feasible_degree(&pts, 0).unwrap(), 0);
    }

    #[test]
    fn two_point_degree_depends_on_placement() {
        let antipodal = PointSet::from_xyz(&[[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]).unwrap();
        assert_eq!(max_feasible_degree(&antipodal, 5).unwrap(), 1);
        let near = PointSet::from_xyz(&[[0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(max_feasible_degree(&near, 5).unwrap(), 0);
    }

    #[test]
    fn nnls_weights_on_random_nodes() {
        let pts = sample_random(400, 21).unwrap();
        let s = max_feasible_degree(&pts, 6).unwrap();
        assert!(s >= 2);
        let rule = compute_weights(&pts, s).unwrap();
        assert_eq!(rule.clamped_count, 0);
        assert!(verify_exactness(&rule, s).unwrap() <= EXACTNESS_TOLERANCE);
        assert!(rule.weight_sum() <= 1.0 + 1e-8);
    }

    #[test]
    fn rule_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rule.txt");
        let rule = tdesign_rule(&octahedron(), 3).unwrap();
        write_rule(&path, &rule).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# degree=3\n"));
        let back = read_rule(&path).unwrap();
        assert_eq!(back.degree_s, 3);
        assert_eq!(back.weights, rule.weights);
    }
}
