//! Point sets on the unit sphere and their geometric statistics.
//!
//! A [`PointSet`] stores unit vectors in a flat buffer so that kernel
//! assembly can walk it without chasing pointers. Geometry and kernel
//! evaluation work in any ambient dimension; the samplers and everything that
//! needs spherical harmonics are specific to S².

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, WsfError};

/// Two points closer than this (chord distance) are treated as the same node.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;

/// A unit vector in R^{d+1}.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint(Vec<f64>);

impl SpherePoint {
    /// Builds a point from raw coordinates, rescaling them to unit length.
    pub fn new(coords: impl Into<Vec<f64>>) -> Result<Self> {
        let mut coords = coords.into();
        if coords.len() < 2 {
            return Err(WsfError::invalid("a sphere point needs at least 2 coordinates"));
        }
        let norm = norm(&coords);
        if !norm.is_finite() || norm == 0.0 {
            return Err(WsfError::invalid("cannot normalize a zero or non-finite vector"));
        }
        coords.iter_mut().for_each(|c| *c /= norm);
        Ok(SpherePoint(coords))
    }

    pub fn xyz(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::new(vec![x, y, z])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// Dimension d of the sphere S^d this point lives on.
    pub fn sphere_dim(&self) -> usize {
        self.0.len() - 1
    }
}

impl AsRef<[f64]> for SpherePoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Euclidean distance between two points of the ambient space.
pub fn chord_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Great-circle distance in radians, in `[0, π]`.
pub fn geodesic_distance(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos()
}

/// Mesh norm, separation radius and mesh ratio of a node set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryStats {
    pub mesh_norm: f64,
    pub separation_radius: f64,
    pub mesh_ratio: f64,
}

/// An ordered set of distinct points on S^d.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    sphere_dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    /// Validates that the points share a dimension and are pairwise distinct.
    pub fn new(points: Vec<SpherePoint>) -> Result<Self> {
        let first = points.first().ok_or(WsfError::EmptyPointSet)?;
        let sphere_dim = first.sphere_dim();
        let mut coords = Vec::with_capacity(points.len() * (sphere_dim + 1));
        for p in &points {
            if p.sphere_dim() != sphere_dim {
                return Err(WsfError::invalid("points live on spheres of different dimension"));
            }
            coords.extend_from_slice(p.coords());
        }
        let set = PointSet { sphere_dim, coords };
        set.check_distinct()?;
        Ok(set)
    }

    /// Builds a set on S² from `[x, y, z]` triples, normalizing each one.
    pub fn from_xyz(points: &[[f64; 3]]) -> Result<Self> {
        let pts = points
            .iter()
            .map(|p| SpherePoint::new(p.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(pts)
    }

    /// Flat coordinates that are already unit length (checked only in debug builds).
    pub(crate) fn from_flat_unit(sphere_dim: usize, coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(WsfError::EmptyPointSet);
        }
        debug_assert_eq!(coords.len() % (sphere_dim + 1), 0);
        let set = PointSet { sphere_dim, coords };
        set.check_distinct()?;
        Ok(set)
    }

    fn check_distinct(&self) -> Result<()> {
        let n = self.len();
        // sort along a generic direction so only nearby candidates are compared
        let dir: Vec<f64> = (0..=self.sphere_dim).map(|j| 0.5773 + 0.1231 * j as f64).collect();
        let mut order: Vec<(f64, usize)> = (0..n).map(|i| (dot(self.point(i), &dir), i)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let reach = DUPLICATE_TOLERANCE * norm(&dir);
        for a in 0..n {
            for b in a + 1..n {
                if order[b].0 - order[a].0 > reach {
                    break;
                }
                let (i, j) = (order[a].1, order[b].1);
                if chord_distance(self.point(i), self.point(j)) <= DUPLICATE_TOLERANCE {
                    return Err(WsfError::DuplicatePoint {
                        first: i.min(j),
                        second: i.max(j),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.coords.len() / (self.sphere_dim + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn sphere_dim(&self) -> usize {
        self.sphere_dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.sphere_dim + 1
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let a = self.ambient_dim();
        &self.coords[i * a..(i + 1) * a]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.ambient_dim())
    }

    pub fn to_points(&self) -> Vec<SpherePoint> {
        self.iter().map(|p| SpherePoint(p.to_vec())).collect()
    }

    /// Concatenates two sets, failing if any point appears in both.
    pub fn union(&self, other: &PointSet) -> Result<PointSet> {
        if self.sphere_dim != other.sphere_dim {
            return Err(WsfError::invalid("cannot join point sets of different dimension"));
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        Self::from_flat_unit(self.sphere_dim, coords)
    }

    /// The subset at the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<PointSet> {
        let mut coords = Vec::with_capacity(indices.len() * self.ambient_dim());
        for &i in indices {
            if i >= self.len() {
                return Err(WsfError::invalid(format!("index {i} out of range")));
            }
            coords.extend_from_slice(self.point(i));
        }
        Self::from_flat_unit(self.sphere_dim, coords)
    }

    /// Drops the two poles (±e_last) if present.
    pub fn without_poles(&self) -> Result<PointSet> {
        let last = self.sphere_dim;
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| (self.point(i)[last].abs() - 1.0).abs() > 1e-12)
            .collect();
        self.select(&keep)
    }

    /// Applies a 3x3 rotation (row-major) to every point of an S² set.
    pub fn rotated(&self, rotation: &[[f64; 3]; 3]) -> Result<PointSet> {
        if self.sphere_dim != 2 {
            return Err(WsfError::UnsupportedDimension(self.sphere_dim));
        }
        let mut coords = Vec::with_capacity(self.coords.len());
        for p in self.iter() {
            for row in rotation {
                coords.push(row[0] * p[0] + row[1] * p[1] + row[2] * p[2]);
            }
        }
        Ok(PointSet { sphere_dim: 2, coords })
    }

    /// Mesh norm, separation radius and their ratio in one pass.
    pub fn stats(&self, probe_resolution: usize) -> Result<GeometryStats> {
        let mesh_norm = mesh_norm(self, probe_resolution)?;
        let separation_radius = separation_radius(self)?;
        Ok(GeometryStats {
            mesh_norm,
            separation_radius,
            mesh_ratio: mesh_norm / separation_radius,
        })
    }
}

/// Deterministic equal-area Fibonacci lattice with `n` points on S².
pub fn fibonacci_lattice(n: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Covering radius `max_x min_i dist(x, x_i)`, probed on a Fibonacci grid of
/// `probe_resolution²` points. The probe maximum never exceeds the true value.
pub fn mesh_norm(set: &PointSet, probe_resolution: usize) -> Result<f64> {
    if set.is_empty() {
        return Err(WsfError::EmptyPointSet);
    }
    if probe_resolution < 10 {
        return Err(WsfError::invalid("probe_resolution must be at least 10"));
    }
    if set.sphere_dim() != 2 {
        return Err(WsfError::UnsupportedDimension(set.sphere_dim()));
    }
    let probes = fibonacci_lattice(probe_resolution * probe_resolution);
    let nearest = |q: &[f64; 3]| set.iter().map(|p| dot(p, q)).fold(f64::NEG_INFINITY, f64::max);
    #[cfg(feature = "parallel")]
    let worst = {
        use rayon::prelude::*;
        probes.par_iter().map(nearest).reduce(|| f64::INFINITY, f64::min)
    };
    #[cfg(not(feature = "parallel"))]
    let worst = probes.iter().map(nearest).fold(f64::INFINITY, f64::min);
    Ok(worst.clamp(-1.0, 1.0).acos())
}

/// Half the smallest pairwise geodesic distance.
pub fn separation_radius(set: &PointSet) -> Result<f64> {
    let n = set.len();
    if n < 2 {
        return Err(WsfError::TooFewPoints { needed: 2, got: n });
    }
    let mut max_dot = f64::NEG_INFINITY;
    for i in 0..n {
        let p = set.point(i);
        for j in i + 1..n {
            max_dot = max_dot.max(dot(p, set.point(j)));
        }
    }
    Ok(0.5 * max_dot.clamp(-1.0, 1.0).acos())
}

/// `n` points drawn uniformly on S² via `z ~ U[-1, 1]`, azimuth `~ U[0, 2π)`.
pub fn sample_random(n: usize, seed: u64) -> Result<PointSet> {
    if n == 0 {
        return Err(WsfError::invalid("cannot sample an empty point set"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(3 * n);
    for _ in 0..n {
        let z: f64 = rng.random_range(-1.0..=1.0);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        let r = (1.0 - z * z).max(0.0).sqrt();
        coords.extend_from_slice(&[r * phi.cos(), r * phi.sin(), z]);
    }
    PointSet::from_flat_unit(2, coords)
}

/// Rotation about the z-axis by `k·π/20`.
pub fn rotation_step(k: usize) -> [[f64; 3]; 3] {
    let angle = k as f64 * PI / 20.0;
    let (s, c) = angle.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// `base ∪ A_1 base ∪ … ∪ A_k base` where `A_j` rotates by `jπ/20` about z.
///
/// With the 120-point 15-design as base this yields `120(k+1)` points.
pub fn rotated_design(base: &PointSet, k: usize) -> Result<PointSet> {
    if k > 19 {
        return Err(WsfError::invalid(format!("rotation count {k} outside 0..=19")));
    }
    let mut coords = Vec::with_capacity(base.coords.len() * (k + 1));
    coords.extend_from_slice(&base.coords);
    for j in 1..=k {
        coords.extend_from_slice(&base.rotated(&rotation_step(j))?.coords);
    }
    PointSet::from_flat_unit(2, coords)
}

/// Loads a spherical t-design and confirms that equal weights integrate every
/// harmonic of degree `≤ t` to within `1e-8`.
pub fn load_tdesign(path: &Path, t: usize) -> Result<PointSet> {
    let set = crate::io::read_points(path)?;
    let weights = vec![1.0 / set.len() as f64; set.len()];
    let residual = crate::quadrature::exactness_residual(&set, &weights, t)?;
    if residual > 1e-8 {
        return Err(WsfError::NotADesign { t, residual });
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn icosahedron() -> PointSet {
        let g = (1.0 + 5f64.sqrt()) / 2.0;
        let mut v = Vec::new();
        for &a in &[-1.0, 1.0] {
            for &b in &[-g, g] {
                v.push([0.0, a, b]);
                v.push([a, b, 0.0]);
                v.push([b, 0.0, a]);
            }
        }
        PointSet::from_xyz(&v).unwrap()
    }

    #[test]
    fn geodesic_distance_examples() {
        let x = [1.0, 0.0, 0.0];
        assert_eq!(geodesic_distance(&x, &x), 0.0);
        assert_abs_diff_eq!(geodesic_distance(&x, &[0.0, 1.0, 0.0]), PI / 2.0);
        assert_abs_diff_eq!(geodesic_distance(&x, &[-1.0, 0.0, 0.0]), PI);
    }

    #[test]
    fn sphere_point_renormalizes() {
        let p = SpherePoint::xyz(3.0, 0.0, 4.0).unwrap();
        assert_abs_diff_eq!(norm(p.coords()), 1.0, epsilon = 1e-15);
        assert!(SpherePoint::xyz(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn duplicates_are_rejected() {
        let err = PointSet::from_xyz(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [2.0, 0.0, 0.0]]);
        assert!(matches!(err, Err(WsfError::DuplicatePoint { first: 0, second: 2 })));
        assert!(matches!(PointSet::from_xyz(&[]), Err(WsfError::EmptyPointSet)));
    }

    #[test]
    fn mesh_norm_examples() {
        let single = PointSet::from_xyz(&[[0.0, 0.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(mesh_norm(&single, 200).unwrap(), PI, epsilon = 0.01);

        let pair = PointSet::from_xyz(&[[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]).unwrap();
        assert_abs_diff_eq!(mesh_norm(&pair, 60).unwrap(), PI / 2.0, epsilon = 0.01);

        // Brute force over a 10^6-point grid gives 0.65236 for the icosahedron
        // (the circumradius of a face, acos(sqrt((5 + 2 sqrt 5) / 15))).
        let exact = ((5.0 + 2.0 * 5f64.sqrt()) / 15.0).sqrt().acos();
        assert_abs_diff_eq!(exact, 0.6524, epsilon = 1e-4);
        let probed = mesh_norm(&icosahedron(), 200).unwrap();
        assert!(probed <= exact + 1e-12);
        assert!((probed - exact).abs() / exact < 0.01);

        assert!(mesh_norm(&single, 5).is_err());
    }

    #[test]
    fn separation_radius_examples() {
        let pair = PointSet::from_xyz(&[[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]).unwrap();
        assert_abs_diff_eq!(separation_radius(&pair).unwrap(), PI / 2.0);
        let axes = PointSet::from_xyz(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(separation_radius(&axes).unwrap(), PI / 4.0);
        let single = PointSet::from_xyz(&[[1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(separation_radius(&single), Err(WsfError::TooFewPoints { .. })));
    }

    #[test]
    fn random_sampling() {
        let one = sample_random(1, 3).unwrap();
        assert_abs_diff_eq!(norm(one.point(0)), 1.0, epsilon = 1e-14);
        assert!(sample_random(0, 3).is_err());

        let a = sample_random(10_000, 7).unwrap();
        assert_eq!(a, sample_random(10_000, 7).unwrap());
        let mut mean = [0.0; 3];
        for p in a.iter() {
            for j in 0..3 {
                mean[j] += p[j] / a.len() as f64;
            }
        }
        assert!(norm(&mean) <= 0.05);
    }

    #[test]
    fn rotation_counts_and_orientation() {
        let base = PointSet::from_xyz(&[[1.0, 0.0, 0.0], [0.3, 0.2, 0.9]]).unwrap();
        assert_eq!(rotated_design(&base, 0).unwrap(), base);
        let r = rotated_design(&base, 10).unwrap();
        assert_eq!(r.len(), 22);
        // A_10 e1 = e2
        let hit = r.iter().any(|p| chord_distance(p, &[0.0, 1.0, 0.0]) < 1e-12);
        assert!(hit);
        assert!(rotated_design(&base, 20).is_err());
    }

    #[test]
    fn poles_can_be_dropped() {
        let set = PointSet::from_xyz(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]]).unwrap();
        let trimmed = set.without_poles().unwrap();
        assert_eq!(trimmed.len(), 1);
    }
}
