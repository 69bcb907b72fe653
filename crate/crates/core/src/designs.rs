//! Numerical construction of spherical t-designs on S².
//!
//! A point set is a t-design exactly when `Σ_i Y_{k,ℓ}(x_i) = 0` for every
//! harmonic of degree `1 ≤ k ≤ t`. The search drives those moments to zero
//! with Levenberg–Marquardt, using a parametrization that builds in a
//! symmetry:
//!
//! * antipodal sets `{±x_i}` kill every odd-degree moment, leaving the even
//!   degrees `2 ≤ k ≤ t` to solve for; the first point is pinned to the north
//!   pole, which removes most of the rotational freedom and lets the poles be
//!   dropped later;
//! * unions of orbits under the icosahedral rotation group, where only the
//!   few group-invariant moments can be nonzero. Two generic orbits give the
//!   120-point 15-design.
//!
//! The shipped design files under `data/designs` were produced with these
//! routines (see the `design` CLI subcommand).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, WsfError};
use crate::geometry::PointSet;
use crate::harmonics::{basis_index, basis_len, HarmonicEvaluator};
use crate::quadrature::exactness_residual;

type Vec3 = [f64; 3];
type Mat3 = [[f64; 3]; 3];

fn normalize(p: Vec3) -> Vec3 {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Orthonormal tangent vectors at `x`.
fn tangent_basis(x: Vec3) -> (Vec3, Vec3) {
    let axis = if x[0].abs() < 0.6 {
        [1.0, 0.0, 0.0]
    } else if x[1].abs() < 0.6 {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let u = normalize(cross(x, axis));
    let v = cross(x, u);
    (u, v)
}

fn step(x: Vec3, a: f64, b: f64) -> Vec3 {
    let (u, v) = tangent_basis(x);
    normalize([
        x[0] + a * u[0] + b * v[0],
        x[1] + a * u[1] + b * v[1],
        x[2] + a * u[2] + b * v[2],
    ])
}

/// Moment equations over a symmetry-generated point set.
struct MomentSystem<F: Fn(Vec3) -> Vec<Vec3> + Sync> {
    degree: usize,
    rows: Vec<usize>,
    images: F,
    total: usize,
    pinned: usize,
}

impl<F: Fn(Vec3) -> Vec<Vec3> + Sync> MomentSystem<F> {
    fn contribution(&self, eval: &mut HarmonicEvaluator, buf: &mut [f64], seed: Vec3, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for img in (self.images)(seed) {
            eval.eval(&img, buf);
            for (o, &r) in out.iter_mut().zip(&self.rows) {
                *o += buf[r];
            }
        }
    }

    fn residual(&self, seeds: &[Vec3]) -> DVector<f64> {
        let mut eval = HarmonicEvaluator::new(self.degree);
        let mut buf = vec![0.0; basis_len(self.degree)];
        let mut part = vec![0.0; self.rows.len()];
        let mut r = DVector::zeros(self.rows.len());
        for &s in seeds {
            self.contribution(&mut eval, &mut buf, s, &mut part);
            for (ri, p) in r.iter_mut().zip(&part) {
                *ri += p;
            }
        }
        r / self.total as f64
    }

    fn jacobian(&self, seeds: &[Vec3]) -> DMatrix<f64> {
        let free = seeds.len() - self.pinned;
        let mut jac = DMatrix::zeros(self.rows.len(), 2 * free);
        let h = 1e-6;
        let scale = 1.0 / (2.0 * h * self.total as f64);
        let fill = |seed: Vec3, cols: &mut [f64]| {
            let mut eval = HarmonicEvaluator::new(self.degree);
            let mut buf = vec![0.0; basis_len(self.degree)];
            let m = self.rows.len();
            let mut plus = vec![0.0; m];
            let mut minus = vec![0.0; m];
            for dir in 0..2 {
                let (a, b) = if dir == 0 { (h, 0.0) } else { (0.0, h) };
                self.contribution(&mut eval, &mut buf, step(seed, a, b), &mut plus);
                self.contribution(&mut eval, &mut buf, step(seed, -a, -b), &mut minus);
                for i in 0..m {
                    cols[dir * m + i] = (plus[i] - minus[i]) * scale;
                }
            }
        };
        // columns are contiguous in nalgebra's column-major storage
        let m = self.rows.len();
        let data = jac.as_mut_slice();
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            data.par_chunks_mut(2 * m)
                .enumerate()
                .for_each(|(i, cols)| fill(seeds[self.pinned + i], cols));
        }
        #[cfg(not(feature = "parallel"))]
        for (i, cols) in data.chunks_mut(2 * m).enumerate() {
            fill(seeds[self.pinned + i], cols);
        }
        jac
    }

    fn apply_step(&self, seeds: &[Vec3], delta: &DVector<f64>) -> Vec<Vec3> {
        let mut out = seeds.to_vec();
        for i in self.pinned..seeds.len() {
            let k = 2 * (i - self.pinned);
            out[i] = step(seeds[i], delta[k], delta[k + 1]);
        }
        out
    }

    /// Levenberg–Marquardt with minimum-norm steps `Δ = −Jᵀ(JJᵀ + μI)⁻¹ r`.
    fn solve(&self, mut seeds: Vec<Vec3>, max_iter: usize, target: f64) -> (Vec<Vec3>, f64) {
        let mut r = self.residual(&seeds);
        let mut cost = r.norm_squared();
        let mut mu = 1e-6;
        for _ in 0..max_iter {
            if r.amax() <= target {
                break;
            }
            let jac = self.jacobian(&seeds);
            let gram = &jac * jac.transpose();
            let diag_scale = (gram.trace() / gram.nrows() as f64).max(1e-300);
            let mut improved = false;
            for _ in 0..30 {
                let mut damped = gram.clone();
                for i in 0..damped.nrows() {
                    damped[(i, i)] += mu * diag_scale;
                }
                let Some(chol) = damped.cholesky() else {
                    mu *= 10.0;
                    continue;
                };
                let delta = -jac.tr_mul(&chol.solve(&r));
                let trial = self.apply_step(&seeds, &delta);
                let r_trial = self.residual(&trial);
                let c_trial = r_trial.norm_squared();
                if c_trial < cost {
                    seeds = trial;
                    r = r_trial;
                    cost = c_trial;
                    mu = (mu / 5.0).max(1e-15);
                    improved = true;
                    break;
                }
                mu *= 4.0;
            }
            if !improved {
                break;
            }
        }
        let worst = r.amax();
        (seeds, worst)
    }
}

/// Harmonic indices of the even degrees `2 ≤ k ≤ t`.
fn even_rows(t: usize) -> Vec<usize> {
    (2..=t)
        .step_by(2)
        .flat_map(|k| (-(k as i64)..=k as i64).map(move |m| basis_index(k, m)))
        .collect()
}

/// Searches for an antipodally symmetric t-design with `n` points, one of
/// them at the north pole.
///
/// `n` must be even and large enough that the `Σ_{k even ≤ t} (2k+1)`
/// equations are not overdetermined (`n ≥ equations + 2`).
pub fn symmetric_design(t: usize, n: usize, max_iter: usize) -> Result<PointSet> {
    if !n.is_multiple_of(2) || n < 2 {
        return Err(WsfError::invalid("a symmetric design needs an even point count"));
    }
    let half = n / 2;
    let rows = even_rows(t);
    if 2 * (half - 1) < rows.len() {
        return Err(WsfError::invalid(format!(
            "{n} points give {} unknowns for {} equations",
            2 * (half - 1),
            rows.len()
        )));
    }
    // north pole followed by a Fibonacci spiral over the upper hemisphere
    let mut seeds = vec![[0.0, 0.0, 1.0]];
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    for j in 1..half {
        let z = 1.0 - (j as f64 + 0.5) / half as f64;
        let rho = (1.0 - z * z).sqrt();
        let phi = golden * j as f64;
        seeds.push([rho * phi.cos(), rho * phi.sin(), z]);
    }
    let system = MomentSystem {
        degree: t,
        rows,
        images: |x: Vec3| vec![x, [-x[0], -x[1], -x[2]]],
        total: n,
        pinned: 1,
    };
    let (seeds, _) = system.solve(seeds, max_iter, 1e-15);
    let mut xyz = Vec::with_capacity(n);
    xyz.extend(seeds.iter().copied());
    xyz.extend(seeds.iter().map(|x| [-x[0], -x[1], -x[2]]));
    finish(&xyz, t)
}

fn finish(xyz: &[Vec3], t: usize) -> Result<PointSet> {
    let set = PointSet::from_xyz(xyz)?;
    let w = vec![1.0 / set.len() as f64; set.len()];
    let residual = exactness_residual(&set, &w, t)?;
    if residual > 1e-12 {
        return Err(WsfError::NotADesign { t, residual });
    }
    Ok(set)
}

/// The 60 rotations of the icosahedral group, with the coordinate axes as
/// 2-fold axes.
pub fn icosahedral_rotations() -> Vec<Mat3> {
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let axis = normalize([0.0, 1.0, g]);
    let rot = |axis: Vec3, angle: f64| -> Mat3 {
        let (s, c) = angle.sin_cos();
        let [x, y, z] = axis;
        let t = 1.0 - c;
        [
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ]
    };
    let gens = [
        rot(axis, 2.0 * std::f64::consts::PI / 5.0),
        [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]],
        [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]],
    ];
    let identity = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut group: Vec<Mat3> = vec![identity];
    let mut frontier = vec![identity];
    let same = |a: &Mat3, b: &Mat3| (0..3).all(|i| (0..3).all(|j| (a[i][j] - b[i][j]).abs() < 1e-9));
    while let Some(m) = frontier.pop() {
        for g in &gens {
            let p = mat_mul(g, &m);
            if !group.iter().any(|q| same(q, &p)) {
                group.push(p);
                frontier.push(p);
            }
        }
    }
    group
}

/// The 24 rotations of the cube: signed permutation matrices with
/// determinant one.
pub fn octahedral_rotations() -> Vec<Mat3> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(24);
    for p in perms {
        for signs in 0..8u32 {
            let mut m = [[0.0; 3]; 3];
            for (row, &col) in p.iter().enumerate() {
                m[row][col] = if signs >> row & 1 == 1 { -1.0 } else { 1.0 };
            }
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            if det > 0.0 {
                out.push(m);
            }
        }
    }
    out
}

/// Searches for a t-design made of `orbits` generic orbits of a finite
/// rotation group (`|group|·orbits` points), trying random starting seeds.
pub fn orbit_design(group: &[Mat3], t: usize, orbits: usize, attempts: usize, seed: u64) -> Result<PointSet> {
    let order = group.len();
    let rows: Vec<usize> = (1..basis_len(t)).collect();
    let system = MomentSystem {
        degree: t,
        rows,
        images: |x: Vec3| group.iter().map(|g| mat_vec(g, x)).collect(),
        total: order * orbits,
        pinned: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..attempts {
        let start: Vec<Vec3> = (0..orbits)
            .map(|_| {
                let z: f64 = rng.random_range(-1.0..1.0);
                let phi: f64 = rng.random_range(0.0..2.0 * std::f64::consts::PI);
                let r = (1.0 - z * z).sqrt();
                [r * phi.cos(), r * phi.sin(), z]
            })
            .collect();
        let (seeds, worst) = system.solve(start, 200, 1e-15);
        best = best.min(worst);
        if worst > 1e-13 {
            continue;
        }
        let xyz: Vec<Vec3> = seeds
            .iter()
            .flat_map(|&s| group.iter().map(move |g| mat_vec(g, s)))
            .collect();
        if let Ok(set) = finish(&xyz, t) {
            return Ok(set);
        }
    }
    Err(WsfError::NotADesign { t, residual: best })
}
