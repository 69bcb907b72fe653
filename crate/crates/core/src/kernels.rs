//! Compactly supported spherical basis functions and kernel matrices.
//!
//! Kernels are zonal, `φ(x·x′) = h(‖x − x′‖₂)`, evaluated at the Euclidean
//! chord distance rather than the geodesic one.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Result, WsfError};
use crate::geometry::{chord_distance, dot, PointSet};

/// Registered radial profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// `(1 − r)₊⁴ (4r + 1)`, positive definite on R³ and hence on S².
    Wendland41,
    /// `(1 − r)₊⁸ (32r³ + 25r² + 8r + 1)`, the bump used by the test function.
    Wendland83,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 2] = [KernelFamily::Wendland41, KernelFamily::Wendland83];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Wendland41 => "wendland_4_1",
            KernelFamily::Wendland83 => "wendland_8_3",
        }
    }

    /// Profile at scaled distance `r = ‖x − x′‖ / support`.
    #[inline]
    pub fn profile(self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        let u = 1.0 - r;
        match self {
            KernelFamily::Wendland41 => {
                let u2 = u * u;
                u2 * u2 * (4.0 * r + 1.0)
            }
            KernelFamily::Wendland83 => {
                let u2 = u * u;
                let u4 = u2 * u2;
                u4 * u4 * (((32.0 * r + 25.0) * r + 8.0) * r + 1.0)
            }
        }
    }

    /// Decay exponent of the Legendre coefficients, `φ̂_k ~ k^{-2γ}` on S².
    pub fn smoothness_gamma(self) -> f64 {
        match self {
            KernelFamily::Wendland41 => 2.0,
            KernelFamily::Wendland83 => 4.0,
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = WsfError;

    fn from_str(s: &str) -> Result<Self> {
        KernelFamily::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| WsfError::invalid(format!("unknown kernel {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Support radius in chord units.
    pub support_radius: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            family: KernelFamily::Wendland41,
            support_radius: 1.0,
        }
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, support_radius: f64) -> Result<Self> {
        if !(support_radius > 0.0) || !support_radius.is_finite() {
            return Err(WsfError::invalid("support radius must be positive"));
        }
        Ok(KernelSpec { family, support_radius })
    }

    pub fn smoothness_gamma(&self) -> f64 {
        self.family.smoothness_gamma()
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        self.family.profile(chord_distance(a, b) / self.support_radius)
    }

    /// Same value through the dot product, `‖a − b‖² = 2 − 2 a·b` for unit vectors.
    #[inline]
    fn eval_unit(&self, a: &[f64], b: &[f64]) -> f64 {
        let chord = (2.0 - 2.0 * dot(a, b)).max(0.0).sqrt();
        self.family.profile(chord / self.support_radius)
    }
}

pub fn kernel_eval(spec: &KernelSpec, a: &[f64], b: &[f64]) -> f64 {
    spec.eval(a, b)
}

/// `Φ_ij = φ(x_i · x_j)`, each pair evaluated once and mirrored.
pub fn kernel_matrix(spec: &KernelSpec, set: &PointSet) -> DMatrix<f64> {
    let n = set.len();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let pj = set.point(j);
        m[(j, j)] = spec.family.profile(0.0);
        for i in j + 1..n {
            let v = spec.eval_unit(set.point(i), pj);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// `K_ij = φ(q_i · c_j)` for query rows and center columns.
pub fn cross_matrix(spec: &KernelSpec, queries: &PointSet, centers: &PointSet) -> DMatrix<f64> {
    let (nq, nc) = (queries.len(), centers.len());
    let mut m = DMatrix::zeros(nq, nc);
    for j in 0..nc {
        let c = centers.point(j);
        for i in 0..nq {
            m[(i, j)] = spec.eval_unit(queries.point(i), c);
        }
    }
    m
}

/// Sum of six `wendland_8_3` bumps centred at `±e₁, ±e₂, ±e₃`.
pub fn target_function(x: &[f64]) -> f64 {
    let mut total = 0.0;
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let mut z = [0.0; 3];
            z[axis] = sign;
            total += KernelFamily::Wendland83.profile(chord_distance(x, &z));
        }
    }
    total
}
