//! Legendre polynomials and real spherical harmonics on S².
//!
//! Harmonics are orthonormal against the normalized surface measure
//! (`∫ dω = 1`), so `Y_{0,1} ≡ 1` and the addition theorem reads
//! `Σ_ℓ Y_{k,ℓ}(x) Y_{k,ℓ}(y) = (2k+1) P_k(x·y)`. No Condon–Shortley phase.

use nalgebra::DMatrix;

use crate::error::{Result, WsfError};
use crate::geometry::PointSet;

/// Dimension of the space of degree-`k` spherical harmonics on S^d.
pub fn zdim(d: usize, k: usize) -> Result<u64> {
    if d < 2 {
        return Err(WsfError::invalid(format!("zdim needs d >= 2, got {d}")));
    }
    if k == 0 {
        return Ok(1);
    }
    // (2k+d-1)/(k+d-1) * C(k+d-1, k) = (2k+d-1) (k+d-2)! / (k! (d-1)!)
    let (k, d) = (k as u64, d as u64);
    let mut binom: u64 = 1; // C(k+d-2, k)
    for i in 1..=k {
        binom = binom * (d - 2 + i) / i;
    }
    Ok((2 * k + d - 1) * binom / (d - 1))
}

/// Number of harmonics of degree at most `s` on S².
pub fn basis_len(s: usize) -> usize {
    (s + 1) * (s + 1)
}

/// Row index of `Y_{k,m}`, `-k ≤ m ≤ k`, in a basis ordered by degree.
pub fn basis_index(k: usize, m: i64) -> usize {
    k * k + (k as i64 + m) as usize
}

/// Legendre polynomial `P_k(u)` normalized so `P_k(1) = 1`.
pub fn legendre_p(k: usize, u: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&u) {
        return Err(WsfError::invalid(format!("legendre argument {u} outside [-1, 1]")));
    }
    Ok(legendre_unchecked(k, u))
}

pub(crate) fn legendre_unchecked(k: usize, u: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, u);
    for j in 1..k {
        let j = j as f64;
        let next = ((2.0 * j + 1.0) * u * cur - j * prev) / (j + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Fully normalized associated Legendre functions `P̄_k^m(cos θ)` for
/// `0 ≤ m ≤ k ≤ s`, packed as `k(k+1)/2 + m`.
///
/// With `Y_{k,0} = P̄_k^0`, `Y_{k,±m} = P̄_k^m · {cos, sin}(mφ)` the
/// products are orthonormal against the normalized measure.
struct AssociatedLegendre {
    a: Vec<f64>,
    b: Vec<f64>,
    diag: Vec<f64>,
    s: usize,
}

impl AssociatedLegendre {
    fn new(s: usize) -> Self {
        let len = (s + 1) * (s + 2) / 2;
        let mut a = vec![0.0; len];
        let mut b = vec![0.0; len];
        for k in 2..=s {
            for m in 0..=k - 2 {
                let (kf, mf) = (k as f64, m as f64);
                let denom = (kf - mf) * (kf + mf);
                a[Self::idx(k, m)] = ((2.0 * kf + 1.0) * (2.0 * kf - 1.0) / denom).sqrt();
                b[Self::idx(k, m)] =
                    ((2.0 * kf + 1.0) * (kf + mf - 1.0) * (kf - mf - 1.0) / (denom * (2.0 * kf - 3.0))).sqrt();
            }
        }
        let mut diag = vec![0.0; s + 1];
        for m in 1..=s {
            diag[m] = if m == 1 {
                3f64.sqrt()
            } else {
                ((2.0 * m as f64 + 1.0) / (2.0 * m as f64)).sqrt()
            };
        }
        AssociatedLegendre { a, b, diag, s }
    }

    fn idx(k: usize, m: usize) -> usize {
        k * (k + 1) / 2 + m
    }

    fn eval(&self, cos_t: f64, sin_t: f64, out: &mut [f64]) {
        let s = self.s;
        out[0] = 1.0;
        let mut pmm = 1.0;
        for m in 0..=s {
            if m > 0 {
                pmm *= self.diag[m] * sin_t;
                out[Self::idx(m, m)] = pmm;
            }
            if m < s {
                out[Self::idx(m + 1, m)] = (2.0 * m as f64 + 3.0).sqrt() * cos_t * pmm;
            }
            for k in m + 2..=s {
                let i = Self::idx(k, m);
                out[i] = self.a[i] * cos_t * out[Self::idx(k - 1, m)] - self.b[i] * out[Self::idx(k - 2, m)];
            }
        }
    }
}

/// Evaluates every real harmonic of degree `≤ s` at points of S².
pub struct HarmonicEvaluator {
    legendre: AssociatedLegendre,
    plm: Vec<f64>,
    cos_m: Vec<f64>,
    sin_m: Vec<f64>,
}

impl HarmonicEvaluator {
    pub fn new(s: usize) -> Self {
        HarmonicEvaluator {
            legendre: AssociatedLegendre::new(s),
            plm: vec![0.0; (s + 1) * (s + 2) / 2],
            cos_m: vec![0.0; s + 1],
            sin_m: vec![0.0; s + 1],
        }
    }

    pub fn degree(&self) -> usize {
        self.legendre.s
    }

    /// Writes `Y_{k,m}(x)` into `out[basis_index(k, m)]`.
    pub fn eval(&mut self, x: &[f64], out: &mut [f64]) {
        let s = self.legendre.s;
        debug_assert!(out.len() >= basis_len(s));
        let z = x[2].clamp(-1.0, 1.0);
        let rho = x[0].hypot(x[1]);
        let sin_t = rho;
        let (c1, s1) = if rho > 0.0 {
            (x[0] / rho, x[1] / rho)
        } else {
            (1.0, 0.0)
        };
        self.legendre.eval(z, sin_t, &mut self.plm);
        self.cos_m[0] = 1.0;
        self.sin_m[0] = 0.0;
        for m in 1..=s {
            self.cos_m[m] = self.cos_m[m - 1] * c1 - self.sin_m[m - 1] * s1;
            self.sin_m[m] = self.sin_m[m - 1] * c1 + self.cos_m[m - 1] * s1;
        }
        for k in 0..=s {
            let base = k * k + k;
            out[base] = self.plm[AssociatedLegendre::idx(k, 0)];
            for m in 1..=k {
                let p = self.plm[AssociatedLegendre::idx(k, m)];
                out[base + m] = p * self.cos_m[m];
                out[base - m] = p * self.sin_m[m];
            }
        }
    }
}

/// Real harmonics of degree `≤ s` at every point: row `(k, m)`, column `i`.
#[derive(Debug, Clone)]
pub struct HarmonicBasisMatrix {
    pub degree_s: usize,
    pub values: DMatrix<f64>,
}

impl HarmonicBasisMatrix {
    pub fn rows(&self) -> usize {
        self.values.nrows()
    }
}

pub fn harmonic_basis(points: &PointSet, s: usize) -> Result<HarmonicBasisMatrix> {
    if points.sphere_dim() != 2 {
        return Err(WsfError::UnsupportedDimension(points.sphere_dim()));
    }
    let rows = basis_len(s);
    let mut values = DMatrix::zeros(rows, points.len());
    let mut eval = HarmonicEvaluator::new(s);
    let mut buf = vec![0.0; rows];
    for (i, p) in points.iter().enumerate() {
        eval.eval(p, &mut buf);
        values.column_mut(i).copy_from_slice(&buf);
    }
    Ok(HarmonicBasisMatrix { degree_s: s, values })
}
