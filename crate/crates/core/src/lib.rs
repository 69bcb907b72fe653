//! Weighted spectral filters for noisy scattered data on the sphere.
//!
//! A fit takes data `y` on nodes with positive quadrature weights `W`, forms
//! `Ψ = W^{1/2} Φ W^{1/2}` from the kernel matrix `Φ`, and returns the
//! coefficients `a = W^{1/2} g_λ(Ψ) W^{1/2} y` of the kernel expansion.
//!
//! ```
//! use sphere_wsf::estimator::WeightedSystem;
//! use sphere_wsf::filters::FilterSpec;
//! use sphere_wsf::geometry::sample_random;
//! use sphere_wsf::kernels::{target_function, KernelSpec};
//! use sphere_wsf::model_selection::quadrature_for;
//!
//! let points = sample_random(200, 1).unwrap();
//! let y: Vec<f64> = points.iter().map(target_function).collect();
//! let rule = quadrature_for(&points, None).unwrap();
//! let system = WeightedSystem::new(KernelSpec::default(), &rule).unwrap();
//! let model = system.fit(&y, &FilterSpec::tikhonov(1e-2 * system.kappa()).unwrap()).unwrap();
//! assert_eq!(model.evaluate(&points).len(), 200);
//! ```

// NaN is rejected by writing `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod designs;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod filters;
pub mod geometry;
pub mod harmonics;
pub mod io;
pub mod kernels;
pub mod model_selection;
pub mod numerics;
pub mod quadrature;

pub use error::{Result, WsfError};
