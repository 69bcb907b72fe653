//! Browser bindings: filter response curves, noisy fits rendered as a
//! longitude/latitude heat map, and the conditioning of the filtered system.

use wasm_bindgen::prelude::*;

use sphere_wsf::estimator::{EvaluationPlan, LabeledData, WeightedSystem};
use sphere_wsf::experiments::{gen_noise, rmse, NoiseSpec};
use sphere_wsf::filters::{filter_scalar, FilterFamily, FilterSpec};
use sphere_wsf::geometry::{sample_random, PointSet};
use sphere_wsf::kernels::{target_function, KernelSpec};
use sphere_wsf::model_selection::{quadrature_for, select_with_system, ParameterGrid};
use sphere_wsf::quadrature::QuadratureRule;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn family(name: &str) -> Result<FilterFamily, JsError> {
    name.parse().map_err(js_err)
}

/// `g_λ(σ)σ` on `samples` log-spaced σ in `[κ·1e-4, κ]` with κ = 1, where λ
/// is `ratio` for Tikhonov and cut-off and `l = round(1/ratio)` for Landweber.
/// Returns the σ values followed by the responses.
#[wasm_bindgen]
pub fn filter_response(name: &str, ratio: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    let spec = FilterSpec::new(family(name)?, ratio).map_err(js_err)?;
    let samples = samples.max(2);
    let mut sigma = Vec::with_capacity(samples);
    let mut response = Vec::with_capacity(samples);
    for i in 0..samples {
        let s = 10f64.powf(-4.0 + 4.0 * i as f64 / (samples - 1) as f64);
        sigma.push(s);
        response.push(filter_scalar(&spec, s, 1.0, 1.0).map_err(js_err)? * s);
    }
    sigma.extend(response);
    Ok(sigma)
}

/// Noisy samples of the six-bump test function together with the
/// factorized weighted system and a lat/lon evaluation grid.
#[wasm_bindgen]
pub struct Scene {
    kernel: KernelSpec,
    train: LabeledData,
    clean: Vec<f64>,
    val: LabeledData,
    val_rule: QuadratureRule,
    system: WeightedSystem,
    degree: usize,
    grid_plan: EvaluationPlan,
    grid_truth: Vec<f64>,
    width: usize,
    height: usize,
}

fn latlon_grid(width: usize, height: usize) -> Vec<[f64; 3]> {
    let mut xyz = Vec::with_capacity(width * height);
    for r in 0..height {
        let lat = std::f64::consts::FRAC_PI_2 - std::f64::consts::PI * (r as f64 + 0.5) / height as f64;
        for c in 0..width {
            let lon = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * (c as f64 + 0.5) / width as f64;
            xyz.push([lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]);
        }
    }
    xyz
}

fn noisy(points: PointSet, delta: f64, seed: u64) -> Result<(LabeledData, Vec<f64>), JsError> {
    let clean: Vec<f64> = points.iter().map(target_function).collect();
    let noise = gen_noise(&NoiseSpec::new(delta, seed), clean.len()).map_err(js_err)?;
    let values = clean.iter().zip(&noise).map(|(c, e)| c + e).collect();
    Ok((LabeledData::new(points, values).map_err(js_err)?, clean))
}

#[wasm_bindgen]
impl Scene {
    /// `n` random training points with noise level `delta`, plus `n/2`
    /// validation points; the heat map is `width × height`.
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, delta: f64, seed: u32, width: usize, height: usize) -> Result<Scene, JsError> {
        if n < 10 || width == 0 || height == 0 {
            return Err(JsError::new("need at least 10 points and a nonempty grid"));
        }
        let seed = u64::from(seed);
        let kernel = KernelSpec::default();
        let (train, clean) = noisy(sample_random(n, seed).map_err(js_err)?, delta, seed + 1)?;
        let (val, _) = noisy(sample_random(n / 2, seed + 2).map_err(js_err)?, delta, seed + 3)?;
        let rule = quadrature_for(&train.points, None).map_err(js_err)?;
        let val_rule = quadrature_for(&val.points, None).map_err(js_err)?;
        let system = WeightedSystem::new(kernel, &rule).map_err(js_err)?;
        let grid = PointSet::from_xyz(&latlon_grid(width, height)).map_err(js_err)?;
        let grid_truth = grid.iter().map(target_function).collect();
        let grid_plan = EvaluationPlan::new(&kernel, &train.points, &grid);
        Ok(Scene {
            kernel,
            train,
            clean,
            val,
            val_rule,
            system,
            degree: rule.degree_s,
            grid_plan,
            grid_truth,
            width,
            height,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Largest eigenvalue κ of the weighted kernel matrix.
    pub fn kappa(&self) -> f64 {
        self.system.kappa()
    }

    /// Exactness degree of the training quadrature.
    pub fn quadrature_degree(&self) -> usize {
        self.degree
    }

    /// Training points as `x, y, z, value` quadruples.
    pub fn samples(&self) -> Vec<f64> {
        self.train
            .points
            .iter()
            .zip(&self.train.values)
            .flat_map(|(p, &v)| [p[0], p[1], p[2], v])
            .collect()
    }

    /// The noise-free function on the heat-map grid, row-major from the north.
    pub fn truth(&self) -> Vec<f64> {
        self.grid_truth.clone()
    }

    fn spec(&self, name: &str, ratio: f64) -> Result<FilterSpec, JsError> {
        let grid = ParameterGrid::relative(family(name)?, self.system.kappa(), &[ratio]).map_err(js_err)?;
        Ok(grid.specs()[0])
    }

    /// Filtered fit with parameter `ratio·κ`. Returns the grid values followed
    /// by the grid RMSE against the noise-free function.
    pub fn fit(&self, name: &str, ratio: f64) -> Result<Vec<f64>, JsError> {
        let spec = self.spec(name, ratio)?;
        let coef = self.system.coefficients(&self.train.values, &spec).map_err(js_err)?;
        let mut out = self.grid_plan.apply(&coef);
        let err = rmse(&out, &self.grid_truth).map_err(js_err)?;
        out.push(err);
        Ok(out)
    }

    /// Ratio chosen by weighted validation over `{1, 1/2, …, 1/⌈√n⌉}`.
    pub fn select(&self, name: &str) -> Result<f64, JsError> {
        let f = family(name)?;
        let grid = ParameterGrid::harmonic(f, self.train.len(), self.system.kappa()).map_err(js_err)?;
        let res = select_with_system(
            &self.system,
            &self.train.values,
            &self.val,
            &self.val_rule,
            &self.kernel,
            &grid,
        )
        .map_err(js_err)?;
        Ok(res.chosen_spec(f).spectral_level(self.system.kappa()) / self.system.kappa())
    }

    /// 2-norm condition number of the filtered system.
    pub fn condition_number(&self, name: &str, ratio: f64) -> Result<f64, JsError> {
        let spec = self.spec(name, ratio)?;
        match self.system.conditioning(Some(&spec)).map_err(js_err)? {
            Some(c) => Ok(c.cnkm),
            None => Err(JsError::new("too many points for a condition estimate")),
        }
    }

    /// RMSE of the noisy training values against the clean ones.
    pub fn noise_rmse(&self) -> f64 {
        rmse(&self.train.values, &self.clean).unwrap_or(f64::NAN)
    }
}
