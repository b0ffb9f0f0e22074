//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a flat `Float64Array`; the page slices it.

use isoflow::disorder::{annealed_closed_g, quenched_closed_g, ThermalParams};
use isoflow::equilibrium::{marginal_bin_probabilities, mean_cos_coupling, CanonicalParams};
use isoflow::flow::{integrate, FlowParams, FlowVariant};
use isoflow::hermitian::{to_bloch, BlochDecomposition, HermitianMatrix};
use isoflow::stochastic::{run_ensemble, EnsembleSpec, Scheme, Thermalizer, HISTOGRAM_BINS};
use isoflow::Convention;
use wasm_bindgen::prelude::*;

fn js(e: isoflow::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Deterministic flow of a unit-gap Hamiltonian towards `G = sigma_z`.
/// Returns `(t, x, y, z)` for each recorded point of the Bloch vector.
#[wasm_bindgen]
pub fn flow_path(
    theta0: f64,
    phi0: f64,
    lambda: f64,
    mu: f64,
    with_unitary: bool,
    t_final: f64,
) -> Result<Vec<f64>, JsError> {
    let h0 = BlochDecomposition::new(0.0, 1.0, theta0, phi0).to_matrix();
    let g = HermitianMatrix::z_reference(0.0, mu);
    let dt = (0.05 / (lambda * mu).max(1.0)).min(t_final / 100.0);
    let stride = ((t_final / dt) as usize / 400).max(1);
    let variant = if with_unitary {
        FlowVariant::WithUnitary
    } else {
        FlowVariant::PureGradient
    };
    let traj = integrate(
        &h0,
        &g,
        &FlowParams::new(lambda, dt, t_final)
            .with_variant(variant)
            .with_stride(stride),
    )
    .map_err(js)?;
    let mut out = Vec::with_capacity(4 * traj.samples.len());
    for s in &traj.samples {
        let [x, y, z] = to_bloch(&s.h).map_err(js)?.direction();
        out.extend([s.t, x, y, z]);
    }
    Ok(out)
}

/// Stochastic thermalization from the equator with `nu = 1`, `mu = 2`.
/// Returns 50 empirical bin probabilities of `cos(theta)`, the 50
/// stationary ones, then the sample mean, its standard error and the
/// closed-form mean.
#[wasm_bindgen]
pub fn thermalize(lambda_mu: f64, paths: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    let lambda = lambda_mu / 2.0;
    let b0 = BlochDecomposition::new(0.0, 1.0, std::f64::consts::FRAC_PI_2, 0.0);
    let model = Thermalizer::two_level(&b0, 0.0, 2.0, lambda, Convention::Section6, seed).map_err(js)?;
    let dt = model.max_dt().map_err(js)?.min(1e-3);
    let omega = model.omega().map_err(js)?;
    let t_final = 6.0 / omega.max(model.noise.diffusion_d);
    let res = run_ensemble(&model, &EnsembleSpec::new(paths.max(1), dt, t_final, Scheme::ZEm)).map_err(js)?;
    let summary = res.summary();
    let mut out = summary.histogram.probabilities();
    out.extend(marginal_bin_probabilities(0.5 * lambda_mu, HISTOGRAM_BINS));
    out.extend([
        summary.cos_theta.mean,
        summary.cos_theta.standard_error,
        mean_cos_coupling(lambda_mu),
    ]);
    Ok(out)
}

/// Quenched and annealed `<sigma_z>` against bath temperature `T` in
/// `[0.02, 5]`, as `(T, quenched, annealed)` triples.
#[wasm_bindgen]
pub fn averages_curve(lambda: f64, points: usize) -> Result<Vec<f64>, JsError> {
    let p = CanonicalParams::new(lambda, 2.0, 1.0);
    let n = points.max(2);
    let mut out = Vec::with_capacity(3 * n);
    for k in 0..n {
        let temperature = 0.02 + (5.0 - 0.02) * k as f64 / (n - 1) as f64;
        let t = ThermalParams::from_temperature(temperature).map_err(js)?;
        out.extend([
            temperature,
            quenched_closed_g(&p, &t).map_err(js)?,
            annealed_closed_g(&p, &t).map_err(js)?,
        ]);
    }
    Ok(out)
}
