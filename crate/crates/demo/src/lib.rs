//! Browser bindings. Point data crosses the boundary as flat `[re, im, ...]`
//! arrays of f64.

use heatflow::models::{build_model_matrix, eigenvalues, sample_rng, InitialSpectrum, ModelSpec};
use heatflow::observables::predicted_cloud;
use heatflow::polyheat::{default_precision, heat, HeatStep, Poly};
use heatflow::rootdyn::{integrate_coefficient, integrate_trajectories, roots, IntegrationOpts, RootOpts};
use heatflow::{Complex64, Mode, PointSet};
use wasm_bindgen::prelude::*;

const MAX_N: usize = 400;

fn flat(points: impl IntoIterator<Item = Complex64>) -> Vec<f64> {
    points.into_iter().flat_map(|z| [z.re, z.im]).collect()
}

fn js(e: heatflow::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn check_n(n: usize) -> Result<(), JsError> {
    if n == 0 || n > MAX_N {
        return Err(JsError::new(&format!("n must be between 1 and {MAX_N}")));
    }
    Ok(())
}

/// Eigenvalues of the additive elliptic model with `s = 1` at real `tau0`.
fn start_cloud(n: usize, seed: u64, tau0: f64) -> heatflow::Result<PointSet> {
    let mut spec = ModelSpec::additive(n, 1.0, Complex64::new(tau0, 0.0), InitialSpectrum::Zero);
    spec.seed = seed;
    let mut rng = sample_rng(seed, 0);
    eigenvalues(&build_model_matrix(&spec, &mut rng)?)
}

/// Zero paths from the model at `tau0` to `tau`, sample-major: entry
/// `2 (s n + j)` is the real part of zero `j` at sample `s`. The coefficient
/// route is used when `exact` is set, which copes with the collisions of a
/// forward flow out of real spectra.
#[wasm_bindgen]
pub fn trajectories(n: usize, seed: u64, tau0: f64, tau_re: f64, tau_im: f64, samples: usize, exact: bool) -> Result<Vec<f64>, JsError> {
    check_n(n)?;
    let start = start_cloud(n, seed, tau0).map_err(js)?;
    let (a, b) = (Complex64::new(tau0, 0.0), Complex64::new(tau_re, tau_im));
    let samples = samples.clamp(2, 200);
    let bundle = if exact {
        integrate_coefficient(&start, n, a, b, Mode::Additive, samples, None)
    } else {
        integrate_trajectories(&start, n, a, b, Mode::Additive, &IntegrationOpts { samples, ..Default::default() })
    }
    .map_err(js)?;
    Ok(flat((0..bundle.n_samples()).flat_map(|s| bundle.paths.iter().map(move |p| p[s]))))
}

/// Roots of a GUE characteristic polynomial after forward heat for time `t`.
#[wasm_bindgen]
pub fn evolved_gue_roots(n: usize, seed: u64, t: f64) -> Result<Vec<f64>, JsError> {
    check_n(n)?;
    let start = start_cloud(n, seed, 0.0).map_err(js)?;
    let p = Poly::from_roots(&start, default_precision(n));
    let q = heat(&p, &HeatStep::additive(Complex64::new(t, 0.0), n));
    Ok(flat(roots(&q, &RootOpts::fast()).map_err(js)?.points))
}

/// Each point moved once along its initial velocity over `delta_tau`.
#[wasm_bindgen]
pub fn predicted_endpoints(n: usize, seed: u64, tau0: f64, tau_re: f64, tau_im: f64) -> Result<Vec<f64>, JsError> {
    check_n(n)?;
    let start = start_cloud(n, seed, tau0).map_err(js)?;
    let delta = Complex64::new(tau_re - tau0, tau_im);
    Ok(flat(predicted_cloud(&start, delta, Mode::Additive).map_err(js)?.points))
}
