//! Configured, reproducible runs: sample a model, push it through the flows
//! or the second-moment machinery, write CSV/JSON artifacts and a manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::{build_model_matrix, eigenvalues, sample_rng, ModelSpec};
use crate::moment2::{self, PdeStencil};
use crate::observables::{
    distance_report, energy_distance, evolve_moments, ks_against, median, median_abs_imag, moments, predicted_cloud,
    reference_sampler, semicircle_cdf, Reference,
};
use crate::pointset::PointSet;
use crate::polyheat::{default_precision, heat, hermite, HeatStep, Poly};
use crate::rootdyn::{integrate_coefficient, integrate_trajectories, roots, IntegrationOpts, Method, RootOpts, TrajectoryBundle};
use crate::Mode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Flow,
    Deformation,
    Moments,
    Hermite,
    Beyond,
    PdeResidual,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Flow => "flow",
            ExperimentKind::Deformation => "deformation",
            ExperimentKind::Moments => "moments",
            ExperimentKind::Hermite => "hermite",
            ExperimentKind::Beyond => "beyond",
            ExperimentKind::PdeResidual => "pde-residual",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub re: [f64; 2],
    pub im: [f64; 2],
    pub n_re: usize,
    pub n_im: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StencilSpec {
    pub z0: Complex64,
    pub h_tau: f64,
    pub h_z: f64,
}

fn default_t_samples() -> usize {
    11
}
fn default_mc() -> usize {
    10_000
}
fn default_reference_samples() -> usize {
    4096
}
fn default_bins() -> usize {
    40
}
fn default_moment_order() -> usize {
    6
}
fn default_real_tol() -> f64 {
    1e-8
}

/// One experiment, as read from a JSON document. The model is sampled at
/// `tau0`; `model.params.tau` is overwritten.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelSpec,
    pub tau0: Complex64,
    pub tau: Complex64,
    #[serde(default = "default_t_samples")]
    pub t_samples: usize,
    pub outputs: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub precision_bits: Option<u32>,
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    /// `name` or `name_max` bounds a metric from above, `name_min` from below.
    #[serde(default)]
    pub thresholds: BTreeMap<String, f64>,
    #[serde(default)]
    pub method: Option<Method>,
    #[serde(default)]
    pub cross_validate: bool,
    #[serde(default)]
    pub reference: Option<Reference>,
    #[serde(default = "default_reference_samples")]
    pub reference_samples: usize,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    /// Also run the deformation check against the conjugated target τ,
    /// which is expected to fail.
    #[serde(default)]
    pub falsify: bool,
    #[serde(default)]
    pub stencil: Option<StencilSpec>,
    #[serde(default = "default_moment_order")]
    pub moment_order: usize,
    #[serde(default = "default_real_tol")]
    pub real_root_tol: f64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(m.to_string()));
        if self.model.n == 0 {
            return bad("model.n must be positive");
        }
        if self.t_samples < 2 {
            return bad("t_samples must be at least 2");
        }
        if self.mc_samples == 0 || self.reference_samples == 0 {
            return bad("sample counts must be positive");
        }
        if self.histogram_bins < 2 {
            return bad("histogram_bins must be at least 2");
        }
        if self.outputs.as_os_str().is_empty() {
            return bad("outputs must name a directory");
        }
        if let Some(b) = self.precision_bits {
            if b < 64 {
                return bad("precision_bits must be at least 64");
            }
        }
        if let Some(g) = &self.grid {
            if g.n_re == 0 || g.n_im == 0 || !(g.re[0] < g.re[1]) || !(g.im[0] < g.im[1]) {
                return bad("grid needs positive counts and increasing ranges");
            }
        }
        if self.experiment == ExperimentKind::PdeResidual && self.stencil.is_none() {
            return bad("pde-residual needs a stencil");
        }
        if !(self.real_root_tol > 0.0) {
            return bad("real_root_tol must be positive");
        }
        let mut m = self.sampling_model();
        m.brownian_steps = self.model.brownian_steps;
        m.validate().map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    /// The model with the run seed and `τ₀` applied.
    pub fn sampling_model(&self) -> ModelSpec {
        let mut m = self.model.clone();
        m.params.tau = self.tau0;
        m.seed = self.seed;
        m
    }

    fn bits(&self) -> u32 {
        self.precision_bits.unwrap_or_else(|| default_precision(self.model.n))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub threshold: String,
    pub metric: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub wall_seconds: f64,
    pub stages: Vec<Stage>,
    pub files: Vec<FileRecord>,
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub error: Option<String>,
    pub passed: bool,
}

pub const MANIFEST_NAME: &str = "manifest.json";

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    dir: PathBuf,
    files: Vec<FileRecord>,
    stages: Vec<Stage>,
    metrics: BTreeMap<String, f64>,
}

impl Run<'_> {
    fn write(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        fs::write(self.dir.join(name), &buf)?;
        self.files.push(FileRecord { path: name.to_string(), bytes: buf.len() as u64, sha256: sha256_hex(&buf) });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, v)?;
            writeln!(w)?;
            Ok(())
        })
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f(self);
        self.stages.push(Stage { name: name.to_string(), seconds: t.elapsed().as_secs_f64() });
        out
    }

    fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.to_string(), v);
    }
}

/// Executes the configured experiment and writes its artifacts and manifest
/// under `cfg.outputs`. Module errors are recorded in the manifest rather
/// than returned; only configuration and output-directory problems are.
pub fn run(cfg: &ExperimentConfig) -> Result<RunManifest> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.outputs)?;
    let start = Instant::now();
    let mut r = Run { cfg, dir: cfg.outputs.clone(), files: Vec::new(), stages: Vec::new(), metrics: BTreeMap::new() };
    let outcome = match cfg.experiment {
        ExperimentKind::Flow | ExperimentKind::Beyond => run_flow(&mut r),
        ExperimentKind::Deformation => run_deformation(&mut r),
        ExperimentKind::Moments => run_moments(&mut r),
        ExperimentKind::Hermite => run_hermite(&mut r),
        ExperimentKind::PdeResidual => run_pde(&mut r),
    };
    let error = outcome.err().map(|e| e.to_string());
    let checks = evaluate_thresholds(&cfg.thresholds, &r.metrics);
    let passed = error.is_none() && checks.iter().all(|c| c.pass);
    let manifest = RunManifest {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_seconds: start.elapsed().as_secs_f64(),
        stages: r.stages,
        files: r.files,
        metrics: r.metrics,
        checks,
        error,
        passed,
    };
    let f = fs::File::create(cfg.outputs.join(MANIFEST_NAME))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w)?;
    Ok(manifest)
}

pub fn evaluate_thresholds(thresholds: &BTreeMap<String, f64>, metrics: &BTreeMap<String, f64>) -> Vec<Check> {
    thresholds
        .iter()
        .map(|(key, &bound)| {
            let (metric, lower) = if let Some(m) = key.strip_suffix("_min") {
                (m, true)
            } else if let Some(m) = key.strip_suffix("_max") {
                (m, false)
            } else {
                (key.as_str(), false)
            };
            let value = metrics.get(metric).copied().unwrap_or(f64::NAN);
            let pass = if lower { value >= bound } else { value <= bound };
            Check { threshold: key.clone(), metric: metric.to_string(), value, bound, pass }
        })
        .collect()
}

fn sample_start(cfg: &ExperimentConfig) -> Result<PointSet> {
    let spec = cfg.sampling_model();
    let mut rng = sample_rng(spec.seed, 0);
    eigenvalues(&build_model_matrix(&spec, &mut rng)?)
}

/// Count of points with `|Im z| <= tol (1 + |Re z|)`.
pub fn count_real(points: &PointSet, tol: f64) -> usize {
    points.iter().filter(|z| z.im.abs() <= tol * (1.0 + z.re.abs())).count()
}

pub fn real_root_count(p: &Poly, tol: f64) -> Result<usize> {
    Ok(count_real(&roots(p, &RootOpts::fast())?, tol))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Re,
    Im,
    Arg,
    Abs,
}

impl Axis {
    pub fn project(self, z: Complex64) -> f64 {
        match self {
            Axis::Re => z.re,
            Axis::Im => z.im,
            Axis::Arg => z.arg(),
            Axis::Abs => z.norm(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub axis: Axis,
    /// `bins + 1` increasing edges; bins are `[lo, hi)` except the last,
    /// which also holds the maximum.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_lo,bin_hi,count")?;
        for (k, c) in self.counts.iter().enumerate() {
            writeln!(w, "{:e},{:e},{}", self.edges[k], self.edges[k + 1], c)?;
        }
        Ok(())
    }

    /// Pearson χ² against a continuous law given by its CDF, divided by the
    /// number of bins with positive expectation.
    pub fn chi_square_per_bin(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let total: usize = self.counts.iter().sum();
        let mut chi = 0.0;
        let mut used = 0;
        for (k, &c) in self.counts.iter().enumerate() {
            let e = total as f64 * (cdf(self.edges[k + 1]) - cdf(self.edges[k]));
            if e > 0.0 {
                chi += (c as f64 - e).powi(2) / e;
                used += 1;
            }
        }
        if used == 0 {
            f64::INFINITY
        } else {
            chi / used as f64
        }
    }
}

/// Equal-width histogram over the data range; a degenerate range is widened
/// to unit width around the value.
pub fn emit_histogram(points: &PointSet, axis: Axis, bins: usize) -> Histogram {
    assert!(bins >= 2, "histogram needs at least two bins");
    let xs: Vec<f64> = points.iter().map(|&z| axis.project(z)).collect();
    let (mut lo, mut hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if xs.is_empty() {
        (lo, hi) = (0.0, 1.0);
    } else if lo == hi {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let w = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| if k == bins { hi } else { lo + w * k as f64 }).collect();
    let mut counts = vec![0usize; bins];
    for x in xs {
        let k = (((x - lo) / w).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    Histogram { axis, edges, counts }
}

fn bundle_for(cfg: &ExperimentConfig, start: &PointSet) -> Result<TrajectoryBundle> {
    let mode = cfg.model.kind;
    let n = cfg.model.n;
    match cfg.method.unwrap_or(Method::Ode) {
        Method::Ode => {
            let opts = IntegrationOpts { samples: cfg.t_samples, precision_bits: cfg.precision_bits, cross_validate: cfg.cross_validate, ..Default::default() };
            integrate_trajectories(start, n, cfg.tau0, cfg.tau, mode, &opts)
        }
        Method::Coefficient => integrate_coefficient(start, n, cfg.tau0, cfg.tau, mode, cfg.t_samples, cfg.precision_bits),
    }
}

/// Median over paths of the largest distance from the chord towards the
/// predicted endpoint, relative to the diameter of the start set.
pub fn chord_deviation(bundle: &TrajectoryBundle, predicted_end: &[Complex64]) -> f64 {
    let start = bundle.at_sample(0);
    let diam = start.diameter().max(f64::MIN_POSITIVE);
    median(bundle.paths.iter().zip(predicted_end).map(|(path, &end)| {
        let z0 = path[0];
        path.iter().zip(&bundle.t_samples).map(|(&z, &t)| (z - (z0 + (end - z0) * t)).norm()).fold(0.0, f64::max) / diam
    }))
}

fn run_flow(r: &mut Run) -> Result<()> {
    let cfg = r.cfg;
    let start = r.stage("sample", |_| sample_start(cfg))?;
    r.write("start.csv", |w| start.write_csv(w))?;
    let bundle = r.stage("trajectories", |_| bundle_for(cfg, &start))?;
    r.write("trajectories.csv", |w| bundle.write_csv(w))?;
    r.write("collisions.json", |w| bundle.write_collisions_json(w))?;
    let end = bundle.endpoints();
    r.write("endpoints.csv", |w| end.write_csv(w))?;
    let bins = cfg.histogram_bins;
    for (name, axis) in [("hist_re.csv", Axis::Re), ("hist_im.csv", Axis::Im)] {
        let h = emit_histogram(&end, axis, bins);
        r.write(name, |w| h.write_csv(w))?;
    }

    let n = end.len() as f64;
    r.metric("median_abs_im", median_abs_imag(&end));
    r.metric("max_abs_im", end.iter().map(|z| z.im.abs()).fold(0.0, f64::max));
    r.metric("real_fraction", count_real(&end, cfg.real_root_tol) as f64 / n);
    r.metric("real_count", count_real(&end, cfg.real_root_tol) as f64);
    r.metric("collisions", bundle.collisions.len() as f64);
    if let Some(d) = bundle.endpoint_discrepancy {
        r.metric("endpoint_discrepancy", d);
    }
    let sum_drift = if cfg.model.kind == Mode::Additive { (end.sum() - start.sum()).norm() / n } else { f64::NAN };
    if sum_drift.is_finite() {
        r.metric("mean_drift", sum_drift);
    }
    if cfg.model.kind == Mode::Multiplicative {
        r.metric("median_abs_log_radius", median(end.iter().map(|z| z.norm().ln().abs())));
    }

    r.stage("observables", |r| {
        let predicted = predicted_cloud(&start, cfg.tau - cfg.tau0, cfg.model.kind)?;
        r.write("predicted.csv", |w| predicted.write_csv(w))?;
        r.metric("chord_deviation", chord_deviation(&bundle, &predicted.points));
        r.metric("energy_to_prediction", energy_distance(&end.points, &predicted.points));
        if let Some(reference) = cfg.reference {
            let mut rng = sample_rng(cfg.seed, 1 << 40);
            let refs = reference_sampler(reference, cfg.reference_samples, &mut rng)?;
            r.write("reference.csv", |w| refs.write_csv(w))?;
            let rep = distance_report(&end.points, &refs.points);
            r.metric("energy_to_reference", rep.energy);
            r.metric("ks_im_reference", rep.ks_im);
            r.metric("ks_abs_reference", rep.ks_radius);
            let re: Vec<f64> = end.iter().map(|z| z.re).collect();
            match reference {
                Reference::Semicircle { s } => {
                    r.metric("ks_re_reference", ks_against(&re, |x| semicircle_cdf(x, s)));
                    let h = emit_histogram(&end, Axis::Re, bins);
                    r.metric("hist_chi2_per_bin", h.chi_square_per_bin(|x| semicircle_cdf(x, s)));
                }
                _ => r.metric("ks_re_reference", rep.ks_re),
            }
        }
        Ok(())
    })
}

fn deformation_grid(cfg: &ExperimentConfig) -> Vec<Complex64> {
    match &cfg.grid {
        Some(g) => moment2::grid((g.re[0], g.re[1]), (g.im[0], g.im[1]), g.n_re, g.n_im),
        None => moment2::grid((-2.0, 2.0), (-2.0, 2.0), 3, 3),
    }
}

fn run_deformation(r: &mut Run) -> Result<()> {
    let cfg = r.cfg;
    let g = deformation_grid(cfg);
    let m = cfg.mc_samples;
    let mut lhs_spec = cfg.sampling_model();
    lhs_spec.params.tau = cfg.tau;
    // Independent streams for the two sides.
    lhs_spec.seed = cfg.seed.wrapping_mul(2).wrapping_add(1);
    let mut rhs_spec = cfg.sampling_model();
    rhs_spec.seed = cfg.seed.wrapping_mul(2);
    let lhs = r.stage("direct", |_| moment2::estimate_d_direct(&lhs_spec, &g, m))?;
    r.json("lhs.json", &lhs)?;
    let rhs = r.stage("heatflow", |_| moment2::estimate_d_heatflow(&rhs_spec, cfg.tau0, cfg.tau, &g, m))?;
    r.json("rhs.json", &rhs)?;
    let v = moment2::verify_deformation(&lhs, &rhs, 4.0)?;
    r.write("verdict.csv", |w| v.write_csv(w))?;
    r.metric("pass_fraction", v.pass_fraction);
    r.metric("max_abs_z", v.rows.iter().map(|x| x.z_score.abs()).fold(0.0, f64::max));
    if cfg.falsify {
        let wrong = r.stage("falsification", |_| moment2::estimate_d_heatflow(&rhs_spec, cfg.tau0, cfg.tau.conj(), &g, m))?;
        r.json("rhs_conjugated.json", &wrong)?;
        let vf = moment2::verify_deformation(&lhs, &wrong, 4.0)?;
        r.write("verdict_conjugated.csv", |w| vf.write_csv(w))?;
        r.metric("falsified_pass_fraction", vf.pass_fraction);
    }
    Ok(())
}

fn run_moments(r: &mut Run) -> Result<()> {
    let cfg = r.cfg;
    if cfg.model.kind != Mode::Additive {
        return Err(Error::ConfigInvalid("the moment equations are for the additive flow".into()));
    }
    let start = r.stage("sample", |_| sample_start(cfg))?;
    let bundle = r.stage("trajectories", |_| bundle_for(cfg, &start))?;
    r.write("trajectories.csv", |w| bundle.write_csv(w))?;
    let k = cfg.moment_order;
    let n = cfg.model.n;
    let m0 = moments(&start, k);
    r.write("moments_start.json", |w| m0.write_json(w))?;
    let mut rows = Vec::new();
    let (mut worst, mut m1_drift, mut m2_err) = (0.0f64, 0.0f64, 0.0f64);
    r.stage("moment-ode", |_| {
        for (s, &tau) in bundle.tau_samples.iter().enumerate() {
            let traj = moments(&bundle.at_sample(s), k);
            let ode = evolve_moments(&m0, n, cfg.tau0, tau)?;
            for j in 0..=k {
                worst = worst.max((traj.m[j] - ode.m[j]).norm());
                rows.push((bundle.t_samples[s], j, traj.m[j], ode.m[j]));
            }
            if k >= 1 {
                m1_drift = m1_drift.max((traj.m[1] - m0.m[1]).norm());
            }
            if k >= 2 {
                let closed = m0.m[2] - (tau - cfg.tau0) * (1.0 - 1.0 / n as f64);
                m2_err = m2_err.max((traj.m[2] - closed).norm());
            }
        }
        Ok(())
    })?;
    r.write("moments.csv", |w| {
        writeln!(w, "t,k,traj_re,traj_im,ode_re,ode_im")?;
        for (t, j, a, b) in &rows {
            writeln!(w, "{t:e},{j},{:e},{:e},{:e},{:e}", a.re, a.im, b.re, b.im)?;
        }
        Ok(())
    })?;
    r.metric("max_moment_residual", worst);
    r.metric("m1_drift", m1_drift);
    r.metric("m2_closed_form_error", m2_err);
    Ok(())
}

fn run_hermite(r: &mut Run) -> Result<()> {
    let cfg = r.cfg;
    let n = cfg.model.n;
    let bits = cfg.bits();
    let h = r.stage("hermite", |_| Ok(hermite(n, bits)))?;
    r.write("hermite.txt", |w| h.write_text(w))?;
    let back = heat(&h, &HeatStep::additive(Complex64::new(1.0, 0.0), n));
    let target = Poly::monomial(n, bits);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..=n {
        let d = back.coeff(k).sub(target.coeff(k));
        worst = worst.max(d.log2_abs());
    }
    r.metric("inversion_error_log2", worst);
    let zs = r.stage("roots", |_| roots(&h, &RootOpts::default()))?;
    r.write("roots.csv", |w| zs.write_csv(w))?;
    let hist = emit_histogram(&zs, Axis::Re, cfg.histogram_bins);
    r.write("hist_re.csv", |w| hist.write_csv(w))?;
    let real = count_real(&zs, cfg.real_root_tol);
    r.metric("real_count", real as f64);
    r.metric("real_fraction", real as f64 / n as f64);
    let re: Vec<f64> = zs.iter().map(|z| z.re).collect();
    r.metric("ks_re_semicircle", ks_against(&re, |x| semicircle_cdf(x, 1.0)));
    Ok(())
}

fn run_pde(r: &mut Run) -> Result<()> {
    let cfg = r.cfg;
    let st = cfg.stencil.as_ref().expect("validated");
    let stencil = PdeStencil { tau0: cfg.tau0, z0: st.z0, h_tau: st.h_tau, h_z: st.h_z, common_random_numbers: true };
    let spec = cfg.sampling_model();
    let res = r.stage("stencil", |_| moment2::pde_residual_check(&spec, &stencil, cfg.mc_samples))?;
    r.json("pde_residual.json", &res)?;
    r.metric("residual_re", res.residual.re);
    r.metric("residual_im", res.residual.im);
    r.metric("residual_sigmas", (res.residual.re.abs() / res.se.re).max(res.residual.im.abs() / res.se.im));
    Ok(())
}
