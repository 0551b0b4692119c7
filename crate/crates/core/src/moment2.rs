//! Monte Carlo second moments `D(z) = E|det(z - X)|²` of the random models,
//! computed directly and through the heat operators, and the checks built on
//! them.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{build_model_matrix, eigenvalues, sample_rng, ModelSpec};
use crate::mp::effective_bits;
use crate::polyheat::{apply_factors, heat_additive, multiplicative_factors, HeatStep, Poly};
use crate::Mode;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const MIN_SAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Direct,
    Heatflow,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SecondMomentReport {
    #[serde(with = "pairs")]
    pub grid: Vec<Complex64>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Median of ten block means; a heavy-tail diagnostic only.
    pub median_of_means: Vec<f64>,
    #[serde(rename = "M")]
    pub m: usize,
    pub route: Route,
    #[serde(rename = "params")]
    pub spec: ModelSpec,
    pub tau0: Complex64,
    pub tau: Complex64,
}

mod pairs {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let v: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|p| Complex64::new(p[0], p[1])).collect())
    }
}

impl SecondMomentReport {
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

/// `n_re × n_im` grid over the rectangle, inset 10% from its edges.
pub fn grid(re: (f64, f64), im: (f64, f64), n_re: usize, n_im: usize) -> Vec<Complex64> {
    let axis = |(lo, hi): (f64, f64), n: usize| -> Vec<f64> {
        let inset = 0.1 * (hi - lo);
        let (lo, hi) = (lo + inset, hi - inset);
        if n == 1 {
            return vec![0.5 * (lo + hi)];
        }
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    };
    let xs = axis(re, n_re);
    let ys = axis(im, n_im);
    ys.iter().flat_map(|&y| xs.iter().map(move |&x| Complex64::new(x, y))).collect()
}

fn map_samples<T: Send>(m: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        (0..m).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..m).map(f).collect()
    }
}

/// Pairwise summation; the split points depend only on the length.
fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Mean, standard error and median of block means of `exp(l_i)`, from the
/// logs `l_i`, without leaving the f64 range until the final scale.
fn reduce_logs(logs: &[f64]) -> Result<(f64, f64, f64)> {
    let m = logs.len();
    let lmax = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lmax == f64::NEG_INFINITY {
        return Ok((0.0, 0.0, 0.0));
    }
    if !lmax.is_finite() {
        return Err(Error::Overflow("non-finite log determinant".into()));
    }
    let w: Vec<f64> = logs.iter().map(|l| (l - lmax).exp()).collect();
    let w2: Vec<f64> = w.iter().map(|x| x * x).collect();
    let mf = m as f64;
    let mean_w = pairwise_sum(&w) / mf;
    let var_w = ((pairwise_sum(&w2) / mf - mean_w * mean_w) * mf / (mf - 1.0)).max(0.0);
    let blocks = 10.min(m);
    let mut block_means: Vec<f64> = (0..blocks)
        .map(|b| {
            let (lo, hi) = (b * m / blocks, (b + 1) * m / blocks);
            pairwise_sum(&w[lo..hi]) / (hi - lo) as f64
        })
        .collect();
    block_means.sort_by(|a, b| a.total_cmp(b));
    let mom = if blocks % 2 == 1 { block_means[blocks / 2] } else { 0.5 * (block_means[blocks / 2 - 1] + block_means[blocks / 2]) };
    let scale = lmax.exp();
    let out = (mean_w * scale, (var_w / mf).sqrt() * scale, mom * scale);
    if !out.0.is_finite() || !out.1.is_finite() {
        return Err(Error::Overflow(format!("second moment exceeds the f64 range (log = {lmax:.1})")));
    }
    Ok(out)
}

fn check_inputs(spec: &ModelSpec, z_grid: &[Complex64], m: usize) -> Result<()> {
    if m < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_SAMPLES, got: m });
    }
    if z_grid.is_empty() {
        return Err(Error::InvalidParams("empty evaluation grid".into()));
    }
    spec.validate()
}

/// `ln|det(z - X)|²` for every grid point, one row per sample.
fn direct_logs(spec: &ModelSpec, z_grid: &[Complex64], m: usize) -> Result<Vec<Vec<f64>>> {
    map_samples(m, |i| {
        let mut rng = sample_rng(spec.seed, i as u64);
        let x = build_model_matrix(spec, &mut rng)?;
        let ev = eigenvalues(&x)?;
        Ok(z_grid.iter().map(|z| ev.iter().map(|l| (z - l).norm_sqr().ln()).sum()).collect())
    })
}

fn heat_precision(n: usize) -> u32 {
    effective_bits((2 * n as u32 + 64).max(128))
}

/// Mode-appropriate heat operator from `τ₀` to `τ`, with the multiplicative
/// factors computed once.
enum Operator {
    Additive(HeatStep),
    Multiplicative(Vec<crate::mp::MpComplex>),
}

impl Operator {
    fn new(mode: Mode, n: usize, delta_tau: Complex64, bits: u32) -> Self {
        match mode {
            Mode::Additive => Operator::Additive(HeatStep::additive(delta_tau, n)),
            Mode::Multiplicative => Operator::Multiplicative(multiplicative_factors(&HeatStep::multiplicative(delta_tau, n), bits)),
        }
    }

    fn apply(&self, p: &Poly) -> Poly {
        match self {
            Operator::Additive(step) => heat_additive(p, step),
            Operator::Multiplicative(f) => apply_factors(p, f),
        }
    }
}

fn heatflow_logs(spec0: &ModelSpec, delta_tau: Complex64, z_grid: &[Complex64], m: usize) -> Result<Vec<Vec<f64>>> {
    let bits = heat_precision(spec0.n);
    let op = Operator::new(spec0.kind, spec0.n, delta_tau, bits);
    let ln2 = std::f64::consts::LN_2;
    map_samples(m, |i| {
        let mut rng = sample_rng(spec0.seed, i as u64);
        let x = build_model_matrix(spec0, &mut rng)?;
        let q = op.apply(&Poly::from_roots(&eigenvalues(&x)?, bits));
        Ok(z_grid.iter().map(|&z| 2.0 * ln2 * q.evaluate(z).log2_abs()).collect())
    })
}

fn report(logs: &[Vec<f64>], z_grid: &[Complex64], route: Route, spec: &ModelSpec, tau0: Complex64, tau: Complex64) -> Result<SecondMomentReport> {
    let g = z_grid.len();
    let (mut est, mut se, mut mom) = (Vec::with_capacity(g), Vec::with_capacity(g), Vec::with_capacity(g));
    for k in 0..g {
        let col: Vec<f64> = logs.iter().map(|row| row[k]).collect();
        let (a, b, c) = reduce_logs(&col)?;
        est.push(a);
        se.push(b);
        mom.push(c);
    }
    Ok(SecondMomentReport {
        grid: z_grid.to_vec(),
        estimates: est,
        std_errors: se,
        median_of_means: mom,
        m: logs.len(),
        route,
        spec: spec.clone(),
        tau0,
        tau,
    })
}

/// `E|det(z - X)|²` sampled from the model as specified. Samples use the
/// streams `0..m` of `spec.seed`.
pub fn estimate_d_direct(spec: &ModelSpec, z_grid: &[Complex64], m: usize) -> Result<SecondMomentReport> {
    check_inputs(spec, z_grid, m)?;
    let logs = direct_logs(spec, z_grid, m)?;
    let tau = spec.params.tau;
    report(&logs, z_grid, Route::Direct, spec, tau, tau)
}

/// `E|q(z)|²` where `q` is the characteristic polynomial of the model at
/// `τ₀`, carried to `τ` by the mode's heat operator.
pub fn estimate_d_heatflow(spec: &ModelSpec, tau0: Complex64, tau: Complex64, z_grid: &[Complex64], m: usize) -> Result<SecondMomentReport> {
    let mut spec0 = spec.clone();
    spec0.params.tau = tau0;
    check_inputs(&spec0, z_grid, m)?;
    let logs = heatflow_logs(&spec0, tau - tau0, z_grid, m)?;
    report(&logs, z_grid, Route::Heatflow, &spec0, tau0, tau)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictRow {
    pub z: Complex64,
    pub lhs: f64,
    pub rhs: f64,
    pub combined_se: f64,
    pub z_score: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictTable {
    pub rows: Vec<VerdictRow>,
    pub threshold: f64,
    pub pass_fraction: f64,
}

/// Share of grid points that must agree for the table to pass.
pub const PASS_FRACTION: f64 = 0.85;

impl VerdictTable {
    pub fn passed(&self) -> bool {
        self.pass_fraction >= PASS_FRACTION
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "z_re,z_im,lhs,rhs,combined_se,z_score,pass")?;
        for r in &self.rows {
            writeln!(w, "{:e},{:e},{:e},{:e},{:e},{:e},{}", r.z.re, r.z.im, r.lhs, r.rhs, r.combined_se, r.z_score, r.pass)?;
        }
        Ok(())
    }
}

pub fn verify_deformation(lhs: &SecondMomentReport, rhs: &SecondMomentReport, threshold: f64) -> Result<VerdictTable> {
    if lhs.grid != rhs.grid {
        return Err(Error::GridMismatch);
    }
    let rows: Vec<VerdictRow> = (0..lhs.grid.len())
        .map(|k| {
            let (a, b) = (lhs.estimates[k], rhs.estimates[k]);
            let se = lhs.std_errors[k].hypot(rhs.std_errors[k]);
            let diff = a - b;
            let z_score = if diff == 0.0 { 0.0 } else { diff / se };
            VerdictRow { z: lhs.grid[k], lhs: a, rhs: b, combined_se: se, z_score, pass: diff.abs() <= threshold * se }
        })
        .collect();
    let pass_fraction = rows.iter().filter(|r| r.pass).count() as f64 / rows.len() as f64;
    Ok(VerdictTable { rows, threshold, pass_fraction })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsReport {
    #[serde(with = "pairs")]
    pub grid: Vec<Complex64>,
    /// `(1/N) ln E|det|²`.
    pub t: Vec<f64>,
    /// `E (1/N) ln |det|²`.
    pub s: Vec<f64>,
    pub se_t: Vec<f64>,
    pub se_s: Vec<f64>,
}

/// The log of the mean and the mean of the log of `|det(z - X)|²`, both per
/// unit dimension.
pub fn estimate_t_and_s(spec: &ModelSpec, z_grid: &[Complex64], m: usize) -> Result<TsReport> {
    check_inputs(spec, z_grid, m)?;
    let logs = direct_logs(spec, z_grid, m)?;
    let n = spec.n as f64;
    let mf = m as f64;
    let mut out = TsReport { grid: z_grid.to_vec(), t: vec![], s: vec![], se_t: vec![], se_s: vec![] };
    for k in 0..z_grid.len() {
        let col: Vec<f64> = logs.iter().map(|row| row[k]).collect();
        let (mean, se, _) = reduce_logs(&col)?;
        if !(mean > 0.0) {
            return Err(Error::NonpositiveMean { index: k });
        }
        if col.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonpositiveMean { index: k });
        }
        let ls = pairwise_sum(&col) / mf;
        let var = col.iter().map(|l| (l - ls) * (l - ls)).sum::<f64>() / (mf - 1.0);
        out.t.push(mean.ln() / n);
        out.se_t.push(se / (mean * n));
        out.s.push(ls / n);
        out.se_s.push((var / mf).sqrt() / n);
    }
    Ok(out)
}

/// Finite-difference stencil for the τ-PDE check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeStencil {
    pub tau0: Complex64,
    pub z0: Complex64,
    pub h_tau: f64,
    pub h_z: f64,
    /// Reuse one generator stream per sample across all stencil points.
    pub common_random_numbers: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeResidual {
    /// `∂D/∂τ` minus the mode's spatial operator applied to `D`.
    pub residual: Complex64,
    /// Standard errors of the real and imaginary parts.
    pub se: Complex64,
    pub d: f64,
    pub d_tau: Complex64,
    pub m: usize,
}

impl PdeResidual {
    /// Both components within `k` standard errors.
    pub fn within(&self, k: f64) -> bool {
        self.residual.re.abs() <= k * self.se.re && self.residual.im.abs() <= k * self.se.im
    }
}

const Z_OFFSETS: [(i32, i32); 9] = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
const TAU_OFFSETS: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Checks `∂D/∂τ = (1/2N) ∂²D/∂z²` (additive) or
/// `∂D/∂τ = -(1/2N)(z² ∂²D/∂z² - (N-2) z ∂D/∂z - N D)` (multiplicative) at one
/// point, with Wirtinger derivatives from central differences.
pub fn pde_residual_check(spec: &ModelSpec, stencil: &PdeStencil, m: usize) -> Result<PdeResidual> {
    let PdeStencil { tau0, z0, h_tau, h_z, common_random_numbers } = *stencil;
    if m < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_SAMPLES, got: m });
    }
    if !(h_tau > 0.0 && h_tau.is_finite() && h_z > 0.0 && h_z.is_finite()) {
        return Err(Error::StencilIllConditioned(format!("steps must be positive, got h_tau = {h_tau}, h_z = {h_z}")));
    }
    if h_z < 1e-6 * (1.0 + z0.norm()) || h_tau < 1e-6 * (1.0 + tau0.norm()) {
        return Err(Error::StencilIllConditioned("steps too small for double-precision differences".into()));
    }
    let mut base = spec.clone();
    base.params.tau = tau0;
    base.validate()?;
    for (a, b) in TAU_OFFSETS {
        let mut sp = base.clone();
        sp.params.tau = tau0 + Complex64::new(a as f64, b as f64) * h_tau;
        sp.validate().map_err(|_| Error::StencilIllConditioned(format!("τ stencil point {} leaves the parameter disk", sp.params.tau)))?;
    }
    let n = spec.n;
    let nf = n as f64;
    let zs: Vec<Complex64> = Z_OFFSETS.iter().map(|&(a, b)| z0 + Complex64::new(a as f64, b as f64) * h_z).collect();

    let det2 = |sp: &ModelSpec, stream: u64, zs: &[Complex64]| -> Result<Vec<f64>> {
        let mut rng = sample_rng(sp.seed, stream);
        let ev = eigenvalues(&build_model_matrix(sp, &mut rng)?)?;
        let v: Vec<f64> = zs.iter().map(|z| ev.iter().map(|l| (z - l).norm_sqr()).product()).collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Overflow("|det|² exceeds f64 in the stencil".into()));
        }
        Ok(v)
    };

    // Per-sample (D at z0, d/dτ, spatial operator); averaging them is linear,
    // so their spread gives the standard errors directly.
    let per: Vec<(f64, Complex64, Complex64)> = map_samples(m, |i| {
        let stream = |slot: u64| if common_random_numbers { i as u64 } else { slot * m as u64 + i as u64 };
        let f = det2(&base, stream(0), &zs)?;
        let mut ft = [0.0; 4];
        for (k, (a, b)) in TAU_OFFSETS.iter().enumerate() {
            let mut sp = base.clone();
            sp.params.tau = tau0 + Complex64::new(*a as f64, *b as f64) * h_tau;
            ft[k] = det2(&sp, stream(k as u64 + 1), &zs[..1])?[0];
        }
        let d_tau = Complex64::new((ft[0] - ft[1]) / (2.0 * h_tau), -(ft[2] - ft[3]) / (2.0 * h_tau)) * 0.5;
        let h2 = h_z * h_z;
        let fx = (f[1] - f[2]) / (2.0 * h_z);
        let fy = (f[3] - f[4]) / (2.0 * h_z);
        let fxx = (f[1] - 2.0 * f[0] + f[2]) / h2;
        let fyy = (f[3] - 2.0 * f[0] + f[4]) / h2;
        let fxy = (f[5] - f[6] - f[7] + f[8]) / (4.0 * h2);
        let dz = Complex64::new(fx, -fy) * 0.5;
        let dzz = Complex64::new(fxx - fyy, -2.0 * fxy) * 0.25;
        let spatial = match base.kind {
            Mode::Additive => dzz / (2.0 * nf),
            Mode::Multiplicative => -(z0 * z0 * dzz - z0 * dz * (nf - 2.0) - f[0] * nf) / (2.0 * nf),
        };
        Ok((f[0], d_tau, spatial))
    })?;

    let mf = m as f64;
    let res: Vec<Complex64> = per.iter().map(|(_, dt, sp)| dt - sp).collect();
    let mean_c = |v: &[Complex64]| Complex64::new(pairwise_sum(&v.iter().map(|c| c.re).collect::<Vec<_>>()), pairwise_sum(&v.iter().map(|c| c.im).collect::<Vec<_>>())) / mf;
    let r = mean_c(&res);
    let var_re = res.iter().map(|c| (c.re - r.re).powi(2)).sum::<f64>() / (mf - 1.0);
    let var_im = res.iter().map(|c| (c.im - r.im).powi(2)).sum::<f64>() / (mf - 1.0);
    let d = pairwise_sum(&per.iter().map(|p| p.0).collect::<Vec<_>>()) / mf;
    let d_tau = mean_c(&per.iter().map(|p| p.1).collect::<Vec<_>>());
    Ok(PdeResidual { residual: r, se: Complex64::new((var_re / mf).sqrt(), (var_im / mf).sqrt()), d, d_tau, m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::InitialSpectrum;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn small_grid() -> Vec<Complex64> {
        grid((-1.5, 1.5), (-1.5, 1.5), 3, 3)
    }

    #[test]
    fn grid_is_inset() {
        let g = grid((-1.0, 1.0), (0.0, 2.0), 3, 3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], c(-0.8, 0.2));
        assert_eq!(g[8], c(0.8, 1.8));
    }

    #[test]
    fn scalar_model_matches_closed_form() {
        // N = 1: D = |z|² + s.
        let mut spec = ModelSpec::additive(1, 0.7, c(0.3, 0.2), InitialSpectrum::Zero);
        spec.seed = 1;
        let g = small_grid();
        let r = estimate_d_direct(&spec, &g, 100_000).unwrap();
        for (k, z) in g.iter().enumerate() {
            let want = z.norm_sqr() + 0.7;
            assert!((r.estimates[k] - want).abs() < 3.0 * r.std_errors[k], "{z}: {} vs {want} ± {}", r.estimates[k], r.std_errors[k]);
            assert!(r.estimates[k] >= 0.0 && r.std_errors[k] >= 0.0);
        }
    }

    #[test]
    fn far_field_is_leading_power() {
        let mut spec = ModelSpec::additive(4, 1.0, c(0.5, 0.0), InitialSpectrum::Zero);
        spec.seed = 2;
        let z = c(600.0, 800.0);
        let r = estimate_d_direct(&spec, &[z], 200).unwrap();
        assert!((r.estimates[0] / z.norm().powi(8) - 1.0).abs() < 0.02);
    }

    #[test]
    fn degenerate_multiplicative_is_exact() {
        let spec = ModelSpec::multiplicative(1, 0.0, c(0.0, 0.0), InitialSpectrum::Values(vec![c(1.0, 0.0)]));
        let g = small_grid();
        let r = estimate_d_direct(&spec, &g, 100).unwrap();
        for (k, z) in g.iter().enumerate() {
            assert!((r.estimates[k] - (z - 1.0).norm_sqr()).abs() < 1e-12);
            assert_eq!(r.std_errors[k], 0.0);
        }
    }

    #[test]
    fn heatflow_at_zero_increment_equals_direct() {
        let mut spec = ModelSpec::additive(3, 1.0, c(0.4, 0.1), InitialSpectrum::Values(vec![c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.5)]));
        spec.seed = 3;
        let g = small_grid();
        let a = estimate_d_direct(&spec, &g, 500).unwrap();
        let b = estimate_d_heatflow(&spec, spec.params.tau, spec.params.tau, &g, 500).unwrap();
        // Same samples, so agreement is to rounding rather than to noise.
        for k in 0..g.len() {
            assert!((a.estimates[k] - b.estimates[k]).abs() < 1e-9 * a.estimates[k]);
        }
        let v = verify_deformation(&a, &b, 4.0).unwrap();
        assert!(v.passed());
        assert!(v.rows.iter().all(|r| r.z_score.abs() < 1e-3));
    }

    #[test]
    fn identical_reports_pass_and_grids_must_match() {
        let mut spec = ModelSpec::additive(2, 1.0, c(0.5, 0.0), InitialSpectrum::Zero);
        spec.seed = 4;
        let a = estimate_d_direct(&spec, &small_grid(), 200).unwrap();
        let v = verify_deformation(&a, &a, 4.0).unwrap();
        assert_eq!(v.pass_fraction, 1.0);
        assert!(v.rows.iter().all(|r| r.z_score == 0.0));
        let b = estimate_d_direct(&spec, &[c(0.0, 0.0)], 200).unwrap();
        assert!(matches!(verify_deformation(&a, &b, 4.0), Err(Error::GridMismatch)));
        let mut csv = Vec::new();
        v.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("z_re,z_im,lhs,rhs,combined_se,z_score,pass\n"));
        assert_eq!(text.lines().count(), 10);
    }

    #[test]
    fn additive_deformation_small() {
        let mut spec = ModelSpec::additive(2, 1.0, c(0.0, 0.0), InitialSpectrum::Zero);
        spec.seed = 5;
        let g = vec![c(0.0, 0.0), c(0.5, 0.3)];
        let lhs = estimate_d_direct(&spec, &g, 20_000).unwrap();
        let mut spec0 = spec.clone();
        spec0.seed = 6;
        let rhs = estimate_d_heatflow(&spec0, c(1.0, 0.0), c(0.0, 0.0), &g, 20_000).unwrap();
        let v = verify_deformation(&lhs, &rhs, 4.0).unwrap();
        assert_eq!(v.pass_fraction, 1.0, "{v:?}");
    }

    #[test]
    fn standard_errors_shrink_with_samples() {
        let mut spec = ModelSpec::additive(2, 1.0, c(0.5, 0.0), InitialSpectrum::Zero);
        spec.seed = 7;
        let g = [c(0.3, 0.2)];
        let a = estimate_d_direct(&spec, &g, 4000).unwrap();
        let b = estimate_d_direct(&spec, &g, 16_000).unwrap();
        let ratio = a.std_errors[0] / b.std_errors[0];
        assert!((1.6..2.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn t_and_s() {
        let mut spec = ModelSpec::additive(1, 1.0, c(0.5, 0.0), InitialSpectrum::Zero);
        spec.seed = 8;
        let r = estimate_t_and_s(&spec, &[c(0.0, 0.0)], 50_000).unwrap();
        // D(0) = s = 1.
        assert!(r.t[0].abs() < 4.0 * r.se_t[0]);
        assert!(r.t[0] >= r.s[0]);

        let mut spec = ModelSpec::additive(4, 1.0, c(0.5, 0.0), InitialSpectrum::Zero);
        spec.seed = 9;
        let g = vec![c(100.0, 0.0), c(0.0, 0.5), c(1.0, 1.0)];
        let r = estimate_t_and_s(&spec, &g, 2000).unwrap();
        assert!(r.t[0] - r.s[0] <= 0.01);
        assert!(r.t.iter().zip(&r.s).all(|(t, s)| t >= s));
    }

    #[test]
    fn pde_scalar_case() {
        let mut spec = ModelSpec::additive(1, 1.0, c(0.5, 0.0), InitialSpectrum::Zero);
        spec.seed = 10;
        let st = PdeStencil { tau0: c(0.5, 0.0), z0: c(0.3, 0.1), h_tau: 0.05, h_z: 0.05, common_random_numbers: true };
        let r = pde_residual_check(&spec, &st, 20_000).unwrap();
        // D = |z|² + s: no τ dependence and ∂²/∂z² annihilates it.
        assert!(r.within(4.0), "{r:?}");
        assert!((r.d - (st.z0.norm_sqr() + 1.0)).abs() < 0.05);
    }

    #[test]
    fn pde_crn_reduces_noise() {
        let mut spec = ModelSpec::additive(2, 1.0, c(0.5, 0.0), InitialSpectrum::Zero);
        spec.seed = 11;
        let mut st = PdeStencil { tau0: c(0.5, 0.0), z0: c(0.3, 0.1), h_tau: 0.02, h_z: 0.02, common_random_numbers: true };
        let crn = pde_residual_check(&spec, &st, 5000).unwrap();
        st.common_random_numbers = false;
        let ind = pde_residual_check(&spec, &st, 5000).unwrap();
        assert!(crn.se.norm() * 5.0 < ind.se.norm(), "{:?} vs {:?}", crn.se, ind.se);
        assert!(crn.within(4.0), "{crn:?}");
    }

    #[test]
    fn pde_rejects_bad_stencils() {
        let spec = ModelSpec::additive(2, 1.0, c(0.5, 0.0), InitialSpectrum::Zero);
        let st = PdeStencil { tau0: c(0.5, 0.0), z0: c(0.0, 0.0), h_tau: 0.0, h_z: 0.1, common_random_numbers: true };
        assert!(matches!(pde_residual_check(&spec, &st, 200), Err(Error::StencilIllConditioned(_))));
        let st = PdeStencil { tau0: c(0.0, 0.0), z0: c(0.0, 0.0), h_tau: 0.1, h_z: 0.1, common_random_numbers: true };
        assert!(matches!(pde_residual_check(&spec, &st, 200), Err(Error::StencilIllConditioned(_))));
    }

    #[test]
    fn too_few_samples() {
        let spec = ModelSpec::additive(2, 1.0, c(0.5, 0.0), InitialSpectrum::Zero);
        assert!(matches!(estimate_d_direct(&spec, &[c(0.0, 0.0)], 50), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn report_json_shape() {
        let mut spec = ModelSpec::additive(1, 1.0, c(0.5, 0.0), InitialSpectrum::Zero);
        spec.seed = 12;
        let r = estimate_d_direct(&spec, &[c(0.5, -0.5)], 100).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["grid"], serde_json::json!([[0.5, -0.5]]));
        assert_eq!(v["M"], 100);
        assert_eq!(v["route"], "direct");
        assert!(v["params"]["n"] == 1);
        let back: SecondMomentReport = serde_json::from_value(v).unwrap();
        assert_eq!(back.estimates, r.estimates);
    }

    #[test]
    fn reduction_is_extended_range() {
        let logs = vec![2000.0, 2000.0 + 2f64.ln()];
        assert!(matches!(reduce_logs(&logs), Err(Error::Overflow(_))));
        let logs = vec![1.0f64.ln(), 3.0f64.ln()];
        let (mean, se, _) = reduce_logs(&logs).unwrap();
        assert!((mean - 2.0).abs() < 1e-15);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
