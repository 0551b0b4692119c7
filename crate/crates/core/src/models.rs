//! Random matrix ensembles: GUE, rotated elliptic, Haar unitary and the
//! discretized GL(N) Brownian motion, plus eigenvalue extraction.

use faer::{c64, Mat, Side};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointset::PointSet;
use crate::Mode;

pub type ComplexMatrix = Mat<c64>;

/// Variance `s` and covariance `τ` of a rotated elliptic matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticParams {
    pub s: f64,
    pub tau: Complex64,
    #[serde(default)]
    pub allow_extended: bool,
}

impl EllipticParams {
    pub fn new(s: f64, tau: Complex64) -> Self {
        EllipticParams { s, tau, allow_extended: false }
    }

    pub fn extended(s: f64, tau: Complex64) -> Self {
        EllipticParams { s, tau, allow_extended: true }
    }

    pub fn in_disk(&self) -> bool {
        (self.tau - self.s).norm() <= self.s * (1.0 + 1e-12)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s >= 0.0) || !self.s.is_finite() || !self.tau.re.is_finite() || !self.tau.im.is_finite() {
            return Err(Error::InvalidParams(format!("s = {}, tau = {}", self.s, self.tau)));
        }
        if self.s == 0.0 && self.tau != Complex64::new(0.0, 0.0) {
            return Err(Error::InvalidParams("s = 0 is only allowed with tau = 0".into()));
        }
        if !self.allow_extended && !self.in_disk() {
            return Err(self.extended_error());
        }
        Ok(())
    }

    fn extended_error(&self) -> Error {
        Error::ExtendedRange { s: self.s, tau: format!("{}", self.tau) }
    }
}

/// Deterministic eigenvalues, a fresh Haar unitary, or the zero matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSpectrum {
    Values(Vec<Complex64>),
    HaarUnitary,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: Mode,
    pub n: usize,
    pub params: EllipticParams,
    pub initial: InitialSpectrum,
    /// Number of factors `k` in the GL Brownian product; a default is derived
    /// from `(s, τ)` when absent.
    #[serde(default)]
    pub brownian_steps: Option<usize>,
    /// Multiply exact unitaries instead of Euler factors (requires `τ = 0`).
    #[serde(default)]
    pub exact_unitary: bool,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    pub fn additive(n: usize, s: f64, tau: Complex64, initial: InitialSpectrum) -> Self {
        ModelSpec { kind: Mode::Additive, n, params: EllipticParams::new(s, tau), initial, brownian_steps: None, exact_unitary: false, seed: 0 }
    }

    pub fn multiplicative(n: usize, s: f64, tau: Complex64, initial: InitialSpectrum) -> Self {
        ModelSpec { kind: Mode::Multiplicative, n, params: EllipticParams::new(s, tau), initial, brownian_steps: None, exact_unitary: false, seed: 0 }
    }

    pub fn steps(&self) -> usize {
        self.brownian_steps.unwrap_or_else(|| default_brownian_steps(&self.params))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParams("N must be positive".into()));
        }
        self.params.validate()?;
        if let InitialSpectrum::Values(v) = &self.initial {
            if v.len() != self.n {
                return Err(Error::InvalidParams(format!("initial spectrum has {} values, N = {}", v.len(), self.n)));
            }
            if self.kind == Mode::Multiplicative && v.iter().any(|z| z.norm() == 0.0) {
                return Err(Error::InvalidParams("multiplicative initial spectrum must be nonzero".into()));
            }
        }
        if self.brownian_steps == Some(0) {
            return Err(Error::InvalidParams("brownian_steps must be positive".into()));
        }
        if self.exact_unitary && self.params.tau != Complex64::new(0.0, 0.0) {
            return Err(Error::InvalidParams("exact unitary mode needs tau = 0".into()));
        }
        Ok(())
    }
}

/// `k = 100 max(1, ceil(s + |τ|))`.
pub fn default_brownian_steps(params: &EllipticParams) -> usize {
    100 * ((params.s + params.tau.norm()).ceil() as usize).max(1)
}

/// Generator for sample `stream` of a run seeded with `seed`. Streams are
/// independent, so samples can be drawn in any order or in parallel.
pub fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Hermitian Gaussian matrix with `E[(1/N) Tr X²] = s`.
pub fn sample_gue<R: Rng + ?Sized>(n: usize, s: f64, rng: &mut R) -> ComplexMatrix {
    let sd_diag = (s / n as f64).sqrt();
    let sd_off = (s / (2.0 * n as f64)).sqrt();
    let mut m = Mat::<c64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = c64::new(sd_diag * normal(rng), 0.0);
        for j in i + 1..n {
            let z = c64::new(sd_off * normal(rng), sd_off * normal(rng));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// `(a, b, θ)` with `a² + b² = s` and `e^{2iθ}(a² - b²) = s - τ`.
pub fn elliptic_decompose(params: &EllipticParams) -> Result<(f64, f64, f64)> {
    let (a, b, rot) = decompose_with_rotation(params)?;
    Ok((a, b, rot.arg()))
}

/// Like [`elliptic_decompose`] but returns `e^{iθ}` computed without a
/// round trip through the angle, so the `θ = π/2` case is exactly `i`.
fn decompose_with_rotation(params: &EllipticParams) -> Result<(f64, f64, Complex64)> {
    if params.s == 0.0 && params.tau == Complex64::new(0.0, 0.0) {
        return Ok((0.0, 0.0, Complex64::new(1.0, 0.0)));
    }
    if !(params.s > 0.0) {
        return Err(Error::InvalidParams(format!("s must be positive, got {}", params.s)));
    }
    if !params.in_disk() {
        return Err(params.extended_error());
    }
    let s = params.s;
    let d = s - params.tau;
    let r = d.norm().min(s);
    let a = ((s + r) / 2.0).sqrt();
    let b = ((s - r) / 2.0).max(0.0).sqrt();
    let rot = if d.im == 0.0 {
        if d.re >= 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 1.0)
        }
    } else {
        (d / d.norm()).sqrt()
    };
    Ok((a, b, rot))
}

/// `e^{iθ}(aX + ibY)` with independent unit GUEs `X`, `Y`. For extended
/// parameters on the negative real axis `τ = -t`, a GUE of variance `s + t`.
pub fn sample_elliptic<R: Rng + ?Sized>(n: usize, params: &EllipticParams, rng: &mut R) -> Result<ComplexMatrix> {
    if params.allow_extended && !params.in_disk() {
        if params.tau.im == 0.0 && params.tau.re < 0.0 {
            return Ok(sample_gue(n, params.s - params.tau.re, rng));
        }
        return Err(params.extended_error());
    }
    let (a, b, rot) = decompose_with_rotation(params)?;
    if a == 0.0 {
        return Ok(Mat::zeros(n, n));
    }
    let x = sample_gue(n, 1.0, rng);
    let mut z = Mat::<c64>::zeros(n, n);
    if b == 0.0 {
        for j in 0..n {
            for i in 0..n {
                z[(i, j)] = x[(i, j)] * a;
            }
        }
    } else {
        let y = sample_gue(n, 1.0, rng);
        let ib = c64::new(0.0, b);
        for j in 0..n {
            for i in 0..n {
                z[(i, j)] = x[(i, j)] * a + y[(i, j)] * ib;
            }
        }
    }
    if rot != Complex64::new(1.0, 0.0) {
        for j in 0..n {
            for i in 0..n {
                z[(i, j)] *= rot;
            }
        }
    }
    Ok(z)
}

/// Complex Ginibre matrix with `E|z_ij|² = 1`.
fn ginibre<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let sd = 0.5f64.sqrt();
    Mat::from_fn(n, n, |_, _| c64::new(sd * normal(rng), sd * normal(rng)))
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of
/// `diag(R)` moved into `Q`.
pub fn sample_haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(n, rng);
    let qr = g.qr();
    let mut q = qr.compute_Q();
    let r = qr.R();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() == 0.0 { c64::new(1.0, 0.0) } else { d / d.norm() };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let n = a.nrows();
    if n > 16 {
        return a * b;
    }
    let mut c = Mat::<c64>::zeros(n, b.ncols());
    for j in 0..b.ncols() {
        for k in 0..n {
            let bkj = b[(k, j)];
            if bkj == c64::new(0.0, 0.0) {
                continue;
            }
            for i in 0..n {
                c[(i, j)] += a[(i, k)] * bkj;
            }
        }
    }
    c
}

/// `exp(iH)` for Hermitian `H`, via its eigendecomposition.
fn exp_i_hermitian(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = h.nrows();
    let evd = h.self_adjoint_eigen(Side::Lower).map_err(|e| Error::NoConvergence {
        what: format!("Hermitian eigensolver: {e:?}"),
        worst_residual: f64::NAN,
    })?;
    let u = evd.U();
    let s = evd.S().column_vector();
    let phases: Vec<c64> = (0..n).map(|k| c64::from_polar(1.0, s[k].re)).collect();
    let mut out = Mat::<c64>::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let w = phases[k] * u[(j, k)].conj();
            for i in 0..n {
                out[(i, j)] += u[(i, k)] * w;
            }
        }
    }
    Ok(out)
}

/// Discretized left-invariant Brownian motion on GL(N):
/// `prod_j (I + (i/√k) Z_j - (s - τ)/(2k) I)`, or a product of exact
/// unitaries `exp(i Z_j/√k)` when `exact_unitary` is set (requires `τ = 0`).
pub fn sample_gl_brownian<R: Rng + ?Sized>(
    n: usize,
    params: &EllipticParams,
    steps: usize,
    exact_unitary: bool,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    assert!(steps >= 1, "GL Brownian motion needs at least one step");
    if params.s == 0.0 && params.tau == Complex64::new(0.0, 0.0) {
        return Ok(Mat::identity(n, n));
    }
    if !params.in_disk() {
        return Err(params.extended_error());
    }
    if exact_unitary && params.tau != Complex64::new(0.0, 0.0) {
        return Err(Error::InvalidParams("exact unitary mode needs tau = 0".into()));
    }
    let k = steps as f64;
    let scale = 1.0 / k.sqrt();
    let drift = (params.s - params.tau) / (2.0 * k);
    let mut b: ComplexMatrix = Mat::identity(n, n);
    for _ in 0..steps {
        let z = sample_elliptic(n, params, rng)?;
        let factor = if exact_unitary {
            let h = Mat::from_fn(n, n, |i, j| z[(i, j)] * scale);
            exp_i_hermitian(&h)?
        } else {
            let mut f = Mat::from_fn(n, n, |i, j| z[(i, j)] * c64::new(0.0, scale));
            for i in 0..n {
                f[(i, i)] += c64::new(1.0, 0.0) - drift;
            }
            f
        };
        b = matmul(&b, &factor);
    }
    Ok(b)
}

/// Additive: `diag(initial) + Z`. Multiplicative: `diag(initial) B`.
pub fn build_model_matrix<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Result<ComplexMatrix> {
    spec.validate()?;
    let n = spec.n;
    let initial: Option<ComplexMatrix> = match &spec.initial {
        InitialSpectrum::Zero => None,
        InitialSpectrum::Values(v) => Some(Mat::from_fn(n, n, |i, j| if i == j { v[i] } else { c64::new(0.0, 0.0) })),
        InitialSpectrum::HaarUnitary => Some(sample_haar_unitary(n, rng)),
    };
    match spec.kind {
        Mode::Additive => {
            let z = sample_elliptic(n, &spec.params, rng)?;
            Ok(match initial {
                Some(x0) => &x0 + &z,
                None => z,
            })
        }
        Mode::Multiplicative => {
            let b = sample_gl_brownian(n, &spec.params, spec.steps(), spec.exact_unitary, rng)?;
            Ok(match (initial, &spec.initial) {
                (Some(_), InitialSpectrum::Values(v)) => Mat::from_fn(n, n, |i, j| v[i] * b[(i, j)]),
                (Some(u0), _) => matmul(&u0, &b),
                (None, _) => Mat::zeros(n, n),
            })
        }
    }
}

/// All eigenvalues of a dense complex matrix.
pub fn eigenvalues(m: &ComplexMatrix) -> Result<PointSet> {
    let n = m.nrows();
    if n == 1 {
        return Ok(PointSet::new(vec![m[(0, 0)]]));
    }
    if n == 2 {
        // Closed form for 2×2, with the stable quadratic formula.
        let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let half_tr = (a + d) * 0.5;
        let disc = ((a - d) * 0.5) * ((a - d) * 0.5) + b * c;
        let sq = disc.sqrt();
        let l1 = if (half_tr + sq).norm() >= (half_tr - sq).norm() { half_tr + sq } else { half_tr - sq };
        let det = a * d - b * c;
        let l2 = if l1.norm() > 0.0 { det / l1 } else { half_tr - sq };
        return Ok(PointSet::new(vec![l1, l2]));
    }
    let ev = m.eigenvalues().map_err(|e| Error::NoConvergence { what: format!("eigensolver: {e:?}"), worst_residual: f64::NAN })?;
    Ok(PointSet::new(ev))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub s_hat: f64,
    pub tau_hat: Complex64,
    pub se_s: f64,
    /// Standard errors of the real and imaginary parts of `tau_hat`.
    pub se_tau: Complex64,
}

/// Means of `(1/N) Tr(Z*Z)` and `(1/N)(Tr(Z*Z) - Tr(Z²))` over samples, with
/// jackknife standard errors.
pub fn estimate_params(samples: &[ComplexMatrix]) -> Result<ParamEstimate> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: samples.len() });
    }
    let n = samples[0].nrows();
    if samples.iter().any(|m| m.nrows() != n || m.ncols() != n) {
        return Err(Error::InvalidParams("samples must share one square shape".into()));
    }
    let stats: Vec<(f64, Complex64)> = samples
        .iter()
        .map(|z| {
            let mut tr_zz = 0.0;
            let mut tr_z2 = c64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    tr_zz += z[(i, j)].norm_sqr();
                    tr_z2 += z[(i, j)] * z[(j, i)];
                }
            }
            let s = tr_zz / n as f64;
            (s, c64::new(s, 0.0) - tr_z2 / n as f64)
        })
        .collect();
    let m = stats.len() as f64;
    let sum_s: f64 = stats.iter().map(|x| x.0).sum();
    let sum_t: Complex64 = stats.iter().map(|x| x.1).sum();
    // Jackknife over leave-one-out means.
    let loo_s: Vec<f64> = stats.iter().map(|x| (sum_s - x.0) / (m - 1.0)).collect();
    let loo_t: Vec<Complex64> = stats.iter().map(|x| (sum_t - x.1) / (m - 1.0)).collect();
    let mean_loo_s = loo_s.iter().sum::<f64>() / m;
    let mean_loo_t = loo_t.iter().sum::<Complex64>() / m;
    let jk = |sq: f64| ((m - 1.0) / m * sq).sqrt();
    let se_s = jk(loo_s.iter().map(|v| (v - mean_loo_s).powi(2)).sum());
    let se_re = jk(loo_t.iter().map(|v| (v.re - mean_loo_t.re).powi(2)).sum());
    let se_im = jk(loo_t.iter().map(|v| (v.im - mean_loo_t.im).powi(2)).sum());
    Ok(ParamEstimate { s_hat: sum_s / m, tau_hat: sum_t / m, se_s, se_tau: Complex64::new(se_re, se_im) })
}
