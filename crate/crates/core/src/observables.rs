//! Moments, empirical potentials and transforms, characteristic curves and
//! distances between point clouds.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointset::PointSet;
use crate::rootdyn::ode::{Advance, Dopri5, StepControl};
use crate::Mode;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Holomorphic moments `m_k = (1/N) sum z_j^k`, `k = 0..=K`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector {
    pub m: Vec<Complex64>,
    pub n: usize,
}

impl MomentVector {
    pub fn order(&self) -> usize {
        self.m.len() - 1
    }

    /// JSON array of `[re, im]` pairs.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(self.m.iter().map(|c| serde_json::json!([c.re, c.im])).collect())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, &self.to_json())?;
        Ok(())
    }

    pub fn from_json(v: &serde_json::Value, n: usize) -> Result<Self> {
        let pairs: Vec<[f64; 2]> = serde_json::from_value(v.clone())?;
        if pairs.is_empty() {
            return Err(Error::Parse("empty moment vector".into()));
        }
        Ok(MomentVector { m: pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect(), n })
    }
}

pub fn moments(points: &PointSet, k_max: usize) -> MomentVector {
    let n = points.len();
    let mut m = vec![Complex64::new(0.0, 0.0); k_max + 1];
    m[0] = Complex64::new(1.0, 0.0);
    if n == 0 {
        return MomentVector { m, n };
    }
    let mut pw: Vec<Complex64> = points.points.clone();
    for slot in m.iter_mut().skip(1) {
        *slot = pw.iter().sum::<Complex64>() / n as f64;
        for (p, z) in pw.iter_mut().zip(points.iter()) {
            *p *= z;
        }
    }
    MomentVector { m, n }
}

/// `dm_k/dτ = -(k/2) sum_{j=0}^{k-2} m_{k-j-2} m_j + k(k-1)/(2N) m_{k-2}`.
fn moment_rhs(m: &[Complex64], n: usize, out: &mut [Complex64]) {
    let inv_n = 1.0 / n as f64;
    for k in 0..m.len() {
        if k < 2 {
            out[k] = Complex64::new(0.0, 0.0);
            continue;
        }
        let conv: Complex64 = (0..=k - 2).map(|j| m[k - j - 2] * m[j]).sum();
        let kf = k as f64;
        out[k] = -conv * (kf / 2.0) + m[k - 2] * (kf * (kf - 1.0) / 2.0 * inv_n);
    }
}

/// Moments of the heat-evolved zero set, transported along the straight
/// segment from `tau0` to `tau1`.
pub fn evolve_moments(m0: &MomentVector, n: usize, tau0: Complex64, tau1: Complex64) -> Result<MomentVector> {
    if m0.m.is_empty() || n == 0 {
        return Err(Error::InvalidParams("evolve_moments needs m_0 and N >= 1".into()));
    }
    let delta = tau1 - tau0;
    let ctl = StepControl { rel_tol: 1e-12, abs_tol: 1e-14, max_step: 0.05, ..Default::default() };
    let mut ode = Dopri5::new(0.0, m0.m.clone(), ctl);
    let mut f = |_t: f64, y: &[Complex64], out: &mut [Complex64]| {
        moment_rhs(y, n, out);
        for o in out.iter_mut() {
            *o *= delta;
        }
        Ok(())
    };
    match ode.advance(1.0, &mut f, &mut |_, _| false)? {
        Advance::Reached => {}
        Advance::Stopped => unreachable!("no stopping check"),
    }
    let mut m = ode.y;
    // Orders 0 and 1 have zero derivative; keep them bit-exact.
    m[0] = m0.m[0];
    if m.len() > 1 {
        m[1] = m0.m[1];
    }
    Ok(MomentVector { m, n })
}

/// `(1/N) sum_k 1/(z - w_k)`, optionally leaving out one index.
pub fn cauchy_transform(points: &PointSet, z: Complex64, exclude: Option<usize>) -> Result<Complex64> {
    let n = points.len();
    let mut s = Complex64::new(0.0, 0.0);
    for (k, w) in points.iter().enumerate() {
        if Some(k) == exclude {
            continue;
        }
        let d = z - w;
        if d == Complex64::new(0.0, 0.0) {
            return Err(Error::PoleHit { index: k });
        }
        s += 1.0 / d;
    }
    Ok(s / n as f64)
}

/// `(1/N) sum_k log|z - w_k|^2`.
pub fn log_potential(points: &PointSet, z: Complex64) -> Result<f64> {
    let mut s = 0.0;
    for (k, w) in points.iter().enumerate() {
        let d = (z - w).norm_sqr();
        if d == 0.0 {
            return Err(Error::PoleHit { index: k });
        }
        s += d.ln();
    }
    Ok(s / points.len() as f64)
}

/// The real-linear map `z -> z + t conj(z)`. Defined for every real `t`; it
/// degenerates at `|t| = 1` and reverses orientation beyond.
pub fn pushforward_elliptic(points: &PointSet, t: f64) -> PointSet {
    points.map(|z| z + z.conj() * t)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CharCurveInput {
    pub z0: Complex64,
    /// `∂S/∂z` at `z0`.
    pub g: Complex64,
    pub delta_tau: Complex64,
    pub mode: Mode,
}

pub fn char_curve(input: &CharCurveInput) -> Result<Complex64> {
    let CharCurveInput { z0, g, delta_tau, mode } = *input;
    match mode {
        Mode::Additive => Ok(z0 - delta_tau * g),
        Mode::Multiplicative => {
            if z0 == Complex64::new(0.0, 0.0) {
                return Err(Error::ZeroPoint { index: 0 });
            }
            Ok(z0 * (delta_tau * (z0 * g - 0.5)).exp())
        }
    }
}

/// Each point pushed along its characteristic curve, with `∂S/∂z` replaced
/// by the self-excluded empirical Cauchy transform.
pub fn predicted_cloud(points: &PointSet, delta_tau: Complex64, mode: Mode) -> Result<PointSet> {
    let pts = &points.points;
    let n = pts.len();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut s = Complex64::new(0.0, 0.0);
        for k in 0..n {
            if k != j {
                let d = pts[j] - pts[k];
                if d == Complex64::new(0.0, 0.0) {
                    return Err(Error::CollisionDetected { i: j.min(k), j: j.max(k), separation: 0.0 });
                }
                s += 1.0 / d;
            }
        }
        let g = s / n as f64;
        let z = char_curve(&CharCurveInput { z0: pts[j], g, delta_tau, mode }).map_err(|e| match e {
            Error::ZeroPoint { .. } => Error::ZeroPoint { index: j },
            other => other,
        })?;
        out.push(z);
    }
    Ok(PointSet::new(out))
}

/// Uniform-weight empirical measure of a point set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    pub support: PointSet,
}

impl EmpiricalMeasure {
    pub fn new(support: PointSet) -> Self {
        assert!(!support.is_empty(), "empirical measure needs at least one point");
        EmpiricalMeasure { support }
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.support.len() as f64
    }

    pub fn distance(&self, other: &EmpiricalMeasure) -> f64 {
        energy_distance(&self.support.points, &other.support.points)
    }

    pub fn report(&self, other: &EmpiricalMeasure) -> DistanceReport {
        distance_report(&self.support.points, &other.support.points)
    }
}

impl From<PointSet> for EmpiricalMeasure {
    fn from(p: PointSet) -> Self {
        EmpiricalMeasure::new(p)
    }
}

fn row_sums(a: &[Complex64], b: &[Complex64]) -> Vec<f64> {
    let row = |x: &Complex64| b.iter().map(|y| (x - y).norm()).sum::<f64>();
    #[cfg(feature = "parallel")]
    {
        a.par_iter().map(row).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        a.iter().map(row).collect()
    }
}

/// Mean distance over distinct pairs within one sample; zero for a singleton.
fn within_mean(a: &[Complex64]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let total: f64 = row_sums(a, a).iter().sum();
    total / (n * (n - 1)) as f64
}

/// Planar energy distance `sqrt(2E|X-Y| - E|X-X'| - E|Y-Y'|)`. The
/// within-sample terms average over distinct pairs, which removes the
/// `O(1/n)` upward bias of the plain double sums; a negative estimate is
/// reported as zero.
pub fn energy_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "energy distance needs nonempty samples");
    // Row sums come back in order and are added sequentially, so the result
    // does not depend on the thread count.
    let cross: f64 = row_sums(a, b).iter().sum::<f64>() / (a.len() * b.len()) as f64;
    let e = 2.0 * cross - within_mean(a) - within_mean(b);
    e.max(0.0).sqrt()
}

/// Energy distance between two empirical measures.
pub fn distribution_distance(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> f64 {
    a.distance(b)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|x, y| x.total_cmp(y));
    v
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let a = sorted(a.to_vec());
    let b = sorted(b.to_vec());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_against(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    assert!(!xs.is_empty());
    let xs = sorted(xs.to_vec());
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// CDF of the semicircle law of variance `s` (support `[-2√s, 2√s]`).
pub fn semicircle_cdf(x: f64, s: f64) -> f64 {
    let r = 2.0 * s.sqrt();
    if x <= -r {
        return 0.0;
    }
    if x >= r {
        return 1.0;
    }
    let u = x / r;
    0.5 + (u * (1.0 - u * u).sqrt() + u.asin()) / std::f64::consts::PI
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub energy: f64,
    pub ks_re: f64,
    pub ks_im: f64,
    pub ks_radius: f64,
}

pub fn distance_report(a: &[Complex64], b: &[Complex64]) -> DistanceReport {
    let proj = |v: &[Complex64], f: fn(&Complex64) -> f64| v.iter().map(f).collect::<Vec<_>>();
    DistanceReport {
        energy: energy_distance(a, b),
        ks_re: ks_two_sample(&proj(a, |z| z.re), &proj(b, |z| z.re)),
        ks_im: ks_two_sample(&proj(a, |z| z.im), &proj(b, |z| z.im)),
        ks_radius: ks_two_sample(&proj(a, |z| z.norm()), &proj(b, |z| z.norm())),
    }
}

pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let v = sorted(values.into_iter().collect());
    assert!(!v.is_empty(), "median of nothing");
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn median_abs_imag(points: &PointSet) -> f64 {
    median(points.iter().map(|z| z.im.abs()))
}

/// Named limit laws for reference samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Reference {
    /// Semicircle on `[-2√s, 2√s]`.
    Semicircle { s: f64 },
    Disk,
    /// Uniform on the ellipse with semi-axes `a` (real) and `b` (imaginary).
    Ellipse { a: f64, b: f64 },
    Circle,
}

fn disk_point<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let r = rng.random::<f64>().sqrt();
    Complex64::from_polar(r, std::f64::consts::TAU * rng.random::<f64>())
}

pub fn reference_sampler<R: Rng + ?Sized>(reference: Reference, n: usize, rng: &mut R) -> Result<PointSet> {
    match reference {
        Reference::Semicircle { s } if !(s > 0.0 && s.is_finite()) => {
            return Err(Error::InvalidParams(format!("semicircle variance must be positive, got {s}")))
        }
        Reference::Ellipse { a, b } if !(a >= 0.0 && b >= 0.0 && a + b > 0.0 && a.is_finite() && b.is_finite()) => {
            return Err(Error::InvalidParams(format!("bad ellipse semi-axes ({a}, {b})")))
        }
        _ => {}
    }
    let pts = (0..n)
        .map(|_| match reference {
            // Projection of the uniform disk onto an axis is semicircular.
            Reference::Semicircle { s } => Complex64::new(2.0 * s.sqrt() * disk_point(rng).re, 0.0),
            Reference::Disk => disk_point(rng),
            Reference::Ellipse { a, b } => {
                let w = disk_point(rng);
                Complex64::new(a * w.re, b * w.im)
            }
            Reference::Circle => Complex64::from_polar(1.0, std::f64::consts::TAU * rng.random::<f64>()),
        })
        .collect();
    Ok(PointSet::new(pts))
}
