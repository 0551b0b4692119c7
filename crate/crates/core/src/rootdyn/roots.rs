//! Simultaneous root finding: Aberth–Ehrlich sweeps in f64 coordinates with
//! extended-precision polynomial evaluation, then optional Newton–Aberth
//! polishing of each root in extended precision.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mp::MpComplex;
use crate::pointset::PointSet;
use crate::polyheat::Poly;

#[derive(Clone, Debug)]
pub struct RootOpts {
    /// Refine roots to extended precision after the f64 phase.
    pub polish: bool,
    /// Normwise backward error, as log2, that every root must reach. Unset,
    /// convergence is judged by step size alone and this only gates the
    /// stall rule.
    pub tol_log2: Option<f64>,
    pub max_iter: usize,
    /// Starting approximations (continuation); a cold start is used otherwise.
    pub initial: Option<Vec<Complex64>>,
}

impl Default for RootOpts {
    fn default() -> Self {
        RootOpts { polish: true, tol_log2: None, max_iter: 500, initial: None }
    }
}

impl RootOpts {
    pub fn fast() -> Self {
        RootOpts { polish: false, ..Default::default() }
    }

    pub fn warm(initial: Vec<Complex64>, polish: bool) -> Self {
        RootOpts { polish, initial: Some(initial), ..Default::default() }
    }
}

#[derive(Clone, Debug)]
pub struct RootReport {
    pub points: PointSet,
    /// Extended-precision roots, present when polishing ran.
    pub mp: Option<Vec<MpComplex>>,
    /// Largest normwise backward error over all roots, as log2.
    pub worst_log2_backward_error: f64,
    pub sweeps: usize,
}

/// All zeros of `p` with multiplicity.
pub fn roots(p: &Poly, opts: &RootOpts) -> Result<PointSet> {
    roots_detailed(p, opts).map(|r| r.points)
}

/// `(c, e)` with `z = c * 2^e` and `|c|` of order one.
fn scaled(z: &MpComplex) -> (Complex64, i64) {
    let (fr, er) = z.re.to_f64_exp();
    let (fi, ei) = z.im.to_f64_exp();
    let e = match (fr == 0.0, fi == 0.0) {
        (true, true) => return (Complex64::new(0.0, 0.0), 0),
        (true, false) => ei,
        (false, true) => er,
        _ => er.max(ei),
    };
    let sr = if fr == 0.0 { 0.0 } else { fr * ((er - e).max(-1100) as f64).exp2() };
    let si = if fi == 0.0 { 0.0 } else { fi * ((ei - e).max(-1100) as f64).exp2() };
    (Complex64::new(sr, si), e)
}

/// `a / b` as f64, valid whenever the quotient itself is in range.
pub(crate) fn ratio(a: &MpComplex, b: &MpComplex) -> Complex64 {
    let (ca, ea) = scaled(a);
    let (cb, eb) = scaled(b);
    if ca == Complex64::new(0.0, 0.0) {
        return ca;
    }
    if cb == Complex64::new(0.0, 0.0) {
        return Complex64::new(f64::INFINITY, 0.0);
    }
    let d = (ea - eb).clamp(-2000, 2000) as f64;
    (ca / cb) * d.exp2()
}

fn log_sum_exp2(terms: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.filter(|x| x.is_finite()).collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp2()).sum::<f64>().log2()
}

struct Scale {
    log2_abs: Vec<f64>,
}

impl Scale {
    fn new(p: &Poly) -> Self {
        Scale { log2_abs: p.coeffs().iter().map(|c| c.log2_abs()).collect() }
    }

    /// `log2 sum_k |a_k| |z|^k`.
    fn log2_at(&self, z: Complex64) -> f64 {
        let lr = z.norm().log2();
        if !lr.is_finite() {
            return self.log2_abs[0];
        }
        log_sum_exp2(self.log2_abs.iter().enumerate().map(|(k, &la)| la + k as f64 * lr))
    }

    fn backward_error(&self, value: &MpComplex, z: Complex64) -> f64 {
        value.log2_abs() - self.log2_at(z)
    }
}

/// Cold-start guesses on circles whose radii come from the upper convex hull
/// of `(k, log|a_k|)`.
fn initial_guesses(p: &Poly) -> Vec<Complex64> {
    let n = p.degree();
    let la: Vec<f64> = p.coeffs().iter().map(|c| c.log2_abs()).collect();
    let pts: Vec<(usize, f64)> = la.iter().cloned().enumerate().filter(|(_, v)| v.is_finite()).collect();
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for &q in &pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 as f64 - a.0 as f64) * (q.1 - a.1) - (b.1 - a.1) * (q.0 as f64 - a.0 as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(q);
    }
    let mut out = Vec::with_capacity(n);
    // Roots at zero for vanishing low coefficients.
    let first = hull.first().map(|h| h.0).unwrap_or(0);
    out.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), first));
    let sigma = 0.7;
    for w in hull.windows(2) {
        let (k0, l0) = w[0];
        let (k1, l1) = w[1];
        let cnt = k1 - k0;
        let r = ((l0 - l1) / cnt as f64).exp2();
        for i in 0..cnt {
            let th = std::f64::consts::TAU * i as f64 / cnt as f64 + 2.0 * std::f64::consts::PI * k1 as f64 / n as f64 + sigma;
            out.push(Complex64::from_polar(r, th));
        }
    }
    out
}

/// Nudge exactly coincident starting points apart.
fn separate(z: &mut [Complex64]) {
    let scale = z.iter().map(|w| w.norm()).fold(0.0, f64::max).max(1e-300);
    for i in 0..z.len() {
        for j in 0..i {
            if z[i] == z[j] {
                let th = 2.39996 * (i as f64 + 1.0);
                z[i] += Complex64::from_polar(1e-7 * scale, th);
            }
        }
    }
}

/// Relative step below which a non-contracting iteration counts as stuck on
/// an unresolvable cluster rather than still travelling.
const STALL_STEP: f64 = 1e-5;

pub fn roots_detailed(p: &Poly, opts: &RootOpts) -> Result<RootReport> {
    let n = p.degree();
    assert!(n >= 1, "roots needs degree at least 1");
    let bits = p.precision_bits();
    let eps = f64::EPSILON;
    let tol_log2 = opts.tol_log2.unwrap_or(if opts.polish {
        -(bits as f64) / 2.0
    } else {
        (16.0 * n as f64 * eps).log2()
    });
    let scale = Scale::new(p);

    let mut z: Vec<Complex64> = match &opts.initial {
        Some(init) => {
            assert_eq!(init.len(), n, "initial guesses must match the degree");
            init.clone()
        }
        None => initial_guesses(p),
    };
    separate(&mut z);

    if n == 1 {
        // -a0 / a1
        let r = p.coeff(0).div(p.coeff(1));
        let r = MpComplex::new(-&r.re, -&r.im);
        return Ok(RootReport {
            points: PointSet::new(vec![r.to_c64()]),
            mp: Some(vec![r]),
            worst_log2_backward_error: f64::NEG_INFINITY,
            sweeps: 0,
        });
    }

    // Phase 1: Aberth in f64 coordinates. A root is done once its correction
    // reaches rounding level, or once it stalls at a small step (clusters
    // that f64 cannot resolve). The normwise backward error alone is no
    // guide here: after heavy cancellation in the coefficients it can be
    // tiny far from any zero.
    let mut done = vec![false; n];
    let mut berr = vec![f64::INFINITY; n];
    let mut last_step = vec![f64::INFINITY; n];
    let mut stalled = vec![0usize; n];
    let stall_berr = tol_log2.max((16.0 * n as f64 * eps).log2());
    let mut sweeps = 0;
    while sweeps < opts.max_iter && done.iter().any(|d| !d) {
        sweeps += 1;
        for j in 0..n {
            if done[j] {
                continue;
            }
            let (v, dv) = p.evaluate_with_derivative(z[j]);
            berr[j] = scale.backward_error(&v, z[j]);
            if v.is_zero() {
                done[j] = true;
                continue;
            }
            let newton = ratio(&v, &dv);
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..n {
                if k != j {
                    let d = z[j] - z[k];
                    if d != Complex64::new(0.0, 0.0) {
                        s += 1.0 / d;
                    }
                }
            }
            let denom = Complex64::new(1.0, 0.0) - newton * s;
            let w = if newton.is_finite() && denom.is_finite() && denom != Complex64::new(0.0, 0.0) {
                newton / denom
            } else {
                // p'(z) vanished: step off the critical point.
                Complex64::from_polar(1e-3 * (1.0 + z[j].norm()), 1.0 + j as f64)
            };
            z[j] -= w;
            let step = w.norm();
            if step <= 4.0 * eps * z[j].norm() || step < 1e-300 {
                done[j] = true;
            } else if step > 0.5 * last_step[j] {
                stalled[j] += 1;
                if stalled[j] >= 8 && berr[j] <= stall_berr && step <= STALL_STEP * (1.0 + z[j].norm()) {
                    done[j] = true;
                }
            } else {
                stalled[j] = 0;
            }
            last_step[j] = step;
        }
    }
    for j in 0..n {
        let v = p.evaluate(z[j]);
        berr[j] = scale.backward_error(&v, z[j]);
    }

    if !opts.polish {
        let worst = berr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // Roots whose correction hit rounding level are as good as f64 gets;
        // the backward error only binds when the caller asked for it.
        let unconverged = done.iter().any(|d| !d);
        if unconverged || (opts.tol_log2.is_some() && worst > tol_log2) {
            return Err(Error::NoConvergence {
                what: format!("root finding, degree {n}"),
                worst_residual: worst.exp2(),
            });
        }
        return Ok(RootReport { points: PointSet::new(z), mp: None, worst_log2_backward_error: worst, sweeps });
    }

    // Phase 2: Newton–Aberth in extended precision.
    let mut zm: Vec<MpComplex> = z.iter().map(|&w| MpComplex::from_c64(w, bits)).collect();
    let mut fin = vec![false; n];
    let mut polish_sweeps = 0;
    while polish_sweeps < opts.max_iter && fin.iter().any(|f| !f) {
        polish_sweeps += 1;
        for j in 0..n {
            if fin[j] {
                continue;
            }
            let zj = zm[j].to_c64();
            let (v, dv) = p.evaluate_with_derivative_mp(&zm[j]);
            berr[j] = scale.backward_error(&v, zj);
            if v.is_zero() {
                fin[j] = true;
                continue;
            }
            if dv.is_zero() {
                zm[j] = zm[j].add(&MpComplex::from_c64(Complex64::from_polar(1e-10 * (1.0 + zj.norm()), 1.0), bits));
                continue;
            }
            let newton = v.div(&dv);
            let nf = newton.to_c64();
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..n {
                if k != j {
                    let d = zm[j].sub(&zm[k]).to_c64();
                    if d != Complex64::new(0.0, 0.0) {
                        s += 1.0 / d;
                    }
                }
            }
            let ns = nf * s;
            let g = ns / (Complex64::new(1.0, 0.0) - ns);
            let step = if g.is_finite() { newton.add(&newton.mul_c64(g)) } else { newton };
            zm[j] = zm[j].sub(&step);
            // Converged once the update sits below half the working precision
            // relative to the root, or below the loose threshold with a small
            // backward error (multiple roots converge only linearly).
            let rel = step.log2_abs() - (1.0 + zj.norm()).log2();
            if rel <= -(bits as f64) / 2.0 || (berr[j] <= tol_log2 && rel <= -(bits as f64) / 8.0) {
                fin[j] = true;
            }
        }
    }
    for j in 0..n {
        berr[j] = scale.backward_error(&p.evaluate_mp(&zm[j]), zm[j].to_c64());
    }
    let worst = berr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if fin.iter().any(|f| !f) || (opts.tol_log2.is_some() && worst > tol_log2) {
        return Err(Error::NoConvergence {
            what: format!("root polishing, degree {n}"),
            worst_residual: worst.exp2(),
        });
    }
    Ok(RootReport {
        points: zm.iter().map(|w| w.to_c64()).collect(),
        mp: Some(zm),
        worst_log2_backward_error: worst,
        sweeps: sweeps + polish_sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyheat::{heat_additive, hermite, HeatStep};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        v
    }

    #[test]
    fn quadratic() {
        let p = Poly::from_c64(&[c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], 256);
        let r = sorted(roots(&p, &RootOpts::default()).unwrap().points);
        assert!((r[0] - c(0.0, -1.0)).norm() < 1e-15);
        assert!((r[1] - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn triple_root() {
        let p = Poly::from_roots(&PointSet::from_real(&[1.0, 1.0, 1.0]), 256);
        let r = roots(&p, &RootOpts::default()).unwrap();
        for z in r.iter() {
            assert!((z - c(1.0, 0.0)).norm() < 1e-6, "{z}");
        }
    }

    #[test]
    fn linear_and_zero_roots() {
        let p = Poly::from_c64(&[c(2.0, 2.0), c(-4.0, 0.0)], 128);
        assert_eq!(roots(&p, &RootOpts::default()).unwrap().points, vec![c(0.5, 0.5)]);
        let q = Poly::from_roots(&PointSet::from_real(&[0.0, 0.0, 2.0]), 256);
        let r = sorted(roots(&q, &RootOpts::default()).unwrap().points);
        assert!(r[0].norm() < 1e-30 && r[1].norm() < 1e-30);
        assert!((r[2] - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn round_trip_fifty_disk_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Complex64> = (0..50)
            .map(|_| Complex64::from_polar(rng.random::<f64>().sqrt(), rng.random::<f64>() * std::f64::consts::TAU))
            .collect();
        let p = Poly::from_roots(&PointSet::new(pts.clone()), 256);
        let rep = roots_detailed(&p, &RootOpts::default()).unwrap();
        let mp = rep.mp.unwrap();
        for want in &pts {
            let w = MpComplex::from_c64(*want, 256);
            let best = mp.iter().map(|z| z.sub(&w).log2_abs()).fold(f64::INFINITY, f64::min);
            assert!(best < (1e-20f64).log2(), "{want}: {}", best.exp2());
        }
    }

    #[test]
    fn hermite_roots_are_real() {
        let h = hermite(30, 256);
        let r = roots(&h, &RootOpts::default()).unwrap();
        assert_eq!(r.len(), 30);
        for z in r.iter() {
            assert!(z.im.abs() < 1e-12, "{z}");
        }
        // Largest root of the scaled Hermite polynomial stays inside [-2, 2].
        assert!(r.iter().all(|z| z.re.abs() < 2.0));
    }

    #[test]
    fn cold_start_survives_coefficient_cancellation() {
        // Coefficients of H_100 are enormous next to its values on [-2, 2], so
        // points far from any zero already have a tiny normwise residual.
        let n = 100;
        let h = hermite(n, crate::polyheat::default_precision(n));
        let r = roots(&h, &RootOpts::fast()).unwrap();
        let worst = r.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn warm_start_after_small_heat_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Complex64> = (0..40).map(|_| c(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)).collect();
        let p = Poly::from_roots(&PointSet::new(pts.clone()), 256);
        let q = heat_additive(&p, &HeatStep::additive(c(0.01, 0.0), 40));
        let cold = roots_detailed(&q, &RootOpts::fast()).unwrap();
        let warm = roots_detailed(&q, &RootOpts::warm(pts, false)).unwrap();
        assert!(warm.sweeps <= cold.sweeps);
        assert!(warm.worst_log2_backward_error < -40.0);
    }
}
