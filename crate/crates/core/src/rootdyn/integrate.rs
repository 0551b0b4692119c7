//! Trajectory integration: the CM ODE as the fast path and the coefficient
//! route (heat the polynomial, re-extract roots) as ground truth through
//! near-collisions.

use num_complex::Complex64;

use super::cm::log_velocity;
use super::matching::{match_points_lenient, max_pairing_distance, reorder};
use super::ode::{Advance, Dopri5, StepControl};
use super::roots::{roots_detailed, RootOpts};
use super::{CollisionEvent, Method, TrajectoryBundle};
use crate::error::{Error, Result};
use crate::pointset::PointSet;
use crate::polyheat::{default_precision, heat, HeatStep, Poly};
use crate::Mode;

#[derive(Clone, Debug)]
pub struct IntegrationOpts {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Collision guard; defaults to `1e-4` times the diameter of the start set.
    pub min_separation: Option<f64>,
    pub max_step: f64,
    pub initial_step: f64,
    /// Bridge near-collisions with the coefficient route instead of failing.
    pub fallback: bool,
    /// Width in `t` of each coefficient-route bridge.
    pub window: f64,
    /// Number of equally spaced output samples in `t`, endpoints included.
    pub samples: usize,
    /// Working precision for the coefficient route.
    pub precision_bits: Option<u32>,
    /// Compare the endpoint with roots of the fully evolved polynomial.
    pub cross_validate: bool,
}

impl Default for IntegrationOpts {
    fn default() -> Self {
        IntegrationOpts {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            min_separation: None,
            max_step: 0.05,
            initial_step: 1e-3,
            fallback: true,
            window: 1e-2,
            samples: 11,
            precision_bits: None,
            cross_validate: false,
        }
    }
}

fn sample_times(samples: usize) -> Vec<f64> {
    let s = samples.max(2);
    (0..s).map(|i| i as f64 / (s - 1) as f64).collect()
}

fn min_sep(points: &[Complex64]) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::INFINITY);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = (points[i] - points[j]).norm();
            if d < best.2 {
                best = (i, j, d);
            }
        }
    }
    best
}

/// Roots of the start polynomial evolved to `t`, continued from `prev`.
struct CoefficientRoute {
    p0: Poly,
    n: usize,
    delta: Complex64,
    mode: Mode,
}

impl CoefficientRoute {
    fn new(start: &PointSet, n: usize, delta: Complex64, mode: Mode, bits: u32) -> Self {
        CoefficientRoute { p0: Poly::from_roots(start, bits), n, delta, mode }
    }

    fn poly_at(&self, t: f64) -> Poly {
        let step = HeatStep { delta_tau: self.delta * t, n: self.n, mode: self.mode };
        heat(&self.p0, &step)
    }

    fn roots_at(&self, t: f64, prev: Option<&[Complex64]>) -> Result<Vec<Complex64>> {
        let q = self.poly_at(t);
        let warm = prev.map(|p| RootOpts::warm(p.to_vec(), false));
        let found = match warm {
            Some(opts) => roots_detailed(&q, &opts).or_else(|_| roots_detailed(&q, &RootOpts::fast()))?,
            None => roots_detailed(&q, &RootOpts::fast())?,
        };
        let pts = found.points.points;
        Ok(match prev {
            Some(p) => {
                let m = match_points_lenient(p, &pts);
                reorder(&pts, &m.perm)
            }
            None => pts,
        })
    }
}

/// Continue the branch of `log z` closest to `reference`.
fn log_near(z: Complex64, reference: Complex64) -> Complex64 {
    let u = z.ln();
    let k = ((reference.im - u.im) / std::f64::consts::TAU).round();
    Complex64::new(u.re, u.im + k * std::f64::consts::TAU)
}

/// Zero paths along the segment from `tau0` to `tau1`, integrating the CM
/// system of the given mode and bridging near-collisions through the
/// coefficient route.
pub fn integrate_trajectories(
    start: &PointSet,
    n: usize,
    tau0: Complex64,
    tau1: Complex64,
    mode: Mode,
    opts: &IntegrationOpts,
) -> Result<TrajectoryBundle> {
    assert!(start.is_finite() && !start.is_empty());
    if opts.rel_tol <= 0.0 || opts.abs_tol <= 0.0 {
        return Err(Error::InvalidParams("integration tolerances must be positive".into()));
    }
    if mode == Mode::Multiplicative {
        if let Some(index) = start.iter().position(|z| z.norm() == 0.0) {
            return Err(Error::ZeroPoint { index });
        }
    }
    let delta = tau1 - tau0;
    let diam = start.diameter();
    let guard = opts.min_separation.unwrap_or(1e-4 * if diam > 0.0 { diam } else { 1.0 });
    let bits = opts.precision_bits.unwrap_or_else(|| default_precision(n));
    let route = CoefficientRoute::new(start, n, delta, mode, bits);
    let times = sample_times(opts.samples);

    let to_state = |pts: &[Complex64], prev_state: Option<&[Complex64]>| -> Vec<Complex64> {
        match mode {
            Mode::Additive => pts.to_vec(),
            Mode::Multiplicative => match prev_state {
                Some(ps) => pts.iter().zip(ps).map(|(&z, &r)| log_near(z, r)).collect(),
                None => pts.iter().map(|z| z.ln()).collect(),
            },
        }
    };
    let to_points = |y: &[Complex64]| -> Vec<Complex64> {
        match mode {
            Mode::Additive => y.to_vec(),
            Mode::Multiplicative => y.iter().map(|u| u.exp()).collect(),
        }
    };
    let mut rhs = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| -> Result<()> {
        match mode {
            Mode::Additive => {
                let inv_n = 1.0 / n as f64;
                for j in 0..y.len() {
                    let mut s = Complex64::new(0.0, 0.0);
                    for k in 0..y.len() {
                        if k != j {
                            s += 1.0 / (y[j] - y[k]);
                        }
                    }
                    dy[j] = -s * inv_n * delta;
                }
            }
            Mode::Multiplicative => {
                let z: Vec<Complex64> = y.iter().map(|u| u.exp()).collect();
                for (d, v) in dy.iter_mut().zip(log_velocity(&z, n)) {
                    *d = v * delta;
                }
            }
        }
        Ok(())
    };

    let ctl = StepControl {
        rel_tol: opts.rel_tol,
        abs_tol: opts.abs_tol,
        max_step: opts.max_step,
        initial_step: opts.initial_step,
        ..StepControl::default()
    };
    let mut record: Vec<Vec<Complex64>> = vec![start.points.clone()];
    let mut collisions = Vec::new();
    let mut ode = Dopri5::new(0.0, to_state(&start.points, None), ctl);
    let mut next_sample = 1usize;
    let mut pending_collision = min_sep(&start.points).2 < guard;

    while next_sample < times.len() {
        if !pending_collision {
            let target = times[next_sample];
            let mut check = |_t: f64, y: &[Complex64]| min_sep(&to_points(y)).2 < guard;
            match ode.advance(target, &mut rhs, &mut check) {
                Ok(Advance::Reached) => {
                    record.push(to_points(&ode.y));
                    next_sample += 1;
                    continue;
                }
                Ok(Advance::Stopped) => {}
                Err(Error::NoConvergence { .. }) if opts.fallback => {}
                Err(e) => return Err(e),
            }
        }
        if !opts.fallback {
            return Err(Error::CollisionUnresolved { t: ode.t });
        }
        // Bridge with the coefficient route until the points separate again.
        let t_c = ode.t;
        let mut prev = to_points(&ode.y);
        let (i, j, mut sep) = min_sep(&prev);
        let mut t = t_c;
        loop {
            let t_next = (t + opts.window).min(1.0);
            while next_sample < times.len() && times[next_sample] <= t_next {
                let pts = route.roots_at(times[next_sample], Some(&prev))?;
                sep = sep.min(min_sep(&pts).2);
                record.push(pts.clone());
                prev = pts;
                next_sample += 1;
            }
            if t_next > times[next_sample.saturating_sub(1)] {
                let pts = route.roots_at(t_next, Some(&prev))?;
                prev = pts;
            }
            t = t_next;
            let s_now = min_sep(&prev).2;
            if t >= 1.0 || s_now >= guard {
                break;
            }
            sep = sep.min(s_now);
        }
        collisions.push(CollisionEvent { t: t_c, i, j, min_separation: sep, resumed_at: t });
        let state = to_state(&prev, Some(&ode.y));
        ode.reset(t, state);
        pending_collision = false;
    }

    let mut paths = vec![Vec::with_capacity(times.len()); start.len()];
    for snap in &record {
        for (j, z) in snap.iter().enumerate() {
            paths[j].push(*z);
        }
    }
    let endpoint_discrepancy = if opts.cross_validate {
        let want = route.roots_at(1.0, None)?;
        Some(max_pairing_distance(record.last().expect("samples"), &want))
    } else {
        None
    };
    Ok(TrajectoryBundle {
        tau_samples: times.iter().map(|&t| tau0 + delta * t).collect(),
        t_samples: times,
        paths,
        collisions,
        method: Method::Ode,
        endpoint_discrepancy,
    })
}

/// Roots of the evolved polynomial at each of `times` (values of `t` in
/// `[0, 1]`, increasing), continued and matched from `start`.
pub fn coefficient_roots_along(
    start: &PointSet,
    n: usize,
    delta: Complex64,
    mode: Mode,
    times: &[f64],
    precision_bits: u32,
) -> Result<Vec<Vec<Complex64>>> {
    let route = CoefficientRoute::new(start, n, delta, mode, precision_bits);
    let mut prev = start.points.clone();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let pts = if t == 0.0 { start.points.clone() } else { route.roots_at(t, Some(&prev))? };
        prev = pts.clone();
        out.push(pts);
    }
    Ok(out)
}

/// Zero paths by the coefficient route alone: heat, re-extract, match.
pub fn integrate_coefficient(
    start: &PointSet,
    n: usize,
    tau0: Complex64,
    tau1: Complex64,
    mode: Mode,
    samples: usize,
    precision_bits: Option<u32>,
) -> Result<TrajectoryBundle> {
    let delta = tau1 - tau0;
    let times = sample_times(samples);
    let bits = precision_bits.unwrap_or_else(|| default_precision(n));
    let record = coefficient_roots_along(start, n, delta, mode, &times, bits)?;
    let mut paths = vec![Vec::with_capacity(times.len()); start.len()];
    for snap in &record {
        for (j, z) in snap.iter().enumerate() {
            paths[j].push(*z);
        }
    }
    Ok(TrajectoryBundle {
        tau_samples: times.iter().map(|&t| tau0 + delta * t).collect(),
        t_samples: times,
        paths,
        collisions: Vec::new(),
        method: Method::Coefficient,
        endpoint_discrepancy: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn two_points_additive() {
        let start = PointSet::from_real(&[1.0, -1.0]);
        let b = integrate_trajectories(&start, 2, c(0.0, 0.0), c(1.0, 0.0), Mode::Additive, &IntegrationOpts::default()).unwrap();
        let end = b.endpoints();
        assert!((end.points[0] - c(0.5f64.sqrt(), 0.0)).norm() < 1e-8);
        assert!((end.points[1] + c(0.5f64.sqrt(), 0.0)).norm() < 1e-8);
        assert!(b.collisions.is_empty());
    }

    #[test]
    fn two_points_collide_at_origin() {
        let start = PointSet::from_real(&[1.0, -1.0]);
        let b = integrate_trajectories(&start, 2, c(0.0, 0.0), c(2.0, 0.0), Mode::Additive, &IntegrationOpts::default()).unwrap();
        assert_eq!(b.collisions.len(), 1);
        assert!((b.collisions[0].t - 1.0).abs() < 0.01);
        for z in b.endpoints().iter() {
            assert!(z.norm() < 1e-6, "{z}");
        }
        let strict = IntegrationOpts { fallback: false, ..Default::default() };
        assert!(matches!(
            integrate_trajectories(&start, 2, c(0.0, 0.0), c(2.0, 0.0), Mode::Additive, &strict),
            Err(Error::CollisionUnresolved { .. })
        ));
    }

    #[test]
    fn two_points_multiplicative() {
        let start = PointSet::from_real(&[1.0, -1.0]);
        let t = 0.8;
        let b = integrate_trajectories(&start, 2, c(0.0, 0.0), c(t, 0.0), Mode::Multiplicative, &IntegrationOpts::default()).unwrap();
        let e = (t / 4.0f64).exp();
        let end = b.endpoints();
        assert!((end.points[0] - c(e, 0.0)).norm() < 1e-8);
        assert!((end.points[1] + c(e, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn coefficient_route_agrees() {
        let start = PointSet::new(vec![c(0.3, 0.2), c(-0.5, 0.1), c(0.1, -0.7), c(0.9, 0.4)]);
        let opts = IntegrationOpts { cross_validate: true, ..Default::default() };
        for mode in [Mode::Additive, Mode::Multiplicative] {
            let b = integrate_trajectories(&start, 4, c(0.2, 0.0), c(0.5, 0.4), mode, &opts).unwrap();
            assert!(b.endpoint_discrepancy.unwrap() < 1e-8);
            let k = integrate_coefficient(&start, 4, c(0.2, 0.0), c(0.5, 0.4), mode, 11, None).unwrap();
            for s in 0..11 {
                for j in 0..4 {
                    assert!((b.paths[j][s] - k.paths[j][s]).norm() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn bundle_csv_shape() {
        let start = PointSet::from_real(&[1.0, -1.0]);
        let b = integrate_trajectories(&start, 2, c(0.0, 0.0), c(1.0, 0.0), Mode::Additive, &IntegrationOpts { samples: 3, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,tau_re,tau_im,z1_re,z1_im,z2_re,z2_im");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1].split(',').count(), 7);
    }
}
